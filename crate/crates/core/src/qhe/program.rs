//! Line-oriented circuit programs.
//!
//! ```text
//! # teleport
//! CNOT 0 1
//! H 0
//! MEAS 0 1 feedback
//! CORR 0 1 2
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use super::bridge::MeasMode;
use crate::error::{Error, Result};
use crate::mlwe::TraceOp;
use crate::qsim::{GateLabel, GateSuperop};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Instruction {
    Gate { label: GateLabel, wires: Vec<usize> },
    Meas { wires: Vec<usize>, mode: MeasMode },
    /// X^{m(x_from)} Z^{m(z_from)} on `target`.
    Corr { z_from: usize, x_from: usize, target: usize },
}

impl Instruction {
    pub fn gate(label: GateLabel, wires: &[usize]) -> Self {
        Instruction::Gate { label, wires: wires.to_vec() }
    }

    pub fn label(&self) -> String {
        match self {
            Instruction::Gate { label, .. } => match label {
                GateLabel::Rz(_) => "RZ".into(),
                other => other.to_string(),
            },
            Instruction::Meas { .. } => "MEAS".into(),
            Instruction::Corr { .. } => "CORR".into(),
        }
    }

    /// Analytic ledger entry and scale bits consumed.
    pub fn plan_op(&self, frac_bits: u32) -> Result<(TraceOp, u32)> {
        Ok(match self {
            Instruction::Gate { label, .. } => {
                let arity = label.arity().ok_or_else(|| Error::Unsupported(format!("gate {label}")))?;
                let local: Vec<usize> = (0..arity).collect();
                let g = GateSuperop::gate(label.clone(), &local, arity, frac_bits)?;
                (TraceOp::increment(&self.label(), g.tau_max as f64), g.denom_log2)
            }
            Instruction::Meas { .. } => (TraceOp::increment("MEAS", 1.0), 0),
            Instruction::Corr { .. } => (TraceOp::increment("CORR", 1.0), 0),
        })
    }

    pub fn wires(&self) -> Vec<usize> {
        match self {
            Instruction::Gate { wires, .. } | Instruction::Meas { wires, .. } => wires.clone(),
            Instruction::Corr { z_from, x_from, target } => vec![*z_from, *x_from, *target],
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |w: &[usize]| w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        match self {
            Instruction::Gate { label: GateLabel::Rz(phi), wires } => write!(f, "RZ {} {phi}", join(wires)),
            Instruction::Gate { label, wires } => write!(f, "{label} {}", join(wires)),
            Instruction::Meas { wires, mode } => write!(f, "MEAS {} {}", join(wires), mode.as_str()),
            Instruction::Corr { z_from, x_from, target } => write!(f, "CORR {z_from} {x_from} {target}"),
        }
    }
}

fn parse_wire(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad wire {tok:?}") })
}

pub fn parse_program(text: &str) -> Result<Vec<Instruction>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let name = toks[0].to_ascii_uppercase();
        let args = &toks[1..];
        let perr = |msg: String| Error::Parse { line, msg };
        let ins = match name.as_str() {
            "MEAS" => {
                let (mode, wires) = match args.last().map(|t| MeasMode::parse(t)) {
                    Some(Ok(m)) => (m, &args[..args.len() - 1]),
                    _ => (MeasMode::Defer, args),
                };
                if wires.is_empty() {
                    return Err(perr("MEAS needs at least one wire".into()));
                }
                Instruction::Meas { wires: wires.iter().map(|t| parse_wire(t, line)).collect::<Result<_>>()?, mode }
            }
            "CORR" => {
                if args.len() != 3 {
                    return Err(perr("CORR takes z_from x_from target".into()));
                }
                Instruction::Corr {
                    z_from: parse_wire(args[0], line)?,
                    x_from: parse_wire(args[1], line)?,
                    target: parse_wire(args[2], line)?,
                }
            }
            "RZ" => {
                if args.len() != 2 {
                    return Err(perr("RZ takes a wire and an angle".into()));
                }
                let phi: f64 = args[1].parse().map_err(|_| perr(format!("bad angle {:?}", args[1])))?;
                Instruction::Gate { label: GateLabel::Rz(phi), wires: vec![parse_wire(args[0], line)?] }
            }
            _ => {
                let label = GateLabel::parse(&name, None).map_err(|e| perr(e.to_string()))?;
                let arity = label.arity().unwrap_or(0);
                if args.len() != arity {
                    return Err(perr(format!("{name} takes {arity} wires")));
                }
                let wires: Vec<usize> = args.iter().map(|t| parse_wire(t, line)).collect::<Result<_>>()?;
                if arity == 2 && wires[0] == wires[1] {
                    return Err(perr("repeated wire".into()));
                }
                Instruction::Gate { label, wires }
            }
        };
        out.push(ins);
    }
    Ok(out)
}

pub fn render_program(prog: &[Instruction]) -> String {
    prog.iter().map(|i| format!("{i}\n")).collect()
}

/// The teleportation block on (input, Bell half A, Bell half B).
pub fn teleport_program(mode: MeasMode) -> Vec<Instruction> {
    vec![
        Instruction::gate(GateLabel::Cnot, &[0, 1]),
        Instruction::gate(GateLabel::H, &[0]),
        Instruction::Meas { wires: vec![0, 1], mode },
        Instruction::Corr { z_from: 0, x_from: 1, target: 2 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render_roundtrip() {
        let src = "# demo\nCNOT 0 1\nh 0   # trailing\n\nRZ 1 0.5\nMEAS 0 1 feedback\nCORR 0 1 2\nMEAS 2\n";
        let prog = parse_program(src).unwrap();
        assert_eq!(prog.len(), 6);
        assert_eq!(prog[5], Instruction::Meas { wires: vec![2], mode: MeasMode::Defer });
        assert_eq!(parse_program(&render_program(&prog)).unwrap(), prog);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(parse_program("H 0\nFOO 1"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_program("CNOT 0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_program("CNOT 1 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_program("RZ 0 abc"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn plan_ops_follow_the_table() {
        let prog = teleport_program(MeasMode::Feedback);
        let taus: Vec<(TraceOp, u32)> = prog.iter().map(|i| i.plan_op(20).unwrap()).collect();
        assert_eq!(taus[0], (TraceOp::increment("CNOT", 2.0), 0));
        assert_eq!(taus[1], (TraceOp::increment("H", 1.0), 1));
        let rz = Instruction::gate(GateLabel::Rz(0.3), &[0]).plan_op(20).unwrap();
        assert_eq!(rz.1, 20);
    }
}
