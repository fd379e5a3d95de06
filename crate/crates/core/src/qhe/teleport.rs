//! Teleportation end to end, and the per-gate noise table.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bridge::{Client, ClientOracle, MeasMode};
use super::keys::EvalKeys;
use super::program::teleport_program;
use super::schedule::{eval_schedule, ProgramState, ScheduleLog, SchedulePolicy};
use super::state::{dec_state, enc_state_labeled};
use crate::error::Result;
use crate::mlwe::noise::step;
use crate::mlwe::{Encryptor, TraceOp};
use crate::qsim::{DensityMatrix, MaskSpec};
use crate::rng::SeededGenerator;

/// Row order of the published teleportation noise table.
pub const TELEPORT_TABLE_ORDER: [&str; 5] = ["BellPrep", "H", "CNOT", "MEAS", "CORR"];

pub fn bell_pair() -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    DensityMatrix::from_pure(&[Complex64::new(s, 0.0), z, z, Complex64::new(s, 0.0)]).expect("Φ+ is a valid state")
}

/// ρ on wire 0, Φ+ on wires 1 and 2.
pub fn teleport_input(rho: &DensityMatrix) -> Result<DensityMatrix> {
    rho.tensor(&bell_pair())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub label: String,
    /// Increment in units of σ.
    pub sigmas: f64,
    pub increment: f64,
    pub running: f64,
}

/// Per-op increments of the analytic ledger, in execution order.
pub fn noise_rows(trace: &[TraceOp], sigma: u32) -> Vec<NoiseRow> {
    let s = sigma as f64;
    let mut eta = 0.0;
    trace
        .iter()
        .enumerate()
        .map(|(i, op)| {
            let next = step(eta, op, s, i == 0);
            let row = NoiseRow { label: op.label(), sigmas: (next - eta) / s, increment: next - eta, running: next };
            eta = next;
            row
        })
        .collect()
}

/// The teleportation rows in table order, running totals recomputed in
/// that order. Labels missing from the trace are skipped.
pub fn teleport_noise_table(trace: &[TraceOp], sigma: u32) -> Vec<NoiseRow> {
    let rows = noise_rows(trace, sigma);
    let mut running = 0.0;
    TELEPORT_TABLE_ORDER
        .iter()
        .filter_map(|l| rows.iter().find(|r| r.label == *l))
        .map(|r| {
            running += r.increment;
            NoiseRow { running, ..r.clone() }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TeleportRun {
    /// Client-side output, normalized by its trace.
    pub output: DensityMatrix,
    pub consistent: bool,
    pub outcome: Option<usize>,
    pub state: ProgramState,
    pub log: ScheduleLog,
}

/// Client encrypts ρ ⊗ Φ+ under the public key, the server runs the
/// teleport block with feedback measurements, and the client decrypts the
/// surviving wire.
pub fn teleport_feedback(
    client: &mut Client,
    keys: &EvalKeys,
    rho: &DensityMatrix,
    p: f64,
    policy: &SchedulePolicy,
) -> Result<TeleportRun> {
    let input = teleport_input(rho)?;
    let es = enc_state_labeled(&keys.pk, &input, MaskSpec::depolarizing(p)?, &keys.preset, "BellPrep", &mut client.rng)?;
    let prog = teleport_program(MeasMode::Feedback);
    let (state, log) = eval_schedule(&es, &prog, keys, Some(client as &mut dyn ClientOracle), policy)?;
    let (out, consistent) = dec_state(&client.keys, &state.es)?;
    Ok(TeleportRun {
        output: out.normalized()?,
        consistent,
        outcome: client.outcomes.last().copied(),
        state,
        log,
    })
}

/// Server-only teleport: dephasing measurement and the coherent correction.
/// The output is wire 2 of the returned register.
pub fn teleport_coherent(
    key: &impl Encryptor,
    keys: &EvalKeys,
    rho: &DensityMatrix,
    p: f64,
    rng: &mut SeededGenerator,
    policy: &SchedulePolicy,
) -> Result<(ProgramState, ScheduleLog)> {
    let input = teleport_input(rho)?;
    let es = enc_state_labeled(key, &input, MaskSpec::depolarizing(p)?, &keys.preset, "BellPrep", rng)?;
    eval_schedule(&es, &teleport_program(MeasMode::Dephase), keys, None, policy)
}
