//! Leveled evaluation with automatic refresh.
//!
//! The loop is the same for every backend: apply the next op, and refresh as
//! soon as the running noise passes half the budget. The budget is fixed at
//! q₀/4 for the whole run. A backend may also refuse an op for lack of scale
//! headroom, in which case the policy can refresh first and retry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bridge::{coherent_correction, copy_kraus, dephase_kraus, q2c, teleport_correct, CBit, ClientOracle, MeasMode};
use super::keys::EvalKeys;
use super::program::Instruction;
use super::state::{apply_gate, apply_superop, refresh, EncryptedState};
use crate::error::{Error, Result};
use crate::mlwe::noise::step;
use crate::mlwe::TraceOp;
use crate::params::Preset;
use crate::qsim::{DensityMatrix, GateLabel, GateSuperop};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulePolicy {
    /// Replaces q₀/4 as the noise budget.
    pub budget: Option<f64>,
    /// Refresh and retry when an op is refused for lack of headroom.
    pub refresh_on_headroom: bool,
}

impl Default for SchedulePolicy {
    fn default() -> Self {
        Self { budget: None, refresh_on_headroom: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshReason {
    /// Running noise passed budget/2.
    Threshold,
    /// The backend refused the op at the current level.
    Headroom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefreshEvent {
    pub gate_index: usize,
    pub reason: RefreshReason,
    pub tracker_before: f64,
    pub tracker_after: f64,
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub label: String,
    pub tracker: f64,
    pub level: usize,
    pub scale_log2: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleLog {
    pub budget: f64,
    pub final_tracker: f64,
    pub steps: Vec<StepRecord>,
    pub refreshes: Vec<RefreshEvent>,
}

pub trait Backend {
    type State: Clone;
    type Op;

    fn q0(&self) -> u64;
    fn tracker(&self, s: &Self::State) -> f64;
    fn level(&self, s: &Self::State) -> usize;
    fn scale_log2(&self, s: &Self::State) -> f64;
    fn can_refresh(&self, s: &Self::State) -> bool;
    fn label(&self, op: &Self::Op) -> String;
    fn apply(&mut self, s: &Self::State, op: &Self::Op) -> Result<Self::State>;
    fn refresh(&mut self, s: &Self::State) -> Result<Self::State>;
}

/// What the loop just did, for observers that need the intermediate states.
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleEvent {
    Applied { index: usize, label: String },
    Refreshed(RefreshEvent),
}

type Observer<'o, S> = &'o mut dyn FnMut(&ScheduleEvent, &S);

fn do_refresh<B: Backend>(
    b: &mut B,
    s: &B::State,
    index: usize,
    reason: RefreshReason,
    log: &mut ScheduleLog,
    observe: Observer<'_, B::State>,
) -> Result<B::State> {
    if !b.can_refresh(s) {
        return Err(Error::ChainExhausted { gate_index: index });
    }
    let before = b.tracker(s);
    let next = b.refresh(s)?;
    let ev = RefreshEvent { gate_index: index, reason, tracker_before: before, tracker_after: b.tracker(&next), level: b.level(&next) };
    observe(&ScheduleEvent::Refreshed(ev.clone()), &next);
    log.refreshes.push(ev);
    Ok(next)
}

/// Runs `ops` in order under the refresh rule.
pub fn run_schedule<B: Backend>(
    b: &mut B,
    init: B::State,
    ops: &[B::Op],
    policy: &SchedulePolicy,
) -> Result<(B::State, ScheduleLog)> {
    let (res, log) = run_schedule_partial(b, init, ops, policy);
    res.map(|s| (s, log))
}

/// Like [`run_schedule`], but hands back the log up to the failure point.
pub fn run_schedule_partial<B: Backend>(
    b: &mut B,
    init: B::State,
    ops: &[B::Op],
    policy: &SchedulePolicy,
) -> (Result<B::State>, ScheduleLog) {
    run_schedule_observed(b, init, ops, policy, 0, &mut |_, _| {})
}

/// The loop itself. `first_index` offsets the gate indices in events and
/// logs, so a program split into blocks reports global positions.
pub fn run_schedule_observed<B: Backend>(
    b: &mut B,
    init: B::State,
    ops: &[B::Op],
    policy: &SchedulePolicy,
    first_index: usize,
    observe: Observer<'_, B::State>,
) -> (Result<B::State>, ScheduleLog) {
    let budget = policy.budget.unwrap_or(b.q0() as f64 / 4.0);
    let mut log = ScheduleLog { budget, ..Default::default() };
    let mut s = init;
    for (k, op) in ops.iter().enumerate() {
        let i = first_index + k;
        let applied = match b.apply(&s, op) {
            Err(Error::RefreshNeeded(_)) if policy.refresh_on_headroom => {
                do_refresh(b, &s, i, RefreshReason::Headroom, &mut log, observe).and_then(|r| {
                    s = r;
                    b.apply(&s, op)
                })
            }
            other => other,
        };
        s = match applied {
            Ok(next) => next,
            Err(e) => return (Err(e), log),
        };
        let label = b.label(op);
        observe(&ScheduleEvent::Applied { index: i, label: label.clone() }, &s);
        log.steps.push(StepRecord { index: i, label, tracker: b.tracker(&s), level: b.level(&s), scale_log2: b.scale_log2(&s) });
        if b.tracker(&s) > budget / 2.0 {
            s = match do_refresh(b, &s, i, RefreshReason::Threshold, &mut log, observe) {
                Ok(r) => r,
                Err(e) => return (Err(e), log),
            };
        }
    }
    log.final_tracker = b.tracker(&s);
    (Ok(s), log)
}

/// One analytic step: the ledger op plus the scale bits it consumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOp {
    pub trace: TraceOp,
    pub denom_log2: u32,
}

impl PlanOp {
    pub fn new(trace: TraceOp) -> Self {
        Self { trace, denom_log2: 0 }
    }

    pub fn from_instructions(prog: &[Instruction], frac_bits: u32) -> Result<Vec<Self>> {
        prog.iter()
            .map(|i| i.plan_op(frac_bits).map(|(trace, denom_log2)| Self { trace, denom_log2 }))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticState {
    pub tracker: f64,
    pub level: usize,
    pub scale_log2: f64,
    started: bool,
}

/// The σ-unit ledger alone. With `scale_model` it also tracks the encoding
/// scale and refuses ops that would push 2^scale to q/4 at the current level.
#[derive(Clone, Debug)]
pub struct AnalyticBackend {
    pub preset: Preset,
    pub scale_model: bool,
}

impl AnalyticBackend {
    pub fn new(preset: &Preset, scale_model: bool) -> Self {
        Self { preset: preset.clone(), scale_model }
    }

    /// State right after encryption: η = σ, level 0, fresh scale.
    pub fn fresh(&self) -> AnalyticState {
        AnalyticState { tracker: self.preset.sigma as f64, level: 0, scale_log2: self.preset.state_scale(), started: false }
    }
}

impl Backend for AnalyticBackend {
    type State = AnalyticState;
    type Op = PlanOp;

    fn q0(&self) -> u64 {
        self.preset.q0()
    }

    fn tracker(&self, s: &AnalyticState) -> f64 {
        s.tracker
    }

    fn level(&self, s: &AnalyticState) -> usize {
        s.level
    }

    fn scale_log2(&self, s: &AnalyticState) -> f64 {
        s.scale_log2
    }

    fn can_refresh(&self, s: &AnalyticState) -> bool {
        s.level + 1 < self.preset.levels()
    }

    fn label(&self, op: &PlanOp) -> String {
        op.trace.label()
    }

    fn apply(&mut self, s: &AnalyticState, op: &PlanOp) -> Result<AnalyticState> {
        let mut next = s.clone();
        next.tracker = step(s.tracker, &op.trace, self.preset.sigma as f64, !s.started);
        next.started = true;
        if self.scale_model {
            next.scale_log2 += op.denom_log2 as f64;
            if next.scale_log2.exp2() >= self.preset.chain[s.level] as f64 / 4.0 {
                return Err(Error::RefreshNeeded(format!("{} (scale 2^{})", op.trace.label(), next.scale_log2)));
            }
        }
        Ok(next)
    }

    fn refresh(&mut self, s: &AnalyticState) -> Result<AnalyticState> {
        let chain = &self.preset.chain;
        let ratio = chain[s.level + 1] as f64 / chain[s.level] as f64;
        let lift = (self.preset.state_scale() - s.scale_log2 - ratio.log2()).ceil().max(0.0);
        Ok(AnalyticState {
            tracker: step(s.tracker, &TraceOp::Refresh { ratio }, self.preset.sigma as f64, false),
            level: s.level + 1,
            scale_log2: s.scale_log2 + lift + ratio.log2(),
            started: true,
        })
    }
}

/// An encrypted register plus the bookkeeping a program needs: where each
/// program wire currently lives, and the encrypted outcomes of feedback
/// measurements.
#[derive(Clone, Debug)]
pub struct ProgramState {
    pub es: EncryptedState,
    /// Program wire → register wire; `None` once measured away.
    pub wire_map: Vec<Option<usize>>,
    pub cbits: BTreeMap<usize, CBit>,
}

impl ProgramState {
    pub fn new(es: EncryptedState) -> Self {
        let wire_map = (0..es.n_qubits).map(Some).collect();
        Self { es, wire_map, cbits: BTreeMap::new() }
    }

    fn phys(&self, wire: usize) -> Result<usize> {
        self.wire_map
            .get(wire)
            .copied()
            .flatten()
            .ok_or_else(|| Error::Shape(format!("wire {wire} is not in the register")))
    }
}

/// Evaluates programs on encrypted states. Feedback measurements go to the
/// client oracle; everything else stays on the server.
pub struct EncryptedBackend<'a> {
    pub keys: &'a EvalKeys,
    pub client: Option<&'a mut dyn ClientOracle>,
    measurements: usize,
}

impl<'a> EncryptedBackend<'a> {
    pub fn new(keys: &'a EvalKeys, client: Option<&'a mut dyn ClientOracle>) -> Self {
        Self { keys, client, measurements: 0 }
    }
}

impl Backend for EncryptedBackend<'_> {
    type State = ProgramState;
    type Op = Instruction;

    fn q0(&self) -> u64 {
        self.keys.q0()
    }

    fn tracker(&self, s: &ProgramState) -> f64 {
        s.es.tracker
    }

    fn level(&self, s: &ProgramState) -> usize {
        s.es.level()
    }

    fn scale_log2(&self, s: &ProgramState) -> f64 {
        s.es.scale_log2()
    }

    fn can_refresh(&self, s: &ProgramState) -> bool {
        s.es.level() + 1 < self.keys.preset.levels() && s.cbits.is_empty()
    }

    fn label(&self, op: &Instruction) -> String {
        op.label()
    }

    fn apply(&mut self, s: &ProgramState, op: &Instruction) -> Result<ProgramState> {
        let f = self.keys.preset.frac_bits;
        let n = s.es.n_qubits;
        let mut out = s.clone();
        match op {
            Instruction::Gate { label, wires } => {
                let phys = wires.iter().map(|&w| s.phys(w)).collect::<Result<Vec<_>>>()?;
                let g = GateSuperop::gate(label.clone(), &phys, n, f)?;
                out.es = apply_gate(&s.es, &g, self.keys)?;
            }
            Instruction::Meas { wires, mode } => {
                let phys = wires.iter().map(|&w| s.phys(w)).collect::<Result<Vec<_>>>()?;
                let id = self.measurements;
                self.measurements += 1;
                let client = self.client.as_deref_mut();
                let (es, bits) = q2c(&s.es, &phys, *mode, self.keys, client, id)?;
                out.es = es;
                if *mode == MeasMode::Feedback {
                    for (w, bit) in wires.iter().zip(bits) {
                        out.cbits.insert(*w, bit);
                        out.wire_map[*w] = None;
                    }
                    for slot in out.wire_map.iter_mut().flatten() {
                        *slot -= phys.iter().filter(|&&p| p < *slot).count();
                    }
                }
            }
            Instruction::Corr { z_from, x_from, target } => {
                let t = s.phys(*target)?;
                match (s.cbits.get(z_from), s.cbits.get(x_from)) {
                    (Some(m1), Some(m2)) => {
                        out.es = teleport_correct(&s.es, t, m1, m2, self.keys)?;
                        out.cbits.remove(z_from);
                        out.cbits.remove(x_from);
                    }
                    (None, None) => {
                        let g = coherent_correction(s.phys(*z_from)?, s.phys(*x_from)?, t, n, f)?;
                        out.es = apply_superop(&s.es, &g, self.keys, TraceOp::increment("CORR", 1.0))?;
                    }
                    _ => return Err(Error::Unsupported("CORR mixes measured and coherent controls".into())),
                }
            }
        }
        Ok(out)
    }

    fn refresh(&mut self, s: &ProgramState) -> Result<ProgramState> {
        Ok(ProgramState { es: refresh(&s.es, self.keys)?, ..s.clone() })
    }
}

/// Evaluates a program on an encrypted state under the refresh rule.
pub fn eval_schedule<'a>(
    es: &EncryptedState,
    prog: &[Instruction],
    keys: &'a EvalKeys,
    client: Option<&'a mut dyn ClientOracle>,
    policy: &SchedulePolicy,
) -> Result<(ProgramState, ScheduleLog)> {
    let mut b = EncryptedBackend::new(keys, client);
    run_schedule(&mut b, ProgramState::new(es.clone()), prog, policy)
}

/// Plaintext reference for programs without feedback measurements, using
/// the same quantized superoperators as the encrypted path.
pub fn eval_plain(rho: &DensityMatrix, prog: &[Instruction], frac_bits: u32) -> Result<DensityMatrix> {
    let mut rho = rho.clone();
    for ins in prog {
        let n = rho.n_qubits();
        rho = match ins {
            Instruction::Gate { label, wires } => GateSuperop::gate(label.clone(), wires, n, frac_bits)?.apply_plain(&rho)?,
            Instruction::Meas { wires, mode: MeasMode::Dephase } => {
                let label = GateLabel::Custom("MEAS[dephase]".into());
                GateSuperop::from_kraus(label, &dephase_kraus(wires.len()), wires, n, frac_bits, Some(1))?.apply_plain(&rho)?
            }
            Instruction::Meas { wires, mode: mode @ (MeasMode::Defer | MeasMode::Weak) } => {
                let k = wires.len();
                let mut grown = rho.clone();
                for _ in 0..k {
                    grown = grown.tensor(&DensityMatrix::basis(1, 0)?)?;
                }
                let mut on = wires.clone();
                on.extend(n..n + k);
                let label = GateLabel::Custom(format!("MEAS[{}]", mode.as_str()));
                GateSuperop::from_kraus(label, &copy_kraus(k, *mode), &on, n + k, frac_bits, Some(1))?.apply_plain(&grown)?
            }
            Instruction::Meas { mode: MeasMode::Feedback, .. } => {
                return Err(Error::Unsupported("feedback measurements have no plaintext reference".into()))
            }
            Instruction::Corr { z_from, x_from, target } => {
                coherent_correction(*z_from, *x_from, *target, n, frac_bits)?.apply_plain(&rho)?
            }
        };
    }
    Ok(rho)
}
