//! Parameter advice: pick the smallest preset that carries a circuit.

use serde::{Deserialize, Serialize};

use super::schedule::{run_schedule_partial, AnalyticBackend, PlanOp, SchedulePolicy};
use crate::error::{Error, Result};
use crate::mlwe::TraceOp;
use crate::params::Preset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetCheck {
    pub preset: String,
    pub q0: u64,
    pub meets_bounds: bool,
    /// The scale-aware simulation finished without exhausting the chain.
    pub feasible: bool,
    pub refresh_plan: Vec<usize>,
    pub exhausted_at: Option<usize>,
    pub final_tracker: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    /// Analytic η∞ without any refresh (N_ops·σ).
    pub noise: f64,
    /// 4·N_ops·σ.
    pub q_min: f64,
    /// 4σ√s·2^ℓ with ℓ the total denominator bits.
    pub weak_q_min: f64,
    pub scale_bits: u32,
    pub weak_steps: u32,
    pub recommended: Option<String>,
    pub refresh_plan: Vec<usize>,
    pub checks: Vec<PresetCheck>,
}

pub fn advise_params(plan: &[PlanOp], sigma: u32, presets: &[Preset], weak_steps: u32) -> Result<Advice> {
    let traces: Vec<TraceOp> = plan.iter().map(|p| p.trace.clone()).collect();
    let noise = crate::mlwe::noise::ledger(&traces, sigma).last().copied().unwrap_or(sigma as f64);
    let q_min = 4.0 * noise;
    let scale_bits: u32 = plan.iter().map(|p| p.denom_log2).sum();
    let s = weak_steps.max(1);
    let weak_q_min = 4.0 * sigma as f64 * (s as f64).sqrt() * (scale_bits as f64).exp2();
    let mut sorted: Vec<Preset> = presets.iter().map(|p| p.clone().with_sigma(sigma)).collect();
    sorted.sort_by_key(|p| p.q0());
    let mut checks = Vec::new();
    for p in &sorted {
        let q0 = p.q0() as f64;
        let mut b = AnalyticBackend::new(p, true);
        let fresh = b.fresh();
        let (res, log) = run_schedule_partial(&mut b, fresh, plan, &SchedulePolicy::default());
        let refresh_plan: Vec<usize> = log.refreshes.iter().map(|r| r.gate_index).collect();
        let (feasible, exhausted_at, final_tracker) = match res {
            Ok(st) => (true, None, Some(st.tracker)),
            Err(Error::ChainExhausted { gate_index }) => (false, Some(gate_index), None),
            // Refused again right after a refresh: no level can hold the op.
            Err(Error::RefreshNeeded(_)) => (false, Some(log.steps.len()), None),
            Err(e) => return Err(e),
        };
        checks.push(PresetCheck {
            preset: p.name.clone(),
            q0: p.q0(),
            meets_bounds: q0 >= q_min && q0 >= weak_q_min,
            feasible,
            refresh_plan,
            exhausted_at,
            final_tracker,
        });
    }
    let pick = checks.iter().find(|c| c.meets_bounds && c.feasible);
    let refresh_plan = pick.or(checks.last()).map(|c| c.refresh_plan.clone()).unwrap_or_default();
    Ok(Advice {
        noise,
        q_min,
        weak_q_min,
        scale_bits,
        weak_steps,
        recommended: pick.map(|c| c.preset.clone()),
        refresh_plan,
        checks,
    })
}
