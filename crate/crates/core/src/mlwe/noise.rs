//! The analytic noise ledger in units of the fresh error width σ.
//!
//! Rules: (i) a linear map τ multiplies η by ∥τ∥max; (ii) an addition of two
//! equally noisy values doubles η; (iii) a constant α multiplies η by |α|;
//! (iv) a refresh rescales η by q'/q. Gate-level bookkeeping uses the additive
//! per-gate increments ∥τ_g∥max·σ of the teleportation table.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TraceOp {
    /// A fresh encryption (register preparation). The first one is the
    /// initial η = σ; later ones join new fresh material and add σ.
    Fresh { label: String },
    /// Additive per-gate increment ∥τ∥max·σ.
    Increment { label: String, tau: f64 },
    /// Rule (i).
    Linear { label: String, tau: f64 },
    /// Rule (ii).
    Add,
    /// Rule (iii).
    ConstMul { alpha: f64 },
    /// Rule (iv), plus one σ for the key switch that accompanies it.
    Refresh { ratio: f64 },
}

impl TraceOp {
    pub fn label(&self) -> String {
        match self {
            TraceOp::Fresh { label } | TraceOp::Increment { label, .. } | TraceOp::Linear { label, .. } => label.clone(),
            TraceOp::Add => "add".into(),
            TraceOp::ConstMul { alpha } => format!("const×{alpha}"),
            TraceOp::Refresh { .. } => "refresh".into(),
        }
    }

    pub fn increment(label: &str, tau: f64) -> Self {
        TraceOp::Increment { label: label.to_string(), tau }
    }

    pub fn fresh(label: &str) -> Self {
        TraceOp::Fresh { label: label.to_string() }
    }
}

/// Applies one op to a running η.
pub fn step(eta: f64, op: &TraceOp, sigma: f64, first: bool) -> f64 {
    match op {
        TraceOp::Fresh { .. } => {
            if first {
                sigma
            } else {
                eta + sigma
            }
        }
        TraceOp::Increment { tau, .. } => eta + tau * sigma,
        TraceOp::Linear { tau, .. } => eta * tau,
        TraceOp::Add => 2.0 * eta,
        TraceOp::ConstMul { alpha } => eta * alpha.abs(),
        TraceOp::Refresh { ratio } => eta * ratio + sigma,
    }
}

/// Running η after each op, starting from the fresh bound σ.
pub fn ledger(trace: &[TraceOp], sigma: u32) -> Vec<f64> {
    let sigma = sigma as f64;
    let mut eta = sigma;
    trace
        .iter()
        .enumerate()
        .map(|(i, op)| {
            eta = step(eta, op, sigma, i == 0);
            eta
        })
        .collect()
}

/// Worst-case η∞ of a trace, rounded up to an integer. An empty trace is
/// just the fresh bound σ.
pub fn noise_bound_of(trace: &[TraceOp], sigma: u32) -> u64 {
    ledger(trace, sigma).last().copied().unwrap_or(sigma as f64).ceil() as u64
}

/// The teleportation trace as evaluated: fresh encryption of the register
/// with its Bell pair, the two Bell-measurement gates, the measurement and
/// the conditioned correction.
pub fn teleport_trace() -> Vec<TraceOp> {
    vec![
        TraceOp::fresh("BellPrep"),
        TraceOp::increment("CNOT", 2.0),
        TraceOp::increment("H", 1.0),
        TraceOp::increment("MEAS", 1.0),
        TraceOp::increment("CORR", 1.0),
    ]
}
