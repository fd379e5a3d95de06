//! Encrypted density-matrix evaluation: lifted gates, measurement bridges,
//! noise scheduling, weak-measurement statistics and Pauli twirling.

pub mod advise;
pub mod bridge;
pub mod keys;
pub mod program;
pub mod schedule;
pub mod state;
pub mod teleport;
pub mod twirl;
pub mod weak;

pub use bridge::{branch_weights, coherent_correction, he_control, q2c, teleport_correct, CBit, Client, ClientOracle, MeasMode};
pub use keys::{ClientKeys, EvalKeys};
pub use program::{parse_program, render_program, teleport_program, Instruction};
pub use schedule::{
    eval_plain, eval_schedule, run_schedule, run_schedule_observed, run_schedule_partial, ScheduleEvent, AnalyticBackend, AnalyticState, Backend, EncryptedBackend, PlanOp, ProgramState,
    RefreshEvent, RefreshReason, ScheduleLog, SchedulePolicy, StepRecord,
};
pub use state::{
    append_zero_qubit, apply_gate, apply_superop, dec_state, enc_state, enc_state_labeled, measured_noise, refresh,
    select_branch, trace_out, EncryptedState,
};
pub use teleport::{
    bell_pair, noise_rows, teleport_coherent, teleport_feedback, teleport_input, teleport_noise_table, NoiseRow,
    TeleportRun, TELEPORT_TABLE_ORDER,
};
pub use advise::{advise_params, Advice, PresetCheck};
pub use twirl::{angle_split, angle_split_at, circuit_unitary, equal_up_to_phase, mask_unitary, twirl_compile, AngleSplit, TwirlPlan, TwirledGate, MASK_NAMES};
pub use weak::{amplitude_query, branch_one_weight, weak_update, AmplitudeAnswer, WeakQuery, PUBLISHED_WEAK_STEPS};
