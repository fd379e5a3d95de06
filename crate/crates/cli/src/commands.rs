//! The subcommands. Each returns a report; failures carry their exit class.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qfhe_core::kb::capsule::padded_kraus;
use qfhe_core::kb::logic::{fact, implies};
use qfhe_core::kb::{
    capsule_make, forward_chain, knows_eval, knows_pair, mask_combine, parse_kb, parse_rewrites, parse_term, read_bits,
    term_quotient_trace, Axiom, EpistemicWorld, Prop, PropLayout, Verdict,
};
use qfhe_core::mlwe::{teleport_trace, TraceOp};
use qfhe_core::orchestrator::{audit_verify, job_run, pipeline_build, ExecMode, DEFAULT_BARRIER_LOG2};
use qfhe_core::qhe::*;
use qfhe_core::qsim::{trace_distance, DensityMatrix, GateLabel, GateSuperop, MaskSpec};
use qfhe_core::{Error, Preset, SeededGenerator};

use crate::config::Settings;
use crate::report::{LedgerRow, RunReport, Table};

/// Exit classes: 2 usage, 3 noise budget, 4 audit, 1 anything else.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("noise budget: {0}")]
    Budget(String),
    #[error("audit: {0}")]
    Audit(String),
    #[error("{0}")]
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Budget(_) => 3,
            Failure::Audit(_) => 4,
            Failure::Other(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::RefreshNeeded(_) | Error::ChainExhausted { .. } | Error::PlaintextOverflow(_) => Failure::Budget(e.to_string()),
            Error::Audit { .. } => Failure::Audit(e.to_string()),
            Error::InvalidParams(_) | Error::Parse { .. } => Failure::Usage(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

/// A finished command: its report, and a failure to signal after printing.
pub struct Outcome {
    pub report: RunReport,
    pub failure: Option<Failure>,
}

impl From<RunReport> for Outcome {
    fn from(report: RunReport) -> Self {
        Self { report, failure: None }
    }
}

type Res = std::result::Result<Outcome, Failure>;

fn report_for(cmd: &str, s: &Settings) -> RunReport {
    RunReport::new(cmd, &s.preset.name, s.sigma, &s.seed)
}

fn rng_for(s: &Settings) -> Result<SeededGenerator, Failure> {
    Ok(SeededGenerator::from_hex(&s.seed)?)
}

fn timed<T>(r: &mut RunReport, name: &str, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    r.timings.push((name.into(), t.elapsed().as_secs_f64()));
    out
}

fn io(e: std::io::Error) -> Failure {
    Failure::Other(e.to_string())
}

fn out_dir(s: &Settings, r: &mut RunReport) -> Result<Option<PathBuf>, Failure> {
    let Some(dir) = &s.out else { return Ok(None) };
    std::fs::create_dir_all(dir).map_err(io)?;
    let _ = r;
    Ok(Some(dir.clone()))
}

fn write_file(r: &mut RunReport, path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(io)?;
    r.outputs.push(path.display().to_string());
    Ok(())
}

pub fn keygen(s: &Settings) -> Res {
    let mut r = report_for("keygen", s);
    let mut rng = rng_for(s)?;
    let (ck, ek) = timed(&mut r, "keygen", || ClientKeys::generate(&s.preset, &mut rng))?;
    let sk = ck.level_key(0)?;
    r.set("key_id", format!("{:016x}", sk.id));
    r.set("secret_key_bytes", sk.to_bytes().len());
    r.set("public_key_bytes", ek.pk.to_bytes().len());
    r.set("eval_key_bytes", ek.byte_len());
    r.set("levels", s.preset.levels());
    r.set("chain", &s.preset.chain);
    if let Some(dir) = out_dir(s, &mut r)? {
        write_file(&mut r, &dir.join("secret.key"), &sk.to_bytes())?;
        write_file(&mut r, &dir.join("public.key"), &ek.pk.to_bytes())?;
        r.notes.push("secret.key is client material; pipeline nodes refuse it".into());
    }
    Ok(r.into())
}

pub fn teleport_demo(s: &Settings) -> Res {
    let mut r = report_for("teleport-demo", s);
    let mut rng = rng_for(s)?;
    let (ck, ek) = timed(&mut r, "keygen", || ClientKeys::generate(&s.preset, &mut rng))?;
    let rho = DensityMatrix::random_pure(1, &mut rng)?;
    let mut client = Client::new(ck.clone(), rng.split());
    let policy = SchedulePolicy::default();
    let run = timed(&mut r, "feedback teleport", || teleport_feedback(&mut client, &ek, &rho, s.p, &policy))?;
    let td = trace_distance(&run.output, &rho)?;
    let fidelity = (rho.matrix() * run.output.matrix()).trace().re;
    r.set("trace_distance", td);
    r.set("fidelity", fidelity);
    r.set("consistent", run.consistent);
    r.set("outcome", run.outcome);
    r.refresh_events.extend(run.log.refreshes.clone());

    // Server-only run with dephasing measurements: same ledger, and the
    // secret key lets the client measure the actual noise.
    let sk = ck.level_key(0)?.clone();
    let (st, log) = timed(&mut r, "coherent teleport", || teleport_coherent(&sk, &ek, &rho, s.p, &mut rng, &policy))?;
    let table = teleport_noise_table(&st.es.op_trace, s.sigma);
    r.noise_ledger = table.iter().map(LedgerRow::from).collect();
    let reference = eval_plain(&teleport_input(&rho)?, &teleport_program(MeasMode::Dephase), s.preset.frac_bits)?;
    let measured = measured_noise(&ck, &st.es, &reference)?;
    let total = log.final_tracker;
    r.set("total_noise", total);
    r.set("total_noise_sigmas", total / s.sigma as f64);
    r.set("measured_noise", measured);
    r.set("headroom_ratio", total / (s.preset.q0() as f64 / 4.0));
    r.set("q0", s.preset.q0());
    r.refresh_events.extend(log.refreshes);
    r.notes.push("table rows in published order; execution runs CNOT before H".into());
    let failure = (measured > total).then(|| Failure::Budget(format!("measured noise {measured} exceeds the ledger total {total}")));
    Ok(Outcome { report: r, failure })
}

fn rule_of(op: &TraceOp) -> &'static str {
    match op {
        TraceOp::Fresh { .. } => "fresh σ",
        TraceOp::Increment { .. } => "(i) ∥τ∥max·σ",
        TraceOp::Linear { .. } => "(i) ×∥τ∥max",
        TraceOp::Add => "(ii) ×2",
        TraceOp::ConstMul { .. } => "(iii) ×|α|",
        TraceOp::Refresh { .. } => "(iv) ×q'/q",
    }
}

pub fn noise_report(s: &Settings, program: &Path) -> Res {
    let mut r = report_for("noise-report", s);
    let text = std::fs::read_to_string(program).map_err(|e| Failure::Usage(format!("{}: {e}", program.display())))?;
    let prog = parse_program(&text)?;
    let plan = PlanOp::from_instructions(&prog, s.preset.frac_bits)?;
    let mut trace = vec![TraceOp::fresh("input")];
    trace.extend(plan.iter().map(|p| p.trace.clone()));
    r.noise_ledger = noise_rows(&trace, s.sigma)
        .iter()
        .zip(&trace)
        .map(|(row, op)| LedgerRow { rule: rule_of(op).into(), ..LedgerRow::from(row) })
        .collect();

    let mut backend = AnalyticBackend::new(&s.preset, true);
    let fresh = backend.fresh();
    let (res, log) = run_schedule_partial(&mut backend, fresh, &plan, &SchedulePolicy::default());
    r.refresh_events = log.refreshes.clone();
    let advice = advise_params(&plan, s.sigma, &Preset::all_named(), 0)?;
    r.set("ops", plan.len());
    r.set("total_noise", advice.noise);
    r.set("q_min", advice.q_min);
    r.set("scale_bits", advice.scale_bits);
    r.set("recommended", advice.recommended.clone());
    r.set("budget", log.budget);
    r.set("final_tracker", log.final_tracker);
    let mut t = Table::new("presets", &["preset", "q0", "meets bounds", "feasible", "refreshes"]);
    for c in &advice.checks {
        t.row(vec![c.preset.clone(), c.q0.to_string(), c.meets_bounds.to_string(), c.feasible.to_string(), format!("{:?}", c.refresh_plan)]);
    }
    r.tables.push(t);
    r.notes.push(format!("pick q ≥ 4·N_ops·σ = {}", advice.q_min));
    let failure = res.err().map(Failure::from);
    Ok(Outcome { report: r, failure })
}

pub fn weak_amplitude(s: &Settings) -> Res {
    let mut r = report_for("weak-amplitude", s);
    let q = WeakQuery::new(s.theta, s.epsilon, s.tau)?;
    let mut rng = rng_for(s)?;
    let (ck, ek) = timed(&mut r, "keygen", || ClientKeys::generate(&s.preset, &mut rng))?;
    let rho = DensityMatrix::random(1, &mut rng)?;
    let es = enc_state(&ek.pk, &rho, MaskSpec::depolarizing(s.p)?, &s.preset, &mut rng)?;
    let updated = timed(&mut r, "weak update", || weak_update(&es, 0, q.theta, q.s, &ek))?;
    let ans = amplitude_query(&updated, &q, &ck)?;
    let plain_weight = q.survival() * rho.matrix()[(1, 1)].re;
    let plain_accept = rho.matrix()[(1, 1)].re >= q.tau;
    r.set("theta", q.theta);
    r.set("epsilon", q.epsilon);
    r.set("tau", q.tau);
    r.set("s", q.s);
    r.set("s_log2", WeakQuery::steps_log2(q.epsilon));
    r.set("s_published", PUBLISHED_WEAK_STEPS);
    r.set("weight", ans.weight);
    r.set("threshold", ans.threshold);
    r.set("accept", ans.accept);
    r.set("plain_weight", plain_weight);
    r.set("plain_accept", plain_accept);
    r.notes.extend(q.step_notes());
    Ok(r.into())
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::BothKnow => "both",
        Verdict::OnlyFirst => "only Alice",
        Verdict::OnlySecond => "only Bob",
        Verdict::Unknown => "neither",
    }
}

pub fn kb_demo(s: &Settings, kb_file: Option<&Path>) -> Res {
    let mut r = report_for("kb-demo", s);
    let mut rng = rng_for(s)?;
    let (ck, ek) = timed(&mut r, "keygen", || ClientKeys::generate(&s.preset, &mut rng))?;
    let sk = ck.level_key(0)?.clone();

    let p = Prop::new("P", "a");
    let with = vec![fact(0, "P", "a")];
    let without: Vec<Axiom> = Vec::new();
    let mut t = Table::new("combined mask Ψ^{A∪B} on P(a)", &["K_A P", "K_B P", "reading", "who knows"]);
    for (a, b) in [(&with, &with), (&with, &without), (&without, &with), (&without, &without)] {
        let wa = EpistemicWorld::public("Alice", a, "a", &["P"])?;
        let wb = EpistemicWorld::public("Bob", b, "a", &["P"])?;
        let es = knows_pair(&mask_combine(&wa, &wb)?, &p, &ek, &sk, s.p, &mut rng)?;
        let bits = read_bits(&dec_state(&ck, &es)?.0);
        let v = Verdict::from_bits(bits[0], bits[1]);
        t.row(vec![format!("|{}⟩", u8::from(bits[0])), format!("|{}⟩", u8::from(bits[1])), v.three_valued().into(), verdict_word(v).into()]);
    }
    r.tables.push(t);

    let bob_kb = match kb_file {
        Some(path) => parse_kb(&std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?)?,
        None => vec![fact(0, "P", "a"), implies(1, "P", "Q")],
    };
    let subject = bob_kb
        .iter()
        .find_map(|a| match &a.kind {
            qfhe_core::kb::AxiomKind::Fact(p) => Some(p.subject.clone()),
            _ => None,
        })
        .unwrap_or_else(|| "a".into());
    let bob = timed(&mut r, "capsules", || EpistemicWorld::secret("Bob", &bob_kb, &subject, &[], &sk, &s.preset, &mut rng))?;
    let derived = forward_chain(&bob_kb);
    let layout: &PropLayout = &bob.layout;
    let mut t = Table::new("Bob's capsule run", &["query", "encrypted K_B", "forward chaining"]);
    let mut agree = true;
    for prop in &layout.props {
        if prop.predicate.starts_with('_') {
            continue;
        }
        let es = timed(&mut r, &format!("knows {prop}"), || knows_eval(&bob, prop, &ek, &sk, s.p, &mut rng))?;
        let bit = read_bits(&dec_state(&ck, &es)?.0)[0];
        agree &= bit == derived.contains(prop);
        t.row(vec![format!("K_B {prop}"), format!("|{}⟩⟨{}|", u8::from(bit), u8::from(bit)), derived.contains(prop).to_string()]);
    }
    r.tables.push(t);
    r.set("capsules_agree_with_chaining", agree);

    let caps = bob_kb.iter().map(|a| capsule_make(&sk, a, layout, &s.preset, &mut rng)).collect::<qfhe_core::Result<Vec<_>>>()?;
    let sizes: Vec<usize> = caps.iter().map(|c| c.byte_len()).collect();
    r.set("capsule_bytes", sizes.first().copied());
    r.set("capsule_sizes_equal", sizes.windows(2).all(|w| w[0] == w[1]));
    r.set("capsule_kraus_ops", padded_kraus(&bob_kb[0]).len());
    r.set("tracker_per_capsule", 2.0 * s.sigma as f64);
    r.set("tracker_for_50_capsules", 100.0 * s.sigma as f64);
    r.notes.push(format!("50 capsules add exactly {} to the tracker; the published bound is a strict < 300", 100 * s.sigma));
    Ok(r.into())
}

pub fn quotient(s: &Settings, term: &str, rules: Option<&Path>) -> Res {
    let mut r = report_for("quotient", s);
    let rules = match rules {
        Some(path) => parse_rewrites(&std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?)?,
        None => group_rewrites(),
    };
    let t = parse_term(term)?;
    let trace = term_quotient_trace(&rules, &t, qfhe_core::kb::terms::DEFAULT_STEP_CAP)?;
    let mut table = Table::new("rewrites", &["step", "term"]);
    for (i, t) in trace.iter().enumerate() {
        table.row(vec![i.to_string(), t.to_string()]);
    }
    r.tables.push(table);
    r.set("input", t.to_string());
    r.set("normal_form", trace.last().map(|t| t.to_string()));
    r.set("steps", trace.len() - 1);
    Ok(r.into())
}

use qfhe_core::kb::group_rewrites;

pub struct PipelineArgs {
    pub tamper: Option<usize>,
    pub barrier_log2: Option<u32>,
}

pub fn pipeline_demo(s: &Settings, args: &PipelineArgs) -> Res {
    let mut r = report_for("pipeline-demo", s);
    let mut rng = rng_for(s)?;
    let (ck, ek) = timed(&mut r, "keygen", || ClientKeys::generate(&s.preset, &mut rng))?;
    let rho = DensityMatrix::random(1, &mut rng)?;
    let es = enc_state(&ek.pk, &teleport_input(&rho)?, MaskSpec::depolarizing(s.p)?, &s.preset, &mut rng)?;
    let prog = teleport_program(MeasMode::Dephase);
    let blocks: Vec<Vec<Instruction>> = prog.iter().map(|i| vec![i.clone()]).collect();
    let mut p = pipeline_build(blocks, s.nodes, u64::from_le_bytes(rng.seed_bytes()[..8].try_into().expect("8 bytes")))?;
    p.barrier_log2 = args.barrier_log2.unwrap_or(DEFAULT_BARRIER_LOG2);
    let (mono, _) = timed(&mut r, "monolithic", || eval_schedule(&es, &prog, &ek, None, &SchedulePolicy::default()))?;
    let det = timed(&mut r, "pipeline deterministic", || job_run(&p, &es, &ek, ExecMode::Deterministic))?;
    let thr = timed(&mut r, "pipeline threaded", || job_run(&p, &es, &ek, ExecMode::Threaded))?;
    let same = det.state.es.ciphertext_bytes() == mono.es.ciphertext_bytes();
    let same_threads = det.ledger.to_bytes() == thr.ledger.to_bytes();
    let out = dec_state(&ck, &det.state.es)?.0.partial_trace(&[0, 1])?;
    let mut t = Table::new("nodes", &["node", "blocks", "processed"]);
    for (n, cfg) in p.nodes.iter().enumerate() {
        t.row(vec![n.to_string(), format!("{:?}", cfg.blocks), det.per_node[n].to_string()]);
    }
    r.tables.push(t);
    let mut ledger = det.ledger.clone();
    if let Some(i) = args.tamper {
        let rec = ledger.archive.get_mut(i).ok_or_else(|| Failure::Usage(format!("no ledger record {i}")))?;
        let mid = rec.len() / 2;
        rec[mid] ^= 0x01;
        r.notes.push(format!("flipped one archived byte of record {i}"));
    }
    let v = audit_verify(&ledger);
    r.refresh_events = det.refreshes.clone();
    r.set("job_id", &p.job_id);
    r.set("nodes", s.nodes);
    r.set("records", ledger.len());
    r.set("consumed_noise", det.consumed);
    r.set("declared_budget", p.declared_budget(s.preset.q0()));
    r.set("matches_monolithic", same);
    r.set("threaded_matches_deterministic", same_threads);
    r.set("trace_distance", trace_distance(&out, &rho)?);
    r.set("audit_ok", v.ok);
    r.set("audit_first_bad", v.first_bad);
    if let Some(dir) = out_dir(s, &mut r)? {
        write_file(&mut r, &dir.join("ledger.bin"), &ledger.to_bytes())?;
        write_file(&mut r, &dir.join("ledger.json"), ledger.to_json().as_bytes())?;
    }
    let failure = if !v.ok {
        Some(Failure::Audit(format!("ledger fails at record {:?}: {}", v.first_bad, v.reason.unwrap_or_default())))
    } else if !same || !same_threads {
        Some(Failure::Other("distributed run differs from the monolithic one".into()))
    } else {
        None
    };
    Ok(Outcome { report: r, failure })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[i.min(sorted.len() - 1)]
}

pub fn bench(s: &Settings, iters: usize) -> Res {
    let mut r = report_for("bench", s);
    let mut rng = rng_for(s)?;
    let (_, ek) = ClientKeys::generate(&s.preset, &mut rng)?;
    let es = enc_state(&ek.pk, &DensityMatrix::random(2, &mut rng)?, MaskSpec::depolarizing(s.p)?, &s.preset, &mut rng)?;
    let gates: Vec<(GateLabel, Vec<usize>)> = vec![
        (GateLabel::X, vec![0]),
        (GateLabel::S, vec![0]),
        (GateLabel::H, vec![0]),
        (GateLabel::Cnot, vec![0, 1]),
        (GateLabel::Cz, vec![0, 1]),
        (GateLabel::Rz(0.3), vec![1]),
    ];
    let mut t = Table::new("per-gate lift on 2 qubits (ms)", &["gate", "p50", "p90", "max", "runs"]);
    for (label, wires) in gates {
        let g = GateSuperop::gate(label.clone(), &wires, 2, s.preset.frac_bits)?;
        let mut times = Vec::with_capacity(iters);
        for _ in 0..iters.max(1) {
            let t0 = Instant::now();
            match apply_gate(&es, &g, &ek) {
                Ok(_) => times.push(t0.elapsed().as_secs_f64() * 1e3),
                Err(Error::RefreshNeeded(_)) => break,
                Err(e) => return Err(e.into()),
            }
        }
        if times.is_empty() {
            t.row(vec![label.to_string(), "-".into(), "-".into(), "-".into(), "needs refresh".into()]);
            continue;
        }
        times.sort_by(f64::total_cmp);
        t.row(vec![
            label.to_string(),
            format!("{:.3}", percentile(&times, 0.5)),
            format!("{:.3}", percentile(&times, 0.9)),
            format!("{:.3}", times[times.len() - 1]),
            times.len().to_string(),
        ]);
    }
    r.tables.push(t);
    r.notes.push("timings are measured on this machine and not compared against published figures".into());
    Ok(r.into())
}

/// Noise ledger of the teleport block alone, for reports that do not run it.
pub fn teleport_ledger(sigma: u32) -> Vec<LedgerRow> {
    teleport_noise_table(&teleport_trace(), sigma).iter().map(LedgerRow::from).collect()
}
