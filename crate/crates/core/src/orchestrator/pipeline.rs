//! Pipelines: gate blocks assigned round-robin to worker nodes, and the
//! QHE_Job recursion that walks a state through them.

use std::collections::VecDeque;
use std::sync::mpsc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::audit::{audit_append, Ledger, GENESIS_RULE};
use crate::error::{Error, Result};
use crate::qhe::{
    parse_program, refresh, render_program, run_schedule_observed, EncryptedBackend, EncryptedState, EvalKeys, Instruction,
    ProgramState, RefreshEvent, RefreshReason, ScheduleEvent, SchedulePolicy,
};
use crate::mlwe::Encryptor;
use crate::ring::codec::Reader;
use crate::ring::{Header, ObjectKind};
use crate::rng::SeededGenerator;

/// Default barrier exponent ℓ: a node refreshes on receipt once η > q₀/2^ℓ.
pub const DEFAULT_BARRIER_LOG2: u32 = 3;

/// JSON pipeline description: `{"nodes": 3, "seed": 7, "blocks": ["H 0\n", ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub nodes: usize,
    pub seed: u64,
    pub blocks: Vec<String>,
    #[serde(default)]
    pub barrier_log2: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: usize,
    pub blocks: Vec<usize>,
    /// Declared noise budget; `None` means q₀/2^ℓ.
    pub budget: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub job_id: String,
    pub seed: u64,
    pub blocks: Vec<Vec<Instruction>>,
    pub nodes: Vec<NodeConfig>,
    pub barrier_log2: u32,
    pub policy: SchedulePolicy,
}

/// Block i goes to node i mod n. The seed fixes the job id.
pub fn pipeline_build(blocks: Vec<Vec<Instruction>>, node_count: usize, seed: u64) -> Result<Pipeline> {
    if node_count == 0 {
        return Err(Error::InvalidParams("a pipeline needs at least one node".into()));
    }
    let mut rng = SeededGenerator::from_u64(seed);
    let mut id = [0u8; 8];
    rng.fill_bytes(&mut id);
    let nodes = (0..node_count)
        .map(|id| NodeConfig { id, blocks: (id..blocks.len()).step_by(node_count).collect(), budget: None })
        .collect();
    Ok(Pipeline {
        job_id: hex::encode(id),
        seed,
        blocks,
        nodes,
        barrier_log2: DEFAULT_BARRIER_LOG2,
        policy: SchedulePolicy::default(),
    })
}

impl PipelineSpec {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }

    pub fn build(&self) -> Result<Pipeline> {
        let blocks = self.blocks.iter().map(|b| parse_program(b)).collect::<Result<Vec<_>>>()?;
        let mut p = pipeline_build(blocks, self.nodes, self.seed)?;
        if let Some(l) = self.barrier_log2 {
            p.barrier_log2 = l;
        }
        Ok(p)
    }
}

impl Pipeline {
    pub fn node_of(&self, block: usize) -> usize {
        block % self.nodes.len()
    }

    pub fn gate_count(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn flat_program(&self) -> Vec<Instruction> {
        self.blocks.concat()
    }

    pub fn node_budget(&self, node: usize, q0: u64) -> f64 {
        self.nodes[node].budget.unwrap_or(q0 as f64 / (self.barrier_log2 as f64).exp2())
    }

    /// The coordinator's over-approximation: the sum of node budgets.
    pub fn declared_budget(&self, q0: u64) -> f64 {
        (0..self.nodes.len()).map(|n| self.node_budget(n, q0)).sum()
    }
}

/// What travels between nodes: the state, its ledger, and the next block as
/// program text.
#[derive(Clone, Debug)]
pub struct JobMessage {
    pub block: usize,
    pub code: String,
    pub state: ProgramState,
    pub ledger: Ledger,
    pub first_gate: usize,
    pub refreshes: Vec<RefreshEvent>,
    pub barrier_refreshes: usize,
    /// Tracker growth from gates, summed across refreshes.
    pub consumed: f64,
}

#[derive(Clone, Debug)]
pub enum Message {
    /// Serialized key material. Only public objects are accepted.
    Key(Vec<u8>),
    Job(Box<JobMessage>),
    Shutdown,
}

/// A worker. It never holds a secret key: evaluation keys are public, and
/// any key bytes it is sent are checked by kind on arrival.
pub struct Node<'k> {
    pub id: usize,
    pub inbox: VecDeque<Message>,
    pub keys: &'k EvalKeys,
    pub installed: Vec<Vec<u8>>,
    pub processed: usize,
}

/// Where a processed job goes next.
pub enum Route {
    Node(usize, JobMessage),
    Done(JobMessage),
}

impl<'k> Node<'k> {
    pub fn new(id: usize, keys: &'k EvalKeys) -> Self {
        Self { id, inbox: VecDeque::new(), keys, installed: Vec::new(), processed: 0 }
    }

    pub fn install_key(&mut self, bytes: Vec<u8>) -> Result<()> {
        let h = Header::read(&mut Reader::new(&bytes))?;
        if h.kind == ObjectKind::SecretKey {
            return Err(Error::KeyHygiene(self.id));
        }
        self.installed.push(bytes);
        Ok(())
    }

    /// Handles one message; jobs come back with their next destination.
    pub fn handle(&mut self, msg: Message, p: &Pipeline) -> Result<Option<Route>> {
        match msg {
            Message::Key(bytes) => self.install_key(bytes).map(|_| None),
            Message::Shutdown => Ok(None),
            Message::Job(job) => self.run_block(*job, p).map(Some),
        }
    }

    fn run_block(&mut self, mut job: JobMessage, p: &Pipeline) -> Result<Route> {
        self.processed += 1;
        let ops = parse_program(&job.code)?;
        let budget = p.node_budget(self.id, self.keys.q0());
        // Noise barrier on receipt.
        if job.state.es.tracker > budget {
            let before = job.state.es.tracker;
            let es = refresh(&job.state.es, self.keys)?;
            job.refreshes.push(RefreshEvent {
                gate_index: job.first_gate,
                reason: RefreshReason::Threshold,
                tracker_before: before,
                tracker_after: es.tracker,
                level: es.level(),
            });
            record(&mut job.ledger, &p.job_id, "BARRIER-REFRESH", &es);
            job.barrier_refreshes += 1;
            job.state.es = es;
        }
        let mut backend = EncryptedBackend::new(self.keys, None);
        let (ledger, job_id, consumed) = (&mut job.ledger, &p.job_id, &mut job.consumed);
        let mut last = job.state.es.tracker;
        let (res, log) = run_schedule_observed(&mut backend, job.state.clone(), &ops, &p.policy, job.first_gate, &mut |ev, s| {
            let rule = match ev {
                ScheduleEvent::Applied { label, .. } => {
                    *consumed += s.es.tracker - last;
                    label.clone()
                }
                ScheduleEvent::Refreshed(_) => "REFRESH".to_string(),
            };
            last = s.es.tracker;
            record(ledger, job_id, &rule, &s.es);
        });
        job.state = res?;
        job.refreshes.extend(log.refreshes);
        job.first_gate += ops.len();
        let next = job.block + 1;
        if next >= p.blocks.len() {
            return Ok(Route::Done(job));
        }
        job.block = next;
        job.code = render_program(&p.blocks[next]);
        Ok(Route::Node(p.node_of(next), job))
    }
}

fn record(ledger: &mut Ledger, job_id: &str, rule: &str, es: &EncryptedState) {
    audit_append(ledger, job_id, rule, es.ciphertext_bytes(), es.noise_bound(), es.q());
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// One thread, mailboxes drained in node order.
    Deterministic,
    /// One thread per node, messages over channels.
    Threaded,
}

#[derive(Clone, Debug)]
pub struct JobOutcome {
    pub state: ProgramState,
    pub ledger: Ledger,
    pub refreshes: Vec<RefreshEvent>,
    pub barrier_refreshes: usize,
    /// Blocks processed per node.
    pub per_node: Vec<usize>,
    pub consumed: f64,
}

impl JobOutcome {
    pub fn refresh_count(&self) -> usize {
        self.refreshes.len()
    }
}

fn genesis(p: &Pipeline, es0: &EncryptedState) -> JobMessage {
    let mut ledger = Ledger::default();
    record(&mut ledger, &p.job_id, GENESIS_RULE, es0);
    JobMessage {
        block: 0,
        code: p.blocks.first().map(|b| render_program(b)).unwrap_or_default(),
        state: ProgramState::new(es0.clone()),
        ledger,
        first_gate: 0,
        refreshes: Vec::new(),
        barrier_refreshes: 0,
        consumed: 0.0,
    }
}

fn finish(job: JobMessage, per_node: Vec<usize>) -> JobOutcome {
    JobOutcome {
        state: job.state,
        ledger: job.ledger,
        refreshes: job.refreshes,
        barrier_refreshes: job.barrier_refreshes,
        per_node,
        consumed: job.consumed,
    }
}

/// QHE_Job: schedule the first block on its node, and let each node forward
/// the state to the owner of the next block until the last one publishes.
pub fn job_run(p: &Pipeline, es0: &EncryptedState, keys: &EvalKeys, mode: ExecMode) -> Result<JobOutcome> {
    if es0.key_id() != keys.pk.key_id() {
        return Err(Error::KeyMismatch(es0.key_id(), keys.pk.key_id()));
    }
    let job = genesis(p, es0);
    if p.blocks.is_empty() {
        return Ok(finish(job, vec![0; p.nodes.len()]));
    }
    let key_bytes = keys.pk.to_bytes();
    match mode {
        ExecMode::Deterministic => run_deterministic(p, job, keys, key_bytes),
        ExecMode::Threaded => run_threaded(p, job, keys, key_bytes),
    }
}

fn run_deterministic(p: &Pipeline, job: JobMessage, keys: &EvalKeys, key_bytes: Vec<u8>) -> Result<JobOutcome> {
    let mut nodes: Vec<Node> = (0..p.nodes.len()).map(|i| Node::new(i, keys)).collect();
    for n in &mut nodes {
        n.inbox.push_back(Message::Key(key_bytes.clone()));
    }
    nodes[p.node_of(0)].inbox.push_back(Message::Job(Box::new(job)));
    loop {
        let Some(i) = nodes.iter().position(|n| !n.inbox.is_empty()) else {
            return Err(Error::Unsupported("pipeline stalled without publishing a result".into()));
        };
        let msg = nodes[i].inbox.pop_front().expect("non-empty inbox");
        match nodes[i].handle(msg, p)? {
            None => {}
            Some(Route::Node(j, next)) => nodes[j].inbox.push_back(Message::Job(Box::new(next))),
            Some(Route::Done(done)) => return Ok(finish(done, nodes.iter().map(|n| n.processed).collect())),
        }
    }
}

fn run_threaded(p: &Pipeline, job: JobMessage, keys: &EvalKeys, key_bytes: Vec<u8>) -> Result<JobOutcome> {
    let n = p.nodes.len();
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..n).map(|_| mpsc::channel::<Message>()).unzip();
    let (done_tx, done_rx) = mpsc::channel::<Result<JobMessage>>();
    std::thread::scope(|scope| {
        let handles: Vec<_> = receivers
            .into_iter()
            .enumerate()
            .map(|(id, rx)| {
                let senders = senders.clone();
                let done_tx = done_tx.clone();
                scope.spawn(move || {
                    let mut node = Node::new(id, keys);
                    for msg in rx {
                        if matches!(msg, Message::Shutdown) {
                            break;
                        }
                        match node.handle(msg, p) {
                            Ok(None) => {}
                            Ok(Some(Route::Node(j, next))) => {
                                let _ = senders[j].send(Message::Job(Box::new(next)));
                            }
                            Ok(Some(Route::Done(done))) => {
                                let _ = done_tx.send(Ok(done));
                            }
                            Err(e) => {
                                let _ = done_tx.send(Err(e));
                            }
                        }
                    }
                    node.processed
                })
            })
            .collect();
        for tx in &senders {
            let _ = tx.send(Message::Key(key_bytes.clone()));
        }
        let _ = senders[p.node_of(0)].send(Message::Job(Box::new(job)));
        let result = done_rx.recv().map_err(|_| Error::Unsupported("pipeline workers stopped".into()));
        for tx in &senders {
            let _ = tx.send(Message::Shutdown);
        }
        let per_node: Vec<usize> = handles.into_iter().map(|h| h.join().unwrap_or(0)).collect();
        result?.map(|done| finish(done, per_node))
    })
}
