//! Synchronous decentralized training with Byzantine message injection.
//!
//! Each round every normal agent takes a noisy local step, broadcasts the
//! result to its out-neighbours, aggregates what it received with a
//! resilient rule and mixes the aggregate with its own noisy iterate.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{DatasetShard, Sample};
use crate::diagnostics::{consensus_error, extract_mixing_matrix, global_grad_norm, mixing_diagnostics, MixingMatrix};
use crate::error::{Error, Result};
use crate::net;
use crate::params::ParamVector;
use crate::rng::{substream, Domain, SimRng};
use crate::rvc::{self, PointSet, RvcMode};
use crate::topology::Topology;

/// Local objective optimised by every agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// The 2-4-1 sigmoid network with binary cross-entropy (17 parameters).
    Mlp,
    /// `½‖x − ξ‖²` over the sample features (2 parameters). Its iterates live
    /// in the plane, which lets the exact 2-D aggregation kernels run on it.
    Centroid,
}

impl Model {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mlp" => Some(Self::Mlp),
            "centroid" => Some(Self::Centroid),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mlp => "mlp",
            Self::Centroid => "centroid",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Self::Mlp => net::PARAM_DIM,
            Self::Centroid => 2,
        }
    }

    pub fn init(self, rng: &mut SimRng, scale: f64) -> ParamVector {
        match self {
            Self::Mlp => net::init_params(rng, scale),
            Self::Centroid => ParamVector(
                (0..2)
                    .map(|_| if scale == 0.0 { 0.0 } else { rng.random_range(-scale..=scale) })
                    .collect(),
            ),
        }
    }

    /// Mean gradient over `batch` (zero for an empty batch).
    pub fn grad(self, params: &[f64], batch: &[Sample]) -> ParamVector {
        match self {
            Self::Mlp => {
                if batch.is_empty() {
                    ParamVector::zeros(net::PARAM_DIM)
                } else {
                    net::grad_params(params, batch)
                }
            }
            Self::Centroid => {
                if batch.is_empty() {
                    return ParamVector::zeros(2);
                }
                let inv = 1.0 / batch.len() as f64;
                let mut g = ParamVector(params.to_vec());
                for s in batch {
                    let x = s.features();
                    g[0] -= x[0] * inv;
                    g[1] -= x[1] * inv;
                }
                g
            }
        }
    }

    pub fn loss(self, params: &[f64], batch: &[Sample]) -> f64 {
        match self {
            Self::Mlp => net::loss(params, batch),
            Self::Centroid => {
                let sum: f64 = batch
                    .iter()
                    .map(|s| {
                        let x = s.features();
                        0.5 * ((params[0] - x[0]).powi(2) + (params[1] - x[1]).powi(2))
                    })
                    .sum();
                sum / batch.len() as f64
            }
        }
    }

    /// Classification accuracy; undefined (NaN) for the centroid objective.
    pub fn accuracy(self, params: &[f64], samples: &[Sample]) -> f64 {
        match self {
            Self::Mlp => net::accuracy(params, samples),
            Self::Centroid => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregator {
    Rvc(RvcMode),
    /// Plain average of received vectors, no defence.
    Mean,
    /// Per-coordinate mean after dropping the `f` largest and `f` smallest
    /// values. With `clip`, each received vector is first pulled to within
    /// that distance of the receiver's own iterate.
    TrimmedMean { clip: Option<f64> },
}

impl Aggregator {
    pub fn parse(s: &str, clip: Option<f64>) -> Option<Self> {
        match s {
            "mean" => Some(Self::Mean),
            "trimmed-mean" => Some(Self::TrimmedMean { clip }),
            other => RvcMode::parse(other).map(Self::Rvc),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Rvc(m) => m.as_str(),
            Self::Mean => "mean",
            Self::TrimmedMean { .. } => "trimmed-mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    None,
    Constant,
    SignFlip,
    Gaussian,
    HiddenPerturbation,
}

impl AttackKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Self::None),
            "constant" => Some(Self::Constant),
            "sign-flip" => Some(Self::SignFlip),
            "gaussian" => Some(Self::Gaussian),
            "hidden-perturbation" => Some(Self::HiddenPerturbation),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Constant => "constant",
            Self::SignFlip => "sign-flip",
            Self::Gaussian => "gaussian",
            Self::HiddenPerturbation => "hidden-perturbation",
        }
    }

    pub const ALL: [AttackKind; 5] = [
        Self::None,
        Self::Constant,
        Self::SignFlip,
        Self::Gaussian,
        Self::HiddenPerturbation,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub magnitude: f64,
    /// Draw a separate message for every receiver.
    pub per_receiver: bool,
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self { kind: AttackKind::None, magnitude: 0.5, per_receiver: false }
    }
}

/// What a Byzantine sender knows when crafting a message.
#[derive(Debug, Clone, Copy)]
pub struct AttackContext<'a> {
    pub receiver: usize,
    /// The vector an honest sender in its position would transmit.
    pub honest: &'a [f64],
    /// Vectors it has observed from normal agents this round.
    pub views: &'a [&'a [f64]],
}

pub fn byzantine_message(attack: &AttackSpec, ctx: &AttackContext<'_>, rng: &mut SimRng) -> ParamVector {
    let m = attack.magnitude;
    match attack.kind {
        AttackKind::None => ParamVector(ctx.honest.to_vec()),
        AttackKind::Constant => ParamVector(vec![m; ctx.honest.len()]),
        AttackKind::SignFlip => ParamVector(ctx.honest.iter().map(|v| -m * v).collect()),
        AttackKind::Gaussian => ParamVector(
            ctx.honest
                .iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(rng);
                    v + m * z
                })
                .collect(),
        ),
        AttackKind::HiddenPerturbation => {
            if ctx.views.is_empty() {
                return ParamVector(ctx.honest.to_vec());
            }
            let n = ctx.views.len() as f64;
            ParamVector(
                (0..ctx.honest.len())
                    .map(|c| {
                        let mean = ctx.views.iter().map(|v| v[c]).sum::<f64>() / n;
                        let var = ctx.views.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / n;
                        mean + m * var.sqrt()
                    })
                    .collect(),
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Beta {
    Constant(f64),
    /// One weight per agent, indexed by agent id.
    PerAgent(Vec<f64>),
}

impl Beta {
    pub fn get(&self, agent: usize) -> f64 {
        match self {
            Self::Constant(b) => *b,
            Self::PerAgent(v) => v[agent],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub seed: u64,
    pub model: Model,
    pub iterations: usize,
    pub gamma: f64,
    pub beta: Beta,
    pub batch: usize,
    pub sigma: f64,
    pub init_scale: f64,
    /// All normal agents start from the same draw.
    pub common_init: bool,
    pub aggregator: Aggregator,
    /// Byzantine bound assumed by the aggregator; defaults to the size of the
    /// topology's Byzantine set.
    pub f: Option<usize>,
    pub attack: AttackSpec,
    pub subset_cap: usize,
    /// Reconstruct `M(k)` and its diagnostics when weights are available.
    pub mixing: bool,
    /// Store `x̄(k)` every this many iterations (0 disables).
    pub snapshot_every: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: Model::Mlp,
            iterations: 8000,
            gamma: 0.01,
            beta: Beta::Constant(0.8),
            batch: 16,
            sigma: 2.0,
            init_scale: net::DEFAULT_INIT_SCALE,
            common_init: false,
            aggregator: Aggregator::Rvc(RvcMode::CoordinateWise),
            f: None,
            attack: AttackSpec::default(),
            subset_cap: rvc::DEFAULT_SUBSET_CAP,
            mixing: true,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub delta: f64,
    pub grad_norm_sq: f64,
    pub test_acc: f64,
    pub lambda: f64,
    pub chi_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub records: Vec<IterationRecord>,
    /// `(k, x̄(k))` pairs.
    pub snapshots: Vec<(usize, ParamVector)>,
    /// Normal agents' parameters after the last round, in agent order.
    pub final_states: Vec<ParamVector>,
    /// Normal agents' parameters at `k = 0`.
    pub initial_states: Vec<ParamVector>,
}

impl RunMetrics {
    pub fn final_test_accuracy(&self, model: Model, shards: &[DatasetShard]) -> f64 {
        mean_accuracy(model, &self.final_states, shards)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,delta,grad_norm_sq,test_acc,lambda,chi_sq")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e}",
                r.k, r.delta, r.grad_norm_sq, r.test_acc, r.lambda, r.chi_sq
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub receiver: usize,
    pub value: ParamVector,
}

/// One normal agent's round.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub agent: usize,
    pub beta: f64,
    pub x_tilde: ParamVector,
    /// Received `(sender, vector)` pairs in sender order.
    pub inputs: Vec<(usize, ParamVector)>,
    pub aggregate: ParamVector,
    /// Convex weights over `inputs` positions, when the aggregator reports them.
    pub weights: Option<Vec<(usize, f64)>>,
    pub next: ParamVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub k: usize,
    pub byzantine: Vec<usize>,
    pub messages: Vec<Message>,
    pub steps: Vec<AgentStep>,
    pub mixing: Option<MixingMatrix>,
}

impl IterationLog {
    pub fn is_byzantine(&self, agent: usize) -> bool {
        self.byzantine.binary_search(&agent).is_ok()
    }

    /// Audit CSV rows: `k,sender,receiver,v0,v1,...`.
    pub fn write_audit<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        for m in &self.messages {
            write!(out, "{},{},{}", self.k, m.sender, m.receiver)?;
            for v in m.value.iter() {
                write!(out, ",{v:e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn audit_header(dim: usize) -> String {
    let cols: Vec<String> = (0..dim).map(|c| format!("v{c}")).collect();
    format!("k,sender,receiver,{}", cols.join(","))
}

fn mean_accuracy(model: Model, states: &[ParamVector], shards: &[DatasetShard]) -> f64 {
    let accs: Vec<f64> = states
        .iter()
        .zip(shards)
        .filter(|(_, s)| !s.test.is_empty())
        .map(|(x, s)| model.accuracy(x, &s.test))
        .collect();
    if accs.is_empty() {
        f64::NAN
    } else {
        accs.iter().sum::<f64>() / accs.len() as f64
    }
}

/// Aggregate received vectors for agent `i`; returns the point and, when
/// available, convex weights over input positions.
pub fn aggregate(
    aggregator: Aggregator,
    own: &[f64],
    inputs: &[&[f64]],
    f: usize,
    subset_cap: usize,
) -> Result<(ParamVector, Option<Vec<(usize, f64)>>)> {
    if inputs.is_empty() {
        return Ok((ParamVector(own.to_vec()), None));
    }
    let dim = own.len();
    match aggregator {
        Aggregator::Mean => {
            let w = 1.0 / inputs.len() as f64;
            let mut s = ParamVector::zeros(dim);
            for v in inputs {
                s.axpy(w, v);
            }
            Ok((s, Some((0..inputs.len()).map(|j| (j, w)).collect())))
        }
        Aggregator::TrimmedMean { clip } => {
            let vectors: Vec<Vec<f64>> = inputs
                .iter()
                .map(|v| match clip {
                    Some(c) => {
                        let diff = ParamVector(v.iter().zip(own).map(|(a, b)| a - b).collect());
                        let d = net::clip(&diff, c);
                        d.iter().zip(own).map(|(a, b)| a + b).collect()
                    }
                    None => v.to_vec(),
                })
                .collect();
            let keep = inputs.len() - 2 * f;
            let mut col = vec![0.0; inputs.len()];
            let s = (0..dim)
                .map(|c| {
                    for (slot, v) in col.iter_mut().zip(&vectors) {
                        *slot = v[c];
                    }
                    col.sort_by(f64::total_cmp);
                    col[f..f + keep].iter().sum::<f64>() / keep as f64
                })
                .collect();
            Ok((ParamVector(s), None))
        }
        Aggregator::Rvc(mode) => {
            let set = PointSet::new(inputs.iter().map(|v| v.to_vec()).collect(), f);
            let r = rvc::safe_point(&set, mode, subset_cap)?;
            Ok((ParamVector(r.point), r.weights))
        }
    }
}

/// Checks the aggregation precondition for one receiver.
fn check_resilience(
    aggregator: Aggregator,
    dim: usize,
    f: usize,
    received: usize,
    byzantine_in: usize,
    agent: usize,
    k: usize,
) -> Result<()> {
    let cond_dim = match aggregator {
        Aggregator::Mean => return Ok(()),
        Aggregator::TrimmedMean { .. } => 1,
        Aggregator::Rvc(m) => m.condition_dim(dim),
    };
    if byzantine_in > f {
        return Err(Error::Resilience(format!(
            "agent {agent} at iteration {k}: {byzantine_in} Byzantine in-neighbours exceed the bound f = {f}"
        )));
    }
    if received > 0 && !rvc::resilience_holds(received, f, cond_dim) {
        return Err(Error::Resilience(format!(
            "agent {agent} at iteration {k}: f = {f} requires more than {} in-neighbours in dimension {cond_dim}, got {received}",
            f * (cond_dim + 1)
        )));
    }
    Ok(())
}

fn validate(cfg: &ProtocolConfig, topo: &Topology, shards: &[DatasetShard]) -> Result<Vec<usize>> {
    if cfg.iterations == 0 {
        return Err(Error::Config("iterations must be >= 1".into()));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) {
        return Err(Error::Config(format!("step size must be positive, got {}", cfg.gamma)));
    }
    if !(cfg.sigma >= 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::Config(format!("noise std must be >= 0, got {}", cfg.sigma)));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    if let Beta::PerAgent(v) = &cfg.beta {
        if v.len() != topo.n() {
            return Err(Error::Config(format!("{} mixing weights for {} agents", v.len(), topo.n())));
        }
    }
    for a in 0..topo.n() {
        let b = cfg.beta.get(a);
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Config(format!("mixing weight of agent {a} must lie in [0, 1], got {b}")));
        }
    }
    let normal = topo.normal_agents();
    if shards.len() != normal.len() {
        return Err(Error::Config(format!(
            "{} shards for {} normal agents",
            shards.len(),
            normal.len()
        )));
    }
    if shards.iter().any(|s| s.train.is_empty()) {
        return Err(Error::Config("every normal agent needs training data".into()));
    }
    if let Aggregator::TrimmedMean { clip: Some(c) } = cfg.aggregator {
        if !(c > 0.0) {
            return Err(Error::Config(format!("clip threshold must be positive, got {c}")));
        }
    }
    topo.check_normal_connectivity(cfg.iterations)?;
    Ok(normal)
}

pub fn run(cfg: &ProtocolConfig, topo: &Topology, shards: &[DatasetShard]) -> Result<RunMetrics> {
    run_observed(cfg, topo, shards, None)
}

/// `shards[j]` belongs to the `j`-th normal agent in increasing id order.
/// The observer, if any, sees every round's full log.
pub fn run_observed(
    cfg: &ProtocolConfig,
    topo: &Topology,
    shards: &[DatasetShard],
    mut observer: Option<&mut dyn FnMut(&IterationLog) -> Result<()>>,
) -> Result<RunMetrics> {
    let normal = validate(cfg, topo, shards)?;
    let n = topo.n();
    let dim = cfg.model.dim();
    let f = cfg.f.unwrap_or(topo.byzantine().len());
    let byzantine: Vec<usize> = topo.byzantine().iter().copied().collect();
    // position of each agent among the normal ones
    let mut slot = vec![usize::MAX; n];
    for (j, &a) in normal.iter().enumerate() {
        slot[a] = j;
    }

    let mut batch_rngs: Vec<SimRng> = normal.iter().map(|&a| substream(cfg.seed, Domain::Batch, a as u64)).collect();
    let mut noise_rngs: Vec<SimRng> = normal.iter().map(|&a| substream(cfg.seed, Domain::Noise, a as u64)).collect();
    let mut attack_rngs: Vec<SimRng> = (0..n).map(|a| substream(cfg.seed, Domain::Attack, a as u64)).collect();
    let mut states: Vec<ParamVector> = normal
        .iter()
        .map(|&a| {
            let idx = if cfg.common_init { 0 } else { a as u64 };
            cfg.model.init(&mut substream(cfg.seed, Domain::Init, idx), cfg.init_scale)
        })
        .collect();
    let noise = net::NoiseSpec { sigma: cfg.sigma, dim };
    let segments = topo.segments(cfg.iterations);
    let mut seg_idx = 0;

    let mut metrics = RunMetrics {
        records: Vec::with_capacity(cfg.iterations),
        snapshots: Vec::new(),
        final_states: Vec::new(),
        initial_states: states.clone(),
    };
    let mut batch: Vec<Sample> = Vec::with_capacity(cfg.batch);

    for k in 0..cfg.iterations {
        while segments[seg_idx].end <= k {
            seg_idx += 1;
        }
        let in_nb = &segments[seg_idx].in_neighbors;

        let x_bar = ParamVector::mean_of(&states, dim);
        let delta = consensus_error(&states);
        let grad_norm_sq = global_grad_norm(cfg.model, &x_bar, shards);
        let test_acc = mean_accuracy(cfg.model, &states, shards);
        if cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0 {
            metrics.snapshots.push((k, x_bar.clone()));
        }

        // local SGD phase
        let mut x_tilde = Vec::with_capacity(normal.len());
        for (j, shard) in shards.iter().enumerate() {
            let train = &shard.train;
            batch.clear();
            if cfg.batch >= train.len() {
                batch.extend_from_slice(train);
            } else {
                batch.extend(sample_indices(&mut batch_rngs[j], train.len(), cfg.batch).iter().map(|i| train[i]));
            }
            let g = cfg.model.grad(&states[j], &batch);
            x_tilde.push(net::apply_noisy_update(&states[j], &g, cfg.gamma, &noise, &mut noise_rngs[j]).params);
        }

        // transmission phase: Byzantine senders craft one message per receiver
        let mut byz_msgs: Vec<Vec<(usize, ParamVector)>> = vec![Vec::new(); n];
        for &b in &byzantine {
            let views: Vec<&[f64]> = {
                let seen: Vec<&[f64]> = in_nb[b]
                    .iter()
                    .filter(|&&s| slot[s] != usize::MAX)
                    .map(|&s| x_tilde[slot[s]].0.as_slice())
                    .collect();
                if seen.is_empty() {
                    x_tilde.iter().map(|v| v.0.as_slice()).collect()
                } else {
                    seen
                }
            };
            let honest = mean_of_slices(&views, dim);
            let receivers: Vec<usize> = (0..n)
                .filter(|&r| slot[r] != usize::MAX && in_nb[r].contains(&b))
                .collect();
            let mut shared: Option<ParamVector> = None;
            for &r in &receivers {
                let ctx = AttackContext { receiver: r, honest: &honest, views: &views };
                let msg = if cfg.attack.per_receiver {
                    byzantine_message(&cfg.attack, &ctx, &mut attack_rngs[b])
                } else {
                    shared
                        .get_or_insert_with(|| byzantine_message(&cfg.attack, &ctx, &mut attack_rngs[b]))
                        .clone()
                };
                byz_msgs[b].push((r, msg));
            }
        }

        // aggregation phase
        let mut next_states = Vec::with_capacity(normal.len());
        let mut steps: Vec<AgentStep> = Vec::with_capacity(normal.len());
        let keep_log = observer.is_some() || cfg.mixing;
        let mut messages = Vec::new();
        for (j, &i) in normal.iter().enumerate() {
            let mut inputs: Vec<(usize, &[f64])> = Vec::with_capacity(in_nb[i].len());
            let mut byz_in = 0;
            for &s in &in_nb[i] {
                if slot[s] != usize::MAX {
                    inputs.push((s, x_tilde[slot[s]].0.as_slice()));
                } else {
                    byz_in += 1;
                    let m = byz_msgs[s]
                        .iter()
                        .find(|(r, _)| *r == i)
                        .map(|(_, v)| v.0.as_slice())
                        .ok_or_else(|| Error::Internal(format!("missing message {s} -> {i}")))?;
                    inputs.push((s, m));
                }
            }
            check_resilience(cfg.aggregator, dim, f, inputs.len(), byz_in, i, k)?;
            let vecs: Vec<&[f64]> = inputs.iter().map(|(_, v)| *v).collect();
            let (s_i, weights) = aggregate(cfg.aggregator, &x_tilde[j], &vecs, f, cfg.subset_cap)
                .map_err(|e| match e {
                    Error::Resilience(msg) => Error::Resilience(format!("agent {i} at iteration {k}: {msg}")),
                    other => other,
                })?;
            let beta = if inputs.is_empty() { 0.0 } else { cfg.beta.get(i) };
            let next = ParamVector(
                s_i.iter()
                    .zip(x_tilde[j].iter())
                    .map(|(s, x)| beta * s + (1.0 - beta) * x)
                    .collect(),
            );
            if keep_log {
                if observer.is_some() {
                    messages.extend(inputs.iter().map(|(s, v)| Message {
                        sender: *s,
                        receiver: i,
                        value: ParamVector(v.to_vec()),
                    }));
                }
                steps.push(AgentStep {
                    agent: i,
                    beta,
                    x_tilde: x_tilde[j].clone(),
                    inputs: inputs.iter().map(|(s, v)| (*s, ParamVector(v.to_vec()))).collect(),
                    aggregate: s_i,
                    weights,
                    next: next.clone(),
                });
            }
            next_states.push(next);
        }

        let mut log = IterationLog { k, byzantine: byzantine.clone(), messages, steps, mixing: None };
        let (mut lambda, mut chi_sq) = (f64::NAN, f64::NAN);
        if cfg.mixing && log.steps.iter().all(|s| s.weights.is_some() || s.inputs.is_empty()) {
            if let Ok(m) = extract_mixing_matrix(&log) {
                let d = mixing_diagnostics(&m);
                lambda = d.lambda;
                chi_sq = d.chi_sq;
                log.mixing = Some(m);
            }
        }
        if let Some(obs) = observer.as_mut() {
            obs(&log)?;
        }
        metrics.records.push(IterationRecord { k, delta, grad_norm_sq, test_acc, lambda, chi_sq });
        states = next_states;
    }
    metrics.final_states = states;
    Ok(metrics)
}

fn mean_of_slices(vs: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for v in vs {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x;
        }
    }
    let inv = 1.0 / vs.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    out
}
