//! Consensus, mixing-matrix and convergence-bound diagnostics for protocol runs.

use crate::data::DatasetShard;
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::protocol::{IterationLog, Model, RunMetrics};
use crate::rvc;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 100_000;

/// `(1/n̄) Σ ‖x_i − x̄‖²`; zero for an empty set.
pub fn consensus_error(states: &[ParamVector]) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    let mean = ParamVector::mean_of(states, states[0].dim());
    states.iter().map(|x| x.dist_sq(&mean)).sum::<f64>() / states.len() as f64
}

/// Full-shard gradient of every agent at `x`.
fn shard_grads(model: Model, x: &[f64], shards: &[DatasetShard]) -> Vec<ParamVector> {
    shards.iter().map(|s| model.grad(x, &s.train)).collect()
}

/// `‖(1/n̄) Σ_i ∇f_i(x)‖²` with full-shard local gradients.
pub fn global_grad_norm(model: Model, x: &[f64], shards: &[DatasetShard]) -> f64 {
    if shards.is_empty() {
        return 0.0;
    }
    ParamVector::mean_of(&shard_grads(model, x, shards), x.len()).norm_sq()
}

/// `(1/n̄) Σ_i f_i(x)`.
pub fn global_loss(model: Model, x: &[f64], shards: &[DatasetShard]) -> f64 {
    shards.iter().map(|s| model.loss(x, &s.train)).sum::<f64>() / shards.len() as f64
}

/// The round's linear map over normal agents; row `i` gives the weights of
/// `x̃_j(k)` in `x_i(k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    pub agents: Vec<usize>,
    pub entries: Vec<Vec<f64>>,
}

impl MixingMatrix {
    pub fn identity(agents: Vec<usize>) -> Self {
        let n = agents.len();
        let entries = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        Self { agents, entries }
    }

    pub fn from_rows(entries: Vec<Vec<f64>>) -> Self {
        Self { agents: (0..entries.len()).collect(), entries }
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let n = self.size();
        (0..n).map(|j| self.entries.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        self.entries.iter().all(|r| r.iter().all(|&v| v >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() <= tol)
    }
}

/// Builds `M(k)` from a round log. Diagonal `1 − β_i`, off-diagonal `β_i a_ij`
/// over normal in-neighbours. If the aggregator's own weights touch a
/// Byzantine message, the aggregate is re-expressed over normal messages
/// only with a second hull solve.
pub fn extract_mixing_matrix(log: &IterationLog) -> Result<MixingMatrix> {
    let agents: Vec<usize> = log.steps.iter().map(|s| s.agent).collect();
    let n = agents.len();
    let pos = |a: usize| agents.iter().position(|&x| x == a);
    let mut entries = vec![vec![0.0; n]; n];
    for (i, step) in log.steps.iter().enumerate() {
        if step.inputs.is_empty() {
            entries[i][i] = 1.0;
            continue;
        }
        let weights = step.weights.as_ref().ok_or(Error::UnsupportedMode("coordinate-wise"))?;
        let touches_byzantine = weights.iter().any(|&(p, w)| w > 0.0 && log.is_byzantine(step.inputs[p].0));
        let senders_weights: Vec<(usize, f64)> = if touches_byzantine {
            let normal: Vec<(usize, Vec<f64>)> = step
                .inputs
                .iter()
                .filter(|(s, _)| !log.is_byzantine(*s))
                .map(|(s, v)| (*s, v.0.clone()))
                .collect();
            let pts: Vec<Vec<f64>> = normal.iter().map(|(_, v)| v.clone()).collect();
            let w = rvc::hull_weights(&step.aggregate, &pts).ok_or_else(|| {
                Error::Internal(format!(
                    "aggregate of agent {} at iteration {} lies outside the normal hull",
                    step.agent, log.k
                ))
            })?;
            w.into_iter().map(|(p, w)| (normal[p].0, w)).collect()
        } else {
            weights.iter().map(|&(p, w)| (step.inputs[p].0, w)).collect()
        };
        let total: f64 = senders_weights.iter().map(|(_, w)| w).sum();
        entries[i][i] += 1.0 - step.beta;
        for (sender, w) in senders_weights {
            let j = pos(sender).ok_or_else(|| Error::Internal(format!("sender {sender} is not a logged agent")))?;
            entries[i][j] += step.beta * w / total;
        }
    }
    Ok(MixingMatrix { agents, entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingDiagnostics {
    pub lambda: f64,
    pub chi_sq: f64,
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn spectral_norm(a: &[Vec<f64>]) -> f64 {
    let rows = a.len();
    if rows == 0 {
        return 0.0;
    }
    let cols = a[0].len();
    let mut v: Vec<f64> = (0..cols).map(|j| 1.0 + (j as f64 + 1.0) / (cols as f64 + 1.0)).collect();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut est = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let av: Vec<f64> = a.iter().map(|r| r.iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        let mut w = vec![0.0; cols];
        for (r, s) in a.iter().zip(&av) {
            for (wj, x) in w.iter_mut().zip(r) {
                *wj += x * s;
            }
        }
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        // Rayleigh quotient of AᵀA equals ‖Av‖²
        let next = nw;
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - est).abs() <= POWER_TOL * next.max(1.0) {
            return next.sqrt();
        }
        est = next;
    }
    est.sqrt()
}

/// `λ = 1 − ‖(I − 11ᵀ/n̄) M‖²₂` and `χ² = (1/n̄)‖Mᵀ1 − 1‖²`.
pub fn mixing_diagnostics(m: &MixingMatrix) -> MixingDiagnostics {
    let n = m.size();
    if n == 0 {
        return MixingDiagnostics { lambda: f64::NAN, chi_sq: f64::NAN };
    }
    let cols = m.col_sums();
    let centred: Vec<Vec<f64>> = m
        .entries
        .iter()
        .map(|r| r.iter().zip(&cols).map(|(v, c)| v - c / n as f64).collect())
        .collect();
    let s = spectral_norm(&centred);
    let chi_sq = cols.iter().map(|c| (c - 1.0).powi(2)).sum::<f64>() / n as f64;
    MixingDiagnostics { lambda: 1.0 - s * s, chi_sq }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessConstants {
    pub l: f64,
    pub theta_sq: f64,
    pub tau_sq: f64,
}

/// Empirical `L`, `θ²`, `τ²` over a set of parameter samples.
///
/// `θ²` is the exact variance of a size-`batch` without-replacement minibatch
/// mean gradient, which vanishes when the batch covers the shard.
pub fn estimate_constants(
    model: Model,
    shards: &[DatasetShard],
    samples: &[ParamVector],
    batch: usize,
) -> Result<SmoothnessConstants> {
    if samples.len() < 2 {
        return Err(Error::Estimation(format!("need at least 2 parameter samples, got {}", samples.len())));
    }
    if shards.is_empty() {
        return Err(Error::Estimation("no shards".into()));
    }
    let dim = samples[0].dim();
    let grads: Vec<Vec<ParamVector>> = samples.iter().map(|x| shard_grads(model, x, shards)).collect();

    let mut l = 0.0f64;
    for a in 0..samples.len() {
        for b in a + 1..samples.len() {
            let dx = samples[a].dist_sq(&samples[b]).sqrt();
            if dx == 0.0 {
                continue;
            }
            for i in 0..shards.len() {
                l = l.max(grads[a][i].dist_sq(&grads[b][i]).sqrt() / dx);
            }
        }
    }

    let mut theta_sq = 0.0f64;
    for (x, gs) in samples.iter().zip(&grads) {
        for (shard, g_full) in shards.iter().zip(gs) {
            let n = shard.train.len();
            if batch >= n || n < 2 {
                continue;
            }
            let spread: f64 = shard
                .train
                .iter()
                .map(|s| model.grad(x, std::slice::from_ref(s)).dist_sq(g_full))
                .sum::<f64>()
                / n as f64;
            let b = batch as f64;
            let nf = n as f64;
            theta_sq = theta_sq.max(spread / b * (nf - b) / (nf - 1.0));
        }
    }

    let mut tau_sq = 0.0f64;
    for gs in &grads {
        let mean = ParamVector::mean_of(gs, dim);
        tau_sq = tau_sq.max(gs.iter().map(|g| g.dist_sq(&mean)).sum::<f64>() / gs.len() as f64);
    }
    Ok(SmoothnessConstants { l, theta_sq, tau_sq })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub l: f64,
    pub theta_sq: f64,
    pub tau_sq: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub lambda_min: f64,
    pub delta0: f64,
    pub dim: usize,
    pub n_bar: usize,
    /// Largest observed `χ²`.
    pub chi_sq: f64,
    /// `f(x̄(0)) − f*`.
    pub initial_gap: f64,
}

impl BoundInputs {
    /// Fills the run-dependent fields from recorded metrics; `f* = 0` is used
    /// as the lower bound of a nonnegative loss.
    pub fn from_run(
        consts: SmoothnessConstants,
        metrics: &RunMetrics,
        model: Model,
        shards: &[DatasetShard],
        sigma: f64,
        gamma: f64,
    ) -> Self {
        let finite = |v: f64| v.is_finite();
        let lambda_min = metrics.records.iter().map(|r| r.lambda).filter(|v| finite(*v)).fold(f64::INFINITY, f64::min);
        let chi_sq = metrics.records.iter().map(|r| r.chi_sq).filter(|v| finite(*v)).fold(0.0, f64::max);
        let dim = metrics.initial_states.first().map_or(0, |x| x.dim());
        let x0 = ParamVector::mean_of(&metrics.initial_states, dim);
        Self {
            l: consts.l,
            theta_sq: consts.theta_sq,
            tau_sq: consts.tau_sq,
            sigma,
            gamma,
            lambda_min: if lambda_min.is_finite() { lambda_min } else { f64::NAN },
            delta0: consensus_error(&metrics.initial_states),
            dim,
            n_bar: metrics.initial_states.len(),
            chi_sq,
            initial_gap: global_loss(model, &x0, shards),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub big_lambda: f64,
    pub step_size_limit: f64,
    /// Step-size condition holds and `Λ < 1`.
    pub consensus_bound_applicable: bool,
    pub consensus_bound: Vec<f64>,
    pub consensus_bound_fraction: f64,
    pub stationarity_lhs: f64,
    pub stationarity_bound: f64,
    pub stationarity_bound_constants: f64,
    pub c: [f64; 5],
}

/// `Λ = (1−λ)[2λ + 24γ²L²(2−λ)] / ((2−λ)λ)`
pub fn contraction_factor(lambda: f64, gamma: f64, l: f64) -> f64 {
    (1.0 - lambda) * (2.0 * lambda + 24.0 * gamma * gamma * l * l * (2.0 - lambda)) / ((2.0 - lambda) * lambda)
}

/// `(1/2L) sqrt(λ / (6(1−λ)(2−λ)))`
pub fn step_size_limit(lambda: f64, l: f64) -> f64 {
    (lambda / (6.0 * (1.0 - lambda) * (2.0 - lambda))).sqrt() / (2.0 * l)
}

/// Steady-state part of the consensus bound.
pub fn consensus_floor(b: &BoundInputs, big_lambda: f64) -> f64 {
    2.0 * b.gamma * b.gamma * (8.0 * b.theta_sq + 6.0 * b.tau_sq + 2.0 * b.dim as f64 * b.sigma * b.sigma)
        / (b.lambda_min * (1.0 - big_lambda))
}

pub fn evaluate_bounds(metrics: &RunMetrics, b: &BoundInputs) -> BoundReport {
    let lam = b.lambda_min;
    let big_lambda = contraction_factor(lam, b.gamma, b.l);
    let limit = step_size_limit(lam, b.l);
    let consensus_bound_applicable = b.gamma < limit && big_lambda < 1.0 && lam > 0.0;
    let floor = consensus_floor(b, big_lambda);
    let consensus_bound: Vec<f64> = metrics
        .records
        .iter()
        .map(|r| big_lambda.powf(r.k as f64) * b.delta0 + floor)
        .collect();
    let hits = metrics.records.iter().zip(&consensus_bound).filter(|(r, rhs)| r.delta <= **rhs).count();
    let k_total = metrics.records.len().max(1) as f64;
    let consensus_bound_fraction = hits as f64 / k_total;

    let (n, d, chi, g, l) = (b.n_bar as f64, b.dim as f64, b.chi_sq, b.gamma, b.l);
    let (th, ta, s2) = (b.theta_sq, b.tau_sq, b.sigma * b.sigma);
    let stationarity_lhs = metrics.records.iter().map(|r| r.grad_norm_sq).sum::<f64>() / k_total;
    let sum_delta: f64 = metrics.records.iter().map(|r| r.delta).sum();
    let stationarity_bound = 2.0 * b.initial_gap / (g * k_total)
        + 12.0 / n * chi * (4.0 * th + 3.0 * ta)
        + 2.0 * g * th * l / n
        + 3.0 * (l * l / (n * n) + 2.0 * chi / (g * g) + 24.0 * chi * l * l) / k_total * sum_delta
        + 3.0 * (d / n + 4.0 * chi * d) * s2;

    let c = g * k_total.sqrt();
    let den = lam * (1.0 - big_lambda);
    let c1 = 2.0 * b.initial_gap / c + 2.0 * c * th * l / n;
    let c2 = 3.0 * l * l * (1.0 + 24.0 * chi * n * n) / (n * n) * (lam * b.delta0 + 2.0 * c * (8.0 * th + 6.0 * ta + 2.0 * d * s2))
        / den;
    let c3 = 96.0 / (c * den) + 48.0 / n;
    let c4 = 8.0 * chi / (c * den) + (3.0 + 12.0 * chi) / n;
    let c5 = 2.0 * chi * b.delta0 / (c * c * (1.0 - big_lambda));
    let stationarity_bound_constants = c1 / k_total.sqrt() + c2 / k_total + c3 * chi * (th + ta) + c4 * d * s2 + c5;

    BoundReport {
        big_lambda,
        step_size_limit: limit,
        consensus_bound_applicable,
        consensus_bound,
        consensus_bound_fraction,
        stationarity_lhs,
        stationarity_bound,
        stationarity_bound_constants,
        c: [c1, c2, c3, c4, c5],
    }
}
