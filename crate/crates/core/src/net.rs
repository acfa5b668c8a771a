//! The fixed 2-4-1 perceptron: tanh hidden layer, sigmoid output, binary
//! cross-entropy loss, hand-derived gradients.
//!
//! Flattening order of the 17 parameters:
//!
//! | range    | meaning                                   |
//! |----------|-------------------------------------------|
//! | `0..8`   | hidden weights, row-major `W1[j][k]` at `2*j + k` |
//! | `8..12`  | hidden biases `b1[j]`                     |
//! | `12..16` | output weights `w2[j]`                    |
//! | `16`     | output bias `b2`                          |

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Sample;
use crate::params::ParamVector;
use crate::rng::SimRng;

pub const INPUT_DIM: usize = 2;
pub const HIDDEN: usize = 4;
pub const PARAM_DIM: usize = HIDDEN * INPUT_DIM + HIDDEN + HIDDEN + 1;

const B1: usize = HIDDEN * INPUT_DIM;
const W2: usize = B1 + HIDDEN;
/// Index of the output bias; its gradient component equals `p - y`.
pub const OUTPUT_BIAS: usize = W2 + HIDDEN;

/// Probability clamp applied before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-12;
/// Central finite-difference step for the input jacobian.
pub const FD_STEP: f64 = 1e-5;
pub const DEFAULT_INIT_SCALE: f64 = 0.5;

/// Isotropic zero-mean Gaussian noise with per-coordinate standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub dim: usize,
}

impl NoiseSpec {
    pub fn sample(&self, rng: &mut SimRng) -> ParamVector {
        if self.sigma == 0.0 {
            return ParamVector::zeros(self.dim);
        }
        ParamVector(
            (0..self.dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    self.sigma * z
                })
                .collect(),
        )
    }
}

pub fn init_params(rng: &mut SimRng, scale: f64) -> ParamVector {
    assert!(scale >= 0.0, "init scale must be nonnegative");
    ParamVector(
        (0..PARAM_DIM)
            .map(|_| if scale == 0.0 { 0.0 } else { rng.random_range(-scale..=scale) })
            .collect(),
    )
}

fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

struct Activations {
    hidden: [f64; HIDDEN],
    prob: f64,
}

fn activations(params: &[f64], x: [f64; 2]) -> Activations {
    debug_assert_eq!(params.len(), PARAM_DIM);
    let mut hidden = [0.0; HIDDEN];
    let mut out = params[OUTPUT_BIAS];
    for j in 0..HIDDEN {
        let z = params[2 * j] * x[0] + params[2 * j + 1] * x[1] + params[B1 + j];
        hidden[j] = z.tanh();
        out += params[W2 + j] * hidden[j];
    }
    Activations { hidden, prob: sigmoid(out) }
}

pub fn forward(params: &[f64], sample: &Sample) -> f64 {
    activations(params, sample.features()).prob
}

fn bce(prob: f64, target: f64) -> f64 {
    let p = prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

pub fn sample_loss(params: &[f64], sample: &Sample) -> f64 {
    bce(forward(params, sample), sample.target())
}

/// Mean binary cross-entropy over a nonempty batch.
pub fn loss(params: &[f64], batch: &[Sample]) -> f64 {
    assert!(!batch.is_empty(), "loss of an empty batch");
    batch.iter().map(|s| sample_loss(params, s)).sum::<f64>() / batch.len() as f64
}

/// Adds `weight * grad_params(sample)` into `out`.
pub fn accumulate_sample_grad(params: &[f64], x: [f64; 2], target: f64, weight: f64, out: &mut [f64]) {
    let act = activations(params, x);
    let delta = (act.prob - target) * weight;
    out[OUTPUT_BIAS] += delta;
    for j in 0..HIDDEN {
        let h = act.hidden[j];
        out[W2 + j] += delta * h;
        let dz = delta * params[W2 + j] * (1.0 - h * h);
        out[B1 + j] += dz;
        out[2 * j] += dz * x[0];
        out[2 * j + 1] += dz * x[1];
    }
}

pub fn sample_grad(params: &[f64], sample: &Sample) -> ParamVector {
    let mut g = ParamVector::zeros(PARAM_DIM);
    accumulate_sample_grad(params, sample.features(), sample.target(), 1.0, &mut g);
    g
}

/// Gradient of the batch-mean loss with respect to all parameters.
pub fn grad_params(params: &[f64], batch: &[Sample]) -> ParamVector {
    assert!(!batch.is_empty(), "gradient of an empty batch");
    let mut g = ParamVector::zeros(PARAM_DIM);
    let w = 1.0 / batch.len() as f64;
    for s in batch {
        accumulate_sample_grad(params, s.features(), s.target(), w, &mut g);
    }
    g
}

/// Gradient of the single-sample loss with respect to the input coordinates.
pub fn grad_wrt_input(params: &[f64], sample: &Sample) -> [f64; 2] {
    let act = activations(params, sample.features());
    let delta = act.prob - sample.target();
    let mut g = [0.0; 2];
    for j in 0..HIDDEN {
        let h = act.hidden[j];
        let dz = delta * params[W2 + j] * (1.0 - h * h);
        g[0] += dz * params[2 * j];
        g[1] += dz * params[2 * j + 1];
    }
    g
}

/// `d(grad_params)/d(x1, x2)` for one sample, by central differences with step `h`.
/// Row `r` holds the derivatives of gradient component `r`.
pub fn input_jacobian_of_grad_with_step(params: &[f64], sample: &Sample, h: f64) -> [[f64; 2]; PARAM_DIM] {
    let mut jac = [[0.0; 2]; PARAM_DIM];
    let x = sample.features();
    let target = sample.target();
    for k in 0..INPUT_DIM {
        let mut plus = [0.0; PARAM_DIM];
        let mut minus = [0.0; PARAM_DIM];
        let mut xp = x;
        let mut xm = x;
        xp[k] += h;
        xm[k] -= h;
        accumulate_sample_grad(params, xp, target, 1.0, &mut plus);
        accumulate_sample_grad(params, xm, target, 1.0, &mut minus);
        for r in 0..PARAM_DIM {
            jac[r][k] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    jac
}

pub fn input_jacobian_of_grad(params: &[f64], sample: &Sample) -> [[f64; 2]; PARAM_DIM] {
    input_jacobian_of_grad_with_step(params, sample, FD_STEP)
}

/// Closed-form `d(grad_params)/d(x1, x2)`; agrees with the finite-difference
/// version to truncation error and is several times cheaper.
pub fn input_jacobian_of_grad_analytic(params: &[f64], sample: &Sample) -> [[f64; 2]; PARAM_DIM] {
    grad_and_input_jacobian(params, sample).1
}

/// Single-sample parameter gradient together with its closed-form input jacobian.
pub fn grad_and_input_jacobian(params: &[f64], sample: &Sample) -> ([f64; PARAM_DIM], [[f64; 2]; PARAM_DIM]) {
    let x = sample.features();
    let act = activations(params, x);
    let p = act.prob;
    let delta = p - sample.target();
    let curv = p * (1.0 - p);
    let mut slope = [0.0; HIDDEN];
    let mut u = [0.0; 2];
    for j in 0..HIDDEN {
        let h = act.hidden[j];
        slope[j] = 1.0 - h * h;
        let c = params[W2 + j] * slope[j];
        u[0] += c * params[2 * j];
        u[1] += c * params[2 * j + 1];
    }
    // d(delta)/dx = curv * u
    let mut grad = [0.0; PARAM_DIM];
    let mut jac = [[0.0; 2]; PARAM_DIM];
    grad[OUTPUT_BIAS] = delta;
    jac[OUTPUT_BIAS] = [curv * u[0], curv * u[1]];
    for j in 0..HIDDEN {
        let h = act.hidden[j];
        let s = slope[j];
        let w1 = [params[2 * j], params[2 * j + 1]];
        let w2 = params[W2 + j];
        let dz = delta * w2 * s;
        grad[W2 + j] = delta * h;
        grad[B1 + j] = dz;
        grad[2 * j] = dz * x[0];
        grad[2 * j + 1] = dz * x[1];
        let mut d_dz = [0.0; 2];
        for k in 0..2 {
            jac[W2 + j][k] = h * curv * u[k] + delta * s * w1[k];
            d_dz[k] = w2 * (s * curv * u[k] - 2.0 * delta * h * s * w1[k]);
        }
        jac[B1 + j] = d_dz;
        for k in 0..2 {
            for m in 0..2 {
                jac[2 * j + k][m] = x[k] * d_dz[m] + if k == m { dz } else { 0.0 };
            }
        }
    }
    (grad, jac)
}

/// Largest singular value of an `n x 2` matrix via the closed-form eigenvalue of `AᵀA`.
pub fn spectral_norm_n_by_2(rows: &[[f64; 2]]) -> f64 {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for r in rows {
        a += r[0] * r[0];
        b += r[0] * r[1];
        c += r[1] * r[1];
    }
    let half_trace = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (half_trace + disc).max(0.0).sqrt()
}

pub fn frobenius_n_by_2(rows: &[[f64; 2]]) -> f64 {
    rows.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>().sqrt()
}

/// Scales `grad` down to norm `threshold` when it exceeds it.
pub fn clip(grad: &ParamVector, threshold: f64) -> ParamVector {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let norm = grad.norm();
    if norm <= threshold {
        grad.clone()
    } else {
        let mut g = grad.clone();
        g.scale(threshold / norm);
        g
    }
}

/// Result of one noisy local step; the noise draw is kept for audit logs.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyStep {
    pub params: ParamVector,
    pub noise: ParamVector,
}

/// `params - gamma * (grad + eta)` with `eta ~ N(0, sigma^2 I)`.
pub fn noisy_step(
    params: &ParamVector,
    batch: &[Sample],
    gamma: f64,
    noise: &NoiseSpec,
    rng: &mut SimRng,
) -> NoisyStep {
    let grad = grad_params(params, batch);
    apply_noisy_update(params, &grad, gamma, noise, rng)
}

pub fn apply_noisy_update(
    params: &ParamVector,
    grad: &[f64],
    gamma: f64,
    noise: &NoiseSpec,
    rng: &mut SimRng,
) -> NoisyStep {
    let eta = noise.sample(rng);
    let mut next = params.clone();
    for ((p, g), e) in next.iter_mut().zip(grad).zip(eta.iter()) {
        *p -= gamma * (g + e);
    }
    NoisyStep { params: next, noise: eta }
}

/// Fraction of samples whose thresholded prediction matches the label.
pub fn accuracy(params: &[f64], samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let correct = samples
        .iter()
        .filter(|s| u8::from(forward(params, s) >= 0.5) == s.label)
        .count();
    correct as f64 / samples.len() as f64
}
