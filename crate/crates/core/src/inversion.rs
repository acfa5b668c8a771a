//! Gradient-inversion attack on a single-sample gradient: analytic label
//! inference from the output-bias component, then gradient descent on the
//! input to match the observed gradient.

use rand::Rng;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::net::{self, NoiseSpec, OUTPUT_BIAS, PARAM_DIM};
use crate::params::ParamVector;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    pub iterations: usize,
    pub initial_step: f64,
    pub restarts: usize,
    pub fd_step: f64,
    /// Half-width of the box from which starting points are drawn.
    pub init_half_width: f64,
    /// Consecutive increases of `J` after which the run is flagged divergent.
    pub divergence_window: usize,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            initial_step: 0.1,
            restarts: 10,
            fd_step: net::FD_STEP,
            init_half_width: 8.5,
            divergence_window: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub estimated_sample: [f64; 2],
    pub inferred_label: u8,
    /// Distance of the current iterate to the true input, per attack
    /// iteration, for the restart that reached the lowest `J`.
    pub distance_trace: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub best_objective: f64,
    pub diverged: bool,
}

impl AttackResult {
    pub fn final_distance(&self, truth: [f64; 2]) -> f64 {
        dist(self.estimated_sample, truth)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "attack_iter,distance,J")?;
        for (i, (d, j)) in self.distance_trace.iter().zip(&self.objective_trace).enumerate() {
            writeln!(out, "{i},{d:e},{j:e}")?;
        }
        Ok(())
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// The output-bias gradient component equals `p − y`, so it is negative
/// exactly for label 1.
pub fn infer_label(target_grad: &[f64]) -> Result<u8> {
    let c = target_grad[OUTPUT_BIAS];
    if c == 0.0 {
        Err(Error::AmbiguousLabel)
    } else {
        Ok(u8::from(c < 0.0))
    }
}

/// What an observer of one noisy step learns: the sample gradient plus the
/// step's Gaussian noise.
pub fn observed_gradient(params: &[f64], sample: &Sample, sigma: f64, rng: &mut SimRng) -> ParamVector {
    let mut g = net::sample_grad(params, sample);
    let eta = NoiseSpec { sigma, dim: PARAM_DIM }.sample(rng);
    g.axpy(1.0, &eta);
    g
}

/// `J(x̂) = ‖∇f(params; (x̂, label)) − target‖²`
pub fn objective(params: &[f64], x: [f64; 2], label: u8, target: &[f64]) -> f64 {
    let g = net::sample_grad(params, &Sample::new(x[0], x[1], label));
    g.dist_sq(target)
}

/// `∂J/∂x̂` through a central-difference jacobian of the inner gradient.
fn objective_grad(params: &[f64], x: [f64; 2], label: u8, target: &[f64], h: f64) -> [f64; 2] {
    let s = Sample::new(x[0], x[1], label);
    let g = net::sample_grad(params, &s);
    let jac = net::input_jacobian_of_grad_with_step(params, &s, h);
    let mut out = [0.0; 2];
    for r in 0..PARAM_DIM {
        let res = g[r] - target[r];
        out[0] += 2.0 * res * jac[r][0];
        out[1] += 2.0 * res * jac[r][1];
    }
    out
}

struct Descent {
    best_x: [f64; 2],
    best_j: f64,
    distances: Vec<f64>,
    objectives: Vec<f64>,
    diverged: bool,
}

fn descend(params: &[f64], start: [f64; 2], label: u8, target: &[f64], truth: [f64; 2], cfg: &InversionConfig) -> Descent {
    let mut x = start;
    let mut j = objective(params, x, label, target);
    let mut step = cfg.initial_step;
    let mut out = Descent {
        best_x: x,
        best_j: j,
        distances: Vec::with_capacity(cfg.iterations),
        objectives: Vec::with_capacity(cfg.iterations),
        diverged: false,
    };
    let mut rising = 0usize;
    for _ in 0..cfg.iterations {
        out.distances.push(dist(x, truth));
        out.objectives.push(j);
        let g = objective_grad(params, x, label, target, cfg.fd_step);
        if g[0] == 0.0 && g[1] == 0.0 {
            continue;
        }
        // backtracking: halve until J decreases, then let the step grow again
        let mut accepted = None;
        let mut s = step;
        while s > 1e-18 {
            let cand = [x[0] - s * g[0], x[1] - s * g[1]];
            let jc = objective(params, cand, label, target);
            if jc < j {
                accepted = Some((cand, jc));
                break;
            }
            s *= 0.5;
        }
        match accepted {
            Some((cand, jc)) => {
                rising = if jc > j { rising + 1 } else { 0 };
                x = cand;
                j = jc;
                step = (s * 2.0).min(1e6);
            }
            None => step = cfg.initial_step,
        }
        if j < out.best_j {
            out.best_j = j;
            out.best_x = x;
        }
        if !j.is_finite() || rising >= cfg.divergence_window {
            out.diverged = true;
        }
    }
    out
}

/// Reconstructs the input behind `target_grad`. `truth` is only used to
/// record the distance trace.
pub fn reconstruct(
    params: &[f64],
    target_grad: &[f64],
    truth: [f64; 2],
    cfg: &InversionConfig,
    rng: &mut SimRng,
) -> Result<AttackResult> {
    if cfg.iterations == 0 || cfg.restarts == 0 {
        return Err(Error::Config("attack needs at least one iteration and one restart".into()));
    }
    let label = infer_label(target_grad)?;
    let w = cfg.init_half_width;
    let mut best: Option<Descent> = None;
    for _ in 0..cfg.restarts {
        let start = [rng.random_range(-w..=w), rng.random_range(-w..=w)];
        let d = descend(params, start, label, target_grad, truth, cfg);
        if best.as_ref().is_none_or(|b| d.best_j < b.best_j) {
            best = Some(d);
        }
    }
    let b = best.expect("at least one restart");
    Ok(AttackResult {
        estimated_sample: b.best_x,
        inferred_label: label,
        distance_trace: b.distances,
        objective_trace: b.objectives,
        best_objective: b.best_j,
        diverged: b.diverged,
    })
}

/// Runs the attack from a given starting point instead of random restarts.
pub fn reconstruct_from(
    params: &[f64],
    target_grad: &[f64],
    truth: [f64; 2],
    start: [f64; 2],
    cfg: &InversionConfig,
) -> Result<AttackResult> {
    let label = infer_label(target_grad)?;
    let d = descend(params, start, label, target_grad, truth, cfg);
    Ok(AttackResult {
        estimated_sample: d.best_x,
        inferred_label: label,
        distance_trace: d.distances,
        objective_trace: d.objectives,
        best_objective: d.best_j,
        diverged: d.diverged,
    })
}

/// One paired trial: the same model, sample and restart points attacked
/// through the exact gradient and through a noisy one.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTrial {
    pub truth: Sample,
    pub clean: AttackResult,
    pub noisy: AttackResult,
}

pub fn paired_trial(seed: u64, trial: u64, sigma: f64, init_scale: f64, data: &crate::data::DataConfig, cfg: &InversionConfig) -> Result<PairedTrial> {
    use crate::rng::{substream, Domain};
    let params = net::init_params(&mut substream(seed, Domain::Inversion, 4 * trial), init_scale);
    let truth = crate::data::synthesize(1, data, &mut substream(seed, Domain::Inversion, 4 * trial + 1))[0];
    let clean_grad = net::sample_grad(&params, &truth);
    let noisy_grad = observed_gradient(&params, &truth, sigma, &mut substream(seed, Domain::Inversion, 4 * trial + 2));
    let restarts = || substream(seed, Domain::Inversion, 4 * trial + 3);
    let clean = reconstruct(&params, &clean_grad, truth.features(), cfg, &mut restarts())?;
    let noisy = reconstruct(&params, &noisy_grad, truth.features(), cfg, &mut restarts())?;
    Ok(PairedTrial { truth, clean, noisy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize, DataConfig};
    use crate::rng::{substream, Domain};

    #[test]
    fn label_inference_is_exact() {
        let mut rng = substream(1, Domain::Inversion, 0);
        let samples = synthesize(1000, &DataConfig::default(), &mut rng);
        for (i, s) in samples.iter().enumerate() {
            let p = net::init_params(&mut substream(1, Domain::Init, i as u64), 1.0);
            let g = net::sample_grad(&p, s);
            assert_eq!(infer_label(&g).unwrap(), s.label);
        }
        let mut g = vec![0.0; PARAM_DIM];
        assert!(matches!(infer_label(&g), Err(Error::AmbiguousLabel)));
        g[OUTPUT_BIAS] = -1e-300;
        assert_eq!(infer_label(&g).unwrap(), 1);
    }

    #[test]
    fn start_at_truth_stays_put() {
        let p = net::init_params(&mut substream(2, Domain::Init, 0), 0.5);
        let s = Sample::new(3.2, -1.7, 1);
        let g = net::sample_grad(&p, &s);
        let truth = s.features();
        assert_eq!(objective(&p, truth, 1, &g), 0.0);
        let cfg = InversionConfig { iterations: 50, ..Default::default() };
        let r = reconstruct_from(&p, &g, truth, truth, &cfg).unwrap();
        assert_eq!(r.distance_trace.len(), 50);
        assert!(r.distance_trace.iter().all(|d| *d < 1e-9));
        assert!(!r.diverged);
    }

    #[test]
    fn noiseless_attack_recovers_input() {
        let p = net::init_params(&mut substream(3, Domain::Init, 0), 0.5);
        let s = Sample::new(-4.1, 2.6, 1);
        let g = net::sample_grad(&p, &s);
        let cfg = InversionConfig { iterations: 500, ..Default::default() };
        let r = reconstruct(&p, &g, s.features(), &cfg, &mut substream(3, Domain::Inversion, 0)).unwrap();
        assert_eq!(r.inferred_label, 1);
        assert!(r.final_distance(s.features()) < 1e-2, "distance {}", r.final_distance(s.features()));
        assert!(r.objective_trace.iter().all(|j| *j >= 0.0));
        // returned point attains the smallest objective seen
        assert!(r.objective_trace.iter().all(|j| *j >= r.best_objective));
    }

    #[test]
    fn trace_csv_has_one_row_per_iteration() {
        let p = net::init_params(&mut substream(4, Domain::Init, 0), 0.5);
        let s = Sample::new(1.0, 1.0, 0);
        let g = net::sample_grad(&p, &s);
        let cfg = InversionConfig { iterations: 30, restarts: 2, ..Default::default() };
        let r = reconstruct(&p, &g, s.features(), &cfg, &mut substream(4, Domain::Inversion, 0)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 31);
        assert!(reconstruct(&p, &g, s.features(), &InversionConfig { iterations: 0, ..cfg }, &mut substream(4, Domain::Inversion, 0)).is_err());
    }
}
