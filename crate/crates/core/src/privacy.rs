//! Closed-form privacy accounting for noisy subsampled SGD and empirical
//! estimation of the sensitivity constants it needs.
//!
//! All logarithms are natural. Derivatives are taken with respect to `-σ²`,
//! so a positive value means the budget shrinks as noise grows.

use rand::seq::index::sample as sample_indices;

use crate::data::{DatasetShard, Sample};
use crate::error::{Error, Result};
use crate::net;
use crate::params::ParamVector;
use crate::rng::SimRng;

/// Lower bound on `σ²/Δ²` under which the subsampled-Gaussian RDP bound holds.
pub const MIN_NOISE_RATIO: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub iterations: u64,
    pub zeta: f64,
    pub sigma: f64,
    pub l_prime: f64,
    pub g_bound: f64,
    pub delta: f64,
    pub radius: f64,
}

impl PrivacyParams {
    /// The 13-agent experiment as seen by the first agent (`ζ = 16/1122`).
    pub fn reference_defaults(radius: f64) -> Self {
        Self {
            iterations: 8000,
            zeta: 16.0 / 1122.0,
            sigma: 2.0,
            l_prime: 0.84,
            g_bound: 9.2,
            delta: 1e-5,
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("sigma", self.sigma)?;
        check_positive("L'", self.l_prime)?;
        check_positive("G", self.g_bound)?;
        check_delta(self.delta)?;
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::Domain(format!("subsampling rate must lie in (0, 1], got {}", self.zeta)));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::Domain(format!("radius must be >= 0, got {}", self.radius)));
        }
        if self.iterations == 0 {
            return Err(Error::Domain("iteration count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidityFlag {
    /// `σ²/L′² < 1.5`
    NoiseRatioBelowThreshold,
    /// No Rényi order `α > 1` satisfies `α ≤ log(L′²/(ζ(L′²+σ²)))`.
    NoAdmissibleOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyReport {
    pub params: PrivacyParams,
    pub rho: f64,
    pub eps_geo: f64,
    pub eps_dp: f64,
    pub d_rho: f64,
    pub d_eps_geo: f64,
    pub d_eps_dp: f64,
    pub validity_flags: Vec<ValidityFlag>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Largest Rényi order admitted by the subsampling amplification bound.
pub fn max_admissible_order(zeta: f64, sensitivity: f64, sigma: f64) -> f64 {
    let s2 = sensitivity * sensitivity;
    (s2 / (zeta * (s2 + sigma * sigma))).ln()
}

pub fn validity_flags(alpha: Option<f64>, zeta: f64, sensitivity: f64, sigma: f64) -> Vec<ValidityFlag> {
    let mut flags = Vec::new();
    if sigma * sigma / (sensitivity * sensitivity) < MIN_NOISE_RATIO {
        flags.push(ValidityFlag::NoiseRatioBelowThreshold);
    }
    let bound = max_admissible_order(zeta, sensitivity, sigma);
    let admissible = match alpha {
        Some(a) => a <= bound,
        None => bound > 1.0,
    };
    if !admissible {
        flags.push(ValidityFlag::NoAdmissibleOrder);
    }
    flags
}

/// RDP of order `alpha` for the Gaussian mechanism under uniform subsampling
/// without replacement: `α · 5ζ²Δ²/σ²`. The value is returned even outside the
/// validity region; use [`validity_flags`] to check it.
pub fn rdp_subsampled_gaussian(alpha: f64, zeta: f64, sensitivity: f64, sigma: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::Domain(format!("Rényi order must exceed 1, got {alpha}")));
    }
    if !(zeta >= 0.0) {
        return Err(Error::Domain(format!("subsampling rate must be >= 0, got {zeta}")));
    }
    check_positive("sensitivity", sensitivity)?;
    check_positive("sigma", sigma)?;
    Ok(alpha * 5.0 * zeta * zeta * sensitivity * sensitivity / (sigma * sigma))
}

/// ρ of the concentrated geo-privacy guarantee after `iterations` noisy steps.
pub fn cgp_budget(iterations: u64, zeta: f64, l_prime: f64, sigma: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if iterations == 0 {
        return Err(Error::Domain("iteration count must be >= 1".into()));
    }
    Ok(5.0 * iterations as f64 * zeta * zeta * l_prime * l_prime / (sigma * sigma))
}

/// `ε_geo = ρ r + 2 sqrt(ρ log(1/δ))`
pub fn gp_from_cgp(rho: f64, delta: f64, radius: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("rho must be >= 0, got {rho}")));
    }
    Ok(rho * radius + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

/// Radius at which a given `ε_geo` is reached for budget `ρ`.
pub fn radius_for_eps_geo(rho: f64, delta: f64, eps_geo: f64) -> Result<f64> {
    check_delta(delta)?;
    check_positive("rho", rho)?;
    Ok((eps_geo - 2.0 * (rho * (1.0 / delta).ln()).sqrt()) / rho)
}

/// (ε, δ)-DP of the same dynamics when per-sample gradients are bounded by `G`.
pub fn dp_epsilon(iterations: u64, zeta: f64, g_bound: f64, sigma: f64, delta: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    check_delta(delta)?;
    let k = iterations as f64;
    let log_term = (1.0 / delta).ln();
    Ok(20.0 * g_bound * g_bound * zeta * zeta * k / (sigma * sigma)
        + 2.0 * g_bound * zeta / sigma * (20.0 * k * log_term).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffDerivatives {
    pub d_rho: f64,
    pub d_eps_geo: f64,
    pub d_eps_dp: f64,
}

pub fn tradeoff_derivatives(p: &PrivacyParams) -> Result<TradeoffDerivatives> {
    p.validate()?;
    let k = p.iterations as f64;
    let s2 = p.sigma * p.sigma;
    let s3 = s2 * p.sigma;
    let s4 = s2 * s2;
    let root = (20.0 * k * (1.0 / p.delta).ln()).sqrt();
    let zl = p.zeta * p.l_prime;
    let zg = p.zeta * p.g_bound;
    Ok(TradeoffDerivatives {
        d_rho: 5.0 * k * zl * zl / s4,
        d_eps_geo: 5.0 * k * zl * zl * p.radius / s4 + zl / (2.0 * s3) * root,
        d_eps_dp: 20.0 * zg * zg * k / s4 + zg / s3 * root,
    })
}

pub fn privacy_report(p: &PrivacyParams) -> Result<PrivacyReport> {
    p.validate()?;
    let rho = cgp_budget(p.iterations, p.zeta, p.l_prime, p.sigma)?;
    let eps_geo = gp_from_cgp(rho, p.delta, p.radius)?;
    let eps_dp = dp_epsilon(p.iterations, p.zeta, p.g_bound, p.sigma, p.delta)?;
    let d = tradeoff_derivatives(p)?;
    Ok(PrivacyReport {
        params: *p,
        rho,
        eps_geo,
        eps_dp,
        d_rho: d.d_rho,
        d_eps_geo: d.d_eps_geo,
        d_eps_dp: d.d_eps_dp,
        validity_flags: validity_flags(None, p.zeta, p.l_prime, p.sigma),
    })
}

/// `steps` evenly spaced noise levels from `sigma_min` to `sigma_max` inclusive
/// (a single step yields `sigma_min`).
pub fn sigma_grid(sigma_min: f64, sigma_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(sigma_min > 0.0 && sigma_max > sigma_min && sigma_max.is_finite()) || steps == 0 {
        return Err(Error::Domain(format!(
            "need 0 < sigma_min < sigma_max and steps >= 1, got [{sigma_min}, {sigma_max}] x {steps}"
        )));
    }
    if steps == 1 {
        return Ok(vec![sigma_min]);
    }
    let h = (sigma_max - sigma_min) / (steps - 1) as f64;
    Ok((0..steps).map(|i| sigma_min + h * i as f64).collect())
}

pub fn sweep(base: &PrivacyParams, sigmas: &[f64]) -> Result<Vec<PrivacyReport>> {
    sigmas
        .iter()
        .map(|&sigma| privacy_report(&PrivacyParams { sigma, ..*base }))
        .collect()
}

/// Settings of the local-only training run used to estimate `G` and `L′`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationConfig {
    pub iterations: usize,
    pub batch: usize,
    pub gamma: f64,
    pub init_scale: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            batch: 16,
            gamma: 0.01,
            init_scale: net::DEFAULT_INIT_SCALE,
        }
    }
}

/// Per-iteration running maxima of the per-sample gradient norm and of the
/// input-jacobian spectral norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationTrace {
    pub max_grad_norm: Vec<f64>,
    pub max_input_lipschitz: Vec<f64>,
}

impl EstimationTrace {
    pub fn g_estimate(&self) -> f64 {
        self.max_grad_norm.last().copied().unwrap_or(0.0)
    }

    pub fn l_prime_estimate(&self) -> f64 {
        self.max_input_lipschitz.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Track {
    Grad,
    Jacobian,
    Both,
}

fn local_estimation(
    train: &[Sample],
    cfg: &EstimationConfig,
    rng: &mut SimRng,
    track: Track,
) -> Result<EstimationTrace> {
    if cfg.iterations == 0 {
        return Err(Error::Estimation("at least one iteration is required".into()));
    }
    if train.is_empty() {
        return Err(Error::Estimation("empty training shard".into()));
    }
    if cfg.batch == 0 || cfg.batch > train.len() {
        return Err(Error::Estimation(format!(
            "batch size {} outside [1, {}]",
            cfg.batch,
            train.len()
        )));
    }
    let mut params = net::init_params(rng, cfg.init_scale);
    let mut trace = EstimationTrace {
        max_grad_norm: Vec::with_capacity(cfg.iterations),
        max_input_lipschitz: Vec::with_capacity(cfg.iterations),
    };
    let (mut g_max, mut l_max) = (0.0f64, 0.0f64);
    let mut grad = ParamVector::zeros(net::PARAM_DIM);
    let mut batch = Vec::with_capacity(cfg.batch);
    for _ in 0..cfg.iterations {
        for s in train {
            match track {
                Track::Grad => {
                    grad.iter_mut().for_each(|v| *v = 0.0);
                    net::accumulate_sample_grad(&params, s.features(), s.target(), 1.0, &mut grad);
                    g_max = g_max.max(grad.norm());
                }
                Track::Jacobian => {
                    let jac = net::input_jacobian_of_grad_analytic(&params, s);
                    l_max = l_max.max(net::spectral_norm_n_by_2(&jac));
                }
                Track::Both => {
                    let (g, jac) = net::grad_and_input_jacobian(&params, s);
                    g_max = g_max.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
                    l_max = l_max.max(net::spectral_norm_n_by_2(&jac));
                }
            }
        }
        trace.max_grad_norm.push(g_max);
        trace.max_input_lipschitz.push(l_max);

        batch.clear();
        batch.extend(sample_indices(rng, train.len(), cfg.batch).iter().map(|i| train[i]));
        let g = net::grad_params(&params, &batch);
        params.axpy(-cfg.gamma, &g);
    }
    Ok(trace)
}

/// Both running maxima along one local training trajectory.
pub fn estimate_constants_trace(shard: &DatasetShard, cfg: &EstimationConfig, rng: &mut SimRng) -> Result<EstimationTrace> {
    local_estimation(&shard.train, cfg, rng, Track::Both)
}

/// Running maximum of per-sample gradient norms over local-only SGD.
pub fn estimate_g(shard: &DatasetShard, cfg: &EstimationConfig, rng: &mut SimRng) -> Result<f64> {
    local_estimation(&shard.train, cfg, rng, Track::Grad).map(|t| t.g_estimate())
}

/// Running maximum of `‖∂(∇f)/∂ξ‖₂` over local-only SGD.
pub fn estimate_l_prime(shard: &DatasetShard, cfg: &EstimationConfig, rng: &mut SimRng) -> Result<f64> {
    local_estimation(&shard.train, cfg, rng, Track::Jacobian).map(|t| t.l_prime_estimate())
}

/// Largest `(G, L′)` over every shard, each agent estimating on its own stream.
pub fn estimate_over_agents(shards: &[DatasetShard], cfg: &EstimationConfig, seed: u64) -> Result<(f64, f64)> {
    if shards.is_empty() {
        return Err(Error::Estimation("no shards".into()));
    }
    let mut best = (0.0f64, 0.0f64);
    for shard in shards {
        let mut rng = crate::rng::substream(seed, crate::rng::Domain::Estimate, shard.agent_id as u64);
        let t = estimate_constants_trace(shard, cfg, &mut rng)?;
        best = (best.0.max(t.g_estimate()), best.1.max(t.l_prime_estimate()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{partition, DataConfig};
    use crate::rng::{substream, Domain};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn rdp_examples() {
        let v = rdp_subsampled_gaussian(2.0, 0.01, 1.0, 2.0).unwrap();
        assert!(rel(v, 2.5e-4) < 1e-12);
        assert_eq!(rdp_subsampled_gaussian(2.0, 0.0, 1.0, 2.0).unwrap(), 0.0);
        let a = rdp_subsampled_gaussian(3.0, 0.1, 0.7, 1.3).unwrap();
        let b = rdp_subsampled_gaussian(3.0, 0.1, 0.7, 2.6).unwrap();
        assert!(rel(a / b, 4.0) < 1e-12);
        assert!(rdp_subsampled_gaussian(1.0, 0.1, 1.0, 1.0).is_err());
        assert!(rdp_subsampled_gaussian(2.0, 0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn cgp_examples() {
        let p = PrivacyParams::reference_defaults(0.0);
        let rho = cgp_budget(p.iterations, p.zeta, p.l_prime, p.sigma).unwrap();
        // 5 · 8000 · (16/1122)² · 0.84² / 4, evaluated by hand
        assert!((rho - 1.434871).abs() < 1e-6, "rho = {rho}");
        let unit = cgp_budget(1, 1.0, 1.0, 5f64.sqrt()).unwrap();
        assert!(rel(unit, 1.0) < 1e-12);
        assert!(cgp_budget(1, 1.0, 1.0, 0.0).is_err());
        assert!(cgp_budget(0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gp_and_dp_examples() {
        let geo = gp_from_cgp(1.435, 1e-5, 0.0).unwrap();
        assert!((geo - 2.0 * (1.435 * 1e5f64.ln()).sqrt()).abs() < 1e-12);
        assert!((geo - 8.13).abs() < 0.01);
        assert_eq!(gp_from_cgp(0.0, 1e-5, 3.0).unwrap(), 0.0);
        assert!(gp_from_cgp(1.0, 1.0, 0.0).is_err());
        assert!(gp_from_cgp(1.0, 0.0, 0.0).is_err());

        let p = PrivacyParams::reference_defaults(0.0);
        let eps = dp_epsilon(p.iterations, p.zeta, p.g_bound, p.sigma, p.delta).unwrap();
        assert!((eps - 865.0).abs() <= 5.0, "eps = {eps}");
        assert_eq!(dp_epsilon(10, 0.1, 0.0, 1.0, 1e-5).unwrap(), 0.0);

        let rho = cgp_budget(p.iterations, p.zeta, p.l_prime, p.sigma).unwrap();
        let r = radius_for_eps_geo(rho, p.delta, 36.2).unwrap();
        assert!((r - 19.6).abs() < 0.1, "r = {r}");
        assert!(rel(gp_from_cgp(rho, p.delta, r).unwrap(), 36.2) < 1e-12);
    }

    #[test]
    fn dp_term_scaling() {
        // quadratic part ~ σ⁻², square-root part ~ σ⁻¹: separate them from two σ values
        let f = |s: f64| dp_epsilon(100, 0.05, 2.0, s, 1e-5).unwrap();
        let (a, b) = (f(1.0), f(2.0));
        // a = q + t, b = q/4 + t/2
        let q = 2.0 * (a - 2.0 * b);
        let t = a - q;
        let q_exact = 20.0 * 4.0 * 0.0025 * 100.0;
        let t_exact = 2.0 * 2.0 * 0.05 * (20.0 * 100.0 * 1e5f64.ln()).sqrt();
        assert!(rel(q, q_exact) < 1e-10 && rel(t, t_exact) < 1e-10);
    }

    #[test]
    fn composition_is_linear() {
        for k in [1u64, 7, 8000, 123_456] {
            let one = cgp_budget(1, 0.3, 1.7, 0.9).unwrap();
            let many = cgp_budget(k, 0.3, 1.7, 0.9).unwrap();
            assert!(rel(many, k as f64 * one) < 1e-15);
        }
    }

    #[test]
    fn derivative_values() {
        let p = PrivacyParams::reference_defaults(19.56);
        let d = tradeoff_derivatives(&p).unwrap();
        let rho = cgp_budget(p.iterations, p.zeta, p.l_prime, p.sigma).unwrap();
        assert!(rel(d.d_rho, rho / 4.0) < 1e-12);
        assert!((d.d_rho - 0.359).abs() < 0.002);
        assert!(d.d_eps_dp > d.d_eps_geo && d.d_eps_geo > d.d_rho);
    }

    /// Central difference in `s = σ²` of each budget, negated.
    fn fd_derivatives(p: &PrivacyParams) -> (f64, f64, f64) {
        let s2 = p.sigma * p.sigma;
        let h = s2 * 1e-5;
        let at = |s: f64| {
            let q = PrivacyParams { sigma: s.sqrt(), ..*p };
            let rho = cgp_budget(q.iterations, q.zeta, q.l_prime, q.sigma).unwrap();
            // composite form of ε_geo with ζL′ inside the square root term
            let root = (20.0 * q.iterations as f64 * (1.0 / q.delta).ln()).sqrt();
            let geo = rho * q.radius + q.zeta * q.l_prime / q.sigma * root;
            let dp = dp_epsilon(q.iterations, q.zeta, q.g_bound, q.sigma, q.delta).unwrap();
            (rho, geo, dp)
        };
        let (a, b) = (at(s2 + h), at(s2 - h));
        ((b.0 - a.0) / (2.0 * h), (b.1 - a.1) / (2.0 * h), (b.2 - a.2) / (2.0 * h))
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &sigma in &[1.0, 1.5, 2.0, 3.3, 5.0] {
            for &radius in &[0.0, 19.56] {
                let p = PrivacyParams { sigma, ..PrivacyParams::reference_defaults(radius) };
                let d = tradeoff_derivatives(&p).unwrap();
                let (fr, fg, fe) = fd_derivatives(&p);
                assert!(rel(d.d_rho, fr) < 1e-6, "rho at {sigma}");
                assert!(rel(d.d_eps_geo, fg) < 1e-6, "geo at {sigma}");
                assert!(rel(d.d_eps_dp, fe) < 1e-6, "dp at {sigma}");
            }
        }
    }

    #[test]
    fn validity_flags_reported_without_error() {
        let p = PrivacyParams { sigma: 0.5, l_prime: 1.0, ..PrivacyParams::reference_defaults(0.0) };
        let r = privacy_report(&p).unwrap();
        assert!(r.validity_flags.contains(&ValidityFlag::NoiseRatioBelowThreshold));
        assert!(r.rho.is_finite() && r.rho > 0.0);
        let ok = privacy_report(&PrivacyParams::reference_defaults(0.0)).unwrap();
        assert!(!ok.validity_flags.contains(&ValidityFlag::NoiseRatioBelowThreshold));
        assert!(validity_flags(Some(1e6), 0.5, 1.0, 2.0).contains(&ValidityFlag::NoAdmissibleOrder));
    }

    #[test]
    fn grid_and_sweep() {
        let g = sigma_grid(1.0, 5.0, 5).unwrap();
        assert_eq!(g, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(sigma_grid(1.0, 5.0, 1).unwrap(), vec![1.0]);
        assert!(sigma_grid(0.0, 5.0, 3).is_err());
        let rows = sweep(&PrivacyParams::reference_defaults(1.0), &g).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.windows(2).all(|w| w[0].rho > w[1].rho));
    }

    fn budgets(p: &PrivacyParams) -> (f64, f64, f64) {
        let r = privacy_report(p).unwrap();
        (r.rho, r.eps_geo, r.eps_dp)
    }

    fn arb_params() -> impl Strategy<Value = PrivacyParams> {
        (1u64..20_000, 1e-4f64..0.5, 0.1f64..10.0, 0.01f64..5.0, 0.01f64..20.0, 1e-8f64..0.5, 0.0f64..50.0).prop_map(
            |(iterations, zeta, sigma, l_prime, g_bound, delta, radius)| PrivacyParams {
                iterations,
                zeta,
                sigma,
                l_prime,
                g_bound,
                delta,
                radius,
            },
        )
    }

    fn le3(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
        let ok = |x: f64, y: f64| x <= y * (1.0 + 1e-12);
        ok(a.0, b.0) && ok(a.1, b.1) && ok(a.2, b.2)
    }

    proptest! {
        #[test]
        fn budgets_monotone(p in arb_params(), bump in 1.0f64..3.0) {
            let base = budgets(&p);
            prop_assert!(base.0 >= 0.0 && base.1 >= 0.0 && base.2 >= 0.0);
            let more_sigma = budgets(&PrivacyParams { sigma: p.sigma * bump, ..p });
            let more_k = budgets(&PrivacyParams { iterations: p.iterations * 2, ..p });
            let more_zeta = budgets(&PrivacyParams { zeta: (p.zeta * bump).min(1.0), ..p });
            prop_assert!(le3(more_sigma, base));
            prop_assert!(le3(base, more_k));
            prop_assert!(le3(base, more_zeta));
            let more_l = budgets(&PrivacyParams { l_prime: p.l_prime * bump, ..p });
            prop_assert!(base.0 <= more_l.0 * (1.0 + 1e-12) && base.1 <= more_l.1 * (1.0 + 1e-12));
            let more_g = budgets(&PrivacyParams { g_bound: p.g_bound * bump, ..p });
            prop_assert!(base.2 <= more_g.2 * (1.0 + 1e-12));
        }

        #[test]
        fn composite_geo_identity(p in arb_params()) {
            let rho = cgp_budget(p.iterations, p.zeta, p.l_prime, p.sigma).unwrap();
            let via = gp_from_cgp(rho, p.delta, p.radius).unwrap();
            let k = p.iterations as f64;
            let direct = 5.0 * k * p.zeta * p.zeta * p.l_prime * p.l_prime * p.radius / (p.sigma * p.sigma)
                + p.zeta * p.l_prime / p.sigma * (20.0 * k * (1.0 / p.delta).ln()).sqrt();
            prop_assert!(rel(via, direct) < 1e-9);
        }

        #[test]
        fn derivatives_nonnegative(p in arb_params()) {
            let d = tradeoff_derivatives(&p).unwrap();
            prop_assert!(d.d_rho >= 0.0 && d.d_eps_geo >= 0.0 && d.d_eps_dp >= 0.0);
        }
    }

    fn small_shard() -> DatasetShard {
        partition(&[60], &[10], &DataConfig::default(), 5).unwrap().remove(0)
    }

    #[test]
    fn estimators_are_running_maxima() {
        let shard = small_shard();
        let cfg = EstimationConfig { iterations: 40, ..Default::default() };
        let t = estimate_constants_trace(&shard, &cfg, &mut substream(1, Domain::Estimate, 0)).unwrap();
        assert_eq!(t.max_grad_norm.len(), 40);
        assert!(t.max_grad_norm.windows(2).all(|w| w[1] >= w[0]));
        assert!(t.max_input_lipschitz.windows(2).all(|w| w[1] >= w[0]));

        let half = EstimationConfig { iterations: 20, ..cfg };
        let g20 = estimate_g(&shard, &half, &mut substream(1, Domain::Estimate, 0)).unwrap();
        let g40 = estimate_g(&shard, &cfg, &mut substream(1, Domain::Estimate, 0)).unwrap();
        let l20 = estimate_l_prime(&shard, &half, &mut substream(1, Domain::Estimate, 0)).unwrap();
        let l40 = estimate_l_prime(&shard, &cfg, &mut substream(1, Domain::Estimate, 0)).unwrap();
        assert!(g40 >= g20 && l40 >= l20);
        assert_eq!(g40, t.g_estimate());
        assert_eq!(l40, t.l_prime_estimate());
    }

    #[test]
    fn single_evaluation_at_init() {
        let shard = small_shard();
        let cfg = EstimationConfig { iterations: 1, init_scale: 0.0, ..Default::default() };
        let g = estimate_g(&shard, &cfg, &mut substream(2, Domain::Estimate, 0)).unwrap();
        let l = estimate_l_prime(&shard, &cfg, &mut substream(2, Domain::Estimate, 0)).unwrap();
        // all-zero parameters: output 1/2, gradient only on the output bias, norm 1/2
        assert!((g - 0.5).abs() < 1e-12);
        assert!(l.is_finite() && l >= 0.0);
        let cfg = EstimationConfig { iterations: 1, ..Default::default() };
        let g = estimate_g(&shard, &cfg, &mut substream(2, Domain::Estimate, 0)).unwrap();
        assert!(g.is_finite() && g > 0.0);
    }

    #[test]
    fn estimation_errors() {
        let shard = small_shard();
        let mut rng = substream(0, Domain::Estimate, 0);
        assert!(estimate_g(&shard, &EstimationConfig { iterations: 0, ..Default::default() }, &mut rng).is_err());
        assert!(estimate_g(&shard, &EstimationConfig { batch: 1000, ..Default::default() }, &mut rng).is_err());
        assert!(estimate_over_agents(&[], &EstimationConfig::default(), 0).is_err());
    }
}
