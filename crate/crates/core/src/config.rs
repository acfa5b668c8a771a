//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys are rejected.
//! Every key has a default mirroring the 14-agent XOR experiment except
//! `radius`, which has none (give `radius` or `eps_geo_target` for privacy
//! reports). Lists are comma separated.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{DataConfig, REFERENCE_TEST_SIZES, REFERENCE_TRAIN_SIZES};
use crate::error::{Error, Result};
use crate::inversion::InversionConfig;
use crate::privacy::{EstimationConfig, PrivacyParams};
use crate::protocol::{Aggregator, AttackKind, AttackSpec, Beta, Model, ProtocolConfig};
use crate::rvc::{RvcMode, DEFAULT_SUBSET_CAP};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Complete,
    /// Bidirectional circulant graph with the given hop count.
    Ring(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data_seed: Option<u64>,
    pub n: usize,
    pub byzantine: BTreeSet<usize>,
    pub topology: TopologySpec,
    pub train_sizes: Vec<usize>,
    pub test_sizes: Vec<usize>,
    pub data: DataConfig,
    pub model: Model,
    pub iterations: usize,
    pub gamma: f64,
    pub beta: Beta,
    pub batch: usize,
    pub sigma: f64,
    pub init_scale: f64,
    pub common_init: bool,
    pub aggregator: Aggregator,
    pub f: Option<usize>,
    pub subset_cap: usize,
    pub attack: AttackSpec,
    pub audit_log: bool,
    pub snapshot_every: usize,
    pub delta: f64,
    pub radius: Option<f64>,
    pub eps_geo_target: Option<f64>,
    pub g_bound: f64,
    pub l_prime: f64,
    pub zeta: Option<f64>,
    pub privacy_iterations: Option<u64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_steps: usize,
    pub estimate_iterations: usize,
    pub estimate_batch: Option<usize>,
    pub inversion_trials: usize,
    pub inversion_iterations: usize,
    pub inversion_restarts: usize,
    pub inversion_step: f64,
    pub inversion_sigma: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data_seed: None,
            n: 14,
            byzantine: BTreeSet::from([13]),
            topology: TopologySpec::Complete,
            train_sizes: REFERENCE_TRAIN_SIZES.to_vec(),
            test_sizes: REFERENCE_TEST_SIZES.to_vec(),
            data: DataConfig::default(),
            model: Model::Mlp,
            iterations: 8000,
            gamma: 0.01,
            beta: Beta::Constant(0.8),
            batch: 16,
            sigma: 2.0,
            init_scale: crate::net::DEFAULT_INIT_SCALE,
            common_init: false,
            aggregator: Aggregator::Rvc(RvcMode::CoordinateWise),
            f: None,
            subset_cap: DEFAULT_SUBSET_CAP,
            attack: AttackSpec::default(),
            audit_log: false,
            snapshot_every: 0,
            delta: 1e-5,
            radius: None,
            eps_geo_target: None,
            g_bound: 9.2,
            l_prime: 0.84,
            zeta: None,
            privacy_iterations: None,
            sigma_min: 1.0,
            sigma_max: 5.0,
            sigma_steps: 41,
            estimate_iterations: 3000,
            estimate_batch: None,
            inversion_trials: 10,
            inversion_iterations: 2000,
            inversion_restarts: 10,
            inversion_step: 0.1,
            inversion_sigma: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|t| !t.is_empty()).map(|t| parse_num(key, t)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true/false, got `{v}`"))),
    }
}

fn optional<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.is_empty() || v == "none" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = k.trim().to_string();
            if kv.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let mut cfg = Self::default();
        let mut clip = None;
        let mut aggregator_name = None;
        for (key, v) in &kv {
            let key = key.as_str();
            let v = v.as_str();
            match key {
                "seed" => cfg.seed = parse_num(key, v)?,
                "data_seed" => cfg.data_seed = optional(key, v)?,
                "n" => cfg.n = parse_num(key, v)?,
                "byzantine" => cfg.byzantine = parse_list(key, v)?.into_iter().collect(),
                "topology" => {
                    cfg.topology = if v == "complete" {
                        TopologySpec::Complete
                    } else if let Some(h) = v.strip_prefix("ring:") {
                        TopologySpec::Ring(parse_num(key, h)?)
                    } else if let Some(p) = v.strip_prefix("file:") {
                        TopologySpec::File(base_dir.join(p.trim()))
                    } else {
                        return Err(Error::Config(format!("`topology`: expected complete, ring:H or file:PATH, got `{v}`")));
                    }
                }
                "train_sizes" => cfg.train_sizes = parse_list(key, v)?,
                "test_sizes" => cfg.test_sizes = parse_list(key, v)?,
                "range_half_width" => cfg.data.range_half_width = parse_num(key, v)?,
                "pad" => cfg.data.pad = parse_num(key, v)?,
                "label_noise" => cfg.data.label_noise_rate = parse_num(key, v)?,
                "model" => {
                    cfg.model = Model::parse(v).ok_or_else(|| Error::Config(format!("unknown model `{v}`")))?
                }
                "iterations" => cfg.iterations = parse_num(key, v)?,
                "gamma" => cfg.gamma = parse_num(key, v)?,
                "beta" => {
                    let list: Vec<f64> = parse_list(key, v)?;
                    cfg.beta = match list.as_slice() {
                        [b] => Beta::Constant(*b),
                        _ => Beta::PerAgent(list),
                    };
                }
                "batch" => cfg.batch = parse_num(key, v)?,
                "sigma" => cfg.sigma = parse_num(key, v)?,
                "init_scale" => cfg.init_scale = parse_num(key, v)?,
                "common_init" => cfg.common_init = parse_bool(key, v)?,
                "aggregator" => aggregator_name = Some(v.to_string()),
                "clip" => clip = optional(key, v)?,
                "f" => cfg.f = optional(key, v)?,
                "subset_cap" => cfg.subset_cap = parse_num(key, v)?,
                "attack" => {
                    cfg.attack.kind =
                        AttackKind::parse(v).ok_or_else(|| Error::Config(format!("unknown attack `{v}`")))?
                }
                "attack_magnitude" => cfg.attack.magnitude = parse_num(key, v)?,
                "attack_per_receiver" => cfg.attack.per_receiver = parse_bool(key, v)?,
                "audit_log" => cfg.audit_log = parse_bool(key, v)?,
                "snapshot_every" => cfg.snapshot_every = parse_num(key, v)?,
                "delta" => cfg.delta = parse_num(key, v)?,
                "radius" => cfg.radius = optional(key, v)?,
                "eps_geo_target" => cfg.eps_geo_target = optional(key, v)?,
                "g_bound" => cfg.g_bound = parse_num(key, v)?,
                "l_prime" => cfg.l_prime = parse_num(key, v)?,
                "zeta" => cfg.zeta = optional(key, v)?,
                "privacy_iterations" => cfg.privacy_iterations = optional(key, v)?,
                "sigma_min" => cfg.sigma_min = parse_num(key, v)?,
                "sigma_max" => cfg.sigma_max = parse_num(key, v)?,
                "sigma_steps" => cfg.sigma_steps = parse_num(key, v)?,
                "estimate_iterations" => cfg.estimate_iterations = parse_num(key, v)?,
                "estimate_batch" => cfg.estimate_batch = optional(key, v)?,
                "inversion_trials" => cfg.inversion_trials = parse_num(key, v)?,
                "inversion_iterations" => cfg.inversion_iterations = parse_num(key, v)?,
                "inversion_restarts" => cfg.inversion_restarts = parse_num(key, v)?,
                "inversion_step" => cfg.inversion_step = parse_num(key, v)?,
                "inversion_sigma" => cfg.inversion_sigma = optional(key, v)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        if let Some(name) = aggregator_name {
            cfg.aggregator =
                Aggregator::parse(&name, clip).ok_or_else(|| Error::Config(format!("unknown aggregator `{name}`")))?;
        } else if clip.is_some() {
            return Err(Error::Config("`clip` only applies to aggregator = trimmed-mean".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if let Some(&b) = self.byzantine.iter().find(|&&b| b >= self.n) {
            return bad(format!("byzantine agent {b} out of range for n = {}", self.n));
        }
        let n_bar = self.n - self.byzantine.len();
        if self.train_sizes.len() != n_bar || self.test_sizes.len() != n_bar {
            return bad(format!(
                "need {n_bar} train and test sizes (one per normal agent), got {} and {}",
                self.train_sizes.len(),
                self.test_sizes.len()
            ));
        }
        self.data.validate()?;
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if self.batch == 0 {
            return bad("batch must be >= 1".into());
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be >= 0, got {}", self.init_scale));
        }
        match &self.beta {
            Beta::Constant(b) if !(0.0..=1.0).contains(b) => return bad(format!("beta must lie in [0, 1], got {b}")),
            Beta::PerAgent(v) if v.len() != self.n => return bad(format!("{} beta values for n = {}", v.len(), self.n)),
            Beta::PerAgent(v) if v.iter().any(|b| !(0.0..=1.0).contains(b)) => {
                return bad("every beta must lie in [0, 1]".into())
            }
            _ => {}
        }
        if !(self.attack.magnitude >= 0.0 && self.attack.magnitude.is_finite()) {
            return bad(format!("attack_magnitude must be >= 0, got {}", self.attack.magnitude));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.radius.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
            return bad("radius must be >= 0".into());
        }
        if !(self.g_bound > 0.0 && self.l_prime > 0.0) {
            return bad("g_bound and l_prime must be positive".into());
        }
        if !(self.sigma_min > 0.0 && self.sigma_max > self.sigma_min) || self.sigma_steps == 0 {
            return bad(format!(
                "need 0 < sigma_min < sigma_max and sigma_steps >= 1, got [{}, {}] x {}",
                self.sigma_min, self.sigma_max, self.sigma_steps
            ));
        }
        if self.estimate_iterations == 0 || self.inversion_iterations == 0 || self.inversion_restarts == 0 {
            return bad("estimation and inversion iteration counts must be >= 1".into());
        }
        if self.subset_cap == 0 {
            return bad("subset_cap must be >= 1".into());
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<Topology> {
        let topo = match &self.topology {
            TopologySpec::Complete => Topology::complete(self.n, self.byzantine.clone())?,
            TopologySpec::Ring(h) => Topology::ring(self.n, *h, self.byzantine.clone())?,
            TopologySpec::File(path) => {
                let t = Topology::from_file(path, Some(self.n))?;
                if !t.byzantine().is_empty() && t.byzantine() != &self.byzantine {
                    return Err(Error::Config(format!(
                        "topology file Byzantine set {:?} disagrees with configuration {:?}",
                        t.byzantine(),
                        self.byzantine
                    )));
                }
                Topology::new(self.n, self.byzantine.clone(), t.edges().to_vec())?
            }
        };
        Ok(topo)
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            seed: self.seed,
            model: self.model,
            iterations: self.iterations,
            gamma: self.gamma,
            beta: self.beta.clone(),
            batch: self.batch,
            sigma: self.sigma,
            init_scale: self.init_scale,
            common_init: self.common_init,
            aggregator: self.aggregator,
            f: self.f,
            attack: self.attack,
            subset_cap: self.subset_cap,
            mixing: true,
            snapshot_every: self.snapshot_every,
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    /// Subsampling rate of the first normal agent unless overridden.
    pub fn zeta(&self) -> f64 {
        self.zeta.unwrap_or(self.batch as f64 / self.train_sizes[0].max(1) as f64)
    }

    /// Privacy parameters at the configured σ. The radius comes from `radius`
    /// or is back-solved from `eps_geo_target`.
    pub fn privacy(&self) -> Result<PrivacyParams> {
        let mut p = PrivacyParams {
            iterations: self.privacy_iterations.unwrap_or(self.iterations as u64),
            zeta: self.zeta().min(1.0),
            sigma: self.sigma,
            l_prime: self.l_prime,
            g_bound: self.g_bound,
            delta: self.delta,
            radius: 0.0,
        };
        p.radius = match (self.radius, self.eps_geo_target) {
            (Some(r), _) => r,
            (None, Some(target)) => {
                let rho = crate::privacy::cgp_budget(p.iterations, p.zeta, p.l_prime, p.sigma)?;
                crate::privacy::radius_for_eps_geo(rho, p.delta, target)?
            }
            (None, None) => {
                return Err(Error::Config("privacy reports need `radius` or `eps_geo_target`".into()));
            }
        };
        p.validate()?;
        Ok(p)
    }

    pub fn estimation(&self) -> EstimationConfig {
        EstimationConfig {
            iterations: self.estimate_iterations,
            batch: self.estimate_batch.unwrap_or(self.batch),
            gamma: self.gamma,
            init_scale: self.init_scale,
        }
    }

    pub fn inversion(&self) -> InversionConfig {
        InversionConfig {
            iterations: self.inversion_iterations,
            initial_step: self.inversion_step,
            restarts: self.inversion_restarts,
            init_half_width: self.data.range_half_width + self.data.pad,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_text() {
        let cfg = RunConfig::parse("# nothing\n\n", Path::new(".")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!((cfg.zeta() - 16.0 / 1122.0).abs() < 1e-15);
        assert!(cfg.privacy().is_err());
        let t = cfg.topology().unwrap();
        assert_eq!(t.normal_agents().len(), 13);
    }

    #[test]
    fn keys_are_applied() {
        let text = "seed = 7\nn = 4\nbyzantine = 3\ntrain_sizes = 1122,2000,3000\ntest_sizes=1,2,3\n\
                    aggregator = trimmed-mean\nclip = 2.5\nattack = sign-flip\nattack_magnitude = 1\n\
                    beta = 0.1,0.2,0.3,0.4\ntopology = ring:1\neps_geo_target = 36.2\nmodel = centroid\n";
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.aggregator, Aggregator::TrimmedMean { clip: Some(2.5) });
        assert_eq!(cfg.attack.kind, AttackKind::SignFlip);
        assert_eq!(cfg.beta, Beta::PerAgent(vec![0.1, 0.2, 0.3, 0.4]));
        assert_eq!(cfg.topology, TopologySpec::Ring(1));
        assert_eq!(cfg.model, Model::Centroid);
        assert!(cfg.privacy().unwrap().radius > 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let p = |t: &str| RunConfig::parse(t, Path::new("."));
        assert!(p("bogus = 1").is_err());
        assert!(p("seed = x").is_err());
        assert!(p("seed = 1\nseed = 2").is_err());
        assert!(p("no equals sign").is_err());
        assert!(p("n = 5").is_err());
        assert!(p("gamma = -1").is_err());
        assert!(p("sigma_min = 3\nsigma_max = 2").is_err());
        assert!(p("clip = 1").is_err());
        assert!(p("aggregator = magic").is_err());
        assert!(p("topology = star").is_err());
    }

    #[test]
    fn missing_topology_file_is_a_config_error() {
        let cfg = RunConfig::parse("topology = file:/nonexistent/topo.txt", Path::new(".")).unwrap();
        assert!(matches!(cfg.topology(), Err(Error::Config(_))));
    }
}
