//! Command-line front end. Every command writes its outputs under `--out-dir`
//! together with a manifest recording the configuration hash.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::data::{partition, DatasetShard};
use crate::diagnostics::consensus_error;
use crate::error::{Error, Result};
use crate::inversion::paired_trial;
use crate::privacy::{estimate_constants_trace, privacy_report, sigma_grid, sweep};
use crate::protocol::{audit_header, run_observed, Aggregator, IterationLog};
use crate::rng::{substream, Domain};
use crate::rvc::{safe_point, tukey_depth, PointSet, RvcMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESILIENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rdml", version, about = "Privacy-preserving Byzantine-resilient decentralized SGD simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with the decentralized protocol and write per-iteration metrics.
    Run(Common),
    /// Tabulate privacy budgets and their derivatives over a range of σ.
    PrivacySweep(SweepArgs),
    /// Estimate the gradient-norm bound G and input-Lipschitz constant L′.
    Estimate(Common),
    /// Gradient-inversion attack with and without noise.
    Attack(Common),
    /// Tukey-depth landscape and safe point for a point file.
    RvcDebug(DebugArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// exact, exact-lp or coordinate-wise; overrides the configured aggregator.
    #[arg(long)]
    pub rvc_mode: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct DebugArgs {
    /// One point per line, coordinates separated by commas.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub f: usize,
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "exact")]
    pub rvc_mode: String,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Resilience(_) => EXIT_RESILIENCE,
        Error::Config(_)
        | Error::Parse(_)
        | Error::Domain(_)
        | Error::SubsetCap { .. }
        | Error::UnsupportedDimension(_)
        | Error::UnsupportedMode(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Run(c) => cmd_run(c),
        Command::PrivacySweep(a) => cmd_privacy_sweep(a),
        Command::Estimate(c) => cmd_estimate(c),
        Command::Attack(c) => cmd_attack(c),
        Command::RvcDebug(a) => cmd_rvc_debug(a),
    }
}

struct Loaded {
    cfg: RunConfig,
    hash: String,
}

fn load(common: &Common) -> Result<Loaded> {
    let bytes = fs::read(&common.config)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", common.config.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config("config is not UTF-8".into()))?;
    let base = common.config.parent().unwrap_or(Path::new("."));
    let mut cfg = RunConfig::parse(&text, base)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        hasher.update(format!("\nseed-override={seed}").as_bytes());
    }
    if let Some(mode) = &common.rvc_mode {
        let m = RvcMode::parse(mode).ok_or_else(|| Error::Config(format!("unknown rvc mode `{mode}`")))?;
        cfg.aggregator = Aggregator::Rvc(m);
        hasher.update(format!("\nrvc-mode-override={}", m.as_str()).as_bytes());
    }
    let hash = hasher.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });
    Ok(Loaded { cfg, hash })
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_manifest(dir: &Path, command: &str, loaded: &Loaded, outputs: &[&str]) -> Result<()> {
    let mut m = create(dir, "manifest.txt")?;
    writeln!(m, "command = {command}")?;
    writeln!(m, "package = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))?;
    writeln!(m, "config_sha256 = {}", loaded.hash)?;
    writeln!(m, "seed = {}", loaded.cfg.seed)?;
    writeln!(m, "aggregator = {}", loaded.cfg.aggregator.label())?;
    writeln!(m, "outputs = {}", outputs.join(","))?;
    m.flush()?;
    Ok(())
}

fn shards_for(cfg: &RunConfig) -> Result<Vec<DatasetShard>> {
    partition(&cfg.train_sizes, &cfg.test_sizes, &cfg.data, cfg.data_seed())
}

pub fn cmd_run(common: &Common) -> Result<()> {
    let loaded = load(common)?;
    let cfg = &loaded.cfg;
    let topo = cfg.topology()?;
    let shards = shards_for(cfg)?;
    prepare_out(&common.out_dir)?;
    let pc = cfg.protocol();

    let mut audit = if cfg.audit_log {
        let mut w = create(&common.out_dir, "audit.csv")?;
        writeln!(w, "{}", audit_header(cfg.model.dim()))?;
        Some(w)
    } else {
        None
    };
    let mut write_audit = |log: &IterationLog| -> Result<()> {
        if let Some(w) = audit.as_mut() {
            log.write_audit(w)?;
        }
        Ok(())
    };
    let observer: Option<&mut dyn FnMut(&IterationLog) -> Result<()>> =
        if cfg.audit_log { Some(&mut write_audit) } else { None };
    let metrics = run_observed(&pc, &topo, &shards, observer)?;
    if let Some(mut w) = audit.take() {
        w.flush()?;
    }

    let mut csv = create(&common.out_dir, "metrics.csv")?;
    metrics.write_csv(&mut csv)?;
    csv.flush()?;

    let tail = (metrics.records.len() / 10).max(1);
    let tail_grad = metrics.records[metrics.records.len() - tail..].iter().map(|r| r.grad_norm_sq).sum::<f64>() / tail as f64;
    let mut s = create(&common.out_dir, "summary.txt")?;
    writeln!(s, "iterations = {}", metrics.records.len())?;
    writeln!(s, "aggregator = {}", cfg.aggregator.label())?;
    writeln!(s, "final_test_accuracy = {:.6}", metrics.final_test_accuracy(cfg.model, &shards))?;
    writeln!(s, "final_consensus_error = {:e}", consensus_error(&metrics.final_states))?;
    writeln!(s, "mean_grad_norm_sq_last_10pct = {tail_grad:e}")?;
    s.flush()?;

    let mut outputs = vec!["metrics.csv", "summary.txt"];
    if cfg.audit_log {
        outputs.push("audit.csv");
    }
    write_manifest(&common.out_dir, "run", &loaded, &outputs)
}

pub fn cmd_privacy_sweep(args: &SweepArgs) -> Result<()> {
    let loaded = load(&args.common)?;
    let cfg = &loaded.cfg;
    let base = cfg.privacy()?;
    let lo = args.sigma_min.unwrap_or(cfg.sigma_min);
    let hi = args.sigma_max.unwrap_or(cfg.sigma_max);
    let steps = args.steps.unwrap_or(cfg.sigma_steps);
    let sigmas = sigma_grid(lo, hi, steps)?;
    let rows = sweep(&base, &sigmas)?;
    let out = &args.common.out_dir;
    prepare_out(out)?;
    let mut w = create(out, "privacy_sweep.csv")?;
    writeln!(w, "sigma,rho,eps_geo,eps_dp,d_rho,d_eps_geo,d_eps_dp")?;
    for r in &rows {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.params.sigma, r.rho, r.eps_geo, r.eps_dp, r.d_rho, r.d_eps_geo, r.d_eps_dp
        )?;
    }
    w.flush()?;
    let head = privacy_report(&base)?;
    let mut s = create(out, "privacy_report.txt")?;
    writeln!(s, "iterations = {}", base.iterations)?;
    writeln!(s, "zeta = {:e}", base.zeta)?;
    writeln!(s, "sigma = {}", base.sigma)?;
    writeln!(s, "l_prime = {}", base.l_prime)?;
    writeln!(s, "g_bound = {}", base.g_bound)?;
    writeln!(s, "delta = {:e}", base.delta)?;
    writeln!(s, "radius = {:.6}", base.radius)?;
    writeln!(s, "rho = {:.6}", head.rho)?;
    writeln!(s, "eps_geo = {:.6}", head.eps_geo)?;
    writeln!(s, "eps_dp = {:.6}", head.eps_dp)?;
    writeln!(s, "validity_flags = {:?}", head.validity_flags)?;
    s.flush()?;
    write_manifest(out, "privacy-sweep", &loaded, &["privacy_sweep.csv", "privacy_report.txt"])
}

pub fn cmd_estimate(common: &Common) -> Result<()> {
    let loaded = load(common)?;
    let cfg = &loaded.cfg;
    let shards = shards_for(cfg)?;
    let est = cfg.estimation();
    let mut grad = vec![0.0f64; est.iterations];
    let mut lip = vec![0.0f64; est.iterations];
    let mut per_agent = Vec::new();
    for shard in &shards {
        let mut rng = substream(cfg.seed, Domain::Estimate, shard.agent_id as u64);
        let t = estimate_constants_trace(shard, &est, &mut rng)?;
        for (k, (g, l)) in t.max_grad_norm.iter().zip(&t.max_input_lipschitz).enumerate() {
            grad[k] = grad[k].max(*g);
            lip[k] = lip[k].max(*l);
        }
        per_agent.push((shard.agent_id, t.g_estimate(), t.l_prime_estimate()));
    }
    prepare_out(&common.out_dir)?;
    let mut w = create(&common.out_dir, "estimate_trace.csv")?;
    writeln!(w, "iter,max_grad_norm,max_input_lipschitz")?;
    for (k, (g, l)) in grad.iter().zip(&lip).enumerate() {
        writeln!(w, "{k},{g:e},{l:e}")?;
    }
    w.flush()?;
    let mut s = create(&common.out_dir, "estimate.txt")?;
    writeln!(s, "g_estimate = {:.6}", grad.last().copied().unwrap_or(0.0))?;
    writeln!(s, "l_prime_estimate = {:.6}", lip.last().copied().unwrap_or(0.0))?;
    for (a, g, l) in per_agent {
        writeln!(s, "agent {a}: g = {g:.6}, l_prime = {l:.6}")?;
    }
    s.flush()?;
    write_manifest(&common.out_dir, "estimate", &loaded, &["estimate_trace.csv", "estimate.txt"])
}

pub fn cmd_attack(common: &Common) -> Result<()> {
    let loaded = load(common)?;
    let cfg = &loaded.cfg;
    let sigma = cfg.inversion_sigma.unwrap_or(cfg.sigma);
    let inv = cfg.inversion();
    prepare_out(&common.out_dir)?;
    let mut summary = create(&common.out_dir, "attack_summary.csv")?;
    writeln!(summary, "trial,sigma,final_distance,label_correct,best_J,diverged")?;
    let clean_name = "attack_trace_sigma_0.csv".to_string();
    let noisy_name = format!("attack_trace_sigma_{sigma}.csv");
    for t in 0..cfg.inversion_trials {
        let p = paired_trial(cfg.seed, t as u64, sigma, cfg.init_scale, &cfg.data, &inv)?;
        let truth = p.truth.features();
        for (s, r) in [(0.0, &p.clean), (sigma, &p.noisy)] {
            writeln!(
                summary,
                "{t},{s},{:e},{},{:e},{}",
                r.final_distance(truth),
                u8::from(r.inferred_label == p.truth.label),
                r.best_objective,
                r.diverged
            )?;
        }
        if t == 0 {
            p.clean.write_csv(create(&common.out_dir, &clean_name)?)?;
            p.noisy.write_csv(create(&common.out_dir, &noisy_name)?)?;
        }
    }
    summary.flush()?;
    let mut outputs = vec!["attack_summary.csv"];
    if cfg.inversion_trials > 0 {
        outputs.push(&clean_name);
        outputs.push(&noisy_name);
    }
    write_manifest(&common.out_dir, "attack", &loaded, &outputs)
}

fn read_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read points {}: {e}", path.display())))?;
    let pts: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad coordinate in `{l}`"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    if pts.is_empty() {
        return Err(Error::Config("point file is empty".into()));
    }
    Ok(pts)
}

pub fn cmd_rvc_debug(args: &DebugArgs) -> Result<()> {
    let pts = read_points(&args.points)?;
    let mode = RvcMode::parse(&args.rvc_mode).ok_or_else(|| Error::Config(format!("unknown rvc mode `{}`", args.rvc_mode)))?;
    let set = PointSet::new(pts.clone(), args.f);
    set.check_shape()?;
    let dim = set.dim();
    if !(1..=2).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let result = safe_point(&set, mode, crate::rvc::DEFAULT_SUBSET_CAP)?;
    prepare_out(&args.out_dir)?;

    let grid = args.grid.max(2);
    let lo: Vec<f64> = (0..dim).map(|c| pts.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..dim).map(|c| pts.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let axis = |c: usize, i: usize| {
        let pad = 0.1 * (hi[c] - lo[c]).max(1e-9);
        lo[c] - pad + (hi[c] - lo[c] + 2.0 * pad) * i as f64 / (grid - 1) as f64
    };
    let mut w = create(&args.out_dir, "depth_grid.csv")?;
    if dim == 1 {
        writeln!(w, "x,depth")?;
        for i in 0..grid {
            let x = axis(0, i);
            writeln!(w, "{x:e},{}", tukey_depth(&[x], &pts)?)?;
        }
    } else {
        writeln!(w, "x,y,depth")?;
        for i in 0..grid {
            for j in 0..grid {
                let q = [axis(0, i), axis(1, j)];
                writeln!(w, "{:e},{:e},{}", q[0], q[1], tukey_depth(&q, &pts)?)?;
            }
        }
    }
    w.flush()?;
    let mut s = create(&args.out_dir, "safe_point.txt")?;
    let coords: Vec<String> = result.point.iter().map(|v| format!("{v:e}")).collect();
    writeln!(s, "mode = {}", result.mode.as_str())?;
    writeln!(s, "point = {}", coords.join(","))?;
    writeln!(s, "depth = {}", tukey_depth(&result.point, &pts)?)?;
    writeln!(s, "certificate = {:?}", result.certificate)?;
    s.flush()?;
    Ok(())
}
