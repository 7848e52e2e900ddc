//! `thermoflow` command line: parses a system file, dispatches one
//! subcommand and emits JSON reports or CSV tables.
//!
//! Exit codes: 0 on success, 2 for configuration errors (the message names the
//! offending key), 1 for computational failures (the library error verbatim).

mod cache;
mod selftest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use thermoflow::config::{ConfigError, SystemFile};
use thermoflow::correlations::{fit_decay_rate, sample_orbit, suspension_correlation, MarkovApprox};
use thermoflow::dolgopyat::{Dolgopyat, DolgopyatConfig, Overrides, SuiteConfig};
use thermoflow::orbits::{counting_report, primitive_orbits, roof_min, zeta_truncated};
use thermoflow::ruelle::{contraction_sweep, default_h_family, eventually_contracting_report};
use thermoflow::thermo::{pressure, Suspension};

pub use cache::{cache_dir, cache_key, CACHE_ENV};

#[derive(Parser, Debug)]
#[command(name = "thermoflow", version, about = "Pressure, transfer operators, orbit counts and correlations for suspension flows over subshifts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// System definition file.
    #[arg(long, global = true)]
    pub system: Option<PathBuf>,
    /// Write the JSON/CSV body here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Neither read nor write the result cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Topological pressure of a potential (and the pressure root against a roof).
    Pressure {
        #[arg(long, default_value = "zero")]
        potential: String,
        #[arg(long)]
        roof: Option<String>,
        #[arg(long, default_value_t = 10)]
        depth: usize,
    },
    /// RPF data of the normalized operator at offset `a`.
    Rpf {
        #[arg(long, default_value = "zero")]
        potential: String,
        #[arg(long)]
        roof: String,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        a: f64,
    },
    /// Gibbs measure and its ratio bounds.
    Gibbs {
        #[arg(long, default_value = "zero")]
        potential: String,
        #[arg(long)]
        roof: String,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 8)]
        max_len: usize,
    },
    /// L² and Lipschitz norms of iterates of L_ab over an (a, b) grid (CSV).
    Sweep {
        #[arg(long, default_value = "zero")]
        potential: String,
        #[arg(long)]
        roof: String,
        /// List `x,y,…` or range `start:stop:step`.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        #[arg(long = "N", default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
    /// Dolgopyat operator construction and its checks at one frequency (JSON).
    Dolgopyat {
        #[arg(long, default_value = "zero")]
        potential: String,
        #[arg(long)]
        roof: String,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        a: f64,
        #[arg(long)]
        depth: Option<usize>,
        /// Use only the computed constants (no desk overrides).
        #[arg(long)]
        certified: bool,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        q0: Option<usize>,
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 50)]
        cone_trials: usize,
        #[arg(long, default_value_t = 20)]
        l2_trials: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
    /// Primitive periodic orbits and their periods (CSV).
    Orbits {
        #[arg(long)]
        roof: String,
        #[arg(long, default_value_t = 12)]
        n_max: usize,
    },
    /// Truncated dynamical zeta function on a grid of s (CSV).
    Zeta {
        #[arg(long)]
        roof: String,
        #[arg(long, allow_hyphen_values = true)]
        re: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        im: String,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
    /// Prime orbit counts against li(e^{h λ}) (CSV).
    Count {
        #[arg(long)]
        roof: String,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, default_value_t = 14)]
        depth: usize,
    },
    /// Correlation function of two observables along a sampled orbit (CSV).
    Corr {
        #[arg(long, default_value = "zero")]
        potential: String,
        #[arg(long)]
        roof: String,
        #[arg(long)]
        obs_a: String,
        #[arg(long)]
        obs_b: String,
        /// Orbit length in returns to the base.
        #[arg(long, default_value_t = 1_000_000)]
        len: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 16.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.5)]
        t_step: f64,
        /// Fit window `lo:hi`.
        #[arg(long, default_value = "2:12")]
        window: String,
        #[arg(long, default_value_t = 10)]
        depth: usize,
    },
    /// Cylinder distortion ratios, diameter bounds and metric checks (JSON).
    Distortion {
        #[arg(long, default_value_t = 8)]
        n_max: usize,
    },
    /// Quick self-checks on closed-form examples.
    Selftest,
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Compute(thermoflow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<thermoflow::Error> for Failure {
    fn from(e: thermoflow::Error) -> Self {
        Failure::Compute(e)
    }
}

fn flag_error(key: &str, message: impl Into<String>) -> Failure {
    Failure::Config(ConfigError { line: None, key: key.into(), message: message.into() })
}

/// Human-readable lines and the machine-readable body.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Output {
    pub summary: String,
    pub body: String,
}

fn json_body<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

/// `x,y,…`, `start:stop:step` or a single value.
pub fn parse_values(key: &str, s: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |m: String| ConfigError { line: None, key: key.into(), message: m };
    let num = |v: &str| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(format!("`{v}` is not a number")));
    if s.contains(':') {
        let p: Vec<&str> = s.split(':').collect();
        if p.len() != 3 {
            return Err(bad(format!("range `{s}` must be start:stop:step")));
        }
        let (a, b, h) = (num(p[0])?, num(p[1])?, num(p[2])?);
        if !(h > 0.0) || b < a {
            return Err(bad(format!("range `{s}` needs start <= stop and a positive step")));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| a + i as f64 * h).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

fn word_text(w: &[u8]) -> String {
    if w.iter().all(|&s| s < 10) {
        w.iter().map(|s| char::from(b'0' + s)).collect()
    } else {
        w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(".")
    }
}

fn suspension(file: &SystemFile, potential: &str, roof: &str, depth: usize) -> Result<Suspension, Failure> {
    let f = file.potential(potential)?;
    let r = file.roof(roof)?;
    let mut s = Suspension::new(&file.system, f.clone(), r.spec.clone(), depth, Some(r.tau_min))?;
    s.a_max = file.a_max;
    Ok(s)
}

fn compute(file: &SystemFile, cmd: &Command) -> Result<Output, Failure> {
    let sys = &file.system;
    let mut summary = String::new();
    let body = match cmd {
        Command::Pressure { potential, roof, depth } => {
            let f = file.potential(potential)?;
            let est = pressure(sys, f, *depth)?;
            writeln!(summary, "pressure {:.15}", est.value).unwrap();
            let mut report = json!({
                "potential": potential,
                "depth": depth,
                "pressure": est.value,
                "error_proxy": est.error_proxy,
            });
            if let Some(roof) = roof {
                let p = suspension(file, potential, roof, *depth)?.pressure_root(1e-12)?;
                writeln!(summary, "pressure_root {p:.15}").unwrap();
                report["roof"] = json!(roof);
                report["pressure_root"] = json!(p);
            }
            json_body(&report)
        }
        Command::Rpf { potential, roof, depth, a } => {
            let susp = suspension(file, potential, roof, *depth)?;
            let p = susp.pressure_root(1e-12)?;
            let st = susp.state(p, *a, 1e-12)?;
            let (h_min, h_max) = st.h.values.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
            writeln!(summary, "lambda {:.15}\nm1_error {:e}", st.lambda, st.m1_error).unwrap();
            json_body(&json!({
                "depth": depth, "a": a, "pressure_root": p, "lambda": st.lambda,
                "m1_error": st.m1_error, "h_min": h_min, "h_max": h_max, "states": st.h.values.len(),
            }))
        }
        Command::Gibbs { potential, roof, depth, max_len } => {
            let susp = suspension(file, potential, roof, *depth)?;
            let p = susp.pressure_root(1e-12)?;
            let g = susp.gibbs(p, *max_len)?;
            writeln!(summary, "c1 {:.12} c2 {:.12} c2/c1 {:.6}", g.c1, g.c2, g.c2 / g.c1).unwrap();
            json_body(&json!({
                "depth": depth, "pressure_root": p, "c1": g.c1, "c2": g.c2,
                "per_length": g.per_length, "convention": g.convention,
            }))
        }
        Command::Sweep { potential, roof, a, b, n, m, depth } => {
            let a_list = parse_values("--a", a)?;
            let b_list = parse_values("--b", b)?;
            let susp = suspension(file, potential, roof, *depth)?;
            if let Some(x) = a_list.iter().find(|x| x.abs() > susp.a_max) {
                return Err(flag_error("--a", format!("|a| = {} exceeds a_max = {}", x.abs(), susp.a_max)));
            }
            let p = susp.pressure_root(1e-12)?;
            let family = default_h_family(&susp.grid)?;
            let sweep = contraction_sweep(&susp, p, &a_list, &b_list, *n, *m, &family)?;
            let worst = sweep.cells.iter().map(|c| c.rho_hat).fold(f64::NEG_INFINITY, f64::max);
            let monotone = sweep.cells.iter().all(|c| c.monotone);
            writeln!(summary, "cells {} worst_rho_hat {worst:.6} all_decreasing {monotone}", sweep.cells.len()).unwrap();
            if let Some(r) = sweep.refinement_error {
                writeln!(summary, "refinement_error {r:e}").unwrap();
            }
            if let Ok(fit) = eventually_contracting_report(&sweep, &[0.0, 0.1, 0.25, 0.5, 1.0], 1.0) {
                writeln!(summary, "fit C {:.4} rho {:.6} eps {} contracting {}", fit.c, fit.rho, fit.epsilon, fit.contracting).unwrap();
            }
            sweep.to_csv()
        }
        Command::Dolgopyat { potential, roof, b, a, depth, certified, n, q0, eps1, mu, cone_trials, l2_trials, seed } => {
            let mut cfg = DolgopyatConfig::desk(*b);
            cfg.a = *a;
            if *certified {
                cfg.overrides = Overrides::default();
            }
            let ov = &mut cfg.overrides;
            ov.n = n.or(ov.n);
            ov.q0 = q0.or(ov.q0);
            ov.eps1 = eps1.or(ov.eps1);
            ov.mu = mu.or(ov.mu);
            if let Some(d) = depth {
                cfg.depth = *d;
            }
            let f = file.potential(potential)?;
            let tau = &file.roof(roof)?.spec;
            let dg = Dolgopyat::new(sys, f, tau, cfg)?;
            let report = dg.run_suite(&SuiteConfig { cone_trials: *cone_trials, l2_trials: *l2_trials, seed: *seed, ..Default::default() })?;
            if let Some(banner) = &report.banner {
                writeln!(summary, "{banner}").unwrap();
            }
            writeln!(
                summary,
                "partition {} beta {} cone {} l2 {} (max ratio {:.4}) domination {} all_ok {}",
                report.partition.ok, report.beta.ok, report.cone.ok, report.l2.ok, report.l2.max_ratio, report.domination.ok, report.all_ok()
            )
            .unwrap();
            json_body(&report)
        }
        Command::Orbits { roof, n_max } => {
            let orbits = primitive_orbits(sys, &file.roof(roof)?.spec, *n_max)?;
            writeln!(summary, "primitive orbits {}", orbits.len()).unwrap();
            let mut out = String::from("word,length,period\n");
            for o in &orbits {
                writeln!(out, "{},{},{}", word_text(&o.word), o.word.len(), o.period).unwrap();
            }
            out
        }
        Command::Zeta { roof, re, im, n_max, depth } => {
            let tau = &file.roof(roof)?.spec;
            let (res, ims) = (parse_values("--re", re)?, parse_values("--im", im)?);
            let mut out = String::from("s_re,s_im,zeta_re,zeta_im,log_re,log_im,tail_bound,divergent,extrapolated_re,extrapolated_im\n");
            for &x in &res {
                for &y in &ims {
                    let z = zeta_truncated(sys, tau, Complex64::new(x, y), *n_max, *depth)?;
                    let (er, ei) = z.extrapolated.map_or((f64::NAN, f64::NAN), |e| e);
                    writeln!(
                        out,
                        "{x},{y},{},{},{},{},{},{},{er},{ei}",
                        z.value.0, z.value.1, z.log_value.0, z.log_value.1, z.tail_bound, z.divergent
                    )
                    .unwrap();
                }
            }
            writeln!(summary, "points {}", res.len() * ims.len()).unwrap();
            out
        }
        Command::Count { roof, lambda, n_max, depth } => {
            let tau = &file.roof(roof)?.spec;
            let grid = lambda.as_deref().map(|l| parse_values("--lambda", l)).transpose()?;
            let n_max = match (n_max, &grid) {
                (Some(n), _) => *n,
                (None, Some(g)) => {
                    let top = g.iter().cloned().fold(0.0, f64::max);
                    ((top / roof_min(sys, tau)?).floor() as usize).max(1)
                }
                (None, None) => 16,
            };
            let report = counting_report(sys, tau, grid.as_deref(), n_max, *depth)?;
            for i in 0..report.lambda.len() {
                let ratio = report.ratio[i].map_or("none".to_string(), |r| format!("{r:.6}"));
                writeln!(summary, "pi({}) = {} ratio {ratio}{}", report.lambda[i], report.pi[i], if report.biased[i] { " (biased)" } else { "" }).unwrap();
            }
            for w in &report.warnings {
                writeln!(summary, "warning: {w}").unwrap();
            }
            report.to_csv()
        }
        Command::Corr { potential, roof, obs_a, obs_b, len, seed, t_max, t_step, window, depth } => {
            let (a, b) = (file.observable(obs_a)?, file.observable(obs_b)?);
            let w = parse_values("--window", &window.replace(':', ","))?;
            if w.len() != 2 || w[0] >= w[1] {
                return Err(flag_error("--window", format!("`{window}` must be lo:hi with lo < hi")));
            }
            if !(*t_step > 0.0) || !(*t_max >= 0.0) {
                return Err(flag_error("--t-step", "lag step and t_max must be positive"));
            }
            let grid: Vec<f64> = (0..=((t_max / t_step) + 1e-9).floor() as usize).map(|i| i as f64 * t_step).collect();
            let approx = MarkovApprox::gibbs(sys, file.potential(potential)?, &file.roof(roof)?.spec, *depth)?;
            let sample = sample_orbit(&approx, *len, *seed);
            let mut curve = suspension_correlation(&sample, a, b, &grid)?;
            match fit_decay_rate(&curve, (w[0], w[1])) {
                Ok(fit) => {
                    writeln!(summary, "c_rate {:.6} c_amp {:.6} r2 {:.6} passes {}", fit.c_rate, fit.c_amp, fit.r2, fit.passes).unwrap();
                    curve.fit = Some(fit);
                }
                Err(e) => writeln!(summary, "fit {}: {e}", e.kind()).unwrap(),
            }
            writeln!(summary, "samples {} flow_time {:.1} norm_a {:.4} norm_b {:.4}", curve.samples, curve.flow_time, curve.norm_a, curve.norm_b).unwrap();
            curve.to_csv()
        }
        Command::Distortion { n_max } => {
            let d = sys.distortion_ratios(*n_max)?;
            let bounds = sys.cylinder_bounds(*n_max)?;
            let metric = sys.metric_suite((*n_max).min(8))?;
            writeln!(summary, "ratio_min {} ratio_max {} p0 {} metric_ok {}", d.ratio_min, d.ratio_max, d.p0_est, metric.ok).unwrap();
            json_body(&json!({ "distortion": d, "cylinder_bounds": bounds, "metric": metric }))
        }
        Command::Selftest => unreachable!("handled before loading a system"),
    };
    Ok(Output { summary, body })
}

fn load(path: Option<&Path>) -> Result<(SystemFile, String), Failure> {
    let path = path.ok_or_else(|| flag_error("--system", "a system file is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| flag_error("--system", format!("cannot read {}: {e}", path.display())))?;
    let file = SystemFile::parse(&text)?;
    let canon = file.canonical().to_string();
    Ok((file, canon))
}

fn execute(cli: &Cli) -> Result<Output, Failure> {
    let (file, canonical) = load(cli.system.as_deref())?;
    let key = cache_key(&[&canonical, &format!("{:?}", cli.command)]);
    let dir = (!cli.no_cache).then(cache_dir);
    if let Some(hit) = dir.as_deref().and_then(|d| cache::read(d, &key)) {
        return Ok(hit);
    }
    let out = compute(&file, &cli.command)?;
    if let Some(d) = dir.as_deref() {
        // A cache that cannot be written only costs a recomputation.
        let _ = cache::write(d, &key, &out);
    }
    Ok(out)
}

/// Writes to stdout; a closed pipe (`thermoflow … | head`) is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    if let Command::Selftest = cli.command {
        return selftest::run();
    }
    match execute(&cli) {
        Ok(out) => {
            emit(&out.summary);
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &out.body) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return 1;
                    }
                }
                None => emit(&out.body),
            }
            0
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            2
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error [{}]: {e}", e.kind());
            1
        }
    }
}
