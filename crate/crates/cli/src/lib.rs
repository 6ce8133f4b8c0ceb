//! Command-line front end for `feplab`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use feplab::configurations::{enumerate, FepConfiguration, SsepConfiguration};
use feplab::dynamics::{run_fep, run_ssep_with_current, TaggedSsepState};
use feplab::experiments::{
    cutoff_profile, default_time_grid, estimate_tv_lower, estimate_tv_upper, estimate_transient_mass,
    exact_feasible, replicate_rng, window_ratio, write_profile_csv, ExperimentConfig, Mode, ProfileRow, Statistic,
    TvBoundReport,
};
use feplab::spectral::{lb_time_estimate, minimal_s_prime, solve_t_star, t_star_bracket};
use feplab::{exact, phi, phi_inverse, Error};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "feplab", version, about = "Facilitated exclusion process on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List configurations with k particles on n sites
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Keep only configurations without two adjacent holes
        #[arg(long)]
        ergodic: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the FEP to SSEP mapping, or its inverse with --x and --sigma
    Map {
        #[arg(long)]
        n: usize,
        /// Rank of the tagged particle, counted from site 1
        #[arg(long, requires = "eta")]
        k_rank: Option<usize>,
        #[arg(long)]
        eta: Option<String>,
        #[arg(long, requires = "sigma", conflicts_with = "eta")]
        x: Option<usize>,
        #[arg(long)]
        sigma: Option<String>,
    },
    /// Run the FEP (or the SSEP with its current) from a configuration
    Simulate {
        /// Starting word, e.g. 110110
        #[arg(long)]
        eta: String,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value_t = Process::Fep)]
        process: Process,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact mixing, ergodic mixing and transience times by uniformization
    Exact(ExperimentArgs),
    /// Distance-to-equilibrium profile: exact when small, Monte Carlo bracket otherwise
    TvCurve(ExperimentArgs),
    /// Coupling upper bound on the distance to equilibrium
    MergeUb(ExperimentArgs),
    /// Statistic lower bound on the distance to equilibrium
    StatisticLb(ExperimentArgs),
    /// Transient mass from the packed block, exact time when small
    Transience(ExperimentArgs),
    /// Spectral lower-bound time and the level-crossing time t*
    SpectralLb(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Process {
    Fep,
    Ssep,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StatisticArg {
    Fluctuation,
    FirstMode,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// JSON experiment configuration; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated observation times
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    s_prime: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    stationary_replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    statistic: Option<StatisticArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self, mode: Mode) -> Result<ExperimentConfig, String> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let mut v: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                if let Some(obj) = v.as_object_mut() {
                    obj.insert("mode".into(), serde_json::to_value(mode).expect("mode serializes"));
                }
                serde_json::from_value::<ExperimentConfig>(v).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => {
                let (Some(n), Some(k)) = (self.n, self.k) else {
                    return Err("--n and --k are required without --config".into());
                };
                ExperimentConfig::new(n, k, mode)
            }
        };
        c.n = self.n.unwrap_or(c.n);
        c.k = self.k.unwrap_or(c.k);
        if let Some(t) = &self.times {
            c.times = t.clone();
        }
        c.epsilon = self.epsilon.unwrap_or(c.epsilon);
        c.s = self.s.or(c.s);
        c.s_prime = self.s_prime.or(c.s_prime);
        c.replicates = self.replicates.unwrap_or(c.replicates);
        c.stationary_replicates = self.stationary_replicates.or(c.stationary_replicates);
        c.seed = self.seed.unwrap_or(c.seed);
        if let Some(s) = self.statistic {
            c.statistic = match s {
                StatisticArg::Fluctuation => Statistic::Fluctuation,
                StatisticArg::FirstMode => Statistic::FirstMode,
            };
        }
        if let Some(out) = &self.out {
            c.output_path = Some(out.display().to_string());
        }
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(summary) => {
            let _ = writeln!(stdout, "{summary}");
            0
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| format!("{} is not a file path", path.display()))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| format!("{}: {e}", tmp.display()))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        format!("{}: {e}", path.display())
    })
}

/// Sends `bytes` to the configured output file, or to stdout.
fn emit(config_out: Option<&str>, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), String> {
    match config_out {
        Some(p) => write_atomic(Path::new(p), bytes),
        None => stdout.write_all(bytes).map_err(|e| e.to_string()),
    }
}

fn profile_csv(rows: &[ProfileRow]) -> Result<Vec<u8>, String> {
    let mut buf = Vec::new();
    write_profile_csv(rows, &mut buf).map_err(err)?;
    Ok(buf)
}

fn rows_of(reports: &[TvBoundReport]) -> Vec<ProfileRow> {
    reports
        .iter()
        .map(|r| ProfileRow {
            t: r.time,
            lower: r.lower_bound,
            lower_se: r.lower_stderr,
            upper: r.upper_bound,
            upper_se: r.upper_stderr,
        })
        .collect()
}

fn with_default_times(mut c: ExperimentConfig) -> ExperimentConfig {
    if c.times.is_empty() {
        c.times = default_time_grid(c.n, c.k, 16);
    }
    c
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<Value, String> {
    match command {
        Command::Enumerate { n, k, ergodic, out } => {
            let configs = enumerate(n, k, ergodic).map_err(err)?;
            let mut text = String::new();
            for c in &configs {
                text.push_str(&c.to_string());
                text.push('\n');
            }
            emit(out.as_ref().and_then(|p| p.to_str()), text.as_bytes(), stdout)?;
            Ok(json!({"mode": "enumerate", "n": n, "k": k, "ergodic": ergodic, "count": configs.len()}))
        }
        Command::Map { n, k_rank, eta, x, sigma } => match (k_rank, eta, x, sigma) {
            (Some(rank), Some(eta), None, None) => {
                let eta: FepConfiguration = eta.parse().map_err(err)?;
                if eta.size() != n {
                    return Err(format!("eta has {} sites, expected {n}", eta.size()));
                }
                let m = phi(rank, &eta).map_err(err)?;
                writeln!(stdout, "X={} sigma={}", m.position, m.ssep).map_err(|e| e.to_string())?;
                Ok(json!({"mode": "map", "x": m.position, "sigma": m.ssep.to_string()}))
            }
            (None, None, Some(x), Some(sigma)) => {
                let sigma: SsepConfiguration = sigma.parse().map_err(err)?;
                let (rank, eta) = phi_inverse(x, &sigma, n).map_err(err)?;
                writeln!(stdout, "rank={rank} eta={eta}").map_err(|e| e.to_string())?;
                Ok(json!({"mode": "map", "rank": rank, "eta": eta.to_string()}))
            }
            _ => Err("map needs either --k-rank with --eta, or --x with --sigma".into()),
        },
        Command::Simulate { eta, t, process, seed } => {
            if !(t.is_finite() && t >= 0.0) {
                return Err(format!("time {t} must be finite and nonnegative"));
            }
            let mut rng = replicate_rng(seed, 0, 0);
            match process {
                Process::Fep => {
                    let start: FepConfiguration = eta.parse().map_err(err)?;
                    let end = run_fep(&start, t, &mut rng);
                    Ok(json!({"mode": "simulate", "process": "fep", "t": t, "final": end.to_string()}))
                }
                Process::Ssep => {
                    let sigma: SsepConfiguration = eta.parse().map_err(err)?;
                    let end = run_ssep_with_current(&TaggedSsepState { y: 0, sigma }, t, &mut rng);
                    Ok(json!({"mode": "simulate", "process": "ssep", "t": t, "final": end.sigma.to_string(), "current": end.y}))
                }
            }
        }
        Command::Exact(a) => {
            let c = a.resolve(Mode::Exact)?;
            let mixing = exact::mixing_time(c.n, c.k, c.epsilon).map_err(err)?;
            let ergodic = exact::ergodic_mixing_time(c.n, c.k, c.epsilon).map_err(err)?;
            let transience = exact::transience_time(c.n, c.k, c.epsilon).map_err(err)?;
            let v = json!({
                "mode": "exact", "n": c.n, "k": c.k, "epsilon": c.epsilon,
                "mixing_time": mixing, "ergodic_mixing_time": ergodic, "transience_time": transience,
            });
            if let Some(p) = &c.output_path {
                write_atomic(Path::new(p), format!("{v}\n").as_bytes())?;
            }
            Ok(v)
        }
        Command::TvCurve(a) => {
            let c = with_default_times(a.resolve(Mode::TvCurve)?);
            let rows = cutoff_profile(&c).map_err(err)?;
            emit(c.output_path.as_deref(), &profile_csv(&rows)?, stdout)?;
            let curve: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.lower)).collect();
            Ok(json!({
                "mode": "tv-curve", "n": c.n, "k": c.k, "rows": rows.len(),
                "exact": exact_feasible(c.n, c.k), "window_ratio": window_ratio(&curve),
            }))
        }
        Command::MergeUb(a) => {
            let c = with_default_times(a.resolve(Mode::MergeUb)?);
            let rows = rows_of(&estimate_tv_upper(&c).map_err(err)?);
            emit(c.output_path.as_deref(), &profile_csv(&rows)?, stdout)?;
            Ok(json!({"mode": "merge-ub", "n": c.n, "k": c.k, "rows": rows.len(), "replicates": c.replicates}))
        }
        Command::StatisticLb(a) => {
            let c = with_default_times(a.resolve(Mode::StatisticLb)?);
            let reports = estimate_tv_lower(&c).map_err(err)?;
            let uncertified = reports.iter().filter(|r| !r.certified).count();
            emit(c.output_path.as_deref(), &profile_csv(&rows_of(&reports))?, stdout)?;
            Ok(json!({
                "mode": "statistic-lb", "n": c.n, "k": c.k, "rows": reports.len(),
                "replicates": c.replicates, "uncertified_rows": uncertified,
            }))
        }
        Command::Transience(a) => {
            let c = with_default_times(a.resolve(Mode::Transience)?);
            let rows = estimate_transient_mass(&c).map_err(err)?;
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["t", "transient", "transient_se"]).map_err(|e| e.to_string())?;
                for (t, f, se) in &rows {
                    w.write_record([t.to_string(), f.to_string(), se.to_string()]).map_err(|e| e.to_string())?;
                }
                w.flush().map_err(|e| e.to_string())?;
            }
            emit(c.output_path.as_deref(), &buf, stdout)?;
            let exact_time = if exact_feasible(c.n, c.k) {
                Some(exact::transience_time(c.n, c.k, c.epsilon).map_err(err)?)
            } else {
                None
            };
            Ok(json!({"mode": "transience", "n": c.n, "k": c.k, "rows": rows.len(), "exact_transience_time": exact_time}))
        }
        Command::SpectralLb(a) => {
            let c = a.resolve(Mode::SpectralLb)?;
            let p = (2 * c.k - c.n).min(c.n - c.k);
            let s = c.s.unwrap_or(1.0);
            let s_prime = match c.s_prime {
                Some(v) => v,
                None => minimal_s_prime(c.epsilon, s).map_err(err)?,
            };
            let lb = lb_time_estimate(c.n, c.k, c.epsilon, s, s_prime).map_err(err)?;
            let (lo, hi) = t_star_bracket(c.k, p, s_prime).map_err(err)?;
            let t_star = solve_t_star(c.k, p, s_prime).ok();
            let v = json!({
                "mode": "spectral-lb", "n": c.n, "k": c.k, "p": p, "epsilon": c.epsilon, "s": s,
                "s_prime": s_prime, "lb_time": lb, "t_star": t_star, "bracket": [lo, hi],
            });
            if let Some(path) = &c.output_path {
                write_atomic(Path::new(path), format!("{v}\n").as_bytes())?;
            }
            Ok(v)
        }
    }
}
