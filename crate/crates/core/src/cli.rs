//! The `hsps` command-line tool.
//!
//! Exit status: 0 success, 1 usage error, 2 domain error (for example a
//! herald that can never fire), 3 verification failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analytic::{
    herald_rate, moments_closed_form, moments_from_pmf, signal_pmf_with_min_terms, xi, XiKind,
    DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::model::{
    parse_f64, parse_key_values, FilterBranch, FilterSpec, PairStatistics, Scenario, SourceParams,
};
use crate::montecarlo::{simulate, McConfig, DEFAULT_N_CAP};
use crate::optimize::{logspace, optimize_mu, sweep, OptimizeOptions, SweepAxis, PMF_HEAD};
use crate::output::{Cell, Format, OutputRecord};
use crate::verify::{self, MatrixSize, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "hsps",
    version,
    about = "Photon-number statistics of heralded single-photon sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Heralded and unheralded photon-number distributions with the correcting factor.
    Pmf {
        #[command(flatten)]
        source: SourceArgs,
        /// Last photon number to print (default: until the tail bound falls below --tol).
        #[arg(long)]
        nmax: Option<usize>,
    },
    /// Mean, variance, Fano ratio and g2 of the heralded signal.
    Moments {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Pump level minimizing the Fano ratio (Poisson source, no filter).
    Optimize {
        #[command(flatten)]
        source: SourceArgs,
        /// Lower end of the search bracket in mu.
        #[arg(long, default_value_t = 1e-6)]
        mu_lo: f64,
        /// Upper end of the search bracket in mu.
        #[arg(long, default_value_t = 10.0)]
        mu_hi: f64,
        /// Relative width of the final bracket.
        #[arg(long, default_value_t = 1e-4)]
        rel_tol: f64,
        /// Check unimodality on a 16-point grid first.
        #[arg(long)]
        prescan: bool,
    },
    /// Moments and leading probabilities along one parameter, or the pmf along n.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        /// mu, eta_h, eta_s, d_h, f or n
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["from", "to", "points"])]
        grid: Option<Vec<f64>>,
        /// Evenly spaced grid from --from to --to with --points values.
        #[arg(long, requires_all = ["to", "points"])]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Space --from/--to points evenly in log.
        #[arg(long)]
        log: bool,
        /// Last photon number for --axis n.
        #[arg(long)]
        nmax: Option<usize>,
    },
    /// Seeded Monte Carlo estimate of the heralded distribution.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,
        /// Time bins to simulate (default 1000000).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: Option<u64>,
        /// Same seed, same output, on any thread count (default 1).
        #[arg(long)]
        seed: Option<u64>,
        /// Signal counts at or above this share the last bin.
        #[arg(long, default_value_t = DEFAULT_N_CAP)]
        n_cap: usize,
        /// Last photon number to print (default: last non-empty bin).
        #[arg(long)]
        nmax: Option<usize>,
    },
    /// Cross-check closed forms, series, convolution and simulation.
    Verify {
        /// tiny (20 configurations) or default (200).
        #[arg(long, default_value = "default")]
        matrix: MatrixSize,
        /// Replace the analytic tolerances.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Seed of the random configuration matrix.
        #[arg(long)]
        seed: Option<u64>,
        /// Skip the Monte Carlo check.
        #[arg(long)]
        no_mc: bool,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
struct OutArgs {
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Pair statistics: poisson (multimode, default) or thermal (single mode).
    #[arg(long)]
    stat: Option<PairStatistics>,
    /// Mean pairs per time bin (default 0.01).
    #[arg(long)]
    mu: Option<f64>,
    /// Herald detection efficiency (default 0.5).
    #[arg(long)]
    eta_h: Option<f64>,
    /// Signal transmission (default 0.5).
    #[arg(long)]
    eta_s: Option<f64>,
    /// Dark-count probability of the herald detector per bin (default 1e-4).
    #[arg(long)]
    dark: Option<f64>,
    /// Mode filter: none, signal or herald.
    #[arg(long)]
    filter: Option<FilterBranch>,
    /// Transmitted mode fraction for --filter signal|herald.
    #[arg(long)]
    f: Option<f64>,
    /// Tail tolerance of truncated distributions.
    #[arg(long)]
    tol: Option<f64>,
    /// Flat key=value file supplying defaults; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

/// Values from `--config`, looked up after the flags.
struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile(BTreeMap::new()));
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let map = parse_key_values(&text)?;
        const KNOWN: [&str; 12] = [
            "stat", "mu", "eta_h", "eta_s", "d_h", "dark", "filter", "f", "tol", "trials", "seed",
            "nmax",
        ];
        if let Some(k) = map.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config key {k:?}")));
        }
        if map.contains_key("d_h") && map.contains_key("dark") {
            return Err(Error::Config("config sets both d_h and dark".into()));
        }
        Ok(ConfigFile(map))
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn num(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key).map(|v| parse_f64(key, v)).transpose()
    }

    fn int(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?} as an integer")))
            })
            .transpose()
    }
}

/// Fully resolved source configuration.
struct Resolved {
    scenario: Scenario,
    tol: f64,
    config: ConfigFile,
}

// Defaults: the single-mode example used throughout the docs.
const DEFAULT_MU: f64 = 0.01;
const DEFAULT_ETA: f64 = 0.5;
const DEFAULT_DARK: f64 = 1e-4;

impl SourceArgs {
    fn resolve(&self) -> Result<Resolved> {
        let config = ConfigFile::load(self.config.as_ref())?;
        let stat = match (self.stat, config.raw("stat")) {
            (Some(s), _) => s,
            (None, Some(s)) => s.parse()?,
            (None, None) => PairStatistics::Poisson,
        };
        let num = |flag: Option<f64>, key: &str, default: f64| -> Result<f64> {
            Ok(match flag {
                Some(v) => v,
                None => config.num(key)?.unwrap_or(default),
            })
        };
        let dark = match self.dark {
            Some(v) => v,
            None => config
                .num("d_h")?
                .or(config.num("dark")?)
                .unwrap_or(DEFAULT_DARK),
        };
        let params = SourceParams::new(
            num(self.mu, "mu", DEFAULT_MU)?,
            num(self.eta_h, "eta_h", DEFAULT_ETA)?,
            num(self.eta_s, "eta_s", DEFAULT_ETA)?,
            dark,
        )?;
        let branch = match (self.filter, config.raw("filter")) {
            (Some(b), _) => b,
            (None, Some(b)) => b.parse()?,
            (None, None) => FilterBranch::None,
        };
        let f = num(self.f, "f", 1.0)?;
        if branch == FilterBranch::None && f != 1.0 {
            return Err(Error::Config("--f needs --filter signal or herald".into()));
        }
        let filter = FilterSpec::new(branch, f)?;
        let tol = num(self.tol, "tol", DEFAULT_TOL)?;
        Ok(Resolved {
            scenario: Scenario::new(stat, params, filter)?,
            tol,
            config,
        })
    }
}

fn record(command: &str, columns: &[&str], r: &Resolved) -> OutputRecord {
    let s = &r.scenario;
    OutputRecord::new(command, columns)
        .input("stat", s.stat.as_str())
        .input("mu", s.params.mu())
        .input("eta_h", s.params.eta_h())
        .input("eta_s", s.params.eta_s())
        .input("d_h", s.params.d_h())
        .input("filter", s.filter.branch().as_str())
        .input("f", s.filter.f())
        .input("tol", r.tol)
}

fn emit(rec: &OutputRecord, out: &OutArgs) -> Result<()> {
    let text = rec.to_string(out.format)?;
    match &out.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => match io::stdout().lock().write_all(text.as_bytes()) {
            // a closed pipe (`| head`) is the reader's choice, not a failure
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                Err(Error::Config(format!("cannot write output: {e}")))
            }
            _ => Ok(()),
        },
    }
}

/// Rows `(n, p_heralded, p_unheralded, xi)` for `n = 0..=nmax`.
fn pmf_rows(r: &Resolved, nmax: Option<usize>) -> Result<(Vec<Vec<Cell>>, f64)> {
    let s = &r.scenario;
    let min_terms = nmax.map_or(1, |n| n + 1);
    let heralded = signal_pmf_with_min_terms(s.stat, &s.params, &s.filter, r.tol, min_terms)?;
    let always = s.params.with_d_h(1.0)?;
    let plain = signal_pmf_with_min_terms(s.stat, &always, &s.filter, r.tol, heralded.len())?;
    let kind = XiKind::select(s.stat, &s.filter)?;
    let last = nmax.unwrap_or(heralded.n_max());
    let rows = (0..=last)
        .map(|n| {
            vec![
                Cell::from(n),
                Cell::from(heralded.get(n)),
                Cell::from(plain.get(n)),
                Cell::from(xi(kind, n as u64, &s.params, &s.filter).ok()),
            ]
        })
        .collect();
    Ok((rows, heralded.tail_bound()))
}

const PMF_COLUMNS: [&str; 4] = ["n", "p_heralded", "p_unheralded", "xi"];

fn cmd_pmf(source: &SourceArgs, nmax: Option<usize>) -> Result<i32> {
    let r = source.resolve()?;
    let nmax = match nmax {
        Some(n) => Some(n),
        None => r.config.int("nmax")?.map(|n| n as usize),
    };
    let mut rec = record("pmf", &PMF_COLUMNS, &r);
    let (rows, tail) = pmf_rows(&r, nmax)?;
    rows.into_iter().for_each(|row| rec.push_row(row));
    let s = &r.scenario;
    rec.set_summary("tail_bound", tail);
    rec.set_summary("herald_rate", herald_rate(s.stat, &s.params, &s.filter)?);
    emit(&rec, &source.out)?;
    Ok(EXIT_OK)
}

fn cmd_moments(source: &SourceArgs) -> Result<i32> {
    let r = source.resolve()?;
    let s = &r.scenario;
    let mut rec = record("moments", &["method", "mean", "variance", "fano", "g2"], &r);
    let push = |rec: &mut OutputRecord, method: &str, m: crate::model::MomentSummary| {
        rec.push_row(vec![
            method.into(),
            m.mean.into(),
            m.variance.into(),
            m.fano.into(),
            m.g2.into(),
        ]);
    };
    if s.stat == PairStatistics::Poisson && s.filter.branch() == FilterBranch::None {
        push(&mut rec, "closed_form", moments_closed_form(&s.params)?);
    }
    let pmf = crate::analytic::signal_pmf(s.stat, &s.params, &s.filter, r.tol)?;
    push(&mut rec, "pmf", moments_from_pmf(&pmf));
    emit(&rec, &source.out)?;
    Ok(EXIT_OK)
}

fn cmd_optimize(source: &SourceArgs, opts: OptimizeOptions) -> Result<i32> {
    let r = source.resolve()?;
    let s = &r.scenario;
    if s.stat != PairStatistics::Poisson || s.filter.branch() != FilterBranch::None {
        return Err(Error::Config(
            "optimize uses the closed-form Poisson moments; use sweep --axis mu for other sources"
                .into(),
        ));
    }
    let p = &s.params;
    let res = optimize_mu(p.eta_h(), p.eta_s(), p.d_h(), &opts)?;
    let mut rec = OutputRecord::new(
        "optimize",
        &[
            "mu_opt",
            "fano_opt",
            "evaluations",
            "bracket_lo",
            "bracket_hi",
        ],
    )
    .input("stat", s.stat.as_str())
    .input("eta_h", p.eta_h())
    .input("eta_s", p.eta_s())
    .input("d_h", p.d_h())
    .input("mu_lo", opts.bounds.0)
    .input("mu_hi", opts.bounds.1)
    .input("rel_tol", opts.rel_tol)
    .input("prescan", opts.prescan);
    rec.push_row(vec![
        res.mu_opt.into(),
        res.fano_opt.into(),
        res.evaluations.into(),
        res.bracket.0.into(),
        res.bracket.1.into(),
    ]);
    emit(&rec, &source.out)?;
    Ok(EXIT_OK)
}

struct GridArgs {
    grid: Option<Vec<f64>>,
    from: Option<f64>,
    to: Option<f64>,
    points: Option<usize>,
    log: bool,
}

impl GridArgs {
    fn values(&self) -> Result<Vec<f64>> {
        let grid = match (&self.grid, self.from, self.to, self.points) {
            (Some(g), ..) => g.clone(),
            (None, Some(a), Some(b), Some(k)) if self.log => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(Error::Config("--log needs positive --from and --to".into()));
                }
                logspace(a, b, k)
            }
            (None, Some(a), Some(b), Some(k)) => match k {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..k)
                    .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
                    .collect(),
            },
            _ => return Err(Error::Config("give --grid or --from/--to/--points".into())),
        };
        if grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        Ok(grid)
    }
}

fn cmd_sweep(source: &SourceArgs, axis: &str, grid: GridArgs, nmax: Option<usize>) -> Result<i32> {
    let r = source.resolve()?;
    if axis == "n" {
        let mut rec = record("sweep", &PMF_COLUMNS, &r).input("axis", "n");
        let (rows, tail) = pmf_rows(&r, nmax)?;
        rows.into_iter().for_each(|row| rec.push_row(row));
        rec.set_summary("tail_bound", tail);
        emit(&rec, &source.out)?;
        return Ok(EXIT_OK);
    }
    let axis: SweepAxis = axis.parse()?;
    let values = grid.values()?;
    let result = sweep(&r.scenario, r.tol, axis, &values)?;
    let head: Vec<String> = (0..PMF_HEAD).map(|n| format!("p{n}")).collect();
    let mut columns = vec!["value", "mean", "variance", "fano", "g2"];
    columns.extend(head.iter().map(String::as_str));
    columns.push("error");
    let mut rec = record("sweep", &columns, &r).input("axis", axis.as_str());
    for row in &result.rows {
        let mut cells = vec![Cell::from(row.value)];
        match &row.outcome {
            Ok(pt) => {
                let m = pt.moments;
                cells.extend([m.mean.into(), m.variance.into(), m.fano.into(), m.g2.into()]);
                cells.extend(pt.pmf_head.iter().map(|&p| Cell::from(p)));
                cells.push(Cell::Null);
            }
            Err(e) => {
                cells.extend((0..4 + PMF_HEAD).map(|_| Cell::Null));
                cells.push(e.to_string().into());
            }
        }
        rec.push_row(cells);
    }
    rec.set_summary("failed_points", result.failures());
    emit(&rec, &source.out)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(
    source: &SourceArgs,
    trials: Option<u64>,
    seed: Option<u64>,
    n_cap: usize,
    nmax: Option<usize>,
) -> Result<i32> {
    let r = source.resolve()?;
    let s = &r.scenario;
    let trials = match trials {
        Some(t) => t,
        None => r.config.int("trials")?.unwrap_or(1_000_000),
    };
    let seed = match seed {
        Some(v) => v,
        None => r.config.int("seed")?.unwrap_or(1),
    };
    let config = McConfig::new(s.params, s.stat, s.filter, trials, seed)?.with_n_cap(n_cap)?;
    let est = simulate(&config)?;
    let exact =
        crate::analytic::signal_pmf_with_min_terms(s.stat, &s.params, &s.filter, r.tol, n_cap + 1)?;
    let last = nmax.unwrap_or_else(|| {
        let filled = est.pmf_hat.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        filled.max(4)
    });
    let mut rec = record("simulate", &["n", "p_hat", "stderr", "p_exact"], &r)
        .input("trials", trials)
        .input("seed", seed)
        .input("n_cap", n_cap);
    for n in 0..=last.min(n_cap) {
        rec.push_row(vec![
            n.into(),
            est.pmf_hat[n].into(),
            est.stderr[n].into(),
            exact.get(n).into(),
        ]);
    }
    rec.set_summary("herald_rate", est.herald_rate);
    rec.set_summary(
        "herald_rate_exact",
        herald_rate(s.stat, &s.params, &s.filter)?,
    );
    rec.set_summary("heralded", est.heralded);
    rec.set_summary("clamped_mass", est.clamped_mass);
    rec.set_summary("worst_z", est.worst_z(exact.probs(), verify::MC_MIN_P).0);
    emit(&rec, &source.out)?;
    Ok(EXIT_OK)
}

fn cmd_verify(opts: VerifyOptions, out: &OutArgs) -> Result<i32> {
    let report = verify::run(&opts)?;
    let mut rec = OutputRecord::new(
        "verify",
        &[
            "check",
            "configs",
            "max_deviation",
            "tolerance",
            "passed",
            "worst",
        ],
    )
    .input("matrix", opts.size.to_string())
    .input("seed", opts.seed)
    .input("tolerance", opts.tolerance)
    .input("monte_carlo", opts.monte_carlo);
    for c in &report.checks {
        rec.push_row(vec![
            c.name.as_str().into(),
            c.configs.into(),
            c.max_deviation.into(),
            c.tolerance.into(),
            c.passed.into(),
            c.worst.as_str().into(),
        ]);
    }
    rec.set_summary("passed", report.passed());
    emit(&rec, out)?;
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_VERIFY
    })
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Pmf { source, nmax } => cmd_pmf(&source, nmax),
        Command::Moments { source } => cmd_moments(&source),
        Command::Optimize {
            source,
            mu_lo,
            mu_hi,
            rel_tol,
            prescan,
        } => cmd_optimize(
            &source,
            OptimizeOptions {
                bounds: (mu_lo, mu_hi),
                rel_tol,
                prescan,
            },
        ),
        Command::Sweep {
            source,
            axis,
            grid,
            from,
            to,
            points,
            log,
            nmax,
        } => cmd_sweep(
            &source,
            &axis,
            GridArgs {
                grid,
                from,
                to,
                points,
                log,
            },
            nmax,
        ),
        Command::Simulate {
            source,
            trials,
            seed,
            n_cap,
            nmax,
        } => cmd_simulate(&source, trials, seed, n_cap, nmax),
        Command::Verify {
            matrix,
            tolerance,
            seed,
            no_mc,
            out,
        } => cmd_verify(
            VerifyOptions {
                size: matrix,
                tolerance,
                seed: seed.unwrap_or(verify::MATRIX_SEED),
                monte_carlo: !no_mc,
            },
            &out,
        ),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_DOMAIN
            }
        }
    }
}
