//! Cross-checks of every closed form against independent evaluations over a
//! seeded matrix of random configurations.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    conditional_pmf_series, herald_filter_binomial_convolution, herald_filter_convolution_oracle,
    herald_rate, signal_filter_series, signal_pmf, xi_herald_laguerre, MAX_LAGUERRE_ORDER,
};
use crate::error::{Error, Result};
use crate::model::{FilterSpec, PairStatistics, Pmf, SourceParams};
use crate::montecarlo::{simulate, McConfig};

/// Per-term agreement required between two analytic routes.
pub const TERM_TOL: f64 = 1e-10;
/// Slack on top of the reported tail bound when checking normalization.
pub const NORM_TOL: f64 = 1e-12;
/// Monte Carlo agreement threshold, in standard errors.
pub const MC_SIGMAS: f64 = 5.0;
/// Bins below this probability are not compared against simulation.
pub const MC_MIN_P: f64 = 1e-6;
pub const MATRIX_SEED: u64 = 0x005e_ed0f_11e5;

const PMF_TOL: f64 = 1e-13;
const MC_MIN_HERALD_RATE: f64 = 1e-3;
const MC_TARGET_HERALDS: f64 = 50_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSize {
    /// 20 configurations, 4 simulated.
    Tiny,
    /// 200 configurations, 16 simulated.
    #[default]
    Default,
}

impl MatrixSize {
    pub fn configs(self) -> usize {
        match self {
            MatrixSize::Tiny => 20,
            MatrixSize::Default => 200,
        }
    }

    pub fn simulated(self) -> usize {
        match self {
            MatrixSize::Tiny => 4,
            MatrixSize::Default => 16,
        }
    }

    fn max_trials(self) -> u64 {
        match self {
            MatrixSize::Tiny => 2_000_000,
            MatrixSize::Default => 4_000_000,
        }
    }
}

impl fmt::Display for MatrixSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixSize::Tiny => "tiny",
            MatrixSize::Default => "default",
        })
    }
}

impl FromStr for MatrixSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(MatrixSize::Tiny),
            "default" => Ok(MatrixSize::Default),
            other => Err(Error::Config(format!(
                "unknown matrix {other:?} (expected tiny or default)"
            ))),
        }
    }
}

/// One point of the matrix. The filter fraction is used by the filtered checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixPoint {
    pub params: SourceParams,
    pub f: f64,
}

impl fmt::Display for MatrixPoint {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        write!(
            out,
            "mu={:.4e} eta_h={:.4} eta_s={:.4} d_h={:.3e} f={:.4}",
            p.mu(),
            p.eta_h(),
            p.eta_s(),
            p.d_h(),
            self.f
        )
    }
}

/// `count` configurations drawn from `mu` log-uniform in `[1e-4, 1]`,
/// efficiencies and `f` uniform in `[0.05, 1]`, `d_h` uniform in `[0, 1e-2]`.
/// Every tenth point has `d_h = 0` and every seventh has `f = 1`.
pub fn random_matrix(count: usize, seed: u64) -> Vec<MatrixPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mu = 10f64.powf(rng.random_range(-4.0..=0.0));
            let eta_h = rng.random_range(0.05..=1.0);
            let eta_s = rng.random_range(0.05..=1.0);
            let mut d_h = rng.random_range(0.0..=1e-2);
            let mut f = rng.random_range(0.05..=1.0);
            if i % 10 == 9 {
                d_h = 0.0;
            }
            if i % 7 == 6 {
                f = 1.0;
            }
            MatrixPoint {
                params: SourceParams::new(mu, eta_h, eta_s, d_h).expect("inside the box"),
                f,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub size: MatrixSize,
    /// Replaces the per-term and normalization tolerances.
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub monte_carlo: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            size: MatrixSize::Default,
            tolerance: None,
            seed: MATRIX_SEED,
            monte_carlo: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub configs: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Configuration with the largest deviation, or the first error.
    pub worst: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn max_term_diff(a: &[f64], b: &[f64]) -> f64 {
    (0..a.len().max(b.len()))
        .map(|n| (a.get(n).unwrap_or(&0.0) - b.get(n).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
}

fn unfiltered(stat: PairStatistics, p: &MatrixPoint) -> Result<Pmf> {
    signal_pmf(stat, &p.params, &FilterSpec::none(), PMF_TOL)
}

fn filtered(p: &MatrixPoint, filter: FilterSpec) -> Result<Pmf> {
    signal_pmf(PairStatistics::Poisson, &p.params, &filter, PMF_TOL)
}

/// Herald-filtered law in the Laguerre form against the binomially weighted
/// convolution it expands to.
fn laguerre_deviation(p: &MatrixPoint) -> Result<f64> {
    let physical = filtered(p, FilterSpec::herald(p.f)?)?;
    let terms = physical.len().min(MAX_LAGUERRE_ORDER + 1);
    let weighted = herald_filter_binomial_convolution(&p.params, p.f, terms)?;
    let m = p.params.mu() * p.f * p.params.eta_s();
    let mut worst: f64 = 0.0;
    for (n, w) in weighted.iter().enumerate() {
        let base = match (m == 0.0, n) {
            (true, 0) => 1.0,
            (true, _) => 0.0,
            _ => (n as f64 * (m.ln() - m.ln_1p())).exp() / (1.0 + m),
        };
        let lit = if base == 0.0 {
            0.0
        } else {
            base * xi_herald_laguerre(n as u64, &p.params, p.f)?
        };
        worst = worst.max((lit - w).abs());
    }
    Ok(worst)
}

fn normalization_deviation(p: &MatrixPoint) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for pmf in [
        unfiltered(PairStatistics::Poisson, p)?,
        unfiltered(PairStatistics::Thermal, p)?,
        filtered(p, FilterSpec::herald(p.f)?)?,
        filtered(p, FilterSpec::signal(p.f)?)?,
    ] {
        let excess = (pmf.total() - 1.0).abs() - pmf.tail_bound();
        worst = worst.max(excess.max(0.0));
    }
    Ok(worst)
}

/// Runs `check` on every point whose herald can fire; other points are
/// skipped since no conditional law exists there.
fn analytic_check(
    name: &str,
    points: &[MatrixPoint],
    tolerance: f64,
    check: impl Fn(&MatrixPoint) -> Result<f64> + Sync,
) -> CheckReport {
    let results: Vec<(usize, Result<f64>)> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| (i, check(p)))
        .filter(|(_, r)| !matches!(r, Err(Error::NoHerald)))
        .collect();
    summarize(name, points, tolerance, results)
}

fn summarize(
    name: &str,
    points: &[MatrixPoint],
    tolerance: f64,
    results: Vec<(usize, Result<f64>)>,
) -> CheckReport {
    let mut report = CheckReport {
        name: name.to_string(),
        configs: results.len(),
        max_deviation: 0.0,
        tolerance,
        passed: true,
        worst: String::new(),
    };
    for (i, r) in results {
        match r {
            Ok(dev) if dev > report.max_deviation || report.worst.is_empty() => {
                report.max_deviation = dev;
                report.worst = points[i].to_string();
            }
            Ok(_) => {}
            Err(e) => {
                if report.passed {
                    report.worst = format!("{}: {e}", points[i]);
                }
                report.passed = false;
                report.max_deviation = f64::INFINITY;
            }
        }
    }
    report.passed &= report.max_deviation <= tolerance;
    report
}

fn mc_scenarios(p: &MatrixPoint, k: usize) -> Result<(PairStatistics, FilterSpec)> {
    Ok(match k % 4 {
        0 => (PairStatistics::Poisson, FilterSpec::none()),
        1 => (PairStatistics::Thermal, FilterSpec::none()),
        2 => (PairStatistics::Poisson, FilterSpec::herald(p.f)?),
        _ => (PairStatistics::Poisson, FilterSpec::signal(p.f)?),
    })
}

/// Worst deviation, in standard-normal units, of a seeded simulation from the
/// closed-form law. Runs on the first matrix points whose herald rate is at
/// least 1e-3, cycling through the four source kinds.
fn mc_check(points: &[MatrixPoint], opts: &VerifyOptions) -> Result<CheckReport> {
    let mut chosen = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if chosen.len() == opts.size.simulated() {
            break;
        }
        let (stat, filter) = mc_scenarios(p, chosen.len())?;
        let rate = herald_rate(stat, &p.params, &filter)?;
        if rate >= MC_MIN_HERALD_RATE {
            chosen.push((i, stat, filter, rate));
        }
    }
    let results = chosen
        .iter()
        .map(|&(i, stat, filter, rate)| {
            let p = &points[i];
            let trials =
                ((MC_TARGET_HERALDS / rate).ceil() as u64).clamp(100_000, opts.size.max_trials());
            let config = McConfig::new(p.params, stat, filter, trials, opts.seed ^ i as u64)?;
            let est = simulate(&config)?;
            let exact = signal_pmf(stat, &p.params, &filter, PMF_TOL)?;
            Ok(est.worst_z(exact.probs(), MC_MIN_P).0)
        })
        .collect::<Vec<Result<f64>>>();
    Ok(summarize(
        "monte_carlo_vs_closed_form",
        points,
        MC_SIGMAS,
        chosen.iter().map(|c| c.0).zip(results).collect(),
    ))
}

pub fn run(opts: &VerifyOptions) -> Result<VerifyReport> {
    if let Some(t) = opts.tolerance {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Validation {
                field: "tolerance",
                value: t,
                reason: "must be non-negative",
            });
        }
    }
    let points = random_matrix(opts.size.configs(), opts.seed);
    let term = opts.tolerance.unwrap_or(TERM_TOL);
    let norm = opts.tolerance.unwrap_or(NORM_TOL);
    let mut checks = vec![
        analytic_check("poisson_closed_form_vs_series", &points, term, |p| {
            Ok(max_term_diff(
                unfiltered(PairStatistics::Poisson, p)?.probs(),
                conditional_pmf_series(PairStatistics::Poisson, &p.params, PMF_TOL)?.probs(),
            ))
        }),
        analytic_check("thermal_closed_form_vs_series", &points, term, |p| {
            Ok(max_term_diff(
                unfiltered(PairStatistics::Thermal, p)?.probs(),
                conditional_pmf_series(PairStatistics::Thermal, &p.params, PMF_TOL)?.probs(),
            ))
        }),
        analytic_check(
            "herald_filter_closed_form_vs_convolution",
            &points,
            term,
            |p| {
                Ok(max_term_diff(
                    filtered(p, FilterSpec::herald(p.f)?)?.probs(),
                    herald_filter_convolution_oracle(&p.params, p.f, PMF_TOL)?.probs(),
                ))
            },
        ),
        analytic_check(
            "herald_filter_laguerre_vs_binomial_convolution",
            &points,
            term,
            laguerre_deviation,
        ),
        analytic_check(
            "signal_filter_closed_form_vs_double_sum",
            &points,
            term,
            |p| {
                Ok(max_term_diff(
                    filtered(p, FilterSpec::signal(p.f)?)?.probs(),
                    signal_filter_series(&p.params, p.f, PMF_TOL)?.probs(),
                ))
            },
        ),
        analytic_check("normalization", &points, norm, normalization_deviation),
    ];
    if opts.monte_carlo {
        checks.push(mc_check(&points, opts)?);
    }
    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_is_reproducible_and_inside_the_box() {
        let a = random_matrix(50, 1);
        assert_eq!(a, random_matrix(50, 1));
        assert_ne!(a, random_matrix(50, 2));
        for p in &a {
            let q = &p.params;
            assert!((1e-4..=1.0).contains(&q.mu()));
            assert!((0.05..=1.0).contains(&q.eta_h()) && (0.05..=1.0).contains(&q.eta_s()));
            assert!((0.0..=1e-2).contains(&q.d_h()));
            assert!((0.05..=1.0).contains(&p.f));
        }
        assert_eq!(a[9].params.d_h(), 0.0);
        assert_eq!(a[6].f, 1.0);
    }

    #[test]
    fn tiny_matrix_passes() {
        let report = run(&VerifyOptions {
            size: MatrixSize::Tiny,
            ..Default::default()
        })
        .unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
            assert!(c.configs > 0);
        }
    }

    #[test]
    fn zero_tolerance_fails() {
        let report = run(&VerifyOptions {
            size: MatrixSize::Tiny,
            tolerance: Some(0.0),
            monte_carlo: false,
            ..Default::default()
        })
        .unwrap();
        assert!(!report.passed());
    }
}
