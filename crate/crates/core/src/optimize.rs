//! Optimal dimming and parameter sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{moments_closed_form, moments_from_pmf, signal_pmf};
use crate::error::{Error, Result};
use crate::model::{FilterBranch, MomentSummary, Scenario, SourceParams};

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const PRESCAN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub bounds: (f64, f64),
    /// Relative width of the final bracket in `mu`.
    pub rel_tol: f64,
    /// Check unimodality on a 16-point log grid and start from the cell
    /// around its minimum.
    pub prescan: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            bounds: (1e-6, 10.0),
            rel_tol: 1e-4,
            prescan: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub mu_opt: f64,
    pub fano_opt: f64,
    pub evaluations: usize,
    /// Final bracket `(mu_lo, mu_hi)` containing `mu_opt`.
    pub bracket: (f64, f64),
}

/// Fano ratio of the heralded, unfiltered Poisson source at pump level `mu`.
pub fn fano_at(eta_h: f64, eta_s: f64, d_h: f64, mu: f64) -> Result<f64> {
    let params = SourceParams::new(mu, eta_h, eta_s, d_h)?;
    moments_closed_form(&params)?.fano.ok_or(Error::ZeroMean)
}

/// Pump level minimizing the Fano ratio, by golden-section search on `ln mu`.
///
/// Fails with [`Error::InfimumAtZero`] when `d_h = 0` (the ratio then keeps
/// falling as `mu -> 0`) and with [`Error::NonUnimodal`] when the bracket
/// does not hold an interior minimum.
pub fn optimize_mu(
    eta_h: f64,
    eta_s: f64,
    d_h: f64,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    let (lo, hi) = opts.bounds;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Config(format!(
            "bounds must satisfy 0 < mu_lo < mu_hi, got ({lo}, {hi})"
        )));
    }
    if !(opts.rel_tol > 0.0 && opts.rel_tol < 1.0) {
        return Err(Error::Validation {
            field: "rel_tol",
            value: opts.rel_tol,
            reason: "must lie in (0, 1)",
        });
    }
    SourceParams::new(lo, eta_h, eta_s, d_h)?;
    if d_h == 0.0 {
        return Err(Error::InfimumAtZero);
    }

    let mut evaluations = 0;
    let mut fano = |t: f64| {
        evaluations += 1;
        fano_at(eta_h, eta_s, d_h, t.exp())
    };

    let (mut a, mut b) = (lo.ln(), hi.ln());
    if opts.prescan {
        let step = (b - a) / (PRESCAN_POINTS - 1) as f64;
        let ts: Vec<f64> = (0..PRESCAN_POINTS).map(|i| a + step * i as f64).collect();
        let vals = ts.iter().map(|&t| fano(t)).collect::<Result<Vec<_>>>()?;
        let best = (0..PRESCAN_POINTS)
            .min_by(|&i, &j| vals[i].total_cmp(&vals[j]))
            .expect("non-empty grid");
        let falls = vals[..=best].windows(2).all(|w| w[1] <= w[0]);
        let rises = vals[best..].windows(2).all(|w| w[1] >= w[0]);
        if !falls || !rises || best == 0 || best == PRESCAN_POINTS - 1 {
            return Err(Error::NonUnimodal { lo, hi });
        }
        a = ts[best - 1];
        b = ts[best + 1];
    }

    let (fa, fb) = (fano(a)?, fano(b)?);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (fano(c)?, fano(d)?);
    if fc.min(fd) >= fa.min(fb) {
        return Err(Error::NonUnimodal { lo, hi });
    }
    let target = opts.rel_tol.ln_1p();
    while b - a > target {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = fano(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = fano(d)?;
        }
    }
    let (t, fano_opt) = if fc <= fd { (c, fc) } else { (d, fd) };
    Ok(OptimizeResult {
        mu_opt: t.exp(),
        fano_opt,
        evaluations,
        bracket: (a.exp(), b.exp()),
    })
}

/// `points` values spaced evenly in `ln` between `lo` and `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / (points - 1) as f64;
            (0..points)
                .map(|i| match i {
                    0 => lo,
                    i if i == points - 1 => hi,
                    i => (a + step * i as f64).exp(),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Mu,
    EtaH,
    EtaS,
    DH,
    F,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Mu => "mu",
            SweepAxis::EtaH => "eta_h",
            SweepAxis::EtaS => "eta_s",
            SweepAxis::DH => "d_h",
            SweepAxis::F => "f",
        }
    }

    /// The scenario with this parameter replaced by `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = *base;
        match self {
            SweepAxis::Mu => s.params = s.params.with_mu(value)?,
            SweepAxis::EtaH => s.params = s.params.with_eta_h(value)?,
            SweepAxis::EtaS => s.params = s.params.with_eta_s(value)?,
            SweepAxis::DH => s.params = s.params.with_d_h(value)?,
            SweepAxis::F => s.filter = s.filter.with_f(value)?,
        }
        Ok(s)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(SweepAxis::Mu),
            "eta_h" | "eta-h" => Ok(SweepAxis::EtaH),
            "eta_s" | "eta-s" => Ok(SweepAxis::EtaS),
            "d_h" | "dark" => Ok(SweepAxis::DH),
            "f" => Ok(SweepAxis::F),
            other => Err(Error::Config(format!(
                "unknown sweep axis {other:?} (expected mu, eta_h, eta_s, d_h or f)"
            ))),
        }
    }
}

/// Number of leading pmf entries kept per sweep point.
pub const PMF_HEAD: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub moments: MomentSummary,
    /// `p(0..PMF_HEAD)`
    pub pmf_head: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Failed points keep their error; the sweep carries on.
    pub outcome: Result<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

fn evaluate(scenario: &Scenario, tol: f64) -> Result<SweepPoint> {
    let pmf = signal_pmf(scenario.stat, &scenario.params, &scenario.filter, tol)?;
    Ok(SweepPoint {
        moments: moments_from_pmf(&pmf),
        pmf_head: (0..PMF_HEAD).map(|n| pmf.get(n)).collect(),
    })
}

/// Moments and leading pmf entries along one parameter axis. Points are
/// evaluated in parallel and returned in grid order.
pub fn sweep(base: &Scenario, tol: f64, axis: SweepAxis, grid: &[f64]) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if grid
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::Config(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    if axis == SweepAxis::F && base.filter.branch() == FilterBranch::None {
        return Err(Error::Config(
            "an f sweep needs a signal or herald filter".into(),
        ));
    }
    Scenario::new(base.stat, base.params, base.filter)?;
    let rows = grid
        .par_iter()
        .map(|&value| SweepRow {
            value,
            outcome: axis.apply(base, value).and_then(|s| evaluate(&s, tol)),
        })
        .collect();
    Ok(SweepResult { axis, rows })
}
