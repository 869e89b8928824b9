use super::xi::{nu_h, HeraldFiltered, PoissonHerald, ThermalHerald};
use super::{check_tol, poisson_pmf, poisson_tail_bound};
use crate::error::{Error, Result};
use crate::model::{FilterBranch, FilterSpec, PairStatistics, Pmf, SourceParams};

/// Default tail tolerance for truncated distributions.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_TERMS: usize = 200_000;

/// Closed-form heralded law of the signal branch, evaluated term by term.
enum ClosedForm {
    Poisson {
        herald: PoissonHerald,
        mean: f64,
    },
    /// Unfiltered thermal source, or a signal-filtered Poisson source whose
    /// kept mode is thermal.
    Thermal(ThermalHerald),
    HeraldFiltered(HeraldFiltered),
}

impl ClosedForm {
    fn new(stat: PairStatistics, params: &SourceParams, filter: &FilterSpec) -> Result<Self> {
        filter.check_statistics(stat)?;
        let (mu, eta_h, eta_s, dark) = (params.mu(), params.eta_h(), params.eta_s(), params.d_h());
        Ok(match (stat, filter.branch()) {
            (PairStatistics::Poisson, FilterBranch::None) => ClosedForm::Poisson {
                herald: PoissonHerald::new(params)?,
                mean: mu * eta_s,
            },
            (PairStatistics::Thermal, _) => {
                ClosedForm::Thermal(ThermalHerald::new(mu, eta_h, eta_s, dark)?)
            }
            (PairStatistics::Poisson, FilterBranch::Signal) => {
                let f = filter.f();
                ClosedForm::Thermal(ThermalHerald::new(mu * f, eta_h, eta_s, nu_h(params, f))?)
            }
            (PairStatistics::Poisson, FilterBranch::Herald) => {
                ClosedForm::HeraldFiltered(HeraldFiltered::new(params, filter.f())?)
            }
        })
    }

    fn term(&self, n: u64) -> f64 {
        let p = match self {
            ClosedForm::Poisson { herald, mean } => {
                let base = poisson_pmf(*mean, n);
                if base == 0.0 {
                    0.0
                } else {
                    base * herald.xi(n)
                }
            }
            ClosedForm::Thermal(t) => t.term(n),
            ClosedForm::HeraldFiltered(h) => (0..=n)
                .map(|j| poisson_pmf(h.extra_mean, j) * h.kept.term(n - j))
                .sum(),
        };
        p.clamp(0.0, 1.0)
    }

    /// Upper bound on the mass strictly above `n`.
    fn tail_bound(&self, n: u64) -> f64 {
        match self {
            ClosedForm::Poisson { herald, mean } => {
                (herald.limit() * poisson_tail_bound(*mean, n + 1)).min(1.0)
            }
            ClosedForm::Thermal(t) => t.tail_bound(n),
            ClosedForm::HeraldFiltered(h) => {
                // X + Y > n forces X >= k or Y >= k with k = n/2 + 1
                let k = n / 2 + 1;
                (h.kept.tail_bound(k - 1) + poisson_tail_bound(h.extra_mean, k)).min(1.0)
            }
        }
    }
}

/// Heralded photon-number distribution at the signal output, truncated so that
/// the neglected mass is at most `tol`.
pub fn signal_pmf(
    stat: PairStatistics,
    params: &SourceParams,
    filter: &FilterSpec,
    tol: f64,
) -> Result<Pmf> {
    signal_pmf_with_min_terms(stat, params, filter, tol, 1)
}

/// [`signal_pmf`] carrying at least `min_terms` entries.
pub fn signal_pmf_with_min_terms(
    stat: PairStatistics,
    params: &SourceParams,
    filter: &FilterSpec,
    tol: f64,
    min_terms: usize,
) -> Result<Pmf> {
    let tol = check_tol(tol)?;
    let form = ClosedForm::new(stat, params, filter)?;
    let mut probs = Vec::new();
    loop {
        let n = probs.len() as u64;
        probs.push(form.term(n));
        let tail = form.tail_bound(n);
        if probs.len() >= min_terms && tail <= tol {
            return Pmf::new(probs, tail);
        }
        if probs.len() >= MAX_TERMS {
            return Err(Error::Truncation {
                max_terms: MAX_TERMS,
            });
        }
    }
}

/// Law of the signal output without conditioning on the herald, i.e. the
/// same configuration with a detector that always clicks.
pub fn unheralded_pmf(
    stat: PairStatistics,
    params: &SourceParams,
    filter: &FilterSpec,
    tol: f64,
) -> Result<Pmf> {
    let always = params.with_d_h(1.0)?;
    signal_pmf(stat, &always, filter, tol)
}

/// Large-`n` form of the herald-filtered law, in which only extraneous photons
/// remain: `(1 + mu f eta_h) / [(1 + mu f eta_s)(d_h + mu f eta_h)] * Poisson(mu eta_s (1-f); n)`.
pub fn asymptotic_tail_asymptote(params: &SourceParams, f: f64, n: u64) -> Result<f64> {
    FilterSpec::herald(f)?;
    let (mu, eta_h, eta_s, dark) = (params.mu(), params.eta_h(), params.eta_s(), params.d_h());
    let detect = mu * f * eta_h;
    if dark + detect == 0.0 {
        return Err(Error::NoHerald);
    }
    let prefactor = (1.0 + detect) / ((1.0 + mu * f * eta_s) * (dark + detect));
    Ok(prefactor * poisson_pmf(mu * eta_s * (1.0 - f), n))
}

/// Exact herald-filtered `p(n)` next to its large-`n` asymptote.
pub fn asymptotic_tail_check(params: &SourceParams, f: f64, n: u64) -> Result<(f64, f64)> {
    let filter = FilterSpec::herald(f)?;
    let exact = ClosedForm::new(PairStatistics::Poisson, params, &filter)?.term(n);
    Ok((exact, asymptotic_tail_asymptote(params, f, n)?))
}
