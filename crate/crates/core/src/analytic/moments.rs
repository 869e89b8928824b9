use super::click_probability;
use crate::error::{Error, Result};
use crate::model::{MomentSummary, Pmf, SourceParams};

/// `gamma = (1-d) e^{-mu eta_h} / [1 - (1-d) e^{-mu eta_h}]` for a heralded
/// Poisson source.
pub fn gamma(params: &SourceParams) -> Result<f64> {
    let miss = click_probability(params.d_h(), -params.mu() * params.eta_h());
    if miss == 0.0 {
        return Err(Error::NoHerald);
    }
    Ok((1.0 - params.d_h()) * (-params.mu() * params.eta_h()).exp() / miss)
}

/// Mean and variance of the heralded, unfiltered Poisson source:
/// `<n> = mu eta_s (1 + gamma eta_h)` and
/// `var = mu eta_s {1 + gamma eta_h [1 - mu eta_s eta_h (1 + gamma)]}`.
pub fn moments_closed_form(params: &SourceParams) -> Result<MomentSummary> {
    let g = gamma(params)?;
    let m = params.mu() * params.eta_s();
    let eta_h = params.eta_h();
    let mean = m * (1.0 + g * eta_h);
    let variance = m * (1.0 + g * eta_h * (1.0 - m * eta_h * (1.0 + g)));
    Ok(MomentSummary::from_mean_variance(mean, variance))
}

pub fn moments_from_pmf(pmf: &Pmf) -> MomentSummary {
    let (mean, second) = pmf.factorial_moments();
    MomentSummary::from_factorial_moments(mean, second)
}

/// `g2(0) = <n(n-1)> / <n>^2` of a truncated law.
pub fn g2_from_pmf(pmf: &Pmf) -> Result<f64> {
    let (mean, second) = pmf.factorial_moments();
    if mean <= 0.0 {
        return Err(Error::ZeroMean);
    }
    Ok(second / (mean * mean))
}
