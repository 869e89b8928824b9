//! Correcting factors `xi(n)`: the ratio between the heralded photon-number law
//! of the signal branch and the law it would have without conditioning.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::laguerre::laguerre;
use super::{click_probability, ln_factorial, ln_survival};
use crate::error::{Error, Result};
use crate::model::{FilterBranch, FilterSpec, PairStatistics, SourceParams};

/// Which correcting factor applies to a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum XiKind {
    PoissonUnfiltered,
    ThermalUnfiltered,
    SignalFiltered,
    HeraldFiltered,
}

impl XiKind {
    pub fn select(stat: PairStatistics, filter: &FilterSpec) -> Result<Self> {
        filter.check_statistics(stat)?;
        Ok(match (stat, filter.branch()) {
            (PairStatistics::Poisson, FilterBranch::None) => XiKind::PoissonUnfiltered,
            (PairStatistics::Thermal, FilterBranch::None) => XiKind::ThermalUnfiltered,
            (_, FilterBranch::Signal) => XiKind::SignalFiltered,
            (_, FilterBranch::Herald) => XiKind::HeraldFiltered,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            XiKind::PoissonUnfiltered => "poisson-unfiltered",
            XiKind::ThermalUnfiltered => "thermal-unfiltered",
            XiKind::SignalFiltered => "signal-filtered",
            XiKind::HeraldFiltered => "herald-filtered",
        }
    }

    fn branch(self) -> FilterBranch {
        match self {
            XiKind::PoissonUnfiltered | XiKind::ThermalUnfiltered => FilterBranch::None,
            XiKind::SignalFiltered => FilterBranch::Signal,
            XiKind::HeraldFiltered => FilterBranch::Herald,
        }
    }
}

impl fmt::Display for XiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Heralding of a single thermal mode of mean `mu` pairs.
///
/// `xi(n) = (1 + mu eta_h) / (dark + mu eta_h) * brace(n)` with
/// `brace(n) = 1 - (1-dark) (1-eta_h)^n (A/B)^(n+1)`, `A = 1 + mu eta_s` and
/// `B = 1 + mu (eta_s + eta_h - eta_s eta_h)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ThermalHerald {
    eta_h: f64,
    dark: f64,
    /// `ln(A/B) <= 0`
    ln_ratio: f64,
    /// `1 + mu eta_h`
    pref_num: f64,
    /// `dark + mu eta_h`
    pref_den: f64,
    /// `mu eta_s`, mean of the unconditioned signal law
    signal_mean: f64,
}

impl ThermalHerald {
    pub(crate) fn new(mu: f64, eta_h: f64, eta_s: f64, dark: f64) -> Result<Self> {
        let detect = mu * eta_h;
        if dark + detect == 0.0 {
            return Err(Error::NoHerald);
        }
        let signal_mean = mu * eta_s;
        Ok(ThermalHerald {
            eta_h,
            dark,
            ln_ratio: -(detect * (1.0 - eta_s) / (1.0 + signal_mean)).ln_1p(),
            pref_num: 1.0 + detect,
            pref_den: dark + detect,
            signal_mean,
        })
    }

    pub(crate) fn brace(&self, n: u64) -> f64 {
        click_probability(
            self.dark,
            ln_survival(n, self.eta_h) + (n + 1) as f64 * self.ln_ratio,
        )
    }

    pub(crate) fn xi(&self, n: u64) -> f64 {
        self.pref_num * self.brace(n) / self.pref_den
    }

    /// `lim xi(n)` as `n` grows.
    pub(crate) fn limit(&self) -> f64 {
        self.pref_num / self.pref_den
    }

    /// Unconditioned thermal law `r^n / (1 + m)` with `r = m / (1 + m)`.
    pub(crate) fn base(&self, n: u64) -> f64 {
        let m = self.signal_mean;
        if m == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        (n as f64 * (m.ln() - m.ln_1p())).exp() / (1.0 + m)
    }

    /// Heralded probability of `n` signal photons.
    pub(crate) fn term(&self, n: u64) -> f64 {
        let base = self.base(n);
        if base == 0.0 {
            0.0
        } else {
            base * self.xi(n)
        }
    }

    /// Bound on the heralded mass strictly above `n`: `limit * r^(n+1)`.
    pub(crate) fn tail_bound(&self, n: u64) -> f64 {
        let m = self.signal_mean;
        if m == 0.0 {
            return 0.0;
        }
        (self.limit() * ((n + 1) as f64 * (m.ln() - m.ln_1p())).exp()).min(1.0)
    }

    pub(crate) fn ln_ratio(&self) -> f64 {
        self.ln_ratio
    }
}

/// Heralding of a multimode (Poisson) source of mean `mu` pairs.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PoissonHerald {
    eta_h: f64,
    dark: f64,
    /// `-mu eta_h (1 - eta_s)`
    ln_extra: f64,
    denominator: f64,
}

impl PoissonHerald {
    pub(crate) fn new(params: &SourceParams) -> Result<Self> {
        let (mu, eta_h, eta_s, dark) = (params.mu(), params.eta_h(), params.eta_s(), params.d_h());
        let denominator = click_probability(dark, -mu * eta_h);
        if denominator == 0.0 {
            return Err(Error::NoHerald);
        }
        Ok(PoissonHerald {
            eta_h,
            dark,
            ln_extra: -mu * eta_h * (1.0 - eta_s),
            denominator,
        })
    }

    pub(crate) fn xi(&self, n: u64) -> f64 {
        click_probability(self.dark, ln_survival(n, self.eta_h) + self.ln_extra) / self.denominator
    }

    pub(crate) fn limit(&self) -> f64 {
        1.0 / self.denominator
    }
}

/// Effective dark-count probability of the herald when the signal branch is
/// filtered: photons paired with filtered-out signal photons still reach the
/// detector. `nu_h = 1 - (1 - d_h) exp(-mu eta_h (1 - f))`, never below `d_h`.
pub fn nu_h(params: &SourceParams, f: f64) -> f64 {
    click_probability(params.d_h(), -params.mu() * params.eta_h() * (1.0 - f))
}

/// Parameters of the herald-filtered model: the kept mode is thermal with mean
/// `mu f`, extraneous signal photons are Poisson with mean `mu eta_s (1 - f)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HeraldFiltered {
    pub(crate) kept: ThermalHerald,
    /// `b = mu eta_s (1 - f)`
    pub(crate) extra_mean: f64,
    /// `(1 + mu f eta_s)(1 - f) / f`
    pub(crate) y_kept: f64,
}

impl HeraldFiltered {
    pub(crate) fn new(params: &SourceParams, f: f64) -> Result<Self> {
        let (mu, eta_h, eta_s, dark) = (params.mu(), params.eta_h(), params.eta_s(), params.d_h());
        let kept = ThermalHerald::new(mu * f, eta_h, eta_s, dark)?;
        Ok(HeraldFiltered {
            kept,
            extra_mean: mu * eta_s * (1.0 - f),
            y_kept: (1.0 + mu * f * eta_s) * (1.0 - f) / f,
        })
    }

    /// `xi_h(n) = prefactor e^-b sum_{j<=n} y^j/j! brace(n-j)`: the herald
    /// correction when extraneous photons add independently to the kept ones.
    pub(crate) fn xi(&self, n: u64) -> Result<f64> {
        let mut term = 1.0;
        let mut sum = self.kept.brace(n);
        for j in 1..=n {
            term *= self.y_kept / j as f64;
            sum += term * self.kept.brace(n - j);
        }
        let xi = self.kept.limit() * (-self.extra_mean).exp() * sum;
        if !xi.is_finite() {
            return Err(Error::Overflow("xi_h"));
        }
        Ok(xi)
    }
}

fn check_kind(kind: XiKind, filter: &FilterSpec) -> Result<()> {
    if kind.branch() != filter.branch() {
        return Err(Error::KindMismatch {
            kind: kind.as_str(),
            branch: filter.branch().as_str(),
        });
    }
    Ok(())
}

/// Correcting factor `xi(n)` for the chosen configuration.
///
/// * Poisson: `[1 - (1-d)(1-eta_h)^n e^{-mu eta_h (1-eta_s)}] / [1 - (1-d) e^{-mu eta_h}]`.
/// * Thermal: `(1 + mu eta_h)/(d + mu eta_h) * brace(n)`.
/// * Signal-filtered: thermal form with `mu -> mu f` and `d -> nu_h`.
/// * Herald-filtered: thermal kept mode convolved with Poisson extraneous
///   photons (see [`xi_herald_laguerre`] for the Laguerre variant).
pub fn xi(kind: XiKind, n: u64, params: &SourceParams, filter: &FilterSpec) -> Result<f64> {
    check_kind(kind, filter)?;
    let (mu, eta_h, eta_s, dark) = (params.mu(), params.eta_h(), params.eta_s(), params.d_h());
    match kind {
        XiKind::PoissonUnfiltered => Ok(PoissonHerald::new(params)?.xi(n)),
        XiKind::ThermalUnfiltered => Ok(ThermalHerald::new(mu, eta_h, eta_s, dark)?.xi(n)),
        XiKind::SignalFiltered => {
            let f = filter.f();
            Ok(ThermalHerald::new(mu * f, eta_h, eta_s, nu_h(params, f))?.xi(n))
        }
        XiKind::HeraldFiltered => HeraldFiltered::new(params, filter.f())?.xi(n),
    }
}

/// Herald-filtered correcting factor written with Laguerre polynomials,
/// `prefactor e^-b {alpha_n - beta_n (1-d)(1-eta_h)^n (A/B)^(n+1)}` with
/// `alpha_n = L_n(-(1 + mu f eta_s)(1-f)/f)` and
/// `beta_n = L_n(-B (1-f) / (f (1-eta_h)))`.
///
/// This form weights each split of the `n` photons between kept and
/// extraneous pairs by `C(n, k)`, so the resulting `p(n)` does not sum to one
/// for `f < 1`; it agrees with [`herald_filter_binomial_convolution`] and
/// reduces to the thermal factor at `f = 1`.
///
/// [`herald_filter_binomial_convolution`]: super::herald_filter_binomial_convolution
pub fn xi_herald_laguerre(n: u64, params: &SourceParams, f: f64) -> Result<f64> {
    FilterSpec::herald(f)?;
    let model = HeraldFiltered::new(params, f)?;
    let kept = &model.kept;
    let scale = kept.limit() * (-model.extra_mean).exp();
    if n == 0 {
        return Ok(scale * kept.brace(0));
    }
    let order = usize::try_from(n).map_err(|_| Error::LaguerreOrder {
        order: usize::MAX,
        max: super::MAX_LAGUERRE_ORDER,
    })?;
    let (mu, eta_h, eta_s, dark) = (params.mu(), params.eta_h(), params.eta_s(), params.d_h());
    let alpha = laguerre(order, -model.y_kept)?;
    let b_poly = 1.0 + mu * f * (eta_s + eta_h - eta_s * eta_h);
    let z = b_poly * (1.0 - f) / f;
    let ratio_pow = ((n + 1) as f64 * kept.ln_ratio()).exp();
    let beta_scaled = if eta_h > 1.0 - 1e-6 {
        // (1-eta_h)^n beta_n = sum_k C(n,k) (1-eta_h)^(n-k) z^k / k!
        let ln_z = z.ln();
        let ln_n = ln_factorial(n);
        (0..=n)
            .map(|k| {
                if k > 0 && z == 0.0 {
                    return 0.0;
                }
                let zk = if k == 0 { 0.0 } else { k as f64 * ln_z };
                let ln_choose = ln_n - ln_factorial(k) - ln_factorial(n - k);
                (ln_choose - ln_factorial(k) + zk + ln_survival(n - k, eta_h)).exp()
            })
            .sum::<f64>()
    } else {
        ln_survival(n, eta_h).exp() * laguerre(order, -z / (1.0 - eta_h))?
    };
    let xi = scale * (alpha - (1.0 - dark) * ratio_pow * beta_scaled);
    if !xi.is_finite() {
        return Err(Error::Overflow("xi_h (Laguerre form)"));
    }
    Ok(xi)
}

/// `lim_{n -> inf} xi(n)` for the unfiltered factors.
pub fn xi_limit(kind: XiKind, params: &SourceParams) -> Result<f64> {
    let (mu, eta_h, eta_s, dark) = (params.mu(), params.eta_h(), params.eta_s(), params.d_h());
    match kind {
        XiKind::PoissonUnfiltered => Ok(PoissonHerald::new(params)?.limit()),
        XiKind::ThermalUnfiltered => Ok(ThermalHerald::new(mu, eta_h, eta_s, dark)?.limit()),
        other => Err(Error::KindMismatch {
            kind: other.as_str(),
            branch: FilterBranch::None.as_str(),
        }),
    }
}

/// Heralding gain `xi(1) / xi(0)` of an unfiltered source. As `mu -> 0` both
/// statistics tend to `1 - eta_h + eta_h / d_h`.
pub fn herald_gain_ratio(stat: PairStatistics, params: &SourceParams) -> Result<f64> {
    let none = FilterSpec::none();
    let kind = XiKind::select(stat, &none)?;
    let xi0 = xi(kind, 0, params, &none)?;
    if xi0 == 0.0 {
        return Err(Error::PerfectHerald);
    }
    Ok(xi(kind, 1, params, &none)? / xi0)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn baseline() -> SourceParams {
        SourceParams::new(0.01, 0.5, 0.5, 1e-4).unwrap()
    }

    fn none() -> FilterSpec {
        FilterSpec::none()
    }

    #[test]
    fn poisson_xi_reference_values() {
        let p = baseline();
        assert_relative_eq!(
            xi(XiKind::PoissonUnfiltered, 0, &p, &none()).unwrap(),
            0.510_441_646_720_690_37,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            xi(XiKind::PoissonUnfiltered, 1, &p, &none()).unwrap(),
            98.544_552_886_558_93,
            max_relative = 1e-13
        );
    }

    #[test]
    fn thermal_xi_reference_values() {
        let p = baseline();
        let expected = [
            0.508_636_695_372_938_26,
            99.027_588_904_990_41,
            148.164_833_059_166_87,
            172.672_490_813_483_17,
        ];
        for (n, want) in expected.iter().enumerate() {
            let got = xi(XiKind::ThermalUnfiltered, n as u64, &p, &none()).unwrap();
            assert_relative_eq!(got, *want, max_relative = 1e-12);
        }
        assert_relative_eq!(
            xi_limit(XiKind::ThermalUnfiltered, &p).unwrap(),
            1.005 / 0.0051,
            max_relative = 1e-14
        );
    }

    #[test]
    fn perfect_source_single_photon_factors() {
        for mu in [1e-3, 0.01, 0.1, 1.0] {
            let p = SourceParams::new(mu, 1.0, 1.0, 0.0).unwrap();
            assert_eq!(xi(XiKind::PoissonUnfiltered, 0, &p, &none()).unwrap(), 0.0);
            assert_eq!(xi(XiKind::ThermalUnfiltered, 0, &p, &none()).unwrap(), 0.0);
            assert_relative_eq!(
                xi(XiKind::PoissonUnfiltered, 1, &p, &none()).unwrap(),
                mu.exp() / mu.exp_m1(),
                max_relative = 1e-14
            );
            assert_relative_eq!(
                xi(XiKind::ThermalUnfiltered, 1, &p, &none()).unwrap(),
                (1.0 + mu) / mu,
                max_relative = 1e-14
            );
            assert_eq!(
                herald_gain_ratio(PairStatistics::Poisson, &p),
                Err(Error::PerfectHerald)
            );
        }
    }

    #[test]
    fn filtered_factors_reduce_to_thermal_at_full_transmission() {
        let p = baseline();
        for n in 0..=50 {
            let t = xi(XiKind::ThermalUnfiltered, n, &p, &none()).unwrap();
            let s = xi(
                XiKind::SignalFiltered,
                n,
                &p,
                &FilterSpec::signal(1.0).unwrap(),
            )
            .unwrap();
            let h = xi(
                XiKind::HeraldFiltered,
                n,
                &p,
                &FilterSpec::herald(1.0).unwrap(),
            )
            .unwrap();
            let l = xi_herald_laguerre(n, &p, 1.0).unwrap();
            for v in [s, h, l] {
                assert!((v - t).abs() <= 1e-12 * t.max(1.0), "n={n}: {v} vs {t}");
            }
        }
    }

    #[test]
    fn gain_ratio_matches_explicit_formulas() {
        let p = SourceParams::new(0.2, 0.3, 0.7, 2e-3).unwrap();
        let (mu, eh, es, d) = (0.2f64, 0.3f64, 0.7f64, 2e-3f64);
        let e = (-mu * eh * (1.0 - es)).exp();
        let poisson = (1.0 - (1.0 - d) * (1.0 - eh) * e) / (1.0 - (1.0 - d) * e);
        assert_relative_eq!(
            herald_gain_ratio(PairStatistics::Poisson, &p).unwrap(),
            poisson,
            max_relative = 1e-12
        );
        let s = es + eh - es * eh;
        // the squared factor is (1 + mu s)^2; squaring s alone does not match the series
        let b = 1.0 + mu * s;
        let thermal = b / (b * b) * (b * b - (1.0 - d) * (1.0 - eh) * (1.0 + mu * es).powi(2))
            / (b - (1.0 - d) * (1.0 + mu * es));
        assert_relative_eq!(
            herald_gain_ratio(PairStatistics::Thermal, &p).unwrap(),
            thermal,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gain_ratio_small_mu_limit() {
        let p = SourceParams::new(1e-12, 0.5, 0.5, 1e-4).unwrap();
        let limit = 1.0 - 0.5 + 0.5 / 1e-4;
        let g = herald_gain_ratio(PairStatistics::Poisson, &p).unwrap();
        assert_relative_eq!(g, 5_000.499_987_501_25, max_relative = 1e-12);
        assert!((g / limit - 1.0).abs() < 1e-6);
        let p9 = p.with_mu(1e-9).unwrap();
        let gp = herald_gain_ratio(PairStatistics::Poisson, &p9).unwrap();
        let gt = herald_gain_ratio(PairStatistics::Thermal, &p9).unwrap();
        assert!((gp / gt - 1.0).abs() < 1e-6);
    }

    #[test]
    fn blind_herald_carries_no_information() {
        let p = SourceParams::new(0.3, 0.0, 0.6, 1e-3).unwrap();
        assert_eq!(herald_gain_ratio(PairStatistics::Poisson, &p).unwrap(), 1.0);
        assert_eq!(herald_gain_ratio(PairStatistics::Thermal, &p).unwrap(), 1.0);
    }

    #[test]
    fn no_herald_is_reported() {
        let p = SourceParams::new(0.0, 0.5, 0.5, 0.0).unwrap();
        assert_eq!(
            xi_limit(XiKind::PoissonUnfiltered, &p),
            Err(Error::NoHerald)
        );
        assert_eq!(
            xi(XiKind::ThermalUnfiltered, 2, &p, &none()),
            Err(Error::NoHerald)
        );
    }

    #[test]
    fn limits_with_guaranteed_dark_count() {
        let p = SourceParams::new(0.4, 0.5, 0.5, 1.0).unwrap();
        assert_eq!(xi_limit(XiKind::PoissonUnfiltered, &p).unwrap(), 1.0);
        for n in 0..10 {
            assert_eq!(xi(XiKind::PoissonUnfiltered, n, &p, &none()).unwrap(), 1.0);
        }
    }

    #[test]
    fn kind_must_match_filter() {
        let p = baseline();
        let err = xi(
            XiKind::HeraldFiltered,
            1,
            &p,
            &FilterSpec::signal(0.5).unwrap(),
        );
        assert!(matches!(err, Err(Error::KindMismatch { .. })));
        assert!(xi_limit(XiKind::SignalFiltered, &p).is_err());
    }

    #[test]
    fn nu_h_dominates_dark_count() {
        let p = baseline();
        assert_eq!(nu_h(&p, 1.0), p.d_h());
        assert!(nu_h(&p, 0.1) > p.d_h());
        let blind = p.with_eta_h(0.0).unwrap();
        assert_eq!(nu_h(&blind, 0.1), p.d_h());
    }

    #[test]
    fn laguerre_form_at_unit_herald_efficiency() {
        // near eta_h = 1 both code paths must meet
        let f = 0.3;
        let near = SourceParams::new(0.05, 1.0 - 2e-6, 0.6, 1e-4).unwrap();
        let nearer = SourceParams::new(0.05, 1.0 - 5e-7, 0.6, 1e-4).unwrap();
        let exact = SourceParams::new(0.05, 1.0, 0.6, 1e-4).unwrap();
        for n in 0..8 {
            let a = xi_herald_laguerre(n, &near, f).unwrap();
            let b = xi_herald_laguerre(n, &nearer, f).unwrap();
            let c = xi_herald_laguerre(n, &exact, f).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-5);
            assert_relative_eq!(b, c, max_relative = 1e-5);
        }
    }
}
