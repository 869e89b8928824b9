//! Validated domain types shared by every module.
//!
//! All types are immutable values. Constructors reject out-of-range fields, and
//! deserialization goes through the same constructors, so an invalid value can
//! never exist.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted transmitted mode fraction.
pub const MIN_FILTER_FRACTION: f64 = 1e-6;

/// Rounding slack allowed above 1 when summing a [`Pmf`].
pub const ROUNDING_SLACK: f64 = 1e-12;

fn check_probability(field: &'static str, value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Validation {
            field,
            value,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(value)
}

/// Physical parameters of one heralded source.
///
/// * `mu`: mean number of pairs per time bin.
/// * `eta_h`: heralding-branch transmission, detector efficiency included.
/// * `eta_s`: signal-branch transmission.
/// * `d_h`: dark-count probability per time bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSourceParams")]
pub struct SourceParams {
    mu: f64,
    eta_h: f64,
    eta_s: f64,
    d_h: f64,
}

#[derive(Deserialize)]
struct RawSourceParams {
    mu: f64,
    eta_h: f64,
    eta_s: f64,
    d_h: f64,
}

impl TryFrom<RawSourceParams> for SourceParams {
    type Error = Error;

    fn try_from(raw: RawSourceParams) -> Result<Self> {
        SourceParams::new(raw.mu, raw.eta_h, raw.eta_s, raw.d_h)
    }
}

impl SourceParams {
    pub fn new(mu: f64, eta_h: f64, eta_s: f64, d_h: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::Validation {
                field: "mu",
                value: mu,
                reason: "must be finite and non-negative",
            });
        }
        Ok(SourceParams {
            mu,
            eta_h: check_probability("eta_h", eta_h)?,
            eta_s: check_probability("eta_s", eta_s)?,
            d_h: check_probability("d_h", d_h)?,
        })
    }

    /// Re-checks every range invariant and hands the value back unchanged.
    pub fn validate(self) -> Result<Self> {
        SourceParams::new(self.mu, self.eta_h, self.eta_s, self.d_h)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta_h(&self) -> f64 {
        self.eta_h
    }

    pub fn eta_s(&self) -> f64 {
        self.eta_s
    }

    pub fn d_h(&self) -> f64 {
        self.d_h
    }

    pub fn with_mu(self, mu: f64) -> Result<Self> {
        SourceParams::new(mu, self.eta_h, self.eta_s, self.d_h)
    }

    pub fn with_eta_h(self, eta_h: f64) -> Result<Self> {
        SourceParams::new(self.mu, eta_h, self.eta_s, self.d_h)
    }

    pub fn with_eta_s(self, eta_s: f64) -> Result<Self> {
        SourceParams::new(self.mu, self.eta_h, eta_s, self.d_h)
    }

    pub fn with_d_h(self, d_h: f64) -> Result<Self> {
        SourceParams::new(self.mu, self.eta_h, self.eta_s, d_h)
    }
}

/// Law of the number of pairs emitted per time bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatistics {
    /// Multimode source: `P(N) = e^-mu mu^N / N!`.
    Poisson,
    /// Single-mode (Bose-Einstein) source: `P(N) = mu^N / (1 + mu)^(N+1)`.
    Thermal,
}

impl PairStatistics {
    pub fn as_str(self) -> &'static str {
        match self {
            PairStatistics::Poisson => "poisson",
            PairStatistics::Thermal => "thermal",
        }
    }
}

impl fmt::Display for PairStatistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairStatistics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" => Ok(PairStatistics::Poisson),
            "thermal" | "bose-einstein" => Ok(PairStatistics::Thermal),
            other => Err(Error::Config(format!("unknown pair statistics {other:?}"))),
        }
    }
}

/// Which branch carries the single-mode filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterBranch {
    None,
    Signal,
    Herald,
}

impl FilterBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterBranch::None => "none",
            FilterBranch::Signal => "signal",
            FilterBranch::Herald => "herald",
        }
    }
}

impl fmt::Display for FilterBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterBranch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(FilterBranch::None),
            "signal" => Ok(FilterBranch::Signal),
            "herald" | "heralding" => Ok(FilterBranch::Herald),
            other => Err(Error::Config(format!("unknown filter branch {other:?}"))),
        }
    }
}

/// A mode filter on one branch, keeping fraction `f` of the pairs in a single
/// thermal mode. `f` is ignored when `branch` is [`FilterBranch::None`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFilterSpec")]
pub struct FilterSpec {
    branch: FilterBranch,
    f: f64,
}

#[derive(Deserialize)]
struct RawFilterSpec {
    branch: FilterBranch,
    f: f64,
}

impl TryFrom<RawFilterSpec> for FilterSpec {
    type Error = Error;

    fn try_from(raw: RawFilterSpec) -> Result<Self> {
        FilterSpec::new(raw.branch, raw.f)
    }
}

impl FilterSpec {
    pub fn new(branch: FilterBranch, f: f64) -> Result<Self> {
        if !(MIN_FILTER_FRACTION..=1.0).contains(&f) {
            return Err(Error::Validation {
                field: "f",
                value: f,
                reason: "must lie in [1e-6, 1]",
            });
        }
        Ok(FilterSpec { branch, f })
    }

    pub fn none() -> Self {
        FilterSpec {
            branch: FilterBranch::None,
            f: 1.0,
        }
    }

    pub fn signal(f: f64) -> Result<Self> {
        FilterSpec::new(FilterBranch::Signal, f)
    }

    pub fn herald(f: f64) -> Result<Self> {
        FilterSpec::new(FilterBranch::Herald, f)
    }

    pub fn branch(&self) -> FilterBranch {
        self.branch
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn with_f(self, f: f64) -> Result<Self> {
        FilterSpec::new(self.branch, f)
    }

    /// Filtering is derived only for a multimode (Poisson) source.
    pub fn check_statistics(&self, stat: PairStatistics) -> Result<()> {
        if self.branch != FilterBranch::None && stat != PairStatistics::Poisson {
            return Err(Error::FilterRequiresPoisson);
        }
        Ok(())
    }
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec::none()
    }
}

/// Canonical flat record for a source configuration:
/// `mu, eta_h, eta_s, d_h, filter_branch, f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub mu: f64,
    pub eta_h: f64,
    pub eta_s: f64,
    pub d_h: f64,
    pub filter_branch: FilterBranch,
    pub f: f64,
}

impl SourceRecord {
    pub const KEYS: [&'static str; 6] = ["mu", "eta_h", "eta_s", "d_h", "filter_branch", "f"];

    pub fn from_parts(params: &SourceParams, filter: &FilterSpec) -> Self {
        SourceRecord {
            mu: params.mu,
            eta_h: params.eta_h,
            eta_s: params.eta_s,
            d_h: params.d_h,
            filter_branch: filter.branch,
            f: filter.f,
        }
    }

    pub fn into_parts(self) -> Result<(SourceParams, FilterSpec)> {
        Ok((
            SourceParams::new(self.mu, self.eta_h, self.eta_s, self.d_h)?,
            FilterSpec::new(self.filter_branch, self.f)?,
        ))
    }

    /// `key=value` lines in canonical key order. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn to_key_values(&self) -> String {
        format!(
            "mu={}\neta_h={}\neta_s={}\nd_h={}\nfilter_branch={}\nf={}\n",
            self.mu, self.eta_h, self.eta_s, self.d_h, self.filter_branch, self.f
        )
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        let get = |key: &str| {
            map.get(key)
                .ok_or_else(|| Error::Config(format!("missing key {key:?}")))
        };
        let num = |key: &'static str| -> Result<f64> { parse_f64(key, get(key)?) };
        let record = SourceRecord {
            mu: num("mu")?,
            eta_h: num("eta_h")?,
            eta_s: num("eta_s")?,
            d_h: num("d_h")?,
            filter_branch: get("filter_branch")?.parse()?,
            f: num("f")?,
        };
        // validate before handing out
        record.into_parts()?;
        Ok(record)
    }
}

pub(crate) fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?} as a number")))
}

/// Parses a flat `key = value` text. Blank lines and lines starting with `#`
/// are skipped; a repeated key is an error.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key=value, got {line:?}",
                lineno + 1
            ))
        })?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {key:?}",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

/// Truncated photon-number distribution `p(0..=n_max)` with an upper bound on
/// the probability mass lying beyond `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf")]
pub struct Pmf {
    probs: Vec<f64>,
    tail_bound: f64,
}

#[derive(Deserialize)]
struct RawPmf {
    probs: Vec<f64>,
    tail_bound: f64,
}

impl TryFrom<RawPmf> for Pmf {
    type Error = Error;

    fn try_from(raw: RawPmf) -> Result<Self> {
        Pmf::new(raw.probs, raw.tail_bound)
    }
}

impl Pmf {
    pub fn new(probs: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Config("a pmf needs at least one term".into()));
        }
        if !(tail_bound.is_finite() && (0.0..=1.0).contains(&tail_bound)) {
            return Err(Error::Validation {
                field: "tail_bound",
                value: tail_bound,
                reason: "must lie in [0, 1]",
            });
        }
        for &p in &probs {
            check_probability("p(n)", p)?;
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + ROUNDING_SLACK || total < 1.0 - tail_bound - ROUNDING_SLACK {
            return Err(Error::Validation {
                field: "sum p(n)",
                value: total,
                reason: "inconsistent with the stated tail bound",
            });
        }
        Ok(Pmf { probs, tail_bound })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `p(n)`, zero past the truncation point.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `sum_n n^k p(n)` in falling-factorial form: returns `(<n>, <n(n-1)>)`.
    pub fn factorial_moments(&self) -> (f64, f64) {
        self.probs
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(m1, m2), (n, &p)| {
                let n = n as f64;
                (m1 + n * p, m2 + n * (n - 1.0) * p)
            })
    }

    pub fn mean(&self) -> f64 {
        self.factorial_moments().0
    }
}

/// First two moments of a photon-number law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    /// `variance / mean`, undefined for the vacuum.
    pub fano: Option<f64>,
    /// Zero-delay `g2 = <n(n-1)> / <n>^2`, undefined for the vacuum.
    pub g2: Option<f64>,
}

impl MomentSummary {
    /// Builds the summary from `<n>` and `<n(n-1)>`.
    pub fn from_factorial_moments(mean: f64, second_factorial: f64) -> Self {
        let variance = (second_factorial + mean - mean * mean).max(0.0);
        let (fano, g2) = if mean > 0.0 {
            (
                Some(variance / mean),
                Some(second_factorial / (mean * mean)),
            )
        } else {
            (None, None)
        };
        MomentSummary {
            mean,
            variance,
            fano,
            g2,
        }
    }

    pub fn from_mean_variance(mean: f64, variance: f64) -> Self {
        let variance = variance.max(0.0);
        let (fano, g2) = if mean > 0.0 {
            (
                Some(variance / mean),
                Some((variance - mean + mean * mean) / (mean * mean)),
            )
        } else {
            (None, None)
        };
        MomentSummary {
            mean,
            variance,
            fano,
            g2,
        }
    }
}

/// Everything needed to evaluate one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub stat: PairStatistics,
    pub params: SourceParams,
    pub filter: FilterSpec,
}

impl Scenario {
    pub fn new(stat: PairStatistics, params: SourceParams, filter: FilterSpec) -> Result<Self> {
        filter.check_statistics(stat)?;
        Ok(Scenario {
            stat,
            params,
            filter,
        })
    }

    pub fn unfiltered(stat: PairStatistics, params: SourceParams) -> Self {
        Scenario {
            stat,
            params,
            filter: FilterSpec::none(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_reference_and_boundary_params() {
        assert!(SourceParams::new(0.01, 0.5, 0.5, 1e-4).is_ok());
        assert!(SourceParams::new(0.0, 1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn rejects_out_of_range_and_names_field() {
        match SourceParams::new(0.01, 1.2, 0.5, 1e-4) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "eta_h"),
            other => panic!("expected validation error, got {other:?}"),
        }
        for (mu, eh, es, d, name) in [
            (-1e-3, 0.5, 0.5, 0.0, "mu"),
            (f64::NAN, 0.5, 0.5, 0.0, "mu"),
            (f64::INFINITY, 0.5, 0.5, 0.0, "mu"),
            (0.1, 0.5, -0.1, 0.0, "eta_s"),
            (0.1, 0.5, 0.5, 1.5, "d_h"),
            (0.1, f64::NAN, 0.5, 0.0, "eta_h"),
        ] {
            match SourceParams::new(mu, eh, es, d) {
                Err(Error::Validation { field, .. }) => assert_eq!(field, name),
                other => panic!("expected error on {name}, got {other:?}"),
            }
        }
    }

    #[test]
    fn filter_fraction_bounds() {
        assert!(FilterSpec::herald(1.0).is_ok());
        assert!(FilterSpec::herald(1e-6).is_ok());
        assert!(FilterSpec::herald(0.0).is_err());
        assert!(FilterSpec::signal(5e-7).is_err());
        assert!(FilterSpec::signal(1.01).is_err());
    }

    #[test]
    fn thermal_source_cannot_be_filtered() {
        let p = SourceParams::new(0.01, 0.5, 0.5, 1e-4).unwrap();
        let err = Scenario::new(PairStatistics::Thermal, p, FilterSpec::herald(0.5).unwrap());
        assert_eq!(err.unwrap_err(), Error::FilterRequiresPoisson);
        assert!(Scenario::new(PairStatistics::Thermal, p, FilterSpec::none()).is_ok());
    }

    #[test]
    fn deserialization_enforces_invariants() {
        let bad = r#"{"mu":0.1,"eta_h":2.0,"eta_s":0.5,"d_h":0.0}"#;
        assert!(serde_json::from_str::<SourceParams>(bad).is_err());
        let bad_pmf = r#"{"probs":[0.5,0.1],"tail_bound":1e-12}"#;
        assert!(serde_json::from_str::<Pmf>(bad_pmf).is_err());
    }

    #[test]
    fn key_value_record_parses() {
        let text =
            "# comment\nmu = 0.01\neta_h=0.5\neta_s=0.5\nd_h=1e-4\nfilter_branch=herald\nf=0.1\n";
        let rec = SourceRecord::from_key_values(text).unwrap();
        assert_eq!(rec.filter_branch, FilterBranch::Herald);
        assert_eq!(rec.d_h, 1e-4);
        assert!(SourceRecord::from_key_values("mu=1\nmu=2").is_err());
        assert!(SourceRecord::from_key_values("mu=1\neta_h=0.5").is_err());
    }

    #[test]
    fn pmf_rejects_inconsistent_mass() {
        assert!(Pmf::new(vec![0.5, 0.5], 0.0).is_ok());
        assert!(Pmf::new(vec![0.5, 0.49], 0.0).is_err());
        assert!(Pmf::new(vec![0.5, 0.49], 0.02).is_ok());
        assert!(Pmf::new(vec![0.6, 0.5], 0.0).is_err());
        assert!(Pmf::new(vec![], 0.0).is_err());
    }

    #[test]
    fn moment_summary_of_vacuum_is_undefined() {
        let m = MomentSummary::from_factorial_moments(0.0, 0.0);
        assert_eq!(m.variance, 0.0);
        assert!(m.fano.is_none() && m.g2.is_none());
    }
}
