//! Trial-by-trial simulation of the heralded source: draw pairs, lose photons
//! on each arm, fire the threshold detector, keep the heralded bins.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`). Trials are split into
//! fixed blocks of [`BLOCK_TRIALS`]; block `b` uses the generator seeded with
//! `seed` on stream `b`. Blocks are independent of how many worker threads
//! run them, so estimates replay bit for bit on any machine and thread count.
//! Changing the generator or block size changes every published estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{FilterBranch, FilterSpec, PairStatistics, SourceParams};

pub const BLOCK_TRIALS: u64 = 65_536;
pub const DEFAULT_N_CAP: usize = 64;
pub const MIN_N_CAP: usize = 8;

/// Above this mean, Poisson draws use `rand_distr` instead of inversion.
const INVERSION_MAX_MEAN: f64 = 10.0;
/// Above this count, thinning uses one binomial draw instead of per-photon coins.
const BERNOULLI_MAX: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub params: SourceParams,
    pub stat: PairStatistics,
    pub filter: FilterSpec,
    pub trials: u64,
    pub seed: u64,
    /// Signal counts at or above this value share the last histogram bin.
    pub n_cap: usize,
}

impl McConfig {
    pub fn new(
        params: SourceParams,
        stat: PairStatistics,
        filter: FilterSpec,
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        McConfig {
            params,
            stat,
            filter,
            trials,
            seed,
            n_cap: DEFAULT_N_CAP,
        }
        .validate()
    }

    pub fn with_n_cap(mut self, n_cap: usize) -> Result<Self> {
        self.n_cap = n_cap;
        self.validate()
    }

    pub fn validate(self) -> Result<Self> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_cap < MIN_N_CAP {
            return Err(Error::Config(format!(
                "n_cap must be at least {MIN_N_CAP}, got {}",
                self.n_cap
            )));
        }
        self.filter.check_statistics(self.stat)?;
        self.params.validate()?;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Normalized histogram of signal counts over heralded trials, `0..=n_cap`.
    pub pmf_hat: Vec<f64>,
    /// `sqrt(p(1-p)/K)` per bin, `K` heralded trials.
    pub stderr: Vec<f64>,
    pub herald_rate: f64,
    pub trials_used: u64,
    pub heralded: u64,
    /// Fraction of heralded trials clamped into the `n_cap` bin.
    pub clamped_mass: f64,
}

/// Raw counts from a run, mergeable across blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub counts: Vec<u64>,
    pub trials: u64,
}

impl Tally {
    pub fn new(n_cap: usize) -> Self {
        Tally {
            counts: vec![0; n_cap + 1],
            trials: 0,
        }
    }

    pub fn heralded(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(mut self, other: &Tally) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.trials += other.trials;
        self
    }
}

fn poisson_draw<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean == 0.0 {
        return 0;
    }
    if mean >= INVERSION_MAX_MEAN {
        return Poisson::new(mean)
            .expect("positive finite mean")
            .sample(rng) as u64;
    }
    let u: f64 = rng.random();
    let mut k = 0;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u >= cdf {
        k += 1;
        p *= mean / k as f64;
        let next = cdf + p;
        if next == cdf {
            // u sits in the rounding gap at the top of the cdf
            break;
        }
        cdf = next;
    }
    k
}

/// Bose-Einstein count `P(N) = mean^N / (1+mean)^(N+1)` by inverting the
/// geometric cdf.
fn thermal_draw<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean == 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let ln_q = mean.ln() - mean.ln_1p();
    ((-u).ln_1p() / ln_q).floor() as u64
}

fn pairs_draw<R: Rng>(rng: &mut R, stat: PairStatistics, mean: f64) -> u64 {
    match stat {
        PairStatistics::Poisson => poisson_draw(rng, mean),
        PairStatistics::Thermal => thermal_draw(rng, mean),
    }
}

fn thin<R: Rng>(rng: &mut R, n: u64, eta: f64) -> u64 {
    if n == 0 || eta == 0.0 {
        return 0;
    }
    if eta == 1.0 {
        return n;
    }
    if n <= BERNOULLI_MAX {
        (0..n).filter(|_| rng.random::<f64>() < eta).count() as u64
    } else {
        rand_distr::Binomial::new(n, eta)
            .expect("eta in (0,1)")
            .sample(rng)
    }
}

fn bernoulli<R: Rng>(rng: &mut R, p: f64) -> bool {
    if p == 0.0 {
        false
    } else if p == 1.0 {
        true
    } else {
        rng.random::<f64>() < p
    }
}

/// One time bin. Returns the signal count when the herald fires.
fn trial<R: Rng>(rng: &mut R, config: &McConfig) -> Option<u64> {
    let p = &config.params;
    let f = config.filter.f();
    let (herald_side, signal_side) = match config.filter.branch() {
        FilterBranch::None => {
            let pairs = pairs_draw(rng, config.stat, p.mu());
            (thin(rng, pairs, p.eta_h()), thin(rng, pairs, p.eta_s()))
        }
        branch => {
            let good = thermal_draw(rng, p.mu() * f);
            let extra = poisson_draw(rng, p.mu() * (1.0 - f));
            let h_good = thin(rng, good, p.eta_h());
            let s_good = thin(rng, good, p.eta_s());
            if branch == FilterBranch::Herald {
                (h_good, s_good + thin(rng, extra, p.eta_s()))
            } else {
                (h_good + thin(rng, extra, p.eta_h()), s_good)
            }
        }
    };
    let dark = bernoulli(rng, p.d_h());
    (herald_side > 0 || dark).then_some(signal_side)
}

/// Runs block `index` of a configuration: trials
/// `index * BLOCK_TRIALS .. min((index + 1) * BLOCK_TRIALS, trials)`.
pub fn simulate_block(config: &McConfig, index: u64) -> Tally {
    let start = index * BLOCK_TRIALS;
    let len = config.trials.saturating_sub(start).min(BLOCK_TRIALS);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let mut tally = Tally::new(config.n_cap);
    for _ in 0..len {
        if let Some(n) = trial(&mut rng, config) {
            tally.counts[(n as usize).min(config.n_cap)] += 1;
        }
    }
    tally.trials = len;
    tally
}

pub fn block_count(trials: u64) -> u64 {
    trials.div_ceil(BLOCK_TRIALS)
}

/// Every block of the configuration, merged. Runs on the current rayon pool.
pub fn simulate_tally(config: &McConfig) -> Result<Tally> {
    let config = config.validate()?;
    Ok((0..block_count(config.trials))
        .into_par_iter()
        .map(|b| simulate_block(&config, b))
        .reduce(|| Tally::new(config.n_cap), |a, b| a.merge(&b)))
}

impl McEstimate {
    pub fn from_tally(tally: &Tally) -> Result<Self> {
        let heralded = tally.heralded();
        let herald_rate = heralded as f64 / tally.trials.max(1) as f64;
        if heralded == 0 {
            return Err(Error::NoHeraldSamples {
                trials: tally.trials,
                herald_rate,
            });
        }
        let k = heralded as f64;
        let pmf_hat: Vec<f64> = tally.counts.iter().map(|&c| c as f64 / k).collect();
        let stderr = pmf_hat.iter().map(|p| (p * (1.0 - p) / k).sqrt()).collect();
        Ok(McEstimate {
            clamped_mass: *pmf_hat.last().expect("n_cap >= 8"),
            pmf_hat,
            stderr,
            herald_rate,
            trials_used: tally.trials,
            heralded,
        })
    }

    pub fn get(&self, n: usize) -> f64 {
        self.pmf_hat.get(n).copied().unwrap_or(0.0)
    }

    /// Largest deviation from a reference law in standard-normal units, over
    /// bins with `p(n) >= min_p`, and the bin where it occurs.
    ///
    /// Bins with `K p (1-p) >= 9` use `|p_hat - p| / sqrt(p(1-p)/K)`, the
    /// scale taken from the reference so an empty bin still has one. Sparser
    /// bins use the exact binomial tail of the observed count, mapped to the
    /// normal quantile with the same one-sided probability.
    pub fn worst_z(&self, reference: &[f64], min_p: f64) -> (f64, usize) {
        let k = self.heralded as f64;
        let normal = Normal::standard();
        let mut worst = (0.0, 0);
        for (n, &p) in reference.iter().enumerate().take(self.pmf_hat.len() - 1) {
            if p < min_p {
                continue;
            }
            let z = if p >= 1.0 {
                if self.pmf_hat[n] == 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else if k * p * (1.0 - p) >= 9.0 {
                (self.pmf_hat[n] - p).abs() / (p * (1.0 - p) / k).sqrt()
            } else {
                let law = Binomial::new(p, self.heralded).expect("p in (0,1)");
                let count = (self.pmf_hat[n] * k).round() as u64;
                let expected = k * p;
                // probability of a count at least this far out on its side
                let tail = if count == 0 || (count as f64) < expected {
                    law.cdf(count)
                } else {
                    law.sf(count - 1)
                };
                normal.inverse_cdf(1.0 - tail.min(0.5)).max(0.0)
            };
            if z > worst.0 {
                worst = (z, n);
            }
        }
        worst
    }
}

/// Empirical heralded photon-number law of the configuration.
pub fn simulate(config: &McConfig) -> Result<McEstimate> {
    McEstimate::from_tally(&simulate_tally(config)?)
}

/// Fraction of bins with a herald and its binomial standard error.
pub fn herald_rate_estimate(config: &McConfig) -> Result<(f64, f64)> {
    let tally = simulate_tally(config)?;
    let t = tally.trials as f64;
    let rate = tally.heralded() as f64 / t;
    Ok((rate, (rate * (1.0 - rate) / t).sqrt()))
}
