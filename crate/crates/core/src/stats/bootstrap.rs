//! Percentile bootstrap confidence intervals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StatsError;

pub const DEFAULT_RESAMPLES: usize = 10_000;
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: DEFAULT_RESAMPLES,
            confidence: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn with_seed(seed: u64) -> Self {
        BootstrapConfig {
            seed,
            ..Self::default()
        }
    }
}

/// A point estimate with its percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Estimate {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn scaled(self, k: f64) -> Self {
        Estimate {
            point: self.point * k,
            lo: self.lo * k,
            hi: self.hi * k,
            n: self.n,
        }
    }
}

impl std::fmt::Display for Estimate {
    /// `97.65 [96.03, 99.27]`
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} [{:.2}, {:.2}]", self.point, self.lo, self.hi)
    }
}

// Each chunk of resamples draws from its own ChaCha stream, so results do
// not depend on how rayon schedules the chunks.
fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn run_chunks<F>(cfg: &BootstrapConfig, stat: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = cfg.resamples.div_ceil(CHUNK);
    let mut out: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(cfg.seed, c);
            let len = CHUNK.min(cfg.resamples - c * CHUNK);
            (0..len).map(|_| stat(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let i = h.floor() as usize;
    let frac = h - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn interval(point: f64, n: usize, sorted: &[f64], confidence: f64) -> Estimate {
    let alpha = 1.0 - confidence;
    let lo = quantile(sorted, alpha / 2.0);
    let hi = quantile(sorted, 1.0 - alpha / 2.0);
    Estimate {
        point,
        lo: lo.min(point),
        hi: hi.max(point),
        n,
    }
}

fn check(cfg: &BootstrapConfig) -> Result<(), StatsError> {
    if cfg.resamples == 0 || !(0.0 < cfg.confidence && cfg.confidence < 1.0) {
        return Err(StatsError::InvalidParameter(
            "bootstrap needs resamples > 0 and 0 < confidence < 1".into(),
        ));
    }
    Ok(())
}

/// Bootstrap of a proportion from `successes` out of `n` 0/1 observations.
///
/// Resampling n Bernoulli outcomes with replacement and counting successes
/// is exactly a Binomial(n, successes/n) draw, which is what each resample
/// uses.
pub fn bootstrap_proportion(
    successes: usize,
    n: usize,
    cfg: &BootstrapConfig,
) -> Result<Estimate, StatsError> {
    if n == 0 {
        return Err(StatsError::EmptySelection("no observations".into()));
    }
    check(cfg)?;
    let p = successes as f64 / n as f64;
    let binom = Binomial::new(n as u64, p).expect("p is a valid probability");
    let stats = run_chunks(cfg, |rng| binom.sample(rng) as f64 / n as f64);
    Ok(interval(p, n, &stats, cfg.confidence))
}

/// Bootstrap of the mean of arbitrary values.
pub fn bootstrap_mean(values: &[f64], cfg: &BootstrapConfig) -> Result<Estimate, StatsError> {
    use rand::Rng;
    if values.is_empty() {
        return Err(StatsError::EmptySelection("no observations".into()));
    }
    check(cfg)?;
    let n = values.len();
    let point = values.iter().sum::<f64>() / n as f64;
    let stats = run_chunks(cfg, |rng| {
        let mut s = 0.0;
        for _ in 0..n {
            s += values[rng.random_range(0..n)];
        }
        s / n as f64
    });
    Ok(interval(point, n, &stats, cfg.confidence))
}
