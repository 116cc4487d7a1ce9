//! Paired Fisher randomization test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{par_map_range, Exec};

#[derive(Debug, Clone, PartialEq)]
pub struct PairedScores {
    pub ids: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedScores {
    pub fn new(ids: Vec<String>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
        }
        if ids.len() != a.len() {
            return Err(Error::LengthMismatch { left: ids.len(), right: a.len() });
        }
        if a.is_empty() {
            return Err(Error::data("no paired scores"));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::data(format!("duplicate id {dup:?} in paired scores")));
        }
        Ok(PairedScores { ids, a, b })
    }

    /// Scores without ids, named by position.
    pub fn unnamed(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let ids = (0..a.len()).map(|i| i.to_string()).collect();
        Self::new(ids, a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigConfig {
    pub resamples: usize,
    pub seed: u64,
    pub exhaustive_limit: usize,
}

impl Default for SigConfig {
    fn default() -> Self {
        SigConfig { resamples: 10_000, seed: 0, exhaustive_limit: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigResult {
    pub n: usize,
    /// mean(a) - mean(b)
    pub statistic: f64,
    pub p: f64,
    pub method: Method,
    pub resamples: usize,
    pub seed: u64,
}

fn draw_seed(seed: u64, draw: u64) -> u64 {
    let mut z = seed ^ draw.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Sums are compared rather than means; the slack absorbs float rounding in
// sums that are equal in exact arithmetic.
fn at_least(sum: f64, observed: f64) -> bool {
    sum.abs() >= observed.abs() - 1e-9 * (1.0 + observed.abs())
}

/// Two-sided test of `mean(a) = mean(b)`. Each pair is swapped with
/// probability 1/2 under the null. Exhaustive over all swap patterns when
/// `n <= exhaustive_limit`, otherwise Monte Carlo counting the observed
/// assignment as one of the `resamples + 1` outcomes.
pub fn fisher_randomization(scores: &PairedScores, cfg: &SigConfig, exec: Exec) -> Result<SigResult> {
    if cfg.resamples == 0 {
        return Err(Error::config("resamples must be >= 1"));
    }
    let n = scores.a.len();
    let d: Vec<f64> = scores.a.iter().zip(&scores.b).map(|(x, y)| x - y).collect();
    let observed: f64 = d.iter().sum();
    let statistic = observed / n as f64;

    if n <= cfg.exhaustive_limit {
        // pairs with equal scores are unaffected by swapping
        let nz: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
        let m = nz.len();
        let total = 1u64 << m;
        let hits = par_map_range(exec, total.div_ceil(1 << 12) as usize, |chunk| {
            let lo = (chunk as u64) << 12;
            let hi = (lo + (1 << 12)).min(total);
            (lo..hi)
                .filter(|mask| {
                    let s: f64 = nz.iter().enumerate().map(|(i, x)| if mask >> i & 1 == 1 { -x } else { *x }).sum();
                    at_least(s, observed)
                })
                .count() as u64
        })
        .into_iter()
        .sum::<u64>();
        return Ok(SigResult {
            n,
            statistic,
            p: hits as f64 / total as f64,
            method: Method::Exhaustive,
            resamples: total as usize,
            seed: cfg.seed,
        });
    }

    let hits = par_map_range(exec, cfg.resamples, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(cfg.seed, r as u64));
        let s: f64 = d.iter().map(|x| if rng.random_bool(0.5) { -x } else { *x }).sum();
        at_least(s, observed)
    })
    .into_iter()
    .filter(|h| *h)
    .count();
    Ok(SigResult {
        n,
        statistic,
        p: (hits + 1) as f64 / (cfg.resamples + 1) as f64,
        method: Method::MonteCarlo,
        resamples: cfg.resamples,
        seed: cfg.seed,
    })
}
