//! Monte Carlo estimates of maximal tails and of the iterated-logarithm
//! statistic, and the block series behind the almost-sure bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::processes::{PathSampler, ProcessSpec};
use crate::synthesis::MaximalCertificate;

pub const DEFAULT_LEVEL: f64 = 0.99;
pub const MIN_REPS: u64 = 100;
/// Smallest checkpoint: `ln ln 16 > 0`.
pub const MIN_CHECKPOINT: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n: u64,
    pub t: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reps: u64,
    /// Paths with `M(1,n) > t`.
    pub hits: u64,
    pub level: f64,
}

impl TailEstimate {
    pub fn from_counts(n: u64, t: f64, hits: u64, reps: u64, level: f64) -> Result<Self> {
        let (ci_low, ci_high) = clopper_pearson(hits, reps, level)?;
        Ok(TailEstimate {
            n,
            t,
            p_hat: hits as f64 / reps as f64,
            ci_low,
            ci_high,
            reps,
            hits,
            level,
        })
    }
}

/// Exact binomial interval for `hits` successes in `reps` trials.
pub fn clopper_pearson(hits: u64, reps: u64, level: f64) -> Result<(f64, f64)> {
    if reps == 0 || hits > reps {
        return Err(Error::domain(format!("need 0 <= hits <= reps and reps > 0, got {hits}/{reps}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("level must lie in (0, 1), got {level}")));
    }
    let tail = (1.0 - level) / 2.0;
    let (k, n) = (hits as f64, reps as f64);
    let p = k / n;
    let lo = if hits == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).expect("positive shapes").inverse_cdf(tail)
    };
    let hi = if hits == reps {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).expect("positive shapes").inverse_cdf(1.0 - tail)
    };
    Ok((lo.min(p), hi.max(p)))
}

fn check_reps(reps: u64) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::domain(format!("reps must be at least {MIN_REPS}, got {reps}")));
    }
    Ok(())
}

/// `P{M(1,n) > t}` for each `t`, all from the same paths.
pub fn estimate_max_tail(
    spec: &ProcessSpec,
    n: u64,
    ts: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<TailEstimate>> {
    estimate_max_tail_at(spec, n, ts, reps, seed, DEFAULT_LEVEL)
}

pub fn estimate_max_tail_at(
    spec: &ProcessSpec,
    n: u64,
    ts: &[f64],
    reps: u64,
    seed: u64,
    level: f64,
) -> Result<Vec<TailEstimate>> {
    spec.kind.validate()?;
    check_reps(reps)?;
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if let Some(t) = ts.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::domain(format!("t must be a finite nonnegative number, got {t}")));
    }
    let counts = (0..reps)
        .into_par_iter()
        .fold(
            || vec![0u64; ts.len()],
            |mut acc, rep| {
                let mut sampler = PathSampler::new(spec.kind, seed, rep);
                let mut s = 0.0f64;
                let mut m = 0.0f64;
                for _ in 0..n {
                    s += sampler.next_increment();
                    m = m.max(s.abs());
                }
                for (c, &t) in acc.iter_mut().zip(ts) {
                    *c += (m > t) as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; ts.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    ts.iter()
        .zip(counts)
        .map(|(&t, hits)| TailEstimate::from_counts(n, t, hits, reps, level))
        .collect()
}

/// Geometric checkpoints `ceil(lambda^r)` in `[16, n_max]`, deduplicated.
pub fn checkpoints(lambda: f64, n_max: u64) -> Result<Vec<u64>> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must exceed 1, got {lambda}")));
    }
    if n_max < MIN_CHECKPOINT {
        return Err(Error::domain(format!("n_max must be at least {MIN_CHECKPOINT}, got {n_max}")));
    }
    let mut out: Vec<u64> = Vec::new();
    let mut r = 0i32;
    loop {
        let m = lambda.powi(r).ceil();
        if m > n_max as f64 {
            break;
        }
        let m = m as u64;
        if m >= MIN_CHECKPOINT && out.last() != Some(&m) {
            out.push(m);
        }
        r += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LilPath {
    pub rep: u64,
    /// `max_r |S(1,m_r)| / sqrt(m_r ln ln m_r)`.
    pub stat: f64,
    /// Same with `max(S, 0)` in the numerator.
    pub onesided_stat: f64,
    pub y_value: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilRunResult {
    pub lambda: f64,
    pub n_max: u64,
    pub checkpoints: Vec<u64>,
    pub paths: Vec<LilPath>,
}

impl LilRunResult {
    /// Empirical quantile (nearest rank) of `stat` over the selected paths.
    pub fn quantile<F: Fn(&LilPath) -> bool>(&self, q: f64, select: F) -> Option<f64> {
        let mut xs: Vec<f64> = self.paths.iter().filter(|p| select(p)).map(|p| p.stat).collect();
        if xs.is_empty() {
            return None;
        }
        xs.sort_by(f64::total_cmp);
        let idx = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len()) - 1;
        Some(xs[idx])
    }
}

pub fn lil_run(spec: &ProcessSpec, n_max: u64, lambda: f64, reps: u64, seed: u64) -> Result<LilRunResult> {
    spec.kind.validate()?;
    if reps == 0 {
        return Err(Error::domain("reps must be positive"));
    }
    let cps = checkpoints(lambda, n_max)?;
    let norms: Vec<f64> = cps
        .iter()
        .map(|&m| (m as f64 * (m as f64).ln().ln()).sqrt())
        .collect();
    let last = *cps.last().expect("16 <= n_max gives a checkpoint");
    let paths = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut sampler = PathSampler::new(spec.kind, seed, rep);
            let mut s = 0.0f64;
            let (mut stat, mut onesided) = (0.0f64, 0.0f64);
            let mut next = 0;
            for j in 1..=last {
                s += sampler.next_increment();
                if j == cps[next] {
                    stat = stat.max(s.abs() / norms[next]);
                    onesided = onesided.max(s.max(0.0) / norms[next]);
                    next += 1;
                }
            }
            LilPath {
                rep,
                stat,
                onesided_stat: onesided,
                y_value: sampler.latent_y(),
            }
        })
        .collect();
    Ok(LilRunResult {
        lambda,
        n_max,
        checkpoints: cps,
        paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockTerm {
    pub r: u32,
    pub m_r: f64,
    /// `ln` of the term `C exp(-X / (m_r + b (X/c)^(gamma/2)))`,
    /// `X = m_{r+1} ln ln m_r`.
    pub ln_term: f64,
    /// `ln` of the partial sum from `r0` through `r`.
    pub ln_partial_sum: f64,
    /// `-ln(term / C) / (lambda ln r)`; NaN for `r <= 1`.
    pub exponent_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSeries {
    pub lambda: f64,
    pub r0: u32,
    pub terms: Vec<BlockTerm>,
}

impl BlockSeries {
    /// `ln(S_hi - S_lo)`, summed directly over `r` in `(lo, hi]`.
    pub fn ln_tail(&self, lo: u32, hi: u32) -> f64 {
        log_sum_exp(
            self.terms
                .iter()
                .filter(|t| t.r > lo && t.r <= hi)
                .map(|t| t.ln_term),
        )
    }

    pub fn term(&self, r: u32) -> Option<&BlockTerm> {
        self.terms.iter().find(|t| t.r == r)
    }
}

fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Terms and partial sums of the series summed over the blocks
/// `(m_r, m_{r+1}]`, `m_r = ceil(lambda^r)`, for `r` in `r0..=r_max`.
pub fn block_series(cert: &MaximalCertificate, lambda: f64, r0: u32, r_max: u32) -> Result<BlockSeries> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must exceed 1, got {lambda}")));
    }
    if r_max < r0 {
        return Err(Error::domain(format!("r_max = {r_max} is below r0 = {r0}")));
    }
    let m = |r: u32| lambda.powi(r as i32).ceil();
    if !(m(r0).ln().ln() > 0.0) {
        return Err(Error::domain(format!(
            "ln ln m_r0 must be positive; m_r0 = {} for r0 = {r0}",
            m(r0)
        )));
    }
    let p = &cert.params;
    let ln_c = cert.prefactor.ln();
    let mut terms = Vec::with_capacity((r_max - r0 + 1) as usize);
    let mut ln_sum = f64::NEG_INFINITY;
    for r in r0..=r_max {
        let (m_r, m_next) = (m(r), m(r + 1));
        let x = m_next * m_r.ln().ln();
        let exponent = x / (m_r + p.growth * (x / cert.c).powf(p.gamma / 2.0));
        let ln_term = ln_c - exponent;
        ln_sum = log_sum_exp([ln_sum, ln_term]);
        let exponent_ratio = if r <= 1 {
            f64::NAN
        } else {
            exponent / (lambda * (r as f64).ln())
        };
        terms.push(BlockTerm {
            r,
            m_r,
            ln_term,
            ln_partial_sum: ln_sum,
            exponent_ratio,
        });
    }
    Ok(BlockSeries { lambda, r0, terms })
}
