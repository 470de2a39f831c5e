//! Exact maximal and endpoint tails for walks with `{-1, +1}` increments,
//! plus the closed-form endpoint tail of the YZ mixture.
//!
//! For an integer walk, `|S| > t` iff `|S| >= floor(t) + 1`, which is the
//! absorption level used throughout.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::processes::{ProcessKind, ProcessSpec};

/// Largest `n` accepted by the dynamic programs.
pub const MAX_DP_N: u64 = 10_000;
/// Largest `n` accepted by full path enumeration.
pub const MAX_ENUMERATION_N: u64 = 20;
/// Rademacher walks up to this length are counted exactly in `u128`.
pub const MAX_DYADIC_N: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Enumeration,
    #[serde(rename = "dp")]
    DP,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactTail {
    pub n: u64,
    pub t: f64,
    pub prob: f64,
    pub method: Method,
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("t must be a finite nonnegative number, got {t}")));
    }
    Ok(())
}

fn check_n(n: u64, max: u64) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::domain(format!("n must lie in [1, {max}], got {n}")));
    }
    Ok(())
}

/// Absorption level `floor(t) + 1`, capped just above any reachable sum.
fn level(t: f64, n: u64) -> u64 {
    if t >= n as f64 {
        n + 1
    } else {
        t.floor() as u64 + 1
    }
}

/// One-step transition of a `{-1, +1}` walk.
#[derive(Clone, Copy)]
enum Walk {
    Iid,
    /// Stay probability of the two-state chain.
    Markov(f64),
    Zero,
}

fn walk_of(spec: &ProcessSpec) -> Result<Walk> {
    match spec.kind {
        ProcessKind::RademacherIID => Ok(Walk::Iid),
        ProcessKind::TwoStateMarkov { rho } => Ok(Walk::Markov(rho)),
        ProcessKind::Zero => Ok(Walk::Zero),
        _ => Err(Error::UnsupportedSpec(format!(
            "{spec} has continuous increments; exact maximal tails need {{-1, +1}} steps"
        ))),
    }
}

/// `P{M(1,n) > t}`, where `M(1,n) = max_{j<=n} |S(1,j)|`.
pub fn exact_max_tail_dp(spec: &ProcessSpec, n: u64, t: f64) -> Result<ExactTail> {
    check_n(n, MAX_DP_N)?;
    check_t(t)?;
    let profile = exact_max_tail_profile(spec, n, t)?;
    Ok(ExactTail {
        n,
        t,
        prob: profile[n as usize - 1],
        method: Method::DP,
    })
}

/// `P{M(1,n) > t}` for every `n` in `1..=n_max` from a single pass.
pub fn exact_max_tail_profile(spec: &ProcessSpec, n_max: u64, t: f64) -> Result<Vec<f64>> {
    check_n(n_max, MAX_DP_N)?;
    check_t(t)?;
    let walk = walk_of(spec)?;
    let h = level(t, n_max);
    Ok(match walk {
        Walk::Zero => vec![0.0; n_max as usize],
        Walk::Iid if n_max <= MAX_DYADIC_N => dyadic_profile(n_max, h, false),
        _ => float_profile(walk, n_max, h, false),
    })
}

/// `P{M+(1,n) > t}`, where `M+(1,n) = max_{j<=n} max(S(1,j), 0)`.
pub fn exact_max_tail_onesided(spec: &ProcessSpec, n: u64, t: f64) -> Result<ExactTail> {
    check_n(n, MAX_DP_N)?;
    check_t(t)?;
    let walk = walk_of(spec)?;
    let h = level(t, n);
    let profile = match walk {
        Walk::Zero => vec![0.0; n as usize],
        Walk::Iid if n <= MAX_DYADIC_N => dyadic_profile(n, h, true),
        _ => float_profile(walk, n, h, true),
    };
    Ok(ExactTail {
        n,
        t,
        prob: profile[n as usize - 1],
        method: Method::DP,
    })
}

/// Sums live in `lo..h` (two-sided: `lo = -h + 1`); index `s - lo`.
fn bounds(n: u64, h: u64, onesided: bool) -> (i64, usize) {
    let h = h as i64;
    let lo = if onesided { -(n as i64) } else { -h + 1 };
    (lo, (h - lo) as usize)
}

/// Exact path counts for i.i.d. signs; `count / 2^n`.
fn dyadic_profile(n: u64, h: u64, onesided: bool) -> Vec<f64> {
    let (lo, width) = bounds(n, h, onesided);
    let mut cur = vec![0u128; width];
    let mut next = vec![0u128; width];
    cur[(-lo) as usize] = 1;
    let mut absorbed: u128 = 0;
    let mut out = Vec::with_capacity(n as usize);
    for step in 1..=n {
        next.iter_mut().for_each(|v| *v = 0);
        absorbed <<= 1;
        for (i, &c) in cur.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for d in [-1i64, 1] {
                let j = i as i64 + d;
                if j < 0 {
                    // Only reachable two-sided: |S| hit h from below.
                    absorbed += c;
                } else if j as usize >= width {
                    absorbed += c;
                } else {
                    next[j as usize] += c;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        out.push(absorbed as f64 / 2f64.powi(step as i32));
    }
    out
}

/// Binary64 probabilities, with the previous increment as chain state.
fn float_profile(walk: Walk, n: u64, h: u64, onesided: bool) -> Vec<f64> {
    let (lo, width) = bounds(n, h, onesided);
    let stay = match walk {
        Walk::Markov(rho) => rho,
        _ => 0.5,
    };
    // cur[2 i + k]: sum lo + i, last increment down (k = 0) or up (k = 1).
    let mut cur = vec![0f64; 2 * width];
    let mut next = vec![0f64; 2 * width];
    let origin = (-lo) as usize;
    let mut absorbed = 0.0;
    let mut out = Vec::with_capacity(n as usize);
    for step in 1..=n {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut add = |j: i64, k: usize, mass: f64, next: &mut [f64]| {
            if j < 0 || j as usize >= width {
                absorbed += mass;
            } else {
                next[2 * j as usize + k] += mass;
            }
        };
        if step == 1 {
            add(origin as i64 - 1, 0, 0.5, &mut next);
            add(origin as i64 + 1, 1, 0.5, &mut next);
        } else {
            for i in 0..width {
                for k in 0..2 {
                    let mass = cur[2 * i + k];
                    if mass == 0.0 {
                        continue;
                    }
                    let (p_up, p_down) = if k == 1 { (stay, 1.0 - stay) } else { (1.0 - stay, stay) };
                    add(i as i64 + 1, 1, mass * p_up, &mut next);
                    add(i as i64 - 1, 0, mass * p_down, &mut next);
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        out.push(absorbed.min(1.0));
    }
    out
}

/// Full enumeration of the `2^n` sign paths, weighted by their chain
/// probability. Independent of the dynamic programs.
pub fn exact_max_tail_enumeration(spec: &ProcessSpec, n: u64, t: f64, onesided: bool) -> Result<ExactTail> {
    check_n(n, MAX_ENUMERATION_N)?;
    check_t(t)?;
    let walk = walk_of(spec)?;
    if let Walk::Zero = walk {
        return Ok(ExactTail {
            n,
            t,
            prob: 0.0,
            method: Method::Enumeration,
        });
    }
    let (mut prob, mut comp) = (0.0f64, 0.0f64);
    for bits in 0u32..(1u32 << n) {
        let mut s = 0i64;
        let mut m = 0i64;
        let mut w = 0.5f64;
        let mut prev = 0u32;
        for i in 0..n {
            let up = (bits >> i) & 1;
            s += if up == 1 { 1 } else { -1 };
            m = m.max(if onesided { s } else { s.abs() });
            if i > 0 {
                w *= match walk {
                    Walk::Markov(rho) if up == prev => rho,
                    Walk::Markov(rho) => 1.0 - rho,
                    _ => 0.5,
                };
            }
            prev = up;
        }
        if m as f64 > t {
            // Neumaier summation over up to 2^20 terms.
            let sum = prob + w;
            comp += if prob.abs() >= w { (prob - sum) + w } else { (w - sum) + prob };
            prob = sum;
        }
    }
    let prob = prob + comp;
    Ok(ExactTail {
        n,
        t,
        prob,
        method: Method::Enumeration,
    })
}

/// `P{|S(1,n)| > t} = erfc(t / sqrt(2n)) / 2` for the YZ mixture.
pub fn yz_exact_sum_tail(n: u64, t: f64) -> Result<ExactTail> {
    check_n(n, u64::MAX)?;
    check_t(t)?;
    Ok(ExactTail {
        n,
        t,
        prob: 0.5 * libm::erfc(t / (2.0 * n as f64).sqrt()),
        method: Method::ClosedForm,
    })
}

/// `P{|S(1,n)| > t}` for i.i.d. signs: `S = 2K - n` with `K ~ Bin(n, 1/2)`.
pub fn binomial_sum_tail(n: u64, t: f64) -> Result<ExactTail> {
    check_n(n, MAX_DP_N)?;
    check_t(t)?;
    let ks = (0..=n).filter(|&k| (2 * k as i64 - n as i64).abs() as f64 > t);
    let prob = if n <= MAX_DYADIC_N {
        let mut row = vec![1u128];
        for _ in 0..n {
            let mut next = vec![1u128; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        let count: u128 = ks.map(|k| row[k as usize]).sum();
        count as f64 / 2f64.powi(n as i32)
    } else {
        let ln2n = n as f64 * std::f64::consts::LN_2;
        ks.map(|k| (ln_binomial(n, k) - ln2n).exp()).sum::<f64>().min(1.0)
    };
    Ok(ExactTail {
        n,
        t,
        prob,
        method: Method::ClosedForm,
    })
}
