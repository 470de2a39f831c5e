//! Exponential tail bounds for partial sums.
//!
//! Every bound here is evaluated directly in binary64. The values live in
//! `(0, A]`, so no log-space representation is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical generalized Bernstein bound `A exp(-a t^2 / (n + b t^gamma))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinParams {
    #[serde(rename = "A")]
    pub scale: f64,
    #[serde(rename = "a")]
    pub rate: f64,
    #[serde(rename = "b")]
    pub growth: f64,
    pub gamma: f64,
}

impl BernsteinParams {
    pub fn new(scale: f64, rate: f64, growth: f64, gamma: f64) -> Result<Self> {
        let p = BernsteinParams {
            scale,
            rate,
            growth,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks `A > 0`, `a > 0`, `b >= 0` and `0 < gamma < 2`.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.scale, self.rate, self.growth, self.gamma]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain("Bernstein parameters must be finite"));
        }
        if self.scale <= 0.0 {
            return Err(Error::domain(format!("A must be positive, got {}", self.scale)));
        }
        if self.rate <= 0.0 {
            return Err(Error::domain(format!("a must be positive, got {}", self.rate)));
        }
        if self.growth < 0.0 {
            return Err(Error::domain(format!("b must be nonnegative, got {}", self.growth)));
        }
        if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return Err(Error::domain(format!("gamma must lie in (0, 2), got {}", self.gamma)));
        }
        Ok(())
    }

    /// The exponent `t^2 / (n + b t^gamma)` without the rate.
    pub fn shape(&self, n: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        t * t / (n + self.growth * t.powf(self.gamma))
    }
}

/// Moment constants of the classic Bernstein condition
/// `E|X|^m <= v m! kappa^(m-2) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicParams {
    pub v: f64,
    pub kappa: f64,
}

impl ClassicParams {
    pub fn new(v: f64, kappa: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("v must be positive, got {v}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
        }
        Ok(ClassicParams { v, kappa })
    }
}

/// Cumulant growth constants: `|Gamma_k| <= (k!/2)^(1+gamma_c) H / Delta^(k-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BRParams {
    pub gamma_c: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
}

impl BRParams {
    pub fn new(gamma_c: f64, h: f64, delta: f64) -> Result<Self> {
        if !(gamma_c >= 0.0 && gamma_c.is_finite()) {
            return Err(Error::domain(format!("gamma_c must be nonnegative, got {gamma_c}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain(format!("H must be positive, got {h}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain(format!("Delta must be positive, got {delta}")));
        }
        Ok(BRParams { gamma_c, h, delta })
    }
}

/// Constants of the bound for bounded, geometrically strong mixing sequences.
///
/// `c_mpr` is the unspecified absolute constant of that bound and is
/// always supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MPRParams {
    pub v: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "C_mpr")]
    pub c_mpr: f64,
}

impl MPRParams {
    pub fn new(v: f64, m: f64, c_mpr: f64) -> Result<Self> {
        for (name, x) in [("v", v), ("M", m), ("C_mpr", c_mpr)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {x}")));
            }
        }
        Ok(MPRParams { v, m, c_mpr })
    }
}

fn check_nt(n: f64, t: f64) -> Result<()> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::domain(format!("n must be >= 1, got {n}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("t must be a finite nonnegative number, got {t}")));
    }
    Ok(())
}

/// `A exp(-a t^2 / (n + b t^gamma))`.
pub fn eval_generalized(p: &BernsteinParams, n: f64, t: f64) -> Result<f64> {
    check_nt(n, t)?;
    Ok(p.scale * (-p.rate * p.shape(n, t)).exp())
}

/// `2 exp(-t^2 / (2 v n + 2 kappa t))`.
pub fn eval_classic(p: &ClassicParams, n: f64, t: f64) -> Result<f64> {
    check_nt(n, t)?;
    if t == 0.0 {
        return Ok(2.0);
    }
    Ok(2.0 * (-t * t / (2.0 * p.v * n + 2.0 * p.kappa * t)).exp())
}

/// Rewrites the classic bound in canonical form:
/// `A = 2, a = 1/(2v), b = kappa/v, gamma = 1`.
pub fn classic_to_canonical(p: &ClassicParams) -> BernsteinParams {
    BernsteinParams {
        scale: 2.0,
        rate: 1.0 / (2.0 * p.v),
        growth: p.kappa / p.v,
        gamma: 1.0,
    }
}

/// Tail bound for a centered variable with controlled cumulants.
pub fn eval_br(p: &BRParams, x: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("x must be a finite nonnegative number, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let g = p.gamma_c;
    let scaled = x / p.delta.powf(1.0 / (1.0 + 2.0 * g));
    let denom = 2.0 * (p.h + scaled.powf((1.0 + 2.0 * g) / (1.0 + g)));
    Ok((-x * x / denom).exp())
}

/// `exp(-C t^2 / (n v^2 + M^2 + t M (log n)^2))`.
///
/// `n` is taken as a real `>= 1`; the bound is only meaningful at integers
/// but the formula is smooth.
pub fn eval_mpr(p: &MPRParams, n: f64, t: f64) -> Result<f64> {
    check_nt(n, t)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let log_n = n.ln();
    let denom = n * p.v * p.v + p.m * p.m + t * p.m * log_n * log_n;
    Ok((-p.c_mpr * t * t / denom).exp())
}

/// Iteration budget for the outer scan of [`compute_d1_with`].
pub const DEFAULT_D1_BUDGET: u64 = 100_000_000;

/// Least admissible `D1` and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D1Supremum {
    #[serde(rename = "D1")]
    pub d1: f64,
    /// Integer `n` attaining the supremum.
    pub argmax_n: u64,
    /// Maximizing `t` at `argmax_n`.
    pub argmax_t: f64,
    /// Last `n` scanned; beyond it the per-n supremum is decreasing.
    pub cutoff_n: u64,
}

/// Smallest `D1` with `t M (log n)^2 <= (n-1) M^2 + D1 t^(1+eta)` for all
/// integers `n >= 1` and reals `t >= 0`.
pub fn compute_d1(m: f64, eta: f64) -> Result<f64> {
    compute_d1_with(m, eta, DEFAULT_D1_BUDGET).map(|s| s.d1)
}

/// [`compute_d1`] with an explicit budget on the number of `n` scanned.
///
/// For fixed `n >= 2` with `L = (log n)^2`, the ratio
/// `(t M L - (n-1) M^2) / t^(1+eta)` is maximized at
/// `t* = (1+eta)(n-1)M / (eta L)`, with value
/// `M^(1-eta) L^(1+eta) eta^eta / ((1+eta)^(1+eta) (n-1)^eta)`.
/// The log of that value has derivative in `n` below
/// `(2(1+eta)/log n - eta)/n`, which is negative once
/// `log n > 2(1+eta)/eta`, so the scan stops there.
pub fn compute_d1_with(m: f64, eta: f64, budget: u64) -> Result<D1Supremum> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!("M must be positive, got {m}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(format!("eta must lie in (0, 1), got {eta}")));
    }
    let cutoff = (2.0 * (1.0 + eta) / eta).exp().ceil() + 1.0;
    if !(cutoff <= budget as f64) {
        return Err(Error::Convergence(format!(
            "outer supremum over n needs a scan up to n = {cutoff:e}, beyond the budget of {budget}"
        )));
    }
    let cutoff = cutoff as u64;
    let constant = (1.0 - eta) * m.ln() + eta * eta.ln() - (1.0 + eta) * (1.0 + eta).ln();
    let mut best = (f64::NEG_INFINITY, 2u64);
    for n in 2..=cutoff {
        let nf = n as f64;
        let ln_d = constant + 2.0 * (1.0 + eta) * nf.ln().ln() - eta * (nf - 1.0).ln();
        if ln_d > best.0 {
            best = (ln_d, n);
        }
    }
    let (ln_d, n) = best;
    let l = (n as f64).ln().powi(2);
    Ok(D1Supremum {
        d1: ln_d.exp(),
        argmax_n: n,
        argmax_t: (1.0 + eta) * (n as f64 - 1.0) * m / (eta * l),
        cutoff_n: cutoff,
    })
}

/// Canonical form of the mixing bound with `gamma = 1 + eta`:
/// `A = 1`, `a = C/(v^2 + M^2)`, `b = D1/(v^2 + M^2)`.
pub fn mpr_to_canonical(p: &MPRParams, eta: f64) -> Result<BernsteinParams> {
    let d1 = compute_d1(p.m, eta)?;
    let s = p.v * p.v + p.m * p.m;
    BernsteinParams::new(1.0, p.c_mpr / s, d1 / s, 1.0 + eta)
}
