//! Constant synthesis for the maximal inequality and an independent
//! numeric replay of the induction that justifies it.
//!
//! Given canonical parameters `(A, a, b, gamma)` and a target rate
//! `0 < c < a`, [`synthesize`] produces a [`MaximalCertificate`] such that
//!
//! ```text
//! P{ max_{j<=n} |S(1,j)| > t } <= C exp(-c t^2 / (n + b t^gamma))
//! ```
//!
//! for all `n >= 1` and `t >= 0`. The argument is an induction on `n`:
//! sizes up to `n0` are covered by a union bound (`C > A n0`), and the step
//! `n -> n+1` splits on `t^gamma <= alpha n` (split the path at
//! `k = ceil(u)` and bound three pieces) versus `t^gamma > alpha n`
//! (peel off the last partial sum).
//!
//! [`check_certificate`] does not trust the algebra used by the synthesizer:
//! it evaluates the inequalities the induction needs at concrete `(n, t)`.

use std::f64::consts::E;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BernsteinParams;
use crate::error::{Error, Result};
use crate::magnitude::Magnitude;

/// Relative inflation of `C` above the largest threshold.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Largest `n0` the synthesizer will accept.
pub const DEFAULT_N0_CEILING: u64 = 1_000_000_000_000_000_000;
/// `exp(-x) <= 1 - x/2` is used only on `[0, X_LINEAR_MAX]`.
pub const X_LINEAR_MAX: f64 = 1.5;

const MAX_HALVINGS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub epsilon: f64,
    pub n0_ceiling: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            epsilon: DEFAULT_EPSILON,
            n0_ceiling: DEFAULT_N0_CEILING,
        }
    }
}

/// Constants witnessing the maximal inequality for `params` at rate `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CertificateDoc", try_from = "CertificateDoc")]
pub struct MaximalCertificate {
    pub params: BernsteinParams,
    /// The rate of the maximal bound, `0 < c < a`.
    pub c: f64,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub n0: u64,
    /// The prefactor `C`, held in log space.
    pub prefactor: Magnitude,
}

/// Wire layout: flat, in this field order.
#[derive(Serialize, Deserialize)]
struct CertificateDoc {
    #[serde(rename = "A")]
    scale: f64,
    a: f64,
    b: f64,
    gamma: f64,
    c: f64,
    p: f64,
    q: f64,
    alpha: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    n0: u64,
    #[serde(rename = "C")]
    prefactor: Magnitude,
}

impl From<MaximalCertificate> for CertificateDoc {
    fn from(c: MaximalCertificate) -> Self {
        CertificateDoc {
            scale: c.params.scale,
            a: c.params.rate,
            b: c.params.growth,
            gamma: c.params.gamma,
            c: c.c,
            p: c.p,
            q: c.q,
            alpha: c.alpha,
            c1: c.c1,
            c2: c.c2,
            c3: c.c3,
            n0: c.n0,
            prefactor: c.prefactor,
        }
    }
}

impl TryFrom<CertificateDoc> for MaximalCertificate {
    type Error = Error;

    fn try_from(d: CertificateDoc) -> Result<Self> {
        let params = BernsteinParams::new(d.scale, d.a, d.b, d.gamma)?;
        if d.n0 == 0 {
            return Err(Error::Parse("n0 must be positive".into()));
        }
        Ok(MaximalCertificate {
            params,
            c: d.c,
            p: d.p,
            q: d.q,
            alpha: d.alpha,
            c1: d.c1,
            c2: d.c2,
            c3: d.c3,
            n0: d.n0,
            prefactor: d.prefactor,
        })
    }
}

impl MaximalCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// `ln C`.
    pub fn ln_prefactor(&self) -> f64 {
        self.prefactor.ln()
    }

    /// The maximal bound `C exp(-c t^2 / (n + b t^gamma))`, in log space.
    pub fn ln_bound(&self, n: f64, t: f64) -> f64 {
        self.prefactor.ln() - self.c * self.params.shape(n, t)
    }

    /// The maximal bound as `f64`; `+inf` when it overflows, in which case
    /// it is trivially above any probability.
    pub fn bound(&self, n: f64, t: f64) -> f64 {
        self.ln_bound(n, t).exp()
    }

    /// Every structural invariant a certificate must satisfy. Empty when
    /// the certificate is sound.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut need = |ok: bool, invariant: &'static str, detail: String| {
            if !ok {
                out.push(Violation { invariant, detail });
            }
        };
        let BernsteinParams {
            scale,
            rate: a,
            growth: b,
            gamma,
        } = self.params;
        let (c, p, q, alpha) = (self.c, self.p, self.q, self.alpha);
        let ln_c = self.prefactor.ln();

        need(self.params.validate().is_ok(), "params", format!("{:?}", self.params));
        need(c > 0.0 && c < a, "0 < c < a", format!("c = {c}, a = {a}"));
        need(
            p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0 && (p + q - 1.0).abs() <= 1e-15,
            "p + q = 1, p, q in (0, 1)",
            format!("p = {p}, q = {q}"),
        );
        need(a * p * p - c > 0.0, "a p^2 - c > 0", format!("{}", a * p * p - c));
        let qg = q.powf(gamma);
        let cond9 = q * q - alpha * b * (qg - q * q);
        need(cond9 > 0.0, "q^2 - alpha b (q^gamma - q^2) > 0", format!("{cond9}"));
        let c1 = cond9 / (1.0 + q * q);
        need(
            rel_eq(self.c1, c1) && self.c1 > 0.0 && self.c1 < 1.0,
            "c1 = (q^2 - alpha b (q^gamma - q^2)) / (1 + q^2) in (0, 1)",
            format!("stored {}, recomputed {c1}", self.c1),
        );
        let c2 = (1.0 + alpha * b).powi(2);
        need(
            rel_eq(self.c2, c2),
            "c2 = (1 + alpha b)^2",
            format!("stored {}, recomputed {c2}", self.c2),
        );
        let c3 = 1.0 / ((1.0 / alpha + b) * (2.0 / alpha + b));
        need(
            rel_eq(self.c3, c3),
            "c3 = 1 / ((1/alpha + b)(2/alpha + b))",
            format!("stored {}, recomputed {c3}", self.c3),
        );
        need(
            alpha > 0.0 && alpha * self.n0 as f64 >= 1.0,
            "alpha n0 >= 1",
            format!("alpha = {alpha}, n0 = {}", self.n0),
        );
        for (name, ln_threshold) in lower_thresholds(&self.params, c, self.c1, self.c2, self.c3, self.n0) {
            need(
                ln_c > ln_threshold,
                name,
                format!("ln C = {ln_c}, ln threshold = {ln_threshold}"),
            );
        }
        if gamma > 1.0 {
            let ok = case2_tail_holds(&self.params, c, alpha, self.c3, self.n0 as f64);
            need(
                ok,
                "case-2 tail conditions at t = (alpha n0)^(1/gamma)",
                format!("n0 = {}", self.n0),
            );
        } else {
            need(
                (-c * self.c3).exp() + (scale.ln() - ln_c).exp() <= 1.0,
                "exp(-c c3) + A/C <= 1",
                format!("c c3 = {}", c * self.c3),
            );
        }
        out
    }
}

fn rel_eq(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * y.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.invariant, self.detail)
    }
}

/// Named lower thresholds for `ln C`.
fn lower_thresholds(
    params: &BernsteinParams,
    c: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    n0: u64,
) -> Vec<(&'static str, f64)> {
    let ln_a = params.scale.ln();
    let mut out = vec![
        ("C > A e / (e - 2)", ln_a + 1.0 - (E - 2.0).ln()),
        ("C > exp(c2 / c1)", c2 / c1),
        ("C > A n0", ln_a + (n0 as f64).ln()),
    ];
    if params.gamma <= 1.0 {
        out.push(("C >= A / (1 - exp(-c c3))", ln_a - (-(-c * c3).exp_m1()).ln()));
    } else {
        out.push(("C > A", ln_a));
    }
    out
}

/// The admissible interval for `p` is `(sqrt(c/a), 1)`; take its midpoint.
pub fn choose_pq(a: f64, c: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("a must be positive, got {a}")));
    }
    if !(c > 0.0 && c < a) {
        return Err(Error::domain(format!("c must satisfy 0 < c < a = {a}, got {c}")));
    }
    let p = ((c / a).sqrt() + 1.0) / 2.0;
    let q = 1.0 - p;
    if !(a * p * p > c && q > 0.0) {
        return Err(Error::domain(format!("c = {c} is too close to a = {a} to separate p from 1")));
    }
    Ok((p, q))
}

/// Coefficients of the Case-1 positivity requirement
/// `n lead + t^gamma slope + (a p^2 - c) > 0`.
fn positivity_coefficients(params: &BernsteinParams, c: f64, p: f64, q: f64) -> (f64, f64, f64) {
    let BernsteinParams {
        rate: a,
        growth: b,
        gamma,
        ..
    } = *params;
    let q2 = q * q;
    let lead = a * p * p - c / (1.0 + q2);
    let slope = a * p * p * b - c * b * p.powf(gamma) - c * b * (q.powf(gamma) - q2) / (1.0 + q2);
    (lead, slope, a * p * p - c)
}

/// Largest `alpha = 2^-k <= 1` keeping `c1 > 0` and the Case-1 positivity
/// requirement true in the worst case `t^gamma = alpha n`.
pub fn choose_alpha(params: &BernsteinParams, c: f64, p: f64, q: f64) -> Result<f64> {
    let b = params.growth;
    let q2 = q * q;
    let spread = q.powf(params.gamma) - q2;
    let (lead, slope, _) = positivity_coefficients(params, c, p, q);
    let mut alpha = 1.0f64;
    for _ in 0..=MAX_HALVINGS {
        let keeps_c1 = spread <= 0.0 || q2 - alpha * b * spread > 0.0;
        let keeps_positivity = lead + alpha * slope.min(0.0) > 0.0;
        if keeps_c1 && keeps_positivity {
            return Ok(alpha);
        }
        alpha *= 0.5;
    }
    Err(Error::synthesis(
        "alpha",
        format!("no alpha in (0, 1] keeps c1 > 0 and a p^2 - c/(1+q^2) + alpha min(0, slope) > 0 (lead {lead}, slope {slope})"),
    ))
}

/// Split of `n` used in the Case-1 decomposition:
/// `u = (n + t^gamma b (q^gamma - q^2)) / (1 + q^2)` and `k = ceil(u)`.
///
/// `u` balances the exponents: `t^2/(u + b t^gamma) = q^2 t^2/(n - u + b q^gamma t^gamma)`.
pub fn split_point(n: u64, t: f64, q: f64, b: f64, gamma: f64) -> Result<(f64, u64)> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("t must be finite and nonnegative, got {t}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q must lie in (0, 1), got {q}")));
    }
    Ok(split_unchecked(n as f64, t, q, b, gamma))
}

fn split_unchecked(n: f64, t: f64, q: f64, b: f64, gamma: f64) -> (f64, u64) {
    let q2 = q * q;
    let tg = if t == 0.0 { 0.0 } else { t.powf(gamma) };
    let u = (n + tg * b * (q.powf(gamma) - q2)) / (1.0 + q2);
    (u, u.ceil().max(1.0) as u64)
}

/// Smallest `n` from which each induction requirement holds for every
/// larger `n`; `n0` is their maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct N0Breakdown {
    /// `alpha n >= 1`.
    pub alpha_floor: u64,
    /// `(n + 1 + b t^gamma)(ceil(u) + b t^gamma) <= c2 n^2` on Case 1.
    pub product: u64,
    /// Case-1 positivity requirement including its constant term.
    pub positivity: u64,
    /// Case-2 tail conditions (`gamma > 1` only; 1 otherwise).
    pub case2_tail: u64,
}

impl N0Breakdown {
    pub fn n0(&self) -> u64 {
        self.alpha_floor
            .max(self.product)
            .max(self.positivity)
            .max(self.case2_tail)
    }
}

pub fn compute_n0(params: &BernsteinParams, c: f64, p: f64, q: f64, alpha: f64) -> Result<u64> {
    compute_n0_with(params, c, p, q, alpha, DEFAULT_N0_CEILING).map(|b| b.n0())
}

pub fn compute_n0_with(
    params: &BernsteinParams,
    c: f64,
    p: f64,
    q: f64,
    alpha: f64,
    ceiling: u64,
) -> Result<N0Breakdown> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let ceiling_f = ceiling as f64;

    let mut alpha_floor = (1.0 / alpha).ceil();
    if alpha * alpha_floor < 1.0 {
        alpha_floor += 1.0;
    }
    if alpha_floor > ceiling_f {
        return Err(Error::synthesis(
            "alpha n0 >= 1",
            format!("needs n0 >= {alpha_floor}, above the ceiling {ceiling}"),
        ));
    }

    let product = product_threshold(params, q, alpha, ceiling)?;
    let positivity = positivity_threshold(params, c, p, q, alpha, ceiling)?;
    let case2_tail = if params.gamma > 1.0 {
        tail_threshold(params, c, alpha, ceiling)?
    } else {
        1
    };
    Ok(N0Breakdown {
        alpha_floor: alpha_floor as u64,
        product,
        positivity,
        case2_tail,
    })
}

fn product_holds(params: &BernsteinParams, q: f64, alpha: f64, n: f64) -> bool {
    let b = params.growth;
    let c2 = (1.0 + alpha * b).powi(2);
    let at = |tg: f64| {
        let t = if tg == 0.0 { 0.0 } else { tg.powf(1.0 / params.gamma) };
        let (_, k) = split_unchecked(n, t, q, b, params.gamma);
        (n + 1.0 + b * tg) * (k as f64 + b * tg) <= c2 * n * n
    };
    // The left side is nondecreasing in t, so the extremal point decides;
    // t = 0 is checked as well.
    at(0.0) && at(alpha * n)
}

fn product_threshold(params: &BernsteinParams, q: f64, alpha: f64, ceiling: u64) -> Result<u64> {
    let b = params.growth;
    let q2 = q * q;
    // With ceil(u) <= u + 1 the left side is at most (s n + 1)(beta n + 1),
    // which is <= s^2 n^2 beyond the positive root of
    // s (s - beta) n^2 - (s + beta) n - 1.
    let s = 1.0 + alpha * b;
    let beta = (1.0 + alpha * b * (q.powf(params.gamma) - q2)) / (1.0 + q2) + alpha * b;
    let gap = s * (s - beta);
    if !(gap > 0.0) {
        return Err(Error::synthesis(
            "(n+1+b t^gamma)(k+b t^gamma) <= c2 n^2",
            "c1 <= 0: the product bound never holds",
        ));
    }
    let root = ((s + beta) + ((s + beta).powi(2) + 4.0 * gap).sqrt()) / (2.0 * gap);
    let upper = root.ceil() + 2.0;
    if upper > ceiling as f64 {
        return Err(Error::synthesis(
            "(n+1+b t^gamma)(k+b t^gamma) <= c2 n^2",
            format!("analytic bound n >= {upper:e} exceeds the ceiling {ceiling}"),
        ));
    }
    let mut n = upper as u64;
    if !product_holds(params, q, alpha, n as f64) {
        return Err(Error::synthesis(
            "(n+1+b t^gamma)(k+b t^gamma) <= c2 n^2",
            format!("fails at the analytic bound n = {n}"),
        ));
    }
    while n > 1 && product_holds(params, q, alpha, (n - 1) as f64) {
        n -= 1;
    }
    Ok(n)
}

fn positivity_holds(params: &BernsteinParams, c: f64, p: f64, q: f64, alpha: f64, n: f64) -> bool {
    let (lead, slope, constant) = positivity_coefficients(params, c, p, q);
    n * lead + alpha * n * slope.min(0.0) + constant > 0.0
}

fn positivity_threshold(
    params: &BernsteinParams,
    c: f64,
    p: f64,
    q: f64,
    alpha: f64,
    ceiling: u64,
) -> Result<u64> {
    let (lead, slope, constant) = positivity_coefficients(params, c, p, q);
    let per_n = lead + alpha * slope.min(0.0);
    if !(per_n > 0.0) {
        return Err(Error::synthesis(
            "case-1 positivity",
            format!("coefficient of n is {per_n}"),
        ));
    }
    // Linear in n with positive slope.
    let mut n = if constant > 0.0 {
        1.0
    } else {
        (-constant / per_n).floor() + 1.0
    };
    while !positivity_holds(params, c, p, q, alpha, n) {
        n += 1.0;
    }
    if n > ceiling as f64 {
        return Err(Error::synthesis(
            "case-1 positivity",
            format!("needs n0 >= {n}, above the ceiling {ceiling}"),
        ));
    }
    Ok(n as u64)
}

/// Case-2 tail conditions for `1 < gamma < 2`, certified for every
/// `t >= (alpha n)^(1/gamma)`.
///
/// With `x(t) = c c3 t^(2-2 gamma)` and `K = (a-c)/(2/alpha + b)` the proof
/// needs `x <= 1.5` (so `exp(-x) <= 1 - x/2`) and
/// `G(t) = ln(x/2) + K t^(2-gamma) > 0`. `x` decreases in `t`, and
/// `t G'(t) = (2 - 2 gamma) + K (2 - gamma) t^(2-gamma)` increases, so
/// `x <= 1.5`, `G > 0` and `G' >= 0` at the boundary carry to all larger `t`.
fn case2_tail_holds(params: &BernsteinParams, c: f64, alpha: f64, c3: f64, n: f64) -> bool {
    let BernsteinParams {
        rate: a,
        growth: b,
        gamma,
        ..
    } = *params;
    let t0 = (alpha * n).powf(1.0 / gamma);
    let ln_t0 = t0.ln();
    let k = (a - c) / (2.0 / alpha + b);
    let x0 = c * c3 * ((2.0 - 2.0 * gamma) * ln_t0).exp();
    let g0 = (c * c3 / 2.0).ln() + (2.0 - 2.0 * gamma) * ln_t0 + k * t0.powf(2.0 - gamma);
    let slope = (2.0 - 2.0 * gamma) + k * (2.0 - gamma) * t0.powf(2.0 - gamma);
    x0 <= X_LINEAR_MAX && g0 > 0.0 && slope >= 0.0
}

fn tail_threshold(params: &BernsteinParams, c: f64, alpha: f64, ceiling: u64) -> Result<u64> {
    let b = params.growth;
    let c3 = 1.0 / ((1.0 / alpha + b) * (2.0 / alpha + b));
    let holds = |n: u64| case2_tail_holds(params, c, alpha, c3, n as f64);
    let mut hi = 1u64;
    while !holds(hi) {
        if hi >= ceiling {
            return Err(Error::synthesis(
                "case-2 tail (gamma > 1)",
                format!("not reached below the ceiling {ceiling}"),
            ));
        }
        hi = hi.saturating_mul(2).min(ceiling);
    }
    if hi == 1 {
        return Ok(1);
    }
    // The predicate is monotone in n: bisect on (lo, hi].
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn synthesize(params: &BernsteinParams, c: f64) -> Result<MaximalCertificate> {
    synthesize_with(params, c, &SynthesisConfig::default())
}

pub fn synthesize_with(
    params: &BernsteinParams,
    c: f64,
    config: &SynthesisConfig,
) -> Result<MaximalCertificate> {
    params.validate()?;
    if !(config.epsilon > 0.0) {
        return Err(Error::domain("epsilon must be positive"));
    }
    let (p, q) = choose_pq(params.rate, c)?;
    let alpha = choose_alpha(params, c, p, q)?;
    let b = params.growth;
    let c1 = (q * q - alpha * b * (q.powf(params.gamma) - q * q)) / (1.0 + q * q);
    let c2 = (1.0 + alpha * b).powi(2);
    let c3 = 1.0 / ((1.0 / alpha + b) * (2.0 / alpha + b));
    let n0 = compute_n0_with(params, c, p, q, alpha, config.n0_ceiling)?.n0();
    let ln_max = lower_thresholds(params, c, c1, c2, c3, n0)
        .into_iter()
        .map(|(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let cert = MaximalCertificate {
        params: *params,
        c,
        p,
        q,
        alpha,
        c1,
        c2,
        c3,
        n0,
        prefactor: Magnitude::from_ln(ln_max + config.epsilon.ln_1p()),
    };
    if let Some(v) = cert.violations().into_iter().next() {
        return Err(Error::synthesis(v.invariant, v.detail));
    }
    Ok(cert)
}

/// Which inequality a checked cell exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `n <= n0`: union bound `n A exp(-a x) <= C exp(-c x)`.
    Base,
    /// Case 1, `t < sqrt(c2 n / (c c1))`: the bound is at least 1.
    Trivial,
    /// Case 1, `t >= sqrt(c2 n / (c c1))`: three-term decomposition.
    Decomposition,
    /// Case 2, `t^gamma > alpha n`: peel off the last summand.
    Case2,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Base => "base",
            Region::Trivial => "trivial",
            Region::Decomposition => "decomposition",
            Region::Case2 => "case2",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One evaluated `(n, t)` cell. `pass` iff `margin >= 0`.
///
/// For [`Region::Base`] and [`Region::Trivial`] the margin is a log ratio;
/// for the other two it is `1 - (sum of normalized terms)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckCell {
    pub n: u64,
    pub t: f64,
    pub region: Region,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub cells: Vec<CheckCell>,
    /// Induction steps `n -> n+1` checked, when `n0 <= n_max`.
    pub induction_range: Option<(u64, u64)>,
    pub all_pass: bool,
    pub worst_margin: f64,
}

impl CheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckCell> {
        self.cells.iter().filter(|c| !c.pass)
    }

    pub fn count(&self, region: Region) -> usize {
        self.cells.iter().filter(|c| c.region == region).count()
    }
}

/// Replays the induction on a grid: base sizes `1..=min(n0, n_max)` and
/// steps `n -> n+1` for `n` in `n0..=n_max`, each on `t = 0` plus
/// `t_grid_size - 1` log-spaced points, plus the region boundaries.
pub fn check_certificate(cert: &MaximalCertificate, n_max: u64, t_grid_size: usize) -> CheckReport {
    check_certificate_with(cert, n_max, t_grid_size, TailCount::Printed)
}

/// Length used for the last piece `M(k+1, n+1)` of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailCount {
    /// `n - k`, as the induction step is written.
    #[default]
    Printed,
    /// `n + 1 - k`, the number of summands in `M(k+1, n+1)`.
    Summands,
}

pub fn check_certificate_with(
    cert: &MaximalCertificate,
    n_max: u64,
    t_grid_size: usize,
    tail: TailCount,
) -> CheckReport {
    let base_top = cert.n0.min(n_max);
    let mut cells: Vec<CheckCell> = (1..=base_top)
        .into_par_iter()
        .flat_map_iter(|n| {
            t_grid(cert, n, t_grid_size)
                .into_iter()
                .map(move |t| base_cell(cert, n, t))
        })
        .collect();
    cells.extend(step_cells(cert, cert.n0, n_max, t_grid_size, tail));
    report(cells, (cert.n0 <= n_max).then_some((cert.n0, n_max)))
}

/// Induction steps only, for `n` in `max(n_lo, n0)..=n_hi`. Lets a
/// certificate with a large `n0` be exercised just above it.
///
/// Sizes are handled in binary64, so `n_hi` should stay below `2^53`.
pub fn check_steps(
    cert: &MaximalCertificate,
    n_lo: u64,
    n_hi: u64,
    t_grid_size: usize,
    tail: TailCount,
) -> CheckReport {
    let lo = n_lo.max(cert.n0);
    let cells = step_cells(cert, lo, n_hi, t_grid_size, tail);
    report(cells, (lo <= n_hi).then_some((lo, n_hi)))
}

fn step_cells(cert: &MaximalCertificate, lo: u64, hi: u64, t_grid_size: usize, tail: TailCount) -> Vec<CheckCell> {
    (lo..=hi)
        .into_par_iter()
        .flat_map_iter(|n| {
            t_grid(cert, n, t_grid_size)
                .into_iter()
                .map(move |t| step_cell(cert, n, t, tail))
        })
        .collect()
}

fn report(cells: Vec<CheckCell>, induction_range: Option<(u64, u64)>) -> CheckReport {
    let worst_margin = cells
        .iter()
        .map(|c| c.margin)
        .fold(f64::INFINITY, f64::min);
    let all_pass = cells.iter().all(|c| c.pass);
    CheckReport {
        cells,
        induction_range,
        all_pass,
        worst_margin,
    }
}

fn t_grid(cert: &MaximalCertificate, n: u64, size: usize) -> Vec<f64> {
    let nf = n as f64;
    let t_case = (cert.alpha * nf).powf(1.0 / cert.params.gamma);
    let t_dec = (cert.c2 * nf / (cert.c * cert.c1)).sqrt();
    let lo = 1e-2f64;
    let hi = 10.0 * t_case.max(t_dec).max(nf.sqrt()).max(1.0);
    let mut ts = vec![0.0];
    let logs = size.saturating_sub(1);
    for i in 0..logs {
        let frac = if logs == 1 { 0.0 } else { i as f64 / (logs - 1) as f64 };
        ts.push(lo * (hi / lo).powf(frac));
    }
    ts.extend([t_case, t_case * (1.0 + 1e-9), t_dec * (1.0 - 1e-9), t_dec]);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

fn base_cell(cert: &MaximalCertificate, n: u64, t: f64) -> CheckCell {
    let p = &cert.params;
    let x = p.shape(n as f64, t);
    let ln_target = cert.prefactor.ln() - cert.c * x;
    let ln_union = p.scale.ln() + (n as f64).ln() - p.rate * x;
    cell(n, t, Region::Base, ln_target - ln_union)
}

fn step_cell(cert: &MaximalCertificate, n: u64, t: f64, tail: TailCount) -> CheckCell {
    let BernsteinParams {
        scale,
        rate: a,
        growth: b,
        gamma,
    } = cert.params;
    let (c, p, q) = (cert.c, cert.p, cert.q);
    let ln_c = cert.prefactor.ln();
    let nf = n as f64;
    let tg = if t == 0.0 { 0.0 } else { t.powf(gamma) };
    let t2 = t * t;
    // Exponent of the target C exp(-c t^2 / (n + 1 + b t^gamma)).
    let x_target = c * t2 / (nf + 1.0 + b * tg);

    if tg > cert.alpha * nf {
        let x = c * t2 / ((nf + b * tg) * (nf + 1.0 + b * tg));
        let y = (scale.ln() - ln_c - t2 * (a - c) / (nf + 1.0 + b * tg)).exp();
        return cell(n, t, Region::Case2, -(-x).exp_m1() - y);
    }
    if t < (cert.c2 * nf / (c * cert.c1)).sqrt() {
        return cell(n, t, Region::Trivial, ln_c - x_target);
    }
    let (_, k) = split_unchecked(nf, t, q, b, gamma);
    let kf = k as f64;
    let rest = match tail {
        TailCount::Printed => nf - kf,
        TailCount::Summands => nf + 1.0 - kf,
    };
    let x1 = c * t2 / (kf + b * tg);
    let x2 = a * p * p * t2 / (kf + b * p.powf(gamma) * tg);
    let x3 = c * q * q * t2 / (rest + b * q.powf(gamma) * tg);
    let sum = (x_target - x1).exp() + (scale.ln() - ln_c + x_target - x2).exp() + (x_target - x3).exp();
    cell(n, t, Region::Decomposition, 1.0 - sum)
}

fn cell(n: u64, t: f64, region: Region, margin: f64) -> CheckCell {
    CheckCell {
        n,
        t,
        region,
        margin,
        pass: margin >= 0.0,
    }
}
