//! Sample paths of the example processes.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{classic_to_canonical, BernsteinParams, ClassicParams};
use crate::error::{Error, Result};
use crate::montecarlo::TailEstimate;
use crate::rng;

pub const AR1_BURN_IN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessKind {
    /// i.i.d. signs.
    RademacherIID,
    /// i.i.d. uniform on `[-1, 1]`.
    BoundedUniformIID,
    /// `X_i = Y Z_i`, `Y` uniform on `{0, 1}` once per path, `Z_i` standard normal.
    YZMixture,
    /// Stationary chain on `{-1, +1}` that keeps its state with probability `rho`.
    TwoStateMarkov { rho: f64 },
    /// `X_i = phi X_{i-1} + U_i`, `U_i` uniform on `[-1, 1]`.
    BoundedAR1 { phi: f64 },
    /// All increments zero. Test stub.
    Zero,
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::RademacherIID => "rademacher",
            ProcessKind::BoundedUniformIID => "uniform",
            ProcessKind::YZMixture => "yz",
            ProcessKind::TwoStateMarkov { .. } => "markov",
            ProcessKind::BoundedAR1 { .. } => "ar1",
            ProcessKind::Zero => "zero",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProcessKind::TwoStateMarkov { rho } if !(rho > 0.0 && rho < 1.0) => {
                Err(Error::domain(format!("rho must lie in (0, 1), got {rho}")))
            }
            ProcessKind::BoundedAR1 { phi } if !(phi > -1.0 && phi < 1.0) => {
                Err(Error::domain(format!("phi must lie in (-1, 1), got {phi}")))
            }
            _ => Ok(()),
        }
    }

    /// Increments take values in `{-1, +1}` (or are identically zero).
    pub fn is_finite_support(&self) -> bool {
        matches!(
            self,
            ProcessKind::RademacherIID | ProcessKind::TwoStateMarkov { .. } | ProcessKind::Zero
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Proved,
    Fitted,
    None,
}

/// A process together with the canonical parameters claimed for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SpecDoc", try_from = "SpecDoc")]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub claimed: Option<BernsteinParams>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<f64>,
}

impl From<ProcessSpec> for SpecDoc {
    fn from(s: ProcessSpec) -> Self {
        let (rho, phi) = match s.kind {
            ProcessKind::TwoStateMarkov { rho } => (Some(rho), None),
            ProcessKind::BoundedAR1 { phi } => (None, Some(phi)),
            _ => (None, None),
        };
        SpecDoc {
            kind: s.kind.name().to_string(),
            rho,
            phi,
        }
    }
}

impl TryFrom<SpecDoc> for ProcessSpec {
    type Error = Error;

    fn try_from(d: SpecDoc) -> Result<Self> {
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| Error::Parse(format!("kind {:?} requires field {field:?}", d.kind)))
        };
        let kind = match d.kind.to_ascii_lowercase().as_str() {
            "rademacher" | "rademacheriid" => ProcessKind::RademacherIID,
            "uniform" | "boundeduniformiid" => ProcessKind::BoundedUniformIID,
            "yz" | "yzmixture" => ProcessKind::YZMixture,
            "markov" | "twostatemarkov" => ProcessKind::TwoStateMarkov {
                rho: need(d.rho, "rho")?,
            },
            "ar1" | "boundedar1" => ProcessKind::BoundedAR1 {
                phi: need(d.phi, "phi")?,
            },
            "zero" => ProcessKind::Zero,
            other => return Err(Error::Parse(format!("unknown process kind {other:?}"))),
        };
        ProcessSpec::new(kind)
    }
}

impl ProcessSpec {
    /// Attaches the parameters that are proved for `kind`; the mixing
    /// examples start without any.
    pub fn new(kind: ProcessKind) -> Result<Self> {
        kind.validate()?;
        let proved = |p: BernsteinParams| (Some(p), Provenance::Proved);
        let (claimed, provenance) = match kind {
            ProcessKind::RademacherIID => proved(classic_to_canonical(&ClassicParams { v: 1.0, kappa: 1.0 })),
            ProcessKind::BoundedUniformIID => proved(classic_to_canonical(&ClassicParams {
                v: 1.0 / 3.0,
                kappa: 1.0 / 3.0,
            })),
            ProcessKind::YZMixture => proved(BernsteinParams {
                scale: 2.0,
                rate: 0.5,
                growth: 0.0,
                gamma: 1.0,
            }),
            _ => (None, Provenance::None),
        };
        Ok(ProcessSpec {
            kind,
            claimed,
            provenance,
        })
    }

    /// Accepts a JSON object or a bare kind name such as `rademacher`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
        } else {
            ProcessSpec::try_from(SpecDoc {
                kind: text.to_string(),
                rho: None,
                phi: None,
            })
        }
    }

    pub fn with_fitted(mut self, params: BernsteinParams) -> Self {
        self.claimed = Some(params);
        self.provenance = Provenance::Fitted;
        self
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ProcessKind::TwoStateMarkov { rho } => write!(f, "markov(rho={rho})"),
            ProcessKind::BoundedAR1 { phi } => write!(f, "ar1(phi={phi})"),
            k => f.write_str(k.name()),
        }
    }
}

/// Streams the increments of one replication.
pub struct PathSampler {
    kind: ProcessKind,
    rng: ChaCha8Rng,
    state: f64,
    started: bool,
    y: u8,
}

impl PathSampler {
    pub fn new(kind: ProcessKind, seed: u64, rep: u64) -> Self {
        let mut rng = rng::stream(seed, rep);
        let mut state = 0.0;
        let mut y = 1;
        match kind {
            ProcessKind::YZMixture => y = rng.random::<bool>() as u8,
            ProcessKind::TwoStateMarkov { .. } => state = sign(rng.random()),
            ProcessKind::BoundedAR1 { phi } => {
                for _ in 0..AR1_BURN_IN {
                    state = phi * state + rng.random_range(-1.0..=1.0);
                }
            }
            _ => {}
        }
        PathSampler {
            kind,
            rng,
            state,
            started: false,
            y,
        }
    }

    /// The mixing variable `Y` for [`ProcessKind::YZMixture`].
    pub fn latent_y(&self) -> Option<u8> {
        matches!(self.kind, ProcessKind::YZMixture).then_some(self.y)
    }

    #[inline]
    pub fn next_increment(&mut self) -> f64 {
        match self.kind {
            ProcessKind::RademacherIID => sign(self.rng.random()),
            ProcessKind::BoundedUniformIID => self.rng.random_range(-1.0..=1.0),
            ProcessKind::YZMixture => {
                if self.y == 0 {
                    0.0
                } else {
                    self.rng.sample(StandardNormal)
                }
            }
            ProcessKind::TwoStateMarkov { rho } => {
                if self.started && self.rng.random::<f64>() >= rho {
                    self.state = -self.state;
                }
                self.started = true;
                self.state
            }
            ProcessKind::BoundedAR1 { phi } => {
                self.state = phi * self.state + self.rng.random_range(-1.0..=1.0);
                self.state
            }
            ProcessKind::Zero => 0.0,
        }
    }
}

fn sign(positive: bool) -> f64 {
    if positive {
        1.0
    } else {
        -1.0
    }
}

/// Increments of `reps` independent paths of length `n`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub spec: ProcessSpec,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub paths: Vec<f64>,
    /// Per-path `Y` for the YZ mixture.
    pub latent_y: Option<Vec<u8>>,
}

impl PathBatch {
    pub fn path(&self, rep: usize) -> &[f64] {
        &self.paths[rep * self.n..(rep + 1) * self.n]
    }
}

pub fn generate(spec: &ProcessSpec, n: usize, reps: usize, seed: u64) -> Result<PathBatch> {
    spec.kind.validate()?;
    if n == 0 || reps == 0 {
        return Err(Error::domain(format!("n and reps must be positive, got n = {n}, reps = {reps}")));
    }
    let len = n
        .checked_mul(reps)
        .ok_or_else(|| Error::domain("n * reps overflows"))?;
    let mut paths = vec![0.0; len];
    let ys: Vec<Option<u8>> = paths
        .par_chunks_mut(n)
        .enumerate()
        .map(|(rep, row)| {
            let mut s = PathSampler::new(spec.kind, seed, rep as u64);
            for x in row.iter_mut() {
                *x = s.next_increment();
            }
            s.latent_y()
        })
        .collect();
    let latent_y = ys.iter().copied().collect::<Option<Vec<u8>>>();
    Ok(PathBatch {
        spec: spec.clone(),
        n,
        reps,
        seed,
        paths,
        latent_y,
    })
}

/// Least-squares fit of `(a, b)` in `-ln(p/A) = a t^2 / (n + b t^gamma)`
/// with `A` and `gamma` held fixed.
///
/// `a` has a closed form for each `b`; `b` is located on a log grid and
/// refined by golden-section search.
pub fn fit_params(estimates: &[TailEstimate], scale: f64, gamma: f64) -> Result<BernsteinParams> {
    BernsteinParams::new(scale, 1.0, 0.0, gamma)?;
    let usable: Vec<&TailEstimate> = estimates
        .iter()
        .filter(|e| e.p_hat > 0.0 && e.p_hat < 1.0 && e.t > 0.0)
        .collect();
    if usable.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 estimates with 0 < p_hat < 1 and t > 0, got {}",
            usable.len()
        )));
    }
    let mut ts: Vec<f64> = usable.iter().map(|e| e.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 2 {
        return Err(Error::Fit("need at least 2 distinct t values to separate a from b".into()));
    }
    let data: Vec<(f64, f64, f64)> = usable
        .iter()
        .filter(|e| e.p_hat < scale)
        .map(|e| (e.n as f64, e.t, (scale / e.p_hat).ln()))
        .collect();
    if data.is_empty() {
        return Err(Error::Fit(format!("every p_hat is at least A = {scale}")));
    }

    // Best a for fixed b and the resulting residual sum of squares.
    let solve = |b: f64| -> (f64, f64) {
        let (mut yg, mut gg) = (0.0, 0.0);
        for &(n, t, y) in &data {
            let g = t * t / (n + b * t.powf(gamma));
            yg += y * g;
            gg += g * g;
        }
        let a = (yg / gg).max(0.0);
        let rss = data
            .iter()
            .map(|&(n, t, y)| (y - a * t * t / (n + b * t.powf(gamma))).powi(2))
            .sum::<f64>();
        (a, rss)
    };

    let mut grid = vec![0.0];
    grid.extend((0..=120).map(|i| 10f64.powf(-6.0 + i as f64 * 0.1)));
    let best = (0..grid.len())
        .min_by(|&i, &j| solve(grid[i]).1.total_cmp(&solve(grid[j]).1))
        .expect("grid is nonempty");
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (solve(x1).1, solve(x2).1);
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi.max(1e-300) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = solve(x1).1;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = solve(x2).1;
        }
    }
    let b = if f1 <= f2 { x1 } else { x2 };
    // The boundary b = 0 is not an interior golden-section point.
    let b = if solve(0.0).1 <= solve(b).1 { 0.0 } else { b };
    let (a, _) = solve(b);
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Fit(format!("fitted rate is not positive: {a}")));
    }
    BernsteinParams::new(scale, a, b, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::eval_generalized;

    fn spec(kind: ProcessKind) -> ProcessSpec {
        ProcessSpec::new(kind).unwrap()
    }

    #[test]
    fn claimed_parameters() {
        let yz = spec(ProcessKind::YZMixture);
        assert_eq!(yz.claimed, Some(BernsteinParams::new(2.0, 0.5, 0.0, 1.0).unwrap()));
        assert_eq!(yz.provenance, Provenance::Proved);
        let rad = spec(ProcessKind::RademacherIID);
        assert_eq!(rad.claimed, Some(BernsteinParams::new(2.0, 0.5, 1.0, 1.0).unwrap()));
        let mk = spec(ProcessKind::TwoStateMarkov { rho: 0.7 });
        assert_eq!((mk.claimed, mk.provenance), (None, Provenance::None));
    }

    #[test]
    fn spec_json() {
        let s = ProcessSpec::parse(r#"{"kind": "markov", "rho": 0.25}"#).unwrap();
        assert_eq!(s.kind, ProcessKind::TwoStateMarkov { rho: 0.25 });
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"kind":"markov","rho":0.25}"#);
        assert_eq!(ProcessSpec::parse("yz").unwrap().kind, ProcessKind::YZMixture);
        assert_eq!(
            ProcessSpec::parse(r#"{"kind":"ar1","phi":-0.5}"#).unwrap().kind,
            ProcessKind::BoundedAR1 { phi: -0.5 }
        );
        assert!(ProcessSpec::parse(r#"{"kind":"markov"}"#).is_err());
        assert!(ProcessSpec::parse(r#"{"kind":"markov","rho":1.0}"#).is_err());
        assert!(ProcessSpec::parse(r#"{"kind":"ar1","phi":1.0}"#).is_err());
        assert!(ProcessSpec::parse("cauchy").is_err());
    }

    #[test]
    fn rejects_empty_sizes() {
        let s = spec(ProcessKind::RademacherIID);
        assert!(generate(&s, 0, 5, 1).is_err());
        assert!(generate(&s, 5, 0, 1).is_err());
    }

    #[test]
    fn rademacher_support() {
        let b = generate(&spec(ProcessKind::RademacherIID), 100, 100, 7).unwrap();
        assert!(b.paths.iter().all(|&x| x == 1.0 || x == -1.0));
        assert!(b.latent_y.is_none());
    }

    #[test]
    fn bounded_supports() {
        let u = generate(&spec(ProcessKind::BoundedUniformIID), 200, 50, 3).unwrap();
        assert!(u.paths.iter().all(|x| x.abs() <= 1.0));
        let phi = 0.6;
        let ar = generate(&spec(ProcessKind::BoundedAR1 { phi }), 200, 50, 3).unwrap();
        assert!(ar.paths.iter().all(|x| x.abs() <= 1.0 / (1.0 - phi)));
        let z = generate(&spec(ProcessKind::Zero), 20, 3, 3).unwrap();
        assert!(z.paths.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn deterministic_and_independent_of_reps() {
        let s = spec(ProcessKind::YZMixture);
        let a = generate(&s, 64, 40, 99).unwrap();
        let b = generate(&s, 64, 40, 99).unwrap();
        assert_eq!(a, b);
        let c = generate(&s, 64, 20, 99).unwrap();
        assert_eq!(&a.paths[..64 * 20], &c.paths[..]);
        let d = generate(&s, 64, 40, 100).unwrap();
        assert_ne!(a.paths, d.paths);
    }

    #[test]
    fn yz_zero_paths_match_y() {
        let b = generate(&spec(ProcessKind::YZMixture), 50, 20_000, 11).unwrap();
        let ys = b.latent_y.as_ref().unwrap();
        for (r, &y) in ys.iter().enumerate() {
            let all_zero = b.path(r).iter().all(|&x| x == 0.0);
            assert_eq!(all_zero, y == 0, "rep {r}");
        }
        let zeros = ys.iter().filter(|&&y| y == 0).count() as f64;
        let frac = zeros / ys.len() as f64;
        // 5 standard errors.
        assert!((frac - 0.5).abs() < 5.0 * (0.25 / ys.len() as f64).sqrt(), "{frac}");
    }

    #[test]
    fn yz_mean_is_zero() {
        let b = generate(&spec(ProcessKind::YZMixture), 100, 1000, 5).unwrap();
        let n = b.paths.len() as f64;
        let mean = b.paths.iter().sum::<f64>() / n;
        // Var X = E Y Z^2 = 1/2.
        assert!(mean.abs() < 5.0 * (0.5 / n).sqrt(), "{mean}");
    }

    #[test]
    fn markov_half_is_rademacher_in_bigrams() {
        let steps = 1_000_000;
        let b = generate(&spec(ProcessKind::TwoStateMarkov { rho: 0.5 }), steps, 1, 2024).unwrap();
        let mut counts = [0f64; 4];
        for w in b.paths.windows(2) {
            let i = (w[0] > 0.0) as usize * 2 + (w[1] > 0.0) as usize;
            counts[i] += 1.0;
        }
        let expected = (steps - 1) as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // Upper 1e-3 point of chi-square with 3 degrees of freedom.
        assert!(chi2 < 16.266, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn markov_stay_frequency() {
        let rho = 0.8;
        let steps = 200_000;
        let b = generate(&spec(ProcessKind::TwoStateMarkov { rho }), steps, 1, 4).unwrap();
        let stays = b.paths.windows(2).filter(|w| w[0] == w[1]).count() as f64;
        let m = (steps - 1) as f64;
        assert!((stays / m - rho).abs() < 5.0 * (rho * (1.0 - rho) / m).sqrt());
        let up = b.paths.iter().filter(|&&x| x > 0.0).count() as f64 / steps as f64;
        assert!((up - 0.5).abs() < 0.02);
    }

    #[test]
    fn replications_are_exchangeable() {
        let b = generate(&spec(ProcessKind::BoundedAR1 { phi: 0.5 }), 100, 4000, 8).unwrap();
        let stat: Vec<f64> = (0..b.reps)
            .map(|r| {
                let mut s = 0.0f64;
                let mut m = 0.0f64;
                for x in b.path(r) {
                    s += x;
                    m = m.max(s.abs());
                }
                m
            })
            .collect();
        let half = |parity: usize| -> (f64, f64) {
            let xs: Vec<f64> = stat.iter().skip(parity).step_by(2).copied().collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            (mean, var / xs.len() as f64)
        };
        let (m0, v0) = half(0);
        let (m1, v1) = half(1);
        assert!((m0 - m1).abs() < 5.0 * (v0 + v1).sqrt(), "{m0} vs {m1}");
    }

    fn synthetic(params: &BernsteinParams) -> Vec<TailEstimate> {
        let mut out = Vec::new();
        for n in [10u64, 50, 200] {
            for t in [1.0, 3.0, 8.0, 15.0] {
                let p = eval_generalized(params, n as f64, t).unwrap();
                out.push(TailEstimate {
                    n,
                    t,
                    p_hat: p,
                    ci_low: p,
                    ci_high: p,
                    reps: 1,
                    hits: 0,
                    level: 0.99,
                });
            }
        }
        out
    }

    #[test]
    fn fit_round_trip() {
        for (a, b, gamma) in [(0.5, 1.0, 1.0), (0.3, 0.2, 1.5), (1.2, 3.0, 0.5)] {
            let truth = BernsteinParams::new(0.9, a, b, gamma).unwrap();
            let est: Vec<TailEstimate> = synthetic(&truth)
                .into_iter()
                .filter(|e| e.p_hat > 1e-300)
                .collect();
            let fit = fit_params(&est, 0.9, gamma).unwrap();
            assert!((fit.rate - a).abs() <= 1e-4 * a, "{fit:?}");
            assert!((fit.growth - b).abs() <= 1e-4 * b, "{fit:?}");
        }
    }

    #[test]
    fn fit_without_growth() {
        let truth = BernsteinParams::new(0.9, 0.5, 0.0, 1.0).unwrap();
        let fit = fit_params(&synthetic(&truth), 0.9, 1.0).unwrap();
        assert!(fit.growth <= 1e-6, "{fit:?}");
        assert!((fit.rate - 0.5).abs() < 1e-6);
    }

    #[test]
    fn fit_preconditions() {
        let truth = BernsteinParams::new(0.9, 0.5, 1.0, 1.0).unwrap();
        let est = synthetic(&truth);
        assert!(matches!(fit_params(&est[..2], 0.9, 1.0), Err(Error::Fit(_))));
        let single_t: Vec<TailEstimate> = est.iter().filter(|e| e.t == 3.0).cloned().collect();
        assert!(matches!(fit_params(&single_t, 0.9, 1.0), Err(Error::Fit(_))));
        assert!(matches!(fit_params(&est, 1e-9, 1.0), Err(Error::Fit(_))));
    }
}
