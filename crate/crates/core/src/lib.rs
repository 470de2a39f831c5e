//! Maximal Bernstein-type inequalities made executable.
//!
//! A sequence whose partial sums obey a generalized Bernstein bound
//! `P{|S(m+1,m+n)| > t} <= A exp(-a t^2 / (n + b t^gamma))` also obeys a
//! bound of the same shape for the running maximum of the partial sums,
//! with a smaller rate `c < a` and a larger prefactor `C`. This crate:
//!
//! * evaluates the tail bounds ([`bounds`]) and converts the
//!   mixing-sequence bound into the canonical shape,
//! * synthesizes the constants of the maximal bound by following the
//!   induction step by step, and replays that induction numerically as an
//!   independent check ([`synthesis`]),
//! * simulates the example processes ([`processes`]), computes exact
//!   maximal tails for discrete walks ([`oracle`]) and estimates tails and
//!   the iterated-logarithm statistic by Monte Carlo ([`montecarlo`]).

pub mod bounds;
pub mod error;
pub mod magnitude;
pub mod montecarlo;
pub mod oracle;
pub mod processes;
mod rng;
pub mod synthesis;

pub use bounds::{BRParams, BernsteinParams, ClassicParams, MPRParams};
pub use error::{Error, Result};
pub use magnitude::Magnitude;
pub use montecarlo::{LilRunResult, TailEstimate};
pub use oracle::ExactTail;
pub use processes::{PathBatch, ProcessKind, ProcessSpec, Provenance};
pub use synthesis::{CheckReport, MaximalCertificate, Region, TailCount};

/// Runs `f` on a dedicated rayon pool with `threads` workers, or on the
/// global pool when `threads` is `None`.
///
/// Every parallel routine in this crate reduces deterministically, so the
/// thread count never changes a result.
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::domain("thread count must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::domain(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
