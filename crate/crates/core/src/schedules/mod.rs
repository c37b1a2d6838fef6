//! Concrete envelope schedules.

mod continuous;
mod doubling;
mod monomial;
pub mod polya;
mod smooth;
mod spec;

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::rational::Rational;

pub use continuous::{continuous_schedule, ContinuousOptions, ContinuousSchedule, LevelInfo};
pub use doubling::{DoublingParams, DoublingSchedule};
pub use monomial::MonomialSchedule;
pub use polya::{polya_exponent, HomogeneousPoly};
pub use smooth::{SmoothParams, SmoothSchedule, Smoothness};
pub use spec::{ScheduleSpec, SmoothKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no Pólya exponent up to {max_n}")]
    ExponentNotFound { max_n: u64 },
    #[error("no Bernstein degree up to {max_degree} reaches grid error 2^-{level}")]
    DegreeNotFound { level: u32, max_degree: u64 },
    #[error("cannot load table {0}")]
    Load(String),
}

/// An exactly evaluable target function on [0, 1].
#[derive(Clone)]
pub struct TargetFn {
    label: String,
    eval: Arc<dyn Fn(&Rational) -> Rational + Send + Sync>,
}

impl fmt::Debug for TargetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TargetFn({})", self.label)
    }
}

impl TargetFn {
    pub fn new(label: impl Into<String>, eval: impl Fn(&Rational) -> Rational + Send + Sync + 'static) -> Self {
        TargetFn { label: label.into(), eval: Arc::new(eval) }
    }

    /// `c0 + c1 * p`.
    pub fn affine(c0: Rational, c1: Rational) -> Self {
        let label = format!("{} + {}*p", crate::rational::format_rational(&c0), crate::rational::format_rational(&c1));
        TargetFn::new(label, move |p| &c0 + &c1 * p)
    }

    /// `1/2 + sin(p)/8`, with sin rounded to 2^-64.
    pub fn half_plus_sin_over_8() -> Self {
        TargetFn::new("1/2 + sin(p)/8", |p| {
            let s = crate::rational::sin_dyadic(p, 64);
            Rational::new(1.into(), 2.into()) + s / Rational::from_integer(8.into())
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, p: &Rational) -> Rational {
        (self.eval)(p)
    }
}

/// Points j/2^bits for j = 0..=2^bits.
pub fn dyadic_grid(bits: u32) -> Vec<Rational> {
    let den = crate::rational::pow2(bits as u64);
    (0..=(1u64 << bits)).map(|j| Rational::new(j.into(), den.clone())).collect()
}

/// Checks eps <= f <= 1 - eps on a grid.
pub(crate) fn check_margin(f: &TargetFn, eps: &Rational, bits: u32) -> Result<(), ScheduleError> {
    let hi = Rational::one() - eps;
    if eps <= &Rational::zero() {
        return Err(ScheduleError::InvalidParams("eps must be positive".into()));
    }
    for x in dyadic_grid(bits) {
        let v = f.eval(&x);
        if v < *eps || v > hi {
            return Err(ScheduleError::InvalidParams(format!(
                "f({}) = {} is not inside [eps, 1 - eps]",
                crate::rational::format_rational(&x),
                crate::rational::format_rational(&v)
            )));
        }
    }
    Ok(())
}
