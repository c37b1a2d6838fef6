use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::rational::Rational;

/// Integer envelope counts at one checkpoint: `count_a(n, k)` and `count_b(n, k)`.
pub type CountPair = (BigInt, BigInt);

/// A family of envelope counts indexed by a strictly increasing list of checkpoints.
pub trait ScheduleSource: Send + Sync {
    /// Short kind tag such as `doubling` or `monomial`.
    fn kind(&self) -> &'static str;

    fn params(&self) -> serde_json::Value;

    /// Checkpoint with index `j` (0-based), or `None` past the last one.
    fn checkpoint(&self, j: usize) -> Option<u64>;

    /// Counts at checkpoint `n`, weight `k`; `binom` is C(n, k).
    fn counts(&self, n: u64, k: u64, binom: &BigInt) -> CountPair;

    /// Levels whose counts are `(0, C(n,k))` for every k.
    fn is_idle(&self, _n: u64) -> bool {
        false
    }

    /// Per-word targets `(a, b)` as floats with absolute error at most 2^-50,
    /// such that `count_a / C(n,k)` lies in `[a - 1/C(n,k), a]` up to that error and
    /// `count_b / C(n,k)` in `[b, b + 1/C(n,k)]`.
    fn targets_f64(&self, _n: u64, _k: u64) -> Option<(f64, f64)> {
        None
    }

    /// The function the envelopes converge to, where known.
    fn target_value(&self, _p: &Rational) -> Option<Rational> {
        None
    }
}

/// Shared handle to a schedule plus optional per-entry overrides.
#[derive(Clone)]
pub struct EnvelopeSchedule {
    inner: Arc<dyn ScheduleSource>,
    overrides: Arc<BTreeMap<(u64, u64), CountPair>>,
}

impl fmt::Debug for EnvelopeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnvelopeSchedule")
            .field("kind", &self.inner.kind())
            .field("params", &self.inner.params())
            .field("overrides", &self.overrides.len())
            .finish()
    }
}

impl EnvelopeSchedule {
    pub fn new(src: impl ScheduleSource + 'static) -> Self {
        EnvelopeSchedule { inner: Arc::new(src), overrides: Arc::new(BTreeMap::new()) }
    }

    pub fn from_arc(inner: Arc<dyn ScheduleSource>) -> Self {
        EnvelopeSchedule { inner, overrides: Arc::new(BTreeMap::new()) }
    }

    /// Replaces the counts at `(n, k)`; used to build corrupted fixtures.
    pub fn with_override(mut self, n: u64, k: u64, a: BigInt, b: BigInt) -> Self {
        Arc::make_mut(&mut self.overrides).insert((n, k), (a, b));
        self
    }

    pub fn has_overrides(&self) -> bool {
        !self.overrides.is_empty()
    }

    pub fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    pub fn params(&self) -> serde_json::Value {
        self.inner.params()
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({ "kind": self.kind(), "params": self.params(), "overrides": self.overrides.len() })
    }

    pub fn checkpoint(&self, j: usize) -> Option<u64> {
        self.inner.checkpoint(j)
    }

    /// Checkpoints not exceeding `max_n`.
    pub fn checkpoints_upto(&self, max_n: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut j = 0;
        while let Some(n) = self.checkpoint(j) {
            if n > max_n {
                break;
            }
            out.push(n);
            j += 1;
        }
        out
    }

    pub fn checkpoint_index(&self, n: u64) -> Option<usize> {
        let mut j = 0;
        while let Some(c) = self.checkpoint(j) {
            if c == n {
                return Some(j);
            }
            if c > n {
                return None;
            }
            j += 1;
        }
        None
    }

    pub fn counts(&self, n: u64, k: u64, binom: &BigInt) -> CountPair {
        if let Some(c) = self.overrides.get(&(n, k)) {
            return c.clone();
        }
        if self.inner.is_idle(n) {
            return (BigInt::zero(), binom.clone());
        }
        self.inner.counts(n, k, binom)
    }

    pub fn is_idle(&self, n: u64) -> bool {
        self.inner.is_idle(n) && !self.overrides.keys().any(|&(m, _)| m == n)
    }

    pub fn targets_f64(&self, n: u64, k: u64) -> Option<(f64, f64)> {
        if self.has_overrides() {
            return None;
        }
        self.inner.targets_f64(n, k)
    }

    pub fn supports_fast_path(&self) -> bool {
        !self.has_overrides() && {
            let n = self.checkpoint(0).unwrap_or(1);
            self.inner.is_idle(n) || self.inner.targets_f64(n, 0).is_some()
        }
    }

    pub fn target_value(&self, p: &Rational) -> Option<Rational> {
        self.inner.target_value(p)
    }

    /// Counts for every k at checkpoint `n`.
    pub fn row(&self, n: u64) -> Vec<CountPair> {
        crate::rational::binomial_row(n).iter().enumerate().map(|(k, b)| self.counts(n, k as u64, b)).collect()
    }
}
