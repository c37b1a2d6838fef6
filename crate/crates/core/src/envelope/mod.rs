//! The envelope engine: words of tosses, their ranks, and accept/reject/continue decisions
//! driven by an [`EnvelopeSchedule`].

mod fast;
pub mod schedule;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use parking_lot::Mutex;

use crate::coin::{BitStream, CoinError};
use crate::rational::{bernstein_sum, binomial, binomial_row, Rational};

pub use schedule::{CountPair, EnvelopeSchedule, ScheduleSource};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid schedule at n={n}, k={k}: {detail}")]
    InvalidSchedule { n: u64, k: u64, detail: String },
    #[error("word length {0} is not a checkpoint")]
    NotACheckpoint(u64),
    #[error("schedule has no checkpoint after n={0} and the run is undecided")]
    ScheduleExhausted(u64),
    #[error(transparent)]
    Source(#[from] CoinError),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Decision {
    OutputOne,
    OutputZero,
    Continue,
}

impl Decision {
    pub fn bit(self) -> Option<bool> {
        match self {
            Decision::OutputOne => Some(true),
            Decision::OutputZero => Some(false),
            Decision::Continue => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct OutcomeRecord {
    pub bit: bool,
    pub tosses: u64,
    /// Checkpoint at which the decision was made.
    pub checkpoint: u64,
    /// Times the floating-point path deferred to exact recomputation.
    pub fallbacks: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// Big-integer ranks at every checkpoint.
    Exact,
    /// Exact ranks for small checkpoints, certified floating-point ranks above.
    Accelerated,
}

/// Lexicographic rank of `bits` among words of the same length and weight (0 before 1).
pub fn word_lexrank(bits: &[bool]) -> BigInt {
    // scan from the right keeping x = C(t, q): t positions after pos, q ones among them
    let mut sum = BigInt::zero();
    let mut x = BigInt::one();
    let mut q: u64 = 0;
    let len = bits.len() as u64;
    for (idx, &b) in bits.iter().enumerate().rev() {
        let t = len - idx as u64 - 1;
        if b {
            if t > q {
                sum += &x * (t - q) / (q + 1);
            }
            x = x * (t + 1) / (q + 1);
            q += 1;
        } else {
            x = x * (t + 1) / (t + 1 - q);
        }
    }
    sum
}

pub(crate) struct Transition {
    lo: BigInt,
    bs: BigInt,
    deficit_a: BigInt,
    deficit_b: BigInt,
}

/// Largest checkpoint whose transitions are memoised.
const MEMO_MAX_N: u64 = 4096;
const COUNT_CACHE_MAX: usize = 1 << 16;

/// Schedule plus caches shared by every run against it.
pub struct RankContext {
    schedule: EnvelopeSchedule,
    memo: Mutex<HashMap<(usize, u64, u64), Arc<Transition>>>,
    counts: Mutex<HashMap<(u64, u64), CountPair>>,
    pub(crate) values: Mutex<HashMap<(u64, u64), fast::LevelValue>>,
}

impl std::fmt::Debug for RankContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RankContext").field("schedule", &self.schedule).finish()
    }
}

impl RankContext {
    pub fn new(schedule: EnvelopeSchedule) -> Self {
        RankContext {
            schedule,
            memo: Mutex::new(HashMap::new()),
            counts: Mutex::new(HashMap::new()),
            values: Mutex::new(HashMap::new()),
        }
    }

    pub fn schedule(&self) -> &EnvelopeSchedule {
        &self.schedule
    }

    fn checked_counts(&self, n: u64, k: u64, binom: &BigInt) -> Result<CountPair, EngineError> {
        let cached = self.counts.lock().get(&(n, k)).cloned();
        let (a, b) = match cached {
            Some(c) => c,
            None => {
                let c = self.schedule.counts(n, k, binom);
                let mut cache = self.counts.lock();
                if cache.len() < COUNT_CACHE_MAX {
                    cache.insert((n, k), c.clone());
                }
                c
            }
        };
        if a.is_negative() || a > b || &b > binom {
            return Err(EngineError::InvalidSchedule {
                n,
                k,
                detail: format!("counts ({a}, {b}) outside 0 <= a <= b <= {binom}"),
            });
        }
        Ok((a, b))
    }

    /// Decision and B\A rank at the first checkpoint.
    fn first_level(&self, word: &[bool]) -> Result<(Decision, BigInt), EngineError> {
        let n = word.len() as u64;
        let k = word.iter().filter(|&&b| b).count() as u64;
        let r = word_lexrank(word);
        let (a, b) = self.checked_counts(n, k, &binomial(n, k))?;
        Ok(classify(r, &a, &b))
    }

    pub(crate) fn transition(&self, j: usize, n: u64, m: u64, k: u64, i: u64) -> Result<Arc<Transition>, EngineError> {
        if m <= MEMO_MAX_N {
            if let Some(t) = self.memo.lock().get(&(j, k, i)) {
                return Ok(t.clone());
            }
        }
        let t = Arc::new(self.compute_transition(n, m, k, i)?);
        if m <= MEMO_MAX_N {
            self.memo.lock().insert((j, k, i), t.clone());
        }
        Ok(t)
    }

    fn compute_transition(&self, n: u64, m: u64, k: u64, i: u64) -> Result<Transition, EngineError> {
        let d = m - n;
        let lo_i = k.saturating_sub(d);
        let hi_i = k.min(n);
        let idle = self.schedule.is_idle(n);
        let mut b1 = binomial(n, lo_i);
        let mut b2 = binomial(d, k - lo_i);
        let mut ta = BigInt::zero();
        let mut tgap = BigInt::zero();
        let mut lo = BigInt::zero();
        let mut bs = BigInt::zero();
        for ip in lo_i..=hi_i {
            let gterm = if idle {
                &b1 * &b2
            } else {
                let (ca, cb) = self.checked_counts(n, ip, &b1)?;
                if !ca.is_zero() {
                    ta += &ca * &b2;
                }
                (cb - ca) * &b2
            };
            if ip < i {
                lo += &gterm;
            }
            if ip == i {
                bs = b2.clone();
            }
            tgap += gterm;
            if ip < hi_i {
                b1 = b1 * (n - ip) / (ip + 1);
                b2 = b2 * (k - ip) / (d + ip + 1 - k);
            }
        }
        let (ca, cb) = self.checked_counts(m, k, &binomial(m, k))?;
        let deficit_a = ca - &ta;
        let deficit_b = cb - &ta;
        if deficit_a.is_negative() {
            return Err(EngineError::InvalidSchedule {
                n: m,
                k,
                detail: format!("lower consistency fails: count_a below shifted sum by {}", -deficit_a),
            });
        }
        if deficit_b > tgap {
            return Err(EngineError::InvalidSchedule {
                n: m,
                k,
                detail: format!("upper consistency fails: count_b exceeds shifted sum by {}", deficit_b - tgap),
            });
        }
        Ok(Transition { lo, bs, deficit_a, deficit_b })
    }

    /// Exact decision and rank after moving from checkpoint j (prefix with `i` ones and B\A
    /// rank `rank`) to checkpoint j+1 with `suffix`.
    pub(crate) fn exact_step(
        &self,
        j: usize,
        n: u64,
        i: u64,
        rank: &BigInt,
        suffix: &[bool],
        suffix_ones: u64,
    ) -> Result<(Decision, BigInt), EngineError> {
        let m = n + suffix.len() as u64;
        let k = i + suffix_ones;
        let t = self.transition(j, n, m, k, i)?;
        let r = &t.lo + rank * &t.bs + word_lexrank(suffix);
        Ok(classify_shifted(r, &t.deficit_a, &t.deficit_b))
    }

    /// Replays a full word exactly through every checkpoint up to its length.
    fn replay(&self, word: &[bool], upto: usize) -> Result<(Decision, BigInt, u64, u64), EngineError> {
        let n1 = self.schedule.checkpoint(0).ok_or(EngineError::ScheduleExhausted(0))?;
        let (mut dec, mut rank) = self.first_level(&word[..n1 as usize])?;
        let mut n = n1;
        let mut i = word[..n1 as usize].iter().filter(|&&b| b).count() as u64;
        for j in 0..upto {
            if dec != Decision::Continue {
                break;
            }
            let m = self.schedule.checkpoint(j + 1).ok_or(EngineError::ScheduleExhausted(n))?;
            let suffix = &word[n as usize..m as usize];
            let s = suffix.iter().filter(|&&b| b).count() as u64;
            let (d, r) = self.exact_step(j, n, i, &rank, suffix, s)?;
            dec = d;
            rank = r;
            i += s;
            n = m;
        }
        Ok((dec, rank, n, i))
    }
}

fn classify(r: BigInt, a: &BigInt, b: &BigInt) -> (Decision, BigInt) {
    if &r < a {
        (Decision::OutputOne, BigInt::zero())
    } else if &r < b {
        (Decision::Continue, r - a)
    } else {
        (Decision::OutputZero, BigInt::zero())
    }
}

fn classify_shifted(r: BigInt, deficit_a: &BigInt, deficit_b: &BigInt) -> (Decision, BigInt) {
    classify(r, deficit_a, deficit_b)
}

/// Decision for a word whose length is a checkpoint. Words decided at an earlier checkpoint
/// keep that decision.
pub fn decide(ctx: &RankContext, word: &[bool]) -> Result<Decision, EngineError> {
    let len = word.len() as u64;
    let j = ctx.schedule.checkpoint_index(len).ok_or(EngineError::NotACheckpoint(len))?;
    Ok(ctx.replay(word, j)?.0)
}

/// Runs the factory against `source` until a checkpoint decides.
pub fn simulate(ctx: &RankContext, source: &mut dyn BitStream, mode: SimMode) -> Result<OutcomeRecord, EngineError> {
    let start = source.tosses();
    let sched = &ctx.schedule;
    let n1 = sched.checkpoint(0).ok_or(EngineError::ScheduleExhausted(0))?;
    let mut bits: Vec<bool> = Vec::new();
    let mut i = source.fill(n1, &mut bits)?;
    let (mut dec, rank) = ctx.first_level(&bits)?;
    let mut n = n1;
    let mut j = 0usize;
    let mut exact_rank = Some(rank);
    let mut fast_state: Option<fast::FastState> = None;
    let mut fallbacks = 0u32;
    let use_fast = mode == SimMode::Accelerated && sched.supports_fast_path();
    while dec == Decision::Continue {
        let m = sched.checkpoint(j + 1).ok_or(EngineError::ScheduleExhausted(n))?;
        let s = source.fill(m - n, &mut bits)?;
        let k = i + s;
        if use_fast && m > fast::FAST_MIN_N {
            let state = match fast_state.take() {
                Some(st) => st,
                None => fast::FastState::from_exact(exact_rank.as_ref().expect("exact rank"), n, i),
            };
            match fast::step(ctx, &state, n, i, m, k)? {
                Some((d, st)) => {
                    dec = d;
                    fast_state = Some(st);
                    exact_rank = None;
                }
                None => {
                    fallbacks += 1;
                    let (d, r, _, _) = ctx.replay(&bits, j + 1)?;
                    dec = d;
                    fast_state = Some(fast::FastState::from_exact(&r, m, k));
                    exact_rank = None;
                }
            }
        } else {
            let rank = exact_rank.take().expect("exact rank");
            let (d, r) = ctx.exact_step(j, n, i, &rank, &bits[n as usize..], s)?;
            dec = d;
            exact_rank = Some(r);
        }
        i = k;
        n = m;
        j += 1;
    }
    Ok(OutcomeRecord { bit: dec == Decision::OutputOne, tosses: source.tosses() - start, checkpoint: n, fallbacks })
}

/// Envelope values `(g_n(p), h_n(p))` evaluated exactly.
pub fn envelope_eval(schedule: &EnvelopeSchedule, p: &Rational, n: u64) -> Result<(Rational, Rational), EngineError> {
    if schedule.checkpoint_index(n).is_none() {
        return Err(EngineError::NotACheckpoint(n));
    }
    let row = schedule.row(n);
    let (ca, cb): (Vec<BigInt>, Vec<BigInt>) = row.into_iter().unzip();
    Ok((bernstein_sum(&ca, p), bernstein_sum(&cb, p)))
}

/// Envelope values as floats with a certified absolute error bound.
pub fn envelope_eval_f64(schedule: &EnvelopeSchedule, p: f64, n: u64) -> Result<fast::EnvelopeBound, EngineError> {
    if schedule.checkpoint_index(n).is_none() {
        return Err(EngineError::NotACheckpoint(n));
    }
    Ok(fast::envelope_bound(schedule, p, n))
}

pub use fast::EnvelopeBound;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ViolationKind {
    LowerConsistency,
    UpperConsistency,
    Bounds,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub n: u64,
    pub k: u64,
    pub detail: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub checked_up_to: u64,
    pub checkpoints: Vec<u64>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn consistency_violations(&self) -> usize {
        self.violations.iter().filter(|v| v.kind != ViolationKind::Bounds).count()
    }
}

/// Checks bounds at every checkpoint and the consistency inequalities between consecutive
/// checkpoints, up to `max_n`.
pub fn validate_schedule(schedule: &EnvelopeSchedule, max_n: u64) -> ValidationReport {
    let cps = schedule.checkpoints_upto(max_n);
    let mut violations = Vec::new();
    let mut prev: Option<(u64, Vec<CountPair>)> = None;
    for &m in &cps {
        let binoms = binomial_row(m);
        let row: Vec<CountPair> = binoms.iter().enumerate().map(|(k, b)| schedule.counts(m, k as u64, b)).collect();
        for (k, ((a, b), c)) in row.iter().zip(&binoms).enumerate() {
            if a.is_negative() || a > b || b > c {
                violations.push(Violation {
                    kind: ViolationKind::Bounds,
                    n: m,
                    k: k as u64,
                    detail: format!("0 <= {a} <= {b} <= {c} fails"),
                });
            }
        }
        if let Some((n, prow)) = &prev {
            let d = m - n;
            let bd = binomial_row(d);
            for k in 0..=m {
                let lo_i = k.saturating_sub(d);
                let hi_i = k.min(*n);
                let mut ta = BigInt::zero();
                let mut tb = BigInt::zero();
                for ip in lo_i..=hi_i {
                    let c = &bd[(k - ip) as usize];
                    ta += &prow[ip as usize].0 * c;
                    tb += &prow[ip as usize].1 * c;
                }
                let (a, b) = &row[k as usize];
                if &ta > a {
                    violations.push(Violation {
                        kind: ViolationKind::LowerConsistency,
                        n: m,
                        k,
                        detail: format!("shifted lower sum {ta} exceeds count_a {a}"),
                    });
                }
                if &tb < b {
                    violations.push(Violation {
                        kind: ViolationKind::UpperConsistency,
                        n: m,
                        k,
                        detail: format!("shifted upper sum {tb} below count_b {b}"),
                    });
                }
            }
        }
        prev = Some((m, row));
    }
    ValidationReport { checked_up_to: max_n, checkpoints: cps, violations }
}

/// Writes `n,k,count_a,count_b` rows for every checkpoint up to `max_n`.
pub fn dump_csv(schedule: &EnvelopeSchedule, max_n: u64, out: &mut dyn Write) -> Result<(), EngineError> {
    writeln!(out, "# schedule={} params={}", schedule.kind(), schedule.params())?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| EngineError::Csv(e.to_string());
    w.write_record(["n", "k", "count_a", "count_b"]).map_err(csv_err)?;
    for n in schedule.checkpoints_upto(max_n) {
        for (k, (a, b)) in schedule.row(n).iter().enumerate() {
            w.write_record([n.to_string(), k.to_string(), a.to_string(), b.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Table-backed schedule loaded from a CSV dump.
#[derive(Debug, Clone)]
pub struct TableSchedule {
    pub label: String,
    pub checkpoints: Vec<u64>,
    pub rows: HashMap<u64, Vec<CountPair>>,
}

impl TableSchedule {
    pub fn new(label: impl Into<String>, rows: Vec<(u64, Vec<CountPair>)>) -> Self {
        let checkpoints = rows.iter().map(|(n, _)| *n).collect();
        TableSchedule { label: label.into(), checkpoints, rows: rows.into_iter().collect() }
    }

    pub fn load_csv(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)?;
        let label = text.lines().next().and_then(|l| l.strip_prefix("# ")).unwrap_or("table").to_string();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut rows: Vec<(u64, Vec<CountPair>)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| EngineError::Csv(e.to_string()))?;
            let field = |i: usize| rec.get(i).ok_or_else(|| EngineError::Csv(format!("short row {rec:?}")));
            let n: u64 = field(0)?.parse().map_err(|_| EngineError::Csv(format!("bad n in {rec:?}")))?;
            let k: u64 = field(1)?.parse().map_err(|_| EngineError::Csv(format!("bad k in {rec:?}")))?;
            let a: BigInt = field(2)?.parse().map_err(|_| EngineError::Csv(format!("bad count_a in {rec:?}")))?;
            let b: BigInt = field(3)?.parse().map_err(|_| EngineError::Csv(format!("bad count_b in {rec:?}")))?;
            if rows.last().map(|(m, _)| *m) != Some(n) {
                if rows.last().is_some_and(|(m, _)| *m >= n) {
                    return Err(EngineError::Csv(format!("checkpoints not increasing at n={n}")));
                }
                rows.push((n, Vec::new()));
            }
            let row = &mut rows.last_mut().expect("row").1;
            if row.len() as u64 != k {
                return Err(EngineError::Csv(format!("missing k before n={n}, k={k}")));
            }
            row.push((a, b));
        }
        for (n, row) in &rows {
            if row.len() as u64 != n + 1 {
                return Err(EngineError::Csv(format!("checkpoint {n} has {} rows", row.len())));
            }
        }
        Ok(TableSchedule::new(label, rows))
    }
}

impl ScheduleSource for TableSchedule {
    fn kind(&self) -> &'static str {
        "table"
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "label": self.label, "checkpoints": self.checkpoints })
    }

    fn checkpoint(&self, j: usize) -> Option<u64> {
        self.checkpoints.get(j).copied()
    }

    fn counts(&self, n: u64, k: u64, _binom: &BigInt) -> CountPair {
        self.rows.get(&n).and_then(|r| r.get(k as usize)).cloned().unwrap_or_default()
    }
}

/// Exact probabilities that a run on a p-coin has output 1, output 0, or is still undecided
/// at checkpoint n.
pub fn decided_mass(
    schedule: &EnvelopeSchedule,
    p: &Rational,
    n: u64,
) -> Result<(Rational, Rational, Rational), EngineError> {
    let (g, h) = envelope_eval(schedule, p, n)?;
    let zero = Rational::one() - &h;
    let undecided = h - &g;
    Ok((g, zero, undecided))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_lexrank(bits: &[bool]) -> u64 {
        let k = bits.iter().filter(|&&b| b).count();
        let n = bits.len();
        let target: u64 = bits.iter().fold(0, |acc, &b| acc * 2 + b as u64);
        (0u64..target).filter(|w| w.count_ones() as usize == k && (*w >> n) == 0).count() as u64
    }

    fn word(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn lexrank_examples() {
        assert_eq!(word_lexrank(&word("0101")), BigInt::from(1));
        assert_eq!(word_lexrank(&word("1100")), BigInt::from(5));
        assert_eq!(word_lexrank(&word("0011")), BigInt::from(0));
        assert_eq!(word_lexrank(&[]), BigInt::from(0));
    }

    #[test]
    fn lexrank_matches_enumeration() {
        for n in 0..=10u32 {
            for w in 0u64..(1 << n) {
                let bits: Vec<bool> = (0..n).rev().map(|i| (w >> i) & 1 == 1).collect();
                assert_eq!(word_lexrank(&bits), BigInt::from(naive_lexrank(&bits)), "{bits:?}");
            }
        }
    }
}
