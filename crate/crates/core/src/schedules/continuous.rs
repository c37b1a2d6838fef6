use std::collections::HashMap;
use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed};
use sha2::{Digest, Sha256};

use super::polya::{polya_exponent, HomogeneousPoly};
use super::{check_margin, ScheduleError, TargetFn};
use crate::envelope::{CountPair, ScheduleSource};
use crate::rational::{binomial_row, ceil_int, floor_int, format_rational, int, pow2, rat, Rational};

#[derive(Debug, Clone)]
pub struct ContinuousOptions {
    /// Degree the doubling search starts from at the first level.
    pub min_degree: u64,
    pub max_degree: u64,
    /// The Bernstein error is certified on 2^grid_bits + 1 equispaced points.
    pub grid_bits: u32,
    pub polya_max: u64,
}

impl Default for ContinuousOptions {
    fn default() -> Self {
        ContinuousOptions { min_degree: 32, max_degree: 1 << 12, grid_bits: 10, polya_max: 1 << 16 }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LevelInfo {
    pub level: u32,
    pub degree: u64,
    /// Pólya shift applied after this level (0 for the last one).
    pub shift: u64,
    pub checkpoint: u64,
    /// Largest grid deviation of the Bernstein polynomial from f, as `num/den`.
    pub grid_error: String,
}

/// Envelopes built from shifted Bernstein polynomials of a continuous target, one checkpoint
/// per level.
#[derive(Debug, Clone)]
pub struct ContinuousSchedule {
    f: TargetFn,
    eps: Rational,
    pub levels: Vec<LevelInfo>,
    rows: HashMap<u64, Vec<CountPair>>,
    checkpoints: Vec<u64>,
    pub grid_hash: String,
}

/// Max over grid points of |B_m f(x) - f(x)|.
fn grid_error(fk: &[Rational], f: &TargetFn, grid_bits: u32) -> Rational {
    let m = fk.len() as u64 - 1;
    let den = fk.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let binom = binomial_row(m);
    let scaled: Vec<BigInt> = fk.iter().zip(&binom).map(|(c, b)| (c * int(den.clone())).to_integer() * b).collect();
    let big_n = 1u64 << grid_bits;
    let total = int(den.clone() * num_traits::pow(BigInt::from(big_n), m as usize));
    let mut worst = Rational::from_integer(0.into());
    for j in 0..=big_n {
        // sum_k F_k j^k (N - j)^(m - k)
        let a = BigInt::from(j);
        let b = BigInt::from(big_n - j);
        let mut pa = vec![BigInt::one(); m as usize + 1];
        for k in 1..=m as usize {
            pa[k] = &pa[k - 1] * &a;
        }
        let mut acc = BigInt::from(0);
        let mut pb = BigInt::one();
        for k in (0..=m as usize).rev() {
            acc += &scaled[k] * &pa[k] * &pb;
            pb *= &b;
        }
        let x = Rational::new(a, pow2(grid_bits as u64));
        let err = (Rational::new(acc, BigInt::one()) / &total - f.eval(&x)).abs();
        if err > worst {
            worst = err;
        }
    }
    worst
}

fn level_polys(fk: &[Rational], offset: &Rational) -> (HomogeneousPoly, HomogeneousPoly) {
    let m = fk.len() as u64 - 1;
    let binom = binomial_row(m);
    let lower = fk.iter().zip(&binom).map(|(c, b)| (c - offset) * int(b.clone())).collect();
    let upper = fk.iter().zip(&binom).map(|(c, b)| (c + offset) * int(b.clone())).collect();
    (HomogeneousPoly::new(lower), HomogeneousPoly::new(upper))
}

pub fn continuous_schedule(
    f: TargetFn,
    eps: Rational,
    levels: RangeInclusive<u32>,
    opts: &ContinuousOptions,
) -> Result<ContinuousSchedule, ScheduleError> {
    if levels.is_empty() {
        return Err(ScheduleError::InvalidParams("no levels".into()));
    }
    for i in levels.clone() {
        if Rational::new(BigInt::one(), pow2(i as u64)) * int(4) > eps {
            return Err(ScheduleError::InvalidParams(format!("2^-{i} exceeds eps/4")));
        }
    }
    check_margin(&f, &eps, opts.grid_bits)?;

    struct Built {
        level: u32,
        degree: u64,
        lower: HomogeneousPoly,
        upper: HomogeneousPoly,
        err: Rational,
    }
    let mut built: Vec<Built> = Vec::new();
    let mut hasher = Sha256::new();
    for i in levels {
        let tol = Rational::new(BigInt::one(), pow2(i as u64));
        let mut m = built.last().map_or(opts.min_degree.max(1), |b| 2 * b.degree);
        loop {
            if m > opts.max_degree {
                return Err(ScheduleError::DegreeNotFound { level: i, max_degree: opts.max_degree });
            }
            let fk: Vec<Rational> = (0..=m).map(|k| f.eval(&rat(k as i64, m as i64))).collect();
            let err = grid_error(&fk, &f, opts.grid_bits);
            if err < tol {
                let (lower, upper) = level_polys(&fk, &(tol.clone() * int(3)));
                hasher.update(format!("{i},{m},{}\n", format_rational(&err)));
                built.push(Built { level: i, degree: m, lower, upper, err });
                break;
            }
            m *= 2;
        }
    }

    let mut shifts = Vec::new();
    for w in built.windows(2) {
        let delta = w[1].degree - w[0].degree;
        let d_lo = w[1].lower.sub(&w[0].lower.times_x_plus_y(delta));
        let d_hi = w[0].upper.times_x_plus_y(delta).sub(&w[1].upper);
        let s = polya_exponent(&d_lo, opts.polya_max)?.max(polya_exponent(&d_hi, opts.polya_max)?);
        shifts.push(s);
    }
    shifts.push(0);

    let mut rows = HashMap::new();
    let mut checkpoints = Vec::new();
    let mut infos = Vec::new();
    let mut sigma = 0u64;
    for (b, &s) in built.iter().zip(&shifts) {
        let n = b.degree + sigma;
        let lo = b.lower.times_x_plus_y(sigma);
        let hi = b.upper.times_x_plus_y(sigma);
        let row: Vec<CountPair> = lo.coeffs.iter().zip(&hi.coeffs).map(|(a, c)| (floor_int(a), ceil_int(c))).collect();
        rows.insert(n, row);
        checkpoints.push(n);
        infos.push(LevelInfo {
            level: b.level,
            degree: b.degree,
            shift: s,
            checkpoint: n,
            grid_error: format_rational(&b.err),
        });
        sigma += s;
    }
    Ok(ContinuousSchedule { f, eps, levels: infos, rows, checkpoints, grid_hash: hex::encode(hasher.finalize()) })
}

impl ContinuousSchedule {
    pub fn target(&self) -> &TargetFn {
        &self.f
    }
}

impl ScheduleSource for ContinuousSchedule {
    fn kind(&self) -> &'static str {
        "continuous"
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({
            "f": self.f.label(),
            "eps": format_rational(&self.eps),
            "levels": self.levels,
            "grid_hash": self.grid_hash,
        })
    }

    fn checkpoint(&self, j: usize) -> Option<u64> {
        self.checkpoints.get(j).copied()
    }

    fn counts(&self, n: u64, k: u64, _binom: &BigInt) -> CountPair {
        self.rows.get(&n).and_then(|r| r.get(k as usize)).cloned().unwrap_or_default()
    }

    fn target_value(&self, p: &Rational) -> Option<Rational> {
        Some(self.f.eval(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_needs_no_shift() {
        let f = TargetFn::new("1/2", |_| rat(1, 2));
        let s = continuous_schedule(f, rat(1, 4), 4..=6, &ContinuousOptions::default()).unwrap();
        assert!(s.levels.iter().all(|l| l.shift == 0));
        assert!(s.levels.iter().all(|l| l.grid_error == "0"));
        let n: Vec<u64> = s.levels.iter().map(|l| l.checkpoint).collect();
        assert_eq!(n, vec![32, 64, 128]);
    }

    #[test]
    fn degree_cap_reports_failure() {
        let f = TargetFn::half_plus_sin_over_8();
        let opts = ContinuousOptions { min_degree: 1, max_degree: 1, ..Default::default() };
        let r = continuous_schedule(f, rat(1, 4), 9..=9, &opts);
        assert!(matches!(r, Err(ScheduleError::DegreeNotFound { .. })));
    }

    #[test]
    fn level_offset_must_fit_margin() {
        let f = TargetFn::new("1/2", |_| rat(1, 2));
        assert!(continuous_schedule(f, rat(1, 4), 3..=3, &ContinuousOptions::default()).is_err());
    }
}
