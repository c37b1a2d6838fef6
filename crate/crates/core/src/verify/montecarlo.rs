use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;

use super::{Target, VerifyError};
use crate::coin::{BitStream, CoinError, CoinSource};
use crate::rational::{format_rational, int, round_down_abs, round_up_abs, sqrt_bounds, Rational};

/// Standard deviations covered by the reported interval.
pub const Z_SCORE: i64 = 3;

#[derive(Debug, Clone)]
pub struct MonteCarloOptions {
    pub runs: u64,
    pub seed: u64,
    /// Runs still undecided after this many tosses are censored.
    pub max_tosses: Option<u64>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl MonteCarloOptions {
    pub fn new(runs: u64, seed: u64) -> Self {
        MonteCarloOptions { runs, seed, max_tosses: None, threads: None }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Quantiles {
    pub q50: u64,
    pub q90: u64,
    pub q99: u64,
}

/// Rationals are `num/den` strings; the tail curve lists `[n, P(N > n)]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimulationReport {
    pub plan_hash: String,
    pub target: String,
    pub p: String,
    pub runs: u64,
    pub successes: u64,
    /// Runs cut off by the toss budget; they count as neither success nor failure.
    pub censored: u64,
    pub estimate: String,
    pub wilson: [String; 2],
    pub toss_mean: String,
    pub toss_max: u64,
    pub quantiles: Quantiles,
    pub tail: Vec<(u64, String)>,
    pub seed: u64,
}

impl SimulationReport {
    pub fn estimate_f64(&self) -> f64 {
        crate::rational::to_f64(&crate::rational::parse_rational(&self.estimate).expect("report rational"))
    }

    pub fn interval(&self) -> (Rational, Rational) {
        let p = |s: &str| crate::rational::parse_rational(s).expect("report rational");
        (p(&self.wilson[0]), p(&self.wilson[1]))
    }
}

/// Wilson score interval at `Z_SCORE` for x successes in n trials, rounded outward to 2^-64.
pub fn wilson_interval(x: u64, n: u64) -> (Rational, Rational) {
    let z2 = int(Z_SCORE * Z_SCORE);
    let (xr, nr) = (int(x), int(n));
    let denom = &nr + &z2;
    let centre = (&xr + &z2 / int(2)) / &denom;
    let rad = &xr * (&nr - &xr) / &nr + &z2 / int(4);
    let (_, root_hi) = sqrt_bounds(&rad, 96);
    let half = int(Z_SCORE) * root_hi / &denom;
    let lo = round_down_abs(&(&centre - &half), 64).max(Rational::zero());
    let hi = round_up_abs(&(&centre + &half), 64).min(int(1));
    (lo, hi)
}

/// Tail evaluation points: every n up to 256, then eight per doubling.
fn tail_points(max: u64) -> Vec<u64> {
    let mut pts: Vec<u64> = (0..=max.min(256)).collect();
    let mut x = 256.0f64;
    loop {
        x *= 2f64.powf(0.125);
        let n = x.floor() as u64;
        if n > max {
            break;
        }
        if pts.last() != Some(&n) {
            pts.push(n);
        }
    }
    pts
}

/// Runs independent replicas, replica i on the source forked as stream i of `seed`.
/// The report depends only on the target, p, runs, seed and budget.
pub fn monte_carlo(target: &Target, p: &Rational, opts: &MonteCarloOptions) -> Result<SimulationReport, VerifyError> {
    if opts.runs == 0 {
        return Err(VerifyError::NoRuns);
    }
    let base = CoinSource::seeded(opts.seed, p.clone())?;
    let one = |i: u64| -> Result<(Option<bool>, u64), VerifyError> {
        let mut src = base.fork(i);
        if let Some(b) = opts.max_tosses {
            src = src.with_budget(b);
        }
        match target.run(&mut src) {
            Ok(o) => Ok((Some(o.bit), o.tosses)),
            Err(e) if is_budget_stop(&e) && opts.max_tosses.is_some() => Ok((None, src.tosses())),
            Err(e) => Err(e),
        }
    };
    let work = || (0..opts.runs).into_par_iter().map(one).collect::<Result<Vec<_>, _>>();
    let results = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| VerifyError::BadTarget(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let runs = opts.runs;
    let successes = results.iter().filter(|r| r.0 == Some(true)).count() as u64;
    let censored = results.iter().filter(|r| r.0.is_none()).count() as u64;
    let decided = runs - censored;
    let mut tosses: Vec<u64> = results.iter().map(|r| r.1).collect();
    tosses.sort_unstable();
    let total: BigInt = tosses.iter().map(|&t| BigInt::from(t)).sum();
    let q = |f: f64| tosses[((f * runs as f64).ceil() as usize).clamp(1, runs as usize) - 1];
    let toss_max = *tosses.last().expect("runs > 0");
    let tail = tail_points(toss_max)
        .into_iter()
        .map(|n| {
            let above = runs as usize - tosses.partition_point(|&t| t <= n);
            (n, format_rational(&Rational::new(above.into(), runs.into())))
        })
        .collect();
    let (estimate, wilson) = if decided == 0 {
        (Rational::zero(), (Rational::zero(), int(1)))
    } else {
        (Rational::new(successes.into(), decided.into()), wilson_interval(successes, decided))
    };
    Ok(SimulationReport {
        plan_hash: target.hash(),
        target: target.label(),
        p: format_rational(p),
        runs,
        successes,
        censored,
        estimate: format_rational(&estimate),
        wilson: [format_rational(&wilson.0), format_rational(&wilson.1)],
        toss_mean: format_rational(&Rational::new(total, runs.into())),
        toss_max,
        quantiles: Quantiles { q50: q(0.5), q90: q(0.9), q99: q(0.99) },
        tail,
        seed: opts.seed,
    })
}

fn is_budget_stop(e: &VerifyError) -> bool {
    use crate::combinators::PlanError;
    use crate::envelope::EngineError;
    matches!(
        e,
        VerifyError::Coin(CoinError::SourceExhausted(_))
            | VerifyError::Engine(EngineError::Source(CoinError::SourceExhausted(_)))
            | VerifyError::Plan(PlanError::Coin(CoinError::SourceExhausted(_)))
            | VerifyError::Plan(PlanError::Engine(EngineError::Source(CoinError::SourceExhausted(_))))
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use num_traits::Signed;

    #[test]
    fn wilson_contains_estimate() {
        for (x, n) in [(0u64, 10u64), (3, 10), (10, 10), (4999, 10000)] {
            let (lo, hi) = wilson_interval(x, n);
            let est = Rational::new(x.into(), n.into());
            assert!(lo <= est && est <= hi, "{x}/{n}");
            assert!(!lo.is_negative());
        }
    }

    #[test]
    fn zero_runs_rejected() {
        let r = monte_carlo(&Target::FairBit, &rat(3, 10), &MonteCarloOptions::new(0, 1));
        assert!(matches!(r, Err(VerifyError::NoRuns)));
    }

    #[test]
    fn deterministic_across_threads() {
        let mut o = MonteCarloOptions::new(2000, 5);
        o.threads = Some(1);
        let a = monte_carlo(&Target::FairBit, &rat(3, 10), &o).unwrap();
        o.threads = Some(4);
        let b = monte_carlo(&Target::FairBit, &rat(3, 10), &o).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
