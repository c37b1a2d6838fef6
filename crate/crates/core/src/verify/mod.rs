//! Exhaustive-tape oracles, hypergeometric and Bernstein utilities, the feasibility
//! diagnostic, the Monte Carlo harness and tail fitting.

mod lemmas;
mod montecarlo;
mod oracle;
mod stats;
mod tails;

use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::coin::{BitStream, CoinError, Outcome};
use crate::combinators::{plan_hash, plan_value, run_plan, von_neumann_bit, FactoryPlan, PlanError};
use crate::envelope::{simulate, EngineError, RankContext, SimMode};
use crate::interval::Interval;
use crate::rational::Rational;
use crate::schedules::{ScheduleError, ScheduleSpec};
use crate::walk::{approx_double_bit, walk_bias_exact, WalkConfig};

pub use lemmas::{lemma_suite, LemmaCheck};
pub use montecarlo::{monte_carlo, wilson_interval, MonteCarloOptions, SimulationReport, Z_SCORE};
pub use oracle::{oracle_enumerate, OracleResult, MAX_ORACLE_DEPTH};
pub use stats::{bernstein_eval, feasibility_check, hypergeom_pmf, Feasibility, HypergeomSpec};
pub use tails::{tail_profile, TailFit, GEOMETRIC_RESIDUAL};

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("oracle depth {0} exceeds {MAX_ORACLE_DEPTH}")]
    DepthTooLarge(u32),
    #[error("monte carlo needs at least one run")]
    NoRuns,
    #[error("tail curve has only {0} usable points, need 3")]
    InsufficientTail(usize),
    #[error("unrecognised target {0:?}")]
    BadTarget(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Coin(#[from] CoinError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Anything the harness can run on a coin.
#[derive(Clone)]
pub enum Target {
    Plan(FactoryPlan),
    Schedule {
        spec: ScheduleSpec,
        ctx: Arc<RankContext>,
        mode: SimMode,
    },
    Walk(WalkConfig),
    /// A single von Neumann fair bit.
    FairBit,
}

impl std::fmt::Debug for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl Target {
    pub fn schedule(spec: ScheduleSpec, mode: SimMode) -> Result<Target, VerifyError> {
        let ctx = Arc::new(RankContext::new(spec.build()?));
        Ok(Target::Schedule { spec, ctx, mode })
    }

    /// `walk:N`, `fair`, or any schedule target string.
    pub fn parse(s: &str, mode: SimMode) -> Result<Target, VerifyError> {
        if s == "fair" {
            return Ok(Target::FairBit);
        }
        if let Some(n) = s.strip_prefix("walk:") {
            let steps: u64 = n.parse().map_err(|_| VerifyError::BadTarget(s.into()))?;
            if steps == 0 {
                return Err(VerifyError::BadTarget(s.into()));
            }
            return Ok(Target::Walk(WalkConfig::new(steps)));
        }
        Target::schedule(ScheduleSpec::parse(s)?, mode)
    }

    pub fn label(&self) -> String {
        match self {
            Target::Plan(p) => p.describe(),
            Target::Schedule { spec, .. } => spec.label(),
            Target::Walk(c) => format!("walk:{}", c.steps),
            Target::FairBit => "fair".into(),
        }
    }

    /// Plan hash for plans; a digest of the label otherwise.
    pub fn hash(&self) -> String {
        match self {
            Target::Plan(p) => plan_hash(p),
            other => hex::encode(Sha256::digest(other.label().as_bytes())),
        }
    }

    pub fn run(&self, source: &mut dyn BitStream) -> Result<Outcome, VerifyError> {
        Ok(match self {
            Target::Plan(p) => run_plan(p, source)?,
            Target::Schedule { ctx, mode, .. } => {
                let r = simulate(ctx, source, *mode)?;
                Outcome { bit: r.bit, tosses: r.tosses }
            }
            Target::Walk(c) => approx_double_bit(*c, source)?,
            Target::FairBit => von_neumann_bit(source)?,
        })
    }

    /// Enclosure of the exact output probability at `p`, where one is available.
    pub fn output_probability(&self, p: &Rational) -> Option<Interval> {
        match self {
            Target::Plan(plan) => plan_value(plan, p).ok(),
            Target::Schedule { ctx, .. } => ctx.schedule().target_value(p).map(Interval::point),
            Target::Walk(c) => (c.steps <= 1 << 16).then(|| Interval::point(walk_bias_exact(c.steps, p))),
            Target::FairBit => Some(Interval::point(Rational::new(1.into(), 2.into()))),
        }
    }
}
