//! Factory plans: immutable trees of coin-simulation combinators with certified ranges.
//!
//! Every node records the closed domain of p it was built for, the certified range of the
//! function it is meant to simulate, an enclosure of the probability it actually outputs 1
//! (these differ only through truncated random-walk doublers), and a bound on that gap.

mod exec;
mod json;
mod value;

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_traits::{One, Signed, Zero};

use crate::coin::CoinError;
use crate::envelope::{EngineError, RankContext, SimMode};
use crate::interval::Interval;
use crate::rational::{format_rational, int, pow2, rat, Rational};
use crate::schedules::{ScheduleError, ScheduleSpec};

pub use exec::{binary_digit, run_plan, von_neumann_bit};
pub use json::{plan_from_json, plan_hash, plan_to_json, PLAN_FORMAT};
pub use value::{plan_target, plan_value};

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("margin violated: {0}")]
    MarginViolated(String),
    #[error("divergence risk: {0}")]
    DivergenceRisk(String),
    #[error("a doubling node has no backend configured")]
    BackendRequired,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("the operands have disjoint domains")]
    DomainMismatch,
    #[error(transparent)]
    Coin(#[from] CoinError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("plan json: {0}")]
    Json(String),
}

/// How a doubling node is realised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    /// The envelope factory for `min(2p, 1 - 2 eps)`.
    Exact,
    /// The random walk truncated after `steps` tosses.
    Approx { steps: u64 },
}

impl Backend {
    /// `exact` or `approx:STEPS`.
    pub fn parse(s: &str) -> Option<Backend> {
        if s == "exact" {
            return Some(Backend::Exact);
        }
        let steps: u64 = s.strip_prefix("approx:")?.parse().ok()?;
        (steps >= 1).then_some(Backend::Approx { steps })
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => f.write_str("exact"),
            Backend::Approx { steps } => write!(f, "approx:{steps}"),
        }
    }
}

/// `a_n <= scale * ratio^n` for every `n >= start`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCertificate {
    pub start: u64,
    pub scale: Rational,
    pub ratio: Rational,
}

/// Nonnegative power-series coefficients.
#[derive(Clone)]
pub enum CoeffStream {
    /// Finitely many coefficients, zero afterwards.
    Explicit(Vec<Rational>),
    /// `a_n = c` for every n.
    Constant(Rational),
    Callback {
        label: String,
        f: Arc<dyn Fn(u64) -> Rational + Send + Sync>,
        cert: Option<TailCertificate>,
    },
}

impl fmt::Debug for CoeffStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoeffStream::Explicit(v) => write!(f, "Explicit({} terms)", v.len()),
            CoeffStream::Constant(c) => write!(f, "Constant({})", format_rational(c)),
            CoeffStream::Callback { label, .. } => write!(f, "Callback({label})"),
        }
    }
}

/// Terms beyond which the certified tail is below this are dropped.
const TAIL_BITS: u64 = 80;
const MAX_TERMS: u64 = 1 << 14;

impl CoeffStream {
    pub fn callback(
        label: impl Into<String>,
        f: impl Fn(u64) -> Rational + Send + Sync + 'static,
        cert: Option<TailCertificate>,
    ) -> Self {
        CoeffStream::Callback { label: label.into(), f: Arc::new(f), cert }
    }

    pub fn coeff(&self, n: u64) -> Rational {
        match self {
            CoeffStream::Explicit(v) => v.get(n as usize).cloned().unwrap_or_else(Rational::zero),
            CoeffStream::Constant(c) => c.clone(),
            CoeffStream::Callback { f, .. } => f(n),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CoeffStream::Explicit(v) => v.iter().all(|c| c.is_zero()),
            CoeffStream::Constant(c) => c.is_zero(),
            CoeffStream::Callback { .. } => false,
        }
    }

    pub fn certificate(&self) -> Option<TailCertificate> {
        match self {
            CoeffStream::Explicit(v) => {
                Some(TailCertificate { start: v.len() as u64, scale: Rational::zero(), ratio: Rational::zero() })
            }
            CoeffStream::Constant(c) => Some(TailCertificate { start: 0, scale: c.clone(), ratio: Rational::one() }),
            CoeffStream::Callback { cert, .. } => cert.clone(),
        }
    }

    fn check_nonneg(&self) -> Result<(), PlanError> {
        let bad = match self {
            CoeffStream::Explicit(v) => v.iter().any(|c| c.is_negative()),
            CoeffStream::Constant(c) => c.is_negative(),
            CoeffStream::Callback { .. } => (0..64).any(|n| self.coeff(n).is_negative()),
        };
        if bad {
            return Err(PlanError::InvalidParams("series coefficients must be nonnegative".into()));
        }
        Ok(())
    }

    /// Number of explicit terms so that the certified tail at `z` is below 2^-TAIL_BITS,
    /// and that tail bound. `None` if the certificate is missing or does not converge at z.
    fn truncation(&self, z: &Rational) -> Option<(u64, Rational)> {
        let cert = self.certificate()?;
        if cert.scale.is_zero() {
            return Some((cert.start, Rational::zero()));
        }
        let w = &cert.ratio * z;
        if w >= Rational::one() {
            return None;
        }
        let tol = Rational::new(1.into(), pow2(TAIL_BITS));
        let denom = Rational::one() - &w;
        let mut k = cert.start;
        let mut wk = num_traits::pow(w.clone(), k as usize);
        loop {
            let tail = &cert.scale * &wk / &denom;
            if tail <= tol || w.is_zero() {
                return Some((k, tail));
            }
            if k >= MAX_TERMS {
                return None;
            }
            k += 1;
            wk = crate::rational::round_up_rel(&(wk * &w), 192);
        }
    }

    /// Enclosure of `sum a_n z^n` for z in `zs` (zs inside [0, inf)).
    pub fn sum_bounds(&self, zs: &Interval) -> Option<Interval> {
        if let CoeffStream::Constant(c) = self {
            if zs.hi >= Rational::one() {
                return None;
            }
            let f = |z: &Rational| c / (Rational::one() - z);
            return Some(Interval::new(f(&zs.lo), f(&zs.hi)).round_out());
        }
        let (k, tail) = self.truncation(&zs.hi)?;
        let partial = |z: &Rational| {
            let mut acc = Rational::zero();
            for n in (0..k).rev() {
                acc = acc * z + self.coeff(n);
            }
            acc
        };
        Some(Interval::new(partial(&zs.lo), partial(&zs.hi) + tail).round_out())
    }

    /// Upper bound on `sum n a_n w^n`, for w in [0, 1).
    pub fn deriv_sum_upper(&self, w: &Rational) -> Option<Rational> {
        if let CoeffStream::Constant(c) = self {
            let d = Rational::one() - w;
            return (w < &Rational::one()).then(|| c * w / (&d * &d));
        }
        let cert = self.certificate()?;
        let mut k = cert.start;
        let mut tail = Rational::zero();
        if !cert.scale.is_zero() {
            let v = &cert.ratio * w;
            if v >= Rational::one() {
                return None;
            }
            let tol = Rational::new(1.into(), pow2(TAIL_BITS));
            let d = Rational::one() - &v;
            loop {
                // sum_{n >= k} n v^n = v^k (k (1 - v) + v) / (1 - v)^2
                let vk = num_traits::pow(v.clone(), k as usize);
                tail = &cert.scale * vk * (int(k) * &d + &v) / (&d * &d);
                if tail <= tol || k >= MAX_TERMS {
                    break;
                }
                k = (k * 2).max(8);
            }
        }
        let mut acc = Rational::zero();
        for n in (0..k).rev() {
            acc = acc * w + self.coeff(n) * int(n);
        }
        Some(crate::rational::round_up_abs(&(acc + tail), crate::interval::ROUND_BITS))
    }
}

/// Node kinds. Composite constructions keep their parameters and the plan they lower to.
#[allow(clippy::large_enum_variant)]
pub enum Node {
    Identity,
    Complement(FactoryPlan),
    Const(Rational),
    Product(FactoryPlan, FactoryPlan),
    Average(FactoryPlan, FactoryPlan),
    Double {
        child: FactoryPlan,
        eps: Rational,
        backend: Option<Backend>,
        exact: OnceLock<Result<Arc<RankContext>, String>>,
    },
    Difference {
        left: FactoryPlan,
        right: FactoryPlan,
        margin: Rational,
        backend: Option<Backend>,
        lowered: FactoryPlan,
    },
    ScalarMul {
        a: Rational,
        child: FactoryPlan,
        margin: Rational,
        backend: Option<Backend>,
        lowered: FactoryPlan,
    },
    /// `(eps/t) sum a_n ((t - eps) y)^n` where `input` has bias y.
    SeriesCore {
        coeffs: CoeffStream,
        t: Rational,
        eps: Rational,
        input: FactoryPlan,
    },
    /// `sum a_n g^n` where `arg` has bias g in [0, t - 2 eps].
    Series {
        coeffs: CoeffStream,
        t: Rational,
        eps: Rational,
        arg: FactoryPlan,
        backend: Option<Backend>,
        lowered: FactoryPlan,
    },
    /// `sum pos_n g^n - sum neg_n g^n`.
    SeriesGeneral {
        pos: CoeffStream,
        neg: CoeffStream,
        t: Rational,
        eps: Rational,
        arg: FactoryPlan,
        margin: Rational,
        bound: Rational,
        backend: Option<Backend>,
        lowered: FactoryPlan,
    },
    /// `f / g`.
    Quotient {
        num: FactoryPlan,
        den: FactoryPlan,
        eps: Rational,
        m: Rational,
        backend: Option<Backend>,
        lowered: FactoryPlan,
    },
    /// `(n0 (1-g) + n1 g) / (d0 (1-g) + d1 g)` by a rejection race.
    Mobius {
        child: FactoryPlan,
        num: [Rational; 2],
        den: [Rational; 2],
    },
    Envelope {
        spec: ScheduleSpec,
        ctx: Arc<RankContext>,
        mode: SimMode,
    },
}

pub struct PlanNode {
    node: Node,
    domain: Interval,
    range: Interval,
    actual: Interval,
    bias_bound: Rational,
}

/// Shared handle to an immutable plan tree.
#[derive(Clone)]
pub struct FactoryPlan(Arc<PlanNode>);

impl fmt::Debug for FactoryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

impl FactoryPlan {
    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn domain(&self) -> &Interval {
        &self.0.domain
    }

    /// Certified range of the simulated function on the domain.
    pub fn range(&self) -> &Interval {
        &self.0.range
    }

    /// Enclosure of the actual output probability on the domain.
    pub fn actual_range(&self) -> &Interval {
        &self.0.actual
    }

    /// Bound on |actual output probability - simulated function| over the domain.
    pub fn bias_bound(&self) -> &Rational {
        &self.0.bias_bound
    }

    pub fn kind(&self) -> &'static str {
        match self.node() {
            Node::Identity => "identity",
            Node::Complement(_) => "complement",
            Node::Const(_) => "const",
            Node::Product(..) => "product",
            Node::Average(..) => "average",
            Node::Double { .. } => "double",
            Node::Difference { .. } => "difference",
            Node::ScalarMul { .. } => "scalar_mul",
            Node::SeriesCore { .. } => "series_core",
            Node::Series { .. } => "series",
            Node::SeriesGeneral { .. } => "series_general",
            Node::Quotient { .. } => "quotient",
            Node::Mobius { .. } => "mobius",
            Node::Envelope { .. } => "envelope",
        }
    }

    /// Compact s-expression of the tree (lowered nodes shown by their own kind).
    pub fn describe(&self) -> String {
        let r = |x: &Rational| format_rational(x);
        match self.node() {
            Node::Identity => "p".into(),
            Node::Const(c) => r(c),
            Node::Complement(c) => format!("(not {})", c.describe()),
            Node::Product(a, b) => format!("(and {} {})", a.describe(), b.describe()),
            Node::Average(a, b) => format!("(avg {} {})", a.describe(), b.describe()),
            Node::Double { child, .. } => format!("(double {})", child.describe()),
            Node::Difference { left, right, .. } => format!("(sub {} {})", left.describe(), right.describe()),
            Node::ScalarMul { a, child, .. } => format!("(scale {} {})", r(a), child.describe()),
            Node::SeriesCore { input, .. } => format!("(series-core {})", input.describe()),
            Node::Series { arg, .. } => format!("(series {})", arg.describe()),
            Node::SeriesGeneral { arg, .. } => format!("(series-general {})", arg.describe()),
            Node::Quotient { num, den, .. } => format!("(div {} {})", num.describe(), den.describe()),
            Node::Mobius { child, num, den } => {
                format!("(mobius {} {} {} {} {})", r(&num[0]), r(&num[1]), r(&den[0]), r(&den[1]), child.describe())
            }
            Node::Envelope { spec, .. } => format!("(envelope {})", spec.label()),
        }
    }

    /// Number of nodes, counting lowered subtrees.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Direct children in execution order (lowered plans for composite nodes).
    pub fn children(&self) -> Vec<&FactoryPlan> {
        match self.node() {
            Node::Identity | Node::Const(_) | Node::Envelope { .. } => vec![],
            Node::Complement(c) | Node::Double { child: c, .. } | Node::Mobius { child: c, .. } => vec![c],
            Node::Product(a, b) | Node::Average(a, b) => vec![a, b],
            Node::SeriesCore { input, .. } => vec![input],
            Node::Difference { lowered, .. }
            | Node::ScalarMul { lowered, .. }
            | Node::Series { lowered, .. }
            | Node::SeriesGeneral { lowered, .. }
            | Node::Quotient { lowered, .. } => vec![lowered],
        }
    }

    fn build(node: Node, domain: Interval) -> Result<FactoryPlan, PlanError> {
        let range = value::node_enclose(&node, &domain, true)?;
        let actual = value::node_enclose(&node, &domain, false)?;
        let bias_bound = value::node_bias(&node)?;
        Ok(FactoryPlan(Arc::new(PlanNode { node, domain, range, actual, bias_bound })))
    }
}

fn joint_domain(a: &FactoryPlan, b: &FactoryPlan) -> Result<Interval, PlanError> {
    a.domain().intersect(b.domain()).ok_or(PlanError::DomainMismatch)
}

fn need_positive(x: &Rational, what: &str) -> Result<(), PlanError> {
    if !x.is_positive() {
        return Err(PlanError::InvalidParams(format!("{what} must be positive, got {}", format_rational(x))));
    }
    Ok(())
}

fn violated(what: String) -> PlanError {
    PlanError::MarginViolated(what)
}

/// The input coin on the closed `domain` of p.
pub fn identity(domain: Interval) -> Result<FactoryPlan, PlanError> {
    if domain.lo.is_negative() || domain.hi > Rational::one() {
        return Err(PlanError::InvalidParams(format!("domain {domain} is not inside [0, 1]")));
    }
    FactoryPlan::build(Node::Identity, domain)
}

/// Coin of rational bias `c` built from fair bits.
pub fn constant_plan(c: Rational) -> Result<FactoryPlan, PlanError> {
    if c.is_negative() || c > Rational::one() {
        return Err(PlanError::InvalidParams(format!("constant {} is not in [0, 1]", format_rational(&c))));
    }
    FactoryPlan::build(Node::Const(c), Interval::unit())
}

pub fn complement(f: FactoryPlan) -> FactoryPlan {
    let d = f.domain().clone();
    FactoryPlan::build(Node::Complement(f), d).expect("complement is total")
}

pub fn product(f: FactoryPlan, g: FactoryPlan) -> Result<FactoryPlan, PlanError> {
    let d = joint_domain(&f, &g)?;
    FactoryPlan::build(Node::Product(f, g), d)
}

pub fn average(f: FactoryPlan, g: FactoryPlan) -> Result<FactoryPlan, PlanError> {
    let d = joint_domain(&f, &g)?;
    FactoryPlan::build(Node::Average(f, g), d)
}

/// `2 g` for a child whose range stays below `1/2 - 4 eps`.
pub fn double_plan(child: FactoryPlan, eps: Rational, backend: Option<Backend>) -> Result<FactoryPlan, PlanError> {
    need_positive(&eps, "doubling margin")?;
    let limit = rat(1, 2) - &eps * int(4);
    if child.range().hi > limit || child.actual_range().hi >= rat(1, 2) {
        return Err(violated(format!(
            "doubling needs the input below {}, range is {}",
            format_rational(&limit),
            child.range()
        )));
    }
    if backend == Some(Backend::Exact) && eps >= rat(1, 8) {
        return Err(PlanError::InvalidParams("exact doubling needs eps < 1/8".into()));
    }
    let d = child.domain().clone();
    FactoryPlan::build(Node::Double { child, eps, backend, exact: OnceLock::new() }, d)
}

/// `f + g`, given `f + g <= 1 - eps` on the domain: doubling of the average with margin eps/8.
pub fn sum_plan(
    f: FactoryPlan,
    g: FactoryPlan,
    eps: Rational,
    backend: Option<Backend>,
) -> Result<FactoryPlan, PlanError> {
    need_positive(&eps, "sum margin")?;
    let hi = &f.range().hi + &g.range().hi;
    if hi > Rational::one() - &eps {
        return Err(violated(format!(
            "sum upper bound {} exceeds 1 - {}",
            format_rational(&hi),
            format_rational(&eps)
        )));
    }
    let avg = average(f, g)?;
    double_plan(avg, eps / int(8), backend)
}

/// `f - g`, given `f - g >= margin`, as `1 - ((1 - f) + g)`.
pub fn difference_plan(
    f: FactoryPlan,
    g: FactoryPlan,
    margin: Rational,
    backend: Option<Backend>,
) -> Result<FactoryPlan, PlanError> {
    need_positive(&margin, "difference margin")?;
    let lo = &f.range().lo - &g.range().hi;
    if lo < margin {
        return Err(violated(format!(
            "difference lower bound {} is below {}",
            format_rational(&lo),
            format_rational(&margin)
        )));
    }
    let lowered = complement(sum_plan(complement(f.clone()), g.clone(), margin.clone(), backend)?);
    let d = lowered.domain().clone();
    FactoryPlan::build(Node::Difference { left: f, right: g, margin, backend, lowered }, d)
}

/// `a f` for a > 0 with `a f <= 1 - margin`: a constant coin below 1 followed by doublings.
pub fn scalar_mul_plan(
    a: Rational,
    child: FactoryPlan,
    margin: Rational,
    backend: Option<Backend>,
) -> Result<FactoryPlan, PlanError> {
    need_positive(&a, "scalar")?;
    need_positive(&margin, "scaling margin")?;
    let hi = &a * &child.range().hi;
    if hi > Rational::one() - &margin {
        return Err(violated(format!(
            "scaled upper bound {} exceeds 1 - {}",
            format_rational(&hi),
            format_rational(&margin)
        )));
    }
    let mut m = 0u64;
    while a > int(pow2(m)) {
        m += 1;
    }
    let c = &a / int(pow2(m));
    let mut lowered = if c.is_one() { child.clone() } else { product(constant_plan(c)?, child.clone())? };
    for _ in 0..m {
        lowered = double_plan(lowered, &margin / int(8), backend)?;
    }
    let d = lowered.domain().clone();
    FactoryPlan::build(Node::ScalarMul { a, child, margin, backend, lowered }, d)
}

/// Upper bound on `sum a_n t^n`; errors when it cannot be certified below 1.
fn certified_sum_below_one(coeffs: &CoeffStream, t: &Rational) -> Result<Rational, PlanError> {
    let s = coeffs
        .sum_bounds(&Interval::point(t.clone()))
        .ok_or_else(|| PlanError::DivergenceRisk("no usable tail certificate for the coefficients".into()))?;
    if s.hi >= Rational::one() {
        return Err(PlanError::DivergenceRisk(format!(
            "sum of a_n t^n may reach 1 (upper bound {})",
            format_rational(&s.hi)
        )));
    }
    Ok(s.hi)
}

/// `sum a_n g^n` for nonnegative coefficients with `sum a_n t^n < 1` and g in [0, t - 2 eps].
///
/// Draws N with `P(N = n) = ((t - eps)/t)^n eps/t`, ANDs N coins of bias `g/(t - eps)` with one
/// coin of bias `a_N t^N`, and rescales the result by `t/eps`.
pub fn series_plan(
    coeffs: CoeffStream,
    t: Rational,
    eps: Rational,
    arg: FactoryPlan,
    backend: Option<Backend>,
) -> Result<FactoryPlan, PlanError> {
    need_positive(&eps, "series eps")?;
    if t > Rational::one() || &eps * int(2) >= t {
        return Err(PlanError::InvalidParams("series needs 2 eps < t <= 1".into()));
    }
    coeffs.check_nonneg()?;
    let top = &t - &eps * int(2);
    if arg.range().hi > top || arg.actual_range().hi > top {
        return Err(violated(format!(
            "series argument range {} exceeds t - 2 eps = {}",
            arg.range(),
            format_rational(&top)
        )));
    }
    let lowered = if coeffs.is_zero() {
        constant_plan(Rational::zero())?
    } else {
        let f_t = certified_sum_below_one(&coeffs, &t)?;
        let margin = (Rational::one() - f_t) / int(2);
        let te = &t - &eps;
        let input = scalar_mul_plan(te.recip(), arg.clone(), &eps / &te, backend)?;
        let core = FactoryPlan::build(
            Node::SeriesCore { coeffs: coeffs.clone(), t: t.clone(), eps: eps.clone(), input: input.clone() },
            input.domain().clone(),
        )?;
        scalar_mul_plan(&t / &eps, core, margin, backend)?
    };
    let d = arg.domain().clone();
    FactoryPlan::build(Node::Series { coeffs, t, eps, arg, backend, lowered }, d)
}

/// Series with coefficients of both signs split as `pos - neg`; `margin` lower-bounds the
/// value and `bound` is a declared upper bound on `sum pos_n t^n`.
#[allow(clippy::too_many_arguments)]
pub fn series_general_plan(
    pos: CoeffStream,
    neg: CoeffStream,
    t: Rational,
    eps: Rational,
    arg: FactoryPlan,
    margin: Rational,
    bound: Rational,
    backend: Option<Backend>,
) -> Result<FactoryPlan, PlanError> {
    let p_t = certified_sum_below_one(&pos, &t)?;
    if p_t > bound {
        return Err(violated(format!(
            "positive part reaches {} above the declared bound {}",
            format_rational(&p_t),
            format_rational(&bound)
        )));
    }
    let g = series_plan(pos.clone(), t.clone(), eps.clone(), arg.clone(), backend)?;
    let h = series_plan(neg.clone(), t.clone(), eps.clone(), arg.clone(), backend)?;
    let lowered = difference_plan(g, h, margin.clone(), backend)?;
    let d = arg.domain().clone();
    FactoryPlan::build(Node::SeriesGeneral { pos, neg, t, eps, arg, margin, bound, backend, lowered }, d)
}

/// `f / g` given `g >= eps` (strictly above on the certified range), `f/g <= 1 - eps`,
/// `g <= m`.
///
/// With `M = max(m, 1/2)` and `C = eps/(4M)`, the coin `y = 1 - g/(2M)` feeds the series
/// `sum C y^n = C / (1 - y) = eps / (2 g)`; the product with f is `(eps/2) f/g`, rescaled by 2/eps.
pub fn quotient_plan(
    f: FactoryPlan,
    g: FactoryPlan,
    eps: Rational,
    m: Rational,
    backend: Option<Backend>,
) -> Result<FactoryPlan, PlanError> {
    need_positive(&eps, "quotient eps")?;
    let gr = g.range().clone();
    if gr.lo <= eps || g.actual_range().lo <= eps {
        return Err(violated(format!("denominator range {gr} is not above {}", format_rational(&eps))));
    }
    if gr.hi > m {
        return Err(violated(format!("denominator range {gr} exceeds the declared bound {}", format_rational(&m))));
    }
    let q_hi = &f.range().hi / &gr.lo;
    if q_hi > Rational::one() - &eps {
        return Err(violated(format!(
            "quotient upper bound {} exceeds 1 - {}",
            format_rational(&q_hi),
            format_rational(&eps)
        )));
    }
    let m_eff = m.clone().max(rat(1, 2));
    let c = &eps / (&m_eff * int(4));
    let x = product(constant_plan((&m_eff * int(2)).recip())?, g.clone())?;
    let y = complement(x);
    let t = Rational::one() - &c * rat(3, 2);
    let psi = series_plan(CoeffStream::Constant(c.clone()), t, &c / int(4), y, backend)?;
    let scaled = product(f.clone(), psi)?;
    let lowered = scalar_mul_plan(int(2) / &eps, scaled, eps.clone(), backend)?;
    let d = lowered.domain().clone();
    FactoryPlan::build(Node::Quotient { num: f, den: g, eps, m, backend, lowered }, d)
}

/// `(a g + b) / (c g + d)` when both are positive-denominator affine maps with
/// `0 <= numerator <= denominator` at g = 0 and g = 1.
pub fn mobius_plan(
    child: FactoryPlan,
    num: (Rational, Rational),
    den: (Rational, Rational),
) -> Result<FactoryPlan, PlanError> {
    let (a, b) = num;
    let (c, d) = den;
    let n = [b.clone(), &a + &b];
    let dd = [d.clone(), &c + &d];
    for x in 0..2 {
        if !dd[x].is_positive() || n[x].is_negative() || n[x] > dd[x] {
            return Err(PlanError::InvalidParams(format!(
                "linear-fractional map needs 0 <= N({x}) <= D({x}) and D({x}) > 0, got N={} D={}",
                format_rational(&n[x]),
                format_rational(&dd[x])
            )));
        }
    }
    let dom = child.domain().clone();
    FactoryPlan::build(Node::Mobius { child, num: n, den: dd }, dom)
}

/// Envelope factory for a schedule, on the given domain.
pub fn envelope_plan(spec: ScheduleSpec, domain: Interval, mode: SimMode) -> Result<FactoryPlan, PlanError> {
    let schedule = spec.build()?;
    let ctx = Arc::new(RankContext::new(schedule));
    FactoryPlan::build(Node::Envelope { spec, ctx, mode }, domain)
}
