use std::path::PathBuf;

use num_traits::{One, Zero};

use super::{
    continuous_schedule, ContinuousOptions, DoublingParams, DoublingSchedule, MonomialSchedule, ScheduleError,
    SmoothParams, SmoothSchedule, Smoothness, TargetFn,
};
use crate::envelope::{EnvelopeSchedule, TableSchedule};
use crate::interval::Interval;
use crate::lang::{expr_interval, parse, Expr};
use crate::rational::{format_rational, int, parse_rational, pow_rat, serde_str, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothKind {
    Lipschitz,
    C2,
}

/// Serializable description of a schedule, also accepted as a `kind:args` target string.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Doubling {
        #[serde(with = "serde_str")]
        eps: Rational,
        idle: bool,
    },
    Monomial {
        j: u64,
    },
    Smooth {
        expr: String,
        #[serde(with = "serde_str")]
        c: Rational,
        #[serde(with = "serde_str")]
        eps: Rational,
        smoothness: SmoothKind,
    },
    Continuous {
        expr: String,
        #[serde(with = "serde_str")]
        eps: Rational,
        first_level: u32,
        last_level: u32,
    },
    Table {
        path: PathBuf,
    },
}

fn bad(msg: impl Into<String>) -> ScheduleError {
    ScheduleError::InvalidParams(msg.into())
}

fn num(s: &str) -> Result<Rational, ScheduleError> {
    parse_rational(s).map_err(|e| bad(e.to_string()))
}

fn target_expr(text: &str) -> Result<Expr, ScheduleError> {
    parse(text).map_err(|e| bad(format!("target expression: {e}")))
}

fn target_fn(text: &str) -> Result<TargetFn, ScheduleError> {
    let e = target_expr(text)?;
    Ok(TargetFn::new(text, move |p| e.eval(p).unwrap_or_else(Rational::zero)))
}

impl ScheduleSpec {
    /// Parses `double:EPS`, `monomial:J`, `lipschitz:EXPR:C:EPS`, `c2:EXPR:C:EPS`,
    /// `continuous:EXPR:EPS:I-J` or `csv:PATH`.
    pub fn parse(s: &str) -> Result<ScheduleSpec, ScheduleError> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| bad(format!("target {s:?} has no kind prefix")))?;
        let parts: Vec<&str> = rest.split(':').collect();
        let spec = match (kind, parts.as_slice()) {
            ("double", [eps]) => ScheduleSpec::Doubling { eps: num(eps)?, idle: true },
            ("monomial", [j]) => ScheduleSpec::Monomial { j: j.parse().map_err(|_| bad(format!("bad degree {j:?}")))? },
            ("lipschitz" | "c2", [expr, c, eps]) => ScheduleSpec::Smooth {
                expr: expr.to_string(),
                c: num(c)?,
                eps: num(eps)?,
                smoothness: if kind == "c2" { SmoothKind::C2 } else { SmoothKind::Lipschitz },
            },
            ("continuous", [expr, eps, levels]) => {
                let (a, b) = levels.split_once('-').ok_or_else(|| bad("levels must be I-J"))?;
                let lv = |x: &str| x.parse::<u32>().map_err(|_| bad(format!("bad level {x:?}")));
                ScheduleSpec::Continuous {
                    expr: expr.to_string(),
                    eps: num(eps)?,
                    first_level: lv(a)?,
                    last_level: lv(b)?,
                }
            }
            ("csv", _) => ScheduleSpec::Table { path: PathBuf::from(rest) },
            _ => return Err(bad(format!("unrecognised target {s:?}"))),
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<(), ScheduleError> {
        match self {
            ScheduleSpec::Monomial { j: 0 } => Err(bad("monomial degree must be positive")),
            ScheduleSpec::Smooth { expr, .. } | ScheduleSpec::Continuous { expr, .. } => target_expr(expr).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// The target string this spec parses from.
    pub fn label(&self) -> String {
        match self {
            ScheduleSpec::Doubling { eps, .. } => format!("double:{}", format_rational(eps)),
            ScheduleSpec::Monomial { j } => format!("monomial:{j}"),
            ScheduleSpec::Smooth { expr, c, eps, smoothness } => {
                let k = if *smoothness == SmoothKind::C2 { "c2" } else { "lipschitz" };
                format!("{k}:{expr}:{}:{}", format_rational(c), format_rational(eps))
            }
            ScheduleSpec::Continuous { expr, eps, first_level, last_level } => {
                format!("continuous:{expr}:{}:{first_level}-{last_level}", format_rational(eps))
            }
            ScheduleSpec::Table { path } => format!("csv:{}", path.display()),
        }
    }

    pub fn build(&self) -> Result<EnvelopeSchedule, ScheduleError> {
        self.check()?;
        Ok(match self {
            ScheduleSpec::Doubling { eps, idle } => {
                EnvelopeSchedule::new(DoublingSchedule::new(DoublingParams::new(eps.clone())?.with_idle(*idle)))
            }
            ScheduleSpec::Monomial { j } => EnvelopeSchedule::new(MonomialSchedule::new(*j)),
            ScheduleSpec::Smooth { expr, c, eps, smoothness } => {
                let smoothness = match smoothness {
                    SmoothKind::Lipschitz => Smoothness::Lipschitz,
                    SmoothKind::C2 => Smoothness::TwiceDifferentiable,
                };
                let params = SmoothParams { f: target_fn(expr)?, c: c.clone(), eps: eps.clone(), smoothness };
                EnvelopeSchedule::new(SmoothSchedule::new(params)?)
            }
            ScheduleSpec::Continuous { expr, eps, first_level, last_level } => {
                EnvelopeSchedule::new(continuous_schedule(
                    target_fn(expr)?,
                    eps.clone(),
                    *first_level..=*last_level,
                    &ContinuousOptions::default(),
                )?)
            }
            ScheduleSpec::Table { path } => EnvelopeSchedule::new(
                TableSchedule::load_csv(path).map_err(|e| ScheduleError::Load(format!("{}: {e}", path.display())))?,
            ),
        })
    }

    /// Enclosure of the target function over `domain`; the unit interval when unknown.
    pub fn target_range(&self, domain: &Interval) -> Interval {
        match self {
            ScheduleSpec::Doubling { eps, .. } => {
                let cap = Rational::one() - eps * int(2);
                Interval::new((&domain.lo * int(2)).min(cap.clone()), (&domain.hi * int(2)).min(cap))
            }
            ScheduleSpec::Monomial { j } => Interval::new(pow_rat(&domain.lo, *j), pow_rat(&domain.hi, *j)),
            ScheduleSpec::Smooth { expr, .. } | ScheduleSpec::Continuous { expr, .. } => target_expr(expr)
                .ok()
                .and_then(|e| expr_interval(&e, domain))
                .map(|r| r.clamp_unit())
                .unwrap_or_else(Interval::unit),
            ScheduleSpec::Table { .. } => Interval::unit(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn parse_and_label_round_trip() {
        for s in [
            "double:3/25",
            "monomial:2",
            "lipschitz:1/2 + p/4:1/4:1/10",
            "c2:p*(1-p)+1/4:2:1/8",
            "continuous:1/4+p/2:1/5:5-6",
        ] {
            let spec = ScheduleSpec::parse(s).unwrap();
            assert_eq!(ScheduleSpec::parse(&spec.label()).unwrap(), spec, "{s}");
        }
        assert!(ScheduleSpec::parse("monomial:0").is_err());
        assert!(ScheduleSpec::parse("walk:10").is_err());
        assert!(ScheduleSpec::parse("lipschitz:p+:1:1/10").is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = ScheduleSpec::parse("double:3/25").unwrap();
        let j = serde_json::to_string(&spec).unwrap();
        assert_eq!(j, r#"{"kind":"doubling","eps":"3/25","idle":true}"#);
        assert_eq!(serde_json::from_str::<ScheduleSpec>(&j).unwrap(), spec);
    }

    #[test]
    fn doubling_range_is_capped() {
        let spec = ScheduleSpec::parse("double:1/10").unwrap();
        let r = spec.target_range(&Interval::new(rat(1, 10), rat(1, 2)));
        assert_eq!(r, Interval::new(rat(1, 5), rat(4, 5)));
    }
}
