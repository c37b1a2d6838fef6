use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::*;
use crate::envelope::SimMode;
use crate::rational::parse_rational;

pub const PLAN_FORMAT: &str = "bfactory-plan/1";

fn r(x: &Rational) -> Value {
    Value::String(format_rational(x))
}

fn backend_json(b: &Option<Backend>) -> Value {
    serde_json::to_value(b).expect("backend serializes")
}

fn coeffs_json(c: &CoeffStream) -> Value {
    match c {
        CoeffStream::Explicit(v) => json!({ "explicit": v.iter().map(r).collect::<Vec<_>>() }),
        CoeffStream::Constant(x) => json!({ "constant": r(x) }),
        CoeffStream::Callback { label, .. } => json!({ "callback": label }),
    }
}

fn tree(plan: &FactoryPlan) -> Value {
    let mut m = Map::new();
    m.insert("kind".into(), json!(plan.kind()));
    m.insert("domain".into(), json!(plan.domain().to_strings()));
    m.insert("range".into(), json!(plan.range().to_strings()));
    let mut put = |k: &str, v: Value| {
        m.insert(k.into(), v);
    };
    match plan.node() {
        Node::Identity => {}
        Node::Const(c) => put("c", r(c)),
        Node::Complement(c) => put("child", tree(c)),
        Node::Product(a, b) | Node::Average(a, b) => {
            put("left", tree(a));
            put("right", tree(b));
        }
        Node::Double { child, eps, backend, .. } => {
            put("child", tree(child));
            put("eps", r(eps));
            put("backend", backend_json(backend));
        }
        Node::Difference { left, right, margin, backend, .. } => {
            put("left", tree(left));
            put("right", tree(right));
            put("margin", r(margin));
            put("backend", backend_json(backend));
        }
        Node::ScalarMul { a, child, margin, backend, .. } => {
            put("a", r(a));
            put("child", tree(child));
            put("margin", r(margin));
            put("backend", backend_json(backend));
        }
        Node::SeriesCore { coeffs, t, eps, input } => {
            put("coeffs", coeffs_json(coeffs));
            put("t", r(t));
            put("eps", r(eps));
            put("input", tree(input));
        }
        Node::Series { coeffs, t, eps, arg, backend, .. } => {
            put("coeffs", coeffs_json(coeffs));
            put("t", r(t));
            put("eps", r(eps));
            put("arg", tree(arg));
            put("backend", backend_json(backend));
        }
        Node::SeriesGeneral { pos, neg, t, eps, arg, margin, bound, backend, .. } => {
            put("pos", coeffs_json(pos));
            put("neg", coeffs_json(neg));
            put("t", r(t));
            put("eps", r(eps));
            put("arg", tree(arg));
            put("margin", r(margin));
            put("bound", r(bound));
            put("backend", backend_json(backend));
        }
        Node::Quotient { num, den, eps, m: bound, backend, .. } => {
            put("num", tree(num));
            put("den", tree(den));
            put("eps", r(eps));
            put("m", r(bound));
            put("backend", backend_json(backend));
        }
        Node::Mobius { child, num, den } => {
            put("child", tree(child));
            put("num", json!([r(&num[0]), r(&num[1])]));
            put("den", json!([r(&den[0]), r(&den[1])]));
        }
        Node::Envelope { spec, mode, .. } => {
            put("schedule", serde_json::to_value(spec).expect("spec serializes"));
            put("mode", json!(if *mode == SimMode::Exact { "exact" } else { "accelerated" }));
        }
    }
    Value::Object(m)
}

fn digest(tree: &Value) -> String {
    // serde_json maps are sorted by key, so this is canonical
    hex::encode(Sha256::digest(tree.to_string().as_bytes()))
}

/// Content hash of the plan tree.
pub fn plan_hash(plan: &FactoryPlan) -> String {
    digest(&tree(plan))
}

pub fn plan_to_json(plan: &FactoryPlan) -> Value {
    let t = tree(plan);
    json!({
        "format": PLAN_FORMAT,
        "hash": digest(&t),
        "bias_bound": r(plan.bias_bound()),
        "plan": t,
    })
}

fn err(msg: impl Into<String>) -> PlanError {
    PlanError::Json(msg.into())
}

fn field<'a>(v: &'a Value, k: &str) -> Result<&'a Value, PlanError> {
    v.get(k).ok_or_else(|| err(format!("missing field {k:?}")))
}

fn rat_field(v: &Value, k: &str) -> Result<Rational, PlanError> {
    let s = field(v, k)?.as_str().ok_or_else(|| err(format!("{k:?} is not a string")))?;
    parse_rational(s).map_err(|e| err(e.to_string()))
}

fn pair(v: &Value, k: &str) -> Result<[Rational; 2], PlanError> {
    let a = field(v, k)?.as_array().filter(|a| a.len() == 2).ok_or_else(|| err(format!("{k:?} is not a pair")))?;
    let p = |x: &Value| {
        x.as_str()
            .ok_or_else(|| err(format!("{k:?} entries must be strings")))
            .and_then(|s| parse_rational(s).map_err(|e| err(e.to_string())))
    };
    Ok([p(&a[0])?, p(&a[1])?])
}

fn backend_field(v: &Value) -> Result<Option<Backend>, PlanError> {
    serde_json::from_value(v.get("backend").cloned().unwrap_or(Value::Null)).map_err(|e| err(e.to_string()))
}

fn coeffs_field(v: &Value, k: &str) -> Result<CoeffStream, PlanError> {
    let c = field(v, k)?;
    if let Some(list) = c.get("explicit").and_then(Value::as_array) {
        let terms = list
            .iter()
            .map(|x| {
                x.as_str()
                    .ok_or_else(|| err("coefficient is not a string"))
                    .and_then(|s| parse_rational(s).map_err(|e| err(e.to_string())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(CoeffStream::Explicit(terms));
    }
    if c.get("constant").is_some() {
        return Ok(CoeffStream::Constant(rat_field(c, "constant")?));
    }
    Err(err("only explicit or constant coefficient streams can be loaded"))
}

fn load(v: &Value) -> Result<FactoryPlan, PlanError> {
    let kind = field(v, "kind")?.as_str().ok_or_else(|| err("kind is not a string"))?;
    let sub = |k: &str| load(field(v, k)?);
    let plan = match kind {
        "identity" => {
            let [lo, hi] = pair(v, "domain")?;
            identity(Interval::new(lo, hi))?
        }
        "const" => constant_plan(rat_field(v, "c")?)?,
        "complement" => complement(sub("child")?),
        "product" => product(sub("left")?, sub("right")?)?,
        "average" => average(sub("left")?, sub("right")?)?,
        "double" => double_plan(sub("child")?, rat_field(v, "eps")?, backend_field(v)?)?,
        "difference" => difference_plan(sub("left")?, sub("right")?, rat_field(v, "margin")?, backend_field(v)?)?,
        "scalar_mul" => scalar_mul_plan(rat_field(v, "a")?, sub("child")?, rat_field(v, "margin")?, backend_field(v)?)?,
        "series" => series_plan(
            coeffs_field(v, "coeffs")?,
            rat_field(v, "t")?,
            rat_field(v, "eps")?,
            sub("arg")?,
            backend_field(v)?,
        )?,
        "series_general" => series_general_plan(
            coeffs_field(v, "pos")?,
            coeffs_field(v, "neg")?,
            rat_field(v, "t")?,
            rat_field(v, "eps")?,
            sub("arg")?,
            rat_field(v, "margin")?,
            rat_field(v, "bound")?,
            backend_field(v)?,
        )?,
        "quotient" => {
            quotient_plan(sub("num")?, sub("den")?, rat_field(v, "eps")?, rat_field(v, "m")?, backend_field(v)?)?
        }
        "mobius" => {
            let [n0, n1] = pair(v, "num")?;
            let [d0, d1] = pair(v, "den")?;
            mobius_plan(sub("child")?, (&n1 - &n0, n0), (&d1 - &d0, d0))?
        }
        "envelope" => {
            let spec: ScheduleSpec =
                serde_json::from_value(field(v, "schedule")?.clone()).map_err(|e| err(e.to_string()))?;
            let mode = match field(v, "mode")?.as_str() {
                Some("exact") => SimMode::Exact,
                Some("accelerated") => SimMode::Accelerated,
                _ => return Err(err("mode must be exact or accelerated")),
            };
            let [lo, hi] = pair(v, "domain")?;
            envelope_plan(spec, Interval::new(lo, hi), mode)?
        }
        other => return Err(err(format!("unknown node kind {other:?}"))),
    };
    Ok(plan)
}

/// Rebuilds a plan through the checked constructors; the stored hash must match.
pub fn plan_from_json(v: &Value) -> Result<FactoryPlan, PlanError> {
    match v.get("format").and_then(Value::as_str) {
        Some(PLAN_FORMAT) => {}
        other => return Err(err(format!("unsupported plan format {other:?}"))),
    }
    let t = field(v, "plan")?;
    let plan = load(t)?;
    let h = plan_hash(&plan);
    if let Some(stored) = v.get("hash").and_then(Value::as_str) {
        if stored != h {
            return Err(err(format!("hash mismatch: file says {stored}, rebuilt plan has {h}")));
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_hash() {
        let d = Interval::new(rat(1, 10), rat(2, 5));
        let b = Some(Backend::Approx { steps: 2000 });
        let id = identity(d).unwrap();
        let s = sum_plan(id.clone(), constant_plan(rat(1, 5)).unwrap(), rat(2, 5), b).unwrap();
        let m = mobius_plan(id, (rat(1, 1), rat(0, 1)), (rat(1, 1), rat(1, 5))).unwrap();
        let plan = product(s, m).unwrap();
        let j = plan_to_json(&plan);
        let back = plan_from_json(&j).unwrap();
        assert_eq!(plan_hash(&back), j["hash"].as_str().unwrap());
        let mut tampered = j.clone();
        tampered["plan"]["left"]["child"]["right"]["c"] = json!("1/10");
        assert!(matches!(plan_from_json(&tampered), Err(PlanError::Json(_))));
    }
}
