//! Python bindings. Rationals cross the boundary as `"num/den"` strings (integers and
//! decimals are accepted on input); reports and fits come back as JSON text.

use num_bigint::BigInt;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use bfactory::coin::CoinSource;
use bfactory::combinators::{
    plan_from_json, plan_hash, plan_target, plan_to_json, plan_value, run_plan, Backend, FactoryPlan,
};
use bfactory::envelope::{envelope_eval, validate_schedule, SimMode};
use bfactory::interval::Interval;
use bfactory::lang::{compile_text, CompileError};
use bfactory::rational::{format_rational, parse_rational, Rational};
use bfactory::verify::{self, MonteCarloOptions, SimulationReport, Target, VerifyError};
use bfactory::walk;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn q(s: &str) -> PyResult<Rational> {
    parse_rational(s).map_err(value_err)
}

fn fmt(r: &Rational) -> String {
    format_rational(r)
}

fn verify_err(e: VerifyError) -> PyErr {
    match e {
        VerifyError::Coin(bfactory::coin::CoinError::Io(_)) => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn mode(exact: bool) -> SimMode {
    if exact {
        SimMode::Exact
    } else {
        SimMode::Accelerated
    }
}

/// A compiled factory.
#[pyclass(name = "Plan", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPlan {
    plan: FactoryPlan,
}

#[pymethods]
impl PyPlan {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(value_err)?;
        Ok(PyPlan { plan: plan_from_json(&v).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&plan_to_json(&self.plan)).expect("plan json")
    }

    #[getter]
    fn hash(&self) -> String {
        plan_hash(&self.plan)
    }

    #[getter]
    fn bias_bound(&self) -> String {
        fmt(self.plan.bias_bound())
    }

    #[getter]
    fn domain(&self) -> (String, String) {
        self.plan.domain().to_strings().into()
    }

    fn describe(&self) -> String {
        self.plan.describe()
    }

    /// Enclosure of the executed output probability at p.
    fn value(&self, p: &str) -> PyResult<(String, String)> {
        Ok(plan_value(&self.plan, &q(p)?).map_err(value_err)?.to_strings().into())
    }

    /// Enclosure of the ideal target at p.
    fn target(&self, p: &str) -> PyResult<(String, String)> {
        Ok(plan_target(&self.plan, &q(p)?).map_err(value_err)?.to_strings().into())
    }

    /// Runs once on a fixed tape; returns (bit, tosses).
    fn run_tape(&self, bits: Vec<bool>) -> PyResult<(bool, u64)> {
        let o = run_plan(&self.plan, &mut CoinSource::tape(bits)).map_err(value_err)?;
        Ok((o.bit, o.tosses))
    }

    fn __repr__(&self) -> String {
        format!("Plan({})", self.plan.describe())
    }
}

#[pyfunction]
#[pyo3(signature = (expr, domain = ("0".to_string(), "1".to_string()), backend = None))]
fn compile(expr: &str, domain: (String, String), backend: Option<&str>) -> PyResult<PyPlan> {
    let dom = Interval::new(q(&domain.0)?, q(&domain.1)?);
    let backend = match backend {
        Some(b) => Some(Backend::parse(b).ok_or_else(|| value_err(format!("unknown backend {b:?}")))?),
        None => None,
    };
    compile_text(expr, &dom, backend).map(|plan| PyPlan { plan }).map_err(|e| match e {
        CompileError::Blocked(ds) => value_err(ds.iter().map(|d| d.render(expr)).collect::<Vec<_>>().join("\n")),
        other => value_err(other),
    })
}

fn target_of(target: &Bound<'_, PyAny>, exact: bool) -> PyResult<Target> {
    if let Ok(p) = target.cast::<PyPlan>() {
        return Ok(Target::Plan(p.get().plan.clone()));
    }
    let s: String = target.extract()?;
    Target::parse(&s, mode(exact)).map_err(verify_err)
}

/// Monte Carlo report as JSON. `target` is a Plan or a target string such as "fair" or "walk:2000".
#[pyfunction]
#[pyo3(signature = (target, p, runs, seed = 0, max_tosses = None, threads = None, exact = false))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    target: &Bound<'_, PyAny>,
    p: &str,
    runs: u64,
    seed: u64,
    max_tosses: Option<u64>,
    threads: Option<usize>,
    exact: bool,
) -> PyResult<String> {
    let t = target_of(target, exact)?;
    let p = q(p)?;
    let opts = MonteCarloOptions { runs, seed, max_tosses, threads };
    let rep = py.detach(|| verify::monte_carlo(&t, &p, &opts)).map_err(verify_err)?;
    Ok(serde_json::to_string_pretty(&rep).expect("report json"))
}

/// Exact (accept, undecided) masses over all tapes of the given depth.
#[pyfunction]
#[pyo3(signature = (target, depth, p, exact = false))]
fn oracle(py: Python<'_>, target: &Bound<'_, PyAny>, depth: u32, p: &str, exact: bool) -> PyResult<(String, String)> {
    let t = target_of(target, exact)?;
    let p = q(p)?;
    let r = py.detach(|| verify::oracle_enumerate(&t, depth, &p)).map_err(verify_err)?;
    Ok((fmt(&r.accept), fmt(&r.undecided)))
}

/// TailFit JSON for a report produced by `simulate`.
#[pyfunction]
#[pyo3(signature = (report, points = None))]
fn tail_profile(report: &str, points: Option<Vec<u64>>) -> PyResult<String> {
    let rep: SimulationReport = serde_json::from_str(report).map_err(value_err)?;
    let fit = verify::tail_profile(&rep, points.as_deref()).map_err(verify_err)?;
    Ok(serde_json::to_string_pretty(&fit).expect("fit json"))
}

fn schedule_of(target: &str) -> PyResult<bfactory::envelope::EnvelopeSchedule> {
    match Target::parse(target, SimMode::Exact).map_err(verify_err)? {
        Target::Schedule { ctx, .. } => Ok(ctx.schedule().clone()),
        _ => Err(value_err(format!("{target} is not a schedule"))),
    }
}

/// (g_n, h_n) of a schedule target at p.
#[pyfunction]
fn envelope(target: &str, p: &str, n: u64) -> PyResult<(String, String)> {
    let (g, h) = envelope_eval(&schedule_of(target)?, &q(p)?, n).map_err(value_err)?;
    Ok((fmt(&g), fmt(&h)))
}

/// Violations of a schedule up to max_n as (kind, n, k) triples.
#[pyfunction]
fn validate(py: Python<'_>, target: &str, max_n: u64) -> PyResult<Vec<(String, u64, u64)>> {
    let s = schedule_of(target)?;
    let rep = py.detach(|| validate_schedule(&s, max_n));
    Ok(rep.violations.iter().map(|v| (format!("{:?}", v.kind), v.n, v.k)).collect())
}

#[pyfunction]
fn walk_bias(n: u64, p: &str) -> PyResult<String> {
    Ok(fmt(&walk::walk_bias_exact(n, &q(p)?)))
}

#[pyfunction]
fn reflection_count(n: u64, k: u64) -> BigInt {
    walk::reflection_count(n, k)
}

#[pyfunction]
fn hypergeom_pmf(n: u64, k: u64, i: u64) -> PyResult<String> {
    let spec = verify::HypergeomSpec::new(n, k)
        .ok_or_else(|| value_err(format!("need n >= 1 and k <= 2n, got n={n} k={k}")))?;
    Ok(fmt(&verify::hypergeom_pmf(spec, i)))
}

/// (name, cases, violations) for each inequality family.
#[pyfunction]
fn lemma_suite(py: Python<'_>, n_tail: u64, n_smooth: u64) -> Vec<(String, u64, usize)> {
    py.detach(|| verify::lemma_suite(n_tail, n_smooth))
        .into_iter()
        .map(|c| (c.name, c.cases, c.violations.len()))
        .collect()
}

#[pymodule]
fn bfactory_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlan>()?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(tail_profile, m)?)?;
    m.add_function(wrap_pyfunction!(envelope, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(walk_bias, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_count, m)?)?;
    m.add_function(wrap_pyfunction!(hypergeom_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_suite, m)?)?;
    Ok(())
}
