use bfactory::coin::CoinSource;
use bfactory::combinators::{
    average, complement, constant_plan, identity, plan_value, product, run_plan, series_plan, sum_plan, Backend,
    CoeffStream, FactoryPlan,
};
use bfactory::interval::Interval;
use bfactory::rational::{rat, to_f64, Rational};
use bfactory::verify::{monte_carlo, oracle_enumerate, MonteCarloOptions, Target};

fn dom(lo: i64, hi: i64, d: i64) -> Interval {
    Interval::new(rat(lo, d), rat(hi, d))
}

/// Runs the plan and checks the Wilson interval meets the exact enclosure.
fn agrees(plan: &FactoryPlan, p: Rational, runs: u64) -> f64 {
    let want = plan_value(plan, &p).unwrap();
    assert!(want.width() < rat(1, 100), "loose enclosure {want}");
    let rep = monte_carlo(&Target::Plan(plan.clone()), &p, &MonteCarloOptions::new(runs, 17)).unwrap();
    let (lo, hi) = rep.interval();
    assert!(lo <= want.hi && want.lo <= hi, "{}: [{}, {}] vs {}", plan.describe(), to_f64(&lo), to_f64(&hi), want);
    rep.estimate_f64()
}

#[test]
fn product_of_identities_is_square() {
    let x = identity(Interval::unit()).unwrap();
    let sq = product(x.clone(), x).unwrap();
    assert_eq!(plan_value(&sq, &rat(3, 10)).unwrap(), Interval::point(rat(9, 100)));
    agrees(&sq, rat(3, 10), 50_000);
}

#[test]
fn average_and_complement() {
    let x = identity(Interval::unit()).unwrap();
    let f = average(complement(x.clone()), constant_plan(rat(1, 3)).unwrap()).unwrap();
    assert_eq!(plan_value(&f, &rat(1, 4)).unwrap(), Interval::point(rat(13, 24)));
    agrees(&f, rat(1, 4), 50_000);
}

#[test]
fn sum_with_walk_doubler() {
    let x = identity(dom(1, 4, 10)).unwrap();
    let s = sum_plan(x, constant_plan(rat(1, 5)).unwrap(), rat(1, 20), Some(Backend::Approx { steps: 2000 })).unwrap();
    let v = plan_value(&s, &rat(3, 10)).unwrap();
    assert!(v.contains(&rat(1, 2)) || (v.hi <= rat(1, 2) && v.lo > rat(49, 100)), "{v}");
    agrees(&s, rat(3, 10), 40_000);
}

#[test]
fn polynomial_series() {
    let x = identity(dom(0, 1, 2)).unwrap();
    let coeffs = CoeffStream::Explicit(vec![rat(1, 4), rat(1, 4), rat(1, 4)]);
    let s = series_plan(coeffs, rat(1, 1), rat(1, 4), x, Some(Backend::Approx { steps: 16 })).unwrap();
    agrees(&s, rat(3, 10), 20_000);
}

#[test]
fn oracle_brackets_plan_values() {
    let x = identity(Interval::unit()).unwrap();
    let plans = [
        product(x.clone(), x.clone()).unwrap(),
        average(x.clone(), constant_plan(rat(2, 3)).unwrap()).unwrap(),
        complement(product(x.clone(), constant_plan(rat(1, 3)).unwrap()).unwrap()),
    ];
    for plan in plans {
        for p in [rat(1, 4), rat(1, 2), rat(5, 7)] {
            let r = oracle_enumerate(&Target::Plan(plan.clone()), 12, &p).unwrap();
            let (g, h) = r.bracket();
            let v = plan_value(&plan, &p).unwrap();
            assert!(g <= v.lo && v.hi <= h, "{} at {}: [{g}, {h}] vs {v}", plan.describe(), p);
        }
    }
}

#[test]
fn tosses_are_accounted() {
    let x = identity(Interval::unit()).unwrap();
    let f = product(x.clone(), x).unwrap();
    let mut tape = CoinSource::tape(vec![true, true, false]);
    let o = run_plan(&f, &mut tape).unwrap();
    assert_eq!((o.bit, o.tosses), (true, 2));
    let mut tape = CoinSource::tape(vec![false, true]);
    let o = run_plan(&f, &mut tape).unwrap();
    assert_eq!((o.bit, o.tosses), (false, 1));
}
