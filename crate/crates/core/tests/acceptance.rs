mod common;

use std::io::Write;
use std::time::Instant;

use bfactory::coin::{BitStream, CoinSource};
use bfactory::combinators::{constant_plan, Backend};
use bfactory::envelope::{
    decide, decided_mass, envelope_eval, envelope_eval_f64, simulate, validate_schedule, EnvelopeSchedule, RankContext,
    SimMode,
};
use bfactory::interval::Interval;
use bfactory::lang::compile_text;
use bfactory::rational::{exp_neg_bounds, int, parse_rational, pow2, rat, to_f64, Rational};
use bfactory::schedules::{
    continuous_schedule, polya_exponent, ContinuousOptions, DoublingParams, DoublingSchedule, HomogeneousPoly,
    ScheduleSpec, TargetFn,
};
use bfactory::verify::{
    feasibility_check, lemma_suite, monte_carlo, oracle_enumerate, Feasibility, MonteCarloOptions, SimulationReport,
    Target,
};
use bfactory::walk::{reflection_count, walk_bias_exact, WalkConfig};
use common::{bits_of, materialise};

const LIPSCHITZ: &str = "lipschitz:1/2 + p/4:1/4:1/4";

/// Written to the raw stderr handle so the verdicts survive libtest output capture.
fn say(text: String) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{text}");
}

fn line(id: &str, ok: bool, detail: String, start: Instant) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    say(format!("criterion {id}: {verdict} ({detail}; {:.1}s)", start.elapsed().as_secs_f64()));
    assert!(ok, "criterion {id} failed: {detail}");
}

fn schedule(s: &str) -> EnvelopeSchedule {
    ScheduleSpec::parse(s).unwrap().build().unwrap()
}

fn mc(target: &Target, p: Rational, runs: u64, seed: u64, budget: Option<u64>) -> SimulationReport {
    let mut o = MonteCarloOptions::new(runs, seed);
    o.max_tosses = budget;
    monte_carlo(target, &p, &o).unwrap()
}

#[test]
fn c1_doubling_envelopes_consistent() {
    let t = Instant::now();
    let params = DoublingParams::new(rat(3, 25)).unwrap();
    let raw = EnvelopeSchedule::new(DoublingSchedule::new(params.clone().with_idle(false)));
    let rep = validate_schedule(&raw, 1024);
    let consistency = rep.consistency_violations();
    let idle = validate_schedule(&EnvelopeSchedule::new(DoublingSchedule::new(params)), 1024);
    let ok = consistency == 0 && idle.is_valid() && t.elapsed().as_secs() <= 60;
    line(
        "1",
        ok,
        format!(
            "raw envelopes to n=1024: {consistency} consistency violations, {} count-range overflows; idle-phase schedule valid: {}",
            rep.violations.len() - consistency,
            idle.is_valid()
        ),
        t,
    );
}

#[test]
fn c2_oracle_equals_envelopes() {
    let t = Instant::now();
    let mut checks = 0;
    for s in ["monomial:2", LIPSCHITZ] {
        let sched = schedule(s);
        let target = Target::parse(s, SimMode::Exact).unwrap();
        for depth in [8u32, 16] {
            for p in [rat(1, 3), rat(3, 10), rat(4, 5)] {
                let r = oracle_enumerate(&target, depth, &p).unwrap();
                let (g, h) = envelope_eval(&sched, &p, depth as u64).unwrap();
                assert_eq!(r.accept, g, "{s} depth {depth}");
                assert_eq!(&r.accept + &r.undecided, h, "{s} depth {depth}");
                checks += 1;
            }
        }
        let table = materialise(&sched, 16);
        let ctx = RankContext::new(sched.clone());
        for (n, words) in &table {
            for (&w, &d) in words {
                assert_eq!(decide(&ctx, &bits_of(w, *n)).unwrap(), d, "{s} n={n} w={w:b}");
                checks += 1;
            }
        }
    }
    line("2", t.elapsed().as_secs() <= 120, format!("{checks} exact agreements"), t);
}

#[test]
fn c3_monte_carlo_bias() {
    let t = Instant::now();
    let runs = 100_000;
    let fair = mc(&Target::FairBit, rat(3, 10), runs, 1, None);
    let mean = to_f64(&parse_rational(&fair.toss_mean).unwrap());
    let a = (fair.estimate_f64() - 0.5).abs() <= 0.0047 && (mean - 100.0 / 21.0).abs() <= 0.02 * 100.0 / 21.0;
    line("3a", a, format!("von Neumann freq {:.5}, mean tosses {mean:.4}", fair.estimate_f64()), t);

    let t = Instant::now();
    let third = Target::Plan(constant_plan(rat(1, 3)).unwrap());
    let r = mc(&third, rat(3, 10), runs, 7, None);
    line("3b", (r.estimate_f64() - 1.0 / 3.0).abs() <= 0.0045, format!("Const(1/3) freq {:.5}", r.estimate_f64()), t);

    let t = Instant::now();
    let lip = Target::parse(LIPSCHITZ, SimMode::Accelerated).unwrap();
    let r = mc(&lip, rat(3, 10), runs, 3, Some(1 << 16));
    let ok = (r.estimate_f64() - 0.575).abs() <= 0.0047 && t.elapsed().as_secs() <= 60;
    line(
        "3c",
        ok,
        format!("Lipschitz freq {:.5}, {} of {runs} runs censored at 2^16 tosses", r.estimate_f64(), r.censored),
        t,
    );

    let t = Instant::now();
    let plan = compile_text("p/(p+1/5)", &Interval::new(rat(1, 10), rat(2, 5)), Some(Backend::Approx { steps: 2000 }))
        .unwrap();
    let r = mc(&Target::Plan(plan.clone()), rat(1, 5), runs, 5, None);
    let ok = (r.estimate_f64() - 0.5).abs() <= 0.0047 && t.elapsed().as_secs() <= 60;
    line("3d", ok, format!("{} freq {:.5}", plan.describe(), r.estimate_f64()), t);
}

#[test]
fn c4_walk_exactness() {
    let t = Instant::now();
    for n in 1..=14u64 {
        let mut counts = vec![0u64; n as usize + 1];
        for w in 0..1u64 << n {
            let mut s = 0i64;
            let mut hit = false;
            for b in bits_of(w, n) {
                s += if b { 1 } else { -1 };
                if s >= 0 {
                    hit = true;
                    break;
                }
            }
            if hit {
                counts[w.count_ones() as usize] += 1;
            }
        }
        for (k, c) in counts.iter().enumerate() {
            assert_eq!(reflection_count(n, k as u64), (*c).into(), "n={n} k={k}");
        }
    }
    for p in [rat(1, 4), rat(1, 3), rat(3, 5)] {
        let r = oracle_enumerate(&Target::Walk(WalkConfig::new(14)), 14, &p).unwrap();
        assert_eq!(r.accept, walk_bias_exact(14, &p));
        assert_eq!(r.undecided, rat(0, 1));
    }
    let mut worst = 0.0f64;
    for j in 1..=9 {
        let p = rat(j, 20);
        for n in [64u64, 256, 1024, 4096] {
            let err = &p * int(2) - walk_bias_exact(n, &p);
            let gap = rat(1, 2) - &p;
            let (lo, _) = exp_neg_bounds(&(&gap * &gap * int(2 * n as i64)), 64);
            let bound = lo * int(2);
            assert!(err >= rat(0, 1) && err <= bound, "p={p} n={n}");
            worst = worst.max(to_f64(&(err / bound)));
        }
    }
    line("4", t.elapsed().as_secs() <= 120, format!("largest error/bound ratio {worst:.3}"), t);
}

#[test]
fn c5_lemma_suite() {
    let t = Instant::now();
    let suite = lemma_suite(64, 256);
    let cases: u64 = suite.iter().map(|c| c.cases).sum();
    for c in &suite {
        say(format!("  {}: {} cases, {} violations", c.name, c.cases, c.violations.len()));
    }
    let ok = suite.iter().all(|c| c.passed()) && t.elapsed().as_secs() <= 120;
    line("5", ok, format!("{} inequality families, {cases} exact cases", suite.len()), t);
}

#[test]
fn c6_polya_and_continuous() {
    let t = Instant::now();
    let q = |c: i64| HomogeneousPoly::new(vec![rat(1, 1), rat(c, 2), rat(1, 1)]);
    let e1 = polya_exponent(&q(-2), 1000).unwrap();
    let e2 = polya_exponent(&q(-3), 1000).unwrap();
    let f = TargetFn::half_plus_sin_over_8();
    let cs = continuous_schedule(f.clone(), rat(1, 4), 4..=6, &ContinuousOptions::default()).unwrap();
    let levels = cs.levels.clone();
    let sched = EnvelopeSchedule::new(cs);
    let top = levels.last().unwrap().checkpoint;
    let valid = validate_schedule(&sched, top).is_valid();
    let mut bracket = true;
    for lv in &levels {
        let tol = Rational::new(4.into(), pow2(lv.level as u64));
        for p in [rat(1, 4), rat(1, 2), rat(3, 4)] {
            let (g, h) = envelope_eval(&sched, &p, lv.checkpoint).unwrap();
            let fp = f.eval(&p);
            bracket &= g <= fp && fp <= h && &fp - &g <= tol && &h - &fp <= tol;
        }
    }
    let ok = e1 == 1 && e2 == 5 && valid && bracket && t.elapsed().as_secs() <= 300;
    let cps: Vec<u64> = levels.iter().map(|l| l.checkpoint).collect();
    line("6", ok, format!("Polya exponents {e1}, {e2}; checkpoints {cps:?}; valid {valid}; brackets {bracket}"), t);
}

#[test]
fn c7_tail_rates() {
    let t = Instant::now();
    let runs = 100_000u64;
    let r = mc(&Target::FairBit, rat(3, 10), runs, 2, None);
    let mut worst = 0.0f64;
    for m in 1..=8u64 {
        let emp =
            r.tail.iter().find(|(n, _)| *n == 2 * m).map(|(_, s)| to_f64(&parse_rational(s).unwrap())).unwrap_or(0.0);
        let want = 0.58f64.powi(m as i32);
        let sigma = (want * (1.0 - want) / runs as f64).sqrt();
        worst = worst.max((emp - want).abs() / sigma);
    }
    line("7a", worst <= 3.0, format!("largest deviation {worst:.2} sigma over m <= 8"), t);

    let t = Instant::now();
    let sched = schedule(LIPSCHITZ);
    let p = rat(3, 10);
    let mut ratios = Vec::new();
    for n in [64u64, 256] {
        let (_, _, w1) = decided_mass(&sched, &p, n).unwrap();
        let (_, _, w4) = decided_mass(&sched, &p, 4 * n).unwrap();
        ratios.push(to_f64(&(w4 / w1)));
    }
    let ok = ratios.iter().all(|r| (0.4..=0.6).contains(r));
    line("7b", ok, format!("(h_4n - g_4n)/(h_n - g_n) at n = 64, 256: {ratios:.4?}"), t);
}

#[test]
fn c8_doubling_smoke_run() {
    let t = Instant::now();
    let params = DoublingParams::new(rat(3, 25)).unwrap();
    let n0 = params.n0;
    let sched = EnvelopeSchedule::new(DoublingSchedule::new(params));
    let ctx = RankContext::new(sched.clone());
    let mut src = CoinSource::seeded(2024, rat(1, 4)).unwrap();
    let rec = simulate(&ctx, &mut src, SimMode::Exact).unwrap();
    assert_eq!(rec.tosses, src.tosses());
    let gaps: Vec<(f64, f64)> = [n0, 2 * n0, 4 * n0]
        .iter()
        .map(|&n| {
            let b = envelope_eval_f64(&sched, 0.25, n).unwrap();
            (b.gap, b.err)
        })
        .collect();
    // ratios use the unfavourable end of each error bar
    let r1 = (gaps[1].0 + gaps[1].1) / (gaps[0].0 - gaps[0].1);
    let r2 = (gaps[2].0 + gaps[2].1) / (gaps[1].0 - gaps[1].1);
    let ok = rec.tosses >= n0 && r1 < 0.9 && r2 < 0.9 && t.elapsed().as_secs() <= 1800;
    line(
        "8",
        ok,
        format!(
            "output {} after {} tosses (n0 = {n0}); gaps {:.3e}, {:.3e}, {:.3e}; ratios {r1:.3}, {r2:.3}",
            rec.bit as u8, rec.tosses, gaps[0].0, gaps[1].0, gaps[2].0
        ),
        t,
    );
}

#[test]
fn c9_feasibility() {
    let t = Instant::now();
    let grid: Vec<Rational> = (1..=9).map(|j| rat(j, 20)).collect();
    let capped = feasibility_check(|x| (x * int(2)).min(rat(4, 5)), &grid, 20);
    let mut near = grid.clone();
    near.push(rat(49, 100));
    let doubling = feasibility_check(|x| x * int(2), &near, 5);
    let ok =
        capped == Feasibility::Valid(3) && matches!(&doubling, Feasibility::Failure { p, .. } if *p == rat(49, 100));
    line("9", ok, format!("2p capped at 4/5 -> {capped:?}; 2p near 1/2 -> {doubling:?}"), t);
}
