use bfactory::coin::CoinSource;
use bfactory::combinators::{average, complement, constant_plan, identity, plan_value, product, run_plan, FactoryPlan};
use bfactory::envelope::{decide, RankContext};
use bfactory::interval::Interval;
use bfactory::rational::{rat, Rational};
use bfactory::schedules::ScheduleSpec;
use proptest::prelude::*;

fn small_plan(pick: u8, c: Rational) -> FactoryPlan {
    let x = identity(Interval::unit()).unwrap();
    let k = constant_plan(c).unwrap();
    match pick % 4 {
        0 => x,
        1 => product(x, k).unwrap(),
        2 => average(k, x).unwrap(),
        _ => complement(product(x.clone(), x).unwrap()),
    }
}

fn bits(v: &[bool]) -> CoinSource {
    CoinSource::tape(v.to_vec())
}

proptest! {
    #[test]
    fn complement_is_an_involution(pick in 0u8..4, num in 1i64..9, tape in prop::collection::vec(any::<bool>(), 0..40), pn in 0i64..=16) {
        let f = small_plan(pick, rat(num, 10));
        let ff = complement(complement(f.clone()));
        let p = rat(pn, 16);
        prop_assert_eq!(plan_value(&f, &p).unwrap(), plan_value(&ff, &p).unwrap());
        let a = run_plan(&f, &mut bits(&tape)).ok().map(|o| (o.bit, o.tosses));
        let b = run_plan(&ff, &mut bits(&tape)).ok().map(|o| (o.bit, o.tosses));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn single_complement_flips(pick in 0u8..4, num in 1i64..9, tape in prop::collection::vec(any::<bool>(), 0..40)) {
        let f = small_plan(pick, rat(num, 10));
        let a = run_plan(&f, &mut bits(&tape)).ok();
        let b = run_plan(&complement(f), &mut bits(&tape)).ok();
        if let (Some(a), Some(b)) = (a, b) {
            prop_assert_eq!(a.bit, !b.bit);
            prop_assert_eq!(a.tosses, b.tosses);
        }
    }

    #[test]
    fn runs_are_tape_determined(pick in 0u8..4, num in 1i64..9, tape in prop::collection::vec(any::<bool>(), 0..40)) {
        let f = small_plan(pick, rat(num, 10));
        let a = run_plan(&f, &mut bits(&tape)).map(|o| (o.bit, o.tosses)).ok();
        let b = run_plan(&f, &mut bits(&tape)).map(|o| (o.bit, o.tosses)).ok();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn decisions_do_not_depend_on_cache_history(words in prop::collection::vec((0u64..256, 0u32..4), 1..30)) {
        let spec = ScheduleSpec::parse("lipschitz:1/2 + p/4:1/4:1/4").unwrap();
        let shared = RankContext::new(spec.build().unwrap());
        for (w, j) in words {
            let n = 2usize << j;
            let word: Vec<bool> = (0..n).map(|i| (w >> (i % 8)) & 1 == 1).collect();
            let fresh = RankContext::new(spec.build().unwrap());
            prop_assert_eq!(decide(&shared, &word).unwrap(), decide(&fresh, &word).unwrap());
        }
    }
}
