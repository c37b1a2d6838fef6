mod common;

use common::{bits_of, materialise};

use bfactory::coin::CoinSource;
use bfactory::envelope::{decide, simulate, Decision, EnvelopeSchedule, RankContext, SimMode};
use bfactory::rational::rat;
use bfactory::schedules::{MonomialSchedule, SmoothParams, SmoothSchedule, Smoothness, TargetFn};

fn lipschitz() -> EnvelopeSchedule {
    EnvelopeSchedule::new(
        SmoothSchedule::new(SmoothParams {
            f: TargetFn::affine(rat(1, 2), rat(1, 4)),
            c: rat(1, 4),
            eps: rat(1, 4),
            smoothness: Smoothness::Lipschitz,
        })
        .unwrap(),
    )
}

#[test]
fn decide_matches_materialised_sets_lipschitz() {
    let s = lipschitz();
    let ctx = RankContext::new(s.clone());
    let table = materialise(&s, 16);
    for (&n, words) in &table {
        for (&w, &d) in words {
            assert_eq!(decide(&ctx, &bits_of(w, n)).unwrap(), d, "n={n} w={w:b}");
        }
    }
    assert_eq!(table[&16].len(), 1 << 16);
}

#[test]
fn decide_matches_materialised_sets_monomial() {
    let s = EnvelopeSchedule::new(MonomialSchedule::new(3));
    let ctx = RankContext::new(s.clone());
    let table = materialise(&s, 12);
    for (&n, words) in &table {
        for (&w, &d) in words {
            assert_eq!(decide(&ctx, &bits_of(w, n)).unwrap(), d);
        }
    }
}

#[test]
fn simulate_on_tapes_agrees_with_decide() {
    let s = lipschitz();
    let ctx = RankContext::new(s);
    for w in 0u64..(1 << 16) {
        let word = bits_of(w, 16);
        let mut tape = CoinSource::tape(word.clone());
        match simulate(&ctx, &mut tape, SimMode::Exact) {
            Ok(rec) => {
                let n = rec.checkpoint as usize;
                let d = decide(&ctx, &word[..n]).unwrap();
                assert_eq!(d.bit(), Some(rec.bit));
                assert_eq!(rec.tosses, n as u64);
            }
            Err(_) => assert_eq!(decide(&ctx, &word).unwrap(), Decision::Continue),
        }
    }
}

#[test]
fn accelerated_matches_exact() {
    let s = lipschitz();
    let ctx = RankContext::new(s);
    let base = CoinSource::seeded(11, rat(3, 10)).unwrap();
    let mut deep = 0;
    for r in 0..3000 {
        let mut a = base.fork(r).with_budget(1 << 12);
        let mut b = base.fork(r).with_budget(1 << 12);
        let x = simulate(&ctx, &mut a, SimMode::Exact);
        let y = simulate(&ctx, &mut b, SimMode::Accelerated);
        match (x, y) {
            (Ok(x), Ok(y)) => {
                assert_eq!((x.bit, x.tosses), (y.bit, y.tosses), "replica {r}");
                deep += (x.checkpoint > 128) as u32;
            }
            (Err(_), Err(_)) => {}
            (x, y) => panic!("replica {r}: {x:?} vs {y:?}"),
        }
    }
    assert!(deep > 100, "only {deep} runs reached the float path");
}
