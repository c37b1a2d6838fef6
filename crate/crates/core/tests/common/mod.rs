use std::collections::HashMap;

use bfactory::envelope::{Decision, EnvelopeSchedule};
use bfactory::rational::binomial;

pub fn bits_of(w: u64, n: u64) -> Vec<bool> {
    (0..n).rev().map(|i| (w >> i) & 1 == 1).collect()
}

/// Decisions for every word at every checkpoint, built by materialising the ordered sets.
pub fn materialise(s: &EnvelopeSchedule, max_n: u64) -> HashMap<u64, HashMap<u64, Decision>> {
    let cps = s.checkpoints_upto(max_n);
    let mut out = HashMap::new();
    let n1 = cps[0];
    let to_u = |c: &num_bigint::BigInt| -> usize { c.to_string().parse().unwrap() };
    // level one: lexicographic order within each weight
    let mut dec = HashMap::new();
    let mut ba: HashMap<u64, Vec<u64>> = HashMap::new();
    for k in 0..=n1 {
        let mut words: Vec<u64> = (0..1u64 << n1).filter(|w| w.count_ones() as u64 == k).collect();
        words.sort();
        let (a, b) = s.counts(n1, k, &binomial(n1, k));
        let (a, b) = (to_u(&a), to_u(&b));
        for (pos, w) in words.iter().enumerate() {
            let d = if pos < a {
                Decision::OutputOne
            } else if pos < b {
                Decision::Continue
            } else {
                Decision::OutputZero
            };
            dec.insert(*w, d);
        }
        ba.insert(k, words[a..b].to_vec());
    }
    out.insert(n1, dec.clone());
    let mut n = n1;
    for &m in &cps[1..] {
        let d = m - n;
        let mut next = HashMap::new();
        let mut next_ba: HashMap<u64, Vec<u64>> = HashMap::new();
        for k in 0..=m {
            // extensions of already-decided prefixes
            let mut ones = 0usize;
            for w in (0..1u64 << m).filter(|w| w.count_ones() as u64 == k) {
                match dec[&(w >> d)] {
                    Decision::OutputOne => {
                        ones += 1;
                        next.insert(w, Decision::OutputOne);
                    }
                    Decision::OutputZero => {
                        next.insert(w, Decision::OutputZero);
                    }
                    Decision::Continue => {}
                }
            }
            // candidates ordered by prefix weight, prefix position, suffix order
            let mut cands: Vec<(u64, usize, u64, u64)> = Vec::new();
            for i in 0..=k.min(n) {
                let Some(list) = ba.get(&i) else { continue };
                for (pos, u) in list.iter().enumerate() {
                    let mut suffixes: Vec<u64> = (0..1u64 << d).filter(|s| s.count_ones() as u64 + i == k).collect();
                    suffixes.sort();
                    for s in suffixes {
                        cands.push((i, pos, s, (u << d) | s));
                    }
                }
            }
            cands.sort();
            let (a, b) = s.counts(m, k, &binomial(m, k));
            let (da, db) = (to_u(&a) - ones, to_u(&b) - ones);
            for (pos, c) in cands.iter().enumerate() {
                let dd = if pos < da {
                    Decision::OutputOne
                } else if pos < db {
                    Decision::Continue
                } else {
                    Decision::OutputZero
                };
                next.insert(c.3, dd);
            }
            next_ba.insert(k, cands[da..db].iter().map(|c| c.3).collect());
        }
        out.insert(m, next.clone());
        dec = next;
        ba = next_ba;
        n = m;
    }
    out
}
