use std::collections::BTreeMap;

use homdist::ledger::{derive_interval, load_scenario, propagate, run, FactTable, Interval, Options, Scenario};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario(file: &str) -> String {
    std::fs::read_to_string(format!("{}/data/{file}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn with(kv: &[(&str, i64)]) -> BTreeMap<String, i64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn solve(file: &str, kv: &[(&str, i64)]) -> (Scenario, FactTable) {
    let sc = load_scenario(&scenario(file), &with(kv)).unwrap();
    let t = propagate(&sc, &Options::default()).unwrap();
    (sc, t)
}

fn goal(sc: &Scenario, t: &FactTable) -> (Interval, Vec<&'static str>, Vec<&'static str>) {
    let r = derive_interval(t, &sc.goals[0]).unwrap();
    let lower = t.rules_used(r.lower).into_iter().collect();
    let upper = r.upper.map(|u| t.rules_used(u).into_iter().collect()).unwrap_or_default();
    (r.interval, lower, upper)
}

#[test]
fn hopf() {
    for n in 2..=5 {
        let (sc, t) = solve("hopf.scn", &[("n", n)]);
        let (iv, lower, upper) = goal(&sc, &t);
        assert_eq!(iv, Interval { lower: 2, upper: Some(n) }, "n = {n}");
        assert!(lower.contains(&"R10"), "{lower:?}");
        if n > 2 {
            assert!(lower.contains(&"R5'") && lower.contains(&"R16"), "{lower:?}");
        }
        assert!(upper.contains(&"R8"), "{upper:?}");
    }
    let out = run(&scenario("hopf.scn"), &with(&[("n", 3)]), &Options::default()).unwrap();
    assert!(out.starts_with("TCn_param[q] in [2, 3]\n"), "{out}");
}

#[test]
fn complex_stiefel() {
    for (r, k) in [(1, 2), (1, 3), (2, 4)] {
        let (sc, t) = solve("stiefel_complex.scn", &[("r", r), ("k", k)]);
        let (iv, lower, upper) = goal(&sc, &t);
        assert_eq!(iv, Interval { lower: r * k, upper: Some(2 * r * (k - r) + 1) }, "(r, k) = ({r}, {k})");
        assert_eq!(lower, vec!["R10"]);
        assert_eq!(upper, vec!["R8"]);
    }
}

#[test]
fn quaternionic_stiefel() {
    for (r, k) in [(3, 1), (4, 1), (5, 2)] {
        let (sc, t) = solve("stiefel_quat.scn", &[("r", r), ("k", k)]);
        let (iv, lower, _) = goal(&sc, &t);
        assert_eq!(iv.lower, k * (r - k));
        assert_eq!(iv.upper, None);
        assert_eq!(lower, vec!["R10"]);
    }
    let err = load_scenario(&scenario("stiefel_quat.scn"), &with(&[("r", 1), ("k", 2)])).unwrap_err();
    assert!(err.to_string().contains("below its floor"), "{err}");
}

#[test]
fn real_stiefel() {
    for p in 1..=3 {
        let (sc, t) = solve("stiefel_real.scn", &[("p", p)]);
        let (iv, lower, upper) = goal(&sc, &t);
        assert_eq!(iv, Interval { lower: (1 << (p + 1)) - 2, upper: Some((1 << (p + 2)) - 1) }, "p = {p}");
        assert!(lower.is_empty(), "{lower:?}");
        assert_eq!(upper, vec!["R2", "R8"]);
    }
    for p in 1..=2 {
        let (sc, t) = solve("stiefel_real2.scn", &[("p", p)]);
        let (iv, _, upper) = goal(&sc, &t);
        assert_eq!(iv, Interval { lower: (1 << (p + 1)) - 1, upper: Some((1 << (p + 2)) + 3) }, "p = {p}");
        assert_eq!(upper, vec!["R2", "R8"]);
    }
}

#[test]
fn defaults_match_documented_examples() {
    let (sc, _) = solve("hopf.scn", &[("n", 3)]);
    assert_eq!(sc.facts.len(), 2);
    let (_, t) = solve("stiefel_complex.scn", &[]);
    let (sc, _) = solve("stiefel_complex.scn", &[]);
    assert_eq!(goal(&sc, &t).0, Interval { lower: 2, upper: Some(3) });
    let (sc, t) = solve("stiefel_real.scn", &[]);
    assert_eq!(goal(&sc, &t).0, Interval { lower: 2, upper: Some(7) });
}

#[test]
fn every_bound_replays() {
    for (file, kv) in [
        ("hopf.scn", vec![("n", 4)]),
        ("stiefel_complex.scn", vec![("r", 2), ("k", 4)]),
        ("stiefel_quat.scn", vec![]),
        ("stiefel_real.scn", vec![("p", 3)]),
        ("stiefel_real2.scn", vec![("p", 2)]),
    ] {
        let (_, t) = solve(file, &kv);
        for d in 0..t.derivations.len() {
            assert_eq!(t.replay(d), Some(t.derivations[d].value), "{file} derivation {d}");
        }
    }
}

#[test]
fn fixpoint_is_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (file, kv) in [
        ("hopf.scn", vec![("n", 5)]),
        ("stiefel_complex.scn", vec![("r", 1), ("k", 3)]),
        ("stiefel_real2.scn", vec![("p", 2)]),
    ] {
        let (sc, base) = solve(file, &kv);
        for _ in 0..20 {
            let mut order: Vec<usize> = (0..base.constraints.len()).collect();
            order.shuffle(&mut rng);
            let t = propagate(&sc, &Options { order: Some(order), ..Options::default() }).unwrap();
            for q in &base.quantities {
                assert_eq!(t.interval(q), base.interval(q), "{file}: {q}");
            }
        }
    }
}

#[test]
fn runs_are_byte_identical() {
    let a = run(&scenario("hopf.scn"), &with(&[("n", 4)]), &Options::default()).unwrap();
    let b = run(&scenario("hopf.scn"), &with(&[("n", 4)]), &Options::default()).unwrap();
    assert_eq!(a, b);
}
