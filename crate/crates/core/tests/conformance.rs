use homdist::conformance::{check_propositions, random_space, GenConfig, Suite};
use homdist::finspace::{core_reduce, is_path_connected, parse_space, CMap};
use homdist::invariants::{param_tc, tc_n, Budget, InvariantError};
use homdist::distance::DistanceError;
use std::sync::Arc;

#[test]
fn hard_propositions_with_distance_proofs_hold() {
    let cfg = GenConfig::default();
    let report = check_propositions(&cfg, Suite::Hard, 200);
    for e in &report.entries {
        assert!(e.passed > 0, "{} never exercised", e.id);
        assert_eq!(e.tried, e.passed + e.failures.len() + e.skipped);
        if e.id != "paramtc.restriction" {
            assert!(e.failures.is_empty(), "{}", report.render());
        }
    }
}

#[test]
fn restriction_over_a_sub_base_can_lose_finiteness() {
    // E is the pseudocircle, B a two-point chain; over the bottom point the
    // fiber {a, b} is discrete, so (a, b) has no path inside it.
    let e = Arc::new(parse_space("space S\npoints a b c d\nrel a<c a<d b<c b<d\n").unwrap());
    let b = Arc::new(parse_space("space B\npoints lo hi\nrel lo<hi\n").unwrap());
    let q = CMap::new(e.clone(), b, vec![0, 0, 1, 1]).unwrap();
    assert!(param_tc(&q, 2, &Budget::default()).is_ok());
    let fiber = Arc::new(parse_space("space F\npoints a b\n").unwrap());
    let pt = Arc::new(parse_space("space P\npoints lo\n").unwrap());
    let q2 = CMap::new(fiber, pt, vec![0, 0]).unwrap();
    assert!(matches!(
        param_tc(&q2, 2, &Budget::default()),
        Err(InvariantError::Distance(DistanceError::NoFiniteDistance { .. }))
    ));
}

#[test]
fn reports_are_byte_identical() {
    let cfg = GenConfig { seed: 7, ..GenConfig::default() };
    for suite in [Suite::Hard, Suite::Report] {
        let a = check_propositions(&cfg, suite, 40).render();
        let b = check_propositions(&cfg, suite, 40).render();
        assert_eq!(a, b);
        assert!(a.contains("begin results"));
    }
}

#[test]
fn report_suite_finds_the_pseudocircle() {
    let report = check_propositions(&GenConfig::default(), Suite::Report, 200);
    let text = report.render();
    println!("{text}");
    for id in ["maptc.below-paramtc.identity", "reltc.homotopy-type", "pairtc.contractible-subset"] {
        let e = report.entries.iter().find(|e| e.id == id).unwrap();
        let w = &e.failures.first().unwrap_or_else(|| panic!("{id} has no counterexample")).witness;
        assert_eq!(w.space.len(), 4, "{id}");
        assert_eq!(core_reduce(&w.space).core.len(), 4, "{id}");
    }
    for id in ["maptc.below-paramtc.collapse", "cat.two-forms"] {
        let e = report.entries.iter().find(|e| e.id == id).unwrap();
        assert!(e.failures.is_empty(), "{id}");
    }
}

#[test]
fn generated_spaces_are_connected() {
    let cfg = GenConfig { seed: 1, ..GenConfig::default() };
    for i in 0..200 {
        assert!(is_path_connected(&random_space(&cfg, i)));
    }
}

#[test]
fn contractible_exactly_when_tc_is_one() {
    let cfg = GenConfig { seed: 11, ..GenConfig::default() };
    let budget = Budget::with_points(36);
    for i in 0..300 {
        let x = Arc::new(random_space(&cfg, i));
        let tc = tc_n(&x, 2, &budget).unwrap().value;
        assert_eq!(tc == 1, core_reduce(&x).core.len() == 1, "instance {i}");
    }
}
