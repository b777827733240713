//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line and then
//! asserts, so `cargo test --test acceptance -- --nocapture` reads as a
//! checklist.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{all_maps, random_poset, unlabelled_posets, NaiveOracle};
use homdist::conformance::{check_propositions, random_space, GenConfig, Suite};
use homdist::distance::{higher_distance, DistanceError};
use homdist::finspace::{core_reduce, is_path_connected, parse_space, CMap, FiniteSpace};
use homdist::invariants::{cat, pair_tc, rel_tc, tc_n, tuple_index, Budget};
use homdist::ledger::{derive_interval, load_scenario, propagate, run, Interval, Options};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(name: &str, problems: &[String]) {
    if problems.is_empty() {
        println!("PASS {name}");
    } else {
        println!("FAIL {name}: {}", problems.join("; "));
    }
    assert!(problems.is_empty(), "{name}: {problems:#?}");
}

fn pseudocircle() -> Arc<FiniteSpace> {
    Arc::new(parse_space("space S\npoints a b c d\nrel a<c a<d b<c b<d\n").unwrap())
}

/// `X^n` built directly from tuples, with its projections as plain vectors.
fn naive_power(x: &FiniteSpace, n: usize) -> (FiniteSpace, Vec<Vec<usize>>) {
    let k = x.len();
    let tuples: Vec<Vec<usize>> = (0..k.pow(n as u32))
        .map(|mut c| {
            let mut t = vec![0; n];
            for slot in t.iter_mut().rev() {
                *slot = c % k;
                c /= k;
            }
            t
        })
        .collect();
    let names = tuples.iter().map(|t| t.iter().map(|&i| x.point_name(i)).collect::<Vec<_>>().join(",")).collect();
    let mut rel = Vec::new();
    for (i, s) in tuples.iter().enumerate() {
        for (j, t) in tuples.iter().enumerate() {
            if i != j && s.iter().zip(t).all(|(&a, &b)| x.leq(a, b)) {
                rel.push((i, j));
            }
        }
    }
    let proj = (0..n).map(|c| tuples.iter().map(|t| t[c]).collect()).collect();
    (FiniteSpace::new("P", names, &rel).unwrap(), proj)
}

/// The subspace on `keep` with the maps restricted to it.
fn naive_restrict(x: &FiniteSpace, keep: &[usize], maps: &[Vec<usize>]) -> (FiniteSpace, Vec<Vec<usize>>) {
    let names = keep.iter().map(|&p| x.point_name(p).to_string()).collect();
    let mut rel = Vec::new();
    for (i, &p) in keep.iter().enumerate() {
        for (j, &q) in keep.iter().enumerate() {
            if i != j && x.leq(p, q) {
                rel.push((i, j));
            }
        }
    }
    let maps = maps.iter().map(|f| keep.iter().map(|&p| f[p]).collect()).collect();
    (FiniteSpace::new("Y", names, &rel).unwrap(), maps)
}

#[test]
fn pseudocircle_battery() {
    let start = Instant::now();
    let s = pseudocircle();
    let budget = Budget::default();
    let a = 0;
    let id: Vec<usize> = (0..4).collect();
    let (s2, proj) = naive_power(&s, 2);

    let diagonal: Vec<usize> = (0..4).map(|p| tuple_index(&s, &[p, p])).collect();
    let naive_diag: Vec<usize> = (0..4).map(|p| p * 4 + p).collect();
    let naive_pair: Vec<usize> = (0..4).map(|p| p * 4 + a).collect();

    let oracle = |src: &FiniteSpace, maps: &[Vec<usize>]| NaiveOracle::new(src, &s).distance(maps);
    let rows: Vec<(&str, Option<usize>, usize, Option<usize>)> = vec![
        ("TC_2(S)", tc_n(&s, 2, &budget).ok().map(|r| r.value), 4, oracle(&s2, &proj)),
        ("cat(S)", cat(&s, a, &budget).ok().map(|r| r.value), 2, oracle(&s, &[id.clone(), vec![a; 4]])),
        ("TC_1(S)", tc_n(&s, 1, &budget).ok().map(|r| r.value), 1, oracle(&s, &[id.clone()])),
        ("TC_2,S(diagonal)", rel_tc(&s, 2, &diagonal, &budget).ok().map(|r| r.value), 1, {
            let (y, m) = naive_restrict(&s2, &naive_diag, &proj);
            oracle(&y, &m)
        }),
        ("TC_2(S,{a})", pair_tc(&s, &[a], 2, &budget).ok().map(|r| r.value), 1, {
            let (y, m) = naive_restrict(&s2, &naive_pair, &proj);
            oracle(&y, &m)
        }),
    ];
    let mut problems = Vec::new();
    for (label, engine, expected, naive) in rows {
        println!("  {label}: engine {engine:?}, oracle {naive:?}, expected {expected}");
        if engine != naive {
            problems.push(format!("{label}: engine {engine:?} but oracle {naive:?}"));
        }
        if engine != Some(expected) {
            problems.push(format!("{label} = {engine:?}, expected {expected}"));
        }
    }
    if start.elapsed() > Duration::from_secs(60) {
        problems.push(format!("took {:?}", start.elapsed()));
    }
    verdict("pseudocircle battery", &problems);
}

fn engine_value(maps: &[CMap]) -> Result<Option<usize>, String> {
    match higher_distance(maps) {
        Ok(r) => {
            r.verify(maps).map_err(|e| e.to_string())?;
            Ok(Some(r.value))
        }
        Err(DistanceError::NoFiniteDistance { .. }) => Ok(None),
        Err(e) => Err(e.to_string()),
    }
}

#[test]
fn oracle_equivalence() {
    let mut problems = Vec::new();
    let spaces: Vec<Arc<FiniteSpace>> = (1..=4)
        .flat_map(|n| {
            unlabelled_posets(n).into_iter().map(move |rel| {
                let names = (0..n).map(|i| format!("p{i}")).collect();
                Arc::new(FiniteSpace::new(format!("P{n}"), names, &rel).unwrap())
            })
        })
        .collect();
    let mut pairs = 0usize;
    for x in &spaces {
        for y in &spaces {
            let oracle = NaiveOracle::new(x, y);
            let all: Vec<usize> = (0..x.len()).collect();
            let maps = all_maps(x, &all, y);
            for (i, f) in maps.iter().enumerate() {
                for g in &maps[i..] {
                    let fm = CMap::new(x.clone(), y.clone(), f.clone()).unwrap();
                    let gm = CMap::new(x.clone(), y.clone(), g.clone()).unwrap();
                    let expected = oracle.distance(&[f.clone(), g.clone()]);
                    let got = engine_value(&[fm, gm]);
                    if got != Ok(expected) {
                        problems.push(format!("{x:?} {y:?} {f:?} {g:?}: {got:?} vs {expected:?}"));
                    }
                    pairs += 1;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let (nx, ny) = (rng.gen_range(1..=9), rng.gen_range(1..=4));
        let x = Arc::new(random_poset(&mut rng, nx, 0.35));
        let y = Arc::new(random_poset(&mut rng, ny, 0.5));
        let all: Vec<usize> = (0..x.len()).collect();
        let pool = all_maps(&x, &all, &y);
        let m = rng.gen_range(2..=3);
        let chosen: Vec<Vec<usize>> = (0..m).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
        let maps: Vec<CMap> = chosen.iter().map(|f| CMap::new(x.clone(), y.clone(), f.clone()).unwrap()).collect();
        let expected = NaiveOracle::new(&x, &y).distance(&chosen);
        let got = engine_value(&maps);
        if got != Ok(expected) {
            problems.push(format!("{x:?} {y:?} {chosen:?}: {got:?} vs {expected:?}"));
        }
    }
    println!("  {pairs} exhaustive pairs, 100 random instances, {} mismatches", problems.len());
    problems.truncate(5);
    verdict("oracle equivalence", &problems);
}

fn scenario(file: &str) -> String {
    std::fs::read_to_string(format!("{}/data/{file}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn ledger_golden_scenarios() {
    let mut problems = Vec::new();
    let mut check = |file: &str, kv: &[(&str, i64)], want: Interval, lower_rules: &[&str], upper_rules: &[&str]| {
        let params: BTreeMap<String, i64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let sc = load_scenario(&scenario(file), &params).unwrap();
        let t = propagate(&sc, &Options::default()).unwrap();
        let r = derive_interval(&t, &sc.goals[0]).unwrap();
        let lower = t.rules_used(r.lower);
        let upper = r.upper.map(|u| t.rules_used(u)).unwrap_or_default();
        println!("  {file} {kv:?}: {:?} lower via {lower:?} upper via {upper:?}", r.interval);
        if r.interval != want {
            problems.push(format!("{file} {kv:?}: {:?}, expected {want:?}", r.interval));
        }
        for rule in lower_rules {
            if !lower.contains(rule) {
                problems.push(format!("{file} {kv:?}: lower bound does not cite {rule}"));
            }
        }
        for rule in upper_rules {
            if !upper.contains(rule) {
                problems.push(format!("{file} {kv:?}: upper bound does not cite {rule}"));
            }
        }
    };
    for n in 2..=5 {
        let lower: &[&str] = if n > 2 { &["R10", "R5'"] } else { &["R10"] };
        check("hopf.scn", &[("n", n)], Interval { lower: 2, upper: Some(n) }, lower, &["R8"]);
    }
    for (r, k) in [(1, 2), (1, 3), (2, 4)] {
        let want = Interval { lower: r * k, upper: Some(2 * r * (k - r) + 1) };
        check("stiefel_complex.scn", &[("r", r), ("k", k)], want, &["R10"], &["R8"]);
    }
    for (r, k) in [(3, 1), (4, 1), (5, 2)] {
        check("stiefel_quat.scn", &[("r", r), ("k", k)], Interval { lower: k * (r - k), upper: None }, &["R10"], &[]);
    }
    for p in 1..=3 {
        let want = Interval { lower: (1 << (p + 1)) - 2, upper: Some((1 << (p + 2)) - 1) };
        check("stiefel_real.scn", &[("p", p)], want, &[], &["R2", "R8"]);
    }
    for p in 1..=2 {
        let want = Interval { lower: (1 << (p + 1)) - 1, upper: Some((1 << (p + 2)) + 3) };
        check("stiefel_real2.scn", &[("p", p)], want, &[], &["R2", "R8"]);
    }
    verdict("ledger golden scenarios", &problems);
}

#[test]
fn hard_conformance_suite() {
    let start = Instant::now();
    let report = check_propositions(&GenConfig::default(), Suite::Hard, 200);
    let mut problems: Vec<String> = report
        .entries
        .iter()
        .filter_map(|e| e.failures.first().map(|f| format!("{} failed on instance {}: {}", e.id, f.instance, f.detail)))
        .collect();
    if start.elapsed() > Duration::from_secs(600) {
        problems.push(format!("took {:?}", start.elapsed()));
    }
    println!("  {} propositions over 200 instances in {:?}", report.entries.len(), start.elapsed());
    verdict("hard conformance suite", &problems);
}

#[test]
fn contractibility_characterization() {
    let budget = Budget::with_points(36);
    let mut problems = Vec::new();
    let mut spaces: Vec<Arc<FiniteSpace>> = (1..=5)
        .flat_map(|n| {
            unlabelled_posets(n).into_iter().map(move |rel| {
                let names = (0..n).map(|i| format!("p{i}")).collect();
                Arc::new(FiniteSpace::new(format!("P{n}"), names, &rel).unwrap())
            })
        })
        .filter(|x| is_path_connected(x))
        .collect();
    let cfg = GenConfig { max_points: 6, ..GenConfig::default() };
    spaces.extend((0..300).map(|i| Arc::new(random_space(&cfg, i))));
    for x in &spaces {
        let one = tc_n(x, 2, &budget).map(|r| r.value == 1);
        let point = core_reduce(x).core.len() == 1;
        if one != Ok(point) {
            problems.push(format!("{x:?}: TC_2 is one {one:?}, core is a point {point}"));
        }
    }
    println!("  {} path-connected spaces checked", spaces.len());
    verdict("contractibility characterization", &problems);
}

#[test]
fn report_mode_claims() {
    let report = check_propositions(&GenConfig::default(), Suite::Report, 200);
    let mut problems = Vec::new();
    for e in &report.entries {
        if e.tried != 200 || e.tried != e.passed + e.failures.len() + e.skipped {
            problems.push(format!("{}: incomplete tally", e.id));
        }
    }
    let text = report.render();
    if !text.contains("begin results") || !text.contains("end results") {
        problems.push("rendered report lacks its results block".into());
    }
    for e in &report.entries {
        println!("  {} {} passed, {} failed, {} skipped", e.id, e.passed, e.failures.len(), e.skipped);
    }
    verdict("report-mode claims", &problems);
}

#[test]
fn determinism() {
    let mut problems = Vec::new();
    let cfg = GenConfig::default();
    for suite in [Suite::Hard, Suite::Report] {
        if check_propositions(&cfg, suite, 200).render() != check_propositions(&cfg, suite, 200).render() {
            problems.push(format!("{} report differs between runs", suite.name()));
        }
    }
    let params: BTreeMap<String, i64> = [("n".to_string(), 4)].into();
    let once = run(&scenario("hopf.scn"), &params, &Options::default()).unwrap();
    if once != run(&scenario("hopf.scn"), &params, &Options::default()).unwrap() {
        problems.push("ledger output differs between runs".into());
    }
    let s = pseudocircle();
    let budget = Budget::default();
    let a = format!("{:?}", tc_n(&s, 2, &budget).unwrap());
    if a != format!("{:?}", tc_n(&s, 2, &budget).unwrap()) {
        problems.push("distance witness differs between runs".into());
    }
    verdict("determinism", &problems);
}
