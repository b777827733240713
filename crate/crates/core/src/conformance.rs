//! Seeded random instances and property checks over them.
//!
//! Every instance is a path-connected random space drawn from a
//! deterministic stream; each proposition derives its auxiliary objects
//! (maps, subspaces, arities) from a per-instance seed. The `hard` suite holds
//! statements that must hold on finite models; the `report` suite holds
//! statements whose status is only tallied.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distance::{higher_distance, subspace_distance, DistanceError};
use crate::finspace::{
    core_points, core_reduce, format_space, homotopic, is_path_connected, power, subspace, CMap, FiniteSpace,
    MoveGraph, to_u16,
};
use crate::invariants::{
    cat, cat_via_constant, fibered_power, find_retraction, map_tc, pair_points, pair_tc, param_tc, rel_tc,
    subspace_cat, tc_n, tuple_index, Budget, InvariantError,
};

/// Parameters of the random space generator.
#[derive(Clone, Debug)]
pub struct GenConfig {
    pub seed: u64,
    pub max_points: usize,
    /// Longest map list used by the distance checks (at least 2).
    pub max_maps: usize,
    /// Probability of a relation between two points before closure.
    pub edge_density: f64,
    /// Resample until the space is path-connected.
    pub connected: bool,
    /// Limit on products and fibered powers built by the checks.
    pub budget: Budget,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            max_points: 6,
            max_maps: 3,
            edge_density: 0.4,
            connected: true,
            budget: Budget { max_points: 64, max_arity: 3 },
        }
    }
}

fn instance_rng(config: &GenConfig, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    rng
}

fn sample_space(rng: &mut impl Rng, max_points: usize, density: f64, connected: bool, name: &str) -> FiniteSpace {
    let max_points = max_points.max(1);
    loop {
        let n = rng.gen_range(1..=max_points);
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let mut rel = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(density) {
                    rel.push((i, j));
                }
            }
        }
        // a random relabelling so that index order is not a linear extension
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let rel: Vec<(usize, usize)> = rel.into_iter().map(|(i, j)| (perm[i], perm[j])).collect();
        let space = FiniteSpace::new(name, names, &rel).expect("relations from a DAG");
        if !connected || is_path_connected(&space) {
            return space;
        }
    }
}

/// The `index`-th random space of the stream selected by `config.seed`.
pub fn random_space(config: &GenConfig, index: u64) -> FiniteSpace {
    let mut rng = instance_rng(config, index);
    sample_space(&mut rng, config.max_points, config.edge_density, config.connected, "X")
}

/// A generated instance: the space and the seed for auxiliary choices.
#[derive(Clone, Debug)]
pub struct Case {
    pub space: Arc<FiniteSpace>,
    pub seed: u64,
}

fn case(config: &GenConfig, index: u64) -> Case {
    let mut rng = instance_rng(config, index);
    let space = sample_space(&mut rng, config.max_points, config.edge_density, config.connected, "X");
    Case { space: Arc::new(space), seed: rng.gen() }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail(String),
    Skip(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Hard,
    Report,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Hard => "hard",
            Suite::Report => "report",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hard" => Ok(Suite::Hard),
            "report" => Ok(Suite::Report),
            _ => Err(format!("unknown suite `{s}` (expected hard or report)")),
        }
    }
}

/// Settings visible to every check.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub budget: Budget,
    pub max_points: usize,
    pub max_maps: usize,
    pub density: f64,
}

type Check = fn(&Case, &Ctx) -> Result<Outcome, Outcome>;

pub struct Proposition {
    pub id: &'static str,
    pub statement: &'static str,
    pub suite: Suite,
    check: Check,
}

impl Proposition {
    pub fn run(&self, case: &Case, ctx: &Ctx) -> Outcome {
        (self.check)(case, ctx).unwrap_or_else(|o| o)
    }
}

// ---------------------------------------------------------------------------
// Helpers for checks. Errors travel as `Err(Outcome)`.

fn inv<T>(r: Result<T, InvariantError>) -> Result<T, Outcome> {
    r.map_err(|e| match e {
        InvariantError::Budget { .. } | InvariantError::Arity { .. } => Outcome::Skip("budget".into()),
        InvariantError::NotPathConnected(_) => Outcome::Skip("not path-connected".into()),
        other => Outcome::Fail(format!("error: {other}")),
    })
}

fn dist(maps: &[CMap]) -> Result<usize, Outcome> {
    dist_result(higher_distance(maps))
}

fn dist_result(r: Result<crate::distance::DistanceResult, DistanceError>) -> Result<usize, Outcome> {
    match r {
        Ok(d) => Ok(d.value),
        Err(DistanceError::TooLarge { .. }) => Err(Outcome::Skip("budget".into())),
        Err(e) => Err(Outcome::Fail(format!("error: {e}"))),
    }
}

fn compose(f: &CMap, g: &CMap) -> Result<CMap, Outcome> {
    f.then(g).map_err(|e| Outcome::Fail(format!("error: {e}")))
}

fn le(a: usize, b: usize, what: &str) -> Result<Outcome, Outcome> {
    Ok(if a <= b { Outcome::Pass } else { Outcome::Fail(format!("{what}: {a} > {b}")) })
}

fn eq(a: usize, b: usize, what: &str) -> Result<Outcome, Outcome> {
    Ok(if a == b { Outcome::Pass } else { Outcome::Fail(format!("{what}: {a} != {b}")) })
}

fn fits(ctx: &Ctx, points: usize, n: usize) -> bool {
    points.checked_pow(n as u32).is_some_and(|s| s <= ctx.budget.max_points) && n <= ctx.budget.max_arity
}

/// Arity in `1..=3` (weighted towards 2), lowered until `X^n` fits the budget.
fn pick_arity(rng: &mut impl Rng, ctx: &Ctx, points: usize) -> usize {
    let mut n = [1, 2, 2, 2, 3, 3][rng.gen_range(0..6)];
    while n > 1 && !fits(ctx, points, n) {
        n -= 1;
    }
    n
}

fn aux_space(rng: &mut impl Rng, ctx: &Ctx, name: &str) -> Arc<FiniteSpace> {
    Arc::new(sample_space(rng, ctx.max_points, ctx.density, true, name))
}

/// A uniformly shuffled depth-first choice of a continuous map.
fn random_map(rng: &mut impl Rng, src: &Arc<FiniteSpace>, tgt: &Arc<FiniteSpace>) -> CMap {
    let mut order: Vec<usize> = (0..src.len()).collect();
    order.sort_by_key(|&x| src.down_set(x).len());
    let mut assign = vec![usize::MAX; src.len()];
    fn rec(
        k: usize,
        order: &[usize],
        src: &FiniteSpace,
        tgt: &FiniteSpace,
        assign: &mut [usize],
        rng: &mut dyn rand::RngCore,
    ) -> bool {
        if k == order.len() {
            return true;
        }
        let x = order[k];
        let mut cands: Vec<usize> = (0..tgt.len())
            .filter(|&v| order[..k].iter().all(|&y| !src.lt(y, x) || tgt.leq(assign[y], v)))
            .collect();
        cands.shuffle(rng);
        for v in cands {
            assign[x] = v;
            if rec(k + 1, order, src, tgt, assign, rng) {
                return true;
            }
        }
        false
    }
    let found = rec(0, &order, src, tgt, &mut assign, rng);
    debug_assert!(found, "constant maps always exist");
    CMap::new(src.clone(), tgt.clone(), assign).expect("built in a linear extension")
}

/// A random walk of `steps` single-point moves starting at `f`.
fn random_homotopic(rng: &mut impl Rng, f: &CMap, steps: usize) -> CMap {
    let graph = MoveGraph::new(f.source(), f.target());
    let mut cur = to_u16(f.assignment());
    for _ in 0..steps {
        let mut next = Vec::new();
        graph.for_each_neighbor(&cur, |h| {
            next.push(h);
            false
        });
        if let Some(h) = next.choose(rng) {
            cur = h.clone();
        }
    }
    CMap::new(f.source().clone(), f.target().clone(), cur.into_iter().map(usize::from).collect())
        .expect("moves keep continuity")
}

fn random_subset(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let p = rng.gen_range(0.2..0.9);
    let mut s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(p)).collect();
    if s.is_empty() {
        s.push(rng.gen_range(0..n));
    }
    s
}

/// `f` with its target cut down to its image.
fn onto_image(f: &CMap) -> Result<CMap, Outcome> {
    let mut img: Vec<usize> = f.assignment().to_vec();
    img.sort_unstable();
    img.dedup();
    let (sub, _) = subspace(f.target(), &img).map_err(|e| Outcome::Fail(format!("error: {e}")))?;
    let assign = f.assignment().iter().map(|v| img.binary_search(v).expect("in image")).collect();
    Ok(CMap::new(f.source().clone(), sub.with_name_arc("B"), assign).expect("corestriction"))
}

trait Rename {
    fn with_name_arc(self, name: &str) -> Arc<FiniteSpace>;
}

impl Rename for Arc<FiniteSpace> {
    fn with_name_arc(self, name: &str) -> Arc<FiniteSpace> {
        Arc::new((*self).clone().with_name(name))
    }
}

/// A random surjection out of the instance space onto a path-connected base.
fn random_fibration(rng: &mut impl Rng, case: &Case, ctx: &Ctx) -> Result<CMap, Outcome> {
    let y = aux_space(rng, ctx, "Y");
    onto_image(&random_map(rng, &case.space, &y))
}

fn restrict_to(q: &CMap, total: &[usize], base: &[usize]) -> Result<CMap, Outcome> {
    let err = |e: crate::finspace::SpaceError| Outcome::Fail(format!("error: {e}"));
    let (e2, _) = subspace(q.source(), total).map_err(err)?;
    let (b2, _) = subspace(q.target(), base).map_err(err)?;
    let assign = total
        .iter()
        .map(|&x| base.iter().position(|&b| b == q.apply(x)).expect("total maps into base"))
        .collect();
    CMap::new(e2, b2, assign).map_err(err)
}

/// Fence search after reducing source and target to their cores.
fn homotopic_bool(f: &CMap, g: &CMap) -> Result<bool, Outcome> {
    let cs = core_reduce(f.source());
    if cs.core.len() > 10 {
        return Err(Outcome::Skip("source core too large for fence search".into()));
    }
    let ct = core_reduce(f.target());
    let squeeze = |h: &CMap| compose(&cs.section, h).and_then(|k| compose(&k, &ct.retraction));
    homotopic(&squeeze(f)?, &squeeze(g)?).map(|h| h.is_some()).map_err(|e| Outcome::Fail(format!("error: {e}")))
}

fn is_contractible(x: &Arc<FiniteSpace>) -> bool {
    core_points(x).len() == 1
}

// ---------------------------------------------------------------------------
// Distance checks

fn maps_into(rng: &mut ChaCha8Rng, case: &Case, y: &Arc<FiniteSpace>, m: usize) -> Vec<CMap> {
    (0..m).map(|_| random_map(rng, &case.space, y)).collect()
}

fn arity_maps(rng: &mut ChaCha8Rng, ctx: &Ctx) -> usize {
    rng.gen_range(2..=ctx.max_maps.max(2))
}

fn d_homotopic_lists(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let y = aux_space(&mut rng, ctx, "Y");
    let m = arity_maps(&mut rng, ctx);
    let f = maps_into(&mut rng, case, &y, m);
    let g: Vec<CMap> = f.iter().map(|h| random_homotopic(&mut rng, h, 1 + (m % 4))).collect();
    eq(dist(&f)?, dist(&g)?, "D(f) vs D(g) for homotopic lists")
}

fn d_sublist(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let y = aux_space(&mut rng, ctx, "Y");
    let m = ctx.max_maps.max(2);
    let f = maps_into(&mut rng, case, &y, m);
    if dist(&f[..1])? != 1 {
        return Ok(Outcome::Fail("D of a single map is not 1".into()));
    }
    let k = rng.gen_range(1..m);
    le(dist(&f[..k])?, dist(&f)?, &format!("D of first {k} maps vs all {m}"))
}

fn d_post_compose(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let y = aux_space(&mut rng, ctx, "Y");
    let z = aux_space(&mut rng, ctx, "Z");
    let m = arity_maps(&mut rng, ctx);
    let f = maps_into(&mut rng, case, &y, m);
    let p0 = random_map(&mut rng, &y, &z);
    let mut ps = vec![p0];
    for _ in 1..m {
        let prev = ps.last().expect("nonempty").clone();
        ps.push(random_homotopic(&mut rng, &prev, 2));
    }
    let composed: Vec<CMap> = f.iter().zip(&ps).map(|(fj, pj)| compose(fj, pj)).collect::<Result<_, _>>()?;
    le(dist(&composed)?, dist(&f)?, "D(p_j f_j) vs D(f_j)")
}

fn d_pre_compose(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let y = aux_space(&mut rng, ctx, "Y");
    let c = aux_space(&mut rng, ctx, "C");
    let m = arity_maps(&mut rng, ctx);
    let f = maps_into(&mut rng, case, &y, m);
    let p0 = random_map(&mut rng, &c, &case.space);
    let mut ps = vec![p0];
    for _ in 1..m {
        let prev = ps.last().expect("nonempty").clone();
        ps.push(random_homotopic(&mut rng, &prev, 2));
    }
    let composed: Vec<CMap> = ps.iter().zip(&f).map(|(pj, fj)| compose(pj, fj)).collect::<Result<_, _>>()?;
    le(dist(&composed)?, dist(&f)?, "D(f_j p_j) vs D(f_j)")
}

fn d_core_invariance(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let y = aux_space(&mut rng, ctx, "Y");
    let m = arity_maps(&mut rng, ctx);
    let f = maps_into(&mut rng, case, &y, m);
    let cx = core_reduce(&case.space);
    let cy = core_reduce(&y);
    let on_core: Vec<CMap> = f.iter().map(|fj| compose(&cx.section, fj)).collect::<Result<_, _>>()?;
    let both: Vec<CMap> = on_core.iter().map(|g| compose(g, &cy.retraction)).collect::<Result<_, _>>()?;
    let d = dist(&f)?;
    let d_source = dist(&on_core)?;
    if d != d_source {
        return Ok(Outcome::Fail(format!("restricting to the source core changed D: {d} -> {d_source}")));
    }
    eq(dist(&both)?, d, "D on cores vs D")
}

fn d_factor_through(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let y = aux_space(&mut rng, ctx, "Y");
    let c = aux_space(&mut rng, ctx, "C");
    let f1 = random_map(&mut rng, &case.space, &y);
    let f2 = random_map(&mut rng, &case.space, &y);
    let g = random_map(&mut rng, &c, &case.space);
    let g2 = if rng.gen_bool(0.5) {
        CMap::constant(c.clone(), case.space.clone(), rng.gen_range(0..case.space.len()))
    } else {
        random_map(&mut rng, &c, &case.space)
    };
    if !homotopic_bool(&compose(&g2, &f1)?, &compose(&g2, &f2)?)? {
        return Ok(Outcome::Skip("f1 g' and f2 g' not homotopic".into()));
    }
    let lhs = dist(&[compose(&g, &f1)?, compose(&g, &f2)?])?;
    le(lhs, dist(&[g, g2])?, "D(f1 g, f2 g) vs D(g, g')")
}

// ---------------------------------------------------------------------------
// Category and topological complexity

fn cat_basepoint_free(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let values: Vec<usize> =
        (0..case.space.len()).map(|b| inv(cat(&case.space, b, &ctx.budget)).map(|d| d.value)).collect::<Result<_, _>>()?;
    let first = values[0];
    Ok(match values.iter().position(|&v| v != first) {
        None => Outcome::Pass,
        Some(b) => Outcome::Fail(format!("cat at x0 is {first}, at {} is {}", case.space.point_name(b), values[b])),
    })
}

fn cat_two_forms(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let a = inv(cat(&case.space, 0, &ctx.budget))?.value;
    let b = inv(cat_via_constant(&case.space, 0))?.value;
    eq(a, b, "D(i1, i2) vs D(id, const)")
}

fn tc_contractible_iff_one(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let tc = inv(tc_n(&case.space, 2, &ctx.budget))?.value;
    let contractible = is_contractible(&case.space);
    Ok(if (tc == 1) == contractible {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("TC = {tc} but core has {} points", core_points(&case.space).len()))
    })
}

fn map_tc_homotopic_maps(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let q1 = random_fibration(&mut rng, case, ctx)?;
    let q2 = random_homotopic(&mut rng, &q1, 3);
    if !q2.is_surjective() {
        return Ok(Outcome::Skip("homotopic map not surjective".into()));
    }
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let a = inv(map_tc(&q1, n, &ctx.budget))?.value;
    let b = inv(map_tc(&q2, n, &ctx.budget))?.value;
    eq(a, b, &format!("TC_{n} of homotopic surjections"))
}

// ---------------------------------------------------------------------------
// Relative complexity of subspaces of X^n

fn rel(case: &Case, ctx: &Ctx, n: usize, members: &[usize]) -> Result<usize, Outcome> {
    Ok(inv(rel_tc(&case.space, n, members, &ctx.budget))?.value)
}

fn random_power_subset(rng: &mut impl Rng, case: &Case, n: usize) -> Vec<usize> {
    random_subset(rng, case.space.len().pow(n as u32))
}

fn rel_trivial_iff_homotopic(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let y = random_power_subset(&mut rng, case, n);
    let r = rel(case, ctx, n, &y)?;
    let pw = Arc::new(power(&case.space, n).map_err(|e| Outcome::Fail(e.to_string()))?);
    let projections: Vec<CMap> = (0..n)
        .map(|i| {
            let factors = vec![case.space.clone(); n];
            crate::finspace::projection(&pw, &factors, i).restrict(&y)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| Outcome::Fail(e.to_string()))?;
    let mut all = true;
    for w in projections.windows(2) {
        all &= homotopic_bool(&w[0], &w[1])?;
    }
    Ok(if (r == 1) == all {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("value {r} but projections pairwise homotopic = {all}"))
    })
}

fn rel_below_tc(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let y = random_power_subset(&mut rng, case, n);
    le(rel(case, ctx, n, &y)?, inv(tc_n(&case.space, n, &ctx.budget))?.value, &format!("TC_{n},X(Y) vs TC_{n}(X)"))
}

fn rel_monotone(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let z = random_power_subset(&mut rng, case, n);
    let picks = random_subset(&mut rng, z.len());
    let y: Vec<usize> = picks.iter().map(|&i| z[i]).collect();
    le(rel(case, ctx, n, &y)?, rel(case, ctx, n, &z)?, "subspace Y of Z")
}

/// A random retract of the instance space (falls back to its core).
fn random_retract(rng: &mut impl Rng, x: &Arc<FiniteSpace>) -> Vec<usize> {
    for _ in 0..8 {
        let s = random_subset(rng, x.len());
        if find_retraction(x, &s).is_some() {
            return s;
        }
    }
    core_points(x)
}

fn retract_tuples(x: &FiniteSpace, members: &[usize], n: usize) -> Vec<usize> {
    crate::finspace::product_coords(std::iter::repeat_n(members.len(), n))
        .into_iter()
        .map(|c| tuple_index(x, &c.iter().map(|&i| members[i]).collect::<Vec<_>>()))
        .collect()
}

fn rel_retract(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let r = random_retract(&mut rng, &case.space);
    let (y, _) = subspace(&case.space, &r).map_err(|e| Outcome::Fail(e.to_string()))?;
    let tc_y = inv(tc_n(&y, n, &ctx.budget))?.value;
    le(tc_y, rel(case, ctx, n, &retract_tuples(&case.space, &r, n))?, "TC_n(Y) vs TC_n,X(Y^n)")
}

fn tc_retract(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let r = random_retract(&mut rng, &case.space);
    let (y, _) = subspace(&case.space, &r).map_err(|e| Outcome::Fail(e.to_string()))?;
    le(inv(tc_n(&y, n, &ctx.budget))?.value, inv(tc_n(&case.space, n, &ctx.budget))?.value, "TC_n(retract) vs TC_n(X)")
}

fn rel_open_cover_sum(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let pw = power(&case.space, n).map_err(|e| Outcome::Fail(e.to_string()))?;
    let mut pieces: Vec<crate::finspace::PointSet> = Vec::new();
    let m = rng.gen_range(1..=3);
    for _ in 0..m {
        let tops = random_subset(&mut rng, pw.len());
        pieces.push(tops.iter().fold(crate::finspace::PointSet::empty(), |acc, &t| acc.union(pw.down_set(t))));
    }
    // enlarge the last piece until the family covers
    let covered = pieces.iter().fold(crate::finspace::PointSet::empty(), |a, &p| a.union(p));
    let missing = pw.all_points().difference(covered);
    let last = pieces.len() - 1;
    for x in missing.iter() {
        pieces[last] = pieces[last].union(pw.down_set(x));
    }
    let mut sum = 0;
    for p in &pieces {
        sum += rel(case, ctx, n, &p.iter().collect::<Vec<_>>())?;
    }
    let tc = inv(tc_n(&case.space, n, &ctx.budget))?.value;
    le(sum, pieces.len() * tc, &format!("sum over {} open pieces vs count times TC_{n}", pieces.len()))
}

fn rel_below_subspace_cat(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let y = random_power_subset(&mut rng, case, n);
    let r = rel(case, ctx, n, &y)?;
    let pw = Arc::new(power(&case.space, n).map_err(|e| Outcome::Fail(e.to_string()))?);
    le(r, inv(subspace_cat(&pw, &y))?.value, "TC_n,X(Y) vs cat of Y in X^n")
}

fn rel_core_of_subspace(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let z = random_power_subset(&mut rng, case, n);
    let pw = Arc::new(power(&case.space, n).map_err(|e| Outcome::Fail(e.to_string()))?);
    let (zs, _) = subspace(&pw, &z).map_err(|e| Outcome::Fail(e.to_string()))?;
    let y: Vec<usize> = core_points(&zs).into_iter().map(|i| z[i]).collect();
    eq(rel(case, ctx, n, &y)?, rel(case, ctx, n, &z)?, "core of Z vs Z")
}

fn rel_homotopy_type(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len()).max(2);
    if !fits(ctx, case.space.len(), n) {
        return Ok(Outcome::Skip("budget".into()));
    }
    let x = &case.space;
    let base = rng.gen_range(0..x.len());
    let diagonal: Vec<usize> = (0..x.len()).map(|p| tuple_index(x, &vec![p; n])).collect();
    let slice = pair_points(x, &[base], n);
    eq(rel(case, ctx, n, &diagonal)?, rel(case, ctx, n, &slice)?, "diagonal vs X x {x0} (both copies of X)")
}

// ---------------------------------------------------------------------------
// Pairs

fn pair(case: &Case, ctx: &Ctx, b: &[usize], n: usize) -> Result<usize, Outcome> {
    Ok(inv(pair_tc(&case.space, b, n, &ctx.budget))?.value)
}

fn pair_unit_arity(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let b = random_subset(&mut rng, case.space.len());
    eq(pair(case, ctx, &b, 1)?, 1, "TC_1(A,B)")
}

fn pair_arity_two(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let b = random_subset(&mut rng, case.space.len());
    let direct = rel(case, ctx, 2, &pair_points(&case.space, &b, 2))?;
    eq(pair(case, ctx, &b, 2)?, direct, "TC_2(A,B) vs D over A x B")
}

fn pair_monotone_in_subset(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let b2 = random_subset(&mut rng, case.space.len());
    let b1: Vec<usize> = random_subset(&mut rng, b2.len()).into_iter().map(|i| b2[i]).collect();
    le(pair(case, ctx, &b1, n)?, pair(case, ctx, &b2, n)?, &format!("TC_{n}(A,B1) vs TC_{n}(A,B2)"))
}

fn pair_below_tc(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let b = random_subset(&mut rng, case.space.len());
    le(pair(case, ctx, &b, n)?, inv(tc_n(&case.space, n, &ctx.budget))?.value, &format!("TC_{n}(A,B) vs TC_{n}(A)"))
}

fn pair_monotone_in_arity(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    if !fits(ctx, case.space.len(), n + 1) {
        return Ok(Outcome::Skip("budget".into()));
    }
    let b = random_subset(&mut rng, case.space.len());
    le(pair(case, ctx, &b, n)?, pair(case, ctx, &b, n + 1)?, &format!("TC_{n}(A,B) vs TC_{}(A,B)", n + 1))
}

fn pair_full_subset(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let all: Vec<usize> = (0..case.space.len()).collect();
    eq(pair(case, ctx, &all, n)?, inv(tc_n(&case.space, n, &ctx.budget))?.value, "TC_n(A,A) vs TC_n(A)")
}

fn pair_contractible_subset(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len()).max(2);
    if !fits(ctx, case.space.len(), n) {
        return Ok(Outcome::Skip("budget".into()));
    }
    let b = random_subset(&mut rng, case.space.len());
    let (bs, _) = subspace(&case.space, &b).map_err(|e| Outcome::Fail(e.to_string()))?;
    if !is_contractible(&bs) {
        return Ok(Outcome::Skip("B not contractible".into()));
    }
    eq(pair(case, ctx, &b, n)?, 1, &format!("TC_{n}(A,B) for contractible B"))
}

fn pair_one_implies_contractible(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let b = random_subset(&mut rng, case.space.len());
    if pair(case, ctx, &b, 2)? != 1 {
        return Ok(Outcome::Skip("TC(A,B) > 1".into()));
    }
    Ok(if is_contractible(&case.space) {
        Outcome::Pass
    } else {
        Outcome::Fail("TC(A,B) = 1 but A is not contractible".into())
    })
}

// ---------------------------------------------------------------------------
// Parametrised complexity

fn param(q: &CMap, n: usize, ctx: &Ctx) -> Result<usize, Outcome> {
    Ok(inv(param_tc(q, n, &ctx.budget))?.value())
}

fn param_monotone_in_arity(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let q = random_fibration(&mut rng, case, ctx)?;
    let n = rng.gen_range(1..=2);
    le(param(&q, n, ctx)?, param(&q, n + 1, ctx)?, &format!("TC_{n}[q] vs TC_{}[q]", n + 1))
}

fn param_relative_form(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let q = random_fibration(&mut rng, case, ctx)?;
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let fp = inv(fibered_power(&q, n, &ctx.budget))?;
    eq(param(&q, n, ctx)?, rel(case, ctx, n, &fp.indices_in_power())?, "TC_n[q] vs D over the fibered power in E^n")
}

fn param_below_tc(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let q = random_fibration(&mut rng, case, ctx)?;
    let n = pick_arity(&mut rng, ctx, case.space.len());
    le(param(&q, n, ctx)?, inv(tc_n(&case.space, n, &ctx.budget))?.value, &format!("TC_{n}[q] vs TC_{n}(E)"))
}

/// `x->y` pairs of a map, for failure details.
fn describe(q: &CMap) -> String {
    let parts: Vec<String> = (0..q.source().len())
        .map(|x| format!("{}->{}", q.source().point_name(x), q.target().point_name(q.apply(x))))
        .collect();
    parts.join(" ")
}

fn restricted_fibration(rng: &mut ChaCha8Rng, case: &Case, ctx: &Ctx) -> Result<(CMap, CMap, Vec<usize>), Outcome> {
    let q = random_fibration(rng, case, ctx)?;
    let base = random_subset(rng, q.target().len());
    let total: Vec<usize> = (0..q.source().len()).filter(|&x| base.contains(&q.apply(x))).collect();
    let q2 = restrict_to(&q, &total, &base)?;
    Ok((q, q2, total))
}

fn param_restriction(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let (q, q2, _) = restricted_fibration(&mut rng, case, ctx)?;
    let whole = param(&q, 2, ctx)?;
    let part = match param_tc(&q2, 2, &ctx.budget) {
        Err(InvariantError::Distance(DistanceError::NoFiniteDistance { .. })) => None,
        r => Some(inv(r)?.value()),
    };
    if part.is_some_and(|v| v <= whole) {
        return Ok(Outcome::Pass);
    }
    let shown = part.map_or("no finite value".to_string(), |v| v.to_string());
    Ok(Outcome::Fail(format!(
        "TC[q'] = {shown} but TC[q] = {whole}, for q = {} restricted over {{{}}}",
        describe(&q),
        q2.target().points().join(",")
    )))
}

/// The same comparison with the projections kept as maps into all of `E`.
fn param_restriction_into_total(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let (q, _, total) = restricted_fibration(&mut rng, case, ctx)?;
    let n = rng.gen_range(1..=3);
    let fp = inv(fibered_power(&q, n, &ctx.budget))?;
    let inside: Vec<usize> = (0..fp.space.len()).filter(|&i| total.contains(&fp.tuples[i][0])).collect();
    let restricted = dist_result(subspace_distance(&inside, &fp.projections))?;
    le(restricted, param(&q, n, ctx)?, &format!("D of p_i^B on the restricted fibered power vs TC_{n}[q]"))
}

fn param_fibered_power(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let e = &case.space;
    let id = CMap::identity(e.clone());
    let fp = inv(fibered_power(&id, n, &ctx.budget))?;
    let diag: Vec<Vec<usize>> = (0..e.len()).map(|x| vec![x; n]).collect();
    if fp.tuples != diag {
        return Ok(Outcome::Fail("fibered power of the identity is not the diagonal".into()));
    }
    let point = Arc::new(FiniteSpace::point());
    let collapse = CMap::constant(e.clone(), point, 0);
    let full = inv(fibered_power(&collapse, n, &ctx.budget))?;
    let pw = power(e, n).map_err(|err| Outcome::Fail(err.to_string()))?;
    let expected: Vec<usize> = (0..pw.len()).collect();
    if full.indices_in_power() != expected {
        return Ok(Outcome::Fail("fibered power over a point is not E^n".into()));
    }
    for i in 0..full.space.len() {
        for j in 0..full.space.len() {
            if full.space.leq(i, j) != pw.leq(i, j) {
                return Ok(Outcome::Fail("order on the fibered power over a point differs from E^n".into()));
            }
        }
    }
    if param(&id, n, ctx)? != 1 {
        return Ok(Outcome::Fail(format!("TC_{n}[id] != 1")));
    }
    eq(param(&collapse, n, ctx)?, inv(tc_n(e, n, &ctx.budget))?.value, "TC_n[E -> pt] vs TC_n(E)")
}

fn param_fiber_homotopy(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let q = random_fibration(&mut rng, case, ctx)?;
    let n = rng.gen_range(1..=3);
    let e = q.source();
    let beat = (0..e.len()).find(|&x| e.beat_target(x).is_some_and(|y| q.apply(x) == q.apply(y)));
    let Some(x) = beat else {
        return Ok(Outcome::Skip("no beat point inside a fiber".into()));
    };
    let total: Vec<usize> = (0..e.len()).filter(|&p| p != x).collect();
    let all_base: Vec<usize> = (0..q.target().len()).collect();
    let q2 = restrict_to(&q, &total, &all_base)?;
    eq(param(&q, n, ctx)?, param(&q2, n, ctx)?, &format!("TC_{n}[q] after removing a beat point over its target"))
}

fn map_below_param(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let q = random_fibration(&mut rng, case, ctx)?;
    let n = pick_arity(&mut rng, ctx, case.space.len());
    le(inv(map_tc(&q, n, &ctx.budget))?.value, param(&q, n, ctx)?, &format!("TC_{n}(q) vs TC_{n}[q]"))
}

fn map_below_param_identity(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let id = CMap::identity(case.space.clone());
    le(inv(map_tc(&id, n, &ctx.budget))?.value, param(&id, n, ctx)?, &format!("TC_{n}(id) vs TC_{n}[id]"))
}

fn map_below_param_collapse(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = pick_arity(&mut rng, ctx, case.space.len());
    let q = CMap::constant(case.space.clone(), Arc::new(FiniteSpace::point()), 0);
    le(inv(map_tc(&q, n, &ctx.budget))?.value, param(&q, n, ctx)?, &format!("TC_{n}(E -> pt) vs TC_{n}[E -> pt]"))
}

fn base_cat_below_param(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let q = random_fibration(&mut rng, case, ctx)?;
    le(inv(cat(q.target(), 0, &ctx.budget))?.value, param(&q, 2, ctx)?, "cat(B) vs TC[q]")
}

fn subspace_dist_matches_restriction(case: &Case, ctx: &Ctx) -> Result<Outcome, Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let y = aux_space(&mut rng, ctx, "Y");
    let m = arity_maps(&mut rng, ctx);
    let f = maps_into(&mut rng, case, &y, m);
    let members = random_subset(&mut rng, case.space.len());
    let restricted: Vec<CMap> =
        f.iter().map(|g| g.restrict(&members)).collect::<Result<_, _>>().map_err(|e| Outcome::Fail(e.to_string()))?;
    let a = dist_result(subspace_distance(&members, &f))?;
    eq(a, dist(&restricted)?, "D on a subspace vs D of restrictions")
}

/// Every proposition, in report order.
pub fn propositions() -> Vec<Proposition> {
    use Suite::{Hard, Report};
    let p = |id, statement, suite, check: Check| Proposition { id, statement, suite, check };
    vec![
        p("distance.homotopic-lists", "homotopic map lists have equal distance", Hard, d_homotopic_lists),
        p("distance.sublist", "a shorter prefix of a list has no larger distance", Hard, d_sublist),
        p("distance.post-compose", "post-composing with pairwise homotopic maps does not raise D", Hard, d_post_compose),
        p("distance.pre-compose", "pre-composing with pairwise homotopic maps does not raise D", Hard, d_pre_compose),
        p("distance.core-invariance", "D is unchanged on the cores of source and target", Hard, d_core_invariance),
        p("distance.factor-through", "D(f1 g, f2 g) <= D(g, g') when f1 g' ~ f2 g'", Hard, d_factor_through),
        p("distance.subspace", "D on a subspace equals D of the restricted maps", Hard, subspace_dist_matches_restriction),
        p("cat.basepoint-free", "cat does not depend on the basepoint", Hard, cat_basepoint_free),
        p("tc.contractible-iff-one", "TC(X) = 1 exactly when the core is a point", Hard, tc_contractible_iff_one),
        p("tc.retract", "a retract has no larger TC_n", Hard, tc_retract),
        p("maptc.homotopic-maps", "homotopic surjections have equal TC_n", Hard, map_tc_homotopic_maps),
        p("reltc.trivial-iff-homotopic", "TC_n,X(Y) = 1 iff the projections agree up to homotopy on Y", Hard, rel_trivial_iff_homotopic),
        p("reltc.below-tc", "TC_n,X(Y) <= TC_n(X)", Hard, rel_below_tc),
        p("reltc.monotone", "TC_n,X is monotone under inclusion", Hard, rel_monotone),
        p("reltc.retract", "TC_n(Y) <= TC_n,X(Y^n) for a retract Y", Hard, rel_retract),
        p("reltc.open-cover-sum", "sum over an open cover of X^n is at most its size times TC_n(X)", Hard, rel_open_cover_sum),
        p("reltc.below-subspace-cat", "TC_n,X(Y) <= cat of Y inside X^n", Hard, rel_below_subspace_cat),
        p("reltc.core-of-subspace", "TC_n,X(Y) is unchanged by removing beat points of Y", Hard, rel_core_of_subspace),
        p("pairtc.unit-arity", "TC_1(A,B) = 1", Hard, pair_unit_arity),
        p("pairtc.arity-two", "TC_2(A,B) is D over A x B", Hard, pair_arity_two),
        p("pairtc.monotone-in-subset", "TC_n(A,B) is monotone in B", Hard, pair_monotone_in_subset),
        p("pairtc.below-tc", "TC_n(A,B) <= TC_n(A)", Hard, pair_below_tc),
        p("pairtc.monotone-in-arity", "TC_n(A,B) <= TC_n+1(A,B)", Hard, pair_monotone_in_arity),
        p("pairtc.full-subset", "TC_n(A,A) = TC_n(A)", Hard, pair_full_subset),
        p("paramtc.monotone-in-arity", "TC_n[q] <= TC_n+1[q]", Hard, param_monotone_in_arity),
        p("paramtc.relative-form", "TC_n[q] is D over the fibered power inside E^n", Hard, param_relative_form),
        p("paramtc.below-tc", "TC_n[q] <= TC_n(E)", Hard, param_below_tc),
        p("paramtc.restriction", "TC[q'] <= TC[q] for the restriction over a sub-base", Hard, param_restriction),
        p("paramtc.restriction-into-total", "p_i^B on the part over a sub-base has no larger D than TC_n[q]", Hard, param_restriction_into_total),
        p("paramtc.fibered-power", "fibered powers of id and of E -> pt", Hard, param_fibered_power),
        p("paramtc.fiber-homotopy", "TC_n[q] is invariant under a fiberwise deformation", Hard, param_fiber_homotopy),
        p("cat.two-forms", "D(i1, i2) = D(id, const)", Report, cat_two_forms),
        p("maptc.below-paramtc", "TC_n(q) <= TC_n[q]", Report, map_below_param),
        p("maptc.below-paramtc.identity", "TC_n(id) <= TC_n[id]", Report, map_below_param_identity),
        p("maptc.below-paramtc.collapse", "TC_n(E -> pt) <= TC_n[E -> pt]", Report, map_below_param_collapse),
        p("paramtc.base-cat", "cat(B) <= TC[q]", Report, base_cat_below_param),
        p("pairtc.one-implies-contractible", "TC(A,B) = 1 forces A contractible", Report, pair_one_implies_contractible),
        p("pairtc.contractible-subset", "contractible B gives TC_n(A,B) = 1", Report, pair_contractible_subset),
        p("reltc.homotopy-type", "homotopy equivalent subspaces have equal TC_n,X", Report, rel_homotopy_type),
    ]
}

// ---------------------------------------------------------------------------
// Shrinking and reports

fn space_from_order(x: &FiniteSpace, keep: &[usize], covers: &[(usize, usize)]) -> FiniteSpace {
    let names: Vec<String> = keep.iter().map(|&p| x.point_name(p).to_string()).collect();
    let rel: Vec<(usize, usize)> = covers
        .iter()
        .filter_map(|&(a, b)| Some((keep.iter().position(|&k| k == a)?, keep.iter().position(|&k| k == b)?)))
        .collect();
    FiniteSpace::new(x.name(), names, &rel).expect("sub-relation of a partial order")
}

/// Smaller spaces to try, with the same auxiliary seed: each point removed,
/// then each cover relation removed.
fn shrink_candidates(x: &FiniteSpace) -> Vec<FiniteSpace> {
    let all: Vec<usize> = (0..x.len()).collect();
    let mut out = Vec::new();
    if x.len() > 1 {
        for p in 0..x.len() {
            let keep: Vec<usize> = all.iter().copied().filter(|&q| q != p).collect();
            let rel: Vec<(usize, usize)> = x.strict_pairs().collect();
            out.push(space_from_order(x, &keep, &rel));
        }
    }
    let covers = x.covers();
    for c in 0..covers.len() {
        let rest: Vec<(usize, usize)> = covers.iter().copied().enumerate().filter(|&(i, _)| i != c).map(|(_, r)| r).collect();
        out.push(space_from_order(x, &all, &rest));
    }
    out
}

/// Greedily shrinks a failing case while the proposition still fails.
pub fn shrink(prop: &Proposition, case: &Case, ctx: &Ctx) -> (Case, String) {
    let mut cur = case.clone();
    let mut detail = match prop.run(&cur, ctx) {
        Outcome::Fail(d) => d,
        _ => return (cur, String::new()),
    };
    'outer: loop {
        for cand in shrink_candidates(&cur.space) {
            if !is_path_connected(&cand) {
                continue;
            }
            let next = Case { space: Arc::new(cand), seed: cur.seed };
            if let Outcome::Fail(d) = prop.run(&next, ctx) {
                cur = next;
                detail = d;
                continue 'outer;
            }
        }
        return (cur, detail);
    }
}

#[derive(Clone, Debug)]
pub struct Failure {
    pub instance: u64,
    pub detail: String,
    pub witness: Case,
}

#[derive(Clone, Debug)]
pub struct PropositionReport {
    pub id: &'static str,
    pub statement: &'static str,
    pub tried: usize,
    pub passed: usize,
    pub skipped: usize,
    /// Minimized failures, smallest witness first.
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub suite: Suite,
    pub seed: u64,
    pub count: u64,
    pub max_points: usize,
    pub entries: Vec<PropositionReport>,
}

impl CheckReport {
    pub fn failures(&self) -> usize {
        self.entries.iter().map(|e| e.failures.len()).sum()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "suite {} seed {} instances {} max-points {}",
            self.suite.name(),
            self.seed,
            self.count,
            self.max_points
        );
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{:<36} tried {:>4} passed {:>4} failed {:>4} skipped {:>4}  {}",
                e.id,
                e.tried,
                e.passed,
                e.failures.len(),
                e.skipped,
                e.statement
            );
        }
        for e in &self.entries {
            if let Some(f) = e.failures.first() {
                let _ = writeln!(out, "\n{} failed on instance {}: {}", e.id, f.instance, f.detail);
                let _ = writeln!(out, "smallest witness (aux seed {}):", f.witness.seed);
                for line in format_space(&f.witness.space).lines() {
                    let _ = writeln!(out, "  {line}");
                }
            }
        }
        let _ = writeln!(out, "\nbegin results");
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {} {} {}", e.id, e.tried, e.passed, e.failures.len(), e.skipped);
        }
        let _ = writeln!(out, "end results");
        out
    }
}

pub fn context(config: &GenConfig) -> Ctx {
    Ctx {
        budget: config.budget,
        max_points: config.max_points,
        max_maps: config.max_maps,
        density: config.edge_density,
    }
}

/// Runs every proposition of `suite` on `count` seeded instances.
pub fn check_propositions(config: &GenConfig, suite: Suite, count: u64) -> CheckReport {
    let ctx = context(config);
    let props: Vec<Proposition> = propositions().into_iter().filter(|p| p.suite == suite).collect();
    let mut entries: Vec<PropositionReport> = props
        .iter()
        .map(|p| PropositionReport { id: p.id, statement: p.statement, tried: 0, passed: 0, skipped: 0, failures: Vec::new() })
        .collect();
    for index in 0..count {
        let c = case(config, index);
        for (p, e) in props.iter().zip(entries.iter_mut()) {
            e.tried += 1;
            match p.run(&c, &ctx) {
                Outcome::Pass => e.passed += 1,
                Outcome::Skip(_) => e.skipped += 1,
                Outcome::Fail(_) => {
                    let (witness, detail) = shrink(p, &c, &ctx);
                    e.failures.push(Failure { instance: index, detail, witness });
                }
            }
        }
    }
    for e in &mut entries {
        e.failures.sort_by_key(|f| (f.witness.space.len(), f.witness.space.covers().len(), f.instance));
    }
    CheckReport { suite, seed: config.seed, count, max_points: config.max_points, entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic_and_connected() {
        let cfg = GenConfig::default();
        for i in 0..30 {
            let a = random_space(&cfg, i);
            let b = random_space(&cfg, i);
            assert_eq!(format_space(&a), format_space(&b));
            assert!(is_path_connected(&a));
            assert!(a.len() <= cfg.max_points);
        }
        let one = GenConfig { max_points: 1, ..GenConfig::default() };
        assert_eq!(random_space(&one, 3).len(), 1);
    }

    #[test]
    fn random_maps_are_continuous_and_walks_stay_in_class() {
        let cfg = GenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..20 {
            let x = Arc::new(random_space(&cfg, i));
            let y = Arc::new(random_space(&cfg, i + 100));
            let f = random_map(&mut rng, &x, &y);
            let g = random_homotopic(&mut rng, &f, 4);
            assert!(homotopic(&f, &g).unwrap().is_some());
        }
    }

    #[test]
    fn shrinking_keeps_failure() {
        // a proposition that fails whenever the space has at least 3 points
        fn big(case: &Case, _: &Ctx) -> Result<Outcome, Outcome> {
            Ok(if case.space.len() >= 3 { Outcome::Fail("big".into()) } else { Outcome::Pass })
        }
        let prop = Proposition { id: "t", statement: "t", suite: Suite::Hard, check: big };
        let cfg = GenConfig { max_points: 6, ..GenConfig::default() };
        let ctx = context(&cfg);
        let c = (0..50).map(|i| case(&cfg, i)).find(|c| c.space.len() == 6).expect("some 6-point space");
        let (w, d) = shrink(&prop, &c, &ctx);
        assert_eq!(d, "big");
        assert_eq!(w.space.len(), 3);
    }
}
