//! Exact higher homotopic distance `D(f_1, ..., f_m)` between maps of finite spaces.
//!
//! The search runs in two stages. First every inclusion-maximal open set on
//! which all the maps are pairwise homotopic is collected (goodness is
//! inherited by open subsets, so nothing else is ever needed in a cover).
//! Then an exact set cover over that family gives the minimum number of
//! pieces. Each piece of the returned cover carries fences that witness the
//! homotopies.

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::finspace::{
    core_indices, core_points, subspace, to_u16, CMap, Fence, FiniteSpace, MoveGraph, OpenSet, PointSet, SpaceError,
    MAX_SET_POINTS,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DistanceError {
    #[error("at least one map is required")]
    NoMaps,
    #[error("maps do not share source and target")]
    Mismatch,
    #[error("source has {points} points, above the limit of {limit}")]
    TooLarge { points: usize, limit: usize },
    #[error("no finite distance: no good open set contains {}", uncovered.join(", "))]
    NoFiniteDistance { uncovered: Vec<String> },
    #[error("subspace is empty")]
    EmptySubspace,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A computed distance together with a witness cover.
#[derive(Clone, Debug)]
pub struct DistanceResult {
    pub value: usize,
    /// Domain the cover lives in.
    pub domain: Arc<FiniteSpace>,
    pub cover: Vec<OpenSet>,
    /// `fences[i][j]` joins `f_j` and `f_{j+1}` restricted to `cover[i]`.
    pub fences: Vec<Vec<Fence>>,
}

impl DistanceResult {
    /// Re-checks the witness against `maps` without using the search.
    pub fn verify(&self, maps: &[CMap]) -> Result<(), String> {
        if self.cover.len() != self.value || self.fences.len() != self.value {
            return Err("cover size differs from value".into());
        }
        let mut union = PointSet::empty();
        for (piece, fences) in self.cover.iter().zip(&self.fences) {
            if piece.members.is_empty() {
                return Err("empty cover piece".into());
            }
            if !self.domain.is_open(piece.members) {
                return Err(format!("piece {:?} is not open", piece.members));
            }
            union = union.union(piece.members);
            if fences.len() + 1 != maps.len() {
                return Err("wrong number of fences on a piece".into());
            }
            let members: Vec<usize> = piece.members.iter().collect();
            for (j, fence) in fences.iter().enumerate() {
                let f = maps[j].restrict(&members).map_err(|e| e.to_string())?;
                let g = maps[j + 1].restrict(&members).map_err(|e| e.to_string())?;
                if !fence.is_valid() || fence.start() != &f || fence.end() != &g {
                    return Err(format!("fence {j} on piece {:?} is not a witness", piece.members));
                }
            }
        }
        if union != self.domain.all_points() {
            return Err("cover does not exhaust the domain".into());
        }
        Ok(())
    }
}

fn check_maps(maps: &[CMap]) -> Result<(), DistanceError> {
    let first = maps.first().ok_or(DistanceError::NoMaps)?;
    if maps.iter().any(|f| !f.same_ends(first)) {
        return Err(DistanceError::Mismatch);
    }
    let n = first.source().len();
    if n > MAX_SET_POINTS {
        return Err(DistanceError::TooLarge { points: n, limit: MAX_SET_POINTS });
    }
    if first.target().len() > u16::MAX as usize {
        return Err(DistanceError::TooLarge { points: first.target().len(), limit: u16::MAX as usize });
    }
    Ok(())
}

/// Goodness oracle for one list of maps; memoizes per piece.
struct Engine<'a> {
    source: &'a FiniteSpace,
    maps: Vec<Vec<u16>>,
    strict_down: Vec<PointSet>,
    target_core: Arc<FiniteSpace>,
    /// Retraction of the target onto its core, indexed by target point.
    target_retraction: Vec<u16>,
    good: HashMap<PointSet, bool>,
}

impl<'a> Engine<'a> {
    fn new(maps: &'a [CMap]) -> Self {
        let source = maps[0].source().as_ref();
        let target = maps[0].target().as_ref();
        let strict_down = (0..source.len()).map(|x| source.down_set(x).without(x)).collect();
        let (alive, stages) = core_indices(target);
        let (core, _) = subspace(maps[0].target(), &alive).expect("core is nonempty");
        let pos: HashMap<usize, usize> = alive.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let target_retraction = stages.last().expect("stage").iter().map(|x| pos[x] as u16).collect();
        Engine {
            source,
            maps: maps.iter().map(|f| to_u16(f.assignment())).collect(),
            strict_down,
            target_core: core,
            target_retraction,
            good: HashMap::default(),
        }
    }

    fn all_equal(&self) -> bool {
        self.maps.windows(2).all(|w| w[0] == w[1])
    }

    /// Whether all maps restricted to the open set `u` are pairwise homotopic.
    fn is_good(&mut self, u: PointSet) -> bool {
        if let Some(&g) = self.good.get(&u) {
            return g;
        }
        let parts = self.components(u);
        let g = if parts.len() > 1 {
            // homotopies on the pieces of a disjoint union combine
            parts.into_iter().all(|part| self.is_good(part))
        } else {
            self.decide(u)
        };
        self.good.insert(u, g);
        g
    }

    /// Path components of the subspace `u`.
    fn components(&self, u: PointSet) -> Vec<PointSet> {
        let mut rest = u;
        let mut out = Vec::new();
        while let Some(seed) = rest.iter().next() {
            let mut comp = PointSet::singleton(seed);
            let mut frontier = vec![seed];
            while let Some(x) = frontier.pop() {
                for y in rest.iter() {
                    if !comp.contains(y) && self.source.comparable(x, y) {
                        comp.insert(y);
                        frontier.push(y);
                    }
                }
            }
            rest = rest.difference(comp);
            out.push(comp);
        }
        out
    }

    fn decide(&self, u: PointSet) -> bool {
        let members: Vec<usize> = u.iter().collect();
        if members.is_empty() {
            return true;
        }
        let restricted: Vec<Vec<u16>> =
            self.maps.iter().map(|f| members.iter().map(|&x| f[x]).collect()).collect();
        if restricted.windows(2).all(|w| w[0] == w[1]) {
            return true;
        }
        // f ≃ g on U iff r∘f∘i ≃ r∘g∘i between the cores of U and of the target.
        let piece = induced(self.source, &members);
        let alive = core_points(&piece);
        let core = induced(&piece, &alive);
        let reduced: Vec<Vec<u16>> = restricted
            .iter()
            .map(|f| alive.iter().map(|&i| self.target_retraction[f[i] as usize]).collect())
            .collect();
        let first = &reduced[0];
        let mut pending: HashSet<&Vec<u16>> = reduced[1..].iter().filter(|g| *g != first).collect();
        if pending.is_empty() {
            return true;
        }
        let graph = MoveGraph::new(&core, &self.target_core);
        let mut seen: HashSet<Vec<u16>> = HashSet::from_iter([first.clone()]);
        let mut frontier = vec![first.clone()];
        while let Some(h) = frontier.pop() {
            let done = graph.for_each_neighbor(&h, |next| {
                if seen.contains(&next) {
                    return false;
                }
                pending.remove(&next);
                seen.insert(next.clone());
                frontier.push(next);
                pending.is_empty()
            });
            if done {
                return true;
            }
        }
        false
    }

    /// Inclusion-maximal good open sets, in ascending bitmask order.
    fn maximal_good(&mut self) -> Vec<PointSet> {
        let n = self.source.len();
        let full = PointSet::full(n);
        if self.is_good(full) {
            return vec![full];
        }
        let mut visited: HashSet<PointSet> = HashSet::from_iter([PointSet::empty()]);
        let mut stack = vec![PointSet::empty()];
        let mut maximal = Vec::new();
        while let Some(u) = stack.pop() {
            let mut extended = false;
            for x in 0..n {
                if u.contains(x) || !self.strict_down[x].is_subset(u) {
                    continue;
                }
                let v = u.with(x);
                if self.is_good(v) {
                    extended = true;
                    if visited.insert(v) {
                        stack.push(v);
                    }
                }
            }
            if !extended && !u.is_empty() {
                maximal.push(u);
            }
        }
        maximal.sort();
        maximal
    }

    /// Maximal good sets among the opens `U_M` generated by sets `M` of
    /// maximal points, in ascending bitmask order.
    ///
    /// Any good open cover shrinks to one of this form: each piece contains
    /// the closure of the maximal points it holds, which is good again, and
    /// those closures already cover. So these candidates suffice for `D`.
    fn maximal_good_generated(&mut self) -> Vec<PointSet> {
        let full = PointSet::full(self.source.len());
        if self.is_good(full) {
            return vec![full];
        }
        let tops = self.source.maximal_points();
        let closure = |gens: &[usize]| {
            gens.iter().fold(PointSet::empty(), |acc, &k| acc.union(self.source.down_set(tops[k])))
        };
        let mut maximal = Vec::new();
        // each good generator set is reached once, by adding tops in increasing order
        let mut stack: Vec<Vec<usize>> = (0..tops.len()).map(|k| vec![k]).collect();
        stack.reverse();
        while let Some(gens) = stack.pop() {
            let u = closure(&gens);
            if !self.is_good(u) {
                continue;
            }
            let last = *gens.last().expect("nonempty");
            let later: Vec<usize> = (last + 1..tops.len())
                .filter(|&k| !u.contains(tops[k]) && self.is_good(u.union(self.source.down_set(tops[k]))))
                .collect();
            // when everything still compatible fits in at once, no branching is needed
            let all = later.iter().fold(u, |acc, &k| acc.union(self.source.down_set(tops[k])));
            if later.len() > 1 && self.is_good(all) {
                if self.is_saturated(all, &tops) {
                    maximal.push(all);
                }
                continue;
            }
            for &k in later.iter().rev() {
                let mut next = gens.clone();
                next.push(k);
                stack.push(next);
            }
            if later.is_empty() && self.is_saturated(u, &tops) {
                maximal.push(u);
            }
        }
        maximal.sort();
        maximal.dedup();
        maximal
    }

    /// No further top can be added to `u` keeping it good.
    fn is_saturated(&mut self, u: PointSet, tops: &[usize]) -> bool {
        tops.iter().all(|&t| u.contains(t) || !self.is_good(u.union(self.source.down_set(t))))
    }

    fn point_names(&self, set: PointSet) -> Vec<String> {
        set.iter().map(|x| self.source.point_name(x).to_string()).collect()
    }
}

/// Induced order on `members` (kept in the given order), without point names.
fn induced(space: &FiniteSpace, members: &[usize]) -> FiniteSpace {
    let n = members.len();
    let mut leq = vec![false; n * n];
    for (i, &a) in members.iter().enumerate() {
        for (j, &b) in members.iter().enumerate() {
            leq[i * n + j] = space.leq(a, b);
        }
    }
    FiniteSpace::from_closed_order(String::new(), vec![String::new(); n], leq)
}

/// All inclusion-maximal open sets on which the maps are pairwise homotopic.
pub fn good_open_family(maps: &[CMap]) -> Result<Vec<OpenSet>, DistanceError> {
    check_maps(maps)?;
    let mut engine = Engine::new(maps);
    Ok(engine.maximal_good().into_iter().map(|members| OpenSet { members }).collect())
}

/// Minimum-cardinality subfamily of `candidates` covering `universe`.
///
/// Returns indices into `candidates` in ascending order, or `None` when the
/// candidates do not cover. Exact: iterative deepening from a counting lower
/// bound up to the greedy upper bound, branching on the lowest uncovered
/// point and trying candidates in their given order, so ties resolve the
/// same way on every run.
pub fn min_cover(universe: PointSet, candidates: &[PointSet]) -> Option<Vec<usize>> {
    if universe.is_empty() {
        return Some(Vec::new());
    }
    let reach = candidates.iter().fold(PointSet::empty(), |acc, c| acc.union(c.intersection(universe)));
    if reach != universe {
        return None;
    }
    let greedy = greedy_cover(universe, candidates);
    let largest = candidates.iter().map(|c| c.intersection(universe).len()).max().unwrap_or(0);
    let lower = universe.len().div_ceil(largest);
    // covering[x] = candidates containing x, in canonical order
    let mut covering: Vec<Vec<usize>> = vec![Vec::new(); MAX_SET_POINTS];
    for (i, c) in candidates.iter().enumerate() {
        for x in c.intersection(universe).iter() {
            covering[x].push(i);
        }
    }
    for k in lower..=greedy.len() {
        let mut chosen = Vec::with_capacity(k);
        if search(universe, PointSet::empty(), k, largest, candidates, &covering, &mut chosen) {
            chosen.sort_unstable();
            return Some(chosen);
        }
    }
    unreachable!("the greedy cover has {} sets", greedy.len())
}

fn greedy_cover(universe: PointSet, candidates: &[PointSet]) -> Vec<usize> {
    let mut covered = PointSet::empty();
    let mut picked = Vec::new();
    while covered != universe {
        let (best, _) = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.intersection(universe).difference(covered).len()))
            .fold((usize::MAX, 0), |acc, (i, gain)| if gain > acc.1 { (i, gain) } else { acc });
        picked.push(best);
        covered = covered.union(candidates[best].intersection(universe));
    }
    picked
}

fn search(
    universe: PointSet,
    covered: PointSet,
    budget: usize,
    largest: usize,
    candidates: &[PointSet],
    covering: &[Vec<usize>],
    chosen: &mut Vec<usize>,
) -> bool {
    let uncovered = universe.difference(covered);
    let Some(x) = uncovered.iter().next() else { return true };
    if budget == 0 || budget * largest < uncovered.len() {
        return false;
    }
    for &i in &covering[x] {
        chosen.push(i);
        let next = covered.union(candidates[i].intersection(universe));
        if search(universe, next, budget - 1, largest, candidates, covering, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// `D(f_1, ..., f_m)` with a witness cover.
pub fn higher_distance(maps: &[CMap]) -> Result<DistanceResult, DistanceError> {
    check_maps(maps)?;
    let domain = maps[0].source().clone();
    let full = domain.all_points();
    let mut engine = Engine::new(maps);
    let pieces: Vec<PointSet> = if maps.len() == 1 || engine.all_equal() {
        vec![full]
    } else {
        let family = engine.maximal_good_generated();
        let tops: PointSet = domain.maximal_points().into_iter().collect();
        match min_cover(tops, &family) {
            Some(idx) => idx.into_iter().map(|i| family[i]).collect(),
            None => {
                let reach = family.iter().fold(PointSet::empty(), |a, &c| a.union(c));
                return Err(DistanceError::NoFiniteDistance {
                    uncovered: engine.point_names(full.difference(reach)),
                });
            }
        }
    };
    let mut fences = Vec::with_capacity(pieces.len());
    for &piece in &pieces {
        fences.push(piece_fences(maps, piece)?);
    }
    Ok(DistanceResult {
        value: pieces.len(),
        domain,
        cover: pieces.into_iter().map(|members| OpenSet { members }).collect(),
        fences,
    })
}

/// Fences between consecutive restricted maps on one good piece.
///
/// Built by routing through the cores: `f ≃ j∘r'∘f∘i∘r` along both
/// beat-point retractions, then a move path between the reduced maps on the
/// core `C` of the piece, one path component of `C` at a time, pulled back.
fn piece_fences(maps: &[CMap], piece: PointSet) -> Result<Vec<Fence>, DistanceError> {
    let members: Vec<usize> = piece.iter().collect();
    let restricted: Vec<CMap> = maps.iter().map(|f| f.restrict(&members)).collect::<Result<_, _>>()?;
    let dom = restricted[0].source().clone();
    let target = restricted[0].target().clone();
    let red = crate::finspace::core_reduce(&dom);
    let tred = crate::finspace::core_reduce(&target);
    let parts: Vec<(Vec<usize>, FiniteSpace)> = crate::finspace::path_components(&red.core)
        .into_iter()
        .map(|c| {
            let sub = induced(&red.core, &c);
            (c, sub)
        })
        .collect();
    let lower = |f: &CMap| -> Result<Vec<CMap>, DistanceError> {
        let mut steps: Vec<CMap> = red.fence.steps.iter().map(|h| h.then(f)).collect::<Result<_, _>>()?;
        let bottom = steps.last().expect("identity stage").clone();
        for t in tred.fence.steps.iter().skip(1) {
            steps.push(bottom.then(t)?);
        }
        Ok(steps)
    };
    let lift = |a: &[usize]| -> Result<CMap, DistanceError> {
        let on_core = CMap::new_unchecked(red.core.clone(), tred.core.clone(), a.to_vec());
        Ok(red.retraction.then(&on_core)?.then(&tred.section)?)
    };
    let mut out = Vec::with_capacity(maps.len() - 1);
    for w in restricted.windows(2) {
        let (f, g) = (&w[0], &w[1]);
        if f == g {
            out.push(Fence { steps: vec![f.clone()] });
            continue;
        }
        let reduce = |h: &CMap| -> Result<Vec<usize>, DistanceError> {
            Ok(red.section.then(h)?.then(&tred.retraction)?.assignment().to_vec())
        };
        let (fa, ga) = (reduce(f)?, reduce(g)?);
        let mut steps = lower(f)?;
        let mut cur = fa.clone();
        for (comp, sub) in &parts {
            let from: Vec<usize> = comp.iter().map(|&i| cur[i]).collect();
            let to: Vec<usize> = comp.iter().map(|&i| ga[i]).collect();
            if from == to {
                continue;
            }
            let path = MoveGraph::new(sub, &tred.core)
                .shortest_path(&to_u16(&from), &to_u16(&to))
                .expect("good piece has homotopic restrictions");
            for a in path.into_iter().skip(1) {
                for (&i, v) in comp.iter().zip(a) {
                    cur[i] = usize::from(v);
                }
                steps.push(lift(&cur)?);
            }
        }
        let mut up = lower(g)?;
        up.reverse();
        steps.extend(up.into_iter().skip(1));
        steps.dedup();
        out.push(Fence { steps }.compressed());
    }
    Ok(out)
}

/// Reference value by plain enumeration: every open set of the source is
/// tested with a fence search on the full mapping space, and the cover is
/// chosen among all good ones. Exponential; meant for cross-checks on small
/// inputs.
pub fn naive_distance(maps: &[CMap]) -> Result<usize, DistanceError> {
    check_maps(maps)?;
    let src = maps[0].source();
    let mut good = Vec::new();
    for open in crate::finspace::open_sets(src)? {
        if open.members.is_empty() {
            continue;
        }
        let members: Vec<usize> = open.members.iter().collect();
        let restricted: Vec<CMap> = maps.iter().map(|f| f.restrict(&members)).collect::<Result<_, _>>()?;
        let mut ok = true;
        for w in restricted.windows(2) {
            if crate::finspace::homotopic(&w[0], &w[1])?.is_none() {
                ok = false;
                break;
            }
        }
        if ok {
            good.push(open.members);
        }
    }
    let full = src.all_points();
    match min_cover(full, &good) {
        Some(idx) => Ok(idx.len()),
        None => {
            let reach = good.iter().fold(PointSet::empty(), |a, &c| a.union(c));
            Err(DistanceError::NoFiniteDistance {
                uncovered: full.difference(reach).iter().map(|x| src.point_name(x).to_string()).collect(),
            })
        }
    }
}

/// `D_A(Y; f_1, ..., f_m) = D(f_1|_Y, ..., f_m|_Y)`; the cover lives in `Y`.
pub fn subspace_distance(members: &[usize], maps: &[CMap]) -> Result<DistanceResult, DistanceError> {
    check_maps(maps)?;
    if members.is_empty() {
        return Err(DistanceError::EmptySubspace);
    }
    let restricted: Vec<CMap> = maps.iter().map(|f| f.restrict(members)).collect::<Result<_, _>>()?;
    higher_distance(&restricted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finspace::{parse_space, power, product_index, projection, subspace};

    fn s() -> Arc<FiniteSpace> {
        Arc::new(parse_space("space S\npoints a b c d\nrel a<c a<d b<c b<d\n").unwrap())
    }

    fn projections(x: &Arc<FiniteSpace>, n: usize) -> Vec<CMap> {
        let p = Arc::new(power(x, n).unwrap());
        let factors = vec![x.clone(); n];
        (0..n).map(|i| projection(&p, &factors, i)).collect()
    }

    fn sets(xs: &[&[usize]]) -> Vec<PointSet> {
        xs.iter().map(|v| v.iter().copied().collect()).collect()
    }

    #[test]
    fn cover_examples() {
        let u: PointSet = [1, 2, 3].into_iter().collect();
        assert_eq!(min_cover(u, &sets(&[&[1, 2, 3]])), Some(vec![0]));
        assert_eq!(min_cover(u, &sets(&[&[1, 2], &[2, 3], &[1, 3]])).unwrap().len(), 2);
        assert_eq!(min_cover(u, &sets(&[&[1, 2], &[2]])), None);
    }

    #[test]
    fn cover_beats_greedy() {
        // Greedy takes the middle block first and needs three sets.
        let u: PointSet = (0..6).collect();
        let c = sets(&[&[0, 1, 2], &[3, 4, 5], &[1, 2, 3, 4]]);
        assert_eq!(greedy_cover(u, &c).len(), 3);
        assert_eq!(min_cover(u, &c), Some(vec![0, 1]));
    }

    #[test]
    fn single_map_and_repeats() {
        let s = s();
        let id = CMap::identity(s.clone());
        let r = higher_distance(&[id.clone()]).unwrap();
        assert_eq!(r.value, 1);
        assert_eq!(r.cover[0].members, s.all_points());
        let r = higher_distance(&[id.clone(), id.clone(), id.clone()]).unwrap();
        assert_eq!(r.value, 1);
        r.verify(&[id.clone(), id.clone(), id]).unwrap();
        let fam = good_open_family(&[CMap::identity(s.clone()), CMap::identity(s.clone())]).unwrap();
        assert_eq!(fam, vec![OpenSet { members: s.all_points() }]);
    }

    #[test]
    fn tc_of_pseudocircle() {
        let s = s();
        let ps = projections(&s, 2);
        let r = higher_distance(&ps).unwrap();
        assert_eq!(r.value, 4);
        r.verify(&ps).unwrap();
        let fam = good_open_family(&ps).unwrap();
        assert!(fam.iter().all(|o| o.members != r.domain.all_points()));
    }

    #[test]
    fn disconnected_target() {
        let a = Arc::new(FiniteSpace::from_names("A", &["u", "v"], &[]).unwrap());
        let src = Arc::new(FiniteSpace::point());
        let f = CMap::constant(src.clone(), a.clone(), 0);
        let g = CMap::constant(src, a, 1);
        assert!(good_open_family(&[f.clone(), g.clone()]).unwrap().is_empty());
        assert!(matches!(higher_distance(&[f, g]), Err(DistanceError::NoFiniteDistance { .. })));
    }

    #[test]
    fn subspace_examples() {
        let s = s();
        let ps = projections(&s, 2);
        let all: Vec<usize> = (0..16).collect();
        assert_eq!(subspace_distance(&all, &ps).unwrap().value, 4);
        let diag: Vec<usize> = (0..4).map(|x| product_index(&[4, 4], &[x, x])).collect();
        assert_eq!(subspace_distance(&diag, &ps).unwrap().value, 1);
        assert_eq!(subspace_distance(&[], &ps).unwrap_err(), DistanceError::EmptySubspace);
        // (a,a) and (c,d) are incomparable, so each restriction is a pair of points
        let two = [product_index(&[4, 4], &[0, 0]), product_index(&[4, 4], &[2, 3])];
        let r = subspace_distance(&two, &ps).unwrap();
        assert_eq!(r.value, 1);
        let (sub, _) = subspace(&ps[0].source().clone(), &two).unwrap();
        assert_eq!(sub.len(), 2);
    }

    #[test]
    fn mismatched_maps() {
        let s = s();
        let w = Arc::new(parse_space("space W\npoints m x y\nrel m<x m<y\n").unwrap());
        assert_eq!(
            higher_distance(&[CMap::identity(s), CMap::identity(w)]).unwrap_err(),
            DistanceError::Mismatch
        );
        assert_eq!(higher_distance(&[]).unwrap_err(), DistanceError::NoMaps);
    }
}
