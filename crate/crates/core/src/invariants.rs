//! LS-category and the topological complexity family, each as a homotopic
//! distance over a constructed product, subspace or fibered power.

use std::sync::Arc;

use thiserror::Error;

use crate::distance::{higher_distance, subspace_distance, DistanceError, DistanceResult};
use crate::finspace::{
    is_path_connected, path_components, power, product, product_coords, product_index, projection, subspace,
    CMap, FiniteSpace, SpaceError,
};

/// Limits on constructed spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Largest product, subspace or fibered power a computation may build.
    pub max_points: usize,
    pub max_arity: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_points: 25, max_arity: 3 }
    }
}

impl Budget {
    pub fn with_points(max_points: usize) -> Self {
        Budget { max_points, ..Budget::default() }
    }

    fn check_arity(&self, n: usize) -> Result<(), InvariantError> {
        if n == 0 {
            return Err(InvariantError::ZeroArity);
        }
        if n > self.max_arity {
            return Err(InvariantError::Arity { n, cap: self.max_arity });
        }
        Ok(())
    }

    fn check_points(&self, what: &str, points: usize) -> Result<(), InvariantError> {
        if points > self.max_points {
            return Err(InvariantError::Budget { what: what.to_string(), points, limit: self.max_points });
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvariantError {
    #[error("{what} has {points} points, above the budget of {limit}")]
    Budget { what: String, points: usize, limit: usize },
    #[error("arity {n} exceeds the cap of {cap}")]
    Arity { n: usize, cap: usize },
    #[error("arity must be at least 1")]
    ZeroArity,
    #[error("space `{0}` is not path-connected")]
    NotPathConnected(String),
    #[error("subspace is empty")]
    EmptySubspace,
    #[error("map into `{0}` is not surjective")]
    NotSurjective(String),
    #[error("point index {0} is out of range")]
    UnknownPoint(usize),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn require_connected(x: &FiniteSpace) -> Result<(), InvariantError> {
    if is_path_connected(x) {
        Ok(())
    } else {
        Err(InvariantError::NotPathConnected(x.name().to_string()))
    }
}

/// `X^n` with its projections.
#[derive(Clone, Debug)]
pub struct Power {
    pub space: Arc<FiniteSpace>,
    pub projections: Vec<CMap>,
}

pub fn power_with_projections(x: &Arc<FiniteSpace>, n: usize, budget: &Budget) -> Result<Power, InvariantError> {
    budget.check_arity(n)?;
    let size = x.len().checked_pow(n as u32).unwrap_or(usize::MAX);
    budget.check_points(&format!("{}^{}", x.name(), n), size)?;
    let space = Arc::new(power(x, n)?);
    let factors = vec![x.clone(); n];
    let projections = (0..n).map(|i| projection(&space, &factors, i)).collect();
    Ok(Power { space, projections })
}

/// Index in `X^n` of the tuple `coords`.
pub fn tuple_index(x: &FiniteSpace, coords: &[usize]) -> usize {
    product_index(&vec![x.len(); coords.len()], coords)
}

/// `cat(X) = D(i_1, i_2)` with `i_1(x) = (x, x0)` and `i_2(x) = (x0, x)`.
pub fn cat(x: &Arc<FiniteSpace>, basepoint: usize, budget: &Budget) -> Result<DistanceResult, InvariantError> {
    require_connected(x)?;
    if basepoint >= x.len() {
        return Err(InvariantError::UnknownPoint(basepoint));
    }
    budget.check_points(&format!("{}x{}", x.name(), x.name()), x.len() * x.len())?;
    let sq = Arc::new(product(&[x.as_ref(), x.as_ref()])?);
    let i1 = (0..x.len()).map(|p| tuple_index(x, &[p, basepoint])).collect();
    let i2 = (0..x.len()).map(|p| tuple_index(x, &[basepoint, p])).collect();
    let i1 = CMap::new(x.clone(), sq.clone(), i1)?;
    let i2 = CMap::new(x.clone(), sq, i2)?;
    Ok(higher_distance(&[i1, i2])?)
}

/// The more common form `D(id_X, const_{x0})`.
pub fn cat_via_constant(x: &Arc<FiniteSpace>, basepoint: usize) -> Result<DistanceResult, InvariantError> {
    require_connected(x)?;
    if basepoint >= x.len() {
        return Err(InvariantError::UnknownPoint(basepoint));
    }
    let id = CMap::identity(x.clone());
    let c = CMap::constant(x.clone(), x.clone(), basepoint);
    Ok(higher_distance(&[id, c])?)
}

/// Subspace category `cat_X(Y) = D(i_Y, const)`, the inclusion of `Y` against a constant.
pub fn subspace_cat(x: &Arc<FiniteSpace>, members: &[usize]) -> Result<DistanceResult, InvariantError> {
    require_connected(x)?;
    if members.is_empty() {
        return Err(InvariantError::EmptySubspace);
    }
    let (sub, emb) = subspace(x, members)?;
    let c = CMap::constant(sub, x.clone(), 0);
    Ok(higher_distance(&[emb, c])?)
}

/// `TC_n(X) = D(p_1, ..., p_n)` for the projections `X^n -> X`.
pub fn tc_n(x: &Arc<FiniteSpace>, n: usize, budget: &Budget) -> Result<DistanceResult, InvariantError> {
    require_connected(x)?;
    let pw = power_with_projections(x, n, budget)?;
    Ok(higher_distance(&pw.projections)?)
}

/// `TC_{n,X}(Y) = D_{X^n}(Y; p_1, ..., p_n)` for `Y` given as indices into `X^n`.
pub fn rel_tc(
    x: &Arc<FiniteSpace>,
    n: usize,
    members: &[usize],
    budget: &Budget,
) -> Result<DistanceResult, InvariantError> {
    require_connected(x)?;
    if members.is_empty() {
        return Err(InvariantError::EmptySubspace);
    }
    let pw = power_with_projections(x, n, budget)?;
    if let Some(&bad) = members.iter().find(|&&m| m >= pw.space.len()) {
        return Err(InvariantError::UnknownPoint(bad));
    }
    Ok(subspace_distance(members, &pw.projections)?)
}

/// Indices in `A^n` of `A × B × ... × B`.
pub fn pair_points(a: &FiniteSpace, b: &[usize], n: usize) -> Vec<usize> {
    let mut sizes = vec![a.len()];
    sizes.extend(std::iter::repeat_n(b.len(), n - 1));
    product_coords(sizes.into_iter())
        .into_iter()
        .map(|c| {
            let coords: Vec<usize> =
                c.iter().enumerate().map(|(k, &i)| if k == 0 { i } else { b[i] }).collect();
            tuple_index(a, &coords)
        })
        .collect()
}

/// `TC_n(A, B) = D_{A^n}(A × B^{n-1}; p_1, ..., p_n)`; `TC_1(A, B) = 1`.
pub fn pair_tc(
    a: &Arc<FiniteSpace>,
    b: &[usize],
    n: usize,
    budget: &Budget,
) -> Result<DistanceResult, InvariantError> {
    require_connected(a)?;
    if b.is_empty() {
        return Err(InvariantError::EmptySubspace);
    }
    if let Some(&bad) = b.iter().find(|&&p| p >= a.len()) {
        return Err(InvariantError::UnknownPoint(bad));
    }
    let mut b = b.to_vec();
    b.sort_unstable();
    b.dedup();
    if n == 1 {
        return tc_n(a, 1, budget);
    }
    rel_tc(a, n, &pair_points(a, &b, n), budget)
}

fn check_fibration_like(q: &CMap) -> Result<(), InvariantError> {
    if !q.is_surjective() {
        return Err(InvariantError::NotSurjective(q.target().name().to_string()));
    }
    Ok(())
}

/// `TC_n(q) = D(q∘p_1, ..., q∘p_n)` for the projections `E^n -> E`.
pub fn map_tc(q: &CMap, n: usize, budget: &Budget) -> Result<DistanceResult, InvariantError> {
    check_fibration_like(q)?;
    require_connected(q.source())?;
    require_connected(q.target())?;
    let pw = power_with_projections(q.source(), n, budget)?;
    let composites: Vec<CMap> = pw.projections.iter().map(|p| p.then(q)).collect::<Result<_, _>>()?;
    Ok(higher_distance(&composites)?)
}

/// The `n`-fold fibered power `E ×_B ... ×_B E` of `q : E -> B`.
#[derive(Clone, Debug)]
pub struct FiberedPower {
    pub base_map: CMap,
    pub arity: usize,
    pub space: Arc<FiniteSpace>,
    /// Coordinates in `E^n` of each point of `space`.
    pub tuples: Vec<Vec<usize>>,
    /// Restrictions `p_i^B` of the product projections.
    pub projections: Vec<CMap>,
}

impl FiberedPower {
    /// Indices of the points of `space` inside `E^n`.
    pub fn indices_in_power(&self) -> Vec<usize> {
        let e = self.base_map.source();
        self.tuples.iter().map(|t| tuple_index(e, t)).collect()
    }
}

/// Builds the fibered power directly from the fibers, without forming `E^n`.
pub fn fibered_power(q: &CMap, n: usize, budget: &Budget) -> Result<FiberedPower, InvariantError> {
    budget.check_arity(n)?;
    let e = q.source();
    let b = q.target();
    let fibers: Vec<Vec<usize>> =
        (0..b.len()).map(|y| (0..e.len()).filter(|&x| q.apply(x) == y).collect()).collect();
    let size: usize = fibers.iter().map(|f| f.len().checked_pow(n as u32).unwrap_or(usize::MAX)).sum();
    budget.check_points(&format!("{}-fold fibered power over {}", n, b.name()), size)?;
    let mut tuples: Vec<Vec<usize>> = fibers
        .iter()
        .flat_map(|f| {
            product_coords(std::iter::repeat_n(f.len(), n))
                .into_iter()
                .map(move |c| c.into_iter().map(|i| f[i]).collect::<Vec<usize>>())
        })
        .collect();
    tuples.sort_by_key(|t| tuple_index(e, t));
    if tuples.is_empty() {
        return Err(InvariantError::EmptySubspace);
    }
    let m = tuples.len();
    let mut leq = vec![false; m * m];
    for (i, s) in tuples.iter().enumerate() {
        for (j, t) in tuples.iter().enumerate() {
            leq[i * m + j] = s.iter().zip(t).all(|(&x, &y)| e.leq(x, y));
        }
    }
    let points = tuples
        .iter()
        .map(|t| {
            let parts: Vec<&str> = t.iter().map(|&x| e.point_name(x)).collect();
            format!("({})", parts.join(","))
        })
        .collect();
    let name = vec![e.name(); n].join(&format!("x_{}", b.name()));
    let space = Arc::new(FiniteSpace::from_closed_order(name, points, leq));
    let projections = (0..n)
        .map(|i| CMap::new(space.clone(), e.clone(), tuples.iter().map(|t| t[i]).collect()))
        .collect::<Result<_, _>>()?;
    Ok(FiberedPower { base_map: q.clone(), arity: n, space, tuples, projections })
}

/// Outcome of a parametrised computation. Fibration structure is never
/// verified on finite models; the fiber-connectivity check is recorded.
#[derive(Clone, Debug)]
pub struct ParamTc {
    pub result: DistanceResult,
    pub fibers_path_connected: bool,
}

impl ParamTc {
    pub fn value(&self) -> usize {
        self.result.value
    }
}

/// `TC_n[q : E -> B] = D(p_1^B, ..., p_n^B)` over the fibered power.
pub fn param_tc(q: &CMap, n: usize, budget: &Budget) -> Result<ParamTc, InvariantError> {
    check_fibration_like(q)?;
    let fp = fibered_power(q, n, budget)?;
    let result = higher_distance(&fp.projections)?;
    Ok(ParamTc { result, fibers_path_connected: fibers_path_connected(q) })
}

pub fn fibers_path_connected(q: &CMap) -> bool {
    (0..q.target().len()).all(|y| {
        let fiber: Vec<usize> = (0..q.source().len()).filter(|&x| q.apply(x) == y).collect();
        fiber.is_empty() || {
            let (sub, _) = subspace(q.source(), &fiber).expect("nonempty fiber");
            path_components(&sub).len() == 1
        }
    })
}

/// A retraction `X -> Y` onto the subspace `members` (identity on `Y`), if one exists.
pub fn find_retraction(x: &Arc<FiniteSpace>, members: &[usize]) -> Option<CMap> {
    let (sub, _) = subspace(x, members).ok()?;
    let pos = |p: usize| members.iter().position(|&m| m == p);
    let mut assign: Vec<Option<usize>> = (0..x.len()).map(pos).collect();
    let free: Vec<usize> = (0..x.len()).filter(|&p| assign[p].is_none()).collect();
    let mut sorted_members = members.to_vec();
    sorted_members.sort_unstable();
    // `sub` lists members in ascending order
    for a in assign.iter_mut().flatten() {
        *a = sorted_members.iter().position(|&m| m == members[*a]).expect("member");
    }
    fn rec(
        k: usize,
        free: &[usize],
        x: &FiniteSpace,
        sub: &FiniteSpace,
        assign: &mut Vec<Option<usize>>,
    ) -> bool {
        if k == free.len() {
            return true;
        }
        let p = free[k];
        for v in 0..sub.len() {
            let ok = (0..x.len()).all(|o| match assign[o] {
                Some(w) => (!x.leq(o, p) || sub.leq(w, v)) && (!x.leq(p, o) || sub.leq(v, w)),
                None => true,
            });
            if ok {
                assign[p] = Some(v);
                if rec(k + 1, free, x, sub, assign) {
                    return true;
                }
                assign[p] = None;
            }
        }
        false
    }
    if !rec(0, &free, x, &sub, &mut assign) {
        return None;
    }
    CMap::new(x.clone(), sub, assign.into_iter().map(|a| a.expect("assigned")).collect()).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finspace::parse_space;

    fn s() -> Arc<FiniteSpace> {
        Arc::new(parse_space("space S\npoints a b c d\nrel a<c a<d b<c b<d\n").unwrap())
    }

    fn w() -> Arc<FiniteSpace> {
        Arc::new(parse_space("space W\npoints m x y\nrel m<x m<y\n").unwrap())
    }

    fn collapse(e: &Arc<FiniteSpace>) -> CMap {
        CMap::constant(e.clone(), Arc::new(FiniteSpace::point()), 0)
    }

    #[test]
    fn category() {
        let b = Budget::default();
        assert_eq!(cat(&Arc::new(FiniteSpace::point()), 0, &b).unwrap().value, 1);
        assert_eq!(cat(&w(), 0, &b).unwrap().value, 1);
        let s = s();
        for x0 in 0..4 {
            assert_eq!(cat(&s, x0, &b).unwrap().value, 2);
            assert_eq!(cat_via_constant(&s, x0).unwrap().value, 2);
        }
        let anti = Arc::new(FiniteSpace::from_names("A", &["u", "v"], &[]).unwrap());
        assert_eq!(cat(&anti, 0, &b).unwrap_err(), InvariantError::NotPathConnected("A".into()));
    }

    #[test]
    fn higher_tc() {
        let b = Budget::default();
        assert_eq!(tc_n(&s(), 1, &b).unwrap().value, 1);
        assert_eq!(tc_n(&w(), 2, &b).unwrap().value, 1);
        assert_eq!(tc_n(&s(), 2, &b).unwrap().value, 4);
        assert!(matches!(tc_n(&s(), 3, &b), Err(InvariantError::Budget { points: 64, .. })));
        assert_eq!(tc_n(&s(), 4, &Budget::with_points(1000)).unwrap_err(), InvariantError::Arity { n: 4, cap: 3 });
    }

    #[test]
    fn relative() {
        let b = Budget::default();
        let s = s();
        let diag: Vec<usize> = (0..4).map(|x| tuple_index(&s, &[x, x])).collect();
        assert_eq!(rel_tc(&s, 2, &diag, &b).unwrap().value, 1);
        let all: Vec<usize> = (0..16).collect();
        assert_eq!(rel_tc(&s, 2, &all, &b).unwrap().value, 4);
        assert_eq!(rel_tc(&s, 2, &[0], &b).unwrap().value, 1);
        assert_eq!(rel_tc(&s, 2, &[], &b).unwrap_err(), InvariantError::EmptySubspace);
    }

    #[test]
    fn pairs() {
        let b = Budget::default();
        let s = s();
        assert_eq!(pair_tc(&s, &[0], 1, &b).unwrap().value, 1);
        assert_eq!(pair_tc(&s, &[0, 1, 2, 3], 2, &b).unwrap().value, 4);
        // A × {a} is a copy of S on which p_1 is the identity and p_2 is constant
        assert_eq!(pair_tc(&s, &[0], 2, &b).unwrap().value, 2);
        assert_eq!(pair_tc(&w(), &[1], 2, &b).unwrap().value, 1);
        assert_eq!(pair_tc(&s, &[], 2, &b).unwrap_err(), InvariantError::EmptySubspace);
        assert_eq!(pair_points(&s, &[0], 2).len(), 4);
    }

    #[test]
    fn map_complexity() {
        let b = Budget::default();
        let s = s();
        assert_eq!(map_tc(&CMap::identity(s.clone()), 2, &b).unwrap().value, 4);
        assert_eq!(map_tc(&collapse(&s), 2, &b).unwrap().value, 1);
        assert_eq!(map_tc(&collapse(&w()), 3, &Budget::with_points(27)).unwrap().value, 1);
        let not_onto = CMap::constant(s.clone(), s.clone(), 0);
        assert!(matches!(map_tc(&not_onto, 2, &b), Err(InvariantError::NotSurjective(_))));
    }

    #[test]
    fn fibered_powers() {
        let b = Budget::with_points(64);
        let s = s();
        let fp = fibered_power(&CMap::identity(s.clone()), 2, &b).unwrap();
        assert_eq!(fp.space.len(), 4);
        assert_eq!(fp.space.strict_pairs().count(), 4);
        let fp = fibered_power(&collapse(&s), 2, &b).unwrap();
        assert_eq!(fp.space.len(), 16);
        assert_eq!(*fp.space.as_ref(), power(&s, 2).unwrap().with_name(fp.space.name()));
        let ws = Arc::new(product(&[&*w(), &*s]).unwrap());
        let first = projection(&ws, &[w(), s.clone()], 0);
        let fp = fibered_power(&first, 2, &b).unwrap();
        assert_eq!(fp.space.len(), 48);
    }

    #[test]
    fn parametrised() {
        let b = Budget::default();
        let s = s();
        for n in 1..=3 {
            assert_eq!(param_tc(&CMap::identity(s.clone()), n, &b).unwrap().value(), 1);
        }
        let p = param_tc(&collapse(&s), 2, &b).unwrap();
        assert_eq!(p.value(), 4);
        assert!(p.fibers_path_connected);
        let ws = Arc::new(product(&[&*w(), &*s]).unwrap());
        let first = projection(&ws, &[w(), s], 0);
        assert!(matches!(param_tc(&first, 2, &b), Err(InvariantError::Budget { points: 48, .. })));
        assert_eq!(param_tc(&first, 2, &Budget::with_points(48)).unwrap().value(), 4);
    }

    #[test]
    fn retractions() {
        let s = s();
        assert!(find_retraction(&s, &[0, 2]).is_some());
        assert!(find_retraction(&s, &[0, 1]).is_none());
        let r = find_retraction(&w(), &[0]).unwrap();
        assert_eq!(r.assignment(), &[0, 0, 0]);
    }
}
