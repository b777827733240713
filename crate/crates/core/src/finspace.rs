//! Finite T0 spaces stored as partial orders.
//!
//! A finite T0 space is the same thing as a finite poset: the open sets are
//! exactly the down-sets of the stored order, so the minimal open
//! neighbourhood of `x` is `{y : y <= x}`. Continuous maps are the
//! order-preserving ones, and two maps are homotopic iff they are joined by a
//! fence of pointwise comparable maps.

use std::collections::VecDeque;

use rustc_hash::FxHashMap as HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Largest space a [`PointSet`] can describe.
pub const MAX_SET_POINTS: usize = 128;

/// Default cap on `|X|` for exhaustive open-set enumeration.
pub const DEFAULT_OPEN_SET_THRESHOLD: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate point `{0}`")]
    DuplicatePoint(String),
    #[error("unknown point `{0}`")]
    UnknownPoint(String),
    #[error("relation forms a cycle through `{0}` and `{1}`")]
    Cycle(String, String),
    #[error("space has no points")]
    Empty,
    #[error("empty list of factors")]
    EmptyProduct,
    #[error("{points} points exceed the enumeration threshold {threshold}")]
    ThresholdExceeded { points: usize, threshold: usize },
    #[error("map is not order-preserving: {0} <= {1} but images are not related")]
    NotContinuous(String, String),
    #[error("map does not assign point `{0}`")]
    Unassigned(String),
    #[error("maps have different source or target")]
    Mismatch,
    #[error("unknown space `{0}`")]
    UnknownSpace(String),
}

/// A set of points of a space with at most [`MAX_SET_POINTS`] points.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointSet(u128);

impl PointSet {
    pub const fn empty() -> Self {
        PointSet(0)
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_SET_POINTS);
        if n == MAX_SET_POINTS {
            PointSet(u128::MAX)
        } else {
            PointSet((1u128 << n) - 1)
        }
    }

    pub fn singleton(x: usize) -> Self {
        PointSet(1u128 << x)
    }

    pub fn from_bits(bits: u128) -> Self {
        PointSet(bits)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn contains(self, x: usize) -> bool {
        x < MAX_SET_POINTS && self.0 >> x & 1 == 1
    }

    pub fn insert(&mut self, x: usize) {
        self.0 |= 1u128 << x;
    }

    pub fn with(self, x: usize) -> Self {
        PointSet(self.0 | 1u128 << x)
    }

    pub fn without(self, x: usize) -> Self {
        PointSet(self.0 & !(1u128 << x))
    }

    pub fn union(self, other: Self) -> Self {
        PointSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        PointSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        PointSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let x = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(x)
            }
        })
    }
}

impl FromIterator<usize> for PointSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = PointSet::empty();
        for x in iter {
            s.insert(x);
        }
        s
    }
}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A finite T0 space, i.e. a finite poset under the specialization order.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteSpace {
    name: String,
    points: Vec<String>,
    /// Row-major `n * n` matrix; `leq[x * n + y]` iff `x <= y`.
    leq: Vec<bool>,
}

impl fmt::Debug for FiniteSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rels: Vec<String> = self
            .strict_pairs()
            .map(|(x, y)| format!("{}<{}", self.points[x], self.points[y]))
            .collect();
        write!(f, "{}{{{}; {}}}", self.name, self.points.join(" "), rels.join(" "))
    }
}

impl FiniteSpace {
    /// Builds a space from its points and generating relations `x < y`,
    /// taking the reflexive-transitive closure.
    pub fn new(
        name: impl Into<String>,
        points: Vec<String>,
        generators: &[(usize, usize)],
    ) -> Result<Self, SpaceError> {
        if points.is_empty() {
            return Err(SpaceError::Empty);
        }
        let n = points.len();
        let mut seen = rustc_hash::FxHashSet::default();
        for p in &points {
            if !seen.insert(p.as_str()) {
                return Err(SpaceError::DuplicatePoint(p.clone()));
            }
        }
        let mut leq = vec![false; n * n];
        for x in 0..n {
            leq[x * n + x] = true;
        }
        for &(x, y) in generators {
            if x >= n {
                return Err(SpaceError::UnknownPoint(format!("#{x}")));
            }
            if y >= n {
                return Err(SpaceError::UnknownPoint(format!("#{y}")));
            }
            leq[x * n + y] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if leq[i * n + k] {
                    for j in 0..n {
                        if leq[k * n + j] {
                            leq[i * n + j] = true;
                        }
                    }
                }
            }
        }
        for x in 0..n {
            for y in x + 1..n {
                if leq[x * n + y] && leq[y * n + x] {
                    return Err(SpaceError::Cycle(points[x].clone(), points[y].clone()));
                }
            }
        }
        Ok(FiniteSpace { name: name.into(), points, leq })
    }

    /// Convenience constructor from point names and named relations.
    pub fn from_names(
        name: &str,
        points: &[&str],
        rels: &[(&str, &str)],
    ) -> Result<Self, SpaceError> {
        let pts: Vec<String> = points.iter().map(|s| s.to_string()).collect();
        let lookup = |s: &str| {
            points
                .iter()
                .position(|p| *p == s)
                .ok_or_else(|| SpaceError::UnknownPoint(s.to_string()))
        };
        let mut gens = Vec::with_capacity(rels.len());
        for (a, b) in rels {
            gens.push((lookup(a)?, lookup(b)?));
        }
        FiniteSpace::new(name, pts, &gens)
    }

    /// Builds a space from an already closed order matrix.
    pub(crate) fn from_closed_order(name: String, points: Vec<String>, leq: Vec<bool>) -> Self {
        FiniteSpace { name, points, leq }
    }

    /// The one-point space.
    pub fn point() -> Self {
        FiniteSpace::from_names("pt", &["*"], &[]).expect("valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn point_name(&self, x: usize) -> &str {
        &self.points[x]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.points.iter().position(|p| p == name)
    }

    pub fn leq(&self, x: usize, y: usize) -> bool {
        self.leq[x * self.len() + y]
    }

    pub fn lt(&self, x: usize, y: usize) -> bool {
        x != y && self.leq(x, y)
    }

    pub fn comparable(&self, x: usize, y: usize) -> bool {
        self.leq(x, y) || self.leq(y, x)
    }

    /// All strict pairs `x < y` in canonical order.
    pub fn strict_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |x| (0..n).filter(move |&y| self.lt(x, y)).map(move |y| (x, y)))
    }

    /// Covering pairs `x < y` with nothing strictly between.
    pub fn covers(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        self.strict_pairs()
            .filter(|&(x, y)| !(0..n).any(|z| self.lt(x, z) && self.lt(z, y)))
            .collect()
    }

    /// Reflexivity, transitivity and antisymmetry of the stored relation.
    pub fn is_partial_order(&self) -> bool {
        let n = self.len();
        (0..n).all(|x| self.leq(x, x))
            && (0..n).all(|x| {
                (0..n).all(|y| {
                    (x == y || !(self.leq(x, y) && self.leq(y, x)))
                        && (0..n).all(|z| !(self.leq(x, y) && self.leq(y, z)) || self.leq(x, z))
                })
            })
    }

    /// The minimal open set `{y : y <= x}`.
    pub fn down_set(&self, x: usize) -> PointSet {
        (0..self.len()).filter(|&y| self.leq(y, x)).collect()
    }

    pub fn up_set(&self, x: usize) -> PointSet {
        (0..self.len()).filter(|&y| self.leq(x, y)).collect()
    }

    pub fn is_open(&self, members: PointSet) -> bool {
        members.iter().all(|x| self.down_set(x).is_subset(members))
    }

    /// Points as a [`PointSet`]; panics beyond [`MAX_SET_POINTS`].
    pub fn all_points(&self) -> PointSet {
        PointSet::full(self.len())
    }

    /// Maximal points (those with nothing strictly above them).
    pub fn maximal_points(&self) -> Vec<usize> {
        let n = self.len();
        (0..n).filter(|&x| !(0..n).any(|y| self.lt(x, y))).collect()
    }

    /// Whether `x` is a beat point and, if so, the point it retracts onto.
    ///
    /// A down beat point has a maximum in its strict down-set, an up beat
    /// point has a minimum in its strict up-set.
    pub fn beat_target(&self, x: usize) -> Option<usize> {
        let n = self.len();
        let below: Vec<usize> = (0..n).filter(|&y| self.lt(y, x)).collect();
        if let Some(&m) = below.iter().find(|&&m| below.iter().all(|&y| self.leq(y, m))) {
            return Some(m);
        }
        let above: Vec<usize> = (0..n).filter(|&y| self.lt(x, y)).collect();
        above.iter().copied().find(|&m| above.iter().all(|&y| self.leq(m, y)))
    }
}

/// An open set of a space (a down-set of its order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpenSet {
    pub members: PointSet,
}

impl OpenSet {
    pub fn names(&self, space: &FiniteSpace) -> Vec<String> {
        self.members.iter().map(|x| space.point_name(x).to_string()).collect()
    }
}

/// A continuous (order-preserving) map between finite spaces.
#[derive(Clone, PartialEq, Eq)]
pub struct CMap {
    source: Arc<FiniteSpace>,
    target: Arc<FiniteSpace>,
    assign: Vec<usize>,
}

impl fmt::Debug for CMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .assign
            .iter()
            .enumerate()
            .map(|(x, &y)| format!("{}->{}", self.source.point_name(x), self.target.point_name(y)))
            .collect();
        write!(f, "{}->{}[{}]", self.source.name(), self.target.name(), parts.join(" "))
    }
}

impl CMap {
    /// Checks totality and order preservation.
    pub fn new(
        source: Arc<FiniteSpace>,
        target: Arc<FiniteSpace>,
        assign: Vec<usize>,
    ) -> Result<Self, SpaceError> {
        if assign.len() != source.len() {
            let missing = source.points().get(assign.len()).cloned().unwrap_or_default();
            return Err(SpaceError::Unassigned(missing));
        }
        if let Some(&bad) = assign.iter().find(|&&y| y >= target.len()) {
            return Err(SpaceError::UnknownPoint(format!("#{bad}")));
        }
        if let Some((x, y)) = first_violation(&source, &target, &assign) {
            return Err(SpaceError::NotContinuous(
                source.point_name(x).to_string(),
                source.point_name(y).to_string(),
            ));
        }
        Ok(CMap { source, target, assign })
    }

    pub(crate) fn new_unchecked(
        source: Arc<FiniteSpace>,
        target: Arc<FiniteSpace>,
        assign: Vec<usize>,
    ) -> Self {
        debug_assert!(is_continuous(&source, &target, &assign));
        CMap { source, target, assign }
    }

    pub fn identity(space: Arc<FiniteSpace>) -> Self {
        let assign = (0..space.len()).collect();
        CMap { source: space.clone(), target: space, assign }
    }

    pub fn constant(source: Arc<FiniteSpace>, target: Arc<FiniteSpace>, value: usize) -> Self {
        assert!(value < target.len());
        let assign = vec![value; source.len()];
        CMap { source, target, assign }
    }

    pub fn source(&self) -> &Arc<FiniteSpace> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteSpace> {
        &self.target
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assign
    }

    pub fn apply(&self, x: usize) -> usize {
        self.assign[x]
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &CMap) -> Result<CMap, SpaceError> {
        if *self.target != *other.source {
            return Err(SpaceError::Mismatch);
        }
        Ok(CMap {
            source: self.source.clone(),
            target: other.target.clone(),
            assign: self.assign.iter().map(|&y| other.assign[y]).collect(),
        })
    }

    pub fn same_ends(&self, other: &CMap) -> bool {
        *self.source == *other.source && *self.target == *other.target
    }

    /// Pointwise `self <= other`.
    pub fn pointwise_leq(&self, other: &CMap) -> bool {
        self.assign.iter().zip(&other.assign).all(|(&a, &b)| self.target.leq(a, b))
    }

    pub fn pointwise_comparable(&self, other: &CMap) -> bool {
        self.pointwise_leq(other) || other.pointwise_leq(self)
    }

    pub fn is_surjective(&self) -> bool {
        let mut hit = vec![false; self.target.len()];
        for &y in &self.assign {
            hit[y] = true;
        }
        hit.into_iter().all(|h| h)
    }

    /// Restriction to the subspace on `members`, as a map out of that subspace.
    pub fn restrict(&self, members: &[usize]) -> Result<CMap, SpaceError> {
        let (_, emb) = subspace(&self.source, members)?;
        emb.then(self)
    }
}

fn first_violation(source: &FiniteSpace, target: &FiniteSpace, assign: &[usize]) -> Option<(usize, usize)> {
    source.strict_pairs().find(|&(x, y)| !target.leq(assign[x], assign[y]))
}

/// True iff `assign` is order-preserving from `source` to `target`.
pub fn is_continuous(source: &FiniteSpace, target: &FiniteSpace, assign: &[usize]) -> bool {
    assign.len() == source.len()
        && assign.iter().all(|&y| y < target.len())
        && first_violation(source, target, assign).is_none()
}

/// A sequence of maps with consecutive steps pointwise comparable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fence {
    pub steps: Vec<CMap>,
}

impl Fence {
    /// Number of comparisons, i.e. `steps.len() - 1`.
    pub fn len(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> &CMap {
        &self.steps[0]
    }

    pub fn end(&self) -> &CMap {
        self.steps.last().expect("fence has at least one step")
    }

    pub fn reversed(&self) -> Fence {
        Fence { steps: self.steps.iter().rev().cloned().collect() }
    }

    /// Concatenates `self` (ending at `g`) with `other` (starting at `g`).
    pub fn concat(&self, other: &Fence) -> Option<Fence> {
        if self.end() != other.start() {
            return None;
        }
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().skip(1).cloned());
        Some(Fence { steps })
    }

    /// Checks the fence invariants: shared ends, continuity, comparability.
    pub fn is_valid(&self) -> bool {
        let Some(first) = self.steps.first() else { return false };
        self.steps.iter().all(|h| {
            h.same_ends(first) && is_continuous(&h.source, &h.target, &h.assign)
        }) && self.steps.windows(2).all(|w| w[0].pointwise_comparable(&w[1]))
    }

    /// Shortens the fence by skipping ahead to the farthest step still
    /// comparable with the current one.
    pub fn compressed(&self) -> Fence {
        let mut steps = vec![self.steps[0].clone()];
        let mut i = 0;
        while i + 1 < self.steps.len() {
            let j = (i + 1..self.steps.len())
                .rev()
                .find(|&j| self.steps[i].pointwise_comparable(&self.steps[j]))
                .expect("consecutive steps are comparable");
            steps.push(self.steps[j].clone());
            i = j;
        }
        steps.dedup();
        Fence { steps }
    }
}

// ---------------------------------------------------------------------------
// Parsing

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses a space file. The name defaults to `X` when no `space` line is given.
pub fn parse_space(text: &str) -> Result<FiniteSpace, SpaceError> {
    parse_space_named(text, "X")
}

/// Parses a space file, naming it `default_name` unless a `space` line says otherwise.
pub fn parse_space_named(text: &str, default_name: &str) -> Result<FiniteSpace, SpaceError> {
    let mut name = default_name.to_string();
    let mut points: Vec<String> = Vec::new();
    let mut rels: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match head {
            "space" => {
                let mut toks = rest.split_whitespace();
                match (toks.next(), toks.next()) {
                    (Some(id), None) if valid_ident(id) => name = id.to_string(),
                    _ => return Err(malformed(line_no, "expected `space <ident>`")),
                }
            }
            "points" => {
                if rest.is_empty() {
                    return Err(malformed(line_no, "`points` needs at least one point"));
                }
                for p in rest.split_whitespace() {
                    if !valid_ident(p) {
                        return Err(malformed(line_no, &format!("invalid point name `{p}`")));
                    }
                    points.push(p.to_string());
                }
            }
            "rel" => {
                let mut joined = rest.to_string();
                loop {
                    let next = joined.replace(" <", "<").replace("< ", "<");
                    if next == joined {
                        break;
                    }
                    joined = next;
                }
                if joined.is_empty() {
                    return Err(malformed(line_no, "`rel` needs at least one relation"));
                }
                for chain in joined.split_whitespace() {
                    let parts: Vec<&str> = chain.split('<').collect();
                    if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
                        return Err(malformed(line_no, &format!("bad relation `{chain}`")));
                    }
                    for w in parts.windows(2) {
                        rels.push((line_no, w[0].to_string(), w[1].to_string()));
                    }
                }
            }
            other => return Err(malformed(line_no, &format!("unknown directive `{other}`"))),
        }
    }
    if points.is_empty() {
        return Err(SpaceError::Empty);
    }
    let mut index: HashMap<&str, usize> = HashMap::default();
    for (i, p) in points.iter().enumerate() {
        if index.insert(p.as_str(), i).is_some() {
            return Err(SpaceError::DuplicatePoint(p.clone()));
        }
    }
    let mut gens = Vec::with_capacity(rels.len());
    for (_, a, b) in &rels {
        let x = *index.get(a.as_str()).ok_or_else(|| SpaceError::UnknownPoint(a.clone()))?;
        let y = *index.get(b.as_str()).ok_or_else(|| SpaceError::UnknownPoint(b.clone()))?;
        if x == y {
            return Err(SpaceError::Cycle(a.clone(), b.clone()));
        }
        gens.push((x, y));
    }
    FiniteSpace::new(name, points, &gens)
}

/// Parses a map file against the given spaces (looked up by name).
pub fn parse_map(text: &str, spaces: &[Arc<FiniteSpace>]) -> Result<(String, CMap), SpaceError> {
    let mut header: Option<(String, Arc<FiniteSpace>, Arc<FiniteSpace>)> = None;
    let mut assign: Vec<Option<usize>> = Vec::new();
    let find = |id: &str| {
        spaces
            .iter()
            .find(|s| s.name() == id)
            .cloned()
            .ok_or_else(|| SpaceError::UnknownSpace(id.to_string()))
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] == "map" {
            if header.is_some() {
                return Err(malformed(line_no, "second `map` header"));
            }
            match toks.as_slice() {
                ["map", id, "from", s, "to", t] if valid_ident(id) => {
                    let (s, t) = (find(s)?, find(t)?);
                    assign = vec![None; s.len()];
                    header = Some((id.to_string(), s, t));
                }
                _ => return Err(malformed(line_no, "expected `map <ident> from <space> to <space>`")),
            }
            continue;
        }
        let Some((_, s, t)) = header.as_ref() else {
            return Err(malformed(line_no, "assignment before `map` header"));
        };
        let (lhs, rhs) = line
            .split_once("->")
            .ok_or_else(|| malformed(line_no, "expected `<p> -> <q>`"))?;
        let (lhs, rhs) = (lhs.trim(), rhs.trim());
        let x = s.index_of(lhs).ok_or_else(|| SpaceError::UnknownPoint(lhs.to_string()))?;
        let y = t.index_of(rhs).ok_or_else(|| SpaceError::UnknownPoint(rhs.to_string()))?;
        if assign[x].replace(y).is_some() {
            return Err(malformed(line_no, &format!("point `{lhs}` assigned twice")));
        }
    }
    let (id, s, t) = header.ok_or_else(|| malformed(1, "missing `map` header"))?;
    let mut full = Vec::with_capacity(assign.len());
    for (x, y) in assign.into_iter().enumerate() {
        full.push(y.ok_or_else(|| SpaceError::Unassigned(s.point_name(x).to_string()))?);
    }
    Ok((id, CMap::new(s, t, full)?))
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty() && !s.contains(['<', '#']) && !s.contains(char::is_whitespace)
}

fn malformed(line: usize, reason: &str) -> SpaceError {
    SpaceError::Malformed { line, reason: reason.to_string() }
}

/// Renders a space in the space-file format.
pub fn format_space(space: &FiniteSpace) -> String {
    let mut out = format!("space {}\npoints {}\n", space.name(), space.points().join(" "));
    for (x, y) in space.covers() {
        out.push_str(&format!("rel {} < {}\n", space.point_name(x), space.point_name(y)));
    }
    out
}

// ---------------------------------------------------------------------------
// Constructions

/// Product with the componentwise order. Points are named `(x1,...,xk)`.
pub fn product(spaces: &[&FiniteSpace]) -> Result<FiniteSpace, SpaceError> {
    if spaces.is_empty() {
        return Err(SpaceError::EmptyProduct);
    }
    let coords = product_coords(spaces.iter().map(|s| s.len()));
    let n = coords.len();
    let mut leq = vec![false; n * n];
    for (i, a) in coords.iter().enumerate() {
        for (j, b) in coords.iter().enumerate() {
            leq[i * n + j] = spaces.iter().enumerate().all(|(k, s)| s.leq(a[k], b[k]));
        }
    }
    let points = coords
        .iter()
        .map(|c| {
            let parts: Vec<&str> = c.iter().enumerate().map(|(k, &x)| spaces[k].point_name(x)).collect();
            format!("({})", parts.join(","))
        })
        .collect();
    let name = spaces.iter().map(|s| s.name()).collect::<Vec<_>>().join("x");
    Ok(FiniteSpace::from_closed_order(name, points, leq))
}

/// `X^n` named `X^n`.
pub fn power(space: &FiniteSpace, n: usize) -> Result<FiniteSpace, SpaceError> {
    let factors = vec![space; n];
    Ok(product(&factors)?.with_name(format!("{}^{}", space.name(), n)))
}

/// Coordinates of the product point with index `i` (last coordinate varies fastest).
pub fn product_coords(sizes: impl Iterator<Item = usize>) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for size in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..size).map(move |x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    out
}

/// Index in a product of the point with the given coordinates.
pub fn product_index(sizes: &[usize], coords: &[usize]) -> usize {
    coords.iter().zip(sizes).fold(0, |acc, (&c, &s)| acc * s + c)
}

/// The `i`-th projection out of a product of `factors`.
pub fn projection(
    prod: &Arc<FiniteSpace>,
    factors: &[Arc<FiniteSpace>],
    i: usize,
) -> CMap {
    let coords = product_coords(factors.iter().map(|s| s.len()));
    let assign = coords.iter().map(|c| c[i]).collect();
    CMap::new_unchecked(prod.clone(), factors[i].clone(), assign)
}

/// Induced subspace on `members` (kept in ascending index order) with its inclusion.
pub fn subspace(space: &Arc<FiniteSpace>, members: &[usize]) -> Result<(Arc<FiniteSpace>, CMap), SpaceError> {
    if members.is_empty() {
        return Err(SpaceError::Empty);
    }
    let mut ids: Vec<usize> = members.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if let Some(&bad) = ids.iter().find(|&&x| x >= space.len()) {
        return Err(SpaceError::UnknownPoint(format!("#{bad}")));
    }
    let n = ids.len();
    let mut leq = vec![false; n * n];
    for (i, &a) in ids.iter().enumerate() {
        for (j, &b) in ids.iter().enumerate() {
            leq[i * n + j] = space.leq(a, b);
        }
    }
    let points = ids.iter().map(|&x| space.point_name(x).to_string()).collect();
    let sub = Arc::new(FiniteSpace::from_closed_order(space.name().to_string(), points, leq));
    let emb = CMap::new_unchecked(sub.clone(), space.clone(), ids);
    Ok((sub, emb))
}

/// Subspace named by point names.
pub fn subspace_by_names(
    space: &Arc<FiniteSpace>,
    names: &[&str],
) -> Result<(Arc<FiniteSpace>, CMap), SpaceError> {
    let mut ids = Vec::with_capacity(names.len());
    for n in names {
        ids.push(space.index_of(n).ok_or_else(|| SpaceError::UnknownPoint(n.to_string()))?);
    }
    subspace(space, &ids)
}

/// All down-sets in ascending bitmask order.
pub fn open_sets(space: &FiniteSpace) -> Result<Vec<OpenSet>, SpaceError> {
    open_sets_with_threshold(space, DEFAULT_OPEN_SET_THRESHOLD)
}

pub fn open_sets_with_threshold(space: &FiniteSpace, threshold: usize) -> Result<Vec<OpenSet>, SpaceError> {
    let n = space.len();
    if n > threshold || n > MAX_SET_POINTS {
        return Err(SpaceError::ThresholdExceeded { points: n, threshold });
    }
    let downs: Vec<PointSet> = (0..n).map(|x| space.down_set(x)).collect();
    let mut out = Vec::new();
    // Decide each point in a linear extension order; a point may only be
    // included when everything below it already is.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&x| downs[x].len());
    fn rec(k: usize, order: &[usize], downs: &[PointSet], cur: PointSet, out: &mut Vec<OpenSet>) {
        if k == order.len() {
            out.push(OpenSet { members: cur });
            return;
        }
        let x = order[k];
        rec(k + 1, order, downs, cur, out);
        if downs[x].without(x).is_subset(cur) {
            rec(k + 1, order, downs, cur.with(x), out);
        }
    }
    rec(0, &order, &downs, PointSet::empty(), &mut out);
    out.sort();
    Ok(out)
}

/// Connected components of the comparability graph, each sorted, ordered by least member.
pub fn path_components(space: &FiniteSpace) -> Vec<Vec<usize>> {
    let n = space.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut block = vec![s];
        comp[s] = id;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                if comp[y] == usize::MAX && space.comparable(x, y) {
                    comp[y] = id;
                    block.push(y);
                    queue.push_back(y);
                }
            }
        }
        block.sort_unstable();
        out.push(block);
    }
    out
}

pub fn is_path_connected(space: &FiniteSpace) -> bool {
    path_components(space).len() == 1
}

// ---------------------------------------------------------------------------
// Homotopy

/// Single-point moves on the poset of continuous maps `source -> target`.
pub(crate) struct MoveGraph<'a> {
    lower_covers: Vec<Vec<usize>>,
    upper_covers: Vec<Vec<usize>>,
    target: &'a FiniteSpace,
    comparable: Vec<Vec<u16>>,
}

impl<'a> MoveGraph<'a> {
    pub(crate) fn new(source: &FiniteSpace, target: &'a FiniteSpace) -> Self {
        let n = source.len();
        let mut lower_covers = vec![Vec::new(); n];
        let mut upper_covers = vec![Vec::new(); n];
        for (x, y) in source.covers() {
            lower_covers[y].push(x);
            upper_covers[x].push(y);
        }
        let comparable = (0..target.len())
            .map(|v| {
                (0..target.len())
                    .filter(|&w| w != v && target.comparable(v, w))
                    .map(|w| w as u16)
                    .collect()
            })
            .collect();
        MoveGraph { lower_covers, upper_covers, target, comparable }
    }

    /// Calls `visit` on every continuous map one comparable single-point change away.
    pub(crate) fn for_each_neighbor(&self, h: &[u16], mut visit: impl FnMut(Vec<u16>) -> bool) -> bool {
        for x in 0..h.len() {
            let cur = h[x] as usize;
            for &v in &self.comparable[cur] {
                let v_us = v as usize;
                let ok = self.lower_covers[x].iter().all(|&y| self.target.leq(h[y] as usize, v_us))
                    && self.upper_covers[x].iter().all(|&y| self.target.leq(v_us, h[y] as usize));
                if ok {
                    let mut next = h.to_vec();
                    next[x] = v;
                    if visit(next) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Shortest single-move path from `from` to `to`, as a list of assignments.
    pub(crate) fn shortest_path(&self, from: &[u16], to: &[u16]) -> Option<Vec<Vec<u16>>> {
        if from == to {
            return Some(vec![from.to_vec()]);
        }
        let mut states: Vec<Vec<u16>> = vec![from.to_vec()];
        let mut parent: Vec<usize> = vec![usize::MAX];
        let mut seen: HashMap<Vec<u16>, usize> = HashMap::from_iter([(from.to_vec(), 0)]);
        let mut head = 0;
        let mut found = None;
        while head < states.len() && found.is_none() {
            let cur = states[head].clone();
            self.for_each_neighbor(&cur, |next| {
                if seen.contains_key(&next) {
                    return false;
                }
                let idx = states.len();
                seen.insert(next.clone(), idx);
                let done = next == to;
                states.push(next);
                parent.push(head);
                if done {
                    found = Some(idx);
                }
                done
            });
            head += 1;
        }
        let mut idx = found?;
        let mut path = Vec::new();
        while idx != usize::MAX {
            path.push(states[idx].clone());
            idx = parent[idx];
        }
        path.reverse();
        Some(path)
    }
}

pub(crate) fn to_u16(assign: &[usize]) -> Vec<u16> {
    assign.iter().map(|&y| y as u16).collect()
}

/// Decides whether `f` and `g` are homotopic and, if so, returns a shortest fence.
///
/// Breadth-first search over single-point moves, each changing one value to a
/// comparable one while keeping the map continuous. These moves connect
/// exactly the fence components of the mapping poset.
pub fn homotopic(f: &CMap, g: &CMap) -> Result<Option<Fence>, SpaceError> {
    if !f.same_ends(g) {
        return Err(SpaceError::Mismatch);
    }
    if f.target.len() > u16::MAX as usize {
        return Err(SpaceError::ThresholdExceeded { points: f.target.len(), threshold: u16::MAX as usize });
    }
    let graph = MoveGraph::new(&f.source, &f.target);
    let path = graph.shortest_path(&to_u16(&f.assign), &to_u16(&g.assign));
    Ok(path.map(|p| Fence {
        steps: p
            .into_iter()
            .map(|a| CMap {
                source: f.source.clone(),
                target: f.target.clone(),
                assign: a.into_iter().map(usize::from).collect(),
            })
            .collect(),
    }
    .compressed()))
}

/// Result of beat-point reduction.
#[derive(Clone, Debug)]
pub struct CoreReduction {
    pub core: Arc<FiniteSpace>,
    /// Retraction `X -> core`.
    pub retraction: CMap,
    /// Inclusion `core -> X`.
    pub section: CMap,
    /// Fence from `id_X` to `section ∘ retraction`.
    pub fence: Fence,
}

/// Indices kept by repeatedly removing the lowest-index beat point, together
/// with where every point of `space` ends up.
pub(crate) fn core_indices(space: &FiniteSpace) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = space.len();
    let mut alive: Vec<usize> = (0..n).collect();
    // image[x] = where x currently sits, as an index of `space`
    let mut image: Vec<usize> = (0..n).collect();
    let mut stages: Vec<Vec<usize>> = vec![image.clone()];
    while let Some((i, onto)) =
        (0..alive.len()).find_map(|i| beat_target_among(space, &alive, alive[i]).map(|t| (i, t)))
    {
        let removed = alive[i];
        for v in image.iter_mut() {
            if *v == removed {
                *v = onto;
            }
        }
        alive.remove(i);
        stages.push(image.clone());
    }
    (alive, stages)
}

/// Beat-point test for `x` inside the subspace on `alive`.
pub(crate) fn beat_target_among(space: &FiniteSpace, alive: &[usize], x: usize) -> Option<usize> {
    let below = || alive.iter().copied().filter(move |&y| space.lt(y, x));
    if let Some(m) = below().find(|&m| below().all(|y| space.leq(y, m))) {
        return Some(m);
    }
    let above = || alive.iter().copied().filter(move |&y| space.lt(x, y));
    above().find(|&m| above().all(|y| space.leq(m, y)))
}

/// Indices left after repeatedly removing the lowest-index beat point.
pub(crate) fn core_points(space: &FiniteSpace) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..space.len()).collect();
    while let Some(i) = (0..alive.len()).find(|&i| beat_target_among(space, &alive, alive[i]).is_some()) {
        alive.remove(i);
    }
    alive
}

/// Removes beat points until none remain; returns the core and the retraction data.
pub fn core_reduce(space: &Arc<FiniteSpace>) -> CoreReduction {
    let (alive, stages) = core_indices(space);
    let (core, section) = subspace(space, &alive).expect("core is nonempty");
    let position: HashMap<usize, usize> = alive.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let final_image = stages.last().expect("at least the identity stage");
    let retraction = CMap::new_unchecked(
        space.clone(),
        core.clone(),
        final_image.iter().map(|x| position[x]).collect(),
    );
    let fence = Fence {
        steps: stages
            .into_iter()
            .map(|img| CMap::new_unchecked(space.clone(), space.clone(), img))
            .collect(),
    };
    CoreReduction { core, retraction, section, fence }
}
