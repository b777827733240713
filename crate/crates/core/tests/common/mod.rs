//! Naive reference computations used as independent oracles.
//!
//! Nothing here calls into the search code of the library: open sets come
//! from scanning every subset, homotopy classes from the connected
//! components of the full comparability graph on all continuous maps, and
//! the distance from trying every subfamily of good open sets by size.

#![allow(dead_code)]

use homdist::finspace::FiniteSpace;

/// Every continuous map from the subspace `members` of `src` into `tgt`,
/// each as a vector of target indices aligned with `members`.
pub fn all_maps(src: &FiniteSpace, members: &[usize], tgt: &FiniteSpace) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(members.len());
    fn rec(
        src: &FiniteSpace,
        members: &[usize],
        tgt: &FiniteSpace,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let k = cur.len();
        if k == members.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..tgt.len() {
            let ok = (0..k).all(|i| {
                (!src.leq(members[i], members[k]) || tgt.leq(cur[i], v))
                    && (!src.leq(members[k], members[i]) || tgt.leq(v, cur[i]))
            });
            if ok {
                cur.push(v);
                rec(src, members, tgt, cur, out);
                cur.pop();
            }
        }
    }
    rec(src, members, tgt, &mut cur, &mut out);
    out
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Component label of every continuous map `members -> tgt` under pointwise comparability.
pub fn homotopy_classes(
    src: &FiniteSpace,
    members: &[usize],
    tgt: &FiniteSpace,
) -> (Vec<Vec<usize>>, Vec<usize>) {
    let maps = all_maps(src, members, tgt);
    let n = maps.len();
    let t = tgt.len();
    // Pack each map as one-hot values and as up-set masks, `t` bits per point,
    // so that `f <= g` iff no bit of one_hot(g) falls outside up(f).
    let words = (members.len() * t).div_ceil(64).max(1);
    let pack = |m: &Vec<usize>, up: bool| {
        let mut w = vec![0u64; words];
        for (k, &v) in m.iter().enumerate() {
            for u in 0..t {
                let set = if up { tgt.leq(v, u) } else { u == v };
                if set {
                    let bit = k * t + u;
                    w[bit / 64] |= 1 << (bit % 64);
                }
            }
        }
        w
    };
    let one: Vec<Vec<u64>> = maps.iter().map(|m| pack(m, false)).collect();
    let up: Vec<Vec<u64>> = maps.iter().map(|m| pack(m, true)).collect();
    let below = |i: usize, j: usize| one[j].iter().zip(&up[i]).all(|(&o, &u)| o & !u == 0);
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if find(&mut parent, i) == find(&mut parent, j) {
                continue;
            }
            if below(i, j) || below(j, i) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let labels = (0..n).map(|i| find(&mut parent, i)).collect();
    (maps, labels)
}

/// Whether two assignments on `members` are joined by a fence (brute force).
pub fn naive_homotopic(
    src: &FiniteSpace,
    members: &[usize],
    tgt: &FiniteSpace,
    f: &[usize],
    g: &[usize],
) -> bool {
    let (maps, labels) = homotopy_classes(src, members, tgt);
    let fi = maps.iter().position(|m| m == f).expect("f continuous");
    let gi = maps.iter().position(|m| m == g).expect("g continuous");
    labels[fi] == labels[gi]
}

/// All down-sets of `src` as bitmasks, found by scanning every subset.
pub fn naive_open_sets(src: &FiniteSpace) -> Vec<u64> {
    let n = src.len();
    assert!(n < 64);
    (0u64..1 << n)
        .filter(|&m| {
            (0..n).all(|x| m >> x & 1 == 0 || (0..n).all(|y| !src.leq(y, x) || m >> y & 1 == 1))
        })
        .collect()
}

/// Homotopy classes of every continuous map on every nonempty open set of
/// `src`, computed once per (source, target) pair.
pub struct NaiveOracle {
    n: usize,
    opens: Vec<u64>,
    classes: Vec<std::collections::HashMap<Vec<usize>, usize>>,
}

impl NaiveOracle {
    pub fn new(src: &FiniteSpace, tgt: &FiniteSpace) -> Self {
        let opens: Vec<u64> = naive_open_sets(src).into_iter().filter(|&m| m != 0).collect();
        let classes = opens
            .iter()
            .map(|&m| {
                let members: Vec<usize> = (0..src.len()).filter(|&x| m >> x & 1 == 1).collect();
                let (maps, labels) = homotopy_classes(src, &members, tgt);
                maps.into_iter().zip(labels).collect()
            })
            .collect();
        NaiveOracle { n: src.len(), opens, classes }
    }

    /// Open sets on which all `maps` restrict into one homotopy class.
    pub fn good_sets(&self, maps: &[Vec<usize>]) -> Vec<u64> {
        self.opens
            .iter()
            .zip(&self.classes)
            .filter(|(&m, classes)| {
                let label = |f: &Vec<usize>| {
                    let r: Vec<usize> = (0..self.n).filter(|&x| m >> x & 1 == 1).map(|x| f[x]).collect();
                    classes[&r]
                };
                let l0 = label(&maps[0]);
                maps.iter().all(|f| label(f) == l0)
            })
            .map(|(&m, _)| m)
            .collect()
    }

    /// Smallest number of good open sets covering the source, or `None`.
    pub fn distance(&self, maps: &[Vec<usize>]) -> Option<usize> {
        let full: u64 = (1u64 << self.n) - 1;
        let good = self.good_sets(maps);
        if good.iter().fold(0, |a, &m| a | m) != full {
            return None;
        }
        // A minimum cover can always be built from sets not contained in another.
        let top: Vec<u64> = good
            .iter()
            .copied()
            .filter(|&m| !good.iter().any(|&o| o != m && m & !o == 0))
            .collect();
        (1..=top.len()).find(|&r| any_cover(&top, r, 0, 0, full))
    }
}

pub fn naive_good_sets(src: &FiniteSpace, tgt: &FiniteSpace, maps: &[Vec<usize>]) -> Vec<u64> {
    NaiveOracle::new(src, tgt).good_sets(maps)
}

pub fn naive_distance(src: &FiniteSpace, tgt: &FiniteSpace, maps: &[Vec<usize>]) -> Option<usize> {
    NaiveOracle::new(src, tgt).distance(maps)
}

/// Random partial order on `n` points from a seeded generator.
pub fn random_poset(rng: &mut impl rand::Rng, n: usize, density: f64) -> FiniteSpace {
    let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let mut rel = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                rel.push((i, j));
            }
        }
    }
    FiniteSpace::new("R", names, &rel).expect("acyclic")
}

fn any_cover(good: &[u64], r: usize, start: usize, acc: u64, full: u64) -> bool {
    if acc == full {
        return true;
    }
    if r == 0 {
        return false;
    }
    (start..good.len()).any(|i| any_cover(good, r - 1, i + 1, acc | good[i], full))
}

/// Every labelled partial order on `n` points, as lists of strict pairs.
pub fn all_posets(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y))).collect();
    let mut out = Vec::new();
    // each unordered pair is unrelated, x<y or y<x
    let unordered: Vec<(usize, usize)> = pairs.iter().copied().filter(|&(x, y)| x < y).collect();
    let total = 3usize.pow(unordered.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut rel = vec![vec![false; n]; n];
        for &(x, y) in &unordered {
            match c % 3 {
                1 => rel[x][y] = true,
                2 => rel[y][x] = true,
                _ => {}
            }
            c /= 3;
        }
        let transitive = (0..n).all(|a| {
            (0..n).all(|b| (0..n).all(|d| !(rel[a][b] && rel[b][d]) || rel[a][d]))
        });
        if transitive {
            out.push(pairs.iter().copied().filter(|&(x, y)| rel[x][y]).collect());
        }
    }
    out
}

/// One representative of every isomorphism class of posets on `n` points.
pub fn unlabelled_posets(n: usize) -> Vec<Vec<(usize, usize)>> {
    let perms = permutations(n);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for rel in all_posets(n) {
        let canon = perms
            .iter()
            .map(|p| {
                let mut r: Vec<(usize, usize)> = rel.iter().map(|&(x, y)| (p[x], p[y])).collect();
                r.sort_unstable();
                r
            })
            .min()
            .unwrap_or_default();
        if seen.insert(canon) {
            out.push(rel);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}
