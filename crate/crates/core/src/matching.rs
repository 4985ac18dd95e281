//! Bipartite matching with Hall certificates, the König bijection, and
//! bijective repair of coarse maps.

use std::collections::VecDeque;

use serde::Serialize;

use crate::coarse_space::{CoarseMap, FiniteSpace, METRIC_TOLERANCE};
use crate::error::{Error, Result};

const UNSET: usize = usize::MAX;

/// Left vertices `0..left`, right vertices `0..right`, sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    right: usize,
    adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(left: usize, right: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); left];
        for (l, r) in edges {
            if l >= left {
                return Err(Error::IndexOutOfRange { index: l, size: left });
            }
            if r >= right {
                return Err(Error::IndexOutOfRange { index: r, size: right });
            }
            adj[l].push(r);
        }
        Ok(Self::from_lists(right, adj))
    }

    fn from_lists(right: usize, mut adj: Vec<Vec<usize>>) -> Self {
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        BipartiteGraph { right, adj }
    }

    pub fn left_size(&self) -> usize {
        self.adj.len()
    }

    pub fn right_size(&self) -> usize {
        self.right
    }

    pub fn neighbors(&self, l: usize) -> &[usize] {
        &self.adj[l]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, l: usize, r: usize) -> bool {
        self.adj.get(l).is_some_and(|list| list.binary_search(&r).is_ok())
    }

    /// The same edges seen from the right.
    pub fn transpose(&self) -> BipartiteGraph {
        let mut adj = vec![Vec::new(); self.right];
        for (l, list) in self.adj.iter().enumerate() {
            for &r in list {
                adj[r].push(l);
            }
        }
        Self::from_lists(self.left_size(), adj)
    }

    /// Sorted `N(D)`.
    pub fn neighborhood(&self, set: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.right];
        for &l in set {
            for &r in &self.adj[l] {
                seen[r] = true;
            }
        }
        (0..self.right).filter(|&r| seen[r]).collect()
    }
}

/// An injective partial map from left to right along edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Matching {
    mate: Vec<Option<usize>>,
}

impl Matching {
    pub fn mate(&self, l: usize) -> Option<usize> {
        self.mate[l]
    }

    pub fn size(&self) -> usize {
        self.mate.iter().flatten().count()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.mate
            .iter()
            .enumerate()
            .filter_map(|(l, r)| r.map(|r| (l, r)))
            .collect()
    }

    pub fn is_left_saturating(&self) -> bool {
        self.mate.iter().all(Option::is_some)
    }

    /// The matching as a total map, when it saturates the left side.
    pub fn to_map(&self) -> Option<Vec<usize>> {
        self.mate.iter().copied().collect()
    }
}

/// A set `D` of left vertices with `|N(D)| < |D|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Deficiency {
    pub set: Vec<usize>,
    pub neighborhood: Vec<usize>,
}

impl Deficiency {
    /// Recomputes `N(D)` from the graph and checks the strict inequality.
    pub fn is_genuine(&self, g: &BipartiteGraph) -> bool {
        let n = g.neighborhood(&self.set);
        n == self.neighborhood && n.len() < self.set.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HallOutcome {
    Matched(Matching),
    Deficient(Deficiency),
}

struct HopcroftKarp<'a> {
    g: &'a BipartiteGraph,
    left_mate: Vec<usize>,
    right_mate: Vec<usize>,
    layer: Vec<usize>,
}

impl<'a> HopcroftKarp<'a> {
    fn new(g: &'a BipartiteGraph) -> Self {
        HopcroftKarp {
            g,
            left_mate: vec![UNSET; g.left_size()],
            right_mate: vec![UNSET; g.right_size()],
            layer: vec![UNSET; g.left_size()],
        }
    }

    /// Layers the free left vertices and their alternating successors; true if
    /// some free right vertex is reachable.
    fn bfs(&mut self) -> bool {
        let mut queue = VecDeque::new();
        for l in 0..self.g.left_size() {
            if self.left_mate[l] == UNSET {
                self.layer[l] = 0;
                queue.push_back(l);
            } else {
                self.layer[l] = UNSET;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in self.g.neighbors(l) {
                let next = self.right_mate[r];
                if next == UNSET {
                    found = true;
                } else if self.layer[next] == UNSET {
                    self.layer[next] = self.layer[l] + 1;
                    queue.push_back(next);
                }
            }
        }
        found
    }

    fn dfs(&mut self, l: usize) -> bool {
        let depth = self.layer[l];
        self.layer[l] = UNSET;
        for i in 0..self.g.neighbors(l).len() {
            let r = self.g.neighbors(l)[i];
            let next = self.right_mate[r];
            let extends = next == UNSET || (self.layer[next] == depth + 1 && self.dfs(next));
            if extends {
                self.left_mate[l] = r;
                self.right_mate[r] = l;
                return true;
            }
        }
        false
    }

    fn run(mut self) -> (Vec<usize>, Vec<usize>) {
        while self.bfs() {
            for l in 0..self.g.left_size() {
                if self.left_mate[l] == UNSET && self.layer[l] == 0 {
                    self.dfs(l);
                }
            }
        }
        (self.left_mate, self.right_mate)
    }
}

/// A maximum matching; vertices are tried in index order, so the result is
/// deterministic.
pub fn maximum_matching(g: &BipartiteGraph) -> Matching {
    let (left_mate, _) = HopcroftKarp::new(g).run();
    Matching {
        mate: left_mate.into_iter().map(|r| (r != UNSET).then_some(r)).collect(),
    }
}

/// A left-saturating matching, or the left vertices reachable by alternating
/// paths from the unmatched ones, whose neighbourhood is too small.
pub fn hall_matching(g: &BipartiteGraph) -> HallOutcome {
    let (left_mate, right_mate) = HopcroftKarp::new(g).run();
    if left_mate.iter().all(|&r| r != UNSET) {
        return HallOutcome::Matched(Matching {
            mate: left_mate.into_iter().map(Some).collect(),
        });
    }
    let mut in_set = vec![false; g.left_size()];
    let mut queue: VecDeque<usize> = (0..g.left_size()).filter(|&l| left_mate[l] == UNSET).collect();
    for &l in &queue {
        in_set[l] = true;
    }
    while let Some(l) = queue.pop_front() {
        for &r in g.neighbors(l) {
            // maximality: every reachable right vertex is matched
            let next = right_mate[r];
            if !in_set[next] {
                in_set[next] = true;
                queue.push_back(next);
            }
        }
    }
    let set: Vec<usize> = (0..g.left_size()).filter(|&l| in_set[l]).collect();
    let neighborhood = g.neighborhood(&set);
    HallOutcome::Deficient(Deficiency { set, neighborhood })
}

fn check_injective(map: &[usize], codomain: usize, name: &str) -> Result<Vec<usize>> {
    let mut inverse = vec![UNSET; codomain];
    for (a, &b) in map.iter().enumerate() {
        if b >= codomain {
            return Err(Error::IndexOutOfRange { index: b, size: codomain });
        }
        if inverse[b] != UNSET {
            return Err(Error::NotInjective(format!("{name} sends {} and {a} to {b}", inverse[b])));
        }
        inverse[b] = a;
    }
    Ok(inverse)
}

/// The Cantor–Schröder–Bernstein bijection `h: X -> Y` from injections
/// `f: Y -> X` and `g: X -> Y`.
///
/// The backward chain `x <- f(y) <- g(x') <- ...` of each `x` is traced; if it
/// stops at a point of `Y` outside the image of `g`, then `h(x) = f⁻¹(x)`,
/// otherwise (stopping in `X`, or cycling) `h(x) = g(x)`.
pub fn konig_csb(f: &[usize], g: &[usize]) -> Result<Vec<usize>> {
    let (ny, nx) = (f.len(), g.len());
    if nx != ny {
        return Err(Error::SpaceMismatch(format!("|X| = {nx} but |Y| = {ny}")));
    }
    let f_inv = check_injective(f, nx, "f")?;
    let g_inv = check_injective(g, ny, "g")?;

    // 0 = unknown, 1 = use g, 2 = use f⁻¹
    let mut side = vec![0u8; nx];
    for start in 0..nx {
        if side[start] != 0 {
            continue;
        }
        let mut chain = vec![start];
        let mut x = start;
        let verdict = loop {
            let y = f_inv[x];
            if y == UNSET {
                break 1;
            }
            let prev = g_inv[y];
            if prev == UNSET {
                break 2;
            }
            if prev == start || side[prev] != 0 {
                break if prev == start { 1 } else { side[prev] };
            }
            chain.push(prev);
            x = prev;
        };
        for x in chain {
            side[x] = verdict;
        }
    }
    Ok((0..nx).map(|x| if side[x] == 2 { f_inv[x] } else { g[x] }).collect())
}

/// The displacement-`R` graph of `f`: edges `(x, y)` with `d_Y(f(x), y) <= R`.
pub fn displacement_graph(f: &CoarseMap, y_space: &FiniteSpace, radius: f64) -> BipartiteGraph {
    let adj = f
        .as_slice()
        .iter()
        .map(|&fx| {
            (0..y_space.len())
                .filter(|&y| y_space.d(fx, y) <= radius + METRIC_TOLERANCE)
                .collect()
        })
        .collect();
    BipartiteGraph::from_lists(y_space.len(), adj)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Bijectification {
    Bijection {
        h: CoarseMap,
        radius: f64,
        displacement: f64,
    },
    Blocked {
        radius: f64,
        certificate: Deficiency,
    },
}

/// A bijection within distance `R` of `f`, escalating `R` (first to the
/// smallest positive distance of `Y`, then by doubling) until a perfect
/// matching of the displacement graph exists or the cap is passed. The cap is
/// `diam(Y)`, lowered to `max_radius` when given.
pub fn bijectify(
    f: &CoarseMap,
    x_space: &FiniteSpace,
    y_space: &FiniteSpace,
    radius: f64,
    max_radius: Option<f64>,
) -> Result<Bijectification> {
    if x_space.len() != y_space.len() || f.len() != x_space.len() {
        return Err(Error::SpaceMismatch(format!(
            "map on {} points between spaces of size {} and {}",
            f.len(),
            x_space.len(),
            y_space.len()
        )));
    }
    if !(radius >= 0.0) {
        return Err(Error::Argument(format!("radius {radius} must be nonnegative")));
    }
    let cap = max_radius.map_or(y_space.diameter(), |m| m.min(y_space.diameter()));
    let step = y_space
        .distance_values()
        .into_iter()
        .find(|&d| d > 0.0)
        .unwrap_or(1.0);
    let mut r = radius;
    loop {
        let graph = displacement_graph(f, y_space, r);
        match hall_matching(&graph) {
            HallOutcome::Matched(m) => {
                let h = m.to_map().expect("saturating matching");
                let displacement = h
                    .iter()
                    .enumerate()
                    .map(|(x, &hx)| y_space.d(hx, f.apply(x)))
                    .fold(0.0, f64::max);
                return Ok(Bijectification::Bijection {
                    h: CoarseMap::new(h, y_space.len())?,
                    radius: r,
                    displacement,
                });
            }
            HallOutcome::Deficient(certificate) => {
                if r >= cap - METRIC_TOLERANCE {
                    return Ok(Bijectification::Blocked { radius: r, certificate });
                }
                let next = if r < step { step } else { 2.0 * r };
                r = next.min(cap);
            }
        }
    }
}
