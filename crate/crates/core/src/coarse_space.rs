//! Finite metric spaces, entourages and finitely generated coarse structures.
//!
//! Every structure here lives on a finite point set `{0, .., n-1}`. An
//! [`Entourage`] is a set of ordered index pairs; a [`CoarseGenerators`]
//! value names the coarse structure generated by finitely many entourages.
//! On a finite set the generated structure is the power set of a single
//! entourage (the reflexive, symmetric, transitive closure of the
//! generators), so membership is decidable by a fixpoint computation.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating the triangle inequality and symmetry.
pub const METRIC_TOLERANCE: f64 = 1e-9;

/// A finite point set with a validated metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceJson", into = "SpaceJson")]
pub struct FiniteSpace {
    n: usize,
    dist: Vec<f64>,
    labels: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct SpaceJson {
    n: usize,
    dist: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl TryFrom<SpaceJson> for FiniteSpace {
    type Error = Error;

    fn try_from(raw: SpaceJson) -> Result<Self> {
        if raw.dist.len() != raw.n {
            return Err(Error::Metric(format!(
                "declared n = {} but dist has {} rows",
                raw.n,
                raw.dist.len()
            )));
        }
        let space = FiniteSpace::new(raw.dist)?;
        match raw.labels {
            Some(labels) => space.with_labels(labels),
            None => Ok(space),
        }
    }
}

impl From<FiniteSpace> for SpaceJson {
    fn from(space: FiniteSpace) -> Self {
        let dist = (0..space.n)
            .map(|x| space.dist[x * space.n..(x + 1) * space.n].to_vec())
            .collect();
        SpaceJson {
            n: space.n,
            dist,
            labels: space.labels,
        }
    }
}

impl FiniteSpace {
    /// Builds a space from a full distance matrix, validating the metric axioms.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut dist = Vec::with_capacity(n * n);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Metric(format!(
                    "row {x} has {} entries, expected {n}",
                    row.len()
                )));
            }
            dist.extend(row);
        }
        Self::from_flat(n, dist)
    }

    /// Builds a space from a row-major distance matrix.
    pub fn from_flat(n: usize, dist: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Metric("a space needs at least one point".into()));
        }
        if dist.len() != n * n {
            return Err(Error::Metric(format!(
                "expected {} distances, got {}",
                n * n,
                dist.len()
            )));
        }
        let space = FiniteSpace {
            n,
            dist,
            labels: None,
        };
        space.validate()?;
        Ok(space)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for x in 0..n {
            if self.d(x, x) != 0.0 {
                return Err(Error::Metric(format!("d({x},{x}) = {} != 0", self.d(x, x))));
            }
            for y in 0..n {
                let dxy = self.d(x, y);
                if !dxy.is_finite() || dxy < 0.0 {
                    return Err(Error::Metric(format!("d({x},{y}) = {dxy} is not a length")));
                }
                if x != y && dxy <= 0.0 {
                    return Err(Error::Metric(format!("distinct points {x},{y} at distance 0")));
                }
                if (dxy - self.d(y, x)).abs() > METRIC_TOLERANCE {
                    return Err(Error::Metric(format!("d({x},{y}) != d({y},{x})")));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                let dxy = self.d(x, y);
                for z in 0..n {
                    if self.d(x, z) > dxy + self.d(y, z) + METRIC_TOLERANCE {
                        return Err(Error::Metric(format!(
                            "triangle inequality fails for ({x},{y},{z})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::Argument(format!(
                "{} labels for {} points",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Points `0..n` on a line with unit spacing (the path metric on `n` vertices).
    pub fn interval(n: usize) -> Result<Self> {
        Self::from_positions(&(0..n).map(|k| k as f64).collect::<Vec<_>>())
    }

    /// The cycle graph on `n` vertices with its path metric.
    pub fn cycle(n: usize) -> Result<Self> {
        let mut dist = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                let d = x.abs_diff(y);
                dist[x * n + y] = d.min(n - d) as f64;
            }
        }
        Self::from_flat(n, dist)
    }

    /// A subset of the real line with the inherited metric. Positions must be distinct.
    pub fn from_positions(positions: &[f64]) -> Result<Self> {
        let n = positions.len();
        let mut dist = vec![0.0; n * n];
        for (x, &px) in positions.iter().enumerate() {
            for (y, &py) in positions.iter().enumerate() {
                dist[x * n + y] = (px - py).abs();
            }
        }
        let labels = positions.iter().map(|p| format!("{p}")).collect();
        Self::from_flat(n, dist)?.with_labels(labels)
    }

    /// `{k^2 : 1 <= k <= count}` with the metric inherited from the integers.
    pub fn squares(count: usize) -> Result<Self> {
        let positions: Vec<f64> = (1..=count).map(|k| (k * k) as f64).collect();
        Self::from_positions(&positions)
    }

    /// A `width x height` lattice with the l1 (word) metric; points in row-major order.
    pub fn grid(width: usize, height: usize) -> Result<Self> {
        let n = width * height;
        let mut dist = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let (ar, ac) = (a / width, a % width);
                let (br, bc) = (b / width, b % width);
                dist[a * n + b] = (ar.abs_diff(br) + ac.abs_diff(bc)) as f64;
            }
        }
        Self::from_flat(n, dist)
    }

    /// Disjoint union of `parts`; points in different parts are at distance `gap`.
    ///
    /// Fails validation unless `gap` is at least half of every part's diameter.
    pub fn union(parts: &[FiniteSpace], gap: f64) -> Result<Self> {
        let n: usize = parts.iter().map(|p| p.n).sum();
        let mut dist = vec![gap; n * n];
        let mut offset = 0;
        for part in parts {
            for x in 0..part.n {
                for y in 0..part.n {
                    dist[(offset + x) * n + offset + y] = part.d(x, y);
                }
            }
            offset += part.n;
        }
        Self::from_flat(n, dist)
    }

    /// Same points, every distance multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Argument(format!("scale factor {factor} must be positive")));
        }
        let mut out = Self::from_flat(self.n, self.dist.iter().map(|d| d * factor).collect())?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn d(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n + y]
    }

    /// Closed ball `B(x; r)` in index order.
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&y| self.d(x, y) <= r).collect()
    }

    /// Largest cardinality of a closed ball of radius `r`.
    pub fn growth(&self, r: f64) -> usize {
        (0..self.n)
            .map(|x| (0..self.n).filter(|&y| self.d(x, y) <= r).count())
            .max()
            .unwrap_or(0)
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Diameter of a subset (0 for the empty set and singletons).
    pub fn subset_diameter(&self, points: &[usize]) -> f64 {
        let mut diam: f64 = 0.0;
        for &a in points {
            for &b in points {
                diam = diam.max(self.d(a, b));
            }
        }
        diam
    }

    /// `d(x, C)`; infinite for empty `C`.
    pub fn dist_to_set(&self, x: usize, set: &[usize]) -> f64 {
        set.iter().map(|&c| self.d(x, c)).fold(f64::INFINITY, f64::min)
    }

    /// Sorted distinct distance values, starting with 0.
    pub fn distance_values(&self) -> Vec<f64> {
        let mut values = self.dist.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        values
    }

    /// True when both spaces have the same points and metric.
    pub fn same_as(&self, other: &FiniteSpace) -> bool {
        std::ptr::eq(self, other) || (self.n == other.n && self.dist == other.dist)
    }
}

/// A set of ordered pairs in `{0..n} x {0..n}`, stored sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Entourage {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

/// Wire form of an entourage; the point count comes from the owning space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntourageJson {
    pub pairs: Vec<[usize; 2]>,
}

impl Serialize for Entourage {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        EntourageJson {
            pairs: self.pairs.iter().map(|&(x, y)| [x, y]).collect(),
        }
        .serialize(serializer)
    }
}

impl EntourageJson {
    pub fn into_entourage(self, n: usize) -> Result<Entourage> {
        Entourage::new(n, self.pairs.into_iter().map(|[x, y]| (x, y)))
    }
}

impl Entourage {
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        for &(x, y) in &pairs {
            let bad = if x >= n { Some(x) } else if y >= n { Some(y) } else { None };
            if let Some(index) = bad {
                return Err(Error::IndexOutOfRange { index, size: n });
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Entourage { n, pairs })
    }

    fn from_sorted(n: usize, pairs: Vec<(usize, usize)>) -> Self {
        debug_assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        Entourage { n, pairs }
    }

    pub fn empty(n: usize) -> Self {
        Entourage { n, pairs: Vec::new() }
    }

    pub fn diagonal(n: usize) -> Self {
        Self::from_sorted(n, (0..n).map(|x| (x, x)).collect())
    }

    pub fn full(n: usize) -> Self {
        Self::from_sorted(n, (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains_pair(&self, x: usize, y: usize) -> bool {
        self.pairs.binary_search(&(x, y)).is_ok()
    }

    fn check_same(&self, other: &Entourage) -> Result<()> {
        if self.n != other.n {
            return Err(Error::SpaceMismatch(format!(
                "entourages on {} and {} points",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// `self ∘ other = {(x, z) : ∃y, (x, y) ∈ self, (y, z) ∈ other}`.
    pub fn compose(&self, other: &Entourage) -> Result<Entourage> {
        self.check_same(other)?;
        let rows = other.row_lists();
        let mut out = BTreeSet::new();
        for &(x, y) in &self.pairs {
            for &z in &rows[y] {
                out.insert((x, z));
            }
        }
        Ok(Self::from_sorted(self.n, out.into_iter().collect()))
    }

    pub fn inverse(&self) -> Entourage {
        let mut pairs: Vec<_> = self.pairs.iter().map(|&(x, y)| (y, x)).collect();
        pairs.sort_unstable();
        Self::from_sorted(self.n, pairs)
    }

    pub fn union(&self, other: &Entourage) -> Result<Entourage> {
        self.check_same(other)?;
        let mut pairs = self.pairs.clone();
        pairs.extend_from_slice(&other.pairs);
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted(self.n, pairs))
    }

    pub fn difference(&self, other: &Entourage) -> Result<Entourage> {
        self.check_same(other)?;
        let pairs = self
            .pairs
            .iter()
            .copied()
            .filter(|&(x, y)| !other.contains_pair(x, y))
            .collect();
        Ok(Self::from_sorted(self.n, pairs))
    }

    pub fn is_subset(&self, other: &Entourage) -> bool {
        self.n == other.n && self.pairs.iter().all(|&(x, y)| other.contains_pair(x, y))
    }

    /// Largest row or column slice `|E_x|`, `|E^x|`.
    pub fn slice_bound(&self) -> usize {
        let mut rows = vec![0usize; self.n];
        let mut cols = vec![0usize; self.n];
        for &(x, y) in &self.pairs {
            rows[x] += 1;
            cols[y] += 1;
        }
        rows.into_iter().chain(cols).max().unwrap_or(0)
    }

    /// Column indices of each row.
    pub fn row_lists(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.n];
        for &(x, y) in &self.pairs {
            rows[x].push(y);
        }
        rows
    }
}

/// `{(x, y) : d(x, y) <= r}`.
pub fn metric_entourage(space: &FiniteSpace, r: f64) -> Result<Entourage> {
    if !(r >= 0.0) {
        return Err(Error::Argument(format!("radius {r} must be nonnegative")));
    }
    let n = space.len();
    let pairs = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .filter(|&(x, y)| space.d(x, y) <= r)
        .collect();
    Ok(Entourage::from_sorted(n, pairs))
}

/// The coarse structure on `space` generated by finitely many entourages.
#[derive(Clone, Debug)]
pub struct CoarseGenerators {
    space: Arc<FiniteSpace>,
    gens: Vec<Entourage>,
}

impl CoarseGenerators {
    pub fn new(space: Arc<FiniteSpace>, gens: Vec<Entourage>) -> Result<Self> {
        for g in &gens {
            if g.n() != space.len() {
                return Err(Error::SpaceMismatch(format!(
                    "generator on {} points for a space of {}",
                    g.n(),
                    space.len()
                )));
            }
        }
        Ok(CoarseGenerators { space, gens })
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn generators(&self) -> &[Entourage] {
        &self.gens
    }

    /// The largest member `U∞` of the generated structure: the union of all
    /// finite compositions of the generators, their inverses and the diagonal.
    ///
    /// Computed as a fixpoint of `U ← U ∪ U∘U`; at most `n²` rounds are allowed.
    pub fn closure(&self) -> Result<Entourage> {
        let n = self.space.len();
        let words = n.div_ceil(64);
        let mut rows = vec![vec![0u64; words]; n];
        let set = |rows: &mut Vec<Vec<u64>>, x: usize, y: usize| rows[x][y / 64] |= 1 << (y % 64);
        for x in 0..n {
            set(&mut rows, x, x);
        }
        for g in &self.gens {
            for &(x, y) in g.pairs() {
                set(&mut rows, x, y);
                set(&mut rows, y, x);
            }
        }
        let cap = (n * n).max(1);
        let mut rounds = 0;
        loop {
            let mut next = rows.clone();
            for x in 0..n {
                for y in 0..n {
                    if rows[x][y / 64] >> (y % 64) & 1 == 1 {
                        for (acc, w) in next[x].iter_mut().zip(&rows[y]) {
                            *acc |= w;
                        }
                    }
                }
            }
            rounds += 1;
            if next == rows {
                break;
            }
            if rounds >= cap {
                return Err(Error::ClosureDepth(cap));
            }
            rows = next;
        }
        let pairs = (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .filter(|&(x, y)| rows[x][y / 64] >> (y % 64) & 1 == 1)
            .collect();
        Ok(Entourage::from_sorted(n, pairs))
    }

    /// Whether `entourage` belongs to the generated coarse structure.
    pub fn contains(&self, entourage: &Entourage) -> Result<bool> {
        if entourage.n() != self.space.len() {
            return Err(Error::SpaceMismatch(format!(
                "entourage on {} points, structure on {}",
                entourage.n(),
                self.space.len()
            )));
        }
        Ok(entourage.is_subset(&self.closure()?))
    }
}

/// A total map between the points of two finite spaces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoarseMap {
    map: Vec<usize>,
}

impl CoarseMap {
    pub fn new(map: Vec<usize>, codomain_size: usize) -> Result<Self> {
        if let Some(&index) = map.iter().find(|&&y| y >= codomain_size) {
            return Err(Error::IndexOutOfRange {
                index,
                size: codomain_size,
            });
        }
        Ok(CoarseMap { map })
    }

    pub fn identity(n: usize) -> Self {
        CoarseMap { map: (0..n).collect() }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn is_bijective(&self, codomain_size: usize) -> bool {
        if self.map.len() != codomain_size {
            return false;
        }
        let mut seen = vec![false; codomain_size];
        self.map.iter().all(|&y| !std::mem::replace(&mut seen[y], true))
    }
}

/// Sampled values of the expansion function `ω(r) = max{d_Y(f x, f x') : d_X(x, x') <= r}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionProfile {
    pub points: Vec<(f64, f64)>,
    /// `(sup_x d_X(x, g f x), sup_y d_Y(y, f g y))` when an inverse map was supplied.
    pub closeness: Option<(f64, f64)>,
}

impl ExpansionProfile {
    /// `ω(r)` at a sampled radius.
    pub fn at(&self, r: f64) -> Option<f64> {
        self.points.iter().find(|(s, _)| *s == r).map(|&(_, w)| w)
    }
}

/// `ω(r)` evaluated at `radii` (the distinct distances of `x_space` when `None`).
pub fn expansion_profile(
    f: &CoarseMap,
    x_space: &FiniteSpace,
    y_space: &FiniteSpace,
    radii: Option<&[f64]>,
    inverse: Option<&CoarseMap>,
) -> Result<ExpansionProfile> {
    if f.len() != x_space.len() {
        return Err(Error::SpaceMismatch(format!(
            "map defined on {} points, domain has {}",
            f.len(),
            x_space.len()
        )));
    }
    if f.as_slice().iter().any(|&y| y >= y_space.len()) {
        return Err(Error::SpaceMismatch("map leaves the codomain".into()));
    }
    let owned;
    let radii = match radii {
        Some(r) => r,
        None => {
            owned = x_space.distance_values();
            &owned
        }
    };
    let n = x_space.len();
    let points = radii
        .iter()
        .map(|&r| {
            let mut omega: f64 = 0.0;
            for a in 0..n {
                for b in 0..n {
                    if x_space.d(a, b) <= r {
                        omega = omega.max(y_space.d(f.apply(a), f.apply(b)));
                    }
                }
            }
            (r, omega)
        })
        .collect();
    let closeness = match inverse {
        None => None,
        Some(g) => {
            if g.len() != y_space.len() || g.as_slice().iter().any(|&x| x >= n) {
                return Err(Error::SpaceMismatch("inverse map has the wrong shape".into()));
            }
            let back = (0..n)
                .map(|x| x_space.d(x, g.apply(f.apply(x))))
                .fold(0.0, f64::max);
            let forth = (0..y_space.len())
                .map(|y| y_space.d(y, f.apply(g.apply(y))))
                .fold(0.0, f64::max);
            Some((back, forth))
        }
    };
    Ok(ExpansionProfile { points, closeness })
}
