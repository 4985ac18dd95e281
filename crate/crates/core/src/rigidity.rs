//! Recovering a bijection `h: X -> Y` from a unitary `v: l2(Y) -> l2(X)` that
//! conjugates `l∞(Y)` onto `l∞(X)`, and the quantitative profiles around it.
//!
//! Throughout, `|v_xy|² = ‖v q_y v* p_x‖²`: the rank-one sandwich reduces to a
//! single entry, so no norms are needed to build the support sets.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::band_ops::{Operator, NORM_TOL, ZERO_THRESHOLD};
use crate::coarse_space::FiniteSpace;
use crate::error::{Error, Result};
use crate::linalg::{matrix_norm, top_right_singular, C64};
use crate::matching::{hall_matching, konig_csb, BipartiteGraph, HallOutcome};

/// Allowed unitarity defect of input operators.
pub const UNITARY_TOL: f64 = 1e-8;

/// Threshold of the Hall argument; any value below one would do.
pub const HALL_EPS: f64 = 0.5;

/// `{2^-1, ..., 2^-20}`.
pub fn default_delta_grid() -> Vec<f64> {
    (1..=20).map(|k| 0.5f64.powi(k)).collect()
}

/// `0`, then `step·2^k` below the diameter, then the diameter, where `step`
/// is the smallest positive distance.
pub fn default_scales(space: &FiniteSpace) -> Vec<f64> {
    let diam = space.diameter();
    let mut out = vec![0.0];
    let Some(step) = space.distance_values().into_iter().find(|&d| d > 0.0) else {
        return out;
    };
    let mut s = step;
    while s < diam {
        out.push(s);
        s *= 2.0;
    }
    out.push(diam);
    out
}

/// A list of `(s, value)` serialized as a JSON object keyed by `s`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScaleMap<T>(pub Vec<(f64, T)>);

impl<T> ScaleMap<T> {
    pub fn get(&self, s: f64) -> Option<&T> {
        self.0.iter().find(|(k, _)| *k == s).map(|(_, v)| v)
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.0.iter().map(|(_, v)| v)
    }
}

impl<T: Serialize> Serialize for ScaleMap<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(&k.to_string(), v)?;
        }
        map.end()
    }
}

/// `X_{y,δ}` for each `y` and `Y_{x,δ}` for each `x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportSets {
    pub delta: f64,
    pub x_of_y: Vec<Vec<usize>>,
    pub y_of_x: Vec<Vec<usize>>,
    /// Diameter of each `X_{y,δ}` in `X`.
    pub diameters: Vec<f64>,
}

impl SupportSets {
    pub fn max_diameter(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }
}

fn require_unitary(v: &Operator) -> Result<()> {
    v.require_unitary(UNITARY_TOL)
}

pub fn support_sets(v: &Operator, delta: f64) -> Result<SupportSets> {
    require_unitary(v)?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Argument(format!("delta {delta} must be positive")));
    }
    Ok(support_sets_unchecked(v, delta))
}

fn support_sets_unchecked(v: &Operator, delta: f64) -> SupportSets {
    let (nx, ny) = (v.nrows(), v.ncols());
    let x_space = v.codomain();
    let x_of_y: Vec<Vec<usize>> = (0..ny)
        .map(|y| (0..nx).filter(|&x| v.entry(x, y).norm_sqr() >= delta).collect())
        .collect();
    let mut y_of_x = vec![Vec::new(); nx];
    for (y, xs) in x_of_y.iter().enumerate() {
        for &x in xs {
            y_of_x[x].push(y);
        }
    }
    let diameters = x_of_y.iter().map(|xs| x_space.subset_diameter(xs)).collect();
    SupportSets {
        delta,
        x_of_y,
        y_of_x,
        diameters,
    }
}

/// Outcome of the δ search.
#[derive(Clone, Debug, PartialEq)]
pub enum DeltaSelection {
    /// `f(y) ∈ X_{y,δ}` and `g(x) ∈ Y_{x,δ}`, both injective.
    Selected { delta: f64, f: Vec<usize>, g: Vec<usize> },
    Failed { smallest: f64 },
}

/// The largest grid value at which both support-set graphs satisfy Hall's
/// condition on their left side.
pub fn select_delta(v: &Operator, grid: &[f64]) -> Result<DeltaSelection> {
    require_unitary(v)?;
    if grid.is_empty() {
        return Err(Error::Argument("empty delta grid".into()));
    }
    if grid.iter().any(|&d| !(d > 0.0 && d <= 1.0)) || grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Argument("delta grid must be strictly decreasing in (0, 1]".into()));
    }
    for &delta in grid {
        let sets = support_sets_unchecked(v, delta);
        let y_graph = BipartiteGraph::new(
            v.ncols(),
            v.nrows(),
            sets.x_of_y.iter().enumerate().flat_map(|(y, xs)| xs.iter().map(move |&x| (y, x))),
        )?;
        let HallOutcome::Matched(f) = hall_matching(&y_graph) else {
            continue;
        };
        let HallOutcome::Matched(g) = hall_matching(&y_graph.transpose()) else {
            continue;
        };
        return Ok(DeltaSelection::Selected {
            delta,
            f: f.to_map().expect("saturating"),
            g: g.to_map().expect("saturating"),
        });
    }
    Ok(DeltaSelection::Failed {
        smallest: *grid.last().expect("nonempty"),
    })
}

/// The sufficient δ read off the existence argument with `ε = 1/2` and every
/// ball bound replaced by `N = |X|`: `γ = ε/(2+ε)`, `M = (N/γ)²`,
/// `δ = (1/M)/(2N) = γ²/(2N³)`.
pub fn predicted_delta(n: usize) -> f64 {
    let gamma = HALL_EPS / (2.0 + HALL_EPS);
    let n = n.max(1) as f64;
    gamma * gamma / (2.0 * n.powi(3))
}

/// Operator norm after dropping zero rows and columns.
fn compressed_norm(m: &DMatrix<C64>) -> Result<f64> {
    let rows: Vec<usize> = (0..m.nrows())
        .filter(|&r| m.row(r).iter().any(|z| z.norm() > 0.0))
        .collect();
    if rows.is_empty() {
        return Ok(0.0);
    }
    let cols: Vec<usize> = (0..m.ncols())
        .filter(|&c| m.column(c).iter().any(|z| z.norm() > 0.0))
        .collect();
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]);
    matrix_norm(&sub, NORM_TOL)
}

/// `‖a - band_truncate(a, s)‖` for each `s`.
pub fn band_errors(a: &Operator, s_values: &[f64]) -> Result<ScaleMap<f64>> {
    let points = s_values
        .par_iter()
        .map(|&s| {
            let tail = a.sub(&a.band_truncate(s)?)?;
            Ok((s, compressed_norm(tail.entries())?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScaleMap(points))
}

/// Lower and upper estimates of `sup ‖p_C a p_D‖` over `d(C, D) > s`.
///
/// The upper bound is the band-truncation error. The lower estimate ranges
/// over balls `C = B(x, ρ)` with `ρ ∈ {0} ∪ {step·2^k}` below the diameter and
/// `D` the complement of the closed `s`-neighbourhood of `C`.
pub fn quasilocality_profile(a: &Operator, s_values: &[f64]) -> Result<ScaleMap<[f64; 2]>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if let Some(s) = s_values.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::Argument(format!("scale {s} must be nonnegative")));
    }
    let space = a.codomain().clone();
    let n = space.len();
    let upper = band_errors(a, s_values)?;
    let entries: Vec<(usize, usize, C64)> = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .filter_map(|(x, y)| {
            let z = a.entry(x, y);
            (z.norm() > 0.0).then_some((x, y, z))
        })
        .collect();
    let mut radii = default_scales(&space);
    radii.retain(|&r| r < space.diameter());
    let balls: Vec<Vec<usize>> = (0..n)
        .flat_map(|x| radii.iter().map(move |&r| (x, r)))
        .map(|(x, r)| space.ball(x, r))
        .collect();

    let lower = s_values
        .par_iter()
        .map(|&s| {
            let mut best = 0.0f64;
            for ball in &balls {
                let mut in_c = vec![false; n];
                for &c in ball {
                    in_c[c] = true;
                }
                let in_d: Vec<bool> = (0..n).map(|z| space.dist_to_set(z, ball) > s).collect();
                let block: Vec<&(usize, usize, C64)> =
                    entries.iter().filter(|(x, y, _)| in_c[*x] && in_d[*y]).collect();
                if block.is_empty() {
                    continue;
                }
                let mut rows: Vec<usize> = block.iter().map(|e| e.0).collect();
                let mut cols: Vec<usize> = block.iter().map(|e| e.1).collect();
                rows.sort_unstable();
                rows.dedup();
                cols.sort_unstable();
                cols.dedup();
                let mut m = DMatrix::zeros(rows.len(), cols.len());
                for &&(x, y, z) in &block {
                    let i = rows.binary_search(&x).expect("row present");
                    let j = cols.binary_search(&y).expect("col present");
                    m[(i, j)] = z;
                }
                best = best.max(matrix_norm(&m, NORM_TOL)?);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(ScaleMap(
        upper
            .0
            .iter()
            .zip(lower)
            .map(|(&(s, up), low)| (s, [low.min(up), up]))
            .collect(),
    ))
}

/// A unit vector supported in a ball on which `a` nearly attains its norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OnlWitness {
    pub radius: f64,
    pub center: usize,
    #[serde(serialize_with = "serialize_vector")]
    pub xi: DVector<C64>,
    /// `‖aξ‖ / ‖a‖`.
    pub ratio: f64,
}

fn serialize_vector<S: Serializer>(v: &DVector<C64>, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

/// The smallest distance `r` of the space such that some ball `B(x, r)`
/// carries `‖a p_B‖ >= (1 - ε)‖a‖`. Among the centres at that radius the one
/// with the largest restricted norm wins (lowest index on ties); `ξ` is the top
/// right singular vector of the restricted columns, phased so that its largest
/// entry is real and positive.
pub fn onl_witness(a: &Operator, eps: f64) -> Result<OnlWitness> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Argument(format!("epsilon {eps} must lie in (0, 1)")));
    }
    let total = a.norm()?;
    if total <= ZERO_THRESHOLD {
        return Err(Error::Precondition("operator is zero".into()));
    }
    let space = a.domain().clone();
    let target = (1.0 - eps) * total;
    for r in space.distance_values() {
        let scored = (0..space.len())
            .into_par_iter()
            .map(|x| {
                let ball = space.ball(x, r);
                let block = a.entries().select_columns(&ball);
                (x, ball, top_right_singular(&block))
            })
            .collect::<Vec<_>>();
        let best = scored
            .into_iter()
            .filter(|(_, _, (sigma, _))| *sigma >= target)
            .fold(None::<(usize, Vec<usize>, (f64, DVector<C64>))>, |acc, cur| match acc {
                Some(prev) if prev.2 .0 >= cur.2 .0 => Some(prev),
                _ => Some(cur),
            });
        if let Some((center, ball, (_, local))) = best {
            let mut xi = DVector::zeros(space.len());
            for (k, &p) in ball.iter().enumerate() {
                xi[p] = local[k];
            }
            let lead = xi.iter().copied().max_by(|p, q| p.norm().total_cmp(&q.norm())).expect("nonempty");
            xi *= lead.conj() / lead.norm();
            let ratio = (a.entries() * &xi).norm() / total;
            return Ok(OnlWitness {
                radius: r,
                center,
                xi,
                ratio,
            });
        }
    }
    unreachable!("the ball of radius diam(X) recovers the full norm")
}

/// Subsets `D ⊆ Y` probed by [`uniform_band_profile`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetFamily {
    pub subsets: Vec<Vec<usize>>,
}

impl SubsetFamily {
    /// Singletons, all of `Y`, complements of singletons, and `random`
    /// subsets drawn with inclusion probability ½ from a ChaCha8 stream.
    pub fn standard(n: usize, random: usize, seed: u64) -> Self {
        let mut subsets: Vec<Vec<usize>> = (0..n).map(|y| vec![y]).collect();
        subsets.push((0..n).collect());
        subsets.extend((0..n).map(|y| (0..n).filter(|&z| z != y).collect()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random {
            subsets.push((0..n).filter(|_| rng.random_bool(0.5)).collect());
        }
        SubsetFamily { subsets }
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

/// Estimated band approximability of `{v q_D v*}` over a subset family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandProfile {
    pub family_size: usize,
    /// `sup_D ‖v q_D v* - band_truncate(v q_D v*, s)‖` over the family.
    pub estimate: ScaleMap<f64>,
    /// Smallest probed `s` with estimate at most `ε`.
    pub s_of_eps: Vec<(f64, Option<f64>)>,
}

pub fn uniform_band_profile(v: &Operator, s_values: &[f64], family: &SubsetFamily, eps_values: &[f64]) -> Result<BandProfile> {
    require_unitary(v)?;
    let ny = v.ncols();
    if let Some(bad) = family.subsets.iter().flatten().find(|&&y| y >= ny) {
        return Err(Error::IndexOutOfRange { index: *bad, size: ny });
    }
    let x_space = v.codomain();
    let per_subset = family
        .subsets
        .par_iter()
        .map(|d| {
            let cols = v.entries().select_columns(d);
            let e = &cols * cols.adjoint();
            let op = Operator::square(x_space, e)?;
            s_values
                .iter()
                .map(|&s| compressed_norm(op.sub(&op.band_truncate(s)?)?.entries()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate = ScaleMap(
        s_values
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, per_subset.iter().map(|row| row[i]).fold(0.0, f64::max)))
            .collect(),
    );
    let mut sorted: Vec<(f64, f64)> = estimate.0.clone();
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
    let s_of_eps = eps_values
        .iter()
        .map(|&eps| (eps, sorted.iter().find(|(_, e)| *e <= eps).map(|(s, _)| *s)))
        .collect();
    Ok(BandProfile {
        family_size: family.len(),
        estimate,
        s_of_eps,
    })
}

/// Inputs of [`recover_bijection`] beyond the unitary and the spaces.
#[derive(Clone, Debug, Default)]
pub struct RecoveryOptions {
    /// δ grid; empty means [`default_delta_grid`].
    pub grid: Vec<f64>,
    /// Scales for the band and quasi-locality profiles; empty means [`default_scales`].
    pub s_values: Vec<f64>,
    /// A planted bijection `X -> Y` to measure displacement against.
    pub planted: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub delta: f64,
    pub predicted_delta: f64,
    pub f: Vec<usize>,
    pub g: Vec<usize>,
    pub h: Vec<usize>,
    /// Largest diameter of a support set `X_{y,δ}`.
    pub support_diameter: f64,
    /// `max_x max {d(x, x') : x' ∈ X_{h(x),δ}}`.
    pub containment_radius: f64,
    /// `‖u·v - w*‖_max`, zero when `u` conjugates `v l∞(Y) v*` onto `l∞(X)`.
    pub conjugation_error: f64,
    pub unitarity_defect: f64,
    pub band_error: ScaleMap<f64>,
    pub ql: ScaleMap<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub displacement: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Recovery {
    pub report: RecoveryReport,
    pub u: Operator,
}

/// Chooses δ, matches `Y` into `X` and `X` into `Y` along the support sets,
/// combines the two injections into `h`, and forms `u = w*v*` where
/// `w δ_x = δ_{h(x)}`.
pub fn recover_bijection(
    v: &Operator,
    x_space: &Arc<FiniteSpace>,
    y_space: &Arc<FiniteSpace>,
    options: &RecoveryOptions,
) -> Result<Recovery> {
    if x_space.len() != y_space.len() {
        return Err(Error::SpaceMismatch(format!(
            "|X| = {} but |Y| = {}",
            x_space.len(),
            y_space.len()
        )));
    }
    if v.nrows() != x_space.len() || v.ncols() != y_space.len() {
        return Err(Error::SpaceMismatch("operator shape does not match the spaces".into()));
    }
    let v = Operator::new(x_space.clone(), y_space.clone(), v.entries().clone())?;
    let grid = if options.grid.is_empty() {
        default_delta_grid()
    } else {
        options.grid.clone()
    };
    let (delta, f, g) = match select_delta(&v, &grid)? {
        DeltaSelection::Selected { delta, f, g } => (delta, f, g),
        DeltaSelection::Failed { smallest } => {
            return Err(Error::Infeasible(format!(
                "no delta down to {smallest} satisfies Hall's condition on both sides"
            )))
        }
    };
    let h = konig_csb(&f, &g)?;
    let sets = support_sets_unchecked(&v, delta);
    let containment_radius = h
        .iter()
        .enumerate()
        .flat_map(|(x, &hx)| sets.x_of_y[hx].iter().map(move |&z| (x, z)))
        .map(|(x, z)| x_space.d(x, z))
        .fold(0.0, f64::max);

    let w = Operator::from_map(x_space, y_space, &h)?;
    let u = w.adjoint().compose(&v.adjoint())?;
    let conjugation_error = u.compose(&v)?.max_diff(&w.adjoint());
    let s_values = if options.s_values.is_empty() {
        default_scales(x_space)
    } else {
        options.s_values.clone()
    };
    let ql = quasilocality_profile(&u, &s_values)?;
    let band_error = ScaleMap(ql.0.iter().map(|&(s, [_, up])| (s, up)).collect());
    let displacement = match &options.planted {
        Some(sigma) => {
            if sigma.len() != h.len() || sigma.iter().any(|&y| y >= y_space.len()) {
                return Err(Error::Argument("planted map has the wrong shape".into()));
            }
            Some(
                h.iter()
                    .zip(sigma)
                    .map(|(&a, &b)| y_space.d(a, b))
                    .fold(0.0, f64::max),
            )
        }
        None => None,
    };
    let report = RecoveryReport {
        delta,
        predicted_delta: predicted_delta(x_space.len()),
        f,
        g,
        h,
        support_diameter: sets.max_diameter(),
        containment_radius,
        conjugation_error,
        unitarity_defect: u.unitarity_defect(),
        band_error,
        ql,
        displacement,
    };
    Ok(Recovery { report, u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::exotic_frame;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    /// `v` with `v_{x,σ(x)} = 1`, i.e. `v δ_{σ(x)} = δ_x`.
    fn planted(space: &Arc<FiniteSpace>, sigma: &[usize]) -> Operator {
        Operator::from_map(space, space, sigma).unwrap().adjoint()
    }

    fn dft(space: &Arc<FiniteSpace>) -> Operator {
        let n = space.len();
        let scale = 1.0 / (n as f64).sqrt();
        let m = DMatrix::from_fn(n, n, |r, k| {
            C64::from_polar(scale, 2.0 * std::f64::consts::PI * (r * k) as f64 / n as f64)
        });
        Operator::square(space, m).unwrap()
    }

    #[test]
    fn support_set_examples() {
        let s = Arc::new(FiniteSpace::interval(4).unwrap());
        let sigma = [2, 0, 3, 1];
        let v = planted(&s, &sigma);
        let sets = support_sets(&v, 0.5).unwrap();
        for x in 0..4 {
            assert_eq!(sets.x_of_y[sigma[x]], vec![x]);
            assert_eq!(sets.y_of_x[x], vec![sigma[x]]);
        }
        assert!(support_sets(&v, 1.5).unwrap().x_of_y.iter().all(Vec::is_empty));
        assert!(support_sets(&v, 0.0).is_err());
        assert!(support_sets(&Operator::forward_shift(&s), 0.5).is_err());

        let (sq, frame) = exotic_frame(2).unwrap();
        let sets = support_sets(frame.frame(), 0.4).unwrap();
        assert_eq!(sets.x_of_y, vec![vec![0, 1], vec![0, 1], vec![2, 3], vec![2, 3]]);
        assert_eq!(sets.diameters, vec![3.0, 3.0, 7.0, 7.0]);
        assert_eq!(sq.len(), 4);
    }

    #[test]
    fn select_delta_examples() {
        let grid = default_delta_grid();
        let s = Arc::new(FiniteSpace::interval(4).unwrap());
        let v = planted(&s, &[1, 0, 3, 2]);
        assert!(matches!(select_delta(&v, &grid).unwrap(), DeltaSelection::Selected { delta, .. } if delta == 0.5));

        let (_, frame) = exotic_frame(3).unwrap();
        assert!(matches!(
            select_delta(frame.frame(), &grid).unwrap(),
            DeltaSelection::Selected { delta, .. } if delta == 0.5
        ));

        let spread = dft(&s);
        assert!(matches!(select_delta(&spread, &grid).unwrap(), DeltaSelection::Selected { delta, .. } if delta == 0.25));
        assert_eq!(
            select_delta(&spread, &[0.5]).unwrap(),
            DeltaSelection::Failed { smallest: 0.5 }
        );
        assert!(select_delta(&spread, &[0.25, 0.5]).is_err());
    }

    #[test]
    fn recover_permutation() {
        let s = Arc::new(FiniteSpace::interval(6).unwrap());
        let sigma = vec![1, 0, 3, 2, 5, 4];
        let v = planted(&s, &sigma);
        let opts = RecoveryOptions {
            planted: Some(sigma.clone()),
            ..Default::default()
        };
        let rec = recover_bijection(&v, &s, &s, &opts).unwrap();
        assert_eq!(rec.report.h, sigma);
        assert_eq!(rec.u.max_diff(&Operator::identity(&s)), 0.0);
        assert!(rec.report.band_error.values().all(|&e| e == 0.0));
        assert_eq!(rec.report.displacement, Some(0.0));
        assert_eq!(rec.report.conjugation_error, 0.0);
    }

    #[test]
    fn recover_exotic_frame() {
        let (sq, frame) = exotic_frame(3).unwrap();
        let rec = recover_bijection(frame.frame(), &sq, &sq, &RecoveryOptions::default()).unwrap();
        for (x, &hx) in rec.report.h.iter().enumerate() {
            assert_eq!(x / 2, hx / 2);
        }
        let max_block = (0..3).map(|m| sq.d(2 * m, 2 * m + 1)).fold(0.0, f64::max);
        assert!(rec.u.propagation().unwrap().unwrap() <= max_block);
        assert!(rec.report.conjugation_error < 1e-12);
    }

    #[test]
    fn quasilocality_examples() {
        let s = Arc::new(FiniteSpace::interval(6).unwrap());
        let d = Operator::diagonal(&s, &[c(1.0), c(-2.0), c(3.0), c(0.5), c(0.0), c(1.0)]);
        let prof = quasilocality_profile(&d, &[0.0, 1.0, 2.0]).unwrap();
        assert!(prof.values().all(|p| *p == [0.0, 0.0]));

        let shift = Operator::forward_shift(&s);
        let prof = quasilocality_profile(&shift, &[0.0, 1.0, 3.0]).unwrap();
        let p0 = prof.get(0.0).unwrap();
        assert!((p0[0] - 1.0).abs() < 1e-12 && (p0[1] - 1.0).abs() < 1e-12);
        assert_eq!(*prof.get(1.0).unwrap(), [0.0, 0.0]);
        assert_eq!(*prof.get(3.0).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn onl_examples() {
        let s = Arc::new(FiniteSpace::interval(5).unwrap());
        let d = Operator::diagonal(&s, &[c(1.0), c(-4.0), c(2.0), c(0.5), c(3.0)]);
        let w = onl_witness(&d, 0.1).unwrap();
        assert_eq!((w.radius, w.center), (0.0, 1));
        let mut e1 = DVector::zeros(5);
        e1[1] = c(1.0);
        assert!((&w.xi - e1).norm() < 1e-15);
        assert!((w.ratio - 1.0).abs() < 1e-15);

        let unit = Operator::matrix_unit(&s, 0, 3);
        let w = onl_witness(&unit, 0.5).unwrap();
        assert_eq!((w.radius, w.center), (0.0, 3));

        assert!(onl_witness(&Operator::zero(&s), 0.1).is_err());
        assert!(onl_witness(&d, 1.0).is_err());
    }

    #[test]
    fn band_profile_examples() {
        let s = Arc::new(FiniteSpace::interval(5).unwrap());
        let phases: Vec<C64> = (0..5).map(|k| C64::from_polar(1.0, k as f64)).collect();
        let fam = SubsetFamily::standard(5, 4, 7);
        assert_eq!(fam.len(), 5 + 1 + 5 + 4);
        let diag = Operator::diagonal(&s, &phases);
        let prof = uniform_band_profile(&diag, &[0.0, 1.0], &fam, &[0.1, 0.01]).unwrap();
        assert!(prof.estimate.values().all(|&e| e < 1e-12));
        assert_eq!(prof.s_of_eps, vec![(0.1, Some(0.0)), (0.01, Some(0.0))]);

        let v = planted(&s, &[2, 3, 4, 0, 1]);
        let prof = uniform_band_profile(&v, &[0.0, 1.0, 2.0, 3.0], &fam, &[0.01]).unwrap();
        assert_eq!(prof.s_of_eps, vec![(0.01, Some(0.0))]);

        let mut bigger = fam.clone();
        bigger.subsets.push(vec![0, 4]);
        let f = dft(&s);
        let small = uniform_band_profile(&f, &[0.0, 1.0, 2.0], &fam, &[]).unwrap();
        let large = uniform_band_profile(&f, &[0.0, 1.0, 2.0], &bigger, &[]).unwrap();
        for (a, b) in small.estimate.values().zip(large.estimate.values()) {
            assert!(b >= a);
        }
    }

    #[test]
    fn scale_map_serializes_as_object() {
        let m = ScaleMap(vec![(0.0, 1.5), (2.0, 0.25)]);
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"0":1.5,"2":0.25}"#);
        assert!(predicted_delta(10) > 0.0 && predicted_delta(10) < 1e-4);
        assert_eq!(default_scales(&FiniteSpace::interval(10).unwrap()), vec![0.0, 1.0, 2.0, 4.0, 8.0, 9.0]);
    }
}
