//! Operators on `l2` of a finite metric space, viewed as matrices indexed by points.
//!
//! Entry `a[(x, y)] = <δ_x, a δ_y>`. Magnitudes below [`ZERO_THRESHOLD`] are
//! structural zeros for every support-based computation (support, propagation,
//! single-diagonal tests), so these stay stable under rounding.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coarse_space::{Entourage, FiniteSpace};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};

pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Default relative tolerance for spectral norms.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A linear map `l2(domain) -> l2(codomain)`.
#[derive(Clone, Debug)]
pub struct Operator {
    codomain: Arc<FiniteSpace>,
    domain: Arc<FiniteSpace>,
    entries: DMatrix<C64>,
}

/// An element of `l∞(X)`; promotes to a propagation-zero operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalFunction {
    pub values: Vec<C64>,
}

impl DiagonalFunction {
    pub fn to_operator(&self, space: &Arc<FiniteSpace>) -> Result<Operator> {
        if self.values.len() != space.len() {
            return Err(Error::SpaceMismatch(format!(
                "{} values for {} points",
                self.values.len(),
                space.len()
            )));
        }
        Ok(Operator::diagonal(space, &self.values))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Operator {
    pub fn new(codomain: Arc<FiniteSpace>, domain: Arc<FiniteSpace>, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != codomain.len() || entries.ncols() != domain.len() {
            return Err(Error::SpaceMismatch(format!(
                "{}x{} matrix for spaces of size {} and {}",
                entries.nrows(),
                entries.ncols(),
                codomain.len(),
                domain.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Argument("operator has non-finite entries".into()));
        }
        Ok(Operator {
            codomain,
            domain,
            entries,
        })
    }

    pub fn square(space: &Arc<FiniteSpace>, entries: DMatrix<C64>) -> Result<Self> {
        Self::new(space.clone(), space.clone(), entries)
    }

    fn same_shape(&self, entries: DMatrix<C64>) -> Operator {
        Operator {
            codomain: self.codomain.clone(),
            domain: self.domain.clone(),
            entries,
        }
    }

    pub fn zero(space: &Arc<FiniteSpace>) -> Self {
        let n = space.len();
        Operator {
            codomain: space.clone(),
            domain: space.clone(),
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(space: &Arc<FiniteSpace>) -> Self {
        let n = space.len();
        Operator {
            codomain: space.clone(),
            domain: space.clone(),
            entries: DMatrix::identity(n, n),
        }
    }

    /// Multiplication operator by `values`. Panics if the length is wrong.
    pub fn diagonal(space: &Arc<FiniteSpace>, values: &[C64]) -> Self {
        assert_eq!(values.len(), space.len(), "diagonal length");
        let n = space.len();
        Operator {
            codomain: space.clone(),
            domain: space.clone(),
            entries: DMatrix::from_fn(n, n, |r, c| if r == c { values[r] } else { ZERO }),
        }
    }

    /// Coordinate projection `p_C`.
    pub fn projection(space: &Arc<FiniteSpace>, subset: &[usize]) -> Self {
        let mut values = vec![ZERO; space.len()];
        for &x in subset {
            values[x] = ONE;
        }
        Self::diagonal(space, &values)
    }

    /// The matrix unit `e_{xy}`, sending `δ_y` to `δ_x`.
    pub fn matrix_unit(space: &Arc<FiniteSpace>, x: usize, y: usize) -> Self {
        let mut op = Self::zero(space);
        op.entries[(x, y)] = ONE;
        op
    }

    /// `w δ_x = δ_{map[x]}` as an operator `l2(domain) -> l2(codomain)`.
    pub fn from_map(domain: &Arc<FiniteSpace>, codomain: &Arc<FiniteSpace>, map: &[usize]) -> Result<Self> {
        if map.len() != domain.len() {
            return Err(Error::SpaceMismatch("map length differs from domain size".into()));
        }
        let mut entries = DMatrix::zeros(codomain.len(), domain.len());
        for (x, &y) in map.iter().enumerate() {
            if y >= codomain.len() {
                return Err(Error::IndexOutOfRange {
                    index: y,
                    size: codomain.len(),
                });
            }
            entries[(y, x)] = ONE;
        }
        Self::new(codomain.clone(), domain.clone(), entries)
    }

    /// Cyclic shift `δ_k -> δ_{k+1 mod n}`.
    pub fn cyclic_shift(space: &Arc<FiniteSpace>) -> Self {
        let n = space.len();
        let map: Vec<usize> = (0..n).map(|k| (k + 1) % n).collect();
        Self::from_map(space, space, &map).expect("valid map")
    }

    /// Unilateral shift `δ_k -> δ_{k+1}` for `k < n-1`, `δ_{n-1} -> 0`.
    pub fn forward_shift(space: &Arc<FiniteSpace>) -> Self {
        let n = space.len();
        let mut op = Self::zero(space);
        for k in 0..n.saturating_sub(1) {
            op.entries[(k + 1, k)] = ONE;
        }
        op
    }

    /// Flip `δ_k -> δ_{n-1-k}`.
    pub fn flip(space: &Arc<FiniteSpace>) -> Self {
        let n = space.len();
        let map: Vec<usize> = (0..n).map(|k| n - 1 - k).collect();
        Self::from_map(space, space, &map).expect("valid map")
    }

    pub fn codomain(&self) -> &Arc<FiniteSpace> {
        &self.codomain
    }

    pub fn domain(&self) -> &Arc<FiniteSpace> {
        &self.domain
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn entry(&self, x: usize, y: usize) -> C64 {
        self.entries[(x, y)]
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.codomain.same_as(&self.domain)
    }

    fn require_square(&self) -> Result<()> {
        if self.nrows() != self.ncols() {
            return Err(Error::NotSquare {
                rows: self.nrows(),
                cols: self.ncols(),
            });
        }
        if !self.is_square() {
            return Err(Error::SpaceMismatch("domain and codomain differ".into()));
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            codomain: self.domain.clone(),
            domain: self.codomain.clone(),
            entries: self.entries.adjoint(),
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        if !self.domain.same_as(&other.codomain) {
            return Err(Error::SpaceMismatch("cannot compose: inner spaces differ".into()));
        }
        Ok(Operator {
            codomain: self.codomain.clone(),
            domain: other.domain.clone(),
            entries: &self.entries * &other.entries,
        })
    }

    fn check_same_spaces(&self, other: &Operator) -> Result<()> {
        if !self.codomain.same_as(&other.codomain) || !self.domain.same_as(&other.domain) {
            return Err(Error::SpaceMismatch("operators act between different spaces".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_same_spaces(other)?;
        Ok(self.same_shape(&self.entries + &other.entries))
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.check_same_spaces(other)?;
        Ok(self.same_shape(&self.entries - &other.entries))
    }

    pub fn scale(&self, c: C64) -> Operator {
        self.same_shape(&self.entries * c)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |a*a - I|` entrywise; also checks `a a* = I` when square.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.ncols();
        let m = self.nrows();
        let a = (self.entries.adjoint() * &self.entries - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let b = (&self.entries * self.entries.adjoint() - DMatrix::<C64>::identity(m, m))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        a.max(b)
    }

    pub fn require_unitary(&self, tol: f64) -> Result<()> {
        let deviation = self.unitarity_defect();
        if self.nrows() != self.ncols() || deviation > tol {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(())
    }

    /// Entrywise distance `max |a_xy - b_xy|`.
    pub fn max_diff(&self, other: &Operator) -> f64 {
        (&self.entries - &other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `{(x, y) : |a_xy| > ZERO_THRESHOLD}`.
    pub fn support(&self) -> Result<Entourage> {
        self.require_square()?;
        let n = self.nrows();
        let pairs = (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .filter(|&(x, y)| self.entries[(x, y)].norm() > ZERO_THRESHOLD);
        Entourage::new(n, pairs)
    }

    /// `max d(x, y)` over the support; `None` for the zero operator.
    pub fn propagation(&self) -> Result<Option<f64>> {
        self.require_square()?;
        let n = self.nrows();
        let mut prop: Option<f64> = None;
        for x in 0..n {
            for y in 0..n {
                if self.entries[(x, y)].norm() > ZERO_THRESHOLD {
                    let d = self.codomain.d(x, y);
                    prop = Some(prop.map_or(d, |p| p.max(d)));
                }
            }
        }
        Ok(prop)
    }

    /// Zeroes every entry with `d(x, y) > s`.
    pub fn band_truncate(&self, s: f64) -> Result<Operator> {
        self.require_square()?;
        if !(s >= 0.0) {
            return Err(Error::Argument(format!("band width {s} must be nonnegative")));
        }
        let space = &self.codomain;
        let entries = DMatrix::from_fn(self.nrows(), self.ncols(), |x, y| {
            if space.d(x, y) <= s {
                self.entries[(x, y)]
            } else {
                ZERO
            }
        });
        Ok(self.same_shape(entries))
    }

    /// The diagonal of `a`, the canonical conditional expectation onto `l∞(X)`.
    pub fn diag_expectation(&self) -> Result<DiagonalFunction> {
        self.require_square()?;
        Ok(DiagonalFunction {
            values: (0..self.nrows()).map(|x| self.entries[(x, x)]).collect(),
        })
    }

    /// Operator norm to relative tolerance `tol`.
    pub fn spectral_norm(&self, tol: f64) -> Result<f64> {
        linalg::matrix_norm(&self.entries, tol)
    }

    /// Operator norm at [`NORM_TOL`].
    pub fn norm(&self) -> Result<f64> {
        self.spectral_norm(NORM_TOL)
    }

    /// At most one structural nonzero in each row and column.
    pub fn is_single_diagonal(&self) -> bool {
        let mut rows = vec![false; self.nrows()];
        let mut cols = vec![false; self.ncols()];
        for x in 0..self.nrows() {
            for y in 0..self.ncols() {
                if self.entries[(x, y)].norm() > ZERO_THRESHOLD {
                    if rows[x] || cols[y] {
                        return false;
                    }
                    rows[x] = true;
                    cols[y] = true;
                }
            }
        }
        true
    }

    /// For a single-diagonal operator the norm is the largest entry magnitude.
    pub fn single_diagonal_norm(&self) -> Result<f64> {
        if !self.is_single_diagonal() {
            return Err(Error::Precondition("operator is not single-diagonal".into()));
        }
        Ok(self.max_abs())
    }

    /// Keeps the entries with `|a_xy| >= eps` of a single-diagonal operator.
    pub fn eps_truncate(&self, eps: f64) -> Result<Operator> {
        if !(eps > 0.0) {
            return Err(Error::Argument(format!("epsilon {eps} must be positive")));
        }
        if !self.is_single_diagonal() {
            return Err(Error::Precondition("operator is not single-diagonal".into()));
        }
        let entries = self.entries.map(|z| if z.norm() >= eps { z } else { ZERO });
        Ok(self.same_shape(entries))
    }

    /// Whether `a d a*` and `a* d a` are diagonal for every diagonal `d`,
    /// which holds exactly when `a` is single-diagonal.
    pub fn normalizes_diag(&self) -> Result<bool> {
        self.require_square()?;
        Ok(self.is_single_diagonal())
    }
}

/// `v^E`: ones on `E`, zeros elsewhere. Requires slice bound at most one.
pub fn partial_isometry(space: &Arc<FiniteSpace>, entourage: &Entourage) -> Result<Operator> {
    if entourage.n() != space.len() {
        return Err(Error::SpaceMismatch("entourage and space sizes differ".into()));
    }
    let k = entourage.slice_bound();
    if k > 1 {
        return Err(Error::SliceBound(k));
    }
    let mut op = Operator::zero(space);
    for &(x, y) in entourage.pairs() {
        op.entries[(x, y)] = ONE;
    }
    Ok(op)
}

#[derive(Serialize, Deserialize)]
struct OperatorJson {
    codomain: FiniteSpace,
    domain: FiniteSpace,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = (0..self.nrows())
            .map(|r| {
                (0..self.ncols())
                    .map(|c| {
                        let z = self.entries[(r, c)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        OperatorJson {
            codomain: (*self.codomain).clone(),
            domain: (*self.domain).clone(),
            entries,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = OperatorJson::deserialize(deserializer)?;
        let rows = raw.entries.len();
        let cols = raw.entries.first().map_or(0, Vec::len);
        if raw.entries.iter().any(|r| r.len() != cols) {
            return Err(serde::de::Error::custom("ragged entries"));
        }
        let entries = DMatrix::from_fn(rows, cols, |r, c| {
            let [re, im] = raw.entries[r][c];
            C64::new(re, im)
        });
        let codomain = Arc::new(raw.codomain);
        let domain = if raw.domain == *codomain {
            codomain.clone()
        } else {
            Arc::new(raw.domain)
        };
        Operator::new(codomain, domain, entries).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn interval(n: usize) -> Arc<FiniteSpace> {
        Arc::new(FiniteSpace::interval(n).unwrap())
    }

    #[test]
    fn support_examples() {
        let s = interval(4);
        assert_eq!(Operator::identity(&s).support().unwrap(), Entourage::diagonal(4));
        let shift = Operator::cyclic_shift(&s).support().unwrap();
        assert_eq!(shift, Entourage::new(4, (0..4).map(|k| ((k + 1) % 4, k))).unwrap());
        assert!(Operator::zero(&s).support().unwrap().is_empty());
        let rect = Operator::new(s.clone(), interval(3), DMatrix::zeros(4, 3)).unwrap();
        assert!(matches!(rect.support(), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn propagation_examples() {
        let s = interval(10);
        assert_eq!(Operator::identity(&s).propagation().unwrap(), Some(0.0));
        assert_eq!(Operator::forward_shift(&s).propagation().unwrap(), Some(1.0));
        let expected = (0..10).map(|k: i32| (k - (9 - k)).abs()).max().unwrap() as f64;
        assert_eq!(Operator::flip(&s).propagation().unwrap(), Some(expected));
        assert_eq!(Operator::zero(&s).propagation().unwrap(), None);
        let cyc = Arc::new(FiniteSpace::cycle(10).unwrap());
        assert_eq!(Operator::cyclic_shift(&cyc).propagation().unwrap(), Some(1.0));
    }

    #[test]
    fn band_truncate_examples() {
        let s = interval(4);
        let shift = Operator::forward_shift(&s);
        assert_eq!(shift.band_truncate(1.0).unwrap().max_diff(&shift), 0.0);
        assert_eq!(shift.band_truncate(0.0).unwrap().max_abs(), 0.0);
        let tri = Operator::square(&s, DMatrix::from_fn(4, 4, |r, col| {
            if r.abs_diff(col) <= 1 { c(1.0 + r as f64, col as f64) } else { ZERO }
        }))
        .unwrap();
        assert_eq!(tri.band_truncate(1.0).unwrap().max_diff(&tri), 0.0);
        assert!(tri.band_truncate(-1.0).is_err());
    }

    #[test]
    fn diag_expectation_examples() {
        let s = interval(3);
        let d = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)];
        assert_eq!(Operator::diagonal(&s, &d).diag_expectation().unwrap().values, d);
        assert!(Operator::cyclic_shift(&s)
            .diag_expectation()
            .unwrap()
            .values
            .iter()
            .all(|z| z.norm() == 0.0));
        let s2 = interval(2);
        let ones = Operator::square(&s2, DMatrix::from_element(2, 2, ONE)).unwrap();
        assert_eq!(ones.diag_expectation().unwrap().values, vec![ONE, ONE]);
    }

    #[test]
    fn spectral_norm_examples() {
        let s = interval(3);
        let v = [c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)];
        let proj = Operator::square(&s, DMatrix::from_fn(3, 3, |r, col| v[r] * v[col].conj() / 3.0)).unwrap();
        assert!((proj.norm().unwrap() - 1.0).abs() < 1e-12);
        let d = Operator::diagonal(&s, &[c(3.0, 0.0), c(4.0, 0.0), c(-5.0, 0.0)]);
        assert!((d.norm().unwrap() - 5.0).abs() < 1e-12);
        assert!(d.spectral_norm(0.0).is_err());
    }

    #[test]
    fn single_diagonal_examples() {
        let s = interval(3);
        assert!(Operator::cyclic_shift(&s).is_single_diagonal());
        assert!(Operator::identity(&s).is_single_diagonal());
        let mut two = Operator::zero(&s);
        two.entries[(0, 0)] = ONE;
        two.entries[(0, 2)] = ONE;
        assert!(!two.is_single_diagonal());
        assert!(two.single_diagonal_norm().is_err());

        let mut a = Operator::zero(&s);
        a.entries[(0, 1)] = c(3.0, 0.0);
        a.entries[(2, 0)] = c(0.0, 4.0);
        assert_eq!(a.single_diagonal_norm().unwrap(), 4.0);
        assert!((a.norm().unwrap() - 4.0).abs() < 1e-10);
        assert_eq!(Operator::identity(&s).single_diagonal_norm().unwrap(), 1.0);
        assert_eq!(Operator::zero(&s).single_diagonal_norm().unwrap(), 0.0);
    }

    #[test]
    fn partial_isometry_examples() {
        let s = interval(3);
        let id = partial_isometry(&s, &Entourage::diagonal(3)).unwrap();
        assert_eq!(id.max_diff(&Operator::identity(&s)), 0.0);
        let unit = partial_isometry(&s, &Entourage::new(3, [(0, 1)]).unwrap()).unwrap();
        assert_eq!(unit.max_diff(&Operator::matrix_unit(&s, 0, 1)), 0.0);
        let perm = Entourage::new(3, [(0, 2), (1, 0), (2, 1)]).unwrap();
        let p = partial_isometry(&s, &perm).unwrap();
        assert!(p.unitarity_defect() < 1e-15);
        assert!(matches!(
            partial_isometry(&s, &Entourage::full(3)),
            Err(Error::SliceBound(3))
        ));
    }

    #[test]
    fn eps_truncate_examples() {
        let s = interval(3);
        let a = Operator::diagonal(&s, &[c(1.0, 0.0), c(0.3, 0.0), c(0.8, 0.0)]);
        let t = a.eps_truncate(0.5).unwrap();
        assert_eq!(
            t.diag_expectation().unwrap().values,
            vec![c(1.0, 0.0), ZERO, c(0.8, 0.0)]
        );
        assert_eq!(a.eps_truncate(2.0).unwrap().max_abs(), 0.0);
        assert!((a.sub(&t).unwrap().norm().unwrap() - 0.3).abs() < 1e-12);
        assert!(a.eps_truncate(0.0).is_err());
    }

    #[test]
    fn normalizer_examples() {
        let s = interval(3);
        let phases = Operator::diagonal(&s, &[c(0.0, 1.0), c(-1.0, 0.0), C64::from_polar(1.0, 0.3)]);
        let pp = Operator::cyclic_shift(&s).compose(&phases).unwrap();
        assert!(pp.normalizes_diag().unwrap());
        let bad = Operator::matrix_unit(&s, 0, 1).add(&Operator::matrix_unit(&s, 0, 2)).unwrap();
        assert!(!bad.normalizes_diag().unwrap());
        assert!(phases.normalizes_diag().unwrap());
    }

    #[test]
    fn flip_shift_identity_on_cycle() {
        let s = Arc::new(FiniteSpace::cycle(7).unwrap());
        let flip = Operator::flip(&s);
        let shift = Operator::cyclic_shift(&s);
        let lhs = flip.compose(&shift).unwrap().compose(&flip.adjoint()).unwrap();
        assert_eq!(lhs.max_diff(&shift.adjoint()), 0.0);
    }

    #[test]
    fn operator_json_roundtrip() {
        let s = interval(2);
        let a = Operator::square(&s, DMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), ZERO, c(0.0, -1.0), ONE])).unwrap();
        let text = serde_json::to_string(&a).unwrap();
        assert!(text.contains(r#""entries":[[[1.0,2.0],[0.0,0.0]],[[0.0,-1.0],[1.0,0.0]]]"#));
        let back: Operator = serde_json::from_str(&text).unwrap();
        assert_eq!(back.max_diff(&a), 0.0);
        assert!(back.is_square());
    }
}
