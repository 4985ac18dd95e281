//! Dense numerical kernels shared by the operator modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Above this size the spectral norm switches from a dense eigensolve to power iteration.
pub const DENSE_NORM_LIMIT: usize = 64;

pub const MIN_POWER_ITERATIONS: usize = 500;

/// Deterministic, generic starting vector for power iteration.
fn seed_vector(k: usize) -> DVector<C64> {
    let v = DVector::from_fn(k, |i, _| {
        let t = i as f64;
        C64::new(1.0 + 0.5 * (1.7 * t + 0.3).sin(), 0.25 * (0.9 * t + 0.1).cos())
    });
    let norm = v.norm();
    v / C64::from(norm)
}

/// Largest singular value via a Hermitian eigensolve of the smaller Gram matrix.
pub fn dense_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    top.max(0.0).sqrt()
}

/// Largest singular value by power iteration on `m* m`, stopping when the
/// Rayleigh quotient changes by less than `tol` (relative). At most
/// `max(10 k, MIN_POWER_ITERATIONS)` iterations are run, `k` the iterated dimension.
pub fn power_norm(m: &DMatrix<C64>, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance {tol} must be positive")));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let wide = m.nrows() < m.ncols();
    let (fwd, back) = if wide {
        (m.adjoint(), m.clone())
    } else {
        (m.clone(), m.adjoint())
    };
    let k = fwd.ncols();
    let cap = (10 * k).max(MIN_POWER_ITERATIONS);
    let mut x = seed_vector(k);
    let mut lambda = 0.0f64;
    for _ in 0..cap {
        let y = &fwd * &x;
        let z = &back * &y;
        let next = y.norm_squared();
        let zn = z.norm();
        if zn == 0.0 {
            return Ok(0.0);
        }
        x = z / C64::from(zn);
        if (next - lambda).abs() <= tol * next {
            return Ok(next.sqrt());
        }
        lambda = next;
    }
    let y = &fwd * &x;
    let z = &back * &y;
    let residual = (z - &x * C64::from(lambda)).norm();
    Err(Error::NoConvergence {
        what: "power iteration",
        iterations: cap,
        residual,
    })
}

/// Operator norm of a dense matrix: exact eigensolve up to [`DENSE_NORM_LIMIT`],
/// power iteration beyond it.
pub fn matrix_norm(m: &DMatrix<C64>, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance {tol} must be positive")));
    }
    if m.nrows().min(m.ncols()) <= DENSE_NORM_LIMIT {
        Ok(dense_norm(m))
    } else {
        power_norm(m, tol)
    }
}

/// Top singular value and a unit right singular vector.
pub fn top_right_singular(m: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let gram = m.adjoint() * m;
    let eig = gram.symmetric_eigen();
    let (idx, &top) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty block");
    let v = eig.eigenvectors.column(idx).into_owned();
    (top.max(0.0).sqrt(), v)
}

/// Row-major flattening used for span computations.
pub fn flatten(m: &DMatrix<C64>) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Incremental basis of a subspace of `C^dim` kept in reduced echelon form:
/// every stored vector has a pivot coordinate equal to 1 where all the
/// other stored vectors vanish. Candidates are reduced against the pivots and
/// accepted when the remainder exceeds `cutoff` relative to the candidate's
/// own largest entry.
#[derive(Clone, Debug)]
pub struct SpanBasis {
    dim: usize,
    cutoff: f64,
    vectors: Vec<Vec<C64>>,
    pivots: Vec<usize>,
}

impl SpanBasis {
    pub fn new(dim: usize, cutoff: f64) -> Self {
        SpanBasis {
            dim,
            cutoff,
            vectors: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn reduce(&self, v: &[C64]) -> (Vec<C64>, f64) {
        assert_eq!(v.len(), self.dim, "vector length mismatch");
        let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut r = v.to_vec();
        for (vec, &p) in self.vectors.iter().zip(&self.pivots) {
            let c = r[p];
            if c != C64::new(0.0, 0.0) {
                for (ri, bi) in r.iter_mut().zip(vec) {
                    if *bi != C64::new(0.0, 0.0) {
                        *ri -= c * bi;
                    }
                }
                r[p] = C64::new(0.0, 0.0);
            }
        }
        (r, scale)
    }

    /// Whether `v` lies in the span (within the cutoff).
    pub fn contains(&self, v: &[C64]) -> bool {
        let (r, scale) = self.reduce(v);
        let rest = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        rest <= self.cutoff * scale.max(f64::MIN_POSITIVE)
    }

    /// Adds `v` if it is independent of the current span. Returns whether it was added.
    pub fn insert(&mut self, v: &[C64]) -> bool {
        let (mut r, scale) = self.reduce(v);
        if scale == 0.0 {
            return false;
        }
        let (p, pivot_val) = r
            .iter()
            .enumerate()
            .map(|(i, z)| (i, z.norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonzero dimension");
        if pivot_val <= self.cutoff * scale {
            return false;
        }
        let inv = C64::new(1.0, 0.0) / r[p];
        let floor = 1e-15 * scale;
        for z in r.iter_mut() {
            *z *= inv;
            if z.norm() * pivot_val < floor {
                *z = C64::new(0.0, 0.0);
            }
        }
        r[p] = C64::new(1.0, 0.0);
        for vec in self.vectors.iter_mut() {
            let c = vec[p];
            if c != C64::new(0.0, 0.0) {
                for (vi, ri) in vec.iter_mut().zip(&r) {
                    if *ri != C64::new(0.0, 0.0) {
                        *vi -= c * ri;
                    }
                }
                vec[p] = C64::new(0.0, 0.0);
            }
        }
        self.vectors.push(r);
        self.pivots.push(p);
        true
    }
}
