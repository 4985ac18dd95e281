//! Cartan-pair checks at matrix scale.
//!
//! A [`MasaFrame`] presents the masa `B = V·Diag·V*` through a unitary frame
//! `V`. Span computations (generated *-algebras, commutants) are exact linear
//! algebra on row-major flattened matrices with a relative cutoff of
//! [`RANK_CUTOFF`].

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::band_ops::{partial_isometry, DiagonalFunction, Operator, ZERO_THRESHOLD};
use crate::coarse_space::{Entourage, FiniteSpace};
use crate::error::{Error, Result};
use crate::linalg::{flatten, SpanBasis, C64};

pub const RANK_CUTOFF: f64 = 1e-9;

/// Allowed entrywise deviation of `V*V` from the identity.
pub const FRAME_TOL: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Splits `E` into disjoint parts meeting every row and column at most once.
///
/// Each part is a maximal such subset of what remains, built by scanning the
/// remaining pairs in lexicographic order. A pair left out of part `i` shares a
/// row or a column with a member of part `i`, so no pair waits longer than
/// `2k - 1` rounds when `k = slice_bound(E)`.
pub fn greedy_decompose(entourage: &Entourage) -> Vec<Entourage> {
    let n = entourage.n();
    let mut remaining: Vec<(usize, usize)> = entourage.pairs().to_vec();
    let mut parts = Vec::new();
    while !remaining.is_empty() {
        let mut row_used = vec![false; n];
        let mut col_used = vec![false; n];
        let mut part = Vec::new();
        let mut rest = Vec::new();
        for (x, y) in remaining {
            if !row_used[x] && !col_used[y] {
                row_used[x] = true;
                col_used[y] = true;
                part.push((x, y));
            } else {
                rest.push((x, y));
            }
        }
        parts.push(Entourage::new(n, part).expect("indices already validated"));
        remaining = rest;
    }
    parts
}

/// `a ≈ f·v` for a normalizer `a` of the diagonal.
#[derive(Clone, Debug)]
pub struct NormalizerFactor {
    pub f: DiagonalFunction,
    pub v: Operator,
    /// `‖a - f·v‖`, the largest dropped entry.
    pub error: f64,
}

/// Factors a single-diagonal `a` as `f·v^E` with `E = {|a_xy| >= eps}` and
/// `f(x) = a_xy` for the unique nonzero entry in row `x`.
pub fn factor_normalizer(a: &Operator, eps: f64) -> Result<NormalizerFactor> {
    if !a.normalizes_diag()? {
        return Err(Error::Precondition("operator does not normalize the diagonal".into()));
    }
    let truncated = a.eps_truncate(eps)?;
    let space = a.codomain().clone();
    let support = truncated.support()?;
    let v = partial_isometry(&space, &support)?;
    let n = space.len();
    let values = (0..n)
        .map(|x| {
            (0..n)
                .map(|y| a.entry(x, y))
                .find(|z| z.norm() > ZERO_THRESHOLD)
                .unwrap_or(ZERO)
        })
        .collect();
    let f = DiagonalFunction { values };
    let fv = f.to_operator(&space)?.compose(&v)?;
    let error = a.sub(&fv)?.single_diagonal_norm()?;
    Ok(NormalizerFactor { f, v, error })
}

/// A linear span of operators on one space, with a basis kept independent.
#[derive(Clone, Debug)]
pub struct AlgebraSpan {
    space: Arc<FiniteSpace>,
    basis: Vec<Operator>,
    echelon: SpanBasis,
    self_adjoint: bool,
}

impl AlgebraSpan {
    /// Linear span of `ops` (no products taken).
    pub fn from_operators(space: &Arc<FiniteSpace>, ops: &[Operator]) -> Result<Self> {
        let n = space.len();
        let mut echelon = SpanBasis::new(n * n, RANK_CUTOFF);
        let mut basis = Vec::new();
        for op in ops {
            check_on_space(op, space)?;
            if echelon.insert(&flatten(op.entries())) {
                basis.push(op.clone());
            }
        }
        let self_adjoint = basis.iter().all(|b| echelon.contains(&flatten(&b.entries().adjoint())));
        Ok(AlgebraSpan {
            space: space.clone(),
            basis,
            echelon,
            self_adjoint,
        })
    }

    /// All of `M_n`, spanned by matrix units.
    pub fn full(space: &Arc<FiniteSpace>) -> Self {
        let n = space.len();
        let ops: Vec<_> = (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .map(|(x, y)| Operator::matrix_unit(space, x, y))
            .collect();
        Self::from_operators(space, &ops).expect("matrix units live on the space")
    }

    /// The diagonal algebra `l∞(X)`.
    pub fn diagonal(space: &Arc<FiniteSpace>) -> Self {
        let ops: Vec<_> = (0..space.len())
            .map(|x| Operator::matrix_unit(space, x, x))
            .collect();
        Self::from_operators(space, &ops).expect("matrix units live on the space")
    }

    /// The *-algebra generated by `gens` (and the diagonal, when asked).
    ///
    /// The span is grown breadth-first by left-multiplying every newly accepted
    /// element by every generator (adjoints included) until nothing new appears.
    pub fn generated(space: &Arc<FiniteSpace>, gens: &[Operator], include_diag: bool) -> Result<Self> {
        let n = space.len();
        let mut letters: Vec<Operator> = Vec::new();
        for g in gens {
            check_on_space(g, space)?;
            letters.push(g.clone());
            let adj = g.adjoint();
            if adj.max_diff(g) > ZERO_THRESHOLD {
                letters.push(adj);
            }
        }
        if include_diag {
            letters.extend((0..n).map(|x| Operator::matrix_unit(space, x, x)));
        }
        let mut echelon = SpanBasis::new(n * n, RANK_CUTOFF);
        let mut basis = Vec::new();
        let mut queue = VecDeque::new();
        for l in &letters {
            if echelon.insert(&flatten(l.entries())) {
                basis.push(l.clone());
                queue.push_back(l.clone());
            }
        }
        while let Some(b) = queue.pop_front() {
            if echelon.rank() == n * n {
                break;
            }
            for l in &letters {
                let word = l.compose(&b)?;
                if echelon.insert(&flatten(word.entries())) {
                    basis.push(word.clone());
                    queue.push_back(word);
                }
            }
        }
        Ok(AlgebraSpan {
            space: space.clone(),
            basis,
            echelon,
            self_adjoint: true,
        })
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Operator] {
        &self.basis
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    pub fn contains(&self, op: &Operator) -> bool {
        op.nrows() == self.space.len()
            && op.ncols() == self.space.len()
            && self.echelon.contains(&flatten(op.entries()))
    }

    /// Whether all basis elements commute pairwise.
    pub fn is_abelian(&self) -> bool {
        self.basis.iter().enumerate().all(|(i, a)| {
            self.basis[i + 1..].iter().all(|b| {
                let ab = a.entries() * b.entries();
                let ba = b.entries() * a.entries();
                (ab - ba).iter().all(|z| z.norm() <= RANK_CUTOFF)
            })
        })
    }

    /// Dimension of `{a ∈ self : [a, s] = 0 for every s in sub}`.
    pub fn commutant_dim(&self, sub: &AlgebraSpan) -> usize {
        let n2 = self.space.len().pow(2);
        let mut echelon = SpanBasis::new(n2 * sub.dim().max(1), RANK_CUTOFF);
        for a in &self.basis {
            let mut v = Vec::with_capacity(n2 * sub.dim());
            for s in &sub.basis {
                let comm = a.entries() * s.entries() - s.entries() * a.entries();
                v.extend(flatten(&comm));
            }
            if v.is_empty() {
                v = vec![ZERO; n2];
            }
            echelon.insert(&v);
        }
        self.dim() - echelon.rank()
    }
}

fn check_on_space(op: &Operator, space: &Arc<FiniteSpace>) -> Result<()> {
    if !op.codomain().same_as(space) || !op.domain().same_as(space) {
        return Err(Error::SpaceMismatch("operator does not act on the given space".into()));
    }
    Ok(())
}

/// Dimension of the *-algebra generated by `gens`, optionally with `l∞(X)` adjoined.
pub fn generated_dimension(space: &Arc<FiniteSpace>, gens: &[Operator], include_diag: bool) -> Result<usize> {
    Ok(AlgebraSpan::generated(space, gens, include_diag)?.dim())
}

/// A unitary frame `V` presenting the masa `B = V·Diag·V*`.
#[derive(Clone, Debug)]
pub struct MasaFrame {
    frame: Operator,
}

impl MasaFrame {
    pub fn new(frame: Operator) -> Result<Self> {
        if frame.nrows() != frame.ncols() || !frame.is_square() {
            return Err(Error::NotSquare {
                rows: frame.nrows(),
                cols: frame.ncols(),
            });
        }
        let n = frame.ncols();
        let deviation = (frame.entries().adjoint() * frame.entries() - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if deviation > FRAME_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(MasaFrame { frame })
    }

    /// `V = I`, presenting `l∞(X)` itself.
    pub fn standard(space: &Arc<FiniteSpace>) -> Self {
        MasaFrame {
            frame: Operator::identity(space),
        }
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        self.frame.codomain()
    }

    pub fn frame(&self) -> &Operator {
        &self.frame
    }

    pub fn len(&self) -> usize {
        self.frame.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `V·diag(values)·V*`.
    pub fn element(&self, values: &[C64]) -> Operator {
        let v = self.frame.entries();
        let d = DMatrix::from_fn(values.len(), values.len(), |r, c| if r == c { values[r] } else { ZERO });
        Operator::square(self.space(), v * d * v.adjoint()).expect("frame is square")
    }

    /// The rank-one projection onto the `x`-th frame vector.
    pub fn minimal_projection(&self, x: usize) -> Operator {
        let col = self.frame.entries().column(x);
        Operator::square(self.space(), col * col.adjoint()).expect("frame is square")
    }

    pub fn minimal_projections(&self) -> Vec<Operator> {
        (0..self.len()).map(|x| self.minimal_projection(x)).collect()
    }

    /// `V*·a·V`: the matrix of `a` in the frame basis.
    pub fn to_frame_coords(&self, a: &Operator) -> DMatrix<C64> {
        let v = self.frame.entries();
        v.adjoint() * a.entries() * v
    }

    pub fn masa_span(&self) -> AlgebraSpan {
        AlgebraSpan::from_operators(self.space(), &self.minimal_projections()).expect("same space")
    }

    /// Whether `a` normalizes `B`, i.e. is single-diagonal in the frame basis.
    pub fn is_normalizer(&self, a: &Operator) -> Result<bool> {
        check_on_space(a, self.space())?;
        let coords = Operator::square(self.space(), self.to_frame_coords(a))?;
        Ok(coords.is_single_diagonal())
    }
}

/// Whether the frame masa `B` is maximal abelian inside `ambient`.
///
/// `B` must lie in `ambient`, and the commutant of `B` in `ambient` (the
/// elements whose frame-basis matrix is diagonal) must have dimension `n`.
pub fn is_masa(frame: &MasaFrame, ambient: &AlgebraSpan) -> Result<bool> {
    let n = frame.len();
    if ambient.space().len() != n {
        return Err(Error::SpaceMismatch(format!(
            "frame of size {n}, ambient on {} points",
            ambient.space().len()
        )));
    }
    if !ambient.is_self_adjoint() {
        return Err(Error::Precondition("ambient span is not closed under adjoints".into()));
    }
    if !frame.minimal_projections().iter().all(|p| ambient.contains(p)) {
        return Ok(false);
    }
    let mut off_diag = SpanBasis::new(n * n, RANK_CUTOFF);
    for a in ambient.basis() {
        let mut coords = frame.to_frame_coords(a);
        for x in 0..n {
            coords[(x, x)] = ZERO;
        }
        let v = flatten(&coords);
        if v.iter().any(|z| z.norm() > 0.0) {
            off_diag.insert(&v);
        }
    }
    let commutant = ambient.dim() - off_diag.rank();
    Ok(commutant == n)
}

/// Generic masa test for an abelian self-adjoint span `sub` inside `ambient`.
pub fn is_masa_span(sub: &AlgebraSpan, ambient: &AlgebraSpan) -> Result<bool> {
    if sub.space().len() != ambient.space().len() {
        return Err(Error::SpaceMismatch("spans live on different spaces".into()));
    }
    if !ambient.is_self_adjoint() {
        return Err(Error::Precondition("ambient span is not closed under adjoints".into()));
    }
    if !sub.is_self_adjoint() || !sub.is_abelian() {
        return Ok(false);
    }
    if !sub.basis().iter().all(|s| ambient.contains(s)) {
        return Ok(false);
    }
    Ok(ambient.commutant_dim(sub) == sub.dim())
}

/// `V·E(V*·a·V)·V*`, the conditional expectation onto the frame masa.
pub fn masa_expectation(a: &Operator, frame: &MasaFrame) -> Result<Operator> {
    check_on_space(a, frame.space())?;
    let coords = frame.to_frame_coords(a);
    let diag: Vec<C64> = (0..frame.len()).map(|x| coords[(x, x)]).collect();
    Ok(frame.element(&diag))
}

/// Points `{k^2 : 1 <= k <= 2·blocks}` and the frame pairing `(2m-1)^2, (2m)^2`
/// into `ξ_m = (δ + δ')/√2`, `η_m = (δ - δ')/√2`.
pub fn exotic_frame(blocks: usize) -> Result<(Arc<FiniteSpace>, MasaFrame)> {
    if blocks == 0 {
        return Err(Error::Argument("at least one block is required".into()));
    }
    let space = Arc::new(FiniteSpace::squares(2 * blocks)?);
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let n = 2 * blocks;
    let v = DMatrix::from_fn(n, n, |r, c| {
        if r / 2 != c / 2 {
            ZERO
        } else if r % 2 == 1 && c % 2 == 1 {
            -h
        } else {
            h
        }
    });
    let frame = MasaFrame::new(Operator::square(&space, v)?)?;
    Ok((space, frame))
}

/// The blockwise `diag(1, -1)` in the standard basis.
pub fn coseparability_witness(blocks: usize) -> Result<Operator> {
    if blocks == 0 {
        return Err(Error::Argument("at least one block is required".into()));
    }
    let space = Arc::new(FiniteSpace::squares(2 * blocks)?);
    let values: Vec<C64> = (0..2 * blocks).map(|k| if k % 2 == 0 { ONE } else { -ONE }).collect();
    Ok(Operator::diagonal(&space, &values))
}

/// Largest deviation in `diag(a_m, b_m) = ½(a+b)·1 + s·½(a-b)·1` over all blocks.
pub fn witness_identity_error(witness: &Operator, a: &[C64], b: &[C64]) -> Result<f64> {
    let n = witness.nrows();
    if a.len() != b.len() || 2 * a.len() != n {
        return Err(Error::Argument("need one (a, b) pair per block".into()));
    }
    let space = witness.codomain();
    let target: Vec<C64> = (0..n).map(|k| if k % 2 == 0 { a[k / 2] } else { b[k / 2] }).collect();
    let sym: Vec<C64> = (0..n).map(|k| (a[k / 2] + b[k / 2]) * 0.5).collect();
    let anti: Vec<C64> = (0..n).map(|k| (a[k / 2] - b[k / 2]) * 0.5).collect();
    let rhs = Operator::diagonal(space, &sym).add(&witness.compose(&Operator::diagonal(space, &anti))?)?;
    Ok(Operator::diagonal(space, &target).max_diff(&rhs))
}

/// A small normalizer sample of the exotic frame masa: a generic element of
/// `B`, a generic blockwise `diag(d, -d)`, and the frame-cyclic shift
/// `V·S·V*`, which permutes the frame vectors.
pub fn exotic_normalizer_sample(frame: &MasaFrame) -> Vec<Operator> {
    let n = frame.len();
    let space = frame.space();
    let generic: Vec<C64> = (0..n).map(|x| C64::new(1.0 + x as f64, 0.5 * x as f64)).collect();
    let b = frame.element(&generic);
    let anti: Vec<C64> = (0..n)
        .map(|k| {
            let d = C64::new(1.0 + (k / 2) as f64, 0.0);
            if k % 2 == 0 { d } else { -d }
        })
        .collect();
    let s = Operator::diagonal(space, &anti);
    let shift = Operator::cyclic_shift(space);
    let v = frame.frame().entries();
    let u = Operator::square(space, v * shift.entries() * v.adjoint()).expect("square");
    vec![b, s, u]
}

/// Whether `E` is trace preserving on every matrix unit, idempotent, and the
/// identity on `B`. Trace preservation of a positive map onto `B` makes it
/// faithful: `E(a*a) = 0` forces `tr(a*a) = 0`.
pub fn expectation_faithful(frame: &MasaFrame) -> Result<bool> {
    let space = frame.space();
    let n = frame.len();
    for x in 0..n {
        for y in 0..n {
            let unit = Operator::matrix_unit(space, x, y);
            let e = masa_expectation(&unit, frame)?;
            let trace = e.entries().trace();
            let expected = if x == y { ONE } else { ZERO };
            if (trace - expected).norm() > 1e-12 {
                return Ok(false);
            }
            if masa_expectation(&e, frame)?.max_diff(&e) > 1e-12 {
                return Ok(false);
            }
        }
    }
    for p in frame.minimal_projections() {
        if masa_expectation(&p, frame)?.max_diff(&p) > 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Summary of the exotic-Cartan verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartanReport {
    pub blocks: usize,
    pub masa: bool,
    pub normalizer_dim: usize,
    pub full_dim: usize,
    pub expectation_faithful: bool,
    pub witness_ok: bool,
}

impl CartanReport {
    pub fn all_ok(&self) -> bool {
        self.masa && self.normalizer_dim == self.full_dim && self.expectation_faithful && self.witness_ok
    }
}

/// Runs the masa, normalizer, expectation and co-separability checks on the
/// `blocks`-block exotic frame inside the full matrix algebra.
pub fn verify_exotic_cartan(blocks: usize) -> Result<CartanReport> {
    let (space, frame) = exotic_frame(blocks)?;
    let n = space.len();
    let full = AlgebraSpan::full(&space);
    let masa = is_masa(&frame, &full)?;

    let sample = exotic_normalizer_sample(&frame);
    for a in &sample {
        if !frame.is_normalizer(a)? {
            return Err(Error::Precondition("sample element does not normalize B".into()));
        }
    }
    // conjugation by the frame is a *-isomorphism; in frame coordinates the
    // sample is monomial, which keeps the span reduction sparse
    let coords = sample
        .iter()
        .map(|a| Operator::square(&space, frame.to_frame_coords(a)))
        .collect::<Result<Vec<_>>>()?;
    let normalizer_dim = generated_dimension(&space, &coords, false)?;
    let expectation_faithful = expectation_faithful(&frame)?;

    let s = coseparability_witness(blocks)?;
    let s = Operator::square(&space, s.into_entries())?;
    let a: Vec<C64> = (0..blocks).map(|m| C64::new(m as f64 + 0.25, -0.5)).collect();
    let b: Vec<C64> = (0..blocks).map(|m| C64::new(0.75 - m as f64, 2.0)).collect();
    let identity_ok = witness_identity_error(&s, &a, &b)? <= 1e-12;
    let masa_basis = frame.minimal_projections();
    let mut ops = masa_basis.clone();
    for p in &masa_basis {
        ops.push(s.compose(p)?);
    }
    let span = AlgebraSpan::from_operators(&space, &ops)?;
    let diag_ok = (0..n).all(|x| span.contains(&Operator::matrix_unit(&space, x, x)));
    let normalizes = frame.is_normalizer(&s)?;

    Ok(CartanReport {
        blocks,
        masa,
        normalizer_dim,
        full_dim: n * n,
        expectation_faithful,
        witness_ok: identity_ok && diag_ok && normalizes,
    })
}
