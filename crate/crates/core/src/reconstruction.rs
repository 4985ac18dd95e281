//! Coarse structures rebuilt from a masa and a sample of its normalizers.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{greedy_decompose, MasaFrame};
use crate::band_ops::{partial_isometry, Operator};
use crate::coarse_space::{CoarseGenerators, Entourage, FiniteSpace};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Threshold used when rebuilding a structure from its own band algebra.
pub const ROUNDTRIP_EPS: f64 = 0.5;

/// A frame masa, normalizers of it, and the thresholds at which to read them.
#[derive(Clone, Debug)]
pub struct CartanData {
    frame: MasaFrame,
    normalizer_sample: Vec<Operator>,
    epsilons: Vec<f64>,
}

impl CartanData {
    pub fn new(frame: MasaFrame, normalizer_sample: Vec<Operator>, epsilons: Vec<f64>) -> Result<Self> {
        if let Some(eps) = epsilons.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::Argument(format!("threshold {eps} must be positive")));
        }
        for a in &normalizer_sample {
            if !frame.is_normalizer(a)? {
                return Err(Error::Precondition("sample element does not normalize the masa".into()));
            }
        }
        Ok(CartanData {
            frame,
            normalizer_sample,
            epsilons,
        })
    }

    pub fn frame(&self) -> &MasaFrame {
        &self.frame
    }

    pub fn normalizer_sample(&self) -> &[Operator] {
        &self.normalizer_sample
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }
}

/// `E_{a,ε} = {(x, y) : ‖P_x a P_y‖ >= ε}` with `P_x` the frame projections.
///
/// For rank-one frame projections `‖P_x a P_y‖ = |(V*aV)_xy|`.
pub fn entourage_from_normalizer(a: &Operator, frame: &MasaFrame, eps: f64) -> Result<Entourage> {
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("threshold {eps} must be positive")));
    }
    if !frame.is_normalizer(a)? {
        return Err(Error::Precondition("operator does not normalize the masa".into()));
    }
    let coords = frame.to_frame_coords(a);
    let n = frame.len();
    let pairs = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .filter(|&(x, y)| coords[(x, y)].norm() >= eps);
    Entourage::new(n, pairs)
}

/// The structure generated by `E_{a,ε}` over the sample and thresholds.
pub fn reconstruct_structure(data: &CartanData) -> Result<CoarseGenerators> {
    if data.normalizer_sample.is_empty() {
        return Err(Error::Argument("normalizer sample is empty".into()));
    }
    let jobs: Vec<(&Operator, f64)> = data
        .normalizer_sample
        .iter()
        .flat_map(|a| data.epsilons.iter().map(move |&e| (a, e)))
        .collect();
    let gens = jobs
        .par_iter()
        .map(|&(a, eps)| entourage_from_normalizer(a, &data.frame, eps))
        .collect::<Result<Vec<_>>>()?;
    CoarseGenerators::new(data.frame.space().clone(), gens)
}

/// The canonical normalizer sample of the band algebra of `gens`: `v^E` for
/// each greedy part `E` of each generator, then the identity and a diagonal
/// unitary with distinct phases.
pub fn canonical_normalizers(gens: &CoarseGenerators) -> Result<Vec<Operator>> {
    let space = gens.space();
    let mut sample = Vec::new();
    for e in gens.generators() {
        for part in greedy_decompose(e) {
            sample.push(partial_isometry(space, &part)?);
        }
    }
    sample.push(Operator::identity(space));
    let phases: Vec<C64> = (0..space.len()).map(|x| C64::from_polar(1.0, x as f64)).collect();
    sample.push(Operator::diagonal(space, &phases));
    Ok(sample)
}

/// Rebuilds the structure from its canonical normalizers at `ε = 1/2` and
/// checks that the two structures contain each other's generators.
pub fn roundtrip_check(space: &Arc<FiniteSpace>, gens: &CoarseGenerators) -> Result<bool> {
    if !gens.space().same_as(space) {
        return Err(Error::SpaceMismatch("generators live on a different space".into()));
    }
    let data = CartanData::new(
        MasaFrame::standard(space),
        canonical_normalizers(gens)?,
        vec![ROUNDTRIP_EPS],
    )?;
    let rebuilt = reconstruct_structure(&data)?;
    for e in gens.generators() {
        if !rebuilt.contains(e)? {
            return Ok(false);
        }
    }
    for e in rebuilt.generators() {
        if !gens.contains(e)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `{V*·a·V}` for each `a` in `basis`.
pub fn conjugate_algebra(basis: &[Operator], v: &Operator) -> Result<Vec<Operator>> {
    let frame = MasaFrame::new(v.clone()).map_err(|e| match e {
        Error::NotUnitary { .. } => e,
        other => Error::Precondition(format!("conjugating operator: {other}")),
    })?;
    basis
        .iter()
        .map(|a| {
            if !a.codomain().same_as(frame.space()) || !a.domain().same_as(frame.space()) {
                return Err(Error::SpaceMismatch("basis element on a different space".into()));
            }
            Operator::square(frame.space(), frame.to_frame_coords(a))
        })
        .collect()
}

/// Output of the `reconstruct` command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionReport {
    pub generators: Vec<Entourage>,
    pub roundtrip: bool,
}
