//! Blendshape rig model: a neutral mesh, a linear blendshape basis, and up to
//! three levels of corrective offsets activated by products of weights.
//!
//! The rig function comes in two flavours. The linear model is
//! `b0 + sum_i w_i * b_i`. The quartic model adds corrective offsets for
//! pairs, triplets, and quadruplets of blendshapes, each scaled by the
//! product of the participating weights. For a fixed coordinate `i` the
//! quartic model is affine in `w_i`; [`BlendshapeRig::phi`] is the slope and
//! [`BlendshapeRig::psi`] the intercept (shifted by the target mesh), so that
//!
//! ```text
//! f(w) - target == w_i * phi(i) + psi(i)        for every w_i
//! ```
//!
//! Summation order is fixed: linear terms in index order, then pair, triplet,
//! and quadruplet corrections each in sorted-tuple order. Evaluation is
//! sequential over a single vertex block, so results are reproducible
//! run-to-run bit for bit.

use crate::error::{Error, Result};
use crate::linalg;

/// Which rig function a solver fits against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RigKind {
    Linear,
    Quartic,
}

/// A face mesh as a flat `[x0, y0, z0, x1, ...]` coordinate vector, in
/// centimeters. Also used for vertex-offset vectors of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    coords: Vec<f64>,
}

impl Mesh {
    /// Wraps a coordinate vector. Fails if the length is not a multiple of
    /// three or any entry is non-finite.
    pub fn from_coords(coords: Vec<f64>) -> Result<Self> {
        if coords.len() % 3 != 0 {
            return Err(Error::DimensionMismatch {
                context: "mesh coordinate vector (must be 3*n)",
                expected: coords.len() / 3 * 3,
                actual: coords.len(),
            });
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("mesh coordinates"));
        }
        Ok(Self { coords })
    }

    pub fn zeros(vertex_count: usize) -> Self {
        Self {
            coords: vec![0.0; 3 * vertex_count],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len() / 3
    }

    /// Length of the flat coordinate vector (3 * vertex count).
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Coordinates of one vertex.
    pub fn vertex(&self, v: usize) -> [f64; 3] {
        [
            self.coords[3 * v],
            self.coords[3 * v + 1],
            self.coords[3 * v + 2],
        ]
    }
}

/// Activation weights, one per blendshape. Solvers export vectors with every
/// entry in `[0, 1]`; intermediate states may leave the box where documented.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn from_vec(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// True when every entry lies in `[0, 1]` exactly.
    pub fn is_feasible(&self) -> bool {
        self.0.iter().all(|&w| (0.0..=1.0).contains(&w))
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A corrective offset activated by the product of two, three, or four
/// blendshape weights. Indices are zero-based, strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectiveTerm {
    indices: Vec<usize>,
    offset: Vec<f64>,
}

impl CorrectiveTerm {
    pub fn new(indices: Vec<usize>, offset: Vec<f64>) -> Result<Self> {
        if !(2..=4).contains(&indices.len()) {
            return Err(Error::InvalidTerm(format!(
                "tuple length {} (must be 2, 3, or 4)",
                indices.len()
            )));
        }
        if !indices.windows(2).all(|p| p[0] < p[1]) {
            return Err(Error::InvalidTerm(format!(
                "indices {indices:?} not strictly increasing"
            )));
        }
        if !offset.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("corrective offset"));
        }
        Ok(Self { indices, offset })
    }

    /// 2 for pairs, 3 for triplets, 4 for quadruplets.
    pub fn level(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }
}

/// Back-reference from a coordinate to a corrective term it participates in,
/// with the partner indices cached so the weight product over the partners is
/// a direct loop.
#[derive(Clone, Debug)]
struct TermRef {
    term: usize,
    partners: Vec<usize>,
}

/// Immutable blendshape rig. Construction validates all invariants and sorts
/// the corrective sets into the canonical summation order, then precomputes
/// per-coordinate term membership (phi and psi visit only the terms that
/// contain the coordinate, not the whole set).
#[derive(Clone, Debug)]
pub struct BlendshapeRig {
    neutral: Mesh,
    blendshapes: Vec<Vec<f64>>,
    // Sorted by (level, index tuple); this is the fixed summation order.
    terms: Vec<CorrectiveTerm>,
    norms_sq: Vec<f64>,
    coord_terms: Vec<Vec<TermRef>>,
}

impl BlendshapeRig {
    pub fn new(
        neutral: Mesh,
        blendshapes: Vec<Vec<f64>>,
        corrections: Vec<CorrectiveTerm>,
    ) -> Result<Self> {
        let dim = neutral.dim();
        let m = blendshapes.len();
        for (i, b) in blendshapes.iter().enumerate() {
            if b.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "blendshape offset vector",
                    expected: dim,
                    actual: b.len(),
                });
            }
            if !b.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite("blendshape offsets"));
            }
            let _ = i;
        }

        let mut terms = corrections;
        for t in &terms {
            if t.offset().len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "corrective offset vector",
                    expected: dim,
                    actual: t.offset().len(),
                });
            }
            if let Some(&bad) = t.indices().iter().find(|&&i| i >= m) {
                return Err(Error::IndexOutOfRange { index: bad, m });
            }
        }
        terms.sort_by(|a, b| {
            a.level()
                .cmp(&b.level())
                .then_with(|| a.indices().cmp(b.indices()))
        });
        for pair in terms.windows(2) {
            if pair[0].indices() == pair[1].indices() {
                return Err(Error::InvalidTerm(format!(
                    "duplicate corrective tuple {:?}",
                    pair[0].indices()
                )));
            }
        }

        let norms_sq = blendshapes.iter().map(|b| linalg::norm_sq(b)).collect();

        let mut coord_terms: Vec<Vec<TermRef>> = vec![Vec::new(); m];
        for (ti, t) in terms.iter().enumerate() {
            for &i in t.indices() {
                let partners = t.indices().iter().copied().filter(|&j| j != i).collect();
                coord_terms[i].push(TermRef { term: ti, partners });
            }
        }

        Ok(Self {
            neutral,
            blendshapes,
            terms,
            norms_sq,
            coord_terms,
        })
    }

    /// Number of blendshapes in the basis.
    pub fn blendshape_count(&self) -> usize {
        self.blendshapes.len()
    }

    /// Number of mesh vertices.
    pub fn vertex_count(&self) -> usize {
        self.neutral.vertex_count()
    }

    /// Length of flat coordinate vectors (3 * vertex count).
    pub fn dim(&self) -> usize {
        self.neutral.dim()
    }

    pub fn neutral(&self) -> &Mesh {
        &self.neutral
    }

    pub fn blendshape(&self, i: usize) -> &[f64] {
        &self.blendshapes[i]
    }

    /// Squared displacement magnitude of blendshape `i`.
    pub fn norm_sq(&self, i: usize) -> f64 {
        self.norms_sq[i]
    }

    /// All corrective terms in the canonical summation order.
    pub fn corrections(&self) -> &[CorrectiveTerm] {
        &self.terms
    }

    pub fn corrections_of_level(&self, level: usize) -> impl Iterator<Item = &CorrectiveTerm> {
        self.terms.iter().filter(move |t| t.level() == level)
    }

    /// True when there are no corrective terms at any level.
    pub fn is_linear(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_weights(&self, w: &WeightVector) -> Result<()> {
        if w.len() != self.blendshape_count() {
            return Err(Error::DimensionMismatch {
                context: "weight vector",
                expected: self.blendshape_count(),
                actual: w.len(),
            });
        }
        Ok(())
    }

    fn check_coord(&self, i: usize) -> Result<()> {
        if i >= self.blendshape_count() {
            return Err(Error::IndexOutOfRange {
                index: i,
                m: self.blendshape_count(),
            });
        }
        Ok(())
    }

    /// Linear rig output `b0 + sum_i w_i * b_i`.
    pub fn evaluate_linear(&self, w: &WeightVector) -> Result<Mesh> {
        self.check_weights(w)?;
        let mut out = self.neutral.coords().to_vec();
        for (wi, b) in w.iter().zip(&self.blendshapes) {
            if *wi != 0.0 {
                linalg::axpy(&mut out, *wi, b);
            }
        }
        Ok(Mesh { coords: out })
    }

    /// Full rig output including all corrective levels.
    pub fn evaluate_quartic(&self, w: &WeightVector) -> Result<Mesh> {
        self.check_weights(w)?;
        let mut out = self.neutral.coords().to_vec();
        for (wi, b) in w.iter().zip(&self.blendshapes) {
            if *wi != 0.0 {
                linalg::axpy(&mut out, *wi, b);
            }
        }
        for t in &self.terms {
            let prod: f64 = t.indices().iter().map(|&j| w[j]).product();
            if prod != 0.0 {
                linalg::axpy(&mut out, prod, t.offset());
            }
        }
        Ok(Mesh { coords: out })
    }

    /// Slope of the quartic rig in coordinate `i`: the blendshape plus every
    /// corrective offset containing `i`, scaled by the product of the partner
    /// weights. `w[i]` itself does not enter.
    pub fn phi(&self, w: &WeightVector, i: usize) -> Result<Vec<f64>> {
        self.check_weights(w)?;
        self.check_coord(i)?;
        let mut out = vec![0.0; self.dim()];
        self.phi_into(w, i, &mut out);
        Ok(out)
    }

    /// Allocation-free variant of [`phi`](Self::phi) for solver inner loops.
    /// `buf` must have length `3 * vertex_count`.
    pub fn phi_into(&self, w: &WeightVector, i: usize, buf: &mut [f64]) {
        buf.copy_from_slice(&self.blendshapes[i]);
        for tr in &self.coord_terms[i] {
            let prod: f64 = tr.partners.iter().map(|&j| w[j]).product();
            if prod != 0.0 {
                linalg::axpy(buf, prod, self.terms[tr.term].offset());
            }
        }
    }

    /// Evaluates the selected rig function.
    pub fn evaluate(&self, kind: RigKind, w: &WeightVector) -> Result<Mesh> {
        match kind {
            RigKind::Linear => self.evaluate_linear(w),
            RigKind::Quartic => self.evaluate_quartic(w),
        }
    }

    /// Per-coordinate slope under the selected rig function. For the linear
    /// rig this is just the blendshape column.
    pub fn phi_kind_into(&self, kind: RigKind, w: &WeightVector, i: usize, buf: &mut [f64]) {
        match kind {
            RigKind::Linear => buf.copy_from_slice(&self.blendshapes[i]),
            RigKind::Quartic => self.phi_into(w, i, buf),
        }
    }

    /// Intercept of the quartic rig in coordinate `i`, shifted by the target:
    /// every rig term not involving `w_i` (neutral included), minus `target`.
    /// Together with [`phi`](Self::phi) this satisfies
    /// `f(w) - target == w_i * phi + psi` for any value of `w_i`.
    pub fn psi(&self, w: &WeightVector, i: usize, target: &Mesh) -> Result<Vec<f64>> {
        self.check_weights(w)?;
        self.check_coord(i)?;
        if target.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "target mesh",
                expected: self.dim(),
                actual: target.dim(),
            });
        }
        // Evaluating at w_i = 0 drops exactly the terms that contain i.
        let mut masked = WeightVector::from_vec(w.as_slice().to_vec());
        masked.as_mut_slice()[i] = 0.0;
        let mut out = self.evaluate_quartic(&masked)?.into_coords();
        for (o, t) in out.iter_mut().zip(target.coords()) {
            *o -= t;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1.0);
        num / den
    }

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Random rig with all three correction levels, for oracle checks.
    fn random_rig(rng: &mut ChaCha8Rng, m: usize, n: usize) -> BlendshapeRig {
        let dim = 3 * n;
        let neutral = Mesh::from_coords(random_vec(rng, dim)).unwrap();
        let blendshapes: Vec<Vec<f64>> = (0..m).map(|_| random_vec(rng, dim)).collect();
        let mut corrections = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for level in 2..=4usize.min(m) {
            for _ in 0..m.min(6) {
                let mut idx: Vec<usize> = (0..m).collect();
                idx.shuffle(rng);
                let mut tuple: Vec<usize> = idx[..level].to_vec();
                tuple.sort_unstable();
                if seen.insert(tuple.clone()) {
                    corrections
                        .push(CorrectiveTerm::new(tuple, random_vec(rng, dim)).unwrap());
                }
            }
        }
        BlendshapeRig::new(neutral, blendshapes, corrections).unwrap()
    }

    fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> WeightVector {
        WeightVector::from_vec((0..m).map(|_| rng.random_range(0.0..1.0)).collect())
    }

    /// Naive per-entry oracle for the quartic rig, written as a direct
    /// transcription of the model with scalar loops.
    fn naive_quartic(rig: &BlendshapeRig, w: &[f64]) -> Vec<f64> {
        let dim = rig.dim();
        let mut out = vec![0.0; dim];
        for e in 0..dim {
            let mut acc = rig.neutral().coords()[e];
            for i in 0..rig.blendshape_count() {
                acc += w[i] * rig.blendshape(i)[e];
            }
            for t in rig.corrections() {
                let mut prod = 1.0;
                for &j in t.indices() {
                    prod *= w[j];
                }
                acc += prod * t.offset()[e];
            }
            out[e] = acc;
        }
        out
    }

    #[test]
    fn mesh_rejects_bad_lengths_and_nan() {
        assert!(Mesh::from_coords(vec![1.0, 2.0]).is_err());
        assert!(Mesh::from_coords(vec![1.0, 2.0, f64::NAN]).is_err());
        assert!(Mesh::from_coords(vec![1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn corrective_term_validation() {
        let off = vec![0.0; 6];
        assert!(CorrectiveTerm::new(vec![0], off.clone()).is_err());
        assert!(CorrectiveTerm::new(vec![1, 0], off.clone()).is_err());
        assert!(CorrectiveTerm::new(vec![0, 0], off.clone()).is_err());
        assert!(CorrectiveTerm::new(vec![0, 1, 2, 3, 4], off.clone()).is_err());
        assert!(CorrectiveTerm::new(vec![0, 2], off).is_ok());
    }

    #[test]
    fn rig_rejects_out_of_range_term_and_duplicates() {
        let neutral = Mesh::zeros(2);
        let bs = vec![vec![0.0; 6], vec![0.0; 6]];
        let t = CorrectiveTerm::new(vec![0, 5], vec![0.0; 6]).unwrap();
        assert!(BlendshapeRig::new(neutral.clone(), bs.clone(), vec![t]).is_err());
        let t1 = CorrectiveTerm::new(vec![0, 1], vec![0.0; 6]).unwrap();
        let t2 = CorrectiveTerm::new(vec![0, 1], vec![1.0; 6]).unwrap();
        assert!(BlendshapeRig::new(neutral, bs, vec![t1, t2]).is_err());
    }

    #[test]
    fn evaluate_linear_zero_weights_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rig = random_rig(&mut rng, 5, 7);
        let out = rig
            .evaluate_linear(&WeightVector::zeros(5))
            .unwrap();
        assert_eq!(out.coords(), rig.neutral().coords());
    }

    #[test]
    fn evaluate_linear_single_blendshape() {
        let neutral = Mesh::from_coords(vec![1.0, 2.0, 3.0]).unwrap();
        let b = vec![0.5, -0.25, 4.0];
        let rig = BlendshapeRig::new(neutral, vec![b.clone()], vec![]).unwrap();
        let out = rig
            .evaluate_linear(&WeightVector::from_vec(vec![1.0]))
            .unwrap();
        assert_eq!(out.coords(), &[1.0 + 0.5, 2.0 - 0.25, 3.0 + 4.0]);
    }

    #[test]
    fn evaluate_linear_matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dim = 3 * 20;
        let neutral = Mesh::from_coords(random_vec(&mut rng, dim)).unwrap();
        let blendshapes: Vec<Vec<f64>> = (0..10).map(|_| random_vec(&mut rng, dim)).collect();
        let rig = BlendshapeRig::new(neutral, blendshapes, vec![]).unwrap();
        let w = random_weights(&mut rng, 10);

        let mut oracle = vec![0.0; dim];
        for e in 0..dim {
            let mut acc = rig.neutral().coords()[e];
            for i in 0..10 {
                acc += w[i] * rig.blendshape(i)[e];
            }
            oracle[e] = acc;
        }
        let out = rig.evaluate_linear(&w).unwrap();
        assert!(rel_err(out.coords(), &oracle) < 1e-12);
    }

    #[test]
    fn evaluate_quartic_zero_weights_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rig = random_rig(&mut rng, 6, 5);
        let out = rig
            .evaluate_quartic(&WeightVector::zeros(6))
            .unwrap();
        assert_eq!(out.coords(), rig.neutral().coords());
    }

    #[test]
    fn evaluate_quartic_unit_weights_single_pair() {
        let neutral = Mesh::from_coords(vec![1.0, 0.0, 0.0]).unwrap();
        let b1 = vec![0.1, 0.2, 0.3];
        let b2 = vec![-0.1, 0.5, 0.0];
        let corr = CorrectiveTerm::new(vec![0, 1], vec![0.01, -0.02, 0.03]).unwrap();
        let rig = BlendshapeRig::new(neutral, vec![b1, b2], vec![corr]).unwrap();
        let out = rig
            .evaluate_quartic(&WeightVector::from_vec(vec![1.0, 1.0]))
            .unwrap();
        let expected = [1.0 + 0.1 - 0.1 + 0.01, 0.2 + 0.5 - 0.02, 0.3 + 0.03];
        for (o, e) in out.coords().iter().zip(&expected) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluate_quartic_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let rig = random_rig(&mut rng, 8, 10);
            let w = random_weights(&mut rng, 8);
            let out = rig.evaluate_quartic(&w).unwrap();
            let oracle = naive_quartic(&rig, &w);
            assert!(rel_err(out.coords(), &oracle) < 1e-12);
        }
    }

    #[test]
    fn quartic_degenerates_to_linear_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dim = 3 * 9;
        let neutral = Mesh::from_coords(random_vec(&mut rng, dim)).unwrap();
        let blendshapes: Vec<Vec<f64>> = (0..7).map(|_| random_vec(&mut rng, dim)).collect();
        let rig = BlendshapeRig::new(neutral, blendshapes, vec![]).unwrap();
        let w = random_weights(&mut rng, 7);
        let lin = rig.evaluate_linear(&w).unwrap();
        let qua = rig.evaluate_quartic(&w).unwrap();
        assert_eq!(lin.coords(), qua.coords());
    }

    #[test]
    fn phi_is_blendshape_for_linear_rig() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dim = 3 * 4;
        let neutral = Mesh::from_coords(random_vec(&mut rng, dim)).unwrap();
        let blendshapes: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, dim)).collect();
        let rig = BlendshapeRig::new(neutral, blendshapes, vec![]).unwrap();
        let w = random_weights(&mut rng, 3);
        for i in 0..3 {
            assert_eq!(rig.phi(&w, i).unwrap(), rig.blendshape(i));
        }
    }

    #[test]
    fn phi_suppresses_term_with_zero_partner() {
        let neutral = Mesh::zeros(1);
        let b1 = vec![1.0, 0.0, 0.0];
        let b2 = vec![0.0, 1.0, 0.0];
        let corr = CorrectiveTerm::new(vec![0, 1], vec![5.0, 5.0, 5.0]).unwrap();
        let rig = BlendshapeRig::new(neutral, vec![b1.clone(), b2], vec![corr]).unwrap();
        let w = WeightVector::from_vec(vec![0.8, 0.0]);
        assert_eq!(rig.phi(&w, 0).unwrap(), b1);
    }

    #[test]
    fn phi_index_out_of_range() {
        let rig = BlendshapeRig::new(Mesh::zeros(1), vec![vec![0.0; 3]], vec![]).unwrap();
        assert!(rig.phi(&WeightVector::zeros(1), 1).is_err());
    }

    // f(w with w_i := t) must be affine in t with slope phi; checked against
    // the finite difference f(w_i=1) - f(w_i=0).
    #[test]
    fn phi_matches_affine_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let rig = random_rig(&mut rng, 7, 6);
            let w = random_weights(&mut rng, 7);
            for i in 0..7 {
                let phi = rig.phi(&w, i).unwrap();
                let mut w0 = w.clone();
                w0.as_mut_slice()[i] = 0.0;
                let mut w1 = w.clone();
                w1.as_mut_slice()[i] = 1.0;
                let f0 = rig.evaluate_quartic(&w0).unwrap();
                let f1 = rig.evaluate_quartic(&w1).unwrap();
                let slope: Vec<f64> = f1
                    .coords()
                    .iter()
                    .zip(f0.coords())
                    .map(|(a, b)| a - b)
                    .collect();
                assert!(rel_err(&phi, &slope) < 1e-10);
            }
        }
    }

    #[test]
    fn psi_zero_weights_linear_rig() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dim = 3 * 5;
        let neutral = Mesh::from_coords(random_vec(&mut rng, dim)).unwrap();
        let blendshapes: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, dim)).collect();
        let rig = BlendshapeRig::new(neutral.clone(), blendshapes, vec![]).unwrap();
        let target = Mesh::from_coords(random_vec(&mut rng, dim)).unwrap();
        let psi = rig.psi(&WeightVector::zeros(4), 2, &target).unwrap();
        let expected: Vec<f64> = neutral
            .coords()
            .iter()
            .zip(target.coords())
            .map(|(a, b)| a - b)
            .collect();
        assert_eq!(psi, expected);
    }

    #[test]
    fn psi_vanishes_at_neutral_target_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rig = random_rig(&mut rng, 5, 4);
        let psi = rig
            .psi(&WeightVector::zeros(5), 0, rig.neutral())
            .unwrap();
        assert!(psi.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn decomposition_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let rig = random_rig(&mut rng, 8, 6);
            let w = random_weights(&mut rng, 8);
            let target = Mesh::from_coords(random_vec(&mut rng, rig.dim())).unwrap();
            let i = rng.random_range(0..8);
            let phi = rig.phi(&w, i).unwrap();
            let psi = rig.psi(&w, i, &target).unwrap();
            let f = rig.evaluate_quartic(&w).unwrap();
            let mut resid = 0.0f64;
            let mut scale = 0.0f64;
            for e in 0..rig.dim() {
                let lhs = f.coords()[e] - target.coords()[e];
                let rhs = w[i] * phi[e] + psi[e];
                resid += (lhs - rhs) * (lhs - rhs);
                scale += lhs * lhs;
            }
            assert!(resid.sqrt() <= 1e-10 * scale.sqrt().max(1.0));
        }
    }

    #[test]
    fn correction_order_does_not_change_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dim = 3 * 6;
        let neutral = Mesh::from_coords(random_vec(&mut rng, dim)).unwrap();
        let blendshapes: Vec<Vec<f64>> = (0..6).map(|_| random_vec(&mut rng, dim)).collect();
        let mut corrections = vec![
            CorrectiveTerm::new(vec![0, 1], random_vec(&mut rng, dim)).unwrap(),
            CorrectiveTerm::new(vec![2, 3], random_vec(&mut rng, dim)).unwrap(),
            CorrectiveTerm::new(vec![0, 1, 2], random_vec(&mut rng, dim)).unwrap(),
            CorrectiveTerm::new(vec![1, 2, 4, 5], random_vec(&mut rng, dim)).unwrap(),
        ];
        let rig1 =
            BlendshapeRig::new(neutral.clone(), blendshapes.clone(), corrections.clone()).unwrap();
        corrections.reverse();
        let rig2 = BlendshapeRig::new(neutral, blendshapes, corrections).unwrap();
        let w = random_weights(&mut rng, 6);
        let a = rig1.evaluate_quartic(&w).unwrap();
        let b = rig2.evaluate_quartic(&w).unwrap();
        // Construction canonicalizes the order, so this is exact.
        assert_eq!(a.coords(), b.coords());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_rig_and_weights() -> impl Strategy<Value = (BlendshapeRig, WeightVector, usize)> {
            (2usize..6, 2usize..5, any::<u64>()).prop_map(|(m, n, seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rig = random_rig(&mut rng, m, n);
                let w = random_weights(&mut rng, m);
                let i = rng.random_range(0..m);
                (rig, w, i)
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn decomposition_identity_holds((rig, w, i) in arb_rig_and_weights()) {
                let target =
                    Mesh::from_coords(vec![0.25; rig.dim()]).unwrap();
                let phi = rig.phi(&w, i).unwrap();
                let psi = rig.psi(&w, i, &target).unwrap();
                let f = rig.evaluate_quartic(&w).unwrap();
                for e in 0..rig.dim() {
                    let lhs = f.coords()[e] - target.coords()[e];
                    let rhs = w[i] * phi[e] + psi[e];
                    prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
                }
            }

            #[test]
            fn quartic_affine_in_single_coordinate((rig, w, i) in arb_rig_and_weights()) {
                // f(t) - f(0) must equal t * (f(1) - f(0)) along coordinate i.
                let at = |t: f64| {
                    let mut wt = w.clone();
                    wt.as_mut_slice()[i] = t;
                    rig.evaluate_quartic(&wt).unwrap().into_coords()
                };
                let f0 = at(0.0);
                let f1 = at(1.0);
                let fh = at(0.37);
                for e in 0..rig.dim() {
                    let interp = f0[e] + 0.37 * (f1[e] - f0[e]);
                    prop_assert!((fh[e] - interp).abs() <= 1e-10 * (1.0 + interp.abs()));
                }
            }
        }
    }
}
