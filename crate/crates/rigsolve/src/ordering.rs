//! Coordinate-visit-order strategies for the sequential solvers.
//!
//! Static strategies produce a permutation of `0..m` up front; dynamic
//! strategies pick the next coordinate from the current solver state, one at
//! a time, with a per-pass budget of `m` picks so that "T passes" stays
//! comparable across strategies. Every strategy is deterministic given its
//! inputs (and seed, for random ordering); ties always break toward the
//! lowest blendshape index.
//!
//! "Correlation" is the unnormalized inner product of a blendshape with the
//! current residual (the matching-pursuit convention) rather than a Pearson
//! coefficient, so the displacement magnitude of a blendshape keeps its
//! weight in the ranking. Coordinates with nonpositive correlation rank by
//! the raw signed score: from a zero start they would receive a zero update
//! anyway, so they belong at the back of the schedule.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rig::{BlendshapeRig, Mesh, RigKind, WeightVector};
use crate::solvers::{DEGENERATE_NORM_SQ, MIN_IMPROVEMENT};

/// How a sequential solver chooses which coordinate to update next.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderingStrategy {
    /// Largest squared blendshape displacement first.
    DecreasingMagnitude,
    /// Exact reverse of [`DecreasingMagnitude`](Self::DecreasingMagnitude).
    IncreasingMagnitude,
    /// Seeded uniform permutation, reproducible across runs and platforms.
    RandomOrder { seed: u64 },
    /// Blendshapes most correlated with the target delta first; fixed for the
    /// whole frame.
    FrameCorrelation,
    /// Re-rank against the updated residual after every pick.
    IterationCorrelation,
    /// Pick the feasible coordinate with the largest-magnitude partial
    /// derivative of the objective.
    GaussSouthwell,
    /// Tentatively solve every coordinate subproblem, commit only the best.
    MaximumImprovement,
}

impl OrderingStrategy {
    /// True for strategies whose whole-pass schedule is known up front.
    pub fn is_static(&self) -> bool {
        matches!(
            self,
            Self::DecreasingMagnitude
                | Self::IncreasingMagnitude
                | Self::RandomOrder { .. }
                | Self::FrameCorrelation
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DecreasingMagnitude => "decreasing-magnitude",
            Self::IncreasingMagnitude => "increasing-magnitude",
            Self::RandomOrder { .. } => "random",
            Self::FrameCorrelation => "frame-correlation",
            Self::IterationCorrelation => "iteration-correlation",
            Self::GaussSouthwell => "gauss-southwell",
            Self::MaximumImprovement => "maximum-improvement",
        }
    }

    /// Parses a strategy name as used on the command line. `seed` is only
    /// consumed by `random`.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        match name {
            "decreasing-magnitude" => Ok(Self::DecreasingMagnitude),
            "increasing-magnitude" => Ok(Self::IncreasingMagnitude),
            "random" => Ok(Self::RandomOrder { seed }),
            "frame-correlation" => Ok(Self::FrameCorrelation),
            "iteration-correlation" => Ok(Self::IterationCorrelation),
            "gauss-southwell" => Ok(Self::GaussSouthwell),
            "maximum-improvement" => Ok(Self::MaximumImprovement),
            other => Err(Error::InvalidConfig(format!(
                "unknown ordering strategy '{other}'"
            ))),
        }
    }

    /// All seven strategies, in the order they are reported.
    pub fn all(seed: u64) -> Vec<Self> {
        vec![
            Self::DecreasingMagnitude,
            Self::RandomOrder { seed },
            Self::IncreasingMagnitude,
            Self::FrameCorrelation,
            Self::IterationCorrelation,
            Self::GaussSouthwell,
            Self::MaximumImprovement,
        ]
    }
}

/// Sorts indices descending by `score`, ties toward the lower index.
fn sort_desc_by_score(m: usize, score: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        score(b)
            .partial_cmp(&score(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Whole-pass schedule for the static strategies. `target` is required by
/// frame correlation (the scores are taken against `target - neutral`) and
/// ignored otherwise.
pub fn static_order(
    rig: &BlendshapeRig,
    strategy: &OrderingStrategy,
    target: Option<&Mesh>,
) -> Result<Vec<usize>> {
    let m = rig.blendshape_count();
    match strategy {
        OrderingStrategy::DecreasingMagnitude => Ok(sort_desc_by_score(m, |i| rig.norm_sq(i))),
        OrderingStrategy::IncreasingMagnitude => {
            let mut order = sort_desc_by_score(m, |i| rig.norm_sq(i));
            order.reverse();
            Ok(order)
        }
        OrderingStrategy::RandomOrder { seed } => {
            let mut order: Vec<usize> = (0..m).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            order.shuffle(&mut rng);
            Ok(order)
        }
        OrderingStrategy::FrameCorrelation => {
            let target = target.ok_or(Error::MissingTarget)?;
            if target.dim() != rig.dim() {
                return Err(Error::DimensionMismatch {
                    context: "ordering target mesh",
                    expected: rig.dim(),
                    actual: target.dim(),
                });
            }
            let delta: Vec<f64> = target
                .coords()
                .iter()
                .zip(rig.neutral().coords())
                .map(|(t, n)| t - n)
                .collect();
            let scores: Vec<f64> = (0..m)
                .map(|i| linalg::dot(rig.blendshape(i), &delta))
                .collect();
            Ok(sort_desc_by_score(m, |i| scores[i]))
        }
        other => Err(Error::InvalidConfig(format!(
            "{} is not a static ordering strategy",
            other.name()
        ))),
    }
}

/// Per-pass bookkeeping for the dynamic strategies. Each pass allows at most
/// one visit per coordinate and at most `m` picks; the caller resets the
/// state at pass boundaries.
#[derive(Clone, Debug)]
pub struct VisitedState {
    visited: Vec<bool>,
    picks: usize,
}

impl VisitedState {
    pub fn new(m: usize) -> Self {
        Self {
            visited: vec![false; m],
            picks: 0,
        }
    }

    pub fn picks(&self) -> usize {
        self.picks
    }

    pub fn is_visited(&self, i: usize) -> bool {
        self.visited[i]
    }

    fn take(&mut self, i: usize) -> usize {
        self.visited[i] = true;
        self.picks += 1;
        i
    }
}

/// Picks the next coordinate for a dynamic strategy, or `None` when the pass
/// is done (budget exhausted, or no pick can improve the objective).
///
/// `residual` is the caller-maintained vector `target - f(w)` for the current
/// weights; supplying it avoids re-evaluating the rig for every candidate
/// scan. `alpha` is the L1 penalty of the objective the solver is descending.
pub fn next_coordinate_dynamic(
    rig: &BlendshapeRig,
    w: &WeightVector,
    residual: &[f64],
    strategy: &OrderingStrategy,
    alpha: f64,
    kind: RigKind,
    state: &mut VisitedState,
) -> Result<Option<usize>> {
    let m = rig.blendshape_count();
    if state.picks >= m {
        return Ok(None);
    }
    match strategy {
        OrderingStrategy::IterationCorrelation => {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                if state.visited[i] {
                    continue;
                }
                let score = linalg::dot(rig.blendshape(i), residual);
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((i, score));
                }
            }
            Ok(best.map(|(i, _)| state.take(i)))
        }
        OrderingStrategy::GaussSouthwell => {
            let mut phi = vec![0.0; rig.dim()];
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                if state.visited[i] {
                    continue;
                }
                rig.phi_kind_into(kind, w, i, &mut phi);
                let grad = alpha - linalg::dot(&phi, residual);
                // A pinned coordinate whose gradient points out of the box
                // has no feasible descent direction; neither does an interior
                // coordinate with zero gradient.
                let descends = (w[i] > 0.0 && grad > 0.0) || (w[i] < 1.0 && grad < 0.0);
                if !descends {
                    continue;
                }
                if best.is_none_or(|(_, g)| grad.abs() > g) {
                    best = Some((i, grad.abs()));
                }
            }
            Ok(best.map(|(i, _)| state.take(i)))
        }
        OrderingStrategy::MaximumImprovement => {
            let mut phi = vec![0.0; rig.dim()];
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                if state.visited[i] {
                    continue;
                }
                rig.phi_kind_into(kind, w, i, &mut phi);
                let a = linalg::norm_sq(&phi);
                if a < DEGENERATE_NORM_SQ {
                    continue;
                }
                let g = linalg::dot(&phi, residual);
                let t = crate::solvers::project_unit_interval(w[i] + (g - alpha) / a);
                let step = t - w[i];
                // Exact objective decrease of the tentative update; the rig
                // is affine in one coordinate, so no re-evaluation is needed.
                let improvement = step * g - 0.5 * step * step * a - alpha * step;
                if best.is_none_or(|(_, imp)| improvement > imp) {
                    best = Some((i, improvement));
                }
            }
            match best {
                Some((i, imp)) if imp >= MIN_IMPROVEMENT => Ok(Some(state.take(i))),
                _ => Ok(None),
            }
        }
        other => Err(Error::InvalidConfig(format!(
            "{} is not a dynamic ordering strategy",
            other.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rig::CorrectiveTerm;

    fn rig_with_norms(norms: &[f64]) -> BlendshapeRig {
        // One vertex per blendshape; blendshape i displaces vertex i only.
        let m = norms.len();
        let neutral = Mesh::zeros(m);
        let blendshapes = norms
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let mut b = vec![0.0; 3 * m];
                b[3 * i] = s.sqrt();
                b
            })
            .collect();
        BlendshapeRig::new(neutral, blendshapes, vec![]).unwrap()
    }

    #[test]
    fn decreasing_magnitude_sorts_by_norm() {
        let rig = rig_with_norms(&[4.0, 9.0, 1.0]);
        let order = static_order(&rig, &OrderingStrategy::DecreasingMagnitude, None).unwrap();
        assert_eq!(order, vec![1, 0, 2]);
    }

    #[test]
    fn increasing_magnitude_is_exact_reverse() {
        let rig = rig_with_norms(&[4.0, 9.0, 1.0]);
        let order = static_order(&rig, &OrderingStrategy::IncreasingMagnitude, None).unwrap();
        assert_eq!(order, vec![2, 0, 1]);
        let dec = static_order(&rig, &OrderingStrategy::DecreasingMagnitude, None).unwrap();
        let rev: Vec<usize> = dec.into_iter().rev().collect();
        assert_eq!(order, rev);
    }

    #[test]
    fn equal_norms_tie_break_to_identity() {
        let rig = rig_with_norms(&[2.5, 2.5, 2.5, 2.5]);
        let order = static_order(&rig, &OrderingStrategy::DecreasingMagnitude, None).unwrap();
        assert_eq!(order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn random_order_reproducible_and_permutation() {
        let rig = rig_with_norms(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let s = OrderingStrategy::RandomOrder { seed: 99 };
        let a = static_order(&rig, &s, None).unwrap();
        let b = static_order(&rig, &s, None).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
        let c = static_order(&rig, &OrderingStrategy::RandomOrder { seed: 100 }, None).unwrap();
        assert_ne!(a, c); // overwhelmingly likely for 7! permutations
    }

    #[test]
    fn frame_correlation_requires_target() {
        let rig = rig_with_norms(&[1.0, 2.0]);
        let err = static_order(&rig, &OrderingStrategy::FrameCorrelation, None);
        assert!(matches!(err, Err(Error::MissingTarget)));
    }

    #[test]
    fn frame_correlation_ranks_by_inner_product_with_delta() {
        let rig = rig_with_norms(&[1.0, 1.0, 1.0]);
        // Target displaces vertex 2 strongly, vertex 0 a little.
        let mut t = vec![0.0; 9];
        t[6] = 2.0;
        t[0] = 0.5;
        let target = Mesh::from_coords(t).unwrap();
        let order = static_order(&rig, &OrderingStrategy::FrameCorrelation, Some(&target)).unwrap();
        assert_eq!(order, vec![2, 0, 1]);
    }

    #[test]
    fn gauss_southwell_excludes_pinned_boundary() {
        // All weights at 0 and all gradients nonnegative: nothing to pick.
        let rig = rig_with_norms(&[1.0, 1.0]);
        let w = WeightVector::zeros(2);
        // residual = target - f(0) with target below neutral in every
        // blendshape direction => phi' * r < 0 => grad = -phi'*r > 0.
        let residual = vec![-1.0; 6];
        let mut st = VisitedState::new(2);
        let pick = next_coordinate_dynamic(
            &rig,
            &w,
            &residual,
            &OrderingStrategy::GaussSouthwell,
            0.0,
            RigKind::Linear,
            &mut st,
        )
        .unwrap();
        assert_eq!(pick, None);
    }

    #[test]
    fn gauss_southwell_picks_largest_feasible_gradient() {
        let rig = rig_with_norms(&[1.0, 4.0, 1.0]);
        let w = WeightVector::zeros(3);
        let mut residual = vec![0.0; 9];
        residual[0] = 0.5; // grad_0 = -0.5
        residual[3] = 0.5; // grad_1 = -1.0 (norm 2 blendshape)
        let mut st = VisitedState::new(3);
        let pick = next_coordinate_dynamic(
            &rig,
            &w,
            &residual,
            &OrderingStrategy::GaussSouthwell,
            0.0,
            RigKind::Linear,
            &mut st,
        )
        .unwrap();
        assert_eq!(pick, Some(1));
    }

    #[test]
    fn maximum_improvement_picks_only_improving_coordinate() {
        // Orthogonal basis, target = neutral + 0.7 * b_2.
        let rig = rig_with_norms(&[1.0, 1.0, 1.0, 1.0]);
        let w = WeightVector::zeros(4);
        let mut residual = vec![0.0; 12];
        residual[6] = 0.7;
        let mut st = VisitedState::new(4);
        let pick = next_coordinate_dynamic(
            &rig,
            &w,
            &residual,
            &OrderingStrategy::MaximumImprovement,
            0.0,
            RigKind::Quartic,
            &mut st,
        )
        .unwrap();
        assert_eq!(pick, Some(2));
    }

    #[test]
    fn maximum_improvement_done_when_nothing_improves() {
        let rig = rig_with_norms(&[1.0, 1.0]);
        let w = WeightVector::zeros(2);
        let residual = vec![0.0; 6];
        let mut st = VisitedState::new(2);
        let pick = next_coordinate_dynamic(
            &rig,
            &w,
            &residual,
            &OrderingStrategy::MaximumImprovement,
            0.0,
            RigKind::Quartic,
            &mut st,
        )
        .unwrap();
        assert_eq!(pick, None);
    }

    #[test]
    fn iteration_correlation_visits_each_coordinate_once() {
        let rig = rig_with_norms(&[1.0, 2.0, 3.0]);
        let w = WeightVector::zeros(3);
        let residual = vec![0.3; 9];
        let mut st = VisitedState::new(3);
        let mut picked = Vec::new();
        while let Some(i) = next_coordinate_dynamic(
            &rig,
            &w,
            &residual,
            &OrderingStrategy::IterationCorrelation,
            0.0,
            RigKind::Linear,
            &mut st,
        )
        .unwrap()
        {
            picked.push(i);
        }
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
        assert_eq!(st.picks(), 3);
    }

    #[test]
    fn dynamic_with_corrective_terms_uses_quartic_slope() {
        // Pair correction shared by coordinates 0 and 1; with w_1 = 1 the
        // slope of coordinate 0 includes the corrective offset.
        let neutral = Mesh::zeros(1);
        let b0 = vec![1.0, 0.0, 0.0];
        let b1 = vec![0.0, 1.0, 0.0];
        let corr = CorrectiveTerm::new(vec![0, 1], vec![0.0, 0.0, 2.0]).unwrap();
        let rig = BlendshapeRig::new(neutral, vec![b0, b1], vec![corr]).unwrap();
        let w = WeightVector::from_vec(vec![0.0, 1.0]);
        let residual = vec![0.0, 0.0, 1.0];
        let mut st = VisitedState::new(2);
        // phi_0 = b0 + 1.0 * [0,0,2], so grad_0 = -2, beating grad_1 = 0.
        let pick = next_coordinate_dynamic(
            &rig,
            &w,
            &residual,
            &OrderingStrategy::GaussSouthwell,
            0.0,
            RigKind::Quartic,
            &mut st,
        )
        .unwrap();
        assert_eq!(pick, Some(0));
    }

    #[test]
    fn strategy_name_round_trip() {
        for s in OrderingStrategy::all(7) {
            let parsed = OrderingStrategy::parse(s.name(), 7).unwrap();
            assert_eq!(parsed, s);
        }
        assert!(OrderingStrategy::parse("bogus", 0).is_err());
    }
}
