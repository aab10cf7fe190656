//! Inverse-rig solvers.
//!
//! All solvers minimize variants of the box-constrained objective
//!
//! ```text
//! min_{0 <= w <= 1}  1/2 ||f(w) - target||^2 + alpha * 1'w
//! ```
//!
//! where `f` is the linear or quartic rig function. The penalty equals the
//! L1 norm on the feasible box, so `alpha` trades mesh error against the
//! number of activated weights.
//!
//! * [`fit_coordinate_descent`] — the sequential solver. Each scalar
//!   subproblem `min_{0<=t<=1} 1/2 ||t*phi_i + psi_i||^2 + alpha*t` has the
//!   closed-form solution `P((-phi_i' psi_i - alpha) / ||phi_i||^2)` with `P`
//!   the projection onto `[0, 1]`, applied over `T` passes in a configurable
//!   coordinate order.
//! * [`fit_seol`] — greedy sequential baseline: one pass of nonnegative
//!   single-coordinate fits against a running residual, upper bound enforced
//!   only at export.
//! * [`fit_joshi`] — unconstrained least squares via pseudoinverse, clipped
//!   to the box at export.
//! * [`fit_cetinaslan`] — ridge-regularized normal equations
//!   `(B'B + 2*alpha*I) w = B'(target - neutral)`, clipped at export.
//!
//! Every solver works on the delta target `target - neutral` internally, so
//! the neutral mesh is handled by one convention in one place. All exported
//! weight vectors satisfy `0 <= w <= 1` exactly (projection and clipping are
//! exact comparisons, not tolerances).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics;
use crate::ordering::{next_coordinate_dynamic, static_order, OrderingStrategy, VisitedState};
use crate::rig::{BlendshapeRig, Mesh, RigKind, WeightVector};

/// Below this squared slope norm a coordinate subproblem is treated as
/// degenerate: the quadratic term carries no information, so the update
/// becomes `0` when `alpha > 0` (the penalty's box minimizer) and a no-op
/// otherwise. Degenerate visits are counted, never divided through.
pub const DEGENERATE_NORM_SQ: f64 = 1e-12;

/// Smallest objective decrease the maximum-improvement rule still commits.
pub const MIN_IMPROVEMENT: f64 = 1e-12;

/// Relative cutoff for the pseudoinverse: singular values below
/// `1e-10 * sigma_max` are treated as zero.
pub const SINGULAR_VALUE_CUTOFF: f64 = 1e-10;

/// Solver selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    CdQuartic,
    CdLinear,
    Seol,
    Joshi,
    Cetinaslan,
}

impl Method {
    /// Rig function the method fits against. Evaluation metrics always
    /// reconstruct with the full quartic rig regardless of this.
    pub fn rig_kind(&self) -> RigKind {
        match self {
            Method::CdQuartic => RigKind::Quartic,
            _ => RigKind::Linear,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::CdQuartic => "cd-quartic",
            Method::CdLinear => "cd-linear",
            Method::Seol => "seol",
            Method::Joshi => "joshi",
            Method::Cetinaslan => "cetinaslan",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "cd-quartic" => Ok(Method::CdQuartic),
            "cd-linear" => Ok(Method::CdLinear),
            "seol" => Ok(Method::Seol),
            "joshi" => Ok(Method::Joshi),
            "cetinaslan" => Ok(Method::Cetinaslan),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Configuration for one fit. `alpha` is ignored by `Seol`/`Joshi`,
/// `ordering` by `Joshi`/`Cetinaslan`, and `passes` defaults to the single
/// pass the greedy baseline uses.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub method: Method,
    pub alpha: f64,
    pub passes: usize,
    pub ordering: OrderingStrategy,
    /// Starting weights; all zeros when absent. A nonzero start forfeits the
    /// guarantee that mutually exclusive controllers stay separated.
    pub init: Option<WeightVector>,
    /// Enforce the upper bound inside the greedy baseline's loop instead of
    /// only at export.
    pub seol_clip_in_loop: bool,
    /// Test instrumentation: recompute the full objective after every scalar
    /// update and panic if it increased beyond `1e-10 * (1 + |obj|)`.
    pub check_descent: bool,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha: 0.0,
            passes: 1,
            ordering: OrderingStrategy::DecreasingMagnitude,
            init: None,
            seol_clip_in_loop: false,
            check_descent: false,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_passes(mut self, passes: usize) -> Self {
        self.passes = passes;
        self
    }

    pub fn with_ordering(mut self, ordering: OrderingStrategy) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn with_init(mut self, init: WeightVector) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_check_descent(mut self, on: bool) -> Self {
        self.check_descent = on;
        self
    }

    fn validate(&self, rig: &BlendshapeRig) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if self.passes == 0 {
            return Err(Error::InvalidConfig("passes must be >= 1".into()));
        }
        if let Some(init) = &self.init {
            if init.len() != rig.blendshape_count() {
                return Err(Error::DimensionMismatch {
                    context: "initial weight vector",
                    expected: rig.blendshape_count(),
                    actual: init.len(),
                });
            }
            if !init.is_feasible() {
                return Err(Error::InvalidConfig(
                    "initial weights must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Result of one fit.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Final weights; always inside `[0, 1]`.
    pub weights: WeightVector,
    /// Objective value after each full pass (a single entry for the joint
    /// solvers).
    pub objective_trace: Vec<f64>,
    /// Scalar coordinate updates performed.
    pub coordinate_visits: usize,
    /// Coordinate visits skipped because the slope norm was degenerate.
    pub degenerate_skips: usize,
    /// For the clipped joint solvers: nonzero count of the raw solution
    /// before clipping to the box.
    pub preclip_cardinality: Option<usize>,
    /// Wall-clock seconds spent in the solve (excludes reusable per-rig
    /// factorization work, see [`RigFactorization`]).
    pub wall_time_s: f64,
}

/// Projection onto `[0, 1]`.
pub fn project_unit_interval(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else if x > 1.0 {
        1.0
    } else {
        x
    }
}

/// The penalized objective `1/2 ||f(w) - target||^2 + alpha * 1'w` under the
/// selected rig function. Defined for any finite weights, feasible or not.
pub fn objective_value(
    rig: &BlendshapeRig,
    w: &WeightVector,
    target: &Mesh,
    alpha: f64,
    kind: RigKind,
) -> Result<f64> {
    check_target(rig, target)?;
    let f = rig.evaluate(kind, w)?;
    let fit: f64 = f
        .coords()
        .iter()
        .zip(target.coords())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(0.5 * fit + alpha * w.iter().sum::<f64>())
}

fn check_target(rig: &BlendshapeRig, target: &Mesh) -> Result<()> {
    if target.dim() != rig.dim() {
        return Err(Error::DimensionMismatch {
            context: "target mesh",
            expected: rig.dim(),
            actual: target.dim(),
        });
    }
    Ok(())
}

/// Minimizer over `[0, 1]` of the quartic rig's scalar subproblem in
/// coordinate `i`, all other weights held at their values in `w`:
/// `P((-phi_i' psi_i - alpha) / ||phi_i||^2)`.
///
/// Degenerate slope (`||phi_i||^2 < 1e-12`): returns `0` when `alpha > 0`
/// and the current `w[i]` otherwise, without dividing.
pub fn coordinate_update_quartic(
    rig: &BlendshapeRig,
    w: &WeightVector,
    i: usize,
    target: &Mesh,
    alpha: f64,
) -> Result<f64> {
    check_target(rig, target)?;
    let phi = rig.phi(w, i)?;
    let a = linalg::norm_sq(&phi);
    if a < DEGENERATE_NORM_SQ {
        return Ok(if alpha > 0.0 { 0.0 } else { w[i] });
    }
    let psi = rig.psi(w, i, target)?;
    Ok(project_unit_interval((-linalg::dot(&phi, &psi) - alpha) / a))
}

/// Linear-rig counterpart of [`coordinate_update_quartic`]: the slope is the
/// blendshape column itself and the intercept is the rest of the linear
/// combination plus the neutral, minus the target.
pub fn coordinate_update_linear(
    rig: &BlendshapeRig,
    w: &WeightVector,
    i: usize,
    target: &Mesh,
    alpha: f64,
) -> Result<f64> {
    check_target(rig, target)?;
    if i >= rig.blendshape_count() {
        return Err(Error::IndexOutOfRange {
            index: i,
            m: rig.blendshape_count(),
        });
    }
    let phi = rig.blendshape(i);
    let a = linalg::norm_sq(phi);
    if a < DEGENERATE_NORM_SQ {
        return Ok(if alpha > 0.0 { 0.0 } else { w[i] });
    }
    // psi = sum_{j != i} w_j b_j + b0 - target
    let mut masked = w.clone();
    masked.as_mut_slice()[i] = 0.0;
    let mut psi = rig.evaluate_linear(&masked)?.into_coords();
    for (p, t) in psi.iter_mut().zip(target.coords()) {
        *p -= t;
    }
    Ok(project_unit_interval((-linalg::dot(phi, &psi) - alpha) / a))
}

/// Sequential descent state shared by the coordinate-descent solver and the
/// greedy baseline. Maintains the residual `target - f(w)` incrementally
/// (the rig is affine in the updated coordinate, so `r -= step * phi_i` is
/// exact) and refreshes it from a full evaluation at every pass boundary.
struct SequentialFit<'a> {
    rig: &'a BlendshapeRig,
    kind: RigKind,
    target: &'a Mesh,
    alpha: f64,
    clip_upper: bool,
    w: WeightVector,
    residual: Vec<f64>,
    phi: Vec<f64>,
    visits: usize,
    degenerate: usize,
    // Some(previous objective) when per-update descent checking is on.
    descent_check: Option<f64>,
}

impl<'a> SequentialFit<'a> {
    fn new(
        rig: &'a BlendshapeRig,
        kind: RigKind,
        target: &'a Mesh,
        alpha: f64,
        clip_upper: bool,
        init: WeightVector,
        check_descent: bool,
    ) -> Result<Self> {
        check_target(rig, target)?;
        let descent_check = if check_descent {
            Some(objective_value(rig, &init, target, alpha, kind)?)
        } else {
            None
        };
        Ok(Self {
            rig,
            kind,
            target,
            alpha,
            clip_upper,
            w: init,
            residual: vec![0.0; rig.dim()],
            phi: vec![0.0; rig.dim()],
            visits: 0,
            degenerate: 0,
            descent_check,
        })
    }

    fn refresh_residual(&mut self) -> Result<()> {
        let f = self.rig.evaluate(self.kind, &self.w)?;
        for (r, (t, fe)) in self
            .residual
            .iter_mut()
            .zip(self.target.coords().iter().zip(f.coords()))
        {
            *r = t - fe;
        }
        Ok(())
    }

    fn objective(&self) -> Result<f64> {
        objective_value(self.rig, &self.w, self.target, self.alpha, self.kind)
    }

    /// One scalar update of coordinate `i` against the live residual.
    fn update(&mut self, i: usize) -> Result<()> {
        self.rig.phi_kind_into(self.kind, &self.w, i, &mut self.phi);
        let a = linalg::norm_sq(&self.phi);
        if a < DEGENERATE_NORM_SQ {
            self.degenerate += 1;
            if self.alpha > 0.0 && self.w[i] != 0.0 {
                let old = self.w[i];
                self.w.as_mut_slice()[i] = 0.0;
                linalg::axpy(&mut self.residual, old, &self.phi);
            }
            return Ok(());
        }
        let g = linalg::dot(&self.phi, &self.residual);
        let candidate = self.w[i] + (g - self.alpha) / a;
        let updated = if self.clip_upper {
            project_unit_interval(candidate)
        } else {
            candidate.max(0.0)
        };
        let step = updated - self.w[i];
        if step != 0.0 {
            linalg::axpy(&mut self.residual, -step, &self.phi);
        }
        self.w.as_mut_slice()[i] = updated;
        self.visits += 1;

        if let Some(prev) = self.descent_check {
            let obj = self.objective()?;
            assert!(
                obj <= prev + 1e-10 * (1.0 + prev.abs()),
                "coordinate update increased the objective: {prev} -> {obj} (coordinate {i})"
            );
            self.descent_check = Some(obj);
        }
        Ok(())
    }
}

/// Box-projected coordinate descent (the linear or quartic rig, per
/// `config.method`). Runs `config.passes` passes; within a pass coordinates
/// are visited in the order produced by the configured strategy. Records the
/// objective after each pass.
pub fn fit_coordinate_descent(
    rig: &BlendshapeRig,
    target: &Mesh,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let kind = match config.method {
        Method::CdQuartic => RigKind::Quartic,
        Method::CdLinear => RigKind::Linear,
        other => {
            return Err(Error::InvalidConfig(format!(
                "fit_coordinate_descent does not handle method '{}'",
                other.name()
            )))
        }
    };
    config.validate(rig)?;
    let m = rig.blendshape_count();
    let start = Instant::now();
    let init = config
        .init
        .clone()
        .unwrap_or_else(|| WeightVector::zeros(m));

    let schedule = if config.ordering.is_static() {
        Some(static_order(rig, &config.ordering, Some(target))?)
    } else {
        None
    };

    let mut fit = SequentialFit::new(
        rig,
        kind,
        target,
        config.alpha,
        true,
        init,
        config.check_descent,
    )?;
    let mut trace = Vec::with_capacity(config.passes);
    for _ in 0..config.passes {
        fit.refresh_residual()?;
        match &schedule {
            Some(order) => {
                for &i in order {
                    fit.update(i)?;
                }
            }
            None => {
                let mut state = VisitedState::new(m);
                loop {
                    let pick = next_coordinate_dynamic(
                        rig,
                        &fit.w,
                        &fit.residual,
                        &config.ordering,
                        config.alpha,
                        kind,
                        &mut state,
                    )?;
                    match pick {
                        Some(i) => fit.update(i)?,
                        None => break,
                    }
                }
            }
        }
        trace.push(fit.objective()?);
    }

    debug_assert!(fit.w.is_feasible());
    Ok(SolveReport {
        weights: fit.w,
        objective_trace: trace,
        coordinate_visits: fit.visits,
        degenerate_skips: fit.degenerate,
        preclip_cardinality: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Greedy sequential baseline, single pass (see [`fit_seol_with`] for the
/// multi-pass variant): starting from the delta residual
/// `target - neutral`, each coordinate in turn receives the nonnegative
/// least-squares fit of the residual onto its blendshape, and its
/// contribution is subtracted. Weights above one are clipped only at export.
pub fn fit_seol(
    rig: &BlendshapeRig,
    target: &Mesh,
    ordering: &OrderingStrategy,
) -> Result<SolveReport> {
    fit_seol_with(rig, target, ordering, 1, false)
}

/// Multi-pass greedy baseline. Passes after the first repeat the two-step
/// rule against the running residual, accumulating onto the existing
/// weights. With `clip_in_loop` the upper bound is enforced during the
/// sweep rather than only at export.
pub fn fit_seol_with(
    rig: &BlendshapeRig,
    target: &Mesh,
    ordering: &OrderingStrategy,
    passes: usize,
    clip_in_loop: bool,
) -> Result<SolveReport> {
    if passes == 0 {
        return Err(Error::InvalidConfig("passes must be >= 1".into()));
    }
    let order = static_order(rig, ordering, Some(target))?;
    let start = Instant::now();
    let m = rig.blendshape_count();
    let mut fit = SequentialFit::new(
        rig,
        RigKind::Linear,
        target,
        0.0,
        clip_in_loop,
        WeightVector::zeros(m),
        false,
    )?;
    let mut trace = Vec::with_capacity(passes);
    for _ in 0..passes {
        fit.refresh_residual()?;
        for &i in &order {
            fit.update(i)?;
        }
        trace.push(fit.objective()?);
    }
    let mut weights = fit.w;
    for w in weights.as_mut_slice() {
        *w = w.min(1.0);
    }
    Ok(SolveReport {
        weights,
        objective_trace: trace,
        coordinate_visits: fit.visits,
        degenerate_skips: fit.degenerate,
        preclip_cardinality: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Reusable per-rig factorizations for the joint solvers: a thin SVD of the
/// blendshape matrix (pseudoinverse path) and its Gram matrix (ridge path).
/// Build once per rig, then solve many frames.
pub struct RigFactorization {
    gram: DMatrix<f64>,
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    singular_values: DVector<f64>,
}

impl RigFactorization {
    pub fn new(rig: &BlendshapeRig) -> Result<Self> {
        let m = rig.blendshape_count();
        let dim = rig.dim();
        let mut data = Vec::with_capacity(dim * m);
        for i in 0..m {
            data.extend_from_slice(rig.blendshape(i));
        }
        let b = DMatrix::from_column_slice(dim, m, &data);

        let mut gram = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let g = linalg::dot(rig.blendshape(i), rig.blendshape(j));
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }

        let svd = nalgebra::SVD::try_new(b, true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::InvalidConfig("SVD of blendshape matrix failed".into()))?;
        Ok(Self {
            gram,
            u: svd.u.expect("requested U"),
            v_t: svd.v_t.expect("requested V^T"),
            singular_values: svd.singular_values,
        })
    }

    fn delta(rig: &BlendshapeRig, target: &Mesh) -> DVector<f64> {
        DVector::from_iterator(
            rig.dim(),
            target
                .coords()
                .iter()
                .zip(rig.neutral().coords())
                .map(|(t, n)| t - n),
        )
    }

    /// Pseudoinverse applied to the delta target, with singular values below
    /// `1e-10 * sigma_max` treated as zero.
    fn pinv_apply(&self, delta: &DVector<f64>) -> DVector<f64> {
        let sigma_max = self.singular_values.max();
        let cutoff = SINGULAR_VALUE_CUTOFF * sigma_max;
        let mut c = self.u.transpose() * delta;
        for (ci, s) in c.iter_mut().zip(self.singular_values.iter()) {
            *ci = if *s > cutoff { *ci / s } else { 0.0 };
        }
        self.v_t.transpose() * c
    }

    /// Unconstrained least squares via the pseudoinverse, clipped to the box
    /// at export. The report records the pre-clip nonzero count.
    pub fn joshi(&self, rig: &BlendshapeRig, target: &Mesh) -> Result<SolveReport> {
        check_target(rig, target)?;
        let start = Instant::now();
        let raw = self.pinv_apply(&Self::delta(rig, target));
        self.export_clipped(rig, target, raw, 0.0, start)
    }

    /// Ridge system `(B'B + 2*alpha*I) w = B'(target - neutral)`, clipped to
    /// the box at export. A singular system (only possible at `alpha = 0`)
    /// falls back to the pseudoinverse path and is then identical to
    /// [`joshi`](Self::joshi).
    pub fn cetinaslan(
        &self,
        rig: &BlendshapeRig,
        target: &Mesh,
        alpha: f64,
    ) -> Result<SolveReport> {
        check_target(rig, target)?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        let start = Instant::now();
        let m = self.gram.nrows();
        let mut a = self.gram.clone();
        for i in 0..m {
            a[(i, i)] += 2.0 * alpha;
        }
        let delta = Self::delta(rig, target);
        let rhs = DVector::from_iterator(
            m,
            (0..m).map(|i| linalg::dot(rig.blendshape(i), delta.as_slice())),
        );
        let raw = match a.cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => self.pinv_apply(&delta),
        };
        self.export_clipped(rig, target, raw, alpha, start)
    }

    fn export_clipped(
        &self,
        rig: &BlendshapeRig,
        target: &Mesh,
        raw: DVector<f64>,
        alpha: f64,
        start: Instant,
    ) -> Result<SolveReport> {
        let preclip = WeightVector::from_vec(raw.as_slice().to_vec());
        let preclip_cardinality = metrics::cardinality(&preclip, metrics::CARDINALITY_EPS);
        let weights = WeightVector::from_vec(
            raw.iter().map(|&x| project_unit_interval(x)).collect(),
        );
        let objective = objective_value(rig, &weights, target, alpha, RigKind::Linear)?;
        Ok(SolveReport {
            weights,
            objective_trace: vec![objective],
            coordinate_visits: 0,
            degenerate_skips: 0,
            preclip_cardinality: Some(preclip_cardinality),
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }
}

/// One-shot pseudoinverse solve; factorizes the rig on every call. Use
/// [`RigFactorization`] to amortize the factorization over a sequence.
pub fn fit_joshi(rig: &BlendshapeRig, target: &Mesh) -> Result<SolveReport> {
    RigFactorization::new(rig)?.joshi(rig, target)
}

/// One-shot ridge solve; factorizes the rig on every call.
pub fn fit_cetinaslan(rig: &BlendshapeRig, target: &Mesh, alpha: f64) -> Result<SolveReport> {
    RigFactorization::new(rig)?.cetinaslan(rig, target, alpha)
}

/// Dispatches on `config.method`.
pub fn fit(rig: &BlendshapeRig, target: &Mesh, config: &SolverConfig) -> Result<SolveReport> {
    match config.method {
        Method::CdQuartic | Method::CdLinear => fit_coordinate_descent(rig, target, config),
        Method::Seol => fit_seol_with(
            rig,
            target,
            &config.ordering,
            config.passes,
            config.seol_clip_in_loop,
        ),
        Method::Joshi => fit_joshi(rig, target),
        Method::Cetinaslan => fit_cetinaslan(rig, target, config.alpha),
    }
}
