//! Evaluation metrics: mesh error per frame, weight-vector sparsity, and
//! temporal smoothness of weight tracks over a sequence.
//!
//! Reconstructions are always produced with the full quartic rig, no matter
//! which rig function a solver fitted against, so methods are compared on
//! the same footing.

use crate::error::{Error, Result};
use crate::rig::{BlendshapeRig, Mesh, WeightVector};

/// Weights with magnitude at or below this count as zero. Projection
/// produces exact zeros, but clipped joint solvers can leave denormal
/// residue behind.
pub const CARDINALITY_EPS: f64 = 1e-6;

fn check_same_vertices(reconstruction: &Mesh, clean: &Mesh) -> Result<usize> {
    let n = clean.vertex_count();
    if reconstruction.vertex_count() != n {
        return Err(Error::DimensionMismatch {
            context: "metric mesh pair",
            expected: clean.dim(),
            actual: reconstruction.dim(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidConfig("metrics need at least one vertex".into()));
    }
    Ok(n)
}

/// Root mean squared error `sqrt(||reconstruction - clean||^2 / n)`. The
/// divisor is the vertex count `n`, not the coordinate count `3n`.
pub fn rmse_mean(reconstruction: &Mesh, clean: &Mesh) -> Result<f64> {
    let n = check_same_vertices(reconstruction, clean)?;
    let ss: f64 = reconstruction
        .coords()
        .iter()
        .zip(clean.coords())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / n as f64).sqrt())
}

/// 95th percentile of per-vertex Euclidean error magnitudes, nearest-rank
/// rule on the sorted errors.
pub fn rmse_p95(reconstruction: &Mesh, clean: &Mesh) -> Result<f64> {
    let n = check_same_vertices(reconstruction, clean)?;
    let mut errors: Vec<f64> = (0..n)
        .map(|v| {
            let a = reconstruction.vertex(v);
            let b = clean.vertex(v);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        })
        .collect();
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    Ok(errors[rank - 1])
}

/// Number of weights with `|w_i| > eps`.
pub fn cardinality(w: &WeightVector, eps: f64) -> usize {
    w.iter().filter(|x| x.abs() > eps).count()
}

/// `sum_i |w_i|`; equals `1'w` for feasible weights.
pub fn l1_norm(w: &WeightVector) -> f64 {
    w.iter().map(|x| x.abs()).sum()
}

/// Temporal roughness of one weight track: the sum of squared second-order
/// differences. Zero for constant and affine tracks, and for tracks shorter
/// than three frames (empty sum).
pub fn roughness(track: &[f64]) -> f64 {
    if track.len() < 3 {
        return 0.0;
    }
    track
        .windows(3)
        .map(|w| {
            let d = w[0] - 2.0 * w[1] + w[2];
            d * d
        })
        .sum()
}

/// Metrics of a single fitted frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMetrics {
    pub frame_id: usize,
    pub rmse_mean: f64,
    pub rmse_p95: f64,
    pub cardinality: usize,
    pub l1_norm: f64,
    /// Solve wall time, when the caller has it (measured during fitting, not
    /// here).
    pub solve_time_s: Option<f64>,
}

/// Sequence-level means: each frame metric averaged over frames, roughness
/// averaged over the per-weight tracks.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregates {
    pub rmse_mean: f64,
    pub rmse_p95: f64,
    pub cardinality: f64,
    pub l1_norm: f64,
    pub roughness: f64,
    pub solve_time_s: Option<f64>,
}

/// Per-frame and per-sequence metric values for one solver run.
#[derive(Clone, Debug)]
pub struct MetricTable {
    pub per_frame: Vec<FrameMetrics>,
    pub per_weight_roughness: Vec<f64>,
    pub aggregates: Aggregates,
}

impl MetricTable {
    /// Evaluates a fitted weight sequence against the clean reference
    /// meshes, reconstructing every frame with the full quartic rig.
    /// `solve_times` (seconds, one per frame) are copied through when given.
    pub fn evaluate(
        rig: &BlendshapeRig,
        weights: &[WeightVector],
        clean: &[Mesh],
        solve_times: Option<&[f64]>,
    ) -> Result<MetricTable> {
        if weights.len() != clean.len() {
            return Err(Error::DimensionMismatch {
                context: "frames in weight and mesh sequences",
                expected: clean.len(),
                actual: weights.len(),
            });
        }
        if weights.is_empty() {
            return Err(Error::InvalidConfig("empty sequence".into()));
        }
        if let Some(times) = solve_times {
            if times.len() != weights.len() {
                return Err(Error::DimensionMismatch {
                    context: "solve-time records",
                    expected: weights.len(),
                    actual: times.len(),
                });
            }
        }

        let frame_count = weights.len();
        let m = rig.blendshape_count();
        let mut per_frame = Vec::with_capacity(frame_count);
        for (t, (w, reference)) in weights.iter().zip(clean).enumerate() {
            let reconstruction = rig.evaluate_quartic(w)?;
            per_frame.push(FrameMetrics {
                frame_id: t,
                rmse_mean: rmse_mean(&reconstruction, reference)?,
                rmse_p95: rmse_p95(&reconstruction, reference)?,
                cardinality: cardinality(w, CARDINALITY_EPS),
                l1_norm: l1_norm(w),
                solve_time_s: solve_times.map(|ts| ts[t]),
            });
        }

        let per_weight_roughness: Vec<f64> = (0..m)
            .map(|j| {
                let track: Vec<f64> = weights.iter().map(|w| w[j]).collect();
                roughness(&track)
            })
            .collect();

        let fc = frame_count as f64;
        let aggregates = Aggregates {
            rmse_mean: per_frame.iter().map(|f| f.rmse_mean).sum::<f64>() / fc,
            rmse_p95: per_frame.iter().map(|f| f.rmse_p95).sum::<f64>() / fc,
            cardinality: per_frame.iter().map(|f| f.cardinality as f64).sum::<f64>() / fc,
            l1_norm: per_frame.iter().map(|f| f.l1_norm).sum::<f64>() / fc,
            roughness: per_weight_roughness.iter().sum::<f64>() / m.max(1) as f64,
            solve_time_s: solve_times
                .map(|ts| ts.iter().sum::<f64>() / ts.len().max(1) as f64),
        };

        Ok(MetricTable {
            per_frame,
            per_weight_roughness,
            aggregates,
        })
    }

    /// Per-frame metrics as CSV. Wall times are deliberately kept out of
    /// this table (they are not reproducible across runs); see
    /// [`timings_csv`](Self::timings_csv).
    pub fn frames_csv(&self) -> String {
        let mut out = String::from("frame_id,rmse_mean,rmse_p95,cardinality,l1_norm\n");
        for f in &self.per_frame {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.frame_id, f.rmse_mean, f.rmse_p95, f.cardinality, f.l1_norm
            ));
        }
        out
    }

    /// Per-weight temporal roughness as CSV.
    pub fn roughness_csv(&self) -> String {
        let mut out = String::from("weight_id,roughness\n");
        for (j, r) in self.per_weight_roughness.iter().enumerate() {
            out.push_str(&format!("{j},{r}\n"));
        }
        out
    }

    /// Per-frame solve times as CSV, when present.
    pub fn timings_csv(&self) -> Option<String> {
        if self.per_frame.iter().any(|f| f.solve_time_s.is_none()) {
            return None;
        }
        let mut out = String::from("frame_id,solve_time_s\n");
        for f in &self.per_frame {
            out.push_str(&format!("{},{}\n", f.frame_id, f.solve_time_s.unwrap()));
        }
        Some(out)
    }
}
