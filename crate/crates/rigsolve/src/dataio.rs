//! File formats and synthetic benchmark data.
//!
//! Rigs and animations are stored as versioned JSON documents. Numbers are
//! written in the shortest decimal form that parses back to the identical
//! `f64`, so `load(save(x)) == x` bit for bit. Files are deliberately
//! textual and diffable; at desk scale (10k vertices) they run to tens of
//! megabytes, which is accepted — debuggability first.
//!
//! The synthetic generator stands in for production characters that cannot
//! be redistributed. Meshes live on a sphere of head-like proportions
//! (18 cm across), blendshapes are spatially localized offset fields with
//! distinct displacement magnitudes, and corrective offsets are scaled-down
//! fields attached to random index tuples. Everything is deterministic in
//! the seed, using a stream cipher generator so the bytes are identical
//! across platforms.
//!
//! Noise injection adds i.i.d. zero-mean Gaussian offsets to every
//! coordinate; `sigma2` is the *variance* of that distribution. Fitting
//! consumes noisy targets while evaluation must use the clean reference;
//! animation files carry a `noisy` flag so the pipeline can refuse to
//! evaluate against corrupted data.

use std::collections::HashSet;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::rig::{BlendshapeRig, CorrectiveTerm, Mesh, WeightVector};

pub const RIG_FORMAT_VERSION: u32 = 1;
pub const ANIMATION_FORMAT_VERSION: u32 = 1;

/// Ear-to-ear head width of the synthetic character, in centimeters.
pub const HEAD_WIDTH_CM: f64 = 18.0;

/// Deterministically derives an independent sub-seed (splitmix64 step).
/// Used to give every frame and every pipeline stage its own generator
/// stream from one top-level seed.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut data = serde_json::to_vec(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    data.push(b'\n');
    std::fs::write(path, data).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let data = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&data).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// One corrective offset as stored on disk. Indices are zero-based
/// blendshape indices, strictly increasing, tuple length 2 to 4.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub indices: Vec<usize>,
    pub offset: Vec<f64>,
}

/// On-disk rig document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigFile {
    pub format_version: u32,
    pub m: usize,
    pub n: usize,
    pub neutral: Vec<f64>,
    pub blendshapes: Vec<Vec<f64>>,
    pub corrections: Vec<CorrectionRecord>,
}

impl RigFile {
    pub fn from_rig(rig: &BlendshapeRig) -> Self {
        Self {
            format_version: RIG_FORMAT_VERSION,
            m: rig.blendshape_count(),
            n: rig.vertex_count(),
            neutral: rig.neutral().coords().to_vec(),
            blendshapes: (0..rig.blendshape_count())
                .map(|i| rig.blendshape(i).to_vec())
                .collect(),
            corrections: rig
                .corrections()
                .iter()
                .map(|t| CorrectionRecord {
                    indices: t.indices().to_vec(),
                    offset: t.offset().to_vec(),
                })
                .collect(),
        }
    }

    /// Validates and converts into the in-memory rig.
    pub fn into_rig(self) -> Result<BlendshapeRig> {
        if self.format_version != RIG_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: RIG_FORMAT_VERSION,
            });
        }
        if self.blendshapes.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "rig file blendshape list",
                expected: self.m,
                actual: self.blendshapes.len(),
            });
        }
        if self.neutral.len() != 3 * self.n {
            return Err(Error::DimensionMismatch {
                context: "rig file neutral mesh",
                expected: 3 * self.n,
                actual: self.neutral.len(),
            });
        }
        let neutral = Mesh::from_coords(self.neutral)?;
        let corrections = self
            .corrections
            .into_iter()
            .map(|c| CorrectiveTerm::new(c.indices, c.offset))
            .collect::<Result<Vec<_>>>()?;
        BlendshapeRig::new(neutral, self.blendshapes, corrections)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Loads a rig file and converts it in one step.
pub fn load_rig(path: &Path) -> Result<BlendshapeRig> {
    RigFile::load(path)?.into_rig()
}

pub fn save_rig(rig: &BlendshapeRig, path: &Path) -> Result<()> {
    RigFile::from_rig(rig).save(path)
}

/// What one animation frame holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    /// Per-frame weight vectors of length `m`.
    Weights,
    /// Per-frame flat mesh vectors of length `3n`.
    Mesh,
}

/// On-disk animation document: a uniform sequence of frames, all of one
/// kind and one length, with a record of any noise applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnimationFile {
    pub format_version: u32,
    pub kind: FrameKind,
    pub frame_count: usize,
    /// Entries per frame: `m` for weights, `3n` for meshes.
    pub dim: usize,
    /// Set when the frames were corrupted with additive noise. Evaluation
    /// refuses files with this flag.
    pub noisy: bool,
    /// Per-coordinate Gaussian noise variance, recorded when noise was
    /// applied (zero variance leaves the data clean).
    pub noise_variance: Option<f64>,
    pub frames: Vec<Vec<f64>>,
}

impl AnimationFile {
    pub fn from_weights(weights: &[WeightVector]) -> Result<Self> {
        let dim = weights.first().map(|w| w.len()).unwrap_or(0);
        let file = Self {
            format_version: ANIMATION_FORMAT_VERSION,
            kind: FrameKind::Weights,
            frame_count: weights.len(),
            dim,
            noisy: false,
            noise_variance: None,
            frames: weights.iter().map(|w| w.as_slice().to_vec()).collect(),
        };
        file.validate()?;
        Ok(file)
    }

    pub fn from_meshes(meshes: &[Mesh]) -> Result<Self> {
        let dim = meshes.first().map(|m| m.dim()).unwrap_or(0);
        let file = Self {
            format_version: ANIMATION_FORMAT_VERSION,
            kind: FrameKind::Mesh,
            frame_count: meshes.len(),
            dim,
            noisy: false,
            noise_variance: None,
            frames: meshes.iter().map(|m| m.coords().to_vec()).collect(),
        };
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != ANIMATION_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: ANIMATION_FORMAT_VERSION,
            });
        }
        if self.frames.len() != self.frame_count {
            return Err(Error::DimensionMismatch {
                context: "animation frame count",
                expected: self.frame_count,
                actual: self.frames.len(),
            });
        }
        if self.kind == FrameKind::Mesh && self.dim % 3 != 0 {
            return Err(Error::DimensionMismatch {
                context: "mesh animation frame dim (must be 3*n)",
                expected: self.dim / 3 * 3,
                actual: self.dim,
            });
        }
        for f in &self.frames {
            if f.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    context: "animation frame",
                    expected: self.dim,
                    actual: f.len(),
                });
            }
            if !f.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite("animation frame"));
            }
        }
        Ok(())
    }

    pub fn to_weights(&self) -> Result<Vec<WeightVector>> {
        if self.kind != FrameKind::Weights {
            return Err(Error::InvalidConfig(
                "animation file holds meshes, expected weights".into(),
            ));
        }
        Ok(self
            .frames
            .iter()
            .map(|f| WeightVector::from_vec(f.clone()))
            .collect())
    }

    pub fn to_meshes(&self) -> Result<Vec<Mesh>> {
        if self.kind != FrameKind::Mesh {
            return Err(Error::InvalidConfig(
                "animation file holds weights, expected meshes".into(),
            ));
        }
        self.frames
            .iter()
            .map(|f| Mesh::from_coords(f.clone()))
            .collect()
    }

    /// Guards evaluation inputs: clean reference data must not carry the
    /// noisy flag.
    pub fn require_clean(&self, role: &str) -> Result<()> {
        if self.noisy {
            return Err(Error::NoisyReference(format!(
                "{role} is flagged noisy (variance {:?})",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: Self = read_json(path)?;
        file.validate()?;
        Ok(file)
    }
}

/// Parameters of the synthetic benchmark character. Defaults mirror a
/// production-scale face: 102 blendshapes over 10k vertices with 185/130/50
/// corrective pairs/triplets/quadruplets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub pairs: usize,
    pub triplets: usize,
    pub quads: usize,
    /// Blendshape displacement magnitudes are drawn log-uniformly from this
    /// range (cm). Continuous draws keep the sorted norms strictly
    /// decreasing with probability one.
    pub magnitude_range: (f64, f64),
    /// Spatial falloff radius range of a blendshape's support (cm).
    pub support_radius_range: (f64, f64),
    /// Corrective offset magnitude relative to the mean magnitude of the
    /// parent blendshapes.
    pub correction_scale: f64,
    /// 0 = coherent per-blendshape direction fields (strongly correlated
    /// columns), 1 = independent per-vertex directions (well-conditioned
    /// basis).
    pub jitter: f64,
    /// Fraction of blendshapes generated as near-clones of an earlier one,
    /// modelling mutually exclusive controllers (two sculpts that move the
    /// same region almost identically). Redundant bases make the fit
    /// order-dependent: which clone wins is decided by the visit order.
    pub redundancy: f64,
    /// Ground-truth nonzero weights per generated frame.
    pub sparsity: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            m: 102,
            n: 10_000,
            pairs: 185,
            triplets: 130,
            quads: 50,
            magnitude_range: (0.3, 3.0),
            support_radius_range: (1.5, 4.5),
            correction_scale: 0.1,
            jitter: 0.5,
            redundancy: 0.0,
            sparsity: 55,
            seed: 0,
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
        if acc > 1e18 {
            return 1e18;
        }
    }
    acc
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InfeasibleSpec("m and n must be positive".into()));
        }
        for (count, level) in [(self.pairs, 2), (self.triplets, 3), (self.quads, 4)] {
            if count as f64 > binomial(self.m, level) {
                return Err(Error::InfeasibleSpec(format!(
                    "{count} level-{level} corrections exceed C({}, {level})",
                    self.m
                )));
            }
        }
        let (lo, hi) = self.magnitude_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InfeasibleSpec("bad magnitude range".into()));
        }
        let (rlo, rhi) = self.support_radius_range;
        if !(rlo > 0.0 && rhi >= rlo) {
            return Err(Error::InfeasibleSpec("bad support radius range".into()));
        }
        if !(0.0..=1.0).contains(&self.jitter) {
            return Err(Error::InfeasibleSpec("jitter must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.redundancy) {
            return Err(Error::InfeasibleSpec("redundancy must be in [0, 1]".into()));
        }
        if self.correction_scale < 0.0 {
            return Err(Error::InfeasibleSpec("negative correction scale".into()));
        }
        if self.sparsity > self.m {
            return Err(Error::InfeasibleSpec(format!(
                "sparsity {} exceeds m = {}",
                self.sparsity, self.m
            )));
        }
        Ok(())
    }
}

/// Evenly distributed points on a sphere of radius `HEAD_WIDTH_CM / 2`
/// (golden-angle spiral). Deterministic, no randomness involved.
fn sphere_vertices(n: usize) -> Vec<[f64; 3]> {
    let radius = HEAD_WIDTH_CM / 2.0;
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|i| {
            let y = if n == 1 {
                0.0
            } else {
                1.0 - 2.0 * i as f64 / (n - 1) as f64
            };
            let r = (1.0 - y * y).max(0.0).sqrt();
            let theta = golden * i as f64;
            [
                radius * r * theta.cos(),
                radius * y,
                radius * r * theta.sin(),
            ]
        })
        .collect()
}

/// A localized offset field: direction blended between one coherent axis and
/// per-vertex noise, attenuated by a Gaussian falloff around a center
/// vertex, then rescaled to an exact norm.
fn offset_field(
    rng: &mut ChaCha8Rng,
    vertices: &[[f64; 3]],
    center: usize,
    radius: f64,
    jitter: f64,
    norm: f64,
) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut axis: [f64; 3] = [
        normal.sample(rng),
        normal.sample(rng),
        normal.sample(rng),
    ];
    let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2])
        .sqrt()
        .max(1e-12);
    axis.iter_mut().for_each(|a| *a /= len);

    let c = vertices[center];
    let inv = 1.0 / (2.0 * radius * radius);
    let mut field = Vec::with_capacity(3 * vertices.len());
    for v in vertices {
        let d2 = (v[0] - c[0]).powi(2) + (v[1] - c[1]).powi(2) + (v[2] - c[2]).powi(2);
        let fall = (-d2 * inv).exp();
        for axis_e in axis {
            let e: f64 = normal.sample(rng);
            field.push(fall * ((1.0 - jitter) * axis_e + jitter * e));
        }
    }
    let current = field.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let scale = norm / current;
    field.iter_mut().for_each(|x| *x *= scale);
    field
}

/// Samples `count` distinct sorted index tuples of the given level.
fn sample_tuples(
    rng: &mut ChaCha8Rng,
    m: usize,
    level: usize,
    count: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 + 100 * count {
            return Err(Error::InfeasibleSpec(format!(
                "could not sample {count} distinct level-{level} tuples from m = {m}"
            )));
        }
        let mut tuple: Vec<usize> = rand::seq::index::sample(rng, m, level).into_vec();
        tuple.sort_unstable();
        if seen.insert(tuple.clone()) {
            out.push(tuple);
        }
    }
    Ok(out)
}

/// Generates the synthetic rig. Deterministic in `spec.seed`.
pub fn generate_rig(spec: &SyntheticSpec) -> Result<BlendshapeRig> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 1));
    let vertices = sphere_vertices(spec.n);

    let neutral = Mesh::from_coords(vertices.iter().flatten().copied().collect())?;

    let (lo, hi) = spec.magnitude_range;
    let (rlo, rhi) = spec.support_radius_range;
    let mut centers = Vec::with_capacity(spec.m);
    let mut radii = Vec::with_capacity(spec.m);
    let mut norms: Vec<f64> = Vec::with_capacity(spec.m);
    let mut blendshapes: Vec<Vec<f64>> = Vec::with_capacity(spec.m);
    for i in 0..spec.m {
        let clone_parent = if i > 0 && rng.random_bool(spec.redundancy) {
            Some(rng.random_range(0..i))
        } else {
            None
        };
        let (norm, field) = match clone_parent {
            Some(p) => {
                // Near-clone of an earlier blendshape: same region, nearly
                // the same displacement magnitude, same direction field up
                // to a small fresh component.
                let norm = norms[p] * rng.random_range(0.97..=1.03);
                let fresh = offset_field(
                    &mut rng, &vertices, centers[p], radii[p], spec.jitter, 1.0,
                );
                let parent_norm = norms[p].max(1e-300);
                let mut f: Vec<f64> = blendshapes[p]
                    .iter()
                    .zip(&fresh)
                    .map(|(b, e)| b / parent_norm + 0.15 * e)
                    .collect();
                let current = f.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                f.iter_mut().for_each(|x| *x *= norm / current);
                centers.push(centers[p]);
                radii.push(radii[p]);
                (norm, f)
            }
            None => {
                let norm = (rng.random_range(lo.ln()..=hi.ln())).exp();
                let center = rng.random_range(0..spec.n);
                let radius = rng.random_range(rlo..=rhi);
                let f = offset_field(&mut rng, &vertices, center, radius, spec.jitter, norm);
                centers.push(center);
                radii.push(radius);
                (norm, f)
            }
        };
        blendshapes.push(field);
        norms.push(norm);
    }

    let mut corrections = Vec::with_capacity(spec.pairs + spec.triplets + spec.quads);
    for (level, count) in [(2usize, spec.pairs), (3, spec.triplets), (4, spec.quads)] {
        for tuple in sample_tuples(&mut rng, spec.m, level, count)? {
            let lead = tuple[0];
            let mean_norm =
                tuple.iter().map(|&i| norms[i]).sum::<f64>() / tuple.len() as f64;
            let offset = offset_field(
                &mut rng,
                &vertices,
                centers[lead],
                radii[lead],
                spec.jitter,
                spec.correction_scale * mean_norm,
            );
            corrections.push(CorrectiveTerm::new(tuple, offset)?);
        }
    }

    BlendshapeRig::new(neutral, blendshapes, corrections)
}

/// Frames between key poses; key poses are interpolated with a C1
/// smoothstep so weight tracks stay temporally smooth.
const KEYPOSE_SPACING: usize = 20;

/// Generates a ground-truth animation: per frame a `sparsity`-nonzero weight
/// vector with smooth tracks, plus the clean meshes obtained by pushing each
/// frame through the full quartic rig. The active set drifts slowly (about a
/// tenth of it swaps per key pose), so frame cardinality stays near
/// `sparsity` while the sequence still explores the basis.
pub fn generate_sequence(
    rig: &BlendshapeRig,
    frames: usize,
    sparsity: usize,
    seed: u64,
) -> Result<(AnimationFile, AnimationFile)> {
    let m = rig.blendshape_count();
    if sparsity > m {
        return Err(Error::InfeasibleSpec(format!(
            "sparsity {sparsity} exceeds m = {m}"
        )));
    }
    if frames == 0 {
        return Err(Error::InfeasibleSpec("frame count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));

    // Key pose times: every KEYPOSE_SPACING frames plus the final frame.
    let mut key_times: Vec<usize> = (0..frames).step_by(KEYPOSE_SPACING).collect();
    if *key_times.last().unwrap() != frames - 1 {
        key_times.push(frames - 1);
    }

    // Evolve the active set and draw key pose values.
    let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, m, sparsity).into_vec();
    let swaps = (sparsity / 10).max(usize::from(sparsity > 0 && sparsity < m));
    let mut key_values: Vec<Vec<f64>> = Vec::with_capacity(key_times.len());
    for k in 0..key_times.len() {
        if k > 0 && sparsity > 0 && sparsity < m {
            for _ in 0..swaps {
                let out_pos = rng.random_range(0..support.len());
                let candidates: Vec<usize> =
                    (0..m).filter(|i| !support.contains(i)).collect();
                if candidates.is_empty() {
                    break;
                }
                support[out_pos] = candidates[rng.random_range(0..candidates.len())];
            }
        }
        let mut pose = vec![0.0; m];
        for &i in &support {
            pose[i] = rng.random_range(0.2..0.9);
        }
        key_values.push(pose);
    }

    // Smoothstep interpolation between consecutive key poses.
    let mut weights = Vec::with_capacity(frames);
    for t in 0..frames {
        let seg = key_times
            .windows(2)
            .position(|w| t >= w[0] && t <= w[1])
            .unwrap_or(key_times.len().saturating_sub(2));
        let (t0, t1) = (key_times[seg], key_times[seg + 1]);
        let u = if t1 == t0 {
            0.0
        } else {
            (t - t0) as f64 / (t1 - t0) as f64
        };
        let s = u * u * (3.0 - 2.0 * u);
        let pose: Vec<f64> = key_values[seg]
            .iter()
            .zip(&key_values[seg + 1])
            .map(|(a, b)| (1.0 - s) * a + s * b)
            .collect();
        weights.push(WeightVector::from_vec(pose));
    }

    let meshes: Vec<Mesh> = weights
        .iter()
        .map(|w| rig.evaluate_quartic(w))
        .collect::<Result<_>>()?;

    Ok((
        AnimationFile::from_weights(&weights)?,
        AnimationFile::from_meshes(&meshes)?,
    ))
}

/// Adds i.i.d. zero-mean Gaussian noise with variance `sigma2` to every
/// coordinate. `sigma2 = 0` returns the mesh unchanged, bit for bit.
pub fn add_noise(mesh: &Mesh, sigma2: f64, seed: u64) -> Result<Mesh> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise variance must be finite and >= 0, got {sigma2}"
        )));
    }
    if sigma2 == 0.0 {
        return Ok(mesh.clone());
    }
    let normal = Normal::new(0.0, sigma2.sqrt())
        .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = mesh
        .coords()
        .iter()
        .map(|&c| c + normal.sample(&mut rng))
        .collect();
    Mesh::from_coords(coords)
}

/// Noisy copy of a clean mesh sequence, one independent seed stream per
/// frame. The result is flagged noisy whenever `sigma2 > 0` and always
/// records the variance.
pub fn add_noise_sequence(
    clean: &AnimationFile,
    sigma2: f64,
    seed: u64,
) -> Result<AnimationFile> {
    let meshes = clean.to_meshes()?;
    let noisy: Vec<Mesh> = meshes
        .iter()
        .enumerate()
        .map(|(t, mesh)| add_noise(mesh, sigma2, mix_seed(seed, 3 + t as u64)))
        .collect::<Result<_>>()?;
    let mut file = AnimationFile::from_meshes(&noisy)?;
    file.noisy = sigma2 > 0.0;
    file.noise_variance = Some(sigma2);
    Ok(file)
}

/// Mean roughness of the ground-truth weight tracks; the generator keeps
/// this small so smoothness comparisons have headroom.
pub fn sequence_roughness(weights: &AnimationFile) -> Result<f64> {
    let w = weights.to_weights()?;
    if w.is_empty() {
        return Ok(0.0);
    }
    let m = w[0].len();
    let total: f64 = (0..m)
        .map(|j| {
            let track: Vec<f64> = w.iter().map(|frame| frame[j]).collect();
            metrics::roughness(&track)
        })
        .sum();
    Ok(total / m.max(1) as f64)
}
