//! Variable-density spiral interleaf sets with analytic density compensation.
//!
//! The base interleaf is an Archimedean spiral r(θ) integrated from
//! dr/dθ = n·p(r)/2π, where p(r) is the radial gap between successive turns
//! of the *union* of all n rotated interleaves. Samples sit at uniform steps
//! in θ, so the local k-space area owned by a sample is p(r)·r·Δθ, which is
//! the analytic density compensation weight.

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{MrfError, Result};
use crate::tensor::TensorFile;
use crate::util::ContentHasher;

pub const KMAX: f64 = 0.5;

/// Union-gap profile p(r) = p_inner + (p_outer − p_inner)·(r/0.5)^γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityProfile {
    pub pitch_inner: f64,
    pub pitch_outer: f64,
    pub gamma: f64,
}

impl DensityProfile {
    /// Twice-oversampled center, exactly Nyquist at the k-space edge.
    pub fn default_for(matrix_size: usize) -> Self {
        DensityProfile {
            pitch_inner: 0.5 / matrix_size as f64,
            pitch_outer: 1.0 / matrix_size as f64,
            gamma: 1.0,
        }
    }

    /// Constant-gap profile (uniform sampling density between turns).
    pub fn uniform(pitch: f64) -> Self {
        DensityProfile {
            pitch_inner: pitch,
            pitch_outer: pitch,
            gamma: 1.0,
        }
    }

    pub fn pitch(&self, r: f64) -> f64 {
        self.pitch_inner + (self.pitch_outer - self.pitch_inner) * (r / KMAX).powf(self.gamma)
    }

    fn validate(&self, matrix_size: usize) -> Result<()> {
        if self.pitch_inner <= 0.0 || self.pitch_outer <= 0.0 {
            return Err(MrfError::invalid("pitch values must be positive"));
        }
        if self.gamma < 0.0 {
            return Err(MrfError::invalid("gamma must be nonnegative"));
        }
        // p is monotone in r, so the largest union gap is at one of the ends.
        let max_gap = self.pitch_inner.max(self.pitch_outer);
        let nyquist = 1.0 / matrix_size as f64;
        if max_gap > nyquist * (1.0 + 1e-9) {
            return Err(MrfError::InfeasibleTrajectory(format!(
                "union gap {max_gap:.6} exceeds Nyquist spacing {nyquist:.6} for matrix {matrix_size}"
            )));
        }
        Ok(())
    }
}

/// k-space sample coordinates for all interleaves plus shared per-sample
/// density compensation weights. Interleaf j is interleaf 0 rotated by
/// 2π·j/n, so the weights depend only on the sample index within an
/// interleaf.
#[derive(Debug, Clone)]
pub struct SpiralSet {
    matrix_size: usize,
    n_interleaves: usize,
    theta_step: f64,
    profile: DensityProfile,
    samples: Vec<Vec<[f64; 2]>>,
    dcf: Vec<f64>,
}

impl SpiralSet {
    pub fn matrix_size(&self) -> usize {
        self.matrix_size
    }

    pub fn n_interleaves(&self) -> usize {
        self.n_interleaves
    }

    pub fn readout_len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn theta_step(&self) -> f64 {
        self.theta_step
    }

    pub fn profile(&self) -> &DensityProfile {
        &self.profile
    }

    pub fn interleaf(&self, j: usize) -> &[[f64; 2]] {
        &self.samples[j]
    }

    pub fn base(&self) -> &[[f64; 2]] {
        &self.samples[0]
    }

    /// Per-sample-index density compensation weights (union-area convention).
    pub fn dcf(&self) -> &[f64] {
        &self.dcf
    }

    /// All interleaves concatenated in interleaf-major order; interleaf j
    /// occupies indices [j·L, (j+1)·L).
    pub fn union_coords(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.n_interleaves * self.readout_len());
        for il in &self.samples {
            out.extend_from_slice(il);
        }
        out
    }

    pub fn interleaf_sample_range(&self, j: usize) -> std::ops::Range<usize> {
        let len = self.readout_len();
        j * len..(j + 1) * len
    }

    /// dcf replicated across interleaves, aligned with `union_coords`.
    pub fn union_dcf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_interleaves * self.dcf.len());
        for _ in 0..self.n_interleaves {
            out.extend_from_slice(&self.dcf);
        }
        out
    }

    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        h.update(b"spiral");
        h.update(&(self.matrix_size as u64).to_le_bytes());
        h.update(&(self.n_interleaves as u64).to_le_bytes());
        h.update_f64s([self.theta_step]);
        for (s, &w) in self.samples[0].iter().zip(&self.dcf) {
            h.update_f32s([s[0] as f32, s[1] as f32, w as f32]);
        }
        h.finish()
    }
}

/// Integrate the base interleaf and rotate it into `n_interleaves` copies.
///
/// `readout_oversampling` sets the along-readout sample spacing at the
/// k-space edge relative to the Nyquist spacing (2.0 = twice oversampled).
pub fn generate_spiral_set(
    matrix_size: usize,
    n_interleaves: usize,
    profile: DensityProfile,
    readout_oversampling: f64,
) -> Result<SpiralSet> {
    if matrix_size < 16 {
        return Err(MrfError::invalid("matrix_size must be at least 16"));
    }
    if n_interleaves < 1 {
        return Err(MrfError::invalid("need at least one interleaf"));
    }
    if !(readout_oversampling > 0.0) {
        return Err(MrfError::invalid("readout_oversampling must be positive"));
    }
    profile.validate(matrix_size)?;

    let theta_step = 2.0 / (readout_oversampling * matrix_size as f64);
    let base = integrate_base(n_interleaves, &profile, theta_step, 16);
    if base.len() < 2 {
        return Err(MrfError::InfeasibleTrajectory(
            "degenerate spiral: fewer than two samples".into(),
        ));
    }

    let mut samples = Vec::with_capacity(n_interleaves);
    for j in 0..n_interleaves {
        let phi = 2.0 * std::f64::consts::PI * j as f64 / n_interleaves as f64;
        let (sin_phi, cos_phi) = phi.sin_cos();
        samples.push(
            base.iter()
                .map(|&[x, y]| [x * cos_phi - y * sin_phi, x * sin_phi + y * cos_phi])
                .collect(),
        );
    }

    let mut set = SpiralSet {
        matrix_size,
        n_interleaves,
        theta_step,
        profile,
        samples,
        dcf: Vec::new(),
    };
    compute_density_compensation(&mut set);
    Ok(set)
}

/// RK4 integration of dr/dθ = n·p(r)/2π at fixed θ steps, emitting one
/// sample per step while r stays inside the Nyquist radius.
fn integrate_base(
    n_interleaves: usize,
    profile: &DensityProfile,
    theta_step: f64,
    substeps: usize,
) -> Vec<[f64; 2]> {
    let scale = n_interleaves as f64 / (2.0 * std::f64::consts::PI);
    let deriv = |r: f64| scale * profile.pitch(r.min(KMAX));
    let h = theta_step / substeps as f64;
    let mut r = 0.0f64;
    let mut theta = 0.0f64;
    let mut out = vec![[0.0, 0.0]];
    loop {
        for _ in 0..substeps {
            let k1 = deriv(r);
            let k2 = deriv(r + 0.5 * h * k1);
            let k3 = deriv(r + 0.5 * h * k2);
            let k4 = deriv(r + h * k3);
            r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        theta += theta_step;
        if r >= KMAX {
            break;
        }
        out.push([r * theta.cos(), r * theta.sin()]);
    }
    out
}

/// Fill per-sample weights with the local union k-space area p(r)·r·Δθ.
///
/// All interleaves share the origin sample, so its disk area is split
/// across them; every weight stays strictly positive.
pub fn compute_density_compensation(set: &mut SpiralSet) {
    let base = &set.samples[0];
    let dth = set.theta_step;
    let mut dcf = Vec::with_capacity(base.len());
    for (m, s) in base.iter().enumerate() {
        let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
        if m == 0 {
            let r1 = if base.len() > 1 {
                let n = &base[1];
                (n[0] * n[0] + n[1] * n[1]).sqrt()
            } else {
                set.profile.pitch(0.0)
            };
            dcf.push(std::f64::consts::PI * (r1 / 2.0).powi(2) / set.n_interleaves as f64);
        } else {
            dcf.push(set.profile.pitch(r) * r * dth);
        }
    }
    set.dcf = dcf;
}

/// Write the base interleaf as (kx, ky, dcf) triples; rotated interleaves
/// are reconstructed on load, preserving the exact rotation property.
pub fn save_spiral_set(set: &SpiralSet, path: impl AsRef<Path>) -> Result<()> {
    let mut data = Vec::with_capacity(set.readout_len() * 3);
    for (s, &w) in set.base().iter().zip(set.dcf()) {
        data.push(s[0] as f32);
        data.push(s[1] as f32);
        data.push(w as f32);
    }
    let mut meta = Map::new();
    meta.insert("kind".into(), Value::String("spiral_set".into()));
    meta.insert("matrix_size".into(), serde_json::json!(set.matrix_size));
    meta.insert("n_interleaves".into(), serde_json::json!(set.n_interleaves));
    meta.insert("theta_step".into(), serde_json::json!(set.theta_step));
    meta.insert(
        "profile".into(),
        serde_json::json!({
            "pitch_inner": set.profile.pitch_inner,
            "pitch_outer": set.profile.pitch_outer,
            "gamma": set.profile.gamma,
        }),
    );
    TensorFile::new_f32(vec![set.readout_len(), 3], data, meta)?.write(path)
}

pub fn load_spiral_set(path: impl AsRef<Path>) -> Result<SpiralSet> {
    let t = TensorFile::read(path)?;
    if t.meta_str("kind")? != "spiral_set" {
        return Err(MrfError::format("tensor file is not a spiral set"));
    }
    if t.shape.len() != 2 || t.shape[1] != 3 {
        return Err(MrfError::format("spiral tensor must have shape [len, 3]"));
    }
    let matrix_size = t.meta_u64("matrix_size")? as usize;
    let n_interleaves = t.meta_u64("n_interleaves")? as usize;
    let theta_step = t.meta_f64("theta_step")?;
    let prof = t
        .meta
        .get("profile")
        .and_then(Value::as_object)
        .ok_or_else(|| MrfError::format("missing profile"))?;
    let get = |k: &str| -> Result<f64> {
        prof.get(k)
            .and_then(Value::as_f64)
            .ok_or_else(|| MrfError::format(format!("missing profile key '{k}'")))
    };
    let profile = DensityProfile {
        pitch_inner: get("pitch_inner")?,
        pitch_outer: get("pitch_outer")?,
        gamma: get("gamma")?,
    };
    let data = t.f32_data()?;
    let len = t.shape[0];
    let mut base = Vec::with_capacity(len);
    let mut dcf = Vec::with_capacity(len);
    for m in 0..len {
        let kx = data[m * 3] as f64;
        let ky = data[m * 3 + 1] as f64;
        let w = data[m * 3 + 2] as f64;
        if (kx * kx + ky * ky).sqrt() > KMAX * (1.0 + 1e-6) {
            return Err(MrfError::format(format!("sample {m} outside |k| <= 0.5")));
        }
        if w <= 0.0 {
            return Err(MrfError::format(format!("nonpositive dcf at sample {m}")));
        }
        base.push([kx, ky]);
        dcf.push(w);
    }
    let mut samples = Vec::with_capacity(n_interleaves);
    for j in 0..n_interleaves {
        let phi = 2.0 * std::f64::consts::PI * j as f64 / n_interleaves as f64;
        let (sin_phi, cos_phi) = phi.sin_cos();
        samples.push(
            base.iter()
                .map(|&[x, y]| [x * cos_phi - y * sin_phi, x * sin_phi + y * cos_phi])
                .collect(),
        );
    }
    Ok(SpiralSet {
        matrix_size,
        n_interleaves,
        theta_step,
        profile,
        samples,
        dcf,
    })
}
