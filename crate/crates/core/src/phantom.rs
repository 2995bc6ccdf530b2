//! Digital tissue phantoms: segmented volume-fraction masks with registered
//! relaxation times, plus synthetic background phase maps.
//!
//! The built-in phantoms are geometric head layouts (ventricle cores, a
//! cortical ribbon, concentric outer layers) so tests run without external
//! segmentation data; arbitrary segmentations load through [`load_phantom`].

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{MrfError, Result};
use crate::tensor::TensorFile;
use crate::util::ContentHasher;

/// Relaxation times for one tissue type. `(0, 0)` marks a signal void
/// (skull, dura): such tissues contribute identically zero signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueSpec {
    pub label: String,
    pub t1_ms: f64,
    pub t2_ms: f64,
}

impl TissueSpec {
    pub fn new(label: impl Into<String>, t1_ms: f64, t2_ms: f64) -> Self {
        TissueSpec {
            label: label.into(),
            t1_ms,
            t2_ms,
        }
    }

    pub fn is_void(&self) -> bool {
        self.t1_ms == 0.0 && self.t2_ms == 0.0
    }

    fn validate(&self) -> Result<()> {
        if self.t1_ms < 0.0 || self.t2_ms < 0.0 {
            return Err(MrfError::invalid(format!(
                "tissue '{}': negative relaxation time",
                self.label
            )));
        }
        if self.is_void() {
            return Ok(());
        }
        if self.t1_ms == 0.0 || self.t2_ms == 0.0 {
            return Err(MrfError::invalid(format!(
                "tissue '{}': only (0, 0) may denote a void tissue",
                self.label
            )));
        }
        if self.t2_ms > self.t1_ms {
            return Err(MrfError::invalid(format!(
                "tissue '{}': t2 ({}) exceeds t1 ({})",
                self.label, self.t2_ms, self.t1_ms
            )));
        }
        Ok(())
    }
}

/// Per-tissue volume-fraction masks over a shared grid.
#[derive(Debug, Clone)]
pub struct TissuePhantom {
    grid: (usize, usize),
    tissues: Vec<TissueSpec>,
    masks: Vec<Array2<f64>>,
}

impl TissuePhantom {
    pub fn new(tissues: Vec<TissueSpec>, masks: Vec<Array2<f64>>) -> Result<Self> {
        if tissues.is_empty() {
            return Err(MrfError::invalid("phantom needs at least one tissue"));
        }
        if tissues.len() != masks.len() {
            return Err(MrfError::invalid(format!(
                "{} tissue specs but {} masks",
                tissues.len(),
                masks.len()
            )));
        }
        for (i, spec) in tissues.iter().enumerate() {
            spec.validate()?;
            if tissues[..i].iter().any(|other| other.label == spec.label) {
                return Err(MrfError::invalid(format!(
                    "duplicate tissue label '{}'",
                    spec.label
                )));
            }
        }
        let grid = masks[0].dim();
        for (spec, mask) in tissues.iter().zip(&masks) {
            if mask.dim() != grid {
                return Err(MrfError::invalid(format!(
                    "mask for '{}' has shape {:?}, expected {:?}",
                    spec.label,
                    mask.dim(),
                    grid
                )));
            }
            if mask.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(MrfError::invalid(format!(
                    "mask for '{}' has values outside [0, 1]",
                    spec.label
                )));
            }
        }
        Ok(TissuePhantom {
            grid,
            tissues,
            masks,
        })
    }

    pub fn grid_size(&self) -> (usize, usize) {
        self.grid
    }

    pub fn tissue_count(&self) -> usize {
        self.tissues.len()
    }

    pub fn tissues(&self) -> &[TissueSpec] {
        &self.tissues
    }

    pub fn masks(&self) -> &[Array2<f64>] {
        &self.masks
    }

    pub fn mask(&self, i: usize) -> &Array2<f64> {
        &self.masks[i]
    }

    pub fn tissue_by_label(&self, label: &str) -> Option<(usize, &TissueSpec)> {
        self.tissues
            .iter()
            .enumerate()
            .find(|(_, t)| t.label == label)
    }

    /// Content hash over grid, tissue specs, and the canonical f32 mask
    /// payload. Loading a saved phantom reproduces the same hash.
    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        h.update(b"phantom");
        h.update(&(self.grid.0 as u64).to_le_bytes());
        h.update(&(self.grid.1 as u64).to_le_bytes());
        for t in &self.tissues {
            h.update(t.label.as_bytes());
            h.update_f64s([t.t1_ms, t.t2_ms]);
        }
        for m in &self.masks {
            h.update_f32s(m.iter().map(|&v| v as f32));
        }
        h.finish()
    }
}

/// Synthetic background phase map: quadratic profile along a direction,
/// constant perpendicular to it.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    grid: Array2<f64>,
    direction: [f64; 2],
    range: (f64, f64),
}

impl PhaseMap {
    pub fn grid(&self) -> &Array2<f64> {
        &self.grid
    }

    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        h.update(b"phase");
        h.update_f64s([
            self.direction[0],
            self.direction[1],
            self.range.0,
            self.range.1,
        ]);
        h.update_f32s(self.grid.iter().map(|&v| v as f32));
        h.finish()
    }
}

pub const DEFAULT_PHASE_RANGE: (f64, f64) = (-std::f64::consts::PI, 2.0 * std::f64::consts::PI);

/// The four canonical phase-map directions (±x, ±y).
pub const CANONICAL_PHASE_DIRECTIONS: [[f64; 2]; 4] =
    [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];

const MIN_GRID: usize = 16;

fn check_grid_size(grid_size: (usize, usize)) -> Result<()> {
    if grid_size.0 < MIN_GRID || grid_size.1 < MIN_GRID {
        return Err(MrfError::invalid(format!(
            "grid {}x{} too small, need at least {MIN_GRID}x{MIN_GRID}",
            grid_size.0, grid_size.1
        )));
    }
    Ok(())
}

fn ellipse_rho(x: f64, y: f64, a: f64, b: f64) -> f64 {
    ((x / a).powi(2) + (y / b).powi(2)).sqrt()
}

// Tissue indices for the three-tissue layout.
const WM: usize = 0;
const GM: usize = 1;
const CSF: usize = 2;

fn classify_three(xn: f64, yn: f64) -> Option<usize> {
    let rho = ellipse_rho(xn, yn, 0.80, 0.94);
    if rho > 1.0 {
        return None;
    }
    if rho > 0.92 {
        return Some(CSF); // subarachnoid rim
    }
    if rho > 0.74 {
        return Some(GM); // cortical ribbon
    }
    // lateral ventricles
    if ellipse_rho(xn - 0.16, yn + 0.06, 0.10, 0.24) <= 1.0
        || ellipse_rho(xn + 0.16, yn + 0.06, 0.10, 0.24) <= 1.0
    {
        return Some(CSF);
    }
    Some(WM)
}

/// WM/GM/CSF phantom with mutually disjoint binary masks.
pub fn make_three_tissue_phantom(grid_size: (usize, usize)) -> Result<TissuePhantom> {
    check_grid_size(grid_size)?;
    let (rows, cols) = grid_size;
    let tissues = vec![
        TissueSpec::new("wm", 800.0, 40.0),
        TissueSpec::new("gm", 1400.0, 60.0),
        TissueSpec::new("csf", 3000.0, 500.0),
    ];
    let mut masks = vec![Array2::<f64>::zeros(grid_size); tissues.len()];
    for r in 0..rows {
        let yn = (r as f64 + 0.5 - rows as f64 / 2.0) / (rows as f64 / 2.0);
        for c in 0..cols {
            let xn = (c as f64 + 0.5 - cols as f64 / 2.0) / (cols as f64 / 2.0);
            if let Some(i) = classify_three(xn, yn) {
                masks[i][[r, c]] = 1.0;
            }
        }
    }
    TissuePhantom::new(tissues, masks)
}

// Tissue indices for the eleven-tissue layout.
const BLOOD: usize = 3;
const FAT: usize = 4;
const AROUND_FAT: usize = 5;
const MARROW: usize = 6;
const MUSCLE: usize = 7;
const SKIN: usize = 8;
const SKULL: usize = 9;
const DURA: usize = 10;

const VESSEL_CENTERS: [[f64; 2]; 4] = [
    [0.00, 0.33],
    [-0.28, 0.12],
    [0.30, 0.05],
    [0.03, -0.36],
];

fn classify_eleven(xn: f64, yn: f64) -> Option<usize> {
    let rho = ellipse_rho(xn, yn, 0.86, 0.97);
    if rho > 1.0 {
        return None;
    }
    if rho > 0.94 {
        return Some(SKIN);
    }
    if rho > 0.885 {
        return Some(MUSCLE);
    }
    if rho > 0.845 {
        return Some(FAT);
    }
    if rho > 0.815 {
        return Some(AROUND_FAT);
    }
    if rho > 0.72 {
        // marrow pockets embedded in the skull band
        let theta = yn.atan2(xn);
        if (0.755..=0.785).contains(&rho) && (5.0 * theta).sin() > 0.3 {
            return Some(MARROW);
        }
        return Some(SKULL);
    }
    if rho > 0.69 {
        return Some(DURA);
    }
    if rho > 0.655 {
        return Some(CSF);
    }
    if rho > 0.52 {
        return Some(GM);
    }
    for v in &VESSEL_CENTERS {
        if ellipse_rho(xn - v[0], yn - v[1], 0.035, 0.035) <= 1.0 {
            return Some(BLOOD);
        }
    }
    if ellipse_rho(xn - 0.14, yn + 0.05, 0.085, 0.21) <= 1.0
        || ellipse_rho(xn + 0.14, yn + 0.05, 0.085, 0.21) <= 1.0
    {
        return Some(CSF);
    }
    Some(WM)
}

/// Eleven-tissue phantom with fractional (partial-volume) masks produced by
/// 4x4 subpixel coverage averaging. Per-pixel fractions sum to at most 1.
pub fn make_eleven_tissue_phantom(grid_size: (usize, usize)) -> Result<TissuePhantom> {
    check_grid_size(grid_size)?;
    let (rows, cols) = grid_size;
    let tissues = vec![
        TissueSpec::new("wm", 800.0, 40.0),
        TissueSpec::new("gm", 1400.0, 60.0),
        TissueSpec::new("csf", 3000.0, 500.0),
        TissueSpec::new("blood", 1600.0, 100.0),
        TissueSpec::new("fat", 360.0, 70.0),
        TissueSpec::new("around_fat", 500.0, 70.0),
        TissueSpec::new("bone_marrow", 500.0, 70.0),
        TissueSpec::new("muscle", 800.0, 48.0),
        TissueSpec::new("skin", 560.0, 320.0),
        TissueSpec::new("skull", 0.0, 0.0),
        TissueSpec::new("dura", 0.0, 0.0),
    ];
    const SS: usize = 4; // subpixels per axis
    let mut masks = vec![Array2::<f64>::zeros(grid_size); tissues.len()];
    for r in 0..rows {
        for c in 0..cols {
            let mut counts = [0u32; 11];
            for sr in 0..SS {
                let yn = (r as f64 + (sr as f64 + 0.5) / SS as f64 - rows as f64 / 2.0)
                    / (rows as f64 / 2.0);
                for sc in 0..SS {
                    let xn = (c as f64 + (sc as f64 + 0.5) / SS as f64 - cols as f64 / 2.0)
                        / (cols as f64 / 2.0);
                    if let Some(i) = classify_eleven(xn, yn) {
                        counts[i] += 1;
                    }
                }
            }
            for (i, &n) in counts.iter().enumerate() {
                if n > 0 {
                    masks[i][[r, c]] = n as f64 / (SS * SS) as f64;
                }
            }
        }
    }
    TissuePhantom::new(tissues, masks)
}

/// θ(x, y) = min + (max − min) · u², where u ∈ [0, 1] is the normalized
/// coordinate along `direction` (u = 0 at the edge the direction points away
/// from).
pub fn synthesize_phase_map(
    grid_size: (usize, usize),
    direction: [f64; 2],
    range: (f64, f64),
) -> Result<PhaseMap> {
    let norm = (direction[0].powi(2) + direction[1].powi(2)).sqrt();
    if norm == 0.0 {
        return Err(MrfError::invalid("phase direction must be nonzero"));
    }
    let dir = [direction[0] / norm, direction[1] / norm];
    let (rows, cols) = grid_size;
    // The projection is linear in (r, c), so its extremes sit at the corners.
    let corners = [
        (0.0, 0.0),
        (0.0, cols as f64 - 1.0),
        (rows as f64 - 1.0, 0.0),
        (rows as f64 - 1.0, cols as f64 - 1.0),
    ];
    let proj = |r: f64, c: f64| c * dir[0] + r * dir[1];
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    for &(r, c) in &corners {
        let s = proj(r, c);
        s_min = s_min.min(s);
        s_max = s_max.max(s);
    }
    let span = s_max - s_min;
    let grid = Array2::from_shape_fn(grid_size, |(r, c)| {
        let u = if span > 0.0 {
            (proj(r as f64, c as f64) - s_min) / span
        } else {
            0.0
        };
        range.0 + (range.1 - range.0) * u * u
    });
    Ok(PhaseMap {
        grid,
        direction: dir,
        range,
    })
}

/// Write a phantom as an f32 tensor of shape [J, rows, cols] with tissue
/// specs in the header.
pub fn save_phantom(phantom: &TissuePhantom, path: impl AsRef<Path>) -> Result<()> {
    let (rows, cols) = phantom.grid_size();
    let mut data = Vec::with_capacity(phantom.tissue_count() * rows * cols);
    for m in phantom.masks() {
        data.extend(m.iter().map(|&v| v as f32));
    }
    let mut meta = Map::new();
    meta.insert("kind".into(), Value::String("phantom".into()));
    meta.insert(
        "tissues".into(),
        serde_json::to_value(phantom.tissues())?,
    );
    TensorFile::new_f32(vec![phantom.tissue_count(), rows, cols], data, meta)?.write(path)
}

pub fn load_phantom(path: impl AsRef<Path>) -> Result<TissuePhantom> {
    let t = TensorFile::read(path)?;
    if t.meta_str("kind")? != "phantom" {
        return Err(MrfError::format("tensor file is not a phantom"));
    }
    if t.shape.len() != 3 {
        return Err(MrfError::format(format!(
            "phantom tensor must be 3-D [tissues, rows, cols], got {:?}",
            t.shape
        )));
    }
    let tissues: Vec<TissueSpec> = serde_json::from_value(
        t.meta
            .get("tissues")
            .cloned()
            .ok_or_else(|| MrfError::format("missing tissues metadata"))?,
    )
    .map_err(|e| MrfError::format(format!("bad tissue records: {e}")))?;
    if tissues.len() != t.shape[0] {
        return Err(MrfError::format(format!(
            "{} tissue records but tensor has {} mask planes",
            tissues.len(),
            t.shape[0]
        )));
    }
    let (rows, cols) = (t.shape[1], t.shape[2]);
    let data = t.f32_data()?;
    let plane = rows * cols;
    let masks = (0..tissues.len())
        .map(|i| {
            Array2::from_shape_fn((rows, cols), |(r, c)| {
                data[i * plane + r * cols + c] as f64
            })
        })
        .collect();
    TissuePhantom::new(tissues, masks)
}

pub fn save_phase_map(map: &PhaseMap, path: impl AsRef<Path>) -> Result<()> {
    let (rows, cols) = map.grid().dim();
    let mut meta = Map::new();
    meta.insert("kind".into(), Value::String("phase_map".into()));
    meta.insert("direction".into(), serde_json::json!(map.direction()));
    meta.insert(
        "range".into(),
        serde_json::json!([map.range().0, map.range().1]),
    );
    let data: Vec<f32> = map.grid().iter().map(|&v| v as f32).collect();
    TensorFile::new_f32(vec![rows, cols], data, meta)?.write(path)
}

pub fn load_phase_map(path: impl AsRef<Path>) -> Result<PhaseMap> {
    let t = TensorFile::read(path)?;
    if t.meta_str("kind")? != "phase_map" {
        return Err(MrfError::format("tensor file is not a phase map"));
    }
    if t.shape.len() != 2 {
        return Err(MrfError::format("phase map tensor must be 2-D"));
    }
    let dir: [f64; 2] = serde_json::from_value(
        t.meta
            .get("direction")
            .cloned()
            .ok_or_else(|| MrfError::format("missing direction"))?,
    )
    .map_err(|e| MrfError::format(format!("bad direction: {e}")))?;
    let range: [f64; 2] = serde_json::from_value(
        t.meta
            .get("range")
            .cloned()
            .ok_or_else(|| MrfError::format("missing range"))?,
    )
    .map_err(|e| MrfError::format(format!("bad range: {e}")))?;
    let data = t.f32_data()?;
    let cols = t.shape[1];
    let grid = Array2::from_shape_fn((t.shape[0], cols), |(r, c)| data[r * cols + c] as f64);
    Ok(PhaseMap {
        grid,
        direction: dir,
        range: (range[0], range[1]),
    })
}
