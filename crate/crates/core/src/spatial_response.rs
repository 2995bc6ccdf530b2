//! Precomputed spatial response functions: per tissue and per spiral
//! interleaf, the aliased reconstruction of that tissue's (optionally
//! phase-weighted) mask after full-sampling transform, single-interleaf
//! selection, density compensation, and adjoint gridding.
//!
//! These grids capture everything spatial — anatomy, background phase,
//! trajectory — so synthesizing an image series for a new pulse sequence
//! reduces to complex multiplications against them. Sets are cached to disk
//! with content hashes binding them to their exact inputs.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::error::{MrfError, Result};
use crate::nufft::{GriddingPlan, DEFAULT_KERNEL_WIDTH, DEFAULT_OVERSAMPLING};
use crate::phantom::{PhaseMap, TissuePhantom};
use crate::tensor::TensorFile;
use crate::trajectory::SpiralSet;
use crate::util::ContentHasher;

static SRF_COMPUTES: AtomicU64 = AtomicU64::new(0);

/// How many times [`compute_spatial_responses`] has run in this process.
pub fn srf_compute_count() -> u64 {
    SRF_COMPUTES.load(Ordering::Relaxed)
}

/// Density weighting convention for single-interleaf reconstructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcfMode {
    /// Union-area weights scaled by the interleaf count, so one interleaf
    /// integrates over the whole sampled disk (single-shot convention).
    Scaled,
    /// Raw union-area weights.
    Union,
}

impl DcfMode {
    pub fn name(self) -> &'static str {
        match self {
            DcfMode::Scaled => "scaled",
            DcfMode::Union => "union",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(DcfMode::Scaled),
            "union" => Ok(DcfMode::Union),
            other => Err(MrfError::format(format!("unknown dcf mode '{other}'"))),
        }
    }
}

/// Gridding accuracy and weighting settings shared by every reconstruction
/// in a pipeline. The fast and conventional simulators must use one of
/// these, since their equivalence is an operator identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconSettings {
    pub oversampling: f64,
    pub kernel_width: usize,
    pub dcf_mode: DcfMode,
}

impl Default for ReconSettings {
    fn default() -> Self {
        ReconSettings {
            oversampling: DEFAULT_OVERSAMPLING,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            dcf_mode: DcfMode::Scaled,
        }
    }
}

/// Gridding plans for the full interleaf union and for each single
/// interleaf, with the density weights each reconstruction needs.
///
/// The undersampling operator is index selection on the union sample
/// vector: interleaf j owns the contiguous range [j·L, (j+1)·L).
pub struct ReconOperators {
    union_plan: GriddingPlan,
    interleaf_plans: Vec<GriddingPlan>,
    interleaf_dcf: Vec<f64>,
    union_dcf: Vec<f64>,
    readout_len: usize,
    n_interleaves: usize,
}

impl ReconOperators {
    pub fn new(
        spirals: &SpiralSet,
        grid: (usize, usize),
        settings: &ReconSettings,
    ) -> Result<Self> {
        let union = spirals.union_coords();
        let union_plan =
            GriddingPlan::new(&union, grid, settings.oversampling, settings.kernel_width)?;
        let interleaf_plans: Vec<GriddingPlan> = (0..spirals.n_interleaves())
            .into_par_iter()
            .map(|j| {
                GriddingPlan::new(
                    spirals.interleaf(j),
                    grid,
                    settings.oversampling,
                    settings.kernel_width,
                )
            })
            .collect::<Result<_>>()?;
        let scale = match settings.dcf_mode {
            DcfMode::Scaled => spirals.n_interleaves() as f64,
            DcfMode::Union => 1.0,
        };
        let interleaf_dcf: Vec<f64> = spirals.dcf().iter().map(|&w| w * scale).collect();
        Ok(ReconOperators {
            union_plan,
            interleaf_plans,
            interleaf_dcf,
            union_dcf: spirals.union_dcf(),
            readout_len: spirals.readout_len(),
            n_interleaves: spirals.n_interleaves(),
        })
    }

    pub fn union_plan(&self) -> &GriddingPlan {
        &self.union_plan
    }

    pub fn n_interleaves(&self) -> usize {
        self.n_interleaves
    }

    /// Forward transform onto the full interleaf union.
    pub fn sample_full(&self, image: &Array2<Complex64>) -> Result<Vec<Complex64>> {
        self.union_plan.forward(image)
    }

    /// Select interleaf `j` from union samples, weight, and reconstruct.
    pub fn undersampled_recon(
        &self,
        union_samples: &[Complex64],
        j: usize,
    ) -> Result<Array2<Complex64>> {
        if union_samples.len() != self.union_plan.n_samples() {
            return Err(MrfError::invalid("sample vector does not match union"));
        }
        if j >= self.interleaf_plans.len() {
            return Err(MrfError::invalid(format!("interleaf {j} out of range")));
        }
        let range = j * self.readout_len..(j + 1) * self.readout_len;
        self.interleaf_plans[j].adjoint_weighted(&union_samples[range], &self.interleaf_dcf)
    }

    /// Reconstruct from the complete union (no undersampling).
    pub fn full_recon(&self, union_samples: &[Complex64]) -> Result<Array2<Complex64>> {
        self.union_plan
            .adjoint_weighted(union_samples, &self.union_dcf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrfMeta {
    pub phantom_hash: String,
    pub spiral_hash: String,
    pub phase_hash: String,
    pub dcf_mode: DcfMode,
    pub oversampling: f64,
    pub kernel_width: usize,
}

/// J × n_interleaves complex response grids plus the metadata binding them
/// to their inputs.
pub struct SpatialResponseSet {
    labels: Vec<String>,
    grid: (usize, usize),
    n_interleaves: usize,
    grids: Vec<Array2<Complex64>>,
    meta: SrfMeta,
}

impl SpatialResponseSet {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn grid_size(&self) -> (usize, usize) {
        self.grid
    }

    pub fn n_interleaves(&self) -> usize {
        self.n_interleaves
    }

    pub fn tissue_count(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn meta(&self) -> &SrfMeta {
        &self.meta
    }

    /// Response grid for (tissue index, interleaf index).
    pub fn response(&self, tissue: usize, interleaf: usize) -> &Array2<Complex64> {
        &self.grids[tissue * self.n_interleaves + interleaf]
    }

    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        h.update(b"srf");
        h.update(self.meta.phantom_hash.as_bytes());
        h.update(self.meta.spiral_hash.as_bytes());
        h.update(self.meta.phase_hash.as_bytes());
        h.update(self.meta.dcf_mode.name().as_bytes());
        for g in &self.grids {
            h.update_f64s(g.iter().flat_map(|z| [z.re, z.im]));
        }
        h.finish()
    }

    /// Check that this set was computed from exactly these inputs.
    pub fn verify_binding(
        &self,
        phantom: &TissuePhantom,
        spirals: &SpiralSet,
        phase: Option<&PhaseMap>,
    ) -> Result<()> {
        let phase_hash = phase_hash_of(phase);
        if self.meta.phantom_hash != phantom.content_hash() {
            return Err(MrfError::CacheInvalid(
                "spatial responses were computed from a different phantom".into(),
            ));
        }
        if self.meta.spiral_hash != spirals.content_hash() {
            return Err(MrfError::CacheInvalid(
                "spatial responses were computed from a different spiral set".into(),
            ));
        }
        if self.meta.phase_hash != phase_hash {
            return Err(MrfError::CacheInvalid(
                "spatial responses were computed from a different phase map".into(),
            ));
        }
        Ok(())
    }
}

pub fn phase_hash_of(phase: Option<&PhaseMap>) -> String {
    match phase {
        Some(p) => p.content_hash(),
        None => "none".to_string(),
    }
}

/// Apply the background phase to a volume-fraction mask.
pub fn phase_weighted_mask(mask: &Array2<f64>, phase: Option<&PhaseMap>) -> Array2<Complex64> {
    match phase {
        Some(p) => {
            let pg = p.grid();
            Array2::from_shape_fn(mask.dim(), |idx| {
                Complex64::from_polar(mask[idx], pg[idx])
            })
        }
        None => mask.mapv(|v| Complex64::new(v, 0.0)),
    }
}

/// Run the full precompute: for every tissue mask (times e^{jθ} when a phase
/// map is given), forward onto the union, then per interleaf select, weight,
/// and grid back. The (tissue, interleaf) reconstructions are independent
/// and run in parallel.
pub fn compute_spatial_responses(
    phantom: &TissuePhantom,
    spirals: &SpiralSet,
    phase: Option<&PhaseMap>,
    settings: &ReconSettings,
) -> Result<SpatialResponseSet> {
    let grid = phantom.grid_size();
    if grid.0 != spirals.matrix_size() || grid.1 != spirals.matrix_size() {
        return Err(MrfError::invalid(format!(
            "phantom grid {:?} does not match spiral matrix size {}",
            grid,
            spirals.matrix_size()
        )));
    }
    if let Some(p) = phase {
        if p.grid().dim() != grid {
            return Err(MrfError::invalid("phase map grid mismatch"));
        }
    }
    let ops = ReconOperators::new(spirals, grid, settings)?;
    let n_il = spirals.n_interleaves();

    let tissue_samples: Vec<Vec<Complex64>> = phantom
        .masks()
        .par_iter()
        .map(|mask| ops.sample_full(&phase_weighted_mask(mask, phase)))
        .collect::<Result<_>>()?;

    let grids: Vec<Array2<Complex64>> = (0..phantom.tissue_count() * n_il)
        .into_par_iter()
        .map(|k| ops.undersampled_recon(&tissue_samples[k / n_il], k % n_il))
        .collect::<Result<_>>()?;

    SRF_COMPUTES.fetch_add(1, Ordering::Relaxed);
    Ok(SpatialResponseSet {
        labels: phantom.tissues().iter().map(|t| t.label.clone()).collect(),
        grid,
        n_interleaves: n_il,
        grids,
        meta: SrfMeta {
            phantom_hash: phantom.content_hash(),
            spiral_hash: spirals.content_hash(),
            phase_hash: phase_hash_of(phase),
            dcf_mode: settings.dcf_mode,
            oversampling: settings.oversampling,
            kernel_width: settings.kernel_width,
        },
    })
}

pub fn save_spatial_responses(set: &SpatialResponseSet, path: impl AsRef<Path>) -> Result<()> {
    let (rows, cols) = set.grid;
    let mut data = Vec::with_capacity(set.grids.len() * rows * cols);
    for g in &set.grids {
        data.extend(g.iter().copied());
    }
    let mut meta = Map::new();
    meta.insert("kind".into(), Value::String("spatial_responses".into()));
    meta.insert("labels".into(), serde_json::json!(set.labels));
    meta.insert("j_tissues".into(), serde_json::json!(set.labels.len()));
    meta.insert("n_interleaves".into(), serde_json::json!(set.n_interleaves));
    meta.insert("grid".into(), serde_json::json!([rows, cols]));
    meta.insert(
        "phantom_hash".into(),
        Value::String(set.meta.phantom_hash.clone()),
    );
    meta.insert(
        "spiral_hash".into(),
        Value::String(set.meta.spiral_hash.clone()),
    );
    meta.insert(
        "phase_hash".into(),
        Value::String(set.meta.phase_hash.clone()),
    );
    meta.insert(
        "dcf_mode".into(),
        Value::String(set.meta.dcf_mode.name().into()),
    );
    meta.insert(
        "oversampling".into(),
        serde_json::json!(set.meta.oversampling),
    );
    meta.insert(
        "kernel_width".into(),
        serde_json::json!(set.meta.kernel_width),
    );
    TensorFile::new_c64(
        vec![set.labels.len(), set.n_interleaves, rows, cols],
        data,
        meta,
    )?
    .write(path)
}

pub fn load_spatial_responses(path: impl AsRef<Path>) -> Result<SpatialResponseSet> {
    let t = TensorFile::read(path)?;
    if t.meta_str("kind")? != "spatial_responses" {
        return Err(MrfError::format("tensor file is not a spatial response set"));
    }
    if t.shape.len() != 4 {
        return Err(MrfError::format(
            "spatial response tensor must be [tissues, interleaves, rows, cols]",
        ));
    }
    let labels: Vec<String> = serde_json::from_value(
        t.meta
            .get("labels")
            .cloned()
            .ok_or_else(|| MrfError::format("missing labels"))?,
    )
    .map_err(|e| MrfError::format(format!("bad labels: {e}")))?;
    let (j, n_il, rows, cols) = (t.shape[0], t.shape[1], t.shape[2], t.shape[3]);
    if labels.len() != j {
        return Err(MrfError::format("label count does not match tensor shape"));
    }
    let data = t.c64_data()?;
    let plane = rows * cols;
    let grids = (0..j * n_il)
        .map(|k| {
            Array2::from_shape_fn((rows, cols), |(r, c)| data[k * plane + r * cols + c])
        })
        .collect();
    let meta = SrfMeta {
        phantom_hash: t.meta_str("phantom_hash")?.to_string(),
        spiral_hash: t.meta_str("spiral_hash")?.to_string(),
        phase_hash: t.meta_str("phase_hash")?.to_string(),
        dcf_mode: DcfMode::from_name(t.meta_str("dcf_mode")?)?,
        oversampling: t.meta_f64("oversampling")?,
        kernel_width: t.meta_u64("kernel_width")? as usize,
    };
    Ok(SpatialResponseSet {
        labels,
        grid: (rows, cols),
        n_interleaves: n_il,
        grids,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{make_three_tissue_phantom, synthesize_phase_map, TissueSpec};
    use crate::trajectory::{generate_spiral_set, DensityProfile};
    use crate::util::rel_l2_grid;

    fn small_spirals(n_il: usize) -> SpiralSet {
        generate_spiral_set(32, n_il, DensityProfile::default_for(32), 2.0).unwrap()
    }

    fn single_mask_phantom(mask: Array2<f64>) -> TissuePhantom {
        TissuePhantom::new(vec![TissueSpec::new("wm", 800.0, 40.0)], vec![mask]).unwrap()
    }

    #[test]
    fn cardinality_is_tissues_times_interleaves() {
        let phantom = make_three_tissue_phantom((32, 32)).unwrap();
        let spirals = small_spirals(5);
        let set =
            compute_spatial_responses(&phantom, &spirals, None, &ReconSettings::default())
                .unwrap();
        assert_eq!(set.len(), 3 * 5);
        assert_eq!(set.response(2, 4).dim(), (32, 32));
    }

    #[test]
    fn zero_mask_gives_zero_responses() {
        let phantom = single_mask_phantom(Array2::zeros((32, 32)));
        let spirals = small_spirals(4);
        let set =
            compute_spatial_responses(&phantom, &spirals, None, &ReconSettings::default())
                .unwrap();
        for il in 0..4 {
            assert!(set.response(0, il).iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn responses_are_linear_in_the_mask() {
        let spirals = small_spirals(3);
        let settings = ReconSettings::default();
        let mut a = Array2::<f64>::zeros((32, 32));
        let mut b = Array2::<f64>::zeros((32, 32));
        for r in 8..16 {
            for c in 8..16 {
                a[[r, c]] = 1.0;
            }
        }
        for r in 18..26 {
            for c in 14..22 {
                b[[r, c]] = 1.0;
            }
        }
        let sum = &a + &b;
        let set_a = compute_spatial_responses(&single_mask_phantom(a), &spirals, None, &settings)
            .unwrap();
        let set_b = compute_spatial_responses(&single_mask_phantom(b), &spirals, None, &settings)
            .unwrap();
        let set_sum =
            compute_spatial_responses(&single_mask_phantom(sum), &spirals, None, &settings)
                .unwrap();
        for il in 0..3 {
            let combined = set_a.response(0, il) + set_b.response(0, il);
            assert!(rel_l2_grid(&combined, set_sum.response(0, il)) < 1e-12);
        }
    }

    #[test]
    fn constant_phase_is_a_global_rotation() {
        let phantom = make_three_tissue_phantom((32, 32)).unwrap();
        let spirals = small_spirals(2);
        let settings = ReconSettings::default();
        let theta0 = 0.83;
        let phase = synthesize_phase_map((32, 32), [1.0, 0.0], (theta0, theta0)).unwrap();
        let plain =
            compute_spatial_responses(&phantom, &spirals, None, &settings).unwrap();
        let phased =
            compute_spatial_responses(&phantom, &spirals, Some(&phase), &settings).unwrap();
        let rot = Complex64::from_polar(1.0, theta0);
        for t in 0..3 {
            for il in 0..2 {
                let expected = plain.response(t, il).mapv(|z| z * rot);
                assert!(rel_l2_grid(&expected, phased.response(t, il)) < 1e-12);
            }
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let phantom = make_three_tissue_phantom((64, 64)).unwrap();
        let spirals = small_spirals(2);
        assert!(matches!(
            compute_spatial_responses(&phantom, &spirals, None, &ReconSettings::default()),
            Err(MrfError::InvalidArgument(_))
        ));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact_and_binding_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("srf.mrft");
        let phantom = make_three_tissue_phantom((32, 32)).unwrap();
        let spirals = small_spirals(3);
        let set =
            compute_spatial_responses(&phantom, &spirals, None, &ReconSettings::default())
                .unwrap();
        save_spatial_responses(&set, &path).unwrap();
        let back = load_spatial_responses(&path).unwrap();
        assert_eq!(back.labels(), set.labels());
        for t in 0..3 {
            for il in 0..3 {
                let (a, b) = (set.response(t, il), back.response(t, il));
                for (x, y) in a.iter().zip(b.iter()) {
                    assert_eq!(x.re.to_bits(), y.re.to_bits());
                    assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
            }
        }
        assert_eq!(back.content_hash(), set.content_hash());
        back.verify_binding(&phantom, &spirals, None).unwrap();

        let other = make_three_tissue_phantom((32, 32)).unwrap();
        // same phantom: binding holds
        back.verify_binding(&other, &spirals, None).unwrap();
        // different phase: binding fails
        let phase = synthesize_phase_map((32, 32), [1.0, 0.0], (0.0, 1.0)).unwrap();
        assert!(matches!(
            back.verify_binding(&phantom, &spirals, Some(&phase)),
            Err(MrfError::CacheInvalid(_))
        ));
    }
}
