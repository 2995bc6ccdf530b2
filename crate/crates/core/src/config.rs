//! Declarative run configuration. Every tunable default lives here so a
//! pipeline run can be reproduced from (config, seed) alone; stages embed
//! the resolved document into their output metadata. Unknown keys are
//! rejected rather than silently ignored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::CostFormulation;
use crate::error::{MrfError, Result};
use crate::optimizer::AnnealConfig;
use crate::sequence::EpgOptions;
use crate::spatial_response::{DcfMode, ReconSettings};
use crate::trajectory::DensityProfile;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Single source of all randomness in a run.
    pub seed: u64,
    /// Worker threads; 0 keeps the library default.
    pub threads: usize,
    pub matrix_size: usize,
    /// Built-in phantom: "three" or "eleven".
    pub phantom: String,
    pub trajectory: TrajectoryConfig,
    pub nufft: NufftConfig,
    /// "scaled" or "union".
    pub dcf_mode: String,
    pub sequence: SequenceConfig,
    pub dictionary: DictionaryConfig,
    pub matching: MatchingConfig,
    pub cost: CostConfig,
    pub sa: SaConfig,
    pub phase: PhaseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            threads: 0,
            matrix_size: 256,
            phantom: "three".into(),
            trajectory: TrajectoryConfig::default(),
            nufft: NufftConfig::default(),
            dcf_mode: "scaled".into(),
            sequence: SequenceConfig::default(),
            dictionary: DictionaryConfig::default(),
            matching: MatchingConfig::default(),
            cost: CostConfig::default(),
            sa: SaConfig::default(),
            phase: PhaseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub n_interleaves: usize,
    pub gamma: f64,
    /// Union pitch at k = 0; `null` resolves to 0.5 / matrix_size.
    pub pitch_inner: Option<f64>,
    /// Union pitch at the k-space edge; `null` resolves to 1 / matrix_size.
    pub pitch_outer: Option<f64>,
    pub readout_oversampling: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            n_interleaves: 48,
            gamma: 1.0,
            pitch_inner: None,
            pitch_outer: None,
            readout_oversampling: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NufftConfig {
    pub oversampling: f64,
    pub kernel_width: usize,
}

impl Default for NufftConfig {
    fn default() -> Self {
        NufftConfig {
            oversampling: 2.0,
            kernel_width: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    pub n_timepoints: usize,
    pub ti_ms: f64,
    pub rf_phase_deg: f64,
    /// Configuration-state cap for the signal simulation; 0 keeps all.
    pub max_states: usize,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            n_timepoints: 480,
            ti_ms: 20.64,
            rf_phase_deg: 0.0,
            max_states: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DictionaryConfig {
    /// Inclusive [start, step, stop] segments, concatenated.
    pub t1_ranges: Vec<[f64; 3]>,
    pub t2_ranges: Vec<[f64; 3]>,
    /// Coarser grids used inside the optimization loop.
    pub optimizer_t1_ranges: Vec<[f64; 3]>,
    pub optimizer_t2_ranges: Vec<[f64; 3]>,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig {
            t1_ranges: vec![
                [2.0, 10.0, 100.0],
                [100.0, 20.0, 1000.0],
                [1000.0, 50.0, 3000.0],
            ],
            t2_ranges: vec![
                [2.0, 5.0, 100.0],
                [100.0, 10.0, 300.0],
                [300.0, 50.0, 2000.0],
            ],
            optimizer_t1_ranges: vec![
                [20.0, 20.0, 100.0],
                [100.0, 50.0, 1000.0],
                [1000.0, 100.0, 3000.0],
            ],
            optimizer_t2_ranges: vec![
                [10.0, 10.0, 100.0],
                [100.0, 25.0, 300.0],
                [300.0, 100.0, 1000.0],
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingConfig {
    pub skip_threshold_frac: f64,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        MatchingConfig {
            skip_threshold_frac: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    /// Per-label weights; unlisted tissues weigh 1.
    pub weights: BTreeMap<String, f64>,
    /// Reference scan time; 0 resolves to the evaluated schedule's own time.
    pub time_ref_ms: f64,
    /// "time_multiplied" or "literal_divided".
    pub formulation: String,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            weights: BTreeMap::new(),
            time_ref_ms: 0.0,
            formulation: "time_multiplied".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SaConfig {
    pub initial_temp: f64,
    pub cooling_rate: f64,
    pub steps_per_temp: usize,
    pub min_temp: f64,
    pub max_iterations: usize,
    pub n_segments: usize,
    pub step_flip_deg: f64,
    pub step_tr_ms: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            initial_temp: 0.5,
            cooling_rate: 0.97,
            steps_per_temp: 100,
            min_temp: 1e-6,
            max_iterations: 44_000,
            n_segments: 48,
            step_flip_deg: 10.0,
            step_tr_ms: 0.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseConfig {
    pub enabled: bool,
    pub direction: [f64; 2],
    pub range: [f64; 2],
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            enabled: false,
            direction: [1.0, 0.0],
            range: [-std::f64::consts::PI, 2.0 * std::f64::consts::PI],
        }
    }
}

/// Materialize inclusive [start, step, stop] segments into an ascending,
/// deduplicated grid.
pub fn materialize_ranges(ranges: &[[f64; 3]]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &[start, step, stop] in ranges {
        let mut v = start;
        while v <= stop + 1e-9 {
            if out.last().map_or(true, |&last| v > last + 1e-9) {
                out.push(v);
            }
            v += step;
        }
    }
    out
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| MrfError::format(format!("config: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Resolved config as a JSON value, for embedding in output metadata.
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn density_profile(&self) -> DensityProfile {
        let default = DensityProfile::default_for(self.matrix_size);
        DensityProfile {
            pitch_inner: self.trajectory.pitch_inner.unwrap_or(default.pitch_inner),
            pitch_outer: self.trajectory.pitch_outer.unwrap_or(default.pitch_outer),
            gamma: self.trajectory.gamma,
        }
    }

    pub fn recon_settings(&self) -> Result<ReconSettings> {
        Ok(ReconSettings {
            oversampling: self.nufft.oversampling,
            kernel_width: self.nufft.kernel_width,
            dcf_mode: DcfMode::from_name(&self.dcf_mode)?,
        })
    }

    pub fn epg_options(&self) -> EpgOptions {
        EpgOptions {
            rf_phase_deg: self.sequence.rf_phase_deg,
            max_states: match self.sequence.max_states {
                0 => None,
                n => Some(n),
            },
        }
    }

    pub fn t1_grid(&self) -> Vec<f64> {
        materialize_ranges(&self.dictionary.t1_ranges)
    }

    pub fn t2_grid(&self) -> Vec<f64> {
        materialize_ranges(&self.dictionary.t2_ranges)
    }

    pub fn optimizer_t1_grid(&self) -> Vec<f64> {
        materialize_ranges(&self.dictionary.optimizer_t1_ranges)
    }

    pub fn optimizer_t2_grid(&self) -> Vec<f64> {
        materialize_ranges(&self.dictionary.optimizer_t2_ranges)
    }

    pub fn cost_formulation(&self) -> Result<CostFormulation> {
        CostFormulation::from_name(&self.cost.formulation)
    }

    pub fn anneal_config(&self) -> AnnealConfig {
        AnnealConfig {
            initial_temp: self.sa.initial_temp,
            cooling_rate: self.sa.cooling_rate,
            steps_per_temp: self.sa.steps_per_temp,
            min_temp: self.sa.min_temp,
            max_iterations: self.sa.max_iterations,
            rng_seed: self.seed,
            step_flip_deg: self.sa.step_flip_deg,
            step_tr_ms: self.sa.step_tr_ms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let c = RunConfig::default();
        let json = serde_json::to_string(&c).unwrap();
        let back = RunConfig::from_json_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json_str(r#"{"matrix_size": 64, "bogus_key": 1}"#).unwrap_err();
        assert!(matches!(err, MrfError::Format(_)));
        let err = RunConfig::from_json_str(r#"{"nufft": {"oversampling": 2.0, "nope": 3}}"#)
            .unwrap_err();
        assert!(matches!(err, MrfError::Format(_)));
    }

    #[test]
    fn partial_configs_inherit_defaults() {
        let c = RunConfig::from_json_str(r#"{"matrix_size": 64}"#).unwrap();
        assert_eq!(c.matrix_size, 64);
        assert_eq!(c.trajectory.n_interleaves, 48);
        assert_eq!(c.sequence.n_timepoints, 480);
    }

    #[test]
    fn grid_materialization_covers_reference_ranges() {
        let c = RunConfig::default();
        let t1 = c.t1_grid();
        let t2 = c.t2_grid();
        assert_eq!((*t1.first().unwrap(), *t1.last().unwrap()), (2.0, 3000.0));
        assert_eq!((*t2.first().unwrap(), *t2.last().unwrap()), (2.0, 2000.0));
    }

    #[test]
    fn default_profile_resolves_from_matrix_size() {
        let mut c = RunConfig::default();
        c.matrix_size = 128;
        let p = c.density_profile();
        assert_eq!(p.pitch_outer, 1.0 / 128.0);
        assert_eq!(p.pitch_inner, 0.5 / 128.0);
    }
}
