//! Dictionary pattern matching: argmax of complex inner-product magnitude
//! between each pixel time-course and the unit-norm dictionary signals.
//! Magnitude matching makes the result invariant to per-pixel scale and
//! global phase, which is what lets phase-weighted aliased signals match.

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::error::{MrfError, Result};
use crate::sequence::Dictionary;
use crate::simulator::ImageSeries;
use crate::tensor::TensorFile;
use crate::util::cdot;

/// Pixels with ‖signal‖ below this fraction of the largest pixel norm are
/// skipped instead of matched to noise.
pub const DEFAULT_SKIP_THRESHOLD_FRAC: f64 = 1e-3;

/// Matched relaxation maps. Unmatched pixels hold zeros with
/// `match_mask = false`.
pub struct QuantMaps {
    pub t1_map: Array2<f64>,
    pub t2_map: Array2<f64>,
    pub m0_map: Array2<f64>,
    pub match_mask: Array2<bool>,
    pub schedule_hash: String,
}

impl QuantMaps {
    pub fn grid_size(&self) -> (usize, usize) {
        self.t1_map.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub m0: f64,
    pub score: f64,
    pub matched: bool,
}

const SKIPPED: MatchResult = MatchResult {
    t1_ms: 0.0,
    t2_ms: 0.0,
    m0: 0.0,
    score: 0.0,
    matched: false,
};

/// Best dictionary entry for one signal. Ties break to the lowest entry
/// index, so results are identical across runs and thread counts.
pub fn match_signal(signal: &[Complex64], dict: &Dictionary) -> Result<MatchResult> {
    if signal.len() != dict.n_timepoints() {
        return Err(MrfError::invalid(format!(
            "signal length {} does not match dictionary ({})",
            signal.len(),
            dict.n_timepoints()
        )));
    }
    if signal.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(SKIPPED);
    }
    let mut best_e = 0usize;
    let mut best_score = -1.0f64;
    for e in 0..dict.entry_count() {
        let score = cdot(signal, dict.signal(e)).norm();
        if score > best_score {
            best_score = score;
            best_e = e;
        }
    }
    let (t1, t2) = dict.entry(best_e);
    Ok(MatchResult {
        t1_ms: t1,
        t2_ms: t2,
        m0: best_score / dict.norm_scale(best_e),
        score: best_score,
        matched: true,
    })
}

/// Match every pixel of a series against the dictionary.
pub fn match_series(
    series: &ImageSeries,
    dict: &Dictionary,
    skip_threshold_frac: f64,
) -> Result<QuantMaps> {
    if series.n_frames() != dict.n_timepoints() {
        return Err(MrfError::invalid(format!(
            "series has {} frames but dictionary expects {}",
            series.n_frames(),
            dict.n_timepoints()
        )));
    }
    if series.provenance().schedule_hash != dict.schedule_hash() {
        return Err(MrfError::invalid(
            "series and dictionary were produced under different schedules",
        ));
    }
    let (rows, cols) = series.grid_size();
    let n_px = rows * cols;

    let norms: Vec<f64> = (0..n_px)
        .into_par_iter()
        .map(|p| {
            let (r, c) = (p / cols, p % cols);
            series
                .frames()
                .iter()
                .map(|f| f[[r, c]].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let max_norm = norms.iter().cloned().fold(0.0f64, f64::max);
    let threshold = skip_threshold_frac * max_norm;

    let results: Vec<MatchResult> = (0..n_px)
        .into_par_iter()
        .map(|p| {
            if norms[p] <= threshold {
                return Ok(SKIPPED);
            }
            let (r, c) = (p / cols, p % cols);
            match_signal(&series.pixel_course(r, c), dict)
        })
        .collect::<Result<_>>()?;

    let mut maps = QuantMaps {
        t1_map: Array2::zeros((rows, cols)),
        t2_map: Array2::zeros((rows, cols)),
        m0_map: Array2::zeros((rows, cols)),
        match_mask: Array2::from_elem((rows, cols), false),
        schedule_hash: series.provenance().schedule_hash.clone(),
    };
    for (p, res) in results.iter().enumerate() {
        let idx = [p / cols, p % cols];
        maps.t1_map[idx] = res.t1_ms;
        maps.t2_map[idx] = res.t2_ms;
        maps.m0_map[idx] = res.m0;
        maps.match_mask[idx] = res.matched;
    }
    Ok(maps)
}

/// Quant maps serialize as an f32 tensor [4, rows, cols]: t1, t2, m0, mask.
pub fn save_quant_maps(maps: &QuantMaps, path: impl AsRef<Path>) -> Result<()> {
    let (rows, cols) = maps.grid_size();
    let mut data = Vec::with_capacity(4 * rows * cols);
    data.extend(maps.t1_map.iter().map(|&v| v as f32));
    data.extend(maps.t2_map.iter().map(|&v| v as f32));
    data.extend(maps.m0_map.iter().map(|&v| v as f32));
    data.extend(maps.match_mask.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    let mut meta = Map::new();
    meta.insert("kind".into(), Value::String("quant_maps".into()));
    meta.insert(
        "layers".into(),
        serde_json::json!(["t1_ms", "t2_ms", "m0", "match_mask"]),
    );
    meta.insert(
        "schedule_hash".into(),
        Value::String(maps.schedule_hash.clone()),
    );
    TensorFile::new_f32(vec![4, rows, cols], data, meta)?.write(path)
}

pub fn load_quant_maps(path: impl AsRef<Path>) -> Result<QuantMaps> {
    let t = TensorFile::read(path)?;
    if t.meta_str("kind")? != "quant_maps" {
        return Err(MrfError::format("tensor file is not a quant-map set"));
    }
    if t.shape.len() != 3 || t.shape[0] != 4 {
        return Err(MrfError::format("quant maps tensor must be [4, rows, cols]"));
    }
    let (rows, cols) = (t.shape[1], t.shape[2]);
    let data = t.f32_data()?;
    let plane = rows * cols;
    let layer =
        |k: usize| Array2::from_shape_fn((rows, cols), |(r, c)| data[k * plane + r * cols + c] as f64);
    Ok(QuantMaps {
        t1_map: layer(0),
        t2_map: layer(1),
        m0_map: layer(2),
        match_mask: Array2::from_shape_fn((rows, cols), |(r, c)| {
            data[3 * plane + r * cols + c] != 0.0
        }),
        schedule_hash: t.meta_str("schedule_hash")?.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{build_dictionary, default_fisp_schedule, EpgOptions};
    use proptest::prelude::*;

    fn small_dictionary() -> Dictionary {
        let schedule = default_fisp_schedule(32).unwrap();
        build_dictionary(
            &[400.0, 800.0, 1400.0, 3000.0],
            &[40.0, 60.0, 500.0],
            &schedule,
            &EpgOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn dictionary_signals_match_their_own_entries() {
        let dict = small_dictionary();
        for e in 0..dict.entry_count() {
            let res = match_signal(dict.signal(e), &dict).unwrap();
            assert!(res.matched);
            assert_eq!((res.t1_ms, res.t2_ms), dict.entry(e), "entry {e}");
        }
    }

    #[test]
    fn match_is_scale_and_phase_invariant() {
        let dict = small_dictionary();
        let scale = Complex64::from_polar(3.7, 0.4);
        for e in [0, dict.entry_count() / 2, dict.entry_count() - 1] {
            let scaled: Vec<Complex64> = dict.signal(e).iter().map(|&z| z * scale).collect();
            let res = match_signal(&scaled, &dict).unwrap();
            assert_eq!((res.t1_ms, res.t2_ms), dict.entry(e));
            // score scales, recovered m0 scales with it
            assert!((res.m0 * dict.norm_scale(e) - 3.7).abs() < 1e-9 * dict.norm_scale(e));
        }
    }

    #[test]
    fn zero_signal_is_skipped() {
        let dict = small_dictionary();
        let res = match_signal(&vec![Complex64::default(); 32], &dict).unwrap();
        assert!(!res.matched);
        assert_eq!(res.score, 0.0);
        assert_eq!((res.t1_ms, res.t2_ms), (0.0, 0.0));
    }

    #[test]
    fn m0_recovers_signal_amplitude() {
        let dict = small_dictionary();
        let e = 2;
        let m0_true = 2.5;
        let sig: Vec<Complex64> = dict
            .signal(e)
            .iter()
            .map(|&z| z * dict.norm_scale(e) * m0_true)
            .collect();
        let res = match_signal(&sig, &dict).unwrap();
        assert_eq!((res.t1_ms, res.t2_ms), dict.entry(e));
        assert!((res.m0 - m0_true).abs() < 1e-9);
    }

    #[test]
    fn length_mismatch_rejected() {
        let dict = small_dictionary();
        assert!(match_signal(&vec![Complex64::default(); 16], &dict).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn scale_invariance_holds_for_any_nonzero_scale(
            mag in 1e-6f64..1e6,
            phase in -3.14f64..3.14,
            e in 0usize..10,
        ) {
            let dict = small_dictionary();
            let e = e % dict.entry_count();
            let scale = Complex64::from_polar(mag, phase);
            let scaled: Vec<Complex64> = dict.signal(e).iter().map(|&z| z * scale).collect();
            let res = match_signal(&scaled, &dict).unwrap();
            prop_assert_eq!((res.t1_ms, res.t2_ms), dict.entry(e));
        }
    }
}
