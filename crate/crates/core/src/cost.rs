//! Quantitative-map error metrics and the scalar optimization cost.
//!
//! Per-tissue relative RMS errors are taken over the pixels a tissue
//! dominates (volume fraction ≥ 0.5). Unmatched pixels count at full error
//! rather than being excluded, so an optimizer cannot improve its score by
//! pushing pixels under the matcher's skip threshold.

use serde::Serialize;

use crate::error::{MrfError, Result};
use crate::matching::QuantMaps;
use crate::phantom::TissuePhantom;
use crate::sequence::{Dictionary, TissueSignal};
use crate::util::{cdot, l2_norm};

/// Fraction threshold defining a tissue's segment.
pub const SEGMENT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SegmentError {
    pub label: String,
    pub rmse_t1_rel: f64,
    pub rmse_t2_rel: f64,
}

/// Relative RMS T1/T2 error per non-void tissue segment. A non-void tissue
/// whose segment is empty at this grid size is an error.
pub fn compute_segment_rmse(
    maps: &QuantMaps,
    phantom: &TissuePhantom,
) -> Result<Vec<SegmentError>> {
    if maps.grid_size() != phantom.grid_size() {
        return Err(MrfError::invalid("maps and phantom grids differ"));
    }
    phantom
        .tissues()
        .iter()
        .zip(phantom.masks())
        .filter(|(spec, _)| !spec.is_void())
        .map(|(spec, mask)| {
            let mut n = 0usize;
            let mut sq_t1 = 0.0;
            let mut sq_t2 = 0.0;
            for (idx, &frac) in mask.indexed_iter() {
                if frac >= SEGMENT_THRESHOLD {
                    n += 1;
                    sq_t1 += (maps.t1_map[idx] - spec.t1_ms).powi(2);
                    sq_t2 += (maps.t2_map[idx] - spec.t2_ms).powi(2);
                }
            }
            if n == 0 {
                return Err(MrfError::EmptySegment(spec.label.clone()));
            }
            Ok(SegmentError {
                label: spec.label.clone(),
                rmse_t1_rel: (sq_t1 / n as f64).sqrt() / spec.t1_ms,
                rmse_t2_rel: (sq_t2 / n as f64).sqrt() / spec.t2_ms,
            })
        })
        .collect()
}

/// Scan-time handling in the total cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CostFormulation {
    /// error × scan_time / time_ref — longer scans cost more.
    TimeMultiplied,
    /// error × time_ref / scan_time — the literal "divide by a scan-time
    /// penalty" reading, which rewards long scans.
    LiteralDivided,
}

impl CostFormulation {
    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "time_multiplied" => Ok(CostFormulation::TimeMultiplied),
            "literal_divided" => Ok(CostFormulation::LiteralDivided),
            other => Err(MrfError::format(format!("unknown cost formulation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub per_tissue: Vec<SegmentError>,
    pub weights: Vec<f64>,
    pub scan_time_ms: f64,
    pub time_ref_ms: f64,
    /// time_ref / scan_time: larger for shorter scans.
    pub penalty_factor: f64,
    pub error_term: f64,
    pub quality_term: Option<f64>,
    pub formulation: CostFormulation,
    pub total_cost: f64,
}

/// Combine per-tissue errors (weights aligned with `errors`), an optional
/// quality-factor vector, and the scan-time factor into one scalar.
///
/// With the quality hook disabled, total_cost = 0 exactly when every error
/// is 0; enabling it adds a Σ w/(1+qf) robustness term that is positive for
/// finite quality factors.
pub fn compute_cost(
    errors: &[SegmentError],
    quality_factors: Option<&[f64]>,
    scan_time_ms: f64,
    weights: &[f64],
    time_ref_ms: f64,
    formulation: CostFormulation,
) -> Result<CostReport> {
    if errors.is_empty() {
        return Err(MrfError::invalid("no segment errors"));
    }
    if weights.len() != errors.len() {
        return Err(MrfError::invalid("weights length does not match errors"));
    }
    if weights.iter().any(|&w| w < 0.0) || weights.iter().all(|&w| w == 0.0) {
        return Err(MrfError::invalid("weights must be nonnegative, not all zero"));
    }
    if !(scan_time_ms > 0.0) || !(time_ref_ms > 0.0) {
        return Err(MrfError::invalid("scan and reference times must be positive"));
    }
    if let Some(qf) = quality_factors {
        if qf.len() != errors.len() {
            return Err(MrfError::invalid("quality factor length mismatch"));
        }
    }

    let error_term: f64 = errors
        .iter()
        .zip(weights)
        .map(|(e, w)| w * (e.rmse_t1_rel + e.rmse_t2_rel))
        .sum();
    let quality_term = quality_factors.map(|qf| {
        qf.iter()
            .zip(weights)
            .map(|(&q, w)| w / (1.0 + q.max(0.0)))
            .sum::<f64>()
    });
    let combined = error_term + quality_term.unwrap_or(0.0);
    let time_ratio = scan_time_ms / time_ref_ms;
    let total_cost = match formulation {
        CostFormulation::TimeMultiplied => combined * time_ratio,
        CostFormulation::LiteralDivided => combined / time_ratio,
    };
    Ok(CostReport {
        per_tissue: errors.to_vec(),
        weights: weights.to_vec(),
        scan_time_ms,
        time_ref_ms,
        penalty_factor: time_ref_ms / scan_time_ms,
        error_term,
        quality_term,
        formulation,
        total_cost,
    })
}

/// Correlation-separability proxy for per-tissue measurement robustness:
/// qf_i = ‖d_i‖ · (1 − max_{j≠i} |⟨d̂_i, d̂_j⟩|). Larger is more robust;
/// identical signals score 0. Any alternative with the same signature can
/// be swapped in.
pub type QualityFactorFn = fn(&[TissueSignal], Option<&Dictionary>) -> Vec<f64>;

pub fn quality_factor_hook(
    signals: &[TissueSignal],
    _dictionary: Option<&Dictionary>,
) -> Vec<f64> {
    let norms: Vec<f64> = signals.iter().map(|s| l2_norm(&s.samples)).collect();
    signals
        .iter()
        .enumerate()
        .map(|(i, si)| {
            if norms[i] == 0.0 {
                return 0.0;
            }
            let mut max_corr = 0.0f64;
            for (j, sj) in signals.iter().enumerate() {
                if j == i || norms[j] == 0.0 {
                    continue;
                }
                let corr = cdot(&si.samples, &sj.samples).norm() / (norms[i] * norms[j]);
                max_corr = max_corr.max(corr);
            }
            norms[i] * (1.0 - max_corr)
        })
        .collect()
}
