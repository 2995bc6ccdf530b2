//! FISP signal evolution via the extended phase graph, plus schedules and
//! the matching dictionary.
//!
//! Each repetition applies an RF rotation, relaxes to the echo time where
//! the F0 configuration state is recorded, relaxes over the remainder of the
//! TR, and then shifts the configuration ladder by one dephasing cycle (the
//! unbalanced FISP gradient). An optional ideal 180° inversion precedes the
//! train.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{MrfError, Result};
use crate::phantom::TissuePhantom;
use crate::tensor::TensorFile;
use crate::util::{l2_norm, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub enabled: bool,
    pub ti_ms: f64,
}

/// Flip-angle / TR / TE train with an optional inversion preparation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSchedule {
    pub flip_deg: Vec<f64>,
    pub tr_ms: Vec<f64>,
    pub te_ms: Vec<f64>,
    pub inversion: Inversion,
}

pub const DEFAULT_TI_MS: f64 = 20.64;

impl SequenceSchedule {
    pub fn new(
        flip_deg: Vec<f64>,
        tr_ms: Vec<f64>,
        te_ms: Vec<f64>,
        inversion: Inversion,
    ) -> Result<Self> {
        let n = flip_deg.len();
        if n == 0 {
            return Err(MrfError::invalid("schedule needs at least one timepoint"));
        }
        if tr_ms.len() != n || te_ms.len() != n {
            return Err(MrfError::invalid("flip/tr/te lengths differ"));
        }
        for t in 0..n {
            if !(0.0..=90.0).contains(&flip_deg[t]) {
                return Err(MrfError::invalid(format!(
                    "flip[{t}] = {} outside [0, 90] degrees",
                    flip_deg[t]
                )));
            }
            if !(te_ms[t] >= 0.0 && tr_ms[t] > te_ms[t]) {
                return Err(MrfError::invalid(format!(
                    "need tr > te >= 0 at timepoint {t} (tr={}, te={})",
                    tr_ms[t], te_ms[t]
                )));
            }
        }
        if inversion.enabled && !(inversion.ti_ms > 0.0 && inversion.ti_ms.is_finite()) {
            return Err(MrfError::invalid("inversion time must be positive"));
        }
        Ok(SequenceSchedule {
            flip_deg,
            tr_ms,
            te_ms,
            inversion,
        })
    }

    pub fn n_timepoints(&self) -> usize {
        self.flip_deg.len()
    }

    pub fn scan_time_ms(&self) -> f64 {
        let ti = if self.inversion.enabled {
            self.inversion.ti_ms
        } else {
            0.0
        };
        ti + self.tr_ms.iter().sum::<f64>()
    }

    pub fn schedule_hash(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("schedule serializes")
                .as_bytes(),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: SequenceSchedule =
            serde_json::from_str(&text).map_err(|e| MrfError::format(format!("schedule: {e}")))?;
        SequenceSchedule::new(s.flip_deg, s.tr_ms, s.te_ms, s.inversion)
    }
}

/// Stand-in FISP train: sinusoidal flip-angle lobes in [5°, 70°] over a
/// gently varying TR in [11, 15] ms, constant TE, inversion prepared. The
/// published trains this mimics are not redistributable; the shape is only
/// meant to be a plausible default and is fully replaceable via schedule
/// files.
pub fn default_fisp_schedule(n_timepoints: usize) -> Result<SequenceSchedule> {
    if n_timepoints == 0 {
        return Err(MrfError::invalid("need at least one timepoint"));
    }
    let lobe = (n_timepoints.div_ceil(2)).max(48);
    let mut flip = Vec::with_capacity(n_timepoints);
    let mut tr = Vec::with_capacity(n_timepoints);
    for t in 0..n_timepoints {
        let lobe_idx = t / lobe;
        let pos = (t % lobe) as f64 / lobe as f64;
        let amp = 70.0 * (1.0 - 0.15 * (lobe_idx % 2) as f64);
        let s = (std::f64::consts::PI * pos).sin();
        flip.push(5.0 + (amp - 5.0) * s * s);
        tr.push(13.0 + 2.0 * (2.0 * std::f64::consts::PI * t as f64 / 89.0).sin());
    }
    let te = vec![5.5; n_timepoints];
    SequenceSchedule::new(
        flip,
        tr,
        te,
        Inversion {
            enabled: true,
            ti_ms: DEFAULT_TI_MS,
        },
    )
}

/// Simulation knobs that are properties of the scanner model, not of the
/// schedule itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpgOptions {
    /// Constant RF phase in degrees.
    pub rf_phase_deg: f64,
    /// Configuration-state cap; `None` keeps every reachable state.
    pub max_states: Option<usize>,
}

impl Default for EpgOptions {
    fn default() -> Self {
        EpgOptions {
            rf_phase_deg: 0.0,
            max_states: None,
        }
    }
}

/// One tissue's transient signal (un-normalized), tagged with the schedule
/// it was simulated under.
#[derive(Debug, Clone)]
pub struct TissueSignal {
    pub label: String,
    pub samples: Vec<Complex64>,
    pub schedule_hash: String,
}

struct EpgState {
    fp: Vec<Complex64>,
    fm: Vec<Complex64>,
    z: Vec<Complex64>,
}

impl EpgState {
    fn new(cap: usize) -> Self {
        let mut z = vec![Complex64::default(); cap];
        z[0] = Complex64::new(1.0, 0.0);
        EpgState {
            fp: vec![Complex64::default(); cap],
            fm: vec![Complex64::default(); cap],
            z,
        }
    }

    fn rotate(&mut self, alpha: f64, phi: f64) {
        let (half_sin, half_cos) = (alpha / 2.0).sin_cos();
        let cos2 = half_cos * half_cos;
        let sin2 = half_sin * half_sin;
        let sin_a = alpha.sin();
        let e_ip = Complex64::from_polar(1.0, phi);
        let e_2ip = Complex64::from_polar(1.0, 2.0 * phi);
        let i = Complex64::new(0.0, 1.0);
        // Standard configuration-state mixing matrix for an RF pulse of
        // flip alpha about the axis at azimuth phi.
        let m = [
            [
                Complex64::new(cos2, 0.0),
                e_2ip * sin2,
                -i * e_ip * sin_a,
            ],
            [
                e_2ip.conj() * sin2,
                Complex64::new(cos2, 0.0),
                i * e_ip.conj() * sin_a,
            ],
            [
                -i * e_ip.conj() * (sin_a / 2.0),
                i * e_ip * (sin_a / 2.0),
                Complex64::new(alpha.cos(), 0.0),
            ],
        ];
        for k in 0..self.fp.len() {
            let (a, b, c) = (self.fp[k], self.fm[k], self.z[k]);
            self.fp[k] = m[0][0] * a + m[0][1] * b + m[0][2] * c;
            self.fm[k] = m[1][0] * a + m[1][1] * b + m[1][2] * c;
            self.z[k] = m[2][0] * a + m[2][1] * b + m[2][2] * c;
        }
    }

    fn relax(&mut self, dt_ms: f64, t1_ms: f64, t2_ms: f64) {
        let e1 = (-dt_ms / t1_ms).exp();
        let e2 = (-dt_ms / t2_ms).exp();
        for k in 0..self.fp.len() {
            self.fp[k] *= e2;
            self.fm[k] *= e2;
            self.z[k] *= e1;
        }
        self.z[0] += 1.0 - e1;
    }

    /// One unbalanced-gradient dephasing cycle: F+ ladder climbs, F− ladder
    /// descends, and the state crossing zero joins F+ as a conjugate.
    fn grad_shift(&mut self) {
        let n = self.fp.len();
        for k in (1..n).rev() {
            self.fp[k] = self.fp[k - 1];
        }
        for k in 0..n - 1 {
            self.fm[k] = self.fm[k + 1];
        }
        self.fm[n - 1] = Complex64::default();
        self.fp[0] = self.fm[0].conj();
    }

    #[cfg(debug_assertions)]
    fn assert_bounded(&self) {
        for k in 0..self.fp.len() {
            debug_assert!(self.fp[k].norm() <= 1.0 + 1e-9, "F+ state exceeds M0");
            debug_assert!(self.fm[k].norm() <= 1.0 + 1e-9, "F- state exceeds M0");
            debug_assert!(self.z[k].norm() <= 1.0 + 1e-9, "Z state exceeds M0");
        }
    }
}

/// Extended-phase-graph simulation of one (T1, T2) pair under `schedule`.
pub fn simulate_signal(
    t1_ms: f64,
    t2_ms: f64,
    schedule: &SequenceSchedule,
    options: &EpgOptions,
) -> Result<TissueSignal> {
    if !(t1_ms > 0.0) || !(t2_ms > 0.0) {
        return Err(MrfError::invalid(format!(
            "relaxation times must be positive (got t1={t1_ms}, t2={t2_ms})"
        )));
    }
    let n = schedule.n_timepoints();
    let cap = options.max_states.unwrap_or(n + 1).clamp(2, n + 1);
    let phi = options.rf_phase_deg.to_radians();
    let mut epg = EpgState::new(cap);

    if schedule.inversion.enabled {
        epg.rotate(std::f64::consts::PI, phi);
        epg.relax(schedule.inversion.ti_ms, t1_ms, t2_ms);
    }

    let mut samples = Vec::with_capacity(n);
    for t in 0..n {
        epg.rotate(schedule.flip_deg[t].to_radians(), phi);
        epg.relax(schedule.te_ms[t], t1_ms, t2_ms);
        samples.push(epg.fp[0]);
        epg.relax(schedule.tr_ms[t] - schedule.te_ms[t], t1_ms, t2_ms);
        epg.grad_shift();
        #[cfg(debug_assertions)]
        epg.assert_bounded();
    }
    Ok(TissueSignal {
        label: format!("t1{t1_ms}_t2{t2_ms}"),
        samples,
        schedule_hash: schedule.schedule_hash(),
    })
}

/// Signals for every tissue of a phantom; void tissues short-circuit to
/// identically zero without touching the simulator.
pub fn tissue_signals(
    phantom: &TissuePhantom,
    schedule: &SequenceSchedule,
    options: &EpgOptions,
) -> Result<Vec<TissueSignal>> {
    let hash = schedule.schedule_hash();
    phantom
        .tissues()
        .par_iter()
        .map(|spec| {
            if spec.is_void() {
                Ok(TissueSignal {
                    label: spec.label.clone(),
                    samples: vec![Complex64::default(); schedule.n_timepoints()],
                    schedule_hash: hash.clone(),
                })
            } else {
                let mut sig = simulate_signal(spec.t1_ms, spec.t2_ms, schedule, options)?;
                sig.label = spec.label.clone();
                Ok(sig)
            }
        })
        .collect()
}

/// Unit-norm signal atlas over a feasible (T1, T2) grid.
#[derive(Debug, Clone)]
pub struct Dictionary {
    entries: Vec<(f64, f64)>,
    signals: Vec<Complex64>,
    norm_scale: Vec<f64>,
    n_timepoints: usize,
    schedule_hash: String,
}

impl Dictionary {
    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn entry(&self, e: usize) -> (f64, f64) {
        self.entries[e]
    }

    pub fn signal(&self, e: usize) -> &[Complex64] {
        &self.signals[e * self.n_timepoints..(e + 1) * self.n_timepoints]
    }

    pub fn norm_scale(&self, e: usize) -> f64 {
        self.norm_scale[e]
    }

    pub fn n_timepoints(&self) -> usize {
        self.n_timepoints
    }

    pub fn schedule_hash(&self) -> &str {
        &self.schedule_hash
    }
}

/// Simulate and L2-normalize every feasible (t1, t2) grid combination.
/// Entries are laid out t1-major, so the result is identical no matter how
/// the parallel build is scheduled.
pub fn build_dictionary(
    t1_grid: &[f64],
    t2_grid: &[f64],
    schedule: &SequenceSchedule,
    options: &EpgOptions,
) -> Result<Dictionary> {
    check_ascending("t1_grid", t1_grid)?;
    check_ascending("t2_grid", t2_grid)?;
    let entries: Vec<(f64, f64)> = t1_grid
        .iter()
        .flat_map(|&t1| {
            t2_grid
                .iter()
                .filter(move |&&t2| t2 <= t1)
                .map(move |&t2| (t1, t2))
        })
        .collect();
    dictionary_from_entries(entries, schedule, options)
}

/// Dictionary over an explicit entry list (e.g. exactly a phantom's tissue
/// values) instead of a grid product.
pub fn build_dictionary_from_entries(
    entries: &[(f64, f64)],
    schedule: &SequenceSchedule,
    options: &EpgOptions,
) -> Result<Dictionary> {
    for &(t1, t2) in entries {
        if !(t1 > 0.0 && t2 > 0.0 && t2 <= t1) {
            return Err(MrfError::invalid(format!(
                "infeasible dictionary entry ({t1}, {t2})"
            )));
        }
    }
    dictionary_from_entries(entries.to_vec(), schedule, options)
}

fn dictionary_from_entries(
    entries: Vec<(f64, f64)>,
    schedule: &SequenceSchedule,
    options: &EpgOptions,
) -> Result<Dictionary> {
    if entries.is_empty() {
        return Err(MrfError::invalid(
            "no feasible (t1, t2) entries: every candidate had t2 > t1",
        ));
    }
    let n = schedule.n_timepoints();
    let rows: Vec<(Vec<Complex64>, f64)> = entries
        .par_iter()
        .map(|&(t1, t2)| {
            let sig = simulate_signal(t1, t2, schedule, options)?;
            let norm = l2_norm(&sig.samples);
            if norm == 0.0 {
                return Err(MrfError::invalid(format!(
                    "entry ({t1}, {t2}) produced a zero signal; cannot normalize"
                )));
            }
            let unit: Vec<Complex64> = sig.samples.iter().map(|&z| z / norm).collect();
            Ok((unit, norm))
        })
        .collect::<Result<_>>()?;

    let mut signals = Vec::with_capacity(entries.len() * n);
    let mut norm_scale = Vec::with_capacity(entries.len());
    for (unit, norm) in rows {
        signals.extend(unit);
        norm_scale.push(norm);
    }
    Ok(Dictionary {
        entries,
        signals,
        norm_scale,
        n_timepoints: n,
        schedule_hash: schedule.schedule_hash(),
    })
}

fn check_ascending(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(MrfError::invalid(format!("{name} is empty")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MrfError::invalid(format!("{name} must be ascending")));
    }
    if grid.iter().any(|&v| v <= 0.0) {
        return Err(MrfError::invalid(format!("{name} must be positive")));
    }
    Ok(())
}

/// Inclusive start:step:stop ranges, finer at short relaxation times.
fn grid_from_ranges(ranges: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &(start, step, stop) in ranges {
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

/// Default T1 grid: 2–3000 ms, nonuniform.
pub fn default_t1_grid() -> Vec<f64> {
    grid_from_ranges(&[(2.0, 10.0, 100.0), (100.0, 20.0, 1000.0), (1000.0, 50.0, 3000.0)])
}

/// Default T2 grid: 2–2000 ms, nonuniform.
pub fn default_t2_grid() -> Vec<f64> {
    grid_from_ranges(&[(2.0, 5.0, 100.0), (100.0, 10.0, 300.0), (300.0, 50.0, 2000.0)])
}

pub fn save_dictionary(dict: &Dictionary, path: impl AsRef<Path>) -> Result<()> {
    let mut meta = Map::new();
    meta.insert("kind".into(), Value::String("dictionary".into()));
    meta.insert(
        "t1_list".into(),
        serde_json::json!(dict.entries.iter().map(|e| e.0).collect::<Vec<_>>()),
    );
    meta.insert(
        "t2_list".into(),
        serde_json::json!(dict.entries.iter().map(|e| e.1).collect::<Vec<_>>()),
    );
    meta.insert(
        "schedule_hash".into(),
        Value::String(dict.schedule_hash.clone()),
    );
    meta.insert("n_timepoints".into(), serde_json::json!(dict.n_timepoints));
    meta.insert("norm_scale".into(), serde_json::json!(dict.norm_scale));
    TensorFile::new_c64(
        vec![dict.entries.len(), dict.n_timepoints],
        dict.signals.clone(),
        meta,
    )?
    .write(path)
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    let t = TensorFile::read(path)?;
    if t.meta_str("kind")? != "dictionary" {
        return Err(MrfError::format("tensor file is not a dictionary"));
    }
    if t.shape.len() != 2 {
        return Err(MrfError::format("dictionary tensor must be [entries, time]"));
    }
    let t1_list: Vec<f64> = serde_json::from_value(
        t.meta
            .get("t1_list")
            .cloned()
            .ok_or_else(|| MrfError::format("missing t1_list"))?,
    )?;
    let t2_list: Vec<f64> = serde_json::from_value(
        t.meta
            .get("t2_list")
            .cloned()
            .ok_or_else(|| MrfError::format("missing t2_list"))?,
    )?;
    let norm_scale: Vec<f64> = serde_json::from_value(
        t.meta
            .get("norm_scale")
            .cloned()
            .ok_or_else(|| MrfError::format("missing norm_scale"))?,
    )?;
    if t1_list.len() != t.shape[0] || t2_list.len() != t.shape[0] || norm_scale.len() != t.shape[0]
    {
        return Err(MrfError::format("dictionary metadata lengths disagree"));
    }
    Ok(Dictionary {
        entries: t1_list.into_iter().zip(t2_list).collect(),
        signals: t.c64_data()?.to_vec(),
        norm_scale,
        n_timepoints: t.shape[1],
        schedule_hash: t.meta_str("schedule_hash")?.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_schedule(n: usize) -> SequenceSchedule {
        default_fisp_schedule(n).unwrap()
    }

    #[test]
    fn zero_flip_train_gives_zero_signal() {
        let s = SequenceSchedule::new(
            vec![0.0; 8],
            vec![12.0; 8],
            vec![5.5; 8],
            Inversion {
                enabled: false,
                ti_ms: 0.0,
            },
        )
        .unwrap();
        let sig = simulate_signal(800.0, 40.0, &s, &EpgOptions::default()).unwrap();
        assert!(sig.samples.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = short_schedule(24);
        let opts = EpgOptions::default();
        let a = simulate_signal(800.0, 40.0, &s, &opts).unwrap();
        let b = simulate_signal(800.0, 40.0, &s, &opts).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn nonpositive_relaxation_rejected() {
        let s = short_schedule(4);
        assert!(simulate_signal(0.0, 0.0, &s, &EpgOptions::default()).is_err());
        assert!(simulate_signal(800.0, -1.0, &s, &EpgOptions::default()).is_err());
    }

    #[test]
    fn default_schedule_respects_bounds() {
        let s = default_fisp_schedule(480).unwrap();
        assert_eq!(s.n_timepoints(), 480);
        assert!(s.flip_deg.iter().all(|&f| (5.0..=70.0).contains(&f)));
        assert!(s.tr_ms.iter().all(|&tr| (11.0..=15.0).contains(&tr)));
        assert!(s.inversion.enabled);
        assert_eq!(s.inversion.ti_ms, DEFAULT_TI_MS);
        for t in 1..480 {
            assert!(
                (s.flip_deg[t] - s.flip_deg[t - 1]).abs() <= 5.0,
                "flip discontinuity at {t}"
            );
        }
    }

    #[test]
    fn constant_tr_scan_time() {
        let s = SequenceSchedule::new(
            vec![30.0; 480],
            vec![12.0; 480],
            vec![5.5; 480],
            Inversion {
                enabled: false,
                ti_ms: 0.0,
            },
        )
        .unwrap();
        assert_eq!(s.scan_time_ms(), 5760.0);
    }

    #[test]
    fn signal_magnitude_bounded_by_equilibrium() {
        let s = short_schedule(64);
        for &(t1, t2) in &[(800.0, 40.0), (1400.0, 60.0), (3000.0, 500.0)] {
            let sig = simulate_signal(t1, t2, &s, &EpgOptions::default()).unwrap();
            assert!(sig.samples.iter().all(|z| z.norm() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn smoothness_in_t1() {
        let s = short_schedule(48);
        let a = simulate_signal(800.0, 40.0, &s, &EpgOptions::default()).unwrap();
        let b = simulate_signal(801.0, 40.0, &s, &EpgOptions::default()).unwrap();
        let rel = crate::util::rel_l2(&b.samples, &a.samples);
        assert!(rel < 0.01, "1 ms T1 perturbation changed signal by {rel}");
    }

    #[test]
    fn dictionary_excludes_infeasible_and_errors_when_empty() {
        let s = short_schedule(8);
        let d = build_dictionary(&[500.0, 1000.0], &[40.0, 800.0], &s, &EpgOptions::default())
            .unwrap();
        assert_eq!(d.entry_count(), 3); // (500,40) (1000,40) (1000,800)
        assert!(d.entries().iter().all(|&(t1, t2)| t2 <= t1));
        assert!(matches!(
            build_dictionary(&[1000.0], &[2000.0], &s, &EpgOptions::default()),
            Err(MrfError::InvalidArgument(_))
        ));
    }

    #[test]
    fn dictionary_normalization_is_consistent() {
        let s = short_schedule(24);
        let opts = EpgOptions::default();
        let d = build_dictionary(&[800.0], &[40.0], &s, &opts).unwrap();
        let raw = simulate_signal(800.0, 40.0, &s, &opts).unwrap();
        assert!((l2_norm(d.signal(0)) - 1.0).abs() < 1e-12);
        let scale = d.norm_scale(0);
        for (u, r) in d.signal(0).iter().zip(&raw.samples) {
            assert!((u * scale - r).norm() <= 1e-13 * raw.samples.len() as f64);
        }
    }

    #[test]
    fn default_grids_cover_reference_ranges() {
        let t1 = default_t1_grid();
        let t2 = default_t2_grid();
        assert_eq!(*t1.first().unwrap(), 2.0);
        assert_eq!(*t1.last().unwrap(), 3000.0);
        assert_eq!(*t2.first().unwrap(), 2.0);
        assert_eq!(*t2.last().unwrap(), 2000.0);
        assert!(t1.windows(2).all(|w| w[1] > w[0]));
        assert!(t2.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn dictionary_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dict.mrft");
        let s = short_schedule(16);
        let d = build_dictionary(
            &[400.0, 800.0, 1400.0],
            &[40.0, 60.0],
            &s,
            &EpgOptions::default(),
        )
        .unwrap();
        save_dictionary(&d, &path).unwrap();
        let back = load_dictionary(&path).unwrap();
        assert_eq!(back.entries(), d.entries());
        assert_eq!(back.schedule_hash(), d.schedule_hash());
        for e in 0..d.entry_count() {
            assert_eq!(back.norm_scale(e), d.norm_scale(e));
            for (a, b) in d.signal(e).iter().zip(back.signal(e)) {
                assert_eq!(a.re.to_bits(), b.re.to_bits());
                assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn schedule_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sched.json");
        let s = short_schedule(12);
        s.save(&path).unwrap();
        let back = SequenceSchedule::load(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.schedule_hash(), s.schedule_hash());
    }
}
