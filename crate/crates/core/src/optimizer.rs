//! Simulated-annealing search over pulse-sequence schedules, with the fast
//! simulator inside the objective.
//!
//! Schedules are parameterized by per-segment flip-angle and TR controls
//! expanded to the full train by cubic interpolation; this keeps the search
//! space near a hundred dimensions instead of per-timepoint thousands. The
//! objective never runs a Fourier transform: the spatial response set is
//! precomputed once per context and only signal simulation, factored frame
//! products, dictionary rebuild, and matching execute per candidate.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cost::{compute_cost, compute_segment_rmse, CostFormulation};
use crate::error::{MrfError, Result};
use crate::matching::{match_series, DEFAULT_SKIP_THRESHOLD_FRAC};
use crate::phantom::TissuePhantom;
use crate::sequence::{
    build_dictionary, tissue_signals, EpgOptions, Inversion, SequenceSchedule, DEFAULT_TI_MS,
};
use crate::simulator::{linear_ordering, simulate_fast};
use crate::spatial_response::SpatialResponseSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub flip_min_deg: f64,
    pub flip_max_deg: f64,
    pub tr_min_ms: f64,
    pub tr_max_ms: f64,
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            flip_min_deg: 5.0,
            flip_max_deg: 70.0,
            tr_min_ms: 11.0,
            tr_max_ms: 15.0,
        }
    }
}

/// Segment controls for a candidate schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub flip_amp_deg: Vec<f64>,
    pub tr_base_ms: Vec<f64>,
    pub n_timepoints: usize,
    pub bounds: ParamBounds,
}

pub const DEFAULT_N_SEGMENTS: usize = 48;

impl ScheduleParams {
    pub fn new(
        flip_amp_deg: Vec<f64>,
        tr_base_ms: Vec<f64>,
        n_timepoints: usize,
        bounds: ParamBounds,
    ) -> Result<Self> {
        if flip_amp_deg.is_empty() || flip_amp_deg.len() != tr_base_ms.len() {
            return Err(MrfError::invalid("segment control lengths invalid"));
        }
        if n_timepoints == 0 {
            return Err(MrfError::invalid("n_timepoints must be positive"));
        }
        let mut p = ScheduleParams {
            flip_amp_deg,
            tr_base_ms,
            n_timepoints,
            bounds,
        };
        p.clamp();
        Ok(p)
    }

    /// Mid-range controls: a neutral starting point.
    pub fn uniform_start(n_segments: usize, n_timepoints: usize, bounds: ParamBounds) -> Self {
        let flip = 0.5 * (bounds.flip_min_deg + bounds.flip_max_deg);
        let tr = 0.5 * (bounds.tr_min_ms + bounds.tr_max_ms);
        ScheduleParams {
            flip_amp_deg: vec![flip; n_segments],
            tr_base_ms: vec![tr; n_segments],
            n_timepoints,
            bounds,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.flip_amp_deg.len()
    }

    fn clamp(&mut self) {
        for f in &mut self.flip_amp_deg {
            *f = f.clamp(self.bounds.flip_min_deg, self.bounds.flip_max_deg);
        }
        for tr in &mut self.tr_base_ms {
            *tr = tr.clamp(self.bounds.tr_min_ms, self.bounds.tr_max_ms);
        }
    }

    /// Deterministic expansion to a full schedule: Catmull-Rom through the
    /// segment controls, clamped back into bounds, constant TE at half the
    /// minimum TR, inversion prepared.
    pub fn expand(&self) -> Result<SequenceSchedule> {
        let n = self.n_timepoints;
        let mut flip = Vec::with_capacity(n);
        let mut tr = Vec::with_capacity(n);
        for t in 0..n {
            let tau = (t as f64 + 0.5) / n as f64;
            flip.push(
                catmull_rom(&self.flip_amp_deg, tau)
                    .clamp(self.bounds.flip_min_deg, self.bounds.flip_max_deg),
            );
            tr.push(
                catmull_rom(&self.tr_base_ms, tau)
                    .clamp(self.bounds.tr_min_ms, self.bounds.tr_max_ms),
            );
        }
        let te = self.bounds.tr_min_ms / 2.0;
        SequenceSchedule::new(
            flip,
            tr,
            vec![te; n],
            Inversion {
                enabled: true,
                ti_ms: DEFAULT_TI_MS,
            },
        )
    }
}

/// Catmull-Rom interpolation through `controls` placed at segment centers,
/// with clamped end handling.
fn catmull_rom(controls: &[f64], tau: f64) -> f64 {
    let k = controls.len();
    if k == 1 {
        return controls[0];
    }
    let s = tau * k as f64 - 0.5;
    let i = s.floor();
    let u = s - i;
    let at = |j: i64| -> f64 {
        let idx = j.clamp(0, k as i64 - 1) as usize;
        controls[idx]
    };
    let i = i as i64;
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    0.5 * (2.0 * p1
        + (p2 - p0) * u
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * u * u * u)
}

/// Perturb one random segment's flip and/or TR control by a Gaussian step;
/// the caller folds the temperature fraction into `step_scale`.
pub fn propose(
    params: &ScheduleParams,
    rng: &mut ChaCha8Rng,
    step_scale: f64,
    flip_sigma_deg: f64,
    tr_sigma_ms: f64,
) -> ScheduleParams {
    let mut next = params.clone();
    let seg = rng.random_range(0..params.n_segments());
    let which = rng.random_range(0..3u8);
    let normal = StandardNormal;
    if which != 1 {
        let g: f64 = normal.sample(rng);
        next.flip_amp_deg[seg] += g * flip_sigma_deg * step_scale;
    }
    if which != 0 {
        let g: f64 = normal.sample(rng);
        next.tr_base_ms[seg] += g * tr_sigma_ms * step_scale;
    }
    next.clamp();
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub initial_temp: f64,
    pub cooling_rate: f64,
    pub steps_per_temp: usize,
    pub min_temp: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub step_flip_deg: f64,
    pub step_tr_ms: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            initial_temp: 0.5,
            cooling_rate: 0.97,
            steps_per_temp: 100,
            min_temp: 1e-6,
            max_iterations: 44_000,
            rng_seed: 7,
            step_flip_deg: 10.0,
            step_tr_ms: 0.8,
        }
    }
}

impl AnnealConfig {
    fn validate(&self) -> Result<()> {
        if !(self.initial_temp >= 0.0) {
            return Err(MrfError::invalid("initial_temp must be nonnegative"));
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return Err(MrfError::invalid("cooling_rate must lie in (0, 1)"));
        }
        if self.steps_per_temp == 0 || self.max_iterations == 0 {
            return Err(MrfError::invalid("steps_per_temp and max_iterations must be positive"));
        }
        if !(self.min_temp >= 0.0) {
            return Err(MrfError::invalid("min_temp must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub temperature: f64,
    pub cost: f64,
    pub accepted: bool,
    pub best_cost: f64,
}

#[derive(Debug)]
pub struct AnnealResult {
    pub best_params: ScheduleParams,
    pub best_cost: f64,
    pub trace: Vec<TraceRow>,
}

/// Objective failure mid-run, carrying whatever trace accumulated.
#[derive(Debug)]
pub struct AnnealAborted {
    pub iteration: usize,
    pub source: MrfError,
    pub partial_trace: Vec<TraceRow>,
}

impl fmt::Display for AnnealAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "annealing aborted at iteration {}: {}",
            self.iteration, self.source
        )
    }
}

impl std::error::Error for AnnealAborted {}

/// Metropolis annealing with geometric cooling. Fully reproducible from
/// `rng_seed`; the best-ever candidate is tracked separately from the
/// random walk.
pub fn anneal<F>(
    initial: ScheduleParams,
    mut objective: F,
    config: &AnnealConfig,
) -> std::result::Result<AnnealResult, Box<AnnealAborted>>
where
    F: FnMut(&ScheduleParams) -> Result<f64>,
{
    if let Err(e) = config.validate() {
        return Err(Box::new(AnnealAborted {
            iteration: 0,
            source: e,
            partial_trace: Vec::new(),
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut trace: Vec<TraceRow> = Vec::new();

    let mut current = initial;
    let mut current_cost = match objective(&current) {
        Ok(c) => c,
        Err(e) => {
            return Err(Box::new(AnnealAborted {
                iteration: 0,
                source: e,
                partial_trace: trace,
            }))
        }
    };
    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut temp = config.initial_temp;
    trace.push(TraceRow {
        iteration: 0,
        temperature: temp,
        cost: current_cost,
        accepted: true,
        best_cost,
    });

    for iter in 1..=config.max_iterations {
        if temp < config.min_temp {
            break;
        }
        let frac = if config.initial_temp > 0.0 {
            temp / config.initial_temp
        } else {
            1.0
        };
        let candidate = propose(
            &current,
            &mut rng,
            frac,
            config.step_flip_deg,
            config.step_tr_ms,
        );
        let cand_cost = match objective(&candidate) {
            Ok(c) => c,
            Err(e) => {
                return Err(Box::new(AnnealAborted {
                    iteration: iter,
                    source: e,
                    partial_trace: trace,
                }))
            }
        };
        let delta = cand_cost - current_cost;
        let accepted = if delta <= 0.0 {
            true
        } else if temp > 0.0 {
            rng.random::<f64>() < (-delta / temp).exp()
        } else {
            false
        };
        if accepted {
            current = candidate;
            current_cost = cand_cost;
            if current_cost < best_cost {
                best = current.clone();
                best_cost = current_cost;
            }
        }
        trace.push(TraceRow {
            iteration: iter,
            temperature: temp,
            cost: cand_cost,
            accepted,
            best_cost,
        });
        if iter % config.steps_per_temp == 0 {
            temp *= config.cooling_rate;
        }
    }

    Ok(AnnealResult {
        best_params: best,
        best_cost,
        trace,
    })
}

pub fn write_trace_csv(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "iteration,temperature,cost,accepted,best_cost")?;
    for row in trace {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.iteration,
            row.temperature,
            row.cost,
            row.accepted as u8,
            row.best_cost
        )?;
    }
    Ok(())
}

/// Everything a candidate evaluation reuses. The spatial response set is
/// computed once per context and shared across all iterations.
pub struct ObjectiveContext<'a> {
    pub srf: &'a SpatialResponseSet,
    pub phantom: &'a TissuePhantom,
    pub dict_t1_grid: Vec<f64>,
    pub dict_t2_grid: Vec<f64>,
    pub epg: EpgOptions,
    pub time_ref_ms: f64,
    pub formulation: CostFormulation,
    pub skip_threshold_frac: f64,
    /// Per-label weights; tissues not listed weigh 1.
    pub weights: Vec<(String, f64)>,
}

impl<'a> ObjectiveContext<'a> {
    pub fn new(srf: &'a SpatialResponseSet, phantom: &'a TissuePhantom) -> Self {
        ObjectiveContext {
            srf,
            phantom,
            dict_t1_grid: optimizer_t1_grid(),
            dict_t2_grid: optimizer_t2_grid(),
            epg: EpgOptions::default(),
            time_ref_ms: 0.0, // resolved on first use from the candidate length
            formulation: CostFormulation::TimeMultiplied,
            skip_threshold_frac: DEFAULT_SKIP_THRESHOLD_FRAC,
            weights: Vec::new(),
        }
    }

    fn weight_for(&self, label: &str) -> f64 {
        self.weights
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, w)| *w)
            .unwrap_or(1.0)
    }
}

/// Expand a candidate, simulate its aliased series through the precomputed
/// responses, rebuild the (coarse) dictionary, match, and score.
pub fn objective(params: &ScheduleParams, ctx: &ObjectiveContext) -> Result<f64> {
    let schedule = params.expand()?;
    let signals = tissue_signals(ctx.phantom, &schedule, &ctx.epg)?;
    let series = simulate_fast(
        ctx.srf,
        &signals,
        &linear_ordering(ctx.srf.n_interleaves()),
    )?;
    let dict = build_dictionary(&ctx.dict_t1_grid, &ctx.dict_t2_grid, &schedule, &ctx.epg)?;
    let maps = match_series(&series, &dict, ctx.skip_threshold_frac)?;
    let errors = compute_segment_rmse(&maps, ctx.phantom)?;
    let weights: Vec<f64> = errors.iter().map(|e| ctx.weight_for(&e.label)).collect();
    let time_ref = if ctx.time_ref_ms > 0.0 {
        ctx.time_ref_ms
    } else {
        schedule.scan_time_ms()
    };
    let report = compute_cost(
        &errors,
        None,
        schedule.scan_time_ms(),
        &weights,
        time_ref,
        ctx.formulation,
    )?;
    Ok(report.total_cost)
}

/// Coarse (T1, T2) grids for inside-the-loop dictionary rebuilds; the final
/// winner should be re-evaluated on the full grids.
pub fn optimizer_t1_grid() -> Vec<f64> {
    let mut g = Vec::new();
    let mut push_range = |start: f64, step: f64, stop: f64| {
        let mut v = start;
        while v <= stop + 1e-9 {
            if g.last().map_or(true, |&last: &f64| v > last + 1e-9) {
                g.push(v);
            }
            v += step;
        }
    };
    push_range(20.0, 20.0, 100.0);
    push_range(100.0, 50.0, 1000.0);
    push_range(1000.0, 100.0, 3000.0);
    g
}

pub fn optimizer_t2_grid() -> Vec<f64> {
    let mut g = Vec::new();
    let mut push_range = |start: f64, step: f64, stop: f64| {
        let mut v = start;
        while v <= stop + 1e-9 {
            if g.last().map_or(true, |&last: &f64| v > last + 1e-9) {
                g.push(v);
            }
            v += step;
        }
    };
    push_range(10.0, 10.0, 100.0);
    push_range(100.0, 25.0, 300.0);
    push_range(300.0, 100.0, 1000.0);
    g
}
