//! Non-uniform Fourier transforms via Kaiser–Bessel gridding.
//!
//! Forward maps a Cartesian image to arbitrary k-space samples
//! (s_m = Σ image(x, y)·exp(−2πi(kx·x + ky·y)), pixel coordinates centered on
//! the grid); adjoint spreads samples back onto the grid. Both share one
//! oversampled FFT grid, a tabulated kernel, and a separable deapodization
//! correction. FFT index wrapping keeps the periodic convention exact, so
//! callers never see fftshift bookkeeping.
//!
//! The kernel support is `kernel_width` nominal grid cells, i.e.
//! `kernel_width · oversampling` cells of the oversampled grid; β follows the
//! standard oversampling-dependent choice. An `AtomicU64` operation counter
//! exists so callers can assert that precomputed paths execute no transforms.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{MrfError, Result};

/// Kernel lookup table entries per half-support.
const TABLE_SIZE: usize = 10_000;

static OP_COUNT: AtomicU64 = AtomicU64::new(0);

/// Total forward + adjoint transforms executed by this process.
pub fn op_count() -> u64 {
    OP_COUNT.load(Ordering::Relaxed)
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..200 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// sinh(√z)/√z continued through z < 0 as sin(√−z)/√−z.
fn sinhc_sqrt(z: f64) -> f64 {
    if z > 0.0 {
        let s = z.sqrt();
        s.sinh() / s
    } else if z < 0.0 {
        let s = (-z).sqrt();
        s.sin() / s
    } else {
        1.0
    }
}

/// Reusable gridding plan bound to one coordinate set.
pub struct GriddingPlan {
    grid: (usize, usize),
    os_grid: (usize, usize),
    taps: usize,
    n_samples: usize,
    table: Vec<f64>,
    table_step_inv: f64,
    deapod_rows: Vec<f64>,
    deapod_cols: Vec<f64>,
    // per-sample wrapped grid indices and kernel weights, taps per axis
    idx_col: Vec<u32>,
    idx_row: Vec<u32>,
    w_col: Vec<f64>,
    w_row: Vec<f64>,
    fft_fwd_cols: Arc<dyn Fft<f64>>,
    fft_fwd_rows: Arc<dyn Fft<f64>>,
    fft_inv_cols: Arc<dyn Fft<f64>>,
    fft_inv_rows: Arc<dyn Fft<f64>>,
}

pub const DEFAULT_OVERSAMPLING: f64 = 2.0;
pub const DEFAULT_KERNEL_WIDTH: usize = 4;

impl GriddingPlan {
    /// Build a plan for `coords` (cycles/pixel, |component| ≤ 0.5) over a
    /// `grid_size` = (rows, cols) image.
    pub fn new(
        coords: &[[f64; 2]],
        grid_size: (usize, usize),
        oversampling: f64,
        kernel_width: usize,
    ) -> Result<Self> {
        if coords.is_empty() {
            return Err(MrfError::invalid("empty coordinate set"));
        }
        if grid_size.0 < 2 || grid_size.1 < 2 {
            return Err(MrfError::invalid("grid too small"));
        }
        if !(1.0..=8.0).contains(&oversampling) {
            return Err(MrfError::invalid("oversampling must be in [1, 8]"));
        }
        if kernel_width < 2 {
            return Err(MrfError::invalid("kernel_width must be at least 2"));
        }
        for (m, c) in coords.iter().enumerate() {
            if c[0].abs() > 0.5 + 1e-12 || c[1].abs() > 0.5 + 1e-12 {
                return Err(MrfError::invalid(format!(
                    "coordinate {m} = ({}, {}) outside |k| <= 0.5",
                    c[0], c[1]
                )));
            }
        }

        let even_os = |n: usize| -> usize {
            let m = (n as f64 * oversampling).ceil() as usize;
            m + (m % 2)
        };
        let (rows, cols) = grid_size;
        let os_grid = (even_os(rows), even_os(cols));
        let taps = ((kernel_width as f64 * oversampling).round() as usize).max(2);
        let half = taps as f64 / 2.0;
        let beta = std::f64::consts::PI
            * ((taps as f64 / oversampling).powi(2) * (oversampling - 0.5).powi(2) - 0.8)
                .max(1.0)
                .sqrt();

        let i0_beta = bessel_i0(beta);
        let table_step = half / TABLE_SIZE as f64;
        let table: Vec<f64> = (0..=TABLE_SIZE)
            .map(|i| {
                let u = i as f64 * table_step;
                let arg = 1.0 - (u / half).powi(2);
                bessel_i0(beta * arg.max(0.0).sqrt()) / i0_beta
            })
            .collect();

        // Separable deapodization from the kernel's continuous transform.
        let deapod_axis = |n: usize, n_os: usize| -> Result<Vec<f64>> {
            let center = n / 2;
            (0..n)
                .map(|i| {
                    let f = (i as f64 - center as f64) / n_os as f64;
                    let z = beta * beta - (std::f64::consts::PI * taps as f64 * f).powi(2);
                    let c = taps as f64 / i0_beta * sinhc_sqrt(z);
                    if c <= 0.0 {
                        Err(MrfError::invalid(
                            "deapodization not positive on the field of view",
                        ))
                    } else {
                        Ok(c)
                    }
                })
                .collect()
        };
        let deapod_rows = deapod_axis(rows, os_grid.0)?;
        let deapod_cols = deapod_axis(cols, os_grid.1)?;

        let n_samples = coords.len();
        let mut idx_col = Vec::with_capacity(n_samples * taps);
        let mut idx_row = Vec::with_capacity(n_samples * taps);
        let mut w_col = Vec::with_capacity(n_samples * taps);
        let mut w_row = Vec::with_capacity(n_samples * taps);
        let lookup = |table: &[f64], u: f64| -> f64 {
            let t = u.abs() * (TABLE_SIZE as f64 / half);
            let i = t as usize;
            if i >= TABLE_SIZE {
                return 0.0;
            }
            let frac = t - i as f64;
            table[i] * (1.0 - frac) + table[i + 1] * frac
        };
        let fill_axis =
            |k: f64, n_os: usize, idx: &mut Vec<u32>, w: &mut Vec<f64>| {
                let kappa = k * n_os as f64;
                let j0 = (kappa - half).ceil() as i64;
                for a in 0..taps {
                    let j = j0 + a as i64;
                    let wrapped = j.rem_euclid(n_os as i64) as u32;
                    idx.push(wrapped);
                    w.push(lookup(&table, kappa - j as f64));
                }
            };
        for c in coords {
            fill_axis(c[0], os_grid.1, &mut idx_col, &mut w_col);
            fill_axis(c[1], os_grid.0, &mut idx_row, &mut w_row);
        }

        let mut planner = FftPlanner::new();
        let fft_fwd_cols = planner.plan_fft_forward(os_grid.1);
        let fft_fwd_rows = planner.plan_fft_forward(os_grid.0);
        let fft_inv_cols = planner.plan_fft_inverse(os_grid.1);
        let fft_inv_rows = planner.plan_fft_inverse(os_grid.0);

        Ok(GriddingPlan {
            grid: grid_size,
            os_grid,
            taps,
            n_samples,
            table_step_inv: TABLE_SIZE as f64 / half,
            table,
            deapod_rows,
            deapod_cols,
            idx_col,
            idx_row,
            w_col,
            w_row,
            fft_fwd_cols,
            fft_fwd_rows,
            fft_inv_cols,
            fft_inv_rows,
        })
    }

    pub fn grid_size(&self) -> (usize, usize) {
        self.grid
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Image → non-Cartesian samples.
    pub fn forward(&self, image: &Array2<Complex64>) -> Result<Vec<Complex64>> {
        if image.dim() != self.grid {
            return Err(MrfError::invalid(format!(
                "image shape {:?} does not match plan grid {:?}",
                image.dim(),
                self.grid
            )));
        }
        let (rows, cols) = self.grid;
        let (os_r, os_c) = self.os_grid;
        let mut padded = Array2::<Complex64>::zeros((os_r, os_c));
        for r in 0..rows {
            let wr = wrap_offset(r as i64 - (rows / 2) as i64, os_r);
            for c in 0..cols {
                let wc = wrap_offset(c as i64 - (cols / 2) as i64, os_c);
                padded[[wr, wc]] =
                    image[[r, c]] / (self.deapod_rows[r] * self.deapod_cols[c]);
            }
        }
        self.fft2(&mut padded, true);

        let grid_slice = padded.as_slice().expect("standard layout");
        let taps = self.taps;
        let samples: Vec<Complex64> = (0..self.n_samples)
            .into_par_iter()
            .map(|m| {
                let o = m * taps;
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..taps {
                    let row_base = self.idx_row[o + b] as usize * os_c;
                    let wy = self.w_row[o + b];
                    let mut row_acc = Complex64::new(0.0, 0.0);
                    for a in 0..taps {
                        row_acc += grid_slice[row_base + self.idx_col[o + a] as usize]
                            * self.w_col[o + a];
                    }
                    acc += row_acc * wy;
                }
                acc
            })
            .collect();
        OP_COUNT.fetch_add(1, Ordering::Relaxed);
        Ok(samples)
    }

    /// Samples → image, without density weighting (the exact adjoint of
    /// [`GriddingPlan::forward`]).
    pub fn adjoint(&self, samples: &[Complex64]) -> Result<Array2<Complex64>> {
        self.adjoint_impl(samples, None)
    }

    /// Density-compensated adjoint: the single-pass gridding reconstruction.
    pub fn adjoint_weighted(
        &self,
        samples: &[Complex64],
        dcf: &[f64],
    ) -> Result<Array2<Complex64>> {
        if dcf.len() != samples.len() {
            return Err(MrfError::invalid(format!(
                "dcf length {} does not match samples {}",
                dcf.len(),
                samples.len()
            )));
        }
        self.adjoint_impl(samples, Some(dcf))
    }

    fn adjoint_impl(
        &self,
        samples: &[Complex64],
        dcf: Option<&[f64]>,
    ) -> Result<Array2<Complex64>> {
        if samples.len() != self.n_samples {
            return Err(MrfError::invalid(format!(
                "sample count {} does not match plan ({})",
                samples.len(),
                self.n_samples
            )));
        }
        let (rows, cols) = self.grid;
        let (os_r, os_c) = self.os_grid;
        let mut grid = Array2::<Complex64>::zeros((os_r, os_c));
        {
            // Sequential spread: scatter order is fixed, so results are
            // reproducible for any caller thread count.
            let g = grid.as_slice_mut().expect("standard layout");
            let taps = self.taps;
            for (m, &s) in samples.iter().enumerate() {
                let v = match dcf {
                    Some(w) => s * w[m],
                    None => s,
                };
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let o = m * taps;
                for b in 0..taps {
                    let row_base = self.idx_row[o + b] as usize * os_c;
                    let vy = v * self.w_row[o + b];
                    for a in 0..taps {
                        g[row_base + self.idx_col[o + a] as usize] += vy * self.w_col[o + a];
                    }
                }
            }
        }
        self.fft2(&mut grid, false);

        let mut out = Array2::<Complex64>::zeros((rows, cols));
        for r in 0..rows {
            let wr = wrap_offset(r as i64 - (rows / 2) as i64, os_r);
            for c in 0..cols {
                let wc = wrap_offset(c as i64 - (cols / 2) as i64, os_c);
                out[[r, c]] = grid[[wr, wc]] / (self.deapod_rows[r] * self.deapod_cols[c]);
            }
        }
        OP_COUNT.fetch_add(1, Ordering::Relaxed);
        Ok(out)
    }

    /// Unnormalized 2-D FFT over the oversampled grid; `rustfft::Fft::process`
    /// transforms each contiguous row chunk in place.
    fn fft2(&self, data: &mut Array2<Complex64>, forward: bool) {
        let (row_fft, col_fft) = if forward {
            (&self.fft_fwd_rows, &self.fft_fwd_cols)
        } else {
            (&self.fft_inv_rows, &self.fft_inv_cols)
        };
        col_fft.process(data.as_slice_mut().expect("standard layout"));
        let mut t = data.t().as_standard_layout().into_owned();
        row_fft.process(t.as_slice_mut().expect("standard layout"));
        data.assign(&t.t());
    }

    /// Table-interpolated kernel value at offset `u` oversampled cells from
    /// a sample position. Diagnostic accessor.
    pub fn kernel_value(&self, u: f64) -> f64 {
        let t = u.abs() * self.table_step_inv;
        let i = t as usize;
        if i >= TABLE_SIZE {
            return 0.0;
        }
        let frac = t - i as f64;
        self.table[i] * (1.0 - frac) + self.table[i + 1] * frac
    }
}

fn wrap_offset(offset: i64, n: usize) -> usize {
    offset.rem_euclid(n as i64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{generate_spiral_set, DensityProfile};

    fn spiral_coords(matrix: usize, n_il: usize) -> Vec<[f64; 2]> {
        generate_spiral_set(matrix, n_il, DensityProfile::default_for(matrix), 2.0)
            .unwrap()
            .union_coords()
    }

    #[test]
    fn empty_coords_rejected() {
        assert!(GriddingPlan::new(&[], (32, 32), 2.0, 4).is_err());
    }

    #[test]
    fn out_of_range_coordinate_rejected() {
        assert!(GriddingPlan::new(&[[0.6, 0.0]], (32, 32), 2.0, 4).is_err());
    }

    #[test]
    fn impulse_at_center_gives_flat_magnitude() {
        let coords = spiral_coords(32, 8);
        let plan = GriddingPlan::new(&coords, (32, 32), 2.0, 4).unwrap();
        let mut img = Array2::zeros((32, 32));
        img[[16, 16]] = Complex64::new(1.0, 0.0);
        let s = plan.forward(&img).unwrap();
        for (m, v) in s.iter().enumerate() {
            assert!(
                (v.norm() - 1.0).abs() < 1e-4,
                "sample {m}: |s| = {}",
                v.norm()
            );
        }
    }

    #[test]
    fn zero_image_gives_zero_samples() {
        let coords = spiral_coords(32, 8);
        let plan = GriddingPlan::new(&coords, (32, 32), 2.0, 4).unwrap();
        let s = plan.forward(&Array2::zeros((32, 32))).unwrap();
        assert!(s.iter().all(|v| v.norm() == 0.0));
        let img = plan.adjoint(&vec![Complex64::default(); coords.len()]).unwrap();
        assert!(img.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn planning_twice_gives_identical_transforms() {
        let coords = spiral_coords(32, 4);
        let p1 = GriddingPlan::new(&coords, (32, 32), 2.0, 4).unwrap();
        let p2 = GriddingPlan::new(&coords, (32, 32), 2.0, 4).unwrap();
        let img = Array2::from_shape_fn((32, 32), |(r, c)| {
            Complex64::new((r as f64 * 0.3).sin(), (c as f64 * 0.7).cos())
        });
        let s1 = p1.forward(&img).unwrap();
        let s2 = p2.forward(&img).unwrap();
        for (a, b) in s1.iter().zip(&s2) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let coords = spiral_coords(32, 4);
        let plan = GriddingPlan::new(&coords, (32, 32), 2.0, 4).unwrap();
        assert!(plan.forward(&Array2::zeros((16, 16))).is_err());
        assert!(plan.adjoint(&vec![Complex64::default(); 3]).is_err());
        assert!(plan
            .adjoint_weighted(
                &vec![Complex64::default(); coords.len()],
                &vec![1.0; coords.len() - 1]
            )
            .is_err());
    }

    #[test]
    fn adjoint_is_linear() {
        let coords = spiral_coords(32, 4);
        let plan = GriddingPlan::new(&coords, (32, 32), 2.0, 4).unwrap();
        let n = coords.len();
        let s1: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.13).sin(), (i as f64 * 0.29).cos()))
            .collect();
        let s2: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.53).cos(), (i as f64 * 0.71).sin()))
            .collect();
        let a = Complex64::new(1.7, -0.4);
        let b = Complex64::new(-0.6, 2.2);
        let combo: Vec<Complex64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
        let lhs = plan.adjoint(&combo).unwrap();
        let r1 = plan.adjoint(&s1).unwrap();
        let r2 = plan.adjoint(&s2).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for ((l, x), y) in lhs.iter().zip(r1.iter()).zip(r2.iter()) {
            let rhs = a * x + b * y;
            num += (l - rhs).norm_sqr();
            den += rhs.norm_sqr();
        }
        assert!((num / den).sqrt() < 1e-13);
    }

    #[test]
    fn kernel_table_is_normalized_and_decreasing() {
        let plan = GriddingPlan::new(&[[0.0, 0.0]], (32, 32), 2.0, 4).unwrap();
        assert!((plan.kernel_value(0.0) - 1.0).abs() < 1e-12);
        let mut prev = plan.kernel_value(0.0);
        for i in 1..50 {
            let u = i as f64 * 0.08;
            let v = plan.kernel_value(u);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn op_counter_increments() {
        let coords = spiral_coords(32, 2);
        let plan = GriddingPlan::new(&coords, (32, 32), 2.0, 4).unwrap();
        let before = op_count();
        let img = Array2::zeros((32, 32));
        let s = plan.forward(&img).unwrap();
        let _ = plan.adjoint(&s).unwrap();
        assert!(op_count() >= before + 2);
    }
}
