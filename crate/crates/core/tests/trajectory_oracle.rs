//! Spiral integration checked against a fine-step integrator, and analytic
//! density weights checked against a rasterized Voronoi-area oracle.

use mrf_core::trajectory::{generate_spiral_set, DensityProfile, SpiralSet};

/// Plain Euler integration of dr/dθ = n·p(r)/2π at 1024 substeps per
/// sample interval: an independent, much finer route to the same curve.
fn fine_step_oracle(
    n_interleaves: usize,
    profile: &DensityProfile,
    theta_step: f64,
) -> (usize, Vec<f64>) {
    let scale = n_interleaves as f64 / (2.0 * std::f64::consts::PI);
    let substeps = 1024;
    let h = theta_step / substeps as f64;
    let mut r = 0.0f64;
    let mut radii = vec![0.0];
    loop {
        for _ in 0..substeps {
            r += h * scale * profile.pitch(r.min(0.5));
        }
        if r >= 0.5 {
            break;
        }
        radii.push(r);
    }
    (radii.len(), radii)
}

#[test]
fn sample_count_matches_fine_integration_golden() {
    let profile = DensityProfile::default_for(64);
    let set = generate_spiral_set(64, 48, profile, 2.0).unwrap();
    let (oracle_count, oracle_radii) = fine_step_oracle(48, &profile, set.theta_step());

    // frozen golden for matrix 64, 48 interleaves, default profile
    assert_eq!(set.readout_len(), 372);
    assert!(
        (set.readout_len() as i64 - oracle_count as i64).abs() <= 1,
        "integrator count {} vs oracle {oracle_count}",
        set.readout_len()
    );
    let n_common = set.readout_len().min(oracle_count);
    for m in 0..n_common {
        let s = set.base()[m];
        let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
        assert!(
            (r - oracle_radii[m]).abs() < 1e-5,
            "radius at sample {m}: {r} vs oracle {}",
            oracle_radii[m]
        );
    }
}

/// Deterministic Voronoi areas by rasterization: each probe pixel of a fine
/// grid is assigned to its nearest union sample; a cell's area is its pixel
/// count times the pixel area.
fn rasterized_voronoi_areas(set: &SpiralSet, grid: usize) -> Vec<f64> {
    let coords = set.union_coords();
    let max_r = set
        .base()
        .iter()
        .map(|s| (s[0] * s[0] + s[1] * s[1]).sqrt())
        .fold(0.0f64, f64::max);
    let outer_pitch = set.profile().pitch(max_r);
    let clip_r = max_r + outer_pitch / 2.0;

    // bucket index over [-0.5, 0.5]²
    let bucket = 0.04f64;
    let dim = (1.0 / bucket).ceil() as usize + 3;
    let mut buckets = vec![Vec::new(); dim * dim];
    let bidx = |x: f64, y: f64| -> (isize, isize) {
        (
            ((x + 0.52) / bucket) as isize,
            ((y + 0.52) / bucket) as isize,
        )
    };
    for (i, &[x, y]) in coords.iter().enumerate() {
        let (bx, by) = bidx(x, y);
        buckets[by as usize * dim + bx as usize].push((i as u32, x, y));
    }

    let px = 1.0 / grid as f64;
    let px_area = px * px;
    let mut areas = vec![0.0f64; coords.len()];
    for pr in 0..grid {
        let y = (pr as f64 + 0.5) * px - 0.5;
        for pc in 0..grid {
            let x = (pc as f64 + 0.5) * px - 0.5;
            if (x * x + y * y).sqrt() > clip_r {
                continue;
            }
            let (bx, by) = bidx(x, y);
            let mut best = u32::MAX;
            let mut best_d = f64::INFINITY;
            let mut ring = 0isize;
            loop {
                // buckets at Chebyshev distance exactly `ring`
                for dy in -ring..=ring {
                    for dx in -ring..=ring {
                        if dx.abs().max(dy.abs()) != ring {
                            continue;
                        }
                        let (ux, uy) = (bx + dx, by + dy);
                        if ux < 0 || uy < 0 || ux as usize >= dim || uy as usize >= dim {
                            continue;
                        }
                        for &(i, sx, sy) in &buckets[uy as usize * dim + ux as usize] {
                            let d = (sx - x).powi(2) + (sy - y).powi(2);
                            if d < best_d {
                                best_d = d;
                                best = i;
                            }
                        }
                    }
                }
                // any sample in an unchecked bucket sits at least ring·bucket away
                if best != u32::MAX && best_d.sqrt() <= ring as f64 * bucket {
                    break;
                }
                ring += 1;
                if ring as usize > dim {
                    break;
                }
            }
            if best != u32::MAX {
                areas[best as usize] += px_area;
            }
        }
    }
    // first-ring check includes ring 0 cell
    areas
}

#[test]
fn uniform_density_dcf_matches_voronoi_areas_mid_band() {
    let pitch = 1.0 / 16.0;
    let set = generate_spiral_set(16, 8, DensityProfile::uniform(pitch), 2.0).unwrap();
    let areas = rasterized_voronoi_areas(&set, 2048);
    let len = set.readout_len();

    // cells are shared across interleaves up to rotation; average them
    let mut checked = 0;
    for m in 0..len {
        let s = set.base()[m];
        let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
        if !(0.15..=0.35).contains(&r) {
            continue;
        }
        let mut area = 0.0;
        for j in 0..8 {
            area += areas[j * len + m];
        }
        area /= 8.0;
        let dcf = set.dcf()[m];
        let rel = (dcf - area).abs() / area;
        assert!(
            rel <= 0.05,
            "sample {m} (r={r:.3}): dcf {dcf:.6e} vs voronoi {area:.6e} (rel {rel:.3})"
        );
        checked += 1;
    }
    assert!(checked > 10, "too few mid-band samples checked ({checked})");

    // proportionality to |k| for the uniform profile
    for m in 1..len {
        let s = set.base()[m];
        let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
        let expect = pitch * r * set.theta_step();
        assert!((set.dcf()[m] - expect).abs() / expect < 1e-9);
    }
}

#[test]
fn doubling_readout_density_halves_dcf() {
    let pitch = 1.0 / 16.0;
    let base = generate_spiral_set(16, 8, DensityProfile::uniform(pitch), 2.0).unwrap();
    let dense = generate_spiral_set(16, 8, DensityProfile::uniform(pitch), 4.0).unwrap();
    assert!((dense.theta_step() - base.theta_step() / 2.0).abs() < 1e-15);

    // analytic: same radius appears at every 2nd dense sample; weight halves
    let mut compared = 0;
    for m in 1..base.readout_len() {
        if 2 * m >= dense.readout_len() {
            break;
        }
        let rb = {
            let s = base.base()[m];
            (s[0] * s[0] + s[1] * s[1]).sqrt()
        };
        if !(0.1..=0.4).contains(&rb) {
            continue;
        }
        let ratio = dense.dcf()[2 * m] / base.dcf()[m];
        assert!(
            (ratio - 0.5).abs() < 0.05 * 0.5,
            "sample {m}: dcf ratio {ratio} not ~0.5"
        );
        compared += 1;
    }
    assert!(compared > 10);

    // and the denser set still matches its own Voronoi areas mid-band
    let areas = rasterized_voronoi_areas(&dense, 2048);
    let len = dense.readout_len();
    let mut checked = 0;
    for m in 0..len {
        let s = dense.base()[m];
        let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
        if !(0.15..=0.35).contains(&r) {
            continue;
        }
        let mut area = 0.0;
        for j in 0..8 {
            area += areas[j * len + m];
        }
        area /= 8.0;
        let rel = (dense.dcf()[m] - area).abs() / area;
        assert!(rel <= 0.05, "dense sample {m}: rel {rel:.3}");
        checked += 1;
    }
    assert!(checked > 20);
}
