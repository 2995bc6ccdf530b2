//! The factored simulator against the per-frame first-principles pipeline:
//! both are compositions of the same linear operators, so frames must agree
//! to float-reordering accuracy.

use mrf_core::phantom::{make_three_tissue_phantom, synthesize_phase_map, DEFAULT_PHASE_RANGE};
use mrf_core::sequence::{default_fisp_schedule, tissue_signals, EpgOptions};
use mrf_core::simulator::{linear_ordering, simulate_conventional, simulate_fast};
use mrf_core::spatial_response::{compute_spatial_responses, DcfMode, ReconSettings};
use mrf_core::trajectory::{generate_spiral_set, DensityProfile};
use mrf_core::util::rel_l2_grid;

fn check_equivalence(with_phase: bool, dcf_mode: DcfMode) {
    let matrix = 32;
    let n_il = 6;
    let n_frames = 16;
    let phantom = make_three_tissue_phantom((matrix, matrix)).unwrap();
    let spirals =
        generate_spiral_set(matrix, n_il, DensityProfile::default_for(matrix), 2.0).unwrap();
    let phase = if with_phase {
        Some(synthesize_phase_map((matrix, matrix), [1.0, 0.0], DEFAULT_PHASE_RANGE).unwrap())
    } else {
        None
    };
    let settings = ReconSettings {
        dcf_mode,
        ..Default::default()
    };
    let schedule = default_fisp_schedule(n_frames).unwrap();
    let epg = EpgOptions::default();

    let srf = compute_spatial_responses(&phantom, &spirals, phase.as_ref(), &settings).unwrap();
    let signals = tissue_signals(&phantom, &schedule, &epg).unwrap();
    let fast = simulate_fast(&srf, &signals, &linear_ordering(n_il)).unwrap();
    let conv = simulate_conventional(
        &phantom,
        &schedule,
        &spirals,
        phase.as_ref(),
        &settings,
        &epg,
        &linear_ordering(n_il),
    )
    .unwrap();

    assert_eq!(fast.n_frames(), conv.n_frames());
    for t in 0..n_frames {
        let rel = rel_l2_grid(fast.frame(t), conv.frame(t));
        assert!(
            rel < 1e-6,
            "frame {t} (phase={with_phase}, {dcf_mode:?}): rel L2 {rel:.3e}"
        );
        assert_eq!(fast.interleaf_order()[t], conv.interleaf_order()[t]);
    }
}

#[test]
fn fast_equals_conventional_without_phase() {
    check_equivalence(false, DcfMode::Scaled);
}

#[test]
fn fast_equals_conventional_with_phase() {
    check_equivalence(true, DcfMode::Scaled);
}

#[test]
fn fast_equals_conventional_in_union_dcf_mode() {
    check_equivalence(false, DcfMode::Union);
}
