//! Fast simulation of undersampled MR fingerprinting image series.
//!
//! The undersampled frame at time `t` factorizes into a sum over tissues of a
//! precomputed complex spatial response (the aliased reconstruction of that
//! tissue's mask under one spiral interleaf) times the tissue's transient
//! signal value. Precomputing the spatial responses moves every non-uniform
//! FFT out of the per-sequence loop, which is what makes sequence optimization
//! with a direct quantitative-map-error cost affordable.
//!
//! Modules follow the pipeline order: [`phantom`] and [`trajectory`] define
//! the static scene, [`nufft`] provides the gridding transforms, and
//! [`spatial_response`] bakes them into reusable response sets. [`sequence`]
//! simulates signal evolutions and dictionaries, [`simulator`] synthesizes
//! image series (fast, conventional, Gaussian-noise), [`matching`] recovers
//! quantitative maps, [`cost`] scores them, and [`optimizer`] searches
//! schedule space by simulated annealing. [`tensor`] and [`config`] hold the
//! portable file format and run configuration.

pub mod config;
pub mod cost;
pub mod error;
pub mod matching;
pub mod nufft;
pub mod optimizer;
pub mod phantom;
pub mod sequence;
pub mod simulator;
pub mod spatial_response;
pub mod tensor;
pub mod trajectory;
pub mod util;

pub use error::{MrfError, Result};
