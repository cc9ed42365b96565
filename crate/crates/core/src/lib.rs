//! Discrete label-field optimization on 4-connected grids.
//!
//! The crate covers the whole path from raw images to a labeled field:
//! matching costs ([`dsi`]), the pairwise energy ([`grid_model`]), fast
//! min-plus messages ([`minplus`]), exact chain optimization
//! ([`scanline`]), the grid solver ([`edp`]) and brute-force references
//! ([`oracle`]) used to check all of them.

pub mod bench;
pub mod dsi;
pub mod edp;
pub mod error;
pub mod golden;
pub mod grid_model;
pub mod media_io;
pub mod minplus;
pub mod oracle;
pub mod pipeline;
pub mod scanline;
pub mod scenes;
pub mod verify;

pub use error::{Error, Result};
pub use grid_model::{CostVolume, DisparityField, EnergyBreakdown, LabelSpace, PixelGrid, Prior, SmoothnessModel};
pub use minplus::Operator;
