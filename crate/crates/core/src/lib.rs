//! Post-detection rescoring by inner-scene similarity.
//!
//! Each confident detection (the anchor) looks for visually similar patches in the
//! same image (its supporters). Supporter base-scores, together with learned
//! distance-dependent covariances, give a linear MMSE estimate of the anchor's
//! identity that replaces its base-score.

pub mod chanmap;
mod error;
pub mod eval;
pub mod features;
pub mod formats;
pub mod geom;
pub mod image;
pub mod model;
pub mod rescore;
pub mod search;
pub mod synth;

pub use error::{Error, Result};
pub use geom::BBox;
pub use image::{load_image, Image};
