//! Non-learned computational core of a multi-camera birds-eye-view (BEV)
//! perception and prediction pipeline.
//!
//! The crate covers the full geometric and metric path from image-plane
//! features to evaluated predictions:
//!
//! - [`grid`]: BEV raster definitions, the bilinear task grid sampler,
//!   BEV-side augmentation transforms, and the on-disk grid format.
//! - [`geometry`]: camera model, frustum generation, categorical-depth
//!   lifting, and scatter-reduce pillar pooling.
//! - [`temporal`]: ego-motion alignment of past BEV grids into the present
//!   reference frame.
//! - [`future`]: per-cell latent sampling, backward flow warping, and the
//!   iterative T-step future-state rollout.
//! - [`eval`]: segmentation IoU, video panoptic quality, center-distance
//!   detection matching, mAP, true-positive error metrics, NDS, and BEV NMS.
//! - [`synth`]: deterministic synthetic scenes providing ground truth for
//!   every other module.
//! - [`oracle`]: brute-force reference implementations the test suites
//!   compare against.
//!
//! All operations are pure functions over immutable inputs and are
//! deterministic given a seed; there is no global state.

pub mod error;
pub mod eval;
pub mod future;
pub mod geometry;
pub mod grid;
pub mod oracle;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
