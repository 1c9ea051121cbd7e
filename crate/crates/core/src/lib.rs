//! Surface-normal aware character mask alignment.
//!
//! Character boxes laid out in an image region are re-shaped to follow the
//! plane given by the region's surface normals, rasterized into a binary
//! character mask, and exported together with the region and normal map as
//! conditioning inputs for a text-image generator. The crate also provides
//! the normal-map codecs, the mean angular error metric over normal maps,
//! rating summaries and paired affine augmentation used around that step.

pub mod augment;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod maskgen;
pub mod metrics;
pub mod normalmap;

pub use error::{Error, Result};
