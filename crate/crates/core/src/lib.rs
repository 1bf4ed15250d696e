//! Cross-view attention warping for consistent multi-view image editing.
//!
//! An edit is made once on a source view. Its attention maps are carried
//! to every other view through a depth-driven backward warp, masked where
//! the source has no information, and blended into the target's own
//! attention on a decaying schedule. Geometry comes either from precomputed
//! depth maps or from a set of surfel splats that is filtered per view pair
//! and rasterised to depth.
//!
//! Module map:
//! - [`geometry`]: cameras, depth maps, projection, warp fields
//! - [`warp`]: feature maps, sampling, attention bundles
//! - [`splat`]: splat tables, normal filter, depth rendering
//! - [`blend`]: masks and the blend schedule
//! - [`losses`]: photometric and geometric regularisers
//! - [`pipeline`]: staged multi-view editing driver
//! - [`editors`]: built-in editor plug-ins
//! - [`synth`]: analytic test scenes
//! - [`tensor_io`]: the `.fwt` tensor file format

pub mod blend;
pub mod editors;
pub mod error;
pub mod geometry;
pub mod losses;
mod par;
pub mod pipeline;
pub mod rng;
pub mod splat;
pub mod synth;
pub mod tensor_io;
pub mod warp;

pub use blend::{alpha_at, blend_masked, BlendSchedule, Mask};
pub use error::{Error, FormatError, Result};
pub use geometry::{
    compute_warp_field, project, unproject, Camera, CameraExtrinsics, CameraIntrinsics, DepthMap,
    Projection, WarpField,
};
pub use splat::{filter_splats, render_depth, FilterConfig, Splat, SplatSet};
pub use tensor_io::Tensor;
pub use warp::{
    resample_warp_field, warp_bundle, warp_feature_map, AttentionBundle, AttentionLayer,
    FeatureMap, Image, Sampling,
};
