//! Occlusion-aware spherical-harmonics transport baking, relighting and
//! inverse lighting.

pub mod baker;
pub mod error;
pub mod illum;
pub mod inverse;
pub mod maps;
pub mod metrics;
pub mod relight;
pub mod sampling;
pub mod scene;
pub mod sh;

pub use error::{Error, Result};
pub use maps::{apply_mask, read_map, write_map, MapImage, MapKind, ShLight};
pub use sh::{ShBasis9, ShVector9};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
