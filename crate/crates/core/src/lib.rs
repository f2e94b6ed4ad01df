//! Multi-directional print planning: decomposes a closed triangle mesh into
//! an ordered sequence of parts that can each be printed along their own
//! direction with little or no support, and grows tree supports for what
//! remains.
//!
//! ```
//! use mdp_core::{fixtures, search::{plan, SearchConfig}, support::{progressive_projection, SupportConfig}};
//!
//! let mesh = fixtures::snowman(1.0, 16);
//! let config = SearchConfig { sampler: mdp_core::candidates::SamplerConfig { normal_count: 40, ..Default::default() }, ..Default::default() };
//! let plan = plan(&mesh, &config)?;
//! let supports = progressive_projection(&plan, &config.self_support, &SupportConfig::default())?;
//! assert!(plan.j_global <= mdp_core::manufacturability::risk(&mesh, &config.platform, &config.self_support));
//! # let _ = supports;
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod candidates;
pub mod fixtures;
pub mod manufacturability;
pub mod mesh;
pub mod search;
pub mod support;

pub use mesh::{Aabb, HalfSpaceCell, MeshError, Plane, Side, TriMesh};
