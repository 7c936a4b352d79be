//! Virtual-memory streaming and level of detail for 3D Gaussian splatting.
//!
//! The offline half of the crate turns a trained splat cloud into a paged
//! scene: [`proxy_mesh`] extracts a coarse surface, [`paging`] groups
//! Gaussians into fixed-size pages attached to that surface and links pages
//! whose Gaussians overlap, and [`lod_gen`] builds per-page detail levels.
//! [`scene_io`] stores the result in a file whose pages can be copied
//! without decoding.
//!
//! The runtime half streams pages on demand: [`vm_runtime`] renders page IDs
//! of the proxy mesh, reduces them to a required-page list, and maintains an
//! LRU page table under a per-frame copy budget. [`splat_render`] sorts and
//! composites resident Gaussians. [`harness`] drives both over camera paths
//! and collects statistics and image metrics.

pub mod gaussian;
pub mod harness;
pub mod lod_gen;
pub mod paging;
pub mod proxy_mesh;
pub mod scene_io;
pub mod splat_render;
pub mod vm_runtime;

pub use gaussian::Gaussian;
