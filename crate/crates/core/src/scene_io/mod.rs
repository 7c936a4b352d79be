//! Input decoding and the packed streamable scene format.

mod format;
mod ply;

pub use format::{
    read_scene, write_scene, Bounds, MappedScene, SceneFile, SceneFormatError, SceneLayout, MAGIC,
    VERSION,
};
pub use ply::{encode_ply, load_input_scene, parse_ply, property_names, write_ply, PlyError, PLY_PROPERTIES};
