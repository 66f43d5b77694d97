//! Shape framework: typed shapes, a shape registry, spatial operations and deterministic
//! tessellation into triangle meshes.
//!
//! Shapes are immutable values. Derived solids (extrusions, lofts, sweeps) keep their
//! inputs and are only turned into triangles by [`tessellate`], which is a pure function
//! of the shape and the curve resolution.

mod export;
mod ops;
mod registry;
mod shape;
mod tessellate;
mod transform;
mod vec3;

pub use export::{mesh_digest, meshes_to_json, to_json, to_obj, to_obj_groups};
pub use ops::{distribute_random, loft, loft_rings, region_contains, resample_closed, sweep};
pub use registry::{RegistryCommand, RegistryOutput, ShapeId, ShapeRegistry};
pub use shape::{Shape, MAX_GROUP_DEPTH};
pub use tessellate::{sample_curve, tessellate, TriMesh};
pub use transform::{transform, transform_by, AxisAngle, Similarity};
pub use vec3::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("coordinate is not finite")]
    NonFinite,
    #[error("need at least {required} distinct vertices, found {found}")]
    TooFewVertices { required: usize, found: usize },
    #[error("ellipse radii must be positive, got {major} and {minor}")]
    InvalidRadius { major: f64, minor: f64 },
    #[error("ellipse normal and major axis must be orthonormal")]
    BadEllipseFrame,
    #[error("profile is not planar (deviation {deviation:e} >= tolerance {tolerance:e})")]
    NonPlanarProfile { deviation: f64, tolerance: f64 },
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("profile mismatch: {0}")]
    ProfileMismatch(String),
    #[error("loft needs at least 2 profiles, got {0}")]
    TooFewProfiles(usize),
    #[error("degenerate path: {0}")]
    DegeneratePath(String),
    #[error("distribution region has zero area")]
    RegionDegenerate,
    #[error("count must be at least 1, got {0}")]
    InvalidCount(usize),
    #[error("group nesting exceeds depth {0}")]
    NestingTooDeep(usize),
    #[error("curve resolution must be at least 3, got {0}")]
    InvalidResolution(u32),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("unknown shape id {0}")]
    UnknownShapeId(ShapeId),
}
