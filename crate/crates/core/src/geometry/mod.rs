//! Fine triangulation, embedded fracture mesh and coarse partition.

pub mod coarse;
pub mod fractures;
pub mod mesh;

pub use coarse::{CoarseGrid, Continuum, Rect};
pub use fractures::{embed_fractures, embed_networks, FractureSet, Polyline, Segment, SegmentLink};
pub use mesh::{BoundaryTags, Face, FineMesh, Point};
