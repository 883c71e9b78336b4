//! Model Riemannian manifolds with closed-form geodesics.

mod disc;
mod manifold;
mod mesh;
mod path;

pub use disc::{DiscHomotopy, DiscShape};
pub use manifold::{from_polar, polar_angles, ChartSpec, FrameSample, Manifold, Point, Tangent, TriangleArea};
pub use mesh::SimplicialComplex;
pub use path::{PathCurve, Segment};
