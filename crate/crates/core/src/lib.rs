//! Locally refined B-spline spaces with structured, nestedness-free refinement.

pub mod bspline;
pub mod diagnostics;
pub mod dyadic;
pub mod error;
pub mod io;
pub mod mesh;
pub mod n2s;
pub mod poisson;
pub mod qi;
pub mod space;
pub mod svg;

pub use bspline::{FunctionKey, TensorBSpline};
pub use dyadic::Dyadic;
pub use error::{Error, Result};
pub use mesh::{Direction, Element, Mesh, Meshline, Rect, Split};
pub use space::LRSpace;
