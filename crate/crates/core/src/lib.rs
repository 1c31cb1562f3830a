//! Numerical toolkit for projectively equivalent metrics: BM-structures,
//! partner metrics, the commuting integrals of the geodesic flow, Levi-Civita
//! normal forms and the two-dimensional classification of quadratic integrals.

pub mod error;
pub mod expr;
pub mod field;
pub mod geodesic;
pub mod integrable;
pub mod jet;
pub mod levi_civita;
pub mod linalg;
pub mod metric;
pub mod projective;
pub mod sampling;
pub mod surface2d;
pub mod tolerances;

pub use error::{GeomError, Result};
pub use jet::{Jet, Order};
pub use linalg::SqMat;
pub use tolerances::Tolerances;
