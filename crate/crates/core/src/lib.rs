//! Slow-manifold reductions of mass-action reaction networks.

pub mod catalogue;
pub mod crn;
pub mod dynamics;
pub mod epsilon;
pub mod error;
pub mod field;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod poly;
pub mod reduction;
pub mod scalar;

pub use error::{Error, Result, Stage};
pub use scalar::{Real, Ring};

pub type Rational = poly::Rational;
pub type ExactPoly = poly::Poly<Rational>;
pub type Jet4 = jet::Jet<f64, 4>;
