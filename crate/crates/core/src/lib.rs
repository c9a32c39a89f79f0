//! Monte Carlo engine for the invasion of cooperative parasites in host
//! populations structured as random geometric graphs (on `[0,1]^n` or the
//! unit sphere) or complete graphs, together with discrete branching
//! processes with cooperation whose survival probabilities bracket the
//! invasion probability.
//!
//! Geometry, the neighbor index and graphs are generic over the coordinate
//! type ([`Scalar`], implemented for `f32` and `f64`); the aliases below fix
//! the usual `f64` instantiation. The exact oracles are generic over any
//! numeric type and are used with rationals in tests.

pub mod dbpc;
pub mod epidemic;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod index;
pub mod oracles;
pub mod rgg;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use geometry::SpaceSpec;
pub use rng::RandomStream;
pub use scalar::Scalar;

pub type PointSet = geometry::PointSet<f64>;
pub type PointSet32 = geometry::PointSet<f32>;
pub type GridIndex = index::GridIndex<f64>;
pub type GridIndex32 = index::GridIndex<f32>;
pub type GeometricGraph = rgg::GeometricGraph<f64>;
pub type GeometricGraph32 = rgg::GeometricGraph<f32>;

/// Exact probabilities used by the enumeration oracles.
pub type Probability = num_rational::Ratio<u64>;
