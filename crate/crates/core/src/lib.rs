//! L² ball discrepancy of weighted point sets against densities on the flat
//! torus `T^d`, `d ∈ {1, 2, 3}`.

pub mod bessel;
pub mod density;
pub mod engine;
pub mod error;
pub mod jitter;
pub mod lab;
pub mod quadrature;
pub mod spectral;
pub mod sum;
pub mod torus;

pub use error::{Error, Result};
pub use torus::{
    cube_partition, grid_points, sample_jitter, weight_norm, wrap, wrap_distance, BallWindow,
    PartitionCells, TorusPoint, WeightedPointSet,
};
