//! Numerical toolkit for Cartan and Jordan projections, flag metrics,
//! loxodromy certificates, Weyl-chamber volumes and lattice surveys in
//! SL(d, R).

pub mod check;
pub mod error;
pub mod flagmetric;
pub mod lattice;
pub mod linalg;
pub mod loxodromy;
pub mod projections;
pub mod quadrature;
pub mod rootsys;
pub mod sampling;
pub mod survey;
pub mod stats;
pub mod volume;

pub use error::{Result, WccError};
pub use flagmetric::{Flag, TransversePair};
pub use projections::{BasePoint, GroupElement};
pub use rootsys::{CartanVector, RootSystem};
