//! Height zeta functions of integral points on equivariant compactifications
//! of vector groups over the rationals.
//!
//! The crate is organised bottom up:
//!
//! * [`localfield`] handles absolute values, characters, Haar measures and
//!   Tate integrals on the real, complex and p-adic fields.
//! * [`oscillatory`] evaluates the integrals `∫ |x|^{s-1} ψ(a x^d) Φ(x) dx`,
//!   exactly at finite places and by quadrature at infinite ones.
//! * [`boundary`] and [`catalog`] describe the boundary divisors and the
//!   explicit models used throughout.
//! * [`density`] computes local Fourier transforms of heights, Euler products
//!   and the leading constant of the counting function.
//! * [`census`] counts integral points of bounded height and fits asymptotics.

pub mod arith;
pub mod boundary;
pub mod catalog;
pub mod census;
pub mod cyclotomic;
pub mod density;
pub mod error;
pub mod localfield;
pub mod oscillatory;
pub mod quad;

pub use boundary::{CharacterStratum, ClemensComplex, DivisorScheme};
pub use catalog::{CompactificationModel, Metric};
pub use census::{AsymptoticFit, CountTable};
pub use density::{EulerProductValue, LocalDensity, ThetaReport};
pub use error::{Error, Result};
pub use localfield::{BumpFunction, PadicContext, Place, Rational, StepFunction, TestFunction};
pub use num_complex::Complex64;
pub use oscillatory::{DecayReport, Exactness, OscillatoryResult};
