//! Low-level explicit networks: a ramp approximation of the Heaviside
//! function, sawtooth and squaring networks, approximate multiplication,
//! monomials, polynomial units and box cutoffs.

mod arithmetic;
mod cutoff;
mod polynomial;

pub use arithmetic::{
    heaviside_network, multiplication_network, multiplication_params, sawtooth_network, square_network,
    MultiplicationParams,
};
pub use cutoff::{cutoff_array, cutoff_network, cutoff_params, cutoff_ramp, AxisBox, CutoffParams};
pub use polynomial::{monomial_network, polynomial_unit, PolynomialCoefficients};
