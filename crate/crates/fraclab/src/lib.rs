//! Numerical laboratory for fractional integral operators on sampled grids.
//!
//! The crate evaluates Riesz potentials, rough homogeneous singular
//! integrals, dyadic and sparse fractional operators, and several maximal
//! operators on functions sampled over uniform grids in dimension two and
//! three. Alongside the operators it ships a battery of checks that measure
//! pointwise domination constants, weighted norm inequalities, and the exact
//! combinatorial certificates behind sparse cube families.
//!
//! Modules are layered bottom-up:
//!
//! * [`numeric`]: deterministic summation, Gauss rules, bisection.
//! * [`grid`]: grid functions, the sampled corpus, serialization.
//! * [`dyadic`]: shifted dyadic lattices with exact rational containment.
//! * [`norms`]: Lorentz and Orlicz block averages on weighted samples.
//! * [`sphere`]: sphere meshes, homogeneous symbols, sphere norms.
//! * [`potentials`]: Riesz potentials and dyadic/fractional maximal operators.
//! * [`sparse`]: stopping-time sparse families with verifiable certificates.
//! * [`rough`]: annular quadrature for rough operators and maximal variants.
//! * [`weights`]: power weights, Muckenhoupt-type constants, weighted norms.
//! * [`checks`]: the check registry, runners, and report serialization.

pub mod checks;
pub mod dyadic;
pub mod grid;
pub mod norms;
pub mod numeric;
pub mod potentials;
pub mod rough;
pub mod sparse;
pub mod sphere;
pub mod weights;
