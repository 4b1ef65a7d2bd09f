//! Gamma-family functions, the confluent hypergeometric series and the
//! quadrature rules used for the high-SNR integrals.

mod gamma;
mod hypergeometric;
mod quadrature;

pub use gamma::{gamma_fn, ln_gamma, sin_pi, upper_incomplete_gamma};
pub use hypergeometric::confluent_1f1;
pub use quadrature::{gauss_laguerre, gauss_legendre, integrate_adaptive, QuadratureRule};
