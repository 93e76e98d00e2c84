//! Semiclassical and Gaussian-fluctuation model of an electrically tunable
//! three-color nonlinear photonic device.
//!
//! The system couples three driven cavity modes to three lossy antenna
//! modes; a four-wave-mixing nonlinearity converts two pump photons into a
//! signal/idler pair, and a two-level emitter hybridized with the idler
//! antenna mode carves a sharp interference feature into the conversion
//! response. Sweeping the emitter frequency (or the gate voltage that
//! controls it) moves the device between strong suppression and strong
//! enhancement of the generated idler.
//!
//! The crate provides, in dependency order:
//!
//! * [`params`]: validated configuration with frequency-unit handling and
//!   the voltage-to-frequency tuning model.
//! * [`steady`]: the coupled semiclassical fixed point via damped Newton
//!   with parameter continuation, plus the closed-form idler response and
//!   enhancement factor.
//! * [`fluctuations`]: linearized drift/diffusion matrices around the
//!   fixed point and the stationary covariance from the algebraic Lyapunov
//!   equation.
//! * [`measures`]: symplectic spectra, logarithmic negativity,
//!   entanglement potential, and the input-output map to the cavity
//!   output modes.
//! * [`sweep`]: deterministic parameter sweeps, default calibration, and
//!   CSV/JSON emission.
//!
//! Quadrature convention: `q = (a + a^dag)/sqrt(2)`, `p = -i(a - a^dag)/sqrt(2)`,
//! vacuum covariance `I/2`. Log-negativity is computed in nats; base-2
//! display is a presentation option.
//!
//! ```
//! use fanocomb::params::SystemParams;
//! use fanocomb::steady::solve_steady_state;
//!
//! let p = SystemParams::calibrated();
//! let s = solve_steady_state(&p, None).unwrap();
//! assert!(s.residual_norm <= 1e-12);
//! ```

pub mod fluctuations;
pub mod measures;
pub mod params;
pub mod steady;
pub mod sweep;

pub use fluctuations::{drift_diffusion, solve_lyapunov, CovarianceMatrix, DriftDiffusion};
pub use measures::{entanglement_potential, logneg, output_covariance, symplectic_eigenvalues};
pub use params::{make_params, SystemParams};
pub use steady::{enhancement_factor, solve_steady_state, SteadyState};
pub use sweep::{run_sweep, SweepRecord, SweepSpec};

// The guide chapters double as doc-tests, so every code block in the book
// is compiled and run by `cargo test` and cannot drift from the API.
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[doc = include_str!("../../../book/src/configuration.md")]
mod book_configuration {}
#[doc = include_str!("../../../book/src/steady-state.md")]
mod book_steady_state {}
#[doc = include_str!("../../../book/src/fluctuations.md")]
mod book_fluctuations {}
#[doc = include_str!("../../../book/src/measures.md")]
mod book_measures {}
#[doc = include_str!("../../../book/src/sweeps.md")]
mod book_sweeps {}
