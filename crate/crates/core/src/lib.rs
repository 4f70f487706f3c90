//! Numerical laboratory for the thin-film equation in self-similar
//! variables,
//!
//! ```text
//! v_t = (x v - v v_xxx)_x ,
//! ```
//!
//! viewed as the Wasserstein gradient flow of
//! `E(v) = (1/2) int (v_x^2 + x^2 v) dx`. The crate provides
//!
//! * densities on grids and in quantile (Lagrangian) form, together with
//!   the closed-form Smyth-Hill equilibrium ([`density`]);
//! * the energy, entropy and related functionals, plus the weighted norms
//!   used to measure convergence ([`functionals`]);
//! * one-dimensional optimal transport ([`transport`]);
//! * a minimizing-movement scheme in quantile variables ([`jko`]);
//! * numerical checks of the functional inequalities behind the
//!   convergence theory ([`inequalities`]);
//! * exponential rate fitting ([`rates`]);
//! * an independent finite-difference solver used as an oracle ([`fdm`]).
//!
//! ```
//! use thinfilm::{smyth_hill, Functionals};
//! let sh = smyth_hill(2.0 / 45.0).unwrap();
//! assert!((sh.support_radius() - 1.0).abs() < 1e-12);
//! let q = sh.quantiles(400).unwrap();
//! assert!((q.energy() - sh.energy()).abs() < 1e-3 * sh.energy());
//! ```

pub mod density;
pub mod error;
pub mod fdm;
pub mod functionals;
pub mod inequalities;
pub mod io;
pub mod jko;
pub mod numerics;
pub mod rates;
pub mod transport;

pub use density::{
    clock, grid_to_quantile, quantile_to_grid, reconstruct, rescale_u_to_v, rescale_v_to_u, smyth_hill, GridDensity,
    QuantileDensity, Reconstruction, SmythHill,
};
pub use error::{Error, Result};
pub use functionals::{record, Dissipation, FunctionalRecord, Functionals, RecordOptions, Recordable};
pub use jko::{JkoConfig, JkoTrajectory, RunConfig};
pub use transport::{displacement_interpolate, transport_plan, w2, w2_sq, TransportPlan};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/densities.md")]
    mod densities {}
    #[doc = include_str!("../../../book/src/functionals.md")]
    mod functionals {}
    #[doc = include_str!("../../../book/src/transport.md")]
    mod transport {}
    #[doc = include_str!("../../../book/src/jko.md")]
    mod jko {}
    #[doc = include_str!("../../../book/src/inequalities.md")]
    mod inequalities {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/fdm.md")]
    mod fdm {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
