//! Non-Markovian dynamics of two-level giant atoms coupled at several points
//! to a semi-infinite waveguide that ends in a mirror.
//!
//! The crate offers three independent routes to the atomic amplitude and
//! cross-checks them against each other:
//!
//! * [`dde`]: direct integration of the delay differential equations on a grid
//!   commensurate with the inter-point delay, including stochastic dephasing
//!   ensembles and the multi-atom system;
//! * [`spectral`]: the characteristic function, its complex zeros and the
//!   conditions under which purely imaginary (bound) zeros exist;
//! * [`analytic`]: closed-form long-time amplitudes and the residue sum over
//!   a verified pole set.
//!
//! [`field`] reconstructs the real-space photon intensity from a trajectory.
//!
//! Units: time in units of the delay `tau0` between neighbouring coupling
//! points, frequencies as `omega * tau0`, and loss or dephasing rates as ratios
//! to the waveguide emission rate `Gamma`.
//!
//! Data-parallel loops (ensembles, pole seeding, field columns, sweeps) run on
//! rayon when the `parallel` feature is enabled (default). See [`Exec`].

pub mod analytic;
pub mod dde;
mod error;
mod exec;
pub mod field;
pub mod model;
pub mod presets;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Exec;
pub use num_complex::Complex64;

pub use model::{
    build_kernel, build_multi_kernel, AtomSpec, Channel, CouplingMode, DelayKernel, KernelEntry,
    MultiAtomConfig, MultiKernel, SystemConfig,
};
