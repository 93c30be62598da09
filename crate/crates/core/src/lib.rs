//! Near-concentric cavity QED toolkit.
//!
//! A cavity is concentric when the mirror separation reaches twice the mirror
//! radius of curvature. Just below that point the fundamental mode focuses to
//! a micrometer-scale waist, so a centimeter-long resonator of moderate
//! finesse can still reach atom-photon coupling rates beyond the atomic
//! dipole decay rate. This crate covers the quantitative side of designing
//! and characterizing such a system:
//!
//! - [`geometry`]: resonator stability, transverse mode spacing, waist, mode
//!   volume, cavity-length determination, ideal coupling, and sweeps toward
//!   the concentric point,
//! - [`budget`]: mirror transmission/loss bookkeeping, finesse, decay rates,
//!   in-coupling efficiency, and cooperativity,
//! - [`spectra`]: steady-state weak-drive transmission and reflection of the
//!   coupled atom-cavity system, including normal-mode analysis,
//! - [`fit`]: a Levenberg-Marquardt engine plus the Lorentzian, coupled
//!   spectrum, and exponential-lifetime fit procedures,
//! - [`trace`]: seeded stochastic simulation and detection of single-atom
//!   telegraph signals in photon-counting traces,
//! - [`io`], [`config`], [`cli`]: CSV schemas, plain-text configuration, and
//!   the command-line surface tying it together.
//!
//! Internally every frequency is angular (rad/s); values crossing an I/O
//! boundary are ordinary frequencies in MHz, lengths in mm/um/nm, and times
//! in ms, with the unit spelled out in the key or header.

pub mod budget;
// pub mod cli;
// pub mod config;
pub mod constants;
pub mod fit;
pub mod geometry;
// pub mod io;
// pub mod plot;
pub mod solve;
pub mod spectra;
pub mod trace;

pub use budget::LossBudget;
pub use fit::FitResult;
pub use geometry::{AtomModel, CavityGeometry, ModeProperties};
pub use spectra::{CoupledSystem, Spectrum, SpectrumKind};
pub use trace::{PhotonTrace, TraceConfig};
