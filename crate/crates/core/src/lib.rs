//! Zorich maps in dimension `d >= 3`, their inverse branches, and
//! tower-safe evaluation of the hairs of their Julia sets.
//!
//! ```
//! use zorich::{Calibration, ExternalAddress, KernelSpec};
//!
//! let cal = Calibration::calibrate(KernelSpec::linf(3).unwrap(), 0.5, 32).unwrap();
//! let hp = zorich::hair::hair_point(&cal, &ExternalAddress::zero(2), 30, 1.0).unwrap();
//! assert!(hp.point[2] > cal.m_upper);
//! ```

pub mod address;
pub mod branch;
pub mod dynamics;
pub mod error;
pub mod hair;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod map;
pub mod sampling;
pub mod tower;
pub mod verify;

pub use address::{Entry, ExternalAddress, Tail};
pub use error::{Error, Result};
pub use kernel::{KernelKind, KernelSpec};
pub use lattice::LatticeIndex;
pub use map::Calibration;
