//! Simulation of interferometric imaging with undetected photons.
//!
//! Two nonlinear crystals are pumped coherently. The idler of the first
//! crystal passes an object on its way through the second crystal, where it
//! is aligned with that crystal's idler; the idlers are never detected. The
//! two signal beams are superposed on a camera, and the object appears in
//! the interference term of the signal counting rate.
//!
//! * [`mode_space`] maps camera pixels to signal, idler and object-plane modes.
//! * [`optics`] holds the angle/position maps and the object model.
//! * [`imaging`] evaluates counting rates and builds calibrated images.
//! * [`fock`] recomputes the same rates by explicit Fock-state algebra.
//! * [`magnification`] predicts and measures the image scale.

pub mod error;
pub mod fock;
pub mod imaging;
pub mod magnification;
pub mod mode_space;
pub mod optics;

pub use error::{Error, Result};
pub use imaging::{CameraImage, PhaseCalibration};
pub use mode_space::{Camera, Envelope, ModeGrid, OpticalConfig};
pub use optics::{BoundaryPolicy, ObjectMap, Transmission, UniformObject};
