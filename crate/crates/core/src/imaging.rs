//! Analytic counting-rate engine.
//!
//! The rate at the pixel of signal mode `k_s` is
//!
//! ```text
//! R = |V1|^2 + |V2|^2 + 2 |V1| |V2| w |T(rho_O)| cos(D_S0 - phi_I0 - arg T(rho_O) + phi_P + C'_0 + tilt . q_s)
//! ```
//!
//! with the proportionality constant fixed so the background is exactly
//! `|V1|^2 + |V2|^2`. Object information enters only through the cross term.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mode_space::{build_mode_grid, Camera, GridEntry, ModeGrid, OpticalConfig};
use crate::optics::{Transmission, UniformObject};

/// Number of pump-phase steps used for per-pixel visibility.
pub const VISIBILITY_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageMeta {
    /// Controllable pump phase the image was rendered at; `None` for
    /// derived images (sum, difference).
    pub phi_p: Option<f64>,
    pub config_hash: String,
}

/// Row-major counting rates, one per camera pixel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameraImage {
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
    pub rates: Vec<f64>,
    pub meta: ImageMeta,
}

impl CameraImage {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.rates[iy * self.width + ix]
    }

    pub fn min(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.rates.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn combine(&self, other: &CameraImage, op: impl Fn(f64, f64) -> f64) -> CameraImage {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        CameraImage {
            width: self.width,
            height: self.height,
            pitch: self.pitch,
            rates: self
                .rates
                .iter()
                .zip(&other.rates)
                .map(|(&a, &b)| op(a, b))
                .collect(),
            meta: ImageMeta {
                phi_p: None,
                config_hash: self.meta.config_hash.clone(),
            },
        }
    }
}

/// Pump phases of maximal and minimal no-object interference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCalibration {
    pub phi_pc: f64,
    pub phi_pd: f64,
}

/// Least-squares fit of `offset + amplitude * cos(phi + phase)` to samples
/// on a uniform sweep of `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineFit {
    pub offset: f64,
    /// Non-negative.
    pub amplitude: f64,
    pub phase: f64,
    /// Largest absolute deviation of a sample from the fitted curve.
    pub residual: f64,
}

impl CosineFit {
    pub fn eval(&self, phi: f64) -> f64 {
        self.offset + self.amplitude * (phi + self.phase).cos()
    }
}

/// Uniform sweep points `2 pi j / n`.
pub fn sweep(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| TAU * j as f64 / n as f64)
}

/// Fits a uniform sweep (at least three samples). Uses the discrete
/// orthogonality of `1, cos, sin` on the uniform grid.
pub fn fit_cosine(samples: &[f64]) -> CosineFit {
    let n = samples.len();
    assert!(n >= 3, "cosine fit needs at least three samples");
    let (mut c0, mut cc, mut cs) = (0.0, 0.0, 0.0);
    for (phi, &r) in sweep(n).zip(samples) {
        c0 += r;
        cc += r * phi.cos();
        cs += r * phi.sin();
    }
    let nf = n as f64;
    let offset = c0 / nf;
    let a = 2.0 * cc / nf;
    let b = 2.0 * cs / nf;
    let mut fit = CosineFit {
        offset,
        amplitude: a.hypot(b),
        phase: (-b).atan2(a),
        residual: 0.0,
    };
    fit.residual = sweep(n)
        .zip(samples)
        .map(|(phi, &r)| (r - fit.eval(phi)).abs())
        .fold(0.0, f64::max);
    fit
}

/// Representative in `[0, 2 pi)`; values within 1e-12 of `2 pi` map to 0.
pub fn normalize_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU - 1e-12 {
        0.0
    } else {
        r
    }
}

/// Phase of the interference term at `entry` for object transmission phase `arg_t`.
fn interference_phase(entry: &GridEntry, arg_t: f64, phi_p: f64, cfg: &OpticalConfig) -> f64 {
    let tilt = cfg.tilt[0] * entry.signal.qx + cfg.tilt[1] * entry.signal.qy;
    cfg.delta_s0 - cfg.phi_i0 - arg_t + cfg.relative_pump_phase(phi_p) + cfg.c0_prime + tilt
}

pub fn counting_rate<O: Transmission + ?Sized>(
    entry: &GridEntry,
    phi_p: f64,
    obj: &O,
    cfg: &OpticalConfig,
) -> f64 {
    let [v1, v2] = cfg.pump_amplitudes;
    let t = obj.sample(entry.object_point).t;
    let arg_t = if t.norm() == 0.0 { 0.0 } else { t.arg() };
    let phase = interference_phase(entry, arg_t, phi_p, cfg);
    v1 * v1 + v2 * v2 + 2.0 * v1 * v2 * entry.weight * t.norm() * phase.cos()
}

pub fn render_image<O: Transmission + ?Sized>(
    grid: &ModeGrid,
    phi_p: f64,
    obj: &O,
    cfg: &OpticalConfig,
) -> CameraImage {
    let rates = grid
        .entries
        .par_iter()
        .map(|e| counting_rate(e, phi_p, obj, cfg))
        .collect();
    CameraImage {
        width: grid.camera.width,
        height: grid.camera.height,
        pitch: grid.camera.pitch,
        rates,
        meta: ImageMeta {
            phi_p: Some(phi_p),
            config_hash: cfg.fingerprint(),
        },
    }
}

/// Sweeps the on-axis, no-object rate over `sweep_steps` pump phases and
/// locates its extrema through a cosine fit.
pub fn calibrate(cfg: &OpticalConfig, sweep_steps: usize) -> Result<PhaseCalibration> {
    if sweep_steps < 8 {
        return Err(Error::InvalidConfig(format!(
            "calibration needs at least 8 sweep steps, got {sweep_steps}"
        )));
    }
    let axis = build_mode_grid(cfg, &Camera::new(1, 1, 1.0)?)?;
    let entry = &axis.entries[0];
    let empty = UniformObject::transparent();
    let samples: Vec<f64> = sweep(sweep_steps)
        .map(|phi| counting_rate(entry, phi, &empty, cfg))
        .collect();
    let fit = fit_cosine(&samples);
    if fit.amplitude <= 1e-12 * fit.offset {
        return Err(Error::DegenerateFringe {
            amplitude: fit.amplitude,
            offset: fit.offset,
        });
    }
    let phi_pc = normalize_phase(-fit.phase);
    Ok(PhaseCalibration {
        phi_pc,
        phi_pd: normalize_phase(phi_pc + PI),
    })
}

/// `R(phi_PC) - R(phi_PD)`: background-free image, `4 |V1||V2| w |T| cos(arg T)`.
pub fn difference_image<O: Transmission + ?Sized>(
    grid: &ModeGrid,
    obj: &O,
    cfg: &OpticalConfig,
    cal: &PhaseCalibration,
) -> CameraImage {
    let plus = render_image(grid, cal.phi_pc, obj, cfg);
    let minus = render_image(grid, cal.phi_pd, obj, cfg);
    plus.combine(&minus, |a, b| a - b)
}

/// `R(phi_PC) + R(phi_PD)`: flat at `2 (|V1|^2 + |V2|^2)` for any object.
pub fn sum_image<O: Transmission + ?Sized>(
    grid: &ModeGrid,
    obj: &O,
    cfg: &OpticalConfig,
    cal: &PhaseCalibration,
) -> CameraImage {
    let plus = render_image(grid, cal.phi_pc, obj, cfg);
    let minus = render_image(grid, cal.phi_pd, obj, cfg);
    plus.combine(&minus, |a, b| a + b)
}

/// Fringe contrast `(max - min) / (max + min)` of the rate at `entry` over a
/// pump-phase sweep, with the extrema taken from the fitted cosine.
pub fn visibility<O: Transmission + ?Sized>(
    entry: &GridEntry,
    obj: &O,
    cfg: &OpticalConfig,
) -> f64 {
    let samples: Vec<f64> = sweep(VISIBILITY_STEPS)
        .map(|phi| counting_rate(entry, phi, obj, cfg))
        .collect();
    let fit = fit_cosine(&samples);
    if fit.offset <= 0.0 {
        return 0.0;
    }
    (fit.amplitude / fit.offset).min(1.0)
}
