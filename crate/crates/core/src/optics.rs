//! Geometric optics of the object arm and the camera lens, and the object
//! itself as a field of per-mode beamsplitters.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode_space::{mirror, phase_match_partner, signal_mode_for_pixel, OpticalConfig};

/// Transmission into the aligned idler mode and the magnitude of the
/// reflection into the unused (environment) port at one object point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSample {
    pub t: Complex64,
    pub r_prime_mag: f64,
}

impl ObjectSample {
    /// Sample with the reflection magnitude completed to unitarity.
    pub fn from_transmission(t: Complex64) -> Self {
        let r2 = (1.0 - t.norm_sqr()).max(0.0);
        ObjectSample {
            t,
            r_prime_mag: r2.sqrt(),
        }
    }
}

/// Anything that can report a complex transmission at an object-plane point.
pub trait Transmission: Sync {
    fn sample(&self, rho: [f64; 2]) -> ObjectSample;
}

/// Spatially constant transmission. `UniformObject(1)` is the empty object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformObject(pub Complex64);

impl UniformObject {
    pub fn transparent() -> Self {
        UniformObject(Complex64::new(1.0, 0.0))
    }

    pub fn opaque() -> Self {
        UniformObject(Complex64::new(0.0, 0.0))
    }
}

impl Transmission for UniformObject {
    fn sample(&self, _rho: [f64; 2]) -> ObjectSample {
        ObjectSample::from_transmission(self.0)
    }
}

/// Transmission assumed outside the sampled rectangle; its phase is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    #[default]
    Transparent,
    Opaque,
}

impl BoundaryPolicy {
    fn value(self) -> Complex64 {
        match self {
            BoundaryPolicy::Transparent => Complex64::new(1.0, 0.0),
            BoundaryPolicy::Opaque => Complex64::new(0.0, 0.0),
        }
    }
}

/// Rasterised complex transmission, centred on the optical axis of the
/// object plane. Sample `(x, y)` sits at `((x - (w-1)/2) * pitch, (y - (h-1)/2) * pitch)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMap {
    width: usize,
    height: usize,
    pitch: f64,
    values: Vec<Complex64>,
    boundary: BoundaryPolicy,
}

impl ObjectMap {
    /// Magnitudes up to `1 + 1e-9` are accepted and snapped onto the unit circle.
    pub fn new(
        width: usize,
        height: usize,
        pitch: f64,
        values: Vec<Complex64>,
        boundary: BoundaryPolicy,
    ) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "object map of {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::InvalidConfig("object pitch must be positive".into()));
        }
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            let m = v.norm();
            if !m.is_finite() || m > 1.0 + 1e-9 {
                return Err(Error::UnitarityViolation {
                    x: i % width,
                    y: i / width,
                    magnitude: m,
                });
            }
            if m > 1.0 {
                *v /= m;
            }
        }
        Ok(ObjectMap {
            width,
            height,
            pitch,
            values,
            boundary,
        })
    }

    pub fn uniform(width: usize, height: usize, pitch: f64, t: Complex64) -> Result<Self> {
        Self::new(
            width,
            height,
            pitch,
            vec![t; width * height],
            BoundaryPolicy::Transparent,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Object-plane position of sample `(x, y)`.
    pub fn position(&self, x: usize, y: usize) -> [f64; 2] {
        [
            (x as f64 - (self.width as f64 - 1.0) / 2.0) * self.pitch,
            (y as f64 - (self.height as f64 - 1.0) / 2.0) * self.pitch,
        ]
    }

    /// Bilinear interpolation of the complex transmission.
    pub fn interpolate(&self, rho: [f64; 2]) -> Complex64 {
        let fx = rho[0] / self.pitch + (self.width as f64 - 1.0) / 2.0;
        let fy = rho[1] / self.pitch + (self.height as f64 - 1.0) / 2.0;
        let (Some((x0, tx)), Some((y0, ty))) = (cell(fx, self.width), cell(fy, self.height)) else {
            return self.boundary.value();
        };
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = self.get(x0, y0) * (1.0 - tx) + self.get(x1, y0) * tx;
        let bottom = self.get(x0, y1) * (1.0 - tx) + self.get(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Lower sample index and fractional offset for a continuous coordinate,
/// or `None` outside `[0, n-1]`.
fn cell(f: f64, n: usize) -> Option<(usize, f64)> {
    let last = (n - 1) as f64;
    if !(0.0..=last).contains(&f) {
        return None;
    }
    if n == 1 {
        return Some((0, 0.0));
    }
    let i0 = (f.floor() as usize).min(n - 2);
    Some((i0, f - i0 as f64))
}

impl Transmission for ObjectMap {
    fn sample(&self, rho: [f64; 2]) -> ObjectSample {
        let t = self.interpolate(rho);
        // Rounding in the convex combination can leave |t| a hair above 1.
        let m = t.norm();
        let t = if m > 1.0 { t / m } else { t };
        ObjectSample::from_transmission(t)
    }
}

/// Free-standing form of [`Transmission::sample`] for an [`ObjectMap`].
pub fn sample_object(obj: &ObjectMap, rho: [f64; 2]) -> ObjectSample {
    obj.sample(rho)
}

/// Per-axis angle of the signal plane wave focused at camera point `rho`.
pub fn pixel_to_signal_angle(rho: [f64; 2], cfg: &OpticalConfig) -> [f64; 2] {
    [rho[0].atan2(cfg.f_camera), rho[1].atan2(cfg.f_camera)]
}

/// Snell refraction from a medium of index `n_medium` into the ambient medium.
pub fn refract_out(theta_internal: f64, n_medium: f64, cfg: &OpticalConfig) -> Result<f64> {
    let s = n_medium * theta_internal.sin() / cfg.n_ambient;
    if s.abs() > 1.0 {
        return Err(Error::TotalInternalReflection(s * cfg.n_ambient));
    }
    Ok(s.asin())
}

/// Snell refraction from the ambient medium into a medium of index `n_medium`.
pub fn refract_in(theta_external: f64, n_medium: f64, cfg: &OpticalConfig) -> f64 {
    (cfg.n_ambient * theta_external.sin() / n_medium).asin()
}

/// Outside idler angle phase matched to an outside signal angle,
/// `omega_s |sin theta_s| = omega_i |sin theta_i|`, sign preserving.
pub fn idler_angle_for_signal(theta_s: f64, cfg: &OpticalConfig) -> Result<f64> {
    let ratio = cfg.lambda_i / cfg.lambda_s;
    let s = ratio * theta_s.sin();
    if s.abs() > 1.0 {
        return Err(Error::EvanescentMode {
            transverse: s.abs(),
            limit: 1.0,
        });
    }
    Ok(s.asin())
}

/// Object point imaged onto camera point `rho`: the signal mode of the pixel,
/// its phase-matched idler, that idler's mirror image through the 4-f
/// system, and the L1 focus of the mirror image. Non-inverting.
pub fn object_point_for_pixel(rho: [f64; 2], cfg: &OpticalConfig) -> Result<[f64; 2]> {
    let k_s = signal_mode_for_pixel(rho, cfg)?;
    let k_i = phase_match_partner(&k_s, cfg)?;
    let tilde = mirror(&k_i);
    let kz = tilde.kz();
    Ok([cfg.f_idler * tilde.qx / kz, cfg.f_idler * tilde.qy / kz])
}
