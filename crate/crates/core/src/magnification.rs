//! Two-wavelength magnification: the small-angle prediction and a
//! measurement taken from simulated difference images of a two-dot object.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::imaging::{calibrate, difference_image, CameraImage};
use crate::mode_space::{build_mode_grid, Camera, OpticalConfig};
use crate::optics::{idler_angle_for_signal, ObjectSample, Transmission};
use num_complex::Complex64;

/// Half-width of the square centroid window, in camera pixels.
pub const CENTROID_RADIUS: usize = 3;

/// Dot width in camera pixels; small enough to sit inside the centroid
/// window, large enough that pixel sampling does not bias the centroid.
pub const DOT_SIGMA_PIXELS: f64 = 0.77;

const CALIBRATION_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagnificationReport {
    pub m_theory: f64,
    /// Negative if the image came out inverted.
    pub m_measured: f64,
    pub relative_error: f64,
    pub max_angle_used: f64,
}

/// `(f_0 / f_I) (lambda_S / lambda_I)`.
pub fn magnification_theory(cfg: &OpticalConfig) -> f64 {
    (cfg.f_camera / cfg.f_idler) * (cfg.lambda_s / cfg.lambda_i)
}

/// Relative deviation of the exact angle mapping from the small-angle
/// relation `omega_S theta_S = omega_I theta_I`.
pub fn angle_relation_residual(theta_s: f64, cfg: &OpticalConfig) -> Result<f64> {
    if theta_s == 0.0 {
        return Ok(0.0);
    }
    let theta_i = idler_angle_for_signal(theta_s, cfg)?;
    let ws = cfg.omega_s() * theta_s;
    let wi = cfg.omega_i() * theta_i;
    Ok(((ws - wi) / ws).abs())
}

/// Two Gaussian absorbers, fully opaque at their centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoDotObject {
    pub reference: [f64; 2],
    pub target: [f64; 2],
    /// Gaussian width of each dot in the object plane (m).
    pub sigma: f64,
}

impl TwoDotObject {
    pub fn new(reference: [f64; 2], target: [f64; 2], sigma: f64) -> Self {
        TwoDotObject {
            reference,
            target,
            sigma,
        }
    }

    /// Reference dot on the axis and a target dot whose image lands near
    /// `fraction` of the camera half-width along x. Dot widths scale with
    /// the camera pitch.
    pub fn for_camera(cfg: &OpticalConfig, camera: &Camera, fraction: f64) -> Self {
        let m = magnification_theory(cfg);
        let half_width = (camera.width as f64 - 1.0) / 2.0 * camera.pitch;
        TwoDotObject {
            reference: [0.0, 0.0],
            target: [fraction * half_width / m, 0.0],
            sigma: DOT_SIGMA_PIXELS * camera.pitch / m,
        }
    }

    pub fn swapped(&self) -> Self {
        TwoDotObject {
            reference: self.target,
            target: self.reference,
            sigma: self.sigma,
        }
    }

    pub fn separation(&self) -> f64 {
        (self.target[0] - self.reference[0]).hypot(self.target[1] - self.reference[1])
    }
}

impl Transmission for TwoDotObject {
    fn sample(&self, rho: [f64; 2]) -> ObjectSample {
        let dip = |c: [f64; 2]| {
            let r2 = (rho[0] - c[0]).powi(2) + (rho[1] - c[1]).powi(2);
            1.0 - (-r2 / (2.0 * self.sigma * self.sigma)).exp()
        };
        ObjectSample::from_transmission(Complex64::new(dip(self.reference) * dip(self.target), 0.0))
    }
}

/// Strip camera, `width` pixels wide (odd, so a pixel sits on the axis),
/// spanning the half-angle `half_angle` along x.
pub fn measurement_camera(cfg: &OpticalConfig, half_angle: f64, width: usize) -> Result<Camera> {
    if width < 3 || width % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "measurement camera width must be odd and >= 3, got {width}"
        )));
    }
    if !(half_angle > 0.0 && half_angle < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidConfig(format!(
            "half angle {half_angle} out of range"
        )));
    }
    let half_width = cfg.f_camera * half_angle.tan();
    Camera::new(
        width,
        2 * CENTROID_RADIUS + 1,
        half_width / ((width - 1) / 2) as f64,
    )
}

/// Intensity-weighted centroids (camera-plane metres) of the two deepest
/// dips of a difference image, each over a `(2r+1)^2` window.
pub fn locate_dots(img: &CameraImage, radius: usize) -> Result<[[f64; 2]; 2]> {
    let baseline = img.max();
    let depth = |i: usize| baseline - img.rates[i];
    let coords = |i: usize| (i % img.width, i / img.width);
    let deepest = |skip: Option<usize>| {
        (0..img.rates.len())
            .filter(|&i| match skip {
                Some(s) => chebyshev(coords(i), coords(s)) > radius,
                None => true,
            })
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if depth(b) >= depth(i) => Some(b),
                _ => Some(i),
            })
    };
    let first = deepest(None).ok_or_else(|| Error::DotsUnresolved("empty image".into()))?;
    let second = deepest(Some(first))
        .ok_or_else(|| Error::DotsUnresolved("no second dip outside the first window".into()))?;
    if !(depth(first) > 0.0) || depth(second) < 0.5 * depth(first) {
        return Err(Error::DotsUnresolved(format!(
            "second dip depth {:.3e} vs first {:.3e}",
            depth(second),
            depth(first)
        )));
    }
    if chebyshev(coords(first), coords(second)) <= 2 * radius {
        return Err(Error::DotsUnresolved(format!(
            "centroid windows around pixels {:?} and {:?} overlap",
            coords(first),
            coords(second)
        )));
    }
    let centroid = |center: usize| {
        let (cx, cy) = coords(center);
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for iy in cy.saturating_sub(radius)..=(cy + radius).min(img.height - 1) {
            for ix in cx.saturating_sub(radius)..=(cx + radius).min(img.width - 1) {
                let w = depth(iy * img.width + ix).max(0.0);
                let [x, y] = pixel_position(img, ix, iy);
                sw += w;
                sx += w * x;
                sy += w * y;
            }
        }
        [sx / sw, sy / sw]
    };
    Ok([centroid(first), centroid(second)])
}

fn chebyshev(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

fn pixel_position(img: &CameraImage, ix: usize, iy: usize) -> [f64; 2] {
    [
        (ix as f64 - (img.width as f64 - 1.0) / 2.0) * img.pitch,
        (iy as f64 - (img.height as f64 - 1.0) / 2.0) * img.pitch,
    ]
}

/// Renders the difference image of `obj`, locates both dot images, and
/// divides their separation by the object separation.
pub fn magnification_measured(
    obj: &TwoDotObject,
    cfg: &OpticalConfig,
    camera: &Camera,
) -> Result<MagnificationReport> {
    let grid = build_mode_grid(cfg, camera)?;
    let cal = calibrate(cfg, CALIBRATION_STEPS)?;
    let img = difference_image(&grid, obj, cfg, &cal);
    let [a, b] = locate_dots(&img, CENTROID_RADIUS)?;

    // Pair the centroid nearer the camera axis with the dot nearer the object axis.
    let norm = |p: [f64; 2]| p[0].hypot(p[1]);
    let (img_ref, img_tgt) = if norm(a) <= norm(b) { (a, b) } else { (b, a) };
    let (obj_ref, obj_tgt) = if norm(obj.reference) <= norm(obj.target) {
        (obj.reference, obj.target)
    } else {
        (obj.target, obj.reference)
    };
    let d_img = [img_tgt[0] - img_ref[0], img_tgt[1] - img_ref[1]];
    let d_obj = [obj_tgt[0] - obj_ref[0], obj_tgt[1] - obj_ref[1]];
    let sign = if d_img[0] * d_obj[0] + d_img[1] * d_obj[1] >= 0.0 {
        1.0
    } else {
        -1.0
    };
    let m_measured = sign * norm(d_img) / norm(d_obj);
    let m_theory = magnification_theory(cfg);
    let half_width = (camera.width as f64 - 1.0) / 2.0 * camera.pitch;
    Ok(MagnificationReport {
        m_theory,
        m_measured,
        relative_error: ((m_measured - m_theory) / m_theory).abs(),
        max_angle_used: half_width.atan2(cfg.f_camera),
    })
}
