//! Discrete mode geometry of the two-crystal interferometer.
//!
//! Every camera pixel selects exactly one signal plane wave (the lens L0
//! focuses that plane wave onto the pixel). Its phase-matched idler partner,
//! the mirror image of that partner through the equal-focal-length 4-f
//! system, and the object point it illuminates are all fixed by the pixel.
//! Transverse components are conserved across the flat crystal faces, so
//! the same `(qx, qy)` describes a mode inside and outside the crystal; only
//! the axial component depends on the medium.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optics;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// How the pair amplitude of each grid entry is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    /// Exact phase matching, weight 1 everywhere.
    #[default]
    Strict,
    /// Finite-crystal sinc weight from the residual axial mismatch.
    Sinc,
}

/// Physical parameters of the interferometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalConfig {
    /// Mean signal wavelength (m).
    pub lambda_s: f64,
    /// Mean idler wavelength (m).
    pub lambda_i: f64,
    /// Pump wavelength (m).
    pub lambda_p: f64,
    /// Focal length of the 4-f lenses in the idler arm (m).
    pub f_idler: f64,
    /// Focal length of the camera lens (m).
    pub f_camera: f64,
    pub n_signal: f64,
    pub n_idler: f64,
    pub n_ambient: f64,
    /// Crystal side lengths `(l1, l2, l3)`, `l3` along the pump (m).
    pub crystal_dims: [f64; 3],
    /// Pump amplitudes `|V_P1|`, `|V_P2|` (arbitrary units) and their phases (rad).
    pub pump_amplitudes: [f64; 2],
    pub pump_phases: [f64; 2],
    /// Controllable relative pump phase (rad), added on top of
    /// `arg(pump2) - arg(pump1)`.
    pub phi_p: f64,
    pub delta_s0: f64,
    pub phi_i0: f64,
    pub c0_prime: f64,
    /// Linear phase gradient per unit transverse signal wavenumber (m).
    pub tilt: [f64; 2],
    pub envelope: Envelope,
    /// Pair-generation amplitude per unit pump amplitude, used by the Fock oracle.
    pub pair_scale: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self::with_wavelengths(810e-9, 1550e-9)
    }
}

impl OpticalConfig {
    /// Balanced, phase-free configuration with the pump wavelength derived
    /// from energy conservation.
    pub fn with_wavelengths(lambda_s: f64, lambda_i: f64) -> Self {
        OpticalConfig {
            lambda_s,
            lambda_i,
            lambda_p: pump_wavelength(lambda_s, lambda_i),
            f_idler: 0.1,
            f_camera: 0.2,
            n_signal: 1.6,
            n_idler: 1.6,
            n_ambient: 1.0,
            crystal_dims: [1e-3, 1e-3, 1e-3],
            pump_amplitudes: [1.0, 1.0],
            pump_phases: [0.0, 0.0],
            phi_p: 0.0,
            delta_s0: 0.0,
            phi_i0: 0.0,
            c0_prime: 0.0,
            tilt: [0.0, 0.0],
            envelope: Envelope::Strict,
            pair_scale: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("lambda_signal", self.lambda_s),
            ("lambda_idler", self.lambda_i),
            ("lambda_pump", self.lambda_p),
            ("focal_idler", self.f_idler),
            ("focal_camera", self.f_camera),
            ("crystal_l1", self.crystal_dims[0]),
            ("crystal_l2", self.crystal_dims[1]),
            ("crystal_l3", self.crystal_dims[2]),
        ];
        for (name, value) in lengths {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("n_signal", self.n_signal),
            ("n_idler", self.n_idler),
            ("n_ambient", self.n_ambient),
        ] {
            if !(value.is_finite() && value >= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be >= 1, got {value}"
                )));
            }
        }
        let inv_p = 1.0 / self.lambda_p;
        let inv_si = 1.0 / self.lambda_s + 1.0 / self.lambda_i;
        if ((inv_p - inv_si) / inv_p).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "lambda_pump {} violates energy matching (expected {})",
                self.lambda_p,
                1.0 / inv_si
            )));
        }
        let scalars = [
            ("pump1_phase", self.pump_phases[0]),
            ("pump2_phase", self.pump_phases[1]),
            ("phi_p", self.phi_p),
            ("delta_s0", self.delta_s0),
            ("phi_i0", self.phi_i0),
            ("c0_prime", self.c0_prime),
            ("tilt_x", self.tilt[0]),
            ("tilt_y", self.tilt[1]),
        ];
        for (name, value) in scalars {
            if !value.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        for (name, value) in [
            ("pump1_amplitude", self.pump_amplitudes[0]),
            ("pump2_amplitude", self.pump_amplitudes[1]),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be >= 0, got {value}"
                )));
            }
        }
        if !(self.pair_scale.is_finite() && self.pair_scale > 0.0) {
            return Err(Error::InvalidConfig("pair_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn omega_s(&self) -> f64 {
        angular_frequency(self.lambda_s)
    }

    pub fn omega_i(&self) -> f64 {
        angular_frequency(self.lambda_i)
    }

    pub fn omega_p(&self) -> f64 {
        angular_frequency(self.lambda_p)
    }

    /// Relative pump phase seen by the interference term for a given
    /// controllable phase `phi_p`.
    pub fn relative_pump_phase(&self, phi_p: f64) -> f64 {
        phi_p + self.pump_phases[1] - self.pump_phases[0]
    }

    /// Complex pump amplitude `V_Pj` for crystal `j` in `{1, 2}`.
    pub fn pump(&self, j: usize) -> Complex64 {
        Complex64::from_polar(self.pump_amplitudes[j - 1], self.pump_phases[j - 1])
    }

    /// Stable `key = value` rendering of every field; floats use the
    /// shortest round-trip representation.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("lambda_signal", format!("{:?}", self.lambda_s));
        put("lambda_idler", format!("{:?}", self.lambda_i));
        put("lambda_pump", format!("{:?}", self.lambda_p));
        put("focal_idler", format!("{:?}", self.f_idler));
        put("focal_camera", format!("{:?}", self.f_camera));
        put("n_signal", format!("{:?}", self.n_signal));
        put("n_idler", format!("{:?}", self.n_idler));
        put("n_ambient", format!("{:?}", self.n_ambient));
        put("crystal_l1", format!("{:?}", self.crystal_dims[0]));
        put("crystal_l2", format!("{:?}", self.crystal_dims[1]));
        put("crystal_l3", format!("{:?}", self.crystal_dims[2]));
        put("pump1_amplitude", format!("{:?}", self.pump_amplitudes[0]));
        put("pump1_phase", format!("{:?}", self.pump_phases[0]));
        put("pump2_amplitude", format!("{:?}", self.pump_amplitudes[1]));
        put("pump2_phase", format!("{:?}", self.pump_phases[1]));
        put("phi_p", format!("{:?}", self.phi_p));
        put("delta_s0", format!("{:?}", self.delta_s0));
        put("phi_i0", format!("{:?}", self.phi_i0));
        put("c0_prime", format!("{:?}", self.c0_prime));
        put("tilt_x", format!("{:?}", self.tilt[0]));
        put("tilt_y", format!("{:?}", self.tilt[1]));
        put(
            "envelope",
            match self.envelope {
                Envelope::Strict => "strict".into(),
                Envelope::Sinc => "sinc".into(),
            },
        );
        put("pair_scale", format!("{:?}", self.pair_scale));
        out
    }

    /// SHA-256 of [`canonical_text`](Self::canonical_text), hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }
}

/// Pump wavelength fixed by `1/lambda_p = 1/lambda_s + 1/lambda_i`.
pub fn pump_wavelength(lambda_s: f64, lambda_i: f64) -> f64 {
    1.0 / (1.0 / lambda_s + 1.0 / lambda_i)
}

pub fn angular_frequency(lambda: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / lambda
}

/// Plane-wave mode in a medium of index `index`. The axial component is
/// always derived from the dispersion relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveVector {
    pub qx: f64,
    pub qy: f64,
    pub omega: f64,
    pub index: f64,
}

impl WaveVector {
    /// Builds a forward-propagating mode, rejecting evanescent ones.
    pub fn new(qx: f64, qy: f64, omega: f64, index: f64) -> Result<Self> {
        let k = WaveVector {
            qx,
            qy,
            omega,
            index,
        };
        let limit = k.magnitude();
        let transverse = k.transverse_norm();
        if transverse >= limit {
            return Err(Error::EvanescentMode { transverse, limit });
        }
        Ok(k)
    }

    pub fn magnitude(&self) -> f64 {
        self.index * self.omega / SPEED_OF_LIGHT
    }

    pub fn transverse(&self) -> [f64; 2] {
        [self.qx, self.qy]
    }

    pub fn transverse_norm(&self) -> f64 {
        self.qx.hypot(self.qy)
    }

    pub fn kz(&self) -> f64 {
        let k = self.magnitude();
        let q2 = self.qx * self.qx + self.qy * self.qy;
        (k * k - q2).sqrt()
    }

    /// Same mode expressed in another medium (transverse part conserved).
    pub fn in_medium(&self, index: f64) -> Result<Self> {
        WaveVector::new(self.qx, self.qy, self.omega, index)
    }
}

/// Reflection through the optical axis of the 4-f system.
pub fn mirror(k: &WaveVector) -> WaveVector {
    WaveVector {
        qx: -k.qx,
        qy: -k.qy,
        ..*k
    }
}

/// Idler partner of a signal mode for an axial pump: opposite transverse
/// momentum, idler frequency `omega_p - omega_s`, same medium as `k_s`.
pub fn phase_match_partner(k_s: &WaveVector, cfg: &OpticalConfig) -> Result<WaveVector> {
    let omega_i = cfg.omega_p() - k_s.omega;
    WaveVector::new(-k_s.qx, -k_s.qy, omega_i, k_s.index)
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Product of the three crystal-axis sinc factors for a wave-vector mismatch.
pub fn sinc_envelope(delta_k: [f64; 3], cfg: &OpticalConfig) -> f64 {
    delta_k
        .iter()
        .zip(cfg.crystal_dims.iter())
        .map(|(dk, l)| sinc(dk * l / 2.0))
        .product()
}

/// Mismatch `k_p - k_s - k_i` inside the crystal for a pair whose outside
/// signal mode is `k_s`. The pump magnitude is taken to be collinearly phase
/// matched, so the on-axis pair has zero mismatch.
pub fn crystal_mismatch(k_s: &WaveVector, cfg: &OpticalConfig) -> Result<[f64; 3]> {
    let ks_in = k_s.in_medium(cfg.n_signal)?;
    let ki_in = phase_match_partner(&ks_in, cfg)?.in_medium(cfg.n_idler)?;
    let kp = ks_in.magnitude() + ki_in.magnitude();
    Ok([
        -(ks_in.qx + ki_in.qx),
        -(ks_in.qy + ki_in.qy),
        kp - ks_in.kz() - ki_in.kz(),
    ])
}

/// Rectangular pixel layout centred on the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Pixel pitch (m).
    pub pitch: f64,
}

impl Camera {
    pub fn new(width: usize, height: usize, pitch: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(
                "camera pixel count must be positive".into(),
            ));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::InvalidConfig("camera pitch must be positive".into()));
        }
        Ok(Camera {
            width,
            height,
            pitch,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Camera-plane position of pixel `(ix, iy)`; the array centre is the origin.
    pub fn position(&self, ix: usize, iy: usize) -> [f64; 2] {
        let cx = (self.width as f64 - 1.0) / 2.0;
        let cy = (self.height as f64 - 1.0) / 2.0;
        [(ix as f64 - cx) * self.pitch, (iy as f64 - cy) * self.pitch]
    }

    /// Largest angle between a pixel's signal mode and the axis.
    pub fn half_angle(&self, f_camera: f64) -> f64 {
        let corner = self.position(self.width - 1, self.height - 1);
        corner[0].hypot(corner[1]).atan2(f_camera)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridEntry {
    /// Pixel coordinates `(ix, iy)`.
    pub pixel: (usize, usize),
    pub camera_point: [f64; 2],
    pub signal: WaveVector,
    pub idler: WaveVector,
    pub mirrored_idler: WaveVector,
    pub object_point: [f64; 2],
    pub weight: f64,
}

/// One entry per camera pixel, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeGrid {
    pub camera: Camera,
    pub entries: Vec<GridEntry>,
}

impl ModeGrid {
    pub fn entry(&self, ix: usize, iy: usize) -> &GridEntry {
        &self.entries[iy * self.camera.width + ix]
    }

    /// Index of the pixel nearest the optical axis.
    pub fn center_index(&self) -> usize {
        let ix = (self.camera.width - 1) / 2;
        let iy = (self.camera.height - 1) / 2;
        iy * self.camera.width + ix
    }
}

/// Signal mode (in the ambient medium) that the camera lens focuses onto
/// the camera-plane point `rho`.
pub fn signal_mode_for_pixel(rho: [f64; 2], cfg: &OpticalConfig) -> Result<WaveVector> {
    let k = cfg.n_ambient * cfg.omega_s() / SPEED_OF_LIGHT;
    let r = (rho[0] * rho[0] + rho[1] * rho[1] + cfg.f_camera * cfg.f_camera).sqrt();
    WaveVector::new(k * rho[0] / r, k * rho[1] / r, cfg.omega_s(), cfg.n_ambient)
}

pub fn build_mode_grid(cfg: &OpticalConfig, camera: &Camera) -> Result<ModeGrid> {
    cfg.validate()?;
    let mut entries = Vec::with_capacity(camera.len());
    for iy in 0..camera.height {
        for ix in 0..camera.width {
            let rho = camera.position(ix, iy);
            let signal = signal_mode_for_pixel(rho, cfg)?;
            let idler = phase_match_partner(&signal, cfg)?;
            let mirrored_idler = mirror(&idler);
            let object_point = optics::object_point_for_pixel(rho, cfg)?;
            let weight = match cfg.envelope {
                Envelope::Strict => 1.0,
                Envelope::Sinc => sinc_envelope(crystal_mismatch(&signal, cfg)?, cfg),
            };
            entries.push(GridEntry {
                pixel: (ix, iy),
                camera_point: rho,
                signal,
                idler,
                mirrored_idler,
                object_point,
                weight,
            });
        }
    }
    Ok(ModeGrid {
        camera: *camera,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> OpticalConfig {
        OpticalConfig::default()
    }

    #[test]
    fn mirror_examples() {
        let w = cfg().omega_s();
        let k = WaveVector::new(0.0, 0.0, w, 1.0).unwrap();
        assert_eq!(mirror(&k), k);
        let k = WaveVector::new(1e5, -2e5, w, 1.0).unwrap();
        let m = mirror(&k);
        assert_eq!((m.qx, m.qy, m.omega), (-1e5, 2e5, w));
        assert_eq!(m.kz(), k.kz());
        assert_eq!(mirror(&m), k);
    }

    #[test]
    fn partner_of_axial_signal_is_axial() {
        let c = cfg();
        let ks = WaveVector::new(0.0, 0.0, c.omega_s(), 1.0).unwrap();
        let ki = phase_match_partner(&ks, &c).unwrap();
        assert_eq!(ki.transverse(), [0.0, 0.0]);
        assert!(((ki.omega - c.omega_i()) / c.omega_i()).abs() < 1e-12);
    }

    #[test]
    fn partner_flips_transverse_component() {
        let c = cfg();
        let ks = WaveVector::new(3e5, 0.0, c.omega_s(), 1.0).unwrap();
        let ki = phase_match_partner(&ks, &c).unwrap();
        assert_eq!(ki.transverse(), [-3e5, 0.0]);
    }

    #[test]
    fn partner_rejects_evanescent_idler() {
        let c = cfg();
        // Signal at 80 degrees: the longer-wavelength idler cannot carry that momentum.
        let k = c.omega_s() / SPEED_OF_LIGHT;
        let ks = WaveVector::new(k * 80f64.to_radians().sin(), 0.0, c.omega_s(), 1.0).unwrap();
        assert!(matches!(
            phase_match_partner(&ks, &c),
            Err(Error::EvanescentMode { .. })
        ));
    }

    #[test]
    fn sinc_envelope_examples() {
        let mut c = cfg();
        c.crystal_dims = [1e-3, 2e-3, 4e-3];
        assert_eq!(sinc_envelope([0.0; 3], &c), 1.0);
        let l3 = c.crystal_dims[2];
        let at_pi = sinc_envelope([0.0, 0.0, 2.0 * PI / l3], &c);
        assert!(at_pi.abs() < 1e-15);
        let half = sinc_envelope([0.0, 0.0, PI / l3], &c);
        assert!((half - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn sinc_is_continuous_at_the_switch() {
        let below = sinc(0.99e-8);
        let above = sinc(1.01e-8);
        assert!((below - above).abs() < 1e-15);
    }

    #[test]
    fn single_pixel_grid_is_on_axis() {
        let c = cfg();
        let cam = Camera::new(1, 1, 1e-5).unwrap();
        let grid = build_mode_grid(&c, &cam).unwrap();
        assert_eq!(grid.entries.len(), 1);
        let e = &grid.entries[0];
        assert_eq!(e.object_point, [0.0, 0.0]);
        assert_eq!(e.signal.transverse(), [0.0, 0.0]);
        assert_eq!(e.weight, 1.0);
    }

    #[test]
    fn grid_construction_invariants() {
        let c = cfg();
        let cam = Camera::new(9, 6, 2e-4).unwrap();
        let grid = build_mode_grid(&c, &cam).unwrap();
        assert_eq!(grid.entries.len(), 54);
        for e in &grid.entries {
            assert_eq!(e.signal.qx + e.idler.qx, 0.0);
            assert_eq!(e.signal.qy + e.idler.qy, 0.0);
            let rel = (e.signal.omega + e.idler.omega - c.omega_p()) / c.omega_p();
            assert!(rel.abs() < 1e-12);
            assert_eq!(e.weight, 1.0);
            assert_eq!(e.mirrored_idler.transverse(), e.signal.transverse());
            assert_eq!(e.mirrored_idler.kz(), e.idler.kz());
        }
        // Left-right mirror symmetry.
        for iy in 0..cam.height {
            for ix in 0..cam.width {
                let a = grid.entry(ix, iy);
                let b = grid.entry(cam.width - 1 - ix, iy);
                assert_eq!(a.signal.qx, -b.signal.qx);
                assert_eq!(a.signal.qy, b.signal.qy);
                assert_eq!(a.object_point[0], -b.object_point[0]);
                assert_eq!(a.object_point[1], b.object_point[1]);
            }
        }
    }

    #[test]
    fn sinc_mode_weights_peak_on_axis() {
        let mut c = cfg();
        c.envelope = Envelope::Sinc;
        c.crystal_dims = [2e-3, 2e-3, 2e-3];
        let cam = Camera::new(21, 1, 4e-4).unwrap();
        let grid = build_mode_grid(&c, &cam).unwrap();
        let center = grid.entries[grid.center_index()].weight;
        assert!((center - 1.0).abs() < 1e-12);
        let edge = grid.entries[0].weight;
        assert!(edge < center && edge.abs() <= 1.0);
        // Weight falls monotonically towards the edge before the first zero.
        let mut prev = center;
        for ix in 11..21 {
            let w = grid.entry(ix, 0).weight;
            if w < 0.0 {
                break;
            }
            assert!(w <= prev);
            prev = w;
        }
    }

    #[test]
    fn rejects_inconsistent_pump_wavelength() {
        let mut c = cfg();
        c.lambda_p *= 1.0 + 1e-6;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let mut c = cfg();
        c.n_idler = 0.9;
        assert!(c.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_every_field() {
        let a = cfg();
        let mut b = cfg();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.c0_prime = 1e-12;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    proptest! {
        #[test]
        fn mirror_is_involution(qx in -1e6f64..1e6, qy in -1e6f64..1e6) {
            let k = WaveVector::new(qx, qy, cfg().omega_s(), 1.0).unwrap();
            let m = mirror(&k);
            prop_assert_eq!(mirror(&m), k);
            prop_assert_eq!(m.omega, k.omega);
            prop_assert_eq!(m.kz(), k.kz());
        }

        #[test]
        fn sinc_envelope_even_and_bounded(
            a in -1e5f64..1e5, b in -1e5f64..1e5, c in -1e5f64..1e5,
        ) {
            let cf = cfg();
            let v = sinc_envelope([a, b, c], &cf);
            prop_assert!(v.abs() <= 1.0);
            prop_assert_eq!(v, sinc_envelope([-a, b, c], &cf));
            prop_assert_eq!(v, sinc_envelope([a, -b, c], &cf));
            prop_assert_eq!(v, sinc_envelope([a, b, -c], &cf));
        }
    }
}
