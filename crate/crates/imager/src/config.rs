//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown or repeated keys are errors. Relative `object_path`
//! values resolve against the directory of the config file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use imager_core::mode_space::pump_wavelength;
use imager_core::{BoundaryPolicy, Camera, Envelope, OpticalConfig};

use crate::error::{CliError, Result};

pub const MAX_CAMERA_PIXELS: usize = 4096;
pub const MAX_ORACLE_GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectFormat {
    Pgm,
    Csv,
}

impl ObjectFormat {
    pub fn name(self) -> &'static str {
        match self {
            ObjectFormat::Pgm => "pgm",
            ObjectFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSource {
    pub path: PathBuf,
    pub format: ObjectFormat,
    pub pitch: f64,
    pub boundary: BoundaryPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Optical parameters with the tilt as written in the file.
    pub optics: OpticalConfig,
    pub tilt_enabled: bool,
    pub camera: Camera,
    /// `None` runs with the empty object.
    pub object: Option<ObjectSource>,
    pub output_dir: PathBuf,
    pub oracle_grid: usize,
    pub calibration_steps: usize,
    pub magnify_half_angle_deg: f64,
    pub magnify_pixels: usize,
}

const KEYS: &[&str] = &[
    "lambda_signal",
    "lambda_idler",
    "lambda_pump",
    "focal_idler",
    "focal_camera",
    "n_signal",
    "n_idler",
    "n_ambient",
    "crystal_l1",
    "crystal_l2",
    "crystal_l3",
    "pump1_amplitude",
    "pump1_phase",
    "pump2_amplitude",
    "pump2_phase",
    "phi_p",
    "delta_s0",
    "phi_i0",
    "c0_prime",
    "tilt_enabled",
    "tilt_x",
    "tilt_y",
    "envelope",
    "pair_scale",
    "camera_width",
    "camera_height",
    "camera_pitch",
    "object_path",
    "object_format",
    "object_pitch",
    "object_boundary",
    "output_dir",
    "oracle_grid",
    "calibration_steps",
    "magnify_half_angle_deg",
    "magnify_pixels",
];

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub phi_p: Option<f64>,
    pub oracle_grid: Option<usize>,
}

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn float(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    CliError::config(key, format!("expected a finite number, got `{v}`"))
                }),
        }
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse::<usize>().map_err(|_| {
                CliError::config(key, format!("expected a non-negative integer, got `{v}`"))
            }),
        }
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key).as_deref() {
            None => Ok(default),
            Some("true" | "on" | "yes" | "1") => Ok(true),
            Some("false" | "off" | "no" | "0") => Ok(false),
            Some(v) => Err(CliError::config(
                key,
                format!("expected true/false, got `{v}`"),
            )),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, path, base, overrides)
    }

    /// Parses config text; `origin` is only used in error messages.
    pub fn parse(
        text: &str,
        origin: &Path,
        base_dir: &Path,
        overrides: &Overrides,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::parse(
                    origin,
                    format!("line {}", n + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(CliError::config(k, format!("unknown key (line {})", n + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::config(k, format!("repeated on line {}", n + 1)));
            }
        }
        let mut e = Entries { map };
        let d = OpticalConfig::default();

        let lambda_s = e.float("lambda_signal", d.lambda_s)?;
        let lambda_i = e.float("lambda_idler", d.lambda_i)?;
        let lambda_p = e.float("lambda_pump", pump_wavelength(lambda_s, lambda_i))?;
        let envelope = match e.take("envelope").as_deref() {
            None | Some("strict") => Envelope::Strict,
            Some("sinc") => Envelope::Sinc,
            Some(v) => {
                return Err(CliError::config(
                    "envelope",
                    format!("expected strict or sinc, got `{v}`"),
                ))
            }
        };
        let optics = OpticalConfig {
            lambda_s,
            lambda_i,
            lambda_p,
            f_idler: e.float("focal_idler", d.f_idler)?,
            f_camera: e.float("focal_camera", d.f_camera)?,
            n_signal: e.float("n_signal", d.n_signal)?,
            n_idler: e.float("n_idler", d.n_idler)?,
            n_ambient: e.float("n_ambient", d.n_ambient)?,
            crystal_dims: [
                e.float("crystal_l1", d.crystal_dims[0])?,
                e.float("crystal_l2", d.crystal_dims[1])?,
                e.float("crystal_l3", d.crystal_dims[2])?,
            ],
            pump_amplitudes: [
                e.float("pump1_amplitude", d.pump_amplitudes[0])?,
                e.float("pump2_amplitude", d.pump_amplitudes[1])?,
            ],
            pump_phases: [
                e.float("pump1_phase", d.pump_phases[0])?,
                e.float("pump2_phase", d.pump_phases[1])?,
            ],
            phi_p: e.float("phi_p", d.phi_p)?,
            delta_s0: e.float("delta_s0", d.delta_s0)?,
            phi_i0: e.float("phi_i0", d.phi_i0)?,
            c0_prime: e.float("c0_prime", d.c0_prime)?,
            tilt: [e.float("tilt_x", 0.0)?, e.float("tilt_y", 0.0)?],
            envelope,
            pair_scale: e.float("pair_scale", d.pair_scale)?,
        };
        let tilt_enabled = e.flag("tilt_enabled", false)?;

        let width = e.count("camera_width", 128)?;
        let height = e.count("camera_height", 128)?;
        for (key, n) in [("camera_width", width), ("camera_height", height)] {
            if n == 0 || n > MAX_CAMERA_PIXELS {
                return Err(CliError::config(
                    key,
                    format!("must be in 1..={MAX_CAMERA_PIXELS}, got {n}"),
                ));
            }
        }
        let pitch = e.float("camera_pitch", 2e-5)?;
        let camera = Camera::new(width, height, pitch)
            .map_err(|err| CliError::config("camera_pitch", err.to_string()))?;

        let object_path = e.take("object_path");
        let object_format = e.take("object_format");
        let object_pitch = e.float("object_pitch", pitch)?;
        if object_pitch <= 0.0 {
            return Err(CliError::config("object_pitch", "must be positive"));
        }
        let boundary = match e.take("object_boundary").as_deref() {
            None | Some("transparent") => BoundaryPolicy::Transparent,
            Some("opaque") => BoundaryPolicy::Opaque,
            Some(v) => {
                return Err(CliError::config(
                    "object_boundary",
                    format!("expected transparent or opaque, got `{v}`"),
                ))
            }
        };
        let object = match object_path {
            None => {
                if object_format.is_some() {
                    return Err(CliError::config(
                        "object_format",
                        "given without object_path",
                    ));
                }
                None
            }
            Some(p) => {
                let joined = base_dir.join(&p);
                let path = joined.canonicalize().map_err(|err| {
                    CliError::config("object_path", format!("{}: {err}", joined.display()))
                })?;
                let format = match object_format
                    .as_deref()
                    .or_else(|| path.extension().and_then(|x| x.to_str()))
                {
                    Some("pgm") => ObjectFormat::Pgm,
                    Some("csv") => ObjectFormat::Csv,
                    other => {
                        return Err(CliError::config(
                            "object_format",
                            format!("expected pgm or csv, got {other:?}"),
                        ))
                    }
                };
                Some(ObjectSource {
                    path,
                    format,
                    pitch: object_pitch,
                    boundary,
                })
            }
        };

        let output_dir = e
            .take("output_dir")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"));
        let oracle_grid = e.count("oracle_grid", 4)?;
        let calibration_steps = e.count("calibration_steps", 64)?;
        let magnify_half_angle_deg = e.float("magnify_half_angle_deg", 2.0)?;
        let magnify_pixels = e.count("magnify_pixels", 1025)?;
        debug_assert!(e.map.is_empty(), "unconsumed keys: {:?}", e.map.keys());

        let mut cfg = RunConfig {
            optics,
            tilt_enabled,
            camera,
            object,
            output_dir,
            oracle_grid,
            calibration_steps,
            magnify_half_angle_deg,
            magnify_pixels,
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(phi) = o.phi_p {
            self.optics.phi_p = phi;
        }
        if let Some(n) = o.oracle_grid {
            self.oracle_grid = n;
        }
    }

    fn validate(&self) -> Result<()> {
        self.optics.validate().map_err(|err| {
            let msg = err.to_string();
            let key = KEYS
                .iter()
                .find(|k| msg.contains(*k))
                .copied()
                .unwrap_or("lambda_pump");
            CliError::config(key, msg)
        })?;
        if self.oracle_grid == 0 || self.oracle_grid > MAX_ORACLE_GRID {
            return Err(CliError::config(
                "oracle_grid",
                format!("must be in 1..={MAX_ORACLE_GRID}, got {}", self.oracle_grid),
            ));
        }
        if self.calibration_steps < 8 {
            return Err(CliError::config("calibration_steps", "must be at least 8"));
        }
        if !(self.magnify_half_angle_deg > 0.0 && self.magnify_half_angle_deg < 45.0) {
            return Err(CliError::config(
                "magnify_half_angle_deg",
                "must be in (0, 45)",
            ));
        }
        if self.magnify_pixels < 3
            || self.magnify_pixels % 2 == 0
            || self.magnify_pixels > MAX_CAMERA_PIXELS
        {
            return Err(CliError::config(
                "magnify_pixels",
                format!("must be odd and in 3..={MAX_CAMERA_PIXELS}"),
            ));
        }
        Ok(())
    }

    /// Optical parameters as used by the simulation (tilt zeroed when disabled).
    pub fn effective_optics(&self) -> OpticalConfig {
        let mut o = self.optics.clone();
        if !self.tilt_enabled {
            o.tilt = [0.0, 0.0];
        }
        o
    }

    /// Every simulation-relevant key in a fixed order. The output directory
    /// is not part of it.
    pub fn canonical_text(&self) -> String {
        let mut out = self.optics.canonical_text();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("tilt_enabled", self.tilt_enabled.to_string());
        put("camera_width", self.camera.width.to_string());
        put("camera_height", self.camera.height.to_string());
        put("camera_pitch", format!("{:?}", self.camera.pitch));
        if let Some(obj) = &self.object {
            put("object_path", obj.path.display().to_string());
            put("object_format", obj.format.name().to_string());
            put("object_pitch", format!("{:?}", obj.pitch));
            put(
                "object_boundary",
                match obj.boundary {
                    BoundaryPolicy::Transparent => "transparent".into(),
                    BoundaryPolicy::Opaque => "opaque".into(),
                },
            );
        }
        put("oracle_grid", self.oracle_grid.to_string());
        put("calibration_steps", self.calibration_steps.to_string());
        put(
            "magnify_half_angle_deg",
            format!("{:?}", self.magnify_half_angle_deg),
        );
        put("magnify_pixels", self.magnify_pixels.to_string());
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(
            text,
            Path::new("test.conf"),
            Path::new("."),
            &Overrides::default(),
        )
    }

    #[test]
    fn empty_config_uses_defaults() {
        let c = parse("# nothing\n\n").unwrap();
        assert_eq!(c.optics, OpticalConfig::default());
        assert!(c.object.is_none());
        assert_eq!(c.oracle_grid, 4);
    }

    #[test]
    fn unknown_and_repeated_keys() {
        match parse("lamda_signal = 8e-7") {
            Err(CliError::Config { key, .. }) => assert_eq!(key, "lamda_signal"),
            other => panic!("{other:?}"),
        }
        match parse("phi_p = 1\nphi_p = 2") {
            Err(CliError::Config { key, .. }) => assert_eq!(key, "phi_p"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("just words"), Err(CliError::Parse { .. })));
    }

    #[test]
    fn bad_values_name_their_key() {
        for (text, key) in [
            ("focal_camera = abc", "focal_camera"),
            ("camera_width = 5000", "camera_width"),
            ("envelope = gaussian", "envelope"),
            ("lambda_pump = 1e-7", "lambda_pump"),
            ("n_idler = 0.5", "n_idler"),
            ("oracle_grid = 9", "oracle_grid"),
            ("object_path = /definitely/not/here.pgm", "object_path"),
            ("tilt_enabled = maybe", "tilt_enabled"),
        ] {
            match parse(text) {
                Err(CliError::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            output_dir: Some("elsewhere".into()),
            phi_p: Some(1.5),
            oracle_grid: Some(2),
        };
        let c = RunConfig::parse(
            "phi_p = 0.2\noracle_grid = 6\noutput_dir = here",
            Path::new("x"),
            Path::new("."),
            &o,
        )
        .unwrap();
        assert_eq!(c.optics.phi_p, 1.5);
        assert_eq!(c.oracle_grid, 2);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn tilt_flag_controls_effective_tilt() {
        let c = parse("tilt_x = 1e-5").unwrap();
        assert_eq!(c.effective_optics().tilt, [0.0, 0.0]);
        let c = parse("tilt_x = 1e-5\ntilt_enabled = on").unwrap();
        assert_eq!(c.effective_optics().tilt, [1e-5, 0.0]);
    }

    #[test]
    fn canonical_text_reparses_to_same_hash() {
        let c = parse(
            "lambda_signal = 8.1e-7\nlambda_idler = 1.55e-6\ndelta_s0 = 0.3\npump2_amplitude = 0.5\n\
             pump2_phase = 0.1\nenvelope = sinc\ntilt_enabled = true\ntilt_y = 3e-6\ncamera_width = 33",
        )
        .unwrap();
        let again = parse(&c.canonical_text()).unwrap();
        assert_eq!(again.hash(), c.hash());
        assert_eq!(again.canonical_text(), c.canonical_text());
    }
}
