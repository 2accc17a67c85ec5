//! Object loading and image output.
//!
//! Objects come as 8-bit PGM (amplitude only) or as CSV with one
//! `x,y,mag,phase_rad` row per sample, `x`/`y` being integer grid indices.
//! Images go out as CSV (raw rates, row-major) or as PGM with the affine
//! grey-level map stored in a `<file>.range` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use imager_core::imaging::CameraImage;
use imager_core::{BoundaryPolicy, ObjectMap};

use crate::config::{ObjectFormat, MAX_CAMERA_PIXELS};
use crate::error::{CliError, Result};

pub fn load_object(
    path: &Path,
    format: ObjectFormat,
    pitch: f64,
    boundary: BoundaryPolicy,
) -> Result<ObjectMap> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let (width, height, values) = match format {
        ObjectFormat::Pgm => parse_pgm(path, &bytes)?,
        ObjectFormat::Csv => parse_object_csv(path, &bytes)?,
    };
    Ok(ObjectMap::new(width, height, pitch, values, boundary)?)
}

/// Splits the PGM header into whitespace-separated tokens, skipping `#`
/// comments. Returns the tokens with their byte offsets and the offset just
/// past the single whitespace byte that ends the header.
fn pgm_header(bytes: &[u8], count: usize) -> (Vec<(usize, String)>, usize) {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count && i < bytes.len() {
        match bytes[i] {
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b if b.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                tokens.push((
                    start,
                    String::from_utf8_lossy(&bytes[start..i]).into_owned(),
                ));
            }
        }
    }
    (tokens, (i + 1).min(bytes.len()))
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<Complex64>)> {
    let err = |offset: usize, msg: String| CliError::parse(path, format!("byte {offset}"), msg);
    let (header, data_start) = pgm_header(bytes, 4);
    if header.len() < 4 {
        return Err(err(bytes.len(), "truncated PGM header".into()));
    }
    let magic = header[0].1.as_str();
    if magic != "P2" && magic != "P5" {
        return Err(err(0, format!("expected P2 or P5, found `{magic}`")));
    }
    let mut dims = [0usize; 3];
    for (slot, (offset, tok)) in dims.iter_mut().zip(&header[1..4]) {
        *slot = tok
            .parse()
            .map_err(|_| err(*offset, format!("expected an integer, found `{tok}`")))?;
    }
    let [width, height, maxval] = dims;
    if width == 0 || height == 0 || width > MAX_CAMERA_PIXELS || height > MAX_CAMERA_PIXELS {
        return Err(err(
            header[1].0,
            format!("unsupported size {width}x{height}"),
        ));
    }
    if maxval != 255 {
        return Err(err(
            header[3].0,
            format!("only 8-bit PGM (maxval 255) is supported, found {maxval}"),
        ));
    }
    let n = width * height;
    let levels: Vec<u8> = if magic == "P5" {
        let data = &bytes[data_start..];
        if data.len() < n {
            return Err(err(
                bytes.len(),
                format!("expected {n} pixel bytes, found {}", data.len()),
            ));
        }
        data[..n].to_vec()
    } else {
        let (tokens, _) = pgm_header(bytes, 4 + n);
        if tokens.len() < 4 + n {
            return Err(err(
                bytes.len(),
                format!("expected {n} pixel values, found {}", tokens.len() - 4),
            ));
        }
        tokens[4..]
            .iter()
            .map(|(offset, tok)| {
                tok.parse::<u8>()
                    .map_err(|_| err(*offset, format!("pixel value `{tok}` is not in 0..=255")))
            })
            .collect::<Result<_>>()?
    };
    let values = levels
        .into_iter()
        .map(|v| Complex64::new(f64::from(v) / 255.0, 0.0))
        .collect();
    Ok((width, height, values))
}

fn parse_object_csv(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<Complex64>)> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        CliError::parse(path, format!("byte {}", e.valid_up_to()), "not valid UTF-8")
    })?;
    let err = |line: usize, msg: String| CliError::parse(path, format!("line {line}"), msg);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == "x,y,mag,phase_rad" => {}
        Some((_, h)) => {
            return Err(err(
                1,
                format!("expected header `x,y,mag,phase_rad`, found `{h}`"),
            ))
        }
        None => return Err(err(1, "empty file".into())),
    }
    let mut rows = Vec::new();
    for (line, l) in lines {
        if l.is_empty() {
            continue;
        }
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(
                line,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let idx = |s: &str, name: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v < MAX_CAMERA_PIXELS)
                .ok_or_else(|| {
                    err(
                        line,
                        format!("{name} `{s}` is not an index below {MAX_CAMERA_PIXELS}"),
                    )
                })
        };
        let num = |s: &str, name: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, format!("{name} `{s}` is not a finite number")))
        };
        let x = idx(fields[0], "x")?;
        let y = idx(fields[1], "y")?;
        let mag = num(fields[2], "mag")?;
        let phase = num(fields[3], "phase_rad")?;
        if mag < 0.0 {
            return Err(err(line, format!("negative magnitude {mag}")));
        }
        rows.push((line, x, y, Complex64::from_polar(mag, phase)));
    }
    if rows.is_empty() {
        return Err(err(1, "no samples".into()));
    }
    let width = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
    let height = rows.iter().map(|r| r.2).max().unwrap_or(0) + 1;
    let mut values: Vec<Option<Complex64>> = vec![None; width * height];
    for (line, x, y, t) in rows {
        let slot = &mut values[y * width + x];
        if slot.is_some() {
            return Err(err(line, format!("sample ({x}, {y}) given twice")));
        }
        *slot = Some(t);
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                CliError::parse(
                    path,
                    "end of file",
                    format!("missing sample ({}, {})", i % width, i / width),
                )
            })
        })
        .collect::<Result<_>>()?;
    Ok((width, height, values))
}

pub fn image_csv(img: &CameraImage) -> String {
    let mut out = String::with_capacity(img.rates.len() * 24);
    for row in img.rates.chunks(img.width) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    out
}

/// Binary PGM bytes and the `(min, max)` of the affine grey map. A flat
/// image maps to 255 everywhere.
pub fn image_pgm(img: &CameraImage) -> (Vec<u8>, [f64; 2]) {
    let (lo, hi) = (img.min(), img.max());
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.rates.iter().map(|&v| {
        if hi > lo {
            (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8
        } else {
            255
        }
    }));
    (out, [lo, hi])
}

pub fn range_sidecar(range: [f64; 2]) -> String {
    format!("{:?} {:?}\n", range[0], range[1])
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    let mut name = pgm.as_os_str().to_owned();
    name.push(".range");
    PathBuf::from(name)
}

/// Parses a CSV image written by [`image_csv`].
pub fn parse_image_csv(path: &Path, text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut width = None;
    let mut rates = Vec::new();
    let mut height = 0;
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    CliError::parse(path, format!("line {}", i + 1), format!("bad number `{s}`"))
                })
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::parse(
                    path,
                    format!("line {}", i + 1),
                    format!("expected {w} values, found {}", row.len()),
                ))
            }
            _ => {}
        }
        rates.extend(row);
        height += 1;
    }
    Ok((width.unwrap_or(0), height, rates))
}

pub fn load_image_csv(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_image_csv(path, &text)
}

/// Files produced by one command, written only once everything is computed.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn add_image(&mut self, stem: &str, img: &CameraImage) {
        self.add(format!("{stem}.csv"), image_csv(img));
        let (pgm, range) = image_pgm(img);
        self.add(format!("{stem}.pgm"), pgm);
        self.add(format!("{stem}.pgm.range"), range_sidecar(range));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes every file to a temporary name first, then renames them all
    /// into place. On error the temporaries are removed.
    pub fn commit(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut staged = Vec::with_capacity(self.files.len());
        let result = (|| {
            for (name, bytes) in &self.files {
                let tmp = dir.join(format!(".{name}.tmp"));
                fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
                staged.push((tmp, dir.join(name)));
            }
            Ok(())
        })();
        if let Err(e) = result {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
            return Err(e);
        }
        for (tmp, dest) in &staged {
            fs::rename(tmp, dest).map_err(|e| CliError::io(dest, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use imager_core::imaging::ImageMeta;

    fn image(rates: Vec<f64>, width: usize) -> CameraImage {
        CameraImage {
            width,
            height: rates.len() / width,
            pitch: 1e-5,
            rates,
            meta: ImageMeta {
                phi_p: None,
                config_hash: String::new(),
            },
        }
    }

    #[test]
    fn pgm_p2_with_comments() {
        let text = b"P2\n# comment\n3 1\n# another\n255\n0 51 255\n";
        let (w, h, v) = parse_pgm(Path::new("a.pgm"), text).unwrap();
        assert_eq!((w, h), (3, 1));
        assert_eq!(v[0], Complex64::new(0.0, 0.0));
        assert_eq!(v[1], Complex64::new(0.2, 0.0));
        assert_eq!(v[2], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn pgm_p5() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend([255, 0, 255, 0]);
        let (w, h, v) = parse_pgm(Path::new("a.pgm"), &bytes).unwrap();
        assert_eq!((w, h), (2, 2));
        assert_eq!(v[0].re, 1.0);
        assert_eq!(v[3].re, 0.0);
    }

    #[test]
    fn pgm_errors_carry_offsets() {
        let cases: [&[u8]; 4] = [
            b"P6 1 1 255\n\0",
            b"P5 2 2 255\n\0\0",
            b"P2 1 1 65535\n7",
            b"P2 2 1 255\n3 x",
        ];
        for bytes in cases {
            match parse_pgm(Path::new("bad.pgm"), bytes) {
                Err(CliError::Parse { location, .. }) => assert!(location.starts_with("byte")),
                other => panic!("{other:?}"),
            }
        }
        match parse_pgm(Path::new("bad.pgm"), b"P2 2 1 255\n3 x") {
            Err(CliError::Parse { location, .. }) => assert_eq!(location, "byte 13"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_object_phase() {
        let text = b"x,y,mag,phase_rad\n0,0,1.0,3.14159265\n1,0,0.5,0\n";
        let (w, h, v) = parse_object_csv(Path::new("o.csv"), text).unwrap();
        assert_eq!((w, h), (2, 1));
        assert!((v[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-8);
        assert_eq!(v[1], Complex64::new(0.5, 0.0));
    }

    #[test]
    fn csv_object_errors() {
        let missing = b"x,y,mag,phase_rad\n0,0,1,0\n1,1,1,0\n";
        assert!(matches!(
            parse_object_csv(Path::new("o.csv"), missing),
            Err(CliError::Parse { .. })
        ));
        let dup = b"x,y,mag,phase_rad\n0,0,1,0\n0,0,1,0\n";
        match parse_object_csv(Path::new("o.csv"), dup) {
            Err(CliError::Parse { location, .. }) => assert_eq!(location, "line 3"),
            other => panic!("{other:?}"),
        }
        let header = b"a,b,c,d\n0,0,1,0\n";
        match parse_object_csv(Path::new("o.csv"), header) {
            Err(CliError::Parse { location, .. }) => assert_eq!(location, "line 1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rates = vec![0.1, 1.0 / 3.0, -2.5e-300, 4.0, f64::MIN_POSITIVE, 7.0e12];
        let img = image(rates.clone(), 3);
        let (w, h, back) = parse_image_csv(Path::new("x"), &image_csv(&img)).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(back, rates);
    }

    #[test]
    fn flat_image_maps_to_white() {
        let (pgm, range) = image_pgm(&image(vec![2.0; 6], 3));
        assert_eq!(range, [2.0, 2.0]);
        assert!(pgm.ends_with(&[255; 6]));
        let (pgm, range) = image_pgm(&image(vec![0.0, 1.0, 2.0], 3));
        assert_eq!(range, [0.0, 2.0]);
        assert!(pgm.ends_with(&[0, 128, 255]));
        let side = range_sidecar(range);
        let nums: Vec<f64> = side
            .split_whitespace()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(nums, vec![0.0, 2.0]);
    }
}
