//! Portable graymap (P5 binary / P2 ASCII) with a plain-text scale sidecar.
//!
//! Pixel values are quantized as `round(v / scale * maxval)` with `scale` the
//! image maximum; the sidecar `<file>.scale` stores `scale` so readers can undo
//! the normalization for images outside the 8-bit range.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmEncoding {
    /// `P5`
    Binary,
    /// `P2`
    Ascii,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".scale");
    PathBuf::from(s)
}

/// Writes `img` (negative values clipped to 0) and its scale sidecar.
pub fn write_pgm(path: &Path, img: &ImageGrid, encoding: PgmEncoding, maxval: u16) -> Result<()> {
    if maxval == 0 {
        return Err(Error::InvalidParameter("maxval must be positive".into()));
    }
    let scale = img.max().max(0.0);
    let levels: Vec<u16> = img
        .iter()
        .map(|&v| {
            if scale == 0.0 {
                0
            } else {
                (v.clamp(0.0, scale) / scale * maxval as f64).round() as u16
            }
        })
        .collect();

    let mut out = Vec::new();
    let magic = match encoding {
        PgmEncoding::Binary => "P5",
        PgmEncoding::Ascii => "P2",
    };
    write!(out, "{magic}\n{} {}\n{maxval}\n", img.cols(), img.rows())?;
    match encoding {
        PgmEncoding::Binary => {
            for &l in &levels {
                if maxval < 256 {
                    out.push(l as u8);
                } else {
                    out.extend_from_slice(&l.to_be_bytes());
                }
            }
        }
        PgmEncoding::Ascii => {
            for row in levels.chunks(img.cols()) {
                let line: Vec<String> = row.iter().map(|l| l.to_string()).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        }
    }
    fs::write(path, out)?;
    fs::write(sidecar_path(path), format!("scale = {scale:e}\nmaxval = {maxval}\n"))?;
    Ok(())
}

/// Reads a P2 or P5 file; applies the sidecar scale when one is present.
pub fn read_pgm(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path)?;
    let mut cursor = HeaderCursor { bytes: &bytes, pos: 0 };
    let magic = cursor.token()?;
    let cols = cursor.number()?;
    let rows = cursor.number()?;
    let maxval = cursor.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("maxval {maxval} out of range")));
    }
    let n = rows * cols;
    let levels: Vec<f64> = match magic.as_str() {
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            let start = cursor.pos + 1;
            let width = if maxval < 256 { 1 } else { 2 };
            let raster = bytes
                .get(start..start + n * width)
                .ok_or_else(|| Error::Format("truncated raster".into()))?;
            if width == 1 {
                raster.iter().map(|&b| b as f64).collect()
            } else {
                raster
                    .chunks_exact(2)
                    .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64)
                    .collect()
            }
        }
        "P2" => (0..n)
            .map(|_| cursor.number().map(|v| v as f64))
            .collect::<Result<_>>()?,
        other => return Err(Error::Format(format!("unsupported magic {other:?}"))),
    };
    if levels.iter().any(|&l| l > maxval as f64) {
        return Err(Error::Format("sample exceeds maxval".into()));
    }

    let sidecar = sidecar_path(path);
    let values = if sidecar.exists() {
        let scale = parse_scale(&fs::read_to_string(&sidecar)?)?;
        levels.iter().map(|l| l / maxval as f64 * scale).collect()
    } else {
        levels
    };
    ImageGrid::new(rows, cols, values)
}

fn parse_scale(text: &str) -> Result<f64> {
    for line in text.lines() {
        if let Some((key, value)) = line.split_once('=') {
            if key.trim() == "scale" {
                return value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad scale value {value:?}")));
            }
        }
    }
    Err(Error::Format("sidecar has no scale entry".into()))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn token(&mut self) -> Result<String> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while !matches!(self.bytes.get(self.pos), Some(b'\n') | None) {
                        self.pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("unexpected end of file".into())),
            }
        }
        let start = self.pos;
        while matches!(self.bytes.get(self.pos), Some(b) if !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse().map_err(|_| Error::Format(format!("expected a number, found {t:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("sfista-pgm-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn binary_round_trip_within_quantization() {
        let img = ImageGrid::from_fn(7, 5, |r, c| 1.0 + (r * 5 + c) as f64 * 25.0);
        for &maxval in &[255u16, 65535] {
            let path = tmp(&format!("bin{maxval}.pgm"));
            write_pgm(&path, &img, PgmEncoding::Binary, maxval).unwrap();
            let back = read_pgm(&path).unwrap();
            let step = img.max() / maxval as f64;
            assert!(back.max_abs_diff(&img).unwrap() <= 0.5 * step + 1e-9);
        }
    }

    #[test]
    fn ascii_round_trip_and_sidecar() {
        let img = ImageGrid::from_fn(3, 4, |r, c| (r + c) as f64 * 300.0);
        let path = tmp("ascii.pgm");
        write_pgm(&path, &img, PgmEncoding::Ascii, 1000).unwrap();
        let text = fs::read_to_string(sidecar_path(&path)).unwrap();
        assert_eq!(parse_scale(&text).unwrap(), 1500.0);
        let back = read_pgm(&path).unwrap();
        assert!(back.max_abs_diff(&img).unwrap() <= 0.75 + 1e-9);
    }

    #[test]
    fn reads_comments_and_plain_files() {
        let path = tmp("plain.pgm");
        fs::write(&path, "P2\n# a comment\n2 1\n# another\n9\n3 9\n").unwrap();
        let _ = fs::remove_file(sidecar_path(&path));
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.shape(), (1, 2));
        assert_eq!(img.as_slice(), &[3.0, 9.0]);
    }

    #[test]
    fn rejects_truncated_raster() {
        let path = tmp("short.pgm");
        fs::write(&path, b"P5\n4 4\n255\n\x01\x02").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Format(_))));
    }
}
