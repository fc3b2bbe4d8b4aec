//! PPM (P3 ASCII and P6 binary, maxval 255) to point sets.

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

fn malformed(msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("malformed PPM: {msg}"))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, CliError> {
        let tok = self.token().ok_or_else(|| malformed(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(format!("{what} {:?} is not a non-negative integer", String::from_utf8_lossy(tok))))
    }
}

pub fn parse(bytes: &[u8]) -> Result<Image, CliError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match cur.token() {
        Some(b"P6") => true,
        Some(b"P3") => false,
        _ => return Err(malformed("expected magic number P3 or P6")),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(malformed("empty image"));
    }
    if maxval != 255 {
        return Err(malformed(format!("maxval {maxval} unsupported (need 255)")));
    }
    let count = width
        .checked_mul(height)
        .filter(|c| c.checked_mul(3).is_some())
        .ok_or_else(|| malformed("image too large"))?;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(malformed("missing raster"));
        }
        let raster = &bytes[cur.pos + 1..];
        if raster.len() < count * 3 {
            return Err(malformed(format!("raster has {} bytes, expected {}", raster.len(), count * 3)));
        }
        pixels.extend(raster[..count * 3].chunks_exact(3).map(|c| [c[0], c[1], c[2]]));
    } else {
        for i in 0..count {
            let mut px = [0u8; 3];
            for p in &mut px {
                let v = cur.number("sample")?;
                *p = u8::try_from(v).map_err(|_| malformed(format!("sample {v} exceeds maxval at pixel {i}")))?;
            }
            pixels.push(px);
        }
    }
    Ok(Image { width, height, pixels })
}

/// (x, y, r, g, b) per pixel, or with `patch = Some(s)` one point per s×s
/// patch anchor: (x, y, then the s² RGB triples row-major).
pub fn to_points(img: &Image, patch: Option<usize>) -> Result<Vec<Vec<f64>>, CliError> {
    let s = patch.unwrap_or(1);
    if s == 0 {
        return Err(CliError::Usage("patch size must be at least 1".into()));
    }
    if s > img.width || s > img.height {
        return Err(CliError::Usage(format!(
            "patch size {s} exceeds image size {}x{}",
            img.width, img.height
        )));
    }
    let mut out = Vec::with_capacity((img.width - s + 1) * (img.height - s + 1));
    for y in 0..=img.height - s {
        for x in 0..=img.width - s {
            let mut row = Vec::with_capacity(2 + 3 * s * s);
            row.push(x as f64);
            row.push(y as f64);
            for dy in 0..s {
                for dx in 0..s {
                    row.extend(img.pixel(x + dx, y + dy).iter().map(|&c| c as f64));
                }
            }
            out.push(row);
        }
    }
    Ok(out)
}

pub fn header(patch: Option<usize>) -> Vec<String> {
    let s = patch.unwrap_or(1);
    let mut h = vec!["x".to_string(), "y".to_string()];
    if s == 1 {
        h.extend(["r", "g", "b"].map(String::from));
    } else {
        for i in 0..s * s {
            h.extend(["r", "g", "b"].map(|c| format!("{c}{i}")));
        }
    }
    h
}

/// Encodes an image as binary P6.
pub fn encode_p6(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for px in &img.pixels {
        out.extend_from_slice(px);
    }
    out
}

/// Encodes an image as ASCII P3.
pub fn encode_p3(img: &Image) -> String {
    let mut out = format!("P3\n{} {}\n255\n", img.width, img.height);
    for row in img.pixels.chunks(img.width) {
        let cells: Vec<String> = row.iter().map(|p| format!("{} {} {}", p[0], p[1], p[2])).collect();
        out.push_str(&cells.join("  "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_two_by_one() {
        let img = parse(b"P3\n# comment\n2 1\n255\n255 255 255 255 255 255\n").unwrap();
        let pts = to_points(&img, None).unwrap();
        assert_eq!(pts, vec![vec![0.0, 0.0, 255.0, 255.0, 255.0], vec![1.0, 0.0, 255.0, 255.0, 255.0]]);
    }

    #[test]
    fn p3_and_p6_agree() {
        let img = Image {
            width: 3,
            height: 2,
            pixels: vec![[1, 2, 3], [4, 5, 6], [7, 8, 9], [10, 11, 12], [13, 14, 15], [16, 17, 18]],
        };
        let a = parse(&encode_p6(&img)).unwrap();
        let b = parse(encode_p3(&img).as_bytes()).unwrap();
        assert_eq!(a, img);
        assert_eq!(b, img);
    }

    #[test]
    fn patch_anchors() {
        let img = Image {
            width: 3,
            height: 2,
            pixels: (0..6).map(|i| [i as u8; 3]).collect(),
        };
        let pts = to_points(&img, Some(2)).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].len(), 2 + 3 * 4);
        assert_eq!(&pts[1][..5], &[1.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(&pts[1][11..], &[5.0, 5.0, 5.0]);
        assert_eq!(header(Some(2)).len(), 14);
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse(b"P5\n1 1\n255\n\0").is_err());
        assert!(parse(b"P6\n2 2\n255\n\0\0\0").is_err());
        assert!(parse(b"P3\n1 1\n65535\n0 0 0").is_err());
        assert!(parse(b"P3\n1 1\n255\n0 300 0").is_err());
        assert!(parse(b"P3\n1 1\n255\n0 0").is_err());
    }
}
