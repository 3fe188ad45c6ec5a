//! RGB images and the colour maps that turn them into manifold-valued
//! fields.

use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Rgb};
use palette::{white_point::D65, FromColor, LabHue, Lch, LinSrgb, Srgb};
use serde::{Deserialize, Serialize};

use tvflow::{Error, Field, GridDomain, Manifold};

/// Decoded 8- or 16-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// 255 or 65535.
    pub max: u16,
    pub pixels: Vec<[u16; 3]>,
    pub format: ImageFormat,
}

fn format_of(path: &Path) -> Result<ImageFormat> {
    match ImageFormat::from_path(path) {
        Ok(f @ (ImageFormat::Png | ImageFormat::Pnm)) => Ok(f),
        _ => Err(Error::UnsupportedFormat(format!("{}: only PNG and PPM are supported", path.display())).into()),
    }
}

impl RgbImage {
    pub fn read(path: &Path) -> Result<Self> {
        let reader = ImageReader::open(path)
            .with_context(|| format!("opening {}", path.display()))?
            .with_guessed_format()?;
        let format = match reader.format() {
            Some(f @ (ImageFormat::Png | ImageFormat::Pnm)) => f,
            other => {
                return Err(Error::UnsupportedFormat(format!("{}: {other:?}", path.display())).into());
            }
        };
        let img = reader.decode().with_context(|| format!("decoding {}", path.display()))?;
        let (width, height) = (img.width() as usize, img.height() as usize);
        let (max, pixels) = match img {
            DynamicImage::ImageRgb8(b) => (255, b.pixels().map(|p| p.0.map(u16::from)).collect()),
            DynamicImage::ImageRgb16(b) => (u16::MAX, b.pixels().map(|p| p.0).collect()),
            other => {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: expected 8- or 16-bit RGB, found {:?}",
                    path.display(),
                    other.color()
                ))
                .into());
            }
        };
        Ok(RgbImage {
            width,
            height,
            max,
            pixels,
            format,
        })
    }

    /// Writes with the format implied by the extension, keeping the bit
    /// depth.
    pub fn write(&self, path: &Path) -> Result<()> {
        let format = format_of(path)?;
        let (w, h) = (self.width as u32, self.height as u32);
        let res = if self.max == 255 {
            let raw = self.pixels.iter().flat_map(|p| p.map(|c| c as u8)).collect();
            ImageBuffer::<Rgb<u8>, Vec<u8>>::from_raw(w, h, raw)
                .expect("pixel count matches")
                .save_with_format(path, format)
        } else {
            let raw = self.pixels.iter().flat_map(|p| *p).collect();
            ImageBuffer::<Rgb<u16>, Vec<u16>>::from_raw(w, h, raw)
                .expect("pixel count matches")
                .save_with_format(path, format)
        };
        res.with_context(|| format!("writing {}", path.display()))
    }

    /// Grid dimensions: rows, then columns.
    pub fn dims(&self) -> [usize; 2] {
        [self.height, self.width]
    }

    fn unit(&self, p: [u16; 3]) -> [f64; 3] {
        p.map(|c| c as f64 / self.max as f64)
    }

    fn quantize(&self, c: f64) -> u16 {
        (c.clamp(0.0, 1.0) * self.max as f64).round() as u16
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Colorspace {
    /// Direction of the RGB vector on the unit sphere; its length is kept
    /// apart as brightness.
    #[value(name = "chromaticity_sphere")]
    ChromaticitySphere,
    /// Hue on the unit circle, lightness and chroma (both divided by 100)
    /// on the flat factor.
    #[value(name = "lch_cylinder")]
    LchCylinder,
}

impl Colorspace {
    pub fn name(&self) -> &'static str {
        match self {
            Colorspace::ChromaticitySphere => "chromaticity_sphere",
            Colorspace::LchCylinder => "lch_cylinder",
        }
    }

    pub fn manifold(&self) -> Manifold {
        match self {
            Colorspace::ChromaticitySphere => Manifold::sphere(3, 1.0),
            Colorspace::LchCylinder => Manifold::cylinder(2),
        }
    }

    /// Maps an image to a field on `domain`. Chromaticity also returns the
    /// brightness as a scalar field. Black pixels are lifted to one unit per
    /// channel so their direction is defined.
    pub fn encode(&self, img: &RgbImage, domain: Arc<GridDomain>) -> Result<(Field, Option<Field>)> {
        let man = Arc::new(self.manifold());
        let n = img.pixels.len();
        match self {
            Colorspace::ChromaticitySphere => {
                let mut dirs = Vec::with_capacity(3 * n);
                let mut bright = Vec::with_capacity(n);
                for &p in &img.pixels {
                    let p = if p == [0, 0, 0] { [1, 1, 1] } else { p };
                    let c = img.unit(p);
                    let b = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                    dirs.extend(c.map(|x| x / b));
                    bright.push(b);
                }
                let u = Field::new(domain.clone(), man, dirs)?;
                let b = Field::new(domain, Arc::new(Manifold::euclidean(1)), bright)?;
                Ok((u, Some(b)))
            }
            Colorspace::LchCylinder => {
                let mut vals = Vec::with_capacity(4 * n);
                for &p in &img.pixels {
                    let [r, g, b] = img.unit(p);
                    let lch: Lch<D65, f64> = Lch::from_color(Srgb::new(r, g, b).into_linear());
                    let h = lch.hue.into_radians();
                    vals.extend([h.cos(), h.sin(), lch.l / 100.0, lch.chroma / 100.0]);
                }
                Ok((Field::new(domain, man, vals)?, None))
            }
        }
    }

    /// Inverse of [`Colorspace::encode`], with `template` supplying size and
    /// bit depth. Out-of-gamut colours are clipped.
    pub fn decode(&self, u: &Field, brightness: Option<&Field>, template: &RgbImage) -> RgbImage {
        let pixels = (0..template.pixels.len())
            .map(|i| {
                let v = u.value(i);
                let rgb = match self {
                    Colorspace::ChromaticitySphere => {
                        let b = brightness.map_or(1.0, |f| f.value(i)[0]);
                        [b * v[0], b * v[1], b * v[2]]
                    }
                    Colorspace::LchCylinder => {
                        let hue = LabHue::from_radians(v[1].atan2(v[0]));
                        let lch = Lch::<D65, f64>::new(100.0 * v[2], (100.0 * v[3]).max(0.0), hue);
                        let s = Srgb::from_linear(LinSrgb::from_color(lch));
                        [s.red, s.green, s.blue]
                    }
                };
                rgb.map(|c| template.quantize(c))
            })
            .collect();
        RgbImage {
            pixels,
            ..template.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvflow::Boundary;

    fn image(max: u16, pixels: Vec<[u16; 3]>, width: usize) -> RgbImage {
        RgbImage {
            width,
            height: pixels.len() / width,
            max,
            pixels,
            format: ImageFormat::Png,
        }
    }

    fn roundtrip(cs: Colorspace, img: &RgbImage) -> RgbImage {
        let dom = Arc::new(GridDomain::new(&img.dims(), 1.0, Boundary::NeumannReflect).unwrap());
        let (u, b) = cs.encode(img, dom).unwrap();
        cs.decode(&u, b.as_ref(), img)
    }

    #[test]
    fn encode_decode_is_lossless_up_to_one_unit() {
        let mut px = Vec::new();
        for r in (0..256).step_by(51) {
            for g in (0..256).step_by(85) {
                for b in [0u16, 7, 128, 255] {
                    px.push([r, g, b]);
                }
            }
        }
        let img = image(255, px, 8);
        for cs in [Colorspace::ChromaticitySphere, Colorspace::LchCylinder] {
            let back = roundtrip(cs, &img);
            for (a, b) in img.pixels.iter().zip(&back.pixels) {
                for k in 0..3 {
                    assert!((a[k] as i32 - b[k] as i32).abs() <= 1, "{cs:?}: {a:?} -> {b:?}");
                }
            }
        }
    }

    #[test]
    fn sixteen_bit_roundtrip() {
        let img = image(u16::MAX, vec![[65535, 1000, 3], [12345, 54321, 0], [0, 0, 0], [7, 7, 7]], 2);
        let back = roundtrip(Colorspace::LchCylinder, &img);
        for (a, b) in img.pixels.iter().zip(&back.pixels) {
            for k in 0..3 {
                assert!((a[k] as i32 - b[k] as i32).abs() <= 1, "{a:?} -> {b:?}");
            }
        }
    }

    #[test]
    fn chromaticity_points_lie_on_sphere() {
        let img = image(255, vec![[255, 0, 0], [0, 0, 0], [10, 20, 30], [1, 1, 1]], 2);
        let dom = Arc::new(GridDomain::new(&img.dims(), 1.0, Boundary::NeumannReflect).unwrap());
        let (u, b) = Colorspace::ChromaticitySphere.encode(&img, dom).unwrap();
        assert_eq!(u.value(0), &[1.0, 0.0, 0.0]);
        // black is lifted to the grey direction
        assert_eq!(u.value(1), u.value(3));
        assert!((b.unwrap().value(0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_extension() {
        let err = img_err(Path::new("x.jpg"));
        assert!(matches!(err.downcast_ref::<Error>(), Some(Error::UnsupportedFormat(_))));
    }

    fn img_err(p: &Path) -> anyhow::Error {
        image(255, vec![[0, 0, 0]], 1).write(p).unwrap_err()
    }
}
