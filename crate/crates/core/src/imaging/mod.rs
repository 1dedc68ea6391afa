//! Deterministic image kernel driven by the generated widgets.

mod assets;
mod color;
mod hsv8;

use std::io::Cursor;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ImageError;

pub use assets::{builtin as builtin_asset, BUILTIN as BUILTIN_ASSETS};
pub use color::{hsv_to_rgb, rgb_to_hsv};
pub use hsv8::{hsv8_to_rgb, hue_shift_steps, rgb_to_hsv8, HueMode, Hsv8Image};

use color::{hue_delta, linear_to_srgb, srgb_to_linear, to_u8, unit};

/// Row-major RGBA, 8 bits per channel, sRGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidBuffer(format!("zero dimension {width}x{height}")));
        }
        let want = width as usize * height as usize * 4;
        if pixels.len() != want {
            return Err(ImageError::InvalidBuffer(format!(
                "{width}x{height} needs {want} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(ImageBuffer { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Result<Self, ImageError> {
        Self::new(width, height, rgba.repeat(width as usize * height as usize))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2], self.pixels[i + 3]]
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, ImageError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| ImageError::Codec(e.to_string()))?
            .into_rgba8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        image::RgbaImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("buffer length checked at construction")
            .write_to(&mut out, image::ImageFormat::Png)
            .expect("in-memory png encoding");
        out.into_inner()
    }

    /// Applies `f` to the RGB of every pixel; alpha is untouched.
    fn map_rgb<F>(&self, f: F) -> ImageBuffer
    where
        F: Fn([u8; 3], u32, u32) -> [u8; 3] + Sync,
    {
        let w = self.width as usize;
        let mut out = self.clone();
        out.pixels.par_chunks_mut(4).enumerate().for_each(|(i, p)| {
            let rgb = f([p[0], p[1], p[2]], (i % w) as u32, (i / w) as u32);
            p[..3].copy_from_slice(&rgb);
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TonePreset {
    Fall,
    Spring,
}

impl TonePreset {
    /// Hue the preset pulls toward, with its saturation gain and warmth per unit strength.
    fn params(self) -> (f64, f64, f64) {
        match self {
            TonePreset::Fall => (0.08, 0.2, 0.3),
            TonePreset::Spring => (0.25, 0.3, -0.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Margin {
    Top,
    Bottom,
    Left,
    Right,
}

/// One image operation with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpKind {
    Hue {
        h: f64,
        #[serde(default)]
        mode: HueMode,
    },
    Saturation {
        f: f64,
    },
    Lightness {
        d: f64,
    },
    Exposure {
        ev: f64,
    },
    Tint {
        t: f64,
    },
    Temperature {
        w: f64,
    },
    ColorBalance {
        r: f64,
        g: f64,
        b: f64,
    },
    TonePreset {
        name: TonePreset,
        strength: f64,
    },
    Overlay {
        asset: String,
        x: f64,
        y: f64,
        alpha: f64,
    },
    Vignette {
        cx: f64,
        cy: f64,
        radius: f64,
        strength: f64,
    },
    SetHue {
        h: f64,
    },
    TextAnchor {
        margin: Margin,
        offset: f64,
    },
}

/// Width of the vignette falloff beyond its radius, in normalized units.
pub const VIGNETTE_FEATHER: f64 = 0.3;

/// Asset placed by `text_anchor`.
pub const TEXT_ASSET: &str = "poster_title";

fn check(param: &'static str, value: f64, lo: f64, hi: f64, domain: &'static str) -> Result<(), ImageError> {
    if value.is_finite() && (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(ImageError::Domain { param, value, domain })
    }
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Hue { .. } => "hue",
            OpKind::Saturation { .. } => "saturation",
            OpKind::Lightness { .. } => "lightness",
            OpKind::Exposure { .. } => "exposure",
            OpKind::Tint { .. } => "tint",
            OpKind::Temperature { .. } => "temperature",
            OpKind::ColorBalance { .. } => "color_balance",
            OpKind::TonePreset { .. } => "tone_preset",
            OpKind::Overlay { .. } => "overlay",
            OpKind::Vignette { .. } => "vignette",
            OpKind::SetHue { .. } => "set_hue",
            OpKind::TextAnchor { .. } => "text_anchor",
        }
    }

    pub fn validate(&self) -> Result<(), ImageError> {
        const SIGNED: &str = "[-1, 1]";
        const UNIT: &str = "[0, 1]";
        match self {
            OpKind::Hue { h, .. } | OpKind::SetHue { h } => check("h", *h, 0.0, 1.0, UNIT),
            OpKind::Saturation { f } => check("f", *f, 0.0, f64::MAX, "[0, inf)"),
            OpKind::Lightness { d } => check("d", *d, -1.0, 1.0, SIGNED),
            OpKind::Exposure { ev } => check("ev", *ev, -1.0, 1.0, SIGNED),
            OpKind::Tint { t } => check("t", *t, -1.0, 1.0, SIGNED),
            OpKind::Temperature { w } => check("w", *w, -1.0, 1.0, SIGNED),
            OpKind::ColorBalance { r, g, b } => {
                check("r", *r, 0.0, 2.0, "[0, 2]")?;
                check("g", *g, 0.0, 2.0, "[0, 2]")?;
                check("b", *b, 0.0, 2.0, "[0, 2]")
            }
            OpKind::TonePreset { strength, .. } => check("strength", *strength, 0.0, 1.0, UNIT),
            OpKind::Overlay { x, y, alpha, .. } => {
                check("x", *x, 0.0, 1.0, UNIT)?;
                check("y", *y, 0.0, 1.0, UNIT)?;
                check("alpha", *alpha, 0.0, 1.0, UNIT)
            }
            OpKind::Vignette { cx, cy, radius, strength } => {
                check("cx", *cx, 0.0, 1.0, UNIT)?;
                check("cy", *cy, 0.0, 1.0, UNIT)?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(ImageError::Domain {
                        param: "radius",
                        value: *radius,
                        domain: "(0, inf)",
                    });
                }
                check("strength", *strength, 0.0, 1.0, UNIT)
            }
            OpKind::TextAnchor { offset, .. } => check("offset", *offset, 0.0, 1.0, UNIT),
        }
    }
}

/// Applies `op` using the built-in overlay assets.
pub fn apply(img: &ImageBuffer, op: &OpKind) -> Result<ImageBuffer, ImageError> {
    apply_with(img, op, &|_| None)
}

/// Applies `op`; overlay assets are looked up in `assets` first, then among
/// the built-ins.
pub fn apply_with(
    img: &ImageBuffer,
    op: &OpKind,
    assets: &dyn Fn(&str) -> Option<ImageBuffer>,
) -> Result<ImageBuffer, ImageError> {
    op.validate()?;
    let out = match *op {
        OpKind::Hue { h, mode } => {
            let shift = hue_shift_steps(h);
            if mode == HueMode::Wrap && shift.rem_euclid(256) == 0 {
                img.clone()
            } else {
                Hsv8Image::from_rgba(img).shift_hue(shift, mode).to_rgba()
            }
        }
        OpKind::SetHue { h } => {
            let hue = hue_shift_steps(h).clamp(0, 255) as u8;
            Hsv8Image::from_rgba(img).set_hue(hue).to_rgba()
        }
        OpKind::Saturation { f } => img.map_rgb(|[r, g, b], _, _| {
            let (h, s, v) = color::rgb_to_hsv(unit(r), unit(g), unit(b));
            let (r, g, b) = color::hsv_to_rgb(h, (s * f).clamp(0.0, 1.0), v);
            [to_u8(r), to_u8(g), to_u8(b)]
        }),
        OpKind::Lightness { d } => img.map_rgb(|[r, g, b], _, _| {
            let (h, s, l) = color::rgb_to_hsl(unit(r), unit(g), unit(b));
            let (r, g, b) = color::hsl_to_rgb(h, s, (l + d).clamp(0.0, 1.0));
            [to_u8(r), to_u8(g), to_u8(b)]
        }),
        OpKind::Exposure { ev } => {
            let gain = ev.exp2();
            img.map_rgb(|rgb, _, _| rgb.map(|c| to_u8(linear_to_srgb((srgb_to_linear(unit(c)) * gain).min(1.0)))))
        }
        OpKind::Tint { t } => img.map_rgb(|[r, g, b], _, _| {
            [add(r, t * 32.0), add(g, -t * 64.0), add(b, t * 32.0)]
        }),
        OpKind::Temperature { w } => img.map_rgb(|[r, g, b], _, _| [add(r, w * 64.0), g, add(b, -w * 64.0)]),
        OpKind::ColorBalance { r: fr, g: fg, b: fb } => {
            img.map_rgb(|[r, g, b], _, _| [scale(r, fr), scale(g, fg), scale(b, fb)])
        }
        OpKind::TonePreset { name, strength } => tone(img, name, strength),
        OpKind::Vignette { cx, cy, radius, strength } => {
            let (w, h) = (f64::from(img.width), f64::from(img.height));
            img.map_rgb(|rgb, x, y| {
                let u = (f64::from(x) + 0.5) / w - cx;
                let v = (f64::from(y) + 0.5) / h - cy;
                let t = (((u * u + v * v).sqrt() - radius) / VIGNETTE_FEATHER).clamp(0.0, 1.0);
                let k = 1.0 - strength * t * t * (3.0 - 2.0 * t);
                rgb.map(|c| scale(c, k))
            })
        }
        OpKind::Overlay { ref asset, x, y, alpha } => {
            let a = resolve(asset, assets)?;
            overlay(img, &a, x, y, alpha)?
        }
        OpKind::TextAnchor { margin, offset } => {
            let a = resolve(TEXT_ASSET, assets)?;
            let (x, y) = text_anchor_position(margin, offset);
            overlay(img, &a, x, y, 1.0)?
        }
    };
    Ok(out)
}

fn resolve(name: &str, assets: &dyn Fn(&str) -> Option<ImageBuffer>) -> Result<ImageBuffer, ImageError> {
    assets(name)
        .or_else(|| assets::builtin(name))
        .ok_or_else(|| ImageError::UnknownAsset(name.to_string()))
}

fn add(c: u8, delta: f64) -> u8 {
    (f64::from(c) + delta).round().clamp(0.0, 255.0) as u8
}

fn scale(c: u8, k: f64) -> u8 {
    (f64::from(c) * k).round().clamp(0.0, 255.0) as u8
}

fn tone(img: &ImageBuffer, preset: TonePreset, strength: f64) -> ImageBuffer {
    let (target, sat_gain, warmth) = preset.params();
    let pull = 0.5 * strength;
    let sat = 1.0 + sat_gain * strength;
    let shift = warmth * strength * 64.0;
    img.map_rgb(|[r, g, b], _, _| {
        let (h, s, v) = color::rgb_to_hsv(unit(r), unit(g), unit(b));
        let h = h + pull * hue_delta(h, target);
        let (r, g, b) = color::hsv_to_rgb(h, (s * sat).clamp(0.0, 1.0), v);
        let ch = |c: f64, d: f64| (c * 255.0 + d).round().clamp(0.0, 255.0) as u8;
        [ch(r, shift), ch(g, 0.0), ch(b, -shift)]
    })
}

/// Normalized top-left position of a text block placed on `margin`.
pub fn text_anchor_position(margin: Margin, offset: f64) -> (f64, f64) {
    match margin {
        Margin::Top => (offset, 0.0),
        Margin::Bottom => (offset, 1.0),
        Margin::Left => (0.0, offset),
        Margin::Right => (1.0, offset),
    }
}

/// Pixel position of an asset's top-left corner for normalized `(x, y)`.
pub fn overlay_origin(img: &ImageBuffer, asset: &ImageBuffer, x: f64, y: f64) -> (u32, u32) {
    let px = (x * f64::from(img.width - asset.width)).round() as u32;
    let py = (y * f64::from(img.height - asset.height)).round() as u32;
    (px, py)
}

fn overlay(img: &ImageBuffer, asset: &ImageBuffer, x: f64, y: f64, alpha: f64) -> Result<ImageBuffer, ImageError> {
    if asset.width > img.width || asset.height > img.height {
        return Err(ImageError::OverlayTooLarge {
            asset_w: asset.width,
            asset_h: asset.height,
            image_w: img.width,
            image_h: img.height,
        });
    }
    let (ox, oy) = overlay_origin(img, asset, x, y);
    let mut out = img.clone();
    for ay in 0..asset.height {
        for ax in 0..asset.width {
            let src = asset.pixel(ax, ay);
            let a = f64::from(src[3]) / 255.0 * alpha;
            if a == 0.0 {
                continue;
            }
            let i = (((oy + ay) * img.width + ox + ax) * 4) as usize;
            let dst = &mut out.pixels[i..i + 4];
            for c in 0..3 {
                dst[c] = (f64::from(src[c]) * a + f64::from(dst[c]) * (1.0 - a)).round() as u8;
            }
            dst[3] = ((a + f64::from(dst[3]) / 255.0 * (1.0 - a)) * 255.0).round().min(255.0) as u8;
        }
    }
    Ok(out)
}

/// Hue in [0, 1) of a `#RRGGBB` colour; achromatic colours map to 0.
pub fn hex_to_hue(hex: &str) -> Result<f64, ImageError> {
    let malformed = || ImageError::MalformedHex(hex.to_string());
    let digits = hex.strip_prefix('#').ok_or_else(malformed)?;
    if digits.len() != 6 || !digits.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(malformed());
    }
    let ch = |i: usize| u8::from_str_radix(&digits[i..i + 2], 16).map_err(|_| malformed());
    let (h, _, _) = color::rgb_to_hsv(unit(ch(0)?), unit(ch(2)?), unit(ch(4)?));
    Ok(h)
}

/// Synthetic test images.
pub mod samples {
    use super::ImageBuffer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Horizontal hue ramp over a vertical value ramp.
    pub fn gradient(width: u32, height: u32) -> ImageBuffer {
        let mut px = Vec::with_capacity((width * height * 4) as usize);
        for y in 0..height {
            for x in 0..width {
                let h = f64::from(x) / f64::from(width);
                let v = 1.0 - 0.7 * f64::from(y) / f64::from(height.max(2) - 1);
                let (r, g, b) = super::color::hsv_to_rgb(h, 0.8, v);
                px.extend_from_slice(&[super::to_u8(r), super::to_u8(g), super::to_u8(b), 255]);
            }
        }
        ImageBuffer::new(width, height, px).expect("gradient dimensions")
    }

    /// Uniformly random opaque pixels.
    pub fn noise(width: u32, height: u32, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut px = Vec::with_capacity((width * height * 4) as usize);
        for _ in 0..width * height {
            let [r, g, b]: [u8; 3] = rng.gen();
            px.extend_from_slice(&[r, g, b, 255]);
        }
        ImageBuffer::new(width, height, px).expect("noise dimensions")
    }

    /// A 64x64 outdoor-like scene: sky gradient, sun, hills and grain.
    pub fn photo_like() -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let mut px = Vec::with_capacity(64 * 64 * 4);
        for y in 0..64u32 {
            for x in 0..64u32 {
                let (fx, fy) = (f64::from(x), f64::from(y));
                let hill = 40.0 + 6.0 * (fx / 9.0).sin();
                let sun = (fx - 46.0).powi(2) + (fy - 14.0).powi(2) < 36.0;
                let base: [f64; 3] = if sun {
                    [250.0, 220.0, 90.0]
                } else if fy > hill {
                    let d = (fy - hill) / 24.0;
                    [60.0 + 40.0 * d, 130.0 - 30.0 * d, 50.0]
                } else {
                    let t = fy / 40.0;
                    [90.0 + 80.0 * t, 150.0 + 60.0 * t, 235.0 - 10.0 * t]
                };
                let grain: f64 = rng.gen_range(-6.0..6.0);
                for c in base {
                    px.push((c + grain).round().clamp(0.0, 255.0) as u8);
                }
                px.push(255);
            }
        }
        ImageBuffer::new(64, 64, px).expect("photo dimensions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PHOTO_PNG: &[u8] = include_bytes!("../../fixtures/images/photo64.png");
    const PHOTO_HUE_020_PNG: &[u8] = include_bytes!("../../fixtures/images/photo64_hue020_wrap.png");

    fn fixture_dir() -> std::path::PathBuf {
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/images")
    }

    #[test]
    #[ignore = "regenerates the shipped sample images"]
    fn regenerate_sample_images() {
        let dir = fixture_dir();
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("photo64.png"), samples::photo_like().encode_png()).unwrap();
        std::fs::write(dir.join("gradient32x16.png"), samples::gradient(32, 16).encode_png()).unwrap();
    }

    #[test]
    fn shipped_photo_matches_generator() {
        assert_eq!(ImageBuffer::decode_png(PHOTO_PNG).unwrap(), samples::photo_like());
    }

    #[test]
    fn hue_on_photo_matches_pillow() {
        let photo = ImageBuffer::decode_png(PHOTO_PNG).unwrap();
        let want = ImageBuffer::decode_png(PHOTO_HUE_020_PNG).unwrap();
        let got = apply(&photo, &OpKind::Hue { h: 0.2, mode: HueMode::Wrap }).unwrap();
        assert_eq!(got, want);
    }

    fn identity_anchors() -> Vec<OpKind> {
        vec![
            OpKind::Hue { h: 0.0, mode: HueMode::Wrap },
            OpKind::Saturation { f: 1.0 },
            OpKind::Lightness { d: 0.0 },
            OpKind::Exposure { ev: 0.0 },
            OpKind::Tint { t: 0.0 },
            OpKind::Temperature { w: 0.0 },
            OpKind::ColorBalance { r: 1.0, g: 1.0, b: 1.0 },
            OpKind::TonePreset { name: TonePreset::Fall, strength: 0.0 },
            OpKind::TonePreset { name: TonePreset::Spring, strength: 0.0 },
            OpKind::Vignette { cx: 0.3, cy: 0.6, radius: 0.2, strength: 0.0 },
            OpKind::Overlay { asset: "logo".into(), x: 0.5, y: 0.5, alpha: 0.0 },
        ]
    }

    #[test]
    fn identity_anchors_are_exact() {
        for img in [samples::photo_like(), samples::gradient(32, 16), samples::noise(20, 20, 3)] {
            for op in identity_anchors() {
                assert_eq!(apply(&img, &op).unwrap(), img, "{op:?}");
            }
        }
    }

    #[test]
    fn ops_preserve_dimensions_and_alpha() {
        let mut img = samples::noise(24, 12, 9);
        for (i, p) in img.pixels.chunks_mut(4).enumerate() {
            p[3] = (i * 7 % 256) as u8;
        }
        let ops = [
            OpKind::Hue { h: 0.37, mode: HueMode::Clip },
            OpKind::Saturation { f: 1.7 },
            OpKind::Lightness { d: -0.4 },
            OpKind::Exposure { ev: 0.8 },
            OpKind::Tint { t: -0.5 },
            OpKind::Temperature { w: 0.9 },
            OpKind::ColorBalance { r: 2.0, g: 0.3, b: 1.1 },
            OpKind::TonePreset { name: TonePreset::Fall, strength: 0.7 },
            OpKind::Vignette { cx: 0.5, cy: 0.5, radius: 0.1, strength: 1.0 },
            OpKind::SetHue { h: 0.6 },
        ];
        for op in ops {
            let out = apply(&img, &op).unwrap();
            assert_eq!((out.width(), out.height()), (24, 12));
            let alpha = |b: &ImageBuffer| b.pixels().chunks(4).map(|p| p[3]).collect::<Vec<_>>();
            assert_eq!(alpha(&out), alpha(&img), "{op:?}");
        }
    }

    #[test]
    fn hue_half_twice_adds_254() {
        let hsv = Hsv8Image::from_rgba(&samples::gradient(4, 4));
        let half = hue_shift_steps(0.5);
        assert_eq!(half, 127);
        let twice = hsv.shift_hue(half, HueMode::Wrap).shift_hue(half, HueMode::Wrap);
        assert_eq!(twice.hsv(), hsv.shift_hue(254, HueMode::Wrap).hsv());
    }

    // 8-bit RGB storage between the two passes costs at most one hue step per pass.
    #[test]
    fn hue_twice_through_rgb_stays_close() {
        let img = samples::gradient(16, 16);
        let half = OpKind::Hue { h: 0.5, mode: HueMode::Wrap };
        let twice = apply(&apply(&img, &half).unwrap(), &half).unwrap();
        let direct = Hsv8Image::from_rgba(&img).shift_hue(254, HueMode::Wrap).to_rgba();
        for (a, b) in Hsv8Image::from_rgba(&twice).hsv().iter().zip(Hsv8Image::from_rgba(&direct).hsv()) {
            let d = (i16::from(a[0]) - i16::from(b[0])).rem_euclid(256);
            assert!(d.min(256 - d) <= 2, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn set_hue_reads_back() {
        for h in [0.0, 0.15, 0.5, 0.77, 1.0] {
            let img = samples::gradient(32, 16);
            let out = apply(&img, &OpKind::SetHue { h }).unwrap();
            let want = hue_shift_steps(h) as u8;
            let hsv = Hsv8Image::from_rgba(&out);
            for px in hsv.hsv() {
                if px[1] > 0 {
                    let d = (i16::from(px[0]) - i16::from(want)).rem_euclid(256);
                    assert!(d.min(256 - d) <= 1, "h={h} read {px:?}");
                }
            }
            let exact = Hsv8Image::from_rgba(&img).set_hue(want);
            assert!(exact.hsv().iter().filter(|p| p[1] > 0).all(|p| p[0] == want));
        }
    }

    #[test]
    fn set_hue_leaves_grays() {
        let img = ImageBuffer::filled(3, 3, [90, 90, 90, 255]).unwrap();
        assert_eq!(apply(&img, &OpKind::SetHue { h: 0.4 }).unwrap(), img);
    }

    #[test]
    fn overlay_too_large_is_rejected() {
        let img = ImageBuffer::filled(10, 10, [0, 0, 0, 255]).unwrap();
        let err = apply(&img, &OpKind::Overlay { asset: "watermark".into(), x: 0.0, y: 0.0, alpha: 1.0 });
        assert_eq!(
            err.unwrap_err(),
            ImageError::OverlayTooLarge { asset_w: 24, asset_h: 10, image_w: 10, image_h: 10 }
        );
    }

    #[test]
    fn overlay_lands_at_anchor() {
        let img = ImageBuffer::filled(32, 32, [0, 0, 0, 255]).unwrap();
        let out = apply(&img, &OpKind::Overlay { asset: "logo".into(), x: 1.0, y: 1.0, alpha: 1.0 }).unwrap();
        // disc centre sits at (16 + 7.5, 16 + 7.5)
        assert_eq!(out.pixel(23, 23), [240, 120, 20, 255]);
        assert_eq!(out.pixel(8, 8), [0, 0, 0, 255]);
        assert_eq!(out.pixel(16, 16), [0, 0, 0, 255]);
    }

    #[test]
    fn overlay_uses_custom_assets_and_reports_unknown() {
        let img = ImageBuffer::filled(4, 4, [0, 0, 0, 255]).unwrap();
        let dot = ImageBuffer::filled(1, 1, [255, 255, 255, 255]).unwrap();
        let resolver = |n: &str| (n == "dot").then(|| dot.clone());
        let op = OpKind::Overlay { asset: "dot".into(), x: 0.0, y: 1.0, alpha: 0.5 };
        let out = apply_with(&img, &op, &resolver).unwrap();
        assert_eq!(out.pixel(0, 3), [128, 128, 128, 255]);
        assert_eq!(apply(&img, &op).unwrap_err(), ImageError::UnknownAsset("dot".into()));
    }

    #[test]
    fn text_anchor_positions() {
        assert_eq!(text_anchor_position(Margin::Top, 0.3), (0.3, 0.0));
        assert_eq!(text_anchor_position(Margin::Bottom, 0.3), (0.3, 1.0));
        assert_eq!(text_anchor_position(Margin::Left, 0.7), (0.0, 0.7));
        assert_eq!(text_anchor_position(Margin::Right, 0.7), (1.0, 0.7));
        let img = ImageBuffer::filled(64, 64, [255, 0, 0, 255]).unwrap();
        let out = apply(&img, &OpKind::TextAnchor { margin: Margin::Bottom, offset: 0.0 }).unwrap();
        // bar alpha 230 over red
        assert_eq!(out.pixel(0, 56), [43, 18, 18, 255]);
        assert_eq!(out.pixel(0, 55), [255, 0, 0, 255]);
    }

    #[test]
    fn domain_violations() {
        let img = ImageBuffer::filled(2, 2, [1, 2, 3, 255]).unwrap();
        let bad = [
            (OpKind::Hue { h: 1.5, mode: HueMode::Wrap }, "h"),
            (OpKind::Hue { h: f64::NAN, mode: HueMode::Wrap }, "h"),
            (OpKind::Saturation { f: -0.1 }, "f"),
            (OpKind::Lightness { d: 1.1 }, "d"),
            (OpKind::Exposure { ev: -2.0 }, "ev"),
            (OpKind::Tint { t: 3.0 }, "t"),
            (OpKind::Temperature { w: -1.01 }, "w"),
            (OpKind::ColorBalance { r: 1.0, g: 2.5, b: 1.0 }, "g"),
            (OpKind::TonePreset { name: TonePreset::Spring, strength: 1.2 }, "strength"),
            (OpKind::Overlay { asset: "logo".into(), x: -0.1, y: 0.0, alpha: 1.0 }, "x"),
            (OpKind::Vignette { cx: 0.5, cy: 0.5, radius: 0.0, strength: 0.5 }, "radius"),
            (OpKind::SetHue { h: -0.5 }, "h"),
            (OpKind::TextAnchor { margin: Margin::Left, offset: 2.0 }, "offset"),
        ];
        for (op, param) in bad {
            match apply(&img, &op) {
                Err(ImageError::Domain { param: p, .. }) => assert_eq!(p, param),
                other => panic!("{op:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn exposure_brightens_and_darkens() {
        let img = ImageBuffer::filled(1, 1, [100, 150, 200, 255]).unwrap();
        let up = apply(&img, &OpKind::Exposure { ev: 1.0 }).unwrap().pixel(0, 0);
        let down = apply(&img, &OpKind::Exposure { ev: -1.0 }).unwrap().pixel(0, 0);
        // linear 0.12744 * 2 -> 0.25488 -> sRGB 0.5419
        assert_eq!(up[0], 138);
        assert!(down[..3].iter().zip(&up[..3]).all(|(d, u)| d < u));
    }

    #[test]
    fn fixed_formula_values() {
        let img = ImageBuffer::filled(1, 1, [100, 100, 100, 255]).unwrap();
        let px = |op| apply(&img, &op).unwrap().pixel(0, 0);
        assert_eq!(px(OpKind::Tint { t: 0.5 }), [116, 68, 116, 255]);
        assert_eq!(px(OpKind::Temperature { w: -1.0 }), [36, 100, 164, 255]);
        assert_eq!(px(OpKind::ColorBalance { r: 2.0, g: 0.5, b: 3.0 / 2.0 }), [200, 50, 150, 255]);
        assert_eq!(px(OpKind::Lightness { d: 1.0 }), [255, 255, 255, 255]);
        assert_eq!(px(OpKind::Lightness { d: -1.0 }), [0, 0, 0, 255]);
    }

    #[test]
    fn vignette_darkens_corners_only() {
        let img = ImageBuffer::filled(20, 20, [200, 200, 200, 255]).unwrap();
        let out = apply(&img, &OpKind::Vignette { cx: 0.5, cy: 0.5, radius: 0.2, strength: 1.0 }).unwrap();
        assert_eq!(out.pixel(10, 10), [200, 200, 200, 255]);
        assert_eq!(out.pixel(0, 0), [0, 0, 0, 255]);
    }

    #[test]
    fn tone_presets_move_hue_toward_target() {
        let img = ImageBuffer::filled(1, 1, [60, 90, 200, 255]).unwrap();
        let before = rgb_to_hsv(60.0 / 255.0, 90.0 / 255.0, 200.0 / 255.0).0;
        for (name, target) in [(TonePreset::Fall, 0.08), (TonePreset::Spring, 0.25)] {
            let p = apply(&img, &OpKind::TonePreset { name, strength: 1.0 }).unwrap().pixel(0, 0);
            let after = rgb_to_hsv(unit(p[0]), unit(p[1]), unit(p[2])).0;
            assert!(hue_delta(after, target).abs() < hue_delta(before, target).abs(), "{name:?}");
        }
    }

    #[test]
    fn hex_hue() {
        assert_eq!(hex_to_hue("#ff0000").unwrap(), 0.0);
        assert!((hex_to_hue("#00ff00").unwrap() - 1.0 / 3.0).abs() < 1e-9);
        assert!((hex_to_hue("#0000FF").unwrap() - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(hex_to_hue("#ffffff").unwrap(), 0.0);
        assert_eq!(hex_to_hue("#7f7f7f").unwrap(), 0.0);
        for bad in ["ff0000", "#ff00", "#gg0000", "#ff00001", ""] {
            assert_eq!(hex_to_hue(bad).unwrap_err(), ImageError::MalformedHex(bad.into()));
        }
    }

    #[test]
    fn png_round_trip() {
        let img = samples::noise(7, 5, 1);
        assert_eq!(ImageBuffer::decode_png(&img.encode_png()).unwrap(), img);
        assert!(matches!(ImageBuffer::decode_png(b"nope"), Err(ImageError::Codec(_))));
    }

    #[test]
    fn buffer_validation() {
        assert!(ImageBuffer::new(0, 3, vec![]).is_err());
        assert!(ImageBuffer::new(2, 2, vec![0; 15]).is_err());
    }

    #[test]
    fn op_json_shape() {
        let op: OpKind = serde_json::from_str(r#"{"op":"hue","h":0.25}"#).unwrap();
        assert_eq!(op, OpKind::Hue { h: 0.25, mode: HueMode::Wrap });
        let op: OpKind = serde_json::from_str(r#"{"op":"text_anchor","margin":"left","offset":0.5}"#).unwrap();
        assert_eq!(op.name(), "text_anchor");
        assert!(serde_json::from_str::<OpKind>(r#"{"op":"hue","h":0.2,"x":1}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exposure_is_monotone(seed in any::<u64>(), a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let img = samples::noise(8, 8, seed);
            let x = apply(&img, &OpKind::Exposure { ev: lo }).unwrap();
            let y = apply(&img, &OpKind::Exposure { ev: hi }).unwrap();
            prop_assert!(x.pixels().iter().zip(y.pixels()).all(|(p, q)| p <= q));
        }
    }
}
