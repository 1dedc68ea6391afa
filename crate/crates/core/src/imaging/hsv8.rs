//! 8-bit HSV matching the arithmetic of the PIL `HSV` image mode, where all
//! three channels live in 0..=255.

use super::ImageBuffer;

fn clip8(v: i64) -> u8 {
    v.clamp(0, 255) as u8
}

pub fn rgb_to_hsv8([r, g, b]: [u8; 3]) -> [u8; 3] {
    let maxc = r.max(g).max(b);
    let minc = r.min(g).min(b);
    if maxc == minc {
        return [0, 0, maxc];
    }
    let cr = f32::from(maxc - minc);
    let s = cr / f32::from(maxc);
    let rc = f32::from(maxc - r) / cr;
    let gc = f32::from(maxc - g) / cr;
    let bc = f32::from(maxc - b) / cr;
    let h: f32 = if r == maxc {
        bc - gc
    } else if g == maxc {
        (2.0 + f64::from(rc) - f64::from(bc)) as f32
    } else {
        (4.0 + f64::from(gc) - f64::from(rc)) as f32
    };
    let h = ((f64::from(h) / 6.0 + 1.0) % 1.0) as f32;
    let uh = clip8((f64::from(h) * 255.0) as i64);
    let us = clip8((f64::from(s) * 255.0) as i64);
    [uh, us, maxc]
}

pub fn hsv8_to_rgb([h, s, v]: [u8; 3]) -> [u8; 3] {
    if s == 0 {
        return [v, v, v];
    }
    let hf = f64::from(h) * 6.0 / 255.0;
    let i = hf.floor() as i32;
    let f = (hf - f64::from(i)) as f32;
    let fs = (f64::from(s) / 255.0) as f32;
    let vf = f64::from(v);
    let p = clip8((vf * (1.0 - f64::from(fs))).round() as i64);
    let q = clip8((vf * (1.0 - f64::from(fs) * f64::from(f))).round() as i64);
    let t = clip8((vf * (1.0 - f64::from(fs) * (1.0 - f64::from(f)))).round() as i64);
    match i % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// How a hue shift treats values that leave 0..=255.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HueMode {
    /// Modulo 256, so shifts compose additively.
    #[default]
    Wrap,
    /// Clamp to 0..=255, as the notebook routine does.
    Clip,
}

/// An image held as 8-bit HSV plus the untouched alpha channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hsv8Image {
    width: u32,
    height: u32,
    hsv: Vec<[u8; 3]>,
    alpha: Vec<u8>,
}

impl Hsv8Image {
    pub fn from_rgba(img: &ImageBuffer) -> Self {
        let (hsv, alpha) = img
            .pixels()
            .chunks_exact(4)
            .map(|p| (rgb_to_hsv8([p[0], p[1], p[2]]), p[3]))
            .unzip();
        Hsv8Image {
            width: img.width(),
            height: img.height(),
            hsv,
            alpha,
        }
    }

    pub fn from_parts(width: u32, height: u32, hsv: Vec<[u8; 3]>, alpha: Vec<u8>) -> Option<Self> {
        let n = width as usize * height as usize;
        (n > 0 && hsv.len() == n && alpha.len() == n).then_some(Hsv8Image {
            width,
            height,
            hsv,
            alpha,
        })
    }

    pub fn to_rgba(&self) -> ImageBuffer {
        let mut px = Vec::with_capacity(self.hsv.len() * 4);
        for (hsv, a) in self.hsv.iter().zip(&self.alpha) {
            px.extend_from_slice(&hsv8_to_rgb(*hsv));
            px.push(*a);
        }
        ImageBuffer::new(self.width, self.height, px).expect("dimensions preserved")
    }

    pub fn hsv(&self) -> &[[u8; 3]] {
        &self.hsv
    }

    /// Adds `shift` to every hue value.
    pub fn shift_hue(&self, shift: i64, mode: HueMode) -> Self {
        let mut out = self.clone();
        for px in &mut out.hsv {
            let h = i64::from(px[0]) + shift;
            px[0] = match mode {
                HueMode::Wrap => h.rem_euclid(256) as u8,
                HueMode::Clip => clip8(h),
            };
        }
        out
    }

    /// Sets the hue of every pixel with non-zero saturation.
    pub fn set_hue(&self, hue: u8) -> Self {
        let mut out = self.clone();
        for px in out.hsv.iter_mut().filter(|p| p[1] > 0) {
            px[0] = hue;
        }
        out
    }
}

/// `floor(h * 255)` as the notebook routine computes it.
pub fn hue_shift_steps(h: f64) -> i64 {
    (h * 255.0).floor() as i64
}
