//! Built-in overlay assets.

use super::ImageBuffer;

pub const BUILTIN: [&str; 3] = ["watermark", "logo", "poster_title"];

pub fn builtin(name: &str) -> Option<ImageBuffer> {
    match name {
        "watermark" => Some(watermark()),
        "logo" => Some(logo()),
        "poster_title" => Some(poster_title()),
        _ => None,
    }
}

fn from_fn(w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 4]) -> ImageBuffer {
    let mut px = Vec::with_capacity((w * h * 4) as usize);
    for y in 0..h {
        for x in 0..w {
            px.extend_from_slice(&f(x, y));
        }
    }
    ImageBuffer::new(w, h, px).expect("asset dimensions")
}

/// Translucent white plate with diagonal stripes.
fn watermark() -> ImageBuffer {
    from_fn(24, 10, |x, y| {
        let a = if (x + y) % 4 < 2 { 150 } else { 90 };
        [255, 255, 255, a]
    })
}

/// Opaque orange disc on a transparent square.
fn logo() -> ImageBuffer {
    from_fn(16, 16, |x, y| {
        let (dx, dy) = (x as f64 - 7.5, y as f64 - 7.5);
        if dx * dx + dy * dy <= 49.0 {
            [240, 120, 20, 255]
        } else {
            [0, 0, 0, 0]
        }
    })
}

/// Dark title bar with light glyph blocks.
fn poster_title() -> ImageBuffer {
    from_fn(40, 8, |x, y| {
        let glyph = (2..6).contains(&y) && x % 5 != 0 && (3..37).contains(&x);
        if glyph {
            [235, 235, 235, 255]
        } else {
            [20, 20, 20, 230]
        }
    })
}
