use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major 8-bit image, `channels` values per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::InvalidValue(format!(
                "image data has {} bytes, expected {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let o = (y * self.width + x) * self.channels;
        &self.data[o..o + self.channels]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    fn fits(&self, img: &ImageBuffer) -> bool {
        self.x.checked_add(self.w).is_some_and(|r| r <= img.width)
            && self.y.checked_add(self.h).is_some_and(|b| b <= img.height)
    }

    fn overlaps(&self, o: &Rect) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }
}

/// Flips the contents of both mirror rects horizontally and swaps them.
pub fn mirror_reflect(img: &ImageBuffer, left: Rect, right: Rect) -> Result<ImageBuffer> {
    if img.data.len() != img.width * img.height * img.channels {
        return Err(Error::InvalidValue("image buffer size mismatch".into()));
    }
    if (left.w, left.h) != (right.w, right.h) {
        return Err(Error::InvalidRect(format!("sizes differ: {left:?} vs {right:?}")));
    }
    for r in [left, right] {
        if !r.fits(img) {
            return Err(Error::InvalidRect(format!(
                "{r:?} outside {}x{} image",
                img.width, img.height
            )));
        }
    }
    if left.overlaps(&right) {
        return Err(Error::InvalidRect(format!("{left:?} overlaps {right:?}")));
    }
    let c = img.channels;
    let mut out = img.clone();
    for (src, dst) in [(left, right), (right, left)] {
        for row in 0..src.h {
            for col in 0..src.w {
                let s = ((src.y + row) * img.width + src.x + col) * c;
                let d = ((dst.y + row) * img.width + dst.x + (dst.w - 1 - col)) * c;
                out.data[d..d + c].copy_from_slice(&img.data[s..s + c]);
            }
        }
    }
    Ok(out)
}
