//! Set-of-Marks overlays: numbered boxes and point glyphs drawn onto a
//! screenshot so an annotator can refer to regions by id.
//!
//! Rendering is deterministic and only touches pixels belonging to a mark's
//! outline, glyph, or label. Each label is drawn touching its mark, so every
//! mark forms one connected region of changed pixels.

use std::path::Path;

use image::{Rgba, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, Point};

#[derive(Debug, Error)]
pub enum SomError {
    #[error("mark {id} lies outside the {width}x{height} image")]
    OutOfBounds { id: u64, width: u32, height: u32 },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl SomError {
    /// The failure came from reading or writing a file.
    pub fn is_io(&self) -> bool {
        matches!(self, SomError::Image(image::ImageError::IoError(_)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarkShape {
    Box { bbox: BBox },
    Point { point: Point },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub id: u64,
    #[serde(flatten)]
    pub shape: MarkShape,
    /// RGB; defaults to a palette entry chosen by the mark's position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[u8; 3]>,
}

impl Mark {
    pub fn bbox(id: u64, bbox: BBox) -> Self {
        Self {
            id,
            shape: MarkShape::Box { bbox },
            color: None,
        }
    }

    pub fn point(id: u64, point: Point) -> Self {
        Self {
            id,
            shape: MarkShape::Point { point },
            color: None,
        }
    }

    pub fn with_color(mut self, rgb: [u8; 3]) -> Self {
        self.color = Some(rgb);
        self
    }
}

/// Green for the first mark and red for the second, matching the start/end
/// convention annotators are told about.
pub const PALETTE: [[u8; 3]; 6] = [
    [0, 200, 0],
    [220, 0, 0],
    [0, 90, 255],
    [255, 140, 0],
    [170, 0, 200],
    [0, 170, 170],
];

const OUTLINE: u32 = 2;
const POINT_RADIUS: i64 = 4;
const SCALE: u32 = 2;
const GLYPH_W: u32 = 3;
const GLYPH_H: u32 = 5;
const PAD: u32 = 2;
const LABEL_H: u32 = GLYPH_H * SCALE + 2 * PAD;
const TEXT: Rgba<u8> = Rgba([255, 255, 255, 255]);

/// 3x5 digit bitmaps, one row per entry, most significant bit on the left.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b001, 0b001, 0b001],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

fn label_width(id: u64) -> u32 {
    let n = id.to_string().len() as u32;
    2 * PAD + n * GLYPH_W * SCALE + (n - 1) * SCALE
}

fn check_bounds(mark: &Mark, width: u32, height: u32) -> Result<(), SomError> {
    let (w, h) = (width as f64, height as f64);
    let inside = match mark.shape {
        MarkShape::Box { bbox } => bbox.x_max <= w && bbox.y_max <= h,
        MarkShape::Point { point } => point.is_finite() && (0.0..=w).contains(&point.x) && (0.0..=h).contains(&point.y),
    };
    if inside && width > 0 && height > 0 {
        Ok(())
    } else {
        Err(SomError::OutOfBounds {
            id: mark.id,
            width,
            height,
        })
    }
}

struct Canvas<'a> {
    img: &'a mut RgbaImage,
}

impl Canvas<'_> {
    fn put(&mut self, x: i64, y: i64, color: Rgba<u8>) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, color);
        }
    }

    fn fill(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgba<u8>) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                self.put(x, y, color);
            }
        }
    }

    fn label(&mut self, id: u64, x: i64, y: i64, color: Rgba<u8>) {
        let w = label_width(id) as i64;
        self.fill(x, y, x + w - 1, y + LABEL_H as i64 - 1, color);
        let mut gx = x + PAD as i64;
        for digit in id.to_string().bytes().map(|b| (b - b'0') as usize) {
            for (row, bits) in DIGITS[digit].iter().enumerate() {
                for col in 0..GLYPH_W {
                    if bits & (1 << (GLYPH_W - 1 - col)) != 0 {
                        let px = gx + (col * SCALE) as i64;
                        let py = y + PAD as i64 + (row as u32 * SCALE) as i64;
                        self.fill(px, py, px + SCALE as i64 - 1, py + SCALE as i64 - 1, TEXT);
                    }
                }
            }
            gx += ((GLYPH_W + 1) * SCALE) as i64;
        }
    }
}

fn clamp_origin(pos: i64, size: u32, limit: u32) -> i64 {
    pos.min(limit as i64 - size as i64).max(0)
}

/// Draws `marks` over a copy of `image`.
pub fn render_som(image: &RgbaImage, marks: &[Mark]) -> Result<RgbaImage, SomError> {
    let (width, height) = image.dimensions();
    for mark in marks {
        check_bounds(mark, width, height)?;
    }
    let mut out = image.clone();
    let mut canvas = Canvas { img: &mut out };
    for (k, mark) in marks.iter().enumerate() {
        let rgb = mark.color.unwrap_or(PALETTE[k % PALETTE.len()]);
        let color = Rgba([rgb[0], rgb[1], rgb[2], 255]);
        let lw = label_width(mark.id);
        match mark.shape {
            MarkShape::Box { bbox } => {
                let x0 = (bbox.x_min.floor() as i64).min(width as i64 - 1);
                let y0 = (bbox.y_min.floor() as i64).min(height as i64 - 1);
                let x1 = (bbox.x_max.ceil() as i64 - 1).max(x0);
                let y1 = (bbox.y_max.ceil() as i64 - 1).max(y0);
                let t = OUTLINE as i64 - 1;
                canvas.fill(x0, y0, x1, (y0 + t).min(y1), color);
                canvas.fill(x0, (y1 - t).max(y0), x1, y1, color);
                canvas.fill(x0, y0, (x0 + t).min(x1), y1, color);
                canvas.fill((x1 - t).max(x0), y0, x1, y1, color);
                // Above the box when there is room, otherwise inside its top.
                let ly = if y0 >= LABEL_H as i64 { y0 - LABEL_H as i64 } else { y0 };
                let lx = clamp_origin(x0, lw, width);
                canvas.label(mark.id, lx, ly, color);
            }
            MarkShape::Point { point } => {
                let (cx, cy) = (point.x.round() as i64, point.y.round() as i64);
                for dy in -POINT_RADIUS..=POINT_RADIUS {
                    for dx in -POINT_RADIUS..=POINT_RADIUS {
                        if dx * dx + dy * dy <= POINT_RADIUS * POINT_RADIUS {
                            canvas.put(cx + dx, cy + dy, color);
                        }
                    }
                }
                let lx = clamp_origin(cx + 2, lw, width);
                let ly = clamp_origin(cy - 3 - (LABEL_H as i64 - 1), LABEL_H, height);
                canvas.label(mark.id, lx, ly, color);
            }
        }
    }
    Ok(out)
}

pub fn load_image(path: &Path) -> Result<RgbaImage, SomError> {
    Ok(image::open(path)?.to_rgba8())
}

pub fn save_png(img: &RgbaImage, path: &Path) -> Result<(), SomError> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn encode_png(img: &RgbaImage) -> Result<Vec<u8>, SomError> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    Ok(bytes)
}
