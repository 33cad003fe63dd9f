//! Built-in single-stroke font.
//!
//! Glyphs are polylines in a box where cap height spans y = 0..10 (y grows
//! downward), lowercase x-height starts at y = 4 and descenders reach y = 13.
//! Rendering thickens the strokes and reports per-pixel coverage.

use crate::raster::BinaryMask;

type Stroke = Vec<(f64, f64)>;

/// Characters the font can draw, in codepoint order.
pub const CHARSET: &str = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

/// Uppercase letters and digits.
pub const UPPER_DIGITS: &str = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";

fn seg(points: &[(f64, f64)]) -> Stroke {
    points.to_vec()
}

/// Elliptic arc from `a0` to `a1` degrees (0 = +x, 90 = down).
fn arc(cx: f64, cy: f64, rx: f64, ry: f64, a0: f64, a1: f64) -> Stroke {
    let steps = ((a1 - a0).abs() / 10.0).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| {
            let a = (a0 + (a1 - a0) * i as f64 / steps as f64).to_radians();
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

/// Concatenate pieces into one continuous stroke.
fn chain(parts: Vec<Stroke>) -> Stroke {
    parts.into_iter().flatten().collect()
}

fn dot(x: f64, y: f64) -> Stroke {
    vec![(x, y - 0.3), (x, y + 0.3)]
}

/// Stroke outline of `ch`, or `None` outside [`CHARSET`].
pub fn strokes(ch: char) -> Option<Vec<Stroke>> {
    let g = match ch {
        'A' => vec![
            seg(&[(0.0, 10.0), (3.5, 0.0), (7.0, 10.0)]),
            seg(&[(1.2, 6.5), (5.8, 6.5)]),
        ],
        'B' => vec![
            seg(&[(0.0, 0.0), (0.0, 10.0)]),
            chain(vec![
                seg(&[(0.0, 0.0), (4.0, 0.0)]),
                arc(4.0, 2.5, 2.5, 2.5, -90.0, 90.0),
                seg(&[(0.0, 5.0)]),
            ]),
            chain(vec![
                seg(&[(0.0, 5.0), (4.5, 5.0)]),
                arc(4.5, 7.5, 2.5, 2.5, -90.0, 90.0),
                seg(&[(0.0, 10.0)]),
            ]),
        ],
        'C' => vec![arc(4.0, 5.0, 4.0, 5.0, 320.0, 40.0)],
        'D' => vec![
            seg(&[(0.0, 0.0), (0.0, 10.0)]),
            chain(vec![
                seg(&[(0.0, 0.0), (3.0, 0.0)]),
                arc(3.0, 5.0, 4.0, 5.0, -90.0, 90.0),
                seg(&[(0.0, 10.0)]),
            ]),
        ],
        'E' => vec![
            seg(&[(6.0, 0.0), (0.0, 0.0), (0.0, 10.0), (6.0, 10.0)]),
            seg(&[(0.0, 5.0), (4.5, 5.0)]),
        ],
        'F' => vec![
            seg(&[(6.0, 0.0), (0.0, 0.0), (0.0, 10.0)]),
            seg(&[(0.0, 5.0), (4.5, 5.0)]),
        ],
        'G' => vec![
            arc(4.0, 5.0, 4.0, 5.0, 320.0, 40.0),
            seg(&[(4.5, 5.5), (8.0, 5.5), (8.0, 9.0)]),
        ],
        'H' => vec![
            seg(&[(0.0, 0.0), (0.0, 10.0)]),
            seg(&[(7.0, 0.0), (7.0, 10.0)]),
            seg(&[(0.0, 5.0), (7.0, 5.0)]),
        ],
        'I' => vec![
            seg(&[(3.0, 0.0), (3.0, 10.0)]),
            seg(&[(0.5, 0.0), (5.5, 0.0)]),
            seg(&[(0.5, 10.0), (5.5, 10.0)]),
        ],
        'J' => vec![chain(vec![seg(&[(6.0, 0.0)]), arc(3.0, 7.0, 3.0, 3.0, 0.0, 180.0)])],
        'K' => vec![
            seg(&[(0.0, 0.0), (0.0, 10.0)]),
            seg(&[(6.5, 0.0), (0.0, 6.0)]),
            seg(&[(2.0, 4.5), (6.5, 10.0)]),
        ],
        'L' => vec![seg(&[(0.0, 0.0), (0.0, 10.0), (6.0, 10.0)])],
        'M' => vec![seg(&[(0.0, 10.0), (0.0, 0.0), (4.0, 7.0), (8.0, 0.0), (8.0, 10.0)])],
        'N' => vec![seg(&[(0.0, 10.0), (0.0, 0.0), (7.0, 10.0), (7.0, 0.0)])],
        'O' => vec![arc(4.0, 5.0, 4.0, 5.0, 0.0, 360.0)],
        'P' => vec![chain(vec![
            seg(&[(0.0, 10.0), (0.0, 0.0), (4.0, 0.0)]),
            arc(4.0, 2.75, 2.75, 2.75, -90.0, 90.0),
            seg(&[(0.0, 5.5)]),
        ])],
        'Q' => vec![arc(4.0, 5.0, 4.0, 5.0, 0.0, 360.0), seg(&[(4.5, 7.0), (8.0, 10.5)])],
        'R' => vec![
            chain(vec![
                seg(&[(0.0, 10.0), (0.0, 0.0), (4.0, 0.0)]),
                arc(4.0, 2.75, 2.75, 2.75, -90.0, 90.0),
                seg(&[(0.0, 5.5)]),
            ]),
            seg(&[(3.0, 5.5), (7.0, 10.0)]),
        ],
        'S' => vec![chain(vec![
            arc(3.5, 2.6, 3.2, 2.6, 330.0, 90.0),
            arc(3.5, 7.4, 3.5, 2.6, 270.0, 510.0),
        ])],
        'T' => vec![seg(&[(0.0, 0.0), (7.0, 0.0)]), seg(&[(3.5, 0.0), (3.5, 10.0)])],
        'U' => vec![chain(vec![
            seg(&[(0.0, 0.0)]),
            arc(3.5, 6.5, 3.5, 3.5, 180.0, 0.0),
            seg(&[(7.0, 0.0)]),
        ])],
        'V' => vec![seg(&[(0.0, 0.0), (3.5, 10.0), (7.0, 0.0)])],
        'W' => vec![seg(&[(0.0, 0.0), (2.2, 10.0), (4.5, 3.0), (6.8, 10.0), (9.0, 0.0)])],
        'X' => vec![seg(&[(0.0, 0.0), (7.0, 10.0)]), seg(&[(7.0, 0.0), (0.0, 10.0)])],
        'Y' => vec![
            seg(&[(0.0, 0.0), (3.5, 5.0), (7.0, 0.0)]),
            seg(&[(3.5, 5.0), (3.5, 10.0)]),
        ],
        'Z' => vec![seg(&[(0.0, 0.0), (7.0, 0.0), (0.0, 10.0), (7.0, 10.0)])],
        '0' => vec![arc(3.0, 5.0, 3.0, 5.0, 0.0, 360.0), seg(&[(5.2, 1.5), (0.8, 8.5)])],
        '1' => vec![
            seg(&[(1.0, 2.0), (3.5, 0.0), (3.5, 10.0)]),
            seg(&[(1.0, 10.0), (6.0, 10.0)]),
        ],
        '2' => vec![chain(vec![
            arc(3.0, 3.0, 3.0, 3.0, 200.0, 390.0),
            seg(&[(0.0, 10.0), (6.0, 10.0)]),
        ])],
        '3' => vec![chain(vec![
            arc(3.0, 2.6, 3.0, 2.6, 200.0, 450.0),
            arc(3.0, 7.4, 3.2, 2.6, 270.0, 510.0),
        ])],
        '4' => vec![seg(&[(5.0, 10.0), (5.0, 0.0), (0.0, 7.0), (7.0, 7.0)])],
        '5' => vec![chain(vec![
            seg(&[(6.0, 0.0), (1.0, 0.0)]),
            arc(3.0, 6.8, 3.2, 3.2, 225.0, 500.0),
        ])],
        '6' => vec![chain(vec![
            arc(6.0, 6.8, 6.0, 6.8, 250.0, 180.0),
            arc(3.0, 6.8, 3.0, 3.2, 180.0, 540.0),
        ])],
        '7' => vec![seg(&[(0.0, 0.0), (6.5, 0.0), (2.5, 10.0)])],
        '8' => vec![arc(3.0, 2.5, 2.6, 2.5, 0.0, 360.0), arc(3.0, 7.4, 3.0, 2.6, 0.0, 360.0)],
        '9' => vec![arc(3.0, 3.2, 3.0, 3.2, 0.0, 360.0), seg(&[(6.0, 3.2), (4.0, 10.0)])],
        'a' => vec![arc(2.8, 7.5, 2.8, 2.5, 0.0, 360.0), seg(&[(5.6, 4.0), (5.6, 10.0)])],
        'b' => vec![seg(&[(0.0, 0.0), (0.0, 10.0)]), arc(2.8, 7.0, 2.8, 3.0, 0.0, 360.0)],
        'c' => vec![arc(3.0, 7.0, 3.0, 3.0, 320.0, 40.0)],
        'd' => vec![seg(&[(5.6, 0.0), (5.6, 10.0)]), arc(2.8, 7.0, 2.8, 3.0, 0.0, 360.0)],
        'e' => vec![chain(vec![seg(&[(0.2, 7.0)]), arc(3.0, 7.0, 3.0, 3.0, 360.0, 40.0)])],
        'f' => vec![
            chain(vec![arc(4.5, 2.0, 2.0, 2.0, 330.0, 180.0), seg(&[(2.5, 10.0)])]),
            seg(&[(0.5, 4.5), (5.0, 4.5)]),
        ],
        'g' => vec![
            arc(2.8, 7.0, 2.8, 3.0, 0.0, 360.0),
            chain(vec![seg(&[(5.6, 4.0)]), arc(2.8, 11.0, 2.8, 2.0, 0.0, 150.0)]),
        ],
        'h' => vec![
            seg(&[(0.0, 0.0), (0.0, 10.0)]),
            chain(vec![arc(3.0, 6.5, 2.8, 2.5, 180.0, 360.0), seg(&[(5.8, 10.0)])]),
        ],
        'i' => vec![seg(&[(1.0, 4.5), (1.0, 10.0)]), dot(1.0, 2.1)],
        'j' => vec![
            chain(vec![seg(&[(3.0, 4.5)]), arc(1.5, 11.5, 1.5, 1.5, 0.0, 150.0)]),
            dot(3.0, 2.1),
        ],
        'k' => vec![
            seg(&[(0.0, 0.0), (0.0, 10.0)]),
            seg(&[(5.0, 4.0), (0.0, 8.0)]),
            seg(&[(1.8, 6.8), (5.2, 10.0)]),
        ],
        'l' => vec![chain(vec![
            seg(&[(1.0, 0.0)]),
            arc(2.2, 9.0, 1.2, 1.0, 180.0, 90.0),
            seg(&[(3.0, 10.0)]),
        ])],
        'm' => vec![
            seg(&[(0.0, 4.0), (0.0, 10.0)]),
            chain(vec![arc(2.0, 6.0, 2.0, 2.0, 180.0, 360.0), seg(&[(4.0, 10.0)])]),
            chain(vec![arc(6.0, 6.0, 2.0, 2.0, 180.0, 360.0), seg(&[(8.0, 10.0)])]),
        ],
        'n' => vec![
            seg(&[(0.0, 4.0), (0.0, 10.0)]),
            chain(vec![arc(2.8, 6.5, 2.8, 2.5, 180.0, 360.0), seg(&[(5.6, 10.0)])]),
        ],
        'o' => vec![arc(3.0, 7.0, 3.0, 3.0, 0.0, 360.0)],
        'p' => vec![seg(&[(0.0, 4.0), (0.0, 13.0)]), arc(2.8, 7.0, 2.8, 3.0, 0.0, 360.0)],
        'q' => vec![seg(&[(5.6, 4.0), (5.6, 13.0)]), arc(2.8, 7.0, 2.8, 3.0, 0.0, 360.0)],
        'r' => vec![seg(&[(0.0, 4.0), (0.0, 10.0)]), arc(3.0, 6.5, 3.0, 2.5, 180.0, 300.0)],
        's' => vec![chain(vec![
            arc(2.5, 5.5, 2.3, 1.5, 330.0, 90.0),
            arc(2.5, 8.5, 2.5, 1.5, 270.0, 510.0),
        ])],
        't' => vec![
            chain(vec![
                seg(&[(2.0, 1.5)]),
                arc(3.2, 9.0, 1.2, 1.0, 180.0, 90.0),
                seg(&[(4.0, 10.0)]),
            ]),
            seg(&[(0.0, 4.5), (4.5, 4.5)]),
        ],
        'u' => vec![
            chain(vec![seg(&[(0.0, 4.0)]), arc(2.8, 7.5, 2.8, 2.5, 180.0, 0.0)]),
            seg(&[(5.6, 4.0), (5.6, 10.0)]),
        ],
        'v' => vec![seg(&[(0.0, 4.0), (3.0, 10.0), (6.0, 4.0)])],
        'w' => vec![seg(&[(0.0, 4.0), (2.0, 10.0), (4.0, 5.5), (6.0, 10.0), (8.0, 4.0)])],
        'x' => vec![seg(&[(0.0, 4.0), (6.0, 10.0)]), seg(&[(6.0, 4.0), (0.0, 10.0)])],
        'y' => vec![seg(&[(0.0, 4.0), (3.0, 10.0)]), seg(&[(6.0, 4.0), (1.5, 13.0)])],
        'z' => vec![seg(&[(0.0, 4.0), (6.0, 4.0), (0.0, 10.0), (6.0, 10.0)])],
        _ => return None,
    };
    Some(g)
}

/// Anti-aliased glyph raster: coverage in [0, 1] per pixel.
#[derive(Clone, Debug)]
pub struct GlyphRaster {
    pub width: usize,
    pub height: usize,
    /// Offset of the raster's top-left corner from the glyph origin
    /// (cap-top, left edge of the design box), in pixels.
    pub origin: (i32, i32),
    pub coverage: Vec<f32>,
}

impl GlyphRaster {
    /// Pixels with at least half coverage.
    pub fn mask(&self) -> BinaryMask {
        let bits = self.coverage.iter().map(|&c| c >= 0.5).collect();
        BinaryMask::from_bits(self.width, self.height, bits).expect("raster dimensions are consistent")
    }
}

const SUPERSAMPLE: usize = 4;

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Render `ch` with a cap height of `cap_px` pixels and strokes `stroke_px`
/// wide. Returns `None` for characters outside the font.
pub fn render(ch: char, cap_px: f64, stroke_px: f64) -> Option<GlyphRaster> {
    let strokes = strokes(ch)?;
    let scale = cap_px / 10.0;
    let hw = stroke_px / 2.0;
    let pts: Vec<Vec<(f64, f64)>> = strokes
        .iter()
        .map(|s| s.iter().map(|&(x, y)| (x * scale, y * scale)).collect())
        .collect();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in pts.iter().flatten() {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let ox = (x0 - hw).floor() as i32 - 1;
    let oy = (y0 - hw).floor() as i32 - 1;
    let width = ((x1 + hw).ceil() as i32 + 1 - ox) as usize;
    let height = ((y1 + hw).ceil() as i32 + 1 - oy) as usize;
    let (sw, sh) = (width * SUPERSAMPLE, height * SUPERSAMPLE);
    let mut hit = vec![false; sw * sh];
    let step = 1.0 / SUPERSAMPLE as f64;
    for line in &pts {
        for k in 0..line.len().max(2) - 1 {
            let a = line[k];
            let b = *line.get(k + 1).unwrap_or(&a);
            let bx0 = ((a.0.min(b.0) - hw - ox as f64) / step).floor().max(0.0) as usize;
            let by0 = ((a.1.min(b.1) - hw - oy as f64) / step).floor().max(0.0) as usize;
            let bx1 = (((a.0.max(b.0) + hw - ox as f64) / step).ceil() as usize).min(sw);
            let by1 = (((a.1.max(b.1) + hw - oy as f64) / step).ceil() as usize).min(sh);
            for sy in by0..by1 {
                for sx in bx0..bx1 {
                    let p = (
                        ox as f64 + (sx as f64 + 0.5) * step,
                        oy as f64 + (sy as f64 + 0.5) * step,
                    );
                    if segment_distance(p, a, b) <= hw {
                        hit[sy * sw + sx] = true;
                    }
                }
            }
        }
    }
    let norm = (SUPERSAMPLE * SUPERSAMPLE) as f32;
    let mut coverage = vec![0.0f32; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut n = 0;
            for sy in 0..SUPERSAMPLE {
                let row = (y * SUPERSAMPLE + sy) * sw + x * SUPERSAMPLE;
                n += hit[row..row + SUPERSAMPLE].iter().filter(|&&h| h).count();
            }
            coverage[y * width + x] = n as f32 / norm;
        }
    }
    Some(GlyphRaster {
        width,
        height,
        origin: (ox, oy),
        coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_character_renders() {
        for ch in CHARSET.chars() {
            let g = render(ch, 40.0, 5.0).unwrap();
            assert!(g.mask().count() > 20, "{ch}");
        }
        assert!(render('#', 40.0, 5.0).is_none());
    }

    #[test]
    fn bar_coverage_is_exact_on_pixel_grid() {
        // 'l'-free check: the vertical stem of 'T' at cap 20 is 2 px wide
        let g = render('T', 20.0, 2.0).unwrap();
        let total: f32 = g.coverage.iter().sum();
        // stem 20x2 plus bar 14x2 (plus rounded caps) minus the shared square
        assert!(total > 20.0 * 2.0 + 14.0 * 2.0 - 4.0);
    }
}
