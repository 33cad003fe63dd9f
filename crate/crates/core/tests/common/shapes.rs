//! Synthetic binary shapes for stroke-feature properties.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenetext::raster::{Point, Region};

fn seg_dist(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((px - qx).powi(2) + (py - qy).powi(2)).sqrt()
}

/// Pixels whose centres lie within `width / 2` of the polyline.
pub fn thick_polyline(points: &[(f64, f64)], width: f64) -> Region {
    let r = width / 2.0;
    let min_x = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - r - 2.0;
    let min_y = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) - r - 2.0;
    let max_x = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + r + 2.0;
    let max_y = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) + r + 2.0;
    assert!(min_x >= 0.0 && min_y >= 0.0, "shape must stay in the positive quadrant");
    let mut px = Vec::new();
    for y in min_y.floor() as u32..=max_y.ceil() as u32 {
        for x in min_x.floor() as u32..=max_x.ceil() as u32 {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = points.windows(2).any(|w| seg_dist(cx, cy, w[0], w[1]) <= r)
                || (points.len() == 1 && seg_dist(cx, cy, points[0], points[0]) <= r);
            if inside {
                px.push(Point::new(x, y));
            }
        }
    }
    Region::from_pixels(px)
}

fn centre(width: u32) -> f64 {
    200.0 + if width % 2 == 1 { 0.5 } else { 0.0 }
}

/// Straight stroke with flat ends: pixels whose centres fall inside a
/// `length`×`width` rectangle rotated by `angle_deg`.
pub fn straight_stroke(width: u32, length: f64, angle_deg: f64) -> Region {
    let c = centre(width);
    let (s, co) = angle_deg.to_radians().sin_cos();
    let (hl, hw) = (length / 2.0, width as f64 / 2.0);
    let reach = (hl + hw) as u32 + 2;
    let base = c as u32;
    let mut px = Vec::new();
    for y in base - reach..=base + reach {
        for x in base - reach..=base + reach {
            let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
            let u = dx * co + dy * s;
            let v = -dx * s + dy * co;
            if u.abs() <= hl && v.abs() <= hw - 1e-9 {
                px.push(Point::new(x, y));
            }
        }
    }
    Region::from_pixels(px)
}

/// Straight stroke with round caps.
pub fn capsule_stroke(width: u32, length: f64, angle_deg: f64) -> Region {
    let c = centre(width);
    let (s, co) = angle_deg.to_radians().sin_cos();
    let h = length / 2.0;
    thick_polyline(&[(c - co * h, c - s * h), (c + co * h, c + s * h)], width as f64)
}

/// One full sine period of the given length, rotated by `angle_deg`.
pub fn s_curve(width: u32, length: f64, angle_deg: f64) -> Region {
    let c = centre(width);
    let (s, co) = angle_deg.to_radians().sin_cos();
    let amp = length / 8.0;
    let pts: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let t = i as f64 / 200.0;
            let u = (t - 0.5) * length;
            let v = amp * (2.0 * std::f64::consts::PI * t).sin();
            (c + co * u - s * v, c + s * u + co * v)
        })
        .collect();
    thick_polyline(&pts, width as f64)
}

pub fn disk(radius: f64) -> Region {
    let c = radius + 3.0;
    let mut px = Vec::new();
    let n = (2.0 * c) as u32 + 1;
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
            if dx * dx + dy * dy <= radius * radius {
                px.push(Point::new(x, y));
            }
        }
    }
    Region::from_pixels(px)
}

/// Filled convex hull of random points in a disc.
pub fn convex_blob(rng: &mut ChaCha8Rng) -> Region {
    let radius = rng.random_range(8.0..30.0);
    let stretch = rng.random_range(0.5..1.0);
    let c = 40.0;
    let mut pts: Vec<(f64, f64)> = (0..12)
        .map(|_| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let r = radius * rng.random_range(0.6f64..1.0).sqrt();
            (c + r * a.cos(), c + stretch * r * a.sin())
        })
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let hull = hull(&pts);
    let mut px = Vec::new();
    for y in 0..80u32 {
        for x in 0..80u32 {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = (0..hull.len()).all(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0
            });
            if inside {
                px.push(Point::new(x, y));
            }
        }
    }
    Region::from_pixels(px)
}

fn hull(sorted: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut h: Vec<(f64, f64)> = Vec::new();
    for &p in sorted {
        while h.len() >= 2 && cross(h[h.len() - 2], h[h.len() - 1], p) <= 0.0 {
            h.pop();
        }
        h.push(p);
    }
    let lower = h.len() + 1;
    for &p in sorted.iter().rev().skip(1) {
        while h.len() >= lower && cross(h[h.len() - 2], h[h.len() - 1], p) <= 0.0 {
            h.pop();
        }
        h.push(p);
    }
    h.pop();
    h
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rotate a region by 90° clockwise about the origin, then shift back into
/// the positive quadrant.
pub fn rotate90(r: &Region) -> Region {
    let max_y = r.pixels().iter().map(|p| p.y).max().unwrap();
    Region::from_pixels(r.pixels().iter().map(|p| Point::new(max_y - p.y, p.x)).collect())
}
