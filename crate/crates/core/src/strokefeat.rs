//! Stroke support pixels, stroke area estimation and the per-region feature
//! vector used for candidate triage.
//!
//! A stroke support pixel (SSP) is a local maximum of the in-region distance
//! map. Drawing a disc of radius `d_i` at every SSP approximately repaints
//! the stroke, so `2 Σ w_i d_i` estimates the stroke-covered area, where the
//! weight `w_i = 3 / |N_i|` normalises by the number of SSPs in the 3×3 window
//! (three for a straight stroke of odd width).

use serde::{Deserialize, Serialize};

use crate::raster::{distance_transform, BinaryMask, DistanceMap, Point, Region};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrokeSupportPixel {
    pub x: u32,
    pub y: u32,
    /// Distance to the region boundary, in pixels.
    pub d: f64,
    /// SSPs in the 3×3 window, including this one.
    pub neighbor_count: u8,
    pub weight: f64,
}

impl StrokeSupportPixel {
    pub fn new(x: u32, y: u32, d: f64, neighbor_count: u8) -> Self {
        Self {
            x,
            y,
            d,
            neighbor_count,
            weight: 3.0 / neighbor_count as f64,
        }
    }
}

pub const FEATURE_COUNT: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionFeatures {
    pub stroke_area_ratio: f64,
    pub aspect_ratio: f64,
    pub compactness: f64,
    pub hull_ratio: f64,
    pub holes_ratio: f64,
}

impl RegionFeatures {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.stroke_area_ratio,
            self.aspect_ratio,
            self.compactness,
            self.hull_ratio,
            self.holes_ratio,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        Self {
            stroke_area_ratio: a[0],
            aspect_ratio: a[1],
            compactness: a[2],
            hull_ratio: a[3],
            holes_ratio: a[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Local maxima of `dmap` over the 8-neighbourhood, restricted to `mask`
/// foreground. Plateaus count (non-strict maxima); pixels outside the mask
/// have distance 0.
pub fn stroke_support_pixels(mask: &BinaryMask, dmap: &DistanceMap) -> Vec<StrokeSupportPixel> {
    let (w, h) = (mask.width(), mask.height());
    debug_assert_eq!((w, h), (dmap.width(), dmap.height()));
    let d_at = |x: i64, y: i64| -> f64 {
        if mask.get_signed(x, y) {
            dmap.get(x as usize, y as usize)
        } else {
            0.0
        }
    };
    let mut is_ssp = vec![false; w * h];
    let mut found = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let d = dmap.get(x, y);
            let (xi, yi) = (x as i64, y as i64);
            let is_max = NEIGHBORS8.iter().all(|&(dx, dy)| d >= d_at(xi + dx, yi + dy));
            if is_max {
                is_ssp[y * w + x] = true;
                found.push((x, y, d));
            }
        }
    }
    found
        .into_iter()
        .map(|(x, y, d)| {
            let mut count = 1u8;
            for &(dx, dy) in &NEIGHBORS8 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && is_ssp[ny as usize * w + nx as usize]
                {
                    count += 1;
                }
            }
            StrokeSupportPixel::new(x as u32, y as u32, d, count)
        })
        .collect()
}

const NEIGHBORS8: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Sum in ascending order, so the result does not depend on pixel order.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Weighted stroke area `2 Σ w_i d_i`.
pub fn stroke_area(ssps: &[StrokeSupportPixel]) -> f64 {
    2.0 * ordered_sum(ssps.iter().map(|s| s.weight * s.d).collect())
}

/// Unweighted estimate `2 Σ d_i`; exact only for straight odd-width strokes.
pub fn unweighted_stroke_area(ssps: &[StrokeSupportPixel]) -> f64 {
    2.0 * ordered_sum(ssps.iter().map(|s| s.d).collect())
}

/// `min(A_s / A, 1)`.
pub fn area_ratio(stroke_area: f64, area: usize) -> f64 {
    (stroke_area / area as f64).min(1.0)
}

/// SSPs of a region in image coordinates.
pub fn region_ssps(region: &Region) -> Vec<StrokeSupportPixel> {
    let (mask, (ox, oy)) = region.local_mask(1);
    let dmap = distance_transform(&mask);
    let mut ssps = stroke_support_pixels(&mask, &dmap);
    for s in &mut ssps {
        s.x = (s.x as i64 + ox) as u32;
        s.y = (s.y as i64 + oy) as u32;
    }
    ssps
}

pub fn stroke_area_ratio(region: &Region) -> f64 {
    area_ratio(stroke_area(&region_ssps(region)), region.area())
}

pub fn compute_features(region: &Region) -> RegionFeatures {
    let bb = region.bbox();
    let area = region.area() as f64;
    let hull = region.hull_area();
    RegionFeatures {
        stroke_area_ratio: stroke_area_ratio(region),
        aspect_ratio: bb.w as f64 / bb.h as f64,
        compactness: area.sqrt() / region.perimeter().max(1) as f64,
        hull_ratio: area / hull,
        holes_ratio: region.holes_area() as f64 / hull,
    }
}

/// Pixels of `ssps` as points, for overlays.
pub fn ssp_points(ssps: &[StrokeSupportPixel]) -> Vec<Point> {
    ssps.iter().map(|s| Point::new(s.x, s.y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Rect;

    fn bar(w: u32, h: u32) -> Region {
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                px.push(Point::new(x + 5, y + 5));
            }
        }
        Region::from_pixels(px)
    }

    #[test]
    fn odd_width_stroke_has_single_ridge() {
        let r = bar(20, 3);
        let ssps = region_ssps(&r);
        assert!(ssps.iter().all(|s| s.y == 6), "all SSPs on the middle row");
        // every interior middle-row pixel is a support pixel
        for x in 6..24 {
            assert!(ssps.iter().any(|s| s.x == x && s.y == 6));
        }
        for s in ssps.iter().filter(|s| s.x > 6 && s.x < 23) {
            assert_eq!(s.neighbor_count, 3);
            assert_eq!(s.weight, 1.0);
            assert_eq!(s.d, 2.0);
        }
    }

    #[test]
    fn even_width_stroke_has_double_ridge() {
        let r = bar(20, 4);
        let ssps = region_ssps(&r);
        assert!(ssps.iter().all(|s| s.y == 6 || s.y == 7));
        for s in ssps.iter().filter(|s| s.x > 7 && s.x < 22) {
            assert_eq!(s.neighbor_count, 6);
            assert_eq!(s.weight, 0.5);
        }
    }

    #[test]
    fn isolated_pixel() {
        let r = Region::from_pixels(vec![Point::new(2, 2)]);
        let ssps = region_ssps(&r);
        assert_eq!(ssps.len(), 1);
        assert_eq!(ssps[0].neighbor_count, 1);
        assert_eq!(ssps[0].weight, 3.0);
        assert_eq!(ssps[0].d, 1.0);
    }

    #[test]
    fn figure_arithmetic() {
        let straight: Vec<_> = (0..9).map(|i| StrokeSupportPixel::new(i, 0, 3.82, 3)).collect();
        let a = stroke_area(&straight);
        assert!((a - 68.76).abs() < 1e-9);
        assert!((area_ratio(a, 70) - 0.98).abs() < 1e-2);

        let doubled: Vec<_> = (0..18).map(|i| StrokeSupportPixel::new(i, 0, 3.82, 6)).collect();
        let a = stroke_area(&doubled);
        assert!((a - 68.76).abs() < 1e-9);
        assert!((area_ratio(a, 80) - 0.86).abs() < 1e-2);

        assert!((area_ratio(180.24, 187) - 0.96).abs() < 1e-2);
        assert_eq!(stroke_area(&[]), 0.0);
    }

    #[test]
    fn weighted_equals_unweighted_for_straight_ridges() {
        let ssps: Vec<_> = (0..7)
            .map(|i| StrokeSupportPixel::new(i, 0, 1.5 + i as f64, 3))
            .collect();
        assert_eq!(stroke_area(&ssps), unweighted_stroke_area(&ssps));
    }

    #[test]
    fn square_and_ring_features() {
        let f = compute_features(&bar(4, 4));
        assert_eq!(f.aspect_ratio, 1.0);
        assert!((f.compactness - 4.0 / 12.0).abs() < 1e-12);
        assert_eq!(f.hull_ratio, 1.0);
        assert_eq!(f.holes_ratio, 0.0);

        let mut px = Vec::new();
        for y in 0..5 {
            for x in 0..5 {
                if x == 0 || y == 0 || x == 4 || y == 4 {
                    px.push(Point::new(x, y));
                }
            }
        }
        let f = compute_features(&Region::from_pixels(px));
        assert!((f.holes_ratio - 0.36).abs() < 1e-12);
        assert!((f.hull_ratio - 0.64).abs() < 1e-12);
    }

    #[test]
    fn tall_bar_looks_like_a_stroke() {
        let f = compute_features(&bar(5, 40));
        assert!(f.aspect_ratio < 0.5);
        assert!(f.stroke_area_ratio >= 0.9);
    }

    #[test]
    fn filled_disk_is_not_a_stroke() {
        let mut px = Vec::new();
        for y in -16i64..=16 {
            for x in -16i64..=16 {
                if x * x + y * y <= 256 {
                    px.push(Point::new((x + 20) as u32, (y + 20) as u32));
                }
            }
        }
        let r = Region::from_pixels(px);
        assert!(stroke_area_ratio(&r) <= 0.6);
        assert!(r.bbox() == Rect::new(4, 4, 33, 33));
    }
}
