//! Image and mask primitives: channel extraction, connected components,
//! exact Euclidean distance transform and region geometry.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit RGB image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!("empty image {width}x{height}")));
        }
        if data.len() != 3 * width * height {
            return Err(Error::InvalidInput(format!(
                "rgb buffer of {} bytes does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0);
        let data = rgb.iter().copied().cycle().take(3 * width * height).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w as usize, h as usize, rgb.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Area-weighted resampling by `factor` (≤ 1 shrinks).
    pub fn resize(&self, factor: f64) -> ColorImage {
        let nw = ((self.width as f64 * factor).round() as usize).max(1);
        let nh = ((self.height as f64 * factor).round() as usize).max(1);
        if nw == self.width && nh == self.height {
            return self.clone();
        }
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        let filter = if factor < 1.0 {
            image::imageops::FilterType::Triangle
        } else {
            image::imageops::FilterType::CatmullRom
        };
        let out = image::imageops::resize(&buf, nw as u32, nh as u32, filter);
        ColorImage {
            width: nw,
            height: nh,
            data: out.into_raw(),
        }
    }
}

/// 8-bit single-channel image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "gray buffer of {} bytes does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn inverted(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 255 - v).collect(),
        }
    }
}

/// Row-major boolean mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask of {} bits does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    /// Mask of the given points in a canvas of `width`×`height`.
    pub fn from_points(width: usize, height: usize, points: &[Point]) -> Self {
        let mut m = Self::new(width, height);
        for p in points {
            m.set(p.x as usize, p.y as usize, true);
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Bounds-checked lookup; anything outside the canvas is background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.push(Point::new(x as u32, y as u32));
                }
            }
        }
        out
    }

    /// Tight bounding box of the foreground, if any.
    pub fn bounding_box(&self) -> Option<Rect> {
        let pts = self.points();
        Rect::enclosing(&pts)
    }

    pub fn crop(&self, r: Rect) -> BinaryMask {
        let mut out = BinaryMask::new(r.w as usize, r.h as usize);
        for y in 0..r.h as usize {
            for x in 0..r.w as usize {
                out.set(x, y, self.get(r.x as usize + x, r.y as usize + y));
            }
        }
        out
    }

    /// Nearest-neighbour resampling to `width`×`height`.
    pub fn resize_nearest(&self, width: usize, height: usize) -> BinaryMask {
        let mut out = BinaryMask::new(width, height);
        if self.width == 0 || self.height == 0 {
            return out;
        }
        let (fx, fy) = (self.width as f64 / width as f64, self.height as f64 / height as f64);
        for y in 0..height {
            let sy = (((y as f64 + 0.5) * fy) as usize).min(self.height - 1);
            for x in 0..width {
                let sx = (((x as f64 + 0.5) * fx) as usize).min(self.width - 1);
                out.bits[y * width + x] = self.get(sx, sy);
            }
        }
        out
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let g = img.to_luma8();
        let (w, h) = g.dimensions();
        let bits = g.into_raw().into_iter().map(|v| v >= 128).collect();
        Self::from_bits(w as usize, h as usize, bits)
    }

    /// 1-channel PNG, foreground 255 and background 0.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("mask length checked at construction");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned box `(x, y, w, h)` in pixels; `x + w` is exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn enclosing(points: &[Point]) -> Option<Rect> {
        let first = points.first()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Some(Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn union(&self, o: &Rect) -> Rect {
        let x0 = self.x.min(o.x);
        let y0 = self.y.min(o.y);
        let x1 = self.right().max(o.right());
        let y1 = self.bottom().max(o.bottom());
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn intersection(&self, o: &Rect) -> Option<Rect> {
        let x0 = self.x.max(o.x);
        let y0 = self.y.max(o.y);
        let x1 = self.right().min(o.right());
        let y1 = self.bottom().min(o.bottom());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn iou(&self, o: &Rect) -> f64 {
        let inter = self.intersection(o).map_or(0, |r| r.area());
        if inter == 0 {
            return 0.0;
        }
        inter as f64 / (self.area() + o.area() - inter) as f64
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.y >= self.y && p.x < self.right() && p.y < self.bottom()
    }

    /// Grow by `dx`/`dy` on every side, clipped to a `width`×`height` canvas.
    pub fn expand_clipped(&self, dx: u32, dy: u32, width: usize, height: usize) -> Rect {
        let x0 = self.x.saturating_sub(dx);
        let y0 = self.y.saturating_sub(dy);
        let x1 = (self.right() + dx).min(width as u32);
        let y1 = (self.bottom() + dy).min(height as u32);
        Rect::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }

    /// Map a box from a scaled image back to original coordinates.
    pub fn scaled(&self, factor: f64) -> Rect {
        let x0 = (self.x as f64 * factor).floor();
        let y0 = (self.y as f64 * factor).floor();
        let x1 = (self.right() as f64 * factor).ceil();
        let y1 = (self.bottom() as f64 * factor).ceil();
        Rect::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32)
    }
}

/// A connected pixel set with its cached geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pixels: Vec<Point>,
    bbox: Rect,
    perimeter: usize,
    holes_area: usize,
    hull_area: f64,
}

impl Region {
    /// Builds a region from its pixel list, computing all geometry.
    ///
    /// Panics if `pixels` is empty.
    pub fn from_pixels(mut pixels: Vec<Point>) -> Self {
        assert!(!pixels.is_empty(), "a region needs at least one pixel");
        pixels.sort_unstable_by_key(|p| (p.y, p.x));
        pixels.dedup();
        let bbox = Rect::enclosing(&pixels).expect("nonempty");
        let g = region_geometry(&pixels);
        Self {
            pixels,
            bbox,
            perimeter: g.perimeter,
            holes_area: g.holes_area,
            hull_area: g.hull_area,
        }
    }

    /// Pixels in raster order.
    pub fn pixels(&self) -> &[Point] {
        &self.pixels
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn perimeter(&self) -> usize {
        self.perimeter
    }

    pub fn holes_area(&self) -> usize {
        self.holes_area
    }

    pub fn hull_area(&self) -> f64 {
        self.hull_area
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (sx, sy) = self
            .pixels
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x as f64, sy + p.y as f64));
        (sx / n, sy / n)
    }

    /// Region mask over its bounding box grown by `pad` pixels on each side.
    /// Returns the mask and the image coordinate of its top-left corner.
    pub fn local_mask(&self, pad: u32) -> (BinaryMask, (i64, i64)) {
        let ox = self.bbox.x as i64 - pad as i64;
        let oy = self.bbox.y as i64 - pad as i64;
        let w = (self.bbox.w + 2 * pad) as usize;
        let h = (self.bbox.h + 2 * pad) as usize;
        let mut m = BinaryMask::new(w, h);
        for p in &self.pixels {
            m.set((p.x as i64 - ox) as usize, (p.y as i64 - oy) as usize, true);
        }
        (m, (ox, oy))
    }

    /// Shift every pixel by a non-negative offset.
    pub fn translated(&self, dx: u32, dy: u32) -> Region {
        let mut r = self.clone();
        for p in &mut r.pixels {
            p.x += dx;
            p.y += dy;
        }
        r.bbox.x += dx;
        r.bbox.y += dy;
        r
    }
}

/// Exact Euclidean distance of every pixel to the nearest background pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DistanceMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Luma of an RGB image, `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_gray(img: &ColorImage) -> GrayImage {
    let data = img.data.chunks_exact(3).map(|c| luma(c[0], c[1], c[2])).collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

/// HSV hue in `[0°, 360°)` scaled to `[0, 255]`; achromatic pixels map to 0.
pub fn to_hue(img: &ColorImage) -> GrayImage {
    let data = img.data.chunks_exact(3).map(|c| hue(c[0], c[1], c[2])).collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

#[inline]
pub fn hue(r: u8, g: u8, b: u8) -> u8 {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    if max == min {
        return 0;
    }
    let c = max - min;
    let h = if max == r {
        ((g - b) / c).rem_euclid(6.0)
    } else if max == g {
        (b - r) / c + 2.0
    } else {
        (r - g) / c + 4.0
    };
    let deg = 60.0 * h;
    ((deg / 360.0 * 255.0).round() as u32).min(255) as u8
}

/// Exact Euclidean distance transform; the canvas border counts as
/// background, so every foreground pixel has a finite distance ≥ 1.
pub fn distance_transform(mask: &BinaryMask) -> DistanceMap {
    let (w, h) = (mask.width, mask.height);
    let pw = w + 2;
    let ph = h + 2;
    // Column pass on the padded grid: 1-D distance to the nearest background
    // pixel is exact with two sweeps.
    let mut sq = vec![0.0f64; pw * ph];
    let fg = |x: usize, y: usize| -> bool { x >= 1 && y >= 1 && x <= w && y <= h && mask.get(x - 1, y - 1) };
    let mut col = vec![0usize; ph];
    for x in 0..pw {
        let mut last: Option<usize> = None;
        for y in 0..ph {
            if !fg(x, y) {
                last = Some(y);
                col[y] = 0;
            } else {
                col[y] = last.map_or(usize::MAX, |l| y - l);
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..ph).rev() {
            if !fg(x, y) {
                next = Some(y);
            } else if let Some(n) = next {
                col[y] = col[y].min(n - y);
            }
        }
        for y in 0..ph {
            let d = col[y] as f64;
            sq[y * pw + x] = d * d;
        }
    }
    // Row pass: lower envelope of parabolas.
    let mut f = vec![0.0f64; pw];
    let mut d = vec![0.0f64; pw];
    let mut v = vec![0usize; pw];
    let mut z = vec![0.0f64; pw + 1];
    let mut values = vec![0.0f64; w * h];
    for y in 1..=h {
        f.copy_from_slice(&sq[y * pw..(y + 1) * pw]);
        lower_envelope(&f, &mut d, &mut v, &mut z);
        for x in 1..=w {
            if mask.get(x - 1, y - 1) {
                values[(y - 1) * w + (x - 1)] = d[x].sqrt();
            }
        }
    }
    DistanceMap {
        width: w,
        height: h,
        values,
    }
}

/// Exact Euclidean distance from every pixel to the nearest set pixel
/// (0 on set pixels). An empty mask yields `f64::INFINITY` everywhere.
pub fn distance_to_set(mask: &BinaryMask) -> DistanceMap {
    let (w, h) = (mask.width, mask.height);
    if mask.is_empty() {
        return DistanceMap {
            width: w,
            height: h,
            values: vec![f64::INFINITY; w * h],
        };
    }
    // large finite stand-in for "no set pixel in this column"
    let far = ((w + h) * (w + h)) as f64 * 4.0;
    let mut sq = vec![far; w * h];
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if mask.get(x, y) {
                last = Some(y);
            }
            if let Some(l) = last {
                sq[y * w + x] = ((y - l) * (y - l)) as f64;
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..h).rev() {
            if mask.get(x, y) {
                next = Some(y);
            }
            if let Some(n) = next {
                sq[y * w + x] = sq[y * w + x].min(((n - y) * (n - y)) as f64);
            }
        }
    }
    let mut d = vec![0.0f64; w];
    let mut v = vec![0usize; w];
    let mut z = vec![0.0f64; w + 1];
    let mut values = vec![0.0f64; w * h];
    for y in 0..h {
        lower_envelope(&sq[y * w..(y + 1) * w], &mut d, &mut v, &mut z);
        for x in 0..w {
            values[y * w + x] = d[x].sqrt();
        }
    }
    DistanceMap {
        width: w,
        height: h,
        values,
    }
}

fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let intersect = |p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
        let mut s = intersect(v[k]);
        // z[0] is -inf, so k never underflows
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        }
    }
}

/// Maximal connected foreground sets, ordered by their first pixel in raster
/// order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Region> {
    component_pixels(mask, connectivity)
        .into_iter()
        .map(Region::from_pixels)
        .collect()
}

/// Same partition as [`connected_components`] without the geometry.
pub fn component_pixels(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Vec<Point>> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            pixels.push(Point::new(x as u32, y as u32));
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push(pixels);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    /// Region pixels with at least one 4-neighbour outside the region.
    pub perimeter: usize,
    /// Area of the convex hull of all pixel-square corners.
    pub hull_area: f64,
    /// Background pixels enclosed by the region (4-connected background).
    pub holes_area: usize,
}

/// Perimeter, convex-hull area and hole area of a pixel set.
pub fn region_geometry(pixels: &[Point]) -> Geometry {
    let bbox = Rect::enclosing(pixels).expect("region_geometry needs pixels");
    // local mask with a one pixel frame of background
    let w = bbox.w as usize + 2;
    let h = bbox.h as usize + 2;
    let mut m = BinaryMask::new(w, h);
    for p in pixels {
        m.set((p.x - bbox.x) as usize + 1, (p.y - bbox.y) as usize + 1, true);
    }

    let mut perimeter = 0;
    for p in pixels {
        let (x, y) = ((p.x - bbox.x) as i64 + 1, (p.y - bbox.y) as i64 + 1);
        if Connectivity::Four
            .offsets()
            .iter()
            .any(|&(dx, dy)| !m.get_signed(x + dx, y + dy))
        {
            perimeter += 1;
        }
    }

    // background reachable from the frame
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    outside[0] = true;
    queue.push_back(0usize);
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for &(dx, dy) in Connectivity::Four.offsets() {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if !outside[j] && !m.bits[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        }
    }
    let holes_area = (0..w * h).filter(|&i| !m.bits[i] && !outside[i]).count();

    // Per row only the extreme pixels can contribute hull corners.
    let mut extremes: Vec<(u32, u32, u32)> = Vec::with_capacity(bbox.h as usize);
    for p in pixels {
        match extremes.iter_mut().find(|e| e.0 == p.y) {
            Some(e) => {
                e.1 = e.1.min(p.x);
                e.2 = e.2.max(p.x);
            }
            None => extremes.push((p.y, p.x, p.x)),
        }
    }
    let mut corners = Vec::with_capacity(extremes.len() * 4);
    for &(y, x0, x1) in &extremes {
        let (y, x0, x1) = (y as i64, x0 as i64, x1 as i64);
        corners.push((x0, y));
        corners.push((x0, y + 1));
        corners.push((x1 + 1, y));
        corners.push((x1 + 1, y + 1));
    }
    let hull_area = convex_hull_area(&mut corners);

    Geometry {
        perimeter,
        hull_area,
        holes_area,
    }
}

/// Monotone-chain convex hull followed by the shoelace formula.
fn convex_hull_area(points: &mut Vec<(i64, i64)>) -> f64 {
    points.sort_unstable();
    points.dedup();
    if points.len() < 3 {
        return 0.0;
    }
    let cross =
        |o: (i64, i64), a: (i64, i64), b: (i64, i64)| -> i64 { (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0) };
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(points.len() * 2);
    for &p in points.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in points.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    let mut twice = 0i64;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        twice += a.0 * b.1 - b.0 * a.1;
    }
    twice.abs() as f64 / 2.0
}
