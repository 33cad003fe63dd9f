//! Synthetic colour images with known foreground.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use scenetext::raster::{ColorImage, Point, Region};

pub fn filled_rect(x: u32, y: u32, w: u32, h: u32) -> Region {
    let mut px = Vec::new();
    for yy in y..y + h {
        for xx in x..x + w {
            px.push(Point::new(xx, yy));
        }
    }
    Region::from_pixels(px)
}

/// Three black bars on white. Returns the image, the bar pixels, and the
/// lower 60% of every bar as seed regions.
pub fn bars_image() -> (ColorImage, Vec<Point>, Vec<Region>) {
    let mut img = ColorImage::filled(120, 60, [255, 255, 255]);
    let mut truth = Vec::new();
    let mut seeds = Vec::new();
    for k in 0..3u32 {
        let bar = filled_rect(25 + 25 * k, 15, 6, 30);
        for p in bar.pixels() {
            img.put(p.x as usize, p.y as usize, [0, 0, 0]);
            truth.push(*p);
        }
        seeds.push(filled_rect(25 + 25 * k, 27, 6, 18));
    }
    (img, truth, seeds)
}

/// A noisy line of 3–6 dark bars of varying width on a light background.
/// Seeds are random lower portions of the bars.
pub fn synthetic_line(seed: u64) -> (ColorImage, Vec<Point>, Vec<Region>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 4.0).unwrap();
    let (w, h) = (200usize, 80usize);
    let bg: [f64; 3] = [0; 3].map(|_: i32| rng.random_range(170.0..240.0));
    let fg: [f64; 3] = [0; 3].map(|_: i32| rng.random_range(10.0..80.0));
    let mut is_fg = vec![false; w * h];
    let mut truth = Vec::new();
    let mut seeds = Vec::new();
    let n = rng.random_range(3..=6);
    let height = rng.random_range(18..30u32);
    let top = 25u32;
    let mut x = 20u32;
    for _ in 0..n {
        let bw = rng.random_range(3..8u32);
        let bar = filled_rect(x, top, bw, height);
        for p in bar.pixels() {
            is_fg[p.y as usize * w + p.x as usize] = true;
            truth.push(*p);
        }
        let keep = rng.random_range(height / 2..=height);
        seeds.push(filled_rect(x, top + height - keep, bw, keep));
        x += bw + rng.random_range(8..16u32);
    }
    let mut img = ColorImage::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            let base = if is_fg[y * w + x] { fg } else { bg };
            let c = base.map(|v| (v + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8);
            img.put(x, y, c);
        }
    }
    (img, truth, seeds)
}
