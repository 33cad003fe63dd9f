use scenetext::lines::BottomLine;
use scenetext::raster::{ColorImage, Point, Rect, Region};
use scenetext::segment::{Label, TriStateLabelMap};

pub const RED: [u8; 3] = [255, 0, 0];
pub const GREEN: [u8; 3] = [0, 200, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];
pub const YELLOW: [u8; 3] = [255, 220, 0];

fn put(img: &mut ColorImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
        img.put(x as usize, y as usize, c);
    }
}

pub fn rect_outline(img: &mut ColorImage, r: &Rect, c: [u8; 3]) {
    if r.is_empty() {
        return;
    }
    let (x0, y0, x1, y1) = (r.x as i64, r.y as i64, r.right() as i64 - 1, r.bottom() as i64 - 1);
    for x in x0..=x1 {
        put(img, x, y0, c);
        put(img, x, y1, c);
    }
    for y in y0..=y1 {
        put(img, x0, y, c);
        put(img, x1, y, c);
    }
}

/// The fitted bottom line across the horizontal extent of `span`.
pub fn bottom_line(img: &mut ColorImage, line: &BottomLine, span: &Rect, c: [u8; 3]) {
    for x in span.x..span.right() {
        let y = line.at(x as f64 + 0.5).round() as i64;
        put(img, x as i64, y, c);
    }
}

pub fn points(img: &mut ColorImage, pts: &[Point], c: [u8; 3]) {
    for p in pts {
        put(img, p.x as i64, p.y as i64, c);
    }
}

/// Region pixels mixed halfway towards `c`.
pub fn tint(img: &mut ColorImage, region: &Region, c: [u8; 3]) {
    for p in region.pixels() {
        let (x, y) = (p.x as usize, p.y as usize);
        let v = img.get(x, y);
        img.put(x, y, std::array::from_fn(|k| ((v[k] as u16 + c[k] as u16) / 2) as u8));
    }
}

/// Label colours inside the map's roi; pixels outside are left as they are.
pub fn label_map(img: &mut ColorImage, map: &TriStateLabelMap) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            let c = match map.get(x, y) {
                Label::DefinitiveForeground => GREEN,
                Label::ProbableForeground => BLUE,
                Label::Background if map.in_roi(x, y) => RED,
                Label::Background => continue,
                Label::Ignored => YELLOW,
            };
            img.put(x, y, c);
        }
    }
}
