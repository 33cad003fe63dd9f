//! Exhaustive reference implementations.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use scenetext::mser::{MserParams, MserSet, Polarity};
use scenetext::raster::{BinaryMask, GrayImage, Point, Region};
use scenetext::recognize::{count_words, CharHypothesis, LanguageModel, RecognitionGraph, DEFAULT_ALPHA};
use scenetext::segment::FlowNetwork;

/// Distance from every foreground pixel to the nearest background pixel,
/// by scanning all background pixels including a one-pixel frame.
pub fn brute_edt(mask: &BinaryMask) -> Vec<f64> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut bg = Vec::new();
    for y in -1..=h {
        for x in -1..=w {
            if !mask.get_signed(x, y) {
                bg.push((x, y));
            }
        }
    }
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x as usize, y as usize) {
                let best = bg
                    .iter()
                    .map(|&(bx, by)| (bx - x) * (bx - x) + (by - y) * (by - y))
                    .min()
                    .unwrap();
                out[(y * w + x) as usize] = (best as f64).sqrt();
            }
        }
    }
    out
}

pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, p: f64) -> BinaryMask {
    let bits = (0..w * h).map(|_| rng.random_bool(p)).collect();
    BinaryMask::from_bits(w, h, bits).unwrap()
}

/// 8-connected components of `{v ≤ level}`: per-pixel component index and
/// the sorted pixel lists.
fn threshold_components(data: &[u8], w: usize, h: usize, level: u8) -> (Vec<usize>, Vec<Vec<u32>>) {
    let mut label = vec![usize::MAX; w * h];
    let mut comps = Vec::new();
    for start in 0..w * h {
        if data[start] > level || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut pixels = vec![start as u32];
        label[start] = id;
        let mut k = 0;
        while k < pixels.len() {
            let p = pixels[k] as usize;
            k += 1;
            let (x, y) = ((p % w) as i64, (p / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if data[q] <= level && label[q] == usize::MAX {
                        label[q] = id;
                        pixels.push(q as u32);
                    }
                }
            }
        }
        pixels.sort_unstable();
        comps.push(pixels);
    }
    (label, comps)
}

/// MSERs found by thresholding at every gray level and tracking each
/// distinct pixel set across the levels where it is a component.
pub fn mser_oracle(img: &GrayImage, params: &MserParams, polarity: Polarity) -> Vec<MserSet> {
    let img = match polarity {
        Polarity::DarkOnLight => img.clone(),
        Polarity::LightOnDark => img.inverted(),
    };
    let (w, h) = (img.width(), img.height());
    if w * h < params.min_area {
        return Vec::new();
    }
    let mut labels: Vec<Vec<usize>> = Vec::with_capacity(256);
    // set id of every component at every level
    let mut comp_set: Vec<Vec<usize>> = Vec::with_capacity(256);
    let mut sets: Vec<Vec<u32>> = Vec::new();
    let mut birth: Vec<u8> = Vec::new();
    let mut death: Vec<u8> = Vec::new();
    let mut ids: HashMap<Vec<u32>, usize> = HashMap::new();
    for l in 0..=255u8 {
        let (lab, comps) = threshold_components(img.data(), w, h, l);
        let mut cs = Vec::new();
        for c in comps {
            let id = *ids.entry(c.clone()).or_insert_with(|| {
                sets.push(c);
                birth.push(l);
                death.push(l);
                sets.len() - 1
            });
            death[id] = l;
            cs.push(id);
        }
        labels.push(lab);
        comp_set.push(cs);
    }
    let at = |s: usize, l: u8| comp_set[l as usize][labels[l as usize][sets[s][0] as usize]];
    let area = |s: usize| sets[s].len();
    let variation = |s: usize, l: u8| {
        let up = area(at(s, l.saturating_add(params.delta)));
        (up - area(s)) as f64 / area(s) as f64
    };
    let lower = |s: usize, l: u8| -> Option<(usize, u8)> {
        if l == 0 {
            return None;
        }
        if birth[s] < l {
            return Some((s, l - 1));
        }
        let lab = &labels[(l - 1) as usize];
        let mut best: Option<usize> = None;
        for &p in &sets[s] {
            if lab[p as usize] == usize::MAX {
                continue;
            }
            let c = comp_set[(l - 1) as usize][lab[p as usize]];
            best = match best {
                None => Some(c),
                Some(b) if area(c) > area(b) || (area(c) == area(b) && sets[c][0] < sets[b][0]) => Some(c),
                keep => keep,
            };
        }
        best.map(|c| (c, l - 1))
    };
    let run_is_minimal = |s: usize, l: u8, v: f64| {
        let mut cur = (s, l);
        while let Some((n, m)) = lower(cur.0, cur.1) {
            let lv = variation(n, m);
            if lv > v {
                return true;
            }
            if lv < v {
                return false;
            }
            cur = (n, m);
        }
        true
    };
    let parent = |s: usize| {
        if death[s] == 255 {
            None
        } else {
            Some(at(s, death[s] + 1))
        }
    };

    let mut cands: Vec<(usize, u8, f64)> = Vec::new();
    for s in 0..sets.len() {
        if area(s) < params.min_area || area(s) > params.max_area {
            continue;
        }
        for l in birth[s]..=death[s] {
            let v = variation(s, l);
            let upper = if l == 255 {
                None
            } else {
                Some(variation(at(s, l + 1), l + 1))
            };
            if upper.is_none_or(|u| v < u) && run_is_minimal(s, l, v) {
                if v <= params.max_variation {
                    cands.push((s, l, v));
                }
                break;
            }
        }
    }
    cands.sort_by(|a, b| {
        a.2.total_cmp(&b.2)
            .then(area(a.0).cmp(&area(b.0)))
            .then(sets[a.0][0].cmp(&sets[b.0][0]))
    });
    let close = |small: usize, big: usize| (area(big) - area(small)) as f64 / (area(big) as f64) < params.min_diversity;
    let mut accepted = vec![false; sets.len()];
    let mut blocked = vec![false; sets.len()];
    let mut out = Vec::new();
    for &(s, l, v) in &cands {
        if blocked[s] {
            continue;
        }
        let mut anc = parent(s);
        let mut clash = false;
        while let Some(a) = anc.filter(|&a| close(s, a)) {
            if accepted[a] {
                clash = true;
                break;
            }
            anc = parent(a);
        }
        if clash {
            continue;
        }
        accepted[s] = true;
        let mut anc = parent(s);
        while let Some(a) = anc.filter(|&a| close(s, a)) {
            blocked[a] = true;
            anc = parent(a);
        }
        out.push(MserSet {
            pixels: sets[s].clone(),
            level: l,
            variation: v,
        });
    }
    out
}

/// Flat rectangles of random gray over a random background, plus noise.
pub fn blocky_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    let mut data = vec![rng.random_range(0..=255u8); w * h];
    for _ in 0..rng.random_range(1..6) {
        let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
        let (x1, y1) = (rng.random_range(x0 + 1..=w), rng.random_range(y0 + 1..=h));
        let v = rng.random_range(0..=255u8);
        for y in y0..y1 {
            for x in x0..x1 {
                data[y * w + x] = v;
            }
        }
    }
    let amp = rng.random_range(0..8i32);
    for v in &mut data {
        *v = (*v as i32 + rng.random_range(-amp..=amp)).clamp(0, 255) as u8;
    }
    GrayImage::new(w, h, data).unwrap()
}

pub fn noise_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::new(w, h, (0..w * h).map(|_| rng.random_range(0..=255u8)).collect()).unwrap()
}

/// Random network as (source caps, sink caps, undirected-pair arcs).
pub type Net = (Vec<f64>, Vec<f64>, Vec<(usize, usize, f64, f64)>);

pub fn random_net(rng: &mut ChaCha8Rng) -> Net {
    let n = rng.random_range(1..=10);
    let src = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
    let snk = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
    let mut arcs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.4) {
                arcs.push((i, j, rng.random_range(0..15) as f64, rng.random_range(0..15) as f64));
            }
        }
    }
    (src, snk, arcs)
}

/// Cost of the cut where `side[i]` means node i stays with the source.
pub fn cut_value((src, snk, arcs): &Net, side: &[bool]) -> f64 {
    let mut c = 0.0;
    for i in 0..src.len() {
        c += if side[i] { snk[i] } else { src[i] };
    }
    for &(i, j, a, b) in arcs {
        if side[i] && !side[j] {
            c += a;
        }
        if side[j] && !side[i] {
            c += b;
        }
    }
    c
}

pub fn brute_min_cut(net: &Net) -> f64 {
    let n = net.0.len();
    (0..1u32 << n)
        .map(|mask| {
            let side: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            cut_value(net, &side)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn solve_net(net: &Net, order: &[usize]) -> (f64, Vec<bool>) {
    let (src, snk, arcs) = net;
    let mut g = FlowNetwork::new(src.len());
    for &i in order {
        g.add_terminal(i, src[i], snk[i]);
    }
    for &(i, j, a, b) in arcs.iter().rev() {
        g.add_edge(i, j, a, b);
    }
    (g.max_flow(), g.source_side())
}

pub fn rect_region(x: u32, y: u32, w: u32, h: u32) -> Region {
    Region::from_pixels(
        (y..y + h)
            .flat_map(|yy| (x..x + w).map(move |xx| Point::new(xx, yy)))
            .collect(),
    )
}

pub fn hyp(x: u32, w: u32, label: char, cost: f64) -> CharHypothesis {
    CharHypothesis {
        region: rect_region(x, 0, w, 10),
        label,
        cost,
    }
}

pub fn random_hyps(rng: &mut ChaCha8Rng, max: usize) -> Vec<CharHypothesis> {
    let n = rng.random_range(1..=max);
    (0..n)
        .map(|_| {
            hyp(
                rng.random_range(0..60),
                rng.random_range(3..15),
                ['A', 'B', 'C'][rng.random_range(0..3)],
                rng.random_range(0.0..3.0),
            )
        })
        .collect()
}

pub fn random_lm(rng: &mut ChaCha8Rng) -> LanguageModel {
    let words: Vec<String> = (0..20)
        .map(|_| {
            (0..rng.random_range(1..5))
                .map(|_| ['A', 'B', 'C'][rng.random_range(0..3)])
                .collect()
        })
        .collect();
    LanguageModel::new(
        &count_words(words.iter().map(String::as_str)),
        "ABC".chars(),
        DEFAULT_ALPHA,
    )
    .unwrap()
}

/// Every start-to-end path with its cost, summed step by step.
pub fn enumerate_paths(g: &RecognitionGraph, lm: &LanguageModel, lambda: f64) -> Vec<(f64, String, Vec<usize>)> {
    fn walk(
        g: &RecognitionGraph,
        lm: &LanguageModel,
        lambda: f64,
        path: &mut Vec<usize>,
        cost: f64,
        out: &mut Vec<(f64, String, Vec<usize>)>,
    ) {
        let u = *path.last().unwrap();
        if g.links_to_end(u) {
            let text = path.iter().map(|&i| g.nodes()[i].label).collect();
            out.push((cost + g.transition_cost(Some(u), None), text, path.clone()));
        }
        for &v in g.successors(u) {
            let w = if path.len() >= 2 {
                Some(path[path.len() - 2])
            } else {
                None
            };
            let c = cost + g.step_cost(w, Some(u), v, lm, lambda);
            path.push(v);
            walk(g, lm, lambda, path, c, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    for &v in g.start_links() {
        let c = g.step_cost(None, None, v, lm, lambda);
        walk(g, lm, lambda, &mut vec![v], c, &mut out);
    }
    out
}
