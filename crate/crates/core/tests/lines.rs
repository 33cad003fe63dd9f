mod common;

use std::collections::BTreeSet;

use common::oracles::rect_region;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenetext::classify::RegionClass;
use scenetext::lines::{
    acceptable_line, agglomerate, compatible_pair, form_lines, propose_triplets, resolve_conflicts, LineParams,
    TextLineHypothesis,
};
use scenetext::raster::Region;

/// Six boxes at disjoint x ranges, each on one of two jittered baselines.
fn two_baselines(rng: &mut ChaCha8Rng) -> Vec<Region> {
    let bases = [rng.random_range(30..60), rng.random_range(60..120)];
    let mut x = rng.random_range(0..10);
    (0..6)
        .map(|_| {
            let w = rng.random_range(4..14);
            let h = rng.random_range(8..24);
            let base = bases[rng.random_range(0..2)] + rng.random_range(0..4);
            let r = rect_region(x, base - h, w, h);
            x += w + rng.random_range(1..25);
            r
        })
        .collect()
}

#[test]
fn triplets_match_exhaustive_enumeration() {
    let p = LineParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0;
    for _ in 0..200 {
        let regions = two_baselines(&mut rng);
        let classes = vec![RegionClass::Character; 6];
        let mut got: Vec<Vec<usize>> = propose_triplets(&regions, &classes, &p)
            .into_iter()
            .map(|h| h.members)
            .collect();
        let mut want = Vec::new();
        for a in 0..6 {
            for b in a + 1..6 {
                for c in b + 1..6 {
                    let boxes = [a, b, c].map(|i| regions[i].bbox());
                    let ok = compatible_pair(&boxes[0], &boxes[1], &p)
                        && compatible_pair(&boxes[0], &boxes[2], &p)
                        && compatible_pair(&boxes[1], &boxes[2], &p);
                    if !ok {
                        continue;
                    }
                    let h = TextLineHypothesis::from_members(&regions, [a, b, c]);
                    if acceptable_line(&h, &p) {
                        want.push(h.members);
                    }
                }
            }
        }
        got.sort();
        want.sort();
        total += want.len();
        assert_eq!(got, want);
    }
    assert!(total > 100, "too few triplets to be meaningful ({total})");
}

/// Keep the preferred line of every share-a-region cluster, found by
/// transitive closure.
fn brute_resolve(lines: &[TextLineHypothesis]) -> BTreeSet<Vec<usize>> {
    let n = lines.len();
    let share = |a: usize, b: usize| lines[a].members.iter().any(|m| lines[b].members.contains(m));
    let mut cluster_of = vec![usize::MAX; n];
    for s in 0..n {
        if cluster_of[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        cluster_of[s] = s;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if cluster_of[v] == usize::MAX && share(u, v) {
                    cluster_of[v] = s;
                    stack.push(v);
                }
            }
        }
    }
    let key = |i: usize| {
        let l = &lines[i];
        (
            std::cmp::Reverse(l.members.len()),
            l.bottom_line.residual,
            (l.bbox.x, l.bbox.y, l.bbox.w, l.bbox.h),
            i,
        )
    };
    let mut out = BTreeSet::new();
    for c in BTreeSet::from_iter(cluster_of.iter().copied()) {
        let best = (0..n)
            .filter(|&i| cluster_of[i] == c)
            .min_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap())
            .unwrap();
        out.insert(lines[best].members.clone());
    }
    out
}

#[test]
fn conflict_resolution_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let regions: Vec<Region> = (0..12)
            .map(|i| rect_region(i * 12, rng.random_range(0..6), 10, rng.random_range(10..20)))
            .collect();
        let n = rng.random_range(1..=8);
        let lines: Vec<TextLineHypothesis> = (0..n)
            .map(|_| {
                let k = rng.random_range(1..=5);
                let members: Vec<usize> = (0..k).map(|_| rng.random_range(0..12)).collect();
                TextLineHypothesis::from_members(&regions, members)
            })
            .collect();
        let got: BTreeSet<Vec<usize>> = resolve_conflicts(&lines).into_iter().map(|l| l.members).collect();
        assert_eq!(got, brute_resolve(&lines));
    }
}

#[test]
fn crossing_lines_keep_the_longer() {
    let mut regions: Vec<Region> = (0..5).map(|i| rect_region(i * 15, 40, 10, 20)).collect();
    regions.push(rect_region(30, 0, 10, 20));
    regions.push(rect_region(30, 80, 10, 20));
    let horizontal = TextLineHypothesis::from_members(&regions, 0..5);
    let vertical = TextLineHypothesis::from_members(&regions, [5, 2, 6]);
    let kept = resolve_conflicts(&[vertical, horizontal.clone()]);
    assert_eq!(kept, vec![horizontal]);
}

/// Boxes along a random baseline with small jitter; returns regions in
/// shuffled order.
fn chain(rng: &mut ChaCha8Rng) -> Vec<Region> {
    let n = rng.random_range(5..=8);
    let h = rng.random_range(14..30) as f64;
    let slope = rng.random_range(-0.15..0.15);
    let mut x = rng.random_range(10.0..40.0);
    let mut out = Vec::new();
    for _ in 0..n {
        let w = rng.random_range(0.4 * h..0.8 * h);
        let hh = h * rng.random_range(0.95..1.05);
        let base = 200.0 + slope * x + rng.random_range(-0.05 * h..=0.05 * h);
        out.push(rect_region(x as u32, (base - hh) as u32, w as u32, hh as u32));
        x += w + rng.random_range(0.1 * h..0.5 * h);
    }
    out.shuffle(rng);
    out
}

#[test]
fn jittered_chains_form_one_line() {
    let p = LineParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut recovered = 0;
    for _ in 0..100 {
        let regions = chain(&mut rng);
        let classes = vec![RegionClass::Character; regions.len()];
        let lines = form_lines(&regions, &classes, &p);
        if lines.len() == 1 && lines[0].members.len() == regions.len() {
            recovered += 1;
        }
    }
    assert!(recovered >= 95, "only {recovered} of 100 chains recovered");
}

#[test]
fn two_regions_without_multi_character_make_nothing() {
    let regions = vec![rect_region(0, 0, 10, 20), rect_region(15, 0, 10, 20)];
    let classes = vec![RegionClass::Character; 2];
    assert!(form_lines(&regions, &classes, &LineParams::default()).is_empty());
}

#[test]
fn nested_copies_do_not_crowd_out_neighbours() {
    // every glyph comes with two slightly larger nested copies, as MSER
    // reports them at neighbouring levels
    let mut regions = Vec::new();
    for i in 0..5 {
        let x = 10 + i * 20;
        regions.push(rect_region(x, 20, 12, 20));
        regions.push(rect_region(x, 19, 13, 21));
        regions.push(rect_region(x - 1, 19, 14, 22));
    }
    let classes = vec![RegionClass::Character; regions.len()];
    let lines = form_lines(&regions, &classes, &LineParams::default());
    assert_eq!(lines.len(), 1);
    let xs: BTreeSet<u32> = lines[0].members.iter().map(|&m| regions[m].bbox().x / 20).collect();
    assert_eq!(xs.len(), 5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_lines_are_disjoint_and_fit(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut regions = chain(&mut rng);
        regions.extend(chain(&mut rng).into_iter().map(|r| {
            let b = r.bbox();
            rect_region(b.x, b.y.saturating_sub(120), b.w, b.h)
        }));
        let classes = vec![RegionClass::Character; regions.len()];
        let p = LineParams::default();
        let lines = form_lines(&regions, &classes, &p);
        let mut used = BTreeSet::new();
        for l in &lines {
            for &m in &l.members {
                prop_assert!(used.insert(m));
            }
            let refit = TextLineHypothesis::from_members(&regions, l.members.iter().copied());
            prop_assert!(refit.bottom_line.residual <= p.max_residual * refit.line_height + 1e-9);
        }
    }

    #[test]
    fn agglomeration_ignores_input_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let regions = chain(&mut rng);
        let classes = vec![RegionClass::Character; regions.len()];
        let p = LineParams::default();
        let mut triplets = propose_triplets(&regions, &classes, &p);
        let a = agglomerate(&regions, &triplets, &p);
        triplets.shuffle(&mut rng);
        triplets.reverse();
        prop_assert_eq!(a, agglomerate(&regions, &triplets, &p));
    }
}
