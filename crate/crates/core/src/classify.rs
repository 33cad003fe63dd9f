//! Three-class region triage: ground-truth labeling, class weights and a
//! one-vs-all RBF kernel machine trained by sequential minimal optimization.

use std::collections::VecDeque;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Region};
use crate::strokefeat::{compute_features, RegionFeatures, FEATURE_COUNT};

pub type FeatureVec = [f64; FEATURE_COUNT];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionClass {
    Character,
    MultiCharacter,
    Background,
}

impl RegionClass {
    /// Fixed order, also the tie-break order of [`KernelModel::classify`].
    pub const ALL: [RegionClass; 3] = [
        RegionClass::Character,
        RegionClass::MultiCharacter,
        RegionClass::Background,
    ];

    pub fn index(self) -> usize {
        match self {
            RegionClass::Character => 0,
            RegionClass::MultiCharacter => 1,
            RegionClass::Background => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionClass::Character => "character",
            RegionClass::MultiCharacter => "multi-character",
            RegionClass::Background => "background",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: RegionFeatures,
    pub label: RegionClass,
}

/// Minimum fraction of region pixels that must fall inside ground truth.
pub const OVERLAP_FRACTION: f64 = 0.7;

/// Label a single region against per-character ground-truth masks, or
/// `None` when the overlap is ambiguous and the region is left out.
pub fn label_region(region: &Region, gt_chars: &[BinaryMask]) -> Option<RegionClass> {
    let area = region.area() as f64;
    let mut per_char = vec![0usize; gt_chars.len()];
    let mut in_union = 0usize;
    for p in region.pixels() {
        let mut hit = false;
        for (k, m) in gt_chars.iter().enumerate() {
            if m.get(p.x as usize, p.y as usize) {
                per_char[k] += 1;
                hit = true;
            }
        }
        if hit {
            in_union += 1;
        }
    }
    let touched = per_char.iter().filter(|&&c| c > 0).count();
    let best = per_char.iter().copied().max().unwrap_or(0);
    if touched == 0 {
        Some(RegionClass::Background)
    } else if best as f64 >= OVERLAP_FRACTION * area {
        Some(RegionClass::Character)
    } else if touched >= 2 && in_union as f64 >= OVERLAP_FRACTION * area {
        Some(RegionClass::MultiCharacter)
    } else {
        None
    }
}

/// Build training samples from regions and ground-truth character masks of
/// one image. Ambiguous regions are dropped.
pub fn label_regions(
    regions: &[Region],
    gt_chars: &[BinaryMask],
    width: usize,
    height: usize,
) -> Result<Vec<TrainingSample>> {
    for m in gt_chars {
        if (m.width(), m.height()) != (width, height) {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (m.width(), m.height()),
            });
        }
    }
    for r in regions {
        let bb = r.bbox();
        if bb.right() as usize > width || bb.bottom() as usize > height {
            return Err(Error::InvalidInput(format!(
                "region {bb:?} lies outside the {width}x{height} ground truth"
            )));
        }
    }
    Ok(regions
        .iter()
        .filter_map(|r| {
            label_region(r, gt_chars).map(|label| TrainingSample {
                features: compute_features(r),
                label,
            })
        })
        .collect())
}

/// `total / (3 · count_c)` for each class.
pub fn class_weights(counts: [usize; 3]) -> Result<[f64; 3]> {
    if counts.contains(&0) {
        return Err(Error::InvalidInput(format!(
            "every class needs samples, got counts {counts:?}"
        )));
    }
    let total: usize = counts.iter().sum();
    Ok(counts.map(|c| total as f64 / (3.0 * c as f64)))
}

pub fn class_counts(samples: &[TrainingSample]) -> [usize; 3] {
    let mut counts = [0; 3];
    for s in samples {
        counts[s.label.index()] += 1;
    }
    counts
}

/// Seeded random subset of at most `n` samples, keeping the input order.
pub fn subsample(samples: &[TrainingSample], n: usize, seed: u64) -> Vec<TrainingSample> {
    if samples.len() <= n {
        return samples.to_vec();
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(n);
    idx.sort_unstable();
    idx.into_iter().map(|i| samples[i]).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            gamma: 1.0 / FEATURE_COUNT as f64,
            tolerance: 1e-4,
            max_iterations: 10_000_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite())
            || !(self.gamma > 0.0 && self.gamma.is_finite())
            || !(self.tolerance > 0.0)
        {
            return Err(Error::InvalidInput(format!("bad classifier parameters {self:?}")));
        }
        Ok(())
    }
}

pub fn rbf(gamma: f64, a: &FeatureVec, b: &FeatureVec) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Dual solution of a binary soft-margin problem.
#[derive(Clone, Debug)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

struct KernelRows<'a> {
    x: &'a [FeatureVec],
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [FeatureVec], gamma: f64) -> Self {
        const BUDGET: usize = 1 << 23;
        let n = x.len();
        Self {
            x,
            gamma,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity: (BUDGET / n.max(1)).max(2),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() >= self.capacity {
                let old = self.order.pop_front().unwrap();
                self.rows[old] = None;
            }
            let xi = self.x[i];
            self.rows[i] = Some(self.x.iter().map(|xj| rbf(self.gamma, &xi, xj)).collect());
            self.order.push_back(i);
        }
        self.rows[i].as_deref().unwrap()
    }
}

/// Solve `min ½ αᵀQα − Σα` subject to `yᵀα = 0`, `0 ≤ α_i ≤ c_i` with
/// `Q_ij = y_i y_j K(x_i, x_j)`, using second-order working-set selection.
/// Labels are ±1. Ties in the selection go to the lowest index.
pub fn solve_smo(
    x: &[FeatureVec],
    y: &[f64],
    c: &[f64],
    gamma: f64,
    tolerance: f64,
    max_iterations: usize,
) -> SmoSolution {
    const TAU: f64 = 1e-12;
    let n = x.len();
    assert_eq!(n, y.len());
    assert_eq!(n, c.len());
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut kernel = KernelRows::new(x, gamma);
    let in_up = |a: f64, yt: f64, ct: f64| if yt > 0.0 { a < ct } else { a > 0.0 };
    let in_low = |a: f64, yt: f64, ct: f64| if yt > 0.0 { a > 0.0 } else { a < ct };

    let mut iterations = 0;
    while iterations < max_iterations {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t], c[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let ki = kernel.row(i).to_vec();
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t], c[t]) {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = (2.0 - 2.0 * ki[t]).max(TAU);
                let obj = -diff * diff / quad;
                if obj < best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tolerance || j == usize::MAX {
            break;
        }
        iterations += 1;
        let kj = kernel.row(j).to_vec();
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);
        let quad = (2.0 - 2.0 * ki[j]).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }
    if iterations == max_iterations {
        log::warn!("SMO stopped at the iteration cap ({max_iterations})");
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    SmoSolution { alpha, rho, iterations }
}

/// Binary decision function `Σ coef_i K(sv_i, x) − rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub support: Vec<FeatureVec>,
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl BinaryMachine {
    pub fn from_solution(x: &[FeatureVec], y: &[f64], sol: &SmoSolution) -> Self {
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for ((xi, yi), a) in x.iter().zip(y).zip(&sol.alpha) {
            if *a > 0.0 {
                support.push(*xi);
                coef.push(a * yi);
            }
        }
        Self {
            support,
            coef,
            rho: sol.rho,
        }
    }

    pub fn decision(&self, gamma: f64, x: &FeatureVec) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(gamma, s, x))
            .sum::<f64>()
            - self.rho
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub gamma: f64,
    pub c: f64,
    pub class_weights: [f64; 3],
    pub mean: FeatureVec,
    pub scale: FeatureVec,
    /// One machine per class, in [`RegionClass::ALL`] order.
    pub machines: Vec<BinaryMachine>,
}

impl KernelModel {
    pub fn normalize(&self, f: &FeatureVec) -> FeatureVec {
        std::array::from_fn(|k| (f[k] - self.mean[k]) / self.scale[k])
    }

    pub fn decision_values(&self, f: &RegionFeatures) -> Result<[f64; 3]> {
        if !f.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite features {f:?}")));
        }
        let x = self.normalize(&f.to_array());
        Ok(std::array::from_fn(|c| self.machines[c].decision(self.gamma, &x)))
    }

    pub fn classify(&self, f: &RegionFeatures) -> Result<(RegionClass, [f64; 3])> {
        let scores = self.decision_values(f)?;
        Ok((argmax_class(&scores), scores))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: KernelModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if model.machines.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "{} holds {} decision functions, expected 3",
                path.display(),
                model.machines.len()
            )));
        }
        Ok(model)
    }
}

/// Argmax over the three scores; ties go to the earlier class.
pub fn argmax_class(scores: &[f64; 3]) -> RegionClass {
    let mut best = 0;
    for k in 1..3 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    RegionClass::ALL[best]
}

fn normalization(x: &[FeatureVec]) -> (FeatureVec, FeatureVec) {
    let n = x.len() as f64;
    let mean: FeatureVec = std::array::from_fn(|k| x.iter().map(|v| v[k]).sum::<f64>() / n);
    let scale: FeatureVec = std::array::from_fn(|k| {
        let var = x.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / n;
        if var > 1e-24 {
            var.sqrt()
        } else {
            1.0
        }
    });
    (mean, scale)
}

/// Train the three one-vs-all machines with per-sample cost `C · weight(class)`.
pub fn train(samples: &[TrainingSample], params: &SvmParams) -> Result<KernelModel> {
    params.validate()?;
    let counts = class_counts(samples);
    if counts.contains(&0) {
        return Err(Error::Training(format!(
            "every class needs at least one sample, got {counts:?}"
        )));
    }
    if samples.iter().any(|s| !s.features.is_finite()) {
        return Err(Error::Training("non-finite feature values".into()));
    }
    let raw: Vec<FeatureVec> = samples.iter().map(|s| s.features.to_array()).collect();
    if raw.iter().all(|v| v == &raw[0]) {
        return Err(Error::Training("all samples have identical features".into()));
    }
    let weights = class_weights(counts)?;
    let (mean, scale) = normalization(&raw);
    let x: Vec<FeatureVec> = raw
        .iter()
        .map(|f| std::array::from_fn(|k| (f[k] - mean[k]) / scale[k]))
        .collect();
    let cost: Vec<f64> = samples.iter().map(|s| params.c * weights[s.label.index()]).collect();
    let machines = RegionClass::ALL
        .iter()
        .map(|&cls| {
            let y: Vec<f64> = samples
                .iter()
                .map(|s| if s.label == cls { 1.0 } else { -1.0 })
                .collect();
            let sol = solve_smo(&x, &y, &cost, params.gamma, params.tolerance, params.max_iterations);
            log::debug!("{} machine: {} iterations", cls.name(), sol.iterations);
            BinaryMachine::from_solution(&x, &y, &sol)
        })
        .collect();
    Ok(KernelModel {
        gamma: params.gamma,
        c: params.c,
        class_weights: weights,
        mean,
        scale,
        machines,
    })
}

/// Fraction of correctly predicted samples.
pub fn accuracy(model: &KernelModel, samples: &[TrainingSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let ok = samples
        .iter()
        .filter(|s| model.classify(&s.features).map(|(c, _)| c == s.label).unwrap_or(false))
        .count();
    ok as f64 / samples.len() as f64
}

/// Mean accuracy of k-fold cross-validation with a seeded fold assignment.
pub fn cross_validate(samples: &[TrainingSample], params: &SvmParams, folds: usize, seed: u64) -> Result<f64> {
    if folds < 2 || samples.len() < folds {
        return Err(Error::InvalidInput(format!(
            "cannot split {} samples into {folds} folds",
            samples.len()
        )));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut total = 0.0;
    for f in 0..folds {
        let (mut train_set, mut test_set) = (Vec::new(), Vec::new());
        for (pos, &i) in idx.iter().enumerate() {
            if pos % folds == f {
                test_set.push(samples[i]);
            } else {
                train_set.push(samples[i]);
            }
        }
        let model = train(&train_set, params)?;
        total += accuracy(&model, &test_set);
    }
    Ok(total / folds as f64)
}

/// Cross-validated accuracy for every `(C, γ)` pair.
pub fn grid_search(
    samples: &[TrainingSample],
    cs: &[f64],
    gammas: &[f64],
    folds: usize,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    for &c in cs {
        for &gamma in gammas {
            let params = SvmParams {
                c,
                gamma,
                ..SvmParams::default()
            };
            out.push((c, gamma, cross_validate(samples, &params, folds, seed)?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Point;

    fn square(x0: u32, y0: u32, s: u32) -> Region {
        let mut px = Vec::new();
        for y in y0..y0 + s {
            for x in x0..x0 + s {
                px.push(Point::new(x, y));
            }
        }
        Region::from_pixels(px)
    }

    fn mask_of(r: &Region) -> BinaryMask {
        BinaryMask::from_points(40, 20, r.pixels())
    }

    #[test]
    fn labeling_rules() {
        let a = square(2, 2, 6);
        let b = square(10, 2, 6);
        let masks = [mask_of(&a), mask_of(&b)];
        assert_eq!(label_region(&a, &masks), Some(RegionClass::Character));
        let both = Region::from_pixels(
            a.pixels()
                .iter()
                .chain(b.pixels())
                .copied()
                .chain((8..10).map(|x| Point::new(x, 4)))
                .collect(),
        );
        assert_eq!(label_region(&both, &masks), Some(RegionClass::MultiCharacter));
        assert_eq!(label_region(&square(25, 5, 5), &masks), Some(RegionClass::Background));
        // half inside one character: ambiguous
        assert_eq!(label_region(&square(5, 2, 6), &masks), None);
        assert!(label_regions(&[a], &[BinaryMask::new(3, 3)], 40, 20).is_err());
    }

    #[test]
    fn weights() {
        let w = class_weights([121_000, 14_000, 1_200]).unwrap();
        let total = 136_200.0;
        assert!((w[0] - total / 363_000.0).abs() < 1e-12);
        assert!((w[0] - 0.375).abs() < 1e-3);
        assert!((w[1] - 3.243).abs() < 1e-3);
        assert!((w[2] - 37.83).abs() < 1e-2);
        assert_eq!(class_weights([5, 5, 5]).unwrap(), [1.0; 3]);
        let w = class_weights([2, 1, 1]).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-12 && (w[1] - 4.0 / 3.0).abs() < 1e-12);
        assert!(class_weights([1, 0, 2]).is_err());
    }

    #[test]
    fn argmax_tie_order() {
        assert_eq!(argmax_class(&[1.0, 1.0, 1.0]), RegionClass::Character);
        assert_eq!(argmax_class(&[0.0, 2.0, 2.0]), RegionClass::MultiCharacter);
        assert_eq!(argmax_class(&[0.0, 1.0, 2.0]), RegionClass::Background);
    }

    #[test]
    fn degenerate_training_fails() {
        let f = RegionFeatures::from_array([0.5; 5]);
        let samples: Vec<_> = RegionClass::ALL
            .iter()
            .map(|&label| TrainingSample { features: f, label })
            .collect();
        assert!(matches!(
            train(&samples, &SvmParams::default()),
            Err(Error::Training(_))
        ));
        assert!(train(&samples[..2], &SvmParams::default()).is_err());
    }

    #[test]
    fn subsample_is_seeded() {
        let samples: Vec<_> = (0..50)
            .map(|i| TrainingSample {
                features: RegionFeatures::from_array([i as f64; 5]),
                label: RegionClass::Background,
            })
            .collect();
        let a = subsample(&samples, 10, 3);
        assert_eq!(a.len(), 10);
        assert_eq!(a, subsample(&samples, 10, 3));
        assert_ne!(a, subsample(&samples, 10, 4));
        assert_eq!(subsample(&samples, 100, 3).len(), 50);
    }
}
