//! Full-covariance Gaussian mixtures over RGB, fitted by EM from k-means++
//! seeds.
//!
//! Covariances are regularized with a fixed isotropic prior: the M-step sets
//! `Σ_k = S_k + (λ / n_k) I` with `λ = ε · N / K`, which is `S_k + εI` for a
//! component holding an even share of the data. EM then monotonically
//! increases the penalized log-likelihood `Σ_i ln p(x_i) − ½ λ Σ_k tr(Σ_k⁻¹)`,
//! which is the value reported per iteration.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rgb = [f64; 3];
type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmParams {
    pub components: usize,
    pub regularization: f64,
    pub max_iterations: usize,
    /// Relative change of the objective below which EM stops.
    pub tolerance: f64,
    /// Pixels beyond this count are randomly subsampled before fitting.
    pub max_samples: usize,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            components: 5,
            regularization: 0.01,
            max_iterations: 50,
            tolerance: 1e-4,
            max_samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub weight: f64,
    pub mean: Rgb,
    pub cov: Mat3,
    inv: Mat3,
    /// `ln w − ½ ln |Σ| − (3/2) ln 2π`.
    log_norm: f64,
}

impl Gaussian {
    fn new(weight: f64, mean: Rgb, cov: Mat3) -> Self {
        let det = det3(&cov);
        let log_norm = weight.ln() - 0.5 * det.ln() - 1.5 * (2.0 * std::f64::consts::PI).ln();
        Self {
            weight,
            mean,
            cov,
            inv: inv3(&cov, det),
            log_norm,
        }
    }

    /// `ln (w · N(x | μ, Σ))`.
    pub fn log_weighted_density(&self, x: &Rgb) -> f64 {
        let d = [x[0] - self.mean[0], x[1] - self.mean[1], x[2] - self.mean[2]];
        let mut q = 0.0;
        for r in 0..3 {
            q += d[r] * (self.inv[r][0] * d[0] + self.inv[r][1] * d[1] + self.inv[r][2] * d[2]);
        }
        self.log_norm - 0.5 * q
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub components: Vec<Gaussian>,
}

/// Result of a fit, with the objective at each E-step.
#[derive(Clone, Debug)]
pub struct GmmFit {
    pub gmm: Gmm,
    pub trace: Vec<f64>,
}

impl Gmm {
    pub fn log_density(&self, x: &Rgb) -> f64 {
        if self.components.len() <= 8 {
            let mut buf = [0.0; 8];
            let mut m = f64::NEG_INFINITY;
            for (b, g) in buf.iter_mut().zip(&self.components) {
                *b = g.log_weighted_density(x);
                m = m.max(*b);
            }
            let s: f64 = buf[..self.components.len()].iter().map(|b| (b - m).exp()).sum();
            return m + s.ln();
        }
        // streaming log-sum-exp
        let (mut m, mut s) = (f64::NEG_INFINITY, 0.0);
        for g in &self.components {
            let t = g.log_weighted_density(x);
            if t > m {
                s = s * (m - t).exp() + 1.0;
                m = t;
            } else {
                s += (t - m).exp();
            }
        }
        m + s.ln()
    }

    /// `−ln p(x | θ)`.
    pub fn cost(&self, x: &Rgb) -> f64 {
        -self.log_density(x)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &Mat3, det: f64) -> Mat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    adj.map(|row| row.map(|v| v / det))
}

fn dist2(a: &Rgb, b: &Rgb) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn distinct_colors(pixels: &[Rgb], limit: usize) -> usize {
    let mut seen: Vec<Rgb> = Vec::new();
    for p in pixels {
        if !seen.contains(p) {
            seen.push(*p);
            if seen.len() >= limit {
                break;
            }
        }
    }
    seen.len()
}

/// k-means++ seeding: the first centre uniformly, later ones with
/// probability proportional to the squared distance to the nearest centre.
pub fn kmeans_pp<R: Rng>(pixels: &[Rgb], k: usize, rng: &mut R) -> Vec<Rgb> {
    let mut centres = vec![pixels[rng.random_range(0..pixels.len())]];
    let mut d2: Vec<f64> = pixels.iter().map(|p| dist2(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut r = rng.random::<f64>() * total;
        let mut pick = pixels.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            if r < *d {
                pick = i;
                break;
            }
            r -= d;
        }
        let c = pixels[pick];
        for (d, p) in d2.iter_mut().zip(pixels) {
            *d = d.min(dist2(p, &c));
        }
        centres.push(c);
    }
    centres
}

struct Stats {
    n: f64,
    sum: Rgb,
    outer: Mat3,
}

fn m_step(stats: &[Stats], total: f64, prior: f64) -> Vec<Gaussian> {
    stats
        .iter()
        .filter(|s| s.n > 1e-12)
        .map(|s| {
            let mean = s.sum.map(|v| v / s.n);
            let mut cov = [[0.0; 3]; 3];
            // only the upper triangle is accumulated
            for r in 0..3 {
                for c in r..3 {
                    let v = s.outer[r][c] / s.n - mean[r] * mean[c];
                    cov[r][c] = v;
                    cov[c][r] = v;
                }
                cov[r][r] = cov[r][r].max(0.0) + prior / s.n;
            }
            Gaussian::new(s.n / total, mean, cov)
        })
        .collect()
}

/// Fit a mixture of at most `params.components` Gaussians. The component
/// count drops to the number of distinct colours when that is smaller.
pub fn fit_gmm<R: Rng>(pixels: &[Rgb], params: &GmmParams, rng: &mut R) -> Result<GmmFit> {
    if pixels.is_empty() || params.components == 0 {
        return Err(Error::InvalidInput("cannot fit a mixture to no pixels".into()));
    }
    let sampled: Vec<Rgb>;
    let pixels = if pixels.len() > params.max_samples && params.max_samples > 0 {
        let mut idx = index::sample(rng, pixels.len(), params.max_samples).into_vec();
        idx.sort_unstable();
        sampled = idx.into_iter().map(|i| pixels[i]).collect();
        &sampled[..]
    } else {
        pixels
    };
    let k = params.components.min(distinct_colors(pixels, params.components));
    let n = pixels.len() as f64;
    let prior = params.regularization * n / k as f64;

    // hard assignment to the seeds gives the initial model
    let centres = kmeans_pp(pixels, k, rng);
    let mut stats: Vec<Stats> = (0..centres.len())
        .map(|_| Stats {
            n: 0.0,
            sum: [0.0; 3],
            outer: [[0.0; 3]; 3],
        })
        .collect();
    for p in pixels {
        let mut best = 0;
        for (c, centre) in centres.iter().enumerate() {
            if dist2(p, centre) < dist2(p, &centres[best]) {
                best = c;
            }
        }
        accumulate(&mut stats[best], p, 1.0);
    }
    let mut gmm = Gmm {
        components: m_step(&stats, n, prior),
    };

    let mut trace = Vec::new();
    let mut resp = vec![0.0; gmm.len()];
    for _ in 0..params.max_iterations {
        let mut stats: Vec<Stats> = (0..gmm.len())
            .map(|_| Stats {
                n: 0.0,
                sum: [0.0; 3],
                outer: [[0.0; 3]; 3],
            })
            .collect();
        let mut ll = 0.0;
        for p in pixels {
            let mut m = f64::NEG_INFINITY;
            for (r, g) in resp.iter_mut().zip(&gmm.components) {
                *r = g.log_weighted_density(p);
                m = m.max(*r);
            }
            let mut sum = 0.0;
            for r in resp.iter_mut() {
                *r = (*r - m).exp();
                sum += *r;
            }
            ll += m + sum.ln();
            for (s, r) in stats.iter_mut().zip(&resp) {
                accumulate(s, p, r / sum);
            }
        }
        let penalty: f64 = gmm
            .components
            .iter()
            .map(|g| g.inv[0][0] + g.inv[1][1] + g.inv[2][2])
            .sum();
        let obj = ll - 0.5 * prior * penalty;
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| ((obj - prev) / prev.abs().max(1e-300)).abs() < params.tolerance);
        trace.push(obj);
        if converged {
            break;
        }
        gmm = Gmm {
            components: m_step(&stats, n, prior),
        };
        resp.resize(gmm.len(), 0.0);
    }
    Ok(GmmFit { gmm, trace })
}

fn accumulate(s: &mut Stats, p: &Rgb, w: f64) {
    s.n += w;
    for r in 0..3 {
        let wp = w * p[r];
        s.sum[r] += wp;
        for c in r..3 {
            s.outer[r][c] += wp * p[c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_colour_collapses_to_one_component() {
        let px = vec![[10.0, 200.0, 30.0]; 50];
        let fit = fit_gmm(&px, &GmmParams::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(fit.gmm.len(), 1);
        assert_eq!(fit.gmm.components[0].mean, [10.0, 200.0, 30.0]);
        assert!((fit.gmm.components[0].weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 4.0).unwrap();
        let centres = [[40.0, 50.0, 60.0], [200.0, 180.0, 160.0]];
        let px: Vec<Rgb> = (0..600)
            .map(|i| centres[i % 2].map(|c| c + noise.sample(&mut rng)))
            .collect();
        let params = GmmParams {
            components: 2,
            ..GmmParams::default()
        };
        let fit = fit_gmm(&px, &params, &mut rng).unwrap();
        for c in &centres {
            let nearest = fit
                .gmm
                .components
                .iter()
                .map(|g| dist2(&g.mean, c).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 2.0, "{nearest}");
        }
        for w in fit.trace.windows(2) {
            assert!(w[1] - w[0] >= -1e-9);
        }
    }

    #[test]
    fn inverse_is_inverse() {
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = inv3(&m, det3(&m));
        for r in 0..3 {
            for c in 0..3 {
                let v: f64 = (0..3).map(|k| m[r][k] * inv[k][c]).sum();
                assert!((v - if r == c { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
