//! Brute-force search for the constant in gamma W^3 <= |C|^2 + 1 on the
//! acylindrical set, with K = 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{eta_windows, GeometryError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcylindricalSample {
    pub lambda: Vec<f64>,
    pub f1: f64,
    pub g2: f64,
    pub w: f64,
    pub norm_c2: f64,
}

impl AcylindricalSample {
    pub fn in_u(&self) -> bool {
        self.f1 >= 0.0 && self.g2 <= 0.0
    }

    pub fn ratio(&self) -> f64 {
        (self.norm_c2 + 1.0) / self.w.powi(3)
    }
}

#[derive(Debug, Clone, Copy)]
struct Coeffs {
    n: usize,
    alpha: f64,
    eta: f64,
    wa: f64,
}

impl Coeffs {
    /// Only the Poincare window is required here, not the flow constants.
    fn new(n: usize, alpha: f64, eta: f64) -> Result<Self, GeometryError> {
        if n < 3 {
            return Err(GeometryError::Dimension(n));
        }
        let (wp, _) = eta_windows(n, alpha);
        if !(alpha > 0.0 && alpha < 1.0) || !(eta > 0.0 && eta < wp) {
            return Err(GeometryError::Inadmissible(format!("need alpha in (0, 1), eta in (0, {wp}); got alpha = {alpha}, eta = {eta}")));
        }
        let nf = n as f64;
        let wa = 1.0 / (nf - 2.0 + alpha) - 1.0 / (nf - 1.0) - eta + alpha / (2.0 * nf * (nf - 1.0));
        Ok(Self { n, alpha, eta, wa })
    }

    fn sample(&self, lambda: &[f64]) -> AcylindricalSample {
        let nf = self.n as f64;
        let h: f64 = lambda.iter().sum();
        let a2: f64 = lambda.iter().map(|l| l * l).sum();
        let mut c2 = 0.0;
        for (i, li) in lambda.iter().enumerate() {
            for (j, lj) in lambda.iter().enumerate() {
                if i != j {
                    let d = lj - li;
                    let p = li * lj + 1.0;
                    c2 += d * d * p * p;
                }
            }
        }
        AcylindricalSample {
            lambda: lambda.to_vec(),
            f1: a2 - (1.0 / (nf - 1.0) + self.eta) * h * h,
            g2: a2 - h * h / (nf - 2.0 + self.alpha) - 2.0 * (2.0 - self.alpha),
            w: self.wa * h * h + 2.0 * (2.0 - self.alpha),
            norm_c2: c2,
        }
    }

    fn value(&self, lambda: &[f64]) -> Option<f64> {
        let s = self.sample(lambda);
        s.in_u().then(|| s.ratio())
    }

    /// In lambda-hat = lambda/sqrt(W), U lies in the ball |lambda-hat|^2 <= 1/(a(n-2+alpha)).
    fn radius_hat(&self) -> f64 {
        1.0 / (self.wa * (self.n as f64 - 2.0 + self.alpha)).sqrt()
    }

    /// (|C|^2+1)/W^3 at lambda = lambda-hat/r, r^2 = (1 - a tr^2)/(2(2-alpha)), if that lambda lies in U.
    fn value_hat(&self, lh: &[f64]) -> Option<f64> {
        let nf = self.n as f64;
        let b = 2.0 * (2.0 - self.alpha);
        let tr: f64 = lh.iter().sum();
        let r2 = (1.0 - self.wa * tr * tr) / b;
        if !(r2 > 0.0) {
            return None;
        }
        let s2: f64 = lh.iter().map(|l| l * l).sum();
        let f1 = s2 - (1.0 / (nf - 1.0) + self.eta) * tr * tr;
        let g2 = s2 - tr * tr / (nf - 2.0 + self.alpha) - b * r2;
        if f1 < 0.0 || g2 > 0.0 {
            return None;
        }
        let mut c2 = 0.0;
        for (i, li) in lh.iter().enumerate() {
            for (j, lj) in lh.iter().enumerate() {
                if i != j {
                    let d = lj - li;
                    let p = li * lj + r2;
                    c2 += d * d * p * p;
                }
            }
        }
        Some(c2 + r2 * r2 * r2)
    }

    /// Pattern search inside U from an admissible normalized start.
    fn descend(&self, start: &[f64]) -> (Vec<f64>, f64) {
        let mut x = start.to_vec();
        let mut best = self.value_hat(&x).expect("admissible start");
        let mut step = 0.05 * self.radius_hat();
        while step > 1e-9 {
            let mut improved = false;
            for i in 0..self.n {
                for s in [step, -step] {
                    x[i] += s;
                    match self.value_hat(&x) {
                        Some(v) if v < best => {
                            best = v;
                            improved = true;
                        }
                        _ => x[i] -= s,
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (x, best)
    }

    fn normalize(&self, lambda: &[f64]) -> Vec<f64> {
        let w = self.sample(lambda).w;
        lambda.iter().map(|l| l / w.sqrt()).collect()
    }
}

pub fn acylindrical_sample(n: usize, alpha: f64, eta: f64, lambda: &[f64]) -> Result<AcylindricalSample, GeometryError> {
    Ok(Coeffs::new(n, alpha, eta)?.sample(lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSearch {
    pub gamma: f64,
    pub grid_points: usize,
    pub admissible_random: usize,
    pub budget: usize,
    /// Normalized argmin lambda/sqrt(W); a point near |tr| = 1/sqrt(a) is a limit at infinity.
    pub argmin_hat: Vec<f64>,
    /// Bound on |lambda/sqrt(W)| over U used for sampling.
    pub radius_hat: f64,
}

pub const GRID_STEP: f64 = 0.05;
pub const GRID_RANGE: f64 = 10.0;
pub const BATCH: usize = 4096;

/// gamma-hat over (i) a grid of two-valued spectra (a^k, b^(n-k)) with a, b in GRID_STEP Z,
/// |a|, |b| <= GRID_RANGE, (ii) `budget` uniform draws of lambda/sqrt(W) from its bounding
/// box, which also reaches the region at infinity, (iii) pattern search from the best
/// point of the grid and of every full batch. Batches use independent seeded streams, so a
/// larger budget sees a superset of samples and descents.
pub fn poincare_gamma_search(n: usize, alpha: f64, eta: f64, budget: usize, seed: u64) -> Result<GammaSearch, GeometryError> {
    let co = Coeffs::new(n, alpha, eta)?;
    let r = co.radius_hat();
    let m = (GRID_RANGE / GRID_STEP).round() as i64;
    let (grid_best, grid_points) = (1..n)
        .into_par_iter()
        .map(|k| {
            let mut best: Option<(Vec<f64>, f64)> = None;
            let mut count = 0;
            for i in -m..=m {
                for j in -m..=m {
                    let (a, b) = (i as f64 * GRID_STEP, j as f64 * GRID_STEP);
                    let lam: Vec<f64> = (0..n).map(|q| if q < k { a } else { b }).collect();
                    if let Some(v) = co.value(&lam) {
                        count += 1;
                        if best.as_ref().map_or(true, |g| v < g.1) {
                            best = Some((co.normalize(&lam), v));
                        }
                    }
                }
            }
            (best, count)
        })
        .reduce(|| (None, 0), |a, b| (min_of(a.0, b.0), a.1 + b.1));
    let batches = budget.div_ceil(BATCH);
    let results: Vec<(Option<(Vec<f64>, f64)>, usize)> = (0..batches)
        .into_par_iter()
        .map(|bi| {
            let len = BATCH.min(budget - bi * BATCH);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(bi as u64);
            let mut best: Option<(Vec<f64>, f64)> = None;
            let mut hits = 0;
            for _ in 0..len {
                let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
                if let Some(v) = co.value_hat(&lam) {
                    hits += 1;
                    if best.as_ref().map_or(true, |b| v < b.1) {
                        best = Some((lam, v));
                    }
                }
            }
            let refined = match best {
                Some(b) if len == BATCH => {
                    let d = co.descend(&b.0);
                    Some(if d.1 < b.1 { d } else { b })
                }
                other => other,
            };
            (refined, hits)
        })
        .collect();
    let mut best = grid_best.map(|g| {
        let d = co.descend(&g.0);
        if d.1 < g.1 {
            d
        } else {
            g
        }
    });
    let mut admissible_random = 0;
    for (b, hits) in results {
        admissible_random += hits;
        if let Some(b) = b {
            if best.as_ref().map_or(true, |x| b.1 < x.1) {
                best = Some(b);
            }
        }
    }
    let (argmin_hat, gamma) = best.ok_or_else(|| GeometryError::Inadmissible("no admissible sample".into()))?;
    Ok(GammaSearch { gamma, argmin_hat, grid_points, admissible_random, budget, radius_hat: r })
}

fn min_of(a: Option<(Vec<f64>, f64)>, b: Option<(Vec<f64>, f64)>) -> Option<(Vec<f64>, f64)> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.1 < x.1 { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}
