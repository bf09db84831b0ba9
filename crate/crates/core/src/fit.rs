//! Weighted polynomial fits, zero crossings and bootstrap intervals.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial with ascending coefficients and their covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub coeffs: Vec<f64>,
    pub cov: DMatrix<f64>,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, c)| acc * x + i as f64 * c)
    }

    /// Standard error of the fitted value at x.
    pub fn eval_stderr(&self, x: f64) -> f64 {
        let v = DVector::from_fn(self.coeffs.len(), |i, _| x.powi(i as i32));
        (v.transpose() * &self.cov * &v)[(0, 0)].max(0.0).sqrt()
    }
}

/// Least squares fit of a degree-`order` polynomial with weights 1/σ².
///
/// When every σ is zero (noiseless data) the points are weighted equally and the
/// covariance is zero.
pub fn weighted_polyfit(x: &[f64], y: &[f64], sigma: &[f64], order: usize) -> Result<PolyFit> {
    let n = x.len();
    if y.len() != n || sigma.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len().min(sigma.len()) });
    }
    if n < order + 1 {
        return Err(Error::InsufficientData(format!("{n} points for an order-{order} fit")));
    }
    if x.iter().chain(y).chain(sigma).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite fit input".into()));
    }
    let noiseless = sigma.iter().all(|&s| s == 0.0);
    if !noiseless && sigma.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidParameter("mixed zero and positive uncertainties".into()));
    }
    let w: Vec<f64> = sigma.iter().map(|&s| if noiseless { 1.0 } else { 1.0 / s }).collect();
    // center and scale x for conditioning
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mid = 0.5 * (lo + hi);
    let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let a = DMatrix::from_fn(n, order + 1, |i, j| w[i] * ((x[i] - mid) / half).powi(j as i32));
    let b = DVector::from_fn(n, |i, _| w[i] * y[i]);
    let ata = a.transpose() * &a;
    let inv = ata
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::DegenerateFit("singular design matrix".into()))?;
    let cond = ata.norm() * inv.norm();
    if !(cond < 1e14) {
        return Err(Error::DegenerateFit(format!("design matrix condition {cond:.1e}")));
    }
    let t = &inv * a.transpose() * b;
    let cov_t = if noiseless { DMatrix::zeros(order + 1, order + 1) } else { inv };
    // map coefficients of ((x − mid)/half)^j back to powers of x
    let mut m = DMatrix::zeros(order + 1, order + 1);
    for j in 0..=order {
        for i in 0..=j {
            m[(i, j)] = binomial(j, i) * (-mid).powi((j - i) as i32) / half.powi(j as i32);
        }
    }
    let coeffs = (&m * t).iter().copied().collect();
    let cov = &m * cov_t * m.transpose();
    Ok(PolyFit { coeffs, cov })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// A fitted zero crossing of Δ⟨H⟩(λ̃).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingFit {
    /// (λ̃, Δ⟨H⟩, σ)
    pub points: Vec<(f64, f64, f64)>,
    pub order: usize,
    pub intercept: f64,
    /// Linearized standard error of the intercept.
    pub intercept_stderr: f64,
    pub ci: Option<(f64, f64)>,
    pub ci_level: f64,
    pub resamples: usize,
}

/// Root of the fitted polynomial nearest the data, restricted to the data range extended by 50%.
fn crossing_of(points: &[(f64, f64, f64)], order: usize) -> Result<(f64, PolyFit)> {
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let s: Vec<f64> = points.iter().map(|p| p.2).collect();
    let fit = weighted_polyfit(&x, &y, &s, order)?;
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let (elo, ehi) = (lo - 0.5 * span, hi + 0.5 * span);
    let roots = real_roots(&fit.coeffs);
    let dist = |r: f64| if r < lo { lo - r } else if r > hi { r - hi } else { 0.0 };
    roots
        .into_iter()
        .filter(|&r| r >= elo && r <= ehi)
        .min_by(|a, b| dist(*a).total_cmp(&dist(*b)).then(a.total_cmp(b)))
        .map(|r| (r, fit))
        .ok_or(Error::NoRoot { lo: elo, hi: ehi })
}

fn real_roots(c: &[f64]) -> Vec<f64> {
    let mut c = c.to_vec();
    while c.len() > 1 && c.last() == Some(&0.0) {
        c.pop();
    }
    match c.len() {
        2 => vec![-c[0] / c[1]],
        3 => {
            let (a, b, cc) = (c[2], c[1], c[0]);
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                return Vec::new();
            }
            // numerically stable pair
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let mut r = vec![q / a];
            if q != 0.0 {
                r.push(cc / q);
            }
            r
        }
        _ => Vec::new(),
    }
}

/// Weighted fit of order 1 or 2 and its x-intercept.
pub fn fit_crossing(points: &[(f64, f64, f64)], order: usize) -> Result<CrossingFit> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidParameter(format!("fit order must be 1 or 2, got {order}")));
    }
    let (root, fit) = crossing_of(points, order)?;
    let g = DVector::from_fn(order + 1, |i, _| root.powi(i as i32));
    let slope = fit.derivative(root);
    let var = (g.transpose() * &fit.cov * &g)[(0, 0)];
    Ok(CrossingFit {
        points: points.to_vec(),
        order,
        intercept: root,
        intercept_stderr: if slope != 0.0 { var.max(0.0).sqrt() / slope.abs() } else { f64::INFINITY },
        ci: None,
        ci_level: 0.0,
        resamples: 0,
    })
}

/// Percentile interval of the crossing refitted on each replicate.
///
/// `replicates[i]` holds B resampled Δ⟨H⟩ values of point i. The interval is widened to
/// contain the point estimate if needed.
pub fn bootstrap_ci(fit: &CrossingFit, replicates: &[Vec<f64>], level: f64) -> Result<CrossingFit> {
    if replicates.len() != fit.points.len() {
        return Err(Error::DimensionMismatch { expected: fit.points.len(), got: replicates.len() });
    }
    let b = replicates.first().map_or(0, |r| r.len());
    if b == 0 || replicates.iter().any(|r| r.len() != b) {
        return Err(Error::InsufficientData("bootstrap needs the same positive number of replicates per point".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level {level} outside (0, 1)")));
    }
    let mut roots = Vec::with_capacity(b);
    for j in 0..b {
        let pts: Vec<(f64, f64, f64)> = fit.points.iter().zip(replicates).map(|(p, r)| (p.0, r[j], p.2)).collect();
        if let Ok((r, _)) = crossing_of(&pts, fit.order) {
            roots.push(r);
        }
    }
    if roots.len() * 2 < b {
        return Err(Error::InsufficientData(format!("only {} of {b} replicates have a crossing", roots.len())));
    }
    roots.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    let lo = quantile(&roots, tail).min(fit.intercept);
    let hi = quantile(&roots, 1.0 - tail).max(fit.intercept);
    Ok(CrossingFit { ci: Some((lo, hi)), ci_level: level, resamples: b, ..fit.clone() })
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Gaussian replicates y_i + σ_i·ξ for points whose raw data are summarized by (value, σ).
pub fn parametric_replicates(points: &[(f64, f64, f64)], b: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    points.iter().map(|p| (0..b).map(|_| p.1 + p.2 * normal.sample(&mut rng)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_cross_at_thirty() {
        let pts: Vec<_> = (0..5).map(|i| (26.0 + i as f64, 0.5 * (30.0 - 26.0 - i as f64), 0.1)).collect();
        let f = fit_crossing(&pts, 1).unwrap();
        assert!((f.intercept - 30.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_interpolates_three_points() {
        let p = |x: f64| 2.0 - 0.5 * x + 0.25 * x * x;
        let xs = [1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let f = weighted_polyfit(&xs, &ys, &[0.0; 3], 2).unwrap();
        for (c, want) in f.coeffs.iter().zip([2.0, -0.5, 0.25]) {
            assert!((c - want).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_design_rejected() {
        assert!(weighted_polyfit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], &[0.1; 3], 1).is_err());
        assert!(weighted_polyfit(&[1.0], &[1.0], &[0.1], 1).is_err());
    }

    #[test]
    fn zero_variance_gives_zero_width() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, i as f64 - 2.0, 0.1)).collect();
        let f = fit_crossing(&pts, 1).unwrap();
        let reps: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.1; 50]).collect();
        let ci = bootstrap_ci(&f, &reps, 0.68).unwrap().ci.unwrap();
        assert!((ci.1 - ci.0).abs() < 1e-12);
    }

    #[test]
    fn no_root_reported() {
        let pts: Vec<_> = (0..4).map(|i| (i as f64, 1.0 + 1e-3 * i as f64, 0.1)).collect();
        assert!(matches!(fit_crossing(&pts, 1), Err(Error::NoRoot { .. })));
    }
}
