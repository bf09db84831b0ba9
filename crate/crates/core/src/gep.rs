//! Gaussian effective potential (GEP) on a periodic lattice.
//!
//! Lattice spacing is 1. A Gaussian trial state is labelled by a mass parameter Ω
//! and a uniform field shift φ_C; its energy density is
//!
//! ```text
//! V_G = ½ m₀² φ_C² + λ/24 (φ_C² + 6 I₀)φ_C² + I₁ + (m₀² − Ω²)/2 · I₀ + λ/8 · I₀²
//! ```
//!
//! with I₀ = (1/2L) Σ 1/ω(k), I₁ = (1/2L) Σ ω(k), ω(k)² = Ω² + 4 sin²(πk/L), and the
//! bare mass fixed by m₀² = m² − (λ/2) I₀(m).

use crate::error::{Error, Result};
use crate::par::{pairwise_sum, Execution};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest lattice supported by the sums here.
pub const MAX_SITES: usize = 1 << 16;

/// Lattice size, renormalized mass and coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub sites: usize,
    pub mass: f64,
    pub lambda: f64,
}

impl LatticeSpec {
    pub fn new(sites: usize, mass: f64, lambda: f64) -> Result<Self> {
        check_sites(sites)?;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidLattice(format!("mass must be positive, got {mass}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidLattice(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(Self { sites, mass, lambda })
    }

    /// Builds a spec from the dimensionless coupling λ̃ = λ/m².
    pub fn with_lambda_tilde(sites: usize, mass: f64, lambda_tilde: f64) -> Result<Self> {
        Self::new(sites, mass, lambda_tilde * mass * mass)
    }

    pub fn lambda_tilde(&self) -> f64 {
        self.lambda / (self.mass * self.mass)
    }

    /// Bare mass squared m₀² for this spec.
    pub fn bare_mass_squared(&self) -> f64 {
        self.mass * self.mass - 0.5 * self.lambda * mode_sums_unchecked(self.mass, self.sites).i0
    }
}

fn check_sites(sites: usize) -> Result<()> {
    if sites < 2 || !sites.is_multiple_of(2) {
        return Err(Error::InvalidLattice(format!("L must be even and >= 2, got {sites}")));
    }
    if sites > MAX_SITES {
        return Err(Error::InvalidLattice(format!("L must be <= {MAX_SITES}, got {sites}")));
    }
    Ok(())
}

fn check_mass(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!("mass parameter must be positive, got {omega}")));
    }
    Ok(())
}

/// Lattice dispersion ω(k) at a given mass parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    pub omega_param: f64,
    pub omega: Vec<f64>,
}

impl DispersionTable {
    pub fn sites(&self) -> usize {
        self.omega.len()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.omega[k]
    }
}

fn omega_k(omega: f64, sites: usize, k: usize) -> f64 {
    let s = (PI * k as f64 / sites as f64).sin();
    (omega * omega + 4.0 * s * s).sqrt()
}

pub fn dispersion(omega: f64, sites: usize) -> Result<DispersionTable> {
    check_mass(omega)?;
    check_sites(sites)?;
    Ok(DispersionTable {
        omega_param: omega,
        omega: (0..sites).map(|k| omega_k(omega, sites, k)).collect(),
    })
}

/// The two lattice mode sums entering the GEP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSums {
    pub i0: f64,
    pub i1: f64,
}

pub fn mode_sums(omega: f64, sites: usize) -> Result<ModeSums> {
    check_mass(omega)?;
    check_sites(sites)?;
    Ok(mode_sums_unchecked(omega, sites))
}

fn mode_sums_unchecked(omega: f64, sites: usize) -> ModeSums {
    let w: Vec<f64> = (0..sites).map(|k| omega_k(omega, sites, k)).collect();
    let inv: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
    let norm = 0.5 / sites as f64;
    ModeSums {
        i0: norm * pairwise_sum(&inv),
        i1: norm * pairwise_sum(&w),
    }
}

/// dI₀/dΩ² = −(1/4L) Σ ω(k)⁻³.
fn di0_domega_sq(omega: f64, sites: usize) -> f64 {
    let v: Vec<f64> = (0..sites).map(|k| omega_k(omega, sites, k).powi(-3)).collect();
    -0.25 / sites as f64 * pairwise_sum(&v)
}

/// m₀² = m² − (λ/2) I₀(m). Negative values are allowed.
pub fn bare_mass_squared(mass: f64, lambda: f64, sites: usize) -> Result<f64> {
    check_mass(mass)?;
    check_sites(sites)?;
    Ok(mass * mass - 0.5 * lambda * mode_sums_unchecked(mass, sites).i0)
}

/// V_G(φ_C, Ω) per site.
pub fn gep_value(phi_c: f64, omega: f64, spec: &LatticeSpec) -> Result<f64> {
    check_mass(omega)?;
    let m0_sq = spec.bare_mass_squared();
    let ModeSums { i0, i1 } = mode_sums_unchecked(omega, spec.sites);
    let phi_sq = phi_c * phi_c;
    let lambda = spec.lambda;
    Ok(0.5 * m0_sq * phi_sq
        + lambda / 24.0 * (phi_sq + 6.0 * i0) * phi_sq
        + i1
        + 0.5 * (m0_sq - omega * omega) * i0
        + lambda / 8.0 * i0 * i0)
}

/// The GEP evaluated on the stationary curve φ_C(Ω).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GepEvaluation {
    pub omega: f64,
    pub potential: f64,
    /// φ_C² on the stationary curve; negative values are unphysical.
    pub phi_c_sq: f64,
}

/// Evaluates V_G along the curve where ∂V_G/∂Ω = 0, parametrized by Ω.
pub fn gep_of_omega(omega: f64, spec: &LatticeSpec) -> Result<GepEvaluation> {
    check_mass(omega)?;
    if spec.lambda == 0.0 {
        return Err(Error::InvalidParameter("gep_of_omega needs lambda > 0".into()));
    }
    if omega < spec.mass {
        return Err(Error::InvalidParameter(format!(
            "Omega = {omega} below the renormalized mass {}",
            spec.mass
        )));
    }
    let lambda = spec.lambda;
    let m_sq = spec.mass * spec.mass;
    let i0_m = mode_sums_unchecked(spec.mass, spec.sites).i0;
    let ModeSums { i0, i1 } = mode_sums_unchecked(omega, spec.sites);
    let m0_sq = m_sq - 0.5 * lambda * i0_m;
    let phi_c_sq = 2.0 * (omega * omega - m0_sq) / lambda - i0;
    // m₀ eliminated: u = φ_C², V = ½m₀²u + λu²/24 + I₁ − λI₀²/8
    let potential = 0.5 * m0_sq * phi_c_sq + lambda / 24.0 * phi_c_sq * phi_c_sq + i1 - lambda / 8.0 * i0 * i0;
    Ok(GepEvaluation { omega, potential, phi_c_sq })
}

/// dV_G/dΩ² along the stationary curve.
///
/// Equals (1/3λ)[1 − (λ/2) dI₀/dΩ²][Ω² + 2m² + λI₀(Ω) − λI₀(m)]. The first factor
/// is positive, so sign changes come from the second.
pub fn gep_gradient(omega: f64, spec: &LatticeSpec) -> Result<f64> {
    check_mass(omega)?;
    if spec.lambda == 0.0 {
        return Err(Error::InvalidParameter("gep_gradient needs lambda > 0".into()));
    }
    let lambda = spec.lambda;
    let i0_m = mode_sums_unchecked(spec.mass, spec.sites).i0;
    let i0 = mode_sums_unchecked(omega, spec.sites).i0;
    let first = 1.0 - 0.5 * lambda * di0_domega_sq(omega, spec.sites);
    let second = omega * omega + 2.0 * spec.mass * spec.mass + lambda * (i0 - i0_m);
    Ok(first * second / (3.0 * lambda))
}

/// Coupling at which Ω is a stationary point of the GEP curve.
pub fn stationary_lambda(omega: f64, mass: f64, sites: usize) -> Result<f64> {
    check_mass(omega)?;
    check_mass(mass)?;
    check_sites(sites)?;
    let i0_m = mode_sums_unchecked(mass, sites).i0;
    let i0 = mode_sums_unchecked(omega, sites).i0;
    Ok((omega * omega + 2.0 * mass * mass) / (i0_m - i0))
}

/// Local minimum Ω₁ > m of the GEP curve at the spec's coupling, if one exists.
///
/// Scans Ω on a geometric grid for a − → + sign change of [`gep_gradient`] and
/// bisects. `None` means the coupling is below the two-minima regime.
pub fn broken_minimum(spec: &LatticeSpec) -> Result<Option<GepEvaluation>> {
    let m = spec.mass;
    let grid = geometric_grid(m * 1.0001, m * 1.0e3, 600);
    let g: Vec<f64> = grid.iter().map(|&w| gep_gradient(w, spec)).collect::<Result<_>>()?;
    for i in 0..grid.len() - 1 {
        if g[i] < 0.0 && g[i + 1] >= 0.0 {
            let root = bisect(|w| gep_gradient(w, spec).unwrap_or(f64::NAN), grid[i], grid[i + 1], 1e-15)?;
            return gep_of_omega(root, spec).map(Some);
        }
    }
    Ok(None)
}

/// Critical mass parameter and coupling for one lattice size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub sites: usize,
    pub mass: f64,
    pub omega_c: f64,
    pub lambda_c: f64,
}

impl CriticalPoint {
    pub fn omega_c_sq_over_m2(&self) -> f64 {
        (self.omega_c / self.mass).powi(2)
    }

    pub fn lambda_c_over_m2(&self) -> f64 {
        self.lambda_c / (self.mass * self.mass)
    }
}

/// ΔV_G = V_G(Ω₁) − V_G(m) with λ eliminated through the stationarity condition at Ω₁.
///
/// With a = Ω₁², b = m²:
/// 4(a+2b)·ΔV = (−a² − 4ab + 2b²) I₀(Ω₁) + (−a² + 2ab + 2b²) I₀(m) + 4(a+2b)(I₁(Ω₁) − I₁(m)).
pub fn critical_delta_v(omega1: f64, mass: f64, sites: usize) -> Result<f64> {
    check_mass(omega1)?;
    check_mass(mass)?;
    check_sites(sites)?;
    Ok(delta_v_unchecked(omega1, &mode_sums_unchecked(mass, sites), mass, sites))
}

fn delta_v_unchecked(omega1: f64, at_mass: &ModeSums, mass: f64, sites: usize) -> f64 {
    let a = omega1 * omega1;
    let b = mass * mass;
    let s1 = mode_sums_unchecked(omega1, sites);
    let num = (-a * a - 4.0 * a * b + 2.0 * b * b) * s1.i0
        + (-a * a + 2.0 * a * b + 2.0 * b * b) * at_mass.i0
        + 4.0 * (a + 2.0 * b) * (s1.i1 - at_mass.i1);
    num / (4.0 * (a + 2.0 * b))
}

/// Default tolerance on Ω_c (relative) for [`critical_point`].
pub const CRITICAL_TOLERANCE: f64 = 1e-14;

pub fn critical_point(mass: f64, sites: usize) -> Result<CriticalPoint> {
    critical_point_with_tolerance(mass, sites, CRITICAL_TOLERANCE)
}

/// Solves ΔV_G(Ω_c) = 0 and returns λ_c from the stationarity condition.
///
/// `tolerance` bounds the relative width of the final bisection bracket.
pub fn critical_point_with_tolerance(mass: f64, sites: usize, tolerance: f64) -> Result<CriticalPoint> {
    check_mass(mass)?;
    check_sites(sites)?;
    let at_mass = mode_sums_unchecked(mass, sites);
    let f = |w: f64| delta_v_unchecked(w, &at_mass, mass, sites);
    let grid = geometric_grid(1.01 * mass, 1.0e3 * mass, 400);
    let mut prev = (grid[0], f(grid[0]));
    for &w in &grid[1..] {
        let v = f(w);
        if prev.1 > 0.0 && v <= 0.0 {
            let omega_c = bisect(f, prev.0, w, tolerance)?;
            let i0_c = mode_sums_unchecked(omega_c, sites).i0;
            let lambda_c = (omega_c * omega_c + 2.0 * mass * mass) / (at_mass.i0 - i0_c);
            return Ok(CriticalPoint { sites, mass, omega_c, lambda_c });
        }
        prev = (w, v);
    }
    Err(Error::NoBracket { mass, sites })
}

/// [`critical_point`] over several lattice sizes, in input order.
pub fn critical_scan(mass: f64, sites: &[usize]) -> Vec<Result<CriticalPoint>> {
    critical_scan_with(mass, sites, Execution::default())
}

pub fn critical_scan_with(mass: f64, sites: &[usize], exec: Execution) -> Vec<Result<CriticalPoint>> {
    exec.map(sites, |&l| critical_point(mass, l))
}

/// Residual of the continuum duality relation (2 + x)/λ̃ − ln(x)/4π.
pub fn duality_residual(x: f64, lambda_tilde: f64) -> f64 {
    (2.0 + x) / lambda_tilde - x.ln() / (4.0 * PI)
}

/// Positive roots x = μ²/m² of (2 + x)/λ̃ = ln(x)/4π, in increasing order.
///
/// Sign changes are located on a log grid from 10⁻⁸ to 10⁸ that also contains the
/// analytic minimum x* = λ̃/4π of the residual, so a tangency is caught as a single root.
pub fn duality_solutions(lambda_tilde: f64) -> Vec<f64> {
    if !(lambda_tilde > 0.0) || !lambda_tilde.is_finite() {
        return Vec::new();
    }
    let h = |x: f64| duality_residual(x, lambda_tilde);
    let x_star = lambda_tilde / (4.0 * PI);
    let h_star = h(x_star);
    if h_star > 0.0 {
        return Vec::new();
    }
    if h_star == 0.0 {
        return vec![x_star];
    }
    let mut grid = geometric_grid(1e-8, 1e8, 1601);
    grid.push(x_star);
    grid.sort_by(f64::total_cmp);
    let mut roots = Vec::new();
    for pair in grid.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ha, hb) = (h(a), h(b));
        if ha == 0.0 {
            roots.push(a);
        } else if ha.signum() != hb.signum() && hb != 0.0 {
            if let Ok(r) = bisect(h, a, b, 1e-15) {
                roots.push(r);
            }
        }
    }
    roots
}

/// Smallest λ̃ at which [`duality_solutions`] is non-empty, by bisection on [lo, hi].
pub fn duality_threshold(lo: f64, hi: f64) -> Result<f64> {
    let has = |l: f64| !duality_solutions(l).is_empty();
    if has(lo) || !has(hi) {
        return Err(Error::InvalidParameter(format!("[{lo}, {hi}] does not bracket the duality threshold")));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-10 * b {
        let mid = 0.5 * (a + b);
        if has(mid) {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

pub(crate) fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Bisection on a sign-changing bracket until its relative width is below `rel_tol`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, rel_tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return Err(Error::InvalidParameter(format!("[{a}, {b}] is not a sign-changing bracket")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= rel_tol * mid.abs() || mid == a || mid == b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn dispersion_values() {
        let d = dispersion(0.1, 10).unwrap();
        assert_eq!(d.get(0), 0.1);
        assert!(close(d.get(5), (0.01f64 + 4.0).sqrt(), 1e-15));
        assert!(close(d.get(3), d.get(7), 1e-15));
        assert!(dispersion(0.1, 9).is_err());
        assert!(dispersion(0.0, 10).is_err());
    }

    #[test]
    fn mode_sums_two_sites() {
        let s = mode_sums(1.0, 2).unwrap();
        let r5 = 5f64.sqrt();
        assert!(close(s.i0, 0.25 * (1.0 + 1.0 / r5), 1e-15));
        assert!(close(s.i1, 0.25 * (1.0 + r5), 1e-15));
    }

    #[test]
    fn bare_mass_examples() {
        assert_eq!(bare_mass_squared(0.1, 0.0, 10).unwrap(), 0.1f64 * 0.1);
        assert!(close(bare_mass_squared(1.0, 2.0, 2).unwrap(), 1.0 - 0.25 * (1.0 + 1.0 / 5f64.sqrt()), 1e-14));
        assert!(bare_mass_squared(0.1, 0.3, 10).unwrap() < 0.0);
    }

    #[test]
    fn lambda_zero_rejected_by_curve() {
        let spec = LatticeSpec::new(10, 0.1, 0.0).unwrap();
        assert!(gep_of_omega(0.2, &spec).is_err());
        assert!(gep_value(0.0, 0.1, &spec).is_ok());
    }
}
