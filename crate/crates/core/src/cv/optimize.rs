//! Minimization of ⟨H⟩ over (Ω′, φ_C).
//!
//! Both optimizers work in (ln Ω′, φ_C) so that Ω′ stays positive.

use serde::{Deserialize, Serialize};

use super::ansatz::{AnsatzConfig, Backend};
use super::energy::{evaluate, EnergyEstimate, Evaluation};
use super::gradient::{gradient_at, GradientMethod};
use super::moments::derive_seed;
use crate::error::{Error, Result};
use crate::gep::{broken_minimum, LatticeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Fixed learning rate, halved whenever a step does not lower the energy.
    GradientDescent { lr: f64, iters: usize, tol: f64, method: GradientMethod },
    /// Nelder–Mead simplex.
    Simplex { iters: usize, xtol: f64, ftol: f64 },
    /// Fixed-rate steps on sampled gradients, averaging the last `average` iterates.
    Stochastic { lr: f64, iters: usize, average: usize, method: GradientMethod },
}

impl Optimizer {
    pub fn gradient_descent() -> Self {
        Optimizer::GradientDescent { lr: 1.0, iters: 200, tol: 1e-4, method: GradientMethod::default() }
    }

    pub fn simplex() -> Self {
        Optimizer::Simplex { iters: 2000, xtol: 1e-8, ftol: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub config: AnsatzConfig,
    pub delta_h: EnergyEstimate,
    pub iterations: usize,
    /// (Ω′, φ_C, ΔH) after each accepted step.
    pub trajectory: Vec<(f64, f64, f64)>,
    pub shots_used: u64,
}

/// Starting point: the GEP broken-phase minimum when it exists, else (2m, 1).
pub fn initial_guess(spec: &LatticeSpec) -> (f64, f64) {
    match broken_minimum(spec) {
        Ok(Some(ev)) => (ev.omega, ev.phi_c_sq.max(0.0).sqrt()),
        _ => (2.0 * spec.mass, 1.0),
    }
}

/// The configuration with its sampling seed replaced by a stream-derived one.
pub fn reseeded(config: &AnsatzConfig, stream: &[u64]) -> AnsatzConfig {
    let mut c = config.clone();
    if let Backend::Sampled { shots, seed } = c.backend {
        c.backend = Backend::Sampled { shots, seed: derive_seed(seed, stream) };
    }
    c
}

fn at(config: &AnsatzConfig, x: [f64; 2]) -> AnsatzConfig {
    AnsatzConfig { omega_prime: x[0].exp(), phi_c: x[1], ..config.clone() }
}

/// A variational energy over x = (ln Ω′, φ_C).
pub trait Objective {
    /// Whatever the gradient needs from an evaluation.
    type Point;
    /// Value at x, shots spent, and the evaluation. `stream` selects the sampling seed.
    fn value(&self, x: [f64; 2], stream: u64) -> Result<(f64, u64, Self::Point)>;
    /// ∂/∂(ln Ω′, φ_C) and shots spent.
    fn gradient(&self, x: [f64; 2], point: &Self::Point) -> Result<([f64; 2], u64)>;
}

/// Outcome of [`descend`] or [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct Trace<P> {
    pub x: [f64; 2],
    /// The evaluation at `x`.
    pub point: P,
    pub value: f64,
    pub iterations: usize,
    /// (Ω′, φ_C, value) after each accepted step.
    pub trajectory: Vec<(f64, f64, f64)>,
    pub shots: u64,
}

/// Gradient descent with a fixed rate, halved whenever a step does not lower the value.
///
/// Converges when the proposed step is shorter than `tol`.
pub fn descend<O: Objective>(obj: &O, x0: [f64; 2], lr0: f64, iters: usize, tol: f64) -> Result<Trace<O::Point>> {
    if !(lr0 > 0.0) {
        return Err(Error::InvalidParameter(format!("learning rate must be positive, got {lr0}")));
    }
    let mut x = x0;
    let (mut value, mut shots, mut point) = obj.value(x, 0)?;
    let mut trajectory = vec![(x[0].exp(), x[1], value)];
    let mut lr = lr0;
    let mut grad = None;
    for it in 1..=iters {
        if grad.is_none() {
            let (g, n) = obj.gradient(x, &point)?;
            shots += n;
            grad = Some(g);
        }
        let g = grad.expect("gradient computed above");
        let step = [lr * g[0], lr * g[1]];
        if step[0].hypot(step[1]) < tol {
            return Ok(Trace { x, point, value, iterations: it, trajectory, shots });
        }
        let trial = [x[0] - step[0], x[1] - step[1]];
        let (v, n, p) = obj.value(trial, it as u64)?;
        shots += n;
        if v < value {
            x = trial;
            value = v;
            point = p;
            grad = None;
            trajectory.push((x[0].exp(), x[1], value));
        } else {
            lr *= 0.5;
        }
    }
    Err(Error::NotConverged { iterations: iters, trajectory })
}

/// Fixed-rate descent without value checks, for noisy gradients.
///
/// Runs `iters` steps and returns the mean of the iterates after step `iters − average`.
/// The reported value is the objective at that mean, sampled on stream `iters + 1`.
pub fn stochastic_descent<O: Objective>(obj: &O, x0: [f64; 2], lr: f64, iters: usize, average: usize) -> Result<Trace<O::Point>> {
    if !(lr > 0.0) || iters == 0 || average == 0 || average > iters {
        return Err(Error::InvalidParameter(format!(
            "stochastic descent needs lr > 0 and 0 < average <= iters, got lr {lr}, iters {iters}, average {average}"
        )));
    }
    let mut x = x0;
    let mut shots = 0;
    let mut sum = [0.0; 2];
    let mut trajectory = Vec::with_capacity(iters);
    for it in 0..iters {
        let (v, n, point) = obj.value(x, it as u64)?;
        let (g, m) = obj.gradient(x, &point)?;
        shots += n + m;
        trajectory.push((x[0].exp(), x[1], v));
        x = [x[0] - lr * g[0], x[1] - lr * g[1]];
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::NotConverged { iterations: it + 1, trajectory });
        }
        if it + average >= iters {
            sum[0] += x[0];
            sum[1] += x[1];
        }
    }
    let mean = [sum[0] / average as f64, sum[1] / average as f64];
    let (value, n, point) = obj.value(mean, iters as u64 + 1)?;
    Ok(Trace { x: mean, point, value, iterations: iters, trajectory, shots: shots + n })
}

/// Nelder–Mead simplex; every evaluation uses sampling stream 0.
pub fn nelder_mead<O: Objective>(obj: &O, x0: [f64; 2], iters: usize, xtol: f64, ftol: f64) -> Result<Trace<O::Point>> {
    let mut shots = 0;
    let mut f = |x: [f64; 2]| -> Result<f64> {
        let (v, n, _) = obj.value(x, 0)?;
        shots += n;
        Ok(v)
    };
    let mut pts = vec![x0, [x0[0] + 0.1, x0[1]], [x0[0], x0[1] + 0.1]];
    let mut vals = pts.iter().map(|&p| f(p)).collect::<Result<Vec<_>>>()?;
    let mut trajectory = Vec::new();
    for it in 1..=iters {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i]).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        trajectory.push((pts[0][0].exp(), pts[0][1], vals[0]));
        let spread = (1..3)
            .map(|i| (pts[i][0] - pts[0][0]).abs().max((pts[i][1] - pts[0][1]).abs()))
            .fold(0.0, f64::max);
        if spread < xtol && (vals[2] - vals[0]).abs() < ftol {
            let (value, n, point) = obj.value(pts[0], 0)?;
            return Ok(Trace { x: pts[0], point, value, iterations: it, trajectory, shots: shots + n });
        }
        let centroid = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let along = |t: f64| [centroid[0] + t * (pts[2][0] - centroid[0]), centroid[1] + t * (pts[2][1] - centroid[1])];
        let xr = along(-1.0);
        let fr = f(xr)?;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe)?;
            if fe < fr {
                pts[2] = xe;
                vals[2] = fe;
            } else {
                pts[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = xr;
            vals[2] = fr;
        } else {
            let xc = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fc = f(xc)?;
            if fc < vals[2].min(fr) {
                pts[2] = xc;
                vals[2] = fc;
            } else {
                for i in 1..3 {
                    pts[i] = [(pts[i][0] + pts[0][0]) / 2.0, (pts[i][1] + pts[0][1]) / 2.0];
                    vals[i] = f(pts[i])?;
                }
            }
        }
    }
    Err(Error::NotConverged { iterations: iters, trajectory })
}

struct CvObjective<'a> {
    config: &'a AnsatzConfig,
    spec: &'a LatticeSpec,
    method: GradientMethod,
}

impl Objective for CvObjective<'_> {
    type Point = (AnsatzConfig, Evaluation);

    fn value(&self, x: [f64; 2], stream: u64) -> Result<(f64, u64, Self::Point)> {
        let cfg = reseeded(&at(self.config, x), &[stream]);
        let eval = evaluate(&cfg, self.spec)?;
        let est = eval.difference();
        Ok((est.value, est.shots_used, (cfg, eval)))
    }

    fn gradient(&self, _x: [f64; 2], point: &Self::Point) -> Result<([f64; 2], u64)> {
        let (cfg, eval) = point;
        let g = gradient_at(eval, cfg, self.spec, self.method)?;
        Ok(([cfg.omega_prime * g.d_omega_prime, g.d_phi_c], g.shots_used))
    }
}

pub fn minimize(config0: &AnsatzConfig, spec: &LatticeSpec, optimizer: Optimizer) -> Result<OptimizationResult> {
    config0.validate(spec)?;
    let x0 = [config0.omega_prime.ln(), config0.phi_c];
    let trace = match optimizer {
        Optimizer::GradientDescent { lr, iters, tol, method } => {
            descend(&CvObjective { config: config0, spec, method }, x0, lr, iters, tol)?
        }
        Optimizer::Simplex { iters, xtol, ftol } => {
            let obj = CvObjective { config: config0, spec, method: GradientMethod::default() };
            nelder_mead(&obj, x0, iters, xtol, ftol)?
        }
        Optimizer::Stochastic { lr, iters, average, method } => {
            stochastic_descent(&CvObjective { config: config0, spec, method }, x0, lr, iters, average)?
        }
    };
    let (config, eval) = trace.point;
    Ok(OptimizationResult {
        config,
        delta_h: eval.difference(),
        iterations: trace.iterations,
        trajectory: trace.trajectory,
        shots_used: trace.shots,
    })
}

/// One point of a λ̃ sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRecord {
    pub lambda_tilde: f64,
    pub delta_h: f64,
    pub stderr: f64,
    pub omega_prime_opt: f64,
    pub phi_c_opt: f64,
    pub shots: u64,
    pub seed: u64,
    pub leakage_flag: bool,
}

/// Minimizes at one coupling and re-evaluates the optimum, with `final_shots` for sampled backends.
pub fn cv_point(template: &AnsatzConfig, spec: &LatticeSpec, optimizer: Optimizer, final_shots: u64) -> Result<(CvRecord, Evaluation)> {
    let (om, phi) = initial_guess(spec);
    let start = AnsatzConfig { omega_prime: om, phi_c: phi, ..template.clone() };
    let opt = minimize(&start, spec, optimizer)?;
    let (final_cfg, seed) = match template.backend {
        Backend::Sampled { seed, .. } => {
            let s = derive_seed(seed, &[u64::MAX]);
            (AnsatzConfig { backend: Backend::Sampled { shots: final_shots, seed: s }, ..opt.config.clone() }, seed)
        }
        _ => (opt.config.clone(), 0),
    };
    let eval = evaluate(&final_cfg, spec)?;
    let est = eval.difference();
    Ok((
        CvRecord {
            lambda_tilde: spec.lambda_tilde(),
            delta_h: est.value,
            stderr: est.stderr,
            omega_prime_opt: final_cfg.omega_prime,
            phi_c_opt: final_cfg.phi_c,
            shots: opt.shots_used + est.shots_used,
            seed,
            leakage_flag: est.leakage_flag,
        },
        eval,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_theory_minimum_is_vacuum() {
        let spec = LatticeSpec::new(10, 0.1, 0.0).unwrap();
        let cfg = AnsatzConfig::new(0.15, 0.3, &spec);
        let r = minimize(&cfg, &spec, Optimizer::simplex()).unwrap();
        assert!((r.config.omega_prime - 0.1).abs() < 1e-4, "{}", r.config.omega_prime);
        assert!(r.config.phi_c.abs() < 1e-4);
        assert!(r.delta_h.value.abs() < 1e-10);
    }

    #[test]
    fn gradient_descent_reaches_simplex_minimum() {
        let spec = LatticeSpec::with_lambda_tilde(10, 0.1, 28.0).unwrap();
        let (om, phi) = initial_guess(&spec);
        let cfg = AnsatzConfig::new(om, phi, &spec);
        let a = minimize(&cfg, &spec, Optimizer::simplex()).unwrap();
        let b = minimize(&cfg, &spec, Optimizer::gradient_descent()).unwrap();
        assert!((a.delta_h.value - b.delta_h.value).abs() < 1e-6, "{} vs {}", a.delta_h.value, b.delta_h.value);
    }
}
