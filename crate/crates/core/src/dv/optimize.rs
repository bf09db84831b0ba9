//! Variational minimization of the encoded energy.

use serde::{Deserialize, Serialize};

use super::energy::{dv_energy, DvConfig, DvEvaluation};
use crate::cv::moments::derive_seed;
use crate::cv::optimize::{descend, initial_guess, nelder_mead, stochastic_descent, Objective};
use crate::error::Result;
use crate::gep::LatticeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DvOptimizer {
    GradientDescent { lr: f64, iters: usize, tol: f64 },
    /// Fixed-rate steps on sampled gradients, averaging the last `average` iterates.
    Stochastic { lr: f64, iters: usize, average: usize },
    Simplex { iters: usize, xtol: f64, ftol: f64 },
}

impl DvOptimizer {
    pub fn gradient_descent() -> Self {
        DvOptimizer::GradientDescent { lr: 1.0, iters: 200, tol: 1e-4 }
    }

    pub fn simplex() -> Self {
        DvOptimizer::Simplex { iters: 2000, xtol: 1e-8, ftol: 1e-13 }
    }
}

/// One point of a DV λ̃ sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DvRecord {
    pub lambda_tilde: f64,
    pub delta_h_ne: f64,
    pub delta_h_le: f64,
    pub stderr: f64,
    pub omega_prime_opt: f64,
    pub phi_c_opt: f64,
    pub shots: u64,
    pub seed: u64,
}

struct DvObjective<'a> {
    config: DvConfig,
    spec: &'a LatticeSpec,
}

impl Objective for DvObjective<'_> {
    type Point = DvEvaluation;

    fn value(&self, x: [f64; 2], stream: u64) -> Result<(f64, u64, DvEvaluation)> {
        let cfg = DvConfig {
            omega_prime: x[0].exp(),
            phi_c: x[1],
            seed: derive_seed(self.config.seed, &[stream]),
            ..self.config.clone()
        };
        let ev = dv_energy(&cfg, self.spec)?;
        Ok((ev.mitigated_value()?, ev.shots_used, ev))
    }

    fn gradient(&self, _x: [f64; 2], point: &DvEvaluation) -> Result<([f64; 2], u64)> {
        Ok((point.mitigated_gradient(self.spec)?.0, 0))
    }
}

/// Minimizes the mitigated energy with the configuration's shots, then re-evaluates
/// the optimum with `final_shots`.
pub fn dv_minimize(
    spec: &LatticeSpec,
    template: &DvConfig,
    optimizer: DvOptimizer,
    final_shots: Option<u64>,
) -> Result<(DvRecord, DvEvaluation)> {
    let (om, phi) = initial_guess(spec);
    let start = DvConfig { omega_prime: om, phi_c: phi, ..template.clone() };
    start.validate(spec)?;
    let obj = DvObjective { config: start.clone(), spec };
    let x0 = [om.ln(), phi];
    let trace = match optimizer {
        DvOptimizer::GradientDescent { lr, iters, tol } => descend(&obj, x0, lr, iters, tol)?,
        DvOptimizer::Simplex { iters, xtol, ftol } => nelder_mead(&obj, x0, iters, xtol, ftol)?,
        DvOptimizer::Stochastic { lr, iters, average } => stochastic_descent(&obj, x0, lr, iters, average)?,
    };
    let fin = DvConfig {
        omega_prime: trace.x[0].exp(),
        phi_c: trace.x[1],
        shots: final_shots.or(template.shots),
        seed: derive_seed(template.seed, &[u64::MAX]),
        ..template.clone()
    };
    let ev = dv_energy(&fin, spec)?;
    let est = ev.estimate()?;
    let stderr = if est.zne.len() > 1 { est.le_stderr } else { est.ne_stderr };
    Ok((
        DvRecord {
            lambda_tilde: spec.lambda_tilde(),
            delta_h_ne: est.ne,
            delta_h_le: est.le,
            stderr,
            omega_prime_opt: fin.omega_prime,
            phi_c_opt: fin.phi_c,
            shots: trace.shots + est.shots_used,
            seed: template.seed,
        },
        ev,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_theory_optimum_is_vacuum() {
        let spec = LatticeSpec::new(10, 0.1, 0.0).unwrap();
        let cfg = DvConfig::exact(0.1, 0.0, &spec);
        let (rec, _) = dv_minimize(&spec, &cfg, DvOptimizer::simplex(), None).unwrap();
        assert!((rec.omega_prime_opt - 0.1).abs() < 1e-4);
        assert!(rec.phi_c_opt.abs() < 1e-4);
        assert!(rec.delta_h_ne.abs() < 1e-10);
    }

    #[test]
    fn gradient_descent_agrees_with_simplex() {
        let spec = LatticeSpec::with_lambda_tilde(10, 0.1, 27.0).unwrap();
        let cfg = DvConfig::exact(0.1, 0.0, &spec);
        let (a, _) = dv_minimize(&spec, &cfg, DvOptimizer::simplex(), None).unwrap();
        let (b, _) = dv_minimize(&spec, &cfg, DvOptimizer::gradient_descent(), None).unwrap();
        assert!((a.delta_h_ne - b.delta_h_ne).abs() < 1e-6, "{a:?} {b:?}");
    }
}
