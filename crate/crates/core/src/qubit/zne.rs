//! CNOT folding and zero-noise extrapolation.

use serde::{Deserialize, Serialize};

use super::TwoQubitCircuit;
use crate::error::{Error, Result};
use crate::fit::weighted_polyfit;

/// Copy of `circuit` with each CNOT followed by `k_pairs` identity pairs.
pub fn fold_cnots(circuit: &TwoQubitCircuit, k_pairs: usize) -> TwoQubitCircuit {
    TwoQubitCircuit { cnot_fold_pairs: k_pairs, ..circuit.clone() }
}

/// Fold levels used for extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZneLevels {
    /// 1, 3, 5, 7, 9 CNOTs.
    #[default]
    Five,
    /// 1, 3, 5 CNOTs.
    Three,
}

impl ZneLevels {
    pub fn fold_pairs(self) -> Vec<usize> {
        match self {
            ZneLevels::Five => (0..5).collect(),
            ZneLevels::Three => (0..3).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZnePoint {
    pub cnot_count: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZneFit {
    pub value: f64,
    pub stderr: f64,
}

/// Weighted polynomial fit in CNOT count, evaluated at zero CNOTs.
pub fn zne_fit(points: &[ZnePoint], order: usize) -> Result<ZneFit> {
    if order == 0 {
        return Err(Error::InvalidParameter("extrapolation order must be at least 1".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.cnot_count as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.value).collect();
    let s: Vec<f64> = points.iter().map(|p| p.stderr).collect();
    let fit = weighted_polyfit(&x, &y, &s, order)?;
    Ok(ZneFit { value: fit.eval(0.0), stderr: fit.eval_stderr(0.0) })
}
