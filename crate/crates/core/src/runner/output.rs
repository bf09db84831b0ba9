//! CSV row types for every task and a reader for sweep files.
//!
//! | task                    | columns                                                                 |
//! |-------------------------|-------------------------------------------------------------------------|
//! | `gep scan`, `gep critical` | L, omega_c_sq_over_m2, lambda_c_over_m2                              |
//! | `duality`               | lambda_tilde, mu2_over_m2_root1, mu2_over_m2_root2 (empty when absent)  |
//! | `cv sweep`, `cv vqe`    | lambda_tilde, delta_H, stderr, OmegaPrime_opt, phiC_opt, shots, seed    |
//! | `dv sweep`, `dv vqe`    | lambda_tilde, delta_H_NE, delta_H_LE, stderr, params                    |
//! | `zne run`               | cnot_count, value, stderr                                               |

use serde::{Deserialize, Serialize};

use crate::cv::optimize::CvRecord;
use crate::dv::DvRecord;
use crate::error::{Error, Result};
use crate::gep::CriticalPoint;
use crate::qubit::ZnePoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GepRow {
    #[serde(rename = "L")]
    pub sites: usize,
    pub omega_c_sq_over_m2: f64,
    pub lambda_c_over_m2: f64,
}

impl From<&CriticalPoint> for GepRow {
    fn from(p: &CriticalPoint) -> Self {
        Self { sites: p.sites, omega_c_sq_over_m2: p.omega_c_sq_over_m2(), lambda_c_over_m2: p.lambda_c_over_m2() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityRow {
    pub lambda_tilde: f64,
    #[serde(rename = "mu2_over_m2_root1")]
    pub root1: Option<f64>,
    #[serde(rename = "mu2_over_m2_root2")]
    pub root2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda_tilde: f64,
    #[serde(rename = "delta_H")]
    pub delta_h: f64,
    pub stderr: f64,
    #[serde(rename = "OmegaPrime_opt")]
    pub omega_prime_opt: f64,
    #[serde(rename = "phiC_opt")]
    pub phi_c_opt: f64,
    pub shots: u64,
    pub seed: u64,
}

impl From<&CvRecord> for CvRow {
    fn from(r: &CvRecord) -> Self {
        Self {
            lambda_tilde: r.lambda_tilde,
            delta_h: r.delta_h,
            stderr: r.stderr,
            omega_prime_opt: r.omega_prime_opt,
            phi_c_opt: r.phi_c_opt,
            shots: r.shots,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvRow {
    pub lambda_tilde: f64,
    #[serde(rename = "delta_H_NE")]
    pub delta_h_ne: f64,
    #[serde(rename = "delta_H_LE")]
    pub delta_h_le: f64,
    pub stderr: f64,
    /// `OmegaPrime=<value>;phiC=<value>`
    pub params: String,
}

impl From<&DvRecord> for DvRow {
    fn from(r: &DvRecord) -> Self {
        Self {
            lambda_tilde: r.lambda_tilde,
            delta_h_ne: r.delta_h_ne,
            delta_h_le: r.delta_h_le,
            stderr: r.stderr,
            params: format!("OmegaPrime={};phiC={}", r.omega_prime_opt, r.phi_c_opt),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZneRow {
    pub cnot_count: usize,
    pub value: f64,
    pub stderr: f64,
}

impl From<&ZnePoint> for ZneRow {
    fn from(p: &ZnePoint) -> Self {
        Self { cnot_count: p.cnot_count, value: p.value, stderr: p.stderr }
    }
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// (λ̃, Δ⟨H⟩, σ) from a CV or DV sweep file. DV files use the extrapolated column.
pub fn read_sweep(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let x = col("lambda_tilde").ok_or_else(|| Error::Config("input: no lambda_tilde column".into()))?;
    let y = col("delta_H_LE")
        .or_else(|| col("delta_H"))
        .ok_or_else(|| Error::Config("input: no delta_H or delta_H_LE column".into()))?;
    let s = col("stderr").ok_or_else(|| Error::Config("input: no stderr column".into()))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("input: row {} has a non-numeric field", i + 2)))
        };
        out.push((num(x)?, num(y)?, num(s)?));
    }
    Ok(out)
}
