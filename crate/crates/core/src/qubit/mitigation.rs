//! Readout-error mitigation by inverting the calibration matrix.

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use rand::Rng;

use super::{pauli_x, run, sample_counts, Counts, NoiseModel, QubitGate, TwoQubitCircuit};
use crate::cv::moments::derive_seed;
use crate::error::{Error, Result};

/// Tensor-product confusion matrix and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub matrix: Matrix4<f64>,
    inverse: Matrix4<f64>,
}

impl Calibration {
    pub fn from_matrix(matrix: Matrix4<f64>) -> Result<Self> {
        let inverse = matrix.try_inverse().ok_or(Error::SingularCalibration)?;
        if !inverse.iter().all(|v| v.is_finite()) || matrix.norm() * inverse.norm() > 1e12 {
            return Err(Error::SingularCalibration);
        }
        Ok(Calibration { matrix, inverse })
    }

    /// Exact calibration for a known noise model.
    pub fn exact(noise: &NoiseModel) -> Result<Self> {
        noise.validate()?;
        Self::from_matrix(noise.confusion())
    }

    /// Calibration from the four basis-state experiments, indexed by prepared state.
    ///
    /// Each qubit's 2×2 confusion is estimated from its marginal counts over the two
    /// experiments preparing it in the same bit; the result is their tensor product.
    pub fn from_counts(experiments: &[Counts; 4]) -> Result<Self> {
        let mut per_qubit = [Matrix2::<f64>::zeros(); 2];
        for (prep, counts) in experiments.iter().enumerate() {
            if counts.shots == 0 {
                return Err(Error::InsufficientData("empty calibration experiment".into()));
            }
            let f = counts.frequencies();
            for (q, m) in per_qubit.iter_mut().enumerate() {
                let prepared = bit(prep, q);
                for (o, &fo) in f.iter().enumerate() {
                    m[(bit(o, q), prepared)] += 0.5 * fo;
                }
            }
        }
        Self::from_matrix(per_qubit[0].kronecker(&per_qubit[1]))
    }

    /// Runs the four calibration experiments under `noise`.
    pub fn measure(noise: &NoiseModel, shots: u64, seed: u64) -> Result<Self> {
        Self::from_counts(&Self::experiments(noise, shots, seed)?)
    }

    /// Counts of the four basis-state preparations, indexed by the prepared outcome.
    pub fn experiments(noise: &NoiseModel, shots: u64, seed: u64) -> Result<[Counts; 4]> {
        let x = pauli_x();
        let experiments: Vec<Counts> = (0..4)
            .map(|prep| {
                let mut circ = TwoQubitCircuit::new();
                for q in 0..2 {
                    if bit(prep, q) == 1 {
                        circ = circ.push(QubitGate::Unitary { qubit: q, matrix: x });
                    }
                }
                run(&circ, noise, shots, derive_seed(seed, &[prep as u64]))
            })
            .collect::<Result<_>>()?;
        Ok(experiments.try_into().expect("four experiments"))
    }

    pub fn inverse(&self) -> &Matrix4<f64> {
        &self.inverse
    }
}

fn bit(outcome: usize, qubit: usize) -> usize {
    (outcome >> (1 - qubit)) & 1
}

/// Quasi-probabilities C⁻¹f together with the frequencies they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigatedDistribution {
    pub quasi: [f64; 4],
    pub shots: u64,
    pub seed: u64,
    frequencies: [f64; 4],
    transfer: [[f64; 4]; 4],
}

impl MitigatedDistribution {
    /// Mitigated expectation of an outcome function w and the variance of that estimate.
    ///
    /// The estimate is Σ_o f_o h_o with h = C⁻ᵀw, a sample mean over shots. The variance
    /// is zero at the probability level (shots = 0).
    pub fn expectation(&self, w: &[f64; 4]) -> (f64, f64) {
        let h: [f64; 4] = std::array::from_fn(|o| (0..4).map(|i| self.transfer[i][o] * w[i]).sum());
        let mean: f64 = (0..4).map(|o| self.frequencies[o] * h[o]).sum();
        if self.shots == 0 {
            return (mean, 0.0);
        }
        let second: f64 = (0..4).map(|o| self.frequencies[o] * h[o] * h[o]).sum();
        (mean, (second - mean * mean).max(0.0) / self.shots as f64)
    }

    /// The same mitigation applied to a multinomial resample of the observed frequencies.
    pub fn resample<R: Rng>(&self, rng: &mut R) -> Self {
        if self.shots == 0 {
            return self.clone();
        }
        let counts = sample_counts(&self.frequencies, self.shots, rng);
        let freq: [f64; 4] = std::array::from_fn(|o| counts[o] as f64 / self.shots as f64);
        let quasi = std::array::from_fn(|i| (0..4).map(|o| self.transfer[i][o] * freq[o]).sum());
        MitigatedDistribution { quasi, frequencies: freq, ..self.clone() }
    }

    /// The same frequencies mitigated with another calibration.
    pub fn remitigate(&self, calibration: &Calibration) -> Self {
        apply(self.frequencies, &calibration.inverse, self.shots, self.seed)
    }
}

fn apply(freq: [f64; 4], inverse: &Matrix4<f64>, shots: u64, seed: u64) -> MitigatedDistribution {
    let q = inverse * Vector4::from(freq);
    MitigatedDistribution {
        quasi: std::array::from_fn(|i| q[i]),
        shots,
        seed,
        frequencies: freq,
        transfer: std::array::from_fn(|i| std::array::from_fn(|j| inverse[(i, j)])),
    }
}

pub fn mitigate_readout(counts: &Counts, calibration: &Calibration) -> MitigatedDistribution {
    apply(counts.frequencies(), &calibration.inverse, counts.shots, counts.seed)
}

/// Probability-level mitigation, without shot noise.
pub fn mitigate_probabilities(probs: &[f64; 4], calibration: &Calibration) -> MitigatedDistribution {
    apply(*probs, &calibration.inverse, 0, 0)
}

/// Counts or probabilities passed through unchanged.
pub fn unmitigated(freq: [f64; 4], shots: u64, seed: u64) -> MitigatedDistribution {
    apply(freq, &Matrix4::identity(), shots, seed)
}

#[cfg(test)]
mod tests {
    use super::super::{schmidt_circuit, Mat2};
    use super::*;

    fn bell() -> TwoQubitCircuit {
        schmidt_circuit(std::f64::consts::FRAC_PI_2, &Mat2::identity(), &Mat2::identity()).unwrap()
    }

    const ZZ: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

    #[test]
    fn identity_confusion_keeps_frequencies() {
        let cal = Calibration::exact(&NoiseModel::ideal()).unwrap();
        let counts = run(&bell(), &NoiseModel::ideal(), 1000, 3).unwrap();
        let m = mitigate_readout(&counts, &cal);
        assert_eq!(m.quasi, counts.frequencies());
    }

    #[test]
    fn exact_calibration_recovers_born_probabilities() {
        let circ = schmidt_circuit(1.2, &super::super::ry(0.3), &super::super::hadamard()).unwrap();
        let mut noise = NoiseModel::symmetric(0.0, 0.02);
        noise.ro_confusion[0] = [[0.97, 0.05], [0.03, 0.95]];
        noise.ro_confusion[1] = [[0.99, 0.02], [0.01, 0.98]];
        let ideal_ro = NoiseModel { ro_confusion: NoiseModel::ideal().ro_confusion, ..noise };
        let born = circ.probabilities(&ideal_ro).unwrap();
        let m = mitigate_probabilities(&circ.probabilities(&noise).unwrap(), &Calibration::exact(&noise).unwrap());
        for (q, b) in m.quasi.iter().zip(&born) {
            assert!((q - b).abs() < 1e-12);
        }
        assert!((m.quasi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measured_calibration_converges_to_exact() {
        let noise = NoiseModel::symmetric(0.01, 0.0);
        let cal = Calibration::measure(&noise, 1_000_000, 5).unwrap();
        assert!((cal.matrix - noise.confusion()).amax() < 1e-3);
    }

    #[test]
    fn mitigated_bell_parity_reflects_cnot_noise_only() {
        let p = 0.02;
        let noise = NoiseModel::symmetric(0.01, p);
        let shots = 1_000_000;
        let cal = Calibration::measure(&noise, shots, 11).unwrap();
        let m = mitigate_readout(&run(&bell(), &noise, shots, 12).unwrap(), &cal);
        let (zz, var) = m.expectation(&ZZ);
        assert!((zz - (1.0 - p)).abs() < 4.0 * var.sqrt() + 1e-4, "{zz} ± {}", var.sqrt());
    }

    #[test]
    fn singular_calibration_rejected() {
        let noise = NoiseModel::symmetric(0.5, 0.0);
        assert!(matches!(Calibration::exact(&noise), Err(Error::SingularCalibration)));
    }
}
