//! Two-qubit circuits with depolarizing CNOT noise and readout confusion.
//!
//! Basis index = 2·b₀ + b₁: qubit 0 is the most significant bit.

pub mod mitigation;
pub mod zne;

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mitigation::{mitigate_probabilities, mitigate_readout, unmitigated, Calibration, MitigatedDistribution};
pub use zne::{fold_cnots, zne_fit, ZneFit, ZneLevels, ZnePoint};

pub type Mat2 = Matrix2<Complex64>;
pub type Mat4 = Matrix4<Complex64>;

const fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum QubitGate {
    Ry { qubit: usize, theta: f64 },
    Unitary { qubit: usize, matrix: Mat2 },
    Cnot { control: usize, target: usize },
    Hadamard { qubit: usize },
    /// S† then H: rotates the Y eigenbasis onto the computational basis.
    YBasis { qubit: usize },
}

impl QubitGate {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            QubitGate::Cnot { control, target } => vec![control, target],
            QubitGate::Ry { qubit, .. }
            | QubitGate::Unitary { qubit, .. }
            | QubitGate::Hadamard { qubit }
            | QubitGate::YBasis { qubit } => vec![qubit],
        }
    }

    /// Full 4×4 unitary.
    pub fn matrix(&self) -> Mat4 {
        match self {
            QubitGate::Cnot { control, target } => {
                let mut m = Mat4::zeros();
                for i in 0..4 {
                    let bits = [i >> 1, i & 1];
                    let mut out = bits;
                    out[*target] ^= bits[*control];
                    m[(out[0] * 2 + out[1], i)] = c(1.0);
                }
                m
            }
            QubitGate::Ry { qubit, theta } => embed(*qubit, &ry(*theta)),
            QubitGate::Unitary { qubit, matrix } => embed(*qubit, matrix),
            QubitGate::Hadamard { qubit } => embed(*qubit, &hadamard()),
            QubitGate::YBasis { qubit } => {
                let sdg = Mat2::new(c(1.0), c(0.0), c(0.0), Complex64::new(0.0, -1.0));
                embed(*qubit, &(hadamard() * sdg))
            }
        }
    }
}

pub fn ry(theta: f64) -> Mat2 {
    let (s, co) = (0.5 * theta).sin_cos();
    Mat2::new(c(co), c(-s), c(s), c(co))
}

pub fn hadamard() -> Mat2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Mat2::new(c(h), c(h), c(h), c(-h))
}

pub fn pauli_x() -> Mat2 {
    Mat2::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

fn embed(qubit: usize, u: &Mat2) -> Mat4 {
    if qubit == 0 {
        u.kronecker(&Mat2::identity())
    } else {
        Mat2::identity().kronecker(u)
    }
}

fn check_unitary(u: &Mat2) -> Result<()> {
    let err = (u.adjoint() * u - Mat2::identity()).camax();
    if err > 1e-10 || u.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidParameter(format!("single-qubit gate is not unitary (error {err:.1e})")));
    }
    Ok(())
}

/// Ordered gate list; every CNOT is run as 1 + 2·`cnot_fold_pairs` CNOTs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TwoQubitCircuit {
    pub gates: Vec<QubitGate>,
    pub cnot_fold_pairs: usize,
}

impl TwoQubitCircuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, gate: QubitGate) -> Self {
        self.gates.push(gate);
        self
    }

    pub fn cnot_count(&self) -> usize {
        let base = self.gates.iter().filter(|g| matches!(g, QubitGate::Cnot { .. })).count();
        base * (1 + 2 * self.cnot_fold_pairs)
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.gates {
            let q = g.qubits();
            if q.iter().any(|&i| i > 1) || (q.len() == 2 && q[0] == q[1]) {
                return Err(Error::InvalidParameter(format!("bad qubit indices in {g:?}")));
            }
            match g {
                QubitGate::Unitary { matrix, .. } => check_unitary(matrix)?,
                QubitGate::Ry { theta, .. } if !theta.is_finite() => {
                    return Err(Error::InvalidParameter("non-finite rotation angle".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Density matrix before readout.
    pub fn density_matrix(&self, noise: &NoiseModel) -> Result<Mat4> {
        self.validate()?;
        noise.validate()?;
        let mut rho = Mat4::zeros();
        rho[(0, 0)] = c(1.0);
        let p = noise.cnot_depolarizing_p;
        for g in &self.gates {
            let u = g.matrix();
            let is_cnot = matches!(g, QubitGate::Cnot { .. });
            let reps = if is_cnot { 1 + 2 * self.cnot_fold_pairs } else { 1 };
            for _ in 0..reps {
                rho = u * rho * u.adjoint();
                if is_cnot {
                    rho = rho * c(1.0 - p) + Mat4::identity() * c(0.25 * p);
                }
            }
        }
        Ok(rho)
    }

    /// Outcome probabilities after readout confusion.
    pub fn probabilities(&self, noise: &NoiseModel) -> Result<[f64; 4]> {
        let rho = self.density_matrix(noise)?;
        let born = Vector4::from_fn(|i, _| rho[(i, i)].re.max(0.0));
        let p = noise.confusion() * born;
        let total: f64 = p.sum();
        Ok(std::array::from_fn(|i| p[i] / total))
    }
}

/// The Schmidt-form preparation circuit (U⊗V)·CNOT·(R_y(θ)⊗I).
pub fn schmidt_circuit(theta: f64, u: &Mat2, v: &Mat2) -> Result<TwoQubitCircuit> {
    check_unitary(u)?;
    check_unitary(v)?;
    Ok(TwoQubitCircuit::new()
        .push(QubitGate::Ry { qubit: 0, theta })
        .push(QubitGate::Cnot { control: 0, target: 1 })
        .push(QubitGate::Unitary { qubit: 0, matrix: *u })
        .push(QubitGate::Unitary { qubit: 1, matrix: *v }))
}

/// (U⊗V)·CNOT·(R_y(θ)⊗I)|00⟩.
pub fn schmidt_prepare(theta: f64, u: &Mat2, v: &Mat2) -> Result<Vector4<Complex64>> {
    let circ = schmidt_circuit(theta, u, v)?;
    let mut psi = Vector4::new(c(1.0), c(0.0), c(0.0), c(0.0));
    for g in &circ.gates {
        psi = g.matrix() * psi;
    }
    Ok(psi)
}

/// Angle and local rotations reproducing a real two-qubit state, from the SVD of its
/// 2×2 amplitude matrix.
pub fn schmidt_parameters(state: &[f64; 4]) -> Result<(f64, Mat2, Mat2)> {
    let norm = state.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let a = Matrix2::new(state[0], state[1], state[2], state[3]) / norm;
    let svd = a.svd(true, true);
    let w = svd.u.expect("left vectors requested");
    let xt = svd.v_t.expect("right vectors requested");
    let (s0, s1) = (svd.singular_values[0], svd.singular_values[1]);
    let (w, xt, s0, s1) = if s0 >= s1 { (w, xt, s0, s1) } else { (swap_cols(&w), swap_rows(&xt), s1, s0) };
    let theta = 2.0 * s1.atan2(s0);
    Ok((theta, w.map(c), xt.transpose().map(c)))
}

fn swap_cols(m: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 1)], m[(0, 0)], m[(1, 1)], m[(1, 0)])
}

fn swap_rows(m: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(1, 0)], m[(1, 1)], m[(0, 0)], m[(0, 1)])
}

/// Per-qubit readout confusion (column = prepared bit, row = reported bit) and CNOT
/// depolarizing strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub ro_confusion: [[[f64; 2]; 2]; 2],
    pub cnot_depolarizing_p: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self::symmetric(0.0, 0.0)
    }

    /// Both qubits flip with probability `ro_flip` on readout.
    pub fn symmetric(ro_flip: f64, cnot_p: f64) -> Self {
        let m = [[1.0 - ro_flip, ro_flip], [ro_flip, 1.0 - ro_flip]];
        NoiseModel { ro_confusion: [m, m], cnot_depolarizing_p: cnot_p }
    }

    pub fn is_ideal(&self) -> bool {
        *self == Self::ideal()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.cnot_depolarizing_p;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("depolarizing probability {p} outside [0, 1]")));
        }
        for m in &self.ro_confusion {
            for (&a, &b) in m[0].iter().zip(&m[1]) {
                if !(a >= 0.0 && b >= 0.0) || (a + b - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("confusion columns must be probability vectors".into()));
                }
            }
        }
        Ok(())
    }

    /// 4×4 tensor-product confusion matrix.
    pub fn confusion(&self) -> Matrix4<f64> {
        let m = |q: usize| {
            let r = &self.ro_confusion[q];
            Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1])
        };
        m(0).kronecker(&m(1))
    }
}

/// Measured outcome counts, indexed by 2·b₀ + b₁.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub counts: [u64; 4],
    pub shots: u64,
    pub seed: u64,
}

impl Counts {
    pub fn frequencies(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.counts[i] as f64 / self.shots as f64)
    }
}

/// Multinomial draw by sequential binomials.
pub fn sample_counts<R: Rng>(probs: &[f64; 4], shots: u64, rng: &mut R) -> [u64; 4] {
    let mut out = [0u64; 4];
    let mut left = shots;
    let mut mass = 1.0;
    for i in 0..4 {
        let draw = if i == 3 || left == 0 {
            left
        } else {
            let p = (probs[i] / mass).clamp(0.0, 1.0);
            Binomial::new(left, p).map(|b| b.sample(rng)).unwrap_or(0)
        };
        out[i] = draw;
        left -= draw;
        mass -= probs[i];
    }
    out
}

/// Simulates the circuit and samples `shots` readouts.
pub fn run(circuit: &TwoQubitCircuit, noise: &NoiseModel, shots: u64, seed: u64) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    let p = circuit.probabilities(noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Counts { counts: sample_counts(&p, shots, &mut rng), shots, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> TwoQubitCircuit {
        schmidt_circuit(std::f64::consts::FRAC_PI_2, &Mat2::identity(), &Mat2::identity()).unwrap()
    }

    fn zz(p: &[f64; 4]) -> f64 {
        p[0] - p[1] - p[2] + p[3]
    }

    #[test]
    fn trivial_preparations() {
        let id = Mat2::identity();
        let psi = schmidt_prepare(0.0, &id, &id).unwrap();
        assert!((psi - Vector4::new(c(1.0), c(0.0), c(0.0), c(0.0))).camax() < 1e-15);
        let psi = schmidt_prepare(std::f64::consts::FRAC_PI_2, &id, &id).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((psi - Vector4::new(c(h), c(0.0), c(0.0), c(h))).camax() < 1e-15);
    }

    #[test]
    fn non_unitary_rejected() {
        let bad = Mat2::identity() * c(1.1);
        assert!(schmidt_prepare(0.3, &bad, &Mat2::identity()).is_err());
    }

    #[test]
    fn schmidt_coefficients_follow_theta() {
        let u = ry(0.7) * hadamard();
        let v = Mat2::new(c(0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, 1.0), c(0.0)) * ry(-1.3);
        let theta = 1.1;
        let psi = schmidt_prepare(theta, &u, &v).unwrap();
        let a = Mat2::new(psi[0], psi[1], psi[2], psi[3]);
        let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!((s[0] - (0.5 * theta).cos()).abs() < 1e-12);
        assert!((s[1] - (0.5 * theta).sin()).abs() < 1e-12);
    }

    #[test]
    fn svd_parameters_reproduce_real_state() {
        for state in [[0.3, -0.5, 0.1, 0.8], [0.0, 1.0, 0.0, 0.0], [0.6, 0.0, 0.0, -0.8]] {
            let (theta, u, v) = schmidt_parameters(&state).unwrap();
            let psi = schmidt_prepare(theta, &u, &v).unwrap();
            let n = state.iter().map(|x| x * x).sum::<f64>().sqrt();
            for i in 0..4 {
                assert!((psi[i] - c(state[i] / n)).norm() < 1e-12, "{state:?}");
            }
        }
    }

    #[test]
    fn bell_parity_decays_per_cnot() {
        let p = 0.05;
        let noise = NoiseModel::symmetric(0.0, p);
        for k in 0..4 {
            let circ = fold_cnots(&bell(), k);
            let got = zz(&circ.probabilities(&noise).unwrap());
            assert!((got - (1.0 - p).powi(circ.cnot_count() as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn folding_is_identity_without_noise() {
        let circ = schmidt_circuit(0.9, &ry(0.4), &hadamard()).unwrap();
        let p0 = circ.probabilities(&NoiseModel::ideal()).unwrap();
        let p3 = fold_cnots(&circ, 3).probabilities(&NoiseModel::ideal()).unwrap();
        for i in 0..4 {
            assert!((p0[i] - p3[i]).abs() < 1e-12);
        }
        assert_eq!(fold_cnots(&circ, 3).cnot_count(), 7);
    }

    #[test]
    fn density_matrix_stays_physical() {
        let noise = NoiseModel::symmetric(0.0, 0.3);
        let circ = fold_cnots(&schmidt_circuit(1.9, &ry(0.4), &hadamard()).unwrap(), 2);
        let rho = circ.density_matrix(&noise).unwrap();
        assert!((rho.trace() - c(1.0)).norm() < 1e-12);
        let herm = (rho + rho.adjoint()) * c(0.5);
        let eig = herm.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e > -1e-12), "{eig}");
    }

    #[test]
    fn identical_seeds_identical_counts() {
        let noise = NoiseModel::symmetric(0.01, 0.02);
        let a = run(&bell(), &noise, 1000, 9).unwrap();
        let b = run(&bell(), &noise, 1000, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn ideal_run_has_born_statistics() {
        let counts = run(&bell(), &NoiseModel::ideal(), 10_000, 1).unwrap().counts;
        assert_eq!(counts[1] + counts[2], 0);
        assert!((counts[0] as f64 - 5000.0).abs() < 250.0);
    }
}
