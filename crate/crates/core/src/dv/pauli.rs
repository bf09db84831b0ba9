//! Real two-qubit Pauli decomposition and the five measurement groups.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::QubitGate;

/// The ten two-qubit Pauli words with real matrices; letter 0 acts on qubit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliWord {
    II,
    IX,
    IZ,
    XI,
    XX,
    XZ,
    ZI,
    ZX,
    ZZ,
    YY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    /// Y is stored as −iY so that Y⊗Y = −(−iY)⊗(−iY) stays real.
    fn real_matrix(self) -> Matrix2<f64> {
        match self {
            Letter::I => Matrix2::identity(),
            Letter::X => Matrix2::new(0.0, 1.0, 1.0, 0.0),
            Letter::Y => Matrix2::new(0.0, -1.0, 1.0, 0.0),
            Letter::Z => Matrix2::new(1.0, 0.0, 0.0, -1.0),
        }
    }
}

impl PauliWord {
    pub const ALL: [PauliWord; 10] = [
        PauliWord::II,
        PauliWord::IX,
        PauliWord::IZ,
        PauliWord::XI,
        PauliWord::XX,
        PauliWord::XZ,
        PauliWord::ZI,
        PauliWord::ZX,
        PauliWord::ZZ,
        PauliWord::YY,
    ];

    fn letters(self) -> [Letter; 2] {
        use Letter::*;
        match self {
            PauliWord::II => [I, I],
            PauliWord::IX => [I, X],
            PauliWord::IZ => [I, Z],
            PauliWord::XI => [X, I],
            PauliWord::XX => [X, X],
            PauliWord::XZ => [X, Z],
            PauliWord::ZI => [Z, I],
            PauliWord::ZX => [Z, X],
            PauliWord::ZZ => [Z, Z],
            PauliWord::YY => [Y, Y],
        }
    }

    pub fn matrix(self) -> Matrix4<f64> {
        let [a, b] = self.letters();
        let m = a.real_matrix().kronecker(&b.real_matrix());
        if self == PauliWord::YY {
            -m
        } else {
            m
        }
    }

    /// Index of the measurement group that diagonalizes this word.
    pub fn group(self) -> usize {
        match self {
            PauliWord::II | PauliWord::ZI | PauliWord::IZ | PauliWord::ZZ => 0,
            PauliWord::XI | PauliWord::XZ => 1,
            PauliWord::IX | PauliWord::ZX => 2,
            PauliWord::XX => 3,
            PauliWord::YY => 4,
        }
    }

    /// Eigenvalue on computational outcome 2·b₀ + b₁ after the group's basis change.
    pub fn eigenvalue(self, outcome: usize) -> f64 {
        let [a, b] = self.letters();
        let mut s = 1.0;
        if a != Letter::I && (outcome >> 1) & 1 == 1 {
            s = -s;
        }
        if b != Letter::I && outcome & 1 == 1 {
            s = -s;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub word: PauliWord,
}

/// Coefficients Tr(P·M)/4 over the ten real words; zero coefficients are dropped.
pub fn pauli_decompose(m: &Matrix4<f64>) -> Result<Vec<PauliTerm>> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * (1.0 + m.amax()) || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("matrix is not real symmetric (asymmetry {asym:.1e})")));
    }
    Ok(PauliWord::ALL
        .iter()
        .map(|&word| PauliTerm { coeff: (word.matrix() * m).trace() / 4.0, word })
        .filter(|t| t.coeff != 0.0)
        .collect())
}

pub fn reconstruct(terms: &[PauliTerm]) -> Matrix4<f64> {
    terms.iter().fold(Matrix4::zeros(), |acc, t| acc + t.word.matrix() * t.coeff)
}

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

/// One measurement circuit and the terms it estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGroup {
    pub basis: [Basis; 2],
    pub members: Vec<PauliTerm>,
}

impl MeasurementGroup {
    pub const BASES: [[Basis; 2]; 5] =
        [[Basis::Z, Basis::Z], [Basis::X, Basis::Z], [Basis::Z, Basis::X], [Basis::X, Basis::X], [Basis::Y, Basis::Y]];

    /// Gates appended to the state preparation before readout.
    pub fn basis_change(&self) -> Vec<QubitGate> {
        basis_change(self.basis)
    }

    /// f(outcome) = Σ coeff·eigenvalue over the members.
    pub fn weights(&self) -> [f64; 4] {
        std::array::from_fn(|o| self.members.iter().map(|t| t.coeff * t.word.eigenvalue(o)).sum())
    }
}

pub fn basis_change(basis: [Basis; 2]) -> Vec<QubitGate> {
    basis
        .iter()
        .enumerate()
        .filter_map(|(qubit, b)| match b {
            Basis::Z => None,
            Basis::X => Some(QubitGate::Hadamard { qubit }),
            Basis::Y => Some(QubitGate::YBasis { qubit }),
        })
        .collect()
}

/// Always five groups, in [`MeasurementGroup::BASES`] order; some may have no members.
pub fn measurement_groups(terms: &[PauliTerm]) -> Vec<MeasurementGroup> {
    let mut groups: Vec<MeasurementGroup> =
        MeasurementGroup::BASES.iter().map(|&basis| MeasurementGroup { basis, members: Vec::new() }).collect();
    for t in terms {
        groups[t.word.group()].members.push(*t);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dv::encoding::{truncated_operator, ParityEncoding, SymbolicOp};
    use crate::fock::BlockKind;
    use crate::qubit::{schmidt_circuit, schmidt_parameters, NoiseModel, TwoQubitCircuit};
    use nalgebra::Vector4;

    #[test]
    fn identity_is_a_single_term() {
        let t = pauli_decompose(&Matrix4::identity()).unwrap();
        assert_eq!(t, vec![PauliTerm { coeff: 1.0, word: PauliWord::II }]);
    }

    #[test]
    fn q2_reconstructs_exactly() {
        let m = truncated_operator(SymbolicOp::Q2, &ParityEncoding::new(BlockKind::ZeroMode)).unwrap();
        let t = pauli_decompose(&m).unwrap();
        assert!(t.len() < 10);
        assert!((reconstruct(&t) - m).amax() < 1e-12);
    }

    #[test]
    fn words_are_orthonormal_and_real_symmetric() {
        for a in PauliWord::ALL {
            let m = a.matrix();
            assert_eq!(m, m.transpose());
            for b in PauliWord::ALL {
                let ip = (a.matrix() * b.matrix()).trace() / 4.0;
                assert_eq!(ip, if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn non_symmetric_rejected() {
        let mut m = Matrix4::identity();
        m[(0, 1)] = 1.0;
        assert!(pauli_decompose(&m).is_err());
    }

    #[test]
    fn five_groups_cover_all_words() {
        let terms: Vec<_> = PauliWord::ALL.iter().map(|&word| PauliTerm { coeff: 1.0, word }).collect();
        let g = measurement_groups(&terms);
        assert_eq!(g.len(), 5);
        assert_eq!(g.iter().map(|g| g.members.len()).sum::<usize>(), 10);
    }

    /// ⟨ψ|M|ψ⟩ through grouped Born probabilities equals the dense value.
    #[test]
    fn grouped_expectation_matches_dense() {
        let psi = [0.4, -0.3, 0.2, 0.842];
        let n = psi.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        let v = Vector4::from_fn(|i, _| psi[i] / n);
        let mut m = Matrix4::from_fn(|i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7);
        m = m + m.transpose();
        let dense = (v.transpose() * m * v)[(0, 0)];
        let (theta, u, w) = schmidt_parameters(&psi).unwrap();
        let prep = schmidt_circuit(theta, &u, &w).unwrap();
        let mut total = 0.0;
        for g in measurement_groups(&pauli_decompose(&m).unwrap()) {
            let circ = TwoQubitCircuit { gates: [prep.gates.clone(), g.basis_change()].concat(), cnot_fold_pairs: 0 };
            let p = circ.probabilities(&NoiseModel::ideal()).unwrap();
            let w = g.weights();
            total += (0..4).map(|o| p[o] * w[o]).sum::<f64>();
        }
        assert!((total - dense).abs() < 1e-12, "{total} vs {dense}");
    }

    #[test]
    fn xz_is_read_as_zz_after_hadamard_on_qubit_zero() {
        assert_eq!(PauliWord::XZ.group(), 1);
        assert_eq!(MeasurementGroup::BASES[1], [Basis::X, Basis::Z]);
        assert_eq!(PauliWord::XZ.eigenvalue(3), 1.0);
        assert_eq!(PauliWord::XZ.eigenvalue(1), -1.0);
    }
}
