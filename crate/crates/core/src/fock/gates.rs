//! Gate matrices on truncated qumodes and qubit–qumode pairs.
//!
//! Every Gaussian gate is the matrix exponential of its truncated generator. When the
//! generator conserves a photon-number combination (N_a − N_b for the two-mode
//! squeezer, N_a + N_b for the beam splitter) it is exponentiated sector by sector,
//! and CX is exponentiated in the eigenbasis of the truncated q. Both give the same
//! matrix as exponentiating the full generator, at a fraction of the cost.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::ops::{ladder, to_complex, CMatrix, I, ONE, ZERO};
use crate::error::{Error, Result};

/// Population on the top two Fock levels above which a gate is reported as leaking.
pub const LEAKAGE_WARN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    /// exp((r/2)(a†² − a²)); scales q by e^r.
    Squeeze(f64),
    /// exp(r(a†b† − ab)) on targets [a, b].
    TwoModeSqueeze(f64),
    /// exp((π/4)(a†b − ab†)); afterwards mode a carries (a + b)/√2.
    BeamSplitter5050,
    /// exp(α a† − α* a); shifts q by √2 Re α.
    Displace(Complex64),
    /// exp(−iΓ p ⊗ q) on targets [p-mode, q-mode]; shifts the p-mode's q by Γ q.
    Cx(f64),
    /// exp(iθ N).
    Rotation(f64),
    /// exp(−iθ Z ⊗ |level⟩⟨level|) on targets [qubit, mode].
    Snap { level: usize, theta: f64 },
    /// 50/50 beam splitter on targets [qubit, a, b] applied when the qubit is |1⟩.
    ControlledBs,
    /// Rotation(θ) on targets [qubit, mode] applied when the qubit is |1⟩.
    ControlledRotation(f64),
    Hadamard,
    /// diag(1, −i).
    PhaseSdg,
    PauliX,
    /// Exchange of two factors of equal dimension.
    Swap,
}

impl GateKind {
    /// Number of target factors.
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Squeeze(_)
            | GateKind::Displace(_)
            | GateKind::Rotation(_)
            | GateKind::Hadamard
            | GateKind::PhaseSdg
            | GateKind::PauliX => 1,
            GateKind::ControlledBs => 3,
            _ => 2,
        }
    }

    /// Whether each target is a qumode (true) or a qubit (false).
    fn qumode_targets(&self) -> Vec<bool> {
        match self {
            GateKind::Snap { .. } | GateKind::ControlledRotation(_) => vec![false, true],
            GateKind::ControlledBs => vec![false, true, true],
            GateKind::Hadamard | GateKind::PhaseSdg | GateKind::PauliX => vec![false],
            GateKind::Swap => vec![true, true],
            k => vec![true; k.arity()],
        }
    }
}

/// A gate kind together with the block factors it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct GateDescriptor {
    pub kind: GateKind,
    pub targets: Vec<usize>,
}

impl GateDescriptor {
    pub fn new(kind: GateKind, targets: &[usize]) -> Self {
        Self { kind, targets: targets.to_vec() }
    }
}

/// A unitary on the tensor product of its target factors, first target most significant.
#[derive(Debug, Clone)]
pub struct Gate {
    pub matrix: CMatrix,
    pub dims: Vec<usize>,
    /// Population left on the top two Fock levels when the gate acts on the all-zero state.
    pub leakage: f64,
}

impl Gate {
    /// The gate that applies `self` first and then `later`.
    pub fn then(&self, later: &Gate) -> Result<Gate> {
        if self.dims != later.dims {
            return Err(Error::DimensionMismatch { expected: self.matrix.nrows(), got: later.matrix.nrows() });
        }
        Ok(Gate {
            matrix: &later.matrix * &self.matrix,
            dims: self.dims.clone(),
            leakage: self.leakage.max(later.leakage),
        })
    }

    /// max |(U†U − I)_ij|.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        let prod = self.matrix.adjoint() * &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { ONE } else { ZERO };
                worst = worst.max((prod[(i, j)] - want).norm());
            }
        }
        worst
    }
}

/// Matrix of a Gaussian gate for cutoff `n` on every qumode target.
pub fn gaussian_gate(kind: GateKind, n: usize) -> Result<Gate> {
    match kind {
        GateKind::Squeeze(_)
        | GateKind::TwoModeSqueeze(_)
        | GateKind::BeamSplitter5050
        | GateKind::Displace(_)
        | GateKind::Cx(_)
        | GateKind::Rotation(_) => build(kind, &vec![n; kind.arity()]),
        other => Err(Error::InvalidParameter(format!("{other:?} is not a Gaussian gate"))),
    }
}

/// Matrix of a qubit-controlled gate; qubit targets have dimension 2.
pub fn hybrid_gate(kind: GateKind, n: usize) -> Result<Gate> {
    match kind {
        GateKind::Snap { .. } | GateKind::ControlledBs | GateKind::ControlledRotation(_) => {
            let dims: Vec<usize> = kind.qumode_targets().iter().map(|&m| if m { n } else { 2 }).collect();
            build(kind, &dims)
        }
        other => Err(Error::InvalidParameter(format!("{other:?} is not a hybrid gate"))),
    }
}

type CacheKey = (u8, u64, Vec<usize>);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<Gate>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<Gate>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Builds a gate for explicit target dimensions. CX and beam-splitter matrices are
/// memoized since the measurement circuits reuse a handful of them.
pub fn build_shared(kind: GateKind, dims: &[usize]) -> Result<Arc<Gate>> {
    let key = match kind {
        GateKind::Cx(g) => Some((0u8, g.to_bits(), dims.to_vec())),
        GateKind::BeamSplitter5050 => Some((1u8, 0, dims.to_vec())),
        _ => None,
    };
    if let Some(key) = key {
        if let Some(g) = cache().lock().unwrap().get(&key) {
            return Ok(g.clone());
        }
        let gate = Arc::new(build(kind, dims)?);
        cache().lock().unwrap().insert(key, gate.clone());
        return Ok(gate);
    }
    Ok(Arc::new(build(kind, dims)?))
}

/// Builds a gate for explicit target dimensions.
pub fn build(kind: GateKind, dims: &[usize]) -> Result<Gate> {
    if dims.len() != kind.arity() {
        return Err(Error::DimensionMismatch { expected: kind.arity(), got: dims.len() });
    }
    let is_mode = kind.qumode_targets();
    for (d, &m) in dims.iter().zip(&is_mode) {
        if *d < 2 || (!m && *d != 2) {
            return Err(Error::InvalidParameter(format!("bad target dimension {d} for {kind:?}")));
        }
    }
    let matrix = match kind {
        GateKind::Squeeze(r) => {
            let l = ladder(dims[0]);
            let g = (&l.adag * &l.adag - &l.a * &l.a) * (0.5 * r);
            to_complex(&g.exp())
        }
        GateKind::TwoModeSqueeze(r) => {
            let (la, lb) = (ladder(dims[0]), ladder(dims[1]));
            let g = (la.adag.kronecker(&lb.adag) - la.a.kronecker(&lb.a)) * r;
            let nb = dims[1];
            to_complex(&expm_by_sector(&g, |i| (i / nb) as i64 - (i % nb) as i64))
        }
        GateKind::BeamSplitter5050 => to_complex(&beam_splitter(dims[0], dims[1])),
        GateKind::Displace(alpha) => {
            let l = ladder(dims[0]);
            let g = to_complex(&l.adag) * alpha - to_complex(&l.a) * alpha.conj();
            g.exp()
        }
        GateKind::Cx(gamma) => to_complex(&cx(gamma, dims[0], dims[1])),
        GateKind::Rotation(theta) => {
            CMatrix::from_diagonal(&nalgebra::DVector::from_fn(dims[0], |j, _| (I * theta * j as f64).exp()))
        }
        GateKind::Snap { level, theta } => {
            let n = dims[1];
            if level >= n {
                return Err(Error::InvalidParameter(format!("SNAP level {level} outside cutoff {n}")));
            }
            let mut d = nalgebra::DVector::from_element(2 * n, ONE);
            d[level] = (-I * theta).exp();
            d[n + level] = (I * theta).exp();
            CMatrix::from_diagonal(&d)
        }
        GateKind::ControlledBs => controlled(&to_complex(&beam_splitter(dims[1], dims[2]))),
        GateKind::ControlledRotation(theta) => {
            let r = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(dims[1], |j, _| (I * theta * j as f64).exp()));
            controlled(&r)
        }
        GateKind::Hadamard => {
            let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            CMatrix::from_row_slice(2, 2, &[s, s, s, -s])
        }
        GateKind::PhaseSdg => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -I]),
        GateKind::PauliX => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        GateKind::Swap => {
            if dims[0] != dims[1] {
                return Err(Error::DimensionMismatch { expected: dims[0], got: dims[1] });
            }
            let d = dims[0];
            let mut m = CMatrix::zeros(d * d, d * d);
            for i in 0..d {
                for j in 0..d {
                    m[(j * d + i, i * d + j)] = ONE;
                }
            }
            m
        }
    };
    let leakage = edge_population(&matrix.column(0).iter().copied().collect::<Vec<_>>(), dims, &is_mode);
    if leakage > LEAKAGE_WARN {
        log::warn!("{kind:?} at cutoff {dims:?} leaks {leakage:.2e} onto the top Fock levels");
    }
    Ok(Gate { matrix, dims: dims.to_vec(), leakage })
}

/// Population of basis states with any qumode factor on its top level.
pub(crate) fn edge_population(amps: &[Complex64], dims: &[usize], is_mode: &[bool]) -> f64 {
    let mut total = 0.0;
    for (flat, a) in amps.iter().enumerate() {
        let mut rest = flat;
        let mut edge = false;
        for (d, &m) in dims.iter().zip(is_mode).rev() {
            let digit = rest % d;
            rest /= d;
            edge |= m && digit + 2 >= *d;
        }
        if edge {
            total += a.norm_sqr();
        }
    }
    total
}

fn controlled(u: &CMatrix) -> CMatrix {
    let d = u.nrows();
    let mut m = CMatrix::identity(2 * d, 2 * d);
    m.view_mut((d, d), (d, d)).copy_from(u);
    m
}

fn beam_splitter(na: usize, nb: usize) -> DMatrix<f64> {
    let (la, lb) = (ladder(na), ladder(nb));
    let g = (la.adag.kronecker(&lb.a) - la.a.kronecker(&lb.adag)) * std::f64::consts::FRAC_PI_4;
    expm_by_sector(&g, |i| ((i / nb) + (i % nb)) as i64)
}

/// exp(Γ (a† − a)/√2 ⊗ q), built from the spectral decomposition of the truncated q.
fn cx(gamma: f64, np: usize, nq: usize) -> DMatrix<f64> {
    let lp = ladder(np);
    let lq = ladder(nq);
    let eig = SymmetricEigen::new(lq.q.clone());
    let gen = (&lp.adag - &lp.a) * (gamma * std::f64::consts::FRAC_1_SQRT_2);
    let mut out = DMatrix::zeros(np * nq, np * nq);
    for (j, &x) in eig.eigenvalues.iter().enumerate() {
        let e = (&gen * x).exp();
        let w = eig.eigenvectors.column(j);
        let proj = w * w.transpose();
        out += e.kronecker(&proj);
    }
    out
}

/// Exponentiates a generator that is block diagonal in the sectors labelled by `key`.
fn expm_by_sector<F: Fn(usize) -> i64>(g: &DMatrix<f64>, key: F) -> DMatrix<f64> {
    let n = g.nrows();
    let mut sectors: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
    for i in 0..n {
        sectors.entry(key(i)).or_default().push(i);
    }
    let mut out = DMatrix::zeros(n, n);
    for idx in sectors.values() {
        let d = idx.len();
        let sub = DMatrix::from_fn(d, d, |a, b| g[(idx[a], idx[b])]);
        debug_assert!(
            (0..n).all(|i| idx.contains(&i) || idx.iter().all(|&j| g[(i, j)] == 0.0)),
            "generator mixes sectors"
        );
        let e = sub.exp();
        for a in 0..d {
            for b in 0..d {
                out[(idx[a], idx[b])] = e[(a, b)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squeeze_zero_is_identity() {
        let g = gaussian_gate(GateKind::Squeeze(0.0), 8).unwrap();
        assert!((g.matrix - CMatrix::identity(8, 8)).camax() < 1e-15);
    }

    #[test]
    fn sector_exponentials_match_full_expm() {
        let n = 5;
        let (la, lb) = (ladder(n), ladder(n));
        let g = (la.adag.kronecker(&lb.adag) - la.a.kronecker(&lb.a)) * 0.4;
        let full = g.exp();
        let tms = gaussian_gate(GateKind::TwoModeSqueeze(0.4), n).unwrap();
        assert!((to_complex(&full) - tms.matrix).camax() < 1e-13);

        let g = (la.adag.kronecker(&lb.a) - la.a.kronecker(&lb.adag)) * std::f64::consts::FRAC_PI_4;
        let bs = gaussian_gate(GateKind::BeamSplitter5050, n).unwrap();
        assert!((to_complex(&g.exp()) - bs.matrix).camax() < 1e-13);
    }

    #[test]
    fn cx_matches_full_expm() {
        let n = 6;
        let l = ladder(n);
        let gamma = 0.7;
        let g = ((&l.adag - &l.a) * (gamma * std::f64::consts::FRAC_1_SQRT_2)).kronecker(&l.q);
        let cxg = gaussian_gate(GateKind::Cx(gamma), n).unwrap();
        assert!((to_complex(&g.exp()) - cxg.matrix).camax() < 1e-12);
    }

    #[test]
    fn gates_are_unitary() {
        let kinds = [
            GateKind::Squeeze(0.6),
            GateKind::TwoModeSqueeze(-0.5),
            GateKind::BeamSplitter5050,
            GateKind::Displace(Complex64::new(0.8, -0.3)),
            GateKind::Cx(2.0),
            GateKind::Rotation(1.1),
        ];
        for k in kinds {
            let g = gaussian_gate(k, 8).unwrap();
            assert!(g.unitarity_defect() < 1e-10, "{k:?}");
        }
        for k in [GateKind::Snap { level: 2, theta: 0.5 }, GateKind::ControlledBs, GateKind::ControlledRotation(0.3)] {
            assert!(hybrid_gate(k, 6).unwrap().unitarity_defect() < 1e-10, "{k:?}");
        }
    }

    #[test]
    fn snap_level_checked() {
        assert!(hybrid_gate(GateKind::Snap { level: 8, theta: 1.0 }, 8).is_err());
        assert!(gaussian_gate(GateKind::Snap { level: 0, theta: 1.0 }, 8).is_err());
    }

    #[test]
    fn large_squeeze_reports_leakage() {
        let g = gaussian_gate(GateKind::Squeeze(2.0), 8).unwrap();
        assert!(g.leakage > LEAKAGE_WARN);
        let g = gaussian_gate(GateKind::Squeeze(0.3), 32).unwrap();
        assert!(g.leakage < 1e-12);
    }
}
