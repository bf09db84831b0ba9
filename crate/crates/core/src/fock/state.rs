//! Block states, photon-number statistics and exact expectations.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

use super::gates::{build_shared, edge_population, Gate, GateDescriptor, LEAKAGE_WARN};
use super::ops::{OpExpr, ONE, ZERO};
use crate::error::{Error, Result};

/// Which lattice modes a block holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BlockKind {
    ZeroMode,
    HalfMode,
    /// Modes k and L − k.
    Pair(usize),
}

/// One tensor factor of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Factor {
    Qumode(usize),
    Qubit,
}

impl Factor {
    pub fn dim(self) -> usize {
        match self {
            Factor::Qumode(n) => n,
            Factor::Qubit => 2,
        }
    }
}

/// Amplitudes of one mode block, possibly with ancilla qumodes and qubits attached.
///
/// Basis order is row-major over `factors`: the first factor is most significant.
#[derive(Debug, Clone)]
pub struct QumodeBlockState {
    pub kind: BlockKind,
    pub factors: Vec<Factor>,
    pub amplitudes: DVector<Complex64>,
    /// Largest top-level population seen after any gate.
    pub leakage: f64,
}

impl QumodeBlockState {
    /// Vacuum of the block's physical modes: one qumode, or two for a pair.
    pub fn vacuum(kind: BlockKind, n: usize) -> Self {
        let factors = match kind {
            BlockKind::Pair(_) => vec![Factor::Qumode(n), Factor::Qumode(n)],
            _ => vec![Factor::Qumode(n)],
        };
        Self::zero_state(kind, factors)
    }

    /// All factors in their |0⟩ state.
    pub fn zero_state(kind: BlockKind, factors: Vec<Factor>) -> Self {
        let dim: usize = factors.iter().map(|f| f.dim()).product();
        let mut amplitudes = DVector::from_element(dim, ZERO);
        amplitudes[0] = ONE;
        Self { kind, factors, amplitudes, leakage: 0.0 }
    }

    /// Appends a factor in |0⟩ and returns its index.
    pub fn attach(&mut self, factor: Factor) -> usize {
        let d = factor.dim();
        let old = std::mem::replace(&mut self.amplitudes, DVector::zeros(0));
        let mut amps = DVector::from_element(old.len() * d, ZERO);
        for (i, a) in old.iter().enumerate() {
            amps[i * d] = *a;
        }
        self.amplitudes = amps;
        self.factors.push(factor);
        self.factors.len() - 1
    }

    /// Prepends a factor in |0⟩; existing factor indices shift up by one.
    pub fn attach_front(&mut self, factor: Factor) {
        let d = factor.dim();
        let old = std::mem::replace(&mut self.amplitudes, DVector::zeros(0));
        let mut amps = DVector::from_element(old.len() * d, ZERO);
        amps.rows_mut(0, old.len()).copy_from(&old);
        self.amplitudes = amps;
        self.factors.insert(0, factor);
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// Current population on the top two Fock levels of any qumode.
    pub fn edge_population(&self) -> f64 {
        let is_mode: Vec<bool> = self.factors.iter().map(|f| matches!(f, Factor::Qumode(_))).collect();
        edge_population(self.amplitudes.as_slice(), &self.dims(), &is_mode)
    }

    pub fn leakage_flag(&self) -> bool {
        self.leakage > LEAKAGE_WARN
    }

    /// Applies `gate` to the listed factors (first target most significant in the gate).
    pub fn apply(&mut self, gate: &Gate, targets: &[usize]) -> Result<()> {
        let dims = self.dims();
        if targets.len() != gate.dims.len() {
            return Err(Error::DimensionMismatch { expected: gate.dims.len(), got: targets.len() });
        }
        for (t, d) in targets.iter().zip(&gate.dims) {
            match dims.get(*t) {
                Some(have) if have == d => {}
                Some(have) => return Err(Error::DimensionMismatch { expected: *d, got: *have }),
                None => return Err(Error::DimensionMismatch { expected: *t + 1, got: dims.len() }),
            }
        }
        let mut uniq = targets.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != targets.len() {
            return Err(Error::InvalidParameter("repeated gate target".into()));
        }
        apply_local(self.amplitudes.as_mut_slice(), &dims, targets, &gate.matrix);
        self.leakage = self.leakage.max(self.edge_population());
        Ok(())
    }

    /// Builds the gate for the descriptor's target dimensions and applies it.
    pub fn apply_descriptor(&mut self, desc: &GateDescriptor) -> Result<()> {
        let dims = self.dims();
        let tdims: Vec<usize> = desc
            .targets
            .iter()
            .map(|&t| dims.get(t).copied().ok_or(Error::DimensionMismatch { expected: t + 1, got: dims.len() }))
            .collect::<Result<_>>()?;
        let gate = build_shared(desc.kind, &tdims)?;
        self.apply(&gate, &desc.targets)
    }

    /// Born probabilities over all factors, renormalized; the norm deficit is recorded.
    pub fn number_distribution(&self) -> Result<Distribution> {
        let norm = self.norm_sqr();
        if !(norm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(Distribution {
            dims: self.dims(),
            probs: self.amplitudes.iter().map(|a| a.norm_sqr() / norm).collect(),
            norm_deficit: 1.0 - norm,
        })
    }

    /// ⟨ψ|A|ψ⟩ as a complex number.
    pub fn expectation(&self, op: &OpExpr) -> Result<Complex64> {
        let dims = self.dims();
        let mut total = ZERO;
        for term in &op.terms {
            let mut v = self.amplitudes.clone();
            for (axis, local) in term.factors.iter().rev() {
                let d = *dims.get(*axis).ok_or(Error::DimensionMismatch { expected: axis + 1, got: dims.len() })?;
                let m = local.matrix(d)?;
                apply_local(v.as_mut_slice(), &dims, &[*axis], &m);
            }
            total += term.coeff * self.amplitudes.dotc(&v);
        }
        Ok(total)
    }
}

/// ⟨ψ|A|ψ⟩ for an operator expected to be Hermitian.
pub fn exact_moment(state: &QumodeBlockState, op: &OpExpr) -> Result<f64> {
    let z = state.expectation(op)?;
    if z.im.abs() > 1e-9 * (1.0 + z.re.abs()) {
        return Err(Error::NonHermitian(z.im));
    }
    Ok(z.re)
}

/// Applies `u` (on the targets' tensor product, first target most significant) in place.
pub(crate) fn apply_local(amps: &mut [Complex64], dims: &[usize], targets: &[usize], u: &nalgebra::DMatrix<Complex64>) {
    let nf = dims.len();
    let mut strides = vec![1usize; nf];
    for i in (0..nf.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let sub: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
    let d: usize = sub.iter().product();
    let offsets: Vec<usize> = (0..d)
        .map(|c| {
            let mut rest = c;
            let mut off = 0;
            for (k, &t) in targets.iter().enumerate().rev() {
                off += (rest % sub[k]) * strides[t];
                rest /= sub[k];
            }
            off
        })
        .collect();
    let others: Vec<usize> = (0..nf).filter(|i| !targets.contains(i)).collect();
    let n_rest: usize = others.iter().map(|&i| dims[i]).product();
    let mut buf = vec![ZERO; d];
    let mut out = vec![ZERO; d];
    for r in 0..n_rest {
        let mut rest = r;
        let mut base = 0;
        for &i in others.iter().rev() {
            base += (rest % dims[i]) * strides[i];
            rest /= dims[i];
        }
        let mut any = false;
        for c in 0..d {
            buf[c] = amps[base + offsets[c]];
            any |= buf[c] != ZERO;
        }
        if !any {
            continue;
        }
        out.iter_mut().for_each(|x| *x = ZERO);
        for (j, b) in buf.iter().enumerate() {
            if *b == ZERO {
                continue;
            }
            let col = u.column(j);
            for (o, x) in out.iter_mut().zip(col.iter()) {
                *o += x * b;
            }
        }
        for c in 0..d {
            amps[base + offsets[c]] = out[c];
        }
    }
}

/// Probabilities of joint outcomes, indexed row-major over `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub dims: Vec<usize>,
    pub probs: Vec<f64>,
    /// 1 − ‖ψ‖² before renormalization.
    pub norm_deficit: f64,
}

impl Distribution {
    pub fn outcome(&self, flat: usize) -> Vec<usize> {
        unflatten(flat, &self.dims)
    }

    /// Probability of a joint outcome tuple.
    pub fn prob(&self, outcome: &[usize]) -> f64 {
        self.probs[flatten(outcome, &self.dims)]
    }

    /// Σ p(o) f(o).
    pub fn mean<F: Fn(&[usize]) -> f64>(&self, f: F) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| p * f(&self.outcome(i)))
            .sum()
    }

    /// Draws `shots` outcomes by inverse-CDF sampling.
    pub fn sample(&self, shots: u64, seed: u64) -> ShotCounts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(shots, seed, &mut rng)
    }

    pub fn sample_with<R: Rng>(&self, shots: u64, seed: u64, rng: &mut R) -> ShotCounts {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let total = acc;
        let mut hist = vec![0u64; self.probs.len()];
        for _ in 0..shots {
            let u: f64 = rng.random::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(self.probs.len() - 1);
            hist[idx] += 1;
        }
        let counts = hist
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, c)| (self.outcome(i), *c))
            .collect();
        ShotCounts { dims: self.dims.clone(), counts, shots, seed }
    }
}

/// Histogram of sampled outcome tuples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShotCounts {
    pub dims: Vec<usize>,
    pub counts: BTreeMap<Vec<usize>, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl ShotCounts {
    /// Empirical mean and standard error of f over the shots.
    pub fn mean_stderr<F: Fn(&[usize]) -> f64>(&self, f: F) -> (f64, f64) {
        let n = self.shots as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for (o, c) in &self.counts {
            let v = f(o);
            s1 += *c as f64 * v;
            s2 += *c as f64 * v * v;
        }
        let mean = s1 / n;
        let var = if self.shots > 1 { (s2 / n - mean * mean).max(0.0) * n / (n - 1.0) } else { 0.0 };
        (mean, (var / n).sqrt())
    }

    /// Empirical frequencies as a distribution.
    pub fn frequencies(&self) -> Distribution {
        let size: usize = self.dims.iter().product();
        let mut probs = vec![0.0; size];
        for (o, c) in &self.counts {
            probs[flatten(o, &self.dims)] = *c as f64 / self.shots as f64;
        }
        Distribution { dims: self.dims.clone(), probs, norm_deficit: 0.0 }
    }
}

pub(crate) fn flatten(outcome: &[usize], dims: &[usize]) -> usize {
    outcome.iter().zip(dims).fold(0, |acc, (o, d)| acc * d + o)
}

pub(crate) fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, d) in out.iter_mut().zip(dims).rev() {
        *slot = flat % d;
        flat /= d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::gates::{gaussian_gate, hybrid_gate, GateKind};
    use super::*;

    #[test]
    fn vacuum_moments() {
        let s = QumodeBlockState::vacuum(BlockKind::ZeroMode, 8);
        assert!((exact_moment(&s, &OpExpr::q(0).pow(2)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(exact_moment(&s, &OpExpr::n(0)).unwrap(), 0.0);
        let d = s.number_distribution().unwrap();
        assert_eq!(d.prob(&[0]), 1.0);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut s = QumodeBlockState::vacuum(BlockKind::ZeroMode, 8);
        s.apply(&gaussian_gate(GateKind::Squeeze(0.3), 8).unwrap(), &[0]).unwrap();
        assert!(matches!(exact_moment(&s, &(OpExpr::q(0) * OpExpr::p(0))), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn apply_checks_dimensions() {
        let mut s = QumodeBlockState::vacuum(BlockKind::ZeroMode, 8);
        let g = gaussian_gate(GateKind::Squeeze(0.3), 6).unwrap();
        assert!(s.apply(&g, &[0]).is_err());
        assert!(s.apply(&gaussian_gate(GateKind::Squeeze(0.3), 8).unwrap(), &[1]).is_err());
    }

    #[test]
    fn target_order_is_respected() {
        // CX with p-mode 1 and q-mode 0 equals swapping, applying, swapping back
        let n = 5;
        let mut s = QumodeBlockState::vacuum(BlockKind::Pair(1), n);
        s.apply(&gaussian_gate(GateKind::Displace(Complex64::new(0.6, 0.0)), n).unwrap(), &[0]).unwrap();
        let mut t = s.clone();
        let cx = gaussian_gate(GateKind::Cx(0.8), n).unwrap();
        s.apply(&cx, &[1, 0]).unwrap();
        let swap = super::super::gates::build(GateKind::Swap, &[n, n]).unwrap();
        t.apply(&swap, &[0, 1]).unwrap();
        t.apply(&cx, &[0, 1]).unwrap();
        t.apply(&swap, &[0, 1]).unwrap();
        assert!((s.amplitudes - t.amplitudes).camax() < 1e-14);
    }

    #[test]
    fn attach_preserves_amplitudes() {
        let mut s = QumodeBlockState::vacuum(BlockKind::ZeroMode, 6);
        s.apply(&gaussian_gate(GateKind::Squeeze(0.4), 6).unwrap(), &[0]).unwrap();
        let before = exact_moment(&s, &OpExpr::q(0).pow(2)).unwrap();
        let anc = s.attach(Factor::Qumode(6));
        assert_eq!(anc, 1);
        assert!((exact_moment(&s, &OpExpr::q(0).pow(2)).unwrap() - before).abs() < 1e-14);
        s.attach_front(Factor::Qubit);
        assert!((exact_moment(&s, &OpExpr::q(1).pow(2)).unwrap() - before).abs() < 1e-14);
        assert_eq!(exact_moment(&s, &OpExpr::n(2)).unwrap(), 0.0);
    }

    #[test]
    fn snap_phase_only_on_selected_level() {
        // qubit in |+>, mode in |0>: SNAP(0, pi/2) gives (e^{-i pi/2}|0> + e^{i pi/2}|1>)/sqrt2
        let n = 4;
        let mut s = QumodeBlockState::zero_state(BlockKind::ZeroMode, vec![Factor::Qubit, Factor::Qumode(n)]);
        s.apply(&super::super::gates::build(GateKind::Hadamard, &[2]).unwrap(), &[0]).unwrap();
        let snap = hybrid_gate(GateKind::Snap { level: 0, theta: std::f64::consts::FRAC_PI_2 }, n).unwrap();
        s.apply(&snap, &[0, 1]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes[0] - Complex64::new(0.0, -h)).norm() < 1e-15);
        assert!((s.amplitudes[n] - Complex64::new(0.0, h)).norm() < 1e-15);
        // level 1 untouched
        let mut t = QumodeBlockState::zero_state(BlockKind::ZeroMode, vec![Factor::Qubit, Factor::Qumode(n)]);
        t.amplitudes[0] = ZERO;
        t.amplitudes[1] = ONE;
        let before = t.amplitudes.clone();
        t.apply(&snap, &[0, 1]).unwrap();
        assert_eq!(t.amplitudes, before);
    }

    #[test]
    fn sampling_is_deterministic() {
        let mut s = QumodeBlockState::vacuum(BlockKind::ZeroMode, 16);
        s.apply(&gaussian_gate(GateKind::Squeeze(0.5), 16).unwrap(), &[0]).unwrap();
        let d = s.number_distribution().unwrap();
        let a = d.sample(5000, 7);
        let b = d.sample(5000, 7);
        assert_eq!(a, b);
        assert_eq!(a.counts.values().sum::<u64>(), 5000);
        assert!(a.counts.keys().all(|o| o[0] % 2 == 0));
    }
}
