//! Quadrature moments of a block from photon-number data.
//!
//! A vacuum ancilla qumode is coupled to the measured mode by CX(Γ) = exp(−iΓ p_anc ⊗ q),
//! which shifts q_anc by Γq, so ⟨N_anc⟩(Γ) = Γ²⟨q²⟩/2 and ⟨N_anc²⟩(Γ) is a quartic
//! polynomial in Γ with leading coefficient ⟨q⁴⟩/4. Finite differences over
//! Γ ∈ {−2s, −s, 0, s, 2s} give
//!
//! ```text
//! ⟨q²⟩ = [f(s) + f(−s) − 2f(0)] / s²                          f = ⟨N_anc⟩
//! ⟨q⁴⟩ = [g(2s) + g(−2s) − 4g(s) − 4g(−s) + 6g(0)] / (6s⁴)    g = ⟨N_anc²⟩
//! ```
//!
//! These constants were checked against [`exact_moment`] on squeezed vacua. A pair
//! (k, L − k) in the (+, −) basis needs no ancilla: CX(Γ) = exp(−iΓ p₋ ⊗ q₊) between its
//! own members gives ⟨q₊²⟩, ⟨q₊⁴⟩ from N₋, ⟨p₋²⟩, ⟨p₋⁴⟩ from N₊, and ⟨(q₊² + p₋²)²⟩
//! from (N₊ + N₋)².

use rand::Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::Serialize;

use super::ansatz::{AnsatzConfig, Backend, PairCircuit};
use crate::error::{Error, Result};
use crate::fock::{
    build_shared, exact_moment, BlockKind, Distribution, Factor, GateKind, OpExpr, QumodeBlockState, ShotCounts,
};

/// Moments of a single mode (zero mode or k = L/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleMoments {
    pub q2: f64,
    pub p2: f64,
    pub q4: f64,
}

/// Moments of a pair in the (+, −) basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMoments {
    /// ⟨q₊² + q₋² + p₊² + p₋²⟩
    pub kinetic: f64,
    pub q_plus2: f64,
    pub p_minus2: f64,
    pub q_plus4: f64,
    pub p_minus4: f64,
    /// ⟨(q₊² + p₋²)²⟩, symmetrized in q₊ and p₋.
    pub q_sq_sum2: f64,
    pub n_plus: f64,
    pub n_minus: f64,
}

impl PairMoments {
    /// Q = ⟨q₊² + p₋²⟩.
    pub fn q_sum(&self) -> f64 {
        self.q_plus2 + self.p_minus2
    }

    /// D = ⟨q₊² − p₋²⟩.
    pub fn diff(&self) -> f64 {
        self.q_plus2 - self.p_minus2
    }

    /// F = ⟨q₊⁴ + p₋⁴⟩.
    pub fn quartic_sum(&self) -> f64 {
        self.q_plus4 + self.p_minus4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BlockMoments {
    Single(SingleMoments),
    Pair(PairMoments),
}

impl BlockMoments {
    pub fn vacuum(kind: BlockKind) -> Self {
        match kind {
            BlockKind::Pair(_) => BlockMoments::Pair(PairMoments {
                kinetic: 2.0,
                q_plus2: 0.5,
                p_minus2: 0.5,
                q_plus4: 0.75,
                p_minus4: 0.75,
                q_sq_sum2: 2.0,
                n_plus: 0.0,
                n_minus: 0.0,
            }),
            _ => BlockMoments::Single(SingleMoments { q2: 0.5, p2: 0.5, q4: 0.75 }),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            BlockMoments::Single(m) => vec![m.q2, m.p2, m.q4],
            BlockMoments::Pair(m) => vec![
                m.kinetic,
                m.q_plus2,
                m.p_minus2,
                m.q_plus4,
                m.p_minus4,
                m.q_sq_sum2,
                m.n_plus,
                m.n_minus,
            ],
        }
    }

    /// Same variant with components replaced by `v`.
    pub fn with_values(&self, v: &[f64]) -> Self {
        match self {
            BlockMoments::Single(_) => BlockMoments::Single(SingleMoments { q2: v[0], p2: v[1], q4: v[2] }),
            BlockMoments::Pair(_) => BlockMoments::Pair(PairMoments {
                kinetic: v[0],
                q_plus2: v[1],
                p_minus2: v[2],
                q_plus4: v[3],
                p_minus4: v[4],
                q_sq_sum2: v[5],
                n_plus: v[6],
                n_minus: v[7],
            }),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BlockMoments::Single(_) => 3,
            BlockMoments::Pair(_) => 8,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn single(&self) -> Option<&SingleMoments> {
        match self {
            BlockMoments::Single(m) => Some(m),
            _ => None,
        }
    }

    pub fn pair(&self) -> Option<&PairMoments> {
        match self {
            BlockMoments::Pair(m) => Some(m),
            _ => None,
        }
    }

    /// Substitutes q → q + c in a single-mode block (odd moments vanish by parity).
    pub fn displaced(&self, c: f64) -> Self {
        match self {
            BlockMoments::Single(m) => {
                let c2 = c * c;
                BlockMoments::Single(SingleMoments {
                    q2: m.q2 + c2,
                    p2: m.p2,
                    q4: m.q4 + 6.0 * c2 * m.q2 + c2 * c2,
                })
            }
            other => *other,
        }
    }
}

/// Measurement record of one circuit: exact probabilities or sampled counts.
#[derive(Debug, Clone, PartialEq)]
pub enum Histogram {
    Probabilities(Distribution),
    Counts(ShotCounts),
}

impl Histogram {
    pub fn mean<F: Fn(&[usize]) -> f64>(&self, f: F) -> f64 {
        match self {
            Histogram::Probabilities(d) => d.mean(f),
            Histogram::Counts(c) => c.mean_stderr(f).0,
        }
    }

    /// Variance of the sample mean of f; zero for exact probabilities.
    pub fn mean_variance<F: Fn(&[usize]) -> f64>(&self, f: F) -> f64 {
        match self {
            Histogram::Probabilities(_) => 0.0,
            Histogram::Counts(c) => c.mean_stderr(f).1.powi(2),
        }
    }

    pub fn shots(&self) -> u64 {
        match self {
            Histogram::Probabilities(_) => 0,
            Histogram::Counts(c) => c.shots,
        }
    }

    /// Multinomial resample of the shots; exact probabilities are returned unchanged.
    pub fn resample<R: Rng>(&self, rng: &mut R) -> Histogram {
        match self {
            Histogram::Probabilities(_) => self.clone(),
            Histogram::Counts(c) => Histogram::Counts(resample_counts(c, rng)),
        }
    }
}

pub(crate) fn resample_counts<R: Rng>(c: &ShotCounts, rng: &mut R) -> ShotCounts {
    let mut left = c.shots;
    let mut mass = 1.0;
    let mut counts = std::collections::BTreeMap::new();
    let n_out = c.counts.len();
    for (i, (o, k)) in c.counts.iter().enumerate() {
        let p = *k as f64 / c.shots as f64;
        let draw = if i + 1 == n_out || left == 0 {
            left
        } else {
            let prob = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, prob).map(|b| b.sample(rng)).unwrap_or(0)
        };
        if draw > 0 {
            counts.insert(o.clone(), draw);
        }
        left -= draw;
        mass -= p;
    }
    ShotCounts { dims: c.dims.clone(), counts, shots: c.shots, seed: c.seed }
}

/// Ancilla coupling strengths, in the order used by the estimators.
pub fn gammas(s: f64) -> [f64; 5] {
    [-2.0 * s, -s, 0.0, s, 2.0 * s]
}

/// All circuit records for one block.
#[derive(Debug, Clone)]
pub struct BlockRecords {
    pub kind: BlockKind,
    pub shift_s: f64,
    /// Zero-mode shift substituted after estimation (polynomial route), else 0.
    pub displacement: f64,
    pub circuits: Vec<Histogram>,
    pub leakage: f64,
}

impl BlockRecords {
    pub fn shots(&self) -> u64 {
        self.circuits.iter().map(|h| h.shots()).sum()
    }

    pub fn resample<R: Rng>(&self, rng: &mut R) -> BlockRecords {
        BlockRecords { circuits: self.circuits.iter().map(|h| h.resample(rng)).collect(), ..self.clone() }
    }
}

/// Photon-number features used by the estimators.
pub(crate) fn features(kind: BlockKind, o: &[usize]) -> [f64; 5] {
    match kind {
        // outcome = [mode, ancilla]
        BlockKind::ZeroMode | BlockKind::HalfMode => {
            let (nm, na) = (o[0] as f64, o[1] as f64);
            [na, na * na, nm, 0.0, 0.0]
        }
        // outcome = [+, −]
        BlockKind::Pair(_) => {
            let (a, b) = (o[0] as f64, o[1] as f64);
            [a, b, a * a, b * b, (a + b) * (a + b)]
        }
    }
}

/// Linear estimator: moment_i = Σ_{Γ,f} w[i][Γ][f]·⟨feature_f⟩_Γ + offset_i.
struct Estimator {
    weights: Vec<[[f64; 5]; 5]>,
    offsets: Vec<f64>,
}

fn three_point(s: f64) -> [f64; 5] {
    let w = 1.0 / (s * s);
    [0.0, w, -2.0 * w, w, 0.0]
}

fn five_point(s: f64) -> [f64; 5] {
    let w = 1.0 / (6.0 * s.powi(4));
    [w, -4.0 * w, 6.0 * w, -4.0 * w, w]
}

fn estimator(kind: BlockKind, s: f64, c: f64) -> Estimator {
    let tp = three_point(s);
    let fp = five_point(s);
    let on = |stencil: [f64; 5], feature: usize, scale: f64| {
        let mut w = [[0.0; 5]; 5];
        for (g, v) in stencil.iter().enumerate() {
            w[g][feature] = v * scale;
        }
        w
    };
    let at_zero = |feature: usize, scale: f64| {
        let mut w = [[0.0; 5]; 5];
        w[2][feature] = scale;
        w
    };
    let add = |a: [[f64; 5]; 5], b: [[f64; 5]; 5], sb: f64| {
        let mut w = a;
        for g in 0..5 {
            for f in 0..5 {
                w[g][f] += sb * b[g][f];
            }
        }
        w
    };
    match kind {
        BlockKind::ZeroMode | BlockKind::HalfMode => {
            let q2 = on(tp, 0, 1.0);
            let q4 = on(fp, 1, 1.0);
            // p² = (2⟨N⟩ + 1) − q²
            let p2 = add(at_zero(2, 2.0), q2, -1.0);
            let c2 = c * c;
            Estimator {
                weights: vec![q2, p2, add(q4, q2, 6.0 * c2)],
                offsets: vec![c2, 1.0, c2 * c2],
            }
        }
        BlockKind::Pair(_) => {
            let kin = add(at_zero(0, 2.0), at_zero(1, 2.0), 1.0);
            Estimator {
                weights: vec![
                    kin,
                    on(tp, 1, 1.0),
                    on(tp, 0, 1.0),
                    on(fp, 3, 1.0),
                    on(fp, 2, 1.0),
                    on(fp, 4, 1.0),
                    at_zero(0, 1.0),
                    at_zero(1, 1.0),
                ],
                offsets: vec![2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            }
        }
    }
}

impl BlockRecords {
    /// Moments estimated from the records.
    pub fn moments(&self) -> BlockMoments {
        let est = estimator(self.kind, self.shift_s, self.displacement);
        let means: Vec<[f64; 5]> = self
            .circuits
            .iter()
            .map(|h| {
                let mut m = [0.0; 5];
                for (f, slot) in m.iter_mut().enumerate() {
                    *slot = h.mean(|o| features(self.kind, o)[f]);
                }
                m
            })
            .collect();
        let values: Vec<f64> = est
            .weights
            .iter()
            .zip(&est.offsets)
            .map(|(w, off)| {
                let mut v = *off;
                for g in 0..5 {
                    for f in 0..5 {
                        v += w[g][f] * means[g][f];
                    }
                }
                v
            })
            .collect();
        BlockMoments::vacuum(self.kind).with_values(&values)
    }

    /// Variance of Σ_i g_i·moment_i from the per-circuit sample variances.
    pub fn linear_variance(&self, g: &[f64]) -> f64 {
        let coef = contracted_weights(self.kind, self.shift_s, self.displacement, g);
        self.circuits
            .iter()
            .zip(&coef)
            .filter(|(_, c)| c.iter().any(|&x| x != 0.0))
            .map(|(h, c)| {
                h.mean_variance(|o| {
                    let x = features(self.kind, o);
                    (0..5).map(|f| c[f] * x[f]).sum()
                })
            })
            .sum()
    }
}

/// Per-circuit feature coefficients of Σ_i g_i·moment_i, constant offsets dropped.
pub(crate) fn contracted_weights(kind: BlockKind, s: f64, c: f64, g: &[f64]) -> [[f64; 5]; 5] {
    let est = estimator(kind, s, c);
    let mut coef = [[0.0; 5]; 5];
    for (w, gm) in est.weights.iter().zip(g) {
        for (cg, wg) in coef.iter_mut().zip(w) {
            for f in 0..5 {
                cg[f] += gm * wg[f];
            }
        }
    }
    coef
}

/// SplitMix64 step, used to derive independent seeds per block and circuit.
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    let mut z = seed;
    for &s in stream {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(s.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Runs the five measurement circuits of a block.
///
/// `state` is the prepared block without ancilla; pairs are taken to be in the basis
/// produced by `pair_circuit`. `stream` distinguishes blocks when sampling.
pub fn measure_block(
    state: &QumodeBlockState,
    s: f64,
    backend: Backend,
    pair_circuit: PairCircuit,
    stream: &[u64],
) -> Result<BlockRecords> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("shift s must be positive, got {s}")));
    }
    let mut base = state.clone();
    let (p_axis, q_axis) = match state.kind {
        BlockKind::Pair(_) => {
            if pair_circuit == PairCircuit::TwoModeSqueezer {
                base.apply_descriptor(&crate::fock::GateDescriptor::new(GateKind::BeamSplitter5050, &[0, 1]))?;
            }
            (1, 0)
        }
        _ => {
            let n = match state.factors[0] {
                Factor::Qumode(n) => n,
                Factor::Qubit => return Err(Error::InvalidParameter("block mode is a qubit".into())),
            };
            let anc = base.attach(Factor::Qumode(n));
            (anc, 0)
        }
    };
    let dims = base.dims();
    let mut circuits = Vec::with_capacity(5);
    let mut leakage = base.leakage;
    for (gi, gamma) in gammas(s).into_iter().enumerate() {
        let mut st = base.clone();
        if gamma != 0.0 {
            let gate = build_shared(GateKind::Cx(gamma), &[dims[p_axis], dims[q_axis]])?;
            st.apply(&gate, &[p_axis, q_axis])?;
        }
        leakage = leakage.max(st.leakage);
        let dist = st.number_distribution()?;
        circuits.push(match backend {
            Backend::Sampled { shots, seed } => {
                let mut sub: Vec<u64> = stream.to_vec();
                sub.push(gi as u64);
                Histogram::Counts(dist.sample(shots, derive_seed(seed, &sub)))
            }
            _ => Histogram::Probabilities(dist),
        });
    }
    Ok(BlockRecords { kind: state.kind, shift_s: s, displacement: 0.0, circuits, leakage })
}

/// Moments of the truncated operators taken directly on the state.
pub fn direct_moments(state: &QumodeBlockState, pair_circuit: PairCircuit) -> Result<BlockMoments> {
    match state.kind {
        BlockKind::Pair(_) => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let (a, b) = match pair_circuit {
                PairCircuit::SingleSqueezers => (OpExpr::q(0), OpExpr::p(1)),
                PairCircuit::TwoModeSqueezer => ((OpExpr::q(0) + OpExpr::q(1)) * h, (OpExpr::p(0) - OpExpr::p(1)) * h),
            };
            let (ap, bm) = match pair_circuit {
                PairCircuit::SingleSqueezers => (OpExpr::p(0), OpExpr::q(1)),
                PairCircuit::TwoModeSqueezer => ((OpExpr::p(0) + OpExpr::p(1)) * h, (OpExpr::q(0) - OpExpr::q(1)) * h),
            };
            let a2 = a.pow(2);
            let b2 = b.pow(2);
            let mixed = a2.clone() * b2.clone()
                + b2.clone() * a2.clone()
                + a.clone() * b.clone() * a.clone() * b.clone()
                + b.clone() * a.clone() * b.clone() * a.clone()
                + a.clone() * b2.clone() * a.clone()
                + b.clone() * a2.clone() * b.clone();
            let q_plus2 = exact_moment(state, &a2)?;
            let p_minus2 = exact_moment(state, &b2)?;
            let q_plus4 = exact_moment(state, &a2.pow(2))?;
            let p_minus4 = exact_moment(state, &b2.pow(2))?;
            let mixed = exact_moment(state, &mixed)?;
            let p_plus2 = exact_moment(state, &ap.pow(2))?;
            let q_minus2 = exact_moment(state, &bm.pow(2))?;
            Ok(BlockMoments::Pair(PairMoments {
                kinetic: q_plus2 + p_minus2 + p_plus2 + q_minus2,
                q_plus2,
                p_minus2,
                q_plus4,
                p_minus4,
                q_sq_sum2: q_plus4 + p_minus4 + mixed / 3.0,
                n_plus: 0.5 * (q_plus2 + p_plus2 - 1.0),
                n_minus: 0.5 * (q_minus2 + p_minus2 - 1.0),
            }))
        }
        _ => Ok(BlockMoments::Single(SingleMoments {
            q2: exact_moment(state, &OpExpr::q(0).pow(2))?,
            p2: exact_moment(state, &OpExpr::p(0).pow(2))?,
            q4: exact_moment(state, &OpExpr::q(0).pow(4))?,
        })),
    }
}

/// Moments of a prepared block with the configured backend; returns records when circuits ran.
pub fn block_moments(
    state: &QumodeBlockState,
    config: &AnsatzConfig,
    displacement: f64,
    stream: &[u64],
) -> Result<(BlockMoments, Option<BlockRecords>)> {
    let c = polynomial_shift(state.kind, displacement, config);
    match config.backend {
        Backend::Direct => Ok((direct_moments(state, config.pair_circuit)?.displaced(c), None)),
        backend => {
            let mut rec = measure_block(state, config.shift_s, backend, config.pair_circuit, stream)?;
            rec.displacement = c;
            Ok((rec.moments(), Some(rec)))
        }
    }
}

/// The shift substituted after measurement: c for the zero mode on the polynomial route, else 0.
pub(crate) fn polynomial_shift(kind: BlockKind, c: f64, config: &AnsatzConfig) -> f64 {
    if kind == BlockKind::ZeroMode && config.displacement == super::ansatz::DisplacementRoute::Polynomial {
        c
    } else {
        0.0
    }
}

/// ⟨q²⟩ of a single-mode block from the three-point ancilla combination.
pub fn moment_q2(state: &QumodeBlockState, s: f64, backend: Backend) -> Result<f64> {
    single_from_circuits(state, s, backend).map(|m| m.q2)
}

/// ⟨q⁴⟩ of a single-mode block from the five-point ancilla combination.
pub fn moment_q4(state: &QumodeBlockState, s: f64, backend: Backend) -> Result<f64> {
    single_from_circuits(state, s, backend).map(|m| m.q4)
}

fn single_from_circuits(state: &QumodeBlockState, s: f64, backend: Backend) -> Result<SingleMoments> {
    if matches!(state.kind, BlockKind::Pair(_)) {
        return Err(Error::InvalidParameter("single-mode estimator on a pair block".into()));
    }
    let backend = if backend == Backend::Direct { Backend::Exact } else { backend };
    let rec = measure_block(state, s, backend, PairCircuit::SingleSqueezers, &[0])?;
    Ok(*rec.moments().single().expect("single block"))
}

/// All pair moments from the pair's own photon-number data.
pub fn pair_moments(state: &QumodeBlockState, s: f64, backend: Backend, pair_circuit: PairCircuit) -> Result<PairMoments> {
    if !matches!(state.kind, BlockKind::Pair(_)) {
        return Err(Error::InvalidParameter("pair estimator on a single-mode block".into()));
    }
    let backend = if backend == Backend::Direct { Backend::Exact } else { backend };
    let rec = measure_block(state, s, backend, pair_circuit, &[0])?;
    Ok(*rec.moments().pair().expect("pair block"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::gaussian_gate;

    fn squeezed(r: f64, n: usize) -> QumodeBlockState {
        let mut s = QumodeBlockState::vacuum(BlockKind::ZeroMode, n);
        s.apply(&gaussian_gate(GateKind::Squeeze(r), n).unwrap(), &[0]).unwrap();
        s
    }

    #[test]
    fn vacuum_estimates() {
        let s = QumodeBlockState::vacuum(BlockKind::ZeroMode, 16);
        assert!((moment_q2(&s, 0.1, Backend::Exact).unwrap() - 0.5).abs() < 1e-10);
        assert!((moment_q4(&s, 0.1, Backend::Exact).unwrap() - 0.75).abs() < 1e-8);
    }

    #[test]
    fn estimators_match_exact_moments() {
        let s = squeezed(0.4, 32);
        let q2 = exact_moment(&s, &OpExpr::q(0).pow(2)).unwrap();
        let q4 = exact_moment(&s, &OpExpr::q(0).pow(4)).unwrap();
        for (shift, tol) in [(0.1, 1e-10), (0.5, 1e-6)] {
            assert!((moment_q2(&s, shift, Backend::Exact).unwrap() - q2).abs() < tol * q2);
            assert!((moment_q4(&s, shift, Backend::Exact).unwrap() - q4).abs() < tol * q4);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(5, &[3]), derive_seed(5, &[3]));
    }

    #[test]
    fn resampling_keeps_totals() {
        let s = squeezed(0.5, 16);
        let c = s.number_distribution().unwrap().sample(10_000, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let r = resample_counts(&c, &mut rng);
        assert_eq!(r.counts.values().sum::<u64>(), 10_000);
    }

    use rand::SeedableRng;
}
