//! Encoded block operators as 4×4 real matrices.

use nalgebra::{DMatrix, Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::fock::{ladder_and_quadratures, BlockKind, Cutoff};

/// Level map of one block onto two qubits.
///
/// Operators are built from ladder matrices with `cutoff` levels per mode and then
/// restricted to the four encoded levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParityEncoding {
    pub kind: BlockKind,
    pub cutoff: usize,
}

impl ParityEncoding {
    /// Cutoff 8 for single modes and 4 per mode for pairs.
    pub fn new(kind: BlockKind) -> Self {
        let cutoff = if matches!(kind, BlockKind::Pair(_)) { 4 } else { 8 };
        ParityEncoding { kind, cutoff }
    }

    pub fn with_cutoff(kind: BlockKind, cutoff: usize) -> Result<Self> {
        let min = if matches!(kind, BlockKind::Pair(_)) { 4 } else { 7 };
        if cutoff < min {
            return Err(Error::InvalidParameter(format!("cutoff {cutoff} cannot hold the encoded levels of {kind:?}")));
        }
        Ok(ParityEncoding { kind, cutoff })
    }

    pub fn is_pair(&self) -> bool {
        matches!(self.kind, BlockKind::Pair(_))
    }

    /// Indices of the encoded levels in the truncated Fock space, in basis-state order.
    pub fn levels(&self) -> [usize; 4] {
        if self.is_pair() {
            std::array::from_fn(|j| j * self.cutoff + j)
        } else {
            [0, 2, 4, 6]
        }
    }

    fn restrict(&self, full: &DMatrix<f64>) -> Matrix4<f64> {
        let lv = self.levels();
        Matrix4::from_fn(|i, j| full[(lv[i], lv[j])])
    }
}

/// Operators that can be encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolicOp {
    Identity,
    Q,
    Q3,
    Q2,
    Q4,
    P2,
    /// Single modes: N. Pairs: N(k) + N(L − k).
    N,
    N2,
    /// Single modes: q² + p². Pairs: sum over both modes.
    Kinetic,
    QPlus2,
    PMinus2,
    QPlus4,
    PMinus4,
    /// (q₊² + p₋²)².
    QSumSquared,
    NPlus,
    NMinus,
    /// (a†² − a²)/2 for single modes, a†b† − ab for pairs.
    Generator,
}

fn pow(m: &DMatrix<f64>, k: u32) -> DMatrix<f64> {
    (1..k).fold(m.clone(), |acc, _| &acc * m)
}

fn full_single(op: SymbolicOp, n: usize) -> Result<DMatrix<f64>> {
    let l = ladder_and_quadratures(Cutoff::new(n)?);
    let p2 = -(&l.p_im * &l.p_im);
    Ok(match op {
        SymbolicOp::Identity => DMatrix::identity(n, n),
        SymbolicOp::Q => l.q.clone(),
        SymbolicOp::Q2 => pow(&l.q, 2),
        SymbolicOp::Q3 => pow(&l.q, 3),
        SymbolicOp::Q4 => pow(&l.q, 4),
        SymbolicOp::P2 => p2,
        SymbolicOp::N => l.number.clone(),
        SymbolicOp::N2 => pow(&l.number, 2),
        SymbolicOp::Kinetic => pow(&l.q, 2) + p2,
        SymbolicOp::Generator => (pow(&l.adag, 2) - pow(&l.a, 2)) * 0.5,
        other => return Err(Error::InvalidParameter(format!("{other:?} is not a single-mode operator"))),
    })
}

fn full_pair(op: SymbolicOp, n: usize) -> Result<DMatrix<f64>> {
    let l = ladder_and_quadratures(Cutoff::new(n)?);
    let id = DMatrix::<f64>::identity(n, n);
    let a = l.a.kronecker(&id);
    let b = id.kronecker(&l.a);
    let (qa, qb) = (l.q.kronecker(&id), id.kronecker(&l.q));
    let (pa, pb) = (l.p_im.kronecker(&id), id.kronecker(&l.p_im));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q_plus = (&qa + &qb) * s;
    // p₋ = i·(pa − pb)/√2 with real pa, pb holding (a† − a)/√2
    let p_minus_im = (&pa - &pb) * s;
    let q_plus2 = pow(&q_plus, 2);
    let p_minus2 = -pow(&p_minus_im, 2);
    let number = a.transpose() * &a + b.transpose() * &b;
    let ladder_n = |m: DMatrix<f64>| m.transpose() * m;
    Ok(match op {
        SymbolicOp::Identity => DMatrix::identity(n * n, n * n),
        SymbolicOp::N => number,
        SymbolicOp::N2 => pow(&number, 2),
        SymbolicOp::Kinetic => pow(&qa, 2) + pow(&qb, 2) - pow(&pa, 2) - pow(&pb, 2),
        SymbolicOp::QPlus2 => q_plus2,
        SymbolicOp::PMinus2 => p_minus2,
        SymbolicOp::QPlus4 => pow(&q_plus, 4),
        SymbolicOp::PMinus4 => pow(&p_minus_im, 4),
        SymbolicOp::QSumSquared => pow(&(q_plus2 + p_minus2), 2),
        SymbolicOp::NPlus => ladder_n((&a + &b) * s),
        SymbolicOp::NMinus => ladder_n((&a - &b) * s),
        SymbolicOp::Generator => a.transpose() * b.transpose() - &a * &b,
        other => return Err(Error::InvalidParameter(format!("{other:?} is not a pair operator"))),
    })
}

/// Splits a single-mode operator into its parity-preserving and parity-flipping parts.
fn parity_parts(full: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let even = DMatrix::from_fn(full.nrows(), full.ncols(), |i, j| if (i + j) % 2 == 0 { full[(i, j)] } else { 0.0 });
    let odd = full - &even;
    (even, odd)
}

/// Restriction of a truncated operator to the encoded levels.
///
/// Parity-odd single-mode operators encode to zero; operators mixing both parities are
/// rejected.
pub fn truncated_operator(op: SymbolicOp, enc: &ParityEncoding) -> Result<Matrix4<f64>> {
    if enc.is_pair() {
        return Ok(enc.restrict(&full_pair(op, enc.cutoff)?));
    }
    encode_single(&full_single(op, enc.cutoff)?, enc)
}

/// Encodes an arbitrary single-mode matrix given on the truncated Fock space.
pub fn encode_single(full: &DMatrix<f64>, enc: &ParityEncoding) -> Result<Matrix4<f64>> {
    let (even, odd) = parity_parts(full);
    if even.amax() > 0.0 && odd.amax() > 0.0 {
        return Err(Error::InvalidParameter("operator mixes parity sectors".into()));
    }
    Ok(enc.restrict(&even))
}

/// d⟨A⟩/dr for states e^{rK}|0⟩: the real symmetric commutator [A, K].
///
/// Equal to (i/2)[K′, A] with K′ = qp + pq written through ladder matrices; the
/// canonical commutation relation is never used.
pub fn gradient_commutator(a: &Matrix4<f64>, generator: &Matrix4<f64>) -> Matrix4<f64> {
    a * generator - generator * a
}

/// The encoded state e^{rK}|00⟩.
pub fn encoded_state(generator: &Matrix4<f64>, r: f64) -> Vector4<f64> {
    let m = DMatrix::from_fn(4, 4, |i, j| r * generator[(i, j)]);
    let e = m.exp();
    Vector4::from_fn(|i, _| e[(i, 0)])
}

/// Encoded moment operators of one block, in the order of `BlockMoments::to_vec`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperators {
    pub kind: BlockKind,
    pub generator: Matrix4<f64>,
    pub moments: Vec<Matrix4<f64>>,
    /// Encoded q and q³ (zero mode and k = L/2 only).
    odd: Option<(Matrix4<f64>, Matrix4<f64>)>,
}

impl BlockOperators {
    pub fn new(enc: &ParityEncoding) -> Result<Self> {
        let t = |op| truncated_operator(op, enc);
        let (moments, odd) = if enc.is_pair() {
            let ops = [
                SymbolicOp::Kinetic,
                SymbolicOp::QPlus2,
                SymbolicOp::PMinus2,
                SymbolicOp::QPlus4,
                SymbolicOp::PMinus4,
                SymbolicOp::QSumSquared,
                SymbolicOp::NPlus,
                SymbolicOp::NMinus,
            ];
            (ops.into_iter().map(t).collect::<Result<Vec<_>>>()?, None)
        } else {
            let ops = [SymbolicOp::Q2, SymbolicOp::P2, SymbolicOp::Q4];
            (ops.into_iter().map(t).collect::<Result<Vec<_>>>()?, Some((t(SymbolicOp::Q)?, t(SymbolicOp::Q3)?)))
        };
        Ok(BlockOperators { kind: enc.kind, generator: t(SymbolicOp::Generator)?, moments, odd })
    }

    /// The same operators relabeled for another block of the same shape.
    pub fn for_block(&self, kind: BlockKind) -> Self {
        BlockOperators { kind, ..self.clone() }
    }

    /// Moment operators after q → q + c (zero mode only), and their derivatives in c.
    pub fn displaced(&self, c: f64) -> (Vec<Matrix4<f64>>, Vec<Matrix4<f64>>) {
        match (&self.odd, self.kind) {
            (Some((q, q3)), BlockKind::ZeroMode) => {
                let (q2, p2, q4) = (&self.moments[0], &self.moments[1], &self.moments[2]);
                let id = Matrix4::identity();
                let c2 = c * c;
                let ops = vec![
                    q2 + q * (2.0 * c) + id * c2,
                    *p2,
                    q4 + q3 * (4.0 * c) + q2 * (6.0 * c2) + q * (4.0 * c * c2) + id * (c2 * c2),
                ];
                let d = vec![
                    q * 2.0 + id * (2.0 * c),
                    Matrix4::zeros(),
                    q3 * 4.0 + q2 * (12.0 * c) + q * (12.0 * c2) + id * (4.0 * c * c2),
                ];
                (ops, d)
            }
            _ => (self.moments.clone(), vec![Matrix4::zeros(); self.moments.len()]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_q2_matches_ladder_formula() {
        let enc = ParityEncoding::new(BlockKind::ZeroMode);
        let m = truncated_operator(SymbolicOp::Q2, &enc).unwrap();
        for n in 0..4 {
            assert!((m[(n, n)] - (4 * n + 1) as f64 / 2.0).abs() < 1e-14);
        }
        for n in 0..3 {
            let k = (2 * n) as f64;
            let want = ((k + 1.0) * (k + 2.0)).sqrt() / 2.0;
            assert!((m[(n + 1, n)] - want).abs() < 1e-14);
            assert!((m[(n, n + 1)] - want).abs() < 1e-14);
        }
        assert_eq!(m[(3, 0)], 0.0);
    }

    #[test]
    fn odd_operators_encode_to_zero() {
        let enc = ParityEncoding::new(BlockKind::HalfMode);
        assert_eq!(truncated_operator(SymbolicOp::Q, &enc).unwrap(), Matrix4::zeros());
        assert_eq!(truncated_operator(SymbolicOp::Q3, &enc).unwrap(), Matrix4::zeros());
    }

    #[test]
    fn mixed_parity_rejected() {
        let enc = ParityEncoding::new(BlockKind::ZeroMode);
        let l = ladder_and_quadratures(Cutoff::new(8).unwrap());
        let mixed = &l.q + &l.q * &l.q;
        assert!(encode_single(&mixed, &enc).is_err());
        assert!(truncated_operator(SymbolicOp::QPlus2, &enc).is_err());
    }

    #[test]
    fn pair_number_is_collective() {
        let enc = ParityEncoding::new(BlockKind::Pair(1));
        let n = truncated_operator(SymbolicOp::N, &enc).unwrap();
        assert!((n - Matrix4::from_diagonal(&Vector4::new(0.0, 2.0, 4.0, 6.0))).amax() < 1e-14);
    }

    #[test]
    fn generator_closes_on_encoded_sector() {
        for kind in [BlockKind::ZeroMode, BlockKind::Pair(2)] {
            let enc = ParityEncoding::new(kind);
            let full = if enc.is_pair() {
                full_pair(SymbolicOp::Generator, enc.cutoff).unwrap()
            } else {
                full_single(SymbolicOp::Generator, enc.cutoff).unwrap()
            };
            let lv = enc.levels();
            for &j in &lv {
                for i in 0..full.nrows() {
                    if !lv.contains(&i) {
                        assert_eq!(full[(i, j)], 0.0, "{kind:?} leaks {j} -> {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn identity_commutes_to_zero() {
        let enc = ParityEncoding::new(BlockKind::ZeroMode);
        let k = truncated_operator(SymbolicOp::Generator, &enc).unwrap();
        assert_eq!(gradient_commutator(&Matrix4::identity(), &k), Matrix4::zeros());
    }

    #[test]
    fn commutator_gives_derivative_of_expectation() {
        for kind in [BlockKind::ZeroMode, BlockKind::Pair(1)] {
            let ops = BlockOperators::new(&ParityEncoding::new(kind)).unwrap();
            let (r, h) = (0.3, 1e-5);
            for a in &ops.moments {
                let f = |r| {
                    let v = encoded_state(&ops.generator, r);
                    (v.transpose() * a * v)[(0, 0)]
                };
                let fd = (f(r + h) - f(r - h)) / (2.0 * h);
                let v = encoded_state(&ops.generator, r);
                let g = (v.transpose() * gradient_commutator(a, &ops.generator) * v)[(0, 0)];
                assert!((g - fd).abs() < 1e-7 * (1.0 + g.abs()), "{kind:?}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn vacuum_moments_are_exact() {
        let ops = BlockOperators::new(&ParityEncoding::new(BlockKind::ZeroMode)).unwrap();
        assert!((ops.moments[2][(0, 0)] - 0.75).abs() < 1e-14);
        let ops = BlockOperators::new(&ParityEncoding::new(BlockKind::Pair(1))).unwrap();
        let want = [2.0, 0.5, 0.5, 0.75, 0.75, 2.0, 0.0, 0.0];
        for (m, w) in ops.moments.iter().zip(want) {
            assert!((m[(0, 0)] - w).abs() < 1e-14);
        }
    }
}
