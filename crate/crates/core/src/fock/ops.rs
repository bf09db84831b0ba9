//! Ladder operators, quadratures and composed operator expressions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Number of retained Fock levels per qumode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cutoff(usize);

impl Cutoff {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("Fock cutoff must be >= 2, got {n}")));
        }
        Ok(Cutoff(n))
    }

    pub fn levels(self) -> usize {
        self.0
    }
}

/// Truncated a, a†, q, p and N for one qumode.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub a: DMatrix<f64>,
    pub adag: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// p = i(a† − a)/√2 is purely imaginary; `p_im` holds (a† − a)/√2.
    pub p_im: DMatrix<f64>,
    pub number: DMatrix<f64>,
}

impl Ladder {
    pub fn levels(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> CMatrix {
        self.p_im.map(|x| Complex64::new(0.0, x))
    }
}

pub fn ladder_and_quadratures(n: Cutoff) -> Ladder {
    ladder(n.levels())
}

pub(crate) fn ladder(n: usize) -> Ladder {
    let mut a = DMatrix::zeros(n, n);
    for j in 1..n {
        a[(j - 1, j)] = (j as f64).sqrt();
    }
    let adag = a.transpose();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = (&a + &adag) * s;
    let p_im = (&adag - &a) * s;
    let number = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |j, _| j as f64));
    Ladder { a, adag, q, p_im, number }
}

pub(crate) fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// A single-factor operator appearing inside an [`OpExpr`].
#[derive(Debug, Clone)]
pub enum LocalOp {
    A,
    Adag,
    Q,
    P,
    N,
    PauliX,
    PauliY,
    PauliZ,
    Matrix(Arc<CMatrix>),
}

impl LocalOp {
    pub fn matrix(&self, dim: usize) -> Result<CMatrix> {
        let pauli = |m: [[Complex64; 2]; 2]| -> Result<CMatrix> {
            if dim != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: dim });
            }
            Ok(CMatrix::from_fn(2, 2, |i, j| m[i][j]))
        };
        Ok(match self {
            LocalOp::A => to_complex(&ladder(dim).a),
            LocalOp::Adag => to_complex(&ladder(dim).adag),
            LocalOp::Q => to_complex(&ladder(dim).q),
            LocalOp::P => ladder(dim).p(),
            LocalOp::N => to_complex(&ladder(dim).number),
            LocalOp::PauliX => pauli([[ZERO, ONE], [ONE, ZERO]])?,
            LocalOp::PauliY => pauli([[ZERO, -I], [I, ZERO]])?,
            LocalOp::PauliZ => pauli([[ONE, ZERO], [ZERO, -ONE]])?,
            LocalOp::Matrix(m) => {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: m.nrows() });
                }
                (**m).clone()
            }
        })
    }
}

/// One product term: `coeff · f₁ f₂ … f_k`, applied right to left.
#[derive(Debug, Clone)]
pub struct OpTerm {
    pub coeff: Complex64,
    pub factors: Vec<(usize, LocalOp)>,
}

/// A sum of products of single-factor operators on a multi-factor block.
#[derive(Debug, Clone, Default)]
pub struct OpExpr {
    pub terms: Vec<OpTerm>,
}

impl OpExpr {
    pub fn identity() -> Self {
        Self::scalar(1.0)
    }

    pub fn scalar(c: f64) -> Self {
        OpExpr { terms: vec![OpTerm { coeff: Complex64::new(c, 0.0), factors: Vec::new() }] }
    }

    pub fn local(axis: usize, op: LocalOp) -> Self {
        OpExpr { terms: vec![OpTerm { coeff: ONE, factors: vec![(axis, op)] }] }
    }

    pub fn q(axis: usize) -> Self {
        Self::local(axis, LocalOp::Q)
    }

    pub fn p(axis: usize) -> Self {
        Self::local(axis, LocalOp::P)
    }

    pub fn n(axis: usize) -> Self {
        Self::local(axis, LocalOp::N)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = OpExpr::identity();
        for _ in 0..k {
            out = out * self.clone();
        }
        out
    }
}

impl Add for OpExpr {
    type Output = OpExpr;
    fn add(mut self, rhs: OpExpr) -> OpExpr {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Neg for OpExpr {
    type Output = OpExpr;
    fn neg(self) -> OpExpr {
        self * -1.0
    }
}

impl Sub for OpExpr {
    type Output = OpExpr;
    fn sub(self, rhs: OpExpr) -> OpExpr {
        self + (-rhs)
    }
}

impl Mul<f64> for OpExpr {
    type Output = OpExpr;
    fn mul(mut self, c: f64) -> OpExpr {
        for t in &mut self.terms {
            t.coeff *= c;
        }
        self
    }
}

impl Mul for OpExpr {
    type Output = OpExpr;
    fn mul(self, rhs: OpExpr) -> OpExpr {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(OpTerm { coeff: a.coeff * b.coeff, factors });
            }
        }
        OpExpr { terms }
    }
}
