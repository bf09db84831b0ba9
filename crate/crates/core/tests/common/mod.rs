//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use phi4_core::cv::ansatz::{prepare_blocks, AnsatzConfig};
use phi4_core::fock::{ladder_and_quadratures, Cutoff};
use phi4_core::gep::{bare_mass_squared, dispersion};
use phi4_core::LatticeSpec;

type CMat = DMatrix<Complex64>;

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

fn embed(op: &CMat, axis: usize, n: usize, factors: usize) -> CMat {
    let id = CMat::identity(n, n);
    (0..factors).fold(CMat::identity(1, 1), |acc, i| kron(&acc, if i == axis { op } else { &id }))
}

/// ⟨H⟩ of the Ansatz on L = 4 from the site-basis lattice Hamiltonian, with the four
/// normal modes (0, 2 and the pair 1, 3) held in one dense 4-factor Fock space.
///
/// H = Σ_k ω_k(q_k² + p_k²)/2 + Σ_x [(m₀² − m²)/2 φ_x² + λ/24 φ_x⁴], where φ_x is
/// expanded in the real Fourier basis and the pair's cosine and sine components are
/// (q_a + q_b)/√2 and (p_a − p_b)/√2 of the two physical pair modes.
pub fn dense_energy_l4(config: &AnsatzConfig, spec: &LatticeSpec) -> f64 {
    assert_eq!(spec.sites, 4);
    let n = config.cutoff;
    let blocks = prepare_blocks(config, spec).unwrap();
    let psi = blocks
        .iter()
        .fold(DVector::from_element(1, Complex64::new(1.0, 0.0)), |acc, b| acc.kronecker(&b.amplitudes));
    let lad = ladder_and_quadratures(Cutoff::new(n).unwrap());
    let qc = lad.q.map(|x| Complex64::new(x, 0.0));
    let pc = lad.p();
    let q: Vec<CMat> = (0..4).map(|i| embed(&qc, i, n, 4)).collect();
    let p: Vec<CMat> = (0..4).map(|i| embed(&pc, i, n, 4)).collect();
    let w = dispersion(spec.mass, 4).unwrap();
    let (w0, w1, wh) = (w.get(0), w.get(1), w.get(2));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let comps = [
        &q[0] / Complex64::from(w0.sqrt()),
        &q[1] / Complex64::from(wh.sqrt()),
        (&q[2] + &q[3]) * Complex64::from(h / w1.sqrt()),
        (&p[2] - &p[3]) * Complex64::from(h / w1.sqrt()),
    ];
    let l = 4.0_f64;
    let delta = 0.5 * (bare_mass_squared(spec.mass, spec.lambda, 4).unwrap() - spec.mass * spec.mass);
    let omegas = [w0, wh, w1, w1];
    let dim = n.pow(4);
    let mut ham = CMat::zeros(dim, dim);
    for i in 0..4 {
        ham += (&q[i] * &q[i] + &p[i] * &p[i]) * Complex64::from(0.5 * omegas[i]);
    }
    for x in 0..4 {
        let xf = x as f64;
        let theta = 2.0 * std::f64::consts::PI * xf / l;
        let coef = [
            1.0 / l.sqrt(),
            if x % 2 == 0 { 1.0 } else { -1.0 } / l.sqrt(),
            (2.0 / l).sqrt() * theta.cos(),
            (2.0 / l).sqrt() * theta.sin(),
        ];
        let phi = comps.iter().zip(coef).fold(CMat::zeros(dim, dim), |acc, (c, k)| acc + c * Complex64::from(k));
        let phi2 = &phi * &phi;
        ham += &phi2 * Complex64::from(delta) + (&phi2 * &phi2) * Complex64::from(spec.lambda / 24.0);
    }
    (psi.adjoint() * ham * &psi)[(0, 0)].re
}
