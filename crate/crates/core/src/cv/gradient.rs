//! Gradients of ⟨H⟩ with respect to the squeezing parameters and the field shift.
//!
//! ⟨H⟩ is affine in the moments of each block, so dE/dr_b = Σ_i (∂E/∂m_i)·dm_i/dr_b
//! with the coefficients taken at the current moments. The moment derivatives come from
//! one of two estimators:
//!
//! * sinh shift rules. Quadratic moments are combinations of e^{±2r}, so
//!   dm/dr = [m(r + t/2) − m(r − t/2)]/sinh t. Quartic moments carry e^{±4r} and, for the
//!   displaced zero mode, c²e^{2r}; dm/dr = 2[m(r + t/4) − m(r − t/4)]/sinh t holds for both
//!   once the shifted circuits use c·√cosh(t/2).
//! * A SNAP/Hadamard-test circuit. Two qubits and S(t) prepare, in the q₁ = 1 branch,
//!   −i c₀|+⟩|0⟩ − c₂|−⟩|2⟩ with c_j = ⟨j|S(t)|0⟩. After S(r), the displacement and the
//!   measurement circuit, ⟨Y₀·[q₁ = 1]·F⟩ = 2c₀c₂ Re⟨0|V†FV|2⟩, while d⟨F⟩/dr =
//!   √2 Re⟨0|V†FV|2⟩ because the squeezing generator maps |0⟩ to |2⟩/√2.
//!
//! The φ_C derivative uses symmetric displacement shifts (exact five-point stencil, since
//! the moments are polynomials of degree ≤ 4 in c) or the polynomial identities
//! d⟨q²⟩/dc = 2c and d⟨q⁴⟩/dc = 12c⟨q²⟩ − 8c³ on the already measured moments.

use serde::{Deserialize, Serialize};

use super::ansatz::{block_mode, squeeze_profile_derivative, AnsatzConfig, Backend, DisplacementRoute, PairCircuit};
use super::energy::{evaluate, evaluate_block, Evaluation};
use super::moments::{
    contracted_weights, derive_seed, features, gammas, polynomial_shift, BlockMoments, Histogram,
};
use crate::error::{Error, Result};
use crate::fock::{build, build_shared, gaussian_gate, hybrid_gate, BlockKind, Factor, GateKind, QumodeBlockState};
use crate::gep::LatticeSpec;
use crate::par::Execution;

/// Estimator for derivatives with respect to r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqueezeRule {
    Shift { t: f64 },
    Hybrid { t: f64 },
}

/// Estimator for the derivative with respect to φ_C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiRule {
    Shift { t: f64 },
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientMethod {
    pub squeeze: SqueezeRule,
    pub phi: PhiRule,
}

impl Default for GradientMethod {
    fn default() -> Self {
        Self { squeeze: SqueezeRule::Shift { t: 0.2 }, phi: PhiRule::Polynomial }
    }
}

/// dE/dr for one block (k is the block's lower mode index).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentGradient {
    pub mode: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientEstimate {
    pub d_squeeze: Vec<ComponentGradient>,
    pub d_phi_c: f64,
    pub d_phi_c_stderr: f64,
    pub d_omega_prime: f64,
    pub d_omega_prime_stderr: f64,
    pub shots_used: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    value: f64,
    variance: f64,
    shots: u64,
}

impl Partial {
    fn add(&mut self, other: Partial) {
        self.value += other.value;
        self.variance += other.variance;
        self.shots += other.shots;
    }
}

/// Whether a moment component is quadratic (else quartic) in the quadratures.
fn is_quadratic(moments: &BlockMoments, i: usize) -> bool {
    match moments {
        BlockMoments::Single(_) => i < 2,
        BlockMoments::Pair(_) => !(3..=5).contains(&i),
    }
}

fn check_sinh(t: f64) -> Result<f64> {
    let s = t.sinh();
    if s.abs() < 1e-6 {
        return Err(Error::IllConditioned(format!("shift t = {t} gives sinh t below 1e-6")));
    }
    Ok(s)
}

fn stream_of(base: &[u64], tag: u64) -> Vec<u64> {
    let mut v = base.to_vec();
    v.push(tag);
    v
}

/// Σ_i g_i·α_i·m_i over evaluations of one block at shifted parameters.
fn shifted_combination(
    config: &AnsatzConfig,
    kind: BlockKind,
    g: &[f64],
    shifts: &[(f64, f64, f64, bool)],
    stream: &[u64],
) -> Result<Partial> {
    let mut out = Partial::default();
    for (j, &(r, c, coef, quadratic)) in shifts.iter().enumerate() {
        let be = evaluate_block(config, kind, r, c, &stream_of(stream, 100 + j as u64))?;
        let m = be.moments.to_vec();
        let alpha: Vec<f64> = (0..m.len())
            .map(|i| if is_quadratic(&be.moments, i) == quadratic { coef * g[i] } else { 0.0 })
            .collect();
        out.value += alpha.iter().zip(&m).map(|(a, x)| a * x).sum::<f64>();
        if let Some(rec) = &be.records {
            out.variance += rec.linear_variance(&alpha);
            out.shots += rec.shots();
        }
    }
    Ok(out)
}

fn shift_rule_block(
    config: &AnsatzConfig,
    kind: BlockKind,
    g: &[f64],
    r: f64,
    c: f64,
    t: f64,
    stream: &[u64],
) -> Result<Partial> {
    let sh = check_sinh(t)?;
    let cq = c * (0.5 * t).cosh().sqrt();
    let shifts = [
        (r + 0.5 * t, c, 1.0 / sh, true),
        (r - 0.5 * t, c, -1.0 / sh, true),
        (r + 0.25 * t, cq, 2.0 / sh, false),
        (r - 0.25 * t, cq, -2.0 / sh, false),
    ];
    shifted_combination(config, kind, g, &shifts, stream)
}

/// Block state with two leading qubits after the SNAP preparation acting on `target`
/// (a qumode index within the block), followed by the block's own squeezing and shift.
fn hybrid_state(config: &AnsatzConfig, kind: BlockKind, r: f64, c: f64, target: usize, t: f64) -> Result<QumodeBlockState> {
    let n = config.cutoff;
    let mut st = QumodeBlockState::vacuum(kind, n);
    st.attach_front(Factor::Qubit);
    st.attach_front(Factor::Qubit);
    let mode = 2 + target;
    let h = build(GateKind::Hadamard, &[2])?;
    let snap = |level| hybrid_gate(GateKind::Snap { level, theta: std::f64::consts::FRAC_PI_2 }, n);
    let swap = build_shared(GateKind::Swap, &[2, 2])?;
    st.apply(&h, &[0])?;
    st.apply(&h, &[1])?;
    st.apply(&gaussian_gate(GateKind::Squeeze(t), n)?, &[mode])?;
    st.apply(&snap(0)?, &[1, mode])?;
    st.apply(&snap(2)?, &[1, mode])?;
    st.apply(&swap, &[0, 1])?;
    st.apply(&snap(2)?, &[1, mode])?;
    st.apply(&swap, &[0, 1])?;
    st.apply(&h, &[1])?;
    match kind {
        BlockKind::Pair(_) => {
            st.apply(&gaussian_gate(GateKind::Squeeze(r), n)?, &[2])?;
            st.apply(&gaussian_gate(GateKind::Squeeze(-r), n)?, &[3])?;
        }
        _ => {
            st.apply(&gaussian_gate(GateKind::Squeeze(r), n)?, &[2])?;
            if kind == BlockKind::ZeroMode && c != 0.0 && config.displacement == DisplacementRoute::Gate {
                let alpha = num_complex::Complex64::new(c * std::f64::consts::FRAC_1_SQRT_2, 0.0);
                st.apply(&gaussian_gate(GateKind::Displace(alpha), n)?, &[2])?;
            }
        }
    }
    Ok(st)
}

fn hybrid_block(
    config: &AnsatzConfig,
    kind: BlockKind,
    g: &[f64],
    r: f64,
    c: f64,
    t: f64,
    stream: &[u64],
) -> Result<Partial> {
    let n = config.cutoff;
    let st = gaussian_gate(GateKind::Squeeze(t), n)?;
    let (c0, c2) = (st.matrix[(0, 0)].re, st.matrix[(2, 0)].re);
    if (c0 * c2).abs() < 1e-6 {
        return Err(Error::IllConditioned(format!("⟨0|S(t)|0⟩⟨2|S(t)|0⟩ vanishes at t = {t}")));
    }
    let scale = std::f64::consts::SQRT_2 / (2.0 * c0 * c2);
    let backend = if config.backend == Backend::Direct { Backend::Exact } else { config.backend };
    let coef = contracted_weights(kind, config.shift_s, polynomial_shift(kind, c, config), g);
    let targets: &[(usize, f64)] = match kind {
        BlockKind::Pair(_) => &[(0, 1.0), (1, -1.0)],
        _ => &[(0, 1.0)],
    };
    let h = build(GateKind::Hadamard, &[2])?;
    let sdg = build(GateKind::PhaseSdg, &[2])?;
    let mut out = Partial::default();
    for &(target, sign) in targets {
        let mut base = hybrid_state(config, kind, r, c, target, t)?;
        let (p_axis, q_axis) = match kind {
            BlockKind::Pair(_) => (3, 2),
            _ => (base.attach(Factor::Qumode(n)), 2),
        };
        let dims = base.dims();
        for (gi, gamma) in gammas(config.shift_s).into_iter().enumerate() {
            let cg = coef[gi];
            if cg.iter().all(|&x| x == 0.0) {
                continue;
            }
            let mut s = base.clone();
            if gamma != 0.0 {
                let cx = build_shared(GateKind::Cx(gamma), &[dims[p_axis], dims[q_axis]])?;
                s.apply(&cx, &[p_axis, q_axis])?;
            }
            s.apply(&sdg, &[0])?;
            s.apply(&h, &[0])?;
            let dist = s.number_distribution()?;
            let hist = match backend {
                Backend::Sampled { shots, seed } => {
                    let sub = stream_of(stream, 200 + 8 * target as u64 + gi as u64);
                    Histogram::Counts(dist.sample(shots, derive_seed(seed, &sub)))
                }
                _ => Histogram::Probabilities(dist),
            };
            let f = |o: &[usize]| {
                if o[1] != 1 {
                    return 0.0;
                }
                let parity = if o[0] == 0 { 1.0 } else { -1.0 };
                let x = features(kind, &o[2..]);
                sign * scale * parity * (0..5).map(|i| cg[i] * x[i]).sum::<f64>()
            };
            out.value += hist.mean(f);
            out.variance += hist.mean_variance(f);
            out.shots += hist.shots();
        }
    }
    Ok(out)
}

fn squeeze_partial(
    eval: &Evaluation,
    config: &AnsatzConfig,
    spec: &LatticeSpec,
    b: usize,
    rule: SqueezeRule,
    stream: &[u64],
) -> Result<Partial> {
    let moments = eval.moments();
    let g = eval.model.block_gradient(&moments, b);
    let blk = &eval.blocks[b];
    let c = if blk.kind == BlockKind::ZeroMode { config.displacement_amplitude(spec) } else { 0.0 };
    let stream = stream_of(stream, b as u64);
    match rule {
        SqueezeRule::Shift { t } => shift_rule_block(config, blk.kind, &g, blk.squeezing, c, t, &stream),
        SqueezeRule::Hybrid { t } => {
            if config.pair_circuit == PairCircuit::TwoModeSqueezer && matches!(blk.kind, BlockKind::Pair(_)) {
                // The (+, −) basis state is identical, so the single-squeezer form is measured.
                let cfg = AnsatzConfig { pair_circuit: PairCircuit::SingleSqueezers, ..config.clone() };
                return hybrid_block(&cfg, blk.kind, &g, blk.squeezing, c, t, &stream);
            }
            hybrid_block(config, blk.kind, &g, blk.squeezing, c, t, &stream)
        }
    }
}

fn phi_partial(eval: &Evaluation, config: &AnsatzConfig, spec: &LatticeSpec, rule: PhiRule, stream: &[u64]) -> Result<Partial> {
    let moments = eval.moments();
    let g = eval.model.block_gradient(&moments, 0);
    let blk = &eval.blocks[0];
    let root = (spec.sites as f64 * spec.mass).sqrt();
    let c = config.displacement_amplitude(spec);
    match rule {
        PhiRule::Polynomial => {
            let m = blk.moments.single().ok_or_else(|| Error::InvalidParameter("zero-mode block missing".into()))?;
            let value = root * (g[0] * 2.0 * c + g[2] * (12.0 * c * m.q2 - 8.0 * c.powi(3)));
            let alpha = [root * g[2] * 12.0 * c, 0.0, 0.0];
            let variance = blk.records.as_ref().map_or(0.0, |r| r.linear_variance(&alpha));
            Ok(Partial { value, variance, shots: 0 })
        }
        PhiRule::Shift { t } => {
            if !(t > 1e-6) {
                return Err(Error::IllConditioned(format!("displacement shift t = {t} too small")));
            }
            let r = blk.squeezing;
            let phi = config.phi_c;
            let at = |d: f64| root * (phi + d);
            let (q, f) = (1.0 / (2.0 * t), 1.0 / (12.0 * t));
            let shifts = [
                (r, at(t), q, true),
                (r, at(-t), -q, true),
                (r, at(t), 8.0 * f, false),
                (r, at(-t), -8.0 * f, false),
                (r, at(2.0 * t), -f, false),
                (r, at(-2.0 * t), f, false),
            ];
            shifted_combination(config, BlockKind::ZeroMode, &g, &shifts, &stream_of(stream, 1 << 20))
        }
    }
}

/// Gradient at the point already measured in `eval`.
pub fn gradient_at(eval: &Evaluation, config: &AnsatzConfig, spec: &LatticeSpec, method: GradientMethod) -> Result<GradientEstimate> {
    gradient_at_with(eval, config, spec, method, Execution::default())
}

pub fn gradient_at_with(
    eval: &Evaluation,
    config: &AnsatzConfig,
    spec: &LatticeSpec,
    method: GradientMethod,
    exec: Execution,
) -> Result<GradientEstimate> {
    let dr = squeeze_profile_derivative(config.omega_prime, spec.sites)?;
    let squeezed: Vec<usize> = eval
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| config.squeezed_modes.contains(&block_mode(b.kind, spec.sites)))
        .map(|(i, _)| i)
        .collect();
    let parts = exec.map(&squeezed, |&b| squeeze_partial(eval, config, spec, b, method.squeeze, &[1]));
    let mut d_squeeze = Vec::with_capacity(squeezed.len());
    let mut omega = Partial::default();
    for (&b, p) in squeezed.iter().zip(parts) {
        let p = p?;
        let k = block_mode(eval.blocks[b].kind, spec.sites);
        d_squeeze.push(ComponentGradient { mode: k, value: p.value, stderr: p.variance.sqrt() });
        omega.add(Partial { value: p.value * dr[k], variance: p.variance * dr[k] * dr[k], shots: p.shots });
    }
    let phi = phi_partial(eval, config, spec, method.phi, &[2])?;
    Ok(GradientEstimate {
        d_squeeze,
        d_phi_c: phi.value,
        d_phi_c_stderr: phi.variance.sqrt(),
        d_omega_prime: omega.value,
        d_omega_prime_stderr: omega.variance.sqrt(),
        shots_used: omega.shots + phi.shots,
    })
}

/// Evaluates the energy at `config` and the gradient there.
pub fn gradient(config: &AnsatzConfig, spec: &LatticeSpec, method: GradientMethod) -> Result<(Evaluation, GradientEstimate)> {
    let eval = evaluate(config, spec)?;
    let grad = gradient_at(&eval, config, spec, method)?;
    Ok((eval, grad))
}

/// dE/dr for the block carrying mode `k`.
pub fn grad_squeeze(config: &AnsatzConfig, spec: &LatticeSpec, k: usize, rule: SqueezeRule) -> Result<ComponentGradient> {
    if !config.squeezed_modes.contains(&k) {
        return Err(Error::InvalidParameter(format!("mode {k} is not squeezed")));
    }
    let k = k.min(spec.sites - k);
    let eval = evaluate(config, spec)?;
    let b = eval
        .blocks
        .iter()
        .position(|blk| block_mode(blk.kind, spec.sites) == k)
        .ok_or_else(|| Error::InvalidParameter(format!("no block for mode {k}")))?;
    let p = squeeze_partial(&eval, config, spec, b, rule, &[1])?;
    Ok(ComponentGradient { mode: k, value: p.value, stderr: p.variance.sqrt() })
}

/// dE/dφ_C and its standard error.
pub fn grad_phic(config: &AnsatzConfig, spec: &LatticeSpec, rule: PhiRule) -> Result<(f64, f64)> {
    let eval = evaluate(config, spec)?;
    let p = phi_partial(&eval, config, spec, rule, &[2])?;
    Ok((p.value, p.variance.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv::energy::energy_difference;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
        // Richardson-extrapolated central difference
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + 2.0 * h) - f(x - 2.0 * h)) / (4.0 * h);
        (4.0 * d1 - d2) / 3.0
    }

    #[test]
    fn vacuum_gradient_vanishes_without_coupling() {
        let spec = LatticeSpec::new(10, 0.1, 0.0).unwrap();
        let cfg = AnsatzConfig::new(0.1, 0.0, &spec);
        for rule in [SqueezeRule::Shift { t: 0.2 }, SqueezeRule::Hybrid { t: 0.88 }] {
            assert!(grad_squeeze(&cfg, &spec, 0, rule).unwrap().value.abs() < 1e-10);
        }
        assert!(grad_phic(&cfg, &spec, PhiRule::Polynomial).unwrap().0.abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_shift() {
        let spec = LatticeSpec::with_lambda_tilde(10, 0.1, 27.0).unwrap();
        let cfg = AnsatzConfig::new(0.2, 0.3, &spec);
        assert!(grad_squeeze(&cfg, &spec, 0, SqueezeRule::Shift { t: 1e-8 }).is_err());
    }

    #[test]
    fn estimators_match_finite_differences() {
        let spec = LatticeSpec::with_lambda_tilde(10, 0.1, 27.0).unwrap();
        let cfg = AnsatzConfig { cutoff: 32, ..AnsatzConfig::new(0.2, 0.5, &spec) };
        let e = |om: f64, ph: f64| {
            energy_difference(&AnsatzConfig { omega_prime: om, phi_c: ph, ..cfg.clone() }, &spec).unwrap().value
        };
        let d_om = fd(|x| e(x, 0.5), 0.2, 1e-3);
        let d_ph = fd(|x| e(0.2, x), 0.5, 1e-3);
        for squeeze in [SqueezeRule::Shift { t: 0.2 }, SqueezeRule::Hybrid { t: 0.88 }] {
            for phi in [PhiRule::Polynomial, PhiRule::Shift { t: 0.05 }] {
                let (_, g) = gradient(&cfg, &spec, GradientMethod { squeeze, phi }).unwrap();
                assert!((g.d_omega_prime - d_om).abs() < 1e-6 * d_om.abs(), "{squeeze:?}: {} vs {d_om}", g.d_omega_prime);
                assert!((g.d_phi_c - d_ph).abs() < 1e-6 * d_ph.abs(), "{phi:?}: {} vs {d_ph}", g.d_phi_c);
            }
        }
    }

    #[test]
    fn pair_blocks_match_finite_differences() {
        let spec = LatticeSpec::with_lambda_tilde(8, 0.3, 20.0).unwrap();
        for (pair_circuit, displacement) in [
            (PairCircuit::SingleSqueezers, DisplacementRoute::Polynomial),
            (PairCircuit::TwoModeSqueezer, DisplacementRoute::Gate),
        ] {
            let cfg = AnsatzConfig { cutoff: 28, pair_circuit, displacement, ..AnsatzConfig::new(0.45, 0.4, &spec) }
                .with_all_modes(&spec);
            let e = |om: f64| energy_difference(&AnsatzConfig { omega_prime: om, ..cfg.clone() }, &spec).unwrap().value;
            let d_om = fd(e, 0.45, 1e-3);
            for squeeze in [SqueezeRule::Shift { t: 0.2 }, SqueezeRule::Hybrid { t: 0.88 }] {
                let (_, g) = gradient(&cfg, &spec, GradientMethod { squeeze, phi: PhiRule::Polynomial }).unwrap();
                assert!((g.d_omega_prime - d_om).abs() < 1e-6 * d_om.abs(), "{pair_circuit:?} {squeeze:?}: {} vs {d_om}", g.d_omega_prime);
            }
        }
    }
}
