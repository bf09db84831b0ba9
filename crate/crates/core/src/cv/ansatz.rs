//! Gaussian Ansatz: squeezing profile, block layout and state preparation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::fock::{gaussian_gate, BlockKind, Cutoff, GateKind, QumodeBlockState};
use crate::gep::{dispersion, LatticeSpec};

/// How block moments are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Expectations of the truncated operators taken directly on the block state.
    Direct,
    /// CX-ancilla measurement circuits evaluated with exact Born probabilities.
    Exact,
    /// The same circuits with finite shots.
    Sampled { shots: u64, seed: u64 },
}

impl Backend {
    pub fn is_sampled(&self) -> bool {
        matches!(self, Backend::Sampled { .. })
    }
}

/// Circuit used for the (k, L − k) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCircuit {
    /// Two-mode squeezer on (k, L − k), rotated to (+, −) by a 50/50 beam splitter before measurement.
    TwoModeSqueezer,
    /// Single-mode squeezers r and −r applied directly to the (+, −) modes.
    SingleSqueezers,
}

/// How the field shift φ_C enters the zero mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementRoute {
    /// A displacement gate on the zero mode before measurement.
    Gate,
    /// No gate; q(0) → q(0) + c is substituted in the measured moments.
    Polynomial,
}

/// Variational parameters and evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub omega_prime: f64,
    pub phi_c: f64,
    pub squeezed_modes: BTreeSet<usize>,
    pub shift_s: f64,
    pub backend: Backend,
    pub cutoff: usize,
    pub pair_circuit: PairCircuit,
    pub displacement: DisplacementRoute,
}

impl AnsatzConfig {
    /// Exact-backend defaults: cutoff 16, s = 0.1, default squeezed modes for `spec`.
    pub fn new(omega_prime: f64, phi_c: f64, spec: &LatticeSpec) -> Self {
        Self {
            omega_prime,
            phi_c,
            squeezed_modes: default_squeezed_modes(spec.sites),
            shift_s: 0.1,
            backend: Backend::Exact,
            cutoff: 16,
            pair_circuit: PairCircuit::SingleSqueezers,
            displacement: DisplacementRoute::Gate,
        }
    }

    /// Sampled-backend defaults: cutoff 32, s = 1.
    pub fn sampled(omega_prime: f64, phi_c: f64, spec: &LatticeSpec, shots: u64, seed: u64) -> Self {
        Self {
            shift_s: 1.0,
            backend: Backend::Sampled { shots, seed },
            cutoff: 32,
            ..Self::new(omega_prime, phi_c, spec)
        }
    }

    pub fn with_all_modes(mut self, spec: &LatticeSpec) -> Self {
        self.squeezed_modes = (0..=spec.sites / 2).collect();
        self
    }

    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        if !(self.omega_prime > 0.0) || !self.omega_prime.is_finite() {
            return Err(Error::InvalidParameter(format!("OmegaPrime must be positive, got {}", self.omega_prime)));
        }
        if !self.phi_c.is_finite() {
            return Err(Error::InvalidParameter("phiC must be finite".into()));
        }
        if !(self.shift_s > 0.0) {
            return Err(Error::InvalidParameter(format!("shift_s must be positive, got {}", self.shift_s)));
        }
        if let Some(&k) = self.squeezed_modes.iter().find(|&&k| k > spec.sites / 2) {
            return Err(Error::InvalidParameter(format!("squeezed mode {k} outside 0..={}", spec.sites / 2)));
        }
        Cutoff::new(self.cutoff)?;
        if let Backend::Sampled { shots, .. } = self.backend {
            if shots == 0 {
                return Err(Error::InvalidParameter("sampled backend needs shots > 0".into()));
            }
        }
        Ok(())
    }

    /// Zero-mode displacement c = √(Lm)·φ_C.
    pub fn displacement_amplitude(&self, spec: &LatticeSpec) -> f64 {
        (spec.sites as f64 * spec.mass).sqrt() * self.phi_c
    }
}

/// Squeezed modes used when none are given: {0} up to L = 10, {0,…,3} below L = 76, all beyond.
pub fn default_squeezed_modes(sites: usize) -> BTreeSet<usize> {
    if sites <= 10 {
        [0].into_iter().collect()
    } else if sites < 76 {
        (0..=3.min(sites / 2)).collect()
    } else {
        (0..=sites / 2).collect()
    }
}

/// r(k) = ½ log(ω_m(k)/ω_Ω′(k)) for k = 0..=L/2.
pub fn squeeze_profile(omega_prime: f64, mass: f64, sites: usize) -> Result<Vec<f64>> {
    let wm = dispersion(mass, sites)?;
    let wp = dispersion(omega_prime, sites)?;
    Ok((0..=sites / 2).map(|k| 0.5 * (wm.get(k) / wp.get(k)).ln()).collect())
}

/// dr(k)/dΩ′ = −Ω′/(2ω_Ω′(k)²).
pub fn squeeze_profile_derivative(omega_prime: f64, sites: usize) -> Result<Vec<f64>> {
    let wp = dispersion(omega_prime, sites)?;
    Ok((0..=sites / 2).map(|k| -0.5 * omega_prime / (wp.get(k) * wp.get(k))).collect())
}

/// The mode index k carried by a block (0, L/2, or the lower member of a pair).
pub fn block_mode(kind: BlockKind, sites: usize) -> usize {
    match kind {
        BlockKind::ZeroMode => 0,
        BlockKind::HalfMode => sites / 2,
        BlockKind::Pair(k) => k,
    }
}

/// Blocks in canonical order: zero mode, half mode, then pairs k = 1..L/2.
pub fn block_kinds(sites: usize) -> Vec<BlockKind> {
    let mut out = vec![BlockKind::ZeroMode, BlockKind::HalfMode];
    out.extend((1..sites / 2).map(BlockKind::Pair));
    out
}

/// Squeezing applied to each block (zero for modes outside `squeezed_modes`).
pub fn block_squeezing(config: &AnsatzConfig, spec: &LatticeSpec) -> Result<Vec<(BlockKind, f64)>> {
    config.validate(spec)?;
    let r = squeeze_profile(config.omega_prime, spec.mass, spec.sites)?;
    Ok(block_kinds(spec.sites)
        .into_iter()
        .map(|kind| {
            let k = block_mode(kind, spec.sites);
            (kind, if config.squeezed_modes.contains(&k) { r[k] } else { 0.0 })
        })
        .collect())
}

/// Prepares one block. Pairs come out in the (+, −) basis for
/// [`PairCircuit::SingleSqueezers`] and in the physical (k, L − k) basis otherwise.
/// `displacement` is the zero-mode shift c, ignored for other blocks.
pub fn prepare_block(kind: BlockKind, r: f64, displacement: f64, config: &AnsatzConfig) -> Result<QumodeBlockState> {
    let n = config.cutoff;
    let mut state = QumodeBlockState::vacuum(kind, n);
    match kind {
        BlockKind::ZeroMode | BlockKind::HalfMode => {
            if r != 0.0 {
                state.apply(&gaussian_gate(GateKind::Squeeze(r), n)?, &[0])?;
            }
            if kind == BlockKind::ZeroMode && displacement != 0.0 && config.displacement == DisplacementRoute::Gate {
                let alpha = Complex64::new(displacement * std::f64::consts::FRAC_1_SQRT_2, 0.0);
                state.apply(&gaussian_gate(GateKind::Displace(alpha), n)?, &[0])?;
            }
        }
        BlockKind::Pair(_) => {
            if r != 0.0 {
                match config.pair_circuit {
                    PairCircuit::TwoModeSqueezer => {
                        state.apply(&gaussian_gate(GateKind::TwoModeSqueeze(r), n)?, &[0, 1])?;
                    }
                    PairCircuit::SingleSqueezers => {
                        state.apply(&gaussian_gate(GateKind::Squeeze(r), n)?, &[0])?;
                        state.apply(&gaussian_gate(GateKind::Squeeze(-r), n)?, &[1])?;
                    }
                }
            }
        }
    }
    Ok(state)
}

/// All blocks of the Ansatz state, in [`block_kinds`] order.
pub fn prepare_blocks(config: &AnsatzConfig, spec: &LatticeSpec) -> Result<Vec<QumodeBlockState>> {
    let c = config.displacement_amplitude(spec);
    block_squeezing(config, spec)?
        .into_iter()
        .map(|(kind, r)| prepare_block(kind, r, c, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_vanishes_at_renormalized_mass() {
        assert!(squeeze_profile(0.1, 0.1, 10).unwrap().iter().all(|&r| r == 0.0));
        let om = 0.1 * 8.4f64.sqrt();
        let r = squeeze_profile(om, 0.1, 512).unwrap();
        assert!((r[0] - 0.5 * (0.1 / om).ln()).abs() < 1e-15);
        assert!((r[0] + 0.532).abs() < 2e-3);
    }

    #[test]
    fn default_modes() {
        assert_eq!(default_squeezed_modes(10).len(), 1);
        assert_eq!(default_squeezed_modes(30), (0..=3).collect());
        assert_eq!(default_squeezed_modes(76).len(), 39);
    }

    #[test]
    fn block_layout_covers_all_modes() {
        let kinds = block_kinds(10);
        assert_eq!(kinds.len(), 6);
        assert_eq!(kinds[2], BlockKind::Pair(1));
        assert_eq!(block_kinds(2).len(), 2);
    }

    #[test]
    fn config_validation() {
        let spec = LatticeSpec::new(10, 0.1, 0.28).unwrap();
        let mut c = AnsatzConfig::new(0.2, 0.5, &spec);
        assert!(c.validate(&spec).is_ok());
        c.squeezed_modes.insert(6);
        assert!(c.validate(&spec).is_err());
        let c = AnsatzConfig { shift_s: 0.0, ..AnsatzConfig::new(0.2, 0.5, &spec) };
        assert!(c.validate(&spec).is_err());
    }
}
