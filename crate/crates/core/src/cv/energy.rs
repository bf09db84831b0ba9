//! Energy of the Ansatz state assembled from block moments.
//!
//! With mass-m mode quadratures, ω_k = ω_m(k), s_k = Q_k/ω_k and δ = (m₀² − m²)/2,
//!
//! ```text
//! H = Σ_blocks ω/2·(kinetic) + δ·[q₀²/ω₀ + q_h²/ω_h + Σ_k s_k]
//!   + λ/(24L)·[q₀⁴/ω₀² + q_h⁴/ω_h² + 6 q₀² q_h²/(ω₀ω_h) + 6(q₀²/ω₀ + q_h²/ω_h) Σ_k s_k
//!              + ½ Σ_k (3⟨Q_k²⟩ or 4F_k at k = L/4)/ω_k²
//!              + 3 Σ_{k<k'} (2 s_k s_k' + [k + k' = L/2] D_k D_k'/(ω_k ω_k'))]
//! ```
//!
//! where pairs run over 1 ≤ k < L/2. The energy is affine in the moments of each
//! block separately, which the error propagation uses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ansatz::{block_kinds, block_squeezing, prepare_block, AnsatzConfig, Backend, DisplacementRoute};
use super::moments::{block_moments, BlockMoments, BlockRecords};
use crate::error::Result;
use crate::fock::{BlockKind, LEAKAGE_WARN};
use crate::gep::{bare_mass_squared, dispersion, LatticeSpec};
use crate::par::Execution;

/// Coefficients of the lattice Hamiltonian in the mode basis.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    pub spec: LatticeSpec,
    /// ω_m(k) for k = 0..=L/2.
    omega: Vec<f64>,
    delta: f64,
}

impl EnergyModel {
    pub fn new(spec: &LatticeSpec) -> Result<Self> {
        let w = dispersion(spec.mass, spec.sites)?;
        let m2 = spec.mass * spec.mass;
        Ok(Self {
            spec: *spec,
            omega: (0..=spec.sites / 2).map(|k| w.get(k)).collect(),
            delta: 0.5 * (bare_mass_squared(spec.mass, spec.lambda, spec.sites)? - m2),
        })
    }

    /// ⟨H⟩ for blocks in [`block_kinds`] order.
    pub fn energy(&self, moments: &[BlockMoments]) -> f64 {
        let l = self.spec.sites;
        let w = &self.omega;
        let (w0, wh) = (w[0], w[l / 2]);
        let mut zero = None;
        let mut half = None;
        let mut pairs = Vec::with_capacity(l / 2);
        let mut quadratic = 0.0;
        let mut quartic = 0.0;
        let kinds = block_kinds(l);
        for (kind, m) in kinds.iter().zip(moments) {
            match (kind, m) {
                (BlockKind::ZeroMode, BlockMoments::Single(s)) => zero = Some(*s),
                (BlockKind::HalfMode, BlockMoments::Single(s)) => half = Some(*s),
                (BlockKind::Pair(k), BlockMoments::Pair(p)) => pairs.push((*k, *p)),
                _ => unreachable!("block kind and moment variant disagree"),
            }
        }
        let z = zero.expect("zero-mode block");
        let h = half.expect("half-mode block");
        quadratic += 0.5 * w0 * (z.q2 + z.p2) + 0.5 * wh * (h.q2 + h.p2);
        quadratic += self.delta * (z.q2 / w0 + h.q2 / wh);
        quartic += z.q4 / (w0 * w0) + h.q4 / (wh * wh) + 6.0 * z.q2 * h.q2 / (w0 * wh);

        let mut s_sum = 0.0;
        let mut s_sq = 0.0;
        let mut d = vec![0.0; l / 2];
        for (k, p) in &pairs {
            let wk = w[*k];
            let s = p.q_sum() / wk;
            quadratic += 0.5 * wk * p.kinetic + self.delta * s;
            let diag = if 4 * k == l { 4.0 * p.quartic_sum() } else { 3.0 * p.q_sq_sum2 };
            quartic += 0.5 * diag / (wk * wk);
            s_sum += s;
            s_sq += s * s;
            d[*k] = p.diff() / wk;
        }
        quartic += 6.0 * (z.q2 / w0 + h.q2 / wh) * s_sum;
        // Σ_{k<k'} 2 s_k s_k' = (Σs)² − Σs²
        quartic += 3.0 * (s_sum * s_sum - s_sq);
        for k in 1..l / 2 {
            let k2 = l / 2 - k;
            if k < k2 {
                quartic += 3.0 * d[k] * d[k2];
            }
        }
        quadratic + self.spec.lambda / (24.0 * l as f64) * quartic
    }

    /// Energy of the mass-m vacuum.
    pub fn reference(&self) -> f64 {
        let vac: Vec<BlockMoments> = block_kinds(self.spec.sites).into_iter().map(BlockMoments::vacuum).collect();
        self.energy(&vac)
    }

    /// ∂E/∂(moments of block b), exact because E is affine in each block.
    pub fn block_gradient(&self, moments: &[BlockMoments], b: usize) -> Vec<f64> {
        let mut work = moments.to_vec();
        let n = moments[b].len();
        work[b] = moments[b].with_values(&vec![0.0; n]);
        let base = self.energy(&work);
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                work[b] = moments[b].with_values(&e);
                self.energy(&work) - base
            })
            .collect()
    }
}

/// Result of one energy evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub shots_used: u64,
    pub leakage: f64,
    pub leakage_flag: bool,
}

#[derive(Debug, Clone)]
pub struct BlockEvaluation {
    pub kind: BlockKind,
    pub squeezing: f64,
    pub moments: BlockMoments,
    pub records: Option<BlockRecords>,
    pub leakage: f64,
}

/// Block-resolved evaluation of ⟨H⟩.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub model: EnergyModel,
    pub blocks: Vec<BlockEvaluation>,
}

impl Evaluation {
    pub fn moments(&self) -> Vec<BlockMoments> {
        self.blocks.iter().map(|b| b.moments).collect()
    }

    pub fn energy(&self) -> f64 {
        self.model.energy(&self.moments())
    }

    /// Standard error of ⟨H⟩ by linear propagation of the per-circuit shot noise.
    pub fn stderr(&self) -> f64 {
        let moments = self.moments();
        let var: f64 = self
            .blocks
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.records.as_ref().map(|r| (i, r)))
            .map(|(i, r)| r.linear_variance(&self.model.block_gradient(&moments, i)))
            .sum();
        var.sqrt()
    }

    pub fn shots(&self) -> u64 {
        self.blocks.iter().filter_map(|b| b.records.as_ref()).map(|r| r.shots()).sum()
    }

    pub fn leakage(&self) -> f64 {
        self.blocks.iter().map(|b| b.leakage).fold(0.0, f64::max)
    }

    /// ΔH = ⟨H⟩ − ⟨H⟩_vacuum with its standard error.
    pub fn difference(&self) -> EnergyEstimate {
        let leakage = self.leakage();
        EnergyEstimate {
            value: self.energy() - self.model.reference(),
            stderr: self.stderr(),
            shots_used: self.shots(),
            leakage,
            leakage_flag: leakage > LEAKAGE_WARN,
        }
    }

    /// ΔH recomputed from `b` multinomial resamplings of every circuit histogram.
    pub fn bootstrap(&self, b: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reference = self.model.reference();
        (0..b)
            .map(|_| {
                let moments: Vec<BlockMoments> = self
                    .blocks
                    .iter()
                    .map(|blk| match &blk.records {
                        Some(r) => r.resample(&mut rng).moments(),
                        None => blk.moments,
                    })
                    .collect();
                self.model.energy(&moments) - reference
            })
            .collect()
    }
}

/// Prepares and measures every block.
pub fn evaluate(config: &AnsatzConfig, spec: &LatticeSpec) -> Result<Evaluation> {
    evaluate_with(config, spec, Execution::default())
}

pub fn evaluate_with(config: &AnsatzConfig, spec: &LatticeSpec, exec: Execution) -> Result<Evaluation> {
    let model = EnergyModel::new(spec)?;
    let layout = block_squeezing(config, spec)?;
    let c = config.displacement_amplitude(spec);
    let indexed: Vec<(usize, BlockKind, f64)> = layout.iter().enumerate().map(|(i, &(k, r))| (i, k, r)).collect();
    let blocks = exec.map(&indexed, |&(i, kind, r)| evaluate_block(config, kind, r, c, &[i as u64]));
    Ok(Evaluation { model, blocks: blocks.into_iter().collect::<Result<Vec<_>>>()? })
}

/// Prepares and measures one block at squeezing `r` and zero-mode shift `c`.
pub(crate) fn evaluate_block(
    config: &AnsatzConfig,
    kind: BlockKind,
    r: f64,
    c: f64,
    stream: &[u64],
) -> Result<BlockEvaluation> {
    let displaced = kind == BlockKind::ZeroMode && c != 0.0;
    let analytic = r == 0.0 && (!displaced || config.displacement == DisplacementRoute::Polynomial);
    if analytic {
        let m = BlockMoments::vacuum(kind);
        let moments = if kind == BlockKind::ZeroMode { m.displaced(c) } else { m };
        return Ok(BlockEvaluation { kind, squeezing: r, moments, records: None, leakage: 0.0 });
    }
    let state = prepare_block(kind, r, c, config)?;
    let (moments, records) = block_moments(&state, config, c, stream)?;
    let leakage = records.as_ref().map_or(state.leakage, |rec| rec.leakage.max(state.leakage));
    Ok(BlockEvaluation { kind, squeezing: r, moments, records, leakage })
}

/// ⟨H⟩ of the Ansatz state.
pub fn energy(config: &AnsatzConfig, spec: &LatticeSpec) -> Result<EnergyEstimate> {
    let ev = evaluate(config, spec)?;
    let d = ev.difference();
    Ok(EnergyEstimate { value: ev.energy(), ..d })
}

/// ΔH = ⟨H⟩ − ⟨H⟩ at Ω′ = m, φ_C = 0.
pub fn energy_difference(config: &AnsatzConfig, spec: &LatticeSpec) -> Result<EnergyEstimate> {
    Ok(evaluate(config, spec)?.difference())
}

/// Infinite-cutoff ⟨H⟩ of the Gaussian state by Wick contraction.
pub fn gaussian_energy(config: &AnsatzConfig, spec: &LatticeSpec) -> Result<f64> {
    let model = EnergyModel::new(spec)?;
    let moments: Vec<BlockMoments> = block_squeezing(config, spec)?
        .into_iter()
        .map(|(kind, r)| gaussian_moments(kind, r, if kind == BlockKind::ZeroMode { config.displacement_amplitude(spec) } else { 0.0 }))
        .collect();
    Ok(model.energy(&moments))
}

/// Untruncated moments of a squeezed (and, for the zero mode, displaced) vacuum.
pub fn gaussian_moments(kind: BlockKind, r: f64, c: f64) -> BlockMoments {
    let (a, b) = (0.5 * (2.0 * r).exp(), 0.5 * (-2.0 * r).exp());
    match kind {
        BlockKind::Pair(_) => BlockMoments::Pair(super::moments::PairMoments {
            kinetic: 2.0 * (a + b),
            q_plus2: a,
            p_minus2: a,
            q_plus4: 3.0 * a * a,
            p_minus4: 3.0 * a * a,
            q_sq_sum2: 6.0 * a * a + 2.0 * a * a,
            n_plus: 0.5 * (a + b - 1.0),
            n_minus: 0.5 * (a + b - 1.0),
        }),
        _ => BlockMoments::Single(super::moments::SingleMoments { q2: a, p2: b, q4: 3.0 * a * a }).displaced(c),
    }
}

/// Whether the configuration measures anything with shots.
pub fn uses_shots(config: &AnsatzConfig) -> bool {
    matches!(config.backend, Backend::Sampled { .. })
}
