//! Δ⟨H⟩ of the encoded Ansatz from grouped two-qubit measurements.
//!
//! Every squeezed block is prepared with one Schmidt circuit and read out in the five
//! group bases. Unsqueezed blocks stay in the encoded vacuum and are evaluated
//! classically. With zero-noise extrapolation the whole readout is repeated at each
//! CNOT fold level.

use std::collections::BTreeSet;

use nalgebra::{Matrix4, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{encoded_state, gradient_commutator, BlockOperators, ParityEncoding};
use super::pauli::{basis_change, measurement_groups, pauli_decompose, MeasurementGroup};
use crate::cv::ansatz::{block_kinds, block_mode, default_squeezed_modes, squeeze_profile, squeeze_profile_derivative};
use crate::cv::energy::EnergyModel;
use crate::cv::moments::{derive_seed, BlockMoments};
use crate::error::{Error, Result};
use crate::fock::BlockKind;
use crate::gep::LatticeSpec;
use crate::par::Execution;
use crate::qubit::{
    fold_cnots, mitigate_probabilities, mitigate_readout, run, schmidt_circuit, schmidt_parameters, unmitigated,
    sample_counts, zne_fit, Calibration, Counts, MitigatedDistribution, NoiseModel, TwoQubitCircuit, ZneLevels, ZnePoint,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mitigation {
    None,
    /// Calibration-matrix inversion.
    #[default]
    Readout,
    /// Readout mitigation, then a polynomial fit over CNOT fold levels.
    ReadoutZne { levels: ZneLevels, order: usize },
}

impl Mitigation {
    pub fn linear_zne() -> Self {
        Mitigation::ReadoutZne { levels: ZneLevels::Five, order: 1 }
    }

    pub fn uses_readout(self) -> bool {
        !matches!(self, Mitigation::None)
    }

    pub fn fold_levels(self) -> Vec<usize> {
        match self {
            Mitigation::ReadoutZne { levels, .. } => levels.fold_pairs(),
            _ => vec![0],
        }
    }
}

/// Variational parameters and readout settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvConfig {
    pub omega_prime: f64,
    pub phi_c: f64,
    pub squeezed_modes: BTreeSet<usize>,
    pub noise: NoiseModel,
    /// Shots per circuit; `None` uses exact outcome probabilities.
    pub shots: Option<u64>,
    pub seed: u64,
    pub mitigation: Mitigation,
}

impl DvConfig {
    /// Noiseless, exact-probability readout.
    pub fn exact(omega_prime: f64, phi_c: f64, spec: &LatticeSpec) -> Self {
        DvConfig {
            omega_prime,
            phi_c,
            squeezed_modes: default_squeezed_modes(spec.sites),
            noise: NoiseModel::ideal(),
            shots: None,
            seed: 0,
            mitigation: Mitigation::None,
        }
    }

    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        if !(self.omega_prime > 0.0 && self.omega_prime.is_finite()) {
            return Err(Error::InvalidParameter(format!("OmegaPrime must be positive, got {}", self.omega_prime)));
        }
        if !self.phi_c.is_finite() {
            return Err(Error::InvalidParameter("phiC must be finite".into()));
        }
        if let Some(&k) = self.squeezed_modes.iter().find(|&&k| k > spec.sites / 2) {
            return Err(Error::InvalidParameter(format!("squeezed mode {k} outside 0..={}", spec.sites / 2)));
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidParameter("shots must be positive".into()));
        }
        if let Mitigation::ReadoutZne { levels, order } = self.mitigation {
            if order == 0 || order + 1 > levels.fold_pairs().len() {
                return Err(Error::InvalidParameter(format!("ZNE order {order} needs more fold levels")));
            }
        }
        self.noise.validate()
    }
}

#[derive(Debug, Clone)]
struct BlockSetup {
    kind: BlockKind,
    /// ∂r/∂Ω′, zero for unsqueezed blocks.
    dr: f64,
    generator: Matrix4<f64>,
    /// Moment operators after the zero-mode shift, and their c-derivatives.
    ops: Vec<Matrix4<f64>>,
    d_ops: Vec<Matrix4<f64>>,
    state: Vector4<f64>,
    prep: Option<TwoQubitCircuit>,
}

#[derive(Debug, Clone)]
enum BlockReadout {
    Analytic(Vector4<f64>),
    /// One distribution per measurement group.
    Measured(Vec<MitigatedDistribution>),
}

impl BlockReadout {
    /// Estimate of ⟨M⟩ and its variance.
    fn expect(&self, m: &Matrix4<f64>) -> Result<(f64, f64)> {
        match self {
            BlockReadout::Analytic(v) => Ok(((v.transpose() * m * v)[(0, 0)], 0.0)),
            BlockReadout::Measured(dists) => {
                let groups = measurement_groups(&pauli_decompose(m)?);
                Ok(groups.iter().zip(dists).fold((0.0, 0.0), |(val, var), (g, d)| {
                    if g.members.is_empty() {
                        return (val, var);
                    }
                    let (e, v) = d.expectation(&g.weights());
                    (val + e, var + v)
                }))
            }
        }
    }
}

/// Readout of every block at one CNOT fold level.
#[derive(Debug, Clone)]
pub struct DvLevel {
    pub fold_pairs: usize,
    pub cnot_count: usize,
    readouts: Vec<BlockReadout>,
}

/// Δ⟨H⟩ without extrapolation (NE) and extrapolated to zero CNOTs (LE).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DvEstimate {
    pub ne: f64,
    pub ne_stderr: f64,
    pub le: f64,
    pub le_stderr: f64,
    pub zne: Vec<ZnePoint>,
    pub shots_used: u64,
}

/// Block-resolved readout of the encoded Ansatz at all fold levels.
#[derive(Debug, Clone)]
pub struct DvEvaluation {
    pub model: EnergyModel,
    pub config: DvConfig,
    blocks: Vec<BlockSetup>,
    pub levels: Vec<DvLevel>,
    pub shots_used: u64,
    /// Calibration experiments behind a sampled readout mitigation.
    calibration_counts: Option<[Counts; 4]>,
}

/// Calibration resamples used to propagate calibration shot noise.
const CALIBRATION_RESAMPLES: usize = 200;

pub fn dv_energy(config: &DvConfig, spec: &LatticeSpec) -> Result<DvEvaluation> {
    dv_energy_with(config, spec, Execution::default())
}

pub fn dv_energy_with(config: &DvConfig, spec: &LatticeSpec, exec: Execution) -> Result<DvEvaluation> {
    config.validate(spec)?;
    let model = EnergyModel::new(spec)?;
    let r = squeeze_profile(config.omega_prime, spec.mass, spec.sites)?;
    let dr = squeeze_profile_derivative(config.omega_prime, spec.sites)?;
    let c = (spec.sites as f64 * spec.mass).sqrt() * config.phi_c;
    let single = BlockOperators::new(&ParityEncoding::new(BlockKind::ZeroMode))?;
    let pair = BlockOperators::new(&ParityEncoding::new(BlockKind::Pair(1)))?;
    let blocks = block_kinds(spec.sites)
        .into_iter()
        .map(|kind| {
            let k = block_mode(kind, spec.sites);
            let squeezed = config.squeezed_modes.contains(&k);
            let base = if matches!(kind, BlockKind::Pair(_)) { &pair } else { &single };
            let ops = base.for_block(kind);
            let rb = if squeezed { r[k] } else { 0.0 };
            let state = encoded_state(&ops.generator, rb);
            let prep = if rb != 0.0 {
                let (theta, u, v) = schmidt_parameters(&[state[0], state[1], state[2], state[3]])?;
                Some(schmidt_circuit(theta, &u, &v)?)
            } else {
                None
            };
            let (m, d) = ops.displaced(c);
            Ok(BlockSetup {
                kind,
                dr: if squeezed { dr[k] } else { 0.0 },
                generator: ops.generator,
                ops: m,
                d_ops: d,
                state,
                prep,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let measured = blocks.iter().filter(|b| b.prep.is_some()).count() as u64;
    let (calibration, calibration_counts) = match (config.mitigation.uses_readout(), config.shots) {
        (false, _) => (None, None),
        (true, None) => (Some(Calibration::exact(&config.noise)?), None),
        (true, Some(s)) if measured > 0 => {
            let counts = Calibration::experiments(&config.noise, s, derive_seed(config.seed, &[u64::MAX - 1]))?;
            (Some(Calibration::from_counts(&counts)?), Some(counts))
        }
        (true, Some(_)) => (None, None),
    };
    let cal_shots = calibration_counts.as_ref().map_or(0, |c| c.iter().map(|x| x.shots).sum());
    let fold_levels = config.mitigation.fold_levels();
    let items: Vec<(usize, usize)> =
        (0..fold_levels.len()).flat_map(|l| (0..blocks.len()).map(move |b| (l, b))).collect();
    let readouts = exec.map(&items, |&(l, b)| {
        let blk = &blocks[b];
        let Some(prep) = &blk.prep else {
            return Ok(BlockReadout::Analytic(blk.state));
        };
        let prep = fold_cnots(prep, fold_levels[l]);
        let dists = MeasurementGroup::BASES
            .iter()
            .enumerate()
            .map(|(g, &basis)| {
                let circ = TwoQubitCircuit { gates: [prep.gates.clone(), basis_change(basis)].concat(), ..prep.clone() };
                match config.shots {
                    None => {
                        let p = circ.probabilities(&config.noise)?;
                        Ok(match &calibration {
                            Some(cal) => mitigate_probabilities(&p, cal),
                            None => unmitigated(p, 0, 0),
                        })
                    }
                    Some(shots) => {
                        let seed = derive_seed(config.seed, &[fold_levels[l] as u64, b as u64, g as u64]);
                        let counts = run(&circ, &config.noise, shots, seed)?;
                        Ok(match &calibration {
                            Some(cal) => mitigate_readout(&counts, cal),
                            None => unmitigated(counts.frequencies(), shots, seed),
                        })
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockReadout::Measured(dists))
    });
    let readouts = readouts.into_iter().collect::<Result<Vec<_>>>()?;
    let levels = fold_levels
        .iter()
        .enumerate()
        .map(|(l, &k)| DvLevel {
            fold_pairs: k,
            cnot_count: 1 + 2 * k,
            readouts: readouts[l * blocks.len()..(l + 1) * blocks.len()].to_vec(),
        })
        .collect();
    let circuit_shots = config.shots.unwrap_or(0) * 5 * measured * fold_levels.len() as u64;
    Ok(DvEvaluation {
        model,
        config: config.clone(),
        blocks,
        levels,
        shots_used: circuit_shots + cal_shots,
        calibration_counts,
    })
}

impl DvEvaluation {
    fn block_moments(&self, level: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.blocks
            .iter()
            .zip(&self.levels[level].readouts)
            .map(|(blk, ro)| {
                let pairs = blk.ops.iter().map(|m| ro.expect(m)).collect::<Result<Vec<_>>>()?;
                Ok(pairs.into_iter().unzip())
            })
            .collect()
    }

    /// Block moments at fold level index `level`.
    pub fn moments(&self, level: usize) -> Result<Vec<BlockMoments>> {
        Ok(self
            .block_moments(level)?
            .into_iter()
            .zip(&self.blocks)
            .map(|((v, _), blk)| template(blk.kind).with_values(&v))
            .collect())
    }

    /// Δ⟨H⟩ and its standard error at fold level index `level`.
    pub fn difference(&self, level: usize) -> Result<(f64, f64)> {
        let moments = self.moments(level)?;
        let value = self.model.energy(&moments) - self.model.reference();
        let mut var = 0.0;
        for (b, (blk, ro)) in self.blocks.iter().zip(&self.levels[level].readouts).enumerate() {
            if matches!(ro, BlockReadout::Analytic(_)) {
                continue;
            }
            let h = self.block_operator(&moments, b, &blk.ops);
            var += ro.expect(&h)?.1;
        }
        Ok((value, var.sqrt()))
    }

    /// Σ_i ∂E/∂m_i · M_i for block b.
    fn block_operator(&self, moments: &[BlockMoments], b: usize, ops: &[Matrix4<f64>]) -> Matrix4<f64> {
        let g = self.model.block_gradient(moments, b);
        g.iter().zip(ops).fold(Matrix4::zeros(), |acc, (gi, m)| acc + m * *gi)
    }

    pub fn zne_points(&self) -> Result<Vec<ZnePoint>> {
        (0..self.levels.len())
            .map(|l| {
                let (value, stderr) = self.difference(l)?;
                Ok(ZnePoint { cnot_count: self.levels[l].cnot_count, value, stderr })
            })
            .collect()
    }

    /// NE and LE with standard errors. With a sampled calibration the spread of the
    /// estimates over resampled calibration experiments is added in quadrature.
    pub fn estimate(&self) -> Result<DvEstimate> {
        let mut est = self.shot_estimate()?;
        let Some(counts) = &self.calibration_counts else {
            return Ok(est);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &[u64::MAX - 3]));
        let mut ne = Vec::with_capacity(CALIBRATION_RESAMPLES);
        let mut le = Vec::with_capacity(CALIBRATION_RESAMPLES);
        for _ in 0..CALIBRATION_RESAMPLES {
            let replica = self.recalibrated(&resample_experiments(counts, &mut rng))?.shot_estimate()?;
            ne.push(replica.ne);
            le.push(replica.le);
        }
        est.ne_stderr = est.ne_stderr.hypot(sample_sd(&ne));
        est.le_stderr = est.le_stderr.hypot(sample_sd(&le));
        Ok(est)
    }

    /// The same histograms mitigated with the calibration from `counts`.
    fn recalibrated(&self, counts: &[Counts; 4]) -> Result<Self> {
        let cal = Calibration::from_counts(counts)?;
        Ok(self.map_measured(|d| d.remitigate(&cal)))
    }

    fn map_measured(&self, mut f: impl FnMut(&MitigatedDistribution) -> MitigatedDistribution) -> Self {
        let levels = self
            .levels
            .iter()
            .map(|lv| DvLevel {
                readouts: lv
                    .readouts
                    .iter()
                    .map(|ro| match ro {
                        BlockReadout::Analytic(v) => BlockReadout::Analytic(*v),
                        BlockReadout::Measured(d) => BlockReadout::Measured(d.iter().map(&mut f).collect()),
                    })
                    .collect(),
                ..*lv
            })
            .collect();
        DvEvaluation { levels, ..self.clone() }
    }

    /// Estimate with shot-noise standard errors of the circuit histograms only.
    fn shot_estimate(&self) -> Result<DvEstimate> {
        let zne = self.zne_points()?;
        let (ne, ne_stderr) = (zne[0].value, zne[0].stderr);
        let (le, le_stderr) = match self.config.mitigation {
            Mitigation::ReadoutZne { order, .. } => {
                let f = zne_fit(&zne, order)?;
                (f.value, f.stderr)
            }
            _ => (ne, ne_stderr),
        };
        Ok(DvEstimate { ne, ne_stderr, le, le_stderr, zne, shots_used: self.shots_used })
    }

    /// The reported estimate (LE with extrapolation, NE otherwise) recomputed on `b`
    /// multinomial resamplings of every measured histogram and calibration experiment.
    pub fn bootstrap(&self, b: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(b);
        for _ in 0..b {
            let mut replica = self.map_measured(|d| d.resample(&mut rng));
            if let Some(counts) = &self.calibration_counts {
                replica = replica.recalibrated(&resample_experiments(counts, &mut rng))?;
            }
            out.push(replica.shot_estimate()?.le);
        }
        Ok(out)
    }

    /// ∂Δ⟨H⟩/∂(ln Ω′, φ_C) from the unfolded readout, with standard errors.
    ///
    /// The squeezing derivative of each block is ⟨[H_b, K_b]⟩, H_b being the block's
    /// energy operator; the φ_C derivative differentiates the shifted zero-mode operators.
    pub fn gradient(&self, spec: &LatticeSpec) -> Result<([f64; 2], [f64; 2])> {
        self.gradient_at(spec, 0)
    }

    /// The reported value: extrapolated with ZNE, unfolded otherwise. Calibration noise
    /// is not propagated.
    pub fn mitigated_value(&self) -> Result<f64> {
        Ok(self.shot_estimate()?.le)
    }

    /// Gradient of [`Self::mitigated_value`]: with ZNE each component is extrapolated
    /// from the gradients at the fold levels.
    pub fn mitigated_gradient(&self, spec: &LatticeSpec) -> Result<([f64; 2], [f64; 2])> {
        let Mitigation::ReadoutZne { order, .. } = self.config.mitigation else {
            return self.gradient(spec);
        };
        let per_level = (0..self.levels.len()).map(|l| self.gradient_at(spec, l)).collect::<Result<Vec<_>>>()?;
        let mut g = [0.0; 2];
        let mut se = [0.0; 2];
        for i in 0..2 {
            let pts: Vec<ZnePoint> = per_level
                .iter()
                .zip(&self.levels)
                .map(|((v, s), lv)| ZnePoint { cnot_count: lv.cnot_count, value: v[i], stderr: s[i] })
                .collect();
            let f = zne_fit(&pts, order)?;
            (g[i], se[i]) = (f.value, f.stderr);
        }
        Ok((g, se))
    }

    fn gradient_at(&self, spec: &LatticeSpec, level: usize) -> Result<([f64; 2], [f64; 2])> {
        let moments = self.moments(level)?;
        let mut g = [0.0; 2];
        let mut var = [0.0; 2];
        let scale = self.config.omega_prime;
        for (b, (blk, ro)) in self.blocks.iter().zip(&self.levels[level].readouts).enumerate() {
            if blk.dr != 0.0 {
                let h = self.block_operator(&moments, b, &blk.ops);
                let (v, s2) = ro.expect(&gradient_commutator(&h, &blk.generator))?;
                let f = scale * blk.dr;
                g[0] += f * v;
                var[0] += f * f * s2;
            }
            if blk.kind == BlockKind::ZeroMode {
                let d = self.block_operator(&moments, b, &blk.d_ops);
                let (v, s2) = ro.expect(&d)?;
                let f = (spec.sites as f64 * spec.mass).sqrt();
                g[1] += f * v;
                var[1] += f * f * s2;
            }
        }
        Ok((g, [var[0].sqrt(), var[1].sqrt()]))
    }

    /// Moments from the dense encoded states, bypassing the measurement pipeline.
    pub fn dense_moments(&self) -> Vec<BlockMoments> {
        self.blocks
            .iter()
            .map(|blk| {
                let v: Vec<f64> = blk.ops.iter().map(|m| (blk.state.transpose() * m * blk.state)[(0, 0)]).collect();
                template(blk.kind).with_values(&v)
            })
            .collect()
    }
}

fn template(kind: BlockKind) -> BlockMoments {
    BlockMoments::vacuum(kind)
}

fn resample_experiments(counts: &[Counts; 4], rng: &mut ChaCha8Rng) -> [Counts; 4] {
    std::array::from_fn(|i| {
        let c = &counts[i];
        Counts { counts: sample_counts(&c.frequencies(), c.shots, rng), ..c.clone() }
    })
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
