//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion, then fails if any
//! criterion failed.

mod common;

use std::time::{Duration, Instant};

use phi4_core::cv::ansatz::{AnsatzConfig, Backend, PairCircuit};
use phi4_core::cv::energy::{energy_difference, evaluate};
use phi4_core::cv::gradient::{gradient, GradientMethod, PhiRule, SqueezeRule};
use phi4_core::cv::moments::{moment_q2, moment_q4};
use phi4_core::fock::{exact_moment, gaussian_gate, BlockKind, GateKind, OpExpr, QumodeBlockState};
use phi4_core::gep::{critical_point, critical_scan, duality_solutions, duality_threshold};
use phi4_core::qubit::{mitigate_probabilities, ry, schmidt_circuit, zne_fit, Calibration, NoiseModel, ZnePoint};
use phi4_core::runner::{self, continuum_size, ExperimentConfig, MitigationKind, Mode, NoiseConfig, OneOrMany, Task};
use phi4_core::LatticeSpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed<F: FnOnce() -> Outcome>(limit: Duration, f: F) -> Outcome {
    let t = Instant::now();
    let mut o = f();
    let dt = t.elapsed();
    o.pass &= dt < limit;
    o.detail += &format!("; {:.1} s (limit {} s)", dt.as_secs_f64(), limit.as_secs());
    o
}

fn crossing(task: Task, cfg: &ExperimentConfig) -> (f64, Option<(f64, f64)>, f64) {
    let out = runner::run(task, cfg).unwrap();
    let c = out.manifest.crossing.expect("sweep has a crossing");
    (c.intercept, c.ci, c.intercept_stderr)
}

fn sweep(mode: Mode, sites: usize) -> ExperimentConfig {
    ExperimentConfig { sites: Some(OneOrMany::One(sites)), ..ExperimentConfig::new(mode) }
}

fn criterion_1() -> Outcome {
    timed(Duration::from_secs(10), || {
        let p = critical_point(0.1, 512).unwrap();
        let (lc, oc) = (p.lambda_c_over_m2(), p.omega_c_sq_over_m2());
        Outcome {
            pass: (lc - 60.8).abs() <= 0.3 && (oc - 8.4).abs() <= 0.2,
            detail: format!("lambda_c/m^2 = {lc:.4}, Omega_c^2/m^2 = {oc:.4}"),
        }
    })
}

fn criterion_2() -> Outcome {
    timed(Duration::from_secs(120), || {
        let vals: Vec<(f64, usize, f64)> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&m| {
                let l = continuum_size(m);
                (m, l, critical_scan(m, &[l])[0].as_ref().unwrap().lambda_c_over_m2())
            })
            .collect();
        let last = vals[2].2;
        let approaching = vals.windows(2).all(|w| (w[1].2 - 61.2).abs() <= (w[0].2 - 61.2).abs());
        Outcome {
            pass: (last - 61.2).abs() <= 0.01 * 61.2 && approaching,
            detail: vals.iter().map(|(m, l, v)| format!("m={m} L={l}: {v:.3}")).collect::<Vec<_>>().join(", "),
        }
    })
}

fn criterion_3() -> Outcome {
    timed(Duration::from_secs(1), || {
        let r40 = duality_solutions(40.0).len();
        let r100 = duality_solutions(100.0).len();
        let t = duality_threshold(40.0, 100.0).unwrap();
        Outcome {
            pass: r40 == 0 && r100 == 2 && (50.0..=60.0).contains(&t),
            detail: format!("roots at 40: {r40}, at 100: {r100}, threshold {t:.4}"),
        }
    })
}

fn criterion_4() -> Outcome {
    timed(Duration::from_secs(1800), || {
        let (a, _, _) = crossing(Task::CvSweep, &sweep(Mode::Cv, 10));
        let (b, _, _) = crossing(Task::CvSweep, &sweep(Mode::Cv, 30));
        let (c, _, _) = crossing(Task::CvSweep, &sweep(Mode::Cv, 76));
        Outcome {
            pass: (a - 27.5).abs() <= 0.3 && (b - 57.0).abs() <= 1.0 && (c - 61.1).abs() <= 0.3,
            detail: format!("L=10 {{0}}: {a:.3}, L=30 {{0..3}}: {b:.3}, L=76 all: {c:.3}"),
        }
    })
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in [1u64, 2, 3] {
        let cfg = ExperimentConfig { shots: Some(2048), final_shots: Some(100_000), seed: Some(seed), ..sweep(Mode::Cv, 10) };
        let (x, ci, _) = crossing(Task::CvSweep, &cfg);
        let (lo, hi) = ci.unwrap();
        pass &= lo <= 28.7 && hi >= 27.3;
        parts.push(format!("seed {seed}: {x:.2} CI [{lo:.2}, {hi:.2}]"));
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn criterion_6() -> Outcome {
    timed(Duration::from_secs(300), || {
        let (a, _, _) = crossing(Task::DvSweep, &sweep(Mode::Dv, 30));
        let (b, _, _) = crossing(Task::DvSweep, &sweep(Mode::Dv, 10));
        Outcome {
            pass: (a - 56.0).abs() <= 1.0 && (b - 27.1).abs() <= 0.5,
            detail: format!("L=30 all modes: {a:.3}, L=10 {{0}}: {b:.3}"),
        }
    })
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let spec = LatticeSpec::with_lambda_tilde(4, 0.3, rng.random_range(5.0..80.0)).unwrap();
        let cfg = AnsatzConfig {
            backend: Backend::Direct,
            cutoff: 4,
            pair_circuit: PairCircuit::TwoModeSqueezer,
            ..AnsatzConfig::new(rng.random_range(0.2..0.8), rng.random_range(-1.0..1.0), &spec).with_all_modes(&spec)
        };
        let block = evaluate(&cfg, &spec).unwrap().energy();
        worst = worst.max((block - common::dense_energy_l4(&cfg, &spec)).abs());
    }
    Outcome { pass: worst < 1e-10, detail: format!("max abs error {worst:.2e} over 20 configs") }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn criterion_8() -> Outcome {
    // shift-rule moments against exact expectations at n = 32
    let mut worst_moment: f64 = 0.0;
    for r in [-0.6, -0.3, 0.3, 0.6] {
        for c in [0.0, 0.7] {
            let mut s = QumodeBlockState::vacuum(BlockKind::ZeroMode, 32);
            s.apply(&gaussian_gate(GateKind::Squeeze(r), 32).unwrap(), &[0]).unwrap();
            if c != 0.0 {
                let g = gaussian_gate(GateKind::Displace(Complex64::new(c, 0.0)), 32).unwrap();
                s.apply(&g, &[0]).unwrap();
            }
            let q2 = exact_moment(&s, &OpExpr::q(0).pow(2)).unwrap();
            let q4 = exact_moment(&s, &OpExpr::q(0).pow(4)).unwrap();
            worst_moment = worst_moment
                .max(rel(moment_q2(&s, 0.1, Backend::Exact).unwrap(), q2))
                .max(rel(moment_q4(&s, 0.1, Backend::Exact).unwrap(), q4));
        }
    }
    // gradients against finite differences, |r| ≤ 0.6 on every mode
    let mut worst_grad: f64 = 0.0;
    for (lt, om, phi) in [(27.0, 0.2, 0.5), (20.0, 0.06, 0.3)] {
        let spec = LatticeSpec::with_lambda_tilde(10, 0.1, lt).unwrap();
        let cfg = AnsatzConfig { cutoff: 32, ..AnsatzConfig::new(om, phi, &spec) };
        let e = |o: f64, p: f64| {
            energy_difference(&AnsatzConfig { omega_prime: o, phi_c: p, ..cfg.clone() }, &spec).unwrap().value
        };
        let fd = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| {
            let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
            let d2 = (f(x + 2.0 * h) - f(x - 2.0 * h)) / (4.0 * h);
            (4.0 * d1 - d2) / 3.0
        };
        let d_om = fd(&|x| e(x, phi), om, 1e-3 * om);
        let d_ph = fd(&|x| e(om, x), phi, 1e-3);
        for squeeze in [SqueezeRule::Shift { t: 0.2 }, SqueezeRule::Hybrid { t: 0.88 }] {
            let (_, g) = gradient(&cfg, &spec, GradientMethod { squeeze, phi: PhiRule::Polynomial }).unwrap();
            worst_grad = worst_grad.max(rel(g.d_omega_prime, d_om)).max(rel(g.d_phi_c, d_ph));
        }
    }
    let part_a = worst_moment < 1e-6 && worst_grad < 1e-6;

    // noisy qubit VQE: readout mitigation plus linear ZNE on {1, 3, 5} CNOTs
    let mut part_b = true;
    let mut zs = Vec::new();
    let mut five = Vec::new();
    for lt in [26.0, 28.0, 30.0] {
        let run = |kind: MitigationKind| {
            let cfg = ExperimentConfig {
                sites: Some(OneOrMany::One(10)),
                lambda_tilde: Some(vec![lt]),
                shots: Some(100_000),
                seed: Some(lt as u64),
                noise: Some(NoiseConfig { ro_flip: 0.01, cnot_p: 0.02 }),
                mitigation: Some(kind),
                ..ExperimentConfig::new(Mode::Dv)
            };
            let out = runner::run(Task::ZneRun, &cfg).unwrap();
            let d = &out.manifest.details;
            let value = |k: &str| (d[k]["value"].as_f64().unwrap(), d[k]["stderr"].as_f64().unwrap());
            (d["noiseless"].as_f64().unwrap(), value("noiseless_sampled"), value("extrapolated"))
        };
        // the noiseless reference is sampled with the same shot budget; σ combines both
        let (exact, (clean, clean_se), (le, le_se)) = run(MitigationKind::ReadoutZne3);
        let z = (le - clean) / le_se.hypot(clean_se);
        part_b &= z.abs() <= 2.0;
        zs.push(format!("lt={lt}: LE {le:.4}±{le_se:.4} vs {clean:.4}±{clean_se:.4} (z={z:.2}, exact {exact:.4})"));
        let (_, (clean5, clean5_se), (le5, le5_se)) = run(MitigationKind::ReadoutZne);
        five.push(format!("{:.2}", (le5 - clean5) / le5_se.hypot(clean5_se)));
    }
    Outcome {
        pass: part_a && part_b,
        detail: format!(
            "moments rel err {worst_moment:.1e}, gradients rel err {worst_grad:.1e}; {}; five-level z (info) [{}]",
            zs.join(", "),
            five.join(", ")
        ),
    }
}

fn criterion_9() -> Outcome {
    let p: f64 = 0.02;
    let pts: Vec<ZnePoint> = [1usize, 3, 5, 7, 9]
        .iter()
        .map(|&c| ZnePoint { cnot_count: c, value: (1.0 - p).powi(c as i32), stderr: 0.0 })
        .collect();
    let f = zne_fit(&pts, 1).unwrap();
    let zne_err = (f.value - 1.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ro_err: f64 = 0.0;
    for _ in 0..20 {
        let circ = schmidt_circuit(rng.random_range(-3.0..3.0), &ry(rng.random_range(-3.0..3.0)), &ry(rng.random_range(-3.0..3.0)))
            .unwrap();
        let noise = NoiseModel::symmetric(rng.random_range(0.0..0.1), 0.0);
        let ideal = circ.probabilities(&NoiseModel::ideal()).unwrap();
        let q = mitigate_probabilities(&circ.probabilities(&noise).unwrap(), &Calibration::exact(&noise).unwrap()).quasi;
        ro_err = ro_err.max((0..4).map(|i| (q[i] - ideal[i]).abs()).fold(0.0, f64::max));
    }
    Outcome {
        pass: zne_err < 0.01 && ro_err < 1e-12,
        detail: format!("ZNE intercept {:.5} (truth 1), RO mitigation max error {ro_err:.1e}", f.value),
    }
}

fn criterion_10() -> Outcome {
    let cases = [
        (Task::CvSweep, ExperimentConfig { shots: Some(512), final_shots: Some(4096), seed: Some(9), ..sweep(Mode::Cv, 10) }),
        (
            Task::DvSweep,
            ExperimentConfig {
                shots: Some(2000),
                seed: Some(4),
                noise: Some(NoiseConfig { ro_flip: 0.01, cnot_p: 0.02 }),
                ..sweep(Mode::Dv, 10)
            },
        ),
        (Task::GepScan, ExperimentConfig { sites: Some(OneOrMany::Many(vec![64, 128])), ..ExperimentConfig::new(Mode::Gep) }),
    ];
    let mut pass = true;
    for (task, cfg) in &cases {
        let a = runner::run(*task, cfg).unwrap();
        let b = runner::run(*task, cfg).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        a.write(dir_a.path()).unwrap();
        b.write(dir_b.path()).unwrap();
        for f in a.manifest.files.iter().map(String::as_str).chain(["manifest.json"]) {
            pass &= std::fs::read(dir_a.path().join(f)).unwrap() == std::fs::read(dir_b.path().join(f)).unwrap();
        }
    }
    Outcome { pass, detail: "cv sampled sweep, noisy dv sweep and gep scan rerun byte-identical".into() }
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("GEP critical point at m=0.1, L=512", criterion_1),
        ("continuum trend of lambda_c/m^2", criterion_2),
        ("duality roots and threshold", criterion_3),
        ("CV exact crossings", criterion_4),
        ("CV sampled crossings, 3 seeds", criterion_5),
        ("DV noiseless crossings", criterion_6),
        ("blockwise energy vs dense L=4 lattice", criterion_7),
        ("shift rules; noisy DV recovery with RO + ZNE", criterion_8),
        ("synthetic ZNE and exact RO mitigation", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("criterion {}: {} - {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
