//! The property suite run by `verify`. Each check returns its measured
//! metrics so callers can apply their own thresholds.

use std::collections::BTreeMap;
use std::time::Instant;

use nhlab::entanglement::{
    channel_fidelity, f_max, random_channel, random_separable_state, separability_test,
    singlet, DensityMatrix, KrausChannel,
};
use nhlab::interferometer::{
    closed_form_intensity, detector_intensity, fringe_from_samples, full_t_extraction,
    scan_fringe, ExtremaMode, SagnacConfig,
};
use nhlab::noise::{errorbar_pipeline, ratio_error, sample_counts, CountingModel, Measured};
use nhlab::optics::{
    operator_complex, operator_complex_b, operator_real, operator_real_b, OpticalTrain,
};
use nhlab::qmath::{gram_matrix, OperatorMatrix, StateVector};
use nhlab::random::{child_rng, complex_gaussian_matrix, haar_state};
use nhlab::uncertainty::check_product_relation;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{self, Format};
use crate::config::{ExperimentConfig, Mode, ScanSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    #[serde(skip)]
    pub seconds: f64,
    pub metrics: BTreeMap<&'static str, f64>,
}

type Metrics = BTreeMap<&'static str, f64>;

fn finish(id: u32, name: &'static str, start: Instant, metrics: Metrics, passed: bool) -> CheckOutcome {
    CheckOutcome {
        id,
        name,
        passed,
        seconds: start.elapsed().as_secs_f64(),
        metrics,
    }
}

fn max_par(n: usize, seed: u64, f: impl Fn(&mut nhlab::random::SimRng) -> f64 + Sync) -> f64 {
    (0..n)
        .into_par_iter()
        .map(|k| f(&mut child_rng(seed, k as u64)))
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Pure-qubit equality of the product relation.
pub fn qubit_equality(seed: u64, instances: usize) -> CheckOutcome {
    let start = Instant::now();
    let worst = max_par(instances, seed, |rng| {
        let a = complex_gaussian_matrix(rng, 2);
        let b = complex_gaussian_matrix(rng, 2);
        let r = check_product_relation(&a, &b, &haar_state(rng, 2)).expect("qubit instance");
        (r.lhs - r.rhs).abs() / r.rhs.max(1.0)
    });
    let m = Metrics::from([("max_scaled_gap", worst)]);
    finish(1, "pure-qubit equality", start, m, worst <= 1e-10)
}

/// Product relation in dimensions 3 to 5.
pub fn general_inequality(seed: u64, instances: usize) -> CheckOutcome {
    let start = Instant::now();
    let worst = -max_par(instances, seed, |rng| {
        let d = rng.random_range(3..=5);
        let a = complex_gaussian_matrix(rng, d);
        let b = complex_gaussian_matrix(rng, d);
        -check_product_relation(&a, &b, &haar_state(rng, d)).expect("instance").slack
    });
    let m = Metrics::from([("min_slack", worst)]);
    finish(2, "general inequality", start, m, worst >= -1e-10)
}

/// Real-case equality over the default sweep.
pub fn real_sweep() -> CheckOutcome {
    let start = Instant::now();
    let res = crate::sweep::run_real_sweep(&ExperimentConfig::defaults(Mode::Real), false)
        .expect("default real sweep");
    let at_zero = res
        .rows
        .iter()
        .find(|r| r.theta0_deg == 0.0)
        .map_or(f64::NAN, |r| r.lhs);
    let gap = res.max_abs_slack();
    let m = Metrics::from([("max_abs_gap", gap), ("lhs_at_zero", at_zero)]);
    let passed = gap <= 1e-10 && (at_zero - 0.546875).abs() <= 1e-10;
    finish(3, "real-case equality sweep", start, m, passed)
}

/// Complex-case bound over the default sweep.
pub fn complex_sweep() -> CheckOutcome {
    let start = Instant::now();
    let res = crate::sweep::run_complex_sweep(&ExperimentConfig::defaults(Mode::Complex), false)
        .expect("default complex sweep");
    let max_lhs = res.max_lhs();
    let t22_gap = res
        .rows
        .iter()
        .map(|r| (r.t.t22 - 0.625).abs())
        .fold(0.0, f64::max);
    let m = Metrics::from([("max_lhs", max_lhs), ("max_t22_gap", t22_gap)]);
    let passed = max_lhs <= 1.0 + 1e-10 && t22_gap <= 1e-10;
    finish(4, "complex-case bound", start, m, passed)
}

/// Compiled trains against the closed operators, with loss accounting.
pub fn optics_agreement(seed: u64, sets: usize) -> CheckOutcome {
    let start = Instant::now();
    let (mut op_gap, mut loss_gap) = (0.0f64, 0.0f64);
    for k in 0..sets {
        let mut rng = child_rng(seed, k as u64);
        let mut ang = || rng.random_range(-90.0..90.0);
        let (t1, t3, t5, t7, t0) = (ang(), ang(), ang(), ang(), ang());
        let phi = StateVector::polarization(t0);
        let cases = [
            (OpticalTrain::real(t1, t3), operator_real(t1, t3)),
            (OpticalTrain::real(t5, t7), operator_real_b(t5, t7)),
            (
                OpticalTrain::complex(t1, t3, 0.0).expect("v1 angle"),
                operator_complex(t1, t3, 0.0).expect("v1 angle"),
            ),
            (
                OpticalTrain::complex(t5, t7, 0.0).expect("v1 angle"),
                operator_complex_b(t5, t7, 0.0).expect("v1 angle"),
            ),
        ];
        for (train, op) in cases {
            let out = train.propagate(&phi).expect("valid train");
            let want = op.apply_state(&phi).expect("qubit");
            let g = (out.surviving.amplitudes() - want)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            op_gap = op_gap.max(g);
            loss_gap = loss_gap.max((out.surviving.norm_sqr() + out.lost_norm_sqr() - 1.0).abs());
        }
    }
    let m = Metrics::from([("max_operator_gap", op_gap), ("max_loss_gap", loss_gap)]);
    finish(5, "optics/table agreement", start, m, op_gap <= 1e-12 && loss_gap <= 1e-12)
}

/// Propagated intensity against the closed form, and fringe extraction
/// against the Gram matrix.
pub fn interferometer_oracle(seed: u64, configs: usize) -> CheckOutcome {
    let start = Instant::now();
    let gaps: Vec<(f64, f64)> = (0..configs)
        .into_par_iter()
        .map(|k| {
            let mut rng = child_rng(seed, k as u64);
            let mut ang = || rng.random_range(-90.0..90.0);
            let a = operator_real(ang(), ang());
            let b = operator_complex_b(ang(), ang(), 0.0).expect("v1 angle");
            let input = haar_state(&mut rng, 2);
            let cfg = SagnacConfig::new(a.clone(), b.clone(), input.clone());
            let ig = cfg
                .phase_grid
                .iter()
                .map(|&th| {
                    (detector_intensity(&cfg, th).expect("valid")
                        - closed_form_intensity(&cfg, th).expect("valid"))
                    .abs()
                })
                .fold(0.0, f64::max);
            let direct = gram_matrix(&a, &b, &input).expect("valid").magnitudes();
            let fr = full_t_extraction(&a, &b, &input).expect("valid");
            let tg = direct
                .as_array()
                .iter()
                .zip(fr.as_array())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            (ig, tg)
        })
        .collect();
    let ig = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let tg = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
    let m = Metrics::from([("max_intensity_gap", ig), ("max_extraction_gap", tg)]);
    finish(6, "interferometer oracle", start, m, ig <= 1e-12 && tg <= 1e-9)
}

/// Extracted magnitudes of the real configuration at θ0 = 0.
pub fn paper_values() -> CheckOutcome {
    let start = Instant::now();
    let t = full_t_extraction(
        &operator_real(22.5, 60.0),
        &operator_real_b(22.5, 75.0),
        &StateVector::polarization(0.0),
    )
    .expect("valid");
    let r2 = 2f64.sqrt();
    let r3 = 3f64.sqrt();
    let want = [1.0 / (2.0 * r2), r3 / (2.0 * r2), 0.625, 0.875, (4.0 + r3) / 8.0];
    let gap = t
        .as_array()
        .iter()
        .zip(want)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let m = Metrics::from([("max_gap", gap)]);
    finish(7, "θ0 = 0 reference values", start, m, gap <= 1e-9)
}

/// Hermitian part of random Gram matrices is PSD.
pub fn gram_psd(seed: u64, instances: usize) -> CheckOutcome {
    let start = Instant::now();
    let worst = -max_par(instances, seed, |rng| {
        let d = rng.random_range(2..=5);
        let a = complex_gaussian_matrix(rng, d);
        let b = complex_gaussian_matrix(rng, d);
        -gram_matrix(&a, &b, &haar_state(rng, d))
            .expect("instance")
            .hermitian_part_min_eigenvalue()
    });
    let m = Metrics::from([("min_eigenvalue", worst)]);
    finish(8, "Gram PSD", start, m, worst >= -1e-10)
}

/// Worked ratio case, Monte-Carlo against propagation, and rate scaling.
pub fn error_propagation(seed: u64, trials: usize) -> CheckOutcome {
    let start = Instant::now();
    let worked = ratio_error(
        Measured { mean: 100.0, variance: 100.0 },
        Measured { mean: 400.0, variance: 400.0 },
    )
    .expect("nonzero denominator");
    let var = worked.sigma * worked.sigma;

    let a = operator_real(22.5, 60.0);
    let b = operator_real_b(22.5, 75.0);
    let input = StateVector::polarization(0.0);
    let model = CountingModel::new(1e4, 1.0, seed).expect("valid model");
    let base = errorbar_pipeline(&a, &b, &input, &model, trials).expect("pipeline");
    let t23 = base.get("T23").expect("T23 entry");
    let agreement = t23.monte_carlo.sigma / t23.propagation.sigma;

    let decade_model = CountingModel { rate_scale: 1e5, ..model };
    let decade = errorbar_pipeline(&a, &b, &input, &decade_model, trials).expect("pipeline");
    let ratio = t23.monte_carlo.sigma / decade.get("T23").expect("T23 entry").monte_carlo.sigma;

    let m = Metrics::from([
        ("worked_variance", var),
        ("mc_over_propagated", agreement),
        ("decade_sigma_ratio", ratio),
    ]);
    let passed = (var - 7.8125e-4).abs() <= 1e-15
        && (agreement - 1.0).abs() <= 0.15
        && (ratio / 10f64.sqrt() - 1.0).abs() <= 0.10;
    finish(9, "error propagation", start, m, passed)
}

/// Fitted visibility under the contrast model.
pub fn visibility_model(seed: u64) -> CheckOutcome {
    let start = Instant::now();
    let id = OperatorMatrix::identity(2);
    let scan = scan_fringe(&SagnacConfig::new(id.clone(), id, StateVector::polarization(0.0)))
        .expect("identity scan");
    let model = CountingModel::new(1e6, 0.9828, seed).expect("valid model");
    let counts = sample_counts(&scan, &model).expect("counts");
    let fit = fringe_from_samples(
        scan.phases.clone(),
        counts.iter().map(|&n| n as f64).collect(),
        ExtremaMode::CosineFit,
    )
    .expect("fit");
    let v = fit.visibility();
    let m = Metrics::from([("fitted_visibility", v)]);
    finish(10, "visibility model", start, m, (v - 0.9828).abs() <= 0.005)
}

/// Separability criterion calibration, soundness and the fidelity identity.
pub fn entanglement_criterion(seed: u64, products: usize, pairs: usize) -> CheckOutcome {
    let start = Instant::now();
    let xy = KrausChannel::pauli_xy();
    let fm = f_max(&xy).expect("qubit channel");
    let singlet_rho = DensityMatrix::pure_bipartite(&singlet(), 2, 2).expect("valid");
    let rep = separability_test(&xy, &xy, &singlet_rho).expect("valid");

    let min_slack = -max_par(products, seed, |rng| {
        let rho = random_separable_state(rng, 2, 2, 4);
        match separability_test(&xy, &xy, &rho) {
            Ok(r) => -(r.lhs - r.rhs),
            Err(_) => f64::INFINITY,
        }
    });
    let identity_gap = max_par(pairs, seed ^ 0xe3, |rng| {
        let d = rng.random_range(2..=4);
        let n = rng.random_range(1..=4);
        let ch = random_channel(rng, d, n);
        let r = channel_fidelity(&ch, &haar_state(rng, d)).expect("valid");
        (r.fidelity + r.variance_sum - 1.0).abs()
    });
    let m = Metrics::from([
        ("f_max_xy", fm),
        ("singlet_lhs", rep.lhs),
        ("singlet_margin", rep.margin),
        ("product_min_slack", min_slack),
        ("fidelity_identity_gap", identity_gap),
    ]);
    let passed = (fm - 0.5).abs() <= 1e-6
        && rep.lhs.abs() <= 1e-9
        && (rep.margin - 1.0).abs() <= 1e-9
        && min_slack >= -1e-9
        && identity_gap <= 1e-12;
    finish(11, "entanglement criterion", start, m, passed)
}

/// Every file-producing command run twice with the same seed.
pub fn determinism(seed: u64) -> CheckOutcome {
    let start = Instant::now();
    let mut real = ExperimentConfig::defaults(Mode::Real);
    real.seed = seed;
    let mut complex = ExperimentConfig::defaults(Mode::Complex);
    complex.seed = seed;
    let mut fringe_cfg = real.clone();
    fringe_cfg.scan = ScanSpec { theta0: 10.0, arm_a: nhlab::interferometer::Arm::A, arm_b: nhlab::interferometer::Arm::B };
    let run = || -> Vec<(String, String)> {
        let mut files = Vec::new();
        for out in [
            commands::sweep(&real, true, Format::Csv),
            commands::sweep(&complex, true, Format::Json),
            commands::fringe(&fringe_cfg, true, Format::Csv),
            commands::tmatrix(&real),
            commands::entangle(&real),
        ] {
            files.extend(out.expect("command runs").files);
        }
        files
    };
    let (first, second) = (run(), run());
    let differing = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .count() as f64;
    let m = Metrics::from([("files", first.len() as f64), ("differing_files", differing)]);
    finish(12, "determinism", start, m, differing == 0.0 && first.len() == second.len())
}

/// Instance counts for [`run_all`].
#[derive(Debug, Clone, Copy)]
pub struct Sizes {
    pub relation_instances: usize,
    pub optics_sets: usize,
    pub interferometer_configs: usize,
    pub noise_trials: usize,
    pub product_states: usize,
    pub fidelity_pairs: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Self {
            relation_instances: 10_000,
            optics_sets: 100,
            interferometer_configs: 50,
            noise_trials: 10_000,
            product_states: 1_000,
            fidelity_pairs: 10_000,
        }
    }
}

pub fn run_all(seed: u64, sizes: Sizes) -> Vec<CheckOutcome> {
    vec![
        qubit_equality(seed, sizes.relation_instances),
        general_inequality(seed, sizes.relation_instances),
        real_sweep(),
        complex_sweep(),
        optics_agreement(seed, sizes.optics_sets),
        interferometer_oracle(seed, sizes.interferometer_configs),
        paper_values(),
        gram_psd(seed, sizes.relation_instances),
        error_propagation(seed, sizes.noise_trials),
        visibility_model(seed),
        entanglement_criterion(seed, sizes.product_states, sizes.fidelity_pairs),
        determinism(seed),
    ]
}
