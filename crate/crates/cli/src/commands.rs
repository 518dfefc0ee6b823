//! Subcommand bodies. Each returns the files it would write and the checks
//! that failed; nothing here touches the filesystem.

use nhlab::entanglement::separability_test;
use nhlab::format::sig12;
use nhlab::interferometer::{
    arm_operator, fringe_from_samples, full_t_extraction, scan_fringe, Arm, ExtremaMode,
    FringeScan, SagnacConfig,
};
use nhlab::noise::{errorbar_pipeline, sample_counts, CountingModel, PipelineReport};
use nhlab::qmath::{expectation, gram_matrix, OperatorMatrix, StateVector, TMagnitudes};
use nhlab::uncertainty::{
    check_product_relation, check_qubit_relation, check_real_equality, equality_chain,
    RelationReport,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::report::{to_json, Failure, Outcome};
use crate::sweep::{compare_curves, run_sweep, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn arm_name(a: Arm) -> &'static str {
    match a {
        Arm::I => "I",
        Arm::A => "A",
        Arm::B => "B",
    }
}

fn matrix_record(m: &OperatorMatrix) -> Vec<[f64; 2]> {
    let d = m.dim();
    (0..d * d)
        .map(|i| {
            let z = m.get(i / d, i % d);
            [z.re, z.im]
        })
        .collect()
}

#[derive(Serialize)]
struct SweepJson<'a> {
    seed: u64,
    sweep: &'a SweepResult,
}

/// `sweep-real` / `sweep-complex`.
pub fn sweep(cfg: &ExperimentConfig, noise: bool, format: Format) -> nhlab::Result<Outcome> {
    let res = run_sweep(cfg, noise)?;
    let stem = format!("sweep_{}", cfg.mode);
    let mut out = Outcome::default();
    match format {
        Format::Csv => out.file(&format!("{stem}.csv"), res.to_csv()),
        Format::Json => out.file(
            &format!("{stem}.json"),
            to_json(&SweepJson {
                seed: cfg.seed,
                sweep: &res,
            }),
        ),
    }
    if cfg.train_a.is_none() && cfg.train_b.is_none() {
        let curves = compare_curves(cfg)?;
        out.file(&format!("curves_{}.csv", cfg.mode), curves.to_csv());
    }
    out.failures = res.failures();
    if cfg.mode == Mode::Complex && !noise {
        for r in &res.rows {
            if (r.t.t22 - 0.625).abs() > 1e-10 && cfg.angles == crate::config::Angles::defaults(Mode::Complex) {
                out.failures.push(Failure::new(
                    "complex_t22",
                    format!("theta0 = {}: |T22| = {}", sig12(r.theta0_deg), sig12(r.t.t22)),
                ));
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct FitSummary {
    n_max: f64,
    n_min: f64,
    visibility: f64,
    psi: f64,
}

impl From<&FringeScan> for FitSummary {
    fn from(s: &FringeScan) -> Self {
        Self {
            n_max: s.n_max,
            n_min: s.n_min,
            visibility: s.visibility(),
            psi: s.psi,
        }
    }
}

#[derive(Serialize)]
struct FringeSidecar {
    mode: Mode,
    arm_a: &'static str,
    arm_b: &'static str,
    theta0_deg: f64,
    ideal: FitSummary,
    model: Option<CountingModel>,
    counts: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<(f64, f64, Option<u64>)>>,
}

/// `fringe`: one interferogram for the configured arms and θ0.
pub fn fringe(cfg: &ExperimentConfig, noise: bool, format: Format) -> nhlab::Result<Outcome> {
    let (a, b) = cfg.operators()?;
    let id = OperatorMatrix::identity(2);
    let s = &cfg.scan;
    let input = StateVector::polarization(s.theta0);
    let op_a = arm_operator(s.arm_a, &a, &b, &id).clone();
    let op_b = arm_operator(s.arm_b, &a, &b, &id).clone();
    let scan = scan_fringe(&SagnacConfig::new(op_a.clone(), op_b.clone(), input.clone()))?;

    let model = noise.then(|| cfg.noise.model(cfg.seed));
    let counts = match &model {
        Some(m) => Some(sample_counts(&scan, m)?),
        None => None,
    };
    let counts_fit = match &counts {
        Some(c) => Some(fringe_from_samples(
            scan.phases.clone(),
            c.iter().map(|&n| n as f64).collect(),
            ExtremaMode::CosineFit,
        )?),
        None => None,
    };

    let mut out = Outcome::default();
    let stem = format!("fringe_{}{}", arm_name(s.arm_a), arm_name(s.arm_b));
    let samples: Vec<(f64, f64, Option<u64>)> = scan
        .phases
        .iter()
        .zip(&scan.intensities)
        .enumerate()
        .map(|(i, (&p, &v))| (p, v, counts.as_ref().map(|c| c[i])))
        .collect();
    let mut sidecar = FringeSidecar {
        mode: cfg.mode,
        arm_a: arm_name(s.arm_a),
        arm_b: arm_name(s.arm_b),
        theta0_deg: s.theta0,
        ideal: FitSummary::from(&scan),
        model,
        counts: counts_fit.as_ref().map(FitSummary::from),
        samples: None,
    };
    match format {
        Format::Csv => {
            let mut csv = String::from(if counts.is_some() {
                "phase_rad,intensity,counts\n"
            } else {
                "phase_rad,intensity\n"
            });
            for (p, v, n) in &samples {
                csv.push_str(&format!("{},{}", sig12(*p), sig12(*v)));
                if let Some(n) = n {
                    csv.push_str(&format!(",{n}"));
                }
                csv.push('\n');
            }
            out.file(&format!("{stem}.csv"), csv);
            out.file(&format!("{stem}.json"), to_json(&sidecar));
        }
        Format::Json => {
            sidecar.samples = Some(samples);
            out.file(&format!("{stem}.json"), to_json(&sidecar));
        }
    }

    let aa = expectation(&op_a.adjoint().mul(&op_a), &input)?.re;
    let bb = expectation(&op_b.adjoint().mul(&op_b), &input)?.re;
    let ab = expectation(&op_a.adjoint().mul(&op_b), &input)?.norm();
    if aa + bb > 1e-12 {
        let expected = 2.0 * ab / (aa + bb);
        if (scan.visibility() - expected).abs() > 1e-10 {
            out.failures.push(Failure::new(
                "visibility_identity",
                format!("fitted {} vs 2|<A'B>|/(<A'A>+<B'B>) = {}", scan.visibility(), expected),
            ));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct TMatrixReport {
    mode: Mode,
    theta0_deg: f64,
    operator_a: Vec<[f64; 2]>,
    operator_b: Vec<[f64; 2]>,
    /// Row-major `T_ij` as `[re, im]`.
    t: Vec<[f64; 2]>,
    magnitudes: TMagnitudes,
    extracted: TMagnitudes,
    hermitian_part_min_eigenvalue: f64,
    product_relation: RelationReport,
    qubit_relation: RelationReport,
    real_equality: Option<RelationReport>,
    chain: [f64; 3],
}

/// `tmatrix`: Gram matrix, fringe extraction and relation reports at one θ0.
pub fn tmatrix(cfg: &ExperimentConfig) -> nhlab::Result<Outcome> {
    let (a, b) = cfg.operators()?;
    let theta0 = cfg.scan.theta0;
    let input = StateVector::polarization(theta0);
    let t = gram_matrix(&a, &b, &input)?;
    let magnitudes = t.magnitudes();
    let extracted = full_t_extraction(&a, &b, &input)?;
    let real_equality = match cfg.mode {
        Mode::Real if a.is_real_within(1e-12) && b.is_real_within(1e-12) => Some(check_real_equality(&t)?),
        _ => None,
    };
    let report = TMatrixReport {
        mode: cfg.mode,
        theta0_deg: theta0,
        operator_a: matrix_record(&a),
        operator_b: matrix_record(&b),
        t: t.entries().transpose().iter().map(|z| [z.re, z.im]).collect(),
        magnitudes,
        extracted,
        hermitian_part_min_eigenvalue: t.hermitian_part_min_eigenvalue(),
        product_relation: check_product_relation(&a, &b, &input)?,
        qubit_relation: check_qubit_relation(&t)?,
        real_equality,
        chain: equality_chain(&t),
    };
    let mut out = Outcome::default();
    if report.hermitian_part_min_eigenvalue < -1e-10 {
        out.failures.push(Failure::new(
            "gram_psd",
            format!("min eigenvalue {:e}", report.hermitian_part_min_eigenvalue),
        ));
    }
    if !report.product_relation.satisfied {
        out.failures.push(Failure::new(
            "product_relation",
            format!("slack {:e}", report.product_relation.slack),
        ));
    }
    if report.qubit_relation.lhs > 1.0 + 1e-10 {
        out.failures.push(Failure::new(
            "qubit_relation",
            format!("lhs {}", report.qubit_relation.lhs),
        ));
    }
    for (k, label) in TMagnitudes::LABELS.iter().enumerate() {
        let gap = (magnitudes.as_array()[k] - extracted.as_array()[k]).abs();
        if gap > 1e-9 {
            out.failures.push(Failure::new("fringe_extraction", format!("{label}: gap {gap:e}")));
        }
    }
    out.file("tmatrix.json", to_json(&report));
    Ok(out)
}

#[derive(Serialize)]
struct EntangleReport<'a> {
    state: &'a str,
    verdict: &'static str,
    report: nhlab::entanglement::SeparabilityReport,
}

/// `entangle`: separability test for the configured channels and state.
pub fn entangle(cfg: &ExperimentConfig) -> nhlab::Result<Outcome> {
    let e = &cfg.entangle;
    let report = separability_test(&e.channel_a, &e.channel_b, &e.state)?;
    let mut out = Outcome::default();
    out.file(
        "entangle.json",
        to_json(&EntangleReport {
            state: &e.state_label,
            verdict: report.verdict(),
            report,
        }),
    );
    Ok(out)
}

/// Propagated and Monte-Carlo σ must agree within this fraction.
pub const CALIB_AGREEMENT: f64 = 0.15;
/// Tolerance on the σ ratio across a decade of rate, relative to √10.
pub const CALIB_SCALING: f64 = 0.10;

#[derive(Serialize)]
struct CalibReport {
    mode: Mode,
    theta0_deg: f64,
    base: PipelineReport,
    decade: PipelineReport,
    /// Monte-Carlo σ(rate) / σ(10·rate) per magnitude; √10 ≈ 3.162 expected.
    scaling: Vec<(String, f64)>,
}

/// `noise-calib`: error bars at the configured rate and ten times it.
pub fn noise_calib(cfg: &ExperimentConfig) -> nhlab::Result<Outcome> {
    let (a, b) = cfg.operators()?;
    let input = StateVector::polarization(cfg.scan.theta0);
    let model = cfg.noise.model(cfg.seed);
    let base = errorbar_pipeline(&a, &b, &input, &model, cfg.noise.trials)?;
    let decade_model = CountingModel {
        rate_scale: model.rate_scale * 10.0,
        ..model
    };
    let decade = errorbar_pipeline(&a, &b, &input, &decade_model, cfg.noise.trials)?;

    let mut out = Outcome::default();
    let mut scaling = Vec::new();
    for (e, d) in base.entries.iter().zip(&decade.entries) {
        let rel = e.propagation.sigma / e.monte_carlo.sigma - 1.0;
        if !(rel.abs() <= CALIB_AGREEMENT) {
            out.failures.push(Failure::new(
                "propagation_vs_monte_carlo",
                format!(
                    "{}: propagated {} vs Monte-Carlo {}",
                    e.label,
                    sig12(e.propagation.sigma),
                    sig12(e.monte_carlo.sigma)
                ),
            ));
        }
        let ratio = e.monte_carlo.sigma / d.monte_carlo.sigma;
        if !((ratio / 10f64.sqrt() - 1.0).abs() <= CALIB_SCALING) {
            out.failures.push(Failure::new(
                "rate_scaling",
                format!("{}: sigma ratio {} over a decade", e.label, sig12(ratio)),
            ));
        }
        scaling.push((e.label.to_string(), ratio));
    }
    out.file(
        "noise_calib.json",
        to_json(&CalibReport {
            mode: cfg.mode,
            theta0_deg: cfg.scan.theta0,
            base,
            decade,
            scaling,
        }),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScanSpec;

    #[test]
    fn identity_fringe_has_unit_visibility() {
        let mut cfg = ExperimentConfig::defaults(Mode::Real);
        cfg.scan = ScanSpec { theta0: 0.0, arm_a: Arm::I, arm_b: Arm::I };
        let out = fringe(&cfg, false, Format::Csv).unwrap();
        assert!(out.passed());
        assert_eq!(out.files[0].0, "fringe_II.csv");
        let side: serde_json::Value = serde_json::from_str(&out.files[1].1).unwrap();
        assert!((side["ideal"]["visibility"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_fringe_reports_counts() {
        let mut cfg = ExperimentConfig::defaults(Mode::Real);
        cfg.scan = ScanSpec { theta0: 0.0, arm_a: Arm::I, arm_b: Arm::I };
        cfg.noise.rate_scale = 1e6;
        cfg.noise.visibility_factor = 0.9828;
        let out = fringe(&cfg, true, Format::Csv).unwrap();
        assert!(out.files[0].1.starts_with("phase_rad,intensity,counts\n"));
        let side: serde_json::Value = serde_json::from_str(&out.files[1].1).unwrap();
        let v = side["counts"]["visibility"].as_f64().unwrap();
        assert!((v - 0.9828).abs() < 0.005, "{v}");
    }

    #[test]
    fn tmatrix_at_zero_passes() {
        let out = tmatrix(&ExperimentConfig::defaults(Mode::Real)).unwrap();
        assert!(out.passed(), "{:?}", out.failures);
        let rep: serde_json::Value = serde_json::from_str(&out.files[0].1).unwrap();
        assert!((rep["magnitudes"]["t22"].as_f64().unwrap() - 0.625).abs() < 1e-12);
        assert!((rep["real_equality"]["lhs"].as_f64().unwrap() - 0.546875).abs() < 1e-12);
    }

    #[test]
    fn entangle_default_is_entangled() {
        let out = entangle(&ExperimentConfig::defaults(Mode::Real)).unwrap();
        let rep: serde_json::Value = serde_json::from_str(&out.files[0].1).unwrap();
        assert_eq!(rep["verdict"], "entangled");
        assert!((rep["report"]["margin"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}
