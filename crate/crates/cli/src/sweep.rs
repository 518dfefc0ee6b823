//! θ0 sweeps for the real and complex configurations.

use nalgebra::DMatrix;
use nhlab::curves::{complex_curves, real_curves};
use nhlab::format::sig12;
use nhlab::noise::{noisy_t_extraction, propagate_variance, CountingModel};
use nhlab::qmath::{gram_matrix, OperatorMatrix, StateVector, TMagnitudes};
use nhlab::random::child_rng;
use nhlab::uncertainty::{
    check_qubit_relation, check_real_equality, qubit_relation_lhs, real_equality_terms,
};
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::report::Failure;

/// Tolerance on the noiseless relation checks.
pub const RELATION_TOL: f64 = 1e-10;
/// Noisy rows must satisfy the relation within this many σ.
pub const NOISY_SIGMAS: f64 = 3.0;
/// Fraction of noisy rows that must lie within [`NOISY_SIGMAS`].
pub const NOISY_COVERAGE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowSigma {
    pub t: [f64; 5],
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta0_deg: f64,
    pub t: TMagnitudes,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub sigma: Option<RowSigma>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub mode: Mode,
    pub noise: Option<CountingModel>,
    pub rows: Vec<SweepRow>,
}

pub const HEADER: &str = "theta0_deg,T12,T13,T22,T33,T23,lhs,rhs,slack";
pub const SIGMA_HEADER: &str =
    "sigma_T12,sigma_T13,sigma_T22,sigma_T33,sigma_T23,sigma_lhs,sigma_rhs,sigma_slack";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(HEADER);
        if self.noise.is_some() {
            out.push(',');
            out.push_str(SIGMA_HEADER);
        }
        out.push('\n');
        for r in &self.rows {
            let mut cells: Vec<f64> = vec![r.theta0_deg];
            cells.extend(r.t.as_array());
            cells.extend([r.lhs, r.rhs, r.slack]);
            if let Some(s) = &r.sigma {
                cells.extend(s.t);
                cells.extend([s.lhs, s.rhs, s.slack]);
            }
            let line: Vec<String> = cells.into_iter().map(sig12).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn max_abs_slack(&self) -> f64 {
        self.rows.iter().map(|r| r.slack.abs()).fold(0.0, f64::max)
    }

    pub fn max_lhs(&self) -> f64 {
        self.rows.iter().map(|r| r.lhs).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Relation checks for this sweep.
    pub fn failures(&self) -> Vec<Failure> {
        let mut out = Vec::new();
        match (self.mode, self.noise.is_some()) {
            (Mode::Real, false) => {
                for r in &self.rows {
                    if r.slack.abs() > RELATION_TOL {
                        out.push(Failure::new(
                            "real_equality",
                            format!("theta0 = {}: |lhs - rhs| = {:e}", sig12(r.theta0_deg), r.slack.abs()),
                        ));
                    }
                }
            }
            (Mode::Complex, false) => {
                for r in &self.rows {
                    if r.lhs > 1.0 + RELATION_TOL {
                        out.push(Failure::new(
                            "complex_bound",
                            format!("theta0 = {}: lhs = {}", sig12(r.theta0_deg), sig12(r.lhs)),
                        ));
                    }
                }
            }
            (mode, true) => {
                let inside = self
                    .rows
                    .iter()
                    .filter(|r| {
                        let s = r.sigma.map_or(0.0, |s| s.slack);
                        match mode {
                            Mode::Real => r.slack.abs() <= NOISY_SIGMAS * s,
                            Mode::Complex => r.slack >= -NOISY_SIGMAS * s,
                        }
                    })
                    .count();
                let frac = inside as f64 / self.rows.len().max(1) as f64;
                if frac < NOISY_COVERAGE {
                    out.push(Failure::new(
                        "noisy_coverage",
                        format!(
                            "{inside} of {} rows within {NOISY_SIGMAS} sigma ({:.3} < {NOISY_COVERAGE})",
                            self.rows.len(),
                            frac
                        ),
                    ));
                }
            }
        }
        out
    }
}

/// `lhs`, `rhs` of the mode's relation from magnitudes.
fn relation_terms(mode: Mode, t: &TMagnitudes) -> nhlab::Result<(f64, f64)> {
    match mode {
        Mode::Real => Ok(real_equality_terms(t)),
        Mode::Complex => Ok((qubit_relation_lhs(t)?, 1.0)),
    }
}

/// Linear error propagation from independent `|T_ij|` errors to the
/// relation terms, with central-difference partials.
fn relation_sigmas(mode: Mode, t: &TMagnitudes, sigma_t: [f64; 5]) -> nhlab::Result<RowSigma> {
    let base = t.as_array();
    let mut grads = [[0.0; 5]; 3];
    for k in 0..5 {
        let h = 1e-6 * base[k].abs().max(1e-3);
        let mut up = base;
        let mut dn = base;
        up[k] += h;
        dn[k] -= h;
        let (lu, ru) = relation_terms(mode, &from_array(up))?;
        let (ld, rd) = relation_terms(mode, &from_array(dn))?;
        grads[0][k] = (lu - ld) / (2.0 * h);
        grads[1][k] = (ru - rd) / (2.0 * h);
        grads[2][k] = grads[1][k] - grads[0][k];
    }
    let s2: Vec<f64> = sigma_t.iter().map(|s| s * s).collect();
    let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s2.clone()));
    let mut out = [0.0; 3];
    for (o, g) in out.iter_mut().zip(&grads) {
        *o = propagate_variance(g, &s2, &cov)?.max(0.0).sqrt();
    }
    Ok(RowSigma {
        t: sigma_t,
        lhs: out[0],
        rhs: out[1],
        slack: out[2],
    })
}

fn from_array(a: [f64; 5]) -> TMagnitudes {
    TMagnitudes {
        t12: a[0],
        t13: a[1],
        t22: a[2],
        t33: a[3],
        t23: a[4],
    }
}

/// Seed for the noisy acquisition of row `index`.
pub fn row_seed(seed: u64, index: usize) -> u64 {
    child_rng(seed, index as u64).next_u64()
}

fn noiseless_row(mode: Mode, a: &OperatorMatrix, b: &OperatorMatrix, theta0: f64) -> nhlab::Result<SweepRow> {
    let t = gram_matrix(a, b, &StateVector::polarization(theta0))?;
    let rep = match mode {
        Mode::Real => check_real_equality(&t)?,
        Mode::Complex => check_qubit_relation(&t)?,
    };
    Ok(SweepRow {
        theta0_deg: theta0,
        t: t.magnitudes(),
        lhs: rep.lhs,
        rhs: rep.rhs,
        slack: rep.slack,
        sigma: None,
    })
}

fn noisy_row(
    mode: Mode,
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    theta0: f64,
    model: &CountingModel,
) -> nhlab::Result<SweepRow> {
    let m = noisy_t_extraction(a, b, &StateVector::polarization(theta0), model)?;
    let t = from_array(m.map(|e| e.value));
    let (lhs, rhs) = relation_terms(mode, &t)?;
    Ok(SweepRow {
        theta0_deg: theta0,
        t,
        lhs,
        rhs,
        slack: rhs - lhs,
        sigma: Some(relation_sigmas(mode, &t, m.map(|e| e.sigma))?),
    })
}

/// Rows are computed in parallel and collected in grid order.
pub fn run_sweep(cfg: &ExperimentConfig, noise: bool) -> nhlab::Result<SweepResult> {
    let (a, b) = cfg.operators()?;
    let grid = cfg.sweep.points();
    let model = noise.then(|| cfg.noise.model(cfg.seed));
    if let Some(m) = &model {
        m.validate()?;
    }
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, &th)| match &model {
            None => noiseless_row(cfg.mode, &a, &b, th),
            Some(m) => {
                let row_model = CountingModel {
                    seed: row_seed(m.seed, i),
                    ..*m
                };
                noisy_row(cfg.mode, &a, &b, th, &row_model)
            }
        })
        .collect::<nhlab::Result<Vec<_>>>()?;
    Ok(SweepResult {
        mode: cfg.mode,
        noise: model,
        rows,
    })
}

pub fn run_real_sweep(cfg: &ExperimentConfig, noise: bool) -> nhlab::Result<SweepResult> {
    assert_eq!(cfg.mode, Mode::Real, "run_real_sweep needs a real-mode config");
    run_sweep(cfg, noise)
}

pub fn run_complex_sweep(cfg: &ExperimentConfig, noise: bool) -> nhlab::Result<SweepResult> {
    assert_eq!(cfg.mode, Mode::Complex, "run_complex_sweep needs a complex-mode config");
    run_sweep(cfg, noise)
}

/// Closed-form reference curves next to direct evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveComparison {
    pub mode: Mode,
    pub rows: Vec<(f64, TMagnitudes, TMagnitudes)>,
    /// Largest `|closed − direct|` per magnitude, in label order.
    pub max_gap: [f64; 5],
}

impl CurveComparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta0_deg");
        for kind in ["closed", "direct"] {
            for l in TMagnitudes::LABELS {
                out.push_str(&format!(",{l}_{kind}"));
            }
        }
        out.push('\n');
        for (th, closed, direct) in &self.rows {
            let mut cells = vec![sig12(*th)];
            cells.extend(closed.as_array().into_iter().map(sig12));
            cells.extend(direct.as_array().into_iter().map(sig12));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Only meaningful for the default angle sets, which the closed forms assume.
pub fn compare_curves(cfg: &ExperimentConfig) -> nhlab::Result<CurveComparison> {
    let (a, b) = cfg.operators()?;
    let curve = match cfg.mode {
        Mode::Real => real_curves,
        Mode::Complex => complex_curves,
    };
    let rows = cfg
        .sweep
        .points()
        .into_iter()
        .map(|th| {
            let direct = gram_matrix(&a, &b, &StateVector::polarization(th))?.magnitudes();
            Ok((th, curve(th), direct))
        })
        .collect::<nhlab::Result<Vec<_>>>()?;
    let mut max_gap = [0.0f64; 5];
    for (_, c, d) in &rows {
        for (k, g) in max_gap.iter_mut().enumerate() {
            *g = g.max((c.as_array()[k] - d.as_array()[k]).abs());
        }
    }
    Ok(CurveComparison {
        mode: cfg.mode,
        rows,
        max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_row_at_zero() {
        let cfg = ExperimentConfig::defaults(Mode::Real);
        let res = run_real_sweep(&cfg, false).unwrap();
        assert_eq!(res.rows.len(), 91);
        let r = res.rows.iter().find(|r| r.theta0_deg == 0.0).unwrap();
        assert!((r.lhs - 0.546875).abs() < 1e-12 && (r.rhs - 0.546875).abs() < 1e-12);
    }

    #[test]
    fn complex_sweep_constants() {
        let cfg = ExperimentConfig::defaults(Mode::Complex);
        let res = run_complex_sweep(&cfg, false).unwrap();
        assert!(res.failures().is_empty());
        assert!(res.rows.iter().all(|r| (r.t.t22 - 0.625).abs() < 1e-12));
        let r0 = res.rows.iter().find(|r| r.theta0_deg == 0.0).unwrap();
        assert!((r0.t.t13 - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let mut cfg = ExperimentConfig::defaults(Mode::Real);
        cfg.sweep = crate::config::SweepSpec { start: 0.0, stop: 1.0, step: 1.0 };
        let csv = run_real_sweep(&cfg, false).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0.353553390593,"));
        assert!(lines[1].ends_with(",0.546875,0.546875,0"));

        let noisy = run_real_sweep(&cfg, true).unwrap().to_csv();
        assert_eq!(noisy.lines().next().unwrap(), format!("{HEADER},{SIGMA_HEADER}"));
        assert_eq!(noisy.lines().nth(1).unwrap().split(',').count(), 17);
    }

    #[test]
    fn noisy_sweep_is_deterministic_and_seed_sensitive() {
        let mut cfg = ExperimentConfig::defaults(Mode::Complex);
        cfg.sweep = crate::config::SweepSpec { start: -10.0, stop: 10.0, step: 5.0 };
        let a = run_complex_sweep(&cfg, true).unwrap().to_csv();
        assert_eq!(a, run_complex_sweep(&cfg, true).unwrap().to_csv());
        cfg.seed = 1;
        assert_ne!(a, run_complex_sweep(&cfg, true).unwrap().to_csv());
    }

    #[test]
    fn slack_sigma_matches_spread() {
        // oracle: spread of the noisy slack across seeds at one θ0
        let mut cfg = ExperimentConfig::defaults(Mode::Real);
        cfg.sweep = crate::config::SweepSpec { start: 20.0, stop: 20.0, step: 1.0 };
        let mut slacks = Vec::new();
        let mut predicted = Vec::new();
        for seed in 0..300 {
            cfg.seed = seed;
            let r = run_real_sweep(&cfg, true).unwrap().rows[0];
            slacks.push(r.slack);
            predicted.push(r.sigma.unwrap().slack);
        }
        let (_, sd) = nhlab::noise::mean_sd(&slacks);
        let (mean_pred, _) = nhlab::noise::mean_sd(&predicted);
        assert!((sd / mean_pred - 1.0).abs() < 0.3, "sd {sd} vs predicted {mean_pred}");
    }

    #[test]
    fn closed_curves_agree_at_zero() {
        for mode in [Mode::Real, Mode::Complex] {
            let mut cfg = ExperimentConfig::defaults(mode);
            cfg.sweep = crate::config::SweepSpec { start: 0.0, stop: 0.0, step: 1.0 };
            let cmp = compare_curves(&cfg).unwrap();
            for (k, g) in cmp.max_gap.iter().enumerate() {
                assert!(*g < 1e-12, "{mode} {}: {g}", TMagnitudes::LABELS[k]);
            }
        }
    }
}
