//! Shot noise on fringe counts and propagation of the resulting errors to
//! the extracted `|T_ij|`.
//!
//! Counts at each phase setting are independent Poisson variables. Extrema
//! come from the linear least-squares cosine fit, so the count variances
//! (plug-in: variance = observed count) propagate to the fit coefficients
//! exactly through the fit's linear weights.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sig12;
use crate::interferometer::{arm_operator, scan_fringe, Arm, CosineFit, FringeScan, SagnacConfig, T_PLAN};
use crate::qmath::{gram_matrix, OperatorMatrix, StateVector, TMagnitudes};
use crate::random::{child_rng, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountingModel {
    /// Mean counts per unit intensity at one phase setting.
    pub rate_scale: f64,
    /// Fringe contrast factor in (0, 1].
    pub visibility_factor: f64,
    pub seed: u64,
}

impl CountingModel {
    pub fn new(rate_scale: f64, visibility_factor: f64, seed: u64) -> Result<Self> {
        let m = Self {
            rate_scale,
            visibility_factor,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_scale > 0.0 && self.rate_scale.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "rate_scale must be positive, got {}",
                self.rate_scale
            )));
        }
        if !(self.visibility_factor > 0.0 && self.visibility_factor <= 1.0) {
            return Err(Error::InvalidModel(format!(
                "visibility_factor must lie in (0, 1], got {}",
                self.visibility_factor
            )));
        }
        Ok(())
    }

    /// Mean count at each phase: the ideal fringe with its modulation
    /// scaled by `visibility_factor` about the DC level, times `rate_scale`.
    pub fn mean_counts(&self, scan: &FringeScan) -> Vec<f64> {
        let dc = (scan.n_max + scan.n_min) / 2.0;
        scan.intensities
            .iter()
            .map(|&i| (self.rate_scale * (dc + self.visibility_factor * (i - dc))).max(0.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMethod {
    Propagation,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub value: f64,
    pub sigma: f64,
    pub method: ErrorMethod,
}

/// A measured quantity with its variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub mean: f64,
    pub variance: f64,
}

fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let d = Poisson::new(lambda).expect("finite positive rate");
    d.sample(rng) as u64
}

/// Poisson counts for every phase of `scan`, seeded by `model.seed`.
pub fn sample_counts(scan: &FringeScan, model: &CountingModel) -> Result<Vec<u64>> {
    model.validate()?;
    let mut rng = seeded_rng(model.seed);
    Ok(sample_counts_with(scan, model, &mut rng))
}

pub fn sample_counts_with<R: Rng + ?Sized>(
    scan: &FringeScan,
    model: &CountingModel,
    rng: &mut R,
) -> Vec<u64> {
    model
        .mean_counts(scan)
        .into_iter()
        .map(|l| poisson_draw(l, rng))
        .collect()
}

/// `phase_rad,counts` rows.
pub fn counts_csv(phases: &[f64], counts: &[u64]) -> String {
    let mut out = String::from("phase_rad,counts\n");
    for (p, n) in phases.iter().zip(counts) {
        out.push_str(&format!("{},{n}\n", sig12(*p)));
    }
    out
}

/// `σ²(y) = Σ (∂f/∂xᵢ)² σ²(xᵢ) + 2 Σ_{i<j} (∂f/∂xᵢ)(∂f/∂xⱼ) Cov(xᵢ, xⱼ)`.
///
/// `covariances` must be symmetric with its diagonal equal to `sigmas2`.
pub fn propagate_variance(
    partials: &[f64],
    sigmas2: &[f64],
    covariances: &DMatrix<f64>,
) -> Result<f64> {
    let n = partials.len();
    if sigmas2.len() != n || covariances.nrows() != n || covariances.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "{n} partials, {} variances, {}x{} covariance",
            sigmas2.len(),
            covariances.nrows(),
            covariances.ncols()
        )));
    }
    for i in 0..n {
        let scale = sigmas2[i].abs().max(1.0);
        if (covariances[(i, i)] - sigmas2[i]).abs() > 1e-12 * scale {
            return Err(Error::ShapeMismatch(format!(
                "covariance diagonal {i} = {} differs from variance {}",
                covariances[(i, i)],
                sigmas2[i]
            )));
        }
        for j in 0..i {
            let (a, b) = (covariances[(i, j)], covariances[(j, i)]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::ShapeMismatch(format!(
                    "covariance not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut total: f64 = partials.iter().zip(sigmas2).map(|(p, s)| p * p * s).sum();
    for i in 0..n {
        for j in i + 1..n {
            total += 2.0 * partials[i] * partials[j] * covariances[(i, j)];
        }
    }
    Ok(total)
}

/// Error of `y = x1/x2` for independent `x1`, `x2`.
pub fn ratio_error(x1: Measured, x2: Measured) -> Result<ErrorBudget> {
    if x2.mean == 0.0 {
        return Err(Error::ZeroDenominator("ratio x1/x2"));
    }
    let partials = [1.0 / x2.mean, -x1.mean / (x2.mean * x2.mean)];
    let sig2 = [x1.variance, x2.variance];
    let cov = DMatrix::from_row_slice(2, 2, &[sig2[0], 0.0, 0.0, sig2[1]]);
    let var = propagate_variance(&partials, &sig2, &cov)?;
    Ok(ErrorBudget {
        value: x1.mean / x2.mean,
        sigma: var.max(0.0).sqrt(),
        method: ErrorMethod::Propagation,
    })
}

/// Difference of two independent Poisson counts: variance is their sum.
pub fn poisson_difference(n_max: u64, n_min: u64) -> Measured {
    Measured {
        mean: n_max as f64 - n_min as f64,
        variance: (n_max + n_min) as f64,
    }
}

/// Cosine fit of a count record with the covariance of
/// `(offset, cos_coef, sin_coef)` under Poisson plug-in variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountFit {
    pub fit: CosineFit,
    pub covariance: Matrix3<f64>,
}

impl CountFit {
    /// `n_max − n_min = 2·amplitude`, linearized along the fitted phase.
    pub fn modulation(&self) -> Measured {
        let g = Vector3::new(0.0, 2.0 * self.fit.psi.cos(), 2.0 * self.fit.psi.sin());
        Measured {
            mean: 2.0 * self.fit.amplitude,
            variance: (g.transpose() * self.covariance * g)[(0, 0)],
        }
    }

    /// `n_max + n_min = 2·offset`.
    pub fn total(&self) -> Measured {
        Measured {
            mean: 2.0 * self.fit.offset,
            variance: 4.0 * self.covariance[(0, 0)],
        }
    }
}

pub fn fit_counts(phases: &[f64], counts: &[u64]) -> Result<CountFit> {
    if phases.len() != counts.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} phases vs {} counts",
            phases.len(),
            counts.len()
        )));
    }
    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    let mut meat = Matrix3::<f64>::zeros();
    for (&th, &n) in phases.iter().zip(counts) {
        let row = Vector3::new(1.0, th.cos(), th.sin());
        let outer = row * row.transpose();
        xtx += outer;
        xty += row * n as f64;
        meat += outer * n as f64;
    }
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::PhaseGrid("phase grid does not determine a fringe".into()))?;
    let beta = inv * xty;
    let (offset, cc, ss) = (beta[0], beta[1], beta[2]);
    Ok(CountFit {
        fit: CosineFit {
            offset,
            amplitude: cc.hypot(ss),
            psi: ss.atan2(cc),
            cos_coef: cc,
            sin_coef: ss,
        },
        covariance: inv * meat * inv,
    })
}

/// Propagated and Monte-Carlo errors for one extracted magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TErrorReport {
    pub label: &'static str,
    pub noiseless: f64,
    pub propagation: ErrorBudget,
    pub monte_carlo: ErrorBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub model: CountingModel,
    pub trials: usize,
    /// In the order T12, T13, T22, T33, T23.
    pub entries: Vec<TErrorReport>,
}

impl PipelineReport {
    pub fn get(&self, label: &str) -> Option<&TErrorReport> {
        self.entries.iter().find(|e| e.label == label)
    }
}

/// Ideal fringes for the normalization scan followed by [`T_PLAN`].
fn ideal_scans(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    input: &StateVector,
) -> Result<Vec<FringeScan>> {
    let id = OperatorMatrix::identity(2);
    std::iter::once((Arm::I, Arm::I))
        .chain(T_PLAN.iter().copied())
        .map(|(x, y)| {
            scan_fringe(&SagnacConfig::new(
                arm_operator(x, a, b, &id).clone(),
                arm_operator(y, a, b, &id).clone(),
                input.clone(),
            ))
        })
        .collect()
}

/// One simulated acquisition: every magnitude with its propagated error,
/// in [`T_PLAN`] order.
fn simulate_trial<R: Rng + ?Sized>(
    scans: &[FringeScan],
    model: &CountingModel,
    rng: &mut R,
) -> Result<Vec<ErrorBudget>> {
    let phases = &scans[0].phases;
    let norm = fit_counts(phases, &sample_counts_with(&scans[0], model, rng))?.total();
    scans[1..]
        .iter()
        .map(|s| {
            let fit = fit_counts(phases, &sample_counts_with(s, model, rng))?;
            ratio_error(fit.modulation(), norm)
        })
        .collect()
}

/// Simulates `trials` independent acquisitions of all five magnitudes and
/// compares the propagated error bar of the first acquisition with the
/// spread across acquisitions. Trial `k` draws from `child_rng(seed, k)`.
pub fn errorbar_pipeline(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    input: &StateVector,
    model: &CountingModel,
    trials: usize,
) -> Result<PipelineReport> {
    model.validate()?;
    if trials < 100 {
        return Err(Error::InvalidArgument(format!(
            "at least 100 trials required, got {trials}"
        )));
    }
    let scans = ideal_scans(a, b, input)?;
    let runs = (0..trials)
        .into_par_iter()
        .map(|k| simulate_trial(&scans, model, &mut child_rng(model.seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;

    let exact = gram_matrix(a, b, input)?.magnitudes();
    let exact_by_plan = [exact.t22, exact.t33, exact.t23, exact.t12, exact.t13];
    let labels_by_plan = ["T22", "T33", "T23", "T12", "T13"];
    let mut entries = Vec::with_capacity(5);
    for label in TMagnitudes::LABELS {
        let k = labels_by_plan.iter().position(|l| *l == label).expect("label in plan");
        let values: Vec<f64> = runs.iter().map(|r| r[k].value).collect();
        let (mean, sd) = mean_sd(&values);
        entries.push(TErrorReport {
            label,
            noiseless: exact_by_plan[k],
            propagation: runs[0][k],
            monte_carlo: ErrorBudget {
                value: mean,
                sigma: sd,
                method: ErrorMethod::MonteCarlo,
            },
        });
    }
    Ok(PipelineReport {
        model: *model,
        trials,
        entries,
    })
}

/// Extracts all five magnitudes from one seeded acquisition.
pub fn noisy_t_extraction(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    input: &StateVector,
    model: &CountingModel,
) -> Result<[ErrorBudget; 5]> {
    model.validate()?;
    let scans = ideal_scans(a, b, input)?;
    let run = simulate_trial(&scans, model, &mut seeded_rng(model.seed))?;
    // plan order T22, T33, T23, T12, T13 -> label order T12, T13, T22, T33, T23
    Ok([run[3], run[4], run[0], run[1], run[2]])
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}
