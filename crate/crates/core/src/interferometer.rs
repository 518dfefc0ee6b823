//! Phase-scanned Sagnac loop with operator `A` on the reflected arm and `B`
//! on the transmitted arm.
//!
//! The photon enters port `e` of a 50:50 splitter, the reflected arm picks
//! up `i·e^{iθ}`, each arm applies its operator, and the second pass through
//! the splitter sends the light to ports `g` and `h`. The detector sits on
//! `h`. Intensities are obtained by propagating amplitudes, not from the
//! closed-form fringe.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sig12;
use crate::optics::{JonesElement, PathPolState};
use crate::qmath::{expectation, OperatorMatrix, StateVector, TMagnitudes};

const REFLECT: &str = "e";
const TRANSMIT: &str = "f";
/// Minimum samples per fringe period accepted by [`scan_fringe`].
pub const MIN_POINTS_PER_PERIOD: f64 = 8.0;
pub const DEFAULT_GRID_POINTS: usize = 256;

/// `n` uniform phases over `[0, 2π)`.
pub fn uniform_phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

pub fn default_phase_grid() -> Vec<f64> {
    uniform_phase_grid(DEFAULT_GRID_POINTS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SagnacConfig {
    pub arm_reflect: OperatorMatrix,
    pub arm_transmit: OperatorMatrix,
    pub input: StateVector,
    pub phase_grid: Vec<f64>,
}

impl SagnacConfig {
    pub fn new(a: OperatorMatrix, b: OperatorMatrix, input: StateVector) -> Self {
        Self {
            arm_reflect: a,
            arm_transmit: b,
            input,
            phase_grid: default_phase_grid(),
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.phase_grid = grid;
        self
    }

    fn validate(&self) -> Result<()> {
        for (name, m) in [("reflect", &self.arm_reflect), ("transmit", &self.arm_transmit)] {
            if m.dim() != 2 {
                return Err(Error::ShapeMismatch(format!(
                    "{name} arm must be 2x2, got {0}x{0}",
                    m.dim()
                )));
            }
        }
        if self.input.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: self.input.dim(),
            });
        }
        Ok(())
    }
}

/// Port amplitudes after the second splitter pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SagnacOutput {
    pub g: f64,
    pub h: f64,
    /// Norm removed by the arm operators.
    pub lost: f64,
}

/// Propagates the input through the loop at phase `theta` (radians).
pub fn propagate(config: &SagnacConfig, theta: f64) -> Result<SagnacOutput> {
    config.validate()?;
    let mut st = PathPolState::new(&[REFLECT, TRANSMIT])?;
    st.set(REFLECT, &config.input)?;
    st.apply(&JonesElement::bs(REFLECT, TRANSMIT))?;
    st.apply(&JonesElement::phase_shifter(theta.to_degrees(), REFLECT))?;
    let before = st.total_norm_sqr();
    st.apply_on(REFLECT, &config.arm_reflect)?;
    st.apply_on(TRANSMIT, &config.arm_transmit)?;
    let lost = before - st.total_norm_sqr();
    st.apply(&JonesElement::bs(REFLECT, TRANSMIT))?;
    Ok(SagnacOutput {
        g: st.norm_sqr_on(REFLECT)?,
        h: st.norm_sqr_on(TRANSMIT)?,
        lost,
    })
}

/// Detector (`h` port) intensity at phase `theta`.
pub fn detector_intensity(config: &SagnacConfig, theta: f64) -> Result<f64> {
    if !config.input.is_normalized() {
        return Err(Error::NotNormalized {
            norm_sqr: config.input.norm_sqr(),
        });
    }
    Ok(propagate(config, theta)?.h)
}

/// `(⟨A†A⟩ + ⟨B†B⟩ + 2|⟨A†B⟩| cos(ψ − θ)) / 4` with `ψ = arg⟨A†B⟩`.
pub fn closed_form_intensity(config: &SagnacConfig, theta: f64) -> Result<f64> {
    let a = &config.arm_reflect;
    let b = &config.arm_transmit;
    let s = &config.input;
    let aa = expectation(&a.adjoint().mul(a), s)?.re;
    let bb = expectation(&b.adjoint().mul(b), s)?.re;
    let ab = expectation(&a.adjoint().mul(b), s)?;
    Ok((aa + bb + 2.0 * ab.norm() * (ab.arg() - theta).cos()) / 4.0)
}

/// Least-squares fit of `offset + amplitude·cos(θ − ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CosineFit {
    pub offset: f64,
    pub amplitude: f64,
    pub psi: f64,
    /// Coefficients of `cos θ` and `sin θ`.
    pub cos_coef: f64,
    pub sin_coef: f64,
}

impl CosineFit {
    pub fn max(&self) -> f64 {
        self.offset + self.amplitude
    }

    pub fn min(&self) -> f64 {
        self.offset - self.amplitude
    }
}

pub fn fit_cosine(phases: &[f64], values: &[f64]) -> Result<CosineFit> {
    if phases.len() != values.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} phases vs {} values",
            phases.len(),
            values.len()
        )));
    }
    if phases.len() < 3 {
        return Err(Error::PhaseGrid("need at least 3 points to fit".into()));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&th, &y) in phases.iter().zip(values) {
        let row = Vector3::new(1.0, th.cos(), th.sin());
        ata += row * row.transpose();
        aty += row * y;
    }
    let sol = ata
        .lu()
        .solve(&aty)
        .ok_or_else(|| Error::PhaseGrid("phase grid does not determine a fringe".into()))?;
    let (offset, cc, ss) = (sol[0], sol[1], sol[2]);
    Ok(CosineFit {
        offset,
        amplitude: cc.hypot(ss),
        psi: ss.atan2(cc),
        cos_coef: cc,
        sin_coef: ss,
    })
}

/// How fringe extrema are read off a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremaMode {
    #[default]
    CosineFit,
    /// Largest and smallest sampled values.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringeScan {
    pub phases: Vec<f64>,
    pub intensities: Vec<f64>,
    pub n_max: f64,
    pub n_min: f64,
    /// Fringe phase ψ in (−π, π].
    pub psi: f64,
}

impl FringeScan {
    pub fn visibility(&self) -> f64 {
        let s = self.n_max + self.n_min;
        if s > 0.0 {
            (self.n_max - self.n_min) / s
        } else {
            0.0
        }
    }

    /// `phase_rad,intensity` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase_rad,intensity\n");
        for (p, i) in self.phases.iter().zip(&self.intensities) {
            out.push_str(&format!("{},{}\n", sig12(*p), sig12(*i)));
        }
        out
    }
}

/// Checks that a grid is strictly increasing, covers a full period and
/// samples it at least [`MIN_POINTS_PER_PERIOD`] times. A uniform grid of
/// `n` points covers `(last − first)·n/(n − 1)`.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::PhaseGrid("fewer than two phase points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::PhaseGrid("phases must be strictly increasing".into()));
    }
    let n = grid.len() as f64;
    let span = grid[grid.len() - 1] - grid[0];
    let coverage = span * n / (n - 1.0);
    if coverage < TAU - 1e-9 {
        return Err(Error::PhaseGrid(format!(
            "grid covers {coverage:.4} rad, less than 2π"
        )));
    }
    let per_period = n * TAU / coverage;
    if per_period < MIN_POINTS_PER_PERIOD {
        return Err(Error::PhaseGrid(format!(
            "{per_period:.2} points per period; at least {MIN_POINTS_PER_PERIOD} required"
        )));
    }
    Ok(())
}

pub fn scan_fringe(config: &SagnacConfig) -> Result<FringeScan> {
    scan_fringe_with(config, ExtremaMode::CosineFit)
}

pub fn scan_fringe_with(config: &SagnacConfig, mode: ExtremaMode) -> Result<FringeScan> {
    validate_grid(&config.phase_grid)?;
    let intensities = config
        .phase_grid
        .iter()
        .map(|&th| detector_intensity(config, th))
        .collect::<Result<Vec<_>>>()?;
    fringe_from_samples(config.phase_grid.clone(), intensities, mode)
}

/// Builds a [`FringeScan`] from arbitrary samples (ideal intensities or
/// counts).
pub fn fringe_from_samples(
    phases: Vec<f64>,
    values: Vec<f64>,
    mode: ExtremaMode,
) -> Result<FringeScan> {
    let fit = fit_cosine(&phases, &values)?;
    let (n_max, n_min, psi) = match mode {
        ExtremaMode::CosineFit => (fit.max(), fit.min(), fit.psi),
        ExtremaMode::Raw => {
            let (imax, vmax) = values
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
            let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
            let p = phases[imax].rem_euclid(TAU);
            (vmax, vmin, if p > PI { p - TAU } else { p })
        }
    };
    Ok(FringeScan {
        phases,
        intensities: values,
        n_max,
        n_min,
        psi: if psi <= -PI { psi + TAU } else { psi },
    })
}

/// `(n_max − n_min)(A†, B) / (n_max + n_min)(I, I)`.
pub fn t_from_fringes(scan_ab: &FringeScan, scan_ii: &FringeScan) -> Result<f64> {
    let den = scan_ii.n_max + scan_ii.n_min;
    if !(den.abs() > 0.0) {
        return Err(Error::ZeroDenominator("identity-arm normalization"));
    }
    Ok((scan_ab.n_max - scan_ab.n_min) / den)
}

/// Which operator sits on each arm for one scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Arm {
    I,
    A,
    B,
}

/// Arm pairs for `T22, T33, T23, T12, T13` in that order.
pub const T_PLAN: [(Arm, Arm); 5] = [
    (Arm::A, Arm::A),
    (Arm::B, Arm::B),
    (Arm::A, Arm::B),
    (Arm::A, Arm::I),
    (Arm::I, Arm::B),
];

pub fn arm_operator<'a>(
    arm: Arm,
    a: &'a OperatorMatrix,
    b: &'a OperatorMatrix,
    id: &'a OperatorMatrix,
) -> &'a OperatorMatrix {
    match arm {
        Arm::I => id,
        Arm::A => a,
        Arm::B => b,
    }
}

/// Runs the five arm configurations plus the `(I, I)` normalization scan
/// and returns the extracted magnitudes.
pub fn full_t_extraction(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    input: &StateVector,
) -> Result<TMagnitudes> {
    let id = OperatorMatrix::identity(2);
    let scan = |x: Arm, y: Arm| {
        let cfg = SagnacConfig::new(
            arm_operator(x, a, b, &id).clone(),
            arm_operator(y, a, b, &id).clone(),
            input.clone(),
        );
        scan_fringe(&cfg)
    };
    let norm = scan(Arm::I, Arm::I)?;
    let mut t = [0.0; 5];
    for (slot, &(x, y)) in t.iter_mut().zip(T_PLAN.iter()) {
        *slot = t_from_fringes(&scan(x, y)?, &norm)?;
    }
    Ok(TMagnitudes {
        t22: t[0],
        t33: t[1],
        t23: t[2],
        t12: t[3],
        t13: t[4],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{operator_complex, operator_complex_b, operator_real, operator_real_b};

    fn real_ab() -> (OperatorMatrix, OperatorMatrix) {
        (operator_real(22.5, 60.0), operator_real_b(22.5, 75.0))
    }

    fn identity_cfg(theta0: f64) -> SagnacConfig {
        let i = OperatorMatrix::identity(2);
        SagnacConfig::new(i.clone(), i, StateVector::polarization(theta0))
    }

    #[test]
    fn identity_arms_constructive_and_dark() {
        let cfg = identity_cfg(7.0);
        assert!((detector_intensity(&cfg, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(detector_intensity(&cfg, PI).unwrap().abs() < 1e-12);
    }

    #[test]
    fn real_config_peak_intensity() {
        let (a, b) = real_ab();
        let cfg = SagnacConfig::new(a, b, StateVector::polarization(0.0));
        let s3 = 3f64.sqrt();
        // ψ = 0 since ⟨A†B⟩ is real positive at θ0 = 0
        let expect = (5.0 / 8.0 + 7.0 / 8.0 + 2.0 * (4.0 + s3) / 8.0) / 4.0;
        assert!((expect - 0.733253175473).abs() < 1e-11);
        assert!((detector_intensity(&cfg, 0.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn propagation_matches_closed_form_and_conserves_energy() {
        let (a, b) = (
            operator_complex(22.5, 60.0, 0.0).unwrap(),
            operator_complex_b(0.0, 75.0, 0.0).unwrap(),
        );
        let cfg = SagnacConfig::new(a, b, StateVector::polarization(-13.0));
        for &th in &cfg.phase_grid {
            let out = propagate(&cfg, th).unwrap();
            assert!((out.h - closed_form_intensity(&cfg, th).unwrap()).abs() < 1e-12);
            assert!((out.g + out.h + out.lost - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_scan() {
        let s = scan_fringe(&identity_cfg(20.0)).unwrap();
        assert!((s.n_max - 1.0).abs() < 1e-12);
        assert!(s.n_min.abs() < 1e-12);
        assert!((s.visibility() - 1.0).abs() < 1e-12);
        assert!((t_from_fringes(&s, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn real_config_fringe_amplitude() {
        let (a, b) = real_ab();
        let phi = StateVector::polarization(0.0);
        let s = scan_fringe(&SagnacConfig::new(a.clone(), b, phi.clone())).unwrap();
        assert!((s.n_max - s.n_min - (4.0 + 3f64.sqrt()) / 8.0).abs() < 1e-12);
        // Eqs. S11 + S12: n_max + n_min = (⟨A†A⟩ + ⟨B†B⟩)/2
        assert!((s.n_max + s.n_min - (5.0 / 8.0 + 7.0 / 8.0) / 2.0).abs() < 1e-10);

        let ii = scan_fringe(&identity_cfg(0.0)).unwrap();
        let aa = scan_fringe(&SagnacConfig::new(a.clone(), a, phi)).unwrap();
        assert!((t_from_fringes(&aa, &ii).unwrap() - 0.625).abs() < 1e-12);
    }

    #[test]
    fn fig2_identity_versus_b_arm() {
        let b = operator_real_b(0.0, 75.0);
        let i = OperatorMatrix::identity(2);
        // θ0 = −45° prepares −|V>, on which B acts as a lossless sign flip:
        // full visibility, fringe shifted by π
        let s = scan_fringe(&SagnacConfig::new(i.clone(), b.clone(), StateVector::polarization(-45.0)))
            .unwrap();
        assert!((s.visibility() - 1.0).abs() < 1e-12);
        assert!((s.psi.abs() - PI).abs() < 1e-9);
        // θ0 = 0: B keeps only √3/2 of |H>, so the fringe loses contrast and
        // gains a floor (1 + 3/4 − √3)/4
        let s = scan_fringe(&SagnacConfig::new(i, b, StateVector::polarization(0.0))).unwrap();
        assert!(s.visibility() < 1.0);
        assert!((s.n_min - (1.75 - 3f64.sqrt()) / 4.0).abs() < 1e-12);
        assert!(s.intensities.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn raw_mode_agrees_when_grid_hits_extremum() {
        let (a, b) = real_ab();
        let cfg = SagnacConfig::new(a, b, StateVector::polarization(0.0));
        let fit = scan_fringe(&cfg).unwrap();
        let raw = scan_fringe_with(&cfg, ExtremaMode::Raw).unwrap();
        assert!((fit.n_max - raw.n_max).abs() < 1e-12);
        assert!((fit.n_min - raw.n_min).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        let cfg = identity_cfg(0.0);
        let coarse = cfg.clone().with_grid(uniform_phase_grid(7));
        assert!(matches!(scan_fringe(&coarse), Err(Error::PhaseGrid(_))));
        let short = cfg.clone().with_grid((0..64).map(|k| k as f64 * 0.05).collect());
        assert!(matches!(scan_fringe(&short), Err(Error::PhaseGrid(_))));
        let unordered = cfg.with_grid(vec![0.0, 2.0, 1.0, 7.0]);
        assert!(matches!(scan_fringe(&unordered), Err(Error::PhaseGrid(_))));
        assert!(validate_grid(&uniform_phase_grid(8)).is_ok());
    }

    #[test]
    fn zero_normalization_rejected() {
        let z = FringeScan {
            phases: vec![],
            intensities: vec![],
            n_max: 0.0,
            n_min: 0.0,
            psi: 0.0,
        };
        assert_eq!(
            t_from_fringes(&z, &z),
            Err(Error::ZeroDenominator("identity-arm normalization"))
        );
    }

    #[test]
    fn csv_header_and_rows() {
        let s = scan_fringe(&identity_cfg(0.0).with_grid(uniform_phase_grid(8))).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("phase_rad,intensity"));
        assert_eq!(lines.next(), Some("0,1"));
        assert_eq!(csv.lines().count(), 9);
    }
}
