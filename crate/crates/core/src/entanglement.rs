//! Kraus channels, channel fidelity, and the separability test built from
//! collective Kraus-operator variances.
//!
//! For a separable `ρ_AB` and channels `{E_k^A}`, `{E_k^B}`,
//! `Σ_k Δ(E_k^A ⊗ I + I ⊗ E_k^B)² ≥ 2 − F_max(ℰ^A) − F_max(ℰ^B)`; a state
//! that violates it is entangled. The left side depends on the Kraus
//! representation, so reports always carry the operators used.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmath::{c, cr, trace_product, OperatorMatrix, StateVector, C64};
use crate::random::{haar_state, seeded_rng};

pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Margin below which a violation is not reported.
pub const VIOLATION_TOL: f64 = 1e-9;
/// Largest single-system dimension accepted by [`f_max`].
pub const F_MAX_DIM_LIMIT: usize = 4;

/// A complete set of Kraus operators, `Σ E_k† E_k = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<OperatorMatrix>,
}

impl KrausChannel {
    pub fn new(kraus: Vec<OperatorMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or(Error::Empty)?;
        let d = first.dim();
        if let Some(bad) = kraus.iter().find(|k| k.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let sum = kraus
            .iter()
            .fold(OperatorMatrix::zeros(d), |acc, k| acc.add(&k.adjoint().mul(k)));
        let deviation = sum.max_abs_diff(&OperatorMatrix::identity(d));
        if deviation > COMPLETENESS_TOL {
            return Err(Error::IncompleteChannel { deviation });
        }
        Ok(Self { kraus })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            kraus: vec![OperatorMatrix::identity(dim)],
        }
    }

    /// `{X/√2, Y/√2}`.
    pub fn pauli_xy() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let z = cr(0.0);
        Self {
            kraus: vec![
                OperatorMatrix::qubit(z, cr(r), cr(r), z),
                OperatorMatrix::qubit(z, c(0.0, -r), c(0.0, r), z),
            ],
        }
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "damping probability {gamma} outside [0, 1]"
            )));
        }
        let z = cr(0.0);
        Self::new(vec![
            OperatorMatrix::qubit(cr(1.0), z, z, cr((1.0 - gamma).sqrt())),
            OperatorMatrix::qubit(z, cr(gamma.sqrt()), z, z),
        ])
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].dim()
    }

    pub fn kraus(&self) -> &[OperatorMatrix] {
        &self.kraus
    }

    /// Another Kraus representation of the same map:
    /// `E'_j = Σ_k U_jk E_k` for a unitary `U` of size `len()`.
    pub fn remix(&self, u: &OperatorMatrix) -> Result<Self> {
        let n = self.kraus.len();
        if u.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.dim(),
            });
        }
        let d = self.dim();
        let kraus = (0..n)
            .map(|j| {
                (0..n).fold(OperatorMatrix::zeros(d), |acc, k| {
                    acc.add(&self.kraus[k].scale(u.get(j, k)))
                })
            })
            .collect();
        Self::new(kraus)
    }

    /// Zero-pads the Kraus list to `len` operators.
    fn padded(&self, len: usize) -> Vec<OperatorMatrix> {
        let mut k = self.kraus.clone();
        k.resize(len.max(k.len()), OperatorMatrix::zeros(self.dim()));
        k
    }
}

/// A density matrix on one system or on `A ⊗ B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
    parts: Option<(usize, usize)>,
    declared_separable: bool,
}

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        Self::validate(&m)?;
        Ok(Self {
            m,
            parts: None,
            declared_separable: false,
        })
    }

    pub fn bipartite(m: DMatrix<C64>, d_a: usize, d_b: usize) -> Result<Self> {
        if m.nrows() != d_a * d_b {
            return Err(Error::DimensionMismatch {
                expected: d_a * d_b,
                found: m.nrows(),
            });
        }
        let mut rho = Self::new(m)?;
        rho.parts = Some((d_a, d_b));
        Ok(rho)
    }

    pub fn pure(state: &StateVector) -> Result<Self> {
        let v = state.amplitudes();
        Self::new(v * v.adjoint())
    }

    pub fn pure_bipartite(state: &StateVector, d_a: usize, d_b: usize) -> Result<Self> {
        let v = state.amplitudes();
        Self::bipartite(v * v.adjoint(), d_a, d_b)
    }

    /// `|a><a| ⊗ |b><b|`, flagged as separable.
    pub fn product(a: &StateVector, b: &StateVector) -> Result<Self> {
        let mut rho = Self::pure_bipartite(&a.kron(b), a.dim(), b.dim())?;
        rho.declared_separable = true;
        Ok(rho)
    }

    /// Convex combination; separable when every component is.
    pub fn mixture(weights: &[f64], parts: &[DensityMatrix]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty)?;
        if weights.len() != parts.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} states",
                weights.len(),
                parts.len()
            )));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidDensity("negative mixture weight".into()));
        }
        if parts.iter().any(|p| p.parts != first.parts || p.dim() != first.dim()) {
            return Err(Error::InvalidDensity("mixture components differ in shape".into()));
        }
        let n = first.dim();
        let m = weights
            .iter()
            .zip(parts)
            .fold(DMatrix::zeros(n, n), |acc, (&w, p)| acc + p.m.map(|z| z * w));
        let mut rho = Self::new(m)?;
        rho.parts = first.parts;
        rho.declared_separable = parts.iter().all(|p| p.declared_separable);
        Ok(rho)
    }

    fn validate(m: &DMatrix<C64>) -> Result<()> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidDensity(format!(
                "shape {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::InvalidDensity(format!("not Hermitian ({herm:e})")));
        }
        let tr = m.trace();
        if (tr - cr(1.0)).norm() > 1e-10 {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min_ev = m
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_ev < -1e-10 {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min_ev:e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn parts(&self) -> Option<(usize, usize)> {
        self.parts
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn is_declared_separable(&self) -> bool {
        self.declared_separable
    }
}

/// `Tr(ρ O†O) − |Tr(ρ O)|²`.
pub fn mixed_variance(op: &OperatorMatrix, rho: &DensityMatrix) -> Result<f64> {
    if op.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: op.dim(),
        });
    }
    let o = op.matrix();
    let oo = o.adjoint() * o;
    Ok(trace_product(&rho.m, &oo).re - trace_product(&rho.m, o).norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityReport {
    /// `Σ_k |⟨ψ|E_k|ψ⟩|²`.
    pub fidelity: f64,
    /// `Σ_k ΔE_k²`, computed independently of `fidelity`.
    pub variance_sum: f64,
}

pub fn channel_fidelity(ch: &KrausChannel, state: &StateVector) -> Result<FidelityReport> {
    if state.dim() != ch.dim() {
        return Err(Error::DimensionMismatch {
            expected: ch.dim(),
            found: state.dim(),
        });
    }
    if !state.is_normalized() {
        return Err(Error::NotNormalized {
            norm_sqr: state.norm_sqr(),
        });
    }
    let psi = state.amplitudes();
    let mut fidelity = 0.0;
    let mut variance_sum = 0.0;
    for k in ch.kraus() {
        let v = k.apply(psi)?;
        let e = psi.dotc(&v);
        fidelity += e.norm_sqr();
        variance_sum += v.norm_squared() - e.norm_sqr();
    }
    Ok(FidelityReport {
        fidelity,
        variance_sum,
    })
}

fn fidelity_of(kraus: &[OperatorMatrix], psi: &DVector<C64>) -> f64 {
    kraus
        .iter()
        .map(|k| psi.dotc(&(k.matrix() * psi)).norm_sqr())
        .sum()
}

/// Riemannian gradient of `F` on the unit sphere at `psi`.
fn fidelity_gradient(kraus: &[OperatorMatrix], psi: &DVector<C64>) -> DVector<C64> {
    let mut g = DVector::zeros(psi.len());
    for k in kraus {
        let m = k.matrix();
        let kp = m * psi;
        let e = psi.dotc(&kp);
        g += kp * e.conj() + (m.adjoint() * psi) * e;
    }
    let along = psi.dotc(&g);
    g - psi * along
}

/// Backtracking gradient ascent on the sphere.
fn ascend(kraus: &[OperatorMatrix], start: DVector<C64>, iterations: usize) -> (f64, DVector<C64>) {
    let mut psi = start;
    let mut f = fidelity_of(kraus, &psi);
    let mut step = 0.5;
    for _ in 0..iterations {
        let g = fidelity_gradient(kraus, &psi);
        let gnorm = g.norm();
        if gnorm < 1e-12 {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let trial = &psi + &g * cr(step);
            let trial = trial.unscale(trial.norm());
            let ft = fidelity_of(kraus, &trial);
            if ft > f {
                psi = trial;
                f = ft;
                improved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (f, psi)
}

/// Settings for [`f_max_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FMaxOptions {
    /// Polar × azimuthal points of the qubit Bloch grid.
    pub bloch_grid: (usize, usize),
    /// Random starting states for dimensions above 2.
    pub samples: usize,
    /// Best grid points that get refined.
    pub refine_from: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for FMaxOptions {
    fn default() -> Self {
        Self {
            bloch_grid: (64, 128),
            samples: 4096,
            refine_from: 4,
            iterations: 50,
            seed: 0x5eed,
        }
    }
}

/// `max_φ ⟨φ|ℰ(|φ⟩⟨φ|)|φ⟩`, by grid search followed by gradient ascent.
pub fn f_max(ch: &KrausChannel) -> Result<f64> {
    f_max_with(ch, &FMaxOptions::default())
}

pub fn f_max_with(ch: &KrausChannel, opts: &FMaxOptions) -> Result<f64> {
    let d = ch.dim();
    if d > F_MAX_DIM_LIMIT {
        return Err(Error::UnsupportedDimension(d));
    }
    if d == 1 {
        return Ok(fidelity_of(ch.kraus(), &DVector::from_element(1, cr(1.0))).clamp(0.0, 1.0));
    }
    let starts: Vec<DVector<C64>> = if d == 2 {
        let (nt, np) = opts.bloch_grid;
        let mut v = Vec::with_capacity(nt * np);
        for i in 0..nt {
            let theta = std::f64::consts::PI * i as f64 / (nt - 1).max(1) as f64;
            for j in 0..np {
                let phi = std::f64::consts::TAU * j as f64 / np as f64;
                v.push(DVector::from_vec(vec![
                    cr((theta / 2.0).cos()),
                    C64::from_polar((theta / 2.0).sin(), phi),
                ]));
            }
        }
        v
    } else {
        let mut rng = seeded_rng(opts.seed);
        (0..opts.samples)
            .map(|_| haar_state(&mut rng, d).into_vector())
            .collect()
    };
    let mut scored: Vec<(f64, usize)> = starts
        .iter()
        .enumerate()
        .map(|(i, s)| (fidelity_of(ch.kraus(), s), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let iterations = if d == 2 { opts.iterations } else { opts.iterations * 4 };
    let best = scored
        .iter()
        .take(opts.refine_from.max(1))
        .map(|&(_, i)| ascend(ch.kraus(), starts[i].clone(), iterations).0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best.clamp(0.0, 1.0))
}

/// `Σ_k Δ(E_k^A ⊗ I + I ⊗ E_k^B)²_ρ`, zero-padding the shorter Kraus list.
pub fn collective_variance_sum(
    ch_a: &KrausChannel,
    ch_b: &KrausChannel,
    rho: &DensityMatrix,
) -> Result<f64> {
    let (d_a, d_b) = rho
        .parts()
        .ok_or_else(|| Error::InvalidDensity("state is not declared bipartite".into()))?;
    if (d_a, d_b) != (ch_a.dim(), ch_b.dim()) {
        return Err(Error::ShapeMismatch(format!(
            "state is {d_a}x{d_b}, channels act on {}x{}",
            ch_a.dim(),
            ch_b.dim()
        )));
    }
    let n = ch_a.kraus().len().max(ch_b.kraus().len());
    let (ka, kb) = (ch_a.padded(n), ch_b.padded(n));
    let (ia, ib) = (OperatorMatrix::identity(d_a), OperatorMatrix::identity(d_b));
    let mut total = 0.0;
    for (ea, eb) in ka.iter().zip(&kb) {
        let m = ea.kron(&ib).add(&ia.kron(eb));
        total += mixed_variance(&m, rho)?;
    }
    Ok(total)
}

/// Row-major `[re, im]` pairs.
pub type MatrixRecord = Vec<[f64; 2]>;

fn record(m: &OperatorMatrix) -> MatrixRecord {
    let d = m.dim();
    (0..d * d)
        .map(|i| {
            let z = m.get(i / d, i % d);
            [z.re, z.im]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub f_max_a: f64,
    pub f_max_b: f64,
    pub violated: bool,
    /// `rhs − lhs`; positive when the state is certified entangled.
    pub margin: f64,
    pub kraus_a: Vec<MatrixRecord>,
    pub kraus_b: Vec<MatrixRecord>,
}

impl SeparabilityReport {
    pub fn verdict(&self) -> &'static str {
        if self.violated {
            "entangled"
        } else {
            "not violated"
        }
    }
}

pub fn separability_test(
    ch_a: &KrausChannel,
    ch_b: &KrausChannel,
    rho: &DensityMatrix,
) -> Result<SeparabilityReport> {
    let lhs = collective_variance_sum(ch_a, ch_b, rho)?;
    let (fa, fb) = (f_max(ch_a)?, f_max(ch_b)?);
    let rhs = 2.0 - fa - fb;
    let margin = rhs - lhs;
    let violated = lhs < rhs - VIOLATION_TOL;
    if violated && rho.is_declared_separable() {
        return Err(Error::SoundnessViolation { margin });
    }
    Ok(SeparabilityReport {
        lhs,
        rhs,
        f_max_a: fa,
        f_max_b: fb,
        violated,
        margin,
        kraus_a: ch_a.kraus().iter().map(record).collect(),
        kraus_b: ch_b.kraus().iter().map(record).collect(),
    })
}

/// Singlet `(|01> − |10>)/√2`.
pub fn singlet() -> StateVector {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::pure(vec![cr(0.0), cr(r), cr(-r), cr(0.0)]).expect("unit vector")
}

/// Mixture of `1..=max_terms` Haar product states with Dirichlet-uniform
/// weights.
pub fn random_separable_state<R: Rng + ?Sized>(
    rng: &mut R,
    d_a: usize,
    d_b: usize,
    max_terms: usize,
) -> DensityMatrix {
    let terms = rng.random_range(1..=max_terms.max(1));
    let raw: Vec<f64> = (0..terms).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let parts: Vec<DensityMatrix> = (0..terms)
        .map(|_| {
            DensityMatrix::product(&haar_state(rng, d_a), &haar_state(rng, d_b))
                .expect("valid product state")
        })
        .collect();
    DensityMatrix::mixture(&weights, &parts).expect("valid mixture")
}

/// Random complete channel with `n` Kraus operators, cut from a Haar
/// isometry `C^d → C^{nd}`.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize) -> KrausChannel {
    let u = crate::random::haar_unitary(rng, dim * n);
    let kraus = (0..n)
        .map(|k| {
            let block = u.matrix().view((k * dim, 0), (dim, dim)).into_owned();
            OperatorMatrix::new(block).expect("finite block")
        })
        .collect();
    KrausChannel::new(kraus).expect("isometry blocks are complete")
}
