//! Dense complex linear algebra for small Hilbert spaces.
//!
//! States are column vectors, operators are square matrices, both stored as
//! `nalgebra` dynamic matrices of `Complex<f64>`. Everything here is a pure
//! function of its inputs.

use nalgebra::{Complex, DMatrix, DVector, Matrix3};
use serde::Serialize;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Tolerance for classification queries (`is_hermitian`, `is_unitary`, ...).
pub const CLASSIFY_TOL: f64 = 1e-10;
/// Tolerance on the squared norm of a state.
pub const NORM_TOL: f64 = 1e-12;
/// A state counts as normalized for variance purposes within this tolerance.
pub const NORMALIZED_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

fn all_finite<'a>(it: impl IntoIterator<Item = &'a C64>) -> bool {
    it.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// A vector of probability amplitudes, possibly sub-normalized after loss.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Builds a state with squared norm in `[0, 1 + 1e-12]`.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(amps))
    }

    pub fn from_vector(amps: DVector<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Empty);
        }
        if !all_finite(amps.iter()) {
            return Err(Error::NonFinite);
        }
        let norm_sqr = amps.norm_squared();
        if norm_sqr > 1.0 + NORM_TOL {
            return Err(Error::SuperNormalized { norm_sqr });
        }
        Ok(Self { amps })
    }

    /// Builds a pure input state; the squared norm must be 1 within 1e-12.
    pub fn pure(amps: Vec<C64>) -> Result<Self> {
        let s = Self::new(amps)?;
        if (s.norm_sqr() - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized {
                norm_sqr: s.norm_sqr(),
            });
        }
        Ok(s)
    }

    /// Rescales arbitrary nonzero amplitudes onto the unit sphere.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amps);
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: n * n });
        }
        Self::from_vector(v.unscale(n))
    }

    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty);
        }
        if k >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: k + 1,
            });
        }
        let mut v = DVector::zeros(dim);
        v[k] = cr(1.0);
        Ok(Self { amps: v })
    }

    /// Linear polarization prepared by a half-wave plate at `theta0_deg`
    /// acting on |H>: `cos 2θ0 |0> + sin 2θ0 |1>`.
    pub fn polarization(theta0_deg: f64) -> Self {
        let t = 2.0 * theta0_deg.to_radians();
        Self {
            amps: DVector::from_vec(vec![cr(t.cos()), cr(t.sin())]),
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORMALIZED_TOL
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_vector(self) -> DVector<C64> {
        self.amps
    }

    /// `true` when every amplitude has |imaginary part| <= `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.amps.iter().all(|z| z.im.abs() <= tol)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn with_global_phase(&self, phi: f64) -> Self {
        let ph = C64::from_polar(1.0, phi);
        Self {
            amps: self.amps.map(|z| z * ph),
        }
    }

    /// Kronecker product |self> ⊗ |other>.
    pub fn kron(&self, other: &StateVector) -> StateVector {
        Self {
            amps: self.amps.kronecker(&other.amps),
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A general (non-Hermitian) square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    m: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Empty);
        }
        if !all_finite(m.iter()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { m })
    }

    /// Row-major construction.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// 2x2 from row-major entries; infallible for finite input.
    pub fn qubit(a: C64, b: C64, c_: C64, d: C64) -> Self {
        Self {
            m: DMatrix::from_row_slice(2, 2, &[a, b, c_, d]),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    /// Real diagonal matrix.
    pub fn diag(entries: &[f64]) -> Self {
        let d = DVector::from_iterator(entries.len(), entries.iter().map(|&x| cr(x)));
        Self {
            m: DMatrix::from_diagonal(&d),
        }
    }

    /// |ket><bra|.
    pub fn outer(ket: &DVector<C64>, bra: &DVector<C64>) -> Self {
        Self {
            m: ket * bra.adjoint(),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn mul(&self, rhs: &OperatorMatrix) -> Self {
        Self { m: &self.m * &rhs.m }
    }

    pub fn add(&self, rhs: &OperatorMatrix) -> Self {
        Self { m: &self.m + &rhs.m }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            m: self.m.map(|z| z * factor),
        }
    }

    /// `self ⊗ rhs`.
    pub fn kron(&self, rhs: &OperatorMatrix) -> Self {
        Self {
            m: self.m.kronecker(&rhs.m),
        }
    }

    /// Applies the operator to a raw amplitude vector. The result may have
    /// any norm, so it is not wrapped in [`StateVector`].
    pub fn apply(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        check_dim(self.dim(), v.len())?;
        Ok(&self.m * v)
    }

    pub fn apply_state(&self, s: &StateVector) -> Result<DVector<C64>> {
        self.apply(s.amplitudes())
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.max_abs_diff(&self.adjoint()) <= CLASSIFY_TOL
    }

    pub fn is_unitary(&self) -> bool {
        self.adjoint()
            .mul(self)
            .max_abs_diff(&Self::identity(self.dim()))
            <= CLASSIFY_TOL
    }

    pub fn is_real(&self) -> bool {
        self.is_real_within(CLASSIFY_TOL)
    }

    pub fn is_real_within(&self, tol: f64) -> bool {
        self.m.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn is_psd(&self) -> bool {
        self.is_hermitian() && self.hermitian_part_min_eigenvalue() >= -CLASSIFY_TOL
    }

    /// Eigenvalues of `(M + M†)/2`, ascending.
    pub fn hermitian_part_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.m + self.m.adjoint()).map(|z| z * 0.5);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn hermitian_part_min_eigenvalue(&self) -> f64 {
        self.hermitian_part_eigenvalues()[0]
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }
}

/// ⟨state|op|state⟩.
pub fn expectation(op: &OperatorMatrix, state: &StateVector) -> Result<C64> {
    let v = op.apply_state(state)?;
    Ok(state.amplitudes().dotc(&v))
}

/// Variance of a possibly non-Hermitian operator in a normalized pure state,
/// `⟨O†O⟩ − ⟨O†⟩⟨O⟩ = ‖O ψ‖² − |⟨O⟩|²`.
///
/// The raw value is returned; it is nonnegative up to rounding.
pub fn variance(op: &OperatorMatrix, state: &StateVector) -> Result<f64> {
    if !state.is_normalized() {
        return Err(Error::NotNormalized {
            norm_sqr: state.norm_sqr(),
        });
    }
    let v = op.apply_state(state)?;
    let mean = state.amplitudes().dotc(&v);
    Ok(v.norm_squared() - mean.norm_sqr())
}

/// Left polar factors `A = S·U`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFactors {
    /// Positive-semidefinite Hermitian factor `sqrt(A A†)`.
    pub s: OperatorMatrix,
    /// Unitary factor.
    pub u: OperatorMatrix,
}

impl PolarFactors {
    pub fn recompose(&self) -> OperatorMatrix {
        self.s.mul(&self.u)
    }
}

/// Left polar decomposition via the SVD `A = W Σ V†`: `S = W Σ W†`,
/// `U = W V†`. For singular `A` the null directions of `U` come from the
/// SVD's completed bases, so `U` is always unitary.
pub fn polar_decompose(op: &OperatorMatrix) -> Result<PolarFactors> {
    let svd = op.m.clone().svd(true, true);
    let w = svd.u.ok_or(Error::NonFinite)?;
    let v_t = svd.v_t.ok_or(Error::NonFinite)?;
    let sigma = DMatrix::from_diagonal(&svd.singular_values.map(cr));
    let s = &w * sigma * w.adjoint();
    // remove rounding asymmetry so the factor is exactly Hermitian
    let s = (&s + s.adjoint()).map(|z| z * 0.5);
    let u = &w * v_t;
    Ok(PolarFactors {
        s: OperatorMatrix { m: s },
        u: OperatorMatrix { m: u },
    })
}

/// Gram matrix `T_ij = ⟨φ_i|φ_j⟩` of `{|φ⟩, A|φ⟩, B|φ⟩}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TMatrix {
    t: Matrix3<C64>,
    source: Option<TSource>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TSource {
    pub state: StateVector,
    pub a: OperatorMatrix,
    pub b: OperatorMatrix,
}

/// The five magnitudes measured in the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TMagnitudes {
    pub t12: f64,
    pub t13: f64,
    pub t22: f64,
    pub t33: f64,
    pub t23: f64,
}

impl TMagnitudes {
    pub fn as_array(&self) -> [f64; 5] {
        [self.t12, self.t13, self.t22, self.t33, self.t23]
    }

    pub const LABELS: [&'static str; 5] = ["T12", "T13", "T22", "T33", "T23"];
}

impl TMatrix {
    /// Wraps explicit entries without source operators (no realness check
    /// is then possible).
    pub fn from_entries(t: Matrix3<C64>) -> Self {
        Self { t, source: None }
    }

    /// 1-based access matching the `T_ij` labels.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.t[(i - 1, j - 1)]
    }

    pub fn abs(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).norm()
    }

    pub fn entries(&self) -> &Matrix3<C64> {
        &self.t
    }

    pub fn source(&self) -> Option<&TSource> {
        self.source.as_ref()
    }

    /// `T_23 · T_12 · T_31`.
    pub fn triple_product(&self) -> C64 {
        self.get(2, 3) * self.get(1, 2) * self.get(3, 1)
    }

    pub fn magnitudes(&self) -> TMagnitudes {
        TMagnitudes {
            t12: self.abs(1, 2),
            t13: self.abs(1, 3),
            t22: self.abs(2, 2),
            t33: self.abs(3, 3),
            t23: self.abs(2, 3),
        }
    }

    pub fn hermitian_part_min_eigenvalue(&self) -> f64 {
        let h = (self.t + self.t.adjoint()).map(|z| z * 0.5);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|T_ij − conj(T_ji)|`.
    pub fn max_asymmetry(&self) -> f64 {
        (self.t - self.t.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

pub fn gram_matrix(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    state: &StateVector,
) -> Result<TMatrix> {
    check_dim(a.dim(), b.dim())?;
    if !state.is_normalized() {
        return Err(Error::NotNormalized {
            norm_sqr: state.norm_sqr(),
        });
    }
    let phi = state.amplitudes().clone();
    let vecs = [phi.clone(), a.apply(&phi)?, b.apply(&phi)?];
    let t = Matrix3::from_fn(|i, j| vecs[i].dotc(&vecs[j]));
    Ok(TMatrix {
        t,
        source: Some(TSource {
            state: state.clone(),
            a: a.clone(),
            b: b.clone(),
        }),
    })
}

/// Mixed-state expectation `Tr(ρ O)` for raw matrices.
pub(crate) fn trace_product(rho: &DMatrix<C64>, op: &DMatrix<C64>) -> C64 {
    // Tr(ρO) = Σ_ij ρ_ij O_ji
    let n = rho.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += rho[(i, j)] * op[(j, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{hwp_matrix, operator_real, operator_real_b};
    use crate::random::{complex_gaussian_matrix, haar_state, seeded_rng};

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn identity_expectation() {
        let s = StateVector::basis(2, 0).unwrap();
        let e = expectation(&OperatorMatrix::identity(2), &s).unwrap();
        assert!((e - cr(1.0)).norm() < 1e-15);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let s = StateVector::basis(3, 0).unwrap();
        let err = expectation(&OperatorMatrix::identity(2), &s).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn state_norm_validation() {
        assert!(matches!(
            StateVector::new(vec![cr(1.0), cr(0.5)]),
            Err(Error::SuperNormalized { .. })
        ));
        assert!(StateVector::new(vec![cr(0.5), cr(0.5)]).is_ok());
        assert!(matches!(
            StateVector::pure(vec![cr(0.5), cr(0.5)]),
            Err(Error::NotNormalized { .. })
        ));
        assert_eq!(StateVector::new(vec![]), Err(Error::Empty));
    }

    #[test]
    fn non_square_rejected() {
        let m = DMatrix::<C64>::zeros(2, 3);
        assert_eq!(
            OperatorMatrix::new(m),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn real_config_expectations() {
        let a = operator_real(22.5, 60.0);
        let b = operator_real_b(22.5, 75.0);
        let phi = StateVector::polarization(0.0);
        let ata = expectation(&a.adjoint().mul(&a), &phi).unwrap();
        assert!((ata - cr(5.0 / 8.0)).norm() < 1e-12);
        let atb = expectation(&a.adjoint().mul(&b), &phi).unwrap();
        assert!((atb.norm() - (4.0 + 3f64.sqrt()) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn variance_examples() {
        let phi = StateVector::polarization(17.0);
        assert!(variance(&OperatorMatrix::identity(2), &phi).unwrap().abs() < 1e-15);

        let lowering = OperatorMatrix::qubit(cr(0.0), cr(1.0), cr(0.0), cr(0.0));
        let one = StateVector::basis(2, 1).unwrap();
        assert!((variance(&lowering, &one).unwrap() - 1.0).abs() < 1e-15);

        // oracle: A φ(0) = (1/(2√2), 1/√2) by hand, so ⟨A†A⟩ = 5/8 and ⟨A⟩ = 1/(2√2)
        let a = operator_real(22.5, 60.0);
        let v = variance(&a, &StateVector::polarization(0.0)).unwrap();
        let by_hand = (1.0 / 8.0 + 1.0 / 2.0) - (1.0 / (2.0 * SQRT2)).powi(2);
        assert!((by_hand - 0.5).abs() < 1e-15);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn variance_requires_normalized_state() {
        let s = StateVector::new(vec![cr(0.5), cr(0.0)]).unwrap();
        assert!(matches!(
            variance(&OperatorMatrix::identity(2), &s),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn polar_of_unitary_is_trivial() {
        let h = hwp_matrix(22.5);
        let p = polar_decompose(&h).unwrap();
        assert!(p.s.max_abs_diff(&OperatorMatrix::identity(2)) < 1e-12);
        assert!(p.u.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn polar_recovers_waveplate_factors() {
        let a = operator_real(22.5, 60.0);
        let p = polar_decompose(&a).unwrap();
        assert!(p.s.max_abs_diff(&OperatorMatrix::diag(&[0.5, 1.0])) < 1e-12);
        assert!(p.u.max_abs_diff(&hwp_matrix(22.5)) < 1e-12);
    }

    #[test]
    fn polar_of_singular_operator_completes_unitary() {
        // rank one: the S factor kills the first row
        let a = operator_real(22.5, 45.0);
        let p = polar_decompose(&a).unwrap();
        assert!(p.u.is_unitary());
        assert!(p.s.is_psd());
        assert!(p.recompose().max_abs_diff(&a) < 1e-12);

        let z = OperatorMatrix::zeros(3);
        let p = polar_decompose(&z).unwrap();
        assert!(p.u.is_unitary());
        assert!(p.s.max_abs_diff(&z) < 1e-15);
    }

    #[test]
    fn polar_reconstructs_random_operators() {
        let mut rng = seeded_rng(11);
        for _ in 0..100 {
            let a = complex_gaussian_matrix(&mut rng, 2);
            let p = polar_decompose(&a).unwrap();
            assert!(p.recompose().max_abs_diff(&a) < 1e-12);
            assert!(p.s.max_abs_diff(&p.s.adjoint()) < 1e-12);
            assert!(p.s.hermitian_part_min_eigenvalue() >= -1e-12);
            let uu = p.u.adjoint().mul(&p.u);
            assert!(uu.max_abs_diff(&OperatorMatrix::identity(2)) < 1e-12);
        }
    }

    #[test]
    fn gram_of_identities_is_all_ones() {
        let mut rng = seeded_rng(3);
        let s = haar_state(&mut rng, 2);
        let i = OperatorMatrix::identity(2);
        let t = gram_matrix(&i, &i, &s).unwrap();
        for r in 1..=3 {
            for col in 1..=3 {
                assert!((t.get(r, col) - cr(1.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_real_config_values() {
        let a = operator_real(22.5, 60.0);
        let b = operator_real_b(22.5, 75.0);
        let t = gram_matrix(&a, &b, &StateVector::polarization(0.0)).unwrap();
        let m = t.magnitudes();
        let s3 = 3f64.sqrt();
        assert!((m.t12 - 1.0 / (2.0 * SQRT2)).abs() < 1e-12);
        assert!((m.t13 - s3 / (2.0 * SQRT2)).abs() < 1e-12);
        assert!((m.t22 - 5.0 / 8.0).abs() < 1e-12);
        assert!((m.t33 - 7.0 / 8.0).abs() < 1e-12);
        assert!((m.t23 - (4.0 + s3) / 8.0).abs() < 1e-12);
        assert!((t.abs(1, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_psd_random_dims() {
        let mut rng = seeded_rng(5);
        for i in 0..2000 {
            let d = 2 + i % 4;
            let a = complex_gaussian_matrix(&mut rng, d);
            let b = complex_gaussian_matrix(&mut rng, d);
            let s = haar_state(&mut rng, d);
            let t = gram_matrix(&a, &b, &s).unwrap();
            assert!(t.hermitian_part_min_eigenvalue() >= -1e-10);
            assert!(t.max_asymmetry() <= 1e-12 * (1.0 + t.abs(2, 2) + t.abs(3, 3)));
        }
    }

    #[test]
    fn classification() {
        let h = hwp_matrix(10.0);
        assert!(h.is_hermitian() && h.is_unitary() && h.is_real());
        let a = operator_real(22.5, 60.0);
        assert!(!a.is_hermitian() && !a.is_unitary());
        assert!(OperatorMatrix::diag(&[0.5, 1.0]).is_psd());
        assert!(!OperatorMatrix::diag(&[-0.5, 1.0]).is_psd());
    }
}
