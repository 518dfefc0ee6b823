//! Jones-calculus elements and the waveplate/beam-displacer trains that
//! realize lossy single-qubit operators.
//!
//! Polarization basis: `|0> = |H>`, `|1> = |V>`. A beam displacer shifts the
//! horizontal component one lane along the train's ordered lane list and
//! leaves the vertical component in place. Amplitude that ends on any lane
//! other than the surviving one is counted as lost.
//!
//! Angles are degrees at every public entry point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{c, cr, OperatorMatrix, StateVector, C64};

/// `[[cos2α, sin2α], [sin2α, −cos2α]]`
pub fn hwp_matrix(alpha_deg: f64) -> OperatorMatrix {
    let t = 2.0 * alpha_deg.to_radians();
    let (s, co) = t.sin_cos();
    OperatorMatrix::qubit(cr(co), cr(s), cr(s), cr(-co))
}

/// `[[cos²β + i sin²β, (1−i) cosβ sinβ], [(1−i) cosβ sinβ, sin²β + i cos²β]]`
pub fn qwp_matrix(beta_deg: f64) -> OperatorMatrix {
    let (s, co) = beta_deg.to_radians().sin_cos();
    let off = c(1.0, -1.0) * (co * s);
    OperatorMatrix::qubit(c(co * co, s * s), off, off, c(s * s, co * co))
}

/// The diagonal factor `diag(−cos2θ, 1)` left behind by the second
/// displacer stage.
pub fn s_factor(theta_deg: f64) -> OperatorMatrix {
    OperatorMatrix::diag(&[-(2.0 * theta_deg.to_radians()).cos(), 1.0])
}

/// Whether `diag(−cos2θ, 1)` is positive semidefinite. When it is not, the
/// canonical polar factor differs from it by a sign absorbed into the
/// unitary.
pub fn s_factor_is_psd(theta_deg: f64) -> bool {
    -(2.0 * theta_deg.to_radians()).cos() >= -1e-12
}

/// Real-case operator `diag(−cos2θ3, 1)·HWP(θ1)`.
pub fn operator_real(theta1_deg: f64, theta3_deg: f64) -> OperatorMatrix {
    s_factor(theta3_deg).mul(&hwp_matrix(theta1_deg))
}

/// Real-case `B` built from `θ5`, `θ7`; same element layout as `A`.
pub fn operator_real_b(theta5_deg: f64, theta7_deg: f64) -> OperatorMatrix {
    operator_real(theta5_deg, theta7_deg)
}

fn check_qwp_angle(theta_q_deg: f64) -> Result<()> {
    if theta_q_deg != 0.0 {
        return Err(Error::UnsupportedAngle { angle: theta_q_deg });
    }
    Ok(())
}

/// Complex-case operator `diag(−cos2θ3, 1)·HWP(θ1)·QWP(θ_A)`; only
/// `θ_A = 0` is supported.
pub fn operator_complex(
    theta1_deg: f64,
    theta3_deg: f64,
    theta_a_deg: f64,
) -> Result<OperatorMatrix> {
    check_qwp_angle(theta_a_deg)?;
    Ok(operator_real(theta1_deg, theta3_deg).mul(&qwp_matrix(theta_a_deg)))
}

pub fn operator_complex_b(
    theta5_deg: f64,
    theta7_deg: f64,
    theta_b_deg: f64,
) -> Result<OperatorMatrix> {
    operator_complex(theta5_deg, theta7_deg, theta_b_deg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Hwp,
    Qwp,
    /// Beam displacer.
    Bd,
    /// Polarizing beam splitter: H transmitted, V reflected to `target`.
    Pbs,
    /// Multiplies the amplitude on its path by `e^{iθ}`.
    #[serde(rename = "ps")]
    PhaseShifter,
    /// 50:50 non-polarizing beam splitter between `placement` and `target`.
    Bs,
}

/// A single optical element. `placement: None` means the element spans
/// every lane (beam displacers always do).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JonesElement {
    pub kind: ElementKind,
    #[serde(default)]
    pub angle: f64,
    #[serde(default)]
    pub placement: Option<String>,
    #[serde(default)]
    pub target: Option<String>,
}

impl JonesElement {
    pub fn hwp(angle_deg: f64, path: Option<&str>) -> Self {
        Self::plain(ElementKind::Hwp, angle_deg, path)
    }

    pub fn qwp(angle_deg: f64, path: Option<&str>) -> Self {
        Self::plain(ElementKind::Qwp, angle_deg, path)
    }

    pub fn bd() -> Self {
        Self::plain(ElementKind::Bd, 0.0, None)
    }

    pub fn phase_shifter(phase_deg: f64, path: &str) -> Self {
        Self::plain(ElementKind::PhaseShifter, phase_deg, Some(path))
    }

    pub fn pbs(path: &str, reflect_to: &str) -> Self {
        Self {
            kind: ElementKind::Pbs,
            angle: 0.0,
            placement: Some(path.to_owned()),
            target: Some(reflect_to.to_owned()),
        }
    }

    pub fn bs(path: &str, other: &str) -> Self {
        Self {
            kind: ElementKind::Bs,
            angle: 0.0,
            placement: Some(path.to_owned()),
            target: Some(other.to_owned()),
        }
    }

    fn plain(kind: ElementKind, angle: f64, path: Option<&str>) -> Self {
        Self {
            kind,
            angle,
            placement: path.map(str::to_owned),
            target: None,
        }
    }

    /// The 2x2 Jones matrix for single-path elements.
    pub fn jones(&self) -> Option<OperatorMatrix> {
        match self.kind {
            ElementKind::Hwp => Some(hwp_matrix(self.angle)),
            ElementKind::Qwp => Some(qwp_matrix(self.angle)),
            ElementKind::PhaseShifter => {
                let ph = C64::from_polar(1.0, self.angle.to_radians());
                Some(OperatorMatrix::qubit(ph, cr(0.0), cr(0.0), ph))
            }
            _ => None,
        }
    }
}

/// Polarization amplitudes on a fixed, ordered set of path labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPolState {
    lanes: Vec<String>,
    amps: Vec<[C64; 2]>,
}

impl PathPolState {
    pub fn new<S: AsRef<str>>(lanes: &[S]) -> Result<Self> {
        if lanes.is_empty() {
            return Err(Error::Empty);
        }
        let lanes: Vec<String> = lanes.iter().map(|s| s.as_ref().to_owned()).collect();
        for (i, l) in lanes.iter().enumerate() {
            if lanes[..i].contains(l) {
                return Err(Error::MalformedElement(format!("duplicate lane `{l}`")));
            }
        }
        let zero = [cr(0.0), cr(0.0)];
        Ok(Self {
            amps: vec![zero; lanes.len()],
            lanes,
        })
    }

    pub fn lanes(&self) -> &[String] {
        &self.lanes
    }

    pub fn index(&self, path: &str) -> Result<usize> {
        self.lanes
            .iter()
            .position(|l| l == path)
            .ok_or_else(|| Error::UnknownPath(path.to_owned()))
    }

    pub fn set(&mut self, path: &str, pol: &StateVector) -> Result<()> {
        if pol.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: pol.dim(),
            });
        }
        let i = self.index(path)?;
        let a = pol.amplitudes();
        self.amps[i] = [a[0], a[1]];
        Ok(())
    }

    pub fn get(&self, path: &str) -> Result<[C64; 2]> {
        Ok(self.amps[self.index(path)?])
    }

    pub fn norm_sqr_on(&self, path: &str) -> Result<f64> {
        let [h, v] = self.get(path)?;
        Ok(h.norm_sqr() + v.norm_sqr())
    }

    pub fn total_norm_sqr(&self) -> f64 {
        self.amps
            .iter()
            .map(|[h, v]| h.norm_sqr() + v.norm_sqr())
            .sum()
    }

    /// Applies a 2x2 matrix to the polarization on one path.
    pub fn apply_on(&mut self, path: &str, m: &OperatorMatrix) -> Result<()> {
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: m.dim(),
            });
        }
        let i = self.index(path)?;
        let [h, v] = self.amps[i];
        self.amps[i] = [
            m.get(0, 0) * h + m.get(0, 1) * v,
            m.get(1, 0) * h + m.get(1, 1) * v,
        ];
        Ok(())
    }

    fn apply_everywhere(&mut self, m: &OperatorMatrix) {
        for i in 0..self.lanes.len() {
            let [h, v] = self.amps[i];
            self.amps[i] = [
                m.get(0, 0) * h + m.get(0, 1) * v,
                m.get(1, 0) * h + m.get(1, 1) * v,
            ];
        }
    }

    pub fn apply(&mut self, el: &JonesElement) -> Result<()> {
        match el.kind {
            ElementKind::Hwp | ElementKind::Qwp | ElementKind::PhaseShifter => {
                let m = el.jones().expect("single-path element");
                match &el.placement {
                    Some(p) => self.apply_on(p, &m)?,
                    None => self.apply_everywhere(&m),
                }
            }
            ElementKind::Bd => {
                if el.placement.is_some() {
                    return Err(Error::MalformedElement(
                        "beam displacer spans all lanes; placement must be empty".into(),
                    ));
                }
                let last = self.lanes.len() - 1;
                // rounding residue from a waveplate is dropped, real amplitude is an error
                if self.amps[last][0].norm_sqr() > 1e-24 {
                    return Err(Error::LaneOverflow(self.lanes[last].clone()));
                }
                for i in (0..last).rev() {
                    self.amps[i + 1][0] = self.amps[i][0];
                }
                self.amps[0][0] = cr(0.0);
            }
            ElementKind::Pbs => {
                let (p, q) = self.pair(el)?;
                let v = self.amps[p][1];
                self.amps[p][1] = cr(0.0);
                self.amps[q][1] += v;
            }
            ElementKind::Bs => {
                let (p, q) = self.pair(el)?;
                let r = std::f64::consts::FRAC_1_SQRT_2;
                let i = c(0.0, 1.0);
                for k in 0..2 {
                    let (x, y) = (self.amps[p][k], self.amps[q][k]);
                    self.amps[p][k] = (i * x + y) * r;
                    self.amps[q][k] = (x + i * y) * r;
                }
            }
        }
        Ok(())
    }

    fn pair(&self, el: &JonesElement) -> Result<(usize, usize)> {
        let (Some(p), Some(q)) = (&el.placement, &el.target) else {
            return Err(Error::MalformedElement(format!(
                "{:?} needs both placement and target paths",
                el.kind
            )));
        };
        let (p, q) = (self.index(p)?, self.index(q)?);
        if p == q {
            return Err(Error::MalformedElement(
                "placement and target must differ".into(),
            ));
        }
        Ok((p, q))
    }
}

/// Ordered element list acting on a declared set of lanes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalTrain {
    pub lanes: Vec<String>,
    pub entry: String,
    pub elements: Vec<JonesElement>,
    pub surviving: String,
}

/// Result of propagating a polarization state through a train.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub surviving: StateVector,
    /// Amplitudes left on every other lane.
    pub lost: Vec<(String, [C64; 2])>,
}

impl TrainOutput {
    pub fn lost_norm_sqr(&self) -> f64 {
        self.lost
            .iter()
            .map(|(_, [h, v])| h.norm_sqr() + v.norm_sqr())
            .sum()
    }
}

impl OpticalTrain {
    pub fn lost_paths(&self) -> impl Iterator<Item = &str> {
        self.lanes
            .iter()
            .map(String::as_str)
            .filter(move |l| *l != self.surviving)
    }

    pub fn propagate(&self, input: &StateVector) -> Result<TrainOutput> {
        let mut st = PathPolState::new(&self.lanes)?;
        st.index(&self.surviving)?;
        st.set(&self.entry, input)?;
        for el in &self.elements {
            st.apply(el)?;
        }
        let [h, v] = st.get(&self.surviving)?;
        let lost = self
            .lost_paths()
            .map(|p| Ok((p.to_owned(), st.get(p)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainOutput {
            surviving: StateVector::new(vec![h, v])?,
            lost,
        })
    }

    /// The effective 2x2 operator, assembled column by column from the
    /// action on |0> and |1>.
    pub fn operator(&self) -> Result<OperatorMatrix> {
        let col0 = self.propagate(&StateVector::basis(2, 0)?)?.surviving;
        let col1 = self.propagate(&StateVector::basis(2, 1)?)?.surviving;
        let (a, b) = (col0.amplitudes(), col1.amplitudes());
        Ok(OperatorMatrix::qubit(a[0], b[0], a[1], b[1]))
    }

    /// Real-case preparation: `H(θ1)@a, BD, H(45°), H(θ3)@b, BD, H(45°)@b`.
    pub fn real(theta1_deg: f64, theta3_deg: f64) -> Self {
        Self {
            lanes: vec!["a".into(), "b".into(), "c".into()],
            entry: "a".into(),
            elements: vec![
                JonesElement::hwp(theta1_deg, Some("a")),
                JonesElement::bd(),
                JonesElement::hwp(45.0, None),
                JonesElement::hwp(theta3_deg, Some("b")),
                JonesElement::bd(),
                JonesElement::hwp(45.0, Some("b")),
            ],
            surviving: "b".into(),
        }
    }

    /// Complex-case preparation: a QWP at `θ_A` in front of the real train.
    pub fn complex(theta1_deg: f64, theta3_deg: f64, theta_q_deg: f64) -> Result<Self> {
        check_qwp_angle(theta_q_deg)?;
        let mut t = Self::real(theta1_deg, theta3_deg);
        t.elements
            .insert(0, JonesElement::qwp(theta_q_deg, Some("a")));
        Ok(t)
    }
}

/// Propagates `input` through `train` and returns the surviving polarization.
pub fn compile_train(train: &OpticalTrain, input: &StateVector) -> Result<StateVector> {
    Ok(train.propagate(input)?.surviving)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded_rng;
    use rand::Rng;

    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn close(m: &OperatorMatrix, rows: [[C64; 2]; 2], tol: f64) -> bool {
        let e = OperatorMatrix::qubit(rows[0][0], rows[0][1], rows[1][0], rows[1][1]);
        m.max_abs_diff(&e) <= tol
    }

    #[test]
    fn hwp_examples() {
        assert!(close(&hwp_matrix(0.0), [[cr(1.0), cr(0.0)], [cr(0.0), cr(-1.0)]], 1e-15));
        assert!(close(&hwp_matrix(45.0), [[cr(0.0), cr(1.0)], [cr(1.0), cr(0.0)]], 1e-15));
        assert!(close(&hwp_matrix(22.5), [[cr(R), cr(R)], [cr(R), cr(-R)]], 1e-15));
    }

    #[test]
    fn qwp_examples() {
        let i = c(0.0, 1.0);
        assert!(close(&qwp_matrix(0.0), [[cr(1.0), cr(0.0)], [cr(0.0), i]], 1e-15));
        assert!(close(&qwp_matrix(90.0), [[i, cr(0.0)], [cr(0.0), cr(1.0)]], 1e-15));
        let p = c(0.5, 0.5);
        let m = c(0.5, -0.5);
        assert!(close(&qwp_matrix(45.0), [[p, m], [m, p]], 1e-15));
    }

    #[test]
    fn waveplates_unitary_and_periodic() {
        let mut rng = seeded_rng(2);
        for _ in 0..50 {
            let a: f64 = rng.random_range(-180.0..180.0);
            let h = hwp_matrix(a);
            assert!(h.is_unitary() && h.is_hermitian());
            assert!(h.mul(&h).max_abs_diff(&OperatorMatrix::identity(2)) < 1e-12);

            let q = qwp_matrix(a);
            assert!(q.is_unitary());
            let q4 = q.mul(&q).mul(&q).mul(&q);
            // align the global phase against −I before comparing
            let minus_i = OperatorMatrix::identity(2).scale(cr(-1.0));
            let ph = q4.get(0, 0) / minus_i.get(0, 0);
            let aligned = q4.scale(ph.conj() / ph.norm());
            assert!(aligned.max_abs_diff(&minus_i) < 1e-12);
        }
    }

    #[test]
    fn empty_train_is_identity() {
        let t = OpticalTrain {
            lanes: vec!["a".into()],
            entry: "a".into(),
            elements: vec![],
            surviving: "a".into(),
        };
        let phi = StateVector::polarization(13.0);
        assert_eq!(compile_train(&t, &phi).unwrap(), phi);
    }

    #[test]
    fn real_train_matches_table_final_row() {
        for &(t1, t3, t0) in &[(22.5, 60.0, 0.0), (10.0, 75.0, -20.0), (33.0, 12.0, 41.0)] {
            let out = compile_train(&OpticalTrain::real(t1, t3), &StateVector::polarization(t0))
                .unwrap();
            let d = 2.0 * f64::to_radians(t1 - t0);
            let k = -(2.0 * f64::to_radians(t3)).cos();
            let a = out.amplitudes();
            assert!((a[0] - cr(k * d.cos())).norm() < 1e-12);
            assert!((a[1] - cr(d.sin())).norm() < 1e-12);
        }
    }

    #[test]
    fn complex_train_matches_table_final_row() {
        for &(t1, t3, t0) in &[(22.5, 60.0, 0.0), (0.0, 75.0, 10.0), (17.0, 31.0, -37.0)] {
            let train = OpticalTrain::complex(t1, t3, 0.0).unwrap();
            let out = compile_train(&train, &StateVector::polarization(t0)).unwrap();
            let (s1, c1) = (2.0 * f64::to_radians(t1)).sin_cos();
            let (s0, c0) = (2.0 * f64::to_radians(t0)).sin_cos();
            let k = -(2.0 * f64::to_radians(t3)).cos();
            let a = out.amplitudes();
            assert!((a[0] - c(c1 * c0, s1 * s0) * k).norm() < 1e-12);
            assert!((a[1] - c(s1 * c0, -c1 * s0)).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_operators_at_paper_angles() {
        let s = 3f64.sqrt() / 2.0;
        let a = operator_real(22.5, 60.0);
        assert!(close(&a, [[cr(0.5 * R), cr(0.5 * R)], [cr(R), cr(-R)]], 1e-12));
        let b = operator_real_b(22.5, 75.0);
        assert!(close(&b, [[cr(s * R), cr(s * R)], [cr(R), cr(-R)]], 1e-12));
        assert!(s_factor(45.0).max_abs_diff(&OperatorMatrix::diag(&[0.0, 1.0])) < 1e-15);
        assert!(s_factor_is_psd(60.0) && !s_factor_is_psd(10.0));
    }

    #[test]
    fn complex_operator_examples() {
        let a = operator_complex(22.5, 60.0, 0.0).unwrap();
        let out = a.apply_state(&StateVector::polarization(0.0)).unwrap();
        // table row at θ0 = 0: −cos120°·cos45° |0> + sin45° |1>
        assert!((out[0] - cr(0.5 * R)).norm() < 1e-12);
        assert!((out[1] - cr(R)).norm() < 1e-12);

        let b = operator_complex_b(0.0, 75.0, 0.0).unwrap();
        let out = b.apply_state(&StateVector::polarization(0.0)).unwrap();
        assert!((out[0] - cr(3f64.sqrt() / 2.0)).norm() < 1e-12);
        assert!(out[1].norm() < 1e-12);

        let killed = operator_complex(30.0, 45.0, 0.0).unwrap();
        assert!(killed.get(0, 0).norm() < 1e-15 && killed.get(0, 1).norm() < 1e-15);
        assert!(killed.get(1, 0).norm() > 0.1);
    }

    #[test]
    fn nonzero_qwp_angle_rejected() {
        assert_eq!(
            operator_complex(22.5, 60.0, 10.0),
            Err(Error::UnsupportedAngle { angle: 10.0 })
        );
        assert!(OpticalTrain::complex(22.5, 60.0, 5.0).is_err());
    }

    #[test]
    fn train_operator_matches_closed_form() {
        let t = OpticalTrain::real(12.0, 70.0).operator().unwrap();
        assert!(t.max_abs_diff(&operator_real(12.0, 70.0)) < 1e-12);
        let t = OpticalTrain::complex(12.0, 70.0, 0.0).unwrap().operator().unwrap();
        assert!(t.max_abs_diff(&operator_complex(12.0, 70.0, 0.0).unwrap()) < 1e-12);
    }

    #[test]
    fn unknown_path_and_overflow() {
        let mut t = OpticalTrain::real(10.0, 20.0);
        t.elements.push(JonesElement::hwp(0.0, Some("z")));
        assert_eq!(
            compile_train(&t, &StateVector::polarization(0.0)),
            Err(Error::UnknownPath("z".into()))
        );

        let t = OpticalTrain {
            lanes: vec!["a".into()],
            entry: "a".into(),
            elements: vec![JonesElement::bd()],
            surviving: "a".into(),
        };
        assert!(matches!(
            compile_train(&t, &StateVector::polarization(0.0)),
            Err(Error::LaneOverflow(_))
        ));
        // pure V on the last lane does not move
        assert!(compile_train(&t, &StateVector::basis(2, 1).unwrap()).is_ok());
    }

    #[test]
    fn element_on_empty_path_is_noop() {
        let mut t = OpticalTrain::real(10.0, 20.0);
        t.elements.push(JonesElement::hwp(33.0, Some("c")));
        t.elements.push(JonesElement::hwp(33.0, Some("a")));
        let phi = StateVector::polarization(5.0);
        let plain = compile_train(&OpticalTrain::real(10.0, 20.0), &phi).unwrap();
        assert_eq!(compile_train(&t, &phi).unwrap(), plain);
    }

    #[test]
    fn pbs_and_bs_conserve_norm() {
        let mut st = PathPolState::new(&["p", "q"]).unwrap();
        st.set("p", &StateVector::polarization(20.0)).unwrap();
        st.apply(&JonesElement::pbs("p", "q")).unwrap();
        let [h, v] = st.get("p").unwrap();
        assert!(v.norm() == 0.0 && h.norm() > 0.0);
        st.apply(&JonesElement::bs("p", "q")).unwrap();
        assert!((st.total_norm_sqr() - 1.0).abs() < 1e-12);
        assert!(matches!(
            st.apply(&JonesElement::bs("p", "p")),
            Err(Error::MalformedElement(_))
        ));
    }
}
