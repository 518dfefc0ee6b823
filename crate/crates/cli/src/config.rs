//! Experiment configuration: a TOML file with `[sweep]`, `[angles]`,
//! `[noise]`, `[scan]`, `[outputs]`, `[entangle]` and optional
//! `[train_a]`/`[train_b]` sections. Every key is optional.

use std::fmt;
use std::path::{Path, PathBuf};

use nhlab::entanglement::{singlet, DensityMatrix, KrausChannel};
use nhlab::interferometer::Arm;
use nhlab::noise::CountingModel;
use nhlab::optics::{
    operator_complex, operator_complex_b, operator_real, operator_real_b, OpticalTrain,
};
use nhlab::qmath::{c, OperatorMatrix, StateVector, C64};
use serde::{Deserialize, Serialize};
use toml::Spanned;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.source, l, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Real,
    Complex,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Real => "real",
            Mode::Complex => "complex",
        })
    }
}

/// θ0 grid in degrees, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepSpec {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            start: -45.0,
            stop: 45.0,
            step: 1.0,
        }
    }
}

/// Fixed waveplate angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Angles {
    pub theta1: f64,
    pub theta3: f64,
    pub theta5: f64,
    pub theta7: f64,
    pub theta_a: f64,
    pub theta_b: f64,
}

impl Angles {
    pub fn defaults(mode: Mode) -> Self {
        Self {
            theta1: 22.5,
            theta3: 60.0,
            theta5: match mode {
                Mode::Real => 22.5,
                Mode::Complex => 0.0,
            },
            theta7: 75.0,
            theta_a: 0.0,
            theta_b: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub rate_scale: f64,
    pub visibility_factor: f64,
    pub trials: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            rate_scale: 1e4,
            visibility_factor: 1.0,
            trials: 1000,
        }
    }
}

impl NoiseSpec {
    pub fn model(&self, seed: u64) -> CountingModel {
        CountingModel {
            rate_scale: self.rate_scale,
            visibility_factor: self.visibility_factor,
            seed,
        }
    }
}

/// Single-point settings for `fringe`, `tmatrix` and `noise-calib`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSpec {
    pub theta0: f64,
    pub arm_a: Arm,
    pub arm_b: Arm,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            theta0: 0.0,
            arm_a: Arm::A,
            arm_b: Arm::B,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntangleSpec {
    pub channel_a: KrausChannel,
    pub channel_b: KrausChannel,
    pub state: DensityMatrix,
    pub state_label: String,
}

impl Default for EntangleSpec {
    fn default() -> Self {
        Self {
            channel_a: KrausChannel::pauli_xy(),
            channel_b: KrausChannel::pauli_xy(),
            state: DensityMatrix::pure_bipartite(&singlet(), 2, 2).expect("valid singlet"),
            state_label: "singlet".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub sweep: SweepSpec,
    pub angles: Angles,
    pub noise: NoiseSpec,
    pub scan: ScanSpec,
    pub out_dir: PathBuf,
    pub entangle: EntangleSpec,
    pub train_a: Option<OpticalTrain>,
    pub train_b: Option<OpticalTrain>,
}

impl ExperimentConfig {
    pub fn defaults(mode: Mode) -> Self {
        Self {
            mode,
            seed: 0,
            sweep: SweepSpec::default(),
            angles: Angles::defaults(mode),
            noise: NoiseSpec::default(),
            scan: ScanSpec::default(),
            out_dir: PathBuf::from("out"),
            entangle: EntangleSpec::default(),
            train_a: None,
            train_b: None,
        }
    }

    pub fn load(path: &Path, mode_hint: Option<Mode>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            line: None,
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string(), mode_hint)
    }

    /// Parses `text`; `mode_hint` fills in a missing `mode` and must agree
    /// with an explicit one.
    pub fn parse(text: &str, source: &str, mode_hint: Option<Mode>) -> Result<Self, ConfigError> {
        let err = |span: Option<std::ops::Range<usize>>, message: String| ConfigError {
            source: source.to_string(),
            line: span.map(|s| line_of(text, s.start)),
            message,
        };
        let raw: RawConfig = toml::from_str(text).map_err(|e| err(e.span(), e.message().to_string()))?;

        let mode = match (&raw.mode, mode_hint) {
            (Some(m), Some(h)) if *m.get_ref() != h => {
                return Err(err(
                    Some(m.span()),
                    format!("mode = \"{}\" but this command needs mode = \"{h}\"", m.get_ref()),
                ))
            }
            (Some(m), _) => *m.get_ref(),
            (None, h) => h.unwrap_or(Mode::Real),
        };
        let mut cfg = Self::defaults(mode);
        cfg.seed = raw.seed.unwrap_or(0);

        if let Some(s) = raw.sweep {
            let start = s.start.as_ref().map_or(cfg.sweep.start, |v| *v.get_ref());
            let stop = s.stop.as_ref().map_or(cfg.sweep.stop, |v| *v.get_ref());
            let step = s.step.as_ref().map_or(cfg.sweep.step, |v| *v.get_ref());
            if !(step > 0.0 && step.is_finite()) {
                return Err(err(s.step.map(|v| v.span()), format!("sweep step must be positive, got {step}")));
            }
            if !(start <= stop) {
                let span = s.start.or(s.stop).map(|v| v.span());
                return Err(err(span, format!("sweep start {start} exceeds stop {stop}")));
            }
            if (stop - start) / step > 1e6 {
                return Err(err(s.step.map(|v| v.span()), "sweep has more than 10^6 points".into()));
            }
            cfg.sweep = SweepSpec { start, stop, step };
        }

        if let Some(a) = raw.angles {
            for (name, v) in [("theta_a", &a.theta_a), ("theta_b", &a.theta_b)] {
                if let Some(v) = v {
                    match mode {
                        Mode::Real => {
                            return Err(err(
                                Some(v.span()),
                                format!("{name} is not allowed in real mode"),
                            ))
                        }
                        Mode::Complex if *v.get_ref() != 0.0 => {
                            return Err(err(
                                Some(v.span()),
                                format!("{name} must be 0 in complex mode, got {}", v.get_ref()),
                            ))
                        }
                        Mode::Complex => {}
                    }
                }
            }
            let d = cfg.angles;
            cfg.angles = Angles {
                theta1: a.theta1.unwrap_or(d.theta1),
                theta3: a.theta3.unwrap_or(d.theta3),
                theta5: a.theta5.unwrap_or(d.theta5),
                theta7: a.theta7.unwrap_or(d.theta7),
                theta_a: 0.0,
                theta_b: 0.0,
            };
        }

        if let Some(n) = raw.noise {
            let d = cfg.noise;
            cfg.noise = NoiseSpec {
                enabled: n.enabled.unwrap_or(d.enabled),
                rate_scale: n.rate_scale.as_ref().map_or(d.rate_scale, |v| *v.get_ref()),
                visibility_factor: n
                    .visibility_factor
                    .as_ref()
                    .map_or(d.visibility_factor, |v| *v.get_ref()),
                trials: n.trials.as_ref().map_or(d.trials, |v| *v.get_ref()),
            };
            if let Err(e) = cfg.noise.model(cfg.seed).validate() {
                let span = if cfg.noise.rate_scale > 0.0 && cfg.noise.rate_scale.is_finite() {
                    n.visibility_factor.map(|v| v.span())
                } else {
                    n.rate_scale.map(|v| v.span())
                };
                return Err(err(span, e.to_string()));
            }
            if cfg.noise.trials < 100 {
                return Err(err(
                    n.trials.map(|v| v.span()),
                    format!("noise trials must be at least 100, got {}", cfg.noise.trials),
                ));
            }
        }

        if let Some(s) = raw.scan {
            cfg.scan = ScanSpec {
                theta0: s.theta0.unwrap_or(cfg.scan.theta0),
                arm_a: s.arm_a.map_or(cfg.scan.arm_a, RawArm::into_arm),
                arm_b: s.arm_b.map_or(cfg.scan.arm_b, RawArm::into_arm),
            };
        }

        if let Some(o) = raw.outputs {
            if let Some(dir) = o.dir {
                cfg.out_dir = PathBuf::from(dir);
            }
        }

        if let Some(e) = raw.entangle {
            let d = EntangleSpec::default();
            let channel_a = match e.channel_a {
                Some(c) => build_channel(c.get_ref()).map_err(|m| err(Some(c.span()), format!("channel_a: {m}")))?,
                None => d.channel_a,
            };
            let channel_b = match e.channel_b {
                Some(c) => build_channel(c.get_ref()).map_err(|m| err(Some(c.span()), format!("channel_b: {m}")))?,
                None => d.channel_b,
            };
            let (state, state_label) = match e.state {
                Some(s) => build_state(s.get_ref(), channel_a.dim(), channel_b.dim())
                    .map_err(|m| err(Some(s.span()), format!("state: {m}")))?,
                None => (d.state, d.state_label),
            };
            if state.parts() != Some((channel_a.dim(), channel_b.dim())) {
                return Err(err(
                    None,
                    format!(
                        "entangle state dims {:?} do not match channel dims ({}, {})",
                        state.parts(),
                        channel_a.dim(),
                        channel_b.dim()
                    ),
                ));
            }
            cfg.entangle = EntangleSpec {
                channel_a,
                channel_b,
                state,
                state_label,
            };
        }

        for (name, t) in [("train_a", &raw.train_a), ("train_b", &raw.train_b)] {
            if let Some(t) = t {
                t.get_ref()
                    .operator()
                    .map_err(|e| err(Some(t.span()), format!("{name}: {e}")))?;
            }
        }
        cfg.train_a = raw.train_a.map(Spanned::into_inner);
        cfg.train_b = raw.train_b.map(Spanned::into_inner);
        Ok(cfg)
    }

    /// Operators `A` and `B` for the configured mode and angles, or the
    /// explicit trains when given.
    pub fn operators(&self) -> nhlab::Result<(OperatorMatrix, OperatorMatrix)> {
        let a = &self.angles;
        let op_a = match &self.train_a {
            Some(t) => t.operator()?,
            None => match self.mode {
                Mode::Real => operator_real(a.theta1, a.theta3),
                Mode::Complex => operator_complex(a.theta1, a.theta3, a.theta_a)?,
            },
        };
        let op_b = match &self.train_b {
            Some(t) => t.operator()?,
            None => match self.mode {
                Mode::Real => operator_real_b(a.theta5, a.theta7),
                Mode::Complex => operator_complex_b(a.theta5, a.theta7, a.theta_b)?,
            },
        };
        Ok((op_a, op_b))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Spanned<Mode>>,
    seed: Option<u64>,
    sweep: Option<RawSweep>,
    angles: Option<RawAngles>,
    noise: Option<RawNoise>,
    scan: Option<RawScan>,
    outputs: Option<RawOutputs>,
    entangle: Option<RawEntangle>,
    train_a: Option<Spanned<OpticalTrain>>,
    train_b: Option<Spanned<OpticalTrain>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    start: Option<Spanned<f64>>,
    stop: Option<Spanned<f64>>,
    step: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAngles {
    theta1: Option<f64>,
    theta3: Option<f64>,
    theta5: Option<f64>,
    theta7: Option<f64>,
    theta_a: Option<Spanned<f64>>,
    theta_b: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    enabled: Option<bool>,
    rate_scale: Option<Spanned<f64>>,
    visibility_factor: Option<Spanned<f64>>,
    trials: Option<Spanned<usize>>,
}

#[derive(Clone, Copy, Deserialize)]
enum RawArm {
    I,
    A,
    B,
}

impl RawArm {
    fn into_arm(self) -> Arm {
        match self {
            RawArm::I => Arm::I,
            RawArm::A => Arm::A,
            RawArm::B => Arm::B,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    theta0: Option<f64>,
    arm_a: Option<RawArm>,
    arm_b: Option<RawArm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    dir: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntangle {
    channel_a: Option<Spanned<RawChannel>>,
    channel_b: Option<Spanned<RawChannel>>,
    state: Option<Spanned<RawState>>,
}

/// Either a preset or explicit Kraus matrices (row-major `[re, im]` pairs).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    preset: Option<String>,
    gamma: Option<f64>,
    dim: Option<usize>,
    kraus: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    preset: Option<String>,
    amplitudes: Option<Vec<[f64; 2]>>,
    density: Option<Vec<[f64; 2]>>,
}

fn complex_list(pairs: &[[f64; 2]]) -> Vec<C64> {
    pairs.iter().map(|&[re, im]| c(re, im)).collect()
}

fn square_side(len: usize) -> Option<usize> {
    let d = (len as f64).sqrt().round() as usize;
    (d > 0 && d * d == len).then_some(d)
}

fn build_channel(raw: &RawChannel) -> Result<KrausChannel, String> {
    match (&raw.preset, &raw.kraus) {
        (Some(_), Some(_)) => Err("give either `preset` or `kraus`, not both".into()),
        (None, None) => Err("missing `preset` or `kraus`".into()),
        (Some(p), None) => match p.as_str() {
            "identity" => Ok(KrausChannel::identity(raw.dim.unwrap_or(2))),
            "pauli_xy" => Ok(KrausChannel::pauli_xy()),
            "amplitude_damping" => {
                let g = raw.gamma.ok_or("amplitude_damping needs `gamma`")?;
                KrausChannel::amplitude_damping(g).map_err(|e| e.to_string())
            }
            other => Err(format!(
                "unknown preset `{other}` (expected identity, pauli_xy or amplitude_damping)"
            )),
        },
        (None, Some(list)) => {
            let ops = list
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let d = square_side(m.len())
                        .ok_or_else(|| format!("Kraus operator {k} has {} entries, not a square", m.len()))?;
                    OperatorMatrix::from_rows(d, &complex_list(m)).map_err(|e| format!("Kraus operator {k}: {e}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            KrausChannel::new(ops).map_err(|e| e.to_string())
        }
    }
}

fn build_state(raw: &RawState, d_a: usize, d_b: usize) -> Result<(DensityMatrix, String), String> {
    let given = [raw.preset.is_some(), raw.amplitudes.is_some(), raw.density.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err("give exactly one of `preset`, `amplitudes`, `density`".into());
    }
    let n = d_a * d_b;
    if let Some(p) = &raw.preset {
        let zero_a = StateVector::basis(d_a, 0).map_err(|e| e.to_string())?;
        let zero_b = StateVector::basis(d_b, 0).map_err(|e| e.to_string())?;
        return match p.as_str() {
            "singlet" if (d_a, d_b) == (2, 2) => DensityMatrix::pure_bipartite(&singlet(), 2, 2)
                .map(|r| (r, "singlet".to_string()))
                .map_err(|e| e.to_string()),
            "singlet" => Err("singlet needs two qubits".into()),
            "product_zero" => DensityMatrix::product(&zero_a, &zero_b)
                .map(|r| (r, "product_zero".to_string()))
                .map_err(|e| e.to_string()),
            other => Err(format!("unknown preset `{other}` (expected singlet or product_zero)")),
        };
    }
    if let Some(a) = &raw.amplitudes {
        if a.len() != n {
            return Err(format!("{} amplitudes for a {d_a}x{d_b} system", a.len()));
        }
        let s = StateVector::pure(complex_list(a)).map_err(|e| e.to_string())?;
        return DensityMatrix::pure_bipartite(&s, d_a, d_b)
            .map(|r| (r, "amplitudes".to_string()))
            .map_err(|e| e.to_string());
    }
    let m = raw.density.as_ref().expect("checked above");
    if m.len() != n * n {
        return Err(format!("{} density entries for a {d_a}x{d_b} system", m.len()));
    }
    let mat = nalgebra::DMatrix::from_row_slice(n, n, &complex_list(m));
    DensityMatrix::bipartite(mat, d_a, d_b)
        .map(|r| (r, "density".to_string()))
        .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, hint: Option<Mode>) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(text, "cfg.toml", hint)
    }

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = parse("", Some(Mode::Complex)).unwrap();
        assert_eq!(cfg, ExperimentConfig::defaults(Mode::Complex));
        assert_eq!(cfg.angles.theta5, 0.0);
        assert_eq!(ExperimentConfig::defaults(Mode::Real).angles.theta5, 22.5);
        assert_eq!(cfg.sweep.points().len(), 91);
    }

    #[test]
    fn real_mode_rejects_qwp_angles_with_line() {
        let e = parse("mode = \"real\"\n\n[angles]\ntheta1 = 10\ntheta_a = 0\n", None).unwrap_err();
        assert_eq!(e.line, Some(5));
        assert!(e.to_string().starts_with("cfg.toml:5: theta_a is not allowed"));
    }

    #[test]
    fn complex_mode_needs_zero_qwp() {
        assert!(parse("mode = \"complex\"\n[angles]\ntheta_b = 0.0\n", None).is_ok());
        let e = parse("mode = \"complex\"\n[angles]\ntheta_b = 5.0\n", None).unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn sweep_validation() {
        let e = parse("[sweep]\nstep = 0\n", None).unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse("[sweep]\nstart = 10\nstop = -10\n", None).unwrap_err();
        assert!(e.message.contains("exceeds"));
        let cfg = parse("[sweep]\nstart = 0\nstop = 1\nstep = 0.25\n", None).unwrap();
        assert_eq!(cfg.sweep.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn mode_conflict_and_unknown_keys() {
        let e = parse("mode = \"complex\"\n", Some(Mode::Real)).unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = parse("[angles]\ntheta9 = 1\n", None).unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn noise_validation() {
        let e = parse("[noise]\nrate_scale = -1\n", None).unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse("[noise]\nvisibility_factor = 1.5\n", None).unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn explicit_channel_and_state() {
        let text = r#"
[entangle.channel_a]
kraus = [[[1, 0], [0, 0], [0, 0], [1, 0]]]

[entangle.channel_b]
preset = "amplitude_damping"
gamma = 0.25

[entangle.state]
amplitudes = [[1, 0], [0, 0], [0, 0], [0, 0]]
"#;
        let cfg = parse(text, None).unwrap();
        assert_eq!(cfg.entangle.channel_a.kraus().len(), 1);
        assert_eq!(cfg.entangle.channel_b.kraus().len(), 2);

        let bad = "[entangle.channel_a]\nkraus = [[[0.5, 0], [0, 0], [0, 0], [0.5, 0]]]\n";
        let e = parse(bad, None).unwrap_err();
        assert!(e.message.contains("not complete"), "{e}");
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn explicit_train_overrides_angles() {
        let text = r#"
[train_a]
lanes = ["a", "b", "c"]
entry = "a"
surviving = "b"
elements = [
  { kind = "hwp", angle = 22.5, placement = "a" },
  { kind = "bd" },
  { kind = "hwp", angle = 45 },
  { kind = "hwp", angle = 60, placement = "b" },
  { kind = "bd" },
  { kind = "hwp", angle = 45, placement = "b" },
]
"#;
        let cfg = parse(text, None).unwrap();
        let (a, _) = cfg.operators().unwrap();
        assert!(a.max_abs_diff(&operator_real(22.5, 60.0)) < 1e-12);

        let broken = text.replace("\"b\"\nelements", "\"z\"\nelements");
        let e = parse(&broken, None).unwrap_err();
        assert!(e.message.contains("unknown path"), "{e}");
    }

    #[test]
    fn shipped_configs_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let cfg = ExperimentConfig::load(&path, None).unwrap_or_else(|e| panic!("{e}"));
            cfg.operators().unwrap();
            n += 1;
        }
        assert_eq!(n, 4);
    }
}
