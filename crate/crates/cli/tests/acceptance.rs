//! Acceptance criteria 1 to 12. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nhlab_cli::checks::{self, CheckOutcome};

const SEED: u64 = 20240607;

struct Criterion {
    id: u32,
    title: &'static str,
    limit: Duration,
    /// `(metric, ok)` pairs evaluated against pinned tolerances.
    verdicts: Vec<(String, bool)>,
    elapsed: Duration,
}

impl Criterion {
    fn passed(&self) -> bool {
        self.elapsed <= self.limit && self.verdicts.iter().all(|(_, ok)| *ok)
    }

    fn line(&self) -> String {
        let mut parts: Vec<String> = self
            .verdicts
            .iter()
            .map(|(m, ok)| if *ok { m.clone() } else { format!("{m} [violated]") })
            .collect();
        parts.push(format!(
            "{:.2}s/{}s",
            self.elapsed.as_secs_f64(),
            self.limit.as_secs()
        ));
        format!(
            "[{}] {:>2}. {}: {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            parts.join("; ")
        )
    }
}

fn metric(c: &CheckOutcome, key: &str) -> f64 {
    *c.metrics.get(key).unwrap_or(&f64::NAN)
}

fn within(name: &str, value: f64, target: f64, tol: f64) -> (String, bool) {
    (
        format!("{name} = {value:.6e} (target {target} ± {tol:e})"),
        (value - target).abs() <= tol,
    )
}

fn at_most(name: &str, value: f64, bound: f64) -> (String, bool) {
    (format!("{name} = {value:.3e} ≤ {bound:e}"), value <= bound)
}

fn at_least(name: &str, value: f64, bound: f64) -> (String, bool) {
    (format!("{name} = {value:.3e} ≥ {bound:e}"), value >= bound)
}

fn timed(
    id: u32,
    title: &'static str,
    limit_s: u64,
    f: impl FnOnce() -> Vec<(String, bool)>,
) -> Criterion {
    let start = Instant::now();
    let verdicts = f();
    Criterion {
        id,
        title,
        limit: Duration::from_secs(limit_s),
        verdicts,
        elapsed: start.elapsed(),
    }
}

fn run_cli(dir: &Path, args: &[&str]) -> Vec<(String, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_nhlab"))
        .args(args)
        .args(["--seed", "7", "--out"])
        .arg(dir)
        .output()
        .expect("run nhlab");
    assert!(
        status.status.code().is_some_and(|c| c <= 1),
        "nhlab {args:?} failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let p = e.expect("entry").path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).expect("read output"),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_12() -> Vec<(String, bool)> {
    let invocations: [&[&str]; 5] = [
        &["sweep-real", "--noise", "on"],
        &["sweep-complex", "--noise", "on", "--format", "json"],
        &["fringe", "--arm-a", "I", "--arm-b", "B", "--theta0", "-20", "--noise", "on"],
        &["tmatrix", "--theta0", "12.5"],
        &["entangle"],
    ];
    let mut out = Vec::new();
    for args in invocations {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (f1, f2) = (run_cli(d1.path(), args), run_cli(d2.path(), args));
        let same = !f1.is_empty() && f1 == f2;
        out.push((
            format!("`{}` {} files {}", args[0], f1.len(), if same { "identical" } else { "DIFFER" }),
            same,
        ));
    }
    let c = checks::determinism(SEED);
    out.push(at_most("in-process differing files", metric(&c, "differing_files"), 0.0));
    out
}

fn main() {
    let criteria = vec![
        timed(1, "pure-qubit equality", 5, || {
            let c = checks::qubit_equality(SEED, 10_000);
            vec![at_most("max |lhs-rhs|/max(1,rhs)", metric(&c, "max_scaled_gap"), 1e-10)]
        }),
        timed(2, "general inequality (dims 3-5)", 10, || {
            let c = checks::general_inequality(SEED, 10_000);
            vec![at_least("min slack", metric(&c, "min_slack"), -1e-10)]
        }),
        timed(3, "real-case equality sweep", 2, || {
            let c = checks::real_sweep();
            vec![
                at_most("max |lhs-rhs|", metric(&c, "max_abs_gap"), 1e-10),
                within("lhs(θ0=0)", metric(&c, "lhs_at_zero"), 0.546875, 1e-10),
            ]
        }),
        timed(4, "complex-case bound", 2, || {
            let c = checks::complex_sweep();
            vec![
                at_most("max lhs", metric(&c, "max_lhs"), 1.0 + 1e-10),
                at_most("max ||T22|-0.625|", metric(&c, "max_t22_gap"), 1e-10),
            ]
        }),
        timed(5, "optics/table agreement", 2, || {
            let c = checks::optics_agreement(SEED, 100);
            vec![
                at_most("max operator gap", metric(&c, "max_operator_gap"), 1e-12),
                at_most("max loss-accounting gap", metric(&c, "max_loss_gap"), 1e-12),
            ]
        }),
        timed(6, "interferometer oracle", 5, || {
            let c = checks::interferometer_oracle(SEED, 50);
            vec![
                at_most("max intensity gap", metric(&c, "max_intensity_gap"), 1e-12),
                at_most("max extraction gap", metric(&c, "max_extraction_gap"), 1e-9),
            ]
        }),
        timed(7, "θ0 = 0 reference magnitudes", 1, || {
            let c = checks::paper_values();
            vec![at_most("max gap", metric(&c, "max_gap"), 1e-9)]
        }),
        timed(8, "Gram PSD", 5, || {
            let c = checks::gram_psd(SEED, 10_000);
            vec![at_least("min eigenvalue", metric(&c, "min_eigenvalue"), -1e-10)]
        }),
        timed(9, "error propagation", 60, || {
            let c = checks::error_propagation(SEED, 10_000);
            vec![
                within("worked σ²(y)", metric(&c, "worked_variance"), 7.8125e-4, 1e-15),
                within("MC σ / propagated σ (T23)", metric(&c, "mc_over_propagated"), 1.0, 0.15),
                within(
                    "σ ratio across a decade / √10",
                    metric(&c, "decade_sigma_ratio") / 10f64.sqrt(),
                    1.0,
                    0.10,
                ),
            ]
        }),
        timed(10, "visibility model", 10, || {
            let c = checks::visibility_model(SEED);
            vec![within("fitted visibility", metric(&c, "fitted_visibility"), 0.9828, 0.005)]
        }),
        timed(11, "entanglement criterion", 30, || {
            let c = checks::entanglement_criterion(SEED, 1_000, 10_000);
            vec![
                within("f_max({X/√2,Y/√2})", metric(&c, "f_max_xy"), 0.5, 1e-6),
                within("singlet lhs", metric(&c, "singlet_lhs"), 0.0, 1e-9),
                within("singlet margin", metric(&c, "singlet_margin"), 1.0, 1e-9),
                at_least("product-state min slack", metric(&c, "product_min_slack"), -1e-9),
                at_most("fidelity identity gap", metric(&c, "fidelity_identity_gap"), 1e-12),
            ]
        }),
        timed(12, "determinism", 120, criterion_12),
    ];

    let mut failed = 0;
    for c in &criteria {
        println!("{}", c.line());
        if !c.passed() {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {} failed",
        criteria.len() - failed,
        failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
