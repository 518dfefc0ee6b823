//! Closed-form `|T_ij|(θ0)` curves for the two reference configurations.
//!
//! These carry θ0 through the input polarization only and are kept for
//! comparison against direct matrix evaluation. They coincide with it at
//! θ0 = 0. Away from zero the real `|T_22|` curve and the complex `|T_12|`,
//! `|T_13|`, `|T_33|` curves do not; the sweep commands write both columns.

use std::f64::consts::{PI, SQRT_2};

use crate::qmath::{c, TMagnitudes};

/// Real configuration: θ1 = 22.5°, θ3 = 60°, θ5 = 22.5°, θ7 = 75°.
pub fn real_curves(theta0_deg: f64) -> TMagnitudes {
    let x = theta0_deg / 45.0 * PI;
    let (s, co) = x.sin_cos();
    let r3 = 3f64.sqrt();
    TMagnitudes {
        t12: (-0.5 + 1.5 * (co + s)).abs() / (2.0 * SQRT_2),
        t13: ((-1.0 + r3 / 2.0) + (1.0 + r3 / 2.0) * (co + s)).abs() / (2.0 * SQRT_2),
        t22: 0.5 * (1.25 - 0.375 * s).abs(),
        t33: 0.5 * (1.75 + (-1.0 + r3 / 2.0) * (1.0 + r3 / 2.0) * s).abs(),
        t23: 0.5 * (1.0 + r3 / 4.0 + (-1.0 + r3 / 4.0) * s).abs(),
    }
}

/// Complex configuration: θ1 = 22.5°, θ3 = 60°, θ5 = 0°, θ7 = 75°,
/// θA = θB = 0°.
pub fn complex_curves(theta0_deg: f64) -> TMagnitudes {
    let x = theta0_deg / 45.0 * PI;
    let h = theta0_deg / 90.0 * PI;
    let (s, co) = x.sin_cos();
    let r3 = 3f64.sqrt();
    TMagnitudes {
        t12: c(-1.0 + 3.0 * co, s).norm() / (4.0 * SQRT_2),
        t13: r3 / 2.0 * h.cos().powi(2) + h.sin().powi(2),
        t22: 0.625,
        t33: (0.75 * co * co + s * s).abs(),
        t23: (c(4.0 + r3, 0.0) + c(r3 * co, -r3 * s) - c(4.0 * co, 4.0 * s)).norm()
            / (8.0 * SQRT_2),
    }
}
