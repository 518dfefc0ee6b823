//! Seeded generators for random operators and states.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::qmath::{c, OperatorMatrix, StateVector, C64};

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for trial `index` under a master `seed`. Streams do
/// not depend on the order in which trials are run.
pub fn child_rng(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Complex standard normal: real and imaginary parts i.i.d. N(0, 1/2).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> OperatorMatrix {
    let m = DMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    OperatorMatrix::new(m).expect("finite gaussian entries")
}

pub fn real_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> OperatorMatrix {
    let m = DMatrix::from_fn(dim, dim, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        c(x, 0.0)
    });
    OperatorMatrix::new(m).expect("finite gaussian entries")
}

/// Uniform (Haar) random pure state.
pub fn haar_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
    loop {
        let v = DVector::from_fn(dim, |_, _| complex_normal(rng));
        let n = v.norm();
        if n > 1e-8 {
            return StateVector::from_vector(v.unscale(n)).expect("unit vector");
        }
    }
}

/// Uniform random real pure state.
pub fn real_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
    loop {
        let v = DVector::from_fn(dim, |_, _| {
            let x: f64 = StandardNormal.sample(rng);
            c(x, 0.0)
        });
        let n = v.norm();
        if n > 1e-8 {
            return StateVector::from_vector(v.unscale(n)).expect("unit vector");
        }
    }
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix with
/// the phases of R's diagonal divided out.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> OperatorMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    OperatorMatrix::new(q).expect("finite unitary")
}
