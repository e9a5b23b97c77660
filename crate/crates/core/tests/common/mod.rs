#![allow(dead_code)]

use cfs_core::linalg::{c, hermitian_part};
use cfs_core::operators::{diagonal, validate_point, OperatorPoint};
use cfs_core::CMat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Haar-ish random unitary from the QR factor of a complex Gaussian-like matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, f: usize) -> CMat {
    let mut g = CMat::zeros(f, f);
    for v in g.iter_mut() {
        *v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    g.qr().q()
}

/// Random point of signature at most `(n, n)` with trace one.
pub fn random_point(rng: &mut ChaCha8Rng, n: usize, f: usize) -> OperatorPoint {
    let mut d = vec![0.0; f];
    let neg: Vec<f64> = (0..n).map(|_| -rng.random_range(0.05..1.0)).collect();
    let pos_total = 1.0 - neg.iter().sum::<f64>();
    let mut split: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = split.iter().sum();
    split.iter_mut().for_each(|v| *v *= pos_total / s);
    d[..n].copy_from_slice(&split);
    d[n..2 * n].copy_from_slice(&neg);
    let u = random_unitary(rng, f);
    validate_point(hermitian_part(&(&u * diagonal(&d) * u.adjoint())), n).unwrap()
}
