//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: C64 = Complex { re: 1.0, im: 0.0 };
pub const I: C64 = Complex { re: 0.0, im: 1.0 };

const EIG_EPS: f64 = f64::EPSILON;
const MAX_SWEEPS_PER_DIM: usize = 2000;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Pauli matrices sigma_1, sigma_2, sigma_3.
pub fn pauli() -> [CMat; 3] {
    [
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

/// Largest entrywise modulus of `m - m^*`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m^*) / 2`, with exactly real diagonal.
pub fn hermitian_part(m: &CMat) -> CMat {
    let n = m.nrows();
    let mut h = CMat::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = c(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    h
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in ascending order.
/// Columns of the returned matrix are the matching orthonormal eigenvectors.
pub fn hermitian_eigen(m: &CMat) -> Option<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Some((Vec::new(), CMat::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(m.clone(), EIG_EPS, MAX_SWEEPS_PER_DIM * n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    Some((values, vecs))
}

/// Eigenvalues of a general complex square matrix.
pub fn eigenvalues(a: &CMat) -> Option<Vec<C64>> {
    let n = a.nrows();
    match n {
        0 => Some(Vec::new()),
        1 => Some(vec![a[(0, 0)]]),
        2 => {
            let (l1, l2) = eig2(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
            Some(vec![l1, l2])
        }
        _ => {
            // Shift out the mean and rescale; QR sweeps stall on nearly scalar input otherwise.
            let mean = a.trace() / c(n as f64, 0.0);
            let mut b = a.clone();
            for k in 0..n {
                b[(k, k)] -= mean;
            }
            let s = b.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if s == 0.0 {
                return Some(vec![mean; n]);
            }
            b /= c(s, 0.0);
            let schur = Schur::try_new(b.clone(), EIG_EPS, MAX_SWEEPS_PER_DIM * n)
                .or_else(|| Schur::try_new(b, 64.0 * EIG_EPS, MAX_SWEEPS_PER_DIM * n))?;
            let (_, t) = schur.unpack();
            let vals: Vec<C64> = (0..n).map(|k| mean + t[(k, k)] * s).collect();
            if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return None;
            }
            Some(vals)
        }
    }
}

/// Eigenvalues of `[[a, b], [c, d]]`.
pub fn eig2(a: C64, b: C64, cc: C64, d: C64) -> (C64, C64) {
    let mean = (a + d) * 0.5;
    let half = (a - d) * 0.5;
    let root = (half * half + b * cc).sqrt();
    (mean + root, mean - root)
}

/// `U diag(values) U^*`, symmetrised so that the result is exactly Hermitian.
pub fn from_spectrum(u: &CMat, values: &[f64]) -> CMat {
    let mut scaled = u.clone();
    for (k, &v) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v);
    }
    hermitian_part(&(scaled * u.adjoint()))
}

pub fn frobenius_distance(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
