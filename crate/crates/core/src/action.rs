//! Causal Lagrangian, causal action, boundedness functional and causal classification.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::operators::{CausalClass, Configuration, OperatorPoint};

/// Relative spread of eigenvalue moduli below which they count as equal.
pub const EQUAL_MODULUS_RTOL: f64 = 1e-8;
/// Relative size of imaginary parts treated as zero, and the distance under which
/// eigenvalues count as one degenerate real eigenvalue.
pub const REAL_RTOL: f64 = 1e-6;
/// Spectra whose largest modulus is below this are treated as the zero spectrum.
pub const ZERO_SPECTRUM_ABS: f64 = 1e-14;

/// Thresholds used by [`classify_spectrum`], echoed into result files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ClassificationTolerances {
    pub equal_modulus_rtol: f64,
    pub real_rtol: f64,
    pub zero_spectrum_abs: f64,
}

pub const CLASSIFICATION_TOLERANCES: ClassificationTolerances = ClassificationTolerances {
    equal_modulus_rtol: EQUAL_MODULUS_RTOL,
    real_rtol: REAL_RTOL,
    zero_spectrum_abs: ZERO_SPECTRUM_ABS,
};

#[derive(Debug, Clone)]
pub struct ProductSpectrum {
    pub eigenvalues: Vec<C64>,
    pub causal_class: CausalClass,
}

impl ProductSpectrum {
    fn from_eigenvalues(eigenvalues: Vec<C64>) -> Self {
        let causal_class = classify_spectrum(&eigenvalues);
        ProductSpectrum {
            eigenvalues,
            causal_class,
        }
    }

    /// `(1/4n) sum_ij (|l_i| - |l_j|)^2` with `2n` the number of eigenvalues.
    pub fn lagrangian(&self) -> f64 {
        lagrangian_of_moduli(&self.moduli())
    }

    /// `(sum_k |l_k|)^2`.
    pub fn boundedness(&self) -> f64 {
        let s: f64 = self.moduli().iter().sum();
        s * s
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.norm()).collect()
    }
}

fn lagrangian_of_moduli(moduli: &[f64]) -> f64 {
    let two_n = moduli.len() as f64;
    let mut acc = 0.0;
    for (k, a) in moduli.iter().enumerate() {
        for b in &moduli[k + 1..] {
            acc += (a - b) * (a - b);
        }
    }
    // Each unordered pair appears twice in the double sum.
    acc / two_n
}

/// Causal class of a product spectrum.
///
/// All eigenvalues collapsing onto one real value is the boundary where a conjugate pair
/// splits into two real eigenvalues, i.e. the light cone. Rounding splits such a double
/// root by the square root of machine precision, hence the looser [`REAL_RTOL`] there.
pub fn classify_spectrum(eigenvalues: &[C64]) -> CausalClass {
    let moduli: Vec<f64> = eigenvalues.iter().map(|z| z.norm()).collect();
    let scale = moduli.iter().fold(0.0f64, |a, &b| a.max(b));
    if scale < ZERO_SPECTRUM_ABS {
        return CausalClass::Spacelike;
    }
    let tol = REAL_RTOL * scale;
    let mean = eigenvalues.iter().sum::<C64>() / eigenvalues.len() as f64;
    if mean.im.abs() <= tol && eigenvalues.iter().all(|z| (z - mean).norm() <= tol) {
        return CausalClass::Lightlike;
    }
    let min = moduli.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if (scale - min) / scale < EQUAL_MODULUS_RTOL {
        return CausalClass::Spacelike;
    }
    if eigenvalues.iter().all(|z| z.im.abs() <= tol) {
        CausalClass::Timelike
    } else {
        CausalClass::Lightlike
    }
}

/// Reduced matrix `diag(nu_x) E_x^* y E_x` whose eigenvalues are the non-trivial
/// eigenvalues of `x y`.
pub fn reduced_product(x: &OperatorPoint, y: &OperatorPoint) -> CMat {
    let (nu, e) = x.image();
    reduced_product_with(&nu, &e, y)
}

fn reduced_product_with(nu: &[f64], e: &CMat, y: &OperatorPoint) -> CMat {
    let mut a = e.adjoint() * (y.matrix() * e);
    for (r, &v) in nu.iter().enumerate() {
        a.row_mut(r).scale_mut(v);
    }
    a
}

pub fn product_spectrum(x: &OperatorPoint, y: &OperatorPoint) -> Result<ProductSpectrum> {
    check_shapes(x, y)?;
    let a = reduced_product(x, y);
    let vals = linalg::eigenvalues(&a).ok_or(Error::EigensolverFailure { i: 0, j: 0 })?;
    Ok(ProductSpectrum::from_eigenvalues(vals))
}

fn check_shapes(x: &OperatorPoint, y: &OperatorPoint) -> Result<()> {
    if x.n() != y.n() || x.f() != y.f() {
        return Err(Error::ShapeMismatch(format!(
            "(n={}, f={}) vs (n={}, f={})",
            x.n(),
            x.f(),
            y.n(),
            y.f()
        )));
    }
    Ok(())
}

pub fn lagrangian(x: &OperatorPoint, y: &OperatorPoint) -> Result<f64> {
    Ok(product_spectrum(x, y)?.lagrangian())
}

/// Trace form of the Lagrangian for spin dimension one, `max(0, tr(P^2) - tr(P)^2 / 2)`
/// with `P = x y`.
pub fn lagrangian_n1_closed(x: &OperatorPoint, y: &OperatorPoint) -> Result<f64> {
    check_shapes(x, y)?;
    if x.n() != 1 {
        return Err(Error::UnsupportedSpin {
            expected: 1,
            got: x.n(),
        });
    }
    let p = x.matrix() * y.matrix();
    let tr = p.trace();
    let tr2 = (&p * &p).trace();
    Ok((tr2 - tr * tr * 0.5).re.max(0.0))
}

/// Lagrangian of two `f = 2` points with Bloch lengths `tau`, `tau2` at angle `theta`.
pub fn lagrangian_f2_angles(tau: f64, tau2: f64, theta: f64) -> f64 {
    let b = 1.0 + tau * tau2 * theta.cos();
    let k = (tau * tau - 1.0) * (tau2 * tau2 - 1.0);
    // The discriminant is negative exactly on the open interval between the critical angles.
    ((b * b - k) / 8.0).max(0.0)
}

/// Opening angles `(theta_minus, theta_plus)` of the spacelike region for two `f = 2` points.
pub fn critical_angles(tau: f64, tau2: f64) -> (f64, f64) {
    let root = ((tau * tau - 1.0) * (tau2 * tau2 - 1.0)).max(0.0).sqrt();
    let tt = tau * tau2;
    let c_minus = ((-1.0 + root) / tt).clamp(-1.0, 1.0);
    let c_plus = ((-1.0 - root) / tt).clamp(-1.0, 1.0);
    (c_minus.acos(), c_plus.acos())
}

pub fn classify(x: &OperatorPoint, y: &OperatorPoint) -> Result<CausalClass> {
    Ok(product_spectrum(x, y)?.causal_class)
}

/// `(tau^2 - 1)^2 / 4 + tau^2 / m`.
pub fn boundedness_f2_trivial(tau: f64, m: usize) -> f64 {
    let t2 = tau * tau;
    (t2 - 1.0).powi(2) / 4.0 + t2 / m as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionReport {
    pub action: f64,
    pub boundedness: f64,
    pub pair_lagrangians: Vec<Vec<f64>>,
    pub class_matrix: Vec<Vec<CausalClass>>,
}

impl ActionReport {
    /// Counts of unordered distinct pairs per class.
    pub fn class_counts(&self) -> ClassCounts {
        let mut counts = ClassCounts::default();
        let m = self.class_matrix.len();
        for i in 0..m {
            for j in (i + 1)..m {
                match self.class_matrix[i][j] {
                    CausalClass::Spacelike => counts.spacelike += 1,
                    CausalClass::Timelike => counts.timelike += 1,
                    CausalClass::Lightlike => counts.lightlike += 1,
                }
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ClassCounts {
    pub spacelike: usize,
    pub timelike: usize,
    pub lightlike: usize,
}

/// Spectra of all unordered pairs `i <= j`, in row-major order.
pub fn pair_spectra(config: &Configuration) -> Result<Vec<((usize, usize), ProductSpectrum)>> {
    let points = config.points();
    let m = points.len();
    let images: Vec<(Vec<f64>, CMat)> = points.iter().map(|p| p.image()).collect();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let (nu, e) = &images[i];
            let a = reduced_product_with(nu, e, &points[j]);
            let vals = linalg::eigenvalues(&a).ok_or(Error::EigensolverFailure { i, j })?;
            Ok(((i, j), ProductSpectrum::from_eigenvalues(vals)))
        })
        .collect()
}

pub fn causal_action(config: &Configuration) -> Result<ActionReport> {
    let m = config.m();
    let spectra = pair_spectra(config)?;
    let mut lag = vec![vec![0.0; m]; m];
    let mut bnd = vec![vec![0.0; m]; m];
    let mut class = vec![vec![CausalClass::Spacelike; m]; m];
    for ((i, j), s) in &spectra {
        let (l, b, k) = (s.lagrangian(), s.boundedness(), s.causal_class);
        lag[*i][*j] = l;
        lag[*j][*i] = l;
        bnd[*i][*j] = b;
        bnd[*j][*i] = b;
        class[*i][*j] = k;
        class[*j][*i] = k;
    }
    let c = config.weights();
    let mut action = 0.0;
    let mut boundedness = 0.0;
    for i in 0..m {
        for j in 0..m {
            action += c[i] * c[j] * lag[i][j];
            boundedness += c[i] * c[j] * bnd[i][j];
        }
    }
    Ok(ActionReport {
        action,
        boundedness,
        pair_lagrangians: lag,
        class_matrix: class,
    })
}
