//! Points of the operator space and weighted counting measures on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, ONE};

/// Entrywise tolerance for Hermiticity of a constructed operator.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `tr x = 1`, scaled by `max(1, max |eigenvalue|)`.
pub const TRACE_TOL: f64 = 1e-12;
/// Signature threshold relative to the largest eigenvalue modulus.
pub const SIGNATURE_RTOL: f64 = 1e-9;
/// Symmetrisation corrections above this size are logged on ingestion.
pub const SYMMETRIZE_WARN: f64 = 1e-8;
/// Tolerance for normalisation of weights and Bloch directions.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalClass {
    Spacelike,
    Timelike,
    Lightlike,
}

impl CausalClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CausalClass::Spacelike => "spacelike",
            CausalClass::Timelike => "timelike",
            CausalClass::Lightlike => "lightlike",
        }
    }
}

impl std::fmt::Display for CausalClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A Hermitian, trace-one operator with at most `n` positive and `n` negative eigenvalues.
#[derive(Debug, Clone)]
pub struct OperatorPoint {
    matrix: CMat,
    n: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: CMat,
}

/// Validate a matrix as a point of the operator space of spin dimension `n`.
pub fn validate_point(matrix: CMat, n: usize) -> Result<OperatorPoint> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if n == 0 || rows < 2 * n {
        return Err(Error::DimensionTooSmall { n, f: rows });
    }
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            context: "operator matrix".into(),
        });
    }
    let deviation = linalg::hermitian_defect(&matrix);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let matrix = linalg::hermitian_part(&matrix);
    let (eigenvalues, eigenvectors) =
        linalg::hermitian_eigen(&matrix).ok_or(Error::EigensolverFailure { i: 0, j: 0 })?;

    let scale = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let trace: f64 = (0..rows).map(|k| matrix[(k, k)].re).sum();
    if (trace - 1.0).abs() > TRACE_TOL * scale.max(1.0) {
        return Err(Error::TraceNotOne { trace });
    }
    let tol = SIGNATURE_RTOL * scale;
    let positive = eigenvalues.iter().filter(|&&v| v > tol).count();
    let negative = eigenvalues.iter().filter(|&&v| v < -tol).count();
    if positive > n || negative > n {
        return Err(Error::SignatureViolation {
            positive,
            negative,
            n,
        });
    }
    Ok(OperatorPoint {
        matrix,
        n,
        eigenvalues,
        eigenvectors,
    })
}

impl OperatorPoint {
    /// Ingest a matrix read from a file: symmetrise first, then validate.
    pub fn from_file_matrix(matrix: CMat, n: usize) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let deviation = linalg::hermitian_defect(&matrix);
        if deviation > SYMMETRIZE_WARN {
            log::warn!("symmetrising operator with Hermitian defect {deviation:.3e}");
        }
        validate_point(linalg::hermitian_part(&matrix), n)
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    /// The `2n` eigenvalues of largest modulus in descending order, with the
    /// matching eigenvectors as the columns of an `f x 2n` matrix.
    pub fn image(&self) -> (Vec<f64>, CMat) {
        let f = self.f();
        let k = 2 * self.n;
        let mut idx: Vec<usize> = (0..f).collect();
        idx.sort_by(|&a, &b| {
            self.eigenvalues[b]
                .abs()
                .total_cmp(&self.eigenvalues[a].abs())
        });
        idx.truncate(k);
        idx.sort_by(|&a, &b| self.eigenvalues[b].total_cmp(&self.eigenvalues[a]));
        let values = idx.iter().map(|&i| self.eigenvalues[i]).collect();
        let mut basis = CMat::zeros(f, k);
        for (dst, &src) in idx.iter().enumerate() {
            basis.set_column(dst, &self.eigenvectors.column(src));
        }
        (values, basis)
    }

    /// Conjugate by a unitary, `U x U^*`.
    pub fn conjugated(&self, u: &CMat) -> Result<Self> {
        validate_point(linalg::hermitian_part(&(u * &self.matrix * u.adjoint())), self.n)
    }
}

/// A normalised weighted counting measure.
#[derive(Debug, Clone)]
pub struct Configuration {
    points: Vec<OperatorPoint>,
    weights: Vec<f64>,
}

impl Configuration {
    pub fn new(points: Vec<OperatorPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("configuration has no points".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let (n, f) = (points[0].n(), points[0].f());
        if points.iter().any(|p| p.n() != n || p.f() != f) {
            return Err(Error::ShapeMismatch(
                "points differ in spin dimension or matrix size".into(),
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, expected 1")));
        }
        Ok(Configuration { points, weights })
    }

    pub fn equal_weights(points: Vec<OperatorPoint>) -> Result<Self> {
        let m = points.len();
        Self::new(points, vec![1.0 / m as f64; m])
    }

    pub fn points(&self) -> &[OperatorPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn n(&self) -> usize {
        self.points[0].n()
    }

    pub fn f(&self) -> usize {
        self.points[0].f()
    }
}

/// Bloch-type coordinates `(tau, x)` of an `f = 2` operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochCoords {
    tau: f64,
    direction: [f64; 3],
}

impl BlochCoords {
    pub fn new(tau: f64, direction: [f64; 3]) -> Result<Self> {
        if !tau.is_finite() || direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "Bloch coordinates".into(),
            });
        }
        if tau < 1.0 {
            return Err(Error::TauBelowOne { tau });
        }
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "direction has norm {norm}, expected 1"
            )));
        }
        Ok(BlochCoords { tau, direction })
    }

    /// Like [`BlochCoords::new`] but rescales `direction` to unit length first.
    pub fn normalized(tau: f64, direction: [f64; 3]) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero direction".into()));
        }
        Self::new(tau, direction.map(|v| v / norm))
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    /// Angle between the directions of two points.
    pub fn angle_to(&self, other: &BlochCoords) -> f64 {
        let dot: f64 = (0..3).map(|k| self.direction[k] * other.direction[k]).sum();
        dot.clamp(-1.0, 1.0).acos()
    }
}

/// `F_tau(x) = (1 + tau x.sigma) / 2`.
pub fn f2_from_bloch(coords: BlochCoords) -> OperatorPoint {
    let s = linalg::pauli();
    let mut m = CMat::identity(2, 2);
    for (k, sk) in s.iter().enumerate() {
        m += sk * c(coords.tau * coords.direction[k], 0.0);
    }
    m *= c(0.5, 0.0);
    validate_point(m, 1).expect("Bloch image is a valid operator")
}

/// Inverse of [`f2_from_bloch`].
pub fn f2_to_bloch(x: &OperatorPoint) -> Result<BlochCoords> {
    bloch_of_matrix(x.matrix())
}

/// Bloch coordinates of any Hermitian trace-one `2 x 2` matrix; fails inside the unit ball.
pub fn bloch_of_matrix(m: &CMat) -> Result<BlochCoords> {
    if m.shape() != (2, 2) {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            got: m.nrows(),
        });
    }
    let v = [
        2.0 * m[(0, 1)].re,
        -2.0 * m[(0, 1)].im,
        (m[(0, 0)] - m[(1, 1)]).re,
    ];
    let tau = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if tau < 1.0 - 1e-12 {
        return Err(Error::TauBelowOne { tau });
    }
    BlochCoords::new(tau.max(1.0), v.map(|a| a / tau))
}

/// Identity-padded diagonal matrix helper used by tests and oracles.
pub fn diagonal(values: &[f64]) -> CMat {
    let mut m = CMat::zeros(values.len(), values.len());
    for (k, &v) in values.iter().enumerate() {
        m[(k, k)] = ONE * v;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_distance;

    #[test]
    fn projector_is_valid() {
        let p = validate_point(diagonal(&[1.0, 0.0]), 1).unwrap();
        assert_eq!(p.eigenvalues(), &[0.0, 1.0]);
    }

    #[test]
    fn tau_two_spectrum() {
        let p = validate_point(diagonal(&[1.5, -0.5]), 1).unwrap();
        assert!((p.eigenvalues()[0] + 0.5).abs() < 1e-15);
        assert!((p.eigenvalues()[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn too_many_positive_eigenvalues() {
        match validate_point(diagonal(&[1.0, 1.0, -1.0]), 1) {
            Err(Error::SignatureViolation { positive, negative, .. }) => {
                assert_eq!((positive, negative), (2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_trace_and_non_hermitian() {
        assert!(matches!(
            validate_point(diagonal(&[0.5, 0.0]), 1),
            Err(Error::TraceNotOne { .. })
        ));
        let mut m = diagonal(&[1.0, 0.0]);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(validate_point(m, 1), Err(Error::NotHermitian { .. })));
        assert!(matches!(
            validate_point(CMat::zeros(2, 3), 1),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn file_ingestion_symmetrises() {
        let mut m = diagonal(&[1.0, 0.0]);
        m[(0, 1)] = c(1e-7, 0.0);
        let p = OperatorPoint::from_file_matrix(m, 1).unwrap();
        assert_eq!(p.matrix()[(0, 1)], p.matrix()[(1, 0)].conj());
    }

    #[test]
    fn bloch_examples() {
        let e3 = BlochCoords::new(1.0, [0.0, 0.0, 1.0]).unwrap();
        assert!(frobenius_distance(f2_from_bloch(e3).matrix(), &diagonal(&[1.0, 0.0])) < 1e-15);

        let t2 = BlochCoords::new(2.0, [0.0, 0.0, 1.0]).unwrap();
        assert!(frobenius_distance(f2_from_bloch(t2).matrix(), &diagonal(&[1.5, -0.5])) < 1e-15);

        let e1 = BlochCoords::new(1.0, [1.0, 0.0, 0.0]).unwrap();
        let half = CMat::from_element(2, 2, c(0.5, 0.0));
        let x = f2_from_bloch(e1);
        assert!(frobenius_distance(x.matrix(), &half) < 1e-15);
        let back = f2_to_bloch(&x).unwrap();
        assert!((back.tau() - 1.0).abs() < 1e-12);
        assert!((back.direction()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inside_unit_ball_is_rejected() {
        // diag(0.6, 0.4) has eigenvalue gap 0.2 and so tau = 0.2.
        match bloch_of_matrix(&diagonal(&[0.6, 0.4])) {
            Err(Error::TauBelowOne { tau }) => assert!((tau - 0.2).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn image_orders_descending() {
        let p = validate_point(diagonal(&[-0.5, 0.0, 1.5]), 1).unwrap();
        let (vals, basis) = p.image();
        assert_eq!(vals, vec![1.5, -0.5]);
        assert!((basis[(2, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((basis[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn configuration_checks_weights() {
        let p = validate_point(diagonal(&[1.0, 0.0]), 1).unwrap();
        assert!(Configuration::new(vec![p.clone(), p.clone()], vec![0.5, 0.6]).is_err());
        assert!(Configuration::new(vec![p.clone()], vec![1.0, 0.0]).is_err());
        let cfg = Configuration::equal_weights(vec![p.clone(), p]).unwrap();
        assert_eq!(cfg.weights(), &[0.5, 0.5]);
    }
}
