//! Unconstrained real parameters and their decoding into configurations.
//!
//! Flat parameter order: `c~` (m), `mu+` (m x n, row-major), `mu-` (m x n), then for every
//! point the `2n x 2n` block `B1` row-major with interleaved `(re, im)`, then for every point
//! the `2n x (f - 2n)` block `B2` in the same layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I, ZERO};
use crate::operators::{validate_point, Configuration};

/// `|Gamma|` below this is rejected as a degenerate trace normalisation.
pub const GAMMA_MIN: f64 = 1e-12;
pub const DEFAULT_SIGMA_C: f64 = 0.01;
pub const DEFAULT_SIGMA_MU: f64 = 0.01;
const MU0_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub n: usize,
    pub f: usize,
    pub m: usize,
}

impl Shape {
    pub fn new(n: usize, f: usize, m: usize) -> Result<Self> {
        if n == 0 || f < 2 * n {
            return Err(Error::DimensionTooSmall { n, f });
        }
        if m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        Ok(Shape { n, f, m })
    }

    pub fn dim(&self) -> usize {
        self.m * (4 * self.f * self.n + 2 * self.n + 1)
    }

    pub(crate) fn layout(&self) -> Layout {
        let Shape { n, f, m } = *self;
        let b1_len = 4 * n * n;
        let b2_len = 2 * n * (f - 2 * n);
        let mu_plus = m;
        let mu_minus = mu_plus + m * n;
        let b1 = mu_minus + m * n;
        let b2 = b1 + 2 * m * b1_len;
        Layout {
            mu_plus,
            mu_minus,
            b1,
            b2,
            b1_len,
            b2_len,
        }
    }
}

/// Offsets into the flat parameter vector. Complex blocks take two reals per entry.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub mu_plus: usize,
    pub mu_minus: usize,
    pub b1: usize,
    pub b2: usize,
    pub b1_len: usize,
    pub b2_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedParams {
    pub shape: Shape,
    pub c_tilde: Vec<f64>,
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
    pub b1: Vec<C64>,
    pub b2: Vec<C64>,
}

impl UnconstrainedParams {
    pub fn zeros(shape: Shape) -> Self {
        let l = shape.layout();
        UnconstrainedParams {
            shape,
            c_tilde: vec![0.0; shape.m],
            mu_plus: vec![0.0; shape.m * shape.n],
            mu_minus: vec![0.0; shape.m * shape.n],
            b1: vec![ZERO; shape.m * l.b1_len],
            b2: vec![ZERO; shape.m * l.b2_len],
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.shape.dim());
        out.extend_from_slice(&self.c_tilde);
        out.extend_from_slice(&self.mu_plus);
        out.extend_from_slice(&self.mu_minus);
        for z in self.b1.iter().chain(&self.b2) {
            out.push(z.re);
            out.push(z.im);
        }
        out
    }

    pub fn from_flat(shape: Shape, flat: &[f64]) -> Result<Self> {
        if flat.len() != shape.dim() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                shape.dim(),
                flat.len()
            )));
        }
        let l = shape.layout();
        let complex = |from: usize, count: usize| -> Vec<C64> {
            (0..count)
                .map(|k| c(flat[from + 2 * k], flat[from + 2 * k + 1]))
                .collect()
        };
        Ok(UnconstrainedParams {
            shape,
            c_tilde: flat[..l.mu_plus].to_vec(),
            mu_plus: flat[l.mu_plus..l.mu_minus].to_vec(),
            mu_minus: flat[l.mu_minus..l.b1].to_vec(),
            b1: complex(l.b1, shape.m * l.b1_len),
            b2: complex(l.b2, shape.m * l.b2_len),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.c_tilde
            .iter()
            .chain(&self.mu_plus)
            .chain(&self.mu_minus)
            .all(|v| v.is_finite())
            && self
                .b1
                .iter()
                .chain(&self.b2)
                .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// The `2n x 2n` block `B1` of point `i`.
    pub fn b1_block(&self, i: usize) -> CMat {
        let k = 2 * self.shape.n;
        let len = k * k;
        CMat::from_row_slice(k, k, &self.b1[i * len..(i + 1) * len])
    }

    /// The `2n x (f - 2n)` block `B2` of point `i`.
    pub fn b2_block(&self, i: usize) -> CMat {
        let k = 2 * self.shape.n;
        let w = self.shape.f - k;
        let len = k * w;
        CMat::from_row_slice(k, w, &self.b2[i * len..(i + 1) * len])
    }
}

/// Softmax with a max shift; constant input gives exactly uniform weights.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let top = x.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = x.iter().map(|v| (v - top).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Non-trivial spectrum of one point: positive slots first, `tr = 1`.
#[derive(Debug, Clone)]
pub struct PointSpectrum {
    pub nu: Vec<f64>,
    /// True when the roles of `mu+` and `mu-` were exchanged because `Gamma < 0`.
    pub flipped: bool,
}

pub fn point_spectrum(mu_plus: &[f64], mu_minus: &[f64], point: usize) -> Result<PointSpectrum> {
    let ep: Vec<f64> = mu_plus.iter().map(|v| v.exp()).collect();
    let em: Vec<f64> = mu_minus.iter().map(|v| v.exp()).collect();
    let gamma: f64 = ep.iter().sum::<f64>() - em.iter().sum::<f64>();
    if !gamma.is_finite() {
        return Err(Error::NonFinite {
            context: format!("trace normalisation of point {point}"),
        });
    }
    if gamma.abs() < GAMMA_MIN {
        return Err(Error::DegenerateTrace { point });
    }
    let flipped = gamma < 0.0;
    let (pos, neg, g) = if flipped {
        (&em, &ep, -gamma)
    } else {
        (&ep, &em, gamma)
    };
    let nu = pos
        .iter()
        .map(|v| v / g)
        .chain(neg.iter().map(|v| -v / g))
        .collect();
    Ok(PointSpectrum { nu, flipped })
}

/// Hermitian generator `[[B1 + B1^*, B2], [B2^*, 0]]` with the diagonal of the first block zeroed.
pub fn generator(b1: &CMat, b2: &CMat) -> CMat {
    let k = b1.nrows();
    let f = k + b2.ncols();
    let mut h = CMat::zeros(f, f);
    for r in 0..k {
        for s in 0..k {
            if r != s {
                h[(r, s)] = b1[(r, s)] + b1[(s, r)].conj();
            }
        }
        for p in 0..b2.ncols() {
            h[(r, k + p)] = b2[(r, p)];
            h[(k + p, r)] = b2[(r, p)].conj();
        }
    }
    h
}

/// `exp(-i H)` of a Hermitian generator together with its eigen-decomposition `(h, V)`.
#[derive(Debug, Clone)]
pub struct UnitaryExp {
    pub u: CMat,
    pub h: Vec<f64>,
    pub v: CMat,
}

pub fn exp_minus_i(hmat: &CMat) -> Result<UnitaryExp> {
    let (h, v) = linalg::hermitian_eigen(hmat).ok_or(Error::EigensolverFailure { i: 0, j: 0 })?;
    let mut scaled = v.clone();
    for (k, &hk) in h.iter().enumerate() {
        let phase = (-I * hk).exp();
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    let u = scaled * v.adjoint();
    Ok(UnitaryExp { u, h, v })
}

pub fn unitary_from_generator(b1: &CMat, b2: &CMat) -> Result<CMat> {
    if b1.iter().chain(b2.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            context: "unitary generator".into(),
        });
    }
    Ok(exp_minus_i(&generator(b1, b2))?.u)
}

/// Everything decode computes for one point, kept for the gradient.
#[derive(Debug, Clone)]
pub struct DecodedPoint {
    pub spectrum: PointSpectrum,
    pub exp: UnitaryExp,
}

impl DecodedPoint {
    /// First `2n` columns of the unitary, spanning the image of the operator.
    pub fn image_basis(&self) -> CMat {
        let k = self.spectrum.nu.len();
        self.exp.u.columns(0, k).into_owned()
    }

    pub fn matrix(&self) -> CMat {
        let f = self.exp.u.nrows();
        let mut values = self.spectrum.nu.clone();
        values.resize(f, 0.0);
        linalg::from_spectrum(&self.exp.u, &values)
    }
}

pub fn decode_points(params: &UnconstrainedParams) -> Result<(Vec<f64>, Vec<DecodedPoint>)> {
    if !params.is_finite() {
        return Err(Error::NonFinite {
            context: "parameters".into(),
        });
    }
    let Shape { n, m, .. } = params.shape;
    let weights = softmax(&params.c_tilde);
    let points = (0..m)
        .map(|i| {
            let spectrum = point_spectrum(
                &params.mu_plus[i * n..(i + 1) * n],
                &params.mu_minus[i * n..(i + 1) * n],
                i,
            )?;
            let exp = exp_minus_i(&generator(&params.b1_block(i), &params.b2_block(i)))
                .map_err(|_| Error::EigensolverFailure { i, j: i })?;
            Ok(DecodedPoint { spectrum, exp })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((weights, points))
}

pub fn decode(params: &UnconstrainedParams) -> Result<Configuration> {
    let (weights, points) = decode_points(params)?;
    let n = params.shape.n;
    let ops = points
        .iter()
        .map(|p| validate_point(p.matrix(), n))
        .collect::<Result<Vec<_>>>()?;
    Configuration::new(ops, weights)
}

pub fn init_random(
    shape: Shape,
    seed: u64,
    sigma_c: f64,
    sigma_mu: f64,
    mu0: f64,
) -> Result<UnconstrainedParams> {
    if !(mu0 > 0.0) || !mu0.is_finite() {
        return Err(Error::InvalidArgument(format!("mu0 must be positive, got {mu0}")));
    }
    let normal = |mean: f64, sd: f64| {
        Normal::new(mean, sd).map_err(|e| Error::InvalidArgument(format!("normal({mean}, {sd}): {e}")))
    };
    let Shape { n, m, .. } = shape;
    let l = shape.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dc = normal(1.0, sigma_c)?;
    let dp = normal((mu0 + 1.0 / n as f64).ln(), sigma_mu)?;
    let dm = normal(mu0.ln(), sigma_mu)?;

    let mut p = UnconstrainedParams::zeros(shape);
    for v in p.c_tilde.iter_mut() {
        *v = dc.sample(&mut rng);
    }
    for i in 0..m {
        loop {
            for k in 0..n {
                p.mu_plus[i * n + k] = dp.sample(&mut rng);
                p.mu_minus[i * n + k] = dm.sample(&mut rng);
            }
            let ok = point_spectrum(
                &p.mu_plus[i * n..(i + 1) * n],
                &p.mu_minus[i * n..(i + 1) * n],
                i,
            );
            if ok.is_ok() {
                break;
            }
        }
    }
    let mut phase = || c(rng.random_range(-PI..PI), rng.random_range(-PI..PI));
    for z in p.b1.iter_mut().take(m * l.b1_len) {
        *z = phase();
    }
    for z in p.b2.iter_mut().take(m * l.b2_len) {
        *z = phase();
    }
    Ok(p)
}

/// Default `mu0` schedule in `m` for spin dimensions one and two, floored at 0.01.
pub fn default_mu0(n: usize, m: usize) -> Result<f64> {
    let m = m as f64;
    let raw = match n {
        1 => 1.25 * (3f64.powf(0.25) * (m / (2.0 * PI)).sqrt() - 1.0),
        2 => 0.25 * ((3.0 * m).powf(0.25) / PI.sqrt() - 1.0),
        _ => return Err(Error::UnsupportedSpin { expected: 2, got: n }),
    };
    Ok(if raw > MU0_FLOOR { raw } else { MU0_FLOOR })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DofReport {
    pub d_unconstrained: usize,
    pub d_effective: usize,
    pub eliminated: usize,
}

/// Parameter count `D` and the dimension `D'` of the constrained problem.
pub fn dof(n: usize, f: usize, m: usize) -> Result<DofReport> {
    let shape = Shape::new(n, f, m)?;
    let d = shape.dim();
    let d_eff = m * (4 * f * n - 4 * n * n) - 1;
    Ok(DofReport {
        d_unconstrained: d,
        d_effective: d_eff,
        eliminated: d - d_eff,
    })
}

/// Parameters whose weights and spectra reproduce `config`, with random unitary generators.
///
/// The eigenvectors are not matched: the map from parameters to configurations is many-to-one
/// and has no convenient inverse. Useful to warm-start from an oracle's weights and spectra.
pub fn spectral_warm_start(config: &Configuration, seed: u64) -> Result<UnconstrainedParams> {
    let shape = Shape::new(config.n(), config.f(), config.m())?;
    let mut p = init_random(shape, seed, 0.0, 0.0, 1.0)?;
    let n = shape.n;
    for (i, w) in config.weights().iter().enumerate() {
        p.c_tilde[i] = w.max(1e-300).ln();
    }
    for (i, point) in config.points().iter().enumerate() {
        let (nu, _) = point.image();
        for k in 0..n {
            // Tiny or vanishing eigenvalues map to a large negative exponent.
            p.mu_plus[i * n + k] = nu[k].max(1e-12).ln();
            p.mu_minus[i * n + k] = (-nu[n + k]).max(1e-12).ln();
        }
    }
    Ok(p)
}
