//! Causal action as a function of the unconstrained parameters, its analytic gradient,
//! and a central finite-difference checker.
//!
//! The gradient is a hand-written reverse pass. For a pair `(i, j)` the non-trivial
//! eigenvalues of `x_i x_j` are those of `A = L_i C L_j C^*` with `C = E_i^* E_j`, where
//! `E_i` holds the first `2n` columns of `U_i` and `L_i = diag(nu_i)`. Cotangents are
//! propagated as matrices `M` with `dS = Re tr(M dX)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::action::classify_spectrum;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};
use crate::operators::CausalClass;
use crate::parametrize::{decode_points, DecodedPoint, Shape, UnconstrainedParams};

/// Eigenvalues closer than this (relative to the spectral scale) form one cluster.
pub const DEGENERACY_RTOL: f64 = 1e-10;
/// Relative eigenvalue gap below which a pair is reported as close to a causal boundary.
pub const SMOOTH_GAP_RTOL: f64 = 1e-3;
/// Floor of the denominator in the finite-difference relative error.
pub const FD_REL_FLOOR: f64 = 1e-4;

struct PairTerm {
    value: f64,
    /// Cotangent of the reduced product: `dL = Re tr(Z dA)`. `None` when it vanishes.
    z: Option<CMat>,
}

fn reduced(nu_i: &[f64], cmat: &CMat, nu_j: &[f64]) -> CMat {
    let k = nu_i.len();
    let mut a = CMat::zeros(k, k);
    // A = L_i C L_j C^*
    for r in 0..k {
        for s in 0..k {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..k {
                acc += cmat[(r, t)] * nu_j[t] * cmat[(s, t)].conj();
            }
            a[(r, s)] = acc * nu_i[r];
        }
    }
    a
}

fn pair_term_n1(a: &CMat, want_grad: bool) -> PairTerm {
    let t = a.trace();
    let t2 = (a * a).trace();
    let d = (t2 - t * t * 0.5).re;
    if d <= 0.0 {
        return PairTerm { value: 0.0, z: None };
    }
    let z = want_grad.then(|| {
        let mut z = a * c(2.0, 0.0);
        for k in 0..2 {
            z[(k, k)] -= t;
        }
        z
    });
    PairTerm { value: d, z }
}

fn pair_term_general(a: &CMat, want_grad: bool) -> Option<PairTerm> {
    let lambda = linalg::eigenvalues(a)?;
    let two_n = lambda.len();
    let moduli: Vec<f64> = lambda.iter().map(|z| z.norm()).collect();
    let total: f64 = moduli.iter().sum();
    let mut value = 0.0;
    for (k, x) in moduli.iter().enumerate() {
        for y in &moduli[k + 1..] {
            value += (x - y) * (x - y);
        }
    }
    value /= two_n as f64;
    if !want_grad {
        return Some(PairTerm { value, z: None });
    }
    let scale = moduli.iter().fold(0.0f64, |a, &b| a.max(b));
    if scale == 0.0 || value == 0.0 {
        return Some(PairTerm { value, z: None });
    }
    let n = two_n as f64 / 2.0;

    // Group eigenvalues into clusters of numerically equal values.
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for &l in &lambda {
        match clusters
            .iter_mut()
            .find(|(mu, _)| (mu - l).norm() <= DEGENERACY_RTOL * scale)
        {
            Some((mu, count)) => {
                *mu = (*mu * *count as f64 + l) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => clusters.push((l, 1)),
        }
    }
    let mut z = CMat::zeros(two_n, two_n);
    let id = CMat::identity(two_n, two_n);
    for (ci, &(mu, _)) in clusters.iter().enumerate() {
        let r = mu.norm();
        if r <= DEGENERACY_RTOL * scale {
            // Subgradient zero at the modulus kink.
            continue;
        }
        let coef = mu.conj() / r * (2.0 * r - total / n);
        let mut proj = id.clone();
        for (cj, &(nu, _)) in clusters.iter().enumerate() {
            if ci != cj {
                proj = proj * (a - &id * nu) / (mu - nu);
            }
        }
        z += proj * coef;
    }
    Some(PairTerm { value, z: Some(z) })
}

fn pair_term(n: usize, a: &CMat, want_grad: bool, i: usize, j: usize) -> Result<PairTerm> {
    if n == 1 {
        Ok(pair_term_n1(a, want_grad))
    } else {
        pair_term_general(a, want_grad).ok_or(Error::EigensolverFailure { i, j })
    }
}

fn pair_weight(c: &[f64], i: usize, j: usize) -> f64 {
    if i == j {
        c[i] * c[i]
    } else {
        2.0 * c[i] * c[j]
    }
}

/// Causal action of the configuration encoded by `params`.
pub fn action_of_params(params: &UnconstrainedParams) -> Result<f64> {
    let (weights, points) = decode_points(params)?;
    let bases: Vec<CMat> = points.iter().map(DecodedPoint::image_basis).collect();
    let m = points.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in i..m {
            let cm = bases[i].adjoint() * &bases[j];
            let a = reduced(&points[i].spectrum.nu, &cm, &points[j].spectrum.nu);
            total += pair_weight(&weights, i, j) * pair_term(params.shape.n, &a, false, i, j)?.value;
        }
    }
    Ok(total)
}

pub fn grad(params: &UnconstrainedParams) -> Result<Vec<f64>> {
    Ok(value_and_grad(params)?.1)
}

/// Action and its gradient in the flat parameter order.
pub fn value_and_grad(params: &UnconstrainedParams) -> Result<(f64, Vec<f64>)> {
    let shape = params.shape;
    let Shape { n, f, m } = shape;
    let k = 2 * n;
    let (weights, points) = decode_points(params)?;
    let bases: Vec<CMat> = points.iter().map(DecodedPoint::image_basis).collect();

    let mut lag = vec![vec![0.0; m]; m];
    let mut m_e: Vec<CMat> = (0..m).map(|_| CMat::zeros(k, f)).collect();
    let mut g_nu: Vec<Vec<f64>> = vec![vec![0.0; k]; m];
    let mut total = 0.0;

    for i in 0..m {
        for j in i..m {
            let (nu_i, nu_j) = (&points[i].spectrum.nu, &points[j].spectrum.nu);
            let cm = bases[i].adjoint() * &bases[j];
            let a = reduced(nu_i, &cm, nu_j);
            let term = pair_term(n, &a, true, i, j)?;
            lag[i][j] = term.value;
            lag[j][i] = term.value;
            let w = pair_weight(&weights, i, j);
            total += w * term.value;
            let Some(z) = term.z else { continue };
            let z = z * c(w, 0.0);

            let li = diag(nu_i);
            let lj = diag(nu_j);
            let cs = cm.adjoint();
            let c_lj_cs = &cm * &lj * &cs;
            let cs_z_li_c = &cs * &z * &li * &cm;
            let prod_i = &c_lj_cs * &z;
            for r in 0..k {
                g_nu[i][r] += prod_i[(r, r)].re;
                g_nu[j][r] += cs_z_li_c[(r, r)].re;
            }
            let mc = &lj * &cs * &z * &li + &lj * &cs * &li * z.adjoint();
            m_e[j] += &mc * bases[i].adjoint();
            m_e[i] += mc.adjoint() * bases[j].adjoint();
        }
    }

    let layout = shape.layout();
    let mut g = vec![0.0; shape.dim()];

    // Weights through the softmax.
    let gc: Vec<f64> = (0..m)
        .map(|i| (0..m).map(|j| 2.0 * weights[j] * lag[i][j]).sum())
        .collect();
    let mean: f64 = (0..m).map(|i| weights[i] * gc[i]).sum();
    for i in 0..m {
        g[i] = weights[i] * (gc[i] - mean);
    }

    for (i, point) in points.iter().enumerate() {
        // Spectrum through the trace normalisation and the sign-flip rule.
        let nu = &point.spectrum.nu;
        let dot: f64 = nu.iter().zip(&g_nu[i]).map(|(a, b)| a * b).sum();
        for slot in 0..k {
            let dmu = nu[slot] * (g_nu[i][slot] - dot);
            let positive_slot = slot < n;
            let is_plus = positive_slot != point.spectrum.flipped;
            let base = if is_plus { layout.mu_plus } else { layout.mu_minus };
            g[base + i * n + slot % n] += dmu;
        }

        // Unitary through the matrix exponential of the generator.
        let q = exp_backprop(point, &m_e[i]);
        let b1_off = layout.b1 + 2 * i * layout.b1_len;
        for r in 0..k {
            for s in 0..k {
                if r == s {
                    continue;
                }
                let idx = b1_off + 2 * (r * k + s);
                g[idx] = (q[(s, r)] + q[(r, s)]).re;
                g[idx + 1] = q[(r, s)].im - q[(s, r)].im;
            }
        }
        let w = f - k;
        let b2_off = layout.b2 + 2 * i * layout.b2_len;
        for r in 0..k {
            for p in 0..w {
                let idx = b2_off + 2 * (r * w + p);
                let (lo, hi) = (q[(k + p, r)], q[(r, k + p)]);
                g[idx] = (lo + hi).re;
                g[idx + 1] = hi.im - lo.im;
            }
        }
    }
    Ok((total, g))
}

fn diag(values: &[f64]) -> CMat {
    let mut d = CMat::zeros(values.len(), values.len());
    for (k, &v) in values.iter().enumerate() {
        d[(k, k)] = c(v, 0.0);
    }
    d
}

/// Pull back a cotangent of the leading `2n` columns of `U = exp(-iH)` to `H`:
/// returns `Q` with `dS = Re tr(Q dH)`.
fn exp_backprop(point: &DecodedPoint, m_e: &CMat) -> CMat {
    let v = &point.exp.v;
    let h = &point.exp.h;
    let f = v.nrows();
    let k = m_e.nrows();
    let mut m_u = CMat::zeros(f, f);
    m_u.rows_mut(0, k).copy_from(m_e);
    let mut w = v.adjoint() * m_u * v;
    for r in 0..f {
        for s in 0..f {
            // Divided difference of exp(-ih), written in a form that is stable for close h.
            let half = 0.5 * (h[s] - h[r]);
            let sinc = if half.abs() < 1e-8 { 1.0 } else { half.sin() / half };
            let dd = -I * (-I * (0.5 * (h[r] + h[s]))).exp() * sinc;
            w[(r, s)] *= dd;
        }
    }
    v * w * v.adjoint()
}

/// Objective on the flat parameter vector, `+inf` where decoding fails.
pub fn flat_value(shape: Shape, x: &[f64]) -> f64 {
    UnconstrainedParams::from_flat(shape, x)
        .and_then(|p| action_of_params(&p))
        .unwrap_or(f64::INFINITY)
}

/// Objective and gradient on the flat vector, `(+inf, 0)` where decoding fails.
pub fn flat_value_and_grad(shape: Shape, x: &[f64]) -> (f64, Vec<f64>) {
    match UnconstrainedParams::from_flat(shape, x).and_then(|p| value_and_grad(&p)) {
        Ok(r) => r,
        Err(_) => (f64::INFINITY, vec![0.0; x.len()]),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub step: f64,
    pub smooth: bool,
}

/// Relative error with a floored denominator, as used by the checkers.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_REL_FLOOR)
}

/// Central differences of `func` against `gradient` at `x`; returns `(max error, index)`.
pub fn fd_compare<F>(func: F, gradient: &[f64], x: &[f64], step: f64) -> (f64, usize)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let errs: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|idx| {
            let mut xp = x.to_vec();
            xp[idx] += step;
            let fp = func(&xp);
            xp[idx] = x[idx] - step;
            let fm = func(&xp);
            relative_error(gradient[idx], (fp - fm) / (2.0 * step))
        })
        .collect();
    errs.iter()
        .enumerate()
        .fold((0.0, 0), |(best, bi), (i, &e)| if e > best { (e, i) } else { (best, bi) })
}

/// True when no pair has eigenvalues close to a causal boundary or a modulus kink.
pub fn is_smooth(params: &UnconstrainedParams) -> Result<bool> {
    let (_, points) = decode_points(params)?;
    let bases: Vec<CMat> = points.iter().map(DecodedPoint::image_basis).collect();
    let m = points.len();
    for i in 0..m {
        for j in i..m {
            let cm = bases[i].adjoint() * &bases[j];
            let a = reduced(&points[i].spectrum.nu, &cm, &points[j].spectrum.nu);
            let lambda = linalg::eigenvalues(&a).ok_or(Error::EigensolverFailure { i, j })?;
            let scale = lambda.iter().fold(0.0f64, |s, z| s.max(z.norm()));
            if scale < 1e-12 {
                continue;
            }
            for (p, x) in lambda.iter().enumerate() {
                if params.shape.n > 1 && x.norm() < SMOOTH_GAP_RTOL * scale {
                    return Ok(false);
                }
                for y in &lambda[p + 1..] {
                    if (x - y).norm() < SMOOTH_GAP_RTOL * scale {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

pub fn fd_check(params: &UnconstrainedParams, step: f64) -> Result<GradCheckReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let shape = params.shape;
    let g = grad(params)?;
    let x = params.to_flat();
    let (max_rel_error, worst_index) = fd_compare(|y| flat_value(shape, y), &g, &x, step);
    Ok(GradCheckReport {
        max_rel_error,
        worst_index,
        step,
        smooth: is_smooth(params)?,
    })
}

/// Causal class of the pair `(i, j)` of decoded parameters, via the reduced product.
pub fn pair_class(params: &UnconstrainedParams, i: usize, j: usize) -> Result<CausalClass> {
    let (_, points) = decode_points(params)?;
    let cm = points[i].image_basis().adjoint() * points[j].image_basis();
    let a = reduced(&points[i].spectrum.nu, &cm, &points[j].spectrum.nu);
    let lambda = linalg::eigenvalues(&a).ok_or(Error::EigensolverFailure { i, j })?;
    Ok(classify_spectrum(&lambda))
}
