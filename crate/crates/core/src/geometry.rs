//! Spin-space projections and projected spacetime plots for spin dimension one.

use serde::Serialize;
use std::io::Write;

use crate::action::classify_spectrum;
use crate::error::{Error, Result};
use crate::linalg::{c, eig2};
use crate::operators::{CausalClass, Configuration, OperatorPoint};

/// Relative tolerance on the cone equation for a lightlike verdict.
pub const CONE_RTOL: f64 = 1e-9;
/// The negative eigenvalue of a reference point with `f > 2` must exceed this fraction of the largest.
pub const IMAGE_RTOL: f64 = 1e-12;
/// Below this `|hat_y0|` the rescaled plot coordinates are undefined.
pub const RESCALE_SINGULAR: f64 = 1e-12;
pub const DEFAULT_RESCALE_EXPONENT: f64 = 1.5;

/// Coordinates of `pi_x y pi_x = (y0 + y.sigma) / 2` in the eigenbasis of `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinProjection {
    pub y0: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub ref_tau: f64,
}

impl SpinProjection {
    pub fn spatial_norm(&self) -> f64 {
        (self.y1 * self.y1 + self.y2 * self.y2 + self.y3 * self.y3).sqrt()
    }

    /// Eigenvalues `(y0 - |y|) / 2 <= (y0 + |y|) / 2` of the projected block.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let r = self.spatial_norm();
        (0.5 * (self.y0 - r), 0.5 * (self.y0 + r))
    }

    /// `hat_y0 = y3 + y0 tau`.
    pub fn hat_y0(&self) -> f64 {
        self.y3 + self.y0 * self.ref_tau
    }

    /// `sqrt(tau^2 - 1) sqrt(y1^2 + y2^2)`.
    pub fn hat_r(&self) -> f64 {
        ((self.ref_tau * self.ref_tau - 1.0).max(0.0) * (self.y1 * self.y1 + self.y2 * self.y2)).sqrt()
    }

    /// The two eigenvalues of `x pi_x y pi_x`.
    pub fn product_eigenvalues(&self) -> [crate::C64; 2] {
        let t = self.ref_tau;
        let disc = (self.y1 * self.y1 + self.y2 * self.y2) * (1.0 - t * t) + self.hat_y0().powi(2);
        let root = c(disc, 0.0).sqrt();
        let mid = c(self.y0 + self.y3 * t, 0.0);
        [(mid + root) * 0.25, (mid - root) * 0.25]
    }
}

fn require_spin_one(p: &OperatorPoint) -> Result<()> {
    if p.n() == 1 {
        Ok(())
    } else {
        Err(Error::NotSpinOne { n: p.n() })
    }
}

pub fn spin_projection(x: &OperatorPoint, y: &OperatorPoint) -> Result<SpinProjection> {
    require_spin_one(x)?;
    require_spin_one(y)?;
    if x.f() != y.f() {
        return Err(Error::ShapeMismatch(format!("f={} vs f={}", x.f(), y.f())));
    }
    let (nu, basis) = x.image();
    let scale = nu[0].abs().max(nu[1].abs());
    if x.f() > 2 && nu[1].abs() <= IMAGE_RTOL * scale {
        return Err(Error::DegenerateImage);
    }
    let block = basis.adjoint() * y.matrix() * &basis;
    Ok(SpinProjection {
        y0: block[(0, 0)].re + block[(1, 1)].re,
        y3: block[(0, 0)].re - block[(1, 1)].re,
        y1: 2.0 * block[(1, 0)].re,
        y2: 2.0 * block[(1, 0)].im,
        ref_tau: nu[0] - nu[1],
    })
}

/// Causal relation from the cone `(tau^2 - 1)(y1^2 + y2^2)` versus `(y3 + y0 tau)^2`.
pub fn cone_classify(proj: &SpinProjection) -> CausalClass {
    let lhs = (proj.ref_tau * proj.ref_tau - 1.0) * (proj.y1 * proj.y1 + proj.y2 * proj.y2);
    let rhs = proj.hat_y0().powi(2);
    let scale = lhs.abs().max(rhs);
    if (lhs - rhs).abs() <= CONE_RTOL * scale || scale == 0.0 {
        // A vanishing product has no light cone; use the spectral rule.
        let ev = proj.product_eigenvalues();
        let size = proj.y0.abs().max(proj.spatial_norm()) * proj.ref_tau.max(1.0);
        if ev.iter().all(|l| l.norm() <= CONE_RTOL * size) {
            return classify_spectrum(&[c(0.0, 0.0), c(0.0, 0.0)]);
        }
        return CausalClass::Lightlike;
    }
    if lhs > rhs {
        CausalClass::Spacelike
    } else {
        CausalClass::Timelike
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub index: usize,
    /// Absent when rescaling hits `hat_y0 = 0`.
    pub hat_y0: Option<f64>,
    pub hat_r: Option<f64>,
    pub class: CausalClass,
    pub weight: f64,
    pub is_reference: bool,
    pub singular: bool,
}

/// One row per point relative to `config.points()[ref_index]`. With `rescale = Some(p)` all
/// coordinates are divided by `|hat_y0|^p`.
pub fn plot_rows(config: &Configuration, ref_index: usize, rescale: Option<f64>) -> Result<Vec<PlotRow>> {
    if config.n() != 1 {
        return Err(Error::NotSpinOne { n: config.n() });
    }
    let m = config.m();
    if ref_index >= m {
        return Err(Error::InvalidArgument(format!("reference index {ref_index} out of range for m={m}")));
    }
    let x = &config.points()[ref_index];
    config
        .points()
        .iter()
        .zip(config.weights())
        .enumerate()
        .map(|(i, (y, &w))| {
            let proj = spin_projection(x, y)?;
            let (h0, hr) = (proj.hat_y0(), proj.hat_r());
            let class = if i == ref_index { CausalClass::Timelike } else { cone_classify(&proj) };
            let (hat_y0, hat_r, singular) = match rescale {
                Some(_) if h0.abs() < RESCALE_SINGULAR => (None, None, true),
                Some(p) => {
                    let s = h0.abs().powf(p);
                    (Some(h0 / s), Some(hr / s), false)
                }
                None => (Some(h0), Some(hr), false),
            };
            Ok(PlotRow {
                index: i,
                hat_y0,
                hat_r,
                class,
                weight: w,
                is_reference: i == ref_index,
                singular,
            })
        })
        .collect()
}

pub const PLOT_HEADER: &str = "index,hat_y0,hat_r,class,weight,is_reference,singular";

pub fn write_plot_csv<W: Write>(rows: &[PlotRow], mut out: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    writeln!(out, "{PLOT_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:e},{},{}",
            r.index,
            opt(r.hat_y0),
            opt(r.hat_r),
            r.class,
            r.weight,
            r.is_reference,
            r.singular
        )?;
    }
    Ok(())
}

/// Eigenvalues of the `2 x 2` block of `y` on the image of `x`, computed directly.
pub fn projected_block_eigenvalues(x: &OperatorPoint, y: &OperatorPoint) -> (f64, f64) {
    let (_, basis) = x.image();
    let b = basis.adjoint() * y.matrix() * &basis;
    let (a, d) = eig2(b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]);
    let (lo, hi) = (a.re.min(d.re), a.re.max(d.re));
    (lo, hi)
}
