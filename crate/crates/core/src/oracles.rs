//! Closed-form reference configurations, bounds and asymptotic predictions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::action::{causal_action, critical_angles, lagrangian_f2_angles};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, I, ONE, ZERO};
use crate::operators::{
    diagonal, f2_from_bloch, f2_to_bloch, validate_point, BlochCoords, Configuration, OperatorPoint,
};

/// Density of the hexagonal circle packing in the plane.
pub const DELTA_2: f64 = 0.906_899_682_117_108_9; // pi sqrt(3) / 6
/// Density of the densest lattice packing in four dimensions.
pub const DELTA_4: f64 = 0.616_850_275_068_084_9; // pi^2 / 16
/// Off-diagonal Lagrangians below this count as vanishing.
pub const TRIVIAL_TOL: f64 = 1e-10;
/// Angular tolerance for counting lightlike partners.
pub const LIGHTLIKE_ANGLE_TOL: f64 = 1e-8;
const TAMMES_RESTARTS: u64 = 5;
const RING_DIRECTIONS: usize = 64;
const RING_RADIUS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePrediction {
    pub label: String,
    pub tau: Option<f64>,
    pub action: f64,
    pub boundedness: Option<f64>,
    pub regime: Regime,
}

impl OraclePrediction {
    fn new(label: &str, tau: Option<f64>, action: f64, boundedness: Option<f64>, regime: Regime) -> Self {
        OraclePrediction {
            label: label.to_string(),
            tau,
            action,
            boundedness,
            regime,
        }
    }
}

pub fn iso_lagrangian(tau: f64, tau2: f64) -> f64 {
    let (a, b) = (tau * tau, tau2 * tau2);
    ((a - 1.0) * (b - 1.0)).powf(1.5) / (12.0 * tau * tau2) + (3.0 * (a + b) - 2.0 * a * b) / 24.0
}

#[derive(Debug, Clone)]
pub struct SpherePoints {
    /// Unit vectors in `R^(d+1)`.
    pub points: Vec<Vec<f64>>,
    pub min_angle: f64,
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d.clamp(-1.0, 1.0).acos()
}

pub fn min_pairwise_angle(points: &[Vec<f64>]) -> f64 {
    let mut best = PI;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min(angle(a, b));
        }
    }
    best
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Soft minimum `-(1/s) log sum exp(-s d_ij)` of the chord lengths, and its gradient.
fn soft_min(points: &[Vec<f64>], s: f64) -> (f64, Vec<Vec<f64>>) {
    let m = points.len();
    let dim = points[0].len();
    let mut dist = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            let d = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist.push(d);
        }
    }
    let dmin = dist.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let weights: Vec<f64> = dist.iter().map(|d| (-s * (d - dmin)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let value = dmin - z.ln() / s;
    let mut grad = vec![vec![0.0; dim]; m];
    let mut k = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            let w = weights[k] / z / dist[k].max(1e-300);
            for t in 0..dim {
                let g = w * (points[i][t] - points[j][t]);
                grad[i][t] += g;
                grad[j][t] -= g;
            }
            k += 1;
        }
    }
    (value, grad)
}

/// Ascent on the soft minimum of pairwise distances with increasing sharpness.
fn repel(mut pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for &s in &[10.0, 30.0, 100.0, 300.0, 1e3, 3e3, 1e4, 3e4, 1e5, 3e5, 1e6] {
        let mut step = 0.05;
        let (mut value, mut grad) = soft_min(&pts, s);
        for _ in 0..800 {
            let mut trial = pts.clone();
            for (p, g) in trial.iter_mut().zip(&grad) {
                let radial: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
                for (x, (gx, px)) in p.clone().iter().zip(g.iter().zip(p.iter_mut())) {
                    *px += step * (gx - radial * x);
                }
                normalize(p);
            }
            let (tv, tg) = soft_min(&trial, s);
            if tv > value {
                let gain = tv - value;
                pts = trial;
                value = tv;
                grad = tg;
                step *= 1.2;
                if gain < 1e-13 {
                    break;
                }
            } else {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
    }
    pts
}

/// Point set on `S^d` with approximately maximal minimal pairwise angle.
pub fn tammes_points(m: usize, d: usize, seed: u64) -> Result<SpherePoints> {
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    if d != 2 && d != 4 {
        return Err(Error::InvalidArgument(format!("sphere dimension {d} not supported")));
    }
    let dim = d + 1;
    if m == 2 {
        let mut a = vec![0.0; dim];
        a[d] = 1.0;
        let b = a.iter().map(|v| -v).collect();
        return Ok(SpherePoints {
            points: vec![a, b],
            min_angle: PI,
        });
    }
    let runs: Vec<Vec<Vec<f64>>> = (0..TAMMES_RESTARTS)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(r));
            let start: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    normalize(&mut v);
                    v
                })
                .collect();
            repel(start)
        })
        .collect();
    let best = runs
        .into_iter()
        .map(|p| (min_pairwise_angle(&p), p))
        .fold(None::<(f64, Vec<Vec<f64>>)>, |acc, cur| match acc {
            Some(a) if a.0 >= cur.0 => Some(a),
            _ => Some(cur),
        })
        .expect("at least one restart");
    Ok(SpherePoints {
        points: best.1,
        min_angle: best.0,
    })
}

/// Bloch length whose light cone opening angle equals `theta`: `cos theta = 1 - 2 / tau^2`.
pub fn tau_for_opening_angle(theta: f64) -> f64 {
    (2.0 / (1.0 - theta.cos())).sqrt().max(1.0)
}

#[derive(Debug, Clone)]
pub struct DiracSphere {
    pub config: Configuration,
    pub sphere: SpherePoints,
    pub tau: f64,
    pub exact: OraclePrediction,
    pub asymptotic: OraclePrediction,
}

fn require_trivial(config: &Configuration) -> Result<()> {
    let (ok, bad) = is_causally_trivial(config)?;
    if ok {
        Ok(())
    } else {
        Err(Error::NotCausallyTrivial { pairs: bad.len() })
    }
}

pub fn dirac2d_config(m: usize, seed: u64) -> Result<DiracSphere> {
    let sphere = tammes_points(m, 2, seed)?;
    let tau = tau_for_opening_angle(sphere.min_angle);
    let points = sphere
        .points
        .iter()
        .map(|p| BlochCoords::normalized(tau, [p[0], p[1], p[2]]).map(f2_from_bloch))
        .collect::<Result<Vec<_>>>()?;
    let config = Configuration::equal_weights(points)?;
    require_trivial(&config)?;
    let mf = m as f64;
    let t2 = tau * tau;
    let exact = OraclePrediction::new(
        "dirac2d_exact",
        Some(tau),
        t2 / (2.0 * mf),
        Some((t2 - 1.0).powi(2) / 4.0 + t2 / mf),
        Regime::Exact,
    );
    Ok(DiracSphere {
        config,
        sphere,
        tau,
        exact,
        asymptotic: dirac2d_asymptote(m),
    })
}

fn dirac2d_asymptote(m: usize) -> OraclePrediction {
    let mf = m as f64;
    OraclePrediction::new(
        "dirac2d_asymptote",
        Some(3f64.powf(0.25) * (mf / (2.0 * PI)).sqrt()),
        3f64.sqrt() / (4.0 * PI),
        Some(3.0 * mf * mf / (16.0 * PI * PI)),
        Regime::Asymptotic,
    )
}

/// The five Euclidean Dirac matrices `diag(sigma_a, -sigma_a)`, `[[0, i], [-i, 0]]`, `[[0, 1], [1, 0]]`.
pub fn euclidean_dirac_matrices() -> [CMat; 5] {
    let s = crate::linalg::pauli();
    let block = |tl: &CMat, tr: &CMat, bl: &CMat, br: &CMat| {
        let mut g = CMat::zeros(4, 4);
        g.view_mut((0, 0), (2, 2)).copy_from(tl);
        g.view_mut((0, 2), (2, 2)).copy_from(tr);
        g.view_mut((2, 0), (2, 2)).copy_from(bl);
        g.view_mut((2, 2), (2, 2)).copy_from(br);
        g
    };
    let z = CMat::zeros(2, 2);
    let id = CMat::identity(2, 2);
    [
        block(&s[0], &z, &z, &(-&s[0])),
        block(&s[1], &z, &z, &(-&s[1])),
        block(&s[2], &z, &z, &(-&s[2])),
        block(&z, &(&id * I), &(&id * -I), &z),
        block(&z, &id, &id, &z),
    ]
}

/// `F(x) = (tau sum_i x_i gamma_i + 1) / 4` for a unit vector `x` in `R^5`.
pub fn dirac4d_operator(tau: f64, x: &[f64]) -> Result<OperatorPoint> {
    let gammas = euclidean_dirac_matrices();
    let mut m = CMat::identity(4, 4);
    for (g, &xi) in gammas.iter().zip(x) {
        m += g * c(tau * xi, 0.0);
    }
    validate_point(m * c(0.25, 0.0), 2)
}

pub fn dirac4d_lagrangian(tau: f64, theta: f64) -> f64 {
    let t2 = tau * tau;
    let theta_max = (1.0 - 2.0 / t2).clamp(-1.0, 1.0).acos();
    if theta >= theta_max {
        return 0.0;
    }
    let cs = theta.cos();
    (t2 / 64.0) * (1.0 + cs) * (2.0 - t2 * (1.0 - cs))
}

/// Leading-order boundedness `(tau^2 - 1)^2 / 16` of the four-dimensional sphere.
pub fn dirac4d_boundedness_leading(tau: f64) -> f64 {
    (tau * tau - 1.0).powi(2) / 16.0
}

pub fn dirac4d_config(m: usize, seed: u64) -> Result<DiracSphere> {
    let sphere = tammes_points(m, 4, seed)?;
    let tau = tau_for_opening_angle(sphere.min_angle);
    let points = sphere
        .points
        .iter()
        .map(|p| dirac4d_operator(tau, p))
        .collect::<Result<Vec<_>>>()?;
    let config = Configuration::equal_weights(points)?;
    require_trivial(&config)?;
    let mf = m as f64;
    let t2 = tau * tau;
    // Self pairs contribute ((1 + tau^2) / 4)^2, lightlike and spacelike pairs ((tau^2 - 1) / 4)^2.
    let exact = OraclePrediction::new(
        "dirac4d_exact",
        Some(tau),
        t2 / (16.0 * mf),
        Some(dirac4d_boundedness_leading(tau) + t2 / (4.0 * mf)),
        Regime::Exact,
    );
    Ok(DiracSphere {
        config,
        sphere,
        tau,
        exact,
        asymptotic: dirac4d_asymptote(m),
    })
}

fn dirac4d_asymptote(m: usize) -> OraclePrediction {
    let mf = m as f64;
    OraclePrediction::new(
        "dirac4d_asymptote",
        Some(3f64.powf(0.25) * mf.powf(0.25) / PI.sqrt()),
        3f64.sqrt() / (16.0 * PI * mf.sqrt()),
        Some(3.0 * mf / (16.0 * PI * PI)),
        Regime::Asymptotic,
    )
}

/// `m` operators `P_i / n` with mutually orthogonal rank-`n` projectors `P_i`.
pub fn orthogonal_min_config(n: usize, f: usize, m: usize) -> Result<Configuration> {
    if n == 0 || m == 0 || f < m * n || f < 2 * n {
        return Err(Error::DimensionTooSmall { n, f });
    }
    let points = (0..m)
        .map(|i| {
            let mut d = vec![0.0; f];
            d[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = 1.0 / n as f64);
            validate_point(diagonal(&d), n)
        })
        .collect::<Result<Vec<_>>>()?;
    Configuration::equal_weights(points)
}

/// Lower bound `1 / (f (f + 1))` for equal-weight rank-one configurations.
pub fn welch_floor(f: usize) -> f64 {
    let f = f as f64;
    1.0 / (f * (f + 1.0))
}

/// Four rank-one projectors in `C^2` with tetrahedral Bloch vectors. For unit Bloch vectors
/// the overlap is `|<v_i|v_j>|^2 = (1 + n_i.n_j) / 2`, which is `1/3` for tetrahedral directions.
pub fn sic_tetrahedron() -> Configuration {
    let r2 = 2f64.sqrt();
    let dirs = [
        [0.0, 0.0, 1.0],
        [2.0 * r2 / 3.0, 0.0, -1.0 / 3.0],
        [-r2 / 3.0, (2.0f64 / 3.0).sqrt(), -1.0 / 3.0],
        [-r2 / 3.0, -(2.0f64 / 3.0).sqrt(), -1.0 / 3.0],
    ];
    let points = dirs
        .iter()
        .map(|d| f2_from_bloch(BlochCoords::normalized(1.0, *d).expect("unit tetrahedron")))
        .collect();
    Configuration::equal_weights(points).expect("four points")
}

/// Weights `c_i proportional to tau_i^-2`.
pub fn optimal_weights(taus: &[f64]) -> Result<Vec<f64>> {
    if let Some(&t) = taus.iter().find(|&&t| !(t >= 1.0)) {
        return Err(Error::TauBelowOne { tau: t });
    }
    let inv: Vec<f64> = taus.iter().map(|t| 1.0 / (t * t)).collect();
    let s: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|v| v / s).collect())
}

/// Whether all distinct pairs have vanishing Lagrangian; lists the offending pairs.
pub fn is_causally_trivial(config: &Configuration) -> Result<(bool, Vec<(usize, usize)>)> {
    let r = causal_action(config)?;
    let m = config.m();
    let mut bad = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if r.pair_lagrangians[i][j] >= TRIVIAL_TOL {
                bad.push((i, j));
            }
        }
    }
    Ok((bad.is_empty(), bad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    HypothesisNotMet,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointCheck {
    pub index: usize,
    pub tau: f64,
    pub lightlike_partners: usize,
    /// `sqrt(k / (k - 2))`, absent for `k < 3`.
    pub tau_required: Option<f64>,
    pub tau_ok: bool,
    pub angular_restricted: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalMinReport {
    pub points: Vec<PointCheck>,
    pub weights_optimal: bool,
    /// All points pass and the weights are optimal.
    pub certified: bool,
}

/// Two unit vectors orthogonal to `x` and to each other.
fn tangent_frame(x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if x[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d: f64 = (0..3).map(|k| pick[k] * x[k]).sum();
    let mut u = [pick[0] - d * x[0], pick[1] - d * x[1], pick[2] - d * x[2]];
    let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    u.iter_mut().for_each(|v| *v /= n);
    let v = [
        x[1] * u[2] - x[2] * u[1],
        x[2] * u[0] - x[0] * u[2],
        x[0] * u[1] - x[1] * u[0],
    ];
    (u, v)
}

/// Check the hypotheses of the local-minimum criterion for causally trivial `f = 2` measures.
pub fn local_min_check(config: &Configuration) -> Result<LocalMinReport> {
    if config.n() != 1 {
        return Err(Error::UnsupportedSpin {
            expected: 1,
            got: config.n(),
        });
    }
    if config.f() != 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            got: config.f(),
        });
    }
    require_trivial(config)?;
    let bloch = config
        .points()
        .iter()
        .map(f2_to_bloch)
        .collect::<Result<Vec<_>>>()?;
    let taus: Vec<f64> = bloch.iter().map(|b| b.tau()).collect();
    let opt = optimal_weights(&taus)?;
    let weights_optimal = opt
        .iter()
        .zip(config.weights())
        .all(|(a, b)| (a - b).abs() < 1e-9);

    let m = bloch.len();
    let mut points = Vec::with_capacity(m);
    for i in 0..m {
        let bi = bloch[i];
        let k = (0..m)
            .filter(|&j| j != i)
            .filter(|&j| {
                let (tm, _) = critical_angles(bi.tau(), bloch[j].tau());
                (bi.angle_to(&bloch[j]) - tm).abs() < LIGHTLIKE_ANGLE_TOL
            })
            .count();
        let tau_required = (k >= 3).then(|| (k as f64 / (k as f64 - 2.0)).sqrt());
        let tau_ok = tau_required.is_some_and(|t| bi.tau() >= t - 1e-12);

        let x = bi.direction();
        let (u, v) = tangent_frame(x);
        let angular_restricted = (0..RING_DIRECTIONS).all(|r| {
            let phi = 2.0 * PI * r as f64 / RING_DIRECTIONS as f64;
            let (cs, sn) = (RING_RADIUS.cos(), RING_RADIUS.sin());
            let y: Vec<f64> = (0..3)
                .map(|t| cs * x[t] + sn * (phi.cos() * u[t] + phi.sin() * v[t]))
                .collect();
            (0..m).filter(|&j| j != i).any(|j| {
                let theta = angle(&y, &bloch[j].direction());
                lagrangian_f2_angles(bi.tau(), bloch[j].tau(), theta) > 1e-14
            })
        });
        let verdict = if tau_ok && angular_restricted {
            Verdict::Pass
        } else {
            Verdict::HypothesisNotMet
        };
        points.push(PointCheck {
            index: i,
            tau: bi.tau(),
            lightlike_partners: k,
            tau_required,
            tau_ok,
            angular_restricted,
            verdict,
        });
    }
    let certified = weights_optimal && points.iter().all(|p| p.verdict == Verdict::Pass);
    Ok(LocalMinReport {
        points,
        weights_optimal,
        certified,
    })
}

/// Analytic predictions applicable to `(n, f, m)`, the most specific first.
pub fn asymptotic_table(n: usize, f: usize, m: usize) -> Vec<OraclePrediction> {
    let mut out = Vec::new();
    let (nf, mf) = (n as f64, m as f64);
    if n >= 1 && m >= 1 && f >= m * n {
        out.push(OraclePrediction::new(
            "large_f_floor",
            (n == 1).then_some(1.0),
            1.0 / (2.0 * mf * nf.powi(3)),
            Some(1.0 / (mf * nf * nf)),
            Regime::Exact,
        ));
    }
    if n == 1 && f == 2 {
        out.push(dirac2d_asymptote(m));
    }
    if n == 2 && f == 4 {
        out.push(dirac4d_asymptote(m));
    }
    if n == 1 && f >= 2 && m > f {
        out.push(OraclePrediction::new(
            "welch_floor_rank_one",
            Some(1.0),
            welch_floor(f),
            None,
            Regime::Exact,
        ));
    }
    out
}

/// A zero-padded rank-one projector onto basis vector `k`, used in tests.
pub fn basis_projector(f: usize, k: usize) -> OperatorPoint {
    let mut m = CMat::from_element(f, f, ZERO);
    m[(k, k)] = ONE;
    validate_point(m, 1).expect("projector")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{lagrangian, product_spectrum};
    use crate::linalg::frobenius_distance;

    #[test]
    fn iso_examples() {
        assert_eq!(iso_lagrangian(1.0, 1.0), 1.0 / 6.0);
        for t in [1.0, 1.5, 2.0, 7.0] {
            assert!((iso_lagrangian(t, t) - (0.25 - 1.0 / (12.0 * t * t))).abs() < 1e-12);
        }
        assert!((iso_lagrangian(2.0, 2.0) - 11.0 / 48.0).abs() < 1e-15);
    }

    #[test]
    fn packing_constants() {
        assert!((DELTA_2 - PI * 3f64.sqrt() / 6.0).abs() < 1e-15);
        assert!((DELTA_4 - PI * PI / 16.0).abs() < 1e-15);
    }

    #[test]
    fn tammes_small_cases() {
        let p = tammes_points(2, 2, 0).unwrap();
        assert_eq!(p.min_angle, PI);
        let p = tammes_points(4, 2, 0).unwrap();
        assert!((p.min_angle - (-1.0f64 / 3.0).acos()).abs() < 1e-3, "{}", p.min_angle);
        let p = tammes_points(6, 2, 0).unwrap();
        assert!((p.min_angle - PI / 2.0).abs() < 1e-3, "{}", p.min_angle);
        for q in &p.points {
            assert!((q.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(p.min_angle, min_pairwise_angle(&p.points));
    }

    #[test]
    fn dirac2d_small() {
        let d = dirac2d_config(2, 0).unwrap();
        assert!((d.tau - 1.0).abs() < 1e-12);
        assert!((causal_action(&d.config).unwrap().action - 0.25).abs() < 1e-12);
        let d = dirac2d_config(6, 1).unwrap();
        assert!((d.tau - 2f64.sqrt()).abs() < 1e-3);
        let r = causal_action(&d.config).unwrap();
        assert!((r.action - d.exact.action).abs() < 1e-10);
        assert!((r.action - 1.0 / 6.0).abs() < 1e-3);
        assert!((d.asymptotic.action - 0.13783).abs() < 1e-5);
    }

    #[test]
    fn dirac_matrices_anticommute() {
        let g = euclidean_dirac_matrices();
        for a in 0..5 {
            assert!(crate::linalg::hermitian_defect(&g[a]) < 1e-15);
            for b in 0..5 {
                let ac = &g[a] * &g[b] + &g[b] * &g[a];
                let expect = if a == b { CMat::identity(4, 4) * c(2.0, 0.0) } else { CMat::zeros(4, 4) };
                assert!(frobenius_distance(&ac, &expect) < 1e-14);
            }
        }
    }

    #[test]
    fn dirac4d_operator_spectrum_and_pairs() {
        let tau = 1.7;
        let x = [0.3, -0.2, 0.5, 0.1, 0.0];
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = x.iter().map(|v| v / nrm).collect();
        let p = dirac4d_operator(tau, &x).unwrap();
        let ev = p.eigenvalues();
        let lo = 0.25 * (1.0 - tau);
        let hi = 0.25 * (1.0 + tau);
        assert!((ev[0] - lo).abs() < 1e-12 && (ev[1] - lo).abs() < 1e-12);
        assert!((ev[2] - hi).abs() < 1e-12 && (ev[3] - hi).abs() < 1e-12);

        let e0 = [0.0, 0.0, 0.0, 0.0, 1.0];
        for theta in [0.0f64, 0.4, 1.0, 2.0, 3.0] {
            let y = [theta.sin(), 0.0, 0.0, 0.0, theta.cos()];
            let a = dirac4d_operator(tau, &e0).unwrap();
            let b = dirac4d_operator(tau, &y).unwrap();
            let l = lagrangian(&a, &b).unwrap();
            assert!((l - dirac4d_lagrangian(tau, theta)).abs() < 1e-10, "theta {theta}: {l}");
            let s = product_spectrum(&a, &b).unwrap();
            // Every eigenvalue of the product is doubly degenerate.
            let vals = &s.eigenvalues;
            for (a, va) in vals.iter().enumerate() {
                assert!(vals.iter().enumerate().any(|(b, vb)| a != b && (va - vb).norm() < 1e-7));
            }
        }
        assert!((dirac4d_lagrangian(tau, 0.0) - tau * tau / 16.0).abs() < 1e-15);
        let t1 = dirac4d_lagrangian(1.0, 1.2);
        assert!((t1 - (1.0 + 1.2f64.cos()).powi(2) / 64.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_examples() {
        for (n, f, m, s) in [(1, 2, 2, 0.25), (2, 8, 2, 1.0 / 32.0), (1, 4, 4, 0.125)] {
            let cfg = orthogonal_min_config(n, f, m).unwrap();
            assert!((causal_action(&cfg).unwrap().action - s).abs() < 1e-12);
            assert!(is_causally_trivial(&cfg).unwrap().0);
        }
        assert!(matches!(orthogonal_min_config(1, 3, 4), Err(Error::DimensionTooSmall { .. })));
    }

    #[test]
    fn welch_and_sic() {
        assert!((welch_floor(2) - 1.0 / 6.0).abs() < 1e-15);
        assert!((welch_floor(3) - 1.0 / 12.0).abs() < 1e-15);
        let sic = sic_tetrahedron();
        let pts = sic.points();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let overlap = (pts[i].matrix() * pts[j].matrix()).trace().re;
                assert!((overlap - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        assert!((causal_action(&sic).unwrap().action - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn weights_examples() {
        let w = optimal_weights(&[1.3; 4]).unwrap();
        assert!(w.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let w = optimal_weights(&[1.0, 2f64.sqrt()]).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
        let w = optimal_weights(&[1.0, 1.0, 2f64.sqrt()]).unwrap();
        assert!((w[0] - 0.4).abs() < 1e-15 && (w[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn coincident_points_are_not_trivial() {
        let p = basis_projector(2, 0);
        let cfg = Configuration::equal_weights(vec![p.clone(), p]).unwrap();
        let (ok, bad) = is_causally_trivial(&cfg).unwrap();
        assert!(!ok);
        assert_eq!(bad, vec![(0, 1)]);
    }

    fn octahedron() -> Configuration {
        let tau = 2f64.sqrt();
        let dirs = [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let pts = dirs
            .iter()
            .map(|d| f2_from_bloch(BlochCoords::new(tau, *d).unwrap()))
            .collect();
        Configuration::equal_weights(pts).unwrap()
    }

    #[test]
    fn octahedron_meets_local_minimum_hypotheses() {
        let r = local_min_check(&octahedron()).unwrap();
        assert!(r.weights_optimal);
        for p in &r.points {
            assert_eq!(p.lightlike_partners, 4);
            assert!((p.tau_required.unwrap() - 2f64.sqrt()).abs() < 1e-15);
            assert!(p.tau_ok && p.angular_restricted);
        }
        assert!(r.certified);
    }

    #[test]
    fn sparse_points_do_not_meet_hypotheses() {
        // Two antipodal projectors: one lightlike partner each, free to rotate.
        let d = dirac2d_config(2, 0).unwrap();
        let r = local_min_check(&d.config).unwrap();
        for p in &r.points {
            assert!(p.lightlike_partners < 3);
            assert_eq!(p.verdict, Verdict::HypothesisNotMet);
        }
        // A single point has no partners at all, so nothing restricts its direction.
        let one = Configuration::equal_weights(vec![basis_projector(2, 0)]).unwrap();
        let r = local_min_check(&one).unwrap();
        assert_eq!(r.points[0].lightlike_partners, 0);
        assert!(!r.points[0].angular_restricted);
    }

    #[test]
    fn table_entries() {
        let t = asymptotic_table(1, 8, 8);
        assert!((t[0].action - 1.0 / 16.0).abs() < 1e-15);
        let t = asymptotic_table(2, 8, 4);
        assert!((t[0].action - 1.0 / 64.0).abs() < 1e-15);
        let t = asymptotic_table(1, 2, 1000);
        assert!(t.iter().any(|p| (p.action - 3f64.sqrt() / (4.0 * PI)).abs() < 1e-15));
    }
}
