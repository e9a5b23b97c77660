//! Two-stage quasi-Newton minimisation: L-BFGS, then dense BFGS from the last iterate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::{Duration, Instant};

use crate::action::causal_action;
use crate::error::{Error, Result};
use crate::gradient::flat_value_and_grad;
use crate::parametrize::{decode, default_mu0, init_random, Shape, UnconstrainedParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradNorm {
    L1,
    Max,
}

impl GradNorm {
    pub fn of(self, g: &[f64]) -> f64 {
        match self {
            GradNorm::L1 => g.iter().map(|v| v.abs()).sum(),
            GradNorm::Max => g.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub ftol: f64,
    /// Relative-decrease stop for the BFGS stage; `None` stops on the gradient only.
    pub ftol_stage2: Option<f64>,
    pub gtol_stage1: f64,
    pub gtol_stage2: f64,
    pub memory: usize,
    pub max_linesearch: usize,
    pub max_iter_stage1: usize,
    pub max_iter_stage2: usize,
    /// Seconds per run.
    pub wall_clock_limit: Option<f64>,
    pub grad_norm: GradNorm,
    pub c1: f64,
    pub c2: f64,
    pub sigma_c: f64,
    pub sigma_mu: f64,
    pub mu0: Option<f64>,
    /// Record every this many iterations in the action trace.
    pub trace_stride: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            ftol: 1e-7,
            ftol_stage2: None,
            gtol_stage1: 1e-9,
            gtol_stage2: 1e-7,
            memory: 70,
            max_linesearch: 20,
            max_iter_stage1: 10_000,
            max_iter_stage2: 5_000,
            wall_clock_limit: Some(72.0 * 3600.0),
            grad_norm: GradNorm::L1,
            c1: 1e-4,
            c2: 0.9,
            sigma_c: crate::parametrize::DEFAULT_SIGMA_C,
            sigma_mu: crate::parametrize::DEFAULT_SIGMA_MU,
            mu0: None,
            trace_stride: 10,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ftol", self.ftol),
            ("gtol_stage1", self.gtol_stage1),
            ("gtol_stage2", self.gtol_stage2),
            ("c1", self.c1),
            ("c2", self.c2),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if let Some(v) = self.ftol_stage2 {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument("ftol_stage2 must be positive".into()));
            }
        }
        if !(self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidArgument("need 0 < c1 < c2 < 1".into()));
        }
        if self.memory == 0 || self.max_linesearch == 0 || self.trace_stride == 0 {
            return Err(Error::InvalidArgument(
                "memory, max_linesearch and trace_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn deadline(&self, start: Instant) -> Option<Instant> {
        self.wall_clock_limit
            .map(|s| start + Duration::from_secs_f64(s.max(0.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FtolReached,
    GtolReached,
    MaxIter,
    WallClock,
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub f: f64,
    pub g: Vec<f64>,
    pub x: Vec<f64>,
    pub evaluations: usize,
    /// The direction actually searched; differs from the input after a steepest-descent reset.
    pub direction: Vec<f64>,
    pub reset_to_steepest: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

#[derive(Clone, Copy)]
struct Trial {
    a: f64,
    f: f64,
    d: f64,
}

/// Minimiser of the cubic through two trials, safeguarded into the interior of the bracket.
fn interpolate(lo: Trial, hi: Trial) -> f64 {
    let (a, b) = (lo.a.min(hi.a), lo.a.max(hi.a));
    let width = b - a;
    let mid = 0.5 * (lo.a + hi.a);
    if !(lo.f.is_finite() && hi.f.is_finite() && lo.d.is_finite() && hi.d.is_finite()) {
        return mid;
    }
    let d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
    let rad = d1 * d1 - lo.d * hi.d;
    if rad < 0.0 {
        return mid;
    }
    let d2 = (hi.a - lo.a).signum() * rad.sqrt();
    let t = hi.a - (hi.a - lo.a) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
    if t.is_finite() && t > a + 0.1 * width && t < b - 0.1 * width {
        t
    } else {
        mid
    }
}

/// Line search for a step satisfying the strong Wolfe conditions.
///
/// A direction that is not a descent direction is replaced by the negative gradient.
pub fn line_search_strong_wolfe<F>(
    fg: &mut F,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    direction: &[f64],
    alpha0: f64,
    settings: &OptimizerSettings,
) -> Result<LineSearchResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut d = direction.to_vec();
    let mut dphi0 = dot(g0, &d);
    let reset = !(dphi0 < 0.0);
    if reset {
        d = g0.iter().map(|v| -v).collect();
        dphi0 = -dot(g0, g0);
        if dphi0 == 0.0 {
            return Err(Error::LineSearchFailure { trials: 0 });
        }
    }
    let (c1, c2, max) = (settings.c1, settings.c2, settings.max_linesearch);
    let mut evals = 0;
    let mut eval = |a: f64| {
        let xa = axpy(x, a, &d);
        let (fa, ga) = fg(&xa);
        let da = dot(&ga, &d);
        (Trial { a, f: fa, d: da }, xa, ga)
    };
    let accept = |t: Trial, xa: Vec<f64>, ga: Vec<f64>, evals: usize, d: &[f64]| LineSearchResult {
        alpha: t.a,
        f: t.f,
        g: ga,
        x: xa,
        evaluations: evals,
        direction: d.to_vec(),
        reset_to_steepest: reset,
    };
    let armijo = |t: Trial| t.f.is_finite() && t.f <= f0 + c1 * t.a * dphi0;
    let curvature = |t: Trial| t.d.abs() <= -c2 * dphi0;

    let mut prev = Trial { a: 0.0, f: f0, d: dphi0 };
    let mut a = alpha0;
    let (mut lo, mut hi);
    loop {
        if evals >= max {
            return Err(Error::LineSearchFailure { trials: evals });
        }
        let (t, xa, ga) = eval(a);
        evals += 1;
        if !armijo(t) || (evals > 1 && t.f >= prev.f) {
            lo = prev;
            hi = t;
            break;
        }
        if curvature(t) {
            return Ok(accept(t, xa, ga, evals, &d));
        }
        if t.d >= 0.0 {
            lo = t;
            hi = prev;
            break;
        }
        prev = t;
        a *= 2.0;
    }
    // Zoom: `lo` satisfies the sufficient decrease condition and has the lowest value so far.
    while evals < max {
        let aj = interpolate(lo, hi);
        if (hi.a - lo.a).abs() <= f64::EPSILON * lo.a.abs().max(hi.a.abs()) {
            break;
        }
        let (t, xa, ga) = eval(aj);
        evals += 1;
        if !armijo(t) || t.f >= lo.f {
            hi = t;
        } else {
            if curvature(t) {
                return Ok(accept(t, xa, ga, evals, &d));
            }
            if t.d * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = t;
        }
    }
    Err(Error::LineSearchFailure { trials: evals })
}

/// Outcome of a single quasi-Newton stage.
#[derive(Debug, Clone)]
pub struct StageResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: Termination,
    pub trace: Vec<f64>,
}

struct StageLimits {
    gtol: f64,
    ftol: Option<f64>,
    max_iter: usize,
    deadline: Option<Instant>,
}

enum Step {
    Continue,
    Stop(Termination),
}

fn after_step(f_prev: f64, f: f64, g: &[f64], iter: usize, lim: &StageLimits, norm: GradNorm) -> Step {
    if let Some(ftol) = lim.ftol {
        if (f_prev - f) / f_prev.abs().max(f.abs()).max(1.0) <= ftol {
            return Step::Stop(Termination::FtolReached);
        }
    }
    if norm.of(g) < lim.gtol {
        return Step::Stop(Termination::GtolReached);
    }
    if iter >= lim.max_iter {
        return Step::Stop(Termination::MaxIter);
    }
    if lim.deadline.is_some_and(|d| Instant::now() >= d) {
        return Step::Stop(Termination::WallClock);
    }
    Step::Continue
}

fn first_step(g: &[f64]) -> f64 {
    let n = dot(g, g).sqrt();
    if n > 1.0 {
        1.0 / n
    } else {
        1.0
    }
}

trait Direction {
    fn direction(&self, g: &[f64]) -> Vec<f64>;
    fn update(&mut self, s: &[f64], y: &[f64]);
    fn reset(&mut self);
    fn is_fresh(&self) -> bool;
}

struct LimitedMemory {
    memory: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    /// Scale the initial inverse Hessian with the first pair instead of the latest one.
    first_pair_scaling: bool,
    first_gamma: Option<f64>,
}

impl LimitedMemory {
    fn new(memory: usize) -> Self {
        LimitedMemory {
            memory,
            pairs: VecDeque::new(),
            first_pair_scaling: false,
            first_gamma: None,
        }
    }
}

impl Direction for LimitedMemory {
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = match (self.first_gamma, self.pairs.back()) {
            (Some(g), _) if self.first_pair_scaling => g,
            (_, Some((s, y, _))) => dot(s, y) / dot(y, y),
            _ => 1.0,
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    fn update(&mut self, s: &[f64], y: &[f64]) {
        let sy = dot(s, y);
        if sy <= f64::EPSILON * dot(y, y) {
            return;
        }
        if self.first_gamma.is_none() {
            self.first_gamma = Some(sy / dot(y, y));
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s.to_vec(), y.to_vec(), 1.0 / sy));
    }

    fn reset(&mut self) {
        self.pairs.clear();
        self.first_gamma = None;
    }

    fn is_fresh(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Dense inverse-Hessian approximation, row-major.
struct Dense {
    dim: usize,
    h: Vec<f64>,
    fresh: bool,
}

impl Dense {
    fn new(dim: usize) -> Self {
        let mut d = Dense {
            dim,
            h: vec![0.0; dim * dim],
            fresh: true,
        };
        d.reset();
        d
    }
}

impl Direction for Dense {
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        self.h
            .chunks_exact(self.dim)
            .map(|row| -dot(row, g))
            .collect()
    }

    fn update(&mut self, s: &[f64], y: &[f64]) {
        let sy = dot(s, y);
        if sy <= f64::EPSILON * dot(y, y) {
            return;
        }
        let n = self.dim;
        if self.fresh {
            let gamma = sy / dot(y, y);
            self.h.iter_mut().for_each(|v| *v *= gamma);
            self.fresh = false;
        }
        let rho = 1.0 / sy;
        let hy: Vec<f64> = self.h.chunks_exact(n).map(|row| dot(row, y)).collect();
        let yhy = dot(y, &hy);
        let coef = rho * rho * yhy + rho;
        // H <- H - rho (s hy^T + hy s^T) + (rho^2 y^T H y + rho) s s^T
        for (r, row) in self.h.chunks_exact_mut(n).enumerate() {
            let (sr, hr) = (s[r], hy[r]);
            for ((v, &sc), &hc) in row.iter_mut().zip(s).zip(&hy) {
                *v += -rho * (sr * hc + hr * sc) + coef * sr * sc;
            }
        }
    }

    fn reset(&mut self) {
        let n = self.dim;
        self.h.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..n {
            self.h[k * n + k] = 1.0;
        }
        self.fresh = true;
    }

    fn is_fresh(&self) -> bool {
        self.fresh
    }
}

fn run_stage<F, D>(
    fg: &mut F,
    x0: &[f64],
    settings: &OptimizerSettings,
    lim: StageLimits,
    mut dir: D,
    label: &str,
) -> StageResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    D: Direction,
{
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x);
    let mut evaluations = 1;
    let mut trace = vec![f];
    let done = |x, f, g, iterations, evaluations, reason, trace| StageResult {
        x,
        f,
        g,
        iterations,
        evaluations,
        reason,
        trace,
    };
    if !f.is_finite() {
        return done(x, f, g, 0, evaluations, Termination::LineSearchFailure, trace);
    }
    if settings.grad_norm.of(&g) < lim.gtol {
        return done(x, f, g, 0, evaluations, Termination::GtolReached, trace);
    }
    let mut iter = 0;
    loop {
        iter += 1;
        let mut d = dir.direction(&g);
        if !(dot(&g, &d) < 0.0) {
            dir.reset();
            d = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if dir.is_fresh() { first_step(&g) } else { 1.0 };
        let ls = match line_search_strong_wolfe(fg, &x, f, &g, &d, alpha0, settings) {
            Ok(ls) => ls,
            Err(e) => {
                if let Error::LineSearchFailure { trials } = e {
                    evaluations += trials;
                }
                log::info!("{label}: line search failed at iteration {iter}, S = {f:.12e}");
                return done(x, f, g, iter - 1, evaluations, Termination::LineSearchFailure, trace);
            }
        };
        evaluations += ls.evaluations;
        if ls.reset_to_steepest {
            dir.reset();
        }
        let s: Vec<f64> = ls.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = ls.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        dir.update(&s, &y);
        let f_prev = f;
        x = ls.x;
        f = ls.f;
        g = ls.g;
        if iter % settings.trace_stride == 0 {
            trace.push(f);
        }
        log::debug!(
            "{label} iter {iter}: S = {f:.12e}, |g|_1 = {:.3e}",
            GradNorm::L1.of(&g)
        );
        if iter % 100 == 0 {
            log::info!(
                "{label} iter {iter}: S = {f:.12e}, |g|_1 = {:.3e}",
                GradNorm::L1.of(&g)
            );
        }
        if let Step::Stop(reason) = after_step(f_prev, f, &g, iter, &lim, settings.grad_norm) {
            if trace.last() != Some(&f) || iter % settings.trace_stride != 0 {
                trace.push(f);
            }
            log::info!("{label}: {reason:?} after {iter} iterations, S = {f:.12e}");
            return done(x, f, g, iter, evaluations, reason, trace);
        }
    }
}

/// Limited-memory BFGS with the stage-one tolerances of `settings`.
pub fn lbfgs<F>(fg: &mut F, x0: &[f64], settings: &OptimizerSettings) -> StageResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    lbfgs_until(fg, x0, settings, None)
}

fn lbfgs_until<F>(
    fg: &mut F,
    x0: &[f64],
    settings: &OptimizerSettings,
    deadline: Option<Instant>,
) -> StageResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let lim = StageLimits {
        gtol: settings.gtol_stage1,
        ftol: Some(settings.ftol),
        max_iter: settings.max_iter_stage1,
        deadline,
    };
    let dir = LimitedMemory::new(settings.memory);
    run_stage(fg, x0, settings, lim, dir, "l-bfgs")
}

/// Dense BFGS with the stage-two tolerances of `settings`.
pub fn bfgs<F>(fg: &mut F, x0: &[f64], settings: &OptimizerSettings) -> StageResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    bfgs_until(fg, x0, settings, None)
}

fn bfgs_until<F>(
    fg: &mut F,
    x0: &[f64],
    settings: &OptimizerSettings,
    deadline: Option<Instant>,
) -> StageResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let lim = StageLimits {
        gtol: settings.gtol_stage2,
        ftol: settings.ftol_stage2,
        max_iter: settings.max_iter_stage2,
        deadline,
    };
    run_stage(fg, x0, settings, lim, Dense::new(x0.len()), "bfgs")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageIterations {
    pub stage1: usize,
    pub stage2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub final_params: Vec<f64>,
    pub final_action: f64,
    pub final_boundedness: f64,
    pub iterations: StageIterations,
    pub termination_reason: Termination,
    pub stage1_reason: Termination,
    pub final_grad_norm: f64,
    pub evaluations: usize,
    pub action_trace: Vec<f64>,
    pub wall_time_seconds: f64,
}

/// Random start, L-BFGS, then BFGS from the last L-BFGS iterate.
pub fn minimize_two_stage(shape: Shape, seed: u64, settings: &OptimizerSettings) -> Result<RunResult> {
    settings.validate()?;
    let start = Instant::now();
    let deadline = settings.deadline(start);
    let mu0 = match settings.mu0 {
        Some(v) => v,
        None => default_mu0(shape.n, shape.m)?,
    };
    let x0 = init_random(shape, seed, settings.sigma_c, settings.sigma_mu, mu0)?.to_flat();
    let mut fg = |x: &[f64]| flat_value_and_grad(shape, x);

    let s1 = lbfgs_until(&mut fg, &x0, settings, deadline);
    let mut trace = s1.trace.clone();
    let (last, stage2_iters, stage2_evals) = if s1.reason == Termination::WallClock {
        (s1.clone(), 0, 0)
    } else {
        let s2 = bfgs_until(&mut fg, &s1.x, settings, deadline);
        trace.extend_from_slice(&s2.trace[1..]);
        let (it, ev) = (s2.iterations, s2.evaluations);
        (s2, it, ev)
    };
    let params = UnconstrainedParams::from_flat(shape, &last.x)?;
    let report = causal_action(&decode(&params)?)?;
    Ok(RunResult {
        seed,
        final_params: last.x.clone(),
        final_action: last.f,
        final_boundedness: report.boundedness,
        iterations: StageIterations {
            stage1: s1.iterations,
            stage2: stage2_iters,
        },
        termination_reason: last.reason,
        stage1_reason: s1.reason,
        final_grad_norm: settings.grad_norm.of(&last.g),
        evaluations: s1.evaluations + stage2_evals,
        action_trace: trace,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct MultiRestart {
    pub best_index: usize,
    pub results: Vec<std::result::Result<RunResult, String>>,
}

impl MultiRestart {
    pub fn best(&self) -> &RunResult {
        self.results[self.best_index]
            .as_ref()
            .expect("best index points at a successful run")
    }
}

/// One two-stage run per seed in parallel; returns the run with the smallest action.
pub fn multi_restart(shape: Shape, seeds: &[u64], settings: &OptimizerSettings) -> Result<MultiRestart> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("no seeds given".into()));
    }
    settings.validate()?;
    let outcomes: Vec<Result<RunResult>> = seeds
        .par_iter()
        .map(|&s| minimize_two_stage(shape, s, settings))
        .collect();
    let mut best: Option<usize> = None;
    for (k, r) in outcomes.iter().enumerate() {
        if let Ok(r) = r {
            let better = match best {
                None => true,
                Some(b) => match &outcomes[b] {
                    Ok(rb) => r.final_action < rb.final_action,
                    Err(_) => true,
                },
            };
            if better {
                best = Some(k);
            }
        }
    }
    let Some(best_index) = best else {
        return Err(outcomes
            .into_iter()
            .find_map(|r| r.err())
            .expect("all runs failed"));
    };
    Ok(MultiRestart {
        best_index,
        results: outcomes
            .into_iter()
            .map(|r| r.map_err(|e| e.to_string()))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_1d(x: &[f64]) -> (f64, Vec<f64>) {
        (x[0] * x[0], vec![2.0 * x[0]])
    }

    fn abs_1d(x: &[f64]) -> (f64, Vec<f64>) {
        let s = if x[0] > 0.0 {
            1.0
        } else if x[0] < 0.0 {
            -1.0
        } else {
            0.0
        };
        (x[0].abs(), vec![s])
    }

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        (f, g)
    }

    fn quadratic_50(x: &[f64]) -> (f64, Vec<f64>) {
        // f = sum_k (k+1)/10 (x_k - k/7)^2
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for (k, v) in x.iter().enumerate() {
            let w = (k as f64 + 1.0) / 10.0;
            let r = v - k as f64 / 7.0;
            f += w * r * r;
            g[k] = 2.0 * w * r;
        }
        (f, g)
    }

    fn tight() -> OptimizerSettings {
        OptimizerSettings {
            ftol: 1e-16,
            ftol_stage2: None,
            gtol_stage1: 1e-12,
            gtol_stage2: 1e-12,
            ..Default::default()
        }
    }

    #[test]
    fn wolfe_step_on_quadratic() {
        let s = OptimizerSettings::default();
        let r = line_search_strong_wolfe(&mut quad_1d, &[1.0], 1.0, &[2.0], &[-1.0], 1.0, &s).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wolfe_step_on_abs_does_not_overshoot() {
        let s = OptimizerSettings::default();
        let r = line_search_strong_wolfe(&mut abs_1d, &[1.0], 1.0, &[1.0], &[-1.0], 1.0, &s).unwrap();
        assert!(r.alpha < 2.0);
        assert!(r.f <= 1.0 - s.c1 * r.alpha);
        assert!(r.g[0].abs() <= s.c2);
    }

    #[test]
    fn ascent_direction_is_reset() {
        let s = OptimizerSettings::default();
        let r = line_search_strong_wolfe(&mut quad_1d, &[1.0], 1.0, &[2.0], &[1.0], 0.5, &s).unwrap();
        assert!(r.reset_to_steepest);
        assert_eq!(r.direction, vec![-2.0]);
        assert!(r.f < 1.0);
    }

    #[test]
    fn lbfgs_quadratic_50() {
        let x0 = vec![1.0; 50];
        let r = lbfgs(&mut quadratic_50, &x0, &tight());
        assert!(r.iterations <= 100, "{}", r.iterations);
        for (k, v) in r.x.iter().enumerate() {
            assert!((v - k as f64 / 7.0).abs() < 1e-8);
        }
    }

    #[test]
    fn bfgs_quadratic_50() {
        let x0 = vec![1.0; 50];
        let r = bfgs(&mut quadratic_50, &x0, &tight());
        assert!(r.iterations <= 100, "{}", r.iterations);
        for (k, v) in r.x.iter().enumerate() {
            assert!((v - k as f64 / 7.0).abs() < 1e-8);
        }
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        for r in [
            lbfgs(&mut rosenbrock, &[-1.2, 1.0], &tight()),
            bfgs(&mut rosenbrock, &[-1.2, 1.0], &tight()),
        ] {
            assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
        }
    }

    #[test]
    fn optimal_start_stops_on_gradient() {
        let x0: Vec<f64> = (0..50).map(|k| k as f64 / 7.0).collect();
        let r = lbfgs(&mut quadratic_50, &x0, &OptimizerSettings::default());
        assert_eq!((r.iterations, r.reason), (0, Termination::GtolReached));
        let r = bfgs(&mut quadratic_50, &x0, &OptimizerSettings::default());
        assert_eq!((r.iterations, r.reason), (0, Termination::GtolReached));
    }

    #[test]
    fn accepted_iterates_are_monotone() {
        let r = lbfgs(&mut rosenbrock, &[-1.2, 1.0], &tight());
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn full_memory_matches_bfgs_directions() {
        let settings = OptimizerSettings {
            memory: 60,
            ..tight()
        };
        let mut lm = LimitedMemory::new(settings.memory);
        lm.first_pair_scaling = true;
        let mut dense = Dense::new(50);
        let mut x = vec![1.0; 50];
        let (mut f, mut g) = quadratic_50(&x);
        for _ in 0..15 {
            let d1 = lm.direction(&g);
            let d2 = dense.direction(&g);
            let scale = d2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in d1.iter().zip(&d2) {
                assert!((a - b).abs() <= 1e-8 * scale.max(1.0));
            }
            let a0 = if lm.is_fresh() { first_step(&g) } else { 1.0 };
            let ls = line_search_strong_wolfe(&mut quadratic_50, &x, f, &g, &d1, a0, &settings).unwrap();
            let s: Vec<f64> = ls.x.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = ls.g.iter().zip(&g).map(|(a, b)| a - b).collect();
            lm.update(&s, &y);
            dense.update(&s, &y);
            x = ls.x;
            f = ls.f;
            g = ls.g;
            if GradNorm::L1.of(&g) < 1e-10 {
                break;
            }
        }
    }

    #[test]
    fn stopping_precedence_prefers_ftol() {
        let lim = StageLimits {
            gtol: 1.0,
            ftol: Some(1e-7),
            max_iter: 1,
            deadline: None,
        };
        // All three criteria hold; ftol is reported.
        let s = after_step(1.0, 1.0, &[0.0], 1, &lim, GradNorm::L1);
        assert!(matches!(s, Step::Stop(Termination::FtolReached)));
        let s = after_step(2.0, 1.0, &[0.0], 1, &lim, GradNorm::L1);
        assert!(matches!(s, Step::Stop(Termination::GtolReached)));
        let s = after_step(2.0, 1.0, &[5.0], 1, &lim, GradNorm::L1);
        assert!(matches!(s, Step::Stop(Termination::MaxIter)));
    }

    #[test]
    fn single_point_reaches_projector() {
        let shape = Shape::new(1, 2, 1).unwrap();
        let r = minimize_two_stage(shape, 0, &OptimizerSettings::default()).unwrap();
        assert!((r.final_action - 0.5).abs() < 1e-6, "{}", r.final_action);
    }

    #[test]
    fn two_points_reach_floor() {
        for f in [2, 4] {
            let shape = Shape::new(1, f, 2).unwrap();
            let best = multi_restart(shape, &[0, 1, 2], &OptimizerSettings::default()).unwrap();
            assert!((best.best().final_action - 0.25).abs() < 1e-4, "f={f}: {}", best.best().final_action);
        }
    }

    #[test]
    fn restarts_are_deterministic() {
        let shape = Shape::new(1, 2, 3).unwrap();
        let s = OptimizerSettings::default();
        let single = minimize_two_stage(shape, 4, &s).unwrap();
        let multi = multi_restart(shape, &[4, 4], &s).unwrap();
        assert_eq!(multi.best_index, 0);
        for r in &multi.results {
            assert_eq!(r.as_ref().unwrap().final_action, single.final_action);
        }
        assert!(multi.best().action_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
