//! Closed-loop simulation with step control that treats excursions towards
//! the funnel boundary as rejected steps.

mod reference;
pub mod rk;
mod trajectory;

use serde::Deserialize;
use thiserror::Error;

use crate::controller::{
    build_info_vector, check_initial_condition, ControlAction, ControlError, Controller, InitialCheck,
};
use crate::systems::{FunctionalSystem, History, SystemError};
use crate::util::norm;

pub use reference::{ref_preset, Channel, RefSignal, SineTerm};
pub use trajectory::{Peaks, SimStats, SimStatus, TrajMeta, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("initial condition rejected: φ(0)·e(0) leaves the admissible set at level {level}")]
    InitialConditionRejected { level: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown reference preset '{0}'")]
    UnknownPreset(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt_init: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Steps whose stages reach `‖w‖ > w_guard` are rejected.
    pub w_guard: f64,
    /// Consecutive rejected shrinks before giving up with a domain exit.
    pub max_shrinks: usize,
    pub max_step: Option<f64>,
    /// Fixed step used for systems with memory (capped by the memory).
    pub delay_step: f64,
    pub max_steps: usize,
    /// Minimum spacing of recorded samples; `0` keeps every accepted step.
    /// Peaks are tracked over all steps regardless.
    pub sample_dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_end: 10.0,
            dt_init: 1e-4,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            w_guard: 0.999,
            max_shrinks: 60,
            max_step: None,
            delay_step: 1e-3,
            max_steps: 20_000_000,
            sample_dt: 1e-3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::Config(msg.to_string()));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.dt_init > 0.0) || !(self.delay_step > 0.0) {
            return bad("step sizes must be positive");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.sample_dt >= 0.0 && self.sample_dt.is_finite()) {
            return bad("sample_dt must be non-negative");
        }
        if !(self.w_guard > 0.0 && self.w_guard < 1.0) {
            return bad("w_guard must lie in (0, 1)");
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return bad("max_step must be positive");
            }
        }
        Ok(())
    }

    /// Same configuration with both tolerances multiplied by `factor`.
    pub fn with_tolerance_scale(&self, factor: f64) -> Self {
        Self { rel_tol: self.rel_tol * factor, abs_tol: self.abs_tol * factor, ..self.clone() }
    }
}

enum StageError {
    Violation,
    Guard,
    NonFinite,
    System(SystemError),
    Control(ControlError),
}

struct HistPoint {
    t: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
}

/// Output history on `[-h, now]`: the initial data for `t <= 0`, cubic
/// Hermite interpolation between accepted steps and a first-order
/// extension inside the step being attempted.
struct ClosedLoopHistory<'a> {
    system: &'a FunctionalSystem,
    points: &'a [HistPoint],
    now: f64,
}

impl History for ClosedLoopHistory<'_> {
    fn now(&self) -> f64 {
        self.now
    }

    fn start(&self) -> f64 {
        -self.system.memory()
    }

    fn sample(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 || self.points.is_empty() {
            return self.system.initial_history(t.min(0.0));
        }
        let last = self.points.last().expect("non-empty");
        if t >= last.t {
            return last.y.iter().zip(&last.dy).map(|(y, d)| y + (t - last.t) * d).collect();
        }
        let i = self.points.partition_point(|p| p.t <= t);
        let (a, b) = (&self.points[i - 1], &self.points[i]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (0..a.y.len())
            .map(|j| h00 * a.y[j] + h10 * h * a.dy[j] + h01 * b.y[j] + h11 * h * b.dy[j])
            .collect()
    }
}

struct ClosedLoop<'a> {
    system: &'a FunctionalSystem,
    controller: &'a Controller,
    yref: &'a RefSignal,
    m: usize,
    r: usize,
    guard: f64,
}

impl ClosedLoop<'_> {
    fn stack_len(&self) -> usize {
        self.r * self.m
    }

    fn action(&self, t: f64, zeta: &[f64]) -> Result<ControlAction, StageError> {
        let mut yr = Vec::with_capacity(zeta.len());
        self.yref.derivs_into(t, self.r - 1, &mut yr);
        match self.controller.evaluate_flat(t, zeta, &yr, self.m) {
            Ok(a) => Ok(a),
            Err(ControlError::FunnelViolation { .. }) => Err(StageError::Violation),
            Err(e) => Err(StageError::Control(e)),
        }
    }

    fn eval(&self, points: &[HistPoint], t: f64, x: &[f64]) -> Result<(Vec<f64>, ControlAction), StageError> {
        let n = self.stack_len();
        let (zeta, op_state) = x.split_at(n);
        let action = self.action(t, zeta)?;
        if norm(&action.w) > self.guard {
            return Err(StageError::Guard);
        }
        let history = ClosedLoopHistory { system: self.system, points, now: t };
        let top = self
            .system
            .highest_derivative(t, zeta, op_state, &history, &action.u)
            .map_err(StageError::System)?;
        let mut dx = Vec::with_capacity(x.len());
        dx.extend_from_slice(&zeta[self.m..]);
        dx.extend_from_slice(&top);
        dx.extend(self.system.operator().state_derivative(t, zeta, op_state));
        if dx.iter().chain(&action.u).any(|v| !v.is_finite()) {
            return Err(StageError::NonFinite);
        }
        Ok((dx, action))
    }

    /// Updates the peaks and, when `keep` is set, appends a sample.
    fn record(&self, traj: &mut Trajectory, t: f64, x: &[f64], action: ControlAction, keep: bool) {
        let n = self.stack_len();
        let y = &x[..n];
        let mut e = Vec::with_capacity(n);
        self.yref.derivs_into(t, self.r - 1, &mut e);
        for (ei, yi) in e.iter_mut().zip(y) {
            *ei = yi - *ei;
        }
        let phi = self.controller.funnel().map_or(0.0, |f| f.eval(t));
        traj.peaks.update(phi * norm(&e[..self.m]), norm(&action.w), norm(&action.u));
        if keep {
            traj.push(t, y.to_vec(), e, action.u, action.w, phi);
        }
    }
}

/// Integrates the closed loop on `[0, t_end]`.
///
/// Systems without memory use the adaptive Dormand–Prince pair; systems
/// with memory `h > 0` use fixed steps no longer than `h` so that every
/// delayed lookup falls on already accepted data.
pub fn simulate(
    system: &FunctionalSystem,
    controller: &Controller,
    yref: &RefSignal,
    config: &SimConfig,
) -> Result<Trajectory, SimError> {
    config.validate()?;
    let (m, r) = (system.m(), system.r());
    if yref.m() != m {
        return Err(SimError::Config(format!("reference has {} channels, system has m = {m}", yref.m())));
    }
    if let Some(req) = controller.required_r() {
        if req != r {
            return Err(SimError::Config(format!(
                "{} controller is designed for r = {req}, system has r = {r}",
                controller.label()
            )));
        }
    }
    let zeta0 = system.initial_history(0.0);
    if let Controller::Funnel(p) = controller {
        let yr = yref.derivs(0.0, r - 1);
        let blocks: Vec<&[f64]> = zeta0.chunks(m).collect();
        let info = build_info_vector(&blocks, &yr[..p.r_hat()], r, p.r_hat())?;
        if let InitialCheck::Rejected { level } = check_initial_condition(p, &info) {
            return Err(SimError::InitialConditionRejected { level });
        }
    }

    let ctx = ClosedLoop { system, controller, yref, m, r, guard: config.w_guard };
    let mut x: Vec<f64> = zeta0.iter().copied().chain(system.operator().initial_state()).collect();
    let mut points: Vec<HistPoint> = Vec::new();
    let (mut dx, a0) = match ctx.eval(&points, 0.0, &x) {
        Ok(v) => v,
        Err(StageError::Violation) => {
            return Err(SimError::InitialConditionRejected { level: controller.r_hat(r) })
        }
        Err(StageError::Guard) => {
            return Err(SimError::Config(format!("initial ‖w‖ exceeds the guard {}", config.w_guard)))
        }
        Err(StageError::NonFinite) => return Err(SimError::Config("non-finite initial derivative".into())),
        Err(StageError::System(e)) => return Err(e.into()),
        Err(StageError::Control(e)) => return Err(e.into()),
    };

    let meta = TrajMeta {
        label: system.label().to_string(),
        controller: controller.label().to_string(),
        m,
        r,
        r_hat: controller.r_hat(r),
        phi: controller.funnel().copied(),
    };
    let mut traj = Trajectory::new(meta);
    ctx.record(&mut traj, 0.0, &x, a0, true);
    let n = ctx.stack_len();
    let memory = system.memory();
    let adaptive = memory == 0.0;
    if !adaptive {
        points.push(HistPoint { t: 0.0, y: x[..n].to_vec(), dy: dx[..n].to_vec() });
    }
    let fixed = config.delay_step.min(memory);
    let mut h = if adaptive { config.dt_init } else { fixed };
    let mut t = 0.0;
    let mut shrinks = 0usize;
    let t_end = config.t_end;
    let h_min = 1e-14 * t_end.max(1.0);

    while t < t_end {
        if traj.stats.accepted + traj.stats.rejected >= config.max_steps {
            traj.status = SimStatus::StepFailure { t, reason: "step budget exhausted".into() };
            break;
        }
        let mut h_try = h.min(t_end - t);
        if let Some(ms) = config.max_step {
            h_try = h_try.min(ms);
        }
        let mut last = None;
        let result = {
            let mut f = |tt: f64, xx: &[f64]| -> Result<Vec<f64>, StageError> {
                let (d, a) = ctx.eval(&points, tt, xx)?;
                last = Some(a);
                Ok(d)
            };
            rk::dp45_step(&mut f, t, &x, &dx, h_try, config.rel_tol, config.abs_tol)
        };
        traj.stats.rhs_evals += 6;
        match result {
            Ok(step) if !adaptive || step.err <= 1.0 => {
                t = if t_end - (t + h_try) <= h_min { t_end } else { t + h_try };
                x = step.x;
                dx = step.dx;
                let keep = t >= t_end || t >= traj.t_end() + config.sample_dt;
                ctx.record(&mut traj, t, &x, last.expect("final stage evaluated"), keep);
                if !adaptive {
                    points.push(HistPoint { t, y: x[..n].to_vec(), dy: dx[..n].to_vec() });
                }
                traj.stats.accepted += 1;
                shrinks = 0;
                h = if adaptive { h_try * rk::step_factor(step.err) } else { fixed };
            }
            Ok(step) => {
                traj.stats.rejected += 1;
                h = h_try * rk::step_factor(step.err).min(0.9);
                if h < h_min {
                    traj.status = SimStatus::StepFailure { t, reason: "step size underflow".into() };
                    break;
                }
            }
            Err(StageError::Violation) | Err(StageError::Guard) | Err(StageError::NonFinite) => {
                traj.stats.rejected += 1;
                shrinks += 1;
                h = h_try * 0.5;
                if shrinks > config.max_shrinks || h < h_min {
                    traj.status = SimStatus::DomainExit { t };
                    break;
                }
            }
            Err(StageError::System(e)) => {
                traj.status = SimStatus::StepFailure { t, reason: e.to_string() };
                break;
            }
            Err(StageError::Control(e)) => return Err(e.into()),
        }
    }
    Ok(traj)
}

/// Largest discrepancy between a three-point finite difference of
/// `y^{(k)}` and the recorded `y^{(k+1)}`, over interior samples and
/// `k < r - 1`.
pub fn derivative_consistency(traj: &Trajectory) -> f64 {
    let r = traj.meta.r;
    let m = traj.meta.m;
    let mut worst: f64 = 0.0;
    for i in 1..traj.len().saturating_sub(1) {
        let (t0, t1, t2) = (traj.t[i - 1], traj.t[i], traj.t[i + 1]);
        let (hm, hp) = (t1 - t0, t2 - t1);
        for k in 0..r.saturating_sub(1) {
            for j in 0..m {
                let idx = k * m + j;
                let (f0, f1, f2) = (traj.y[i - 1][idx], traj.y[i][idx], traj.y[i + 1][idx]);
                let fd = (hm * hm * f2 - hp * hp * f0 - (hm * hm - hp * hp) * f1) / (hm * hp * (hm + hp));
                worst = worst.max((fd - traj.y[i][idx + m]).abs());
            }
        }
    }
    worst
}
