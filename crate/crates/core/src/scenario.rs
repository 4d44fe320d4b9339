//! Declarative scenarios: a plant, a controller, a reference signal, solver
//! settings and the checks to run, loaded from TOML.
//!
//! ```toml
//! id = "example"
//!
//! [system]
//! kind = "integrator-chain"
//! m = 1
//! r = 2
//! y0 = [0.0, 0.0]
//!
//! [controller]
//! kind = "funnel"
//! n = "negated-identity"
//! phi = { family = "recip-exp", c0 = 5.0, c1 = 0.1, lambda = 2.0 }
//!
//! [reference]
//! preset = "sin"
//!
//! [[verify]]
//! kind = "funnel-margin"
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;
use thiserror::Error;

use crate::bounds::{apriori_bounds, check_against_trajectory, BoundsInput, BoundsResult};
use crate::controller::Controller;
use crate::design::{AlphaFn, DesignParams, FunnelFn, SwitchingFn};
use crate::linear::StateSpace;
use crate::sim::{ref_preset, simulate, Channel, RefSignal, SimConfig, SimError, Trajectory};
use crate::systems::{
    dead_zone_example_system, delay_example_system, integrator_chain, linear_to_functional, mass_on_car,
    probe_example_system, robot_manipulator, DeadZone, FunctionalSystem,
};
use crate::util::norm;
use crate::verify::{
    asymptotic_tracking_check, compare_runs, funnel_margin, funnel_verdict, Cmp, RunComparison, Verdict,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario '{id}': {message}")]
    Invalid { id: String, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub system: SystemSpec,
    pub controller: ControllerSpec,
    /// Optional second controller run on the same plant for comparison.
    #[serde(default)]
    pub baseline: Option<ControllerSpec>,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub verify: Vec<CheckSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    MassOnCar {
        m1: f64,
        m2: f64,
        spring: f64,
        damping: f64,
        theta_deg: f64,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    Robot {
        m1: f64,
        m2: f64,
        l1: f64,
        l2: f64,
        g: f64,
    },
    DeadZoneExample {
        alphas: [f64; 5],
        #[serde(default = "unit_band")]
        band: [f64; 2],
        #[serde(default)]
        xi0: [f64; 2],
        #[serde(default)]
        eta0: f64,
    },
    ProbeExample {
        y0: f64,
    },
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    IntegratorChain {
        m: usize,
        r: usize,
        y0: Vec<f64>,
    },
    DelayExample {
        h: f64,
    },
}

fn unit_band() -> [f64; 2] {
    [-1.0, 1.0]
}

/// `"standard"` or `{ power = k }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Named(String),
    Power { power: f64 },
}

impl Default for AlphaSpec {
    fn default() -> Self {
        AlphaSpec::Named("standard".into())
    }
}

/// A name such as `"surjective-probe"` or `{ scaled = σ }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SwitchingSpec {
    Named(String),
    Scaled { scaled: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerSpec {
    Funnel {
        phi: FunnelFn,
        n: SwitchingSpec,
        #[serde(default)]
        alpha: AlphaSpec,
        /// Defaults to the relative degree.
        #[serde(default)]
        r_hat: Option<usize>,
    },
    /// Also accepts MIMO plants.
    #[serde(alias = "baseline-mimo")]
    BaselineR2 {
        phi: FunnelFn,
        #[serde(default)]
        phi1: Option<FunnelFn>,
        #[serde(default)]
        alpha: AlphaSpec,
    },
    BaselineR3 {
        phi: FunnelFn,
        #[serde(default)]
        phi1: Option<FunnelFn>,
        #[serde(default)]
        phi2: Option<FunnelFn>,
        #[serde(default)]
        alpha: AlphaSpec,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ReferenceSpec {
    Preset { preset: String },
    Channels { channels: Vec<Channel> },
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec::Preset { preset: "zero".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckSpec {
    /// `max φ‖e‖ < 1` for every controller run.
    FunnelMargin,
    /// `ε` moves by at most `tolerance` when the solver tolerances are
    /// scaled.
    MarginStability {
        #[serde(default = "default_margin_tolerance")]
        tolerance: f64,
    },
    /// Funnel-implied decay of `e^{(k)}` on `[t_tail, t_end]`.
    Tracking {
        #[serde(default)]
        k: usize,
        t_tail: f64,
    },
    /// `‖e(t_end)‖ ≤ max`.
    FinalError { max: f64 },
    /// `‖u(t)‖ ≤ max` for `t ∈ [t_from, t_to]`.
    InputBound { t_from: f64, t_to: f64, max: f64 },
    /// Every input component stays in `[min, max]` on `[t_from, t_to]`.
    InputRange { t_from: f64, t_to: f64, min: f64, max: f64 },
    /// The a-priori envelopes hold at every sample.
    Envelopes,
}

fn default_margin_tolerance() -> f64 {
    0.05
}

/// Runtime objects assembled from a scenario.
pub struct Built {
    pub system: FunctionalSystem,
    pub controller: Controller,
    pub baseline: Option<Controller>,
    pub reference: RefSignal,
    /// State-space form, for linear plants.
    pub linear: Option<StateSpace>,
}

impl Scenario {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse { path: path.to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: name.clone(), source })?;
        Self::from_toml(&text, &name)
    }

    fn invalid(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Invalid { id: self.id.clone(), message: message.into() }
    }

    /// Validates dimensions and design rules and builds the runtime objects.
    pub fn build(&self) -> Result<Built, ScenarioError> {
        self.sim.validate().map_err(|e| self.invalid(e.to_string()))?;
        let (system, linear) = self.system.build().map_err(|m| self.invalid(m))?;
        let (m, r) = (system.m(), system.r());
        let reference = match &self.reference {
            ReferenceSpec::Preset { preset } => ref_preset(preset, m).map_err(|e| self.invalid(e.to_string()))?,
            ReferenceSpec::Channels { channels } => RefSignal::new(channels.clone()),
        };
        if reference.m() != m {
            return Err(self.invalid(format!("reference has {} channels, system has m = {m}", reference.m())));
        }
        let controller = self.controller.build(r).map_err(|e| self.invalid(e))?;
        let baseline = match &self.baseline {
            Some(spec) => Some(spec.build(r).map_err(|e| self.invalid(e))?),
            None => None,
        };
        for c in std::iter::once(&controller).chain(&baseline) {
            if let Some(req) = c.required_r() {
                if req != r {
                    return Err(self.invalid(format!("{} needs r = {req}, system has r = {r}", c.label())));
                }
            }
        }
        Ok(Built { system, controller, baseline, reference, linear })
    }

    /// A-priori bounds from the funnel controller and the initial error.
    pub fn bounds(&self, built: &Built) -> Result<BoundsResult, ScenarioError> {
        let Controller::Funnel(p) = &built.controller else {
            return Err(self.invalid("bounds need a funnel controller"));
        };
        let m = built.system.m();
        let y0 = built.system.initial_history(0.0);
        let yr = built.reference.derivs(0.0, built.system.r() - 1);
        let e_init: Vec<Vec<f64>> =
            (0..p.r_hat()).map(|k| (0..m).map(|i| y0[k * m + i] - yr[k][i]).collect()).collect();
        let input = BoundsInput::new(p.r_hat(), p.phi, p.alpha.clone(), e_init, self.sim.t_end);
        apriori_bounds(&input).map_err(|e| self.invalid(e.to_string()))
    }
}

impl SystemSpec {
    fn build(&self) -> Result<(FunctionalSystem, Option<StateSpace>), String> {
        let err = |e: crate::systems::SystemError| e.to_string();
        match self {
            SystemSpec::MassOnCar { m1, m2, spring, damping, theta_deg, x0 } => {
                let x0 = x0.clone().unwrap_or_else(|| vec![0.0; 4]);
                if x0.len() != 4 {
                    return Err(format!("mass-on-car needs 4 initial states, got {}", x0.len()));
                }
                let (ss, sys) = mass_on_car(*m1, *m2, *spring, *damping, theta_deg.to_radians(), &x0).map_err(err)?;
                Ok((sys, Some(ss)))
            }
            SystemSpec::Robot { m1, m2, l1, l2, g } => Ok((robot_manipulator(*m1, *m2, *l1, *l2, *g).map_err(err)?, None)),
            SystemSpec::DeadZoneExample { alphas, band, xi0, eta0 } => {
                let beta = DeadZone::affine(band[0], band[1]).map_err(err)?;
                Ok((dead_zone_example_system(*alphas, beta, *xi0, *eta0), None))
            }
            SystemSpec::ProbeExample { y0 } => Ok((probe_example_system(*y0), None)),
            SystemSpec::Linear { a, x0, .. } => {
                let ss = self.state_space()?.expect("linear spec");
                let x0 = x0.clone().unwrap_or_else(|| vec![0.0; a.len()]);
                if x0.len() != ss.n() {
                    return Err(format!("x0 has {} entries, A is {}x{}", x0.len(), ss.n(), ss.n()));
                }
                Ok((linear_to_functional(&ss, &x0).map_err(err)?, Some(ss)))
            }
            SystemSpec::IntegratorChain { m, r, y0 } => {
                if y0.len() != m * r {
                    return Err(format!("integrator chain needs {} initial values, got {}", m * r, y0.len()));
                }
                Ok((integrator_chain(*m, *r, y0.clone()).map_err(err)?, None))
            }
            SystemSpec::DelayExample { h } => Ok((delay_example_system(*h).map_err(err)?, None)),
        }
    }

    /// The state-space realization for linear specs.
    pub fn state_space(&self) -> Result<Option<StateSpace>, String> {
        match self {
            SystemSpec::Linear { a, b, c, .. } => {
                let ss = StateSpace::new(matrix("A", a)?, matrix("B", b)?, matrix("C", c)?).map_err(|e| e.to_string())?;
                Ok(Some(ss))
            }
            SystemSpec::MassOnCar { m1, m2, spring, damping, theta_deg, .. } => {
                crate::systems::mass_on_car_state_space(*m1, *m2, *spring, *damping, theta_deg.to_radians())
                    .map(Some)
                    .map_err(|e| e.to_string())
            }
            _ => Ok(None),
        }
    }
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(format!("{name} must be a non-empty rectangular matrix"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl AlphaSpec {
    fn build(&self) -> Result<AlphaFn, String> {
        match self {
            AlphaSpec::Named(name) if name == "standard" => Ok(AlphaFn::standard()),
            AlphaSpec::Named(name) => Err(format!("unknown alpha '{name}'")),
            AlphaSpec::Power { power } if *power >= 1.0 => Ok(AlphaFn::Power(*power)),
            AlphaSpec::Power { power } => Err(format!("alpha power must be at least 1, got {power}")),
        }
    }
}

impl SwitchingSpec {
    fn build(&self) -> Result<SwitchingFn, String> {
        match self {
            SwitchingSpec::Named(name) => match name.as_str() {
                "surjective-probe" => Ok(SwitchingFn::SurjectiveProbe),
                "nussbaum" => Ok(SwitchingFn::Nussbaum),
                "identity" => Ok(SwitchingFn::Identity),
                "negated-identity" => Ok(SwitchingFn::NegatedIdentity),
                other => Err(format!("unknown switching function '{other}'")),
            },
            SwitchingSpec::Scaled { scaled } => Ok(SwitchingFn::Scaled(*scaled)),
        }
    }
}

impl ControllerSpec {
    fn build(&self, r: usize) -> Result<Controller, String> {
        let checked = |phi: &FunnelFn| phi.validate().map(|_| *phi).map_err(|e| e.to_string());
        match self {
            ControllerSpec::Funnel { phi, n, alpha, r_hat } => {
                let params = DesignParams::new(*phi, n.build()?, alpha.build()?, r, r_hat.unwrap_or(r))
                    .map_err(|e| e.to_string())?;
                Ok(Controller::Funnel(params))
            }
            ControllerSpec::BaselineR2 { phi, phi1, alpha } => Ok(Controller::BaselineR2 {
                phi: checked(phi)?,
                phi1: checked(phi1.as_ref().unwrap_or(phi))?,
                alpha: alpha.build()?,
            }),
            ControllerSpec::BaselineR3 { phi, phi1, phi2, alpha } => Ok(Controller::BaselineR3 {
                phi: checked(phi)?,
                phi1: checked(phi1.as_ref().unwrap_or(phi))?,
                phi2: checked(phi2.as_ref().unwrap_or(phi))?,
                alpha: alpha.build()?,
            }),
        }
    }
}

/// Result of running one scenario.
pub struct RunOutcome {
    pub id: String,
    /// `None` when the initial condition was rejected.
    pub trajectory: Option<Trajectory>,
    pub baseline: Option<Trajectory>,
    pub comparison: Option<RunComparison>,
    pub verdicts: Vec<Verdict>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.trajectory.as_ref().is_some_and(|t| t.status.is_completed()) && self.verdicts.iter().all(|v| v.pass)
    }
}

/// Simulates the scenario and evaluates its checks. `tolerance_scale`
/// multiplies the solver tolerances of the margin-stability rerun.
pub fn run_scenario(scn: &Scenario, tolerance_scale: f64) -> Result<RunOutcome, ScenarioError> {
    let built = scn.build()?;
    let id = scn.id.clone();
    let sim = |c: &Controller, cfg: &SimConfig| simulate(&built.system, c, &built.reference, cfg);
    let traj = match sim(&built.controller, &scn.sim) {
        Ok(t) => t,
        Err(SimError::InitialConditionRejected { level }) => {
            let v = Verdict::new(format!("initial condition (rejected at level {level})"), 1.0, Cmp::Below, 1.0, &id);
            return Ok(RunOutcome { id, trajectory: None, baseline: None, comparison: None, verdicts: vec![v] });
        }
        Err(e) => return Err(scn.invalid(e.to_string())),
    };
    let baseline = match &built.baseline {
        Some(c) => Some(sim(c, &scn.sim).map_err(|e| scn.invalid(format!("baseline: {e}")))?),
        None => None,
    };
    let runs: Vec<&Trajectory> = std::iter::once(&traj).chain(&baseline).collect();
    let alpha = match &built.controller {
        Controller::Funnel(p) => p.alpha.clone(),
        _ => AlphaFn::standard(),
    };

    let mut verdicts = Vec::new();
    for check in &scn.verify {
        match check {
            CheckSpec::FunnelMargin => {
                for t in &runs {
                    verdicts.push(funnel_verdict(t, &format!("{id}/{}", t.meta.controller)));
                }
            }
            CheckSpec::MarginStability { tolerance } => {
                let cfg = scn.sim.with_tolerance_scale(tolerance_scale);
                let rerun = sim(&built.controller, &cfg).map_err(|e| scn.invalid(e.to_string()))?;
                let drift = if rerun.status.is_completed() {
                    (funnel_margin(&rerun) - funnel_margin(&traj)).abs()
                } else {
                    f64::INFINITY
                };
                verdicts.push(Verdict::new(
                    format!("margin drift at tolerance scale {tolerance_scale}"),
                    drift,
                    Cmp::AtMost,
                    *tolerance,
                    &id,
                ));
            }
            CheckSpec::Tracking { k, t_tail } => {
                let v = asymptotic_tracking_check(&traj, &alpha, *k, *t_tail).map_err(|e| scn.invalid(e.to_string()))?;
                verdicts.push(Verdict { context: id.clone(), ..v });
            }
            CheckSpec::FinalError { max } => {
                let e = traj.e.last().map_or(f64::INFINITY, |e| norm(&e[..traj.meta.m]));
                verdicts.push(Verdict::new("final error", e, Cmp::AtMost, *max, &id));
            }
            CheckSpec::InputBound { t_from, t_to, max } => {
                let peak = window(&traj, *t_from, *t_to).map(|i| norm(&traj.u[i])).fold(0.0, f64::max);
                verdicts.push(Verdict::new(format!("max |u| on [{t_from}, {t_to}]"), peak, Cmp::AtMost, *max, &id));
            }
            CheckSpec::InputRange { t_from, t_to, min, max } => {
                let (lo, hi) = window(&traj, *t_from, *t_to)
                    .flat_map(|i| traj.u[i].iter().copied())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| (lo.min(u), hi.max(u)));
                verdicts.push(Verdict::new(format!("min u on [{t_from}, {t_to}]"), lo, Cmp::AtLeast, *min, &id));
                verdicts.push(Verdict::new(format!("max u on [{t_from}, {t_to}]"), hi, Cmp::AtMost, *max, &id));
            }
            CheckSpec::Envelopes => {
                let bounds = scn.bounds(&built)?;
                for c in check_against_trajectory(&bounds, &traj).map_err(|e| scn.invalid(e.to_string()))? {
                    verdicts.push(Verdict::new(
                        format!("envelope ratio e^({})", c.k),
                        c.worst_ratio,
                        Cmp::AtMost,
                        1.0 + crate::bounds::ENVELOPE_SLACK,
                        &id,
                    ));
                }
            }
        }
    }
    let comparison = baseline.as_ref().map(|b| compare_runs(&traj, b));
    Ok(RunOutcome { id, trajectory: Some(traj), baseline, comparison, verdicts })
}

fn window(traj: &Trajectory, t_from: f64, t_to: f64) -> impl Iterator<Item = usize> + '_ {
    (traj.index_at(t_from)..traj.len()).take_while(move |&i| traj.t[i] <= t_to)
}
