use crate::design::FunnelFn;
use crate::util::norm;

/// How a simulation ended.
#[derive(Debug, Clone, PartialEq)]
pub enum SimStatus {
    Completed,
    /// Repeated step shrinking could not keep `w` inside the guard ball.
    DomainExit { t: f64 },
    /// The integrator could not make progress for another reason.
    StepFailure { t: f64, reason: String },
}

impl SimStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, SimStatus::Completed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajMeta {
    pub label: String,
    pub controller: String,
    pub m: usize,
    pub r: usize,
    /// Number of reference derivatives fed back.
    pub r_hat: usize,
    pub phi: Option<FunnelFn>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Largest values seen over every accepted step, including those not
/// kept in the sampled output.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Peaks {
    pub phi_norm_e: f64,
    pub w_norm: f64,
    pub u_norm: f64,
}

impl Peaks {
    pub fn update(&mut self, phi_norm_e: f64, w_norm: f64, u_norm: f64) {
        self.phi_norm_e = self.phi_norm_e.max(phi_norm_e);
        self.w_norm = self.w_norm.max(w_norm);
        self.u_norm = self.u_norm.max(u_norm);
    }
}

/// Sampled closed-loop run. `y[i]` and `e[i]` hold the stacked derivatives
/// `(·, ·', …, ·^{(r-1)})` at `t[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajMeta,
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub phi_norm_e: Vec<f64>,
    pub status: SimStatus,
    pub stats: SimStats,
    pub peaks: Peaks,
}

impl Trajectory {
    pub fn new(meta: TrajMeta) -> Self {
        Self {
            meta,
            t: Vec::new(),
            y: Vec::new(),
            e: Vec::new(),
            u: Vec::new(),
            w: Vec::new(),
            phi: Vec::new(),
            phi_norm_e: Vec::new(),
            status: SimStatus::Completed,
            stats: SimStats::default(),
            peaks: Peaks::default(),
        }
    }

    pub fn push(&mut self, t: f64, y: Vec<f64>, e: Vec<f64>, u: Vec<f64>, w: Vec<f64>, phi: f64) {
        let m = self.meta.m;
        self.phi_norm_e.push(phi * norm(&e[..m]));
        self.t.push(t);
        self.y.push(y);
        self.e.push(e);
        self.u.push(u);
        self.w.push(w);
        self.phi.push(phi);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    /// `y^{(k)}` at sample `i`.
    pub fn y_deriv(&self, i: usize, k: usize) -> &[f64] {
        let m = self.meta.m;
        &self.y[i][k * m..(k + 1) * m]
    }

    /// `y^{(k)} - y_ref^{(k)}` at sample `i`.
    pub fn e_deriv(&self, i: usize, k: usize) -> &[f64] {
        let m = self.meta.m;
        &self.e[i][k * m..(k + 1) * m]
    }

    pub fn w_norm(&self, i: usize) -> f64 {
        norm(&self.w[i])
    }

    /// Largest `‖u‖` over every accepted step.
    pub fn max_u_norm(&self) -> f64 {
        self.peaks.u_norm.max(self.u.iter().map(|u| norm(u)).fold(0.0, f64::max))
    }

    /// Index of the first sample with `t >= t0`.
    pub fn index_at(&self, t0: f64) -> usize {
        self.t.partition_point(|&t| t < t0)
    }
}
