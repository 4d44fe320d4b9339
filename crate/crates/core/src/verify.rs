//! Numerical checks of closed-loop runs and of the high-gain property.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::controller::gamma;
use crate::design::AlphaFn;
use crate::sim::Trajectory;
use crate::util::{norm, sub};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("hypothesis mismatch: {0}")]
    HypothesisMismatch(String),
    #[error("invalid probe: {0}")]
    Probe(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Below,
    AtMost,
    AtLeast,
}

impl Cmp {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Cmp::Below => value < threshold,
            Cmp::AtMost => value <= threshold,
            Cmp::AtLeast => value >= threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Below => "<",
            Cmp::AtMost => "<=",
            Cmp::AtLeast => ">=",
        }
    }
}

/// One named check. `pass` always equals `cmp` applied to `value` and
/// `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub quantity: String,
    pub value: f64,
    pub cmp: Cmp,
    pub threshold: f64,
    pub pass: bool,
    pub context: String,
}

impl Verdict {
    pub fn new(quantity: impl Into<String>, value: f64, cmp: Cmp, threshold: f64, context: impl Into<String>) -> Self {
        Self {
            quantity: quantity.into(),
            value,
            cmp,
            threshold,
            pass: cmp.holds(value, threshold),
            context: context.into(),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {} = {:.6e} {} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.context,
            self.quantity,
            self.value,
            self.cmp.symbol(),
            self.threshold
        )
    }
}

/// `ε = max φ(t)‖e(t)‖` over every accepted step.
pub fn funnel_margin(traj: &Trajectory) -> f64 {
    traj.phi_norm_e.iter().copied().fold(traj.peaks.phi_norm_e, f64::max)
}

/// Passes when the run completed and `ε < 1`.
pub fn funnel_verdict(traj: &Trajectory, context: &str) -> Verdict {
    let eps = if traj.status.is_completed() { funnel_margin(traj) } else { f64::INFINITY };
    Verdict::new("funnel margin", eps, Cmp::Below, 1.0, context)
}

/// Sampling parameters for the high-gain function
/// `χ(s) = min ⟨v, f(δ, z, -s v)⟩` over `(δ, z) ∈ K_p × K_q` and
/// `v* ≤ ‖v‖ ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiProbe {
    pub m: usize,
    pub v_star: f64,
    pub k_p: Vec<(f64, f64)>,
    pub k_q: Vec<(f64, f64)>,
    /// Positive magnitudes; [`high_gain_verdict`] uses both signs.
    pub s_grid: Vec<f64>,
    /// Points per radial grid `[v*, 1]`.
    pub v_grid_density: usize,
    /// Points per box axis.
    pub box_grid_density: usize,
    /// Unit directions for `m > 1`, after the signed coordinate axes.
    pub directions: usize,
    pub seed: u64,
}

impl ChiProbe {
    /// Point boxes at the origin, `|s|` from 10⁻² to 10⁶ with eight points
    /// per decade, and 512 directions × 16 radii.
    pub fn new(m: usize, p: usize, q: usize, v_star: f64) -> Self {
        Self {
            m,
            v_star,
            k_p: vec![(0.0, 0.0); p],
            k_q: vec![(0.0, 0.0); q],
            s_grid: geometric_grid(1e-2, 1e6, 8),
            v_grid_density: 16,
            box_grid_density: 1,
            directions: 512,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        let bad = |msg: &str| Err(VerifyError::Probe(msg.to_string()));
        if !(self.v_star > 0.0 && self.v_star < 1.0) {
            return bad("v_star must lie in (0, 1)");
        }
        if self.m == 0 || self.v_grid_density == 0 || self.box_grid_density == 0 {
            return bad("dimensions and grid densities must be positive");
        }
        if self.s_grid.is_empty() || self.s_grid.iter().any(|s| !(*s > 0.0)) {
            return bad("s_grid must hold positive magnitudes");
        }
        if self.k_p.iter().chain(&self.k_q).any(|(lo, hi)| !(lo <= hi)) {
            return bad("box intervals must satisfy lo <= hi");
        }
        Ok(())
    }

    fn radii(&self) -> Vec<f64> {
        linspace(self.v_star, 1.0, self.v_grid_density)
    }

    /// Test vectors `v` of the annulus.
    fn vectors(&self) -> Vec<Vec<f64>> {
        let radii = self.radii();
        if self.m == 1 {
            return radii.iter().flat_map(|&r| [vec![r], vec![-r]]).collect();
        }
        let mut dirs = Vec::with_capacity(2 * self.m + self.directions);
        for i in 0..self.m {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; self.m];
                d[i] = sign;
                dirs.push(d);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        while dirs.len() < 2 * self.m + self.directions {
            let d: Vec<f64> = (0..self.m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = norm(&d);
            if n > 1e-3 && n <= 1.0 {
                dirs.push(d.iter().map(|x| x / n).collect());
            }
        }
        dirs.iter().flat_map(|d| radii.iter().map(move |&r| d.iter().map(|x| r * x).collect())).collect()
    }

    /// Grid points of `K_p × K_q`, split into `(δ, z)`.
    fn box_points(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let axes: Vec<Vec<f64>> = self
            .k_p
            .iter()
            .chain(&self.k_q)
            .map(|&(lo, hi)| if lo == hi { vec![lo] } else { linspace(lo, hi, self.box_grid_density) })
            .collect();
        let p = self.k_p.len();
        let mut out = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        loop {
            let point: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
            let (d, z) = point.split_at(p);
            out.push((d.to_vec(), z.to_vec()));
            let mut j = 0;
            while j < axes.len() {
                idx[j] += 1;
                if idx[j] < axes[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == axes.len() {
                return out;
            }
        }
    }
}

/// `n` points from `lo` to `hi`; a single point when `n == 1` is `lo`.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Logarithmically spaced points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).round() as usize + 1;
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1).max(1) as f64)).collect()
}

pub type ProbeFn<'a> = &'a dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64>;

/// Grid estimate of `χ(s)`. It is an upper bound of the true minimum and
/// never increases when the grids are refined to supersets.
pub fn chi_estimate(f: ProbeFn, probe: &ChiProbe, s: f64) -> f64 {
    let vectors = probe.vectors();
    let boxes = probe.box_points();
    let mut chi = f64::INFINITY;
    for (delta, z) in &boxes {
        for v in &vectors {
            let u: Vec<f64> = v.iter().map(|x| -s * x).collect();
            let fv = f(delta, z, &u);
            chi = chi.min(v.iter().zip(&fv).map(|(a, b)| a * b).sum());
        }
    }
    chi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HighGainSide {
    /// Growth for `s < 0`, as for `f = Γu` with `Γ > 0`.
    PositiveDefinite,
    NegativeDefinite,
    Both,
    /// No growth seen on the grid; this is evidence, not a disproof.
    Undetected,
}

impl HighGainSide {
    pub fn as_str(self) -> &'static str {
        match self {
            HighGainSide::PositiveDefinite => "positive-definite",
            HighGainSide::NegativeDefinite => "negative-definite",
            HighGainSide::Both => "both",
            HighGainSide::Undetected => "undetected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighGainReport {
    pub side: HighGainSide,
    /// `(s, χ(s))` for `s > 0`, in grid order.
    pub positive: Vec<(f64, f64)>,
    pub negative: Vec<(f64, f64)>,
}

/// Growth factor over the smallest-`|s|` sample that counts as unbounded.
pub const GROWTH_FACTOR: f64 = 10.0;

fn grows(samples: &[(f64, f64)]) -> bool {
    let base = samples
        .iter()
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .map_or(f64::INFINITY, |&(_, chi)| chi);
    let threshold = GROWTH_FACTOR * base.max(1.0);
    samples.iter().any(|&(_, chi)| chi > threshold)
}

/// Samples `χ(±s)` for `s` in the probe grid up to `s_max` and reports
/// on which side it grows past `10·max(1, χ at the smallest |s|)`.
pub fn high_gain_verdict(f: ProbeFn, probe: &ChiProbe, s_max: f64) -> Result<HighGainReport, VerifyError> {
    probe.validate()?;
    let grid: Vec<f64> = probe.s_grid.iter().copied().filter(|&s| s <= s_max).collect();
    let positive: Vec<(f64, f64)> = grid.iter().map(|&s| (s, chi_estimate(f, probe, s))).collect();
    let negative: Vec<(f64, f64)> = grid.iter().map(|&s| (-s, chi_estimate(f, probe, -s))).collect();
    let side = match (grows(&negative), grows(&positive)) {
        (true, true) => HighGainSide::Both,
        (true, false) => HighGainSide::PositiveDefinite,
        (false, true) => HighGainSide::NegativeDefinite,
        (false, false) => HighGainSide::Undetected,
    };
    Ok(HighGainReport { side, positive, negative })
}

/// Checks `φ(t)‖e^{(k)}(t)‖ ≤ 1 + ‖γ(w_k(t))‖` on `[t_tail, t_end]`, where
/// `w_k` is the `k`-th stage of the controller recursion (`γ(w_0) = 0`), and
/// `‖e(t_end)‖ ≤ 1/φ(t_end)`. The reported value is the largest ratio of
/// left to right side.
pub fn asymptotic_tracking_check(
    traj: &Trajectory,
    alpha: &AlphaFn,
    k: usize,
    t_tail: f64,
) -> Result<Verdict, VerifyError> {
    let meta = &traj.meta;
    let phi = match meta.phi {
        Some(phi) if !phi.is_bounded() => phi,
        _ => return Err(VerifyError::HypothesisMismatch("an unbounded funnel function is required".into())),
    };
    if meta.r_hat != meta.r {
        return Err(VerifyError::HypothesisMismatch(format!("r_hat = {} differs from r = {}", meta.r_hat, meta.r)));
    }
    if k >= meta.r {
        return Err(VerifyError::HypothesisMismatch(format!("derivative {k} is not recorded (r = {})", meta.r)));
    }
    if traj.is_empty() {
        return Err(VerifyError::HypothesisMismatch("empty trajectory".into()));
    }
    let ratio = |i: usize| {
        let p = phi.eval(traj.t[i]);
        let mut w: Vec<f64> = traj.e_deriv(i, 0).iter().map(|x| p * x).collect();
        let mut g = vec![0.0; meta.m];
        for j in 1..=k {
            g = match gamma(&w, alpha) {
                Ok(g) => g,
                Err(_) => return f64::INFINITY,
            };
            w = traj.e_deriv(i, j).iter().zip(&g).map(|(e, g)| p * e + g).collect();
        }
        p * norm(traj.e_deriv(i, k)) / (1.0 + norm(&g))
    };
    let last = traj.len() - 1;
    let tail = (traj.index_at(t_tail)..traj.len()).map(ratio).fold(0.0, f64::max);
    let end = phi.eval(traj.t[last]) * norm(traj.e_deriv(last, 0));
    let value = tail.max(end);
    Ok(Verdict::new(format!("tail ratio e^({k})"), value, Cmp::AtMost, 1.0, meta.label.clone()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub label: String,
    pub max_u: f64,
    /// `(∫‖u‖² dt)^{1/2}` by the trapezoid rule.
    pub l2_effort: f64,
    pub epsilon: f64,
}

impl RunMetrics {
    pub fn of(traj: &Trajectory) -> Self {
        let l2: f64 = traj
            .t
            .windows(2)
            .zip(traj.u.windows(2))
            .map(|(t, u)| 0.5 * (t[1] - t[0]) * (norm(&u[0]).powi(2) + norm(&u[1]).powi(2)))
            .sum();
        Self {
            label: format!("{}/{}", traj.meta.label, traj.meta.controller),
            max_u: traj.max_u_norm(),
            l2_effort: l2.sqrt(),
            epsilon: funnel_margin(traj),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunComparison {
    pub a: RunMetrics,
    pub b: RunMetrics,
    /// `max ‖e_a(t) - e_b(t)‖` over the samples of `a`, with `b` linearly
    /// interpolated.
    pub max_error_gap: f64,
}

pub fn compare_runs(a: &Trajectory, b: &Trajectory) -> RunComparison {
    let m = a.meta.m;
    let gap = if b.is_empty() || m != b.meta.m {
        f64::NAN
    } else {
        (0..a.len())
            .map(|i| norm(&sub(a.e_deriv(i, 0), &interp_error(b, a.t[i])[..m])))
            .fold(0.0, f64::max)
    };
    RunComparison { a: RunMetrics::of(a), b: RunMetrics::of(b), max_error_gap: gap }
}

/// Stacked error of `traj` at `t`, linearly interpolated and clamped to the
/// recorded range.
fn interp_error(traj: &Trajectory, t: f64) -> Vec<f64> {
    let j = traj.index_at(t);
    if j == 0 {
        return traj.e[0].clone();
    }
    if j >= traj.len() {
        return traj.e[traj.len() - 1].clone();
    }
    if traj.t[j] == t {
        return traj.e[j].clone();
    }
    let (t0, t1) = (traj.t[j - 1], traj.t[j]);
    let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
    traj.e[j - 1].iter().zip(&traj.e[j]).map(|(x, y)| x + s * (y - x)).collect()
}
