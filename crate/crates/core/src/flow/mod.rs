//! Explicit time integration of the ε-regularized constrained flow
//! `u_t = π_u(div Z)`, `Z = ∇u / √(ε² + |∇u|²)`, with a closest-point
//! retraction after every step.

mod trajectory;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::geodesic_diameter;
use crate::error::{Error, Result};
use crate::geometry::Manifold;
use crate::grid::{divergence_into, flux_in_place, gradient_into, Field, GridDomain};

pub use trajectory::{DiagnosticsRow, Segment, Snapshot, Trajectory};

/// Relative energy increase between snapshots that aborts a run.
pub const INSTABILITY_TOL: f64 = 1e-6;

/// Geodesic diameter below which a field counts as constant.
pub const EXTINCTION_DIAMETER: f64 = 1e-6;

/// Steps between two extinction checks.
const EXTINCTION_CHECK_EVERY: u64 = 16;

/// Which of the two equivalent right-hand sides to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsForm {
    /// `π_u(div Z)`.
    #[default]
    Project,
    /// `div Z − Σ_j A_u(π∇_j u, πZ_j)`.
    SecondFundamental,
}

/// What to do once `t` reaches the guaranteed existence horizon
/// `T† = 1 / (K ‖v₀‖_∞)` of a positively curved target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonPolicy {
    /// End the run at `T†`.
    #[default]
    Stop,
    /// Record the crossing and keep going.
    Warn,
}

/// One stage of an ε-continuation schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsStage {
    pub epsilon: f64,
    /// Length of the stage; the last stage runs until `t_end` regardless.
    pub duration: f64,
}

fn default_dt_safety() -> f64 {
    0.45
}

fn default_stride() -> u64 {
    100
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub epsilon: f64,
    #[serde(default = "default_dt_safety")]
    pub dt_safety: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: u64,
    /// Overrides `epsilon` when present.
    #[serde(default)]
    pub eps_schedule: Option<Vec<EpsStage>>,
    #[serde(default)]
    pub rhs_form: RhsForm,
    #[serde(default)]
    pub horizon: HorizonPolicy,
    #[serde(default = "default_true")]
    pub stop_on_extinction: bool,
}

impl FlowConfig {
    pub fn new(epsilon: f64, t_end: f64) -> Self {
        FlowConfig {
            epsilon,
            dt_safety: default_dt_safety(),
            t_end,
            snapshot_stride: default_stride(),
            eps_schedule: None,
            rhs_form: RhsForm::Project,
            horizon: HorizonPolicy::Stop,
            stop_on_extinction: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Err(Error::config(key, reason));
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad("epsilon", "must be positive");
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad("dt_safety", "must lie in (0, 1]");
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad("t_end", "must be nonnegative and finite");
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride", "must be positive");
        }
        if let Some(s) = &self.eps_schedule {
            if s.is_empty() {
                return bad("eps_schedule", "must not be empty");
            }
            for (i, st) in s.iter().enumerate() {
                if !(st.epsilon > 0.0) || !(st.duration >= 0.0) {
                    return bad("eps_schedule", "epsilon must be positive, durations nonnegative");
                }
                if i > 0 && st.epsilon >= s[i - 1].epsilon {
                    return bad("eps_schedule", "epsilon values must be strictly decreasing");
                }
            }
        }
        Ok(())
    }

    /// `(start time, ε)` for each stage that begins before `t_end`.
    pub fn stages(&self) -> Vec<(f64, f64)> {
        match &self.eps_schedule {
            None => vec![(0.0, self.epsilon)],
            Some(s) => {
                let mut out = Vec::new();
                let mut t = 0.0;
                for st in s {
                    if t > self.t_end || (t == self.t_end && !out.is_empty()) {
                        break;
                    }
                    out.push((t, st.epsilon));
                    t += st.duration;
                }
                out
            }
        }
    }

    pub fn initial_epsilon(&self) -> f64 {
        self.stages()[0].1
    }
}

/// Integrator state.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub u: Field,
    /// `Σ dt·hᵐ·Σ_x |u_t|²`.
    pub dissipation_acc: f64,
    pub step_count: u64,
}

impl FlowState {
    pub fn new(u: Field) -> Self {
        FlowState {
            t: 0.0,
            u,
            dissipation_acc: 0.0,
            step_count: 0,
        }
    }
}

/// `c·ε·h²/(2m)`.
pub fn stable_dt(domain: &GridDomain, eps: f64, c: f64) -> f64 {
    let h = domain.spacing();
    c * eps * h * h / (2.0 * domain.dim() as f64)
}

/// Energy and gradient bound of the field an rhs was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsInfo {
    /// `hᵐ Σ √(ε² + |∇u|²)`.
    pub energy: f64,
    /// `max_x √(ε² + |∇u|²)`.
    pub sup_v: f64,
}

/// Evaluates the rhs with reusable buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    domain: Arc<GridDomain>,
    manifold: Arc<Manifold>,
    form: RhsForm,
    grad: Vec<f64>,
    tangent_grad: Vec<f64>,
    v_inv: Vec<f64>,
    div: Vec<f64>,
    rhs: Vec<f64>,
    next: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new(domain: Arc<GridDomain>, manifold: Arc<Manifold>, form: RhsForm) -> Self {
        let n = manifold.ambient_dim();
        let q = domain.num_cells();
        let m = domain.dim();
        let sf = form == RhsForm::SecondFundamental;
        Stepper {
            grad: vec![0.0; q * m * n],
            tangent_grad: if sf { vec![0.0; q * m * n] } else { Vec::new() },
            v_inv: if sf { vec![0.0; q] } else { Vec::new() },
            div: vec![0.0; q * n],
            rhs: vec![0.0; q * n],
            next: vec![0.0; q * n],
            tmp: vec![0.0; 2 * n],
            domain,
            manifold,
            form,
        }
    }

    /// Fills the internal rhs buffer for `values` and returns energy data.
    fn eval(&mut self, values: &[f64], eps: f64) -> RhsInfo {
        let d = &*self.domain;
        let man = &*self.manifold;
        let n = man.ambient_dim();
        let m = d.dim();
        let w = m * n;
        gradient_into(d, n, values, &mut self.grad);
        let is_euclidean = matches!(man, Manifold::Euclidean { .. });
        if self.form == RhsForm::SecondFundamental && !is_euclidean {
            let eps2 = eps * eps;
            for &c in d.inside_cells() {
                let c = c as usize;
                let g2 = crate::linalg::norm_sq(&self.grad[c * w..(c + 1) * w]);
                self.v_inv[c] = 1.0 / (eps2 + g2).sqrt();
                let p = &values[c * n..(c + 1) * n];
                for k in 0..m {
                    let r = (c * m + k) * n..(c * m + k + 1) * n;
                    man.tangent_project(p, &self.grad[r.clone()], &mut self.tangent_grad[r]);
                }
            }
        }
        let (sum, vmax) = flux_in_place(d, w, eps, &mut self.grad);
        if is_euclidean {
            // cells outside the mask have no active faces, so their
            // divergence is already zero
            divergence_into(d, n, &self.grad, &mut self.rhs);
        } else {
            divergence_into(d, n, &self.grad, &mut self.div);
            match self.form {
                RhsForm::Project if d.mask().is_none() => {
                    man.tangent_project_cells(values, &self.div, &mut self.rhs);
                }
                RhsForm::Project => {
                    self.rhs.iter_mut().for_each(|x| *x = 0.0);
                    for &c in d.inside_cells() {
                        let cell = c as usize * n..(c as usize + 1) * n;
                        man.tangent_project(&values[cell.clone()], &self.div[cell.clone()], &mut self.rhs[cell]);
                    }
                }
                RhsForm::SecondFundamental => {
                    self.rhs.iter_mut().for_each(|x| *x = 0.0);
                    let (a, _) = self.tmp.split_at_mut(n);
                    for &c in d.inside_cells() {
                        let c = c as usize;
                        let cell = c * n..(c + 1) * n;
                        let p = &values[cell.clone()];
                        // Z_j = ∇_j u / v, so π Z_j = π∇_j u / v
                        let v_inv = self.v_inv[c];
                        let out = &mut self.rhs[cell.clone()];
                        out.copy_from_slice(&self.div[cell]);
                        for k in 0..m {
                            let t = &self.tangent_grad[(c * m + k) * n..(c * m + k + 1) * n];
                            man.second_fundamental_form(p, t, t, a);
                            for (o, ai) in out.iter_mut().zip(a.iter()) {
                                *o -= v_inv * ai;
                            }
                        }
                    }
                }
            }
        }
        RhsInfo {
            energy: d.cell_volume() * sum,
            sup_v: vmax,
        }
    }

    /// The rhs of `u` at regularization `eps`, per cell `N` reals (zero on
    /// cells outside the mask).
    pub fn rhs(&mut self, u: &Field, eps: f64) -> (Vec<f64>, RhsInfo) {
        let info = self.eval(u.values(), eps);
        (self.rhs.clone(), info)
    }

    /// One explicit Euler step followed by retraction. Returns the energy
    /// data of the state before the step.
    pub fn step(&mut self, state: &mut FlowState, eps: f64, dt: f64) -> Result<RhsInfo> {
        let info = self.eval(state.u.values(), eps);
        let n = self.manifold.ambient_dim();
        let man = &*self.manifold;
        let euclidean = matches!(man, Manifold::Euclidean { .. });
        let values = state.u.values();
        let rhs = &self.rhs;
        let next = &mut self.next;
        let mut sq = 0.0;
        if self.domain.mask().is_none() {
            if euclidean {
                for ((o, u), r) in next.iter_mut().zip(values).zip(rhs) {
                    *o = u + dt * r;
                }
            } else {
                // the divergence buffer is free once the rhs is formed
                let y = &mut self.div;
                for ((yi, u), r) in y.iter_mut().zip(values).zip(rhs) {
                    *yi = u + dt * r;
                }
                man.retract_cells(y, next)?;
            }
            for (a, b) in next.iter().zip(values) {
                let d = a - b;
                sq += d * d;
            }
        } else {
            let (y, _) = self.tmp.split_at_mut(n);
            next.copy_from_slice(values);
            for &c in self.domain.inside_cells() {
                let cell = c as usize * n..(c as usize + 1) * n;
                let (u, r, out) = (&values[cell.clone()], &rhs[cell.clone()], &mut next[cell]);
                for ((yi, ui), ri) in y.iter_mut().zip(u).zip(r) {
                    *yi = ui + dt * ri;
                }
                man.retract(y, out)?;
                for (a, b) in out.iter().zip(u) {
                    let d = a - b;
                    sq += d * d;
                }
            }
        }
        std::mem::swap(state.u.values_mut(), &mut self.next);
        if dt > 0.0 {
            state.dissipation_acc += self.domain.cell_volume() * sq / dt;
        }
        state.t += dt;
        state.step_count += 1;
        Ok(info)
    }
}

/// rhs of `u` at `eps` in the given form.
pub fn rhs(u: &Field, eps: f64, form: RhsForm) -> Vec<f64> {
    assert!(eps > 0.0, "regularization must be positive");
    Stepper::new(u.domain().clone(), u.manifold().clone(), form).rhs(u, eps).0
}

/// A single step of size `stable_dt` at `cfg.epsilon`.
pub fn step(state: &FlowState, cfg: &FlowConfig) -> Result<FlowState> {
    let mut s = state.clone();
    let mut stepper = Stepper::new(s.u.domain().clone(), s.u.manifold().clone(), cfg.rhs_form);
    let dt = stable_dt(s.u.domain(), cfg.epsilon, cfg.dt_safety);
    stepper.step(&mut s, cfg.epsilon, dt)?;
    Ok(s)
}

/// `true` if the geodesic diameter of `u` over inside cells is below
/// [`EXTINCTION_DIAMETER`].
pub fn is_extinct(u: &Field) -> bool {
    let cells = u.domain().inside_cells();
    let man = u.manifold();
    let p0 = u.value(cells[0] as usize);
    // the diameter lies between r0 and 2·r0
    let mut r0 = 0.0f64;
    for &c in cells {
        r0 = r0.max(man.distance(p0, u.value(c as usize)));
        if r0 >= EXTINCTION_DIAMETER {
            return false;
        }
    }
    2.0 * r0 < EXTINCTION_DIAMETER || geodesic_diameter(u) < EXTINCTION_DIAMETER
}

struct Recorder {
    snapshots: Vec<Snapshot>,
    rows: Vec<DiagnosticsRow>,
}

impl Recorder {
    fn record(&mut self, state: &FlowState, eps: f64, info: RhsInfo) -> Result<()> {
        if let Some(prev) = self.rows.last() {
            if prev.t == state.t {
                return Ok(());
            }
            if info.energy > prev.energy * (1.0 + INSTABILITY_TOL) {
                return Err(Error::Instability {
                    t: state.t,
                    before: prev.energy,
                    after: info.energy,
                });
            }
        }
        self.rows.push(DiagnosticsRow {
            t: state.t,
            eps,
            step: state.step_count,
            energy: info.energy,
            dissipation: state.dissipation_acc,
            sup_v: info.sup_v,
        });
        self.snapshots.push(Snapshot {
            t: state.t,
            eps,
            step: state.step_count,
            field: state.u.clone(),
        });
        Ok(())
    }
}

/// Integrates from `u0` until `t_end`, extinction (if
/// `stop_on_extinction`), or the existence horizon (under
/// [`HorizonPolicy::Stop`]).
pub fn run(u0: &Field, cfg: &FlowConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let domain = u0.domain().clone();
    let manifold = u0.manifold().clone();
    let stages = cfg.stages();
    let mut stepper = Stepper::new(domain.clone(), manifold.clone(), cfg.rhs_form);
    let mut state = FlowState::new(u0.clone());

    let eps0 = stages[0].1;
    let info0 = stepper.eval(u0.values(), eps0);
    let k = manifold.curvature_sup();
    let horizon = (k > 0.0).then(|| 1.0 / (k * info0.sup_v));
    let mut rec = Recorder {
        snapshots: Vec::new(),
        rows: Vec::new(),
    };
    rec.record(&state, eps0, info0)?;

    let mut segments = Vec::new();
    let mut horizon_reached = None;
    let mut extinction_time = is_extinct(u0).then_some(0.0);
    let mut done = extinction_time.is_some() && cfg.stop_on_extinction;

    for (si, &(t_start, eps)) in stages.iter().enumerate() {
        if done {
            break;
        }
        let mut t_stop = stages.get(si + 1).map_or(cfg.t_end, |s| s.0).min(cfg.t_end);
        if let (Some(tdag), HorizonPolicy::Stop) = (horizon, cfg.horizon) {
            t_stop = t_stop.min(tdag);
        }
        let dt = stable_dt(&domain, eps, cfg.dt_safety);
        segments.push(Segment {
            t_start,
            epsilon: eps,
            dt,
            first_snapshot: rec.snapshots.len(),
        });
        let mut k_steps: u64 = 0;
        while state.t < t_stop {
            let remaining = t_stop - state.t;
            let last = remaining <= dt * (1.0 + 1e-9);
            let this_dt = if last { remaining } else { dt };
            stepper.step(&mut state, eps, this_dt)?;
            k_steps += 1;
            // avoid drift from repeated addition
            state.t = if last { t_stop } else { t_start + k_steps as f64 * dt };

            if horizon_reached.is_none() && horizon.is_some_and(|h| state.t >= h) {
                horizon_reached = Some(state.t);
            }
            let snap = state.step_count.is_multiple_of(cfg.snapshot_stride);
            if extinction_time.is_none()
                && state.step_count.is_multiple_of(EXTINCTION_CHECK_EVERY)
                && is_extinct(&state.u)
            {
                extinction_time = Some(state.t);
                let info = stepper.eval(state.u.values(), eps);
                rec.record(&state, eps, info)?;
                if cfg.stop_on_extinction {
                    done = true;
                    break;
                }
            } else if snap {
                let info = stepper.eval(state.u.values(), eps);
                rec.record(&state, eps, info)?;
            }
        }
        if !done && horizon_reached.is_some() && cfg.horizon == HorizonPolicy::Stop {
            done = true;
        }
    }
    let eps_last = segments.last().map_or(eps0, |s| s.epsilon);
    let info = stepper.eval(state.u.values(), eps_last);
    rec.record(&state, eps_last, info)?;

    Ok(Trajectory {
        snapshots: rec.snapshots,
        rows: rec.rows,
        segments,
        config: cfg.clone(),
        sup_v0: info0.sup_v,
        horizon,
        horizon_reached,
        extinction_time,
    })
}

#[cfg(test)]
mod tests;
