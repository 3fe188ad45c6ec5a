//! Audits of a trajectory against the quantitative statements the flow
//! should satisfy.

mod contraction;
mod diameter;
mod karcher;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::grid::Field;

pub use contraction::{contraction_audit, l2_gap_series, perturb, ContractionOutcome, CONTRACTION_LOG_TOL};
pub use diameter::{geodesic_diameter, EXACT_DIAMETER_CELLS};
pub use karcher::{f_mu, fmu_decay_audit, karcher_mean, FmuDecay, FMU_FIT_TOL, FMU_ZERO};

pub use crate::grid::sup_v;

/// Relative slack of the energy inequality.
pub const ENERGY_TOL: f64 = 1e-4;

/// Absolute energy increase tolerated per step by the monotonicity check.
pub const ENERGY_STEP_SLACK: f64 = 1e-10;

/// Relative slack of the gradient bound on nonpositively curved targets.
pub const FLAT_ENVELOPE_TOL: f64 = 1e-3;

/// Relative slack of the blow-up envelope on positively curved targets.
pub const CURVED_ENVELOPE_TOL: f64 = 5e-2;

/// Fraction of `T†` up to which the blow-up envelope is audited.
pub const HORIZON_FRACTION: f64 = 0.8;

/// Relative slack of the ball invariance check.
pub const BALL_TOL: f64 = 1e-6;

/// Outcome of one audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the audited quantity.
    pub measured: f64,
    /// Value it is compared against.
    pub bound: f64,
    pub tolerance: f64,
    /// Witnesses of failure: snapshot times for trajectory audits, offending
    /// distances for geometric ones.
    pub violations: Vec<f64>,
    /// Further measured numbers (fitted constants, times).
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl AuditReport {
    /// A report that passes iff `violations` is empty.
    pub fn new(name: &str, measured: f64, bound: f64, tolerance: f64, violations: Vec<f64>) -> Self {
        AuditReport {
            name: name.to_string(),
            passed: violations.is_empty(),
            measured,
            bound,
            tolerance,
            violations,
            details: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    /// Marks the report failed with a witness time.
    pub(crate) fn fail_at(&mut self, t: f64) {
        self.passed = false;
        self.violations.push(t);
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn require_snapshots(traj: &Trajectory, n: usize) -> Result<()> {
    if traj.len() < n {
        return Err(Error::Precondition(format!(
            "audit needs at least {n} snapshots, trajectory has {}",
            traj.len()
        )));
    }
    Ok(())
}

/// `sup_t E_ε(t) + dissipation(t) ≤ E_ε(0)·(1 + tol)` and `E_ε`
/// nonincreasing between snapshots.
pub fn energy_audit(traj: &Trajectory) -> Result<AuditReport> {
    require_snapshots(traj, 2)?;
    let e0 = traj.rows[0].energy;
    let bound = e0 * (1.0 + ENERGY_TOL);
    let mut worst = f64::MIN;
    let mut violations = Vec::new();
    let mut max_increase = 0.0f64;
    for (j, r) in traj.rows.iter().enumerate() {
        let total = r.energy + r.dissipation;
        worst = worst.max(total);
        let mut bad = total > bound;
        if j > 0 {
            let prev = &traj.rows[j - 1];
            let slack = ENERGY_STEP_SLACK * (r.step - prev.step).max(1) as f64;
            max_increase = max_increase.max(r.energy - prev.energy);
            bad |= r.energy > prev.energy + slack;
        }
        if bad {
            violations.push(r.t);
        }
    }
    Ok(AuditReport::new("energy", worst, bound, ENERGY_TOL, violations)
        .with("e0", e0)
        .with("relative_excess", worst / e0 - 1.0)
        .with("max_energy_increase", max_increase))
}

/// Upper envelope of `sup v` at time `t`: `v₀/(1 − tKv₀)` if `K > 0`, `v₀`
/// otherwise.
pub fn envelope(t: f64, k: f64, v0: f64) -> f64 {
    if k > 0.0 {
        let denom = 1.0 - t * k * v0;
        if denom > 0.0 {
            v0 / denom
        } else {
            f64::INFINITY
        }
    } else {
        v0
    }
}

/// Compares `sup v(t)` with [`envelope`]. On positively curved targets only
/// snapshots with `t ≤ 0.8·T†` are audited.
pub fn gradient_envelope_audit(traj: &Trajectory, k: f64) -> Result<AuditReport> {
    require_snapshots(traj, 1)?;
    traj.domain().check_convex()?;
    let v0 = traj.rows[0].sup_v;
    let tol = if k > 0.0 { CURVED_ENVELOPE_TOL } else { FLAT_ENVELOPE_TOL };
    let t_max = if k > 0.0 {
        HORIZON_FRACTION / (k * v0)
    } else {
        f64::INFINITY
    };
    let mut worst_ratio = 0.0f64;
    let mut worst = (v0, v0);
    let mut violations = Vec::new();
    let mut audited = 0usize;
    for r in traj.rows.iter().filter(|r| r.t <= t_max) {
        audited += 1;
        let env = envelope(r.t, k, v0);
        let ratio = r.sup_v / env;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst = (r.sup_v, env);
        }
        if r.sup_v > env * (1.0 + tol) {
            violations.push(r.t);
        }
    }
    Ok(AuditReport::new("gradient_envelope", worst.0, worst.1, tol, violations)
        .with("sup_v0", v0)
        .with("curvature", k)
        .with("max_ratio", worst_ratio)
        .with("audited_snapshots", audited as f64))
}

fn max_distance(u: &Field, p: &[f64]) -> f64 {
    let man = u.manifold();
    u.domain()
        .inside_cells()
        .iter()
        .map(|&c| man.distance(u.value(c as usize), p))
        .fold(0.0, f64::max)
}

/// `max_x dist(u(t, x), p0) ≤ R·(1 + 1e−6)` at every snapshot.
pub fn ball_invariance_audit(traj: &Trajectory, p0: &[f64], radius: f64) -> Result<AuditReport> {
    require_snapshots(traj, 1)?;
    let r_star = traj.manifold().critical_radius(p0).r_star;
    if !(radius < r_star) {
        return Err(Error::Precondition(format!(
            "ball radius {radius} must be below R_* = {r_star}"
        )));
    }
    let d0 = max_distance(traj.initial(), p0);
    if d0 > radius {
        return Err(Error::RadiusViolation {
            max_distance: d0,
            radius,
        });
    }
    let bound = radius * (1.0 + BALL_TOL);
    let mut worst = 0.0f64;
    let mut violations = Vec::new();
    for s in &traj.snapshots {
        let d = max_distance(&s.field, p0);
        worst = worst.max(d);
        if d > bound {
            violations.push(s.t);
        }
    }
    Ok(AuditReport::new("ball_invariance", worst, radius, BALL_TOL, violations).with("r_star", r_star))
}

/// First time at which the field is constant to within the extinction
/// diameter: the flow's own detection if it ran one, otherwise the first
/// such snapshot.
pub fn extinction_time(traj: &Trajectory) -> Result<f64> {
    if let Some(t) = traj.extinction_time {
        return Ok(t);
    }
    traj.snapshots
        .iter()
        .find(|s| crate::flow::is_extinct(&s.field))
        .map(|s| s.t)
        .ok_or(Error::NoExtinction { t_end: traj.last_t() })
}

/// Reports the extinction time and the empirical constant `t*/R`.
pub fn extinction_audit(traj: &Trajectory, p0: &[f64], radius: f64) -> Result<AuditReport> {
    require_snapshots(traj, 1)?;
    let t = extinction_time(traj)?;
    let d0 = max_distance(traj.initial(), p0);
    Ok(AuditReport::new("extinction", t, traj.last_t(), 0.0, Vec::new())
        .with("radius", radius)
        .with("initial_max_distance", d0)
        .with("t_over_radius", t / radius))
}

/// `t_ext(num) / t_ext(den)` must lie in `window`.
pub fn extinction_ratio_audit(
    name: &str,
    num: &Trajectory,
    den: &Trajectory,
    window: (f64, f64),
) -> Result<AuditReport> {
    let (tn, td) = (extinction_time(num)?, extinction_time(den)?);
    let ratio = if td > 0.0 { tn / td } else { f64::INFINITY };
    let mut rep = AuditReport::new(name, ratio, window.1, window.1 - window.0, Vec::new())
        .with("window_low", window.0)
        .with("t_numerator", tn)
        .with("t_denominator", td);
    if !(ratio >= window.0 && ratio <= window.1) {
        rep.fail_at(tn);
    }
    Ok(rep)
}

/// Writes `t,energy,dissipation_acc,sup_v,ball_radius,f_mu` rows.
///
/// `ball_radius` is the largest distance to `p0`, `f_mu` is evaluated at the
/// Karcher mean warm-started from the previous snapshot (empty if the mean
/// is not defined).
pub fn write_diagnostics_csv<W: Write>(mut w: W, traj: &Trajectory, p0: &[f64]) -> std::io::Result<()> {
    writeln!(w, "t,energy,dissipation_acc,sup_v,ball_radius,f_mu")?;
    let mut pc = Some(crate::geometry::ManifoldPoint(p0.to_vec()));
    for (s, r) in traj.snapshots.iter().zip(&traj.rows) {
        let ball = max_distance(&s.field, p0);
        pc = pc.and_then(|p| karcher::karcher_iterate(&s.field, p.coords()).ok());
        let fm = pc.as_ref().map(|p| f_mu(&s.field, p.coords()));
        let fm = fm.map_or(String::new(), |v| v.to_string());
        writeln!(w, "{},{},{},{},{},{}", r.t, r.energy, r.dissipation, r.sup_v, ball, fm)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
