use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::AuditReport;
use crate::error::{Error, Result};
use crate::flow::{run, FlowConfig, Trajectory};
use crate::geometry::Manifold;
use crate::grid::Field;

/// Slack on `log D(t) − log D(0)` when validating the fitted growth rate.
pub const CONTRACTION_LOG_TOL: f64 = 0.05;

/// Relative slack of the monotone check on flat targets.
const FLAT_MONOTONE_TOL: f64 = 1e-9;

/// `retract(u0 + δ·ξ)` with `ξ` a seeded random tangent field, drawn with
/// [`Manifold::random_tangent`] at scale `δ`.
pub fn perturb(u0: &Field, delta: f64, seed: u64) -> Result<Field> {
    let man = u0.manifold();
    if !(delta >= 0.0 && delta < 0.1 * man.tube_radius()) {
        return Err(Error::Precondition(format!(
            "perturbation size {delta} must lie in [0, {})",
            0.1 * man.tube_radius()
        )));
    }
    let n = man.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = u0.values().to_vec();
    let mut y = vec![0.0; n];
    for &c in u0.domain().inside_cells() {
        let cell = c as usize * n..(c as usize + 1) * n;
        let p = &u0.values()[cell.clone()];
        if delta > 0.0 {
            let xi = man.random_tangent(p, delta, &mut rng);
            for ((yi, pi), xi) in y.iter_mut().zip(p).zip(&xi) {
                *yi = pi + xi;
            }
            man.retract(&y, &mut values[cell])?;
        }
    }
    Field::new(u0.domain().clone(), man.clone(), values)
}

/// `(t, hᵐ Σ |u₁ − u₂|²)` at the snapshots both trajectories share.
pub fn l2_gap_series(a: &Trajectory, b: &Trajectory) -> (Vec<f64>, Vec<f64>) {
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .take_while(|(x, y)| x.t == y.t)
        .map(|(x, y)| (x.t, x.field.l2_distance_sq(&y.field)))
        .unzip()
}

#[derive(Debug, Clone)]
pub struct ContractionOutcome {
    pub report: AuditReport,
    pub times: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Tightest `C` with `log D(t) − log D(0) ≤ C t` over the first half.
    pub fitted_c: f64,
}

/// Runs the flow from `u0` and from a `δ`-perturbation of it and checks the
/// growth of `D(t) = ‖u₁ − u₂‖²` against a Gronwall bound fitted on the
/// first half of the run. On flat targets `D` must also be nonincreasing.
pub fn contraction_audit(u0: &Field, delta: f64, cfg: &FlowConfig, seed: u64) -> Result<ContractionOutcome> {
    let u1 = perturb(u0, delta, seed)?;
    let mut cfg = cfg.clone();
    cfg.stop_on_extinction = false;
    let ta = run(u0, &cfg)?;
    let tb = run(&u1, &cfg)?;
    let (times, gaps) = l2_gap_series(&ta, &tb);
    Ok(audit_gaps(u0.manifold(), times, gaps))
}

fn audit_gaps(man: &Manifold, times: Vec<f64>, gaps: Vec<f64>) -> ContractionOutcome {
    let d0 = gaps[0];
    let t_last = *times.last().unwrap();
    let mut violations = Vec::new();
    if d0 == 0.0 {
        for (t, d) in times.iter().zip(&gaps) {
            if *d != 0.0 {
                violations.push(*t);
            }
        }
        let report = AuditReport::new("contraction", 0.0, 0.0, 0.0, violations);
        return ContractionOutcome {
            report,
            times,
            gaps,
            fitted_c: 0.0,
        };
    }
    let log_ratio = |d: f64| (d / d0).ln();
    let half = times.iter().position(|&t| t > 0.5 * t_last).unwrap_or(times.len());
    let mut c = f64::NEG_INFINITY;
    for j in 1..half {
        if gaps[j] > 0.0 {
            c = c.max(log_ratio(gaps[j]) / times[j]);
        }
    }
    let c_bound = c.max(0.0);
    let mut worst = f64::NEG_INFINITY;
    for j in half..times.len() {
        let excess = log_ratio(gaps[j]) - c_bound * times[j];
        worst = worst.max(excess);
        if excess > CONTRACTION_LOG_TOL {
            violations.push(times[j]);
        }
    }
    let flat = matches!(man, Manifold::Euclidean { .. });
    let mut monotone_violations = 0;
    if flat {
        for j in 1..gaps.len() {
            if gaps[j] > gaps[j - 1] * (1.0 + FLAT_MONOTONE_TOL) {
                violations.push(times[j]);
                monotone_violations += 1;
            }
        }
    }
    let report = AuditReport::new("contraction", worst, 0.0, CONTRACTION_LOG_TOL, violations)
        .with("fitted_c", c)
        .with("d0", d0)
        .with("d_final", *gaps.last().unwrap())
        .with("monotone_violations", monotone_violations as f64);
    ContractionOutcome {
        report,
        times,
        gaps,
        fitted_c: c,
    }
}
