use crate::diagnostics::AuditReport;
use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::geometry::ManifoldPoint;
use crate::grid::Field;
use crate::linalg::norm;

const MAX_ITERATIONS: usize = 10_000;

/// Iteration stops once the update is shorter than this.
const STEP_TOL: f64 = 1e-12;

/// Required size of the mean log at the returned point.
const STATIONARITY_TOL: f64 = 1e-10;

/// `max_x dist(u(x), p)` over inside cells.
fn spread(u: &Field, p: &[f64]) -> f64 {
    let man = u.manifold();
    u.domain()
        .inside_cells()
        .iter()
        .map(|&c| man.distance(u.value(c as usize), p))
        .fold(0.0, f64::max)
}

/// `(1/Q) Σ_x log_p u(x)` over inside cells.
fn mean_log(u: &Field, p: &[f64], acc: &mut [f64], tmp: &mut [f64]) -> Result<()> {
    let man = u.manifold();
    let cells = u.domain().inside_cells();
    acc.iter_mut().for_each(|a| *a = 0.0);
    for &c in cells {
        man.log(p, u.value(c as usize), tmp)?;
        for (a, t) in acc.iter_mut().zip(tmp.iter()) {
            *a += t;
        }
    }
    let inv = 1.0 / cells.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(())
}

/// Fixed-point iteration `p ← exp_p(mean log_p u)` from `start`, without the
/// radius precondition.
pub(crate) fn karcher_iterate(u: &Field, start: &[f64]) -> Result<ManifoldPoint> {
    let man = u.manifold();
    let n = man.ambient_dim();
    let mut p = start.to_vec();
    let mut g = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut step = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        mean_log(u, &p, &mut g, &mut tmp)?;
        step = norm(&g);
        if step < STEP_TOL {
            return Ok(ManifoldPoint(p));
        }
        man.exp(&p, &g, &mut next);
        // keep the iterate on the manifold to working precision
        man.retract(&next, &mut p)?;
    }
    if step <= STATIONARITY_TOL {
        return Ok(ManifoldPoint(p));
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: step,
    })
}

/// Riemannian center of mass of the values of `u` (uniform cell weights).
///
/// All values must lie within `R̃_*(p_init)` of `p_init`.
pub fn karcher_mean(u: &Field, p_init: &ManifoldPoint) -> Result<ManifoldPoint> {
    let man = u.manifold();
    let r = man.critical_radius(p_init.coords()).r_tilde;
    let d = spread(u, p_init.coords());
    if !(d < r) {
        return Err(Error::RadiusViolation {
            max_distance: d,
            radius: r,
        });
    }
    karcher_iterate(u, p_init.coords())
}

/// `½ hᵐ Σ_x dist(u(x), p)²`.
pub fn f_mu(u: &Field, p: &[f64]) -> f64 {
    let man = u.manifold();
    let sum: f64 = u
        .domain()
        .inside_cells()
        .iter()
        .map(|&c| {
            let d = man.distance(u.value(c as usize), p);
            d * d
        })
        .sum();
    0.5 * u.domain().cell_volume() * sum
}

/// Per-snapshot centers of mass and `f_μ` values behind
/// [`fmu_decay_audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FmuDecay {
    pub times: Vec<f64>,
    pub centers: Vec<ManifoldPoint>,
    pub f: Vec<f64>,
    /// Slope `b` of the fitted envelope `f^{1/m} ≤ a − b t`.
    pub slope: f64,
    /// Intercept of the shifted (upper) envelope.
    pub intercept: f64,
}

/// `f_μ` level counted as zero.
pub const FMU_ZERO: f64 = 1e-10;

/// Relative RMS residual allowed for the affine fit of `f^{1/m}`.
pub const FMU_FIT_TOL: f64 = 0.05;

/// Tracks `f_μ(p_c(t))` along the trajectory and checks that it is
/// nonincreasing, that it reaches zero, and that `f^{1/m}` is well described
/// by an affine function with a finite zero.
pub fn fmu_decay_audit(traj: &Trajectory, p0: &[f64], radius: f64) -> Result<(AuditReport, FmuDecay)> {
    let man = traj.manifold().clone();
    let r_tilde = man.critical_radius(p0).r_tilde;
    let d0 = spread(traj.initial(), p0);
    if !(radius < r_tilde) || d0 > radius {
        return Err(Error::RadiusViolation {
            max_distance: d0.max(radius),
            radius: r_tilde,
        });
    }
    let m = traj.domain().dim() as f64;
    let mut times = Vec::with_capacity(traj.len());
    let mut centers: Vec<ManifoldPoint> = Vec::with_capacity(traj.len());
    let mut f = Vec::with_capacity(traj.len());
    for s in &traj.snapshots {
        let start = centers.last().map_or(p0.to_vec(), |p| p.0.clone());
        let pc = karcher_iterate(&s.field, &start)?;
        f.push(f_mu(&s.field, pc.coords()));
        centers.push(pc);
        times.push(s.t);
    }

    let mut violations = Vec::new();
    let f0 = f[0];
    for j in 1..f.len() {
        if f[j] > f[j - 1] + 1e-12 * f0 + 1e-18 {
            violations.push(times[j]);
        }
    }
    let zero_at = f.iter().position(|&v| v < FMU_ZERO);
    if zero_at.is_none() {
        violations.push(*times.last().unwrap());
    }

    // least-squares line through f^{1/m} before it reaches zero
    let last = zero_at.unwrap_or(f.len());
    let g: Vec<f64> = f[..last].iter().map(|v| v.powf(1.0 / m)).collect();
    let ts = &times[..last];
    let (slope, intercept, rms) = if g.len() >= 2 {
        let nf = g.len() as f64;
        let tm = ts.iter().sum::<f64>() / nf;
        let gm = g.iter().sum::<f64>() / nf;
        let stt: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
        let stg: f64 = ts.iter().zip(&g).map(|(t, v)| (t - tm) * (v - gm)).sum();
        let b = -stg / stt;
        let a = gm + b * tm;
        let rms = (ts.iter().zip(&g).map(|(t, v)| (v - (a - b * t)).powi(2)).sum::<f64>() / nf).sqrt();
        let a_up = ts.iter().zip(&g).map(|(t, v)| v + b * t).fold(f64::MIN, f64::max);
        (b, a_up, rms)
    } else {
        (f64::NAN, f64::NAN, 0.0)
    };
    let g0 = f0.powf(1.0 / m);
    let rel = if g0 > 0.0 { rms / g0 } else { 0.0 };
    if g.len() >= 2 && (!(slope > 0.0) || rel > FMU_FIT_TOL) {
        violations.push(ts[ts.len() - 1]);
    }
    let mut rep = AuditReport::new("fmu_decay", rel, FMU_FIT_TOL, FMU_FIT_TOL, violations)
        .with("f0", f0)
        .with("f_final", *f.last().unwrap());
    if let Some(j) = zero_at {
        rep = rep.with("t_zero", times[j]);
    }
    if slope > 0.0 {
        rep = rep
            .with("envelope_slope", slope)
            .with("envelope_zero", intercept / slope)
            .with("extinction_constant", 1.0 / slope);
    }
    Ok((
        rep,
        FmuDecay {
            times,
            centers,
            f,
            slope,
            intercept,
        },
    ))
}
