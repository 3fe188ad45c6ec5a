//! Round sphere `S^{n-1}(r) ⊂ ℝⁿ`; the circle is the case `n = 2`.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

pub(super) fn retract(radius: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
    let len = norm(y);
    // the closest point is unique everywhere except at the center
    if !(len > 1e-12 * radius) || !len.is_finite() {
        return Err(Error::OutsideTube {
            manifold: format!("sphere:{}:{}", y.len(), radius),
            distance: (len - radius).abs(),
            tube_radius: radius,
        });
    }
    if (len - radius).abs() <= 4.0 * f64::EPSILON * radius {
        out.copy_from_slice(y);
        return Ok(());
    }
    let s = radius / len;
    for (o, v) in out.iter_mut().zip(y) {
        *o = v * s;
    }
    Ok(())
}

pub(super) fn tangent_project(radius: f64, p: &[f64], v: &[f64], out: &mut [f64]) {
    let c = dot(p, v) / (radius * radius);
    for ((o, vi), pi) in out.iter_mut().zip(v).zip(p) {
        *o = vi - c * pi;
    }
}

/// [`tangent_project`] on consecutive `N`-vectors.
pub(super) fn tangent_project_cells<const N: usize>(radius: f64, p: &[f64], v: &[f64], out: &mut [f64]) {
    let r2 = radius * radius;
    let (pc, _) = p.as_chunks::<N>();
    let (vc, _) = v.as_chunks::<N>();
    let (oc, _) = out.as_chunks_mut::<N>();
    for ((p, v), o) in pc.iter().zip(vc).zip(oc) {
        let mut c = p[0] * v[0];
        for k in 1..N {
            c += p[k] * v[k];
        }
        let c = c / r2;
        for k in 0..N {
            o[k] = v[k] - c * p[k];
        }
    }
}

/// [`retract`] on consecutive `N`-vectors.
pub(super) fn retract_cells<const N: usize>(radius: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
    let (yc, _) = y.as_chunks::<N>();
    let (oc, _) = out.as_chunks_mut::<N>();
    for (y, o) in yc.iter().zip(oc) {
        let mut sq = y[0] * y[0];
        for k in 1..N {
            sq += y[k] * y[k];
        }
        let len = sq.sqrt();
        if !(len > 1e-12 * radius) || !len.is_finite() || (len - radius).abs() <= 4.0 * f64::EPSILON * radius {
            retract(radius, y, o)?;
            continue;
        }
        let s = radius / len;
        for k in 0..N {
            o[k] = y[k] * s;
        }
    }
    Ok(())
}

pub(super) fn second_fundamental_form(
    radius: f64,
    p: &[f64],
    x: &[f64],
    y: &[f64],
    out: &mut [f64],
) {
    let c = -dot(x, y) / (radius * radius);
    for (o, pi) in out.iter_mut().zip(p) {
        *o = c * pi;
    }
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

pub(super) fn exp(radius: f64, p: &[f64], x: &[f64], out: &mut [f64]) {
    let theta = norm(x) / radius;
    let (c, s) = (theta.cos(), sinc(theta));
    for ((o, pi), xi) in out.iter_mut().zip(p).zip(x) {
        *o = c * pi + s * xi;
    }
}

/// Angle `∠(p, q)` seen from the center, and the unnormalized tangential
/// component of `q` at `p`.
fn angle_and_direction(radius: f64, p: &[f64], q: &[f64], w: &mut [f64]) -> (f64, f64) {
    let r2 = radius * radius;
    let c = dot(p, q) / r2;
    for ((wi, qi), pi) in w.iter_mut().zip(q).zip(p) {
        *wi = qi - c * pi;
    }
    let s = norm(w) / radius;
    (s.atan2(c), s)
}

pub(super) fn log(radius: f64, p: &[f64], q: &[f64], out: &mut [f64]) -> Result<()> {
    let (theta, s) = angle_and_direction(radius, p, q, out);
    if s <= 1e-12 {
        if dot(p, q) < 0.0 {
            return Err(Error::CutLocus);
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        return Ok(());
    }
    // |w| = r sin θ and the log has length r θ
    let scale = theta / s;
    out.iter_mut().for_each(|o| *o *= scale);
    Ok(())
}

pub(super) fn distance(radius: f64, p: &[f64], q: &[f64]) -> f64 {
    let mut w = [0.0; 8];
    if p.len() <= w.len() {
        radius * angle_and_direction(radius, p, q, &mut w[..p.len()]).0
    } else {
        let mut w = vec![0.0; p.len()];
        radius * angle_and_direction(radius, p, q, &mut w).0
    }
}
