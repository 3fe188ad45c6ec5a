//! SO(3) embedded in ℝ⁹ (row-major 3x3 matrices) with the Frobenius metric.
//!
//! Geodesics through `R` are `R·exp(tΩ)` with `Ω` skew, so the geodesic
//! distance is `√2·θ` for a relative rotation angle `θ`.

use crate::error::{Error, Result};
use crate::linalg::{
    det3, dist, hat3, inv_transpose3, mat3, mul3, norm, skew3, tmul3, vee3, Mat3,
};

/// Upper bound on the sectional curvature, sampled over random planes with a
/// 5% margin on top of the observed maximum (1/8).
pub const CURVATURE_SUP: f64 = 0.131_25;

/// Frobenius distance from SO(3) to the singular matrices.
pub const TUBE_RADIUS: f64 = 1.0;

/// Length of the shortest closed geodesic, `√2·2π`.
pub const LOOP_INF: f64 = 2.0 * std::f64::consts::SQRT_2 * std::f64::consts::PI;

const POLAR_TOL: f64 = 1e-12;
const POLAR_MAX_ITER: usize = 100;

fn outside(distance: f64) -> Error {
    Error::OutsideTube {
        manifold: "so3".into(),
        distance,
        tube_radius: TUBE_RADIUS,
    }
}

fn is_rotation(a: &Mat3) -> bool {
    let g = tmul3(a, a);
    let mut off = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let e = if i == j { 1.0 } else { 0.0 };
            off = off.max((g[3 * i + j] - e).abs());
        }
    }
    off <= 2.0 * f64::EPSILON && det3(a) > 0.0
}

/// Closest rotation in Frobenius norm via the polar iteration
/// `X ← ½(X + X⁻ᵀ)`.
pub(super) fn retract(y: &[f64], out: &mut [f64]) -> Result<()> {
    let y3 = mat3(y);
    if is_rotation(&y3) {
        out.copy_from_slice(y);
        return Ok(());
    }
    if !(det3(&y3) > 0.0) {
        return Err(outside(f64::INFINITY));
    }
    let mut x = y3;
    let mut converged = false;
    for _ in 0..POLAR_MAX_ITER {
        let it = inv_transpose3(&x).ok_or_else(|| outside(f64::INFINITY))?;
        let mut next = [0.0; 9];
        for k in 0..9 {
            next[k] = 0.5 * (x[k] + it[k]);
        }
        let step = dist(&next, &x);
        x = next;
        if step <= POLAR_TOL * (1.0 + norm(&x)) {
            converged = true;
            break;
        }
    }
    let d = dist(&x, &y3);
    if !converged || d >= TUBE_RADIUS {
        return Err(outside(d));
    }
    out.copy_from_slice(&x);
    Ok(())
}

/// `π_R(V) = R·skew(RᵀV)`
pub(super) fn tangent_project(p: &[f64], v: &[f64], out: &mut [f64]) {
    let r = mat3(p);
    let w = skew3(&tmul3(&r, &mat3(v)));
    out.copy_from_slice(&mul3(&r, &w));
}

fn rodrigues(w: [f64; 3]) -> Mat3 {
    let theta = norm(&w);
    let k = hat3(w);
    let k2 = mul3(&k, &k);
    let (a, b) = if theta < 1e-4 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    let mut e = crate::linalg::IDENTITY3;
    for i in 0..9 {
        e[i] += a * k[i] + b * k2[i];
    }
    e
}

pub(super) fn exp(p: &[f64], x: &[f64], out: &mut [f64]) {
    let r = mat3(p);
    let omega = skew3(&tmul3(&r, &mat3(x)));
    out.copy_from_slice(&mul3(&r, &rodrigues(vee3(&omega))));
}

/// Rotation angle of `RᵀQ` and its axial vector scaled by `sin θ`.
fn relative_angle(p: &[f64], q: &[f64]) -> (f64, [f64; 3], f64) {
    let m = tmul3(&mat3(p), &mat3(q));
    let sin_axis = vee3(&skew3(&m));
    let s = norm(&sin_axis);
    let c = 0.5 * (m[0] + m[4] + m[8] - 1.0);
    (s.atan2(c), sin_axis, s)
}

pub(super) fn log(p: &[f64], q: &[f64], out: &mut [f64]) -> Result<()> {
    let (theta, sin_axis, s) = relative_angle(p, q);
    if std::f64::consts::PI - theta < 1e-9 {
        return Err(Error::CutLocus);
    }
    let scale = if s < 1e-12 { 1.0 } else { theta / s };
    let w = sin_axis.map(|a| a * scale);
    out.copy_from_slice(&mul3(&mat3(p), &hat3(w)));
    Ok(())
}

pub(super) fn distance(p: &[f64], q: &[f64]) -> f64 {
    std::f64::consts::SQRT_2 * relative_angle(p, q).0
}

/// Builds the rotation `exp(hat(axis·angle))`.
pub fn rotation(axis: [f64; 3], angle: f64) -> Mat3 {
    let n = norm(&axis);
    rodrigues(axis.map(|a| a / n * angle))
}
