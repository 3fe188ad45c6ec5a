//! Embedded target manifolds.
//!
//! Every target lives isometrically in some ℝᴺ and exposes the pointwise
//! operations the flow and the audits need: closest-point retraction,
//! tangent/normal projectors, the second fundamental form, sectional
//! curvature through the Gauss equation, and exp/log/distance.
//!
//! Conventions: `A_p(X, Y) = π⊥_p(D_X Ỹ)` for any tangent extension `Ỹ` of
//! `Y`. On the sphere of radius `r` this is `A_p(X, Y) = −(X·Y) p / r²`.

mod so3;
mod sphere;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, norm_sq};

pub use so3::{rotation, CURVATURE_SUP as SO3_CURVATURE_SUP};

/// Finite-difference displacement for the second fundamental form of
/// targets without a closed form.
const SFF_STEP: f64 = 1e-5;

/// An embedded target manifold.
#[derive(Debug, Clone, PartialEq)]
pub enum Manifold {
    /// ℝᵏ with the identity embedding.
    Euclidean { dim: usize },
    /// `S^{n-1}` of the given radius in ℝⁿ; `ambient == 2` is a circle.
    Sphere { ambient: usize, radius: f64 },
    /// Rotation matrices in ℝ⁹.
    So3,
    /// Cartesian product; coordinates are the factors' coordinates
    /// concatenated in order.
    Product(Vec<Manifold>),
}

/// Static metadata of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDescriptor {
    pub name: String,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    /// Supremum of sectional curvature (`0` for one-dimensional factors).
    pub curvature_sup: f64,
    /// Radius of the tube on which the closest-point map is single valued.
    pub tube_radius: f64,
    /// Infimum of lengths of closed geodesics (`∞` if none).
    pub geodesic_loop_inf: f64,
}

/// The two admissible ball radii `(R_*, R̃_*)` around a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalRadii {
    pub r_star: f64,
    pub r_tilde: f64,
}

/// A point on a manifold, in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint(pub Vec<f64>);

impl ManifoldPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub vec: Vec<f64>,
}

impl Manifold {
    pub fn euclidean(dim: usize) -> Self {
        Manifold::Euclidean { dim }
    }

    pub fn circle() -> Self {
        Manifold::Sphere {
            ambient: 2,
            radius: 1.0,
        }
    }

    pub fn sphere(ambient: usize, radius: f64) -> Self {
        Manifold::Sphere { ambient, radius }
    }

    /// `S¹ × ℝᵏ` with a unit circle.
    pub fn cylinder(k: usize) -> Self {
        Manifold::Product(vec![Manifold::circle(), Manifold::euclidean(k)])
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Euclidean { dim } => *dim,
            Manifold::Sphere { ambient, .. } => *ambient,
            Manifold::So3 => 9,
            Manifold::Product(fs) => fs.iter().map(Manifold::ambient_dim).sum(),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            Manifold::Euclidean { dim } => *dim,
            Manifold::Sphere { ambient, .. } => ambient - 1,
            Manifold::So3 => 3,
            Manifold::Product(fs) => fs.iter().map(Manifold::intrinsic_dim).sum(),
        }
    }

    pub fn curvature_sup(&self) -> f64 {
        match self {
            Manifold::Euclidean { .. } => 0.0,
            Manifold::Sphere { ambient, radius } if *ambient >= 3 => 1.0 / (radius * radius),
            Manifold::Sphere { .. } => 0.0,
            Manifold::So3 => so3::CURVATURE_SUP,
            Manifold::Product(fs) => fs
                .iter()
                .map(Manifold::curvature_sup)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn tube_radius(&self) -> f64 {
        match self {
            Manifold::Euclidean { .. } => f64::INFINITY,
            Manifold::Sphere { radius, .. } => *radius,
            Manifold::So3 => so3::TUBE_RADIUS,
            Manifold::Product(fs) => fs
                .iter()
                .map(Manifold::tube_radius)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn geodesic_loop_inf(&self) -> f64 {
        match self {
            Manifold::Euclidean { .. } => f64::INFINITY,
            Manifold::Sphere { radius, .. } => 2.0 * PI * radius,
            Manifold::So3 => so3::LOOP_INF,
            Manifold::Product(fs) => fs
                .iter()
                .map(Manifold::geodesic_loop_inf)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn descriptor(&self) -> ManifoldDescriptor {
        ManifoldDescriptor {
            name: self.to_string(),
            ambient_dim: self.ambient_dim(),
            intrinsic_dim: self.intrinsic_dim(),
            curvature_sup: self.curvature_sup(),
            tube_radius: self.tube_radius(),
            geodesic_loop_inf: self.geodesic_loop_inf(),
        }
    }

    /// Visits each factor with its coordinate range.
    fn blocks(&self) -> impl Iterator<Item = (&Manifold, std::ops::Range<usize>)> {
        let factors: &[Manifold] = match self {
            Manifold::Product(fs) => fs,
            _ => std::slice::from_ref(self),
        };
        let mut offset = 0;
        factors.iter().map(move |f| {
            let n = f.ambient_dim();
            let r = offset..offset + n;
            offset += n;
            (f, r)
        })
    }

    /// Closest point of the manifold to `y`, written to `out`.
    pub fn retract(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Manifold::Euclidean { .. } => {
                out.copy_from_slice(y);
                Ok(())
            }
            Manifold::Sphere { radius, .. } => sphere::retract(*radius, y, out),
            Manifold::So3 => so3::retract(y, out),
            Manifold::Product(_) => {
                for (f, r) in self.blocks() {
                    f.retract(&y[r.clone()], &mut out[r])?;
                }
                Ok(())
            }
        }
    }

    /// Orthogonal projection of `v` onto `T_p`.
    pub fn tangent_project(&self, p: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            Manifold::Euclidean { .. } => out.copy_from_slice(v),
            Manifold::Sphere { radius, .. } => sphere::tangent_project(*radius, p, v, out),
            Manifold::So3 => so3::tangent_project(p, v, out),
            Manifold::Product(_) => {
                for (f, r) in self.blocks() {
                    f.tangent_project(&p[r.clone()], &v[r.clone()], &mut out[r]);
                }
            }
        }
    }

    /// [`Manifold::tangent_project`] applied to every point of the packed
    /// arrays `p`, `v`, `out` (one ambient vector per point).
    pub fn tangent_project_cells(&self, p: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.ambient_dim();
        match self {
            Manifold::Euclidean { .. } => out.copy_from_slice(v),
            Manifold::Sphere { ambient: 2, radius } => sphere::tangent_project_cells::<2>(*radius, p, v, out),
            Manifold::Sphere { ambient: 3, radius } => sphere::tangent_project_cells::<3>(*radius, p, v, out),
            Manifold::Product(fs) if matches!(fs.as_slice(), [Manifold::Sphere { ambient: 2, .. }, Manifold::Euclidean { .. }]) => {
                let radius = fs[0].sphere_radius();
                for ((p, v), o) in p.chunks_exact(n).zip(v.chunks_exact(n)).zip(out.chunks_exact_mut(n)) {
                    sphere::tangent_project_cells::<2>(radius, &p[..2], &v[..2], &mut o[..2]);
                    o[2..].copy_from_slice(&v[2..]);
                }
            }
            _ => {
                for ((p, v), o) in p.chunks_exact(n).zip(v.chunks_exact(n)).zip(out.chunks_exact_mut(n)) {
                    self.tangent_project(p, v, o);
                }
            }
        }
    }

    /// [`Manifold::retract`] applied to every point of the packed arrays.
    pub fn retract_cells(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.ambient_dim();
        match self {
            Manifold::Euclidean { .. } => {
                out.copy_from_slice(y);
                Ok(())
            }
            Manifold::Sphere { ambient: 2, radius } => sphere::retract_cells::<2>(*radius, y, out),
            Manifold::Sphere { ambient: 3, radius } => sphere::retract_cells::<3>(*radius, y, out),
            Manifold::Product(fs) if matches!(fs.as_slice(), [Manifold::Sphere { ambient: 2, .. }, Manifold::Euclidean { .. }]) => {
                let radius = fs[0].sphere_radius();
                for (y, o) in y.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
                    sphere::retract_cells::<2>(radius, &y[..2], &mut o[..2])?;
                    o[2..].copy_from_slice(&y[2..]);
                }
                Ok(())
            }
            _ => {
                for (y, o) in y.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
                    self.retract(y, o)?;
                }
                Ok(())
            }
        }
    }

    fn sphere_radius(&self) -> f64 {
        match self {
            Manifold::Sphere { radius, .. } => *radius,
            _ => unreachable!("not a sphere"),
        }
    }

    /// Orthogonal projection of `v` onto the normal space at `p`.
    pub fn normal_project(&self, p: &[f64], v: &[f64], out: &mut [f64]) {
        self.tangent_project(p, v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi - *o;
        }
    }

    /// Second fundamental form `A_p(X, Y)` for tangent `X`, `Y`.
    pub fn second_fundamental_form(&self, p: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            Manifold::Euclidean { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            Manifold::Sphere { radius, .. } => {
                sphere::second_fundamental_form(*radius, p, x, y, out)
            }
            Manifold::So3 => {
                let mut a = [0.0; 9];
                let mut b = [0.0; 9];
                self.projector_derivative(p, x, y, &mut a);
                self.projector_derivative(p, y, x, &mut b);
                for k in 0..9 {
                    a[k] = 0.5 * (a[k] + b[k]);
                }
                // remove the O(step²) tangential residue
                self.normal_project(p, &a, out);
            }
            Manifold::Product(_) => {
                for (f, r) in self.blocks() {
                    f.second_fundamental_form(
                        &p[r.clone()],
                        &x[r.clone()],
                        &y[r.clone()],
                        &mut out[r],
                    );
                }
            }
        }
    }

    /// Centered difference of the projector field along the curve
    /// `s ↦ retract(p + sX)`, applied to `y`: `(D_X π) y`.
    fn projector_derivative(&self, p: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = p.len();
        let xn = norm(x);
        if xn == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let s = SFF_STEP / xn;
        let mut shifted = vec![0.0; n];
        let mut on = vec![0.0; n];
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        for (sign, dst) in [(1.0, &mut plus), (-1.0, &mut minus)] {
            for k in 0..n {
                shifted[k] = p[k] + sign * s * x[k];
            }
            self.retract(&shifted, &mut on)
                .expect("finite-difference probe stays inside the tube");
            self.tangent_project(&on, y, dst);
        }
        for k in 0..n {
            out[k] = (plus[k] - minus[k]) / (2.0 * s);
        }
    }

    /// Sectional curvature of the plane spanned by tangent `X`, `Y`,
    /// computed from the second fundamental form (Gauss equation).
    pub fn sectional_curvature(&self, p: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
        let xx = norm_sq(x);
        let yy = norm_sq(y);
        let xy = dot(x, y);
        let denom = xx * yy - xy * xy;
        if !(denom >= 1e-14 * xx * yy) || denom == 0.0 {
            return Err(Error::DegeneratePlane);
        }
        let n = p.len();
        let mut axx = vec![0.0; n];
        let mut ayy = vec![0.0; n];
        let mut axy = vec![0.0; n];
        self.second_fundamental_form(p, x, x, &mut axx);
        self.second_fundamental_form(p, y, y, &mut ayy);
        self.second_fundamental_form(p, x, y, &mut axy);
        Ok((dot(&axx, &ayy) - norm_sq(&axy)) / denom)
    }

    /// Riemannian exponential map.
    pub fn exp(&self, p: &[f64], x: &[f64], out: &mut [f64]) {
        match self {
            Manifold::Euclidean { .. } => {
                for ((o, a), b) in out.iter_mut().zip(p).zip(x) {
                    *o = a + b;
                }
            }
            Manifold::Sphere { radius, .. } => sphere::exp(*radius, p, x, out),
            Manifold::So3 => so3::exp(p, x, out),
            Manifold::Product(_) => {
                for (f, r) in self.blocks() {
                    f.exp(&p[r.clone()], &x[r.clone()], &mut out[r]);
                }
            }
        }
    }

    /// Riemannian logarithm `exp_p⁻¹(q)`.
    pub fn log(&self, p: &[f64], q: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Manifold::Euclidean { .. } => {
                for ((o, a), b) in out.iter_mut().zip(p).zip(q) {
                    *o = b - a;
                }
                Ok(())
            }
            Manifold::Sphere { radius, .. } => sphere::log(*radius, p, q, out),
            Manifold::So3 => so3::log(p, q, out),
            Manifold::Product(_) => {
                for (f, r) in self.blocks() {
                    f.log(&p[r.clone()], &q[r.clone()], &mut out[r])?;
                }
                Ok(())
            }
        }
    }

    /// Geodesic distance.
    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            Manifold::Euclidean { .. } => crate::linalg::dist(p, q),
            Manifold::Sphere { radius, .. } => sphere::distance(*radius, p, q),
            Manifold::So3 => so3::distance(p, q),
            Manifold::Product(_) => self
                .blocks()
                .map(|(f, r)| {
                    let d = f.distance(&p[r.clone()], &q[r]);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// `(R_*, R̃_*)` at `p0`. All implemented targets are homogeneous, so
    /// the infimum defining `R̃_*` is attained everywhere and `R̃_* = R_*/2`.
    pub fn critical_radius(&self, _p0: &[f64]) -> CriticalRadii {
        let k = self.curvature_sup();
        let curvature_cap = if k > 0.0 {
            0.5 * PI / k.sqrt()
        } else {
            f64::INFINITY
        };
        let r_star = curvature_cap.min(self.geodesic_loop_inf() / 4.0);
        CriticalRadii {
            r_star,
            r_tilde: 0.5 * r_star,
        }
    }

    /// `‖p − retract(p)‖`, or `∞` if `p` cannot be retracted.
    pub fn constraint_residual(&self, p: &[f64]) -> f64 {
        let mut r = vec![0.0; p.len()];
        match self.retract(p, &mut r) {
            Ok(()) => crate::linalg::dist(p, &r),
            Err(_) => f64::INFINITY,
        }
    }

    /// `true` if `p` satisfies the point residual bound.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.ambient_dim() && self.constraint_residual(p) <= 1e-12 * (1.0 + norm(p))
    }

    /// A canonical point: the origin, the last pole of a sphere, the
    /// identity rotation.
    pub fn base_point(&self) -> Vec<f64> {
        match self {
            Manifold::Euclidean { dim } => vec![0.0; *dim],
            Manifold::Sphere { ambient, radius } => {
                let mut p = vec![0.0; *ambient];
                if *ambient == 2 {
                    p[0] = *radius;
                } else {
                    p[ambient - 1] = *radius;
                }
                p
            }
            Manifold::So3 => crate::linalg::IDENTITY3.to_vec(),
            Manifold::Product(fs) => fs.iter().flat_map(Manifold::base_point).collect(),
        }
    }

    /// Orthonormal basis of `T_p` (Gram–Schmidt on projected coordinate
    /// vectors).
    pub fn tangent_basis(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let n = self.ambient_dim();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut e = vec![0.0; n];
        let mut t = vec![0.0; n];
        for i in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[i] = 1.0;
            self.tangent_project(p, &e, &mut t);
            for b in &basis {
                let c = dot(&t, b);
                for (ti, bi) in t.iter_mut().zip(b) {
                    *ti -= c * bi;
                }
            }
            let len = norm(&t);
            if len > 1e-8 {
                basis.push(t.iter().map(|x| x / len).collect());
            }
            if basis.len() == self.intrinsic_dim() {
                break;
            }
        }
        basis
    }

    /// Random tangent vector at `p` with i.i.d. standard normal-ish
    /// coordinates in an orthonormal frame, scaled by `scale`.
    pub fn random_tangent<R: Rng + ?Sized>(&self, p: &[f64], scale: f64, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; self.ambient_dim()];
        for b in self.tangent_basis(p) {
            let c: f64 = rng.random_range(-1.0..1.0);
            for (vi, bi) in v.iter_mut().zip(&b) {
                *vi += scale * c * bi;
            }
        }
        v
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<ManifoldPoint> {
        if self.contains(&coords) {
            Ok(ManifoldPoint(coords))
        } else {
            Err(Error::Precondition(format!(
                "{coords:?} does not lie on {self}"
            )))
        }
    }

    pub fn retract_point(&self, y: &[f64]) -> Result<ManifoldPoint> {
        let mut out = vec![0.0; y.len()];
        self.retract(y, &mut out)?;
        Ok(ManifoldPoint(out))
    }

    pub fn tangent_vector(&self, p: &ManifoldPoint, v: &[f64]) -> TangentVector {
        let mut out = vec![0.0; v.len()];
        self.tangent_project(&p.0, v, &mut out);
        TangentVector {
            base: p.clone(),
            vec: out,
        }
    }

    pub fn exp_map(&self, p: &ManifoldPoint, x: &[f64]) -> ManifoldPoint {
        let mut out = vec![0.0; x.len()];
        self.exp(&p.0, x, &mut out);
        ManifoldPoint(out)
    }

    pub fn log_map(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<TangentVector> {
        let mut out = vec![0.0; q.0.len()];
        self.log(&p.0, &q.0, &mut out)?;
        Ok(TangentVector {
            base: p.clone(),
            vec: out,
        })
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manifold::Euclidean { dim } => write!(f, "euclidean:{dim}"),
            Manifold::Sphere {
                ambient: 2,
                radius,
            } if *radius == 1.0 => write!(f, "circle"),
            Manifold::Sphere { ambient, radius } => write!(f, "sphere:{ambient}:{radius}"),
            Manifold::So3 => write!(f, "so3"),
            Manifold::Product(fs) => match fs.as_slice() {
                [Manifold::Sphere {
                    ambient: 2,
                    radius,
                }, Manifold::Euclidean { dim }]
                    if *radius == 1.0 =>
                {
                    write!(f, "cylinder:{dim}")
                }
                _ => {
                    write!(f, "product(")?;
                    for (i, m) in fs.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{m}")?;
                    }
                    write!(f, ")")
                }
            },
        }
    }
}

impl FromStr for Manifold {
    type Err = Error;

    /// Parses `euclidean:k`, `circle`, `sphere:N:r`, `cylinder:k`, `so3`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownManifold(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let positive = |t: &str| t.parse::<usize>().ok().filter(|&k| k > 0).ok_or_else(bad);
        match parts.as_slice() {
            ["euclidean", k] => Ok(Manifold::euclidean(positive(k)?)),
            ["circle"] => Ok(Manifold::circle()),
            ["sphere", n, r] => {
                let n = positive(n)?;
                let r: f64 = r.parse().map_err(|_| bad())?;
                if n < 2 || !(r > 0.0 && r.is_finite()) {
                    return Err(bad());
                }
                Ok(Manifold::sphere(n, r))
            }
            ["cylinder", k] => Ok(Manifold::cylinder(positive(k)?)),
            ["so3"] => Ok(Manifold::So3),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Manifold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Manifold {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
