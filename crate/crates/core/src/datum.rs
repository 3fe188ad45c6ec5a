//! Built-in initial data.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Manifold;
use crate::grid::{Field, GridDomain};
use crate::linalg::norm;

/// A generator of initial data. Every generator is centred at `p0`
/// (default: the manifold's base point) and moves along the unit tangent
/// `direction` (default: the first tangent basis vector at `p0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum Datum {
    Constant {
        #[serde(default)]
        p0: Option<Vec<f64>>,
    },
    /// `exp_{p0}(∓a·X)` on the two halves of axis 0. On `ℝ¹` this is the
    /// step `±a`.
    Step {
        a: f64,
        #[serde(default)]
        p0: Option<Vec<f64>>,
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
    /// `exp_{p0}((x₀/L − ½)·length·X)`: a geodesic segment of the given
    /// length traversed along axis 0.
    GeodesicArc {
        length: f64,
        #[serde(default)]
        p0: Option<Vec<f64>>,
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
    /// `exp_{p0}(amplitude·φ(x)·X)` with `φ` the smooth bump of height one
    /// supported in the ball of radius `width` around the domain center
    /// (default: half the shortest side).
    GeodesicBump {
        amplitude: f64,
        #[serde(default)]
        width: Option<f64>,
        #[serde(default)]
        p0: Option<Vec<f64>>,
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
    /// `exp_{p0}(ξ(x))` with independent tangent vectors whose frame
    /// coordinates are uniform in `[−scale, scale]`.
    Noise {
        scale: f64,
        #[serde(default)]
        p0: Option<Vec<f64>>,
    },
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

impl Datum {
    pub fn name(&self) -> &'static str {
        match self {
            Datum::Constant { .. } => "constant",
            Datum::Step { .. } => "step",
            Datum::GeodesicArc { .. } => "geodesic_arc",
            Datum::GeodesicBump { .. } => "geodesic_bump",
            Datum::Noise { .. } => "noise",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Datum::Constant { .. } => Ok(()),
            Datum::Step { a, .. } => positive("datum.a", *a),
            Datum::GeodesicArc { length, .. } => positive("datum.length", *length),
            Datum::GeodesicBump { amplitude, width, .. } => {
                positive("datum.amplitude", *amplitude)?;
                width.map_or(Ok(()), |w| positive("datum.width", w))
            }
            Datum::Noise { scale, .. } => positive("datum.scale", *scale),
        }
    }

    fn p0_opt(&self) -> Option<&Vec<f64>> {
        match self {
            Datum::Constant { p0 }
            | Datum::Step { p0, .. }
            | Datum::GeodesicArc { p0, .. }
            | Datum::GeodesicBump { p0, .. }
            | Datum::Noise { p0, .. } => p0.as_ref(),
        }
    }

    /// The center point, checked to lie on `manifold`.
    pub fn center(&self, manifold: &Manifold) -> Result<Vec<f64>> {
        match self.p0_opt() {
            None => Ok(manifold.base_point()),
            Some(p) => {
                if manifold.contains(p) {
                    Ok(p.clone())
                } else {
                    Err(Error::config("datum.p0", format!("{p:?} does not lie on {manifold}")))
                }
            }
        }
    }

    fn direction(&self, manifold: &Manifold, p0: &[f64]) -> Result<Vec<f64>> {
        let given = match self {
            Datum::Step { direction, .. }
            | Datum::GeodesicArc { direction, .. }
            | Datum::GeodesicBump { direction, .. } => direction.as_ref(),
            _ => None,
        };
        let v = match given {
            None => manifold
                .tangent_basis(p0)
                .into_iter()
                .next()
                .ok_or_else(|| Error::config("manifold", "target has no tangent directions"))?,
            Some(d) => {
                if d.len() != manifold.ambient_dim() {
                    return Err(Error::config(
                        "datum.direction",
                        format!("expected {} coordinates", manifold.ambient_dim()),
                    ));
                }
                let mut t = vec![0.0; d.len()];
                manifold.tangent_project(p0, d, &mut t);
                t
            }
        };
        let n = norm(&v);
        if !(n > 1e-12) {
            return Err(Error::config("datum.direction", "has no tangential component at p0"));
        }
        Ok(v.iter().map(|a| a / n).collect())
    }

    /// Samples the datum at the cell centers of `domain`.
    pub fn generate(&self, domain: Arc<GridDomain>, manifold: Arc<Manifold>, seed: u64) -> Result<Field> {
        self.validate()?;
        let p0 = self.center(&manifold)?;
        let extent = domain.extent();
        let man = manifold.clone();
        let base = p0.clone();
        let exp = move |t: f64, x: &[f64]| {
            let v: Vec<f64> = x.iter().map(|a| t * a).collect();
            let mut out = vec![0.0; v.len()];
            man.exp(&base, &v, &mut out);
            out
        };
        match self {
            Datum::Constant { .. } => Field::constant(domain, manifold, &p0),
            Datum::Step { a, .. } => {
                let x = self.direction(&manifold, &p0)?;
                let half = 0.5 * extent[0];
                Field::from_fn(domain, manifold, |c| exp(if c[0] < half { -a } else { *a }, &x))
            }
            Datum::GeodesicArc { length, .. } => {
                let x = self.direction(&manifold, &p0)?;
                Field::from_fn(domain, manifold, |c| exp((c[0] / extent[0] - 0.5) * length, &x))
            }
            Datum::GeodesicBump { amplitude, width, .. } => {
                let x = self.direction(&manifold, &p0)?;
                let mid: Vec<f64> = extent.iter().map(|e| 0.5 * e).collect();
                let rho = width.unwrap_or_else(|| extent.iter().cloned().fold(f64::INFINITY, f64::min) * 0.5);
                Field::from_fn(domain, manifold, |c| {
                    let s2 = c.iter().zip(&mid).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (rho * rho);
                    let phi = if s2 < 1.0 { (1.0 - 1.0 / (1.0 - s2)).exp() } else { 0.0 };
                    exp(amplitude * phi, &x)
                })
            }
            Datum::Noise { scale, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m2 = manifold.clone();
                Field::from_fn(domain, manifold, |_| {
                    let xi = m2.random_tangent(&p0, *scale, &mut rng);
                    exp(1.0, &xi)
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Boundary;

    fn line(n: usize) -> Arc<GridDomain> {
        Arc::new(GridDomain::unit(&[n], Boundary::NeumannReflect).unwrap())
    }

    #[test]
    fn scalar_step_is_plus_minus_a() {
        let u = Datum::Step {
            a: 0.25,
            p0: None,
            direction: None,
        }
        .generate(line(8), Arc::new(Manifold::euclidean(1)), 0)
        .unwrap();
        assert_eq!(u.values(), &[-0.25, -0.25, -0.25, -0.25, 0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn arc_has_requested_length() {
        let man = Arc::new(Manifold::sphere(3, 1.0));
        let u = Datum::GeodesicArc {
            length: 1.0,
            p0: None,
            direction: Some(vec![1.0, 0.0, 0.0]),
        }
        .generate(line(64), man.clone(), 0)
        .unwrap();
        // Consecutive cells are 1/64 apart along a great circle.
        for i in 0..63 {
            let d = man.distance(u.value(i), u.value(i + 1));
            assert!((d - 1.0 / 64.0).abs() < 1e-12);
        }
        assert!((man.distance(u.value(0), u.value(63)) - 63.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn bump_stays_in_ball_and_peaks_at_amplitude() {
        let man = Arc::new(Manifold::sphere(3, 1.0));
        let dom = Arc::new(GridDomain::unit(&[33, 33], Boundary::NeumannReflect).unwrap());
        let d = Datum::GeodesicBump {
            amplitude: 0.35,
            width: None,
            p0: None,
            direction: None,
        };
        let u = d.generate(dom.clone(), man.clone(), 0).unwrap();
        let p0 = d.center(&man).unwrap();
        let dists: Vec<f64> = (0..dom.num_cells()).map(|i| man.distance(u.value(i), &p0)).collect();
        let peak = dom.linear_index(&[16, 16]);
        assert!((dists[peak] - 0.35).abs() < 1e-12);
        assert!(dists.iter().all(|&x| x <= 0.35 + 1e-12));
        assert_eq!(dists[0], 0.0);
    }

    #[test]
    fn noise_is_seeded() {
        let man = Arc::new(Manifold::So3);
        let d = Datum::Noise { scale: 0.1, p0: None };
        let a = d.generate(line(16), man.clone(), 7).unwrap();
        let b = d.generate(line(16), man.clone(), 7).unwrap();
        let c = d.generate(line(16), man.clone(), 8).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        let p0 = man.base_point();
        // Frame coordinates are bounded by the scale.
        assert!((0..16).all(|i| man.distance(a.value(i), &p0) <= 0.1 * 3f64.sqrt() + 1e-12));
    }

    #[test]
    fn invalid_parameters_name_their_key() {
        let man = Arc::new(Manifold::circle());
        let err = Datum::Step {
            a: -1.0,
            p0: None,
            direction: None,
        }
        .generate(line(4), man.clone(), 0)
        .unwrap_err();
        assert!(err.to_string().contains("datum.a"));
        let err = Datum::Constant { p0: Some(vec![2.0, 0.0]) }.generate(line(4), man, 0).unwrap_err();
        assert!(err.to_string().contains("datum.p0"));
    }

    #[test]
    fn serde_tags() {
        let d: Datum = serde_json::from_str(r#"{"generator":"geodesic_bump","amplitude":0.3}"#).unwrap();
        assert_eq!(d.name(), "geodesic_bump");
        let back: Datum = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }
}
