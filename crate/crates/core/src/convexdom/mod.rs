//! Convex polytopes, their mollified signed distance and the smooth inner
//! approximants `Ω_ε = {d_ε < −ε}`, exported as grid masks.
//!
//! `d_ε` is evaluated with a fixed tensor Gauss–Legendre rule whose weights
//! are multiplied by the bump `exp(−1/(1−|y|²))` and renormalized. The
//! discrete `d_ε` is therefore itself a positive average of translates of
//! `d` over points strictly inside `B(0, ε)`, so it is exactly convex, stays
//! within `ε` of `d`, and reproduces constants. In particular every `x` with
//! `d(x) ≤ −2ε` lands in `Ω_ε` and every `x` in `Ω_ε` has `d(x) < 0`.

mod body;

use crate::diagnostics::AuditReport;
use crate::error::{Error, Result};
use crate::grid::GridDomain;

pub use body::{ConvexBody, Halfspace};

/// Gauss–Legendre order 8 on `[−1, 1]`.
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887),
    (-0.183_434_642_495_65, 0.362_683_783_378_362),
    (0.183_434_642_495_65, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Normalized quadrature of the unit bump: nodes in the open unit ball,
/// weights summing to one.
#[derive(Debug, Clone)]
pub struct Mollifier {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Largest node norm, strictly below one.
    reach: f64,
}

impl Mollifier {
    pub fn new(dim: usize) -> Self {
        let total = 8usize.pow(dim as u32);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut reach = 0.0f64;
        for q in 0..total {
            let mut y = Vec::with_capacity(dim);
            let mut w = 1.0;
            let mut r = q;
            for _ in 0..dim {
                let (t, wt) = GL8[r % 8];
                y.push(t);
                w *= wt;
                r /= 8;
            }
            let s2: f64 = y.iter().map(|a| a * a).sum();
            if s2 >= 1.0 {
                continue;
            }
            reach = reach.max(s2.sqrt());
            nodes.extend(y);
            weights.push(w * (-1.0 / (1.0 - s2)).exp());
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        Mollifier {
            dim,
            nodes,
            weights,
            reach,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `max |y_q|` over the unit-scale nodes.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// `Σ_q w_q f(x − ε y_q)`.
    pub fn apply(&self, eps: f64, x: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
        let mut y = vec![0.0; self.dim];
        let mut acc = 0.0;
        for (node, w) in self.nodes.chunks_exact(self.dim).zip(&self.weights) {
            for ((yk, xk), nk) in y.iter_mut().zip(x).zip(node) {
                *yk = xk - eps * nk;
            }
            acc += w * f(&y);
        }
        acc
    }
}

fn check_epsilon(body: &ConvexBody, eps: f64) -> Result<()> {
    let limit = body.inradius() / 3.0;
    if !(eps > 0.0 && eps < limit) {
        return Err(Error::EpsilonTooLarge { epsilon: eps, limit });
    }
    Ok(())
}

fn check_grid(body: &ConvexBody, grid: &GridDomain) -> Result<()> {
    if grid.dim() != body.dim() {
        return Err(Error::InvalidGrid(format!(
            "grid has dimension {}, body has dimension {}",
            grid.dim(),
            body.dim()
        )));
    }
    Ok(())
}

/// Signed distance to `∂Ω`.
pub fn signed_distance(body: &ConvexBody, x: &[f64]) -> f64 {
    body.signed_distance(x)
}

/// `d_ε = φ_ε * d` for `ε ∈ (0, r_Ω/3)`.
pub fn mollified_distance(body: &ConvexBody, eps: f64, x: &[f64]) -> Result<f64> {
    check_epsilon(body, eps)?;
    Ok(Mollifier::new(body.dim()).apply(eps, x, |y| body.signed_distance(y)))
}

/// Mask of the cells whose centers satisfy `d_ε < −ε`. Existing masks on
/// `grid` are ignored.
pub fn inner_domain(body: &ConvexBody, eps: f64, grid: &GridDomain) -> Result<Vec<bool>> {
    check_epsilon(body, eps)?;
    check_grid(body, grid)?;
    let moll = Mollifier::new(body.dim());
    let mask: Vec<bool> = (0..grid.num_cells())
        .map(|i| {
            let x = grid.center(i);
            let d = body.signed_distance(&x);
            // |d_ε − d| ≤ reach·ε < ε settles both ends of the band.
            if d <= -2.0 * eps {
                true
            } else if d >= 0.0 {
                false
            } else {
                moll.apply(eps, &x, |y| body.signed_distance(y)) < -eps
            }
        })
        .collect();
    if !mask.contains(&true) {
        return Err(Error::EmptyMask);
    }
    Ok(mask)
}

/// Checks `Ω_ε ⊂ Ω` at cell centers and that every boundary cell of the
/// mask lies within `2ε + h√m` of `∂Ω`. A cell is on the boundary if an
/// axis neighbour is outside the mask or off the grid.
pub fn hausdorff_audit(body: &ConvexBody, eps: f64, mask: &[bool], grid: &GridDomain) -> Result<AuditReport> {
    check_epsilon(body, eps)?;
    check_grid(body, grid)?;
    if mask.len() != grid.num_cells() {
        return Err(Error::InvalidGrid(format!(
            "mask has {} cells, grid has {}",
            mask.len(),
            grid.num_cells()
        )));
    }
    let m = grid.dim();
    let bound = 2.0 * eps + grid.spacing() * (m as f64).sqrt();
    let mut depth = 0.0f64;
    let mut violations = Vec::new();
    let mut outside = 0usize;
    let mut boundary = 0usize;
    let mut inside = 0usize;
    for i in (0..grid.num_cells()).filter(|&i| mask[i]) {
        inside += 1;
        let idx = grid.multi_index(i);
        let d = body.signed_distance(&grid.center(i));
        if d >= 0.0 {
            outside += 1;
            violations.push(d);
        }
        let on_edge = (0..m).any(|k| {
            let mut j = idx.clone();
            let lower = idx[k] == 0 || {
                j[k] = idx[k] - 1;
                !mask[grid.linear_index(&j)]
            };
            let upper = idx[k] + 1 == grid.dims()[k] || {
                j[k] = idx[k] + 1;
                !mask[grid.linear_index(&j)]
            };
            lower || upper
        });
        if on_edge {
            boundary += 1;
            depth = depth.max(-d);
            if -d >= bound {
                violations.push(-d);
            }
        }
    }
    if inside == 0 {
        return Err(Error::EmptyMask);
    }
    let moll = Mollifier::new(m);
    let min_mollified = moll.apply(eps, body.incenter(), |y| body.signed_distance(y));
    let mut rep = AuditReport::new("hausdorff", depth, bound, grid.spacing() * (m as f64).sqrt(), violations)
        .with("epsilon", eps)
        .with("inradius", body.inradius())
        .with("inside_cells", inside as f64)
        .with("boundary_cells", boundary as f64)
        .with("inclusion_violations", outside as f64)
        .with("min_mollified_distance", min_mollified);
    if !(min_mollified < -2.0 * eps) {
        rep.fail_at(min_mollified);
    }
    Ok(rep)
}
