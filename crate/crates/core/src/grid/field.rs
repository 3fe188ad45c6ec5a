use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Manifold;
use crate::grid::GridDomain;
use crate::linalg::norm;

/// A manifold-valued map on the cells of a grid.
///
/// Values of cells outside the mask are carried along but never read by the
/// discrete operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    domain: Arc<GridDomain>,
    manifold: Arc<Manifold>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(domain: Arc<GridDomain>, manifold: Arc<Manifold>, values: Vec<f64>) -> Result<Self> {
        let n = manifold.ambient_dim();
        if values.len() != domain.num_cells() * n {
            return Err(Error::Precondition(format!(
                "expected {} values ({} cells x {n}), got {}",
                domain.num_cells() * n,
                domain.num_cells(),
                values.len()
            )));
        }
        let field = Field {
            domain,
            manifold,
            values,
        };
        if let Some((cell, residual)) = field.worst_residual() {
            let p = field.value(cell);
            if residual > 1e-12 * (1.0 + norm(p)) {
                return Err(Error::Precondition(format!(
                    "cell {cell} value {p:?} is off {} (residual {residual:.3e})",
                    field.manifold
                )));
            }
        }
        Ok(field)
    }

    /// Builds a field from a function of the cell center; values are
    /// retracted onto the manifold.
    pub fn from_fn(
        domain: Arc<GridDomain>,
        manifold: Arc<Manifold>,
        mut f: impl FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let n = manifold.ambient_dim();
        let mut values = vec![0.0; domain.num_cells() * n];
        for i in 0..domain.num_cells() {
            let y = f(&domain.center(i));
            manifold.retract(&y, &mut values[i * n..(i + 1) * n])?;
        }
        Field::new(domain, manifold, values)
    }

    pub fn constant(domain: Arc<GridDomain>, manifold: Arc<Manifold>, p: &[f64]) -> Result<Self> {
        let values = p.repeat(domain.num_cells());
        Field::new(domain, manifold, values)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn manifold(&self) -> &Arc<Manifold> {
        &self.manifold
    }

    /// Ambient dimension `N` of each value.
    pub fn n_comp(&self) -> usize {
        self.manifold.ambient_dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Vec<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, cell: usize) -> &[f64] {
        let n = self.n_comp();
        &self.values[cell * n..(cell + 1) * n]
    }

    /// Largest constraint residual over inside cells.
    pub fn worst_residual(&self) -> Option<(usize, f64)> {
        self.domain
            .inside_cells()
            .iter()
            .map(|&c| (c as usize, self.manifold.constraint_residual(self.value(c as usize))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// `hᵐ Σ |u − w|²` over inside cells.
    pub fn l2_distance_sq(&self, other: &Field) -> f64 {
        let h_m = self.domain.cell_volume();
        let n = self.n_comp();
        let mut acc = 0.0;
        for &c in self.domain.inside_cells() {
            let c = c as usize;
            for k in c * n..(c + 1) * n {
                let d = self.values[k] - other.values[k];
                acc += d * d;
            }
        }
        h_m * acc
    }

    /// Applies `f` to every value (e.g. an ambient isometry), retracting
    /// the result.
    pub fn map_values(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Field> {
        let n = self.n_comp();
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.domain.num_cells() {
            let y = f(self.value(i));
            self.manifold.retract(&y, &mut values[i * n..(i + 1) * n])?;
        }
        Field::new(self.domain.clone(), self.manifold.clone(), values)
    }
}

/// Per-cell collection of `m` ambient vectors (`[cell][axis][component]`),
/// used for both discrete gradients and flux fields.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    domain: Arc<GridDomain>,
    n_comp: usize,
    data: Vec<f64>,
}

/// The regularized flux `Z`.
pub type FluxField = VectorField;

impl VectorField {
    pub fn zeros(domain: Arc<GridDomain>, n_comp: usize) -> Self {
        let len = domain.num_cells() * domain.dim() * n_comp;
        VectorField {
            domain,
            n_comp,
            data: vec![0.0; len],
        }
    }

    pub fn from_data(domain: Arc<GridDomain>, n_comp: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != domain.num_cells() * domain.dim() * n_comp {
            return Err(Error::Precondition("vector field length mismatch".into()));
        }
        Ok(VectorField {
            domain,
            n_comp,
            data,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The `m·N` entries of one cell.
    pub fn cell(&self, i: usize) -> &[f64] {
        let w = self.domain.dim() * self.n_comp;
        &self.data[i * w..(i + 1) * w]
    }

    /// Component along axis `k` at cell `i`.
    pub fn axis(&self, i: usize, k: usize) -> &[f64] {
        let n = self.n_comp;
        let base = (i * self.domain.dim() + k) * n;
        &self.data[base..base + n]
    }

    /// Frobenius norm of one cell's `m×N` block.
    pub fn cell_norm(&self, i: usize) -> f64 {
        norm(self.cell(i))
    }

    /// Cell-sum inner product `Σ_i Σ_k Z_ik · W_ik` (no volume factor).
    pub fn dot(&self, other: &VectorField) -> f64 {
        crate::linalg::dot(&self.data, &other.data)
    }
}
