use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Homogeneous Neumann: replicated ghost cells, zero boundary flux.
    #[serde(alias = "neumann")]
    NeumannReflect,
    /// Flat torus.
    Periodic,
}

pub(crate) const NO_FACE: u32 = u32::MAX;

/// Uniform rectangular lattice in 1, 2 or 3 dimensions, optionally masked.
///
/// Cells are stored row-major (last axis fastest). Cell `i` has center
/// `(i_k + ½)·h` along axis `k`.
#[derive(Debug, Clone)]
pub struct GridDomain {
    dims: Vec<usize>,
    spacing: f64,
    boundary: Boundary,
    mask: Option<Vec<bool>>,
    strides: Vec<usize>,
    /// `forward[k][i]`: neighbor across the active face `(i, i + e_k)`.
    forward: Vec<Vec<u32>>,
    /// `backward[k][i]`: the cell `j` with `forward[k][j] == i`.
    backward: Vec<Vec<u32>>,
    inside: Vec<u32>,
}

impl PartialEq for GridDomain {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.spacing == other.spacing
            && self.boundary == other.boundary
            && self.mask == other.mask
    }
}

impl GridDomain {
    pub fn new(dims: &[usize], spacing: f64, boundary: Boundary) -> Result<Self> {
        Self::build(dims, spacing, boundary, None)
    }

    /// Unit-length lattice: `n` cells per axis with `h = 1/n`.
    pub fn unit(dims: &[usize], boundary: Boundary) -> Result<Self> {
        let n = *dims.iter().max().unwrap_or(&1);
        Self::new(dims, 1.0 / n as f64, boundary)
    }

    pub fn with_mask(
        dims: &[usize],
        spacing: f64,
        boundary: Boundary,
        mask: Vec<bool>,
    ) -> Result<Self> {
        Self::build(dims, spacing, boundary, Some(mask))
    }

    fn build(
        dims: &[usize],
        spacing: f64,
        boundary: Boundary,
        mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        if !(1..=3).contains(&dims.len()) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidGrid("zero-length axis".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        let cells: usize = dims.iter().product();
        if cells >= NO_FACE as usize {
            return Err(Error::InvalidGrid("too many cells".into()));
        }
        if let Some(mask) = &mask {
            if boundary == Boundary::Periodic {
                return Err(Error::InvalidGrid("periodic grids cannot be masked".into()));
            }
            if mask.len() != cells {
                return Err(Error::InvalidGrid(format!(
                    "mask has {} entries for {cells} cells",
                    mask.len()
                )));
            }
        }
        let m = dims.len();
        let mut strides = vec![1; m];
        for k in (0..m - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let is_in = |i: usize| mask.as_ref().is_none_or(|mk| mk[i]);
        let mut forward = vec![vec![NO_FACE; cells]; m];
        let mut backward = vec![vec![NO_FACE; cells]; m];
        for i in 0..cells {
            if !is_in(i) {
                continue;
            }
            for k in 0..m {
                let ik = (i / strides[k]) % dims[k];
                let j = if ik + 1 < dims[k] {
                    Some(i + strides[k])
                } else if boundary == Boundary::Periodic && dims[k] > 1 {
                    Some(i + strides[k] - dims[k] * strides[k])
                } else {
                    None
                };
                if let Some(j) = j.filter(|&j| is_in(j)) {
                    forward[k][i] = j as u32;
                    backward[k][j] = i as u32;
                }
            }
        }
        let inside: Vec<u32> = (0..cells).filter(|&i| is_in(i)).map(|i| i as u32).collect();
        let domain = GridDomain {
            dims: dims.to_vec(),
            spacing,
            boundary,
            mask,
            strides,
            forward,
            backward,
            inside,
        };
        if domain.mask.is_some() {
            domain.check_connected()?;
        }
        Ok(domain)
    }

    fn check_connected(&self) -> Result<()> {
        let Some(&start) = self.inside.first() else {
            return Err(Error::InvalidGrid("mask selects no cells".into()));
        };
        let mut seen = vec![false; self.num_cells()];
        let mut queue = VecDeque::from([start as usize]);
        seen[start as usize] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for k in 0..self.dim() {
                for j in [self.forward[k][i], self.backward[k][i]] {
                    if j != NO_FACE && !seen[j as usize] {
                        seen[j as usize] = true;
                        count += 1;
                        queue.push_back(j as usize);
                    }
                }
            }
        }
        if count != self.inside.len() {
            return Err(Error::InvalidGrid(format!(
                "mask is not connected ({count} of {} cells reachable)",
                self.inside.len()
            )));
        }
        Ok(())
    }

    /// Number of axes `m`.
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn num_cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// `hᵐ`
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    /// Indices of cells inside the domain, ascending.
    pub fn inside_cells(&self) -> &[u32] {
        &self.inside
    }

    pub fn is_inside(&self, i: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[i])
    }

    /// Neighbor across the face `(i, i + e_k)` if that face is active.
    #[inline]
    pub fn forward(&self, k: usize, i: usize) -> Option<usize> {
        let j = self.forward[k][i];
        (j != NO_FACE).then_some(j as usize)
    }

    /// Cell `j` whose forward face in direction `k` ends at `i`.
    #[inline]
    pub fn backward(&self, k: usize, i: usize) -> Option<usize> {
        let j = self.backward[k][i];
        (j != NO_FACE).then_some(j as usize)
    }

    pub(crate) fn forward_table(&self, k: usize) -> &[u32] {
        &self.forward[k]
    }

    pub(crate) fn backward_table(&self, k: usize) -> &[u32] {
        &self.backward[k]
    }

    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|k| (i / self.strides[k]) % self.dims[k])
            .collect()
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        self.multi_index(i)
            .into_iter()
            .map(|a| (a as f64 + 0.5) * self.spacing)
            .collect()
    }

    /// Physical extent `n_k·h` along each axis.
    pub fn extent(&self) -> Vec<f64> {
        self.dims.iter().map(|&n| n as f64 * self.spacing).collect()
    }

    /// Checks that the mask is the digitization of a convex set: no outside
    /// cell lies in the convex hull of the inside cells. In three
    /// dimensions every axis-aligned slice is checked, which is necessary
    /// but not sufficient. Unmasked boxes pass trivially.
    pub fn check_convex(&self) -> Result<()> {
        let Some(mask) = &self.mask else {
            return Ok(());
        };
        let idx = |i: usize| -> Vec<i64> { self.multi_index(i).iter().map(|&a| a as i64).collect() };
        match self.dim() {
            1 => {
                let first = mask.iter().position(|&b| b);
                let last = mask.iter().rposition(|&b| b);
                if let (Some(f), Some(l)) = (first, last) {
                    if let Some(hole) = (f..=l).find(|&i| !mask[i]) {
                        return Err(Error::DomainNotConvex(format!("cell {hole} is a gap in the mask")));
                    }
                }
                Ok(())
            }
            2 => {
                let cells: Vec<[i64; 2]> = (0..self.num_cells())
                    .map(|i| {
                        let v = idx(i);
                        [v[0], v[1]]
                    })
                    .collect();
                check_slice(&cells, mask, &|c: &[i64; 2]| format!("{c:?}"))
            }
            _ => {
                for k in 0..3 {
                    let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                    for level in 0..self.dims[k] {
                        let members: Vec<usize> = (0..self.num_cells())
                            .filter(|&i| self.multi_index(i)[k] == level)
                            .collect();
                        let cells: Vec<[i64; 2]> = members
                            .iter()
                            .map(|&i| {
                                let v = idx(i);
                                [v[a], v[b]]
                            })
                            .collect();
                        let sub: Vec<bool> = members.iter().map(|&i| mask[i]).collect();
                        check_slice(&cells, &sub, &|c: &[i64; 2]| {
                            format!("{c:?} in slice {level} normal to axis {k}")
                        })?;
                    }
                }
                Ok(())
            }
        }
    }
}

fn cross(o: [i64; 2], a: [i64; 2], b: [i64; 2]) -> i64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull by the monotone chain; collinear points dropped.
fn convex_hull(mut pts: Vec<[i64; 2]>) -> Vec<[i64; 2]> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[i64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[i64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn in_hull(hull: &[[i64; 2]], p: [i64; 2]) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, p) == 0
                && p[0] >= a[0].min(b[0])
                && p[0] <= a[0].max(b[0])
                && p[1] >= a[1].min(b[1])
                && p[1] <= a[1].max(b[1])
        }
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0),
    }
}

fn check_slice(cells: &[[i64; 2]], mask: &[bool], describe: &dyn Fn(&[i64; 2]) -> String) -> Result<()> {
    let inside: Vec<[i64; 2]> = cells.iter().zip(mask).filter(|(_, &m)| m).map(|(c, _)| *c).collect();
    let hull = convex_hull(inside);
    for (c, &m) in cells.iter().zip(mask) {
        if !m && in_hull(&hull, *c) {
            return Err(Error::DomainNotConvex(format!(
                "cell {} lies in the convex hull of the mask",
                describe(c)
            )));
        }
    }
    Ok(())
}
