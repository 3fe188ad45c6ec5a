use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{dist, dot, norm, solve};

/// `normal · x ≤ offset` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Normalizes `normal` (and scales `offset` with it).
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let n = norm(&normal);
        if !(n > 0.0) || !n.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidBody(format!("degenerate halfspace {normal:?} <= {offset}")));
        }
        Ok(Halfspace {
            normal: normal.iter().map(|a| a / n).collect(),
            offset: offset / n,
        })
    }

    #[inline]
    pub fn excess(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }
}

/// Bounded intersection of halfspaces with nonempty interior.
#[derive(Debug, Clone)]
pub struct ConvexBody {
    dim: usize,
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Vec<f64>>,
    /// Boundary cycle in counter-clockwise order (planar bodies only).
    polygon: Vec<[f64; 2]>,
    inradius: f64,
    incenter: Vec<f64>,
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(pos) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Vertices of `{x : a_i·x ≤ b_i}` by solving every square subsystem.
fn enumerate_vertices(rows: &[(Vec<f64>, f64)], dim: usize, tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    for_each_subset(rows.len(), dim, &mut |s| {
        for (r, &i) in s.iter().enumerate() {
            a[r * dim..(r + 1) * dim].copy_from_slice(&rows[i].0);
            b[r] = rows[i].1;
        }
        let Some(x) = solve(&a, &b, dim) else { return };
        if rows.iter().all(|(n, c)| dot(n, &x) <= c + tol) && !out.iter().any(|v| dist(v, &x) <= tol) {
            out.push(x);
        }
    });
    out
}

impl ConvexBody {
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let dim = halfspaces.first().map_or(0, |h| h.normal.len());
        if dim == 0 || halfspaces.iter().any(|h| h.normal.len() != dim) {
            return Err(Error::InvalidBody("halfspaces must share a nonzero dimension".into()));
        }
        if halfspaces.len() <= dim {
            return Err(Error::InvalidBody(format!(
                "{} halfspaces cannot bound a body in {dim} dimensions",
                halfspaces.len()
            )));
        }
        let scale = 1.0 + halfspaces.iter().map(|h| h.offset.abs()).fold(0.0, f64::max);
        let tol = 1e-9 * scale;

        // An unbounded intersection shows up as a vertex on a far box.
        let big = 1e6 * scale;
        let mut rows: Vec<(Vec<f64>, f64)> = halfspaces.iter().map(|h| (h.normal.clone(), h.offset)).collect();
        for k in 0..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[k] = s;
                rows.push((e, big));
            }
        }
        let vertices = enumerate_vertices(&rows, dim, tol);
        if vertices.is_empty() {
            return Err(Error::InvalidBody("halfspaces have empty intersection".into()));
        }
        if vertices.iter().any(|v| v.iter().any(|c| c.abs() >= big - tol)) {
            return Err(Error::InvalidBody("halfspaces do not bound a finite body".into()));
        }

        // Largest inscribed ball: maximize r subject to n_i·c + r ≤ b_i.
        let mut lp: Vec<(Vec<f64>, f64)> = halfspaces
            .iter()
            .map(|h| {
                let mut n = h.normal.clone();
                n.push(1.0);
                (n, h.offset)
            })
            .collect();
        let mut nonneg = vec![0.0; dim + 1];
        nonneg[dim] = -1.0;
        lp.push((nonneg, 0.0));
        let best = enumerate_vertices(&lp, dim + 1, tol)
            .into_iter()
            .max_by(|a, b| a[dim].total_cmp(&b[dim]))
            .expect("body vertices are feasible for the inradius problem");
        let inradius = best[dim];
        if !(inradius > tol) {
            return Err(Error::InvalidBody("body has empty interior".into()));
        }
        let incenter = best[..dim].to_vec();

        let polygon = if dim == 2 {
            let c = [
                vertices.iter().map(|v| v[0]).sum::<f64>() / vertices.len() as f64,
                vertices.iter().map(|v| v[1]).sum::<f64>() / vertices.len() as f64,
            ];
            let mut p: Vec<[f64; 2]> = vertices.iter().map(|v| [v[0], v[1]]).collect();
            p.sort_by(|a, b| (a[1] - c[1]).atan2(a[0] - c[0]).total_cmp(&(b[1] - c[1]).atan2(b[0] - c[0])));
            p
        } else {
            Vec::new()
        };

        Ok(ConvexBody {
            dim,
            halfspaces,
            vertices,
            polygon,
            inradius,
            incenter,
        })
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let mut hs = Vec::with_capacity(2 * lo.len());
        for k in 0..lo.len() {
            let mut e = vec![0.0; lo.len()];
            e[k] = 1.0;
            hs.push(Halfspace::new(e.clone(), hi[k])?);
            e[k] = -1.0;
            hs.push(Halfspace::new(e, -lo[k])?);
        }
        Self::new(hs)
    }

    /// Planar polygon from its vertices in counter-clockwise order.
    pub fn polygon(vertices: &[[f64; 2]]) -> Result<Self> {
        let n = vertices.len();
        let hs = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let normal = vec![b[1] - a[1], a[0] - b[0]];
                let offset = normal[0] * a[0] + normal[1] * a[1];
                Halfspace::new(normal, offset)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(hs)
    }

    /// Regular `k`-gon inscribed in the circle of radius `r` about `center`.
    pub fn regular_polygon(k: usize, center: [f64; 2], r: f64) -> Result<Self> {
        let v: Vec<[f64; 2]> = (0..k)
            .map(|j| {
                let a = std::f64::consts::TAU * j as f64 / k as f64;
                [center[0] + r * a.cos(), center[1] + r * a.sin()]
            })
            .collect();
        Self::polygon(&v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Radius of the largest inscribed ball.
    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// Center of a largest inscribed ball.
    pub fn incenter(&self) -> &[f64] {
        &self.incenter
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.excess(x) <= 0.0)
    }

    /// Signed distance to the boundary: negative inside, positive outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        let inner = self
            .halfspaces
            .iter()
            .map(|h| h.excess(x))
            .fold(f64::NEG_INFINITY, f64::max);
        if inner <= 0.0 {
            return inner;
        }
        if self.dim == 2 {
            return self.polygon_distance(x[0], x[1]);
        }
        self.face_distance(x)
    }

    fn polygon_distance(&self, x: f64, y: f64) -> f64 {
        let n = self.polygon.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.polygon[i];
            let b = self.polygon[(i + 1) % n];
            let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
            let (px, py) = (x - a[0], y - a[1]);
            let s = ((px * ex + py * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
            let (dx, dy) = (px - s * ex, py - s * ey);
            best = best.min(dx * dx + dy * dy);
        }
        best.sqrt()
    }

    /// Distance from an outside point: the nearest point lies on some face,
    /// so it is the closest feasible projection onto the affine hull of a
    /// set of facets.
    fn face_distance(&self, x: &[f64]) -> f64 {
        let m = self.dim;
        let tol = 1e-12 * (1.0 + norm(x));
        let mut best = self
            .vertices
            .iter()
            .map(|v| dist(v, x))
            .fold(f64::INFINITY, f64::min);
        for k in 1..m {
            for_each_subset(self.halfspaces.len(), k, &mut |s| {
                let mut g = vec![0.0; k * k];
                let mut r = vec![0.0; k];
                for (a, &i) in s.iter().enumerate() {
                    r[a] = self.halfspaces[i].excess(x);
                    for (b, &j) in s.iter().enumerate() {
                        g[a * k + b] = dot(&self.halfspaces[i].normal, &self.halfspaces[j].normal);
                    }
                }
                let Some(lam) = solve(&g, &r, k) else { return };
                let mut y = x.to_vec();
                for (a, &i) in s.iter().enumerate() {
                    for (yc, nc) in y.iter_mut().zip(&self.halfspaces[i].normal) {
                        *yc -= lam[a] * nc;
                    }
                }
                if self.halfspaces.iter().all(|h| h.excess(&y) <= tol) {
                    best = best.min(dist(&y, x));
                }
            });
        }
        best
    }

    /// Parses one halfspace per line, `n_1 … n_m c` meaning `n·x ≤ c`.
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut hs = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| format!("line {}: {e}", ln + 1))?;
            if nums.len() < 2 {
                return Err(format!("line {}: expected a normal and an offset", ln + 1));
            }
            let (normal, offset) = nums.split_at(nums.len() - 1);
            hs.push(Halfspace::new(normal.to_vec(), offset[0]).map_err(|e| format!("line {}: {e}", ln + 1))?);
        }
        Self::new(hs).map_err(|e| e.to_string())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|reason| Error::Malformed {
            path: path.to_path_buf(),
            reason,
        })
    }

    /// Inverse of [`ConvexBody::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for h in &self.halfspaces {
            for a in &h.normal {
                let _ = write!(s, "{a} ");
            }
            let _ = writeln!(s, "{}", h.offset);
        }
        s
    }
}
