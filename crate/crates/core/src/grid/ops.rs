//! Forward-difference gradient, its exact negative adjoint, the regularized
//! flux and the discrete total variation energies.
//!
//! A face `(i, i + e_k)` is active when both cells are inside the domain
//! and the neighbor exists (or wraps, on periodic grids). Inactive faces
//! carry zero gradient and their flux is never read, so `ν·Z = 0` holds on
//! Neumann and mask boundaries by construction.

use crate::grid::domain::NO_FACE;
use crate::grid::{Field, GridDomain, VectorField};

/// Calls `$f::<N>` for the common component counts and `$dynamic`
/// otherwise.
macro_rules! dispatch_n {
    ($n:expr, $f:ident, $dynamic:ident, ($($arg:expr),*)) => {
        match $n {
            1 => $f::<1>($($arg),*),
            2 => $f::<2>($($arg),*),
            3 => $f::<3>($($arg),*),
            4 => $f::<4>($($arg),*),
            9 => $f::<9>($($arg),*),
            _ => $dynamic($($arg),*),
        }
    };
}

/// Writes the forward-difference gradient of `values` (`N` components per
/// cell) into `out` (`[cell][axis][component]`).
pub(crate) fn gradient_into(domain: &GridDomain, n: usize, values: &[f64], out: &mut [f64]) {
    dispatch_n!(n, gradient_fixed, gradient_dyn, (domain, n, values, out))
}

fn gradient_fixed<const N: usize>(domain: &GridDomain, _n: usize, values: &[f64], out: &mut [f64]) {
    let m = domain.dim();
    let inv_h = 1.0 / domain.spacing();
    let (vals, _) = values.as_chunks::<N>();
    let (out, _) = out.as_chunks_mut::<N>();
    for k in 0..m {
        let fwd = domain.forward_table(k);
        let dst = out.iter_mut().skip(k).step_by(m);
        for ((o, &j), a) in dst.zip(fwd).zip(vals) {
            if j == NO_FACE {
                *o = [0.0; N];
                continue;
            }
            let b = &vals[j as usize];
            for c in 0..N {
                o[c] = (b[c] - a[c]) * inv_h;
            }
        }
    }
}

fn gradient_dyn(domain: &GridDomain, n: usize, values: &[f64], out: &mut [f64]) {
    let m = domain.dim();
    let inv_h = 1.0 / domain.spacing();
    out.iter_mut().for_each(|x| *x = 0.0);
    for k in 0..m {
        let fwd = domain.forward_table(k);
        for (i, &j) in fwd.iter().enumerate() {
            if j == NO_FACE {
                continue;
            }
            let j = j as usize;
            let dst = &mut out[(i * m + k) * n..(i * m + k + 1) * n];
            let a = &values[i * n..(i + 1) * n];
            let b = &values[j * n..(j + 1) * n];
            for c in 0..n {
                dst[c] = (b[c] - a[c]) * inv_h;
            }
        }
    }
}

/// Writes `div Z` into `out` (`[cell][component]`); the exact negative
/// adjoint of [`gradient_into`] under the cell-sum inner product.
pub(crate) fn divergence_into(domain: &GridDomain, n: usize, z: &[f64], out: &mut [f64]) {
    dispatch_n!(n, divergence_fixed, divergence_dyn, (domain, n, z, out))
}

fn divergence_fixed<const N: usize>(domain: &GridDomain, _n: usize, z: &[f64], out: &mut [f64]) {
    let m = domain.dim();
    let inv_h = 1.0 / domain.spacing();
    let (z, _) = z.as_chunks::<N>();
    let (out, _) = out.as_chunks_mut::<N>();
    out.iter_mut().for_each(|o| *o = [0.0; N]);
    for k in 0..m {
        let fwd = domain.forward_table(k);
        let bwd = domain.backward_table(k);
        let zk = z.iter().skip(k).step_by(m);
        for (((o, &f), &b), zi) in out.iter_mut().zip(fwd).zip(bwd).zip(zk) {
            if f != NO_FACE {
                for c in 0..N {
                    o[c] += zi[c] * inv_h;
                }
            }
            if b != NO_FACE {
                let zb = &z[b as usize * m + k];
                for c in 0..N {
                    o[c] -= zb[c] * inv_h;
                }
            }
        }
    }
}

fn divergence_dyn(domain: &GridDomain, n: usize, z: &[f64], out: &mut [f64]) {
    let m = domain.dim();
    let inv_h = 1.0 / domain.spacing();
    out.iter_mut().for_each(|x| *x = 0.0);
    for k in 0..m {
        let fwd = domain.forward_table(k);
        let bwd = domain.backward_table(k);
        for i in 0..fwd.len() {
            let dst = &mut out[i * n..(i + 1) * n];
            if fwd[i] != NO_FACE {
                let zi = &z[(i * m + k) * n..(i * m + k + 1) * n];
                for c in 0..n {
                    dst[c] += zi[c] * inv_h;
                }
            }
            let b = bwd[i];
            if b != NO_FACE {
                let b = b as usize;
                let zb = &z[(b * m + k) * n..(b * m + k + 1) * n];
                for c in 0..n {
                    dst[c] -= zb[c] * inv_h;
                }
            }
        }
    }
}

/// Replaces a gradient by `Z = ∇u / √(ε² + |∇u|²)` cell by cell and returns
/// `Σ_inside √(ε² + |∇u|²)` (no volume factor) together with the largest
/// such `v`.
pub(crate) fn flux_in_place(domain: &GridDomain, width: usize, eps: f64, g: &mut [f64]) -> (f64, f64) {
    match width {
        1 => flux_fixed::<1>(domain, eps, g),
        2 => flux_fixed::<2>(domain, eps, g),
        3 => flux_fixed::<3>(domain, eps, g),
        4 => flux_fixed::<4>(domain, eps, g),
        6 => flux_fixed::<6>(domain, eps, g),
        _ => flux_dyn(domain, width, eps, g),
    }
}

fn flux_fixed<const W: usize>(domain: &GridDomain, eps: f64, g: &mut [f64]) -> (f64, f64) {
    let eps2 = eps * eps;
    let (cells, _) = g.as_chunks_mut::<W>();
    let mut sum = 0.0;
    let mut vmax = 0.0f64;
    let mut apply = |cell: &mut [f64; W]| {
        let mut s = eps2;
        for x in cell.iter() {
            s += x * x;
        }
        let v = s.sqrt();
        sum += v;
        if v > vmax {
            vmax = v;
        }
        let inv = 1.0 / v;
        for x in cell.iter_mut() {
            *x *= inv;
        }
    };
    if domain.mask().is_none() {
        cells.iter_mut().for_each(&mut apply);
    } else {
        for &c in domain.inside_cells() {
            apply(&mut cells[c as usize]);
        }
    }
    (sum, vmax)
}

fn flux_dyn(domain: &GridDomain, width: usize, eps: f64, g: &mut [f64]) -> (f64, f64) {
    let eps2 = eps * eps;
    let mut sum = 0.0;
    let mut vmax = 0.0f64;
    let mut apply = |cell: &mut [f64]| {
        let v = (eps2 + cell.iter().map(|x| x * x).sum::<f64>()).sqrt();
        sum += v;
        vmax = vmax.max(v);
        let inv = 1.0 / v;
        cell.iter_mut().for_each(|x| *x *= inv);
    };
    if domain.mask().is_none() {
        g.chunks_exact_mut(width).for_each(&mut apply);
    } else {
        for &c in domain.inside_cells() {
            apply(&mut g[c as usize * width..(c as usize + 1) * width]);
        }
    }
    (sum, vmax)
}

/// Forward-difference gradient `∇u`.
pub fn gradient(u: &Field) -> VectorField {
    let mut g = VectorField::zeros(u.domain().clone(), u.n_comp());
    gradient_into(u.domain(), u.n_comp(), u.values(), g.data_mut());
    g
}

/// Backward-difference divergence, per cell `N` reals.
pub fn divergence(z: &VectorField) -> Vec<f64> {
    let mut out = vec![0.0; z.domain().num_cells() * z.n_comp()];
    divergence_into(z.domain(), z.n_comp(), z.data(), &mut out);
    out
}

/// Regularized flux `Z = ∇u / √(ε² + |∇u|²)` with `|∇u|` the Frobenius norm
/// of the whole `m×N` cell block.
pub fn regularized_flux(u: &Field, eps: f64) -> VectorField {
    assert!(eps > 0.0, "regularization must be positive");
    let mut g = gradient(u);
    let width = u.domain().dim() * u.n_comp();
    flux_in_place(u.domain(), width, eps, g.data_mut());
    g
}

/// `hᵐ Σ √(ε² + |∇u|²)`; `ε = 0` gives the discrete total variation.
pub fn tv_energy(u: &Field, eps: f64) -> f64 {
    let g = gradient(u);
    let eps2 = eps * eps;
    let sum: f64 = u
        .domain()
        .inside_cells()
        .iter()
        .map(|&c| (eps2 + crate::linalg::norm_sq(g.cell(c as usize))).sqrt())
        .sum();
    u.domain().cell_volume() * sum
}

/// `max_x √(ε² + |∇u(x)|²)` over inside cells.
pub fn sup_v(u: &Field, eps: f64) -> f64 {
    let g = gradient(u);
    let eps2 = eps * eps;
    u.domain()
        .inside_cells()
        .iter()
        .map(|&c| (eps2 + crate::linalg::norm_sq(g.cell(c as usize))).sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Manifold;
    use crate::grid::Boundary;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn scalar(values: Vec<f64>, boundary: Boundary) -> Field {
        let d = Arc::new(GridDomain::new(&[values.len()], 1.0, boundary).unwrap());
        Field::new(d, Arc::new(Manifold::euclidean(1)), values).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let u = scalar(vec![0.0, 1.0, 2.0], Boundary::NeumannReflect);
        assert_eq!(gradient(&u).data(), &[1.0, 1.0, 0.0]);
        let u = scalar(vec![0.0, 1.0, 2.0], Boundary::Periodic);
        assert_eq!(gradient(&u).data(), &[1.0, 1.0, -2.0]);
        let c = scalar(vec![3.0; 5], Boundary::Periodic);
        assert!(gradient(&c).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn divergence_neumann_example() {
        // The last face is a boundary face and carries no flux.
        let d = Arc::new(GridDomain::new(&[3], 1.0, Boundary::NeumannReflect).unwrap());
        let z = VectorField::from_data(d.clone(), 1, vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(divergence(&z), vec![0.0, 1.0, -1.0]);
        let z = VectorField::from_data(d, 1, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(divergence(&z), vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn divergence_of_constant_periodic_flux_vanishes() {
        let d = Arc::new(GridDomain::new(&[4, 5], 0.1, Boundary::Periodic).unwrap());
        let z = VectorField::from_data(d.clone(), 2, [0.3, -1.0].repeat(4 * 5 * 2)).unwrap();
        assert!(divergence(&z).iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn flux_and_energy_examples() {
        let u = scalar(vec![0.0, 3.0], Boundary::NeumannReflect);
        let z = regularized_flux(&u, 4.0);
        assert!((z.data()[0] - 0.6).abs() < 1e-15);
        assert_eq!(z.data()[1], 0.0);
        let c = scalar(vec![1.5; 7], Boundary::NeumannReflect);
        assert_eq!(tv_energy(&c, 0.0), 0.0);
        assert!((tv_energy(&c, 0.25) - 7.0 * 0.25).abs() < 1e-15);
        assert_eq!(sup_v(&c, 0.25), 0.25);
    }

    #[test]
    fn step_total_variation_is_jump_height() {
        for n in [64, 256, 1024] {
            let a = 0.7;
            let d = Arc::new(GridDomain::unit(&[n], Boundary::NeumannReflect).unwrap());
            let u = Field::from_fn(d, Arc::new(Manifold::euclidean(1)), |x| {
                vec![if x[0] < 0.5 { -a } else { a }]
            })
            .unwrap();
            assert!((tv_energy(&u, 0.0) - 2.0 * a).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_field_has_exact_gradient() {
        let d = Arc::new(GridDomain::new(&[6, 7], 0.2, Boundary::NeumannReflect).unwrap());
        let u = Field::from_fn(d.clone(), Arc::new(Manifold::euclidean(1)), |x| {
            vec![2.0 * x[0] - 3.0 * x[1]]
        })
        .unwrap();
        let g = gradient(&u);
        let i = d.linear_index(&[2, 3]);
        assert!((g.axis(i, 0)[0] - 2.0).abs() < 1e-12);
        assert!((g.axis(i, 1)[0] + 3.0).abs() < 1e-12);
    }

    fn random_mask(dims: &[usize], rng: &mut ChaCha8Rng) -> Vec<bool> {
        // a random axis-aligned box is connected
        let lo: Vec<usize> = dims.iter().map(|&n| rng.random_range(0..n / 2)).collect();
        let hi: Vec<usize> = dims.iter().map(|&n| rng.random_range(n / 2..n)).collect();
        let d = GridDomain::new(dims, 1.0, Boundary::NeumannReflect).unwrap();
        (0..d.num_cells())
            .map(|i| {
                let idx = d.multi_index(i);
                idx.iter().enumerate().all(|(k, &a)| a >= lo[k] && a <= hi[k])
            })
            .collect()
    }

    fn adjoint_residual(domain: Arc<GridDomain>, n: usize, rng: &mut ChaCha8Rng) -> f64 {
        let q = domain.num_cells();
        let m = domain.dim();
        let z: Vec<f64> = (0..q * m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..q * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut gw = vec![0.0; q * m * n];
        gradient_into(&domain, n, &w, &mut gw);
        let mut dz = vec![0.0; q * n];
        divergence_into(&domain, n, &z, &mut dz);
        let lhs = crate::linalg::dot(&dz, &w);
        let rhs = crate::linalg::dot(&z, &gw);
        (lhs + rhs).abs() / (crate::linalg::norm(&z) * crate::linalg::norm(&gw))
    }

    #[test]
    fn summation_by_parts_all_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dims in [vec![17], vec![9, 12], vec![5, 6, 7]] {
            for b in [Boundary::NeumannReflect, Boundary::Periodic] {
                let d = Arc::new(GridDomain::new(&dims, 0.37, b).unwrap());
                assert!(adjoint_residual(d, 3, &mut rng) <= 1e-12);
            }
            let mask = random_mask(&dims, &mut rng);
            let d = Arc::new(
                GridDomain::with_mask(&dims, 0.37, Boundary::NeumannReflect, mask).unwrap(),
            );
            assert!(adjoint_residual(d, 2, &mut rng) <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn flux_bounds(vals in proptest::collection::vec(-5.0f64..5.0, 2..40), eps in 1e-4f64..1.0) {
            let u = scalar(vals, Boundary::NeumannReflect);
            let g = gradient(&u);
            let z = regularized_flux(&u, eps);
            for i in 0..g.domain().num_cells() {
                let gn = g.cell_norm(i);
                prop_assert!(z.cell_norm(i) <= 1.0 + 1e-12);
                let gz = crate::linalg::dot(g.cell(i), z.cell(i));
                prop_assert!(gz <= gn + 1e-12);
                prop_assert!(gz >= gn - eps / 2.0 - 1e-12);
            }
        }

        #[test]
        fn energy_sandwich(vals in proptest::collection::vec(-5.0f64..5.0, 2..40), e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
            let u = scalar(vals, Boundary::Periodic);
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let q = u.domain().num_cells() as f64;
            prop_assert!(tv_energy(&u, lo) <= tv_energy(&u, hi) + 1e-12);
            prop_assert!(tv_energy(&u, hi) - tv_energy(&u, 0.0) <= q * hi + 1e-12);
        }
    }
}
