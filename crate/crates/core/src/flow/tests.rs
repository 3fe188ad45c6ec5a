use std::sync::Arc;

use super::*;
use crate::geometry::rotation;
use crate::grid::{divergence, regularized_flux, Boundary};
use crate::linalg::{dist, norm};

fn line(n: usize, boundary: Boundary) -> Arc<GridDomain> {
    Arc::new(GridDomain::unit(&[n], boundary).unwrap())
}

fn square(n: usize, boundary: Boundary) -> Arc<GridDomain> {
    Arc::new(GridDomain::unit(&[n, n], boundary).unwrap())
}

fn step_datum(n: usize, a: f64) -> Field {
    let m = Arc::new(Manifold::euclidean(1));
    Field::from_fn(line(n, Boundary::NeumannReflect), m, |x| {
        vec![if x[0] < 0.5 { -a } else { a }]
    })
    .unwrap()
}

/// `exp_p(φ(x))` for a smooth tangent field at the north pole.
fn smooth_sphere_field(d: Arc<GridDomain>, phi: impl Fn(&[f64]) -> [f64; 2]) -> Field {
    let man = Arc::new(Manifold::sphere(3, 1.0));
    let p = man.base_point();
    let m2 = man.clone();
    Field::from_fn(d, man, move |x| {
        let [a, b] = phi(x);
        let mut out = vec![0.0; 3];
        m2.exp(&p, &[a, b, 0.0], &mut out);
        out
    })
    .unwrap()
}

#[test]
fn stable_dt_formula() {
    let d = GridDomain::new(&[100], 0.01, Boundary::NeumannReflect).unwrap();
    assert!((stable_dt(&d, 0.1, 0.45) - 2.25e-6).abs() < 1e-18);
    let r = stable_dt(&d, 0.02, 0.45) / stable_dt(&d, 0.01, 0.45);
    assert!((r - 2.0).abs() < 1e-14);
    let d2 = GridDomain::new(&[10, 10], 0.01, Boundary::Periodic).unwrap();
    assert!((stable_dt(&d2, 0.1, 0.45) - 1.125e-6).abs() < 1e-18);
}

#[test]
fn constant_field_is_stationary() {
    for man in [Manifold::sphere(3, 1.0), Manifold::cylinder(2), Manifold::So3] {
        let p = man.base_point();
        let u = Field::constant(square(6, Boundary::NeumannReflect), Arc::new(man), &p).unwrap();
        for form in [RhsForm::Project, RhsForm::SecondFundamental] {
            assert!(rhs(&u, 0.1, form).iter().all(|&x| x == 0.0));
        }
        let s = step(&FlowState::new(u.clone()), &FlowConfig::new(0.1, 1.0)).unwrap();
        assert_eq!(s.u, u);
        assert!(s.t > 0.0);
        assert_eq!(s.dissipation_acc, 0.0);
    }
}

#[test]
fn euclidean_rhs_is_divergence() {
    let man = Arc::new(Manifold::euclidean(2));
    let u = Field::from_fn(square(8, Boundary::NeumannReflect), man, |x| {
        vec![(3.0 * x[0]).sin(), x[0] * x[1]]
    })
    .unwrap();
    let div = divergence(&regularized_flux(&u, 0.05));
    for form in [RhsForm::Project, RhsForm::SecondFundamental] {
        assert_eq!(rhs(&u, 0.05, form), div);
    }
}

#[test]
fn project_rhs_is_tangent() {
    let u = smooth_sphere_field(square(12, Boundary::NeumannReflect), |x| {
        [0.8 * x[0] - 0.3, (2.0 * x[1]).sin()]
    });
    let r = rhs(&u, 0.1, RhsForm::Project);
    for i in 0..u.domain().num_cells() {
        let p = u.value(i);
        let dot: f64 = p.iter().zip(&r[3 * i..3 * i + 3]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
    }
}

#[test]
fn step_datum_plateaus_approach() {
    let a = 0.5;
    let u0 = step_datum(32, a);
    let mut s = FlowState::new(u0);
    let cfg = FlowConfig::new(0.1, 1.0);
    for _ in 0..50 {
        s = step(&s, &cfg).unwrap();
    }
    let v = s.u.values();
    assert!(v[0] > -a && v[0] < 0.0);
    assert!(v[31] < a && v[31] > 0.0);
    // antisymmetric datum stays antisymmetric
    assert!((v[0] + v[31]).abs() < 1e-14);
}

#[test]
fn residual_after_step() {
    let u = smooth_sphere_field(square(10, Boundary::Periodic), |x| {
        [(6.0 * x[0]).sin(), (6.0 * x[1]).cos()]
    });
    let s = step(&FlowState::new(u), &FlowConfig::new(0.05, 1.0)).unwrap();
    let (_, r) = s.u.worst_residual().unwrap();
    assert!(r <= 1e-12);
}

#[test]
fn zero_horizon_run_is_initial_datum() {
    let u0 = step_datum(16, 0.25);
    let traj = run(&u0, &FlowConfig::new(0.1, 0.0)).unwrap();
    assert_eq!(traj.len(), 1);
    assert_eq!(traj.last(), &u0);
}

#[test]
fn flat_targets_have_no_horizon() {
    let u0 = step_datum(16, 0.25);
    let traj = run(&u0, &FlowConfig::new(0.1, 1e-3)).unwrap();
    assert_eq!(traj.horizon, None);
    let cyl = Arc::new(Manifold::cylinder(1));
    let u = Field::from_fn(line(16, Boundary::NeumannReflect), cyl, |x| {
        vec![x[0].cos(), x[0].sin(), x[0]]
    })
    .unwrap();
    let traj = run(&u, &FlowConfig::new(0.1, 1e-3)).unwrap();
    assert_eq!(traj.horizon, None);
    assert_eq!(traj.horizon_reached, None);
}

#[test]
fn horizon_on_unit_sphere() {
    // two plateaus whose single jump gives sup v = 2
    let eps: f64 = 0.1;
    let h: f64 = 0.25;
    let chord: f64 = h * (4.0 - eps * eps).sqrt();
    let theta: f64 = 2.0 * (chord / 2.0).asin();
    let man = Arc::new(Manifold::sphere(3, 1.0));
    let d = line(4, Boundary::NeumannReflect);
    let q = [theta.sin(), 0.0, theta.cos()];
    let mut values = Vec::new();
    for i in 0..4 {
        values.extend_from_slice(if i < 2 { &[0.0, 0.0, 1.0] } else { &q });
    }
    let u0 = Field::new(d, man, values).unwrap();
    let mut cfg = FlowConfig::new(eps, 0.6);
    cfg.dt_safety = 0.9;
    cfg.stop_on_extinction = false;
    let traj = run(&u0, &cfg).unwrap();
    assert!((traj.sup_v0 - 2.0).abs() < 1e-12);
    assert!((traj.horizon.unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(traj.horizon_reached, Some(0.5));
    assert_eq!(traj.snapshots.last().unwrap().t, 0.5);

    cfg.horizon = HorizonPolicy::Warn;
    cfg.snapshot_stride = 1_000_000;
    let traj = run(&u0, &cfg).unwrap();
    assert!(traj.horizon_reached.unwrap() >= 0.5);
    assert_eq!(traj.snapshots.last().unwrap().t, 0.6);
}

#[test]
fn rotation_equivariance() {
    let d = square(10, Boundary::NeumannReflect);
    let u0 = smooth_sphere_field(d, |x| [0.7 * x[0] - 0.2, 0.5 * (3.0 * x[1]).sin()]);
    let r = rotation([1.0, 2.0, -0.5], 0.9);
    let rot = |p: &[f64]| -> Vec<f64> {
        (0..3).map(|i| (0..3).map(|j| r[3 * i + j] * p[j]).sum()).collect()
    };
    let v0 = u0.map_values(rot).unwrap();
    let mut cfg = FlowConfig::new(0.1, 2e-3);
    cfg.snapshot_stride = 50;
    for form in [RhsForm::Project, RhsForm::SecondFundamental] {
        cfg.rhs_form = form;
        let a = run(&u0, &cfg).unwrap();
        let b = run(&v0, &cfg).unwrap();
        assert_eq!(a.times(), b.times());
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            for i in 0..sa.field.domain().num_cells() {
                assert!(dist(&rot(sa.field.value(i)), sb.field.value(i)) < 1e-10);
            }
        }
    }
}

#[test]
fn circle_phase_equivariance() {
    let man = Arc::new(Manifold::circle());
    let d = line(24, Boundary::NeumannReflect);
    let u0 = Field::from_fn(d, man, |x| {
        let a = 2.0 * x[0] + (5.0 * x[0]).sin();
        vec![a.cos(), a.sin()]
    })
    .unwrap();
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let rot = |p: &[f64]| vec![c * p[0] - s * p[1], s * p[0] + c * p[1]];
    let v0 = u0.map_values(rot).unwrap();
    let cfg = FlowConfig::new(0.05, 1e-3);
    let a = run(&u0, &cfg).unwrap();
    let b = run(&v0, &cfg).unwrap();
    for i in 0..24 {
        assert!(dist(&rot(a.last().value(i)), b.last().value(i)) < 1e-10);
    }
}

#[test]
fn mirror_symmetry_is_exact_in_one_dimension() {
    let n = 40;
    let d = line(n, Boundary::NeumannReflect);
    let u0 = smooth_sphere_field(d, |x| {
        // distance to the mirror point from integer indices, so both halves
        // see identical bits
        let k = (x[0] * n as f64 - 0.5).round() as i64;
        let s = (2 * k - (n as i64 - 1)).abs() as f64 / (2 * n) as f64;
        [0.9 * s * s - 0.2, 0.4 * (7.0 * s).sin()]
    });
    let mut cfg = FlowConfig::new(0.05, 2e-4);
    cfg.snapshot_stride = 20;
    let traj = run(&u0, &cfg).unwrap();
    assert!(traj.len() > 2);
    for s in &traj.snapshots {
        for i in 0..n {
            assert_eq!(s.field.value(i), s.field.value(n - 1 - i));
        }
    }
}

#[test]
fn mirror_symmetry_of_layered_data() {
    let n = 16;
    let d = square(n, Boundary::NeumannReflect);
    let u0 = smooth_sphere_field(d.clone(), |x| {
        let k = (x[0] * n as f64 - 0.5).round() as i64;
        let s = (2 * k - (n as i64 - 1)).abs() as f64 / (2 * n) as f64;
        [0.9 * s - 0.2, 0.3 * s * s]
    });
    let mut cfg = FlowConfig::new(0.05, 2e-3);
    cfg.snapshot_stride = 20;
    let traj = run(&u0, &cfg).unwrap();
    for s in &traj.snapshots {
        for i in 0..d.num_cells() {
            let idx = d.multi_index(i);
            let j = d.linear_index(&[n - 1 - idx[0], idx[1]]);
            assert_eq!(s.field.value(i), s.field.value(j));
        }
    }
}

#[test]
fn uniform_winding_is_stationary() {
    let n = 64;
    let man = Arc::new(Manifold::circle());
    let u = Field::from_fn(line(n, Boundary::Periodic), man, |x| {
        let a = 2.0 * std::f64::consts::PI * x[0];
        vec![a.cos(), a.sin()]
    })
    .unwrap();
    let r = rhs(&u, 0.1, RhsForm::Project);
    assert!(r.iter().all(|x| x.abs() < 1e-10));
    // the other form leaves an O(h²) normal residue that retraction removes
    let r = rhs(&u, 0.1, RhsForm::SecondFundamental);
    for i in 0..n {
        let p = u.value(i);
        let tangential = p[0] * r[2 * i + 1] - p[1] * r[2 * i];
        assert!(tangential.abs() < 1e-10);
    }
    let s = step(&FlowState::new(u.clone()), &{
        let mut c = FlowConfig::new(0.1, 1.0);
        c.rhs_form = RhsForm::SecondFundamental;
        c
    })
    .unwrap();
    assert!(s.u.l2_distance_sq(&u) < 1e-24);
}

#[test]
fn forms_agree_to_first_order() {
    let phi = |x: &[f64]| {
        let tau = 2.0 * std::f64::consts::PI;
        [0.5 * (tau * x[0]).sin(), 0.4 * (tau * x[1]).cos() + 0.2 * (tau * x[0]).cos()]
    };
    let gaps: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|&n| {
            let u = smooth_sphere_field(square(n, Boundary::Periodic), phi);
            let a = rhs(&u, 0.1, RhsForm::Project);
            let b = rhs(&u, 0.1, RhsForm::SecondFundamental);
            (0..u.domain().num_cells())
                .map(|i| dist(&a[3 * i..3 * i + 3], &b[3 * i..3 * i + 3]))
                .fold(0.0, f64::max)
        })
        .collect();
    for w in gaps.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 0.8, "gaps {gaps:?}");
    }
}

#[test]
fn schedule_stages_and_segments() {
    let mut cfg = FlowConfig::new(1.0, 0.01);
    cfg.eps_schedule = Some(vec![
        EpsStage { epsilon: 0.1, duration: 0.004 },
        EpsStage { epsilon: 0.05, duration: 0.004 },
        EpsStage { epsilon: 0.02, duration: 0.0 },
    ]);
    assert_eq!(cfg.stages(), vec![(0.0, 0.1), (0.004, 0.05), (0.008, 0.02)]);
    assert_eq!(cfg.initial_epsilon(), 0.1);
    cfg.snapshot_stride = 1000;
    cfg.stop_on_extinction = false;
    let traj = run(&step_datum(16, 0.3), &cfg).unwrap();
    assert_eq!(traj.segments.len(), 3);
    assert_eq!(traj.segments[1].t_start, 0.004);
    assert_eq!(traj.last_t(), 0.01);
    assert_eq!(traj.rows.last().unwrap().eps, 0.02);

    cfg.t_end = 0.004;
    assert_eq!(cfg.stages(), vec![(0.0, 0.1)]);
}

#[test]
fn config_validation_names_keys() {
    let mut cfg = FlowConfig::new(0.1, 1.0);
    cfg.eps_schedule = Some(vec![
        EpsStage { epsilon: 0.1, duration: 1.0 },
        EpsStage { epsilon: 0.2, duration: 1.0 },
    ]);
    let e = cfg.validate().unwrap_err().to_string();
    assert!(e.contains("eps_schedule"), "{e}");
    let mut cfg = FlowConfig::new(-1.0, 1.0);
    assert!(cfg.validate().unwrap_err().to_string().contains("epsilon"));
    cfg.epsilon = 0.1;
    cfg.dt_safety = 1.5;
    assert!(cfg.validate().unwrap_err().to_string().contains("dt_safety"));
}

#[test]
fn constant_datum_is_extinct_at_start() {
    let u = Field::constant(line(8, Boundary::NeumannReflect), Arc::new(Manifold::euclidean(1)), &[0.3])
        .unwrap();
    let traj = run(&u, &FlowConfig::new(0.1, 1.0)).unwrap();
    assert_eq!(traj.extinction_time, Some(0.0));
    assert_eq!(traj.len(), 1);
}

#[test]
fn dissipation_is_nondecreasing() {
    let mut cfg = FlowConfig::new(0.1, 2e-3);
    cfg.snapshot_stride = 10;
    let traj = run(&step_datum(32, 0.5), &cfg).unwrap();
    for w in traj.rows.windows(2) {
        assert!(w[1].dissipation >= w[0].dissipation);
        assert!(w[1].energy <= w[0].energy);
    }
    assert!(norm(&[traj.rows.last().unwrap().dissipation]) > 0.0);
}
