use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::flow::{run, EpsStage, FlowConfig};
use crate::geometry::{rotation, Manifold, ManifoldPoint};
use crate::grid::{Boundary, GridDomain};

fn line(n: usize) -> Arc<GridDomain> {
    Arc::new(GridDomain::unit(&[n], Boundary::NeumannReflect).unwrap())
}

fn step_datum(n: usize, a: f64) -> Field {
    Field::from_fn(line(n), Arc::new(Manifold::euclidean(1)), |x| {
        vec![if x[0] < 0.5 { -a } else { a }]
    })
    .unwrap()
}

fn sphere() -> Arc<Manifold> {
    Arc::new(Manifold::sphere(3, 1.0))
}

fn points_field(points: &[Vec<f64>]) -> Field {
    let man = Arc::new(Manifold::sphere(points[0].len(), 1.0));
    Field::new(line(points.len()), man, points.concat()).unwrap()
}

fn on_small_circle(p_angle: f64, k: usize, count: usize) -> Vec<f64> {
    let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
    let (s, c) = p_angle.sin_cos();
    vec![s * a.cos(), s * a.sin(), c]
}

#[test]
fn constant_datum_energy_is_trivial() {
    let d = Arc::new(GridDomain::unit(&[8, 8], Boundary::NeumannReflect).unwrap());
    let u0 = Field::constant(d, sphere(), &[0.0, 0.0, 1.0]).unwrap();
    let mut cfg = FlowConfig::new(0.1, 1e-3);
    cfg.stop_on_extinction = false;
    cfg.snapshot_stride = 10;
    let traj = run(&u0, &cfg).unwrap();
    let rep = energy_audit(&traj).unwrap();
    assert!(rep.passed);
    for r in &traj.rows {
        assert!((r.energy - 64.0 / 64.0 * 0.1).abs() < 1e-15);
        assert_eq!(r.sup_v, 0.1);
    }
}

#[test]
fn step_run_energy_balance() {
    let mut cfg = FlowConfig::new(0.1, 0.05);
    cfg.snapshot_stride = 500;
    let traj = run(&step_datum(128, 0.5), &cfg).unwrap();
    let rep = energy_audit(&traj).unwrap();
    assert!(rep.passed, "{rep:?}");
    let first = traj.rows[0];
    let last = traj.rows.last().unwrap();
    let drop = first.energy - last.energy;
    assert!((last.dissipation - drop).abs() <= 0.01 * drop, "{} vs {drop}", last.dissipation);
}

#[test]
fn time_reversed_trajectory_fails_energy_audit() {
    let mut cfg = FlowConfig::new(0.1, 0.01);
    cfg.snapshot_stride = 100;
    let mut traj = run(&step_datum(64, 0.5), &cfg).unwrap();
    let times: Vec<f64> = traj.rows.iter().map(|r| r.t).collect();
    let steps: Vec<u64> = traj.rows.iter().map(|r| r.step).collect();
    traj.rows.reverse();
    traj.snapshots.reverse();
    for (j, r) in traj.rows.iter_mut().enumerate() {
        r.t = times[j];
        r.step = steps[j];
    }
    let rep = energy_audit(&traj).unwrap();
    assert!(!rep.passed);
    assert!(!rep.violations.is_empty());
}

#[test]
fn envelope_doubles_at_half_horizon() {
    for v0 in [0.5, 1.0, 2.0, 3.7] {
        let t_dagger = 1.0 / v0;
        assert!((envelope(0.5 * t_dagger, 1.0, v0) - 2.0 * v0).abs() < 1e-12);
    }
    assert_eq!(envelope(10.0, 0.0, 1.5), 1.5);
    assert_eq!(envelope(10.0, -1.0, 1.5), 1.5);
}

#[test]
fn flat_gradient_bound_and_constant_field() {
    let mut cfg = FlowConfig::new(0.05, 0.02);
    cfg.snapshot_stride = 200;
    let traj = run(&step_datum(64, 0.3), &cfg).unwrap();
    let rep = gradient_envelope_audit(&traj, 0.0).unwrap();
    assert!(rep.passed, "{rep:?}");

    let d = Arc::new(GridDomain::unit(&[6, 6], Boundary::Periodic).unwrap());
    let u0 = Field::constant(d, Arc::new(Manifold::cylinder(1)), &[1.0, 0.0, 3.0]).unwrap();
    let mut cfg = FlowConfig::new(0.2, 1e-3);
    cfg.stop_on_extinction = false;
    let traj = run(&u0, &cfg).unwrap();
    assert!(traj.rows.iter().all(|r| r.sup_v == 0.2));
}

#[test]
fn nonconvex_mask_is_rejected() {
    // L-shaped mask
    let mut mask = vec![true; 16];
    for i in [2, 3, 6, 7] {
        mask[i] = false;
    }
    let d = Arc::new(GridDomain::with_mask(&[4, 4], 0.25, Boundary::NeumannReflect, mask).unwrap());
    let u0 = Field::from_fn(d, Arc::new(Manifold::euclidean(1)), |x| vec![x[0]]).unwrap();
    let traj = run(&u0, &FlowConfig::new(0.1, 1e-3)).unwrap();
    assert!(matches!(gradient_envelope_audit(&traj, 0.0), Err(Error::DomainNotConvex(_))));
}

#[test]
fn karcher_mean_examples() {
    let q = vec![0.6, 0.0, 0.8];
    let c = points_field(&[q.clone(), q.clone(), q.clone()]);
    let p = karcher_mean(&c, &ManifoldPoint(vec![0.0, 0.0, 1.0])).unwrap();
    assert!(crate::linalg::dist(p.coords(), &q) < 1e-12);

    // two points symmetric about the pole → the pole
    let (s, co) = 0.4f64.sin_cos();
    let two = points_field(&[vec![s, 0.0, co], vec![-s, 0.0, co]]);
    let p = karcher_mean(&two, &ManifoldPoint(vec![0.0, 0.0, 1.0])).unwrap();
    assert!(crate::linalg::dist(p.coords(), &[0.0, 0.0, 1.0]) < 1e-12);

    let three = points_field(&[on_small_circle(0.3, 0, 3), on_small_circle(0.3, 1, 3), on_small_circle(0.3, 2, 3)]);
    let start = ManifoldPoint(vec![0.1, -0.05, (1.0f64 - 0.0125).sqrt()]);
    let p = karcher_mean(&three, &start).unwrap();
    assert!(crate::linalg::dist(p.coords(), &[0.0, 0.0, 1.0]) < 1e-10);
    let man = three.manifold();
    let mut g = [0.0; 3];
    let mut acc = [0.0; 3];
    for i in 0..3 {
        man.log(p.coords(), three.value(i), &mut g).unwrap();
        for k in 0..3 {
            acc[k] += g[k] / 3.0;
        }
    }
    assert!(crate::linalg::norm(&acc) < 1e-10);
}

#[test]
fn karcher_mean_refuses_wide_data() {
    let u = points_field(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]);
    let e = karcher_mean(&u, &ManifoldPoint(vec![0.0, 0.0, 1.0])).unwrap_err();
    assert!(matches!(e, Error::RadiusViolation { .. }));
}

fn random_cap_field(rng: &mut ChaCha8Rng, count: usize, spread: f64) -> Field {
    let man = Manifold::sphere(3, 1.0);
    let pole = [0.0, 0.0, 1.0];
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let x = man.random_tangent(&pole, spread * rng.random::<f64>(), rng);
            let mut out = vec![0.0; 3];
            man.exp(&pole, &x, &mut out);
            out
        })
        .collect();
    points_field(&pts)
}

#[test]
fn karcher_mean_equivariance_and_minimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = random_cap_field(&mut rng, 40, 0.5);
    let pole = ManifoldPoint(vec![0.0, 0.0, 1.0]);
    let pc = karcher_mean(&u, &pole).unwrap();

    let r = rotation([0.3, -1.0, 0.4], 0.7);
    let rot = |p: &[f64]| -> Vec<f64> { (0..3).map(|i| (0..3).map(|j| r[3 * i + j] * p[j]).sum()).collect() };
    let v = u.map_values(rot).unwrap();
    let pv = karcher_mean(&v, &ManifoldPoint(rot(pole.coords()))).unwrap();
    assert!(crate::linalg::dist(&rot(pc.coords()), pv.coords()) < 1e-9);

    let f_min = f_mu(&u, pc.coords());
    let man = u.manifold();
    for _ in 0..100 {
        let x = man.random_tangent(pc.coords(), 0.3 * rng.random::<f64>(), &mut rng);
        let mut p = vec![0.0; 3];
        man.exp(pc.coords(), &x, &mut p);
        assert!(f_min <= f_mu(&u, &p) + 1e-12);
    }
}

#[test]
fn f_mu_examples() {
    let q = vec![0.0, 0.0, 1.0];
    let c = points_field(&[q.clone(), q.clone()]);
    assert_eq!(f_mu(&c, &q), 0.0);

    let d = 0.6;
    let (s, co) = (d / 2.0f64).sin_cos();
    let two = points_field(&[vec![s, 0.0, co], vec![-s, 0.0, co]]);
    let h_m = two.domain().cell_volume();
    let expected = 0.5 * 2.0 * h_m * (d / 2.0) * (d / 2.0);
    assert!((f_mu(&two, &q) - expected).abs() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = random_cap_field(&mut rng, 25, 1.0);
    let p = [0.6, 0.0, 0.8];
    let mut brute = 0.0;
    for i in 0..25 {
        let x = u.value(i);
        let cos = (x[0] * p[0] + x[1] * p[1] + x[2] * p[2]).clamp(-1.0, 1.0);
        brute += cos.acos().powi(2);
    }
    brute *= 0.5 / 25.0;
    assert!((f_mu(&u, &p) - brute).abs() < 1e-12);
}

fn arc_datum(n: usize, radius: f64) -> Field {
    // geodesic arc through the pole, |dist to pole| ≤ radius
    Field::from_fn(line(n), sphere(), |x| {
        let s = radius * (2.0 * x[0] - 1.0);
        vec![s.sin(), 0.0, s.cos()]
    })
    .unwrap()
}

#[test]
fn fmu_audit_constant_and_frozen() {
    let pole = [0.0, 0.0, 1.0];
    let u0 = Field::constant(line(16), sphere(), &pole).unwrap();
    let traj = run(&u0, &FlowConfig::new(0.1, 1e-3)).unwrap();
    let (rep, _) = fmu_decay_audit(&traj, &pole, 0.3).unwrap();
    assert!(rep.passed, "{rep:?}");

    // a "trajectory" that never moves
    let u0 = arc_datum(16, 0.3);
    let mut cfg = FlowConfig::new(0.1, 2e-3);
    cfg.snapshot_stride = 10;
    let mut traj = run(&u0, &cfg).unwrap();
    for s in traj.snapshots.iter_mut() {
        s.field = u0.clone();
    }
    let (rep, _) = fmu_decay_audit(&traj, &pole, 0.3).unwrap();
    assert!(!rep.passed);
    assert!(!rep.violations.is_empty());

    assert!(matches!(fmu_decay_audit(&traj, &pole, 0.2), Err(Error::RadiusViolation { .. })));
}

#[test]
fn arc_datum_shrinks_to_a_point() {
    let pole = [0.0, 0.0, 1.0];
    let u0 = arc_datum(64, 0.3);
    let mut cfg = FlowConfig::new(0.1, 0.4);
    cfg.eps_schedule = Some(vec![
        EpsStage { epsilon: 0.1, duration: 0.12 },
        EpsStage { epsilon: 0.01, duration: 0.03 },
        EpsStage { epsilon: 0.002, duration: 0.0 },
    ]);
    cfg.snapshot_stride = 2000;
    let traj = run(&u0, &cfg).unwrap();
    let t_ext = extinction_time(&traj).unwrap();
    // two plateaus of length ½ closing a gap of 0.6 at rate 4
    assert!((t_ext - 0.15).abs() < 0.015 * 1.0 + 0.1 * 0.15, "{t_ext}");
    let (rep, decay) = fmu_decay_audit(&traj, &pole, 0.3).unwrap();
    assert!(decay.f.last().unwrap() < &FMU_ZERO);
    assert!(rep.details["f0"] > 0.0);
    let ball = ball_invariance_audit(&traj, &pole, 0.3).unwrap();
    assert!(ball.passed, "{ball:?}");
}

#[test]
fn ball_audit_examples() {
    let pole = [0.0, 0.0, 1.0];
    let u0 = Field::constant(line(8), sphere(), &pole).unwrap();
    let traj = run(&u0, &FlowConfig::new(0.1, 1e-3)).unwrap();
    let rep = ball_invariance_audit(&traj, &pole, 0.4).unwrap();
    assert!(rep.passed);
    assert_eq!(rep.measured, 0.0);

    let traj = run(&arc_datum(8, 0.3), &FlowConfig::new(0.1, 1e-3)).unwrap();
    assert!(matches!(ball_invariance_audit(&traj, &pole, 0.2), Err(Error::RadiusViolation { .. })));
    assert!(ball_invariance_audit(&traj, &pole, 2.0).is_err());
}

#[test]
fn step_extinction_time() {
    for a in [0.25, 0.125] {
        let mut cfg = FlowConfig::new(0.1, 1.0);
        cfg.eps_schedule = Some(vec![
            EpsStage { epsilon: 0.1, duration: 0.8 * a / 2.0 },
            EpsStage { epsilon: 0.01, duration: 0.15 * a / 2.0 },
            EpsStage { epsilon: 0.001, duration: 0.0 },
        ]);
        cfg.snapshot_stride = 100_000;
        let traj = run(&step_datum(64, a), &cfg).unwrap();
        let t = extinction_time(&traj).unwrap();
        assert!((t - a / 2.0).abs() <= 0.1 * a / 2.0, "a = {a}: {t}");
        let rep = extinction_audit(&traj, &[0.0], a).unwrap();
        assert!(rep.passed);
    }
    let c = Field::constant(line(8), Arc::new(Manifold::euclidean(1)), &[0.2]).unwrap();
    let traj = run(&c, &FlowConfig::new(0.1, 1.0)).unwrap();
    assert_eq!(extinction_time(&traj).unwrap(), 0.0);

    let mut cfg = FlowConfig::new(0.1, 1e-3);
    cfg.stop_on_extinction = true;
    let traj = run(&step_datum(8, 0.5), &cfg).unwrap();
    assert!(matches!(extinction_time(&traj), Err(Error::NoExtinction { .. })));
}

#[test]
fn contraction_examples() {
    let u0 = step_datum(32, 0.3);
    let mut cfg = FlowConfig::new(0.1, 0.02);
    cfg.snapshot_stride = 100;
    let out = contraction_audit(&u0, 0.0, &cfg, 1).unwrap();
    assert!(out.report.passed);
    assert!(out.gaps.iter().all(|&d| d == 0.0));

    let out = contraction_audit(&u0, 1e-3, &cfg, 1).unwrap();
    assert!(out.report.passed, "{:?}", out.report);
    for w in out.gaps.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9));
    }
    assert!(perturb(&u0, 1.0, 0).is_ok());
    let s = Field::constant(line(4), sphere(), &[0.0, 0.0, 1.0]).unwrap();
    assert!(perturb(&s, 0.2, 0).is_err());
}

#[test]
fn diameter_exact_and_sampled() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_cap_field(&mut rng, 50, 0.8);
    let man = u.manifold();
    let mut brute = 0.0f64;
    for i in 0..50 {
        for j in 0..50 {
            brute = brute.max(man.distance(u.value(i), u.value(j)));
        }
    }
    assert_eq!(geodesic_diameter(&u), brute);

    // above the exact threshold the sampled value is a tight lower bound
    let d = Arc::new(GridDomain::unit(&[80, 80], Boundary::NeumannReflect).unwrap());
    let big = Field::from_fn(d, sphere(), |x| {
        let a = 0.5 * x[0] + 0.2 * (3.0 * x[1]).sin();
        vec![a.sin(), 0.3 * x[1], a.cos()]
    })
    .unwrap();
    let sampled = geodesic_diameter(&big);
    let corners = [0, 79, 80 * 79, 80 * 80 - 1];
    let mut lower = 0.0f64;
    for &i in &corners {
        for &j in &corners {
            lower = lower.max(big.manifold().distance(big.value(i), big.value(j)));
        }
    }
    assert!(sampled >= lower * (1.0 - 1e-3), "{sampled} vs {lower}");
}

#[test]
fn report_serializes_to_one_line() {
    let rep = AuditReport::new("x", 1.0, 2.0, 0.1, vec![]).with("c", 3.0);
    let line = rep.to_json_line();
    assert!(!line.contains('\n'));
    let back: AuditReport = serde_json::from_str(&line).unwrap();
    assert_eq!(back, rep);
}
