//! Named verification suites. Each one runs a fixed matrix of flows and
//! returns one audit report per check.

use std::f64::consts::PI;
use std::sync::Arc;

use anyhow::Result;

use tvflow::convexdom::{hausdorff_audit, inner_domain, ConvexBody};
use tvflow::datum::Datum;
use tvflow::diagnostics::{
    ball_invariance_audit, contraction_audit, energy_audit, extinction_audit, extinction_ratio_audit,
    fmu_decay_audit, gradient_envelope_audit, sup_v, AuditReport,
};
use tvflow::flow::{rhs, run, EpsStage, FlowConfig, HorizonPolicy, RhsForm};
use tvflow::{Boundary, Error, Field, GridDomain, Manifold};

pub const SUITES: &[&str] = &[
    "energy",
    "gradient",
    "blowup",
    "extinction-1d",
    "ball",
    "contraction",
    "forms",
    "convexdom",
    "torus",
    "all",
];

type Sink<'a> = &'a mut dyn FnMut(AuditReport) -> Result<()>;

/// Runs `name`, handing each report to `sink` as soon as it is ready.
pub fn run_suite(name: &str, seed: u64, sink: Sink) -> Result<()> {
    match name {
        "energy" => energy(sink),
        "gradient" => gradient(sink),
        "blowup" => blowup(sink),
        "extinction-1d" => extinction_1d(sink),
        "ball" => ball(sink),
        "contraction" => contraction(seed, sink),
        "forms" => forms(sink),
        "convexdom" => convexdom(sink),
        "torus" => torus(sink),
        "all" => {
            for s in SUITES.iter().filter(|s| **s != "all") {
                run_suite(s, seed, sink)?;
            }
            Ok(())
        }
        other => Err(Error::UnknownSuite(other.to_string()).into()),
    }
}

fn named(mut r: AuditReport, name: String) -> AuditReport {
    r.name = name;
    r
}

/// A report for a scalar check done here rather than in the library.
fn check(name: String, measured: f64, bound: f64, tol: f64, ok: bool) -> AuditReport {
    AuditReport::new(&name, measured, bound, tol, if ok { vec![] } else { vec![measured] })
}

fn domain(dims: &[usize], boundary: Boundary) -> Result<Arc<GridDomain>> {
    Ok(Arc::new(GridDomain::unit(dims, boundary)?))
}

/// `exp_p(a cos(πx)·e₁ + b sin(πx) cos(πy)·e₂)` around the base point: a
/// smooth datum with no flux through a reflecting boundary.
pub fn two_mode(man: &Arc<Manifold>, dom: &Arc<GridDomain>, a: f64, b: f64) -> Result<Field> {
    let p = man.base_point();
    let basis = man.tangent_basis(&p);
    let n = man.ambient_dim();
    let m = man.clone();
    Ok(Field::from_fn(dom.clone(), man.clone(), move |x| {
        let y = if x.len() > 1 { (PI * x[1]).cos() } else { 1.0 };
        let c = [a * (PI * x[0]).cos(), b * (PI * x[0]).sin() * y];
        let mut t = vec![0.0; n];
        for (ck, e) in c.iter().zip(&basis) {
            for (ti, ei) in t.iter_mut().zip(e) {
                *ti += ck * ei;
            }
        }
        let mut out = vec![0.0; n];
        m.exp(&p, &t, &mut out);
        out
    })?)
}

fn builtin(d: Datum, dom: &Arc<GridDomain>, man: &Arc<Manifold>) -> Result<Field> {
    Ok(d.generate(dom.clone(), man.clone(), 0)?)
}

fn step(a: f64) -> Datum {
    Datum::Step {
        a,
        p0: None,
        direction: None,
    }
}

fn energy(sink: Sink) -> Result<()> {
    for id in ["euclidean:1", "circle", "sphere:3:1", "cylinder:1"] {
        let man = Arc::new(id.parse::<Manifold>()?);
        for dims in [vec![128usize], vec![32, 32]] {
            let dom = domain(&dims, Boundary::NeumannReflect)?;
            for eps in [1e-1, 1e-2] {
                let mut cfg = FlowConfig::new(eps, 0.02);
                cfg.snapshot_stride = 200;
                cfg.stop_on_extinction = false;
                let tr = run(&two_mode(&man, &dom, 0.8, 0.6)?, &cfg)?;
                sink(named(energy_audit(&tr)?, format!("energy {id} {dims:?} eps={eps}")))?;
            }
        }
    }
    Ok(())
}

fn gradient(sink: Sink) -> Result<()> {
    let eps = 0.05;
    for id in ["euclidean:1", "cylinder:1"] {
        let man = Arc::new(id.parse::<Manifold>()?);
        for dims in [vec![128usize], vec![32, 32]] {
            let dom = domain(&dims, Boundary::NeumannReflect)?;
            let bump = Datum::GeodesicBump {
                amplitude: 0.3,
                width: Some(0.3),
                p0: None,
                direction: None,
            };
            for (name, u0) in [
                ("two-mode", two_mode(&man, &dom, 0.3, 0.2)?),
                ("step", builtin(step(0.1), &dom, &man)?),
                ("radial bump", builtin(bump, &dom, &man)?),
            ] {
                let mut cfg = FlowConfig::new(eps, 10.0);
                cfg.snapshot_stride = 200;
                let t_ext = run(&u0, &cfg)?.extinction_time.ok_or(Error::NoExtinction { t_end: 10.0 })?;
                cfg.t_end = 5.0 * t_ext;
                cfg.stop_on_extinction = false;
                let tr = run(&u0, &cfg)?;
                let rep = gradient_envelope_audit(&tr, man.curvature_sup())?;
                sink(named(rep, format!("gradient {id} {dims:?} {name}")))?;
            }
        }
    }
    Ok(())
}

fn blowup(sink: Sink) -> Result<()> {
    let man = Arc::new(Manifold::sphere(3, 1.0));
    let eps = 0.1;
    for dims in [vec![128usize], vec![32, 32]] {
        let dom = domain(&dims, Boundary::NeumannReflect)?;
        for target in [1.0, 2.0] {
            // Scale the datum until sup_v(0) hits the target.
            let (mut lo, mut hi) = (0.0, 3.0);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if sup_v(&two_mode(&man, &dom, mid, 0.75 * mid)?, eps) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let u0 = two_mode(&man, &dom, hi, 0.75 * hi)?;
            let t_dagger = 1.0 / sup_v(&u0, eps);
            let mut cfg = FlowConfig::new(eps, 0.8 * t_dagger);
            cfg.snapshot_stride = 50;
            cfg.stop_on_extinction = false;
            cfg.horizon = HorizonPolicy::Warn;
            let tr = run(&u0, &cfg)?;
            let rep = gradient_envelope_audit(&tr, man.curvature_sup())?;
            sink(named(rep, format!("blowup {dims:?} sup_v0={target}")))?;
        }
    }
    Ok(())
}

fn extinction_1d(sink: Sink) -> Result<()> {
    let dom = domain(&[256], Boundary::NeumannReflect)?;
    let man = Arc::new(Manifold::euclidean(1));
    let mut trajs = Vec::new();
    for a in [0.25, 0.5] {
        let t_star = a / 2.0;
        let mut cfg = FlowConfig::new(0.1, 2.0 * t_star);
        cfg.snapshot_stride = 1000;
        cfg.eps_schedule = Some(vec![
            EpsStage {
                epsilon: 1e-1,
                duration: 0.8 * t_star,
            },
            EpsStage {
                epsilon: 1e-2,
                duration: 0.15 * t_star,
            },
            EpsStage {
                epsilon: 1e-3,
                duration: f64::INFINITY,
            },
        ]);
        let tr = run(&builtin(step(a), &dom, &man)?, &cfg)?;
        let rep = extinction_audit(&tr, &[0.0], a)?;
        let t = rep.measured;
        sink(named(rep, format!("extinction step a={a}")))?;
        let rel = (t - t_star).abs() / t_star;
        sink(check(format!("extinction oracle a={a} (t*={t_star})"), t, t_star, 0.1, rel <= 0.1))?;
        trajs.push(tr);
    }
    sink(extinction_ratio_audit("extinction ratio a=0.5/a=0.25", &trajs[1], &trajs[0], (1.8, 2.2))?)
}

fn ball(sink: Sink) -> Result<()> {
    let man = Arc::new(Manifold::sphere(3, 1.0));
    let dom = domain(&[32, 32], Boundary::NeumannReflect)?;
    let u0 = two_mode(&man, &dom, 0.35, 0.3)?;
    let p0 = man.base_point();
    let mut cfg = FlowConfig::new(0.01, 1.0);
    cfg.snapshot_stride = 200;
    let t_ext = run(&u0, &cfg)?.extinction_time.ok_or(Error::NoExtinction { t_end: 1.0 })?;
    cfg.t_end = 1.5 * t_ext;
    cfg.stop_on_extinction = false;
    let tr = run(&u0, &cfg)?;
    sink(named(ball_invariance_audit(&tr, &p0, 0.4)?, "ball invariance R=0.4".into()))?;
    sink(named(fmu_decay_audit(&tr, &p0, 0.4)?.0, "fmu decay R=0.4".into()))?;
    sink(named(extinction_audit(&tr, &p0, 0.4)?, "extinction R=0.4".into()))
}

fn contraction(seed: u64, sink: Sink) -> Result<()> {
    let man = Arc::new(Manifold::sphere(3, 1.0));
    let dom = domain(&[128], Boundary::NeumannReflect)?;
    let u0 = two_mode(&man, &dom, 0.4, 0.3)?;
    let mut rates = Vec::new();
    for c in [0.45, 0.225] {
        let mut cfg = FlowConfig::new(0.05, 0.05);
        cfg.dt_safety = c;
        cfg.snapshot_stride = (200.0 * 0.45 / c) as u64;
        let out = contraction_audit(&u0, 1e-3, &cfg, seed)?;
        rates.push(out.fitted_c);
        sink(named(out.report, format!("contraction sphere:3:1 [128] dt_safety={c}")))?;
    }
    let change = (rates[1] - rates[0]).abs() / rates[0].abs();
    sink(check("contraction rate under dt halving".into(), change, 0.2, 0.2, change < 0.2))?;

    let flat = Arc::new(Manifold::euclidean(2));
    let dom = domain(&[32, 32], Boundary::NeumannReflect)?;
    let mut cfg = FlowConfig::new(0.05, 0.05);
    cfg.snapshot_stride = 50;
    let out = contraction_audit(&two_mode(&flat, &dom, 0.4, 0.3)?, 1e-3, &cfg, seed)?;
    sink(named(out.report, "contraction euclidean:2 [32, 32]".into()))
}

/// Max-cell gap between the two right-hand sides on a smooth periodic
/// sphere-valued field, and its observed order under refinement.
fn forms(sink: Sink) -> Result<()> {
    let man = Arc::new(Manifold::sphere(3, 1.0));
    let mut gaps = Vec::new();
    for n in [16usize, 32, 64, 128] {
        let m2 = man.clone();
        let u = Field::from_fn(domain(&[n, n], Boundary::Periodic)?, man.clone(), move |x| {
            let (a, b) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
            let v = [0.5 * a.sin(), 0.4 * b.cos() + 0.2 * (a + b).sin(), 0.0];
            let mut out = vec![0.0; 3];
            m2.exp(&[0.0, 0.0, 1.0], &v, &mut out);
            out
        })?;
        let p = rhs(&u, 0.1, RhsForm::Project);
        let s = rhs(&u, 0.1, RhsForm::SecondFundamental);
        let gap = p
            .chunks(3)
            .zip(s.chunks(3))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        gaps.push((n, gap));
    }
    for w in gaps.windows(2) {
        let order = (w[0].1 / w[1].1).log2();
        let name = format!("form gap order n={}->{}", w[0].0, w[1].0);
        sink(check(name, order, 0.8, 0.0, order >= 0.8).with("gap", w[1].1))?;
    }
    Ok(())
}

fn convexdom(sink: Sink) -> Result<()> {
    let grid = GridDomain::unit(&[128, 128], Boundary::NeumannReflect)?;
    let bodies = [
        ("square", ConvexBody::cuboid(&[0.0, 0.0], &[1.0, 1.0])?),
        ("triangle", ConvexBody::polygon(&[[0.05, 0.05], [0.95, 0.05], [0.05, 0.95]])?),
        ("64-gon", ConvexBody::regular_polygon(64, [0.5, 0.5], 0.45)?),
    ];
    for (name, body) in &bodies {
        for eps in [0.02, 0.05] {
            let mask = inner_domain(body, eps, &grid)?;
            sink(named(hausdorff_audit(body, eps, &mask, &grid)?, format!("hausdorff {name} eps={eps}")))?;
        }
    }
    Ok(())
}

/// Cylinder-valued field on the flat torus winding once around the circle
/// factor. The flow settles on the winding harmonic map.
fn torus(sink: Sink) -> Result<()> {
    let man = Arc::new(Manifold::cylinder(1));
    let dom = domain(&[32, 32], Boundary::Periodic)?;
    let u0 = Field::from_fn(dom.clone(), man.clone(), |x| {
        let theta = 2.0 * PI * x[0] + 0.3 * (2.0 * PI * x[1]).sin();
        vec![theta.cos(), theta.sin(), 0.2 * (2.0 * PI * (x[0] + x[1])).cos()]
    })?;
    let eps = 1.0;
    let mut cfg = FlowConfig::new(eps, 16.0);
    cfg.snapshot_stride = 500;
    cfg.stop_on_extinction = false;
    let tr = run(&u0, &cfg)?;
    sink(named(energy_audit(&tr)?, "torus energy".into()))?;
    sink(named(gradient_envelope_audit(&tr, 0.0)?, "torus gradient".into()))?;
    let r = rhs(tr.last(), eps, RhsForm::Project);
    let rhs_l2 = (dom.cell_volume() * r.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let rows = &tr.rows;
    let (a, b) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
    let rate = (a.energy - b.energy).abs() / (b.t - a.t);
    let ok = tr.extinction_time.is_some() || (rate < 1e-8 && rhs_l2 < 1e-6);
    sink(check("torus stationary limit".into(), rhs_l2, 1e-6, 0.0, ok).with("energy_rate", rate))
}
