use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::flow::FlowConfig;
use crate::geometry::Manifold;
use crate::grid::{Field, GridDomain};

/// A stored field.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    /// Regularization active at `t`.
    pub eps: f64,
    pub step: u64,
    pub field: Field,
}

/// Scalar diagnostics recorded with each snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub eps: f64,
    pub step: u64,
    /// `E_ε(u(t))` at the active ε.
    pub energy: f64,
    pub dissipation: f64,
    pub sup_v: f64,
}

/// One stage of constant regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub epsilon: f64,
    pub dt: f64,
    /// Index of the first snapshot taken at or after `t_start`.
    pub first_snapshot: usize,
}

/// Output of [`run`](crate::flow::run).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// One row per snapshot.
    pub rows: Vec<DiagnosticsRow>,
    pub segments: Vec<Segment>,
    pub config: FlowConfig,
    /// `‖v₀‖_∞` at the initial regularization.
    pub sup_v0: f64,
    /// `T† = 1/(K ‖v₀‖_∞)` for targets with `K > 0`.
    pub horizon: Option<f64>,
    /// Time at which the run reached `T†`, if it did.
    pub horizon_reached: Option<f64>,
    /// First checked time at which the geodesic diameter fell below the
    /// extinction threshold.
    pub extinction_time: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last_t(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.t)
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn initial(&self) -> &Field {
        &self.snapshots[0].field
    }

    pub fn last(&self) -> &Field {
        &self.snapshots.last().expect("trajectory has a snapshot").field
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        self.initial().domain()
    }

    pub fn manifold(&self) -> &Arc<Manifold> {
        self.initial().manifold()
    }

    /// CSV with header `t,eps,step,energy,dissipation_acc,sup_v`.
    pub fn write_rows_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,eps,step,energy,dissipation_acc,sup_v")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.t, r.eps, r.step, r.energy, r.dissipation, r.sup_v
            )?;
        }
        Ok(())
    }
}
