//! Online check of the velocity-spread decay estimate along a trajectory.
//!
//! For a controller in perturbed form `u_i = alpha (vbar - v_i) + beta Delta_i`
//! the spread obeys
//!
//! ```text
//! dV/dt <= -2 a(sqrt(2 N X)) V - 2 alpha V + (2 beta / N) sum_i <Delta_i, v_i_perp>
//! ```
//!
//! The monitor evaluates the right side at every recorded snapshot and
//! compares it with a finite-difference estimate of `dV/dt`.

use log::warn;
use serde::Serialize;

use crate::algebra;
use crate::controllers::{build_weights_phi, weight_diagnostics, ControllerSpec};
use crate::error::{Error, Result};
use crate::integrator::{rhs, Trajectory};
use crate::kernel::KernelSpec;
use crate::state::FlockState;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorPoint {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    /// Finite difference of the recorded `V` series.
    pub dv_dt_fd: f64,
    /// `dV/dt` evaluated from the vector field at the snapshot.
    pub dv_dt_exact: f64,
    /// Right side of the decay estimate.
    pub bound: f64,
    /// `dv_dt_fd - bound`; non-positive up to finite-difference error.
    pub residual: f64,
    /// `|dv_dt_fd - dv_dt_exact|`, the finite-difference slack at this point.
    pub fd_slack: f64,
    /// `-2 a V + 2 beta (S - N I - alpha/beta) V` for the `phi`-weighted controller.
    pub weighted_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub points: Vec<MonitorPoint>,
    pub warnings: Vec<String>,
}

impl MonitorReport {
    /// Largest `residual - fd_slack` over the run.
    pub fn worst_excess(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.residual - p.fd_slack)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(2/N) sum_i <w_i, v_i_perp>`.
fn projected(state: &FlockState, w: &[f64]) -> f64 {
    let (n, dim) = (state.agents(), state.dim());
    let dev = algebra::deviations(state.velocities(), dim);
    2.0 / n as f64 * algebra::dot(w, &dev)
}

/// Right side of the decay estimate at `(state, t)`.
pub fn decay_bound_at(
    state: &FlockState,
    t: f64,
    kernel: &KernelSpec,
    controller: &ControllerSpec,
) -> Result<f64> {
    let n = state.agents() as f64;
    let d = state.dispersion();
    let a = kernel.eval((2.0 * n * d.x).sqrt())?;
    let form = controller.perturbed_form(state, t);
    Ok(-2.0 * a * d.v - 2.0 * form.alpha * d.v + form.beta * projected(state, &form.delta))
}

/// Exact `dV/dt` from the vector field.
pub fn spread_rate(
    state: &FlockState,
    t: f64,
    kernel: &KernelSpec,
    controller: &ControllerSpec,
) -> f64 {
    projected(state, &rhs(state, kernel, controller, t).dv)
}

pub fn decay_monitor(
    traj: &Trajectory,
    kernel: &KernelSpec,
    controller: &ControllerSpec,
) -> Result<MonitorReport> {
    let snaps = traj
        .snapshots
        .as_ref()
        .ok_or_else(|| Error::Contract("decay monitor needs recorded snapshots".into()))?;
    let m = snaps.len();
    if m < 2 {
        return Err(Error::Contract(
            "decay monitor needs at least two records".into(),
        ));
    }
    let (t, vs) = (&traj.times, &traj.v_series);
    let mut warnings = Vec::new();
    let mut coarse = false;
    let mut points = Vec::with_capacity(m);

    for k in 0..m {
        let s = &snaps[k];
        let (lo, hi) = match k {
            0 => (0, 1),
            k if k == m - 1 => (m - 2, m - 1),
            k => (k - 1, k + 1),
        };
        let fd = (vs[hi] - vs[lo]) / (t[hi] - t[lo]);
        let exact = spread_rate(s, t[k], kernel, controller);
        let bound = decay_bound_at(s, t[k], kernel, controller)?;
        let d = s.dispersion();

        let weighted_bound = match controller {
            ControllerSpec::WeightedPerturbation {
                alpha,
                beta,
                epsilon,
            } if *beta > 0.0 => {
                let w = build_weights_phi(s, *epsilon);
                let diag = weight_diagnostics(&w, *alpha, *beta)?;
                let a = kernel.eval((2.0 * s.agents() as f64 * d.x).sqrt())?;
                Some(-2.0 * a * d.v + 2.0 * beta * diag.decay_bound.expect("beta > 0") * d.v)
            }
            _ => None,
        };

        let spacing = t[hi] - t[lo];
        if d.v > 0.0 && spacing * exact.abs() / d.v > 0.2 {
            coarse = true;
        }
        points.push(MonitorPoint {
            t: t[k],
            x: d.x,
            v: d.v,
            dv_dt_fd: fd,
            dv_dt_exact: exact,
            bound,
            residual: fd - bound,
            fd_slack: (fd - exact).abs(),
            weighted_bound,
        });
    }
    if coarse {
        let msg =
            "record stride too coarse: V changes by more than 20% between records".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }
    Ok(MonitorReport { points, warnings })
}
