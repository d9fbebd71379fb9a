//! Fixed-step RK4 integration of the controlled Cucker-Smale system
//!
//! ```text
//! dx_i/dt = v_i
//! dv_i/dt = (1/N) sum_j a(r_ij) (v_j - v_i) + u_i
//! ```

use serde::{Deserialize, Serialize};

use crate::algebra;
use crate::controllers::ControllerSpec;
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelSpec;
use crate::state::FlockState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    #[serde(rename = "t_final", alias = "T")]
    pub horizon: f64,
    #[serde(alias = "stride")]
    pub record_stride: usize,
    #[serde(alias = "threshold")]
    pub consensus_threshold: f64,
    pub record_snapshots: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            horizon: 20.0,
            record_stride: 10,
            consensus_threshold: 1e-5,
            record_snapshots: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(
                "dt",
                format!("must be finite and > 0, got {}", self.dt),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(
                "t_final",
                format!("must be finite and > 0, got {}", self.horizon),
            ));
        }
        if self.dt > self.horizon {
            return Err(invalid(
                "dt",
                format!("dt = {} exceeds horizon {}", self.dt, self.horizon),
            ));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        if !(self.consensus_threshold.is_finite() && self.consensus_threshold > 0.0) {
            return Err(invalid("consensus_threshold", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Step sizes covering `[0, horizon]`: uniform `dt`, with a shortened
    /// final step when `horizon / dt` is not an integer.
    fn schedule(&self) -> (usize, f64) {
        let ratio = self.horizon / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            let n = rounded as usize;
            (n, self.dt)
        } else {
            let n = ratio.ceil() as usize;
            (n, self.horizon - (n - 1) as f64 * self.dt)
        }
    }
}

/// Time derivative of a flock state.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
}

fn needs_distances(controller: &ControllerSpec) -> bool {
    matches!(
        controller,
        ControllerSpec::WeightedPerturbation { .. } | ControllerSpec::LocalRadius { .. }
    )
}

/// Right-hand side of the controlled system at time `t`.
pub fn rhs(
    state: &FlockState,
    kernel: &KernelSpec,
    controller: &ControllerSpec,
    t: f64,
) -> Derivative {
    let (n, dim) = (state.agents(), state.dim());
    let x = state.positions();
    let v = state.velocities();
    let inv_n = 1.0 / n as f64;
    let mut dv = vec![0.0; n * dim];
    let keep = needs_distances(controller);
    let mut sq = if keep { vec![0.0; n * n] } else { Vec::new() };

    // Antisymmetric pair updates keep sum_i dv_i at round-off level.
    for i in 0..n {
        let xi = &x[i * dim..(i + 1) * dim];
        let vi = &v[i * dim..(i + 1) * dim];
        for j in i + 1..n {
            let xj = &x[j * dim..(j + 1) * dim];
            let r2 = algebra::sq_dist(xi, xj);
            if keep {
                sq[i * n + j] = r2;
                sq[j * n + i] = r2;
            }
            let w = kernel.eval_sq(r2) * inv_n;
            if w == 0.0 {
                continue;
            }
            let vj = &v[j * dim..(j + 1) * dim];
            for k in 0..dim {
                let f = w * (vj[k] - vi[k]);
                dv[i * dim + k] += f;
                dv[j * dim + k] -= f;
            }
        }
    }

    match controller {
        ControllerSpec::None => {}
        c if keep => {
            for (d, u) in dv.iter_mut().zip(c.control_with_distances(state, t, &sq)) {
                *d += u;
            }
        }
        c => {
            for (d, u) in dv.iter_mut().zip(c.control_with_distances(state, t, &[])) {
                *d += u;
            }
        }
    }

    Derivative { dx: v.to_vec(), dv }
}

fn axpy(base: &[f64], h: f64, dir: &[f64]) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + h * d).collect()
}

fn rk4_unchecked(
    state: &FlockState,
    kernel: &KernelSpec,
    controller: &ControllerSpec,
    t: f64,
    dt: f64,
) -> FlockState {
    let (n, dim) = (state.agents(), state.dim());
    let x = state.positions();
    let v = state.velocities();
    let stage = |kx: &[f64], kv: &[f64], h: f64| {
        FlockState::from_parts_unchecked(n, dim, axpy(x, h, kx), axpy(v, h, kv))
    };

    let k1 = rhs(state, kernel, controller, t);
    let s2 = stage(&k1.dx, &k1.dv, 0.5 * dt);
    let k2 = rhs(&s2, kernel, controller, t + 0.5 * dt);
    let s3 = stage(&k2.dx, &k2.dv, 0.5 * dt);
    let k3 = rhs(&s3, kernel, controller, t + 0.5 * dt);
    let s4 = stage(&k3.dx, &k3.dv, dt);
    let k4 = rhs(&s4, kernel, controller, t + dt);

    let h6 = dt / 6.0;
    let combine = |base: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..base.len())
            .map(|k| base[k] + h6 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]))
            .collect()
    };
    let nx = combine(x, &k1.dx, &k2.dx, &k3.dx, &k4.dx);
    let nv = combine(v, &k1.dv, &k2.dv, &k3.dv, &k4.dv);
    FlockState::from_parts_unchecked(n, dim, nx, nv)
}

/// One classical RK4 step of size `dt` starting at time `t`.
pub fn rk4_step(
    state: &FlockState,
    kernel: &KernelSpec,
    controller: &ControllerSpec,
    t: f64,
    dt: f64,
) -> Result<FlockState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
    }
    controller.validate(state.agents(), state.dim())?;
    let next = rk4_unchecked(state, kernel, controller, t, dt);
    if !next.all_finite() {
        return Err(Error::Blowup {
            step: 0,
            time: t + dt,
        });
    }
    Ok(next)
}

/// Recorded time series of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x_series: Vec<f64>,
    pub v_series: Vec<f64>,
    pub mean_velocity_series: Vec<Vec<f64>>,
    /// Full states at each recorded time, when requested.
    pub snapshots: Option<Vec<FlockState>>,
    /// `V(T) <= consensus_threshold`.
    pub consensus: bool,
    /// First integration time at which `V` dropped to the threshold.
    pub first_crossing_time: Option<f64>,
    pub final_state: FlockState,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_x(&self) -> f64 {
        *self.x_series.last().expect("at least one record")
    }

    pub fn final_v(&self) -> f64 {
        *self.v_series.last().expect("at least one record")
    }
}

struct Recorder {
    traj: Trajectory,
    keep_snapshots: bool,
}

impl Recorder {
    fn push(&mut self, t: f64, s: &FlockState) {
        let d = s.dispersion();
        self.traj.times.push(t);
        self.traj.x_series.push(d.x);
        self.traj.v_series.push(d.v);
        self.traj.mean_velocity_series.push(s.mean_velocity());
        if self.keep_snapshots {
            self.traj
                .snapshots
                .get_or_insert_with(Vec::new)
                .push(s.clone());
        }
    }
}

/// Integrates from `initial` to the configured horizon.
pub fn simulate(
    initial: &FlockState,
    kernel: &KernelSpec,
    controller: &ControllerSpec,
    config: &SimConfig,
) -> Result<Trajectory> {
    config.validate()?;
    kernel.validate()?;
    controller.validate(initial.agents(), initial.dim())?;

    let (steps, last_dt) = config.schedule();
    let threshold = config.consensus_threshold;
    let mut rec = Recorder {
        traj: Trajectory {
            times: Vec::new(),
            x_series: Vec::new(),
            v_series: Vec::new(),
            mean_velocity_series: Vec::new(),
            snapshots: None,
            consensus: false,
            first_crossing_time: None,
            final_state: initial.clone(),
            steps,
        },
        keep_snapshots: config.record_snapshots,
    };
    rec.push(0.0, initial);
    let mut first_crossing = (initial.dispersion().v <= threshold).then_some(0.0);

    let mut state = initial.clone();
    for k in 0..steps {
        let t = k as f64 * config.dt;
        let h = if k + 1 == steps { last_dt } else { config.dt };
        let next = rk4_unchecked(&state, kernel, controller, t, h);
        if !next.all_finite() {
            return Err(Error::Blowup {
                step: k + 1,
                time: t + h,
            });
        }
        state = next;
        let t_next = if k + 1 == steps {
            config.horizon
        } else {
            (k + 1) as f64 * config.dt
        };
        if first_crossing.is_none() && algebra::spread(state.velocities(), state.dim()) <= threshold
        {
            first_crossing = Some(t_next);
        }
        if (k + 1) % config.record_stride == 0 || k + 1 == steps {
            rec.push(t_next, &state);
        }
    }

    let mut traj = rec.traj;
    traj.consensus = traj.final_v() <= threshold;
    traj.first_crossing_time = first_crossing;
    traj.final_state = state;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta1() -> KernelSpec {
        KernelSpec::power_law(1.0).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let coincident = FlockState::new(2, 1, vec![0.0, 0.0], vec![1.0, -1.0]).unwrap();
        let d = rhs(&coincident, &delta1(), &ControllerSpec::None, 0.0);
        assert_eq!(d.dv, vec![-1.0, 1.0]);
        assert_eq!(d.dx, vec![1.0, -1.0]);

        let apart = FlockState::new(2, 1, vec![0.0, 2.0], vec![1.0, -1.0]).unwrap();
        let d = rhs(&apart, &delta1(), &ControllerSpec::None, 0.0);
        assert!((d.dv[0] + 0.2).abs() < 1e-15);

        let cons = FlockState::new(
            3,
            2,
            vec![0.0, 1.0, 2.0, 3.0, -1.0, 4.0],
            [0.5, -0.5].repeat(3),
        )
        .unwrap();
        let d = rhs(&cons, &delta1(), &ControllerSpec::None, 0.0);
        assert!(d.dv.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rk4_fixed_point_and_free_flight() {
        let still = FlockState::new(2, 2, vec![0.0, 1.0, 3.0, -2.0], vec![0.0; 4]).unwrap();
        let next = rk4_step(&still, &delta1(), &ControllerSpec::None, 0.0, 0.1).unwrap();
        assert_eq!(next, still);

        let w = [0.3, -1.25];
        let moving = FlockState::new(2, 2, vec![0.0, 1.0, 3.0, -2.0], w.repeat(2)).unwrap();
        let next = rk4_step(
            &moving,
            &delta1(),
            &ControllerSpec::Uniform { gamma: 2.0 },
            0.0,
            0.1,
        )
        .unwrap();
        for i in 0..2 {
            for k in 0..2 {
                let expect = moving.position(i)[k] + 0.1 * w[k];
                assert!((next.position(i)[k] - expect).abs() < 1e-15);
            }
        }
        assert_eq!(next.velocities(), moving.velocities());
    }

    #[test]
    fn rk4_linear_decay_matches_taylor_polynomial() {
        // Two coincident agents with delta = 0: relative velocity w obeys
        // dw/dt = -w. Uniform control with gamma = 0 leaves this untouched.
        let s = FlockState::new(2, 1, vec![0.0, 0.0], vec![0.5, -0.5]).unwrap();
        let next = rk4_step(
            &s,
            &KernelSpec::power_law(0.0).unwrap(),
            &ControllerSpec::None,
            0.0,
            0.1,
        )
        .unwrap();
        let rel = next.velocity(0)[0] - next.velocity(1)[0];
        let h: f64 = 0.1;
        let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((rel - taylor).abs() < 1e-15);
        assert!((rel - 0.9048375).abs() < 1e-7);
    }

    #[test]
    fn rk4_rejects_bad_step() {
        let s = FlockState::new(1, 1, vec![0.0], vec![1.0]).unwrap();
        assert!(rk4_step(&s, &delta1(), &ControllerSpec::None, 0.0, 0.0).is_err());
        assert!(rk4_step(&s, &delta1(), &ControllerSpec::None, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn blowup_reports_step() {
        // A huge rate makes explicit RK4 unstable quickly.
        let s = FlockState::new(2, 1, vec![0.0, 0.0], vec![1.0, -1.0]).unwrap();
        let cfg = SimConfig {
            dt: 1.0,
            horizon: 1000.0,
            ..SimConfig::default()
        };
        let err =
            simulate(&s, &delta1(), &ControllerSpec::Uniform { gamma: 1e3 }, &cfg).unwrap_err();
        assert!(matches!(err, Error::Blowup { step, .. } if step > 0));
    }

    #[test]
    fn schedule_handles_uneven_horizon() {
        let cfg = SimConfig {
            dt: 0.3,
            horizon: 1.0,
            ..SimConfig::default()
        };
        let (n, last) = cfg.schedule();
        assert_eq!(n, 4);
        assert!((last - 0.1).abs() < 1e-12);
        let cfg = SimConfig {
            dt: 0.01,
            horizon: 20.0,
            ..SimConfig::default()
        };
        assert_eq!(cfg.schedule(), (2000, 0.01));
    }

    #[test]
    fn simulate_records_and_verdict() {
        let s = FlockState::new(3, 1, vec![0.0, 1.0, 2.0], vec![1.0, 0.0, -1.0]).unwrap();
        let cfg = SimConfig {
            dt: 0.01,
            horizon: 10.0,
            record_stride: 100,
            record_snapshots: true,
            ..SimConfig::default()
        };
        let tr = simulate(&s, &delta1(), &ControllerSpec::Uniform { gamma: 1.0 }, &cfg).unwrap();
        assert_eq!(tr.times.len(), 11);
        assert_eq!(tr.snapshots.as_ref().unwrap().len(), 11);
        assert_eq!(*tr.times.last().unwrap(), 10.0);
        assert!(tr.consensus);
        let tc = tr.first_crossing_time.unwrap();
        assert!(tc > 0.0 && tc < 10.0);
    }

    #[test]
    fn config_validation() {
        let bad = [
            SimConfig {
                dt: 0.0,
                ..SimConfig::default()
            },
            SimConfig {
                dt: 30.0,
                ..SimConfig::default()
            },
            SimConfig {
                record_stride: 0,
                ..SimConfig::default()
            },
            SimConfig {
                consensus_threshold: 0.0,
                ..SimConfig::default()
            },
            SimConfig {
                horizon: f64::INFINITY,
                ..SimConfig::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
