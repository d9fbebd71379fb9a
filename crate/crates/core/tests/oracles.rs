//! Numbers checked against independent computations: brute-force sums,
//! closed forms and conserved quantities.

use approx::assert_relative_eq;
use flockcert::certificates::kernel_tail_integral;
use flockcert::controllers::DeltaRule;
use flockcert::experiments::{generate_ic, rescale_ic, run_sweep, SweepConfig};
use flockcert::integrator::rk4_step;
use flockcert::monitor::decay_monitor;
use flockcert::{
    extended_certificate, hhk_certificate, simulate, CertificateFamily, CertificateQuery,
    ControllerSpec, FlockState, KernelSpec, SimConfig, Verdict,
};

/// Composite Simpson rule with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m)
        .map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + inner + f(b)) * h / 3.0
}

/// `int_lower^inf (1 + c^2 r^2)^-delta dr` after `r = 1/u`, which maps the
/// tail onto `[0, 1/lower]`; the integrand is smooth when `2 delta - 2` is a
/// non-negative integer.
fn brute_tail(delta: f64, c: f64, lower: f64) -> f64 {
    simpson(
        |u| u.powf(2.0 * delta - 2.0) / (u * u + c * c).powf(delta),
        0.0,
        1.0 / lower,
        20_000,
    )
}

fn delta1() -> KernelSpec {
    KernelSpec::power_law(1.0).unwrap()
}

#[test]
fn baseline_tail_matches_brute_force() {
    let tail = kernel_tail_integral(&delta1(), 1.0, 2).unwrap().value();
    assert_relative_eq!(tail, brute_tail(1.0, 2.0, 1.0), max_relative = 1e-10);
    assert!((tail - 0.231824).abs() < 5e-7);

    for (delta, n, x0) in [(1.5, 5, 0.3), (2.0, 20, 0.05), (2.5, 3, 4.0)] {
        let c = (2.0 * n as f64).sqrt();
        let lower = f64::sqrt(x0);
        let tail = kernel_tail_integral(&KernelSpec::power_law(delta).unwrap(), lower, n)
            .unwrap()
            .value();
        assert_relative_eq!(tail, brute_tail(delta, c, lower), max_relative = 1e-9);
    }
}

#[test]
fn certified_thresholds() {
    let base = hhk_certificate(2, 1.0, 0.0, &delta1()).unwrap();
    assert!((base.certified_v() - 0.053742).abs() < 1e-6);
    assert_eq!(
        hhk_certificate(2, 1.0, 1.0, &delta1()).unwrap().verdict,
        Verdict::Fails
    );

    let q = CertificateQuery {
        n: 2,
        x0: 1.0,
        v0: 1.0,
        kernel: delta1(),
        gamma: 1.0,
        family: CertificateFamily::ChiRadius { radius: 4.0 },
        eta_bound: Some(2.0),
    };
    let r = extended_certificate(&q).unwrap();
    let tail = brute_tail(1.0, 2.0, 1.0);
    assert_relative_eq!(r.lhs.unwrap(), tail + 1.0, max_relative = 1e-10);
    assert!((r.certified_v() - 1.517390).abs() < 1e-6);
    assert_eq!(r.verdict, Verdict::Holds);

    let weak = KernelSpec::power_law(0.4).unwrap();
    assert_eq!(
        hhk_certificate(5, 3.0, 100.0, &weak).unwrap().verdict,
        Verdict::Unconditional
    );
}

#[test]
fn rk4_one_step_is_taylor_quartic() {
    // delta = 0: a = 1, so two coincident agents have w' = -w for w = v1 - v2
    let k = KernelSpec::power_law(0.0).unwrap();
    let s = FlockState::new(2, 1, vec![0.0, 0.0], vec![0.5, -0.5]).unwrap();
    let next = rk4_step(&s, &k, &ControllerSpec::None, 0.0, 0.1).unwrap();
    let h: f64 = 0.1;
    let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
    let w = next.velocity(0)[0] - next.velocity(1)[0];
    assert_relative_eq!(w, taylor, max_relative = 1e-15);
    assert!((taylor - 0.9048375).abs() < 1e-7);
}

#[test]
fn mean_velocity_drift_equals_beta_mean_delta() {
    let s = generate_ic(8, 2, 21).unwrap();
    let delta = vec![0.3, -0.2];
    let beta = 0.5;
    let c = ControllerSpec::GeneralPerturbed {
        alpha: 1.0,
        beta,
        delta: DeltaRule::Constant {
            vector: delta.clone(),
        },
    };
    let cfg = SimConfig {
        horizon: 3.0,
        ..SimConfig::default()
    };
    let tr = simulate(&s, &delta1(), &c, &cfg).unwrap();
    let start = &tr.mean_velocity_series[0];
    let end = tr.mean_velocity_series.last().unwrap();
    for k in 0..2 {
        assert_relative_eq!(
            end[k] - start[k],
            beta * delta[k] * 3.0,
            max_relative = 1e-10
        );
    }
}

#[test]
fn uniform_decay_envelope_and_monotone_spread() {
    let s = generate_ic(10, 2, 31).unwrap();
    let tr = simulate(
        &s,
        &delta1(),
        &ControllerSpec::Uniform { gamma: 1.0 },
        &SimConfig::default(),
    )
    .unwrap();
    let v0 = tr.v_series[0];
    for (t, v) in tr.times.iter().zip(&tr.v_series) {
        assert!(*v <= v0 * (-2.0 * t).exp() * (1.0 + 1e-6));
    }
    assert!(tr.v_series.windows(2).all(|w| w[1] <= w[0]));
    assert!(tr.consensus);
}

#[test]
fn certified_initial_data_reaches_consensus() {
    // well inside the baseline region for N = 2
    let s = rescale_ic(&generate_ic(2, 2, 4).unwrap(), 1.0, 0.02).unwrap();
    assert!(hhk_certificate(2, 1.0, 0.02, &delta1()).unwrap().holds());
    let cfg = SimConfig {
        horizon: 400.0,
        dt: 0.05,
        record_stride: 100,
        ..SimConfig::default()
    };
    assert!(
        simulate(&s, &delta1(), &ControllerSpec::None, &cfg)
            .unwrap()
            .consensus
    );
}

#[test]
fn monitor_bounds_hold_along_runs() {
    let s = rescale_ic(&generate_ic(6, 2, 77).unwrap(), 1.0, 1.0).unwrap();
    let cfg = SimConfig {
        horizon: 3.0,
        record_stride: 1,
        record_snapshots: true,
        ..SimConfig::default()
    };
    let c = ControllerSpec::Uniform { gamma: 1.0 };
    let tr = simulate(&s, &delta1(), &c, &cfg).unwrap();
    let rep = decay_monitor(&tr, &delta1(), &c).unwrap();
    assert!(rep.worst_excess() <= 1e-9, "{}", rep.worst_excess());

    let w = ControllerSpec::WeightedPerturbation {
        alpha: 2.0,
        beta: 1.0,
        epsilon: 0.5,
    };
    let tr = simulate(&s, &delta1(), &w, &cfg).unwrap();
    let rep = decay_monitor(&tr, &delta1(), &w).unwrap();
    for p in &rep.points {
        assert!(p.dv_dt_fd <= p.weighted_bound.unwrap() + p.fd_slack + 1e-9);
    }
}

#[test]
fn sweep_at_certified_point_without_control() {
    let cfg = SweepConfig {
        n: 2,
        dim: 2,
        x_grid: vec![1.0],
        v_grid: vec![0.02],
        samples_per_cell: 20,
        master_seed: 3,
        controller: ControllerSpec::None,
        kernel: delta1(),
        sim: SimConfig {
            horizon: 400.0,
            dt: 0.05,
            ..SimConfig::default()
        },
    };
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.grid.certified, vec![vec![true]]);
    assert_eq!(out.grid.probabilities, vec![vec![1.0]]);
    assert_eq!(out.cells[0].simulations, 20);
}

#[test]
fn sweep_is_order_independent() {
    let cfg = SweepConfig {
        n: 4,
        dim: 2,
        x_grid: vec![0.5, 1.0, 3.0],
        v_grid: vec![0.1, 2.0],
        samples_per_cell: 5,
        master_seed: 99,
        controller: ControllerSpec::None,
        kernel: delta1(),
        sim: SimConfig {
            horizon: 5.0,
            ..SimConfig::default()
        },
    };
    let reference = run_sweep(&cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let threaded = pool.install(|| run_sweep(&cfg)).unwrap();
    assert_eq!(reference, threaded);
}
