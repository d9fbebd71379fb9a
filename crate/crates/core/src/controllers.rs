//! Feedback laws `u_i` acting on the velocity equation, and the diagnostic
//! quantities of the symmetric-weight decay estimate.
//!
//! Every controller can also be written in the perturbed form
//! `u_i = alpha (vbar - v_i) + beta * Delta_i`; [`ControllerSpec::perturbed_form`]
//! returns that decomposition, which the decay monitor consumes.

use serde::{Deserialize, Serialize};

use crate::algebra::{self, WeightMatrix};
use crate::error::{invalid, Error, Result};
use crate::state::FlockState;

/// How the radius-limited controller normalizes the neighbor sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each agent divides by its own neighbor count (true local mean).
    Exact,
    /// Common normalizer `eta_R = max_i #Lambda_R(i)`; keeps weights symmetric.
    #[default]
    MaxEta,
}

/// Deviation rules for [`ControllerSpec::GeneralPerturbed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaRule {
    /// Every agent carries the same deviation vector.
    Constant { vector: Vec<f64> },
    /// `Delta_i = eps_i * v_i_perp`. A single entry is broadcast to all agents.
    ScaledOwnDeviation { eps: Vec<f64> },
    /// Prescribed time series, linearly interpolated and held constant outside
    /// the sampled range. Each row of `values` is a flat `N x d` array.
    Tabulated {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl DeltaRule {
    fn validate(&self, n: usize, dim: usize) -> Result<()> {
        match self {
            Self::Constant { vector } => {
                if vector.len() != dim {
                    return Err(Error::Shape(format!(
                        "constant deviation has {} components, state dimension is {dim}",
                        vector.len()
                    )));
                }
                if vector.iter().any(|x| !x.is_finite()) {
                    return Err(invalid("delta.vector", "entries must be finite"));
                }
            }
            Self::ScaledOwnDeviation { eps } => {
                if eps.len() != 1 && eps.len() != n {
                    return Err(Error::Shape(format!(
                        "eps must have 1 or {n} entries, got {}",
                        eps.len()
                    )));
                }
                if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
                    return Err(invalid("delta.eps", "entries must be finite and >= 0"));
                }
            }
            Self::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(invalid(
                        "delta.times",
                        "need equally many (>= 1) times and value rows",
                    ));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !t.is_finite()) {
                    return Err(invalid(
                        "delta.times",
                        "must be finite and strictly increasing",
                    ));
                }
                if let Some(row) = values.iter().find(|r| r.len() != n * dim) {
                    return Err(Error::Shape(format!(
                        "tabulated deviation rows need {} entries, got {}",
                        n * dim,
                        row.len()
                    )));
                }
                if values.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(invalid("delta.values", "entries must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Deviation vectors at time `t`.
    pub fn evaluate(&self, state: &FlockState, t: f64) -> Vec<f64> {
        let (n, dim) = (state.agents(), state.dim());
        match self {
            Self::Constant { vector } => vector.iter().copied().cycle().take(n * dim).collect(),
            Self::ScaledOwnDeviation { eps } => {
                let mut dev = algebra::deviations(state.velocities(), dim);
                for (i, row) in dev.chunks_exact_mut(dim).enumerate() {
                    let e = if eps.len() == 1 { eps[0] } else { eps[i] };
                    row.iter_mut().for_each(|x| *x *= e);
                }
                dev
            }
            Self::Tabulated { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return values[0].clone();
                }
                if t >= times[last] {
                    return values[last].clone();
                }
                let hi = times.partition_point(|&s| s <= t);
                let lo = hi - 1;
                let w = (t - times[lo]) / (times[hi] - times[lo]);
                values[lo]
                    .iter()
                    .zip(&values[hi])
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }
}

/// Selects one feedback law and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    #[default]
    None,
    /// `u_i = gamma (vbar - v_i)` using the true global mean.
    Uniform { gamma: f64 },
    /// Local mean blends the agent's own velocity with the leader's:
    /// `vbar_i = (1 - q) v_i + q v_leader`, `u_i = gamma (vbar_i - v_i)`.
    Leader {
        gamma: f64,
        q: f64,
        leader_index: usize,
    },
    /// `u_i = alpha (vbar - v_i) + beta sum_j w_ij v_j_perp` with
    /// `w_ij = phi(r_ij) / eta`, `phi(r) = (1 + r^2)^(-epsilon)`.
    WeightedPerturbation { alpha: f64, beta: f64, epsilon: f64 },
    /// Feedback from agents inside the closed ball of radius `radius`.
    LocalRadius {
        gamma: f64,
        radius: f64,
        #[serde(default)]
        normalization: Normalization,
    },
    /// `u_i = alpha (vbar - v_i) + beta Delta_i` with a prescribed deviation.
    GeneralPerturbed {
        alpha: f64,
        beta: f64,
        delta: DeltaRule,
    },
}

fn check_rate(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {x}")))
    }
}

/// Decomposition `u_i = alpha (vbar - v_i) + beta Delta_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedForm {
    pub alpha: f64,
    pub beta: f64,
    pub delta: Vec<f64>,
}

impl ControllerSpec {
    /// Checks parameter ranges against an `n`-agent, `dim`-dimensional flock.
    pub fn validate(&self, n: usize, dim: usize) -> Result<()> {
        match self {
            Self::None => Ok(()),
            Self::Uniform { gamma } => check_rate("gamma", *gamma),
            Self::Leader {
                gamma,
                q,
                leader_index,
            } => {
                check_rate("gamma", *gamma)?;
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(invalid("q", format!("must lie in (0, 1], got {q}")));
                }
                if *leader_index >= n {
                    return Err(invalid(
                        "leader_index",
                        format!("{leader_index} out of range for {n} agents"),
                    ));
                }
                Ok(())
            }
            Self::WeightedPerturbation {
                alpha,
                beta,
                epsilon,
            } => {
                check_rate("alpha", *alpha)?;
                check_rate("beta", *beta)?;
                check_rate("epsilon", *epsilon)
            }
            Self::LocalRadius { gamma, radius, .. } => {
                check_rate("gamma", *gamma)?;
                if radius.is_nan() || *radius < 0.0 {
                    return Err(invalid("radius", format!("must be >= 0, got {radius}")));
                }
                Ok(())
            }
            Self::GeneralPerturbed { alpha, beta, delta } => {
                check_rate("alpha", *alpha)?;
                check_rate("beta", *beta)?;
                delta.validate(n, dim)
            }
        }
    }

    /// Control vectors at time `t`. The controller must have been validated for
    /// this state's shape.
    pub fn control(&self, state: &FlockState, t: f64) -> Vec<f64> {
        let sq = pair_sq_distances(state);
        self.control_with_distances(state, t, &sq)
    }

    /// Same as [`Self::control`] with precomputed squared distances
    /// (row-major `N x N`).
    pub(crate) fn control_with_distances(
        &self,
        state: &FlockState,
        t: f64,
        sq: &[f64],
    ) -> Vec<f64> {
        match self {
            Self::None => vec![0.0; state.positions().len()],
            Self::Uniform { gamma } => control_uniform(state, *gamma),
            Self::Leader {
                gamma,
                q,
                leader_index,
            } => leader_unchecked(state, *gamma, *q, *leader_index),
            Self::WeightedPerturbation {
                alpha,
                beta,
                epsilon,
            } => {
                let w = phi_weights_from_sq(state.agents(), *epsilon, sq);
                weighted_unchecked(state, *alpha, *beta, &w)
            }
            Self::LocalRadius {
                gamma,
                radius,
                normalization,
            } => local_from_sq(state, *gamma, *radius, *normalization, sq),
            Self::GeneralPerturbed { alpha, beta, delta } => {
                let mut u = control_uniform(state, *alpha);
                let dev = delta.evaluate(state, t);
                for (ui, di) in u.iter_mut().zip(&dev) {
                    *ui += beta * di;
                }
                u
            }
        }
    }

    /// The `(alpha, beta, Delta)` decomposition of this controller at `(state, t)`.
    pub fn perturbed_form(&self, state: &FlockState, t: f64) -> PerturbedForm {
        let (n, dim) = (state.agents(), state.dim());
        let zeros = || vec![0.0; n * dim];
        match self {
            Self::None => PerturbedForm {
                alpha: 0.0,
                beta: 0.0,
                delta: zeros(),
            },
            Self::Uniform { gamma } => PerturbedForm {
                alpha: *gamma,
                beta: 0.0,
                delta: zeros(),
            },
            Self::Leader {
                gamma,
                q,
                leader_index,
            } => {
                // Delta_i = (1 - q) v_i_perp + q v_leader_perp
                let dev = algebra::deviations(state.velocities(), dim);
                let lead = dev[leader_index * dim..(leader_index + 1) * dim].to_vec();
                let mut delta = dev;
                for row in delta.chunks_exact_mut(dim) {
                    for (x, l) in row.iter_mut().zip(&lead) {
                        *x = (1.0 - q) * *x + q * l;
                    }
                }
                PerturbedForm {
                    alpha: *gamma,
                    beta: *gamma,
                    delta,
                }
            }
            Self::WeightedPerturbation {
                alpha,
                beta,
                epsilon,
            } => {
                let w = build_weights_phi(state, *epsilon);
                PerturbedForm {
                    alpha: *alpha,
                    beta: *beta,
                    delta: weighted_deviation_sum(state, &w),
                }
            }
            Self::LocalRadius { gamma, .. } => {
                if *gamma == 0.0 {
                    return PerturbedForm {
                        alpha: 0.0,
                        beta: 0.0,
                        delta: zeros(),
                    };
                }
                // Delta_i = u_i / gamma - (vbar - v_i)
                let u = self.control(state, 0.0);
                let vbar = state.mean_velocity();
                let mut delta = u;
                for (i, row) in delta.chunks_exact_mut(dim).enumerate() {
                    let vi = state.velocity(i);
                    for k in 0..dim {
                        row[k] = row[k] / gamma - (vbar[k] - vi[k]);
                    }
                }
                PerturbedForm {
                    alpha: *gamma,
                    beta: *gamma,
                    delta,
                }
            }
            Self::GeneralPerturbed { alpha, beta, delta } => PerturbedForm {
                alpha: *alpha,
                beta: *beta,
                delta: delta.evaluate(state, t),
            },
        }
    }
}

/// Row-major `N x N` matrix of squared pairwise distances.
pub(crate) fn pair_sq_distances(state: &FlockState) -> Vec<f64> {
    let n = state.agents();
    let mut sq = vec![0.0; n * n];
    for i in 0..n {
        let xi = state.position(i);
        for j in i + 1..n {
            let d = algebra::sq_dist(xi, state.position(j));
            sq[i * n + j] = d;
            sq[j * n + i] = d;
        }
    }
    sq
}

/// `u_i = gamma (vbar - v_i)`.
pub fn control_uniform(state: &FlockState, gamma: f64) -> Vec<f64> {
    let dim = state.dim();
    let vbar = state.mean_velocity();
    let mut u = state.velocities().to_vec();
    for row in u.chunks_exact_mut(dim) {
        for (x, m) in row.iter_mut().zip(&vbar) {
            *x = gamma * (m - *x);
        }
    }
    u
}

/// Leader feedback `u_i = gamma q (v_leader - v_i)`; the leader itself gets
/// zero control.
pub fn control_leader(state: &FlockState, gamma: f64, q: f64, leader: usize) -> Result<Vec<f64>> {
    ControllerSpec::Leader {
        gamma,
        q,
        leader_index: leader,
    }
    .validate(state.agents(), state.dim())?;
    Ok(leader_unchecked(state, gamma, q, leader))
}

fn leader_unchecked(state: &FlockState, gamma: f64, q: f64, leader: usize) -> Vec<f64> {
    let dim = state.dim();
    let lead = state.velocity(leader).to_vec();
    let gain = gamma * q;
    let mut u = state.velocities().to_vec();
    for row in u.chunks_exact_mut(dim) {
        for (x, l) in row.iter_mut().zip(&lead) {
            *x = gain * (l - *x);
        }
    }
    u
}

/// Symmetric weights `w_ij = phi(r_ij) / eta`, `phi(r) = (1 + r^2)^(-epsilon)`,
/// `eta = max_i sum_j phi(r_ij)`. The largest row sum is one.
pub fn build_weights_phi(state: &FlockState, epsilon: f64) -> WeightMatrix {
    phi_weights_from_sq(state.agents(), epsilon, &pair_sq_distances(state))
}

fn phi(epsilon: f64, r2: f64) -> f64 {
    if epsilon == 0.0 {
        1.0
    } else if epsilon == 1.0 {
        1.0 / (1.0 + r2)
    } else {
        (1.0 + r2).powf(-epsilon)
    }
}

/// Unnormalized `phi(r_ij)` matrix.
pub fn phi_matrix(state: &FlockState, epsilon: f64) -> WeightMatrix {
    let n = state.agents();
    let sq = pair_sq_distances(state);
    raw_phi_from_sq(n, epsilon, &sq)
}

fn raw_phi_from_sq(n: usize, epsilon: f64, sq: &[f64]) -> WeightMatrix {
    let mut raw = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let p = phi(epsilon, sq[i * n + j]);
            raw[i][j] = p;
            raw[j][i] = p;
        }
    }
    WeightMatrix::from_rows(&raw).expect("square by construction")
}

fn phi_weights_from_sq(n: usize, epsilon: f64, sq: &[f64]) -> WeightMatrix {
    let raw = raw_phi_from_sq(n, epsilon, sq);
    let eta = raw.max_row_sum();
    WeightMatrix::from_fn(n, |i, j| raw.get(i, j) / eta)
}

/// `sum_j w_ij v_j_perp` for every agent.
fn weighted_deviation_sum(state: &FlockState, weights: &WeightMatrix) -> Vec<f64> {
    let (n, dim) = (state.agents(), state.dim());
    let dev = algebra::deviations(state.velocities(), dim);
    let mut out = vec![0.0; n * dim];
    for i in 0..n {
        let row = weights.row(i);
        let oi = &mut out[i * dim..(i + 1) * dim];
        for (j, w) in row.iter().enumerate() {
            for (o, d) in oi.iter_mut().zip(&dev[j * dim..(j + 1) * dim]) {
                *o += w * d;
            }
        }
    }
    out
}

/// `u_i = alpha (vbar - v_i) + beta sum_j w_ij v_j_perp`.
pub fn control_weighted(
    state: &FlockState,
    alpha: f64,
    beta: f64,
    weights: &WeightMatrix,
) -> Result<Vec<f64>> {
    if weights.size() != state.agents() {
        return Err(Error::Shape(format!(
            "weights are {0} x {0}, flock has {1} agents",
            weights.size(),
            state.agents()
        )));
    }
    Ok(weighted_unchecked(state, alpha, beta, weights))
}

fn weighted_unchecked(
    state: &FlockState,
    alpha: f64,
    beta: f64,
    weights: &WeightMatrix,
) -> Vec<f64> {
    let mut u = control_uniform(state, alpha);
    if beta != 0.0 {
        for (ui, di) in u.iter_mut().zip(weighted_deviation_sum(state, weights)) {
            *ui += beta * di;
        }
    }
    u
}

/// Mean velocity over the closed ball `{j : r_ij <= radius}` of each agent.
pub fn local_mean(state: &FlockState, radius: f64) -> Vec<f64> {
    let sq = pair_sq_distances(state);
    local_mean_from_sq(state, radius, &sq)
}

fn local_mean_from_sq(state: &FlockState, radius: f64, sq: &[f64]) -> Vec<f64> {
    let (n, dim) = (state.agents(), state.dim());
    let r2 = radius * radius;
    let mut out = vec![0.0; n * dim];
    for i in 0..n {
        let mut count = 0usize;
        let oi = &mut out[i * dim..(i + 1) * dim];
        for j in 0..n {
            if sq[i * n + j] <= r2 {
                count += 1;
                for (o, v) in oi.iter_mut().zip(state.velocity(j)) {
                    *o += v;
                }
            }
        }
        let inv = 1.0 / count as f64;
        oi.iter_mut().for_each(|o| *o *= inv);
    }
    out
}

/// Radius-limited feedback. `Exact`: `gamma (local_mean_i - v_i)`.
/// `MaxEta`: `(gamma / eta_R) sum_j chi(r_ij <= R) (v_j - v_i)` with
/// `eta_R = max_i #Lambda_R(i)`.
pub fn control_local(state: &FlockState, gamma: f64, radius: f64, mode: Normalization) -> Vec<f64> {
    let sq = pair_sq_distances(state);
    local_from_sq(state, gamma, radius, mode, &sq)
}

fn local_from_sq(
    state: &FlockState,
    gamma: f64,
    radius: f64,
    mode: Normalization,
    sq: &[f64],
) -> Vec<f64> {
    let (n, dim) = (state.agents(), state.dim());
    match mode {
        Normalization::Exact => {
            let mut u = local_mean_from_sq(state, radius, sq);
            for (ui, vi) in u.iter_mut().zip(state.velocities()) {
                *ui = gamma * (*ui - vi);
            }
            u
        }
        Normalization::MaxEta => {
            let r2 = radius * radius;
            let mut u = vec![0.0; n * dim];
            let mut eta = 0usize;
            for i in 0..n {
                let vi = state.velocity(i);
                let mut count = 0usize;
                let ui = &mut u[i * dim..(i + 1) * dim];
                for j in 0..n {
                    if sq[i * n + j] <= r2 {
                        count += 1;
                        for ((o, vj), v) in ui.iter_mut().zip(state.velocity(j)).zip(vi) {
                            *o += vj - v;
                        }
                    }
                }
                eta = eta.max(count);
            }
            let scale = gamma / eta as f64;
            u.iter_mut().for_each(|x| *x *= scale);
            u
        }
    }
}

/// `eta_R = max_i #{j : r_ij <= R}`.
pub fn eta_radius(state: &FlockState, radius: f64) -> usize {
    let n = state.agents();
    let sq = pair_sq_distances(state);
    let r2 = radius * radius;
    (0..n)
        .map(|i| (0..n).filter(|&j| sq[i * n + j] <= r2).count())
        .max()
        .unwrap_or(0)
}

/// Quantities of the symmetric-weight decay estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    /// Smallest entry of the weight matrix.
    pub min_weight: f64,
    /// Largest row sum.
    pub max_row_sum: f64,
    /// `S - N I - alpha / beta`; negative certifies exponential decay of `V`.
    pub decay_bound: Option<f64>,
}

impl WeightDiagnostics {
    /// `I` and `S` only.
    pub fn of(weights: &WeightMatrix) -> Self {
        Self {
            min_weight: weights.min_entry(),
            max_row_sum: weights.max_row_sum(),
            decay_bound: None,
        }
    }
}

/// `I`, `S` and the decay bound `S - N I - alpha / beta`.
pub fn weight_diagnostics(
    weights: &WeightMatrix,
    alpha: f64,
    beta: f64,
) -> Result<WeightDiagnostics> {
    if beta == 0.0 {
        return Err(Error::Domain(
            "decay bound needs beta > 0 (alpha / beta undefined)".into(),
        ));
    }
    let mut d = WeightDiagnostics::of(weights);
    let n = weights.size() as f64;
    d.decay_bound = Some(d.max_row_sum - n * d.min_weight - alpha / beta);
    Ok(d)
}

/// Diagnostics of the `phi`-weighted controller in both normalizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiDiagnostics {
    /// Common normalizer `eta = max_i sum_j phi(r_ij)`.
    pub eta: f64,
    /// Diagnostics of the normalized matrix `phi / eta`.
    pub normalized: WeightDiagnostics,
    /// `I`, `S` of the raw `phi` matrix; `decay_bound` holds
    /// `S_raw - N I_raw - (alpha / beta) eta`, which equals `eta` times the
    /// normalized bound.
    pub raw: WeightDiagnostics,
}

pub fn phi_diagnostics(
    state: &FlockState,
    epsilon: f64,
    alpha: f64,
    beta: f64,
) -> Result<PhiDiagnostics> {
    let raw_m = phi_matrix(state, epsilon);
    let eta = raw_m.max_row_sum();
    let norm_m = WeightMatrix::from_fn(raw_m.size(), |i, j| raw_m.get(i, j) / eta);
    let normalized = weight_diagnostics(&norm_m, alpha, beta)?;
    let mut raw = WeightDiagnostics::of(&raw_m);
    raw.decay_bound =
        Some(raw.max_row_sum - state.agents() as f64 * raw.min_weight - alpha / beta * eta);
    Ok(PhiDiagnostics {
        eta,
        normalized,
        raw,
    })
}
