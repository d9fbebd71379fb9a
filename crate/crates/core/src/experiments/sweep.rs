//! Monte-Carlo consensus probabilities over an `(X0, V0)` grid.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ic::sample_ic;
use crate::certificates::{extended_certificate, CertificateFamily, CertificateQuery};
use crate::controllers::{ControllerSpec, Normalization};
use crate::error::{invalid, Error, Result};
use crate::integrator::{simulate, SimConfig};
use crate::kernel::KernelSpec;

fn default_samples() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub dim: usize,
    pub x_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples_per_cell: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub controller: ControllerSpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub sim: SimConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("N", format!("sweeps need N >= 2, got {}", self.n)));
        }
        if self.dim == 0 {
            return Err(invalid("d", "must be >= 1"));
        }
        for (name, g) in [("X_grid", &self.x_grid), ("V_grid", &self.v_grid)] {
            if g.is_empty() {
                return Err(invalid(name, "must be non-empty"));
            }
            if g.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(invalid(name, "entries must be finite and > 0"));
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(name, "must be strictly increasing"));
            }
        }
        if self.samples_per_cell == 0 {
            return Err(invalid("samples_per_cell", "must be >= 1"));
        }
        self.kernel.validate()?;
        self.controller.validate(self.n, self.dim)?;
        self.sim.validate()
    }

    /// Certificate family matching the controller, with its gain and `eta`
    /// bound. `None` when no certificate applies to the controller.
    pub fn certificate(&self) -> Option<(CertificateFamily, f64, Option<f64>)> {
        match self.controller {
            ControllerSpec::None => Some((CertificateFamily::NoControl, 0.0, None)),
            // gamma (vbar - v_i) is the radius-limited law with R = inf, eta = N
            ControllerSpec::Uniform { gamma } => Some((
                CertificateFamily::ChiRadius {
                    radius: f64::INFINITY,
                },
                gamma,
                Some(self.n as f64),
            )),
            ControllerSpec::LocalRadius {
                gamma,
                radius,
                normalization: Normalization::MaxEta,
            } => Some((CertificateFamily::ChiRadius { radius }, gamma, None)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityGrid {
    pub x_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
    /// `probabilities[i][j]` at `(x_grid[i], v_grid[j])`.
    pub probabilities: Vec<Vec<f64>>,
    pub certified: Vec<Vec<bool>>,
}

impl ProbabilityGrid {
    pub fn mean_probability(&self) -> f64 {
        let total: f64 = self.probabilities.iter().flatten().sum();
        total / (self.x_grid.len() * self.v_grid.len()) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub x_index: usize,
    pub v_index: usize,
    pub x0: f64,
    pub v0: f64,
    pub simulations: usize,
    pub consensus: usize,
    pub blowups: usize,
    /// Seed actually used for each sample (after any resampling).
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub grid: ProbabilityGrid,
    pub cells: Vec<CellRecord>,
    pub simulations: usize,
    pub blowups: usize,
    pub resamples: u64,
}

struct SampleResult {
    seed: u64,
    attempts: u32,
    consensus: bool,
    blowup: bool,
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let (nx, nv, ns) = (
        config.x_grid.len(),
        config.v_grid.len(),
        config.samples_per_cell,
    );
    let sim = SimConfig {
        record_snapshots: false,
        ..config.sim
    };

    let results: Vec<SampleResult> = (0..nx * nv * ns)
        .into_par_iter()
        .map(|task| -> Result<SampleResult> {
            let (cell, s) = (task / ns, task % ns);
            let (i, j) = (cell / nv, cell % nv);
            let target = (config.x_grid[i], config.v_grid[j]);
            let (ic, seed, attempts) = sample_ic(config.n, config.dim, config.master_seed, (i, j), s, target)?;
            match simulate(&ic, &config.kernel, &config.controller, &sim) {
                Ok(tr) => Ok(SampleResult {
                    seed,
                    attempts,
                    consensus: tr.consensus,
                    blowup: false,
                }),
                Err(Error::Blowup { step, time }) => {
                    warn!("blowup at step {step} (t = {time}) in cell ({i}, {j}), sample {s}; counted as no consensus");
                    Ok(SampleResult {
                        seed,
                        attempts,
                        consensus: false,
                        blowup: true,
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let family = config.certificate();
    let mut probabilities = vec![vec![0.0; nv]; nx];
    let mut certified = vec![vec![false; nv]; nx];
    let mut cells = Vec::with_capacity(nx * nv);
    for (cell, chunk) in results.chunks(ns).enumerate() {
        let (i, j) = (cell / nv, cell % nv);
        let (x0, v0) = (config.x_grid[i], config.v_grid[j]);
        let consensus = chunk.iter().filter(|r| r.consensus).count();
        probabilities[i][j] = consensus as f64 / ns as f64;
        if let Some((family, gamma, eta_bound)) = family {
            let q = CertificateQuery {
                n: config.n,
                x0,
                v0,
                kernel: config.kernel.clone(),
                gamma,
                family,
                eta_bound,
            };
            certified[i][j] = extended_certificate(&q)?.holds();
        }
        cells.push(CellRecord {
            x_index: i,
            v_index: j,
            x0,
            v0,
            simulations: chunk.len(),
            consensus,
            blowups: chunk.iter().filter(|r| r.blowup).count(),
            seeds: chunk.iter().map(|r| r.seed).collect(),
        });
    }

    Ok(SweepOutcome {
        grid: ProbabilityGrid {
            x_grid: config.x_grid.clone(),
            v_grid: config.v_grid.clone(),
            probabilities,
            certified,
        },
        simulations: results.len(),
        blowups: results.iter().filter(|r| r.blowup).count(),
        resamples: results.iter().map(|r| r.attempts as u64).sum(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SweepConfig {
        SweepConfig {
            n: 3,
            dim: 2,
            x_grid: vec![0.5, 2.0],
            v_grid: vec![0.1, 1.0, 4.0],
            samples_per_cell: 4,
            master_seed: 11,
            controller: ControllerSpec::Uniform { gamma: 1.0 },
            kernel: KernelSpec::power_law(1.0).unwrap(),
            sim: SimConfig::default(),
        }
    }

    #[test]
    fn uniform_feedback_always_reaches_consensus() {
        let out = run_sweep(&base()).unwrap();
        assert!(out.grid.probabilities.iter().flatten().all(|&p| p == 1.0));
        assert!(out.grid.certified.iter().flatten().all(|&c| c));
        assert_eq!(out.simulations, 24);
        assert!(out
            .cells
            .iter()
            .all(|c| c.simulations == 4 && c.seeds.len() == 4));
    }

    #[test]
    fn deterministic() {
        let a = run_sweep(&base()).unwrap();
        let b = run_sweep(&base()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut c = base();
        c.x_grid = vec![1.0, 1.0];
        assert!(run_sweep(&c).is_err());
        let mut c = base();
        c.v_grid.clear();
        assert!(run_sweep(&c).is_err());
        let mut c = base();
        c.samples_per_cell = 0;
        assert!(run_sweep(&c).is_err());
    }

    #[test]
    fn uncertified_controller_marks_nothing() {
        let mut c = base();
        c.controller = ControllerSpec::Leader {
            gamma: 1.0,
            q: 1.0,
            leader_index: 0,
        };
        let out = run_sweep(&c).unwrap();
        assert!(out.grid.certified.iter().flatten().all(|&c| !c));
    }
}
