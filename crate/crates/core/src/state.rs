use serde::{Deserialize, Serialize};

use crate::algebra;
use crate::error::{Error, Result};

/// Positions and velocities of `N` agents in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockState {
    n: usize,
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
}

impl FlockState {
    pub fn new(n: usize, dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::Shape(format!(
                "need N >= 1 and d >= 1, got N={n}, d={dim}"
            )));
        }
        for (what, data) in [("positions", &positions), ("velocities", &velocities)] {
            if data.len() != n * dim {
                return Err(Error::Shape(format!(
                    "{what}: expected {n} x {dim} = {} entries, got {}",
                    n * dim,
                    data.len()
                )));
            }
            if let Some(k) = data.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    what,
                    agent: k / dim,
                });
            }
        }
        Ok(Self {
            n,
            dim,
            positions,
            velocities,
        })
    }

    /// Builds a state from per-agent rows.
    pub fn from_rows(positions: &[Vec<f64>], velocities: &[Vec<f64>]) -> Result<Self> {
        let n = positions.len();
        let dim = positions.first().map_or(0, Vec::len);
        if velocities.len() != n || positions.iter().chain(velocities).any(|r| r.len() != dim) {
            return Err(Error::Shape(
                "position and velocity rows must share one shape".into(),
            ));
        }
        Self::new(n, dim, positions.concat(), velocities.concat())
    }

    /// Constructor for internal use where the caller already guarantees shape.
    /// Finiteness is not re-checked.
    pub(crate) fn from_parts_unchecked(
        n: usize,
        dim: usize,
        positions: Vec<f64>,
        velocities: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(positions.len(), n * dim);
        debug_assert_eq!(velocities.len(), n * dim);
        Self {
            n,
            dim,
            positions,
            velocities,
        }
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean_velocity(&self) -> Vec<f64> {
        algebra::mean(&self.velocities, self.dim)
    }

    pub fn mean_position(&self) -> Vec<f64> {
        algebra::mean(&self.positions, self.dim)
    }

    /// Euclidean distance between agents `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        algebra::sq_dist(self.position(i), self.position(j)).sqrt()
    }

    /// Largest pairwise distance (the flock diameter).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                best = best.max(algebra::sq_dist(self.position(i), self.position(j)));
            }
        }
        best.sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.positions
            .iter()
            .chain(&self.velocities)
            .all(|x| x.is_finite())
    }

    /// Dispersion functionals via the deviation form.
    pub fn dispersion(&self) -> DispersionPair {
        DispersionPair {
            x: algebra::spread(&self.positions, self.dim),
            v: algebra::spread(&self.velocities, self.dim),
        }
    }

    /// Dispersion functionals via the pairwise double sum. O(N^2 d); kept as a
    /// reference for the deviation form.
    pub fn dispersion_pairwise(&self) -> DispersionPair {
        DispersionPair {
            x: algebra::spread_pairwise(&self.positions, self.dim),
            v: algebra::spread_pairwise(&self.velocities, self.dim),
        }
    }
}

/// Position spread `X` and velocity spread `V` of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPair {
    pub x: f64,
    pub v: f64,
}

/// Convenience wrapper matching [`FlockState::dispersion`].
pub fn dispersion(state: &FlockState) -> DispersionPair {
    state.dispersion()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_agents_unit_spread() {
        let s = FlockState::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]], &vec![vec![0.0, 0.0]; 2])
            .unwrap();
        let d = s.dispersion();
        assert_eq!(d.x, 1.0);
        assert_eq!(d.v, 0.0);
        assert_eq!(s.dispersion_pairwise().x, 1.0);
    }

    #[test]
    fn coincident_agents_have_zero_dispersion() {
        let s =
            FlockState::from_rows(&vec![vec![1.5, -2.0]; 4], &vec![vec![0.25, 3.0]; 4]).unwrap();
        let d = s.dispersion();
        assert_eq!(d.x, 0.0);
        assert_eq!(d.v, 0.0);
    }

    #[test]
    fn three_agents_forms_agree() {
        // hand-computed: x = 0,1,5 -> mean 2, deviations -2,-1,3 -> X = 14/3
        let s = FlockState::from_rows(
            &[vec![0.0], vec![1.0], vec![5.0]],
            &[vec![0.0], vec![3.0], vec![9.0]],
        )
        .unwrap();
        let a = s.dispersion();
        let b = s.dispersion_pairwise();
        assert!((a.x - 14.0 / 3.0).abs() < 1e-14);
        assert!((b.x - 14.0 / 3.0).abs() < 1e-14);
        assert!((a.v - b.v).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(matches!(
            FlockState::new(2, 2, vec![0.0; 4], vec![0.0; 3]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            FlockState::new(0, 2, vec![], vec![]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            FlockState::new(2, 1, vec![0.0, f64::NAN], vec![0.0; 2]),
            Err(Error::NonFinite {
                what: "positions",
                agent: 1
            })
        ));
        assert!(matches!(
            FlockState::new(2, 1, vec![0.0; 2], vec![f64::INFINITY, 0.0]),
            Err(Error::NonFinite {
                what: "velocities",
                agent: 0
            })
        ));
    }

    #[test]
    fn diameter_of_line() {
        let s =
            FlockState::from_rows(&[vec![0.0], vec![1.0], vec![5.0]], &vec![vec![0.0]; 3]).unwrap();
        assert_eq!(s.diameter(), 5.0);
    }
}
