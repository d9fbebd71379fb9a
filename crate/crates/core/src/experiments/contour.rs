//! Marching-squares level curves of a probability field on a rectilinear
//! `(X, V)` grid.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ProbabilityGrid;

/// Ordered vertices `(X, V)` of one level curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    /// Between nodes (i, j) and (i + 1, j).
    H(usize, usize),
    /// Between nodes (i, j) and (i, j + 1).
    V(usize, usize),
}

/// Level curves at `level`. A constant field yields no curves.
pub fn contour_extract(grid: &ProbabilityGrid, level: f64) -> Vec<Polyline> {
    let xs = &grid.x_grid;
    let vs = &grid.v_grid;
    let p = &grid.probabilities;
    let (nx, nv) = (xs.len(), vs.len());
    if nx < 2 || nv < 2 {
        return Vec::new();
    }
    let above = |i: usize, j: usize| p[i][j] >= level;

    let point = |e: Edge| -> (f64, f64) {
        match e {
            Edge::H(i, j) => {
                let t = (level - p[i][j]) / (p[i + 1][j] - p[i][j]);
                (xs[i] + t * (xs[i + 1] - xs[i]), vs[j])
            }
            Edge::V(i, j) => {
                let t = (level - p[i][j]) / (p[i][j + 1] - p[i][j]);
                (xs[i], vs[j] + t * (vs[j + 1] - vs[j]))
            }
        }
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..nv - 1 {
            let bottom = Edge::H(i, j);
            let top = Edge::H(i, j + 1);
            let left = Edge::V(i, j);
            let right = Edge::V(i + 1, j);
            let case = above(i, j) as u8
                | (above(i + 1, j) as u8) << 1
                | (above(i + 1, j + 1) as u8) << 2
                | (above(i, j + 1) as u8) << 3;
            let center_above =
                || 0.25 * (p[i][j] + p[i + 1][j] + p[i + 1][j + 1] + p[i][j + 1]) >= level;
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if center_above() {
                        segments.push((bottom, right));
                        segments.push((left, top));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if center_above() {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((bottom, right));
                        segments.push((left, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    join(&segments)
        .into_iter()
        .map(|(edges, closed)| Polyline {
            points: edges.into_iter().map(point).collect(),
            closed,
        })
        .collect()
}

/// Chains segments that share an edge crossing into ordered polylines.
fn join(segments: &[(Edge, Edge)]) -> Vec<(Vec<Edge>, bool)> {
    let mut incident: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(k);
        incident.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();

    let walk = |start_seg: usize, start_edge: Edge, used: &mut Vec<bool>| -> (Vec<Edge>, bool) {
        let mut chain = vec![start_edge];
        let (mut seg, mut at) = (start_seg, start_edge);
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            chain.push(next);
            if next == start_edge {
                return (chain, true);
            }
            match incident[&next].iter().find(|&&s| !used[s]) {
                Some(&s) => {
                    seg = s;
                    at = next;
                }
                None => return (chain, false),
            }
        }
    };

    // open curves start at edges touched by a single segment (grid boundary)
    let mut starts: Vec<(usize, Edge)> = segments
        .iter()
        .enumerate()
        .flat_map(|(k, (a, b))| [(k, *a), (k, *b)])
        .filter(|(_, e)| incident[e].len() == 1)
        .collect();
    starts.sort_by_key(|&(k, _)| k);
    for (k, e) in starts {
        if !used[k] {
            out.push(walk(k, e, &mut used));
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            out.push(walk(k, segments[k].0, &mut used));
        }
    }
    out
}

/// Per `X` column, the `V` where the field first drops below `level` moving
/// up from the smallest `V` (linear interpolation). This is where the level
/// curve crosses that column; `v_grid[0]` when the first node is already
/// below, the last `V` when the column never drops.
pub fn column_extent(grid: &ProbabilityGrid, level: f64) -> Vec<f64> {
    let vs = &grid.v_grid;
    grid.probabilities
        .iter()
        .map(|col| {
            if col[0] < level {
                return vs[0];
            }
            for j in 1..col.len() {
                if col[j] < level {
                    let t = (level - col[j - 1]) / (col[j] - col[j - 1]);
                    return vs[j - 1] + t * (vs[j] - vs[j - 1]);
                }
            }
            *vs.last().expect("non-empty grid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(xs: Vec<f64>, vs: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> ProbabilityGrid {
        let probabilities = xs
            .iter()
            .map(|&x| vs.iter().map(|&v| f(x, v)).collect())
            .collect();
        let certified = vec![vec![false; vs.len()]; xs.len()];
        ProbabilityGrid {
            x_grid: xs,
            v_grid: vs,
            probabilities,
            certified,
        }
    }

    fn lin(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn constant_field_has_no_contours() {
        let g = grid(lin(0.0, 1.0, 5), lin(0.0, 1.0, 4), |_, _| 1.0);
        assert!(contour_extract(&g, 0.8).is_empty());
    }

    #[test]
    fn step_field_gives_horizontal_line() {
        let g = grid(lin(0.0, 4.0, 5), lin(0.0, 3.0, 4), |_, v| {
            if v <= 1.0 {
                1.0
            } else {
                0.0
            }
        });
        let lines = contour_extract(&g, 0.5);
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        assert!(!l.closed);
        assert_eq!(l.points.len(), 5);
        assert!(l.points.iter().all(|&(_, v)| (v - 1.5).abs() < 1e-15));
        let xs: Vec<f64> = l.points.iter().map(|p| p.0).collect();
        let sorted = xs.windows(2).all(|w| w[1] > w[0]) || xs.windows(2).all(|w| w[1] < w[0]);
        assert!(sorted, "{xs:?}");
    }

    #[test]
    fn exponential_field_level_set() {
        let c = 2.0;
        let vs = lin(0.0, 2.0, 21);
        let h = vs[1] - vs[0];
        let g = grid(lin(0.0, 1.0, 6), vs, |_, v| (-v / c).exp());
        let target = -c * 0.8f64.ln();
        let lines = contour_extract(&g, 0.8);
        assert_eq!(lines.len(), 1);
        for &(x, v) in &lines[0].points {
            assert!((v - target).abs() < h);
            assert!((0.0..=1.0).contains(&x));
        }
        for e in column_extent(&g, 0.8) {
            assert!((e - target).abs() < h);
        }
    }

    #[test]
    fn closed_loop_around_peak() {
        let g = grid(lin(-2.0, 2.0, 9), lin(-2.0, 2.0, 9), |x, v| {
            (-(x * x + v * v)).exp()
        });
        let lines = contour_extract(&g, 0.5);
        assert_eq!(lines.len(), 1);
        assert!(lines[0].closed);
        assert_eq!(lines[0].points.first(), lines[0].points.last());
    }

    #[test]
    fn saddle_produces_two_segments() {
        let g = grid(vec![0.0, 1.0], vec![0.0, 1.0], |x, v| {
            if x == v {
                1.0
            } else {
                0.0
            }
        });
        let lines = contour_extract(&g, 0.5);
        assert_eq!(lines.len(), 2);
    }

    #[test]
    fn column_extent_edge_cases() {
        let g = grid(vec![0.0, 1.0], vec![0.0, 1.0, 2.0], |x, _| {
            if x == 0.0 {
                0.0
            } else {
                1.0
            }
        });
        assert_eq!(column_extent(&g, 0.8), vec![0.0, 2.0]);
    }
}
