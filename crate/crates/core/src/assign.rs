//! Linear assignment: dense cost matrices, gating, and an O(n³) Hungarian
//! solver (shortest augmenting path with dual potentials).

use alloc::vec;
use alloc::vec::Vec;

/// Cost of an infeasible pair. Exceeds any sum of feasible costs the
/// tracker produces, so the solver maximises the number of feasible pairs
/// before minimising their cost.
pub const GATED: f64 = 1e6;

/// Dense row-major matrix; rows are usually tracks, columns detections.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, fill: f64) -> Self {
        CostMatrix { rows, cols, data: vec![fill; rows * cols] }
    }

    /// Builds from nested rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        CostMatrix { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_gated(&self, r: usize, c: usize) -> bool {
        self.get(r, c) >= GATED
    }

    pub fn transpose(&self) -> CostMatrix {
        CostMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }
}

/// Replaces every entry above `threshold` with [`GATED`].
pub fn gate(cost: &CostMatrix, threshold: f64) -> CostMatrix {
    let mut out = cost.clone();
    for v in &mut out.data {
        if *v > threshold {
            *v = GATED;
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(row, col)` pairs in ascending row order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    /// Sum of the matched entries, accumulated in ascending row order.
    pub fn total_cost(&self, cost: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(r, c)| cost.get(r, c)).sum()
    }

    fn from_pairs(rows: usize, cols: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        for &(r, c) in &pairs {
            row_used[r] = true;
            col_used[c] = true;
        }
        Assignment {
            pairs,
            unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
            unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
        }
    }
}

/// Minimum-cost assignment. The matrix is padded to square with [`GATED`];
/// padded pairs and pairs through gated entries are reported unmatched.
pub fn hungarian(cost: &CostMatrix) -> Assignment {
    if cost.is_empty() {
        return Assignment::from_pairs(cost.rows, cost.cols, Vec::new());
    }
    let row_to_col = solve_square(cost);
    let pairs = row_to_col
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| r < cost.rows && c < cost.cols && !cost.is_gated(r, c))
        .collect();
    Assignment::from_pairs(cost.rows, cost.cols, pairs)
}

/// Returns `row -> col` for the square-padded problem.
fn solve_square(cost: &CostMatrix) -> Vec<usize> {
    let n = cost.rows.max(cost.cols);
    let at = |r: usize, c: usize| if r < cost.rows && c < cost.cols { cost.get(r, c) } else { GATED };

    // 1-based arrays; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Exhaustive minimum over every assignment covering the smaller side.
/// Factorial time; meant as a reference for small matrices.
pub fn brute_force_min_cost(cost: &CostMatrix) -> (f64, Vec<(usize, usize)>) {
    if cost.is_empty() {
        return (0.0, Vec::new());
    }
    let transposed = cost.rows > cost.cols;
    let m = if transposed { cost.transpose() } else { cost.clone() };
    // m.rows <= m.cols: choose a distinct column per row.
    let mut best = (f64::INFINITY, Vec::new());
    let mut chosen = Vec::with_capacity(m.rows);
    let mut used = vec![false; m.cols];
    enumerate(&m, &mut chosen, &mut used, &mut best);

    let mut pairs: Vec<(usize, usize)> =
        best.1.iter().enumerate().map(|(r, &c)| if transposed { (c, r) } else { (r, c) }).collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(r, c)| cost.get(r, c)).sum();
    (total, pairs)
}

fn enumerate(m: &CostMatrix, chosen: &mut Vec<usize>, used: &mut [bool], best: &mut (f64, Vec<usize>)) {
    if chosen.len() == m.rows {
        let total: f64 = chosen.iter().enumerate().map(|(r, &c)| m.get(r, c)).sum();
        if total < best.0 {
            *best = (total, chosen.clone());
        }
        return;
    }
    for c in 0..m.cols {
        if !used[c] {
            used[c] = true;
            chosen.push(c);
            enumerate(m, chosen, used, best);
            chosen.pop();
            used[c] = false;
        }
    }
}
