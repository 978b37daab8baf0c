//! Minimum-cost linear assignment on rectangular cost matrices.
//!
//! The solver pads the matrix to square with zero-cost dummy rows or
//! columns, runs a shortest-augmenting-path (Jonker–Volgenant style)
//! primal-dual method, and then picks, among all optimal matchings, the one
//! that is lexicographically smallest in `(row, col)` order. Every optimal
//! matching is a perfect matching on the edges that are tight under the
//! final dual, so the tie-break only has to search that subgraph.

/// Marker for entries that may never be matched.
pub const INFEASIBLE: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row slices. Panics if rows differ in length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.as_ref().len(), cols, "ragged cost matrix");
            data.extend_from_slice(row.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn set_infeasible(&mut self, row: usize, col: usize) {
        self.set(row, col, INFEASIBLE);
    }

    /// NaN and infinite entries are treated as infeasible.
    pub fn is_feasible(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_finite()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn unmatched(rows: usize, cols: usize) -> Self {
        Self {
            matches: Vec::new(),
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
        }
    }

    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(r, c)| costs.get(r, c)).sum()
    }

    fn from_row_assignment(rows: usize, cols: usize, col_of_row: &[Option<usize>]) -> Self {
        let mut col_used = vec![false; cols];
        let mut out = Assignment::default();
        for (r, col) in col_of_row.iter().enumerate().take(rows) {
            match col {
                Some(c) => {
                    col_used[*c] = true;
                    out.matches.push((r, *c));
                }
                None => out.unmatched_rows.push(r),
            }
        }
        out.unmatched_cols = (0..cols).filter(|&c| !col_used[c]).collect();
        out
    }
}

/// Minimum-cost matching of size `min(rows, cols)` over feasible entries.
///
/// Matchings with more feasible pairs are always preferred; a row or column
/// whose entries are all infeasible comes back unmatched.
pub fn solve(costs: &CostMatrix) -> Assignment {
    let (rows, cols) = (costs.rows, costs.cols);
    if rows == 0 || cols == 0 {
        return Assignment::unmatched(rows, cols);
    }
    let n = rows.max(cols);

    let max_abs = costs
        .data
        .iter()
        .filter(|c| c.is_finite())
        .fold(0.0f64, |m, c| m.max(c.abs()));
    // Exceeds any difference between two feasible matchings, so a matching
    // with fewer infeasible pairs always wins.
    let sentinel = 1e5 + 2.0 * (n as f64 + 1.0) * max_abs;

    let mut square = vec![0.0; n * n];
    let mut scale = max_abs.max(1.0);
    for r in 0..rows {
        for c in 0..cols {
            let v = costs.get(r, c);
            square[r * n + c] = if v.is_finite() {
                v
            } else {
                scale = sentinel;
                sentinel
            };
        }
    }

    let (col_of_row, u, v) = shortest_augmenting_path(n, &square);
    let col_of_row = lexicographic_optimum(n, rows, &square, &u, &v, col_of_row, 1e-12 * scale);

    let col_of_row: Vec<Option<usize>> = col_of_row
        .into_iter()
        .take(rows)
        .enumerate()
        .map(|(r, c)| (c < cols && costs.is_feasible(r, c)).then_some(c))
        .collect();
    Assignment::from_row_assignment(rows, cols, &col_of_row)
}

/// Like [`solve`], but pairs costing more than `max_cost` are left unmatched.
///
/// Over-threshold and infeasible entries are clamped to a value just above
/// `max_cost` before solving, so they cannot distort the assignment of the
/// remaining pairs, and are then filtered out of the result.
pub fn min_cost_matching(costs: &CostMatrix, max_cost: f64) -> Assignment {
    let ceiling = max_cost + 1e-5 * max_cost.abs().max(1.0);
    let clamped = CostMatrix::from_fn(costs.rows, costs.cols, |r, c| {
        let v = costs.get(r, c);
        if v.is_finite() && v <= max_cost {
            v
        } else {
            ceiling
        }
    });
    let solved = solve(&clamped);

    let mut col_of_row = vec![None; costs.rows];
    for (r, c) in solved.matches {
        let v = costs.get(r, c);
        if v.is_finite() && v <= max_cost {
            col_of_row[r] = Some(c);
        }
    }
    Assignment::from_row_assignment(costs.rows, costs.cols, &col_of_row)
}

/// Primal-dual shortest augmenting path on a dense square matrix.
/// Returns the column of each row and the row/column potentials, which
/// satisfy `cost[i][j] - u[i] - v[j] >= 0` with equality on the matching.
fn shortest_augmenting_path(n: usize, cost: &[f64]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based internally; index 0 is a virtual column used as the path root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        row_of_col[0] = row;
        let mut col0 = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[col0] = true;
            let i0 = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = col0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            col0 = col1;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            row_of_col[col0] = row_of_col[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    (col_of_row, u[1..].to_vec(), v[1..].to_vec())
}

/// Rewrites an optimal perfect matching into the lexicographically smallest
/// optimal one over the first `real_rows` rows.
fn lexicographic_optimum(
    n: usize,
    real_rows: usize,
    cost: &[f64],
    u: &[f64],
    v: &[f64],
    mut col_of_row: Vec<usize>,
    tolerance: f64,
) -> Vec<usize> {
    let tight = |i: usize, j: usize| cost[i * n + j] - u[i] - v[j] <= tolerance;
    let mut row_of_col = vec![0usize; n];
    for (i, &j) in col_of_row.iter().enumerate() {
        row_of_col[j] = i;
    }
    let mut locked_row = vec![false; n];
    let mut locked_col = vec![false; n];
    let mut visited = vec![false; n];
    let mut path = Vec::new();

    for i in 0..real_rows {
        let current = col_of_row[i];
        for j in 0..current {
            if locked_col[j] || !tight(i, j) {
                continue;
            }
            // Re-home the current owner of `j` onto `current` along an
            // alternating path of tight edges among unlocked rows/cols.
            locked_row[i] = true;
            locked_col[j] = true;
            visited.fill(false);
            path.clear();
            let owner = row_of_col[j];
            let found = alternating_path(
                owner,
                current,
                n,
                &tight,
                &row_of_col,
                &locked_row,
                &locked_col,
                &mut visited,
                &mut path,
            );
            locked_row[i] = false;
            locked_col[j] = false;
            if found {
                // path holds (row, new col) hops starting at `owner`
                for &(r, c) in &path {
                    col_of_row[r] = c;
                    row_of_col[c] = r;
                }
                col_of_row[i] = j;
                row_of_col[j] = i;
                break;
            }
        }
        locked_row[i] = true;
        locked_col[col_of_row[i]] = true;
    }
    col_of_row
}

#[allow(clippy::too_many_arguments)]
fn alternating_path(
    row: usize,
    target: usize,
    n: usize,
    tight: &impl Fn(usize, usize) -> bool,
    row_of_col: &[usize],
    locked_row: &[bool],
    locked_col: &[bool],
    visited: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    for c in 0..n {
        if visited[c] || locked_col[c] || !tight(row, c) {
            continue;
        }
        visited[c] = true;
        if c == target {
            path.push((row, c));
            return true;
        }
        let next = row_of_col[c];
        if locked_row[next] {
            continue;
        }
        path.push((row, c));
        if alternating_path(
            next, target, n, tight, row_of_col, locked_row, locked_col, visited, path,
        ) {
            return true;
        }
        path.pop();
    }
    false
}
