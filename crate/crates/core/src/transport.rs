//! Exact 1-Wasserstein distances between empirical measures.
//!
//! Two routes: a sort-and-merge formula for univariate samples and the
//! transportation problem for arbitrary dimension. The latter is solved by
//! successive shortest paths ([`solve_transport`]); a Bland-rule
//! transportation simplex ([`solve_transport_simplex`]) is kept as a slower,
//! independent cross-check. All routes use uniform weights `1/n` and `1/m`
//! and the Euclidean ground cost.

use crate::error::{Error, Result};
use crate::sample::{ensure_same_dim, Sample};

/// Default cap on `n * m` cost entries for [`wasserstein1_lp_exact`].
pub const DEFAULT_LP_BUDGET: usize = 250_000;

/// `W_1` between two univariate samples: the integral over `s in [0,1]` of
/// `|F_x^{-1}(s) - F_y^{-1}(s)|` for the piecewise-constant empirical quantile
/// functions.
pub fn wasserstein1_1d_exact(x: &Sample, y: &Sample) -> Result<f64> {
    if x.d() != 1 || y.d() != 1 {
        return Err(Error::Shape(format!(
            "1-D distance needs univariate samples, got d = {} and {}",
            x.d(),
            y.d()
        )));
    }
    Ok(wasserstein1_sorted(
        &sorted(x.column(0)),
        &sorted(y.column(0)),
    ))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Same as [`wasserstein1_1d_exact`] on pre-sorted values.
pub fn wasserstein1_sorted(xs: &[f64], ys: &[f64]) -> f64 {
    let (n, m) = (xs.len() as u128, ys.len() as u128);
    if n == 0 || m == 0 {
        return 0.0;
    }
    // Quantile breakpoints in units of 1/(n m): x switches at multiples of m,
    // y at multiples of n.
    let (mut i, mut j) = (0usize, 0usize);
    let mut cur: u128 = 0;
    let mut total = 0.0;
    let end = n * m;
    while cur < end {
        let next_x = (i as u128 + 1) * m;
        let next_y = (j as u128 + 1) * n;
        let next = next_x.min(next_y);
        total += (next - cur) as f64 * (xs[i] - ys[j]).abs();
        cur = next;
        if next_x == next {
            i += 1;
        }
        if next_y == next {
            j += 1;
        }
    }
    total / end as f64
}

/// `W_1` between two samples by solving the transportation problem exactly,
/// with the default cost-entry budget.
pub fn wasserstein1_lp_exact(x: &Sample, y: &Sample) -> Result<f64> {
    wasserstein1_lp_exact_with_budget(x, y, DEFAULT_LP_BUDGET)
}

pub fn wasserstein1_lp_exact_with_budget(x: &Sample, y: &Sample, budget: usize) -> Result<f64> {
    Ok(solve_transport(x, y, budget)?.cost)
}

/// Optimal coupling and its cost.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub cost: f64,
    /// Cells `(i, j, mass)` carrying positive mass; masses sum to 1.
    pub plan: Vec<(usize, usize, f64)>,
    /// Augmentations or pivots performed by the solver.
    pub iterations: usize,
}

struct Problem {
    n: usize,
    m: usize,
    cost: Vec<f64>,
}

impl Problem {
    fn new(x: &Sample, y: &Sample, budget: usize) -> Result<Self> {
        ensure_same_dim(x, y)?;
        let (n, m) = (x.n(), y.n());
        let entries = n.checked_mul(m).ok_or(Error::Capacity {
            entries: usize::MAX,
            budget,
        })?;
        if entries > budget {
            return Err(Error::Capacity { entries, budget });
        }
        let mut cost = vec![0.0; entries];
        for i in 0..n {
            let xi = x.row(i);
            for j in 0..m {
                let d2: f64 = xi
                    .iter()
                    .zip(y.row(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                cost[i * m + j] = d2.sqrt();
            }
        }
        Ok(Self { n, m, cost })
    }

    // Flow is in units of 1/(n m): each source ships m, each sink takes n.
    fn solution(&self, flow: &[i64], iterations: usize) -> TransportSolution {
        let total = (self.n * self.m) as f64;
        let mut objective = 0.0;
        let mut plan = Vec::new();
        for (cell, &f) in flow.iter().enumerate() {
            if f > 0 {
                objective += f as f64 * self.cost[cell];
                plan.push((cell / self.m, cell % self.m, f as f64 / total));
            }
        }
        TransportSolution {
            cost: objective / total,
            plan,
            iterations,
        }
    }
}

/// Solves `min sum_ij pi_ij |x_i - y_j|` over couplings of the two empirical
/// measures by successive shortest paths.
///
/// Supplies are integers (`m` per source, `n` per sink). Each round runs a
/// dense Dijkstra on reduced costs from every source with remaining supply
/// to the nearest sink with remaining demand and pushes the bottleneck
/// amount along that path. Node potentials keep reduced costs non-negative,
/// and the final flow is optimal because no negative cycle remains.
pub fn solve_transport(x: &Sample, y: &Sample, budget: usize) -> Result<TransportSolution> {
    let problem = Problem::new(x, y, budget)?;
    let (n, m) = (problem.n, problem.m);
    let cost = &problem.cost;
    let mut flow = vec![0i64; n * m];
    let mut supply = vec![m as i64; n];
    let mut demand = vec![n as i64; m];
    // Potentials: rows 0..n, columns n..n+m.
    let mut pot = vec![0.0f64; n + m];
    let mut dist = vec![f64::INFINITY; n + m];
    let mut done = vec![false; n + m];
    // Predecessor of a column is a row and vice versa.
    let mut pred = vec![usize::MAX; n + m];
    let mut remaining = (n * m) as i64;
    let mut iterations = 0;

    while remaining > 0 {
        dist.fill(f64::INFINITY);
        done.fill(false);
        pred.fill(usize::MAX);
        for i in 0..n {
            if supply[i] > 0 {
                dist[i] = 0.0;
            }
        }
        let target = loop {
            let mut node = usize::MAX;
            let mut best = f64::INFINITY;
            for (k, &dk) in dist.iter().enumerate() {
                if !done[k] && dk < best {
                    best = dk;
                    node = k;
                }
            }
            if node == usize::MAX {
                // Total supply equals total demand, so a sink is always reachable.
                unreachable!("no augmenting path with positive remaining flow");
            }
            done[node] = true;
            if node < n {
                let i = node;
                for j in 0..m {
                    let col = n + j;
                    if done[col] {
                        continue;
                    }
                    let rc = (cost[i * m + j] + pot[i] - pot[col]).max(0.0);
                    if best + rc < dist[col] {
                        dist[col] = best + rc;
                        pred[col] = i;
                    }
                }
            } else {
                let j = node - n;
                if demand[j] > 0 {
                    break node;
                }
                for i in 0..n {
                    if done[i] || flow[i * m + j] == 0 {
                        continue;
                    }
                    let rc = (-cost[i * m + j] + pot[node] - pot[i]).max(0.0);
                    if best + rc < dist[i] {
                        dist[i] = best + rc;
                        pred[i] = node;
                    }
                }
            }
        };

        let reach = dist[target];
        for k in 0..n + m {
            pot[k] += dist[k].min(reach);
        }

        // Walk back to the source, alternating column <- row <- column ...
        let mut amount = demand[target - n];
        let mut col = target;
        let source = loop {
            let row = pred[col];
            let back = pred[row];
            if back == usize::MAX {
                break row;
            }
            amount = amount.min(flow[row * m + (back - n)]);
            col = back;
        };
        amount = amount.min(supply[source]);

        let mut col = target;
        loop {
            let row = pred[col];
            flow[row * m + (col - n)] += amount;
            let back = pred[row];
            if back == usize::MAX {
                break;
            }
            flow[row * m + (back - n)] -= amount;
            col = back;
        }
        supply[source] -= amount;
        demand[target - n] -= amount;
        remaining -= amount;
        iterations += 1;
    }
    Ok(problem.solution(&flow, iterations))
}

/// Same problem as [`solve_transport`], solved by the transportation simplex
/// from a northwest-corner start.
///
/// Entering cells are chosen by Bland's rule (lowest index with negative
/// reduced cost) and ties for the leaving cell also go to the lowest index,
/// which rules out cycling. Each pivot costs `O(n m)`, and the pivot count
/// grows quickly with size, so this is meant for small instances.
pub fn solve_transport_simplex(x: &Sample, y: &Sample, budget: usize) -> Result<TransportSolution> {
    let problem = Problem::new(x, y, budget)?;
    let (n, m) = (problem.n, problem.m);
    let max_cost = problem.cost.iter().copied().fold(0.0, f64::max);
    let tol = 1e-12 * max_cost.max(1.0);
    let mut simplex = Simplex::northwest_corner(n, m, problem.cost.clone());
    let pivots = simplex.optimize(tol);
    Ok(problem.solution(&simplex.flow, pivots))
}

/// Transportation simplex over the complete bipartite graph. Row node `i` is
/// node `i`, column node `j` is node `n + j`; cell `(i, j)` is `i * m + j`.
struct Simplex {
    n: usize,
    m: usize,
    cost: Vec<f64>,
    flow: Vec<i64>,
    is_basic: Vec<bool>,
    basis: Vec<usize>,
    // Spanning-tree bookkeeping, rebuilt after each pivot.
    potential: Vec<f64>,
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
}

const NO_PARENT: usize = usize::MAX;

impl Simplex {
    fn northwest_corner(n: usize, m: usize, cost: Vec<f64>) -> Self {
        let cells = n * m;
        let mut flow = vec![0i64; cells];
        let mut is_basic = vec![false; cells];
        let mut basis = Vec::with_capacity(n + m - 1);
        let mut supply = vec![m as i64; n];
        let mut demand = vec![n as i64; m];
        let (mut i, mut j) = (0, 0);
        loop {
            let f = supply[i].min(demand[j]);
            let cell = i * m + j;
            flow[cell] = f;
            is_basic[cell] = true;
            basis.push(cell);
            supply[i] -= f;
            demand[j] -= f;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if (supply[i] == 0 && i < n - 1) || j == m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(basis.len(), n + m - 1);
        let nodes = n + m;
        Self {
            n,
            m,
            cost,
            flow,
            is_basic,
            basis,
            potential: vec![0.0; nodes],
            parent: vec![NO_PARENT; nodes],
            parent_cell: vec![NO_PARENT; nodes],
            depth: vec![0; nodes],
            adjacency: vec![Vec::new(); nodes],
        }
    }

    /// Recomputes potentials (`u_i + v_j = c_ij` on basic cells, `u_0 = 0`)
    /// and the rooted tree structure.
    fn rebuild_tree(&mut self) {
        let (n, m) = (self.n, self.m);
        for adj in &mut self.adjacency {
            adj.clear();
        }
        for &cell in &self.basis {
            let (i, j) = (cell / m, cell % m);
            self.adjacency[i].push(cell);
            self.adjacency[n + j].push(cell);
        }
        self.parent.fill(NO_PARENT);
        self.parent[0] = 0;
        self.parent_cell[0] = NO_PARENT;
        self.depth[0] = 0;
        self.potential[0] = 0.0;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            for k in 0..self.adjacency[node].len() {
                let cell = self.adjacency[node][k];
                let (i, j) = (cell / m, cell % m);
                let other = if node < n { n + j } else { i };
                if self.parent[other] != NO_PARENT {
                    continue;
                }
                self.parent[other] = node;
                self.parent_cell[other] = cell;
                self.depth[other] = self.depth[node] + 1;
                // u_i + v_j = c_ij
                self.potential[other] = self.cost[cell] - self.potential[node];
                stack.push(other);
            }
        }
    }

    fn optimize(&mut self, tol: f64) -> usize {
        let (n, m) = (self.n, self.m);
        let mut pivots = 0;
        loop {
            self.rebuild_tree();
            // Bland: first cell (in index order) with negative reduced cost.
            let entering = (0..n * m).find(|&cell| {
                !self.is_basic[cell] && {
                    let (i, j) = (cell / m, cell % m);
                    self.cost[cell] - self.potential[i] - self.potential[n + j] < -tol
                }
            });
            let Some(entering) = entering else {
                return pivots;
            };
            let (ei, ej) = (entering / m, entering % m);

            // Tree path from column node ej to row node ei. Edges alternate
            // -, +, -, ... starting at ej; the entering cell carries +.
            let mut up_from_col = Vec::new();
            let mut up_from_row = Vec::new();
            let (mut a, mut b) = (n + ej, ei);
            while self.depth[a] > self.depth[b] {
                up_from_col.push(self.parent_cell[a]);
                a = self.parent[a];
            }
            while self.depth[b] > self.depth[a] {
                up_from_row.push(self.parent_cell[b]);
                b = self.parent[b];
            }
            while a != b {
                up_from_col.push(self.parent_cell[a]);
                a = self.parent[a];
                up_from_row.push(self.parent_cell[b]);
                b = self.parent[b];
            }
            let path: Vec<usize> = up_from_col
                .into_iter()
                .chain(up_from_row.into_iter().rev())
                .collect();

            let mut theta = i64::MAX;
            let mut leaving = usize::MAX;
            for &cell in path.iter().step_by(2) {
                let f = self.flow[cell];
                if f < theta || (f == theta && cell < leaving) {
                    theta = f;
                    leaving = cell;
                }
            }
            for (k, &cell) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[cell] -= theta;
                } else {
                    self.flow[cell] += theta;
                }
            }
            self.flow[entering] = theta;
            self.is_basic[entering] = true;
            self.is_basic[leaving] = false;
            if let Some(slot) = self.basis.iter().position(|&c| c == leaving) {
                self.basis[slot] = entering;
            }
            pivots += 1;
        }
    }
}
