//! Exact minimum-cost perfect matching on a dense `n x n` cost function.
//!
//! Up to [`DENSE_MAX`] rows the dense shortest-augmenting-path Hungarian
//! method runs directly (`O(n^3)`). Larger instances are solved on a sparse
//! candidate graph of nearest neighbours; the resulting duals are then priced
//! against every pair, and any violated edge is added before re-solving, so
//! the returned matching is optimal for the full cost function. Costs are
//! evaluated on demand and the matrix is never materialized.
//!
//! For `n <=` [`LEX_EXACT_MAX`] a depth-first search in lexicographic order
//! picks the lexicographically smallest permutation among the optimal ones.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Largest size for which ties are broken lexicographically.
pub const LEX_EXACT_MAX: usize = 12;

/// Largest size solved with the dense method.
pub const DENSE_MAX: usize = 400;

const TIE_RTOL: f64 = 1e-12;
const DUAL_RTOL: f64 = 1e-10;
const PRICE_EDGES: usize = 16;
const NONE: usize = usize::MAX;

/// Returns `perm` with row `i` assigned to column `perm[i]`.
pub fn solve_assignment<F>(n: usize, cost: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    if n == 0 {
        return Vec::new();
    }
    if n > DENSE_MAX {
        return sparse_certified(n, &cost);
    }
    let perm = hungarian(n, &cost);
    if n > LEX_EXACT_MAX {
        return perm;
    }
    let optimum = total_cost(&perm, &cost);
    let limit = optimum + TIE_RTOL * optimum.abs().max(1.0);
    lexicographic_first_within(n, &cost, limit).unwrap_or(perm)
}

pub fn total_cost<F>(perm: &[usize], cost: &F) -> f64
where
    F: Fn(usize, usize) -> f64,
{
    perm.iter().enumerate().map(|(i, &j)| cost(i, j)).sum()
}

fn hungarian<F>(n: usize, cost: &F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    // 1-based arrays; index 0 is the virtual root column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);

        loop {
            used[j0] = true;
            let i0 = p[j0];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - ui0 - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }

        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

#[derive(Clone, Copy)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Shortest-augmenting-path state over a growing candidate edge set.
///
/// Invariants between augmentations: every candidate edge has nonnegative
/// reduced cost `c - u[i] - v[j]`, and matched edges are tight.
struct SparseSolver<'a, F> {
    n: usize,
    cost: &'a F,
    edges: Vec<Vec<(usize, f64)>>,
    u: Vec<f64>,
    v: Vec<f64>,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
    // Rows whose dual rose since they were last priced.
    dirty: Vec<bool>,
    dist: Vec<f64>,
    pred: Vec<usize>,
    done: Vec<bool>,
    touched: Vec<usize>,
    finalized: Vec<usize>,
    heap: BinaryHeap<Reverse<(Key, usize)>>,
}

impl<'a, F: Fn(usize, usize) -> f64> SparseSolver<'a, F> {
    fn new(n: usize, cost: &'a F) -> Self {
        Self {
            n,
            cost,
            edges: vec![Vec::new(); n],
            u: vec![0.0; n],
            v: vec![0.0; n],
            row_to_col: vec![NONE; n],
            col_to_row: vec![NONE; n],
            dirty: vec![true; n],
            dist: vec![f64::INFINITY; n],
            pred: vec![NONE; n],
            done: vec![false; n],
            touched: Vec::new(),
            finalized: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }

    fn add_edge(&mut self, i: usize, j: usize) {
        if !self.edges[i].iter().any(|&(c, _)| c == j) {
            let c = (self.cost)(i, j);
            self.edges[i].push((j, c));
        }
    }

    fn relax(&mut self, j: usize, d: f64, from: usize) {
        if d < self.dist[j] {
            if self.dist[j] == f64::INFINITY {
                self.touched.push(j);
            }
            self.dist[j] = d;
            self.pred[j] = from;
            self.heap.push(Reverse((Key(d), j)));
        }
    }

    /// Matches the free row `root`; `false` when no free column is reachable.
    fn augment(&mut self, root: usize) -> bool {
        for &j in &self.touched {
            self.dist[j] = f64::INFINITY;
            self.pred[j] = NONE;
            self.done[j] = false;
        }
        self.touched.clear();
        self.finalized.clear();
        self.heap.clear();

        let v = &self.v;
        let u_root = self.edges[root]
            .iter()
            .map(|&(j, c)| c - v[j])
            .fold(f64::INFINITY, f64::min);
        if !u_root.is_finite() {
            return false;
        }
        self.u[root] = u_root;
        for k in 0..self.edges[root].len() {
            let (j, c) = self.edges[root][k];
            self.relax(j, c - u_root - self.v[j], root);
        }

        let mut end = NONE;
        while let Some(Reverse((Key(d), j))) = self.heap.pop() {
            if self.done[j] || d > self.dist[j] {
                continue;
            }
            self.done[j] = true;
            self.finalized.push(j);
            let owner = self.col_to_row[j];
            if owner == NONE {
                end = j;
                break;
            }
            let u_owner = self.u[owner];
            for k in 0..self.edges[owner].len() {
                let (j2, c) = self.edges[owner][k];
                if !self.done[j2] {
                    self.relax(j2, d + c - u_owner - self.v[j2], owner);
                }
            }
        }
        if end == NONE {
            return false;
        }

        let reach = self.dist[end];
        for &j in &self.finalized {
            let shift = reach - self.dist[j];
            self.v[j] -= shift;
            let owner = self.col_to_row[j];
            if owner != NONE && shift > 0.0 {
                self.u[owner] += shift;
                self.dirty[owner] = true;
            }
        }
        self.u[root] += reach;
        self.dirty[root] = true;

        let mut j = end;
        loop {
            let i = self.pred[j];
            let previous = self.row_to_col[i];
            self.row_to_col[i] = j;
            self.col_to_row[j] = i;
            if i == root {
                break;
            }
            j = previous;
        }
        true
    }

    fn augment_or_widen(&mut self, root: usize) {
        if self.augment(root) {
            return;
        }
        // Every reachable column is taken: connect the root directly to its
        // cheapest free columns, which always yields an augmenting path.
        let mut free: Vec<(f64, usize)> = (0..self.n)
            .filter(|&j| self.col_to_row[j] == NONE)
            .map(|j| ((self.cost)(root, j) - self.v[j], j))
            .collect();
        let keep = PRICE_EDGES.min(free.len());
        if keep < free.len() {
            free.select_nth_unstable_by(keep, |a, b| a.0.total_cmp(&b.0));
        }
        for &(_, j) in &free[..keep] {
            self.add_edge(root, j);
        }
        let ok = self.augment(root);
        debug_assert!(ok);
    }

    /// Lowers every row dual that violates feasibility against some column
    /// outside the candidate set, adds the cheapest such edges and frees the
    /// row. Returns the freed rows. `seed` frees and seeds every row.
    ///
    /// Column duals only decrease, so a row whose dual has not risen since
    /// its last pricing is still feasible and is skipped.
    fn price(&mut self, seed: bool) -> Vec<usize> {
        let scale = self
            .u
            .iter()
            .chain(&self.v)
            .fold(1.0f64, |m, x| m.max(x.abs()));
        let tol = DUAL_RTOL * scale;
        let mut freed = Vec::new();
        let mut best = [(f64::INFINITY, NONE); PRICE_EDGES];
        for i in 0..self.n {
            if !std::mem::take(&mut self.dirty[i]) {
                continue;
            }
            best.fill((f64::INFINITY, NONE));
            for j in 0..self.n {
                let r = (self.cost)(i, j) - self.v[j];
                if r < best[PRICE_EDGES - 1].0 {
                    let mut k = PRICE_EDGES - 1;
                    while k > 0 && best[k - 1].0 > r {
                        best[k] = best[k - 1];
                        k -= 1;
                    }
                    best[k] = (r, j);
                }
            }
            if seed || best[0].0 < self.u[i] - tol {
                for &(_, j) in best.iter().filter(|(_, j)| *j != NONE) {
                    self.add_edge(i, j);
                }
                let col = self.row_to_col[i];
                if col != NONE {
                    self.col_to_row[col] = NONE;
                    self.row_to_col[i] = NONE;
                }
                freed.push(i);
            }
        }
        freed
    }
}

fn sparse_certified<F>(n: usize, cost: &F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    // With all duals at zero the first pricing pass frees every row and
    // seeds it with its nearest columns.
    let mut solver = SparseSolver::new(n, cost);
    let mut pending = solver.price(true);
    while !pending.is_empty() {
        for &i in &pending {
            solver.augment_or_widen(i);
        }
        pending = solver.price(false);
    }
    solver.row_to_col
}

/// First permutation in lexicographic order whose cost is at most `limit`.
fn lexicographic_first_within<F>(n: usize, cost: &F, limit: f64) -> Option<Vec<usize>>
where
    F: Fn(usize, usize) -> f64,
{
    // Lower bound for rows i.. : sum of their unrestricted row minima.
    let mut suffix = vec![0.0f64; n + 1];
    for i in (0..n).rev() {
        let row_min = (0..n).map(|j| cost(i, j)).fold(f64::INFINITY, f64::min);
        suffix[i] = suffix[i + 1] + row_min;
    }

    struct Search<'a, F> {
        n: usize,
        cost: &'a F,
        limit: f64,
        suffix: Vec<f64>,
        used: Vec<bool>,
        perm: Vec<usize>,
    }

    impl<F: Fn(usize, usize) -> f64> Search<'_, F> {
        fn descend(&mut self, row: usize, partial: f64) -> bool {
            if row == self.n {
                return partial <= self.limit;
            }
            for col in 0..self.n {
                if self.used[col] {
                    continue;
                }
                let next = partial + (self.cost)(row, col);
                if next + self.suffix[row + 1] > self.limit {
                    continue;
                }
                self.used[col] = true;
                self.perm[row] = col;
                if self.descend(row + 1, next) {
                    return true;
                }
                self.used[col] = false;
            }
            false
        }
    }

    let mut search = Search {
        n,
        cost,
        limit,
        suffix,
        used: vec![false; n],
        perm: vec![0; n],
    };
    if search.descend(0, 0.0) {
        Some(search.perm)
    } else {
        None
    }
}
