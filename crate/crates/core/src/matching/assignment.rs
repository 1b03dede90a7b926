/// Weighted edge between row `row` and column `col`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub row: usize,
    pub col: usize,
    pub weight: f64,
}

/// Maximum-weight matching where every row and column is used at most once.
///
/// Edges with non-positive weight are never matched. Returns the indices of
/// the chosen edges, ascending. Parallel edges keep the heaviest (first on
/// ties).
pub fn max_weight_matching(rows: usize, cols: usize, edges: &[WeightedEdge]) -> Vec<usize> {
    let n = rows.max(cols);
    if n == 0 || edges.is_empty() {
        return Vec::new();
    }
    // dense square cost matrix; missing and non-positive edges cost 0
    let mut best_edge: Vec<Option<usize>> = vec![None; n * n];
    for (k, e) in edges.iter().enumerate() {
        assert!(e.row < rows && e.col < cols, "edge {k} out of range");
        assert!(e.weight.is_finite(), "edge {k} has non-finite weight");
        if e.weight <= 0.0 {
            continue;
        }
        let slot = &mut best_edge[e.row * n + e.col];
        if slot.map_or(true, |b| e.weight > edges[b].weight) {
            *slot = Some(k);
        }
    }
    let cost: Vec<f64> = best_edge.iter().map(|b| b.map_or(0.0, |k| -edges[k].weight)).collect();
    let assignment = solve_square(n, &cost);
    let mut chosen: Vec<usize> = (0..n).filter_map(|r| best_edge[r * n + assignment[r]]).collect();
    chosen.sort_unstable();
    chosen
}

/// Minimum-cost perfect assignment on an `n x n` matrix by shortest
/// augmenting paths with dual potentials. Returns the column of each row.
fn solve_square(n: usize, cost: &[f64]) -> Vec<usize> {
    // 1-based internally; column 0 is the virtual source of each augmentation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for r in 1..=n {
        row_of[0] = r;
        let mut col = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col] = true;
            let r0 = row_of[col];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let reduced = cost[(r0 - 1) * n + (c - 1)] - u[r0] - v[c];
                if reduced < min_to[c] {
                    min_to[c] = reduced;
                    way[c] = col;
                }
                if min_to[c] < delta {
                    delta = min_to[c];
                    next = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[row_of[c]] += delta;
                    v[c] -= delta;
                } else {
                    min_to[c] -= delta;
                }
            }
            col = next;
            if row_of[col] == 0 {
                break;
            }
        }
        // flip the augmenting path
        loop {
            let prev = way[col];
            row_of[col] = row_of[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for c in 1..=n {
        assignment[row_of[c] - 1] = c - 1;
    }
    assignment
}

/// Exhaustive reference: best total weight over all partial matchings.
pub fn brute_force_matching(rows: usize, cols: usize, edges: &[WeightedEdge]) -> f64 {
    fn rec(row: usize, rows: usize, used: &mut Vec<bool>, adj: &[Vec<(usize, f64)>], acc: f64, best: &mut f64) {
        if row == rows {
            *best = best.max(acc);
            return;
        }
        rec(row + 1, rows, used, adj, acc, best);
        for &(c, w) in &adj[row] {
            if !used[c] {
                used[c] = true;
                rec(row + 1, rows, used, adj, acc + w, best);
                used[c] = false;
            }
        }
    }
    let mut adj = vec![Vec::new(); rows];
    for e in edges {
        adj[e.row].push((e.col, e.weight));
    }
    let mut best = 0.0;
    rec(0, rows, &mut vec![false; cols], &adj, 0.0, &mut best);
    best
}
