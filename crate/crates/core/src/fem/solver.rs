//! Direct solver: reverse Cuthill-McKee ordering and skyline Cholesky factorization.

use std::collections::VecDeque;

use super::assembly::SymmetricSparse;
use crate::{Error, Result};

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn rcm(a: &SymmetricSparse) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in a.upper.iter().enumerate() {
        for &(j, _) in row {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable_by_key(|&v| v);
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs = |start: usize, visited: &mut Vec<bool>, out: &mut Vec<usize>| -> usize {
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            out.push(v);
            last = v;
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
        last
    };
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &s in &by_degree {
        if visited[s] {
            continue;
        }
        // one pass to find a far node, used as the pseudo-peripheral start
        let mut scratch_visited = visited.clone();
        let mut scratch = Vec::new();
        let far = bfs(s, &mut scratch_visited, &mut scratch);
        bfs(far, &mut visited, &mut order);
    }
    order.reverse();
    order
}

/// Cholesky factor `L` in skyline (variable band) row storage.
#[derive(Debug, Clone)]
pub struct Skyline {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl Skyline {
    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.start[i]..self.start[i + 1]]
    }

    /// Factors `a`; a pivot below `1e-11 ×` the largest diagonal reports the equation
    /// (in the original numbering) as a rigid-body deficiency.
    pub fn factor(a: &SymmetricSparse) -> Result<Self> {
        let n = a.n;
        let perm = rcm(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, row) in a.upper.iter().enumerate() {
            for &(j, _) in row {
                let (pi, pj) = (inv[i], inv[j]);
                let (r, c) = (pi.max(pj), pi.min(pj));
                first[r] = first[r].min(c);
            }
        }
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; start[n]];
        for (i, row) in a.upper.iter().enumerate() {
            for &(j, v) in row {
                let (pi, pj) = (inv[i], inv[j]);
                let (r, c) = (pi.max(pj), pi.min(pj));
                values[start[r] + c - first[r]] = v;
            }
        }
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let tol = 1e-11 * max_diag.max(f64::MIN_POSITIVE);

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let dot: f64 = if k0 < j {
                    let ri = &values[start[i] + k0 - fi..start[i] + j - fi];
                    let rj = &values[start[j] + k0 - fj..start[j] + j - fj];
                    ri.iter().zip(rj).map(|(x, y)| x * y).sum()
                } else {
                    0.0
                };
                let idx = start[i] + j - fi;
                if j < i {
                    values[idx] = (values[idx] - dot) / values[start[j + 1] - 1];
                } else {
                    let pivot = values[idx] - dot;
                    if !(pivot > tol) {
                        return Err(Error::RigidBody { equation: perm[i], pivot });
                    }
                    values[idx] = pivot.sqrt();
                }
            }
        }
        Ok(Self { perm, first, start, values })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let row = self.row(i);
            let fi = self.first[i];
            let s: f64 = row[..row.len() - 1].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / row[row.len() - 1];
        }
        for i in (0..n).rev() {
            let row = self.row(i);
            let fi = self.first[i];
            y[i] /= row[row.len() - 1];
            let yi = y[i];
            for (k, l) in row[..row.len() - 1].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Stored entries of the factor (profile size).
    pub fn profile(&self) -> usize {
        self.values.len()
    }
}

/// Solves `a x = b`, returning `x` and the relative residual `‖a x − b‖ / ‖b‖`.
pub fn solve(a: &SymmetricSparse, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let f = Skyline::factor(a)?;
    let x = f.solve(b);
    let r = a.mul(&x);
    let num: f64 = r.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((x, if den > 0.0 { num / den } else { num }))
}
