//! Envelope (variable band) Cholesky factorization for the sparse SPD
//! systems produced by the Laplacian stencil, with a reverse Cuthill-McKee
//! ordering to keep the envelope narrow. Periodic wrap-around couplings are
//! what make the ordering necessary: in natural order they push the band out
//! to the full matrix width.

use std::collections::VecDeque;

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern given as an
/// adjacency list. Returns `perm` with `perm[new] = old`.
pub(crate) fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| adj[v].len())
            .expect("an unplaced vertex exists");
        let start = pseudo_peripheral(adj, seed, &placed);
        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !placed[u]).collect();
            next.sort_by_key(|&u| (adj[u].len(), u));
            for u in next {
                placed[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// A few rounds of the George-Liu heuristic: restart the breadth-first
/// search from the lowest-degree vertex of the last level until the level
/// count stops growing.
fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize, excluded: &[bool]) -> usize {
    let mut start = seed;
    let mut depth = 0;
    for _ in 0..8 {
        let (levels, last) = bfs_levels(adj, start, excluded);
        if levels <= depth {
            break;
        }
        depth = levels;
        start = last;
    }
    start
}

fn bfs_levels(adj: &[Vec<usize>], start: usize, excluded: &[bool]) -> (usize, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut deepest = (0, start);
    while let Some(v) = queue.pop_front() {
        let l = level[v];
        if l > deepest.0 || (l == deepest.0 && adj[v].len() < adj[deepest.1].len()) {
            deepest = (l, v);
        }
        for &u in &adj[v] {
            if !excluded[u] && level[u] == usize::MAX {
                level[u] = l + 1;
                queue.push_back(u);
            }
        }
    }
    (deepest.0 + 1, deepest.1)
}

/// Row-oriented envelope storage of a lower-triangular Cholesky factor.
/// Row `i` stores columns `first[i]..=i` contiguously.
#[derive(Debug, Clone)]
pub(crate) struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NotPositiveDefinite {
    pub row: usize,
}

impl EnvelopeCholesky {
    /// Size of the envelope for a given lower-triangular pattern, without
    /// allocating it.
    pub(crate) fn envelope_size(first: &[usize]) -> usize {
        first.iter().enumerate().map(|(i, f)| i - f + 1).sum()
    }

    /// Factors the symmetric matrix whose lower triangle is given by
    /// `diag` and the strictly-lower `entries` `(row, col, value)` with
    /// `col < row`. Entries may repeat; they are summed.
    pub(crate) fn factor(
        diag: &[f64],
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, NotPositiveDefinite> {
        let n = diag.len();
        let mut first: Vec<usize> = (0..n).collect();
        for &(r, c, _) in entries {
            debug_assert!(c < r);
            first[r] = first[r].min(c);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut len = 0;
        for (i, f) in first.iter().enumerate() {
            start.push(len);
            len += i - f + 1;
        }
        start.push(len);
        let mut data = vec![0.0; len];
        for (i, d) in diag.iter().enumerate() {
            data[start[i] + i - first[i]] += d;
        }
        for &(r, c, v) in entries {
            data[start[r] + c - first[r]] += v;
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[row_i + j - fi];
                if k0 < j {
                    let a = &data[row_i + k0 - fi..row_i + j - fi];
                    let b = &data[start[j] + k0 - fj..start[j] + j - fj];
                    s -= dot(a, b);
                }
                data[row_i + j - fi] = s / data[start[j] + j - fj];
            }
            let row = &data[row_i..row_i + i - fi];
            let d = data[row_i + i - fi] - dot(row, row);
            if d <= 0.0 || !d.is_finite() {
                return Err(NotPositiveDefinite { row: i });
            }
            data[row_i + i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky { first, start, data })
    }

    /// Solves `L L^T x = b` in place.
    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.first.len();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s = x[i] - dot(&row[..i - fi], &x[fi..i]);
            x[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xk -= l * xi;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators; fixed order keeps results reproducible
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_small_spd_matrix() {
        // [4 1 0; 1 3 1; 0 1 2]
        let diag = [4.0, 3.0, 2.0];
        let entries = [(1, 0, 1.0), (2, 1, 1.0)];
        let f = EnvelopeCholesky::factor(&diag, &entries).unwrap();
        let mut x = [1.0, 2.0, 3.0];
        f.solve_in_place(&mut x);
        let ax = [4.0 * x[0] + x[1], x[0] + 3.0 * x[1] + x[2], x[1] + 2.0 * x[2]];
        for (a, b) in ax.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let diag = [1.0, 1.0];
        let entries = [(1, 0, 2.0)];
        assert!(EnvelopeCholesky::factor(&diag, &entries).is_err());
    }

    #[test]
    fn rcm_narrows_ring_band() {
        // ring of 40 vertices: natural order has bandwidth 39
        let n = 40;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + 1) % n, (i + n - 1) % n]).collect();
        let perm = reverse_cuthill_mckee(&adj);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let band = (0..n)
            .flat_map(|v| adj[v].iter().map(move |&u| (v, u)))
            .map(|(v, u)| inv[v].abs_diff(inv[u]))
            .max()
            .unwrap();
        assert!(band <= 2, "band {band}");
    }
}
