use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::SparseSpdMatrix;

/// Minimum-degree fill-reducing ordering on the explicit elimination graph.
///
/// Returns `perm` with `perm[k]` the original index eliminated `k`-th. Ties are
/// broken by the smaller original index, so the result is deterministic.
pub fn minimum_degree(a: &SparseSpdMatrix) -> Vec<usize> {
    let n = a.dim();
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|i| Reverse((adj[i].len(), i))).collect();
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();

    while let Some(Reverse((degree, v))) = heap.pop() {
        if eliminated[v] || degree != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let clique = std::mem::take(&mut adj[v]);
        for &w in &clique {
            // adj[w] <- (adj[w] \ {v}) U (clique \ {w}), both sorted
            merged.clear();
            let (mut p, mut q) = (0, 0);
            let current = &adj[w];
            while p < current.len() || q < clique.len() {
                let a_next = current.get(p).copied().unwrap_or(usize::MAX);
                let b_next = clique.get(q).copied().unwrap_or(usize::MAX);
                let next = a_next.min(b_next);
                if a_next == next {
                    p += 1;
                }
                if b_next == next {
                    q += 1;
                }
                if next != v && next != w {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[w], &mut merged);
            heap.push(Reverse((adj[w].len(), w)));
        }
    }
    perm
}
