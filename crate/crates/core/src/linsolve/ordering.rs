//! Fill-reducing orderings on a symmetric adjacency structure.

use std::collections::VecDeque;

/// Reverse Cuthill–McKee ordering; each connected component starts from a
/// minimum-degree vertex.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adjacency[v].len(), v));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adjacency[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

const LEAF_SIZE: usize = 48;

/// Geometric nested dissection: vertices are split at the coordinate median
/// along the longest extent, the one-sided boundary of the split becomes the
/// separator and is numbered after both halves.
pub fn nested_dissection(adjacency: &[Vec<usize>], coords: &[[f64; 3]]) -> Vec<usize> {
    assert_eq!(adjacency.len(), coords.len());
    let n = adjacency.len();
    let mut label = vec![0u8; n];
    let mut order = Vec::with_capacity(n);
    dissect((0..n).collect(), adjacency, coords, &mut label, &mut order);
    order
}

fn dissect(mut verts: Vec<usize>, adjacency: &[Vec<usize>], coords: &[[f64; 3]], label: &mut [u8], order: &mut Vec<usize>) {
    if verts.len() <= LEAF_SIZE {
        verts.sort_unstable();
        order.extend(verts);
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &v in &verts {
        for k in 0..3 {
            lo[k] = lo[k].min(coords[v][k]);
            hi[k] = hi[k].max(coords[v][k]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap();
    verts.sort_by(|&a, &b| coords[a][axis].total_cmp(&coords[b][axis]).then(a.cmp(&b)));
    let mid = verts.len() / 2;
    let (left, right) = verts.split_at(mid);
    for &v in left {
        label[v] = 1;
    }
    for &v in right {
        label[v] = 2;
    }
    let mut a = Vec::with_capacity(left.len());
    let mut sep = Vec::new();
    for &v in left {
        if adjacency[v].iter().any(|&w| label[w] == 2) {
            sep.push(v);
        } else {
            a.push(v);
        }
    }
    let b = right.to_vec();
    for &v in &verts {
        label[v] = 0;
    }
    // Degenerate split (e.g. a dense clique): stop recursing.
    if a.is_empty() || sep.len() >= verts.len() / 2 {
        verts.sort_unstable();
        order.extend(verts);
        return;
    }
    dissect(a, adjacency, coords, label, order);
    dissect(b, adjacency, coords, label, order);
    sep.sort_unstable();
    order.extend(sep);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize, nz: usize) -> (Vec<Vec<usize>>, Vec<[f64; 3]>) {
        let id = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
        let mut adj = vec![Vec::new(); nx * ny * nz];
        let mut xyz = vec![[0.0; 3]; nx * ny * nz];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let v = id(i, j, k);
                    xyz[v] = [i as f64, j as f64, k as f64];
                    for (di, dj, dk) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                        let (a, b, c) = (i + di, j + dj, k + dk);
                        if a < nx && b < ny && c < nz {
                            adj[v].push(id(a, b, c));
                            adj[id(a, b, c)].push(v);
                        }
                    }
                }
            }
        }
        (adj, xyz)
    }

    fn is_permutation(p: &[usize], n: usize) -> bool {
        let mut s = p.to_vec();
        s.sort_unstable();
        s == (0..n).collect::<Vec<_>>()
    }

    #[test]
    fn orderings_are_permutations() {
        let (adj, xyz) = grid(9, 7, 5);
        assert!(is_permutation(&reverse_cuthill_mckee(&adj), adj.len()));
        assert!(is_permutation(&nested_dissection(&adj, &xyz), adj.len()));
    }

    #[test]
    fn handles_disconnected_graphs() {
        let adj = vec![vec![1], vec![0], vec![], vec![4], vec![3]];
        assert!(is_permutation(&reverse_cuthill_mckee(&adj), 5));
    }
}
