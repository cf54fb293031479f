//! Reverse Cuthill-McKee ordering on the symmetrized sparsity graph.

use std::collections::VecDeque;

use crate::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::precision::Scalar;

/// Bijection on `0..n`; `new_to_old[i]` is the original index placed at `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    new_to_old: Vec<usize>,
    old_to_new: Vec<usize>,
}

impl Permutation {
    pub fn new(new_to_old: Vec<usize>) -> Result<Self> {
        let n = new_to_old.len();
        let mut old_to_new = vec![usize::MAX; n];
        for (new, &old) in new_to_old.iter().enumerate() {
            if old >= n || old_to_new[old] != usize::MAX {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            old_to_new[old] = new;
        }
        Ok(Self {
            new_to_old,
            old_to_new,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect()).expect("identity is a permutation")
    }

    pub fn len(&self) -> usize {
        self.new_to_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_to_old.is_empty()
    }

    pub fn new_to_old(&self) -> &[usize] {
        &self.new_to_old
    }

    pub fn old_to_new(&self) -> &[usize] {
        &self.old_to_new
    }

    pub fn inverse(&self) -> Self {
        Self {
            new_to_old: self.old_to_new.clone(),
            old_to_new: self.new_to_old.clone(),
        }
    }

    /// out[i] = x[new_to_old[i]]
    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.new_to_old.iter().map(|&o| x[o]).collect()
    }

    /// Inverse of [`Permutation::apply`].
    pub fn apply_inverse<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.old_to_new.iter().map(|&n| x[n]).collect()
    }

    /// P A P^T in canonical CSR.
    pub fn permute_symmetric<T: Scalar>(&self, a: &CsrMatrix<T>) -> Result<CsrMatrix<T>> {
        if !a.is_square() || a.n_rows() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "symmetric permutation",
                expected: self.len(),
                found: a.n_rows(),
            });
        }
        let n = a.n_rows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(a.nnz());
        let mut values = Vec::with_capacity(a.nnz());
        row_ptr.push(0);
        let mut row: Vec<(u32, T)> = Vec::new();
        for &old in &self.new_to_old {
            let (cols, vals) = a.row(old);
            row.clear();
            row.extend(
                cols.iter()
                    .zip(vals)
                    .map(|(&c, &v)| (self.old_to_new[c as usize] as u32, v)),
            );
            row.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::new(n, n, row_ptr, col_idx, values)
    }
}

/// Maximum |i - j| over stored entries.
pub fn bandwidth<T: Scalar>(a: &CsrMatrix<T>) -> usize {
    (0..a.n_rows())
        .flat_map(|r| a.row(r).0.iter().map(move |&c| r.abs_diff(c as usize)))
        .max()
        .unwrap_or(0)
}

/// Adjacency of the pattern of A + A^T without self loops, neighbours sorted.
fn symmetric_graph<T: Scalar>(a: &CsrMatrix<T>) -> Vec<Vec<usize>> {
    let n = a.n_rows();
    let mut adj = vec![Vec::new(); n];
    for r in 0..n {
        for &c in a.row(r).0 {
            let c = c as usize;
            if c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for nb in &mut adj {
        nb.sort_unstable();
        nb.dedup();
    }
    adj
}

/// BFS levels from `root` restricted to unvisited vertices.
fn level_structure(adj: &[Vec<usize>], root: usize, done: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    seen[root] = true;
    let mut levels = vec![vec![root]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().expect("nonempty") {
            for &u in &adj[v] {
                if !seen[u] && !done[u] {
                    seen[u] = true;
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        levels.push(next);
    }
    levels
}

/// Double-sweep search for a pseudo-peripheral vertex of `start`'s component.
fn pseudo_peripheral(adj: &[Vec<usize>], start: usize, done: &[bool]) -> usize {
    let mut root = start;
    let mut levels = level_structure(adj, root, done);
    loop {
        let last = levels.last().expect("nonempty");
        let candidate = *last
            .iter()
            .min_by_key(|&&v| (adj[v].len(), v))
            .expect("nonempty level");
        let trial = level_structure(adj, candidate, done);
        if trial.len() > levels.len() {
            root = candidate;
            levels = trial;
        } else {
            return root;
        }
    }
}

/// Reverse Cuthill-McKee permutation and the permuted matrix P A P^T.
pub fn rcm_reorder<T: Scalar>(a: &CsrMatrix<T>) -> Result<(Permutation, CsrMatrix<T>)> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("RCM needs a square matrix".into()));
    }
    let adj = symmetric_graph(a);
    let n = adj.len();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // lowest-degree unvisited vertex, lowest index on ties, seeds each component
        let seed = (0..n)
            .filter(|&v| !done[v])
            .min_by_key(|&v| (adj[v].len(), v))
            .expect("unvisited vertex remains");
        let root = pseudo_peripheral(&adj, seed, &done);
        let mut queue = VecDeque::from([root]);
        done[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut kids: Vec<usize> = adj[v].iter().copied().filter(|&u| !done[u]).collect();
            kids.sort_unstable_by_key(|&u| (adj[u].len(), u));
            for u in kids {
                done[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    let perm = Permutation::new(order)?;
    let permuted = perm.permute_symmetric(a)?;
    Ok((perm, permuted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, tridiagonal, StencilSpec};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sorted_values(a: &CsrMatrix<f64>) -> Vec<f64> {
        let mut v = a.values().to_vec();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn path_stays_banded() {
        let a = tridiagonal(20, -1.0, 2.0, -1.0);
        let (_, b) = rcm_reorder(&a).unwrap();
        assert_eq!(bandwidth(&b), 1);
    }

    #[test]
    fn shuffled_path_is_restored() {
        let a = tridiagonal(50, -1.0, 2.0, -1.0);
        let mut shuffle: Vec<usize> = (0..50).collect();
        shuffle.shuffle(&mut ChaCha8Rng::seed_from_u64(2024));
        let scrambled = Permutation::new(shuffle).unwrap().permute_symmetric(&a).unwrap();
        assert!(bandwidth(&scrambled) > 1);
        let (perm, b) = rcm_reorder(&scrambled).unwrap();
        assert_eq!(bandwidth(&b), 1);
        assert_eq!(sorted_values(&b), sorted_values(&scrambled));
        assert_eq!(perm.apply_inverse(&perm.apply(&(0..50).collect::<Vec<_>>())), (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn grid_bandwidth_bounded() {
        let a = generate(&StencilSpec::laplace2d(4)).unwrap();
        let (_, b) = rcm_reorder(&a).unwrap();
        assert!(bandwidth(&b) <= 4, "bandwidth {}", bandwidth(&b));
    }

    #[test]
    fn disconnected_components() {
        let a = CsrMatrix::from_triplets(
            5,
            5,
            vec![(0, 0, 1.0), (1, 1, 1.0), (1, 3, 2.0), (3, 1, 2.0), (2, 2, 1.0), (3, 3, 1.0), (4, 4, 1.0)],
        )
        .unwrap();
        let (perm, b) = rcm_reorder(&a).unwrap();
        assert_eq!(perm.len(), 5);
        assert_eq!(b.nnz(), a.nnz());
        assert_eq!(bandwidth(&b), 1);
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn rcm_output_is_valid_permutation(seed in 0u64..300) {
            let a = crate::gen::random_sparse(40, 2, 3.0, seed);
            let (perm, b) = rcm_reorder(&a).unwrap();
            let mut seen = perm.new_to_old().to_vec();
            seen.sort_unstable();
            proptest::prop_assert_eq!(seen, (0..40).collect::<Vec<_>>());
            proptest::prop_assert_eq!(sorted_values(&b), sorted_values(&a));
            let back = perm.inverse().permute_symmetric(&b).unwrap();
            proptest::prop_assert_eq!(back, a);
        }
    }
}
