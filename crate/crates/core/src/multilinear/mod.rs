//! Antisymmetric multilinear maps, multiderivations and Grassmann-algebra
//! derivations, with the Nijenhuis–Richardson, Gerstenhaber and
//! Crainic–Moerdijk brackets between them.

mod grassmann;
mod iso;
mod multider;
mod multimap;
mod nonsym;

pub use grassmann::{algebraic_decompose, form_eval, grassmann_l, grassmann_r, GrassmannDerivation};
pub use iso::{iso_i, iso_i_eval, iso_i_inv, lie_poisson_tensor};
pub use multider::{tm_cohomology_dims, MultiDerivation, Section};
pub use multimap::{ce_cohomology, ce_differential, ce_differential_explicit, delta_matrix, jacobiator, CeCohomology, MultiMap};
pub use nonsym::{associator, NonSymMultiMap};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MultilinearError {
    #[error("dimension mismatch ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("bundle data of the two multiderivations differ")]
    BundleMismatch,
    #[error("degrees differ")]
    DegreeMismatch,
    #[error("structure does not satisfy the Jacobi identity")]
    NotLie,
    #[error("anchor is not surjective (rank {rank}, base dimension {base})")]
    AnchorNotSurjective { rank: usize, base: usize },
    #[error("multivector field is not homogeneous of the required degree")]
    NotHomogeneous,
}

/// All strictly increasing `k`-tuples from `0..n`, in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Sorts an index tuple; returns the sorted tuple and whether the
/// permutation is odd, or `None` when an index repeats.
pub fn sort_sign(idx: &[usize]) -> Option<(Vec<usize>, bool)> {
    let mut v = idx.to_vec();
    let mut odd = false;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            odd = !odd;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, odd))
    }
}

/// `(p,q)`-shuffles of positions `0..p+q`: the first block, the second
/// block and whether the shuffle is odd.
pub fn shuffles(p: usize, q: usize) -> Vec<(Vec<usize>, Vec<usize>, bool)> {
    combinations(p + q, p)
        .into_iter()
        .map(|first| {
            let second: Vec<usize> = (0..p + q).filter(|i| !first.contains(i)).collect();
            let inv: usize = first.iter().enumerate().map(|(i, &s)| s - i).sum();
            (first, second, inv % 2 == 1)
        })
        .collect()
}
