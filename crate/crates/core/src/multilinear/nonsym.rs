use super::MultilinearError;
use crate::ratlin::{q, Q};
use num_traits::Zero;

/// Multilinear map `Vⁿ → V` without symmetry, stored as the full tensor
/// `c^γ_{α₁…α_n}`; index `(α₁…α_n, γ)` is row-major with `γ` last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonSymMultiMap {
    dim: usize,
    arity: usize,
    data: Vec<Q>,
}

impl NonSymMultiMap {
    pub fn zero(dim: usize, arity: usize) -> Self {
        NonSymMultiMap { dim, arity, data: vec![Q::zero(); dim.pow(arity as u32 + 1)] }
    }

    pub fn from_fn(dim: usize, arity: usize, mut f: impl FnMut(&[usize]) -> Vec<Q>) -> Self {
        let mut m = Self::zero(dim, arity);
        for (t, idx) in tuples(dim, arity).into_iter().enumerate() {
            let v = f(&idx);
            m.data[t * dim..(t + 1) * dim].clone_from_slice(&v);
        }
        m
    }

    /// Multiplication of `n×n` matrices in the basis `E_{ij}` (index `i·n + j`).
    pub fn matrix_algebra(n: usize) -> Self {
        let d = n * n;
        Self::from_fn(d, 2, |ix| {
            let (a, b) = (ix[0], ix[1]);
            let mut v = vec![Q::zero(); d];
            if a % n == b / n {
                v[(a / n) * n + b % n] = q(1);
            }
            v
        })
    }

    /// Octonions on `e_0 = 1, e_1..e_7` with the Fano triples
    /// (1,2,3),(1,4,5),(1,7,6),(2,4,6),(2,5,7),(3,4,7),(3,6,5).
    pub fn octonions() -> Self {
        const TRIPLES: [(usize, usize, usize); 7] = [(1, 2, 3), (1, 4, 5), (1, 7, 6), (2, 4, 6), (2, 5, 7), (3, 4, 7), (3, 6, 5)];
        Self::from_fn(8, 2, |ix| {
            let (a, b) = (ix[0], ix[1]);
            let mut v = vec![Q::zero(); 8];
            if a == 0 {
                v[b] = q(1);
            } else if b == 0 {
                v[a] = q(1);
            } else if a == b {
                v[0] = q(-1);
            } else {
                for &(i, j, k) in &TRIPLES {
                    for (x, y, z) in [(i, j, k), (j, k, i), (k, i, j)] {
                        if (a, b) == (x, y) {
                            v[z] = q(1);
                        } else if (a, b) == (y, x) {
                            v[z] = q(-1);
                        }
                    }
                }
            }
            v
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i) * self.dim
    }

    pub fn eval_basis(&self, idx: &[usize]) -> &[Q] {
        let o = self.offset(idx);
        &self.data[o..o + self.dim]
    }

    pub fn eval(&self, args: &[Vec<Q>]) -> Vec<Q> {
        assert_eq!(args.len(), self.arity);
        let mut out = vec![Q::zero(); self.dim];
        for idx in tuples(self.dim, self.arity) {
            let mut c = q(1);
            for (a, &i) in args.iter().zip(&idx) {
                c *= &a[i];
                if c.is_zero() {
                    break;
                }
            }
            if c.is_zero() {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.eval_basis(&idx)) {
                *o += &c * v;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn add(&self, o: &Self) -> Self {
        NonSymMultiMap { dim: self.dim, arity: self.arity, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: &Q) -> Self {
        NonSymMultiMap { dim: self.dim, arity: self.arity, data: self.data.iter().map(|a| a * s).collect() }
    }

    /// `(f ∘_i g)(x_1..) = f(x_1..x_{i−1}, g(x_i..x_{i+m−1}), ..)` with 1-based `i`.
    pub fn compose_i(&self, i: usize, g: &Self) -> Self {
        let (n, m) = (self.arity, g.arity);
        assert!(i >= 1 && i <= n);
        Self::from_fn(self.dim, n + m - 1, |idx| {
            let inner = g.eval_basis(&idx[i - 1..i - 1 + m]);
            let mut out = vec![Q::zero(); self.dim];
            for (gamma, c) in inner.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let mut fi: Vec<usize> = idx[..i - 1].to_vec();
                fi.push(gamma);
                fi.extend(&idx[i - 1 + m..]);
                for (o, v) in out.iter_mut().zip(self.eval_basis(&fi)) {
                    *o += c * v;
                }
            }
            out
        })
    }

    /// `f ∘ g = Σ_i (−1)^{(i−1)(n−1)} f ∘_i g`, with `n` the arity of `g`.
    pub fn gerstenhaber_product(&self, g: &Self) -> Self {
        let n = g.arity;
        let mut out = Self::zero(self.dim, (self.arity + n).saturating_sub(1));
        if self.arity == 0 {
            return out;
        }
        for i in 1..=self.arity {
            let t = self.compose_i(i, g);
            let odd = ((i as i64 - 1) * (n as i64 - 1)).rem_euclid(2) == 1;
            out = if odd { out.add(&t.scale(&q(-1))) } else { out.add(&t) };
        }
        out
    }

    /// `[f,g]_G = f ∘ g − (−1)^{(m−1)(n−1)} g ∘ f`.
    pub fn gerstenhaber_bracket(&self, g: &Self) -> Result<Self, MultilinearError> {
        if self.dim != g.dim {
            return Err(MultilinearError::DimMismatch(self.dim, g.dim));
        }
        let (m, n) = (self.arity as i64, g.arity as i64);
        let fg = self.gerstenhaber_product(g);
        let gf = g.gerstenhaber_product(self);
        Ok(if ((m - 1) * (n - 1)).rem_euclid(2) == 1 { fg.add(&gf) } else { fg.add(&gf.scale(&q(-1))) })
    }

    pub fn is_associative(&self) -> bool {
        self.arity == 2 && associator(self).is_zero()
    }
}

/// `(xy)z − x(yz)` on all basis triples.
pub fn associator(mu: &NonSymMultiMap) -> NonSymMultiMap {
    assert_eq!(mu.arity, 2);
    let d = mu.dim;
    let e = |i: usize| {
        let mut v = vec![Q::zero(); d];
        v[i] = q(1);
        v
    };
    NonSymMultiMap::from_fn(d, 3, |ix| {
        let l = mu.eval(&[mu.eval_basis(&ix[..2]).to_vec(), e(ix[2])]);
        let r = mu.eval(&[e(ix[0]), mu.eval_basis(&ix[1..]).to_vec()]);
        l.iter().zip(&r).map(|(a, b)| a - b).collect()
    })
}

fn tuples(dim: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..dim).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}
