use super::{combinations, shuffles, sort_sign, MultilinearError};
use crate::ratlin::{kernel_basis, q, rank, MatrixQ, SubspaceQ, Q};
use num_traits::Zero;
use rand::Rng;
use std::collections::BTreeMap;

/// Antisymmetric `n`-linear map `Vⁿ → V` on `V = ℚ^dim`, stored by its
/// values on strictly increasing basis tuples. Arity 0 is an element of `V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiMap {
    dim: usize,
    arity: usize,
    coeffs: BTreeMap<Vec<usize>, Vec<Q>>,
}

impl MultiMap {
    pub fn zero(dim: usize, arity: usize) -> Self {
        let coeffs = if arity <= dim {
            combinations(dim, arity).into_iter().map(|c| (c, vec![Q::zero(); dim])).collect()
        } else {
            BTreeMap::new()
        };
        MultiMap { dim, arity, coeffs }
    }

    pub fn element(v: Vec<Q>) -> Self {
        let mut m = Self::zero(v.len(), 0);
        m.coeffs.insert(vec![], v);
        m
    }

    /// `μ(e_α, e_β) = Σ_γ c^γ_{αβ} e_γ` from entries `(α, β, γ, c)`; the
    /// antisymmetric partner `(β, α)` is filled in. Conflicting entries are rejected.
    pub fn from_structure_constants(dim: usize, entries: &[(usize, usize, usize, Q)]) -> Result<Self, String> {
        let mut m = Self::zero(dim, 2);
        let mut seen: BTreeMap<(usize, usize, usize), Q> = BTreeMap::new();
        for (a, b, g, c) in entries {
            if *a >= dim || *b >= dim || *g >= dim {
                return Err(format!("index out of range in ({a},{b},{g})"));
            }
            if a == b {
                if !c.is_zero() {
                    return Err(format!("diagonal entry ({a},{a},{g}) must vanish"));
                }
                continue;
            }
            let (key, val) = if a < b { ((*a, *b, *g), c.clone()) } else { ((*b, *a, *g), -c.clone()) };
            if let Some(old) = seen.get(&key) {
                if *old != val {
                    return Err(format!("entries for ({a},{b},{g}) violate antisymmetry"));
                }
                continue;
            }
            seen.insert(key, val.clone());
            m.coeffs.get_mut(&vec![key.0, key.1]).unwrap()[key.2] = val;
        }
        Ok(m)
    }

    /// `so(3)`: `c^γ_{αβ} = ε_{αβγ}`.
    pub fn so3() -> Self {
        let one = q(1);
        Self::from_structure_constants(3, &[(0, 1, 2, one.clone()), (1, 2, 0, one.clone()), (2, 0, 1, one)]).unwrap()
    }

    /// Heisenberg algebra `[e1, e2] = e3`.
    pub fn heisenberg() -> Self {
        Self::from_structure_constants(3, &[(0, 1, 2, q(1))]).unwrap()
    }

    /// Two-dimensional non-abelian algebra `[e1, e2] = e2`.
    pub fn aff1() -> Self {
        Self::from_structure_constants(2, &[(0, 1, 1, q(1))]).unwrap()
    }

    pub fn random<R: Rng>(dim: usize, arity: usize, range: i64, density: f64, rng: &mut R) -> Self {
        let mut m = Self::zero(dim, arity);
        for v in m.coeffs.values_mut() {
            for x in v.iter_mut() {
                if rng.gen_bool(density) {
                    *x = q(rng.gen_range(-range..=range));
                }
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<usize>, Vec<Q>> {
        &self.coeffs
    }

    pub fn set(&mut self, sorted: &[usize], value: Vec<Q>) {
        assert_eq!(value.len(), self.dim);
        *self.coeffs.get_mut(sorted).expect("index tuple must be strictly increasing") = value;
    }

    /// Structure constant `c^γ` on the given (any order) basis tuple.
    pub fn eval_basis(&self, idx: &[usize]) -> Vec<Q> {
        match sort_sign(idx) {
            None => vec![Q::zero(); self.dim],
            Some((s, odd)) => {
                let v = &self.coeffs[&s];
                if odd {
                    v.iter().map(|x| -x).collect()
                } else {
                    v.clone()
                }
            }
        }
    }

    /// Evaluation on arbitrary vectors (multilinear expansion over basis tuples).
    pub fn eval(&self, args: &[Vec<Q>]) -> Vec<Q> {
        assert_eq!(args.len(), self.arity);
        let mut out = vec![Q::zero(); self.dim];
        self.expand(args, 0, &mut Vec::new(), Q::from_integer(1.into()), &mut out);
        out
    }

    fn expand(&self, args: &[Vec<Q>], pos: usize, idx: &mut Vec<usize>, coef: Q, out: &mut [Q]) {
        if pos == args.len() {
            if let Some((s, odd)) = sort_sign(idx) {
                for (o, c) in out.iter_mut().zip(&self.coeffs[&s]) {
                    if !c.is_zero() {
                        if odd {
                            *o -= &coef * c;
                        } else {
                            *o += &coef * c;
                        }
                    }
                }
            }
            return;
        }
        for (a, x) in args[pos].iter().enumerate() {
            if x.is_zero() || idx.contains(&a) {
                continue;
            }
            idx.push(a);
            self.expand(args, pos + 1, idx, &coef * x, out);
            idx.pop();
        }
    }

    pub fn add(&self, other: &MultiMap) -> MultiMap {
        assert_eq!((self.dim, self.arity), (other.dim, other.arity));
        let coeffs = self
            .coeffs
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().zip(&other.coeffs[k]).map(|(a, b)| a + b).collect()))
            .collect();
        MultiMap { dim: self.dim, arity: self.arity, coeffs }
    }

    pub fn scale(&self, s: &Q) -> MultiMap {
        let coeffs = self.coeffs.iter().map(|(k, v)| (k.clone(), v.iter().map(|a| a * s).collect())).collect();
        MultiMap { dim: self.dim, arity: self.arity, coeffs }
    }

    pub fn sub(&self, other: &MultiMap) -> MultiMap {
        self.add(&other.scale(&q(-1)))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().flatten().all(|x| x.is_zero())
    }

    /// First basis tuple with a nonzero value.
    pub fn first_nonzero(&self) -> Option<(Vec<usize>, Vec<Q>)> {
        self.coeffs.iter().find(|(_, v)| v.iter().any(|x| !x.is_zero())).map(|(k, v)| (k.clone(), v.clone()))
    }

    /// Coordinates in the basis `(tuple, γ)` ordered tuple-major.
    pub fn to_vec(&self) -> Vec<Q> {
        self.coeffs.values().flatten().cloned().collect()
    }

    pub fn from_vec(dim: usize, arity: usize, v: &[Q]) -> Self {
        let mut m = Self::zero(dim, arity);
        let mut it = v.iter();
        for val in m.coeffs.values_mut() {
            for x in val.iter_mut() {
                *x = it.next().expect("vector length").clone();
            }
        }
        m
    }

    pub fn space_dim(dim: usize, arity: usize) -> usize {
        Self::zero(dim, arity).coeffs.len() * dim
    }

    pub fn basis(dim: usize, arity: usize) -> Vec<MultiMap> {
        let n = Self::space_dim(dim, arity);
        (0..n)
            .map(|i| {
                let mut v = vec![Q::zero(); n];
                v[i] = q(1);
                Self::from_vec(dim, arity, &v)
            })
            .collect()
    }

    /// `(f⋄g)(x_1..x_{n+m−1}) = Σ_π (−1)^π f(g(x_π(1..n)), x_π(n+1..))` over `(n, m−1)`-shuffles.
    pub fn diamond(&self, g: &MultiMap) -> Result<MultiMap, MultilinearError> {
        if self.dim != g.dim {
            return Err(MultilinearError::DimMismatch(self.dim, g.dim));
        }
        let (m, n) = (self.arity, g.arity);
        if m == 0 {
            return Ok(Self::zero(self.dim, n.saturating_sub(1)));
        }
        let out_arity = n + m - 1;
        let mut out = Self::zero(self.dim, out_arity);
        let sh = shuffles(n, m - 1);
        let keys: Vec<Vec<usize>> = out.coeffs.keys().cloned().collect();
        for key in keys {
            let mut acc = vec![Q::zero(); self.dim];
            for (first, second, odd) in &sh {
                let gi: Vec<usize> = first.iter().map(|&i| key[i]).collect();
                let gv = g.eval_basis(&gi);
                if gv.iter().all(|x| x.is_zero()) {
                    continue;
                }
                let rest: Vec<usize> = second.iter().map(|&i| key[i]).collect();
                for (gamma, c) in gv.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let mut idx = vec![gamma];
                    idx.extend(&rest);
                    let fv = self.eval_basis(&idx);
                    for (a, x) in acc.iter_mut().zip(&fv) {
                        if !x.is_zero() {
                            if *odd {
                                *a -= c * x;
                            } else {
                                *a += c * x;
                            }
                        }
                    }
                }
            }
            out.coeffs.insert(key, acc);
        }
        Ok(out)
    }

    /// `[f,g]_NR = f⋄g − (−1)^{(m−1)(n−1)} g⋄f`.
    pub fn nr_bracket(&self, g: &MultiMap) -> Result<MultiMap, MultilinearError> {
        if self.dim != g.dim {
            return Err(MultilinearError::DimMismatch(self.dim, g.dim));
        }
        if self.arity + g.arity == 0 {
            return Ok(MultiMap::zero(self.dim, 0));
        }
        let fg = self.diamond(g)?;
        let gf = g.diamond(self)?;
        let odd = (self.arity as i64 - 1) * (g.arity as i64 - 1) % 2 != 0;
        Ok(if odd { fg.add(&gf) } else { fg.sub(&gf) })
    }

    pub fn is_lie(&self) -> bool {
        self.arity == 2 && jacobiator(self).is_zero()
    }
}

/// `J(x,y,z) = μ(μ(x,y),z) + μ(μ(y,z),x) + μ(μ(z,x),y)` by direct evaluation on basis triples.
pub fn jacobiator(mu: &MultiMap) -> MultiMap {
    let d = mu.dim;
    let mut out = MultiMap::zero(d, 3);
    let e = |i: usize| {
        let mut v = vec![Q::zero(); d];
        v[i] = q(1);
        v
    };
    let keys: Vec<Vec<usize>> = out.coeffs.keys().cloned().collect();
    for key in keys {
        let (x, y, z) = (e(key[0]), e(key[1]), e(key[2]));
        let mut acc = vec![Q::zero(); d];
        for (a, b, c) in [(&x, &y, &z), (&y, &z, &x), (&z, &x, &y)] {
            let ab = mu.eval(&[a.clone(), b.clone()]);
            let t = mu.eval(&[ab, c.clone()]);
            for (s, v) in acc.iter_mut().zip(t) {
                *s += v;
            }
        }
        out.coeffs.insert(key, acc);
    }
    out
}

/// `δ_μ f = [μ, f]_NR`.
pub fn ce_differential(mu: &MultiMap, f: &MultiMap) -> Result<MultiMap, MultilinearError> {
    if mu.arity != 2 || !mu.is_lie() {
        return Err(MultilinearError::NotLie);
    }
    mu.nr_bracket(f)
}

/// The two-sum Chevalley–Eilenberg formula with adjoint coefficients:
/// `Σ_i (−1)^{i+1} μ(x_i, f(..x̂_i..)) + Σ_{i<j} (−1)^{i+j} f(μ(x_i,x_j), ..x̂_i..x̂_j..)`.
pub fn ce_differential_explicit(mu: &MultiMap, f: &MultiMap) -> MultiMap {
    let d = mu.dim;
    let n = f.arity;
    let mut out = MultiMap::zero(d, n + 1);
    let keys: Vec<Vec<usize>> = out.coeffs.keys().cloned().collect();
    for key in keys {
        let mut acc = vec![Q::zero(); d];
        for i in 0..=n {
            let rest: Vec<usize> = key.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &x)| x).collect();
            let fv = f.eval_basis(&rest);
            let mut ei = vec![Q::zero(); d];
            ei[key[i]] = q(1);
            let t = mu.eval(&[ei, fv]);
            for (a, v) in acc.iter_mut().zip(t) {
                // (−1)^{i+1} with 1-based i ⇒ (−1)^{i} with 0-based
                if i % 2 == 0 {
                    *a += v;
                } else {
                    *a -= v;
                }
            }
        }
        for i in 0..=n {
            for j in (i + 1)..=n {
                let br = mu.eval_basis(&[key[i], key[j]]);
                let rest: Vec<Vec<Q>> = key
                    .iter()
                    .enumerate()
                    .filter(|(l, _)| *l != i && *l != j)
                    .map(|(_, &x)| {
                        let mut v = vec![Q::zero(); d];
                        v[x] = q(1);
                        v
                    })
                    .collect();
                let mut args = vec![br];
                args.extend(rest);
                let t = f.eval(&args);
                for (a, v) in acc.iter_mut().zip(t) {
                    if (i + j) % 2 == 0 {
                        *a += v;
                    } else {
                        *a -= v;
                    }
                }
            }
        }
        out.coeffs.insert(key, acc);
    }
    out
}

/// Matrix of `δ_μ : 𝒜^k → 𝒜^{k+1}` in the coordinate bases of [`MultiMap::to_vec`].
pub fn delta_matrix(mu: &MultiMap, k: usize) -> MatrixQ {
    let d = mu.dim;
    let rows = MultiMap::space_dim(d, k + 1);
    let cols: Vec<Vec<Q>> = MultiMap::basis(d, k).iter().map(|b| mu.nr_bracket(b).unwrap().to_vec()).collect();
    if cols.is_empty() {
        return MatrixQ::zeros(rows, 0);
    }
    MatrixQ::from_cols(rows, &cols)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CeCohomology {
    pub degree: usize,
    pub dim: usize,
    pub cocycles_dim: usize,
    pub coboundaries_dim: usize,
    /// Cocycles spanning a complement of the coboundaries.
    pub representatives: Vec<MultiMap>,
}

/// `H^k` of `(𝒜^•(𝔤), δ_μ)`.
pub fn ce_cohomology(mu: &MultiMap, k: usize) -> Result<CeCohomology, MultilinearError> {
    if !mu.is_lie() {
        return Err(MultilinearError::NotLie);
    }
    let d = mu.dim;
    let z = kernel_basis(&delta_matrix(mu, k));
    let b = if k == 0 {
        SubspaceQ::zero(MultiMap::space_dim(d, 0))
    } else {
        let m = delta_matrix(mu, k - 1);
        SubspaceQ::span(m.rows(), &m.transpose().row_vecs())
    };
    debug_assert!(k == 0 || rank(&delta_matrix(mu, k - 1)) == b.dim());
    let reps = b.complement_in(&z).iter().map(|v| MultiMap::from_vec(d, k, v)).collect::<Vec<_>>();
    Ok(CeCohomology { degree: k, dim: z.dim() - b.dim(), cocycles_dim: z.dim(), coboundaries_dim: b.dim(), representatives: reps })
}
