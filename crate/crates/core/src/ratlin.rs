//! Exact linear algebra over the rationals.
//!
//! Rank and kernels are computed with fraction-free (Bareiss) elimination on
//! an integer-scaled copy of the matrix; the surviving pivot rows are then
//! normalized into reduced row echelon form. Subspaces are stored in that
//! canonical form, so equality of subspaces is equality of structs.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use thiserror::Error;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p"`, `"p/q"` or `"-p/q"`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().ok()?;
        let d: BigInt = b.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Q::new(n, d))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(Q::from_integer(n))
    }
}

pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RatlinError {
    #[error("second subspace is not contained in the first")]
    NotSubspace,
    #[error("pairing is degenerate")]
    DegeneratePairing,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Clone, PartialEq, Eq)]
pub struct MatrixQ {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl fmt::Debug for MatrixQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MatrixQ {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| fmt_q(self.get(i, j))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl MatrixQ {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatrixQ { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Q::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        MatrixQ { rows: r, cols: c, data }
    }

    /// Builds a matrix with the given vectors as columns; `dim` is the column length.
    pub fn from_cols(dim: usize, cols: &[Vec<Q>]) -> Self {
        let mut m = Self::zeros(dim, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), dim);
            for (i, x) in c.iter().enumerate() {
                m.set(i, j, x.clone());
            }
        }
        m
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<Q> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<Q> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<Q>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &MatrixQ) -> MatrixQ {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let idx = i * out.cols + j;
                        out.data[idx] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = Q::zero();
                for j in 0..self.cols {
                    let a = self.get(i, j);
                    if !a.is_zero() && !v[j].is_zero() {
                        s += a * &v[j];
                    }
                }
                s
            })
            .collect()
    }

    /// Row vector times matrix, `yᵀM`.
    pub fn vec_mul(&self, y: &[Q]) -> Vec<Q> {
        self.transpose().mul_vec(y)
    }

    pub fn add(&self, other: &MatrixQ) -> MatrixQ {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        MatrixQ {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &MatrixQ) -> MatrixQ {
        self.add(&other.scale(&q(-1)))
    }

    pub fn scale(&self, s: &Q) -> MatrixQ {
        MatrixQ { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose().scale(&q(-1))
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &MatrixQ) -> MatrixQ {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        MatrixQ { rows: self.rows + other.rows, cols: self.cols, data }
    }

    pub fn hstack(&self, other: &MatrixQ) -> MatrixQ {
        self.transpose().vstack(&other.transpose()).transpose()
    }

    pub fn inverse(&self) -> Option<MatrixQ> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return Some(self.clone());
        }
        let aug = self.hstack(&MatrixQ::identity(n));
        let (r, piv) = rref(&aug);
        if piv.len() < n || piv[n - 1] != n - 1 {
            return None;
        }
        let mut inv = MatrixQ::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, r[i][n + j].clone());
            }
        }
        Some(inv)
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| to_f64(self.get(i, j)))
    }
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).filter(|(x, y)| !x.is_zero() && !y.is_zero()).map(|(x, y)| x * y).sum()
}

fn lcm_denoms(row: &[Q]) -> BigInt {
    row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

/// Fraction-free forward elimination. Returns the integer echelon rows
/// (nonzero only) and their pivot columns.
fn bareiss_echelon(m: &MatrixQ) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    let (rows, cols) = (m.rows, m.cols);
    let mut a: Vec<Vec<BigInt>> = (0..rows)
        .map(|i| {
            let row = m.row(i);
            let l = lcm_denoms(&row);
            row.iter().map(|x| (x * Q::from_integer(l.clone())).to_integer()).collect()
        })
        .collect();
    let mut prev = BigInt::one();
    let mut r = 0;
    let mut pivots = Vec::new();
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        for i in (r + 1)..rows {
            for j in (c + 1)..cols {
                let v = (&a[r][c] * &a[i][j] - &a[i][c] * &a[r][j]) / &prev;
                a[i][j] = v;
            }
            a[i][c] = BigInt::zero();
        }
        prev = a[r][c].clone();
        pivots.push(c);
        r += 1;
    }
    a.truncate(r);
    (a, pivots)
}

/// Reduced row echelon form: nonzero rows and pivot columns.
pub fn rref(m: &MatrixQ) -> (Vec<Vec<Q>>, Vec<usize>) {
    let (ech, pivots) = bareiss_echelon(m);
    let mut rows: Vec<Vec<Q>> = ech
        .into_iter()
        .zip(&pivots)
        .map(|(row, &p)| {
            let lead = Q::from_integer(row[p].clone());
            row.into_iter().map(|x| Q::from_integer(x) / &lead).collect()
        })
        .collect();
    for k in (0..rows.len()).rev() {
        let p = pivots[k];
        for i in 0..k {
            let f = rows[i][p].clone();
            if f.is_zero() {
                continue;
            }
            let src = rows[k].clone();
            for (x, s) in rows[i].iter_mut().zip(&src).skip(p) {
                if !s.is_zero() {
                    *x -= &f * s;
                }
            }
        }
    }
    (rows, pivots)
}

pub fn rank(m: &MatrixQ) -> usize {
    bareiss_echelon(m).1.len()
}

pub fn kernel_basis(m: &MatrixQ) -> SubspaceQ {
    let (r, piv) = rref(m);
    let n = m.cols;
    let mut basis = Vec::new();
    let mut is_piv = vec![false; n];
    for &p in &piv {
        is_piv[p] = true;
    }
    for f in (0..n).filter(|&j| !is_piv[j]) {
        let mut v = vec![Q::zero(); n];
        v[f] = Q::one();
        for (k, &p) in piv.iter().enumerate() {
            v[p] = -r[k][f].clone();
        }
        basis.push(v);
    }
    SubspaceQ::span(n, &basis)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solve {
    Solution(Vec<Q>),
    /// `y` with `yᵀM = 0` and `yᵀb ≠ 0`.
    Inconsistent(Vec<Q>),
}

impl Solve {
    pub fn solution(&self) -> Option<&Vec<Q>> {
        match self {
            Solve::Solution(x) => Some(x),
            Solve::Inconsistent(_) => None,
        }
    }
}

/// Solves `M x = b`. The particular solution sets every free variable to 0.
pub fn solve(m: &MatrixQ, b: &[Q]) -> Solve {
    assert_eq!(m.rows, b.len(), "rhs length");
    let aug = m.hstack(&MatrixQ::from_cols(b.len(), &[b.to_vec()]));
    let (r, piv) = rref(&aug);
    if piv.last() == Some(&m.cols) {
        let left = kernel_basis(&m.transpose());
        for y in left.basis() {
            if !dot(y, b).is_zero() {
                return Solve::Inconsistent(y.clone());
            }
        }
        unreachable!("inconsistent system without a left-kernel certificate");
    }
    let mut x = vec![Q::zero(); m.cols];
    for (k, &p) in piv.iter().enumerate() {
        x[p] = r[k][m.cols].clone();
    }
    Solve::Solution(x)
}

/// A subspace of ℚⁿ stored as the nonzero rows of a reduced row echelon form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SubspaceQ {
    ambient: usize,
    basis: Vec<Vec<Q>>,
}

impl SubspaceQ {
    pub fn span(ambient: usize, vectors: &[Vec<Q>]) -> Self {
        if vectors.is_empty() {
            return Self::zero(ambient);
        }
        let m = MatrixQ::from_rows(vectors.to_vec());
        assert_eq!(m.cols, ambient, "vector length");
        let (r, _) = rref(&m);
        SubspaceQ { ambient, basis: r }
    }

    pub fn zero(ambient: usize) -> Self {
        SubspaceQ { ambient, basis: Vec::new() }
    }

    pub fn full(ambient: usize) -> Self {
        Self::span(ambient, &MatrixQ::identity(ambient).row_vecs())
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Q>] {
        &self.basis
    }

    pub fn contains(&self, v: &[Q]) -> bool {
        if v.iter().all(|x| x.is_zero()) {
            return true;
        }
        if self.basis.is_empty() {
            return false;
        }
        let m = MatrixQ::from_cols(self.ambient, &self.basis);
        solve(&m, v).solution().is_some()
    }

    pub fn is_subspace_of(&self, other: &SubspaceQ) -> bool {
        self.basis.iter().all(|v| other.contains(v))
    }

    pub fn sum(&self, other: &SubspaceQ) -> SubspaceQ {
        let mut v = self.basis.clone();
        v.extend(other.basis.iter().cloned());
        Self::span(self.ambient, &v)
    }

    pub fn intersection(&self, other: &SubspaceQ) -> SubspaceQ {
        if self.dim() == 0 || other.dim() == 0 {
            return Self::zero(self.ambient);
        }
        // a·A = b·B  ⇔  (a, −b) ∈ ker [Aᵀ | −Bᵀ]
        let a = MatrixQ::from_cols(self.ambient, &self.basis);
        let b = MatrixQ::from_cols(self.ambient, &other.basis).scale(&q(-1));
        let k = kernel_basis(&a.hstack(&b));
        let vecs: Vec<Vec<Q>> = k.basis.iter().map(|c| a.mul_vec(&c[..self.dim()])).collect();
        Self::span(self.ambient, &vecs)
    }

    /// Coordinates of `v` in the stored basis.
    pub fn coordinates(&self, v: &[Q]) -> Option<Vec<Q>> {
        let m = MatrixQ::from_cols(self.ambient, &self.basis);
        solve(&m, v).solution().cloned()
    }

    /// A deterministic complement of `self` inside `outer` (which must contain it).
    pub fn complement_in(&self, outer: &SubspaceQ) -> Vec<Vec<Q>> {
        let mut acc = self.clone();
        let mut out = Vec::new();
        for v in &outer.basis {
            if !acc.contains(v) {
                out.push(v.clone());
                acc = acc.sum(&Self::span(self.ambient, &[v.clone()]));
            }
        }
        out
    }
}

pub fn quotient_dim(a: &SubspaceQ, b: &SubspaceQ) -> Result<usize, RatlinError> {
    if !b.is_subspace_of(a) {
        return Err(RatlinError::NotSubspace);
    }
    Ok(a.dim() - b.dim())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    Symmetric,
    Antisymmetric,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilinearFormQ {
    pub matrix: MatrixQ,
    pub kind: FormKind,
}

impl BilinearFormQ {
    pub fn symmetric(matrix: MatrixQ) -> Result<Self, RatlinError> {
        if !matrix.is_symmetric() {
            return Err(RatlinError::Shape("form is not symmetric".into()));
        }
        Ok(BilinearFormQ { matrix, kind: FormKind::Symmetric })
    }

    pub fn antisymmetric(matrix: MatrixQ) -> Result<Self, RatlinError> {
        if !matrix.is_antisymmetric() {
            return Err(RatlinError::Shape("form is not antisymmetric".into()));
        }
        Ok(BilinearFormQ { matrix, kind: FormKind::Antisymmetric })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn eval(&self, u: &[Q], v: &[Q]) -> Q {
        dot(u, &self.matrix.mul_vec(v))
    }

    pub fn is_nondegenerate(&self) -> bool {
        rank(&self.matrix) == self.dim()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureNormalForm {
    pub plus: usize,
    pub minus: usize,
    pub zeros: usize,
    /// `Tᵀ g T` is diagonal.
    pub transform: MatrixQ,
    pub diagonal: Vec<Q>,
}

/// Congruence diagonalization of a symmetric form over ℚ.
pub fn signature_normal_form(g: &BilinearFormQ) -> SignatureNormalForm {
    let n = g.dim();
    let mut a = g.matrix.clone();
    let mut t = MatrixQ::identity(n);
    // column op c_j += f·c_i together with the matching row op
    let add = |a: &mut MatrixQ, t: &mut MatrixQ, j: usize, i: usize, f: &Q| {
        for r in 0..n {
            let v = a.get(r, j) + f * a.get(r, i);
            a.set(r, j, v);
            let w = t.get(r, j) + f * t.get(r, i);
            t.set(r, j, w);
        }
        for c in 0..n {
            let v = a.get(j, c) + f * a.get(i, c);
            a.set(j, c, v);
        }
    };
    for i in 0..n {
        if a.get(i, i).is_zero() {
            if let Some(j) = ((i + 1)..n).find(|&j| !a.get(j, j).is_zero()) {
                // swap basis vectors i and j
                for r in 0..n {
                    let (x, y) = (a.get(r, i).clone(), a.get(r, j).clone());
                    a.set(r, i, y);
                    a.set(r, j, x);
                    let (x, y) = (t.get(r, i).clone(), t.get(r, j).clone());
                    t.set(r, i, y);
                    t.set(r, j, x);
                }
                for c in 0..n {
                    let (x, y) = (a.get(i, c).clone(), a.get(j, c).clone());
                    a.set(i, c, y);
                    a.set(j, c, x);
                }
            } else if let Some(j) = ((i + 1)..n).find(|&j| !a.get(i, j).is_zero()) {
                add(&mut a, &mut t, i, j, &Q::one());
            }
        }
        let d = a.get(i, i).clone();
        if d.is_zero() {
            continue;
        }
        for j in (i + 1)..n {
            let f = -(a.get(i, j) / &d);
            if !f.is_zero() {
                add(&mut a, &mut t, j, i, &f);
            }
        }
    }
    let diagonal: Vec<Q> = (0..n).map(|i| a.get(i, i).clone()).collect();
    SignatureNormalForm {
        plus: diagonal.iter().filter(|x| x.is_positive()).count(),
        minus: diagonal.iter().filter(|x| x.is_negative()).count(),
        zeros: diagonal.iter().filter(|x| x.is_zero()).count(),
        transform: t,
        diagonal,
    }
}

/// `{v : pairing(v, w) = 0 for all w ∈ W}`.
pub fn annihilator(w: &SubspaceQ, pairing: &BilinearFormQ) -> Result<SubspaceQ, RatlinError> {
    if !pairing.is_nondegenerate() {
        return Err(RatlinError::DegeneratePairing);
    }
    Ok(orthogonal(w, &pairing.matrix))
}

/// Orthogonal space with respect to an arbitrary (possibly degenerate) Gram matrix.
pub fn orthogonal(w: &SubspaceQ, gram: &MatrixQ) -> SubspaceQ {
    let n = w.ambient();
    if w.dim() == 0 {
        return SubspaceQ::full(n);
    }
    // v ⊥ w  ⇔  vᵀ G w = 0  ⇔  (G w)·v = 0
    let rows: Vec<Vec<Q>> = w.basis().iter().map(|v| gram.mul_vec(v)).collect();
    kernel_basis(&MatrixQ::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_basics() {
        assert_eq!(rank(&MatrixQ::zeros(3, 3)), 0);
        assert_eq!(rank(&MatrixQ::identity(4)), 4);
        let m = MatrixQ::from_i64(&[&[1, 1], &[2, 2]]);
        assert_eq!(rank(&m), 1);
        let k = kernel_basis(&m);
        assert_eq!(k, SubspaceQ::span(2, &[vec![q(1), q(-1)]]));
    }

    #[test]
    fn kernel_of_identity_is_zero() {
        assert_eq!(kernel_basis(&MatrixQ::identity(3)).dim(), 0);
    }

    #[test]
    fn solve_identity_and_inconsistent() {
        let b = vec![qf(1, 2), q(3), q(-7)];
        assert_eq!(solve(&MatrixQ::identity(3), &b), Solve::Solution(b.clone()));
        match solve(&MatrixQ::zeros(3, 3), &b) {
            Solve::Inconsistent(y) => {
                assert!(MatrixQ::zeros(3, 3).vec_mul(&y).iter().all(|x| x.is_zero()));
                assert!(!dot(&y, &b).is_zero());
            }
            Solve::Solution(_) => panic!("expected certificate"),
        }
    }

    #[test]
    fn rational_rank_with_fractions() {
        let m = MatrixQ::from_rows(vec![vec![qf(1, 2), qf(1, 3)], vec![qf(3, 2), q(1)]]);
        assert_eq!(rank(&m), 1);
    }

    #[test]
    fn quotient_dims() {
        let a = SubspaceQ::full(3);
        assert_eq!(quotient_dim(&a, &a).unwrap(), 0);
        assert_eq!(quotient_dim(&a, &SubspaceQ::zero(3)).unwrap(), 3);
        let line = SubspaceQ::span(3, &[vec![q(1), q(0), q(0)]]);
        let other = SubspaceQ::span(3, &[vec![q(0), q(1), q(0)]]);
        assert_eq!(quotient_dim(&line, &other), Err(RatlinError::NotSubspace));
    }

    #[test]
    fn signatures() {
        let mink = BilinearFormQ::symmetric(MatrixQ::from_i64(&[
            &[1, 0, 0, 0],
            &[0, -1, 0, 0],
            &[0, 0, -1, 0],
            &[0, 0, 0, -1],
        ]))
        .unwrap();
        let s = signature_normal_form(&mink);
        assert_eq!((s.plus, s.minus, s.zeros), (1, 3, 0));
        let pairing = BilinearFormQ::symmetric(MatrixQ::from_i64(&[
            &[0, 0, 1, 0],
            &[0, 0, 0, 1],
            &[1, 0, 0, 0],
            &[0, 1, 0, 0],
        ]))
        .unwrap();
        let s = signature_normal_form(&pairing);
        assert_eq!((s.plus, s.minus, s.zeros), (2, 2, 0));
        let t = &s.transform;
        let d = t.transpose().mul(&pairing.matrix).mul(t);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(d.get(i, j).is_zero());
                }
            }
        }
    }

    #[test]
    fn annihilator_self_orthogonal_line() {
        let g = BilinearFormQ::symmetric(MatrixQ::from_i64(&[&[1, 0], &[0, -1]])).unwrap();
        let w = SubspaceQ::span(2, &[vec![q(1), q(1)]]);
        assert_eq!(annihilator(&w, &g).unwrap(), w);
        assert_eq!(annihilator(&SubspaceQ::zero(2), &g).unwrap(), SubspaceQ::full(2));
        assert_eq!(annihilator(&SubspaceQ::full(2), &g).unwrap().dim(), 0);
        let deg = BilinearFormQ::symmetric(MatrixQ::from_i64(&[&[1, 0], &[0, 0]])).unwrap();
        assert_eq!(annihilator(&w, &deg), Err(RatlinError::DegeneratePairing));
    }

    #[test]
    fn intersection_and_sum() {
        let a = SubspaceQ::span(3, &[vec![q(1), q(0), q(0)], vec![q(0), q(1), q(0)]]);
        let b = SubspaceQ::span(3, &[vec![q(0), q(1), q(0)], vec![q(0), q(0), q(1)]]);
        assert_eq!(a.intersection(&b), SubspaceQ::span(3, &[vec![q(0), q(1), q(0)]]));
        assert_eq!(a.sum(&b), SubspaceQ::full(3));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("-3/6").unwrap(), qf(-1, 2));
        assert_eq!(fmt_q(&qf(-1, 2)), "-1/2");
        assert_eq!(fmt_q(&q(4)), "4");
        assert!(parse_q("1/0").is_none());
    }

    #[test]
    fn inverse_roundtrip() {
        let m = MatrixQ::from_i64(&[&[2, 1], &[1, 1]]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), MatrixQ::identity(2));
        assert!(MatrixQ::from_i64(&[&[1, 2], &[2, 4]]).inverse().is_none());
    }
}
