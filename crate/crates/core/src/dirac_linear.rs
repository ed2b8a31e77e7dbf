//! Linear Dirac structures on `V ⊕ V*`, Dirac maps, canonical relations,
//! hyperbolic completion, and the float routines for compatible structures
//! and projector transport.
//!
//! Vectors of `V ⊕ V*` are `(x, η) ∈ ℚ^{2n}`, `x` first. A two-form `ω` is an
//! antisymmetric matrix with `ω_ij = ω(e_i, e_j)`; its flat map is
//! `x ↦ ω(x, ·)`, i.e. `ωᵀx`. Bivectors are treated the same way.

use crate::ratlin::{dot, kernel_basis, q, signature_normal_form, solve, BilinearFormQ, MatrixQ, SubspaceQ, Q};
use nalgebra::DMatrix;
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiracError {
    #[error("matrix is not antisymmetric")]
    NotAntisymmetric,
    #[error("subspace is not isotropic")]
    NotIsotropic,
    #[error("subspace has dimension {got}, expected {want}")]
    NotMaximal { got: usize, want: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("middle factors of the relations do not match")]
    FactorMismatch,
    #[error("form is degenerate or not symmetric")]
    BadForm,
    #[error("ill-conditioned input: {0}")]
    IllConditioned(String),
    #[error("step too large: {0}")]
    StepTooLarge(String),
}

/// `V ⊕ V*` with `⟨(x,η),(y,μ)⟩ = η(y) + μ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairedSpace {
    pub n: usize,
}

impl PairedSpace {
    pub fn new(n: usize) -> Self {
        PairedSpace { n }
    }

    pub fn pairing(&self) -> MatrixQ {
        let n = self.n;
        let mut g = MatrixQ::zeros(2 * n, 2 * n);
        for i in 0..n {
            g.set(i, n + i, q(1));
            g.set(n + i, i, q(1));
        }
        g
    }

    /// `⟨(x,η),(y,μ)⟩₋ = η(y) − μ(x)`.
    pub fn anti_pairing(&self) -> MatrixQ {
        let n = self.n;
        let mut g = MatrixQ::zeros(2 * n, 2 * n);
        for i in 0..n {
            g.set(i, n + i, q(-1));
            g.set(n + i, i, q(1));
        }
        g
    }

    pub fn eval(&self, a: &[Q], b: &[Q]) -> Q {
        let n = self.n;
        dot(&a[n..], &b[..n]) + dot(&b[n..], &a[..n])
    }

    pub fn vector(x: &[Q], eta: &[Q]) -> Vec<Q> {
        x.iter().chain(eta).cloned().collect()
    }

    /// The subspace `V ⊕ 0`.
    pub fn tangent(&self) -> SubspaceQ {
        let n = self.n;
        SubspaceQ::span(2 * n, &(0..n).map(|i| unit(2 * n, i)).collect::<Vec<_>>())
    }

    /// The subspace `0 ⊕ V*`.
    pub fn cotangent(&self) -> SubspaceQ {
        let n = self.n;
        SubspaceQ::span(2 * n, &(0..n).map(|i| unit(2 * n, n + i)).collect::<Vec<_>>())
    }
}

fn unit(n: usize, i: usize) -> Vec<Q> {
    let mut v = vec![Q::zero(); n];
    v[i] = q(1);
    v
}

pub fn is_isotropic(space: &SubspaceQ, gram: &MatrixQ) -> bool {
    let b = space.basis();
    b.iter().all(|u| b.iter().all(|v| dot(u, &gram.mul_vec(v)).is_zero()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearDirac {
    n: usize,
    space: SubspaceQ,
}

impl LinearDirac {
    pub fn new(n: usize, space: SubspaceQ) -> Result<Self, DiracError> {
        if space.ambient() != 2 * n {
            return Err(DiracError::ShapeMismatch(format!("ambient {} for n = {n}", space.ambient())));
        }
        if !is_isotropic(&space, &PairedSpace::new(n).pairing()) {
            return Err(DiracError::NotIsotropic);
        }
        if space.dim() != n {
            return Err(DiracError::NotMaximal { got: space.dim(), want: n });
        }
        Ok(LinearDirac { n, space })
    }

    pub fn from_vectors(n: usize, vectors: &[Vec<Q>]) -> Result<Self, DiracError> {
        Self::new(n, SubspaceQ::span(2 * n, vectors))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> &SubspaceQ {
        &self.space
    }

    /// Gram matrix of the pairing on the stored basis; identically zero.
    pub fn pairing_gram(&self) -> MatrixQ {
        let b = self.space.basis();
        let ps = PairedSpace::new(self.n);
        MatrixQ::from_rows(b.iter().map(|u| b.iter().map(|v| ps.eval(u, v)).collect()).collect())
    }

    pub fn tangent(n: usize) -> Self {
        LinearDirac { n, space: PairedSpace::new(n).tangent() }
    }

    pub fn cotangent(n: usize) -> Self {
        LinearDirac { n, space: PairedSpace::new(n).cotangent() }
    }

    /// `graph(ω) = {(x, ω(x,·))}`.
    pub fn from_two_form(omega: &MatrixQ) -> Result<Self, DiracError> {
        if !omega.is_antisymmetric() {
            return Err(DiracError::NotAntisymmetric);
        }
        let n = omega.rows();
        let t = omega.transpose();
        let vecs: Vec<Vec<Q>> = (0..n).map(|i| PairedSpace::vector(&unit(n, i), &t.col(i))).collect();
        Self::from_vectors(n, &vecs)
    }

    /// `graph(π) = {(π(λ,·), λ)}`.
    pub fn from_bivector(pi: &MatrixQ) -> Result<Self, DiracError> {
        if !pi.is_antisymmetric() {
            return Err(DiracError::NotAntisymmetric);
        }
        let n = pi.rows();
        let t = pi.transpose();
        let vecs: Vec<Vec<Q>> = (0..n).map(|i| PairedSpace::vector(&t.col(i), &unit(n, i))).collect();
        Self::from_vectors(n, &vecs)
    }

    /// `ρ(L)`.
    pub fn range(&self) -> SubspaceQ {
        let n = self.n;
        SubspaceQ::span(n, &self.space.basis().iter().map(|v| v[..n].to_vec()).collect::<Vec<_>>())
    }

    /// `ρ*(L)`.
    pub fn corange(&self) -> SubspaceQ {
        let n = self.n;
        SubspaceQ::span(n, &self.space.basis().iter().map(|v| v[n..].to_vec()).collect::<Vec<_>>())
    }

    /// `L ∩ V`, as a subspace of `V`.
    pub fn kernel(&self) -> SubspaceQ {
        let n = self.n;
        let i = self.space.intersection(&PairedSpace::new(n).tangent());
        SubspaceQ::span(n, &i.basis().iter().map(|v| v[..n].to_vec()).collect::<Vec<_>>())
    }

    /// `L ∩ V*`, as a subspace of `V*`.
    pub fn cokernel(&self) -> SubspaceQ {
        let n = self.n;
        let i = self.space.intersection(&PairedSpace::new(n).cotangent());
        SubspaceQ::span(n, &i.basis().iter().map(|v| v[n..].to_vec()).collect::<Vec<_>>())
    }

    /// Some `η` with `(x, η) ∈ L`; `x` must lie in `ρ(L)`.
    fn lift_x(&self, x: &[Q]) -> Vec<Q> {
        let n = self.n;
        let b = self.space.basis();
        let m = MatrixQ::from_cols(n, &b.iter().map(|v| v[..n].to_vec()).collect::<Vec<_>>());
        let c = solve(&m, x).solution().cloned().expect("x in range");
        let full = MatrixQ::from_cols(2 * n, b).mul_vec(&c);
        full[n..].to_vec()
    }

    fn lift_eta(&self, eta: &[Q]) -> Vec<Q> {
        let n = self.n;
        let b = self.space.basis();
        let m = MatrixQ::from_cols(n, &b.iter().map(|v| v[n..].to_vec()).collect::<Vec<_>>());
        let c = solve(&m, eta).solution().cloned().expect("η in corange");
        let full = MatrixQ::from_cols(2 * n, b).mul_vec(&c);
        full[..n].to_vec()
    }

    /// Both characterizations: `(R, Ω)` with `Ω(x, y) = η(y)` for `(x,η) ∈ L`,
    /// and `(K, π)` with `π` on `K° = ρ*(L)`, `π(η, μ) = μ(x)` for `(x,η) ∈ L`.
    pub fn represent(&self) -> Representation {
        let r = self.range();
        let rb = r.basis().to_vec();
        let etas: Vec<Vec<Q>> = rb.iter().map(|x| self.lift_x(x)).collect();
        let omega = MatrixQ::from_rows(etas.iter().map(|e| rb.iter().map(|y| dot(e, y)).collect()).collect());
        let ann = self.corange();
        let ab = ann.basis().to_vec();
        let xs: Vec<Vec<Q>> = ab.iter().map(|e| self.lift_eta(e)).collect();
        let pi = MatrixQ::from_rows(xs.iter().map(|x| ab.iter().map(|mu| dot(mu, x)).collect()).collect());
        Representation { range: RangeForm { range: r, omega }, kernel: KernelBivector { kernel: self.kernel(), annihilator: ann, pi } }
    }

    /// `{(x, η) : x ∈ R, η|_R = Ω(x)}`.
    pub fn from_range_form(n: usize, rf: &RangeForm) -> Result<Self, DiracError> {
        let rb = rf.range.basis();
        if rf.omega.rows() != rb.len() || rf.omega.cols() != rb.len() {
            return Err(DiracError::ShapeMismatch("Ω is not square on R".into()));
        }
        if !rf.omega.is_antisymmetric() {
            return Err(DiracError::NotAntisymmetric);
        }
        // η with η(r_j) = Ω(r_i, r_j)
        let rmat = MatrixQ::from_rows(rb.to_vec());
        let mut vecs = Vec::new();
        for (i, x) in rb.iter().enumerate() {
            let eta = solve(&rmat, &rf.omega.row(i)).solution().cloned().expect("R basis independent");
            vecs.push(PairedSpace::vector(x, &eta));
        }
        let zero = vec![Q::zero(); n];
        let ann = crate::ratlin::kernel_basis(&if rb.is_empty() { MatrixQ::zeros(0, n) } else { rmat });
        for a in ann.basis() {
            vecs.push(PairedSpace::vector(&zero, a));
        }
        Self::from_vectors(n, &vecs)
    }

    /// `{(x, η) : η ∈ K°, [x] = π(η)}`.
    pub fn from_kernel_bivector(n: usize, kb: &KernelBivector) -> Result<Self, DiracError> {
        let ab = kb.annihilator.basis();
        if kb.pi.rows() != ab.len() || kb.pi.cols() != ab.len() {
            return Err(DiracError::ShapeMismatch("π is not square on K°".into()));
        }
        if !kb.pi.is_antisymmetric() {
            return Err(DiracError::NotAntisymmetric);
        }
        let amat = MatrixQ::from_rows(ab.to_vec());
        let mut vecs = Vec::new();
        for (i, eta) in ab.iter().enumerate() {
            let x = solve(&amat, &kb.pi.row(i)).solution().cloned().expect("K° basis independent");
            vecs.push(PairedSpace::vector(&x, eta));
        }
        let zero = vec![Q::zero(); n];
        for k in kb.kernel.basis() {
            vecs.push(PairedSpace::vector(k, &zero));
        }
        Self::from_vectors(n, &vecs)
    }

    /// `τ_B(x, α) = (x, B(x,·) + α)`.
    pub fn gauge_transform(&self, b: &MatrixQ) -> Result<Self, DiracError> {
        if !b.is_antisymmetric() || b.rows() != self.n {
            return Err(DiracError::NotAntisymmetric);
        }
        let tau = gauge_matrix(b);
        let vecs: Vec<Vec<Q>> = self.space.basis().iter().map(|v| tau.mul_vec(v)).collect();
        Self::from_vectors(self.n, &vecs)
    }

    /// As a canonical relation in `E × {0}`.
    pub fn as_relation(&self) -> CanonicalRelation {
        let g = PairedSpace::new(self.n).pairing();
        CanonicalRelation { g1: g, g2: MatrixQ::zeros(0, 0), space: self.space.clone() }
    }

    pub fn from_relation(n: usize, r: &CanonicalRelation) -> Result<Self, DiracError> {
        if r.g2.rows() != 0 {
            return Err(DiracError::FactorMismatch);
        }
        Self::new(n, r.space.clone())
    }
}

/// Matrix of `τ_B` on `ℚ^{2n}`.
pub fn gauge_matrix(b: &MatrixQ) -> MatrixQ {
    let n = b.rows();
    let mut m = MatrixQ::identity(2 * n);
    for i in 0..n {
        for j in 0..n {
            m.set(n + i, j, b.get(j, i).clone());
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeForm {
    pub range: SubspaceQ,
    /// Gram matrix of `Ω` in the basis of `range`.
    pub omega: MatrixQ,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelBivector {
    pub kernel: SubspaceQ,
    /// `K° ≅ (V/K)*`.
    pub annihilator: SubspaceQ,
    /// Gram matrix of `π` in the basis of `annihilator`.
    pub pi: MatrixQ,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Representation {
    pub range: RangeForm,
    pub kernel: KernelBivector,
}

/// `𝓕φ(L_V) = {(φx, η) : (x, φ*η) ∈ L_V}`, `φ` an `m × n` matrix `V → W`.
pub fn forward_map(phi: &MatrixQ, l: &LinearDirac) -> Result<LinearDirac, DiracError> {
    let (m, n) = (phi.rows(), phi.cols());
    if n != l.n {
        return Err(DiracError::ShapeMismatch(format!("φ has {n} columns, L lives on dim {}", l.n)));
    }
    // (x, η) ↦ (x, φᵀη) must be annihilated by Lᵀ G, since L = L^⊥
    let cons = constraint_rows(l);
    let embed = block_diag(&MatrixQ::identity(n), &phi.transpose());
    let k = kernel_basis(&cons.mul(&embed));
    let out = block_diag(phi, &MatrixQ::identity(m));
    LinearDirac::from_vectors(m, &k.basis().iter().map(|v| out.mul_vec(v)).collect::<Vec<_>>())
}

/// `𝓑φ(L_W) = {(x, φ*η) : (φx, η) ∈ L_W}`.
pub fn backward_map(phi: &MatrixQ, l: &LinearDirac) -> Result<LinearDirac, DiracError> {
    let (m, n) = (phi.rows(), phi.cols());
    if m != l.n {
        return Err(DiracError::ShapeMismatch(format!("φ has {m} rows, L lives on dim {}", l.n)));
    }
    let cons = constraint_rows(l);
    let embed = block_diag(phi, &MatrixQ::identity(m));
    let k = kernel_basis(&cons.mul(&embed));
    let out = block_diag(&MatrixQ::identity(n), &phi.transpose());
    LinearDirac::from_vectors(n, &k.basis().iter().map(|v| out.mul_vec(v)).collect::<Vec<_>>())
}

fn constraint_rows(l: &LinearDirac) -> MatrixQ {
    let g = PairedSpace::new(l.n).pairing();
    if l.space.dim() == 0 {
        return MatrixQ::zeros(0, 2 * l.n);
    }
    MatrixQ::from_rows(l.space.basis().iter().map(|v| g.mul_vec(v)).collect())
}

fn block_diag(a: &MatrixQ, b: &MatrixQ) -> MatrixQ {
    let mut m = MatrixQ::zeros(a.rows() + b.rows(), a.cols() + b.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            m.set(i, j, a.get(i, j).clone());
        }
    }
    for i in 0..b.rows() {
        for j in 0..b.cols() {
            m.set(a.rows() + i, a.cols() + j, b.get(i, j).clone());
        }
    }
    m
}

/// Maximal isotropic subspace of `E₁ × Ē₂` for the form `g₁ ⊕ (−g₂)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalRelation {
    pub g1: MatrixQ,
    pub g2: MatrixQ,
    pub space: SubspaceQ,
}

impl CanonicalRelation {
    pub fn new(g1: MatrixQ, g2: MatrixQ, space: SubspaceQ) -> Result<Self, DiracError> {
        let (d1, d2) = (g1.rows(), g2.rows());
        if space.ambient() != d1 + d2 {
            return Err(DiracError::ShapeMismatch("relation ambient dimension".into()));
        }
        let r = CanonicalRelation { g1, g2, space };
        if !is_isotropic(&r.space, &r.product_form()) {
            return Err(DiracError::NotIsotropic);
        }
        if 2 * r.space.dim() != d1 + d2 {
            return Err(DiracError::NotMaximal { got: r.space.dim(), want: (d1 + d2) / 2 });
        }
        Ok(r)
    }

    pub fn product_form(&self) -> MatrixQ {
        block_diag(&self.g1, &self.g2.scale(&q(-1)))
    }

    /// `𝓕φ = {(φx, η, x, φ*η)} ⊆ F × Ē`.
    pub fn forward(phi: &MatrixQ) -> Self {
        let (m, n) = (phi.rows(), phi.cols());
        let mut vecs = Vec::new();
        for i in 0..n {
            let x = unit(n, i);
            vecs.push([phi.mul_vec(&x), vec![Q::zero(); m], x, vec![Q::zero(); n]].concat());
        }
        let pt = phi.transpose();
        for i in 0..m {
            let eta = unit(m, i);
            vecs.push([vec![Q::zero(); m], eta.clone(), vec![Q::zero(); n], pt.mul_vec(&eta)].concat());
        }
        let (gf, ge) = (PairedSpace::new(m).pairing(), PairedSpace::new(n).pairing());
        Self::new(gf, ge, SubspaceQ::span(2 * (m + n), &vecs)).expect("𝓕φ is canonical")
    }

    /// `𝓑φ = {(x, φ*η, φx, η)} ⊆ E × F̄`.
    pub fn backward(phi: &MatrixQ) -> Self {
        let (m, n) = (phi.rows(), phi.cols());
        let mut vecs = Vec::new();
        for i in 0..n {
            let x = unit(n, i);
            vecs.push([x.clone(), vec![Q::zero(); n], phi.mul_vec(&x), vec![Q::zero(); m]].concat());
        }
        let pt = phi.transpose();
        for i in 0..m {
            let eta = unit(m, i);
            vecs.push([vec![Q::zero(); n], pt.mul_vec(&eta), vec![Q::zero(); m], eta].concat());
        }
        let (ge, gf) = (PairedSpace::new(n).pairing(), PairedSpace::new(m).pairing());
        Self::new(ge, gf, SubspaceQ::span(2 * (m + n), &vecs)).expect("𝓑φ is canonical")
    }

    /// The diagonal of `E × Ē`.
    pub fn identity(g: &MatrixQ) -> Self {
        let d = g.rows();
        let vecs: Vec<Vec<Q>> = (0..d).map(|i| [unit(d, i), unit(d, i)].concat()).collect();
        Self::new(g.clone(), g.clone(), SubspaceQ::span(2 * d, &vecs)).expect("diagonal is canonical")
    }
}

/// `L₁ ∘ L₂ = {(e₁, e₃) : ∃ e₂, (e₁,e₂) ∈ L₁, (e₂,e₃) ∈ L₂}`.
pub fn compose_relations(l1: &CanonicalRelation, l2: &CanonicalRelation) -> Result<CanonicalRelation, DiracError> {
    if l1.g2 != l2.g1 {
        return Err(DiracError::FactorMismatch);
    }
    let (d1, d2, d3) = (l1.g1.rows(), l1.g2.rows(), l2.g2.rows());
    let (b1, b2) = (l1.space.basis(), l2.space.basis());
    // Σ a_i e₂(b1_i) − Σ b_j e₂(b2_j) = 0
    let mut cols: Vec<Vec<Q>> = b1.iter().map(|v| v[d1..].to_vec()).collect();
    cols.extend(b2.iter().map(|v| v[..d2].iter().map(|x| -x).collect::<Vec<_>>()));
    let vecs: Vec<Vec<Q>> = if cols.is_empty() || d2 == 0 {
        let mut out: Vec<Vec<Q>> = b1.iter().map(|v| [v[..d1].to_vec(), vec![Q::zero(); d3]].concat()).collect();
        out.extend(b2.iter().map(|v| [vec![Q::zero(); d1], v[d2..].to_vec()].concat()));
        out
    } else {
        let k = kernel_basis(&MatrixQ::from_cols(d2, &cols));
        k.basis()
            .iter()
            .map(|c| {
                let mut e1 = vec![Q::zero(); d1];
                let mut e3 = vec![Q::zero(); d3];
                for (a, v) in c[..b1.len()].iter().zip(b1) {
                    for (t, s) in e1.iter_mut().zip(&v[..d1]) {
                        *t += a * s;
                    }
                }
                for (b, v) in c[b1.len()..].iter().zip(b2) {
                    for (t, s) in e3.iter_mut().zip(&v[d2..]) {
                        *t += b * s;
                    }
                }
                [e1, e3].concat()
            })
            .collect()
    };
    CanonicalRelation::new(l1.g1.clone(), l2.g2.clone(), SubspaceQ::span(d1 + d3, &vecs))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperbolicCompletion {
    /// Basis `w₁..w_k` of `W` as used.
    pub w: Vec<Vec<Q>>,
    /// Dual null vectors: `(v_i, v_j) = 0`, `(w_i, v_j) = δ_ij`.
    pub v: Vec<Vec<Q>>,
    /// Basis of `U`, orthogonal to every `w_i` and `v_i`.
    pub u: Vec<Vec<Q>>,
    /// Isotropic subspace containing `W`, as large as rational arithmetic allows.
    pub extension: SubspaceQ,
    /// `min(q, p)`, the real Witt index.
    pub maximal_dim: usize,
}

impl HyperbolicCompletion {
    /// True when the rational extension reaches the real maximal dimension.
    pub fn extension_complete(&self) -> bool {
        self.extension.dim() == self.maximal_dim
    }
}

/// `min(q, p)` for a nondegenerate symmetric form.
pub fn max_isotropic_dim(form: &BilinearFormQ) -> Result<usize, DiracError> {
    if !form.matrix.is_symmetric() || !form.is_nondegenerate() {
        return Err(DiracError::BadForm);
    }
    let s = signature_normal_form(form);
    Ok(s.plus.min(s.minus))
}

/// Pairs an isotropic basis of `W` with null vectors as in the hyperbolic
/// splitting `V = span(w₁,v₁) ⊥ … ⊥ span(w_k,v_k) ⊥ U`.
pub fn hyperbolic_completion(form: &BilinearFormQ, w: &SubspaceQ) -> Result<HyperbolicCompletion, DiracError> {
    let maximal_dim = max_isotropic_dim(form)?;
    let g = &form.matrix;
    let dim = form.dim();
    if w.ambient() != dim {
        return Err(DiracError::ShapeMismatch("W ambient dimension".into()));
    }
    if !is_isotropic(w, g) {
        return Err(DiracError::NotIsotropic);
    }
    let b = |x: &[Q], y: &[Q]| dot(x, &g.mul_vec(y));
    let ws = w.basis().to_vec();
    let wperp = crate::ratlin::orthogonal(w, g);
    let u = w.complement_in(&wperp);
    let mut vs: Vec<Vec<Q>> = Vec::new();
    for i in 0..ws.len() {
        let mut others: Vec<Vec<Q>> = ws[i + 1..].to_vec();
        others.extend(u.iter().cloned());
        for (wj, vj) in ws[..i].iter().zip(&vs) {
            others.push(wj.clone());
            others.push(vj.clone());
        }
        let ui = SubspaceQ::span(dim, &others);
        let perp = crate::ratlin::orthogonal(&ui, g);
        let cand = perp.basis().iter().find(|x| !b(x, &ws[i]).is_zero()).expect("nondegenerate form");
        let s = b(cand, &ws[i]);
        let u1: Vec<Q> = cand.iter().map(|x| x / &s).collect();
        let alpha = -b(&u1, &u1) / q(2);
        vs.push(ws[i].iter().zip(&u1).map(|(a, c)| &alpha * a + c).collect());
    }
    let extension = rational_isotropic_extension(g, w, &u);
    Ok(HyperbolicCompletion { w: ws, v: vs, u, extension, maximal_dim })
}

fn rational_sqrt(x: &Q) -> Option<Q> {
    if x.is_negative() {
        return None;
    }
    let (n, d) = (x.numer().sqrt(), x.denom().sqrt());
    let r = Q::new(n, d);
    (&r * &r == *x).then_some(r)
}

/// Extends `W` by null vectors `a + t b` built from orthogonal pairs of `U`
/// whose square lengths have opposite sign and rational ratio square root.
fn rational_isotropic_extension(g: &MatrixQ, w: &SubspaceQ, u: &[Vec<Q>]) -> SubspaceQ {
    let dim = g.rows();
    if u.is_empty() {
        return w.clone();
    }
    let um = MatrixQ::from_cols(dim, u);
    let gu = um.transpose().mul(g).mul(&um);
    let s = signature_normal_form(&BilinearFormQ { matrix: gu, kind: crate::ratlin::FormKind::Symmetric });
    let basis: Vec<(Vec<Q>, Q)> = (0..u.len()).map(|i| (um.mul_vec(&s.transform.col(i)), s.diagonal[i].clone())).collect();
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = basis.into_iter().partition(|(_, d)| d.is_positive());
    let mut out = w.basis().to_vec();
    let mut i = 0;
    while i < pos.len() {
        let j = neg.iter().position(|(_, dn)| rational_sqrt(&(-&pos[i].1 / dn)).is_some());
        match j {
            Some(j) => {
                let (a, da) = pos.remove(i);
                let (bv, db) = neg.remove(j);
                let t = rational_sqrt(&(-&da / &db)).unwrap();
                out.push(a.iter().zip(&bv).map(|(x, y)| x + &t * y).collect());
            }
            None => i += 1,
        }
    }
    SubspaceQ::span(dim, &out)
}

// ---------------------------------------------------------------------------
// float routines

/// `(J, g)` with `J² = id`, `J` an isometry of the pairing `G`, and
/// `g(e₁, e₂) = (e₁, J e₂)` positive definite, built from the metric `k` by the
/// polar decomposition `J = |A|⁻¹ A`, `k(A e₁, e₂) = (e₁, e₂)`.
pub fn numeric_compatible_structure(pairing: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), DiracError> {
    let d = pairing.nrows();
    if pairing.ncols() != d || k.nrows() != d || k.ncols() != d || d % 2 != 0 {
        return Err(DiracError::ShapeMismatch("pairing and metric must be square of even size".into()));
    }
    let sym = |m: &DMatrix<f64>| (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax());
    if !sym(pairing) || !sym(k) {
        return Err(DiracError::BadForm);
    }
    let ke = k.clone().symmetric_eigen();
    if ke.eigenvalues.min() <= 1e-12 * ke.eigenvalues.max().max(1.0) {
        return Err(DiracError::IllConditioned("metric is not positive definite".into()));
    }
    let sq = |p: f64| {
        let mut m = ke.eigenvectors.clone();
        for (j, l) in ke.eigenvalues.iter().enumerate() {
            m.column_mut(j).scale_mut(l.powf(p));
        }
        &m * ke.eigenvectors.transpose()
    };
    let (kh, kmh) = (sq(0.5), sq(-0.5));
    let at = &kmh * pairing * &kmh;
    let ae = ((&at + at.transpose()) * 0.5).symmetric_eigen();
    let scale = ae.eigenvalues.amax();
    if ae.eigenvalues.iter().any(|l| l.abs() <= 1e-10 * scale) {
        return Err(DiracError::IllConditioned("pairing is (nearly) degenerate".into()));
    }
    let plus = ae.eigenvalues.iter().filter(|l| **l > 0.0).count();
    if 2 * plus != d {
        return Err(DiracError::IllConditioned(format!("signature ({plus}, {}) is not split", d - plus)));
    }
    let mut sgn = ae.eigenvectors.clone();
    for (j, l) in ae.eigenvalues.iter().enumerate() {
        sgn.column_mut(j).scale_mut(l.signum());
    }
    let jt = &sgn * ae.eigenvectors.transpose();
    let j = &kmh * jt * &kh;
    let g = pairing * &j;
    Ok((j, (&g + g.transpose()) * 0.5))
}

/// Residuals `(‖J² − I‖, ‖JᵀGJ − G‖, λ_min(g))` used to accept a compatible structure.
pub fn compatible_residuals(pairing: &DMatrix<f64>, j: &DMatrix<f64>, g: &DMatrix<f64>) -> (f64, f64, f64) {
    let d = j.nrows();
    let r1 = (j * j - DMatrix::<f64>::identity(d, d)).norm();
    let r2 = (j.transpose() * pairing * j - pairing).norm();
    let lmin = g.clone().symmetric_eigen().eigenvalues.min();
    (r1, r2, lmin)
}

fn check_step(p: &DMatrix<f64>, pdot: &DMatrix<f64>, h: f64) -> Result<(), DiracError> {
    let idem = (p * p - p).norm();
    if idem > 1e-6 * (1.0 + p.norm()) {
        return Err(DiracError::IllConditioned(format!("sample is not a projector (‖P² − P‖ = {idem:.2e})")));
    }
    if h * pdot.norm() > 0.5 {
        return Err(DiracError::StepTooLarge(format!("h·‖Ṗ‖ = {:.2e}", h * pdot.norm())));
    }
    Ok(())
}

/// RK4 for `U̇ = [Ṗ, P] U`, `U(t₀) = id`, with `Ṗ` from a fourth-order
/// central difference of `p`. Returns `U` at `t₀, t₀ + h, …, t₁`.
pub fn numeric_transport(p: impl Fn(f64) -> DMatrix<f64>, t0: f64, t1: f64, steps: usize) -> Result<Vec<DMatrix<f64>>, DiracError> {
    if steps == 0 || t1 <= t0 {
        return Err(DiracError::ShapeMismatch("need t1 > t0 and at least one step".into()));
    }
    let h = (t1 - t0) / steps as f64;
    let eps = (h * 1e-2).max(1e-5);
    let dp = |t: f64| (p(t - 2.0 * eps) - p(t - eps) * 8.0 + p(t + eps) * 8.0 - p(t + 2.0 * eps)) / (12.0 * eps);
    let gen = |t: f64| {
        let (pt, pd) = (p(t), dp(t));
        &pd * &pt - &pt * &pd
    };
    let d = p(t0).nrows();
    let mut u = DMatrix::<f64>::identity(d, d);
    let mut out = vec![u.clone()];
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        check_step(&p(t), &dp(t), h)?;
        let k1 = gen(t) * &u;
        let k2 = gen(t + h / 2.0) * (&u + &k1 * (h / 2.0));
        let k3 = gen(t + h / 2.0) * (&u + &k2 * (h / 2.0));
        let k4 = gen(t + h) * (&u + &k3 * h);
        u += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(u.clone());
    }
    Ok(out)
}

/// Same as [`numeric_transport`] for a path given by samples at spacing `dt`.
/// RK4 steps of size `2·dt` use the odd samples as midpoints; `Ṗ` is a
/// fourth-order finite difference (one-sided near the ends). Returns `U` at
/// every even sample.
pub fn numeric_transport_sampled(samples: &[DMatrix<f64>], dt: f64) -> Result<Vec<DMatrix<f64>>, DiracError> {
    let n = samples.len();
    if n < 5 || n % 2 == 0 {
        return Err(DiracError::ShapeMismatch("need an odd number (≥ 5) of samples".into()));
    }
    let dp = |i: usize| -> DMatrix<f64> {
        let s = |j: usize| &samples[j];
        if i >= 2 && i + 2 < n {
            (s(i - 2) - s(i - 1) * 8.0 + s(i + 1) * 8.0 - s(i + 2)) / (12.0 * dt)
        } else if i < 2 {
            (s(i) * -25.0 + s(i + 1) * 48.0 - s(i + 2) * 36.0 + s(i + 3) * 16.0 - s(i + 4) * 3.0) / (12.0 * dt)
        } else {
            (s(i) * 25.0 - s(i - 1) * 48.0 + s(i - 2) * 36.0 - s(i - 3) * 16.0 + s(i - 4) * 3.0) / (12.0 * dt)
        }
    };
    let gen = |i: usize| {
        let (pt, pd) = (&samples[i], dp(i));
        &pd * pt - pt * &pd
    };
    let d = samples[0].nrows();
    let h = 2.0 * dt;
    let mut u = DMatrix::<f64>::identity(d, d);
    let mut out = vec![u.clone()];
    for s in (0..n - 1).step_by(2) {
        check_step(&samples[s], &dp(s), h)?;
        let (g0, gm, g1) = (gen(s), gen(s + 1), gen(s + 2));
        let k1 = &g0 * &u;
        let k2 = &gm * (&u + &k1 * (h / 2.0));
        let k3 = &gm * (&u + &k2 * (h / 2.0));
        let k4 = &g1 * (&u + &k3 * h);
        u += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(u.clone());
    }
    Ok(out)
}

/// Orthogonal projector onto the column span of `m`.
pub fn orthogonal_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = m.transpose() * m;
    let inv = gram.try_inverse().expect("independent columns");
    m * inv * m.transpose()
}

/// Largest sine of the principal angles between two subspaces given by their
/// orthogonal projectors.
pub fn subspace_distance(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (p - q).norm() / std::f64::consts::SQRT_2
}

/// Float basis of `graph(ω)` as columns.
pub fn graph_basis_f64(omega: &DMatrix<f64>) -> DMatrix<f64> {
    let n = omega.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, n);
    for i in 0..n {
        m[(i, i)] = 1.0;
        for j in 0..n {
            m[(n + j, i)] = omega[(i, j)];
        }
    }
    m
}

/// Random rational antisymmetric matrix with entries in `−r..=r`.
pub fn random_antisymmetric<R: rand::Rng>(n: usize, r: i64, rng: &mut R) -> MatrixQ {
    let mut m = MatrixQ::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = q(rng.gen_range(-r..=r));
            m.set(i, j, v.clone());
            m.set(j, i, -v);
        }
    }
    m
}

/// Random Dirac structure: `τ_B` applied to `graph(π)` restricted by a random
/// linear change of coordinates.
pub fn random_dirac<R: rand::Rng>(n: usize, rng: &mut R) -> LinearDirac {
    let base = match rng.gen_range(0..3) {
        0 => LinearDirac::from_two_form(&random_antisymmetric(n, 2, rng)).unwrap(),
        1 => LinearDirac::from_bivector(&random_antisymmetric(n, 2, rng)).unwrap(),
        _ => {
            // R ⊕ graph of a form on a random subspace
            let k = rng.gen_range(0..=n);
            let mut rf_basis = Vec::new();
            for i in 0..k {
                rf_basis.push(unit(n, i));
            }
            let omega = random_antisymmetric(k, 2, rng);
            LinearDirac::from_range_form(n, &RangeForm { range: SubspaceQ::span(n, &rf_basis), omega }).unwrap()
        }
    };
    // conjugate by a random unimodular change of basis
    let mut a = MatrixQ::identity(n);
    for _ in 0..n {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j {
            let c = q(rng.gen_range(-2..=2));
            for r in 0..n {
                let v = a.get(i, r) + &c * a.get(j, r);
                a.set(i, r, v);
            }
        }
    }
    forward_map(&a, &base).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratlin::{qf, rank};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn omega12() -> MatrixQ {
        MatrixQ::from_i64(&[&[0, 1], &[-1, 0]])
    }

    fn random_map(m: usize, n: usize, rng: &mut ChaCha8Rng) -> MatrixQ {
        MatrixQ::from_rows((0..m).map(|_| (0..n).map(|_| q(rng.gen_range(-2..=2))).collect()).collect())
    }

    #[test]
    fn graphs_and_trivial_cases() {
        assert_eq!(LinearDirac::from_two_form(&MatrixQ::zeros(3, 3)).unwrap(), LinearDirac::tangent(3));
        assert_eq!(LinearDirac::from_bivector(&MatrixQ::zeros(3, 3)).unwrap(), LinearDirac::cotangent(3));
        let l = LinearDirac::from_two_form(&omega12()).unwrap();
        let want = LinearDirac::from_vectors(2, &[vec![q(1), q(0), q(0), q(1)], vec![q(0), q(1), q(-1), q(0)]]).unwrap();
        assert_eq!(l, want);
        assert!(l.pairing_gram().is_zero());
        assert_eq!(LinearDirac::from_two_form(&MatrixQ::from_i64(&[&[0, 1], &[1, 0]])).unwrap_err(), DiracError::NotAntisymmetric);
        let bad = SubspaceQ::span(4, &[vec![q(1), q(0), q(1), q(0)]]);
        assert_eq!(LinearDirac::new(2, bad).unwrap_err(), DiracError::NotIsotropic);
    }

    #[test]
    fn representations_of_graphs() {
        let w = MatrixQ::from_i64(&[&[0, 1, 0], &[-1, 0, 0], &[0, 0, 0]]);
        let r = LinearDirac::from_two_form(&w).unwrap().represent();
        assert_eq!(r.range.range, SubspaceQ::full(3));
        assert_eq!(r.range.omega, w);
        assert_eq!(r.kernel.kernel, SubspaceQ::span(3, &[vec![q(0), q(0), q(1)]]));
        let pi = MatrixQ::from_i64(&[&[0, 2, 0], &[-2, 0, 0], &[0, 0, 0]]);
        let r = LinearDirac::from_bivector(&pi).unwrap().represent();
        assert_eq!(r.kernel.kernel.dim(), 0);
        assert_eq!(r.range.range, SubspaceQ::span(3, &[vec![q(1), q(0), q(0)], vec![q(0), q(1), q(0)]]));
        // Ω on im π is the inverse of π there: Ω(e₁, e₂) = −½ up to orientation
        assert_eq!(r.range.omega, MatrixQ::from_rows(vec![vec![q(0), qf(-1, 2)], vec![qf(1, 2), q(0)]]));
        let v = LinearDirac::tangent(2).represent();
        assert!(v.range.omega.is_zero());
        assert_eq!(v.kernel.kernel, SubspaceQ::full(2));
    }

    #[test]
    fn annihilator_identities_and_anti_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            let l = random_dirac(n, &mut rng);
            let id = MatrixQ::identity(n);
            let ann = |s: &SubspaceQ| crate::ratlin::orthogonal(s, &id);
            assert_eq!(ann(&l.range()), l.cokernel());
            assert_eq!(ann(&l.corange()), l.kernel());
            // Ω(ρ a, ρ b) = ½⟨a, b⟩₋ for a, b ∈ L
            let rep = l.represent();
            let am = PairedSpace::new(n).anti_pairing();
            for a in l.space().basis() {
                for b in l.space().basis() {
                    let ca = rep.range.range.coordinates(&a[..n]).unwrap();
                    let cb = rep.range.range.coordinates(&b[..n]).unwrap();
                    let om = dot(&ca, &rep.range.omega.mul_vec(&cb));
                    assert_eq!(om, dot(a, &am.mul_vec(b)) / q(2));
                }
            }
        }
    }

    #[test]
    fn push_forward_of_bivector_and_pullback_of_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (m, n) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            let phi = random_map(m, n, &mut rng);
            let pi = random_antisymmetric(n, 2, &mut rng);
            let pushed = phi.mul(&pi).mul(&phi.transpose());
            assert_eq!(forward_map(&phi, &LinearDirac::from_bivector(&pi).unwrap()).unwrap(), LinearDirac::from_bivector(&pushed).unwrap());
            let om = random_antisymmetric(m, 2, &mut rng);
            let pulled = phi.transpose().mul(&om).mul(&phi);
            assert_eq!(backward_map(&phi, &LinearDirac::from_two_form(&om).unwrap()).unwrap(), LinearDirac::from_two_form(&pulled).unwrap());
        }
    }

    #[test]
    fn forward_and_backward_are_not_inverse_in_general() {
        // φ : ℚ² → ℚ², (x, y) ↦ (x, 0): neither injective nor surjective
        let phi = MatrixQ::from_i64(&[&[1, 0], &[0, 0]]);
        let l = LinearDirac::from_two_form(&omega12()).unwrap();
        let fb = backward_map(&phi, &forward_map(&phi, &l).unwrap()).unwrap();
        assert_ne!(fb, l);
        let lw = LinearDirac::from_bivector(&omega12()).unwrap();
        let bf = forward_map(&phi, &backward_map(&phi, &lw).unwrap()).unwrap();
        assert_ne!(bf, lw);
    }

    #[test]
    fn hyperbolic_completion_cases() {
        let mink = BilinearFormQ::symmetric(MatrixQ::from_i64(&[&[1, 0, 0, 0], &[0, -1, 0, 0], &[0, 0, -1, 0], &[0, 0, 0, -1]])).unwrap();
        assert_eq!(max_isotropic_dim(&mink).unwrap(), 1);
        let w = SubspaceQ::span(4, &[vec![q(1), q(1), q(0), q(0)]]);
        let h = hyperbolic_completion(&mink, &w).unwrap();
        let b = |x: &[Q], y: &[Q]| mink.eval(x, y);
        assert_eq!(b(&h.v[0], &h.v[0]), q(0));
        assert_eq!(b(&h.w[0], &h.v[0]), q(1));
        assert_eq!(h.u.len(), 2);
        assert!(h.extension_complete());
        assert_eq!(h.extension, w);

        let hyp = BilinearFormQ::symmetric(MatrixQ::from_i64(&[&[1, 0], &[0, -1]])).unwrap();
        let h = hyperbolic_completion(&hyp, &SubspaceQ::span(2, &[vec![q(1), q(1)]])).unwrap();
        assert_eq!(h.v[0], vec![qf(1, 2), qf(-1, 2)]);

        let h = hyperbolic_completion(&mink, &SubspaceQ::zero(4)).unwrap();
        assert!(h.v.is_empty());
        assert_eq!(SubspaceQ::span(4, &h.u), SubspaceQ::full(4));
        assert_eq!(h.extension.dim(), 1);

        assert_eq!(hyperbolic_completion(&hyp, &SubspaceQ::span(2, &[vec![q(1), q(0)]])).unwrap_err(), DiracError::NotIsotropic);
        // x² − 2y² has no rational null vector
        let irr = BilinearFormQ::symmetric(MatrixQ::from_i64(&[&[1, 0], &[0, -2]])).unwrap();
        let h = hyperbolic_completion(&irr, &SubspaceQ::zero(2)).unwrap();
        assert_eq!((h.maximal_dim, h.extension.dim()), (1, 0));
    }

    #[test]
    fn compatible_structure_examples() {
        let mut g = DMatrix::<f64>::zeros(4, 4);
        for i in 0..2 {
            g[(i, i)] = 1.0;
            g[(i + 2, i + 2)] = -1.0;
        }
        let (j, met) = numeric_compatible_structure(&g, &DMatrix::identity(4, 4)).unwrap();
        assert!((&j - &g).norm() < 1e-12);
        assert!((&met - DMatrix::<f64>::identity(4, 4)).norm() < 1e-12);
        let can = crate::ratlin::MatrixQ::to_f64(&PairedSpace::new(2).pairing());
        let (j, met) = numeric_compatible_structure(&can, &DMatrix::identity(4, 4)).unwrap();
        assert!((&j - &can).norm() < 1e-12);
        assert!((&met - DMatrix::<f64>::identity(4, 4)).norm() < 1e-12);
        let def = DMatrix::<f64>::identity(4, 4);
        assert!(matches!(numeric_compatible_structure(&def, &def), Err(DiracError::IllConditioned(_))));
    }

    #[test]
    fn transport_constant_and_graph_paths() {
        let p0 = orthogonal_projector(&graph_basis_f64(&DMatrix::zeros(2, 2)));
        let us = numeric_transport(|_| p0.clone(), 0.0, 1.0, 100).unwrap();
        assert!((us.last().unwrap() - DMatrix::<f64>::identity(4, 4)).norm() < 1e-12);
        let om = crate::ratlin::MatrixQ::to_f64(&MatrixQ::from_i64(&[&[0, 1, -1], &[-1, 0, 2], &[1, -2, 0]]));
        let path = |t: f64| orthogonal_projector(&graph_basis_f64(&(&om * t)));
        let us = numeric_transport(path, 0.0, 1.0, 1000).unwrap();
        let p0 = path(0.0);
        for (s, u) in us.iter().enumerate().step_by(100) {
            let t = s as f64 / 1000.0;
            let moved = orthogonal_projector(&(u * graph_basis_f64(&DMatrix::zeros(3, 3))));
            assert!(subspace_distance(&moved, &path(t)) < 1e-6);
            assert!((u * &p0 * u.clone().try_inverse().unwrap() - path(t)).norm() < 1e-6);
            // U orthogonal and an isometry of the pairing
            assert!((u.transpose() * u - DMatrix::<f64>::identity(6, 6)).norm() < 1e-6);
            let g = crate::ratlin::MatrixQ::to_f64(&PairedSpace::new(3).pairing());
            assert!((u.transpose() * &g * u - &g).norm() < 1e-6);
        }
        // sampled version agrees
        let samples: Vec<_> = (0..=2000).map(|i| path(i as f64 * 5e-4)).collect();
        let us2 = numeric_transport_sampled(&samples, 5e-4).unwrap();
        assert!((us2.last().unwrap() - us.last().unwrap()).norm() < 1e-6);
    }

    #[test]
    fn transport_rejects_large_steps() {
        let om = DMatrix::from_row_slice(2, 2, &[0.0, 50.0, -50.0, 0.0]);
        let path = |t: f64| orthogonal_projector(&graph_basis_f64(&(&om * t)));
        assert!(matches!(numeric_transport(path, 0.0, 1.0, 2), Err(DiracError::StepTooLarge(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn represent_round_trips(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=4);
            let l = random_dirac(n, &mut rng);
            prop_assert!(l.pairing_gram().is_zero());
            let r = l.represent();
            prop_assert!(r.range.omega.is_antisymmetric());
            prop_assert!(r.kernel.pi.is_antisymmetric());
            prop_assert_eq!(&LinearDirac::from_range_form(n, &r.range).unwrap(), &l);
            prop_assert_eq!(&LinearDirac::from_kernel_bivector(n, &r.kernel).unwrap(), &l);
            // K = ker Ω
            let kom = kernel_basis(&r.range.omega);
            let kv: Vec<Vec<Q>> = kom.basis().iter().map(|c| MatrixQ::from_cols(n, r.range.range.basis()).mul_vec(c)).collect();
            prop_assert_eq!(SubspaceQ::span(n, &kv), l.kernel());
        }

        #[test]
        fn functoriality_and_relation_path(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, m, k) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3));
            let phi = random_map(m, n, &mut rng);
            let psi = random_map(k, m, &mut rng);
            let lv = random_dirac(n, &mut rng);
            let lu = random_dirac(k, &mut rng);
            let comp = psi.mul(&phi);
            prop_assert_eq!(forward_map(&psi, &forward_map(&phi, &lv).unwrap()).unwrap(), forward_map(&comp, &lv).unwrap());
            prop_assert_eq!(backward_map(&phi, &backward_map(&psi, &lu).unwrap()).unwrap(), backward_map(&comp, &lu).unwrap());
            // relation composition agrees with the explicit formulas
            let via = compose_relations(&CanonicalRelation::forward(&phi), &lv.as_relation()).unwrap();
            prop_assert_eq!(LinearDirac::from_relation(m, &via).unwrap(), forward_map(&phi, &lv).unwrap());
            let lw = random_dirac(m, &mut rng);
            let via = compose_relations(&CanonicalRelation::backward(&phi), &lw.as_relation()).unwrap();
            prop_assert_eq!(LinearDirac::from_relation(n, &via).unwrap(), backward_map(&phi, &lw).unwrap());
            let rel = compose_relations(&CanonicalRelation::forward(&psi), &CanonicalRelation::forward(&phi)).unwrap();
            prop_assert_eq!(rel, CanonicalRelation::forward(&comp));
            let rel = compose_relations(&CanonicalRelation::backward(&phi), &CanonicalRelation::backward(&psi)).unwrap();
            prop_assert_eq!(rel, CanonicalRelation::backward(&comp));
            let id = CanonicalRelation::identity(&PairedSpace::new(n).pairing());
            prop_assert_eq!(compose_relations(&id, &lv.as_relation()).unwrap(), lv.as_relation());
        }

        #[test]
        fn injective_and_surjective_identities(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=3);
            let m = n + rng.gen_range(0..=2);
            let inj = random_map(m, n, &mut rng);
            prop_assume!(rank(&inj) == n);
            let lv = random_dirac(n, &mut rng);
            prop_assert_eq!(backward_map(&inj, &forward_map(&inj, &lv).unwrap()).unwrap(), lv);
            let sur = inj.transpose();
            let lw = random_dirac(n, &mut rng);
            prop_assert_eq!(forward_map(&sur, &backward_map(&sur, &lw).unwrap()).unwrap(), lw);
        }

        #[test]
        fn gauge_laws(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=4);
            let (b1, b2) = (random_antisymmetric(n, 2, &mut rng), random_antisymmetric(n, 2, &mut rng));
            let l = random_dirac(n, &mut rng);
            prop_assert_eq!(l.gauge_transform(&MatrixQ::zeros(n, n)).unwrap(), l.clone());
            prop_assert_eq!(LinearDirac::tangent(n).gauge_transform(&b1).unwrap(), LinearDirac::from_two_form(&b1).unwrap());
            prop_assert_eq!(l.gauge_transform(&b2).unwrap().gauge_transform(&b1).unwrap(), l.gauge_transform(&b1.add(&b2)).unwrap());
            let t = gauge_matrix(&b1);
            let g = PairedSpace::new(n).pairing();
            prop_assert_eq!(t.transpose().mul(&g).mul(&t), g);
        }

        #[test]
        fn completion_pairing_table(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // random split form, congruent to the V ⊕ V* pairing
            let n = rng.gen_range(1..=3);
            let mut a = MatrixQ::identity(2 * n);
            for _ in 0..4 {
                let (i, j) = (rng.gen_range(0..2 * n), rng.gen_range(0..2 * n));
                if i != j {
                    let c = q(rng.gen_range(-2..=2));
                    for r in 0..2 * n {
                        let v = a.get(r, i) + &c * a.get(r, j);
                        a.set(r, i, v);
                    }
                }
            }
            let g = a.transpose().mul(&PairedSpace::new(n).pairing()).mul(&a);
            let form = BilinearFormQ::symmetric(g.clone()).unwrap();
            // an isotropic W: preimage of part of V
            let k = rng.gen_range(0..=n);
            let inv = a.inverse().unwrap();
            let w = SubspaceQ::span(2 * n, &(0..k).map(|i| inv.mul_vec(&unit(2 * n, i))).collect::<Vec<_>>());
            let h = hyperbolic_completion(&form, &w).unwrap();
            for i in 0..k {
                for j in 0..k {
                    prop_assert_eq!(form.eval(&h.v[i], &h.v[j]), q(0));
                    prop_assert_eq!(form.eval(&h.w[i], &h.v[j]), if i == j { q(1) } else { q(0) });
                }
                for u in &h.u {
                    prop_assert_eq!(form.eval(&h.w[i], u), q(0));
                    prop_assert_eq!(form.eval(&h.v[i], u), q(0));
                }
            }
            let mut all = h.w.clone();
            all.extend(h.v.iter().cloned());
            all.extend(h.u.iter().cloned());
            prop_assert_eq!(SubspaceQ::span(2 * n, &all).dim(), 2 * n);
            prop_assert!(h.extension.dim() <= h.maximal_dim);
            prop_assert!(is_isotropic(&h.extension, &g));
        }

        #[test]
        fn compatible_structure_random(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=3);
            let a = DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3));
            let g0 = crate::ratlin::MatrixQ::to_f64(&PairedSpace::new(n).pairing());
            let g = a.transpose() * g0 * &a;
            let b = DMatrix::<f64>::from_fn(2 * n, 2 * n, |_, _| rng.gen_range(-1.0..1.0));
            let k = &b * b.transpose() + DMatrix::<f64>::identity(2 * n, 2 * n);
            let (j, met) = numeric_compatible_structure(&g, &k).unwrap();
            let (r1, r2, lmin) = compatible_residuals(&g, &j, &met);
            prop_assert!(r1 < 1e-9 && r2 < 1e-9 && lmin > 0.0);
        }
    }
}
