use super::{combinations, shuffles, sort_sign, MultiMap, MultilinearError};
use crate::ratlin::{kernel_basis, q, rank, MatrixQ, Q};
use crate::superalg::{GeneratorSet, Mono, SuperElement};
use num_traits::Zero;
use rand::Rng;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Section of the trivial bundle `ℝ^m × ℝ^k`: `k` polynomial components in `x_1..x_m`.
pub type Section = Vec<SuperElement>;

/// Multiderivation of degree `p ≥ −1` (arity `p + 1`) of the trivial bundle
/// `ℝ^m × ℝ^k` with polynomial coefficients. `comps[I][γ]` is the `e_γ`
/// component of `D(e_I)`, `symbol[J][i]` the `∂_i` component of `σ_D(e_J)`.
/// Degree `−2` is the zero space produced by bracketing two sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiDerivation {
    ring: Arc<GeneratorSet>,
    m: usize,
    k: usize,
    degree: i64,
    comps: BTreeMap<Vec<usize>, Vec<SuperElement>>,
    symbol: BTreeMap<Vec<usize>, Vec<SuperElement>>,
}

fn sign(odd: bool) -> Q {
    if odd {
        q(-1)
    } else {
        q(1)
    }
}

fn parity(e: i64) -> bool {
    e.rem_euclid(2) == 1
}

fn tuples_of(n: usize, len: i64) -> Vec<Vec<usize>> {
    if len < 0 || len as usize > n {
        Vec::new()
    } else {
        combinations(n, len as usize)
    }
}

/// Monomials of total degree `d` in `m` variables.
fn monomials(m: usize, d: i64) -> Vec<Mono> {
    if d < 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; m];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Mono>) {
        if i + 1 >= cur.len() {
            if let Some(last) = cur.last_mut() {
                *last = left;
                out.push(Mono { e: cur.clone(), o: 0 });
            } else if left == 0 {
                out.push(Mono { e: vec![], o: 0 });
            }
            return;
        }
        for a in (0..=left).rev() {
            cur[i] = a;
            rec(i + 1, left - a, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, d as u32, &mut cur, &mut out);
    out
}

impl MultiDerivation {
    pub fn ring(m: usize) -> Arc<GeneratorSet> {
        GeneratorSet::forms(m, 0)
    }

    pub fn zero_on(ring: &Arc<GeneratorSet>, k: usize, degree: i64) -> Self {
        let m = ring.n_even();
        let z = SuperElement::zero(ring);
        let comps = tuples_of(k, degree + 1).into_iter().map(|t| (t, vec![z.clone(); k])).collect();
        let symbol = if degree >= 0 { tuples_of(k, degree).into_iter().map(|t| (t, vec![z.clone(); m])).collect() } else { BTreeMap::new() };
        MultiDerivation { ring: ring.clone(), m, k, degree, comps, symbol }
    }

    pub fn zero(m: usize, k: usize, degree: i64) -> Self {
        Self::zero_on(&Self::ring(m), k, degree)
    }

    /// A section, viewed as a multiderivation of degree −1.
    pub fn section(ring: &Arc<GeneratorSet>, s: Section) -> Self {
        let mut d = Self::zero_on(ring, s.len(), -1);
        d.comps.insert(vec![], s);
        d
    }

    /// Point case: `𝒜^{n}(V)` as `Der^{n−1}` of `V → pt`.
    pub fn from_multimap(f: &MultiMap) -> Self {
        let ring = Self::ring(0);
        let mut d = Self::zero_on(&ring, f.dim(), f.arity() as i64 - 1);
        for (t, v) in f.coeffs() {
            d.comps.insert(t.clone(), v.iter().map(|c| SuperElement::constant(&ring, c.clone())).collect());
        }
        d
    }

    pub fn to_multimap(&self) -> Option<MultiMap> {
        if self.m != 0 || self.degree < -1 {
            return None;
        }
        let mut f = MultiMap::zero(self.k, (self.degree + 1) as usize);
        for (t, v) in &self.comps {
            f.set(t, v.iter().map(|p| p.constant_term()).collect());
        }
        Some(f)
    }

    /// The bracket of vector fields on `TM = ℝ^m × ℝ^m`: vanishing on the
    /// constant frame `∂_i`, with identity symbol.
    pub fn tangent(m: usize) -> Self {
        let mut d = Self::zero(m, m, 1);
        for j in 0..m {
            d.symbol.get_mut(&vec![j]).unwrap()[j] = SuperElement::one(&d.ring);
        }
        d
    }

    /// Random coefficients of degree ≤ `deg`.
    pub fn random<R: Rng>(m: usize, k: usize, degree: i64, deg: u32, rng: &mut R) -> Self {
        let mut d = Self::zero(m, k, degree);
        let ring = d.ring.clone();
        for v in d.comps.values_mut().chain(d.symbol.values_mut()) {
            for p in v.iter_mut() {
                *p = crate::superalg::random_base_poly(&ring, m, deg, 2, rng);
            }
        }
        d
    }

    pub fn base_dim(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn gens(&self) -> &Arc<GeneratorSet> {
        &self.ring
    }

    pub fn comps(&self) -> &BTreeMap<Vec<usize>, Vec<SuperElement>> {
        &self.comps
    }

    pub fn symbol(&self) -> &BTreeMap<Vec<usize>, Vec<SuperElement>> {
        &self.symbol
    }

    pub fn set_comp(&mut self, sorted: &[usize], value: Section) {
        assert_eq!(value.len(), self.k);
        *self.comps.get_mut(sorted).expect("strictly increasing tuple") = value;
    }

    pub fn set_symbol(&mut self, sorted: &[usize], value: Vec<SuperElement>) {
        assert_eq!(value.len(), self.m);
        *self.symbol.get_mut(sorted).expect("strictly increasing tuple") = value;
    }

    pub fn is_zero(&self) -> bool {
        self.comps.values().chain(self.symbol.values()).flatten().all(|p| p.is_zero())
    }

    pub fn scale(&self, s: &Q) -> Self {
        let sc = |mp: &BTreeMap<Vec<usize>, Vec<SuperElement>>| mp.iter().map(|(k, v)| (k.clone(), v.iter().map(|x| x.scale(s)).collect())).collect();
        Self { comps: sc(&self.comps), symbol: sc(&self.symbol), ..self.clone() }
    }

    pub fn add(&self, o: &Self) -> Result<Self, MultilinearError> {
        self.check_bundle(o)?;
        if self.degree != o.degree {
            return Err(MultilinearError::DegreeMismatch);
        }
        let sum = |a: &BTreeMap<Vec<usize>, Vec<SuperElement>>, b: &BTreeMap<Vec<usize>, Vec<SuperElement>>| {
            a.iter().map(|(k, v)| (k.clone(), v.iter().zip(&b[k]).map(|(x, y)| x + y).collect())).collect()
        };
        Ok(Self { comps: sum(&self.comps, &o.comps), symbol: sum(&self.symbol, &o.symbol), ..self.clone() })
    }

    fn zero_section(&self) -> Section {
        vec![SuperElement::zero(&self.ring); self.k]
    }

    fn zero_field(&self) -> Vec<SuperElement> {
        vec![SuperElement::zero(&self.ring); self.m]
    }

    pub fn basis_section(&self, beta: usize) -> Section {
        let mut s = self.zero_section();
        s[beta] = SuperElement::one(&self.ring);
        s
    }

    /// `D(e_I)` for any index order.
    pub fn comp(&self, idx: &[usize]) -> Section {
        match sort_sign(idx) {
            None => self.zero_section(),
            Some((s, odd)) => self.comps[&s].iter().map(|p| if odd { -p } else { p.clone() }).collect(),
        }
    }

    /// `σ_D(e_J)` for any index order.
    pub fn symbol_basis(&self, idx: &[usize]) -> Vec<SuperElement> {
        if self.degree < 0 {
            return self.zero_field();
        }
        match sort_sign(idx) {
            None => self.zero_field(),
            Some((s, odd)) => self.symbol[&s].iter().map(|p| if odd { -p } else { p.clone() }).collect(),
        }
    }

    /// Vector field applied to a function.
    pub fn apply_field(field: &[SuperElement], f: &SuperElement) -> SuperElement {
        field.iter().enumerate().fold(SuperElement::zero(f.gens()), |acc, (i, x)| &acc + &(x * &f.partial_even(i)))
    }

    /// `σ_D(s_1..s_p)`, function-linear in every slot.
    pub fn symbol_eval(&self, args: &[Section]) -> Vec<SuperElement> {
        let mut out = self.zero_field();
        if self.degree < 0 {
            return out;
        }
        assert_eq!(args.len() as i64, self.degree);
        self.for_each_tuple(args, &mut |betas, coef| {
            let v = self.symbol_basis(betas);
            for (o, x) in out.iter_mut().zip(&v) {
                *o = &*o + &(coef * x);
            }
        });
        out
    }

    fn for_each_tuple(&self, args: &[Section], f: &mut dyn FnMut(&[usize], &SuperElement)) {
        fn rec(args: &[Section], pos: usize, idx: &mut Vec<usize>, coef: SuperElement, f: &mut dyn FnMut(&[usize], &SuperElement)) {
            if pos == args.len() {
                f(idx, &coef);
                return;
            }
            for (b, p) in args[pos].iter().enumerate() {
                if p.is_zero() || idx.contains(&b) {
                    continue;
                }
                idx.push(b);
                rec(args, pos + 1, idx, &coef * p, f);
                idx.pop();
            }
        }
        rec(args, 0, &mut Vec::new(), SuperElement::one(&self.ring), f);
    }

    /// Evaluation on polynomial sections via the Leibniz rule
    /// `D(f_0a_0..f_pa_p) = Πf·D(a) + Σ_j Π_{l≠j}f_l (−1)^{p−j} σ(a..â_j..)(f_j) a_j`.
    pub fn eval(&self, args: &[Section]) -> Section {
        if self.degree < -1 {
            return self.zero_section();
        }
        let p = self.degree;
        assert_eq!(args.len() as i64, p + 1);
        let mut out = self.zero_section();
        // basis choices for every slot, repetitions allowed (the symbol terms see them)
        let mut stack: Vec<(Vec<usize>, Vec<SuperElement>)> = vec![(vec![], vec![])];
        for a in args {
            let mut next = Vec::new();
            for (idx, fs) in &stack {
                for (b, f) in a.iter().enumerate() {
                    if f.is_zero() {
                        continue;
                    }
                    let mut i2 = idx.clone();
                    i2.push(b);
                    let mut f2 = fs.clone();
                    f2.push(f.clone());
                    next.push((i2, f2));
                }
            }
            stack = next;
        }
        for (idx, fs) in stack {
            let prod = fs.iter().fold(SuperElement::one(&self.ring), |acc, f| &acc * f);
            let v = self.comp(&idx);
            for (o, x) in out.iter_mut().zip(&v) {
                *o = &*o + &(&prod * x);
            }
            for j in 0..idx.len() {
                let rest: Vec<usize> = idx.iter().enumerate().filter(|(l, _)| *l != j).map(|(_, &b)| b).collect();
                let field = self.symbol_basis(&rest);
                let df = Self::apply_field(&field, &fs[j]);
                if df.is_zero() {
                    continue;
                }
                let others = fs.iter().enumerate().filter(|(l, _)| *l != j).fold(SuperElement::one(&self.ring), |acc, (_, f)| &acc * f);
                let t = &others * &df;
                let t = if parity(p - j as i64) { -t } else { t };
                out[idx[j]] = &out[idx[j]] + &t;
            }
        }
        out
    }

    fn check_bundle(&self, o: &Self) -> Result<(), MultilinearError> {
        if self.m != o.m || self.k != o.k {
            Err(MultilinearError::BundleMismatch)
        } else {
            Ok(())
        }
    }

    /// `Σ_{(b+1,a)-shuffles} ± A(B(x_π..), x_π..)`, `a = deg A`, `b = deg B`.
    fn compose_eval(a: &Self, b: &Self, args: &[Section]) -> Section {
        let (pa, pb) = (a.degree, b.degree);
        let mut out = a.zero_section();
        if pa < 0 || pb < -1 {
            return out;
        }
        for (first, second, odd) in shuffles((pb + 1) as usize, pa as usize) {
            let inner: Vec<Section> = first.iter().map(|&i| args[i].clone()).collect();
            let mut outer = vec![b.eval(&inner)];
            outer.extend(second.iter().map(|&i| args[i].clone()));
            let v = a.eval(&outer);
            for (o, x) in out.iter_mut().zip(&v) {
                *o = if odd { &*o - x } else { &*o + x };
            }
        }
        out
    }

    /// `[D₁,D₂]_CM(s..) = (−1)^{pq} D₁∘D₂ − D₂∘D₁` evaluated directly on sections.
    pub fn bracket_eval(d1: &Self, d2: &Self, args: &[Section]) -> Section {
        let s = sign(parity(d1.degree * d2.degree));
        let x = Self::compose_eval(d1, d2, args);
        let y = Self::compose_eval(d2, d1, args);
        x.iter().zip(&y).map(|(a, b)| &a.scale(&s) - b).collect()
    }

    /// `Σ_{(r, n−r)} ± φ(args_first, args_second)` helper over basis sections for symbol terms.
    fn symbol_compose(sig: &Self, d: &Self, idx: &[usize]) -> Vec<SuperElement> {
        // σ_sig(d(e_first), e_second) over (deg d + 1, deg sig − 1)-shuffles
        let mut out = sig.zero_field();
        let (ps, pd) = (sig.degree, d.degree);
        if ps < 1 || pd < -1 {
            return out;
        }
        for (first, second, odd) in shuffles((pd + 1) as usize, (ps - 1) as usize) {
            let inner: Vec<usize> = first.iter().map(|&i| idx[i]).collect();
            let mut args = vec![d.comp(&inner)];
            args.extend(second.iter().map(|&i| sig.basis_section(idx[i])));
            let v = sig.symbol_eval(&args);
            for (o, x) in out.iter_mut().zip(&v) {
                *o = if odd { &*o - x } else { &*o + x };
            }
        }
        out
    }

    /// Crainic–Moerdijk bracket. Components come from the operator formula on
    /// constant sections; the symbol from
    /// `(−1)^{pq} σ₁∘D₂ − σ₂∘D₁ + [σ₁,σ₂]`.
    pub fn cm_bracket(&self, other: &Self) -> Result<Self, MultilinearError> {
        self.check_bundle(other)?;
        let (p, qd) = (self.degree, other.degree);
        let deg = (p + qd).max(-2);
        let mut out = Self::zero_on(&self.ring, self.k, deg);
        if p < -1 || qd < -1 {
            return Ok(out);
        }
        let keys: Vec<Vec<usize>> = out.comps.keys().cloned().collect();
        for key in keys {
            let args: Vec<Section> = key.iter().map(|&b| self.basis_section(b)).collect();
            out.comps.insert(key, Self::bracket_eval(self, other, &args));
        }
        if deg >= 0 {
            let s = sign(parity(p * qd));
            let keys: Vec<Vec<usize>> = out.symbol.keys().cloned().collect();
            for key in keys {
                let a = Self::symbol_compose(self, other, &key);
                let b = Self::symbol_compose(other, self, &key);
                let mut v: Vec<SuperElement> = a.iter().zip(&b).map(|(x, y)| &x.scale(&s) - y).collect();
                if p >= 0 && qd >= 0 {
                    for (first, second, odd) in shuffles(p as usize, qd as usize) {
                        let x: Vec<usize> = first.iter().map(|&i| key[i]).collect();
                        let y: Vec<usize> = second.iter().map(|&i| key[i]).collect();
                        let (fx, fy) = (self.symbol_basis(&x), other.symbol_basis(&y));
                        for (i, o) in v.iter_mut().enumerate() {
                            let c = &Self::apply_field(&fx, &fy[i]) - &Self::apply_field(&fy, &fx[i]);
                            *o = if odd { &*o - &c } else { &*o + &c };
                        }
                    }
                }
                out.symbol.insert(key, v);
            }
        }
        Ok(out)
    }

    /// Symbol of `[D₁,D₂]` read off from the operator bracket through
    /// `[D₁,D₂](e_J, x_i e_β) − x_i [D₁,D₂](e_J, e_β) = σ(e_J)(x_i) e_β`.
    pub fn symbol_by_leibniz(d1: &Self, d2: &Self, j: &[usize]) -> Vec<SuperElement> {
        let mut args: Vec<Section> = j.iter().map(|&b| d1.basis_section(b)).collect();
        let beta = 0;
        (0..d1.m)
            .map(|i| {
                let xi = SuperElement::even_gen(&d1.ring, i);
                args.push(d1.basis_section(beta).iter().map(|p| p * &xi).collect());
                let a = Self::bracket_eval(d1, d2, &args);
                args.pop();
                args.push(d1.basis_section(beta));
                let b = Self::bracket_eval(d1, d2, &args);
                args.pop();
                &a[beta] - &(&xi * &b[beta])
            })
            .collect()
    }

    /// Coordinates in the weight-`w` basis (see [`weight_space_dim`]).
    fn to_weight_vec(&self, w: i64) -> Vec<Q> {
        let (dc, ds) = (w - self.degree, w - self.degree + 1);
        let mut out = Vec::new();
        for v in self.comps.values() {
            for p in v {
                for mono in monomials(self.m, dc) {
                    out.push(p.coeff(&mono));
                }
            }
        }
        for v in self.symbol.values() {
            for p in v {
                for mono in monomials(self.m, ds) {
                    out.push(p.coeff(&mono));
                }
            }
        }
        out
    }

    fn from_weight_vec(m: usize, k: usize, degree: i64, w: i64, x: &[Q]) -> Self {
        let mut d = Self::zero(m, k, degree);
        let ring = d.ring.clone();
        let (dc, ds) = (w - degree, w - degree + 1);
        let mut it = x.iter();
        for v in d.comps.values_mut() {
            for p in v.iter_mut() {
                for mono in monomials(m, dc) {
                    p.add_term(mono, it.next().unwrap().clone());
                }
            }
        }
        for v in d.symbol.values_mut() {
            for p in v.iter_mut() {
                for mono in monomials(m, ds) {
                    p.add_term(mono, it.next().unwrap().clone());
                }
            }
        }
        let _ = ring;
        d
    }

    /// Dimension of the weight-`w` part of `Der^p(ℝ^m × ℝ^k)`: components of
    /// polynomial degree `w − p`, symbol of degree `w − p + 1`.
    pub fn weight_space_dim(m: usize, k: usize, degree: i64, w: i64) -> usize {
        Self::zero(m, k, degree).to_weight_vec(w).len()
    }

    pub fn weight_basis(m: usize, k: usize, degree: i64, w: i64) -> Vec<Self> {
        let n = Self::weight_space_dim(m, k, degree, w);
        (0..n)
            .map(|i| {
                let mut v = vec![Q::zero(); n];
                v[i] = q(1);
                Self::from_weight_vec(m, k, degree, w, &v)
            })
            .collect()
    }
}

fn delta_weight_matrix(m: usize, p: i64, w: i64) -> MatrixQ {
    let tan = MultiDerivation::tangent(m);
    let rows = MultiDerivation::weight_space_dim(m, m, p + 1, w);
    let cols: Vec<Vec<Q>> = MultiDerivation::weight_basis(m, m, p, w)
        .iter()
        .map(|b| tan.cm_bracket(b).unwrap().to_weight_vec(w))
        .collect();
    if cols.is_empty() {
        MatrixQ::zeros(rows, 0)
    } else {
        MatrixQ::from_cols(rows, &cols)
    }
}

/// `dim H^p` of `(Der^•(TM), [m,·]_CM)` restricted to weight `w`, for each `p` in `degrees`.
pub fn tm_cohomology_dims(m: usize, degrees: std::ops::RangeInclusive<i64>, w: i64) -> Vec<(i64, usize)> {
    degrees
        .map(|p| {
            let z = kernel_basis(&delta_weight_matrix(m, p, w)).dim();
            let b = if p - 1 >= -1 { rank(&delta_weight_matrix(m, p - 1, w)) } else { 0 };
            (p, z - b)
        })
        .collect()
}
