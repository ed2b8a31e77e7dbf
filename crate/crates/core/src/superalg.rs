//! Free supercommutative algebra `ℚ[even] ⊗ Λ(odd)` with graded calculus.
//!
//! A monomial is an exponent vector over the even generators together with a
//! bitmask of odd generators. The odd factors are always stored in ascending
//! generator order; the sign of any reordering is absorbed into the
//! coefficient at construction time.

use crate::ratlin::{fmt_q, parse_q, q, Q};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SuperError {
    #[error("elements live over different generator sets")]
    GeneratorMismatch,
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("insertion argument is not linear in odd generators")]
    NotOddLinear,
    #[error("element is not homogeneous")]
    NotHomogeneous,
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvenRole {
    Base,
    Momentum,
    Fiber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OddRole {
    Lower,
    Upper,
    BaseConj,
    FiberConj,
    Form,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GeneratorSet {
    even: Vec<(String, EvenRole)>,
    odd: Vec<(String, OddRole)>,
    /// lower ↔ upper pairing of odd generators
    dual: Vec<Option<usize>>,
    /// odd generator ↔ conjugate even generator (multivector sets)
    conj: Vec<Option<usize>>,
}

impl GeneratorSet {
    /// Even `q1..qm, p_1..p_m`, odd `a_1..a_k` followed by `a^1..a^k`.
    pub fn rothstein(m: usize, k: usize) -> Arc<Self> {
        let mut even: Vec<_> = (1..=m).map(|i| (format!("q{i}"), EvenRole::Base)).collect();
        even.extend((1..=m).map(|i| (format!("p_{i}"), EvenRole::Momentum)));
        let mut odd: Vec<_> = (1..=k).map(|a| (format!("a_{a}"), OddRole::Lower)).collect();
        odd.extend((1..=k).map(|a| (format!("a^{a}"), OddRole::Upper)));
        let mut dual = vec![None; 2 * k];
        for a in 0..k {
            dual[a] = Some(k + a);
            dual[k + a] = Some(a);
        }
        Arc::new(GeneratorSet { even, odd, dual, conj: vec![None; 2 * k] })
    }

    /// Even `x1..xm, v1..vk`, odd `X1..Xm, V1..Vk` with `Xi` conjugate to `xi`.
    pub fn multivector(m: usize, k: usize) -> Arc<Self> {
        let mut even: Vec<_> = (1..=m).map(|i| (format!("x{i}"), EvenRole::Base)).collect();
        even.extend((1..=k).map(|a| (format!("v{a}"), EvenRole::Fiber)));
        let mut odd: Vec<_> = (1..=m).map(|i| (format!("X{i}"), OddRole::BaseConj)).collect();
        odd.extend((1..=k).map(|a| (format!("V{a}"), OddRole::FiberConj)));
        let conj = (0..m + k).map(Some).collect();
        Arc::new(GeneratorSet { even, odd, dual: vec![None; m + k], conj })
    }

    /// Even `x1..xm`, odd `e^1..e^k`: forms on a rank-k bundle over ℝ^m.
    pub fn forms(m: usize, k: usize) -> Arc<Self> {
        let even = (1..=m).map(|i| (format!("x{i}"), EvenRole::Base)).collect();
        let odd = (1..=k).map(|a| (format!("e^{a}"), OddRole::Form)).collect();
        Arc::new(GeneratorSet { even, odd, dual: vec![None; k], conj: vec![None; k] })
    }

    pub fn n_even(&self) -> usize {
        self.even.len()
    }

    pub fn n_odd(&self) -> usize {
        self.odd.len()
    }

    pub fn even_name(&self, i: usize) -> &str {
        &self.even[i].0
    }

    pub fn odd_name(&self, a: usize) -> &str {
        &self.odd[a].0
    }

    pub fn even_role(&self, i: usize) -> EvenRole {
        self.even[i].1
    }

    pub fn odd_role(&self, a: usize) -> OddRole {
        self.odd[a].1
    }

    pub fn dual_of(&self, a: usize) -> Option<usize> {
        self.dual[a]
    }

    pub fn conj_of(&self, a: usize) -> Option<usize> {
        self.conj[a]
    }

    pub fn even_index(&self, name: &str) -> Option<usize> {
        self.even.iter().position(|(n, _)| n == name)
    }

    pub fn odd_index(&self, name: &str) -> Option<usize> {
        self.odd.iter().position(|(n, _)| n == name)
    }

    pub fn count_even(&self, role: EvenRole) -> usize {
        self.even.iter().filter(|(_, r)| *r == role).count()
    }

    pub fn count_odd(&self, role: OddRole) -> usize {
        self.odd.iter().filter(|(_, r)| *r == role).count()
    }
}

/// Monomial: even exponents and the set of odd factors (ascending).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono {
    pub e: Vec<u32>,
    pub o: u64,
}

impl Mono {
    pub fn one(n_even: usize) -> Self {
        Mono { e: vec![0; n_even], o: 0 }
    }

    pub fn odd_degree(&self) -> u32 {
        self.o.count_ones()
    }

    pub fn even_degree(&self) -> u32 {
        self.e.iter().sum()
    }

    /// Product of monomials with its Koszul sign, or `None` if an odd factor repeats.
    pub fn mul(&self, other: &Mono) -> Option<(Mono, bool)> {
        if self.o & other.o != 0 {
            return None;
        }
        let mut swaps = 0u32;
        let mut rest = other.o;
        while rest != 0 {
            let j = rest.trailing_zeros();
            swaps += (self.o >> j).count_ones();
            rest &= rest - 1;
        }
        let e = self.e.iter().zip(&other.e).map(|(a, b)| a + b).collect();
        Some((Mono { e, o: self.o | other.o }, swaps % 2 == 1))
    }
}

fn bits(mut o: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if o == 0 {
            None
        } else {
            let j = o.trailing_zeros() as usize;
            o &= o - 1;
            Some(j)
        }
    })
}

#[derive(Clone, PartialEq, Eq)]
pub struct SuperElement {
    gens: Arc<GeneratorSet>,
    terms: BTreeMap<Mono, Q>,
}

impl SuperElement {
    pub fn zero(gens: &Arc<GeneratorSet>) -> Self {
        SuperElement { gens: gens.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(gens: &Arc<GeneratorSet>, c: Q) -> Self {
        let mut s = Self::zero(gens);
        s.add_term(Mono::one(gens.n_even()), c);
        s
    }

    pub fn one(gens: &Arc<GeneratorSet>) -> Self {
        Self::constant(gens, Q::one())
    }

    pub fn even_gen(gens: &Arc<GeneratorSet>, i: usize) -> Self {
        let mut m = Mono::one(gens.n_even());
        m.e[i] = 1;
        Self::from_mono(gens, m, Q::one())
    }

    pub fn odd_gen(gens: &Arc<GeneratorSet>, a: usize) -> Self {
        let mut m = Mono::one(gens.n_even());
        m.o = 1 << a;
        Self::from_mono(gens, m, Q::one())
    }

    /// Generator looked up by name.
    pub fn gen(gens: &Arc<GeneratorSet>, name: &str) -> Result<Self, SuperError> {
        if let Some(i) = gens.even_index(name) {
            Ok(Self::even_gen(gens, i))
        } else if let Some(a) = gens.odd_index(name) {
            Ok(Self::odd_gen(gens, a))
        } else {
            Err(SuperError::UnknownGenerator(name.to_string()))
        }
    }

    pub fn from_mono(gens: &Arc<GeneratorSet>, m: Mono, c: Q) -> Self {
        let mut s = Self::zero(gens);
        s.add_term(m, c);
        s
    }

    /// Product of odd generators in the given (not necessarily sorted) order.
    pub fn odd_product(gens: &Arc<GeneratorSet>, idx: &[usize]) -> Self {
        idx.iter().fold(Self::one(gens), |acc, &a| &acc * &Self::odd_gen(gens, a))
    }

    pub fn gens(&self) -> &Arc<GeneratorSet> {
        &self.gens
    }

    pub fn terms(&self) -> &BTreeMap<Mono, Q> {
        &self.terms
    }

    pub fn into_terms(self) -> BTreeMap<Mono, Q> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: Mono, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn coeff(&self, m: &Mono) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    /// Constant term.
    pub fn constant_term(&self) -> Q {
        self.coeff(&Mono::one(self.gens.n_even()))
    }

    pub fn same_gens(&self, other: &SuperElement) -> bool {
        Arc::ptr_eq(&self.gens, &other.gens) || *self.gens == *other.gens
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero(&self.gens);
        }
        SuperElement {
            gens: self.gens.clone(),
            terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect(),
        }
    }

    pub fn checked_mul(&self, other: &SuperElement) -> Result<SuperElement, SuperError> {
        if !self.same_gens(other) {
            return Err(SuperError::GeneratorMismatch);
        }
        let mut out = Self::zero(&self.gens);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                if let Some((m, neg)) = m1.mul(m2) {
                    let c = c1 * c2;
                    out.add_term(m, if neg { -c } else { c });
                }
            }
        }
        Ok(out)
    }

    pub fn checked_add(&self, other: &SuperElement) -> Result<SuperElement, SuperError> {
        if !self.same_gens(other) {
            return Err(SuperError::GeneratorMismatch);
        }
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::one(&self.gens), |acc, _| &acc * self)
    }

    /// `∂/∂(even generator i)`.
    pub fn partial_even(&self, i: usize) -> Self {
        let mut out = Self::zero(&self.gens);
        for (m, c) in &self.terms {
            let k = m.e[i];
            if k > 0 {
                let mut m2 = m.clone();
                m2.e[i] -= 1;
                out.add_term(m2, c * q(k as i64));
            }
        }
        out
    }

    /// Left derivative by odd generator `a`.
    pub fn partial_odd(&self, a: usize) -> Self {
        let bit = 1u64 << a;
        let mut out = Self::zero(&self.gens);
        for (m, c) in &self.terms {
            if m.o & bit != 0 {
                let before = (m.o & (bit - 1)).count_ones();
                let mut m2 = m.clone();
                m2.o &= !bit;
                out.add_term(m2, if before % 2 == 1 { -c.clone() } else { c.clone() });
            }
        }
        out
    }

    /// Right derivative by odd generator `a`.
    pub fn partial_odd_right(&self, a: usize) -> Self {
        let bit = 1u64 << a;
        let mut out = Self::zero(&self.gens);
        for (m, c) in &self.terms {
            if m.o & bit != 0 {
                let after = (m.o >> (a + 1)).count_ones();
                let mut m2 = m.clone();
                m2.o &= !bit;
                out.add_term(m2, if after % 2 == 1 { -c.clone() } else { c.clone() });
            }
        }
        out
    }

    pub fn partial_by_name(&self, name: &str) -> Result<Self, SuperError> {
        if let Some(i) = self.gens.even_index(name) {
            Ok(self.partial_even(i))
        } else if let Some(a) = self.gens.odd_index(name) {
            Ok(self.partial_odd(a))
        } else {
            Err(SuperError::UnknownGenerator(name.to_string()))
        }
    }

    /// Coefficients of `s = Σ f_a θ_a` (each term carries exactly one odd factor).
    fn odd_linear_parts(s: &SuperElement) -> Result<Vec<(usize, SuperElement)>, SuperError> {
        let mut parts: BTreeMap<usize, SuperElement> = BTreeMap::new();
        for (m, c) in &s.terms {
            if m.odd_degree() != 1 {
                return Err(SuperError::NotOddLinear);
            }
            let a = m.o.trailing_zeros() as usize;
            let mut m2 = m.clone();
            m2.o = 0;
            parts.entry(a).or_insert_with(|| Self::zero(&s.gens)).add_term(m2, c.clone());
        }
        Ok(parts.into_iter().collect())
    }

    /// `i(s)φ`: left derivative along an odd-linear element.
    pub fn insert_left(s: &SuperElement, phi: &SuperElement) -> Result<SuperElement, SuperError> {
        if !s.same_gens(phi) {
            return Err(SuperError::GeneratorMismatch);
        }
        let mut out = Self::zero(&phi.gens);
        for (a, f) in Self::odd_linear_parts(s)? {
            out = &out + &(&f * &phi.partial_odd(a));
        }
        Ok(out)
    }

    /// `j(s)φ`: right derivative along an odd-linear element.
    pub fn insert_right(s: &SuperElement, phi: &SuperElement) -> Result<SuperElement, SuperError> {
        if !s.same_gens(phi) {
            return Err(SuperError::GeneratorMismatch);
        }
        let mut out = Self::zero(&phi.gens);
        for (a, f) in Self::odd_linear_parts(s)? {
            out = &out + &(&phi.partial_odd_right(a) * &f);
        }
        Ok(out)
    }

    /// Splits by number of odd factors.
    pub fn odd_components(&self) -> BTreeMap<u32, SuperElement> {
        let mut out: BTreeMap<u32, SuperElement> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(m.odd_degree()).or_insert_with(|| Self::zero(&self.gens)).add_term(m.clone(), c.clone());
        }
        out
    }

    /// Odd degree if homogeneous (zero counts as degree 0).
    pub fn odd_degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|m| m.odd_degree());
        let first = it.next().unwrap_or(0);
        it.all(|d| d == first).then_some(first)
    }

    /// Parity: `Some(0)` even, `Some(1)` odd, `None` mixed.
    pub fn parity(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|m| m.odd_degree() % 2);
        let first = it.next().unwrap_or(0);
        it.all(|d| d == first).then_some(first)
    }

    pub fn max_even_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.even_degree()).max().unwrap_or(0)
    }

    /// True when no odd generator and no even generator outside `allowed` occurs.
    pub fn only_even_in(&self, allowed: &[usize]) -> bool {
        self.terms.keys().all(|m| {
            m.o == 0 && m.e.iter().enumerate().all(|(i, &k)| k == 0 || allowed.contains(&i))
        })
    }

    pub fn mono_bidegree(&self, m: &Mono) -> (u32, u32) {
        let mut eps = 0;
        let mut lam = 0;
        for (i, &k) in m.e.iter().enumerate() {
            if self.gens.even_role(i) == EvenRole::Momentum {
                eps += k;
                lam += k;
            }
        }
        for a in bits(m.o) {
            match self.gens.odd_role(a) {
                OddRole::Lower => eps += 1,
                OddRole::Upper => lam += 1,
                _ => {}
            }
        }
        (eps, lam)
    }

    /// Components of bidegree `(ε, λ)`; `ε` counts momenta and lower odd
    /// generators, `λ` counts momenta and upper odd generators.
    pub fn bidegree_components(&self) -> BTreeMap<(u32, u32), SuperElement> {
        let mut out: BTreeMap<(u32, u32), SuperElement> = BTreeMap::new();
        for (m, c) in &self.terms {
            let bd = self.mono_bidegree(m);
            out.entry(bd).or_insert_with(|| Self::zero(&self.gens)).add_term(m.clone(), c.clone());
        }
        out
    }

    /// Ghost number `#upper − #lower` if homogeneous.
    pub fn ghost(&self) -> Option<i64> {
        let mut it = self.terms.keys().map(|m| {
            let (e, l) = self.mono_bidegree(m);
            l as i64 - e as i64
        });
        let first = it.next().unwrap_or(0);
        it.all(|d| d == first).then_some(first)
    }

    fn mono_weight(&self, m: &Mono) -> i64 {
        let fib: i64 = m
            .e
            .iter()
            .enumerate()
            .filter(|(i, _)| self.gens.even_role(*i) == EvenRole::Fiber)
            .map(|(_, &k)| k as i64)
            .sum();
        let conj = bits(m.o).filter(|&a| self.gens.odd_role(a) == OddRole::FiberConj).count() as i64;
        fib - conj
    }

    /// Eigenvalue of the fiber Euler field: fiber degree minus the number of
    /// fiber-conjugate odd factors. `Ok(None)` for zero.
    pub fn euler_weight(&self) -> Result<Option<i64>, SuperError> {
        let mut it = self.terms.keys().map(|m| self.mono_weight(m));
        let Some(first) = it.next() else { return Ok(None) };
        if it.all(|w| w == first) {
            Ok(Some(first))
        } else {
            Err(SuperError::NotHomogeneous)
        }
    }

    pub fn weight_components(&self) -> BTreeMap<i64, SuperElement> {
        let mut out: BTreeMap<i64, SuperElement> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(self.mono_weight(m)).or_insert_with(|| Self::zero(&self.gens)).add_term(m.clone(), c.clone());
        }
        out
    }

    /// Re-expresses the element over `target`, sending even generator `i` to
    /// `even_map[i]` and odd generator `a` to `odd_map[a]`.
    pub fn embed(&self, target: &Arc<GeneratorSet>, even_map: &[usize], odd_map: &[usize]) -> SuperElement {
        let mut out = Self::zero(target);
        for (m, c) in &self.terms {
            let mut e = vec![0; target.n_even()];
            for (i, &k) in m.e.iter().enumerate() {
                e[even_map[i]] += k;
            }
            let odd: Vec<usize> = bits(m.o).map(|a| odd_map[a]).collect();
            let base = Self::from_mono(target, Mono { e, o: 0 }, c.clone());
            out = &out + &(&base * &Self::odd_product(target, &odd));
        }
        out
    }

    /// Embeds a purely even element whose even generators map to the first ones of `target`.
    pub fn embed_prefix(&self, target: &Arc<GeneratorSet>) -> SuperElement {
        let em: Vec<usize> = (0..self.gens.n_even()).collect();
        let om: Vec<usize> = (0..self.gens.n_odd()).collect();
        self.embed(target, &em, &om)
    }

    /// Substitutes even generator `i` by `value` (which must be even).
    pub fn substitute_even(&self, i: usize, value: &SuperElement) -> SuperElement {
        let mut out = Self::zero(&self.gens);
        for (m, c) in &self.terms {
            let k = m.e[i];
            let mut m2 = m.clone();
            m2.e[i] = 0;
            let t = Self::from_mono(&self.gens, m2, c.clone());
            out = &out + &(&value.pow(k) * &t);
        }
        out
    }

    /// Coefficient of the odd monomial `o`, re-expressed over `target`
    /// (whose even generators are a prefix of ours).
    pub fn odd_coefficient(&self, o: u64, target: &Arc<GeneratorSet>) -> SuperElement {
        let n = target.n_even();
        let mut out = Self::zero(target);
        for (m, c) in &self.terms {
            if m.o == o {
                debug_assert!(m.e[n..].iter().all(|&k| k == 0));
                out.add_term(Mono { e: m.e[..n].to_vec(), o: 0 }, c.clone());
            }
        }
        out
    }

    /// Float evaluation of a purely even element.
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .filter(|(m, _)| m.o == 0)
            .map(|(m, c)| {
                m.e.iter().zip(point).fold(crate::ratlin::to_f64(c), |acc, (&k, &x)| acc * x.powi(k as i32))
            })
            .sum()
    }

    /// Exact evaluation of a purely even element.
    pub fn eval_q(&self, point: &[Q]) -> Q {
        self.terms
            .iter()
            .filter(|(m, _)| m.o == 0)
            .map(|(m, c)| {
                m.e.iter().zip(point).fold(c.clone(), |acc, (&k, x)| acc * num_traits::pow(x.clone(), k as usize))
            })
            .sum()
    }

    pub fn parse(gens: &Arc<GeneratorSet>, text: &str) -> Result<SuperElement, SuperError> {
        let mut out = Self::zero(gens);
        let mut cur = Self::one(gens);
        let mut sign = Q::one();
        let mut fresh = true;
        let mut started = false;
        let flush = |out: &mut SuperElement, cur: &SuperElement, sign: &Q| *out = &*out + &cur.scale(sign);
        for tok in text.split_whitespace() {
            if tok == "+" || tok == "-" {
                if started {
                    flush(&mut out, &cur, &sign);
                }
                cur = Self::one(gens);
                sign = if tok == "-" { -Q::one() } else { Q::one() };
                fresh = true;
                started = false;
                continue;
            }
            let mut tok = tok;
            if fresh && tok.len() > 1 && tok.starts_with('-') && parse_q(tok).is_none() {
                sign = -sign;
                tok = &tok[1..];
            }
            fresh = false;
            started = true;
            if tok == "0" {
                cur = Self::zero(gens);
                continue;
            }
            if let Some(c) = parse_q(tok) {
                cur = cur.scale(&c);
                continue;
            }
            let factor = if let Ok(g) = Self::gen(gens, tok) {
                g
            } else if let Some((name, pw)) = tok.rsplit_once('^') {
                let i = gens.even_index(name).ok_or_else(|| SuperError::UnknownGenerator(tok.to_string()))?;
                let k: u32 = pw.parse().map_err(|_| SuperError::Parse(format!("bad exponent in `{tok}`")))?;
                Self::even_gen(gens, i).pow(k)
            } else {
                return Err(SuperError::UnknownGenerator(tok.to_string()));
            };
            cur = &cur * &factor;
        }
        if started {
            flush(&mut out, &cur, &sign);
        } else if !text.trim().is_empty() {
            return Err(SuperError::Parse("dangling sign".into()));
        }
        Ok(out)
    }

    fn fmt_mono(&self, m: &Mono) -> String {
        let mut parts = Vec::new();
        for (i, &k) in m.e.iter().enumerate() {
            match k {
                0 => {}
                1 => parts.push(self.gens.even_name(i).to_string()),
                _ => parts.push(format!("{}^{}", self.gens.even_name(i), k)),
            }
        }
        for a in bits(m.o) {
            parts.push(self.gens.odd_name(a).to_string());
        }
        parts.join(" ")
    }
}

impl fmt::Display for SuperElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (m, c)) in self.terms.iter().enumerate() {
            let body = self.fmt_mono(m);
            let abs = c.abs();
            let neg = c.is_negative();
            if n == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            if body.is_empty() {
                write!(f, "{}", fmt_q(&abs))?;
            } else if abs.is_one() {
                write!(f, "{body}")?;
            } else {
                write!(f, "{} {body}", fmt_q(&abs))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SuperElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SuperElement({self})")
    }
}

impl<'a> Add<&'a SuperElement> for &'a SuperElement {
    type Output = SuperElement;
    fn add(self, rhs: &SuperElement) -> SuperElement {
        self.checked_add(rhs).expect("generator sets differ")
    }
}

impl<'a> Sub<&'a SuperElement> for &'a SuperElement {
    type Output = SuperElement;
    fn sub(self, rhs: &SuperElement) -> SuperElement {
        self.checked_add(&-rhs).expect("generator sets differ")
    }
}

impl<'a> Mul<&'a SuperElement> for &'a SuperElement {
    type Output = SuperElement;
    fn mul(self, rhs: &SuperElement) -> SuperElement {
        self.checked_mul(rhs).expect("generator sets differ")
    }
}

impl Neg for &SuperElement {
    type Output = SuperElement;
    fn neg(self) -> SuperElement {
        self.scale(&-Q::one())
    }
}

impl Add for SuperElement {
    type Output = SuperElement;
    fn add(self, rhs: SuperElement) -> SuperElement {
        &self + &rhs
    }
}

impl Sub for SuperElement {
    type Output = SuperElement;
    fn sub(self, rhs: SuperElement) -> SuperElement {
        &self - &rhs
    }
}

impl Mul for SuperElement {
    type Output = SuperElement;
    fn mul(self, rhs: SuperElement) -> SuperElement {
        &self * &rhs
    }
}

impl Neg for SuperElement {
    type Output = SuperElement;
    fn neg(self) -> SuperElement {
        -&self
    }
}

/// Christoffel symbols `Γ[i][α][β] = Γ_{iα}^β` on a Rothstein generator set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionData {
    gens: Arc<GeneratorSet>,
    m: usize,
    k: usize,
    gamma: Vec<Vec<Vec<SuperElement>>>,
}

impl ConnectionData {
    pub fn flat(gens: &Arc<GeneratorSet>) -> Self {
        let m = gens.count_even(EvenRole::Base);
        let k = gens.count_odd(OddRole::Lower);
        let gamma = vec![vec![vec![SuperElement::zero(gens); k]; k]; m];
        ConnectionData { gens: gens.clone(), m, k, gamma }
    }

    /// Fails unless every entry is a polynomial in the base coordinates only.
    pub fn new(gens: &Arc<GeneratorSet>, gamma: Vec<Vec<Vec<SuperElement>>>) -> Result<Self, SuperError> {
        let mut c = Self::flat(gens);
        if gamma.len() != c.m || gamma.iter().any(|g| g.len() != c.k || g.iter().any(|r| r.len() != c.k)) {
            return Err(SuperError::Parse("connection shape".into()));
        }
        let base: Vec<usize> = (0..c.m).collect();
        for g in gamma.iter().flatten().flatten() {
            if **g.gens() != **gens || !g.only_even_in(&base) {
                return Err(SuperError::Parse("connection coefficients must be polynomials in q".into()));
            }
        }
        c.gamma = gamma;
        Ok(c)
    }

    /// Random polynomial Christoffels of degree ≤ `deg` with small integer coefficients.
    pub fn random<R: Rng>(gens: &Arc<GeneratorSet>, deg: u32, rng: &mut R) -> Self {
        let mut c = Self::flat(gens);
        for i in 0..c.m {
            for a in 0..c.k {
                for b in 0..c.k {
                    c.gamma[i][a][b] = random_base_poly(gens, c.m, deg, 3, rng);
                }
            }
        }
        c
    }

    pub fn gens(&self) -> &Arc<GeneratorSet> {
        &self.gens
    }

    pub fn base_dim(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn gamma(&self, i: usize, a: usize, b: usize) -> &SuperElement {
        &self.gamma[i][a][b]
    }

    pub fn is_flat(&self) -> bool {
        self.gamma.iter().flatten().flatten().all(|g| g.is_zero())
    }

    /// `R^β_{αij} = ∂_iΓ_{jα}^β − ∂_jΓ_{iα}^β + Γ_{iγ}^βΓ_{jα}^γ − Γ_{jγ}^βΓ_{iα}^γ`.
    pub fn curvature(&self, b: usize, a: usize, i: usize, j: usize) -> SuperElement {
        let mut r = &self.gamma[j][a][b].partial_even(i) - &self.gamma[i][a][b].partial_even(j);
        for g in 0..self.k {
            r = &r + &(&self.gamma[i][g][b] * &self.gamma[j][a][g]);
            r = &r - &(&self.gamma[j][g][b] * &self.gamma[i][a][g]);
        }
        r
    }
}

/// Random polynomial in the first `m` even generators.
pub fn random_base_poly<R: Rng>(gens: &Arc<GeneratorSet>, m: usize, deg: u32, max_terms: usize, rng: &mut R) -> SuperElement {
    let mut out = SuperElement::zero(gens);
    let n = rng.gen_range(0..=max_terms);
    for _ in 0..n {
        let mut mono = Mono::one(gens.n_even());
        let d = rng.gen_range(0..=deg);
        for _ in 0..d {
            if m > 0 {
                mono.e[rng.gen_range(0..m)] += 1;
            }
        }
        out.add_term(mono, q(rng.gen_range(-3..=3)));
    }
    out
}

/// Random element with the given odd degree: each term a random polynomial
/// in the even generators listed in `even_vars` (degree ≤ `deg`) times a
/// product of `odd_deg` distinct odd generators from `odd_vars`.
pub fn random_element<R: Rng>(
    gens: &Arc<GeneratorSet>,
    even_vars: &[usize],
    odd_vars: &[usize],
    deg: u32,
    odd_deg: usize,
    max_terms: usize,
    rng: &mut R,
) -> SuperElement {
    let mut out = SuperElement::zero(gens);
    if odd_deg > odd_vars.len() {
        return out;
    }
    let n = rng.gen_range(1..=max_terms.max(1));
    for _ in 0..n {
        let mut mono = Mono::one(gens.n_even());
        let d = rng.gen_range(0..=deg);
        for _ in 0..d {
            if !even_vars.is_empty() {
                mono.e[even_vars[rng.gen_range(0..even_vars.len())]] += 1;
            }
        }
        let mut pool = odd_vars.to_vec();
        for _ in 0..odd_deg {
            let a = pool.swap_remove(rng.gen_range(0..pool.len()));
            mono.o |= 1 << a;
        }
        out.add_term(mono, q(rng.gen_range(-3..=3)));
    }
    out
}
