use super::{combinations, MultiDerivation, MultiMap, MultilinearError, Section};
use crate::ratlin::q;
use crate::superalg::{GeneratorSet, Mono, SuperElement};
use std::sync::Arc;

fn reversal_odd(k: usize) -> bool {
    (k * k.saturating_sub(1) / 2) % 2 == 1
}

/// Splits the multivector generator set `x, v; X, V` as `(m, r)`.
fn shape(gens: &GeneratorSet) -> (usize, usize) {
    let m = gens.count_odd(crate::superalg::OddRole::BaseConj);
    (m, gens.n_odd() - m)
}

fn check(p: &SuperElement, k: usize) -> Result<(usize, usize), MultilinearError> {
    let gens = p.gens();
    let (m, r) = shape(gens);
    if gens.n_even() != m + r || gens.count_odd(crate::superalg::OddRole::FiberConj) != r {
        return Err(MultilinearError::BundleMismatch);
    }
    if p.is_zero() {
        return Ok((m, r));
    }
    if p.odd_degree() != Some(k as u32) {
        return Err(MultilinearError::NotHomogeneous);
    }
    match p.euler_weight() {
        Ok(Some(w)) if w == 1 - k as i64 => Ok((m, r)),
        _ => Err(MultilinearError::NotHomogeneous),
    }
}

/// Coefficient of `v_γ` in a purely even element linear in the fiber
/// coordinates, as a polynomial in the base coordinates.
fn fiber_linear_coeff(f: &SuperElement, m: usize, gamma: usize, ring: &Arc<GeneratorSet>) -> SuperElement {
    let g = f.partial_even(m + gamma);
    let mut out = SuperElement::zero(ring);
    for (mono, c) in g.terms() {
        out.add_term(Mono { e: mono.e[..m].to_vec(), o: 0 }, c.clone());
    }
    out
}

fn base_coeff(f: &SuperElement, m: usize, ring: &Arc<GeneratorSet>) -> SuperElement {
    let mut out = SuperElement::zero(ring);
    for (mono, c) in f.terms() {
        out.add_term(Mono { e: mono.e[..m].to_vec(), o: 0 }, c.clone());
    }
    out
}

/// `𝓘_k`: a multivector field on `E*` of odd degree `k` and fiber weight `1 − k`
/// to a multiderivation of `E` of degree `k − 1`.
pub fn iso_i(p: &SuperElement, k: usize) -> Result<MultiDerivation, MultilinearError> {
    let (m, r) = check(p, k)?;
    let mut d = MultiDerivation::zero(m, r, k as i64 - 1);
    let ring = d.gens().clone();
    let s = if reversal_odd(k) { q(-1) } else { q(1) };
    let p = p.scale(&s);
    if k <= r {
        for idx in combinations(r, k) {
            let t = idx.iter().fold(p.clone(), |acc, &a| acc.partial_odd(m + a));
            let sec: Section = (0..r).map(|g| fiber_linear_coeff(&t, m, g, &ring)).collect();
            d.set_comp(&idx, sec);
        }
    }
    if k >= 1 && k - 1 <= r {
        for j in combinations(r, k - 1) {
            let t = j.iter().fold(p.clone(), |acc, &a| acc.partial_odd(m + a));
            let field = (0..m).map(|i| base_coeff(&t.partial_odd(i), m, &ring)).collect();
            d.set_symbol(&j, field);
        }
    }
    Ok(d)
}

/// Inverse of [`iso_i`]:
/// `P = ± [Σ D^γ_I v_γ V_{α₁}..V_{α_k} + Σ σ^i_J V_{J₁}..V_{J_{k−1}} X_i]`.
pub fn iso_i_inv(d: &MultiDerivation) -> SuperElement {
    let (m, r) = (d.base_dim(), d.rank());
    let gens = GeneratorSet::multivector(m, r);
    let k = (d.degree() + 1).max(0) as usize;
    let lift = |f: &SuperElement| f.embed_prefix(&gens);
    let mut out = SuperElement::zero(&gens);
    for (idx, sec) in d.comps() {
        let vs: Vec<usize> = idx.iter().map(|&a| m + a).collect();
        let odd = SuperElement::odd_product(&gens, &vs);
        for (g, f) in sec.iter().enumerate() {
            if !f.is_zero() {
                out = &out + &(&(&lift(f) * &SuperElement::even_gen(&gens, m + g)) * &odd);
            }
        }
    }
    for (j, field) in d.symbol() {
        for (i, f) in field.iter().enumerate() {
            if !f.is_zero() {
                let mut vs: Vec<usize> = j.iter().map(|&a| m + a).collect();
                vs.push(i);
                out = &out + &(&lift(f) * &SuperElement::odd_product(&gens, &vs));
            }
        }
    }
    if reversal_odd(k) {
        -out
    } else {
        out
    }
}

/// `𝓘_k(P)(s₁..s_k) = 𝓘₀(i_P dŝ₁∧…∧dŝ_k)`, computed by contracting `P` with
/// the differentials of the fiber-linear functions `ŝ = Σ s^γ v_γ`.
pub fn iso_i_eval(p: &SuperElement, k: usize, sections: &[Section]) -> Result<Section, MultilinearError> {
    let (m, r) = check(p, k)?;
    assert_eq!(sections.len(), k);
    let gens = p.gens().clone();
    let ring = MultiDerivation::ring(m);
    let mut t = if reversal_odd(k) { -p.clone() } else { p.clone() };
    for s in sections {
        let hat = s.iter().enumerate().fold(SuperElement::zero(&gens), |acc, (g, f)| {
            &acc + &(&f.embed_prefix(&gens) * &SuperElement::even_gen(&gens, m + g))
        });
        let mut next = SuperElement::zero(&gens);
        for a in 0..m + r {
            let c = hat.partial_even(a);
            if !c.is_zero() {
                next = &next + &(&c * &t.partial_odd(a));
            }
        }
        t = next;
    }
    Ok((0..r).map(|g| fiber_linear_coeff(&t, m, g, &ring)).collect())
}

/// Linear Poisson tensor on `𝔤*` with `𝓘₂(P) = μ`:
/// `P = −½ Σ c^γ_{αβ} v_γ V_α V_β`.
pub fn lie_poisson_tensor(mu: &MultiMap) -> SuperElement {
    let n = mu.dim();
    let gens = GeneratorSet::multivector(0, n);
    let mut out = SuperElement::zero(&gens);
    for (idx, c) in mu.coeffs() {
        for (g, x) in c.iter().enumerate() {
            if *x != q(0) {
                let t = &SuperElement::even_gen(&gens, g) * &SuperElement::odd_product(&gens, idx);
                out = &out - &t.scale(x);
            }
        }
    }
    out
}
