use super::{combinations, MultiDerivation, MultilinearError};
use crate::ratlin::q;
use crate::superalg::{GeneratorSet, Mono, SuperElement};
use std::sync::Arc;

/// Degree-`k` superderivation of `Ω = Λ•E*` over polynomial functions on
/// `ℝ^m`, `E = ℝ^m × ℝ^r`, fixed by its values on `x^i` and `e^β`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrassmannDerivation {
    gens: Arc<GeneratorSet>,
    degree: i64,
    on_x: Vec<SuperElement>,
    on_e: Vec<SuperElement>,
}

fn sign_of(odd: bool) -> crate::ratlin::Q {
    if odd {
        q(-1)
    } else {
        q(1)
    }
}

impl GrassmannDerivation {
    /// `on_x[i] ∈ Ω^k`, `on_e[β] ∈ Ω^{k+1}`; zero entries are allowed for any `k`.
    pub fn new(gens: &Arc<GeneratorSet>, degree: i64, on_x: Vec<SuperElement>, on_e: Vec<SuperElement>) -> Result<Self, MultilinearError> {
        if on_x.len() != gens.n_even() || on_e.len() != gens.n_odd() {
            return Err(MultilinearError::DimMismatch(on_x.len() + on_e.len(), gens.n_even() + gens.n_odd()));
        }
        let ok = |v: &[SuperElement], d: i64| v.iter().all(|p| p.is_zero() || p.odd_degree().map(|x| x as i64) == Some(d));
        if !ok(&on_x, degree) || !ok(&on_e, degree + 1) {
            return Err(MultilinearError::NotHomogeneous);
        }
        Ok(GrassmannDerivation { gens: gens.clone(), degree, on_x, on_e })
    }

    pub fn zero(gens: &Arc<GeneratorSet>, degree: i64) -> Self {
        let z = SuperElement::zero(gens);
        GrassmannDerivation { gens: gens.clone(), degree, on_x: vec![z.clone(); gens.n_even()], on_e: vec![z; gens.n_odd()] }
    }

    /// de Rham differential of `ℝ^m` (`E = TM`, `e^i = dx^i`).
    pub fn exterior_d(m: usize) -> Self {
        let gens = GeneratorSet::forms(m, m);
        let on_x = (0..m).map(|i| SuperElement::odd_gen(&gens, i)).collect();
        GrassmannDerivation { degree: 1, on_x, on_e: vec![SuperElement::zero(&gens); m], gens }
    }

    /// `i_K` for a vector-valued form `K = Σ K^β ⊗ e_β`, `K^β ∈ Ω^k`; degree `k − 1`.
    pub fn insertion(gens: &Arc<GeneratorSet>, k: i64, kk: Vec<SuperElement>) -> Result<Self, MultilinearError> {
        Self::new(gens, k - 1, vec![SuperElement::zero(gens); gens.n_even()], kk)
    }

    /// `ℒ_K = [i_K, d]` on `Ω(ℝ^m)`.
    pub fn lie_derivative(m: usize, k: i64, kk: Vec<SuperElement>) -> Result<Self, MultilinearError> {
        let gens = GeneratorSet::forms(m, m);
        Self::insertion(&gens, k, kk)?.commutator(&Self::exterior_d(m))
    }

    pub fn gens(&self) -> &Arc<GeneratorSet> {
        &self.gens
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn on_x(&self) -> &[SuperElement] {
        &self.on_x
    }

    pub fn on_e(&self) -> &[SuperElement] {
        &self.on_e
    }

    pub fn is_zero(&self) -> bool {
        self.on_x.iter().chain(&self.on_e).all(|p| p.is_zero())
    }

    pub fn apply(&self, w: &SuperElement) -> SuperElement {
        let mut out = SuperElement::zero(&self.gens);
        for (i, v) in self.on_x.iter().enumerate() {
            if !v.is_zero() {
                out = &out + &(v * &w.partial_even(i));
            }
        }
        for (b, v) in self.on_e.iter().enumerate() {
            if !v.is_zero() {
                out = &out + &(v * &w.partial_odd(b));
            }
        }
        out
    }

    /// `𝖣₁𝖣₂ − (−1)^{kl} 𝖣₂𝖣₁`.
    pub fn commutator(&self, o: &Self) -> Result<Self, MultilinearError> {
        if self.gens != o.gens {
            return Err(MultilinearError::BundleMismatch);
        }
        let s = sign_of((self.degree * o.degree).rem_euclid(2) == 1);
        let f = |w: &SuperElement| &self.apply(&o.apply(w)) - &o.apply(&self.apply(w)).scale(&s);
        let on_x = (0..self.gens.n_even()).map(|i| f(&SuperElement::even_gen(&self.gens, i))).collect();
        let on_e = (0..self.gens.n_odd()).map(|b| f(&SuperElement::odd_gen(&self.gens, b))).collect();
        Ok(GrassmannDerivation { gens: self.gens.clone(), degree: self.degree + o.degree, on_x, on_e })
    }

    pub fn add(&self, o: &Self) -> Self {
        GrassmannDerivation {
            gens: self.gens.clone(),
            degree: self.degree,
            on_x: self.on_x.iter().zip(&o.on_x).map(|(a, b)| a + b).collect(),
            on_e: self.on_e.iter().zip(&o.on_e).map(|(a, b)| a + b).collect(),
        }
    }
}

fn odd_mask(idx: &[usize]) -> u64 {
    idx.iter().fold(0, |a, &i| a | (1 << i))
}

/// `L_D`: `x^i ↦ Σ_J σ^i_J e^J`, `e^β ↦ −Σ_I D^β_I e^I`.
pub fn grassmann_l(d: &MultiDerivation) -> GrassmannDerivation {
    let (m, r, p) = (d.base_dim(), d.rank(), d.degree());
    let gens = GeneratorSet::forms(m, r);
    let lift = |poly: &SuperElement, idx: &[usize]| {
        &poly.embed_prefix(&gens) * &SuperElement::odd_product(&gens, idx)
    };
    let mut on_x = vec![SuperElement::zero(&gens); m];
    for (j, field) in d.symbol() {
        for (i, f) in field.iter().enumerate() {
            on_x[i] = &on_x[i] + &lift(f, j);
        }
    }
    let mut on_e = vec![SuperElement::zero(&gens); r];
    for (idx, sec) in d.comps() {
        for (b, f) in sec.iter().enumerate() {
            on_e[b] = &on_e[b] - &lift(f, idx);
        }
    }
    GrassmannDerivation { gens, degree: p, on_x, on_e }
}

/// Inverse of [`grassmann_l`].
pub fn grassmann_r(dd: &GrassmannDerivation) -> MultiDerivation {
    let (m, r, p) = (dd.gens.n_even(), dd.gens.n_odd(), dd.degree);
    let mut d = MultiDerivation::zero(m, r, p);
    let ring = d.gens().clone();
    for idx in if p + 1 >= 0 && (p + 1) as usize <= r { combinations(r, (p + 1) as usize) } else { vec![] } {
        let o = odd_mask(&idx);
        let sec = (0..r).map(|b| -dd.on_e[b].odd_coefficient(o, &ring)).collect();
        d.set_comp(&idx, sec);
    }
    if p >= 0 && p as usize <= r {
        for j in combinations(r, p as usize) {
            let o = odd_mask(&j);
            let field = (0..m).map(|i| dd.on_x[i].odd_coefficient(o, &ring)).collect();
            d.set_symbol(&j, field);
        }
    }
    d
}

/// `𝖣 = ℒ_K + i_L` on `Ω(ℝ^m)` with `E = TM`: `K^i = 𝖣(x^i)`,
/// `L^i = 𝖣(e^i) − (−1)^k dK^i`.
pub fn algebraic_decompose(dd: &GrassmannDerivation) -> Result<(Vec<SuperElement>, Vec<SuperElement>), MultilinearError> {
    let (m, r) = (dd.gens.n_even(), dd.gens.n_odd());
    if r != m {
        return Err(MultilinearError::AnchorNotSurjective { rank: r.min(m), base: m });
    }
    let d = GrassmannDerivation::exterior_d(m);
    if d.gens != dd.gens {
        return Err(MultilinearError::BundleMismatch);
    }
    let kk: Vec<SuperElement> = dd.on_x.clone();
    let s = sign_of(dd.degree.rem_euclid(2) == 1);
    let ll = (0..m).map(|i| &dd.on_e[i] - &d.apply(&kk[i]).scale(&s)).collect();
    Ok((kk, ll))
}

/// `ω(s_1..s_k)` with the determinant convention `(e^1∧e^2)(e_1,e_2) = 1`.
pub fn form_eval(w: &SuperElement, args: &[Vec<SuperElement>], ring: &Arc<GeneratorSet>) -> SuperElement {
    let mut out = SuperElement::zero(ring);
    for (mono, c) in w.terms() {
        if mono.odd_degree() as usize != args.len() {
            continue;
        }
        let idx: Vec<usize> = (0..64).filter(|b| mono.o & (1 << b) != 0).collect();
        let coef = SuperElement::from_mono(ring, Mono { e: mono.e[..ring.n_even()].to_vec(), o: 0 }, c.clone());
        // det[args[a][idx[b]]]
        let mut det = SuperElement::zero(ring);
        for perm in permutations(args.len()) {
            let mut t = SuperElement::constant(ring, sign_of(perm.1));
            for (a, &b) in perm.0.iter().enumerate() {
                t = &t * &args[a][idx[b]];
            }
            det = &det + &t;
        }
        out = &out + &(&coef * &det);
    }
    out
}

fn permutations(n: usize) -> Vec<(Vec<usize>, bool)> {
    if n == 0 {
        return vec![(vec![], false)];
    }
    let mut out = Vec::new();
    for (p, odd) in permutations(n - 1) {
        for pos in 0..n {
            let mut v = p.clone();
            v.insert(pos, n - 1);
            let extra = (n - 1 - pos) % 2 == 1;
            out.push((v, odd ^ extra));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::MultiMap;
    use super::*;
    use crate::superalg::random_element;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_der(gens: &Arc<GeneratorSet>, k: i64, rng: &mut ChaCha8Rng) -> GrassmannDerivation {
        let (m, r) = (gens.n_even(), gens.n_odd());
        let ev: Vec<usize> = (0..m).collect();
        let od: Vec<usize> = (0..r).collect();
        let mk = |d: i64, rng: &mut ChaCha8Rng| {
            if d < 0 {
                SuperElement::zero(gens)
            } else {
                random_element(gens, &ev, &od, 2, d as usize, 2, rng)
            }
        };
        let on_x = (0..m).map(|_| mk(k, rng)).collect();
        let on_e = (0..r).map(|_| mk(k + 1, rng)).collect();
        GrassmannDerivation::new(gens, k, on_x, on_e).unwrap()
    }

    #[test]
    fn point_case_is_precomposition() {
        let mu = MultiMap::so3();
        let d = MultiDerivation::from_multimap(&mu);
        let l = grassmann_l(&d);
        assert_eq!(grassmann_r(&l), d);
        // (L_μ e^3)(e_1, e_2) = −e^3(μ(e_1,e_2)) = −1
        let ring = d.gens().clone();
        let e = |i: usize| (0..3).map(|j| SuperElement::constant(&ring, if i == j { q(1) } else { q(0) })).collect::<Vec<_>>();
        let w = l.apply(&SuperElement::odd_gen(l.gens(), 2));
        assert_eq!(form_eval(&w, &[e(0), e(1)], &ring), SuperElement::constant(&ring, q(-1)));
    }

    #[test]
    fn section_acts_as_minus_insertion() {
        let ring = MultiDerivation::ring(1);
        let x = SuperElement::even_gen(&ring, 0);
        let s = vec![x.clone(), SuperElement::constant(&ring, q(2))];
        let l = grassmann_l(&MultiDerivation::section(&ring, s.clone()));
        let gens = l.gens().clone();
        let i_s = GrassmannDerivation::insertion(&gens, 0, s.iter().map(|p| p.embed_prefix(&gens)).collect()).unwrap();
        assert_eq!(l.add(&i_s), GrassmannDerivation::zero(&gens, -1));
    }

    #[test]
    fn tangent_gives_exterior_derivative() {
        assert_eq!(grassmann_l(&MultiDerivation::tangent(2)), GrassmannDerivation::exterior_d(2));
    }

    #[test]
    fn decomposition_examples() {
        let d = GrassmannDerivation::exterior_d(2);
        let gens = d.gens().clone();
        let (k, l) = algebraic_decompose(&d).unwrap();
        assert_eq!(k, vec![SuperElement::odd_gen(&gens, 0), SuperElement::odd_gen(&gens, 1)]);
        assert!(l.iter().all(|p| p.is_zero()));
        // ℒ_X for X = x2 ∂_1 + ∂_2
        let x = vec![SuperElement::even_gen(&gens, 1), SuperElement::one(&gens)];
        let lx = GrassmannDerivation::lie_derivative(2, 0, x.clone()).unwrap();
        let (k, l) = algebraic_decompose(&lx).unwrap();
        assert_eq!(k, x);
        assert!(l.iter().all(|p| p.is_zero()));
        // i_L for a vector-valued 2-form
        let w = SuperElement::odd_product(&gens, &[0, 1]);
        let il = GrassmannDerivation::insertion(&gens, 2, vec![w.clone(), SuperElement::zero(&gens)]).unwrap();
        let (k, l) = algebraic_decompose(&il).unwrap();
        assert!(k.iter().all(|p| p.is_zero()));
        assert_eq!(l, vec![w, SuperElement::zero(&gens)]);
        let bad = GrassmannDerivation::zero(&GeneratorSet::forms(2, 1), 0);
        assert_eq!(algebraic_decompose(&bad).unwrap_err(), MultilinearError::AnchorNotSurjective { rank: 1, base: 2 });
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn l_and_r_are_inverse_and_bracket_compatible(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, r) = (rng.gen_range(0..=2usize), rng.gen_range(1..=2usize));
            let p = rng.gen_range(-1..=1i64);
            let qd = rng.gen_range(-1..=1i64);
            let d1 = MultiDerivation::random(m, r, p, 2, &mut rng);
            let d2 = MultiDerivation::random(m, r, qd, 2, &mut rng);
            let (l1, l2) = (grassmann_l(&d1), grassmann_l(&d2));
            prop_assert_eq!(&grassmann_r(&l1), &d1);
            let gd = random_der(l1.gens(), p, &mut rng);
            prop_assert_eq!(grassmann_l(&grassmann_r(&gd)), gd);
            if p + qd >= -1 {
                let br = d1.cm_bracket(&d2).unwrap();
                prop_assert_eq!(l1.commutator(&l2).unwrap(), grassmann_l(&br));
            }
        }

        #[test]
        fn decomposition_reconstructs(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.gen_range(1..=2usize);
            let k = rng.gen_range(0..=2i64);
            let gens = GeneratorSet::forms(m, m);
            let dd = random_der(&gens, k, &mut rng);
            let (kk, ll) = algebraic_decompose(&dd).unwrap();
            let rebuilt = GrassmannDerivation::lie_derivative(m, k, kk.clone()).unwrap()
                .add(&GrassmannDerivation::insertion(&gens, k + 1, ll.clone()).unwrap());
            prop_assert_eq!(&rebuilt, &dd);
            let commutes = dd.commutator(&GrassmannDerivation::exterior_d(m)).unwrap().is_zero();
            prop_assert_eq!(commutes, ll.iter().all(|p| p.is_zero()));
        }
    }
}
