//! Order-by-order formal deformations of Lie brackets and of linear Poisson
//! structures, with obstruction certificates.

use crate::brackets::schouten;
use crate::multilinear::{ce_cohomology, delta_matrix, iso_i, MultiMap, MultilinearError};
use crate::ratlin::{dot, q, solve, MatrixQ, Solve, Q};
use crate::series::{FormalSeries, SeriesError};
use crate::superalg::{GeneratorSet, Mono, SuperElement};
use num_traits::Zero;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LieDeformError {
    #[error("order-0 bracket does not satisfy the Jacobi identity")]
    Order0NotLie,
    #[error("Maurer–Cartan equation fails at order {0}")]
    PreconditionMc(usize),
    #[error("equivalence must start with the identity")]
    NotInvertible,
    #[error("coefficient {0} is not a homogeneous bivector of fiber weight −1")]
    NotHomogeneous(usize),
    #[error(transparent)]
    Multilinear(#[from] MultilinearError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Per-order residuals of `[μ_t, μ_t]_NR`.
pub fn mc_residual_lie(mu: &FormalSeries<MultiMap>) -> Result<FormalSeries<MultiMap>, LieDeformError> {
    if !mu.coeff(0).is_lie() {
        return Err(LieDeformError::Order0NotLie);
    }
    Ok(mu.cauchy(mu, |a, b| a.nr_bracket(b).expect("equal dimensions"))?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extension {
    /// `μ_k` with `δμ_k = R_k`.
    Solved(MultiMap),
    /// `y` with `yᵀΔ = 0` and `yᵀR_k ≠ 0`, `Δ` the matrix of `δ : 𝒜² → 𝒜³`.
    Obstructed(Vec<Q>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObstructionCertificate {
    pub order: usize,
    /// `R_k = −½ Σ_{i=1}^{k−1} [μ_i, μ_{k−i}]_NR`, the right-hand side of `δμ_k = R_k`.
    pub cocycle: MultiMap,
    /// `δR_k`, expanded; zero whenever the prefix satisfies the MC equation.
    pub coboundary_of_cocycle: MultiMap,
    pub extension: Extension,
}

impl ObstructionCertificate {
    pub fn is_closed(&self) -> bool {
        self.coboundary_of_cocycle.is_zero()
    }

    pub fn solution(&self) -> Option<&MultiMap> {
        match &self.extension {
            Extension::Solved(m) => Some(m),
            Extension::Obstructed(_) => None,
        }
    }

    /// Re-checks the certificate against `μ₀`.
    pub fn verify(&self, mu0: &MultiMap) -> bool {
        if !self.is_closed() {
            return false;
        }
        match &self.extension {
            Extension::Solved(m) => mu0.nr_bracket(m).map(|d| d == self.cocycle).unwrap_or(false),
            Extension::Obstructed(y) => {
                let delta = delta_matrix(mu0, 2);
                delta.vec_mul(y).iter().all(|x| x.is_zero()) && !dot(y, &self.cocycle.to_vec()).is_zero()
            }
        }
    }
}

/// Solves order `k = prefix.len()` given `μ₀..μ_{k−1}`.
pub fn extend_one_order(prefix: &[MultiMap]) -> Result<ObstructionCertificate, LieDeformError> {
    let mu0 = prefix.first().ok_or(LieDeformError::PreconditionMc(0))?;
    if !mu0.is_lie() {
        return Err(LieDeformError::Order0NotLie);
    }
    let k = prefix.len();
    let (dim, zero3) = (mu0.dim(), MultiMap::zero(mu0.dim(), 3));
    // MC through order k−1
    for j in 1..k {
        let mut r = zero3.clone();
        for i in 0..=j {
            r = r.add(&prefix[i].nr_bracket(&prefix[j - i])?);
        }
        if !r.is_zero() {
            return Err(LieDeformError::PreconditionMc(j));
        }
    }
    let mut sum = zero3.clone();
    for i in 1..k {
        sum = sum.add(&prefix[i].nr_bracket(&prefix[k - i])?);
    }
    let cocycle = sum.scale(&Q::new((-1).into(), 2.into()));
    let closed = mu0.nr_bracket(&cocycle)?;
    let extension = match solve(&delta_matrix(mu0, 2), &cocycle.to_vec()) {
        Solve::Solution(x) => Extension::Solved(MultiMap::from_vec(dim, 2, &x)),
        Solve::Inconsistent(y) => Extension::Obstructed(y),
    };
    Ok(ObstructionCertificate { order: k, cocycle, coboundary_of_cocycle: closed, extension })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeformationRun {
    /// Coefficients found so far, `μ₀..μ_n`.
    pub coefficients: Vec<MultiMap>,
    pub certificates: Vec<ObstructionCertificate>,
    /// First order at which the extension is obstructed.
    pub obstructed_at: Option<usize>,
}

/// Extends `μ₀ + tμ₁ + …` (given prefix) order by order up to `n`, choosing
/// the pivot solution at each step.
pub fn extend_to_order(prefix: &[MultiMap], n: usize) -> Result<DeformationRun, LieDeformError> {
    let mut coefficients = prefix.to_vec();
    let mut certificates = Vec::new();
    while coefficients.len() <= n {
        let cert = extend_one_order(&coefficients)?;
        let sol = cert.solution().cloned();
        certificates.push(cert);
        match sol {
            Some(m) => coefficients.push(m),
            None => {
                let at = coefficients.len();
                return Ok(DeformationRun { coefficients, certificates, obstructed_at: Some(at) });
            }
        }
    }
    Ok(DeformationRun { coefficients, certificates, obstructed_at: None })
}

/// `μ'_t(x,y) = φ_t^{−1}(μ_t(φ_t x, φ_t y))`.
pub fn apply_equivalence(phi: &FormalSeries<MatrixQ>, mu: &FormalSeries<MultiMap>) -> Result<FormalSeries<MultiMap>, LieDeformError> {
    let dim = mu.coeff(0).dim();
    if phi.coeff(0) != &MatrixQ::identity(dim) {
        return Err(LieDeformError::NotInvertible);
    }
    if phi.order() != mu.order() {
        return Err(SeriesError::OrderMismatch(phi.order(), mu.order()).into());
    }
    let inv = phi.inverse().map_err(|_| LieDeformError::NotInvertible)?;
    let n = mu.order();
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut acc = MultiMap::zero(dim, 2);
        for a in 0..=k {
            for b in 0..=k - a {
                for c in 0..=k - a - b {
                    let d = k - a - b - c;
                    let (ci, m, pc, pd) = (inv.coeff(a), mu.coeff(b), phi.coeff(c), phi.coeff(d));
                    if ci.is_zero() || m.is_zero() || pc.is_zero() || pd.is_zero() {
                        continue;
                    }
                    acc = acc.add(&transform(ci, m, pc, pd));
                }
            }
        }
        out.push(acc);
    }
    Ok(FormalSeries::new(out)?)
}

/// `C μ(A·, B·)` as an antisymmetric map (the `(A,B)` and `(B,A)` terms are
/// averaged so the stored value is the antisymmetric part).
fn transform(c: &MatrixQ, mu: &MultiMap, a: &MatrixQ, b: &MatrixQ) -> MultiMap {
    let dim = mu.dim();
    let mut out = MultiMap::zero(dim, 2);
    let half = Q::new(1.into(), 2.into());
    for i in 0..dim {
        for j in (i + 1)..dim {
            let x = mu.eval(&[a.col(i), b.col(j)]);
            let y = mu.eval(&[a.col(j), b.col(i)]);
            let v: Vec<Q> = x.iter().zip(&y).map(|(p, r)| (p - r) * &half).collect();
            out.set(&[i, j], c.mul_vec(&v));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalization {
    pub series: FormalSeries<MultiMap>,
    /// `(n, φ_n)` for every step `φ_t = id − t^n φ_n` applied.
    pub steps: Vec<(usize, MatrixQ)>,
    /// First nonvanishing order after normalization, if any; that coefficient is closed but not exact.
    pub first_nontrivial: Option<usize>,
}

/// Repeatedly removes the lowest-order exact term with `φ_t = id − t^n φ_n`
/// where `μ_n = δφ_n`.
pub fn normalize(mu: &FormalSeries<MultiMap>) -> Result<Normalization, LieDeformError> {
    let mu0 = mu.coeff(0).clone();
    if !mu0.is_lie() {
        return Err(LieDeformError::Order0NotLie);
    }
    let dim = mu0.dim();
    let delta1 = delta_matrix(&mu0, 1);
    let mut cur = mu.clone();
    let mut steps = Vec::new();
    loop {
        let n = (1..=cur.order()).find(|&k| !cur.coeff(k).is_zero());
        let Some(n) = n else {
            return Ok(Normalization { series: cur, steps, first_nontrivial: None });
        };
        match solve(&delta1, &cur.coeff(n).to_vec()) {
            Solve::Inconsistent(_) => return Ok(Normalization { series: cur, steps, first_nontrivial: Some(n) }),
            Solve::Solution(x) => {
                let f = MultiMap::from_vec(dim, 1, &x);
                let mut m = MatrixQ::zeros(dim, dim);
                for (idx, v) in f.coeffs() {
                    for (r, val) in v.iter().enumerate() {
                        m.set(r, idx[0], val.clone());
                    }
                }
                let mut phi = FormalSeries::constant(MatrixQ::identity(dim), cur.order());
                phi.set_coeff(n, m.scale(&q(-1)));
                cur = apply_equivalence(&phi, &cur)?;
                steps.push((n, m));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RigidityVerdict {
    pub rigid: bool,
    pub h2_dim: usize,
}

/// Rigid iff `H²_CE = 0`.
pub fn rigidity_check(mu0: &MultiMap) -> Result<RigidityVerdict, LieDeformError> {
    let h = ce_cohomology(mu0, 2)?;
    Ok(RigidityVerdict { rigid: h.dim == 0, h2_dim: h.dim })
}

/// Coordinates of a homogeneous `k`-vector `Σ c v_γ V_I` on `𝔤*` in the basis
/// `(I, γ)`, `I` increasing, matching [`MultiMap::to_vec`].
fn homogeneous_coords(p: &SuperElement, n: usize, k: usize) -> Vec<Q> {
    let mut out = Vec::new();
    for idx in crate::multilinear::combinations(n, k) {
        let o = idx.iter().fold(0u64, |a, &i| a | (1 << i));
        for g in 0..n {
            let mut e = vec![0; n];
            e[g] = 1;
            out.push(p.coeff(&Mono { e, o }));
        }
    }
    out
}

fn homogeneous_from_coords(gens: &Arc<GeneratorSet>, n: usize, k: usize, x: &[Q]) -> SuperElement {
    let mut out = SuperElement::zero(gens);
    let mut it = x.iter();
    for idx in crate::multilinear::combinations(n, k) {
        for g in 0..n {
            let c = it.next().unwrap();
            if !c.is_zero() {
                let t = &SuperElement::even_gen(gens, g) * &SuperElement::odd_product(gens, &idx);
                out = &out + &t.scale(c);
            }
        }
    }
    out
}

/// Matrix of `d_{π₀} = [π₀, ·]` from homogeneous `k`-vectors to `(k+1)`-vectors on `𝔤*`.
pub fn poisson_delta_matrix(pi0: &SuperElement, k: usize) -> MatrixQ {
    let gens = pi0.gens().clone();
    let n = gens.n_even();
    let rows = homogeneous_coords(&SuperElement::zero(&gens), n, k + 1).len();
    let len = homogeneous_coords(&SuperElement::zero(&gens), n, k).len();
    let cols: Vec<Vec<Q>> = (0..len)
        .map(|i| {
            let mut v = vec![Q::zero(); len];
            v[i] = q(1);
            let x = homogeneous_from_coords(&gens, n, k, &v);
            homogeneous_coords(&schouten(pi0, &x).expect("multivector generators"), n, k + 1)
        })
        .collect();
    if cols.is_empty() {
        MatrixQ::zeros(rows, 0)
    } else {
        MatrixQ::from_cols(rows, &cols)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoissonExtension {
    Solved(SuperElement),
    Obstructed(Vec<Q>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoissonCertificate {
    pub order: usize,
    /// `R_n = −½ Σ_{i=1}^{n−1} [π_i, π_{n−i}]`.
    pub cocycle: SuperElement,
    pub closed: bool,
    pub extension: PoissonExtension,
}

fn check_linear_bivector(p: &SuperElement, at: usize) -> Result<(), LieDeformError> {
    let gens = p.gens();
    if gens.count_odd(crate::superalg::OddRole::BaseConj) != 0 || gens.n_odd() != gens.n_even() {
        return Err(LieDeformError::NotHomogeneous(at));
    }
    if p.is_zero() {
        return Ok(());
    }
    match (p.odd_degree(), p.euler_weight()) {
        (Some(2), Ok(Some(-1))) => Ok(()),
        _ => Err(LieDeformError::NotHomogeneous(at)),
    }
}

/// Order-by-order extension of a linear Poisson deformation
/// `π₀ + tπ₁ + …` on `𝔤*`: for the given prefix, certificate for order
/// `prefix.len()`, solved in homogeneous bivectors.
pub fn linear_poisson_extend(prefix: &[SuperElement]) -> Result<PoissonCertificate, LieDeformError> {
    for (i, p) in prefix.iter().enumerate() {
        check_linear_bivector(p, i)?;
    }
    let pi0 = prefix.first().ok_or(LieDeformError::PreconditionMc(0))?;
    let gens = pi0.gens().clone();
    let n = gens.n_even();
    let br = |a: &SuperElement, b: &SuperElement| schouten(a, b).expect("multivector generators");
    if !br(pi0, pi0).is_zero() {
        return Err(LieDeformError::Order0NotLie);
    }
    let k = prefix.len();
    for j in 1..k {
        let r = (0..=j).fold(SuperElement::zero(&gens), |acc, i| &acc + &br(&prefix[i], &prefix[j - i]));
        if !r.is_zero() {
            return Err(LieDeformError::PreconditionMc(j));
        }
    }
    let sum = (1..k).fold(SuperElement::zero(&gens), |acc, i| &acc + &br(&prefix[i], &prefix[k - i]));
    let cocycle = sum.scale(&Q::new((-1).into(), 2.into()));
    let closed = br(pi0, &cocycle).is_zero();
    let extension = match solve(&poisson_delta_matrix(pi0, 2), &homogeneous_coords(&cocycle, n, 3)) {
        Solve::Solution(x) => PoissonExtension::Solved(homogeneous_from_coords(&gens, n, 2, &x)),
        Solve::Inconsistent(y) => PoissonExtension::Obstructed(y),
    };
    Ok(PoissonCertificate { order: k, cocycle, closed, extension })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoissonRun {
    pub coefficients: Vec<SuperElement>,
    pub certificates: Vec<PoissonCertificate>,
    pub obstructed_at: Option<usize>,
}

/// Poisson-side counterpart of [`extend_to_order`].
pub fn linear_poisson_deform(prefix: &[SuperElement], n: usize) -> Result<PoissonRun, LieDeformError> {
    let mut coefficients = prefix.to_vec();
    let mut certificates = Vec::new();
    while coefficients.len() <= n {
        let cert = linear_poisson_extend(&coefficients)?;
        let sol = match &cert.extension {
            PoissonExtension::Solved(p) => Some(p.clone()),
            PoissonExtension::Obstructed(_) => None,
        };
        certificates.push(cert);
        match sol {
            Some(p) => coefficients.push(p),
            None => {
                let at = coefficients.len();
                return Ok(PoissonRun { coefficients, certificates, obstructed_at: Some(at) });
            }
        }
    }
    Ok(PoissonRun { coefficients, certificates, obstructed_at: None })
}

/// `dim H²` of the homogeneous linear Poisson complex of `π₀` on `𝔤*`.
pub fn linear_poisson_h2(pi0: &SuperElement) -> usize {
    let z = crate::ratlin::kernel_basis(&poisson_delta_matrix(pi0, 2)).dim();
    let b = crate::ratlin::rank(&poisson_delta_matrix(pi0, 1));
    z - b
}

/// `π'_t = exp(ad_{X_t}) π_t` with `ad_X = [X, ·]`; requires `X₀ = 0` and each
/// `X_i` a homogeneous vector field of weight 0.
pub fn poisson_equivalence(x: &FormalSeries<SuperElement>, pi: &FormalSeries<SuperElement>) -> Result<FormalSeries<SuperElement>, LieDeformError> {
    if !x.coeff(0).is_zero() {
        return Err(LieDeformError::NotInvertible);
    }
    for (i, c) in x.coeffs().iter().enumerate() {
        if !c.is_zero() && (c.odd_degree() != Some(1) || c.euler_weight() != Ok(Some(0))) {
            return Err(LieDeformError::NotHomogeneous(i));
        }
    }
    let ad = |s: &FormalSeries<SuperElement>| x.cauchy(s, |a, b| schouten(a, b).expect("multivector generators"));
    let mut acc = pi.clone();
    let mut term = pi.clone();
    for k in 1..=pi.order() {
        term = ad(&term)?.scale(&Q::new(1.into(), (k as i64).into()));
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

/// `𝓘₂` applied per order; in the point case `𝓘[π₀,X] = [𝓘π₀, 𝓘X]_NR`.
pub fn transport_to_lie(pi: &FormalSeries<SuperElement>) -> Result<FormalSeries<MultiMap>, LieDeformError> {
    let coeffs = pi
        .coeffs()
        .iter()
        .map(|p| iso_i(p, 2).map(|d| d.to_multimap().expect("point case")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FormalSeries::new(coeffs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilinear::{ce_differential, lie_poisson_tensor};
    use crate::ratlin::qf;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series(v: Vec<MultiMap>) -> FormalSeries<MultiMap> {
        FormalSeries::new(v).unwrap()
    }

    #[test]
    fn constant_series_has_no_residual() {
        let mu = FormalSeries::constant(MultiMap::so3(), 4);
        let r = mc_residual_lie(&mu).unwrap();
        assert!(r.coeffs().iter().all(|c| c.is_zero()));
        let bad = FormalSeries::constant(MultiMap::from_structure_constants(3, &[(1, 2, 0, q(1)), (0, 1, 1, q(1))]).unwrap(), 1);
        assert_eq!(mc_residual_lie(&bad).unwrap_err(), LieDeformError::Order0NotLie);
    }

    #[test]
    fn first_order_residual_is_twice_delta() {
        let mu0 = MultiMap::so3();
        let mu1 = MultiMap::from_structure_constants(3, &[(0, 1, 0, q(1))]).unwrap();
        let r = mc_residual_lie(&series(vec![mu0.clone(), mu1.clone()])).unwrap();
        let d = ce_differential(&mu0, &mu1).unwrap();
        assert!(!d.is_zero());
        assert_eq!(r.coeff(1), &d.scale(&q(2)));
    }

    #[test]
    fn abelian_residual_starts_at_order_two() {
        let mu1 = MultiMap::from_structure_constants(3, &[(0, 1, 2, q(1)), (0, 2, 1, q(-1))]).unwrap();
        let r = mc_residual_lie(&series(vec![MultiMap::zero(3, 2), mu1.clone(), MultiMap::zero(3, 2)])).unwrap();
        assert!(r.coeff(1).is_zero());
        assert_eq!(r.coeff(2), &mu1.nr_bracket(&mu1).unwrap());
        // non-Lie μ₁ leaves a nonzero order-2 residual
        let mu1 = MultiMap::from_structure_constants(3, &[(1, 2, 0, q(1)), (0, 1, 1, q(1))]).unwrap();
        let r = mc_residual_lie(&series(vec![MultiMap::zero(3, 2), mu1, MultiMap::zero(3, 2)])).unwrap();
        assert!(!r.coeff(2).is_zero());
    }

    #[test]
    fn order_one_is_trivially_solved() {
        let c = extend_one_order(&[MultiMap::so3()]).unwrap();
        assert_eq!(c.solution(), Some(&MultiMap::zero(3, 2)));
        assert!(c.verify(&MultiMap::so3()));
    }

    #[test]
    fn so3_deformations_normalize_away() {
        // μ₁ = δφ for a random φ: any cocycle of so(3) is exact
        let mu0 = MultiMap::so3();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = MultiMap::random(3, 1, 2, 0.7, &mut rng);
        let mu1 = ce_differential(&mu0, &phi).unwrap();
        let run = extend_to_order(&[mu0.clone(), mu1], 6).unwrap();
        assert_eq!(run.obstructed_at, None);
        assert!(run.certificates.iter().all(|c| c.verify(&mu0)));
        let s = series(run.coefficients.clone());
        assert!(mc_residual_lie(&s).unwrap().coeffs().iter().all(|c| c.is_zero()));
        let nf = normalize(&s).unwrap();
        assert_eq!(nf.first_nontrivial, None);
        assert!(nf.series.coeffs()[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn heisenberg_obstruction_matches_brute_force() {
        let mu0 = MultiMap::heisenberg();
        let h2 = ce_cohomology(&mu0, 2).unwrap();
        let mut outcomes = Vec::new();
        for rep in &h2.representatives {
            let c = extend_one_order(&[mu0.clone(), rep.clone()]).unwrap();
            assert!(c.is_closed());
            assert!(c.verify(&mu0));
            // oracle: does some μ₂ make the order-2 residual vanish?
            let target = rep.nr_bracket(rep).unwrap();
            let delta2 = delta_matrix(&mu0, 2).scale(&q(2));
            let exists = solve(&delta2, &target.scale(&q(-1)).to_vec()).solution().is_some();
            assert_eq!(exists, c.solution().is_some());
            outcomes.push(exists);
        }
        assert!(!outcomes.is_empty());
    }

    #[test]
    fn equivalence_first_order() {
        let mu0 = MultiMap::so3();
        let mu1 = MultiMap::from_structure_constants(3, &[(0, 1, 0, q(2))]).unwrap();
        let mu = series(vec![mu0.clone(), mu1.clone(), MultiMap::zero(3, 2)]);
        let id = FormalSeries::constant(MatrixQ::identity(3), 2);
        assert_eq!(apply_equivalence(&id, &mu).unwrap(), mu);
        let phi1 = MatrixQ::from_i64(&[&[1, 2, 0], &[0, -1, 1], &[3, 0, 0]]);
        let mut phi = id.clone();
        phi.set_coeff(1, phi1.clone());
        let m2 = apply_equivalence(&phi, &mu).unwrap();
        let mut f = MultiMap::zero(3, 1);
        for j in 0..3 {
            f.set(&[j], phi1.col(j));
        }
        assert_eq!(m2.coeff(1).sub(&mu1), mu0.nr_bracket(&f).unwrap());
        let mut bad = id;
        bad.set_coeff(0, MatrixQ::identity(3).scale(&q(2)));
        assert_eq!(apply_equivalence(&bad, &mu).unwrap_err(), LieDeformError::NotInvertible);
    }

    #[test]
    fn rigidity_verdicts() {
        assert_eq!(rigidity_check(&MultiMap::so3()).unwrap(), RigidityVerdict { rigid: true, h2_dim: 0 });
        let ab = rigidity_check(&MultiMap::zero(2, 2)).unwrap();
        assert_eq!(ab, RigidityVerdict { rigid: false, h2_dim: 2 });
        let aff = rigidity_check(&MultiMap::aff1()).unwrap();
        let delta1 = delta_matrix(&MultiMap::aff1(), 1);
        let delta2 = delta_matrix(&MultiMap::aff1(), 2);
        let z = crate::ratlin::kernel_basis(&delta2).dim();
        assert_eq!(aff.h2_dim, z - crate::ratlin::rank(&delta1));
    }

    #[test]
    fn linear_poisson_matches_lie_side() {
        let mu0 = MultiMap::so3();
        let pi0 = lie_poisson_tensor(&mu0);
        assert_eq!(linear_poisson_h2(&pi0), 0);
        assert_eq!(linear_poisson_h2(&pi0), ce_cohomology(&mu0, 2).unwrap().dim);
        let h = MultiMap::heisenberg();
        assert_eq!(linear_poisson_h2(&lie_poisson_tensor(&h)), ce_cohomology(&h, 2).unwrap().dim);
        // d_π transports to δ_μ
        let gens = pi0.gens().clone();
        let x = SuperElement::parse(&gens, "v1 V2 V3 - 2 v3 V1 V2").unwrap();
        let lhs = iso_i(&schouten(&pi0, &x).unwrap(), 3).unwrap().to_multimap().unwrap();
        let rhs = ce_differential(&mu0, &iso_i(&x, 2).unwrap().to_multimap().unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn abelian_poisson_deforms_by_any_poisson_pi1() {
        let gens = GeneratorSet::multivector(0, 3);
        let pi0 = SuperElement::zero(&gens);
        let pi1 = lie_poisson_tensor(&MultiMap::so3());
        let c = linear_poisson_extend(&[pi0.clone(), pi1.clone()]).unwrap();
        assert!(c.closed);
        assert!(matches!(c.extension, PoissonExtension::Solved(_)));
        assert!(c.cocycle.is_zero());
        let bad = SuperElement::parse(&gens, "v1 V1").unwrap();
        assert_eq!(linear_poisson_extend(&[pi0, bad]).unwrap_err(), LieDeformError::NotHomogeneous(1));
    }

    #[test]
    fn poisson_equivalence_first_order() {
        let pi0 = lie_poisson_tensor(&MultiMap::so3());
        let gens = pi0.gens().clone();
        let pi1 = SuperElement::parse(&gens, "v2 V1 V3").unwrap();
        let x1 = SuperElement::parse(&gens, "v1 V2 - 3 v3 V3").unwrap();
        let z = SuperElement::zero(&gens);
        let x = FormalSeries::new(vec![z.clone(), x1.clone(), z.clone()]).unwrap();
        let pi = FormalSeries::new(vec![pi0.clone(), pi1.clone(), z]).unwrap();
        let out = poisson_equivalence(&x, &pi).unwrap();
        assert_eq!(&(out.coeff(1) - &pi1), &(-schouten(&pi0, &x1).unwrap()));
        assert_eq!(out.coeff(0), &pi0);
        let _ = qf(1, 2);
    }

    #[test]
    fn poisson_run_transports_to_lie_run() {
        for mu0 in [MultiMap::heisenberg(), MultiMap::zero(3, 2)] {
            let h2 = ce_cohomology(&mu0, 2).unwrap();
            for rep in h2.representatives.iter().take(3) {
                let pi = vec![lie_poisson_tensor(&mu0), lie_poisson_tensor(rep)];
                let prun = linear_poisson_deform(&pi, 3).unwrap();
                let lrun = extend_to_order(&[mu0.clone(), rep.clone()], 3).unwrap();
                assert_eq!(prun.obstructed_at, lrun.obstructed_at);
                for (pc, lc) in prun.certificates.iter().zip(&lrun.certificates) {
                    assert!(pc.closed);
                    let r = iso_i(&pc.cocycle, 3).unwrap().to_multimap().unwrap();
                    assert_eq!(r, lc.cocycle);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn obstruction_cocycle_is_closed(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu0 = [MultiMap::heisenberg(), MultiMap::zero(3, 2), MultiMap::so3()][rng.gen_range(0..3)].clone();
            let h2 = ce_cohomology(&mu0, 2).unwrap();
            let z = crate::ratlin::kernel_basis(&delta_matrix(&mu0, 2));
            // random cocycle μ₁
            let mut v = vec![Q::zero(); MultiMap::space_dim(3, 2)];
            for b in z.basis() {
                let c = q(rng.gen_range(-2..=2));
                for (x, y) in v.iter_mut().zip(b) {
                    *x += &c * y;
                }
            }
            let _ = h2;
            let mu1 = MultiMap::from_vec(3, 2, &v);
            let run = extend_to_order(&[mu0.clone(), mu1], 4).unwrap();
            for c in &run.certificates {
                prop_assert!(c.is_closed());
                prop_assert!(c.verify(&mu0));
            }
            let s = series(run.coefficients.clone());
            let r = mc_residual_lie(&s).unwrap();
            prop_assert!(r.coeffs().iter().all(|c| c.is_zero()));
        }

        #[test]
        fn equivalence_preserves_jacobi(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu0 = MultiMap::so3();
            let phi1 = MultiMap::random(3, 1, 2, 0.6, &mut rng);
            let run = extend_to_order(&[mu0.clone(), ce_differential(&mu0, &phi1).unwrap()], 3).unwrap();
            let mu = series(run.coefficients);
            let mut phi = FormalSeries::constant(MatrixQ::identity(3), 3);
            for k in 1..=3 {
                let m = MatrixQ::from_rows((0..3).map(|_| (0..3).map(|_| q(rng.gen_range(-1..=1))).collect()).collect());
                phi.set_coeff(k, m);
            }
            let m2 = apply_equivalence(&phi, &mu).unwrap();
            prop_assert!(mc_residual_lie(&m2).unwrap().coeffs().iter().all(|c| c.is_zero()));
        }
    }
}
