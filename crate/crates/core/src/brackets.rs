//! Schouten, Rothstein and derived brackets on [`SuperElement`]s.

use crate::ratlin::{q, Q};
use crate::superalg::{ConnectionData, EvenRole, GeneratorSet, OddRole, SuperElement, SuperError};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BracketError {
    #[error("bracket is not defined on this generator set")]
    WrongContext,
    #[error("Rothstein bracket needs a connection")]
    MissingConnection,
    #[error("Θ has a component of bidegree {0:?}")]
    WrongDegree((u32, u32)),
    #[error(transparent)]
    Super(#[from] SuperError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketKind {
    Schouten,
    Rothstein,
}

/// Which bracket to use, together with the data it needs.
#[derive(Debug, Clone)]
pub struct BracketContext {
    kind: BracketKind,
    gens: Arc<GeneratorSet>,
    connection: Option<ConnectionData>,
}

impl BracketContext {
    pub fn schouten(gens: &Arc<GeneratorSet>) -> Result<Self, BracketError> {
        if (0..gens.n_odd()).any(|a| gens.conj_of(a).is_none()) || gens.n_odd() != gens.n_even() {
            return Err(BracketError::WrongContext);
        }
        Ok(BracketContext { kind: BracketKind::Schouten, gens: gens.clone(), connection: None })
    }

    pub fn rothstein(connection: ConnectionData) -> Self {
        BracketContext { kind: BracketKind::Rothstein, gens: connection.gens().clone(), connection: Some(connection) }
    }

    /// A Rothstein context with a flat connection.
    pub fn rothstein_flat(m: usize, k: usize) -> Self {
        Self::rothstein(ConnectionData::flat(&GeneratorSet::rothstein(m, k)))
    }

    pub fn kind(&self) -> BracketKind {
        self.kind
    }

    pub fn gens(&self) -> &Arc<GeneratorSet> {
        &self.gens
    }

    pub fn connection(&self) -> Option<&ConnectionData> {
        self.connection.as_ref()
    }

    pub fn bracket(&self, a: &SuperElement, b: &SuperElement) -> Result<SuperElement, BracketError> {
        if **a.gens() != *self.gens || **b.gens() != *self.gens {
            return Err(SuperError::GeneratorMismatch.into());
        }
        match self.kind {
            BracketKind::Schouten => Ok(schouten_unchecked(a, b)),
            BracketKind::Rothstein => {
                let c = self.connection.as_ref().ok_or(BracketError::MissingConnection)?;
                Ok(rothstein_unchecked(c, a, b))
            }
        }
    }

    /// Panicking shorthand for internal use on known-good inputs.
    pub fn br(&self, a: &SuperElement, b: &SuperElement) -> SuperElement {
        self.bracket(a, b).expect("bracket inputs")
    }
}

/// Schouten–Nijenhuis bracket, realized as the odd Poisson bracket of the
/// conjugate pairs `(y_a, θ_a)` of a multivector generator set.
pub fn schouten(p: &SuperElement, q_: &SuperElement) -> Result<SuperElement, BracketError> {
    BracketContext::schouten(p.gens())?.bracket(p, q_)
}

fn schouten_unchecked(p: &SuperElement, qq: &SuperElement) -> SuperElement {
    let gens = p.gens().clone();
    let mut out = SuperElement::zero(&gens);
    for (dp, pc) in p.odd_components() {
        for (dq, qc) in qq.odd_components() {
            let s = if (dp + 1) % 2 == 1 && (dq + 1) % 2 == 1 { -q(1) } else { q(1) };
            for a in 0..gens.n_odd() {
                let y = gens.conj_of(a).unwrap();
                let t1 = &pc.partial_odd_right(a) * &qc.partial_even(y);
                let t2 = &qc.partial_odd_right(a) * &pc.partial_even(y);
                out = &out + &(&t1 - &t2.scale(&s));
            }
        }
    }
    out
}

pub fn rothstein(ctx: &BracketContext, a: &SuperElement, b: &SuperElement) -> Result<SuperElement, BracketError> {
    if ctx.kind != BracketKind::Rothstein {
        return Err(BracketError::WrongContext);
    }
    ctx.bracket(a, b)
}

/// `∇_{∂q^i}`: `∂_{q^i}` plus the connection acting on the odd generators.
pub fn nabla(c: &ConnectionData, i: usize, phi: &SuperElement) -> SuperElement {
    let gens = c.gens();
    let k = c.rank();
    let mut out = phi.partial_even(i);
    for a in 0..k {
        let dl = phi.partial_odd(a);
        let du = phi.partial_odd(k + a);
        if dl.is_zero() && du.is_zero() {
            continue;
        }
        let mut wl = SuperElement::zero(gens);
        let mut wu = SuperElement::zero(gens);
        for b in 0..k {
            wl = &wl + &(c.gamma(i, a, b) * &SuperElement::odd_gen(gens, b));
            wu = &wu - &(c.gamma(i, b, a) * &SuperElement::odd_gen(gens, k + b));
        }
        out = &out + &(&wl * &dl);
        out = &out + &(&wu * &du);
    }
    out
}

fn rothstein_unchecked(c: &ConnectionData, phi: &SuperElement, psi: &SuperElement) -> SuperElement {
    let gens = c.gens();
    let m = c.base_dim();
    let k = c.rank();
    let mut out = SuperElement::zero(gens);
    let dp_phi: Vec<SuperElement> = (0..m).map(|i| phi.partial_even(m + i)).collect();
    let dp_psi: Vec<SuperElement> = (0..m).map(|i| psi.partial_even(m + i)).collect();
    for i in 0..m {
        if !dp_psi[i].is_zero() {
            out = &out + &(&nabla(c, i, phi) * &dp_psi[i]);
        }
        if !dp_phi[i].is_zero() {
            out = &out - &(&dp_phi[i] * &nabla(c, i, psi));
        }
    }
    if !c.is_flat() {
        for i in 0..m {
            for j in 0..m {
                if dp_phi[i].is_zero() || dp_psi[j].is_zero() {
                    continue;
                }
                let prod = &dp_phi[i] * &dp_psi[j];
                for a in 0..k {
                    for b in 0..k {
                        let r = c.curvature(a, b, i, j);
                        if r.is_zero() {
                            continue;
                        }
                        let odd = SuperElement::odd_product(gens, &[a, k + b]);
                        out = &out + &(&(&r * &odd) * &prod);
                    }
                }
            }
        }
    }
    for a in 0..k {
        out = &out + &(&phi.partial_odd_right(a) * &psi.partial_odd(k + a));
        out = &out + &(&phi.partial_odd_right(k + a) * &psi.partial_odd(a));
    }
    out
}

/// `r_i = p_i − Γ_{iα}^β ã^α ã_β`.
pub fn darboux_momenta(ctx: &BracketContext) -> Result<Vec<SuperElement>, BracketError> {
    let c = ctx.connection.as_ref().ok_or(BracketError::MissingConnection)?;
    let gens = c.gens();
    let (m, k) = (c.base_dim(), c.rank());
    Ok((0..m)
        .map(|i| {
            let mut r = SuperElement::even_gen(gens, m + i);
            for a in 0..k {
                for b in 0..k {
                    let odd = SuperElement::odd_product(gens, &[k + a, b]);
                    r = &r - &(c.gamma(i, a, b) * &odd);
                }
            }
            r
        })
        .collect())
}

/// One entry of the super-Darboux bracket table with its residual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DarbouxEntry {
    pub label: String,
    pub residual: SuperElement,
}

/// Residuals of `{q_i, r_j} = δ_ij`, `{r_i, r_j} = 0`, `{r_i, ã} = 0`,
/// `{ã_α, ã^β} = δ_α^β` and `{ã_α, ã_β} = {ã^α, ã^β} = 0`.
pub fn darboux_table(ctx: &BracketContext) -> Result<Vec<DarbouxEntry>, BracketError> {
    let r = darboux_momenta(ctx)?;
    let gens = ctx.gens().clone();
    let (m, k) = rothstein_dims(&gens);
    let delta = |i: usize, j: usize| SuperElement::constant(&gens, if i == j { q(1) } else { q(0) });
    let mut out = Vec::new();
    let mut push = |label: String, residual: SuperElement| out.push(DarbouxEntry { label, residual });
    for i in 0..m {
        for j in 0..m {
            let qi = SuperElement::even_gen(&gens, i);
            push(format!("{{q{},r_{}}}", i + 1, j + 1), &ctx.bracket(&qi, &r[j])? - &delta(i, j));
            push(format!("{{r_{},r_{}}}", i + 1, j + 1), ctx.bracket(&r[i], &r[j])?);
        }
        for a in 0..2 * k {
            let label = format!("{{r_{},{}}}", i + 1, gens.odd_name(a));
            push(label, ctx.bracket(&r[i], &SuperElement::odd_gen(&gens, a))?);
        }
    }
    for a in 0..2 * k {
        for b in 0..2 * k {
            let want = if gens.dual_of(a) == Some(b) { q(1) } else { q(0) };
            let br = ctx.bracket(&SuperElement::odd_gen(&gens, a), &SuperElement::odd_gen(&gens, b))?;
            push(format!("{{{},{}}}", gens.odd_name(a), gens.odd_name(b)), &br - &SuperElement::constant(&gens, want));
        }
    }
    Ok(out)
}

/// `{{x, Θ}, y}`.
pub fn derived_bracket(ctx: &BracketContext, theta: &SuperElement, x: &SuperElement, y: &SuperElement) -> Result<SuperElement, BracketError> {
    ctx.bracket(&ctx.bracket(x, theta)?, y)
}

/// `{Θ, x}`.
pub fn derived_diff(ctx: &BracketContext, theta: &SuperElement, x: &SuperElement) -> Result<SuperElement, BracketError> {
    ctx.bracket(theta, x)
}

/// The four bidegree pieces of a χ-degree 3 element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThetaParts {
    pub phi: SuperElement,
    pub mu: SuperElement,
    pub gamma: SuperElement,
    pub psi: SuperElement,
}

pub fn split_theta(theta: &SuperElement) -> Result<ThetaParts, BracketError> {
    let gens = theta.gens();
    let mut parts = ThetaParts {
        phi: SuperElement::zero(gens),
        mu: SuperElement::zero(gens),
        gamma: SuperElement::zero(gens),
        psi: SuperElement::zero(gens),
    };
    for (bd, c) in theta.bidegree_components() {
        match bd {
            (0, 3) => parts.phi = c,
            (1, 2) => parts.mu = c,
            (2, 1) => parts.gamma = c,
            (3, 0) => parts.psi = c,
            other => return Err(BracketError::WrongDegree(other)),
        }
    }
    Ok(parts)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterResiduals {
    /// `½{Θ,Θ}`
    pub total: SuperElement,
    /// `(label, bidegree, residual)` in the order
    /// `½{μ,μ}+{γ,φ}`, `½{γ,γ}+{μ,ψ}`, `{μ,γ}+{φ,ψ}`, `{μ,φ}`, `{γ,ψ}`.
    pub components: Vec<(&'static str, (u32, u32), SuperElement)>,
}

impl MasterResiduals {
    pub fn all_zero(&self) -> bool {
        self.total.is_zero() && self.components.iter().all(|(_, _, r)| r.is_zero())
    }
}

pub fn master_residuals(ctx: &BracketContext, theta: &SuperElement) -> Result<MasterResiduals, BracketError> {
    let t = split_theta(theta)?;
    let half = Q::new(1.into(), 2.into());
    let b = |x: &SuperElement, y: &SuperElement| ctx.bracket(x, y);
    let c1 = &b(&t.mu, &t.mu)?.scale(&half) + &b(&t.gamma, &t.phi)?;
    let c2 = &b(&t.gamma, &t.gamma)?.scale(&half) + &b(&t.mu, &t.psi)?;
    let c3 = &b(&t.mu, &t.gamma)? + &b(&t.phi, &t.psi)?;
    let c4 = b(&t.mu, &t.phi)?;
    let c5 = b(&t.gamma, &t.psi)?;
    let total = b(theta, theta)?.scale(&half);
    Ok(MasterResiduals {
        total,
        components: vec![
            ("1/2{mu,mu}+{gamma,phi}", (1, 3), c1),
            ("1/2{gamma,gamma}+{mu,psi}", (3, 1), c2),
            ("{mu,gamma}+{phi,psi}", (2, 2), c3),
            ("{mu,phi}", (0, 4), c4),
            ("{gamma,psi}", (4, 0), c5),
        ],
    })
}

/// Monomial-by-monomial expansion of the Schouten bracket: each odd factor of
/// one argument is removed (with its position sign) and the matching
/// coordinate derivative hits the other coefficient.
pub fn schouten_local(p: &SuperElement, qq: &SuperElement) -> SuperElement {
    let gens = p.gens().clone();
    let mut out = SuperElement::zero(&gens);
    for (mp, cp) in p.terms() {
        for (mq, cq) in qq.terms() {
            let ip: Vec<usize> = (0..gens.n_odd()).filter(|a| mp.o >> a & 1 == 1).collect();
            let jq: Vec<usize> = (0..gens.n_odd()).filter(|a| mq.o >> a & 1 == 1).collect();
            let (np, nq) = (ip.len(), jq.len());
            let mut fp = mp.clone();
            fp.o = 0;
            let mut fq = mq.clone();
            fq.o = 0;
            let f = SuperElement::from_mono(&gens, fp, cp.clone());
            let g = SuperElement::from_mono(&gens, fq, cq.clone());
            // [fθ_{i1}..θ_{ip}, gθ_{j1}..θ_{jq}]: remove θ_{i_s} from P and differentiate g,
            // then remove θ_{j_t} from Q and differentiate f.
            for (s, &a) in ip.iter().enumerate() {
                let y = gens.conj_of(a).unwrap();
                let dg = g.partial_even(y);
                if dg.is_zero() {
                    continue;
                }
                let mut rest: Vec<usize> = ip.clone();
                rest.remove(s);
                rest.extend(&jq);
                let sign = if (np - 1 - s) % 2 == 1 { -q(1) } else { q(1) };
                out = &out + &(&(&f * &dg) * &SuperElement::odd_product(&gens, &rest)).scale(&sign);
            }
            for (t, &b) in jq.iter().enumerate() {
                let y = gens.conj_of(b).unwrap();
                let df = f.partial_even(y);
                if df.is_zero() {
                    continue;
                }
                let mut rest: Vec<usize> = jq.clone();
                rest.remove(t);
                rest.extend(&ip);
                // (−1)^{(p−1)(q−1)} from the swap, times position sign
                let e = ((np + 1) * (nq + 1) + nq - 1 - t) % 2;
                let sign = if e == 1 { q(1) } else { -q(1) };
                out = &out + &(&(&g * &df) * &SuperElement::odd_product(&gens, &rest)).scale(&sign);
            }
        }
    }
    out
}

/// Vector field `Σ X^i ∂_i` from its coefficient list, on a multivector generator set.
pub fn vector_field(gens: &Arc<GeneratorSet>, coeffs: &[SuperElement]) -> SuperElement {
    coeffs.iter().enumerate().fold(SuperElement::zero(gens), |acc, (a, c)| &acc + &(c * &SuperElement::odd_gen(gens, a)))
}

/// Applies a vector field (odd-linear element) to an even function.
pub fn apply_vector_field(x: &SuperElement, f: &SuperElement) -> SuperElement {
    let gens = x.gens();
    let mut out = SuperElement::zero(gens);
    for a in 0..gens.n_odd() {
        let c = x.partial_odd(a);
        if !c.is_zero() {
            out = &out + &(&c * &f.partial_even(gens.conj_of(a).unwrap()));
        }
    }
    out
}

/// Number of momentum generators (base dimension) of a Rothstein set.
pub fn rothstein_dims(gens: &GeneratorSet) -> (usize, usize) {
    (gens.count_even(EvenRole::Momentum), gens.count_odd(OddRole::Lower))
}
