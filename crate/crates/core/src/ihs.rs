//! Implicit Hamiltonian systems `(γ̇, dH(γ)) ∈ L` for a constant linear Dirac
//! structure on `ℝ^n ⊕ ℝ^n*`: a float RK4 simulator and the exact Poisson
//! algebra of admissible polynomials.

use crate::dirac_linear::{DiracError, LinearDirac};
use crate::ratlin::{parse_q, solve, to_f64, MatrixQ, Solve, Q};
use crate::superalg::{GeneratorSet, Mono, SuperElement, SuperError};
use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IhsError {
    #[error("dH(x) is not in ρ*(L) at x = {x:?} (residual {residual:e})")]
    Inadmissible { x: Vec<f64>, residual: f64 },
    #[error("trajectory left the admissible set at step {step} (t = {t}, residual {residual:e})")]
    LeftAdmissibleSet { step: usize, t: f64, residual: f64 },
    #[error("`{0}` is not admissible: its differential leaves ρ*(L)")]
    NotAdmissible(String),
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dirac(#[from] DiracError),
    #[error(transparent)]
    Super(#[from] SuperError),
}

/// Polynomial ring `ℚ[x1, …, xn]`.
pub fn ring(n: usize) -> Arc<GeneratorSet> {
    GeneratorSet::forms(n, 0)
}

#[derive(Debug, Clone)]
pub struct IHSystem {
    dirac: LinearDirac,
    ring: Arc<GeneratorSet>,
    hamiltonian: SuperElement,
    grad: Vec<SuperElement>,
    /// Rows `(y_j, μ_j)` of a basis of `L`, as floats.
    basis: DMatrix<f64>,
    /// Basis of `L ∩ TM`.
    gauge: Vec<DVector<f64>>,
    pub step: f64,
    pub tol: f64,
}

/// `ẋ₀` of least norm together with the free directions `L ∩ TM`.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub xdot: DVector<f64>,
    pub gauge: Vec<DVector<f64>>,
    /// `max_j |⟨(ẋ, dH), ℓ_j⟩|` over the basis of `L`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// `max_i |dH(g_i)|` for the basis `g_i` of `L ∩ TM`.
    pub constraint_residuals: Vec<f64>,
    pub max_drift: f64,
}

impl Trajectory {
    /// `t, x1..xn, H, constraint` rows.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",H,constraint_residual\n");
        for (i, s) in self.states.iter().enumerate() {
            out.push_str(&format!("{:.12e}", self.times[i]));
            for v in s {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push_str(&format!(",{:.12e},{:.6e}\n", self.energies[i], self.constraint_residuals[i]));
        }
        out
    }
}

impl IHSystem {
    pub fn new(dirac: LinearDirac, hamiltonian: SuperElement, step: f64, tol: f64) -> Result<Self, IhsError> {
        let n = dirac.n();
        let ring = hamiltonian.gens().clone();
        if ring.n_even() != n || ring.n_odd() != 0 {
            return Err(IhsError::Invalid(format!("H must be a polynomial in x1..x{n}")));
        }
        // exact check before leaving ℚ
        if !dirac.pairing_gram().is_zero() || dirac.space().dim() != n {
            return Err(IhsError::Invalid("L is not maximal isotropic".into()));
        }
        if !(step > 0.0 && tol > 0.0) {
            return Err(IhsError::Invalid("step and tolerance must be positive".into()));
        }
        let b = dirac.space().basis();
        let basis = DMatrix::from_fn(b.len(), 2 * n, |j, c| to_f64(&b[j][c]));
        let gauge = dirac.kernel().basis().iter().map(|v| DVector::from_fn(n, |i, _| to_f64(&v[i]))).collect();
        let grad = (0..n).map(|i| hamiltonian.partial_even(i)).collect();
        Ok(IHSystem { dirac, ring, hamiltonian, grad, basis, gauge, step, tol })
    }

    pub fn n(&self) -> usize {
        self.dirac.n()
    }

    pub fn dirac(&self) -> &LinearDirac {
        &self.dirac
    }

    pub fn ring(&self) -> &Arc<GeneratorSet> {
        &self.ring
    }

    pub fn hamiltonian(&self) -> &SuperElement {
        &self.hamiltonian
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        self.hamiltonian.eval_f64(x)
    }

    pub fn dh(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.grad.iter().map(|g| g.eval_f64(x)))
    }

    /// `max_i |dH(g_i)|`.
    pub fn constraint_residual(&self, x: &[f64]) -> f64 {
        let dh = self.dh(x);
        self.gauge.iter().map(|g| g.dot(&dh).abs()).fold(0.0, f64::max)
    }

    /// Solves `⟨(ẋ, dH), (y_j, μ_j)⟩ = μ_j(ẋ) + dH(y_j) = 0` for every basis
    /// vector of `L`; since `L = L^⊥` this is `(ẋ, dH) ∈ L`.
    pub fn velocity_solve(&self, x: &[f64]) -> Result<Velocity, IhsError> {
        let n = self.n();
        let dh = self.dh(x);
        let y = self.basis.columns(0, n).into_owned();
        let a = self.basis.columns(n, n).into_owned();
        let rhs = -(&y * &dh);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = 1e-12 * smax.max(1.0);
        let xdot = svd.solve(&rhs, eps).map_err(|e| IhsError::Invalid(e.to_string()))?;
        let residual = (&a * &xdot - &rhs).amax();
        if residual > self.tol * (1.0 + rhs.amax()) {
            return Err(IhsError::Inadmissible { x: x.to_vec(), residual });
        }
        Ok(Velocity { xdot, gauge: self.gauge.clone(), residual })
    }

    /// Classical RK4 with the least-norm velocity at each stage.
    pub fn integrate(&self, x0: &[f64], steps: usize) -> Result<Trajectory, IhsError> {
        let n = self.n();
        if x0.len() != n {
            return Err(IhsError::Invalid(format!("x0 has {} entries, expected {n}", x0.len())));
        }
        let h = self.step;
        let e0 = self.energy(x0);
        let mut x = DVector::from_column_slice(x0);
        let mut out = Trajectory {
            times: vec![0.0],
            states: vec![x0.to_vec()],
            energies: vec![e0],
            constraint_residuals: vec![self.constraint_residual(x0)],
            max_drift: 0.0,
        };
        let vel = |x: &DVector<f64>, step: usize| -> Result<DVector<f64>, IhsError> {
            self.velocity_solve(x.as_slice()).map(|v| v.xdot).map_err(|e| match e {
                IhsError::Inadmissible { residual, .. } => IhsError::LeftAdmissibleSet { step, t: step as f64 * h, residual },
                other => other,
            })
        };
        for s in 0..steps {
            let k1 = vel(&x, s)?;
            let k2 = vel(&(&x + &k1 * (h / 2.0)), s)?;
            let k3 = vel(&(&x + &k2 * (h / 2.0)), s)?;
            let k4 = vel(&(&x + &k3 * h), s)?;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let e = self.energy(x.as_slice());
            out.max_drift = out.max_drift.max((e - e0).abs());
            out.times.push((s + 1) as f64 * h);
            out.states.push(x.as_slice().to_vec());
            out.energies.push(e);
            out.constraint_residuals.push(self.constraint_residual(x.as_slice()));
        }
        Ok(out)
    }
}

/// Exact Poisson algebra of admissible polynomials for a constant `L`.
#[derive(Debug, Clone)]
pub struct AdmissibleAlgebra {
    dirac: LinearDirac,
    ring: Arc<GeneratorSet>,
    /// Columns `μ_j` of a basis of `L`.
    eta: MatrixQ,
    /// Columns `y_j`.
    x: MatrixQ,
}

impl AdmissibleAlgebra {
    pub fn new(dirac: &LinearDirac) -> Self {
        let n = dirac.n();
        let b = dirac.space().basis();
        let cols = |off: usize| MatrixQ::from_cols(n, &b.iter().map(|v| v[off..off + n].to_vec()).collect::<Vec<_>>());
        AdmissibleAlgebra { dirac: dirac.clone(), ring: ring(n), eta: cols(n), x: cols(0) }
    }

    pub fn ring(&self) -> &Arc<GeneratorSet> {
        &self.ring
    }

    pub fn dirac(&self) -> &LinearDirac {
        &self.dirac
    }

    pub fn parse(&self, text: &str) -> Result<SuperElement, IhsError> {
        Ok(SuperElement::parse(&self.ring, text)?)
    }

    /// A Hamiltonian vector field `X_f` with `(X_f, df) ∈ L`, as component
    /// polynomials; `NotAdmissible` if `df ∉ ρ*(L)` somewhere.
    pub fn hamiltonian_field(&self, f: &SuperElement) -> Result<Vec<SuperElement>, IhsError> {
        let n = self.dirac.n();
        let mut per_mono: BTreeMap<Mono, Vec<Q>> = BTreeMap::new();
        for i in 0..n {
            for (m, c) in f.partial_even(i).terms() {
                per_mono.entry(m.clone()).or_insert_with(|| vec![Q::zero(); n])[i] = c.clone();
            }
        }
        let mut out = vec![SuperElement::zero(&self.ring); n];
        for (m, v) in per_mono {
            let coef = match solve(&self.eta, &v) {
                Solve::Solution(c) => c,
                Solve::Inconsistent(_) => return Err(IhsError::NotAdmissible(f.to_string())),
            };
            let xv = self.x.mul_vec(&coef);
            for i in 0..n {
                if !xv[i].is_zero() {
                    out[i].add_term(m.clone(), xv[i].clone());
                }
            }
        }
        Ok(out)
    }

    pub fn is_admissible(&self, f: &SuperElement) -> bool {
        self.hamiltonian_field(f).is_ok()
    }

    /// `X(g) = Σ X^i ∂_i g`.
    pub fn apply(&self, field: &[SuperElement], g: &SuperElement) -> SuperElement {
        field.iter().enumerate().fold(SuperElement::zero(&self.ring), |acc, (i, c)| &acc + &(c * &g.partial_even(i)))
    }

    /// `{f, g} = X_f(g)`.
    pub fn bracket(&self, f: &SuperElement, g: &SuperElement) -> Result<SuperElement, IhsError> {
        let xf = self.hamiltonian_field(f)?;
        self.hamiltonian_field(g)?;
        Ok(self.apply(&xf, g))
    }

    /// Basis of `L ∩ TM` (the ambiguity of `X_f`).
    pub fn gauge_directions(&self) -> Vec<Vec<Q>> {
        self.dirac.kernel().basis().to_vec()
    }
}

/// `{f, g}` for a constant Dirac structure.
pub fn admissible_bracket(dirac: &LinearDirac, f: &SuperElement, g: &SuperElement) -> Result<SuperElement, IhsError> {
    AdmissibleAlgebra::new(dirac).bracket(f, g)
}

/// Wire form of a system: exactly one of `two_form`, `bivector`, `basis`
/// (rows of `2n` rationals spanning `L`), plus `H` in `x1..xn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IHSystemJson {
    pub n: usize,
    #[serde(default)]
    pub two_form: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub bivector: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub basis: Option<Vec<Vec<String>>>,
    pub hamiltonian: String,
    #[serde(default = "default_step")]
    pub h: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_step() -> f64 {
    1e-3
}

fn default_tol() -> f64 {
    1e-9
}

fn parse_rows(rows: &[Vec<String>], width: usize) -> Result<Vec<Vec<Q>>, IhsError> {
    rows.iter()
        .map(|r| {
            if r.len() != width {
                return Err(IhsError::Invalid(format!("row of length {}, expected {width}", r.len())));
            }
            r.iter().map(|s| parse_q(s).ok_or_else(|| IhsError::Invalid(format!("bad rational `{s}`")))).collect()
        })
        .collect()
}

impl IHSystemJson {
    pub fn dirac(&self) -> Result<LinearDirac, IhsError> {
        let n = self.n;
        let square = |r: &[Vec<String>]| -> Result<MatrixQ, IhsError> {
            let rows = parse_rows(r, n)?;
            if rows.len() != n {
                return Err(IhsError::Invalid(format!("expected {n} rows")));
            }
            Ok(MatrixQ::from_rows(rows))
        };
        match (&self.two_form, &self.bivector, &self.basis) {
            (Some(w), None, None) => Ok(LinearDirac::from_two_form(&square(w)?)?),
            (None, Some(p), None) => Ok(LinearDirac::from_bivector(&square(p)?)?),
            (None, None, Some(b)) => Ok(LinearDirac::from_vectors(n, &parse_rows(b, 2 * n)?)?),
            _ => Err(IhsError::Invalid("give exactly one of two_form, bivector, basis".into())),
        }
    }

    pub fn build(&self) -> Result<IHSystem, IhsError> {
        let h = SuperElement::parse(&ring(self.n), &self.hamiltonian)?;
        IHSystem::new(self.dirac()?, h, self.h, self.tol)
    }
}

/// `⟨(ẋ, dH), (ẋ, dH)⟩ / 2 = dH(ẋ)`, zero on `L` by isotropy.
pub fn energy_rate(sys: &IHSystem, x: &[f64], v: &Velocity) -> f64 {
    sys.dh(x).dot(&v.xdot)
}
