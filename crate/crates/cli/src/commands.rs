use crate::report::{envelope, render, sha256_hex, Output, Verdict};
use crate::{Cli, Command, Format};
use dirac_core::brackets::{darboux_table, BracketContext};
use dirac_core::courant::{
    build_theta, extend_dirac_to_order, quasi_lemma_check, summarize_master, verify_courant, CourantError, CourantInput,
    CourantInputJson, DiracExtension, ThetaStructure,
};
use dirac_core::dirac_linear::{DiracError, LinearDirac};
use dirac_core::ihs::{IHSystemJson, IhsError};
use dirac_core::lie_deform::{extend_to_order, rigidity_check, Extension, LieDeformError};
use dirac_core::multilinear::{ce_cohomology, delta_matrix, jacobiator, MultiMap};
use dirac_core::ratlin::{fmt_q, kernel_basis, parse_q, rank, solve, MatrixQ, Solve, SubspaceQ};
use dirac_core::superalg::{ConnectionData, GeneratorSet, SuperElement};
use dirac_core::Q;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::Path;

pub fn run(cli: &Cli) -> Result<Output, String> {
    let g = &cli.global;
    let fmt = match (g.format, &cli.command) {
        (None, Command::IhsRun { .. }) => Format::Csv,
        (None, _) => Format::Json,
        (Some(Format::Csv), Command::IhsRun { .. }) => Format::Csv,
        (Some(Format::Csv), _) => return Err("csv output is only available for ihs-run".into()),
        (Some(f), _) => f,
    };
    let (value, verdict) = match &cli.command {
        Command::CheckJacobi { input } => check_jacobi(input)?,
        Command::CeCohomology { input, degree } => ce_cohomology_cmd(input, *degree)?,
        Command::DeformLie { input, order } => deform_lie(input, *order)?,
        Command::DiracLinear { input } => dirac_linear(input)?,
        Command::CourantVerify { input, degree } => courant_verify(input, *degree)?,
        Command::ThetaMaster { input } => theta_master(input)?,
        Command::DeformDirac { input, order, degree_cap } => deform_dirac(input, *order, *degree_cap)?,
        Command::RothsteinCheck { m, k, gamma, degree } => rothstein_check(*m, *k, gamma, *degree, g.seed)?,
        Command::IhsRun { system, x0, steps, h } => return ihs_run(system, x0, *steps, *h, fmt),
    };
    Ok(Output { text: render(&value, fmt), code: verdict.code() })
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

/// Deserializes with the JSON path of the first schema violation.
fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        format!("schema violation at `{path}`: {}", e.into_inner())
    })
}

fn rational(s: &str, path: &str) -> Result<Q, String> {
    parse_q(s).ok_or_else(|| format!("schema violation at `{path}`: `{s}` is not a rational number"))
}

fn matrix_json(m: &MatrixQ) -> Value {
    json!((0..m.rows()).map(|i| (0..m.cols()).map(|j| fmt_q(m.get(i, j))).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn vectors_json(v: &[Vec<Q>]) -> Value {
    json!(v.iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>()).collect::<Vec<_>>())
}

type Entry = (usize, usize, usize, String);

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LieJson {
    dim: usize,
    #[serde(default)]
    constants: Vec<Entry>,
    /// `μ₁, μ₂, …` in the same format as `constants`.
    #[serde(default)]
    deformation: Vec<Vec<Entry>>,
}

fn structure(dim: usize, entries: &[Entry], path: &str) -> Result<MultiMap, String> {
    let mut out = Vec::new();
    for (i, (a, b, g, c)) in entries.iter().enumerate() {
        let p = format!("{path}[{i}]");
        if *a == 0 || *b == 0 || *g == 0 {
            return Err(format!("schema violation at `{p}`: indices are 1-based"));
        }
        out.push((a - 1, b - 1, g - 1, rational(c, &p)?));
    }
    MultiMap::from_structure_constants(dim, &out).map_err(|e| format!("schema violation at `{path}`: {e}"))
}

/// Nonzero values as `[i₁, …, i_r, γ, c]`, 1-based.
fn multimap_json(m: &MultiMap) -> Value {
    let mut rows = Vec::new();
    for (idx, v) in m.coeffs() {
        for (g, c) in v.iter().enumerate() {
            if !num_traits_is_zero(c) {
                let mut row: Vec<Value> = idx.iter().map(|i| json!(i + 1)).collect();
                row.push(json!(g + 1));
                row.push(json!(fmt_q(c)));
                rows.push(Value::Array(row));
            }
        }
    }
    Value::Array(rows)
}

fn num_traits_is_zero(c: &Q) -> bool {
    *c == Q::from_integer(0.into())
}

fn check_jacobi(input: &Path) -> Result<(Value, Verdict), String> {
    let bytes = read(input)?;
    let j: LieJson = parse(&bytes)?;
    let mu = structure(j.dim, &j.constants, "constants")?;
    let jac = jacobiator(&mu);
    let nr = mu.nr_bracket(&mu).map_err(|e| e.to_string())?;
    let first = jac.first_nonzero().map(|(idx, v)| {
        json!({"triple": idx.iter().map(|i| i + 1).collect::<Vec<_>>(), "value": v.iter().map(fmt_q).collect::<Vec<_>>()})
    });
    let ok = jac.is_zero();
    let body = json!({
        "dim": j.dim,
        "jacobiator_zero": ok,
        "nr_square_zero": nr.is_zero(),
        "first_failing_triple": first,
    });
    let verdict = Verdict::from_bool(ok && nr.is_zero());
    Ok((envelope("check-jacobi", &bytes, if ok { "pass" } else { "violation" }, body), verdict))
}

fn ce_cohomology_cmd(input: &Path, degree: Option<usize>) -> Result<(Value, Verdict), String> {
    let bytes = read(input)?;
    let j: LieJson = parse(&bytes)?;
    let mu = structure(j.dim, &j.constants, "constants")?;
    if !mu.is_lie() {
        let body = json!({"dim": j.dim, "lie": false});
        return Ok((envelope("ce-cohomology", &bytes, "violation", body), Verdict::Fail));
    }
    let degrees: Vec<usize> = match degree {
        Some(k) => vec![k],
        None => (0..=j.dim).collect(),
    };
    let mut rows = Vec::new();
    for k in degrees {
        let h = ce_cohomology(&mu, k).map_err(|e| e.to_string())?;
        rows.push(json!({
            "degree": k,
            "dim": h.dim,
            "cocycles_dim": h.cocycles_dim,
            "coboundaries_dim": h.coboundaries_dim,
            "representatives": h.representatives.iter().map(multimap_json).collect::<Vec<_>>(),
        }));
    }
    let body = json!({"dim": j.dim, "lie": true, "coefficients": "adjoint", "cohomology": rows});
    Ok((envelope("ce-cohomology", &bytes, "pass", body), Verdict::Pass))
}

fn deform_lie(input: &Path, order: usize) -> Result<(Value, Verdict), String> {
    let bytes = read(input)?;
    let j: LieJson = parse(&bytes)?;
    let mu = structure(j.dim, &j.constants, "constants")?;
    if !mu.is_lie() {
        let body = json!({"dim": j.dim, "lie": false});
        return Ok((envelope("deform-lie", &bytes, "violation", body), Verdict::Fail));
    }
    let rig = rigidity_check(&mu).map_err(|e| e.to_string())?;
    // each basis cocycle is tested for exactness by solving δν = z
    let cocycles = kernel_basis(&delta_matrix(&mu, 2));
    let d1 = delta_matrix(&mu, 1);
    let all_exact = cocycles.basis().iter().all(|z| matches!(solve(&d1, z), Solve::Solution(_)));
    let mut body = json!({
        "dim": j.dim,
        "h2_dim": rig.h2_dim,
        "rigid": rig.rigid,
        "order1_cocycles_dim": cocycles.dim(),
        "order1_coboundaries_dim": rank(&d1),
        "every_order1_cocycle_is_coboundary": all_exact,
    });
    let mut verdict = "pass";
    let mut prefix = vec![mu.clone()];
    for (i, e) in j.deformation.iter().enumerate() {
        prefix.push(structure(j.dim, e, &format!("deformation[{i}]"))?);
    }
    if prefix.len() == 1 {
        // no deformation given: start from the first H² representative
        let h2 = ce_cohomology(&mu, 2).map_err(|e| e.to_string())?;
        if let Some(rep) = h2.representatives.first() {
            prefix.push(rep.clone());
            body["default_order1"] = json!(true);
        }
    }
    if prefix.len() > 1 {
        let run = match extend_to_order(&prefix, order) {
            Ok(r) => r,
            Err(LieDeformError::PreconditionMc(k)) => {
                return Err(format!("deformation violates the Maurer-Cartan equation at order {k}"))
            }
            Err(e) => return Err(e.to_string()),
        };
        let certs: Vec<Value> = run
            .certificates
            .iter()
            .map(|c| {
                let mut v = json!({
                    "order": c.order,
                    "cocycle": multimap_json(&c.cocycle),
                    "closed": c.is_closed(),
                    "verified": c.verify(&mu),
                });
                match &c.extension {
                    Extension::Solved(m) => {
                        v["verdict"] = json!("extends");
                        v["residual_zero"] = json!(true);
                        v["solution_space_dim"] = json!(cocycles.dim());
                        v["solution"] = multimap_json(m);
                    }
                    Extension::Obstructed(y) => {
                        v["verdict"] = json!("obstructed");
                        v["residual_zero"] = json!(false);
                        v["solution_space_dim"] = json!(0);
                        v["class"] = json!("H3");
                        v["witness"] = json!(y.iter().map(fmt_q).collect::<Vec<_>>());
                    }
                }
                v
            })
            .collect();
        verdict = if run.obstructed_at.is_some() { "obstructed" } else { "extends" };
        body["prefix"] = json!(prefix.iter().skip(1).map(multimap_json).collect::<Vec<_>>());
        body["orders"] = json!(certs);
        body["obstructed_at"] = json!(run.obstructed_at);
    }
    Ok((envelope("deform-lie", &bytes, verdict, body), Verdict::from_bool(verdict != "obstructed")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiracJson {
    n: usize,
    #[serde(default)]
    two_form: Option<Vec<Vec<String>>>,
    #[serde(default)]
    bivector: Option<Vec<Vec<String>>>,
    #[serde(default)]
    basis: Option<Vec<Vec<String>>>,
}

fn rows(r: &[Vec<String>], width: usize, path: &str) -> Result<Vec<Vec<Q>>, String> {
    r.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != width {
                return Err(format!("schema violation at `{path}[{i}]`: expected {width} entries"));
            }
            row.iter().enumerate().map(|(j, s)| rational(s, &format!("{path}[{i}][{j}]"))).collect()
        })
        .collect()
}

fn dirac_linear(input: &Path) -> Result<(Value, Verdict), String> {
    let bytes = read(input)?;
    let j: DiracJson = parse(&bytes)?;
    let n = j.n;
    let square = |r: &[Vec<String>], p: &str| -> Result<MatrixQ, String> {
        let m = rows(r, n, p)?;
        if m.len() != n {
            return Err(format!("schema violation at `{p}`: expected {n} rows"));
        }
        Ok(MatrixQ::from_rows(m))
    };
    let built = match (&j.two_form, &j.bivector, &j.basis) {
        (Some(w), None, None) => LinearDirac::from_two_form(&square(w, "two_form")?),
        (None, Some(p), None) => LinearDirac::from_bivector(&square(p, "bivector")?),
        (None, None, Some(b)) => LinearDirac::new(n, SubspaceQ::span(2 * n, &rows(b, 2 * n, "basis")?)),
        _ => return Err("schema violation at `.`: give exactly one of two_form, bivector, basis".into()),
    };
    let l = match built {
        Ok(l) => l,
        Err(e @ (DiracError::NotIsotropic | DiracError::NotMaximal { .. })) => {
            let body = json!({"n": n, "dirac": false, "reason": e.to_string()});
            return Ok((envelope("dirac-linear", &bytes, "violation", body), Verdict::Fail));
        }
        Err(e) => return Err(e.to_string()),
    };
    let rep = l.represent();
    let same = |a: &SubspaceQ, b: &SubspaceQ| a.is_subspace_of(b) && b.is_subspace_of(a);
    let from_range = LinearDirac::from_range_form(n, &rep.range).map(|x| same(x.space(), l.space())).unwrap_or(false);
    let from_kernel = LinearDirac::from_kernel_bivector(n, &rep.kernel).map(|x| same(x.space(), l.space())).unwrap_or(false);
    let body = json!({
        "n": n,
        "dirac": true,
        "basis": vectors_json(l.space().basis()),
        "range": {"basis": vectors_json(rep.range.range.basis()), "omega": matrix_json(&rep.range.omega)},
        "kernel": {
            "basis": vectors_json(rep.kernel.kernel.basis()),
            "annihilator": vectors_json(rep.kernel.annihilator.basis()),
            "pi": matrix_json(&rep.kernel.pi),
        },
        "range_dim": rep.range.range.dim(),
        "kernel_dim": rep.kernel.kernel.dim(),
        "round_trip_range_form": from_range,
        "round_trip_kernel_bivector": from_kernel,
    });
    let ok = from_range && from_kernel;
    Ok((envelope("dirac-linear", &bytes, if ok { "pass" } else { "violation" }, body), Verdict::from_bool(ok)))
}

fn courant_input(bytes: &[u8]) -> Result<CourantInput, String> {
    let j: CourantInputJson = parse(bytes)?;
    CourantInput::from_json(&j).map_err(|e| e.to_string())
}

fn theta_of(input: &CourantInput) -> Result<ThetaStructure, String> {
    build_theta(input).map_err(|e| e.to_string())
}

fn courant_verify(input: &Path, degree: u32) -> Result<(Value, Verdict), String> {
    let bytes = read(input)?;
    let theta = theta_of(&courant_input(&bytes)?)?;
    let report = verify_courant(&theta, degree).map_err(|e| e.to_string())?;
    let quasi = quasi_lemma_check(&theta, degree).map_err(|e| e.to_string())?;
    let ok = report.passed() && quasi.iter().all(|c| c.passed());
    let body = json!({
        "m": theta.m(),
        "k": theta.k(),
        "test_degree": degree,
        "theta": theta.theta().to_string(),
        "master": report.master,
        "axioms": report.checks,
        "quasi_bialgebroid": quasi,
    });
    Ok((envelope("courant-verify", &bytes, if ok { "pass" } else { "violation" }, body), Verdict::from_bool(ok)))
}

fn theta_master(input: &Path) -> Result<(Value, Verdict), String> {
    let bytes = read(input)?;
    let theta = theta_of(&courant_input(&bytes)?)?;
    let res = theta.master().map_err(|e| e.to_string())?;
    let ok = res.all_zero();
    let p = theta.parts();
    let body = json!({
        "theta": theta.theta().to_string(),
        "parts": {"mu": p.mu.to_string(), "gamma": p.gamma.to_string(), "psi": p.psi.to_string(), "phi": p.phi.to_string()},
        "components": summarize_master(&res),
    });
    Ok((envelope("theta-master", &bytes, if ok { "pass" } else { "violation" }, body), Verdict::from_bool(ok)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeformDiracJson {
    structure: CourantInputJson,
    /// `ω₁, ω₂, …` as 2-forms in `q1..qm, a^1..a^k`.
    #[serde(default)]
    prefix: Vec<String>,
}

fn deform_dirac(input: &Path, order: usize, cap: u32) -> Result<(Value, Verdict), String> {
    let bytes = read(input)?;
    let raw: Value = parse(&bytes)?;
    let (cj, prefix_text) = if raw.get("structure").is_some() {
        let j: DeformDiracJson = parse(&bytes)?;
        (j.structure, j.prefix)
    } else {
        (parse::<CourantInputJson>(&bytes)?, Vec::new())
    };
    let inp = CourantInput::from_json(&cj).map_err(|e| e.to_string())?;
    let theta = theta_of(&inp)?;
    let mut prefix = Vec::new();
    for (i, s) in prefix_text.iter().enumerate() {
        prefix.push(SuperElement::parse(theta.gens(), s).map_err(|e| format!("schema violation at `prefix[{i}]`: {e}"))?);
    }
    if prefix.is_empty() {
        // default ω₁ = Σ_{α<β} a^α a^β, which must be d_L-closed
        let w1 = theta.assemble_form(2, |_| SuperElement::one(theta.gens()));
        if !theta.d_l(&w1).is_zero() {
            return Err("the default ω₁ = Σ a^α a^β is not closed; give `prefix` explicitly".into());
        }
        prefix.push(w1);
    }
    let run = match extend_dirac_to_order(&theta, &prefix, order, cap) {
        Ok(r) => r,
        Err(CourantError::PreconditionMc(n)) => return Err(format!("prefix violates the deformation equation at order {n}")),
        Err(CourantError::DegreeCapExceeded { found, cap }) => {
            let body = json!({"degree_cap": cap, "residual_degree": found});
            return Ok((envelope("deform-dirac", &bytes, "degree_cap_exceeded", body), Verdict::Fail));
        }
        Err(e) => return Err(e.to_string()),
    };
    let orders: Vec<Value> = run
        .certificates
        .iter()
        .map(|c| {
            let mut v = json!({
                "order": c.order,
                "cocycle": c.cocycle.to_string(),
                "closed": c.is_closed(),
                "constant_case": c.constant_case,
                "degree_cap": c.degree_cap,
                "verdict": c.verdict(),
                "verified": c.verify(&theta),
            });
            match &c.extension {
                DiracExtension::Solved(w) => {
                    v["solution"] = json!(w.to_string());
                    v["h3_class"] = json!("zero");
                }
                DiracExtension::Obstructed { witness } => {
                    v["witness"] = json!(witness.to_string());
                    v["h3_class"] = json!("nonzero");
                }
                DiracExtension::NoSolutionUpToDegree { witness, .. } => {
                    v["witness"] = json!(witness.to_string());
                    v["h3_class"] = json!("undetermined");
                }
            }
            v
        })
        .collect();
    let verdict = run.certificates.last().filter(|_| run.stopped_at.is_some()).map_or("extends", |c| c.verdict());
    let body = json!({
        "m": theta.m(),
        "k": theta.k(),
        "prefix": prefix.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "omega": run.orders.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "orders": orders,
        "stopped_at": run.stopped_at,
    });
    Ok((envelope("deform-dirac", &bytes, verdict, body), Verdict::from_bool(run.stopped_at.is_none())))
}

fn rothstein_check(m: usize, k: usize, gamma: &str, degree: u32, seed: u64) -> Result<(Value, Verdict), String> {
    if 2 * k > 64 {
        return Err("k must be at most 32".into());
    }
    let gens = GeneratorSet::rothstein(m, k);
    let conn = match gamma {
        "flat" => ConnectionData::flat(&gens),
        "random" => ConnectionData::random(&gens, degree, &mut ChaCha8Rng::seed_from_u64(seed)),
        other => match other.strip_prefix("random-seed=").map(str::parse::<u64>) {
            Some(Ok(s)) => ConnectionData::random(&gens, degree, &mut ChaCha8Rng::seed_from_u64(s)),
            _ => return Err(format!("bad --gamma `{other}`: expected flat, random or random-seed=N")),
        },
    };
    let canonical = format!("rothstein-check m={m} k={k} gamma={gamma} degree={degree} seed={seed}");
    let mut conn_entries = Vec::new();
    for i in 0..m {
        for a in 0..k {
            for b in 0..k {
                let g = conn.gamma(i, a, b);
                if !g.is_zero() {
                    conn_entries.push(json!([i + 1, a + 1, b + 1, g.to_string()]));
                }
            }
        }
    }
    let ctx = BracketContext::rothstein(conn);
    let table = darboux_table(&ctx).map_err(|e| e.to_string())?;
    let nonzero = table.iter().filter(|e| !e.residual.is_zero()).count();
    let entries: Vec<Value> = table.iter().map(|e| json!({"bracket": e.label, "residual": e.residual.to_string()})).collect();
    let body = json!({
        "m": m,
        "k": k,
        "connection": conn_entries,
        "entries": entries.len(),
        "nonzero_residuals": nonzero,
        "table": entries,
    });
    let ok = nonzero == 0;
    Ok((envelope("rothstein-check", canonical.as_bytes(), if ok { "pass" } else { "violation" }, body), Verdict::from_bool(ok)))
}

fn ihs_run(system: &Path, x0: &str, steps: usize, h: Option<f64>, fmt: Format) -> Result<Output, String> {
    let bytes = read(system)?;
    let mut j: IHSystemJson = parse(&bytes)?;
    if let Some(h) = h {
        j.h = h;
    }
    let sys = j.build().map_err(|e| e.to_string())?;
    let x: Vec<f64> = x0
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad --x0 entry `{s}`")))
        .collect::<Result<_, _>>()?;
    let hash = sha256_hex(&[bytes.as_slice(), format!("|x0={x0}|steps={steps}|h={}", j.h).as_bytes()].concat());
    let result = sys.integrate(&x, steps);
    let (verdict, code) = match &result {
        Ok(_) => ("pass", 0),
        Err(IhsError::LeftAdmissibleSet { .. } | IhsError::Inadmissible { .. }) => ("left_admissible_set", 1),
        Err(e) => return Err(e.to_string()),
    };
    let text = match fmt {
        Format::Csv => {
            let mut s = format!(
                "# engine_version={}\n# input_sha256={hash}\n# verdict={verdict}\n",
                dirac_core::ENGINE_VERSION
            );
            match &result {
                Ok(t) => {
                    s.push_str(&format!("# max_drift={:e}\n", t.max_drift));
                    s.push_str(&t.to_csv());
                }
                Err(e) => s.push_str(&format!("# error={e}\n")),
            }
            s
        }
        f => {
            let body = match &result {
                Ok(t) => json!({
                    "steps": steps,
                    "h": j.h,
                    "max_drift": t.max_drift,
                    "final_state": t.states.last(),
                    "max_constraint_residual": t.constraint_residuals.iter().cloned().fold(0.0, f64::max),
                }),
                Err(e) => json!({"steps": steps, "h": j.h, "error": e.to_string()}),
            };
            let mut v = envelope("ihs-run", &[], verdict, body);
            v["input_sha256"] = json!(hash);
            render(&v, f)
        }
    };
    Ok(Output { text, code })
}
