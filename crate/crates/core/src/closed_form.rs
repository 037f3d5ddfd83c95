//! Right-hand sides of the integral identities: gamma-product evaluators
//! for the fifteen integral families, driven by one declarative term table
//! (`data/term_tables.toml`) shared between the evaluator and the
//! convergence checker, plus the low-dimensional auxiliary factors.

use crate::gamma::{complex_gamma, GammaError};
use num_complex::Complex64;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ClosedFormError {
    #[error("parameters violate convergence: {0:?}")]
    ConvergenceError(ConvergenceReport),
    #[error("gamma pole: {0}")]
    Pole(#[from] GammaError),
    #[error("parameter arity mismatch: {0}")]
    Arity(String),
    #[error("family {0:?} has no '{1}' variant")]
    MissingVariant(FamilyId, String),
    #[error("family requires a tau vector")]
    MissingTau,
}

/// The fifteen integral families. (0.12), (0.13) and (0.16) of the source
/// numbering are structure definitions, not integrals, so they do not
/// appear here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FamilyId {
    F0_1,
    F0_2,
    F0_3,
    F0_4,
    F0_5,
    F0_6,
    F0_7,
    F0_8,
    F0_9,
    F0_10,
    F0_11,
    F0_14,
    F0_15,
    F0_17,
    F0_18,
}

impl FamilyId {
    pub fn all() -> &'static [FamilyId] {
        use FamilyId::*;
        &[F0_1, F0_2, F0_3, F0_4, F0_5, F0_6, F0_7, F0_8, F0_9, F0_10, F0_11, F0_14, F0_15, F0_17, F0_18]
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyId::F0_1 => "F0_1",
            FamilyId::F0_2 => "F0_2",
            FamilyId::F0_3 => "F0_3",
            FamilyId::F0_4 => "F0_4",
            FamilyId::F0_5 => "F0_5",
            FamilyId::F0_6 => "F0_6",
            FamilyId::F0_7 => "F0_7",
            FamilyId::F0_8 => "F0_8",
            FamilyId::F0_9 => "F0_9",
            FamilyId::F0_10 => "F0_10",
            FamilyId::F0_11 => "F0_11",
            FamilyId::F0_14 => "F0_14",
            FamilyId::F0_15 => "F0_15",
            FamilyId::F0_17 => "F0_17",
            FamilyId::F0_18 => "F0_18",
        }
    }

    pub fn parse(s: &str) -> Option<FamilyId> {
        FamilyId::all().iter().copied().find(|f| f.name().eq_ignore_ascii_case(s))
    }

    /// True for the section families parameterized by (p, q).
    pub fn is_rectangular(&self) -> bool {
        matches!(self, FamilyId::F0_7 | FamilyId::F0_8 | FamilyId::F0_9)
    }

    pub fn has_tau(&self) -> bool {
        table().families[self.name()].has_tau
    }

    pub fn unknown_constant(&self) -> bool {
        table().families[self.name()].unknown_constant
    }

    pub fn domain(&self) -> &'static str {
        match table().families[self.name()].domain.as_str() {
            "cone" => "cone",
            "wedge" => "wedge",
            "section" => "section",
            "siegel_r" => "siegel_r",
            "siegel_c" => "siegel_c",
            "so_even_r" => "so_even_r",
            "so_even_c" => "so_even_c",
            "so_odd_r" => "so_odd_r",
            "so_odd_c" => "so_odd_c",
            other => panic!("unknown domain {other}"),
        }
    }

    /// True when the family carries a variant besides "as_printed".
    pub fn has_corrected_variant(&self) -> bool {
        table().families[self.name()].variants.contains_key("corrected")
    }
}

/// Which reading of a suspected-misprint family to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TableVariant {
    AsPrinted,
    /// The corrected reading when one exists, the printed one otherwise.
    #[default]
    Corrected,
}

impl TableVariant {
    pub fn name(&self) -> &'static str {
        match self {
            TableVariant::AsPrinted => "as_printed",
            TableVariant::Corrected => "corrected",
        }
    }

    pub fn parse(s: &str) -> Option<TableVariant> {
        match s {
            "as_printed" => Some(TableVariant::AsPrinted),
            "corrected" => Some(TableVariant::Corrected),
            _ => None,
        }
    }
}

/// Rank data: n for the square families, (p, q) with p ≤ q for sections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankSpec {
    N(usize),
    PQ(usize, usize),
}

impl RankSpec {
    pub fn count(&self) -> usize {
        match *self {
            RankSpec::N(n) => n,
            RankSpec::PQ(p, _) => p,
        }
    }

    fn npq(&self) -> (f64, f64, f64) {
        match *self {
            RankSpec::N(n) => (n as f64, n as f64, n as f64),
            RankSpec::PQ(p, q) => (p as f64, p as f64, q as f64),
        }
    }
}

/// Complex parameter vectors (λ, σ, τ) with their rank data.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    pub lambda: Vec<Complex64>,
    pub sigma: Vec<Complex64>,
    pub tau: Option<Vec<Complex64>>,
    pub rank: RankSpec,
}

impl ParamSet {
    pub fn real(lambda: &[f64], sigma: &[f64], tau: Option<&[f64]>, rank: RankSpec) -> Self {
        let lift = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        ParamSet {
            lambda: lift(lambda),
            sigma: lift(sigma),
            tau: tau.map(lift),
            rank,
        }
    }

    /// Apply the trailing-zero convention: vectors may be given with an
    /// explicit zero entry at index rank+1; it is stripped here.
    pub fn normalized(&self) -> Result<ParamSet, ClosedFormError> {
        let n = self.rank.count();
        let fix = |v: &Vec<Complex64>, name: &str| -> Result<Vec<Complex64>, ClosedFormError> {
            if v.len() == n {
                Ok(v.clone())
            } else if v.len() == n + 1 && v[n] == Complex64::new(0.0, 0.0) {
                Ok(v[..n].to_vec())
            } else {
                Err(ClosedFormError::Arity(format!(
                    "{name} has length {} for rank {n}",
                    v.len()
                )))
            }
        };
        Ok(ParamSet {
            lambda: fix(&self.lambda, "lambda")?,
            sigma: fix(&self.sigma, "sigma")?,
            tau: match &self.tau {
                None => None,
                Some(t) => Some(fix(t, "tau")?),
            },
            rank: self.rank,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub ok: bool,
    /// (rendered gamma argument, its value) for every violation.
    pub violations: Vec<(String, Complex64)>,
}

// ---------------------------------------------------------------------------
// term table
// ---------------------------------------------------------------------------

/// Affine expression over (1, k, n, p, q, λ_k, σ_k, τ_k, σ_n).
#[derive(Deserialize, Debug, Clone, Default)]
pub struct Affine {
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub n: f64,
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub lam: f64,
    #[serde(default)]
    pub sig: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub sig_last: f64,
}

struct Scope {
    k: f64,
    n: f64,
    p: f64,
    q: f64,
    lam: Complex64,
    sig: Complex64,
    tau: Complex64,
    sig_last: Complex64,
}

impl Affine {
    fn eval(&self, s: &Scope) -> Complex64 {
        Complex64::new(
            self.c + self.k * s.k + self.n * s.n + self.p * s.p + self.q * s.q,
            0.0,
        ) + self.lam * s.lam
            + self.sig * s.sig
            + self.tau * s.tau
            + self.sig_last * s.sig_last
    }

    fn render(&self, k: usize) -> String {
        let mut parts: Vec<String> = Vec::new();
        let mut term = |coef: f64, sym: &str| {
            if coef != 0.0 {
                if coef == 1.0 {
                    parts.push(sym.to_string());
                } else if coef == -1.0 {
                    parts.push(format!("-{sym}"));
                } else {
                    parts.push(format!("{coef}*{sym}"));
                }
            }
        };
        term(self.lam, &format!("lambda_{k}"));
        term(self.sig, &format!("sigma_{k}"));
        term(self.tau, &format!("tau_{k}"));
        term(self.sig_last, "sigma_n");
        term(self.k, "k");
        term(self.n, "n");
        term(self.p, "p");
        term(self.q, "q");
        if self.c != 0.0 || parts.is_empty() {
            parts.push(format!("{}", self.c));
        }
        parts.join(" + ").replace("+ -", "- ")
    }
}

#[derive(Deserialize, Debug)]
struct VariantRecord {
    pi_exp: Affine,
    two_exp: Affine,
    num_gammas: Vec<Affine>,
    den_gammas: Vec<Affine>,
}

#[derive(Deserialize, Debug)]
struct FamilyRecord {
    #[allow(dead_code)]
    series: String,
    domain: String,
    #[allow(dead_code)]
    field: String,
    has_tau: bool,
    unknown_constant: bool,
    variants: BTreeMap<String, VariantRecord>,
}

#[derive(Deserialize, Debug)]
#[serde(transparent)]
struct TableFile {
    families: BTreeMap<String, FamilyRecord>,
}

const TERM_TABLES: &str = include_str!("../data/term_tables.toml");

fn table() -> &'static TableFile {
    static TABLE: OnceLock<TableFile> = OnceLock::new();
    TABLE.get_or_init(|| {
        let t: TableFile = toml::from_str(TERM_TABLES).expect("term table parses");
        for (name, fam) in &t.families {
            assert!(
                fam.variants.contains_key("as_printed"),
                "{name} lacks the as_printed variant"
            );
        }
        t
    })
}

fn variant_record(
    family: FamilyId,
    variant: TableVariant,
) -> Result<&'static VariantRecord, ClosedFormError> {
    let fam = &table().families[family.name()];
    let rec = match variant {
        TableVariant::AsPrinted => fam.variants.get("as_printed"),
        TableVariant::Corrected => {
            fam.variants.get("corrected").or_else(|| fam.variants.get("as_printed"))
        }
    };
    rec.ok_or_else(|| ClosedFormError::MissingVariant(family, variant.name().into()))
}

fn scopes(
    family: FamilyId,
    params: &ParamSet,
) -> Result<Vec<Scope>, ClosedFormError> {
    let params = params.normalized()?;
    let fam = &table().families[family.name()];
    if fam.has_tau && params.tau.is_none() {
        return Err(ClosedFormError::MissingTau);
    }
    if family.is_rectangular() && !matches!(params.rank, RankSpec::PQ(_, _)) {
        return Err(ClosedFormError::Arity("section families need (p, q) rank data".into()));
    }
    let (n, p, q) = params.rank.npq();
    let count = params.rank.count();
    if params.lambda.len() != count || params.sigma.len() != count {
        return Err(ClosedFormError::Arity(format!(
            "expected {count} parameters, got lambda: {}, sigma: {}",
            params.lambda.len(),
            params.sigma.len()
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let sig_last = params.sigma[count - 1];
    Ok((1..=count)
        .map(|k| Scope {
            k: k as f64,
            n,
            p,
            q,
            lam: params.lambda[k - 1],
            sig: params.sigma[k - 1],
            tau: params.tau.as_ref().map_or(zero, |t| t[k - 1]),
            sig_last,
        })
        .collect())
}

/// Evaluate the gamma-product right-hand side of `family`. Families with
/// an undetermined constant evaluate with C = 1; callers must treat those
/// values as shapes, not absolute predictions.
pub fn rhs_value(
    family: FamilyId,
    params: &ParamSet,
    variant: TableVariant,
) -> Result<Complex64, ClosedFormError> {
    let report = convergence_check(family, params, variant)?;
    if !report.ok {
        return Err(ClosedFormError::ConvergenceError(report));
    }
    let rec = variant_record(family, variant)?;
    let mut acc = Complex64::new(1.0, 0.0);
    for s in scopes(family, params)? {
        let pi_e = rec.pi_exp.eval(&s);
        let two_e = rec.two_exp.eval(&s);
        acc *= (pi_e * PI.ln() + two_e * 2f64.ln()).exp();
        for g in &rec.num_gammas {
            acc *= complex_gamma(g.eval(&s))?;
        }
        for g in &rec.den_gammas {
            acc /= complex_gamma(g.eval(&s))?;
        }
    }
    Ok(acc)
}

/// Enumerate the numerator gamma arguments of the family (shared term
/// table with [`rhs_value`]) and report those with non-positive real part.
pub fn convergence_check(
    family: FamilyId,
    params: &ParamSet,
    variant: TableVariant,
) -> Result<ConvergenceReport, ClosedFormError> {
    let rec = variant_record(family, variant)?;
    let mut violations = Vec::new();
    for s in scopes(family, params)? {
        for g in &rec.num_gammas {
            let v = g.eval(&s);
            if v.re <= 0.0 {
                violations.push((format!("Gamma({})", g.render(s.k as usize)), v));
            }
        }
    }
    Ok(ConvergenceReport { ok: violations.is_empty(), violations })
}

/// Numerator gamma arguments per k, used by tests to cross-check the
/// shared-table property.
pub fn numerator_gamma_arguments(
    family: FamilyId,
    params: &ParamSet,
    variant: TableVariant,
) -> Result<Vec<Complex64>, ClosedFormError> {
    let rec = variant_record(family, variant)?;
    let mut out = Vec::new();
    for s in scopes(family, params)? {
        for g in &rec.num_gammas {
            out.push(g.eval(&s));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// auxiliary closed forms
// ---------------------------------------------------------------------------

/// Area of the unit sphere in ℝ^k: 2 π^{k/2} / Γ(k/2).
pub fn sphere_area(k: usize) -> f64 {
    2.0 * PI.powf(k as f64 / 2.0) / crate::gamma::gamma_real(k as f64 / 2.0).unwrap()
}

/// The auxiliary one- and two-dimensional factors with gamma closed forms.
#[derive(Clone, Copy, Debug)]
pub enum LemmaKind {
    /// ∫∫ f(u+v) u^{μ−1} v^{ν−1} with f(w) = (1+w)^{−a}:
    /// B(μ,ν)·Γ(μ+ν)Γ(a−μ−ν)/Γ(a).
    L4_2 { mu: Complex64, nu: Complex64, a: Complex64 },
    /// ∫∫ (1+x+y)^{−a} x^{b−1} y^{c−1} = Γ(b)Γ(c)Γ(a−b−c)/Γ(a).
    L4_3 { a: Complex64, b: Complex64, c: Complex64 },
    /// ∫ u^{λ−k/2−1}(1+u+|h|²)^{−σ}, h ∈ ℝ^k:
    /// π^{k/2} Γ(λ−k/2)Γ(σ−λ)/Γ(σ).
    L4_4 { lambda: Complex64, sigma: Complex64, k: usize },
    /// Separated contour factor with h ∈ ℂ^k and one imaginary direction:
    /// 2^{2−σ−τ} π^{k+1} Γ(λ−k−1)Γ(σ+τ−λ) / (Γ(σ)Γ(τ)).
    F5_3 { lambda: Complex64, sigma: Complex64, tau: Complex64, k: usize },
    /// Separated quaternionic factor with h ∈ ℍ^k and three imaginary
    /// directions: 2^{4−σ} π^{2k+2} Γ(λ−2k−3)Γ(σ−λ) / (Γ(σ/2)Γ(σ/2−1)).
    F5_4 { lambda: Complex64, sigma: Complex64, k: usize },
}

pub fn lemma_factor(kind: LemmaKind) -> Result<Complex64, ClosedFormError> {
    let g = complex_gamma;
    let v = match kind {
        LemmaKind::L4_2 { mu, nu, a } => {
            g(mu)? * g(nu)? / g(mu + nu)? * g(mu + nu)? * g(a - mu - nu)? / g(a)?
        }
        LemmaKind::L4_3 { a, b, c } => g(b)? * g(c)? * g(a - b - c)? / g(a)?,
        LemmaKind::L4_4 { lambda, sigma, k } => {
            let kh = k as f64 / 2.0;
            PI.powf(kh) * g(lambda - kh)? * g(sigma - lambda)? / g(sigma)?
        }
        LemmaKind::F5_3 { lambda, sigma, tau, k } => {
            let two = Complex64::new(2.0, 0.0) - sigma - tau;
            (two * 2f64.ln()).exp() * PI.powi(k as i32 + 1) * g(lambda - (k as f64 + 1.0))?
                * g(sigma + tau - lambda)?
                / (g(sigma)? * g(tau)?)
        }
        LemmaKind::F5_4 { lambda, sigma, k } => {
            let two = Complex64::new(4.0, 0.0) - sigma;
            (two * 2f64.ln()).exp()
                * PI.powi(2 * k as i32 + 2)
                * g(lambda - (2.0 * k as f64 + 3.0))?
                * g(sigma - lambda)?
                / (g(sigma / 2.0)? * g(sigma / 2.0 - 1.0)?)
        }
    };
    Ok(v)
}
