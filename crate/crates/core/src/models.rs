//! Models of the ten classical noncompact symmetric spaces: matrix balls,
//! Cayley transforms to cones/wedges/Siegel domains, sections of wedges,
//! fractional-linear group actions with their Jacobians, invariant
//! densities, Berezin kernels, and parabolic eigenfunctions.

use crate::ground_fields::{GroundField, Quat};
use crate::matk::{j_matrix, j_structure_residual, JStructuredMat, MatError, MatK, SymmetryClass};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("matrix error: {0}")]
    Mat(#[from] MatError),
    #[error("1 + argument is singular")]
    SingularError,
    #[error("point outside the model domain: {0}")]
    DomainError(String),
    #[error("invalid transformation parameters: {0}")]
    StructureError(String),
}

/// The ten classical series, tagged by their matrix ball realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    GlR,
    GlC,
    GlH,
    UpqR,
    UpqC,
    UpqH,
    Sp2nR,
    Sp2nC,
    OnC,
    SoStar,
}

/// A series plus its rank data. `p == q == n` for the square series; for
/// `OnC`/`SoStar` the stored size is the matrix size m of the antisymmetric
/// ball (m = 2n even models, m = 2n+1 odd models).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceFamily {
    pub series: Series,
    pub p: usize,
    pub q: usize,
}

impl SpaceFamily {
    pub fn square(series: Series, n: usize) -> Self {
        SpaceFamily { series, p: n, q: n }
    }

    pub fn rectangular(series: Series, p: usize, q: usize) -> Self {
        assert!(p <= q, "convention p <= q");
        SpaceFamily { series, p, q }
    }

    pub fn n(&self) -> usize {
        self.p
    }

    /// Ground field of the ball matrices.
    pub fn ball_field(&self) -> GroundField {
        match self.series {
            Series::GlR | Series::UpqR | Series::OnC => GroundField::Real,
            Series::GlC | Series::UpqC | Series::Sp2nR | Series::SoStar => GroundField::Complex,
            Series::GlH | Series::UpqH | Series::Sp2nC => GroundField::Quaternion,
        }
    }

    pub fn ball_shape(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn ball_symmetry(&self) -> SymmetryClass {
        match self.series {
            Series::GlR => SymmetryClass::Symmetric,
            Series::GlC | Series::GlH => SymmetryClass::Hermitian,
            Series::UpqR | Series::UpqC | Series::UpqH => SymmetryClass::None,
            Series::Sp2nR => SymmetryClass::Symmetric,
            Series::Sp2nC => SymmetryClass::AntiHermitian,
            Series::OnC | Series::SoStar => SymmetryClass::Antisymmetric,
        }
    }

    /// Real dimension of G/K (equal to the real dimension of the ball).
    pub fn dim_gk(&self) -> usize {
        let (p, q) = (self.p, self.q);
        let n = p;
        match self.series {
            Series::GlR => n * (n + 1) / 2,
            Series::GlC => n * n,
            Series::GlH => n * (2 * n - 1),
            Series::UpqR => p * q,
            Series::UpqC => 2 * p * q,
            Series::UpqH => 4 * p * q,
            Series::Sp2nR => n * (n + 1),
            Series::Sp2nC => n * (2 * n + 1),
            Series::OnC => n * (n - 1) / 2,
            Series::SoStar => n * (n - 1),
        }
    }

    /// Exponent h of the fractional-linear Jacobian |det(α+zγ)|^{-h}.
    ///
    /// For the square series this is 2·dim(G/K)/m with m the ball size; the
    /// stated "2n·dim G/K" of the source text is dimensionally wrong and the
    /// per-family values here are pinned by the finite-difference Jacobian
    /// test instead.
    pub fn jacobian_exponent(&self) -> f64 {
        let (p, q) = (self.p, self.q);
        let n = p as f64;
        match self.series {
            Series::GlR => n + 1.0,
            Series::GlC => 2.0 * n,
            Series::GlH => 4.0 * n - 2.0,
            Series::UpqR => (p + q) as f64,
            Series::UpqC => 2.0 * (p + q) as f64,
            Series::UpqH => 4.0 * (p + q) as f64,
            Series::Sp2nR => 2.0 * n + 2.0,
            Series::Sp2nC => 4.0 * n + 2.0,
            Series::OnC => n - 1.0,
            Series::SoStar => 2.0 * (n - 1.0),
        }
    }

    /// Exponent e of the invariant measure det(R+R*)^{-e} in the unbounded
    /// model (dim(G/K) divided by the model matrix size).
    pub fn wedge_density_exponent(&self) -> f64 {
        self.dim_gk() as f64 / self.p as f64
    }
}

/// Point of a matrix ball, operator norm < 1.
#[derive(Clone, Debug)]
pub struct BallPoint {
    pub z: MatK,
}

impl BallPoint {
    pub fn new(z: MatK) -> Result<Self, ModelError> {
        let norm = z.operator_norm();
        if norm >= 1.0 {
            return Err(ModelError::DomainError(format!("operator norm {norm} >= 1")));
        }
        Ok(BallPoint { z })
    }
}

/// Dissipative matrix split as R = T + S, T ≫ 0 hermitian, S* = −S.
#[derive(Clone, Debug)]
pub struct WedgePoint {
    pub t: MatK,
    pub s: MatK,
}

impl WedgePoint {
    pub fn r(&self) -> MatK {
        self.t.add(&self.s)
    }

    pub fn from_r(r: &MatK) -> Self {
        let t = r.plus_adjoint().scale(0.5);
        let s = r.sub(&r.adjoint()).scale(0.5);
        WedgePoint { t, s }
    }
}

/// Point of the section-of-wedge model SW_{p,q}: L is p×(q−p), M = M* with
/// M − LL* ≫ 0, N = −N*.
#[derive(Clone, Debug)]
pub struct SectionPoint {
    pub l: MatK,
    pub m: MatK,
    pub n: MatK,
}

impl SectionPoint {
    pub fn k(&self) -> MatK {
        self.m.add(&self.n)
    }

    pub fn schur(&self) -> MatK {
        self.m.sub(&self.l.matmul(&self.l.adjoint()))
    }

    pub fn base(field: GroundField, p: usize, q: usize) -> Self {
        SectionPoint {
            l: MatK::zeros(field, p, q - p),
            m: MatK::identity(field, p),
            n: MatK::zeros(field, p, p),
        }
    }
}

/// Siegel point for Sp(2n,R): R = T + iS with T, S real symmetric, T ≫ 0,
/// or for Sp(2n,C): R = T + Sj with T complex hermitian ≫ 0, S complex
/// symmetric.
#[derive(Clone, Debug)]
pub struct SiegelPoint {
    pub t: MatK,
    pub s: MatK,
}

/// Plain Cayley transform z ↦ (1−z)(1+z)⁻¹ = −1 + 2(1+z)⁻¹; an involution.
pub fn cayley(z: &MatK) -> Result<MatK, ModelError> {
    let one_plus = z.add_identity();
    let inv = one_plus.inverse().map_err(|_| ModelError::SingularError)?;
    Ok(inv.scale(2.0).sub(&MatK::identity(z.field, z.rows)))
}

/// Modified Cayley transform for Sp(2n,C)/Sp(n): R = −1 + 2(1 + i z)⁻¹ on
/// anti-hermitian quaternionic z. Returns R together with its (T, S)
/// splitting R = T + Sj into complex hermitian and complex symmetric parts.
pub fn modified_cayley_sp2nc(z: &MatK) -> Result<(MatK, SiegelPoint), ModelError> {
    debug_assert_eq!(z.field, GroundField::Quaternion);
    let iz = z.scalar_mul_left(Quat::new(0.0, 1.0, 0.0, 0.0));
    let inv = iz.add_identity().inverse().map_err(|_| ModelError::SingularError)?;
    let r = inv.scale(2.0).sub(&MatK::identity(z.field, z.rows));
    // split quaternion entries q = a + bi + (c + di) j
    let n = r.rows;
    let mut t = MatK::zeros(GroundField::Complex, n, n);
    let mut s = MatK::zeros(GroundField::Complex, n, n);
    for i in 0..n {
        for j in 0..n {
            let q = r.get(i, j);
            t.set(i, j, Quat::new(q.re, q.i, 0.0, 0.0));
            s.set(i, j, Quat::new(q.j, q.k, 0.0, 0.0));
        }
    }
    Ok((r, SiegelPoint { t, s }))
}

/// Modified Cayley transform for O(2n,C)/O(2n) and SO*(4n)/U(2n):
/// R = −1 + 2(1 + J z)⁻¹ on antisymmetric z of even size.
pub fn modified_cayley_so(z: &MatK) -> Result<JStructuredMat, ModelError> {
    let j = j_matrix(z.field, z.rows);
    let jz = j.matmul(z);
    let inv = jz.add_identity().inverse().map_err(|_| ModelError::SingularError)?;
    let r = inv.scale(2.0).sub(&MatK::identity(z.field, z.rows));
    JStructuredMat::new(r, 1e-9).map_err(ModelError::Mat)
}

/// Element of the transformation group in the block form (α β; γ δ).
#[derive(Clone, Debug)]
pub struct GroupElement {
    pub alpha: MatK,
    pub beta: MatK,
    pub gamma: MatK,
    pub delta: MatK,
    pub family: SpaceFamily,
}

impl GroupElement {
    pub fn identity(family: SpaceFamily) -> Self {
        let f = family.ball_field();
        let (p, q) = family.ball_shape();
        GroupElement {
            alpha: MatK::identity(f, p),
            beta: MatK::zeros(f, p, q),
            gamma: MatK::zeros(f, q, p),
            delta: MatK::identity(f, q),
            family,
        }
    }

    pub fn assemble(&self) -> MatK {
        crate::matk::assemble_blocks(&self.alpha, &self.beta, &self.gamma, &self.delta)
    }

    /// Residual of g M g* = M with M = diag(1_p, −1_q).
    pub fn form_residual(&self) -> f64 {
        let g = self.assemble();
        let m = indefinite_form(self.family);
        let lhs = g.matmul(&m).matmul(&g.adjoint());
        lhs.sub(&m).max_abs()
    }
}

fn indefinite_form(family: SpaceFamily) -> MatK {
    let f = family.ball_field();
    let (p, q) = family.ball_shape();
    let mut m = MatK::identity(f, p + q);
    for i in p..p + q {
        m.set(i, i, Quat::real(-1.0));
    }
    m
}

/// Fractional-linear action z ↦ (α + zγ)⁻¹(β + zδ).
pub fn mobius(g: &GroupElement, z: &MatK) -> Result<MatK, ModelError> {
    let a = g.alpha.add(&z.matmul(&g.gamma));
    let ainv = a.inverse().map_err(|_| ModelError::SingularError)?;
    Ok(ainv.matmul(&g.beta.add(&z.matmul(&g.delta))))
}

fn abs_det_k(m: &MatK) -> f64 {
    match m.field {
        GroundField::Quaternion => m.det_k().re,
        _ => m.det_k().norm(),
    }
}

/// Jacobian |det(α + zγ)|^{-h} of the fractional-linear action on the
/// ball's real coordinates, h from the family table.
pub fn mobius_jacobian(g: &GroupElement, z: &MatK) -> Result<f64, ModelError> {
    let a = g.alpha.add(&z.matmul(&g.gamma));
    let d = abs_det_k(&a);
    if d <= 0.0 || !d.is_finite() {
        return Err(ModelError::SingularError);
    }
    Ok(d.powf(-g.family.jacobian_exponent()))
}

/// Invariant density det(R+R*)^{-dim(G/K)/m} on the cone/wedge model.
pub fn invariant_density(family: SpaceFamily, r: &MatK) -> Result<f64, ModelError> {
    let h = r.plus_adjoint();
    if !h.is_positive_definite().unwrap_or(false) {
        return Err(ModelError::DomainError("R + R* is not positive definite".into()));
    }
    let d = h.det_k().re;
    Ok(d.powf(-family.wedge_density_exponent()))
}

/// Invariant density |det(1−zz*)|^{-h/2} on the ball.
pub fn ball_density(family: SpaceFamily, z: &MatK) -> f64 {
    let w = MatK::identity(z.field, z.rows).sub(&z.matmul(&z.adjoint()));
    abs_det_k(&w).powf(-family.jacobian_exponent() / 2.0)
}

/// Berezin kernel in the ball model: det(1 − zz*)^α.
///
/// The sign convention is fixed so that the ball, wedge and section forms
/// agree through the Cayley transform and the kernel decays toward the
/// boundary (the integrable normalization used by the Plancherel layer).
pub fn berezin_ball(z: &MatK, alpha: Complex64) -> Complex64 {
    let w = MatK::identity(z.field, z.rows).sub(&z.matmul(&z.adjoint()));
    let d = match z.field {
        GroundField::Quaternion => w.det_k().re,
        _ => w.det_k().re, // hermitian PD, so the determinant is real
    };
    (alpha * d.ln()).exp()
}

/// Berezin kernel in the wedge model: (det 2(R+R*))^α / |det(1+R)|^{2α}.
pub fn berezin_wedge(r: &MatK, alpha: Complex64) -> Complex64 {
    let num = r.plus_adjoint().scale(2.0).det_k().re;
    let den = abs_det_k(&r.add_identity());
    (alpha * (num.ln() - 2.0 * den.ln())).exp()
}

/// Berezin kernel on SW_{p,q}: 4^{αp} det(M−LL*)^α / |det(1+M+N)|^{2α}.
pub fn berezin_section(pt: &SectionPoint, alpha: Complex64) -> Complex64 {
    let p = pt.m.rows as f64;
    let num = pt.schur().det_k().re;
    let den = abs_det_k(&pt.k().add_identity());
    (alpha * (p * 4f64.ln() + num.ln() - 2.0 * den.ln())).exp()
}

/// Embed a ball point of B_{p,q} into the section model: split z = (X Y),
/// then K = −1 + 2(1+Y)⁻¹ and L = −(1+Y)⁻¹X.
pub fn section_embed(z: &MatK, p: usize, q: usize) -> Result<SectionPoint, ModelError> {
    debug_assert_eq!((z.rows, z.cols), (p, q));
    let x = z.block(0, 0, p, q - p);
    let y = z.block(0, q - p, p, p);
    let inv = y.add_identity().inverse().map_err(|_| ModelError::SingularError)?;
    let k = inv.scale(2.0).sub(&MatK::identity(z.field, p));
    let l = inv.matmul(&x).scale(-1.0);
    let m = k.plus_adjoint().scale(0.5);
    let n = k.sub(&k.adjoint()).scale(0.5);
    Ok(SectionPoint { l, m, n })
}

/// Inverse of [`section_embed`].
pub fn section_project(pt: &SectionPoint) -> Result<MatK, ModelError> {
    let k = pt.k();
    let p = k.rows;
    let qp = pt.l.cols;
    let inv = k.add_identity().inverse().map_err(|_| ModelError::SingularError)?;
    let y = inv.scale(2.0).sub(&MatK::identity(k.field, p));
    let x = inv.matmul(&pt.l).scale(-2.0);
    let mut z = MatK::zeros(k.field, p, qp + p);
    for i in 0..p {
        for j in 0..qp {
            z.set(i, j, x.get(i, j));
        }
        for j in 0..p {
            z.set(i, qp + j, y.get(i, j));
        }
    }
    Ok(z)
}

/// Parabolic eigenfunction ∏_j det[T]_j^{μ_j − μ_{j+1}} (μ_{n+1} = 0) of a
/// hermitian positive definite matrix over any ground field. Equal to
/// ∏_l t_l^{μ_l} in terms of the squared Cholesky diagonal.
pub fn parabolic_eigenfunction(t: &MatK, mu: &[Complex64]) -> Result<Complex64, ModelError> {
    debug_assert_eq!(t.rows, mu.len());
    let g = t
        .cholesky(1e-300)
        .map_err(|_| ModelError::DomainError("leading block not positive definite".into()))?;
    let mut log = Complex64::new(0.0, 0.0);
    for (l, m) in mu.iter().enumerate() {
        let d = g.get(l, l).re;
        log += m * (2.0 * d.ln());
    }
    Ok(log.exp())
}

/// Parameters (A, C, D, Z) of the parabolic action (3.8) on SW_{p,q}.
pub struct SectionAction {
    pub a: MatK,
    pub c: MatK,
    pub d: MatK,
    pub z: MatK,
}

/// Parabolic action (L, K) ↦ (DLA* + CA*, DKD* + CC* + 2DLC* + Z).
pub fn section_parabolic_action(
    act: &SectionAction,
    pt: &SectionPoint,
) -> Result<SectionPoint, ModelError> {
    let qp = pt.l.cols;
    let unitary_res = act
        .a
        .matmul(&act.a.adjoint())
        .sub(&MatK::identity(act.a.field, qp))
        .max_abs();
    if unitary_res > 1e-9 {
        return Err(ModelError::StructureError(format!("A A* != 1 (residual {unitary_res:.2e})")));
    }
    if act.z.add(&act.z.adjoint()).max_abs() > 1e-9 {
        return Err(ModelError::StructureError("Z is not anti-hermitian".into()));
    }
    let l2 = act.d.matmul(&pt.l).add(&act.c).matmul(&act.a.adjoint());
    let k = pt.k();
    let k2 = act
        .d
        .matmul(&k)
        .matmul(&act.d.adjoint())
        .add(&act.c.matmul(&act.c.adjoint()))
        .add(&act.d.matmul(&pt.l).matmul(&act.c.adjoint()).scale(2.0))
        .add(&act.z);
    let m2 = k2.plus_adjoint().scale(0.5);
    let n2 = k2.sub(&k2.adjoint()).scale(0.5);
    let out = SectionPoint { l: l2, m: m2, n: n2 };
    if !out.schur().is_positive_definite().unwrap_or(false) {
        return Err(ModelError::DomainError("action left the section domain".into()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// random elements for property tests and Haar averaging
// ---------------------------------------------------------------------------

/// Random ball point of the family's symmetry class with operator norm
/// `radius` < 1.
pub fn random_ball_point<R: Rng>(family: SpaceFamily, radius: f64, rng: &mut R) -> MatK {
    let f = family.ball_field();
    let (p, q) = family.ball_shape();
    let raw = crate::test_support::rand_matrix(rng, f, p, q, 1.0);
    let z = match family.ball_symmetry() {
        SymmetryClass::None => raw,
        SymmetryClass::Symmetric => raw.add(&raw.transpose()).scale(0.5),
        SymmetryClass::Antisymmetric => raw.sub(&raw.transpose()).scale(0.5),
        SymmetryClass::Hermitian => raw.add(&raw.adjoint()).scale(0.5),
        SymmetryClass::AntiHermitian => raw.sub(&raw.adjoint()).scale(0.5),
        SymmetryClass::JStar => unreachable!("no ball has the J-star class"),
    };
    let norm = z.operator_norm();
    z.scale(radius / norm.max(1e-12))
}

fn lie_projection(family: SpaceFamily, x: &MatK) -> MatK {
    // alternate the involution averagings for the two preserved forms
    let m = indefinite_form(family);
    let sigma_m = |x: &MatK| m.matmul(&x.adjoint()).matmul(&m).scale(-1.0);
    let (p, q) = family.ball_shape();
    let f = family.ball_field();
    let lambda: Option<(MatK, bool)> = match family.series {
        // Λ antisymmetric bilinear for the symmetric balls
        Series::GlR | Series::Sp2nR => {
            let mut l = MatK::zeros(f, p + q, p + q);
            for i in 0..p {
                l.set(i, p + i, Quat::ONE);
                l.set(p + i, i, Quat::real(-1.0));
            }
            Some((l, true))
        }
        // Λ symmetric bilinear for the antisymmetric balls
        Series::OnC | Series::SoStar => {
            let mut l = MatK::zeros(f, p + q, p + q);
            for i in 0..p {
                l.set(i, p + i, Quat::ONE);
                l.set(p + i, i, Quat::ONE);
            }
            Some((l, true))
        }
        // Λ anti-hermitian sesquilinear for the hermitian balls
        Series::GlC | Series::GlH => {
            let mut l = MatK::zeros(f, p + q, p + q);
            for i in 0..p {
                l.set(i, p + i, Quat::ONE);
                l.set(p + i, i, Quat::real(-1.0));
            }
            Some((l, false))
        }
        // Λ hermitian sesquilinear for the anti-hermitian ball
        Series::Sp2nC => {
            let mut l = MatK::zeros(f, p + q, p + q);
            for i in 0..p {
                l.set(i, p + i, Quat::ONE);
                l.set(p + i, i, Quat::ONE);
            }
            Some((l, false))
        }
        Series::UpqR | Series::UpqC | Series::UpqH => None,
    };
    // GL_R ball is symmetric *and* hermitian over R: both conditions apply.
    let mut y = x.clone();
    for _ in 0..64 {
        y = y.add(&sigma_m(&y)).scale(0.5);
        if let Some((l, bilinear)) = &lambda {
            let linv = l.inverse().unwrap();
            let s = if *bilinear {
                linv.matmul(&y.transpose()).matmul(l).scale(-1.0)
            } else {
                l.matmul(&y.adjoint()).matmul(&linv).scale(-1.0)
            };
            y = y.add(&s).scale(0.5);
        }
    }
    y
}

fn expm(x: &MatK) -> MatK {
    let norm = x.max_abs() * x.rows as f64;
    let k = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let xs = x.scale(0.5f64.powi(k as i32));
    let mut term = MatK::identity(x.field, x.rows);
    let mut sum = term.clone();
    for m in 1..=14 {
        term = term.matmul(&xs).scale(1.0 / m as f64);
        sum = sum.add(&term);
    }
    let mut r = sum;
    for _ in 0..k {
        r = r.matmul(&r);
    }
    r
}

/// Random element of the family's transformation group: a random Lie
/// algebra element projected onto the preserved-form constraints, then
/// exponentiated. `spread` controls how far from the identity it lands.
pub fn random_group_element<R: Rng>(
    family: SpaceFamily,
    spread: f64,
    rng: &mut R,
) -> GroupElement {
    let f = family.ball_field();
    let (p, q) = family.ball_shape();
    let raw = crate::test_support::rand_matrix(rng, f, p + q, p + q, 1.0);
    let x = lie_projection(family, &raw);
    let scale = spread / x.max_abs().max(1e-12);
    let g = expm(&x.scale(scale));
    GroupElement {
        alpha: g.block(0, 0, p, p),
        beta: g.block(0, p, p, q),
        gamma: g.block(p, 0, q, p),
        delta: g.block(p, p, q, q),
        family,
    }
}

/// Random element of the stabilizer of 0 (block-diagonal, compact).
pub fn random_compact_element<R: Rng>(family: SpaceFamily, rng: &mut R) -> GroupElement {
    let f = family.ball_field();
    let (p, q) = family.ball_shape();
    let alpha = crate::sampling::haar_unitary(p, f, rng);
    let delta = match family.series {
        Series::UpqR | Series::UpqC | Series::UpqH => crate::sampling::haar_unitary(q, f, rng),
        // bilinear Λ forces δ = α^{-t}, sesquilinear forces δ = α^{*-1}
        Series::GlR | Series::Sp2nR | Series::OnC | Series::SoStar => {
            alpha.transpose().inverse().unwrap()
        }
        Series::GlC | Series::GlH | Series::Sp2nC => alpha.adjoint().inverse().unwrap(),
    };
    GroupElement {
        alpha,
        beta: MatK::zeros(f, p, q),
        gamma: MatK::zeros(f, q, p),
        delta,
        family,
    }
}

// ---------------------------------------------------------------------------
// flattening of symmetry-class coordinates (finite-difference Jacobians)
// ---------------------------------------------------------------------------

/// Free real coordinates of a ball matrix in the family's symmetry class,
/// in the Lebesgue normalization order.
pub fn flatten_ball(family: SpaceFamily, z: &MatK) -> Vec<f64> {
    let d = family.ball_field().dim();
    let (p, q) = family.ball_shape();
    let mut out = Vec::new();
    let push = |out: &mut Vec<f64>, v: Quat, k: usize| {
        let comps = [v.re, v.i, v.j, v.k];
        out.extend_from_slice(&comps[..k]);
    };
    match family.ball_symmetry() {
        SymmetryClass::None => {
            for i in 0..p {
                for j in 0..q {
                    push(&mut out, z.get(i, j), d);
                }
            }
        }
        SymmetryClass::Symmetric => {
            for i in 0..p {
                for j in i..q {
                    push(&mut out, z.get(i, j), d);
                }
            }
        }
        SymmetryClass::Antisymmetric => {
            for i in 0..p {
                for j in i + 1..q {
                    push(&mut out, z.get(i, j), d);
                }
            }
        }
        SymmetryClass::Hermitian => {
            for i in 0..p {
                out.push(z.get(i, i).re);
                for j in i + 1..q {
                    push(&mut out, z.get(i, j), d);
                }
            }
        }
        SymmetryClass::AntiHermitian => {
            for i in 0..p {
                let v = z.get(i, i);
                let comps = [v.i, v.j, v.k];
                out.extend_from_slice(&comps[..d - 1]);
                for j in i + 1..q {
                    push(&mut out, z.get(i, j), d);
                }
            }
        }
        SymmetryClass::JStar => unreachable!(),
    }
    out
}

/// Inverse of [`flatten_ball`].
pub fn unflatten_ball(family: SpaceFamily, coords: &[f64]) -> MatK {
    let f = family.ball_field();
    let d = f.dim();
    let (p, q) = family.ball_shape();
    let mut z = MatK::zeros(f, p, q);
    let mut it = coords.iter().copied();
    fn take(it: &mut impl Iterator<Item = f64>, k: usize) -> Quat {
        let mut c = [0.0; 4];
        for slot in c.iter_mut().take(k) {
            *slot = it.next().unwrap();
        }
        Quat::new(c[0], c[1], c[2], c[3])
    }
    match family.ball_symmetry() {
        SymmetryClass::None => {
            for i in 0..p {
                for j in 0..q {
                    let v = take(&mut it, d);
                    z.set(i, j, v);
                }
            }
        }
        SymmetryClass::Symmetric => {
            for i in 0..p {
                for j in i..q {
                    let v = take(&mut it, d);
                    z.set(i, j, v);
                    z.set(j, i, v);
                }
            }
        }
        SymmetryClass::Antisymmetric => {
            for i in 0..p {
                for j in i + 1..q {
                    let v = take(&mut it, d);
                    z.set(i, j, v);
                    z.set(j, i, v.neg());
                }
            }
        }
        SymmetryClass::Hermitian => {
            for i in 0..p {
                z.set(i, i, Quat::real(it.next().unwrap()));
                for j in i + 1..q {
                    let v = take(&mut it, d);
                    z.set(i, j, v);
                    z.set(j, i, v.conj());
                }
            }
        }
        SymmetryClass::AntiHermitian => {
            for i in 0..p {
                let mut c = [0.0; 4];
                for slot in c.iter_mut().take(d).skip(1) {
                    *slot = it.next().unwrap();
                }
                z.set(i, i, Quat::new(0.0, c[1], c[2], c[3]));
                for j in i + 1..q {
                    let v = take(&mut it, d);
                    z.set(i, j, v);
                    z.set(j, i, v.conj().neg());
                }
            }
        }
        SymmetryClass::JStar => unreachable!(),
    }
    debug_assert!(it.next().is_none());
    z
}

/// |det| of the finite-difference Jacobian of z ↦ z^{[g]} in the flattened
/// real coordinates. Test oracle for [`mobius_jacobian`].
pub fn mobius_jacobian_fd(g: &GroupElement, z: &MatK, step: f64) -> Result<f64, ModelError> {
    let family = g.family;
    let x0 = flatten_ball(family, z);
    let dim = x0.len();
    let mut jac = vec![Complex64::new(0.0, 0.0); dim * dim];
    for c in 0..dim {
        let mut xp = x0.clone();
        xp[c] += step;
        let mut xm = x0.clone();
        xm[c] -= step;
        let fp = flatten_ball(family, &mobius(g, &unflatten_ball(family, &xp))?);
        let fm = flatten_ball(family, &mobius(g, &unflatten_ball(family, &xm))?);
        for r in 0..dim {
            jac[r * dim + c] = Complex64::new((fp[r] - fm[r]) / (2.0 * step), 0.0);
        }
    }
    Ok(crate::matk::det_complex_in_place(dim, &mut jac).norm())
}

/// Structure residual of (2.4)/(2.6)-type conditions, re-exported for tests.
pub fn so_structure_residual(r: &MatK) -> f64 {
    j_structure_residual(r)
}
