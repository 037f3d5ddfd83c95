//! Dense matrix algebra over ℝ, ℂ and ℍ.
//!
//! Everything here is desk scale (n ≲ 16): pivoted Gauss elimination,
//! Cholesky over the ground field, the 2n/4n real embeddings, and the
//! branch-consistent complex powers of determinants of dissipative
//! matrices. Quaternionic determinants are never computed through
//! quaternionic eigenvalues; they always route through the real embedding
//! `det_H(g) = (det g_R)^{1/4}`.

use crate::ground_fields::{GroundField, Quat};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MatError {
    #[error("index {0} out of range for block size {1}")]
    IndexError(usize, usize),
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("matrix is not hermitian within tolerance")]
    NotHermitian,
    #[error("matrix is not dissipative: R + R* has a non-positive pivot")]
    NotDissipative,
    #[error("eigenvalue with non-positive real part in branch-sensitive power")]
    BranchError,
    #[error("singular block in determinant reduction")]
    SingularBlock,
    #[error("J-structure condition violated (residual {0:.3e})")]
    StructureError(f64),
    #[error("entry outside the matrix field")]
    FieldMismatch,
}

/// Symmetry classes of the matrix ball realizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryClass {
    None,
    Symmetric,
    Antisymmetric,
    Hermitian,
    AntiHermitian,
    JStar,
}

/// Dense matrix over a ground field, row major.
#[derive(Clone, Debug, PartialEq)]
pub struct MatK {
    pub field: GroundField,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Quat>,
}

impl MatK {
    pub fn zeros(field: GroundField, rows: usize, cols: usize) -> Self {
        MatK { field, rows, cols, data: vec![Quat::ZERO; rows * cols] }
    }

    pub fn identity(field: GroundField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, Quat::ONE);
        }
        m
    }

    pub fn from_fn(
        field: GroundField,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Quat,
    ) -> Self {
        let mut m = Self::zeros(field, rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn real_from(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols);
        MatK {
            field: GroundField::Real,
            rows,
            cols,
            data: entries.iter().map(|&x| Quat::real(x)).collect(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Quat {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Quat) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries_fit_field(&self) -> bool {
        self.data.iter().all(|q| q.belongs_to(self.field))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|q| q.norm()).fold(0.0, f64::max)
    }

    /// p×p upper-left block `[g]_p`.
    pub fn leading_block(&self, p: usize) -> Result<MatK, MatError> {
        if p == 0 || p > self.rows.min(self.cols) {
            return Err(MatError::IndexError(p, self.rows.min(self.cols)));
        }
        Ok(MatK::from_fn(self.field, p, p, |i, j| self.get(i, j)))
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatK {
        MatK::from_fn(self.field, rows, cols, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn transpose(&self) -> MatK {
        MatK::from_fn(self.field, self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Conjugate transpose. For real matrices this is the transpose.
    pub fn adjoint(&self) -> MatK {
        MatK::from_fn(self.field, self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn conj_entries(&self) -> MatK {
        MatK::from_fn(self.field, self.rows, self.cols, |i, j| self.get(i, j).conj())
    }

    pub fn add(&self, rhs: &MatK) -> MatK {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        MatK::from_fn(self.field, self.rows, self.cols, |i, j| self.get(i, j).add(rhs.get(i, j)))
    }

    pub fn sub(&self, rhs: &MatK) -> MatK {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        MatK::from_fn(self.field, self.rows, self.cols, |i, j| self.get(i, j).sub(rhs.get(i, j)))
    }

    pub fn scale(&self, s: f64) -> MatK {
        MatK::from_fn(self.field, self.rows, self.cols, |i, j| self.get(i, j).scale(s))
    }

    /// Left scalar multiple `q·M` (order matters over ℍ).
    pub fn scalar_mul_left(&self, q: Quat) -> MatK {
        MatK::from_fn(self.field, self.rows, self.cols, |i, j| q.mul(self.get(i, j)))
    }

    pub fn matmul(&self, rhs: &MatK) -> MatK {
        assert_eq!(self.cols, rhs.rows, "matmul shape");
        let mut out = MatK::zeros(self.field, self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Quat::ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    let cur = out.get(i, j);
                    out.set(i, j, cur.add(a.mul(rhs.get(k, j))));
                }
            }
        }
        out
    }

    pub fn add_identity(&self) -> MatK {
        assert!(self.is_square());
        let mut m = self.clone();
        for i in 0..self.rows {
            let v = m.get(i, i).add(Quat::ONE);
            m.set(i, i, v);
        }
        m
    }

    /// `R + R*`, twice the hermitian part.
    pub fn plus_adjoint(&self) -> MatK {
        self.add(&self.adjoint())
    }

    /// Gauss-Jordan inverse with partial pivoting by quaternion norm.
    pub fn inverse(&self) -> Result<MatK, MatError> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = MatK::identity(self.field, n);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| {
                    a.get(i, col).norm().partial_cmp(&a.get(j, col).norm()).unwrap()
                })
                .unwrap();
            if a.get(piv, col).norm() < 1e-300 {
                return Err(MatError::SingularBlock);
            }
            if piv != col {
                for j in 0..n {
                    let t = a.get(col, j);
                    a.set(col, j, a.get(piv, j));
                    a.set(piv, j, t);
                    let t = inv.get(col, j);
                    inv.set(col, j, inv.get(piv, j));
                    inv.set(piv, j, t);
                }
            }
            let pinv = a.get(col, col).inv();
            for j in 0..n {
                a.set(col, j, pinv.mul(a.get(col, j)));
                inv.set(col, j, pinv.mul(inv.get(col, j)));
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a.get(i, col);
                if f == Quat::ZERO {
                    continue;
                }
                for j in 0..n {
                    let v = a.get(i, j).sub(f.mul(a.get(col, j)));
                    a.set(i, j, v);
                    let v = inv.get(i, j).sub(f.mul(inv.get(col, j)));
                    inv.set(i, j, v);
                }
            }
        }
        Ok(inv)
    }

    /// Flatten into a complex buffer; only valid for ℝ/ℂ-tagged matrices.
    pub fn to_complex(&self) -> Vec<Complex64> {
        debug_assert!(self.field != GroundField::Quaternion);
        self.data.iter().map(|q| q.as_complex()).collect()
    }

    pub fn from_complex(field: GroundField, rows: usize, cols: usize, v: &[Complex64]) -> Self {
        MatK { field, rows, cols, data: v.iter().map(|&z| Quat::complex(z)).collect() }
    }

    /// Real embedding: n → dn square real matrix acting on the field's real
    /// coordinates (column vector convention, coordinates grouped per
    /// field entry).
    pub fn embed_real(&self) -> MatK {
        let d = self.field.dim();
        let mut out = MatK::zeros(GroundField::Real, self.rows * d, self.cols * d);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let q = self.get(i, j);
                let block: Vec<f64> = match self.field {
                    GroundField::Real => vec![q.re],
                    // z = a+bi acting on (x, y): [[a, -b], [b, a]]
                    GroundField::Complex => vec![q.re, -q.i, q.i, q.re],
                    // left multiplication by a+bi+cj+dk on (1, i, j, k) coords
                    GroundField::Quaternion => vec![
                        q.re, -q.i, -q.j, -q.k,
                        q.i, q.re, -q.k, q.j,
                        q.j, q.k, q.re, -q.i,
                        q.k, -q.j, q.i, q.re,
                    ],
                };
                for bi in 0..d {
                    for bj in 0..d {
                        out.set(i * d + bi, j * d + bj, Quat::real(block[bi * d + bj]));
                    }
                }
            }
        }
        out
    }

    /// ℍ → 2n×2n complex embedding `a+bi+cj+dk ↦ [[a+bi, c+di], [−c+di, a−bi]]`.
    pub fn embed_quaternion_complex(&self) -> MatK {
        debug_assert_eq!(self.field, GroundField::Quaternion);
        let mut out = MatK::zeros(GroundField::Complex, self.rows * 2, self.cols * 2);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let q = self.get(i, j);
                out.set(2 * i, 2 * j, Quat::new(q.re, q.i, 0.0, 0.0));
                out.set(2 * i, 2 * j + 1, Quat::new(q.j, q.k, 0.0, 0.0));
                out.set(2 * i + 1, 2 * j, Quat::new(-q.j, q.k, 0.0, 0.0));
                out.set(2 * i + 1, 2 * j + 1, Quat::new(q.re, -q.i, 0.0, 0.0));
            }
        }
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1.0);
        for i in 0..self.rows {
            for j in 0..self.rows {
                if self.get(i, j).sub(self.get(j, i).conj()).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_antihermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1.0);
        for i in 0..self.rows {
            for j in 0..self.rows {
                if self.get(i, j).add(self.get(j, i).conj()).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn symmetry_class_matches(&self, class: SymmetryClass, tol: f64) -> bool {
        match class {
            SymmetryClass::None => true,
            SymmetryClass::Symmetric => {
                self.is_square() && self.sub(&self.transpose()).max_abs() <= tol * self.max_abs().max(1.0)
            }
            SymmetryClass::Antisymmetric => {
                self.is_square() && self.add(&self.transpose()).max_abs() <= tol * self.max_abs().max(1.0)
            }
            SymmetryClass::Hermitian => self.is_hermitian(tol),
            SymmetryClass::AntiHermitian => self.is_antihermitian(tol),
            SymmetryClass::JStar => self.is_square() && j_structure_residual(self) <= tol,
        }
    }

    /// Cholesky factor G (lower triangular, positive real diagonal) of a
    /// hermitian positive definite matrix, over the matrix's own field.
    pub fn cholesky(&self, pivot_floor: f64) -> Result<MatK, MatError> {
        if !self.is_hermitian(1e-10) {
            return Err(MatError::NotHermitian);
        }
        let n = self.rows;
        let mut g = MatK::zeros(self.field, n, n);
        for i in 0..n {
            for j in 0..=i {
                // sum_{k<j} g_ik g_jk^*
                let mut s = Quat::ZERO;
                for k in 0..j {
                    s = s.add(g.get(i, k).mul(g.get(j, k).conj()));
                }
                if i == j {
                    let d = self.get(i, i).re - s.re;
                    if d <= pivot_floor {
                        return Err(MatError::NotDissipative);
                    }
                    g.set(i, i, Quat::real(d.sqrt()));
                } else {
                    let v = self.get(i, j).sub(s);
                    let inv = g.get(j, j).inv();
                    // lower-triangular system: g_ij = (a_ij − s) g_jj^{-1}
                    g.set(i, j, v.mul(inv));
                }
            }
        }
        Ok(g)
    }

    /// True iff hermitian (to 1e-10) and the field-level Cholesky succeeds
    /// with pivots above 1e-12 (scaled).
    pub fn is_positive_definite(&self) -> Result<bool, MatError> {
        if !self.is_hermitian(1e-10) {
            return Err(MatError::NotHermitian);
        }
        let floor = 1e-12 * self.max_abs().max(1.0);
        Ok(self.cholesky(floor).is_ok())
    }

    /// `det` over the ground field. ℝ/ℂ: pivoted LU. ℍ: positive fourth
    /// root of the real-embedding determinant.
    pub fn det_k(&self) -> Complex64 {
        assert!(self.is_square());
        match self.field {
            GroundField::Real | GroundField::Complex => {
                let mut buf = self.to_complex();
                det_complex_in_place(self.rows, &mut buf)
            }
            GroundField::Quaternion => {
                let emb = self.embed_real();
                let mut buf = emb.to_complex();
                let d = det_complex_in_place(emb.rows, &mut buf);
                // non-negative for every call site in scope
                Complex64::new(d.re.abs().powf(0.25), 0.0)
            }
        }
    }

    /// Σ_j Log λ_j over the eigenvalues of a dissipative matrix, with the
    /// principal branch of each term. Computed by analytic continuation of
    /// log det along the segment I → R: the segment preserves eigenvectors,
    /// each eigenvalue path tμ_j + (1−t) stays in the right half-plane, so
    /// the accumulated argument equals Σ Arg λ_j exactly.
    pub fn log_det_dissipative(&self) -> Result<Complex64, MatError> {
        assert!(self.is_square());
        let herm = self.plus_adjoint();
        let floor = 1e-10 * herm.max_abs().max(1e-30);
        if herm.cholesky(floor).is_err() {
            return Err(MatError::NotDissipative);
        }
        match self.field {
            GroundField::Quaternion => {
                // paper convention: det R^τ = det R_R^{τ/4}; the embedding of a
                // dissipative matrix is dissipative, with positive determinant
                let emb = self.embed_real();
                let mut buf = emb.to_complex();
                let d = det_complex_in_place(emb.rows, &mut buf).re;
                if d <= 0.0 {
                    return Err(MatError::BranchError);
                }
                Ok(Complex64::new(d.ln() / 4.0, 0.0))
            }
            _ => {
                let n = self.rows;
                if n == 1 {
                    return log_of(self.get(0, 0).as_complex());
                }
                if n == 2 {
                    // eigenvalues from the characteristic polynomial
                    let a = self.get(0, 0).as_complex();
                    let b = self.get(0, 1).as_complex();
                    let c = self.get(1, 0).as_complex();
                    let d = self.get(1, 1).as_complex();
                    let tr = a + d;
                    let det = a * d - b * c;
                    let disc = (tr * tr - 4.0 * det).sqrt();
                    let l1 = (tr + disc) / 2.0;
                    let l2 = (tr - disc) / 2.0;
                    return Ok(log_of(l1)? + log_of(l2)?);
                }
                self.log_det_by_continuation()
            }
        }
    }

    fn log_det_by_continuation(&self) -> Result<Complex64, MatError> {
        let n = self.rows;
        let base = self.to_complex();
        let det_at = |t: f64| -> Complex64 {
            let mut buf: Vec<Complex64> = base.iter().map(|&z| z * t).collect();
            for i in 0..n {
                buf[i * n + i] += 1.0 - t;
            }
            det_complex_in_place(n, &mut buf)
        };
        let mut steps = 4 * n.max(2);
        let mut prev_total = Complex64::new(f64::NAN, f64::NAN);
        loop {
            let mut total = Complex64::new(0.0, 0.0);
            let mut ok = true;
            let mut last = Complex64::new(1.0, 0.0);
            for s in 1..=steps {
                let t = s as f64 / steps as f64;
                let d = det_at(t);
                if d == Complex64::new(0.0, 0.0) || !d.is_finite() {
                    return Err(MatError::BranchError);
                }
                let ratio = d / last;
                if ratio.arg().abs() > 1.5 {
                    ok = false;
                    break;
                }
                total += ratio.ln();
                last = d;
            }
            if ok {
                if (total - prev_total).norm() <= 1e-12 * (1.0 + total.norm()) {
                    return Ok(total);
                }
                prev_total = total;
            }
            steps *= 2;
            if steps > 1 << 16 {
                return Err(MatError::BranchError);
            }
        }
    }

    /// Branch-consistent split power `det R^{σ‖τ}` of a dissipative matrix.
    pub fn det_power_split(&self, sigma: Complex64, tau: Complex64) -> Result<Complex64, MatError> {
        let l = self.log_det_dissipative()?;
        Ok((sigma * l + tau * l.conj()).exp())
    }

    /// Largest singular value, computed by power iteration on `A*A` of the
    /// real embedding.
    pub fn operator_norm(&self) -> f64 {
        let a = self.embed_real();
        let ata = a.adjoint().matmul(&a);
        let n = ata.rows;
        let mut v = vec![1.0; n];
        let mut lam = 0.0;
        for it in 0..500 {
            let mut w = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    w[i] += ata.get(i, j).re * v[j];
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for x in w.iter_mut() {
                *x /= norm;
            }
            if it > 10 && (norm - lam).abs() <= 1e-14 * norm {
                lam = norm;
                break;
            }
            lam = norm;
            v = w;
        }
        lam.sqrt()
    }

    /// Dissipativity test `R + R* ≫ 0`.
    pub fn is_dissipative(&self) -> bool {
        let h = self.plus_adjoint();
        let floor = 1e-12 * h.max_abs().max(1.0);
        h.cholesky(floor).is_ok()
    }
}

fn log_of(z: Complex64) -> Result<Complex64, MatError> {
    if z.norm_sqr() == 0.0 || (z.re <= 0.0 && z.im.abs() < 1e-14 * z.re.abs()) {
        return Err(MatError::BranchError);
    }
    Ok(z.ln())
}

/// Determinant of an n×n complex matrix stored row-major in `buf`,
/// destroying the buffer. Partial pivoting; returns 0 on singularity.
pub fn det_complex_in_place(n: usize, buf: &mut [Complex64]) -> Complex64 {
    debug_assert_eq!(buf.len(), n * n);
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let mut piv = col;
        let mut best = buf[col * n + col].norm_sqr();
        for r in col + 1..n {
            let v = buf[r * n + col].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            for j in col..n {
                buf.swap(col * n + j, piv * n + j);
            }
            det = -det;
        }
        let p = buf[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = buf[r * n + col] / p;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in col + 1..n {
                let v = buf[col * n + j];
                buf[r * n + j] -= f * v;
            }
            buf[r * n + col] = Complex64::new(0.0, 0.0);
        }
    }
    det
}

/// Block determinant `det(A B; C D) = det A · det(D − C A⁻¹ B)`.
pub fn block_det_reduce(a: &MatK, b: &MatK, c: &MatK, d: &MatK) -> Result<Complex64, MatError> {
    if !a.is_square() || !d.is_square() || b.rows != a.rows || c.cols != a.cols
        || b.cols != d.cols || c.rows != d.rows
    {
        return Err(MatError::Shape("non-conformable blocks".into()));
    }
    let ainv = a.inverse().map_err(|_| MatError::SingularBlock)?;
    let schur = d.sub(&c.matmul(&ainv).matmul(b));
    Ok(a.det_k() * schur.det_k())
}

/// Assemble `(A B; C D)` into one matrix (test oracle for the reduction).
pub fn assemble_blocks(a: &MatK, b: &MatK, c: &MatK, d: &MatK) -> MatK {
    let n = a.rows + c.rows;
    let m = a.cols + b.cols;
    MatK::from_fn(a.field, n, m, |i, j| {
        if i < a.rows && j < a.cols {
            a.get(i, j)
        } else if i < a.rows {
            b.get(i, j - a.cols)
        } else if j < a.cols {
            c.get(i - a.rows, j)
        } else {
            d.get(i - a.rows, j - a.cols)
        }
    })
}

/// The block-diagonal 2×2 rotation J of size 2n (the (0.12) matrix).
pub fn j_matrix(field: GroundField, two_n: usize) -> MatK {
    assert!(two_n % 2 == 0);
    let mut m = MatK::zeros(field, two_n, two_n);
    for b in 0..two_n / 2 {
        m.set(2 * b, 2 * b + 1, Quat::real(-1.0));
        m.set(2 * b + 1, 2 * b, Quat::real(1.0));
    }
    m
}

/// Residual of the structure condition `J⁻¹ Rᵗ J = R`, relative scale.
pub fn j_structure_residual(r: &MatK) -> f64 {
    let j = j_matrix(r.field, r.rows);
    let jinv = j.scale(-1.0); // J² = −1
    let lhs = jinv.matmul(&r.transpose()).matmul(&j);
    lhs.sub(r).max_abs() / r.max_abs().max(1.0)
}

/// Matrix over ℝ or ℂ of even size carrying the `J⁻¹RᵗJ = R` structure.
#[derive(Clone, Debug)]
pub struct JStructuredMat {
    pub base: MatK,
}

impl JStructuredMat {
    pub fn new(base: MatK, tol: f64) -> Result<Self, MatError> {
        if base.rows % 2 != 0 || !base.is_square() {
            return Err(MatError::Shape("J-structured matrices have even size".into()));
        }
        let res = j_structure_residual(&base);
        if res > tol {
            return Err(MatError::StructureError(res));
        }
        Ok(JStructuredMat { base })
    }

    /// `DET(A) = sqrt(|det A_R|)`; for dissipative input the absolute value
    /// is redundant.
    pub fn det_op(&self) -> f64 {
        let emb = self.base.embed_real();
        let mut buf = emb.to_complex();
        det_complex_in_place(emb.rows, &mut buf).re.abs().sqrt()
    }
}

/// The star involution `Ψ* = J Ψᵗ J⁻¹` on 2×2 real blocks.
pub fn star_involution(psi: &MatK) -> MatK {
    debug_assert_eq!((psi.rows, psi.cols), (2, 2));
    let j = j_matrix(psi.field, 2);
    let jinv = j.scale(-1.0);
    j.matmul(&psi.transpose()).matmul(&jinv)
}

/// Embed a complex scalar as the 2×2 block z° = α + βJ of (8.2).
pub fn embed_complex_scalar(z: Complex64) -> MatK {
    let mut m = MatK::zeros(GroundField::Real, 2, 2);
    m.set(0, 0, Quat::real(z.re));
    m.set(0, 1, Quat::real(-z.im));
    m.set(1, 0, Quat::real(z.im));
    m.set(1, 1, Quat::real(z.re));
    m
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
/// Used as a test oracle and for definiteness diagnostics.
pub fn symmetric_eigenvalues(m: &MatK) -> Vec<f64> {
    assert!(m.is_square());
    let n = m.rows;
    let mut a: Vec<f64> = m.data.iter().map(|q| q.re).collect();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + a.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{rand_antihermitian, rand_matrix, rand_pd_hermitian};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn leading_block_is_a_plain_slice() {
        let id = MatK::identity(GroundField::Real, 3);
        assert_eq!(id.leading_block(2).unwrap(), MatK::identity(GroundField::Real, 2));
        assert_eq!(id.leading_block(3).unwrap(), id);
        assert!(id.leading_block(4).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = rand_matrix(&mut rng, GroundField::Complex, 3, 3, 1.0);
        let b = m.leading_block(2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(b.get(i, j), m.get(i, j));
            }
        }
    }

    #[test]
    fn det_of_identity_and_scaling() {
        for field in [GroundField::Real, GroundField::Complex, GroundField::Quaternion] {
            let id = MatK::identity(field, 2);
            assert!((id.det_k() - Complex64::new(1.0, 0.0)).norm() < 1e-13);
            let c = id.scale(3.0);
            assert!((c.det_k() - Complex64::new(9.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn quaternionic_det_matches_real_embedding_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t = rand_pd_hermitian(&mut rng, GroundField::Quaternion, 2);
            let emb = t.embed_real();
            let ev = symmetric_eigenvalues(&emb);
            let prod: f64 = ev.iter().product();
            let want = prod.powf(0.25);
            let got = t.det_k().re;
            assert!((got - want).abs() <= 1e-9 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn block_det_reduce_matches_direct_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for field in [GroundField::Real, GroundField::Complex] {
            for _ in 0..250 {
                let p = rng.gen_range(1..3usize);
                let q = rng.gen_range(1..3usize);
                let a = {
                    // keep A comfortably invertible
                    let m = rand_matrix(&mut rng, field, p, p, 0.6);
                    m.add(&MatK::identity(field, p).scale(1.5))
                };
                let b = rand_matrix(&mut rng, field, p, q, 1.0);
                let c = rand_matrix(&mut rng, field, q, p, 1.0);
                let d = rand_matrix(&mut rng, field, q, q, 1.0);
                let red = block_det_reduce(&a, &b, &c, &d).unwrap();
                let full = assemble_blocks(&a, &b, &c, &d).det_k();
                assert!(
                    (red - full).norm() <= 1e-9 * (1.0 + full.norm()),
                    "{red} vs {full}"
                );
            }
        }
    }

    #[test]
    fn block_det_trivial_cases() {
        let i2 = MatK::identity(GroundField::Real, 2);
        let z = MatK::zeros(GroundField::Real, 2, 2);
        let v = block_det_reduce(&i2, &z, &z, &i2).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn schur_identity_on_bordered_blocks() {
        // det [[1, L*], [L, M]]_{(q-p)+j} = det [M − LL*]_j  (3.5)
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for field in [GroundField::Real, GroundField::Complex] {
            for _ in 0..100 {
                let p = 2usize;
                let qp = rng.gen_range(1..3usize); // q − p
                let l = rand_matrix(&mut rng, field, p, qp, 0.5);
                let c = rand_pd_hermitian(&mut rng, field, p);
                let m = c.add(&l.matmul(&l.adjoint()));
                let top = assemble_blocks(
                    &MatK::identity(field, qp),
                    &l.adjoint(),
                    &l,
                    &m,
                );
                for j in 1..=p {
                    let lhs = top.leading_block(qp + j).unwrap().det_k();
                    let rhs = m.sub(&l.matmul(&l.adjoint())).leading_block(j).unwrap().det_k();
                    assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
                }
            }
        }
    }

    #[test]
    fn positive_definite_detection() {
        let id = MatK::identity(GroundField::Complex, 3);
        assert!(id.is_positive_definite().unwrap());
        let mut neg = MatK::identity(GroundField::Real, 2);
        neg.set(1, 1, Quat::real(-1.0));
        assert!(!neg.is_positive_definite().unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for field in [GroundField::Real, GroundField::Complex, GroundField::Quaternion] {
            for _ in 0..30 {
                let t = rand_pd_hermitian(&mut rng, field, 3);
                assert!(t.is_positive_definite().unwrap());
            }
        }
        let skew = rand_antihermitian(&mut rng, GroundField::Complex, 2, 1.0);
        assert_eq!(skew.is_positive_definite(), Err(MatError::NotHermitian));
    }

    #[test]
    fn det_power_split_basics() {
        let id = MatK::identity(GroundField::Complex, 3);
        let one = id
            .det_power_split(Complex64::new(1.3, 0.4), Complex64::new(-0.2, 0.9))
            .unwrap();
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-13);

        // diag(1+i, 1−i): det = 2
        let mut d = MatK::zeros(GroundField::Complex, 2, 2);
        d.set(0, 0, Quat::new(1.0, 1.0, 0.0, 0.0));
        d.set(1, 1, Quat::new(1.0, -1.0, 0.0, 0.0));
        let v = d.det_power_split(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        assert!((v - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn det_power_split_squares_the_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let r = {
                let t = rand_pd_hermitian(&mut rng, GroundField::Complex, 3);
                let s = rand_antihermitian(&mut rng, GroundField::Complex, 3, 1.0);
                t.add(&s)
            };
            let sq = r.det_power_split(Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
            let d = r.det_k();
            assert!((sq - d * d).norm() <= 1e-10 * (1.0 + (d * d).norm()));
        }
    }

    #[test]
    fn det_power_split_is_additive_in_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let r = {
                let t = rand_pd_hermitian(&mut rng, GroundField::Complex, 4);
                let s = rand_antihermitian(&mut rng, GroundField::Complex, 4, 0.8);
                t.add(&s)
            };
            let s1 = Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0));
            let s2 = Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0));
            let zero = Complex64::new(0.0, 0.0);
            let joint = r.det_power_split(s1 + s2, zero).unwrap();
            let split = r.det_power_split(s1, zero).unwrap() * r.det_power_split(s2, zero).unwrap();
            assert!((joint - split).norm() <= 1e-10 * (1.0 + joint.norm()));
        }
    }

    #[test]
    fn dissipative_rejects_and_accepts() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let t = rand_pd_hermitian(&mut rng, GroundField::Complex, 3);
            let s = rand_antihermitian(&mut rng, GroundField::Complex, 3, 2.0);
            let r = t.add(&s);
            assert!(r.is_dissipative());
            assert!(r.plus_adjoint().is_positive_definite().unwrap());
        }
        let mut bad = MatK::identity(GroundField::Real, 2);
        bad.set(0, 0, Quat::real(-0.5));
        assert!(!bad.is_dissipative());
        assert!(bad.det_power_split(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn pd_det_positive_and_matches_embedding_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for field in [GroundField::Real, GroundField::Complex, GroundField::Quaternion] {
            for _ in 0..20 {
                let t = rand_pd_hermitian(&mut rng, field, 3);
                let d = t.det_k().re;
                assert!(d > 0.0);
                let ev = symmetric_eigenvalues(&t.embed_real());
                let prod: f64 = ev.iter().product();
                let want = prod.powf(1.0 / field.dim() as f64);
                assert!((d - want).abs() <= 1e-8 * want, "{d} vs {want}");
            }
        }
    }

    #[test]
    fn continuation_logdet_agrees_with_two_by_two_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..40 {
            let t = rand_pd_hermitian(&mut rng, GroundField::Complex, 2);
            let s = rand_antihermitian(&mut rng, GroundField::Complex, 2, 3.0);
            let r = t.add(&s);
            let fast = r.log_det_dissipative().unwrap();
            let slow = r.log_det_by_continuation().unwrap();
            assert!((fast - slow).norm() <= 1e-10 * (1.0 + fast.norm()));
        }
    }

    #[test]
    fn star_involution_embeds_conjugation() {
        let z = Complex64::new(0.7, -1.3);
        let star = star_involution(&embed_complex_scalar(z));
        assert!(star.sub(&embed_complex_scalar(z.conj())).max_abs() < 1e-14);
        // anti-automorphism on random blocks
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let p = rand_matrix(&mut rng, GroundField::Real, 2, 2, 1.0);
            let q = rand_matrix(&mut rng, GroundField::Real, 2, 2, 1.0);
            let lhs = star_involution(&p.matmul(&q));
            let rhs = star_involution(&q).matmul(&star_involution(&p));
            assert!(lhs.sub(&rhs).max_abs() < 1e-12);
        }
    }

    #[test]
    fn det_op_matches_complex_determinant_modulus() {
        let id = JStructuredMat::new(MatK::identity(GroundField::Real, 4), 1e-12).unwrap();
        assert!((id.det_op() - 1.0).abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..30 {
            // embedded hermitian complex 2×2 matrix (the J-star condition on
            // an embedded A° is exactly hermiticity of A)
            let offdiag = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let z: Vec<Complex64> = vec![
                Complex64::new(rng.gen_range(-1.0..1.0), 0.0),
                offdiag,
                offdiag.conj(),
                Complex64::new(rng.gen_range(-1.0..1.0), 0.0),
            ];
            let mut base = MatK::zeros(GroundField::Real, 4, 4);
            for i in 0..2 {
                for j in 0..2 {
                    let blk = embed_complex_scalar(z[i * 2 + j]);
                    for bi in 0..2 {
                        for bj in 0..2 {
                            base.set(2 * i + bi, 2 * j + bj, blk.get(bi, bj));
                        }
                    }
                }
            }
            let js = JStructuredMat::new(base, 1e-10).unwrap();
            let det_c = (z[0] * z[3] - z[1] * z[2]).norm();
            assert!((js.det_op() - det_c).abs() <= 1e-10 * (1.0 + det_c));
        }
    }

    #[test]
    fn j_structure_violation_is_detected() {
        let mut m = MatK::identity(GroundField::Real, 4);
        m.set(0, 1, Quat::real(0.5));
        assert!(JStructuredMat::new(m, 1e-10).is_err());
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let mut m = MatK::zeros(GroundField::Complex, 2, 2);
        m.set(0, 0, Quat::new(0.0, 3.0, 0.0, 0.0));
        m.set(1, 1, Quat::real(-2.0));
        assert!((m.operator_norm() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_round_trip_over_quaternions() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..25 {
            let m = rand_matrix(&mut rng, GroundField::Quaternion, 3, 3, 0.5)
                .add(&MatK::identity(GroundField::Quaternion, 3).scale(2.0));
            let inv = m.inverse().unwrap();
            let res = m.matmul(&inv).sub(&MatK::identity(GroundField::Quaternion, 3)).max_abs();
            assert!(res < 1e-11, "residual {res}");
        }
    }
}
