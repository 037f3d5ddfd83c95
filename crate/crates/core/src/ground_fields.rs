//! Scalar arithmetic over the three ground fields ℝ, ℂ, ℍ.
//!
//! A single four-component carrier type is used for all three fields; the
//! field tag decides which components are allowed to be nonzero. Complex
//! powers use the nonstandard split notation `a^{σ‖τ} = a^σ · conj(a)^τ`
//! with principal logarithms, which is safe on every call site because the
//! integrands only ever raise values with positive real part.

use num_complex::Complex64;
use thiserror::Error;

/// One of the three classical ground fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroundField {
    Real,
    Complex,
    Quaternion,
}

impl GroundField {
    /// Real dimension of the field: 1, 2 or 4.
    pub const fn dim(self) -> usize {
        match self {
            GroundField::Real => 1,
            GroundField::Complex => 2,
            GroundField::Quaternion => 4,
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ScalarError {
    #[error("split power of zero is undefined")]
    DomainError,
    #[error("scalar has components outside its field ({0:?})")]
    FieldMismatch(GroundField),
}

/// Plain quaternion `re + i·im_i + j·im_j + k·im_k`; also the carrier for
/// real and complex entries (with the trailing components zero).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quat {
    pub re: f64,
    pub i: f64,
    pub j: f64,
    pub k: f64,
}

impl Quat {
    pub const ZERO: Quat = Quat { re: 0.0, i: 0.0, j: 0.0, k: 0.0 };
    pub const ONE: Quat = Quat { re: 1.0, i: 0.0, j: 0.0, k: 0.0 };

    pub fn new(re: f64, i: f64, j: f64, k: f64) -> Self {
        Quat { re, i, j, k }
    }

    pub fn real(x: f64) -> Self {
        Quat { re: x, ..Quat::ZERO }
    }

    pub fn complex(z: Complex64) -> Self {
        Quat { re: z.re, i: z.im, ..Quat::ZERO }
    }

    /// The complex part `re + i·im_i`, meaningful for ℝ/ℂ-tagged data.
    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.re, self.i)
    }

    pub fn conj(self) -> Self {
        Quat { re: self.re, i: -self.i, j: -self.j, k: -self.k }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.i * self.i + self.j * self.j + self.k * self.k
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.i.is_finite() && self.j.is_finite() && self.k.is_finite()
    }

    /// Hamilton product. Non-commutative: `i·j = k`, `j·i = -k`.
    pub fn mul(self, q: Quat) -> Quat {
        Quat {
            re: self.re * q.re - self.i * q.i - self.j * q.j - self.k * q.k,
            i: self.re * q.i + self.i * q.re + self.j * q.k - self.k * q.j,
            j: self.re * q.j - self.i * q.k + self.j * q.re + self.k * q.i,
            k: self.re * q.k + self.i * q.j - self.j * q.i + self.k * q.re,
        }
    }

    pub fn add(self, q: Quat) -> Quat {
        Quat { re: self.re + q.re, i: self.i + q.i, j: self.j + q.j, k: self.k + q.k }
    }

    pub fn sub(self, q: Quat) -> Quat {
        Quat { re: self.re - q.re, i: self.i - q.i, j: self.j - q.j, k: self.k - q.k }
    }

    pub fn neg(self) -> Quat {
        Quat { re: -self.re, i: -self.i, j: -self.j, k: -self.k }
    }

    pub fn scale(self, s: f64) -> Quat {
        Quat { re: self.re * s, i: self.i * s, j: self.j * s, k: self.k * s }
    }

    /// Multiplicative inverse `q̄ / |q|²`.
    pub fn inv(self) -> Quat {
        let n = self.norm_sqr();
        self.conj().scale(1.0 / n)
    }

    /// True when the components fit inside `field`.
    pub fn belongs_to(self, field: GroundField) -> bool {
        match field {
            GroundField::Real => self.i == 0.0 && self.j == 0.0 && self.k == 0.0,
            GroundField::Complex => self.j == 0.0 && self.k == 0.0,
            GroundField::Quaternion => true,
        }
    }
}

/// Tagged scalar: a quaternion constrained to its ground field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scalar {
    pub value: Quat,
    pub field: GroundField,
}

impl Scalar {
    pub fn new(value: Quat, field: GroundField) -> Result<Self, ScalarError> {
        if !value.belongs_to(field) {
            return Err(ScalarError::FieldMismatch(field));
        }
        Ok(Scalar { value, field })
    }

    pub fn quaternion(value: Quat) -> Self {
        Scalar { value, field: GroundField::Quaternion }
    }

    /// Hamilton product of two scalars; the result lives in the larger of
    /// the two fields.
    pub fn mul(self, rhs: Scalar) -> Scalar {
        let field = if self.field == rhs.field {
            self.field
        } else if self.field == GroundField::Quaternion || rhs.field == GroundField::Quaternion {
            GroundField::Quaternion
        } else {
            GroundField::Complex
        };
        Scalar { value: self.value.mul(rhs.value), field }
    }
}

/// Hamilton product on tagged scalars (promotes to the joint field).
pub fn quat_mul(p: Scalar, q: Scalar) -> Scalar {
    p.mul(q)
}

/// Split power `a^{σ‖τ} = exp(σ·Log a + τ·Log ā)`, principal branch.
pub fn power_split(
    a: Complex64,
    sigma: Complex64,
    tau: Complex64,
) -> Result<Complex64, ScalarError> {
    if a == Complex64::new(0.0, 0.0) {
        return Err(ScalarError::DomainError);
    }
    let l = a.ln();
    Ok((sigma * l + tau * l.conj()).exp())
}

/// Split power of a value already given through its principal log.
pub fn power_split_from_log(log_a: Complex64, sigma: Complex64, tau: Complex64) -> Complex64 {
    (sigma * log_a + tau * log_a.conj()).exp()
}
