//! Predicted main terms for the first and second moments.

pub mod euler;
pub mod main_terms;
pub mod nondiag;

use num_complex::Complex64;
use serde::Serialize;

pub use euler::{euler_a, euler_b, euler_c, Accelerator, EulerProduct};
pub use main_terms::{
    eta_dirichlet_oracle, eta_factor, eta_local, eta_product, first_moment_constant, first_moment_poly_trivial,
    second_moment_diag_poly, MainTerm,
};
pub use nondiag::{
    h_star_double_sum, h_star_factor, j_symmetry_residual, nondiag_constant, nondiag_h_average, orthogonality_average,
    quartic_closed_form, script_d_series, script_g, script_g_l_factors, KCharacters, KEvaluator, NondiagTerm,
};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// How the diagonal second-moment prefactor is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagConvention {
    /// Both halves of the approximate functional equation counted: factor 2.
    Derived,
    /// The prefactor without the factor 2.
    Halved,
}

/// Which characters carry the k- and α-sums in K, and which phase multiplies 𝒩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NondiagPhase {
    /// κ = ψ², α-character ψ̄², phase ψ̄χ_{r/2}(2h̄l), k coprime to r/2.
    Derived,
    /// κ = ψ̄², α-character ψ², phase ψχ_{r/2}(2̄h̄l).
    Conjugate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Conventions {
    pub diag: DiagConvention,
    pub nondiag: NondiagPhase,
}

impl Default for Conventions {
    fn default() -> Self {
        Self { diag: DiagConvention::Derived, nondiag: NondiagPhase::Derived }
    }
}

impl std::str::FromStr for DiagConvention {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "derived" => Ok(Self::Derived),
            "halved" => Ok(Self::Halved),
            _ => Err(crate::Error::Config(format!("diag convention must be derived or halved, got {s}"))),
        }
    }
}

impl std::str::FromStr for NondiagPhase {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "derived" => Ok(Self::Derived),
            "conjugate" => Ok(Self::Conjugate),
            _ => Err(crate::Error::Config(format!("nondiag phase must be derived or conjugate, got {s}"))),
        }
    }
}

/// A polynomial in log X of degree 0 or 1, constant coefficient first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MainTermPolynomial {
    pub degree: u8,
    pub coefficients: Vec<Complex64>,
}

impl MainTermPolynomial {
    pub fn zero(degree: u8) -> Self {
        Self { degree, coefficients: vec![Complex64::new(0.0, 0.0); degree as usize + 1] }
    }

    pub fn constant(c0: Complex64) -> Self {
        Self { degree: 0, coefficients: vec![c0] }
    }

    pub fn linear(c0: Complex64, c1: Complex64) -> Self {
        Self { degree: 1, coefficients: vec![c0, c1] }
    }

    pub fn eval(&self, log_x: f64) -> Complex64 {
        self.coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * log_x + c)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| c.norm() == 0.0)
    }

    /// Coefficient-wise sum; the degree is the larger one.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coefficients.len().max(other.coefficients.len());
        let get = |p: &Self, i: usize| p.coefficients.get(i).copied().unwrap_or_default();
        Self {
            degree: self.degree.max(other.degree),
            coefficients: (0..n).map(|i| get(self, i) + get(other, i)).collect(),
        }
    }
}

/// A labelled intermediate value kept for audit output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<u64>,
}

impl NamedValue {
    pub fn new(name: &str, v: Complex64) -> Self {
        Self { name: name.into(), value: [v.re, v.im], tail_estimate: None, cutoff: None }
    }

    pub fn euler(name: &str, e: &EulerProduct) -> Self {
        Self { tail_estimate: Some(e.tail_estimate), cutoff: Some(e.cutoff), ..Self::new(name, e.value) }
    }

    pub fn note(text: &str) -> Self {
        Self::new(text, Complex64::new(0.0, 0.0))
    }
}
