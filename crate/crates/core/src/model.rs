//! Model polynomials: nonlinear diffusion `D`, cubic reaction `R` and the
//! potential `F` with `F' = D`.
//!
//! Coefficients are kept as exact rationals so that identities such as
//! `F(7/12) = F(5/6)` can be checked without rounding; floating-point
//! evaluation goes through Horner's scheme on a cached `f64` copy.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::Error;

pub type Rational = Ratio<i64>;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// Polynomial with exact rational coefficients, ascending powers.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Rational>,
    approx: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Rational::zero());
        }
        let approx = coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        Self { coeffs, approx }
    }

    /// Builds `scale * prod (x - r)` from rational roots.
    pub fn from_roots(scale: Rational, roots: &[Rational]) -> Self {
        let mut c = vec![scale];
        for r in roots {
            let mut next = vec![Rational::zero(); c.len() + 1];
            for (i, ci) in c.iter().enumerate() {
                next[i + 1] += *ci;
                next[i] -= *ci * *r;
            }
            c = next;
        }
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.approx.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_exact(&self, x: Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::new(vec![Rational::zero()]);
        }
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| c * Rational::from_integer(i as i64)).collect())
    }

    /// Taylor coefficients at `a`: the polynomial `h ↦ p(a + h)`.
    pub fn shifted(&self, a: Rational) -> Self {
        // Repeated synthetic division by (x - a).
        let mut c = self.coeffs.clone();
        let n = c.len();
        for k in 0..n {
            for i in (k..n - 1).rev() {
                let t = c[i + 1] * a;
                c[i] += t;
            }
        }
        Self::new(c)
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Self {
        let mut c = vec![Rational::zero()];
        c.extend(self.coeffs.iter().enumerate().map(|(i, &a)| a / Rational::from_integer(i as i64 + 1)));
        Self::new(c)
    }
}

/// All five model quantities at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelValues {
    pub d: f64,
    pub r: f64,
    pub f: f64,
    pub r_prime: f64,
    pub d_prime: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFunctions {
    d: Polynomial,
    r: Polynomial,
    f: Polynomial,
    /// `h ↦ F(u_fold_left + h) - F(u_fold_left)`.
    f_fold: Polynomial,
    d_prime: Polynomial,
    r_prime: Polynomial,
    pub u_fold_left: Rational,
    pub u_fold_right: Rational,
    pub u_jump: Rational,
}

impl Default for ModelFunctions {
    fn default() -> Self {
        Self::standard()
    }
}

impl ModelFunctions {
    /// `D = 6(U-7/12)(U-3/4)`, `R = 5U(1-U)(U-1/5)`, `F = 2U^3 - 4U^2 + 21/8 U`.
    pub fn standard() -> Self {
        let d = Polynomial::from_roots(q(6, 1), &[q(7, 12), q(3, 4)]);
        let r = Polynomial::from_roots(q(-5, 1), &[q(0, 1), q(1, 1), q(1, 5)]);
        Self::custom(d, r, q(7, 12), q(3, 4), q(5, 6)).expect("standard model is consistent")
    }

    /// Generic hook: any diffusion/reaction pair with a prescribed fold and
    /// jump point. `F` is the antiderivative of `D`; the jump fibre must be
    /// horizontal, i.e. `F(u_fold_left) = F(u_jump)` exactly.
    pub fn custom(
        d: Polynomial,
        r: Polynomial,
        u_fold_left: Rational,
        u_fold_right: Rational,
        u_jump: Rational,
    ) -> Result<Self, Error> {
        let f = d.antiderivative();
        if !d.eval_exact(u_fold_left).is_zero() || !d.eval_exact(u_fold_right).is_zero() {
            return Err(Error::InvalidModel("fold points must be roots of D".into()));
        }
        if f.eval_exact(u_fold_left) != f.eval_exact(u_jump) {
            return Err(Error::InvalidModel("F(u_fold_left) != F(u_jump)".into()));
        }
        let mut f_fold = f.shifted(u_fold_left).coeffs().to_vec();
        f_fold[0] = Rational::zero();
        Ok(Self {
            f_fold: Polynomial::new(f_fold),
            d_prime: d.derivative(),
            r_prime: r.derivative(),
            d,
            r,
            f,
            u_fold_left,
            u_fold_right,
            u_jump,
        })
    }

    pub fn d_poly(&self) -> &Polynomial {
        &self.d
    }
    pub fn r_poly(&self) -> &Polynomial {
        &self.r
    }
    pub fn f_poly(&self) -> &Polynomial {
        &self.f
    }

    #[inline]
    pub fn d(&self, u: f64) -> f64 {
        self.d.eval(u)
    }
    #[inline]
    pub fn r(&self, u: f64) -> f64 {
        self.r.eval(u)
    }
    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        self.f.eval(u)
    }
    /// `F(u) - F(u_F)` without cancellation near the fold.
    #[inline]
    pub fn f_from_fold(&self, u: f64) -> f64 {
        self.f_fold.eval(u - self.u_f())
    }
    #[inline]
    pub fn d_prime(&self, u: f64) -> f64 {
        self.d_prime.eval(u)
    }
    #[inline]
    pub fn r_prime(&self, u: f64) -> f64 {
        self.r_prime.eval(u)
    }

    pub fn eval(&self, u: f64) -> ModelValues {
        ModelValues { d: self.d(u), r: self.r(u), f: self.f(u), r_prime: self.r_prime(u), d_prime: self.d_prime(u) }
    }

    /// Reference path in rational arithmetic: `(D, R, F, R', D')`.
    pub fn eval_exact(&self, u: Rational) -> [Rational; 5] {
        [
            self.d.eval_exact(u),
            self.r.eval_exact(u),
            self.f.eval_exact(u),
            self.r_prime.eval_exact(u),
            self.d_prime.eval_exact(u),
        ]
    }

    pub fn u_f(&self) -> f64 {
        self.u_fold_left.to_f64().unwrap()
    }
    pub fn u_j(&self) -> f64 {
        self.u_jump.to_f64().unwrap()
    }
    pub fn u_fold_right_f64(&self) -> f64 {
        self.u_fold_right.to_f64().unwrap()
    }
}

/// Shorthand for the values used throughout: `eval_model(u)` on the standard model.
pub fn eval_model(u: f64) -> ModelValues {
    ModelFunctions::standard().eval(u)
}
