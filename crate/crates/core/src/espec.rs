//! Essential spectrum: dispersion relations (Fredholm borders), asymptotic
//! matrices at the end states, their hyperbolic signatures and the resulting
//! partition of the λ-plane.
//!
//! Two regularizations are covered: pure viscous relaxation (third order,
//! non-sectorial) and the mixed fourth-order regularization (sectorial).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{self, CMat};
use crate::model::ModelFunctions;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EndState {
    Minus,
    Plus,
}

impl EndState {
    pub fn u_bar(self) -> f64 {
        match self {
            EndState::Minus => 0.0,
            EndState::Plus => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EndState::Minus => "minus",
            EndState::Plus => "plus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Third,
    Fourth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Slow,
    Fast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    Omega,
    A1,
    A2,
    A3,
    A4,
    Border,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Signature {
    Hyperbolic { neg: usize, pos: usize },
    Border,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DispersionSample {
    pub k: f64,
    pub lambda: Complex64,
    pub end: EndState,
    pub order: Order,
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorialityReport {
    pub end: EndState,
    pub order: Order,
    /// Re λ at the two largest probe modes.
    pub re_at_k: [(f64, f64); 2],
    /// Vertical asymptote `-D/ε` of the third-order border, if any.
    pub asymptote: Option<f64>,
    pub sectorial: bool,
}

/// A region with its `(neg, pos)` counts at the minus and plus end states.
type TableRow = (RegionLabel, (usize, usize), (usize, usize));

/// Signature pairs `(minus, plus)` per region, in table order.
const TABLE_THIRD: [TableRow; 5] = [
    (RegionLabel::Omega, (2, 1), (2, 1)),
    (RegionLabel::A1, (1, 2), (2, 1)),
    (RegionLabel::A2, (2, 1), (1, 2)),
    (RegionLabel::A3, (2, 1), (1, 2)),
    (RegionLabel::A4, (1, 2), (1, 2)),
];

const TABLE_FOURTH: [TableRow; 5] = [
    (RegionLabel::Omega, (2, 2), (2, 2)),
    (RegionLabel::A1, (3, 1), (2, 2)),
    (RegionLabel::A2, (2, 2), (3, 1)),
    (RegionLabel::A3, (2, 2), (3, 1)),
    (RegionLabel::A4, (3, 1), (3, 1)),
];

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Essential-spectrum computations for a wave of speed `c`.
#[derive(Clone, Debug)]
pub struct EssentialSpectrum {
    pub model: ModelFunctions,
    pub c: f64,
}

impl EssentialSpectrum {
    pub fn new(model: ModelFunctions, c: f64) -> Self {
        Self { model, c }
    }

    fn dr(&self, end: EndState) -> (f64, f64) {
        let u = end.u_bar();
        (self.model.d(u), self.model.r_prime(u))
    }

    /// λ(k) on the Fredholm border of the given end state.
    pub fn dispersion(&self, k: f64, eps: f64, end: EndState, order: Order, a: f64) -> Complex64 {
        let (d, rp) = self.dr(end);
        let c = self.c;
        match order {
            Order::Third => Complex64::new((rp - d * k * k) / (1.0 + eps * k * k), -c * k),
            Order::Fourth => {
                let k2 = k * k;
                Complex64::new((-eps * eps * k2 * k2 - d * k2 + rp) / (1.0 + a * eps * k2), c * k)
            }
        }
    }

    /// `a±(λ, ε)` (fast scaling) or `A± = a±/ε` (slow scaling).
    pub fn asymptotic_matrix(&self, lambda: Complex64, eps: f64, end: EndState, scaling: Scaling) -> CMat {
        let (d, rp) = self.dr(end);
        let c = self.c;
        let e = cz(eps);
        let mut m = DMatrix::from_row_slice(
            3,
            3,
            &[
                -(cz(d) + e * lambda) / c,
                cz(0.0),
                cz(1.0 / c),
                e * (cz(rp) - lambda),
                cz(0.0),
                cz(0.0),
                e * c,
                -e,
                cz(0.0),
            ],
        );
        if scaling == Scaling::Slow {
            m /= e;
        }
        m
    }

    /// Closed first-order form of the fourth-order eigenvalue problem.
    pub fn asymptotic_matrix_fourth(&self, lambda: Complex64, eps: f64, end: EndState, a: f64) -> CMat {
        let (d, rp) = self.dr(end);
        let c = self.c;
        let z = cz(0.0);
        let o = cz(1.0);
        let mut m = DMatrix::from_row_slice(
            4,
            4,
            &[cz(-a * c), o, z, z, cz(d) + eps * a * lambda, z, o, z, cz(c), z, z, o, cz(rp) - lambda, z, z, z],
        );
        for j in 0..4 {
            m[(0, j)] /= eps;
            m[(1, j)] /= eps;
        }
        m
    }

    /// Closed-form characteristic polynomial `p±(μ) = det(a± - μ I)`, highest power first.
    pub fn char_poly_fast(&self, lambda: Complex64, eps: f64, end: EndState) -> [Complex64; 4] {
        let (d, rp) = self.dr(end);
        let c = self.c;
        [cz(-1.0), -(cz(d) + eps * lambda) / c, cz(eps), eps * eps * (lambda - rp) / c]
    }

    /// Closed-form `P_{A±}(μ) = det(A± - μ I)`, highest power first.
    pub fn char_poly_slow(&self, lambda: Complex64, eps: f64, end: EndState) -> [Complex64; 4] {
        let (d, rp) = self.dr(end);
        let c = self.c;
        [cz(-1.0), -(lambda + d / eps) / c, cz(1.0 / eps), (lambda - rp) / (c * eps)]
    }

    fn count(ev: &[Complex64]) -> Signature {
        let rho = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = 1e-12 * (1.0 + rho);
        if ev.iter().any(|z| z.re.abs() < tol) {
            return Signature::Border;
        }
        let neg = ev.iter().filter(|z| z.re < 0.0).count();
        Signature::Hyperbolic { neg, pos: ev.len() - neg }
    }

    pub fn signature(&self, lambda: Complex64, eps: f64, end: EndState) -> Result<Signature> {
        let ev = linalg::eigenvalues(&self.asymptotic_matrix(lambda, eps, end, Scaling::Fast))?;
        Ok(Self::count(&ev))
    }

    pub fn signature_fourth(&self, lambda: Complex64, eps: f64, end: EndState, a: f64) -> Result<Signature> {
        let ev = linalg::eigenvalues(&self.asymptotic_matrix_fourth(lambda, eps, end, a))?;
        Ok(Self::count(&ev))
    }

    fn lookup(table: &[TableRow], minus: Signature, plus: Signature) -> RegionLabel {
        match (minus, plus) {
            (Signature::Hyperbolic { neg: nm, pos: pm }, Signature::Hyperbolic { neg: np, pos: pp }) => table
                .iter()
                .find(|(_, m, p)| *m == (nm, pm) && *p == (np, pp))
                .map(|(l, _, _)| *l)
                .unwrap_or(RegionLabel::Border),
            _ => RegionLabel::Border,
        }
    }

    /// Region of λ from the signature pair; equal pairs (A2/A3) resolve to
    /// the first matching table row.
    pub fn classify(&self, lambda: Complex64, eps: f64) -> Result<RegionLabel> {
        Ok(Self::lookup(
            &TABLE_THIRD,
            self.signature(lambda, eps, EndState::Minus)?,
            self.signature(lambda, eps, EndState::Plus)?,
        ))
    }

    pub fn classify_fourth(&self, lambda: Complex64, eps: f64, a: f64) -> Result<RegionLabel> {
        Ok(Self::lookup(
            &TABLE_FOURTH,
            self.signature_fourth(lambda, eps, EndState::Minus, a)?,
            self.signature_fourth(lambda, eps, EndState::Plus, a)?,
        ))
    }

    /// ε at which the third-order border is a vertical line: `-D/R'`.
    pub fn epsilon_star(&self, end: EndState) -> f64 {
        let (d, rp) = self.dr(end);
        -d / rp
    }

    pub fn border_polyline(
        &self,
        eps: f64,
        end: EndState,
        order: Order,
        a: f64,
        k_range: (f64, f64),
        n: usize,
    ) -> Vec<DispersionSample> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let k = k_range.0 + (k_range.1 - k_range.0) * i as f64 / (n - 1) as f64;
                DispersionSample { k, lambda: self.dispersion(k, eps, end, order, a), end, order, a }
            })
            .collect()
    }

    /// Large-mode behaviour of a border: the third-order border saturates at
    /// `-D/ε` (not sectorial), the fourth-order one runs off to `-∞`.
    pub fn sectoriality(&self, eps: f64, end: EndState, order: Order, a: f64) -> SectorialityReport {
        let ks = [1e3, 1e4];
        let re = ks.map(|k| (k, self.dispersion(k, eps, end, order, a).re));
        let (d, _) = self.dr(end);
        let drop = re[0].1 - re[1].1;
        let sectorial = drop > 0.5 * re[0].1.abs();
        SectorialityReport {
            end,
            order,
            re_at_k: re,
            asymptote: (order == Order::Third).then_some(-d / eps),
            sectorial,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn es(c: f64) -> EssentialSpectrum {
        EssentialSpectrum::new(ModelFunctions::standard(), c)
    }

    #[test]
    fn border_points_are_non_hyperbolic() {
        let s = es(0.2);
        for &k in &[0.3, 1.0, 4.0] {
            for end in [EndState::Minus, EndState::Plus] {
                let l = s.dispersion(k, 0.1, end, Order::Third, 0.0);
                assert_eq!(s.signature(l, 0.1, end).unwrap(), Signature::Border);
            }
        }
    }

    #[test]
    fn char_poly_matches_matrix() {
        let s = es(0.3);
        let l = Complex64::new(0.4, -1.1);
        let m = s.asymptotic_matrix(l, 0.02, EndState::Plus, Scaling::Fast);
        // det(M - μI) = -det(μI - M) for 3×3
        let p = linalg::char_poly(&m);
        let q = s.char_poly_fast(l, 0.02, EndState::Plus);
        for i in 0..4 {
            assert!((p[i] + q[i]).norm() < 1e-14, "{i}: {} {}", p[i], q[i]);
        }
    }
}
