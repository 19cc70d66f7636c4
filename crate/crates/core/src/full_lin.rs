//! Linearization along the `ε > 0` wave and its projective pictures.
//!
//! In fast time the eigenvalue problem is `y' = a(ū, λ, ε) y` with
//!
//! ```text
//!     ⎡ -(ελ + D)/c   0   1/c ⎤
//! a = ⎢  ε(R' - λ)    0    0  ⎥
//!     ⎣    εc        -ε    0  ⎦
//! ```
//!
//! and in slow time `A = a/ε`. The module provides the vector fields on the
//! three affine charts of CP², the induced flow on 2-planes (Plücker
//! coordinates), the asymptotic eigen-structure at `z̄±` with its ε → 0
//! limits, the convergence of the projectivized full flow to the reduced flow
//! concatenated with the jump graph, the ε-rescaled layer, and a linear toy
//! problem with an explicit slow manifold.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::espec::EndState;
use crate::linalg::{self, CMat};
use crate::model::ModelFunctions;
use crate::ode;
use crate::slow_evans::{jump_graph, EvansConfig, JumpData, SlowEvans};
use crate::wave::{self, FastState, FullShootOptions, SingularOrbit, System, Timescale, WaveProfile};
use crate::{Error, Result};

type C = Complex64;
pub type CMat3 = Matrix3<C>;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Linearized state on either clock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinState3 {
    /// `(u, p, v)` on the fast clock, `(U, P, V)` on the slow one.
    pub y: [C; 3],
    pub base: FastState,
    pub lambda: C,
    pub eps: f64,
}

/// The fast-time matrix `a(ū, λ, ε)`.
pub fn fast_matrix(model: &ModelFunctions, u: f64, lambda: C, eps: f64, c: f64) -> CMat3 {
    let d = model.d(u);
    let rp = model.r_prime(u);
    let ce = C::new(eps, 0.0);
    CMat3::new(-(eps * lambda + d) / c, ZERO, C::new(1.0 / c, 0.0), eps * (rp - lambda), ZERO, ZERO, ce * c, -ce, ZERO)
}

/// `a` on the fast clock, `a/ε` on the slow clock.
pub fn lin_matrix(model: &ModelFunctions, u: f64, lambda: C, eps: f64, c: f64, timescale: Timescale) -> CMat3 {
    let a = fast_matrix(model, u, lambda, eps, c);
    match timescale {
        Timescale::Fast => a,
        Timescale::Slow => a / C::new(eps, 0.0),
    }
}

fn mul(m: &CMat3, y: &[C; 3]) -> [C; 3] {
    std::array::from_fn(|i| m[(i, 0)] * y[0] + m[(i, 1)] * y[1] + m[(i, 2)] * y[2])
}

pub fn lin_rhs(model: &ModelFunctions, st: &LinState3, c: f64, timescale: Timescale) -> [C; 3] {
    mul(&lin_matrix(model, st.base.u, st.lambda, st.eps, c, timescale), &st.y)
}

/// Right-hand side at time `t` with the base point taken from `profile`.
pub fn lin_rhs_along(model: &ModelFunctions, profile: &WaveProfile, t: f64, y: &[C; 3], lambda: C) -> [C; 3] {
    let base = profile.at(model, t);
    let st = LinState3 { y: *y, base, lambda, eps: profile.eps };
    lin_rhs(model, &st, profile.c, profile.timescale)
}

/// Affine chart of CP²: which homogeneous coordinate is set to one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProjChart {
    U0,
    P0,
    V0,
}

impl ProjChart {
    pub fn index(self) -> usize {
        match self {
            ProjChart::U0 => 0,
            ProjChart::P0 => 1,
            ProjChart::V0 => 2,
        }
    }

    fn others(self) -> [usize; 2] {
        match self {
            ProjChart::U0 => [1, 2],
            ProjChart::P0 => [0, 2],
            ProjChart::V0 => [0, 1],
        }
    }
}

/// A point of CP² on one chart. On `U0` the coordinates are `(p/u, v/u)`, on
/// `P0` `(u/p, v/p)`, on `V0` `(u/v, p/v)`; the slow chart `(U/V, P/V)` is `V0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChartPoint {
    pub chart: ProjChart,
    pub coords: [C; 2],
}

impl ChartPoint {
    pub fn from_homogeneous(y: &[C; 3], chart: ProjChart) -> Result<Self> {
        let k = chart.index();
        let scale = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if y[k].norm() <= 1e-300_f64.max(1e-14 * scale) {
            return Err(Error::Domain(format!("point lies at infinity of chart {chart:?}")));
        }
        let [i, j] = chart.others();
        Ok(Self { chart, coords: [y[i] / y[k], y[j] / y[k]] })
    }

    pub fn homogeneous(&self) -> [C; 3] {
        let mut y = [ONE; 3];
        let [i, j] = self.chart.others();
        y[i] = self.coords[0];
        y[j] = self.coords[1];
        y
    }

    pub fn to_chart(&self, chart: ProjChart) -> Result<Self> {
        Self::from_homogeneous(&self.homogeneous(), chart)
    }
}

/// Projectivized flow of `y' = M y` on a chart:
/// `βᵢ' = (M y)ᵢ - βᵢ (M y)ₖ` with `yₖ = 1`.
pub fn proj_rhs(m: &CMat3, pt: &ChartPoint) -> [C; 2] {
    let y = pt.homogeneous();
    let my = mul(m, &y);
    let k = pt.chart.index();
    let [i, j] = pt.chart.others();
    [my[i] - pt.coords[0] * my[k], my[j] - pt.coords[1] * my[k]]
}

/// Fast projectivized eigenvalue problem at base `u`.
pub fn proj_rhs_fast(model: &ModelFunctions, u: f64, pt: &ChartPoint, lambda: C, eps: f64, c: f64) -> [C; 2] {
    proj_rhs(&fast_matrix(model, u, lambda, eps, c), pt)
}

/// Slow projectivized problem on the chart `(β₁, β₂) = (U/V, P/V)`.
pub fn proj_rhs_slow(model: &ModelFunctions, u: f64, beta: [C; 2], lambda: C, eps: f64, c: f64) -> [C; 2] {
    let m = lin_matrix(model, u, lambda, eps, c, Timescale::Slow);
    proj_rhs(&m, &ChartPoint { chart: ProjChart::V0, coords: beta })
}

/// Plücker coordinates `(u∧p, p∧v, v∧u)` of a complex 2-plane in C³.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct WedgeState {
    pub w_up: C,
    pub w_pv: C,
    pub w_vu: C,
}

impl WedgeState {
    pub fn to_array(self) -> [C; 3] {
        [self.w_up, self.w_pv, self.w_vu]
    }

    pub fn from_array(a: [C; 3]) -> Self {
        Self { w_up: a[0], w_pv: a[1], w_vu: a[2] }
    }
}

pub fn wedge(y1: &[C; 3], y2: &[C; 3]) -> WedgeState {
    WedgeState {
        w_up: y1[0] * y2[1] - y1[1] * y2[0],
        w_pv: y1[1] * y2[2] - y1[2] * y2[1],
        w_vu: y1[2] * y2[0] - y1[0] * y2[2],
    }
}

/// Induced matrix on 2-planes: `(M y₁)∧y₂ + y₁∧(M y₂)` in the basis
/// `(u∧p, p∧v, v∧u)`.
pub fn compound2(m: &CMat3) -> CMat3 {
    const PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];
    let e = |i: usize| {
        let mut v = [ZERO; 3];
        v[i] = ONE;
        v
    };
    let col = |b: usize| {
        let (i, j) = PAIRS[b];
        let (ei, ej) = (e(i), e(j));
        let a = wedge(&mul(m, &ei), &ej).to_array();
        let b = wedge(&ei, &mul(m, &ej)).to_array();
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    };
    let cols = [col(0), col(1), col(2)];
    CMat3::from_fn(|r, k| cols[k][r])
}

/// Closed form of the 2-plane matrix for the fast linearization.
pub fn wedge_matrix(model: &ModelFunctions, u: f64, lambda: C, eps: f64, c: f64) -> CMat3 {
    let alpha = (eps * lambda + model.d(u)) / c;
    let r = model.r_prime(u) - lambda;
    let e = C::new(eps, 0.0);
    CMat3::new(-alpha, C::new(-1.0 / c, 0.0), ZERO, -e * c, ZERO, -e * r, e, ZERO, -alpha)
}

pub fn wedge_rhs(model: &ModelFunctions, u: f64, w: &WedgeState, lambda: C, eps: f64, c: f64) -> WedgeState {
    WedgeState::from_array(mul(&wedge_matrix(model, u, lambda, eps, c), &w.to_array()))
}

fn to_dyn(m: &CMat3) -> CMat {
    CMat::from_fn(3, 3, |r, k| m[(r, k)])
}

/// Largest distance from an eigenvalue of the 2-plane matrix to the nearest
/// pairwise sum `μᵢ + μⱼ` of eigenvalues of `m`, relative to `1 + max|μ|`.
pub fn wedge_eig_defect(m: &CMat3) -> Result<f64> {
    let mu = linalg::eigenvalues(&to_dyn(m))?;
    let sums = [mu[0] + mu[1], mu[0] + mu[2], mu[1] + mu[2]];
    let w = linalg::eigenvalues(&to_dyn(&compound2(m)))?;
    let scale = 1.0 + mu.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // Match greedily so that repeated sums are not reused.
    let mut used = [false; 3];
    let mut worst: f64 = 0.0;
    for z in w {
        let (k, d) = (0..3)
            .filter(|&k| !used[k])
            .map(|k| (k, (z - sums[k]).norm()))
            .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        used[k] = true;
        worst = worst.max(d / scale);
    }
    Ok(worst)
}

/// Whether the 2-plane eigenvalues are the pairwise sums to 1e-8.
pub fn wedge_eig_check(m: &CMat3) -> Result<bool> {
    Ok(wedge_eig_defect(m)? <= 1e-8)
}

/// `√(1 - |⟨x,y⟩|² / (|x|²|y|²))`, the sine of the Hermitian angle.
pub fn fubini_study_dist(x: &[C], y: &[C]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain("vectors of different length".into()));
    }
    let nx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    let ny: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Domain("zero vector has no projective class".into()));
    }
    let ip: C = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    Ok((1.0 - ip.norm_sqr() / (nx * ny)).max(0.0).sqrt())
}

/// Eigen-structure of `a(ū±, λ, ε)` and its ε → 0 limits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticEigs {
    pub end: EndState,
    pub lambda: C,
    pub eps: f64,
    pub c: f64,
    /// `(μ_f, μ_s1, μ_s2)` with `Re μ_f ≪ Re μ_s1 < 0 < Re μ_s2`.
    pub mu: [C; 3],
    /// Sup-normalized eigenvectors in the order of `mu`.
    pub vectors: [[C; 3]; 3],
    /// Limit `-D(ū)/c` of `μ_f`.
    pub mu_f0: f64,
    /// Roots of `D ν² - c ν - (λ - R') = 0`, `Re ν_m < Re ν_p`; `εν` approximate `μ_s`.
    pub nu_m: C,
    pub nu_p: C,
    /// Limits `r_f = (1,0,0)`, `r_s1 = (1/D, ν_p, 1)`, `r_s2 = (1/D, ν_m, 1)`:
    /// the eigenvector of `εν` is `(1/D, c/D - ν, 1)` and `ν_m + ν_p = c/D`.
    pub reduced: [[C; 3]; 3],
}

pub fn asymptotic_eigs(model: &ModelFunctions, lambda: C, eps: f64, c: f64, end: EndState) -> Result<AsymptoticEigs> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let u = end.u_bar();
    let pairs = linalg::eigenpairs(&to_dyn(&fast_matrix(model, u, lambda, eps, c)))?;
    let mu: [C; 3] = std::array::from_fn(|i| pairs[i].0);
    let slow = mu[1].norm().max(mu[2].norm());
    if !(mu[1].re < 0.0 && mu[2].re > 0.0 && mu[0].re < mu[1].re && mu[0].norm() > 10.0 * slow) {
        return Err(Error::Hierarchy(format!(
            "expected Re mu_f << Re mu_s1 < 0 < Re mu_s2 at {}, got {:.3e}, {:.3e}, {:.3e}",
            end.label(),
            mu[0],
            mu[1],
            mu[2]
        )));
    }
    let vectors: [[C; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|k| pairs[i].1[k]));
    for i in 0..3 {
        for j in i + 1..3 {
            if fubini_study_dist(&vectors[i], &vectors[j])? < 1e-8 {
                return Err(Error::Hierarchy("eigenvectors nearly parallel".into()));
            }
        }
    }
    let d = model.d(u);
    let sq = (C::new(c * c, 0.0) + 4.0 * d * (lambda - model.r_prime(u))).sqrt();
    let (a, b) = ((c - sq) / (2.0 * d), (c + sq) / (2.0 * d));
    let (nu_m, nu_p) = if a.re <= b.re { (a, b) } else { (b, a) };
    let inv_d = C::new(1.0 / d, 0.0);
    Ok(AsymptoticEigs {
        end,
        lambda,
        eps,
        c,
        mu,
        vectors,
        mu_f0: -d / c,
        nu_m,
        nu_p,
        reduced: [[ONE, ZERO, ZERO], [inv_d, nu_p, ONE], [inv_d, nu_m, ONE]],
    })
}

/// Largest `ε` of the descending list such that the hierarchy holds at both
/// ends for every `λ` and for every smaller listed `ε`; `None` if it fails at
/// the smallest.
pub fn hierarchy_eps_bar(model: &ModelFunctions, lambdas: &[C], c: f64, eps_desc: &[f64]) -> Option<f64> {
    let ok = |eps: f64| {
        lambdas.iter().all(|&l| {
            [EndState::Minus, EndState::Plus].iter().all(|&end| asymptotic_eigs(model, l, eps, c, end).is_ok())
        })
    };
    let mut bar = None;
    for &eps in eps_desc.iter().rev() {
        if !ok(eps) {
            break;
        }
        bar = Some(eps);
    }
    bar
}

/// Which speed drives the base wave in the convergence experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpeedMode {
    /// `c = c₀` for every `ε`.
    FrozenC0,
    /// `c = c(ε)` from shooting.
    Computed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceOptions {
    pub mode: SpeedMode,
    pub rtol: f64,
    pub atol: f64,
    /// Take-off distance from `z̄⁻`.
    pub offset: f64,
    /// Comparison window `[lower, u_F - margin] ∪ [u_J + margin, upper]`.
    pub lower: f64,
    pub upper: f64,
    pub margin: f64,
    /// Samples per window piece.
    pub samples: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            mode: SpeedMode::FrozenC0,
            rtol: 1e-10,
            atol: 1e-12,
            offset: 1e-8,
            lower: 0.05,
            upper: 0.95,
            margin: 0.02,
            samples: 200,
        }
    }
}

impl ConvergenceOptions {
    /// Ascending `Ū` samples of the comparison window.
    pub fn window(&self, model: &ModelFunctions) -> Vec<f64> {
        let n = self.samples.max(2);
        let piece = |a: f64, b: f64| (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64);
        piece(self.lower, model.u_f() - self.margin).chain(piece(model.u_j() + self.margin, self.upper)).collect()
    }
}

/// One row of the curve dump; `eps = 0` marks the reduced curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub ubar: f64,
    pub s: C,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub eps: f64,
    pub c: f64,
    /// Sup over the window of the Fubini–Study distance of `(p, v)` to `(P, V)`.
    pub sup_distance: f64,
    pub argmax_ubar: f64,
    /// Largest window abscissa reached by the base orbit; below `upper` when
    /// the orbit leaves the slow manifold early (frozen speed, larger `ε`).
    pub reached: f64,
    /// `S = p/v` of the full solution on the window.
    pub rows: Vec<CurveRow>,
}

fn s_of(p: C, v: C) -> C {
    if v.norm() == 0.0 {
        C::new(f64::INFINITY, 0.0)
    } else {
        p / v
    }
}

/// The reduced solution with the jump graph on `[u_F, u_J]`, sampled at `n`
/// uniformly spaced points of `[lower, upper]`, as `eps = 0` rows.
pub fn reduced_rows(orbit: &SingularOrbit, lambda: C, opts: &ConvergenceOptions, n: usize) -> Result<Vec<CurveRow>> {
    let ev = reduced_solver(orbit, opts)?;
    let n = n.max(2);
    let us: Vec<f64> = (0..n).map(|i| opts.lower + (opts.upper - opts.lower) * i as f64 / (n - 1) as f64).collect();
    let hom = ev.reduced_curve(lambda, &us)?;
    Ok(us.iter().zip(hom).map(|(&ubar, (p, v))| CurveRow { ubar, s: s_of(p, v), eps: 0.0 }).collect())
}

fn reduced_solver(orbit: &SingularOrbit, opts: &ConvergenceOptions) -> Result<SlowEvans> {
    let config = EvansConfig { rtol: opts.rtol, atol: opts.atol, offset: opts.offset, ..EvansConfig::default() };
    SlowEvans::new(orbit.clone(), config)
}

/// Full linearized solution leaving `z̄⁻` along the unstable direction,
/// projected to `(p, v)` at each level `ū` of `us` (exact crossings of the
/// base wave, norm-preserving linear flow). The list is cut short if the
/// base orbit turns away from `z̄⁺` before the last level.
pub fn full_projected(
    model: &ModelFunctions,
    lambda: C,
    eps: f64,
    c: f64,
    us: &[f64],
    opts: &ConvergenceOptions,
) -> Result<Vec<(C, C)>> {
    let frame = wave::saddle_frame(model, EndState::Minus, c, eps)?;
    let e = &frame.eigenvectors[2];
    let sgn = if e[0] >= 0.0 { opts.offset } else { -opts.offset };
    let eig = asymptotic_eigs(model, lambda, eps, c, EndState::Minus)?;
    let r = eig.vectors[2];
    let n = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let y0 = [
        sgn * e[0],
        sgn * e[1],
        sgn * e[2],
        r[0].re / n,
        r[0].im / n,
        r[1].re / n,
        r[1].im / n,
        r[2].re / n,
        r[2].im / n,
    ];
    let f = |_: f64, y: &[f64; 9]| {
        let base = FastState::new(y[0], y[1], y[2]);
        let db = wave::rhs(model, base, c, eps, System::FullFast).unwrap_or_default();
        let z = [C::new(y[3], y[4]), C::new(y[5], y[6]), C::new(y[7], y[8])];
        let dz = mul(&fast_matrix(model, y[0], lambda, eps, c), &z);
        let rho = (0..3).map(|i| (z[i].conj() * dz[i]).re).sum::<f64>() / (0..3).map(|i| z[i].norm_sqr()).sum::<f64>();
        [
            db.u,
            db.p,
            db.v,
            dz[0].re - rho * y[3],
            dz[0].im - rho * y[4],
            dz[1].re - rho * y[5],
            dz[1].im - rho * y[6],
            dz[2].re - rho * y[7],
            dz[2].im - rho * y[8],
        ]
    };
    let guard = |y: &[f64; 9]| y[0] < -1e-3 || y[0] > 1.001;
    let o = ode::Options { max_steps: 20_000_000, ..ode::Options::with_tol(opts.rtol, opts.atol) };
    let hits = ode::solve_levels(f, 0.0, y0, 0, us, 200.0 / eps, &o, &guard)?;
    Ok(hits.iter().map(|(_, y)| (C::new(y[5], y[6]), C::new(y[7], y[8]))).collect())
}

/// For each `ε`, the sup distance on the window between the projectivized full
/// solution and the reduced-plus-jump solution, over the part of the window the
/// base orbit reaches. Runs the `ε` values in parallel.
pub fn convergence_run(
    model: &ModelFunctions,
    lambda: C,
    eps_list: &[f64],
    orbit: &SingularOrbit,
    opts: &ConvergenceOptions,
) -> Result<Vec<ConvergenceResult>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("eps list must be strictly descending".into()));
    }
    let us = opts.window(model);
    let reduced = reduced_solver(orbit, opts)?.reduced_curve(lambda, &us)?;
    eps_list
        .par_iter()
        .map(|&eps| {
            let c = match opts.mode {
                SpeedMode::FrozenC0 => orbit.c0,
                SpeedMode::Computed => {
                    let shoot = FullShootOptions { rtol: opts.rtol, atol: opts.atol, ..FullShootOptions::default() };
                    wave::find_c_eps(model, eps, orbit.c0, &shoot)?.0
                }
            };
            let full = full_projected(model, lambda, eps, c, &us, opts)?;
            let mut sup = 0.0;
            let mut argmax = us[0];
            let mut rows = Vec::with_capacity(us.len());
            for ((&ubar, &(p, v)), &(pr, vr)) in us.iter().zip(&full).zip(&reduced) {
                let d = fubini_study_dist(&[p, v], &[pr, vr])?;
                if d > sup {
                    sup = d;
                    argmax = ubar;
                }
                rows.push(CurveRow { ubar, s: s_of(p, v), eps });
            }
            if full.len() <= us.iter().filter(|&&u| u < model.u_f()).count() {
                return Err(Error::Integration(format!("base orbit for eps = {eps} never reaches the right branch")));
            }
            let reached = us[full.len() - 1];
            Ok(ConvergenceResult { eps, c, sup_distance: sup, argmax_ubar: argmax, reached, rows })
        })
        .collect()
}

/// One sample of the rescaled layer problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LayerSample {
    pub xi: f64,
    pub ubar: f64,
    pub u: C,
    pub beta1: C,
    pub beta2: C,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerReport {
    pub samples: Vec<LayerSample>,
    /// `max |u - K (v̄_F - F(ū))| / |K|`.
    pub identity_error: f64,
    /// `max |β₂(ξ) - β₂(0) - c·∫u| / |K|`, with `∫u = K c (ū - ū₀)`.
    pub quadrature_error: f64,
    /// Max relative error of `g = u/β₂` against `(v̄_F - F)/(cū + C)` with
    /// `C = -p̄_F` and `C = +p̄_F`, and against `(v̄_F - F)/(c(cū - p̄_F))`,
    /// over samples where `v̄_F - F(ū)` exceeds 1e-8 of its maximum.
    pub g_error_minus: f64,
    pub g_error_plus: f64,
    pub g_error_scaled: f64,
    /// `max |β₁/β₂ - s(ū)|` against the jump graph.
    pub s_error: f64,
}

/// Integrates the ε → 0 limit of the rescaled layer linearization
/// `u' = -D u / c`, `β₁' = (R' - λ) u`, `β₂' = c u` along the fast jump
/// (base `ū' = (v̄_F - F(ū))/c` from just right of the fold), started on
/// `u = K(v̄_F - F(ū₀))`, `β₂ = K c (cū₀ - p̄_F)`, `β₁ = s(ū₀) β₂` with `s` the
/// jump graph through `s₀`. `xi_grid` is ascending from 0.
pub fn rescaled_layer(
    model: &ModelFunctions,
    jump: &JumpData,
    lambda: C,
    xi_grid: &[f64],
    k: C,
    s0: C,
) -> Result<LayerReport> {
    if xi_grid.first() != Some(&0.0) || xi_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("xi grid must start at 0 and ascend".into()));
    }
    let c = jump.c;
    let u0 = jump.u_f + 1e-6;
    let b2 = k * c * (c * u0 - jump.p_f);
    let b1 = jump_graph(model, s0, lambda, jump, u0) * b2;
    let uu = -k * model.f_from_fold(u0);
    let y0 = [u0, uu.re, uu.im, b1.re, b1.im, b2.re, b2.im];
    let f = |_: f64, y: &[f64; 7]| {
        let ub = y[0];
        let u = C::new(y[1], y[2]);
        let du = -model.d(ub) / c * u;
        let d1 = (model.r_prime(ub) - lambda) * u;
        let d2 = c * u;
        [-model.f_from_fold(ub) / c, du.re, du.im, d1.re, d1.im, d2.re, d2.im]
    };
    // u starts at O(K·δ²) next to the fold and grows by many orders through the
    // layer, so the error control must be relative.
    let scale = k.norm() * model.f_from_fold(u0).abs();
    let o = ode::Options::with_tol(1e-12, 1e-14 * scale);
    let mut samples = Vec::with_capacity(xi_grid.len());
    let (mut t, mut y) = (0.0, y0);
    for &xi in xi_grid {
        if xi > t {
            y = *ode::solve(f, t, y, xi, &o, &[])?.last();
            t = xi;
        }
        samples.push(LayerSample {
            xi,
            ubar: y[0],
            u: C::new(y[1], y[2]),
            beta1: C::new(y[3], y[4]),
            beta2: C::new(y[5], y[6]),
        });
    }
    let kn = k.norm();
    let rel = |a: C, b: C| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE);
    let mut rep = LayerReport {
        samples: Vec::new(),
        identity_error: 0.0,
        quadrature_error: 0.0,
        g_error_minus: 0.0,
        g_error_plus: 0.0,
        g_error_scaled: 0.0,
        s_error: 0.0,
    };
    let w_max = samples.iter().map(|s| model.f_from_fold(s.ubar).abs()).fold(0.0, f64::max);
    for s in &samples {
        let w = -model.f_from_fold(s.ubar);
        rep.identity_error = rep.identity_error.max((s.u - k * w).norm() / kn);
        rep.quadrature_error = rep.quadrature_error.max((s.beta2 - b2 - c * k * c * (s.ubar - u0)).norm() / kn);
        let g = s.u / s.beta2;
        if w.abs() < 1e-8 * w_max {
            // g → 0 at the landing point; the relative error is 0/0 there.
            continue;
        }
        rep.g_error_minus = rep.g_error_minus.max(rel(g, C::new(w / (c * s.ubar - jump.p_f), 0.0)));
        rep.g_error_plus = rep.g_error_plus.max(rel(g, C::new(w / (c * s.ubar + jump.p_f), 0.0)));
        rep.g_error_scaled = rep.g_error_scaled.max(rel(g, C::new(w / (c * (c * s.ubar - jump.p_f)), 0.0)));
        let sg = jump_graph(model, s0, lambda, jump, s.ubar);
        rep.s_error = rep.s_error.max((s.beta1 / s.beta2 - sg).norm());
    }
    rep.samples = samples;
    Ok(rep)
}

/// State of the toy exchange problem `b' = -b`, `y' = εy`,
/// `db' = -db + ελ y dy`, `dy' = ε dy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ToyState {
    pub b: f64,
    pub y: f64,
    pub db: C,
    pub dy: C,
    pub eps: f64,
    pub lambda: C,
}

impl ToyState {
    /// Closed-form solution at time `t` from `self`.
    pub fn closed_form(&self, t: f64) -> ToyState {
        let e = self.eps;
        let forced = e * self.lambda * self.y * self.dy;
        let db = ((-t).exp() * (self.db * (1.0 + 2.0 * e) - forced) + (2.0 * e * t).exp() * forced) / (1.0 + 2.0 * e);
        ToyState { b: self.b * (-t).exp(), y: self.y * (e * t).exp(), db, dy: self.dy * (e * t).exp(), ..*self }
    }

    /// Distance from the slow manifold `{b = 0, db = ελ y dy/(1 + 2ε)}`.
    pub fn manifold_defect(&self) -> f64 {
        let e = self.eps;
        self.b.abs() + (self.db - e * self.lambda * self.y * self.dy / (1.0 + 2.0 * e)).norm()
    }

    /// Fubini–Study angle of `(db, dy)` to the slow direction `(ελy/(1 + ε), 1)`.
    pub fn subbundle_angle(&self) -> Result<f64> {
        let r = self.eps * self.lambda * self.y / (1.0 + self.eps);
        fubini_study_dist(&[self.db, self.dy], &[r, ONE])
    }

    fn pack(&self) -> [f64; 6] {
        [self.b, self.y, self.db.re, self.db.im, self.dy.re, self.dy.im]
    }

    fn unpack(&self, a: &[f64; 6]) -> ToyState {
        ToyState { b: a[0], y: a[1], db: C::new(a[2], a[3]), dy: C::new(a[4], a[5]), ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToyReport {
    pub t_end: f64,
    /// Max over samples of `|numeric - closed form| / max(1, |closed form|)`.
    pub closed_form_error: f64,
    /// Max manifold defect along the numeric trajectory.
    pub manifold_defect: f64,
    pub angle: f64,
    /// `2ε²|λ| y₀ / ((1 + 2ε)(1 + ε))`.
    pub bound: f64,
    pub bound_holds: bool,
}

/// Integrates the toy problem to `t_end` (absolute and relative tolerance
/// 1e-12), comparing with the closed form at 200 uniformly spaced times.
pub fn toy_exchange(ics: &ToyState, t_end: f64) -> Result<ToyReport> {
    let e = ics.eps;
    if !(e > 0.0 && e <= 0.1) {
        return Err(Error::Domain(format!("eps must lie in (0, 0.1], got {e}")));
    }
    if ics.b.abs() > 1.0 || ics.y.abs() > 1.0 || !(t_end > 0.0) {
        return Err(Error::Domain("initial condition outside the unit box or t_end <= 0".into()));
    }
    let lambda = ics.lambda;
    let f = |_: f64, a: &[f64; 6]| {
        let db = C::new(a[2], a[3]);
        let dy = C::new(a[4], a[5]);
        let ddb = -db + e * lambda * a[1] * dy;
        let ddy = e * dy;
        [-a[0], e * a[1], ddb.re, ddb.im, ddy.re, ddy.im]
    };
    let o = ode::Options::with_tol(1e-12, 1e-12);
    let n = 200;
    let (mut t, mut y) = (0.0, ics.pack());
    let mut err: f64 = 0.0;
    let mut defect = ics.manifold_defect();
    for i in 1..=n {
        let ti = t_end * i as f64 / n as f64;
        y = *ode::solve(f, t, y, ti, &o, &[])?.last();
        t = ti;
        let num = ics.unpack(&y);
        let ex = ics.closed_form(t);
        let d = num.pack().iter().zip(ex.pack()).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max);
        err = err.max(d);
        defect = defect.max(num.manifold_defect());
    }
    let angle = ics.unpack(&y).subbundle_angle()?;
    let bound = 2.0 * e * e * lambda.norm() * ics.y.abs() / ((1.0 + 2.0 * e) * (1.0 + e));
    Ok(ToyReport { t_end, closed_form_error: err, manifold_defect: defect, angle, bound, bound_holds: angle <= bound })
}
