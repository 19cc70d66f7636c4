//! Command execution: computes, writes artifacts, and records the manifest.

use std::io;
use std::time::Instant;

use num_complex::Complex64 as C;
use serde::Serialize;
use wavespec::contour::SpectralContour;
use wavespec::espec::{EndState, EssentialSpectrum, Order, SectorialityReport};
use wavespec::full_lin::{self, ConvergenceOptions, SpeedMode, ToyReport, ToyState};
use wavespec::model::ModelFunctions;
use wavespec::slow_evans::{EvansConfig, Pole, SlowEvans};
use wavespec::wave::{self, FullShootOptions, HypothesisReport, ShootOptions, SingularOrbit};

use crate::config::{Command, EvansMode, RunConfig, Speed, SINGULAR_BRACKET};
use crate::output::{Artifacts, Cell, Csv, Derived, Manifest, SpeedAt, Status};
use crate::verify;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
enum Failure {
    Numeric(wavespec::Error),
    Io(io::Error),
    /// Invariant suites that did not pass.
    Verify(Vec<String>),
}

impl From<wavespec::Error> for Failure {
    fn from(e: wavespec::Error) -> Self {
        Failure::Numeric(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Numeric(e) => write!(f, "numerical failure: {e}"),
            Failure::Io(e) => write!(f, "i/o failure: {e}"),
            Failure::Verify(s) => write!(f, "suites failed: {}", s.join(", ")),
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    model: ModelFunctions,
    arts: Artifacts,
    derived: Derived,
    eigenvalues: Vec<f64>,
    poles: Vec<f64>,
}

/// Runs one configuration and returns the process exit code: 0 on success,
/// 1 on numerical or i/o failure (diagnostic in the manifest).
pub fn run(cfg: &RunConfig) -> u8 {
    let arts = match Artifacts::create(&cfg.output_dir) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: output directory {} is not writable: {e}", cfg.output_dir.display());
            return EXIT_FAILURE;
        }
    };
    let start = Instant::now();
    let model = ModelFunctions::standard();
    let derived = Derived { u_f: model.u_f(), u_j: model.u_j(), ..Derived::default() };
    let mut ctx = Ctx { cfg, model, arts, derived, eigenvalues: Vec::new(), poles: Vec::new() };
    let result = match &cfg.command {
        Command::Wave { full, eps } => wave_cmd(&mut ctx, *full, *eps),
        Command::Espec { eps, order, a, k_max, samples } => espec_cmd(&mut ctx, *eps, *order, *a, *k_max, *samples),
        Command::Evans(mode) => evans_cmd(&mut ctx, *mode),
        Command::Converge { lambda, eps_list, speed } => converge_cmd(&mut ctx, *lambda, eps_list, *speed),
        Command::Verify => verify_cmd(&mut ctx),
    };
    let (status, diagnostic) = match &result {
        Ok(()) => (Status::Ok, None),
        Err(f) => {
            eprintln!("error: {f}");
            (Status::Failed, Some(f.to_string()))
        }
    };
    let Ctx { arts, derived, eigenvalues, poles, .. } = ctx;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        status,
        diagnostic,
        config: cfg.clone(),
        derived,
        eigenvalues,
        poles,
        files: arts.files.clone(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    if let Err(e) = arts.finish(&manifest) {
        eprintln!("error: writing the manifest failed: {e}");
        return EXIT_FAILURE;
    }
    if result.is_ok() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

impl Ctx<'_> {
    fn shoot_options(&self) -> ShootOptions {
        ShootOptions {
            rtol: self.cfg.rtol,
            atol: self.cfg.atol,
            defect_tol: self.cfg.shoot_tol,
            ..ShootOptions::default()
        }
    }

    /// The singular orbit; fills the derived constants. For `wave --full` the
    /// configured bracket belongs to the ε > 0 shooting, so `c₀` (the first
    /// guess) is bracketed by the singular default.
    fn orbit(&mut self) -> Result<SingularOrbit, Failure> {
        let bracket = match self.cfg.command {
            Command::Wave { full: true, .. } => SINGULAR_BRACKET,
            _ => self.cfg.c_bracket,
        };
        let orbit = wave::find_c0(&self.model, bracket, &self.shoot_options())?;
        self.derived.c0 = Some(orbit.c0);
        self.derived.p_f = Some(orbit.p_f);
        self.derived.v_f = Some(orbit.v_f);
        Ok(orbit)
    }

    fn evans(&mut self) -> Result<SlowEvans, Failure> {
        let orbit = self.orbit()?;
        let config = EvansConfig {
            section: self.cfg.section,
            rtol: self.cfg.rtol,
            atol: self.cfg.atol,
            beta: self.cfg.beta,
            ..EvansConfig::default()
        };
        Ok(SlowEvans::new(orbit, config)?)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.cfg.rtol, atol: self.cfg.atol, shoot_tol: self.cfg.shoot_tol }
    }
}

#[derive(Serialize)]
struct Tolerances {
    rtol: f64,
    atol: f64,
    shoot_tol: f64,
}

#[derive(Serialize)]
struct SingularReport {
    c0: f64,
    p_f: f64,
    v_f: f64,
    defect: f64,
    jump_fiber: (f64, f64),
    hypotheses: HypothesisReport,
    tolerances: Tolerances,
}

#[derive(Serialize)]
struct FullWaveReport {
    eps: f64,
    c: f64,
    c0: f64,
    endpoint_gaps: (f64, f64),
    midpoint_residual: f64,
    grid_points: usize,
    tolerances: Tolerances,
}

fn wave_cmd(ctx: &mut Ctx, full: bool, eps: f64) -> Result<(), Failure> {
    let orbit = ctx.orbit()?;
    if !full {
        let hyp = wave::check_hypotheses(&orbit, &ctx.shoot_options())?;
        for (name, seg) in
            [("wave_singular_left.csv", &orbit.left_segment), ("wave_singular_right.csv", &orbit.right_segment)]
        {
            let mut t = Csv::new(&["zeta", "U", "P"]);
            for (z, s) in seg.zeta.iter().zip(&seg.states) {
                t.row(&[Cell::F(*z), Cell::F(s.u), Cell::F(s.p)]);
            }
            ctx.arts.csv(name, &t)?;
        }
        let report = SingularReport {
            c0: orbit.c0,
            p_f: orbit.p_f,
            v_f: orbit.v_f,
            defect: orbit.defect,
            jump_fiber: orbit.jump_fiber,
            hypotheses: hyp,
            tolerances: ctx.tolerances(),
        };
        ctx.arts.json("wave.json", &report)?;
        println!("c0 = {:.12}, p_F = {:.12}, v_F = {:.12}", orbit.c0, orbit.p_f, orbit.v_f);
        return Ok(());
    }
    let opts = FullShootOptions {
        bracket: ctx.cfg.c_bracket,
        rtol: ctx.cfg.rtol,
        atol: ctx.cfg.atol,
        c_tol: ctx.cfg.shoot_tol,
        ..FullShootOptions::default()
    };
    let (c, profile) = wave::find_c_eps(&ctx.model, eps, orbit.c0, &opts)?;
    ctx.derived.c_eps.push(SpeedAt { eps, c });
    let mut t = Csv::new(&["zeta", "u", "p", "v"]);
    for (z, s) in profile.grid.iter().zip(&profile.states) {
        t.row(&[Cell::F(*z), Cell::F(s.u), Cell::F(s.p), Cell::F(s.v)]);
    }
    ctx.arts.csv("wave_full.csv", &t)?;
    let report = FullWaveReport {
        eps,
        c,
        c0: orbit.c0,
        endpoint_gaps: profile.endpoint_gaps(&ctx.model),
        midpoint_residual: profile.midpoint_residual(&ctx.model),
        grid_points: profile.grid.len(),
        tolerances: ctx.tolerances(),
    };
    ctx.arts.json("wave.json", &report)?;
    println!("c({eps:e}) = {c:.12} (c0 = {:.12})", orbit.c0);
    Ok(())
}

#[derive(Serialize)]
struct EspecReport {
    c: f64,
    eps: f64,
    order: u8,
    a: f64,
    /// `-D/R'` at each end state.
    epsilon_star: [(EndState, f64); 2],
    sectoriality: Vec<SectorialityReport>,
}

fn espec_cmd(ctx: &mut Ctx, eps: f64, order: u8, a: f64, k_max: f64, samples: usize) -> Result<(), Failure> {
    let orbit = ctx.orbit()?;
    let spec = EssentialSpectrum::new(ctx.model.clone(), orbit.c0);
    let ord = if order == 4 { Order::Fourth } else { Order::Third };
    let ends = [EndState::Minus, EndState::Plus];
    let mut t = Csv::new(&["k", "re_lambda", "im_lambda", "end", "order"]);
    for end in ends {
        for s in spec.border_polyline(eps, end, ord, a, (-k_max, k_max), samples) {
            t.row(&[
                Cell::F(s.k),
                Cell::F(s.lambda.re),
                Cell::F(s.lambda.im),
                Cell::S(end.label()),
                Cell::I(order as i64),
            ]);
        }
    }
    ctx.arts.csv("espec_borders.csv", &t)?;
    let report = EspecReport {
        c: orbit.c0,
        eps,
        order,
        a,
        epsilon_star: ends.map(|e| (e, spec.epsilon_star(e))),
        sectoriality: ends.iter().map(|&e| spec.sectoriality(eps, e, ord, a)).collect(),
    };
    ctx.arts.json("espec.json", &report)?;
    for s in &report.sectoriality {
        println!("{}: sectorial = {}, asymptote = {:?}", s.end.label(), s.sectorial, s.asymptote);
    }
    Ok(())
}

#[derive(Serialize)]
struct EvansPointReport {
    lambda: C,
    value: C,
    tolerances: Tolerances,
}

#[derive(Serialize)]
struct EvansContourReport {
    center: C,
    radius: f64,
    n: usize,
    winding: i32,
    raw_winding: f64,
    samples: usize,
    tolerances: Tolerances,
}

#[derive(Serialize)]
struct EigenWinding {
    lambda: f64,
    radius: f64,
    winding: i32,
}

#[derive(Serialize)]
struct EvansScanReport {
    interval: (f64, f64),
    eigenvalues: Vec<f64>,
    poles: Vec<Pole>,
    windings: Vec<EigenWinding>,
    root_tol: f64,
    tolerances: Tolerances,
}

const EVANS_HEADER: [&str; 4] = ["re_lambda", "im_lambda", "re_E", "im_E"];

fn evans_cmd(ctx: &mut Ctx, mode: EvansMode) -> Result<(), Failure> {
    let ev = ctx.evans()?;
    let mut t = Csv::new(&EVANS_HEADER);
    match mode {
        EvansMode::Point { lambda } => {
            let s = ev.evans(lambda)?;
            t.row(&[Cell::F(lambda.re), Cell::F(lambda.im), Cell::F(s.value.re), Cell::F(s.value.im)]);
            ctx.arts.csv("evans_point.csv", &t)?;
            ctx.arts.json("evans.json", &EvansPointReport { lambda, value: s.value, tolerances: ctx.tolerances() })?;
            println!("E({lambda}) = {}", s.value);
        }
        EvansMode::Contour { center, radius, n } => {
            let w = ev.winding(&SpectralContour::circle(center, radius, n))?;
            for s in &w.samples {
                t.row(&[Cell::F(s.lambda.re), Cell::F(s.lambda.im), Cell::F(s.value.re), Cell::F(s.value.im)]);
            }
            ctx.arts.csv("evans_contour.csv", &t)?;
            let report = EvansContourReport {
                center,
                radius,
                n,
                winding: w.winding,
                raw_winding: w.raw,
                samples: w.samples.len(),
                tolerances: ctx.tolerances(),
            };
            ctx.arts.json("evans.json", &report)?;
            println!("winding on |λ - {center}| = {radius}: {}", w.winding);
        }
        EvansMode::Scan { a, b } => {
            let scan = ev.find_real_eigenvalues(a, b)?;
            for &(x, e) in &scan.samples {
                t.row(&[Cell::F(x), Cell::F(0.0), Cell::F(e), Cell::F(0.0)]);
            }
            ctx.arts.csv("evans_scan.csv", &t)?;
            // Confirm each eigenvalue by a winding on a circle that excludes its neighbours.
            let mut marks: Vec<f64> = scan.eigenvalues.clone();
            marks.extend(scan.poles.iter().map(|p| p.lambda));
            let mut windings = Vec::new();
            for &x in &scan.eigenvalues {
                let gap = marks.iter().filter(|&&y| y != x).map(|y| (y - x).abs()).fold(f64::INFINITY, f64::min);
                let radius = ev.config.pole_radius.min(0.5 * gap);
                let w = ev.winding(&SpectralContour::circle(C::new(x, 0.0), radius, 32))?;
                windings.push(EigenWinding { lambda: x, radius, winding: w.winding });
            }
            ctx.eigenvalues = scan.eigenvalues.clone();
            ctx.poles = scan.poles.iter().map(|p| p.lambda).collect();
            let report = EvansScanReport {
                interval: scan.interval,
                eigenvalues: scan.eigenvalues,
                poles: scan.poles,
                windings,
                root_tol: ev.config.root_tol,
                tolerances: ctx.tolerances(),
            };
            ctx.arts.json("evans.json", &report)?;
            println!("eigenvalues in [{a}, {b}]: {:?}", report.eigenvalues);
            println!("poles: {:?}", ctx.poles);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceEntry {
    eps: f64,
    c: f64,
    sup_distance: f64,
    argmax_ubar: f64,
    reached: f64,
}

#[derive(Serialize)]
struct ToyEntry {
    eps: f64,
    #[serde(flatten)]
    report: ToyReport,
}

#[derive(Serialize)]
struct ConvergeReport {
    lambda: C,
    speed: Speed,
    c0: f64,
    runs: Vec<ConvergenceEntry>,
    toy_exchange: Vec<ToyEntry>,
    tolerances: Tolerances,
}

fn converge_cmd(ctx: &mut Ctx, lambda: C, eps_list: &[f64], speed: Speed) -> Result<(), Failure> {
    let orbit = ctx.orbit()?;
    let opts = ConvergenceOptions {
        mode: match speed {
            Speed::Frozen => SpeedMode::FrozenC0,
            Speed::Computed => SpeedMode::Computed,
        },
        rtol: ctx.cfg.rtol,
        atol: ctx.cfg.atol,
        ..ConvergenceOptions::default()
    };
    let runs = full_lin::convergence_run(&ctx.model, lambda, eps_list, &orbit, &opts)?;
    let reduced = full_lin::reduced_rows(&orbit, lambda, &opts, 2 * opts.samples)?;
    let mut t = Csv::new(&["ubar", "re_S", "im_S", "eps"]);
    for r in reduced.iter().chain(runs.iter().flat_map(|r| &r.rows)) {
        t.row(&[Cell::F(r.ubar), Cell::F(r.s.re), Cell::F(r.s.im), Cell::F(r.eps)]);
    }
    ctx.arts.csv("converge_curves.csv", &t)?;
    if speed == Speed::Computed {
        ctx.derived.c_eps = runs.iter().map(|r| SpeedAt { eps: r.eps, c: r.c }).collect();
    }
    // The toy exchange problem at the same ε values, observed at t = 1/ε.
    let mut toy = Vec::new();
    for &eps in eps_list {
        let ics = ToyState { b: 0.5, y: 0.5, db: C::new(0.3, 0.0), dy: C::new(0.4, 0.0), eps, lambda };
        toy.push(ToyEntry { eps, report: full_lin::toy_exchange(&ics, 1.0 / eps)? });
    }
    for r in &runs {
        println!("eps = {:e}: sup distance {:.6e} (window reached ubar = {:.4})", r.eps, r.sup_distance, r.reached);
    }
    let report = ConvergeReport {
        lambda,
        speed,
        c0: orbit.c0,
        runs: runs
            .iter()
            .map(|r| ConvergenceEntry {
                eps: r.eps,
                c: r.c,
                sup_distance: r.sup_distance,
                argmax_ubar: r.argmax_ubar,
                reached: r.reached,
            })
            .collect(),
        toy_exchange: toy,
        tolerances: ctx.tolerances(),
    };
    ctx.arts.json("converge.json", &report)?;
    Ok(())
}

fn verify_cmd(ctx: &mut Ctx) -> Result<(), Failure> {
    let results = verify::run_suites(ctx.cfg);
    println!("{:<12} {:<6} detail", "suite", "result");
    for r in &results {
        println!("{:<12} {:<6} {}", r.suite, if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
    if let Some(c0) = results.iter().find_map(|r| r.c0) {
        ctx.derived.c0 = Some(c0);
    }
    ctx.arts.json("verify.json", &results)?;
    let failed: Vec<String> = results.iter().filter(|r| !r.pass).map(|r| r.suite.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(failed))
    }
}
