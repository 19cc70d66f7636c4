//! Configuration layering: defaults, config file, flags, environment.

use std::fs;
use std::path::PathBuf;

use num_complex::Complex64 as C;
use wavespec_cli::config::{parse_config, Command, EvansMode, Speed, UsageError, DEFAULT_OUT};

fn parse(args: &[&str]) -> Result<wavespec_cli::config::RunConfig, UsageError> {
    parse_config(std::iter::once("wavespec").chain(args.iter().copied()), None)
}

#[test]
fn verify_defaults_round_trip() {
    let cfg = parse(&["verify"]).unwrap();
    assert_eq!(cfg.command, Command::Verify);
    assert_eq!((cfg.rtol, cfg.atol, cfg.shoot_tol), (1e-10, 1e-12, 1e-12));
    assert_eq!(cfg.c_bracket, (0.19, 0.23));
    assert_eq!((cfg.beta, cfg.section), (-0.95, 0.95));
    assert_eq!(cfg.output_dir, PathBuf::from(DEFAULT_OUT));
}

#[test]
fn command_defaults() {
    assert_eq!(parse(&["wave"]).unwrap().command, Command::Wave { full: false, eps: 0.0 });
    let full = parse(&["wave", "--full"]).unwrap();
    assert_eq!(full.command, Command::Wave { full: true, eps: 1e-3 });
    assert_eq!(full.c_bracket, (0.17, 0.25));
    assert_eq!(
        parse(&["espec"]).unwrap().command,
        Command::Espec { eps: 0.1, order: 3, a: 1.0, k_max: 100.0, samples: 2001 }
    );
    assert_eq!(
        parse(&["evans"]).unwrap().command,
        Command::Evans(EvansMode::Contour { center: C::new(0.0, 0.0), radius: 0.03, n: 32 })
    );
    assert_eq!(
        parse(&["converge"]).unwrap().command,
        Command::Converge { lambda: C::new(15.0, 0.0), eps_list: vec![1e-2, 3e-3, 1e-3], speed: Speed::Frozen }
    );
}

#[test]
fn evans_modes_and_complex_values() {
    assert_eq!(
        parse(&["evans", "--lambda", "-0.5+0.25i"]).unwrap().command,
        Command::Evans(EvansMode::Point { lambda: C::new(-0.5, 0.25) })
    );
    assert_eq!(
        parse(&["evans", "--contour-center", "-0.4", "--contour-radius", "0.48", "--n", "64"]).unwrap().command,
        Command::Evans(EvansMode::Contour { center: C::new(-0.4, 0.0), radius: 0.48, n: 64 })
    );
    assert_eq!(
        parse(&["evans", "--scan", "-0.95", "0.3"]).unwrap().command,
        Command::Evans(EvansMode::Scan { a: -0.95, b: 0.3 })
    );
}

#[test]
fn file_then_flags_then_defaults() {
    let dir = tempfile::TempDir::new().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "eps_list = 1e-2, 1e-3\nspeed = computed\nrtol = 1e-9\nbeta = -0.5\noutput_dir = from-file\n")
        .unwrap();
    let p = path.to_str().unwrap();
    let cfg = parse(&["converge", "--config", p, "--rtol", "1e-8"]).unwrap();
    assert_eq!(cfg.rtol, 1e-8);
    assert_eq!(cfg.beta, -0.5);
    assert_eq!(cfg.atol, 1e-12);
    assert_eq!(cfg.output_dir, PathBuf::from("from-file"));
    assert_eq!(
        cfg.command,
        Command::Converge { lambda: C::new(15.0, 0.0), eps_list: vec![1e-2, 1e-3], speed: Speed::Computed }
    );
}

#[test]
fn output_dir_precedence() {
    let env = Some(PathBuf::from("from-env"));
    let cfg = parse_config(["wavespec", "verify"], env.clone()).unwrap();
    assert_eq!(cfg.output_dir, PathBuf::from("from-env"));
    let cfg = parse_config(["wavespec", "verify", "-o", "flag"], env).unwrap();
    assert_eq!(cfg.output_dir, PathBuf::from("flag"));
}

#[test]
fn invalid_values_are_usage_errors() {
    for args in [
        &["wave", "--full", "--eps", "0"][..],
        &["wave", "--full", "--eps", "0.02"],
        &["evans", "--n", "15"],
        &["verify", "--beta", "-1"],
        &["verify", "--section", "0.8"],
        &["verify", "--atol", "0"],
        &["espec", "--k-max", "0"],
        &["converge", "--eps-list", "1e-2,1e-2"],
    ] {
        assert!(matches!(parse(args), Err(UsageError::Invalid(_))), "{args:?}");
    }
    assert!(matches!(parse(&["evans", "--n", "x"]), Err(UsageError::Clap(_))));
}
