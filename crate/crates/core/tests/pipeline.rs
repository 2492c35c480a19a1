use std::path::PathBuf;

use proptest::prelude::*;

use rnp_core::cho::{cho_run, ChoRecord};
use rnp_core::config::{load_config, parse_config, render, ModelConfig};
use rnp_core::diagnostics::{run_collect, twin_run_stability, weighted_probes, Status};
use rnp_core::grid::Grid;
use rnp_core::output::{read_csv, CsvSink};
use rnp_core::reactions::ReactionCoeffs;
use rnp_core::stepper::{run, SolverConfig};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn small(cfg: SolverConfig, n: usize, t_final: f64) -> SolverConfig {
    let grid = Grid::unit_square(n).unwrap();
    SolverConfig {
        grid,
        tau: rnp_core::stepper::default_tau(&grid),
        t_final,
        ..cfg
    }
}

fn rnp(name: &str) -> SolverConfig {
    match load_config(&shipped(name)).unwrap().model {
        ModelConfig::Rnp(c) => c,
        ModelConfig::Cho(_) => panic!("expected [rnp]"),
    }
}

#[test]
fn shipped_configs_round_trip_through_render() {
    for name in ["baseline.conf", "baseline_tilde.conf", "cho.conf"] {
        let parsed = load_config(&shipped(name)).unwrap();
        assert_eq!(parse_config(&render(&parsed)).unwrap(), parsed, "{name}");
    }
}

#[test]
fn csv_sink_matches_in_memory_records() {
    let cfg = small(rnp("baseline.conf"), 16, 0.003);
    let dir = tempfile::tempdir().unwrap();
    let mut sink = CsvSink::create(dir.path()).unwrap();
    let out = run(&cfg, &mut sink).unwrap();
    let kept = sink.finish().unwrap();
    assert!(out.invariants.all_passed());
    let back = read_csv(&dir.path().join("diagnostics.csv")).unwrap();
    assert_eq!(back.len(), kept.len());
    for (a, b) in kept.iter().zip(&back) {
        for (x, y) in a.to_row().iter().zip(b.to_row().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    let (recs, _) = run_collect(&cfg).unwrap();
    assert_eq!(recs, kept);
}

#[test]
fn twin_run_reports_a_finite_ratio() {
    let cfg = small(rnp("baseline_tilde.conf"), 32, 0.02);
    let rep = twin_run_stability(&cfg, 0.01, 1e-6).unwrap();
    assert!(rep.d_sigma > 0.0 && rep.d_sigma.is_finite());
    assert!(rep.ratio.is_finite() && rep.ratio >= 1.0);
    assert!(rep.distance.iter().all(|&(t, d)| t >= 0.01 && d.is_finite()));
}

#[test]
fn weighted_probes_stay_finite_from_the_pure_phase() {
    let cfg = small(rnp("baseline.conf"), 16, 0.01);
    let (recs, out) = run_collect(&cfg).unwrap();
    let p = weighted_probes(&recs, cfg.probe_alpha, cfg.grid.area()).unwrap();
    assert!(p.sup_half_gradmu.is_finite() && p.sup_alpha_mu.is_finite());
    let bounds = out
        .invariants
        .families
        .iter()
        .find(|f| f.name == "mean_bounds")
        .unwrap();
    assert_eq!(bounds.status, Status::Pass, "{}", bounds.detail);
}

#[test]
fn shipped_cho_config_relaxes_toward_target() {
    let ModelConfig::Cho(mut cfg) = load_config(&shipped("cho.conf")).unwrap().model else {
        panic!("expected [cho]")
    };
    cfg.grid = Grid::unit_square(8).unwrap();
    let mut recs: Vec<ChoRecord> = Vec::new();
    let out = cho_run(&cfg, &mut recs).unwrap();
    assert!(out.max_recursion_error <= 1e-12);
    let last = recs.last().unwrap();
    assert!((last.t - cfg.t_final).abs() < 1e-12);
    assert!((last.mean - last.mean_continuum).abs() <= 2.0 * cfg.tau);
    assert!(recs.windows(2).all(|w| w[1].mean > w[0].mean && w[1].mean < cfg.c_oono));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conservation_holds_for_any_valid_rates(
        c1 in 0.2..5.0f64,
        c3 in 0.2..5.0f64,
        share in 0.01..0.9f64,
        split in 0.05..0.95f64,
        seed in 0u64..1000,
    ) {
        let room = share * c1.min(c3);
        let coeffs = ReactionCoeffs { c1, c2: room * split, c3, c4: room * (1.0 - split) };
        let mut cfg = small(SolverConfig::default(), 8, 0.0);
        cfg.coeffs = coeffs;
        cfg.seed = seed;
        cfg.initial.p0_amp = 0.05 * (1.0 - coeffs.threshold());
        cfg.initial.p0_noise = 0.05 * (1.0 - coeffs.threshold());
        cfg.t_final = 20.0 * cfg.tau;
        let (recs, out) = run_collect(&cfg).unwrap();
        let first = &recs[0].totals;
        for r in &recs {
            prop_assert!(r.totals.max_drift(first) <= 1e-12);
        }
        let fam = out.invariants.families.iter().find(|f| f.name == "mean_ode").unwrap();
        prop_assert_eq!(fam.status, Status::Pass);
    }
}
