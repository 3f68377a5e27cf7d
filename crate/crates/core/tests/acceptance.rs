//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line before asserting.
//!
//! Run with `cargo test -p curveflow-core --test acceptance -- --nocapture` to
//! see the report.

use std::f64::consts::PI;
use std::sync::OnceLock;

use curveflow_core::driver::{gamma_study, relocate, run, StudyAxis, Termination, TimeSeries};
use curveflow_core::geometry::{vertex_curvature, FlowParams, PolygonalCurve, SecondDiffScale};
use curveflow_core::gradients::{grad_area, grad_bending, grad_length, CurvePair};
use curveflow_core::schemes::gram_ratio;
use curveflow_core::shapes::{kubire, rectangle};
use curveflow_core::{FlowKind, Point2, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RELATIVE_RESIDUAL: f64 = 1e-6;
const MONOTONE_SLACK: f64 = 10.0 * RELATIVE_RESIDUAL;

fn report(criterion: u32, title: &str, ok: bool, detail: String) {
    println!("criterion {criterion} [{}] {title}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn relocated_kubire(n: usize) -> curveflow_core::Result<PolygonalCurve<f64>> {
    relocate(&kubire(n)?, 5.0, 1e-4, 0.1)
}

fn exam1_start() -> &'static PolygonalCurve<f64> {
    static START: OnceLock<PolygonalCurve<f64>> = OnceLock::new();
    START.get_or_init(|| relocated_kubire(30).expect("relocation of the 30-vertex test curve"))
}

fn params(alpha: f64) -> FlowParams<f64> {
    FlowParams::new(2.0, alpha, 1e-4)
}

fn exam1(alpha: f64, steps: usize) -> TimeSeries<f64> {
    run(exam1_start(), &RunConfig::new(FlowKind::Willmore, params(alpha), steps)).unwrap()
}

fn exam1_alpha50() -> &'static TimeSeries<f64> {
    static SERIES: OnceLock<TimeSeries<f64>> = OnceLock::new();
    SERIES.get_or_init(|| exam1(50.0, 3000))
}

fn exam3() -> &'static TimeSeries<f64> {
    static SERIES: OnceLock<TimeSeries<f64>> = OnceLock::new();
    SERIES.get_or_init(|| run(exam1_start(), &RunConfig::new(FlowKind::Helfrich, params(100.0), 100)).unwrap())
}

fn exam4() -> &'static TimeSeries<f64> {
    static SERIES: OnceLock<TimeSeries<f64>> = OnceLock::new();
    SERIES.get_or_init(|| {
        let mut config = RunConfig::new(FlowKind::Helfrich, params(100.0), 10_000);
        config.stop_epsilon = Some(1e-5);
        run(&rectangle(40, 2.0, 1.0, Point2::zero()).unwrap(), &config).unwrap()
    })
}

/// Largest per-step relative rise of the bending energy, starting from the initial curve.
fn worst_bending_rise(series: &TimeSeries<f64>) -> f64 {
    let mut previous = series.initial.expect("initial functionals").bending;
    let mut worst = f64::NEG_INFINITY;
    for d in &series.diagnostics {
        worst = worst.max((d.bending - previous) / previous.abs());
        previous = d.bending;
    }
    worst
}

/// Largest relative drift of length and area from the initial curve.
fn worst_drift(series: &TimeSeries<f64>) -> (f64, f64) {
    let f0 = series.initial.expect("initial functionals");
    series.diagnostics.iter().fold((0.0, 0.0), |(l, a), d| {
        (l.max((d.length - f0.length).abs() / f0.length), a.max((d.area - f0.area).abs() / f0.area))
    })
}

fn random_polygon(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2<f64>> {
    (0..n).map(|_| Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

#[test]
fn criterion_1_discrete_chain_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let limits = [1e-10, 1e-12, 1e-12];
    let mut worst = [0.0f64; 3];
    let mut rejected = 0usize;
    for n in [6usize, 12, 30, 64] {
        for scale in [SecondDiffScale::InvDuSquared, SecondDiffScale::InvDu] {
            let mut accepted = 0;
            while accepted < 200 {
                let (Ok(old), Ok(new)) = (
                    PolygonalCurve::new(random_polygon(&mut rng, n)),
                    PolygonalCurve::new(random_polygon(&mut rng, n)),
                ) else {
                    rejected += 1;
                    continue;
                };
                let Ok(pair) = CurvePair::new(&old, &new, scale) else {
                    rejected += 1;
                    continue;
                };
                let (Ok(d_b), Ok(d_l)) = (grad_bending(&pair, 2.0), grad_length(&pair)) else {
                    rejected += 1;
                    continue;
                };
                let d_a = grad_area(&pair);
                let step: Vec<_> = new.vertices().iter().zip(old.vertices()).map(|(a, b)| *a - *b).collect();
                let pairs = [pair.bending_energies(2.0), pair.lengths(), pair.areas()];
                for (k, grad) in [&d_b, &d_l, &d_a].into_iter().enumerate() {
                    let predicted: f64 =
                        grad.iter().zip(&step).zip(pair.weights()).map(|((g, s), w)| g.dot(*s) * w).sum();
                    let (f_old, f_new) = pairs[k];
                    let rel = (predicted - (f_new - f_old)).abs() / f_old.abs().max(f_new.abs());
                    worst[k] = worst[k].max(rel);
                }
                accepted += 1;
            }
        }
    }
    let ok = worst.iter().zip(&limits).all(|(w, l)| w <= l);
    report(
        1,
        "discrete chain rule on random pairs",
        ok,
        format!(
            "max relative defects B {:.2e}, L {:.2e}, A {:.2e} ({rejected} invalid draws)",
            worst[0], worst[1], worst[2]
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_willmore_dissipation() {
    let series = exam1_alpha50();
    let rise = worst_bending_rise(series);
    let curve = series.final_curve();
    let c = curve.centroid();
    let deviation = curve.vertices().iter().map(|v| ((*v - c).norm() - 0.5).abs()).fold(0.0, f64::max);
    let ok = series.termination == Termination::MaxSteps
        && series.steps_taken() == 3000
        && rise <= MONOTONE_SLACK
        && deviation <= 0.02;
    report(
        2,
        "Willmore dissipation and convergence to radius 1/c0",
        ok,
        format!(
            "{} after {} steps, worst relative rise {rise:.2e}, max radial deviation {deviation:.4}",
            series.termination.name(),
            series.steps_taken()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_vertex_concentration_contrast() {
    let without = exam1(0.0, 50);
    let collapsed_mesh = without.diagnostics.iter().any(|d| d.mesh_ratio < 0.05);
    let concentrated = collapsed_mesh || matches!(without.termination, Termination::SolverFailure { .. });
    let min_without = without.diagnostics.iter().map(|d| d.mesh_ratio).fold(1.0, f64::min);

    let with = exam1_alpha50();
    let min_with = with.diagnostics.iter().map(|d| d.mesh_ratio).fold(1.0, f64::min);
    let ok = concentrated && with.steps_taken() == 3000 && min_with >= 0.2;
    report(
        3,
        "vertex concentration without tangential velocity",
        ok,
        format!(
            "alpha=0: min mesh ratio {min_without:.4}, {}; alpha=50: min mesh ratio {min_with:.4} over {} steps",
            without.termination.name(),
            with.steps_taken()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_helfrich_conservation() {
    let series = exam3();
    let (dl, da) = worst_drift(series);
    let rise = worst_bending_rise(series);
    let ok = series.steps_taken() == 100 && dl <= 1e-5 && da <= 1e-5 && rise <= MONOTONE_SLACK;
    report(
        4,
        "Helfrich length and area conservation",
        ok,
        format!(
            "{} steps, max relative drift L {dl:.2e}, A {da:.2e}, worst bending rise {rise:.2e}",
            series.steps_taken()
        ),
    );
    assert!(ok);
}

/// Checks the dissipation identity on every accepted step, recomputing `D` from the curves.
fn dissipation_defects(series: &TimeSeries<f64>) -> (f64, f64, usize) {
    // Re-run the same steps, keeping each curve so D can be evaluated independently.
    let config = RunConfig { snapshot_every: 1, ..series.config.clone() };
    let full = run(&series.snapshots[0].1, &config).unwrap();
    let mut worst = 0.0f64;
    let mut min_d = f64::INFINITY;
    let mut previous = full.initial.unwrap().bending;
    let dt = config.params.dt;
    for (window, diag) in full.snapshots.windows(2).zip(&full.diagnostics) {
        let pair = CurvePair::new(&window[0].1, &window[1].1, config.params.second_diff).unwrap();
        let d = gram_ratio(
            &grad_bending(&pair, config.params.c0).unwrap(),
            &grad_length(&pair).unwrap(),
            &grad_area(&pair),
            pair.weights(),
        )
        .unwrap();
        min_d = min_d.min(d);
        worst = worst.max(((diag.bending - previous) / dt + d).abs() / (1.0 + d.abs()));
        previous = diag.bending;
    }
    (worst, min_d, full.diagnostics.len())
}

#[test]
fn criterion_5_helfrich_dissipation_identity() {
    let (w3, d3, n3) = dissipation_defects(exam3());
    let (w4, d4, n4) = dissipation_defects(exam4());
    let worst = w3.max(w4);
    let min_d = d3.min(d4);
    let ok = n3 + n4 > 0 && worst <= 1e-4 && min_d >= 0.0;
    report(
        5,
        "Helfrich dissipation identity",
        ok,
        format!("{} accepted steps, worst scaled defect {worst:.2e}, min D {min_d:.3e}", n3 + n4),
    );
    assert!(ok);
}

fn listing(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn criterion_6_gamma_trends() {
    let mut base = RunConfig::new(FlowKind::Helfrich, FlowParams::new(2.0, 100.0, 1e-5), 1_000_000);

    base.stop_epsilon = Some(1e-5);
    let dts = vec![1e-6, 2.5e-6, 5e-6, 7.5e-6, 1e-5];
    let by_dt = gamma_study(&base, &StudyAxis::Dt(dts), 50, relocated_kubire);

    base.stop_epsilon = Some(1e-4);
    let by_n = gamma_study(&base, &StudyAxis::Vertices(vec![30, 40, 50, 60, 70]), 50, relocated_kubire);

    let all_stopped = by_dt.iter().chain(&by_n).all(|r| r.termination == Termination::EpsilonStop);
    let abs = |rows: &[curveflow_core::driver::GammaRow<f64>]| -> Vec<f64> {
        rows.iter().map(|r| r.final_gamma.map_or(f64::NAN, f64::abs)).collect()
    };
    // Decreasing dt: read the dt axis from largest to smallest.
    let mut dt_trend = abs(&by_dt);
    dt_trend.reverse();
    let n_trend = abs(&by_n);
    let ok = all_stopped && non_increasing(&dt_trend) && non_increasing(&n_trend);
    report(
        6,
        "final |gamma| shrinks with dt and with N",
        ok,
        format!("|gamma| for dt 1e-5..1e-6: {}; for N 30..70: {}", listing(&dt_trend), listing(&n_trend)),
    );
    assert!(ok);
}

#[test]
fn criterion_7_curvature_oracle() {
    let mut worst = 0.0f64;
    for n in [4usize, 8, 16, 64, 256] {
        for radius in [0.5, 1.0, 2.0] {
            let vertices: Vec<_> = (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    Point2::new(radius * t.cos(), radius * t.sin())
                })
                .collect();
            let (k, _) = vertex_curvature(&vertices, SecondDiffScale::InvDu).unwrap();
            let expected = 2.0 / (n as f64 * radius * (1.0 + (2.0 * PI / n as f64).cos()));
            for ki in k {
                worst = worst.max((ki - expected).abs() / expected);
            }
        }
    }
    let ok = worst <= 1e-12;
    report(7, "regular N-gon curvature closed form", ok, format!("max relative error {worst:.2e}"));
    assert!(ok);
}

#[test]
fn criterion_8_gradient_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 16;
    let h = 1e-7;
    let c0 = 2.0;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let curve = PolygonalCurve::new(
            (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    let r = 1.0 + rng.gen_range(-0.15..0.15);
                    Point2::new(r * t.cos(), r * t.sin())
                })
                .collect(),
        )
        .unwrap();
        let scale = SecondDiffScale::default();
        let pair = CurvePair::new(&curve, &curve, scale).unwrap();
        let analytic = [grad_bending(&pair, c0).unwrap(), grad_length(&pair).unwrap(), grad_area(&pair)];
        let evaluate = |c: &PolygonalCurve<f64>| {
            let p = CurvePair::new(c, c, scale).unwrap();
            [p.bending_energies(c0).1, p.lengths().1, p.areas().1]
        };
        let weights = pair.weights().to_vec();
        for i in 0..n {
            for axis in 0..2 {
                let shifted = |sign: f64| {
                    let mut v = curve.vertices().to_vec();
                    if axis == 0 {
                        v[i].x += sign * h;
                    } else {
                        v[i].y += sign * h;
                    }
                    evaluate(&PolygonalCurve::new(v).unwrap())
                };
                let (plus, minus) = (shifted(1.0), shifted(-1.0));
                for k in 0..3 {
                    let fd = (plus[k] - minus[k]) / (2.0 * h) / weights[i];
                    let g = if axis == 0 { analytic[k][i].x } else { analytic[k][i].y };
                    worst = worst.max((fd - g).abs());
                }
            }
        }
    }
    let ok = worst <= 1e-5;
    report(8, "discrete gradients match finite differences", ok, format!("max abs difference {worst:.2e}"));
    assert!(ok);
}

#[test]
fn criterion_9_rectangle_epsilon_stop() {
    let series = exam4();
    let (dl, da) = worst_drift(series);
    let steps = series.steps_taken();
    let ok =
        series.termination == Termination::EpsilonStop && (1900..=3200).contains(&steps) && dl <= 1e-5 && da <= 1e-5;
    let why = match &series.termination {
        Termination::SolverFailure { message, .. } | Termination::GeometryFailure { message, .. } => {
            format!(" ({message})")
        }
        _ => String::new(),
    };
    report(
        9,
        "Helfrich on the 2x1 rectangle stops by the energy criterion",
        ok,
        format!("{}{why} after {steps} steps, max relative drift L {dl:.2e}, A {da:.2e}", series.termination.name()),
    );
    assert!(ok);
}
