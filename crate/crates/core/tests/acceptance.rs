//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use md1d::diagnostics::{diagnose, total_charge, ReportOptions};
use md1d::dirac_step::SpinorStepConfig;
use md1d::experiments::{convergence_study, mollification_study, run_simulation, stability_study, DataSpec, Simulation, Window};
use md1d::initial_data::{preset, PresetKind, PresetParams};
use md1d::wave_step::{dalembert_eval, first_step, leapfrog_wave, ConeQuadrature};
use md1d::{make_grid, Boundary, GridSpec, InitialData};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn gaussian() -> PresetParams {
    PresetParams {
        amplitude_u: 1.0,
        amplitude_v: 0.6,
        center: 0.0,
        width: 0.5,
        momentum: 2.0,
        gauge_amplitude: 0.5,
        gauge_width: 1.0,
        gauss_law: false,
    }
}

fn boxed() -> PresetParams {
    PresetParams {
        width: 1.0,
        ..gaussian()
    }
}

fn uniform() -> PresetParams {
    PresetParams {
        amplitude_u: 0.8,
        amplitude_v: 0.4,
        gauge_amplitude: 0.3,
        ..Default::default()
    }
}

/// Preset corpus: (name, kind, params, boundary).
fn corpus() -> Vec<(&'static str, PresetKind, PresetParams, Boundary)> {
    vec![
        ("gaussian", PresetKind::GaussianPacket, gaussian(), Boundary::ZeroInflow),
        ("box", PresetKind::Box, boxed(), Boundary::ZeroInflow),
        ("uniform", PresetKind::Uniform, uniform(), Boundary::Periodic),
    ]
}

const MASSES: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

fn corpus_grid(boundary: Boundary, dx: f64) -> GridSpec {
    match boundary {
        Boundary::ZeroInflow => make_grid(-6.0, 6.0, dx, 2.0, boundary).unwrap(),
        Boundary::Periodic => make_grid(-2.0, 2.0 - dx, dx, 2.0, boundary).unwrap(),
    }
}

/// Max relative charge drift of a streamed run.
fn streamed_drift(data: &InitialData, grid: &GridSpec, cfg: SpinorStepConfig) -> f64 {
    let mut sim = Simulation::new(data, grid, cfg).unwrap();
    let q0 = total_charge(sim.spinor(), grid);
    let mut worst = 0.0f64;
    for _ in 0..grid.nt {
        sim.advance().unwrap();
        worst = worst.max((total_charge(sim.spinor(), grid) - q0).abs() / q0);
    }
    worst
}

fn periodic_2048() -> GridSpec {
    let dx = 1.0 / 64.0;
    let g = make_grid(-16.0, -16.0 + 2047.0 * dx, dx, 2048.0 * dx, Boundary::Periodic).unwrap();
    assert_eq!((g.nx, g.nt), (2048, 2048));
    g
}

fn charge_conservation() -> Outcome {
    let g = periodic_2048();
    let cases: Vec<(&str, PresetKind, PresetParams, f64)> = [0.0, 1.0]
        .iter()
        .flat_map(|&m| {
            [
                ("uniform", PresetKind::Uniform, uniform(), m),
                ("gaussian", PresetKind::GaussianPacket, gaussian(), m),
            ]
        })
        .collect();
    let drifts: Vec<f64> = cases
        .par_iter()
        .map(|(_, k, p, m)| streamed_drift(&preset(*k, p, &g).unwrap(), &g, SpinorStepConfig::new(*m).unwrap()))
        .collect();
    let worst = drifts.iter().fold(0.0f64, |a, b| a.max(*b));
    (worst <= 1e-12, format!("max relative drift {worst:.2e} (<= 1e-12), nx = nt = 2048"))
}

fn massless_transport() -> Outcome {
    let g = make_grid(-6.0, 6.0, 1.0 / 64.0, 2.0, Boundary::ZeroInflow).unwrap();
    let params = PresetParams {
        gauge_amplitude: 1.5,
        ..gaussian()
    };
    let data = preset(PresetKind::GaussianPacket, &params, &g).unwrap();
    let h = run_simulation(&data, &g, 0.0).unwrap();
    let mut worst = 0.0f64;
    for (k, s) in h.spinors.iter().enumerate() {
        for i in 0..g.nx {
            if i >= k {
                worst = worst.max((s.u[i].norm() - data.u0[i - k].norm()).abs());
            }
            if i + k < g.nx {
                worst = worst.max((s.v[i].norm() - data.v0[i + k].norm()).abs());
            }
        }
    }
    let max_a = h.gauges.iter().flat_map(|a| a.aplus.iter().chain(&a.aminus)).fold(0.0f64, |m, x| m.max(x.abs()));
    (worst <= 1e-12, format!("max ||u|-|u0(x-t)|| {worst:.2e} (<= 1e-12) with sup|A| = {max_a:.2}"))
}

/// Sum of a few random modes on `[0, 2]`.
fn random_profile(rng: &mut StdRng, modes: usize) -> impl Fn(f64, f64) -> f64 {
    let c: Vec<(f64, f64, f64, f64)> = (1..=modes)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..6.3), rng.random_range(0.0..6.3), rng.random_range(0.0..3.0)))
        .collect();
    move |x, t| {
        c.iter()
            .enumerate()
            .map(|(k, (a, p, q, w))| a * ((k + 1) as f64 * x + p).sin() * (w * t + q).cos() / (k + 1) as f64)
            .sum()
    }
}

fn wave_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for nx in [128usize, 256, 512] {
        let dx = 2.0 / (nx - 1) as f64;
        let nt = nx / 4;
        let g = make_grid(0.0, 2.0, dx, nt as f64 * dx, Boundary::ZeroInflow).unwrap();
        let a0f = random_profile(&mut rng, 6);
        let a1f = random_profile(&mut rng, 6);
        let sf = random_profile(&mut rng, 6);
        let a0: Vec<f64> = (0..nx).map(|i| a0f(g.x(i), 0.0)).collect();
        let a1: Vec<f64> = (0..nx).map(|i| a1f(g.x(i), 0.0)).collect();
        let src: Vec<Vec<f64>> = (0..=nt).map(|k| (0..nx).map(|i| sf(g.x(i), g.t(k))).collect()).collect();
        let mut levels = vec![a0.clone(), first_step(&a0, &a1, &src[0], &g).unwrap()];
        for k in 1..nt {
            let next = leapfrog_wave(&levels[k - 1], &levels[k], &src[k], &g).unwrap();
            levels.push(next);
        }
        for level in [nt / 2, nt] {
            for node in level..nx - level {
                let d = dalembert_eval(node, level, &a0, &a1, &src, &g, ConeQuadrature::Lattice).unwrap();
                worst = worst.max((d - levels[level][node]).abs());
            }
        }
    }
    (worst <= 1e-10, format!("max |leapfrog - cone formula| {worst:.2e} (<= 1e-10) on nx = 128/256/512"))
}

fn cone_monotonicity() -> Outcome {
    let runs: Vec<(String, f64, bool)> = corpus()
        .into_iter()
        .flat_map(|c| MASSES.iter().map(move |&m| (c, m)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&((name, kind, params, boundary), m)| {
            let g = corpus_grid(boundary, 1.0 / 32.0);
            let h = run_simulation(&preset(kind, &params, &g).unwrap(), &g, m).unwrap();
            let r = diagnose(&h, &ReportOptions::default()).unwrap();
            let series_ok = r.cone_charge_series.windows(2).all(|w| w[1] <= w[0] + 1e-12);
            (format!("{name}/m={m}"), r.cone_violations, series_ok)
        })
        .collect();
    let worst = runs.iter().fold(f64::NEG_INFINITY, |a, r| a.max(r.1));
    let ok = runs.iter().all(|r| r.1 <= 1e-12 && r.2);
    (ok, format!("max cone-charge increase {worst:.2e} (<= 1e-12) over {} runs", runs.len()))
}

/// `C_k = max(margin_k, 0) / dx_k`, rounding-level positives counted as zero.
fn margin_constants(margins: &[f64], dxs: &[f64]) -> Vec<f64> {
    margins
        .iter()
        .zip(dxs)
        .map(|(&m, &dx)| if m > 1e-12 { m / dx } else { 0.0 })
        .collect()
}

fn constants_stable(c: &[f64]) -> bool {
    c.iter().all(|&x| x == 0.0) || c.windows(2).all(|w| w[0] > 0.0 && w[1] > 0.0 && w[1] / w[0] <= 2.0 && w[0] / w[1] <= 2.0)
}

fn inequality_suite() -> Outcome {
    let dxs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let cases: Vec<_> = corpus()
        .into_iter()
        .flat_map(|c| MASSES.iter().map(move |&m| (c, m)))
        .collect();
    // per case: margins [pointwise, tail, gauge_sup, equicontinuity] per dx
    let results: Vec<(String, Vec<[f64; 4]>)> = cases
        .par_iter()
        .map(|&((name, kind, params, boundary), m)| {
            let per_dx = dxs
                .iter()
                .map(|&dx| {
                    let g = corpus_grid(boundary, dx);
                    let h = run_simulation(&preset(kind, &params, &g).unwrap(), &g, m).unwrap();
                    let opts = ReportOptions {
                        tail: (boundary == Boundary::ZeroInflow).then_some((2.0, g.nt / 2)),
                    };
                    let r = diagnose(&h, &opts).unwrap();
                    let eq = r.equicontinuity_margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    [r.pointwise_margin, r.tail_margin.unwrap_or(f64::NEG_INFINITY), r.gauge_sup_margin, eq]
                })
                .collect();
            (format!("{name}/m={m}"), per_dx)
        })
        .collect();
    let names = ["pointwise", "tail", "gauge_sup", "equicontinuity"];
    let mut ok = true;
    let mut worst = [f64::NEG_INFINITY; 4];
    let mut failures = vec![];
    for (case, per_dx) in &results {
        for q in 0..4 {
            let margins: Vec<f64> = per_dx.iter().map(|m| m[q]).collect();
            worst[q] = margins.iter().copied().fold(worst[q], f64::max);
            if !constants_stable(&margin_constants(&margins, &dxs)) {
                ok = false;
                failures.push(format!("{case}:{} {}", names[q], sci(&margins)));
            }
        }
    }
    let mut msg = format!(
        "max margins: pointwise {:.2e}, tail {:.2e}, gauge_sup {:.2e}, equicontinuity {:.2e}",
        worst[0], worst[1], worst[2], worst[3]
    );
    if !failures.is_empty() {
        msg += &format!("; unstable C: {}", failures.join(", "));
    }
    (ok, msg)
}

fn lorentz_gauge() -> Outcome {
    let params = PresetParams {
        gauss_law: true,
        ..gaussian()
    };
    let dxs = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0];
    let residuals: Vec<f64> = dxs
        .par_iter()
        .map(|&dx| {
            let g = make_grid(-6.0, 6.0, dx, 1.0, Boundary::ZeroInflow).unwrap();
            let h = run_simulation(&preset(PresetKind::GaussianPacket, &params, &g).unwrap(), &g, 1.0).unwrap();
            md1d::diagnostics::lorentz_residual(&h).unwrap()
        })
        .collect();
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = orders.iter().all(|&o| o >= 1.9);
    (ok, format!("residuals {}, orders {orders:.2?} (>= 1.9)", sci(&residuals)))
}

fn smooth_convergence() -> Outcome {
    let data_spec = DataSpec {
        kind: PresetKind::GaussianPacket,
        params: gaussian(),
    };
    let window = Window {
        xmin: -6.0,
        xmax: 6.0,
        horizon: 1.0,
        boundary: Boundary::ZeroInflow,
    };
    let dxs: Vec<f64> = (6..=10).map(|p| 0.5f64.powi(p)).collect();
    let t = convergence_study(&data_spec, &window, &dxs, 1.0).unwrap();
    let (ou, og) = (t.min_order_uv().unwrap_or(0.0), t.min_order_gauge().unwrap_or(0.0));
    (ou >= 1.9 && og >= 1.9, format!("min observed order uv {ou:.3}, gauge {og:.3} (>= 1.9), dx 2^-6..2^-10"))
}

fn mollified_existence() -> Outcome {
    let g = make_grid(-4.0, 4.0, 1.0 / 256.0, 1.0, Boundary::ZeroInflow).unwrap();
    let rough = preset(PresetKind::Box, &boxed(), &g).unwrap();
    let t = mollification_study(&rough, &[4, 8, 16, 32, 64], &g, 1.0).unwrap();
    let d: Vec<f64> = t.rows.iter().map(|r| r.distance_uv).collect();
    (t.strictly_decreasing(), format!("successive distances {} strictly decreasing", sci(&d)))
}

fn stability() -> Outcome {
    let g = make_grid(-6.0, 6.0, 1.0 / 64.0, 2.0, Boundary::ZeroInflow).unwrap();
    let data = preset(PresetKind::GaussianPacket, &gaussian(), &g).unwrap();
    let direction = preset(
        PresetKind::GaussianPacket,
        &PresetParams {
            amplitude_u: 1.0,
            amplitude_v: -0.7,
            center: 0.3,
            width: 0.4,
            momentum: -1.0,
            gauge_amplitude: 0.0,
            ..Default::default()
        },
        &g,
    )
    .unwrap();
    let deltas = [0.0, 1e-2, 1e-3, 1e-4];
    let traces: Vec<_> = deltas
        .par_iter()
        .map(|&d| stability_study(&data, d, &direction, &g, 1.0).unwrap())
        .collect();
    let zero_exact = traces[0].functional.iter().all(|&i| i == 0.0);
    let ratios: Vec<f64> = deltas[1..].iter().zip(&traces[1..]).map(|(d, t)| t.sup() / (d * d)).collect();
    let spread = ratios.iter().map(|r| ((r - ratios[2]) / ratios[2]).abs()).fold(0.0f64, f64::max);
    let holdout = traces[1..].iter().map(|t| t.holdout_margin).fold(f64::NEG_INFINITY, f64::max);
    let ok = zero_exact && spread <= 0.1 && holdout <= 1e-10;
    (
        ok,
        format!(
            "delta=0 exact: {zero_exact}; sup I/delta^2 spread {spread:.2e} (<= 0.1); holdout envelope excess {holdout:.2e} (<= 1e-10)"
        ),
    )
}

fn fault_injection() -> Outcome {
    let g = periodic_2048();
    let data = preset(PresetKind::GaussianPacket, &gaussian(), &g).unwrap();
    let cfg = SpinorStepConfig::new(1.0).unwrap().with_rotation_gain(1.0 + 1e-3);
    let drift = streamed_drift(&data, &g, cfg);
    let tripped = drift > 1e-6;
    (tripped, format!("faulty rotation drift {drift:.2e} (> 1e-6, so the conservation check fails)"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("exact charge conservation", charge_conservation),
        ("massless modulus transport", massless_transport),
        ("wave solver vs cone formula", wave_oracle),
        ("cone-charge monotonicity", cone_monotonicity),
        ("inequality margins O(dx)", inequality_suite),
        ("Lorentz gauge preservation", lorentz_gauge),
        ("smooth-data convergence", smooth_convergence),
        ("mollified-data Cauchy sequence", mollified_existence),
        ("uniqueness / stability", stability),
        ("fault injection detected", fault_injection),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<32} {}  [{:.1}s] {}",
            k + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
