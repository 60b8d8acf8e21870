use std::sync::Arc;

use cadlag_rough::drivers::{brownian_ensemble, ito_lift_brownian, simulate_brownian, smooth_lift};
use cadlag_rough::rng::{par_members, tag};
use cadlag_rough::rsde::{
    picard_solve, sample_data, scenario_registry, solve, stability_sweep, PicardOptions, SdeData,
};
use cadlag_rough::stats::{log2_slope, mean};
use cadlag_rough::{CoefficientSet, DriverSpec, MartingalePath, RoughLift, SmoothFn, TimeGrid};

fn grid(n: usize) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(1.0, n).unwrap())
}

fn linear_rough() -> CoefficientSet {
    CoefficientSet::new(1, 1, 1, None, None, Some(SmoothFn::linear(1, 1, vec![1.0], vec![0.0]).unwrap())).unwrap()
}

#[test]
fn smooth_geometric_order() {
    let c = linear_rough();
    let levels = [16usize, 32, 64, 128, 256];
    let errs: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let lift = smooth_lift("polynomial", &grid(n)).unwrap();
            let r = solve(&c, &[vec![1.5]], None, std::slice::from_ref(&lift)).unwrap();
            (0..=n)
                .map(|k| (r.y[0].value(k)[0] - 1.5 * (lift.path().value(k)[0] - lift.path().value(0)[0]).exp()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let ns: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    assert!(-log2_slope(&ns, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn brownian_geometric_strong_order() {
    let c = linear_rough();
    let fine = grid(1024);
    let paths: Vec<(MartingalePath, RoughLift)> = par_members(1000, 3, tag("gbm"), |_, rng| {
        let b = simulate_brownian(&fine, 1, &[1.0], rng).unwrap();
        let l = ito_lift_brownian(&b, 1, rng).unwrap();
        (b, l)
    });
    let levels = [16usize, 32, 64, 128, 256];
    let errs: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let lifts: Vec<RoughLift> = paths.iter().map(|p| p.1.restrict(grid(n)).unwrap()).collect();
            let y0 = vec![vec![1.0]; lifts.len()];
            let r = solve(&c, &y0, None, &lifts).unwrap();
            let sq: Vec<f64> = r
                .y
                .iter()
                .zip(&paths)
                .map(|(y, p)| (y.terminal()[0] - (p.0.path.terminal()[0] - 0.5).exp()).powi(2))
                .collect();
            mean(&sq).sqrt()
        })
        .collect();
    let ns: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    assert!(-log2_slope(&ns, &errs) >= 0.9, "{errs:?}");
}

#[test]
fn deterministic_milstein_reduction() {
    let c = CoefficientSet::from_ids(1, 1, 1, None, None, Some("sin_bundle")).unwrap();
    let lift = smooth_lift("polynomial", &grid(20)).unwrap();
    let r = solve(&c, &[vec![0.3]], None, std::slice::from_ref(&lift)).unwrap();
    let mut y: f64 = 0.3;
    for k in 1..=20 {
        let dx = lift.path().value(k)[0] - lift.path().value(k - 1)[0];
        let xx = lift.chen_lookup(k - 1, k).unwrap()[0];
        y = y + y.sin() * dx + y.cos() * y.sin() * xx;
        assert!((r.y[0].value(k)[0] - y).abs() < 1e-14);
    }
}

#[test]
fn picard_agrees_on_registry() {
    let g = grid(48);
    let opts = PicardOptions { tol: 1e-10, ..Default::default() };
    for (i, s) in scenario_registry().unwrap().iter().enumerate() {
        let data = sample_data(&s.driver, &s.y0, &g, 2, i as u64).unwrap();
        let direct = solve(&s.coeffs, &data.y0, data.m.as_deref(), &data.lifts).unwrap();
        let pic = picard_solve(&s.coeffs, &data.y0, data.m.as_deref(), &data.lifts, opts).unwrap();
        for (a, b) in direct.y.iter().zip(&pic.y) {
            let gap = a.raw().iter().zip(b.raw()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-6, "{} {gap}", s.name);
        }
        assert!(pic.picard.iter().all(|l| l.converged), "{}", s.name);
    }
}

#[test]
fn picard_contracts() {
    let c = CoefficientSet::from_ids(1, 1, 1, Some("tanh_affine"), Some("sin_bundle"), Some("sin_bundle")).unwrap();
    let data = sample_data(&DriverSpec::brownian(1), &[0.2], &grid(64), 1, 4).unwrap();
    let pic = picard_solve(&c, &data.y0, data.m.as_deref(), &data.lifts, PicardOptions::default()).unwrap();
    for d in &pic.picard[0].distances {
        for w in d.windows(2).skip(1) {
            assert!(w[1] < w[0] || w[1] == 0.0, "{d:?}");
        }
    }
}

#[test]
fn linear_smooth_picard_matches_solve() {
    let c = linear_rough();
    let lift = smooth_lift("linear", &grid(64)).unwrap();
    let a = solve(&c, &[vec![1.0]], None, std::slice::from_ref(&lift)).unwrap();
    let b = picard_solve(&c, &[vec![1.0]], None, std::slice::from_ref(&lift), PicardOptions::default()).unwrap();
    for k in 0..=64 {
        assert!((a.y[0].value(k)[0] - b.y[0].value(k)[0]).abs() < 1e-6);
    }
}

fn stability_case() -> (CoefficientSet, SdeData) {
    let c = CoefficientSet::from_ids(1, 1, 1, Some("tanh_affine"), Some("sin_bundle"), Some("tanh_affine")).unwrap();
    let data = sample_data(&DriverSpec::brownian(1), &[0.4], &grid(24), 200, 7).unwrap();
    (c, data)
}

fn spread(reports: &[(f64, cadlag_rough::rsde::StabilityReport)]) -> f64 {
    let ratios: Vec<f64> = reports.iter().map(|r| r.1.ratio).collect();
    assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0), "{ratios:?}");
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

const EPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

#[test]
fn stability_initial_value() {
    let (c, data) = stability_case();
    let r = stability_sweep(&c, &data, |e| Ok(data.perturb_y0(e)), &EPS, 2.5, 2.0).unwrap();
    assert!(spread(&r) < 5.0);
}

#[test]
fn stability_martingale() {
    let (c, data) = stability_case();
    let w = brownian_ensemble(&grid(24), 1, &[1.0], 200, 99).unwrap();
    let r = stability_sweep(&c, &data, |e| data.perturb_martingale(e, &w), &EPS, 2.5, 2.0).unwrap();
    assert!(spread(&r) < 5.0);
}

#[test]
fn stability_rough_path() {
    let (c, data) = stability_case();
    let r = stability_sweep(&c, &data, |e| data.perturb_lift(e), &EPS, 2.5, 2.0).unwrap();
    assert!(spread(&r) < 5.0);
}
