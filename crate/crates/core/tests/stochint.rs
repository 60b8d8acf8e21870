use std::collections::BTreeMap;
use std::sync::Arc;

use cadlag_rough::drivers::{
    brownian_ensemble, forward_lift_jump_path, ito_lift_brownian, simulate_compound_poisson, smooth_lift,
};
use cadlag_rough::rng::{par_members, stream, tag};
use cadlag_rough::stats::{mean, std_error};
use cadlag_rough::stochint::{
    ito_integrate, jump_structure_check, rough_stoch_integrate, young_integrate,
};
use cadlag_rough::{ControlledPath, JumpDist, MartingalePath, RoughLift, SamplePath, Skeleton, TimeGrid};

fn grid(n: usize) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(1.0, n).unwrap())
}

fn ones(p: &SamplePath) -> SamplePath {
    p.map(p.dim() * p.dim(), |_, o| o.iter_mut().for_each(|v| *v = 1.0))
}

#[test]
fn unit_integrand_gives_increment() {
    let ms = brownian_ensemble(&grid(50), 1, &[1.0], 3, 1).unwrap();
    let ys: Vec<SamplePath> = ms.iter().map(|m| ones(&m.path)).collect();
    let i = ito_integrate(&ys, &ms).unwrap();
    for (z, m) in i.members.iter().zip(&ms) {
        for k in 0..=50 {
            assert!((z.value(k)[0] - (m.path.value(k)[0] - m.path.value(0)[0])).abs() < 1e-14);
        }
    }
}

fn ito_error(n: usize, count: usize, seed: u64) -> f64 {
    let ms = brownian_ensemble(&grid(n), 1, &[1.0], count, seed).unwrap();
    let ys: Vec<SamplePath> = ms.iter().map(|m| m.path.clone()).collect();
    let i = ito_integrate(&ys, &ms).unwrap();
    let sq: Vec<f64> = i
        .terminal()
        .iter()
        .zip(&ms)
        .map(|(z, m)| (z[0] - (m.path.terminal()[0].powi(2) - 1.0) / 2.0).powi(2))
        .collect();
    mean(&sq).sqrt()
}

#[test]
fn ito_closed_form_and_halving() {
    let e1 = ito_error(128, 4000, 2);
    let e2 = ito_error(256, 4000, 3);
    assert!(e1 <= 1.0 / 128f64.sqrt());
    let ratio = e1 / e2;
    assert!((ratio - 2f64.sqrt()).abs() < 0.15, "{ratio}");
}

#[test]
fn compensated_poisson_integral_is_centered() {
    let g = grid(8);
    let ms: Vec<MartingalePath> = par_members(20_000, 4, tag("cp"), |_, r| {
        simulate_compound_poisson(&g, 1, 5.0, JumpDist::Exponential { rate: 1.0 }, r).unwrap().1
    });
    let ys: Vec<SamplePath> = ms.iter().map(|m| ones(&m.path)).collect();
    let t: Vec<f64> = ito_integrate(&ys, &ms).unwrap().terminal().iter().map(|v| v[0]).collect();
    assert!(mean(&t).abs() <= 3.0 * std_error(&t));
}

#[test]
fn isometry_and_martingale_property() {
    let g = grid(32);
    let ms = brownian_ensemble(&g, 1, &[1.0], 20_000, 5).unwrap();
    let ys: Vec<SamplePath> = ms.iter().map(|m| m.path.map(1, |v, o| o[0] = v[0].sin())).collect();
    let i = ito_integrate(&ys, &ms).unwrap();
    let y2: Vec<SamplePath> = ys.iter().map(|y| y.map(1, |v, o| o[0] = v[0] * v[0])).collect();
    let br: Vec<SamplePath> = ms.iter().map(|m| m.bracket.clone()).collect();
    let rhs: Vec<f64> = young_integrate(&y2, &br).unwrap().terminal().iter().map(|v| v[0]).collect();
    let lhs: Vec<f64> = i.terminal().iter().map(|v| v[0] * v[0]).collect();
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    assert!(mean(&diff).abs() <= 3.0 * std_error(&diff));
    let s = 16;
    for g in [|_: f64| 1.0, |b: f64| b.signum(), |b: f64| b.clamp(-0.5, 0.5)] {
        let xs: Vec<f64> = i
            .members
            .iter()
            .zip(&ms)
            .map(|(z, m)| (z.value(32)[0] - z.value(s)[0]) * g(m.path.value(s)[0]))
            .collect();
        assert!(mean(&xs).abs() <= 3.0 * std_error(&xs));
    }
}

#[test]
fn integral_is_linear() {
    let ms = brownian_ensemble(&grid(40), 1, &[1.0], 2, 6).unwrap();
    let y1: Vec<SamplePath> = ms.iter().map(|m| m.path.map(1, |v, o| o[0] = v[0].cos())).collect();
    let y2: Vec<SamplePath> = ms.iter().map(|m| m.path.clone()).collect();
    let comb: Vec<SamplePath> =
        y1.iter().zip(&y2).map(|(a, b)| a.zip_map(b, 1, |x, y, o| o[0] = 2.0 * x[0] - 3.0 * y[0]).unwrap()).collect();
    let (i1, i2, ic) = (ito_integrate(&y1, &ms).unwrap(), ito_integrate(&y2, &ms).unwrap(), ito_integrate(&comb, &ms).unwrap());
    for m in 0..2 {
        for k in 0..=40 {
            let lin = 2.0 * i1.members[m].value(k)[0] - 3.0 * i2.members[m].value(k)[0];
            assert!((ic.members[m].value(k)[0] - lin).abs() < 1e-12);
        }
    }
}

#[test]
fn mismatched_grids_rejected() {
    let a = brownian_ensemble(&grid(8), 1, &[1.0], 1, 1).unwrap();
    let b = brownian_ensemble(&grid(16), 1, &[1.0], 1, 1).unwrap();
    assert!(ito_integrate(&[a[0].path.clone()], &b).is_err());
    assert!(ito_integrate(&[], &b).is_err());
}

#[test]
fn rough_integral_of_lift_against_itself() {
    let mut rng = stream(7, 1, 0);
    let b = brownian_ensemble(&grid(64), 1, &[1.0], 1, 7).unwrap().remove(0);
    let lift = ito_lift_brownian(&b, 1, &mut rng).unwrap();
    let cp = ControlledPath::of_lift(&lift);
    let z = rough_stoch_integrate(std::slice::from_ref(&cp), std::slice::from_ref(&lift)).unwrap();
    for (s, t) in [(0, 64), (3, 40), (20, 21)] {
        let (xs, xt) = (lift.path().value(s)[0], lift.path().value(t)[0]);
        let expected = xs * (xt - xs) + lift.chen_lookup(s, t).unwrap()[0];
        let got = z.members[0].value(t)[0] - z.members[0].value(s)[0];
        assert!((got - expected).abs() < 1e-12);
    }
    let line = smooth_lift("linear", &grid(100)).unwrap();
    let cp = ControlledPath::of_lift(&line);
    let z = rough_stoch_integrate(std::slice::from_ref(&cp), std::slice::from_ref(&line)).unwrap();
    assert!((z.members[0].terminal()[0] - 0.5).abs() < 1e-12);
}

#[test]
fn rough_sine_integral_matches_fine_euler() {
    let (n, factor) = (64, 16);
    let fine = grid(n * factor);
    let coarse = grid(n);
    let errs: Vec<(f64, f64)> = par_members(500, 8, tag("sine"), |_, rng| {
        let b = cadlag_rough::drivers::simulate_brownian(&fine, 1, &[1.0], rng).unwrap();
        let mut euler = 0.0;
        for k in 1..fine.len() {
            euler += b.path.value(k - 1)[0].sin() * (b.path.value(k)[0] - b.path.value(k - 1)[0]);
        }
        let lift = ito_lift_brownian(&b, 1, rng).unwrap().restrict(coarse.clone()).unwrap();
        let y = lift.path().map(1, |v, o| o[0] = v[0].sin());
        let yp = lift.path().map(1, |v, o| o[0] = v[0].cos());
        let cp = ControlledPath::new(y.clone(), yp, 1).unwrap();
        let rough = rough_stoch_integrate(&[cp], std::slice::from_ref(&lift)).unwrap().members[0].terminal()[0];
        let mut coarse_euler = 0.0;
        for k in 1..coarse.len() {
            coarse_euler += y.value(k - 1)[0] * (lift.path().value(k)[0] - lift.path().value(k - 1)[0]);
        }
        ((rough - euler).powi(2), (coarse_euler - euler).powi(2))
    });
    let rough = mean(&errs.iter().map(|e| e.0).collect::<Vec<_>>()).sqrt();
    let left = mean(&errs.iter().map(|e| e.1).collect::<Vec<_>>()).sqrt();
    assert!(rough < 0.5 * left, "{rough} vs {left}");
    assert!(rough < 0.03, "{rough}");
}

#[test]
fn young_examples() {
    let g = grid(100);
    let a = SamplePath::continuous(g.clone(), 1, g.times().to_vec()).unwrap();
    let c = a.map(1, |_, o| o[0] = 2.5);
    let z = young_integrate(&[c], std::slice::from_ref(&a)).unwrap();
    assert!((z.members[0].terminal()[0] - 2.5).abs() < 1e-14);
    let z = young_integrate(std::slice::from_ref(&a), std::slice::from_ref(&a)).unwrap();
    assert!((z.members[0].terminal()[0] - 0.5).abs() <= 1.0 / 100.0);
    assert!(z.diagnostics.is_empty());
    let down = a.map(1, |v, o| o[0] = -v[0]);
    assert_eq!(young_integrate(std::slice::from_ref(&a), &[down]).unwrap().diagnostics.len(), 1);

    let (x, m) = simulate_compound_poisson(&grid(16), 1, 12.0, JumpDist::Normal { mean: 0.0, std: 1.0 }, &mut stream(1, 9, 0)).unwrap();
    let y = m.path.map(1, |v, o| o[0] = v[0].sin());
    let z = young_integrate(std::slice::from_ref(&y), std::slice::from_ref(&m.bracket)).unwrap();
    let expected: f64 = x.jump_times().iter().map(|&k| y.left(k)[0] * x.jump(k)[0].powi(2)).sum();
    assert!(!x.jump_times().is_empty());
    assert!((z.members[0].terminal()[0] - expected).abs() < 1e-12);
}

#[test]
fn jump_structure_on_forward_and_smooth_lifts() {
    let line = smooth_lift("polynomial", &grid(16)).unwrap();
    let cp = ControlledPath::of_lift(&line);
    let z = rough_stoch_integrate(std::slice::from_ref(&cp), std::slice::from_ref(&line)).unwrap();
    assert_eq!(jump_structure_check(&z.members[0], &cp, &line).unwrap(), 0.0);

    for seed in 0..10 {
        let (x, _) = simulate_compound_poisson(&grid(32), 2, 6.0, JumpDist::Uniform { low: -1.0, high: 2.0 }, &mut stream(seed, 10, 0)).unwrap();
        let lift = forward_lift_jump_path(&x);
        let y = x.map(2, |v, o| {
            o[0] = v[0].tanh();
            o[1] = v[0] * v[1];
        });
        let yp = x.map(4, |v, o| {
            o[0] = 1.0 - v[0].tanh().powi(2);
            o[1] = 0.0;
            o[2] = v[1];
            o[3] = v[0];
        });
        let cp = ControlledPath::new(y, yp, 2).unwrap();
        let z = rough_stoch_integrate(std::slice::from_ref(&cp), std::slice::from_ref(&lift)).unwrap();
        assert!(jump_structure_check(&z.members[0], &cp, &lift).unwrap() <= 1e-12);
    }
}

#[test]
fn jump_structure_with_nonzero_second_level_jump() {
    let g = Arc::new(TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap());
    let skel = Skeleton::new(g, vec![2]).unwrap();
    // nodes: t=0, t=0.5, t=1-, t=1
    let x = SamplePath::new(skel.clone(), 1, vec![0.0, 0.4, 0.7, 1.9]).unwrap();
    let jumps = BTreeMap::from([(2, vec![0.35])]);
    let lift = RoughLift::custom(x, &[vec![0.08], vec![0.045]], &jumps).unwrap();
    assert_eq!(lift.jump_second(2), vec![0.35]);
    let y = SamplePath::new(skel.clone(), 1, vec![1.0, 1.3, 1.6, 2.5]).unwrap();
    let yp = SamplePath::new(skel, 1, vec![0.5, -0.2, 0.9, 0.1]).unwrap();
    let cp = ControlledPath::new(y, yp, 1).unwrap();
    let z = rough_stoch_integrate(std::slice::from_ref(&cp), std::slice::from_ref(&lift)).unwrap();
    let dz = z.members[0].jump(2)[0];
    assert!((dz - (1.6 * 1.2 + 0.9 * 0.35)).abs() < 1e-12);
    assert!(jump_structure_check(&z.members[0], &cp, &lift).unwrap() <= 1e-12);
}
