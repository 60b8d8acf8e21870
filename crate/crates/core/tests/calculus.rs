use std::sync::Arc;

use cadlag_rough::calculus::{
    bracket, compose, controlled_integral, integration_by_parts_residual, ito_formula_residual, ito_formula_terms,
    mixed_bracket_check, remainder, rough_bracket,
};
use cadlag_rough::drivers::{
    forward_lift_jump_path, ito_lift_brownian, simulate_brownian, simulate_compound_poisson, simulate_mixed,
    smooth_lift,
};
use cadlag_rough::rng::{par_members, stream, tag};
use cadlag_rough::stats::{log2_slope, mean, std_error};
use cadlag_rough::stochint::{rough_stoch_integrate, young_integrate};
use cadlag_rough::{ControlledPath, JumpDist, MartingalePath, RoughLift, SamplePath, SmoothFn, TimeGrid};

fn grid(n: usize) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(1.0, n).unwrap())
}

fn brownian(n: usize, seed: u64) -> (MartingalePath, RoughLift) {
    let mut rng = stream(seed, 1, 0);
    let b = simulate_brownian(&grid(n), 1, &[1.0], &mut rng).unwrap();
    let l = ito_lift_brownian(&b, 1, &mut rng).unwrap();
    (b, l)
}

fn poisson(n: usize, seed: u64) -> (SamplePath, MartingalePath, RoughLift) {
    let (x, m) =
        simulate_compound_poisson(&grid(n), 1, 6.0, JumpDist::Normal { mean: 0.2, std: 0.8 }, &mut stream(seed, 2, 0))
            .unwrap();
    let l = forward_lift_jump_path(&x);
    (x, m, l)
}

#[test]
fn remainder_examples() {
    let (_, lift) = brownian(64, 1);
    let x = ControlledPath::of_lift(&lift);
    assert_eq!(remainder(&x, &lift, 3, 40).unwrap(), vec![0.0]);
    let flat = ControlledPath::without_derivative(lift.path(), 1);
    let r = remainder(&flat, &lift, 3, 40).unwrap()[0];
    assert_eq!(r, lift.path().node(40)[0] - lift.path().node(3)[0]);
    assert!(remainder(&x, &lift, 5, 2).is_err());
}

#[test]
fn remainder_taylor_bound() {
    let lift = smooth_lift("polynomial", &grid(200)).unwrap();
    let f = SmoothFn::registry("sin_bundle", 1, 1).unwrap();
    let cp = compose(&f, &ControlledPath::of_lift(&lift)).unwrap();
    let c2 = f.derivative_bounds()[2];
    let mut worst = 0.0f64;
    for (s, t) in [(0, 10), (50, 53), (100, 180), (7, 199), (150, 151)] {
        let r = remainder(&cp, &lift, s, t).unwrap()[0];
        let dx = lift.path().node(t)[0] - lift.path().node(s)[0];
        worst = worst.max(r.abs() / (dx * dx / 2.0));
    }
    assert!(worst <= c2 * (1.0 + 1e-9), "{worst} vs {c2}");
}

#[test]
fn compose_linear_and_chain() {
    let (_, lift) = brownian(32, 2);
    let cp = ControlledPath::of_lift(&lift);
    let a = SmoothFn::linear(1, 2, vec![2.0, -1.0], vec![0.0, 0.0]).unwrap();
    let c = compose(&a, &cp).unwrap();
    for k in 0..=32 {
        let x = lift.path().value(k)[0];
        assert_eq!(c.y.value(k), &[2.0 * x, -x]);
        assert_eq!(c.yp.value(k), &[2.0, -1.0]);
    }
    let g = SmoothFn::registry("tanh_affine", 2, 1).unwrap();
    let chained = compose(&g, &c).unwrap();
    let direct = compose(&g.compose_linear(&a).unwrap(), &cp).unwrap();
    for k in 0..=32 {
        assert!((chained.y.value(k)[0] - direct.y.value(k)[0]).abs() < 1e-14);
        assert!((chained.yp.value(k)[0] - direct.yp.value(k)[0]).abs() < 1e-14);
    }
}

#[test]
fn composed_remainder_fitted_constant() {
    let lift = smooth_lift("sine_cosine_pair", &grid(256)).unwrap();
    let f = SmoothFn::registry("tanh_affine", 2, 1).unwrap();
    let cp = compose(&f, &ControlledPath::of_lift(&lift)).unwrap();
    let mut rng = stream(3, 3, 0);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let s = rand::Rng::random_range(&mut rng, 0..255);
        let t = rand::Rng::random_range(&mut rng, s + 1..=(s + 8).min(256));
        let r = remainder(&cp, &lift, s, t).unwrap()[0];
        let mut dx = [0.0; 2];
        lift.path().increment(s, t, &mut dx);
        let n2 = dx[0] * dx[0] + dx[1] * dx[1];
        worst = worst.max(r.abs() / n2);
    }
    assert!(worst <= 1.1 * f.c2_bound(), "{worst}");
}

#[test]
fn chain_rule_matches_finite_differences() {
    let (_, lift) = brownian(16, 4);
    let f = SmoothFn::registry("exp_clipped", 1, 2).unwrap();
    let cp = compose(&f, &ControlledPath::of_lift(&lift)).unwrap();
    let h = 1e-6;
    for k in 0..=16 {
        let x = lift.path().value(k)[0];
        let (up, dn) = (f.eval_vec(&[x + h]), f.eval_vec(&[x - h]));
        for o in 0..2 {
            assert!((cp.yp.value(k)[o] - (up[o] - dn[o]) / (2.0 * h)).abs() < 1e-6);
        }
    }
}

#[test]
fn brownian_bracket_is_time() {
    let values: Vec<f64> = par_members(2000, 5, tag("br"), |_, rng| {
        let b = simulate_brownian(&grid(64), 1, &[1.0], rng).unwrap();
        let l = ito_lift_brownian(&b, 1, rng).unwrap();
        let a = ControlledPath::without_derivative(&b.path, 1);
        bracket(&a, &a, &l).unwrap().terminal()[0]
    });
    assert!((mean(&values) - 1.0).abs() <= 3.0 * std_error(&values));
}

#[test]
fn rough_bracket_examples() {
    let lift = smooth_lift("polynomial", &grid(64)).unwrap();
    assert!(rough_bracket(&lift).raw().iter().all(|v| v.abs() < 1e-12));
    let x = ControlledPath::of_lift(&lift);
    assert!(bracket(&x, &x, &lift).unwrap().terminal()[0].abs() < 1e-12);
    let circle = smooth_lift("sine_cosine_pair", &grid(64)).unwrap();
    assert!(rough_bracket(&circle).raw().iter().all(|v| v.abs() < 1e-12));

    let (_, lift) = brownian(128, 6);
    assert!((rough_bracket(&lift).terminal()[0] - 1.0).abs() < 1e-12);

    let (path, _, lift) = poisson(32, 7);
    let squares: f64 = path.jump_times().iter().map(|&k| path.jump(k)[0].powi(2)).sum();
    assert!((rough_bracket(&lift).terminal()[0] - squares).abs() < 1e-12);
    let x = ControlledPath::of_lift(&lift);
    assert!((bracket(&x, &x, &lift).unwrap().terminal()[0] - squares).abs() < 1e-12);
}

#[test]
fn bracket_symmetric_and_bilinear() {
    let mut rng = stream(8, 4, 0);
    let (_, lift) = simulate_mixed(&grid(32), 2, &[1.0, 0.0, 0.0, 1.0], 4.0, JumpDist::Constant(0.5), 2, &mut rng).unwrap();
    let x = ControlledPath::of_lift(&lift);
    let a = compose(&SmoothFn::registry("sin_bundle", 2, 2).unwrap(), &x).unwrap();
    let b = compose(&SmoothFn::registry("tanh_affine", 2, 3).unwrap(), &x).unwrap();
    let ab = bracket(&a, &b, &lift).unwrap();
    let ba = bracket(&b, &a, &lift).unwrap();
    let scaled = bracket(&a.scaled(-1.5), &b, &lift).unwrap();
    for k in 0..=32 {
        for i in 0..2 {
            for j in 0..3 {
                assert!((ab.value(k)[i * 3 + j] - ba.value(k)[j * 2 + i]).abs() < 1e-13);
                assert!((scaled.value(k)[i * 3 + j] + 1.5 * ab.value(k)[i * 3 + j]).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn mixed_bracket_exact_cases() {
    let (x, m, lift) = poisson(32, 9);
    let z = ControlledPath::of_lift(&lift);
    let r = mixed_bracket_check(std::slice::from_ref(&m.path), std::slice::from_ref(&z), std::slice::from_ref(&lift), 2.0).unwrap();
    assert!(r.value < 1e-12);
    let zero = x.map(1, |_, o| o[0] = 0.0);
    assert_eq!(mixed_bracket_check(&[zero], &[z], &[lift], 2.0).unwrap().value, 0.0);
}

#[test]
fn mixed_bracket_decays_for_continuous_martingale() {
    let levels = [16usize, 32, 64, 128];
    let fine = grid(1024);
    let members: Vec<(SamplePath, SamplePath)> = par_members(200, 10, tag("mixed"), |_, rng| {
        let (j, _) = simulate_compound_poisson(&fine, 1, 5.0, JumpDist::Normal { mean: 0.0, std: 1.0 }, rng).unwrap();
        let b = simulate_brownian(j.grid(), 1, &[1.0], rng).unwrap();
        (b.path.embed(j.skeleton()).unwrap(), j)
    });
    let res: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let coarse = grid(n);
            let (mut ms, mut zs, mut ls) = (Vec::new(), Vec::new(), Vec::new());
            for (b, j) in &members {
                let lift = forward_lift_jump_path(&j.restrict(coarse.clone()).unwrap());
                ms.push(b.restrict(coarse.clone()).unwrap());
                zs.push(ControlledPath::of_lift(&lift));
                ls.push(lift);
            }
            mixed_bracket_check(&ms, &zs, &ls, 2.0).unwrap().value
        })
        .collect();
    let ns: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    assert!(log2_slope(&ns, &res) < 0.0, "{res:?}");
}

#[test]
fn controlled_integral_examples() {
    let (_, lift) = brownian(64, 11);
    let x = ControlledPath::of_lift(&lift);
    let a = controlled_integral(&x, &x, &lift).unwrap();
    let r = rough_stoch_integrate(std::slice::from_ref(&x), std::slice::from_ref(&lift)).unwrap();
    for k in 0..=64 {
        assert_eq!(a.value(k), r.members[0].value(k));
    }
    let c = ControlledPath::without_derivative(&x.y.map(1, |_, o| o[0] = 3.0), 1);
    let z = controlled_integral(&c, &x, &lift).unwrap();
    for k in 0..=64 {
        let expected = 3.0 * (lift.path().value(k)[0] - lift.path().value(0)[0]);
        assert!((z.value(k)[0] - expected).abs() < 1e-13);
    }
}

#[test]
fn integration_by_parts_is_exact() {
    let lift = smooth_lift("sine_cosine_pair", &grid(64)).unwrap();
    let x = ControlledPath::of_lift(&lift);
    assert!(integration_by_parts_residual(&x, &x, &lift).unwrap() <= 1e-10);
    let (b, lift) = brownian(64, 12);
    let a = ControlledPath::without_derivative(&b.path, 1);
    assert!(integration_by_parts_residual(&a, &a, &lift).unwrap() <= 1e-12);
    let mut rng = stream(13, 4, 0);
    let (_, lift) = simulate_mixed(&grid(64), 2, &[1.0, 0.3, 0.0, 1.0], 6.0, JumpDist::Uniform { low: -1.0, high: 1.0 }, 4, &mut rng).unwrap();
    let x = ControlledPath::of_lift(&lift);
    let y = compose(&SmoothFn::registry("sin_bundle", 2, 2).unwrap(), &x).unwrap();
    assert!(integration_by_parts_residual(&x, &y, &lift).unwrap() <= 1e-12);
}

#[test]
fn bracket_of_integral_matches_young_integral() {
    let levels = [32usize, 128, 512];
    let fine = grid(2048);
    let drivers: Vec<RoughLift> = par_members(100, 14, tag("l52"), |_, rng| {
        let b = simulate_brownian(&fine, 1, &[1.0], rng).unwrap();
        ito_lift_brownian(&b, 1, rng).unwrap()
    });
    let res: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let r: Vec<f64> = drivers
                .iter()
                .map(|l| {
                    let lift = l.restrict(grid(n)).unwrap();
                    let y = lift.path().map(1, |v, o| o[0] = v[0].sin());
                    let yp = lift.path().map(1, |v, o| o[0] = v[0].cos());
                    let cp = ControlledPath::new(y.clone(), yp, 1).unwrap();
                    let z = rough_stoch_integrate(std::slice::from_ref(&cp), std::slice::from_ref(&lift)).unwrap();
                    let zc = ControlledPath::new(z.members[0].clone(), y.clone(), 1).unwrap();
                    let bz = bracket(&zc, &zc, &lift).unwrap().terminal()[0];
                    let yy = y.map(1, |v, o| o[0] = v[0] * v[0]);
                    let yi = young_integrate(&[yy], &[rough_bracket(&lift)]).unwrap().members[0].terminal()[0];
                    (bz - yi).abs()
                })
                .collect();
            mean(&r)
        })
        .collect();
    let ns: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    assert!(log2_slope(&ns, &res) < 0.0, "{res:?}");
}

#[test]
fn ito_formula_linear_is_exact() {
    let (_, _, lift) = poisson(32, 15);
    let x = ControlledPath::of_lift(&lift);
    let f = SmoothFn::linear(1, 2, vec![1.5, -0.5], vec![0.0, 0.0]).unwrap();
    let t = ito_formula_terms(&f, &x, &lift, None).unwrap();
    assert!(t.residual.iter().all(|r| r.abs() < 1e-13));
}

#[test]
fn ito_formula_square_of_brownian() {
    let levels = [64usize, 256, 1024];
    let fine = grid(1024);
    let paths: Vec<MartingalePath> = par_members(400, 16, tag("sq"), |_, rng| simulate_brownian(&fine, 1, &[1.0], rng).unwrap());
    let sq = SmoothFn::square(1).unwrap();
    let res: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let (mut cps, mut lifts, mut brs) = (Vec::new(), Vec::new(), Vec::new());
            for b in &paths {
                let m = b.restrict(grid(n)).unwrap();
                let lift = forward_lift_jump_path(&m.path);
                cps.push(ControlledPath::without_derivative(&m.path, 1));
                lifts.push(lift);
                brs.push(m.bracket.clone());
            }
            ito_formula_residual(&sq, &cps, &lifts, Some(&brs)).unwrap().value
        })
        .collect();
    let ns: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    let s = log2_slope(&ns, &res);
    assert!((-0.65..=-0.35).contains(&s), "{s} {res:?}");
}

#[test]
fn ito_formula_smooth_path() {
    let f = SmoothFn::registry("tanh_affine", 1, 1).unwrap();
    let levels = [16usize, 32, 64, 128];
    let res: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let lift = smooth_lift("polynomial", &grid(n)).unwrap();
            let x = ControlledPath::of_lift(&lift);
            ito_formula_residual(&f, &[x], &[lift], None).unwrap().value
        })
        .collect();
    let ns: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    assert!(log2_slope(&ns, &res) <= -0.9, "{res:?}");
}

#[test]
fn ito_formula_pure_jump_is_exact() {
    let f = SmoothFn::registry("tanh_affine", 1, 1).unwrap();
    for seed in 0..5 {
        let (x, _, lift) = poisson(16, 20 + seed);
        let cp = ControlledPath::of_lift(&lift);
        let t = ito_formula_terms(&f, &cp, &lift, None).unwrap();
        assert!(t.residual[0].abs() < 1e-12);
        let expected: f64 = x
            .jump_times()
            .iter()
            .map(|&k| {
                let (a, b) = (x.left(k)[0], x.value(k)[0]);
                let (fa, fb) = (f.eval_vec(&[a])[0], f.eval_vec(&[b])[0]);
                let (d1, d2) = (f.jacobian_vec(&[a])[0], f.hessian_vec(&[a])[0]);
                fb - fa - d1 * (b - a) - 0.5 * d2 * (b - a).powi(2)
            })
            .sum();
        assert!((t.jumps[0] - expected).abs() < 1e-12);
    }
}
