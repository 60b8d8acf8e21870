use std::sync::Arc;

use cadlag_rough::drivers::{brownian_ensemble, ito_lift_brownian, smooth_lift};
use cadlag_rough::norms::{
    chen_residual, rough_path_distance, two_param_seminorm, vp_lq_seminorm, Ensemble,
};
use cadlag_rough::rng::{par_members, stream, tag};
use cadlag_rough::{lq_norm, Error, NormSpec, SamplePath, Skeleton, TimeGrid, TwoParamTable};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn grid(n: usize) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(1.0, n).unwrap())
}

#[test]
fn gaussian_second_moment() {
    let xs: Vec<f64> = par_members(100_000, 1, tag("gauss"), |_, r| r.sample::<f64, _>(StandardNormal));
    let e = lq_norm(&xs, 2.0).unwrap();
    assert!((e.value - 1.0).abs() <= 3.0 * e.std_error);
    assert_eq!(e.n, 100_000);
}

#[test]
fn constant_and_first_moment() {
    let e = lq_norm(&[-2.5; 10], 3.0).unwrap();
    assert_eq!((e.value, e.std_error), (2.5, 0.0));
    let xs = [1.0, -2.0, 3.0, -4.0];
    assert!((lq_norm(&xs, 1.0).unwrap().value - 2.5).abs() < 1e-15);
    assert!(lq_norm(&[], 2.0).is_err());
}

#[test]
fn deterministic_line_has_unit_variation() {
    let g = grid(20);
    let p = SamplePath::continuous(g.clone(), 1, g.times().to_vec()).unwrap();
    let paths = [p];
    let v = vp_lq_seminorm(&Ensemble::new(&paths).unwrap(), NormSpec::new(1.0, 3.0).unwrap(), (0, 20)).unwrap();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn brownian_two_variation() {
    let g = grid(64);
    let paths: Vec<SamplePath> = brownian_ensemble(&g, 1, &[1.0], 20_000, 2).unwrap().into_iter().map(|m| m.path).collect();
    let v = vp_lq_seminorm(&Ensemble::new(&paths).unwrap(), NormSpec::new(2.0, 2.0).unwrap(), (0, 64)).unwrap();
    assert!((v * v - 1.0).abs() < 0.1);
}

#[test]
fn single_jump_has_its_height() {
    let g = grid(8);
    let skel = Skeleton::new(g, vec![5]).unwrap();
    let h = 0.7;
    let p = SamplePath::from_node_fn(skel.clone(), 1, |n, o| o[0] = if n > skel.left(5) { h } else { 0.0 });
    let paths = [p];
    for (pe, q) in [(1.0, 1.0), (2.5, 2.0), (4.0, 7.0)] {
        let v = vp_lq_seminorm(&Ensemble::new(&paths).unwrap(), NormSpec::new(pe, q).unwrap(), (0, 8)).unwrap();
        assert!((v - h).abs() < 1e-15);
    }
}

#[test]
fn conditional_exponents_are_unsupported() {
    let g = grid(4);
    let paths = [SamplePath::continuous(g, 1, vec![0.0; 5]).unwrap()];
    let spec = NormSpec::with_r(2.0, 2.0, 3.0).unwrap();
    assert!(matches!(vp_lq_seminorm(&Ensemble::new(&paths).unwrap(), spec, (0, 4)), Err(Error::Unsupported(_))));
}

#[test]
fn two_parameter_examples() {
    let zero = TwoParamTable::zeros(9).unwrap();
    assert_eq!(two_param_seminorm(&zero, 2.0).unwrap(), 0.0);
    let g = grid(10);
    let t = TwoParamTable::from_fn(11, |s, u| g.time(u) - g.time(s)).unwrap();
    assert!((two_param_seminorm(&t, 1.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn rough_distance_examples() {
    let g = grid(32);
    let mut rng = stream(4, 1, 0);
    let b = brownian_ensemble(&g, 1, &[1.0], 1, 9).unwrap().remove(0);
    let x = ito_lift_brownian(&b, 1, &mut rng).unwrap();
    assert_eq!(rough_path_distance(&x, &x, 2.5).unwrap(), 0.0);
    let shift = |eps: f64| {
        let h = SamplePath::continuous(g.clone(), 1, g.times().iter().map(|t| eps * t).collect()).unwrap();
        x.translate(&h).unwrap()
    };
    let d1 = rough_path_distance(&x, &shift(1e-2), 2.5).unwrap();
    let d2 = rough_path_distance(&x, &shift(1e-3), 2.5).unwrap();
    assert!(d1 > 0.0 && (d1 / d2 - 10.0).abs() < 1.0);
    let y = shift(0.3);
    assert!((rough_path_distance(&x, &y, 2.5).unwrap() - rough_path_distance(&y, &x, 2.5).unwrap()).abs() < 1e-15);
    let other = smooth_lift("linear", &grid(16)).unwrap();
    assert!(rough_path_distance(&x, &other, 2.5).is_err());
}

#[test]
fn vacuous_chen_residual() {
    assert_eq!(chen_residual(&smooth_lift("polynomial", &grid(8)).unwrap(), 0, 1), 0.0);
}

fn ensemble(n: usize, members: usize, seed: u64) -> Vec<SamplePath> {
    brownian_ensemble(&grid(n), 1, &[1.0], members, seed).unwrap().into_iter().map(|m| m.path).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seminorm_superadditive_and_monotone(seed in 0u64..1000, u in 1usize..19, p in 1.0f64..4.0) {
        let paths = ensemble(19, 6, seed);
        let e = Ensemble::new(&paths).unwrap();
        let spec = NormSpec::new(p, 2.0).unwrap();
        let whole = vp_lq_seminorm(&e, spec, (0, 19)).unwrap();
        let left = vp_lq_seminorm(&e, spec, (0, u)).unwrap();
        let right = vp_lq_seminorm(&e, spec, (u, 19)).unwrap();
        prop_assert!(left.powf(p) + right.powf(p) <= whole.powf(p) * (1.0 + 1e-12));
        prop_assert!(left <= whole * (1.0 + 1e-12));
    }

    #[test]
    fn seminorm_decreases_in_p(seed in 0u64..1000, p in 1.0f64..3.0, extra in 0.0f64..2.0) {
        let paths = ensemble(15, 5, seed);
        let e = Ensemble::new(&paths).unwrap();
        let lo = vp_lq_seminorm(&e, NormSpec::new(p + extra, 2.0).unwrap(), (0, 15)).unwrap();
        let hi = vp_lq_seminorm(&e, NormSpec::new(p, 2.0).unwrap(), (0, 15)).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn rough_distance_triangle(seed in 0u64..1000) {
        let g = grid(12);
        let lifts: Vec<_> = (0..3).map(|i| {
            let mut rng = stream(seed, 2, i);
            let b = brownian_ensemble(&g, 2, &[1.0, 0.0, 0.0, 1.0], 1, seed * 3 + i).unwrap().remove(0);
            ito_lift_brownian(&b, 2, &mut rng).unwrap()
        }).collect();
        let d = |a: usize, b: usize| rough_path_distance(&lifts[a], &lifts[b], 2.5).unwrap();
        prop_assert!(d(0, 2) <= (d(0, 1) + d(1, 2)) * (1.0 + 1e-12));
    }
}
