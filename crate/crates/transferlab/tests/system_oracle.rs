//! Frozen-value oracles for the system layer: branch evaluation, noise laws,
//! random-map application and validation. Every expected number is derived
//! by hand from the defining formulas, not from running the code.

use transferlab::error::TlError;
use transferlab::system::{
    apply_random, eval_branch, kernel_interval_mass, system_from_json, system_to_json,
    transition_density, validate_system, AffinePiece, DomainSpec, NoiseSpec,
    PiecewiseAffineMap, RandomSystem, SystemKind,
};

fn doubling() -> PiecewiseAffineMap {
    PiecewiseAffineMap::from_pieces(&[0.0, 0.5, 1.0], &[(2.0, 0.0), (2.0, -1.0)], false)
}

fn ifs(branches: Vec<PiecewiseAffineMap>, weights: Vec<f64>) -> RandomSystem {
    RandomSystem::new(DomainSpec::circle(), SystemKind::FiniteIfs { branches, weights })
}

#[test]
fn eval_branch_piecewise_values() {
    let map = doubling();
    // 2x on [0, 1/2), 2x - 1 on [1/2, 1).
    assert_eq!(eval_branch(&map, 0.0).unwrap(), 0.0);
    assert_eq!(eval_branch(&map, 0.25).unwrap(), 0.5);
    assert_eq!(eval_branch(&map, 0.5).unwrap(), 0.0);
    assert_eq!(eval_branch(&map, 0.75).unwrap(), 0.5);
    // Wrap reduces mod 1: x + 0.7 at x = 0.5 -> 0.2 (within rounding).
    let shift = PiecewiseAffineMap::affine(1.0, 0.7, true);
    assert!((eval_branch(&shift, 0.5).unwrap() - 0.2).abs() < 1e-15);
    // Non-wrap escape is an error.
    let esc = PiecewiseAffineMap::affine(1.0, 0.7, false);
    assert!(matches!(eval_branch(&esc, 0.5), Err(TlError::DomainEscape { .. })));
}

#[test]
fn noise_uniform_law() {
    let u = NoiseSpec::uniform();
    u.validate().unwrap();
    assert_eq!(u.eval(0.3), 1.0);
    assert_eq!(u.cum_mass(0.25), 0.25);
    assert!((u.mass(0.2, 0.7) - 0.5).abs() < 1e-15);
    // Wrapped interval [0.8, 0.8 + 0.4): mass 0.2 + 0.2.
    assert!((u.mass_wrapped(0.8, 0.4) - 0.4).abs() < 1e-15);
    // Quantile is the identity for the uniform law.
    assert_eq!(u.sample(0.37), 0.37);
}

#[test]
fn noise_block_law() {
    // Block on [1/4, 3/4) with height 2: integrates to 1.
    let b = NoiseSpec::block(0.25, 0.75, 2.0);
    b.validate().unwrap();
    assert_eq!(b.eval(0.1), 0.0);
    assert_eq!(b.eval(0.5), 2.0);
    assert_eq!(b.cum_mass(0.25), 0.0);
    assert_eq!(b.cum_mass(0.5), 0.5);
    assert_eq!(b.cum_mass(1.0), 1.0);
    // Quantile: u = 0.5 -> midpoint 0.5; u = 0.25 -> 0.375.
    assert!((b.sample(0.5) - 0.5).abs() < 1e-15);
    assert!((b.sample(0.25) - 0.375).abs() < 1e-15);
    // Unnormalized block fails validation.
    let bad = NoiseSpec::block(0.0, 0.5, 1.0);
    assert!(matches!(bad.validate(), Err(TlError::NoiseNormalizationError { .. })));
}

#[test]
fn apply_random_additive_is_shift_mod_one() {
    let sys = RandomSystem::new(
        DomainSpec::circle(),
        SystemKind::AdditiveNoise { base: doubling(), noise: NoiseSpec::uniform() },
    );
    let sys = validate_system(sys).unwrap();
    // y = f0(x) + t mod 1: x = 0.3 -> 0.6; + 0.7 -> 1.3 -> 0.3.
    let y = apply_random(&sys, 0.7, 0.3).unwrap();
    assert!((y - 0.3).abs() < 1e-12);
    let y = apply_random(&sys, 0.1, 0.3).unwrap();
    assert!((y - 0.7).abs() < 1e-12);
}

#[test]
fn apply_random_multiplicative_contracts() {
    // f_t(x) = (1 - eps t) f0(x) with f0 = x/2, eps = 1/2.
    let base = PiecewiseAffineMap::affine(0.5, 0.0, false);
    let sys = RandomSystem::new(
        DomainSpec::interval(),
        SystemKind::MultiplicativeNoise { base, noise: NoiseSpec::uniform(), epsilon: 0.5 },
    );
    let sys = validate_system(sys).unwrap();
    // t = 1: y = (1 - 1/2) * 0.4 = 0.2; t = 0: y = 0.4. x = 0.8.
    assert!((apply_random(&sys, 1.0, 0.8).unwrap() - 0.2).abs() < 1e-15);
    assert!((apply_random(&sys, 0.0, 0.8).unwrap() - 0.4).abs() < 1e-15);
}

#[test]
fn apply_random_ifs_branch_selection() {
    // Weights (1/4, 3/4): t < 1/4 picks branch 0.
    let sys = ifs(
        vec![
            PiecewiseAffineMap::affine(0.5, 0.0, false),
            PiecewiseAffineMap::affine(0.5, 0.5, false),
        ],
        vec![0.25, 0.75],
    );
    let sys = validate_system(sys).unwrap();
    assert_eq!(apply_random(&sys, 0.1, 0.6).unwrap(), 0.3);
    assert_eq!(apply_random(&sys, 0.25, 0.6).unwrap(), 0.8);
    assert_eq!(apply_random(&sys, 0.9, 0.6).unwrap(), 0.8);
}

#[test]
fn apply_random_blend_interpolates() {
    // f_t(x) = t x + (1 - t) f0(x), f0 = doubling.
    let sys = RandomSystem::new(
        DomainSpec::interval(),
        SystemKind::BlendNoise { base: doubling() },
    );
    let sys = validate_system(sys).unwrap();
    // x = 0.3: f0 = 0.6; t = 0.5 -> 0.5*0.3 + 0.5*0.6 = 0.45.
    assert!((apply_random(&sys, 0.5, 0.3).unwrap() - 0.45).abs() < 1e-15);
}

#[test]
fn declared_fixed_points_pin_exactly() {
    let base = PiecewiseAffineMap::identity();
    let sys = RandomSystem::new(
        DomainSpec::circle(),
        SystemKind::AdditiveNoise { base, noise: NoiseSpec::uniform() },
    )
    .with_fixed_points(&[0.0]);
    let sys = validate_system(sys).unwrap();
    for i in 0..50 {
        let t = i as f64 / 50.0;
        // Bit-exact: the pinned point never moves.
        assert_eq!(apply_random(&sys, t, 0.0).unwrap(), 0.0);
        // Other points do move.
        if t > 0.01 && t < 0.99 {
            assert_ne!(apply_random(&sys, t, 0.5).unwrap(), 0.5);
        }
    }
}

#[test]
fn validate_rejects_bad_weights() {
    let sys = ifs(
        vec![
            PiecewiseAffineMap::affine(0.5, 0.0, false),
            PiecewiseAffineMap::affine(0.5, 0.5, false),
        ],
        vec![0.5, 0.4],
    );
    match validate_system(sys) {
        Err(TlError::WeightSumError { sum }) => assert!((sum - 0.9).abs() < 1e-12),
        other => panic!("expected WeightSumError, got {other:?}"),
    }
}

#[test]
fn validate_rejects_interval_escape() {
    // x + 0.5 without wrap escapes [0,1] on an interval domain.
    let sys = RandomSystem::new(
        DomainSpec::interval(),
        SystemKind::Deterministic { map: PiecewiseAffineMap::affine(1.0, 0.5, false) },
    );
    assert!(validate_system(sys).is_err());
}

#[test]
fn expanding_margin_values() {
    // Doubling: sum w/|f'| = 1/2 < 1 (expanding on average).
    let sys = RandomSystem::new(
        DomainSpec::circle(),
        SystemKind::Deterministic { map: doubling() },
    );
    let sys = validate_system(sys).unwrap();
    assert!((sys.meta.expanding_margin.unwrap() - 0.5).abs() < 1e-12);
    assert!(sys.meta.expanding_on_average);
    assert!(sys.meta.declared_atomic);

    // Pure contraction x/2: margin 2 (not expanding).
    let sys = ifs(vec![PiecewiseAffineMap::affine(0.5, 0.0, false)], vec![1.0]);
    let sys = validate_system(sys).unwrap();
    assert!((sys.meta.expanding_margin.unwrap() - 2.0).abs() < 1e-12);
    assert!(!sys.meta.expanding_on_average);

    // Bernoulli IFS x/2, x/2 + 1/2: margin 1/2*2 + 1/2*2 = 2... each branch
    // weight 1/2 with slope 1/2: sum w/|s| = 1/2/(1/2) + 1/2/(1/2) = 2.
    let sys = ifs(
        vec![
            PiecewiseAffineMap::affine(0.5, 0.0, false),
            PiecewiseAffineMap::affine(0.5, 0.5, false),
        ],
        vec![0.5, 0.5],
    );
    let sys = validate_system(sys).unwrap();
    assert!((sys.meta.expanding_margin.unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn transition_density_additive_uniform() {
    // Additive uniform noise: p(x, y) = 1 for every x, y.
    let sys = RandomSystem::new(
        DomainSpec::circle(),
        SystemKind::AdditiveNoise { base: doubling(), noise: NoiseSpec::uniform() },
    );
    let sys = validate_system(sys).unwrap();
    let p = transition_density(&sys, 0.3, 0.8).unwrap();
    assert!((p - 1.0).abs() < 1e-12);
    // Kernel interval mass matches the density integral: mass of [a, b) is
    // b - a for the uniform kernel.
    let m = kernel_interval_mass(&sys, 0.3, 0.25, 0.75).unwrap();
    assert!((m - 0.5).abs() < 1e-12);
    // Atomic kinds expose no kernel density.
    let atomic = ifs(vec![PiecewiseAffineMap::affine(0.5, 0.0, false)], vec![1.0]);
    let atomic = validate_system(atomic).unwrap();
    assert!(transition_density(&atomic, 0.3, 0.8).is_none());
}

#[test]
fn json_round_trip_preserves_system() {
    let sys = RandomSystem::new(
        DomainSpec::circle(),
        SystemKind::MultiplicativeNoise {
            base: doubling(),
            noise: NoiseSpec::block(0.0, 0.5, 2.0),
            epsilon: 0.5,
        },
    )
    .with_fixed_points(&[0.0]);
    let sys = validate_system(sys).unwrap();
    let text = system_to_json(&sys).unwrap();
    let back = system_from_json(&text).unwrap();
    let back = validate_system(back).unwrap();
    assert_eq!(system_to_json(&back).unwrap(), text);
    match (&sys.kind, &back.kind) {
        (
            SystemKind::MultiplicativeNoise { epsilon: e1, .. },
            SystemKind::MultiplicativeNoise { epsilon: e2, .. },
        ) => assert_eq!(e1, e2),
        _ => panic!("kind changed in round trip"),
    }
    assert_eq!(back.declared_fixed_points, vec![0.0]);
}

#[test]
fn piece_index_boundaries() {
    let map = doubling();
    assert_eq!(map.piece_index(0.0), 0);
    assert_eq!(map.piece_index(0.4999999), 0);
    assert_eq!(map.piece_index(0.5), 1);
    assert_eq!(map.piece_index(1.0), 1);
    let _ = AffinePiece { slope: 2.0, intercept: 0.0 };
}
