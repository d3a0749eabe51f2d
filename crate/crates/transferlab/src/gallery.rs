//! Built-in example systems with their expected classification signatures.

use std::collections::BTreeMap;

use crate::classify::{ClassTag, Verdict};
use crate::error::{Result, TlError};
use crate::system::{
    validate_system, DomainSpec, NoiseSpec, PiecewiseAffineMap, RandomSystem, SystemKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedComponents {
    Exact(usize),
    AtLeast(usize),
    Unspecified,
}

#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub id: &'static str,
    pub system: RandomSystem,
    pub expected: BTreeMap<ClassTag, Verdict>,
    pub expected_components: ExpectedComponents,
    pub notes: &'static str,
    pub exploratory: bool,
}

fn expect(pairs: &[(ClassTag, Verdict)]) -> BTreeMap<ClassTag, Verdict> {
    pairs.iter().cloned().collect()
}

const FOR: Verdict = Verdict::EvidenceFor;
const AGAINST: Verdict = Verdict::EvidenceAgainst;

fn ifs(branches: Vec<PiecewiseAffineMap>, weights: Vec<f64>) -> SystemKind {
    SystemKind::FiniteIfs { branches, weights }
}

fn shift(offset: f64) -> PiecewiseAffineMap {
    PiecewiseAffineMap::from_pieces(&[0.0, 1.0], &[(1.0, offset)], true)
}

fn doubling_map() -> PiecewiseAffineMap {
    PiecewiseAffineMap::from_pieces(&[0.0, 0.5, 1.0], &[(2.0, 0.0), (2.0, -1.0)], true)
}

/// Time-1 map of dx/dt = sin(2 pi x), tabulated on 4097 nodes by RK4.
fn gradient_time_one_map() -> PiecewiseAffineMap {
    let nodes = 4096usize;
    let steps = 64usize;
    let h = 1.0 / steps as f64;
    let f = |x: f64| (2.0 * std::f64::consts::PI * x).sin();
    let samples: Vec<f64> = (0..=nodes)
        .map(|i| {
            let mut x = i as f64 / nodes as f64;
            for _ in 0..steps {
                let k1 = f(x);
                let k2 = f(x + 0.5 * h * k1);
                let k3 = f(x + 0.5 * h * k2);
                let k4 = f(x + h * k3);
                x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                x = x.clamp(0.0, 1.0);
            }
            x
        })
        .collect();
    PiecewiseAffineMap::from_samples(&samples)
}

fn build(id: &str) -> Option<GalleryEntry> {
    let sqrt2 = std::f64::consts::SQRT_2;
    let entry = match id {
        "bernoulli_convolution" => GalleryEntry {
            id: "bernoulli_convolution",
            system: RandomSystem::new(
                DomainSpec::circle(),
                ifs(
                    vec![
                        PiecewiseAffineMap::from_pieces(&[0.0, 1.0], &[(0.5, 0.0)], false),
                        PiecewiseAffineMap::from_pieces(&[0.0, 1.0], &[(0.5, 0.5)], false),
                    ],
                    vec![0.5, 0.5],
                ),
            ),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, FOR),
                (ClassTag::Ac, FOR),
                (ClassTag::C, AGAINST),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
                (ClassTag::Mixing, FOR),
                (ClassTag::Exact, AGAINST),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "two contracting halves; mixing toward Lebesgue but never exact",
            exploratory: false,
        },
        "expanding_ifs_23" => GalleryEntry {
            id: "expanding_ifs_23",
            system: RandomSystem::new(
                DomainSpec::circle(),
                ifs(
                    vec![
                        doubling_map(),
                        PiecewiseAffineMap::from_pieces(
                            &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
                            &[(3.0, 0.0), (3.0, -1.0), (3.0, -2.0)],
                            true,
                        ),
                    ],
                    vec![0.5, 0.5],
                ),
            ),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, FOR),
                (ClassTag::Ac, FOR),
                (ClassTag::C, FOR),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "random choice of x2 / x3 expanding maps; constrictive-free spreading",
            exploratory: false,
        },
        "rotations_irrational_diff" => GalleryEntry {
            id: "rotations_irrational_diff",
            system: RandomSystem::new(
                DomainSpec::circle(),
                ifs(vec![shift(sqrt2 / 2.0), shift(0.0)], vec![0.5, 0.5]),
            ),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, FOR),
                (ClassTag::Ac, FOR),
                (ClassTag::C, FOR),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "random rotations whose angle difference is irrational",
            exploratory: false,
        },
        "rotations_rational_diff" => GalleryEntry {
            id: "rotations_rational_diff",
            system: RandomSystem::new(
                DomainSpec::circle(),
                ifs(
                    vec![shift(sqrt2 / 4.0), shift(sqrt2 / 4.0 + 0.5)],
                    vec![0.5, 0.5],
                ),
            ),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, FOR),
                (ClassTag::Ac, AGAINST),
                (ClassTag::C, AGAINST),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "rotation angles differing by 1/2; Cesaro averages converge, iterates do not spread",
            exploratory: false,
        },
        "rotations_rational" => GalleryEntry {
            id: "rotations_rational",
            system: RandomSystem::new(
                DomainSpec::circle(),
                ifs(vec![shift(0.25), shift(0.75)], vec![0.5, 0.5]),
            ),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, AGAINST),
                (ClassTag::Ac, AGAINST),
                (ClassTag::C, AGAINST),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::Unspecified,
            notes: "both rotation angles rational: an invariant four-cell comb of vanishing measure",
            exploratory: false,
        },
        "additive_pinned_zero" => GalleryEntry {
            id: "additive_pinned_zero",
            system: RandomSystem::new(
                DomainSpec::circle(),
                SystemKind::AdditiveNoise {
                    base: PiecewiseAffineMap::identity(),
                    noise: NoiseSpec::uniform(),
                },
            )
            .with_fixed_points(&[0.0]),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, FOR),
                (ClassTag::Ac, FOR),
                (ClassTag::C, FOR),
                (ClassTag::Uc, FOR),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "uniform additive noise with the origin pinned: one null set defeats minorization",
            exploratory: false,
        },
        "alternating_halves" => GalleryEntry {
            id: "alternating_halves",
            system: RandomSystem::new(
                DomainSpec::circle(),
                SystemKind::AdditiveNoise {
                    base: PiecewiseAffineMap::from_pieces(
                        &[0.0, 0.5, 1.0],
                        &[(0.0, 0.5), (0.0, 0.0)],
                        true,
                    ),
                    noise: NoiseSpec::block(0.0, 0.5, 2.0),
                },
            ),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, FOR),
                (ClassTag::Ac, FOR),
                (ClassTag::C, FOR),
                (ClassTag::Uc, FOR),
                (ClassTag::D, FOR),
                (ClassTag::Dstar, AGAINST),
                (ClassTag::Mixing, AGAINST),
                (ClassTag::Exact, AGAINST),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "each half is sent uniformly onto the other: minorized after two steps, period two",
            exploratory: false,
        },
        "mult_contraction" => GalleryEntry {
            id: "mult_contraction",
            system: RandomSystem::new(
                DomainSpec::circle(),
                SystemKind::MultiplicativeNoise {
                    base: PiecewiseAffineMap::from_pieces(&[0.0, 1.0], &[(0.5, 0.0)], false),
                    noise: NoiseSpec::uniform(),
                    epsilon: 0.5,
                },
            )
            .with_fixed_points(&[0.0]),
            expected: expect(&[
                (ClassTag::S, AGAINST),
                (ClassTag::Wap, AGAINST),
                (ClassTag::Mc, AGAINST),
                (ClassTag::Ac, AGAINST),
                (ClassTag::C, AGAINST),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "noisy contraction toward an atom at the origin: no invariant density at all",
            exploratory: false,
        },
        "mult_jump" => GalleryEntry {
            id: "mult_jump",
            system: RandomSystem::new(
                DomainSpec::circle(),
                SystemKind::MultiplicativeNoise {
                    base: PiecewiseAffineMap::from_pieces(
                        &[0.0, 2f64.powi(-40), 1.0],
                        &[(0.0, 0.5), (0.5, 0.0)],
                        false,
                    ),
                    noise: NoiseSpec::uniform(),
                    epsilon: 0.5,
                },
            ),
            expected: expect(&[
                (ClassTag::S, AGAINST),
                (ClassTag::Wap, AGAINST),
                (ClassTag::Mc, AGAINST),
                (ClassTag::Ac, AGAINST),
                (ClassTag::C, AGAINST),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "the contraction with its atom kicked away on a sliver: orbits still collapse toward it",
            exploratory: false,
        },
        "mult_doubling" => GalleryEntry {
            id: "mult_doubling",
            system: RandomSystem::new(
                DomainSpec::circle(),
                SystemKind::MultiplicativeNoise {
                    base: doubling_map(),
                    noise: NoiseSpec::uniform(),
                    epsilon: 0.5,
                },
            )
            .with_fixed_points(&[0.0]),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, FOR),
                (ClassTag::Ac, FOR),
                (ClassTag::C, FOR),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "damped doubling: an integrable invariant density with a logarithmic spike at zero",
            exploratory: false,
        },
        "blend_gradient_sinks" => GalleryEntry {
            id: "blend_gradient_sinks",
            system: RandomSystem::new(
                DomainSpec::interval(),
                SystemKind::BlendNoise { base: gradient_time_one_map() },
            ),
            expected: BTreeMap::new(),
            expected_components: ExpectedComponents::Unspecified,
            notes: "interpolation toward a gradient flow's time-one map; exploratory",
            exploratory: true,
        },
        "direct_sum_expanding_contracting" => GalleryEntry {
            id: "direct_sum_expanding_contracting",
            system: {
                // Left block: doubling mixed with a doubling twisted by an
                // irrational offset g. The full-mantissa additions keep float
                // orbits from decaying onto the dyadic sublattice (plain
                // integer-slope maps annihilate low bits and collapse to 0),
                // and the seam breakpoints (1/2-g)/2 and (1-g)/2 make the
                // piece values hit 0 and 1/2 exactly, so the block never
                // leaks into the right half.
                let g = std::f64::consts::SQRT_2 / 4.0;
                let x1 = (0.5 - g) / 2.0;
                let x2 = (1.0 - g) / 2.0;
                RandomSystem::new(
                    DomainSpec::interval(),
                    ifs(
                        vec![
                            PiecewiseAffineMap::from_pieces(
                                &[0.0, 0.25, 0.5, 1.0],
                                &[(2.0, 0.0), (2.0, -0.5), (0.125, 0.5)],
                                false,
                            ),
                            PiecewiseAffineMap::from_pieces(
                                &[0.0, x1, x2, 0.5, 1.0],
                                &[(2.0, g), (2.0, g - 0.5), (2.0, g - 1.0), (0.125, 0.875)],
                                false,
                            ),
                        ],
                        vec![0.5, 0.5],
                    ),
                )
            },
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, AGAINST),
                (ClassTag::Mc, AGAINST),
                (ClassTag::Ac, AGAINST),
                (ClassTag::C, AGAINST),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::AtLeast(2),
            notes: "random plain-or-twisted doubling on the left half, a Cantor contraction on the right: two invariant blocks, one with no absolutely continuous limit",
            exploratory: false,
        },
        "two_sink_additive" => GalleryEntry {
            id: "two_sink_additive",
            system: RandomSystem::new(
                DomainSpec::interval(),
                SystemKind::AdditiveNoise {
                    base: PiecewiseAffineMap::from_pieces(
                        &[0.0, 0.375, 0.4375, 0.5625, 0.625, 1.0],
                        &[
                            (0.25, 0.125),
                            (0.5, 0.03125),
                            (3.0, -1.0625),
                            (0.5, 0.34375),
                            (0.25, 0.5),
                        ],
                        false,
                    ),
                    noise: NoiseSpec::block(0.0, 0.125, 8.0),
                },
            ),
            expected: expect(&[(ClassTag::S, FOR)]),
            expected_components: ExpectedComponents::AtLeast(2),
            notes: "two noisy attracting bands separated by an expanding ridge",
            exploratory: false,
        },
        "deterministic_doubling" => GalleryEntry {
            id: "deterministic_doubling",
            system: RandomSystem::new(
                DomainSpec::circle(),
                SystemKind::Deterministic { map: doubling_map() },
            ),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, FOR),
                (ClassTag::Ac, FOR),
                (ClassTag::C, FOR),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
                (ClassTag::Mixing, FOR),
                (ClassTag::Exact, FOR),
            ]),
            expected_components: ExpectedComponents::Exact(1),
            notes: "the doubling map alone: exact, but atomic transitions rule out minorization",
            exploratory: false,
        },
        "deterministic_rational_rotation" => GalleryEntry {
            id: "deterministic_rational_rotation",
            system: RandomSystem::new(
                DomainSpec::circle(),
                SystemKind::Deterministic { map: shift(0.25) },
            ),
            expected: expect(&[
                (ClassTag::S, FOR),
                (ClassTag::Wap, FOR),
                (ClassTag::Mc, AGAINST),
                (ClassTag::Ac, AGAINST),
                (ClassTag::C, AGAINST),
                (ClassTag::Uc, AGAINST),
                (ClassTag::D, AGAINST),
                (ClassTag::Dstar, AGAINST),
            ]),
            expected_components: ExpectedComponents::Unspecified,
            notes: "rotation by 1/4: every point cycles on four atoms",
            exploratory: false,
        },
        _ => return None,
    };
    Some(entry)
}

pub fn gallery_ids() -> Vec<&'static str> {
    vec![
        "bernoulli_convolution",
        "expanding_ifs_23",
        "rotations_irrational_diff",
        "rotations_rational_diff",
        "rotations_rational",
        "additive_pinned_zero",
        "alternating_halves",
        "mult_contraction",
        "mult_jump",
        "mult_doubling",
        "blend_gradient_sinks",
        "direct_sum_expanding_contracting",
        "two_sink_additive",
        "deterministic_doubling",
        "deterministic_rational_rotation",
    ]
}

/// Fetch a gallery system by id, validated and ready to use.
pub fn gallery_entry(id: &str) -> Result<GalleryEntry> {
    let mut entry = build(id).ok_or_else(|| TlError::UnknownId(id.to_string()))?;
    entry.system = validate_system(entry.system)?;
    Ok(entry)
}

pub fn list_gallery() -> Vec<GalleryEntry> {
    gallery_ids()
        .into_iter()
        .map(|id| gallery_entry(id).expect("gallery entries validate"))
        .collect()
}
