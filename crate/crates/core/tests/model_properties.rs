use edp_core::dsi::{self, MatchConfig, MatchDirection};
use edp_core::grid_model::{evaluate_energy, CostVolume, DisparityField, LabelSpace, PixelGrid, Prior, SmoothnessModel};
use edp_core::oracle::{oracle_energy, random_grid, TinyInstance};
use proptest::prelude::*;

fn instance(seed: u64, w: usize, h: usize, q: u32) -> TinyInstance {
    let (volume, model) = random_grid(seed, w, h, q).unwrap();
    TinyInstance { seed, volume, model }
}

fn random_field(seed: u64, w: usize, h: usize, q: u32) -> DisparityField {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let labels = (0..w * h)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % u64::from(q)) as u32
        })
        .collect();
    DisparityField::new(w, h, labels).unwrap()
}

fn transpose_volume(v: &CostVolume) -> CostVolume {
    CostVolume::from_fn(v.height(), v.width(), v.space().clone(), v.c_max(), |x, y, l| v.cost(y, x, l)).unwrap()
}

fn transpose_field(f: &DisparityField) -> DisparityField {
    let mut out = DisparityField::constant(f.height(), f.width(), 0);
    for y in 0..f.height() {
        for x in 0..f.width() {
            out.set(y, x, f.label(x, y));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_matches_independent_summation(seed in 0u64..10_000, w in 1usize..6, h in 1usize..6, q in 1u32..5) {
        let inst = instance(seed, w, h, q.max(1));
        let field = random_field(seed, w, h, q.max(1));
        let e = evaluate_energy(&inst.volume, &inst.model, &field).unwrap();
        prop_assert_eq!(e.total(), oracle_energy(&inst.volume, &inst.model, &field));
    }

    #[test]
    fn energy_is_invariant_under_transposition(seed in 0u64..10_000, w in 1usize..6, h in 1usize..6) {
        // uniform weights so the edge set maps onto itself
        let inst = instance(seed, w, h, 3);
        let model = SmoothnessModel::new(inst.model.prior, inst.model.truncation, inst.model.lambda).unwrap();
        let field = random_field(seed + 1, w, h, 3);
        let e = evaluate_energy(&inst.volume, &model, &field).unwrap();
        let t = evaluate_energy(&transpose_volume(&inst.volume), &model, &transpose_field(&field)).unwrap();
        prop_assert_eq!(e, t);
    }

    #[test]
    fn zero_lambda_energy_is_data_term(seed in 0u64..10_000, w in 1usize..6, h in 1usize..6) {
        let inst = instance(seed, w, h, 3);
        let model = SmoothnessModel { lambda: 0, ..inst.model.clone() };
        let field = random_field(seed, w, h, 3);
        let e = evaluate_energy(&inst.volume, &model, &field).unwrap();
        prop_assert_eq!(e.smoothness, 0);
        prop_assert_eq!(e.total(), e.data);
    }

    #[test]
    fn data_argmin_has_smallest_data_term(seed in 0u64..10_000, w in 1usize..6, h in 1usize..6) {
        let inst = instance(seed, w, h, 3);
        let argmin = DisparityField::data_argmin(&inst.volume);
        let other = random_field(seed, w, h, 3);
        let a = evaluate_energy(&inst.volume, &inst.model, &argmin).unwrap();
        let b = evaluate_energy(&inst.volume, &inst.model, &other).unwrap();
        prop_assert!(a.data <= b.data);
    }

    #[test]
    fn energy_scales_exactly(seed in 0u64..10_000, w in 1usize..5, h in 1usize..5) {
        let inst = instance(seed, w, h, 3);
        let doubled = CostVolume::from_fn(w, h, inst.volume.space().clone(), 200, |x, y, v| 2 * inst.volume.cost(x, y, v)).unwrap();
        let field = random_field(seed, w, h, 3);
        let e = evaluate_energy(&inst.volume, &inst.model, &field).unwrap().total();
        let e2 = evaluate_energy(&doubled, &inst.model.scaled(2), &field).unwrap().total();
        prop_assert_eq!(e2, 2 * e);
    }
}

fn random_image(seed: u64, w: usize, h: usize, channels: usize) -> PixelGrid {
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    PixelGrid::from_fn(w, h, channels, |_, _, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 24) as u8
    })
    .unwrap()
}

fn shift(img: &PixelGrid, dx: usize, dy: usize) -> PixelGrid {
    PixelGrid::from_fn(img.width() + dx, img.height() + dy, img.channels(), |x, y, c| {
        if x < dx || y < dy {
            7
        } else {
            img.pixel(x - dx, y - dy)[c]
        }
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn costs_are_bounded_and_composite_is_smaller(seed in 0u64..10_000, l2 in 1u32..3, channels in prop::sample::select(vec![1usize, 3])) {
        let (a, b, c) = (random_image(seed, 9, 6, channels), random_image(seed + 1, 9, 6, channels), random_image(seed + 2, 9, 6, channels));
        let cfg = MatchConfig::new(l2, LabelSpace::stereo(4).unwrap(), MatchDirection::Backward).unwrap();
        let right = dsi::build_cost_volume(&a, &b, &cfg).unwrap();
        let mirrored = MatchConfig { direction: MatchDirection::Forward, ..cfg.clone() };
        let left = dsi::build_cost_volume(&a, &c, &mirrored).unwrap();
        let composite = dsi::build_composite_cost(&a, &b, &c, &cfg).unwrap();
        prop_assert!(right.costs().iter().all(|&v| v <= cfg.c_max()));
        for ((&m, &r), &l) in composite.costs().iter().zip(right.costs()).zip(left.costs()) {
            prop_assert!(m <= r && m <= l);
            prop_assert_eq!(m, r.min(l));
        }
    }

    #[test]
    fn interior_costs_are_translation_consistent(seed in 0u64..10_000, dx in 0usize..4, dy in 0usize..3, motion in any::<bool>()) {
        let (a, b) = (random_image(seed, 10, 7, 1), random_image(seed + 9, 10, 7, 1));
        let space = if motion { LabelSpace::motion(2, 1).unwrap() } else { LabelSpace::stereo(3).unwrap() };
        let cfg = MatchConfig::new(2, space.clone(), MatchDirection::Forward).unwrap();
        let base = dsi::build_cost_volume(&a, &b, &cfg).unwrap();
        let moved = dsi::build_cost_volume(&shift(&a, dx, dy), &shift(&b, dx, dy), &cfg).unwrap();
        for y in 0..7 {
            for x in 0..10 {
                for v in 0..space.count() {
                    let (ox, oy) = (space.offset(v, 0), if motion { space.offset(v, 1) } else { 0 });
                    let (tx, ty) = (x as i32 + ox, y as i32 + oy);
                    if tx >= 0 && ty >= 0 && tx < 10 && ty < 7 {
                        prop_assert_eq!(base.cost(x, y, v), moved.cost(x + dx, y + dy, v));
                    }
                }
            }
        }
    }

    #[test]
    fn lambda_estimate_is_scale_covariant(seed in 0u64..10_000, l1 in 1u32..3, g in 1u32..6) {
        let inst = instance(seed, 5, 4, 3);
        let prior = Prior::from_exponent(l1).unwrap();
        let doubled = CostVolume::from_fn(5, 4, inst.volume.space().clone(), 200, |x, y, v| 2 * inst.volume.cost(x, y, v)).unwrap();
        let lambda = dsi::estimate_lambda(&inst.volume, prior, 2, g).unwrap();
        let lambda2 = dsi::estimate_lambda(&doubled, prior, 2, g).unwrap();
        prop_assert!(lambda2 == 2 * lambda || lambda2 == 2 * lambda + 1, "{} vs {}", lambda, lambda2);
    }
}
