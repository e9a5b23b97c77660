mod common;

use cfs_core::action::{
    causal_action, classify, lagrangian, lagrangian_f2_angles, lagrangian_n1_closed, product_spectrum,
};
use cfs_core::geometry::{cone_classify, plot_rows, spin_projection};
use cfs_core::io::StoredConfiguration;
use cfs_core::linalg::c;
use cfs_core::operators::{f2_from_bloch, f2_to_bloch, BlochCoords, CausalClass, Configuration};
use cfs_core::optimize::{minimize_two_stage, OptimizerSettings};
use cfs_core::oracles::{dirac4d_operator, iso_lagrangian, orthogonal_min_config, sic_tetrahedron};
use cfs_core::parametrize::{decode, dof, init_random, softmax, Shape, UnconstrainedParams};
use cfs_core::gradient::{action_of_params, value_and_grad};
use common::{random_point, random_unitary};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 1e-3).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bloch_spectrum_and_round_trip(tau in 1.0f64..8.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let Some(d) = unit([x, y, z]) else { return Ok(()) };
        let p = f2_from_bloch(BlochCoords::new(tau, d).unwrap());
        let ev = p.eigenvalues();
        prop_assert!((ev[0] - 0.5 * (1.0 - tau)).abs() < 1e-12);
        prop_assert!((ev[1] - 0.5 * (1.0 + tau)).abs() < 1e-12);
        let back = f2_to_bloch(&p).unwrap();
        prop_assert!((back.tau() - tau).abs() < 1e-12);
        for k in 0..3 {
            prop_assert!((back.direction()[k] - d[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetry_is_exact(seed in any::<u64>(), n in 1usize..3, extra in 0usize..2) {
        let mut r = rng(seed);
        let f = 2 * n + extra;
        let x = random_point(&mut r, n, f);
        let y = random_point(&mut r, n, f);
        let a = lagrangian(&x, &y).unwrap();
        let b = lagrangian(&y, &x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn closed_forms_agree(seed in any::<u64>(), f in 2usize..5) {
        let mut r = rng(seed);
        let x = random_point(&mut r, 1, f);
        let y = random_point(&mut r, 1, f);
        let l = lagrangian(&x, &y).unwrap();
        prop_assert!((l - lagrangian_n1_closed(&x, &y).unwrap()).abs() < 1e-10);
        if f == 2 {
            let (bx, by) = (f2_to_bloch(&x).unwrap(), f2_to_bloch(&y).unwrap());
            let la = lagrangian_f2_angles(bx.tau(), by.tau(), bx.angle_to(&by));
            prop_assert!((l - la).abs() < 1e-10);
        }
    }

    #[test]
    fn spacelike_pairs_have_zero_lagrangian(seed in any::<u64>(), n in 1usize..3) {
        let mut r = rng(seed);
        let x = random_point(&mut r, n, 2 * n + 1);
        let y = random_point(&mut r, n, 2 * n + 1);
        let s = product_spectrum(&x, &y).unwrap();
        if s.causal_class == CausalClass::Spacelike {
            prop_assert!(s.lagrangian() < 1e-12);
        }
    }

    #[test]
    fn unitary_invariance(seed in any::<u64>(), n in 1usize..3, m in 1usize..5) {
        let mut r = rng(seed);
        let f = 2 * n + 1;
        let pts: Vec<_> = (0..m).map(|_| random_point(&mut r, n, f)).collect();
        let u = random_unitary(&mut r, f);
        let a = causal_action(&Configuration::equal_weights(pts.clone()).unwrap()).unwrap();
        let rotated: Vec<_> = pts.iter().map(|p| p.conjugated(&u).unwrap()).collect();
        let b = causal_action(&Configuration::equal_weights(rotated).unwrap()).unwrap();
        prop_assert!((a.action - b.action).abs() < 1e-10);
        prop_assert!((a.boundedness - b.boundedness).abs() < 1e-10);
        prop_assert_eq!(a.class_matrix, b.class_matrix);
    }

    #[test]
    fn diagonal_terms_bound_the_action(seed in any::<u64>(), m in 1usize..6) {
        let mut r = rng(seed);
        let pts: Vec<_> = (0..m).map(|_| random_point(&mut r, 1, 3)).collect();
        let cfg = Configuration::equal_weights(pts).unwrap();
        let rep = causal_action(&cfg).unwrap();
        let diag: f64 = (0..m).map(|i| cfg.weights()[i].powi(2) * rep.pair_lagrangians[i][i]).sum();
        prop_assert!(rep.action >= diag - 1e-12);
        // For spin one the self term is tau^2 / 2 >= 1/2.
        prop_assert!(rep.action >= 0.5 / m as f64 - 1e-12);
    }

    #[test]
    fn decode_is_valid(seed in any::<u64>(), n in 1usize..3, extra in 0usize..2, m in 1usize..4) {
        let shape = Shape::new(n, 2 * n + extra, m).unwrap();
        let p = init_random(shape, seed, 1.0, 1.0, 0.7).unwrap();
        let cfg = decode(&p).unwrap();
        prop_assert!((cfg.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for pt in cfg.points() {
            let ev = pt.eigenvalues();
            let scale = ev.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            prop_assert!((pt.matrix().trace().re - 1.0).abs() < 1e-12 * scale);
            prop_assert!(ev.iter().filter(|v| **v > 1e-12 * scale).count() <= n);
            prop_assert!(ev.iter().filter(|v| **v < -1e-12 * scale).count() <= n);
        }
        let (v, _) = value_and_grad(&p).unwrap();
        prop_assert!((v - action_of_params(&p).unwrap()).abs() <= 1e-12 * v.max(1.0));
    }

    #[test]
    fn softmax_shift_invariance(xs in prop::collection::vec(-5.0f64..5.0, 1..8), shift in -20.0f64..20.0) {
        let a = softmax(&xs);
        let b = softmax(&xs.iter().map(|x| x + shift).collect::<Vec<_>>());
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_is_orthogonal_to_weight_shift(seed in any::<u64>()) {
        let shape = Shape::new(1, 3, 3).unwrap();
        let p = init_random(shape, seed, 0.3, 0.1, 0.5).unwrap();
        let (_, g) = value_and_grad(&p).unwrap();
        let s: f64 = g[..shape.m].iter().sum();
        prop_assert!(s.abs() < 1e-10);
        let mut q = p.clone();
        q.c_tilde.iter_mut().for_each(|v| *v += 3.0);
        prop_assert!((action_of_params(&q).unwrap() - action_of_params(&p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dof_identity(n in 1usize..3, extra in 0usize..4, m in 1usize..6) {
        let f = 2 * n + extra;
        let r = dof(n, f, m).unwrap();
        prop_assert_eq!(r.d_unconstrained - r.d_effective, 1 + m + m * 2 * n * (2 * n + 1));
    }

    #[test]
    fn iso_exceeds_one_sixth(t1 in 1.0f64..20.0, t2 in 1.0f64..20.0) {
        prop_assume!((t1 - 1.0).abs() + (t2 - 1.0).abs() > 1e-9);
        prop_assert!(iso_lagrangian(t1, t2) > 1.0 / 6.0);
    }

    #[test]
    fn dirac4d_eigenvalues_pair_up(tau in 1.0f64..4.0, seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut vec5 = || {
            let v: Vec<f64> = (0..5).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
        };
        let (a, b) = (vec5(), vec5());
        let s = product_spectrum(&dirac4d_operator(tau, &a).unwrap(), &dirac4d_operator(tau, &b).unwrap()).unwrap();
        for (i, u) in s.eigenvalues.iter().enumerate() {
            let partner = s.eigenvalues.iter().enumerate().any(|(j, v)| i != j && (u - v).norm() < 1e-9);
            prop_assert!(partner, "{:?}", s.eigenvalues);
        }
    }

    #[test]
    fn cone_matches_spectrum(seed in any::<u64>(), f in 2usize..5) {
        let mut r = rng(seed);
        let x = random_point(&mut r, 1, f);
        let y = random_point(&mut r, 1, f);
        let p = spin_projection(&x, &y).unwrap();
        prop_assert_eq!(cone_classify(&p), classify(&x, &y).unwrap());
        let tr = p.y0;
        let ev = y.eigenvalues();
        prop_assert!(ev[0] - 1e-9 <= tr && tr <= ev[f - 1] + 1e-9);
    }

    #[test]
    fn plot_rows_ignore_rotations_in_the_spatial_plane(seed in any::<u64>(), phi in 0.0f64..6.28) {
        let mut r = rng(seed);
        let pts: Vec<_> = (0..4).map(|_| random_point(&mut r, 1, 3)).collect();
        let base = plot_rows(&Configuration::equal_weights(pts.clone()).unwrap(), 0, None).unwrap();
        // A relative phase between the two image vectors of the reference rotates (y1, y2).
        let (_, basis) = pts[0].image();
        let mut u = cfs_core::CMat::identity(3, 3);
        let ph = c(0.0, phi).exp();
        u += &basis.column(1) * basis.column(1).adjoint() * (ph - c(1.0, 0.0));
        let rotated: Vec<_> = pts.iter().enumerate()
            .map(|(i, p)| if i == 0 { p.clone() } else { p.conjugated(&u).unwrap() })
            .collect();
        let other = plot_rows(&Configuration::equal_weights(rotated).unwrap(), 0, None).unwrap();
        for (a, b) in base.iter().zip(&other) {
            prop_assert!((a.hat_y0.unwrap() - b.hat_y0.unwrap()).abs() < 1e-10);
            prop_assert!((a.hat_r.unwrap() - b.hat_r.unwrap()).abs() < 1e-10);
            prop_assert_eq!(a.class, b.class);
        }
    }

    #[test]
    fn stored_configurations_reload(seed in any::<u64>(), n in 1usize..3, m in 1usize..4) {
        let mut r = rng(seed);
        let pts: Vec<_> = (0..m).map(|_| random_point(&mut r, n, 2 * n + 1)).collect();
        let cfg = Configuration::equal_weights(pts).unwrap();
        let stored = StoredConfiguration::from_configuration(&cfg);
        let text = serde_json::to_string(&stored).unwrap();
        let back: StoredConfiguration = serde_json::from_str(&text).unwrap();
        let cfg2 = back.to_configuration().unwrap();
        let (a, b) = (causal_action(&cfg).unwrap().action, causal_action(&cfg2).unwrap().action);
        prop_assert!((a - b).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn accepted_iterates_do_not_increase(seed in 0u64..1000) {
        let settings = OptimizerSettings { trace_stride: 1, max_iter_stage1: 60, max_iter_stage2: 30, ..Default::default() };
        let run = minimize_two_stage(Shape::new(1, 2, 3).unwrap(), seed, &settings).unwrap();
        for w in run.action_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15 * w[0].abs());
        }
    }
}

#[test]
fn oracle_configurations_match_their_exact_values() {
    for (n, m) in [(1, 1), (1, 3), (2, 2), (2, 3)] {
        let cfg = orthogonal_min_config(n, (m * n).max(2 * n), m).unwrap();
        let s = causal_action(&cfg).unwrap().action;
        assert!((s - 1.0 / (2.0 * m as f64 * (n as f64).powi(3))).abs() < 1e-10);
    }
    assert!((causal_action(&sic_tetrahedron()).unwrap().action - 1.0 / 6.0).abs() < 1e-10);
}

#[test]
fn decode_round_trips_through_flat_vector() {
    let shape = Shape::new(2, 5, 3).unwrap();
    let p = init_random(shape, 11, 0.3, 0.1, 0.5).unwrap();
    let q = UnconstrainedParams::from_flat(shape, &p.to_flat()).unwrap();
    assert_eq!(p, q);
}
