use mtgd::metrics::nondominated;
use mtgd::mtlnet::{Activation, MtlNetwork, NetworkShape};
use mtgd::problems::{
    even_weights, quadratic_ensemble, HessianSpread, QuadraticEnsemble, QuadraticTask, Zdt, P1,
};
use mtgd::scalarize::{exact_tchebycheff, smoothed_tchebycheff, weighted_sum};
use mtgd::solver::{init_states, run_from, InitMode, ReferenceMode};
use mtgd::theory::{expand_plan, symmetric_eigenvalues, verify_theorem1};
use mtgd::{
    build_coeffs, hypervolume, run, ObjectiveSet, Scalarization, SmoothingParams, SolverConfig,
    SubproblemSpec, TransferPlan, WeightVector,
};
use proptest::prelude::*;

fn weight_vec(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m)
}

fn smoothed_terms_oracle(losses: &[f64], w: &[f64], ideal: &[f64], eps: f64) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    losses
        .iter()
        .zip(w)
        .zip(ideal)
        .map(|((l, wj), z)| wj / s * ((l - z) * (l - z) + eps).sqrt())
        .collect()
}

proptest! {
    #[test]
    fn weighted_sum_is_linear(
        l1 in prop::collection::vec(-5.0f64..5.0, 3),
        l2 in prop::collection::vec(-5.0f64..5.0, 3),
        w in weight_vec(3),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let w = WeightVector::new(w).unwrap();
        let mix: Vec<f64> = l1.iter().zip(&l2).map(|(x, y)| a * x + b * y).collect();
        let lhs = weighted_sum(&mix, &w).unwrap();
        let rhs = a * weighted_sum(&l1, &w).unwrap() + b * weighted_sum(&l2, &w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn smoothed_value_lies_between_terms(
        losses in prop::collection::vec(0.0f64..3.0, 2..5),
        seed_w in prop::collection::vec(0.0f64..1.0, 5),
        alpha_s in 0.1f64..50.0,
        eps in 1e-4f64..1.0,
    ) {
        let m = losses.len();
        let mut w: Vec<f64> = seed_w[..m].to_vec();
        w[0] += 0.1;
        let ideal = vec![0.0; m];
        let u = smoothed_terms_oracle(&losses, &w, &ideal, eps);
        let v = smoothed_tchebycheff(&losses, &WeightVector::new(w).unwrap(), &ideal, &SmoothingParams::new(alpha_s, eps).unwrap()).unwrap();
        let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }

    #[test]
    fn permutation_leaves_scalarizations_unchanged(
        losses in prop::collection::vec(0.0f64..2.0, 3),
        w in weight_vec(3),
        perm_idx in 0usize..6,
    ) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let p = perms[perm_idx];
        let pl: Vec<f64> = p.iter().map(|&i| losses[i]).collect();
        let pw: Vec<f64> = p.iter().map(|&i| w[i]).collect();
        let ideal = [0.0; 3];
        let (w, pw) = (WeightVector::new(w).unwrap(), WeightVector::new(pw).unwrap());
        let s = SmoothingParams::default();
        let a = smoothed_tchebycheff(&losses, &w, &ideal, &s).unwrap();
        let b = smoothed_tchebycheff(&pl, &pw, &ideal, &s).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((weighted_sum(&losses, &w).unwrap() - weighted_sum(&pl, &pw).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn transfer_preserves_mean_and_contracts_max_norm(
        n in 2usize..12,
        j_frac in 0.0f64..1.0,
        d in 1usize..5,
        seed in any::<u64>(),
    ) {
        let j = 1 + ((n - 1) as f64 * j_frac) as usize;
        let weights = random_weights(n, seed);
        let plan = build_coeffs(&weights, j, 10).unwrap();
        let params = random_params(n, d, seed ^ 1);
        let mixed = plan.apply(&params, 1).unwrap();
        for k in 0..d {
            let before: f64 = params.iter().map(|p| p[k]).sum();
            let after: f64 = mixed.iter().map(|p| p[k]).sum();
            prop_assert!((before - after).abs() < 1e-10 * (1.0 + before.abs()));
        }
        let norm = |ps: &[Vec<f64>]| ps.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!(norm(&mixed) <= norm(&params) + 1e-12);
    }

    #[test]
    fn equal_params_are_fixed_points(n in 1usize..10, value in -5.0f64..5.0, seed in any::<u64>()) {
        let weights = random_weights(n, seed);
        let plan = build_coeffs(&weights, n.min(3), 10).unwrap();
        let params = vec![vec![value, -value]; n];
        let mixed = plan.apply(&params, 0).unwrap();
        for p in mixed {
            prop_assert!((p[0] - value).abs() < 1e-12 && (p[1] + value).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_coordinates_are_untouched(n in 2usize..8, seed in any::<u64>()) {
        let weights = random_weights(n, seed);
        let plan = build_coeffs(&weights, 2, 10).unwrap().with_coordinate_mask(&[true, false, true]).unwrap();
        prop_assert!(plan.validate().is_valid());
        let params = random_params(n, 3, seed);
        let mixed = plan.apply(&params, 1).unwrap();
        for (a, b) in params.iter().zip(&mixed) {
            prop_assert_eq!(a[1], b[1]);
        }
    }

    #[test]
    fn hv_is_monotone_under_improvement(
        pts in prop::collection::vec((0.0f64..1.2, 0.0f64..1.2), 1..15),
        which in any::<prop::sample::Index>(),
        shrink in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let mut set: Vec<Vec<f64>> = pts.iter().map(|(a, b)| vec![*a, *b]).collect();
        let r = [1.1, 1.1];
        let before = hypervolume(&set, &r).unwrap();
        let i = which.index(set.len());
        set[i][0] *= shrink.0;
        set[i][1] *= shrink.1;
        prop_assert!(hypervolume(&set, &r).unwrap() >= before - 1e-15);
    }

    #[test]
    fn hv_ignores_order_dominated_points_and_outsiders(
        pts in prop::collection::vec((0.0f64..1.2, 0.0f64..1.2, 0.0f64..1.2), 1..12),
        outside in (1.1f64..5.0, 0.0f64..5.0),
    ) {
        let set: Vec<Vec<f64>> = pts.iter().map(|(a, b, c)| vec![*a, *b, *c]).collect();
        let r = [1.1, 1.1, 1.1];
        let hv = hypervolume(&set, &r).unwrap();
        let mut rev = set.clone();
        rev.reverse();
        prop_assert!((hypervolume(&rev, &r).unwrap() - hv).abs() < 1e-12);
        prop_assert!((hypervolume(&nondominated(&set), &r).unwrap() - hv).abs() < 1e-12);
        let mut more = set.clone();
        more.push(vec![outside.0, outside.1, 0.0]);
        prop_assert_eq!(hypervolume(&more, &r).unwrap(), hv);
    }

    #[test]
    fn flatten_round_trip_is_bit_exact(
        input in 1usize..6,
        trunk in prop::collection::vec(1usize..5, 0..3),
        heads in prop::collection::vec(prop::collection::vec(1usize..4, 1..3), 1..4),
        seed in any::<u64>(),
    ) {
        let shape = NetworkShape::new(input, trunk, heads).unwrap();
        let net = MtlNetwork::init(shape.clone(), Activation::Tanh, seed);
        let flat = net.flatten();
        prop_assert_eq!(flat.len(), shape.param_count());
        let mut other = MtlNetwork::zeros(shape, Activation::Tanh);
        other.unflatten(&flat).unwrap();
        prop_assert!(other.flatten().iter().zip(&flat).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn p1_swaps_under_negation(theta in prop::collection::vec(-2.0f64..2.0, 20)) {
        let p = P1::new(20).unwrap();
        let neg: Vec<f64> = theta.iter().map(|v| -v).collect();
        let a = p.eval(&theta);
        let b = p.eval(&neg);
        prop_assert!((a[0] - b[1]).abs() < 1e-14 && (a[1] - b[0]).abs() < 1e-14);
    }
}

fn random_weights(n: usize, seed: u64) -> Vec<WeightVector> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            WeightVector::new(vec![rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0)]).unwrap()
        })
        .collect()
}

fn random_params(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect()
}

// The gap itself is not monotone along the grid (the softmax underestimate
// and the ε overestimate can cancel at small α_s), but it stays inside the
// envelope max(ln m / α_s, max λ · √ε), which is.
#[test]
fn smoothing_error_shrinks_along_grid() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let losses = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
        let a: f64 = rng.gen_range(0.05..0.95);
        let w = WeightVector::new(vec![a, 1.0 - a]).unwrap();
        let ideal = [0.0, 0.0];
        let exact = exact_tchebycheff(&losses, &w, &ideal).unwrap();
        let mut prev_envelope = f64::INFINITY;
        let mut last_gap = f64::INFINITY;
        for k in 0..7 {
            let (alpha_s, eps) = (2f64.powi(k), 0.1 * 0.5f64.powi(k));
            let p = SmoothingParams::new(alpha_s, eps).unwrap();
            let gap = (smoothed_tchebycheff(&losses, &w, &ideal, &p).unwrap() - exact).abs();
            let envelope = (2f64.ln() / alpha_s).max(a.max(1.0 - a) * eps.sqrt());
            assert!(
                gap <= envelope + 1e-12,
                "losses {losses:?} λ {a} k {k}: gap {gap} > {envelope}"
            );
            assert!(envelope <= prev_envelope);
            prev_envelope = envelope;
            last_gap = gap;
        }
        assert!(last_gap < 0.02);
    }
}

#[test]
fn even_weights_on_simplex_and_distinct() {
    for (m, n) in [
        (2, 1),
        (2, 2),
        (2, 10),
        (2, 37),
        (3, 1),
        (3, 10),
        (3, 21),
        (3, 50),
    ] {
        let w = even_weights(m, n).unwrap();
        assert_eq!(w.len(), n);
        for v in &w {
            assert!((v.components().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(v.components().iter().all(|c| *c >= 0.0));
        }
        for a in 0..n {
            for b in a + 1..n {
                assert!(w[a].distance(&w[b]) > 1e-9);
            }
        }
    }
}

#[test]
fn projection_holds_every_iteration_and_runs_repeat() {
    let problem = Zdt::zdt2(12).unwrap();
    let weights = even_weights(2, 6).unwrap();
    let specs = SubproblemSpec::family(
        &weights,
        Scalarization::SmoothedTchebycheff(SmoothingParams::default()),
        ReferenceMode::Analytic,
    );
    let mut config = SolverConfig::new(0.5, 1, build_coeffs(&weights, 2, 10).unwrap());
    config.projection = problem.bounds().cloned();
    let mut state = init_states(&problem, 6, InitMode::Random, 4).unwrap();
    for it in 1..=40 {
        config.max_iters = it;
        state = run_from(state, &problem, &specs, &config).unwrap().state;
        assert!(state
            .thetas
            .iter()
            .all(|t| problem.bounds().unwrap().contains(t)));
    }
    config.max_iters = 40;
    config.seed = 4;
    config.init = InitMode::Random;
    let a = run(&problem, &specs, &config).unwrap();
    let b = run(&problem, &specs, &config).unwrap();
    assert_eq!(a.state.history, b.state.history);
    assert_eq!(a.state.thetas, state.thetas);
}

#[test]
fn converged_zdt_solutions_reach_g_equal_one() {
    for problem in [Zdt::zdt1(20).unwrap(), Zdt::zdt2(20).unwrap()] {
        let weights = mtgd::problems::interior_weights(10).unwrap();
        let specs = SubproblemSpec::family(
            &weights,
            Scalarization::SmoothedTchebycheff(SmoothingParams::default()),
            ReferenceMode::Analytic,
        );
        let mut config = SolverConfig::new(0.3, 300, build_coeffs(&weights, 2, 10).unwrap());
        config.projection = problem.bounds().cloned();
        let out = run(&problem, &specs, &config).unwrap();
        for th in &out.state.thetas {
            let tail: f64 = th[1..].iter().sum::<f64>() / (th.len() - 1) as f64;
            assert!(tail < 0.05, "{:?}: mean tail {tail}", problem.kind());
        }
    }
}

#[test]
fn expanded_plans_are_positive_semidefinite() {
    for n in 2..12 {
        let w = random_weights(n, n as u64);
        for j in 1..=n {
            let plan = build_coeffs(&w, j, 10).unwrap();
            let eig = symmetric_eigenvalues(&expand_plan(&plan, 2).unwrap()).unwrap();
            assert!(eig[0] >= -1e-12, "n={n} j={j}: {}", eig[0]);
        }
    }
}

#[test]
fn coinciding_optima_never_lose_to_no_transfer() {
    let spread = HessianSpread::new(0.5, 2.0).unwrap();
    let plan_base = build_coeffs(&even_weights(2, 5).unwrap(), 2, 10).unwrap();
    for seed in 0..20 {
        let random = quadratic_ensemble(5, 4, spread, seed).unwrap();
        let shared = random.tasks()[0].center.clone();
        let tasks: Vec<QuadraticTask> = random
            .tasks()
            .iter()
            .map(|t| QuadraticTask {
                center: shared.clone(),
                hessian: t.hessian.clone(),
            })
            .collect();
        let ens = QuadraticEnsemble::from_tasks(tasks, spread).unwrap();
        assert_eq!(ens.b0(), 0.0);
        let theta0: Vec<Vec<f64>> = random_params(5, 4, seed);
        for t0 in [1, 3, 10, 25] {
            let plan = plan_base.clone().with_t0(t0);
            let rep = verify_theorem1(&ens, &plan, 0.2, &theta0, t0).unwrap();
            assert!(
                rep.err_t0_with() <= rep.err_t0_without() + 1e-12,
                "seed {seed} t0 {t0}"
            );
        }
    }
}

#[test]
fn error_bound_chain_holds_on_random_ensembles() {
    let spread = HessianSpread::new(0.5, 2.0).unwrap();
    let plan = build_coeffs(&even_weights(2, 5).unwrap(), 2, 10).unwrap();
    for seed in 0..30 {
        let ens = quadratic_ensemble(5, 4, spread, seed).unwrap();
        let rep = verify_theorem1(&ens, &plan, 0.2, &random_params(5, 4, seed), 20).unwrap();
        assert!(rep.error_bound_holds, "seed {seed}");
        assert!(rep.premises.all());
    }
}

#[test]
fn identity_plan_is_identity_even_with_mask() {
    let plan = TransferPlan::identity(4)
        .with_coordinate_mask(&[false, true])
        .unwrap();
    let params = random_params(4, 2, 9);
    assert_eq!(plan.apply(&params, 0).unwrap(), params);
}
