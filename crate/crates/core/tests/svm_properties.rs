mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use snpsvm::svm::{primal_objective, slacks};
use snpsvm::{dual_objective, geometric_margin, kkt_violation, train, Label, LabeledVector, SvmConfig, SvmModel};

fn reconstruction_error(model: &SvmModel, data: &[LabeledVector]) -> f64 {
    let n = model.dim();
    let mut w = vec![0.0; n];
    for (v, a) in data.iter().zip(model.alphas()) {
        for (wk, xk) in w.iter_mut().zip(&v.x) {
            *wk += a * v.y.sign() * xk;
        }
    }
    w.iter()
        .zip(model.w())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn worked_example_dual_is_quadratic_in_shared_alpha() {
    let data = vec![lv(&[0.0, 2.0], 1.0), lv(&[0.0, -2.0], -1.0)];
    // With a_1 = a_2 = a, w = (0, 4a), so W(a) = 2a - 8a^2.
    for a in [0.0, 0.05, 0.125, 0.3, 1.0] {
        let expected = dual_by_double_sum(&[a, a], &data);
        assert!((expected - (2.0 * a - 8.0 * a * a)).abs() < 1e-12);
        assert!((dual_objective(&[a, a], &data).unwrap() - expected).abs() < 1e-12);
    }
    let (model, diag) = train(&data, &SvmConfig::hard_margin()).unwrap();
    assert!((model.alphas()[0] - 0.125).abs() < 1e-9);
    assert!((diag.dual_objective - 0.125).abs() < 1e-9);
    // strong duality against 1/2 ||w||^2
    assert!((diag.primal_objective - diag.dual_objective).abs() < 1e-9);
}

#[test]
fn matches_brute_force_on_small_instances() {
    let mut r = rng(11);
    for case in 0..60 {
        let l = r.gen_range(2..=6);
        let n = r.gen_range(1..=3);
        let c = [0.5, 1.0, 10.0][case % 3];
        let data = random_dataset(&mut r, l, n);
        let (oracle, _) = brute_force_dual(&data, c);
        let (model, diag) = train(&data, &SvmConfig::soft(c)).unwrap();
        assert!(diag.converged, "case {case}: {diag:?}");
        let value = dual_by_double_sum(model.alphas(), &data);
        assert!((value - oracle).abs() <= 1e-6, "case {case}: {value} vs {oracle}");
    }
}

#[test]
fn slack_sum_is_non_increasing_in_c() {
    let mut r = rng(5);
    let data = random_dataset(&mut r, 6, 2);
    let mut previous = f64::INFINITY;
    for c in [0.1, 1.0, 10.0] {
        let (model, diag) = train(&data, &SvmConfig::soft(c)).unwrap();
        assert!(diag.converged);
        let (oracle, _) = brute_force_dual(&data, c);
        assert!((diag.dual_objective - oracle).abs() <= 1e-6);
        let s: f64 = slacks(&model, &data).unwrap().iter().sum();
        assert!((s - diag.slack_sum).abs() < 1e-12);
        assert!(s <= previous + 1e-6, "C={c}: {s} > {previous}");
        previous = s;
    }
}

#[test]
fn perturbing_a_support_multiplier_breaks_kkt() {
    let mut r = rng(8);
    for _ in 0..20 {
        let data = separable_dataset(&mut r, 8, 2, 0.3);
        let (model, diag) = train(&data, &SvmConfig::hard_margin()).unwrap();
        assert!(diag.converged);
        let sv = model.support_indices()[0];
        let mut alphas = model.alphas().to_vec();
        alphas[sv] += 0.1;
        let bumped = SvmModel::from_alphas(&data, alphas, *model.config()).unwrap();
        assert!(kkt_violation(&bumped, &data).unwrap() > 0.0);
    }
}

#[test]
fn label_flip_negates_the_hyperplane() {
    let mut r = rng(21);
    for _ in 0..25 {
        let data = separable_dataset(&mut r, 10, 3, 0.4);
        let flipped: Vec<LabeledVector> = data
            .iter()
            .map(|v| LabeledVector::new(v.x.clone(), v.y.flipped()))
            .collect();
        let cfg = SvmConfig::hard_margin();
        let (a, da) = train(&data, &cfg).unwrap();
        let (b, db) = train(&flipped, &cfg).unwrap();
        assert!(da.converged && db.converged, "{da:?} {db:?}");
        for (p, q) in a.w().iter().zip(b.w()) {
            assert!((p + q).abs() < 1e-6, "{p} vs {q}");
        }
        assert!((a.b() + b.b()).abs() < 1e-6);
        for v in &data {
            let pa = snpsvm::classify(&a, &v.x).unwrap();
            let pb = snpsvm::classify(&b, &v.x).unwrap();
            assert_eq!(pa.label, pb.label.flipped());
        }
    }
}

#[test]
fn separable_training_points_are_recalled() {
    let mut r = rng(3);
    for _ in 0..20 {
        let data = separable_dataset(&mut r, 12, 2, 0.2);
        let (m, _) = train(&data, &SvmConfig::hard_margin()).unwrap();
        for v in &data {
            assert_eq!(snpsvm::classify(&m, &v.x).unwrap().label, v.y);
        }
        assert!(geometric_margin(&m).unwrap() >= 0.2 - 1e-9);
    }
}

#[test]
fn training_is_deterministic() {
    let mut r = rng(99);
    let data = random_dataset(&mut r, 30, 4);
    let cfg = SvmConfig { seed: 7, ..SvmConfig::soft(2.0) };
    assert_eq!(train(&data, &cfg).unwrap(), train(&data, &cfg).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trained_models_satisfy_invariants(seed in any::<u64>(), l in 2usize..12, n in 1usize..4,
                                         c in prop::sample::select(vec![0.1, 1.0, 10.0, 100.0])) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, l, n);
        let cfg = SvmConfig::soft(c);
        let (model, diag) = train(&data, &cfg).unwrap();
        prop_assert!(model.alphas().iter().all(|&a| (0.0..=c).contains(&a)));
        prop_assert!(reconstruction_error(&model, &data) <= 1e-9);
        let balance: f64 = data.iter().zip(model.alphas()).map(|(v, a)| a * v.y.sign()).sum();
        prop_assert!(balance.abs() <= 1e-6);
        // weak duality holds for any feasible multipliers and offset
        let primal = primal_objective(&model, &data).unwrap();
        prop_assert!(diag.dual_objective <= primal + 1e-9);
        prop_assert!(diag.slack_sum >= 0.0);
        if diag.converged {
            prop_assert!(diag.max_kkt_violation <= 1e-6);
            prop_assert!(primal - diag.dual_objective <= 1e-6 * primal.max(1.0));
        }
    }

    #[test]
    fn any_feasible_multipliers_obey_weak_duality(seed in any::<u64>(), c in 0.1f64..20.0) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, 6, 2);
        // project random multipliers onto the balance constraint by scaling one class
        let mut alphas: Vec<f64> = (0..data.len()).map(|_| r.gen_range(0.0..c)).collect();
        let pos: f64 = data.iter().zip(&alphas).filter(|(v, _)| v.y == Label::Case).map(|(_, a)| a).sum();
        let neg: f64 = data.iter().zip(&alphas).filter(|(v, _)| v.y == Label::Control).map(|(_, a)| a).sum();
        let (scale_pos, scale_neg) = if pos > neg { (neg / pos, 1.0) } else { (1.0, pos / neg) };
        for (v, a) in data.iter().zip(alphas.iter_mut()) {
            *a *= if v.y == Label::Case { scale_pos } else { scale_neg };
        }
        let model = SvmModel::from_alphas(&data, alphas.clone(), SvmConfig::soft(c)).unwrap();
        let dual = dual_objective(&alphas, &data).unwrap();
        prop_assert!(dual <= primal_objective(&model, &data).unwrap() + 1e-9);
    }
}
