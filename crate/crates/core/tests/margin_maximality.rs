mod common;

use common::*;
use rand::Rng;
use snpsvm::{geometric_margin, train, SvmConfig};

#[test]
fn no_random_separator_beats_the_solver() {
    let mut r = rng(2024);
    for k in 0..50 {
        let l = r.gen_range(4..=20);
        let n = r.gen_range(2..=4);
        let data = separable_dataset(&mut r, l, n, 0.3);
        let (model, diag) = train(&data, &SvmConfig::hard_margin()).unwrap();
        assert!(diag.converged, "dataset {k}: {diag:?}");
        let margin = geometric_margin(&model).unwrap();
        let (best, _) = best_random_margin(&mut r, &data, model.w(), 1000);
        assert!(best <= margin + 1e-9, "dataset {k}: {best} > {margin}");
        // the solver's own direction attains its reported margin
        let norm = model.w().iter().map(|a| a * a).sum::<f64>().sqrt();
        let unit: Vec<f64> = model.w().iter().map(|a| a / norm).collect();
        let own = best_margin_along(&data, &unit).unwrap();
        assert!((own - margin).abs() <= 1e-9, "dataset {k}: {own} vs {margin}");
    }
}
