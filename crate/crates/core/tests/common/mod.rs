//! Shared test helpers: an exhaustive active-set oracle for the SVM dual and
//! seeded dataset generators.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snpsvm::{Label, LabeledVector, SvmConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lv(x: &[f64], y: f64) -> LabeledVector {
    LabeledVector::new(x.to_vec(), if y > 0.0 { Label::Case } else { Label::Control })
}

fn gram(data: &[LabeledVector]) -> Vec<Vec<f64>> {
    data.iter()
        .map(|a| {
            data.iter()
                .map(|b| a.x.iter().zip(&b.x).map(|(p, q)| p * q).sum())
                .collect()
        })
        .collect()
}

/// `sum a - 1/2 sum_ij y_i y_j a_i a_j <x_i, x_j>` by explicit double sum.
pub fn dual_by_double_sum(alphas: &[f64], data: &[LabeledVector]) -> f64 {
    let k = gram(data);
    let y: Vec<f64> = data.iter().map(|v| v.y.sign()).collect();
    let mut quad = 0.0;
    for i in 0..data.len() {
        for j in 0..data.len() {
            quad += y[i] * y[j] * alphas[i] * alphas[j] * k[i][j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Maximum of the box-constrained dual by enumerating every assignment of
/// each multiplier to {lower bound, upper bound, free}. For each pattern the
/// free block solves the equality-constrained stationarity system (minimum
/// norm solution via SVD); feasible candidates are scored and the best kept.
///
/// Some optimal point has a free set whose stationarity system pins it down
/// uniquely (walk along any null direction until a bound is hit), so the
/// maximum over patterns is the optimum.
pub fn brute_force_dual(data: &[LabeledVector], c: f64) -> (f64, Vec<f64>) {
    assert!(c.is_finite());
    let l = data.len();
    assert!(l <= 8, "enumeration is 3^l");
    let k = gram(data);
    let y: Vec<f64> = data.iter().map(|v| v.y.sign()).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let mut best = (f64::NEG_INFINITY, vec![0.0; l]);
    let patterns = 3usize.pow(l as u32);
    for code in 0..patterns {
        let mut state = vec![0u8; l];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..l).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state
            .iter()
            .map(|&s| if s == 1 { c } else { 0.0 })
            .collect();
        let bound_balance: f64 = (0..l).filter(|&i| state[i] != 2).map(|i| y[i] * alpha[i]).sum();
        if free.is_empty() {
            if bound_balance.abs() > 1e-12 {
                continue;
            }
        } else {
            let m = free.len();
            let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut rhs = DVector::<f64>::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q(i, j);
                }
                a[(r, m)] = y[i];
                a[(m, r)] = y[i];
                let fixed: f64 = (0..l).filter(|&j| state[j] != 2).map(|j| q(i, j) * alpha[j]).sum();
                rhs[r] = 1.0 - fixed;
            }
            rhs[m] = -bound_balance;
            let svd = a.clone().svd(true, true);
            let Ok(sol) = svd.solve(&rhs, 1e-11) else { continue };
            let residual = (&a * &sol - &rhs).norm();
            if residual > 1e-8 * (1.0 + rhs.norm()) {
                continue;
            }
            let mut feasible = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                if v < -1e-10 || v > c + 1e-10 {
                    feasible = false;
                    break;
                }
                alpha[i] = v.clamp(0.0, c);
            }
            if !feasible {
                continue;
            }
            let balance: f64 = (0..l).map(|i| y[i] * alpha[i]).sum();
            if balance.abs() > 1e-9 {
                continue;
            }
        }
        let value = dual_by_double_sum(&alpha, data);
        if value > best.0 {
            best = (value, alpha);
        }
    }
    best
}

/// Random points in `[-2, 2]^n` with random labels, both classes present.
pub fn random_dataset(rng: &mut ChaCha8Rng, l: usize, n: usize) -> Vec<LabeledVector> {
    loop {
        let data: Vec<LabeledVector> = (0..l)
            .map(|_| {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                lv(&x, if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            })
            .collect();
        let cases = data.iter().filter(|v| v.y == Label::Case).count();
        if cases > 0 && cases < l {
            return data;
        }
    }
}

pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.iter().map(|a| a / norm).collect();
        }
    }
}

/// Linearly separable data: every point has `y * (d . x) >= gap` for a
/// hidden unit direction `d`.
pub fn separable_dataset(rng: &mut ChaCha8Rng, l: usize, n: usize, gap: f64) -> Vec<LabeledVector> {
    let d = random_unit(rng, n);
    let mut data = Vec::with_capacity(l);
    let mut k = 0;
    while data.len() < l {
        let y = if k % 2 == 0 { 1.0 } else { -1.0 };
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let proj: f64 = x.iter().zip(&d).map(|(a, b)| a * b).sum();
        if y * proj >= gap {
            data.push(lv(&x, y));
            k += 1;
        }
    }
    data
}

/// Largest minimum distance achievable by a hyperplane with unit normal `u`,
/// placing the offset midway between the classes; `None` if `u` does not
/// separate.
pub fn best_margin_along(data: &[LabeledVector], u: &[f64]) -> Option<f64> {
    let mut min_pos = f64::INFINITY;
    let mut max_neg = f64::NEG_INFINITY;
    for v in data {
        let p: f64 = v.x.iter().zip(u).map(|(a, b)| a * b).sum();
        if v.y == Label::Case {
            min_pos = min_pos.min(p);
        } else {
            max_neg = max_neg.max(p);
        }
    }
    let half = 0.5 * (min_pos - max_neg);
    (half > 0.0).then_some(half)
}

/// Clustered cohorts with mixed labels, for the splitter.
pub fn clustered_cohort(rng: &mut ChaCha8Rng, n: usize) -> Vec<LabeledVector> {
    let clusters = rng.gen_range(2..5);
    let mut data = Vec::new();
    for _ in 0..clusters {
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let case_share: f64 = rng.gen_range(0.0..1.0);
        let size = rng.gen_range(4..20);
        for _ in 0..size {
            let x: Vec<f64> = center.iter().map(|c| c + rng.gen_range(-1.5..1.5)).collect();
            data.push(lv(&x, if rng.gen_bool(case_share) { 1.0 } else { -1.0 }));
        }
    }
    data
}

/// Identical points with alternating labels.
pub fn contradictory_duplicates(rng: &mut ChaCha8Rng, n: usize) -> Vec<LabeledVector> {
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let count = rng.gen_range(4..12);
    (0..count)
        .map(|i| lv(&x, if i % 2 == 0 { 1.0 } else { -1.0 }))
        .collect()
}

/// Seeded 50/50 train/test split of a cohort's records.
pub fn holdout(cohort: &snpsvm::Cohort, seed: u64) -> (snpsvm::Cohort, snpsvm::Cohort) {
    use rand::seq::SliceRandom;
    let mut records = cohort.records().to_vec();
    records.shuffle(&mut rng(seed));
    let test = records.split_off(records.len() / 2);
    let snps = cohort.snps().to_vec();
    (
        snpsvm::Cohort::new(snps.clone(), records).unwrap(),
        snpsvm::Cohort::new(snps, test).unwrap(),
    )
}

/// Held-out accuracy of a C = 1 machine trained on half of a synthetic
/// cohort and scored on the other half.
pub fn synthetic_accuracy(config: &snpsvm::SynthConfig) -> f64 {
    use snpsvm::pipeline::{encode_table, predict_with_model, train_table};
    let synth = snpsvm::generate_cohort(config).unwrap();
    let (train, test) = holdout(&synth.cohort, config.seed ^ 0x5eed);
    let diff = snpsvm::DiffTable::default();
    let train = encode_table(&train, &synth.panel, &diff).unwrap();
    let test = encode_table(&test, &synth.panel, &diff).unwrap();
    let (model, _) = train_table(&train, &SvmConfig::soft(1.0), diff).unwrap();
    let predictions = predict_with_model(&model, &test).unwrap();
    let hits = predictions
        .iter()
        .zip(&test.rows)
        .filter(|(p, row)| match p {
            snpsvm::io::PredictionRow::Model { predicted, .. } => Some(*predicted) == row.label,
            _ => false,
        })
        .count();
    hits as f64 / test.rows.len() as f64
}

/// Checks the structural guarantees of a split tree over `data`: leaves
/// partition the indices, pure leaves meet the threshold, depth is capped,
/// and every training point routes back to its own leaf.
pub fn check_split_contract(
    data: &[LabeledVector],
    tree: &snpsvm::SplitTree,
    config: &snpsvm::SplitConfig,
) -> Result<(), String> {
    use snpsvm::LeafStatus;
    let leaves = tree.leaves();
    let mut seen = vec![false; data.len()];
    for leaf in &leaves {
        for &i in &leaf.indices {
            if i >= data.len() || std::mem::replace(&mut seen[i], true) {
                return Err(format!("index {i} duplicated or out of range"));
            }
        }
        if leaf.status == LeafStatus::PureEnough && leaf.purity < config.purity_threshold {
            return Err(format!("pure leaf with purity {}", leaf.purity));
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(format!("index {i} missing from every leaf"));
    }
    if tree.depth() > config.max_depth {
        return Err(format!("depth {} over cap {}", tree.depth(), config.max_depth));
    }
    if leaves.len() > data.len() {
        return Err(format!("{} leaves for {} points", leaves.len(), data.len()));
    }
    for (i, v) in data.iter().enumerate() {
        let reached = tree.route(&v.x).map_err(|e| e.to_string())?;
        if !reached.indices.contains(&i) {
            return Err(format!("point {i} routes to a leaf that does not hold it"));
        }
    }
    Ok(())
}

/// The splitter test corpus: clustered cohorts, separable sets, random
/// labels and contradictory duplicates.
pub fn splitter_corpus(count: usize, seed: u64) -> Vec<Vec<LabeledVector>> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| {
            let n = r.gen_range(1..=4);
            let l = r.gen_range(4..30);
            match k % 5 {
                0 => contradictory_duplicates(&mut r, n),
                1 => separable_dataset(&mut r, l, n, 0.2),
                2 => random_dataset(&mut r, l, n),
                _ => clustered_cohort(&mut r, n),
            }
        })
        .collect()
}

/// Largest margin among `count` random separating directions, drawn as
/// perturbations of `center` at scales from 1e-6 to 10. Returns the margin
/// and how many draws it took.
pub fn best_random_margin(
    rng: &mut ChaCha8Rng,
    data: &[LabeledVector],
    center: &[f64],
    count: usize,
) -> (f64, usize) {
    let n = center.len();
    let norm = center.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut best = f64::NEG_INFINITY;
    let mut found = 0;
    let mut draws = 0;
    while found < count {
        draws += 1;
        assert!(draws < 1000 * count, "no separating directions found");
        let scale = 10f64.powf(rng.gen_range(-6.0..1.0));
        let noise = random_unit(rng, n);
        let u: Vec<f64> = (0..n).map(|k| center[k] / norm + scale * noise[k]).collect();
        let len = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let u: Vec<f64> = u.iter().map(|a| a / len).collect();
        if let Some(m) = best_margin_along(data, &u) {
            best = best.max(m);
            found += 1;
        }
    }
    (best, draws)
}
