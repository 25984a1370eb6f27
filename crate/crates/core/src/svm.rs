//! Linear soft-margin support vector machine trained through its dual.
//!
//! The dual program maximized here is
//!
//! ```text
//! W(a) = sum_i a_i - 1/2 sum_ij y_i y_j a_i a_j <x_i, x_j>
//! s.t.   sum_i a_i y_i = 0,  0 <= a_i <= C
//! ```
//!
//! and the hyperplane is recovered as `w = sum_i a_i y_i x_i`. Pairs of
//! multipliers are updated jointly so the equality constraint holds after
//! every step. The pair is the maximal violating pair, with the second index
//! chosen by second-order gain. Periodically, and once more after
//! convergence, a Newton move on the unbounded multipliers jumps along flat
//! directions where pairwise steps would crawl.
//!
//! A hard margin is requested with `C = +inf` and solved with a finite
//! surrogate bound of [`HARD_MARGIN_C`].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

/// Box bound used in place of an infinite `C`.
pub const HARD_MARGIN_C: f64 = 1e12;

/// Upper bound on the default pass budget.
pub const MAX_PASSES_CAP: usize = 10_000;

/// Curvature floor for pairs of coincident points.
const TAU: f64 = 1e-12;

const MIN_INNER_TOLERANCE: f64 = 1e-15;

/// Largest free set handed to the dense polishing solve.
const MAX_POLISH_SET: usize = 400;

/// Newton moves tried on a certified solution.
const REFINE_ROUNDS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub x: Vec<f64>,
    pub y: Label,
}

impl LabeledVector {
    pub fn new(x: Vec<f64>, y: Label) -> Self {
        LabeledVector { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Box bound on the multipliers; `f64::INFINITY` requests a hard margin.
    pub c: f64,
    pub kkt_tolerance: f64,
    /// Budget in passes of `l` pair updates. `None` means `10 * l * n`,
    /// capped at [`MAX_PASSES_CAP`].
    pub max_passes: Option<usize>,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            kkt_tolerance: 1e-6,
            max_passes: None,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn soft(c: f64) -> Self {
        SvmConfig {
            c,
            ..Default::default()
        }
    }

    pub fn hard_margin() -> Self {
        Self::soft(f64::INFINITY)
    }

    pub fn is_hard_margin(&self) -> bool {
        self.c == f64::INFINITY
    }

    /// The bound actually enforced on every multiplier.
    pub fn effective_c(&self) -> f64 {
        if self.is_hard_margin() {
            HARD_MARGIN_C
        } else {
            self.c
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.is_nan() || self.c <= 0.0 {
            return Err(Error::usage(format!("C must be positive, got {}", self.c)));
        }
        if !self.kkt_tolerance.is_finite() || self.kkt_tolerance <= 0.0 {
            return Err(Error::usage(format!(
                "KKT tolerance must be positive and finite, got {}",
                self.kkt_tolerance
            )));
        }
        if self.max_passes == Some(0) {
            return Err(Error::usage("max passes must be positive"));
        }
        Ok(())
    }

    fn pass_budget(&self, l: usize, n: usize) -> usize {
        self.max_passes
            .unwrap_or_else(|| (10 * l * n).clamp(1, MAX_PASSES_CAP))
    }
}

/// A trained separating hyperplane `w . x + b = 0` with its dual certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    w: Vec<f64>,
    b: f64,
    alphas: Vec<f64>,
    support_indices: Vec<usize>,
    config: SvmConfig,
}

impl SvmModel {
    /// Assembles a model from stored coefficients, checking the box
    /// constraint against the configured bound.
    pub fn from_parts(w: Vec<f64>, b: f64, alphas: Vec<f64>, config: SvmConfig) -> Result<Self> {
        config.validate()?;
        if w.is_empty() {
            return Err(Error::schema("model has zero dimensions"));
        }
        if w.iter().chain(alphas.iter()).any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::schema("model coefficients must be finite"));
        }
        let c = config.effective_c();
        if let Some(a) = alphas.iter().find(|&&a| !(0.0..=c).contains(&a)) {
            return Err(Error::schema(format!("multiplier {a} outside [0, {c}]")));
        }
        let support_indices = support_of(&alphas);
        Ok(SvmModel {
            w,
            b,
            alphas,
            support_indices,
            config,
        })
    }

    /// Rebuilds `w` from multipliers and recovers `b` from the KKT conditions.
    pub fn from_alphas(data: &[LabeledVector], alphas: Vec<f64>, config: SvmConfig) -> Result<Self> {
        let n = check_data(data)?;
        if alphas.len() != data.len() {
            return Err(Error::usage(format!(
                "{} multipliers for {} training vectors",
                alphas.len(),
                data.len()
            )));
        }
        let w = reconstruct_w(data, &alphas, n);
        let b = recover_offset(data, &alphas, &w, config.effective_c());
        SvmModel::from_parts(w, b, alphas, config)
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    pub fn config(&self) -> &SvmConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Hyperplane scaled to unit normal, sign fixed so the first nonzero
    /// component of the normal is positive. Two models describing the same
    /// oriented-up-to-sign plane compare equal in this form.
    pub fn canonical_form(&self) -> Result<(Vec<f64>, f64)> {
        let norm = norm(&self.w);
        if norm == 0.0 {
            return Err(Error::Degenerate("zero normal vector".into()));
        }
        let sign = match self.w.iter().find(|v| **v != 0.0) {
            Some(v) if *v < 0.0 => -1.0,
            _ => 1.0,
        };
        let w = self.w.iter().map(|v| sign * v / norm).collect();
        Ok((w, sign * self.b / norm))
    }
}

fn support_of(alphas: &[f64]) -> Vec<usize> {
    alphas
        .iter()
        .enumerate()
        .filter(|(_, a)| **a > 0.0)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub dual_objective: f64,
    pub primal_objective: f64,
    /// Sum of `max(0, 1 - y_i (w . x_i + b))`.
    pub slack_sum: f64,
    pub max_kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

impl SolveDiagnostics {
    pub fn duality_gap(&self) -> f64 {
        self.primal_objective - self.dual_objective
    }
}

/// Output of [`classify`]. `tie` is set when the point lies exactly on the
/// hyperplane; such points are assigned to the case class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub decision_value: f64,
    pub tie: bool,
}

/// Plain left-to-right inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn check_data(data: &[LabeledVector]) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| Error::usage("no training vectors"))?;
    let n = first.x.len();
    if n == 0 {
        return Err(Error::schema("training vectors have zero dimensions"));
    }
    for (i, v) in data.iter().enumerate() {
        if v.x.len() != n {
            return Err(Error::schema(format!(
                "vector {i} has dimension {} but expected {n}",
                v.x.len()
            )));
        }
        if v.x.iter().any(|c| !c.is_finite()) {
            return Err(Error::schema(format!("vector {i} has a non-finite component")));
        }
    }
    Ok(n)
}

fn reconstruct_w(data: &[LabeledVector], alphas: &[f64], n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for (v, &a) in data.iter().zip(alphas) {
        if a == 0.0 {
            continue;
        }
        let coef = a * v.y.sign();
        for (wk, xk) in w.iter_mut().zip(&v.x) {
            *wk += coef * xk;
        }
    }
    w
}

/// Mean of `y_i - w . x_i` over unbounded support vectors, or the midpoint
/// of the interval of offsets consistent with the bounded multipliers.
fn recover_offset(data: &[LabeledVector], alphas: &[f64], w: &[f64], c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for (v, &a) in data.iter().zip(alphas) {
        let y = v.y.sign();
        let r = y - dot(w, &v.x);
        if a > 0.0 && a < c {
            free_sum += r;
            free_count += 1;
        } else {
            // a == 0 needs y f >= 1, a == C needs y f <= 1.
            let at_zero = a == 0.0;
            if (y > 0.0) == at_zero {
                lower = lower.max(r);
            } else {
                upper = upper.min(r);
            }
        }
    }
    if free_count > 0 {
        return free_sum / free_count as f64;
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

/// Dual objective `sum a_i - 1/2 ||sum a_i y_i x_i||^2`.
pub fn dual_objective(alphas: &[f64], data: &[LabeledVector]) -> Result<f64> {
    if alphas.len() != data.len() {
        return Err(Error::usage(format!(
            "{} multipliers for {} training vectors",
            alphas.len(),
            data.len()
        )));
    }
    if data.is_empty() {
        return Ok(0.0);
    }
    let n = check_data(data)?;
    let w = reconstruct_w(data, alphas, n);
    Ok(alphas.iter().sum::<f64>() - 0.5 * dot(&w, &w))
}

/// Per-sample slack `max(0, 1 - y_i f(x_i))`.
pub fn slacks(model: &SvmModel, data: &[LabeledVector]) -> Result<Vec<f64>> {
    data.iter()
        .map(|v| decision_value(model, &v.x).map(|f| (1.0 - v.y.sign() * f).max(0.0)))
        .collect()
}

/// `1/2 ||w||^2 + C sum_i slack_i`; the slack term is dropped for a hard
/// margin, whose primal has no penalty term.
pub fn primal_objective(model: &SvmModel, data: &[LabeledVector]) -> Result<f64> {
    let half_norm = 0.5 * dot(&model.w, &model.w);
    if model.config.is_hard_margin() {
        return Ok(half_norm);
    }
    let slack_sum: f64 = slacks(model, data)?.iter().sum();
    Ok(half_norm + model.config.c * slack_sum)
}

/// Largest violation of the complementary-slackness conditions, using the
/// model's own bound `C`.
pub fn kkt_violation(model: &SvmModel, data: &[LabeledVector]) -> Result<f64> {
    if model.alphas.len() != data.len() {
        return Err(Error::usage(format!(
            "model has {} multipliers for {} training vectors",
            model.alphas.len(),
            data.len()
        )));
    }
    let c = model.config.effective_c();
    let mut worst = 0.0f64;
    for (v, &a) in data.iter().zip(&model.alphas) {
        let margin = v.y.sign() * decision_value(model, &v.x)?;
        let violation = if a == 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}

pub fn decision_value(model: &SvmModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.w.len() {
        return Err(Error::usage(format!(
            "input has dimension {} but the model expects {}",
            x.len(),
            model.w.len()
        )));
    }
    Ok(dot(&model.w, x) + model.b)
}

pub fn classify(model: &SvmModel, x: &[f64]) -> Result<Prediction> {
    let value = decision_value(model, x)?;
    Ok(Prediction {
        label: Label::from_sign(value),
        decision_value: value,
        tie: value == 0.0,
    })
}

/// Half-width `1/||w||` of the canonical margin band.
pub fn geometric_margin(model: &SvmModel) -> Result<f64> {
    let n = norm(&model.w);
    if n == 0.0 {
        return Err(Error::Degenerate("zero normal vector has no margin".into()));
    }
    Ok(1.0 / n)
}

/// Trains a linear SVM. A run that exhausts its pass budget still returns
/// the best iterate, flagged with `converged == false`.
pub fn train(data: &[LabeledVector], config: &SvmConfig) -> Result<(SvmModel, SolveDiagnostics)> {
    config.validate()?;
    if data.len() < 2 {
        return Err(Error::usage("training needs at least two vectors"));
    }
    let n = check_data(data)?;
    let has_case = data.iter().any(|v| v.y == Label::Case);
    let has_control = data.iter().any(|v| v.y == Label::Control);
    if !(has_case && has_control) {
        return Err(Error::usage("training data contains a single class"));
    }
    let mut solver = Solver::new(data, *config, n);
    let outcome = solver.run();
    let model = SvmModel::from_alphas(data, solver.alpha, *config)?;
    let dual = dual_objective(model.alphas(), data)?;
    let primal = primal_objective(&model, data)?;
    let slack_sum = slacks(&model, data)?.iter().sum();
    let max_kkt_violation = kkt_violation(&model, data)?;
    let mut notes = Vec::new();
    if config.is_hard_margin() {
        notes.push(format!("hard margin solved with C = {HARD_MARGIN_C:e}"));
    }
    if let Some(reason) = outcome.stop_note {
        notes.push(reason);
    }
    let saturated = config.is_hard_margin() && model.alphas().iter().any(|&a| a >= HARD_MARGIN_C);
    if saturated {
        notes.push("multiplier reached the hard-margin bound; data are not linearly separable".into());
    }
    let converged = outcome.converged
        && !saturated
        && max_kkt_violation <= config.kkt_tolerance
        && (primal - dual).abs() <= config.kkt_tolerance * primal.max(1.0);
    Ok((
        model,
        SolveDiagnostics {
            dual_objective: dual,
            primal_objective: primal,
            slack_sum,
            max_kkt_violation,
            iterations: outcome.iterations,
            converged,
            notes,
        },
    ))
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (target, &source) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *target -= factor * source;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

struct Outcome {
    iterations: usize,
    converged: bool,
    stop_note: Option<String>,
}

/// Pairwise coordinate ascent on the dual, written in minimization form
/// `f(a) = 1/2 a'Qa - e'a` with gradient `g = Qa - e`.
struct Solver<'a> {
    data: &'a [LabeledVector],
    config: SvmConfig,
    c: f64,
    y: Vec<f64>,
    diag: Vec<f64>,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    n: usize,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy)]
struct WorkingPair {
    i: usize,
    j: usize,
    gap: f64,
}

impl<'a> Solver<'a> {
    fn new(data: &'a [LabeledVector], config: SvmConfig, n: usize) -> Self {
        let l = data.len();
        Solver {
            data,
            config,
            c: config.effective_c(),
            y: data.iter().map(|v| v.y.sign()).collect(),
            diag: data.iter().map(|v| dot(&v.x, &v.x)).collect(),
            alpha: vec![0.0; l],
            grad: vec![-1.0; l],
            n,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    fn kernel(&self, i: usize, j: usize) -> f64 {
        dot(&self.data[i].x, &self.data[j].x)
    }

    fn in_up(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] < self.c) || (self.y[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.y[t] < 0.0 && self.alpha[t] < self.c) || (self.y[t] > 0.0 && self.alpha[t] > 0.0)
    }

    /// Maximal violator `i` in the up set, partner `j` in the low set
    /// chosen by second-order gain. `gap` is `m(a) - M(a)`.
    fn select(&self) -> Option<WorkingPair> {
        let l = self.alpha.len();
        let mut i = None;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..l {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v > g_max {
                    g_max = v;
                    i = Some(t);
                }
            }
        }
        let i = i?;
        let mut g_min = f64::INFINITY;
        let mut j = None;
        let mut best_gain = f64::INFINITY;
        for t in 0..l {
            if !self.in_low(t) {
                continue;
            }
            let v = -self.y[t] * self.grad[t];
            g_min = g_min.min(v);
            let b = g_max - v;
            if b > 0.0 {
                let a = self.curvature(i, t);
                let gain = -(b * b) / a;
                if gain < best_gain {
                    best_gain = gain;
                    j = Some(t);
                }
            }
        }
        let gap = g_max - g_min;
        Some(WorkingPair {
            i,
            j: j.unwrap_or(i),
            gap,
        })
    }

    fn curvature(&self, i: usize, j: usize) -> f64 {
        let a = self.diag[i] + self.diag[j] - 2.0 * self.kernel(i, j);
        if a > 0.0 {
            a
        } else {
            TAU
        }
    }

    /// Moves along `y_i e_i - y_j e_j`. Returns whether any multiplier changed.
    fn update(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let b = -self.y[i] * self.grad[i] + self.y[j] * self.grad[j];
        if b <= 0.0 {
            return false;
        }
        let a = self.curvature(i, j);
        let room_i = if self.y[i] > 0.0 { self.c - self.alpha[i] } else { self.alpha[i] };
        let room_j = if self.y[j] > 0.0 { self.alpha[j] } else { self.c - self.alpha[j] };
        let mut t = b / a;
        let mut clip_i = false;
        let mut clip_j = false;
        if t >= room_i {
            t = room_i;
            clip_i = true;
        }
        if t >= room_j {
            t = room_j;
            clip_j = true;
            clip_i = room_i == room_j;
        }
        if t <= 0.0 {
            return false;
        }
        let old_i = self.alpha[i];
        let old_j = self.alpha[j];
        let mut new_i = old_i + self.y[i] * t;
        let mut new_j = old_j - self.y[j] * t;
        if clip_i {
            new_i = if self.y[i] > 0.0 { self.c } else { 0.0 };
        }
        if clip_j {
            new_j = if self.y[j] > 0.0 { 0.0 } else { self.c };
        }
        new_i = new_i.clamp(0.0, self.c);
        new_j = new_j.clamp(0.0, self.c);
        let d_i = new_i - old_i;
        let d_j = new_j - old_j;
        if d_i == 0.0 && d_j == 0.0 {
            return false;
        }
        self.alpha[i] = new_i;
        self.alpha[j] = new_j;
        let (xi, xj) = (&self.data[i].x, &self.data[j].x);
        let (ci, cj) = (self.y[i] * d_i, self.y[j] * d_j);
        for k in 0..self.alpha.len() {
            let xk = &self.data[k].x;
            self.grad[k] += self.y[k] * (ci * dot(xk, xi) + cj * dot(xk, xj));
        }
        true
    }

    /// Exact gradient from the current multipliers, clearing drift from the
    /// incremental updates.
    fn refresh_gradient(&mut self) {
        let w = reconstruct_w(self.data, &self.alpha, self.n);
        for (k, v) in self.data.iter().enumerate() {
            self.grad[k] = self.y[k] * dot(&w, &v.x) - 1.0;
        }
    }

    /// Visits up-set violators in a seeded random order, pairing each with
    /// its best partner. Used when the greedy pair made no progress.
    fn random_sweep(&mut self) -> bool {
        let mut order: Vec<usize> = (0..self.alpha.len()).collect();
        order.shuffle(&mut self.rng);
        let mut moved = false;
        for &i in &order {
            if !self.in_up(i) {
                continue;
            }
            let g_i = -self.y[i] * self.grad[i];
            let partner = (0..self.alpha.len())
                .filter(|&t| t != i && self.in_low(t) && -self.y[t] * self.grad[t] < g_i)
                .map(|t| {
                    let b = g_i + self.y[t] * self.grad[t];
                    (t, -(b * b) / self.curvature(i, t))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, _)) = partner {
                moved |= self.update(i, j);
            }
        }
        moved
    }

    /// Newton-type move on the unbounded multipliers: solve the
    /// equality-constrained stationarity system of the current face
    /// (lightly regularized so flat directions stay solvable), then take the
    /// exact line-search step along it, clipped to the box. Returns whether
    /// the multipliers changed.
    fn polish(&mut self) -> bool {
        let free: Vec<usize> = (0..self.alpha.len())
            .filter(|&t| self.alpha[t] > 0.0 && self.alpha[t] < self.c)
            .collect();
        let m = free.len();
        if !(2..=MAX_POLISH_SET).contains(&m) {
            return false;
        }
        let scale = free.iter().map(|&t| self.diag[t]).fold(1.0f64, f64::max);
        let mu = 1e-10 * scale;
        let mut q = vec![vec![0.0; m]; m];
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate().skip(r) {
                let v = self.y[i] * self.y[j] * self.kernel(i, j);
                q[r][s] = v;
                q[s][r] = v;
            }
        }
        let mut system = vec![vec![0.0; m + 1]; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for r in 0..m {
            system[r][..m].copy_from_slice(&q[r]);
            system[r][r] += mu;
            system[r][m] = self.y[free[r]];
            system[m][r] = self.y[free[r]];
            rhs[r] = -self.grad[free[r]];
        }
        let Some(sol) = solve_dense(system, rhs) else {
            return false;
        };
        let mut d: Vec<f64> = sol[..m].to_vec();
        // project back onto sum y_i d_i = 0
        let drift = free.iter().zip(&d).map(|(&t, v)| self.y[t] * v).sum::<f64>() / m as f64;
        for (v, &t) in d.iter_mut().zip(&free) {
            *v -= self.y[t] * drift;
        }
        let slope: f64 = free.iter().zip(&d).map(|(&t, v)| -self.grad[t] * v).sum();
        if slope.is_nan() || slope <= 0.0 {
            return false;
        }
        let mut curvature = 0.0;
        for r in 0..m {
            curvature += d[r] * dot(&q[r], &d);
        }
        let mut step = if curvature > 0.0 { slope / curvature } else { f64::INFINITY };
        let mut hit = None;
        for (r, &t) in free.iter().enumerate() {
            let limit = if d[r] > 0.0 {
                (self.c - self.alpha[t]) / d[r]
            } else if d[r] < 0.0 {
                -self.alpha[t] / d[r]
            } else {
                continue;
            };
            if limit < step {
                step = limit;
                hit = Some(r);
            }
        }
        if !step.is_finite() || step <= 0.0 {
            return false;
        }
        let before = self.alpha.clone();
        for (r, &t) in free.iter().enumerate() {
            self.alpha[t] = (self.alpha[t] + step * d[r]).clamp(0.0, self.c);
        }
        if let Some(r) = hit {
            let t = free[r];
            self.alpha[t] = if d[r] > 0.0 { self.c } else { 0.0 };
        }
        // the pinned coordinate absorbs its share of the balance
        let balance: f64 = self.alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum();
        if balance != 0.0 {
            if let Some(&t) = free
                .iter()
                .filter(|&&t| self.alpha[t] > 0.0 && self.alpha[t] < self.c)
                .max_by(|&&a, &&b| self.alpha[a].total_cmp(&self.alpha[b]))
            {
                self.alpha[t] = (self.alpha[t] - self.y[t] * balance).clamp(0.0, self.c);
            }
        }
        let old_objective = self.dual_value(&before);
        let new_objective = self.dual_value(&self.alpha);
        // near the optimum the true gain is below the rounding noise of the
        // objective itself
        let noise = 8.0 * f64::EPSILON * old_objective.abs().max(1.0);
        if new_objective < old_objective - noise {
            self.alpha = before;
            return false;
        }
        self.refresh_gradient();
        self.alpha != before
    }

    fn dual_value(&self, alpha: &[f64]) -> f64 {
        let w = reconstruct_w(self.data, alpha, self.n);
        alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w)
    }

    fn certified(&self) -> bool {
        let model = match SvmModel::from_alphas(self.data, self.alpha.clone(), self.config) {
            Ok(m) => m,
            Err(_) => return false,
        };
        let tol = self.config.kkt_tolerance;
        let (Ok(kkt), Ok(primal), Ok(dual)) = (
            kkt_violation(&model, self.data),
            primal_objective(&model, self.data),
            dual_objective(&self.alpha, self.data),
        ) else {
            return false;
        };
        kkt <= tol && (primal - dual).abs() <= tol * primal.max(1.0)
    }

    /// A certified point is usually on the optimal face already; a few
    /// Newton moves there clean up the residual left by the stopping
    /// tolerance. Moves that raise the violation or lose the certificate are
    /// undone.
    fn refine(&mut self) {
        for _ in 0..REFINE_ROUNDS {
            let before = (self.alpha.clone(), self.grad.clone());
            let gap = self.select().map_or(0.0, |p| p.gap);
            if gap == 0.0 || !self.polish() {
                return;
            }
            let after = self.select().map_or(0.0, |p| p.gap);
            if after >= gap || !self.certified() {
                (self.alpha, self.grad) = before;
                return;
            }
        }
    }

    fn run(&mut self) -> Outcome {
        let l = self.alpha.len();
        let budget = self.config.pass_budget(l, self.n).saturating_mul(l);
        let polish_every = (2 * l).max(20);
        let mut inner_tol = self.config.kkt_tolerance;
        let mut iterations = 0usize;
        loop {
            let Some(pair) = self.select() else {
                return Outcome {
                    iterations,
                    converged: false,
                    stop_note: Some("no feasible working pair".into()),
                };
            };
            if pair.gap <= inner_tol {
                self.refresh_gradient();
                let refreshed = self.select().map_or(0.0, |p| p.gap);
                if refreshed <= inner_tol {
                    if self.certified() {
                        self.refine();
                        return Outcome {
                            iterations,
                            converged: true,
                            stop_note: None,
                        };
                    }
                    // KKT satisfied on the gradient scale but the offset or
                    // duality gap is not yet tight enough.
                    inner_tol *= 0.1;
                    if inner_tol < MIN_INNER_TOLERANCE {
                        return Outcome {
                            iterations,
                            converged: false,
                            stop_note: Some("tolerance floor reached".into()),
                        };
                    }
                }
                continue;
            }
            if iterations >= budget {
                return Outcome {
                    iterations,
                    converged: false,
                    stop_note: Some(format!("pass budget exhausted after {iterations} updates")),
                };
            }
            iterations += 1;
            if iterations.is_multiple_of(polish_every) && self.polish() {
                continue;
            }
            if !self.update(pair.i, pair.j) && !self.random_sweep() {
                return Outcome {
                    iterations,
                    converged: false,
                    stop_note: Some("no pair update changes the multipliers".into()),
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(x: &[f64], y: i8) -> LabeledVector {
        LabeledVector::new(x.to_vec(), if y > 0 { Label::Case } else { Label::Control })
    }

    fn worked_example() -> Vec<LabeledVector> {
        vec![lv(&[0.0, 2.0], 1), lv(&[0.0, -2.0], -1)]
    }

    #[test]
    fn worked_example_hyperplane() {
        let (m, d) = train(&worked_example(), &SvmConfig::hard_margin()).unwrap();
        assert!(d.converged, "{d:?}");
        assert!(m.w()[0].abs() <= 1e-8);
        assert!((m.w()[1] - 0.5).abs() <= 1e-6);
        assert!(m.b().abs() <= 1e-8);
        assert!((geometric_margin(&m).unwrap() - 2.0).abs() < 1e-9);
        assert!((decision_value(&m, &[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-9);
        assert!((decision_value(&m, &[0.0, 4.0]).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_mirror() {
        let data = vec![lv(&[1.0], 1), lv(&[-1.0], -1)];
        let (m, d) = train(&data, &SvmConfig::hard_margin()).unwrap();
        assert!(d.converged);
        assert!((m.w()[0] - 1.0).abs() < 1e-9);
        assert!(m.b().abs() < 1e-9);
        assert!((2.0 * geometric_margin(&m).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn classify_tie_goes_to_case() {
        let m = SvmModel::from_parts(vec![0.0, 0.5], 0.0, vec![0.125, 0.125], SvmConfig::hard_margin())
            .unwrap();
        let p = classify(&m, &[0.0, 0.0]).unwrap();
        assert_eq!(p.label, Label::Case);
        assert!(p.tie);
        let p = classify(&m, &[0.0, -2.0]).unwrap();
        assert_eq!(p.label, Label::Control);
        assert!(!p.tie);
        assert!(classify(&m, &[1.0]).is_err());
    }

    #[test]
    fn zero_normal_has_no_margin() {
        let m = SvmModel::from_parts(vec![0.0, 0.0], 1.0, vec![], SvmConfig::default()).unwrap();
        assert!(matches!(geometric_margin(&m), Err(Error::Degenerate(_))));
        let m = SvmModel::from_parts(vec![0.6, 0.8], 0.0, vec![], SvmConfig::default()).unwrap();
        assert!((geometric_margin(&m).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_built_optimum_has_zero_violation() {
        let data = worked_example();
        let m = SvmModel::from_alphas(&data, vec![0.125, 0.125], SvmConfig::hard_margin()).unwrap();
        assert!(kkt_violation(&m, &data).unwrap() <= 1e-9);
        let bumped = SvmModel::from_alphas(&data, vec![0.225, 0.125], SvmConfig::hard_margin()).unwrap();
        assert!(kkt_violation(&bumped, &data).unwrap() > 0.0);
    }

    #[test]
    fn dual_at_zero_is_zero() {
        assert_eq!(dual_objective(&[0.0, 0.0], &worked_example()).unwrap(), 0.0);
        assert!(matches!(
            dual_objective(&[0.0], &worked_example()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let one_class = vec![lv(&[1.0], 1), lv(&[2.0], 1)];
        assert!(matches!(train(&one_class, &SvmConfig::default()), Err(Error::Usage(_))));
        let ragged = vec![lv(&[1.0], 1), lv(&[2.0, 1.0], -1)];
        assert!(matches!(train(&ragged, &SvmConfig::default()), Err(Error::Schema(_))));
        let single = vec![lv(&[1.0], 1)];
        assert!(train(&single, &SvmConfig::default()).is_err());
        assert!(train(&worked_example(), &SvmConfig::soft(0.0)).is_err());
        assert!(train(&worked_example(), &SvmConfig::soft(-1.0)).is_err());
    }

    #[test]
    fn contradictory_duplicates_converge_to_flat_model() {
        let data = vec![
            lv(&[1.0, 1.0], 1),
            lv(&[1.0, 1.0], -1),
            lv(&[1.0, 1.0], 1),
            lv(&[1.0, 1.0], -1),
        ];
        let (m, d) = train(&data, &SvmConfig::soft(1.0)).unwrap();
        assert!(d.converged, "{d:?}");
        assert!(norm(m.w()) < 1e-9);
    }

    #[test]
    fn inseparable_hard_margin_reports_non_convergence() {
        let data = vec![lv(&[0.0], 1), lv(&[0.0], -1), lv(&[1.0], -1), lv(&[1.0], 1)];
        let cfg = SvmConfig {
            max_passes: Some(50),
            ..SvmConfig::hard_margin()
        };
        let (m, d) = train(&data, &cfg).unwrap();
        assert!(!d.converged);
        assert!(m.alphas().iter().all(|a| (0.0..=HARD_MARGIN_C).contains(a)));
    }

    #[test]
    fn canonical_form_fixes_scale_and_sign() {
        let m = SvmModel::from_parts(vec![0.0, -2.0], 4.0, vec![], SvmConfig::default()).unwrap();
        let (w, b) = m.canonical_form().unwrap();
        assert_eq!(w, vec![0.0, 1.0]);
        assert_eq!(b, -2.0);
    }
}
