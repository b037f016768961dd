//! Exact minimax values of finite sequential prediction games.
//!
//! The game: at each round the adversary picks a point `x_t` from a finite
//! domain, the learner answers with a prediction `ŷ_t` from a finite grid,
//! and the adversary then reveals an outcome `y_t` from a finite set
//! (default {−1, +1}). The terminal payoff is cumulative loss minus the
//! best comparator loss, the comparator being charged an additive budget
//! `B(f; x_{1:n})`. A nonpositive game value certifies that a prediction
//! strategy with the corresponding pathwise regret inequality exists over
//! the discretized prediction set, and backward induction extracts it.
//!
//! Discretization slack: predictions range over a grid rather than all of
//! [−1, 1], so the computed value exceeds the continuous one by at most
//! (grid step)·n for the 1-Lipschitz-per-round losses used here; the slack
//! is reported alongside the value.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::complexity::{seq_rademacher_exact, SignConvention};
use crate::error::{Error, Result};
use crate::trees::{compose_rotation, DyadicTree, FiniteFunctionClass, PointId, SignTree, Tree};
use crate::util::pairwise_mean;

/// Loss functions, convex in the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `ℓ(a, b) = −ab/2` (absolute loss, linearized, for b ∈ {±1}).
    Linear,
    /// `ℓ(a, b) = (a − b)²`.
    Square,
}

impl LossKind {
    pub fn eval(&self, prediction: f64, outcome: f64) -> f64 {
        match self {
            LossKind::Linear => -prediction * outcome / 2.0,
            LossKind::Square => (prediction - outcome) * (prediction - outcome),
        }
    }
}

/// Comparator budget evaluated on the realized point sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceFunctional {
    Constant { value: f64 },
    /// One budget per function index.
    PerFunction { values: Vec<f64> },
    /// `c · Σ_t sup_f |f(x_t)|^p` — data-dependent, function-independent.
    SupPowerSum { c: f64, p: f64 },
}

impl SequenceFunctional {
    pub fn eval(&self, class: &FiniteFunctionClass, f: usize, xs: &[PointId]) -> f64 {
        match self {
            SequenceFunctional::Constant { value } => *value,
            SequenceFunctional::PerFunction { values } => values[f],
            SequenceFunctional::SupPowerSum { c, p } => {
                c * xs
                    .iter()
                    .map(|x| {
                        (0..class.len())
                            .map(|g| class.value(g, *x).abs())
                            .fold(0.0_f64, f64::max)
                            .powf(*p)
                    })
                    .sum::<f64>()
            }
        }
    }

    fn validate(&self, class: &FiniteFunctionClass) -> Result<()> {
        if let SequenceFunctional::PerFunction { values } = self {
            if values.len() != class.len() {
                return Err(Error::Shape(format!(
                    "{} per-function budgets for {} functions",
                    values.len(),
                    class.len()
                )));
            }
        }
        Ok(())
    }
}

/// Comparator budget evaluated on a whole predictable process (tree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeFunctional {
    Constant { value: f64 },
    /// `scale · Rad_n(F; x)` with the absolute-value convention.
    ScaledRademacher { scale: f64 },
    /// `c · max_ε Σ_t sup_f |f(x_t(ε))|^p` — depends on the tree only
    /// through its multiset of path-value profiles.
    MaxPathPowerSum { c: f64, p: f64 },
    /// The value of `f` at one designated node; deliberately sensitive to
    /// relabelings (a failing example for the rotation condition).
    NodeFunctionValue { level: usize, index: usize },
}

impl TreeFunctional {
    pub fn eval(&self, class: &FiniteFunctionClass, f: usize, tree: &DyadicTree) -> Result<f64> {
        Ok(match self {
            TreeFunctional::Constant { value } => *value,
            TreeFunctional::ScaledRademacher { scale } => {
                scale * seq_rademacher_exact(class, tree, SignConvention::Absolute)?
            }
            TreeFunctional::MaxPathPowerSum { c, p } => {
                let n = tree.depth();
                let mut best = f64::NEG_INFINITY;
                for k in 0..1u64 << n {
                    let mut sum = 0.0;
                    for t in 1..=n {
                        let node = (k >> (n - t + 1)) as usize;
                        let pt = tree.levels()[t - 1][node];
                        sum += (0..class.len())
                            .map(|g| class.value(g, pt).abs())
                            .fold(0.0_f64, f64::max)
                            .powf(*p);
                    }
                    best = best.max(sum);
                }
                c * best
            }
            TreeFunctional::NodeFunctionValue { level, index } => {
                class.value(f, *tree.node(*level, *index)?)
            }
        })
    }
}

/// A finite specification of the sequential prediction game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameSpec {
    pub class: FiniteFunctionClass,
    pub horizon: usize,
    pub loss: LossKind,
    pub budget_fn: SequenceFunctional,
    /// Learner's prediction grid: must contain 0 and be symmetric about 0.
    pub grid: Vec<f64>,
    /// Adversary's outcome set (default {−1, +1}; the square-loss game may
    /// substitute scaled outcomes).
    pub y_values: Vec<f64>,
    /// Maximum allowed leaf count `(|domain|·|grid|·|y|)^n`.
    pub max_leaves: f64,
}

impl GameSpec {
    pub fn new(
        class: FiniteFunctionClass,
        horizon: usize,
        loss: LossKind,
        budget_fn: SequenceFunctional,
        grid: Vec<f64>,
    ) -> Result<Self> {
        let spec = Self {
            class,
            horizon,
            loss,
            budget_fn,
            grid,
            y_values: vec![-1.0, 1.0],
            max_leaves: 1e8,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Domain("horizon must be ≥ 1".into()));
        }
        self.budget_fn.validate(&self.class)?;
        if !self.grid.iter().any(|v| *v == 0.0) {
            return Err(Error::Domain("prediction grid must contain 0".into()));
        }
        for v in &self.grid {
            if !self.grid.iter().any(|w| (w + v).abs() < 1e-15) {
                return Err(Error::Domain(format!(
                    "grid is not symmetric about 0: missing −({v})"
                )));
            }
        }
        if self.y_values.is_empty() {
            return Err(Error::Domain("outcome set must be nonempty".into()));
        }
        if self.leaves() > self.max_leaves {
            return Err(Error::Capacity(format!(
                "game tree has {:.3e} leaves, budget {:.3e}",
                self.leaves(),
                self.max_leaves
            )));
        }
        Ok(())
    }

    /// Uniform symmetric grid of `points` values over [−1, 1] (odd count,
    /// so 0 is included).
    pub fn uniform_grid(points: usize) -> Result<Vec<f64>> {
        if points < 3 || points % 2 == 0 {
            return Err(Error::Domain(format!(
                "grid needs an odd number of points ≥ 3, got {points}"
            )));
        }
        let h = 2.0 / (points - 1) as f64;
        Ok((0..points).map(|i| -1.0 + i as f64 * h).collect())
    }

    pub fn grid_step(&self) -> f64 {
        let mut sorted = self.grid.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0_f64, f64::max)
    }

    pub fn leaves(&self) -> f64 {
        ((self.class.domain_size() * self.grid.len() * self.y_values.len()) as f64)
            .powi(self.horizon as i32)
    }
}

/// Extracted optimal strategy: a prediction for every reachable history
/// `(x_{1:t}, y_{1:t−1})`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StrategyTree {
    predictions: HashMap<String, f64>,
}

impl StrategyTree {
    fn key(xs: &[PointId], ys_prev: &[f64]) -> String {
        let xpart: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
        let ypart: Vec<String> = ys_prev.iter().map(|y| y.to_string()).collect();
        format!("{}|{}", xpart.join(","), ypart.join(","))
    }

    /// Prediction after observing `x_{1:t}` and `y_{1:t−1}`.
    pub fn prediction(&self, xs: &[PointId], ys_prev: &[f64]) -> Result<f64> {
        self.predictions
            .get(&Self::key(xs, ys_prev))
            .copied()
            .ok_or_else(|| {
                Error::Domain(format!(
                    "history ({xs:?}, {ys_prev:?}) outside the solved game"
                ))
            })
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

/// Result of solving a game.
#[derive(Debug, Clone, Serialize)]
pub struct MinimaxOutcome {
    pub value: f64,
    pub strategy: StrategyTree,
    /// Discretization slack (grid step)·n accompanying the value.
    pub slack: f64,
}

struct Solver<'a> {
    spec: &'a GameSpec,
    /// Grid in tie-break order: smallest |ŷ| first, negative before
    /// positive at equal magnitude.
    grid_order: Vec<f64>,
    memo: HashMap<(usize, Vec<PointId>, Vec<u64>), f64>,
    strategy: HashMap<String, f64>,
}

impl<'a> Solver<'a> {
    fn new(spec: &'a GameSpec) -> Self {
        let mut grid_order = spec.grid.clone();
        grid_order.sort_by(|a, b| {
            (a.abs(), *a)
                .partial_cmp(&(b.abs(), *b))
                .expect("finite grid")
        });
        Self {
            spec,
            grid_order,
            memo: HashMap::new(),
            strategy: HashMap::new(),
        }
    }

    fn terminal(&self, xs: &[PointId], ys: &[f64]) -> f64 {
        let class = &self.spec.class;
        let mut best = f64::INFINITY;
        for f in 0..class.len() {
            let mut total = self.spec.budget_fn.eval(class, f, xs);
            for (x, y) in xs.iter().zip(ys) {
                total += self.spec.loss.eval(class.value(f, *x), *y);
            }
            best = best.min(total);
        }
        -best
    }

    fn value(&mut self, xs: &mut Vec<PointId>, ys: &mut Vec<f64>) -> f64 {
        let t = xs.len();
        if t == self.spec.horizon {
            return self.terminal(xs, ys);
        }
        let key = (t, xs.clone(), ys.iter().map(|y| y.to_bits()).collect());
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let mut sup_x = f64::NEG_INFINITY;
        for x in self.spec.class.domain() {
            xs.push(x);
            let mut inf_y_hat = f64::INFINITY;
            let mut best_pred = 0.0;
            for &pred in &self.grid_order.clone() {
                let mut max_y = f64::NEG_INFINITY;
                for &y in &self.spec.y_values.clone() {
                    ys.push(y);
                    let v = self.spec.loss.eval(pred, y) + self.value(xs, ys);
                    ys.pop();
                    if v > max_y {
                        max_y = v;
                    }
                }
                // Strict improvement keeps the earliest (smallest |ŷ|)
                // minimizer.
                if max_y < inf_y_hat {
                    inf_y_hat = max_y;
                    best_pred = pred;
                }
            }
            self.strategy
                .insert(StrategyTree::key(xs, ys), best_pred);
            xs.pop();
            if inf_y_hat > sup_x {
                sup_x = inf_y_hat;
            }
        }
        self.memo.insert(key, sup_x);
        sup_x
    }
}

/// Solve the game exactly by memoized backward induction. The returned
/// strategy attains the returned value against every adversary play;
/// `value ≤ 0` certifies the pathwise regret inequality over the
/// discretized prediction set.
pub fn minimax_value(spec: &GameSpec) -> Result<MinimaxOutcome> {
    spec.validate()?;
    let mut solver = Solver::new(spec);
    let value = solver.value(&mut Vec::new(), &mut Vec::new());
    Ok(MinimaxOutcome {
        value,
        strategy: StrategyTree {
            predictions: solver.strategy,
        },
        slack: spec.grid_step() * spec.horizon as f64,
    })
}

/// The exact expectation `2^{−n} Σ_ε sup_f [Σ_t ε_t f(x_t(ε)) − 2B(f; x(ε))]`;
/// a nonpositive value is the sufficient condition for strategy existence
/// on this tree.
pub fn check_expectation_condition(
    class: &FiniteFunctionClass,
    budget_fn: &dyn Fn(usize, &[PointId]) -> f64,
    tree: &DyadicTree,
) -> Result<f64> {
    let n = tree.depth();
    if n > crate::trees::EXHAUSTIVE_DEPTH_LIMIT {
        return Err(Error::Capacity(format!(
            "depth {n} exceeds the exhaustive limit"
        )));
    }
    let mut per_path = Vec::with_capacity(1usize << n);
    for k in 0..1u64 << n {
        let mut xs = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        for t in 1..=n {
            let node = (k >> (n - t + 1)) as usize;
            xs.push(tree.levels()[t - 1][node]);
            signs.push(if k >> (n - t) & 1 == 1 { 1.0 } else { -1.0 });
        }
        let mut best = f64::NEG_INFINITY;
        for f in 0..class.len() {
            let sum: f64 = xs
                .iter()
                .zip(&signs)
                .map(|(x, s)| s * class.value(f, *x))
                .sum();
            best = best.max(sum - 2.0 * budget_fn(f, &xs));
        }
        per_path.push(best);
    }
    Ok(pairwise_mean(&per_path))
}

/// Worst relabeling margin `max_{f,y} [B(f; x∘y) − B(f; x)]` over
/// sign-valued predictable relabelings; a nonpositive margin certifies the
/// rotation-monotonicity condition. Exhaustive for `2^(2^n − 2) ≤ budget`
/// relabelings, seeded random sampling beyond that.
pub fn check_rotation_monotone(
    class: &FiniteFunctionClass,
    budget_fn: &TreeFunctional,
    tree: &DyadicTree,
    budget: u64,
    seed: u64,
) -> Result<f64> {
    let n = tree.depth();
    // Levels 2..n carry 2^n − 2 free signs; level 1 never enters the
    // composition.
    let free_nodes = (1usize << n) - 2;
    let base: Vec<f64> = (0..class.len())
        .map(|f| budget_fn.eval(class, f, tree))
        .collect::<Result<_>>()?;

    let mut worst = f64::NEG_INFINITY;
    let mut eval_relabeling = |y: &SignTree| -> Result<()> {
        let rotated = compose_rotation(tree, y)?;
        for (f, b) in base.iter().enumerate() {
            let rotated_b = budget_fn.eval(class, f, &rotated)?;
            if rotated_b - b > worst {
                worst = rotated_b - b;
            }
        }
        Ok(())
    };

    let exhaustive = free_nodes < 63 && (1u64 << free_nodes) <= budget;
    if exhaustive {
        for mask in 0..1u64 << free_nodes {
            eval_relabeling(&sign_tree_from_mask(n, mask))?;
        }
    } else {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        for _ in 0..budget {
            let mask = rng.gen::<u64>();
            eval_relabeling(&sign_tree_from_mask(n, mask))?;
        }
    }
    Ok(worst)
}

fn sign_tree_from_mask(n: usize, mask: u64) -> SignTree {
    let mut levels: Vec<Vec<i8>> = Vec::with_capacity(n);
    let mut bit = 0;
    for t in 0..n {
        let width = 1usize << t;
        if t == 0 {
            levels.push(vec![1]);
            continue;
        }
        levels.push(
            (0..width)
                .map(|_| {
                    let s = if mask >> (bit % 64) & 1 == 1 { 1 } else { -1 };
                    bit += 1;
                    s
                })
                .collect(),
        );
    }
    Tree::new(levels).expect("well-formed sign tree")
}

/// Outcome of replaying an extracted strategy on a concrete sequence.
#[derive(Debug, Clone, Serialize)]
pub struct ReplayOutcome {
    pub predictions: Vec<f64>,
    /// Learner's cumulative loss.
    pub lhs: f64,
    /// Best comparator loss plus budget.
    pub rhs: f64,
    /// `rhs − lhs`; nonnegative up to (grid step)·n when the game value is
    /// nonpositive.
    pub margin: f64,
}

/// Replay the strategy against `(x_seq, y_seq)` and compare both sides of
/// the regret inequality.
pub fn strategy_replay(
    strategy: &StrategyTree,
    x_seq: &[PointId],
    y_seq: &[f64],
    spec: &GameSpec,
) -> Result<ReplayOutcome> {
    if x_seq.len() != spec.horizon || y_seq.len() != spec.horizon {
        return Err(Error::Shape(format!(
            "sequence lengths ({}, {}) vs horizon {}",
            x_seq.len(),
            y_seq.len(),
            spec.horizon
        )));
    }
    for x in x_seq {
        if *x as usize >= spec.class.domain_size() {
            return Err(Error::Domain(format!("point {x} outside the domain")));
        }
    }
    let mut predictions = Vec::with_capacity(spec.horizon);
    let mut lhs = 0.0;
    for t in 0..spec.horizon {
        let pred = strategy.prediction(&x_seq[..=t], &y_seq[..t])?;
        predictions.push(pred);
        lhs += spec.loss.eval(pred, y_seq[t]);
    }
    let mut rhs = f64::INFINITY;
    for f in 0..spec.class.len() {
        let mut total = spec.budget_fn.eval(&spec.class, f, x_seq);
        for (x, y) in x_seq.iter().zip(y_seq) {
            total += spec.loss.eval(spec.class.value(f, *x), *y);
        }
        rhs = rhs.min(total);
    }
    Ok(ReplayOutcome {
        predictions,
        lhs,
        rhs,
        margin: rhs - lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm_constants_spec(c: f64, grid_points: usize) -> GameSpec {
        let class = FiniteFunctionClass::from_rows(vec![vec![1.0], vec![-1.0]]).unwrap();
        GameSpec::new(
            class,
            1,
            LossKind::Linear,
            SequenceFunctional::Constant { value: c },
            GameSpec::uniform_grid(grid_points).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn pm_constants_value_is_half_minus_c() {
        for c in [0.0, 0.25, 0.5, 0.8] {
            let spec = pm_constants_spec(c, 41);
            let out = minimax_value(&spec).unwrap();
            assert!(
                (out.value - (0.5 - c)).abs() < 1e-12,
                "c = {c}: value {}",
                out.value
            );
            assert_eq!(out.value <= 0.0, c >= 0.5);
        }
    }

    #[test]
    fn huge_budget_makes_value_negative() {
        let spec = pm_constants_spec(1e6, 5);
        let out = minimax_value(&spec).unwrap();
        assert!(out.value < 0.0);
    }

    #[test]
    fn zero_class_zero_budget_gives_zero_value() {
        let class = FiniteFunctionClass::from_rows(vec![vec![0.0, 0.0]]).unwrap();
        let spec = GameSpec::new(
            class,
            2,
            LossKind::Linear,
            SequenceFunctional::Constant { value: 0.0 },
            GameSpec::uniform_grid(5).unwrap(),
        )
        .unwrap();
        let out = minimax_value(&spec).unwrap();
        assert!(out.value.abs() < 1e-12);
        // The symmetric zero game is won by predicting 0 throughout.
        for xs in [[0u32, 0], [0, 1], [1, 0], [1, 1]] {
            for ys in [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]] {
                let replay = strategy_replay(&out.strategy, &xs, &ys, &spec).unwrap();
                assert!(replay.predictions.iter().all(|p| *p == 0.0));
                assert!(replay.margin.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn replay_guarantee_on_certified_instance() {
        // {±1}-constants with c = 1/2: value 0, replay margin ≥ 0 on both
        // one-round sequences.
        let spec = pm_constants_spec(0.5, 41);
        let out = minimax_value(&spec).unwrap();
        assert!(out.value <= 1e-12);
        for y in [-1.0, 1.0] {
            let replay = strategy_replay(&out.strategy, &[0], &[y], &spec).unwrap();
            assert!(replay.margin >= -1e-12, "margin {}", replay.margin);
        }
    }

    #[test]
    fn value_dominates_every_replay() {
        // The extracted strategy never loses more than the game value.
        let class =
            FiniteFunctionClass::from_rows(vec![vec![1.0, -0.5], vec![-0.2, 0.7]]).unwrap();
        let spec = GameSpec::new(
            class,
            2,
            LossKind::Linear,
            SequenceFunctional::Constant { value: 0.3 },
            GameSpec::uniform_grid(9).unwrap(),
        )
        .unwrap();
        let out = minimax_value(&spec).unwrap();
        for x1 in 0..2u32 {
            for x2 in 0..2u32 {
                for y1 in [-1.0, 1.0] {
                    for y2 in [-1.0, 1.0] {
                        let r =
                            strategy_replay(&out.strategy, &[x1, x2], &[y1, y2], &spec).unwrap();
                        // lhs − rhs ≤ value ⇔ margin ≥ −value.
                        assert!(
                            r.margin >= -out.value - 1e-12,
                            "replay beats the value: margin {} value {}",
                            r.margin,
                            out.value
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn square_loss_game_solves() {
        let class = FiniteFunctionClass::from_rows(vec![vec![0.5], vec![-0.5]]).unwrap();
        let spec = GameSpec::new(
            class,
            2,
            LossKind::Square,
            SequenceFunctional::Constant { value: 2.0 },
            GameSpec::uniform_grid(11).unwrap(),
        )
        .unwrap();
        let out = minimax_value(&spec).unwrap();
        assert!(out.value.is_finite());
        // Budget 2.0 should be generous enough for a two-round game against
        // half-scale constants.
        assert!(out.value <= 0.0, "value {}", out.value);
    }

    #[test]
    fn prediction_range_property_linear_loss() {
        // |ŷ_t| ≤ sup_f |f(x_t)| + grid step for the extracted strategy.
        let class =
            FiniteFunctionClass::from_rows(vec![vec![0.6, -0.1], vec![-0.3, 0.2]]).unwrap();
        let spec = GameSpec::new(
            class.clone(),
            2,
            LossKind::Linear,
            SequenceFunctional::Constant { value: 0.2 },
            GameSpec::uniform_grid(21).unwrap(),
        )
        .unwrap();
        let out = minimax_value(&spec).unwrap();
        let step = spec.grid_step();
        for x1 in 0..2u32 {
            for x2 in 0..2u32 {
                for y1 in [-1.0, 1.0] {
                    for y2 in [-1.0, 1.0] {
                        let r =
                            strategy_replay(&out.strategy, &[x1, x2], &[y1, y2], &spec).unwrap();
                        for (t, pred) in r.predictions.iter().enumerate() {
                            let x = [x1, x2][t];
                            let envelope = (0..class.len())
                                .map(|f| class.value(f, x).abs())
                                .fold(0.0_f64, f64::max);
                            assert!(
                                pred.abs() <= envelope + step + 1e-12,
                                "|ŷ| = {} > envelope {envelope} + step {step}",
                                pred.abs()
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn budget_cap_is_enforced() {
        let class = FiniteFunctionClass::from_rows(vec![vec![1.0, -1.0]]).unwrap();
        let mut spec = GameSpec::new(
            class,
            3,
            LossKind::Linear,
            SequenceFunctional::Constant { value: 0.0 },
            GameSpec::uniform_grid(5).unwrap(),
        )
        .unwrap();
        spec.max_leaves = 1e3;
        assert!(matches!(minimax_value(&spec), Err(Error::Capacity(_))));
    }

    #[test]
    fn expectation_condition_examples() {
        // F = {±1 constants}, n = 1, B ≡ 1/2: E sup_f [εf] − 1 = 0.
        let class = FiniteFunctionClass::from_rows(vec![vec![1.0], vec![-1.0]]).unwrap();
        let tree = DyadicTree::constant(1, 0);
        let v = check_expectation_condition(&class, &|_, _| 0.5, &tree).unwrap();
        assert!(v.abs() < 1e-12);

        // Zero class, B ≡ 0.
        let zero = FiniteFunctionClass::from_rows(vec![vec![0.0]]).unwrap();
        let v = check_expectation_condition(&zero, &|_, _| 0.0, &tree).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn expectation_condition_with_rademacher_centering() {
        // B = Rad_n(F; x)/2 drives the expectation to ≤ 0, exactly 0 when
        // the per-path supremum is nonnegative (symmetric class).
        let class = FiniteFunctionClass::from_rows(vec![vec![1.0, -0.4], vec![-1.0, 0.4]])
            .unwrap();
        let tree: DyadicTree = Tree::new(vec![vec![0], vec![1, 0]]).unwrap();
        let rad = seq_rademacher_exact(&class, &tree, SignConvention::Absolute).unwrap();
        let v = check_expectation_condition(&class, &|_, _| rad / 2.0, &tree).unwrap();
        assert!(v <= 1e-12);
        assert!(v.abs() < 1e-12, "symmetric class attains 0, got {v}");
    }

    #[test]
    fn rotation_monotone_constant_budget_is_zero() {
        let class = FiniteFunctionClass::from_rows(vec![vec![0.3, -0.3]]).unwrap();
        let tree: DyadicTree = Tree::new(vec![vec![0], vec![0, 1]]).unwrap();
        let m = check_rotation_monotone(
            &class,
            &TreeFunctional::Constant { value: 1.23 },
            &tree,
            1 << 10,
            1,
        )
        .unwrap();
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn rotation_monotone_multiset_budget_on_constant_tree_is_zero() {
        let class = FiniteFunctionClass::from_rows(vec![vec![0.8], vec![-0.2]]).unwrap();
        let tree = DyadicTree::constant(3, 0);
        let m = check_rotation_monotone(
            &class,
            &TreeFunctional::MaxPathPowerSum { c: 1.0, p: 2.0 },
            &tree,
            1 << 10,
            1,
        )
        .unwrap();
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn rotation_monotone_catches_node_peeking_budget() {
        // B = f(left level-2 node) moves under relabeling when children
        // differ: a positive margin demonstrates the failing condition.
        let class = FiniteFunctionClass::from_rows(vec![vec![0.1, 0.9]]).unwrap();
        let tree: DyadicTree = Tree::new(vec![vec![0], vec![0, 1]]).unwrap();
        let m = check_rotation_monotone(
            &class,
            &TreeFunctional::NodeFunctionValue { level: 2, index: 0 },
            &tree,
            1 << 10,
            1,
        )
        .unwrap();
        assert!((m - 0.8).abs() < 1e-12, "margin {m}");
    }

    #[test]
    fn rademacher_budget_satisfies_rotation_condition() {
        // The worst-case (over trees) Rademacher constant is rotation
        // monotone; the per-tree value composed with relabelings never
        // exceeds the original on these instances.
        let class =
            FiniteFunctionClass::from_rows(vec![vec![1.0, -0.5], vec![-0.7, 0.9]]).unwrap();
        let tree = DyadicTree::constant(2, 1);
        let m = check_rotation_monotone(
            &class,
            &TreeFunctional::MaxPathPowerSum { c: 0.5, p: 1.0 },
            &tree,
            1 << 10,
            1,
        )
        .unwrap();
        assert!(m <= 1e-12);
    }

    #[test]
    fn strategy_tree_json_round_trip() {
        let spec = pm_constants_spec(0.5, 5);
        let out = minimax_value(&spec).unwrap();
        let json = serde_json::to_string(&out.strategy).unwrap();
        let back: StrategyTree = serde_json::from_str(&json).unwrap();
        assert_eq!(
            back.prediction(&[0], &[]).unwrap(),
            out.strategy.prediction(&[0], &[]).unwrap()
        );
    }

    #[test]
    fn replay_rejects_out_of_domain_points() {
        let spec = pm_constants_spec(0.5, 5);
        let out = minimax_value(&spec).unwrap();
        assert!(matches!(
            strategy_replay(&out.strategy, &[7], &[1.0], &spec),
            Err(Error::Domain(_))
        ));
    }
}
