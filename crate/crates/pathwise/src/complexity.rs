//! Sequential complexity measures on dyadic trees.
//!
//! All "exact" quantities are averages over the full set of 2^n sign paths
//! and are only available up to [`trees::EXHAUSTIVE_DEPTH_LIMIT`].
//! Worst-case-over-trees quantities are exact only when the tree space
//! itself is small enough to enumerate; otherwise they are reported as
//! search lower bounds, and every report says which one it is.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trees::{DyadicTree, FiniteFunctionClass, PointId, RealTree, Tree,
                   EXHAUSTIVE_DEPTH_LIMIT};
use crate::util::pairwise_mean;

/// Whether the suprema inside the Rademacher average keep the outer
/// absolute value. The absolute-value form is the default; the plain form
/// exists because several downstream statements are stated without it (the
/// two coincide whenever the class contains 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    Absolute,
    Plain,
}

/// How a reported value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo,
    SearchLowerBound,
}

/// A complexity measurement with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub measure: String,
    pub value: f64,
    pub mode: Mode,
    /// Replication count or search budget actually spent.
    pub effort: u64,
    pub tree_id: Option<String>,
}

fn check_depth(n: usize) -> Result<()> {
    if n > EXHAUSTIVE_DEPTH_LIMIT {
        return Err(Error::Capacity(format!(
            "depth {n} exceeds the exhaustive limit {EXHAUSTIVE_DEPTH_LIMIT}"
        )));
    }
    Ok(())
}

fn check_tree(class: &FiniteFunctionClass, tree: &DyadicTree) -> Result<()> {
    for level in tree.levels() {
        for pt in level {
            if *pt as usize >= class.domain_size() {
                return Err(Error::Domain(format!(
                    "tree point {pt} outside domain of size {}",
                    class.domain_size()
                )));
            }
        }
    }
    Ok(())
}

/// Node index at level `t` (1-indexed) along the path encoded by
/// `path_index` (earliest sign most significant, +1 ↦ bit 1).
fn node_at(n: usize, path_index: u64, t: usize) -> usize {
    (path_index >> (n - t + 1)) as usize
}

fn sign_at(n: usize, path_index: u64, t: usize) -> f64 {
    if path_index >> (n - t) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Exact sequential Rademacher complexity of `class` on `tree`: the average
/// over all 2^n paths of `|sup_f Σ_t ε_t f(x_t(ε))|` (or the plain sup,
/// per `convention`).
pub fn seq_rademacher_exact(
    class: &FiniteFunctionClass,
    tree: &DyadicTree,
    convention: SignConvention,
) -> Result<f64> {
    let n = tree.depth();
    check_depth(n)?;
    check_tree(class, tree)?;
    let mut per_path = Vec::with_capacity(1usize << n);
    for k in 0..1u64 << n {
        let mut best = f64::NEG_INFINITY;
        for row in class.rows() {
            let mut sum = 0.0;
            for t in 1..=n {
                let pt = tree.levels()[t - 1][node_at(n, k, t)] as usize;
                sum += sign_at(n, k, t) * row[pt];
            }
            best = best.max(sum);
        }
        per_path.push(match convention {
            SignConvention::Absolute => best.abs(),
            SignConvention::Plain => best,
        });
    }
    Ok(pairwise_mean(&per_path))
}

/// Exact offset Rademacher complexity on a tree: the average over paths of
/// `sup_f Σ_t [4c₁·ε_t(f(x_t)−μ_t) − c₂(f(x_t)−μ_t)²]`.
pub fn offset_rademacher(
    class: &FiniteFunctionClass,
    tree: &DyadicTree,
    mu: &RealTree,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    let n = tree.depth();
    check_depth(n)?;
    check_tree(class, tree)?;
    if mu.depth() != n {
        return Err(Error::Shape(format!(
            "center tree depth {} vs {}",
            mu.depth(),
            n
        )));
    }
    if !(c2 >= 0.0) {
        return Err(Error::Domain(format!("c2 = {c2} must be ≥ 0")));
    }
    let mut per_path = Vec::with_capacity(1usize << n);
    for k in 0..1u64 << n {
        let mut best = f64::NEG_INFINITY;
        for row in class.rows() {
            let mut sum = 0.0;
            for t in 1..=n {
                let node = node_at(n, k, t);
                let pt = tree.levels()[t - 1][node] as usize;
                let centered = row[pt] - mu.levels()[t - 1][node];
                sum += 4.0 * c1 * sign_at(n, k, t) * centered - c2 * centered * centered;
            }
            best = best.max(sum);
        }
        per_path.push(best);
    }
    Ok(pairwise_mean(&per_path))
}

/// Result of a worst-case-over-trees search.
#[derive(Debug, Clone, Serialize)]
pub struct WorstCaseSearch {
    pub value: f64,
    pub tree: DyadicTree,
    /// True when the tree space was enumerated completely.
    pub exact: bool,
    pub trees_examined: u64,
}

/// Lower bound (exact when flagged) on the worst-case sequential Rademacher
/// complexity `sup_x Rad_n(F; x)`. Enumerates the whole tree space when
/// `|domain|^(2^n − 1) ≤ budget`, otherwise runs seeded random restarts
/// with greedy single-node improvement.
pub fn seq_rademacher_worstcase(
    class: &FiniteFunctionClass,
    domain: &[PointId],
    n: usize,
    budget: u64,
    seed: u64,
    convention: SignConvention,
) -> Result<WorstCaseSearch> {
    check_depth(n)?;
    if budget < 1 {
        return Err(Error::Domain("budget must be ≥ 1".into()));
    }
    if domain.is_empty() {
        return Err(Error::Domain("empty domain".into()));
    }
    let m = domain.len();
    let node_count = (1usize << n) - 1;
    let total = (m as f64).powi(node_count as i32);

    let eval = |tree: &DyadicTree| seq_rademacher_exact(class, tree, convention);

    if total <= budget as f64 {
        let mut best_val = f64::NEG_INFINITY;
        let mut best_tree = None;
        let mut assignment = vec![0usize; node_count];
        let mut examined = 0u64;
        loop {
            let tree = tree_from_assignment(n, domain, &assignment);
            let v = eval(&tree)?;
            examined += 1;
            if v > best_val {
                best_val = v;
                best_tree = Some(tree);
            }
            if !increment(&mut assignment, m) {
                break;
            }
        }
        return Ok(WorstCaseSearch {
            value: best_val,
            tree: best_tree.expect("at least one tree"),
            exact: true,
            trees_examined: examined,
        });
    }

    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut best_tree = DyadicTree::constant(n, domain[0]);
    let mut best_val = eval(&best_tree)?;
    let mut examined = 1u64;
    while examined < budget {
        // Fresh random tree, then greedy single-node improvement.
        let mut current: Vec<usize> = (0..node_count).map(|_| rng.gen_range(0..m)).collect();
        let mut cur_val = eval(&tree_from_assignment(n, domain, &current))?;
        examined += 1;
        let mut improved = true;
        while improved && examined < budget {
            improved = false;
            'nodes: for i in 0..node_count {
                let orig = current[i];
                for v in 0..m {
                    if v == orig {
                        continue;
                    }
                    current[i] = v;
                    let val = eval(&tree_from_assignment(n, domain, &current))?;
                    examined += 1;
                    if val > cur_val {
                        cur_val = val;
                        improved = true;
                    } else {
                        current[i] = orig;
                    }
                    if examined >= budget {
                        break 'nodes;
                    }
                }
            }
        }
        if cur_val > best_val {
            best_val = cur_val;
            best_tree = tree_from_assignment(n, domain, &current);
        }
    }
    Ok(WorstCaseSearch {
        value: best_val,
        tree: best_tree,
        exact: false,
        trees_examined: examined,
    })
}

fn tree_from_assignment(n: usize, domain: &[PointId], assignment: &[usize]) -> DyadicTree {
    let mut levels = Vec::with_capacity(n);
    let mut offset = 0;
    for t in 0..n {
        let width = 1usize << t;
        levels.push(
            assignment[offset..offset + width]
                .iter()
                .map(|i| domain[*i])
                .collect(),
        );
        offset += width;
    }
    Tree::new(levels).expect("assignment has the right shape")
}

fn increment(assignment: &mut [usize], base: usize) -> bool {
    for digit in assignment.iter_mut() {
        *digit += 1;
        if *digit < base {
            return true;
        }
        *digit = 0;
    }
    false
}

/// Norm used by the sequential cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverNorm {
    /// Normalized ℓp: `(n⁻¹ Σ_t |·|^p)^{1/p}`.
    Lp(f64),
    /// `max_t |·|`.
    LInf,
}

/// Result of a covering-number computation.
#[derive(Debug, Clone, Serialize)]
pub struct CoverReport {
    pub size: usize,
    /// True when solved by exhaustive subset search; false means greedy.
    pub exact: bool,
    /// For greedy solutions, `size − (certified lower bound)`; 0 when exact.
    pub optimality_gap: usize,
}

/// Smallest set of candidate trees within `alpha` of every function along
/// every path.
///
/// Candidates are the trace trees `ε ↦ (f(x_t(ε)))_t` of the distinct
/// functions in the class, so covering elements take class values along
/// each path; this keeps the candidate set finite (one per function) at the
/// price of being potentially suboptimal against arbitrary real-valued
/// covers, especially in the sup-norm. Solved exactly by minimum set cover
/// for up to 20 candidates, greedily (with the gap reported) beyond.
pub fn covering_number(
    class: &FiniteFunctionClass,
    tree: &DyadicTree,
    alpha: f64,
    norm: CoverNorm,
) -> Result<CoverReport> {
    let n = tree.depth();
    check_depth(n)?;
    check_tree(class, tree)?;
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    if let CoverNorm::Lp(p) = norm {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("p = {p} must be ≥ 1")));
        }
    }

    // Deduplicate identical rows; a duplicate never helps a cover.
    let mut candidates: Vec<usize> = Vec::new();
    for (i, row) in class.rows().iter().enumerate() {
        if !candidates.iter().any(|j| class.rows()[*j] == *row) {
            candidates.push(i);
        }
    }
    let paths = 1usize << n;
    let universe = class.len() * paths;

    // covered[c] = bitset over (f, path) pairs that candidate covers.
    let words = universe.div_ceil(64);
    let mut covered = vec![vec![0u64; words]; candidates.len()];
    for (ci, &g) in candidates.iter().enumerate() {
        for f in 0..class.len() {
            for k in 0..paths as u64 {
                let mut acc: f64 = 0.0;
                let mut max_abs: f64 = 0.0;
                for t in 1..=n {
                    let pt = tree.levels()[t - 1][node_at(n, k, t)];
                    let diff = (class.value(f, pt) - class.value(g, pt)).abs();
                    match norm {
                        CoverNorm::Lp(p) => acc += diff.powf(p),
                        CoverNorm::LInf => max_abs = max_abs.max(diff),
                    }
                }
                let dist = match norm {
                    CoverNorm::Lp(p) => (acc / n as f64).powf(1.0 / p),
                    CoverNorm::LInf => max_abs,
                };
                if dist <= alpha + 1e-12 {
                    let bit = f * paths + k as usize;
                    covered[ci][bit / 64] |= 1 << (bit % 64);
                }
            }
        }
    }
    let full: Vec<u64> = (0..words)
        .map(|w| {
            let bits = universe - w * 64;
            if bits >= 64 {
                u64::MAX
            } else {
                (1u64 << bits) - 1
            }
        })
        .collect();

    let is_cover = |chosen: &[usize]| -> bool {
        let mut acc = vec![0u64; words];
        for &c in chosen {
            for (a, b) in acc.iter_mut().zip(&covered[c]) {
                *a |= b;
            }
        }
        acc == full
    };

    if !is_cover(&(0..candidates.len()).collect::<Vec<_>>()) {
        return Err(Error::Domain(format!(
            "no trace cover at scale {alpha}: some function is farther than alpha \
             from every trace"
        )));
    }

    if candidates.len() <= 20 {
        for k in 1..=candidates.len() {
            let mut combo: Vec<usize> = (0..k).collect();
            loop {
                if is_cover(&combo) {
                    return Ok(CoverReport {
                        size: k,
                        exact: true,
                        optimality_gap: 0,
                    });
                }
                if !next_combination(&mut combo, candidates.len()) {
                    break;
                }
            }
        }
        unreachable!("the full candidate set covers");
    }

    // Greedy with the harmonic-series optimality certificate.
    let mut chosen: Vec<usize> = Vec::new();
    let mut acc = vec![0u64; words];
    while acc != full {
        let best = (0..candidates.len())
            .max_by_key(|c| {
                covered[*c]
                    .iter()
                    .zip(&acc)
                    .map(|(bits, have)| (bits & !have).count_ones() as usize)
                    .sum::<usize>()
            })
            .expect("candidates nonempty");
        for (a, b) in acc.iter_mut().zip(&covered[best]) {
            *a |= b;
        }
        chosen.push(best);
    }
    let harmonic: f64 = (1..=universe).map(|i| 1.0 / i as f64).sum();
    let lower = (chosen.len() as f64 / harmonic).ceil().max(1.0) as usize;
    Ok(CoverReport {
        size: chosen.len(),
        exact: false,
        optimality_gap: chosen.len() - lower,
    })
}

fn next_combination(combo: &mut [usize], m: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < m - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Largest depth `n ≤ n_max` at which some decorated tree is shattered at
/// scale `alpha`: for every path there is a function clearing the witness
/// by `α/2` in the path's sign direction at every level. Witness values
/// range over the midpoints of consecutive distinct class values at each
/// node, which suffices because any witness can be slid to a midpoint
/// without breaking the margins.
pub fn fat_shattering(
    class: &FiniteFunctionClass,
    domain: &[PointId],
    alpha: f64,
    n_max: usize,
    budget: u64,
) -> Result<usize> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    if domain.is_empty() {
        return Err(Error::Domain("empty domain".into()));
    }
    let mut fat = 0;
    for n in 1..=n_max {
        check_depth(n)?;
        let node_count = (1usize << n) - 1;
        // Witness midpoints per domain point.
        let witnesses: Vec<Vec<f64>> = domain
            .iter()
            .map(|pt| {
                let mut vals: Vec<f64> = class.rows().iter().map(|r| r[*pt as usize]).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                vals.dedup();
                vals.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            })
            .collect();
        let max_w = witnesses.iter().map(|w| w.len()).max().unwrap_or(0);
        let search_size = (domain.len() as f64 * max_w.max(1) as f64).powi(node_count as i32);
        if search_size > budget as f64 {
            return Err(Error::Capacity(format!(
                "fat-shattering search at depth {n} needs {search_size:.3e} combinations \
                 (budget {budget})"
            )));
        }
        if !shatterable(class, domain, &witnesses, alpha, n) {
            return Ok(fat);
        }
        fat = n;
    }
    Ok(fat)
}

fn shatterable(
    class: &FiniteFunctionClass,
    domain: &[PointId],
    witnesses: &[Vec<f64>],
    alpha: f64,
    n: usize,
) -> bool {
    let m = domain.len();
    let node_count = (1usize << n) - 1;
    let mut x_assign = vec![0usize; node_count];
    loop {
        let viable: Vec<&[f64]> = x_assign
            .iter()
            .map(|i| witnesses[*i].as_slice())
            .collect();
        if viable.iter().all(|w| !w.is_empty()) {
            let tree = tree_from_assignment(n, domain, &x_assign);
            let mut s_assign = vec![0usize; node_count];
            loop {
                let s_levels: Vec<Vec<f64>> = {
                    let mut levels = Vec::with_capacity(n);
                    let mut off = 0;
                    for t in 0..n {
                        let w = 1usize << t;
                        levels.push(
                            (0..w).map(|j| viable[off + j][s_assign[off + j]]).collect(),
                        );
                        off += w;
                    }
                    levels
                };
                let s_tree: RealTree = Tree::new(s_levels).expect("shape");
                if shatters(class, &tree, &s_tree, alpha, n) {
                    return true;
                }
                if !increment_mixed(&mut s_assign, &viable) {
                    break;
                }
            }
        }
        if !increment(&mut x_assign, m) {
            return false;
        }
    }
}

fn increment_mixed(assign: &mut [usize], bases: &[&[f64]]) -> bool {
    for (digit, base) in assign.iter_mut().zip(bases) {
        *digit += 1;
        if *digit < base.len() {
            return true;
        }
        *digit = 0;
    }
    false
}

fn shatters(
    class: &FiniteFunctionClass,
    tree: &DyadicTree,
    s_tree: &RealTree,
    alpha: f64,
    n: usize,
) -> bool {
    for k in 0..1u64 << n {
        let found = class.rows().iter().any(|row| {
            (1..=n).all(|t| {
                let node = node_at(n, k, t);
                let pt = tree.levels()[t - 1][node] as usize;
                let s = s_tree.levels()[t - 1][node];
                sign_at(n, k, t) * (row[pt] - s) >= alpha / 2.0 - 1e-12
            })
        });
        if !found {
            return false;
        }
    }
    true
}

/// Empirical lower bound on the growth constant `C` in
/// `Rad_n(F) ≤ C·n^{1/r}·b`: the max over the listed horizons of the
/// searched worst-case complexity divided by `n^{1/r}·b`, with `b` the
/// class range bound.
pub fn growth_constant(
    class: &FiniteFunctionClass,
    domain: &[PointId],
    r: f64,
    n_list: &[usize],
    budget: u64,
    seed: u64,
) -> Result<f64> {
    if !(r > 1.0 && r <= 2.0) {
        return Err(Error::Domain(format!("r = {r} outside (1, 2]")));
    }
    let b = class.range_bound();
    if b == 0.0 {
        return Ok(0.0);
    }
    let mut best: f64 = 0.0;
    for (i, &n) in n_list.iter().enumerate() {
        let wc = seq_rademacher_worstcase(
            class,
            domain,
            n,
            budget,
            seed.wrapping_add(i as u64),
            SignConvention::Absolute,
        )?;
        best = best.max(wc.value / ((n as f64).powf(1.0 / r) * b));
    }
    Ok(best)
}

/// Closed-form offset-complexity bounds for the three entropy regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OffsetBoundKind {
    /// `8·ln|F| / α`.
    Finite { class_size: usize },
    /// `c·d·ln(n) / α`; the leading constant is caller-supplied.
    Parametric { c: f64, dimension: usize },
    /// `c·α^{−(2−q)/(2+q)}·n^{q/(2+q)}`, `q ∈ (0, 2)`.
    Nonparametric { c: f64, q: f64 },
}

pub fn offset_bound(kind: OffsetBoundKind, alpha: f64, n: u64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    Ok(match kind {
        OffsetBoundKind::Finite { class_size } => {
            if class_size == 0 {
                return Err(Error::Domain("class size must be ≥ 1".into()));
            }
            8.0 * (class_size as f64).ln() / alpha
        }
        OffsetBoundKind::Parametric { c, dimension } => {
            if !(c > 0.0) {
                return Err(Error::Domain(format!("c = {c} must be positive")));
            }
            c * dimension as f64 * (n as f64).ln() / alpha
        }
        OffsetBoundKind::Nonparametric { c, q } => {
            if !(c > 0.0) {
                return Err(Error::Domain(format!("c = {c} must be positive")));
            }
            if !(q > 0.0 && q < 2.0) {
                return Err(Error::Domain(format!("q = {q} outside (0, 2)")));
            }
            c * alpha.powf(-(2.0 - q) / (2.0 + q)) * (n as f64).powf(q / (2.0 + q))
        }
    })
}

/// The uniform-in-p complexity constant `C_{r,p} = D·(1 − 2^{−(r−p)/(rp)})^{−1}`
/// with its provable sandwich `D/(r−p) ≤ C_{r,p} ≤ 8D/(r−p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrpConstant {
    pub value: f64,
    pub sandwich_lower: f64,
    pub sandwich_upper: f64,
}

impl CrpConstant {
    pub fn sandwich_holds(&self) -> bool {
        self.sandwich_lower <= self.value && self.value <= self.sandwich_upper
    }
}

pub fn crp_constant(d_growth: f64, r: f64, p: f64) -> Result<CrpConstant> {
    if !(d_growth > 0.0) {
        return Err(Error::Domain(format!("D = {d_growth} must be positive")));
    }
    if !(1.0 <= p && p < r && r <= 2.0) {
        return Err(Error::Domain(format!(
            "need 1 ≤ p < r ≤ 2, got p = {p}, r = {r}"
        )));
    }
    let value = d_growth / (1.0 - 2f64.powf(-(r - p) / (r * p)));
    Ok(CrpConstant {
        value,
        sandwich_lower: d_growth / (r - p),
        sandwich_upper: 8.0 * d_growth / (r - p),
    })
}
