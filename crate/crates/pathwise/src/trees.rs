//! Sign paths, decorated dyadic trees, and finite function classes.
//!
//! A predictable process with respect to the filtration generated by
//! independent ±1 signs is the same object as a complete binary tree of
//! depth `n` whose level-`t` nodes carry the value the process takes after
//! seeing the first `t−1` signs. Everything exact in this crate — path
//! expectations, complexity measures, minimax values — is computed on these
//! trees.
//!
//! Orientation convention, used everywhere: **+1 indexes the right child**.
//! The node selected at level `t` by a path is `levels[t-1][i]` where `i` is
//! the integer whose binary digits are the first `t−1` signs, earliest sign
//! most significant, `+1 ↦ 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier into a registered table of domain points.
pub type PointId = u32;

/// Depth cap for exhaustive path enumeration (2^22 ≈ 4M paths).
pub const EXHAUSTIVE_DEPTH_LIMIT: usize = 22;

/// An ordered sequence of signs in {−1, +1}: one realization of the dyadic
/// filtration's coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPath {
    signs: Vec<i8>,
}

impl SignPath {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::Domain(format!("sign {bad} is not ±1")));
        }
        Ok(Self { signs })
    }

    /// The path of horizon `n` encoded by the low bits of `index`: bit
    /// `n−1−(t−1)` gives sign t, so index 0 is the all-(−1) path and
    /// enumeration order is lexicographic with −1 before +1.
    pub fn from_index(n: usize, index: u64) -> Self {
        let signs = (0..n)
            .map(|t| if index >> (n - 1 - t) & 1 == 1 { 1 } else { -1 })
            .collect();
        Self { signs }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// Sign at 1-indexed position `t`.
    pub fn sign(&self, t: usize) -> Result<i8> {
        self.signs
            .get(t - 1)
            .copied()
            .ok_or_else(|| Error::IndexOutOfRange(format!("sign position {t} of {}", self.len())))
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Node index within level `t` selected by the first `t−1` signs.
    pub fn level_index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.signs.len() + 1 {
            return Err(Error::IndexOutOfRange(format!(
                "level {t} for a path of length {}",
                self.signs.len()
            )));
        }
        let mut idx = 0usize;
        for s in &self.signs[..t - 1] {
            idx = (idx << 1) | usize::from(*s == 1);
        }
        Ok(idx)
    }
}

/// All 2^n sign paths of horizon `n`, in the documented deterministic order
/// (lexicographic, −1 before +1). `n = 0` yields the single empty path.
pub fn enumerate_paths(n: usize) -> Result<Vec<SignPath>> {
    if n > EXHAUSTIVE_DEPTH_LIMIT {
        return Err(Error::Capacity(format!(
            "horizon {n} exceeds the exhaustive limit {EXHAUSTIVE_DEPTH_LIMIT}; \
             use Monte Carlo sampling instead"
        )));
    }
    Ok((0..1u64 << n).map(|k| SignPath::from_index(n, k)).collect())
}

/// A complete binary tree of depth `n`, decorated at every node.
///
/// Level `t` (1-indexed) holds exactly `2^(t−1)` values; evaluation at level
/// `t` reads only the first `t−1` signs of a path, which is exactly the
/// predictability requirement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tree<T> {
    depth: usize,
    levels: Vec<Vec<T>>,
}

/// A tree decorated with domain-point identifiers (the predictable process
/// feeding a function class).
pub type DyadicTree = Tree<PointId>;

/// A {−1,+1}-valued tree (a predictable sign relabeling).
pub type SignTree = Tree<i8>;

/// A real-valued tree (covering elements, witness processes, centers).
pub type RealTree = Tree<f64>;

impl<T: Clone> Tree<T> {
    pub fn new(levels: Vec<Vec<T>>) -> Result<Self> {
        let depth = levels.len();
        for (i, level) in levels.iter().enumerate() {
            let want = 1usize << i;
            if level.len() != want {
                return Err(Error::Shape(format!(
                    "level {} has {} entries, expected {want}",
                    i + 1,
                    level.len()
                )));
            }
        }
        Ok(Self { depth, levels })
    }

    /// The tree with every node decorated by the same value.
    pub fn constant(depth: usize, value: T) -> Self {
        let levels = (0..depth).map(|i| vec![value.clone(); 1 << i]).collect();
        Self { depth, levels }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn levels(&self) -> &[Vec<T>] {
        &self.levels
    }

    pub fn node(&self, t: usize, index: usize) -> Result<&T> {
        self.levels
            .get(t - 1)
            .and_then(|l| l.get(index))
            .ok_or_else(|| Error::IndexOutOfRange(format!("node ({t}, {index})")))
    }

    /// Value of the process at level `t` along `path`; reads only the first
    /// `t−1` signs.
    pub fn evaluate(&self, path: &SignPath, t: usize) -> Result<T> {
        if t == 0 || t > self.depth {
            return Err(Error::IndexOutOfRange(format!(
                "level {t} of a depth-{} tree",
                self.depth
            )));
        }
        if path.len() + 1 < t {
            return Err(Error::IndexOutOfRange(format!(
                "level {t} needs {} signs, path has {}",
                t - 1,
                path.len()
            )));
        }
        let idx = path.level_index(t)?;
        Ok(self.levels[t - 1][idx].clone())
    }

    /// Values along a whole path: `[x_1(ε), …, x_n(ε)]`.
    pub fn path_values(&self, path: &SignPath) -> Result<Vec<T>> {
        (1..=self.depth).map(|t| self.evaluate(path, t)).collect()
    }

    /// Total node count, `2^depth − 1`.
    pub fn node_count(&self) -> usize {
        (1usize << self.depth) - 1
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Tree<U> {
        Tree {
            depth: self.depth,
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(&f).collect())
                .collect(),
        }
    }
}

impl<'de, T: Clone + Deserialize<'de>> Deserialize<'de> for Tree<T> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw<T> {
            depth: usize,
            levels: Vec<Vec<T>>,
        }
        let raw = Raw::<T>::deserialize(de)?;
        let tree = Tree::new(raw.levels).map_err(serde::de::Error::custom)?;
        if tree.depth != raw.depth {
            return Err(serde::de::Error::custom(format!(
                "declared depth {} does not match {} levels",
                raw.depth, tree.depth
            )));
        }
        Ok(tree)
    }
}

/// Composition with a sign relabeling: `r_t(ε) = x_t(y_2(ε), …, y_t(ε))`,
/// where `y_s(ε)` reads the first `s−1` signs of `ε`. Level 1 of `y` is
/// never consulted. The identity relabeling `y_t(ε) = ε_{t−1}` leaves `x`
/// unchanged.
pub fn compose_rotation<T: Clone>(x: &Tree<T>, y: &SignTree) -> Result<Tree<T>> {
    if x.depth() != y.depth() {
        return Err(Error::Shape(format!(
            "tree depth {} vs relabeling depth {}",
            x.depth(),
            y.depth()
        )));
    }
    for level in y.levels() {
        if let Some(bad) = level.iter().find(|v| **v != 1 && **v != -1) {
            return Err(Error::Domain(format!("relabeling value {bad} is not ±1")));
        }
    }
    let n = x.depth();
    let mut levels: Vec<Vec<T>> = Vec::with_capacity(n);
    for t in 1..=n {
        let mut level = Vec::with_capacity(1 << (t - 1));
        for prefix in 0..1u64 << (t - 1) {
            let eps = SignPath::from_index(t - 1, prefix);
            // Transformed prefix (y_2(ε), …, y_t(ε)) indexes x's level t.
            let mut idx = 0usize;
            for s in 2..=t {
                let ys = y.evaluate(&eps, s)?;
                idx = (idx << 1) | usize::from(ys == 1);
            }
            level.push(x.levels()[t - 1][idx].clone());
        }
        levels.push(level);
    }
    Tree::new(levels)
}

/// The identity relabeling `y_t(ε) = ε_{t−1}` (with `y_1 ≡ +1`, unused).
pub fn identity_relabeling(depth: usize) -> SignTree {
    let mut levels: Vec<Vec<i8>> = Vec::with_capacity(depth);
    for t in 1..=depth {
        let level = (0..1u64 << (t - 1))
            .map(|prefix| {
                if t == 1 {
                    1
                } else {
                    // Last sign of the prefix, i.e. ε_{t−1}.
                    if prefix & 1 == 1 {
                        1
                    } else {
                        -1
                    }
                }
            })
            .collect();
        levels.push(level);
    }
    Tree::new(levels).expect("identity relabeling is well-formed")
}

/// A pair of predictable processes of equal depth (the symmetrization pair).
#[derive(Debug, Clone, Serialize)]
pub struct PairTree {
    left: DyadicTree,
    right: DyadicTree,
}

impl PairTree {
    pub fn new(left: DyadicTree, right: DyadicTree) -> Result<Self> {
        if left.depth() != right.depth() {
            return Err(Error::Shape(format!(
                "pair depths {} vs {}",
                left.depth(),
                right.depth()
            )));
        }
        Ok(Self { left, right })
    }

    pub fn depth(&self) -> usize {
        self.left.depth()
    }

    pub fn left(&self) -> &DyadicTree {
        &self.left
    }

    pub fn right(&self) -> &DyadicTree {
        &self.right
    }

    /// Flatten to a single tree over the product domain of `m` points:
    /// pair `(z, z')` becomes id `z·m + z'`. Composes with
    /// [`FiniteFunctionClass::pair_difference_class`].
    pub fn product_tree(&self, domain_size: usize) -> Result<DyadicTree> {
        let m = domain_size as u32;
        let levels = self
            .left
            .levels()
            .iter()
            .zip(self.right.levels())
            .map(|(l, r)| l.iter().zip(r).map(|(a, b)| a * m + b).collect())
            .collect();
        Tree::new(levels)
    }
}

/// A finite set of functions given by their value table over a registered
/// point table: `rows[f][x]` is the value of function `f` at point `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteFunctionClass {
    domain_size: usize,
    rows: Vec<Vec<f64>>,
    range_bound: f64,
}

impl FiniteFunctionClass {
    pub fn new(domain_size: usize, rows: Vec<Vec<f64>>, range_bound: f64) -> Result<Self> {
        if domain_size == 0 {
            return Err(Error::Domain("domain must have at least one point".into()));
        }
        if rows.is_empty() {
            return Err(Error::Domain("function class must be nonempty".into()));
        }
        if !(range_bound >= 0.0) {
            return Err(Error::Domain(format!("range bound {range_bound} < 0")));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != domain_size {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {domain_size}",
                    row.len()
                )));
            }
            for v in row {
                if !v.is_finite() {
                    return Err(Error::Domain(format!("row {i} contains non-finite {v}")));
                }
                if v.abs() > range_bound {
                    return Err(Error::Domain(format!(
                        "|{v}| exceeds the declared range bound {range_bound}"
                    )));
                }
            }
        }
        Ok(Self {
            domain_size,
            rows,
            range_bound,
        })
    }

    /// Build with the range bound computed from the table.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let domain_size = rows.first().map(|r| r.len()).unwrap_or(0);
        let bound = rows
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        Self::new(domain_size, rows, bound)
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn range_bound(&self) -> f64 {
        self.range_bound
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Value of function `f` at point `x`.
    pub fn value(&self, f: usize, x: PointId) -> f64 {
        self.rows[f][x as usize]
    }

    /// All point ids of the registered domain.
    pub fn domain(&self) -> Vec<PointId> {
        (0..self.domain_size as PointId).collect()
    }

    /// The class `{x ↦ −f(x)}` for every `f` in this class.
    pub fn negated(&self) -> Self {
        Self {
            domain_size: self.domain_size,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| -v).collect())
                .collect(),
            range_bound: self.range_bound,
        }
    }

    /// Union with the negated class (`F ∪ −F`).
    pub fn with_negations(&self) -> Self {
        let mut rows = self.rows.clone();
        rows.extend(self.negated().rows);
        Self {
            domain_size: self.domain_size,
            rows,
            range_bound: self.range_bound,
        }
    }

    /// The derived class `{(z, z′) ↦ g(z) − g(z′)}` on the product domain,
    /// with pair `(z, z′)` registered as id `z·m + z′`.
    pub fn pair_difference_class(&self) -> Result<Self> {
        let m = self.domain_size;
        let rows = self
            .rows
            .iter()
            .map(|g| {
                let mut row = Vec::with_capacity(m * m);
                for z in 0..m {
                    for zp in 0..m {
                        row.push(g[z] - g[zp]);
                    }
                }
                row
            })
            .collect();
        Self::new(m * m, rows, 2.0 * self.range_bound)
    }
}

impl<'de> Deserialize<'de> for FiniteFunctionClass {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            domain_size: usize,
            rows: Vec<Vec<f64>>,
            range_bound: f64,
        }
        let raw = Raw::deserialize(de)?;
        FiniteFunctionClass::new(raw.domain_size, raw.rows, raw.range_bound)
            .map_err(serde::de::Error::custom)
    }
}
