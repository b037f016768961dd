//! Online prediction strategies with deterministic pathwise guarantees.
//!
//! Every strategy here comes with an inequality of the form "for all input
//! sequences, cumulative linear regret stays below an explicit envelope".
//! [`verify_pathwise`] checks the inequality on a concrete transcript and
//! returns the margin; [`adversarial_search`] hunts for sequences that make
//! the margin small (negative margin = falsification).
//!
//! The adaptive strategy is online mirror descent over a compact convex set
//! with the step schedule
//! `η_t = R_max · min{1, (√A_t + √A_{t−1})^{−1}}`, `A_t = Σ_{s≤t}‖z_s − M_s‖²`,
//! which guarantees regret at most `2.5·R_max(√A_n + 1)` (constant 4.5 when
//! a nonzero predictable center sequence `M` is supplied). The schedule only
//! defines `η_t` for `t ≥ 1`; the data-free value `η_0 = R_max` is used for
//! the very first prediction, and a zero variation denominator takes the
//! `min{1, ·}` branch at 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{dot, norm2, norm_p};

/// Compact convex prediction domains with their natural mirror geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    /// Euclidean ball of the given radius; regularizer ½‖·‖₂².
    L2Ball { radius: f64 },
    /// ℓp ball, p ∈ (1, 2]; regularizer ‖·‖p²/(2(p−1)), inputs measured in
    /// the dual ℓq norm.
    LpBall { p: f64, radius: f64 },
    /// Axis-aligned box containing the origin; regularizer ½‖·‖₂².
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// A Bregman geometry on a compact convex set: regularizer, gradient,
/// divergence, strong-convexity constant, and the diameter bound
/// `R_max² ≥ sup_{f,g} D(f,g)` that the adaptive step schedule consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorMap {
    dimension: usize,
    domain: DomainKind,
    r_max: f64,
}

impl MirrorMap {
    pub fn l2_ball(dimension: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("radius {radius} must be positive")));
        }
        // sup D = ½(2ρ)² exactly.
        Ok(Self {
            dimension,
            domain: DomainKind::L2Ball { radius },
            r_max: radius * 2f64.sqrt(),
        })
    }

    pub fn lp_ball(dimension: usize, p: f64, radius: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::Domain(format!("p = {p} outside (1, 2]")));
        }
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("radius {radius} must be positive")));
        }
        // Upper bound on sup D: R(f) ≤ ρ²/(2(p−1)) and
        // |⟨∇R(g), f−g⟩| ≤ (ρ/(p−1))·2ρ, so sup D ≤ 2.5ρ²/(p−1).
        let r_max = (2.5 * radius * radius / (p - 1.0)).sqrt();
        Ok(Self {
            dimension,
            domain: DomainKind::LpBall { p, radius },
            r_max,
        })
    }

    pub fn box_domain(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Shape("box bounds must align and be nonempty".into()));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l <= &0.0 && *u >= 0.0 && l < u) {
                return Err(Error::Domain(
                    "box must contain 0 with nonempty interior per coordinate".into(),
                ));
            }
        }
        let diam_sq: f64 = lower.iter().zip(&upper).map(|(l, u)| (u - l) * (u - l)).sum();
        let dimension = lower.len();
        Ok(Self {
            dimension,
            domain: DomainKind::Box { lower, upper },
            r_max: (0.5 * diam_sq).sqrt(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> &DomainKind {
        &self.domain
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Strong-convexity constant of the regularizer on the domain (all
    /// supplied geometries are normalized to 1).
    pub fn strong_convexity(&self) -> f64 {
        1.0
    }

    pub fn regularizer(&self, f: &[f64]) -> f64 {
        match &self.domain {
            DomainKind::L2Ball { .. } | DomainKind::Box { .. } => 0.5 * dot(f, f),
            DomainKind::LpBall { p, .. } => {
                let n = norm_p(f, *p);
                n * n / (2.0 * (p - 1.0))
            }
        }
    }

    pub fn gradient(&self, f: &[f64]) -> Vec<f64> {
        match &self.domain {
            DomainKind::L2Ball { .. } | DomainKind::Box { .. } => f.to_vec(),
            DomainKind::LpBall { p, .. } => {
                let n = norm_p(f, *p);
                if n == 0.0 {
                    return vec![0.0; f.len()];
                }
                f.iter()
                    .map(|x| x.signum() * x.abs().powf(p - 1.0) * n.powf(2.0 - p) / (p - 1.0))
                    .collect()
            }
        }
    }

    /// Bregman divergence `D(f, g) = R(f) − R(g) − ⟨∇R(g), f − g⟩`.
    pub fn bregman(&self, f: &[f64], g: &[f64]) -> f64 {
        let grad_g = self.gradient(g);
        let diff: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
        self.regularizer(f) - self.regularizer(g) - dot(&grad_g, &diff)
    }

    /// Norm in which inputs `z` are measured (dual to the prediction norm).
    pub fn z_norm(&self, z: &[f64]) -> f64 {
        match &self.domain {
            DomainKind::L2Ball { .. } | DomainKind::Box { .. } => norm2(z),
            DomainKind::LpBall { p, .. } => norm_p(z, p / (p - 1.0)),
        }
    }

    /// Prediction-space norm (the one the regularizer is strongly convex
    /// against).
    pub fn f_norm(&self, f: &[f64]) -> f64 {
        match &self.domain {
            DomainKind::L2Ball { .. } | DomainKind::Box { .. } => norm2(f),
            DomainKind::LpBall { p, .. } => norm_p(f, *p),
        }
    }

    /// Support function `sup_{f ∈ domain} ⟨f, w⟩` (exact for all three
    /// domain kinds).
    pub fn support(&self, w: &[f64]) -> f64 {
        match &self.domain {
            DomainKind::L2Ball { radius } => radius * norm2(w),
            DomainKind::LpBall { p, radius } => radius * norm_p(w, p / (p - 1.0)),
            DomainKind::Box { lower, upper } => w
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(wi, (l, u))| (l * wi).max(u * wi))
                .sum(),
        }
    }

    pub fn contains(&self, f: &[f64]) -> bool {
        const SLACK: f64 = 1e-9;
        match &self.domain {
            DomainKind::L2Ball { radius } => norm2(f) <= radius + SLACK,
            DomainKind::LpBall { p, radius } => norm_p(f, *p) <= radius + SLACK,
            DomainKind::Box { lower, upper } => f
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(x, (l, u))| *x >= l - SLACK && *x <= u + SLACK),
        }
    }

    /// `argmin_{f ∈ domain} η⟨f, z⟩ + D(f, y)`, solved in closed form.
    ///
    /// For the Euclidean geometries this is a projected gradient step. For
    /// ℓp the unconstrained minimizer solves `∇R(f) = ∇R(y) − ηz`, which the
    /// degree-1 homogeneity of `∇R` makes invertible exactly, and the KKT
    /// multiplier for the ball constraint is a pure radial rescaling.
    pub fn bregman_step(&self, y: &[f64], z: &[f64], eta: f64) -> Result<Vec<f64>> {
        if y.len() != self.dimension || z.len() != self.dimension {
            return Err(Error::Shape(format!(
                "expected dimension {}, got y:{} z:{}",
                self.dimension,
                y.len(),
                z.len()
            )));
        }
        let out = match &self.domain {
            DomainKind::L2Ball { radius } => {
                let mut w: Vec<f64> = y.iter().zip(z).map(|(a, b)| a - eta * b).collect();
                let n = norm2(&w);
                if n > *radius {
                    for x in &mut w {
                        *x *= radius / n;
                    }
                }
                w
            }
            DomainKind::Box { lower, upper } => y
                .iter()
                .zip(z)
                .zip(lower.iter().zip(upper))
                .map(|((a, b), (l, u))| (a - eta * b).clamp(*l, *u))
                .collect(),
            DomainKind::LpBall { p, radius } => {
                let grad_y = self.gradient(y);
                let theta: Vec<f64> = grad_y.iter().zip(z).map(|(g, b)| g - eta * b).collect();
                let mut w = self.gradient_inverse(&theta, *p);
                let n = norm_p(&w, *p);
                if n > *radius {
                    for x in &mut w {
                        *x *= radius / n;
                    }
                }
                w
            }
        };
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "mirror step produced non-finite iterate from y={y:?}, z={z:?}, eta={eta}"
            )));
        }
        Ok(out)
    }

    /// Invert `∇R` for the ℓp regularizer: with `q = p/(p−1)` the solution
    /// has ℓp norm `s = (p−1)‖θ‖_q` and coordinates
    /// `sign(θ_i)·((p−1)|θ_i|)^{1/(p−1)}·s^{(p−2)/(p−1)}`.
    fn gradient_inverse(&self, theta: &[f64], p: f64) -> Vec<f64> {
        let q = p / (p - 1.0);
        let s = (p - 1.0) * norm_p(theta, q);
        if s == 0.0 {
            return vec![0.0; theta.len()];
        }
        theta
            .iter()
            .map(|t| {
                t.signum()
                    * ((p - 1.0) * t.abs()).powf(1.0 / (p - 1.0))
                    * s.powf((p - 2.0) / (p - 1.0))
            })
            .collect()
    }
}

/// The record of one strategy run: per-round predictions, inputs, step
/// sizes, and cumulative variation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretTranscript {
    pub horizon: usize,
    pub dimension: usize,
    pub domain: DomainKind,
    pub r_max: f64,
    /// ŷ_1, …, ŷ_n — each lies in `domain`.
    pub predictions: Vec<Vec<f64>>,
    /// z_1, …, z_n.
    pub inputs: Vec<Vec<f64>>,
    /// Optional predictable centers M_1, …, M_n.
    pub centers: Option<Vec<Vec<f64>>>,
    /// η_1, …, η_n (nonincreasing).
    pub etas: Vec<f64>,
    /// Cumulative raw variation `V_t = Σ_{s≤t}‖z_s‖²`.
    pub variations: Vec<f64>,
    /// Cumulative centered variation `Σ_{s≤t}‖z_s − M_s‖²` when centers are
    /// supplied (equals `variations` otherwise).
    pub centered_variations: Vec<f64>,
}

impl RegretTranscript {
    fn map(&self) -> MirrorMap {
        MirrorMap {
            dimension: self.dimension,
            domain: self.domain.clone(),
            r_max: self.r_max,
        }
    }

    /// Exact supremum of regret over the comparator domain, for the prefix
    /// of length `s`: `Σ_{t≤s} ⟨ŷ_t, z_t⟩ + sup_f ⟨f, −Σ_{t≤s} z_t⟩`.
    pub fn linear_regret_prefix(&self, s: usize) -> f64 {
        let map = self.map();
        let mut inner = 0.0;
        let mut sum = vec![0.0; self.dimension];
        for t in 0..s {
            inner += dot(&self.predictions[t], &self.inputs[t]);
            for (acc, z) in sum.iter_mut().zip(&self.inputs[t]) {
                *acc -= z;
            }
        }
        inner + map.support(&sum)
    }

    pub fn variation(&self) -> f64 {
        self.variations.last().copied().unwrap_or(0.0)
    }

    pub fn centered_variation(&self) -> f64 {
        self.centered_variations.last().copied().unwrap_or(0.0)
    }
}

/// Exact supremum of regret over the unit comparator domain recorded in the
/// transcript.
pub fn linear_regret(transcript: &RegretTranscript) -> f64 {
    transcript.linear_regret_prefix(transcript.horizon)
}

/// Run projected gradient descent with the horizon-tuned step `n^{−1/2}`
/// over the unit Euclidean ball. Requires every `‖z_t‖₂ ≤ 1`.
pub fn gradient_descent_run(z_seq: &[Vec<f64>]) -> Result<RegretTranscript> {
    let n = z_seq.len();
    if n == 0 {
        return Err(Error::Domain("empty input sequence".into()));
    }
    let d = z_seq[0].len();
    let map = MirrorMap::l2_ball(d, 1.0)?;
    for (t, z) in z_seq.iter().enumerate() {
        if z.len() != d {
            return Err(Error::Shape(format!("z_{} has dimension {}", t + 1, z.len())));
        }
        if norm2(z) > 1.0 + 1e-12 {
            return Err(Error::Domain(format!(
                "‖z_{}‖ = {} exceeds the unit ball",
                t + 1,
                norm2(z)
            )));
        }
    }
    let step = 1.0 / (n as f64).sqrt();
    let mut predictions = Vec::with_capacity(n);
    let mut variations = Vec::with_capacity(n);
    let mut y = vec![0.0; d];
    let mut v = 0.0;
    for z in z_seq {
        predictions.push(y.clone());
        v += dot(z, z);
        variations.push(v);
        y = map.bregman_step(&y, z, step)?;
    }
    Ok(RegretTranscript {
        horizon: n,
        dimension: d,
        domain: map.domain().clone(),
        r_max: map.r_max(),
        predictions,
        inputs: z_seq.to_vec(),
        centers: None,
        etas: vec![step; n],
        centered_variations: variations.clone(),
        variations,
    })
}

/// Run adaptive online mirror descent. With `centers = None` this is the
/// plain variation-adaptive update (2.5-constant guarantee); with centers
/// it is the optimistic variant verified against the 4.5-constant bound.
pub fn adaptive_omd_run(
    map: &MirrorMap,
    z_seq: &[Vec<f64>],
    centers: Option<&[Vec<f64>]>,
) -> Result<RegretTranscript> {
    let n = z_seq.len();
    if n == 0 {
        return Err(Error::Domain("empty input sequence".into()));
    }
    let d = map.dimension();
    for (t, z) in z_seq.iter().enumerate() {
        if z.len() != d {
            return Err(Error::Shape(format!("z_{} has dimension {}", t + 1, z.len())));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("z_{} is not finite", t + 1)));
        }
    }
    if let Some(ms) = centers {
        if ms.len() != n {
            return Err(Error::Shape(format!(
                "{} centers for horizon {n}",
                ms.len()
            )));
        }
    }
    let origin = vec![0.0; d];
    if !map.contains(&origin) {
        return Err(Error::Domain("domain must contain the origin".into()));
    }
    let center_at = |t: usize| -> &[f64] {
        centers.map(|ms| ms[t].as_slice()).unwrap_or(&origin)
    };

    let r = map.r_max();
    let mut predictions = Vec::with_capacity(n);
    let mut etas = Vec::with_capacity(n);
    let mut variations = Vec::with_capacity(n);
    let mut centered_variations = Vec::with_capacity(n);

    // ŷ_1 from the data-free step η_0 = R_max against the first center.
    let mut g = origin.clone();
    let mut y_next = if centers.is_some() {
        map.bregman_step(&g, center_at(0), r)?
    } else {
        g.clone()
    };
    let mut a_prev = 0.0; // A_{t−1}
    let mut v_raw = 0.0;
    for t in 0..n {
        predictions.push(y_next.clone());
        let z = &z_seq[t];
        let m = center_at(t);
        let delta_sq: f64 = {
            let diff: Vec<f64> = z.iter().zip(m).map(|(a, b)| a - b).collect();
            let nz = map.z_norm(&diff);
            nz * nz
        };
        let a_t = a_prev + delta_sq;
        let denom = a_t.sqrt() + a_prev.sqrt();
        // 1/0 is treated as +∞, so the min{1, ·} branch takes 1.
        let eta = r * if denom > 0.0 { (1.0 / denom).min(1.0) } else { 1.0 };
        etas.push(eta);

        let nz_raw = map.z_norm(z);
        v_raw += nz_raw * nz_raw;
        variations.push(v_raw);
        centered_variations.push(a_t);

        g = map.bregman_step(&g, z, eta)?;
        y_next = if centers.is_some() && t + 1 < n {
            map.bregman_step(&g, center_at(t + 1), eta)?
        } else {
            g.clone()
        };
        a_prev = a_t;
    }
    Ok(RegretTranscript {
        horizon: n,
        dimension: d,
        domain: map.domain().clone(),
        r_max: r,
        predictions,
        inputs: z_seq.to_vec(),
        centers: centers.map(|ms| ms.to_vec()),
        etas,
        variations,
        centered_variations,
    })
}

/// The pathwise bound a transcript is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundKind {
    /// `√n` (horizon-tuned gradient descent over the unit ball).
    SqrtN,
    /// `2.5·R_max(√V_n + 1)` (adaptive mirror descent).
    AdaptiveVariation,
    /// `4.5·R_max(√(Σ‖z_t − M_t‖²) + 1)` (optimistic variant).
    CenteredVariation,
    /// `32·D·log₂(n)·(Σ_t ‖z_t‖^r)^{1/r} + φ_n`: the variance-adaptive
    /// envelope for classes with `n^{1/r}` complexity growth. For linear
    /// games over the dual ball, the per-round envelope `sup_f |⟨f, z_t⟩|`
    /// is exactly `‖z_t‖`. The `log₂` factor and the natural logs inside
    /// `φ_n` follow the source statements, which use different bases.
    LogVariationR { d_growth: f64, r: f64 },
}

/// Value of the bound for a transcript.
pub fn bound_value(transcript: &RegretTranscript, kind: BoundKind) -> Result<f64> {
    let n = transcript.horizon as f64;
    Ok(match kind {
        BoundKind::SqrtN => n.sqrt(),
        BoundKind::AdaptiveVariation => {
            2.5 * transcript.r_max * (transcript.variation().sqrt() + 1.0)
        }
        BoundKind::CenteredVariation => {
            4.5 * transcript.r_max * (transcript.centered_variation().sqrt() + 1.0)
        }
        BoundKind::LogVariationR { d_growth, r } => {
            if !(1.0 < r && r <= 2.0) {
                return Err(Error::Domain(format!("r = {r} outside (1, 2]")));
            }
            let map = transcript.map();
            let var_r: f64 = transcript
                .inputs
                .iter()
                .map(|z| map.z_norm(z).powf(r))
                .sum::<f64>()
                .powf(1.0 / r);
            32.0 * d_growth * n.log2() * var_r + phi_n(d_growth, transcript.horizon as u64)?
        }
    })
}

/// Margin of the pathwise inequality on this transcript:
/// `bound − linear_regret`. Nonnegative margin certifies the inequality on
/// this sequence; a negative value is a returned falsification, not an
/// error.
pub fn verify_pathwise(transcript: &RegretTranscript, kind: BoundKind) -> Result<f64> {
    Ok(bound_value(transcript, kind)? - linear_regret(transcript))
}

/// `φ_n = 64·D·√n·ln(n) / n^{D²·ln n}` — the negligible remainder attached
/// to the log-variation bound (natural logarithms throughout; evaluated in
/// log space to avoid overflow).
pub fn phi_n(d_growth: f64, n: u64) -> Result<f64> {
    if !(d_growth > 0.0) {
        return Err(Error::Domain(format!("D = {d_growth} must be positive")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("n = {n} must be ≥ 2")));
    }
    let nf = n as f64;
    let ln_n = nf.ln();
    let log_phi = (64.0 * d_growth).ln() + 0.5 * ln_n + ln_n.ln() - d_growth * d_growth * ln_n * ln_n;
    Ok(log_phi.exp())
}

/// A runnable strategy paired with the bound it claims.
pub trait Strategy: Sync {
    fn run(&self, z_seq: &[Vec<f64>]) -> Result<RegretTranscript>;
    fn bound(&self) -> BoundKind;
    /// Radius of the admissible input ball for this strategy.
    fn input_radius(&self) -> f64;
}

/// Horizon-tuned projected gradient descent on the unit Euclidean ball.
pub struct GradientDescentStrategy;

impl Strategy for GradientDescentStrategy {
    fn run(&self, z_seq: &[Vec<f64>]) -> Result<RegretTranscript> {
        gradient_descent_run(z_seq)
    }
    fn bound(&self) -> BoundKind {
        BoundKind::SqrtN
    }
    fn input_radius(&self) -> f64 {
        1.0
    }
}

/// Adaptive mirror descent over the supplied geometry.
pub struct AdaptiveStrategy {
    pub map: MirrorMap,
    /// Radius of the input ball the adversarial search samples from.
    pub search_radius: f64,
}

impl Strategy for AdaptiveStrategy {
    fn run(&self, z_seq: &[Vec<f64>]) -> Result<RegretTranscript> {
        adaptive_omd_run(&self.map, z_seq, None)
    }
    fn bound(&self) -> BoundKind {
        BoundKind::AdaptiveVariation
    }
    fn input_radius(&self) -> f64 {
        self.search_radius
    }
}

/// A deliberately broken strategy (predictions pinned at the first basis
/// vector) claiming the adaptive bound. Exists so the falsification harness
/// has something to catch.
pub struct ConstantStub {
    pub map: MirrorMap,
}

impl Strategy for ConstantStub {
    fn run(&self, z_seq: &[Vec<f64>]) -> Result<RegretTranscript> {
        let honest = adaptive_omd_run(&self.map, z_seq, None)?;
        let mut e1 = vec![0.0; self.map.dimension()];
        e1[0] = 1.0;
        Ok(RegretTranscript {
            predictions: vec![e1; z_seq.len()],
            ..honest
        })
    }
    fn bound(&self) -> BoundKind {
        BoundKind::AdaptiveVariation
    }
    fn input_radius(&self) -> f64 {
        1.0
    }
}

/// Result of an adversarial margin search.
#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub sequence: Vec<Vec<f64>>,
    pub margin: f64,
    pub evaluations: u64,
}

/// Sample a sequence of `n` vectors from the radius-`r` Euclidean ball,
/// biased toward the boundary (tight cases live there).
pub fn random_ball_sequence(
    rng: &mut impl rand::Rng,
    n: usize,
    d: usize,
    radius: f64,
) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = norm2(&v);
            if norm == 0.0 {
                return v;
            }
            let target = if rng.gen_bool(0.5) {
                radius
            } else {
                radius * rng.gen_range(0.0..1.0f64)
            };
            for x in &mut v {
                *x *= target / norm;
            }
            v
        })
        .collect()
}

/// Stress-test the "for all sequences" quantifier: random restarts plus
/// coordinate-wise perturbation descent on the verification margin.
/// Deterministic given the seed. Returns the worst sequence found.
pub fn adversarial_search(
    strategy: &dyn Strategy,
    n: usize,
    d: usize,
    budget: u64,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget < 1 {
        return Err(Error::Domain("budget must be ≥ 1".into()));
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let radius = strategy.input_radius();

    let eval = |seq: &[Vec<f64>]| -> Result<f64> {
        verify_pathwise(&strategy.run(seq)?, strategy.bound())
    };

    let mut best_seq = random_ball_sequence(&mut rng, n, d, radius);
    let mut best_margin = eval(&best_seq)?;
    let mut used = 1u64;

    // Canonical extremal probes: constant axis-aligned sequences sit at the
    // boundary of the admissible set and catch gross violations cheaply.
    'probes: for i in 0..d.min(4) {
        for sign in [1.0, -1.0] {
            if used >= budget {
                break 'probes;
            }
            let mut v = vec![0.0; d];
            v[i] = sign * radius;
            let cand = vec![v; n];
            let margin = eval(&cand)?;
            used += 1;
            if margin < best_margin {
                best_margin = margin;
                best_seq = cand;
            }
        }
    }

    // Alternate fresh restarts with local perturbation descent from the
    // incumbent; 25% of the budget goes to restarts.
    let restarts = (budget / 4).max(1);
    while used < restarts.min(budget) {
        let cand = random_ball_sequence(&mut rng, n, d, radius);
        let margin = eval(&cand)?;
        used += 1;
        if margin < best_margin {
            best_margin = margin;
            best_seq = cand;
        }
    }
    let mut scale = 0.5 * radius;
    while used < budget {
        let mut cand = best_seq.clone();
        let t = rng.gen_range(0..n);
        let i = rng.gen_range(0..d);
        cand[t][i] += rng.gen_range(-scale..scale);
        let norm = norm2(&cand[t]);
        if norm > radius {
            for x in &mut cand[t] {
                *x *= radius / norm;
            }
        }
        let margin = eval(&cand)?;
        used += 1;
        if margin < best_margin {
            best_margin = margin;
            best_seq = cand;
        } else {
            scale = (scale * 0.995).max(1e-4 * radius);
        }
    }
    Ok(SearchOutcome {
        sequence: best_seq,
        margin: best_margin,
        evaluations: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn e1(d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        v
    }

    #[test]
    fn gd_first_prediction_is_zero() {
        let t = gradient_descent_run(&[e1(3)]).unwrap();
        assert_eq!(t.predictions[0], vec![0.0; 3]);
        let regret = linear_regret(&t);
        assert!((regret - 1.0).abs() < 1e-12);
        // Tight case: margin √1 − 1 = 0.
        assert!(verify_pathwise(&t, BoundKind::SqrtN).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gd_zero_inputs_zero_regret() {
        let zs = vec![vec![0.0, 0.0]; 5];
        let t = gradient_descent_run(&zs).unwrap();
        assert!(t.predictions.iter().all(|y| y.iter().all(|x| *x == 0.0)));
        assert_eq!(linear_regret(&t), 0.0);
    }

    #[test]
    fn gd_two_round_hand_example() {
        // z₁ = z₂ = e₁ in d = 2: ŷ₂ = −e₁/√2, regret = 2 − 1/√2.
        let zs = vec![e1(2), e1(2)];
        let t = gradient_descent_run(&zs).unwrap();
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        assert!((t.predictions[1][0] + inv_sqrt2).abs() < 1e-12);
        let regret = linear_regret(&t);
        assert!((regret - (2.0 - inv_sqrt2)).abs() < 1e-12);
        let margin = verify_pathwise(&t, BoundKind::SqrtN).unwrap();
        assert!((margin - (2f64.sqrt() - 2.0 + inv_sqrt2)).abs() < 1e-12);
    }

    #[test]
    fn gd_rejects_oversized_inputs() {
        let z = vec![vec![1.5, 0.0]];
        assert!(matches!(gradient_descent_run(&z), Err(Error::Domain(_))));
    }

    #[test]
    fn omd_unit_norm_inputs_follow_schedule() {
        let map = MirrorMap::l2_ball(2, 1.0).unwrap();
        let zs = vec![e1(2); 6];
        let t = adaptive_omd_run(&map, &zs, None).unwrap();
        let r = map.r_max();
        for (i, eta) in t.etas.iter().enumerate() {
            let tt = (i + 1) as f64;
            let expect = r * (1.0f64 / (tt.sqrt() + (tt - 1.0).sqrt())).min(1.0);
            assert!((eta - expect).abs() < 1e-12, "η_{} = {eta} vs {expect}", i + 1);
        }
    }

    #[test]
    fn omd_zero_inputs_stay_at_origin() {
        let map = MirrorMap::l2_ball(3, 1.0).unwrap();
        let zs = vec![vec![0.0; 3]; 4];
        let t = adaptive_omd_run(&map, &zs, None).unwrap();
        for eta in &t.etas {
            assert!((eta - map.r_max()).abs() < 1e-12);
        }
        assert_eq!(linear_regret(&t), 0.0);
        assert!(verify_pathwise(&t, BoundKind::AdaptiveVariation).unwrap() > 0.0);
    }

    #[test]
    fn omd_etas_nonincreasing_and_predictions_feasible() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for map in [
            MirrorMap::l2_ball(4, 1.0).unwrap(),
            MirrorMap::lp_ball(4, 1.5, 1.0).unwrap(),
            MirrorMap::box_domain(vec![-1.0; 4], vec![1.0; 4]).unwrap(),
        ] {
            let zs = random_ball_sequence(&mut rng, 20, 4, 2.0);
            let t = adaptive_omd_run(&map, &zs, None).unwrap();
            for w in t.etas.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
            }
            for y in &t.predictions {
                assert!(map.contains(y), "{y:?} outside domain");
            }
        }
    }

    #[test]
    fn omd_euclidean_matches_projected_gradient() {
        // Independent projected-gradient recursion with the same schedule.
        let map = MirrorMap::l2_ball(3, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let zs = random_ball_sequence(&mut rng, 25, 3, 1.0);
        let t = adaptive_omd_run(&map, &zs, None).unwrap();

        let mut y = vec![0.0; 3];
        let mut a_prev: f64 = 0.0;
        for (i, z) in zs.iter().enumerate() {
            for (a, b) in t.predictions[i].iter().zip(&y) {
                assert!((a - b).abs() < 1e-10, "round {i}");
            }
            let a_t = a_prev + dot(z, z);
            let denom = a_t.sqrt() + a_prev.sqrt();
            let eta = map.r_max() * if denom > 0.0 { (1.0 / denom).min(1.0) } else { 1.0 };
            let w: Vec<f64> = y.iter().zip(z).map(|(a, b)| a - eta * b).collect();
            let nw = norm2(&w);
            y = if nw > 1.0 {
                w.iter().map(|x| x / nw).collect()
            } else {
                w
            };
            a_prev = a_t;
        }
    }

    #[test]
    fn omd_fuzz_pathwise_bound_holds() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for map in [
            MirrorMap::l2_ball(3, 1.0).unwrap(),
            MirrorMap::lp_ball(3, 1.3, 1.0).unwrap(),
            MirrorMap::box_domain(vec![-0.5, -1.0, -0.2], vec![1.0, 0.3, 0.8]).unwrap(),
        ] {
            for _ in 0..300 {
                let n = rng.gen_range(1..30);
                let zs = random_ball_sequence(&mut rng, n, 3, 3.0);
                let t = adaptive_omd_run(&map, &zs, None).unwrap();
                let margin = verify_pathwise(&t, BoundKind::AdaptiveVariation).unwrap();
                assert!(margin >= -1e-9, "violated with margin {margin}");
            }
        }
    }

    #[test]
    fn omd_centered_fuzz_bound_holds() {
        let map = MirrorMap::l2_ball(3, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..300 {
            let n = rng.gen_range(1..25);
            let zs = random_ball_sequence(&mut rng, n, 3, 1.0);
            // Predictable centers: previous input (a classic choice).
            let mut ms = vec![vec![0.0; 3]];
            ms.extend(zs[..n - 1].iter().cloned());
            let t = adaptive_omd_run(&map, &zs, Some(&ms)).unwrap();
            let margin = verify_pathwise(&t, BoundKind::CenteredVariation).unwrap();
            assert!(margin >= -1e-9, "centered bound violated: {margin}");
        }
    }

    #[test]
    fn omd_anytime_prefix_bound_holds() {
        let map = MirrorMap::l2_ball(2, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.gen_range(1..40);
            let zs = random_ball_sequence(&mut rng, n, 2, 1.5);
            let t = adaptive_omd_run(&map, &zs, None).unwrap();
            for s in 1..=n {
                let prefix_bound = 2.5 * t.r_max * (t.variations[s - 1].sqrt() + 1.0);
                assert!(t.linear_regret_prefix(s) <= prefix_bound + 1e-9);
            }
        }
    }

    #[test]
    fn mirror_map_invariants_on_sampled_pairs() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for map in [
            MirrorMap::l2_ball(3, 1.0).unwrap(),
            MirrorMap::lp_ball(3, 1.5, 1.0).unwrap(),
            MirrorMap::lp_ball(3, 2.0, 2.0).unwrap(),
            MirrorMap::box_domain(vec![-1.0; 3], vec![0.5; 3]).unwrap(),
        ] {
            for _ in 0..200 {
                // Rejection-sample points of the domain.
                let sample = |rng: &mut ChaCha12Rng| loop {
                    let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    if map.contains(&v) {
                        return v;
                    }
                };
                let f = sample(&mut rng);
                let g = sample(&mut rng);
                let d = map.bregman(&f, &g);
                assert!(d >= -1e-12, "negative divergence {d}");
                let gap = map.f_norm(&f.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>());
                assert!(
                    d >= 0.5 * gap * gap - 1e-9,
                    "strong convexity fails: D = {d}, ½‖f−g‖² = {}",
                    0.5 * gap * gap
                );
                assert!(
                    map.r_max() * map.r_max() >= d - 1e-9,
                    "R_max² = {} < D = {d}",
                    map.r_max() * map.r_max()
                );
                assert!(map.bregman(&f, &f).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lp_bregman_step_is_the_argmin() {
        // The closed-form step beats random feasible candidates to 1e−10.
        let map = MirrorMap::lp_ball(3, 1.5, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..50 {
            let y = {
                let mut v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = norm_p(&v, 1.5);
                if n > 1.0 {
                    for x in &mut v {
                        *x /= n * 1.001;
                    }
                }
                v
            };
            let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let eta = rng.gen_range(0.01..2.0);
            let star = map.bregman_step(&y, &z, eta).unwrap();
            let objective = |f: &[f64]| eta * dot(f, &z) + map.bregman(f, &y);
            let best = objective(&star);
            for _ in 0..200 {
                let mut cand: Vec<f64> = star
                    .iter()
                    .map(|x| x + rng.gen_range(-0.1..0.1))
                    .collect();
                let n = norm_p(&cand, 1.5);
                if n > 1.0 {
                    for x in &mut cand {
                        *x /= n;
                    }
                }
                assert!(
                    objective(&cand) >= best - 1e-10,
                    "candidate beats the closed form by {}",
                    best - objective(&cand)
                );
            }
        }
    }

    #[test]
    fn phi_n_values_and_monotonicity() {
        // Direct substitution at D = 1, n = 2.
        let expect = 64.0 * 2f64.sqrt() * 2f64.ln() / 2f64.powf(2f64.ln());
        assert!((phi_n(1.0, 2).unwrap() - expect).abs() < 1e-9);
        assert!(phi_n(1.0, 10).unwrap() > phi_n(1.0, 100).unwrap());
        assert!(phi_n(5.0, 10).unwrap() < 1e-30);
        assert!(phi_n(1.0, 1).is_err());
        assert!(phi_n(0.0, 10).is_err());
    }

    #[test]
    fn log_variation_bound_evaluates() {
        let zs = vec![e1(2); 8];
        let t = gradient_descent_run(&zs).unwrap();
        let b = bound_value(
            &t,
            BoundKind::LogVariationR {
                d_growth: 1.0,
                r: 2.0,
            },
        )
        .unwrap();
        let expect = 32.0 * 8f64.log2() * 8f64.sqrt() + phi_n(1.0, 8).unwrap();
        assert!((b - expect).abs() < 1e-9);
    }

    #[test]
    fn search_with_unit_budget_returns_single_sample() {
        let out = adversarial_search(&GradientDescentStrategy, 4, 2, 1, 77).unwrap();
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.sequence.len(), 4);
    }

    #[test]
    fn search_gd_n1_finds_zero_margin() {
        // Margin is 1 − ‖z₁‖, minimized at 0 on the unit sphere.
        let out = adversarial_search(&GradientDescentStrategy, 1, 3, 400, 1).unwrap();
        assert!(out.margin.abs() < 1e-6, "margin {}", out.margin);
        assert!(out.margin >= -1e-9);
    }

    #[test]
    fn search_is_deterministic_given_seed() {
        let a = adversarial_search(&GradientDescentStrategy, 6, 2, 300, 5).unwrap();
        let b = adversarial_search(&GradientDescentStrategy, 6, 2, 300, 5).unwrap();
        assert_eq!(a.sequence, b.sequence);
        assert_eq!(a.margin, b.margin);
    }

    #[test]
    fn search_falsifies_the_constant_stub() {
        let stub = ConstantStub {
            map: MirrorMap::l2_ball(2, 1.0).unwrap(),
        };
        let out = adversarial_search(&stub, 32, 2, 500, 3).unwrap();
        assert!(out.margin < 0.0, "stub not falsified: {}", out.margin);
    }

    #[test]
    fn transcript_json_round_trip() {
        let t = gradient_descent_run(&[e1(2), e1(2)]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: RegretTranscript = serde_json::from_str(&json).unwrap();
        assert_eq!(back.predictions, t.predictions);
        assert_eq!(back.etas, t.etas);
    }
}
