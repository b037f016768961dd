//! Martingale samplers with tangent sequences and Monte Carlo verification
//! of analytic tail envelopes.
//!
//! Conditional quantities (`W_n`, the p-variations, tangent expectations of
//! pair functionals) are always computed exactly from the model's kernel,
//! never by nested resampling. Monte Carlo enters only through the outer
//! replicate average, so every tolerance is a plain binomial/CLT statement.
//!
//! Replicate `r` is reproducible from `(master seed, r)` alone: the
//! generator is ChaCha12 keyed by the master seed with the replicate index
//! as stream, so batches are byte-identical regardless of worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::strategies::{adaptive_omd_run, MirrorMap};
use crate::trees::{DyadicTree, FiniteFunctionClass, Tree};
use crate::util::{dot, norm2, pairwise_mean, standard_error};

/// Pinned RNG identity, recorded in every batch and report.
pub const GENERATOR_VERSION: &str = "chacha12/stream-per-replicate/v1";

/// One component of a symmetric mixture round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub prob: f64,
    pub vector: Vec<f64>,
}

/// One round of a conditionally symmetric process: `Z_t = ε_t · U_t` with
/// `U_t` drawn from these atoms and `ε_t` an independent sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRound {
    pub atoms: Vec<Atom>,
}

/// Sampler specifications producing adapted sequences plus tangent copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MartingaleModel {
    /// Increments `ε_t·f(x_t(ε))` along a decorated tree, indexed by the
    /// functions of the class.
    Dyadic {
        class: FiniteFunctionClass,
        tree: DyadicTree,
    },
    /// Vector-valued conditionally symmetric increments.
    ConditionallySymmetric { rounds: Vec<MixtureRound> },
    /// A finite-state chain observed through a function class `g(Z_t)`.
    FiniteMarkov {
        kernel: Vec<Vec<f64>>,
        initial: Vec<f64>,
        class: FiniteFunctionClass,
        horizon: usize,
    },
}

fn check_distribution(name: &str, row: &[f64]) -> Result<()> {
    if row.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Domain(format!("{name} has a negative probability")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

impl MartingaleModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MartingaleModel::Dyadic { class, tree } => {
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
            MartingaleModel::ConditionallySymmetric { rounds } => {
                if rounds.is_empty() {
                    return Err(Error::Domain("model needs at least one round".into()));
                }
                let d = rounds[0]
                    .atoms
                    .first()
                    .map(|a| a.vector.len())
                    .ok_or_else(|| Error::Domain("round with no atoms".into()))?;
                for (t, round) in rounds.iter().enumerate() {
                    let probs: Vec<f64> = round.atoms.iter().map(|a| a.prob).collect();
                    check_distribution(&format!("round {} mixture", t + 1), &probs)?;
                    for atom in &round.atoms {
                        if atom.vector.len() != d {
                            return Err(Error::Shape(format!(
                                "round {} atom dimension {} vs {d}",
                                t + 1,
                                atom.vector.len()
                            )));
                        }
                        if atom.vector.iter().any(|x| !x.is_finite()) {
                            return Err(Error::Domain("non-finite atom vector".into()));
                        }
                    }
                }
                Ok(())
            }
            MartingaleModel::FiniteMarkov {
                kernel,
                initial,
                class,
                horizon,
            } => {
                let m = class.domain_size();
                if *horizon == 0 {
                    return Err(Error::Domain("horizon must be ≥ 1".into()));
                }
                if kernel.len() != m || initial.len() != m {
                    return Err(Error::Shape(format!(
                        "kernel {}×? and initial {} vs {m} states",
                        kernel.len(),
                        initial.len()
                    )));
                }
                check_distribution("initial distribution", initial)?;
                for (s, row) in kernel.iter().enumerate() {
                    if row.len() != m {
                        return Err(Error::Shape(format!("kernel row {s} has {} entries", row.len())));
                    }
                    check_distribution(&format!("kernel row {s}"), row)?;
                }
                Ok(())
            }
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            MartingaleModel::Dyadic { tree, .. } => tree.depth(),
            MartingaleModel::ConditionallySymmetric { rounds } => rounds.len(),
            MartingaleModel::FiniteMarkov { horizon, .. } => *horizon,
        }
    }

    /// Ambient dimension for vector-valued kinds.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            MartingaleModel::ConditionallySymmetric { rounds } => {
                rounds[0].atoms.first().map(|a| a.vector.len())
            }
            _ => None,
        }
    }

    /// Truncate to the first `n` rounds.
    pub fn with_horizon(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.horizon() {
            return Err(Error::Domain(format!(
                "horizon {n} outside 1..={}",
                self.horizon()
            )));
        }
        Ok(match self {
            MartingaleModel::Dyadic { class, tree } => MartingaleModel::Dyadic {
                class: class.clone(),
                tree: Tree::new(tree.levels()[..n].to_vec()).expect("prefix levels"),
            },
            MartingaleModel::ConditionallySymmetric { rounds } => {
                MartingaleModel::ConditionallySymmetric {
                    rounds: rounds[..n].to_vec(),
                }
            }
            MartingaleModel::FiniteMarkov {
                kernel,
                initial,
                class,
                ..
            } => MartingaleModel::FiniteMarkov {
                kernel: kernel.clone(),
                initial: initial.clone(),
                class: class.clone(),
                horizon: n,
            },
        })
    }

    /// Content hash of the canonical JSON encoding (for report metadata).
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("model serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The zero process: `n` rounds of the single zero atom.
    pub fn zero_process(d: usize, n: usize) -> Self {
        let round = MixtureRound {
            atoms: vec![Atom {
                prob: 1.0,
                vector: vec![0.0; d],
            }],
        };
        MartingaleModel::ConditionallySymmetric {
            rounds: vec![round; n],
        }
    }

    /// `Z_t = ε_t · e_1`.
    pub fn rademacher_axis(d: usize, n: usize) -> Self {
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        let round = MixtureRound {
            atoms: vec![Atom {
                prob: 1.0,
                vector: e1,
            }],
        };
        MartingaleModel::ConditionallySymmetric {
            rounds: vec![round; n],
        }
    }

    /// `Z_t = ε_t · e_J` with `J` uniform over the `d` coordinates.
    pub fn rademacher_coordinate(d: usize, n: usize) -> Self {
        let atoms = (0..d)
            .map(|j| {
                let mut v = vec![0.0; d];
                v[j] = 1.0;
                Atom {
                    prob: 1.0 / d as f64,
                    vector: v,
                }
            })
            .collect();
        let round = MixtureRound { atoms };
        MartingaleModel::ConditionallySymmetric {
            rounds: vec![round; n],
        }
    }

    /// `Z_t = ε_t · s_j·e_{j mod d}` with `j` uniform over the scale list.
    pub fn scaled_mixture(d: usize, n: usize, scales: &[f64]) -> Self {
        let atoms = scales
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let mut v = vec![0.0; d];
                v[j % d] = *s;
                Atom {
                    prob: 1.0 / scales.len() as f64,
                    vector: v,
                }
            })
            .collect();
        let round = MixtureRound { atoms };
        MartingaleModel::ConditionallySymmetric {
            rounds: vec![round; n],
        }
    }

    /// Two-state chain with the uniform i.i.d. kernel, observed through the
    /// given class rows (each row gives a function's values on the states).
    pub fn two_state_uniform(n: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let class = FiniteFunctionClass::from_rows(rows)?;
        if class.domain_size() != 2 {
            return Err(Error::Shape("rows must have two state columns".into()));
        }
        Ok(MartingaleModel::FiniteMarkov {
            kernel: vec![vec![0.5, 0.5]; 2],
            initial: vec![0.5, 0.5],
            class,
            horizon: n,
        })
    }
}

/// The compact draws of one replicate; vectors are reconstructed on demand
/// through the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplicateDraw {
    Mixture {
        atoms: Vec<u16>,
        signs: Vec<i8>,
        tangent_atoms: Vec<u16>,
        tangent_signs: Vec<i8>,
    },
    Dyadic {
        signs: Vec<i8>,
        tangent_signs: Vec<i8>,
    },
    Markov {
        states: Vec<u16>,
        tangent_states: Vec<u16>,
    },
}

/// A batch of independent replicates with full reproducibility metadata.
#[derive(Debug, Clone, Serialize)]
pub struct SampleBatch {
    pub model: MartingaleModel,
    pub num_replicates: usize,
    pub seed: u64,
    pub generator: String,
    pub replicates: Vec<ReplicateDraw>,
}

fn replicate_rng(seed: u64, index: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn draw_categorical(rng: &mut ChaCha12Rng, probs: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn draw_sign(rng: &mut ChaCha12Rng) -> i8 {
    if rng.gen::<bool>() {
        1
    } else {
        -1
    }
}

/// Draw `n_replicates` adapted sequences plus tangent copies. The tangent
/// draw at round `t` uses the same conditional law given the realized past
/// as the primary draw.
pub fn sample_batch(
    model: &MartingaleModel,
    n_replicates: usize,
    seed: u64,
) -> Result<SampleBatch> {
    model.validate()?;
    if n_replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    let replicates: Vec<ReplicateDraw> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            match model {
                MartingaleModel::Dyadic { tree, .. } => {
                    let n = tree.depth();
                    ReplicateDraw::Dyadic {
                        signs: (0..n).map(|_| draw_sign(&mut rng)).collect(),
                        tangent_signs: (0..n).map(|_| draw_sign(&mut rng)).collect(),
                    }
                }
                MartingaleModel::ConditionallySymmetric { rounds } => {
                    let mut atoms = Vec::with_capacity(rounds.len());
                    let mut signs = Vec::with_capacity(rounds.len());
                    let mut tangent_atoms = Vec::with_capacity(rounds.len());
                    let mut tangent_signs = Vec::with_capacity(rounds.len());
                    for round in rounds {
                        atoms.push(
                            draw_categorical(&mut rng, round.atoms.iter().map(|a| a.prob))
                                as u16,
                        );
                        signs.push(draw_sign(&mut rng));
                        tangent_atoms.push(
                            draw_categorical(&mut rng, round.atoms.iter().map(|a| a.prob))
                                as u16,
                        );
                        tangent_signs.push(draw_sign(&mut rng));
                    }
                    ReplicateDraw::Mixture {
                        atoms,
                        signs,
                        tangent_atoms,
                        tangent_signs,
                    }
                }
                MartingaleModel::FiniteMarkov {
                    kernel,
                    initial,
                    horizon,
                    ..
                } => {
                    let mut states = Vec::with_capacity(*horizon);
                    let mut tangent = Vec::with_capacity(*horizon);
                    for t in 0..*horizon {
                        let row = if t == 0 {
                            initial.as_slice()
                        } else {
                            kernel[states[t - 1] as usize].as_slice()
                        };
                        states.push(draw_categorical(&mut rng, row.iter().copied()) as u16);
                        tangent.push(draw_categorical(&mut rng, row.iter().copied()) as u16);
                    }
                    ReplicateDraw::Markov {
                        states,
                        tangent_states: tangent,
                    }
                }
            }
        })
        .collect();
    Ok(SampleBatch {
        model: model.clone(),
        num_replicates: n_replicates,
        seed,
        generator: GENERATOR_VERSION.to_string(),
        replicates,
    })
}

impl SampleBatch {
    fn mixture_rounds(&self) -> Result<&[MixtureRound]> {
        match &self.model {
            MartingaleModel::ConditionallySymmetric { rounds } => Ok(rounds),
            _ => Err(Error::Capability(
                "vector sequences require the conditionally symmetric kind".into(),
            )),
        }
    }

    /// Realized increments of a vector replicate.
    pub fn z_sequence(&self, replicate: usize) -> Result<Vec<Vec<f64>>> {
        let rounds = self.mixture_rounds()?;
        match &self.replicates[replicate] {
            ReplicateDraw::Mixture { atoms, signs, .. } => Ok(rounds
                .iter()
                .zip(atoms.iter().zip(signs))
                .map(|(round, (a, s))| {
                    round.atoms[*a as usize]
                        .vector
                        .iter()
                        .map(|x| f64::from(*s) * x)
                        .collect()
                })
                .collect()),
            _ => unreachable!("draw kind matches model kind"),
        }
    }

    /// Tangent increments of a vector replicate.
    pub fn tangent_sequence(&self, replicate: usize) -> Result<Vec<Vec<f64>>> {
        let rounds = self.mixture_rounds()?;
        match &self.replicates[replicate] {
            ReplicateDraw::Mixture {
                tangent_atoms,
                tangent_signs,
                ..
            } => Ok(rounds
                .iter()
                .zip(tangent_atoms.iter().zip(tangent_signs))
                .map(|(round, (a, s))| {
                    round.atoms[*a as usize]
                        .vector
                        .iter()
                        .map(|x| f64::from(*s) * x)
                        .collect()
                })
                .collect()),
            _ => unreachable!("draw kind matches model kind"),
        }
    }
}

/// Per-replicate variation statistics. Fields are `None` when the model
/// kind does not define them.
#[derive(Debug, Clone, Serialize)]
pub struct VariationStats {
    /// Realized `V_n = Σ‖Z_t‖²`.
    pub v_n: Option<f64>,
    /// Exact `W_n = Σ E_{t−1}‖Z_t‖²`.
    pub w_n: Option<f64>,
    /// Exact `Var_p = Σ_t E'_{t−1} sup_g |g(Z_t) − g(Z'_t)|^p`; for vector
    /// kinds the class is the dual unit ball, so the sup is `‖Z_t − Z'_t‖`.
    pub var_p: Option<f64>,
    /// Exact per-function variations (finite classes only).
    pub var_p_per_g: Option<Vec<f64>>,
}

/// Exact conditional variations for every replicate.
pub fn variations(batch: &SampleBatch, p: f64) -> Result<Vec<VariationStats>> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p = {p} must be ≥ 1")));
    }
    match &batch.model {
        MartingaleModel::Dyadic { .. } => Err(Error::Capability(
            "the dyadic kind has no conditional variations; use the tree statistics".into(),
        )),
        MartingaleModel::ConditionallySymmetric { rounds } => {
            let w_n: f64 = rounds
                .iter()
                .map(|round| {
                    round
                        .atoms
                        .iter()
                        .map(|a| a.prob * dot(&a.vector, &a.vector))
                        .sum::<f64>()
                })
                .sum();
            (0..batch.num_replicates)
                .map(|r| {
                    let z = batch.z_sequence(r)?;
                    let v_n = z.iter().map(|zt| dot(zt, zt)).sum();
                    // E' over the fresh (sign, atom) pair at each round.
                    let var_p = z
                        .iter()
                        .zip(rounds)
                        .map(|(zt, round)| {
                            round
                                .atoms
                                .iter()
                                .map(|a| {
                                    let plus: Vec<f64> =
                                        zt.iter().zip(&a.vector).map(|(x, y)| x - y).collect();
                                    let minus: Vec<f64> =
                                        zt.iter().zip(&a.vector).map(|(x, y)| x + y).collect();
                                    a.prob
                                        * 0.5
                                        * (norm2(&plus).powf(p) + norm2(&minus).powf(p))
                                })
                                .sum::<f64>()
                        })
                        .sum();
                    Ok(VariationStats {
                        v_n: Some(v_n),
                        w_n: Some(w_n),
                        var_p: Some(var_p),
                        var_p_per_g: None,
                    })
                })
                .collect()
        }
        MartingaleModel::FiniteMarkov {
            kernel,
            initial,
            class,
            ..
        } => (0..batch.num_replicates)
            .map(|r| {
                let states = match &batch.replicates[r] {
                    ReplicateDraw::Markov { states, .. } => states,
                    _ => unreachable!(),
                };
                let mut var_p = 0.0;
                let mut per_g = vec![0.0; class.len()];
                for (t, s) in states.iter().enumerate() {
                    let row = if t == 0 {
                        initial.as_slice()
                    } else {
                        kernel[states[t - 1] as usize].as_slice()
                    };
                    let mut sup_term = 0.0;
                    for (sp, prob) in row.iter().enumerate() {
                        let sup_g = (0..class.len())
                            .map(|g| {
                                (class.value(g, u32::from(*s))
                                    - class.value(g, sp as u32))
                                .abs()
                            })
                            .fold(0.0_f64, f64::max);
                        sup_term += prob * sup_g.powf(p);
                        for (g, acc) in per_g.iter_mut().enumerate() {
                            let diff = (class.value(g, u32::from(*s))
                                - class.value(g, sp as u32))
                            .abs();
                            *acc += prob * diff.powf(p);
                        }
                    }
                    var_p += sup_term;
                }
                Ok(VariationStats {
                    v_n: None,
                    w_n: None,
                    var_p: Some(var_p),
                    var_p_per_g: Some(per_g),
                })
            })
            .collect(),
    }
}

/// `‖Σ_t Z_t‖₂` per replicate (vector kinds).
pub fn norm_of_sum(batch: &SampleBatch) -> Result<Vec<f64>> {
    (0..batch.num_replicates)
        .map(|r| {
            let z = batch.z_sequence(r)?;
            let d = z[0].len();
            let mut sum = vec![0.0; d];
            for zt in &z {
                for (a, b) in sum.iter_mut().zip(zt) {
                    *a += b;
                }
            }
            Ok(norm2(&sum))
        })
        .collect()
}

/// `max_{s ≤ n} ‖Σ_{t≤s} Z_t‖₂` per replicate (vector kinds).
pub fn max_prefix_norm(batch: &SampleBatch) -> Result<Vec<f64>> {
    (0..batch.num_replicates)
        .map(|r| {
            let z = batch.z_sequence(r)?;
            let d = z[0].len();
            let mut sum = vec![0.0; d];
            let mut best: f64 = 0.0;
            for zt in &z {
                for (a, b) in sum.iter_mut().zip(zt) {
                    *a += b;
                }
                best = best.max(norm2(&sum));
            }
            Ok(best)
        })
        .collect()
}

/// The supremum of the centered martingale sum per replicate:
/// `sup_g Σ_t (g(Z_t) − E_{t−1} g(Z_t))` with exact conditional means for
/// the chain kind, `sup_f Σ ε_t f(x_t(ε))` for the dyadic kind, and
/// `‖Σ Z_t‖` (the dual-ball supremum) for the vector kind.
pub fn martingale_sup(batch: &SampleBatch) -> Result<Vec<f64>> {
    match &batch.model {
        MartingaleModel::ConditionallySymmetric { .. } => norm_of_sum(batch),
        MartingaleModel::Dyadic { class, tree } => (0..batch.num_replicates)
            .map(|r| {
                let signs = match &batch.replicates[r] {
                    ReplicateDraw::Dyadic { signs, .. } => signs,
                    _ => unreachable!(),
                };
                let path = crate::trees::SignPath::new(signs.clone())?;
                let mut best = f64::NEG_INFINITY;
                for f in 0..class.len() {
                    let mut sum = 0.0;
                    for t in 1..=tree.depth() {
                        let x = tree.evaluate(&path, t)?;
                        sum += f64::from(signs[t - 1]) * class.value(f, x);
                    }
                    best = best.max(sum);
                }
                Ok(best)
            })
            .collect(),
        MartingaleModel::FiniteMarkov {
            kernel,
            initial,
            class,
            ..
        } => (0..batch.num_replicates)
            .map(|r| {
                let states = match &batch.replicates[r] {
                    ReplicateDraw::Markov { states, .. } => states,
                    _ => unreachable!(),
                };
                let mut best = f64::NEG_INFINITY;
                for g in 0..class.len() {
                    let mut sum = 0.0;
                    for (t, s) in states.iter().enumerate() {
                        let row = if t == 0 {
                            initial.as_slice()
                        } else {
                            kernel[states[t - 1] as usize].as_slice()
                        };
                        let cond_mean: f64 = row
                            .iter()
                            .enumerate()
                            .map(|(sp, p)| p * class.value(g, sp as u32))
                            .sum();
                        sum += class.value(g, u32::from(*s)) - cond_mean;
                    }
                    best = best.max(sum);
                }
                Ok(best)
            })
            .collect(),
    }
}

/// The self-normalized ratio statistic per replicate:
/// `(‖ΣZ_t‖ − 2.5·R_max(√V_n + 1)) / √(V_n + W_n + (E√(V_n+W_n))²)`.
/// The plug-in `E√(V_n+W_n)` is the batch mean (exact whenever the
/// variation is deterministic). Conditionally symmetric models may drop
/// `W_n`.
pub fn banach_tail_statistic(
    batch: &SampleBatch,
    r_max: f64,
    include_w: bool,
) -> Result<Vec<f64>> {
    let norms = norm_of_sum(batch)?;
    let stats = variations(batch, 2.0)?;
    let vw: Vec<f64> = stats
        .iter()
        .map(|s| {
            let v = s.v_n.expect("vector kind");
            let w = if include_w { s.w_n.expect("vector kind") } else { 0.0 };
            v + w
        })
        .collect();
    let mean_root: f64 = pairwise_mean(&vw.iter().map(|x| x.sqrt()).collect::<Vec<_>>());
    Ok(norms
        .iter()
        .zip(&vw)
        .zip(&stats)
        .map(|((norm, vw_r), s)| {
            let v = s.v_n.expect("vector kind");
            let numerator = norm - 2.5 * r_max * (v.sqrt() + 1.0);
            numerator / (vw_r + mean_root * mean_root).sqrt()
        })
        .collect())
}

/// Exact one-sided binomial (Clopper–Pearson) upper confidence bound for an
/// exceedance probability, at the given error level.
pub fn binomial_upper_confidence(exceedances: u64, n: u64, level: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("empty sample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level {level} outside (0, 1)")));
    }
    if exceedances >= n {
        return Ok(1.0);
    }
    let beta = Beta::new((exceedances + 1) as f64, (n - exceedances) as f64)
        .map_err(|e| Error::Numeric(format!("beta distribution: {e}")))?;
    Ok(beta.inverse_cdf(1.0 - level))
}

/// Empirical exceedance at one threshold.
#[derive(Debug, Clone, Serialize)]
pub struct TailPoint {
    pub u: f64,
    pub exceedances: u64,
    pub estimate: f64,
    pub upper_confidence: f64,
}

/// Exceedance frequencies with exact binomial upper confidence per
/// threshold.
pub fn empirical_tail(values: &[f64], u_grid: &[f64], level: f64) -> Result<Vec<TailPoint>> {
    if values.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let n = values.len() as u64;
    u_grid
        .iter()
        .map(|u| {
            let k = values.iter().filter(|v| *v > u).count() as u64;
            Ok(TailPoint {
                u: *u,
                exceedances: k,
                estimate: k as f64 / n as f64,
                upper_confidence: binomial_upper_confidence(k, n, level)?,
            })
        })
        .collect()
}

/// The exponential-moment check for an (A, B) pair.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub grid_max: f64,
    pub se_at_max: f64,
    /// (λ, empirical mean, standard error) per grid point.
    pub rows: Vec<(f64, f64, f64)>,
}

/// Grid maximum of the empirical `E exp(λA − λ²B²/2)` with its standard
/// error. The canonical inequality asserts the true expectation is ≤ 1 for
/// every λ.
pub fn check_moment_condition(
    a: &[f64],
    b_sq: &[f64],
    lambda_grid: &[f64],
) -> Result<MomentReport> {
    if a.len() != b_sq.len() || a.is_empty() {
        return Err(Error::Shape("A and B² must align and be nonempty".into()));
    }
    if let Some(bad) = b_sq.iter().find(|b| **b <= 0.0) {
        return Err(Error::Domain(format!("nonpositive B² = {bad}")));
    }
    let mut rows = Vec::with_capacity(lambda_grid.len());
    let mut grid_max = f64::NEG_INFINITY;
    let mut se_at_max = 0.0;
    for &lambda in lambda_grid {
        let samples: Vec<f64> = a
            .iter()
            .zip(b_sq)
            .map(|(ai, bi)| (lambda * ai - lambda * lambda * bi / 2.0).exp())
            .collect();
        let mean = pairwise_mean(&samples);
        let se = standard_error(&samples);
        rows.push((lambda, mean, se));
        if mean > grid_max {
            grid_max = mean;
            se_at_max = se;
        }
    }
    Ok(MomentReport {
        grid_max,
        se_at_max,
        rows,
    })
}

/// Build the canonical (A, B²) pair for a vector batch: A from running the
/// adaptive strategy over the replicate's increments, B² = 4(V_n + W_n)
/// with the exact conditional second moments.
pub fn moment_pairs(batch: &SampleBatch, map: &MirrorMap) -> Result<(Vec<f64>, Vec<f64>)> {
    let stats = variations(batch, 2.0)?;
    let pairs: Vec<(f64, f64)> = (0..batch.num_replicates)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let z = batch.z_sequence(r)?;
            let transcript = adaptive_omd_run(map, &z, None)?;
            let a: f64 = transcript
                .predictions
                .iter()
                .zip(&z)
                .map(|(y, zt)| dot(y, zt))
                .sum();
            let s = &stats[r];
            let b_sq = 4.0 * (s.v_n.expect("vector kind") + s.w_n.expect("vector kind"));
            Ok((a, b_sq))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Both sides of the maximal-inequality comparison.
#[derive(Debug, Clone, Serialize)]
pub struct BdgReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
}

/// Estimate `E max_s ‖Σ_{t≤s} Z_t‖` against
/// `(2.5·R_max + √3)·E√V_n + 2.5·R_max` on the same batch.
pub fn bdg_check(batch: &SampleBatch, r_max: f64) -> Result<BdgReport> {
    let lhs_samples = max_prefix_norm(batch)?;
    let stats = variations(batch, 2.0)?;
    let root_v: Vec<f64> = stats
        .iter()
        .map(|s| s.v_n.expect("vector kind").sqrt())
        .collect();
    let coeff = 2.5 * r_max + 3f64.sqrt();
    Ok(BdgReport {
        lhs: pairwise_mean(&lhs_samples),
        lhs_se: standard_error(&lhs_samples),
        rhs: coeff * pairwise_mean(&root_v) + 2.5 * r_max,
        rhs_se: coeff * standard_error(&root_v),
    })
}

/// Pair functionals `B̃(g; (z_1,z'_1),…,(z_n,z'_n))`, symmetric under the
/// swap of any pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairFunctional {
    Constant { value: f64 },
    /// `scale · Σ_t sup_g |g(z_t) − g(z'_t)|^r`.
    ScaledPairPowerSum { scale: f64, r: f64 },
}

impl PairFunctional {
    fn eval(&self, class: &FiniteFunctionClass, _g: usize, pairs: &[(usize, usize)]) -> f64 {
        match self {
            PairFunctional::Constant { value } => *value,
            PairFunctional::ScaledPairPowerSum { scale, r } => {
                scale
                    * pairs
                        .iter()
                        .map(|(z, zp)| {
                            (0..class.len())
                                .map(|g| {
                                    (class.value(g, *z as u32) - class.value(g, *zp as u32))
                                        .abs()
                                })
                                .fold(0.0_f64, f64::max)
                                .powf(*r)
                        })
                        .sum::<f64>()
            }
        }
    }
}

/// Exact two-sided comparison between the chain-side expectation and the
/// worst symmetrized tree-pair expectation.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetrizationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// True when the tree-pair side was enumerated completely.
    pub rhs_exact: bool,
}

/// Compare `E sup_g [Σ(g(Z_t) − E_{t−1}g(Z_t)) − E'B̃]` (computed by exact
/// chain enumeration) against
/// `max_{(z,z')} E_ε sup_g [Σ ε_t(g(z_t) − g(z'_t)) − B̃]` over tree pairs
/// (enumerated exhaustively when `|states|^(2·(2^n−1)) ≤ tree_budget`,
/// otherwise seeded random search).
pub fn symmetrization_compare(
    model: &MartingaleModel,
    pair_fn: &PairFunctional,
    tree_budget: u64,
    seed: u64,
) -> Result<SymmetrizationReport> {
    model.validate()?;
    let (kernel, initial, class, n) = match model {
        MartingaleModel::FiniteMarkov {
            kernel,
            initial,
            class,
            horizon,
        } => (kernel, initial, class, *horizon),
        _ => {
            return Err(Error::Capability(
                "symmetrization comparison requires the finite chain kind".into(),
            ))
        }
    };
    let m = class.domain_size();
    if (m as f64).powi(n as i32) > 1e7 {
        return Err(Error::Capacity(format!(
            "chain enumeration needs {m}^{n} sequences"
        )));
    }

    // Left side: exact enumeration over state sequences; the tangent
    // expectation of the pair functional is itself an exact enumeration.
    let mut lhs = 0.0;
    let mut seq = vec![0usize; n];
    loop {
        let mut prob = initial[seq[0]];
        for t in 1..n {
            prob *= kernel[seq[t - 1]][seq[t]];
        }
        if prob > 0.0 {
            // E' B̃ per function (constant across g for the built-in kinds,
            // but evaluated per g for generality).
            let mut tangent_expect = vec![0.0; class.len()];
            let mut tangent = vec![0usize; n];
            loop {
                let mut tprob = initial[tangent[0]];
                for t in 1..n {
                    tprob *= kernel[seq[t - 1]][tangent[t]];
                }
                if tprob > 0.0 {
                    let pairs: Vec<(usize, usize)> =
                        seq.iter().copied().zip(tangent.iter().copied()).collect();
                    for (g, acc) in tangent_expect.iter_mut().enumerate() {
                        *acc += tprob * pair_fn.eval(class, g, &pairs);
                    }
                }
                if !increment_base(&mut tangent, m) {
                    break;
                }
            }
            let mut best = f64::NEG_INFINITY;
            for g in 0..class.len() {
                let mut sum = 0.0;
                for (t, s) in seq.iter().enumerate() {
                    let row = if t == 0 {
                        initial.as_slice()
                    } else {
                        kernel[seq[t - 1]].as_slice()
                    };
                    let cond_mean: f64 = row
                        .iter()
                        .enumerate()
                        .map(|(sp, p)| p * class.value(g, sp as u32))
                        .sum();
                    sum += class.value(g, *s as u32) - cond_mean;
                }
                best = best.max(sum - tangent_expect[g]);
            }
            lhs += prob * best;
        }
        if !increment_base(&mut seq, m) {
            break;
        }
    }

    // Right side: worst tree pair.
    let node_count = (1usize << n) - 1;
    let pair_space = (m as f64).powi(2 * node_count as i32);
    let eval_pair = |za: &[usize], zb: &[usize]| -> f64 {
        let mut total = 0.0;
        for k in 0..1u64 << n {
            let mut pairs = Vec::with_capacity(n);
            let mut signs = Vec::with_capacity(n);
            for t in 1..=n {
                let node_offset = (1usize << (t - 1)) - 1;
                let node = (k >> (n - t + 1)) as usize;
                pairs.push((za[node_offset + node], zb[node_offset + node]));
                signs.push(if k >> (n - t) & 1 == 1 { 1.0 } else { -1.0 });
            }
            let mut best = f64::NEG_INFINITY;
            for g in 0..class.len() {
                let sum: f64 = pairs
                    .iter()
                    .zip(&signs)
                    .map(|((z, zp), s)| {
                        s * (class.value(g, *z as u32) - class.value(g, *zp as u32))
                    })
                    .sum();
                best = best.max(sum - pair_fn.eval(class, g, &pairs));
            }
            total += best;
        }
        total / (1u64 << n) as f64
    };

    let mut rhs = f64::NEG_INFINITY;
    let rhs_exact = pair_space <= tree_budget as f64;
    if rhs_exact {
        let mut assign = vec![0usize; 2 * node_count];
        loop {
            rhs = rhs.max(eval_pair(&assign[..node_count], &assign[node_count..]));
            if !increment_base(&mut assign, m) {
                break;
            }
        }
    } else {
        let mut rng = replicate_rng(seed, 0);
        for _ in 0..tree_budget {
            let assign: Vec<usize> =
                (0..2 * node_count).map(|_| rng.gen_range(0..m)).collect();
            rhs = rhs.max(eval_pair(&assign[..node_count], &assign[node_count..]));
        }
    }

    Ok(SymmetrizationReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
        rhs_exact,
    })
}

fn increment_base(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Which per-round variation enters the type probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationVariant {
    /// `E'_{t−1} sup_g |g(Z_t) − g(Z'_t)|^p` (the definition).
    TangentSup,
    /// `sup_g |g(Z_t) − E'_{t−1} g(Z'_t)|^p` (the conjectured smaller
    /// variant; reported, never asserted against).
    CenteredSup,
}

/// One horizon of the martingale-type probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub n: usize,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// `lhs / rhs` — an empirical lower bound on the type-p constant.
    pub ratio: f64,
}

/// Monte Carlo estimate of the type-p ratio
/// `E sup_g Σ(g(Z_t) − E_{t−1}g(Z_t)) / E (Var_p)^{1/p}` per horizon.
pub fn martingale_type_probe(
    model: &MartingaleModel,
    p: f64,
    n_list: &[usize],
    replicates: usize,
    seed: u64,
    variant: VariationVariant,
) -> Result<Vec<ProbeRow>> {
    let mut rows = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let truncated = model.with_horizon(n)?;
        let batch = sample_batch(&truncated, replicates, seed.wrapping_add(i as u64))?;
        let sups = martingale_sup(&batch)?;
        let var_roots: Vec<f64> = match variant {
            VariationVariant::TangentSup => variations(&batch, p)?
                .iter()
                .map(|s| s.var_p.expect("variation-capable kind").powf(1.0 / p))
                .collect(),
            VariationVariant::CenteredSup => centered_variation(&batch, p)?
                .iter()
                .map(|v| v.powf(1.0 / p))
                .collect(),
        };
        let lhs = pairwise_mean(&sups);
        let rhs = pairwise_mean(&var_roots);
        if rhs <= 0.0 && lhs > 0.0 {
            return Err(Error::Domain(format!(
                "degenerate model: zero variation but positive supremum at n = {n}"
            )));
        }
        rows.push(ProbeRow {
            n,
            lhs,
            lhs_se: standard_error(&sups),
            rhs,
            rhs_se: standard_error(&var_roots),
            ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        });
    }
    Ok(rows)
}

/// `Σ_t sup_g |g(Z_t) − E'_{t−1} g(Z'_t)|^p` per replicate (the conjectured
/// variation variant).
fn centered_variation(batch: &SampleBatch, p: f64) -> Result<Vec<f64>> {
    match &batch.model {
        MartingaleModel::ConditionallySymmetric { .. } => {
            // E'Z'_t = 0 by symmetry, so the centered sup over the dual
            // ball is ‖Z_t‖.
            (0..batch.num_replicates)
                .map(|r| {
                    Ok(batch
                        .z_sequence(r)?
                        .iter()
                        .map(|zt| norm2(zt).powf(p))
                        .sum())
                })
                .collect()
        }
        MartingaleModel::FiniteMarkov {
            kernel,
            initial,
            class,
            ..
        } => (0..batch.num_replicates)
            .map(|r| {
                let states = match &batch.replicates[r] {
                    ReplicateDraw::Markov { states, .. } => states,
                    _ => unreachable!(),
                };
                let mut total = 0.0;
                for (t, s) in states.iter().enumerate() {
                    let row = if t == 0 {
                        initial.as_slice()
                    } else {
                        kernel[states[t - 1] as usize].as_slice()
                    };
                    let sup_g = (0..class.len())
                        .map(|g| {
                            let cond_mean: f64 = row
                                .iter()
                                .enumerate()
                                .map(|(sp, pr)| pr * class.value(g, sp as u32))
                                .sum();
                            (class.value(g, u32::from(*s)) - cond_mean).abs()
                        })
                        .fold(0.0_f64, f64::max);
                    total += sup_g.powf(p);
                }
                Ok(total)
            })
            .collect(),
        MartingaleModel::Dyadic { .. } => Err(Error::Capability(
            "the dyadic kind has no conditional variations".into(),
        )),
    }
}

/// One row of an envelope-verification table.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictRow {
    pub u: f64,
    pub envelope: f64,
    pub estimate: f64,
    pub upper_confidence: f64,
    pub pass: bool,
}

/// Verdict of comparing an empirical tail against an analytic envelope.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictTable {
    pub rows: Vec<VerdictRow>,
    pub pass: bool,
    /// Per-threshold confidence level after the Bonferroni split of the
    /// total error budget across the grid.
    pub per_u_level: f64,
}

/// PASS iff the exact binomial upper confidence stays below the envelope at
/// every grid point where the envelope is informative (< 1). The total
/// error budget is split evenly across the grid, so a PASS is a
/// non-refutation statement at confidence `1 − total_level`.
pub fn tail_vs_envelope(
    values: &[f64],
    envelope: &crate::tailbounds::TailEnvelope,
    u_grid: &[f64],
    total_level: f64,
) -> Result<VerdictTable> {
    if u_grid.is_empty() {
        return Err(Error::Domain("empty threshold grid".into()));
    }
    let per_u = total_level / u_grid.len() as f64;
    let tail = empirical_tail(values, u_grid, per_u)?;
    let mut rows = Vec::with_capacity(u_grid.len());
    let mut pass = true;
    for point in tail {
        let env = envelope.evaluate(point.u)?;
        let row_pass = env >= 1.0 || point.upper_confidence <= env;
        pass &= row_pass;
        rows.push(VerdictRow {
            u: point.u,
            envelope: env,
            estimate: point.estimate,
            upper_confidence: point.upper_confidence,
            pass: row_pass,
        });
    }
    Ok(VerdictTable {
        rows,
        pass,
        per_u_level: per_u,
    })
}
