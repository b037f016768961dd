//! Analytic tail envelopes and the transforms that map envelopes to
//! envelopes.
//!
//! A tail envelope is a closed-form nonincreasing function `u ↦ bound`
//! upper-bounding an exceedance probability. Bounds greater than 1 are
//! reported raw; clipping at 1 is the caller's presentation choice, and
//! [`integrate_envelope`] clips internally where it matters.
//!
//! Two self-normalized forms coexist deliberately: the Banach-martingale
//! ratio tail `√2·exp(−u²/16)` and the raw A/B ratio tail `√2·exp(−u²/4)`
//! from which it is derived (the factor-4 gap is absorbed by the variance
//! rescaling in the A/B construction). Both are exposed; Monte Carlo
//! verification targets the `−u²/16` form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Built-in envelope kinds. Parameters are validated at evaluation time so
/// that deserialized specs fail loudly rather than silently produce NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum TailEnvelope {
    /// `2·exp(−u²/(2D²))` for martingales in a (2, D)-smooth space.
    Pinelis { smoothness: f64 },
    /// `√2·exp(−u²/16)`: the self-normalized Banach-martingale tail.
    BanachSelfNormalized,
    /// `√2·exp(−u²/4)`: the ratio tail for an (A, B) pair satisfying the
    /// canonical moment condition.
    RatioAb,
    /// `exp(−u²/(4·sq_sum))` where `sq_sum` is the worst-path sum of
    /// squared per-round envelopes.
    AzumaSup { sq_sum: f64 },
    /// `exp(−u²/(2σ² + 2uM/3))` with `M` the per-round increment bound
    /// times the horizon.
    FreedmanSup { sigma_sq: f64, increment_bound: f64 },
    /// `exp(−2αu)`: linear-exponential tail of the variance-offset supremum.
    ExpTailSup { alpha: f64 },
    /// `exp(−αu/2)`: deviation of the square-loss offset supremum above the
    /// offset Rademacher complexity.
    OffsetDeviation { alpha: f64 },
    /// `exp(−u²/(2v))`: the scalar Azuma–Hoeffding tail with variance
    /// proxy `v` (for a horizon-n average of unit increments, `v = n`).
    Gaussian { variance: f64 },
    /// `e·ln(n)·exp(−2u²)`: tail attached to the uniform-variation
    /// threshold for classes with polynomial complexity growth.
    UniformType { n: u64 },
    /// `e·ln(n)·exp(−u²)`: tail attached to the per-function variation
    /// thresholds.
    PerFunction { n: u64 },
}

impl TailEnvelope {
    /// Exact closed-form evaluation at `u ≥ 0`.
    pub fn evaluate(&self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::Domain(format!("u = {u} is not finite")));
        }
        let v = match self {
            TailEnvelope::Pinelis { smoothness } => {
                require_positive("smoothness D", *smoothness)?;
                2.0 * (-u * u / (2.0 * smoothness * smoothness)).exp()
            }
            TailEnvelope::BanachSelfNormalized => 2f64.sqrt() * (-u * u / 16.0).exp(),
            TailEnvelope::RatioAb => 2f64.sqrt() * (-u * u / 4.0).exp(),
            TailEnvelope::AzumaSup { sq_sum } => {
                require_positive("squared-sum variance", *sq_sum)?;
                (-u * u / (4.0 * sq_sum)).exp()
            }
            TailEnvelope::FreedmanSup {
                sigma_sq,
                increment_bound,
            } => {
                require_nonnegative("variance σ²", *sigma_sq)?;
                require_nonnegative("increment bound M", *increment_bound)?;
                let denom = 2.0 * sigma_sq + 2.0 * u * increment_bound / 3.0;
                if denom <= 0.0 {
                    // u = 0 with zero variance: the bound is exp(0) = 1.
                    1.0
                } else {
                    (-u * u / denom).exp()
                }
            }
            TailEnvelope::ExpTailSup { alpha } => {
                require_positive("alpha", *alpha)?;
                (-2.0 * alpha * u).exp()
            }
            TailEnvelope::OffsetDeviation { alpha } => {
                require_positive("alpha", *alpha)?;
                (-alpha * u / 2.0).exp()
            }
            TailEnvelope::Gaussian { variance } => {
                require_positive("variance", *variance)?;
                (-u * u / (2.0 * variance)).exp()
            }
            TailEnvelope::UniformType { n } => {
                require_horizon(*n)?;
                std::f64::consts::E * (*n as f64).ln() * (-2.0 * u * u).exp()
            }
            TailEnvelope::PerFunction { n } => {
                require_horizon(*n)?;
                std::f64::consts::E * (*n as f64).ln() * (-u * u).exp()
            }
        };
        Ok(v)
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

fn require_nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be ≥ 0, got {v}")))
    }
}

fn require_horizon(n: u64) -> Result<()> {
    if n >= 2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("horizon n must be ≥ 2, got {n}")))
    }
}

/// The uniform-variation threshold paired with [`TailEnvelope::UniformType`]:
/// `256·D·log₂(n)·var_r_root + 8u·√(var_2 + 1) + 8·φ_n`, with `var_r_root`
/// the (1/r)-th power of the r-variation.
pub fn uniform_type_threshold(
    d_growth: f64,
    n: u64,
    var_r_root: f64,
    var_2: f64,
    u: f64,
) -> Result<f64> {
    require_positive("growth constant D", d_growth)?;
    require_horizon(n)?;
    require_nonnegative("r-variation", var_r_root)?;
    require_nonnegative("2-variation", var_2)?;
    let phi = crate::strategies::phi_n(d_growth, n)?;
    Ok(256.0 * d_growth * (n as f64).log2() * var_r_root + 8.0 * u * (var_2 + 1.0).sqrt()
        + 8.0 * phi)
}

/// Entropy regime selector for the per-function thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerFunctionRegime {
    /// Finite class of the given size.
    Finite { class_size: usize },
    /// Parametric class of the given dimension.
    Parametric { dimension: usize },
    /// Sequential entropy growth `α^{−q}`, `q ∈ (0, 2)`.
    Nonparametric { q: f64 },
}

/// The per-function variation threshold paired with
/// [`TailEnvelope::PerFunction`]. The leading constant `c` is an explicit
/// required parameter: the underlying statement asserts its existence, not
/// its value.
pub fn per_function_threshold(
    regime: PerFunctionRegime,
    c: f64,
    n: u64,
    var2_g: f64,
    u: f64,
) -> Result<f64> {
    require_positive("leading constant c", c)?;
    require_horizon(n)?;
    require_nonnegative("per-function 2-variation", var2_g)?;
    let nf = n as f64;
    let u_term = u * 2.0 * 2f64.sqrt() * (var2_g + 2.0).sqrt();
    let main = match regime {
        PerFunctionRegime::Finite { class_size } => {
            if class_size == 0 {
                return Err(Error::Domain("class size must be ≥ 1".into()));
            }
            c * (class_size as f64).ln().sqrt() * (var2_g + 2.0).sqrt()
        }
        PerFunctionRegime::Parametric { dimension } => {
            c * ((dimension as f64) * nf.ln()).sqrt() * (var2_g + 2.0).sqrt()
        }
        PerFunctionRegime::Nonparametric { q } => {
            if !(q > 0.0 && q < 2.0) {
                return Err(Error::Domain(format!("q must lie in (0, 2), got {q}")));
            }
            c * nf.powf(q / 4.0) * (var2_g + 2.0).powf((2.0 - q) / 4.0)
        }
    };
    Ok(main + u_term)
}

/// An increasing rate function `μ` with `μ(0) = 0`, used by the tail
/// comparison transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuSpec {
    Linear { c: f64 },
    Quadratic { c: f64 },
    /// Piecewise-linear increasing table through the origin; inverted by
    /// monotone bisection.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

impl MuSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MuSpec::Linear { c } | MuSpec::Quadratic { c } => require_positive("rate c", *c),
            MuSpec::Tabulated { xs, ys } => {
                if xs.len() != ys.len() || xs.len() < 2 {
                    return Err(Error::Shape("table needs ≥ 2 aligned knots".into()));
                }
                if xs[0] != 0.0 || ys[0] != 0.0 {
                    return Err(Error::Domain("table must start at μ(0) = 0".into()));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Domain("table must be strictly increasing".into()));
                }
                Ok(())
            }
        }
    }

    pub fn mu(&self, b: f64) -> f64 {
        match self {
            MuSpec::Linear { c } => c * b,
            MuSpec::Quadratic { c } => c * b * b,
            MuSpec::Tabulated { xs, ys } => {
                if b <= 0.0 {
                    return 0.0;
                }
                match xs.iter().position(|x| *x >= b) {
                    Some(0) => 0.0,
                    Some(i) => {
                        let w = (b - xs[i - 1]) / (xs[i] - xs[i - 1]);
                        ys[i - 1] + w * (ys[i] - ys[i - 1])
                    }
                    // Extrapolate with the last slope.
                    None => {
                        let k = xs.len() - 1;
                        let slope = (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1]);
                        ys[k] + (b - xs[k]) * slope
                    }
                }
            }
        }
    }

    /// `μ⁻¹(y)`: closed form for linear/quadratic, bisection to 1e−12 for
    /// tabulated rates.
    pub fn mu_inv(&self, y: f64) -> Result<f64> {
        self.validate()?;
        if y < 0.0 {
            return Err(Error::Domain(format!("μ⁻¹ of negative value {y}")));
        }
        Ok(match self {
            MuSpec::Linear { c } => y / c,
            MuSpec::Quadratic { c } => (y / c).sqrt(),
            MuSpec::Tabulated { .. } => {
                let mut hi = 1.0;
                while self.mu(hi) < y {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return Err(Error::Numeric("μ does not reach the target".into()));
                    }
                }
                let mut lo = 0.0;
                while hi - lo > 1e-12 * (1.0 + hi.abs()) {
                    let mid = 0.5 * (lo + hi);
                    if self.mu(mid) < y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        })
    }
}

/// The indirect tail comparison: if `P(ν ≥ u) ≤ Γ·exp(−μ(u))` and the
/// comparison moments hold, then `P(ξ ≥ u) ≤ Γ·exp(−μ(u − μ⁻¹(1)))`. For
/// the linear and quadratic rates the specialized closed forms
/// `Γ·e^{1−cu}` and `Γ·e^{1−cu²/4}` are returned as written; whenever
/// `u < μ⁻¹(1)` the trivial bound `Γ` is returned (the transform cannot do
/// better than `Γ ≥ 1` there).
pub fn panchenko_transform(gamma: f64, mu: &MuSpec, u: f64) -> Result<f64> {
    if !(gamma >= 1.0) {
        return Err(Error::Domain(format!("Γ must be ≥ 1, got {gamma}")));
    }
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("u must be ≥ 0, got {u}")));
    }
    mu.validate()?;
    let shift = mu.mu_inv(1.0)?;
    if u < shift {
        return Ok(gamma);
    }
    Ok(match mu {
        MuSpec::Linear { c } => gamma * (1.0 - c * u).exp(),
        MuSpec::Quadratic { c } => gamma * (1.0 - c * u * u / 4.0).exp(),
        MuSpec::Tabulated { .. } => gamma * (-mu.mu(u - shift)).exp(),
    })
}

/// Output of the balancing transform: a data-dependent threshold paired
/// with a squared-exponential tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalancedBound {
    pub threshold: f64,
    pub tail: f64,
}

/// The balancing transform: from a family of linear-exponential tails
/// `P(sup X(g) − α^{−a}K − αY(g) > u) ≤ Γ·exp(−cαu)`, optimizing the free
/// scale α over a dyadic grid yields
/// `threshold = 4·K^{1/(1+a)}·(Y+1)^{a/(1+a)} + 4u·√(Y+1)` with tail
/// `log(b)·Γ·exp(−cu²)`, where `b` caps the variance term `Y`.
pub fn balance_bound(
    k: f64,
    a: f64,
    c: f64,
    b: f64,
    gamma: f64,
    u: f64,
    y: f64,
) -> Result<BalancedBound> {
    require_nonnegative("K", k)?;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain(format!("a must lie in [0, 1], got {a}")));
    }
    require_positive("c", c)?;
    require_positive("variance cap b", b)?;
    if !(gamma >= 1.0) {
        return Err(Error::Domain(format!("Γ must be ≥ 1, got {gamma}")));
    }
    if !(0.0 <= y && y <= b) {
        return Err(Error::Domain(format!("variance Y = {y} outside [0, {b}]")));
    }
    let threshold =
        4.0 * k.powf(1.0 / (1.0 + a)) * (y + 1.0).powf(a / (1.0 + a)) + 4.0 * u * (y + 1.0).sqrt();
    let tail = b.ln() * gamma * (-c * u * u).exp();
    Ok(BalancedBound { threshold, tail })
}

/// `offset + ∫₀^∞ min(1, envelope(u)) du` by adaptive quadrature (relative
/// tolerance 1e−8): the amplification step turning a tail bound into an
/// in-expectation bound.
pub fn integrate_envelope(envelope: &TailEnvelope, offset: f64) -> Result<f64> {
    integrate_fn(|u| envelope.evaluate(u), offset)
}

/// Same as [`integrate_envelope`] for an arbitrary nonnegative integrand.
pub fn integrate_fn(f: impl Fn(f64) -> Result<f64>, offset: f64) -> Result<f64> {
    let g = |u: f64| -> Result<f64> { Ok(f(u)?.min(1.0)) };
    // Find an upper cutoff where the envelope has decayed to negligible
    // mass; failure to decay flags a divergent integral.
    let mut hi = 1.0;
    loop {
        let tail_probe = g(hi)?;
        if tail_probe < 1e-14 {
            break;
        }
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Numeric(
                "envelope does not decay; integral diverges".into(),
            ));
        }
    }
    let integral = adaptive_simpson(&g, 0.0, hi, 1e-9, 40)?;
    Ok(offset + integral)
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(
    g: &impl Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_depth: u32,
) -> Result<f64> {
    fn recurse(
        g: &impl Fn(f64) -> Result<f64>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = g(lm)?;
        let frm = g(rm)?;
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            Ok(left + right + delta / 15.0)
        } else {
            let l = recurse(g, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
            let r = recurse(g, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
            Ok(l + r)
        }
    }
    let fa = g(a)?;
    let fb = g(b)?;
    let fm = g(0.5 * (a + b))?;
    let whole = simpson(fa, fm, fb, b - a);
    // Scale the absolute tolerance by a first-pass magnitude estimate so the
    // stated tolerance is effectively relative.
    let tol = rel_tol * whole.abs().max(1e-3);
    recurse(g, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn pinelis_at_zero_is_two() {
        let env = TailEnvelope::Pinelis { smoothness: 1.0 };
        assert!((env.evaluate(0.0).unwrap() - 2.0).abs() < TOL);
    }

    #[test]
    fn banach_at_four_is_sqrt2_over_e() {
        let env = TailEnvelope::BanachSelfNormalized;
        let expect = 2f64.sqrt() * (-1.0f64).exp();
        assert!((env.evaluate(4.0).unwrap() - expect).abs() < TOL);
    }

    #[test]
    fn exp_tail_alpha_one_u_one() {
        let env = TailEnvelope::ExpTailSup { alpha: 1.0 };
        assert!((env.evaluate(1.0).unwrap() - (-2.0f64).exp()).abs() < TOL);
    }

    #[test]
    fn invalid_parameters_are_domain_errors() {
        assert!(TailEnvelope::Pinelis { smoothness: 0.0 }
            .evaluate(1.0)
            .is_err());
        assert!(TailEnvelope::AzumaSup { sq_sum: -1.0 }.evaluate(1.0).is_err());
        assert!(TailEnvelope::UniformType { n: 1 }.evaluate(1.0).is_err());
    }

    #[test]
    fn freedman_matches_closed_form() {
        let env = TailEnvelope::FreedmanSup {
            sigma_sq: 2.0,
            increment_bound: 3.0,
        };
        let u = 1.5_f64;
        let expect = (-u * u / (4.0 + 2.0 * u * 3.0 / 3.0)).exp();
        assert!((env.evaluate(u).unwrap() - expect).abs() < TOL);
    }

    #[test]
    fn envelopes_are_nonincreasing_and_nonnegative() {
        // 10² random parameter draws per kind, 10³-point grid.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        for _ in 0..100 {
            let kinds = vec![
                TailEnvelope::Pinelis {
                    smoothness: rng.gen_range(0.1..5.0),
                },
                TailEnvelope::BanachSelfNormalized,
                TailEnvelope::RatioAb,
                TailEnvelope::AzumaSup {
                    sq_sum: rng.gen_range(0.1..50.0),
                },
                TailEnvelope::FreedmanSup {
                    sigma_sq: rng.gen_range(0.0..10.0),
                    increment_bound: rng.gen_range(0.0..10.0),
                },
                TailEnvelope::ExpTailSup {
                    alpha: rng.gen_range(0.01..4.0),
                },
                TailEnvelope::OffsetDeviation {
                    alpha: rng.gen_range(0.01..4.0),
                },
                TailEnvelope::Gaussian {
                    variance: rng.gen_range(0.1..100.0),
                },
                TailEnvelope::UniformType {
                    n: rng.gen_range(2..1000),
                },
                TailEnvelope::PerFunction {
                    n: rng.gen_range(2..1000),
                },
            ];
            for env in kinds {
                let mut prev = f64::INFINITY;
                for i in 0..1000 {
                    let u = i as f64 * 0.02;
                    let v = env.evaluate(u).unwrap();
                    assert!(v >= 0.0, "{env:?} negative at u={u}");
                    assert!(v <= prev + 1e-12, "{env:?} increased at u={u}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn panchenko_linear_specialization() {
        let mu = MuSpec::Linear { c: 1.0 };
        assert!((panchenko_transform(1.0, &mu, 1.0).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn panchenko_quadratic_clips_below_shift() {
        let mu = MuSpec::Quadratic { c: 4.0 };
        // μ⁻¹(1) = 1/2 > 0 = u, so the trivial Γ bound applies.
        assert!((panchenko_transform(1.0, &mu, 0.0).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn panchenko_quadratic_specialization() {
        let mu = MuSpec::Quadratic { c: 1.0 };
        let expect = 2.0 * (1.0f64 - 4.0).exp();
        assert!((panchenko_transform(2.0, &mu, 4.0).unwrap() - expect).abs() < TOL);
    }

    #[test]
    fn panchenko_tabulated_matches_linear() {
        // A fine table of μ(b) = 2b reproduces the linear closed form.
        let xs: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let tab = MuSpec::Tabulated { xs, ys };
        let lin = MuSpec::Linear { c: 2.0 };
        for u in [0.0, 0.3, 0.5, 1.0, 2.5, 7.0] {
            let a = panchenko_transform(1.5, &tab, u).unwrap();
            let b = panchenko_transform(1.5, &lin, u).unwrap();
            assert!((a - b).abs() < 1e-9, "u={u}: {a} vs {b}");
        }
    }

    #[test]
    fn panchenko_only_weakens_at_gamma_one() {
        // The transformed envelope dominates the premise envelope pointwise.
        for mu in [
            MuSpec::Linear { c: 0.7 },
            MuSpec::Quadratic { c: 2.0 },
            MuSpec::Linear { c: 3.0 },
        ] {
            for i in 0..400 {
                let u = i as f64 * 0.05;
                let orig = (-mu.mu(u)).exp();
                let transformed = panchenko_transform(1.0, &mu, u).unwrap();
                assert!(
                    transformed >= orig - 1e-12,
                    "{mu:?} at u={u}: {transformed} < {orig}"
                );
            }
        }
    }

    #[test]
    fn balance_a_zero_collapses_exponents() {
        let out = balance_bound(2.0, 0.0, 1.0, 10.0, 1.0, 1.5, 3.0).unwrap();
        let expect = 4.0 * 2.0 + 4.0 * 1.5 * 4.0f64.sqrt();
        assert!((out.threshold - expect).abs() < TOL);
    }

    #[test]
    fn balance_k_zero_unit_u() {
        let out = balance_bound(0.0, 0.5, 1.0, 5.0, 1.0, 1.0, 0.0).unwrap();
        assert!((out.threshold - 4.0).abs() < TOL);
    }

    #[test]
    fn balance_k_one_a_one_y_three() {
        let out = balance_bound(1.0, 1.0, 1.0, 5.0, 1.0, 0.0, 3.0).unwrap();
        assert!((out.threshold - 8.0).abs() < TOL);
    }

    #[test]
    fn balance_rejects_y_above_cap() {
        assert!(balance_bound(1.0, 0.5, 1.0, 2.0, 1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn balance_threshold_monotone_in_k_u_y() {
        let base = balance_bound(1.0, 0.5, 1.0, 100.0, 1.0, 1.0, 2.0)
            .unwrap()
            .threshold;
        for (k, u, y) in [(2.0, 1.0, 2.0), (1.0, 2.0, 2.0), (1.0, 1.0, 5.0)] {
            let t = balance_bound(k, 0.5, 1.0, 100.0, 1.0, u, y).unwrap().threshold;
            assert!(t >= base);
        }
    }

    #[test]
    fn integrate_unit_exponential() {
        // exp(−u) expressed through the built-in linear-exponential kind.
        let env = TailEnvelope::ExpTailSup { alpha: 0.5 };
        let v = integrate_envelope(&env, 0.0).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn integrate_zero_envelope_keeps_offset() {
        let v = integrate_fn(|_| Ok(0.0), 5.0).unwrap();
        assert!((v - 5.0).abs() < TOL);
    }

    #[test]
    fn integrate_half_gaussian_reproduces_expectation_constant() {
        // offset √n plus the half-Gaussian mass √(π/2)·√n.
        for n in [1.0, 4.0, 16.0] {
            let env = TailEnvelope::Gaussian { variance: n };
            let v = integrate_envelope(&env, n.sqrt()).unwrap();
            let expect = n.sqrt() * (1.0 + (std::f64::consts::PI / 2.0).sqrt());
            assert!((v - expect).abs() < 1e-6, "n={n}: {v} vs {expect}");
        }
    }

    #[test]
    fn integrate_detects_divergence() {
        assert!(matches!(
            integrate_fn(|_| Ok(0.5), 0.0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn integral_is_monotone_in_the_envelope() {
        let tight = TailEnvelope::Gaussian { variance: 1.0 };
        let loose = TailEnvelope::Gaussian { variance: 4.0 };
        let a = integrate_envelope(&tight, 0.0).unwrap();
        let b = integrate_envelope(&loose, 0.0).unwrap();
        assert!(a <= b);
    }

    #[test]
    fn envelope_json_round_trip() {
        let env = TailEnvelope::FreedmanSup {
            sigma_sq: 1.5,
            increment_bound: 2.0,
        };
        let json = serde_json::to_string(&env).unwrap();
        assert!(json.contains("freedman_sup"));
        let back: TailEnvelope = serde_json::from_str(&json).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn per_function_threshold_regimes() {
        // Finite with |G| = 1 has zero main term.
        let v = per_function_threshold(
            PerFunctionRegime::Finite { class_size: 1 },
            1.0,
            16,
            3.0,
            0.0,
        )
        .unwrap();
        assert!(v.abs() < TOL);
        // Nonparametric rejects q outside (0, 2).
        assert!(per_function_threshold(
            PerFunctionRegime::Nonparametric { q: 2.5 },
            1.0,
            16,
            3.0,
            0.0
        )
        .is_err());
    }
}
