//! Small numeric helpers shared across modules.

/// Pairwise (cascade) summation. Reductions over replicates and paths use
/// this so that totals do not depend on chunking or worker count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean via pairwise summation; 0 for an empty slice.
pub fn pairwise_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample standard error of the mean (pairwise sums, n-1 denominator).
/// Returns 0 for fewer than two samples.
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = pairwise_mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (var / n as f64).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_p(a: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    }
    a.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}
