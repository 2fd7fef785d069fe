//! Fixed-order reductions.
//!
//! Every global integral goes through [`pairwise_sum`], so the reduction tree
//! depends only on the input length and results are bit-stable across runs.

const BLOCK: usize = 64;

/// Pairwise (cascade) summation with a fixed split point.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..len` without materializing the terms
/// in one allocation per level.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(len: usize, f: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= BLOCK {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            return s;
        }
        let mid = lo + (hi - lo) / 2;
        rec(lo, mid, f) + rec(mid, hi, f)
    }
    rec(0, len, &f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 45.0);
    }

    #[test]
    fn closure_form_agrees_bitwise() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 * 1e-3 + 0.1).collect();
        assert_eq!(pairwise_sum(&xs).to_bits(), pairwise_sum_by(xs.len(), |i| xs[i]).to_bits());
    }

    #[test]
    fn pairwise_is_more_accurate_than_naive() {
        let n = 1 << 20;
        let xs = vec![0.1f64; n];
        let exact = 0.1 * n as f64;
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - exact).abs() <= (naive - exact).abs());
    }
}
