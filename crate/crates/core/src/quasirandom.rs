//! Deterministic low-discrepancy sequences for multistart searches and
//! randomized self-checks.

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

/// The `index`-th point of the Halton sequence in `[0,1)^dim`, `dim <= 16`.
pub fn halton(index: u64, dim: usize) -> alloc::vec::Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most 16 dimensions");
    PRIMES[..dim].iter().map(|&p| radical_inverse(index + 1, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        assert_eq!(halton(0, 2), alloc::vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(1, 1), alloc::vec![0.25]);
    }
}
