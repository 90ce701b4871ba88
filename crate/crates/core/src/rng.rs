//! Platform-stable pseudo-random numbers for right-hand sides and start vectors.

const MULTIPLIER: u64 = 6364136223846793005;
const INCREMENT: u64 = 1442695040888963407;

/// 64-bit linear congruential generator (Knuth's MMIX constants).
///
/// Only integer arithmetic is involved until the final scaling, so a given
/// seed yields bit-identical streams everywhere.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        let mut g = Self {
            state: seed ^ 0x9e37_79b9_7f4a_7c15,
        };
        g.next_u64();
        g
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(MULTIPLIER).wrapping_add(INCREMENT);
        self.state
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }
}

/// Vector of `m` values uniform in `[-1, 1]`, determined by `seed`.
pub fn random_rhs(m: usize, seed: u64) -> Vec<f64> {
    let mut g = Lcg64::new(seed);
    (0..m).map(|_| g.next_symmetric()).collect()
}
