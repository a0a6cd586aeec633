//! Small deterministic PRNG (SplitMix64) so that seeded runs are
//! bit-reproducible independent of external crate versions.

/// SplitMix64 generator. Passes BigCrush for this use (weight init, shuffles,
/// test-case generation); not for cryptography.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). Unbiased enough for shuffling.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Stable seed derivation for client/round training streams:
/// `seed = mix(master, client_index, round_index)`.
pub fn derive_seed(master: u64, client: usize, round: usize) -> u64 {
    let mut s = SplitMix64::new(master ^ 0xA076_1D64_78BD_642F);
    let a = s.next_u64();
    let mut t = SplitMix64::new(a ^ (client as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB));
    let b = t.next_u64();
    let mut u = SplitMix64::new(b ^ (round as u64).wrapping_mul(0x8EBC_6AF0_9C88_C6E3));
    u.next_u64()
}
