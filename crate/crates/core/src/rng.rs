//! Counter-based splittable random number generation.
//!
//! Every draw is a pure function of `(seed, stream, counter)`, so sampling is
//! reproducible bit-for-bit regardless of chunking or thread count, and
//! extending a sample (larger `M`) never perturbs earlier draws. Streams keep
//! independent purposes (e.g. mixture centers vs. data points) decoupled from
//! one master seed.

/// SplitMix64 state transition + output mix (Steele, Lea, Flood 2014).
#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless mix of a seed with stream/counter words.
#[inline]
fn mix(words: &[u64]) -> u64 {
    let mut state = 0x243f_6a88_85a3_08d3; // pi fraction, arbitrary nonzero
    let mut out = 0;
    for &w in words {
        state ^= w.wrapping_mul(0xff51_afd7_ed55_8ccd);
        out = splitmix64(&mut state);
    }
    out
}

/// A deterministic generator identified by `(seed, stream)` and an index.
///
/// `at(i)` yields a sequential generator for the i-th item of the stream;
/// items can therefore be generated independently and in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    seed: u64,
    stream: u64,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Stream { seed, stream }
    }

    /// Sequential generator for item `index` of this stream.
    pub fn at(&self, index: u64) -> Gen {
        Gen {
            state: mix(&[self.seed, self.stream, index]),
        }
    }

    /// Sequential generator over the whole stream (index 0).
    pub fn gen(&self) -> Gen {
        self.at(0)
    }
}

/// Sequential SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct Gen {
    state: u64,
}

impl Gen {
    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform draw in [0, 1) with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1]; used where log(u) must stay finite.
    pub fn next_f64_open(&mut self) -> f64 {
        1.0 - self.next_f64()
    }

    /// Uniform draw in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in [0, n).
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let u = self.next_f64();
        ((u * n as f64) as usize).min(n - 1)
    }

    /// Standard normal pair via Box-Muller.
    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        (radius * angle.cos(), radius * angle.sin())
    }

    /// Single standard normal draw (discards the Box-Muller partner).
    pub fn next_normal(&mut self) -> f64 {
        self.next_normal_pair().0
    }

    /// Fill `out` with i.i.d. standard normals.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        let mut i = 0;
        while i + 1 < out.len() {
            let (a, b) = self.next_normal_pair();
            out[i] = a;
            out[i + 1] = b;
            i += 2;
        }
        if i < out.len() {
            out[i] = self.next_normal();
        }
    }

    /// Uniform point on the unit sphere in `d` dimensions.
    pub fn next_unit_vector(&mut self, d: usize) -> Vec<f64> {
        loop {
            let mut v = vec![0.0; d];
            self.fill_normal(&mut v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                v.iter_mut().for_each(|x| *x /= norm);
                return v;
            }
        }
    }
}

/// Well-known stream tags used across the crate.
pub mod stream {
    pub const MIXTURE_CENTERS: u64 = 0x01;
    pub const DATA_POINTS: u64 = 0x02;
    pub const GP_DRAW: u64 = 0x03;
    pub const NET_W1: u64 = 0x04;
    pub const NET_B1: u64 = 0x05;
    pub const NET_W2: u64 = 0x06;
    pub const SPHERE_MC: u64 = 0x07;
    pub const MC_ORACLE: u64 = 0x08;
}
