use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Deterministic random stream keyed by (seed, stream id).
///
/// Backed by a counter-mode ChaCha generator: distinct stream ids give
/// independent sequences, and a stream's output never depends on how other
/// streams were consumed or on which thread drew from it.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream derived from this one's seed; `child` selects the substream.
    pub fn substream(&self, child: u64) -> Self {
        Self::new(self.seed, splitmix64(splitmix64(self.stream_id) ^ child))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples per parallel chunk in Monte-Carlo drivers.
pub const MC_CHUNK: usize = 4096;

/// Splits `count` draws into fixed chunks, runs `work(stream, draws)` on each
/// chunk with its own substream, and returns chunk results in chunk order.
///
/// Chunk boundaries and substreams depend only on `count`, so the result is
/// the same for every thread count.
pub fn chunked_parallel<T: Send>(
    rng: &RngStream,
    count: usize,
    work: impl Fn(&mut RngStream, usize) -> T + Sync,
) -> Vec<T> {
    let chunks = count.div_ceil(MC_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let draws = MC_CHUNK.min(count - c * MC_CHUNK);
            let mut stream = rng.substream(c as u64);
            work(&mut stream, draws)
        })
        .collect()
}

/// Running mean and variance with order-fixed merging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Merges a sequence of accumulators left to right.
    pub fn merge_all<'a>(parts: impl IntoIterator<Item = &'a Self>) -> Self {
        let mut acc = Self::default();
        for p in parts {
            acc.merge(p);
        }
        acc
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = RngStream::new(7, 3);
            (0..5).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngStream::new(7, 3);
            (0..5).map(|_| r.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut r = RngStream::new(7, 4);
            (0..5).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn interleaving_does_not_matter() {
        let mut x = RngStream::new(1, 0);
        let mut y = RngStream::new(1, 1);
        let mut inter = Vec::new();
        for _ in 0..4 {
            inter.push(x.normal());
            let _ = y.normal();
        }
        let mut fresh = RngStream::new(1, 0);
        let solo: Vec<f64> = (0..4).map(|_| fresh.normal()).collect();
        assert_eq!(inter, solo);
    }

    #[test]
    fn chunked_is_thread_independent() {
        let rng = RngStream::new(42, 0);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let parts = chunked_parallel(&rng, 10_000, |s, n| {
                    let mut acc = MeanAccumulator::default();
                    for _ in 0..n {
                        acc.push(s.normal());
                    }
                    acc
                });
                MeanAccumulator::merge_all(&parts)
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.count, 10_000);
        assert!(a.mean.abs() < 5.0 * a.std_error());
    }

    #[test]
    fn accumulator_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut whole = MeanAccumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = MeanAccumulator::default();
        let mut b = MeanAccumulator::default();
        xs[..37].iter().for_each(|&x| a.push(x));
        xs[37..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - whole.mean).abs() < 1e-15);
        assert!((a.variance() - whole.variance()).abs() < 1e-14);
    }
}
