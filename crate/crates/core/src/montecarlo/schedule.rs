use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How replicates are executed. Output never depends on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    Sequential,
    /// Rayon work-stealing over replicates. Without the `parallel` feature
    /// this runs sequentially.
    #[default]
    Parallel,
}

impl Schedule {
    pub fn map<T, F>(self, reps: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Schedule::Sequential => (0..reps).map(f).collect(),
            Schedule::Parallel => parallel_map(reps, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..reps).map(f).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable identifier for one family of random streams (FNV-1a of the tag,
/// mixed with an index such as a grid position).
pub fn lane(tag: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(h ^ splitmix64(index))
}

/// RNG for one replicate: a pure function of `(seed, lane, replicate)`.
pub fn replicate_rng(seed: u64, lane: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed) ^ lane);
    rng.set_stream(replicate as u64);
    rng
}
