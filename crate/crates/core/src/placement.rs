//! Decentralized placement: every user independently caches a random subset
//! of each file, sized by its capacity.

use num::{BigInt, ToPrimitive};
use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitArray;
use crate::config::SystemConfig;
use crate::rational::{ratio, Rational};
use crate::subset::MAX_SUBSET_USERS;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlacementError {
    #[error("bit-level simulation supports at most {max} users, got {got}")]
    TooManyUsers { got: usize, max: usize },
    #[error("file size {0} exceeds the 32-bit bit index range")]
    FileTooLarge(usize),
}

/// Independent random streams keyed by purpose, so a placement never shares
/// randomness with the library or with delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StreamDomain {
    Library = 1,
    Placement = 2,
    Combinations = 3,
}

/// Counter-based split of one root seed: same `(seed, domain, a, b)` always
/// yields the same stream, regardless of the order streams are requested in.
pub(crate) fn stream_rng(seed: u64, domain: StreamDomain, a: usize, b: usize) -> ChaCha8Rng {
    debug_assert!(a < (1 << 30) && b < (1 << 30));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 60) | ((a as u64) << 30) | b as u64);
    rng
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PlacementMode {
    /// Exactly `round(M_k F / N)` bits per file.
    #[default]
    ExactSize,
    /// Each bit cached independently with probability `M_k / N`.
    Bernoulli,
}

/// Number of bits of each file user capacity `m` pays for: `M F / N` rounded
/// to nearest, ties toward floor.
pub fn cached_bit_count(capacity: &Rational, num_files: usize, file_size: usize) -> usize {
    let x = capacity * Rational::from_integer(BigInt::from(file_size)) / Rational::from_integer(BigInt::from(num_files));
    let floor = x.floor();
    let frac = &x - &floor;
    let mut n = floor.to_integer();
    if frac > ratio(1, 2) {
        n += 1;
    }
    n.to_usize().expect("cached bit count fits in usize")
}

/// Which bits of which files each user holds (`Z_k`, as index sets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachePlacement {
    num_users: usize,
    num_files: usize,
    file_size: usize,
    seed: u64,
    mode: PlacementMode,
    /// `cached[user * N + file]`, sorted ascending.
    cached: Vec<Vec<u32>>,
}

impl CachePlacement {
    pub fn random(config: &SystemConfig, seed: u64, mode: PlacementMode) -> Result<Self, PlacementError> {
        let (n, k, f) = (config.num_files(), config.num_users(), config.file_size_bits());
        if k > MAX_SUBSET_USERS {
            return Err(PlacementError::TooManyUsers { got: k, max: MAX_SUBSET_USERS });
        }
        if f > u32::MAX as usize {
            return Err(PlacementError::FileTooLarge(f));
        }
        let mut cached = Vec::with_capacity(n * k);
        for user in 0..k {
            let count = cached_bit_count(config.capacity(user), n, f);
            let p = crate::rational::to_f64(&config.cache_fraction(user));
            for file in 0..n {
                let mut rng = stream_rng(seed, StreamDomain::Placement, user, file);
                let mut bits: Vec<u32> = match mode {
                    PlacementMode::ExactSize => {
                        index::sample(&mut rng, f, count).into_iter().map(|b| b as u32).collect()
                    }
                    PlacementMode::Bernoulli => (0..f as u32).filter(|_| rng.gen_bool(p)).collect(),
                };
                bits.sort_unstable();
                cached.push(bits);
            }
        }
        Ok(Self { num_users: k, num_files: n, file_size: f, seed, mode, cached })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_files(&self) -> usize {
        self.num_files
    }

    pub fn file_size(&self) -> usize {
        self.file_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> PlacementMode {
        self.mode
    }

    /// Sorted bit indices of `file` held by `user`.
    pub fn cached_bits(&self, user: usize, file: usize) -> &[u32] {
        &self.cached[user * self.num_files + file]
    }

    pub fn holds(&self, user: usize, file: usize, bit: u32) -> bool {
        self.cached_bits(user, file).binary_search(&bit).is_ok()
    }

    /// Relabels users: user `j` of the result holds what user `order[j]` holds here.
    #[must_use]
    pub fn permuted_users(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.num_users);
        let cached = order
            .iter()
            .flat_map(|&u| (0..self.num_files).map(move |i| (u, i)))
            .map(|(u, i)| self.cached_bits(u, i).to_vec())
            .collect();
        Self { cached, ..self.clone() }
    }
}

/// The server's library: `N` independent uniformly random `F`-bit files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Library {
    files: Vec<BitArray>,
}

impl Library {
    pub fn random(num_files: usize, file_size: usize, seed: u64) -> Self {
        let files = (0..num_files)
            .map(|i| {
                let mut rng = stream_rng(seed, StreamDomain::Library, i, 0);
                let words = (0..file_size.div_ceil(64)).map(|_| rng.next_u64()).collect();
                BitArray::from_words(words, file_size)
            })
            .collect();
        Self { files }
    }

    pub fn from_files(files: Vec<BitArray>) -> Self {
        assert!(files.windows(2).all(|w| w[0].len() == w[1].len()), "files must share one size");
        Self { files }
    }

    pub fn file(&self, i: usize) -> &BitArray {
        &self.files[i]
    }

    pub fn num_files(&self) -> usize {
        self.files.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn example_one(f: usize) -> SystemConfig {
        SystemConfig::new(2, vec![ratio(1, 8), ratio(1, 4), ratio(1, 2), int(1)], f).unwrap()
    }

    #[test]
    fn rounding_ties_go_down() {
        assert_eq!(cached_bit_count(&ratio(1, 2), 1, 3), 1); // 1.5 -> 1
        assert_eq!(cached_bit_count(&ratio(1, 2), 1, 5), 2); // 2.5 -> 2
        assert_eq!(cached_bit_count(&ratio(3, 5), 1, 4), 2); // 2.4 -> 2
        assert_eq!(cached_bit_count(&ratio(7, 10), 1, 5), 3); // 3.5 -> 3
        assert_eq!(cached_bit_count(&ratio(3, 4), 1, 5), 4); // 3.75 -> 4
    }

    #[test]
    fn exact_size_meets_capacity() {
        let cfg = example_one(1000);
        let p = CachePlacement::random(&cfg, 3, PlacementMode::ExactSize).unwrap();
        for k in 0..4 {
            let expect = cached_bit_count(cfg.capacity(k), 2, 1000);
            for i in 0..2 {
                let bits = p.cached_bits(k, i);
                assert_eq!(bits.len(), expect);
                assert!(bits.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn placement_is_deterministic_per_seed() {
        let cfg = example_one(500);
        let a = CachePlacement::random(&cfg, 11, PlacementMode::ExactSize).unwrap();
        let b = CachePlacement::random(&cfg, 11, PlacementMode::ExactSize).unwrap();
        let c = CachePlacement::random(&cfg, 12, PlacementMode::ExactSize).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn streams_are_order_independent() {
        // user 3's placement does not depend on which other users exist
        let cfg = example_one(400);
        let full = CachePlacement::random(&cfg, 5, PlacementMode::ExactSize).unwrap();
        let mut rng = stream_rng(5, StreamDomain::Placement, 3, 1);
        let mut again: Vec<u32> = index::sample(&mut rng, 400, 200).into_iter().map(|b| b as u32).collect();
        again.sort_unstable();
        assert_eq!(full.cached_bits(3, 1), again.as_slice());
    }

    #[test]
    fn bernoulli_mode_is_near_capacity() {
        let cfg = example_one(20_000);
        let p = CachePlacement::random(&cfg, 1, PlacementMode::Bernoulli).unwrap();
        let got = p.cached_bits(3, 0).len() as f64;
        assert!((got - 10_000.0).abs() < 400.0, "got {got}");
    }

    #[test]
    fn too_many_users_rejected() {
        let cfg = SystemConfig::new(2, vec![int(0); 31], 8).unwrap();
        assert!(matches!(
            CachePlacement::random(&cfg, 0, PlacementMode::ExactSize),
            Err(PlacementError::TooManyUsers { got: 31, .. })
        ));
    }

    #[test]
    fn library_is_seeded() {
        assert_eq!(Library::random(3, 100, 4), Library::random(3, 100, 4));
        assert_ne!(Library::random(3, 100, 4).file(0), Library::random(3, 100, 4).file(1));
    }
}
