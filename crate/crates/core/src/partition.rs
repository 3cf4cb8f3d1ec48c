//! Exclusive-subfile partition `W_{i,V}` induced by a placement.

use std::collections::BTreeMap;

use num::One;

use crate::config::SystemConfig;
use crate::placement::CachePlacement;
use crate::rational::Rational;
use crate::subset::{SubfileIndex, UserSet};

/// For each file, the nonempty subfiles keyed by the exact set of users
/// holding them. Bit lists are ascending; across one file they are disjoint
/// and cover `[0, F)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubfilePartition {
    file_size: usize,
    files: Vec<BTreeMap<UserSet, Vec<u32>>>,
}

impl SubfilePartition {
    pub fn from_placement(placement: &CachePlacement) -> Self {
        let f = placement.file_size();
        let files = (0..placement.num_files())
            .map(|file| {
                let mut masks = vec![0u32; f];
                for user in 0..placement.num_users() {
                    for &b in placement.cached_bits(user, file) {
                        masks[b as usize] |= 1 << user;
                    }
                }
                let mut map: BTreeMap<UserSet, Vec<u32>> = BTreeMap::new();
                for (b, &m) in masks.iter().enumerate() {
                    map.entry(UserSet::from_bits(m)).or_default().push(b as u32);
                }
                map
            })
            .collect();
        Self { file_size: f, files }
    }

    pub fn file_size(&self) -> usize {
        self.file_size
    }

    pub fn num_files(&self) -> usize {
        self.files.len()
    }

    /// Bit positions of `W_{file,users}`; empty when no bit matches.
    pub fn bits(&self, index: SubfileIndex) -> &[u32] {
        self.files[index.file].get(&index.users).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self, index: SubfileIndex) -> usize {
        self.bits(index).len()
    }

    /// Nonempty subfiles of `file`, ascending by subset bitmask.
    pub fn nonempty(&self, file: usize) -> impl Iterator<Item = (UserSet, &[u32])> {
        self.files[file].iter().map(|(s, b)| (*s, b.as_slice()))
    }

    pub fn fraction(&self, index: SubfileIndex) -> f64 {
        self.len(index) as f64 / self.file_size as f64
    }
}

/// Asymptotic share of a file held by exactly `users`:
/// `prod_{k in V} M_k/N * prod_{k not in V} (1 - M_k/N)`.
pub fn expected_fraction(config: &SystemConfig, users: UserSet) -> Rational {
    (0..config.num_users()).fold(Rational::one(), |acc, k| {
        let p = config.cache_fraction(k);
        if users.contains(k) {
            acc * p
        } else {
            acc * (Rational::one() - p)
        }
    })
}
