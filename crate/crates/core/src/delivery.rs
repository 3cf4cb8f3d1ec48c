//! Delivery-phase encoders.
//!
//! The coded procedure sends, per demand grouping:
//!
//! * `P1`: `W_{i,∅}` for every requested file `i`;
//! * `P2_1`: chains `W_{i,{k}} ⊕̄ W_{i,{k+1}}` over consecutive members of `G_i`;
//! * `P2_2`: for every pair of groups `i < j`, the chain of `G_j` over file
//!   `i`, the chain of `G_i` over file `j`, and one pairing of the two
//!   leaders' subfiles `W_{i,{lead_j}} ⊕̄ W_{j,{lead_i}}`;
//! * `P3`: `⊕̄_{v ∈ V} W_{d_v, V∖{v}}` for every `|V| ≥ 3`.
//!
//! Segments whose arguments are all empty are not sent. Groups are visited in
//! ascending file order and `P3` subsets in ascending bitmask order, so a
//! transcript is a deterministic function of its inputs.
//!
//! The random procedure sends, per requested file, enough seeded random GF(2)
//! combinations of the whole file for every member of the group to solve for
//! its missing bits.

use std::collections::BTreeSet;

use num::{BigInt, One, ToPrimitive};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitArray;
use crate::demand::DemandProfile;
use crate::gf2::Gf2Matrix;
use crate::network::CachedNetwork;
use crate::placement::{stream_rng, StreamDomain};
use crate::rational::Rational;
use crate::subset::{SubfileIndex, UserSet};

pub const DEFAULT_SLACK_BITS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeliveryError {
    #[error("padded XOR needs at least one argument")]
    EmptyXor,
    #[error("uniform delivery requires equal cache capacities")]
    NonUniformCapacities,
    #[error("demand profile covers {profile} users but the network has {network}")]
    ProfileMismatch { profile: usize, network: usize },
    #[error("insufficient combinations for user {user}: rank {rank} < {needed} missing bits")]
    InsufficientCombinations { user: usize, rank: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PartTag {
    P1,
    #[serde(rename = "P2_1")]
    P2Intra,
    #[serde(rename = "P2_2")]
    P2Cross,
    P3,
    RD,
}

impl PartTag {
    pub const ALL: [PartTag; 5] = [PartTag::P1, PartTag::P2Intra, PartTag::P2Cross, PartTag::P3, PartTag::RD];

    pub fn is_part_two(self) -> bool {
        matches!(self, PartTag::P2Intra | PartTag::P2Cross)
    }
}

/// Seed and size of one block of random combinations of `file`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CombinationDescriptor {
    pub file: usize,
    pub rows: usize,
    pub seed: u64,
}

impl CombinationDescriptor {
    /// Regenerates the coefficient rows, each `file_size` bits wide.
    pub fn rows(&self, file_size: usize) -> Vec<BitArray> {
        let mut rng = stream_rng(self.seed, StreamDomain::Combinations, self.file, 0);
        (0..self.rows)
            .map(|_| {
                let words = (0..file_size.div_ceil(64)).map(|_| rng.next_u64()).collect();
                BitArray::from_words(words, file_size)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Provenance {
    /// The zero-padded XOR of these subfiles, in order.
    Subfiles(Vec<SubfileIndex>),
    Combination(CombinationDescriptor),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliverySegment {
    pub part: PartTag,
    pub payload: BitArray,
    pub provenance: Provenance,
}

impl DeliverySegment {
    pub fn bit_length(&self) -> usize {
        self.payload.len()
    }
}

/// Everything sent over the shared link for one demand vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryTranscript {
    pub segments: Vec<DeliverySegment>,
    pub file_size: usize,
    /// Bits sent beyond the counting minimum (random delivery only).
    pub slack_bits: usize,
}

impl DeliveryTranscript {
    pub fn total_bits(&self) -> usize {
        self.segments.iter().map(DeliverySegment::bit_length).sum()
    }

    pub fn part_bits(&self, part: PartTag) -> usize {
        self.segments.iter().filter(|s| s.part == part).map(DeliverySegment::bit_length).sum()
    }

    /// `R = total bits / F`, exactly.
    pub fn normalized_rate(&self) -> Rational {
        Rational::new(BigInt::from(self.total_bits()), BigInt::from(self.file_size))
    }

    pub fn rate_f64(&self) -> f64 {
        self.total_bits() as f64 / self.file_size as f64
    }

    /// Copy with segment `index` removed.
    #[must_use]
    pub fn without_segment(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.segments.remove(index);
        out
    }
}

/// Bitwise XOR after zero-padding every argument to the longest one.
pub fn padded_xor(args: &[&BitArray]) -> Result<BitArray, DeliveryError> {
    let (first, rest) = args.split_first().ok_or(DeliveryError::EmptyXor)?;
    let mut out = (*first).clone();
    for a in rest {
        out.xor_padded_assign(a);
    }
    Ok(out)
}

fn check_profile(network: &CachedNetwork, profile: &DemandProfile) -> Result<(), DeliveryError> {
    if profile.num_users() != network.config().num_users() {
        return Err(DeliveryError::ProfileMismatch {
            profile: profile.num_users(),
            network: network.config().num_users(),
        });
    }
    Ok(())
}

struct SegmentSink<'a> {
    network: &'a CachedNetwork,
    segments: Vec<DeliverySegment>,
}

impl SegmentSink<'_> {
    fn push(&mut self, part: PartTag, args: Vec<SubfileIndex>) {
        let partition = self.network.partition();
        if args.iter().all(|&a| partition.len(a) == 0) {
            return;
        }
        let contents: Vec<BitArray> = args.iter().map(|&a| self.network.subfile(a)).collect();
        let refs: Vec<&BitArray> = contents.iter().collect();
        let payload = padded_xor(&refs).expect("segments have arguments");
        self.segments.push(DeliverySegment { part, payload, provenance: Provenance::Subfiles(args) });
    }

    /// `W_{file,{a}} ⊕̄ W_{file,{b}}` for consecutive `a, b` in `members`.
    fn chain(&mut self, part: PartTag, file: usize, members: &[usize]) {
        for pair in members.windows(2) {
            self.push(
                part,
                vec![
                    SubfileIndex::new(file, UserSet::singleton(pair[0])),
                    SubfileIndex::new(file, UserSet::singleton(pair[1])),
                ],
            );
        }
    }
}

/// Coded delivery with zero-padded XORs (distinct cache capacities).
pub fn coded_delivery_hetero(
    network: &CachedNetwork,
    profile: &DemandProfile,
) -> Result<DeliveryTranscript, DeliveryError> {
    check_profile(network, profile)?;
    let mut sink = SegmentSink { network, segments: Vec::new() };
    let groups: Vec<(usize, &[usize])> = profile.nonempty_groups().collect();

    for &(file, _) in &groups {
        sink.push(PartTag::P1, vec![SubfileIndex::new(file, UserSet::EMPTY)]);
    }

    for &(file, members) in &groups {
        sink.chain(PartTag::P2Intra, file, members);
    }

    for (a, &(i, members_i)) in groups.iter().enumerate() {
        for &(j, members_j) in &groups[a + 1..] {
            sink.chain(PartTag::P2Cross, i, members_j);
            sink.chain(PartTag::P2Cross, j, members_i);
            sink.push(
                PartTag::P2Cross,
                vec![
                    SubfileIndex::new(i, UserSet::singleton(members_j[0])),
                    SubfileIndex::new(j, UserSet::singleton(members_i[0])),
                ],
            );
        }
    }

    for v in part_three_subsets(network, profile) {
        let args = v.users().map(|u| SubfileIndex::new(profile.demand(u), v.without(u))).collect();
        sink.push(PartTag::P3, args);
    }

    Ok(DeliveryTranscript { segments: sink.segments, file_size: network.file_size(), slack_bits: 0 })
}

/// Coded delivery for equal capacities.
///
/// Asymptotically every argument of a coded segment has the same length, so
/// plain XOR suffices; at finite `F` the exact-size placement still yields
/// slightly unequal subfiles, and the zero-padding convention is kept so the
/// transcript is identical to [`coded_delivery_hetero`].
pub fn coded_delivery_uniform(
    network: &CachedNetwork,
    profile: &DemandProfile,
) -> Result<DeliveryTranscript, DeliveryError> {
    if !network.config().is_uniform() {
        return Err(DeliveryError::NonUniformCapacities);
    }
    coded_delivery_hetero(network, profile)
}

/// Subsets `V`, `|V| ≥ 3`, with at least one nonempty `W_{d_v, V∖{v}}`,
/// discovered from the partition instead of enumerating all `2^K`.
fn part_three_subsets(network: &CachedNetwork, profile: &DemandProfile) -> BTreeSet<UserSet> {
    let mut out = BTreeSet::new();
    for (file, members) in profile.nonempty_groups() {
        for (held_by, _) in network.partition().nonempty(file) {
            if held_by.len() < 2 {
                continue;
            }
            for &v in members {
                if !held_by.contains(v) {
                    out.insert(held_by.with(v));
                }
            }
        }
    }
    out
}

/// Random delivery: for each requested file, `⌈(1 - M_min/N) F⌉ + slack`
/// seeded random combinations, where `M_min` is the smallest cache in the
/// group. Every member's missing-bit
/// submatrix is checked for full column rank before returning.
pub fn random_delivery(
    network: &CachedNetwork,
    profile: &DemandProfile,
    slack_bits: usize,
    seed: u64,
) -> Result<DeliveryTranscript, DeliveryError> {
    check_profile(network, profile)?;
    let f = network.file_size();
    let placement = network.placement();
    let mut segments = Vec::new();
    let mut slack_total = 0;

    for (file, members) in profile.nonempty_groups() {
        let needed = uncached_bits_ceil(network.config().capacity(members[0]), network.config().num_files(), f);
        let desc = CombinationDescriptor { file, rows: needed + slack_bits, seed };
        let rows = desc.rows(f);
        let matrix = Gf2Matrix::from_rows(&rows, f);

        for &user in members {
            let missing = missing_bits(placement.cached_bits(user, file), f);
            let rank = matrix.select_columns(&missing).rank();
            if rank < missing.len() {
                return Err(DeliveryError::InsufficientCombinations { user, rank, needed: missing.len() });
            }
        }

        let source = network.library().file(file);
        let payload = BitArray::from_bools(&rows.iter().map(|r| r.dot(source)).collect::<Vec<_>>());
        segments.push(DeliverySegment { part: PartTag::RD, payload, provenance: Provenance::Combination(desc) });
        slack_total += slack_bits;
    }

    Ok(DeliveryTranscript { segments, file_size: f, slack_bits: slack_total })
}

/// `⌈(1 - m/N) F⌉`.
fn uncached_bits_ceil(m: &Rational, num_files: usize, file_size: usize) -> usize {
    let f = Rational::from_integer(BigInt::from(file_size));
    let x = (Rational::one() - m / Rational::from_integer(BigInt::from(num_files))) * f;
    x.ceil().to_integer().to_usize().expect("row count fits in usize")
}

/// Complement of a sorted index list within `[0, file_size)`.
pub(crate) fn missing_bits(cached: &[u32], file_size: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(file_size - cached.len());
    let mut it = cached.iter().peekable();
    for b in 0..file_size as u32 {
        if it.peek() == Some(&&b) {
            it.next();
        } else {
            out.push(b);
        }
    }
    out
}
