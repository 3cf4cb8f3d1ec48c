//! Per-user decoding of delivery transcripts.
//!
//! A user knows its own cache contents and the (public) subfile index sets.
//! Coded transcripts are decoded by constraint propagation: any segment with
//! exactly one unknown nonempty argument reveals it, and this repeats until
//! nothing changes. Random-combination transcripts are decoded by solving the
//! GF(2) system restricted to the user's missing bits.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitArray;
use crate::delivery::{missing_bits, DeliveryTranscript, Provenance};
use crate::demand::DemandProfile;
use crate::gf2::{self, Gf2Matrix};
use crate::network::CachedNetwork;
use crate::subset::SubfileIndex;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("user {user} cannot recover {missing:?}")]
    Undecodable { user: usize, missing: SubfileIndex },
    #[error("user {user}: no random combinations of file {file} were sent")]
    NoCombinations { user: usize, file: usize },
    #[error("user {user}: combination system is singular (rank {rank} < {unknowns})")]
    Singular { user: usize, rank: usize, unknowns: usize },
}

/// What one user knows about the library while decoding.
#[derive(Debug, Clone)]
pub struct DecodeState<'a> {
    network: &'a CachedNetwork,
    user: usize,
    known: HashMap<SubfileIndex, BitArray>,
    consumed: usize,
}

impl<'a> DecodeState<'a> {
    /// Seeds knowledge with every subfile the user caches.
    pub fn new(network: &'a CachedNetwork, user: usize) -> Self {
        let mut known = HashMap::new();
        for file in 0..network.config().num_files() {
            for (users, _) in network.partition().nonempty(file) {
                if users.contains(user) {
                    let idx = SubfileIndex::new(file, users);
                    known.insert(idx, network.subfile(idx));
                }
            }
        }
        Self { network, user, known, consumed: 0 }
    }

    pub fn knows(&self, idx: SubfileIndex) -> bool {
        self.network.partition().len(idx) == 0 || self.known.contains_key(&idx)
    }

    /// Segments that revealed a new subfile.
    pub fn segments_consumed(&self) -> usize {
        self.consumed
    }

    /// Runs propagation over the coded segments to a fixed point.
    pub fn absorb(&mut self, transcript: &DeliveryTranscript) {
        let mut pending: Vec<(&BitArray, &[SubfileIndex])> = transcript
            .segments
            .iter()
            .filter_map(|s| match &s.provenance {
                Provenance::Subfiles(args) => Some((&s.payload, args.as_slice())),
                Provenance::Combination(_) => None,
            })
            .collect();
        loop {
            let before = pending.len();
            pending.retain(|&(payload, args)| {
                let mut unknown = args.iter().filter(|&&a| !self.knows(a));
                match (unknown.next(), unknown.next()) {
                    (None, _) => false,
                    (Some(&target), None) => {
                        let mut value = payload.clone();
                        for a in args.iter().filter(|&&a| a != target && self.network.partition().len(a) > 0) {
                            value.xor_padded_assign(&self.known[a]);
                        }
                        let len = self.network.partition().len(target);
                        self.known.insert(target, value.truncated(len));
                        self.consumed += 1;
                        false
                    }
                    _ => true,
                }
            });
            if pending.len() == before {
                break;
            }
        }
    }

    /// Assembles the demanded file, or names the first subfile still missing.
    pub fn reconstruct(&self, file: usize) -> Result<BitArray, DecodeError> {
        let partition = self.network.partition();
        let mut out = BitArray::zeros(self.network.file_size());
        for (users, positions) in partition.nonempty(file) {
            let idx = SubfileIndex::new(file, users);
            let value = self.known.get(&idx).ok_or(DecodeError::Undecodable { user: self.user, missing: idx })?;
            out.scatter(positions, value);
        }
        Ok(out)
    }
}

/// Decodes `user`'s demand from a coded transcript.
pub fn decode_user(
    network: &CachedNetwork,
    profile: &DemandProfile,
    transcript: &DeliveryTranscript,
    user: usize,
) -> Result<(BitArray, usize), DecodeError> {
    let mut state = DecodeState::new(network, user);
    state.absorb(transcript);
    let file = state.reconstruct(profile.demand(user))?;
    Ok((file, state.segments_consumed()))
}

/// Decodes `user`'s demand from a random-combination transcript.
pub fn decode_random_delivery(
    network: &CachedNetwork,
    profile: &DemandProfile,
    transcript: &DeliveryTranscript,
    user: usize,
) -> Result<(BitArray, usize), DecodeError> {
    let file = profile.demand(user);
    let f = network.file_size();
    let (payload, desc) = transcript
        .segments
        .iter()
        .find_map(|s| match &s.provenance {
            Provenance::Combination(d) if d.file == file => Some((&s.payload, d)),
            _ => None,
        })
        .ok_or(DecodeError::NoCombinations { user, file })?;

    let cached = network.placement().cached_bits(user, file);
    let mut partial = BitArray::zeros(f);
    partial.scatter(cached, &network.library().file(file).gather(cached));

    let rows = desc.rows(f);
    let rhs = BitArray::from_bools(&rows.iter().enumerate().map(|(r, row)| payload.get(r) ^ row.dot(&partial)).collect::<Vec<_>>());
    let missing = missing_bits(cached, f);
    let system = Gf2Matrix::from_rows(&rows, f).select_columns(&missing);
    let solution = gf2::solve(&system, &rhs)
        .map_err(|e| DecodeError::Singular { user, rank: e.rank, unknowns: e.unknowns })?;
    partial.scatter(&missing, &solution);
    Ok((partial, 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UserVerification {
    pub user: usize,
    pub decoded: bool,
    pub mismatched_bits: usize,
    pub segments_consumed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub users: Vec<UserVerification>,
}

impl VerificationReport {
    pub fn all_decoded(&self) -> bool {
        self.users.iter().all(|u| u.decoded && u.mismatched_bits == 0)
    }

    pub fn first_failure(&self) -> Option<usize> {
        self.users.iter().find(|u| !u.decoded || u.mismatched_bits > 0).map(|u| u.user)
    }
}

/// Decodes every user and compares against the library.
pub fn verify_transcript(
    network: &CachedNetwork,
    profile: &DemandProfile,
    transcript: &DeliveryTranscript,
) -> VerificationReport {
    let random = transcript.segments.iter().any(|s| matches!(s.provenance, Provenance::Combination(_)));
    let users = (0..network.config().num_users())
        .map(|user| {
            let result = if random {
                decode_random_delivery(network, profile, transcript, user)
            } else {
                decode_user(network, profile, transcript, user)
            };
            match result {
                Ok((file, consumed)) => {
                    let truth = network.library().file(profile.demand(user));
                    let mut diff = file;
                    diff.xor_padded_assign(truth);
                    UserVerification { user, decoded: true, mismatched_bits: diff.count_ones(), segments_consumed: consumed }
                }
                Err(_) => UserVerification { user, decoded: false, mismatched_bits: 0, segments_consumed: 0 },
            }
        })
        .collect();
    VerificationReport { users }
}

/// Indices of segments whose removal still lets every user decode.
pub fn redundant_segments(network: &CachedNetwork, profile: &DemandProfile, transcript: &DeliveryTranscript) -> Vec<usize> {
    (0..transcript.segments.len())
        .filter(|&i| {
            let reduced = transcript.without_segment(i);
            (0..network.config().num_users()).all(|u| decode_user(network, profile, &reduced, u).is_ok())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::delivery::{coded_delivery_hetero, random_delivery};
    use crate::placement::PlacementMode;
    use crate::rational::{int, ratio};

    fn example_one(f: usize, seed: u64) -> CachedNetwork {
        let cfg = SystemConfig::new(2, vec![ratio(1, 8), ratio(1, 4), ratio(1, 2), int(1)], f).unwrap();
        CachedNetwork::build(&cfg, seed, PlacementMode::ExactSize).unwrap()
    }

    #[test]
    fn coded_delivery_decodes_example_one() {
        let net = example_one(4000, 7);
        for demands in [[0, 1, 0, 1], [0, 0, 0, 0], [1, 0, 0, 1]] {
            let profile = DemandProfile::build(net.config(), &demands).unwrap();
            let t = coded_delivery_hetero(&net, &profile).unwrap();
            let report = verify_transcript(&net, &profile, &t);
            assert!(report.all_decoded(), "{demands:?}: {report:?}");
        }
    }

    #[test]
    fn dropping_a_segment_breaks_someone() {
        let net = example_one(600, 3);
        let profile = DemandProfile::worst_case(net.config());
        let t = coded_delivery_hetero(&net, &profile).unwrap();
        assert!(redundant_segments(&net, &profile, &t).is_empty());
        let err = decode_user(&net, &profile, &t.without_segment(0), 0).unwrap_err();
        assert!(matches!(err, DecodeError::Undecodable { user: 0, .. }));
    }

    #[test]
    fn random_delivery_decodes() {
        let net = example_one(700, 5);
        let profile = DemandProfile::worst_case(net.config());
        let t = random_delivery(&net, &profile, 32, 17).unwrap();
        assert!(verify_transcript(&net, &profile, &t).all_decoded());
    }

    #[test]
    fn corrupted_payload_is_detected() {
        let net = example_one(2000, 4);
        let profile = DemandProfile::worst_case(net.config());
        let mut t = coded_delivery_hetero(&net, &profile).unwrap();
        let first = &mut t.segments[0].payload;
        let bit = first.get(0);
        first.set(0, !bit);
        let report = verify_transcript(&net, &profile, &t);
        assert!(!report.all_decoded());
        assert!(report.users.iter().all(|u| u.decoded));
    }
}
