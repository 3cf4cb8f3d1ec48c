use num::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cachelab::analytics::{self, asymptotic_coded_rate};
use cachelab::config::SystemConfig;
use cachelab::decoder::{decode_random_delivery, decode_user, verify_transcript};
use cachelab::delivery::{coded_delivery_hetero, random_delivery, PartTag, Provenance, DEFAULT_SLACK_BITS};
use cachelab::demand::DemandProfile;
use cachelab::experiments::{monte_carlo_validate, Procedure};
use cachelab::network::CachedNetwork;
use cachelab::partition::expected_fraction;
use cachelab::placement::PlacementMode;
use cachelab::rational::{int, ratio, to_f64, Rational};
use cachelab::subset::{SubfileIndex, UserSet};

fn example_one(f: usize) -> SystemConfig {
    SystemConfig::new(2, vec![ratio(1, 8), ratio(1, 4), ratio(1, 2), int(1)], f).unwrap()
}

fn random_setup(rng: &mut ChaCha8Rng, f: usize) -> (SystemConfig, DemandProfile) {
    let n = rng.gen_range(1..=5);
    let k = rng.gen_range(1..=8);
    let caps = (0..k).map(|_| Rational::new(BigInt::from(rng.gen_range(0..8 * n as u32)), BigInt::from(8))).collect();
    let config = SystemConfig::new(n, caps, f).unwrap();
    let demands: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
    let profile = DemandProfile::build(&config, &demands).unwrap();
    (config, profile)
}

#[test]
fn coded_delivery_decodes_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for case in 0..100 {
        let (config, profile) = random_setup(&mut rng, 4096);
        let net = CachedNetwork::build(&config, case, PlacementMode::ExactSize).unwrap();
        let t = coded_delivery_hetero(&net, &profile).unwrap();
        let report = verify_transcript(&net, &profile, &t);
        assert!(report.all_decoded(), "case {case}: {config:?} {:?}: {report:?}", profile.demands());
    }
}

#[test]
fn random_delivery_decodes_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..100 {
        let (config, profile) = random_setup(&mut rng, 512);
        let net = CachedNetwork::build(&config, case, PlacementMode::ExactSize).unwrap();
        let t = random_delivery(&net, &profile, DEFAULT_SLACK_BITS, case).unwrap();
        assert!(verify_transcript(&net, &profile, &t).all_decoded(), "case {case}");
    }
}

#[test]
fn random_delivery_decodes_at_4096_bits() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for case in 0..2 {
        let (config, profile) = random_setup(&mut rng, 4096);
        let net = CachedNetwork::build(&config, case, PlacementMode::ExactSize).unwrap();
        let t = random_delivery(&net, &profile, DEFAULT_SLACK_BITS, case).unwrap();
        assert!(verify_transcript(&net, &profile, &t).all_decoded(), "case {case}");
    }
}

#[test]
fn random_delivery_on_example_one_matches_counting_rate() {
    let net = CachedNetwork::build(&example_one(2048), 9, PlacementMode::ExactSize).unwrap();
    let profile = DemandProfile::worst_case(net.config());
    let t = random_delivery(&net, &profile, DEFAULT_SLACK_BITS, 9).unwrap();
    assert!(verify_transcript(&net, &profile, &t).all_decoded());
    assert_eq!(t.total_bits(), 2048 * 29 / 16 + 2 * DEFAULT_SLACK_BITS);
    assert_eq!(analytics::rate_random_for_profile(net.config(), &profile), ratio(29, 16));
}

#[test]
fn zero_cache_user_solves_full_system() {
    let config = SystemConfig::new(2, vec![int(0), int(1)], 300).unwrap();
    let net = CachedNetwork::build(&config, 4, PlacementMode::ExactSize).unwrap();
    let profile = DemandProfile::build(&config, &[0, 1]).unwrap();
    let t = random_delivery(&net, &profile, DEFAULT_SLACK_BITS, 4).unwrap();
    let (file, _) = decode_random_delivery(&net, &profile, &t, 0).unwrap();
    assert_eq!(&file, net.library().file(0));
}

#[test]
fn fully_cached_demand_decodes_from_empty_transcript() {
    // round(1.9 * 4 / 2) = 4: the user holds every bit of each file
    let config = SystemConfig::new(2, vec![ratio(19, 10)], 4).unwrap();
    let net = CachedNetwork::build(&config, 0, PlacementMode::ExactSize).unwrap();
    let profile = DemandProfile::worst_case(&config);
    let t = coded_delivery_hetero(&net, &profile).unwrap();
    assert_eq!(t.total_bits(), 0);
    let (file, consumed) = decode_user(&net, &profile, &t, 0).unwrap();
    assert_eq!(&file, net.library().file(0));
    assert_eq!(consumed, 0);
}

#[test]
fn reordered_transcript_still_decodes() {
    let net = CachedNetwork::build(&example_one(3000), 12, PlacementMode::ExactSize).unwrap();
    let profile = DemandProfile::worst_case(net.config());
    let mut t = coded_delivery_hetero(&net, &profile).unwrap();
    t.segments.reverse();
    assert!(verify_transcript(&net, &profile, &t).all_decoded());
}

#[test]
fn example_one_rate_at_one_million_bits() {
    let c = example_one(1);
    let report = monte_carlo_validate(&c, &DemandProfile::worst_case(&c), 20, 1_000_000, 0, Procedure::Coded).unwrap();
    assert_eq!(report.decodes, 80);
    assert!(report.max_relative_deviation <= 0.02, "{report:?}");
}

#[test]
fn rate_converges_for_ten_users() {
    let caps = [1, 2, 3, 5, 8, 9, 12, 15, 18, 22].iter().map(|&x| ratio(x, 8)).collect();
    let c = SystemConfig::new(3, caps, 1).unwrap();
    let report = monte_carlo_validate(&c, &DemandProfile::worst_case(&c), 20, 100_000, 7, Procedure::Coded).unwrap();
    assert!(report.all_decoded());
    assert!(report.relative_deviation_of_mean <= 0.02, "{report:?}");
}

#[test]
fn worst_case_demands_dominate() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let config = SystemConfig::new(3, vec![ratio(1, 4), ratio(1, 2), int(1), ratio(3, 2), int(2), ratio(5, 2)], 20_000).unwrap();
    let worst = DemandProfile::worst_case(&config);
    let worst_rate = asymptotic_coded_rate(&config, &worst).total();
    let net = CachedNetwork::build(&config, 1, PlacementMode::ExactSize).unwrap();
    let worst_bits = coded_delivery_hetero(&net, &worst).unwrap().total_bits() as f64;
    for _ in 0..100 {
        let demands: Vec<usize> = (0..6).map(|_| rng.gen_range(0..3)).collect();
        let p = DemandProfile::build(&config, &demands).unwrap();
        assert!(asymptotic_coded_rate(&config, &p).total() <= worst_rate, "{demands:?}");
        // finite-F transcripts of asymptotically tied profiles differ by noise only
        let bits = coded_delivery_hetero(&net, &p).unwrap().total_bits() as f64;
        assert!(bits <= worst_bits * 1.01, "{demands:?}: {bits} > {worst_bits}");
    }
}

#[test]
fn part_three_lengths_invariant_under_relabeling_within_group() {
    let config = SystemConfig::new(2, vec![ratio(1, 2), ratio(1, 2), int(1), ratio(1, 4), ratio(3, 4)], 5000).unwrap();
    let demands = [0, 0, 1, 0, 1];
    let net = CachedNetwork::build(&config, 5, PlacementMode::ExactSize).unwrap();
    let profile = DemandProfile::build(&config, &demands).unwrap();
    let p3_lengths = |net: &CachedNetwork, profile: &DemandProfile| {
        let t = coded_delivery_hetero(net, profile).unwrap();
        let mut v: Vec<usize> = t.segments.iter().filter(|s| s.part == PartTag::P3).map(|s| s.bit_length()).collect();
        v.sort_unstable();
        v
    };
    // swap users 0 and 3 (both want file 0) along with their caches
    let order = [3, 1, 2, 0, 4];
    let swapped = CachedNetwork::from_parts(
        config.permuted(&order),
        net.library().clone(),
        net.placement().permuted_users(&order),
    );
    let swapped_profile = DemandProfile::build(swapped.config(), &order.map(|u| demands[u])).unwrap();
    assert_eq!(p3_lengths(&net, &profile), p3_lengths(&swapped, &swapped_profile));
}

#[test]
fn coded_segments_reference_expected_subfiles() {
    let net = CachedNetwork::build(&example_one(5000), 3, PlacementMode::ExactSize).unwrap();
    let profile = DemandProfile::worst_case(net.config());
    let t = coded_delivery_hetero(&net, &profile).unwrap();
    for seg in &t.segments {
        let Provenance::Subfiles(args) = &seg.provenance else { panic!("coded segment without subfiles") };
        let expected = match seg.part {
            PartTag::P1 => 1,
            PartTag::P2Intra | PartTag::P2Cross => 2,
            PartTag::P3 => args[0].users.len() + 1,
            PartTag::RD => unreachable!(),
        };
        assert_eq!(args.len(), expected);
    }
}

#[test]
fn subfile_fraction_matches_placement_law() {
    let net = CachedNetwork::build(&example_one(1_000_000), 21, PlacementMode::ExactSize).unwrap();
    let idx = SubfileIndex::new(0, UserSet::singleton(3));
    let measured = net.partition().fraction(idx);
    let expected = to_f64(&expected_fraction(net.config(), idx.users));
    assert!((expected - 0.3076171875).abs() < 1e-12);
    assert!((measured - expected).abs() / expected < 0.01, "{measured} vs {expected}");
}

#[test]
fn two_half_caches_split_evenly() {
    let config = SystemConfig::new(2, vec![int(1), int(1)], 1_000_000).unwrap();
    let net = CachedNetwork::build(&config, 2, PlacementMode::ExactSize).unwrap();
    for mask in 0..4 {
        let f = net.partition().fraction(SubfileIndex::new(1, UserSet::from_bits(mask)));
        assert!((f - 0.25).abs() / 0.25 < 0.01, "{mask}: {f}");
    }
}

#[test]
fn subfile_fractions_concentrate_as_files_grow() {
    let config = example_one(1);
    let deviation = |f: usize| {
        let sized = config.with_file_size(f);
        (0..4u64)
            .map(|seed| {
                let net = CachedNetwork::build(&sized, seed, PlacementMode::ExactSize).unwrap();
                (0..16u32)
                    .map(|m| {
                        let v = UserSet::from_bits(m);
                        (net.partition().fraction(SubfileIndex::new(0, v)) - to_f64(&expected_fraction(&config, v))).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .sum::<f64>()
            / 4.0
    };
    let (a, b, c) = (deviation(10_000), deviation(100_000), deviation(1_000_000));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn partition_covers_every_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for case in 0..20 {
        let (config, _) = random_setup(&mut rng, 777);
        let net = CachedNetwork::build(&config, case, PlacementMode::ExactSize).unwrap();
        for i in 0..config.num_files() {
            let total: usize = net.partition().nonempty(i).map(|(_, b)| b.len()).sum();
            assert_eq!(total, 777);
        }
    }
}

#[test]
fn same_seed_same_placement() {
    let c = example_one(4096);
    let a = CachedNetwork::build(&c, 77, PlacementMode::ExactSize).unwrap();
    let b = CachedNetwork::build(&c, 77, PlacementMode::ExactSize).unwrap();
    assert_eq!(a.placement(), b.placement());
    assert_eq!(a.library(), b.library());
}
