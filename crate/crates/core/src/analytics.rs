//! Closed-form rates and lower bounds, in exact rational arithmetic.
//!
//! Every formula assumes capacities sorted ascending (`M_1 ≤ … ≤ M_K`); the
//! functions here sort internally, so callers may pass any user order. With
//! `q_j = 1 - M_j/N` (sorted) and `Π = ∏_j q_j`:
//!
//! * baseline `R_b = Σ_i ∏_{j≤i} q_j`;
//! * `ΔR_1 = (K-N) Π` and `ΔR_2 = Σ_{k=1}^{K-N} (k-1) M_{k+N}/(N-M_{k+N}) Π`
//!   for `N < K`, both zero otherwise;
//! * coded `R_CD = R_b - ΔR_1 - ΔR_2`, random `R_RD = Σ_{i≤min(N,K)} q_i`,
//!   and the achievable `R_GBD = min(R_CD, R_RD)`.

use num::{BigInt, One, Zero};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::demand::DemandProfile;
use crate::rational::{positive_part, Exact, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("number of distinct requests {n_prime} outside [1:{max}]")]
    DistinctRequestsOutOfRange { n_prime: usize, max: usize },
    #[error("cache size {m} outside [0, {n})")]
    CapacityOutOfRange { m: String, n: usize },
}

fn from_usize(v: usize) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// User indices ordered by ascending capacity (ties by index).
pub fn ascending_order(config: &SystemConfig) -> Vec<usize> {
    let mut order: Vec<usize> = (0..config.num_users()).collect();
    order.sort_by(|&a, &b| config.capacity(a).cmp(config.capacity(b)).then(a.cmp(&b)));
    order
}

pub fn sorted_capacities(config: &SystemConfig) -> Vec<Rational> {
    ascending_order(config).into_iter().map(|k| config.capacity(k).clone()).collect()
}

fn sorted_q(config: &SystemConfig) -> Vec<Rational> {
    let n = config.n_rational();
    sorted_capacities(config).into_iter().map(|m| Rational::one() - m / &n).collect()
}

/// Sorted `q_j` as unreduced `(numerator, denominator)` pairs, so long
/// products cost one reduction at the end instead of one per factor.
fn sorted_q_parts(config: &SystemConfig) -> Vec<(BigInt, BigInt)> {
    let n = BigInt::from(config.num_files());
    sorted_capacities(config)
        .into_iter()
        .map(|m| {
            let den = &n * m.denom();
            (&den - m.numer(), den)
        })
        .collect()
}

/// `Π_{l=1}^K (1 - M_l / N)`.
pub fn miss_product(config: &SystemConfig) -> Rational {
    let (num, den) = sorted_q_parts(config)
        .into_iter()
        .fold((BigInt::one(), BigInt::one()), |(a, b), (n, d)| (a * n, b * d));
    Rational::new(num, den)
}

/// `Q_k = M_k/(N - M_k) · Π`: the asymptotic share of a file held by user
/// `k` alone. `k` is a 0-based user index in the caller's labeling.
pub fn q_value(config: &SystemConfig, k: usize) -> Rational {
    let m = config.capacity(k);
    m / (config.n_rational() - m) * miss_product(config)
}

pub fn delta_r1(config: &SystemConfig) -> Rational {
    let (n, k) = (config.num_files(), config.num_users());
    if n >= k {
        return Rational::zero();
    }
    from_usize(k - n) * miss_product(config)
}

pub fn delta_r2(config: &SystemConfig) -> Rational {
    let (n, k) = (config.num_files(), config.num_users());
    if n >= k {
        return Rational::zero();
    }
    let nr = config.n_rational();
    let m = sorted_capacities(config);
    let weighted: Rational = (1..=k - n)
        .map(|j| {
            let mk = &m[j + n - 1];
            from_usize(j - 1) * mk / (&nr - mk)
        })
        .sum();
    weighted * miss_product(config)
}

/// `Σ_i Π_{j≤i} q_j` over the common denominator `Π_j d_j`.
pub fn rate_baseline(config: &SystemConfig) -> Rational {
    let parts = sorted_q_parts(config);
    let mut suffix = vec![BigInt::one(); parts.len() + 1];
    for i in (0..parts.len()).rev() {
        suffix[i] = &suffix[i + 1] * &parts[i].1;
    }
    let mut prefix = BigInt::one();
    let mut total = BigInt::zero();
    for (i, (num, _)) in parts.iter().enumerate() {
        prefix *= num;
        total += &prefix * &suffix[i + 1];
    }
    Rational::new(total, suffix[0].clone())
}

/// `Σ_{i≤min(N,K)} (1 - M_i/N)` over the smallest capacities.
pub fn rate_uncoded(config: &SystemConfig) -> Rational {
    sorted_q(config).into_iter().take(config.num_files()).sum()
}

/// Random-delivery rate for a specific demand profile: one block of
/// `1 - M_lead/N` per requested file, where `lead` has the smallest cache in
/// the group.
pub fn rate_random_for_profile(config: &SystemConfig, profile: &DemandProfile) -> Rational {
    let n = config.n_rational();
    profile
        .nonempty_groups()
        .map(|(_, members)| Rational::one() - config.capacity(members[0]) / &n)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GbdRates {
    pub r_cd: Rational,
    pub r_rd: Rational,
    pub r_gbd: Rational,
}

pub fn rate_gbd(config: &SystemConfig) -> GbdRates {
    let r_cd = rate_baseline(config) - delta_r1(config) - delta_r2(config);
    let r_rd = rate_uncoded(config);
    let r_gbd = r_cd.clone().min(r_rd.clone());
    GbdRates { r_cd, r_rd, r_gbd }
}

fn check_uniform_args(k: usize, m: &Rational, n: usize) -> Result<Rational, AnalyticsError> {
    let nr = from_usize(n);
    if *m < Rational::zero() || *m >= nr {
        return Err(AnalyticsError::CapacityOutOfRange { m: m.to_string(), n });
    }
    let p = m / nr;
    let tail = (1..k).fold(Rational::one(), |acc, _| acc * (Rational::one() - &p));
    Ok(p * tail)
}

/// Part-2 rate of the grouped scheme with equal caches and `N'` distinct
/// requests: `N'(K - (N'+1)/2) (M/N)(1 - M/N)^{K-1}`.
pub fn rate_uniform_part2_gbd(n_prime: usize, k: usize, m: &Rational, n: usize) -> Result<Rational, AnalyticsError> {
    let max = n.min(k);
    if n_prime == 0 || n_prime > max {
        return Err(AnalyticsError::DistinctRequestsOutOfRange { n_prime, max });
    }
    let unit = check_uniform_args(k, m, n)?;
    let np = from_usize(n_prime);
    let coeff = &np * (from_usize(k) - (&np + Rational::one()) / from_usize(2));
    Ok(coeff * unit)
}

/// Part-2 rate of the ungrouped scheme with equal caches: one coded
/// content per user pair, `K(K-1)/2 (M/N)(1 - M/N)^{K-1}`.
pub fn rate_uniform_part2_baseline(k: usize, m: &Rational, n: usize) -> Result<Rational, AnalyticsError> {
    let unit = check_uniform_args(k, m, n)?;
    Ok(from_usize(k * k.saturating_sub(1)) / from_usize(2) * unit)
}

/// Cut-set bound `max_{s≤min(N,K)} s - (Σ_{i≤s} M_i)/⌊N/s⌋`, clamped at 0,
/// with the maximizing `s` (1-based).
pub fn cut_set_bound(config: &SystemConfig) -> (Rational, usize) {
    let m = sorted_capacities(config);
    let n = config.num_files();
    let mut prefix = Rational::zero();
    let mut best: Option<(Rational, usize)> = None;
    for s in 1..=n.min(config.num_users()) {
        prefix += &m[s - 1];
        let v = from_usize(s) - &prefix / from_usize(n / s);
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, s));
        }
    }
    let (v, s) = best.expect("at least one file and one user");
    (positive_part(v), s)
}

/// Rounding of `N/l` inside `γ = min((N/l - s)^+, K - s)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaConvention {
    Floor,
    #[default]
    Ceil,
}

impl std::str::FromStr for GammaConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "floor" => Ok(Self::Floor),
            "ceil" | "ceiling" => Ok(Self::Ceil),
            other => Err(format!("unknown gamma convention `{other}` (expected floor or ceil)")),
        }
    }
}

/// Maximizing `(s, l, γ)`, 1-based `s` and `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub s: usize,
    pub l: usize,
    pub gamma: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowerBound {
    pub value: Rational,
    pub witness: Witness,
}

/// Evaluates one `(s, l)` term of the new lower bound.
pub fn lower_bound_term(config: &SystemConfig, s: usize, l: usize, convention: GammaConvention) -> (Rational, usize) {
    let (n, k) = (config.num_files(), config.num_users());
    let m = sorted_capacities(config);
    let prefix: Vec<Rational> = std::iter::once(Rational::zero())
        .chain(m.iter().scan(Rational::zero(), |acc, x| {
            *acc += x;
            Some(acc.clone())
        }))
        .collect();
    term(n, k, &prefix, s, l, convention)
}

fn term(n: usize, k: usize, prefix: &[Rational], s: usize, l: usize, convention: GammaConvention) -> (Rational, usize) {
    let t = match convention {
        GammaConvention::Floor => n / l,
        GammaConvention::Ceil => n.div_ceil(l),
    };
    let gamma = t.saturating_sub(s).min(k - s);
    let width = from_usize(s + gamma);
    let v = from_usize(n)
        - from_usize(s) / &width * &prefix[s + gamma]
        - from_usize(gamma * n.saturating_sub(l * s)) / &width
        - from_usize(n.saturating_sub(k * l));
    (v / from_usize(l), gamma)
}

/// `max_{s∈[1:K], l∈[1:⌈N/s⌉]} (1/l){N - s/(s+γ) Σ_{i≤s+γ} M_i
/// - γ(N - ls)^+/(s+γ) - (N - Kl)^+}`, clamped at 0. The witness is the
/// first strict maximum in `(s, l)` lexicographic order.
pub fn lower_bound_new(config: &SystemConfig, convention: GammaConvention) -> LowerBound {
    let (n, k) = (config.num_files(), config.num_users());
    let m = sorted_capacities(config);
    let mut prefix = vec![Rational::zero()];
    for x in &m {
        let next = prefix.last().unwrap() + x;
        prefix.push(next);
    }
    let mut best: Option<LowerBound> = None;
    for s in 1..=k {
        for l in 1..=n.div_ceil(s) {
            let (value, gamma) = term(n, k, &prefix, s, l, convention);
            if best.as_ref().map_or(true, |b| value > b.value) {
                best = Some(LowerBound { value, witness: Witness { s, l, gamma } });
            }
        }
    }
    let mut best = best.expect("at least one user");
    best.value = positive_part(best.value);
    best
}

/// Asymptotic (`F → ∞`) per-part rates of coded delivery for one demand
/// profile. Each segment costs its longest argument; subfile shares follow
/// the placement law.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartRates {
    pub p1: Rational,
    pub p2_intra: Rational,
    pub p2_cross: Rational,
    pub p3: Rational,
}

impl PartRates {
    pub fn part_two(&self) -> Rational {
        &self.p2_intra + &self.p2_cross
    }

    pub fn total(&self) -> Rational {
        &self.p1 + self.part_two() + &self.p3
    }
}

/// Closed-form per-part rates for any demand profile.
///
/// Singleton shares `Q_u` grow with `M_u`, so a chain link costs the larger
/// member's `Q` and a `P3` segment over `V` costs the share of `V` minus its
/// smallest-cache member. Summing the latter over all `|V| ≥ 3` telescopes to
/// `R_b - KΠ - Σ_k (k-1) Q_(k)` with `Q_(k)` in ascending order, independent
/// of the demands.
pub fn asymptotic_coded_rate(config: &SystemConfig, profile: &DemandProfile) -> PartRates {
    let pi = miss_product(config);
    let n = config.n_rational();
    let q: Vec<Rational> = (0..config.num_users())
        .map(|u| {
            let m = config.capacity(u);
            m / (&n - m) * &pi
        })
        .collect();
    let groups: Vec<&[usize]> = profile.nonempty_groups().map(|(_, g)| g).collect();

    let p1 = from_usize(groups.len()) * &pi;

    let tails: Vec<Rational> = groups.iter().map(|g| g[1..].iter().map(|&u| q[u].clone()).sum()).collect();
    let p2_intra: Rational = tails.iter().sum();
    let mut p2_cross = Rational::zero();
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            p2_cross += &tails[a] + &tails[b];
            p2_cross += q[groups[a][0]].clone().max(q[groups[b][0]].clone());
        }
    }

    let mut sorted_q: Vec<Rational> = q;
    sorted_q.sort();
    let ranked: Rational = sorted_q.iter().enumerate().map(|(i, x)| from_usize(i) * x).sum();
    let p3 = rate_baseline(config) - from_usize(config.num_users()) * &pi - ranked;

    PartRates { p1, p2_intra, p2_cross, p3 }
}

/// Every closed-form quantity for one configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RateReport {
    #[serde(rename = "rCD")]
    pub r_cd: Exact,
    #[serde(rename = "rRD")]
    pub r_rd: Exact,
    #[serde(rename = "rGBD")]
    pub r_gbd: Exact,
    pub r_baseline: Exact,
    pub r_uncoded: Exact,
    pub delta_r1: Exact,
    pub delta_r2: Exact,
    pub lower_bound_cut_set: Exact,
    pub lower_bound_new: Exact,
    pub lower_bound_new_gamma: GammaConvention,
    pub lower_bound_new_witness: Witness,
}

impl RateReport {
    pub fn evaluate(config: &SystemConfig, convention: GammaConvention) -> Self {
        let gbd = rate_gbd(config);
        let lb = lower_bound_new(config, convention);
        Self {
            r_cd: Exact(gbd.r_cd),
            r_rd: Exact(gbd.r_rd),
            r_gbd: Exact(gbd.r_gbd),
            r_baseline: Exact(rate_baseline(config)),
            r_uncoded: Exact(rate_uncoded(config)),
            delta_r1: Exact(delta_r1(config)),
            delta_r2: Exact(delta_r2(config)),
            lower_bound_cut_set: Exact(cut_set_bound(config).0),
            lower_bound_new: Exact(lb.value),
            lower_bound_new_gamma: convention,
            lower_bound_new_witness: lb.witness,
        }
    }

    /// Names of violated invariants; empty when all hold.
    pub fn check_invariants(&self, config: &SystemConfig) -> Vec<String> {
        let mut failed = Vec::new();
        let mut require = |ok: bool, name: &str| {
            if !ok {
                failed.push(name.to_string());
            }
        };
        let gbd = &self.r_gbd.0;
        require(*gbd == self.r_cd.0.clone().min(self.r_rd.0.clone()), "rGBD = min(rCD, rRD)");
        require(self.r_uncoded.0 == self.r_rd.0, "rUncoded = rRD");
        require(self.lower_bound_cut_set.0 <= *gbd, "cut-set bound <= rGBD");
        require(self.lower_bound_new.0 <= *gbd, "new lower bound <= rGBD");
        let deltas = &self.delta_r1.0 + &self.delta_r2.0;
        require(self.r_baseline.0 == &self.r_cd.0 + &deltas, "rBaseline = rCD + deltaR1 + deltaR2");
        if config.num_files() < config.num_users() {
            require(&self.r_baseline.0 - gbd >= deltas && deltas > Rational::zero(), "rBaseline - rGBD >= deltaR1 + deltaR2 > 0");
        } else {
            require(*gbd == self.r_baseline.0, "rGBD = rBaseline when N >= K");
        }
        failed
    }
}
