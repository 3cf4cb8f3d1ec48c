//! Parameter sweeps over the exponential cache profile and Monte-Carlo
//! validation of the simulator against the closed forms.

use std::collections::BTreeMap;
use std::io::Write;

use num::{BigInt, One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, GammaConvention, RateReport};
use crate::config::{FullCachePolicy, SystemConfig};
use crate::decoder::verify_transcript;
use crate::delivery::{self, PartTag, DEFAULT_SLACK_BITS};
use crate::demand::DemandProfile;
use crate::network::CachedNetwork;
use crate::placement::PlacementMode;
use crate::rational::{to_decimal, to_f64, Exact, Literal, Rational, DISPLAY_DIGITS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExperimentError {
    #[error("alpha = {0} outside [0, 1]")]
    AlphaOutOfRange(String),
    #[error("Mmax = {0} is negative")]
    NegativeMmax(String),
    #[error("swept variable {0} also appears in the fixed parameters")]
    SweptVariableFixed(SweepVariable),
    #[error("fixed parameter {0} is missing")]
    MissingFixed(SweepVariable),
    #[error("{0} must be a positive integer, got {1}")]
    NotAPositiveInteger(SweepVariable, String),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("decode failed for user {user} (1-based) in trial seed {seed}")]
    DecodeFailure { seed: u64, user: usize },
    #[error("trial seed {seed}: {message}")]
    Simulation { seed: u64, message: String },
}

/// `M_k = α^{K-k} M_max` for `k = 1..K`.
pub fn exp_cache_profile(alpha: &Rational, mmax: &Rational, k: usize) -> Result<Vec<Rational>, ExperimentError> {
    if *alpha < Rational::zero() || *alpha > Rational::one() {
        return Err(ExperimentError::AlphaOutOfRange(alpha.to_string()));
    }
    if *mmax < Rational::zero() {
        return Err(ExperimentError::NegativeMmax(mmax.to_string()));
    }
    let mut out = Vec::with_capacity(k);
    let mut m = mmax.clone();
    for _ in 0..k {
        out.push(m.clone());
        m *= alpha;
    }
    out.reverse();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "Mmax")]
    Mmax,
    #[serde(rename = "alpha")]
    Alpha,
    K,
    N,
}

impl std::fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mmax => "Mmax",
            Self::Alpha => "alpha",
            Self::K => "K",
            Self::N => "N",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Curve {
    #[serde(rename = "rGBD")]
    Gbd,
    #[serde(rename = "rBaseline")]
    Baseline,
    #[serde(rename = "rUncoded")]
    Uncoded,
    #[serde(rename = "lowerBoundNew")]
    LowerBoundNew,
    #[serde(rename = "cutSetBound")]
    CutSet,
}

impl Curve {
    pub const ALL: [Curve; 5] = [Curve::Gbd, Curve::Baseline, Curve::Uncoded, Curve::LowerBoundNew, Curve::CutSet];
}

fn all_curves() -> Vec<Curve> {
    Curve::ALL.to_vec()
}

/// A one-dimensional sweep:
///
/// ```json
/// {"variable": "Mmax", "values": [0, 0.5, "1"],
///  "fixed": {"N": 3, "K": 3, "alpha": "0.8"},
///  "curves": ["rGBD", "lowerBoundNew"], "gamma": "ceil", "dropFullCache": true}
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<Literal>,
    pub fixed: BTreeMap<SweepVariable, Literal>,
    #[serde(default = "all_curves")]
    pub curves: Vec<Curve>,
    #[serde(default)]
    pub gamma: GammaConvention,
    #[serde(default)]
    pub drop_full_cache: bool,
}

fn positive_integer(var: SweepVariable, x: &Rational) -> Result<usize, ExperimentError> {
    x.is_integer()
        .then(|| x.to_integer().to_usize())
        .flatten()
        .filter(|&v| v > 0)
        .ok_or_else(|| ExperimentError::NotAPositiveInteger(var, x.to_string()))
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.fixed.contains_key(&self.variable) {
            return Err(ExperimentError::SweptVariableFixed(self.variable));
        }
        for var in [SweepVariable::Mmax, SweepVariable::Alpha, SweepVariable::K, SweepVariable::N] {
            if var != self.variable && !self.fixed.contains_key(&var) {
                return Err(ExperimentError::MissingFixed(var));
            }
        }
        if let Some(a) = self.fixed.get(&SweepVariable::Alpha) {
            if a.0 < Rational::zero() || a.0 > Rational::one() {
                return Err(ExperimentError::AlphaOutOfRange(a.0.to_string()));
            }
        }
        Ok(())
    }

    /// The configuration at swept value `x`.
    pub fn config_at(&self, x: &Rational) -> Result<SystemConfig, String> {
        let get = |var: SweepVariable| if var == self.variable { x.clone() } else { self.fixed[&var].0.clone() };
        let n = positive_integer(SweepVariable::N, &get(SweepVariable::N)).map_err(|e| e.to_string())?;
        let k = positive_integer(SweepVariable::K, &get(SweepVariable::K)).map_err(|e| e.to_string())?;
        let caps = exp_cache_profile(&get(SweepVariable::Alpha), &get(SweepVariable::Mmax), k).map_err(|e| e.to_string())?;
        let policy = if self.drop_full_cache { FullCachePolicy::Drop } else { FullCachePolicy::Reject };
        SystemConfig::with_policy(n, caps, 1, policy).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub x: Rational,
    /// `Err` flags a point whose derived configuration is invalid.
    pub report: Result<RateReport, String>,
    pub dropped_users: Vec<usize>,
}

impl SweepRow {
    pub fn curve(&self, curve: Curve) -> Option<&Rational> {
        let r = self.report.as_ref().ok()?;
        Some(match curve {
            Curve::Gbd => &r.r_gbd.0,
            Curve::Baseline => &r.r_baseline.0,
            Curve::Uncoded => &r.r_uncoded.0,
            Curve::LowerBoundNew => &r.lower_bound_new.0,
            Curve::CutSet => &r.lower_bound_cut_set.0,
        })
    }
}

/// Evaluates every point of the sweep in parallel; rows keep spec order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, ExperimentError> {
    spec.validate()?;
    Ok(spec
        .values
        .par_iter()
        .map(|x| {
            let x = x.0.clone();
            match spec.config_at(&x) {
                Ok(config) => SweepRow {
                    report: Ok(RateReport::evaluate(&config, spec.gamma)),
                    dropped_users: config.dropped_users().to_vec(),
                    x,
                },
                Err(e) => SweepRow { x, report: Err(e), dropped_users: Vec::new() },
            }
        })
        .collect())
}

pub const CSV_COLUMNS: [&str; 8] =
    ["x", "rGBD", "rBaseline", "rUncoded", "lowerBoundNew", "cutSetBound", "witness_s", "witness_l"];

/// Writes the fixed CSV layout. Curves not requested by the spec, and every
/// value of a flagged row, are left empty.
pub fn write_csv<W: Write>(rows: &[SweepRow], curves: &[Curve], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        let mut record = vec![to_decimal(&row.x, DISPLAY_DIGITS)];
        for curve in Curve::ALL {
            let cell = if curves.contains(&curve) { row.curve(curve) } else { None };
            record.push(cell.map(|v| to_decimal(v, DISPLAY_DIGITS)).unwrap_or_default());
        }
        match &row.report {
            Ok(r) if curves.contains(&Curve::LowerBoundNew) => {
                record.push(r.lower_bound_new_witness.s.to_string());
                record.push(r.lower_bound_new_witness.l.to_string());
            }
            _ => record.extend([String::new(), String::new()]),
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    #[default]
    Coded,
    Random,
}

/// Summary of repeated placement, delivery and decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub procedure: Procedure,
    pub trials: usize,
    pub file_size: usize,
    pub base_seed: u64,
    /// Closed-form rate for the demand profile used.
    pub reference_rate: Exact,
    pub mean_rate: f64,
    /// `|mean rate - reference| / reference`.
    pub relative_deviation_of_mean: f64,
    pub mean_relative_deviation: f64,
    pub max_relative_deviation: f64,
    pub decodes: usize,
    pub expected_decodes: usize,
    /// Mean bits per part, normalized by `F`.
    pub part_rates: BTreeMap<PartTag, f64>,
    pub slack_bits: usize,
}

impl ValidationReport {
    pub fn all_decoded(&self) -> bool {
        self.decodes == self.expected_decodes
    }
}

struct Trial {
    rate: f64,
    parts: BTreeMap<PartTag, f64>,
    decodes: usize,
    slack: usize,
}

/// Runs `trials` independent placements (seeds `base_seed..base_seed+trials`)
/// of `config` at file size `file_size`, delivering `profile` each time and
/// decoding every user. Aborts on the first failed decode, in seed order.
pub fn monte_carlo_validate(
    config: &SystemConfig,
    profile: &DemandProfile,
    trials: usize,
    file_size: usize,
    base_seed: u64,
    procedure: Procedure,
) -> Result<ValidationReport, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    let sized = config.with_file_size(file_size);
    let results: Vec<Result<Trial, ExperimentError>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(&sized, profile, base_seed + t, procedure))
        .collect();
    let mut done = Vec::with_capacity(trials);
    for r in results {
        done.push(r?);
    }

    let reference = match procedure {
        Procedure::Coded => analytics::asymptotic_coded_rate(config, profile).total(),
        Procedure::Random => analytics::rate_random_for_profile(config, profile),
    };
    let reference_f = to_f64(&reference);
    let rel = |r: f64| if reference_f == 0.0 { r.abs() } else { (r - reference_f).abs() / reference_f };
    let n = trials as f64;
    let mean_rate = done.iter().map(|t| t.rate).sum::<f64>() / n;
    let mut part_rates = BTreeMap::new();
    for t in &done {
        for (tag, v) in &t.parts {
            *part_rates.entry(*tag).or_insert(0.0) += v / n;
        }
    }
    Ok(ValidationReport {
        procedure,
        trials,
        file_size,
        base_seed,
        reference_rate: Exact(reference),
        mean_rate,
        relative_deviation_of_mean: rel(mean_rate),
        mean_relative_deviation: done.iter().map(|t| rel(t.rate)).sum::<f64>() / n,
        max_relative_deviation: done.iter().map(|t| rel(t.rate)).fold(0.0, f64::max),
        decodes: done.iter().map(|t| t.decodes).sum(),
        expected_decodes: trials * config.num_users(),
        part_rates,
        slack_bits: done.first().map_or(0, |t| t.slack),
    })
}

fn run_trial(config: &SystemConfig, profile: &DemandProfile, seed: u64, procedure: Procedure) -> Result<Trial, ExperimentError> {
    let sim = |e: &dyn std::fmt::Display| ExperimentError::Simulation { seed, message: e.to_string() };
    let network = CachedNetwork::build(config, seed, PlacementMode::ExactSize).map_err(|e| sim(&e))?;
    let transcript = match procedure {
        Procedure::Coded => delivery::coded_delivery_hetero(&network, profile),
        Procedure::Random => delivery::random_delivery(&network, profile, DEFAULT_SLACK_BITS, seed),
    }
    .map_err(|e| sim(&e))?;
    let report = verify_transcript(&network, profile, &transcript);
    if let Some(user) = report.first_failure() {
        return Err(ExperimentError::DecodeFailure { seed, user: user + 1 });
    }
    let f = config.file_size_bits() as f64;
    let payload_bits = transcript.total_bits() - transcript.slack_bits;
    let parts = PartTag::ALL
        .into_iter()
        .filter(|&tag| transcript.segments.iter().any(|s| s.part == tag))
        .map(|tag| (tag, transcript.part_bits(tag) as f64 / f))
        .collect();
    Ok(Trial { rate: payload_bits as f64 / f, parts, decodes: report.users.len(), slack: transcript.slack_bits })
}

/// `x` values `start, start+step, …, end` (inclusive) as exact rationals.
pub fn grid(start: &Rational, end: &Rational, step: &Rational) -> Vec<Rational> {
    assert!(*step > Rational::zero());
    let count = ((end - start) / step).floor().to_integer();
    let count = count.to_usize().unwrap_or(0);
    (0..=count).map(|i| start + step * Rational::from_integer(BigInt::from(i))).collect()
}
