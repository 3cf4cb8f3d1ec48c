//! System configuration: library size, users and their cache capacities.

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{to_exact_string, Literal, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("number of files must be positive")]
    NoFiles,
    #[error("configuration has no participating users")]
    NoUsers,
    #[error("file size must be at least one bit")]
    EmptyFiles,
    #[error("declared K = {declared} but {given} capacities were given")]
    UserCountMismatch { declared: usize, given: usize },
    #[error("user {user} has negative cache capacity {capacity}")]
    NegativeCapacity { user: usize, capacity: String },
    #[error("user {user} has cache capacity {capacity} >= N = {num_files}; pass --drop-full-cache to exclude such users")]
    FullCache { user: usize, capacity: String, num_files: usize },
}

/// What to do with users whose cache can hold the whole library.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FullCachePolicy {
    #[default]
    Reject,
    /// Remove them; they never need anything delivered.
    Drop,
}

/// `N` files of `F` bits each, `K` users with capacities `M_k` (in files).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemConfig {
    num_files: usize,
    capacities: Vec<Rational>,
    file_size_bits: usize,
    /// Original (1-based) labels of users removed under [`FullCachePolicy::Drop`].
    dropped_users: Vec<usize>,
}

impl SystemConfig {
    pub fn new(num_files: usize, capacities: Vec<Rational>, file_size_bits: usize) -> Result<Self, ConfigError> {
        Self::with_policy(num_files, capacities, file_size_bits, FullCachePolicy::Reject)
    }

    pub fn with_policy(
        num_files: usize,
        capacities: Vec<Rational>,
        file_size_bits: usize,
        policy: FullCachePolicy,
    ) -> Result<Self, ConfigError> {
        if num_files == 0 {
            return Err(ConfigError::NoFiles);
        }
        if file_size_bits == 0 {
            return Err(ConfigError::EmptyFiles);
        }
        let n = Rational::from_integer(num_files.into());
        let mut kept = Vec::with_capacity(capacities.len());
        let mut dropped_users = Vec::new();
        for (k, m) in capacities.into_iter().enumerate() {
            if m.is_negative() {
                return Err(ConfigError::NegativeCapacity { user: k + 1, capacity: to_exact_string(&m) });
            }
            if m >= n {
                match policy {
                    FullCachePolicy::Reject => {
                        return Err(ConfigError::FullCache {
                            user: k + 1,
                            capacity: to_exact_string(&m),
                            num_files,
                        })
                    }
                    FullCachePolicy::Drop => {
                        dropped_users.push(k + 1);
                        continue;
                    }
                }
            }
            kept.push(m);
        }
        if kept.is_empty() {
            return Err(ConfigError::NoUsers);
        }
        Ok(Self { num_files, capacities: kept, file_size_bits, dropped_users })
    }

    pub fn num_files(&self) -> usize {
        self.num_files
    }

    pub fn num_users(&self) -> usize {
        self.capacities.len()
    }

    pub fn capacities(&self) -> &[Rational] {
        &self.capacities
    }

    pub fn capacity(&self, user: usize) -> &Rational {
        &self.capacities[user]
    }

    pub fn file_size_bits(&self) -> usize {
        self.file_size_bits
    }

    pub fn dropped_users(&self) -> &[usize] {
        &self.dropped_users
    }

    pub fn n_rational(&self) -> Rational {
        Rational::from_integer(self.num_files.into())
    }

    /// Fraction `M_k / N` of each file cached by user `k`.
    pub fn cache_fraction(&self, user: usize) -> Rational {
        &self.capacities[user] / self.n_rational()
    }

    pub fn is_uniform(&self) -> bool {
        self.capacities.windows(2).all(|w| w[0] == w[1])
    }

    pub fn all_zero(&self) -> bool {
        self.capacities.iter().all(Zero::is_zero)
    }

    #[must_use]
    pub fn with_file_size(&self, file_size_bits: usize) -> Self {
        assert!(file_size_bits > 0);
        Self { file_size_bits, ..self.clone() }
    }

    /// Copy with users reordered: user `j` of the result is user `order[j]` here.
    #[must_use]
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.num_users());
        Self { capacities: order.iter().map(|&k| self.capacities[k].clone()).collect(), ..self.clone() }
    }
}

/// On-disk configuration record.
///
/// `{"N": 2, "K": 4, "M": ["1/8", "0.25", 0.5, "1"], "F": 4096, "seed": 7}`;
/// capacities may be `p/q` strings, decimal strings or JSON numbers. The
/// optional `demands` list holds 1-based file ids, one per user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigRecord {
    #[serde(rename = "N")]
    pub num_files: usize,
    #[serde(rename = "K")]
    pub num_users: usize,
    #[serde(rename = "M")]
    pub capacities: Vec<Literal>,
    #[serde(rename = "F")]
    pub file_size_bits: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demands: Option<Vec<usize>>,
}

impl ConfigRecord {
    pub fn from_config(config: &SystemConfig, seed: u64) -> Self {
        Self {
            num_files: config.num_files(),
            num_users: config.num_users(),
            capacities: config.capacities().iter().cloned().map(Literal).collect(),
            file_size_bits: config.file_size_bits(),
            seed,
            demands: None,
        }
    }

    pub fn to_config(&self, policy: FullCachePolicy) -> Result<SystemConfig, ConfigError> {
        if self.capacities.len() != self.num_users {
            return Err(ConfigError::UserCountMismatch { declared: self.num_users, given: self.capacities.len() });
        }
        SystemConfig::with_policy(
            self.num_files,
            self.capacities.iter().map(|l| l.0.clone()).collect(),
            self.file_size_bits,
            policy,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn rejects_full_cache_by_default() {
        let err = SystemConfig::new(2, vec![ratio(1, 2), int(2)], 8).unwrap_err();
        assert!(matches!(err, ConfigError::FullCache { user: 2, .. }));
    }

    #[test]
    fn drop_policy_removes_full_cache_users() {
        let cfg = SystemConfig::with_policy(2, vec![int(3), ratio(1, 2), int(2)], 8, FullCachePolicy::Drop).unwrap();
        assert_eq!(cfg.num_users(), 1);
        assert_eq!(cfg.dropped_users(), &[1, 3]);
        let err = SystemConfig::with_policy(1, vec![int(1)], 8, FullCachePolicy::Drop).unwrap_err();
        assert_eq!(err, ConfigError::NoUsers);
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert_eq!(SystemConfig::new(0, vec![int(0)], 8).unwrap_err(), ConfigError::NoFiles);
        assert_eq!(SystemConfig::new(1, vec![int(0)], 0).unwrap_err(), ConfigError::EmptyFiles);
        assert_eq!(SystemConfig::new(1, vec![], 8).unwrap_err(), ConfigError::NoUsers);
        assert!(matches!(
            SystemConfig::new(1, vec![int(-1)], 8).unwrap_err(),
            ConfigError::NegativeCapacity { .. }
        ));
    }

    #[test]
    fn record_parses_mixed_literals() {
        let rec: ConfigRecord =
            serde_json::from_str(r#"{"N":2,"K":4,"M":["1/8","0.25",0.5,1],"F":100,"seed":9}"#).unwrap();
        let cfg = rec.to_config(FullCachePolicy::Reject).unwrap();
        assert_eq!(cfg.capacities(), &[ratio(1, 8), ratio(1, 4), ratio(1, 2), int(1)]);
        assert_eq!(rec.seed, 9);

        let bad: ConfigRecord = serde_json::from_str(r#"{"N":2,"K":3,"M":[0,0],"F":1}"#).unwrap();
        assert!(matches!(bad.to_config(FullCachePolicy::Reject), Err(ConfigError::UserCountMismatch { .. })));
    }
}
