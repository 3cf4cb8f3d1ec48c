//! Demand vectors and the grouping of users by requested file.
//!
//! Users requesting file `i` form group `G_i`. Inside a group users are
//! ordered by ascending cache capacity (ties broken by user label), and the
//! relabeled order lists group 1, then group 2, and so on. All file and user
//! ids here are 0-based.

use std::cmp::Ordering;

use crate::config::SystemConfig;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DemandError {
    #[error("expected {expected} demands (one per user), got {given}")]
    WrongLength { expected: usize, given: usize },
    #[error("user {user} demands file {file}, outside [1:{num_files}]")]
    OutOfRange { user: usize, file: usize, num_files: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandProfile {
    demands: Vec<usize>,
    groups: Vec<Vec<usize>>,
    prefix_sums: Vec<usize>,
    user_order: Vec<usize>,
}

fn by_capacity(config: &SystemConfig) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| config.capacity(a).cmp(config.capacity(b)).then(a.cmp(&b))
}

impl DemandProfile {
    /// Groups users by demand. `demands[k]` is the 0-based file wanted by user `k`.
    pub fn build(config: &SystemConfig, demands: &[usize]) -> Result<Self, DemandError> {
        let (n, k) = (config.num_files(), config.num_users());
        if demands.len() != k {
            return Err(DemandError::WrongLength { expected: k, given: demands.len() });
        }
        let mut groups = vec![Vec::new(); n];
        for (user, &file) in demands.iter().enumerate() {
            if file >= n {
                return Err(DemandError::OutOfRange { user: user + 1, file: file + 1, num_files: n });
            }
            groups[file].push(user);
        }
        for g in &mut groups {
            g.sort_by(by_capacity(config));
        }
        let mut prefix_sums = Vec::with_capacity(n + 1);
        prefix_sums.push(0);
        for g in &groups {
            prefix_sums.push(prefix_sums.last().unwrap() + g.len());
        }
        let user_order = groups.iter().flatten().copied().collect();
        Ok(Self { demands: demands.to_vec(), groups, prefix_sums, user_order })
    }

    /// Demand vector maximizing the coded-delivery rate.
    ///
    /// With fewer files than users the `N` smallest-cache users each lead a
    /// distinct group (smallest cache takes file 0) and the remaining users are
    /// dealt round-robin over the groups. Otherwise every user gets its own
    /// file, again in ascending capacity order.
    pub fn worst_case(config: &SystemConfig) -> Self {
        let n = config.num_files();
        let mut order: Vec<usize> = (0..config.num_users()).collect();
        order.sort_by(by_capacity(config));
        let mut demands = vec![0; config.num_users()];
        for (rank, &user) in order.iter().enumerate() {
            demands[user] = rank % n;
        }
        Self::build(config, &demands).expect("worst-case demands are in range")
    }

    pub fn demands(&self) -> &[usize] {
        &self.demands
    }

    pub fn demand(&self, user: usize) -> usize {
        self.demands[user]
    }

    pub fn num_files(&self) -> usize {
        self.groups.len()
    }

    pub fn num_users(&self) -> usize {
        self.demands.len()
    }

    /// Members of `G_file` in ascending-capacity order.
    pub fn group(&self, file: usize) -> &[usize] {
        &self.groups[file]
    }

    /// `K_i` for every file.
    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// `S_0 = 0, S_1, ..., S_N`.
    pub fn prefix_sums(&self) -> &[usize] {
        &self.prefix_sums
    }

    /// Relabeled position → original user.
    pub fn user_order(&self) -> &[usize] {
        &self.user_order
    }

    /// Smallest-capacity member of `G_file`, if any.
    pub fn leader(&self, file: usize) -> Option<usize> {
        self.groups[file].first().copied()
    }

    /// `(file, members)` for every requested file, ascending by file id.
    pub fn nonempty_groups(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.groups.iter().enumerate().filter(|(_, g)| !g.is_empty()).map(|(i, g)| (i, g.as_slice()))
    }

    /// `N'`: the number of distinct files requested.
    pub fn distinct_requests(&self) -> usize {
        self.groups.iter().filter(|g| !g.is_empty()).count()
    }
}
