//! User subsets as bitmasks and the subfile index `(file, subset)`.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest user count for which subsets are materialized.
pub const MAX_SUBSET_USERS: usize = 30;

/// Subset of users; bit `k` set means user `k` (0-based, original labels).
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserSet(u32);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    pub fn from_bits(bits: u32) -> Self {
        UserSet(bits)
    }

    pub fn singleton(user: usize) -> Self {
        debug_assert!(user < MAX_SUBSET_USERS);
        UserSet(1 << user)
    }

    pub fn from_users<I: IntoIterator<Item = usize>>(users: I) -> Self {
        users.into_iter().fold(Self::EMPTY, |acc, u| acc.with(u))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, user: usize) -> bool {
        user < 32 && (self.0 >> user) & 1 == 1
    }

    #[must_use]
    pub fn with(self, user: usize) -> Self {
        UserSet(self.0 | (1 << user))
    }

    #[must_use]
    pub fn without(self, user: usize) -> Self {
        UserSet(self.0 & !(1 << user))
    }

    /// Members in ascending order.
    pub fn users(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let u = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(u)
        })
    }
}

impl fmt::Debug for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, u) in self.users().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            // 1-based, as users are conventionally written
            write!(f, "{}", u + 1)?;
        }
        write!(f, "}}")
    }
}

/// `W_{file, users}`: the bits of `file` cached by exactly `users`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubfileIndex {
    pub file: usize,
    pub users: UserSet,
}

impl SubfileIndex {
    pub fn new(file: usize, users: UserSet) -> Self {
        Self { file, users }
    }
}

impl fmt::Debug for SubfileIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W[{},{:?}]", self.file + 1, self.users)
    }
}
