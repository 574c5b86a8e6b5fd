//! Index sets and subset enumeration.
//!
//! All public index sets are 1-based and kept sorted, so `{4, 11, 12}` prints
//! as `4 11 12`, the same way the assignment tables are laid out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted set of distinct 1-based indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut items: Vec<usize>) -> Result<Self> {
        items.sort_unstable();
        if items.first() == Some(&0) {
            return Err(Error::InvalidArgument("indices are 1-based; found 0".into()));
        }
        if items.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate index in {items:?}"
            )));
        }
        Ok(Self(items))
    }

    /// `{1, ..., n}`.
    pub fn full(n: usize) -> Self {
        Self((1..=n).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds from 0-based positions (which must already be sorted and distinct).
    pub fn from_zero_based(items: &[usize]) -> Self {
        debug_assert!(items.windows(2).all(|w| w[0] < w[1]));
        Self(items.iter().map(|&i| i + 1).collect())
    }

    pub fn to_zero_based(&self) -> Vec<usize> {
        self.0.iter().map(|&i| i - 1).collect()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn min(&self) -> Option<usize> {
        self.0.first().copied()
    }

    /// Fails unless every element lies in `[n]`.
    pub fn check_within(&self, n: usize, what: &str) -> Result<()> {
        match self.max() {
            Some(m) if m > n => Err(Error::InvalidArgument(format!(
                "{what} contains index {m} outside [1, {n}]"
            ))),
            _ => Ok(()),
        }
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    /// `[n] \ self`.
    pub fn complement(&self, n: usize) -> Self {
        Self((1..=n).filter(|&i| !self.contains(i)).collect())
    }

    pub fn with(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&i) {
            v.insert(pos, i);
        }
        Self(v)
    }

    /// Largest gap between consecutive sorted elements.
    pub fn max_gap(&self) -> usize {
        self.0.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.0
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for i in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{i}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for IndexSet {
    type Err = Error;

    /// Parses whitespace- or comma-separated indices, optionally braced.
    fn from_str(s: &str) -> Result<Self> {
        let items = s
            .trim()
            .trim_start_matches(['{', '['])
            .trim_end_matches(['}', ']'])
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("not an index: `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(items)
    }
}

/// `C(n, r)` in 128-bit arithmetic (saturating on overflow).
pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Pascal table for colexicographic ranking of subsets of `[0, n)`.
#[derive(Clone, Debug)]
pub struct RankTable {
    n: usize,
    table: Vec<Vec<usize>>,
}

impl RankTable {
    pub fn new(n: usize) -> Self {
        let mut table = vec![vec![0usize; n + 2]; n + 1];
        for row in table.iter_mut() {
            row[0] = 1;
        }
        for i in 1..=n {
            for j in 1..=i {
                table[i][j] = table[i - 1][j - 1] + table[i - 1][j];
            }
        }
        Self { n, table }
    }

    #[inline]
    pub fn choose(&self, n: usize, r: usize) -> usize {
        if r > n {
            0
        } else {
            self.table[n][r]
        }
    }

    /// Colex rank of a sorted 0-based subset; ranks of `r`-subsets of `[0, n)`
    /// are dense in `0..C(n, r)`.
    #[inline]
    pub fn rank(&self, subset: &[usize]) -> usize {
        subset
            .iter()
            .enumerate()
            .map(|(i, &c)| self.choose(c, i + 1))
            .sum()
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Calls `f` on every `r`-subset of `[0, n)` in lexicographic order.
pub fn for_each_combination(n: usize, r: usize, mut f: impl FnMut(&[usize])) {
    if r > n {
        return;
    }
    let mut c: Vec<usize> = (0..r).collect();
    loop {
        f(&c);
        let mut i = r;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if c[i] != i + n - r {
                break;
            }
            if i == 0 {
                return;
            }
        }
        c[i] += 1;
        for j in i + 1..r {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// All `r`-subsets of `[0, n)` in lexicographic order.
pub fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_combination(n, r, |c| out.push(c.to_vec()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(21, 12), 293_930);
        assert_eq!(binomial(12, 3), 220);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn enumeration_counts_and_order() {
        let all = combinations(5, 2);
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[9], vec![3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn colex_rank_is_a_bijection() {
        let t = RankTable::new(9);
        let mut seen = vec![false; binomial(9, 4) as usize];
        for_each_combination(9, 4, |c| {
            let r = t.rank(c);
            assert!(!seen[r]);
            seen[r] = true;
        });
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn index_set_parse_and_display() {
        let s: IndexSet = "4 11 12, 13".parse().unwrap();
        assert_eq!(s.to_string(), "4 11 12 13");
        assert_eq!("{3 1 2}".parse::<IndexSet>().unwrap().as_slice(), &[1, 2, 3]);
        assert!("1 1".parse::<IndexSet>().is_err());
        assert!("0 2".parse::<IndexSet>().is_err());
        assert!("1 x".parse::<IndexSet>().is_err());
        assert_eq!(s.complement(13).to_string(), "1 2 3 5 6 7 8 9 10");
        assert_eq!(s.max_gap(), 7);
    }
}
