//! Degrees-of-freedom vectors over exact rationals.
//!
//! Users are 0-based in the API and 1-based in every text format. Entries are
//! stored in message order `d_12, ..., d_1K, d_21, d_23, ..., d_K(K-1)`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DofError {
    #[error("user index {user} out of range for {users} users")]
    UserOutOfRange { user: usize, users: usize },
    #[error("a user sends no message to itself (user {0})")]
    SelfPair(usize),
    #[error("DoF entries must be nonnegative, got {0}")]
    Negative(String),
    #[error("expected {expected} entries, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("cannot parse `{0}`")]
    Parse(String),
}

/// Unordered user pair `{a, b}` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserPair {
    a: usize,
    b: usize,
}

impl UserPair {
    pub fn new(x: usize, y: usize) -> Result<Self, DofError> {
        if x == y {
            return Err(DofError::SelfPair(x + 1));
        }
        Ok(Self {
            a: x.min(y),
            b: x.max(y),
        })
    }

    pub fn first(&self) -> usize {
        self.a
    }

    pub fn second(&self) -> usize {
        self.b
    }

    pub fn contains(&self, user: usize) -> bool {
        self.a == user || self.b == user
    }

    /// The other member, if `user` belongs to the pair.
    pub fn partner(&self, user: usize) -> Option<usize> {
        if user == self.a {
            Some(self.b)
        } else if user == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

impl fmt::Display for UserPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a + 1, self.b + 1)
    }
}

/// All unordered pairs in lexicographic order `(1,2), (1,3), ..., (K-1,K)`.
pub fn user_pairs(users: usize) -> Vec<UserPair> {
    (0..users)
        .flat_map(|a| (a + 1..users).map(move |b| UserPair { a, b }))
        .collect()
}

/// All ordered pairs `(j, k)`, `j != k`, in message order.
pub fn directed_pairs(users: usize) -> Vec<(usize, usize)> {
    (0..users)
        .flat_map(|j| (0..users).filter(move |&k| k != j).map(move |k| (j, k)))
        .collect()
}

/// Nonnegative rational `d_jk` for every ordered pair of distinct users.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DofVector {
    users: usize,
    entries: Vec<Rational>,
}

impl DofVector {
    pub fn zeros(users: usize) -> Self {
        Self {
            users,
            entries: vec![Rational::zero(); users * users.saturating_sub(1)],
        }
    }

    pub fn uniform(users: usize, value: Rational) -> Result<Self, DofError> {
        Self::from_entries(users, vec![value; users * users.saturating_sub(1)])
    }

    /// Entries in message order.
    pub fn from_entries(users: usize, entries: Vec<Rational>) -> Result<Self, DofError> {
        let expected = users * users.saturating_sub(1);
        if entries.len() != expected {
            return Err(DofError::WrongLength {
                expected,
                got: entries.len(),
            });
        }
        if let Some(neg) = entries.iter().find(|e| e.is_negative()) {
            return Err(DofError::Negative(neg.to_string()));
        }
        Ok(Self { users, entries })
    }

    /// Integer entries in message order.
    pub fn from_integers(users: usize, entries: &[i64]) -> Result<Self, DofError> {
        Self::from_entries(users, entries.iter().map(|&e| Rational::from_integer(e.into())).collect())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index(&self, from: usize, to: usize) -> Result<usize, DofError> {
        message_index(self.users, from, to)
    }

    pub fn get(&self, from: usize, to: usize) -> &Rational {
        &self.entries[message_index(self.users, from, to).expect("valid message index")]
    }

    pub fn set(&mut self, from: usize, to: usize, value: Rational) -> Result<(), DofError> {
        if value.is_negative() {
            return Err(DofError::Negative(value.to_string()));
        }
        let idx = message_index(self.users, from, to)?;
        self.entries[idx] = value;
        Ok(())
    }

    /// `((j, k), d_jk)` in message order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &Rational)> {
        directed_pairs(self.users).into_iter().zip(self.entries.iter())
    }

    pub fn sum(&self) -> Rational {
        self.entries.iter().fold(Rational::zero(), |acc, e| acc + e)
    }

    pub fn scaled(&self, factor: &Rational) -> Result<Self, DofError> {
        Self::from_entries(self.users, self.entries.iter().map(|e| e * factor).collect())
    }

    /// Copy with users relabelled: entry `(j, k)` moves to `(sigma[j], sigma[k])`.
    pub fn relabelled(&self, sigma: &[usize]) -> Self {
        let mut out = Self::zeros(self.users);
        for ((j, k), v) in self.iter() {
            out.set(sigma[j], sigma[k], v.clone()).expect("sigma is a permutation");
        }
        out
    }

    /// Embeds into a larger user count, new users with zero entries.
    pub fn embedded(&self, users: usize) -> Self {
        assert!(users >= self.users);
        let mut out = Self::zeros(users);
        for ((j, k), v) in self.iter() {
            out.set(j, k, v.clone()).expect("indices in range");
        }
        out
    }

    /// Parses `j-k=value` items separated by commas. `jk=value` is accepted
    /// when both labels are single digits; `all=value` sets every entry.
    /// Values are integers, fractions `p/q`, or decimals. Later items win.
    pub fn parse(users: usize, text: &str) -> Result<Self, DofError> {
        let mut d = Self::zeros(users);
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| DofError::Parse(item.to_string()))?;
            let value = parse_rational(value.trim())?;
            let key = key.trim();
            if key.eq_ignore_ascii_case("all") {
                d = Self::uniform(users, value)?;
                continue;
            }
            let (from, to) = parse_pair_label(key)?;
            d.set(from, to, value)?;
        }
        Ok(d)
    }

    /// Nonzero entries as `j-k=value` in message order; `""` for the zero vector.
    pub fn to_spec_string(&self) -> String {
        self.iter()
            .filter(|(_, v)| !v.is_zero())
            .map(|((j, k), v)| format!("{}-{}={}", j + 1, k + 1, v))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn message_index(users: usize, from: usize, to: usize) -> Result<usize, DofError> {
    for u in [from, to] {
        if u >= users {
            return Err(DofError::UserOutOfRange { user: u + 1, users });
        }
    }
    if from == to {
        return Err(DofError::SelfPair(from + 1));
    }
    Ok(from * (users - 1) + if to < from { to } else { to - 1 })
}

/// Parses a 1-based label `j-k` (or `jk` for single digits) into 0-based users.
pub fn parse_pair_label(key: &str) -> Result<(usize, usize), DofError> {
    let bad = || DofError::Parse(key.to_string());
    let (a, b) = match key.split_once('-') {
        Some((a, b)) => (a.trim().to_string(), b.trim().to_string()),
        None if key.len() == 2 && key.chars().all(|c| c.is_ascii_digit()) => {
            (key[..1].to_string(), key[1..].to_string())
        }
        None => return Err(bad()),
    };
    let a: usize = a.parse().map_err(|_| bad())?;
    let b: usize = b.parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a - 1, b - 1))
}

/// Parses `7`, `-1/2`, `3/4`, or `0.125` exactly.
pub fn parse_rational(text: &str) -> Result<Rational, DofError> {
    let bad = || DofError::Parse(text.to_string());
    if let Some((n, d)) = text.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.trim_start().starts_with('-');
        let int_part = if int.is_empty() || int == "-" || int == "+" {
            BigInt::zero()
        } else {
            BigInt::from_str(int).map_err(|_| bad())?
        };
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let frac_part = BigInt::from_str(frac).map_err(|_| bad())?;
        let magnitude = Rational::new(int_part.abs() * &scale + frac_part, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    BigInt::from_str(text)
        .map(Rational::from_integer)
        .map_err(|_| bad())
}

/// Least common multiple of the reduced denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Rationals serialize as strings (`"3"`, `"1/2"`).
pub fn serialize_rational<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl Serialize for DofVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.entries.len()))?;
        for ((j, k), v) in self.iter() {
            map.serialize_entry(&format!("{}-{}", j + 1, k + 1), &v.to_string())?;
        }
        map.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn message_order_matches_tuple_layout() {
        let pairs = directed_pairs(4);
        assert_eq!(pairs.len(), 12);
        assert_eq!(pairs[0], (0, 1));
        assert_eq!(pairs[2], (0, 3));
        assert_eq!(pairs[3], (1, 0));
        assert_eq!(pairs[4], (1, 2));
        assert_eq!(pairs[11], (3, 2));
        for (i, &(j, k)) in pairs.iter().enumerate() {
            assert_eq!(message_index(4, j, k).unwrap(), i);
        }
    }

    #[test]
    fn lexicographic_pairs() {
        let labels: Vec<String> = user_pairs(4).iter().map(ToString::to_string).collect();
        assert_eq!(labels, ["1-2", "1-3", "1-4", "2-3", "2-4", "3-4"]);
        let p = UserPair::new(3, 1).unwrap();
        assert_eq!((p.first(), p.second()), (1, 3));
        assert_eq!(p.partner(3), Some(1));
        assert_eq!(p.partner(0), None);
        assert!(UserPair::new(2, 2).is_err());
    }

    #[test]
    fn parse_forms() {
        let d = DofVector::parse(4, "1-2=1/2, 21=1/3, 3-4=0.25,4-3=2").unwrap();
        assert_eq!(d.get(0, 1), &q(1, 2));
        assert_eq!(d.get(1, 0), &q(1, 3));
        assert_eq!(d.get(2, 3), &q(1, 4));
        assert_eq!(d.get(3, 2), &q(2, 1));
        assert_eq!(d.get(0, 2), &q(0, 1));
        let all = DofVector::parse(4, "all=1").unwrap();
        assert!(all.entries().iter().all(|e| e == &q(1, 1)));
        assert_eq!(DofVector::parse(3, "all=1,1-2=0").unwrap().get(0, 1), &q(0, 1));
        assert_eq!(d.to_spec_string(), "1-2=1/2,2-1=1/3,3-4=1/4,4-3=2");
        assert_eq!(DofVector::parse(4, &d.to_spec_string()).unwrap(), d);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(DofVector::parse(3, "1-1=1"), Err(DofError::SelfPair(1))));
        assert!(matches!(DofVector::parse(3, "1-4=1"), Err(DofError::UserOutOfRange { .. })));
        assert!(matches!(DofVector::parse(3, "1-2=-1"), Err(DofError::Negative(_))));
        assert!(DofVector::parse(3, "1-2").is_err());
        assert!(DofVector::parse(3, "1-2=1/0").is_err());
        assert!(DofVector::parse(3, "123=1").is_err());
        assert!(DofVector::parse(3, "0-1=1").is_err());
        assert!(DofVector::parse(3, "1-2=x").is_err());
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("7").unwrap(), q(7, 1));
        assert_eq!(parse_rational("6/4").unwrap(), q(3, 2));
        assert_eq!(parse_rational("0.125").unwrap(), q(1, 8));
        assert_eq!(parse_rational("-1.5").unwrap(), q(-3, 2));
        assert_eq!(parse_rational(".5").unwrap(), q(1, 2));
        assert!(parse_rational("1.").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn relabel_and_embed() {
        let d = DofVector::parse(3, "1-2=3,2-3=1").unwrap();
        let r = d.relabelled(&[2, 0, 1]);
        assert_eq!(r.get(2, 0), &q(3, 1));
        assert_eq!(r.get(0, 1), &q(1, 1));
        let e = d.embedded(4);
        assert_eq!(e.users(), 4);
        assert_eq!(e.get(0, 1), &q(3, 1));
        assert_eq!(e.get(3, 0), &q(0, 1));
    }

    #[test]
    fn common_denominator_is_lcm() {
        let vals = [q(3, 4), q(5, 6), q(2, 1)];
        assert_eq!(common_denominator(&vals), BigInt::from(12));
    }

    #[test]
    fn json_uses_one_based_labels() {
        let d = DofVector::parse(3, "1-2=1/2").unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.starts_with(r#"{"1-2":"1/2","1-3":"0","2-1":"0""#), "{json}");
    }
}
