//! The DoF region polytope in exact rationals.
//!
//! A DoF vector is in the region iff every ordering `p` of the users
//! satisfies `sum_{a < b} d_{p_a p_b} <= N`: each ordering picks one
//! direction per pair (the one running forward in `p`) and bounds their sum.
//! The direct alignment layout needs the stronger `sum_pairs max(d_jk, d_kj)
//! <= N`; [`find_construction_gap`] searches for region points where the two
//! disagree.

pub mod simplex;
mod vertices;

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::alignment::pair_max_sum;
use crate::dof::{common_denominator, directed_pairs, serialize_rational, user_pairs, DofError, DofVector, Rational, UserPair};
pub use simplex::{LinearProgram, LpError, LpSolution};
pub use vertices::{vertices_k3, MAX_VERTEX_ANTENNAS};

/// Largest user count for exhaustive permutation checks.
pub const MAX_MEMBERSHIP_USERS: usize = 8;
/// Largest user count for the full sum-DoF linear program.
pub const MAX_LP_USERS: usize = 5;
/// Largest user count for the construction-gap probe.
pub const MAX_GAP_USERS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("{operation} supports at most {limit} users, got {users}")]
    TooLarge {
        operation: &'static str,
        users: usize,
        limit: usize,
    },
    #[error("invalid region: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dof(#[from] DofError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegionSpec {
    pub users: usize,
    pub relay_antennas: usize,
}

impl RegionSpec {
    pub fn new(users: usize, relay_antennas: usize) -> Result<Self, RegionError> {
        if users < 3 || relay_antennas < 1 {
            return Err(RegionError::Invalid(format!(
                "need K >= 3 and N >= 1, got K = {users}, N = {relay_antennas}"
            )));
        }
        Ok(Self { users, relay_antennas })
    }

    fn bound(&self) -> Rational {
        Rational::from_integer(self.relay_antennas.into())
    }

    fn check_users(&self, d: &DofVector) -> Result<(), RegionError> {
        if d.users() != self.users {
            return Err(RegionError::Invalid(format!("{}-user vector for a {}-user region", d.users(), self.users)));
        }
        Ok(())
    }

    fn guard(&self, operation: &'static str, limit: usize) -> Result<(), RegionError> {
        if self.users > limit {
            return Err(RegionError::TooLarge {
                operation,
                users: self.users,
                limit,
            });
        }
        Ok(())
    }
}

fn serialize_one_based<S: Serializer>(p: &[usize], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(p.iter().map(|x| x + 1))
}

fn serialize_perms<S: Serializer>(ps: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(ps.iter().map(|p| p.iter().map(|x| x + 1).collect::<Vec<_>>()))
}

/// One ordering and its constraint value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PermutationValue {
    #[serde(serialize_with = "serialize_one_based")]
    pub permutation: Vec<usize>,
    #[serde(serialize_with = "serialize_rational")]
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MembershipVerdict {
    pub member: bool,
    #[serde(serialize_with = "serialize_rational")]
    pub bound: Rational,
    /// Largest constraint value over all orderings, at its first ordering.
    pub max: PermutationValue,
    /// The maximizing ordering again when a constraint is violated.
    pub witness: Option<PermutationValue>,
    /// Orderings meeting the bound with equality, when `member`.
    #[serde(serialize_with = "serialize_perms")]
    pub tight: Vec<Vec<usize>>,
}

/// `sum_{a < b} d_{p_a p_b}` for an ordering `p` of `0..K`.
pub fn permutation_constraint(d: &DofVector, p: &[usize]) -> Result<Rational, RegionError> {
    let k = d.users();
    let mut seen = vec![false; k];
    if p.len() != k || p.iter().any(|&x| x >= k || std::mem::replace(&mut seen[x], true)) {
        return Err(RegionError::Invalid(format!("{p:?} is not a permutation of {k} users")));
    }
    let mut sum = Rational::zero();
    for a in 0..k {
        for b in a + 1..k {
            sum += d.get(p[a], p[b]);
        }
    }
    Ok(sum)
}

/// 0/1 row of an ordering's constraint over message-order coordinates.
fn permutation_row(users: usize, p: &[usize]) -> Vec<bool> {
    let mut pos = vec![0; users];
    for (i, &u) in p.iter().enumerate() {
        pos[u] = i;
    }
    directed_pairs(users).into_iter().map(|(j, k)| pos[j] < pos[k]).collect()
}

/// All `K!` orderings in lexicographic order with their constraint rows.
fn permutation_rows(users: usize) -> Vec<(Vec<usize>, Vec<bool>)> {
    (0..users)
        .permutations(users)
        .map(|p| {
            let row = permutation_row(users, &p);
            (p, row)
        })
        .collect()
}

/// Checks every ordering exactly.
pub fn is_member(d: &DofVector, spec: &RegionSpec) -> Result<MembershipVerdict, RegionError> {
    spec.check_users(d)?;
    spec.guard("is_member", MAX_MEMBERSHIP_USERS)?;
    // integer arithmetic on a common denominator
    let den = common_denominator(d.entries());
    let nums: Vec<BigInt> = d.entries().iter().map(|x| (x * &den).to_integer()).collect();
    let bound = BigInt::from(spec.relay_antennas) * &den;

    let mut best: Option<(Vec<usize>, BigInt)> = None;
    let mut tight = Vec::new();
    for (p, row) in permutation_rows(spec.users) {
        let sum: BigInt = nums.iter().zip(&row).filter(|(_, &on)| on).map(|(x, _)| x).sum();
        if sum == bound {
            tight.push(p.clone());
        }
        if best.as_ref().is_none_or(|(_, b)| sum > *b) {
            best = Some((p, sum));
        }
    }
    let (perm, max) = best.expect("at least one ordering");
    let member = max <= bound;
    let max = PermutationValue {
        permutation: perm,
        value: Rational::new(max, den),
    };
    Ok(MembershipVerdict {
        member,
        bound: spec.bound(),
        witness: (!member).then(|| max.clone()),
        max,
        tight: if member { tight } else { Vec::new() },
    })
}

/// Constraint rows of the region LP over the given coordinates.
fn region_program(spec: &RegionSpec, columns: &[usize], objective: Vec<Rational>) -> Result<LinearProgram, RegionError> {
    let rows = permutation_rows(spec.users)
        .into_iter()
        .map(|(_, row)| {
            columns
                .iter()
                .map(|&c| if row[c] { Rational::one() } else { Rational::zero() })
                .collect()
        })
        .collect::<Vec<Vec<Rational>>>();
    let bounds = vec![spec.bound(); rows.len()];
    Ok(LinearProgram::new(rows, bounds, objective)?)
}

fn point_from(spec: &RegionSpec, columns: &[usize], values: &[Rational]) -> DofVector {
    let mut entries = vec![Rational::zero(); spec.users * (spec.users - 1)];
    for (&c, v) in columns.iter().zip(values) {
        entries[c] = v.clone();
    }
    DofVector::from_entries(spec.users, entries).expect("LP solutions are nonnegative")
}

/// Optimal sum-DoF with the maximizing point and an exact certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SumDofResult {
    #[serde(serialize_with = "serialize_rational")]
    pub value: Rational,
    pub maximizer: DofVector,
    /// Dual multipliers, one per ordering in lexicographic order.
    #[serde(serialize_with = "serialize_rationals")]
    pub dual: Vec<Rational>,
    pub basis: Vec<usize>,
    #[serde(skip)]
    program: LinearProgram,
    #[serde(skip)]
    solution: LpSolution,
}

fn serialize_rationals<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

impl SumDofResult {
    /// Re-verifies primal feasibility, dual feasibility and zero gap.
    pub fn verify(&self) -> bool {
        self.solution.verify(&self.program)
    }
}

/// Maximizes `sum d_jk` over the region.
pub fn sum_dof_max(spec: &RegionSpec) -> Result<SumDofResult, RegionError> {
    spec.guard("sum_dof_max", MAX_LP_USERS)?;
    let columns: Vec<usize> = (0..spec.users * (spec.users - 1)).collect();
    let program = region_program(spec, &columns, vec![Rational::one(); columns.len()])?;
    let solution = program.maximize()?;
    Ok(SumDofResult {
        value: solution.value.clone(),
        maximizer: point_from(spec, &columns, &solution.primal),
        dual: solution.dual.clone(),
        basis: solution.basis.clone(),
        program,
        solution,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstructionCheck {
    pub feasible: bool,
    #[serde(serialize_with = "serialize_rational")]
    pub pair_max_sum: Rational,
}

/// `sum_pairs max(d_jk, d_kj) <= N`.
pub fn construction_feasible(d: &DofVector, relay_antennas: usize) -> ConstructionCheck {
    let pair_max_sum = pair_max_sum(d);
    ConstructionCheck {
        feasible: pair_max_sum <= Rational::from_integer(relay_antennas.into()),
        pair_max_sum,
    }
}

/// A region point the direct alignment layout cannot carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapWitness {
    pub point: DofVector,
    /// 1-based `[from, to]` of the direction chosen for each pair.
    pub selection: Vec<[usize; 2]>,
    /// LP optimum of the selected directions' sum.
    #[serde(serialize_with = "serialize_rational")]
    pub selected_sum: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub pair_max_sum: Rational,
}

/// Searches all per-pair direction selections for a region point whose
/// selected directed sum exceeds `N`. Returns the largest such optimum (first
/// selection on ties), or `None` if every optimum is at most `N`.
pub fn find_construction_gap(spec: &RegionSpec) -> Result<Option<GapWitness>, RegionError> {
    find_construction_gap_restricted(spec, &user_pairs(spec.users))
}

/// [`find_construction_gap`] with every message outside `allowed` fixed to zero.
pub fn find_construction_gap_restricted(spec: &RegionSpec, allowed: &[UserPair]) -> Result<Option<GapWitness>, RegionError> {
    spec.guard("find_construction_gap", MAX_GAP_USERS)?;
    if let Some(p) = allowed.iter().find(|p| p.second() >= spec.users) {
        return Err(RegionError::Invalid(format!("pair {p} outside a {}-user region", spec.users)));
    }
    let pairs: Vec<UserPair> = allowed.iter().copied().unique().collect();
    let probe = DofVector::zeros(spec.users);
    let mut columns = Vec::with_capacity(2 * pairs.len());
    for p in &pairs {
        columns.push(probe.index(p.first(), p.second())?);
        columns.push(probe.index(p.second(), p.first())?);
    }
    let bound = spec.bound();
    let mut best: Option<GapWitness> = None;
    for mask in 0u64..1 << pairs.len() {
        let selection: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if mask >> i & 1 == 0 {
                    (p.first(), p.second())
                } else {
                    (p.second(), p.first())
                }
            })
            .collect();
        let objective = (0..columns.len())
            .map(|c| {
                let reverse = mask >> (c / 2) & 1 == 1;
                if (c % 2 == 1) == reverse {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        let solution = region_program(spec, &columns, objective)?.maximize()?;
        if solution.value > bound && best.as_ref().is_none_or(|b| solution.value > b.selected_sum) {
            let point = point_from(spec, &columns, &solution.primal);
            best = Some(GapWitness {
                pair_max_sum: pair_max_sum(&point),
                point,
                selection: selection.iter().map(|&(j, k)| [j + 1, k + 1]).collect(),
                selected_sum: solution.value,
            });
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn spec(k: usize, n: usize) -> RegionSpec {
        RegionSpec::new(k, n).unwrap()
    }

    fn cycle() -> DofVector {
        DofVector::parse(4, "1-2=3,2-3=3,3-1=3").unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(RegionSpec::new(2, 1).is_err());
        assert!(RegionSpec::new(3, 0).is_err());
    }

    #[test]
    fn permutation_constraint_examples() {
        let ones = DofVector::uniform(4, q(1, 1)).unwrap();
        for p in (0..4).permutations(4) {
            assert_eq!(permutation_constraint(&ones, &p).unwrap(), q(6, 1));
        }
        // reverse ordering picks exactly the reverse-direction messages
        let d = DofVector::parse(4, "2-1=1,3-1=2,4-1=3,3-2=5,4-2=7,4-3=11,1-2=100").unwrap();
        assert_eq!(permutation_constraint(&d, &[3, 2, 1, 0]).unwrap(), q(1 + 2 + 3 + 5 + 7 + 11, 1));
        assert_eq!(permutation_constraint(&cycle(), &[0, 1, 2, 3]).unwrap(), q(6, 1));
        assert!(permutation_constraint(&cycle(), &[0, 0, 1, 2]).is_err());
        assert!(permutation_constraint(&cycle(), &[0, 1, 2]).is_err());
    }

    #[test]
    fn membership_examples() {
        let s = spec(4, 6);
        let v = is_member(&DofVector::uniform(4, q(1, 1)).unwrap(), &s).unwrap();
        assert!(v.member && v.witness.is_none());
        assert_eq!(v.tight.len(), 24);

        let v = is_member(&DofVector::parse(4, "1-2=7").unwrap(), &s).unwrap();
        assert!(!v.member);
        let w = v.witness.unwrap();
        assert_eq!(w.value, q(7, 1));
        let pos = |u| w.permutation.iter().position(|&x| x == u).unwrap();
        assert!(pos(0) < pos(1));
        assert!(v.tight.is_empty());

        // orderings consistent with the cycle 1 -> 2 -> 3 -> 1 pick two of its
        // edges (value 6), the other half pick one (value 3)
        let v = is_member(&cycle(), &s).unwrap();
        assert!(v.member);
        assert_eq!(v.max.value, q(6, 1));
        assert_eq!(v.tight.len(), 12);
        for p in (0..4).permutations(4) {
            let value = permutation_constraint(&cycle(), &p).unwrap();
            assert!(value == q(6, 1) || value == q(3, 1));
            assert_eq!(value == q(6, 1), v.tight.contains(&p));
        }

        assert!(matches!(
            is_member(&DofVector::zeros(9), &spec(9, 1)),
            Err(RegionError::TooLarge { .. })
        ));
        assert!(is_member(&DofVector::zeros(3), &s).is_err());
    }

    #[test]
    fn membership_matches_direct_enumeration() {
        let s = spec(4, 3);
        let d = DofVector::parse(4, "1-2=1/2,2-1=3/2,1-3=1,3-4=2/3,4-2=1/3,2-3=1/6").unwrap();
        let max = (0..4)
            .permutations(4)
            .map(|p| permutation_constraint(&d, &p).unwrap())
            .max()
            .unwrap();
        let v = is_member(&d, &s).unwrap();
        assert_eq!(v.max.value, max);
        assert_eq!(v.member, max <= q(3, 1));
    }

    #[test]
    fn sum_dof_examples() {
        let r = sum_dof_max(&spec(4, 6)).unwrap();
        assert_eq!(r.value, q(12, 1));
        assert!(r.verify());
        assert!(is_member(&r.maximizer, &spec(4, 6)).unwrap().member);
        assert_eq!(r.maximizer.sum(), q(12, 1));
        let pair = DofVector::parse(4, "1-2=6,2-1=6").unwrap();
        assert!(is_member(&pair, &spec(4, 6)).unwrap().member);

        assert_eq!(sum_dof_max(&spec(3, 1)).unwrap().value, q(2, 1));

        assert_eq!(sum_dof_max(&spec(4, 5)).unwrap().value, q(10, 1));
        let sym = DofVector::uniform(4, q(5, 6)).unwrap();
        assert_eq!(sym.sum(), q(10, 1));
        assert!(is_member(&sym, &spec(4, 5)).unwrap().member);

        assert!(matches!(sum_dof_max(&spec(6, 1)), Err(RegionError::TooLarge { .. })));
    }

    #[test]
    fn sum_dof_is_twice_antennas() {
        for k in 3..=4 {
            for n in 1..=8 {
                let r = sum_dof_max(&spec(k, n)).unwrap();
                assert_eq!(r.value, q(2 * n as i64, 1), "K={k} N={n}");
                assert!(r.verify());
            }
        }
        assert_eq!(sum_dof_max(&spec(5, 2)).unwrap().value, q(4, 1));
    }

    #[test]
    fn construction_examples() {
        let c = construction_feasible(&DofVector::uniform(4, q(1, 1)).unwrap(), 6);
        assert!(c.feasible && c.pair_max_sum == q(6, 1));
        let c = construction_feasible(&DofVector::parse(4, "1-2=6,2-1=6").unwrap(), 6);
        assert!(c.feasible && c.pair_max_sum == q(6, 1));
        let c = construction_feasible(&cycle(), 6);
        assert!(!c.feasible && c.pair_max_sum == q(9, 1));
    }

    #[test]
    fn gap_probe_finds_member_witness() {
        let s = spec(4, 6);
        let w = find_construction_gap(&s).unwrap().expect("gap exists");
        assert!(is_member(&w.point, &s).unwrap().member);
        let c = construction_feasible(&w.point, 6);
        assert!(!c.feasible);
        assert_eq!(c.pair_max_sum, w.pair_max_sum);
        assert!(w.selected_sum > q(6, 1));
        assert_eq!(w.selection.len(), 6);
    }

    #[test]
    fn gap_probe_single_pair_has_no_gap() {
        let s = spec(4, 6);
        let only = [UserPair::new(0, 1).unwrap()];
        assert_eq!(find_construction_gap_restricted(&s, &only).unwrap(), None);
        let too_many = spec(5, 6);
        assert!(matches!(find_construction_gap(&too_many), Err(RegionError::TooLarge { .. })));
    }

    #[test]
    fn verdict_json_is_one_based() {
        let v = is_member(&DofVector::parse(3, "1-2=2").unwrap(), &spec(3, 1)).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["member"], false);
        assert_eq!(json["witness"]["permutation"], serde_json::json!([1, 2, 3]));
        assert_eq!(json["witness"]["value"], "2");
    }
}
