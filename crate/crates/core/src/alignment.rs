//! Uplink signal-space alignment layout.
//!
//! Every unordered pair `{j, k}` owns one contiguous slot of the relay word.
//! Both users of the pair write into that slot, so the relay observes the sum
//! of the two opposite-direction streams there. Slot lengths are
//! `l_jk = max(T d_jk, T d_kj)`, slots follow lexicographic pair order, and
//! `l_0 = T N - sum l_jk` zeros pad the end of the word.
//!
//! JSON schema of a [`StreamPlan`] (users are 1-based):
//!
//! ```text
//! {
//!   "users": 4, "relay_antennas": 6, "extension": 1,
//!   "word_length": 6, "padding": 0,
//!   "slots": [ { "pair": [1, 2], "offset": 0, "length": 1,
//!                "forward": 1, "reverse": 1 }, ... ]
//! }
//! ```
//!
//! `forward` is `T d_ab` for the slot's pair `[a, b]`, `reverse` is `T d_ba`.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::dof::{common_denominator, directed_pairs, user_pairs, DofError, DofVector, Rational, UserPair};
use crate::linalg::CVector;
use crate::rng::StreamRng;

/// Largest relay word `T * N` a plan may describe.
pub const MAX_WORD_LENGTH: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("{from}->{to}: T * d = {value} is not an integer")]
    NonIntegral { from: usize, to: usize, value: String },
    #[error("infeasible: sum of pair maxima {total} exceeds N = {relay_antennas} by {excess}")]
    Infeasible {
        total: Rational,
        relay_antennas: usize,
        excess: Rational,
    },
    #[error("symbol extension {0} makes the relay word too long")]
    ExtensionTooLarge(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Dof(#[from] DofError),
}

/// `max(T d_jk, T d_kj)` for every pair in lexicographic order.
pub fn pair_lengths(d: &DofVector, extension: usize) -> Result<Vec<(UserPair, usize)>, PlanError> {
    let counts = stream_counts(d, extension)?;
    let users = d.users();
    Ok(user_pairs(users)
        .into_iter()
        .map(|p| {
            let fwd = counts[d.index(p.first(), p.second()).expect("valid pair")];
            let rev = counts[d.index(p.second(), p.first()).expect("valid pair")];
            (p, fwd.max(rev))
        })
        .collect())
}

/// Integer stream lengths `T d_jk` in message order.
fn stream_counts(d: &DofVector, extension: usize) -> Result<Vec<usize>, PlanError> {
    let t = Rational::from_integer(BigInt::from(extension));
    d.iter()
        .map(|((j, k), v)| {
            let scaled = v * &t;
            if !scaled.is_integer() {
                return Err(PlanError::NonIntegral {
                    from: j + 1,
                    to: k + 1,
                    value: scaled.to_string(),
                });
            }
            scaled
                .to_integer()
                .to_usize()
                .filter(|&c| c <= MAX_WORD_LENGTH)
                .ok_or_else(|| PlanError::ExtensionTooLarge(extension.to_string()))
        })
        .collect()
}

/// Smallest `T` making every `T d_jk` an integer.
pub fn minimal_extension(d: &DofVector) -> BigInt {
    common_denominator(d.entries())
}

/// `sum over pairs of max(d_jk, d_kj)`, the relay dimensions the layout consumes.
pub fn pair_max_sum(d: &DofVector) -> Rational {
    user_pairs(d.users())
        .into_iter()
        .map(|p| d.get(p.first(), p.second()).max(d.get(p.second(), p.first())).clone())
        .fold(Rational::zero(), |acc, x| acc + x)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairSlot {
    #[serde(serialize_with = "serialize_pair")]
    pub pair: UserPair,
    pub offset: usize,
    pub length: usize,
    /// `T d_ab` for `pair = {a, b}`, `a < b`.
    pub forward: usize,
    /// `T d_ba`.
    pub reverse: usize,
}

fn serialize_pair<S: Serializer>(p: &UserPair, s: S) -> Result<S::Ok, S::Error> {
    [p.first() + 1, p.second() + 1].serialize(s)
}

impl PairSlot {
    /// Number of symbols user `from` sends inside this slot.
    pub fn stream_len(&self, from: usize) -> usize {
        if from == self.pair.first() {
            self.forward
        } else {
            self.reverse
        }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StreamPlan {
    pub users: usize,
    pub relay_antennas: usize,
    pub extension: usize,
    pub word_length: usize,
    pub padding: usize,
    pub slots: Vec<PairSlot>,
}

impl StreamPlan {
    pub fn slot(&self, pair: UserPair) -> Option<&PairSlot> {
        self.slots.iter().find(|s| s.pair == pair)
    }

    pub fn slot_between(&self, a: usize, b: usize) -> Result<&PairSlot, PlanError> {
        let pair = UserPair::new(a, b)?;
        self.slot(pair)
            .ok_or_else(|| PlanError::Dimension(format!("no slot for pair {pair}")))
    }

    /// `T d_jk`.
    pub fn stream_len(&self, from: usize, to: usize) -> Result<usize, PlanError> {
        Ok(self.slot_between(from, to)?.stream_len(from))
    }

    /// Directed streams with at least one symbol, in message order.
    pub fn active_streams(&self) -> Vec<(usize, usize)> {
        directed_pairs(self.users)
            .into_iter()
            .filter(|&(j, k)| self.stream_len(j, k).is_ok_and(|n| n > 0))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Lays out the relay word for `d` over `N` relay dimensions with the minimal extension.
pub fn build_stream_plan(d: &DofVector, relay_antennas: usize) -> Result<StreamPlan, PlanError> {
    let total = pair_max_sum(d);
    let n = Rational::from_integer(BigInt::from(relay_antennas));
    if total > n {
        return Err(PlanError::Infeasible {
            excess: &total - &n,
            total,
            relay_antennas,
        });
    }
    let t_big = minimal_extension(d);
    let extension = t_big
        .to_usize()
        .filter(|t| t.checked_mul(relay_antennas).is_some_and(|w| w <= MAX_WORD_LENGTH))
        .ok_or_else(|| PlanError::ExtensionTooLarge(t_big.to_string()))?;
    let word_length = extension * relay_antennas;
    let counts = stream_counts(d, extension)?;
    let mut offset = 0;
    let mut slots = Vec::new();
    for pair in user_pairs(d.users()) {
        let forward = counts[d.index(pair.first(), pair.second())?];
        let reverse = counts[d.index(pair.second(), pair.first())?];
        let length = forward.max(reverse);
        slots.push(PairSlot {
            pair,
            offset,
            length,
            forward,
            reverse,
        });
        offset += length;
    }
    debug_assert!(offset <= word_length);
    Ok(StreamPlan {
        users: d.users(),
        relay_antennas,
        extension,
        word_length,
        padding: word_length - offset,
        slots,
    })
}

/// Codeword symbols `v_jk` of length `T d_jk` for every ordered pair, in message order.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSymbols {
    users: usize,
    streams: Vec<CVector>,
}

impl StreamSymbols {
    pub fn zeros(plan: &StreamPlan) -> Self {
        let streams = directed_pairs(plan.users)
            .into_iter()
            .map(|(j, k)| CVector::zeros(plan.stream_len(j, k).expect("valid pair")))
            .collect();
        Self {
            users: plan.users,
            streams,
        }
    }

    /// Unit-variance `CN(0, 1)` symbols, drawn in message order.
    pub fn random(plan: &StreamPlan, rng: &mut StreamRng) -> Self {
        let streams = directed_pairs(plan.users)
            .into_iter()
            .map(|(j, k)| rng.complex_gaussian_vec(plan.stream_len(j, k).expect("valid pair")))
            .collect();
        Self {
            users: plan.users,
            streams,
        }
    }

    /// Streams in message order; lengths are checked against `plan`.
    pub fn from_streams(plan: &StreamPlan, streams: Vec<CVector>) -> Result<Self, PlanError> {
        let pairs = directed_pairs(plan.users);
        if streams.len() != pairs.len() {
            return Err(PlanError::Dimension(format!(
                "{} streams for {} messages",
                streams.len(),
                pairs.len()
            )));
        }
        for ((j, k), v) in pairs.iter().zip(&streams) {
            let want = plan.stream_len(*j, *k)?;
            if v.len() != want {
                return Err(PlanError::Dimension(format!(
                    "stream {}->{} has {} symbols, plan expects {want}",
                    j + 1,
                    k + 1,
                    v.len()
                )));
            }
        }
        Ok(Self {
            users: plan.users,
            streams,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn get(&self, from: usize, to: usize) -> &CVector {
        &self.streams[index(self.users, from, to)]
    }

    pub fn get_mut(&mut self, from: usize, to: usize) -> &mut CVector {
        &mut self.streams[index(self.users, from, to)]
    }

    pub fn streams(&self) -> &[CVector] {
        &self.streams
    }

    fn check(&self, plan: &StreamPlan) -> Result<(), PlanError> {
        if self.users != plan.users {
            return Err(PlanError::Dimension(format!(
                "symbols for {} users, plan for {}",
                self.users, plan.users
            )));
        }
        for (j, k) in directed_pairs(plan.users) {
            let want = plan.stream_len(j, k)?;
            if self.get(j, k).len() != want {
                return Err(PlanError::Dimension(format!(
                    "stream {}->{} has {} symbols, plan expects {want}",
                    j + 1,
                    k + 1,
                    self.get(j, k).len()
                )));
            }
        }
        Ok(())
    }
}

fn index(users: usize, from: usize, to: usize) -> usize {
    assert!(from < users && to < users && from != to, "bad message ({from}, {to})");
    from * (users - 1) + if to < from { to } else { to - 1 }
}

/// User `user`'s length-`T N` uplink word: each of its pair slots holds
/// `v_user,partner` zero-padded to the slot length; everything else is zero.
pub fn assemble_uplink_symbol(
    user: usize,
    symbols: &StreamSymbols,
    plan: &StreamPlan,
) -> Result<CVector, PlanError> {
    if user >= plan.users {
        return Err(PlanError::Dimension(format!(
            "user {} not in a {}-user plan",
            user + 1,
            plan.users
        )));
    }
    symbols.check(plan)?;
    let mut word = CVector::zeros(plan.word_length);
    for slot in plan.slots.iter() {
        if let Some(partner) = slot.pair.partner(user) {
            let v = symbols.get(user, partner);
            word.rows_mut(slot.offset, v.len()).copy_from(v);
        }
    }
    Ok(word)
}

/// The contiguous slot of `pair` inside a relay word.
pub fn extract_pair_slot(word: &CVector, pair: UserPair, plan: &StreamPlan) -> Result<CVector, PlanError> {
    if word.len() != plan.word_length {
        return Err(PlanError::Dimension(format!(
            "word of length {}, plan expects {}",
            word.len(),
            plan.word_length
        )));
    }
    let slot = plan
        .slot(pair)
        .ok_or_else(|| PlanError::Dimension(format!("no slot for pair {pair}")))?;
    Ok(word.rows(slot.offset, slot.length).into_owned())
}

/// First `len` entries of a slot, the stream a user actually sent.
pub fn truncate(v: &CVector, len: usize) -> CVector {
    v.rows(0, len.min(v.len())).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn all_ones() -> DofVector {
        DofVector::uniform(4, q(1, 1)).unwrap()
    }

    #[test]
    fn pair_length_examples() {
        let mut d = DofVector::zeros(4);
        d.set(0, 1, q(2, 1)).unwrap();
        d.set(1, 0, q(1, 1)).unwrap();
        let lens = pair_lengths(&d, 1).unwrap();
        assert_eq!(lens[0], (UserPair::new(0, 1).unwrap(), 2));
        assert_eq!(lens[1].1, 0);

        let mut d = DofVector::zeros(3);
        d.set(0, 1, q(1, 2)).unwrap();
        d.set(1, 0, q(1, 3)).unwrap();
        assert_eq!(pair_lengths(&d, 6).unwrap()[0].1, 3);
        assert!(matches!(pair_lengths(&d, 1), Err(PlanError::NonIntegral { .. })));
    }

    #[test]
    fn extension_examples() {
        assert_eq!(minimal_extension(&all_ones()), BigInt::from(1));
        let mut d = DofVector::zeros(3);
        d.set(0, 1, q(1, 2)).unwrap();
        d.set(1, 2, q(1, 3)).unwrap();
        assert_eq!(minimal_extension(&d), BigInt::from(6));
        d.set(0, 1, q(3, 4)).unwrap();
        d.set(1, 2, q(5, 6)).unwrap();
        assert_eq!(minimal_extension(&d), BigInt::from(12));
    }

    #[test]
    fn extension_matches_brute_force_lcm() {
        // smallest T in 1.. with every T*d integral
        let fracs: Vec<Rational> = (1..=8)
            .flat_map(|den| (0..=den).map(move |num| q(num, den)))
            .collect();
        for a in fracs.iter().step_by(3) {
            for b in fracs.iter().step_by(5) {
                let mut d = DofVector::zeros(3);
                d.set(0, 1, a.clone()).unwrap();
                d.set(2, 1, b.clone()).unwrap();
                let brute = (1..=1000)
                    .find(|&t| {
                        let t = q(t, 1);
                        (a * &t).is_integer() && (b * &t).is_integer()
                    })
                    .unwrap();
                assert_eq!(minimal_extension(&d), BigInt::from(brute));
            }
        }
    }

    #[test]
    fn plan_all_ones() {
        let plan = build_stream_plan(&all_ones(), 6).unwrap();
        assert_eq!(plan.extension, 1);
        assert_eq!(plan.padding, 0);
        assert_eq!(plan.word_length, 6);
        let offsets: Vec<usize> = plan.slots.iter().map(|s| s.offset).collect();
        assert_eq!(offsets, [0, 1, 2, 3, 4, 5]);
        assert!(plan.slots.iter().all(|s| s.length == 1));
        assert_eq!(plan.active_streams().len(), 12);
    }

    #[test]
    fn plan_infeasible_cases() {
        let d = DofVector::parse(4, "1-2=7").unwrap();
        match build_stream_plan(&d, 6) {
            Err(PlanError::Infeasible { excess, .. }) => assert_eq!(excess, q(1, 1)),
            other => panic!("{other:?}"),
        }
        let cyc = DofVector::parse(3, "1-2=3,2-3=3,3-1=3").unwrap().embedded(4);
        match build_stream_plan(&cyc, 6) {
            Err(PlanError::Infeasible { total, .. }) => assert_eq!(total, q(9, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn plan_with_extension_and_padding() {
        let d = DofVector::parse(3, "1-2=1/2,2-1=1/3,2-3=1").unwrap();
        let plan = build_stream_plan(&d, 4).unwrap();
        assert_eq!(plan.extension, 6);
        assert_eq!(plan.word_length, 24);
        assert_eq!(plan.slots[0].length, 3);
        assert_eq!((plan.slots[0].forward, plan.slots[0].reverse), (3, 2));
        assert_eq!(plan.slots[1].length, 0);
        assert_eq!(plan.slots[2].offset, 3);
        assert_eq!(plan.slots[2].length, 6);
        assert_eq!(plan.padding, 24 - 9);
    }

    #[test]
    fn assemble_examples() {
        let plan = build_stream_plan(&all_ones(), 6).unwrap();
        let zero = StreamSymbols::zeros(&plan);
        assert_eq!(assemble_uplink_symbol(0, &zero, &plan).unwrap(), CVector::zeros(6));

        let mut sym = StreamSymbols::zeros(&plan);
        let c = Complex64::new(0.3, -1.2);
        sym.get_mut(0, 1)[0] = c;
        let u1 = assemble_uplink_symbol(0, &sym, &plan).unwrap();
        assert_eq!(u1[0], c);
        assert!(u1.iter().skip(1).all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!(assemble_uplink_symbol(4, &sym, &plan).is_err());
    }

    #[test]
    fn assemble_extract_round_trip() {
        let d = DofVector::parse(4, "1-2=2,2-1=1,1-3=1,3-4=1/2,4-3=1,2-4=1/2").unwrap();
        let plan = build_stream_plan(&d, 5).unwrap();
        let mut rng = StreamRng::new(1, 0);
        let sym = StreamSymbols::random(&plan, &mut rng);
        for user in 0..4 {
            let word = assemble_uplink_symbol(user, &sym, &plan).unwrap();
            assert!(word.rows(plan.word_length - plan.padding, plan.padding).iter().all(|z| z.norm() == 0.0));
            for slot in &plan.slots {
                let got = extract_pair_slot(&word, slot.pair, &plan).unwrap();
                match slot.pair.partner(user) {
                    Some(p) => {
                        let v = sym.get(user, p);
                        assert_eq!(truncate(&got, v.len()), *v);
                        assert!(got.iter().skip(v.len()).all(|z| z.norm() == 0.0));
                    }
                    None => assert!(got.iter().all(|z| z.norm() == 0.0)),
                }
            }
        }
    }

    #[test]
    fn extract_rejects_wrong_length() {
        let plan = build_stream_plan(&all_ones(), 6).unwrap();
        assert!(extract_pair_slot(&CVector::zeros(5), UserPair::new(0, 1).unwrap(), &plan).is_err());
    }

    #[test]
    fn symbols_length_checked() {
        let plan = build_stream_plan(&all_ones(), 6).unwrap();
        assert!(StreamSymbols::from_streams(&plan, vec![CVector::zeros(1); 11]).is_err());
        let mut streams = vec![CVector::zeros(1); 12];
        streams[3] = CVector::zeros(2);
        assert!(StreamSymbols::from_streams(&plan, streams).is_err());
        assert!(StreamSymbols::from_streams(&plan, vec![CVector::zeros(1); 12]).is_ok());
    }

    #[test]
    fn plan_json_schema() {
        let plan = build_stream_plan(&DofVector::parse(3, "1-2=1,2-1=1").unwrap(), 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(v["users"], 3);
        assert_eq!(v["padding"], 1);
        assert_eq!(v["slots"][0]["pair"], serde_json::json!([1, 2]));
        assert_eq!(v["slots"][0]["forward"], 1);
        assert_eq!(v["slots"][2]["offset"], 1);
    }
}
