//! One full transmission round over the Y-channel.
//!
//! Uplink: user `j` sends `x_j = H_j^R u_j`, so the relay sees
//! `y_r = sum_j alpha_j u_j + z_r`. With the alignment layout this is one
//! scalar two-way relay channel per relay dimension. Downlink: the relay sends
//! `x_r = sqrt(P) w / ||w||`, user `k` post-codes with `D_k^L` and sees
//! `gamma beta_k w + D_k^L z_k`, then strips its own symbols from each of its
//! pair slots.
//!
//! A word spans `T` channel uses when a symbol extension is active. Chunk `t`
//! of a word is entries `t N .. (t + 1) N`; precoding, relay normalization and
//! post-coding act chunk by chunk.
//!
//! Transmit words are `u_j = s_j a_j`, where `a_j` is the assembled word of
//! codeword symbols and `s_j` is the symbol scale: nominally
//! `sqrt(P / N) * g` (`g` from [`PowerNormalization`]), backed off per round
//! if some channel use would otherwise exceed power `P`. Receivers are told
//! every `alpha_j s_j`, `beta_k` and `gamma` (perfect CSI).
//!
//! [`PowerNormalization`]: crate::linalg::PowerNormalization

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{assemble_uplink_symbol, build_stream_plan, extract_pair_slot, PlanError, StreamPlan, StreamSymbols};
use crate::channel::{check_power, downlink_propagate, uplink_propagate, ChannelError, ChannelSet, SystemConfig};
use crate::dof::{DofError, DofVector, UserPair};
use crate::linalg::{normalized_left_mppi, normalized_right_mppi, CVector, LinalgError, NormalizedLeftMppi, NormalizedRightMppi};
use crate::rng::{Purpose, RngAddress};

/// Smallest usable `|gamma beta_k alpha_j s_j|` in recovery.
pub const SCALAR_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransceiverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("genie decoding needs the true relay word")]
    ModeUnavailable,
    #[error("scalar {0:e} too small to invert during recovery")]
    ScalarUnderflow(f64),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Dof(#[from] DofError),
}

fn dim_err(msg: String) -> TransceiverError {
    TransceiverError::Dimension(msg)
}

/// How the relay turns `y_r` into the word it forwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeMode {
    /// Ideal decoding: the relay forwards the true network-coded word.
    #[default]
    Genie,
    /// Amplify-style baseline: forward `y_r` with the padding zeroed.
    Raw,
}

impl std::str::FromStr for DecodeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "genie" => Ok(Self::Genie),
            "raw" => Ok(Self::Raw),
            other => Err(format!("unknown mode `{other}` (expected genie|raw)")),
        }
    }
}

impl std::fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Genie => "genie",
            Self::Raw => "raw",
        })
    }
}

/// Normalized precoders `H_j^R` and post-coders `D_j^L` for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub right: Vec<NormalizedRightMppi>,
    pub left: Vec<NormalizedLeftMppi>,
}

impl PrecoderSet {
    pub fn compute(ch: &ChannelSet) -> Result<Self, LinalgError> {
        Ok(Self {
            right: ch.uplink().iter().map(normalized_right_mppi).collect::<Result<_, _>>()?,
            left: ch.downlink().iter().map(normalized_left_mppi).collect::<Result<_, _>>()?,
        })
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.right.iter().map(|r| r.alpha).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.left.iter().map(|l| l.beta).collect()
    }
}

/// `sqrt(P / N)` times the power-normalization gain.
pub fn nominal_symbol_scale(cfg: &SystemConfig) -> f64 {
    (cfg.power / cfg.relay_antennas as f64).sqrt() * cfg.power_normalization.gain(cfg.relay_antennas)
}

fn chunks(word: &CVector, n: usize) -> Result<Vec<CVector>, TransceiverError> {
    if n == 0 || !word.len().is_multiple_of(n) {
        return Err(dim_err(format!("word length {} is not a multiple of {n}", word.len())));
    }
    Ok((0..word.len() / n).map(|t| word.rows(t * n, n).into_owned()).collect())
}

fn concat(parts: &[CVector]) -> CVector {
    CVector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.iter().flat_map(|p| p.iter().copied()))
}

/// `x_j = H_j^R u_j` for one channel use.
pub fn uplink_precode(u: &CVector, hr: &NormalizedRightMppi) -> Result<CVector, TransceiverError> {
    Ok(hr.matrix.apply(u)?)
}

/// Precodes every chunk of a length `T N` word.
pub fn precode_word(word: &CVector, hr: &NormalizedRightMppi) -> Result<Vec<CVector>, TransceiverError> {
    chunks(word, hr.matrix.cols())?
        .iter()
        .map(|u| uplink_precode(u, hr))
        .collect()
}

/// Relay observation for uplink words `u_j` (length `T N`), through the
/// physical channels: `y_r(t) = sum_j H_j H_j^R u_j(t) + z_r(t)`.
pub fn relay_observe(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    precoders: &PrecoderSet,
    words: &[CVector],
    noise: Option<&CVector>,
) -> Result<CVector, TransceiverError> {
    if !ch.matches(cfg) || words.len() != cfg.users || precoders.right.len() != cfg.users {
        return Err(dim_err(format!("{} uplink words for {} users", words.len(), cfg.users)));
    }
    let n = cfg.relay_antennas;
    let len = words[0].len();
    if words.iter().any(|w| w.len() != len) || !len.is_multiple_of(n) || len == 0 {
        return Err(dim_err("uplink words must share a length that is a multiple of N".into()));
    }
    if let Some(z) = noise {
        if z.len() != len {
            return Err(dim_err(format!("relay noise of length {}, expected {len}", z.len())));
        }
    }
    let per_user: Vec<Vec<CVector>> = words
        .iter()
        .zip(&precoders.right)
        .map(|(w, hr)| precode_word(w, hr))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(len / n);
    for t in 0..len / n {
        let x: Vec<CVector> = per_user.iter().map(|xs| xs[t].clone()).collect();
        let z = noise.map(|z| z.rows(t * n, n).into_owned());
        out.push(uplink_propagate(ch, &x, z.as_ref())?);
    }
    Ok(concat(&out))
}

/// Noiseless network-coded word `w = sum_j g_j u_j` with the per-slot gains.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayWord {
    pub w: CVector,
    /// `(pair, gain of pair.first(), gain of pair.second())` per slot.
    pub slot_gains: Vec<(UserPair, f64, f64)>,
}

impl RelayWord {
    pub fn compose(plan: &StreamPlan, words: &[CVector], gains: &[f64]) -> Result<Self, TransceiverError> {
        if words.len() != plan.users || gains.len() != plan.users {
            return Err(dim_err(format!("{} words, {} gains for {} users", words.len(), gains.len(), plan.users)));
        }
        let mut w = CVector::zeros(plan.word_length);
        for (u, &g) in words.iter().zip(gains) {
            if u.len() != plan.word_length {
                return Err(dim_err(format!("word of length {}, expected {}", u.len(), plan.word_length)));
            }
            w += u * Complex64::new(g, 0.0);
        }
        let slot_gains = plan
            .slots
            .iter()
            .map(|s| (s.pair, gains[s.pair.first()], gains[s.pair.second()]))
            .collect();
        Ok(Self { w, slot_gains })
    }
}

/// The word the relay forwards.
pub fn relay_decode(
    y_r: &CVector,
    plan: &StreamPlan,
    mode: DecodeMode,
    truth: Option<&RelayWord>,
) -> Result<CVector, TransceiverError> {
    if y_r.len() != plan.word_length {
        return Err(dim_err(format!("relay observation of length {}, expected {}", y_r.len(), plan.word_length)));
    }
    match mode {
        DecodeMode::Genie => truth.map(|t| t.w.clone()).ok_or(TransceiverError::ModeUnavailable),
        DecodeMode::Raw => {
            let mut w = y_r.clone();
            let start = plan.word_length - plan.padding;
            w.rows_mut(start, plan.padding).fill(Complex64::new(0.0, 0.0));
            Ok(w)
        }
    }
}

/// Relay transmit vector for one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayTransmit {
    pub signal: CVector,
    /// `sqrt(P) / ||w||`; zero when the word is zero.
    pub gamma: f64,
    pub zero_word: bool,
}

/// `x_r = sqrt(P) w / ||w||`; a zero word is sent as zeros and flagged.
pub fn relay_transmit(w: &CVector, power: f64) -> RelayTransmit {
    let norm = w.norm();
    if norm == 0.0 {
        return RelayTransmit {
            signal: CVector::zeros(w.len()),
            gamma: 0.0,
            zero_word: true,
        };
    }
    let gamma = power.sqrt() / norm;
    RelayTransmit {
        signal: w * Complex64::new(gamma, 0.0),
        gamma,
        zero_word: false,
    }
}

/// `D_k^L y_k` for one channel use.
pub fn user_postcode(y: &CVector, dl: &NormalizedLeftMppi) -> Result<CVector, TransceiverError> {
    Ok(dl.matrix.apply(y)?)
}

/// Scalars a receiving user needs to undo the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryScalars {
    /// `alpha_j s_j` for every user.
    pub uplink_gains: Vec<f64>,
    /// `gamma_t beta_k` per channel use; `None` if the relay sent a zero word.
    pub downlink_gains: Vec<Option<f64>>,
}

/// Estimates `v_jk` for every `j != k` from user `k`'s post-coded word.
///
/// Slot component `r` of pair `{j, k}` gives
/// `(filtered / (gamma beta_k) - g_k v_kj[r]) / g_j`, kept for `r < T d_jk`.
/// Only `own.get(k, j)` is read from `own`. A zero relay word means the
/// slot sum is known to be zero.
pub fn user_recover(
    filtered: &CVector,
    user: usize,
    own: &StreamSymbols,
    plan: &StreamPlan,
    scalars: &RecoveryScalars,
) -> Result<Vec<(usize, CVector)>, TransceiverError> {
    let n = plan.relay_antennas;
    if filtered.len() != plan.word_length || scalars.downlink_gains.len() != plan.extension {
        return Err(dim_err(format!(
            "filtered word of length {} with {} channel-use gains, plan expects {} and {}",
            filtered.len(),
            scalars.downlink_gains.len(),
            plan.word_length,
            plan.extension
        )));
    }
    if user >= plan.users || scalars.uplink_gains.len() != plan.users {
        return Err(dim_err(format!("user {} / {} uplink gains for {} users", user + 1, scalars.uplink_gains.len(), plan.users)));
    }
    let own_gain = scalars.uplink_gains[user];
    let mut out = Vec::with_capacity(plan.users - 1);
    for partner in (0..plan.users).filter(|&j| j != user) {
        let pair = UserPair::new(user, partner)?;
        let slot = plan.slot(pair).expect("every pair has a slot");
        let received = extract_pair_slot(filtered, pair, plan)?;
        let mine = own.get(user, partner);
        let wanted = slot.stream_len(partner);
        let partner_gain = scalars.uplink_gains[partner];
        let mut est = CVector::zeros(wanted);
        for r in 0..wanted {
            let y = match scalars.downlink_gains[(slot.offset + r) / n] {
                Some(g) => {
                    if (g * partner_gain).abs() < SCALAR_FLOOR {
                        return Err(TransceiverError::ScalarUnderflow(g * partner_gain));
                    }
                    received[r] / g
                }
                None => Complex64::new(0.0, 0.0),
            };
            if partner_gain.abs() < SCALAR_FLOOR {
                return Err(TransceiverError::ScalarUnderflow(partner_gain));
            }
            let own_part = mine.get(r).copied().unwrap_or_default() * own_gain;
            est[r] = (y - own_part) / partner_gain;
        }
        out.push((partner, est));
    }
    Ok(out)
}

/// Analytic per-component SNRs of one directed stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamSnr {
    pub from: usize,
    pub to: usize,
    /// Relay-side SNR of this direction in its slot.
    pub uplink: Vec<f64>,
    /// SNR of the slot's network-coded sum at the receiving user.
    pub downlink: Vec<f64>,
    /// Downlink in genie mode, `min(uplink, downlink)` in raw mode.
    pub effective: Vec<f64>,
}

impl StreamSnr {
    pub fn mean_effective(&self) -> f64 {
        self.effective.iter().sum::<f64>() / self.effective.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrReport {
    pub streams: Vec<StreamSnr>,
    /// Per-stream `sum_r log2(1 + SNR_r) / T`, bits per channel use.
    pub stream_rates: Vec<f64>,
    pub rate_proxy: f64,
}

/// Expected-power SNR of every slot component at nominal symbol scale.
///
/// Uplink SNR of direction `j -> k` is `(alpha_j s)^2` over unit noise.
/// Downlink SNR at user `k` for component `i` in channel use `t` is
/// `P beta_k^2 (E|w_i|^2 / E||w(t)||^2) / ||row_i(D_k^L)||^2`.
pub fn effective_snr(
    cfg: &SystemConfig,
    precoders: &PrecoderSet,
    plan: &StreamPlan,
    mode: DecodeMode,
) -> Result<SnrReport, TransceiverError> {
    if plan.users != cfg.users || plan.relay_antennas != cfg.relay_antennas || precoders.right.len() != cfg.users {
        return Err(dim_err("plan, configuration and precoders disagree".into()));
    }
    let n = cfg.relay_antennas;
    let s = nominal_symbol_scale(cfg);
    let gains: Vec<f64> = precoders.alphas().iter().map(|a| a * s).collect();

    let mut energy = vec![0.0; plan.word_length];
    for slot in &plan.slots {
        let (a, b) = (slot.pair.first(), slot.pair.second());
        for r in 0..slot.length {
            let mut e = 0.0;
            if r < slot.forward {
                e += gains[a] * gains[a];
            }
            if r < slot.reverse {
                e += gains[b] * gains[b];
            }
            energy[slot.offset + r] = e;
        }
    }
    let chunk_energy: Vec<f64> = energy.chunks(n).map(|c| c.iter().sum()).collect();
    let noise_rows: Vec<Vec<f64>> = precoders.left.iter().map(|l| l.matrix.row_norms_sqr()).collect();

    let mut streams = Vec::new();
    let mut stream_rates = Vec::new();
    for (from, to) in plan.active_streams() {
        let slot = plan.slot_between(from, to)?;
        let len = slot.stream_len(from);
        let beta = precoders.left[to].beta;
        let mut uplink = Vec::with_capacity(len);
        let mut downlink = Vec::with_capacity(len);
        for r in 0..len {
            let i = slot.offset + r;
            uplink.push(gains[from] * gains[from] / cfg.noise_variance());
            let share = energy[i] / chunk_energy[i / n];
            downlink.push(cfg.power * beta * beta * share / (noise_rows[to][i % n] * cfg.noise_variance()));
        }
        let effective: Vec<f64> = match mode {
            DecodeMode::Genie => downlink.clone(),
            DecodeMode::Raw => uplink.iter().zip(&downlink).map(|(u, d)| u.min(*d)).collect(),
        };
        let rate = effective.iter().map(|x| (1.0 + x).log2()).sum::<f64>() / plan.extension as f64;
        stream_rates.push(rate);
        streams.push(StreamSnr {
            from,
            to,
            uplink,
            downlink,
            effective,
        });
    }
    Ok(SnrReport {
        rate_proxy: stream_rates.iter().sum(),
        streams,
        stream_rates,
    })
}

/// Switches for [`run_round`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundOptions {
    pub mode: DecodeMode,
    pub noise: bool,
}

impl Default for RoundOptions {
    fn default() -> Self {
        Self {
            mode: DecodeMode::Genie,
            noise: true,
        }
    }
}

fn complex_pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamResult {
    /// 1-based sending user.
    pub from: usize,
    /// 1-based receiving user.
    pub to: usize,
    pub estimate: Vec<[f64; 2]>,
    pub relative_error: f64,
    pub uplink_snr: Vec<f64>,
    pub downlink_snr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundResult {
    pub power: f64,
    pub mode: DecodeMode,
    pub noise: bool,
    pub extension: usize,
    /// `gamma` of every channel use (zero for a zero word).
    pub gammas: Vec<f64>,
    pub nominal_symbol_scale: f64,
    /// Symbol scale `s_j` actually used by each user.
    pub symbol_scales: Vec<f64>,
    /// Every user and relay transmit vector passed the power check.
    pub power_ok: bool,
    pub streams: Vec<StreamResult>,
}

impl RoundResult {
    pub fn max_relative_error(&self) -> f64 {
        self.streams.iter().map(|s| s.relative_error).fold(0.0, f64::max)
    }

    pub fn mean_relative_error(&self) -> f64 {
        self.streams.iter().map(|s| s.relative_error).sum::<f64>() / self.streams.len().max(1) as f64
    }
}

fn relative_error(estimate: &CVector, truth: &CVector) -> f64 {
    let diff = (estimate - truth).norm();
    let scale = truth.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Runs one round: samples symbols (unless given) and noise from `addr`,
/// precodes, relays, post-codes and recovers every active stream.
pub fn run_round(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    d: &DofVector,
    symbols: Option<StreamSymbols>,
    addr: RngAddress,
    options: RoundOptions,
) -> Result<RoundResult, TransceiverError> {
    let precoders = PrecoderSet::compute(ch)?;
    run_round_with(cfg, ch, &precoders, d, symbols, addr, options)
}

/// [`run_round`] with precomputed precoders.
pub fn run_round_with(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    precoders: &PrecoderSet,
    d: &DofVector,
    symbols: Option<StreamSymbols>,
    addr: RngAddress,
    options: RoundOptions,
) -> Result<RoundResult, TransceiverError> {
    cfg.validate()?;
    if !ch.matches(cfg) || d.users() != cfg.users {
        return Err(dim_err("channels, DoF vector and configuration disagree".into()));
    }
    let plan = build_stream_plan(d, cfg.relay_antennas)?;
    let n = cfg.relay_antennas;
    let symbols = match symbols {
        Some(s) => StreamSymbols::from_streams(&plan, s.streams().to_vec())?,
        None => StreamSymbols::random(&plan, &mut addr.rng(Purpose::Symbols)),
    };

    let nominal = nominal_symbol_scale(cfg);
    let assembled: Vec<CVector> = (0..cfg.users)
        .map(|j| assemble_uplink_symbol(j, &symbols, &plan))
        .collect::<Result<_, _>>()?;
    let mut scales = Vec::with_capacity(cfg.users);
    for (a, hr) in assembled.iter().zip(&precoders.right) {
        let peak = precode_word(a, hr)?.iter().map(|x| x.norm()).fold(0.0, f64::max);
        scales.push(if peak > 0.0 { nominal.min(cfg.power.sqrt() / peak) } else { nominal });
    }
    let words: Vec<CVector> = assembled
        .iter()
        .zip(&scales)
        .map(|(a, &s)| a * Complex64::new(s, 0.0))
        .collect();

    let mut power_ok = true;
    for (u, hr) in words.iter().zip(&precoders.right) {
        power_ok &= precode_word(u, hr)?.iter().all(|x| check_power(x, cfg.power));
    }

    let gains: Vec<f64> = precoders.alphas().iter().zip(&scales).map(|(a, s)| a * s).collect();
    let truth = RelayWord::compose(&plan, &words, &precoders.alphas())?;
    let relay_noise = options
        .noise
        .then(|| addr.rng(Purpose::RelayNoise).complex_gaussian_vec(plan.word_length));
    let y_r = relay_observe(cfg, ch, precoders, &words, relay_noise.as_ref())?;
    let w_hat = relay_decode(&y_r, &plan, options.mode, Some(&truth))?;

    let transmits: Vec<RelayTransmit> = chunks(&w_hat, n)?
        .iter()
        .map(|w| relay_transmit(w, cfg.power))
        .collect();
    power_ok &= transmits.iter().all(|t| check_power(&t.signal, cfg.power));

    let snr = effective_snr(cfg, precoders, &plan, options.mode)?;
    let mut user_noise = addr.rng(Purpose::UserNoise);
    let mut streams = Vec::new();
    for k in 0..cfg.users {
        let mut filtered = Vec::with_capacity(plan.extension);
        for tx in &transmits {
            let z = options.noise.then(|| user_noise.complex_gaussian_vec(cfg.user_antennas));
            let y = downlink_propagate(&ch.downlink()[k], &tx.signal, z.as_ref())?;
            filtered.push(user_postcode(&y, &precoders.left[k])?);
        }
        let scalars = RecoveryScalars {
            uplink_gains: gains.clone(),
            downlink_gains: transmits
                .iter()
                .map(|t| (!t.zero_word).then(|| t.gamma * precoders.left[k].beta))
                .collect(),
        };
        for (j, est) in user_recover(&concat(&filtered), k, &symbols, &plan, &scalars)? {
            if est.is_empty() {
                continue;
            }
            let s = snr
                .streams
                .iter()
                .find(|s| s.from == j && s.to == k)
                .expect("active stream has an SNR entry");
            streams.push(StreamResult {
                from: j + 1,
                to: k + 1,
                relative_error: relative_error(&est, symbols.get(j, k)),
                estimate: complex_pairs(&est),
                uplink_snr: s.uplink.clone(),
                downlink_snr: s.downlink.clone(),
            });
        }
    }
    streams.sort_by_key(|s| (s.from, s.to));
    Ok(RoundResult {
        power: cfg.power,
        mode: options.mode,
        noise: options.noise,
        extension: plan.extension,
        gammas: transmits.iter().map(|t| t.gamma).collect(),
        nominal_symbol_scale: nominal,
        symbol_scales: scales,
        power_ok,
        streams,
    })
}
