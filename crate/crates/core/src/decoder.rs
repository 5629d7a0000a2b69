//! Measurement-level successive cancellation decoding.
//!
//! Every decoded bit is the outcome of the binary projective measurement
//! `{Π, I − Π}` with `Π = {√ρ̄_{ctx,0} − √ρ̄_{ctx,1} ≥ 0}`, where `ctx` is the
//! decoded past (or the true past in genie mode). The post-measurement state
//! is kept unnormalized and rescaled only when its trace gets small.
//!
//! Codes are described by slots: each `(block, stream, position)` either
//! carries a frozen bit or a message bit. A message id may occupy several
//! slots (aligned copies across blocks). The first slot of an id met in
//! decoding order is measured; later ones are treated as frozen with the
//! value already decoded.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::ChainPath;
use crate::channel::OutputTable;
use crate::error::{Error, Result};
use crate::polar::{polar_encode, CosetCodeSpec};
use crate::quantum::{helstrom_projector_ops, Operator, SPECTRAL_FLOOR};
use crate::synthesis::{channel_output, Context, Synthesizer};

/// Trace below which the post-measurement state is rescaled.
pub const RENORMALIZE_BELOW: f64 = 1e-12;

/// A sampled outcome whose conditional probability is below this is
/// treated as numerical noise and aborts the trial.
pub const DEGENERATE_BELOW: f64 = 1e-14;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Frozen(u8),
    Message(usize),
}

/// Slot layout of a multi-block code: `blocks[b][stream][position]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    pub n: usize,
    pub streams: usize,
    pub messages: usize,
    pub blocks: Vec<Vec<Vec<Slot>>>,
}

impl Encoding {
    pub fn new(n: usize, streams: usize, blocks: Vec<Vec<Vec<Slot>>>) -> Result<Self> {
        crate::polar::log2_exact(n)?;
        let mut seen: Vec<bool> = Vec::new();
        for block in &blocks {
            if block.len() != streams || block.iter().any(|s| s.len() != n) {
                return Err(Error::Validation(format!("every block needs {streams} streams of length {n}")));
            }
            for slot in block.iter().flatten() {
                match *slot {
                    Slot::Message(id) => {
                        if id >= seen.len() {
                            seen.resize(id + 1, false);
                        }
                        seen[id] = true;
                    }
                    Slot::Frozen(b) if b > 1 => {
                        return Err(Error::Validation(format!("frozen value {b} is not a bit")));
                    }
                    Slot::Frozen(_) => {}
                }
            }
        }
        if blocks.is_empty() {
            return Err(Error::Validation("an encoding needs at least one block".into()));
        }
        if let Some(missing) = seen.iter().position(|&x| !x) {
            return Err(Error::Validation(format!("message id {missing} is never used")));
        }
        Ok(Encoding { n, streams, messages: seen.len(), blocks })
    }

    /// One block carrying one coset code per stream; message ids are
    /// assigned stream by stream, ascending position.
    pub fn from_codes(codes: &[CosetCodeSpec]) -> Result<Self> {
        Self::repeated(codes, 1)
    }

    /// `blocks` independent copies of the same codes.
    pub fn repeated(codes: &[CosetCodeSpec], blocks: usize) -> Result<Self> {
        let n = codes.first().map(|c| c.n).ok_or_else(|| Error::Validation("no codes given".into()))?;
        if codes.iter().any(|c| c.n != n) {
            return Err(Error::Validation("all codes must share N".into()));
        }
        let mut next = 0;
        let layout = (0..blocks)
            .map(|_| {
                codes
                    .iter()
                    .map(|code| {
                        (0..n)
                            .map(|i| {
                                if code.is_info(i) {
                                    next += 1;
                                    Slot::Message(next - 1)
                                } else {
                                    Slot::Frozen(code.frozen[i])
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::new(n, codes.len(), layout)
    }

    /// The `u` vectors `[block][stream]` carrying `messages`.
    pub fn u_vectors(&self, messages: &[u8]) -> Vec<Vec<Vec<u8>>> {
        self.blocks
            .iter()
            .map(|block| {
                block
                    .iter()
                    .map(|stream| {
                        stream
                            .iter()
                            .map(|slot| match *slot {
                                Slot::Frozen(b) => b,
                                Slot::Message(id) => messages[id],
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Codewords `[block][stream]`.
    pub fn codewords(&self, messages: &[u8]) -> Vec<Vec<Vec<u8>>> {
        self.u_vectors(messages)
            .into_iter()
            .map(|block| block.iter().map(|u| polar_encode(u).expect("N is a power of two")).collect())
            .collect()
    }

    /// Message ids carried by the given streams.
    pub fn messages_of(&self, streams: &[usize]) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .blocks
            .iter()
            .flat_map(|b| streams.iter().flat_map(move |&s| b[s].iter()))
            .filter_map(|slot| match slot {
                Slot::Message(id) => Some(*id),
                Slot::Frozen(_) => None,
            })
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    /// Condition every projector on previously decoded bits.
    Sc,
    /// Condition on the true bits (analysis device).
    Genie,
}

/// The post-measurement state of one block and the bits decoded so far.
#[derive(Clone, Debug)]
pub struct DecoderState {
    pub state: Operator,
    pub prefixes: Context,
    pub position: usize,
}

impl DecoderState {
    pub fn new(state: Operator, senders: usize) -> Self {
        DecoderState { state, prefixes: vec![Vec::new(); senders], position: 0 }
    }

    /// Born probability of outcome 0 under `{Π, I − Π}`.
    pub fn probability_zero(&self, pi: &Operator) -> Result<f64> {
        let total = self.state.trace();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Degenerate(format!("state trace {total} at step {}", self.position)));
        }
        Ok((pi.trace_product(&self.state) / total).clamp(0.0, 1.0))
    }

    /// Projects onto the outcome's subspace and rescales when needed.
    pub fn collapse(&mut self, projector: &Operator) {
        self.state = projector.sandwich(&self.state);
        let t = self.state.trace();
        if t > 0.0 && t < RENORMALIZE_BELOW {
            self.state = self.state.scaled(1.0 / t);
        }
    }

    /// Measures with uniform draw `r ∈ [0, 1)`: outcome 0 iff `r < p0`.
    /// Returns the outcome and `p0`.
    pub fn step_measure(&mut self, pair: &ProjectorPair, r: f64) -> Result<(u8, f64)> {
        let p0 = self.probability_zero(&pair.zero)?;
        let outcome = u8::from(r >= p0);
        let p = if outcome == 0 { p0 } else { 1.0 - p0 };
        if p < DEGENERATE_BELOW {
            return Err(Error::Degenerate(format!(
                "outcome {outcome} drawn with probability {p:e} at step {}",
                self.position
            )));
        }
        self.collapse(pair.get(outcome));
        self.position += 1;
        Ok((outcome, p0))
    }
}

/// `{Π, I − Π}`.
#[derive(Clone, Debug)]
pub struct ProjectorPair {
    pub zero: Operator,
    pub one: Operator,
}

impl ProjectorPair {
    pub fn helstrom(rho0: &Operator, rho1: &Operator) -> Self {
        let zero = helstrom_projector_ops(rho0, rho1, SPECTRAL_FLOOR);
        let one = Operator::identity(zero.dim()).sub(&zero);
        ProjectorPair { zero, one }
    }

    pub fn get(&self, outcome: u8) -> &Operator {
        if outcome == 0 {
            &self.zero
        } else {
            &self.one
        }
    }
}

/// One receiver: which streams it decodes, in which order, with projectors
/// built from `model` and states produced by `actual`.
pub struct Receiver {
    model: Synthesizer,
    streams: Vec<usize>,
    path: ChainPath,
    block_order: Vec<usize>,
    actual: OutputTable,
    projectors: Mutex<HashMap<(usize, Context), Arc<ProjectorPair>>>,
}

impl std::fmt::Debug for Receiver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Receiver")
            .field("streams", &self.streams)
            .field("path", &self.path.to_string())
            .field("block_order", &self.block_order)
            .finish()
    }
}

impl Receiver {
    /// `model` has one sender per entry of `streams`; `actual` has one
    /// sender per stream of the encoding and the same output dimension.
    pub fn new(
        model: Synthesizer,
        streams: Vec<usize>,
        path: ChainPath,
        block_order: Vec<usize>,
        actual: OutputTable,
    ) -> Result<Self> {
        if streams.len() != model.senders() || path.senders() != model.senders() || path.n() != model.n() {
            return Err(Error::Validation(format!(
                "path {path} and {} streams do not fit a {}-sender model at N = {}",
                streams.len(),
                model.senders(),
                model.n()
            )));
        }
        if actual.dim() != model.table().dim() {
            return Err(Error::DimensionMismatch(model.table().dim(), actual.dim()));
        }
        let mut sorted = block_order.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &b)| i != b) {
            return Err(Error::Validation(format!("block order {block_order:?} is not a permutation")));
        }
        Ok(Receiver { model, streams, path, block_order, actual, projectors: Mutex::default() })
    }

    /// Plain decoding of a MAC (or single-user channel) whose senders are
    /// the encoding's streams, blocks in ascending order.
    pub fn plain(model: Synthesizer, path: ChainPath, blocks: usize) -> Result<Self> {
        let actual = model.table().clone();
        let streams = (0..model.senders()).collect();
        Self::new(model, streams, path, (0..blocks).collect(), actual)
    }

    pub fn streams(&self) -> &[usize] {
        &self.streams
    }

    pub fn path(&self) -> &ChainPath {
        &self.path
    }

    pub fn block_order(&self) -> &[usize] {
        &self.block_order
    }

    pub fn model(&self) -> &Synthesizer {
        &self.model
    }

    fn check(&self, enc: &Encoding) -> Result<()> {
        if enc.n != self.model.n()
            || enc.blocks.len() != self.block_order.len()
            || self.actual.senders() != enc.streams
            || self.streams.iter().any(|&s| s >= enc.streams)
        {
            return Err(Error::Validation("receiver does not match the encoding".into()));
        }
        Ok(())
    }

    /// Projector pair for decoding `sender`'s next bit after `ctx`.
    pub fn projector(&self, sender: usize, ctx: &Context) -> Arc<ProjectorPair> {
        let key = (sender, ctx.clone());
        if let Some(p) = self.projectors.lock().unwrap().get(&key) {
            return p.clone();
        }
        let mut zero = ctx.clone();
        zero[sender].push(0);
        let mut one = ctx.clone();
        one[sender].push(1);
        let pair = Arc::new(ProjectorPair::helstrom(
            &self.model.avg_output(&zero).expect("context within range"),
            &self.model.avg_output(&one).expect("context within range"),
        ));
        self.projectors.lock().unwrap().insert(key, pair.clone());
        pair
    }

    /// Runs the cascade over every block. `choose(p0, truth)` returns the
    /// outcome for a measured step; `None` stops the run (zero-probability
    /// branch).
    fn cascade(
        &self,
        enc: &Encoding,
        truth: &[u8],
        mode: DecodeMode,
        known: &mut [Option<u8>],
        choose: &mut dyn FnMut(&mut DecoderState, &ProjectorPair, u8) -> Result<Option<u8>>,
    ) -> Result<bool> {
        let u_true = enc.u_vectors(truth);
        let codewords = enc.codewords(truth);
        let steps = self.path.steps();
        for &b in &self.block_order {
            let mut st = DecoderState::new(channel_output(&self.actual, &codewords[b]), self.streams.len());
            for idx in &steps {
                let s = idx.sender;
                let stream = self.streams[s];
                let pos = idx.lens[s];
                let bit = match enc.blocks[b][stream][pos] {
                    Slot::Frozen(v) => v,
                    Slot::Message(id) => match known[id] {
                        Some(v) => v,
                        None => {
                            let pair = self.projector(s, &st.prefixes);
                            let Some(v) = choose(&mut st, &pair, u_true[b][stream][pos])? else {
                                return Ok(false);
                            };
                            known[id] = Some(v);
                            v
                        }
                    },
                };
                st.prefixes[s].push(match mode {
                    DecodeMode::Sc => bit,
                    DecodeMode::Genie => u_true[b][stream][pos],
                });
            }
        }
        Ok(true)
    }

    /// Decodes one transmission of `truth`, drawing measurement randomness
    /// from `rng`.
    pub fn decode<R: Rng + ?Sized>(
        &self,
        enc: &Encoding,
        truth: &[u8],
        mode: DecodeMode,
        rng: &mut R,
    ) -> Result<(Vec<Option<u8>>, Vec<f64>)> {
        self.check(enc)?;
        let mut known = vec![None; enc.messages];
        let mut probs = Vec::new();
        self.cascade(enc, truth, mode, &mut known, &mut |st, pair, _| {
            let (outcome, p0) = st.step_measure(pair, rng.random::<f64>())?;
            probs.push(p0);
            Ok(Some(outcome))
        })?;
        Ok((known, probs))
    }

    /// Probability that every measured message bit comes out right.
    pub fn exact_success_probability(&self, enc: &Encoding, truth: &[u8]) -> Result<f64> {
        self.forced_probability(enc, truth, &mut |_, t| t)
    }

    /// Probability of one specific pattern of measured outcomes, listed in
    /// measurement order.
    pub fn pattern_probability(&self, enc: &Encoding, truth: &[u8], pattern: &[u8]) -> Result<f64> {
        let mut k = 0;
        let p = self.forced_probability(enc, truth, &mut |_, _| {
            k += 1;
            pattern.get(k - 1).copied().unwrap_or(0)
        })?;
        if k != pattern.len() {
            return Err(Error::Validation(format!("pattern has {} bits, run measured {k}", pattern.len())));
        }
        Ok(p)
    }

    /// Number of measured steps when decoding `enc`.
    pub fn measured_steps(&self, enc: &Encoding) -> usize {
        enc.messages_of(&self.streams).len()
    }

    fn forced_probability(
        &self,
        enc: &Encoding,
        truth: &[u8],
        pick: &mut dyn FnMut(usize, u8) -> u8,
    ) -> Result<f64> {
        self.check(enc)?;
        let mut known = vec![None; enc.messages];
        let mut prob = 1.0;
        let mut step = 0;
        let alive = self.cascade(enc, truth, DecodeMode::Sc, &mut known, &mut |st, pair, t| {
            let p0 = st.probability_zero(&pair.zero)?;
            let outcome = pick(step, t) & 1;
            step += 1;
            let p = if outcome == 0 { p0 } else { 1.0 - p0 };
            prob *= p;
            if p <= 0.0 {
                return Ok(None);
            }
            st.collapse(pair.get(outcome));
            Ok(Some(outcome))
        })?;
        Ok(if alive { prob } else { 0.0 })
    }

    /// Exact block error probability averaged over uniform messages.
    pub fn exact_block_error(&self, enc: &Encoding) -> Result<f64> {
        if enc.messages > 20 {
            return Err(Error::Resource(format!("2^{} message assignments", enc.messages)));
        }
        let total = 1usize << enc.messages;
        let probs: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|w| {
                let truth: Vec<u8> = (0..enc.messages).map(|k| ((w >> k) & 1) as u8).collect();
                self.exact_success_probability(enc, &truth)
            })
            .collect::<Result<_>>()?;
        Ok(1.0 - probs.iter().sum::<f64>() / total as f64)
    }
}

/// One decoding attempt by one receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub receiver: usize,
    /// All message bits of the trial.
    pub messages: Vec<u8>,
    /// Decoded value per message id (`None` where the receiver does not
    /// decode that id).
    pub decoded: Vec<Option<u8>>,
    pub success: bool,
    /// `P(outcome 0)` at each measured step.
    pub probabilities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

/// The RNG stream of trial `t` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

/// Runs trial `t`: draws the messages, then lets each receiver decode the
/// same transmission in turn.
pub fn run_trial(enc: &Encoding, receivers: &[&Receiver], mode: DecodeMode, seed: u64, trial: u64) -> Result<Vec<TrialRecord>> {
    let mut rng = trial_rng(seed, trial);
    let messages: Vec<u8> = (0..enc.messages).map(|_| u8::from(rng.random::<bool>())).collect();
    receivers
        .iter()
        .enumerate()
        .map(|(r, rx)| {
            let base = TrialRecord {
                trial,
                seed,
                receiver: r,
                messages: messages.clone(),
                decoded: vec![None; enc.messages],
                success: false,
                probabilities: Vec::new(),
                aborted: None,
            };
            match rx.decode(enc, &messages, mode, &mut rng) {
                Ok((decoded, probabilities)) => {
                    let success = decoded.iter().zip(&messages).all(|(d, m)| d.is_none_or(|d| d == *m));
                    Ok(TrialRecord { decoded, success, probabilities, ..base })
                }
                Err(e @ Error::Degenerate(_)) => Ok(TrialRecord { aborted: Some(e.to_string()), ..base }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Runs `trials` independent trials in parallel; records come back in
/// trial order, one inner vector per trial.
pub fn simulate(
    enc: &Encoding,
    receivers: &[&Receiver],
    mode: DecodeMode,
    trials: u64,
    seed: u64,
) -> Result<Vec<Vec<TrialRecord>>> {
    for rx in receivers {
        rx.check(enc)?;
    }
    (0..trials)
        .into_par_iter()
        .map(|t| run_trial(enc, receivers, mode, seed, t))
        .collect()
}

/// Block-error estimate with a Wilson 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub trials: u64,
    pub errors: u64,
    /// Trials aborted on a degenerate measurement (counted as errors).
    pub aborted: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl ErrorEstimate {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TrialRecord>, seed: u64) -> Self {
        let (mut trials, mut errors, mut aborted) = (0u64, 0u64, 0u64);
        for r in records {
            trials += 1;
            errors += u64::from(!r.success);
            aborted += u64::from(r.aborted.is_some());
        }
        let (ci_low, ci_high) = wilson_interval(errors, trials, Z_95);
        let rate = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
        ErrorEstimate { trials, errors, aborted, rate, ci_low, ci_high, seed }
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte Carlo block-error estimate for a single receiver.
pub fn monte_carlo(
    enc: &Encoding,
    receiver: &Receiver,
    mode: DecodeMode,
    trials: u64,
    seed: u64,
) -> Result<(ErrorEstimate, Vec<TrialRecord>)> {
    if trials == 0 {
        return Err(Error::Validation("at least one trial is required".into()));
    }
    let records: Vec<TrialRecord> = simulate(enc, &[receiver], mode, trials, seed)?
        .into_iter()
        .map(|mut v| v.remove(0))
        .collect();
    Ok((ErrorEstimate::from_records(&records, seed), records))
}
