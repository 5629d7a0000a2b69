//! Universal index alignment for two-member compound MACs.
//!
//! Good and bad index sets are computed per member from the split channels
//! of that member's chain path. Indices good for one member only (`A_II`,
//! `A_III`) are aligned across code blocks with CNOTs: at every recursion
//! level the block set doubles and the still-open `A_II` slots of the first
//! half are paired, in ascending order, with the open `A_III` slots of the
//! second half. Levels alternate over the aligned streams. Member 1 decodes
//! blocks in ascending order and member 2 in descending order, so the good
//! copy of every aligned bit is always decoded first.

use serde::{Deserialize, Serialize};

use crate::chains::{chain_rates, path_profile, per_sender_root_fidelities, ChainPath, RatePoint, StepProfile};
use crate::channel::CompoundMac;
use crate::config::Limits;
use crate::decoder::{simulate, DecodeMode, Encoding, Receiver, Slot, TrialRecord};
use crate::error::{Error, Result};
use crate::synthesis::{smallest_indices, Synthesizer};

/// How the good set of a split-channel family is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum GoodSetRule {
    /// `√F < 2^{−N^β}`.
    Threshold { beta: f64 },
    /// The `k` indices of smallest `√F` (ties to the lower index).
    Budget { k: usize },
}

impl Default for GoodSetRule {
    fn default() -> Self {
        GoodSetRule::Threshold { beta: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodBad {
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
}

/// Splits `0..N` into good and bad indices from the `√F` values.
pub fn classify_indices(root_fidelities: &[f64], rule: &GoodSetRule) -> Result<GoodBad> {
    let n = root_fidelities.len();
    let good = match *rule {
        GoodSetRule::Threshold { beta } => {
            if !(beta > 0.0 && beta < 0.5) {
                return Err(Error::Validation(format!("beta must lie in (0, 1/2), got {beta}")));
            }
            let threshold = 2f64.powf(-(n as f64).powf(beta));
            (0..n).filter(|&i| root_fidelities[i] < threshold).collect()
        }
        GoodSetRule::Budget { k } => {
            if k > n {
                return Err(Error::Validation(format!("budget {k} exceeds N = {n}")));
            }
            smallest_indices(root_fidelities, k)
        }
    };
    let bad = (0..n).filter(|i| !good.contains(i)).collect();
    Ok(GoodBad { good, bad })
}

/// `A_I = G₁∩G₂`, `A_II = G₁∩B₂`, `A_III = B₁∩G₂`, `A_IV = B₁∩B₂`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPartition {
    pub n: usize,
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
    pub a3: Vec<usize>,
    pub a4: Vec<usize>,
}

impl IndexPartition {
    pub fn new(first: &GoodBad, second: &GoodBad) -> Result<Self> {
        let n = first.good.len() + first.bad.len();
        if second.good.len() + second.bad.len() != n {
            return Err(Error::Validation("members disagree on N".into()));
        }
        let g1 = |i: &usize| first.good.contains(i);
        let g2 = |i: &usize| second.good.contains(i);
        let all: Vec<usize> = (0..n).collect();
        Ok(IndexPartition {
            n,
            a1: all.iter().copied().filter(|i| g1(i) && g2(i)).collect(),
            a2: all.iter().copied().filter(|i| g1(i) && !g2(i)).collect(),
            a3: all.iter().copied().filter(|i| !g1(i) && g2(i)).collect(),
            a4: all.iter().copied().filter(|i| !g1(i) && !g2(i)).collect(),
        })
    }

    /// A stream decoded by one receiver only: good indices carry data,
    /// the rest are frozen, nothing needs alignment.
    pub fn private(good: &GoodBad) -> Self {
        IndexPartition {
            n: good.good.len() + good.bad.len(),
            a1: good.good.clone(),
            a2: Vec::new(),
            a3: Vec::new(),
            a4: good.bad.clone(),
        }
    }

    pub fn class_of(&self, i: usize) -> u8 {
        if self.a1.contains(&i) {
            1
        } else if self.a2.contains(&i) {
            2
        } else if self.a3.contains(&i) {
            3
        } else {
            4
        }
    }

    pub fn is_cover(&self) -> bool {
        let mut all: Vec<usize> = [&self.a1, &self.a2, &self.a3, &self.a4].iter().flat_map(|v| v.iter().copied()).collect();
        all.sort_unstable();
        all == (0..self.n).collect::<Vec<_>>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotRef {
    pub block: usize,
    pub position: usize,
}

/// `target ^= source` on one stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnotPair {
    pub source: SlotRef,
    pub target: SlotRef,
}

/// Open (still incompatible) slots of one stream after a level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Incompatible {
    pub stream: usize,
    pub open: usize,
    pub blocks: usize,
}

impl Incompatible {
    pub fn fraction(&self, n: usize) -> f64 {
        self.open as f64 / (self.blocks * n) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentLevel {
    pub level: usize,
    pub stream: usize,
    pub pairs: Vec<CnotPair>,
    /// Unpaired slots of the larger side, frozen.
    pub surplus: Vec<SlotRef>,
    pub incompatible: Vec<Incompatible>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSchedule {
    pub n: usize,
    pub m: usize,
    pub blocks: usize,
    /// Streams aligned in rotation, one per level.
    pub aligned: Vec<usize>,
    pub partitions: Vec<IndexPartition>,
    pub levels: Vec<AlignmentLevel>,
    /// Slots still open after the last level, frozen: `residual[stream]`.
    pub residual: Vec<Vec<SlotRef>>,
    /// Block decoding order for member 1 and member 2.
    pub orders: [Vec<usize>; 2],
}

/// Builds `m` alignment levels over `2^m` blocks. Level `ℓ` aligns stream
/// `aligned[(ℓ − 1) mod |aligned|]`.
pub fn build_alignment(partitions: Vec<IndexPartition>, aligned: Vec<usize>, m: usize, limits: &Limits) -> Result<AlignmentSchedule> {
    let n = partitions.first().map(|p| p.n).ok_or_else(|| Error::Validation("no partitions".into()))?;
    if partitions.iter().any(|p| p.n != n || !p.is_cover()) {
        return Err(Error::Validation("partitions must cover the same 0..N".into()));
    }
    if let Some(&s) = aligned.iter().find(|&&s| s >= partitions.len()) {
        return Err(Error::Validation(format!("aligned stream {s} does not exist")));
    }
    if m > 0 && aligned.is_empty() {
        return Err(Error::Validation("alignment levels need at least one aligned stream".into()));
    }
    let blocks = 1usize
        .checked_shl(m as u32)
        .filter(|&b| m < 32 && b.saturating_mul(n) <= limits.max_contexts)
        .ok_or_else(|| Error::Resource(format!("2^{m} blocks of length {n} exceed max_contexts")))?;
    let k = partitions.len();
    let at = |block: usize, v: &[usize]| v.iter().map(|&p| SlotRef { block, position: p }).collect::<Vec<_>>();
    let mut open_ii: Vec<Vec<SlotRef>> = partitions.iter().map(|p| at(0, &p.a2)).collect();
    let mut open_iii: Vec<Vec<SlotRef>> = partitions.iter().map(|p| at(0, &p.a3)).collect();
    let mut levels = Vec::with_capacity(m);
    for level in 1..=m {
        let half = 1usize << (level - 1);
        let shift = |v: &[SlotRef]| v.iter().map(|r| SlotRef { block: r.block + half, position: r.position }).collect::<Vec<_>>();
        let stream = aligned[(level - 1) % aligned.len()];
        let mut pairs = Vec::new();
        let mut surplus = Vec::new();
        for s in 0..k {
            let (ii1, iii1) = (open_ii[s].clone(), open_iii[s].clone());
            let (ii2, iii2) = (shift(&ii1), shift(&iii1));
            if s == stream {
                let c = ii1.len().min(iii2.len());
                pairs = (0..c).map(|t| CnotPair { source: ii1[t], target: iii2[t] }).collect();
                surplus.extend_from_slice(&ii1[c..]);
                surplus.extend_from_slice(&iii2[c..]);
                open_ii[s] = ii2;
                open_iii[s] = iii1;
            } else {
                open_ii[s] = [ii1, ii2].concat();
                open_iii[s] = [iii1, iii2].concat();
            }
        }
        let incompatible = (0..k)
            .map(|s| Incompatible { stream: s, open: open_ii[s].len() + open_iii[s].len(), blocks: 2 * half })
            .collect();
        levels.push(AlignmentLevel { level, stream, pairs, surplus, incompatible });
    }
    let residual = (0..k)
        .map(|s| {
            let mut v = [open_ii[s].clone(), open_iii[s].clone()].concat();
            v.sort_unstable();
            v
        })
        .collect();
    Ok(AlignmentSchedule {
        n,
        m,
        blocks,
        aligned,
        partitions,
        levels,
        residual,
        orders: [(0..blocks).collect(), (0..blocks).rev().collect()],
    })
}

impl AlignmentSchedule {
    pub fn streams(&self) -> usize {
        self.partitions.len()
    }

    /// Open slots of `stream` after the last level, as an exact fraction
    /// `(open, blocks · N)`.
    pub fn incompatible(&self, stream: usize) -> (usize, usize) {
        let open = self.residual[stream].len();
        (open, self.blocks * self.n)
    }

    /// Number of levels that aligned `stream`.
    pub fn levels_for(&self, stream: usize) -> usize {
        self.levels.iter().filter(|l| l.stream == stream).count()
    }

    /// Slot layout: `A_I` carries fresh data in every block, `A_IV`,
    /// surplus and residual slots are frozen to 0, and the two ends of every
    /// CNOT pair carry the same message.
    pub fn encoding(&self) -> Result<Encoding> {
        let k = self.streams();
        #[derive(Clone, Copy)]
        enum Pending {
            Fresh,
            Frozen,
            Pair(usize),
        }
        let mut layout = vec![vec![vec![Pending::Frozen; self.n]; k]; self.blocks];
        for b in 0..self.blocks {
            for (s, p) in self.partitions.iter().enumerate() {
                for &i in &p.a1 {
                    layout[b][s][i] = Pending::Fresh;
                }
            }
        }
        let mut pair_count = 0;
        for level in &self.levels {
            for pair in &level.pairs {
                layout[pair.source.block][level.stream][pair.source.position] = Pending::Pair(pair_count);
                layout[pair.target.block][level.stream][pair.target.position] = Pending::Pair(pair_count);
                pair_count += 1;
            }
        }
        let mut pair_ids: Vec<Option<usize>> = vec![None; pair_count];
        let mut next = 0;
        let mut slots = vec![vec![vec![Slot::Frozen(0); self.n]; k]; self.blocks];
        for b in 0..self.blocks {
            for s in 0..k {
                for i in 0..self.n {
                    slots[b][s][i] = match layout[b][s][i] {
                        Pending::Frozen => Slot::Frozen(0),
                        Pending::Fresh => {
                            next += 1;
                            Slot::Message(next - 1)
                        }
                        Pending::Pair(p) => Slot::Message(*pair_ids[p].get_or_insert_with(|| {
                            next += 1;
                            next - 1
                        })),
                    };
                }
            }
        }
        Encoding::new(self.n, k, slots)
    }

    /// Applies every CNOT of the schedule to raw bits `[block][stream][pos]`.
    pub fn apply_cnots(&self, bits: &mut [Vec<Vec<u8>>]) {
        for level in &self.levels {
            for pair in &level.pairs {
                let src = bits[pair.source.block][level.stream][pair.source.position];
                bits[pair.target.block][level.stream][pair.target.position] ^= src;
            }
        }
    }

    /// Checks that in each member's order every CNOT end that the member
    /// cannot decode comes after the end it can decode.
    pub fn order_is_valid(&self) -> bool {
        let rank = |order: &[usize], b: usize| order.iter().position(|&x| x == b).unwrap_or(usize::MAX);
        self.levels.iter().flat_map(|l| l.pairs.iter()).all(|p| {
            rank(&self.orders[0], p.source.block) < rank(&self.orders[0], p.target.block)
                && rank(&self.orders[1], p.target.block) < rank(&self.orders[1], p.source.block)
        })
    }
}

/// Componentwise minimum of the members' rate points.
pub fn compound_rate_targets(points: &[RatePoint]) -> Result<RatePoint> {
    let first = points.first().ok_or_else(|| Error::Validation("no rate points".into()))?;
    if points.iter().any(|p| p.rates.len() != first.rates.len()) {
        return Err(Error::Validation("rate points differ in sender count".into()));
    }
    let rates = (0..first.rates.len())
        .map(|s| points.iter().map(|p| p.rates[s]).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(RatePoint { rates })
}

/// Per-member ingredients of a compound code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberDesign {
    pub path: ChainPath,
    pub rates: RatePoint,
    pub profile: Vec<StepProfile>,
    pub good: Vec<GoodBad>,
}

/// A complete two-member compound MAC code.
#[derive(Debug)]
pub struct CompoundCode {
    pub members: [MemberDesign; 2],
    pub schedule: AlignmentSchedule,
    pub encoding: Encoding,
    receivers: [Receiver; 2],
}

impl CompoundCode {
    /// `rules[member][sender]` picks each member's good sets; `m` levels
    /// alternate over all senders.
    pub fn build(
        compound: &CompoundMac,
        n: usize,
        paths: [ChainPath; 2],
        rules: &[Vec<GoodSetRule>; 2],
        m: usize,
        limits: &Limits,
    ) -> Result<Self> {
        if compound.members().len() != 2 {
            return Err(Error::Validation(format!(
                "compound alignment is defined for two members, got {}",
                compound.members().len()
            )));
        }
        let k = compound.senders();
        let mut designs = Vec::with_capacity(2);
        let mut synths = Vec::with_capacity(2);
        for (idx, path) in paths.into_iter().enumerate() {
            let synth = Synthesizer::with_limits(&compound.members()[idx], n, *limits)?;
            let profile = path_profile(&synth, &path)?;
            let rates = chain_rates(&synth, &path)?;
            let roots = per_sender_root_fidelities(&profile, k, n);
            if rules[idx].len() != k {
                return Err(Error::Validation(format!("member {} needs {k} good-set rules", idx + 1)));
            }
            let good = roots.iter().zip(&rules[idx]).map(|(r, rule)| classify_indices(r, rule)).collect::<Result<_>>()?;
            designs.push(MemberDesign { path, rates, profile, good });
            synths.push(synth);
        }
        let partitions = (0..k)
            .map(|s| IndexPartition::new(&designs[0].good[s], &designs[1].good[s]))
            .collect::<Result<Vec<_>>>()?;
        let schedule = build_alignment(partitions, (0..k).collect(), m, limits)?;
        let encoding = schedule.encoding()?;
        let mut receivers = Vec::with_capacity(2);
        for (idx, synth) in synths.into_iter().enumerate() {
            let actual = compound.members()[idx].as_ref().clone();
            let path = designs[idx].path.clone();
            receivers.push(Receiver::new(synth, (0..k).collect(), path, schedule.orders[idx].clone(), actual)?);
        }
        let [r0, r1]: [Receiver; 2] = receivers.try_into().expect("two receivers");
        let [d0, d1]: [MemberDesign; 2] = designs.try_into().expect("two designs");
        Ok(CompoundCode { members: [d0, d1], schedule, encoding, receivers: [r0, r1] })
    }

    /// The receiver used when `member` (0 or 1) is the realized channel.
    pub fn receiver(&self, member: usize) -> &Receiver {
        &self.receivers[member]
    }

    /// Achieved rate of each sender: distinct message bits over `blocks · N`.
    pub fn coded_rates(&self) -> Vec<f64> {
        (0..self.encoding.streams)
            .map(|s| self.encoding.messages_of(&[s]).len() as f64 / (self.schedule.blocks * self.schedule.n) as f64)
            .collect()
    }
}

/// Decodes `trials` transmissions over member `member` (0 or 1).
pub fn compound_decode(code: &CompoundCode, member: usize, mode: DecodeMode, trials: u64, seed: u64) -> Result<Vec<TrialRecord>> {
    if member > 1 {
        return Err(Error::Validation(format!("member index {} out of range", member + 1)));
    }
    Ok(simulate(&code.encoding, &[code.receiver(member)], mode, trials, seed)?
        .into_iter()
        .map(|mut v| v.remove(0))
        .collect())
}
