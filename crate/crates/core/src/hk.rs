//! Han–Kobayashi rate splitting for the two-user interference channel.
//!
//! Sender 1 splits its message into a private stream `P1` (rate `S1`) and a
//! common stream `C1` (rate `T1`); sender 2 into `C2` (rate `T2`) and `P2`
//! (rate `S2`). Symbols are formed per channel use by `x1(p1, c1)` and
//! `x2(c2, p2)`. Receiver 1 decodes `(P1, C1, C2)`, receiver 2 decodes
//! `(P2, C1, C2)`; each sees a three-sender MAC in which the other private
//! stream is averaged out. The common streams are aligned across blocks as in
//! a two-member compound MAC.

use serde::{Deserialize, Serialize};

use crate::chains::{chain_rates, path_profile, per_sender_root_fidelities, search_path, ChainPath, RatePoint};
use crate::channel::{CqInterferenceChannel, OutputTable};
use crate::compound::{build_alignment, classify_indices, AlignmentSchedule, GoodSetRule, IndexPartition};
use crate::config::Limits;
use crate::decoder::{simulate, DecodeMode, Encoding, Receiver, TrialRecord};
use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, Operator};
use crate::synthesis::Synthesizer;

/// Global stream indices.
pub const P1: usize = 0;
pub const C1: usize = 1;
pub const C2: usize = 2;
pub const P2: usize = 3;

/// Symbol maps and target rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSplitSpec {
    /// `x1[p1][c1]`.
    pub x1: [[u8; 2]; 2],
    /// `x2[c2][p2]`.
    pub x2: [[u8; 2]; 2],
    /// `(S1, S2, T1, T2)`.
    #[serde(default)]
    pub rates: [f64; 4],
}

impl RateSplitSpec {
    /// `x1 = p1`, `x2 = p2`: no common messages.
    pub fn private_only() -> Self {
        RateSplitSpec { x1: [[0, 0], [1, 1]], x2: [[0, 1], [0, 1]], rates: [0.0; 4] }
    }

    /// `x1 = p1 ⊕ c1`, `x2 = c2 ⊕ p2`.
    pub fn xor() -> Self {
        RateSplitSpec { x1: [[0, 1], [1, 0]], x2: [[0, 1], [1, 0]], rates: [0.0; 4] }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Spec {
            location: "split".into(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x1.iter().chain(&self.x2).flatten().any(|&b| b > 1) {
            return Err(Error::Validation("symbol maps must output bits".into()));
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Validation(format!("rates must be non-negative, got {:?}", self.rates)));
        }
        Ok(())
    }

    pub fn symbols(&self, p1: u8, c1: u8, c2: u8, p2: u8) -> (u8, u8) {
        (self.x1[p1 as usize][c1 as usize], self.x2[c2 as usize][p2 as usize])
    }

    /// `(S1, S2, T1, T2)` as named fields.
    pub fn target(&self) -> HkRates {
        let [s1, s2, t1, t2] = self.rates;
        HkRates { s1, s2, t1, t2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HkRates {
    pub s1: f64,
    pub s2: f64,
    pub t1: f64,
    pub t2: f64,
}

impl HkRates {
    pub fn r1(&self) -> f64 {
        self.s1 + self.t1
    }

    pub fn r2(&self) -> f64 {
        self.s2 + self.t2
    }
}

/// The seven bounds at one receiver; `s` is that receiver's private rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiverBounds {
    /// `I(P;B|C1 C2)`
    pub s: f64,
    /// `I(C1;B|P C2)`
    pub t1: f64,
    /// `I(C2;B|P C1)`
    pub t2: f64,
    /// `I(P C1;B|C2)`
    pub s_t1: f64,
    /// `I(P C2;B|C1)`
    pub s_t2: f64,
    /// `I(C1 C2;B|P)`
    pub t1_t2: f64,
    /// `I(P C1 C2;B)`
    pub s_t1_t2: f64,
}

impl ReceiverBounds {
    pub fn values(&self) -> [f64; 7] {
        [self.s, self.t1, self.t2, self.s_t1, self.s_t2, self.t1_t2, self.s_t1_t2]
    }

    pub const NAMES: [&'static str; 7] = ["S", "T1", "T2", "S+T1", "S+T2", "T1+T2", "S+T1+T2"];

    /// Smallest slack over the seven inequalities.
    pub fn min_slack(&self, s: f64, t1: f64, t2: f64) -> f64 {
        let lhs = [s, t1, t2, s + t1, s + t2, t1 + t2, s + t1 + t2];
        self.values().iter().zip(lhs).map(|(b, l)| b - l).fold(f64::INFINITY, f64::min)
    }

    /// Largest private rate compatible with `(t1, t2)`, if any.
    pub fn max_private(&self, t1: f64, t2: f64) -> f64 {
        self.s.min(self.s_t1 - t1).min(self.s_t2 - t2).min(self.s_t1_t2 - t1 - t2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HkRegion {
    pub receiver1: ReceiverBounds,
    pub receiver2: ReceiverBounds,
}

impl HkRegion {
    pub fn min_slack(&self, r: &HkRates) -> f64 {
        self.receiver1.min_slack(r.s1, r.t1, r.t2).min(self.receiver2.min_slack(r.s2, r.t1, r.t2))
    }

    pub fn contains(&self, r: &HkRates, tol: f64) -> bool {
        [r.s1, r.s2, r.t1, r.t2].iter().all(|&x| x >= -tol) && self.min_slack(r) >= -tol
    }
}

/// Per-use output tables of one receiver: `actual` over `(p1, c1, c2, p2)`
/// and `model` over (own private, c1, c2) with the other private averaged.
#[derive(Clone, Debug)]
pub struct ReceiverTables {
    pub actual: OutputTable,
    pub model: OutputTable,
}

/// Builds both receivers' tables.
pub fn receiver_tables(ic: &CqInterferenceChannel, split: &RateSplitSpec) -> Result<[ReceiverTables; 2]> {
    let (mac1, mac2) = ic.induced_macs()?;
    let macs = [mac1, mac2];
    let mut out = Vec::with_capacity(2);
    for (r, mac) in macs.iter().enumerate() {
        let actual_states = (0..16usize)
            .map(|idx| {
                let bit = |k: usize| ((idx >> (3 - k)) & 1) as u8;
                let (x1, x2) = split.symbols(bit(P1), bit(C1), bit(C2), bit(P2));
                mac.output(&[x1, x2]).clone()
            })
            .collect::<Vec<_>>();
        let actual = OutputTable::new(4, actual_states)?;
        let own = if r == 0 { P1 } else { P2 };
        let other = if r == 0 { P2 } else { P1 };
        let model_states = (0..8usize)
            .map(|idx| {
                let mut partial = [None; 4];
                partial[own] = Some(((idx >> 2) & 1) as u8);
                partial[C1] = Some(((idx >> 1) & 1) as u8);
                partial[C2] = Some((idx & 1) as u8);
                partial[other] = None;
                DensityMatrix::from_operator_unchecked(actual.averaged_output(&partial))
            })
            .collect::<Vec<_>>();
        out.push(ReceiverTables { actual, model: OutputTable::new(3, model_states)? });
    }
    let [a, b]: [ReceiverTables; 2] = out.try_into().expect("two receivers");
    Ok([a, b])
}

fn bounds_of(model: &OutputTable) -> Result<ReceiverBounds> {
    let mi = |t: &[usize], g: &[usize]| model.mutual_information(t, g);
    Ok(ReceiverBounds {
        s: mi(&[0], &[1, 2])?,
        t1: mi(&[1], &[0, 2])?,
        t2: mi(&[2], &[0, 1])?,
        s_t1: mi(&[0, 1], &[2])?,
        s_t2: mi(&[0, 2], &[1])?,
        t1_t2: mi(&[1, 2], &[0])?,
        s_t1_t2: mi(&[0, 1, 2], &[])?,
    })
}

/// The fourteen Han–Kobayashi bounds for uniform independent streams.
pub fn hk_bounds(ic: &CqInterferenceChannel, split: &RateSplitSpec) -> Result<HkRegion> {
    split.validate()?;
    let [r1, r2] = receiver_tables(ic, split)?;
    Ok(HkRegion { receiver1: bounds_of(&r1.model)?, receiver2: bounds_of(&r2.model)? })
}

/// A Pareto-optimal pair `(R1, R2)` with the split achieving it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub rates: HkRates,
    pub r1: f64,
    pub r2: f64,
    /// Smallest slack over all fourteen bounds.
    pub slack: f64,
}

/// Step of the local refinement around breakpoints.
pub const REFINE_STEP: f64 = 0.01;

/// Sweeps common rates `(T1, T2)` over a grid of step `resolution`, refined
/// to `REFINE_STEP` around every breakpoint of the piecewise-linear bounds;
/// private rates are set to their largest feasible values. Returns the
/// Pareto frontier of `(S1 + T1, S2 + T2)` ordered by `R1`.
pub fn hk_achievable_pairs(region: &HkRegion, resolution: f64) -> Result<Vec<FrontierPoint>> {
    if !(resolution > 0.0) {
        return Err(Error::Validation(format!("resolution must be positive, got {resolution}")));
    }
    let (b1, b2) = (&region.receiver1, &region.receiver2);
    let t1_max = b1.t1.min(b2.t1).min(b1.t1_t2).min(b2.t1_t2).max(0.0);
    let t2_max = b1.t2.min(b2.t2).min(b1.t1_t2).min(b2.t1_t2).max(0.0);
    let mut breaks: Vec<f64> = Vec::new();
    for b in [b1, b2] {
        let v = b.values();
        breaks.extend(v);
        for x in v {
            for y in v {
                breaks.push(x - y);
            }
        }
    }
    let axis = |max: f64| -> Vec<f64> {
        let mut pts: Vec<f64> = Vec::new();
        let steps = (max / resolution).floor() as usize;
        pts.extend((0..=steps).map(|k| k as f64 * resolution));
        pts.push(max);
        let fine = (resolution / REFINE_STEP).round().max(1.0) as i64;
        for &b in &breaks {
            if b < -resolution || b > max + resolution {
                continue;
            }
            pts.push(b);
            for k in -fine..=fine {
                pts.push(b + k as f64 * REFINE_STEP);
            }
        }
        let mut pts: Vec<f64> = pts.into_iter().filter(|&t| (0.0..=max).contains(&t)).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        pts
    };
    let (ax1, ax2) = (axis(t1_max), axis(t2_max));
    let mut candidates = Vec::new();
    for &t1 in &ax1 {
        for &t2 in &ax2 {
            if t1 + t2 > b1.t1_t2.min(b2.t1_t2) + 1e-12 {
                continue;
            }
            let s1 = b1.max_private(t1, t2);
            let s2 = b2.max_private(t1, t2);
            if s1 < -1e-12 || s2 < -1e-12 {
                continue;
            }
            let (s1, s2) = (s1.max(0.0), s2.max(0.0));
            let rates = HkRates { s1, s2, t1, t2 };
            candidates.push(FrontierPoint { rates, r1: rates.r1(), r2: rates.r2(), slack: region.min_slack(&rates) });
        }
    }
    candidates.sort_by(|a, b| b.r1.total_cmp(&a.r1).then(b.r2.total_cmp(&a.r2)));
    let mut frontier: Vec<FrontierPoint> = Vec::new();
    for c in candidates {
        if frontier.last().is_none_or(|f| c.r2 > f.r2 + 1e-12) {
            frontier.push(c);
        }
    }
    frontier.reverse();
    if let Some(bad) = frontier.iter().find(|f| !region.contains(&f.rates, 1e-7)) {
        return Err(Error::Invariant(format!("frontier point {bad:?} violates a bound")));
    }
    Ok(frontier)
}

/// One receiver's half of an HK code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HkReceiverPlan {
    /// Global streams decoded, in MAC sender order.
    pub streams: Vec<usize>,
    pub path: ChainPath,
    /// Rates of the path for (own private, C1, C2).
    pub path_rates: RatePoint,
    /// Requested (own private, C1, C2).
    pub target: [f64; 3],
    /// Information-set sizes (own private, C1, C2).
    pub budgets: [usize; 3],
    pub block_order: Vec<usize>,
}

/// A complete HK code: shared encoding and two receivers.
#[derive(Debug)]
pub struct HkCode {
    pub n: usize,
    pub target: HkRates,
    pub plans: [HkReceiverPlan; 2],
    pub schedule: AlignmentSchedule,
    pub encoding: Encoding,
    receivers: [Receiver; 2],
}

impl HkCode {
    pub fn receiver(&self, r: usize) -> &Receiver {
        &self.receivers[r]
    }

    /// Rate of each stream `[P1, C1, C2, P2]` actually carried.
    pub fn coded_rates(&self) -> [f64; 4] {
        let total = (self.schedule.blocks * self.n) as f64;
        let r = |s: usize| self.encoding.messages_of(&[s]).len() as f64 / total;
        [r(P1), r(C1), r(C2), r(P2)]
    }
}

/// Builds the two receivers' plans for `target`.
pub fn build_hk_code(
    ic: &CqInterferenceChannel,
    split: &RateSplitSpec,
    target: HkRates,
    n: usize,
    m: usize,
    limits: &Limits,
) -> Result<HkCode> {
    let region = hk_bounds(ic, split)?;
    if !region.contains(&target, 1e-7) {
        return Err(Error::Validation(format!(
            "target {target:?} lies outside the region (slack {:.3e})",
            region.min_slack(&target)
        )));
    }
    let tables = receiver_tables(ic, split)?;
    let budget = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let mut plans = Vec::with_capacity(2);
    let mut synths = Vec::with_capacity(2);
    let mut goods = Vec::with_capacity(2);
    for (r, t) in tables.iter().enumerate() {
        let own = if r == 0 { target.s1 } else { target.s2 };
        let triple = [own, target.t1, target.t2];
        let synth = Synthesizer::with_limits(&t.model, n, *limits)?;
        let choice = search_path(&synth, &triple)?;
        let slack = 1.0 / n as f64 + 1e-6;
        if choice.deficit > slack {
            return Err(Error::Validation(format!(
                "receiver {}: best path {} achieves {:?}, short of {:?} by {:.4} > 1/N",
                r + 1,
                choice.path,
                choice.rates.rates,
                triple,
                choice.deficit
            )));
        }
        let profile = path_profile(&synth, &choice.path)?;
        let roots = per_sender_root_fidelities(&profile, 3, n);
        let budgets = [budget(own), budget(target.t1), budget(target.t2)];
        let good = roots
            .iter()
            .zip(budgets)
            .map(|(rf, k)| classify_indices(rf, &GoodSetRule::Budget { k }))
            .collect::<Result<Vec<_>>>()?;
        let streams = if r == 0 { vec![P1, C1, C2] } else { vec![P2, C1, C2] };
        plans.push(HkReceiverPlan {
            streams,
            path_rates: chain_rates(&synth, &choice.path)?,
            path: choice.path,
            target: triple,
            budgets,
            block_order: Vec::new(),
        });
        synths.push(synth);
        goods.push(good);
    }
    let partitions = vec![
        IndexPartition::private(&goods[0][0]),
        IndexPartition::new(&goods[0][1], &goods[1][1])?,
        IndexPartition::new(&goods[0][2], &goods[1][2])?,
        IndexPartition::private(&goods[1][0]),
    ];
    let schedule = build_alignment(partitions, vec![C1, C2], m, limits)?;
    let encoding = schedule.encoding()?;
    let mut receivers = Vec::with_capacity(2);
    for (r, (synth, t)) in synths.into_iter().zip(tables).enumerate() {
        plans[r].block_order = schedule.orders[r].clone();
        receivers.push(Receiver::new(
            synth,
            plans[r].streams.clone(),
            plans[r].path.clone(),
            plans[r].block_order.clone(),
            t.actual,
        )?);
    }
    let [r0, r1]: [Receiver; 2] = receivers.try_into().expect("two receivers");
    let [p0, p1]: [HkReceiverPlan; 2] = plans.try_into().expect("two plans");
    Ok(HkCode { n, target, plans: [p0, p1], schedule, encoding, receivers: [r0, r1] })
}

/// Simulates `trials` transmissions; both receivers decode each one.
/// Returns `[receiver 1 records, receiver 2 records]`.
pub fn hk_decode(code: &HkCode, mode: DecodeMode, trials: u64, seed: u64) -> Result<[Vec<TrialRecord>; 2]> {
    let runs = simulate(&code.encoding, &[code.receiver(0), code.receiver(1)], mode, trials, seed)?;
    let mut a = Vec::with_capacity(runs.len());
    let mut b = Vec::with_capacity(runs.len());
    for mut pair in runs {
        b.push(pair.pop().expect("two records"));
        a.push(pair.pop().expect("two records"));
    }
    Ok([a, b])
}

/// Applies a fixed channel to receiver 1's output: `ρ ↦ Σ_k K_k ρ K_k†`
/// given as a column-stochastic matrix on the computational basis (commuting
/// outputs only).
pub fn degrade_receiver1(ic: &CqInterferenceChannel, stochastic: &[Vec<f64>]) -> Result<CqInterferenceChannel> {
    let [d1, d2] = ic.dims();
    if stochastic.len() != d1 || stochastic.iter().any(|r| r.len() != d1) {
        return Err(Error::DimensionMismatch(d1, stochastic.len()));
    }
    let states = ic
        .table()
        .states()
        .iter()
        .map(|s| match s.operator() {
            Operator::Diagonal(p) => {
                let mut q = vec![0.0; d1 * d2];
                for a in 0..d1 {
                    for b in 0..d2 {
                        for a2 in 0..d1 {
                            q[a2 * d2 + b] += stochastic[a2][a] * p[a * d2 + b];
                        }
                    }
                }
                DensityMatrix::from_diagonal(&q)
            }
            Operator::Dense(_) => Err(Error::Validation("degradation is defined for commuting outputs".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    CqInterferenceChannel::new([d1, d2], states)
}
