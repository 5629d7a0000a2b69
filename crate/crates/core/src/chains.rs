//! Monotone chain rules for multiple access channels.
//!
//! A path lists, step by step, which sender's next bit is decoded. Rates are
//! exact: the step that decodes sender `s` after prefix lengths `lens`
//! contributes `H(B^N | lens) − H(B^N | lens + e_s)` bits, evaluated on the
//! synthesizer's entropy lattice.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::OutputTable;
use crate::config::Limits;
use crate::error::{Error, Result};
use crate::polar::CosetCodeSpec;
use crate::synthesis::{smallest_indices, SplitIndex, Synthesizer};

/// Above this many candidates, three-sender path search falls back to the
/// structured class.
pub const EXHAUSTIVE_PATH_LIMIT: usize = 100_000;

/// Tolerance for dominant-face membership.
pub const FACE_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChainPath {
    labels: Vec<u8>,
    senders: usize,
    n: usize,
}

impl ChainPath {
    /// Each label in `0..senders` must appear the same number of times.
    pub fn new(labels: Vec<u8>, senders: usize) -> Result<Self> {
        if senders == 0 || labels.is_empty() || !labels.len().is_multiple_of(senders) {
            return Err(Error::Validation(format!(
                "a path for {senders} senders needs a positive multiple of {senders} labels"
            )));
        }
        let n = labels.len() / senders;
        let mut counts = vec![0usize; senders];
        for &l in &labels {
            let l = l as usize;
            if l >= senders {
                return Err(Error::Validation(format!("label {l} out of range for {senders} senders")));
            }
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c != n) {
            return Err(Error::Validation(format!("every sender must appear {n} times, counts {counts:?}")));
        }
        Ok(ChainPath { labels, senders, n })
    }

    /// Parses a label string such as `"0110"`; the sender count is the
    /// largest label plus one, at least two.
    pub fn parse(text: &str) -> Result<Self> {
        let labels: Vec<u8> = text
            .trim()
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .filter(|&d| d < 10)
                    .map(|d| d as u8)
                    .ok_or_else(|| Error::Validation(format!("invalid path label {c:?}")))
            })
            .collect::<Result<_>>()?;
        let senders = labels.iter().copied().max().map_or(2, |m| (m as usize + 1).max(2));
        Self::new(labels, senders)
    }

    /// `σ_0^N σ_1^N …`: senders decoded one after another in the given order.
    pub fn sequential(order: &[usize], n: usize) -> Result<Self> {
        let labels = order.iter().flat_map(|&s| std::iter::repeat_n(s as u8, n)).collect();
        Self::new(labels, order.len())
    }

    /// `0^i 1^N 0^{N−i}`, the `i`-th member of `ν_{2N}`.
    pub fn nu(n: usize, i: usize) -> Result<Self> {
        if i > n {
            return Err(Error::Validation(format!("i = {i} exceeds N = {n}")));
        }
        let mut labels = vec![0u8; i];
        labels.extend(std::iter::repeat_n(1u8, n));
        labels.extend(std::iter::repeat_n(0u8, n - i));
        Self::new(labels, 2)
    }

    /// All of `ν_{2N}`, ordered by `i`.
    pub fn nu_class(n: usize) -> Result<Vec<Self>> {
        (0..=n).map(|i| Self::nu(n, i)).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn senders(&self) -> usize {
        self.senders
    }

    /// Per-sender block length `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The split index of every step, in path order.
    pub fn steps(&self) -> Vec<SplitIndex> {
        let mut lens = vec![0usize; self.senders];
        self.labels
            .iter()
            .map(|&l| {
                let s = l as usize;
                let idx = SplitIndex { sender: s, lens: lens.clone() };
                lens[s] += 1;
                idx
            })
            .collect()
    }
}

impl fmt::Display for ChainPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.labels {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for ChainPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl TryFrom<String> for ChainPath {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<ChainPath> for String {
    fn from(p: ChainPath) -> String {
        p.to_string()
    }
}

/// Per-sender rates in bits per channel use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub rates: Vec<f64>,
}

impl RatePoint {
    pub fn sum(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// `I(X_S; B | X_{S^c})` for every non-empty sender subset `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacBounds {
    pub senders: usize,
    /// `(S as a bitmask over senders, bound)`, ordered by mask.
    pub bounds: Vec<(u32, f64)>,
}

impl MacBounds {
    pub fn get(&self, subset: &[usize]) -> f64 {
        let mask = subset.iter().fold(0u32, |m, &s| m | 1 << s);
        self.bounds.iter().find(|b| b.0 == mask).map(|b| b.1).unwrap_or(f64::NAN)
    }

    /// `I(X_1 … X_k; B)`.
    pub fn sum_rate(&self) -> f64 {
        self.get(&(0..self.senders).collect::<Vec<_>>())
    }

    /// Largest violation of any bound by `point` (≤ 0 when inside).
    pub fn max_violation(&self, point: &RatePoint) -> f64 {
        self.bounds
            .iter()
            .map(|&(mask, b)| {
                let r: f64 = (0..self.senders).filter(|s| mask >> s & 1 == 1).map(|s| point.rates[s]).sum();
                r - b
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The rate-region bounds of a 2- or 3-sender MAC with uniform inputs.
pub fn mac_region_bounds(mac: impl AsRef<OutputTable>) -> Result<MacBounds> {
    let table = mac.as_ref();
    let k = table.senders();
    if !(2..=3).contains(&k) {
        return Err(Error::Validation(format!("region bounds need 2 or 3 senders, got {k}")));
    }
    let bounds = (1u32..1 << k)
        .map(|mask| {
            let target: Vec<usize> = (0..k).filter(|s| mask >> s & 1 == 1).collect();
            let given: Vec<usize> = (0..k).filter(|s| mask >> s & 1 == 0).collect();
            Ok((mask, table.mutual_information(&target, &given)?))
        })
        .collect::<Result<_>>()?;
    Ok(MacBounds { senders: k, bounds })
}

fn check_path(synth: &Synthesizer, path: &ChainPath) -> Result<()> {
    if path.senders() != synth.senders() || path.n() != synth.n() {
        return Err(Error::Validation(format!(
            "path {path} (senders {}, N {}) does not match the channel (senders {}, N {})",
            path.senders(),
            path.n(),
            synth.senders(),
            synth.n()
        )));
    }
    Ok(())
}

/// Per-step terms `I(S_k; B^N | S^{k−1})` along the path.
pub fn step_informations(synth: &Synthesizer, path: &ChainPath) -> Result<Vec<f64>> {
    check_path(synth, path)?;
    path.steps()
        .iter()
        .map(|idx| {
            let mut next = idx.lens.clone();
            next[idx.sender] += 1;
            Ok(synth.conditional_entropy(&idx.lens)? - synth.conditional_entropy(&next)?)
        })
        .collect()
}

pub fn chain_rates(synth: &Synthesizer, path: &ChainPath) -> Result<RatePoint> {
    let terms = step_informations(synth, path)?;
    let mut rates = vec![0.0; path.senders()];
    for (&l, t) in path.labels().iter().zip(terms) {
        rates[l as usize] += t;
    }
    let n = path.n() as f64;
    Ok(RatePoint { rates: rates.into_iter().map(|r| r / n).collect() })
}

/// `|R_1 − R̃_1|`, the first-sender rate difference.
pub fn path_distance(synth: &Synthesizer, p: &ChainPath, q: &ChainPath) -> Result<f64> {
    Ok((chain_rates(synth, p)?.rates[0] - chain_rates(synth, q)?.rates[0]).abs())
}

/// True when `q` is `p` with one transposition `b_i ↔ b_j` (`b_i ≠ b_j`)
/// across a run `b_{i+1} … b_{j−1}` of a single label.
pub fn are_neighbors(p: &ChainPath, q: &ChainPath) -> bool {
    if p.senders() != q.senders() || p.len() != q.len() {
        return false;
    }
    let diff: Vec<usize> = (0..p.len()).filter(|&k| p.labels[k] != q.labels[k]).collect();
    if diff.len() != 2 {
        return false;
    }
    let (i, j) = (diff[0], diff[1]);
    let (a, b) = (&p.labels, &q.labels);
    if a[i] != b[j] || a[j] != b[i] {
        return false;
    }
    let inner = &a[i + 1..j];
    inner.iter().all(|&x| x == a[i]) || inner.iter().all(|&x| x == a[j])
}

/// Every neighbor of `p`, in order of the transposed coordinates.
pub fn neighbors(p: &ChainPath) -> Vec<ChainPath> {
    let mut out = Vec::new();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p.labels[i] == p.labels[j] {
                continue;
            }
            let inner = &p.labels[i + 1..j];
            if inner.iter().all(|&x| x == p.labels[i]) || inner.iter().all(|&x| x == p.labels[j]) {
                let mut labels = p.labels.clone();
                labels.swap(i, j);
                out.push(ChainPath { labels, senders: p.senders, n: p.n });
            }
        }
    }
    out
}

/// `k b^{2N}`: each label repeated `k` times in place.
pub fn scale_path(p: &ChainPath, k: usize) -> Result<ChainPath> {
    if k == 0 {
        return Err(Error::Validation("scale factor must be at least 1".into()));
    }
    let labels = p.labels.iter().flat_map(|&l| std::iter::repeat_n(l, k)).collect();
    ChainPath::new(labels, p.senders)
}

/// Outcome of the dominant-face approximation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateApproximation {
    pub n: usize,
    pub i: usize,
    pub path: ChainPath,
    pub rates: RatePoint,
    /// `|R_1 − R_x|`.
    pub gap: f64,
    /// True when `N > 1/ε` was attainable within the caps.
    pub guaranteed: bool,
}

fn feasible(table: &OutputTable, n: usize, limits: &Limits) -> bool {
    let dim_ok = table.dim().checked_pow(n as u32).is_some_and(|d| d <= limits.max_dim);
    let ctx_bits = table.senders() * n - 1;
    dim_ok && ctx_bits < usize::BITS as usize && (1usize << ctx_bits) <= limits.max_contexts
}

/// Finds `b ∈ ν_{2N}` whose first rate is closest to `target.0`, with `N` the
/// smallest power of two above `1/ε` (or the largest one the caps allow).
pub fn approximate_rate_pair(
    mac: impl AsRef<OutputTable>,
    target: (f64, f64),
    epsilon: f64,
    limits: &Limits,
) -> Result<RateApproximation> {
    let table = mac.as_ref();
    if table.senders() != 2 {
        return Err(Error::Validation("rate-pair approximation needs a two-sender MAC".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Validation(format!("epsilon must be positive, got {epsilon}")));
    }
    let bounds = mac_region_bounds(table)?;
    let (rx, ry) = target;
    let ixy = bounds.sum_rate();
    let lo = ixy - bounds.get(&[1]); // I(X;B) = I(XY;B) − I(Y;B|X)
    let hi = bounds.get(&[0]); // I(X;B|Y)
    if (rx + ry - ixy).abs() > FACE_TOLERANCE || rx < lo - FACE_TOLERANCE || rx > hi + FACE_TOLERANCE {
        return Err(Error::Validation(format!(
            "target ({rx}, {ry}) is not on the dominant face (sum {ixy}, R_x ∈ [{lo}, {hi}])"
        )));
    }
    let mut wanted = 1usize;
    while (wanted as f64) <= 1.0 / epsilon {
        wanted *= 2;
    }
    let mut n = wanted;
    while n > 1 && !feasible(table, n, limits) {
        n /= 2;
    }
    if n < 2 && wanted >= 2 {
        return Err(Error::Resource(format!("even N = 2 exceeds the caps {limits:?}")));
    }
    let synth = Synthesizer::with_limits(table, n, *limits)?;
    let mut best: Option<RateApproximation> = None;
    for i in 0..=n {
        let path = ChainPath::nu(n, i)?;
        let rates = chain_rates(&synth, &path)?;
        let gap = (rates.rates[0] - rx).abs();
        if best.as_ref().is_none_or(|b| gap < b.gap) {
            best = Some(RateApproximation { n, i, path, rates, gap, guaranteed: n == wanted });
        }
    }
    Ok(best.expect("ν_{2N} is non-empty"))
}

/// All label sequences with `n` copies of each of `senders` labels, in
/// lexicographic order.
pub fn all_paths(senders: usize, n: usize) -> Result<Vec<ChainPath>> {
    let count = multinomial(senders, n);
    if count > EXHAUSTIVE_PATH_LIMIT {
        return Err(Error::Resource(format!("{count} paths exceed the enumeration limit")));
    }
    let mut out = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(senders * n);
    let mut left = vec![n; senders];
    fn rec(labels: &mut Vec<u8>, left: &mut [usize], senders: usize, out: &mut Vec<ChainPath>) {
        if left.iter().all(|&c| c == 0) {
            out.push(ChainPath::new(labels.clone(), senders).expect("balanced by construction"));
            return;
        }
        for s in 0..senders {
            if left[s] > 0 {
                left[s] -= 1;
                labels.push(s as u8);
                rec(labels, left, senders, out);
                labels.pop();
                left[s] += 1;
            }
        }
    }
    rec(&mut labels, &mut left, senders, &mut out);
    Ok(out)
}

/// Number of paths `(kN)! / (N!)^k`, saturating.
pub fn multinomial(senders: usize, n: usize) -> usize {
    let mut acc: u128 = 1;
    let mut total = 0u128;
    for _ in 0..senders {
        for j in 1..=n as u128 {
            total += 1;
            acc = acc * total / j;
            if acc > usize::MAX as u128 {
                return usize::MAX;
            }
        }
    }
    acc as usize
}

/// Union over sender orders `σ` of `σ0^a σ1^b σ2^N σ1^{N−b} σ0^{N−a}`,
/// deduplicated, in generation order.
pub fn structured_three_sender_paths(n: usize) -> Vec<ChainPath> {
    let perms = [[0u8, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for p in perms {
        for a in 0..=n {
            for b in 0..=n {
                let mut labels = Vec::with_capacity(3 * n);
                labels.extend(std::iter::repeat_n(p[0], a));
                labels.extend(std::iter::repeat_n(p[1], b));
                labels.extend(std::iter::repeat_n(p[2], n));
                labels.extend(std::iter::repeat_n(p[1], n - b));
                labels.extend(std::iter::repeat_n(p[0], n - a));
                if seen.insert(labels.clone()) {
                    out.push(ChainPath::new(labels, 3).expect("balanced"));
                }
            }
        }
    }
    out
}

/// A path whose rates best cover `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathChoice {
    pub path: ChainPath,
    pub rates: RatePoint,
    /// `max_s (target_s − R_s)^+`.
    pub deficit: f64,
    /// `max_s |target_s − R_s|`.
    pub distance: f64,
}

/// Searches the candidate paths for the one minimizing the largest
/// per-sender shortfall below `target`, then the L∞ distance, then
/// enumeration order.
pub fn search_path(synth: &Synthesizer, target: &[f64]) -> Result<PathChoice> {
    if target.len() != synth.senders() {
        return Err(Error::Validation("target must give one rate per sender".into()));
    }
    let candidates = if multinomial(synth.senders(), synth.n()) <= EXHAUSTIVE_PATH_LIMIT {
        all_paths(synth.senders(), synth.n())?
    } else if synth.senders() == 3 {
        structured_three_sender_paths(synth.n())
    } else {
        ChainPath::nu_class(synth.n())?
    };
    let mut best: Option<PathChoice> = None;
    for path in candidates {
        let rates = chain_rates(synth, &path)?;
        let deficit = target.iter().zip(&rates.rates).map(|(t, r)| (t - r).max(0.0)).fold(0.0, f64::max);
        let distance = target.iter().zip(&rates.rates).map(|(t, r)| (t - r).abs()).fold(0.0, f64::max);
        let better = match &best {
            None => true,
            Some(b) => deficit < b.deficit || (deficit == b.deficit && distance < b.distance),
        };
        if better {
            best = Some(PathChoice { path, rates, deficit, distance });
        }
    }
    Ok(best.expect("candidate set is non-empty"))
}

/// Split-channel parameters of one step of a path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    pub sender: usize,
    /// Position within the sender's block (0-based).
    pub position: usize,
    pub holevo: f64,
    pub root_fidelity: f64,
}

pub fn path_profile(synth: &Synthesizer, path: &ChainPath) -> Result<Vec<StepProfile>> {
    let infos = step_informations(synth, path)?;
    path.steps()
        .into_iter()
        .zip(infos)
        .map(|(idx, holevo)| {
            let root_fidelity = synth.synthesize(&idx)?.root_fidelity();
            Ok(StepProfile { sender: idx.sender, position: idx.lens[idx.sender], holevo, root_fidelity })
        })
        .collect()
}

/// `√F` of every position, grouped per sender: `out[s][i]`.
pub fn per_sender_root_fidelities(profile: &[StepProfile], senders: usize, n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]; senders];
    for step in profile {
        out[step.sender][step.position] = step.root_fidelity;
    }
    out
}

/// Per-sender codes taking the `ks[s]` positions of smallest `√F`.
pub fn construct_mac_code(profile: &[StepProfile], senders: usize, n: usize, ks: &[usize]) -> Result<Vec<CosetCodeSpec>> {
    if ks.len() != senders {
        return Err(Error::Validation("one information-set size per sender required".into()));
    }
    let roots = per_sender_root_fidelities(profile, senders, n);
    roots
        .iter()
        .zip(ks)
        .map(|(r, &k)| {
            if k > n {
                return Err(Error::Validation(format!("K = {k} exceeds N = {n}")));
            }
            CosetCodeSpec::new(n, smallest_indices(r, k))
        })
        .collect()
}
