//! Exact synthesized (split) channels of the polar transform.
//!
//! A split channel is indexed by the sender whose next bit is being decoded
//! and by how many bits of each sender are already in the past register.
//! Past registers are classical, so every quantity is computed blockwise over
//! the uniform prefix assignments ("contexts") instead of materializing one
//! block-diagonal matrix.
//!
//! Averaged outputs use the recursive structure of `G_N`: with every prefix
//! of even length `2m`, the average output on `B^N` factors into the
//! half-length averages for `a = u_odd ⊕ u_even` (first `N/2` uses) and
//! `b = u_even` (last `N/2` uses).

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::channel::{CqChannel, OutputTable};
use crate::config::Limits;
use crate::error::{Error, Result};
use crate::polar::{log2_exact, CosetCodeSpec};
use crate::quantum::{operator_entropy, sqrt_fidelity_ops, DensityMatrix, Operator};

/// Per-sender prefix bits `u_1^{i}`, `v_1^{j}`, ...
pub type Context = Vec<Vec<u8>>;

/// Identifies a split channel: `sender` is decoded next, `lens[s]` bits of
/// sender `s` are already known.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SplitIndex {
    pub sender: usize,
    pub lens: Vec<usize>,
}

impl SplitIndex {
    /// `W_N^{(i+1)}` of a single-user channel (0-based `i`).
    pub fn single(i: usize) -> Self {
        SplitIndex { sender: 0, lens: vec![i] }
    }
}

type OpKey = (usize, Context);

/// Exact synthesis engine for one channel at one block length, with memo
/// tables shared across split indices.
pub struct Synthesizer {
    table: OutputTable,
    n: usize,
    limits: Limits,
    ops: Mutex<HashMap<OpKey, Arc<Operator>>>,
    entropies: Mutex<HashMap<OpKey, f64>>,
    root_fidelities: Mutex<HashMap<(usize, Context, Context), f64>>,
    lattice: Mutex<HashMap<Vec<usize>, f64>>,
}

impl std::fmt::Debug for Synthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Synthesizer")
            .field("senders", &self.table.senders())
            .field("n", &self.n)
            .field("dim", &self.table.dim())
            .finish()
    }
}

impl Synthesizer {
    pub fn new(table: impl AsRef<OutputTable>, n: usize) -> Result<Self> {
        Self::with_limits(table, n, Limits::default())
    }

    pub fn with_limits(table: impl AsRef<OutputTable>, n: usize, limits: Limits) -> Result<Self> {
        log2_exact(n)?;
        let table = table.as_ref().clone();
        if table.dim().checked_pow(n as u32).is_none_or(|d| d > limits.max_dim) {
            return Err(Error::Resource(format!(
                "output dimension {}^{} exceeds max_dim = {}",
                table.dim(),
                n,
                limits.max_dim
            )));
        }
        Ok(Synthesizer {
            table,
            n,
            limits,
            ops: Mutex::default(),
            entropies: Mutex::default(),
            root_fidelities: Mutex::default(),
            lattice: Mutex::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn senders(&self) -> usize {
        self.table.senders()
    }

    pub fn table(&self) -> &OutputTable {
        &self.table
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    /// Dimension of `B^N`.
    pub fn output_dim(&self) -> usize {
        self.table.dim().pow(self.n as u32)
    }

    fn check_context(&self, ctx: &[Vec<u8>]) -> Result<()> {
        if ctx.len() != self.senders() {
            return Err(Error::Validation(format!(
                "expected prefixes for {} senders, got {}",
                self.senders(),
                ctx.len()
            )));
        }
        if let Some(p) = ctx.iter().find(|p| p.len() > self.n) {
            return Err(Error::Validation(format!("prefix of length {} exceeds N = {}", p.len(), self.n)));
        }
        Ok(())
    }

    fn check_contexts(&self, bits: usize) -> Result<usize> {
        let count = 1usize.checked_shl(bits as u32).unwrap_or(usize::MAX);
        if bits >= usize::BITS as usize || count > self.limits.max_contexts {
            return Err(Error::Resource(format!(
                "2^{bits} context assignments exceed max_contexts = {}",
                self.limits.max_contexts
            )));
        }
        Ok(count)
    }

    /// Uniform average of the `N`-use output over every input bit not fixed
    /// by `ctx`.
    pub fn avg_output(&self, ctx: &[Vec<u8>]) -> Result<Operator> {
        self.check_context(ctx)?;
        Ok(self.avg_at(self.n, ctx))
    }

    /// `⊗_j ρ_{x_1[j], …, x_k[j]}` for per-sender codewords.
    pub fn channel_output(&self, codewords: &[Vec<u8>]) -> Operator {
        channel_output(&self.table, codewords)
    }

    fn avg_at(&self, level: usize, ctx: &[Vec<u8>]) -> Operator {
        if level < self.n {
            let key = (level, ctx.to_vec());
            if let Some(op) = self.ops.lock().unwrap().get(&key) {
                return (**op).clone();
            }
            let op = self.compute_avg(level, ctx);
            self.ops.lock().unwrap().insert(key, Arc::new(op.clone()));
            op
        } else {
            self.compute_avg(level, ctx)
        }
    }

    fn compute_avg(&self, level: usize, ctx: &[Vec<u8>]) -> Operator {
        if level == 1 {
            let partial: Vec<Option<u8>> = ctx.iter().map(|p| p.first().copied()).collect();
            return self.table.averaged_output(&partial);
        }
        let odd: Vec<usize> = (0..ctx.len()).filter(|&s| ctx[s].len() % 2 == 1).collect();
        if odd.is_empty() {
            let (a, b) = split_context(ctx);
            return self.avg_at(level / 2, &a).kron(&self.avg_at(level / 2, &b));
        }
        let w = 1.0 / (1usize << odd.len()) as f64;
        let mut acc: Option<Operator> = None;
        for assign in 0..1usize << odd.len() {
            let mut ext = ctx.to_vec();
            for (k, &s) in odd.iter().enumerate() {
                ext[s].push(((assign >> k) & 1) as u8);
            }
            let (a, b) = split_context(&ext);
            let term = self.avg_at(level / 2, &a).kron(&self.avg_at(level / 2, &b));
            match acc.as_mut() {
                None => acc = Some(term.scaled(w)),
                Some(sum) => sum.add_scaled(&term, w),
            }
        }
        acc.expect("at least one assignment")
    }

    /// von Neumann entropy of the averaged output for `ctx`.
    pub fn context_entropy(&self, ctx: &[Vec<u8>]) -> Result<f64> {
        self.check_context(ctx)?;
        Ok(self.entropy_at(self.n, ctx))
    }

    fn entropy_at(&self, level: usize, ctx: &[Vec<u8>]) -> f64 {
        let memo = level < self.n;
        let key = (level, ctx.to_vec());
        if memo {
            if let Some(&h) = self.entropies.lock().unwrap().get(&key) {
                return h;
            }
        }
        let h = if level > 1 && ctx.iter().all(|p| p.len() % 2 == 0) {
            let (a, b) = split_context(ctx);
            self.entropy_at(level / 2, &a) + self.entropy_at(level / 2, &b)
        } else {
            operator_entropy(&self.avg_at(level, ctx))
        };
        if memo {
            self.entropies.lock().unwrap().insert(key, h);
        }
        h
    }

    /// `‖√ρ̄_p √ρ̄_q‖₁` for two contexts with equal prefix lengths.
    pub fn context_root_fidelity(&self, p: &[Vec<u8>], q: &[Vec<u8>]) -> Result<f64> {
        self.check_context(p)?;
        self.check_context(q)?;
        if p.iter().zip(q).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Validation("contexts must have equal prefix lengths".into()));
        }
        Ok(self.root_fidelity_at(self.n, p, q))
    }

    fn root_fidelity_at(&self, level: usize, p: &[Vec<u8>], q: &[Vec<u8>]) -> f64 {
        let memo = level < self.n;
        let key = (level, p.to_vec(), q.to_vec());
        if memo {
            if let Some(&f) = self.root_fidelities.lock().unwrap().get(&key) {
                return f;
            }
        }
        let f = if level > 1 && p.iter().all(|x| x.len() % 2 == 0) {
            let (pa, pb) = split_context(p);
            let (qa, qb) = split_context(q);
            self.root_fidelity_at(level / 2, &pa, &qa) * self.root_fidelity_at(level / 2, &pb, &qb)
        } else {
            sqrt_fidelity_ops(&self.avg_at(level, p), &self.avg_at(level, q))
        };
        if memo {
            self.root_fidelities.lock().unwrap().insert(key, f);
        }
        f
    }

    /// `H(B^N | U_1^{lens[0]}, V_1^{lens[1]}, …)` for uniform inputs.
    pub fn conditional_entropy(&self, lens: &[usize]) -> Result<f64> {
        if lens.len() != self.senders() || lens.iter().any(|&l| l > self.n) {
            return Err(Error::Validation(format!("invalid prefix lengths {lens:?}")));
        }
        if let Some(&h) = self.lattice.lock().unwrap().get(lens) {
            return Ok(h);
        }
        let count = self.check_contexts(lens.iter().sum())?;
        let w = 1.0 / count as f64;
        let terms: Vec<f64> = (0..count)
            .into_par_iter()
            .map(|c| self.entropy_at(self.n, &context_from_index(lens, c)))
            .collect();
        let h = terms.iter().sum::<f64>() * w;
        self.lattice.lock().unwrap().insert(lens.to_vec(), h);
        Ok(h)
    }

    pub fn synthesize(&self, index: &SplitIndex) -> Result<SynthChannel<'_>> {
        if index.sender >= self.senders() || index.lens.len() != self.senders() {
            return Err(Error::Validation(format!("split index {index:?} does not fit the channel")));
        }
        if index.lens.iter().any(|&l| l > self.n) || index.lens[index.sender] >= self.n {
            return Err(Error::Validation(format!("split index {index:?} out of range for N = {}", self.n)));
        }
        let count = self.check_contexts(index.lens.iter().sum())?;
        Ok(SynthChannel { synth: self, index: index.clone(), count })
    }

    /// `(synth_holevo, √synth_fidelity)` of every single-user split channel.
    pub fn single_user_profile(&self) -> Result<Vec<(f64, f64)>> {
        if self.senders() != 1 {
            return Err(Error::Validation("single-user profile needs a single-sender channel".into()));
        }
        (0..self.n)
            .map(|i| {
                let sc = self.synthesize(&SplitIndex::single(i))?;
                Ok((sc.holevo()?, sc.root_fidelity()))
            })
            .collect()
    }
}

/// `⊗_j ρ_{x_1[j], …, x_k[j]}` for per-sender codewords.
pub fn channel_output(table: &OutputTable, codewords: &[Vec<u8>]) -> Operator {
    let n = codewords[0].len();
    let mut inputs = vec![0u8; codewords.len()];
    let mut out: Option<Operator> = None;
    for j in 0..n {
        for (s, x) in codewords.iter().enumerate() {
            inputs[s] = x[j];
        }
        let rho = table.output(&inputs).operator();
        out = Some(match out {
            None => rho.clone(),
            Some(acc) => acc.kron(rho),
        });
    }
    out.expect("non-empty codeword")
}

fn split_context(ctx: &[Vec<u8>]) -> (Context, Context) {
    let a = ctx
        .iter()
        .map(|p| p.chunks(2).map(|c| c[0] ^ c[1]).collect())
        .collect();
    let b = ctx.iter().map(|p| p.chunks(2).map(|c| c[1]).collect()).collect();
    (a, b)
}

/// The `c`-th assignment of prefixes with lengths `lens`: sender by sender,
/// earliest bit most significant.
pub fn context_from_index(lens: &[usize], c: usize) -> Context {
    let total: usize = lens.iter().sum();
    let mut k = total;
    lens.iter()
        .map(|&l| {
            (0..l)
                .map(|_| {
                    k -= 1;
                    ((c >> k) & 1) as u8
                })
                .collect()
        })
        .collect()
}

/// One split channel, evaluated lazily context by context.
#[derive(Debug)]
pub struct SynthChannel<'a> {
    synth: &'a Synthesizer,
    index: SplitIndex,
    count: usize,
}

impl SynthChannel<'_> {
    pub fn index(&self) -> &SplitIndex {
        &self.index
    }

    pub fn context_count(&self) -> usize {
        self.count
    }

    /// Weight of each context (uniform).
    pub fn weight(&self) -> f64 {
        1.0 / self.count as f64
    }

    pub fn context(&self, c: usize) -> Context {
        context_from_index(&self.index.lens, c)
    }

    fn extended(&self, ctx: &Context, bit: u8) -> Context {
        let mut e = ctx.clone();
        e[self.index.sender].push(bit);
        e
    }

    /// The conditional output pair `(ρ̄_{ctx,0}, ρ̄_{ctx,1})` on `B^N`.
    pub fn pair(&self, c: usize) -> (DensityMatrix, DensityMatrix) {
        let ctx = self.context(c);
        let zero = self.synth.avg_at(self.synth.n, &self.extended(&ctx, 0));
        let one = self.synth.avg_at(self.synth.n, &self.extended(&ctx, 1));
        (
            DensityMatrix::from_operator_unchecked(zero),
            DensityMatrix::from_operator_unchecked(one),
        )
    }

    /// Holevo information with the context registers included.
    pub fn holevo(&self) -> Result<f64> {
        let before = self.synth.conditional_entropy(&self.index.lens)?;
        let mut lens = self.index.lens.clone();
        lens[self.index.sender] += 1;
        let after = self.synth.conditional_entropy(&lens)?;
        Ok(before - after)
    }

    /// `√F` of the block-diagonal pair: `Σ_ctx w ‖√ρ̄_{ctx,0} √ρ̄_{ctx,1}‖₁`.
    pub fn root_fidelity(&self) -> f64 {
        let terms: Vec<f64> = (0..self.count)
            .into_par_iter()
            .map(|c| {
                let ctx = self.context(c);
                self.synth
                    .root_fidelity_at(self.synth.n, &self.extended(&ctx, 0), &self.extended(&ctx, 1))
            })
            .collect();
        (terms.iter().sum::<f64>() * self.weight()).min(1.0)
    }

    pub fn fidelity(&self) -> f64 {
        let r = self.root_fidelity();
        r * r
    }
}

pub fn synth_holevo(sc: &SynthChannel<'_>) -> Result<f64> {
    sc.holevo()
}

pub fn synth_fidelity(sc: &SynthChannel<'_>) -> f64 {
    sc.fidelity()
}

/// Picks the `K` indices with the smallest synthesized fidelity (ties to the
/// lower index); frozen bits are 0.
pub fn construct_code(channel: &CqChannel, n: usize, k: usize) -> Result<CosetCodeSpec> {
    construct_code_with(&Synthesizer::new(channel, n)?, k)
}

pub fn construct_code_with(synth: &Synthesizer, k: usize) -> Result<CosetCodeSpec> {
    let n = synth.n();
    if k > n {
        return Err(Error::Validation(format!("K = {k} exceeds N = {n}")));
    }
    let roots: Vec<f64> = (0..n)
        .map(|i| Ok(synth.synthesize(&SplitIndex::single(i))?.root_fidelity()))
        .collect::<Result<_>>()?;
    CosetCodeSpec::new(n, smallest_indices(&roots, k))
}

/// Positions of the `k` smallest values, ties to the lower position.
pub fn smallest_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}
