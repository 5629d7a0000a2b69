//! Classical-quantum channels with binary inputs: single-user channels,
//! k-sender MACs, two-member compound MACs and two-user interference
//! channels.

mod presets;
mod spec;

pub use presets::*;
pub use spec::{ChannelDocument, LoadedChannel, MatrixDocument};

use crate::error::{Error, Result};
use crate::quantum::{
    conditional_mutual_information, partial_trace_op, CcqState, DensityMatrix, Operator,
};

/// Output states of a channel with `senders` binary inputs.
///
/// The state for input tuple `(x_1, …, x_k)` sits at index
/// `Σ x_s 2^{k−1−s}`, i.e. the tuple read as a binary string with sender 1
/// as the most significant bit ("01" means `x_1 = 0, x_2 = 1`).
#[derive(Clone, Debug)]
pub struct OutputTable {
    senders: usize,
    dim: usize,
    states: Vec<DensityMatrix>,
}

impl OutputTable {
    pub fn new(senders: usize, states: Vec<DensityMatrix>) -> Result<Self> {
        if senders == 0 {
            return Err(Error::Validation("a channel needs at least one sender".into()));
        }
        if states.len() != 1 << senders {
            return Err(Error::Validation(format!(
                "{} senders need {} output states, got {}",
                senders,
                1usize << senders,
                states.len()
            )));
        }
        let dim = states[0].dim();
        if let Some(bad) = states.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch(dim, bad.dim()));
        }
        Ok(OutputTable { senders, dim, states })
    }

    pub fn senders(&self) -> usize {
        self.senders
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn input_index(&self, inputs: &[u8]) -> usize {
        debug_assert_eq!(inputs.len(), self.senders);
        inputs.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    pub fn output(&self, inputs: &[u8]) -> &DensityMatrix {
        &self.states[self.input_index(inputs)]
    }

    /// True when every output is diagonal in the computational basis.
    pub fn is_commuting(&self) -> bool {
        self.states.iter().all(|s| s.operator().is_diagonal())
    }

    /// Same channel with every output stored densely.
    pub fn to_dense(&self) -> OutputTable {
        OutputTable {
            senders: self.senders,
            dim: self.dim,
            states: self.states.iter().map(|s| s.to_dense()).collect(),
        }
    }

    /// Fixes the input of `sender` to `value`, leaving a channel of the
    /// remaining senders in their original order.
    pub fn restrict(&self, sender: usize, value: u8) -> Result<OutputTable> {
        if sender >= self.senders {
            return Err(Error::Validation(format!(
                "sender {} out of range for a {}-sender channel",
                sender + 1,
                self.senders
            )));
        }
        if self.senders == 1 {
            return Err(Error::Validation("cannot restrict the only sender".into()));
        }
        let k = self.senders;
        let mut states = Vec::with_capacity(1 << (k - 1));
        for rest in 0..1usize << (k - 1) {
            let mut bits = Vec::with_capacity(k);
            let mut r = 0;
            for s in 0..k {
                if s == sender {
                    bits.push(value & 1);
                } else {
                    bits.push(((rest >> (k - 2 - r)) & 1) as u8);
                    r += 1;
                }
            }
            states.push(self.output(&bits).clone());
        }
        OutputTable::new(k - 1, states)
    }

    /// Output for a partial assignment, averaged uniformly over the senders
    /// whose entry is `None`.
    pub fn averaged_output(&self, partial: &[Option<u8>]) -> Operator {
        let free: Vec<usize> = (0..self.senders).filter(|&s| partial[s].is_none()).collect();
        let w = 1.0 / (1usize << free.len()) as f64;
        let mut acc = Operator::zeros(self.dim);
        let mut bits: Vec<u8> = partial.iter().map(|b| b.unwrap_or(0)).collect();
        for assign in 0..1usize << free.len() {
            for (k, &s) in free.iter().enumerate() {
                bits[s] = ((assign >> k) & 1) as u8;
            }
            acc.add_scaled(self.output(&bits).operator(), w);
        }
        acc
    }

    /// `I(X_target; B | X_given)` for uniform independent inputs; senders in
    /// neither set are averaged out.
    pub fn mutual_information(&self, target: &[usize], given: &[usize]) -> Result<f64> {
        for &s in target.iter().chain(given) {
            if s >= self.senders {
                return Err(Error::Validation(format!("sender {} out of range", s + 1)));
            }
        }
        if target.is_empty() || target.iter().any(|s| given.contains(s)) {
            return Err(Error::Validation("target must be non-empty and disjoint from the conditioning set".into()));
        }
        let states: Vec<Vec<DensityMatrix>> = (0..1usize << target.len())
            .map(|x| {
                (0..1usize << given.len())
                    .map(|y| {
                        let mut partial = vec![None; self.senders];
                        for (k, &s) in target.iter().enumerate() {
                            partial[s] = Some(((x >> k) & 1) as u8);
                        }
                        for (k, &s) in given.iter().enumerate() {
                            partial[s] = Some(((y >> k) & 1) as u8);
                        }
                        DensityMatrix::from_operator_unchecked(self.averaged_output(&partial))
                    })
                    .collect()
            })
            .collect();
        Ok(conditional_mutual_information(&CcqState::uniform(states)?))
    }
}

/// Binary-input single-user channel `x → ρ_x`.
#[derive(Clone, Debug)]
pub struct CqChannel {
    table: OutputTable,
}

impl CqChannel {
    pub fn new(rho0: DensityMatrix, rho1: DensityMatrix) -> Result<Self> {
        Ok(CqChannel {
            table: OutputTable::new(1, vec![rho0, rho1])?,
        })
    }

    pub fn output(&self, x: u8) -> &DensityMatrix {
        &self.table.states[(x & 1) as usize]
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    /// Symmetric Holevo information `I(W)`.
    pub fn holevo_information(&self) -> f64 {
        self.table
            .mutual_information(&[0], &[])
            .expect("single sender is always a valid target")
    }

    /// `F(W) = F(ρ₀, ρ₁)`.
    pub fn fidelity(&self) -> f64 {
        crate::quantum::fidelity(self.output(0), self.output(1)).expect("equal dimensions")
    }

    pub fn to_dense(&self) -> CqChannel {
        CqChannel {
            table: self.table.to_dense(),
        }
    }
}

impl TryFrom<OutputTable> for CqChannel {
    type Error = Error;

    fn try_from(table: OutputTable) -> Result<Self> {
        if table.senders != 1 {
            return Err(Error::Validation(format!(
                "expected a single-user channel, got {} senders",
                table.senders
            )));
        }
        Ok(CqChannel { table })
    }
}

/// Binary-input multiple access channel with `k ≥ 2` senders.
#[derive(Clone, Debug)]
pub struct CqMac {
    table: OutputTable,
}

impl CqMac {
    pub fn new(senders: usize, states: Vec<DensityMatrix>) -> Result<Self> {
        if senders < 2 {
            return Err(Error::Validation(format!(
                "a MAC needs at least two senders, got {senders}"
            )));
        }
        Ok(CqMac {
            table: OutputTable::new(senders, states)?,
        })
    }

    pub fn senders(&self) -> usize {
        self.table.senders
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    pub fn output(&self, inputs: &[u8]) -> &DensityMatrix {
        self.table.output(inputs)
    }

    /// Channel of the remaining senders with `sender`'s input fixed.
    pub fn restrict_sender(&self, sender: usize, value: u8) -> Result<OutputTable> {
        self.table.restrict(sender, value)
    }

    pub fn to_dense(&self) -> CqMac {
        CqMac {
            table: self.table.to_dense(),
        }
    }
}

impl TryFrom<OutputTable> for CqMac {
    type Error = Error;

    fn try_from(table: OutputTable) -> Result<Self> {
        if table.senders < 2 {
            return Err(Error::Validation("a MAC needs at least two senders".into()));
        }
        Ok(CqMac { table })
    }
}

impl AsRef<OutputTable> for CqChannel {
    fn as_ref(&self) -> &OutputTable {
        &self.table
    }
}

impl AsRef<OutputTable> for CqMac {
    fn as_ref(&self) -> &OutputTable {
        &self.table
    }
}

impl AsRef<OutputTable> for OutputTable {
    fn as_ref(&self) -> &OutputTable {
        self
    }
}

/// Two-user interference channel `(x₁, x₂) → ρ^{B₁B₂}` on `d₁·d₂` dimensions.
#[derive(Clone, Debug)]
pub struct CqInterferenceChannel {
    dims: [usize; 2],
    table: OutputTable,
}

impl CqInterferenceChannel {
    pub fn new(dims: [usize; 2], states: Vec<DensityMatrix>) -> Result<Self> {
        let table = OutputTable::new(2, states)?;
        if dims[0] * dims[1] != table.dim {
            return Err(Error::Validation(format!(
                "factorization {}x{} does not match output dimension {}",
                dims[0], dims[1], table.dim
            )));
        }
        Ok(CqInterferenceChannel { dims, table })
    }

    /// Product channel `ρ_{x₁,x₂} = σ¹_{x₁,x₂} ⊗ σ²_{x₁,x₂}` built from the two
    /// marginal MACs.
    pub fn from_product(first: &CqMac, second: &CqMac) -> Result<Self> {
        if first.senders() != 2 || second.senders() != 2 {
            return Err(Error::Validation("interference channels have two senders".into()));
        }
        let states = (0..4)
            .map(|i| first.table.states[i].kron(&second.table.states[i]))
            .collect();
        Self::new([first.dim(), second.dim()], states)
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn output(&self, x1: u8, x2: u8) -> &DensityMatrix {
        self.table.output(&[x1, x2])
    }

    pub fn table(&self) -> &OutputTable {
        &self.table
    }

    /// The MACs seen by receiver 1 (`Tr_{B₂}`) and receiver 2 (`Tr_{B₁}`).
    pub fn induced_macs(&self) -> Result<(CqMac, CqMac)> {
        let reduce = |keep: usize| -> Result<CqMac> {
            let states = self
                .table
                .states
                .iter()
                .map(|s| {
                    partial_trace_op(s.operator(), &self.dims, &[keep])
                        .map(DensityMatrix::from_operator_unchecked)
                })
                .collect::<Result<Vec<_>>>()?;
            CqMac::new(2, states)
        };
        Ok((reduce(0)?, reduce(1)?))
    }
}

/// A set of MACs sharing the same sender structure; the receiver learns
/// which member is in use, the senders do not.
#[derive(Clone, Debug)]
pub struct CompoundMac {
    members: Vec<CqMac>,
}

impl CompoundMac {
    pub fn new(members: Vec<CqMac>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Validation("a compound MAC needs at least one member".into()))?;
        if let Some(bad) = members.iter().find(|m| m.senders() != first.senders()) {
            return Err(Error::Validation(format!(
                "members disagree on sender count ({} vs {})",
                first.senders(),
                bad.senders()
            )));
        }
        Ok(CompoundMac { members })
    }

    pub fn members(&self) -> &[CqMac] {
        &self.members
    }

    pub fn senders(&self) -> usize {
        self.members[0].senders()
    }
}
