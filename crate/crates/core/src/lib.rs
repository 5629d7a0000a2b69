//! Polar coding for classical-quantum channels and networks.
//!
//! The crate computes, exactly and at small blocklength, the synthesized
//! channels of the polar transform for single-user classical-quantum
//! channels and for multiple access channels decoded along monotone chain
//! paths. On top of that it provides a measurement-level successive
//! cancellation decoder, universal index alignment for two-member compound
//! MACs, and Han–Kobayashi rate splitting for the two-user interference
//! channel.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod channel;
pub mod compound;
pub mod config;
pub mod decoder;
pub mod error;
pub mod hk;
pub mod polar;
pub mod quantum;
pub mod synthesis;

pub use chains::{
    approximate_rate_pair, chain_rates, mac_region_bounds, path_distance, scale_path, ChainPath, MacBounds,
    RatePoint,
};
pub use channel::{
    ChannelDocument, CompoundMac, CqChannel, CqInterferenceChannel, CqMac, LoadedChannel, OutputTable,
};
pub use compound::{
    build_alignment, classify_indices, compound_decode, compound_rate_targets, AlignmentSchedule, CompoundCode,
    GoodSetRule, IndexPartition,
};
pub use config::{Limits, Tolerances};
pub use decoder::{
    monte_carlo, DecodeMode, DecoderState, Encoding, ErrorEstimate, Receiver, Slot, TrialRecord,
};
pub use error::{Error, Result};
pub use hk::{
    build_hk_code, hk_achievable_pairs, hk_bounds, hk_decode, HkCode, HkRates, HkRegion, RateSplitSpec,
};
pub use polar::{bit_reversal, coset_encode, polar_encode, CosetCodeSpec};
pub use quantum::{
    conditional_mutual_information, fidelity, helstrom_projector, holevo_information,
    partial_trace, von_neumann_entropy, CcqState, ClassicalQuantumState, DensityMatrix, Operator,
};
pub use synthesis::{
    construct_code, synth_fidelity, synth_holevo, SplitIndex, SynthChannel, Synthesizer,
};
