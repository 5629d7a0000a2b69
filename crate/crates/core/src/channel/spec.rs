//! The JSON channel-spec document format.
//!
//! ```json
//! {"kind": "mac", "senders": 2, "dim": 2,
//!  "states": {"00": [[[1,0],[0,0]],[[0,0],[0,0]]], "01": {"diag": [0.5, 0.5]}, ...}}
//! ```
//!
//! `kind` is one of `channel`, `mac`, `interference` (with `dims: [d1, d2]`)
//! or `compound` (with `members`, a list of `mac` documents). Matrices are
//! nested rows of `[re, im]` pairs, or `{"diag": [...]}` for diagonal states.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CompoundMac, CqChannel, CqInterferenceChannel, CqMac, OutputTable};
use crate::error::{Error, Result};
use crate::quantum::{CMatrix, DensityMatrix, Operator};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelDocument {
    Channel {
        dim: usize,
        states: BTreeMap<String, MatrixDocument>,
    },
    Mac {
        senders: usize,
        dim: usize,
        states: BTreeMap<String, MatrixDocument>,
    },
    Interference {
        dims: [usize; 2],
        states: BTreeMap<String, MatrixDocument>,
    },
    Compound {
        members: Vec<ChannelDocument>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixDocument {
    Dense(Vec<Vec<[f64; 2]>>),
    Diagonal { diag: Vec<f64> },
}

/// A validated channel of any supported kind.
#[derive(Clone, Debug)]
pub enum LoadedChannel {
    Channel(CqChannel),
    Mac(CqMac),
    Interference(CqInterferenceChannel),
    Compound(CompoundMac),
}

impl LoadedChannel {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedChannel::Channel(_) => "channel",
            LoadedChannel::Mac(_) => "mac",
            LoadedChannel::Interference(_) => "interference",
            LoadedChannel::Compound(_) => "compound",
        }
    }
}

impl ChannelDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::spec("document", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    /// Validates the document and builds the channel object.
    pub fn load(&self) -> Result<LoadedChannel> {
        self.load_at("")
    }

    fn load_at(&self, prefix: &str) -> Result<LoadedChannel> {
        match self {
            ChannelDocument::Channel { dim, states } => {
                let table = load_table(prefix, 1, *dim, states)?;
                Ok(LoadedChannel::Channel(CqChannel::try_from(table)?))
            }
            ChannelDocument::Mac { senders, dim, states } => {
                if *senders < 2 {
                    return Err(Error::spec(format!("{prefix}senders"), "a MAC needs at least two senders"));
                }
                let table = load_table(prefix, *senders, *dim, states)?;
                Ok(LoadedChannel::Mac(CqMac::try_from(table)?))
            }
            ChannelDocument::Interference { dims, states } => {
                let table = load_table(prefix, 2, dims[0] * dims[1], states)?;
                let ic = CqInterferenceChannel::new(*dims, table.states().to_vec())
                    .map_err(|e| Error::spec(format!("{prefix}dims"), e.to_string()))?;
                Ok(LoadedChannel::Interference(ic))
            }
            ChannelDocument::Compound { members } => {
                let mut macs = Vec::with_capacity(members.len());
                for (i, m) in members.iter().enumerate() {
                    let at = format!("{prefix}members[{i}].");
                    match m.load_at(&at)? {
                        LoadedChannel::Mac(mac) => macs.push(mac),
                        other => {
                            return Err(Error::spec(
                                format!("{prefix}members[{i}]"),
                                format!("compound members must be MACs, got {}", other.kind()),
                            ))
                        }
                    }
                }
                Ok(LoadedChannel::Compound(
                    CompoundMac::new(macs).map_err(|e| Error::spec(format!("{prefix}members"), e.to_string()))?,
                ))
            }
        }
    }

    pub fn from_channel(channel: &CqChannel) -> Self {
        ChannelDocument::Channel {
            dim: channel.dim(),
            states: table_states(channel.as_ref()),
        }
    }

    pub fn from_mac(mac: &CqMac) -> Self {
        ChannelDocument::Mac {
            senders: mac.senders(),
            dim: mac.dim(),
            states: table_states(mac.as_ref()),
        }
    }

    pub fn from_interference(ic: &CqInterferenceChannel) -> Self {
        ChannelDocument::Interference {
            dims: ic.dims(),
            states: table_states(ic.table()),
        }
    }

    pub fn from_compound(c: &CompoundMac) -> Self {
        ChannelDocument::Compound {
            members: c.members().iter().map(Self::from_mac).collect(),
        }
    }
}

fn table_states(table: &OutputTable) -> BTreeMap<String, MatrixDocument> {
    let k = table.senders();
    table
        .states()
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let key: String = (0..k)
                .map(|b| if (idx >> (k - 1 - b)) & 1 == 1 { '1' } else { '0' })
                .collect();
            let doc = match s.operator() {
                Operator::Diagonal(d) => MatrixDocument::Diagonal {
                    diag: d.iter().copied().collect(),
                },
                Operator::Dense(m) => MatrixDocument::Dense(
                    (0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                        .collect(),
                ),
            };
            (key, doc)
        })
        .collect()
}

fn load_table(
    prefix: &str,
    senders: usize,
    dim: usize,
    states: &BTreeMap<String, MatrixDocument>,
) -> Result<OutputTable> {
    for key in states.keys() {
        let loc = format!("{prefix}states[\"{key}\"]");
        if key.chars().any(|c| c.is_ascii_digit() && c != '0' && c != '1') {
            return Err(Error::spec(loc, "non-binary input alphabets are not supported"));
        }
        if key.len() != senders || !key.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::spec(loc, format!("expected a {senders}-character binary input tuple")));
        }
    }
    let mut out = Vec::with_capacity(1 << senders);
    for idx in 0..1usize << senders {
        let key: String = (0..senders)
            .map(|b| if (idx >> (senders - 1 - b)) & 1 == 1 { '1' } else { '0' })
            .collect();
        let loc = format!("{prefix}states[\"{key}\"]");
        let doc = states
            .get(&key)
            .ok_or_else(|| Error::spec(&loc, "missing output state"))?;
        let rho = load_matrix(doc, dim).map_err(|e| Error::spec(&loc, e.to_string()))?;
        out.push(rho);
    }
    OutputTable::new(senders, out)
}

fn load_matrix(doc: &MatrixDocument, dim: usize) -> Result<DensityMatrix> {
    match doc {
        MatrixDocument::Diagonal { diag } => {
            if diag.len() != dim {
                return Err(Error::DimensionMismatch(dim, diag.len()));
            }
            DensityMatrix::new(Operator::Diagonal(DVector::from_column_slice(diag)))
        }
        MatrixDocument::Dense(rows) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Invariant(format!("matrix must be {dim}x{dim}")));
            }
            let m = CMatrix::from_fn(dim, dim, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
            let offdiag_zero = (0..dim).all(|i| (0..dim).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)));
            let real_diag = (0..dim).all(|i| m[(i, i)].im == 0.0);
            if offdiag_zero && real_diag {
                DensityMatrix::new(Operator::Diagonal(DVector::from_fn(dim, |i, _| m[(i, i)].re)))
            } else {
                DensityMatrix::from_matrix(m)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{bloch_mac, bsc_channel};
    use crate::quantum::binary_entropy;

    #[test]
    fn loads_noiseless_channel() {
        let text = r#"{"kind":"channel","dim":2,"states":{
            "0":[[[1,0],[0,0]],[[0,0],[0,0]]],
            "1":[[[0,0],[0,0]],[[0,0],[1,0]]]}}"#;
        let LoadedChannel::Channel(ch) = ChannelDocument::from_json(text).unwrap().load().unwrap() else {
            panic!("expected a single-user channel");
        };
        assert!((ch.holevo_information() - 1.0).abs() < 1e-12);
        assert!(ch.fidelity().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_trace_naming_entry() {
        let text = r#"{"kind":"channel","dim":2,"states":{
            "0":{"diag":[0.9,0.0]},
            "1":{"diag":[0.0,1.0]}}}"#;
        let err = ChannelDocument::from_json(text).unwrap().load().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("states[\"0\"]") && msg.contains("trace"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_non_binary_and_missing_inputs() {
        let text = r#"{"kind":"channel","dim":1,"states":{"0":{"diag":[1]},"1":{"diag":[1]},"2":{"diag":[1]}}}"#;
        let msg = ChannelDocument::from_json(text).unwrap().load().unwrap_err().to_string();
        assert!(msg.contains("non-binary"), "{msg}");
        let text = r#"{"kind":"mac","senders":2,"dim":1,"states":{"00":{"diag":[1]}}}"#;
        let msg = ChannelDocument::from_json(text).unwrap().load().unwrap_err().to_string();
        assert!(msg.contains("missing"), "{msg}");
        assert!(ChannelDocument::from_json(r#"{"kind":"channel","dim":2}"#).is_err());
    }

    #[test]
    fn bsc_spec_has_classical_capacity() {
        let doc = ChannelDocument::from_channel(&bsc_channel(0.11).unwrap());
        let reparsed = ChannelDocument::from_json(&doc.to_json()).unwrap();
        let LoadedChannel::Channel(ch) = reparsed.load().unwrap() else { panic!() };
        assert!((ch.holevo_information() - (1.0 - binary_entropy(0.11))).abs() < 1e-12);
    }

    #[test]
    fn dense_mac_round_trips() {
        let mac = bloch_mac(&[0.7, 1.1], &[0.0, 0.4], 0.1).unwrap();
        let doc = ChannelDocument::from_json(&ChannelDocument::from_mac(&mac).to_json()).unwrap();
        let LoadedChannel::Mac(back) = doc.load().unwrap() else { panic!() };
        for i in 0..4u8 {
            let bits = [i >> 1, i & 1];
            assert!(back.output(&bits).operator().max_abs_diff(mac.output(&bits).operator()) < 1e-15);
        }
        let compound = ChannelDocument::Compound { members: vec![doc.clone(), doc] };
        assert!(matches!(compound.load().unwrap(), LoadedChannel::Compound(_)));
    }
}
