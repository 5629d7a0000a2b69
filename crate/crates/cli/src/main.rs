//! `cqpolar`: polarization tables, chain rates, decoding runs and
//! Han–Kobayashi regions for channels given as JSON channel-spec documents.

mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cqpolar::chains::{path_profile, per_sender_root_fidelities, structured_three_sender_paths};
use cqpolar::compound::compound_decode;
use cqpolar::{
    build_hk_code, chain_rates, classify_indices, hk_achievable_pairs, hk_bounds, hk_decode, mac_region_bounds,
    monte_carlo, ChainPath, ChannelDocument, CompoundCode, CosetCodeSpec, DecodeMode, Encoding, Error,
    ErrorEstimate, GoodSetRule, Limits, LoadedChannel, RateSplitSpec, Receiver, Result, Slot, Synthesizer,
    TrialRecord,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use output::{sibling, sink, write_table, Cell, Format, Header, Table};

#[derive(Parser, Debug)]
#[command(name = "cqpolar", version, about = "Polar codes for classical-quantum channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Holevo information and root fidelity of every synthesized channel.
    Polarize(Common),
    /// Rates of monotone chain paths on a MAC (one path or a sweep).
    MacRates {
        #[command(flatten)]
        common: Common,
        /// Label string such as `0011`; default sweeps the standard class.
        #[arg(long)]
        path: Option<String>,
    },
    /// Monte Carlo block-error estimate of successive cancellation decoding.
    Decode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        path: Option<String>,
        /// Good indices satisfy √F < 2^(−N^β).
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Rate-split document (interference channels).
        #[arg(long)]
        split: Option<PathBuf>,
        /// Alignment levels for compound and interference codes.
        #[arg(long = "n", default_value_t = 1)]
        levels: usize,
        /// Condition every step on the true bits instead of the decoded ones.
        #[arg(long)]
        genie: bool,
        /// Writes every trial record as JSON lines.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Han–Kobayashi bounds and the achievable (R1, R2) frontier.
    HkRegion {
        #[command(flatten)]
        common: Common,
        /// Rate-split document; the XOR split is used when absent.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        resolution: f64,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Channel-spec JSON document.
    #[arg(long)]
    channel: PathBuf,
    /// Block length, a power of two.
    #[arg(long = "N", default_value_t = 4)]
    block_length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Largest output dimension d^N materialized.
    #[arg(long, default_value_t = Limits::default().max_dim)]
    max_dim: usize,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

/// Everything that determines a command's output; hashed into the header.
#[derive(Serialize)]
struct ExperimentConfig {
    command: &'static str,
    channel_sha256: String,
    block_length: usize,
    seed: u64,
    max_dim: usize,
    max_contexts: usize,
    format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<serde_json::Value>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Session {
    common: Common,
    channel: LoadedChannel,
    limits: Limits,
    header: Header,
}

impl Session {
    fn open(command: &'static str, common: &Common, extra: Option<serde_json::Value>) -> Result<Self> {
        if !common.block_length.is_power_of_two() {
            return Err(Error::Validation(format!("--N {} is not a power of two", common.block_length)));
        }
        if common.max_dim == 0 || common.workers == Some(0) {
            return Err(Error::Validation("caps and worker counts must be positive".into()));
        }
        if let Some(w) = common.workers {
            // the global pool can only be set once per process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
        }
        let text = fs::read(&common.channel)?;
        let doc = ChannelDocument::from_json(&String::from_utf8_lossy(&text))?;
        let channel = doc.load()?;
        let limits = Limits { max_dim: common.max_dim, ..Limits::default() };
        let config = ExperimentConfig {
            command,
            channel_sha256: sha256_hex(&text),
            block_length: common.block_length,
            seed: common.seed,
            max_dim: limits.max_dim,
            max_contexts: limits.max_contexts,
            format: common.format,
            extra,
        };
        let hash = sha256_hex(&serde_json::to_vec(&config)?);
        let header = Header { version: env!("CARGO_PKG_VERSION"), command, config_hash: hash, seed: common.seed };
        Ok(Session { common: common.clone(), channel, limits, header })
    }

    fn n(&self) -> usize {
        self.common.block_length
    }

    fn emit(&self, path: Option<&Path>, table: &Table) -> Result<()> {
        let mut out = sink(path)?;
        write_table(&mut *out, &self.header, table, self.common.format)?;
        out.flush()?;
        Ok(())
    }

    fn wrong_kind(&self, wanted: &str) -> Error {
        Error::Validation(format!("this command needs a {wanted} spec, got kind `{}`", self.channel.kind()))
    }
}

fn polarize(common: &Common) -> Result<()> {
    let s = Session::open("polarize", common, None)?;
    let LoadedChannel::Channel(ch) = &s.channel else {
        return Err(s.wrong_kind("single-user channel"));
    };
    let synth = Synthesizer::with_limits(ch, s.n(), s.limits)?;
    let mut table = Table::new(vec!["i", "holevo", "root_fidelity"]);
    for (i, (h, f)) in synth.single_user_profile()?.into_iter().enumerate() {
        table.push(vec![(i + 1).into(), h.into(), f.into()]);
    }
    s.emit(common.out.as_deref(), &table)
}

const RATE_COLUMNS: [&str; 3] = ["R_1", "R_2", "R_3"];

fn mac_rates(common: &Common, path: Option<&str>) -> Result<()> {
    let s = Session::open("mac-rates", common, Some(serde_json::json!({ "path": path })))?;
    let LoadedChannel::Mac(mac) = &s.channel else {
        return Err(s.wrong_kind("mac"));
    };
    let k = mac.senders();
    let synth = Synthesizer::with_limits(mac, s.n(), s.limits)?;
    let paths = match path {
        Some(p) => vec![ChainPath::parse(p)?],
        None if k == 2 => ChainPath::nu_class(s.n())?,
        None => structured_three_sender_paths(s.n()),
    };
    let bounds = mac_region_bounds(mac)?;
    let mut columns = vec!["N", "path"];
    columns.extend_from_slice(&RATE_COLUMNS[..k]);
    columns.extend(["sum", "sum_rate_bound", "sum_gap"]);
    let mut table = Table::new(columns);
    for p in paths {
        let rates = chain_rates(&synth, &p)?;
        let mut row: Vec<Cell> = vec![s.n().into(), p.to_string().into()];
        row.extend(rates.rates.iter().map(|&r| Cell::from(r)));
        row.extend([rates.sum().into(), bounds.sum_rate().into(), (bounds.sum_rate() - rates.sum()).into()]);
        table.push(row);
    }
    s.emit(common.out.as_deref(), &table)
}

/// Block-0 information positions per stream, 1-based, streams split by `|`.
fn info_sets(enc: &Encoding) -> String {
    (0..enc.streams)
        .map(|st| {
            enc.blocks[0][st]
                .iter()
                .enumerate()
                .filter(|(_, slot)| matches!(slot, Slot::Message(_)))
                .map(|(i, _)| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("|")
}

struct DecodeArgs<'a> {
    path: Option<&'a str>,
    beta: f64,
    trials: u64,
    split: Option<&'a Path>,
    levels: usize,
    genie: bool,
    records: Option<&'a Path>,
}

fn plain_code(synth: &Synthesizer, path: &ChainPath, rule: &GoodSetRule) -> Result<Encoding> {
    let profile = path_profile(synth, path)?;
    let roots = per_sender_root_fidelities(&profile, synth.senders(), synth.n());
    let codes = roots
        .iter()
        .map(|r| CosetCodeSpec::new(synth.n(), classify_indices(r, rule)?.good))
        .collect::<Result<Vec<_>>>()?;
    Encoding::from_codes(&codes)
}

fn decode(common: &Common, a: &DecodeArgs) -> Result<()> {
    let split_text = a.split.map(fs::read_to_string).transpose()?;
    let extra = serde_json::json!({
        "path": a.path, "beta": a.beta, "trials": a.trials, "split": split_text,
        "levels": a.levels, "genie": a.genie,
    });
    let s = Session::open("decode", common, Some(extra))?;
    if a.trials == 0 {
        return Err(Error::Validation("--trials must be at least 1".into()));
    }
    let n = s.n();
    let mode = if a.genie { DecodeMode::Genie } else { DecodeMode::Sc };
    let rule = GoodSetRule::Threshold { beta: a.beta };
    let path_for = |k: usize| match a.path {
        Some(p) => ChainPath::parse(p),
        None => ChainPath::sequential(&(0..k).collect::<Vec<_>>(), n),
    };
    let (enc, per_receiver): (Encoding, Vec<Vec<TrialRecord>>) = match &s.channel {
        LoadedChannel::Channel(ch) => {
            let synth = Synthesizer::with_limits(ch, n, s.limits)?;
            let path = ChainPath::new(vec![0; n], 1)?;
            let enc = plain_code(&synth, &path, &rule)?;
            let rx = Receiver::plain(synth, path, 1)?;
            let (_, records) = monte_carlo(&enc, &rx, mode, a.trials, common.seed)?;
            (enc, vec![records])
        }
        LoadedChannel::Mac(mac) => {
            let synth = Synthesizer::with_limits(mac, n, s.limits)?;
            let path = path_for(mac.senders())?;
            let enc = plain_code(&synth, &path, &rule)?;
            let rx = Receiver::plain(synth, path, 1)?;
            let (_, records) = monte_carlo(&enc, &rx, mode, a.trials, common.seed)?;
            (enc, vec![records])
        }
        LoadedChannel::Compound(c) => {
            let path = path_for(c.senders())?;
            let rules = vec![rule; c.senders()];
            let code = CompoundCode::build(c, n, [path.clone(), path], &[rules.clone(), rules], a.levels, &s.limits)?;
            let records = (0..2)
                .map(|m| compound_decode(&code, m, mode, a.trials, common.seed))
                .collect::<Result<Vec<_>>>()?;
            (code.encoding.clone(), records)
        }
        LoadedChannel::Interference(ic) => {
            let text = split_text
                .as_deref()
                .ok_or_else(|| Error::Validation("interference decoding needs --split with target rates".into()))?;
            let split = RateSplitSpec::from_json(text)?;
            let code = build_hk_code(ic, &split, split.target(), n, a.levels, &s.limits)?;
            let [r1, r2] = hk_decode(&code, mode, a.trials, common.seed)?;
            (code.encoding.clone(), vec![r1, r2])
        }
    };
    let mut table = Table::new(vec![
        "receiver", "trials", "errors", "aborted", "rate", "ci_low", "ci_high", "seed", "message_bits", "info_sets",
    ]);
    let mut aborted = 0;
    for (r, records) in per_receiver.iter().enumerate() {
        let est = ErrorEstimate::from_records(records, common.seed);
        aborted += est.aborted;
        table.push(vec![
            (r + 1).into(),
            est.trials.into(),
            est.errors.into(),
            est.aborted.into(),
            est.rate.into(),
            est.ci_low.into(),
            est.ci_high.into(),
            est.seed.into(),
            enc.messages.into(),
            info_sets(&enc).into(),
        ]);
    }
    s.emit(common.out.as_deref(), &table)?;
    if let Some(p) = a.records {
        let mut out = sink(Some(p))?;
        for t in 0..a.trials as usize {
            for records in &per_receiver {
                writeln!(out, "{}", serde_json::to_string(&records[t])?)?;
            }
        }
        out.flush()?;
    }
    if aborted > 0 {
        return Err(Error::Degenerate(format!("{aborted} trial(s) aborted on a numerically degenerate outcome")));
    }
    Ok(())
}

fn hk_region(common: &Common, split: Option<&Path>, resolution: f64) -> Result<()> {
    let split_text = split.map(fs::read_to_string).transpose()?;
    let extra = serde_json::json!({ "split": split_text, "resolution": resolution });
    let s = Session::open("hk-region", common, Some(extra))?;
    let LoadedChannel::Interference(ic) = &s.channel else {
        return Err(s.wrong_kind("interference"));
    };
    let split = match &split_text {
        Some(t) => RateSplitSpec::from_json(t)?,
        None => RateSplitSpec::xor(),
    };
    let region = hk_bounds(ic, &split)?;
    let mut bounds = Table::new(vec!["receiver", "bound", "value"]);
    for (r, b) in [region.receiver1, region.receiver2].iter().enumerate() {
        for (name, v) in cqpolar::hk::ReceiverBounds::NAMES.iter().zip(b.values()) {
            bounds.push(vec![(r + 1).into(), (*name).into(), v.into()]);
        }
    }
    let frontier = hk_achievable_pairs(&region, resolution)?;
    let mut front = Table::new(vec!["R1", "R2", "S1", "S2", "T1", "T2", "min_slack"]);
    for f in &frontier {
        let slack = region.min_slack(&f.rates);
        if slack < -1e-7 {
            return Err(Error::Invariant(format!("frontier point ({}, {}) violates a bound by {}", f.r1, f.r2, -slack)));
        }
        let r = f.rates;
        front.push(vec![f.r1.into(), f.r2.into(), r.s1.into(), r.s2.into(), r.t1.into(), r.t2.into(), slack.into()]);
    }
    match &common.out {
        Some(p) => {
            s.emit(Some(p), &bounds)?;
            s.emit(Some(&sibling(p, "frontier")), &front)
        }
        None => {
            s.emit(None, &bounds)?;
            s.emit(None, &front)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Polarize(common) => polarize(&common),
        Command::MacRates { common, path } => mac_rates(&common, path.as_deref()),
        Command::Decode { common, path, beta, trials, split, levels, genie, records } => decode(
            &common,
            &DecodeArgs {
                path: path.as_deref(),
                beta,
                trials,
                split: split.as_deref(),
                levels,
                genie,
                records: records.as_deref(),
            },
        ),
        Command::HkRegion { common, split, resolution } => hk_region(&common, split.as_deref(), resolution),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
