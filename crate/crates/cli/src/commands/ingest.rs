use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use intertime::ingest::{self, InputFormat, ParseOptions, SegmentOptions};
use intertime::simulate::parse_window;
use serde::Serialize;

use crate::output::{self, ManifestBuilder};
use crate::GlobalOpts;

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Event log: CSV `user,timestamp` or JSON lines.
    pub input: PathBuf,
    /// `csv` or `jsonl`.
    #[arg(long, default_value = "csv")]
    pub format: InputFormat,
    /// The CSV input has no header line.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, default_value = "user")]
    pub user_field: String,
    #[arg(long, default_value = "ts")]
    pub ts_field: String,
    /// Active hours `start:end`, local time, both inclusive.
    #[arg(long, default_value = "8:22")]
    pub window: String,
    /// Minimum retained events per user.
    #[arg(long, default_value_t = 1000)]
    pub min_activity: usize,
    /// Largest tolerated share of malformed records.
    #[arg(long, default_value_t = 0.01)]
    pub max_error_rate: f64,
}

#[derive(Serialize)]
struct IngestConfig<'a> {
    parse: &'a ParseOptions,
    segment: &'a SegmentOptions,
}

pub fn run(global: &GlobalOpts, args: &IngestArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    let (window_start, window_end) = parse_window(&args.window).context("--window")?;
    let seg = SegmentOptions {
        window_start,
        window_end,
        min_activity: args.min_activity,
        utc_offset_secs: super::utc_offset(global)?.unwrap_or(0),
    };
    let opts = ParseOptions {
        format: args.format,
        has_header: !args.no_header,
        user_field: args.user_field.clone(),
        ts_field: args.ts_field.clone(),
        max_error_rate: args.max_error_rate,
    };
    manifest.config(IngestConfig { parse: &opts, segment: &seg })?;

    let bytes = output::read_input(&args.input)?;
    manifest.input(&args.input, &bytes);
    let parsed = ingest::parse_events(BufReader::new(bytes.as_slice()), &opts)
        .with_context(|| format!("ingest: parsing {}", args.input.display()))?;
    let blocks = ingest::segment_blocks(&parsed.events, &seg).context("ingest: segmenting")?;
    let seqs = ingest::to_sequences(&blocks);

    let out = global.output.clone().unwrap_or_else(|| PathBuf::from("sequences.jsonl"));
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    output::ensure_dir(dir)?;
    ingest::write_sequences(output::create(&out)?, &seqs).context("ingest: writing sequences")?;
    manifest.write(dir)?;

    let users: std::collections::BTreeSet<&str> = seqs.iter().map(|s| s.user.as_str()).collect();
    eprintln!(
        "ingest: {} events ({} malformed), {} users, {} blocks -> {}",
        parsed.events.len(),
        parsed.malformed,
        users.len(),
        seqs.len(),
        out.display()
    );
    Ok(())
}
