use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use intertime::simulate::{emit_event_log, emit_sequences, parse_kv, EventLayout, CONFIG_KEYS};
use intertime::{ingest, SimConfig64};

use crate::output::{self, ManifestBuilder};
use crate::GlobalOpts;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Events,
    Sequences,
    Both,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Plain-text `key = value` configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` override; repeatable, wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_enum, default_value_t = Emit::Both)]
    pub emit: Emit,
}

pub fn run(global: &GlobalOpts, args: &SimulateArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = &args.config {
        let bytes = output::read_input(path)?;
        manifest.input(path, &bytes);
        let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        kv = parse_kv(&text).with_context(|| format!("simulate: reading {}", path.display()))?;
    }
    for s in &args.set {
        let Some((k, v)) = s.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {s:?}");
        };
        kv.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
    }
    if let Some(seed) = global.seed {
        kv.insert("seed".into(), seed.to_string());
    }
    if let Some(off) = &global.utc_offset {
        kv.insert("utc_offset".into(), off.clone());
    }
    let (sim_kv, layout_kv): (BTreeMap<_, _>, BTreeMap<_, _>) =
        kv.clone().into_iter().partition(|(k, _)| !matches!(k.as_str(), "start_day" | "window" | "utc_offset"));
    if let Some(k) = kv.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        bail!("configuration error: unknown key {k:?}");
    }
    let cfg = SimConfig64::from_kv(&sim_kv).context("configuration error")?;
    let layout = EventLayout::from_kv(&layout_kv).context("configuration error")?;
    manifest.config(&kv)?;
    manifest.seed(cfg.seed);

    let events = matches!(args.emit, Emit::Events | Emit::Both)
        .then(|| emit_event_log(&cfg, &layout))
        .transpose()?;
    let seqs = matches!(args.emit, Emit::Sequences | Emit::Both)
        .then(|| emit_sequences(&cfg, &layout))
        .transpose()?;

    let dir = output::out_dir(&global.output, "synth");
    output::ensure_dir(&dir)?;
    if let Some(events) = &events {
        let mut w = output::create(&dir.join("events.csv"))?;
        writeln!(w, "user_id,timestamp")?;
        for e in events {
            writeln!(w, "{},{}", e.user_id, e.timestamp)?;
        }
        w.flush()?;
    }
    if let Some(seqs) = &seqs {
        ingest::write_sequences(output::create(&dir.join("sequences.jsonl"))?, seqs)?;
    }
    manifest.write(&dir)?;
    eprintln!(
        "simulate {}: {} users x {} pairs, seed {} -> {}",
        cfg.params.model(),
        cfg.n_users,
        cfg.pairs_per_user,
        cfg.seed,
        dir.display()
    );
    Ok(())
}
