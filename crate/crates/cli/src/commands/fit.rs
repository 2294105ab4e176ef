use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use intertime::estimate::{fit_at_threshold, fit_model};
use intertime::{ingest, FitResult64, Model, ThresholdGrid64, UserSample64};
use serde::Serialize;

use crate::output::{self, ManifestBuilder};
use crate::GlobalOpts;

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Sequence file written by `ingest` or `simulate`.
    pub sequences: PathBuf,
    /// Comma-separated models to fit.
    #[arg(long, default_value = "ip,it,mk", value_delimiter = ',')]
    pub models: Vec<Model>,
    /// Threshold candidates: `lo:hi:Nlog`, `lo:hi:Nlin` or a comma list.
    #[arg(long, default_value = "2:7200:60log")]
    pub grid: String,
}

#[derive(Serialize)]
struct FitConfig<'a> {
    models: &'a [Model],
    grid: &'a str,
}

pub fn fit_file_name(model: Model) -> String {
    format!("fit_{model}.json")
}

/// IT refitted at the MK threshold, the nested baseline of the memory test.
pub const IT_AT_MK: &str = "fit_it_at_mk.json";

pub fn load_users(path: &Path, bytes: &[u8]) -> anyhow::Result<Vec<UserSample64>> {
    let seqs = ingest::read_sequences::<_, f64>(BufReader::new(bytes))
        .with_context(|| format!("reading sequences from {}", path.display()))?;
    Ok(ingest::group_by_user(seqs))
}

pub fn run(global: &GlobalOpts, args: &FitArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.config(FitConfig { models: &args.models, grid: &args.grid })?;
    let grid: ThresholdGrid64 = args.grid.parse().context("--grid")?;

    let bytes = output::read_input(&args.sequences)?;
    let digest = manifest.input(&args.sequences, &bytes);
    let users = load_users(&args.sequences, &bytes)?;
    if users.iter().all(|u| u.n_pairs() == 0) {
        bail!("fit: no pairs in {} (need blocks with at least two waiting times)", args.sequences.display());
    }
    // Users without a single successor pair carry no likelihood terms.
    let users: Vec<UserSample64> = users.into_iter().filter(|u| u.n_pairs() > 0).collect();

    let dir = output::out_dir(&global.output, "fits");
    output::ensure_dir(&dir)?;
    let mut models = args.models.clone();
    models.sort();
    models.dedup();

    let mut mk_fit: Option<FitResult64> = None;
    for &model in &models {
        let mut fit = fit_model(&users, model, &grid).with_context(|| format!("fit: model {model}"))?;
        fit.source_digest = Some(digest.clone());
        output::write_json(&dir.join(fit_file_name(model)), &fit)?;
        report(&fit);
        if model == Model::Mk {
            mk_fit = Some(fit);
        }
    }
    if let Some(mk) = mk_fit {
        let mut it = fit_at_threshold(&users, Model::It, mk.threshold()).context("fit: IT at the MK threshold")?;
        it.source_digest = Some(digest);
        output::write_json(&dir.join(IT_AT_MK), &it)?;
    }
    manifest.write(&dir)
}

fn report(fit: &FitResult64) {
    let ll = fit.loglik_total.value().map_or("-inf".to_string(), |v| format!("{v:.3}"));
    let t = fit.t_thres.map_or(String::new(), |t| format!(" t_thres={t:.2}s"));
    eprintln!(
        "fit {}: loglik={ll}{t} users={} pairs={} degenerate={}",
        fit.model,
        fit.n_users,
        fit.n_pairs_total,
        fit.degenerate_users.len()
    );
}
