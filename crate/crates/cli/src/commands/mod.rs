pub mod fit;
pub mod ingest;
pub mod simulate;

use anyhow::Context;
use intertime::ingest::parse_utc_offset;

use crate::GlobalOpts;

pub(crate) fn utc_offset(global: &GlobalOpts) -> anyhow::Result<Option<i64>> {
    global.utc_offset.as_deref().map(parse_utc_offset).transpose().context("--utc-offset")
}
