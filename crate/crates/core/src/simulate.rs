//! Synthetic waiting-time sequences and event logs from IP, IT or MK
//! parameters.
//!
//! Every user draws from its own ChaCha stream: the key comes from the run
//! seed, the stream id is the user index and the block counter advances
//! with each draw. Users can therefore be simulated in any order or in
//! parallel with bit-identical results.

use std::collections::BTreeMap;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Model, UserSample};
use crate::ingest::{self, EventRecord, InterEventSequence};
use crate::model::{stationary_p_s, IpParams, ItParams, MkParams, StateLabel, Threshold};
use crate::scalar::Scalar;

/// Inverse-CDF draw from the power law with lower bound `t_thres`.
/// `u` must lie in `(0, 1]`; `u = 1` maps to the bound itself.
pub fn sample_long<T: Scalar>(gamma: T, t: Threshold<T>, u: T) -> Result<T> {
    sample_power_law(gamma, t.seconds(), u)
}

fn sample_power_law<T: Scalar>(gamma: T, lower: T, u: T) -> Result<T> {
    if !(gamma > T::one()) {
        return Err(Error::Domain(format!("gamma must be > 1, got {gamma}")));
    }
    if !(u > T::zero() && u <= T::one()) {
        return Err(Error::Domain(format!("uniform variate must lie in (0, 1], got {u}")));
    }
    Ok(lower * u.powf(-(gamma - T::one()).recip()))
}

/// Uniform draw on `[0, t_thres)` from `u ∈ [0, 1)`.
pub fn sample_short<T: Scalar>(t: Threshold<T>, u: T) -> T {
    u * t.seconds()
}

/// Per-user random stream keyed by `(seed, user_index)`.
pub struct KeyedRng {
    inner: ChaCha8Rng,
}

impl KeyedRng {
    pub fn new(seed: u64, user_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(user_index);
        inner.set_word_pos(0);
        KeyedRng { inner }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform<T: Scalar>(&mut self) -> T {
        let u = T::of(self.inner.random::<f64>());
        // narrowing to f32 can round up to 1
        if u >= T::one() {
            T::one() - T::epsilon()
        } else {
            u
        }
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open_left<T: Scalar>(&mut self) -> T {
        let u = T::of(1.0 - self.inner.random::<f64>());
        if u <= T::zero() {
            T::min_positive_value()
        } else {
            u
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams<T> {
    Ip(IpParams<T>),
    It(ItParams<T>),
    Mk(MkParams<T>),
}

impl<T: Scalar> ModelParams<T> {
    pub fn model(&self) -> Model {
        match self {
            ModelParams::Ip(_) => Model::Ip,
            ModelParams::It(_) => Model::It,
            ModelParams::Mk(_) => Model::Mk,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Stationary,
    FixedShort,
    FixedLong,
}

impl FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stationary" => Ok(InitialState::Stationary),
            "fixed_s" | "fixed_short" | "s" => Ok(InitialState::FixedShort),
            "fixed_l" | "fixed_long" | "l" => Ok(InitialState::FixedLong),
            other => Err(Error::Config(format!("unknown initial state rule {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    pub params: ModelParams<T>,
    /// Threshold for IT and MK; IP always uses the 1 s bound.
    pub t_thres: T,
    pub n_users: usize,
    /// Successor pairs per user; the sequence has one more waiting time.
    pub pairs_per_user: usize,
    pub seed: u64,
    pub initial_state: InitialState,
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.pairs_per_user == 0 {
            return Err(Error::Config("pairs_per_user must be >= 1".into()));
        }
        match &self.params {
            ModelParams::Ip(p) => p.validate().map_err(cfg)?,
            ModelParams::It(p) => {
                p.validate().map_err(cfg)?;
                Threshold::new(self.t_thres).map_err(cfg)?;
            }
            ModelParams::Mk(p) => {
                p.validate().map_err(cfg)?;
                Threshold::new(self.t_thres).map_err(cfg)?;
                if self.initial_state == InitialState::Stationary {
                    stationary_p_s(p).map_err(cfg)?;
                }
            }
        }
        Ok(())
    }

    pub fn user_id(&self, index: usize) -> String {
        let width = self.n_users.saturating_sub(1).to_string().len().max(4);
        format!("u{index:0width$}")
    }
}

/// Waiting times for one user: `pairs_per_user + 1` raw continuous values.
pub fn simulate_sequence<T: Scalar>(cfg: &SimConfig<T>, user_index: usize) -> Result<Vec<T>> {
    cfg.validate()?;
    let mut rng = KeyedRng::new(cfg.seed, user_index as u64);
    let n = cfg.pairs_per_user + 1;
    let mut out = Vec::with_capacity(n);
    match cfg.params {
        ModelParams::Ip(p) => {
            for _ in 0..n {
                out.push(sample_power_law(p.gamma, T::one(), rng.uniform_open_left())?);
            }
        }
        ModelParams::It(p) => {
            let t = Threshold::new(cfg.t_thres)?;
            for _ in 0..n {
                let short = rng.uniform::<T>() < p.p_s;
                out.push(draw_time(&mut rng, short, p.gamma, t)?);
            }
        }
        ModelParams::Mk(p) => {
            let t = Threshold::new(cfg.t_thres)?;
            let p0 = match cfg.initial_state {
                InitialState::Stationary => stationary_p_s(&p)?,
                InitialState::FixedShort => T::one(),
                InitialState::FixedLong => T::zero(),
            };
            let short = rng.uniform::<T>() < p0;
            // The first time has no predecessor; a long one is drawn as stand-by.
            out.push(draw_time(&mut rng, short, p.gamma_l, t)?);
            let mut prev = if short { StateLabel::Short } else { StateLabel::Long };
            for _ in 1..n {
                let short = rng.uniform::<T>() < p.p_short_after(prev);
                out.push(draw_time(&mut rng, short, p.gamma_after(prev), t)?);
                prev = if short { StateLabel::Short } else { StateLabel::Long };
            }
        }
    }
    Ok(out)
}

fn draw_time<T: Scalar>(rng: &mut KeyedRng, short: bool, gamma: T, t: Threshold<T>) -> Result<T> {
    if short {
        Ok(sample_short(t, rng.uniform()))
    } else {
        sample_long(gamma, t, rng.uniform_open_left())
    }
}

/// One single-block sample per user with raw continuous times.
pub fn simulate_users<T: Scalar>(cfg: &SimConfig<T>) -> Result<Vec<UserSample<T>>> {
    cfg.validate()?;
    (0..cfg.n_users)
        .into_par_iter()
        .map(|i| Ok(UserSample::new(cfg.user_id(i), vec![simulate_sequence(cfg, i)?])))
        .collect()
}

/// Placement of simulated events on the calendar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLayout {
    pub start_day: NaiveDate,
    pub window_start: u32,
    pub window_end: u32,
    pub utc_offset_secs: i64,
}

impl Default for EventLayout {
    fn default() -> Self {
        EventLayout {
            start_day: NaiveDate::from_ymd_opt(2016, 4, 1).expect("valid date"),
            window_start: 8,
            window_end: 22,
            utc_offset_secs: 0,
        }
    }
}

/// Whole seconds of a simulated time: rounded up and floored at 1.
pub fn discretize<T: Scalar>(time: T) -> i64 {
    let c = time.ceil().to_f64_lossy();
    if c.is_nan() || c < 1.0 {
        1
    } else if c > 1e15 {
        1_000_000_000_000_000
    } else {
        c as i64
    }
}

/// A day block in local time: day offset from the layout start and event
/// seconds within that day.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaidOutBlock {
    pub day_offset: i64,
    pub event_secs: Vec<i64>,
}

/// Place a waiting-time sequence inside daily windows. The first event sits
/// at the window start; a waiting time that would pass the window end is
/// dropped and the next event opens a new block on the following day.
pub fn layout_blocks<T: Scalar>(times: &[T], layout: &EventLayout) -> Vec<LaidOutBlock> {
    let lo = i64::from(layout.window_start) * 3600;
    let hi = i64::from(layout.window_end) * 3600;
    let mut blocks = vec![LaidOutBlock { day_offset: 0, event_secs: vec![lo] }];
    for &t in times {
        let d = discretize(t);
        let block = blocks.last_mut().expect("nonempty");
        let cursor = *block.event_secs.last().expect("nonempty");
        if d <= hi - cursor {
            block.event_secs.push(cursor + d);
        } else {
            let day_offset = block.day_offset + 1;
            blocks.push(LaidOutBlock { day_offset, event_secs: vec![lo] });
        }
    }
    blocks
}

fn check_layout(layout: &EventLayout) -> Result<()> {
    let seg = ingest::SegmentOptions {
        window_start: layout.window_start,
        window_end: layout.window_end,
        min_activity: 0,
        utc_offset_secs: layout.utc_offset_secs,
    };
    seg.validate()
}

fn laid_out_users<T: Scalar>(cfg: &SimConfig<T>, layout: &EventLayout) -> Result<Vec<(String, Vec<LaidOutBlock>)>> {
    cfg.validate()?;
    check_layout(layout)?;
    (0..cfg.n_users)
        .into_par_iter()
        .map(|i| Ok((cfg.user_id(i), layout_blocks(&simulate_sequence(cfg, i)?, layout))))
        .collect()
}

/// Simulated event log, sorted by user then time.
pub fn emit_event_log<T: Scalar>(cfg: &SimConfig<T>, layout: &EventLayout) -> Result<Vec<EventRecord>> {
    let start = ingest::day_index(layout.start_day);
    let mut out = Vec::new();
    for (user, blocks) in laid_out_users(cfg, layout)? {
        for b in blocks {
            let base = (start + b.day_offset) * 86_400 - layout.utc_offset_secs;
            for s in b.event_secs {
                out.push(EventRecord::new(user.clone(), base + s)?);
            }
        }
    }
    Ok(out)
}

/// The sequences `ingest` recovers from [`emit_event_log`] with no activity
/// filter and the same window.
pub fn emit_sequences<T: Scalar>(cfg: &SimConfig<T>, layout: &EventLayout) -> Result<Vec<InterEventSequence>> {
    let start = ingest::day_index(layout.start_day);
    let mut out = Vec::new();
    for (user, blocks) in laid_out_users(cfg, layout)? {
        for b in blocks.into_iter().filter(|b| b.event_secs.len() >= 2) {
            out.push(InterEventSequence {
                user: user.clone(),
                day: ingest::day_from_index(start + b.day_offset),
                times: b.event_secs.windows(2).map(|w| (w[1] - w[0]) as u64).collect(),
            });
        }
    }
    Ok(out)
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            line: i + 1,
            message: format!("expected key=value, got {raw:?}"),
        })?;
        map.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
    }
    Ok(map)
}

fn get_num<T: Scalar>(kv: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    kv.get(key)
        .map(|v| v.parse::<f64>().map(T::of).map_err(|_| Error::Config(format!("{key}: not a number: {v:?}"))))
        .transpose()
}

fn require<T: Scalar>(kv: &BTreeMap<String, String>, key: &str, model: Model) -> Result<T> {
    get_num(kv, key)?.ok_or_else(|| Error::Config(format!("model {model} needs `{key}`")))
}

fn get_parsed<V: FromStr>(kv: &BTreeMap<String, String>, key: &str, default: V) -> Result<V> {
    match kv.get(key) {
        Some(v) => v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
        None => Ok(default),
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "model", "gamma", "p_s", "p_s_given_s", "p_s_given_l", "gamma_s", "gamma_l", "t_thres", "n_users",
    "pairs_per_user", "seed", "initial_state", "start_day", "window", "utc_offset",
];

impl<T: Scalar> SimConfig<T> {
    /// Build from key/value pairs. Defaults: `t_thres = 60`, `n_users = 10`,
    /// `pairs_per_user = 1000`, `seed = 0`, stationary initial state.
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = kv.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown configuration key {k:?}")));
        }
        let model: Model = kv.get("model").ok_or_else(|| Error::Config("missing `model`".into()))?.parse()?;
        let params = match model {
            Model::Ip => ModelParams::Ip(IpParams { gamma: require(kv, "gamma", model)? }),
            Model::It => ModelParams::It(ItParams { p_s: require(kv, "p_s", model)?, gamma: require(kv, "gamma", model)? }),
            Model::Mk => ModelParams::Mk(MkParams {
                p_s_given_s: require(kv, "p_s_given_s", model)?,
                p_s_given_l: require(kv, "p_s_given_l", model)?,
                gamma_s: require(kv, "gamma_s", model)?,
                gamma_l: require(kv, "gamma_l", model)?,
            }),
        };
        let cfg = SimConfig {
            params,
            t_thres: get_num(kv, "t_thres")?.unwrap_or(T::of(60.0)),
            n_users: get_parsed(kv, "n_users", 10)?,
            pairs_per_user: get_parsed(kv, "pairs_per_user", 1000)?,
            seed: get_parsed(kv, "seed", 0)?,
            initial_state: get_parsed(kv, "initial_state", InitialState::Stationary)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl EventLayout {
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut layout = EventLayout::default();
        if let Some(d) = kv.get("start_day") {
            layout.start_day = NaiveDate::parse_from_str(d, "%Y-%m-%d")
                .map_err(|_| Error::Config(format!("start_day: cannot parse {d:?}")))?;
        }
        if let Some(w) = kv.get("window") {
            (layout.window_start, layout.window_end) = parse_window(w)?;
        }
        if let Some(o) = kv.get("utc_offset") {
            layout.utc_offset_secs = ingest::parse_utc_offset(o)?;
        }
        check_layout(&layout)?;
        Ok(layout)
    }
}

/// Parse `start:end` hours, e.g. `8:22`.
pub fn parse_window(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::Config(format!("window must look like 8:22, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a >= b || b > 24 {
        return Err(bad());
    }
    Ok((a, b))
}
