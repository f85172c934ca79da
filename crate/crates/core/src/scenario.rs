//! Scenario configuration, single runs and parameter sweeps.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apps::{FileSpec, MIB};
use crate::channel::{ChannelLogEntry, ChannelProfile, LossScript, ProfileId};
use crate::kernel::SimTime;
use crate::tlv::Name;
use crate::transport::{CcAlgo, TransportConfig};
use crate::world::{self, WorldConfig, WorldMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Default,
    Blend,
    OneInterest,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Default => "default",
            Mode::Blend => "blend",
            Mode::OneInterest => "one_interest",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Mode::Default),
            "blend" => Ok(Mode::Blend),
            "one_interest" | "one-interest" => Ok(Mode::OneInterest),
            other => Err(format!("unknown mode {other:?} (expected default, blend or one_interest)")),
        }
    }
}

/// File size in bytes. Parses `10MB`, `512KB`, `1460` and so on, with
/// binary multiples (1 MB = 2^20 bytes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FileSize(pub u64);

impl FromStr for FileSize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let upper = t.to_ascii_uppercase();
        let (num, mult) = [("GIB", 1u64 << 30), ("MIB", MIB), ("KIB", 1 << 10), ("GB", 1 << 30), ("MB", MIB), ("KB", 1 << 10), ("B", 1)]
            .iter()
            .find_map(|(suf, m)| upper.strip_suffix(suf).map(|n| (n.trim().to_owned(), *m)))
            .unwrap_or((upper.clone(), 1));
        let n: u64 = num.parse().map_err(|_| format!("bad file size {t:?}"))?;
        n.checked_mul(mult)
            .map(FileSize)
            .ok_or_else(|| format!("file size {t:?} overflows"))
    }
}

impl TryFrom<String> for FileSize {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FileSize> for String {
    fn from(f: FileSize) -> String {
        f.to_string()
    }
}

impl fmt::Display for FileSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 != 0 && self.0.is_multiple_of(MIB) {
            write!(f, "{}MB", self.0 / MIB)
        } else if self.0 != 0 && self.0.is_multiple_of(1024) {
            write!(f, "{}KB", self.0 / 1024)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

pub const DESK_FILE_SIZE: FileSize = FileSize(10 * MIB);
pub const FULL_FILE_SIZE: FileSize = FileSize(100 * MIB);

/// Per-frame residual loss on the medium in the stock scenario.
pub const DEFAULT_LOSS: &str = "random:0.01";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelOverrides {
    pub overhead_us: Option<u64>,
    pub bit_rate_bps: Option<u64>,
    pub mac_header_bytes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportSettings {
    pub initial_cwnd: f64,
    pub rto_min_ms: u64,
    pub rto_max_ms: u64,
    pub initial_rto_ms: u64,
    pub interest_lifetime_ms: u64,
}

impl Default for TransportSettings {
    fn default() -> Self {
        let d = TransportConfig::default();
        Self {
            initial_cwnd: d.initial_cwnd,
            rto_min_ms: d.rto_min.as_micros() / 1000,
            rto_max_ms: d.rto_max.as_micros() / 1000,
            initial_rto_ms: d.initial_rto.as_micros() / 1000,
            interest_lifetime_ms: d.interest_lifetime_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub profile: ProfileId,
    pub mode: Mode,
    pub bi: Option<u32>,
    pub algo: CcAlgo,
    pub gamma: f64,
    pub file_size: FileSize,
    pub chunk_payload: usize,
    pub seed: u64,
    pub loss: Vec<String>,
    pub deadline_s: u64,
    pub channel: ChannelOverrides,
    pub transport: TransportSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            profile: ProfileId::Ieee80211b,
            mode: Mode::Default,
            bi: None,
            algo: CcAlgo::Aimd,
            gamma: 4.0,
            file_size: DESK_FILE_SIZE,
            chunk_payload: crate::apps::CHUNK_PAYLOAD,
            seed: 1,
            loss: vec![DEFAULT_LOSS.to_owned()],
            deadline_s: 3600,
            channel: ChannelOverrides::default(),
            transport: TransportSettings::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serialises")
    }

    pub fn file_spec(&self) -> FileSpec {
        FileSpec::new(
            Name::parse_prefix("/file").expect("static prefix"),
            self.file_size.0,
            self.chunk_payload,
        )
    }

    pub fn channel_profile(&self) -> ChannelProfile {
        let mut p = ChannelProfile::for_id(self.profile);
        if let Some(o) = self.channel.overhead_us {
            p.fixed_overhead_us = o;
        }
        if let Some(r) = self.channel.bit_rate_bps {
            p.bit_rate_bps = r;
        }
        if let Some(h) = self.channel.mac_header_bytes {
            p.mac_header_bytes = h;
        }
        p
    }

    pub fn loss_script(&self) -> Result<LossScript, ConfigError> {
        let items: Vec<&str> = self
            .loss
            .iter()
            .map(String::as_str)
            .filter(|s| !matches!(s.trim(), "none" | "lossless"))
            .collect();
        LossScript::parse_list(&items).map_err(|e| invalid("loss", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (self.mode, self.bi) {
            (Mode::Blend, None) => return Err(invalid("bi", "mode blend requires bi >= 1")),
            (Mode::Blend, Some(0)) => return Err(invalid("bi", "mode blend requires bi >= 1, got 0")),
            (Mode::OneInterest, Some(_)) => return Err(invalid("bi", "mode one_interest does not take a bundle interval")),
            _ => {}
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(invalid("gamma", format!("must be a finite non-negative number, got {}", self.gamma)));
        }
        if self.chunk_payload == 0 {
            return Err(invalid("chunk_payload", "must be positive"));
        }
        if self.file_size.0 == 0 {
            return Err(invalid("file_size", "must be positive"));
        }
        if self.deadline_s == 0 {
            return Err(invalid("deadline_s", "must be positive"));
        }
        if let Some(0) = self.channel.bit_rate_bps {
            return Err(invalid("channel.bit_rate_bps", "must be positive"));
        }
        if let Some(0) = self.channel.overhead_us {
            return Err(invalid("channel.overhead_us", "must be positive"));
        }
        let t = &self.transport;
        if !(t.initial_cwnd.is_finite() && t.initial_cwnd >= 1.0) {
            return Err(invalid("transport.initial_cwnd", "must be at least 1"));
        }
        if t.rto_min_ms == 0 || t.rto_min_ms > t.rto_max_ms {
            return Err(invalid("transport.rto_min_ms", "must be positive and not above rto_max_ms"));
        }
        if t.interest_lifetime_ms == 0 {
            return Err(invalid("transport.interest_lifetime_ms", "must be positive"));
        }
        self.loss_script()?;
        Ok(())
    }

    pub fn world_config(&self, opts: &RunOptions) -> Result<WorldConfig, ConfigError> {
        self.validate()?;
        let mode = match self.mode {
            Mode::Default => WorldMode::Fetch { bundling: false, bi: self.bi.unwrap_or(1).max(1) },
            Mode::Blend => WorldMode::Fetch { bundling: true, bi: self.bi.unwrap_or(1) },
            Mode::OneInterest => WorldMode::Push,
        };
        let t = &self.transport;
        Ok(WorldConfig {
            profile: self.channel_profile(),
            loss: self.loss_script()?,
            mode,
            file: self.file_spec(),
            transport: TransportConfig {
                algo: self.algo,
                gamma: self.gamma,
                initial_cwnd: t.initial_cwnd,
                rto_min: SimTime::from_millis(t.rto_min_ms),
                rto_max: SimTime::from_millis(t.rto_max_ms),
                initial_rto: SimTime::from_millis(t.initial_rto_ms),
                interest_lifetime_ms: t.interest_lifetime_ms,
            },
            seed: self.seed,
            deadline: SimTime::from_secs(self.deadline_s),
            channel_log: opts.channel_log,
            producer_trace: opts.producer_trace,
            cwnd_trace: opts.cwnd_trace,
        })
    }

    /// Bundle interval as reported: 0 when nothing is bundled.
    pub fn effective_bi(&self) -> u32 {
        match self.mode {
            Mode::Blend => self.bi.unwrap_or(0),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub channel_log: bool,
    pub producer_trace: bool,
    pub cwnd_trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub profile: ProfileId,
    pub mode: Mode,
    pub bi: u32,
    pub algo: CcAlgo,
    pub gamma: f64,
    pub seed: u64,
    pub file_bytes: u64,
    pub completed: bool,
    pub goodput_mbps: f64,
    pub completion_time_s: f64,
    pub link_tx_events: u64,
    pub app_sent: u64,
    pub p_sent: u64,
    pub c_rcv: u64,
    pub data_pkts: u64,
    pub rtx: u64,
    pub timeouts: u64,
    pub suppressed_at_link: u64,
    pub duplicate_data: u64,
    pub frames_dropped: u64,
    pub stale_bundles: u64,
    pub channel_utilisation: f64,
}

impl MetricsReport {
    /// Accounting identities every row must satisfy. Returns the first violation.
    pub fn check_identities(&self) -> Result<(), String> {
        if self.completed && self.mode != Mode::OneInterest && self.app_sent != self.data_pkts + self.rtx {
            return Err(format!(
                "App_sent {} != Data_pkts {} + RTx {}",
                self.app_sent, self.data_pkts, self.rtx
            ));
        }
        if self.c_rcv > self.p_sent {
            return Err(format!("C_rcv {} > P_sent {}", self.c_rcv, self.p_sent));
        }
        if self.completed && self.goodput_mbps <= 0.0 {
            return Err("completed run with zero goodput".into());
        }
        Ok(())
    }
}

pub struct ScenarioOutput {
    pub report: MetricsReport,
    pub channel_log: Vec<ChannelLogEntry>,
    pub producer_trace: Vec<Name>,
    pub cwnd_trace: Vec<(SimTime, f64)>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsReport, ConfigError> {
    run_scenario_with(cfg, RunOptions::default()).map(|o| o.report)
}

pub fn run_scenario_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<ScenarioOutput, ConfigError> {
    let wc = cfg.world_config(&opts)?;
    let out = world::run(&wc);
    let s = &out.stats;
    let secs = s.completion_time.as_secs_f64();
    let goodput_bits = match cfg.mode {
        // Pushed chunks that were lost are never recovered.
        Mode::OneInterest => s.payload_bytes_delivered * 8,
        _ if s.completed => wc.file.size_bytes * 8,
        _ => s.payload_bytes_delivered * 8,
    };
    let end = s.end_time.as_secs_f64();
    let report = MetricsReport {
        profile: cfg.profile,
        mode: cfg.mode,
        bi: cfg.effective_bi(),
        algo: cfg.algo,
        gamma: cfg.gamma,
        seed: cfg.seed,
        file_bytes: wc.file.size_bytes,
        completed: s.completed,
        goodput_mbps: if secs > 0.0 { goodput_bits as f64 / secs / 1e6 } else { 0.0 },
        completion_time_s: secs,
        link_tx_events: s.consumer_interest_frames,
        app_sent: s.transport.app_sent,
        p_sent: s.producer_data_frames,
        c_rcv: s.consumer_data_frames_received,
        data_pkts: wc.file.n_chunks,
        rtx: s.transport.rtx,
        timeouts: s.transport.timeouts,
        suppressed_at_link: s.consumer_link.suppressed,
        duplicate_data: s.consumer_data_frames_received.saturating_sub(s.chunks_delivered),
        frames_dropped: s.frames_dropped,
        stale_bundles: s.producer_link.bundles_dropped_stale,
        channel_utilisation: if end > 0.0 { s.channel_busy.as_secs_f64() / end } else { 0.0 },
    };
    Ok(ScenarioOutput {
        report,
        channel_log: out.channel_log,
        producer_trace: out.producer_trace,
        cwnd_trace: out.cwnd_trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// 0 means no bundling (default mode).
    Bi(Vec<u32>),
    Gamma(Vec<f64>),
    Profile(Vec<ProfileId>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Bi(_) => "bi",
            SweepAxis::Gamma(_) => "gamma",
            SweepAxis::Profile(_) => "profile",
        }
    }

    fn len(&self) -> usize {
        match self {
            SweepAxis::Bi(v) => v.len(),
            SweepAxis::Gamma(v) => v.len(),
            SweepAxis::Profile(v) => v.len(),
        }
    }

    fn apply(&self, i: usize, base: &ScenarioConfig) -> ScenarioConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::Bi(v) => {
                if v[i] == 0 {
                    c.mode = Mode::Default;
                    c.bi = None;
                } else {
                    c.mode = Mode::Blend;
                    c.bi = Some(v[i]);
                }
            }
            SweepAxis::Gamma(v) => c.gamma = v[i],
            SweepAxis::Profile(v) => c.profile = v[i],
        }
        c
    }
}

/// One run per value, all with the base seed, in parallel. Rows keep the
/// order of `axis`.
pub fn run_sweep(axis: &SweepAxis, base: &ScenarioConfig) -> Result<Vec<MetricsReport>, ConfigError> {
    if axis.len() == 0 {
        return Err(invalid("sweep", "empty value list"));
    }
    let configs: Vec<ScenarioConfig> = (0..axis.len()).map(|i| axis.apply(i, base)).collect();
    for c in &configs {
        c.validate()?;
    }
    configs.par_iter().map(run_scenario).collect()
}

/// Runs many independent configs in parallel, preserving order.
pub fn run_many(configs: &[ScenarioConfig]) -> Result<Vec<MetricsReport>, ConfigError> {
    configs.par_iter().map(run_scenario).collect()
}
