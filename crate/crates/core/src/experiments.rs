//! Canned experiment tables and the channel-overhead calibration scan.
//!
//! Everything here is built from [`ScenarioConfig`] values and
//! [`run_many`], so each row can be reproduced with a single `run`.

use rayon::prelude::*;

use crate::channel::{ChannelProfile, ProfileId};
use crate::scenario::{run_many, ConfigError, MetricsReport, Mode, ScenarioConfig, FULL_FILE_SIZE};
use crate::transport::CcAlgo;

pub const PROFILES: [ProfileId; 2] = [ProfileId::Ieee80211b, ProfileId::Ieee80211n];
pub const ALGOS: [CcAlgo; 2] = [CcAlgo::Aimd, CcAlgo::Cubic];
pub const BLEND_BI: u32 = 15;
pub const BI_SWEEP: [u32; 4] = [0, 5, 10, 15];
pub const GAMMA_SWEEP: [f64; 3] = [4.0, 10.0, 20.0];

/// Reference goodput for one profile (Mbps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodputTarget {
    pub profile: ProfileId,
    pub default_mbps: f64,
    pub one_interest_mbps: f64,
}

pub const GOODPUT_TARGETS: [GoodputTarget; 2] = [
    GoodputTarget {
        profile: ProfileId::Ieee80211b,
        default_mbps: 4.4,
        one_interest_mbps: 7.0,
    },
    GoodputTarget {
        profile: ProfileId::Ieee80211n,
        default_mbps: 9.7,
        one_interest_mbps: 18.6,
    },
];

/// Relative tolerance on the goodput targets.
pub const GOODPUT_TOLERANCE: f64 = 0.20;
/// Minimum goodput gain of blend (bi=15) over default, per algorithm.
pub const MIN_GAIN_AIMD: f64 = 0.25;
pub const MIN_GAIN_CUBIC: f64 = 0.24;

pub fn target_for(profile: ProfileId) -> GoodputTarget {
    *GOODPUT_TARGETS.iter().find(|t| t.profile == profile).expect("every profile has a target")
}

fn with(base: &ScenarioConfig, profile: ProfileId, algo: CcAlgo, mode: Mode, bi: Option<u32>) -> ScenarioConfig {
    ScenarioConfig {
        profile,
        algo,
        mode,
        bi,
        ..base.clone()
    }
}

fn mode_for_bi(bi: u32) -> (Mode, Option<u32>) {
    if bi == 0 {
        (Mode::Default, None)
    } else {
        (Mode::Blend, Some(bi))
    }
}

/// default and one_interest per profile, AIMD.
pub fn baseline_table(base: &ScenarioConfig) -> Result<Vec<MetricsReport>, ConfigError> {
    let mut cfgs = Vec::new();
    for p in PROFILES {
        for mode in [Mode::Default, Mode::OneInterest] {
            cfgs.push(with(base, p, CcAlgo::Aimd, mode, None));
        }
    }
    run_many(&cfgs)
}

/// default, blend (bi=15) and one_interest for every profile and algorithm.
pub fn goodput_table(base: &ScenarioConfig) -> Result<Vec<MetricsReport>, ConfigError> {
    let mut cfgs = Vec::new();
    for p in PROFILES {
        for a in ALGOS {
            cfgs.push(with(base, p, a, Mode::Default, None));
            cfgs.push(with(base, p, a, Mode::Blend, Some(BLEND_BI)));
            cfgs.push(with(base, p, a, Mode::OneInterest, None));
        }
    }
    run_many(&cfgs)
}

/// bi in {0, 5, 10, 15} on 802.11b for both algorithms; bi=0 is default mode.
pub fn bi_table(base: &ScenarioConfig) -> Result<Vec<MetricsReport>, ConfigError> {
    let mut cfgs = Vec::new();
    for a in ALGOS {
        for bi in BI_SWEEP {
            let (mode, bi) = mode_for_bi(bi);
            cfgs.push(with(base, ProfileId::Ieee80211b, a, mode, bi));
        }
    }
    run_many(&cfgs)
}

/// gamma in {4, 10, 20} with blend (bi=15) on 802.11n, 100 MB file.
pub fn gamma_table(base: &ScenarioConfig) -> Result<Vec<MetricsReport>, ConfigError> {
    let mut cfgs = Vec::new();
    for a in ALGOS {
        for g in GAMMA_SWEEP {
            let mut c = with(base, ProfileId::Ieee80211n, a, Mode::Blend, Some(BLEND_BI));
            c.gamma = g;
            c.file_size = FULL_FILE_SIZE;
            cfgs.push(c);
        }
    }
    run_many(&cfgs)
}

/// Goodput of the three modes at one overhead value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadPoint {
    pub overhead_us: u64,
    pub default_mbps: f64,
    pub blend_mbps: f64,
    pub one_interest_mbps: f64,
}

impl OverheadPoint {
    pub fn gain(&self) -> f64 {
        self.blend_mbps / self.default_mbps - 1.0
    }

    /// Smallest distance to failing either goodput tolerance or the AIMD gain floor.
    pub fn slack(&self, t: &GoodputTarget) -> f64 {
        let d = GOODPUT_TOLERANCE - (self.default_mbps / t.default_mbps - 1.0).abs();
        let o = GOODPUT_TOLERANCE - (self.one_interest_mbps / t.one_interest_mbps - 1.0).abs();
        d.min(o).min(self.gain() - MIN_GAIN_AIMD)
    }
}

/// Runs default, blend (bi=15) and one_interest under AIMD for each overhead.
pub fn scan_overheads(base: &ScenarioConfig, profile: ProfileId, overheads: &[u64]) -> Result<Vec<OverheadPoint>, ConfigError> {
    overheads
        .par_iter()
        .map(|&o| {
            let mut c = with(base, profile, CcAlgo::Aimd, Mode::Default, None);
            c.channel.overhead_us = Some(o);
            let d = crate::scenario::run_scenario(&c)?;
            let b = crate::scenario::run_scenario(&ScenarioConfig {
                mode: Mode::Blend,
                bi: Some(BLEND_BI),
                ..c.clone()
            })?;
            let one = crate::scenario::run_scenario(&ScenarioConfig {
                mode: Mode::OneInterest,
                ..c
            })?;
            Ok(OverheadPoint {
                overhead_us: o,
                default_mbps: d.goodput_mbps,
                blend_mbps: b.goodput_mbps,
                one_interest_mbps: one.goodput_mbps,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub b: OverheadPoint,
    pub n: OverheadPoint,
    /// min of both per-profile slacks and of gain(n) - gain(b).
    pub slack: f64,
}

/// Picks the overhead pair with the largest worst-case slack.
pub fn choose_calibration(b: &[OverheadPoint], n: &[OverheadPoint]) -> Option<Calibration> {
    let tb = target_for(ProfileId::Ieee80211b);
    let tn = target_for(ProfileId::Ieee80211n);
    let mut best: Option<Calibration> = None;
    for pb in b {
        for pn in n {
            let slack = pb.slack(&tb).min(pn.slack(&tn)).min(pn.gain() - pb.gain());
            if best.is_none_or(|c| slack > c.slack) {
                best = Some(Calibration { b: *pb, n: *pn, slack });
            }
        }
    }
    best
}

/// Overheads currently compiled into the profiles.
pub fn current_overheads() -> (u64, u64) {
    (
        ChannelProfile::ieee80211b().fixed_overhead_us,
        ChannelProfile::ieee80211n().fixed_overhead_us,
    )
}
