use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;

use blend_core::channel::ProfileId;
use blend_core::experiments::{self, OverheadPoint};

use crate::Common;

/// Inclusive `start:end:step` range of overheads in µs.
#[derive(Clone, Debug)]
pub struct Range(Vec<u64>);

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let nums: Result<Vec<u64>, _> = parts.iter().map(|p| p.trim().parse::<u64>()).collect();
        match nums.as_deref() {
            Ok([a, b, step]) if *step > 0 && a <= b && *a > 0 => Ok(Range((*a..=*b).step_by(*step as usize).collect())),
            Ok([a]) if *a > 0 => Ok(Range(vec![*a])),
            _ => Err(format!("expected start:end:step with 0 < start <= end and step > 0, got {s:?}")),
        }
    }
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    /// 802.11b overheads to try.
    #[arg(long, default_value = "500:660:10")]
    b_range: Range,
    /// 802.11n overheads to try.
    #[arg(long, default_value = "230:300:2")]
    n_range: Range,
    /// Directory for calibration.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn table(profile: ProfileId, points: &[OverheadPoint], out: &mut String) {
    let t = experiments::target_for(profile);
    writeln!(out, "{profile} (targets: default {} Mbps, one_interest {} Mbps)", t.default_mbps, t.one_interest_mbps).unwrap();
    writeln!(out, "  overhead_us  default  blend15  one_int   gain   slack").unwrap();
    for p in points {
        writeln!(
            out,
            "  {:>11}  {:>7.3}  {:>7.3}  {:>7.3}  {:>5.1}%  {:>6.3}",
            p.overhead_us,
            p.default_mbps,
            p.blend_mbps,
            p.one_interest_mbps,
            p.gain() * 100.0,
            p.slack(&t)
        )
        .unwrap();
    }
}

pub fn calibrate(a: CalibrateArgs) -> Result<()> {
    let mut common = a.common.clone();
    common.overhead_us = None;
    let base = common.resolve()?;
    let b = experiments::scan_overheads(&base, ProfileId::Ieee80211b, &a.b_range.0)?;
    let n = experiments::scan_overheads(&base, ProfileId::Ieee80211n, &a.n_range.0)?;
    let mut out = String::new();
    table(ProfileId::Ieee80211b, &b, &mut out);
    table(ProfileId::Ieee80211n, &n, &mut out);
    let Some(best) = experiments::choose_calibration(&b, &n) else {
        bail!("empty overhead range");
    };
    let (cur_b, cur_n) = experiments::current_overheads();
    writeln!(
        out,
        "chosen: 80211b={} us, 80211n={} us (worst-case slack {:.3}; gains {:.1}% / {:.1}%)",
        best.b.overhead_us,
        best.n.overhead_us,
        best.slack,
        best.b.gain() * 100.0,
        best.n.gain() * 100.0
    )
    .unwrap();
    writeln!(out, "built-in: 80211b={cur_b} us, 80211n={cur_n} us").unwrap();
    print!("{out}");

    let mut csv = String::from("profile,overhead_us,default_mbps,blend_mbps,one_interest_mbps,gain,slack\n");
    for (profile, points) in [(ProfileId::Ieee80211b, &b), (ProfileId::Ieee80211n, &n)] {
        let t = experiments::target_for(profile);
        for p in points {
            writeln!(
                csv,
                "{profile},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
                p.overhead_us,
                p.default_mbps,
                p.blend_mbps,
                p.one_interest_mbps,
                p.gain(),
                p.slack(&t)
            )
            .unwrap();
        }
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let path = a.out.join("calibration.csv");
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    if best.slack < 0.0 {
        bail!("no overhead pair meets every target");
    }
    Ok(())
}
