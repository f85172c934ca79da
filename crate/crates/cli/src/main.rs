use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use blend_core::channel::ProfileId;
use blend_core::report::{self, ReportFormat};
use blend_core::scenario::{
    self, FileSize, MetricsReport, Mode, RunOptions, ScenarioConfig, SweepAxis, FULL_FILE_SIZE,
};
use blend_core::transport::CcAlgo;

mod calibrate;
mod reproduce;

#[derive(Parser)]
#[command(name = "blend-sim", version, about = "Two-node NDN Wi-Fi simulator with link-layer Interest bundling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run(RunArgs),
    /// Run one scenario per value along an axis.
    Sweep(SweepArgs),
    /// Grid-search per-frame channel overheads against goodput targets.
    Calibrate(calibrate::CalibrateArgs),
    /// Run every experiment table and write the results to --out.
    Reproduce(reproduce::ReproduceArgs),
    /// Print the effective configuration as TOML.
    ShowConfig(Common),
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// TOML scenario file; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<ProfileId>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Bundle interval (blend mode only).
    #[arg(long)]
    pub bi: Option<u32>,
    #[arg(long)]
    pub algo: Option<CcAlgo>,
    /// RTT variance multiplier in the RTO.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// e.g. 10MB, 512KB or a byte count.
    #[arg(long)]
    pub file_size: Option<FileSize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Loss rules, comma separated: random:<p>[:<kind>], nth:<kind>:<node>:<n>, or none.
    #[arg(long)]
    pub loss_script: Option<String>,
    /// Fetch the 100 MB file instead of the desk-scale default.
    #[arg(long)]
    pub paper_scale: bool,
    /// Per-frame channel overhead in microseconds.
    #[arg(long)]
    pub overhead_us: Option<u64>,
}

impl Common {
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(v) = self.profile {
            c.profile = v;
        }
        if let Some(v) = self.mode {
            c.mode = v;
            if v != Mode::Blend && self.bi.is_none() {
                c.bi = None;
            }
        }
        if let Some(v) = self.bi {
            c.bi = Some(v);
            if self.mode.is_none() && self.config.is_none() {
                c.mode = Mode::Blend;
            }
        }
        if let Some(v) = self.algo {
            c.algo = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if self.paper_scale {
            c.file_size = FULL_FILE_SIZE;
        }
        if let Some(v) = self.file_size {
            c.file_size = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.loss_script {
            c.loss = vec![v.clone()];
        }
        if let Some(v) = self.overhead_us {
            c.channel.overhead_us = Some(v);
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write channel, producer-forwarder and cwnd traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Bi,
    Gamma,
    Profile,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma separated values; bi=0 means no bundling.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

pub fn write_reports(reports: &[MetricsReport], out: &Path) -> Result<()> {
    for f in [ReportFormat::Csv, ReportFormat::Text, ReportFormat::Svg] {
        report::emit_report(reports, f, out)?;
    }
    Ok(())
}

pub fn check_rows(reports: &[MetricsReport]) -> Result<()> {
    for r in reports {
        if let Err(e) = r.check_identities() {
            bail!("accounting identity violated: {e}");
        }
        if !r.completed {
            bail!(
                "scenario did not complete before the deadline ({} of {} chunks, {:.3} s simulated)",
                r.app_sent.saturating_sub(r.rtx),
                r.data_pkts,
                r.completion_time_s
            );
        }
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let opts = RunOptions {
        channel_log: args.trace,
        producer_trace: args.trace,
        cwnd_trace: args.trace,
    };
    let out = scenario::run_scenario_with(&cfg, opts)?;
    let reports = [out.report];
    print!("{}", report::to_text_table(&reports)?);
    write_reports(&reports, &args.out)?;
    if args.trace {
        let ch: String = out.channel_log.iter().map(|e| format!("{e}\n")).collect();
        std::fs::write(args.out.join("channel.log"), ch).context("writing channel.log")?;
        let pt: String = out.producer_trace.iter().map(|n| format!("{n}\n")).collect();
        std::fs::write(args.out.join("producer_trace.log"), pt).context("writing producer_trace.log")?;
        let cw: String = out
            .cwnd_trace
            .iter()
            .map(|(t, w)| format!("{t} {w:.4}\n"))
            .collect();
        std::fs::write(args.out.join("cwnd.log"), cw).context("writing cwnd.log")?;
    }
    check_rows(&reports)
}

fn parse_axis(axis: Axis, values: &[String]) -> Result<SweepAxis> {
    let parsed = match axis {
        Axis::Bi => SweepAxis::Bi(
            values
                .iter()
                .map(|v| v.trim().parse().with_context(|| format!("bad bi {v:?}")))
                .collect::<Result<_>>()?,
        ),
        Axis::Gamma => SweepAxis::Gamma(
            values
                .iter()
                .map(|v| v.trim().parse().with_context(|| format!("bad gamma {v:?}")))
                .collect::<Result<_>>()?,
        ),
        Axis::Profile => SweepAxis::Profile(
            values
                .iter()
                .map(|v| v.trim().parse().map_err(anyhow::Error::msg))
                .collect::<Result<_>>()?,
        ),
    };
    Ok(parsed)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut common = args.common.clone();
    let base = if matches!(args.axis, Axis::Bi) {
        // The axis decides the mode for each row.
        common.mode = None;
        common.bi = None;
        let mut c = common.resolve()?;
        c.mode = Mode::Default;
        c.bi = None;
        c
    } else {
        common.resolve()?
    };
    let axis = parse_axis(args.axis, &args.values)?;
    let reports = scenario::run_sweep(&axis, &base)?;
    print!("{}", report::to_text_table(&reports)?);
    write_reports(&reports, &args.out)?;
    check_rows(&reports)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Calibrate(a) => calibrate::calibrate(a),
        Command::Reproduce(a) => reproduce::reproduce(a),
        Command::ShowConfig(c) => c.resolve().map(|c| print!("{}", c.to_toml())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
