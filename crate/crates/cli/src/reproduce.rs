use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use blend_core::experiments;
use blend_core::report;
use blend_core::scenario::{MetricsReport, ScenarioConfig};

use crate::{check_rows, write_reports, Common};

#[derive(Args)]
pub struct ReproduceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "out/reproduce")]
    out: PathBuf,
}

type Table = fn(&ScenarioConfig) -> Result<Vec<MetricsReport>, blend_core::scenario::ConfigError>;

pub fn reproduce(a: ReproduceArgs) -> Result<()> {
    let base = a.common.resolve()?;
    let tables: [(&str, &str, Table); 4] = [
        ("baseline", "default vs one_interest goodput", experiments::baseline_table),
        ("goodput", "default, blend bi=15 and one_interest", experiments::goodput_table),
        ("bi_sweep", "bundle interval sweep on 802.11b", experiments::bi_table),
        ("gamma_sweep", "RTO variance multiplier sweep on 802.11n, 100 MB", experiments::gamma_table),
    ];
    let mut all = Vec::new();
    for (dir, title, f) in tables {
        let rows = f(&base)?;
        println!("== {dir}: {title}");
        print!("{}", report::to_text_table(&rows)?);
        println!();
        write_reports(&rows, &a.out.join(dir))?;
        all.extend(rows);
    }
    check_rows(&all)
}
