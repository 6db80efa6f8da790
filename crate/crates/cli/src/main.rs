use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

use rxlin::harness::{
    emit_results, run_scenario, summarize, sweep, write_csv, write_jsonl, OutputFormat, ResultRow, ScenarioConfig,
    SweepAxis,
};
use rxlin::metrics::link_budget;
use rxlin::Execution;

#[derive(Parser)]
#[command(name = "rxlin", version, about = "Monte-Carlo LNA/ADC linearization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario at each value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// input-power | iip3 | adc-bits
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated list, or start:stop:step (inclusive).
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Received power and peak power at one antenna, dBm.
    Linkbudget {
        #[arg(long, allow_hyphen_values = true)]
        tx_dbm: f64,
        #[arg(long, allow_hyphen_values = true)]
        tx_gain: f64,
        #[arg(long, allow_hyphen_values = true)]
        pathloss: f64,
        #[arg(long, allow_hyphen_values = true)]
        rx_gain: f64,
        #[arg(long, allow_hyphen_values = true)]
        papr: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; rows go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | jsonl; defaults to the output file extension, else csv.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Run every loop on the calling thread.
    #[arg(long)]
    serial: bool,
    /// Report wall_time_s as 0 for byte-reproducible output.
    #[arg(long)]
    no_timing: bool,
    /// Print trial-mean distortion per (value, method) to stderr.
    #[arg(long)]
    summary: bool,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::load(&self.config)
            .with_context(|| format!("loading scenario {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if self.serial {
            cfg.execution = Execution::Serial;
        }
        if self.no_timing {
            cfg.record_wall_time = false;
        }
        cfg.validate().context("invalid scenario")?;
        Ok(cfg)
    }

    fn emit(&self, rows: &[ResultRow]) -> Result<()> {
        let format = self
            .format
            .unwrap_or_else(|| self.out.as_deref().map_or(OutputFormat::Csv, OutputFormat::from_path));
        match &self.out {
            Some(path) => emit_results(rows, path, format).with_context(|| format!("writing {}", path.display()))?,
            None => {
                let stdout = std::io::stdout().lock();
                match format {
                    OutputFormat::Csv => write_csv(rows, stdout)?,
                    OutputFormat::JsonLines => write_jsonl(rows, stdout)?,
                }
            }
        }
        if self.summary {
            let mut err = std::io::stderr().lock();
            writeln!(
                err,
                "{:>12} {:>14} {:>12} {:>10} {:>7}",
                "value", "method", "mean_dB", "sat_ant", "trials"
            )?;
            for s in summarize(rows) {
                writeln!(
                    err,
                    "{:>12.3} {:>14} {:>12.3} {:>10.3} {:>7}",
                    s.sweep_value, s.method, s.mean_d_bar_db, s.mean_sat_antennas, s.trials
                )?;
            }
        }
        Ok(())
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        bail!("--values is empty");
    }
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("bad range '{text}'"))?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !step.is_finite() || step <= 0.0 || stop < start {
            bail!("range '{text}' needs step > 0 and stop >= start");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| start + k as f64 * step).collect());
    }
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad sweep value '{v}'"))
        })
        .collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common } => {
            let cfg = common.load()?;
            let rows = run_scenario(&cfg)?;
            common.emit(&rows)?;
        }
        Command::Sweep { common, axis, values } => {
            let cfg = common.load()?;
            let values = parse_values(&values)?;
            let rows = sweep(&cfg, axis, &values)?;
            common.emit(&rows)?;
        }
        Command::Linkbudget {
            tx_dbm,
            tx_gain,
            pathloss,
            rx_gain,
            papr,
        } => {
            let lb = link_budget(tx_dbm, tx_gain, pathloss, rx_gain, papr);
            println!("rx_dbm,rx_peak_dbm");
            println!("{:.8e},{:.8e}", lb.rx_dbm, lb.rx_peak_dbm);
        }
    }
    Ok(())
}
