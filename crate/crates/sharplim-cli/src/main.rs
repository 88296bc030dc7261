use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sharplim::corrector::{corrector_u1, PerturbationG};
use sharplim::harness::export::{export, write_table};
use sharplim::harness::run::SnapshotRow;
use sharplim::harness::{kbar, run_compare, run_scenario, sweep, SweepConfig};
use sharplim::nonlinearity::make_cubic;
use sharplim::profile::default_profile;

#[derive(Parser)]
#[command(name = "sharplim", version, about = "Allen-Cahn sharp-interface experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; its keys mirror SweepConfig.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                SweepConfig::from_json(&text)?
            }
            None => SweepConfig::preset(self.scenario.as_deref().unwrap_or("1d-generation"))?,
        };
        if let (Some(s), Some(_)) = (&self.scenario, &self.config) {
            cfg.scenario = s.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Standing wave of the cubic nonlinearity as a z, U0, U0' table.
    Profile {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First-order corrector for a constant perturbation g0.
    Corrector {
        #[arg(long, default_value_t = 1.0)]
        g0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One run: per-snapshot metrics.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: f64,
    },
    /// ε-sweep: CSV of records plus a JSON manifest.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        eps_list: Option<Vec<f64>>,
    },
    /// Sub/supersolution sandwich and residual report as JSON.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: f64,
    },
    /// The Volterra function k̄(t).
    Kbar {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        t: f64,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|&x| sharplim::harness::export::fmt_num(x)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Profile { out } => {
            let prof = default_profile(&make_cubic())?;
            eprintln!("c0 = {:.12}", prof.c0);
            let rows: Vec<Vec<f64>> = (0..prof.len()).map(|i| vec![prof.z_grid[i], prof.u0[i], prof.du0[i]]).collect();
            emit(&out, &table(&["z", "u0", "du0"], &rows))?;
        }
        Cmd::Corrector { g0, out } => {
            let prof = default_profile(&make_cubic())?;
            let c = corrector_u1(&PerturbationG::constant(g0), &prof, [0.0, 0.0], 0.0, None)?;
            eprintln!("gamma = {:.12}, sup|U1| = {:.6e}, solvability = {:.3e}", c.gamma_value, c.bound_m, c.solvability);
            let rows: Vec<Vec<f64>> = (0..c.z_grid.len()).map(|i| vec![c.z_grid[i], c.u1[i], c.du1[i]]).collect();
            emit(&out, &table(&["z", "u1", "du1"], &rows))?;
        }
        Cmd::Simulate { common, eps } => {
            let cfg = common.load()?;
            let run = run_scenario(&cfg, eps)?;
            let rows: Vec<Vec<f64>> = run.rows.iter().map(SnapshotRow::values).collect();
            match &common.out {
                Some(p) => write_table(p, &SnapshotRow::HEADER, &rows)?,
                None => print!("{}", table(&SnapshotRow::HEADER, &rows)),
            }
            eprintln!("{}", serde_json::to_string(&run.record)?);
        }
        Cmd::Sweep { common, eps_list } => {
            let mut cfg = common.load()?;
            if let Some(list) = eps_list {
                cfg.eps_list = list;
            }
            let records = sweep(&cfg)?;
            let Some(path) = &common.out else {
                print!("{}", sharplim::harness::export::records_to_csv(&records));
                return Ok(());
            };
            let manifest = export(&records, &cfg, path)?;
            eprintln!("wrote {} and {}", path.display(), manifest.display());
        }
        Cmd::Compare { common, eps } => {
            let cfg = common.load()?;
            let rep = run_compare(&cfg, eps)?;
            emit(&common.out, &(serde_json::to_string_pretty(&rep)? + "\n"))?;
        }
        Cmd::Kbar { c, t } => {
            if t < 0.0 {
                bail!("t must be nonnegative");
            }
            println!("{:.16e}", kbar(t, c));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["sharplim", "sweep", "--scenario", "1d-generation", "--eps-list", "0.04,0.02"]).unwrap();
        assert!(matches!(cli.cmd, Cmd::Sweep { eps_list: Some(ref v), .. } if v == &[0.04, 0.02]));
        assert!(Cli::try_parse_from(["sharplim", "simulate"]).is_err());
    }
}
