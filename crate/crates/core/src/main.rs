use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mtgd::experiment::{
    cmd_ablate, cmd_hv, cmd_mtl, cmd_synth, cmd_theory, format_significant, load_config,
    parse_list, parse_overrides, Command, ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "mtgd",
    version,
    about = "Pareto fronts by decomposition and multi-task gradient descent"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds as `a..b` or `1,2,3`; overrides the config.
    #[arg(long)]
    seed_list: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip SVG output.
    #[arg(long)]
    no_svg: bool,
    /// Any config key, e.g. `--set step_size=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Multi-seed run on a synthetic problem.
    Synth(Common),
    /// With- vs without-transfer comparison.
    Ablate(Common),
    /// Spectral and trajectory checks on random quadratic ensembles.
    Theory(Common),
    /// Trade-off training of a small two-task network.
    Mtl(Common),
    /// Hypervolume of a CSV point set.
    Hv {
        /// CSV with one point per row.
        points: PathBuf,
        /// Reference point, e.g. `1.1,1.1`.
        #[arg(long = "ref", default_value = "1.1,1.1")]
        ref_point: String,
    },
}

fn config(command: Command, c: &Common) -> mtgd::Result<ExperimentConfig> {
    let mut overrides = parse_overrides(&c.set)?;
    if let Some(s) = &c.seed_list {
        overrides.push(("seeds".into(), s.clone()));
    }
    if let Some(o) = &c.out {
        overrides.push(("out".into(), o.display().to_string()));
    }
    if c.no_svg {
        overrides.push(("svg".into(), "false".into()));
    }
    load_config(command, c.config.as_deref(), &overrides)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> mtgd::Result<()> {
    match cli.command {
        Cmd::Synth(c) => report(&cmd_synth(&config(Command::Synth, &c)?)?),
        Cmd::Ablate(c) => {
            let (paths, ab) = cmd_ablate(&config(Command::Ablate, &c)?)?;
            report(&paths);
            println!(
                "rank-sum on final HV: W = {}, z = {:.4}, p = {:.3e}, significant at 95%: {}",
                ab.test.w,
                ab.test.z,
                ab.test.p_value,
                ab.test.p_value < 0.05
            );
        }
        Cmd::Theory(c) => {
            let (paths, rows) = cmd_theory(&config(Command::Theory, &c)?)?;
            report(&paths);
            let faster = rows.iter().filter(|r| r.rho_am < r.rho_as).count();
            println!("rho(A_m) < rho(A_s) in {faster}/{} ensembles", rows.len());
        }
        Cmd::Mtl(c) => report(&cmd_mtl(&config(Command::Mtl, &c)?)?),
        Cmd::Hv { points, ref_point } => {
            let r = parse_list("ref", &ref_point)?;
            println!("{}", format_significant(cmd_hv(&points, &r)?, 12));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
