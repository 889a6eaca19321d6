use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use tfac::cli::{
    cmd_bubbles, cmd_convergence, cmd_kernel_check, cmd_singularity, cmd_soe_table,
    resolve_config,
};
use tfac::Error;

/// Nonuniform fast-L1 solver for the time-fractional Allen-Cahn equation.
#[derive(Parser)]
#[command(name = "tfac", version, about)]
struct Cli {
    /// Run-config file (line-based `key = value`)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's out_dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for independent table cells
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed of the random-tail mesh generator
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution convergence tables (presets table1..table4)
    Convergence,
    /// Two-bubble coarsening run with monitors and snapshots
    Bubbles,
    /// Kernel verification suite (SOE scan, fast-vs-direct, Gronwall, PSD probe)
    KernelCheck,
    /// Emit the sum-of-exponentials nodes and weights as CSV
    SoeTable,
    /// Difference-quotient slope probe of the initial singularity
    Singularity,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) | Error::Config(_) | Error::Io(_) => 1,
        Error::AssumptionViolated(_) | Error::DegenerateOrder(_) => 2,
        Error::PicardDiverged { .. }
        | Error::ToleranceUnachievable { .. }
        | Error::Overflow(_)
        | Error::NonPositiveShift(_) => 3,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let default_preset = match cli.command {
        Command::Convergence => "table1",
        Command::Bubbles => "bubbles",
        Command::KernelCheck => "table1",
        Command::SoeTable => "table1",
        Command::Singularity => "fig1",
    };
    let cfg = resolve_config(
        cli.config.as_deref(),
        default_preset,
        cli.out.as_deref(),
        cli.seed,
        cli.threads,
    )?;
    match cli.command {
        Command::Convergence => {
            let columns = cmd_convergence(&cfg)?;
            for col in &columns {
                println!("gamma = {}", col.gamma);
                println!("  N     tau         error       order");
                for row in &col.rows {
                    println!(
                        "  {:<5} {:.4e}  {:.4e}  {}",
                        row.n,
                        row.tau,
                        row.error,
                        row.order.map_or(String::from("-"), |o| format!("{o:.2}"))
                    );
                }
            }
        }
        Command::Bubbles => {
            let report = cmd_bubbles(&cfg)?;
            println!(
                "levels = {}, final max norm = {:.6}, energy increases = {}",
                report.output.records.len(),
                report.max_norm,
                report.energy_increases
            );
            for w in &report.output.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::KernelCheck => {
            cmd_kernel_check(&cfg)?;
            println!("kernel checks passed; report in {}", cfg.out_dir.display());
        }
        Command::SoeTable => {
            let soe = cmd_soe_table(&cfg)?;
            println!(
                "Nq = {}, certified deviation = {:.3e}",
                soe.n_modes(),
                soe.max_deviation
            );
        }
        Command::Singularity => {
            let report = cmd_singularity(&cfg)?;
            println!(
                "fitted slope = {:.4} over log10 t in [{:.3}, {:.3}] ({} levels)",
                report.slope, report.window.0, report.window.1, report.points_in_window
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
