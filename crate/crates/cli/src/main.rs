use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vemopt::cli::{parse_config, run, Overrides, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "vemopt", version, about = "Evolve optimal control solutions in variation time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write CSV histories and snapshots
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tau_max: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
        #[arg(long, value_enum)]
        mesh_convection: Option<Switch>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let Command::Solve {
        config,
        tau_max,
        nodes,
        rtol,
        atol,
        mesh_convection,
        output_dir,
    } = Cli::parse().command;
    let overrides = Overrides {
        tau_max,
        nodes,
        rtol,
        atol,
        mesh_convection: mesh_convection.map(|s| matches!(s, Switch::On)),
        output_dir,
    };
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    let result = parse_config(&config)
        .and_then(|spec| spec.apply(&overrides, env_dir))
        .and_then(|spec| run(&spec).map(|report| (spec, report)));
    match result {
        Ok((spec, report)) => {
            if let Some(last) = report.output.history.last() {
                println!(
                    "{}: tau = {} J = {:.6} t_f = {:.6} pi_E = {:?} pi_I = {:?}",
                    spec.problem.name, last.tau, last.j, last.tf, last.pi_e, last.pi_i
                );
            }
            println!("wrote {} files to {}", report.files.len(), spec.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
