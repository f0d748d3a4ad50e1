use clap::{Parser, Subcommand};
use fishnet::cli::{
    cmd_campaign, cmd_fit_nc, cmd_order_stats, cmd_p1_table, cmd_pipeline, cmd_predict,
    cmd_simulate, CampaignArgs, FitNcArgs, OrderStatsArgs, P1TableArgs, PipelineArgs, PredictArgs,
    SimulateArgs,
};

/// Monte Carlo simulator and analytic tail-probability model for fishnet
/// lattices of softening links.
#[derive(Parser)]
#[command(name = "fishnet", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the parent strength CDF as CSV.
    P1Table(P1TableArgs),
    /// Tabulate order-statistic CDFs of the k-th smallest strength.
    OrderStats(OrderStatsArgs),
    /// Run one replica and export its event log and damage snapshots.
    Simulate(SimulateArgs),
    /// Run a reproducible Monte Carlo campaign.
    Campaign(CampaignArgs),
    /// Fit the damage-count distribution to a sample by moments.
    FitNc(FitNcArgs),
    /// Evaluate the analytic failure-probability model on a stress grid.
    Predict(PredictArgs),
    /// Campaign, fits, and analytic-vs-empirical comparison in one run.
    Pipeline(PipelineArgs),
}

fn apply_thread_env(threads: &mut Option<usize>) {
    if threads.is_none() {
        if let Ok(value) = std::env::var("FISHNET_THREADS") {
            if let Ok(parsed) = value.parse::<usize>() {
                *threads = Some(parsed);
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::P1Table(args) => cmd_p1_table(&args),
        Command::OrderStats(args) => cmd_order_stats(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Campaign(mut args) => {
            apply_thread_env(&mut args.threads);
            cmd_campaign(&args)
        }
        Command::FitNc(args) => cmd_fit_nc(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Pipeline(mut args) => {
            apply_thread_env(&mut args.campaign.threads);
            cmd_pipeline(&args)
        }
    };
    if let Err(error) = result {
        eprintln!("fishnet: {error}");
        std::process::exit(error.exit_code());
    }
}
