use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use breather_lab::commands::{self, CmdError};
use breather_lab::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "breather-lab",
    about = "Exactly solvable time-periodic potentials: build them, predict the \
             slow decay of their breather modes under detuning, and check the \
             prediction against a split-step simulation",
    version
)]
struct Cli {
    /// Scenario file (flat key = value format); defaults are used if omitted
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory override
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Perturbation size override; repeat for a sweep
    #[arg(long = "epsilon", global = true)]
    epsilon: Vec<f64>,
    /// Parity sector override: even | odd
    #[arg(long, global = true)]
    parity: Option<String>,
    /// Drop any zero resonance from Γ and Λ instead of erroring (even sector)
    #[arg(long, global = true)]
    drop_zero_resonance: bool,
    /// Disable the absorbing sponge layer
    #[arg(long, global = true)]
    no_sponge: bool,
    /// Number of potential periods to integrate
    #[arg(long, global = true)]
    periods: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate V0(x,t) over one period (CSV + SVG heatmap)
    Construct,
    /// Tabulate the bound/continuum eigenbasis and resonance ladder
    Spectrum,
    /// Compute M̄, Γ, Λ, and the resonance table per ε (JSON)
    Predict,
    /// Integrate the detuned equation per ε, recording B_b(t) (CSV)
    Simulate,
    /// Fit recorded decays against predictions (report + SVG overlays)
    Compare,
    /// Fit the dispersive local-decay exponents of both parities
    DecayProbe,
}

fn load_scenario(cli: &Cli) -> Result<Scenario, CmdError> {
    let mut sc = match &cli.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CmdError::Config(anyhow::anyhow!("reading {}: {e}", path.display()))
            })?;
            Scenario::parse(&text).map_err(CmdError::Config)?
        }
        None => Scenario::default(),
    };
    if let Some(out) = &cli.out {
        sc.out_dir = out.clone();
    }
    if !cli.epsilon.is_empty() {
        sc.epsilons = cli.epsilon.clone();
    }
    if let Some(p) = &cli.parity {
        sc.parity = p.parse().map_err(|e: String| CmdError::Config(anyhow::anyhow!(e)))?;
    }
    if cli.drop_zero_resonance {
        sc.drop_zero_resonance = true;
    }
    if cli.no_sponge {
        sc.no_sponge = true;
    }
    if let Some(n) = cli.periods {
        sc.n_periods = n;
    }
    Ok(sc)
}

fn dispatch(cli: &Cli, sc: &Scenario) -> Result<(), CmdError> {
    match cli.command {
        Cmd::Construct => {
            let out = commands::cmd_construct(sc)?;
            match out.period {
                Some(l) => println!(
                    "potential tabulated: period {l:.6}, min V0 {:.6}; wrote {}",
                    out.min_v0, out.csv
                ),
                None => println!("stationary potential tabulated; wrote {}", out.csv),
            }
        }
        Cmd::Spectrum => {
            let out = commands::cmd_spectrum(sc)?;
            println!(
                "period {:.6}, beta_b {:.6}, multiplier {:.6}{:+.6}i, n0 {}; wrote {}",
                out.period,
                out.beta_b,
                out.floquet_multiplier_re,
                out.floquet_multiplier_im,
                out.n0,
                out.csv
            );
        }
        Cmd::Predict => {
            let outs = commands::cmd_predict(sc)?;
            for p in &outs {
                println!(
                    "eps={:.4} {}: Mbar={:.6e} Gamma={:.6e} Lambda={:.6e} (convergence {})",
                    p.epsilon,
                    p.parity,
                    p.mbar,
                    p.gamma,
                    p.lambda_shift,
                    if p.convergence.passed { "ok" } else { "FAILED" }
                );
            }
        }
        Cmd::Simulate => {
            let series = commands::cmd_simulate(sc)?;
            for (eps, s) in sc.epsilons.iter().zip(&series) {
                let last = s.b_b.last().copied().unwrap_or_default();
                println!(
                    "eps={eps:.4}: {} samples, {} steps, |B_b(end)| = {:.9}",
                    s.times.len(),
                    s.dt_stats.steps,
                    last.norm()
                );
            }
        }
        Cmd::Compare => {
            let report = commands::cmd_compare(sc)?;
            for e in &report.entries {
                println!(
                    "eps={:.4}: slope {:.6e} vs -Γ {:.6e} (rel {:.3}, {})",
                    e.epsilon,
                    e.fitted_slope,
                    -e.predicted_gamma,
                    e.rel_slope_error,
                    if e.slope_within_tolerance { "ok" } else { "OUT OF TOLERANCE" }
                );
            }
            for s in &report.scaling {
                println!(
                    "slope({:.4})/slope({:.4}) = {:.4} vs {:.4} (rel {:.3})",
                    s.eps_hi, s.eps_lo, s.slope_ratio, s.expected_ratio, s.rel_error
                );
            }
        }
        Cmd::DecayProbe => {
            let outs = commands::cmd_decay_probe(sc)?;
            for o in &outs {
                println!(
                    "{}: exponent {:.3} ± {:.3} (expected {:.1})",
                    o.parity, o.exponent, o.exponent_stderr, o.expected_exponent
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("BREATHER_LAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = Cli::parse();
    let sc = match load_scenario(&cli) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(&cli, &sc) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
