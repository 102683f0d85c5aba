//! `ksadapt`: phantom generation, sampling-mask design and optimization,
//! dictionary-based mask selection, reconstruction, evaluation, and ablation
//! sweeps over a shared set of file formats.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CliErr;

#[derive(Parser, Debug)]
#[command(
    name = "ksadapt",
    version,
    about = "Scan-adaptive Cartesian sampling design for dynamic MRI"
)]
struct Cli {
    /// Worker threads (default: all cores; env KSADAPT_THREADS as fallback).
    /// Results are identical at any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Generate a dynamic phantom: cine, sensitivities, and k-space files.
    GenPhantom(commands::GenPhantomArgs),
    /// Generate an equispaced, variable-density random, or ACS-only mask.
    BaselineMask(commands::BaselineMaskArgs),
    /// Optimize a mask by randomized batched coordinate descent.
    OptimizeMask(commands::OptimizeMaskArgs),
    /// Build a mask dictionary from optimized training slices.
    BuildDict(commands::BuildDictArgs),
    /// Select a mask for a test scan by nearest-neighbor search.
    InferMask(commands::InferMaskArgs),
    /// Reconstruct undersampled k-space with a named method.
    Recon(commands::ReconArgs),
    /// Compute NMSE/PSNR/SSIM of a reconstruction against ground truth.
    Eval(commands::EvalArgs),
    /// Sweep an optimizer or reconstruction parameter, logging NMSE and runtime.
    Ablate(commands::AblateArgs),
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("KSADAPT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);

    let outcome = match cli.verb {
        Verb::GenPhantom(a) => commands::gen_phantom(a),
        Verb::BaselineMask(a) => commands::baseline_mask(a),
        Verb::OptimizeMask(a) => commands::optimize_mask(a),
        Verb::BuildDict(a) => commands::build_dict(a),
        Verb::InferMask(a) => commands::infer_mask(a),
        Verb::Recon(a) => commands::recon(a),
        Verb::Eval(a) => commands::eval(a),
        Verb::Ablate(a) => commands::ablate(a),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliErr::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliErr::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
