//! Verb implementations. Each verb resolves its parameters (flag > config
//! file > default), runs, writes its outputs, and drops a resolved-config
//! snapshot next to them.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ksadapt_core::container::{
    read_cine, read_kspace, read_mask_json, read_sens, write_container, write_mask_json, Container,
    MaskDocument,
};
use ksadapt_core::dsuno::{build_dictionary, load_dictionary, save_dictionary, DictionarySlice};
use ksadapt_core::masks::{
    accel_preset, evaluate_mask, make_acs, make_equispaced, make_vdrs, rb_icd_optimize,
    write_trace_csv, Loss,
};
use ksadapt_core::metrics::{self, Roi, METRICS_CSV_HEADER};
use ksadapt_core::operators::apply_mask;
use ksadapt_core::phantom::{gen_cine_phantom, gen_sensitivities, simulate_kspace, PhantomSpec};
use ksadapt_core::recon::{unrolled_recon, Denoiser, Reconstructor, RECONSTRUCTOR_NAMES};
use ksadapt_core::{RbIcdParams, ReconParams};

use crate::config::*;

fn parse_json_flag(flag: &Option<String>, name: &str) -> CliResult<Option<Value>> {
    match flag {
        None => Ok(None),
        Some(text) => serde_json::from_str(text)
            .map(Some)
            .map_err(|e| CliErr::usage(format!("--{name} is not valid JSON: {e}"))),
    }
}

fn build_reconstructor(name: &str, params: &Value) -> CliResult<Reconstructor> {
    Reconstructor::from_config(name, params).map_err(|e| match e {
        ksadapt_core::Error::UnknownReconstructor(_) | ksadapt_core::Error::UnknownDenoiser(_) => {
            CliErr::usage(format!(
                "{e}; valid reconstructors: {}",
                RECONSTRUCTOR_NAMES.join(", ")
            ))
        }
        other => other.into(),
    })
}

fn parse_loss(name: &str) -> CliResult<Loss> {
    name.parse().map_err(|e| CliErr::usage(format!("{e}")))
}

// ---------------------------------------------------------------------------
// gen-phantom

#[derive(Args, Debug)]
pub struct GenPhantomArgs {
    /// JSON phantom spec file (defaults to the built-in dynamic phantom).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory for cine.ksd, sens.ksd, kspace.ksd.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct GenPhantomConfig {
    spec: PhantomSpec,
    out: PathBuf,
}

pub fn gen_phantom(args: GenPhantomArgs) -> CliResult<()> {
    let file = load_config_file(&args.config)?;
    let spec_path = args.spec.or_else(|| file_path(&file, "spec"));
    let spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(&p)?;
            serde_json::from_str::<PhantomSpec>(&text)
                .map_err(|e| CliErr::usage(format!("bad phantom spec {}: {e}", p.display())))?
        }
        None => match file_value(&file, "spec_inline") {
            Some(v) => serde_json::from_value(v)
                .map_err(|e| CliErr::usage(format!("bad inline phantom spec: {e}")))?,
            None => PhantomSpec::standard(64, 64, 8, 4, 0),
        },
    };
    let out = required(args.out.or_else(|| file_path(&file, "out")), "out")?;
    let resolved = GenPhantomConfig { spec, out };

    fs::create_dir_all(&resolved.out)?;
    let x = gen_cine_phantom(&resolved.spec)?;
    let s = gen_sensitivities(
        resolved.spec.nx,
        resolved.spec.ny,
        resolved.spec.nc,
        resolved.spec.seed,
        true,
    );
    let y = simulate_kspace(&x, &s, resolved.spec.noise_sigma, resolved.spec.seed)?;

    write_container(&Container::Cine(x), resolved.out.join("cine.ksd"))?;
    write_container(&Container::Sens(s), resolved.out.join("sens.ksd"))?;
    write_container(&Container::KSpace(y), resolved.out.join("kspace.ksd"))?;
    write_snapshot(
        "gen-phantom",
        &resolved,
        &snapshot_path(&resolved.out, true),
    )?;
    println!("wrote {}", resolved.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// baseline-mask

#[derive(Args, Debug)]
pub struct BaselineMaskArgs {
    /// Mask family: equispaced | vdrs | acs.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub acs_fraction: Option<f64>,
    #[arg(long)]
    pub decay_p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct BaselineMaskConfig {
    kind: String,
    ny: usize,
    budget: usize,
    acs_fraction: f64,
    decay_p: f64,
    seed: u64,
    out: PathBuf,
}

pub fn baseline_mask(args: BaselineMaskArgs) -> CliResult<()> {
    let file = load_config_file(&args.config)?;
    let resolved = BaselineMaskConfig {
        kind: required(args.kind.or_else(|| file_str(&file, "kind")), "kind")?,
        ny: required(args.ny.or_else(|| file_usize(&file, "ny")), "ny")?,
        budget: required(
            args.budget.or_else(|| file_usize(&file, "budget")),
            "budget",
        )?,
        acs_fraction: args
            .acs_fraction
            .or_else(|| file_f64(&file, "acs_fraction"))
            .unwrap_or(1.0 / 3.0),
        decay_p: args
            .decay_p
            .or_else(|| file_f64(&file, "decay_p"))
            .unwrap_or(3.0),
        seed: args.seed.or_else(|| file_u64(&file, "seed")).unwrap_or(0),
        out: required(args.out.or_else(|| file_path(&file, "out")), "out")?,
    };

    let (mask, provenance) = match resolved.kind.as_str() {
        "acs" => (
            make_acs(resolved.ny, resolved.budget)?,
            format!("acs(ny={},f={})", resolved.ny, resolved.budget),
        ),
        "equispaced" => (
            make_equispaced(resolved.ny, resolved.budget, resolved.acs_fraction)?,
            format!(
                "equispaced(ny={},budget={},acs_fraction={})",
                resolved.ny, resolved.budget, resolved.acs_fraction
            ),
        ),
        "vdrs" => (
            make_vdrs(
                resolved.ny,
                resolved.budget,
                resolved.acs_fraction,
                resolved.decay_p,
                resolved.seed,
            )?,
            format!(
                "vdrs(ny={},budget={},acs_fraction={},decay_p={},seed={})",
                resolved.ny,
                resolved.budget,
                resolved.acs_fraction,
                resolved.decay_p,
                resolved.seed
            ),
        ),
        other => {
            return Err(CliErr::usage(format!(
                "unknown mask kind `{other}` (valid: equispaced, vdrs, acs)"
            )))
        }
    };

    write_mask_json(&mask, &provenance, &resolved.out)?;
    write_snapshot(
        "baseline-mask",
        &resolved,
        &snapshot_path(&resolved.out, false),
    )?;
    println!("wrote {}", resolved.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// optimize-mask

#[derive(Args, Debug)]
pub struct OptimizeMaskArgs {
    /// Fully sampled k-space (KSD1).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Ground-truth cine series (KSD1).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Coil sensitivities (KSD1); required by sense_cg/cs_xf/unrolled.
    #[arg(long)]
    pub sens: Option<PathBuf>,
    /// Initial mask JSON.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Reconstruction model scoring the candidates.
    #[arg(long)]
    pub recon: Option<String>,
    /// JSON parameter map for the reconstruction model.
    #[arg(long)]
    pub recon_params: Option<String>,
    /// Optimization preset: 4x | 8x | 12x.
    #[arg(long, conflicts_with_all = ["budget", "acs_count", "subset_size", "n_iter"])]
    pub preset: Option<String>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub acs_count: Option<usize>,
    #[arg(long)]
    pub subset_size: Option<usize>,
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub n_cand: Option<usize>,
    /// Enumerate all candidate relocations instead of sampling n-cand.
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional audit-trail CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct OptimizeMaskConfig {
    data: PathBuf,
    gt: PathBuf,
    sens: Option<PathBuf>,
    init: PathBuf,
    recon: String,
    recon_params: Value,
    preset: Option<String>,
    params: RbIcdParams,
    loss: String,
    out: PathBuf,
    trace: Option<PathBuf>,
}

fn parse_preset(text: &str) -> CliResult<RbIcdParams> {
    let accel: u32 = text
        .trim_end_matches('x')
        .parse()
        .map_err(|_| CliErr::usage(format!("bad preset `{text}` (use 4x, 8x, or 12x)")))?;
    accel_preset(accel).map_err(|e| CliErr::usage(format!("{e}")))
}

pub fn optimize_mask(args: OptimizeMaskArgs) -> CliResult<()> {
    let file = load_config_file(&args.config)?;
    let preset = args.preset.clone().or_else(|| file_str(&file, "preset"));
    let explicit_budget = args.budget.or_else(|| file_usize(&file, "budget"));
    if preset.is_some() && explicit_budget.is_some() {
        return Err(CliErr::usage(
            "--preset and explicit --budget are mutually exclusive",
        ));
    }

    let mut params = match &preset {
        Some(p) => parse_preset(p)?,
        None => RbIcdParams {
            budget: required(explicit_budget, "budget (or --preset)")?,
            acs_count: required(
                args.acs_count.or_else(|| file_usize(&file, "acs_count")),
                "acs-count",
            )?,
            subset_size: required(
                args.subset_size
                    .or_else(|| file_usize(&file, "subset_size")),
                "subset-size",
            )?,
            n_iter: required(
                args.n_iter.or_else(|| file_usize(&file, "n_iter")),
                "n-iter",
            )?,
            n_cand: 20,
            seed: 0,
            exhaustive: false,
        },
    };
    if let Some(nc) = args.n_cand.or_else(|| file_usize(&file, "n_cand")) {
        params.n_cand = nc;
    }
    params.seed = args.seed.or_else(|| file_u64(&file, "seed")).unwrap_or(0);
    params.exhaustive = args.exhaustive || file_bool(&file, "exhaustive").unwrap_or(false);

    let recon_params = parse_json_flag(&args.recon_params, "recon-params")?
        .or_else(|| file_value(&file, "recon_params"))
        .unwrap_or_else(|| serde_json::json!({}));
    let resolved = OptimizeMaskConfig {
        data: required(args.data.or_else(|| file_path(&file, "data")), "data")?,
        gt: required(args.gt.or_else(|| file_path(&file, "gt")), "gt")?,
        sens: args.sens.or_else(|| file_path(&file, "sens")),
        init: required(args.init.or_else(|| file_path(&file, "init")), "init")?,
        recon: args
            .recon
            .or_else(|| file_str(&file, "recon"))
            .unwrap_or_else(|| "zero_filled".into()),
        recon_params,
        preset,
        params,
        loss: args
            .loss
            .or_else(|| file_str(&file, "loss"))
            .unwrap_or_else(|| "nmse".into()),
        out: required(args.out.or_else(|| file_path(&file, "out")), "out")?,
        trace: args.trace.or_else(|| file_path(&file, "trace")),
    };

    let recon = build_reconstructor(&resolved.recon, &resolved.recon_params)?;
    let loss = parse_loss(&resolved.loss)?;
    let y_full = read_kspace(&resolved.data)?;
    let x_gt = read_cine(&resolved.gt)?;
    let sens = resolved.sens.as_ref().map(read_sens).transpose()?;
    let (m_init, _) = read_mask_json(&resolved.init)?;

    let result = rb_icd_optimize(
        &y_full,
        &x_gt,
        sens.as_ref(),
        &m_init,
        &recon,
        loss,
        &resolved.params,
    )?;

    let provenance = format!(
        "rb_icd(budget={},acs={},s={},n_iter={},n_cand={},seed={},recon={},loss={})",
        resolved.params.budget,
        resolved.params.acs_count,
        resolved.params.subset_size,
        resolved.params.n_iter,
        resolved.params.n_cand,
        resolved.params.seed,
        resolved.recon,
        resolved.loss,
    );
    write_mask_json(&result.mask, &provenance, &resolved.out)?;
    if let Some(trace_path) = &resolved.trace {
        write_trace_csv(&result.trace, trace_path)?;
    }
    write_snapshot(
        "optimize-mask",
        &resolved,
        &snapshot_path(&resolved.out, false),
    )?;
    println!(
        "wrote {} (loss {} -> {})",
        resolved.out.display(),
        result.initial_loss,
        result.final_loss
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// build-dict

#[derive(Args, Debug)]
pub struct BuildDictArgs {
    /// JSON manifest: [{"slice_id", "kspace", "mask"}] with paths relative
    /// to the manifest file.
    #[arg(long)]
    pub slices: Option<PathBuf>,
    /// Number of central low-frequency lines for the reference frames.
    #[arg(long)]
    pub acs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Deserialize)]
struct ManifestEntry {
    slice_id: String,
    kspace: PathBuf,
    mask: PathBuf,
}

#[derive(Serialize)]
struct BuildDictConfig {
    slices: PathBuf,
    acs: usize,
    out: PathBuf,
}

pub fn build_dict(args: BuildDictArgs) -> CliResult<()> {
    let file = load_config_file(&args.config)?;
    let resolved = BuildDictConfig {
        slices: required(args.slices.or_else(|| file_path(&file, "slices")), "slices")?,
        acs: required(args.acs.or_else(|| file_usize(&file, "acs")), "acs")?,
        out: required(args.out.or_else(|| file_path(&file, "out")), "out")?,
    };

    let text = fs::read_to_string(&resolved.slices)?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text)
        .map_err(|e| CliErr::usage(format!("bad manifest {}: {e}", resolved.slices.display())))?;
    if entries.is_empty() {
        return Err(CliErr::Runtime(anyhow::anyhow!(
            "manifest {} lists no slices",
            resolved.slices.display()
        )));
    }
    let base = resolved
        .slices
        .parent()
        .unwrap_or_else(|| std::path::Path::new("."));
    let mut slices = Vec::with_capacity(entries.len());
    for e in entries {
        let y_full = read_kspace(base.join(&e.kspace))?;
        let (mask, _) = read_mask_json(base.join(&e.mask))?;
        slices.push(DictionarySlice {
            slice_id: e.slice_id,
            y_full,
            mask,
        });
    }
    let dict = build_dictionary(&slices, resolved.acs)?;
    save_dictionary(&dict, &resolved.out)?;
    write_snapshot("build-dict", &resolved, &snapshot_path(&resolved.out, true))?;
    println!(
        "wrote {} ({} entries)",
        resolved.out.display(),
        dict.entries.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// infer-mask

#[derive(Args, Debug)]
pub struct InferMaskArgs {
    /// Test k-space (KSD1); only the first frame's low frequencies are used.
    #[arg(long)]
    pub test_frame: Option<PathBuf>,
    /// Dictionary directory produced by build-dict.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct InferMaskConfig {
    test_frame: PathBuf,
    dict: PathBuf,
    out: PathBuf,
}

/// Selection output: a valid mask document plus the retrieval fields, so
/// downstream `recon --mask` reads it directly.
#[derive(Serialize)]
struct SelectionDocument {
    #[serde(flatten)]
    mask: MaskDocument,
    neighbor_slice_id: String,
    best_d: f64,
}

pub fn infer_mask(args: InferMaskArgs) -> CliResult<()> {
    let file = load_config_file(&args.config)?;
    let resolved = InferMaskConfig {
        test_frame: required(
            args.test_frame.or_else(|| file_path(&file, "test_frame")),
            "test-frame",
        )?,
        dict: required(args.dict.or_else(|| file_path(&file, "dict")), "dict")?,
        out: required(args.out.or_else(|| file_path(&file, "out")), "out")?,
    };

    let y_test = read_kspace(&resolved.test_frame)?;
    let dict = load_dictionary(&resolved.dict)?;
    let sel = ksadapt_core::dsuno::select_mask(&y_test, &dict, dict.f_acs)?;

    let doc = SelectionDocument {
        mask: MaskDocument::from_mask(
            &sel.mask,
            format!(
                "dsuno(neighbor={},best_d={})",
                sel.neighbor_slice_id, sel.best_d
            ),
        ),
        neighbor_slice_id: sel.neighbor_slice_id.clone(),
        best_d: sel.best_d,
    };
    let mut f = fs::File::create(&resolved.out)?;
    serde_json::to_writer_pretty(&mut f, &doc)?;
    f.write_all(b"\n")?;
    write_snapshot(
        "infer-mask",
        &resolved,
        &snapshot_path(&resolved.out, false),
    )?;
    println!(
        "wrote {} (neighbor {}, d {})",
        resolved.out.display(),
        sel.neighbor_slice_id,
        sel.best_d
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// recon

#[derive(Args, Debug)]
pub struct ReconArgs {
    /// Measured k-space (KSD1); lines outside the mask are zeroed.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub sens: Option<PathBuf>,
    /// zero_filled | sense_cg | cs_xf | unrolled.
    #[arg(long)]
    pub method: Option<String>,
    /// JSON parameter map for the method.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReconConfig {
    data: PathBuf,
    mask: PathBuf,
    sens: Option<PathBuf>,
    method: String,
    params: Value,
    out: PathBuf,
}

pub fn recon(args: ReconArgs) -> CliResult<()> {
    let file = load_config_file(&args.config)?;
    let resolved = ReconConfig {
        data: required(args.data.or_else(|| file_path(&file, "data")), "data")?,
        mask: required(args.mask.or_else(|| file_path(&file, "mask")), "mask")?,
        sens: args.sens.or_else(|| file_path(&file, "sens")),
        method: required(args.method.or_else(|| file_str(&file, "method")), "method")?,
        params: parse_json_flag(&args.params, "params")?
            .or_else(|| file_value(&file, "params"))
            .unwrap_or_else(|| serde_json::json!({})),
        out: required(args.out.or_else(|| file_path(&file, "out")), "out")?,
    };

    let reconstructor = build_reconstructor(&resolved.method, &resolved.params)?;
    let y = read_kspace(&resolved.data)?;
    let (mask, _) = read_mask_json(&resolved.mask)?;
    let sens = resolved.sens.as_ref().map(read_sens).transpose()?;
    let y = apply_mask(&y, &mask)?;
    let x_hat = reconstructor.reconstruct(&y, sens.as_ref(), &mask)?;

    write_container(&Container::Cine(x_hat), &resolved.out)?;
    write_snapshot("recon", &resolved, &snapshot_path(&resolved.out, false))?;
    println!("wrote {}", resolved.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Reconstructed series (KSD1).
    #[arg(long)]
    pub recon: Option<PathBuf>,
    /// Ground-truth series (KSD1).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Optional spatial ROI "x0,y0,width,height".
    #[arg(long)]
    pub roi: Option<String>,
    /// Output CSV (one row per invocation).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub slice_id: Option<String>,
    #[arg(long)]
    pub mask_name: Option<String>,
    #[arg(long)]
    pub recon_name: Option<String>,
    #[arg(long)]
    pub accel: Option<f64>,
    /// Use the 7x7 windowed-mean SSIM variant instead of global statistics.
    #[arg(long)]
    pub ssim_windowed: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalConfig {
    recon: PathBuf,
    gt: PathBuf,
    roi: Option<String>,
    csv: PathBuf,
    slice_id: String,
    mask_name: String,
    recon_name: String,
    accel: f64,
    ssim_windowed: bool,
}

fn parse_roi(text: &str) -> CliResult<Roi> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(CliErr::usage("--roi must be x0,y0,width,height"));
    }
    let vals: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| CliErr::usage(format!("bad --roi: {e}")))?;
    Ok(Roi {
        x0: vals[0],
        y0: vals[1],
        width: vals[2],
        height: vals[3],
    })
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let file = load_config_file(&args.config)?;
    let resolved = EvalConfig {
        recon: required(args.recon.or_else(|| file_path(&file, "recon")), "recon")?,
        gt: required(args.gt.or_else(|| file_path(&file, "gt")), "gt")?,
        roi: args.roi.or_else(|| file_str(&file, "roi")),
        csv: required(args.csv.or_else(|| file_path(&file, "csv")), "csv")?,
        slice_id: args
            .slice_id
            .or_else(|| file_str(&file, "slice_id"))
            .unwrap_or_default(),
        mask_name: args
            .mask_name
            .or_else(|| file_str(&file, "mask_name"))
            .unwrap_or_default(),
        recon_name: args
            .recon_name
            .or_else(|| file_str(&file, "recon_name"))
            .unwrap_or_default(),
        accel: args
            .accel
            .or_else(|| file_f64(&file, "accel"))
            .unwrap_or(0.0),
        ssim_windowed: args.ssim_windowed || file_bool(&file, "ssim_windowed").unwrap_or(false),
    };

    let x_hat = read_cine(&resolved.recon)?;
    let x_gt = read_cine(&resolved.gt)?;
    let roi = resolved.roi.as_deref().map(parse_roi).transpose()?;
    let mut report = metrics::report(&x_gt, &x_hat, roi)?;
    if resolved.ssim_windowed {
        report.ssim = metrics::ssim_windowed(&x_gt, &x_hat, 7, None, None)?;
    }

    let mut f = fs::File::create(&resolved.csv)?;
    writeln!(f, "{METRICS_CSV_HEADER}")?;
    writeln!(
        f,
        "{},{},{},{},{},{},{}",
        resolved.slice_id,
        resolved.mask_name,
        resolved.recon_name,
        resolved.accel,
        report.nmse,
        report.psnr_db,
        report.ssim
    )?;
    f.flush()?;
    write_snapshot("eval", &resolved, &snapshot_path(&resolved.csv, false))?;
    println!(
        "nmse {} psnr_db {} ssim {}",
        report.nmse, report.psnr_db, report.ssim
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ablate

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Swept parameter: s | n_iter | lambda | K.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Comma-separated values for the sweep.
    #[arg(long)]
    pub values: Option<String>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub sens: Option<PathBuf>,
    /// Initial mask for optimizer sweeps (s, n_iter).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Fixed mask for reconstruction sweeps (lambda, K).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub recon: Option<String>,
    #[arg(long)]
    pub recon_params: Option<String>,
    #[arg(long, conflicts_with_all = ["budget", "acs_count", "subset_size", "n_iter"])]
    pub preset: Option<String>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub acs_count: Option<usize>,
    #[arg(long)]
    pub subset_size: Option<usize>,
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub n_cand: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct AblateConfig {
    sweep: String,
    values: Vec<f64>,
    data: PathBuf,
    gt: PathBuf,
    sens: Option<PathBuf>,
    init: Option<PathBuf>,
    mask: Option<PathBuf>,
    recon: String,
    recon_params: Value,
    params: Option<RbIcdParams>,
    seed: u64,
    csv: PathBuf,
}

pub fn ablate(args: AblateArgs) -> CliResult<()> {
    let file = load_config_file(&args.config)?;
    let sweep = required(args.sweep.or_else(|| file_str(&file, "sweep")), "sweep")?;
    if !matches!(sweep.as_str(), "s" | "n_iter" | "lambda" | "K") {
        return Err(CliErr::usage(format!(
            "unknown sweep `{sweep}` (valid: s, n_iter, lambda, K)"
        )));
    }
    let values_text = required(args.values.or_else(|| file_str(&file, "values")), "values")?;
    let values: Vec<f64> = values_text
        .split(',')
        .map(|v| v.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| CliErr::usage(format!("bad --values: {e}")))?;
    if values.is_empty() {
        return Err(CliErr::usage("--values must be non-empty"));
    }
    let seed = args.seed.or_else(|| file_u64(&file, "seed")).unwrap_or(0);

    let optimizer_sweep = matches!(sweep.as_str(), "s" | "n_iter");
    let params = if optimizer_sweep {
        let preset = args.preset.clone().or_else(|| file_str(&file, "preset"));
        let mut p = match &preset {
            Some(t) => parse_preset(t)?,
            None => RbIcdParams {
                budget: required(
                    args.budget.or_else(|| file_usize(&file, "budget")),
                    "budget (or --preset)",
                )?,
                acs_count: required(
                    args.acs_count.or_else(|| file_usize(&file, "acs_count")),
                    "acs-count",
                )?,
                subset_size: required(
                    args.subset_size
                        .or_else(|| file_usize(&file, "subset_size")),
                    "subset-size",
                )?,
                n_iter: required(
                    args.n_iter.or_else(|| file_usize(&file, "n_iter")),
                    "n-iter",
                )?,
                n_cand: 20,
                seed: 0,
                exhaustive: false,
            },
        };
        if let Some(nc) = args.n_cand.or_else(|| file_usize(&file, "n_cand")) {
            p.n_cand = nc;
        }
        p.seed = seed;
        Some(p)
    } else {
        None
    };

    let resolved = AblateConfig {
        sweep: sweep.clone(),
        values: values.clone(),
        data: required(args.data.or_else(|| file_path(&file, "data")), "data")?,
        gt: required(args.gt.or_else(|| file_path(&file, "gt")), "gt")?,
        sens: args.sens.or_else(|| file_path(&file, "sens")),
        init: args.init.or_else(|| file_path(&file, "init")),
        mask: args.mask.or_else(|| file_path(&file, "mask")),
        recon: args
            .recon
            .or_else(|| file_str(&file, "recon"))
            .unwrap_or_else(|| "zero_filled".into()),
        recon_params: parse_json_flag(&args.recon_params, "recon-params")?
            .or_else(|| file_value(&file, "recon_params"))
            .unwrap_or_else(|| serde_json::json!({})),
        params,
        seed,
        csv: required(args.csv.or_else(|| file_path(&file, "csv")), "csv")?,
    };

    let y_full = read_kspace(&resolved.data)?;
    let x_gt = read_cine(&resolved.gt)?;
    let sens = resolved.sens.as_ref().map(read_sens).transpose()?;

    let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(values.len());
    match sweep.as_str() {
        "s" | "n_iter" => {
            let init_path = resolved
                .init
                .as_ref()
                .ok_or_else(|| CliErr::usage("--init is required for optimizer sweeps"))?;
            let (m_init, _) = read_mask_json(init_path)?;
            let recon = build_reconstructor(&resolved.recon, &resolved.recon_params)?;
            let base = resolved.params.unwrap();
            for &v in &values {
                if v <= 0.0 || v.fract() != 0.0 {
                    return Err(CliErr::usage(format!(
                        "sweep value {v} must be a positive integer"
                    )));
                }
                let mut p = base;
                match sweep.as_str() {
                    "s" => p.subset_size = v as usize,
                    _ => p.n_iter = v as usize,
                }
                let started = Instant::now();
                let result = rb_icd_optimize(
                    &y_full,
                    &x_gt,
                    sens.as_ref(),
                    &m_init,
                    &recon,
                    Loss::Nmse,
                    &p,
                )?;
                let runtime = started.elapsed().as_secs_f64();
                let nmse = evaluate_mask(
                    &result.mask,
                    &y_full,
                    &x_gt,
                    sens.as_ref(),
                    &recon,
                    Loss::Nmse,
                )?;
                rows.push((v, nmse, runtime));
            }
        }
        "lambda" | "K" => {
            let mask_path = resolved
                .mask
                .as_ref()
                .ok_or_else(|| CliErr::usage("--mask is required for reconstruction sweeps"))?;
            let (mask, _) = read_mask_json(mask_path)?;
            let sens_ref = sens
                .as_ref()
                .ok_or_else(|| CliErr::usage("--sens is required for reconstruction sweeps"))?;
            let y = apply_mask(&y_full, &mask)?;
            for &v in &values {
                let defaults = ReconParams::default();
                let rp = match sweep.as_str() {
                    "lambda" => ReconParams {
                        lambda: v,
                        ..defaults
                    },
                    _ => {
                        if v <= 0.0 || v.fract() != 0.0 {
                            return Err(CliErr::usage(format!(
                                "sweep value {v} must be a positive integer"
                            )));
                        }
                        ReconParams {
                            k_stages: v as usize,
                            ..defaults
                        }
                    }
                };
                let d_xt = Denoiser::Gaussian { sigma: 1.0 };
                let d_xf = Denoiser::SoftThreshold { threshold: 1e-3 };
                let started = Instant::now();
                let x_hat = unrolled_recon(&y, sens_ref, &mask, &rp, &d_xt, &d_xf)?;
                let runtime = started.elapsed().as_secs_f64();
                rows.push((v, metrics::nmse(&x_gt, &x_hat)?, runtime));
            }
        }
        _ => unreachable!("sweep validated above"),
    }

    let mut f = fs::File::create(&resolved.csv)?;
    writeln!(f, "value,nmse,runtime_s")?;
    for (v, nmse, rt) in &rows {
        writeln!(f, "{v},{nmse},{rt}")?;
    }
    f.flush()?;
    write_snapshot("ablate", &resolved, &snapshot_path(&resolved.csv, false))?;
    println!("wrote {}", resolved.csv.display());
    Ok(())
}
