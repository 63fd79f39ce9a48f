//! Batch command-line front end: scene synthesis, detection, delineation,
//! evaluation, the full pipeline, and the comparative detector benchmark.
//!
//! Exit codes: 0 on success, 1 for input/configuration problems, 2 for
//! internal errors.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crownseg_core::crowns::{delineate, postprocess, scene_norms};
use crownseg_core::error::{Error, Result};
use crownseg_core::eval::evaluate;
use crownseg_core::io::{
    read_band_manifest, read_crown_document, read_grid, read_treetops_csv, write_band_manifest,
    write_crown_document, write_grid, write_metrics_csv, write_treetops_csv, MetricsRow,
};
use crownseg_core::pipeline::{
    crown_document, run_ablation_2d, run_benchmark, run_scene_pipeline, write_artifacts,
};
use crownseg_core::raster::{ndvi, vegetation_mask, BandRole, Grid, MultibandRaster};
use crownseg_core::synth::generate;

use config::Config;

#[derive(Parser)]
#[command(
    name = "crownseg",
    about = "Individual tree detection and crown delineation"
)]
struct Cli {
    /// Key-value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct InputOpts {
    /// DSM as an ASCII grid.
    #[arg(long)]
    dsm: Option<PathBuf>,
    /// Band manifest listing the multispectral rasters.
    #[arg(long)]
    bands: Option<PathBuf>,
    /// Reference crown polygons for evaluation.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Treetop detector: thr, f3, f7, f11, f15, f19, or sb.
    #[arg(long)]
    detector: Option<String>,
    /// Height mode: dtm, constant:<m>, or lowest:<m>.
    #[arg(long)]
    height_mode: Option<String>,
    /// NDVI vegetation threshold.
    #[arg(long)]
    mu: Option<f64>,
    /// Minimum above-ground treetop height in meters.
    #[arg(long)]
    min_height: Option<f64>,
    /// Superpixel cutoff.
    #[arg(long)]
    theta: Option<f64>,
    /// Matching overlap threshold.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Default)]
struct SceneOpts {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    /// sparse, dense, or urban.
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    cell_size: Option<f64>,
    #[arg(long)]
    terrain_amplitude: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene with ground truth.
    Synth {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        scene: SceneOpts,
    },
    /// Detect treetops and write the treetop table.
    Detect {
        #[command(flatten)]
        input: InputOpts,
    },
    /// Delineate crowns around an existing treetop table.
    Delineate {
        #[command(flatten)]
        input: InputOpts,
        /// Treetop CSV produced by `detect` or `pipeline`.
        #[arg(long)]
        treetops: PathBuf,
    },
    /// Score predicted crowns against reference crowns.
    Evaluate {
        #[command(flatten)]
        input: InputOpts,
        /// Predicted crown polygons.
        #[arg(long)]
        predicted: PathBuf,
    },
    /// Run the full detection and delineation pipeline.
    Pipeline {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        scene: SceneOpts,
        /// Generate the configured synthetic scene instead of reading files.
        #[arg(long)]
        from_scene: bool,
    },
    /// One pipeline run per detector; writes the comparative metrics table.
    Benchmark {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        scene: SceneOpts,
        #[arg(long)]
        from_scene: bool,
        /// Comma-separated detector list.
        #[arg(long, default_value = "thr,f3,f7,f11,f15,f19,sb")]
        detectors: String,
        /// Append spectral-only ablation rows (S_3D / S_2D).
        #[arg(long)]
        with_2d: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn build_config(
    cli_config: &Option<PathBuf>,
    input: &InputOpts,
    scene: &SceneOpts,
) -> Result<Config> {
    let mut cfg = match cli_config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    cfg.set_opt(
        "input.dsm",
        &input.dsm.as_ref().map(|p| p.display().to_string()),
    );
    cfg.set_opt(
        "input.bands",
        &input.bands.as_ref().map(|p| p.display().to_string()),
    );
    cfg.set_opt(
        "input.reference",
        &input.reference.as_ref().map(|p| p.display().to_string()),
    );
    cfg.set_opt(
        "output.dir",
        &input.out.as_ref().map(|p| p.display().to_string()),
    );
    cfg.set_opt("detector", &input.detector);
    cfg.set_opt("height.mode", &input.height_mode);
    cfg.set_opt("mu", &input.mu);
    cfg.set_opt("min_height", &input.min_height);
    cfg.set_opt("seg.theta", &input.theta);
    cfg.set_opt("gamma", &input.gamma);
    cfg.set_opt("scene.width", &scene.width);
    cfg.set_opt("scene.height", &scene.height);
    cfg.set_opt("scene.n_trees", &scene.trees);
    cfg.set_opt("scene.density", &scene.density);
    cfg.set_opt("scene.seed", &scene.seed);
    cfg.set_opt("scene.noise_sigma", &scene.noise);
    cfg.set_opt("scene.cell_size", &scene.cell_size);
    cfg.set_opt("scene.terrain_amplitude", &scene.terrain_amplitude);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let empty_scene = SceneOpts::default();
    let cfg = match &cli.command {
        Command::Synth { input, scene } => build_config(&cli.config, input, scene)?,
        Command::Detect { input } => build_config(&cli.config, input, &empty_scene)?,
        Command::Delineate { input, .. } => build_config(&cli.config, input, &empty_scene)?,
        Command::Evaluate { input, .. } => build_config(&cli.config, input, &empty_scene)?,
        Command::Pipeline { input, scene, .. } => build_config(&cli.config, input, scene)?,
        Command::Benchmark { input, scene, .. } => build_config(&cli.config, input, scene)?,
    };

    if cli.print_config {
        return cfg.print_effective();
    }

    match cli.command {
        Command::Synth { .. } => cmd_synth(&cfg),
        Command::Detect { .. } => cmd_detect(&cfg),
        Command::Delineate { treetops, .. } => cmd_delineate(&cfg, &treetops),
        Command::Evaluate { predicted, .. } => cmd_evaluate(&cfg, &predicted),
        Command::Pipeline { from_scene, .. } => cmd_pipeline(&cfg, from_scene),
        Command::Benchmark {
            from_scene,
            detectors,
            with_2d,
            ..
        } => cmd_benchmark(&cfg, from_scene, &detectors, with_2d),
    }
}

fn out_dir(cfg: &Config) -> PathBuf {
    cfg.path("output.dir")
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "{} '{}' does not exist",
            what,
            path.display()
        )));
    }
    Ok(())
}

/// Loads the DSM and band raster named in the configuration, validating
/// both paths before anything is written.
fn load_inputs(cfg: &Config) -> Result<(Grid, MultibandRaster)> {
    let dsm_path = cfg
        .path("input.dsm")
        .ok_or_else(|| Error::Config("input.dsm is required".into()))?;
    let bands_path = cfg
        .path("input.bands")
        .ok_or_else(|| Error::Config("input.bands is required".into()))?;
    require_file(&dsm_path, "DSM")?;
    require_file(&bands_path, "band manifest")?;
    let dsm = read_grid(&dsm_path)?;
    let raster = read_band_manifest(&bands_path)?;
    if !raster.geometry().same_geometry(&dsm) {
        return Err(Error::Input("DSM and band geometries differ".into()));
    }
    Ok((dsm, raster))
}

fn load_reference(cfg: &Config) -> Result<Option<Vec<Vec<(usize, usize)>>>> {
    match cfg.path("input.reference") {
        None => Ok(None),
        Some(path) => {
            require_file(&path, "reference crowns")?;
            let doc = read_crown_document(&path)?;
            Ok(Some(doc.crowns.iter().map(|c| doc.rasterize(c)).collect()))
        }
    }
}

fn cmd_synth(cfg: &Config) -> Result<()> {
    let spec = cfg.scene_spec()?;
    let scene = generate(&spec)?;
    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir)?;

    write_grid(&dir.join("dsm.asc"), &scene.dsm)?;
    let mut band_files = Vec::new();
    for (i, band) in scene.raster.bands().iter().enumerate() {
        let name = format!("band_{}.asc", i);
        write_grid(&dir.join(&name), band)?;
        band_files.push(name);
    }
    let roles = [
        (
            BandRole::Red,
            scene.raster.role_index(BandRole::Red).unwrap(),
        ),
        (
            BandRole::Nir,
            scene.raster.role_index(BandRole::Nir).unwrap(),
        ),
    ];
    write_band_manifest(&dir.join("bands.txt"), &band_files, &roles)?;
    write_treetops_csv(
        &dir.join("truth_treetops.csv"),
        &scene.truth_tops,
        &scene.dsm,
    )?;

    let doc = crownseg_core::synth::truth_crown_document(&scene)?;
    write_crown_document(&dir.join("truth_crowns.json"), &doc)?;

    println!(
        "scene: {} trees, {}x{} px -> {}",
        scene.truth_tops.len(),
        spec.width,
        spec.height,
        dir.display()
    );
    Ok(())
}

fn cmd_detect(cfg: &Config) -> Result<()> {
    use crownseg_core::morphology::StructuringElement;
    use crownseg_core::terrain::{csf_classify, HeightMode, TerrainModel};
    use crownseg_core::treetops::*;

    let (dsm, raster) = load_inputs(cfg)?;
    let params = cfg.params()?;
    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir)?;

    let veg = vegetation_mask(&ndvi(&raster)?, params.mu);
    let terrain = if params.height_mode == HeightMode::Dtm {
        let t = csf_classify(&dsm, &params.csf)?;
        write_grid(&dir.join("terrain_mask.asc"), &t.to_grid())?;
        t
    } else {
        crownseg_core::raster::Mask::like(&dsm)
    };
    let window_px = (params.height_window_m / dsm.cell_size()).ceil().max(1.0) as usize;
    let model = TerrainModel::new(&dsm, &terrain, window_px)?;

    let initial = match params.detector {
        DetectorKind::TopHat { se_radius } => detect_thr(
            &dsm,
            &veg,
            &StructuringElement::disk(se_radius),
            &StructuringElement::disk(params.opening_se_radius),
        )?,
        DetectorKind::FixedWindow { size } => detect_fixed_window(&dsm, &veg, size)?,
        DetectorKind::SlopeBreak => detect_slope_break(&dsm, &veg),
    };
    let checked = height_filter(initial, &dsm, &model, params.height_mode, params.min_height)?;
    let tops = non_max_suppress(checked, dsm.cell_size());
    write_treetops_csv(&dir.join("treetops.csv"), &tops, &dsm)?;
    println!("{} treetops -> {}", tops.len(), dir.display());
    Ok(())
}

fn cmd_delineate(cfg: &Config, treetops_path: &Path) -> Result<()> {
    let (dsm, raster) = load_inputs(cfg)?;
    require_file(treetops_path, "treetop table")?;
    let params = cfg.params()?;
    let tops = read_treetops_csv(treetops_path)?;
    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir)?;

    let veg = vegetation_mask(&ndvi(&raster)?, params.mu);
    let norms = scene_norms(&tops, &raster, &veg);
    let (_, segments) = delineate(&tops, &dsm, &raster, &veg, &params.segmentation, &norms)?;
    let (mut segments, tops) = postprocess(segments, tops, &params.postprocess, dsm.cell_size());

    let mut labels = dsm.like(0.0);
    for (new_id, seg) in segments.iter_mut().enumerate() {
        seg.treetop_id = new_id as u32 + 1;
        for &(r, c) in &seg.pixels {
            labels.set(r, c, seg.treetop_id as f64);
        }
    }
    write_grid(&dir.join("crown_labels.asc"), &labels)?;
    let doc = crown_document(&dsm, &segments, &tops)?;
    write_crown_document(&dir.join("crowns.json"), &doc)?;
    write_treetops_csv(&dir.join("treetops.csv"), &tops, &dsm)?;
    println!("{} crowns -> {}", segments.len(), dir.display());
    Ok(())
}

fn cmd_evaluate(cfg: &Config, predicted_path: &Path) -> Result<()> {
    let reference_path = cfg
        .path("input.reference")
        .ok_or_else(|| Error::Config("input.reference is required".into()))?;
    require_file(&reference_path, "reference crowns")?;
    require_file(predicted_path, "predicted crowns")?;
    let gamma = cfg.params()?.gamma;

    let ref_doc = read_crown_document(&reference_path)?;
    let pred_doc = read_crown_document(predicted_path)?;
    if ref_doc.width != pred_doc.width
        || ref_doc.height != pred_doc.height
        || ref_doc.cell_size != pred_doc.cell_size
    {
        return Err(Error::Input(
            "reference and predicted documents use different grids".into(),
        ));
    }
    let refs: Vec<Vec<(usize, usize)>> = ref_doc
        .crowns
        .iter()
        .map(|c| ref_doc.rasterize(c))
        .collect();
    let preds: Vec<Vec<(usize, usize)>> = pred_doc
        .crowns
        .iter()
        .map(|c| pred_doc.rasterize(c))
        .collect();
    let report = evaluate(&refs, &preds, gamma)?;

    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let row = MetricsRow::from_report("eval", &report);
    write_metrics_csv(&dir.join("metrics.csv"), &[row])?;
    println!(
        "TP {} FP {} FN {} | DA {:.3} e_com {:.3} e_om {:.3} CA {:.3} P {:.3} F {:.3}",
        report.n_tp,
        report.n_fp,
        report.n_fn,
        report.da,
        report.e_com,
        report.e_om,
        report.ca,
        report.p,
        report.f_score
    );
    Ok(())
}

/// Resolves the scene either from input files or the configured generator.
fn scene_inputs(
    cfg: &Config,
    from_scene: bool,
) -> Result<(Grid, MultibandRaster, Option<Vec<Vec<(usize, usize)>>>)> {
    if from_scene {
        let scene = generate(&cfg.scene_spec()?)?;
        Ok((scene.dsm, scene.raster, Some(scene.truth_crowns)))
    } else {
        let (dsm, raster) = load_inputs(cfg)?;
        let reference = load_reference(cfg)?;
        Ok((dsm, raster, reference))
    }
}

fn cmd_pipeline(cfg: &Config, from_scene: bool) -> Result<()> {
    let params = cfg.params()?;
    if params.segmentation.w_v == 0.0 {
        eprintln!("warning: w_v = 0, the DSM is ignored in the crown distance");
    }
    let (dsm, raster, reference) = scene_inputs(cfg, from_scene)?;
    let out = run_scene_pipeline(&dsm, &raster, &params, reference.as_deref())?;
    let dir = out_dir(cfg);
    write_artifacts(&dir, &dsm, &out)?;
    let c = &out.stage_counts;
    println!(
        "stages: initial {} -> height check {} -> nms {} -> postprocess {}",
        c.initial, c.height_check, c.nms, c.postprocess
    );
    if let Some(report) = &out.report {
        println!(
            "DA {:.3} e_com {:.3} e_om {:.3} CA {:.3} P {:.3} F {:.3}",
            report.da, report.e_com, report.e_om, report.ca, report.p, report.f_score
        );
    }
    println!("artifacts -> {}", dir.display());
    Ok(())
}

fn cmd_benchmark(cfg: &Config, from_scene: bool, detectors: &str, with_2d: bool) -> Result<()> {
    let params = cfg.params()?;
    let (dsm, raster, reference) = scene_inputs(cfg, from_scene)?;
    let reference = reference.ok_or_else(|| {
        Error::Config("benchmark needs reference crowns (input.reference or --from-scene)".into())
    })?;

    let se_radius = match cfg.detector()? {
        crownseg_core::treetops::DetectorKind::TopHat { se_radius } => se_radius,
        _ => 8,
    };
    let kinds: Vec<_> = detectors
        .split(',')
        .map(|s| config::parse_detector(s.trim(), se_radius))
        .collect::<Result<_>>()?;

    let mut rows = run_benchmark(&dsm, &raster, &params, &kinds, &reference)?;
    if with_2d {
        rows.extend(run_ablation_2d(&dsm, &raster, &params, &reference)?);
    }
    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    write_metrics_csv(&dir.join("benchmark.csv"), &rows)?;
    for r in &rows {
        println!(
            "{:<5} Np {:<5} DA {:.3} e_com {:.3} e_om {:.3} CA {:.3} P {:.3} F {:.3}",
            r.detector, r.np, r.da, r.e_com, r.e_om, r.ca, r.p, r.f
        );
    }
    println!("table -> {}", dir.join("benchmark.csv").display());
    Ok(())
}
