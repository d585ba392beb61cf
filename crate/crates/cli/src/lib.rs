//! Command-line driver: synthetic scenes, preprocessing, index and rule
//! maps, zonal experiments, PINN demos and AD traces.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

mod config;
mod render;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{error::ErrorKind, Args, Parser, Subcommand, ValueEnum};
use svann_core::autodiff::{trace_csv, TapeSpec};
use svann_core::indices::{compute_index, IndexBand, IndexId};
use svann_core::io::write_atomic;
use svann_core::metrics::{confusion, csv_field, rows_to_csv, MetricRow};
use svann_core::pinn::{heterogeneity_experiment, run_paper_trace, solve_transport, HeteroConfig, TraceRow, TransportConfig};
use svann_core::raster::{
    bilinear_upsample, generate_synthetic_scene, read_mask, read_raster, tile, upsample_mask, write_mask,
    write_polygons, write_raster, Mask, Raster, SceneSpec, SplitFractions, MASK_NODATA,
};
use svann_core::rules::{classify, load_ruleset, RuleSet};
use svann_core::svann::{
    run_svann_experiment, run_upsampling_experiment, ExperimentOutcome, Mode, PixelClassifier, SvannExperimentConfig,
    Zone, SVANN_NAME,
};

pub use config::ExperimentConfig;
pub use render::{encode_mask_png, mask_to_image, render_mask_png, PNG_NODATA, PNG_NON_WETLAND, PNG_WETLAND};

#[derive(Debug, Parser)]
#[command(name = "svann", version, about = "Zonal wetland mapping experiments and physics-informed solvers")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled multi-zone synthetic scene.
    Synth(SynthArgs),
    /// Upsample, tile and split a scene.
    Preprocess(PreprocessArgs),
    /// Compute a spectral index raster.
    Index(IndexArgs),
    /// Classify a scene or index raster with an index ruleset.
    Rules(RulesArgs),
    /// Train the zonal candidates and select one per zone.
    Train(ExperimentArgs),
    /// Score a predicted mask against a truth mask.
    Evaluate(EvaluateArgs),
    /// Compare zonal networks with rule models inside each zone.
    Compare(ExperimentArgs),
    /// Full experiment pipelines.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCommand,
    },
    /// Physics-informed network demos.
    Pinn {
        #[command(subcommand)]
        which: PinnCommand,
    },
    /// Automatic differentiation utilities.
    Ad {
        #[command(subcommand)]
        which: AdCommand,
    },
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// The same study with and without bilinear upsampling.
    Upsampling {
        #[command(flatten)]
        common: ExperimentArgs,
        /// Upsampling factor of the second run.
        #[arg(long, default_value_t = 4)]
        factor: usize,
    },
    /// Zonal networks against a single pooled model.
    SvannVsOsfa(ExperimentArgs),
}

#[derive(Debug, Subcommand)]
enum PinnCommand {
    /// Solve the transport equation and report the error against the exact solution.
    DemoTransport(PinnArgs),
    /// Replay the handworked toy-network training trace.
    PaperTrace {
        #[arg(long, default_value_t = 5)]
        iters: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        /// Directory for paper_trace.csv; the CSV is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zonal versus pooled PINN errors on a two-zone boundary problem.
    Heterogeneity(PinnArgs),
}

#[derive(Debug, Subcommand)]
enum AdCommand {
    /// Forward values and adjoints of every node of a tape.
    Trace {
        /// Tape spec JSON; the toy graph when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for ad_trace.csv; the CSV is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IndexArg {
    Ndvi,
    Ndwi,
}

impl From<IndexArg> for IndexId {
    fn from(a: IndexArg) -> Self {
        match a {
            IndexArg::Ndvi => IndexId::Ndvi,
            IndexArg::Ndwi => IndexId::Ndwi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    SvannI,
    SvannE,
    Osfa,
}

impl From<ModeArg> for Mode {
    fn from(a: ModeArg) -> Self {
        match a {
            ModeArg::SvannI => Mode::SvannI,
            ModeArg::SvannE => Mode::SvannE,
            ModeArg::Osfa => Mode::Osfa,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scene spec JSON; a 64×32 two-zone scene when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// SVR1 scene raster.
    #[arg(long)]
    input: PathBuf,
    /// SVR1 truth mask aligned with the scene.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    upsample: usize,
    #[arg(long, default_value_t = 256)]
    tile_size: usize,
    /// Keep edge tiles padded with nodata instead of dropping them.
    #[arg(long)]
    keep_partial: bool,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    split: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    index: IndexArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RulesArgs {
    /// Multi-band scene, or a single-band index raster named after its index.
    #[arg(long)]
    input: PathBuf,
    /// Required unless the input is a single-band index raster.
    #[arg(long, value_enum)]
    index: Option<IndexArg>,
    /// Ruleset JSON replacing the builtin one.
    #[arg(long)]
    ruleset: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Model name in the output row; the prediction file stem by default.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value = "ALL")]
    zone: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct ExperimentArgs {
    /// Experiment config JSON; the default two-zone study when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PinnArgs {
    /// Solver config JSON; documented defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv` (including the program name) and runs the command.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Index(a) => index(a),
        Command::Rules(a) => rules(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::Experiment { which: ExperimentCommand::SvannVsOsfa(a) } => svann_vs_osfa(a),
        Command::Experiment { which: ExperimentCommand::Upsampling { common, factor } } => upsampling(common, factor),
        Command::Pinn { which: PinnCommand::DemoTransport(a) } => demo_transport(a),
        Command::Pinn { which: PinnCommand::PaperTrace { iters, lr, out } } => paper_trace(iters, lr, out),
        Command::Pinn { which: PinnCommand::Heterogeneity(a) } => heterogeneity(a),
        Command::Ad { which: AdCommand::Trace { config, out } } => ad_trace(config, out),
    }
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(dir: &Path, name: &str, text: &str) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn save_raster(raster: &Raster, dir: &Path, name: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    write_raster(raster, &path).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn save_mask(mask: &Mask, raster: &Raster, dir: &Path, stem: &str) -> anyhow::Result<()> {
    let path = dir.join(format!("{stem}.svr"));
    write_mask(mask, *raster.transform(), &path).with_context(|| format!("writing {}", path.display()))?;
    render_mask_png(mask, &dir.join(format!("{stem}.png")))?;
    println!("wrote {} and {stem}.png", path.display());
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let spec: SceneSpec = match &a.config {
        Some(p) => read_json(p)?,
        None => SceneSpec::two_zone(64, 32, 30.0, 0.0),
    };
    let scene = generate_synthetic_scene(&spec, a.seed).context("generating scene")?;
    ensure_dir(&a.out)?;
    save_raster(&scene.raster, &a.out, "scene.svr")?;
    save_mask(&scene.mask, &scene.raster, &a.out, "truth")?;
    let poly = a.out.join("polygons.geojson");
    write_polygons(&scene.polygons, &poly).with_context(|| format!("writing {}", poly.display()))?;
    let zones: Vec<Zone> = scene.zones.iter().map(|(id, b)| Zone::rect(id.clone(), *b)).collect();
    write_text(&a.out, "zones.json", &serde_json::to_string_pretty(&zones).expect("zones serialize"))?;
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> CliResult<()> {
    let fractions = SplitFractions::new(a.split[0], a.split[1], a.split[2])
        .map_err(|e| CliError::Usage(format!("--split: {e}")))?;
    if a.tile_size == 0 || a.upsample == 0 {
        return Err(CliError::Usage("--tile-size and --upsample must be positive".into()));
    }
    let mut raster = read_raster(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let mut mask = match &a.mask {
        Some(p) => read_mask(p).with_context(|| format!("reading {}", p.display()))?.0,
        None => Mask::filled(raster.width(), raster.height(), MASK_NODATA),
    };
    if (mask.width(), mask.height()) != (raster.width(), raster.height()) {
        return Err(anyhow!("mask and scene sizes differ").into());
    }
    if a.upsample > 1 {
        raster = bilinear_upsample(&raster, a.upsample).context("upsampling")?;
        mask = upsample_mask(&mask, a.upsample).context("upsampling mask")?;
    }
    let tiles = tile(&raster, &mask, a.tile_size, !a.keep_partial).context("tiling")?;
    let (tiles, warning) = svann_core::raster::split_dataset(tiles, fractions, a.seed).context("splitting")?;
    if let Some(w) = warning {
        log::warn!("{w:?}");
    }
    let dir = a.out.join("tiles");
    ensure_dir(&dir)?;
    let mut manifest = String::from("row,col,split,raster,mask\r\n");
    for (i, t) in tiles.tiles.iter().enumerate() {
        let stem = format!("r{:04}_c{:04}", t.row, t.col);
        let rpath = dir.join(format!("{stem}.svr"));
        write_raster(&t.raster, &rpath).with_context(|| format!("writing {}", rpath.display()))?;
        let mname = if a.mask.is_some() {
            let mpath = dir.join(format!("{stem}_mask.svr"));
            write_mask(&t.mask, *t.raster.transform(), &mpath).with_context(|| format!("writing {}", mpath.display()))?;
            format!("tiles/{stem}_mask.svr")
        } else {
            String::new()
        };
        let split = tiles.split_of(i).map_or("", |s| s.as_str());
        let _ = write!(manifest, "{},{},{},{},{}\r\n", t.row, t.col, split, csv_field(&format!("tiles/{stem}.svr")), csv_field(&mname));
    }
    write_text(&a.out, "tiles.csv", &manifest)?;
    println!("{} tiles of {} pixels", tiles.len(), a.tile_size);
    Ok(())
}

fn index(a: IndexArgs) -> CliResult<()> {
    let raster = read_raster(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let id: IndexId = a.index.into();
    let band = compute_index(&raster, &id).context("computing index")?;
    ensure_dir(&a.out)?;
    let out = band.to_raster(*raster.transform()).context("building index raster")?;
    save_raster(&out, &a.out, &format!("{}.svr", id.name().to_ascii_lowercase()))?;
    Ok(())
}

fn rules(a: RulesArgs) -> CliResult<()> {
    let raster = read_raster(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let single = raster.bands().len() == 1;
    let band: IndexBand = match a.index.map(IndexId::from) {
        Some(id) if single && raster.bands()[0].name.eq_ignore_ascii_case(id.name()) => {
            IndexBand::from_raster(&raster).context("reading index raster")?
        }
        Some(id) => compute_index(&raster, &id).context("computing index")?,
        None if single => IndexBand::from_raster(&raster).context("reading index raster")?,
        None => return Err(CliError::Usage("--index is required for multi-band input".into())),
    };
    let ruleset = match &a.ruleset {
        Some(p) => load_ruleset(p).with_context(|| format!("loading {}", p.display()))?,
        None => RuleSet::default_for(&band.id)
            .ok_or_else(|| CliError::Usage(format!("no builtin ruleset for {}; pass --ruleset", band.id)))?,
    };
    let mask = classify(&band, &ruleset).context("classifying")?;
    ensure_dir(&a.out)?;
    save_mask(&mask, &raster, &a.out, &format!("{}_mask", band.id.name().to_ascii_lowercase()))?;
    println!("wetland pixels: {} of {}", mask.count(svann_core::raster::WETLAND), raster.len());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let (pred, _) = read_mask(&a.pred).with_context(|| format!("reading {}", a.pred.display()))?;
    let (truth, _) = read_mask(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    let cm = confusion(&pred, &truth).context("comparing masks")?;
    let model = a.model.unwrap_or_else(|| a.pred.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned()));
    let csv = rows_to_csv(&[MetricRow::new(model, a.zone, cm)]);
    ensure_dir(&a.out)?;
    print!("{csv}");
    write_text(&a.out, "metrics.csv", &csv)?;
    Ok(())
}

fn load_experiment(a: &ExperimentArgs) -> CliResult<(SvannExperimentConfig, PathBuf)> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.experiment.seed = s;
    }
    if let Some(m) = a.mode {
        cfg.experiment.mode = m.into();
    }
    let out = a.out.clone().or(cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    ensure_dir(&out)?;
    Ok((cfg.experiment, out))
}

fn write_models(outcome: &ExperimentOutcome, out: &Path) -> anyhow::Result<()> {
    let dir = out.join("models");
    ensure_dir(&dir)?;
    let osfa = outcome.osfa.iter().flat_map(|r| r.entries());
    for e in outcome.registry.entries().iter().chain(osfa) {
        let path = dir.join(format!("{}.json", e.model.name));
        write_atomic(&path, e.model.net.to_json().as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn train(a: ExperimentArgs) -> CliResult<()> {
    let (cfg, out) = load_experiment(&a)?;
    let outcome = run_svann_experiment(&cfg).context("running zonal training")?;
    write_models(&outcome, &out)?;
    write_text(&out, "validation.csv", &rows_to_csv(&outcome.validation))?;
    write_text(&out, "selection.csv", &outcome.selection_csv())?;
    Ok(())
}

fn compare(a: ExperimentArgs) -> CliResult<()> {
    let (cfg, out) = load_experiment(&a)?;
    let outcome = run_svann_experiment(&cfg).context("running comparison")?;
    write_text(&out, "comparison.csv", &outcome.comparison.to_csv())?;
    write_text(&out, "metrics.csv", &rows_to_csv(&outcome.test))?;
    let summary = outcome.comparison.summary();
    print!("{summary}");
    write_text(&out, "summary.txt", &summary)?;
    Ok(())
}

fn selection_lines(outcome: &ExperimentOutcome) -> String {
    outcome.selection.choices.iter().map(|(z, m)| format!("zone {z}: selected {m}\n")).collect()
}

fn svann_vs_osfa(a: ExperimentArgs) -> CliResult<()> {
    let (cfg, out) = load_experiment(&a)?;
    let outcome = run_svann_experiment(&cfg).context("running experiment")?;
    write_models(&outcome, &out)?;
    write_text(&out, "validation.csv", &rows_to_csv(&outcome.validation))?;
    write_text(&out, "selection.csv", &outcome.selection_csv())?;
    write_text(&out, "metrics.csv", &rows_to_csv(&outcome.test))?;
    write_text(&out, "comparison.csv", &outcome.comparison.to_csv())?;
    let summary = format!("{}{}", selection_lines(&outcome), outcome.comparison.summary());
    print!("{summary}");
    write_text(&out, "summary.txt", &summary)?;
    let svann = outcome.selection.predictor(&outcome.registry, &outcome.zones, SVANN_NAME).context("routing zones")?;
    for &t in outcome.data.zones.iter().flat_map(|z| z.test.iter()) {
        let tile = &outcome.data.tiles.tiles[t];
        let mask = svann.predict_raster(&tile.raster).context("predicting")?;
        let dir = out.join("predictions");
        ensure_dir(&dir)?;
        render_mask_png(&mask, &dir.join(format!("r{:04}_c{:04}.png", tile.row, tile.col)))?;
    }
    Ok(())
}

fn upsampling(a: ExperimentArgs, factor: usize) -> CliResult<()> {
    if factor < 2 {
        return Err(CliError::Usage("--factor must be at least 2".into()));
    }
    let (cfg, out) = load_experiment(&a)?;
    let outcome = run_upsampling_experiment(&cfg, factor).context("running experiment")?;
    write_text(&out, "metrics.csv", &rows_to_csv(&outcome.rows()))?;
    let summary = format!(
        "without upsampling\n{}with {factor}x upsampling\n{}",
        selection_lines(&outcome.base),
        selection_lines(&outcome.upsampled)
    );
    print!("{summary}");
    write_text(&out, "summary.txt", &summary)?;
    Ok(())
}

fn demo_transport(a: PinnArgs) -> CliResult<()> {
    let mut cfg: TransportConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TransportConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let (net, report) = solve_transport::<f64>(&cfg).context("solving transport problem")?;
    ensure_dir(&a.out)?;
    print!("{}", report.to_csv());
    write_text(&a.out, "transport.csv", &report.to_csv())?;
    let mut history = String::from("epoch,loss\r\n");
    for (i, l) in report.loss_history.iter().enumerate() {
        let _ = write!(history, "{i},{l:.6e}\r\n");
    }
    write_text(&a.out, "loss_history.csv", &history)?;
    write_text(&a.out, "network.json", &net.to_json())?;
    Ok(())
}

fn paper_trace(iters: usize, lr: f64, out: Option<PathBuf>) -> CliResult<()> {
    let csv = TraceRow::to_csv(&run_paper_trace(iters, lr));
    print!("{csv}");
    if let Some(dir) = out {
        ensure_dir(&dir)?;
        write_text(&dir, "paper_trace.csv", &csv)?;
    }
    Ok(())
}

fn heterogeneity(a: PinnArgs) -> CliResult<()> {
    let mut cfg: HeteroConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => HeteroConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seeds = vec![s];
    }
    let report = heterogeneity_experiment::<f64>(&cfg).context("running heterogeneity experiment")?;
    ensure_dir(&a.out)?;
    write_text(&a.out, "heterogeneity.csv", &report.to_csv())?;
    for (k, zone) in report.zones.iter().enumerate() {
        let holds = report.seeds().iter().filter(|&&s| report.postulate_holds(s, k)).count();
        println!("zone {zone}: zonal model beats pooled model in {holds}/{} runs", report.seeds().len());
    }
    Ok(())
}

fn ad_trace(config: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<()> {
    let spec: TapeSpec = match &config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            TapeSpec::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => TapeSpec::toy([0.5; 6], 0.1, 0.1),
    };
    let named = spec.build::<f64>().context("building tape")?;
    let csv = trace_csv(&named).context("tracing tape")?;
    print!("{csv}");
    if let Some(dir) = out {
        ensure_dir(&dir)?;
        write_text(&dir, "ad_trace.csv", &csv)?;
    }
    Ok(())
}
