mod demo;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::LazyLock;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use prt_core::baker::{bake_all, sha256_file, BakeConfig};
use prt_core::illum::{prepare_lights_from_dir, EnvPrepConfig};
use prt_core::inverse::estimate_light;
use prt_core::maps::{read_map, read_map_as, write_map, MapKind, ShLight};
use prt_core::relight::{self, shade_map, Decomposition, Encoding};
use prt_core::scene::{DEFAULT_EPSILON_SCALE, DEFAULT_PADDING, DEFAULT_SIZE};

static BUILD_INFO: LazyLock<String> = LazyLock::new(|| {
    format!(
        "{} (prt-core {}, {}-{}, {} build)",
        env!("CARGO_PKG_VERSION"),
        prt_core::VERSION,
        std::env::consts::OS,
        std::env::consts::ARCH,
        if cfg!(debug_assertions) { "debug" } else { "release" }
    )
});

#[derive(Parser, Debug)]
#[command(name = "prt", version = BUILD_INFO.as_str(), about = "Bake, relight and invert occlusion-aware SH light transport")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Random seed for baking and light-set preparation
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Only log warnings and errors
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bake mask, albedo, normal, transport and AO maps from an OBJ mesh
    Bake(BakeArgs),
    /// Turn a directory of panoramas into a curated SH light set
    Envprep(EnvprepArgs),
    /// Shade a transport map with an SH light
    Shade(ShadeArgs),
    /// Render albedo × (transport · light)
    Relight(RelightArgs),
    /// Render a turntable of the light rotating about +y
    Sweep(SweepArgs),
    /// Swap lights between two decompositions
    Transfer(TransferArgs),
    /// Least-squares SH light from a shading image and a transport map
    EstimateLight(EstimateArgs),
    /// Score a predicted decomposition against ground truth
    Evaluate(EvaluateArgs),
    /// Run the whole pipeline on built-in procedural scenes
    Demo(DemoArgs),
}

#[derive(Args, Debug)]
struct BakeArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    size: usize,
    #[arg(long, default_value_t = DEFAULT_PADDING)]
    padding: f64,
    #[arg(long, default_value_t = 256)]
    samples: usize,
    /// Shadow-ray offset as a fraction of the bounding-box diagonal
    #[arg(long, default_value_t = DEFAULT_EPSILON_SCALE)]
    epsilon_scale: f64,
}

#[derive(Args, Debug)]
struct EnvprepArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 35)]
    rotations: usize,
    #[arg(long, default_value_t = 10.0)]
    step: f64,
    #[arg(long, default_value_t = 50)]
    clusters: usize,
    #[arg(long, default_value_t = 0.2)]
    bright_min: f64,
    /// Brightness target range as LOW:HIGH
    #[arg(long, default_value = "0.7:0.9", value_parser = parse_range)]
    target: [f64; 2],
}

fn parse_range(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(':').ok_or("expected LOW:HIGH")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(lo > 0.0 && lo <= hi) {
        return Err(format!("need 0 < LOW <= HIGH, got {lo}:{hi}"));
    }
    Ok([lo, hi])
}

#[derive(Args, Debug)]
struct ShadeArgs {
    #[arg(long)]
    transport: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Light file, or `lights.json#ID`
    #[arg(long)]
    light: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RelightArgs {
    #[arg(long)]
    albedo: PathBuf,
    #[arg(long)]
    transport: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    light: String,
    /// Output image; `.png` is sRGB encoded, `.pfm` stays linear
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    albedo: PathBuf,
    #[arg(long)]
    transport: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    light: String,
    #[arg(long, default_value_t = 36)]
    frames: usize,
    #[arg(long, default_value_t = 10.0)]
    step: f64,
    /// Frame format, png or pfm
    #[arg(long, default_value = "png", value_parser = ["png", "pfm"])]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TransferArgs {
    /// Directory with albedo.mapb, transport.mapb, mask.png and light.json
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    shading: PathBuf,
    #[arg(long)]
    transport: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 192)]
    pub size: usize,
    #[arg(long, default_value_t = 128)]
    pub samples: usize,
}

fn log_outputs(paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        log::info!("wrote {} sha256={}", p.display(), sha256_file(p)?);
    }
    Ok(())
}

fn log_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if p.is_file() {
            log::info!("input {} sha256={}", p.display(), sha256_file(p)?);
        }
    }
    Ok(())
}

fn light_file(reference: &str) -> &Path {
    Path::new(reference.rsplit_once('#').map_or(reference, |(f, _)| f))
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.global.seed;
    match cli.command {
        Command::Bake(a) => {
            let config = BakeConfig { samples: a.samples, seed, epsilon_scale: a.epsilon_scale };
            log::info!("bake config {}", serde_json::to_string(&config)?);
            log_inputs(&[&a.mesh])?;
            let manifest = bake_all(&a.mesh, &config, a.size, a.padding, &a.out)?;
            for (name, hash) in &manifest.hashes {
                log::info!("wrote {} sha256={hash}", a.out.join(name).display());
            }
        }
        Command::Envprep(a) => {
            let config = EnvPrepConfig {
                rotations: a.rotations,
                step_deg: a.step,
                clusters: a.clusters,
                bright_min: a.bright_min,
                target: a.target,
                seed,
                ..EnvPrepConfig::default()
            };
            log::info!("envprep config {}", serde_json::to_string(&config)?);
            let set = prepare_lights_from_dir(&a.input, &config)?;
            log::info!("{} lights kept, {} train / {} test", set.lights.len(), set.train.len(), set.test.len());
            set.save(&a.out)?;
            log_outputs(&[a.out])?;
        }
        Command::Shade(a) => {
            log_inputs(&[&a.transport, &a.mask, light_file(&a.light)])?;
            let light = ShLight::load(&a.light)?;
            let shading = shade_map(&read_map(&a.transport)?, &light, &read_map_as(&a.mask, MapKind::Mask)?)?;
            write_map(&shading, &a.out)?;
            log_outputs(&[a.out])?;
        }
        Command::Relight(a) => {
            log_inputs(&[&a.albedo, &a.transport, &a.mask, light_file(&a.light)])?;
            let light = ShLight::load(&a.light)?;
            relight::relight(&a.albedo, &a.transport, &a.mask, &light, &a.out)?;
            log_outputs(&[a.out])?;
        }
        Command::Sweep(a) => {
            log::info!("sweep frames={} step={} format={}", a.frames, a.step, a.format);
            log_inputs(&[&a.albedo, &a.transport, &a.mask, light_file(&a.light)])?;
            let d = Decomposition::new(
                read_map_as(&a.albedo, MapKind::Albedo)?,
                read_map(&a.transport)?,
                read_map_as(&a.mask, MapKind::Mask)?,
                ShLight::load(&a.light)?,
            )?;
            let encoding = if a.format == "pfm" { Encoding::LinearPfm } else { Encoding::SrgbPng };
            log_outputs(&relight::sweep(&d, a.frames, a.step, &a.out, encoding)?)?;
        }
        Command::Transfer(a) => {
            let da = Decomposition::load_dir(&a.a).with_context(|| format!("loading {}", a.a.display()))?;
            let db = Decomposition::load_dir(&a.b).with_context(|| format!("loading {}", a.b.display()))?;
            let (ab, ba) = relight::transfer_light(&da, &db)?;
            std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            let paths = [a.out.join("a_lit_by_b.png"), a.out.join("b_lit_by_a.png")];
            write_map(&ab, &paths[0])?;
            write_map(&ba, &paths[1])?;
            log_outputs(&paths)?;
        }
        Command::EstimateLight(a) => {
            log_inputs(&[&a.shading, &a.transport, &a.mask])?;
            let est = estimate_light(&read_map(&a.shading)?, &read_map(&a.transport)?, &read_map_as(&a.mask, MapKind::Mask)?)?;
            if est.rank_deficient {
                log::warn!("transport has rank {} of 9; returning the minimum-norm light", est.rank);
            }
            log::info!("residual {:.3e}, condition {:.3e}", est.residual, est.condition);
            let id = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            est.light.with_id(id).save(&a.out)?;
            log_outputs(&[a.out])?;
        }
        Command::Evaluate(a) => {
            let report = prt_core::metrics::evaluate(&a.pred, &a.gt, &a.out)?;
            if let Some(sum) = report.losses15.get("sum").and_then(|m| m.0) {
                log::info!("loss sum {sum:.6}");
            }
            log_outputs(&[a.out])?;
        }
        Command::Demo(a) => demo::run(&a, seed)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.global.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info })
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    log::info!(
        "prt {} seed={} threads={}",
        *BUILD_INFO,
        cli.global.seed,
        rayon::current_num_threads()
    );
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
