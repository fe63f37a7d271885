use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use corridor_gt::elevation::{build_height_map, HeightMap};
use corridor_gt::pipeline::{evaluate, generate, load_manifest, run_oracle, PipelineConfig, RunReport};
use corridor_gt::scene::{HeightSource, SceneFrame};
use corridor_gt::synth::{synth, ScenarioKind, SynthOptions, Terrain};
use corridor_gt::Error;

#[derive(Parser)]
#[command(name = "corridor-gt", version, about = "Automatic ego-corridor ground truth for camera images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one mask per scene file.
    Generate(RenderArgs),
    /// Render masks with the per-pixel reference renderer.
    Oracle(RenderArgs),
    /// Compare two mask directories and print the score table as CSV.
    Evaluate {
        dir_a: PathBuf,
        dir_b: PathBuf,
        #[arg(long, default_value_t = 25)]
        batch_size: usize,
        /// JSON object mapping frame ids to scenario names.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Blend a mask over a camera image for review.
    Overlay {
        image: PathBuf,
        mask: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Tint as r,g,b.
        #[arg(long, value_parser = parse_rgb, default_value = "0,255,0")]
        tint: [u8; 3],
        #[arg(long)]
        out: PathBuf,
    },
    /// Write seeded synthetic scene files.
    Synth {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// flat or ramp.
        #[arg(long, default_value = "flat")]
        terrain: String,
        #[arg(long)]
        no_obstacles: bool,
    },
    /// Stitch the height samples of scene files into a height map file.
    Heightmap {
        #[arg(required = true)]
        scenes: Vec<PathBuf>,
        #[arg(long, default_value_t = corridor_gt::elevation::DEFAULT_HEIGHT_RESOLUTION)]
        resolution: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RenderArgs {
    scene_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON pipeline configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    max_range: Option<f64>,
    #[arg(long)]
    no_shift: bool,
    #[arg(long)]
    no_objects: bool,
    #[arg(long)]
    no_occlusion: bool,
    #[arg(long)]
    no_elevation: bool,
    #[arg(long)]
    no_tilt: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Height map file used for every frame instead of per-frame data.
    #[arg(long)]
    height_map: Option<PathBuf>,
    /// Write the run report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl RenderArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.step {
            c.resample_step = v;
        }
        if let Some(v) = self.max_range {
            c.max_range = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        c.shift &= !self.no_shift;
        c.objects &= !self.no_objects;
        c.occlusion &= !self.no_occlusion;
        c.elevation &= !self.no_elevation;
        c.tilt &= !self.no_tilt;
        c.validate()?;
        Ok(c)
    }

    fn shared_map(&self) -> Result<Option<HeightMap>> {
        self.height_map.as_deref().map(HeightMap::load).transpose().map_err(Into::into)
    }
}

fn parse_rgb(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<u8> = s.split(',').map(|p| p.trim().parse::<u8>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    parts.try_into().map_err(|_| "expected r,g,b".to_string())
}

fn finish_run(report: RunReport, path: Option<&Path>) -> Result<()> {
    eprintln!("{} frames processed, {} failed in {:.2?}", report.processed, report.failed.len(), report.wall_time);
    for f in &report.failed {
        eprintln!("  {}: {} ({})", f.frame_id, f.kind, f.message);
    }
    if let Some(p) = path {
        std::fs::write(p, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => finish_run(generate(&a.scene_dir, &a.config()?, &a.out, a.shared_map()?)?, a.report.as_deref()),
        Command::Oracle(a) => finish_run(run_oracle(&a.scene_dir, &a.config()?, &a.out, a.shared_map()?)?, a.report.as_deref()),
        Command::Evaluate { dir_a, dir_b, batch_size, manifest, out, workers } => {
            let manifest = manifest.as_deref().map(load_manifest).transpose()?;
            let e = evaluate(&dir_a, &dir_b, batch_size, manifest.as_ref(), workers)?;
            for id in &e.skipped {
                eprintln!("skipped unmatched frame {id}");
            }
            match out {
                Some(p) => std::fs::write(&p, &e.csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{}", e.csv),
            }
            Ok(())
        }
        Command::Overlay { image, mask, alpha, tint, out } => corridor_gt_cli::overlay(&image, &mask, alpha, tint, &out),
        Command::Synth { kind, count, seed, out, terrain, no_obstacles } => {
            let kind: ScenarioKind = kind.parse()?;
            let opts = SynthOptions { terrain: terrain.parse::<Terrain>()?, obstacles: !no_obstacles, ..Default::default() };
            let written = synth(kind, count, seed, &out, &opts)?;
            eprintln!("wrote {} scenes to {}", written.len(), out.display());
            Ok(())
        }
        Command::Heightmap { scenes, resolution, out } => {
            let mut samples = Vec::new();
            for p in &scenes {
                match SceneFrame::load(p)?.height {
                    HeightSource::Samples(s) => samples.extend(s),
                    _ => eprintln!("{} has no inline height samples", p.display()),
                }
            }
            if samples.is_empty() {
                bail!(Error::EmptySamples);
            }
            let map = build_height_map(&samples, resolution)?;
            map.save(&out)?;
            eprintln!("height map {}x{} cells, {} populated", map.width, map.height, map.valid_cells());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::EmptyEvaluation) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
