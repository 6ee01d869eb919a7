//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::affordance::estimate_maps;
use crate::energy::SLOT_NAMES;
use crate::error::{Error, Result};
use crate::grammar::{Grammar, GroupingRules};
use crate::io::{self, load_corpus, load_model, load_scene, read_json, save_model, write_json};
use crate::learning::{cd_learn, collect_layout_stats, corpus_layouts, fit_model, CdConfig};
use crate::metrics::{compare_maps, MapComparison};
use crate::model::ModelSettings;
use crate::planner::{activity_heatmap, heatmap_entropy, PlannerParams};
use crate::raster::{rasterize_affordance, rasterize_heatmap, rasterize_segmentation};
use crate::sampler::{synthesize, SamplerConfig};
use crate::scene::SceneLayout;

#[derive(Debug, Parser)]
#[command(name = "scenegram", version, about = "Learn indoor-scene grammars and synthesize layouts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a layout corpus.
    Learn {
        /// Corpus file or directory of `*.jsonl` files.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Contrastive-divergence epochs for the potential weights.
        #[arg(long, default_value_t = 50)]
        cd_epochs: usize,
        /// Optional CSV with one row per CD epoch.
        #[arg(long)]
        cd_trace: Option<PathBuf>,
        /// JSON file overriding the fitting settings.
        #[arg(long)]
        settings: Option<PathBuf>,
        /// JSON file overriding the CD settings.
        #[arg(long)]
        cd_config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Synthesize scenes.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "type")]
        scene_type: String,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Independent chains with seeds `seed, seed+1, ...`; outputs get a
        /// `_k` suffix.
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// JSON sampler configuration; command-line values take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write top-view rasters of a scene.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seg: Option<PathBuf>,
        #[arg(long)]
        afford: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        res: f64,
    },
    /// Compare affordance maps recomputed from scenes with the model's.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Directory of scene (`*.json`) and corpus (`*.jsonl`) files.
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Plan the trajectory heatmap of a scene.
    PlanDebug {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        heatmap: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Learn {
            corpus,
            grammar,
            rules,
            out,
            cd_epochs,
            cd_trace,
            settings,
            cd_config,
            seed,
        } => learn(&corpus, &grammar, &rules, &out, cd_epochs, cd_trace.as_deref(), settings, cd_config, seed),
        Command::Sample {
            model,
            scene_type,
            iters,
            seed,
            out,
            trace,
            chains,
            config,
        } => sample(&model, &scene_type, iters, seed, &out, trace.as_deref(), chains, config.as_deref()),
        Command::Render {
            scene,
            model,
            seg,
            afford,
            res,
        } => render(&scene, &model, seg.as_deref(), afford.as_deref(), res),
        Command::Eval { model, scenes, report } => eval(&model, &scenes, &report),
        Command::PlanDebug { scene, heatmap, seed } => plan_debug(&scene, &heatmap, seed),
    }
}

#[allow(clippy::too_many_arguments)]
fn learn(
    corpus: &Path,
    grammar: &Path,
    rules: &Path,
    out: &Path,
    cd_epochs: usize,
    cd_trace: Option<&Path>,
    settings: Option<PathBuf>,
    cd_config: Option<PathBuf>,
    seed: u64,
) -> Result<()> {
    let grammar: Grammar = read_json(grammar)?;
    let rules: GroupingRules = read_json(rules)?;
    let settings: ModelSettings = match settings {
        Some(p) => read_json(&p)?,
        None => ModelSettings::default(),
    };
    let scenes = load_corpus(corpus)?;
    let layouts = corpus_layouts(&scenes, &grammar, &rules, &settings)?;
    let stats = collect_layout_stats(&layouts, &grammar, &settings)?;
    let (mut model, warnings) = fit_model(&stats, &grammar, &rules, &settings)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let mut cd: CdConfig = match cd_config {
        Some(p) => read_json(&p)?,
        None => CdConfig::default(),
    };
    cd.epochs = cd_epochs;
    cd.seed = seed;
    if cd.epochs > 0 {
        let (weights, trace) = match cd_learn(&model, &layouts, &cd) {
            Ok(r) => r,
            Err(Error::Diverged { epoch, magnitude, trace }) => {
                if let Some(p) = cd_trace {
                    io::write_cd_trace(p, &trace)?;
                }
                return Err(Error::Diverged { epoch, magnitude, trace });
            }
            Err(e) => return Err(e),
        };
        model.weights = weights;
        if let Some(p) = cd_trace {
            io::write_cd_trace(p, &trace)?;
        }
    }
    save_model(out, &model)?;
    let w = model.weights.to_vector();
    let summary: Vec<String> = SLOT_NAMES.iter().zip(w).map(|(n, v)| format!("{n}={v:.4}")).collect();
    println!(
        "learned {} scenes, {} scene types; weights {}",
        scenes.len(),
        model.scene_types.len(),
        summary.join(" ")
    );
    Ok(())
}

/// `dir/stem_k.ext` for chain `k` when several chains run.
fn chain_path(path: &Path, k: usize, chains: usize) -> PathBuf {
    if chains == 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{k}"),
    };
    path.with_file_name(name)
}

#[allow(clippy::too_many_arguments)]
fn sample(
    model: &Path,
    scene_type: &str,
    iters: Option<usize>,
    seed: u64,
    out: &Path,
    trace: Option<&Path>,
    chains: usize,
    config: Option<&Path>,
) -> Result<()> {
    let model = load_model(model)?;
    let mut base: SamplerConfig = match config {
        Some(p) => read_json(p)?,
        None => SamplerConfig::default(),
    };
    if let Some(n) = iters {
        base.iterations = n;
    }
    if chains == 0 {
        return Err(Error::Config("--chains must be at least 1".into()));
    }
    base.validate()?;
    let results: Vec<Result<(usize, f64)>> = (0..chains)
        .into_par_iter()
        .map(|k| {
            let cfg = SamplerConfig {
                seed: seed.wrapping_add(k as u64),
                ..base.clone()
            };
            let (scene, tr) = synthesize(&model, scene_type, &cfg)?;
            io::export_scene(&chain_path(out, k, chains), &scene)?;
            if let Some(t) = trace {
                io::write_trace(&chain_path(t, k, chains), &tr.records)?;
            }
            Ok((k, tr.best_exact_energy))
        })
        .collect();
    for r in results {
        let (k, e) = r?;
        println!("chain {k}: best energy {e:.6}");
    }
    Ok(())
}

fn render(scene: &Path, model: &Path, seg: Option<&Path>, afford: Option<&Path>, res: f64) -> Result<()> {
    if !(res > 0.0) {
        return Err(Error::Config("--res must be positive".into()));
    }
    if seg.is_none() && afford.is_none() {
        return Err(Error::Config("nothing to render; pass --seg and/or --afford".into()));
    }
    let model = load_model(model)?;
    let scene = load_scene(scene)?;
    if let Some(p) = seg {
        rasterize_segmentation(&scene, &model.category_index, res).write_pgm(p)?;
    }
    if let Some(p) = afford {
        rasterize_affordance(&scene, &model, res)?.write_pgm(p)?;
    }
    Ok(())
}

/// Scene files and corpus files of a directory (or a single file), in name
/// order.
fn load_eval_scenes(path: &Path, model: &crate::model::LearnedModel) -> Result<Vec<SceneLayout>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json" || x == "jsonl"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let mut scenes = Vec::new();
    for f in files {
        if f.extension().is_some_and(|x| x == "jsonl") {
            let corpus = load_corpus(&f)?;
            scenes.extend(corpus_layouts(&corpus, &model.grammar, &model.rules, &model.settings)?);
        } else {
            scenes.push(load_scene(&f)?);
        }
    }
    if scenes.is_empty() {
        return Err(Error::format(path.display().to_string(), "no scene files found"));
    }
    Ok(scenes)
}

#[derive(Serialize)]
struct EvalReport {
    scenes: usize,
    categories: std::collections::BTreeMap<String, MapComparison>,
    warnings: Vec<String>,
}

fn eval(model: &Path, scenes: &Path, report: &Path) -> Result<()> {
    let model = load_model(model)?;
    let layouts = load_eval_scenes(scenes, &model)?;
    let (maps, warnings) = estimate_maps(&layouts, &model.settings.affordance);
    let categories = compare_maps(&model.affordances, &maps)?;
    println!("{:<20} {:>8} {:>10}", "category", "TV", "Hellinger");
    for (cat, c) in &categories {
        println!("{cat:<20} {:>8.4} {:>10.4}", c.tv, c.hellinger);
    }
    write_json(
        report,
        &EvalReport {
            scenes: layouts.len(),
            categories,
            warnings,
        },
    )
}

fn plan_debug(scene: &Path, heatmap: &Path, seed: u64) -> Result<()> {
    let scene = load_scene(scene)?;
    let hm = activity_heatmap(&scene, &PlannerParams::default(), seed);
    rasterize_heatmap(&hm).write_pgm(heatmap)?;
    println!(
        "{} trajectories, entropy {:.6}{}",
        hm.trajectories,
        heatmap_entropy(&hm),
        if hm.empty { " (no trajectories)" } else { "" }
    );
    Ok(())
}
