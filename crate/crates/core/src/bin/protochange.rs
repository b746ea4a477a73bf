use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use protochange::baselines::{run_baseline, BaselineMethod};
use protochange::config::PipelineConfig;
use protochange::eval::{evaluate, EvalOptions, Method};
use protochange::metrics::{class_metrics, confusion, render_table, MethodRow};
use protochange::pipeline::{detect, dump_intermediates};
use protochange::raster::{load_pair, ChangeMask};

#[derive(Parser)]
#[command(name = "protochange", version, about = "Prototype-guided unsupervised change detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; defaults to $PROTOCHANGE_CONFIG when set.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set refine.threshold=0.8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the prototype-guided detector on one pair.
    Detect {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        /// `random`, or a mask file over the source image.
        #[arg(long)]
        prototype: Option<String>,
        /// Epoch the prototype is taken from: pre or post.
        #[arg(long)]
        prototype_source: Option<String>,
        /// External prototype chip image (with --chip-mask).
        #[arg(long, requires = "chip_mask")]
        chip: Option<PathBuf>,
        #[arg(long)]
        chip_mask: Option<PathBuf>,
        /// Chip placement `row,col`; scene center when omitted.
        #[arg(long)]
        anchor: Option<String>,
        /// `stats` or an ONNX model file.
        #[arg(long)]
        backend: Option<String>,
        /// `builtin` or a 16-bit segment map of the pre image.
        #[arg(long)]
        segments: Option<String>,
        /// 16-bit segment map of the post image.
        #[arg(long)]
        segments_post: Option<PathBuf>,
        /// Ground-truth mask; adds a metric block to the report.
        #[arg(long)]
        label: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        dump_intermediate: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run a classical baseline on one pair.
    Baseline {
        #[arg(long, value_parser = ["cva", "pcakmeans", "irmad", "sfa"])]
        method: String,
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Block size for pcakmeans.
        #[arg(long)]
        block: Option<usize>,
        /// PCA components for pcakmeans.
        #[arg(long)]
        components: Option<usize>,
        /// Iteration cap for irmad.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Convergence tolerance for irmad.
        #[arg(long)]
        eps: Option<f64>,
        /// Covariance ridge for irmad and sfa.
        #[arg(long)]
        ridge: Option<f64>,
        /// Chi-square confidence for irmad and sfa.
        #[arg(long)]
        confidence: Option<f64>,
        #[arg(long)]
        label: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate methods over a labeled dataset (`A/`, `B/`, `label/`).
    Eval {
        #[arg(long)]
        root: PathBuf,
        /// Comma-separated: pucd, pucd-nosam, cva, pcakmeans, irmad, sfa, or `all`.
        #[arg(long, default_value = "all")]
        method: String,
        /// Directory for masks, table.txt, metrics.json and samples.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn base_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::from_env()?,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn finish_config(mut cfg: PipelineConfig, flags: &[(&str, Option<String>)], args: &ConfigArgs) -> Result<PipelineConfig> {
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn path_string(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn print_metrics(name: &str, mask: &ChangeMask, label: &Path) -> Result<()> {
    let gt = ChangeMask::load(label)?;
    let cm = confusion(mask, &gt)?;
    let row = MethodRow {
        method: name.to_string(),
        metrics: class_metrics(&cm)?,
        confusion: cm,
        samples: 1,
        failed: 0,
    };
    print!("{}", render_table(&[row]));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect {
            pre,
            post,
            prototype,
            prototype_source,
            chip,
            chip_mask,
            anchor,
            backend,
            segments,
            segments_post,
            label,
            out,
            report,
            dump_intermediate,
            cfg,
        } => {
            let mut flags: Vec<(&str, Option<String>)> = Vec::new();
            match (prototype.as_deref(), &chip) {
                (Some(_), Some(_)) => bail!("--prototype and --chip are mutually exclusive"),
                (Some("random"), None) => flags.push(("prototype.kind", Some("random".into()))),
                (Some(mask), None) => {
                    flags.push(("prototype.kind", Some("mask".into())));
                    flags.push(("prototype.mask", Some(mask.into())));
                }
                (None, Some(_)) => {
                    flags.push(("prototype.kind", Some("external".into())));
                    flags.push(("prototype.chip", path_string(&chip)));
                    flags.push(("prototype.mask", path_string(&chip_mask)));
                    flags.push(("prototype.anchor", anchor.clone()));
                }
                (None, None) => {}
            }
            flags.push(("prototype.source", prototype_source));
            match backend.as_deref() {
                Some("stats") => flags.push(("backend.kind", Some("stats".into()))),
                Some(model) => flags.push(("backend.model", Some(model.into()))),
                None => {}
            }
            match segments.as_deref() {
                Some("builtin") => flags.push(("segments.kind", Some("builtin".into()))),
                Some(file) => flags.push(("segments.pre", Some(file.into()))),
                None => {}
            }
            flags.push(("segments.post", path_string(&segments_post)));
            let config = finish_config(base_config(&cfg)?, &flags, &cfg)?;

            let pair = load_pair(&pre, &post)?;
            let mut det = detect(&pair, &config)?;
            det.mask
                .save(&out, pair.pre().geo())
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(dir) = &dump_intermediate {
                dump_intermediates(&det, dir)?;
            }
            if let Some(label) = &label {
                let gt = ChangeMask::load(label)?;
                det.report.attach_metrics(&det.mask, &det.coarse_mask, &gt)?;
                print_metrics("pucd", &det.mask, label)?;
            }
            if let Some(path) = &report {
                std::fs::write(path, det.report.to_json()?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            eprintln!(
                "{} changed pixels ({} coarse) written to {}",
                det.report.changed_pixels,
                det.report.coarse_changed_pixels,
                out.display()
            );
        }
        Command::Baseline {
            method,
            pre,
            post,
            out,
            block,
            components,
            max_iter,
            eps,
            ridge,
            confidence,
            label,
            cfg,
        } => {
            let m = BaselineMethod::parse(&method)?;
            let flags: Vec<(&str, Option<String>)> = vec![
                ("pcakmeans.block", block.map(|v| v.to_string())),
                ("pcakmeans.components", components.map(|v| v.to_string())),
                ("irmad.max_iter", max_iter.map(|v| v.to_string())),
                ("irmad.eps", eps.map(|v| v.to_string())),
                ("irmad.ridge", ridge.map(|v| v.to_string())),
                ("sfa.ridge", ridge.map(|v| v.to_string())),
                ("irmad.confidence", confidence.map(|v| v.to_string())),
                ("sfa.confidence", confidence.map(|v| v.to_string())),
            ];
            let config = finish_config(base_config(&cfg)?, &flags, &cfg)?;
            let mut params = config.baselines;
            params.pca_kmeans.seed = config.stage_seed("pcakmeans");
            let pair = load_pair(&pre, &post)?;
            let result = run_baseline(m, &pair, &params)?;
            result
                .mask
                .save(&out, pair.pre().geo())
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(label) = &label {
                print_metrics(m.name(), &result.mask, label)?;
            }
            eprintln!("{} changed pixels written to {}", result.mask.count_changed(), out.display());
        }
        Command::Eval {
            root,
            method,
            out,
            workers,
            cfg,
        } => {
            let flags = vec![("eval.workers", workers.map(|w| w.to_string()))];
            let config = finish_config(base_config(&cfg)?, &flags, &cfg)?;
            let options = EvalOptions {
                methods: Method::parse_list(&method)?,
                out_dir: out,
            };
            let report = evaluate(&root, &config, &options)?;
            print!("{}", report.render_table());
            let failures: Vec<_> = report.failures().collect();
            for f in &failures {
                eprintln!("failed: {} / {}: {}", f.method, f.id, f.error.as_deref().unwrap_or(""));
            }
            if !failures.is_empty() {
                eprintln!("{} sample runs failed", failures.len());
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
