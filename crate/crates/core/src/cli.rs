//! `fastvid` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::compare::{compare_dump, CompareReport, Fault};
use crate::flops::{preset, tflops, total_flops};
use crate::io::{
    parse_scenes, read_dump, synth_video, write_dump, write_result, ResultFormat, Scene,
    SynthDims,
};
use crate::stprune::{verify_result, Merger, Pipeline, Segmenter};
use crate::types::{AttentionSource, ModelShape, PruneConfig, RoundingPolicy};

#[derive(Debug, Parser)]
#[command(name = "fastvid", version, about = "Video token pruning toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prune one or more FVTD dumps.
    Prune(PruneArgs),
    /// Print prefill TFLOPs for a list of token counts.
    Flops(FlopsArgs),
    /// Write a synthetic FVTD dump.
    Synth(SynthArgs),
    /// Check fast paths against the brute-force oracles.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SegmenterArg {
    Dyseg,
    Fixed,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergerArg {
    Density,
    Uniform,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttentionArg {
    Auto,
    Cls,
    MeanToken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameFeatureArg {
    /// Use the dump's frame features.
    Input,
    /// Replace them with the mean of each frame's tokens.
    MeanTokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoundingArg {
    Ats,
    Dtm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    Density,
    Topk,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    /// Retention ratio.
    #[arg(long = "r", default_value_t = 0.1)]
    pub retention: f64,
    /// Share of the budget given to density-based merging.
    #[arg(long = "d", default_value_t = 0.4)]
    pub dtm_fraction: f64,
    /// Anchor frame interval.
    #[arg(long = "p", default_value_t = 4)]
    pub anchor_interval: usize,
    /// Anchor weight when merging.
    #[arg(long, default_value_t = 0.6)]
    pub beta: f64,
    /// Minimum number of segments.
    #[arg(long = "c", default_value_t = 8)]
    pub min_segments: usize,
    /// Transition similarity threshold.
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    pub tau: f64,
    /// Neighbour count for local density (default ceil(sqrt(N))).
    #[arg(long)]
    pub knn: Option<usize>,
    #[arg(long, value_enum, default_value_t = RoundingArg::Ats)]
    pub rounding: RoundingArg,
    #[arg(long, value_enum, default_value_t = AttentionArg::Auto)]
    pub attention: AttentionArg,
}

impl HyperArgs {
    pub fn config(&self) -> PruneConfig {
        PruneConfig {
            min_segments: self.min_segments,
            transition_threshold: self.tau,
            retention_ratio: self.retention,
            dtm_fraction: self.dtm_fraction,
            anchor_interval: self.anchor_interval,
            merge_weight: self.beta,
            knn_k: self.knn,
            rounding_policy: match self.rounding {
                RoundingArg::Ats => RoundingPolicy::RemainderToAts,
                RoundingArg::Dtm => RoundingPolicy::RemainderToDtm,
            },
            attention_source: match self.attention {
                AttentionArg::Auto => AttentionSource::Auto,
                AttentionArg::Cls => AttentionSource::Cls,
                AttentionArg::MeanToken => AttentionSource::MeanToken,
            },
            ..PruneConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Input FVTD file; repeat for several.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Result path for a single input, output directory for several.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, value_enum, default_value_t = SegmenterArg::Dyseg)]
    pub segmenter: SegmenterArg,
    /// Segment length for `--segmenter fixed`.
    #[arg(long, default_value_t = 4)]
    pub fixed_interval: usize,
    /// Cluster count for `--segmenter cluster` (default: --c).
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, value_enum, default_value_t = MergerArg::Density)]
    pub merger: MergerArg,
    #[arg(long, value_enum, default_value_t = FrameFeatureArg::Input)]
    pub frame_features: FrameFeatureArg,
    /// Also write an SVG rendering next to the result.
    #[arg(long)]
    pub emit_svg: bool,
    /// Also write a JSON stats summary next to the result.
    #[arg(long)]
    pub stats_json: bool,
    /// Files processed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Parallelize work inside each file.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct FlopsArgs {
    #[arg(long, default_value = "qwen2-7b")]
    pub preset: String,
    /// Custom shape `hidden,ffn,kv_heads,head_dim,layers`; overrides --preset.
    #[arg(long)]
    pub shape: Option<String>,
    /// Comma-separated token counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub tokens: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene list `LEN:LABEL[:SPREAD],...`.
    #[arg(long)]
    pub scenes: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Token grid `HxW`.
    #[arg(long, default_value = "14x14")]
    pub grid: String,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 64)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub attn_scale: usize,
    #[arg(long, default_value_t = 3)]
    pub objects: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Dump to check.
    #[arg(long, conflicts_with = "random")]
    pub input: Option<PathBuf>,
    /// Check this many seeded synthetic dumps instead.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, hide = true, value_enum)]
    pub inject_fault: Option<FaultArg>,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Run a parsed command. `Ok(false)` means the command ran but a check failed.
pub fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Prune(args) => cmd_prune(&args),
        Command::Flops(args) => cmd_flops(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Compare(args) => cmd_compare(&args),
    }
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn prune_one(args: &PruneArgs, pipeline: &Pipeline, input: &Path, out: &Path) -> anyhow::Result<bool> {
    let mut dump = read_dump(input).with_context(|| format!("reading {}", input.display()))?;
    if args.frame_features == FrameFeatureArg::MeanTokens {
        dump = dump.with_mean_token_features();
    }
    let start = Instant::now();
    let (result, timings) = pipeline
        .run_timed(&dump)
        .with_context(|| format!("pruning {}", input.display()))?;
    let total = start.elapsed();

    write_result(&result, out, ResultFormat::Binary)
        .with_context(|| format!("writing {}", out.display()))?;
    if args.stats_json {
        let path = sibling(out, "json");
        write_result(&result, &path, ResultFormat::JsonStats)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if args.emit_svg {
        let path = sibling(out, "svg");
        write_result(&result, &path, ResultFormat::Svg)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let s = &result.stats;
    println!(
        "{}: retained {}/{} ({:.4}) dtm {} ats {} segments {} | segmentation {:.3} ms, compression {:.3} ms, total {:.3} ms",
        input.display(),
        s.retained,
        s.total_tokens,
        s.retention_ratio,
        s.dtm_count,
        s.ats_count,
        s.segments,
        timings.segmentation.as_secs_f64() * 1e3,
        timings.compression.as_secs_f64() * 1e3,
        total.as_secs_f64() * 1e3,
    );
    let problems = verify_result(&result, &pipeline.config);
    for p in &problems {
        eprintln!("{}: invariant violated: {p}", input.display());
    }
    Ok(problems.is_empty())
}

fn cmd_prune(args: &PruneArgs) -> anyhow::Result<bool> {
    let config = args.hyper.config();
    config.validate()?;
    let segmenter = match args.segmenter {
        SegmenterArg::Dyseg => Segmenter::DySeg,
        SegmenterArg::Fixed => Segmenter::FixedInterval(args.fixed_interval),
        SegmenterArg::Cluster => Segmenter::Cluster(args.clusters.unwrap_or(config.min_segments)),
    };
    let merger = match args.merger {
        MergerArg::Density => Merger::Density,
        MergerArg::Uniform => Merger::Uniform,
        MergerArg::Cluster => Merger::Cluster,
    };
    let pipeline = Pipeline::new(config)
        .with_strategy(segmenter, merger)
        .parallel(args.parallel);

    if args.input.len() == 1 {
        return prune_one(args, &pipeline, &args.input[0], &args.out);
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let jobs = args.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let outcomes: Vec<anyhow::Result<bool>> = pool.install(|| {
        args.input
            .par_iter()
            .map(|input| {
                let stem = input.file_stem().unwrap_or_default();
                let out = args.out.join(stem).with_extension("fvpr");
                prune_one(args, &pipeline, input, &out)
            })
            .collect()
    });
    let mut ok = true;
    for (input, outcome) in args.input.iter().zip(outcomes) {
        match outcome {
            Ok(passed) => ok &= passed,
            Err(err) => {
                eprintln!("{}: error: {err:#}", input.display());
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn parse_shape(spec: &str) -> anyhow::Result<ModelShape> {
    let v: Vec<usize> = spec
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("shape `{spec}`"))?;
    let [d, ffn, kv, hd, layers] = v[..] else {
        bail!("shape `{spec}` must have 5 fields: hidden,ffn,kv_heads,head_dim,layers");
    };
    Ok(ModelShape::new(d, ffn, kv, hd, layers)?)
}

fn cmd_flops(args: &FlopsArgs) -> anyhow::Result<bool> {
    let shape = match &args.shape {
        Some(s) => parse_shape(s)?,
        None => preset(&args.preset)?,
    };
    let base = total_flops(*args.tokens.iter().max().unwrap_or(&0), &shape);
    println!("{:>10}  {:>10}  {:>8}", "tokens", "TFLOPs", "relative");
    for &n in &args.tokens {
        let flops = total_flops(n, &shape);
        let rel = if base > 0.0 { 100.0 * flops / base } else { 0.0 };
        println!("{n:>10}  {:>10.2}  {rel:>7.1}%", tflops(flops));
    }
    Ok(true)
}

fn parse_grid(grid: &str) -> anyhow::Result<(usize, usize)> {
    let (h, w) = grid
        .split_once(['x', 'X'])
        .with_context(|| format!("grid `{grid}` is not HxW"))?;
    Ok((h.trim().parse()?, w.trim().parse()?))
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<bool> {
    let scenes = parse_scenes(&args.scenes)?;
    let (grid_h, grid_w) = parse_grid(&args.grid)?;
    let dims = SynthDims {
        grid_h,
        grid_w,
        token_dim: args.dim,
        feature_dim: args.feature_dim,
        attn_scale: args.attn_scale,
        objects: args.objects,
    };
    let dump = synth_video(&scenes, args.seed, dims)?;
    write_dump(&dump, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} ({} frames, {} tokens/frame, dim {})",
        args.out.display(),
        dump.frames(),
        dump.tokens_per_frame(),
        dump.token_dim()
    );
    Ok(true)
}

/// A random scene list and grid for compare runs.
fn random_dump(rng: &mut ChaCha8Rng, seed: u64) -> crate::Result<crate::TokenDump> {
    let scene_count = rng.gen_range(1..=4);
    let scenes: Vec<Scene> = (0..scene_count)
        .map(|i| {
            Scene::new(
                rng.gen_range(1..=6),
                format!("s{}", rng.gen_range(0..=i)),
                rng.gen_range(0.0..0.5),
            )
        })
        .collect();
    let dims = SynthDims {
        grid_h: rng.gen_range(2..=8),
        grid_w: rng.gen_range(2..=8),
        token_dim: rng.gen_range(1..=16),
        feature_dim: rng.gen_range(2..=16),
        attn_scale: rng.gen_range(1..=3),
        objects: rng.gen_range(0..=3),
    };
    synth_video(&scenes, seed, dims)
}

fn print_report(label: &str, report: &CompareReport) {
    println!(
        "{label}: frames {} density max rel {:.3e} ranking mismatches {} top-k {}/{} mismatched pool max rel {:.3e} segmentation {} => {}",
        report.frames_checked,
        report.density_max_rel,
        report.ranking_mismatches,
        report.topk_mismatches,
        report.topk_checks,
        report.pool_max_rel,
        if report.segmentation_ok { "ok" } else { "MISMATCH" },
        if report.passed() { "PASS" } else { "FAIL" },
    );
}

fn cmd_compare(args: &CompareArgs) -> anyhow::Result<bool> {
    let config = args.hyper.config();
    config.validate()?;
    let fault = args.inject_fault.map(|f| match f {
        FaultArg::Density => Fault::DensityDrift,
        FaultArg::Topk => Fault::TopKShift,
    });
    if let Some(path) = &args.input {
        let dump = read_dump(path).with_context(|| format!("reading {}", path.display()))?;
        let report = compare_dump(&dump, &config, fault)?;
        print_report(&path.display().to_string(), &report);
        return Ok(report.passed());
    }
    let count = args.random.unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut total = CompareReport {
        segmentation_ok: true,
        ..Default::default()
    };
    let mut failures = 0;
    for i in 0..count {
        let dump_seed = rng.gen();
        let dump = random_dump(&mut rng, dump_seed)?;
        let report = compare_dump(&dump, &config, fault)?;
        if !report.passed() {
            failures += 1;
            print_report(&format!("dump {i} (seed {dump_seed})"), &report);
        }
        total.merge(&report);
    }
    print_report(&format!("{count} dumps, {failures} failed"), &total);
    Ok(failures == 0)
}
