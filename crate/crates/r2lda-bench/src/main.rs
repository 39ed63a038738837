use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use r2lda::datasets::{gen_synthetic, load_csv, load_idx, ttest_select, Dataset, SyntheticSpec};
use r2lda_bench::config::{load_manifest_dataset, ExperimentConfig};
use r2lda_bench::report::emit_csv;
use r2lda_bench::runner::{run_experiment, emit_metadata};

#[derive(Parser)]
#[command(name = "r2lda-bench", about = "Benchmark harness for the r2lda classifier family")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for trial parallelism (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Generate a synthetic Gaussian dataset and write it as CSV.
    GenSynthetic(GenSyntheticArgs),
    /// Print a summary of a dataset (manifest, CSV, or IDX pair).
    InspectDataset(InspectArgs),
    /// Rank features by Welch t-test p-value and print the selected indices.
    SelectFeatures(SelectFeaturesArgs),
}

#[derive(Args)]
struct GenSyntheticArgs {
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 9.0)]
    delta2: f64,
    #[arg(long, default_value_t = 0.1)]
    offdiag: f64,
    #[arg(long, default_value_t = 50)]
    n0: usize,
    #[arg(long, default_value_t = 50)]
    n1: usize,
    #[arg(long, default_value_t = 500)]
    test_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    /// Dataset manifest (TOML).
    #[arg(long, conflicts_with_all = ["csv", "idx_images"])]
    manifest: Option<PathBuf>,
    /// CSV table to inspect directly.
    #[arg(long, requires = "label_column")]
    csv: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    positive_label: Option<String>,
    #[arg(long)]
    negative_label: Option<String>,
    /// IDX image file (pairs with --idx-labels and --digits).
    #[arg(long, requires_all = ["idx_labels", "digits"])]
    idx_images: Option<PathBuf>,
    #[arg(long)]
    idx_labels: Option<PathBuf>,
    /// Digit pair, e.g. "1,7".
    #[arg(long)]
    digits: Option<String>,
}

#[derive(Args)]
struct SelectFeaturesArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    label_column: String,
    #[arg(long)]
    positive_label: String,
    #[arg(long)]
    negative_label: Option<String>,
    #[arg(long)]
    k: usize,
    /// Write the selected indices here (one per line) instead of stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out, threads } => cmd_run(config, seed, out, threads),
        Command::GenSynthetic(args) => cmd_gen_synthetic(args),
        Command::InspectDataset(args) => cmd_inspect(args),
        Command::SelectFeatures(args) => cmd_select_features(args),
    }
}

fn cmd_run(
    config_path: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> anyhow::Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("thread pool already initialized")?;
    }
    let mut cfg = ExperimentConfig::load(&config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(o) = out {
        cfg.output = o;
    }

    let outcome = run_experiment(&cfg)?;
    emit_csv(&outcome.reports, &cfg.output)?;
    emit_metadata(&cfg, &outcome)?;

    println!(
        "wrote {} cells to {} ({} failures)",
        outcome.reports.len(),
        cfg.output.display(),
        outcome.failures.len()
    );
    for f in &outcome.failures {
        eprintln!(
            "cell failed: {} {} n={} sigma={}: {}",
            f.classifier, f.selector, f.n_per_class, f.sigma, f.message
        );
    }
    Ok(())
}

fn cmd_gen_synthetic(args: GenSyntheticArgs) -> anyhow::Result<()> {
    let spec = SyntheticSpec {
        p: args.p,
        delta2: args.delta2,
        offdiag: args.offdiag,
        n0: args.n0,
        n1: args.n1,
        test_per_class: args.test_per_class,
        seed: args.seed,
        ..Default::default()
    };
    let dataset = gen_synthetic(&spec)?;

    // partition: 0 = train, 1 = test; numeric so the file loads back
    // through the CSV ingestion path
    let mut text = String::new();
    for j in 0..args.p {
        text.push_str(&format!("f{j},"));
    }
    text.push_str("label,partition\n");
    let push_block = |block: ndarray::ArrayView2<'_, f64>, label: usize, partition: usize, text: &mut String| {
        for row in block.rows() {
            for v in row.iter() {
                text.push_str(&format!("{v},"));
            }
            text.push_str(&format!("{label},{partition}\n"));
        }
    };
    push_block(dataset.train.class0(), 0, 0, &mut text);
    push_block(dataset.train.class1(), 1, 0, &mut text);
    push_block(dataset.test0.view(), 0, 1, &mut text);
    push_block(dataset.test1.view(), 1, 1, &mut text);
    std::fs::write(&args.out, text)?;

    println!(
        "wrote {} (p={}, train {}+{}, test {}+{}, seed {})",
        args.out.display(),
        args.p,
        args.n0,
        args.n1,
        args.test_per_class,
        args.test_per_class,
        args.seed
    );
    Ok(())
}

fn summarize(ds: &Dataset) {
    println!("name: {}", ds.meta.name);
    println!("source: {}", ds.meta.source);
    println!("dimension: {}", ds.dim());
    println!("train: n0={} n1={}", ds.train.n0(), ds.train.n1());
    println!("test: n0={} n1={}", ds.test0.nrows(), ds.test1.nrows());
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in ds.train.class0().iter().chain(ds.train.class1().iter()) {
        min = min.min(v);
        max = max.max(v);
    }
    println!("train entry range: [{min}, {max}]");
    match &ds.meta.scaling {
        Some(rec) => println!("scaling record: min={} max={}", rec.min, rec.max),
        None => println!("scaling record: none"),
    }
}

fn cmd_inspect(args: InspectArgs) -> anyhow::Result<()> {
    let ds = if let Some(manifest) = &args.manifest {
        load_manifest_dataset(manifest)?
    } else if let Some(csv) = &args.csv {
        let label_column = args.label_column.as_deref().context("--label-column required")?;
        let positive = args.positive_label.as_deref().context("--positive-label required")?;
        load_csv(csv, label_column, positive, args.negative_label.as_deref())?
    } else if let Some(images) = &args.idx_images {
        let labels = args.idx_labels.as_ref().context("--idx-labels required")?;
        let digits_text = args.digits.as_ref().context("--digits required")?;
        let parts: Vec<&str> = digits_text.split(',').collect();
        if parts.len() != 2 {
            bail!("--digits expects two comma-separated values, e.g. 1,7");
        }
        let pair = (parts[0].trim().parse()?, parts[1].trim().parse()?);
        load_idx(images, labels, pair)?
    } else {
        bail!("give one of --manifest, --csv, or --idx-images");
    };
    summarize(&ds);
    Ok(())
}

fn cmd_select_features(args: SelectFeaturesArgs) -> anyhow::Result<()> {
    let ds = load_csv(
        &args.csv,
        &args.label_column,
        &args.positive_label,
        args.negative_label.as_deref(),
    )?;
    let selected = ttest_select(&ds.train, args.k)?;
    let joined = selected.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
    println!("{joined}");
    if let Some(out) = &args.out {
        let mut text = String::new();
        for i in &selected {
            text.push_str(&format!("{i}\n"));
        }
        std::fs::write(out, text)?;
    }
    Ok(())
}
