use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use detect_core::report::{
    correlate, emit_plot, export_distribution, parse_distribution, render_rules, render_rules_csv, serialize_dataset,
    PlotOptions,
};
use detect_core::synth::{generate_planted_anomaly, generate_planted_shift, oracle_fit, PlantSpec, DEFAULT_ORACLE_BOUND};
use detect_core::{assign, fit, leaf_distributions, ClusterTree, Dataset, FitConfig, IngestConfig, ObjectiveSpec, SearchMode};

#[derive(Parser)]
#[command(name = "detect", version, about = "Divisive clustering of temporal behaviour records")]
struct Cli {
    /// Suppress the summary on standard output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for fitting (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a cluster tree and write it as JSON.
    Fit(FitArgs),
    /// Label every row with its leaf.
    Assign(ApplyArgs),
    /// Count rows per leaf and time step.
    Distributions(ApplyArgs),
    /// Draw a distribution table as SVG.
    Plot(PlotArgs),
    /// Generate a dataset with a planted trend.
    Synth(SynthArgs),
    /// Pearson correlation with a permutation p-value.
    Correlate(CorrelateArgs),
    /// Compare the fitted tree with the brute-force reference.
    Check(CheckArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Long-format table: student, time, features.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = ",")]
    delimiter: char,
    #[arg(long, default_value = "student")]
    student_column: String,
    #[arg(long, default_value = "time")]
    time_column: String,
    /// Cell text read as missing; repeatable (default: empty cell and NA).
    #[arg(long = "missing")]
    missing_tokens: Vec<String>,
}

impl InputArgs {
    fn load(&self) -> Result<Dataset> {
        if !self.delimiter.is_ascii() {
            bail!("delimiter must be a single ASCII character");
        }
        let mut config = IngestConfig {
            delimiter: self.delimiter as u8,
            student_column: self.student_column.clone(),
            time_column: self.time_column.clone(),
            ..IngestConfig::default()
        };
        if !self.missing_tokens.is_empty() {
            config.missing_tokens = self.missing_tokens.clone();
        }
        let file = fs::File::open(&self.input).with_context(|| format!("cannot open {}", self.input.display()))?;
        detect_core::parse_dataset(file, &config).with_context(|| format!("{}", self.input.display()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveName {
    F1,
    F2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeName {
    Constrained,
    Reject,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Text,
    Csv,
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long, value_enum)]
    objective: ObjectiveName,
    /// One-based anomaly step for f2.
    #[arg(long, required_if_eq("objective", "f2"))]
    x: Option<usize>,
    #[arg(long)]
    min_size: usize,
    #[arg(long, value_enum, default_value = "constrained")]
    mode: ModeName,
    /// Split only when the best score is strictly above this.
    #[arg(long)]
    min_score: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
}

impl TreeArgs {
    fn objective(&self) -> ObjectiveSpec {
        match (self.objective, self.x) {
            (ObjectiveName::F1, None) => ObjectiveSpec::StartEndShift,
            (ObjectiveName::F2, Some(x)) => ObjectiveSpec::AnomalyAt { x },
            (ObjectiveName::F1, Some(_)) => usage(ErrorKind::ArgumentConflict, "--x applies only to --objective f2"),
            (ObjectiveName::F2, None) => usage(ErrorKind::MissingRequiredArgument, "--objective f2 requires --x"),
        }
    }

    fn config(&self) -> FitConfig {
        FitConfig {
            min_size: self.min_size,
            mode: match self.mode {
                ModeName::Constrained => SearchMode::Constrained,
                ModeName::Reject => SearchMode::Reject,
            },
            min_score: self.min_score,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    tree: TreeArgs,
    /// Tree file to write.
    #[arg(long)]
    out: PathBuf,
    /// Rule table format in the summary.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct ApplyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    distributions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Time identifier to shade.
    #[arg(long, allow_negative_numbers = true)]
    mark: Option<i64>,
    #[arg(long)]
    title: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlantName {
    Shift,
    Anomaly,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "shift")]
    kind: PlantName,
    #[arg(long, default_value_t = 40)]
    students: usize,
    #[arg(long, default_value_t = 6)]
    times: usize,
    /// One-based shift boundary or anomaly step.
    #[arg(long, default_value_t = 4)]
    at: usize,
    #[arg(long, default_value_t = 0.75)]
    fraction: f64,
    #[arg(long, default_value_t = 3)]
    noise: usize,
    #[arg(long, default_value = "signal")]
    signal: String,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.0, 1.0], allow_negative_numbers = true)]
    band_low: Vec<f64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [2.0, 3.0], allow_negative_numbers = true)]
    band_high: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset file; ground truth goes to `<out>.truth`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    /// File of numbers separated by commas or whitespace.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 9999)]
    permutations: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    tree: TreeArgs,
    /// Largest cluster the reference search will take.
    #[arg(long, default_value_t = DEFAULT_ORACLE_BOUND)]
    bound: usize,
}

fn usage(kind: ErrorKind, message: &str) -> ! {
    Cli::command().error(kind, message).exit()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn read_tree(path: &Path) -> Result<ClusterTree> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    ClusterTree::from_json(&text).with_context(|| format!("{}: not a tree file", path.display()))
}

fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse::<f64>()
                .with_context(|| format!("{}: value {} ('{t}') is not a number", path.display(), i + 1))
        })
        .collect()
}

fn run_fit(args: &FitArgs, quiet: bool) -> Result<()> {
    let objective = args.tree.objective();
    let config = args.tree.config();
    let data = args.input.load()?;
    let tree = fit(&data, &objective, &config)?;
    write(&args.out, &tree.to_canonical_json())?;
    if !quiet {
        match args.format {
            Format::Text => {
                println!(
                    "objective {}, min_size {}, mode {}",
                    tree.objective,
                    config.min_size,
                    args.tree.mode.to_possible_value().unwrap().get_name()
                );
                println!(
                    "{} rows, {} students, {} steps -> {} leaves, depth {}",
                    data.len(),
                    data.num_students(),
                    data.num_steps(),
                    tree.leaves().len(),
                    tree.depth()
                );
                print!("{}", render_rules(&tree));
            }
            Format::Csv => print!("{}", render_rules_csv(&tree)),
        }
    }
    Ok(())
}

fn run_assign(args: &ApplyArgs, quiet: bool) -> Result<()> {
    let data = args.input.load()?;
    let tree = read_tree(&args.tree)?;
    let labels = assign(&tree, &data)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["student", "time", "leaf"])?;
    for (row, label) in data.rows().iter().zip(&labels) {
        w.write_record([row.student.as_str(), &data.times()[row.step].to_string(), label])?;
    }
    write(&args.out, std::str::from_utf8(&w.into_inner()?)?)?;
    if !quiet {
        println!("assigned {} rows to {} leaves", labels.len(), tree.leaves().len());
    }
    Ok(())
}

fn run_distributions(args: &ApplyArgs, quiet: bool) -> Result<()> {
    let data = args.input.load()?;
    let tree = read_tree(&args.tree)?;
    let table = leaf_distributions(&tree, &data)?;
    let text = export_distribution(&table);
    write(&args.out, &text)?;
    if !quiet {
        print!("{text}");
    }
    Ok(())
}

fn run_plot(args: &PlotArgs, quiet: bool) -> Result<()> {
    let path = &args.distributions;
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let table = parse_distribution(&text).with_context(|| format!("{}", path.display()))?;
    if let Some(m) = args.mark {
        if !table.times.contains(&m) {
            bail!("--mark {m} is not a time in {}", path.display());
        }
    }
    let options = PlotOptions {
        title: args.title.clone(),
        mark: args.mark,
        x_label: Some("time".into()),
        y_label: Some("rows".into()),
    };
    emit_plot(&table, &args.out, &options).with_context(|| format!("cannot write {}", args.out.display()))?;
    if !quiet {
        println!("plotted {} leaves over {} steps", table.leaves.len(), table.times.len());
    }
    Ok(())
}

fn run_synth(args: &SynthArgs, quiet: bool) -> Result<()> {
    let spec = PlantSpec {
        students: args.students,
        times: args.times,
        signal_feature: args.signal.clone(),
        noise_features: args.noise,
        at: args.at,
        affected_fraction: args.fraction,
        band_low: (args.band_low[0], args.band_low[1]),
        band_high: (args.band_high[0], args.band_high[1]),
        seed: args.seed,
    };
    let (data, truth) = match args.kind {
        PlantName::Shift => generate_planted_shift(&spec)?,
        PlantName::Anomaly => generate_planted_anomaly(&spec)?,
    };
    let mut truth_path = args.out.clone().into_os_string();
    truth_path.push(".truth");
    write(&args.out, &serialize_dataset(&data))?;
    write(Path::new(&truth_path), &truth.to_text())?;
    if !quiet {
        println!(
            "{} rows; {} of {} students planted at step {}",
            data.len(),
            truth.affected,
            args.students,
            truth.at
        );
    }
    Ok(())
}

fn run_correlate(args: &CorrelateArgs, quiet: bool) -> Result<()> {
    let a = read_series(&args.a)?;
    let b = read_series(&args.b)?;
    let c = correlate(&a, &b, args.permutations, args.seed)?;
    if !quiet {
        match args.format {
            Format::Text => println!("r = {}\np = {} ({} permutations, seed {})", c.r, c.p, c.permutations, args.seed),
            Format::Csv => println!("r,p,permutations,seed\n{},{},{},{}", c.r, c.p, c.permutations, args.seed),
        }
    }
    Ok(())
}

fn run_check(args: &CheckArgs, quiet: bool) -> Result<()> {
    let objective = args.tree.objective();
    let config = args.tree.config();
    let data = args.input.load()?;
    let fast = fit(&data, &objective, &config)?.to_canonical_json();
    let slow = oracle_fit(&data, &objective, &config, args.bound)?.to_canonical_json();
    if fast != slow {
        bail!("fit and the reference search disagree on {}", args.input.input.display());
    }
    if !quiet {
        let tree = ClusterTree::from_json(&fast)?;
        println!(
            "fit matches the reference search: {} nodes, {} leaves",
            tree.nodes().len(),
            tree.leaves().len()
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::Fit(a) => run_fit(a, quiet),
        Command::Assign(a) => run_assign(a, quiet),
        Command::Distributions(a) => run_distributions(a, quiet),
        Command::Plot(a) => run_plot(a, quiet),
        Command::Synth(a) => run_synth(a, quiet),
        Command::Correlate(a) => run_correlate(a, quiet),
        Command::Check(a) => run_check(a, quiet),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => detect_core::with_threads(n, || run(&cli)),
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
