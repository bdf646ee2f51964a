//! The `plotwise` command line: argument parsing, command dispatch and the
//! exported report bundle.
//!
//! Exit codes are a stable contract: [`EXIT_OK`], [`EXIT_USAGE`] for
//! malformed invocations and [`EXIT_ANALYSIS`] for structured analysis
//! errors, which are also written to standard error as a one-line JSON
//! object `{"error": kind, "message": text}`.

mod bundle;
mod json;
mod plots;
mod report;
mod tables;

pub use bundle::{build_bundle, Bundle, BundleFile};

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use plotwise::fixtures::{builtin_dataset, builtin_design, BUILTIN_NAMES};
use plotwise::{grouped_analyze, load_table, parse_design, validate_against_data, AnalysisOptions, Dataset, DesignSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ANALYSIS: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "plotwise",
    version,
    about = "Design-driven analysis of designed agricultural experiments",
    long_about = "Compiles a declared experimental design into its linear model, runs the \
                  stratified ANOVA, restricts post-hoc comparisons to the admissible effects, \
                  checks model assumptions and writes a recommendation with a full report bundle.\n\n\
                  Exit status: 0 on success, 1 on a usage error, 2 on an analysis error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full analysis and optionally export a report bundle
    Analyze(AnalyzeArgs),
    /// Check a design document against a data table without analysing it
    Validate(InputArgs),
    /// List or print the built-in example datasets
    Datasets {
        #[command(subcommand)]
        action: DatasetsAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetsAction {
    /// Print the names of the built-in datasets
    List,
    /// Print one built-in dataset as comma-delimited text
    Show {
        /// Dataset name, e.g. `crd`
        name: String,
    },
}

#[derive(Debug, Clone, Default, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "dataset"])))]
pub struct InputArgs {
    /// Long-format comma-delimited table with a header row
    #[arg(long, value_name = "PATH", requires = "design")]
    pub data: Option<PathBuf>,
    /// Design document; with --dataset it replaces the built-in design
    #[arg(long, value_name = "PATH")]
    pub design: Option<PathBuf>,
    /// Built-in dataset (see `plotwise datasets list`)
    #[arg(long, value_name = "NAME")]
    pub dataset: Option<String>,
    /// Analyse every combination of these columns independently
    #[arg(long, value_name = "COL[,COL]", value_delimiter = ',')]
    pub groups: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Human-readable report
    #[default]
    Text,
    /// ANOVA table as comma-delimited text
    Csv,
    /// Full analysis as JSON
    Structured,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Significance level for effect tests and comparisons
    #[arg(long, value_name = "F", value_parser = probability)]
    pub alpha: Option<f64>,
    /// Rejection level for the assumption checks
    #[arg(long = "alpha-v", value_name = "F", value_parser = probability)]
    pub alpha_v: Option<f64>,
    /// Write the report bundle into this directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Smaller responses are better (e.g. disease severity)
    #[arg(long)]
    pub minimize: bool,
    /// What to print on standard output
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

fn probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not strictly between 0 and 1"))
    }
}

/// Writes `{"error": kind, "message": message}` as one line.
pub fn write_error(err: &mut dyn Write, kind: &str, message: &str) {
    let v = serde_json::json!({ "error": kind, "message": message });
    let _ = writeln!(err, "{v}");
}

fn engine_error(err: &mut dyn Write, e: &plotwise::Error) -> i32 {
    write_error(err, e.kind(), &e.to_string());
    EXIT_ANALYSIS
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            write_error(err, "UsageError", e.render().to_string().trim_end());
            return EXIT_USAGE;
        }
    };
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&a, out, err),
        Command::Validate(i) => cmd_validate(&i, out, err),
        Command::Datasets { action } => cmd_datasets(&action, out, err),
    }
}

fn read_file(path: &Path) -> plotwise::Result<String> {
    std::fs::read_to_string(path).map_err(|e| plotwise::Error::Io(format!("{}: {e}", path.display())))
}

/// Resolves the design and data named by the input flags.
pub fn load_inputs(input: &InputArgs) -> plotwise::Result<(DesignSpec, Dataset)> {
    let (mut spec, data) = match (&input.dataset, &input.data) {
        (Some(name), _) => {
            let data = builtin_dataset(name)?;
            let spec = match &input.design {
                Some(p) => parse_design(&read_file(p)?)?,
                None => builtin_design(name)?,
            };
            (spec, data)
        }
        (None, Some(path)) => {
            let design = input
                .design
                .as_ref()
                .ok_or_else(|| plotwise::Error::Schema("--data needs --design".into()))?;
            let spec = parse_design(&read_file(design)?)?;
            let text = read_file(path)?;
            (spec, load_table(text.as_bytes())?)
        }
        (None, None) => return Err(plotwise::Error::Schema("no input given".into())),
    };
    if let Some(groups) = &input.groups {
        spec.group_factors = groups.iter().map(|g| g.trim().to_string()).collect();
        spec.check()?;
    }
    Ok((spec, data))
}

/// `plotwise analyze`: runs the pipeline on every group, prints the chosen
/// format and writes the bundle when `--out` is given.
pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (spec, data) = match load_inputs(&args.input) {
        Ok(v) => v,
        Err(e) => return engine_error(err, &e),
    };
    let options = AnalysisOptions {
        alpha: args.alpha,
        alpha_v: args.alpha_v,
        minimize: args.minimize,
    };
    let results = match grouped_analyze(&spec, &data, &options) {
        Ok(r) => r,
        Err(e) => return engine_error(err, &e),
    };
    let grouped = !spec.group_factors.is_empty();
    if !grouped {
        if let Err(e) = &results[0].result {
            return engine_error(err, e);
        }
    }

    let mut failed = false;
    for g in &results {
        match &g.result {
            Ok(a) => {
                if grouped && args.format != Format::Structured {
                    let _ = writeln!(out, "== {} ==", g.label);
                }
                let text = match args.format {
                    Format::Text => report::report_text(a),
                    Format::Csv => tables::anova_csv(a),
                    Format::Structured => {
                        let mut v = json::analysis_json(a);
                        if grouped {
                            v = serde_json::json!({ "group": g.label, "analysis": v });
                        }
                        format!("{}\n", serde_json::to_string_pretty(&v).expect("serialisable"))
                    }
                };
                let _ = write!(out, "{text}");
            }
            Err(e) => {
                failed = true;
                write_error(err, e.kind(), &format!("group {}: {e}", g.label));
            }
        }
    }

    if let Some(dir) = &args.out {
        let bundle = build_bundle(&results);
        if let Err(e) = bundle.write_to(dir) {
            write_error(err, "IoError", &format!("{}: {e}", dir.display()));
            return EXIT_ANALYSIS;
        }
    }
    if failed {
        EXIT_ANALYSIS
    } else {
        EXIT_OK
    }
}

/// `plotwise validate`: checks the design against the data and prints the
/// compiled model with its error strata.
pub fn cmd_validate(input: &InputArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (spec, data) = match load_inputs(input) {
        Ok(v) => v,
        Err(e) => return engine_error(err, &e),
    };
    let parts = if spec.group_factors.is_empty() {
        vec![(String::new(), data)]
    } else {
        match plotwise::partition(&data, &spec.group_factors) {
            Ok(p) => (0..p.len()).map(|i| (p.label(i), p.subsets[i].clone())).collect(),
            Err(e) => return engine_error(err, &e),
        }
    };
    let mut code = EXIT_OK;
    for (label, subset) in &parts {
        if !label.is_empty() {
            let _ = writeln!(out, "== {label} ==");
        }
        match validate_against_data(&spec, subset) {
            Ok(d) => {
                let _ = write!(out, "{}", report::design_summary(&d));
            }
            Err(e) => {
                let msg = if label.is_empty() {
                    e.to_string()
                } else {
                    format!("group {label}: {e}")
                };
                write_error(err, e.kind(), &msg);
                code = EXIT_ANALYSIS;
            }
        }
    }
    code
}

/// `plotwise datasets list|show NAME`.
pub fn cmd_datasets(action: &DatasetsAction, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match action {
        DatasetsAction::List => {
            for name in BUILTIN_NAMES {
                let _ = writeln!(out, "{name}");
            }
            EXIT_OK
        }
        DatasetsAction::Show { name } => match builtin_dataset(name) {
            Ok(d) => {
                let _ = write!(out, "{}", d.to_csv());
                EXIT_OK
            }
            Err(e) => engine_error(err, &e),
        },
    }
}
