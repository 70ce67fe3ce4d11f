//! The `igb-lab` command line: `init-bias`, `train`, `grad-check`, `plot`.
//!
//! Exit codes: 0 success, 1 gradient check above tolerance, 2 configuration
//! or input-format error, 3 I/O error, 4 numeric failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ExperimentConfig;
use crate::csvlog::{read_rows, CsvRow, CsvRunWriter};
use crate::diagnostics::{igb_report, IgbReport};
use crate::error::{Error, Result};
use crate::losses::{grad_check, GradCheckReport, LossSpec};
use crate::model::MlpModel;
use crate::svg::{bar_chart, LineChart, Series};
use crate::trainer::{train_with, RunLog, StepKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Gradient checks pass below this relative error.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Format(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        Error::Numeric { .. } => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "igb-lab",
    version,
    about = "Initial guessing bias and robust-loss training lab"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure class preference of a freshly initialized model.
    InitBias(RunArgs),
    /// Train and record per-class dynamics to CSV and SVG.
    Train(RunArgs),
    /// Compare analytic logit gradients with finite differences.
    GradCheck(GradCheckArgs),
    /// Redraw the SVG figures from a training CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named preset: ce-paper, bl-paper, pz-paper, igb-probe.
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the model initialization seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Existing output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    Ce,
    Bl,
    Pz,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["ce", "bl", "pz"])]
    pub loss: Vec<LossKind>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.7)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProbColumn {
    Subset,
    Overall,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV written by `train`.
    #[arg(long)]
    pub csv: PathBuf,
    /// Output directory; defaults to the CSV's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Which mean-probability column to draw.
    #[arg(long, value_enum, default_value_t = ProbColumn::Subset)]
    pub prob_column: ProbColumn,
}

/// Parses arguments, runs the command, returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("igb-lab: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::InitBias(args) => {
            let (cfg, out) = resolve(&args)?;
            let report = cmd_init_bias(&cfg, &out)?;
            println!(
                "favoured class {} with argmax share {:.4} (uniform would be {:.4})",
                report.favoured_class,
                report.favoured_share,
                1.0 / report.argmax_share.len() as f64
            );
            Ok(EXIT_OK)
        }
        Command::Train(args) => {
            let (cfg, out) = resolve(&args)?;
            let log = cmd_train(&cfg, &out)?;
            let last = log.records.last().expect("train records at least init");
            println!(
                "{} records; final mean accuracy {:.4}, cross-class spread {:.4}",
                log.records.len(),
                last.metrics.mean_accuracy(),
                last.metrics.overall_spread()
            );
            Ok(EXIT_OK)
        }
        Command::GradCheck(args) => {
            let reports = cmd_grad_check(&args)?;
            let mut ok = true;
            for r in &reports {
                let pass = r.max_relative_error < GRAD_CHECK_TOLERANCE;
                ok &= pass;
                println!("{}", format_grad_report(r, pass));
            }
            Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Plot(args) => {
            let written = cmd_plot(&args)?;
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(EXIT_OK)
        }
    }
}

fn resolve(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => return Err(Error::config("pass --config <path> or --preset <name>")),
    };
    if let Some(seed) = args.seed {
        cfg.model.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    cfg.validate()?;
    Ok((cfg, out))
}

fn require_dir(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", dir.display()),
        )));
    }
    Ok(())
}

/// Writes `init_bias.svg` and `init_bias.json` into `out`.
pub fn cmd_init_bias(cfg: &ExperimentConfig, out: &Path) -> Result<IgbReport> {
    require_dir(out)?;
    let (_, val) = cfg.datasets()?;
    let model = MlpModel::new(cfg.model.clone())?;
    let report = igb_report(&model, &val)?;
    let labels: Vec<String> = (0..report.overall_mean_probs.len())
        .map(|k| k.to_string())
        .collect();
    let svg = bar_chart(
        &format!(
            "Mean predicted probability at initialization (depth {}, seed {})",
            cfg.model.depth, cfg.model.seed
        ),
        "class",
        "mean p(k|x) over validation set",
        &labels,
        &report.overall_mean_probs,
    );
    fs::write(out.join("init_bias.svg"), svg)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(out.join("init_bias.json"), json + "\n")?;
    Ok(report)
}

pub fn run_stem(loss: &LossSpec) -> String {
    format!("train_{}", loss.name().to_lowercase())
}

/// Streams `train_<loss>.csv`; on success also writes both figures (when
/// enabled) and `train_<loss>_model.bin`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<RunLog> {
    require_dir(out)?;
    let (train_set, val_set) = cfg.datasets()?;
    let mut model = MlpModel::new(cfg.model.clone())?;
    let stem = run_stem(&cfg.train.loss);
    let csv_path = out.join(format!("{stem}.csv"));
    let mut writer = CsvRunWriter::new(BufWriter::new(File::create(&csv_path)?))?;
    let log = train_with(&mut model, &train_set, &val_set, &cfg.train, |r| {
        writer.write_record(r)
    })?;
    drop(writer);
    if cfg.plots {
        let rows = read_rows(File::open(&csv_path)?)?;
        write_figures(&rows, ProbColumn::Subset, out, &stem)?;
    }
    let ckpt = BufWriter::new(File::create(out.join(format!("{stem}_model.bin")))?);
    model.write_checkpoint(ckpt)?;
    Ok(log)
}

pub fn cmd_grad_check(args: &GradCheckArgs) -> Result<Vec<GradCheckReport>> {
    if args.trials == 0 {
        return Err(Error::config("--trials must be at least 1"));
    }
    if args.classes < 2 {
        return Err(Error::config("--classes must be at least 2"));
    }
    args.loss
        .iter()
        .map(|kind| {
            let spec = match kind {
                LossKind::Ce => LossSpec::CrossEntropy,
                LossKind::Bl => LossSpec::blurry(args.gamma)?,
                LossKind::Pz => LossSpec::piecewise_zero(args.cutoff)?,
            };
            grad_check(&spec, args.trials, args.classes, args.step, args.seed)
        })
        .collect()
}

pub fn format_grad_report(r: &GradCheckReport, pass: bool) -> String {
    let params = match (r.loss.gamma(), r.loss.cutoff()) {
        (Some(g), _) => format!("(gamma={g})"),
        (_, Some(c)) => format!("(c={c})"),
        _ => String::new(),
    };
    format!(
        "{}{params}: max relative error {:.3e} over {} cases, {} excluded near cutoff [{}]",
        r.loss.name(),
        r.max_relative_error,
        r.checked,
        r.excluded,
        if pass { "ok" } else { "FAIL" }
    )
}

pub fn cmd_plot(args: &PlotArgs) -> Result<Vec<PathBuf>> {
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => args
            .csv
            .parent()
            .map(Path::to_path_buf)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    require_dir(&out)?;
    let rows = read_rows(File::open(&args.csv)?)?;
    let stem = args
        .csv
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run")
        .to_string();
    write_figures(&rows, args.prob_column, &out, &stem)
}

fn write_figures(
    rows: &[CsvRow],
    column: ProbColumn,
    out: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let (probs, acc) = figures(rows, column)?;
    let p_path = out.join(format!("{stem}_mean_prob.svg"));
    let a_path = out.join(format!("{stem}_accuracy.svg"));
    fs::write(&p_path, probs.render())?;
    fs::write(&a_path, acc.render())?;
    Ok(vec![p_path, a_path])
}

/// Training progress at which the init record is drawn on the log axis:
/// half of the first batch's fractional epoch.
pub fn init_plot_position(rows: &[CsvRow]) -> f64 {
    let first = rows
        .iter()
        .map(|r| r.fractional_epoch)
        .filter(|&f| f > 0.0)
        .fold(f64::INFINITY, f64::min);
    if first.is_finite() {
        first / 2.0
    } else {
        0.5
    }
}

/// Mean-probability and per-class-accuracy charts, one series per class.
pub fn figures(rows: &[CsvRow], column: ProbColumn) -> Result<(LineChart, LineChart)> {
    let first = rows
        .first()
        .ok_or_else(|| Error::format("csv has no records"))?;
    let k = rows.iter().map(|r| r.class).max().unwrap_or(0) + 1;
    let init_x = init_plot_position(rows);
    let mut prob_series: Vec<Series> = (0..k)
        .map(|c| Series {
            name: format!("class {c}"),
            points: Vec::new(),
        })
        .collect();
    let mut acc_series = prob_series.clone();
    for r in rows {
        let x = if r.step_kind == StepKind::Init {
            init_x
        } else {
            r.fractional_epoch
        };
        let p = match column {
            ProbColumn::Subset => r.mean_prob_subset,
            ProbColumn::Overall => Some(r.mean_prob_overall),
        };
        prob_series[r.class].points.push((x, p));
        acc_series[r.class].points.push((x, r.accuracy));
    }
    let loss = match (first.gamma, first.cutoff) {
        (Some(g), _) => format!("{} (gamma={g})", first.loss_name),
        (_, Some(c)) => format!("{} (c={c})", first.loss_name),
        _ => first.loss_name.clone(),
    };
    let x_label = format!(
        "epochs, log scale (init drawn at {})",
        crate::csvlog::format_sig9(init_x)
    );
    let prob_label = match column {
        ProbColumn::Subset => "mean p(k|x) over class-k samples",
        ProbColumn::Overall => "mean p(k|x) over all samples",
    };
    Ok((
        LineChart {
            title: format!("{loss}: averaged softmax probability"),
            x_label: x_label.clone(),
            y_label: prob_label.to_string(),
            log_x: true,
            y_range: Some((0.0, 1.0)),
            series: prob_series,
        },
        LineChart {
            title: format!("{loss}: per-class accuracy"),
            x_label,
            y_label: "accuracy".to_string(),
            log_x: true,
            y_range: Some((0.0, 1.0)),
            series: acc_series,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            exit_code(&Error::config("x")),
            exit_code(&Error::Io(std::io::Error::other("x"))),
            exit_code(&Error::numeric("s", "x")),
        ];
        assert_eq!(codes, [EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC]);
        assert!(codes.iter().all(|&c| c != EXIT_OK));
    }

    #[test]
    fn grad_check_bl_gamma_zero_equals_ce() {
        let args = |loss, gamma| GradCheckArgs {
            loss: vec![loss],
            trials: 50,
            gamma,
            cutoff: 0.1,
            classes: 10,
            step: 1e-6,
            seed: 4,
        };
        let ce = cmd_grad_check(&args(LossKind::Ce, 0.7)).unwrap();
        let bl0 = cmd_grad_check(&args(LossKind::Bl, 0.0)).unwrap();
        assert_eq!(ce[0].max_relative_error, bl0[0].max_relative_error);
        assert_eq!(
            (ce[0].checked, ce[0].excluded),
            (bl0[0].checked, bl0[0].excluded)
        );
    }

    #[test]
    fn missing_selection_is_config_error() {
        let args = RunArgs {
            config: None,
            preset: None,
            seed: None,
            out: None,
        };
        assert!(matches!(resolve(&args), Err(Error::Config(_))));
    }
}
