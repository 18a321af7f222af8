//! `deep-eiou`: track, evaluate, synthesize and sweep from the command line.
//!
//! Exit status is 0 on success, 1 for invalid input or configuration and 2
//! for runtime failures such as unreadable or unwritable files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};
use deep_eiou::config::{load_config, RunConfig, CONFIG_KEYS};
use deep_eiou::io::{self, SequenceBundle};
use deep_eiou::metrics::{evaluate, LabeledFrameSet};
use deep_eiou::pipeline::{sweep, track_sequence};
use deep_eiou::{generate, Error, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "deep-eiou",
    version,
    about = "Expansion-IoU multi-object tracker"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Track a detection file and write MOT-format results.
    Track {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        embs: Option<PathBuf>,
        /// Expected embedding dimension; inferred from the file when omitted.
        #[arg(long)]
        emb_dim: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file; results go to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score tracker results against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        res: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou_thresh: f64,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a synthetic sequence: gt.txt, det.txt and, when the scenario
    /// has embeddings, emb.txt.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Track and evaluate once per value of one configuration key.
    Sweep {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        embs: Option<PathBuf>,
        #[arg(long)]
        emb_dim: Option<usize>,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "e_initial")]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file for the table; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Configuration overrides: one `--<key> VALUE` flag per configuration key
/// (underscores become dashes) plus repeatable `--set key=value`.
#[derive(Default)]
struct Overrides(Vec<(String, String)>);

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

impl Args for Overrides {
    fn augment_args(cmd: Command) -> Command {
        let cmd = CONFIG_KEYS.iter().fold(cmd, |cmd, key| {
            cmd.arg(
                Arg::new(*key)
                    .long(flag_name(key))
                    .alias(*key)
                    .value_name("VALUE")
                    .help_heading("Configuration overrides"),
            )
        });
        cmd.arg(
            Arg::new("set")
                .long("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("Set any configuration key; applied after the named flags")
                .help_heading("Configuration overrides"),
        )
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

impl FromArgMatches for Overrides {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = Vec::new();
        for key in CONFIG_KEYS {
            if let Some(v) = m.get_one::<String>(key) {
                out.push((key.to_string(), v.clone()));
            }
        }
        for raw in m.get_many::<String>("set").into_iter().flatten() {
            let (k, v) = raw.split_once('=').ok_or_else(|| {
                clap::Error::raw(
                    clap::error::ErrorKind::InvalidValue,
                    format!("--set expects KEY=VALUE, got {raw:?}\n"),
                )
            })?;
            out.push((k.trim().to_string(), v.to_string()));
        }
        Ok(Overrides(out))
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        *self = Self::from_arg_matches(m)?;
        Ok(())
    }
}

fn emit(text: &str, out: Option<&Path>) -> deep_eiou::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_run_config(path: Option<&Path>, overrides: &Overrides) -> deep_eiou::Result<RunConfig> {
    load_config(path, &overrides.0)
}

fn run(cmd: Cmd) -> deep_eiou::Result<()> {
    match cmd {
        Cmd::Track {
            dets,
            embs,
            emb_dim,
            config,
            out,
            overrides,
        } => {
            let cfg = load_run_config(config.as_deref(), &overrides)?;
            let bundle = SequenceBundle::load(&dets, embs.as_deref().map(|p| (p, emb_dim)), None)?;
            let trajectories = track_sequence(&bundle.detections, &cfg)?;
            emit(&io::format_results(&trajectories), out.as_deref())
        }
        Cmd::Eval {
            gt,
            res,
            iou_thresh,
            json,
        } => {
            let mut cfg = RunConfig::default();
            cfg.eval.iou_threshold = iou_thresh;
            cfg.validate()?;
            let gt = io::parse_ground_truth(&gt)?;
            let pred = io::parse_labels(&res)?;
            let report = evaluate(&LabeledFrameSet::new(&gt, &pred)?, &cfg.eval);
            if let Some(path) = json {
                io::write_report_json(&report, &path)?;
            }
            emit(&report.to_text(), None)
        }
        Cmd::Synth {
            scenario,
            out_dir,
            seed,
        } => {
            let text = std::fs::read_to_string(&scenario).map_err(|source| Error::Io {
                path: scenario.clone(),
                source,
            })?;
            let mut cfg = ScenarioConfig::from_toml_str(&text)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let generated = generate(&cfg)?;
            std::fs::create_dir_all(&out_dir).map_err(|source| Error::Io {
                path: out_dir.clone(),
                source,
            })?;
            io::write_ground_truth(&generated.ground_truth, &out_dir.join("gt.txt"))?;
            io::write_detections(&generated.detections, &out_dir.join("det.txt"))?;
            if cfg.embedding.is_some() {
                io::write_embeddings(&generated.detections, &out_dir.join("emb.txt"))?;
            }
            Ok(())
        }
        Cmd::Sweep {
            dets,
            embs,
            emb_dim,
            gt,
            param,
            values,
            config,
            out,
            overrides,
        } => {
            if !CONFIG_KEYS.contains(&param.as_str()) {
                return Err(Error::InvalidConfig(vec![format!("unknown key {param:?}")]));
            }
            let cfg = load_run_config(config.as_deref(), &overrides)?;
            let bundle =
                SequenceBundle::load(&dets, embs.as_deref().map(|p| (p, emb_dim)), Some(&gt))?;
            let gt = bundle.ground_truth.unwrap_or_default();
            let report = sweep(&bundle.detections, &gt, &cfg, &param, &values)?;
            emit(&report.to_table(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
