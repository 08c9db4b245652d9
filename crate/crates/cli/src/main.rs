//! `fdmrc`: run the frequency-multiplexed reservoir simulator, sweeps and
//! standard benchmarks from the command line.
//!
//! Exit codes: 0 success, 1 replay mismatch, 2 usage or configuration error,
//! 3 numerical failure (including any failed grid point of a sweep).

mod manifest;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fdm_reservoir::bench::{self, DEFAULT_SEED};
use fdm_reservoir::scan::{run_scan_with_threads, ScanSpec};
use fdm_reservoir::seeding::derive_seed;
use fdm_reservoir::tasks::{gen_channel, gen_memory_inputs, gen_narma10, TaskDataset, TaskKind};
use fdm_reservoir::{Reservoir, ReservoirConfig};
use log::info;

use manifest::{unix_now, InputSource, Job, OutputFile, RunManifest, SeedInfo};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fdm_reservoir::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("replay differs from the recorded run: {0}")]
    Mismatch(String),
    #[error("{0} evaluations failed; details in scan.json")]
    Failed(usize),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            message: e.to_string(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Failed(_) => 3,
            CliError::Mismatch(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fdmrc", version, about = "Frequency-multiplexed sideband reservoir simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Directory receiving result files and manifest.json.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (0: one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Drive one reservoir with an input sequence and write its sideband intensities.
    Simulate {
        /// Reservoir configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input sequence: CSV with an `input` column, or one value per line.
        #[arg(long, conflicts_with = "task")]
        input: Option<PathBuf>,
        /// Generate the input sequence of this task instead.
        #[arg(long, value_parser = parse_task)]
        task: Option<TaskKind>,
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Run a parameter sweep described by a scan file (TOML).
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// Override the task named in the scan file.
        #[arg(long, value_parser = parse_task)]
        task: Option<TaskKind>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the standard sweep of a task and summarise its headline numbers.
    Bench {
        #[arg(long, value_parser = parse_task)]
        task: TaskKind,
        /// Readout sidebands.
        #[arg(long, default_value_t = 13)]
        neurons: usize,
        /// Replace the standard sweep by this scan file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat a recorded run and check that every output is byte-identical.
    Replay {
        /// manifest.json of the recorded run.
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|e: fdm_reservoir::Error| e.to_string())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_reservoir(path: &Path) -> Result<ReservoirConfig, CliError> {
    let cfg: ReservoirConfig = toml::from_str(&read_text(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_scan(path: &Path) -> Result<ScanSpec, CliError> {
    ScanSpec::from_toml(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_inputs(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = read_text(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let Some(first) = lines.next() else {
        return Err(CliError::Usage(format!("{}: no input values", path.display())));
    };
    let header: Vec<&str> = first.split(',').map(str::trim).collect();
    let (column, rows): (usize, Vec<&str>) = match header.iter().position(|h| *h == "input") {
        Some(c) => (c, lines.collect()),
        None => (0, std::iter::once(first).chain(lines).collect()),
    };
    rows.iter()
        .enumerate()
        .map(|(i, line)| {
            let cell = line.split(',').nth(column).unwrap_or("").trim();
            cell.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{}: line {}: `{cell}` is not a number", path.display(), i + 1)))
        })
        .collect()
}

fn task_inputs(task: TaskKind, length: usize, seed: u64, snr_db: f64) -> Result<TaskDataset, CliError> {
    Ok(match task {
        TaskKind::Memory => gen_memory_inputs(length, seed)?,
        TaskKind::Narma10 => gen_narma10(length, seed)?,
        TaskKind::Channel => gen_channel(length, snr_db, seed)?,
        TaskKind::Classification => fdm_reservoir::tasks::gen_synthetic_classification(3, length, seed)?,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

struct Executed {
    files: Vec<&'static str>,
    seeds: SeedInfo,
    point_wall_time_s: Vec<f64>,
    failures: usize,
}

/// Execute a job, writing its result files into `dir` in a fixed order.
fn execute(job: &Job, dir: &Path, threads: usize) -> Result<Executed, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    match job {
        Job::Simulate {
            reservoir,
            source,
            noise_seed,
        } => {
            let (inputs, seeds) = match source {
                InputSource::File { path } => (read_inputs(path)?, vec![]),
                InputSource::Task {
                    task,
                    length,
                    seed,
                    snr_db,
                } => {
                    let ds = task_inputs(*task, *length, *seed, *snr_db)?;
                    ds.write_csv(create(dir, "dataset.csv")?)?;
                    (ds.inputs, vec![*seed])
                }
            };
            let res = Reservoir::new(reservoir.clone())?;
            info!("simulating {} steps on {} sidebands", inputs.len(), res.config().internal_dim());
            let features = res.run(&inputs, &res.zero_state(), *noise_seed)?;
            fdm_reservoir::sidebands::write_intensity_csv(create(dir, "intensities.csv")?, &inputs, &features)?;
            let mut files = vec!["intensities.csv"];
            if matches!(source, InputSource::Task { .. }) {
                files.insert(0, "dataset.csv");
            }
            Ok(Executed {
                files,
                seeds: SeedInfo {
                    base_seed: seeds.first().copied().unwrap_or(0),
                    dataset_seeds: seeds,
                    noise_seeds: vec![*noise_seed],
                },
                point_wall_time_s: vec![],
                failures: 0,
            })
        }
        Job::Scan { spec } | Job::Bench { spec } => {
            let points = spec.points()?.len();
            info!(
                "{} sweep: {} grid points x {} replicates",
                spec.task, points, spec.replicates
            );
            let result = run_scan_with_threads(spec, threads)?;
            let failed: usize = result.records.iter().map(|r| r.failures()).sum();
            if failed > 0 {
                log::warn!("{failed} evaluations failed; see scan.json");
            }
            result.write_json(create(dir, "scan.json")?)?;
            result.write_csv(create(dir, "scan.csv")?)?;
            let mut files = vec!["scan.json", "scan.csv"];
            if matches!(job, Job::Bench { .. }) {
                let report = bench::summarize(&result)?;
                for e in &report.entries {
                    println!(
                        "{}: {:.6} +/- {:.6} (n={}, grid point {})",
                        e.label, e.mean, e.std, e.n, e.index
                    );
                }
                report.write_json(create(dir, "bench.json")?)?;
                report.write_csv(create(dir, "bench.csv")?)?;
                files.extend(["bench.json", "bench.csv"]);
            }
            let reps = 0..spec.replicates;
            Ok(Executed {
                files,
                seeds: SeedInfo {
                    base_seed: spec.base_seed,
                    dataset_seeds: reps.clone().map(|r| spec.dataset_seed(r)).collect(),
                    noise_seeds: reps.map(|r| spec.noise_seed(r)).collect(),
                },
                point_wall_time_s: result.records.iter().map(|r| r.wall_time_s).collect(),
                failures: failed,
            })
        }
    }
}

fn run_job(job: Job, common: &Common) -> Result<RunManifest, CliError> {
    let started = unix_now();
    let clock = Instant::now();
    let dir = &common.out_dir;
    let done = execute(&job, dir, common.threads)?;
    let outputs = done
        .files
        .iter()
        .map(|f| OutputFile::hash(dir, f))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        tool: "fdmrc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        job,
        seeds: done.seeds,
        threads: common.threads,
        started_unix_s: started,
        finished_unix_s: unix_now(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        outputs,
        point_wall_time_s: done.point_wall_time_s,
    };
    manifest.write(&dir.join("manifest.json"))?;
    if done.failures > 0 {
        return Err(CliError::Failed(done.failures));
    }
    Ok(manifest)
}

fn override_spec(spec: &mut ScanSpec, seed: Option<u64>, replicates: Option<usize>) -> Result<(), CliError> {
    if let Some(s) = seed {
        spec.base_seed = s;
    }
    if let Some(r) = replicates {
        spec.replicates = r;
    }
    spec.validate()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            input,
            task,
            length,
            snr_db,
            seed,
            common,
        } => {
            let reservoir = match config {
                Some(p) => load_reservoir(&p)?,
                None => ReservoirConfig::default(),
            };
            let source = match (input, task) {
                (Some(path), _) => InputSource::File {
                    path: fs::canonicalize(&path).map_err(|e| CliError::io(&path, e))?,
                },
                (None, Some(task)) => InputSource::Task {
                    task,
                    length,
                    seed,
                    snr_db,
                },
                (None, None) => return Err(CliError::Usage("simulate needs --input or --task".into())),
            };
            let noise_seed = derive_seed(seed, &[0x5eed]);
            run_job(
                Job::Simulate {
                    reservoir,
                    source,
                    noise_seed,
                },
                &common,
            )?;
        }
        Command::Scan {
            config,
            task,
            seed,
            replicates,
            common,
        } => {
            let mut spec = load_scan(&config)?;
            if let Some(t) = task {
                spec.task = t;
            }
            override_spec(&mut spec, seed, replicates)?;
            run_job(Job::Scan { spec }, &common)?;
        }
        Command::Bench {
            task,
            neurons,
            config,
            seed,
            replicates,
            common,
        } => {
            let mut spec = match config {
                Some(p) => {
                    let mut s = load_scan(&p)?;
                    s.task = task;
                    s
                }
                None => bench::preset(task, neurons)?,
            };
            override_spec(&mut spec, seed, replicates)?;
            run_job(Job::Bench { spec }, &common)?;
        }
        Command::Replay { manifest, common } => {
            let recorded = RunManifest::read(&manifest)?;
            let fresh = run_job(recorded.job.clone(), &common)?;
            if fresh.outputs.len() != recorded.outputs.len() {
                return Err(CliError::Mismatch("different set of output files".into()));
            }
            for (a, b) in recorded.outputs.iter().zip(&fresh.outputs) {
                if a != b {
                    return Err(CliError::Mismatch(format!("{} ({} vs {})", a.name, a.sha256, b.sha256)));
                }
            }
            println!("replay identical: {} files", fresh.outputs.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
