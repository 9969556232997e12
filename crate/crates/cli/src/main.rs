//! `chromaflow`: batch recoloring from the command line.
//!
//! ```text
//! chromaflow transfer --job job.json --out out.png
//! chromaflow transfer --source src.png --target sky=sky.jpg --pair m.png:sky:t.png --keep k.png --out out.png
//! chromaflow preview --job job.json --max-dim 256 --out small.png
//! chromaflow inspect --job job.json --dump landmarks --out landmarks.csv
//! chromaflow serve --port 7878 --static ./webui/dist
//! ```
//!
//! Exit codes: 0 success, 2 bad input, 3 solver did not converge, 1 anything else.
//! Errors are a single `error: ...` line on stderr.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chromaflow::job::{JobSpec, PairSpec};
use chromaflow::pipeline::{self, Outcome, PreparedSource, TransferJob};
use chromaflow::stats::build_constraints;
use chromaflow::{io, rgb_to_lab};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "chromaflow", version, about = "Local color transfer with edit propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recolor the source at full resolution.
    Transfer {
        #[command(flatten)]
        job: JobArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recolor a downscaled copy.
    Preview {
        #[command(flatten)]
        job: JobArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Longer side of the preview.
        #[arg(long, default_value_t = 256)]
        max_dim: usize,
    },
    /// Write an intermediate artifact.
    Inspect {
        #[command(flatten)]
        job: JobArgs,
        #[arg(long, value_enum)]
        dump: Dump,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory of static files served under `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Idle minutes before a session expires.
        #[arg(long, default_value_t = 30)]
        session_minutes: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Dump {
    /// CSV `pixel_index,l,alpha,beta`, one row per landmark.
    Landmarks,
    /// Weight matrix as `row col weight` lines (landmark positions).
    Weights,
    /// RGBA PNG of constrained pixels in their target colors.
    Constraints,
}

#[derive(Debug, Args)]
struct JobArgs {
    /// JSON job file. Inline flags below override its settings.
    #[arg(long)]
    job: Option<PathBuf>,
    #[arg(long)]
    source: Option<PathBuf>,
    /// `ID=PATH`, repeatable.
    #[arg(long = "target", value_name = "ID=PATH")]
    targets: Vec<String>,
    /// `SOURCE_MASK:TARGET_ID:TARGET_MASK`, repeatable.
    #[arg(long = "pair", value_name = "SMASK:ID:TMASK")]
    pairs: Vec<String>,
    /// Mask of source pixels that keep their color, repeatable.
    #[arg(long = "keep", value_name = "MASK")]
    keeps: Vec<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    spatial_weight: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit 0 even if the solver hits its iteration cap.
    #[arg(long)]
    allow_nonconverged: bool,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<chromaflow::Error> for Failure {
    fn from(e: chromaflow::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

impl JobArgs {
    fn spec(&self) -> Result<JobSpec, Failure> {
        let mut spec = match (&self.job, &self.source) {
            (Some(path), _) => JobSpec::read(path).map_err(|e| Failure::input(format!("--job {}: {e}", path.display())))?,
            (None, Some(source)) => JobSpec {
                source: source.clone(),
                targets: BTreeMap::new(),
                correspondences: vec![],
                keep_masks: vec![],
                config: Default::default(),
            },
            (None, None) => return Err(Failure::input("missing --job or --source")),
        };
        if let (Some(_), Some(source)) = (&self.job, &self.source) {
            spec.source = source.clone();
        }
        for t in &self.targets {
            let (id, path) = t
                .split_once('=')
                .filter(|(id, path)| !id.is_empty() && !path.is_empty())
                .ok_or_else(|| Failure::input(format!("--target '{t}': expected ID=PATH")))?;
            spec.targets.insert(id.into(), path.into());
        }
        for p in &self.pairs {
            let parts: Vec<&str> = p.split(':').collect();
            let [smask, id, tmask] = parts[..] else {
                return Err(Failure::input(format!("--pair '{p}': expected SOURCE_MASK:TARGET_ID:TARGET_MASK")));
            };
            spec.correspondences.push(PairSpec {
                source_mask: smask.into(),
                target: id.into(),
                target_mask: tmask.into(),
            });
        }
        spec.keep_masks.extend(self.keeps.iter().cloned());
        let c = &mut spec.config;
        c.k = self.k.unwrap_or(c.k);
        c.beta = self.beta.unwrap_or(c.beta);
        c.lambda = self.lambda.unwrap_or(c.lambda);
        c.seed = self.seed.unwrap_or(c.seed);
        c.spatial_weight = self.spatial_weight.unwrap_or(c.spatial_weight);
        c.tol = self.tol.unwrap_or(c.tol);
        c.max_iter = self.max_iter.or(c.max_iter);
        Ok(spec)
    }

    fn load(&self) -> Result<TransferJob, Failure> {
        Ok(self.spec()?.load()?)
    }
}

fn require_out(out: &Option<PathBuf>) -> Result<&PathBuf, Failure> {
    out.as_ref().ok_or_else(|| Failure::input("missing --out"))
}

fn finish(outcome: Outcome, output: &OutputArgs, out: &PathBuf) -> CliResult {
    io::write_png(&outcome.image, out)?;
    let mut status = outcome.status_json();
    status["output"] = out.display().to_string().into();
    println!("{status}");
    if !outcome.report.all_converged() && !output.allow_nonconverged {
        return Err(Failure {
            code: 3,
            message: format!(
                "solver did not converge (relative residuals {:?}); pass --allow-nonconverged to accept",
                outcome.report.relative_residual
            ),
        });
    }
    Ok(())
}

fn inspect(args: &JobArgs, dump: Dump, out: &PathBuf) -> CliResult {
    let job = args.load()?;
    match dump {
        Dump::Landmarks | Dump::Weights => {
            job.config.validate()?;
            let prepared = PreparedSource::new(rgb_to_lab(&job.source), &job.config)?;
            let mut w = BufWriter::new(File::create(out)?);
            match dump {
                Dump::Landmarks => {
                    let landmarks = prepared.landmarks();
                    writeln!(w, "pixel_index,l,alpha,beta")?;
                    for (p, c) in landmarks.eta().iter().zip(landmarks.colors()) {
                        writeln!(w, "{p},{},{},{}", c[0], c[1], c[2])?;
                    }
                }
                _ => {
                    if let Some(graph) = prepared.graph() {
                        graph.write_coo(&mut w)?;
                    }
                }
            }
            w.flush()?;
        }
        Dump::Constraints => {
            let set = pipeline::validate_job(&job)?;
            let field = build_constraints(&rgb_to_lab(&job.source), &set, &pipeline::targets_lab(&job))?;
            let mut rgba = vec![[0u8; 4]; job.source.len()];
            for (i, t) in field.iter() {
                let px = chromaflow::colorspace::lab_pixel_to_rgb(t);
                rgba[i] = [px[0], px[1], px[2], 255];
            }
            let png = io::encode_rgba_png(job.source.width(), job.source.height(), &rgba)?;
            std::fs::write(out, png)?;
        }
    }
    Ok(())
}

fn serve(port: u16, host: std::net::IpAddr, static_dir: Option<PathBuf>, minutes: u64) -> CliResult {
    if let Some(dir) = &static_dir {
        if !dir.is_dir() {
            return Err(Failure::input(format!("--static {}: not a directory", dir.display())));
        }
    }
    let config = chromaflow_service::ServiceConfig {
        static_dir,
        session_ttl: std::time::Duration::from_secs(minutes * 60),
        ..Default::default()
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(chromaflow_service::serve((host, port).into(), config))?;
    Ok(())
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var("CHROMAFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Failure::input(format!("CHROMAFLOW_THREADS '{value}': expected a thread count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(format!("CHROMAFLOW_THREADS: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    configure_threads()?;
    match &cli.command {
        Command::Transfer { job, output } => {
            let out = require_out(&output.out)?;
            let outcome = pipeline::run(&job.load()?)?;
            finish(outcome, output, out)
        }
        Command::Preview { job, output, max_dim } => {
            let out = require_out(&output.out)?;
            let outcome = pipeline::preview(&job.load()?, *max_dim)?;
            finish(outcome, output, out)
        }
        Command::Inspect { job, dump, out } => inspect(job, *dump, require_out(out)?),
        Command::Serve {
            port,
            host,
            static_dir,
            session_minutes,
        } => serve(*port, *host, static_dir.clone(), *session_minutes),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", if first.starts_with("error:") { first.to_string() } else { format!("error: {first}") });
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
