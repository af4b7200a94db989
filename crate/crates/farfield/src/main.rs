use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use farfield::commands::{fuse_files, greedy_select, run_gss_job, write_fused, FuseList, GssJob};
use farfield::config::PipelineConfig;
use farfield::score::{format_table, score_dirs};
use farfield::sim::{run_simulation, DryCorpus, SimulationConfig};
use farfield::rttm::read_rttm;
use farfield::store::atomic_write;
use farfield::wav::WavFormat;
use farfield::{Error, Manifest, Pipeline, Result};

#[derive(Parser)]
#[command(name = "farfield", version, about = "Far-field multi-speaker diarization and separation")]
struct Cli {
    /// Pipeline configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Session manifest (TOML).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Root of the run directory.
    #[arg(long, global = true, default_value = "runs/default")]
    run_dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalization, dereverberation and channel selection.
    Preprocess(PreprocessArgs),
    /// Clustering grid per selected channel, fused per channel.
    Diarize,
    /// Fuses weighted RTTM hypotheses listed in a TOML file.
    Fuse {
        list: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Reference RTTM of dev sessions: fuse only the hypotheses picked
        /// by greedy forward selection on pooled DER.
        #[arg(long)]
        select_against: Option<PathBuf>,
        /// Collar for the selection DER, seconds.
        #[arg(long, default_value_t = 0.0)]
        collar: f64,
    },
    /// Guided source separation of every turn in an RTTM.
    Gss(GssArgs),
    /// Renders simulated sessions and separation examples.
    Simulate {
        /// Room ranges, conversation statistics and output options.
        #[arg(long)]
        rooms: PathBuf,
        /// Dry utterances: path, speaker and duration.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// DER and speaker-count accuracy of hypothesis RTTMs.
    Score {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        collar: f64,
        /// Also write the table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every stage end to end.
    Run,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Clip-normalization percentile in (0, 1].
    #[arg(long)]
    percentile: Option<f64>,
    #[arg(long)]
    target_peak: Option<f64>,
    /// Skip dereverberation; channels are ranked on the normalized audio.
    #[arg(long)]
    no_wpe: bool,
    /// WPE block length, seconds.
    #[arg(long)]
    block_seconds: Option<f64>,
    /// Fraction of channels kept.
    #[arg(long)]
    fraction: Option<f64>,
}

#[derive(Args)]
struct GssArgs {
    /// Session audio; channels of all files are stacked in order.
    #[arg(long = "wav", required = true)]
    wavs: Vec<PathBuf>,
    #[arg(long)]
    rttm: PathBuf,
    #[arg(long)]
    session: Option<String>,
    /// Soft activity (ACT1) with rows in sorted speaker order.
    #[arg(long)]
    activity: PathBuf,
    #[arg(long)]
    vad_mask: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iterations: Option<usize>,
    /// Context added on both sides of each turn, seconds.
    #[arg(long)]
    margin: Option<f64>,
    /// Frames per EM chunk; 0 disables chunking.
    #[arg(long)]
    chunk_frames: Option<usize>,
    #[arg(long)]
    noise_floor: Option<f64>,
    #[arg(long)]
    no_wpe: bool,
    #[arg(long)]
    pcm16: bool,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pipeline(cli: &Cli) -> Result<Pipeline> {
    pipeline_with(cli, load_config(cli)?)
}

fn pipeline_with(cli: &Cli, config: PipelineConfig) -> Result<Pipeline> {
    let path = cli
        .manifest
        .as_deref()
        .ok_or_else(|| Error::Config("--manifest is required for this command".into()))?;
    let manifest = Manifest::load(path)?;
    manifest.check_files()?;
    Pipeline::new(config, manifest, &cli.run_dir)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Preprocess(a) => {
            let mut cfg = load_config(cli)?;
            let pre = &mut cfg.preprocess;
            pre.percentile = a.percentile.unwrap_or(pre.percentile);
            pre.target_peak = a.target_peak.unwrap_or(pre.target_peak);
            pre.block_seconds = a.block_seconds.unwrap_or(pre.block_seconds);
            pre.selection_fraction = a.fraction.unwrap_or(pre.selection_fraction);
            pre.wpe_enabled &= !a.no_wpe;
            cfg.validate()?;
            let p = pipeline_with(cli, cfg)?;
            p.snapshot()?;
            for o in p.run_preprocess()? {
                println!("{}: channels {:?}", o.session, o.ranking.selected());
            }
        }
        Command::Diarize => {
            let p = pipeline(cli)?;
            p.snapshot()?;
            let pre = p.run_preprocess()?;
            for (session, chans) in p.run_diarize_grid(&pre)? {
                for (c, seg) in chans {
                    println!("{session} ch{c}: {} speakers, {} turns", seg.num_speakers(), seg.turns.len());
                }
            }
        }
        Command::Fuse { list, output, select_against, collar } => {
            let mut list = FuseList::load(list)?;
            if let Some(r) = select_against {
                let steps = greedy_select(&list, &read_rttm(r)?, *collar)?;
                for s in &steps {
                    println!("selected {} (DER {:.2}%)", list.hypotheses[s.index].path.display(), 100.0 * s.der);
                }
                list.hypotheses = steps.iter().map(|s| list.hypotheses[s.index].clone()).collect();
                if list.hypotheses.is_empty() {
                    return Err(Error::data(r, "no hypothesis lowers the DER against this reference"));
                }
            }
            let fused = fuse_files(&list)?;
            write_fused(output, &fused)?;
        }
        Command::Gss(a) => {
            let base = load_config(cli)?.gss;
            let mut cfg = base.config(a.margin.unwrap_or(0.5));
            if let Some(i) = a.iterations {
                cfg.iterations = i;
            }
            if let Some(c) = a.chunk_frames {
                cfg.chunk_frames = (c > 0).then_some(c);
            }
            if let Some(f) = a.noise_floor {
                cfg.noise_floor = f;
            }
            if a.no_wpe {
                cfg.wpe_enabled = false;
            }
            let job = GssJob {
                wavs: a.wavs.clone(),
                rttm: a.rttm.clone(),
                session: a.session.clone(),
                activity: a.activity.clone(),
                vad_mask: a.vad_mask.clone(),
                out_dir: a.out.clone(),
                format: if a.pcm16 { WavFormat::Pcm16 } else { base.output_format },
            };
            let written = run_gss_job(&job, &cfg)?;
            println!("{} segments written to {}", written.len(), a.out.display());
        }
        Command::Simulate { rooms, corpus, out } => {
            let mut cfg = SimulationConfig::load(rooms)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let m = run_simulation(&cfg, &DryCorpus::load(corpus)?, out)?;
            println!("{} sessions written to {}", m.sessions.len(), out.display());
        }
        Command::Score { reference, hyp, collar, out } => {
            let table = format_table(&score_dirs(reference, hyp, *collar)?);
            print!("{table}");
            if let Some(o) = out {
                atomic_write(o, table.as_bytes())?;
            }
        }
        Command::Run => {
            let p = pipeline(cli)?;
            let summary = p.run_full()?;
            if !summary.scores.is_empty() {
                print!("{}", format_table(&[("run".into(), summary.scores)]));
            }
            println!("final RTTMs in {}", Path::new(&cli.run_dir).join("final").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            log::warn!("worker pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
