use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pemkit::audio::{component_snr_db, mix_at_snr_with_gain};
use pemkit::config::RunConfig;
use pemkit::eval::fixtures::{self, NoiseType};
use pemkit::eval::{parse_report_points, parse_transcripts, score_by_condition, Report};
use pemkit::eval::{aggregate_ranges, FullRange, WerPoint};
use pemkit::featfile::{read_stats, write_features, write_stats};
use pemkit::features::{fit_norm_stats, inject_gaussian, normalize, Frontend, GaussInjectConfig};
use pemkit::hash::derive_seed;
use pemkit::noise::{generate, NoiseKind, NoiseSpec};
use pemkit::spectrum::octave_slope;
use pemkit::toy::experiment::{run, RunOptions};
use pemkit::wav::{read_wav, write_wav, WavFormat};
use pemkit::{Condition, Error, NoisePool};

const FORMATS: &str = "\
File formats (all integers and floats little-endian):

  WAV       mono PCM, 16-bit integer or 32-bit float; samples are read as
            i16/32768 or f32. Written as float32 unless --format int16.

  .feat     \"FEAT\" | version u16 = 1 | rows u32 | dim u32 = 123 | rows*dim f32,
            row-major. Each row: 40 log mel energies, log frame energy, then
            41 deltas and 41 delta-deltas.

  .stat     \"STAT\" | version u16 = 1 | rows u32 = 2 | dim u32 = 123 |
            123 f32 means | 123 f32 standard deviations.

  .ckpt     \"PEMC\" | version u16 = 1 | input u32 | hidden u32 | output u32 |
            seed u64 | epoch u32 | parameters f32 in the order
            W_xh (hidden x input), W_hh, b_h, W_hy (output x hidden), b_y.

  manifest  first line \"# epoch=<n> config=<16 hex>\", then one line per
            utterance: id TAB offset TAB snr_db TAB seed TAB checksum, where
            snr_db is a number or \"clean\", seed and checksum are 16 hex digits
            (checksum = FNV-1a 64 over the f32 feature bytes).

  train log epoch TAB stage TAB train_loss TAB dev_wer TAB decision; stages
            count from 1, decision is continue, switch or terminate.

  transcripts  \"<id> <word> <word> ...\" per line; ids carry the test condition
            as a suffix, e.g. \"utt0007@-5\" or \"utt0007@clean\". Blank lines and
            lines starting with # are ignored.

  report    an aligned table followed by key=value lines:
            wer.<condition>=<percent>, full_range=all-conditions|to-minus-10,
            full= high= low= roi=, and with a baseline
            baseline.<range>= and rel_improvement.<range>= (percent).

Exit status: 0 success, 1 computational failure, 2 usage or input error.";

#[derive(Parser)]
#[command(name = "pemkit", version, about = "Noise mixing, features, curriculum training and WER scoring", after_long_help = FORMATS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mix a clean WAV with noise at a target SNR
    Mix(MixArgs),
    /// Write a pink or white noise WAV
    Noise(NoiseArgs),
    /// Fit normalization statistics over WAV files
    Stats(StatsArgs),
    /// Extract 123-dimensional features from a WAV
    Featurize(FeaturizeArgs),
    /// Run a training experiment described by a TOML file
    Train(TrainArgs),
    /// Score hypotheses against references, per condition and per SNR range
    Score(ScoreArgs),
    /// Print a published per-condition WER row as a report
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Float32,
    Int16,
}

impl From<Format> for WavFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Float32 => WavFormat::Float32,
            Format::Int16 => WavFormat::Int16,
        }
    }
}

#[derive(Args)]
struct MixArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Noise WAV, or "pink" to synthesize pink noise of matching length
    #[arg(long)]
    noise: String,
    /// Target SNR in dB, or "clean"
    #[arg(long, allow_hyphen_values = true)]
    snr: Condition,
    /// Picks the noise offset (or seeds the synthesized noise)
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "float32")]
    format: Format,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, value_enum, default_value = "pink")]
    kind: Kind,
    #[arg(long, default_value_t = 60.0)]
    seconds: f64,
    #[arg(long, default_value_t = 16_000)]
    rate: u32,
    #[arg(long, default_value_t = 0.1)]
    rms: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "float32")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Pink,
    White,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(required = true)]
    wavs: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Utterance,
    None,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Normalization statistics; without it --norm applies
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "utterance")]
    norm: Norm,
    /// Standard deviation of the Gaussian noise added after normalization
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Continue from the state saved in the output directory
    #[arg(long)]
    resume: bool,
    /// Stop after this many epochs in total; resume later with --resume
    #[arg(long)]
    stop_after: Option<usize>,
    /// Override the worker count for in-epoch parallelism
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Full {
    AllConditions,
    ToMinus10,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long = "ref", required_unless_present = "points")]
    reference: Option<PathBuf>,
    #[arg(long, required_unless_present = "points")]
    hyp: Option<PathBuf>,
    /// Group by the @condition suffix of each id
    #[arg(long)]
    by_condition: bool,
    /// Read per-condition WERs from a report instead of transcripts
    #[arg(long, conflicts_with_all = ["reference", "hyp"])]
    points: Option<PathBuf>,
    /// Report to compare range aggregates against
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all-conditions")]
    full_range: Full,
    /// Allow conditions to be missing; range aggregates are then omitted
    #[arg(long)]
    partial: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureNoise {
    Pink,
    Babble,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, value_enum)]
    noise: FixtureNoise,
    /// One of: Clean-baseline, Noisy-baseline, Gauss, Vanilla-PEM, Gauss-PEM, ACCAN, "ACCAN reversed"
    #[arg(long)]
    method: String,
}

fn input_error(e: &Error) -> bool {
    match e {
        Error::File { .. }
        | Error::Io(_)
        | Error::Wav(_)
        | Error::Format { .. }
        | Error::Config(_)
        | Error::MissingConditions(_)
        | Error::EmptyReference
        | Error::RateMismatch { .. }
        | Error::NonFiniteSample(_)
        | Error::ZeroSampleRate => true,
        Error::Utterance { source, .. } => input_error(source),
        _ => false,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(e) if !input_error(e) => 1,
        _ => 2,
    }
}

fn mix(a: MixArgs) -> anyhow::Result<()> {
    let signal = read_wav(&a.input)?;
    let (noise, offset) = if a.noise.eq_ignore_ascii_case("pink") {
        let spec = NoiseSpec::new(NoiseKind::Pink, signal.len(), signal.sample_rate_hz(), a.seed);
        (generate(&spec)?, 0)
    } else {
        let pool = NoisePool::new(read_wav(&a.noise)?, 0);
        let seg = pool.sample_segment(signal.len(), &mut ChaCha8Rng::seed_from_u64(a.seed))?;
        (seg.waveform, seg.offset)
    };
    let (mixed, gain) = mix_at_snr_with_gain(&signal, &noise, a.snr)?;
    write_wav(&a.out, &mixed, a.format.into())?;
    println!("offset={offset}");
    match gain {
        Some(g) => {
            println!("gain={g}");
            println!("snr_db={}", component_snr_db(&signal, &noise.scaled(g))?);
        }
        None => println!("gain=none\nsnr_db=clean"),
    }
    Ok(())
}

fn noise(a: NoiseArgs) -> anyhow::Result<()> {
    if !(a.seconds > 0.0) {
        return Err(Error::Config("--seconds must be positive".into()).into());
    }
    let kind = match a.kind {
        Kind::Pink => NoiseKind::Pink,
        Kind::White => NoiseKind::White,
    };
    let mut spec = NoiseSpec::new(kind, (a.seconds * a.rate as f64).round() as usize, a.rate, a.seed);
    spec.target_rms = a.rms;
    let w = generate(&spec)?;
    write_wav(&a.out, &w, a.format.into())?;
    let hi = (a.rate as f64 / 4.0).min(4000.0);
    println!("samples={}", w.len());
    println!("octave_slope_db={:.3}", octave_slope(w.samples(), a.rate, 125.0, hi));
    Ok(())
}

fn stats(a: StatsArgs) -> anyhow::Result<()> {
    let feats = a
        .wavs
        .iter()
        .map(|p| {
            let w = read_wav(p)?;
            Frontend::new(w.sample_rate_hz()).features(&w)
        })
        .collect::<pemkit::Result<Vec<_>>>()?;
    let s = fit_norm_stats(&feats)?;
    write_stats(&a.out, &s)?;
    println!("frames={}", s.sample_count);
    Ok(())
}

fn featurize(a: FeaturizeArgs) -> anyhow::Result<()> {
    let w = read_wav(&a.input)?;
    let raw = Frontend::new(w.sample_rate_hz()).features(&w)?;
    let feats = match (&a.stats, a.norm) {
        (Some(p), _) => normalize(&raw, &read_stats(p)?),
        (None, Norm::Utterance) => normalize(&raw, &fit_norm_stats([&raw])?),
        (None, Norm::None) => raw,
    };
    let feats = if a.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[a.seed.into(), "featurize".into()]));
        inject_gaussian(&feats, GaussInjectConfig { sigma: a.sigma }, &mut rng)?
    } else {
        feats
    };
    write_features(&a.out, &feats)?;
    println!("frames={}", feats.frames());
    println!("dim={}", feats.dim());
    println!("checksum={:016x}", feats.checksum());
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(w) = a.workers {
        cfg.workers = w.max(1);
    }
    let out = run(
        &cfg,
        &RunOptions {
            persist: true,
            resume: a.resume,
            stop_after: a.stop_after,
        },
    )?;
    for r in &out.records {
        println!("{r}");
    }
    let entries = out.stage_entries.len();
    println!("stage_entries={entries}");
    if out.finished {
        for s in &out.test {
            println!("wer.{}={}", s.condition, s.counts.wer_percent()?);
        }
        println!("output={}", cfg.output_dir.display());
    } else {
        println!("stopped; resume with --resume");
    }
    Ok(())
}

fn read_text(p: &Path) -> anyhow::Result<String> {
    fs::read_to_string(p).map_err(|e| Error::File {
        path: p.to_path_buf(),
        source: e,
    }.into())
}

fn score(a: ScoreArgs) -> anyhow::Result<()> {
    let full = match a.full_range {
        Full::AllConditions => FullRange::AllConditions,
        Full::ToMinus10 => FullRange::ToMinus10,
    };
    let points: Vec<WerPoint> = match &a.points {
        Some(p) => parse_report_points(&read_text(p)?)?,
        None => {
            let (r, h) = (a.reference.as_ref().unwrap(), a.hyp.as_ref().unwrap());
            let refs = parse_transcripts(&read_text(r)?).with_context(|| r.display().to_string())?;
            let hyps = parse_transcripts(&read_text(h)?).with_context(|| h.display().to_string())?;
            let groups = score_by_condition(&refs, &hyps, a.by_condition)?;
            if !a.by_condition {
                let (_, counts) = groups.first().ok_or_else(|| anyhow!(Error::EmptyReference))?;
                println!("wer={}", counts.wer_percent()?);
                println!("errors={}", counts.errors());
                println!("words={}", counts.reference_len);
                return Ok(());
            }
            groups
                .into_iter()
                .map(|(c, counts)| {
                    Ok(WerPoint {
                        condition: c.expect("grouped by condition"),
                        wer_percent: counts.wer_percent()?,
                    })
                })
                .collect::<pemkit::Result<_>>()?
        }
    };
    let mut report = Report::new(points, full, !a.partial || a.baseline.is_some())?;
    if let Some(b) = &a.baseline {
        let base = aggregate_ranges(&parse_report_points(&read_text(b)?)?, full)
            .with_context(|| format!("baseline {}", b.display()))?;
        report.compare_with(&base)?;
    }
    print!("{}", report.render());
    Ok(())
}

fn fixture(a: FixtureArgs) -> anyhow::Result<()> {
    let noise = match a.noise {
        FixtureNoise::Pink => NoiseType::Pink,
        FixtureNoise::Babble => NoiseType::Babble,
    };
    let method = fixtures::METHODS
        .iter()
        .position(|m| m.eq_ignore_ascii_case(&a.method))
        .ok_or_else(|| Error::Config(format!("unknown method {:?}; expected one of {:?}", a.method, fixtures::METHODS)))?;
    print!("{}", Report::new(fixtures::points(noise, method), FullRange::AllConditions, true)?.render());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mix(a) => mix(a),
        Command::Noise(a) => noise(a),
        Command::Stats(a) => stats(a),
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train(a),
        Command::Score(a) => score(a),
        Command::Fixture(a) => fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pemkit: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
