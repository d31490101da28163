use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use spadcal::analysis::{
    dark_histogram, eta_expost_from_report, mean_prev_event_interval, measured_rates,
    surplus_darkcount, validate_triggers, DarkCountHistogram,
};
use spadcal::flux::{db_to_linear, mean_photon_number, PhotonFluxInputs};
use spadcal::models::{invert_amended, invert_original, ModelInputs};
use spadcal::sim::{synth_dark_model, Efficiency, EtaProfile, SimConfig, Simulator};
use spadcal::{DetectorParams, PulseTrainParams, TagStream};

use crate::formats::{read_tags, TagFormat, TagWriter};
use crate::record::ResultRecord;
use crate::CliError;

const PS_PER_US: f64 = 1e6;
const PS_PER_NS: f64 = 1e3;

#[derive(Debug, Parser)]
#[command(
    name = "spadcal",
    version,
    about = "Detection-efficiency analysis for free-running SPAD detectors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trigger/click stream.
    Simulate(SimulateArgs),
    /// Flag shadowed triggers and report the true click probability.
    Validate(ValidateArgs),
    /// Estimate the detection efficiency with one of three methods.
    Fit(FitArgs),
    /// Conditional dark-count histogram after signal detections.
    Histogram(HistogramArgs),
    /// Mean time from each signal detection to the previous click.
    Intervals(IntervalsArgs),
    /// Mean photon number per pulse from a monitor photocurrent.
    Nph(NphArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("efficiency").required(true).args(["eta", "eta_profile"])))]
pub struct SimulateArgs {
    #[arg(long, value_name = "HZ")]
    rep_rate: f64,
    #[arg(long, value_name = "X")]
    nph: f64,
    #[arg(long, value_name = "Y")]
    eta: Option<f64>,
    /// CSV with header `interval_ps,eta`.
    #[arg(long, value_name = "FILE")]
    eta_profile: Option<PathBuf>,
    #[arg(long, value_name = "U")]
    holdoff_us: f64,
    #[arg(long, value_name = "S")]
    duration_s: f64,
    #[arg(long, value_name = "N")]
    seed: u64,
    /// Dark model as written by `histogram` (`tau_ps,prob[,surplus]`), 10 ns bins.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["dark_baseline", "ap_amp", "ap_tau_us"])]
    dark_hist: Option<PathBuf>,
    #[arg(long, value_name = "HZ", default_value_t = 0.0)]
    dark_baseline: f64,
    #[arg(long, value_name = "A", default_value_t = 0.0)]
    ap_amp: f64,
    #[arg(long, value_name = "T", default_value_t = 1.0)]
    ap_tau_us: f64,
    /// Span of the synthetic dark model.
    #[arg(long, value_name = "US", default_value_t = 500.0)]
    dark_span_us: f64,
    #[arg(long, value_name = "PS")]
    quantize_ps: Option<u64>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = TagFormat::Csv)]
    format: TagFormat,
}

#[derive(Debug, Args)]
struct WindowArgs {
    #[arg(long, value_name = "W", default_value_t = 6.0)]
    window_ns: f64,
    #[arg(long, value_name = "O", default_value_t = 0.0)]
    window_offset_ns: f64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_name = "FILE")]
    tags: PathBuf,
    #[arg(long, value_name = "U")]
    holdoff_us: f64,
    #[command(flatten)]
    window: WindowArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ModelArg {
    Original,
    Amended,
    Expost,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_name = "FILE")]
    tags: PathBuf,
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, value_name = "X")]
    nph: f64,
    #[arg(long, value_name = "HZ")]
    rep_rate: f64,
    #[arg(long, value_name = "U")]
    holdoff_us: f64,
    /// Dark rate measured without signal. Ignored by `expost`.
    #[arg(long, value_name = "HZ", conflicts_with = "dark_tags")]
    dark_rate: Option<f64>,
    /// Stream recorded without signal pulses, used for the dark rate.
    #[arg(long, value_name = "FILE")]
    dark_tags: Option<PathBuf>,
    /// Observation time; defaults to the last timestamp.
    #[arg(long, value_name = "S")]
    duration_s: Option<f64>,
    #[arg(long)]
    run_id: Option<String>,
    #[command(flatten)]
    window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long, value_name = "FILE")]
    tags: PathBuf,
    #[arg(long, value_name = "U")]
    holdoff_us: f64,
    #[arg(long, value_name = "US", default_value_t = 500.0)]
    span_us: f64,
    #[arg(long, value_name = "NS", default_value_t = 10.0)]
    bin_ns: f64,
    /// Append the integrated surplus-darkcount column.
    #[arg(long)]
    surplus: bool,
    /// Pulse rate; estimated from the mean trigger spacing when omitted.
    #[arg(long, value_name = "HZ")]
    rep_rate: Option<f64>,
    #[command(flatten)]
    window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct IntervalsArgs {
    #[arg(long, value_name = "FILE")]
    tags: PathBuf,
    #[arg(long, value_name = "U", default_value_t = 10.0)]
    holdoff_us: f64,
    #[command(flatten)]
    window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct NphArgs {
    #[arg(long, value_name = "I")]
    imon_a: f64,
    #[arg(long, value_name = "Q")]
    q: f64,
    #[arg(long, value_name = "DB")]
    att_db: f64,
    #[arg(long, value_name = "HZ")]
    rep_rate: f64,
    #[arg(long, value_name = "S")]
    sensitivity: f64,
    #[arg(long, value_name = "L")]
    wavelength_nm: f64,
}

fn to_ps(value: f64, scale: f64, what: &str) -> Result<u64, CliError> {
    let ps = value * scale;
    if !(ps.is_finite() && ps >= 0.0) {
        return Err(CliError::Usage(format!(
            "{what} must be a nonnegative number, got {value}"
        )));
    }
    Ok(ps.round() as u64)
}

fn detector(
    holdoff_us: f64,
    dark_rate_hz: f64,
    window: &WindowArgs,
) -> Result<DetectorParams, CliError> {
    let det = DetectorParams::new(to_ps(holdoff_us, PS_PER_US, "holdoff")?, dark_rate_hz)
        .with_window(
            to_ps(window.window_offset_ns, PS_PER_NS, "window offset")?,
            to_ps(window.window_ns, PS_PER_NS, "window width")?,
        );
    det.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(det)
}

fn load(path: &Path, duration_s: Option<f64>) -> Result<TagStream, CliError> {
    let duration_ps = duration_s.map(|s| to_ps(s, 1e12, "duration")).transpose()?;
    Ok(read_tags(path, duration_ps)?)
}

fn emit(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), CliError> {
    let line = serde_json::to_string(value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}

/// Reads a two-column CSV with a header line.
fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        match (cols.next(), cols.next()) {
            (Some(a), Some(b)) => rows.push((a.trim().to_owned(), b.trim().to_owned())),
            _ => {
                return Err(CliError::Data(format!(
                    "{}: line {}: expected two columns",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(rows)
}

fn parse_num<T: std::str::FromStr>(s: &str, path: &Path, row: usize) -> Result<T, CliError> {
    s.parse().map_err(|_| {
        CliError::Data(format!(
            "{}: row {}: bad number `{s}`",
            path.display(),
            row + 1
        ))
    })
}

pub fn read_eta_profile(path: &Path) -> Result<EtaProfile, CliError> {
    let points = read_pairs(path)?
        .iter()
        .enumerate()
        .map(|(i, (a, b))| Ok((parse_num::<u64>(a, path, i)?, parse_num::<f64>(b, path, i)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(EtaProfile::new(points)?)
}

pub fn read_dark_histogram(path: &Path) -> Result<DarkCountHistogram, CliError> {
    let rows = read_pairs(path)?;
    let mut taus = Vec::with_capacity(rows.len());
    let mut probs = Vec::with_capacity(rows.len());
    for (i, (a, b)) in rows.iter().enumerate() {
        taus.push(parse_num::<u64>(a, path, i)?);
        probs.push(parse_num::<f64>(b, path, i)?);
    }
    if taus.len() < 2 || taus[0] != 0 {
        return Err(CliError::Data(format!(
            "{}: histogram must start at tau_ps = 0",
            path.display()
        )));
    }
    let width = taus[1];
    if taus.iter().enumerate().any(|(i, t)| *t != i as u64 * width) {
        return Err(CliError::Data(format!(
            "{}: bins are not uniformly spaced",
            path.display()
        )));
    }
    Ok(DarkCountHistogram::from_probs(width, probs, 0)?)
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let holdoff_ps = to_ps(args.holdoff_us, PS_PER_US, "holdoff")?;
    let detector = DetectorParams::new(holdoff_ps, args.dark_baseline);
    let efficiency = match (&args.eta, &args.eta_profile) {
        (Some(eta), _) => Efficiency::Constant(*eta),
        (None, Some(path)) => Efficiency::Profile(read_eta_profile(path)?),
        (None, None) => unreachable!("clap enforces one of --eta / --eta-profile"),
    };
    let dark_model = match &args.dark_hist {
        Some(path) => read_dark_histogram(path)?,
        None => synth_dark_model(
            args.dark_baseline,
            args.ap_amp,
            to_ps(args.ap_tau_us, PS_PER_US, "afterpulse time constant")?,
            holdoff_ps,
            to_ps(args.dark_span_us, PS_PER_US, "dark model span")?,
        )?,
    };
    let mut cfg = SimConfig::new(
        detector,
        PulseTrainParams::new(args.rep_rate, args.nph),
        efficiency,
        dark_model,
        args.duration_s,
        args.seed,
    );
    cfg.quantize_ps = args.quantize_ps;
    let sim = Simulator::new(&cfg)?;
    let duration_ps = sim.duration_ps();
    let mut writer = TagWriter::new(BufWriter::new(File::create(&args.out)?), args.format)?;
    let mut n_clicks = 0u64;
    for tag in sim {
        n_clicks += u64::from(tag.is_click());
        writer.write(&tag)?;
    }
    let n_tags = writer.count();
    writer.finish()?;
    emit(
        out,
        &json!({
            "out": args.out.display().to_string(),
            "n_tags": n_tags,
            "n_clicks": n_clicks,
            "duration_ps": duration_ps,
        }),
    )
}

fn validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let det = detector(args.holdoff_us, 0.0, &args.window)?;
    let stream = load(&args.tags, None)?;
    emit(out, &validate_triggers(&stream, &det)?)
}

fn fit(args: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let stream = load(&args.tags, args.duration_s)?;
    let dark_stream = args
        .dark_tags
        .as_deref()
        .map(|p| load(p, None))
        .transpose()?;
    let mut det = detector(args.holdoff_us, 0.0, &args.window)?;
    if stream.duration_ps() == 0 {
        return Err(CliError::Data("tag stream has zero duration".into()));
    }
    let n_click_hz = stream.n_clicks() as f64 / stream.duration_s();
    let n_dark_hz = match args.dark_rate {
        Some(r) => r,
        None => measured_rates(&stream, &det, dark_stream.as_ref())?.n_dark_hz,
    };
    det.dark_rate_hz = n_dark_hz;
    let pulses = PulseTrainParams::new(args.rep_rate, args.nph);

    let (estimate, mean_prev_interval_ps) = match args.model {
        ModelArg::Expost => {
            let report = validate_triggers(&stream, &det)?;
            let interval = mean_prev_event_interval(&stream, &det)
                .ok()
                .map(|s| s.mean_prev_interval_ps);
            (eta_expost_from_report(&report, args.nph)?, interval)
        }
        ModelArg::Original | ModelArg::Amended => {
            let inputs = ModelInputs {
                detector: det,
                pulses,
                n_click_hz,
                duration_s: Some(stream.duration_s()),
            };
            let est = if args.model == ModelArg::Original {
                invert_original(&inputs)?
            } else {
                invert_amended(&inputs)?
            };
            (est, None)
        }
    };
    let run_id = args.run_id.clone().unwrap_or_else(|| {
        args.tags
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
    });
    let record = ResultRecord {
        method: estimate.method.to_string(),
        eta: estimate.eta,
        u_eta: estimate.u_eta,
        n_ph: args.nph,
        rep_rate_hz: args.rep_rate,
        holdoff_ps: det.holdoff_ps,
        n_click_hz,
        n_dark_hz,
        mean_prev_interval_ps,
        run_id,
    };
    writeln!(out, "{}", record.to_line().map_err(CliError::Data)?)?;
    Ok(())
}

fn histogram(args: &HistogramArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let det = detector(args.holdoff_us, 0.0, &args.window)?;
    let stream = load(&args.tags, None)?;
    let rep_rate_hz = match args.rep_rate {
        Some(f) => f,
        None => {
            let mut triggers = stream
                .tags()
                .iter()
                .filter(|t| t.is_trigger())
                .map(|t| t.t_ps);
            let first = triggers.next();
            let (n, last) = triggers.fold((1u64, first), |(n, _), t| (n + 1, Some(t)));
            match (first, last) {
                (Some(a), Some(b)) if b > a => (n - 1) as f64 * 1e12 / (b - a) as f64,
                _ => {
                    return Err(CliError::Data(
                        "too few triggers to estimate the repetition rate from".into(),
                    ))
                }
            }
        }
    };
    let hist = dark_histogram(
        &stream,
        &det,
        &PulseTrainParams::new(rep_rate_hz, 0.0),
        to_ps(args.span_us, PS_PER_US, "span")?,
        to_ps(args.bin_ns, PS_PER_NS, "bin width")?,
    )?;
    let surplus = if args.surplus {
        Some(surplus_darkcount(&hist)?)
    } else {
        None
    };
    let mut w = BufWriter::new(out);
    match &surplus {
        Some(_) => writeln!(w, "tau_ps,prob,surplus")?,
        None => writeln!(w, "tau_ps,prob")?,
    }
    for (i, p) in hist.probs.iter().enumerate() {
        let tau = i as u64 * hist.bin_width_ps;
        match &surplus {
            Some(s) => writeln!(w, "{tau},{p},{}", s[i])?,
            None => writeln!(w, "{tau},{p}")?,
        }
    }
    w.flush()?;
    Ok(())
}

fn intervals(args: &IntervalsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let det = detector(args.holdoff_us, 0.0, &args.window)?;
    let stream = load(&args.tags, None)?;
    emit(out, &mean_prev_event_interval(&stream, &det)?)
}

fn nph(args: &NphArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let inputs = PhotonFluxInputs {
        i_mon_amp: args.imon_a,
        q_ratio: args.q,
        attenuation_linear: db_to_linear(args.att_db),
        rep_rate_hz: args.rep_rate,
        sensitivity_a_per_w: args.sensitivity,
        wavelength_m: args.wavelength_nm * 1e-9,
    };
    let n = mean_photon_number(&inputs).map_err(|e| CliError::Usage(e.to_string()))?;
    emit(out, &json!({ "n_ph": n }))
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Validate(a) => validate(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Histogram(a) => histogram(a, out),
        Command::Intervals(a) => intervals(a, out),
        Command::Nph(a) => nph(a, out),
    }
}
