use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use frgc::codec::{self, PredictorSpec, StreamDecoder};
use frgc::harness::{self, ExperimentSpec};
use frgc::{EncoderConfig, FinitePrecision, LpcConfig, Mode, Predictions, ResidualSource};

#[derive(Parser)]
#[command(
    name = "frgc",
    version,
    about = "Fractional-precision Rice-Golomb codec"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a file of integers (one per line).
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: EncodeOpts,
    },
    /// Decode a stream back to one integer per line.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Needed for streams encoded with `ext:<file>` predictions.
        #[arg(long)]
        predictor: Option<String>,
    },
    /// Write an experiment table as CSV.
    Analyze {
        #[arg(value_enum)]
        kind: Analysis,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = harness::DEFAULT_SAMPLES)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode and decode in memory; exit 3 if the result differs.
    Roundtrip {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        opts: EncodeOpts,
    },
}

#[derive(Args)]
struct EncodeOpts {
    #[arg(long)]
    rho: Option<u64>,
    #[arg(long)]
    tau: Option<u64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Adaptive)]
    mode: ModeArg,
    /// Fixed parameter; chosen from the data when omitted.
    #[arg(long)]
    m: Option<u64>,
    /// `lpc:ORDER,WINDOW,REFIT` or `ext:<file>` (one real per line).
    #[arg(long, default_value = "lpc:2,32,32")]
    predictor: String,
    /// Feed the scale estimate with unrounded prediction errors.
    #[arg(long)]
    unrounded_estimator: bool,
    /// Lookup table size for adaptive mode.
    #[arg(long, default_value_t = frgc::analysis::DEFAULT_MAX_M)]
    table_size: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fixed,
    Adaptive,
    Rice,
}

#[derive(Clone, Copy, ValueEnum)]
enum Analysis {
    Table2,
    Table3,
    Fig6,
}

enum Failure {
    Usage(String),
    Data(String),
    Mismatch(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Mismatch(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Mismatch(m) => m,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

enum PredictorArg {
    Lpc(LpcConfig),
    External(PathBuf),
}

fn parse_predictor(s: &str) -> Result<PredictorArg, Failure> {
    if let Some(path) = s.strip_prefix("ext:") {
        return Ok(PredictorArg::External(PathBuf::from(path)));
    }
    let body = s
        .strip_prefix("lpc:")
        .ok_or_else(|| usage(format!("predictor '{s}' must start with lpc: or ext:")))?;
    let nums: Vec<usize> = body
        .split(',')
        .map(|v| v.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad lpc spec '{body}'")))?;
    match nums[..] {
        [order, window, refit] => Ok(PredictorArg::Lpc(
            LpcConfig::new(order, window, refit).map_err(usage)?,
        )),
        _ => Err(usage("lpc spec needs ORDER,WINDOW,REFIT")),
    }
}

fn read_lines<T: std::str::FromStr>(path: &Path) -> Result<Vec<T>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<T>().map_err(|_| {
                data(format!(
                    "{}:{}: cannot parse '{}'",
                    path.display(),
                    i + 1,
                    l.trim()
                ))
            })
        })
        .collect()
}

fn read_predictions(path: &Path) -> Result<Vec<f64>, Failure> {
    let v: Vec<f64> = read_lines(path)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(data(format!("{}: non-finite prediction", path.display())));
    }
    Ok(v)
}

fn encoder_config(opts: &EncodeOpts) -> Result<EncoderConfig, Failure> {
    let mode = match opts.mode {
        ModeArg::Fixed => Mode::Fixed,
        ModeArg::Adaptive => Mode::Adaptive,
        ModeArg::Rice => Mode::RiceBaseline,
    };
    let precision = match (mode, opts.rho, opts.tau) {
        (Mode::RiceBaseline, None | Some(1), None | Some(1)) => FinitePrecision::UNIT,
        (Mode::RiceBaseline, _, _) => return Err(usage("rice mode codes at rho = tau = 1")),
        (_, rho, tau) => {
            FinitePrecision::new(rho.unwrap_or(1), tau.unwrap_or(16)).map_err(usage)?
        }
    };
    if precision.tau() > u64::from(u16::MAX) || precision.rho() > u64::from(u16::MAX) {
        return Err(usage("rho and tau must fit in 16 bits"));
    }
    if mode == Mode::Adaptive && opts.m.is_some() {
        return Err(usage("--m applies to fixed and rice modes"));
    }
    Ok(EncoderConfig {
        mode,
        precision,
        m: opts.m,
        table_size: opts.table_size,
        alphabet_q: 0,
        estimator: if opts.unrounded_estimator {
            ResidualSource::Unrounded
        } else {
            ResidualSource::Rounded
        },
    })
}

fn encode_bytes(xs: &[i32], opts: &EncodeOpts) -> Result<(Vec<u8>, Option<Vec<f64>>), Failure> {
    let cfg = encoder_config(opts)?;
    let (bytes, external) = match parse_predictor(&opts.predictor)? {
        PredictorArg::Lpc(c) => (codec::encode_stream(xs, Predictions::Lpc(c), &cfg), None),
        PredictorArg::External(path) => {
            let p = read_predictions(&path)?;
            (
                codec::encode_stream(xs, Predictions::External(&p), &cfg),
                Some(p),
            )
        }
    };
    let bytes = bytes.map_err(data)?;
    Ok((bytes, external))
}

fn write_ints(path: &Path, xs: &[i32]) -> Result<(), Failure> {
    let mut s = String::with_capacity(xs.len() * 4);
    for x in xs {
        s.push_str(&x.to_string());
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Encode { input, out, opts } => {
            let xs: Vec<i32> = read_lines(&input)?;
            let (bytes, _) = encode_bytes(&xs, &opts)?;
            fs::write(&out, bytes).map_err(|e| data(format!("{}: {e}", out.display())))
        }
        Command::Decode {
            input,
            out,
            predictor,
        } => {
            let bytes = fs::read(&input).map_err(|e| data(format!("{}: {e}", input.display())))?;
            let header = *StreamDecoder::new(&bytes).map_err(data)?.header();
            let external = match (
                predictor.as_deref().map(parse_predictor).transpose()?,
                header.predictor,
            ) {
                (Some(PredictorArg::External(path)), PredictorSpec::External) => {
                    Some(read_predictions(&path)?)
                }
                (None, PredictorSpec::External) => {
                    return Err(usage(
                        "stream uses external predictions; pass --predictor ext:<file>",
                    ))
                }
                (Some(PredictorArg::Lpc(c)), PredictorSpec::Lpc(h)) if c != h => {
                    return Err(data("--predictor does not match the stream header"))
                }
                (Some(PredictorArg::External(_)), PredictorSpec::Lpc(_)) => {
                    return Err(data("stream uses lpc predictions, not external ones"))
                }
                (Some(PredictorArg::Lpc(_)), PredictorSpec::External) => {
                    return Err(data("stream uses external predictions, not lpc"))
                }
                _ => None,
            };
            let xs = codec::decode_stream(&bytes, external.as_deref()).map_err(data)?;
            write_ints(&out, &xs)
        }
        Command::Analyze { kind, seed, n, out } => {
            if n == 0 {
                return Err(usage("--n must be >= 1"));
            }
            let csv = match kind {
                Analysis::Table2 => harness::table2_csv(&harness::run_table2().map_err(data)?),
                Analysis::Table3 => harness::table3_csv(
                    &harness::run_table3(&ExperimentSpec::table3(seed, n)).map_err(data)?,
                ),
                Analysis::Fig6 => harness::fig6_csv(
                    &harness::run_fig6(&ExperimentSpec::fig6(seed, n)).map_err(data)?,
                ),
            };
            fs::write(&out, csv).map_err(|e| data(format!("{}: {e}", out.display())))
        }
        Command::Roundtrip { input, opts } => {
            let xs: Vec<i32> = read_lines(&input)?;
            let (bytes, external) = encode_bytes(&xs, &opts)?;
            let back = codec::decode_stream(&bytes, external.as_deref()).map_err(data)?;
            if back != xs {
                let at = xs
                    .iter()
                    .zip(&back)
                    .position(|(a, b)| a != b)
                    .unwrap_or(xs.len().min(back.len()));
                return Err(Failure::Mismatch(format!(
                    "round trip differs at symbol {at}"
                )));
            }
            eprintln!(
                "ok: {} symbols, {} bytes ({:.5} bits/symbol incl. header)",
                xs.len(),
                bytes.len(),
                if xs.is_empty() {
                    0.0
                } else {
                    bytes.len() as f64 * 8.0 / xs.len() as f64
                }
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("frgc: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
