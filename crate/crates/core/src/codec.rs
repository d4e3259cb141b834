//! Stream encoder and decoder.
//!
//! A stream is a fixed 31-byte header followed by the Golomb payload,
//! zero-padded to a byte boundary. All header integers are little-endian:
//!
//! ```text
//! offset size field
//!      0    4 magic "FRGC"
//!      4    1 version (1)
//!      5    1 mode: 0 fixed, 1 adaptive, 2 rice baseline
//!      6    2 rho
//!      8    2 tau
//!     10    2 m (fixed / rice); lookup table size (adaptive)
//!     12    4 alphabet size q (0 = unspecified)
//!     16    8 symbol count
//!     24    1 predictor: 0 external, 1 lpc
//!     25    1 lpc order
//!     26    2 lpc window
//!     28    2 lpc refit interval
//!     30    1 flags: bit 0 = estimator uses unrounded residuals
//! ```
//!
//! In adaptive mode the parameter for symbol `t` is looked up from the scale
//! estimate after symbols `0..t`, so the decoder can follow along; the first
//! symbol uses `m = 1`.

use crate::analysis::{self, OptimalMTable, DEFAULT_MAX_M};
use crate::bitcoder::{code_length, BitSink, BitSource, GolombParam};
use crate::error::{Error, Result};
use crate::predictor::{LpcConfig, LpcPredictor};
use crate::qmap::{
    map_residual, residual, round_prediction, unmap, FinitePrecision, MappedResidual,
    QuantizedPrediction, ResidualNumerator,
};

pub const MAGIC: [u8; 4] = *b"FRGC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 31;

/// Lower clamp for the scale estimate.
pub const THETA_MIN: f64 = 1e-6;
/// Upper clamp for the scale estimate.
pub const THETA_MAX: f64 = 0.999;

/// Upper end of the exhaustive parameter search.
pub const SEARCH_MAX_M: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fixed,
    Adaptive,
    RiceBaseline,
}

impl Mode {
    fn to_byte(self) -> u8 {
        match self {
            Mode::Fixed => 0,
            Mode::Adaptive => 1,
            Mode::RiceBaseline => 2,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Mode::Fixed),
            1 => Ok(Mode::Adaptive),
            2 => Ok(Mode::RiceBaseline),
            _ => Err(Error::Header(format!("unknown mode {b}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorSpec {
    /// Predictions are supplied alongside the symbols on both ends.
    External,
    /// Predictions are recomputed from decoded history.
    Lpc(LpcConfig),
}

/// Which absolute residual feeds the scale estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualSource {
    /// `|x - [xhat]|` on the rounding grid, accumulated exactly.
    #[default]
    Rounded,
    /// `|x - xhat|` with the unrounded prediction.
    Unrounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub mode: Mode,
    pub precision: FinitePrecision,
    /// Fixed parameter, or the lookup table size in adaptive mode.
    pub m: u16,
    pub alphabet_q: u32,
    pub count: u64,
    pub predictor: PredictorSpec,
    pub estimator: ResidualSource,
}

impl StreamHeader {
    fn validate(&self) -> Result<()> {
        let p = self.precision;
        if p.tau() > u64::from(u16::MAX) {
            return Err(Error::Header(format!(
                "tau {} does not fit 16 bits",
                p.tau()
            )));
        }
        if self.m == 0 {
            return Err(Error::Header("m must be >= 1".into()));
        }
        if self.mode == Mode::RiceBaseline && p != FinitePrecision::UNIT {
            return Err(Error::Header("rice baseline requires rho = tau = 1".into()));
        }
        if let PredictorSpec::Lpc(cfg) = self.predictor {
            if cfg.order() > usize::from(u8::MAX)
                || cfg.window() > usize::from(u16::MAX)
                || cfg.refit_interval() > usize::from(u16::MAX)
            {
                return Err(Error::Header(
                    "lpc configuration does not fit header".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<[u8; HEADER_LEN]> {
        self.validate()?;
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4] = VERSION;
        b[5] = self.mode.to_byte();
        b[6..8].copy_from_slice(&(self.precision.rho() as u16).to_le_bytes());
        b[8..10].copy_from_slice(&(self.precision.tau() as u16).to_le_bytes());
        b[10..12].copy_from_slice(&self.m.to_le_bytes());
        b[12..16].copy_from_slice(&self.alphabet_q.to_le_bytes());
        b[16..24].copy_from_slice(&self.count.to_le_bytes());
        if let PredictorSpec::Lpc(cfg) = self.predictor {
            b[24] = 1;
            b[25] = cfg.order() as u8;
            b[26..28].copy_from_slice(&(cfg.window() as u16).to_le_bytes());
            b[28..30].copy_from_slice(&(cfg.refit_interval() as u16).to_le_bytes());
        }
        b[30] = match self.estimator {
            ResidualSource::Rounded => 0,
            ResidualSource::Unrounded => 1,
        };
        Ok(b)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Header(format!(
                "need {HEADER_LEN} header bytes, got {}",
                bytes.len()
            )));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::Header("bad magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Version(bytes[4]));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let mode = Mode::from_byte(bytes[5])?;
        let precision = FinitePrecision::new(u64::from(u16_at(6)), u64::from(u16_at(8)))
            .map_err(|e| Error::Header(e.to_string()))?;
        let m = u16_at(10);
        let alphabet_q = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let predictor = match bytes[24] {
            0 => PredictorSpec::External,
            1 => PredictorSpec::Lpc(
                LpcConfig::new(
                    usize::from(bytes[25]),
                    usize::from(u16_at(26)),
                    usize::from(u16_at(28)),
                )
                .map_err(|e| Error::Header(e.to_string()))?,
            ),
            k => return Err(Error::Header(format!("unknown predictor kind {k}"))),
        };
        let estimator = match bytes[30] {
            0 => ResidualSource::Rounded,
            1 => ResidualSource::Unrounded,
            f => return Err(Error::Header(format!("unknown flags {f:#04x}"))),
        };
        let header = StreamHeader {
            mode,
            precision,
            m,
            alphabet_q,
            count,
            predictor,
            estimator,
        };
        header.validate()?;
        Ok(header)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AbsSum {
    /// Numerator over `tau` of `sum |r|`.
    Exact {
        numerator: u128,
        tau: u64,
    },
    Real(f64),
}

/// Running count and absolute-residual sum behind the scale estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    t: u64,
    sum: AbsSum,
}

impl EstimatorState {
    /// Empty state accumulating grid residuals over `tau`.
    pub fn rounded(tau: u64) -> Self {
        EstimatorState {
            t: 0,
            sum: AbsSum::Exact { numerator: 0, tau },
        }
    }

    /// Empty state accumulating real-valued absolute errors.
    pub fn unrounded() -> Self {
        EstimatorState {
            t: 0,
            sum: AbsSum::Real(0.0),
        }
    }

    pub fn count(&self) -> u64 {
        self.t
    }

    /// Current `S_t` as a real number.
    pub fn abs_sum(&self) -> f64 {
        match self.sum {
            AbsSum::Exact { numerator, tau } => numerator as f64 / tau as f64,
            AbsSum::Real(s) => s,
        }
    }

    /// Exact numerator of `S_t` over `tau`, when accumulating grid residuals.
    pub fn exact_numerator(&self) -> Option<u128> {
        match self.sum {
            AbsSum::Exact { numerator, .. } => Some(numerator),
            AbsSum::Real(_) => None,
        }
    }

    /// Adds one real-valued absolute error (unrounded variant only).
    pub fn update_real(&mut self, abs_err: f64) -> Result<()> {
        match &mut self.sum {
            AbsSum::Real(s) => {
                *s += abs_err.abs();
                self.t += 1;
                Ok(())
            }
            AbsSum::Exact { .. } => Err(Error::invalid("estimator accumulates grid residuals")),
        }
    }
}

/// Adds one grid residual to the state.
pub fn estimator_update(s: EstimatorState, e: ResidualNumerator) -> Result<EstimatorState> {
    match s.sum {
        AbsSum::Exact { numerator, tau } => {
            if tau != e.tau() {
                return Err(Error::invalid(format!(
                    "residual over {} fed to estimator over {tau}",
                    e.tau()
                )));
            }
            Ok(EstimatorState {
                t: s.t + 1,
                sum: AbsSum::Exact {
                    numerator: numerator + u128::from(e.value().unsigned_abs()),
                    tau,
                },
            })
        }
        AbsSum::Real(v) => Ok(EstimatorState {
            t: s.t + 1,
            sum: AbsSum::Real(v + e.to_f64().abs()),
        }),
    }
}

/// `exp(-t / S_t)` clamped to `[THETA_MIN, THETA_MAX]`.
pub fn theta_hat(s: &EstimatorState) -> Result<f64> {
    if s.t == 0 {
        return Err(Error::EstimatorCold);
    }
    let ratio = match s.sum {
        AbsSum::Exact { numerator: 0, .. } => return Ok(THETA_MIN),
        AbsSum::Exact { numerator, tau } => s.t as f64 * tau as f64 / numerator as f64,
        AbsSum::Real(v) if v <= 0.0 => return Ok(THETA_MIN),
        AbsSum::Real(v) => s.t as f64 / v,
    };
    Ok((-ratio).exp().clamp(THETA_MIN, THETA_MAX))
}

/// Maps and writes one symbol; returns the mapped value.
pub fn encode_symbol(
    x: i32,
    q: QuantizedPrediction,
    g: GolombParam,
    sink: &mut BitSink,
) -> Result<MappedResidual> {
    let mapped = map_residual(residual(x, q)?);
    sink.write_golomb(mapped.value(), g)?;
    Ok(mapped)
}

/// Reads one codeword and inverts the mapping.
pub fn decode_symbol(q: QuantizedPrediction, g: GolombParam, src: &mut BitSource) -> Result<i32> {
    let mapped = MappedResidual(src.read_golomb(g)?);
    unmap(mapped, q).map_err(|_| Error::Corrupt("decoded symbol out of range".into()))
}

/// Mode-dependent choice of parameter plus everything both ends must track
/// identically.
#[derive(Debug, Clone)]
struct Lockstep {
    precision: FinitePrecision,
    table: Option<OptimalMTable>,
    estimator: EstimatorState,
    lpc: Option<LpcPredictor>,
    history: Vec<i32>,
    param: GolombParam,
}

impl Lockstep {
    fn new(h: &StreamHeader) -> Result<Self> {
        let (fixed, table) = match h.mode {
            Mode::Fixed | Mode::RiceBaseline => (Some(GolombParam::new(u64::from(h.m))?), None),
            Mode::Adaptive => {
                let size = u64::from(h.m);
                let table = if size == DEFAULT_MAX_M {
                    analysis::default_table().clone()
                } else {
                    OptimalMTable::build(size)?
                };
                (None, Some(table))
            }
        };
        let estimator = match h.estimator {
            ResidualSource::Rounded => EstimatorState::rounded(h.precision.tau()),
            ResidualSource::Unrounded => EstimatorState::unrounded(),
        };
        let lpc = match h.predictor {
            PredictorSpec::External => None,
            PredictorSpec::Lpc(cfg) => Some(LpcPredictor::new(cfg)),
        };
        let param = fixed.unwrap_or(GolombParam::new(1)?);
        Ok(Lockstep {
            precision: h.precision,
            table,
            estimator,
            lpc,
            history: Vec::new(),
            param,
        })
    }

    fn prediction(&mut self, external: Option<f64>) -> Result<f64> {
        match (&mut self.lpc, external) {
            (Some(p), _) => Ok(p.predict_next(&self.history)),
            (None, Some(v)) => Ok(v),
            (None, None) => Err(Error::invalid("external prediction missing")),
        }
    }

    fn observe(&mut self, x: i32, xhat: f64, e: ResidualNumerator) -> Result<()> {
        match self.estimator.sum {
            AbsSum::Exact { .. } => self.estimator = estimator_update(self.estimator, e)?,
            AbsSum::Real(_) => self.estimator.update_real(f64::from(x) - xhat)?,
        }
        if self.lpc.is_some() {
            self.history.push(x);
        }
        if let Some(table) = &self.table {
            self.param = GolombParam::new(table.lookup(theta_hat(&self.estimator)?))?;
        }
        Ok(())
    }
}

/// Incremental encoder. Symbols go in one at a time; `finish` yields the
/// complete stream with its header.
#[derive(Debug, Clone)]
pub struct StreamEncoder {
    header: StreamHeader,
    state: Lockstep,
    sink: BitSink,
    count: u64,
}

impl StreamEncoder {
    pub fn new(header: StreamHeader) -> Result<Self> {
        header.validate()?;
        Ok(StreamEncoder {
            header,
            state: Lockstep::new(&header)?,
            sink: BitSink::new(),
            count: 0,
        })
    }

    /// Encodes `x`. `external` is required for external-prediction streams
    /// and ignored otherwise.
    pub fn push(&mut self, x: i32, external: Option<f64>) -> Result<MappedResidual> {
        let xhat = self.state.prediction(external)?;
        let q = round_prediction(xhat, self.state.precision)?;
        let e = residual(x, q)?;
        let mapped = map_residual(e);
        self.sink.write_golomb(mapped.value(), self.state.param)?;
        self.state.observe(x, xhat, e)?;
        self.count += 1;
        Ok(mapped)
    }

    /// Parameter that will be used for the next symbol.
    pub fn next_m(&self) -> u64 {
        self.state.param.m()
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.state.estimator
    }

    /// Payload bits so far, without header or padding.
    pub fn payload_bits(&self) -> u64 {
        self.sink.bits_written()
    }

    pub fn symbols(&self) -> u64 {
        self.count
    }

    pub fn finish(self) -> Result<Vec<u8>> {
        let header = StreamHeader {
            count: self.count,
            ..self.header
        };
        let mut out = header.to_bytes()?.to_vec();
        out.extend(self.sink.finish());
        Ok(out)
    }
}

/// Incremental decoder over a complete stream.
#[derive(Debug, Clone)]
pub struct StreamDecoder<'a> {
    header: StreamHeader,
    state: Lockstep,
    src: BitSource<'a>,
    decoded: u64,
}

impl<'a> StreamDecoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        let header = StreamHeader::parse(bytes)?;
        Ok(StreamDecoder {
            header,
            state: Lockstep::new(&header)?,
            src: BitSource::new(&bytes[HEADER_LEN..]),
            decoded: 0,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn remaining(&self) -> u64 {
        self.header.count - self.decoded
    }

    pub fn next_m(&self) -> u64 {
        self.state.param.m()
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.state.estimator
    }

    pub fn next_symbol(&mut self, external: Option<f64>) -> Result<i32> {
        if self.remaining() == 0 {
            return Err(Error::invalid("all symbols already decoded"));
        }
        let xhat = self.state.prediction(external)?;
        let q = round_prediction(xhat, self.state.precision)?;
        let x = decode_symbol(q, self.state.param, &mut self.src)?;
        let e = residual(x, q)?;
        self.state.observe(x, xhat, e)?;
        self.decoded += 1;
        Ok(x)
    }

    /// Checks that only zero padding is left after the last symbol.
    pub fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Corrupt(format!(
                "{} symbols not decoded",
                self.remaining()
            )));
        }
        let mut src = self.src;
        let left = src.remaining();
        if left >= 8 {
            return Err(Error::Corrupt(format!(
                "{left} trailing bits after payload"
            )));
        }
        if src.read_bits(left as u32)? != 0 {
            return Err(Error::Corrupt("non-zero padding".into()));
        }
        Ok(())
    }
}

/// Where predictions come from when encoding a whole sequence.
#[derive(Debug, Clone, Copy)]
pub enum Predictions<'a> {
    External(&'a [f64]),
    Lpc(LpcConfig),
}

/// Whole-stream encoder settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub mode: Mode,
    pub precision: FinitePrecision,
    /// Fixed / rice parameter. `None` picks one from the data: the
    /// lookup-table value for the overall scale estimate in fixed mode, the
    /// exhaustive best in rice mode.
    pub m: Option<u64>,
    /// Lookup table size for adaptive mode.
    pub table_size: u64,
    pub alphabet_q: u32,
    pub estimator: ResidualSource,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            mode: Mode::Adaptive,
            precision: FinitePrecision::new(1, 16).expect("valid precision"),
            m: None,
            table_size: DEFAULT_MAX_M,
            alphabet_q: 0,
            estimator: ResidualSource::Rounded,
        }
    }
}

fn resolve_predictions(xs: &[i32], predictions: Predictions) -> Result<Vec<f64>> {
    match predictions {
        Predictions::External(p) => {
            if p.len() != xs.len() {
                return Err(Error::invalid(format!(
                    "{} symbols but {} predictions",
                    xs.len(),
                    p.len()
                )));
            }
            Ok(p.to_vec())
        }
        Predictions::Lpc(cfg) => {
            let mut lpc = LpcPredictor::new(cfg);
            Ok((0..xs.len()).map(|t| lpc.predict_next(&xs[..t])).collect())
        }
    }
}

/// Mapped residuals of a whole sequence at a fixed precision.
pub fn mapped_residuals(xs: &[i32], xhats: &[f64], p: FinitePrecision) -> Result<Vec<u64>> {
    xs.iter()
        .zip(xhats)
        .map(|(&x, &xh)| Ok(map_residual(residual(x, round_prediction(xh, p)?)?).value()))
        .collect()
}

/// Parameter in `1..=max_m` with the shortest total code length; ties go to
/// the smaller parameter.
pub fn exhaustive_best_m(mapped: &[u64], max_m: u64) -> u64 {
    let mut hist: std::collections::BTreeMap<u64, u64> = Default::default();
    for &v in mapped {
        *hist.entry(v).or_default() += 1;
    }
    (1..=max_m.max(1))
        .map(|m| {
            let g = GolombParam::new(m).expect("m >= 1");
            let total: u64 = hist.iter().map(|(&v, &n)| n * code_length(v, g)).sum();
            (total, m)
        })
        .min()
        .map(|(_, m)| m)
        .unwrap_or(1)
}

fn choose_fixed_m(cfg: &EncoderConfig, xs: &[i32], xhats: &[f64]) -> Result<u64> {
    if let Some(m) = cfg.m {
        return Ok(m);
    }
    match cfg.mode {
        Mode::RiceBaseline => Ok(exhaustive_best_m(
            &mapped_residuals(xs, xhats, FinitePrecision::UNIT)?,
            SEARCH_MAX_M,
        )),
        _ => {
            let mut est = match cfg.estimator {
                ResidualSource::Rounded => EstimatorState::rounded(cfg.precision.tau()),
                ResidualSource::Unrounded => EstimatorState::unrounded(),
            };
            for (&x, &xh) in xs.iter().zip(xhats) {
                match cfg.estimator {
                    ResidualSource::Rounded => {
                        let e = residual(x, round_prediction(xh, cfg.precision)?)?;
                        est = estimator_update(est, e)?;
                    }
                    ResidualSource::Unrounded => est.update_real(f64::from(x) - xh)?,
                }
            }
            match theta_hat(&est) {
                Ok(theta) => Ok(OptimalMTable::build(cfg.table_size)?.lookup(theta)),
                Err(Error::EstimatorCold) => Ok(1),
                Err(e) => Err(e),
            }
        }
    }
}

/// Header an encode of `xs` with `cfg` would carry.
pub fn plan_header(
    xs: &[i32],
    predictions: Predictions,
    cfg: &EncoderConfig,
) -> Result<(StreamHeader, Vec<f64>)> {
    let xhats = resolve_predictions(xs, predictions)?;
    let precision = match cfg.mode {
        Mode::RiceBaseline => FinitePrecision::UNIT,
        _ => cfg.precision,
    };
    let cfg = EncoderConfig { precision, ..*cfg };
    let m = match cfg.mode {
        Mode::Adaptive => cfg.table_size,
        _ => choose_fixed_m(&cfg, xs, &xhats)?,
    };
    let m = u16::try_from(m)
        .ok()
        .filter(|&m| m >= 1)
        .ok_or_else(|| Error::invalid(format!("m = {m} must be in 1..=65535")))?;
    let predictor = match predictions {
        Predictions::External(_) => PredictorSpec::External,
        Predictions::Lpc(c) => PredictorSpec::Lpc(c),
    };
    let header = StreamHeader {
        mode: cfg.mode,
        precision,
        m,
        alphabet_q: cfg.alphabet_q,
        count: xs.len() as u64,
        predictor,
        estimator: cfg.estimator,
    };
    header.validate()?;
    Ok((header, xhats))
}

pub fn encode_stream(xs: &[i32], predictions: Predictions, cfg: &EncoderConfig) -> Result<Vec<u8>> {
    let (header, xhats) = plan_header(xs, predictions, cfg)?;
    let external = matches!(predictions, Predictions::External(_));
    let mut enc = StreamEncoder::new(header)?;
    for (&x, &xh) in xs.iter().zip(&xhats) {
        enc.push(x, external.then_some(xh))?;
    }
    enc.finish()
}

/// Decodes a whole stream. External-prediction streams need the same
/// predictions the encoder saw.
pub fn decode_stream(bytes: &[u8], external: Option<&[f64]>) -> Result<Vec<i32>> {
    let mut dec = StreamDecoder::new(bytes)?;
    let n = dec.remaining();
    let ext = match (dec.header().predictor, external) {
        (PredictorSpec::External, Some(p)) => {
            if p.len() as u64 != n {
                return Err(Error::invalid(format!(
                    "stream holds {n} symbols but {} predictions given",
                    p.len()
                )));
            }
            Some(p)
        }
        (PredictorSpec::External, None) => {
            return Err(Error::invalid(
                "stream uses external predictions; none given",
            ))
        }
        (PredictorSpec::Lpc(_), _) => None,
    };
    let bound = (bytes.len() as u64).saturating_mul(8);
    let mut out = Vec::with_capacity(n.min(bound) as usize);
    for i in 0..n as usize {
        out.push(dec.next_symbol(ext.map(|p| p[i]))?);
    }
    dec.finish()?;
    Ok(out)
}
