//! `lrfhss`: packet building, waveform files, channel, detection, reception
//! and Monte Carlo sweeps from the command line.

mod files;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lrfhss::channel::{add_awgn, apply_doppler, apply_timing_offset, occupied_power, ChannelConfig, DopplerMode};
use lrfhss::detector::{ChannelizerConfig, DetectionEvent, DetectorConfig, HeaderDetector};
use lrfhss::harness::link::{fullband_oracle_for, impair_hops, oracle_for, HOP_TAIL_SYMBOLS};
use lrfhss::harness::report::crossing_snr;
use lrfhss::harness::{
    emit_report, parse_report, run_miss_detection_sweep, run_per_sweep, sensitivity_from_snr, CurvePoint, Experiment,
    ReportFormat, SimConfig, SimReport,
};
use lrfhss::modem::{
    pack_hops, read_iq, synthesize_fullband, synthesize_narrowband, unpack_hops, write_iq, IqSidecar, IqSignal,
    GmskPrecoding, ModemConfig, QpskTiming, C64, TX_OSF,
};
use lrfhss::params::{profile_lookup, time_on_air, DataRateProfile, Region, SYMBOL_RATE_HZ};
use lrfhss::rxchain::frontend::{Frontend, FullbandFrontend, NarrowbandFrontend};
use lrfhss::rxchain::receiver::{receive_packet, receive_with_oracle, PacketResult, RxConfig};
use lrfhss::txchain::{assemble_packet, Modulation};

use files::{read_json, write_json, CaptureMeta, Layout, PacketFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lrfhss::Error),
    #[error("{0}")]
    Usage(String),
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Parser)]
#[command(name = "lrfhss", version, about = "LR-FHSS direct-to-satellite transceiver toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time on air of a packet.
    Toa(ToaArgs),
    /// Build a packet (header replicas, fragments, hopping plan) as JSON.
    Tx(TxArgs),
    /// Modulate a packet into an IQ file.
    Mod(ModArgs),
    /// Pass an IQ file through Doppler, timing offset and noise.
    Chan(ChanArgs),
    /// Channelize an IQ file and list header detections.
    Detect(DetectArgs),
    /// Receive a packet from an IQ file.
    Rx(RxArgs),
    /// Miss-detection sweep.
    SimMiss(SimArgs),
    /// Header and payload packet error rate sweep.
    SimPer(SimArgs),
    /// Summarize a sweep report.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct ProfileArgs {
    /// Region: EU, US or custom (the single-device simulation profile).
    #[arg(long, default_value = "custom")]
    region: String,
    /// Data rate index within the region.
    #[arg(long)]
    dr: Option<u8>,
    /// Profile JSON; takes precedence over --region/--dr.
    #[arg(long)]
    profile: Option<PathBuf>,
}

impl ProfileArgs {
    fn resolve(&self) -> CliResult<DataRateProfile> {
        if let Some(path) = &self.profile {
            let p: DataRateProfile = read_json(path)?;
            p.validate()?;
            return Ok(p);
        }
        let Some(region) = Region::parse(&self.region) else {
            return usage(format!("unknown region '{}'", self.region));
        };
        match (region, self.dr) {
            (Region::Custom, None) => Ok(DataRateProfile::simulation()),
            (_, Some(dr)) => Ok(profile_lookup(region, dr)?),
            (_, None) => usage(format!("--dr is required for region {region}")),
        }
    }

    fn given(&self) -> bool {
        self.profile.is_some() || self.dr.is_some()
    }
}

#[derive(Args)]
struct ToaArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    /// Payload length in bytes.
    #[arg(long)]
    payload: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TxArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    /// Payload bytes as hex.
    #[arg(long)]
    payload_hex: String,
    #[arg(long, default_value_t = 0)]
    seq_id: u16,
    #[arg(long = "mod", value_parser = parse_modulation, default_value = "gmsk")]
    modulation: Modulation,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum QpskTimingArg {
    EqualSymbolRate,
    EqualDuration,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecodingArg {
    Differential,
    Off,
}

#[derive(Args)]
struct ModArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write one full-band composite instead of per-hop captures.
    #[arg(long)]
    fullband: bool,
    /// Full-band samples per symbol; defaults to the smallest power of two
    /// that holds the operating band.
    #[arg(long)]
    sps: Option<usize>,
    /// Full-band silence ahead of the packet, symbols.
    #[arg(long, default_value_t = 16)]
    lead: usize,
    #[arg(long, value_enum, default_value = "equal-symbol-rate")]
    qpsk_timing: QpskTimingArg,
    #[arg(long, value_enum, default_value = "differential")]
    gmsk_precoding: PrecodingArg,
}

#[derive(Args)]
struct ChanArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// SNR in dB over the symbol-rate bandwidth; noiseless if omitted.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    /// Doppler ramp, Hz/s.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    doppler_rate: f64,
    /// Carrier offset at time zero, Hz.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    cfo: f64,
    /// Delay in eighths of a symbol, 0..8.
    #[arg(long, default_value_t = 0)]
    timing: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Channelizer channels; narrowband captures default to 4, full-band
    /// ones to samples-per-symbol / K.
    #[arg(long)]
    m: Option<usize>,
    /// Bins per channel.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Channelizer window length (default two symbols).
    #[arg(long)]
    win: Option<usize>,
    /// Correlator length in output samples (default spans the syncword).
    #[arg(long)]
    det_win: Option<usize>,
    #[arg(long, default_value_t = 48)]
    search_bits: usize,
    #[arg(long, default_value_t = lrfhss::detector::header::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Modulation to look for; defaults to the packet's, else GMSK.
    #[arg(long = "mod", value_parser = parse_modulation)]
    modulation: Option<Modulation>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct RxArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    profile: ProfileArgs,
    /// Use the recorded channel as perfect synchronization.
    #[arg(long, value_enum, default_value = "off")]
    oracle_sync: OnOff,
    #[arg(long = "mod", value_parser = parse_modulation)]
    modulation: Option<Modulation>,
    /// Full-band channelizer bins per channel.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimArgs {
    /// SimConfig JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path; `.json` writes JSON, anything else CSV. Stdout CSV if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "LRFHSS_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// SNR grid as `start:stop:step` or a comma list, dB.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    #[arg(long = "mod", value_delimiter = ',', value_parser = parse_modulation)]
    modulations: Vec<Modulation>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    doppler: Vec<f64>,
    /// Read Doppler values as constant offsets in Hz instead of Hz/s ramps.
    #[arg(long)]
    doppler_offset: bool,
    #[arg(long, value_delimiter = ',')]
    timing: Vec<u8>,
    #[arg(long, value_delimiter = ',')]
    search_bits: Vec<usize>,
    #[arg(long)]
    payload_len: Option<usize>,
    /// PER sweeps stop after the header.
    #[arg(long)]
    header_only: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Probability the crossing SNR is reported at; defaults to 1e-2 for
    /// miss detection and 1e-3 for PER.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    json: bool,
}

fn parse_modulation(s: &str) -> Result<Modulation, String> {
    Modulation::parse(s).ok_or_else(|| format!("unknown modulation '{s}' (gmsk or qpsk)"))
}

fn parse_snr_grid(s: &str) -> CliResult<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("bad number '{t}' in SNR grid")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return usage("SNR range needs start <= stop and a positive step");
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * step).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => usage("SNR grid is start:stop:step or a comma list"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.cmd {
        Cmd::Toa(a) => toa(a),
        Cmd::Tx(a) => tx(a),
        Cmd::Mod(a) => modulate(a),
        Cmd::Chan(a) => chan(a),
        Cmd::Detect(a) => detect(a),
        Cmd::Rx(a) => rx(a),
        Cmd::SimMiss(a) => sim(a, Experiment::MissDetection),
        Cmd::SimPer(a) => sim(a, Experiment::PacketError),
        Cmd::Report(a) => report(a),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lrfhss: {e}");
            ExitCode::FAILURE
        }
    }
}

#[derive(Serialize)]
struct ToaRecord {
    region: Region,
    dr: u8,
    payload_bytes: usize,
    coding_rate: String,
    n_headers: u32,
    n_fragments: usize,
    n_coded: usize,
    t_header_ms: f64,
    t_fragment_ms: f64,
    total_ms: f64,
    total_us: u64,
}

fn toa(a: ToaArgs) -> CliResult<ExitCode> {
    let profile = a.profile.resolve()?;
    profile.check_payload_len(a.payload)?;
    let b = time_on_air(a.payload, profile.coding_rate, profile.n_header_replicas)?;
    let rec = ToaRecord {
        region: profile.region,
        dr: profile.dr_id,
        payload_bytes: a.payload,
        coding_rate: profile.coding_rate.to_string(),
        n_headers: b.n_headers,
        n_fragments: b.n_fragments,
        n_coded: b.n_coded,
        t_header_ms: b.t_header_ms(),
        t_fragment_ms: b.t_fragment_ms(),
        total_ms: b.total_ms(),
        total_us: b.total_us,
    };
    if a.json {
        write_json(None, &rec)?;
    } else {
        println!("region       {} DR{}", profile.region, profile.dr_id);
        println!("payload      {} bytes, CR {}", a.payload, rec.coding_rate);
        println!("coded bits   {}", b.n_coded);
        println!("headers      {} x {:.3} ms", b.n_headers, b.t_header_ms());
        println!("fragments    {} x {:.3} ms", b.n_fragments, b.t_fragment_ms());
        println!("time on air  {:.1} ms", b.total_ms());
    }
    Ok(ExitCode::SUCCESS)
}

fn tx(a: TxArgs) -> CliResult<ExitCode> {
    let profile = a.profile.resolve()?;
    let hex = a.payload_hex.trim();
    if !hex.len().is_multiple_of(2) || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return usage("--payload-hex needs an even number of hex digits");
    }
    let payload: Vec<u8> = (0..hex.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).expect("checked hex"))
        .collect();
    let blocks = assemble_packet(&profile, &payload, a.seq_id, a.modulation)?;
    write_json(a.out.as_deref(), &PacketFile { profile, blocks })?;
    Ok(ExitCode::SUCCESS)
}

/// Smallest power of two samples per symbol whose band holds every channel.
fn fullband_sps(profile: &DataRateProfile) -> usize {
    // channel offsets reach n_cf / 2 channels either side of the centre
    let need = f64::from(profile.n_cf) + 2.0;
    (need.ceil() as usize).next_power_of_two()
}

fn modulate(a: ModArgs) -> CliResult<ExitCode> {
    let pkt: PacketFile = read_json(&a.input)?;
    let modem = ModemConfig {
        qpsk_timing: match a.qpsk_timing {
            QpskTimingArg::EqualSymbolRate => QpskTiming::EqualSymbolRate,
            QpskTimingArg::EqualDuration => QpskTiming::EqualDuration,
        },
        gmsk_precoding: match a.gmsk_precoding {
            PrecodingArg::Differential => GmskPrecoding::Differential,
            PrecodingArg::Off => GmskPrecoding::Off,
        },
    };
    let (sig, hops, layout, lead) = if a.fullband {
        let sps = a.sps.unwrap_or_else(|| fullband_sps(&pkt.profile));
        if !sps.is_multiple_of(TX_OSF) {
            return usage("--sps must be a multiple of 8 so timing offsets stay whole samples");
        }
        let tx = synthesize_fullband(&pkt.blocks, &pkt.profile, &modem, sps)?;
        let mut samples = vec![C64::new(0.0, 0.0); a.lead * sps];
        samples.extend_from_slice(&tx.samples);
        samples.extend(std::iter::repeat_n(C64::new(0.0, 0.0), HOP_TAIL_SYMBOLS * sps));
        (IqSignal { samples, ..tx }, Vec::new(), Layout::Fullband, a.lead)
    } else {
        let (sig, records) = pack_hops(&synthesize_narrowband(&pkt.blocks, &pkt.profile, &modem)?)?;
        (sig, records, Layout::Narrowband, 0)
    };
    let meta = CaptureMeta {
        packet: pkt,
        modem,
        layout,
        lead_symbols: lead,
        channel: None,
    };
    save_capture(&a.out, &sig, hops, &meta)?;
    Ok(ExitCode::SUCCESS)
}

fn save_capture(path: &Path, sig: &IqSignal, hops: Vec<lrfhss::modem::HopRecord>, meta: &CaptureMeta) -> CliResult {
    let mut side = IqSidecar::for_signal(sig);
    side.hops = hops;
    side.packet = Some(serde_json::to_value(meta).map_err(|e| lrfhss::Error::json(path, e))?);
    write_iq(path, sig, &side)?;
    Ok(())
}

struct Capture {
    sig: IqSignal,
    side: IqSidecar,
    meta: Option<CaptureMeta>,
}

fn load_capture(path: &Path) -> CliResult<Capture> {
    let (sig, side) = read_iq(path)?;
    let meta = match &side.packet {
        Some(v) => serde_json::from_value(v.clone()).ok(),
        None => None,
    };
    Ok(Capture { sig, side, meta })
}

fn chan(a: ChanArgs) -> CliResult<ExitCode> {
    let cap = load_capture(&a.input)?;
    let cfg = ChannelConfig {
        snr_db: a.snr,
        doppler_rate: a.doppler_rate,
        initial_cfo_hz: a.cfo,
        timing_offset_eighths: a.timing,
        rng_seed: a.seed,
    };
    cfg.validate()?;
    let (sig, hops) = if cap.side.hops.is_empty() {
        // one trajectory from sample 0; noise referenced to the occupied samples
        let power = occupied_power(&cap.sig);
        let mut sig = apply_doppler(&cap.sig, cfg.doppler_rate, cfg.initial_cfo_hz, 0.0);
        if cfg.timing_offset_eighths > 0 {
            sig = apply_timing_offset(&sig, usize::from(cfg.timing_offset_eighths))?;
        }
        (add_awgn(&sig, cfg.snr_db, cfg.rng_seed, Some(power)), Vec::new())
    } else {
        let hops = unpack_hops(&cap.sig, &cap.side.hops)?;
        pack_hops(&impair_hops(&hops, &cfg)?)?
    };
    let mut side = IqSidecar::for_signal(&sig);
    side.hops = hops;
    side.packet = cap.side.packet.clone();
    if let Some(mut meta) = cap.meta {
        if meta.channel.is_some() {
            return usage("capture already went through a channel; apply impairments once");
        }
        meta.channel = Some(cfg);
        side.packet = Some(serde_json::to_value(&meta).map_err(|e| lrfhss::Error::json(&a.out, e))?);
    }
    write_iq(&a.out, &sig, &side)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct DetectRecord {
    /// Hop the event came from, for narrowband captures.
    #[serde(skip_serializing_if = "Option::is_none")]
    hop: Option<usize>,
    start_s: f64,
    cfo_hz: f64,
    #[serde(flatten)]
    event: DetectionEvent,
}

fn detect(a: DetectArgs) -> CliResult<ExitCode> {
    let cap = load_capture(&a.input)?;
    let Some(sps) = cap.sig.samples_per_symbol() else {
        return usage("capture rate is not a whole multiple of the symbol rate");
    };
    let narrow = !cap.side.hops.is_empty();
    let m = match a.m {
        Some(m) => m,
        None if sps % a.k == 0 => sps / a.k,
        None => return usage("samples per symbol is not a multiple of K; give --m"),
    };
    let chan = ChannelizerConfig::new(m, a.k, a.win)?;
    if chan.input_rate_hz() != cap.sig.sample_rate_hz {
        return Err(lrfhss::Error::RateMismatch {
            expected: chan.input_rate_hz(),
            actual: cap.sig.sample_rate_hz,
        }
        .into());
    }
    let modulation = a
        .modulation
        .or(cap.meta.as_ref().map(|m| m.packet.blocks.modulation()))
        .unwrap_or(Modulation::Gmsk);
    let modem = cap.meta.as_ref().map(|m| m.modem).unwrap_or_default();
    let det_cfg = DetectorConfig {
        window_len: a.det_win,
        search_interval_bits: a.search_bits,
        threshold: a.threshold,
        ..DetectorConfig::default()
    };
    let det = HeaderDetector::new(modulation, &chan, &det_cfg, &modem)?;
    let mut records = Vec::new();
    let to_rec = |hop: Option<usize>, t0: f64, event: DetectionEvent| DetectRecord {
        hop,
        start_s: t0 + event.start_symbols() / SYMBOL_RATE_HZ,
        cfo_hz: event.cfo_hz(),
        event,
    };
    if narrow {
        let fs = cap.sig.sample_rate_hz;
        for (i, h) in unpack_hops(&cap.sig, &cap.side.hops)?.iter().enumerate() {
            let t0 = h.start_sample as f64 / fs;
            records.extend(det.detect_signal(&h.signal)?.into_iter().map(|e| to_rec(Some(i), t0, e)));
        }
    } else {
        records.extend(det.detect_signal(&cap.sig)?.into_iter().map(|e| to_rec(None, 0.0, e)));
    }
    if a.json {
        write_json(None, &records)?;
    } else {
        println!("{:>4} {:>10} {:>8} {:>10} {:>12} {:>8}", "hop", "start_s", "channel", "cfo_hz", "peak", "score");
        for r in &records {
            let hop = r.hop.map_or("-".to_string(), |h| h.to_string());
            println!(
                "{hop:>4} {:>10.5} {:>8} {:>10.2} {:>12.4e} {:>8.2}",
                r.start_s, r.event.channel_index, r.cfo_hz, r.event.peak_power, r.event.score
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn rx(a: RxArgs) -> CliResult<ExitCode> {
    let cap = load_capture(&a.input)?;
    let profile = match (&cap.meta, a.profile.given()) {
        (Some(meta), false) => meta.packet.profile.clone(),
        _ => a.profile.resolve()?,
    };
    let mut cfg = RxConfig::new(profile);
    cfg.modulation = a.modulation;
    if let Some(meta) = &cap.meta {
        cfg.modem = meta.modem;
    }
    let hops;
    let fe: Box<dyn Frontend> = if cap.side.hops.is_empty() {
        let Some(sps) = cap.sig.samples_per_symbol() else {
            return usage("capture rate is not a whole multiple of the symbol rate");
        };
        if sps % a.k != 0 {
            return usage("samples per symbol is not a multiple of K");
        }
        let chan = ChannelizerConfig::new(sps / a.k, a.k, None)?;
        Box::new(FullbandFrontend::new(&cap.sig, &chan)?)
    } else {
        hops = unpack_hops(&cap.sig, &cap.side.hops)?;
        Box::new(NarrowbandFrontend::new(&hops, cfg.profile.n_cf)?)
    };
    let result = match a.oracle_sync {
        OnOff::Off => receive_packet(fe.as_ref(), &cfg)?,
        OnOff::On => {
            let Some(meta) = &cap.meta else {
                return usage("oracle sync needs a capture written by `mod`");
            };
            let ch = meta.channel.unwrap_or_default();
            let start = meta.lead_symbols as f64 / SYMBOL_RATE_HZ;
            let n_h = meta.packet.profile.n_header_replicas as usize;
            let oracle = match meta.layout {
                Layout::Narrowband => oracle_for(&meta.packet.blocks, n_h, &ch, start),
                Layout::Fullband => fullband_oracle_for(&meta.packet.blocks, n_h, &ch, start),
            };
            receive_with_oracle(fe.as_ref(), &oracle, &cfg)?
        }
    };
    if a.json {
        write_json(None, &result)?;
    } else {
        print_rx(&result);
    }
    Ok(if result.payload_crc_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn print_rx(r: &PacketResult) {
    match &r.phdr {
        Some(p) => println!(
            "header   ok: {} bytes, CR {}, seq {}, {}",
            p.payload_length, p.coding_rate, p.hopping_seq_id, p.modulation
        ),
        None => println!("header   not found ({} candidates tried)", r.diagnostics.candidates_tried),
    }
    match &r.payload {
        Some(bytes) => {
            let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
            println!("payload  ok: {hex}");
        }
        None if r.header_crc_ok => println!(
            "payload  failed: {}",
            r.diagnostics.error.as_deref().unwrap_or("CRC check failed")
        ),
        None => {}
    }
}

fn sim(a: SimArgs, experiment: Experiment) -> CliResult<ExitCode> {
    let mut cfg: SimConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = a.trials {
        cfg.n_trials = n;
    }
    if let Some(s) = &a.snr {
        cfg.snr_grid_db = parse_snr_grid(s)?;
    }
    if !a.modulations.is_empty() {
        cfg.modulations = a.modulations.clone();
    }
    if !a.doppler.is_empty() {
        cfg.doppler_rates = a.doppler.clone();
    }
    if a.doppler_offset {
        cfg.doppler_mode = DopplerMode::Offset;
    }
    if !a.timing.is_empty() {
        cfg.timing_offsets = a.timing.clone();
    }
    if !a.search_bits.is_empty() {
        cfg.search_interval_bits = a.search_bits.clone();
    }
    if let Some(l) = a.payload_len {
        cfg.payload_len = l;
    }
    cfg.header_only |= a.header_only;
    let report = match experiment {
        Experiment::MissDetection => run_miss_detection_sweep(&cfg)?,
        Experiment::PacketError => run_per_sweep(&cfg)?,
    };
    match &a.out {
        Some(path) => {
            emit_report(&report, ReportFormat::for_path(path), path)?;
            eprintln!("{} points in {:.1} s -> {}", report.points.len(), report.wall_time_s, path.display());
        }
        None => lrfhss::harness::report::write_csv(&report.points, std::io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Crossing {
    modulation: Modulation,
    search_interval_bits: Option<usize>,
    doppler: f64,
    timing_offset: u8,
    metric: &'static str,
    snr_db: Option<f64>,
    sensitivity_dbm: Option<f64>,
}

fn crossings(report: &SimReport, target: f64) -> Vec<Crossing> {
    type Key = (Modulation, Option<usize>, u64, u8);
    let mut groups: Vec<(Key, Vec<&CurvePoint>)> = Vec::new();
    for p in &report.points {
        let key = (p.modulation, p.search_interval_bits, p.doppler.to_bits(), p.timing_offset);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(p),
            None => groups.push((key, vec![p])),
        }
    }
    let metrics: &[(&'static str, fn(&CurvePoint) -> Option<f64>)] = match report.experiment {
        Experiment::MissDetection => &[("p_miss", |p| p.p_miss)],
        Experiment::PacketError => &[("header_per", |p| p.header_per), ("payload_per", |p| p.payload_per)],
    };
    let mut out = Vec::new();
    for ((modulation, search, doppler, timing), mut pts) in groups {
        pts.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        for &(name, get) in metrics {
            let curve: Vec<(f64, f64, u64)> = pts
                .iter()
                .filter_map(|p| get(p).map(|v| (p.snr_db, v, p.trials)))
                .collect();
            if curve.is_empty() {
                continue;
            }
            let snr = crossing_snr(&curve, target);
            out.push(Crossing {
                modulation,
                search_interval_bits: search,
                doppler: f64::from_bits(doppler),
                timing_offset: timing,
                metric: name,
                snr_db: snr,
                sensitivity_dbm: snr.map(sensitivity_from_snr),
            });
        }
    }
    out
}

fn report(a: ReportArgs) -> CliResult<ExitCode> {
    let rep = parse_report(&a.input)?;
    let target = a.target.unwrap_or(match rep.experiment {
        Experiment::MissDetection => 1e-2,
        Experiment::PacketError => 1e-3,
    });
    if !(target > 0.0 && target < 1.0) {
        return usage("--target must lie in (0, 1)");
    }
    let rows = crossings(&rep, target);
    if a.json {
        write_json(None, &rows)?;
        return Ok(ExitCode::SUCCESS);
    }
    println!("{:?}: {} points, crossings at {target:e}", rep.experiment, rep.points.len());
    println!(
        "{:<5} {:>6} {:>8} {:>6} {:<12} {:>9} {:>11}",
        "mod", "search", "doppler", "timing", "metric", "snr_db", "sens_dbm"
    );
    for r in rows {
        let search = r.search_interval_bits.map_or("-".to_string(), |s| s.to_string());
        let (snr, sens) = match (r.snr_db, r.sensitivity_dbm) {
            (Some(s), Some(d)) => (format!("{s:.2}"), format!("{d:.1}")),
            _ => ("-".into(), "-".into()),
        };
        println!(
            "{:<5} {:>6} {:>8} {:>6} {:<12} {:>9} {:>11}",
            r.modulation.to_string(),
            search,
            r.doppler,
            r.timing_offset,
            r.metric,
            snr,
            sens
        );
    }
    Ok(ExitCode::SUCCESS)
}
