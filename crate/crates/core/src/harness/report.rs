//! Sweep reports: per-cell counts, estimates and Wilson intervals, with CSV
//! and JSON output.
//!
//! CSV columns, in order:
//!
//! `modulation, search_interval_bits, doppler, timing_offset, snr_db, trials,
//! misses, p_miss, p_miss_lo, p_miss_hi, header_errors, header_per,
//! header_per_lo, header_per_hi, payload_errors, payload_per, payload_per_lo,
//! payload_per_hi, seed`
//!
//! Columns that do not apply to an experiment are left empty. Wall time is
//! only in the JSON form so that CSV output is byte-identical across runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::txchain::Modulation;

pub const CSV_COLUMNS: [&str; 19] = [
    "modulation",
    "search_interval_bits",
    "doppler",
    "timing_offset",
    "snr_db",
    "trials",
    "misses",
    "p_miss",
    "p_miss_lo",
    "p_miss_hi",
    "header_errors",
    "header_per",
    "header_per_lo",
    "header_per_hi",
    "payload_errors",
    "payload_per",
    "payload_per_lo",
    "payload_per_hi",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MissDetection,
    PacketError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub modulation: Modulation,
    pub search_interval_bits: Option<usize>,
    /// Doppler rate (Hz/s) or constant offset (Hz), per the sweep's mode.
    pub doppler: f64,
    pub timing_offset: u8,
    pub snr_db: f64,
    pub trials: u64,
    pub misses: Option<u64>,
    pub p_miss: Option<f64>,
    pub p_miss_lo: Option<f64>,
    pub p_miss_hi: Option<f64>,
    pub header_errors: Option<u64>,
    pub header_per: Option<f64>,
    pub header_per_lo: Option<f64>,
    pub header_per_hi: Option<f64>,
    pub payload_errors: Option<u64>,
    pub payload_per: Option<f64>,
    pub payload_per_lo: Option<f64>,
    pub payload_per_hi: Option<f64>,
    /// Seed of the cell's condition, from the master seed.
    pub seed: u64,
}

impl Default for CurvePoint {
    fn default() -> Self {
        CurvePoint {
            modulation: Modulation::Gmsk,
            search_interval_bits: None,
            doppler: 0.0,
            timing_offset: 0,
            snr_db: 0.0,
            trials: 0,
            misses: None,
            p_miss: None,
            p_miss_lo: None,
            p_miss_hi: None,
            header_errors: None,
            header_per: None,
            header_per_lo: None,
            header_per_hi: None,
            payload_errors: None,
            payload_per: None,
            payload_per_lo: None,
            payload_per_hi: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub n_trials: u64,
    pub wall_time_s: f64,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// Format implied by a file extension; anything but `.json` is CSV.
    pub fn for_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// Wilson score interval at 95 %.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    // the bounds are exactly 0 and 1 at the extremes; rounding leaves ~1e-19
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Writes the CSV form (header row, then one row per point).
pub fn write_csv(points: &[CurvePoint], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let err = |e| Error::csv("<csv>", e);
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for p in points {
        w.serialize(p).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv(input: impl std::io::Read) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_reader(input);
    let err = |e| Error::csv("<csv>", e);
    let header: Vec<String> = r.headers().map_err(err)?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Config(format!("unexpected report columns: {}", header.join(","))));
    }
    r.deserialize().collect::<std::result::Result<Vec<CurvePoint>, _>>().map_err(err)
}

pub fn emit_report(report: &SimReport, format: ReportFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ReportFormat::Csv => write_csv(&report.points, &mut out)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report).map_err(|e| Error::json(path, e))?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a report back. CSV carries only the points, so the other fields
/// are filled from them (`wall_time_s` is zero).
pub fn parse_report(path: &Path) -> Result<SimReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match ReportFormat::for_path(path) {
        ReportFormat::Json => serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::json(path, e)),
        ReportFormat::Csv => {
            let points = read_csv(file)?;
            let experiment = if points.iter().any(|p| p.misses.is_some()) {
                Experiment::MissDetection
            } else {
                Experiment::PacketError
            };
            Ok(SimReport {
                experiment,
                master_seed: 0,
                n_trials: points.first().map_or(0, |p| p.trials),
                wall_time_s: 0.0,
                points,
            })
        }
    }
}

/// Receiver sensitivity for a required SNR: thermal floor −174 dBm/Hz over
/// a 488 Hz bandwidth with a 6 dB noise figure.
pub fn sensitivity_from_snr(snr_db: f64) -> f64 {
    -174.0 + 10.0 * 488f64.log10() + 6.0 + snr_db
}

/// SNR where `metric` first falls to `target`, interpolating log10 of the
/// metric linearly between grid points. `None` if it never gets there.
///
/// Zero estimates are floored at half a count so the log stays finite.
pub fn crossing_snr(points: &[(f64, f64, u64)], target: f64) -> Option<f64> {
    let lg = |p: f64, n: u64| p.max(0.5 / n.max(1) as f64).log10();
    let t = target.log10();
    points.windows(2).find_map(|w| {
        let (s0, p0, n0) = w[0];
        let (s1, p1, n1) = w[1];
        let (a, b) = (lg(p0, n0), lg(p1, n1));
        if a > t && b <= t {
            Some(s0 + (s1 - s0) * (a - t) / (a - b))
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_reference_values() {
        // reference values from the closed form evaluated independently
        let (lo, hi) = wilson(5, 100);
        assert!((lo - 0.021_543).abs() < 1e-5 && (hi - 0.111_750).abs() < 1e-5, "{lo} {hi}");
        let (lo, hi) = wilson(0, 1000);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.003_826).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn sensitivity_arithmetic() {
        assert!((sensitivity_from_snr(0.0) - (-141.116)).abs() < 1e-3);
        assert!((sensitivity_from_snr(12.0) - sensitivity_from_snr(0.0) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn csv_roundtrip() {
        let points = vec![
            CurvePoint {
                modulation: Modulation::Qpsk,
                search_interval_bits: Some(24),
                doppler: 400.0,
                timing_offset: 3,
                snr_db: -2.5,
                trials: 1000,
                misses: Some(17),
                p_miss: Some(0.017),
                p_miss_lo: Some(0.010_653_1),
                p_miss_hi: Some(0.027_0),
                seed: u64::MAX,
                ..CurvePoint::default()
            },
            CurvePoint {
                header_errors: Some(2),
                header_per: Some(1.0 / 3.0),
                payload_errors: Some(3),
                payload_per: Some(0.1 + 0.2),
                ..CurvePoint::default()
            },
        ];
        let mut buf = Vec::new();
        write_csv(&points, &mut buf).unwrap();
        assert_eq!(read_csv(&buf[..]).unwrap(), points);
    }

    #[test]
    fn crossing_interpolates_in_log() {
        let pts = [(0.0, 0.1, 1000), (1.0, 0.01, 1000), (2.0, 0.0001, 100_000)];
        assert!((crossing_snr(&pts, 0.01).unwrap() - 1.0).abs() < 1e-12);
        assert!((crossing_snr(&pts, 0.001).unwrap() - 1.5).abs() < 1e-12);
        assert!(crossing_snr(&pts, 1e-9).is_none());
    }
}
