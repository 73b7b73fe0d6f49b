use std::path::Path;
use std::process::{Command, Output};

fn lrfhss(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lrfhss"));
    c.args(args).env_remove("LRFHSS_SEED");
    c
}

fn ok(mut c: Command) -> Output {
    let out = c.output().expect("spawn lrfhss");
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        c,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

#[test]
fn toa_json_for_a_regional_profile() {
    let out = ok(lrfhss(&["toa", "--region", "eu868", "--dr", "8", "--payload", "58", "--json"]));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_fragments"], 31);
    assert_eq!(v["n_headers"], 3);
    assert!((v["total_ms"].as_f64().unwrap() - 3874.8).abs() < 0.05, "{v}");
}

#[test]
fn unknown_profile_is_a_usage_error() {
    let out = lrfhss(&["toa", "--region", "eu868", "--dr", "3", "--payload", "10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("lrfhss: "));
}

fn roundtrip(dir: &Path, fullband: bool, chan: &[&str], rx: &[&str]) -> Output {
    let pkt = dir.join("pkt.json");
    let tx = dir.join("tx.iq");
    let rxf = dir.join("rx.iq");
    ok(lrfhss(&["tx", "--payload-hex", "00112233445566778899aabbccddeeff", "--seq-id", "77", "--out", p(&pkt)]));
    let mut m = vec!["mod", "--in", p(&pkt), "--out", p(&tx)];
    if fullband {
        m.push("--fullband");
    }
    ok(lrfhss(&m));
    assert!(dir.join("tx.iq.json").exists());
    let mut c = vec!["chan", "--in", p(&tx), "--out", p(&rxf)];
    c.extend_from_slice(chan);
    ok(lrfhss(&c));
    let mut r = vec!["rx", "--in", p(&rxf)];
    r.extend_from_slice(rx);
    lrfhss(&r).output().unwrap()
}

#[test]
fn narrowband_chain_decodes_under_doppler() {
    let dir = tempfile::tempdir().unwrap();
    let out = roundtrip(
        dir.path(),
        false,
        &["--snr", "15", "--doppler-rate", "400", "--cfo", "-60", "--timing", "3", "--seed", "9"],
        &[],
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("payload  ok: 00112233445566778899aabbccddeeff"), "{text}");
    assert!(text.contains("seq 77"), "{text}");
}

#[test]
fn fullband_chain_decodes_with_oracle_sync() {
    let dir = tempfile::tempdir().unwrap();
    let out = roundtrip(
        dir.path(),
        true,
        &["--snr", "12", "--doppler-rate", "-300", "--timing", "5", "--seed", "4"],
        &["--oracle-sync", "on", "--json"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["payload_crc_ok"], true);
    assert_eq!(v["payload"].as_array().unwrap().len(), 16);
}

#[test]
fn undecodable_capture_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = roundtrip(dir.path(), false, &["--snr", "-30", "--seed", "1"], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
}

fn sim(kind: &str, threads: &str, seed: Option<&str>, env_seed: Option<&str>) -> Vec<u8> {
    let mut args = vec![
        kind, "--trials", "24", "--snr", "-1:3:2", "--mod", "gmsk,qpsk", "--doppler", "0,400", "--payload-len", "8",
    ];
    if kind == "sim-miss" {
        args.extend(["--search-bits", "12,48", "--timing", "0,5"]);
    }
    if let Some(s) = seed {
        args.extend(["--seed", s]);
    }
    let mut c = lrfhss(&args);
    c.env("RAYON_NUM_THREADS", threads);
    if let Some(s) = env_seed {
        c.env("LRFHSS_SEED", s);
    }
    ok(c).stdout
}

#[test]
fn sweeps_are_byte_identical_across_runs_and_threads() {
    for kind in ["sim-per", "sim-miss"] {
        let a = sim(kind, "1", Some("3"), None);
        let b = sim(kind, "1", Some("3"), None);
        let c = sim(kind, "2", Some("3"), None);
        assert!(a.starts_with(b"modulation,search_interval_bits,"));
        assert_eq!(a, b, "{kind} differs between runs");
        assert_eq!(a, c, "{kind} differs between thread counts");
    }
}

#[test]
fn seed_comes_from_the_environment() {
    let flag = sim("sim-per", "1", Some("42"), None);
    let env = sim("sim-per", "1", None, Some("42"));
    let other = sim("sim-per", "1", None, Some("43"));
    assert_eq!(flag, env);
    assert_ne!(env, other);
}

#[test]
fn report_reads_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("per.csv");
    let json = dir.path().join("per.json");
    for path in [&csv, &json] {
        ok(lrfhss(&[
            "sim-per", "--trials", "40", "--snr", "-4,0,4,8", "--mod", "gmsk", "--doppler", "0", "--header-only",
            "--seed", "2", "--out", p(path),
        ]));
    }
    let text = String::from_utf8(ok(lrfhss(&["report", "--in", p(&csv)])).stdout).unwrap();
    assert!(text.starts_with("PacketError: 4 points"), "{text}");
    assert!(text.contains("header_per"), "{text}");
    let from_csv: serde_json::Value =
        serde_json::from_slice(&ok(lrfhss(&["report", "--in", p(&csv), "--json", "--target", "0.1"])).stdout).unwrap();
    let from_json: serde_json::Value =
        serde_json::from_slice(&ok(lrfhss(&["report", "--in", p(&json), "--json", "--target", "0.1"])).stdout).unwrap();
    assert_eq!(from_csv, from_json);
    assert_eq!(from_csv.as_array().unwrap().len(), 2);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["master_seed"], 2);
    assert_eq!(doc["points"].as_array().unwrap().len(), 4);
}
