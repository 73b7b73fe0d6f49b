use lrfhss::channel::ChannelConfig;
use lrfhss::detector::ChannelizerConfig;
use lrfhss::harness::link::{fullband_link, fullband_oracle_for, narrowband_link, oracle_for};
use lrfhss::modem::ModemConfig;
use lrfhss::params::{CodingRate, DataRateProfile, SYMBOL_RATE_HZ};
use lrfhss::rxchain::frontend::{FullbandFrontend, NarrowbandFrontend};
use lrfhss::rxchain::receiver::{receive_packet, receive_with_oracle, RxConfig};
use lrfhss::txchain::{assemble_packet, Modulation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn profile(rate: CodingRate, n_h: u32) -> DataRateProfile {
    DataRateProfile {
        coding_rate: rate,
        n_header_replicas: n_h,
        ..DataRateProfile::simulation()
    }
}

#[test]
fn narrowband_loopback_under_doppler_and_timing() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for modulation in [Modulation::Gmsk, Modulation::Qpsk] {
        for rate in [CodingRate::OneThird, CodingRate::TwoThirds] {
            for trial in 0..4 {
                let prof = profile(rate, 1 + trial % 3);
                let payload: Vec<u8> = (0..rng.random_range(1..=32)).map(|_| rng.random()).collect();
                let seq = rng.random_range(0..512);
                let pkt = assemble_packet(&prof, &payload, seq, modulation).unwrap();
                let ch = ChannelConfig {
                    doppler_rate: [400.0, -400.0, 200.0, 0.0][trial as usize],
                    initial_cfo_hz: rng.random_range(-100.0..100.0),
                    timing_offset_eighths: rng.random_range(0..8),
                    ..ChannelConfig::default()
                };
                let hops = narrowband_link(&pkt, &prof, &ModemConfig::default(), &ch).unwrap();
                let fe = NarrowbandFrontend::new(&hops, prof.n_cf).unwrap();
                let cfg = RxConfig::new(prof.clone());
                let res = receive_packet(&fe, &cfg).unwrap();
                assert_eq!(res.phdr, Some(pkt.phdr), "{modulation} {rate:?} {ch:?} {:?}", res.diagnostics);
                assert_eq!(res.payload.as_deref(), Some(&payload[..]), "{modulation} {rate:?} {ch:?} {:?}", res.diagnostics);

                let oracle = oracle_for(&pkt, prof.n_header_replicas as usize, &ch, 0.0);
                let cfg = RxConfig {
                    modulation: Some(modulation),
                    ..cfg
                };
                let res = receive_with_oracle(&fe, &oracle, &cfg).unwrap();
                assert!(res.payload_crc_ok, "oracle {modulation} {rate:?} {ch:?}");
            }
        }
    }
}

#[test]
fn fullband_loopback_under_doppler() {
    let chan = ChannelizerConfig::new(128, 2, None).unwrap();
    for modulation in [Modulation::Gmsk, Modulation::Qpsk] {
        let prof = profile(CodingRate::OneThird, 1);
        let payload: Vec<u8> = (0..32).map(|i| i * 3 + 1).collect();
        let pkt = assemble_packet(&prof, &payload, 77, modulation).unwrap();
        let ch = ChannelConfig {
            doppler_rate: 400.0,
            initial_cfo_hz: 300.0,
            timing_offset_eighths: 3,
            ..ChannelConfig::default()
        };
        let sig = fullband_link(&pkt, &prof, &ModemConfig::default(), chan.fft_len(), 20, &ch).unwrap();
        let fe = FullbandFrontend::new(&sig, &chan).unwrap();
        let res = receive_packet(&fe, &RxConfig::new(prof.clone())).unwrap();
        assert_eq!(res.payload.as_deref(), Some(&payload[..]), "{modulation} {:?}", res.diagnostics);
    }
}

#[test]
fn fullband_oracle_accounts_for_carrier_delay() {
    // at 10 dB a perfect-sync receiver must not lose a single packet; a
    // phase error of a few tens of degrees per channel would
    let chan = ChannelizerConfig::new(64, 2, None).unwrap();
    let prof = profile(CodingRate::OneThird, 1);
    for (k, modulation) in [(5u8, Modulation::Gmsk), (3, Modulation::Qpsk), (7, Modulation::Gmsk)] {
        let payload: Vec<u8> = (0..32).map(|i| i ^ k).collect();
        let pkt = assemble_packet(&prof, &payload, 17, modulation).unwrap();
        let ch = ChannelConfig {
            snr_db: Some(10.0),
            doppler_rate: -300.0,
            initial_cfo_hz: 150.0,
            timing_offset_eighths: k,
            rng_seed: 1,
        };
        let sig = fullband_link(&pkt, &prof, &ModemConfig::default(), chan.fft_len(), 16, &ch).unwrap();
        let fe = FullbandFrontend::new(&sig, &chan).unwrap();
        let oracle = fullband_oracle_for(&pkt, 1, &ch, 16.0 / SYMBOL_RATE_HZ);
        let res = receive_with_oracle(&fe, &oracle, &RxConfig::new(prof.clone())).unwrap();
        assert_eq!(res.payload.as_deref(), Some(&payload[..]), "{modulation} k={k} {:?}", res.diagnostics);
    }
}


fn fragment_residuals(modulation: Modulation, ch: &ChannelConfig, max_rate: f64) -> Vec<f64> {
    let prof = profile(CodingRate::OneThird, 1);
    let pkt = assemble_packet(&prof, &[0x5a; 32], 300, modulation).unwrap();
    let modem = ModemConfig::default();
    let hops = narrowband_link(&pkt, &prof, &modem, ch).unwrap();
    let fe = NarrowbandFrontend::new(&hops, prof.n_cf).unwrap();
    let cfg = RxConfig {
        max_doppler_rate: max_rate,
        ..RxConfig::new(prof.clone())
    };
    let res = receive_packet(&fe, &cfg).unwrap();
    assert!(res.payload_crc_ok, "{:?}", res.diagnostics);
    let oracle = oracle_for(&pkt, 1, ch, 0.0);
    let t_h = modem.block_periods(114, modulation) as f64 / 488.28125;
    let t_f = modem.block_periods(50, modulation) as f64 / 488.28125;
    res.diagnostics
        .fragment_freq_hz
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let t_mid = oracle.start_s + t_h + (j as f64 + 0.5) * t_f;
            (f - oracle.track.freq_at(t_mid)).abs()
        })
        .collect()
}

#[test]
fn synchronizer_removes_a_constant_offset_in_fixed_offset_mode() {
    for modulation in [Modulation::Gmsk, Modulation::Qpsk] {
        let ch = ChannelConfig {
            initial_cfo_hz: 7.6,
            ..ChannelConfig::default()
        };
        let r = fragment_residuals(modulation, &ch, 0.0);
        assert_eq!(r.len(), 18);
        assert!(r.iter().all(|&x| x < 0.4), "{modulation} {r:?}");
    }
}

#[test]
fn synchronizer_follows_a_doppler_ramp() {
    for modulation in [Modulation::Gmsk, Modulation::Qpsk] {
        for rate in [200.0, -400.0] {
            let ch = ChannelConfig {
                doppler_rate: rate,
                initial_cfo_hz: 20.0,
                timing_offset_eighths: 5,
                ..ChannelConfig::default()
            };
            let r = fragment_residuals(modulation, &ch, 600.0);
            assert!(r.iter().all(|&x| x < 0.05 * 488.28125), "{modulation} {rate} {r:?}");
        }
    }
}

#[test]
fn noise_only_capture_yields_nothing() {
    use lrfhss::channel::add_awgn;
    use lrfhss::modem::{IqSignal, Origin, C64};
    let prof = profile(CodingRate::OneThird, 1);
    let chan = ChannelizerConfig::new(128, 2, None).unwrap();
    let fs = chan.input_rate_hz();
    for seed in 0..3 {
        let silence = IqSignal::new(vec![C64::new(0.0, 0.0); fs as usize], fs, Origin::Channel);
        let noise = add_awgn(&silence, Some(0.0), seed, Some(1.0));
        let fe = FullbandFrontend::new(&noise, &chan).unwrap();
        let res = receive_packet(&fe, &RxConfig::new(prof.clone())).unwrap();
        assert!(res.payload.is_none());
        assert!(!res.payload_crc_ok);
    }
}
