use ambilink_core::barcode::{EcLevel, Payload, TileLayout};
use ambilink_core::channel::{capture, ChannelParams};
use ambilink_core::decoder::{stream_decode, DecoderConfig};
use ambilink_core::encoder::{encode_still, Mode, ModulationParams};
use ambilink_core::fixtures::textured_lab;
use ambilink_core::sync::{frame_to_abs_time, playback_position, Track, TrackRegistry};

fn payloads(n: u64) -> Vec<Payload> {
    (0..n).map(|f| Payload::new(9, f)).collect()
}

fn decoder(mode: Mode, mp: &ModulationParams) -> DecoderConfig {
    DecoderConfig {
        mode,
        sharpen_sigma: mp.smoothing_sigma,
        ..DecoderConfig::default()
    }
}

#[test]
fn every_mode_round_trips_on_an_ideal_channel() {
    let src = textured_lab(180, 180, 1);
    for (mode, fps_tx) in [(Mode::Pair, 60), (Mode::Trivial4, 120), (Mode::Step4, 120)] {
        let mp = ModulationParams {
            mode,
            fps_tx,
            ..ModulationParams::default()
        };
        let enc = encode_still(&src, &payloads(10), &mp).unwrap();
        let cap = capture(&enc, &ChannelParams::ideal(fps_tx)).unwrap();
        let (results, m) = stream_decode(&cap, &decoder(mode, &mp));
        assert_eq!(m.psr, 1.0, "{mode:?}");
        let frames: Vec<u64> = results.iter().map(|r| r.payload.frame_num).collect();
        assert_eq!(frames, (0..10).collect::<Vec<_>>());
    }
}

#[test]
fn oversampling_camera_still_decodes() {
    let src = textured_lab(180, 180, 2);
    let mp = ModulationParams::default();
    let enc = encode_still(&src, &payloads(12), &mp).unwrap();
    let cap = capture(&enc, &ChannelParams::ideal(120)).unwrap();
    let (_, m) = stream_decode(&cap, &decoder(Mode::Pair, &mp));
    assert_eq!(m.psr, 1.0);
}

#[test]
fn every_level_survives_a_mild_camera() {
    let src = textured_lab(200, 200, 3);
    for ec in EcLevel::ALL {
        let mp = ModulationParams {
            ec,
            perception: ambilink_core::colorspace::PerceptionParams::new(3.0, 1.0).unwrap(),
            ..ModulationParams::default()
        };
        let enc = encode_still(&src, &payloads(20), &mp).unwrap();
        let cp = ChannelParams {
            seed: 5,
            ..ChannelParams::preset("iso50-s90", 60).unwrap()
        };
        let (_, m) = stream_decode(&capture(&enc, &cp).unwrap(), &decoder(Mode::Pair, &mp));
        assert!(m.psr >= 0.8, "{ec:?} {}", m.psr);
    }
}

#[test]
fn six_tiles_fill_a_wide_frame() {
    let src = textured_lab(360, 240, 4);
    let mp = ModulationParams {
        layout: TileLayout::six(),
        ..ModulationParams::default()
    };
    let enc = encode_still(&src, &payloads(6), &mp).unwrap();
    assert_eq!(enc.packets[0].tiles.len(), 6);
    let (_, m) = stream_decode(
        &capture(&enc, &ChannelParams::ideal(60)).unwrap(),
        &decoder(Mode::Pair, &mp),
    );
    assert_eq!(m.psr, 1.0);
}

#[test]
fn decoded_packets_give_playback_positions() {
    let src = textured_lab(160, 160, 5);
    let mp = ModulationParams::default();
    let first = 300;
    let p: Vec<Payload> = (first..first + 8).map(|f| Payload::new(9, f)).collect();
    let enc = encode_still(&src, &p, &mp).unwrap();
    let (results, _) = stream_decode(
        &capture(&enc, &ChannelParams::ideal(60)).unwrap(),
        &decoder(Mode::Pair, &mp),
    );
    let reg = TrackRegistry::new([Track {
        id: 9,
        title: "clip".into(),
        duration_ms: 20_000,
        fps_tx: 60,
    }])
    .unwrap();
    for r in &results {
        let now = r.completed_ts_ms + 40.0;
        let pos = playback_position(r, &reg, now).unwrap();
        let want = frame_to_abs_time(r.payload.frame_num, 60) + now - r.capture_ts_ms;
        assert!((pos.position_ms - want).abs() < 1e-9);
    }
    assert_eq!(results.len(), 8);
    assert!(playback_position(&results[0], &reg, 1e9).is_err());
}
