//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use ambilink::config::ExperimentSpec;
use ambilink::experiment::{evaluate, run_trial, Condition};
use ambilink::store::FrameStore;
use ambilink_core::barcode::{EcLevel, Payload, Rect, TileLayout};
use ambilink_core::channel::{capture, ChannelParams, Jitter};
use ambilink_core::colorspace::{lab_to_srgb, srgb_to_lab, LabFrame};
use ambilink_core::decoder::{detect_roi, stream_decode, DecoderConfig, DiffFrame};
use ambilink_core::encoder::{
    encode_lab_video, encode_still, kernel_radius, prepare_code_frame, signed_offset, Mode,
    ModulationParams,
};
use ambilink_core::fixtures::textured_lab;
use ambilink_core::sync::frame_to_abs_time;
use ambilink_core::texture::{
    contrast_optimized, glcm_contrast_reference, LevelImage, TextureParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn cond(delta_e00: f64, tiles: usize, gaussian: bool, preset: &str) -> Condition {
    Condition {
        delta_e00,
        tiles,
        ec_level: EcLevel::L,
        mode: Mode::Pair,
        gaussian,
        motion_comp: false,
        channel_preset: preset.into(),
    }
}

fn random_levels(rng: &mut ChaCha8Rng, w: usize, h: usize, ng: usize) -> LevelImage {
    let data = (0..w * h).map(|_| rng.random_range(0..ng as u16)).collect();
    LevelImage::new(w, h, ng, data).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn oracle_equivalence() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut images = 0;
    for _ in 0..120 {
        let w = rng.random_range(8..=64);
        let h = rng.random_range(8..=64);
        let ng = [8, 32, 101][rng.random_range(0..3)];
        let img = random_levels(&mut rng, w, h, ng);
        let gray = img.to_gray();
        for window in [3, 5, 7] {
            let p = TextureParams {
                window,
                ng,
                ..TextureParams::default()
            };
            let reference = glcm_contrast_reference(&img, &p).unwrap();
            let fast = contrast_optimized(&gray, &p).unwrap();
            worst = worst.max(max_abs_diff(&reference.data, &fast.data));
        }
        images += 1;
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && secs < 60.0,
        format!("{images} images x 3 windows, max |diff| {worst:.2e}, {secs:.1} s"),
    )
}

fn speedup() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let img = random_levels(&mut rng, 256, 256, 101);
    let gray = img.to_gray();
    let p = TextureParams::default();
    let t = Instant::now();
    let reference = glcm_contrast_reference(&img, &p).unwrap();
    let slow = t.elapsed().as_secs_f64();
    let mut fast = f64::INFINITY;
    for _ in 0..3 {
        let t = Instant::now();
        std::hint::black_box(contrast_optimized(&gray, &p).unwrap());
        fast = fast.min(t.elapsed().as_secs_f64());
    }
    let same = max_abs_diff(
        &reference.data,
        &contrast_optimized(&gray, &p).unwrap().data,
    ) <= 1e-9;
    let ratio = slow / fast;
    verdict(
        ratio >= 10.0 && same,
        format!(
            "reference {:.1} ms, optimized {:.3} ms, speedup {ratio:.0}x",
            slow * 1e3,
            fast * 1e3
        ),
    )
}

fn mean_preservation() -> Verdict {
    let sources: Vec<LabFrame> = (0..3).map(|s| textured_lab(160, 160, 30 + s)).collect();
    let payloads: Vec<Payload> = (0..3).map(|f| Payload::new(4, f)).collect();
    let mut float_err = 0.0f64;
    let mut byte_err = 0.0f64;
    let dir = tempfile::tempdir().unwrap();
    for mode in [Mode::Pair, Mode::Trivial4, Mode::Step4] {
        let mp = ModulationParams {
            mode,
            fps_tx: if mode == Mode::Pair { 60 } else { 120 },
            ..ModulationParams::default()
        };
        let enc = encode_lab_video(&sources, &payloads, &mp).unwrap();
        let path = dir.path().join(mode.name());
        FrameStore::from_frames(
            mp.fps_tx,
            enc.frames.iter().map(|f| lab_to_srgb(&f.lab)).collect(),
        )
        .unwrap()
        .write(&path)
        .unwrap();
        let stored = FrameStore::read(&path).unwrap();
        let n = mode.frames_per_code();
        for (k, src) in sources.iter().enumerate() {
            let frames = &enc.frames[k * n..(k + 1) * n];
            let decoded: Vec<LabFrame> = (k * n..(k + 1) * n)
                .map(|i| srgb_to_lab(stored.frames[i].as_ref().unwrap()))
                .collect();
            for i in 0..src.len() {
                let mean = frames.iter().map(|f| f.lab.l[i]).sum::<f64>() / n as f64;
                float_err = float_err.max((mean - src.l[i]).abs());
                let mean8 = decoded.iter().map(|f| f.l[i]).sum::<f64>() / n as f64;
                byte_err = byte_err.max((mean8 - src.l[i]).abs());
            }
        }
    }
    verdict(
        float_err <= 1e-12 && byte_err <= 0.5,
        format!("max float error {float_err:.1e} L*, after 8-bit round trip {byte_err:.3} L*"),
    )
}

fn transition_bound() -> Verdict {
    let lab = textured_lab(160, 160, 8);
    let payload = Payload::new(1, 9);
    let mut notes = Vec::new();
    let mut pass = true;
    for (mode, factor) in [(Mode::Step4, 1.0), (Mode::Trivial4, 2.0)] {
        let mp = ModulationParams {
            mode,
            fps_tx: 120,
            ..ModulationParams::default()
        };
        let code = prepare_code_frame(&lab, &payload, &mp).unwrap();
        // the same code twice, so the packet boundary is covered too
        let enc = encode_still(&lab, &[payload, payload], &mp).unwrap();
        let mut worst_pixel = 0.0f64;
        let mut global = 0.0f64;
        let mut eff_max = 0.0f64;
        for i in 0..lab.len() {
            let eff = signed_offset(lab.l[i], code.smooth.s[i], code.depth.data[i]).abs();
            let step = enc
                .frames
                .windows(2)
                .map(|w| (w[1].lab.l[i] - w[0].lab.l[i]).abs())
                .fold(0.0, f64::max);
            worst_pixel = worst_pixel.max((step - factor * eff).abs());
            global = global.max(step);
            eff_max = eff_max.max(eff);
        }
        let ok = worst_pixel <= 1e-9 && (global - factor * eff_max).abs() <= 1e-9;
        pass &= ok;
        notes.push(format!(
            "{}: max step {global:.4} = {factor} x {eff_max:.4}, per-pixel error {worst_pixel:.1e}",
            mode.name()
        ));
    }
    verdict(pass, notes.join("; "))
}

fn ideal_round_trip() -> Verdict {
    let mut spec = ExperimentSpec {
        name: "ideal".into(),
        packets: 50,
        width: 360,
        height: 240,
        seed: 5,
        ..ExperimentSpec::default()
    };
    spec.grid.delta_e00 = vec![1.0, 2.0, 3.0];
    spec.grid.tiles = vec![1, 6];
    spec.grid.gaussian = vec![false, true];
    let report = evaluate(&spec).unwrap();
    let psr = report.mean_psr();
    let failing: Vec<String> = report
        .conditions
        .iter()
        .zip(&psr)
        .filter(|(_, &p)| p < 1.0)
        .map(|((_, c), p)| {
            format!(
                "dE={} tiles={} gaussian={} psr={p:.3}",
                c.delta_e00, c.tiles, c.gaussian
            )
        })
        .collect();
    let detail = if failing.is_empty() {
        format!(
            "{} conditions x {} packets all at PSR 1.0",
            psr.len(),
            spec.packets
        )
    } else {
        failing.join(", ")
    };
    verdict(failing.is_empty(), detail)
}

/// Channel noise (L* per frame) chosen offline so that PSR at ΔE00 = 1.0
/// lands inside [0.2, 0.8]; the check below confirms it.
const CALIBRATED_NOISE: f64 = 0.42;

fn noise_monotonicity() -> Verdict {
    let mut spec = ExperimentSpec {
        name: "noise".into(),
        trials: 4,
        packets: 50,
        seed: 6,
        ..ExperimentSpec::default()
    };
    spec.channel.noise_sigma = Some(CALIBRATED_NOISE);
    spec.grid.delta_e00 = (0..11).map(|i| 1.0 + 0.2 * i as f64).collect();
    let psr = evaluate(&spec).unwrap().mean_psr();
    let calibrated = (0.2..=0.8).contains(&psr[0]);
    let monotone = psr.windows(2).all(|w| w[1] >= w[0] - 0.05);
    let curve: Vec<String> = psr.iter().map(|p| format!("{p:.3}")).collect();
    verdict(
        calibrated && monotone,
        format!(
            "noise {CALIBRATED_NOISE}, {} packets per point, PSR [{}]",
            spec.trials * spec.packets,
            curve.join(", ")
        ),
    )
}

fn redundancy() -> Verdict {
    let mut spec = ExperimentSpec {
        packets: 100,
        width: 360,
        height: 240,
        seed: 7,
        ..ExperimentSpec::default()
    };
    spec.channel.occlusion_prob = Some(0.3);
    let one = run_trial(&spec, &cond(2.0, 1, true, "ideal"), 7)
        .unwrap()
        .metrics
        .psr;
    let six = run_trial(&spec, &cond(2.0, 6, true, "ideal"), 7)
        .unwrap()
        .metrics
        .psr;
    verdict(
        six >= one,
        format!("30% occlusion: 1 tile {one:.3}, 6 tiles {six:.3}"),
    )
}

fn motion_filter() -> Verdict {
    let mut spec = ExperimentSpec {
        packets: 40,
        width: 256,
        height: 256,
        seed: 8,
        ..ExperimentSpec::default()
    };
    spec.channel.noise_sigma = Some(0.3);
    spec.channel.jitter = Some(Jitter {
        translation_px: 4.0,
        rotation_deg: 0.3,
        scale: 0.0,
    });
    let mut c = cond(3.0, 1, true, "ideal");
    let off = run_trial(&spec, &c, 8).unwrap().metrics.psr;
    c.motion_comp = true;
    let on = run_trial(&spec, &c, 8).unwrap().metrics.psr;
    verdict(
        off < 0.5 && on - off >= 0.2,
        format!("jitter 4 px / 0.3 deg, noise 0.3: off {off:.3}, on {on:.3}"),
    )
}

fn sync_discipline() -> Verdict {
    let packets = 30;
    let src = textured_lab(160, 160, 9);
    let payloads: Vec<Payload> = (0..packets as u64).map(|f| Payload::new(2, f)).collect();
    let enc = encode_still(&src, &payloads, &ModulationParams::default()).unwrap();
    let cap = capture(&enc, &ChannelParams::ideal(60)).unwrap();
    let cfg = DecoderConfig::default();
    let (results, m) = stream_decode(&cap, &cfg);
    let steady = results.len() == packets && m.attempts == packets && m.fallbacks == 0;

    let r = cfg.resync_failures as usize;
    let mut dropped = cap.clone();
    dropped.drop_frame(21);
    let (after, md) = stream_decode(&dropped, &cfg);
    let decoded: Vec<u64> = after.iter().map(|p| p.payload.frame_num).collect();
    let missed = packets - after.len();
    // decoding resumes and stays contiguous up to the last packet
    let resumed = (packets as u64 - 10..packets as u64).all(|f| decoded.contains(&f));
    let recovered = md.fallbacks >= 1 && (1..=1 + r).contains(&missed) && resumed;
    verdict(
        steady && recovered,
        format!(
            "ideal: {} packets in {} attempts, {} fallbacks; frame drop: {} fallback(s), {missed} packets missed (R={r}), tail decoded {resumed}",
            results.len(),
            m.attempts,
            m.fallbacks,
            md.fallbacks
        ),
    )
}

fn roi_exactness() -> Verdict {
    let cfg = DecoderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_slack = 0usize;
    let mut cases = 0;
    let mut pass = true;
    for (tiles, w, h) in [(1, 180, 150), (6, 360, 240)] {
        for sigma in [0.0, 1.0] {
            for salt in [false, true] {
                let layout = TileLayout {
                    count: tiles,
                    ..TileLayout::default()
                };
                let mp = ModulationParams {
                    layout,
                    smoothing_sigma: sigma,
                    ..ModulationParams::default()
                };
                let lab = textured_lab(w, h, 10 + tiles as u64);
                let code = prepare_code_frame(&lab, &Payload::new(1, 3), &mp).unwrap();
                let mut d = DiffFrame {
                    width: w,
                    height: h,
                    data: (0..w * h)
                        .map(|i| {
                            2.0 * signed_offset(lab.l[i], code.smooth.s[i], code.depth.data[i])
                        })
                        .collect(),
                };
                if salt {
                    for _ in 0..40 {
                        let (x, y) = (rng.random_range(0..w), rng.random_range(0..h));
                        d.data[y * w + x] = if rng.random() { 5.0 } else { -5.0 };
                    }
                }
                let truth = code.plane.bbox().unwrap();
                let margin = kernel_radius(sigma) + 2;
                let outer = Rect {
                    x: truth.x.saturating_sub(margin),
                    y: truth.y.saturating_sub(margin),
                    w: truth.w + 2 * margin,
                    h: truth.h + 2 * margin,
                };
                let ok = match detect_roi(&d, &cfg) {
                    Some(roi) => {
                        let slack = [
                            truth.x.saturating_sub(roi.x),
                            truth.y.saturating_sub(roi.y),
                            roi.right().saturating_sub(truth.right()),
                            roi.bottom().saturating_sub(truth.bottom()),
                        ];
                        worst_slack = worst_slack.max(slack.into_iter().max().unwrap());
                        outer.contains_rect(&roi) && roi.contains_rect(&truth)
                    }
                    None => false,
                };
                pass &= ok;
                cases += 1;
            }
        }
    }
    verdict(pass, format!("{cases} fixtures (1/6 tiles, sigma 0/1, with and without salt), max slack {worst_slack} px"))
}

fn abs_time() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut exact = 0;
    let mut pass = true;
    for i in 0..20 {
        let f: u64 = rng.random_range(0..100_000);
        let fps: u32 = [24, 25, 30, 48, 50, 60, 120][rng.random_range(0..7)];
        let f = if i % 2 == 0 { f - f % fps as u64 } else { f };
        let got = frame_to_abs_time(f, fps);
        let num = 2000 * f;
        if num % fps as u64 == 0 {
            pass &= got == (num / fps as u64) as f64;
            exact += 1;
        } else {
            pass &= (got - num as f64 / fps as f64).abs() <= 1e-9 * got.max(1.0);
        }
    }
    verdict(pass, format!("20 pairs, {exact} with integer ms"))
}

fn ec_levels() -> Verdict {
    let spec = ExperimentSpec {
        packets: 50,
        seed: 12,
        ..ExperimentSpec::default()
    };
    let mut ideal = Vec::new();
    let mut noisy = Vec::new();
    for ec in EcLevel::ALL {
        let mut c = cond(2.0, 1, true, "ideal");
        c.ec_level = ec;
        ideal.push(run_trial(&spec, &c, 12).unwrap().metrics.psr);
        c.channel_preset = "iso50-s90".into();
        noisy.push(run_trial(&spec, &c, 12).unwrap().metrics.psr);
    }
    let fmt = |v: &[f64]| {
        EcLevel::ALL
            .iter()
            .zip(v)
            .map(|(e, p)| format!("{}={p:.2}", e.name()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    verdict(
        ideal.iter().all(|&p| p == 1.0),
        format!(
            "ideal {}; iso50-s90 (reported only) {}",
            fmt(&ideal),
            fmt(&noisy)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("oracle equivalence", oracle_equivalence),
        ("contrast speedup", speedup),
        ("mean preservation", mean_preservation),
        ("transition bound", transition_bound),
        ("ideal round trip", ideal_round_trip),
        ("noise monotonicity", noise_monotonicity),
        ("tile redundancy", redundancy),
        ("motion filter", motion_filter),
        ("sync discipline", sync_discipline),
        ("roi exactness", roi_exactness),
        ("absolute time", abs_time),
        ("error correction levels", ec_levels),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {:<24} {} ({:.1} s) {}",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
