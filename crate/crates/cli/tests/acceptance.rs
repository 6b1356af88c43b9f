//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p impulse-cli --test acceptance`. The process exits
//! non-zero when any criterion fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::process::Command;
use std::time::{Duration, Instant};

use impulse_core::classify::stratified_folds;
use impulse_core::corpus::{
    embed, gain_for_target_snr, synth_impulse, synth_noise, two_class_corpus, EmbedSpec, ImpulseParams, NoiseKind,
    NoiseParams, Offset, TwoClassSpec,
};
use impulse_core::detector::{event_for_onset, event_near, scan, DetectorConfig};
use impulse_core::features::{event_center, MfccExtractor};
use impulse_core::spectral::{dft, energy_freq, energy_time, magnitudes, spectral_stats, SpectralStats};
use impulse_core::{
    cross_validate, detect, detect_stream, hf_amplitude, save_wav, Algorithm, AudioBuffer, FeatureKind, FeatureVector,
    LabeledDataset, MfccConfig,
};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let t = Instant::now();
    let o = f();
    (o, t.elapsed())
}

fn random_frame(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn trial(kind: NoiseKind, seed: u64, snr_db: f64, seconds: f64) -> (AudioBuffer, usize) {
    let impulse = synth_impulse(&ImpulseParams { seed: 1_000 + seed, ..Default::default() }).unwrap();
    let noise = synth_noise(&NoiseParams { kind, duration_s: seconds, seed, rate_hz: 16_000 }).unwrap();
    let mut spec = EmbedSpec { impulse, noise, offset: Offset::Random, gain: 1.0, seed };
    spec.gain = gain_for_target_snr(&spec, snr_db).unwrap();
    let (mix, report) = embed(&spec).unwrap();
    (mix, report.offset)
}

fn hits(kind: NoiseKind, snr_db: f64) -> usize {
    let cfg = DetectorConfig::default();
    (0..100u64)
        .filter(|&seed| {
            let (mix, offset) = trial(kind, seed, snr_db, 1.0);
            event_near(&detect(&mix, &cfg).unwrap(), offset, cfg.hop).is_some()
        })
        .count()
}

fn c1_dft() -> Outcome {
    let (o, took) = timed(|| {
        let mut r = oracles::rng(1);
        let mut worst: f64 = 0.0;
        let mut symmetric = true;
        for i in 0..200 {
            let n = [1, 2, 4, 99, 128][i % 5];
            let frame = random_frame(&mut r, n);
            let got = dft(&frame, n).unwrap();
            for (g, (re, im)) in got.bins.iter().zip(oracles::naive_dft(&frame)) {
                worst = worst.max((g.re - re).abs()).max((g.im - im).abs());
            }
            for k in 1..n {
                let (a, b) = (got.bins[k], got.bins[n - k].conj());
                symmetric &= (a - b).norm() < 1e-9;
            }
        }
        outcome(worst < 1e-9 && symmetric, format!("max bin error {worst:.2e}, conjugate symmetric {symmetric}"))
    });
    let fast = took < Duration::from_secs(5);
    outcome(o.pass && fast, format!("{}, {:.2} s (limit 5 s)", o.detail, took.as_secs_f64()))
}

fn c2_parseval() -> Outcome {
    let mut r = oracles::rng(2);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let n = [1, 2, 4, 99, 128][i % 5];
        let frame = random_frame(&mut r, n);
        let t = energy_time(&frame);
        let f = energy_freq(&dft(&frame, n).unwrap());
        worst = worst.max((t - f).abs() / t.abs().max(f64::MIN_POSITIVE));
    }
    outcome(worst < 1e-9, format!("max relative gap {worst:.2e} (limit 1e-9)"))
}

fn c3_variance() -> Outcome {
    let mut r = oracles::rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let frame = random_frame(&mut r, 99);
        let mags = magnitudes(&dft(&frame, 99).unwrap());
        let s = spectral_stats(&mags, 30, 49).unwrap();
        let (mean, var) = oracles::two_pass_stats(&mags[30..=49]);
        worst = worst.max((s.mean - mean).abs()).max((s.variance - var).abs());
    }
    outcome(worst < 1e-12, format!("max deviation from two-pass oracle {worst:.2e} (limit 1e-12)"))
}

fn c4_delta() -> Outcome {
    let cfg = DetectorConfig::default();
    let mut fired = 0;
    let mut worst_var: f64 = 0.0;
    for offset in 0..99 {
        let mut b = AudioBuffer::silence(99, 16_000);
        b.samples[offset] = 1.0;
        let s = scan(&b, &cfg).unwrap();
        fired += s.events.len();
        worst_var = worst_var.max(s.max_variance);
    }
    outcome(fired == 0 && worst_var < 0.2, format!("{fired} detections over 99 offsets, max variance {worst_var:.2e}"))
}

fn c5_thresholds() -> Outcome {
    let cfg = DetectorConfig::default();
    let cases = [((0.549, 0.215), true), ((0.5, 0.215), false), ((0.549, 0.2), false)];
    let mut ok = true;
    let mut notes = Vec::new();
    for ((m, v), expected) in cases {
        let injected = SpectralStats { mean: m, variance: v, bin_lo: 30, bin_hi: 49 };
        let a = cfg.is_impulsive(&injected);
        ok &= a == expected;
        notes.push(format!("({m}, {v}) -> {a}"));
    }
    outcome(ok, notes.join(", "))
}

fn c6_low_snr() -> Outcome {
    let (o, took) = timed(|| {
        let mut ok = true;
        let mut notes = Vec::new();
        for kind in [NoiseKind::White, NoiseKind::Lowpass] {
            let low = hits(kind, -15.0);
            let high = hits(kind, 0.0);
            ok &= low >= 90 && high >= 99;
            notes.push(format!("{} -15 dB {low}/100, 0 dB {high}/100", kind.name()));
        }
        outcome(ok, format!("{} (need >= 90 and >= 99)", notes.join("; ")))
    });
    let fast = took < Duration::from_secs(60);
    outcome(o.pass && fast, format!("{}, {:.1} s (limit 60 s)", o.detail, took.as_secs_f64()))
}

fn c7_false_alarms() -> Outcome {
    let cfg = DetectorConfig::default();
    let mut ok = true;
    let mut notes = Vec::new();
    for kind in NoiseKind::ALL {
        let seconds = 100.0;
        let events: usize = (0..20u64)
            .map(|seed| {
                let n = synth_noise(&NoiseParams { kind, duration_s: seconds, seed, rate_hz: 16_000 }).unwrap();
                detect(&n, &cfg).unwrap().len()
            })
            .sum();
        let per_100s = events as f64 / 20.0;
        ok &= match kind {
            NoiseKind::BabbleLike => per_100s <= 1.0,
            _ => events == 0,
        };
        notes.push(format!("{} {events} events ({per_100s:.2} per 100 s)", kind.name()));
    }
    outcome(ok, format!("{} over 20 seeds x 100 s", notes.join("; ")))
}

fn c8_streaming() -> Outcome {
    let cfg = DetectorConfig::default();
    let mut r = oracles::rng(8);
    let mut mismatches = 0;
    for seed in 0..50u64 {
        let kind = NoiseKind::ALL[(seed % 3) as usize];
        let seconds = r.random_range(0.5..4.0);
        let (mix, _) = trial(kind, seed, r.random_range(-10.0..10.0), seconds);
        let mut chunks = Vec::new();
        let mut pos = 0;
        while pos < mix.len() {
            let end = (pos + r.random_range(1..20_000)).min(mix.len());
            chunks.push(mix.samples[pos..end].to_vec());
            pos = end;
        }
        let streamed: Vec<_> = detect_stream(chunks, 16_000, &cfg).unwrap().collect();
        if streamed != detect(&mix, &cfg).unwrap() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 50 mixtures differ"))
}

fn c9_gain() -> Outcome {
    let cfg = DetectorConfig::default();
    let mut failures = 0;
    let mut checks = 0;
    for seed in 0..10u64 {
        let kind = NoiseKind::ALL[(seed % 3) as usize];
        let (mix, _) = trial(kind, seed, 0.0, 3.0);
        let base = detect(&mix, &cfg).unwrap();
        for block in 0..3 {
            for g in [0.1, 0.5, 2.0, 10.0] {
                let mut scaled = mix.clone();
                scaled.samples[block * 16_000..(block + 1) * 16_000].iter_mut().for_each(|s| *s *= g);
                let got = detect(&scaled, &cfg).unwrap();
                checks += 1;
                let same = got.len() == base.len()
                    && got.iter().zip(&base).all(|(a, b)| {
                        a.start_sample == b.start_sample
                            && (a.mean - b.mean).abs() < 1e-12
                            && (a.variance - b.variance).abs() < 1e-12
                    });
                failures += usize::from(!same);
            }
        }
    }
    outcome(failures == 0, format!("{failures} of {checks} scaled blocks changed an event"))
}

fn c10_mfcc() -> Outcome {
    let ex = MfccExtractor::new(MfccConfig::default(), 16_000).unwrap();
    let mut r = oracles::rng(10);
    let mut worst: f64 = 0.0;
    let mut worst_gain: f64 = 0.0;
    for _ in 0..50 {
        let ctx = random_frame(&mut r, 512);
        let got = ex.coefficients(&ctx);
        for (g, w) in got.iter().zip(oracles::mfcc_reference(&ctx, 16_000.0)) {
            worst = worst.max((g - w).abs());
        }
        let g: f64 = r.random_range(0.05..20.0);
        let scaled: Vec<f64> = ctx.iter().map(|x| x * g).collect();
        let shifted = ex.coefficients(&scaled);
        let expected_c0 = got[0] + 26f64.sqrt() * (g * g).ln();
        worst_gain = worst_gain.max((shifted[0] - expected_c0).abs());
        for i in 1..13 {
            worst_gain = worst_gain.max((shifted[i] - got[i]).abs());
        }
    }
    outcome(
        worst < 1e-6 && worst_gain < 1e-9,
        format!("max oracle error {worst:.2e} (limit 1e-6), gain property error {worst_gain:.2e} (limit 1e-9)"),
    )
}

fn dataset(points: &[(Vec<f64>, usize)]) -> LabeledDataset {
    let names = ["gunshot", "other"];
    let vectors: Vec<FeatureVector> = points
        .iter()
        .map(|(x, c)| FeatureVector { values: x.clone(), kind: FeatureKind::Mfcc, label: Some(names[*c].into()) })
        .collect();
    LabeledDataset::from_vectors(&vectors).unwrap()
}

fn c11_cross_validation() -> Outcome {
    let fixture: Vec<(Vec<f64>, usize)> = (0..16)
        .map(|i| {
            let c = i % 2;
            let x = if c == 0 { 1.0 + (i / 2) as f64 * 0.1 } else { -1.0 - (i / 2) as f64 * 0.1 };
            (vec![x, ((i * 7) % 5) as f64], c)
        })
        .collect();
    let sep = cross_validate(&dataset(&fixture), &Algorithm::svm(), 8, 0).unwrap();
    let separable = sep.tpr == 1.0 && sep.fpr == 0.0;

    let mut partition_ok = true;
    let mut r = oracles::rng(11);
    for seed in 0..20u64 {
        let n0 = r.random_range(8..60);
        let n1 = r.random_range(8..60);
        let pts: Vec<(Vec<f64>, usize)> = (0..n0 + n1).map(|i| (vec![i as f64], usize::from(i >= n0))).collect();
        let data = dataset(&pts);
        let folds = stratified_folds(&data, 8, seed).unwrap();
        for f in 0..8 {
            let size = folds.iter().filter(|&&x| x == f).count();
            partition_ok &= size.abs_diff((n0 + n1) / 8) <= 1;
            for (class, n) in [(0, n0), (1, n1)] {
                let k = (0..n0 + n1).filter(|&i| folds[i] == f && data.labels[i] == class).count();
                partition_ok &= k.abs_diff(n / 8) <= 1;
            }
        }
        partition_ok &= folds.iter().all(|&f| f < 8);
    }

    let mut total = 0.0;
    for seed in 0..20u64 {
        let mut pts = oracles::separable_blobs(80, 1.0, seed);
        let mut labels: Vec<usize> = pts.iter().map(|p| p.1).collect();
        labels.shuffle(&mut r);
        pts.iter_mut().zip(labels).for_each(|(p, l)| p.1 = l);
        total += cross_validate(&dataset(&pts), &Algorithm::svm(), 8, seed).unwrap().accuracy;
    }
    let baseline = total / 20.0;
    outcome(
        separable && partition_ok && (0.35..=0.65).contains(&baseline),
        format!(
            "fixture TPR {:.3} FPR {:.3}, partition invariants {partition_ok}, permuted-label accuracy {baseline:.3} (need 0.35..0.65)",
            sep.tpr, sep.fpr
        ),
    )
}

fn c12_ordering() -> Outcome {
    let cfg = DetectorConfig::default();
    let items = two_class_corpus(&TwoClassSpec { per_class: 100, seed: 0, ..Default::default() }).unwrap();
    let ex = MfccExtractor::new(MfccConfig::default(), 16_000).unwrap();
    let mut hf = Vec::new();
    let mut mf = Vec::new();
    for it in &items {
        let (ev, _) = event_for_onset(&it.mixture, &cfg, it.snr.offset).unwrap();
        hf.push(hf_amplitude(&ev).with_label(it.label.clone()));
        mf.push(ex.extract(&it.mixture, event_center(&ev, cfg.window_len)).with_label(it.label.clone()));
    }
    let svm = Algorithm::svm();
    let h = cross_validate(&LabeledDataset::from_vectors(&hf).unwrap(), &svm, 8, 1).unwrap();
    let m = cross_validate(&LabeledDataset::from_vectors(&mf).unwrap(), &svm, 8, 1).unwrap();
    outcome(
        m.tpr >= 0.90 && m.tpr >= h.tpr,
        format!(
            "linear SVM, {} trials: mfcc TPR {:.3} FPR {:.3}, hf_amplitude TPR {:.3} FPR {:.3}",
            items.len(),
            m.tpr,
            m.fpr,
            h.tpr,
            h.fpr
        ),
    )
}

fn c13_performance() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("minute.wav");
    let noise = synth_noise(&NoiseParams { kind: NoiseKind::White, duration_s: 60.0, seed: 13, rate_hz: 16_000 }).unwrap();
    save_wav(&noise, &path).unwrap();
    let mut times = Vec::new();
    let mut ok = true;
    for _ in 0..3 {
        let t = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_impulse")).arg("detect").arg(&path).output().unwrap();
        times.push(t.elapsed().as_secs_f64());
        ok &= out.status.success();
    }
    times.sort_by(f64::total_cmp);
    let median = times[1];
    outcome(
        ok && median < 1.2,
        format!("60 s of audio in {median:.3} s median of 3 runs ({:.0}x real time, limit 1.2 s)", 60.0 / median),
    )
}

fn detectability() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for kind in NoiseKind::ALL {
        let h = hits(kind, -5.0);
        ok &= h >= 95;
        notes.push(format!("{} {h}/100", kind.name()));
    }
    outcome(ok, format!("at -5 dB: {} (need >= 95)", notes.join(", ")))
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Check; 13] = [
        ("DFT matches naive summation", c1_dft),
        ("time and frequency energy agree", c2_parseval),
        ("band variance matches two-pass oracle", c3_variance),
        ("single-sample impulse never detected", c4_delta),
        ("strict threshold comparison", c5_thresholds),
        ("burst detected at low SNR", c6_low_snr),
        ("no false alarms on noise alone", c7_false_alarms),
        ("streaming equals offline detection", c8_streaming),
        ("per-block gain invariance", c9_gain),
        ("MFCC matches straight-line reference", c10_mfcc),
        ("cross-validation protocol", c11_cross_validation),
        ("MFCC outranks high-band amplitudes", c12_ordering),
        ("detection speed", c13_performance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {:>2}: {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let d = detectability();
    failed += usize::from(!d.pass);
    println!("invariant   : {} detectable at -5 dB in every noise kind: {}", if d.pass { "PASS" } else { "FAIL" }, d.detail);
    println!("{failed} check(s) failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
