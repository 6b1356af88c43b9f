use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use impulse_core::classify::format_table;
use impulse_core::corpus::{
    embed, gain_for_target_snr, synth_impulse, synth_noise, synth_tonal_impulse, EmbedSpec, ImpulseParams, NoiseKind,
    NoiseParams, Offset, TonalParams, TrialRecord,
};
use impulse_core::detector::{read_events_jsonl, scan, write_events_jsonl};
use impulse_core::features::{event_center, export_features, import_features, MfccExtractor};
use impulse_core::{cross_validate, hf_amplitude, load_wav, save_wav, AudioBuffer, FeatureKind, LabeledDataset};
use serde_json::json;

use crate::config::FileConfig;
use crate::manifest::{manifest_path, RunManifest};
use crate::{Cli, Command, DetectArgs, EmbedArgs, EvalArgs, FeaturesArgs, SynthKind};

const SYNTH_RATE_HZ: u32 = 16_000;

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Detect(a) => detect(a, &cfg),
        Command::Embed(a) => embed_cmd(a, &cfg),
        Command::Synth(a) => synth(&a.what, &cfg),
        Command::Features(a) => features(a, &cfg),
        Command::Eval(a) => eval(a, &cfg),
    }
}

fn load(path: &Path) -> Result<AudioBuffer> {
    load_wav(path).with_context(|| format!("loading {}", path.display()))
}

fn detect(a: &DetectArgs, cfg: &FileConfig) -> Result<()> {
    let mut dc = cfg.detector.clone();
    if let Some(h) = a.hop {
        dc.hop = h;
    }
    if let Some(m) = a.mean_th {
        dc.mean_threshold = m;
    }
    if let Some(v) = a.var_th {
        dc.var_threshold = v;
    }
    dc.whole_file_norm |= a.whole_file_norm;

    let audio = load(&a.input)?;
    let summary = scan(&audio, &dc).with_context(|| format!("analysing {}", a.input.display()))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{} events", summary.events.len())?;
    for (i, e) in summary.events.iter().enumerate() {
        writeln!(
            out,
            "event {i}: t={:.4} s sample={} window={} mean={:.4} var={:.4}",
            e.start_time_s, e.start_sample, e.window_index, e.mean, e.variance
        )?;
    }
    writeln!(
        out,
        "max mean {:.4}, max variance {:.4} over {} windows",
        summary.max_mean, summary.max_variance, summary.windows
    )?;

    if let Some(path) = &a.json {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_events_jsonl(&mut w, &summary.events)?;
        w.flush()?;
        let mut m = RunManifest::new("detect", serde_json::to_value(&dc)?, 0);
        m.hash_input(&a.input)?;
        m.results = json!({
            "events": summary.events.len(),
            "windows": summary.windows,
            "max_mean": summary.max_mean,
            "max_variance": summary.max_variance,
        });
        m.write_beside(path)?;
    }
    Ok(())
}

fn embed_cmd(a: &EmbedArgs, cfg: &FileConfig) -> Result<()> {
    let seed = cfg.seed(a.seed);
    let impulse = load(&a.impulse)?;
    let noise = load(&a.noise)?;
    let offset = match a.offset {
        Some(o) => Offset::At(o),
        None => Offset::Random,
    };
    let mut spec = EmbedSpec {
        impulse,
        noise,
        offset,
        gain: a.gain.unwrap_or(1.0),
        seed,
    };
    if let Some(target) = a.target_snr {
        spec.gain = gain_for_target_snr(&spec, target)?;
    }
    let (mixture, report) = embed(&spec)?;
    let clipped = impulse_core::audio::save_wav_clipped(&mixture, &a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    if clipped > 0 {
        eprintln!("warning: {clipped} samples clipped to [-1, 1] in {}", a.output.display());
    }

    let mut m = RunManifest::new(
        "embed",
        json!({ "offset": a.offset, "random": a.random, "gain": a.gain, "target_snr": a.target_snr }),
        seed,
    );
    let impulse_hash = m.hash_input(&a.impulse)?;
    let noise_hash = m.hash_input(&a.noise)?;
    let trial = TrialRecord {
        mixture_path: a.output.display().to_string(),
        impulse_params: json!({ "path": a.impulse.display().to_string(), "sha256": impulse_hash }),
        noise_params: json!({ "path": a.noise.display().to_string(), "sha256": noise_hash }),
        offset: report.offset,
        gain: spec.gain,
        snr_db: report.snr_db,
        label: String::new(),
    };
    m.results = json!({ "trial": trial, "snr": report, "clipped_samples": clipped });
    m.write_beside(&a.output)?;
    println!(
        "offset {} gain {:.6} snr {:.3} dB -> {}",
        report.offset,
        spec.gain,
        report.snr_db,
        a.output.display()
    );
    Ok(())
}

fn synth(what: &SynthKind, cfg: &FileConfig) -> Result<()> {
    let (buffer, params, seed, output, name) = match what {
        SynthKind::Impulse {
            duration_s,
            decay_s,
            hf_emphasis,
            seed,
            output,
        } => {
            let p = ImpulseParams {
                duration_s: *duration_s,
                decay_s: *decay_s,
                hf_emphasis: *hf_emphasis,
                seed: cfg.seed(*seed),
                rate_hz: SYNTH_RATE_HZ,
            };
            (synth_impulse(&p)?, serde_json::to_value(&p)?, p.seed, output, "synth impulse")
        }
        SynthKind::Tonal {
            freq_hz,
            duration_s,
            decay_s,
            seed,
            output,
        } => {
            let p = TonalParams {
                freq_hz: *freq_hz,
                duration_s: *duration_s,
                decay_s: *decay_s,
                seed: cfg.seed(*seed),
                rate_hz: SYNTH_RATE_HZ,
            };
            (synth_tonal_impulse(&p)?, serde_json::to_value(&p)?, p.seed, output, "synth tonal")
        }
        SynthKind::Noise {
            kind,
            duration_s,
            seed,
            output,
        } => {
            let kind: NoiseKind = kind.parse().map_err(anyhow::Error::msg)?;
            let p = NoiseParams {
                kind,
                duration_s: *duration_s,
                seed: cfg.seed(*seed),
                rate_hz: SYNTH_RATE_HZ,
            };
            (synth_noise(&p)?, serde_json::to_value(&p)?, p.seed, output, "synth noise")
        }
    };
    save_wav(&buffer, output).with_context(|| format!("writing {}", output.display()))?;
    RunManifest::new(name, params, seed).write_beside(output)?;
    println!("{} samples -> {}", buffer.len(), output.display());
    Ok(())
}

fn features(a: &FeaturesArgs, cfg: &FileConfig) -> Result<()> {
    let kind: FeatureKind = a.kind.parse().map_err(anyhow::Error::msg)?;
    let audio = load(&a.input)?;
    let file = File::open(&a.events).with_context(|| format!("opening {}", a.events.display()))?;
    let events = read_events_jsonl(BufReader::new(file)).with_context(|| format!("reading events {}", a.events.display()))?;

    let mut rows = Vec::new();
    if a.append && a.output.exists() {
        let existing = File::open(&a.output)?;
        rows = import_features(existing, kind).with_context(|| format!("reading {}", a.output.display()))?;
    }
    let before = rows.len();
    match kind {
        FeatureKind::HfAmplitude => {
            rows.extend(events.iter().map(|e| hf_amplitude(e).with_label(&a.label)));
        }
        FeatureKind::Mfcc => {
            let ex = MfccExtractor::new(cfg.mfcc.clone(), audio.sample_rate_hz)?;
            for e in &events {
                let center = event_center(e, cfg.detector.window_len);
                rows.push(ex.extract(&audio, center).with_label(&a.label));
            }
        }
    }
    if let Some(first) = rows.first() {
        if let Some(bad) = rows.iter().find(|r| r.dim() != first.dim()) {
            bail!("feature width {} does not match existing rows of width {}", bad.dim(), first.dim());
        }
    }
    let file = File::create(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let mut w = BufWriter::new(file);
    export_features(&mut w, &rows)?;
    w.flush()?;

    let mpath = manifest_path(&a.output);
    let mut m = if a.append && mpath.exists() {
        RunManifest::read(&mpath)?
    } else {
        RunManifest::new(
            "features",
            json!({ "kind": kind, "detector": cfg.detector, "mfcc": cfg.mfcc }),
            0,
        )
    };
    m.hash_input(&a.input)?;
    m.hash_input(&a.events)?;
    m.results = json!({ "kind": kind, "rows": rows.len() });
    m.write_beside(&a.output)?;
    println!("{} rows ({} new) -> {}", rows.len(), rows.len() - before, a.output.display());
    Ok(())
}

/// Feature kind recorded in the CSV's manifest, else guessed from the width.
fn infer_kind(data: &Path, width: usize) -> FeatureKind {
    let from_manifest = RunManifest::read(&manifest_path(data))
        .ok()
        .and_then(|m| serde_json::from_value(m.results.get("kind")?.clone()).ok());
    from_manifest.unwrap_or(if width == impulse_core::DetectorConfig::default().band_len() {
        FeatureKind::HfAmplitude
    } else {
        FeatureKind::Mfcc
    })
}

fn eval(a: &EvalArgs, cfg: &FileConfig) -> Result<()> {
    let seed = cfg.seed(a.seed);
    let folds = a.folds.or(cfg.folds).unwrap_or(8);
    let algo = cfg.algorithm(&a.algo)?;

    let text = std::fs::read_to_string(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let width = text.lines().next().map_or(0, |h| h.split(',').count().saturating_sub(1));
    let kind = infer_kind(&a.data, width);
    let vectors = import_features(text.as_bytes(), kind).with_context(|| format!("parsing {}", a.data.display()))?;
    let data = LabeledDataset::from_vectors(&vectors)?;
    let report = cross_validate(&data, &algo, folds, seed)?;

    print!("{}", format_table(std::slice::from_ref(&report)));
    let t = report.totals();
    println!(
        "{} folds, seed {}, positive class '{}': tp {} fp {} tn {} fn {}, accuracy {:.3}",
        folds, seed, report.positive_class, t.tp, t.fp, t.tn, t.fn_, report.accuracy
    );

    let out = a.output.clone().unwrap_or_else(|| {
        let mut p = a.data.as_os_str().to_owned();
        p.push(".report.json");
        PathBuf::from(p)
    });
    std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", out.display()))?;
    let mut m = RunManifest::new(
        "eval",
        json!({ "algorithm": algo, "folds": folds, "feature_kind": kind }),
        seed,
    );
    m.hash_input(&a.data)?;
    m.write_beside(&out)?;
    Ok(())
}
