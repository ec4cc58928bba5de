//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use napres::audio::read_wav;
use napres::formant::{
    fit_gmm, formants_from_gmm, histogram, lpc_track, stride_for_count, track_mean, FormantReport,
    Method,
};
use napres::harness::{long_csv, run_sweep, summarize, summary_csv, synth_vowel};
use napres::io::{
    alignment_csv, cloud_csv, fit_csv, fmt_sig, formants_csv, histogram_csv, parse_cloud_csv,
};
use napres::pulse::{estimate_f0, napres};
use napres::{NapresParams, ReassignedPointCloud, Waveform};

use crate::args::{sweep_config, CropArgs, FormantsCmd, NapresCmd, RenderCmd, SweepCmd};
use crate::plot::render_cloud;

/// Pitch search band for `--estimate-f0`, Hz.
const F0_BAND: (f64, f64) = (50.0, 500.0);

/// A flag combination or value that is invalid before any work starts.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl fmt::Display) -> anyhow::Error {
    UsageError(msg.to_string()).into()
}

fn check_crop(crop: &CropArgs) -> Result<()> {
    if let Some(s) = crop.start {
        if !(s >= 0.0) {
            return Err(usage(format!("--start must be non-negative, got {s}")));
        }
    }
    if let (Some(s), Some(e)) = (crop.start, crop.end) {
        if !(e > s) {
            return Err(usage(format!("--end ({e}) must be after --start ({s})")));
        }
    }
    Ok(())
}

fn load(path: &Path, crop: &CropArgs) -> Result<Waveform> {
    let w = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    if crop.start.is_none() && crop.end.is_none() {
        return Ok(w);
    }
    let rate = w.sample_rate() as f64;
    let start = (crop.start.unwrap_or(0.0) * rate).round() as usize;
    let end = crop.end.map_or(w.len(), |e| (e * rate).round() as usize);
    w.slice(start, end).context("crop selects no samples")
}

fn resolve_f0(f0: Option<f64>, estimate: bool, w: &Waveform) -> Result<f64> {
    match (f0, estimate) {
        (Some(f), _) => Ok(f),
        (None, true) => {
            let f = estimate_f0(w, F0_BAND).context("estimating f0")?;
            log::info!("estimated f0 {f:.2} Hz");
            Ok(f)
        }
        (None, false) => Err(usage("--f0 or --estimate-f0 is required")),
    }
}

fn validated(mut params: NapresParams, f0: Option<f64>) -> Result<NapresParams> {
    // f0 is checked separately when it comes from the signal.
    params.f0_hz = f0.unwrap_or(100.0);
    params.validate().map_err(usage)?;
    Ok(params)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn save_png(cloud: &ReassignedPointCloud, width: u32, height: u32, path: &Path) -> Result<()> {
    render_cloud(cloud, width, height)
        .save(path)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn napres_cmd(cmd: &NapresCmd) -> Result<()> {
    let params = validated(
        cmd.pulse.params(0.0, &cmd.analysis, &cmd.prune),
        cmd.pitch.f0,
    )?;
    check_crop(&cmd.crop)?;
    let w = load(&cmd.input, &cmd.crop)?;
    let f0 = resolve_f0(cmd.pitch.f0, cmd.pitch.estimate_f0, &w)?;
    let out = napres(
        &w,
        &NapresParams {
            f0_hz: f0,
            ..params
        },
    )
    .context("pulse-averaged analysis")?;

    out_dir(&cmd.out)?;
    write(&cmd.out, "cloud.csv", cloud_csv(&out.cloud))?;
    write(&cmd.out, "alignment.csv", alignment_csv(&out.alignment))?;
    if cmd.plot {
        save_png(
            &out.cloud,
            cmd.image.width,
            cmd.image.height,
            &cmd.out.join("cloud.png"),
        )?;
    }
    println!(
        "J={} width_frames={} points={}",
        out.alignment.j,
        out.alignment.width_w,
        out.cloud.len()
    );
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn formants_cmd(cmd: &FormantsCmd) -> Result<()> {
    if cmd.k == 0 || cmd.gmm.components == 0 || cmd.lpc.lpc_frames == 0 {
        return Err(usage("-k, --components and --lpc-frames must be positive"));
    }
    if !(cmd.gmm.bin_width > 0.0) {
        return Err(usage("--bin-width must be positive"));
    }
    let lpc = cmd.lpc.params();
    lpc.validate().map_err(usage)?;
    let params = validated(
        cmd.pulse.params(0.0, &cmd.analysis, &cmd.prune),
        cmd.pitch.f0,
    )?;
    check_crop(&cmd.crop)?;

    let from_cloud = is_csv(&cmd.input);
    if from_cloud && cmd.methods.contains(&Method::Lpc) && cmd.methods.len() == 1 {
        return Err(usage("LPC needs a WAV input, not a point-cloud CSV"));
    }
    let methods: Vec<Method> = if from_cloud {
        vec![Method::NapresGmm]
    } else {
        cmd.methods.clone()
    };
    if !from_cloud
        && methods.contains(&Method::NapresGmm)
        && cmd.pitch.f0.is_none()
        && !cmd.pitch.estimate_f0
    {
        return Err(usage(
            "--f0 or --estimate-f0 is required for NAPReS+GMM on a WAV input",
        ));
    }

    let wave = if from_cloud {
        None
    } else {
        Some(load(&cmd.input, &cmd.crop)?)
    };
    out_dir(&cmd.out)?;
    let mut reports = Vec::new();
    for method in methods {
        let report = match method {
            Method::NapresGmm => {
                let cloud = match &wave {
                    None => {
                        let text = fs::read_to_string(&cmd.input)
                            .with_context(|| format!("reading {}", cmd.input.display()))?;
                        Ok(parse_cloud_csv(&text)?)
                    }
                    Some(w) => {
                        let f0 = resolve_f0(cmd.pitch.f0, cmd.pitch.estimate_f0, w)?;
                        napres(
                            w,
                            &NapresParams {
                                f0_hz: f0,
                                ..params.clone()
                            },
                        )
                        .map(|o| o.cloud)
                    }
                };
                gmm_report(cloud, cmd)?
            }
            Method::Lpc => {
                let w = wave.as_ref().expect("LPC only runs on WAV input");
                let stride =
                    stride_for_count(w.duration(), lpc.window_ms * 1e-3, cmd.lpc.lpc_frames);
                match lpc_track(w, &lpc, cmd.k, 0.0, stride) {
                    Ok(track) => track_mean(&track, cmd.k),
                    Err(e) => {
                        log::warn!("LPC failed: {e}");
                        FormantReport::failed(Method::Lpc, cmd.k)
                    }
                }
            }
        };
        reports.push(report);
    }

    let meta = [
        ("input", cmd.input.display().to_string()),
        ("k", cmd.k.to_string()),
        ("seed", cmd.seed.to_string()),
        ("gmm_components", cmd.gmm.components.to_string()),
        ("bin_width", fmt_sig(cmd.gmm.bin_width)),
        ("weighting", cmd.gmm.weighting.to_string()),
        ("lpc_order", lpc.order.to_string()),
        ("lpc_rate", lpc.analysis_rate(cmd.k).to_string()),
        ("lpc_frames", cmd.lpc.lpc_frames.to_string()),
    ];
    let csv = formants_csv(&reports, &meta);
    write(&cmd.out, "formants.csv", &csv)?;
    print!(
        "{}",
        csv.lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    );
    Ok(())
}

/// Histogram, fit and report; pipeline failures become a failed report.
fn gmm_report(
    cloud: napres::Result<ReassignedPointCloud>,
    cmd: &FormantsCmd,
) -> Result<FormantReport> {
    let fitted = cloud.and_then(|cloud| {
        let h = histogram(&cloud, cmd.gmm.bin_width, cmd.gmm.weighting)?;
        let fit = fit_gmm(&h, cmd.gmm.components, cmd.seed)?;
        Ok((h, fit))
    });
    match fitted {
        Ok((h, fit)) => {
            write(&cmd.out, "histogram.csv", histogram_csv(&h))?;
            write(&cmd.out, "fit.csv", fit_csv(&h, &fit))?;
            Ok(formants_from_gmm(&fit, cmd.k))
        }
        Err(e) => {
            log::warn!("NAPReS+GMM failed: {e}");
            Ok(FormantReport::failed(Method::NapresGmm, cmd.k))
        }
    }
}

pub fn sweep_cmd(cmd: &SweepCmd) -> Result<()> {
    let spec = cmd.vowel.spec();
    let placeholder = cmd.pitch.f0.unwrap_or(spec.f0);
    let cfg = sweep_config(cmd, placeholder);
    cfg.validate().map_err(usage)?;
    let (clean, source) = if cmd.synth {
        spec.validate().map_err(usage)?;
        let formants: Vec<String> = spec
            .formants
            .iter()
            .map(|(f, bw)| format!("{}:{}", fmt_sig(*f), fmt_sig(*bw)))
            .collect();
        let source = format!(
            "synth f0={} formants={} duration={} sample_rate={} pulse_shape={} jitter={}",
            fmt_sig(spec.f0),
            formants.join(","),
            fmt_sig(spec.duration),
            spec.sample_rate,
            spec.pulse_shape,
            fmt_sig(spec.jitter)
        );
        (synth_vowel(&spec, cmd.seed)?, source)
    } else {
        let path = cmd
            .input
            .as_ref()
            .expect("clap requires --input without --synth");
        let w = load(
            path,
            &CropArgs {
                start: None,
                end: None,
            },
        )?;
        (w, format!("wav {}", path.display()))
    };
    let f0 = if cmd.synth && !cmd.pitch.estimate_f0 {
        placeholder
    } else {
        resolve_f0(cmd.pitch.f0, cmd.pitch.estimate_f0, &clean)?
    };
    let mut cfg = cfg;
    cfg.napres.f0_hz = f0;

    let report = run_sweep(&clean, &cfg)?;
    out_dir(&cmd.out)?;
    let source_line = format!("# source={source}\n");
    write(
        &cmd.out,
        "sweep.csv",
        format!("{source_line}{}", long_csv(&report)),
    )?;
    write(
        &cmd.out,
        "summary.csv",
        format!("{source_line}{}", summary_csv(&report)),
    )?;
    let table = summarize(&report);
    write(&cmd.out, "table.txt", &table)?;
    print!("{table}");
    Ok(())
}

pub fn render_cmd(cmd: &RenderCmd) -> Result<()> {
    if cmd.image.width == 0 || cmd.image.height == 0 {
        return Err(usage("image size must be positive"));
    }
    let text = fs::read_to_string(&cmd.input)
        .with_context(|| format!("reading {}", cmd.input.display()))?;
    let cloud = parse_cloud_csv(&text)?;
    if let Some(parent) = cmd.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        out_dir(parent)?;
    }
    save_png(&cloud, cmd.image.width, cmd.image.height, &cmd.out)
}
