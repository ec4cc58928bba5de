//! CSV formats.
//!
//! Every file starts with `# key=value` comment lines echoing the
//! configuration that produced it, followed by a header row. Numbers are
//! printed with at most nine significant digits so output is byte-stable.
//!
//! * cloud: `t_sec,f_hz,mag_db`
//! * alignment: `peak_frame,peak_time_sec,p_value` (comments carry `J`,
//!   `width_frames` and `f0_hz`)
//! * formants: `method,F1,...,Fk,failures`, empty fields for failures
//! * histogram: `bin_lo_hz,bin_hi_hz,count`
//! * fit: `f_hz,histogram,fit`

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::formant::{FormantReport, FrequencyHistogram, GmmFit};
use crate::pulse::PulseAlignment;
use crate::reassign::{CloudPoint, PruneParams, ReassignedPointCloud};
use crate::spectral::AnalysisParams;

/// Formats `v` with at most nine significant digits, trailing zeros removed.
/// Very small or very large values use exponent notation.
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    if !(-6..=15).contains(&magnitude) {
        let s = format!("{v:.8e}");
        let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (8 - magnitude).max(0) as usize;
    let s = trim_zeros(&format!("{v:.decimals$}"));
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn comments(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

/// Comment lines and data lines of a CSV file, header checked.
struct Parsed<'a> {
    meta: BTreeMap<String, String>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn parse<'a>(text: &'a str, header: Option<&str>) -> Result<(Parsed<'a>, String)> {
    let mut meta = BTreeMap::new();
    let mut rows = Vec::new();
    let mut head: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match &head {
            None => {
                if let Some(h) = header {
                    if line != h {
                        return Err(Error::Csv {
                            line: i + 1,
                            message: format!("expected header '{h}', got '{line}'"),
                        });
                    }
                }
                head = Some(line.to_string());
            }
            Some(_) => rows.push((i + 1, line.split(',').collect())),
        }
    }
    let head = head.ok_or(Error::Csv {
        line: 0,
        message: "missing header".into(),
    })?;
    Ok((Parsed { meta, rows }, head))
}

fn number(line: usize, s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Csv {
        line,
        message: format!("bad number '{s}'"),
    })
}

fn expect_fields(line: usize, fields: &[&str], n: usize) -> Result<()> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(Error::Csv {
            line,
            message: format!("expected {n} fields, got {}", fields.len()),
        })
    }
}

pub const CLOUD_HEADER: &str = "t_sec,f_hz,mag_db";

pub fn cloud_csv(cloud: &ReassignedPointCloud) -> String {
    let a = &cloud.analysis;
    let p = &cloud.prune;
    let mut s = comments(&[
        ("sample_rate", cloud.sample_rate.to_string()),
        ("window_len", a.window_len.to_string()),
        ("hop", a.hop.to_string()),
        ("fft_len", a.fft_len.to_string()),
        ("input", a.input.to_string()),
        ("amp_threshold_db", fmt_sig(p.amp_threshold_db)),
        ("f_min", fmt_sig(p.f_min)),
        ("f_max", fmt_sig(p.f_max)),
        ("stability_limit", fmt_sig(p.stability_limit)),
        ("duration_sec", fmt_sig(cloud.source_duration)),
        ("points", cloud.points.len().to_string()),
    ]);
    s.push_str(CLOUD_HEADER);
    s.push('\n');
    for pt in &cloud.points {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_sig(pt.t_sec),
            fmt_sig(pt.f_hz),
            fmt_sig(pt.mag_db)
        );
    }
    s
}

/// Parses a cloud CSV. Missing configuration comments fall back to defaults.
pub fn parse_cloud_csv(text: &str) -> Result<ReassignedPointCloud> {
    let (parsed, _) = parse(text, Some(CLOUD_HEADER))?;
    let mut points = Vec::with_capacity(parsed.rows.len());
    for (line, f) in &parsed.rows {
        expect_fields(*line, f, 3)?;
        points.push(CloudPoint {
            t_sec: number(*line, f[0])?,
            f_hz: number(*line, f[1])?,
            mag_db: number(*line, f[2])?,
        });
    }
    let meta = &parsed.meta;
    let get = |k: &str| meta.get(k).and_then(|v| v.parse::<f64>().ok());
    let get_usize = |k: &str| meta.get(k).and_then(|v| v.parse::<usize>().ok());
    let da = AnalysisParams::default();
    let dp = PruneParams::default();
    let duration =
        get("duration_sec").unwrap_or_else(|| points.iter().map(|p| p.t_sec).fold(0.0, f64::max));
    Ok(ReassignedPointCloud {
        points,
        source_duration: duration,
        analysis: AnalysisParams {
            window_len: get_usize("window_len").unwrap_or(da.window_len),
            hop: get_usize("hop").unwrap_or(da.hop),
            fft_len: get_usize("fft_len").unwrap_or(da.fft_len),
            input: meta
                .get("input")
                .and_then(|v| v.parse().ok())
                .unwrap_or(da.input),
        },
        prune: PruneParams {
            amp_threshold_db: get("amp_threshold_db").unwrap_or(dp.amp_threshold_db),
            f_min: get("f_min").unwrap_or(dp.f_min),
            f_max: get("f_max").unwrap_or(dp.f_max),
            stability_limit: get("stability_limit").unwrap_or(dp.stability_limit),
        },
        sample_rate: get_usize("sample_rate").unwrap_or(0) as u32,
    })
}

pub const ALIGNMENT_HEADER: &str = "peak_frame,peak_time_sec,p_value";

pub fn alignment_csv(a: &PulseAlignment) -> String {
    let mut s = comments(&[
        ("J", a.j.to_string()),
        ("width_frames", a.width_w.to_string()),
        ("f0_hz", fmt_sig(a.f0_hz)),
        ("template_start", a.template_start.to_string()),
        ("hop", a.hop.to_string()),
        ("sample_rate", a.sample_rate.to_string()),
    ]);
    s.push_str(ALIGNMENT_HEADER);
    s.push('\n');
    for &pk in &a.peaks {
        let _ = writeln!(
            s,
            "{},{},{}",
            pk,
            fmt_sig(a.peak_time(pk)),
            fmt_sig(a.correlation[pk])
        );
    }
    s
}

/// Alignment CSV contents: the `J`, `width_frames` and `f0_hz` comments and
/// the `(frame, time, p)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentRecord {
    pub j: usize,
    pub width_frames: usize,
    pub f0_hz: f64,
    pub peaks: Vec<(usize, f64, f64)>,
}

pub fn parse_alignment_csv(text: &str) -> Result<AlignmentRecord> {
    let (parsed, _) = parse(text, Some(ALIGNMENT_HEADER))?;
    let meta_err = |k: &str| Error::Csv {
        line: 0,
        message: format!("missing or bad '# {k}=' comment"),
    };
    let j = parsed
        .meta
        .get("J")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| meta_err("J"))?;
    let width_frames = parsed
        .meta
        .get("width_frames")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| meta_err("width_frames"))?;
    let f0_hz = parsed
        .meta
        .get("f0_hz")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| meta_err("f0_hz"))?;
    let mut peaks = Vec::new();
    for (line, f) in &parsed.rows {
        expect_fields(*line, f, 3)?;
        let frame = f[0].parse().map_err(|_| Error::Csv {
            line: *line,
            message: format!("bad frame '{}'", f[0]),
        })?;
        peaks.push((frame, number(*line, f[1])?, number(*line, f[2])?));
    }
    Ok(AlignmentRecord {
        j,
        width_frames,
        f0_hz,
        peaks,
    })
}

pub fn formant_header(k: usize) -> String {
    let mut h = String::from("method");
    for i in 1..=k {
        let _ = write!(h, ",F{i}");
    }
    h.push_str(",failures");
    h
}

/// One row per report; all reports must share `k`.
pub fn formants_csv(reports: &[FormantReport], meta: &[(&str, String)]) -> String {
    let k = reports.first().map_or(5, |r| r.k);
    let mut s = comments(meta);
    s.push_str(&formant_header(k));
    s.push('\n');
    for r in reports {
        s.push_str(r.method.name());
        for f in &r.formants {
            s.push(',');
            if let Some(v) = f {
                s.push_str(&fmt_sig(*v));
            }
        }
        let _ = writeln!(s, ",{}", r.failures());
    }
    s
}

pub fn parse_formants_csv(text: &str) -> Result<Vec<FormantReport>> {
    let (parsed, head) = parse(text, None)?;
    let cols: Vec<&str> = head.split(',').collect();
    let k = cols.len().saturating_sub(2);
    if cols.len() < 3 || head != formant_header(k) {
        return Err(Error::Csv {
            line: 0,
            message: format!("unexpected formant header '{head}'"),
        });
    }
    let mut out = Vec::new();
    for (line, f) in &parsed.rows {
        expect_fields(*line, f, k + 2)?;
        let method = f[0].parse().map_err(|e: Error| Error::Csv {
            line: *line,
            message: e.to_string(),
        })?;
        let mut formants = Vec::with_capacity(k);
        for v in &f[1..=k] {
            formants.push(if v.is_empty() {
                None
            } else {
                Some(number(*line, v)?)
            });
        }
        out.push(FormantReport {
            method,
            formants,
            k,
        });
    }
    Ok(out)
}

pub const HISTOGRAM_HEADER: &str = "bin_lo_hz,bin_hi_hz,count";

pub fn histogram_csv(h: &FrequencyHistogram) -> String {
    let mut s = comments(&[
        ("weighting", h.weighting.to_string()),
        ("bin_width", fmt_sig(h.bin_width())),
        ("points", h.total.to_string()),
    ]);
    s.push_str(HISTOGRAM_HEADER);
    s.push('\n');
    for (e, c) in h.bin_edges.windows(2).zip(&h.counts) {
        let _ = writeln!(s, "{},{},{}", fmt_sig(e[0]), fmt_sig(e[1]), fmt_sig(*c));
    }
    s
}

pub fn parse_histogram_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let (parsed, _) = parse(text, Some(HISTOGRAM_HEADER))?;
    parsed
        .rows
        .iter()
        .map(|(line, f)| {
            expect_fields(*line, f, 3)?;
            Ok((
                number(*line, f[0])?,
                number(*line, f[1])?,
                number(*line, f[2])?,
            ))
        })
        .collect()
}

pub const FIT_HEADER: &str = "f_hz,histogram,fit";

/// The fitted curve at every histogram bin centre, with the components as
/// comments.
pub fn fit_csv(h: &FrequencyHistogram, fit: &GmmFit) -> String {
    let mut meta = vec![
        ("components", fit.m().to_string()),
        ("converged", fit.converged.to_string()),
        ("residual", fmt_sig(fit.residual)),
    ];
    let described: Vec<(String, String)> = fit
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (
                format!("component{}", i + 1),
                format!(
                    "A={} mu={} sigma={}",
                    fmt_sig(c.amplitude),
                    fmt_sig(c.mean),
                    fmt_sig(c.sigma)
                ),
            )
        })
        .collect();
    meta.extend(described.iter().map(|(k, v)| (k.as_str(), v.clone())));
    let mut s = comments(&meta);
    s.push_str(FIT_HEADER);
    s.push('\n');
    for (f, c) in h.centers().into_iter().zip(&h.counts) {
        let _ = writeln!(s, "{},{},{}", fmt_sig(f), fmt_sig(*c), fmt_sig(fit.eval(f)));
    }
    s
}

pub fn parse_fit_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let (parsed, _) = parse(text, Some(FIT_HEADER))?;
    parsed
        .rows
        .iter()
        .map(|(line, f)| {
            expect_fields(*line, f, 3)?;
            Ok((
                number(*line, f[0])?,
                number(*line, f[1])?,
                number(*line, f[2])?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formant::Method;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1007.3), "1007.3");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(-123456.789123), "-123456.789");
        assert_eq!(fmt_sig(100.0), "100");
        assert_eq!(fmt_sig(2.5e-6), "0.0000025");
        assert_eq!(fmt_sig(2.5e-7), "2.5e-7");
        assert_eq!(fmt_sig(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_sig(-1e-20), "-1e-20");
    }

    #[test]
    fn cloud_round_trip() {
        let cloud = ReassignedPointCloud {
            points: vec![
                CloudPoint {
                    t_sec: 0.0123,
                    f_hz: 650.25,
                    mag_db: -3.5,
                },
                CloudPoint {
                    t_sec: 0.5,
                    f_hz: 9999.0,
                    mag_db: 0.0,
                },
            ],
            source_duration: 0.5,
            analysis: AnalysisParams::new(256, 4, 1024).unwrap(),
            prune: PruneParams {
                f_max: 6000.0,
                ..PruneParams::default()
            },
            sample_rate: 48_000,
        };
        let text = cloud_csv(&cloud);
        assert!(text.contains("\nt_sec,f_hz,mag_db\n"));
        assert_eq!(parse_cloud_csv(&text).unwrap(), cloud);
    }

    #[test]
    fn formants_round_trip() {
        let reports = vec![
            FormantReport::from_sorted(Method::NapresGmm, &[650.0, 1230.5, 2550.0], 5),
            FormantReport::failed(Method::Lpc, 5),
        ];
        let text = formants_csv(&reports, &[("source", "x.wav".into())]);
        assert!(text.contains("method,F1,F2,F3,F4,F5,failures\n"));
        assert!(text.contains("NAPReS+GMM,650,1230.5,2550,,,2\n"));
        assert!(text.contains("LPC,,,,,,5\n"));
        assert_eq!(parse_formants_csv(&text).unwrap(), reports);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(matches!(
            parse_cloud_csv("t,f,m\n1,2,3\n"),
            Err(Error::Csv { line: 1, .. })
        ));
        assert!(matches!(
            parse_cloud_csv("t_sec,f_hz,mag_db\n1,2\n"),
            Err(Error::Csv { line: 2, .. })
        ));
    }
}
