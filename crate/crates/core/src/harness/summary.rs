use std::fmt::Write as _;

use super::sweep::SweepReport;
use crate::error::{Error, Result};
use crate::formant::Method;
use crate::io::fmt_sig;

/// Statistics over the successful replicas of one (method, SNR, formant)
/// cell. `std` is the sample standard deviation and needs two successes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub failures: usize,
    pub successes: usize,
}

pub fn cell_stats(values: &[Option<f64>]) -> CellStats {
    let ok: Vec<f64> = values.iter().flatten().copied().collect();
    let n = ok.len();
    let failures = values.len() - n;
    if n == 0 {
        return CellStats {
            mean: None,
            std: None,
            min: None,
            max: None,
            failures,
            successes: 0,
        };
    }
    let mean = ok.iter().sum::<f64>() / n as f64;
    let std = (n > 1)
        .then(|| (ok.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt());
    CellStats {
        mean: Some(mean),
        std,
        min: ok.iter().copied().reduce(f64::min),
        max: ok.iter().copied().reduce(f64::max),
        failures,
        successes: n,
    }
}

/// One line of the summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    /// 1-based formant number.
    pub formant: usize,
    pub snr: f64,
    pub stats: CellStats,
}

fn rows(report: &SweepReport) -> Vec<SummaryRow> {
    let cfg = &report.config;
    let mut out = Vec::new();
    for r in &report.results {
        for f in 0..cfg.k {
            for (si, &snr) in cfg.snr_levels.iter().enumerate() {
                out.push(SummaryRow {
                    method: r.method,
                    formant: f + 1,
                    snr,
                    stats: cell_stats(&report.values(r.method, si, f)),
                });
            }
        }
    }
    out
}

fn header(report: &SweepReport) -> String {
    report
        .config
        .echo()
        .into_iter()
        .map(|(k, v)| format!("# {k}={v}\n"))
        .collect()
}

/// Long-form per-replica CSV: `method,snr,formant,replica,value_or_FAIL`.
pub fn long_csv(report: &SweepReport) -> String {
    let cfg = &report.config;
    let mut s = header(report);
    s.push_str("method,snr,formant,replica,value_or_FAIL\n");
    for r in &report.results {
        for (si, &snr) in cfg.snr_levels.iter().enumerate() {
            for (rep, fr) in r.reports[si].iter().enumerate() {
                for f in 0..cfg.k {
                    let value = fr.get(f).map_or("FAIL".to_string(), fmt_sig);
                    let _ = writeln!(
                        s,
                        "{},{},F{},{},{}",
                        r.method,
                        fmt_sig(snr),
                        f + 1,
                        rep,
                        value
                    );
                }
            }
        }
    }
    s
}

/// Summary CSV: `method,formant,snr,mean,std,min,max,failures,successes`,
/// empty fields where a statistic is undefined.
pub fn summary_csv(report: &SweepReport) -> String {
    let mut s = header(report);
    s.push_str("method,formant,snr,mean,std,min,max,failures,successes\n");
    let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
    for row in rows(report) {
        let st = row.stats;
        let _ = writeln!(
            s,
            "{},F{},{},{},{},{},{},{},{}",
            row.method,
            row.formant,
            fmt_sig(row.snr),
            opt(st.mean),
            opt(st.std),
            opt(st.min),
            opt(st.max),
            st.failures,
            st.successes
        );
    }
    s
}

/// Parses the output of [`summary_csv`].
pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| Error::Csv {
            line: i + 1,
            message,
        };
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != "method,formant,snr,mean,std,min,max,failures,successes" {
                return Err(err(format!("unexpected header '{line}'")));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 fields, got {}", f.len())));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| err(format!("bad number '{s}'")))
            }
        };
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(format!("bad count '{s}'")))
        };
        let formant = f[1]
            .strip_prefix('F')
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| err(format!("bad formant '{}'", f[1])))?;
        out.push(SummaryRow {
            method: f[0].parse().map_err(|e: Error| err(e.to_string()))?,
            formant,
            snr: num(f[2])?.ok_or_else(|| err("missing SNR".into()))?,
            stats: CellStats {
                mean: num(f[3])?,
                std: num(f[4])?,
                min: num(f[5])?,
                max: num(f[6])?,
                failures: int(f[7])?,
                successes: int(f[8])?,
            },
        });
    }
    if !seen_header {
        return Err(Error::Csv {
            line: 0,
            message: "missing header".into(),
        });
    }
    Ok(out)
}

/// Aligned text table: rows F1..Fk × {Mean, Std, Min, Max, Failures},
/// one column per SNR level, methods side by side. Undefined values print
/// as `--`.
pub fn summarize(report: &SweepReport) -> String {
    let cfg = &report.config;
    let cell = |v: Option<f64>| v.map_or("--".to_string(), |x| format!("{x:.1}"));
    let width = 10;
    let label_width = 12;

    let mut s = String::new();
    let _ = write!(s, "{:label_width$}", "");
    for r in &report.results {
        let span = width * cfg.snr_levels.len();
        let _ = write!(s, " | {:<span$}", r.method.name());
    }
    s.push('\n');
    let _ = write!(s, "{:label_width$}", "");
    for _ in &report.results {
        s.push_str(" | ");
        for &snr in &cfg.snr_levels {
            let _ = write!(s, "{:>width$}", format!("SNR {}", fmt_sig(snr)));
        }
    }
    s.push('\n');

    for f in 0..cfg.k {
        let stats: Vec<Vec<CellStats>> = report
            .results
            .iter()
            .map(|r| {
                (0..cfg.snr_levels.len())
                    .map(|si| cell_stats(&report.values(r.method, si, f)))
                    .collect()
            })
            .collect();
        let lines: [(&str, &dyn Fn(&CellStats) -> String); 5] = [
            ("Mean", &|c| cell(c.mean)),
            ("Std", &|c| cell(c.std)),
            ("Min", &|c| cell(c.min)),
            ("Max", &|c| cell(c.max)),
            ("Failures", &|c| c.failures.to_string()),
        ];
        for (name, render) in lines {
            let _ = write!(s, "{:label_width$}", format!("F{} {name}", f + 1));
            for per_method in &stats {
                s.push_str(" | ");
                for c in per_method {
                    let _ = write!(s, "{:>width$}", render(c));
                }
            }
            s.push('\n');
        }
    }
    s
}
