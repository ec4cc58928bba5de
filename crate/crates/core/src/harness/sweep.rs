use crate::audio::{add_noise, SnrDefinition, Waveform, NOISE_RNG};
use crate::error::{invalid, Result};
use crate::formant::{
    fit_gmm, formants_from_gmm, histogram, lpc_track, stride_for_count, track_mean, FormantReport,
    LpcParams, Method, Weighting,
};
use crate::pulse::{napres, NapresParams};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub snr_levels: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub napres: NapresParams,
    pub lpc: LpcParams,
    /// Number of formants reported.
    pub k: usize,
    pub gmm_components: usize,
    pub bin_width: f64,
    pub weighting: Weighting,
    pub snr_definition: SnrDefinition,
    /// LPC windows per utterance.
    pub lpc_frames: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_levels: vec![100.0, 5.0, 2.0, 1.0],
            replicas: 20,
            seed: 0,
            methods: Method::ALL.to_vec(),
            napres: NapresParams::default(),
            lpc: LpcParams::default(),
            k: 5,
            gmm_components: 6,
            bin_width: 20.0,
            weighting: Weighting::Count,
            snr_definition: SnrDefinition::Amplitude,
            lpc_frames: 67,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(invalid("replicas must be at least 1"));
        }
        if self.snr_levels.is_empty()
            || self
                .snr_levels
                .iter()
                .any(|s| !(*s > 0.0) || !s.is_finite())
        {
            return Err(invalid("SNR levels must be positive and finite"));
        }
        if self.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        if self.k == 0 || self.gmm_components == 0 || self.lpc_frames == 0 {
            return Err(invalid(
                "formant, component and LPC frame counts must be positive",
            ));
        }
        if !(self.bin_width > 0.0) {
            return Err(invalid("histogram bin width must be positive"));
        }
        self.napres.validate()?;
        self.lpc.validate()
    }

    /// `key=value` lines describing everything that determines the report.
    pub fn echo(&self) -> Vec<(String, String)> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let methods = self
            .methods
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(",");
        let a = &self.napres.analysis;
        let p = &self.napres.prune;
        vec![
            ("seed".into(), self.seed.to_string()),
            ("replicas".into(), self.replicas.to_string()),
            ("snr_levels".into(), join(&self.snr_levels)),
            ("snr_definition".into(), self.snr_definition.to_string()),
            ("noise_rng".into(), NOISE_RNG.into()),
            ("methods".into(), methods),
            ("k".into(), self.k.to_string()),
            ("f0_hz".into(), self.napres.f0_hz.to_string()),
            ("window_len".into(), a.window_len.to_string()),
            ("hop".into(), a.hop.to_string()),
            ("fft_len".into(), a.fft_len.to_string()),
            ("amp_threshold_db".into(), p.amp_threshold_db.to_string()),
            ("f_min".into(), p.f_min.to_string()),
            ("f_max".into(), p.f_max.to_string()),
            ("stability_limit".into(), p.stability_limit.to_string()),
            (
                "max_j".into(),
                self.napres.max_j.map_or("all".into(), |j| j.to_string()),
            ),
            ("gmm_components".into(), self.gmm_components.to_string()),
            ("bin_width".into(), self.bin_width.to_string()),
            ("weighting".into(), self.weighting.to_string()),
            ("lpc_order".into(), self.lpc.order.to_string()),
            ("lpc_window_ms".into(), self.lpc.window_ms.to_string()),
            ("lpc_pre_emphasis".into(), self.lpc.pre_emphasis.to_string()),
            (
                "lpc_rate".into(),
                self.lpc.analysis_rate(self.k).to_string(),
            ),
            ("lpc_frames".into(), self.lpc_frames.to_string()),
        ]
    }
}

/// Reports of one method, indexed `[snr][replica]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResults {
    pub method: Method,
    pub reports: Vec<Vec<FormantReport>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub results: Vec<MethodResults>,
}

impl SweepReport {
    pub fn method(&self, method: Method) -> Option<&MethodResults> {
        self.results.iter().find(|r| r.method == method)
    }

    /// Per-replica values of one formant (0-based) at one SNR index.
    pub fn values(&self, method: Method, snr_idx: usize, formant: usize) -> Vec<Option<f64>> {
        self.method(method)
            .map(|r| {
                r.reports[snr_idx]
                    .iter()
                    .map(|rep| rep.get(formant))
                    .collect()
            })
            .unwrap_or_default()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one sweep cell, `seed ⊕ splitmix64(snr_idx << 32 | replica)`.
pub fn replica_seed(seed: u64, snr_idx: usize, replica: usize) -> u64 {
    seed ^ splitmix64(((snr_idx as u64) << 32) | replica as u64)
}

/// One method's formant estimate for one utterance. Pipeline errors become
/// an all-failed report.
pub fn estimate_formants(
    w: &Waveform,
    method: Method,
    cfg: &SweepConfig,
    seed: u64,
) -> FormantReport {
    let result = match method {
        Method::NapresGmm => napres(w, &cfg.napres).and_then(|out| {
            let h = histogram(&out.cloud, cfg.bin_width, cfg.weighting)?;
            let fit = fit_gmm(&h, cfg.gmm_components, seed)?;
            Ok(formants_from_gmm(&fit, cfg.k))
        }),
        Method::Lpc => {
            let stride = stride_for_count(w.duration(), cfg.lpc.window_ms * 1e-3, cfg.lpc_frames);
            lpc_track(w, &cfg.lpc, cfg.k, 0.0, stride).map(|track| track_mean(&track, cfg.k))
        }
    };
    result.unwrap_or_else(|e| {
        log::debug!("{method} failed: {e}");
        FormantReport::failed(method, cfg.k)
    })
}

/// Adds seeded white noise to `clean` for every SNR level and replica and
/// runs each configured method on the result. Cells are visited SNR-major,
/// replica-minor.
pub fn run_sweep(clean: &Waveform, cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let mut results: Vec<MethodResults> = cfg
        .methods
        .iter()
        .map(|&method| MethodResults {
            method,
            reports: vec![Vec::with_capacity(cfg.replicas); cfg.snr_levels.len()],
        })
        .collect();
    for (si, &snr) in cfg.snr_levels.iter().enumerate() {
        for rep in 0..cfg.replicas {
            let seed = replica_seed(cfg.seed, si, rep);
            let noisy = add_noise(clean, snr, cfg.snr_definition, seed)?;
            for r in &mut results {
                r.reports[si].push(estimate_formants(&noisy, r.method, cfg, seed));
            }
        }
        log::info!("SNR {snr}: {} replicas done", cfg.replicas);
    }
    Ok(SweepReport {
        config: cfg.clone(),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replica_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for si in 0..4 {
            for rep in 0..50 {
                assert!(seen.insert(replica_seed(7, si, rep)));
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig::default().validate().is_ok());
        let bad = [
            SweepConfig {
                replicas: 0,
                ..SweepConfig::default()
            },
            SweepConfig {
                snr_levels: vec![1.0, 0.0],
                ..SweepConfig::default()
            },
            SweepConfig {
                methods: vec![],
                ..SweepConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }
}
