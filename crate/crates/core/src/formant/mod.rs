//! Formant estimation.
//!
//! Two estimators share the [`FormantReport`] output: a Gaussian mixture fit
//! to the frequency histogram of a reassigned point cloud, and a
//! conventional LPC root-finding baseline.

mod gmm;
mod histogram;
mod lpc;

pub use gmm::{
    fit_gmm, fit_gmm_with, formants_from_gmm, formants_from_gmm_with, GmmComponent, GmmFit,
    GmmOptions,
};
pub use histogram::{histogram, histogram_in_band, FrequencyHistogram, Weighting};
pub use lpc::{lpc_formants, lpc_track, stride_for_count, track_count, track_mean, LpcParams};

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error};

/// Formant estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    NapresGmm,
    Lpc,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::NapresGmm, Method::Lpc];

    pub fn name(self) -> &'static str {
        match self {
            Method::NapresGmm => "NAPReS+GMM",
            Method::Lpc => "LPC",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "napres+gmm" | "napres" | "gmm" => Ok(Method::NapresGmm),
            "lpc" => Ok(Method::Lpc),
            other => Err(invalid(format!("unknown formant method '{other}'"))),
        }
    }
}

/// Formant frequencies F1..Fk; `None` marks a failed formant.
#[derive(Debug, Clone, PartialEq)]
pub struct FormantReport {
    pub method: Method,
    pub formants: Vec<Option<f64>>,
    pub k: usize,
}

impl FormantReport {
    /// Takes the first `k` of `candidates` (ascending) and pads with failures.
    pub fn from_sorted(method: Method, candidates: &[f64], k: usize) -> Self {
        let formants = (0..k).map(|i| candidates.get(i).copied()).collect();
        Self {
            method,
            formants,
            k,
        }
    }

    /// Builds a report from per-slot values. A slot that does not exceed the
    /// previous reported value is marked failed so the report stays
    /// strictly increasing.
    pub fn from_slots(method: Method, slots: Vec<Option<f64>>) -> Self {
        let mut last = f64::NEG_INFINITY;
        let formants: Vec<Option<f64>> = slots
            .into_iter()
            .map(|slot| match slot {
                Some(f) if f.is_finite() && f > last => {
                    last = f;
                    Some(f)
                }
                _ => None,
            })
            .collect();
        let k = formants.len();
        Self {
            method,
            formants,
            k,
        }
    }

    pub fn failed(method: Method, k: usize) -> Self {
        Self {
            method,
            formants: vec![None; k],
            k,
        }
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.formants.get(i).copied().flatten()
    }

    pub fn failures(&self) -> usize {
        self.formants.iter().filter(|f| f.is_none()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_padding() {
        let r = FormantReport::from_sorted(Method::NapresGmm, &[500.0, 2000.0], 5);
        assert_eq!(
            r.formants,
            vec![Some(500.0), Some(2000.0), None, None, None]
        );
        assert_eq!(r.failures(), 3);
        assert_eq!(r.k, 5);
    }

    #[test]
    fn slots_stay_increasing() {
        let r = FormantReport::from_slots(
            Method::Lpc,
            vec![Some(700.0), Some(650.0), None, Some(2500.0), Some(f64::NAN)],
        );
        assert_eq!(
            r.formants,
            vec![Some(700.0), None, None, Some(2500.0), None]
        );
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("cepstrum".parse::<Method>().is_err());
    }
}
