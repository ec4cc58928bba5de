//! Sum-of-Gaussians least-squares fit to a frequency histogram.
//!
//! The model is `S(f) = Σ A_i exp(-(f - μ_i)² / 2σ_i²)`, fit to the histogram
//! normalised by its largest bin with a projected Levenberg-Marquardt loop
//! from several deterministic starts. The returned amplitudes and residual
//! are scaled back to the histogram's own units.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::histogram::FrequencyHistogram;
use super::{FormantReport, Method};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmComponent {
    pub amplitude: f64,
    pub mean: f64,
    pub sigma: f64,
}

impl GmmComponent {
    pub fn eval(&self, f: f64) -> f64 {
        let z = (f - self.mean) / self.sigma;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub components: Vec<GmmComponent>,
    pub converged: bool,
    /// Sum of squared errors against the histogram counts.
    pub residual: f64,
    /// Accepted-iteration residuals of the winning start, normalised units.
    pub trace: Vec<f64>,
    /// Index of the winning start.
    pub start: usize,
}

impl GmmFit {
    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, f: f64) -> f64 {
        self.components.iter().map(|c| c.eval(f)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub starts: usize,
    /// Largest component width kept as a formant.
    pub max_formant_sigma: f64,
    /// Smallest amplitude kept as a formant, relative to the largest.
    pub min_rel_amplitude: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            rel_tol: 1e-8,
            starts: 4,
            max_formant_sigma: 500.0,
            min_rel_amplitude: 0.01,
        }
    }
}

pub fn fit_gmm(h: &FrequencyHistogram, m: usize, seed: u64) -> Result<GmmFit> {
    fit_gmm_with(h, m, seed, &GmmOptions::default())
}

struct Bounds {
    mu: (f64, f64),
    sigma: (f64, f64),
}

impl Bounds {
    fn project(&self, theta: &mut [f64]) {
        for c in theta.chunks_exact_mut(3) {
            c[0] = c[0].max(0.0);
            c[1] = c[1].clamp(self.mu.0, self.mu.1);
            c[2] = c[2].clamp(self.sigma.0, self.sigma.1);
        }
    }
}

pub fn fit_gmm_with(
    h: &FrequencyHistogram,
    m: usize,
    seed: u64,
    opts: &GmmOptions,
) -> Result<GmmFit> {
    if m == 0 {
        return Err(invalid("component count must be at least 1"));
    }
    if opts.starts == 0 || opts.max_iter == 0 {
        return Err(invalid("GMM needs at least one start and one iteration"));
    }
    let nonzero = h.nonzero_bins();
    if nonzero < m {
        return Err(Error::DegenerateHistogram(format!(
            "{nonzero} nonzero bins for {m} components"
        )));
    }
    let scale = h.max_count();
    let y: Vec<f64> = h.counts.iter().map(|c| c / scale).collect();
    let x = h.centers();
    let bw = h.bin_width();
    let lo = h.bin_edges[0];
    let hi = *h.bin_edges.last().expect("histogram has edges");
    let bounds = Bounds {
        mu: (lo, hi),
        sigma: (bw / 4.0, hi - lo),
    };

    let base = initial_guess(&x, &y, m, bw);
    let mut best: Option<(Vec<f64>, bool, Vec<f64>, usize)> = None;
    for s in 0..opts.starts {
        let mut theta = if s == 0 {
            base.clone()
        } else {
            perturb(&base, bw, seed, s)
        };
        bounds.project(&mut theta);
        let (converged, trace) = levenberg_marquardt(&x, &y, &mut theta, &bounds, opts);
        let cost = *trace.last().expect("trace has initial cost");
        let better = match &best {
            None => true,
            Some((_, _, t, _)) => cost < *t.last().unwrap(),
        };
        if better {
            best = Some((theta, converged, trace, s));
        }
    }
    let (theta, converged, trace, start) = best.expect("at least one start");
    let components = theta
        .chunks_exact(3)
        .map(|c| GmmComponent {
            amplitude: c[0] * scale,
            mean: c[1],
            sigma: c[2],
        })
        .collect();
    let residual = trace.last().unwrap() * scale * scale;
    Ok(GmmFit {
        components,
        converged,
        residual,
        trace,
        start,
    })
}

/// Means at the `m` highest local maxima of a 5-bin moving average (ties to
/// the lower frequency), widths of two bins, amplitudes at the smoothed
/// heights. Missing maxima are filled from the tallest remaining bins.
fn initial_guess(x: &[f64], y: &[f64], m: usize, bw: f64) -> Vec<f64> {
    let n = y.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let a = i.saturating_sub(2);
            let b = (i + 3).min(n);
            y[a..b].iter().sum::<f64>() / 5.0
        })
        .collect();
    let mut peaks: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| smooth[i - 1] < smooth[i] && smooth[i] >= smooth[i + 1])
        .collect();
    peaks.sort_by(|&a, &b| smooth[b].total_cmp(&smooth[a]).then(a.cmp(&b)));
    peaks.truncate(m);
    if peaks.len() < m {
        let mut rest: Vec<usize> = (0..n)
            .filter(|i| !peaks.contains(i) && y[*i] > 0.0)
            .collect();
        rest.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
        peaks.extend(rest.into_iter().take(m - peaks.len()));
    }
    peaks.sort_unstable();
    peaks
        .iter()
        .flat_map(|&i| [smooth[i].max(y[i] * 0.5), x[i], 2.0 * bw])
        .collect()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn perturb(base: &[f64], bw: f64, seed: u64, start: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ splitmix(start as u64));
    let shift = Normal::new(0.0, 3.0 * bw).expect("finite spread");
    base.chunks_exact(3)
        .flat_map(|c| {
            [
                c[0] * rng.random_range(0.7..1.3),
                c[1] + shift.sample(&mut rng),
                c[2] * rng.random_range(-0.5f64..0.5).exp(),
            ]
        })
        .collect()
}

fn model(x: &[f64], theta: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for c in theta.chunks_exact(3) {
        for (o, &f) in out.iter_mut().zip(x) {
            let z = (f - c[1]) / c[2];
            *o += c[0] * (-0.5 * z * z).exp();
        }
    }
}

fn cost(x: &[f64], y: &[f64], theta: &[f64], buf: &mut [f64]) -> f64 {
    model(x, theta, buf);
    buf.iter().zip(y).map(|(s, t)| (s - t) * (s - t)).sum()
}

/// Returns the convergence flag and the cost after every accepted step,
/// starting with the initial cost.
fn levenberg_marquardt(
    x: &[f64],
    y: &[f64],
    theta: &mut Vec<f64>,
    bounds: &Bounds,
    opts: &GmmOptions,
) -> (bool, Vec<f64>) {
    let n = x.len();
    let p = theta.len();
    let mut buf = vec![0.0; n];
    let mut current = cost(x, y, theta, &mut buf);
    let mut trace = vec![current];
    let mut lambda = 1e-3;
    let mut jac = DMatrix::<f64>::zeros(n, p);
    let mut resid = DVector::<f64>::zeros(n);
    let mut need_jacobian = true;
    let mut jtj = DMatrix::<f64>::zeros(p, p);
    let mut jtr = DVector::<f64>::zeros(p);

    for _ in 0..opts.max_iter {
        if current <= f64::MIN_POSITIVE {
            return (true, trace);
        }
        if need_jacobian {
            model(x, theta, &mut buf);
            for i in 0..n {
                resid[i] = buf[i] - y[i];
            }
            for (j, c) in theta.chunks_exact(3).enumerate() {
                let (a, mu, s) = (c[0], c[1], c[2]);
                for (i, &f) in x.iter().enumerate() {
                    let d = f - mu;
                    let g = (-0.5 * d * d / (s * s)).exp();
                    jac[(i, 3 * j)] = g;
                    jac[(i, 3 * j + 1)] = a * g * d / (s * s);
                    jac[(i, 3 * j + 2)] = a * g * d * d / (s * s * s);
                }
            }
            jtj = jac.tr_mul(&jac);
            jtr = jac.tr_mul(&resid);
            need_jacobian = false;
        }

        let mut damped = jtj.clone();
        for k in 0..p {
            damped[(k, k)] += lambda * (jtj[(k, k)] + 1e-12);
        }
        let step = match damped.cholesky() {
            Some(ch) => ch.solve(&(-&jtr)),
            None => {
                lambda *= 10.0;
                continue;
            }
        };
        let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
        bounds.project(&mut trial);
        let trial_cost = cost(x, y, &trial, &mut buf);
        if trial_cost.is_finite() && trial_cost < current {
            let decrease = (current - trial_cost) / current;
            *theta = trial;
            current = trial_cost;
            trace.push(current);
            lambda = (lambda / 3.0).max(1e-12);
            need_jacobian = true;
            if decrease < opts.rel_tol {
                return (true, trace);
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e12 {
                // No descent direction left within the bounds.
                return (true, trace);
            }
        }
    }
    (false, trace)
}

/// Sorts the components by mean, drops low or wide ones, and reports the
/// first `k` strictly increasing means as F1..Fk.
pub fn formants_from_gmm(fit: &GmmFit, k: usize) -> FormantReport {
    formants_from_gmm_with(fit, k, &GmmOptions::default())
}

pub fn formants_from_gmm_with(fit: &GmmFit, k: usize, opts: &GmmOptions) -> FormantReport {
    let max_a = fit
        .components
        .iter()
        .map(|c| c.amplitude)
        .fold(0.0, f64::max);
    if !(max_a > 0.0) {
        return FormantReport::failed(Method::NapresGmm, k);
    }
    let mut kept: Vec<GmmComponent> = fit
        .components
        .iter()
        .copied()
        .filter(|c| {
            c.amplitude >= opts.min_rel_amplitude * max_a && c.sigma <= opts.max_formant_sigma
        })
        .collect();
    kept.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    let mut means: Vec<f64> = Vec::with_capacity(kept.len());
    for c in kept {
        if means.last().is_none_or(|&last| c.mean > last) {
            means.push(c.mean);
        }
    }
    FormantReport::from_sorted(Method::NapresGmm, &means, k)
}
