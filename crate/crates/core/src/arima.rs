//! ARIMA(p, d, q) fitted by conditional sum of squares (CSS).
//!
//! The differenced series follows
//!
//! ```text
//! w_t = c + sum_j phi_j w_{t-j} + e_t + sum_j theta_j e_{t-j}
//! ```
//!
//! Residuals before the first `p` observations are taken as zero and the
//! objective sums squared residuals from index `p` on. The search is
//! multi-start Nelder-Mead on a rescaled copy of the data; no stationarity or
//! invertibility constraint is imposed, but diverging recursions score +inf.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Magnitude past which a residual or forecast recursion counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    /// Training window length in intervals; fits use the trailing `window` values.
    pub window: usize,
    /// Include the intercept of the differenced process. Defaults to `d == 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<bool>,
}

impl ArimaSpec {
    pub fn new(p: usize, d: usize, q: usize, window: usize) -> ArimaSpec {
        ArimaSpec {
            p,
            d,
            q,
            window,
            intercept: None,
        }
    }

    pub fn includes_intercept(&self) -> bool {
        self.intercept.unwrap_or(self.d == 0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d > 1 {
            return Err(Error::InvalidArimaSpec(format!(
                "differencing order {} not supported (0 or 1)",
                self.d
            )));
        }
        let min_window = self.p.max(self.q) + self.d + 10;
        if self.window <= min_window {
            return Err(Error::InvalidArimaSpec(format!(
                "window {} must exceed max(p, q) + d + 10 = {}",
                self.window, min_window
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("ARIMA({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub spec: ArimaSpec,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    /// Intercept of the differenced process.
    pub c: f64,
    pub css: f64,
    /// Last `p + d` training levels.
    pub last_window: Vec<f64>,
    /// Last `q` one-step residuals.
    pub residual_tail: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct CssOptions {
    pub evals_per_start: usize,
    pub starts: usize,
    pub tolerance: f64,
}

impl Default for CssOptions {
    fn default() -> Self {
        CssOptions {
            evals_per_start: 2000,
            starts: 5,
            tolerance: 1e-8,
        }
    }
}

/// d-fold first differences.
pub fn difference(s: &[f64], d: usize) -> Result<Vec<f64>> {
    if s.len() <= d {
        return Err(Error::SequenceTooShort {
            len: s.len(),
            what: format!("differencing of order {d}"),
        });
    }
    let mut out = s.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Parameter vector layout: `[mu?, phi_1..phi_p, theta_1..theta_q]`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    p: usize,
    q: usize,
    intercept: bool,
}

impl Layout {
    fn len(&self) -> usize {
        self.intercept as usize + self.p + self.q
    }

    fn split<'a>(&self, x: &'a [f64]) -> (f64, &'a [f64], &'a [f64]) {
        let o = self.intercept as usize;
        let mu = if self.intercept { x[0] } else { 0.0 };
        (mu, &x[o..o + self.p], &x[o + self.p..])
    }

    fn pack(&self, mu: f64, phi: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        if self.intercept {
            v.push(mu);
        }
        v.extend_from_slice(phi);
        v.extend_from_slice(theta);
        v
    }
}

/// Conditional residuals of the mean-form recursion; returns the CSS or +inf
/// if the recursion diverges.
fn conditional_residuals(y: &[f64], mu: f64, phi: &[f64], theta: &[f64], e: &mut [f64]) -> f64 {
    let p = phi.len();
    let mut css = 0.0;
    for t in 0..y.len() {
        if t < p {
            e[t] = 0.0;
            continue;
        }
        let mut pred = mu;
        for (j, &ph) in phi.iter().enumerate() {
            pred += ph * (y[t - j - 1] - mu);
        }
        for (j, &th) in theta.iter().enumerate() {
            if t > j {
                pred += th * e[t - j - 1];
            }
        }
        let r = y[t] - pred;
        if !r.is_finite() || r.abs() > DIVERGENCE_LIMIT {
            return f64::INFINITY;
        }
        e[t] = r;
        css += r * r;
    }
    css
}

fn autocovariances(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            (0..n - k)
                .map(|t| (x[t] - mean) * (x[t + k] - mean))
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Durbin-Levinson recursion. Returns the AR(order) coefficients and the
/// partial autocorrelations at lags 1..=order, or `None` if degenerate.
fn durbin_levinson(gamma: &[f64], order: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Some((vec![], vec![]));
    }
    if gamma.len() <= order || !(gamma[0] > 0.0) {
        return None;
    }
    let mut phi = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut pacf = Vec::with_capacity(order);
    let mut v = gamma[0];
    for k in 1..=order {
        let mut num = gamma[k];
        for j in 1..k {
            num -= prev[j - 1] * gamma[k - j];
        }
        let kappa = num / v;
        if !kappa.is_finite() {
            return None;
        }
        phi[k - 1] = kappa;
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - kappa * prev[k - j - 1];
        }
        v *= 1.0 - kappa * kappa;
        pacf.push(kappa);
        prev[..k].copy_from_slice(&phi[..k]);
        if !(v > 0.0) {
            // perfectly predictable; keep what we have
            pacf.resize(order, 0.0);
            break;
        }
    }
    Some((phi, pacf))
}

/// Yule-Walker AR coefficients.
pub fn yule_walker(x: &[f64], p: usize) -> Option<Vec<f64>> {
    durbin_levinson(&autocovariances(x, p), p).map(|(phi, _)| phi)
}

/// Sample autocorrelations at lags 0..=max_lag.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let g = autocovariances(x, max_lag);
    if !(g[0] > 0.0) {
        return std::iter::once(1.0).chain(std::iter::repeat(0.0)).take(g.len()).collect();
    }
    g.iter().map(|v| v / g[0]).collect()
}

/// Sample partial autocorrelations at lags 1..=max_lag.
pub fn pacf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let max_lag = max_lag.min(x.len().saturating_sub(1));
    durbin_levinson(&autocovariances(x, max_lag), max_lag)
        .map(|(_, p)| p)
        .unwrap_or_else(|| vec![0.0; max_lag])
}

pub fn fit_css(train: &[f64], spec: &ArimaSpec) -> Result<ArimaFit> {
    fit_css_with(train, spec, &CssOptions::default())
}

pub fn fit_css_with(train: &[f64], spec: &ArimaSpec, opts: &CssOptions) -> Result<ArimaFit> {
    spec.validate()?;
    if train.len() < spec.window {
        return Err(Error::SequenceTooShort {
            len: train.len(),
            what: format!("{} with window {}", spec.label(), spec.window),
        });
    }
    if let Some(bad) = train.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArimaSpec(format!("training data contains {bad}")));
    }
    let data = &train[train.len() - spec.window..];
    let w = difference(data, spec.d)?;
    let m = w.len();
    let layout = Layout {
        p: spec.p,
        q: spec.q,
        intercept: spec.includes_intercept(),
    };

    // Work on a rescaled copy so simplex steps are commensurate across series.
    let mean = w.iter().sum::<f64>() / m as f64;
    let (center, scale) = if layout.intercept {
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
        let fallback = mean.abs().max(1.0);
        (mean, if sd > 1e-12 * fallback { sd } else { fallback })
    } else {
        let rms = (w.iter().map(|v| v * v).sum::<f64>() / m as f64).sqrt();
        (0.0, if rms > 0.0 { rms } else { 1.0 })
    };
    let z: Vec<f64> = w.iter().map(|v| (v - center) / scale).collect();

    let starts = starting_points(&z, layout, opts.starts.max(1));
    let nm = NelderMeadOptions {
        max_evals: opts.evals_per_start,
        tolerance: opts.tolerance,
        initial_step: 0.1,
    };
    let mut buf = vec![0.0; m];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in &starts {
        let found = nelder_mead(
            |x| {
                let (mu, phi, theta) = layout.split(x);
                conditional_residuals(&z, mu, phi, theta, &mut buf)
            },
            x0,
            nm,
        );
        if found.value.is_finite() && best.as_ref().is_none_or(|(_, v)| found.value < *v) {
            best = Some((found.x, found.value));
        }
    }
    let (x, _) = best.ok_or(Error::ObjectiveNotFinite)?;

    let (mu_z, phi, theta) = layout.split(&x);
    let mu = if layout.intercept { center + scale * mu_z } else { 0.0 };
    let mut e = vec![0.0; m];
    let css = conditional_residuals(&w, mu, phi, theta, &mut e);
    if !css.is_finite() {
        return Err(Error::ObjectiveNotFinite);
    }
    let c = mu * (1.0 - phi.iter().sum::<f64>());
    Ok(ArimaFit {
        spec: *spec,
        phi: phi.to_vec(),
        theta: theta.to_vec(),
        c,
        css,
        last_window: data[data.len() - (spec.p + spec.d)..].to_vec(),
        residual_tail: e[m - spec.q.min(m)..].to_vec(),
    })
}

fn starting_points(z: &[f64], layout: Layout, count: usize) -> Vec<Vec<f64>> {
    let (p, q) = (layout.p, layout.q);
    let yw = yule_walker(z, p).unwrap_or_else(|| vec![0.0; p]);
    let half: Vec<f64> = yw.iter().map(|v| 0.5 * v).collect();
    let zeros_p = vec![0.0; p];
    let zeros_q = vec![0.0; q];
    let mut theta_pos = zeros_q.clone();
    let mut theta_neg = zeros_q.clone();
    if q > 0 {
        theta_pos[0] = 0.2;
        theta_neg[0] = -0.2;
    }
    let candidates = [
        layout.pack(0.0, &zeros_p, &zeros_q),
        layout.pack(0.0, &yw, &zeros_q),
        layout.pack(0.0, &half, &zeros_q),
        layout.pack(0.0, &zeros_p, &theta_pos),
        layout.pack(0.0, &yw, &theta_neg),
    ];
    let mut out: Vec<Vec<f64>> = Vec::new();
    for c in candidates {
        if out.len() == count {
            break;
        }
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

impl ArimaFit {
    /// Forecast `h` levels past the end of the training data, with future
    /// residuals set to zero.
    pub fn forecast(&self, h: usize) -> Result<Vec<f64>> {
        if h == 0 {
            return Err(Error::InvalidPlan("forecast horizon must be at least 1".into()));
        }
        let d = self.spec.d;
        let mut w = if d == 0 {
            self.last_window.clone()
        } else {
            difference(&self.last_window, d)?
        };
        let mut e = self.residual_tail.clone();
        let mut level = self.last_window.last().copied().unwrap_or(0.0);
        let mut out = Vec::with_capacity(h);
        for step in 1..=h {
            let mut next = self.c;
            for (j, ph) in self.phi.iter().enumerate() {
                next += ph * w[w.len() - 1 - j];
            }
            for (j, th) in self.theta.iter().enumerate() {
                if j < e.len() {
                    next += th * e[e.len() - 1 - j];
                }
            }
            w.push(next);
            e.push(0.0);
            let value = if d == 1 {
                level += next;
                level
            } else {
                next
            };
            if !value.is_finite() || value.abs() > DIVERGENCE_LIMIT {
                return Err(Error::ForecastDiverged(step));
            }
            out.push(value);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("fit serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Least-squares regression of x_t on x_{t-1} (no intercept).
    fn ls_lag1(x: &[f64]) -> f64 {
        let num: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
        let den: f64 = x[..x.len() - 1].iter().map(|v| v * v).sum();
        num / den
    }

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::with_capacity(n);
        let mut prev = 0.0;
        for _ in 0..n {
            prev = phi * prev + noise.sample(&mut rng);
            x.push(prev);
        }
        x
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[1.0, 2.0, 3.0, 4.0], 1).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(difference(&[5.0, 7.0], 0).unwrap(), vec![5.0, 7.0]);
        assert_eq!(difference(&[1.0, 4.0, 9.0, 16.0], 2).unwrap(), vec![2.0, 2.0]);
        assert!(difference(&[1.0], 1).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ArimaSpec::new(7, 1, 7, 18).validate().is_err());
        assert!(ArimaSpec::new(7, 1, 7, 19).validate().is_ok());
        assert!(ArimaSpec::new(1, 2, 0, 100).validate().is_err());
        assert!(fit_css(&[1.0; 50], &ArimaSpec::new(1, 0, 0, 60)).is_err());
    }

    #[test]
    fn ar1_recovery() {
        let x = ar1(0.8, 2000, 7);
        let oracle = ls_lag1(&x);
        let fit = fit_css(&x, &ArimaSpec::new(1, 0, 0, 2000)).unwrap();
        assert!((fit.phi[0] - 0.8).abs() <= 0.1);
        assert!((fit.phi[0] - oracle).abs() <= 0.02, "{} vs {}", fit.phi[0], oracle);
    }

    #[test]
    fn white_noise_has_small_phi() {
        let x = ar1(0.0, 2000, 11);
        let fit = fit_css(&x, &ArimaSpec::new(1, 0, 0, 2000)).unwrap();
        assert!(fit.phi[0].abs() <= 0.1);
        assert!(ls_lag1(&x).abs() <= 0.1);
    }

    #[test]
    fn noise_free_ar1() {
        let x: Vec<f64> = (0..40).map(|k| 0.5f64.powi(k)).collect();
        let fit = fit_css(&x, &ArimaSpec::new(1, 0, 0, 40)).unwrap();
        assert!((fit.phi[0] - 0.5).abs() < 1e-3, "{:?}", fit);
        assert!(fit.css < 1e-6);
        let f = fit.forecast(3).unwrap();
        for (i, v) in f.iter().enumerate() {
            let expect = 0.5f64.powi(40 + i as i32);
            assert!((v - expect).abs() < 1e-3);
        }
    }

    #[test]
    fn mean_model_forecast() {
        let fit = ArimaFit {
            spec: ArimaSpec::new(1, 0, 0, 20),
            phi: vec![0.0],
            theta: vec![],
            c: 42.0,
            css: 0.0,
            last_window: vec![10.0],
            residual_tail: vec![],
        };
        assert_eq!(fit.forecast(4).unwrap(), vec![42.0; 4]);
        assert!(fit.forecast(0).is_err());
    }

    #[test]
    fn ramp_continues_with_d1() {
        let x: Vec<f64> = (0..50).map(|t| 100.0 + 2.5 * t as f64).collect();
        let fit = fit_css(&x, &ArimaSpec::new(1, 1, 0, 50)).unwrap();
        let f = fit.forecast(3).unwrap();
        for (i, v) in f.iter().enumerate() {
            let expect = 100.0 + 2.5 * (50 + i) as f64;
            assert!((v - expect).abs() < 1e-3, "{v} vs {expect}");
        }
    }

    #[test]
    fn divergent_fit_is_rejected_on_forecast() {
        let fit = ArimaFit {
            spec: ArimaSpec::new(1, 0, 0, 20),
            phi: vec![10.0],
            theta: vec![],
            c: 0.0,
            css: 0.0,
            last_window: vec![1.0],
            residual_tail: vec![],
        };
        assert!(matches!(fit.forecast(20), Err(Error::ForecastDiverged(13))));
    }

    #[test]
    fn fit_beats_every_start() {
        let x = ar1(0.6, 300, 3);
        let spec = ArimaSpec::new(2, 0, 1, 300);
        let fit = fit_css(&x, &spec).unwrap();
        let layout = Layout { p: 2, q: 1, intercept: true };
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let mut e = vec![0.0; x.len()];
        for start in starting_points(&x, layout, 5) {
            let (_, phi, theta) = layout.split(&start);
            let css0 = conditional_residuals(&x, mean, phi, theta, &mut e);
            assert!(fit.css <= css0 + 1e-9, "{} > {}", fit.css, css0);
        }
    }

    #[test]
    fn objective_is_reproducible() {
        let x = ar1(0.7, 500, 5);
        let spec = ArimaSpec::new(2, 1, 2, 500);
        let a = fit_css(&x, &spec).unwrap();
        let b = fit_css(&x, &spec).unwrap();
        assert_eq!(a.css.to_bits(), b.css.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn offset_leaves_d1_increments_unchanged() {
        let x: Vec<f64> = ar1(0.5, 400, 9).iter().scan(0.0, |s, v| { *s += v; Some(*s + 1000.0) }).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 250.0).collect();
        let spec = ArimaSpec::new(1, 1, 1, 400);
        let fa = fit_css(&x, &spec).unwrap().forecast(5).unwrap();
        let fb = fit_css(&shifted, &spec).unwrap().forecast(5).unwrap();
        let inc = |f: &[f64], last: f64| -> Vec<f64> {
            std::iter::once(last).chain(f.iter().copied()).collect::<Vec<_>>().windows(2).map(|w| w[1] - w[0]).collect()
        };
        let (ia, ib) = (inc(&fa, x[399]), inc(&fb, shifted[399]));
        for (a, b) in ia.iter().zip(&ib) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn level_forecast_differences_match_differenced_forecast() {
        let x: Vec<f64> = ar1(0.5, 300, 21).iter().scan(50.0, |s, v| { *s += v; Some(*s) }).collect();
        let fit = fit_css(&x, &ArimaSpec::new(2, 1, 1, 300)).unwrap();
        let levels = fit.forecast(6).unwrap();
        // same coefficients on the differenced process, d = 0
        let diff_fit = ArimaFit {
            spec: ArimaSpec { d: 0, ..fit.spec },
            last_window: difference(&fit.last_window, 1).unwrap(),
            ..fit.clone()
        };
        let w = diff_fit.forecast(6).unwrap();
        let mut prev = *x.last().unwrap();
        for (l, dw) in levels.iter().zip(&w) {
            assert!((l - prev - dw).abs() < 1e-9);
            prev = *l;
        }
    }

    #[test]
    fn acf_pacf_of_ar1() {
        let x = ar1(0.8, 5000, 1);
        let r = acf(&x, 3);
        assert_eq!(r[0], 1.0);
        assert!((r[1] - 0.8).abs() < 0.05);
        assert!((r[2] - 0.64).abs() < 0.07);
        let p = pacf(&x, 3);
        assert!((p[0] - r[1]).abs() < 1e-12);
        assert!(p[1].abs() < 0.05 && p[2].abs() < 0.05);
    }

    #[test]
    fn json_has_contract_fields() {
        let x = ar1(0.5, 100, 2);
        let fit = fit_css(&x, &ArimaSpec::new(1, 0, 1, 100)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fit.to_json()).unwrap();
        for k in ["spec", "phi", "theta", "c", "css"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
