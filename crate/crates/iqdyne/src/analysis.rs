//! The estimation pipeline: rectangular-window FFT magnitude spectra,
//! picket-fence data-length search, Dirichlet-kernel peak fitting, SNR and
//! sensitivity bookkeeping, and the dead-time sensitivity-curve fit.
//!
//! A tone that is not commensurate with the chosen data length leaks across
//! bins with the finite-sum Dirichlet envelope; the peak model used here is
//! exactly that envelope, so an on-bin tone fits with zero residual and an
//! off-bin tone leaves the small interference misfit that makes shorter,
//! better-commensurate data lengths win the picket-fence search.

use crate::camera::PixelTrace;
use crate::error::{Error, Result};
use crate::numeric::sinpi;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided magnitude spectrum of a mean-subtracted, rectangular-window
/// DFT. Magnitudes carry a `sqrt(w_k / n)` normalization (w = 2 except at
/// DC and Nyquist) so that the squared magnitudes sum to `n * variance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bin_frequencies_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Number of samples transformed.
    pub data_length: usize,
    /// Sampling period of the series (the exposure cycle time).
    pub t_l_s: f64,
}

impl Spectrum {
    /// Frequency step between bins: `1 / (data_length * t_l)`.
    pub fn bin_width_hz(&self) -> f64 {
        1.0 / (self.data_length as f64 * self.t_l_s)
    }

    pub fn n_bins(&self) -> usize {
        self.magnitudes.len()
    }
}

/// Magnitude spectrum of the first `length` counts of a trace.
pub fn fft_magnitude(trace: &PixelTrace, length: usize) -> Result<Spectrum> {
    if length < 2 || length > trace.len() {
        return Err(Error::InvalidLength {
            message: format!(
                "length {length} outside [2, {}] for this trace",
                trace.len()
            ),
        });
    }
    let data = &trace.counts[..length];
    let mean = data.iter().sum::<f64>() / length as f64;
    let mut buf: Vec<Complex<f64>> = data.iter().map(|c| Complex::new(c - mean, 0.0)).collect();

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(length).process(&mut buf);

    let n_bins = length / 2 + 1;
    let t_l = trace.schedule.t_l_s();
    let bin_width = 1.0 / (length as f64 * t_l);
    let mut magnitudes = Vec::with_capacity(n_bins);
    let mut bin_frequencies_hz = Vec::with_capacity(n_bins);
    for (k, value) in buf.iter().take(n_bins).enumerate() {
        let at_edge = k == 0 || (length.is_multiple_of(2) && k == length / 2);
        let weight = if at_edge { 1.0 } else { 2.0 };
        magnitudes.push(value.norm() * (weight / length as f64).sqrt());
        bin_frequencies_hz.push(k as f64 * bin_width);
    }

    Ok(Spectrum {
        bin_frequencies_hz,
        magnitudes,
        data_length: length,
        t_l_s: t_l,
    })
}

/// Normalized Dirichlet-envelope magnitude `|D_L(u)| / L` with
/// `D_L(u) = sin(pi u) / sin(pi u / L)`: the leakage of a unit-height peak
/// offset by `u` bins. Exactly 1 at u = 0 and 0 at other integers.
pub fn dirichlet_magnitude(u: f64, length: usize) -> f64 {
    let nearest = u.round();
    if (u - nearest).abs() < 1e-9 {
        let m = nearest as i64;
        return if m.rem_euclid(length as i64) == 0 { 1.0 } else { 0.0 };
    }
    (sinpi(u) / (length as f64 * sinpi(u / length as f64))).abs()
}

/// A fitted spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFit {
    pub center_frequency_hz: f64,
    /// On-bin-equivalent peak height in spectrum units.
    pub height: f64,
    /// Standard error of the fitted center, in hertz.
    pub frequency_uncertainty_hz: f64,
    /// Standard deviation of (spectrum - model) over all bins except DC,
    /// evaluated on the spectrum the peak was fitted to.
    pub residual_sigma: f64,
}

/// Fitted-model magnitudes of a peak over every bin of a spectrum.
pub fn peak_model(spec: &Spectrum, fit: &PeakFit) -> Vec<f64> {
    let x0 = fit.center_frequency_hz / spec.bin_width_hz();
    (0..spec.n_bins())
        .map(|k| fit.height * dirichlet_magnitude(x0 - k as f64, spec.data_length))
        .collect()
}

/// Half-width of the fit window in bins on each side of the max bin.
const FIT_WINDOW_HALF: usize = 5;
/// Minimum number of bins a usable fit window must contain.
const MIN_WINDOW_BINS: usize = 7;

struct WindowFit {
    x0_bins: f64,
    height: f64,
    x0_sigma_bins: f64,
}

/// Height profiled out analytically: for a trial center the optimal height
/// is the linear regression of the window data on the envelope shape.
fn profiled_height(mags: &[f64], window: &[usize], x0: f64, length: usize) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for &k in window {
        let d = dirichlet_magnitude(x0 - k as f64, length);
        num += mags[k] * d;
        den += d * d;
    }
    let h = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    let mut cost = 0.0;
    for &k in window {
        let d = dirichlet_magnitude(x0 - k as f64, length);
        let r = mags[k] - h * d;
        cost += r * r;
    }
    (h, cost)
}

fn fit_window(mags: &[f64], window: &[usize], peak_bin: usize, length: usize) -> Result<WindowFit> {
    let cost_at = |x0: f64| profiled_height(mags, window, x0, length).1;

    // Coarse scan around the max bin, then golden-section refinement.
    let lo = peak_bin as f64 - 1.0;
    let hi = peak_bin as f64 + 1.0;
    let steps = 80usize;
    let mut best_x = peak_bin as f64;
    let mut best_cost = f64::INFINITY;
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let c = cost_at(x);
        if c < best_cost {
            best_cost = c;
            best_x = x;
        }
    }
    if !best_cost.is_finite() {
        return Err(Error::FitFailed {
            message: "non-finite cost on coarse scan".into(),
        });
    }

    let step = (hi - lo) / steps as f64;
    let mut a = best_x - step;
    let mut b = best_x + step;
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = cost_at(c);
    let mut fd = cost_at(d);
    for _ in 0..120 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = cost_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = cost_at(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let x0 = 0.5 * (a + b);
    let (height, rss) = profiled_height(mags, window, x0, length);

    // Covariance from the 2x2 Gauss-Newton normal matrix at the optimum;
    // the center derivative is taken numerically.
    let delta = 1e-6;
    let mut jxx = 0.0;
    let mut jxh = 0.0;
    let mut jhh = 0.0;
    for &k in window {
        let dm = dirichlet_magnitude(x0 - k as f64, length);
        let dp = dirichlet_magnitude(x0 + delta - k as f64, length);
        let dn = dirichlet_magnitude(x0 - delta - k as f64, length);
        let jx = height * (dp - dn) / (2.0 * delta);
        jxx += jx * jx;
        jxh += jx * dm;
        jhh += dm * dm;
    }
    let n_w = window.len() as f64;
    let sigma2 = if n_w > 2.0 { rss / (n_w - 2.0) } else { 0.0 };
    let det = jxx * jhh - jxh * jxh;
    let x0_sigma_bins = if det > 0.0 {
        (sigma2 * jhh / det).sqrt()
    } else {
        f64::INFINITY
    };

    Ok(WindowFit {
        x0_bins: x0,
        height,
        x0_sigma_bins,
    })
}

fn residual_sigma_against(mags: &[f64], model: &[f64]) -> f64 {
    // Standard deviation of the residuals over all bins except DC.
    let n = mags.len() - 1;
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 1..mags.len() {
        sum += mags[k] - model[k];
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for k in 1..mags.len() {
        let r = mags[k] - model[k] - mean;
        ss += r * r;
    }
    (ss / (n as f64 - 1.0)).sqrt()
}

fn fit_peak_on(mags: &[f64], spec: &Spectrum) -> Result<PeakFit> {
    let n_bins = mags.len();
    if n_bins < MIN_WINDOW_BINS {
        return Err(Error::InvalidLength {
            message: format!("spectrum has {n_bins} bins, need at least {MIN_WINDOW_BINS}"),
        });
    }

    // Candidate peak: the strongest bin away from DC.
    let mut peak_bin = 0usize;
    let mut peak_mag = 0.0f64;
    for (k, &m) in mags.iter().enumerate().skip(1) {
        if m > peak_mag {
            peak_mag = m;
            peak_bin = k;
        }
    }
    if peak_bin == 0 || peak_mag <= 0.0 {
        return Err(Error::NoPeak {
            message: "no nonzero bin away from DC".into(),
        });
    }

    let lo = peak_bin.saturating_sub(FIT_WINDOW_HALF).max(1);
    let hi = (peak_bin + FIT_WINDOW_HALF).min(n_bins - 1);
    if hi - lo + 1 < MIN_WINDOW_BINS {
        return Err(Error::NoPeak {
            message: format!("peak bin {peak_bin} too close to the spectrum edge"),
        });
    }
    let window: Vec<usize> = (lo..=hi).collect();

    let w = fit_window(mags, &window, peak_bin, spec.data_length)?;
    let bin_width = spec.bin_width_hz();
    let model: Vec<f64> = (0..n_bins)
        .map(|k| w.height * dirichlet_magnitude(w.x0_bins - k as f64, spec.data_length))
        .collect();
    Ok(PeakFit {
        center_frequency_hz: w.x0_bins * bin_width,
        height: w.height,
        frequency_uncertainty_hz: w.x0_sigma_bins * bin_width,
        residual_sigma: residual_sigma_against(mags, &model),
    })
}

/// Least-squares fit of the leakage envelope around the strongest bin.
pub fn fit_sinc_peak(spec: &Spectrum) -> Result<PeakFit> {
    fit_peak_on(&spec.magnitudes, spec)
}

/// Fit up to `max_peaks` peaks iteratively: fit the strongest, subtract its
/// model, fit the next on the residual. When several peaks were found each
/// one is then re-fitted against the data minus the other models, which
/// removes most of the cross-talk bias of overlapping leakage tails.
pub fn fit_peaks(spec: &Spectrum, max_peaks: usize) -> Result<Vec<PeakFit>> {
    let mut working = spec.magnitudes.clone();
    let mut fits = Vec::new();
    for _ in 0..max_peaks {
        let fit = match fit_peak_on(&working, spec) {
            Ok(f) => f,
            Err(Error::NoPeak { .. }) if !fits.is_empty() => break,
            Err(e) => return Err(e),
        };
        let model = peak_model(spec, &fit);
        for (w, m) in working.iter_mut().zip(&model) {
            *w -= m;
        }
        fits.push(fit);
    }

    if fits.len() > 1 {
        for _ in 0..2 {
            for i in 0..fits.len() {
                let mut others = spec.magnitudes.clone();
                for (j, fit) in fits.iter().enumerate() {
                    if j != i {
                        for (w, m) in others.iter_mut().zip(peak_model(spec, fit)) {
                            *w -= m;
                        }
                    }
                }
                if let Ok(refit) = fit_peak_on(&others, spec) {
                    fits[i] = refit;
                }
            }
        }
    }
    Ok(fits)
}

/// SNR of a fitted peak: height over the residual standard deviation of
/// (spectrum - model) across all bins except DC. A zero residual (an
/// exactly reproduced noiseless spectrum) reports the infinite-SNR
/// sentinel.
pub fn compute_snr(spec: &Spectrum, fit: &PeakFit) -> f64 {
    let model = peak_model(spec, fit);
    let sigma = residual_sigma_against(&spec.magnitudes, &model);
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    fit.height / sigma
}

/// SNR of `fits[index]` with every fitted peak subtracted from the
/// residual, for multi-tone spectra.
pub fn compute_snr_joint(spec: &Spectrum, fits: &[PeakFit], index: usize) -> f64 {
    let mut combined = vec![0.0; spec.n_bins()];
    for fit in fits {
        for (c, m) in combined.iter_mut().zip(peak_model(spec, fit)) {
            *c += m;
        }
    }
    let sigma = residual_sigma_against(&spec.magnitudes, &combined);
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    fits[index].height / sigma
}

/// Search the data length in `[min_len, max_len]` that maximizes the SNR of
/// the fitted peak; ties break toward the larger length. Returns the
/// winning length and its spectrum.
pub fn picket_fence_search(
    trace: &PixelTrace,
    min_len: usize,
    max_len: usize,
) -> Result<(usize, Spectrum)> {
    if min_len < 2 || min_len > max_len || max_len > trace.len() {
        return Err(Error::InvalidLength {
            message: format!(
                "picket range [{min_len}, {max_len}] invalid for trace of {} points",
                trace.len()
            ),
        });
    }
    let mut best: Option<(f64, usize)> = None;
    for length in min_len..=max_len {
        let spec = fft_magnitude(trace, length)?;
        let Ok(fit) = fit_sinc_peak(&spec) else {
            continue;
        };
        let snr = compute_snr(&spec, &fit);
        let better = match best {
            None => true,
            Some((best_snr, best_len)) => {
                snr > best_snr || (snr == best_snr && length > best_len)
            }
        };
        if better {
            best = Some((snr, length));
        }
    }
    let (_, best_len) = best.ok_or_else(|| Error::FitFailed {
        message: "no data length in the range produced a usable peak".into(),
    })?;
    Ok((best_len, fft_magnitude(trace, best_len)?))
}

/// Sensitivity and resolution figures of one analyzed measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    pub snr: f64,
    /// `b_z * sqrt(t_tot) / snr`, tesla per sqrt(hertz).
    pub eta_t_per_sqrthz: f64,
    /// Eta normalized to a 1 um^2 pixel area.
    pub eta_per_um2_t_per_sqrthz: f64,
    pub resolution_hz: f64,
    pub t_tot_s: f64,
    pub b_z_t: f64,
}

/// Compute the sensitivity report for a measurement of a tone of amplitude
/// `b_z_t` over total time `t_tot_s` that achieved `snr`. The resolution is
/// the bin width of the spectrum the SNR came from.
pub fn sensitivity(
    b_z_t: f64,
    t_tot_s: f64,
    snr: f64,
    pixel_area_um2: f64,
    resolution_hz: f64,
) -> Result<SensitivityReport> {
    if snr.is_nan() || snr <= 0.0 {
        return Err(Error::NonPositiveSnr { snr });
    }
    if !(b_z_t > 0.0 && t_tot_s > 0.0 && pixel_area_um2 > 0.0 && resolution_hz > 0.0) {
        return Err(Error::InvalidInput {
            field: "sensitivity",
            message: "b_z, t_tot, pixel_area and resolution must all be positive".into(),
        });
    }
    let eta = b_z_t * t_tot_s.sqrt() / snr;
    Ok(SensitivityReport {
        snr,
        eta_t_per_sqrthz: eta,
        eta_per_um2_t_per_sqrthz: eta * pixel_area_um2.sqrt(),
        resolution_hz,
        t_tot_s,
        b_z_t,
    })
}

/// The dead-time sensitivity model:
/// `eta(n_rep) = eta_inf * sqrt(1 + t_read / (t_s * n_rep))`.
pub fn eta_model(eta_inf: f64, n_rep: f64, t_read_s: f64, t_s_s: f64) -> f64 {
    eta_inf * (1.0 + t_read_s / (t_s_s * n_rep)).sqrt()
}

/// Result of fitting the dead-time sensitivity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaCurveFit {
    pub eta_infinity: f64,
    pub std_error: f64,
}

/// Analysis-stage parameters of a pipeline run. Setting
/// `picket_min == picket_max` fixes the data length instead of searching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisParams {
    pub picket_min: usize,
    pub picket_max: usize,
    pub max_peaks: usize,
}

/// Everything the pipeline extracts from one trace.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub best_length: usize,
    pub spectrum: Spectrum,
    /// Fitted peaks, strongest first.
    pub fits: Vec<PeakFit>,
    /// SNR of the strongest peak (joint-model residual when several peaks
    /// were fitted).
    pub snr: f64,
    pub report: SensitivityReport,
}

/// Run the full estimation pipeline on one trace: picket-fence length
/// search, FFT, peak fit(s), SNR and the sensitivity report. `b_z_t` is the
/// amplitude of the tone the sensitivity refers to.
pub fn analyze_trace(
    trace: &PixelTrace,
    params: &AnalysisParams,
    b_z_t: f64,
    pixel_area_um2: f64,
) -> Result<PipelineOutcome> {
    let (best_length, spectrum) =
        picket_fence_search(trace, params.picket_min, params.picket_max)?;
    let fits = fit_peaks(&spectrum, params.max_peaks)?;
    if fits.is_empty() {
        return Err(Error::NoPeak {
            message: "pipeline found no peaks".into(),
        });
    }
    let snr = if fits.len() == 1 {
        compute_snr(&spectrum, &fits[0])
    } else {
        compute_snr_joint(&spectrum, &fits, 0)
    };
    let t_tot_used = best_length as f64 * trace.schedule.t_l_s();
    let report = sensitivity(
        b_z_t,
        t_tot_used,
        snr,
        pixel_area_um2,
        spectrum.bin_width_hz(),
    )?;
    Ok(PipelineOutcome {
        best_length,
        spectrum,
        fits,
        snr,
        report,
    })
}

/// Least-squares fit of the single free parameter `eta_inf` to measured
/// `(n_rep, eta)` points from the shot-noise-limited region.
pub fn fit_eta_curve(points: &[(f64, f64)], t_read_s: f64, t_s_s: f64) -> Result<EtaCurveFit> {
    if points.len() < 3 {
        return Err(Error::NotEnoughPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(n_rep, eta) in points {
        let g = (1.0 + t_read_s / (t_s_s * n_rep)).sqrt();
        num += eta * g;
        den += g * g;
    }
    let eta_inf = num / den;
    let mut rss = 0.0;
    for &(n_rep, eta) in points {
        let r = eta - eta_model(eta_inf, n_rep, t_read_s, t_s_s);
        rss += r * r;
    }
    let dof = points.len() as f64 - 1.0;
    Ok(EtaCurveFit {
        eta_infinity: eta_inf,
        std_error: (rss / dof / den).sqrt(),
    })
}
