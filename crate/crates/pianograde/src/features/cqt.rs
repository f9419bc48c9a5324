//! Constant-Q transform with 88 bins aligned to the piano keyboard.
//!
//! Uses the FFT-based kernel method: each bin's windowed complex exponential
//! is transformed once, thresholded to a sparse spectral kernel, and every
//! analysis frame is then a single FFT followed by sparse dot products.

use ndarray::Array3;
use rustfft::num_complex::Complex32;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::features::{FeatureTensor, Modality, NUM_BINS};

#[derive(Debug, Clone, Copy)]
pub struct CqtParams {
    pub sample_rate: u32,
    pub hop: usize,
    pub bins_per_octave: u32,
    /// Lowest bin centre frequency; A0 anchors the 88 bins to the keyboard.
    pub fmin_hz: f64,
    /// Gain of the `log(1 + gamma * |X|)` compression applied to magnitudes.
    pub log_gamma: f32,
}

impl Default for CqtParams {
    fn default() -> Self {
        CqtParams {
            sample_rate: 44_100,
            hop: 160,
            bins_per_octave: 12,
            fmin_hz: 27.5,
            log_gamma: 10.0,
        }
    }
}

impl CqtParams {
    pub fn quality_factor(&self) -> f64 {
        1.0 / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        self.fmin_hz * 2f64.powf(bin as f64 / self.bins_per_octave as f64)
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    fn kernel_len(&self, bin: usize) -> usize {
        (self.quality_factor() * self.sample_rate as f64 / self.bin_frequency(bin)).ceil() as usize
    }

    /// Length of the shortest analysis window (the highest bin's kernel);
    /// inputs shorter than this are rejected.
    pub fn min_samples(&self) -> usize {
        self.kernel_len(NUM_BINS - 1)
    }

    fn fft_len(&self) -> usize {
        self.kernel_len(0).next_power_of_two()
    }
}

/// One sparse spectral kernel: FFT-bin indices and conjugated coefficients.
struct SpectralKernel {
    idx: Vec<usize>,
    coef: Vec<Complex32>,
}

fn build_kernels(params: &CqtParams, planner: &mut FftPlanner<f32>) -> Vec<SpectralKernel> {
    let n_fft = params.fft_len();
    let fft = planner.plan_fft_forward(n_fft);
    // Relative magnitude threshold below which spectral kernel entries are
    // dropped; 0.005 keeps >99.9% of each kernel's energy.
    let sparsity = 5e-3f32;

    (0..NUM_BINS)
        .map(|bin| {
            let n_k = params.kernel_len(bin).min(n_fft);
            let freq = params.bin_frequency(bin);
            let start = (n_fft - n_k) / 2;
            let mut buf = vec![Complex32::new(0.0, 0.0); n_fft];
            for i in 0..n_k {
                // Hann window, unit-normalized kernel.
                let w = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n_k as f64).cos());
                let phase = 2.0 * std::f64::consts::PI * freq * (start + i) as f64
                    / params.sample_rate as f64;
                let c = Complex32::new(
                    (w * phase.cos() / n_k as f64) as f32,
                    (w * phase.sin() / n_k as f64) as f32,
                );
                buf[start + i] = c;
            }
            fft.process(&mut buf);
            let max_mag = buf.iter().map(|c| c.norm()).fold(0.0f32, f32::max);
            let mut idx = Vec::new();
            let mut coef = Vec::new();
            for (j, c) in buf.iter().enumerate() {
                if c.norm() > sparsity * max_mag {
                    idx.push(j);
                    coef.push(c.conj() / n_fft as f32);
                }
            }
            SpectralKernel { idx, coef }
        })
        .collect()
}

/// Computes the log-compressed magnitude CQT of mono audio at 44.1 kHz.
///
/// Frames are centered at `k * hop` for `k` in `0..=floor(len / hop)`, with
/// zero padding outside the signal, so a signal of `len` samples yields
/// `floor(len / hop) + 1` frames at the native rate of `sr / hop` fps.
pub fn compute_cqt(audio: &[f32], params: &CqtParams) -> Result<FeatureTensor> {
    if audio.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("audio contains non-finite samples".into()));
    }
    if audio.len() < params.min_samples() {
        return Err(Error::Domain(format!(
            "audio of {} samples is shorter than one analysis window ({} samples)",
            audio.len(),
            params.min_samples()
        )));
    }

    let mut planner = FftPlanner::new();
    let kernels = build_kernels(params, &mut planner);
    let n_fft = params.fft_len();
    let fft = planner.plan_fft_forward(n_fft);

    let n_frames = audio.len() / params.hop + 1;
    let mut data = Array3::<f32>::zeros((NUM_BINS, n_frames, 1));
    let mut frame = vec![Complex32::new(0.0, 0.0); n_fft];

    for k in 0..n_frames {
        let center = (k * params.hop) as isize;
        let lo = center - (n_fft / 2) as isize;
        for (i, slot) in frame.iter_mut().enumerate() {
            let src = lo + i as isize;
            let sample = if src >= 0 && (src as usize) < audio.len() {
                audio[src as usize]
            } else {
                0.0
            };
            *slot = Complex32::new(sample, 0.0);
        }
        fft.process(&mut frame);
        for (bin, kernel) in kernels.iter().enumerate() {
            let mut acc = Complex32::new(0.0, 0.0);
            for (&j, &c) in kernel.idx.iter().zip(&kernel.coef) {
                acc += frame[j] * c;
            }
            let mag = acc.norm();
            data[(bin, k, 0)] = (1.0 + params.log_gamma * mag).ln();
        }
    }

    FeatureTensor::new(data, params.frame_rate(), Modality::Cqt)
}
