//! Discrete Fourier and Hilbert transforms and analytic-signal construction.
//!
//! The Hilbert transform is computed in the frequency domain: forward DFT,
//! multiply bin k by -i for 0 < k < N/2 and +i for N/2 < k < N, zero at DC
//! and (for even N) Nyquist, inverse DFT. The analytic signal is
//! z_n = x_n + i * H[x]_n, so its real part is the input bit-for-bit.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::market_data::ReturnMatrix;

/// Forward DFT with the negative-exponent convention:
/// X_k = sum_n x_n e^(-i 2 pi k n / N).
pub fn dft(x: &[f64]) -> Vec<Complex64> {
    assert!(x.len() >= 2, "dft needs at least 2 samples");
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}

/// Inverse DFT, normalized by 1/N so that idft(dft(x)) == x.
pub fn idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    assert!(spectrum.len() >= 2, "idft needs at least 2 samples");
    let n = spectrum.len();
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Discrete Hilbert transform of a real series.
pub fn discrete_hilbert(x: &[f64]) -> Vec<f64> {
    assert!(x.len() >= 2, "hilbert needs at least 2 samples");
    let n = x.len();
    let mut spectrum = dft(x);
    spectrum[0] = Complex64::new(0.0, 0.0);
    if n.is_multiple_of(2) {
        spectrum[n / 2] = Complex64::new(0.0, 0.0);
    }
    let neg_i = Complex64::new(0.0, -1.0);
    let pos_i = Complex64::new(0.0, 1.0);
    for (k, v) in spectrum.iter_mut().enumerate() {
        if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            continue;
        }
        *v *= if 2 * k < n { neg_i } else { pos_i };
    }
    idft(&spectrum).into_iter().map(|c| c.re).collect()
}

/// Analytic signal z_n = x_n + i H[x]_n; the real part is the input exactly.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let h = discrete_hilbert(x);
    x.iter()
        .zip(h)
        .map(|(&re, im)| Complex64::new(re, im))
        .collect()
}

/// Complex analytic-signal matrix, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticMatrix {
    pub assets: Vec<String>,
    /// Rows are time, columns are assets.
    pub data: DMatrix<Complex64>,
    /// Column means that were subtracted (zeros when centering is off).
    pub column_means: Vec<f64>,
}

impl AnalyticMatrix {
    pub fn num_periods(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_assets(&self) -> usize {
        self.data.ncols()
    }
}

/// Applies the analytic-signal transform to every return column, optionally
/// mean-centering each column first.
pub fn analytic_matrix(returns: &ReturnMatrix, centering: bool) -> AnalyticMatrix {
    let n = returns.num_periods();
    assert!(n >= 4, "analytic_matrix needs a window of at least 4 rows");
    let m = returns.num_assets();
    let mut data = DMatrix::zeros(n, m);
    let mut column_means = Vec::with_capacity(m);
    for c in 0..m {
        let col: Vec<f64> = returns.returns.column(c).iter().copied().collect();
        let mean = if centering {
            col.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let centered: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let z = analytic_signal(&centered);
        for (r, zv) in z.into_iter().enumerate() {
            data[(r, c)] = zv;
        }
        column_means.push(mean);
    }
    AnalyticMatrix {
        assets: returns.assets.clone(),
        data,
        column_means,
    }
}

/// Debug serialization of a complex series as paired re,im CSV columns.
pub fn complex_series_to_csv(z: &[Complex64]) -> String {
    let mut out = String::from("re,im\n");
    for v in z {
        out.push_str(&format!("{},{}\n", v.re, v.im));
    }
    out
}
