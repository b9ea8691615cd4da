//! Built-in numerical sanity checks, runnable in any installed environment.

use nalgebra::{DMatrix, DVector};

use cvrd_core::allocation::{
    grid_search_oracle, risk_contributions, solve_mrd, solve_risk_parity, ConstraintSet,
    EntropyObjective, SolverOptions,
};
use cvrd_core::risk_models::{spectral_decomposition, HermitianCovariance};
use cvrd_core::spectral::{analytic_signal, discrete_hilbert};

fn check(name: &str, ok: bool, failures: &mut usize) {
    println!("{} {name}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        *failures += 1;
    }
}

pub fn run() -> anyhow::Result<()> {
    let mut failures = 0;

    // Hilbert transform turns cosines into sines.
    let n = 256;
    let k = 8;
    let x: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64).cos())
        .collect();
    let h = discrete_hilbert(&x);
    let max_err = h
        .iter()
        .enumerate()
        .map(|(i, v)| {
            (v - (2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64).sin()).abs()
        })
        .fold(0.0, f64::max);
    check("hilbert cos->sin (N=256, k=8)", max_err < 1e-10, &mut failures);

    // Analytic signal has an empty negative-frequency half.
    let mix: Vec<f64> = (0..128)
        .map(|i| {
            let t = i as f64;
            (0.11 * t).sin() + 0.5 * (0.31 * t).cos() + 0.25 * (0.73 * t).sin()
        })
        .collect();
    let z = analytic_signal(&mix);
    // DFT of the complex series via two real DFTs.
    let zspec = {
        let re: Vec<f64> = z.iter().map(|c| c.re).collect();
        let im: Vec<f64> = z.iter().map(|c| c.im).collect();
        let fre = cvrd_core::spectral::dft(&re);
        let fim = cvrd_core::spectral::dft(&im);
        fre.iter()
            .zip(&fim)
            .map(|(a, b)| a + b * num_complex::Complex64::new(0.0, 1.0))
            .collect::<Vec<_>>()
    };
    let total: f64 = zspec.iter().map(|c| c.norm_sqr()).sum();
    let neg: f64 = (65..128).map(|i| zspec[i].norm_sqr()).sum();
    check(
        "analytic signal negative-frequency energy",
        neg < 1e-18 * total,
        &mut failures,
    );

    // Euler identity for risk contributions.
    let cov = HermitianCovariance::from_real(
        DMatrix::from_row_slice(3, 3, &[0.04, 0.01, 0.0, 0.01, 0.09, 0.02, 0.0, 0.02, 0.16]),
        3,
    )?;
    let w = DVector::from_vec(vec![0.5, 0.3, 0.2]);
    let rc = risk_contributions(&w, &cov)?;
    let total: f64 = rc.contributions.iter().sum();
    check(
        "Euler identity sum(sigma_m) = sigma",
        (total - rc.sigma).abs() <= 1e-9 * rc.sigma,
        &mut failures,
    );

    // Risk parity closed form on a diagonal covariance.
    let vols = [0.1f64, 0.2, 0.4];
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(3, vols.iter().map(|v| v * v)));
    let sol = solve_risk_parity(
        &HermitianCovariance::from_real(diag, 3)?,
        &ConstraintSet::long_only(),
        &SolverOptions::default(),
    )?;
    let inv_sum: f64 = vols.iter().map(|v| 1.0 / v).sum();
    let rp_ok = vols
        .iter()
        .enumerate()
        .all(|(i, v)| (sol.weights[i] - (1.0 / v) / inv_sum).abs() < 1e-8);
    check("risk parity diagonal closed form", rp_ok, &mut failures);

    // Entropy gradient vs central finite differences.
    let d = spectral_decomposition(&cov)?;
    let obj = EntropyObjective::new(&d);
    let w = DVector::from_vec(vec![0.4, 0.35, 0.25]);
    let g = obj.gradient(&w);
    let mut grad_ok = true;
    for j in 0..3 {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[j] += 1e-6;
        wm[j] -= 1e-6;
        let fd = (obj.value(&wp) - obj.value(&wm)) / 2e-6;
        if (g[j] - fd).abs() / fd.abs().max(1e-8) > 1e-5 {
            grad_ok = false;
        }
    }
    check("entropy gradient vs finite differences", grad_ok, &mut failures);

    // MRD solution dominates the grid oracle.
    let sol = solve_mrd(&cov, &ConstraintSet::long_only(), &SolverOptions::default())?;
    let (_, oracle_best) = grid_search_oracle(|w| obj.value(w), 3, 0.05)?;
    check(
        "MRD objective >= grid oracle - 1e-3",
        obj.value(&sol.weights) >= oracle_best - 1e-3,
        &mut failures,
    );

    if failures > 0 {
        anyhow::bail!("{failures} selftest check(s) failed");
    }
    Ok(())
}
