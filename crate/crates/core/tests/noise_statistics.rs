//! Empirical moments of the noise kernels on flat frames against distributions
//! computed by quadrature over the clip-and-round pipeline.

use irrobust_core::{corrupt, CorruptionKind, CorruptionSpec, ImageBuffer, ParamSchedule};
use statrs::distribution::{ContinuousCDF, Discrete, Normal, Poisson};

const SIDE: u32 = 256;

fn flat_output(level: u8, kind: CorruptionKind, severity: u8, seed: u64) -> Vec<u8> {
    let img = ImageBuffer::from_gray(SIDE, SIDE, &vec![level; (SIDE * SIDE) as usize]).unwrap();
    let out = corrupt(&img, &CorruptionSpec::new(kind, severity, seed).unwrap(), &ParamSchedule::default()).unwrap();
    assert!(out.is_gray(), "coherent noise keeps gray frames gray");
    out.data().iter().step_by(3).copied().collect()
}

fn quantize(x: f64) -> usize {
    (x.clamp(0.0, 1.0) * 255.0).round() as usize
}

/// Output pmf for `clip(v + N(0, sigma²))` rounded to 8 bits.
fn gaussian_pmf(level: u8, sigma: f64) -> Vec<f64> {
    let v = level as f64 / 255.0;
    let phi = |k: f64| Normal::new(0.0, 1.0).unwrap().cdf((k / 255.0 - v) / sigma);
    (0..256)
        .map(|k| match k {
            0 => phi(0.5),
            255 => 1.0 - phi(254.5),
            _ => phi(k as f64 + 0.5) - phi(k as f64 - 0.5),
        })
        .collect()
}

/// Output pmf for `clip(Poisson(v · rate) / rate)` rounded to 8 bits.
fn shot_pmf(level: u8, rate: f64) -> Vec<f64> {
    let v = (level as f32 / 255.0) as f64;
    let mut pmf = vec![0.0; 256];
    if v == 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    let dist = Poisson::new(v * rate).unwrap();
    let mut covered = 0.0;
    let mut n = 0u64;
    while covered < 1.0 - 1e-13 {
        let p = dist.pmf(n);
        pmf[quantize(n as f64 / rate)] += p;
        covered += p;
        n += 1;
    }
    pmf
}

fn moments(pmf: &[f64]) -> (f64, f64, f64) {
    let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let var: f64 = pmf.iter().enumerate().map(|(k, p)| (k as f64 - mean).powi(2) * p).sum();
    let m4: f64 = pmf.iter().enumerate().map(|(k, p)| (k as f64 - mean).powi(4) * p).sum();
    (mean, var, m4)
}

fn check(samples: &[u8], pmf: &[f64], label: &str) {
    let n = samples.len() as f64;
    let (mean, var, m4) = moments(pmf);
    let emp_mean = samples.iter().map(|&s| s as f64).sum::<f64>() / n;
    let emp_var = samples.iter().map(|&s| (s as f64 - emp_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se_mean = (var / n).sqrt().max(1e-9);
    let se_var = ((m4 - var * var) / n).sqrt().max(1e-9);
    assert!(
        (emp_mean - mean).abs() <= 5.0 * se_mean,
        "{label}: mean {emp_mean:.4} vs {mean:.4} (se {se_mean:.4})"
    );
    assert!(
        (emp_var - var).abs() <= 5.0 * se_var,
        "{label}: variance {emp_var:.4} vs {var:.4} (se {se_var:.4})"
    );
}

#[test]
fn gaussian_noise_matches_clipped_normal() {
    let sigmas = ParamSchedule::default().gaussian_noise;
    for (level, severity) in [(128u8, 5u8), (10, 4), (250, 1), (0, 3), (255, 2)] {
        let samples = flat_output(level, CorruptionKind::GaussianNoise, severity, 17 + level as u64);
        let pmf = gaussian_pmf(level, sigmas[severity as usize - 1] as f64);
        check(&samples, &pmf, &format!("gaussian level {level} severity {severity}"));
    }
}

#[test]
fn shot_noise_matches_scaled_poisson() {
    let rates = ParamSchedule::default().shot_noise;
    for (level, severity) in [(128u8, 5u8), (10, 4), (250, 1), (60, 3), (0, 2)] {
        let samples = flat_output(level, CorruptionKind::ShotNoise, severity, 99 + level as u64);
        let pmf = shot_pmf(level, rates[severity as usize - 1] as f64);
        check(&samples, &pmf, &format!("shot level {level} severity {severity}"));
    }
}

#[test]
fn impulse_noise_hits_expected_fraction() {
    let amounts = ParamSchedule::default().impulse_noise;
    for severity in 1..=5u8 {
        let samples = flat_output(128, CorruptionKind::ImpulseNoise, severity, 7);
        let a = amounts[severity as usize - 1] as f64;
        let n = samples.len() as f64;
        for (value, label) in [(0u8, "pepper"), (255, "salt")] {
            let frac = samples.iter().filter(|&&s| s == value).count() as f64 / n;
            let p = a / 2.0;
            let se = (p * (1.0 - p) / n).sqrt();
            assert!((frac - p).abs() <= 5.0 * se, "{label} severity {severity}: {frac:.4} vs {p:.4}");
        }
        assert!(samples.iter().all(|&s| s == 0 || s == 128 || s == 255));
    }
}
