//! Linear convolution of sampled sequences.
//!
//! Short products use the direct sum; longer ones go through a zero-padded
//! FFT. Both paths are deterministic for identical inputs.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Work (in multiply-adds) below which the direct sum is used.
const DIRECT_LIMIT: usize = 1 << 16;

/// Full linear convolution, `len = a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().saturating_mul(b.len()) <= DIRECT_LIMIT {
        return convolve_direct(a, b);
    }
    let ac: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let bc: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_convolve(&ac, &bc).into_iter().map(|z| z.re).collect()
}

/// Full linear convolution of complex sequences.
pub fn convolve_complex(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().saturating_mul(b.len()) <= DIRECT_LIMIT {
        let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    fft_convolve(a, b)
}

fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn fft_convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut fa = vec![Complex64::new(0.0, 0.0); n];
    fa[..a.len()].copy_from_slice(a);
    let mut fb = vec![Complex64::new(0.0, 0.0); n];
    fb[..b.len()].copy_from_slice(b);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa.truncate(out_len);
    for z in fa.iter_mut() {
        *z *= scale;
    }
    fa
}
