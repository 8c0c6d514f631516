//! Radix-2 FFT and the periodic spectral Poisson solve used by the vorticity
//! solver. Power-of-two sizes only.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::math::{cos, sin, PI};

fn require_pow2(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        Err(Error::NotPowerOfTwo(n))
    } else {
        Ok(())
    }
}

/// In-place iterative Cooley–Tukey transform. The forward transform is
/// unnormalised; the inverse divides by `n`.
pub fn fft(buf: &mut [Complex64], inverse: bool) -> Result<()> {
    let n = buf.len();
    require_pow2(n)?;
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) };
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = Complex64::new(cos(ang * k as f64), sin(ang * k as f64));
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * w;
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
    if inverse {
        let s = 1.0 / n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
    Ok(())
}

/// 2D transform of a row-major `ny × nx` array.
pub fn fft2(data: &mut [Complex64], ny: usize, nx: usize, inverse: bool) -> Result<()> {
    check_len("fft2 data", ny * nx, data.len())?;
    require_pow2(ny)?;
    require_pow2(nx)?;
    for row in data.chunks_mut(nx) {
        fft(row, inverse)?;
    }
    let mut col = alloc::vec![Complex64::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = data[j * nx + i];
        }
        fft(&mut col, inverse)?;
        for j in 0..ny {
            data[j * nx + i] = col[j];
        }
    }
    Ok(())
}

/// Angular wavenumber of FFT bin `m` on a periodic interval of length `l`.
fn wavenumber(m: usize, n: usize, l: f64) -> f64 {
    let signed = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
    2.0 * PI * signed / l
}

/// Streamfunction and velocities for a periodic vorticity field.
#[derive(Debug, Clone)]
pub struct StreamSolution {
    pub psi: Vec<f64>,
    /// `∂ψ/∂y`
    pub u: Vec<f64>,
    /// `-∂ψ/∂x`
    pub v: Vec<f64>,
}

/// Solves `Δψ = -ω` spectrally with the zero mode of `ψ` set to 0, then
/// differentiates `ψ` spectrally. Nyquist modes are dropped from the
/// derivatives.
pub fn solve_streamfunction(omega: &[f64], ny: usize, nx: usize, ly: f64, lx: f64) -> Result<StreamSolution> {
    check_len("vorticity", ny * nx, omega.len())?;
    let mut w: Vec<Complex64> = omega.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft2(&mut w, ny, nx, false)?;
    let mut psi_h = w;
    let mut u_h = alloc::vec![Complex64::new(0.0, 0.0); ny * nx];
    let mut v_h = u_h.clone();
    let i_unit = Complex64::new(0.0, 1.0);
    for j in 0..ny {
        let ky = wavenumber(j, ny, ly);
        for i in 0..nx {
            let kx = wavenumber(i, nx, lx);
            let idx = j * nx + i;
            let k2 = kx * kx + ky * ky;
            psi_h[idx] = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { psi_h[idx] / k2 };
            let dy = if 2 * j == ny { 0.0 } else { ky };
            let dx = if 2 * i == nx { 0.0 } else { kx };
            u_h[idx] = i_unit * dy * psi_h[idx];
            v_h[idx] = -(i_unit * dx * psi_h[idx]);
        }
    }
    fft2(&mut psi_h, ny, nx, true)?;
    fft2(&mut u_h, ny, nx, true)?;
    fft2(&mut v_h, ny, nx, true)?;
    Ok(StreamSolution {
        psi: psi_h.iter().map(|c| c.re).collect(),
        u: u_h.iter().map(|c| c.re).collect(),
        v: v_h.iter().map(|c| c.re).collect(),
    })
}
