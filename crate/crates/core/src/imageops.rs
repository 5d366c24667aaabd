//! Image operators: directional differences, the log penalty and periodic
//! 2-D convolution.

use ndarray::{s, Array2, ArrayView2};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Offsets `(di, dj)` and weights of the eight directional differences
/// `(∇_p u)_{i,j} = w_p (u_{i+di, j+dj} − u_{i,j})`.
pub const DIRECTIONS: [(isize, isize, f64); 8] = [
    (1, 0, 1.0),
    (0, 1, 1.0),
    (1, 1, std::f64::consts::FRAC_1_SQRT_2),
    (1, -1, std::f64::consts::FRAC_1_SQRT_2),
    (2, 1, 0.447_213_595_499_958),
    (2, -1, 0.447_213_595_499_958),
    (1, 2, 0.447_213_595_499_958),
    (-1, 2, 0.447_213_595_499_958),
];

/// Directional difference `p` (0-based). Pixels whose neighbour falls
/// outside the image get zero.
pub fn dir_grad(u: ArrayView2<'_, f64>, p: usize) -> Array2<f64> {
    let (di, dj, w) = DIRECTIONS[p];
    let (m, n) = u.dim();
    Array2::from_shape_fn((m, n), |(i, j)| {
        let (ii, jj) = (i as isize + di, j as isize + dj);
        if ii < 0 || jj < 0 || ii >= m as isize || jj >= n as isize {
            0.0
        } else {
            w * (u[[ii as usize, jj as usize]] - u[[i, j]])
        }
    })
}

/// Adjoint of [`dir_grad`].
pub fn dir_grad_adjoint(v: ArrayView2<'_, f64>, p: usize) -> Array2<f64> {
    let (di, dj, w) = DIRECTIONS[p];
    let (m, n) = v.dim();
    let mut out = Array2::zeros((m, n));
    for i in 0..m {
        for j in 0..n {
            let (ii, jj) = (i as isize + di, j as isize + dj);
            if ii < 0 || jj < 0 || ii >= m as isize || jj >= n as isize {
                continue;
            }
            let val = w * v[[i, j]];
            out[[ii as usize, jj as usize]] += val;
            out[[i, j]] -= val;
        }
    }
    out
}

/// `φ(x) = log(1 + θx²)`.
pub fn phi(x: f64, theta: f64) -> f64 {
    (theta * x * x).ln_1p()
}

/// `φ'(x) = 2θx / (1 + θx²)`.
pub fn phi_prime(x: f64, theta: f64) -> f64 {
    2.0 * theta * x / (1.0 + theta * x * x)
}

/// Total log-penalty `Σ_p Σ_{i,j} φ((∇_p u)_{i,j})`.
pub fn log_penalty(u: ArrayView2<'_, f64>, theta: f64) -> f64 {
    (0..DIRECTIONS.len())
        .map(|p| dir_grad(u, p).iter().map(|&x| phi(x, theta)).sum::<f64>())
        .sum()
}

/// Gradient of [`log_penalty`]: `Σ_p ∇_pᵀ φ'(∇_p u)`.
pub fn log_penalty_grad(u: ArrayView2<'_, f64>, theta: f64) -> Array2<f64> {
    let mut out = Array2::zeros(u.dim());
    for p in 0..DIRECTIONS.len() {
        let g = dir_grad(u, p).mapv(|x| phi_prime(x, theta));
        out += &dir_grad_adjoint(g.view(), p);
    }
    out
}

/// Sampled `l×l` Gaussian centered at the middle pixel, normalized to sum 1.
pub fn gaussian_filter(l: usize, sigma: f64) -> Array2<f64> {
    let c = (l / 2) as f64;
    let g = Array2::from_shape_fn((l, l), |(i, j)| {
        let (di, dj) = (i as f64 - c, j as f64 - c);
        (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp()
    });
    let total = g.sum();
    g / total
}

/// Periodic convolution of an `m1×m2` image with a kernel placed with its
/// origin at `(oi, oj)`:
/// `(u ∗ b)_{i,j} = Σ_{k,l} b_{k,l} u_{(i − k + oi) mod m1, (j − l + oj) mod m2}`.
fn conv_offset(
    u: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    oi: usize,
    oj: usize,
) -> Result<Array2<f64>> {
    let (m1, m2) = u.dim();
    let (n1, n2) = b.dim();
    if n1 > m1 || n2 > m2 {
        return Err(Error::Shape(format!(
            "kernel {n1}x{n2} larger than image {m1}x{m2}"
        )));
    }
    let mut out = Array2::zeros((m1, m2));
    for k in 0..n1 {
        for l in 0..n2 {
            let w = b[[k, l]];
            if w == 0.0 {
                continue;
            }
            let si = (m1 + oi - k % m1) % m1;
            let sj = (m2 + oj - l % m2) % m2;
            for i in 0..m1 {
                let ii = (i + si) % m1;
                for j in 0..m2 {
                    out[[i, j]] += w * u[[ii, (j + sj) % m2]];
                }
            }
        }
    }
    Ok(out)
}

/// Periodic convolution anchored at the kernel's `(0, 0)` entry:
/// `(u ∗ b)_{i,j} = Σ_{k,l} b_{k,l} u_{(i−k) mod m1, (j−l) mod m2}`.
pub fn circ_conv(u: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    conv_offset(u, b, 0, 0)
}

/// Periodic convolution with the kernel centered at `(n1/2, n2/2)`, so a
/// symmetric kernel does not shift the image.
pub fn circ_conv_centered(u: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n1, n2) = b.dim();
    conv_offset(u, b, n1 / 2, n2 / 2)
}

/// Adjoint of `u ↦ circ_conv_centered(u, b)` applied to `r`.
pub fn circ_conv_centered_adjoint_image(
    r: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let (m1, m2) = r.dim();
    let (n1, n2) = b.dim();
    if n1 > m1 || n2 > m2 {
        return Err(Error::Shape(format!(
            "kernel {n1}x{n2} larger than image {m1}x{m2}"
        )));
    }
    let (oi, oj) = (n1 / 2, n2 / 2);
    let mut out = Array2::zeros((m1, m2));
    for k in 0..n1 {
        for l in 0..n2 {
            let w = b[[k, l]];
            if w == 0.0 {
                continue;
            }
            let si = (m1 + oi - k % m1) % m1;
            let sj = (m2 + oj - l % m2) % m2;
            for i in 0..m1 {
                let ii = (i + si) % m1;
                for j in 0..m2 {
                    out[[ii, (j + sj) % m2]] += w * r[[i, j]];
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of `b ↦ circ_conv_centered(u, b)` for a kernel of shape
/// `kshape`, applied to `r`: `g_{k,l} = Σ_{i,j} r_{i,j} u_{i−k+oi, j−l+oj}`.
pub fn circ_conv_centered_adjoint_kernel(
    r: ArrayView2<'_, f64>,
    u: ArrayView2<'_, f64>,
    kshape: (usize, usize),
) -> Result<Array2<f64>> {
    let (m1, m2) = u.dim();
    let (n1, n2) = kshape;
    if r.dim() != u.dim() {
        return Err(Error::Shape("residual and image shapes differ".into()));
    }
    if n1 > m1 || n2 > m2 {
        return Err(Error::Shape(format!(
            "kernel {n1}x{n2} larger than image {m1}x{m2}"
        )));
    }
    let (oi, oj) = (n1 / 2, n2 / 2);
    let mut out = Array2::zeros((n1, n2));
    for k in 0..n1 {
        for l in 0..n2 {
            let si = (m1 + oi - k % m1) % m1;
            let sj = (m2 + oj - l % m2) % m2;
            let mut acc = 0.0;
            for i in 0..m1 {
                let ii = (i + si) % m1;
                for j in 0..m2 {
                    acc += r[[i, j]] * u[[ii, (j + sj) % m2]];
                }
            }
            out[[k, l]] = acc;
        }
    }
    Ok(out)
}

fn fft2(data: &mut Array2<Complex<f64>>, inverse: bool, planner: &mut FftPlanner<f64>) {
    let (m1, m2) = data.dim();
    let row_fft = if inverse {
        planner.plan_fft_inverse(m2)
    } else {
        planner.plan_fft_forward(m2)
    };
    let col_fft = if inverse {
        planner.plan_fft_inverse(m1)
    } else {
        planner.plan_fft_forward(m1)
    };
    for mut row in data.rows_mut() {
        let mut buf: Vec<Complex<f64>> = row.to_vec();
        row_fft.process(&mut buf);
        row.iter_mut().zip(buf).for_each(|(d, v)| *d = v);
    }
    for mut col in data.columns_mut() {
        let mut buf: Vec<Complex<f64>> = col.to_vec();
        col_fft.process(&mut buf);
        col.iter_mut().zip(buf).for_each(|(d, v)| *d = v);
    }
}

/// [`circ_conv`] through the 2-D FFT.
pub fn circ_conv_fft(u: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (m1, m2) = u.dim();
    let (n1, n2) = b.dim();
    if n1 > m1 || n2 > m2 {
        return Err(Error::Shape(format!(
            "kernel {n1}x{n2} larger than image {m1}x{m2}"
        )));
    }
    let mut planner = FftPlanner::new();
    let mut fu = u.mapv(|v| Complex::new(v, 0.0));
    let mut fb = Array2::from_elem((m1, m2), Complex::new(0.0, 0.0));
    fb.slice_mut(s![..n1, ..n2])
        .assign(&b.mapv(|v| Complex::new(v, 0.0)));
    fft2(&mut fu, false, &mut planner);
    fft2(&mut fb, false, &mut planner);
    let mut prod = fu * fb;
    fft2(&mut prod, true, &mut planner);
    let scale = 1.0 / (m1 * m2) as f64;
    Ok(prod.mapv(|c| c.re * scale))
}
