//! Float abstraction so the same kernels run in f32 (training) and f64
//! (gradient checks), plus a bounds-checked wrapper over the GEMM kernels.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Send + Sync + 'static
{
    /// `C = alpha * A * B + beta * C` with arbitrary (non-negative) strides.
    ///
    /// # Safety
    /// Every element addressed by the shapes and strides must be in bounds.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    /// In-place `exp`. Inputs below about -87 may flush to a tiny positive value.
    fn exp_slice(xs: &mut [Self]);

    /// In-place `tanh`.
    fn tanh_slice(xs: &mut [Self]);

    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite conversion")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

/// Branch-free single-precision exp: Cody-Waite range reduction by ln 2 and a
/// degree-6 minimax polynomial. Relative error stays below 3e-7 on the
/// clamped range. Rounding uses the 1.5 * 2^23 shifter instead of `floor` so
/// the loop vectorizes on baseline x86-64.
#[inline(always)]
fn exp_f32(x: f32) -> f32 {
    const LOG2E: f32 = std::f32::consts::LOG2_E;
    const C1: f32 = 0.693_359_4;
    const C2: f32 = -2.121_944_4e-4;
    const SHIFTER: f32 = 12_582_912.0;
    let x = x.clamp(-87.3, 88.7);
    let k = x * LOG2E + SHIFTER;
    let n = k - SHIFTER;
    let ni = (k.to_bits() as i32).wrapping_sub(SHIFTER.to_bits() as i32);
    let r = x - n * C1 - n * C2;
    let mut y = 1.987_569_1e-4f32;
    y = y * r + 1.398_199_9e-3;
    y = y * r + 8.333_452e-3;
    y = y * r + 4.166_579_6e-2;
    y = y * r + 1.666_666_5e-1;
    y = y * r + 0.5;
    y = y * r * r + r + 1.0;
    y * f32::from_bits(((ni + 127) as u32) << 23)
}

impl Scalar for f32 {
    fn exp_slice(xs: &mut [f32]) {
        for x in xs.iter_mut() {
            *x = exp_f32(*x);
        }
    }

    fn tanh_slice(xs: &mut [f32]) {
        // tanh(x) = 1 - 2 / (exp(2x) + 1); the clamp keeps exp finite.
        for x in xs.iter_mut() {
            let e = exp_f32(2.0 * x.clamp(-15.0, 15.0));
            *x = 1.0 - 2.0 / (e + 1.0);
        }
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f64 {
    fn exp_slice(xs: &mut [f64]) {
        for x in xs.iter_mut() {
            *x = x.exp();
        }
    }

    fn tanh_slice(xs: &mut [f64]) {
        for x in xs.iter_mut() {
            *x = x.tanh();
        }
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Strided matrix view: element (i, j) lives at `data[i * rs + j * cs]`.
#[derive(Clone, Copy)]
pub struct View<'a, F> {
    pub data: &'a [F],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

pub struct ViewMut<'a, F> {
    pub data: &'a mut [F],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

fn extent(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

impl<'a, F> View<'a, F> {
    /// Row-major `rows x cols`.
    pub fn rm(data: &'a [F], rows: usize, cols: usize) -> Self {
        Self { data, rows, cols, rs: cols, cs: 1 }
    }

    /// Transpose of a row-major `cols x rows` buffer, seen as `rows x cols`.
    pub fn tr(data: &'a [F], rows: usize, cols: usize) -> Self {
        Self { data, rows, cols, rs: 1, cs: rows }
    }

    pub fn strided(data: &'a [F], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        Self { data, rows, cols, rs, cs }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }
}

impl<'a, F> ViewMut<'a, F> {
    pub fn rm(data: &'a mut [F], rows: usize, cols: usize) -> Self {
        Self { data, rows, cols, rs: cols, cs: 1 }
    }

    pub fn strided(data: &'a mut [F], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        Self { data, rows, cols, rs, cs }
    }
}

/// `C = alpha * A * B + beta * C`.
pub fn gemm<F: Scalar>(alpha: F, a: View<'_, F>, b: View<'_, F>, beta: F, c: ViewMut<'_, F>) {
    assert_eq!(a.cols, b.rows, "inner dimensions");
    assert_eq!((a.rows, b.cols), (c.rows, c.cols), "output shape");
    assert!(extent(a.rows, a.cols, a.rs, a.cs) <= a.data.len(), "A out of bounds");
    assert!(extent(b.rows, b.cols, b.rs, b.cs) <= b.data.len(), "B out of bounds");
    assert!(extent(c.rows, c.cols, c.rs, c.cs) <= c.data.len(), "C out of bounds");
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    if a.cols == 0 {
        for i in 0..c.rows {
            for j in 0..c.cols {
                let x = &mut c.data[i * c.rs + j * c.cs];
                *x = if beta == F::zero() { F::zero() } else { *x * beta };
            }
        }
        return;
    }
    // SAFETY: extents were checked against the slice lengths above.
    unsafe {
        F::gemm_raw(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr(),
            c.rs as isize,
            c.cs as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_with_transposes() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|x| x as f64 * 0.5 - 1.0).collect();
        let b: Vec<f64> = (0..k * n).map(|x| (x as f64).sin()).collect();
        let want = naive(&a, &b, m, k, n);
        let mut c = vec![0.0; m * n];
        gemm(1.0, View::rm(&a, m, k), View::rm(&b, k, n), 0.0, ViewMut::rm(&mut c, m, n));
        assert!(c.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-12));

        // A^T stored row-major as k x m.
        let mut at = vec![0.0; k * m];
        for i in 0..m {
            for p in 0..k {
                at[p * m + i] = a[i * k + p];
            }
        }
        let mut c2 = vec![1.0; m * n];
        gemm(1.0, View::tr(&at, m, k), View::rm(&b, k, n), 0.0, ViewMut::rm(&mut c2, m, n));
        assert_eq!(c, c2);
    }

    #[test]
    fn fast_f32_transcendentals_match_std() {
        let mut worst_exp = 0f64;
        let mut worst_tanh = 0f64;
        for i in 0..200_000 {
            let x = -87.0 + 175.0 * i as f32 / 200_000.0;
            let mut e = [x];
            f32::exp_slice(&mut e);
            let want = (x as f64).exp();
            worst_exp = worst_exp.max(((e[0] as f64) - want).abs() / want);
            let y = -20.0 + 40.0 * i as f32 / 200_000.0;
            let mut t = [y];
            f32::tanh_slice(&mut t);
            worst_tanh = worst_tanh.max(((t[0] as f64) - (y as f64).tanh()).abs());
        }
        assert!(worst_exp < 3e-7, "exp rel err {worst_exp}");
        assert!(worst_tanh < 3e-7, "tanh abs err {worst_tanh}");
    }

    #[test]
    #[should_panic(expected = "out of bounds")]
    fn gemm_rejects_short_buffers() {
        let a = vec![0.0f32; 5];
        let b = vec![0.0f32; 6];
        let mut c = vec![0.0f32; 4];
        gemm(1.0, View::rm(&a, 2, 3), View::rm(&b, 3, 2), 0.0, ViewMut::rm(&mut c, 2, 2));
    }
}
