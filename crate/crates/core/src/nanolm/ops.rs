//! Dense kernels: strided GEMM, layer norm, GELU, log-softmax.

use super::real::Real;

/// A strided view into a slice: element (i, j) lives at `off + i*rs + j*cs`.
#[derive(Clone, Copy)]
pub struct View {
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

impl View {
    pub fn rows(off: usize, rs: usize) -> Self {
        Self { off, rs, cs: 1 }
    }

    /// The transpose of a row-major view.
    pub fn t(off: usize, rs: usize) -> Self {
        Self { off, rs: 1, cs: rs }
    }

    fn last(&self, r: usize, c: usize) -> usize {
        self.off + (r - 1) * self.rs + (c - 1) * self.cs
    }
}

/// `C[m,n] = alpha * A[m,k] B[k,n] + beta * C`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<R: Real>(
    m: usize,
    k: usize,
    n: usize,
    alpha: R,
    a: &[R],
    av: View,
    b: &[R],
    bv: View,
    beta: R,
    c: &mut [R],
    cv: View,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(cv.last(m, n) < c.len(), "gemm: C out of bounds");
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let x = &mut c[cv.off + i * cv.rs + j * cv.cs];
                *x = if beta == R::ZERO { R::ZERO } else { beta * *x };
            }
        }
        return;
    }
    assert!(av.last(m, k) < a.len(), "gemm: A out of bounds");
    assert!(bv.last(k, n) < b.len(), "gemm: B out of bounds");
    // SAFETY: bounds checked above; `c` is a distinct &mut borrow.
    unsafe {
        R::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr().add(av.off),
            av.rs as isize,
            av.cs as isize,
            b.as_ptr().add(bv.off),
            bv.rs as isize,
            bv.cs as isize,
            beta,
            c.as_mut_ptr().add(cv.off),
            cv.rs as isize,
            cv.cs as isize,
        );
    }
}

/// `out[N,O] = x[N,I] w[I,O] + b`.
pub fn linear<R: Real>(x: &[R], w: &[R], b: &[R], out: &mut [R], n: usize, i: usize, o: usize) {
    for row in out[..n * o].chunks_exact_mut(o) {
        row.copy_from_slice(&b[..o]);
    }
    gemm(n, i, o, R::ONE, x, View::rows(0, i), w, View::rows(0, o), R::ONE, out, View::rows(0, o));
}

/// Accumulates parameter and input gradients of [`linear`].
#[allow(clippy::too_many_arguments)]
pub fn linear_backward<R: Real>(
    dout: &[R],
    x: &[R],
    w: &[R],
    dx: Option<&mut [R]>,
    dw: &mut [R],
    db: &mut [R],
    n: usize,
    i: usize,
    o: usize,
) {
    for row in dout[..n * o].chunks_exact(o) {
        for (g, d) in db.iter_mut().zip(row) {
            *g += *d;
        }
    }
    gemm(i, n, o, R::ONE, x, View::t(0, i), dout, View::rows(0, o), R::ONE, dw, View::rows(0, o));
    if let Some(dx) = dx {
        gemm(n, o, i, R::ONE, dout, View::rows(0, o), w, View::t(0, o), R::ONE, dx, View::rows(0, i));
    }
}

pub const LN_EPS: f64 = 1e-5;

pub fn layernorm<R: Real>(x: &[R], w: &[R], b: &[R], out: &mut [R], mean: &mut [R], rstd: &mut [R], c: usize) {
    let inv_c = R::from_f64(1.0 / c as f64);
    let eps = R::from_f64(LN_EPS);
    for (r, (xr, or)) in x.chunks_exact(c).zip(out.chunks_exact_mut(c)).enumerate() {
        let m = xr.iter().copied().sum::<R>() * inv_c;
        let var = xr.iter().map(|&v| (v - m) * (v - m)).sum::<R>() * inv_c;
        let s = R::ONE / (var + eps).sqrt();
        for j in 0..c {
            or[j] = (xr[j] - m) * s * w[j] + b[j];
        }
        mean[r] = m;
        rstd[r] = s;
    }
}

#[allow(clippy::too_many_arguments)]
pub fn layernorm_backward<R: Real>(
    dout: &[R],
    x: &[R],
    w: &[R],
    mean: &[R],
    rstd: &[R],
    dx: &mut [R],
    dw: &mut [R],
    db: &mut [R],
    c: usize,
) {
    let inv_c = R::from_f64(1.0 / c as f64);
    for (r, ((dr, xr), dxr)) in dout.chunks_exact(c).zip(x.chunks_exact(c)).zip(dx.chunks_exact_mut(c)).enumerate() {
        let (m, s) = (mean[r], rstd[r]);
        let mut dnorm_mean = R::ZERO;
        let mut dnorm_norm_mean = R::ZERO;
        for j in 0..c {
            let norm = (xr[j] - m) * s;
            let dnorm = w[j] * dr[j];
            dnorm_mean += dnorm;
            dnorm_norm_mean += dnorm * norm;
        }
        dnorm_mean *= inv_c;
        dnorm_norm_mean *= inv_c;
        for j in 0..c {
            let norm = (xr[j] - m) * s;
            let dnorm = w[j] * dr[j];
            db[j] += dr[j];
            dw[j] += norm * dr[j];
            dxr[j] += s * (dnorm - dnorm_mean - norm * dnorm_norm_mean);
        }
    }
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_C: f64 = 0.044715;

/// `tanh` through one `exp`, several times cheaper than libm's `tanh`.
#[inline]
fn tanh<R: Real>(u: R) -> R {
    let two = R::from_f64(2.0);
    R::ONE - two / ((two * u).exp() + R::ONE)
}

pub fn gelu<R: Real>(x: &[R], out: &mut [R]) {
    let k = R::from_f64(GELU_K);
    let c = R::from_f64(GELU_C);
    let half = R::from_f64(0.5);
    for (o, &v) in out.iter_mut().zip(x) {
        *o = half * v * (R::ONE + tanh(k * (v + c * v * v * v)));
    }
}

/// `dx += dout * gelu'(x)`.
pub fn gelu_backward<R: Real>(dout: &[R], x: &[R], dx: &mut [R]) {
    let k = R::from_f64(GELU_K);
    let c = R::from_f64(GELU_C);
    let c3 = R::from_f64(3.0 * GELU_C);
    let half = R::from_f64(0.5);
    for ((g, &d), &v) in dx.iter_mut().zip(dout).zip(x) {
        let u = k * (v + c * v * v * v);
        let t = tanh(u);
        let sech2 = R::ONE - t * t;
        let local = half * (R::ONE + t) + half * v * sech2 * k * (R::ONE + c3 * v * v);
        *g += d * local;
    }
}

/// In-place log-softmax of one row; returns the log-sum-exp.
pub fn log_softmax_row<R: Real>(row: &mut [R]) -> R {
    let max = row.iter().copied().fold(R::NEG_INFINITY, R::max);
    let sum: R = row.iter().map(|&v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    for v in row.iter_mut() {
        *v -= lse;
    }
    lse
}

/// In-place softmax of one row.
pub fn softmax_row<R: Real>(row: &mut [R]) {
    let max = row.iter().copied().fold(R::NEG_INFINITY, R::max);
    let mut sum = R::ZERO;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = R::ONE / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}
