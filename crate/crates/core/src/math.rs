//! Scalar helpers. `libm` stands in for the float intrinsics `core` lacks.

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// Logistic function, evaluated without overflow for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    let m = if x > 0.0 { x } else { 0.0 };
    m + libm::log1p(exp(-libm::fabs(x)))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Adds `scale * src` into `dst`.
#[inline]
pub fn axpy(dst: &mut [f64], scale: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// Backpropagates `grad` (w.r.t. `x / |x|`) to a gradient w.r.t. `x`,
/// accumulating `scale` times the result into `out`.
pub fn normalize_backward(x: &[f64], grad: &[f64], scale: f64, out: &mut [f64]) {
    let n = norm(x);
    if n == 0.0 {
        return;
    }
    let proj = dot(x, grad) / (n * n);
    for ((o, xv), g) in out.iter_mut().zip(x).zip(grad) {
        *o += scale * (g - proj * xv) / n;
    }
}

/// Gradient of `cos(x, y)` with respect to `x`, times `scale`, accumulated into `out`.
pub fn cosine_grad_x(x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
    let nx = norm(x);
    let ny = norm(y);
    if nx == 0.0 || ny == 0.0 {
        return;
    }
    let c = dot(x, y) / (nx * ny);
    for ((o, xv), yv) in out.iter_mut().zip(x).zip(y) {
        *o += scale * (yv / (nx * ny) - c * xv / (nx * nx));
    }
}
