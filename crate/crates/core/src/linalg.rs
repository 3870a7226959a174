//! Dense vector kernels used on the O(d) hot path.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Row-major `d x d` matrix times vector.
pub fn mat_vec(mat: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    debug_assert_eq!(mat.len(), d * d);
    mat.chunks_exact(d).map(|row| dot(row, x)).collect()
}

/// Row-major `d x d` matrix, transposed, times vector.
pub fn mat_t_vec(mat: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    debug_assert_eq!(mat.len(), d * d);
    let mut out = vec![0.0; d];
    for (row, &xi) in mat.chunks_exact(d).zip(x) {
        axpy(xi, row, &mut out);
    }
    out
}
