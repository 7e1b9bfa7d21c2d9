//! Small dense helpers for hidden-state sized vectors and matrices.
//!
//! Hidden vectors have length `d_h` (1 or 2 for the built-in cells) and
//! square matrices are stored row-major as `d_h * d_h` slices.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = m * v`.
#[inline]
pub fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = dot(&m[r * d..(r + 1) * d], v);
    }
}

/// `out = v^T * m`, the row-vector product used by the backward recursions.
#[inline]
pub fn vec_mat(v: &[f64], m: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (c, o) in out.iter_mut().enumerate() {
        *o = (0..d).map(|r| v[r] * m[r * d + c]).sum();
    }
}

/// `out = a * b` for square row-major matrices.
pub fn mat_mul(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    for r in 0..d {
        for c in 0..d {
            out[r * d + c] = (0..d).map(|q| a[r * d + q] * b[q * d + c]).sum();
        }
    }
}

/// `out = col * row^T`.
pub fn outer(col: &[f64], row: &[f64], out: &mut [f64]) {
    let d = row.len();
    for (r, c) in col.iter().enumerate() {
        for (q, x) in row.iter().enumerate() {
            out[r * d + q] = c * x;
        }
    }
}

pub fn identity(d: usize, out: &mut [f64]) {
    for r in 0..d {
        for c in 0..d {
            out[r * d + c] = if r == c { 1.0 } else { 0.0 };
        }
    }
}
