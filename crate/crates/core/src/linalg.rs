//! Eigenvalues of dense symmetric matrices.
//!
//! Small matrices use cyclic Jacobi rotations. Larger ones are reduced to
//! tridiagonal form by Householder reflections and finished with implicit QL.
//! The reduction keeps the rank-2 update of each step pending and applies it in
//! the same sweep that forms the next matrix-vector product, so the trailing
//! lower triangle is streamed once per step.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

const JACOBI_MAX: usize = 64;
const MAX_QL_ITERATIONS: usize = 60;

/// All eigenvalues of a symmetric matrix, sorted descending.
///
/// Only the lower triangle is read.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Shape(alloc::format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("matrix has non-finite entries".into()));
    }
    if m.rows() <= JACOBI_MAX {
        let mut values = jacobi_eigenvalues(m)?;
        values.sort_by(|a, b| b.total_cmp(a));
        return Ok(values);
    }
    symmetric_eigenvalues_owned(m.clone())
}

/// [`symmetric_eigenvalues`] reusing the matrix storage as workspace.
pub fn symmetric_eigenvalues_owned(m: Matrix) -> Result<Vec<f64>> {
    if !m.is_square() || m.rows() <= JACOBI_MAX {
        return symmetric_eigenvalues(&m);
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("matrix has non-finite entries".into()));
    }
    let n = m.rows();
    let (_, _, data) = m.into_raw();
    let (d, e) = tridiagonalize(n, data);
    let mut values = tridiagonal_eigenvalues(d, e)?;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

pub(crate) fn jacobi_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let n = m.rows();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            a[i * n + j] = m.get(i, j);
            a[j * n + i] = m.get(i, j);
        }
    }
    let floor = f64::EPSILON * math::sqrt(a.iter().map(|v| v * v).sum::<f64>());
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                // Negligible next to both diagonals: drop it instead of rotating.
                if math::abs(apq) <= 1e-3 * f64::EPSILON * (math::abs(app) + math::abs(aqq))
                    || math::abs(apq) <= floor
                {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (math::abs(theta) + math::hypot(theta, 1.0));
                let c = 1.0 / math::hypot(t, 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
        if !rotated {
            return Ok((0..n).map(|i| a[i * n + i]).collect());
        }
    }
    Err(Error::NoConvergence)
}

/// Householder reduction of the lower triangle to `(diagonal, subdiagonal)`,
/// with `e[i]` coupling `i` and `i + 1`.
pub(crate) fn tridiagonalize(n: usize, mut a: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    // Pending update A ← A − v wᵀ − w vᵀ from the previous step.
    let mut v_old = vec![0.0; n];
    let mut w_old = vec![0.0; n];
    let mut v_new = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n {
        for i in k..n {
            a[i * n + k] -= v_old[i] * w_old[k] + w_old[i] * v_old[k];
        }
        d[k] = a[k * n + k];
        if k + 1 == n {
            break;
        }

        // Reflector for x = A[k+1.., k].
        let x0 = a[(k + 1) * n + k];
        let tail: f64 = (k + 2..n).map(|i| a[i * n + k] * a[i * n + k]).sum();
        v_new.fill(0.0);
        let beta = if tail == 0.0 {
            e[k] = x0;
            0.0
        } else {
            let norm = math::sqrt(x0 * x0 + tail);
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            e[k] = alpha;
            v_new[k + 1] = x0 - alpha;
            for i in k + 2..n {
                v_new[i] = a[i * n + k];
            }
            let vtv = v_new[k + 1] * v_new[k + 1] + tail;
            2.0 / vtv
        };

        // Apply the pending update to the trailing block and form p = A v_new.
        p.fill(0.0);
        for i in k + 1..n {
            let row = &mut a[i * n + k + 1..i * n + i + 1];
            let lo = k + 1;
            let (vi, wi, ui) = (v_old[i], w_old[i], v_new[i]);
            let acc = fused_row(
                row,
                &v_old[lo..=i],
                &w_old[lo..=i],
                &v_new[lo..=i],
                &mut p[lo..=i],
                vi,
                wi,
                ui,
            );
            p[i] += acc;
        }

        if beta == 0.0 {
            v_old.fill(0.0);
            w_old.fill(0.0);
            continue;
        }
        let mut vp = 0.0;
        for i in k + 1..n {
            p[i] *= beta;
            vp += v_new[i] * p[i];
        }
        let kk = 0.5 * beta * vp;
        core::mem::swap(&mut v_old, &mut v_new);
        for i in 0..n {
            w_old[i] = if i > k { p[i] - kk * v_old[i] } else { 0.0 };
        }
    }
    e[n.saturating_sub(1)] = 0.0;
    (d, e)
}

/// One row of the fused sweep. `row` holds columns `lo..=i` of row `i`, the
/// last entry being the diagonal. Updates the row in place, adds the
/// off-diagonal transpose contributions to `p`, and returns the row's own
/// dot product with `u`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn fused_row(
    row: &mut [f64],
    v: &[f64],
    w: &[f64],
    u: &[f64],
    p: &mut [f64],
    vi: f64,
    wi: f64,
    ui: f64,
) -> f64 {
    let len = row.len();
    let off = len - 1;
    let mut acc = [0.0f64; 4];
    let chunks = off / 4;
    for c in 0..chunks {
        let base = c * 4;
        for l in 0..4 {
            let j = base + l;
            let val = row[j] - vi * w[j] - wi * v[j];
            row[j] = val;
            acc[l] += val * u[j];
            p[j] += val * ui;
        }
    }
    let mut tail = 0.0;
    for j in chunks * 4..off {
        let val = row[j] - vi * w[j] - wi * v[j];
        row[j] = val;
        tail += val * u[j];
        p[j] += val * ui;
    }
    let diag = row[off] - vi * w[off] - wi * v[off];
    row[off] = diag;
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail + diag * u[off]
}

/// Eigenvalues of the symmetric tridiagonal matrix `(d, e)` by implicit QL.
pub(crate) fn tridiagonal_eigenvalues(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    e.resize(n, 0.0);
    e[n - 1] = 0.0;
    let norm = d
        .iter()
        .zip(&e)
        .map(|(a, b)| math::abs(*a) + math::abs(*b))
        .fold(0.0, f64::max);
    let floor = f64::EPSILON * norm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = math::abs(d[m]) + math::abs(d[m + 1]);
                if math::abs(e[m]) <= f64::EPSILON * dd || math::abs(e[m]) <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = math::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = math::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}
