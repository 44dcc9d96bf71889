//! Small numeric kernels shared across the crate.
//!
//! Vectors are plain `&[f64]` slices and `d x d` matrices are flat row-major
//! slices of length `d*d`. Every reduction that feeds a reported number goes
//! through [`pairwise_sum`], which fixes the summation tree from the slice
//! layout alone, so results are independent of thread count.

/// Fixed-order pairwise summation.
///
/// The tree is determined by the slice length only: halves are split at
/// `len / 2` and runs of at most 8 elements are added left to right. Equal
/// inputs in equal order always produce bit-identical sums.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let (lo, hi) = xs.split_at(xs.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

/// Pairwise sum of `f(i)` over `0..n` without materializing the values.
pub fn pairwise_sum_by<F: FnMut(usize) -> f64>(n: usize, mut f: F) -> f64 {
    fn rec<F: FnMut(usize) -> f64>(lo: usize, hi: usize, f: &mut F) -> f64 {
        if hi - lo <= 8 {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, n, &mut f)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `out = m * x` for a row-major `d x d` matrix.
pub fn matvec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    debug_assert_eq!(m.len(), d * d);
    for r in 0..d {
        out[r] = dot(&m[r * d..(r + 1) * d], x);
    }
}

/// Hilbert-Schmidt norm of a flat matrix.
pub fn hs_norm(m: &[f64]) -> f64 {
    norm2(m)
}

/// `det(sigma * sigma^T)` for a row-major `d x d` matrix.
///
/// For `d <= 3` the Gram determinant is expanded explicitly; larger
/// dimensions go through a Cholesky factorization of the Gram matrix
/// (product of squared pivots), which doubles as the positive-definiteness
/// check.
pub fn gram_det(sigma: &[f64], d: usize) -> f64 {
    debug_assert_eq!(sigma.len(), d * d);
    match d {
        1 => sigma[0] * sigma[0],
        2 | 3 => {
            let det = det_small(sigma, d);
            det * det
        }
        _ => {
            let mut g = vec![0.0; d * d];
            for r in 0..d {
                for c in 0..d {
                    g[r * d + c] = dot(&sigma[r * d..(r + 1) * d], &sigma[c * d..(c + 1) * d]);
                }
            }
            cholesky_det(&mut g, d).unwrap_or(0.0)
        }
    }
}

fn det_small(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => unreachable!(),
    }
}

/// In-place Cholesky of a symmetric matrix; returns the determinant
/// (product of squared pivots) or `None` if not positive definite.
fn cholesky_det(a: &mut [f64], d: usize) -> Option<f64> {
    let mut det = 1.0;
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= a[j * d + k] * a[j * d + k];
        }
        if s <= 0.0 {
            return None;
        }
        let l = s.sqrt();
        a[j * d + j] = l;
        det *= s;
        for i in (j + 1)..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / l;
        }
    }
    Some(det)
}

/// Quintic smoothstep on `[0, 1]`: 1 at 0, 0 at 1, C^2 at both ends.
pub fn smoothstep_down(u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

/// Volume of the Euclidean ball of radius `r` in dimension `d`:
/// `pi^{d/2} r^d / Gamma(d/2 + 1)`, with the Gamma factor expanded exactly
/// for integer and half-integer arguments.
pub fn ball_volume(r: f64, d: usize) -> f64 {
    use std::f64::consts::PI;
    let gamma = if d % 2 == 0 {
        // (d/2)!
        (1..=d / 2).map(|k| k as f64).product::<f64>()
    } else {
        // Gamma(d/2 + 1) = sqrt(pi) * d!! / 2^{(d+1)/2}
        let dfact: f64 = (1..=d).rev().step_by(2).map(|k| k as f64).product();
        PI.sqrt() * dfact / 2f64.powi((d as i32 + 1) / 2)
    };
    PI.powf(d as f64 / 2.0) * r.powi(d as i32) / gamma
}

pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}
