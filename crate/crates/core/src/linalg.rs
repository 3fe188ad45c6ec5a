//! Small dense helpers on `f64` slices and 3x3 row-major matrices.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
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

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub type Mat3 = [f64; 9];

pub const IDENTITY3: Mat3 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

pub fn mat3(s: &[f64]) -> Mat3 {
    let mut m = [0.0; 9];
    m.copy_from_slice(&s[..9]);
    m
}

pub fn mul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            c[3 * i + j] = (0..3).map(|k| a[3 * i + k] * b[3 * k + j]).sum();
        }
    }
    c
}

/// `aᵀ b`
pub fn tmul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            c[3 * i + j] = (0..3).map(|k| a[3 * k + i] * b[3 * k + j]).sum();
        }
    }
    c
}

pub fn transpose3(a: &Mat3) -> Mat3 {
    [a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]]
}

pub fn det3(a: &Mat3) -> f64 {
    a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
        + a[2] * (a[3] * a[7] - a[4] * a[6])
}

/// Inverse-transpose `a⁻ᵀ = cof(a) / det(a)`; `None` for singular input.
pub fn inv_transpose3(a: &Mat3) -> Option<Mat3> {
    let det = det3(a);
    let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if !det.is_finite() || det.abs() <= 1e-300_f64.max(1e-14 * scale * scale * scale) {
        return None;
    }
    let cof = [
        a[4] * a[8] - a[5] * a[7],
        a[5] * a[6] - a[3] * a[8],
        a[3] * a[7] - a[4] * a[6],
        a[2] * a[7] - a[1] * a[8],
        a[0] * a[8] - a[2] * a[6],
        a[1] * a[6] - a[0] * a[7],
        a[1] * a[5] - a[2] * a[4],
        a[2] * a[3] - a[0] * a[5],
        a[0] * a[4] - a[1] * a[3],
    ];
    Some(cof.map(|c| c / det))
}

/// Skew-symmetric part `½(a − aᵀ)`.
pub fn skew3(a: &Mat3) -> Mat3 {
    let mut s = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            s[3 * i + j] = 0.5 * (a[3 * i + j] - a[3 * j + i]);
        }
    }
    s
}

/// Axial vector of a skew-symmetric matrix.
pub fn vee3(a: &Mat3) -> [f64; 3] {
    [
        0.5 * (a[7] - a[5]),
        0.5 * (a[2] - a[6]),
        0.5 * (a[3] - a[1]),
    ]
}

pub fn hat3(w: [f64; 3]) -> Mat3 {
    [0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0]
}

/// Solves the dense square system `a x = b` (row-major `a`, size n) by
/// Gaussian elimination with partial pivoting. Returns `None` if singular.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[pivot * n + col].abs() <= 1e-12 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            x.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    m[row * n + k] -= f * m[col * n + k];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row * n + k] * x[k]).sum();
        x[row] = (x[row] - s) / m[row * n + row];
    }
    Some(x)
}
