//! Small dense complex-vector helpers shared across modules.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    norm_sqr(x).sqrt()
}

/// `<a, b> = sum conj(a_i) b_i`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(x: &[C64], s: C64) -> Vec<C64> {
    x.iter().map(|v| v * s).collect()
}

pub fn unit(n: usize, i: usize) -> Vec<C64> {
    let mut e = vec![ZERO; n];
    e[i] = ONE;
    e
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_difference(a: &[C64], b: &[C64]) -> f64 {
    let denom = norm(a).max(norm(b));
    if denom == 0.0 {
        0.0
    } else {
        norm(&sub(a, b)) / denom
    }
}

pub fn all_finite(x: &[C64]) -> bool {
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}
