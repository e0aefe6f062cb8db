/// Linear-multistep form of one skip on a uniform grid of step `h`:
/// `x_{k+m+1} = x_k + h [(2m + 1) v_k - m v_{k-1}]`.
pub fn lms_jump(x_k: &[f64], v_k: &[f64], v_km1: &[f64], h: f64, m: usize) -> Vec<f64> {
    let m = m as f64;
    let a = 2.0 * m + 1.0;
    x_k.iter().zip(v_k).zip(v_km1).map(|((x, vk), vp)| x + h * (a * vk - m * vp)).collect()
}

/// Leading local-truncation-error multiplier of `x''(t_k)` for a skip of
/// length `m`: `(m² + 1) / (2 (m + 1)) h²`.
pub fn local_truncation_error_coeff(m: usize, h: f64) -> f64 {
    let m = m as f64;
    (m * m + 1.0) / (2.0 * (m + 1.0)) * h * h
}
