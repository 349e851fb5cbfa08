//! Fourth-order quadrature and interpolation on uniform grids.

/// Integral of `f` over one cell `[x_k, x_k + h]` from the cubic through the
/// four nearest samples.
fn cell(f: &[f64], k: usize, h: f64) -> f64 {
    let n = f.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (f[0] + f[1]),
        3 => {
            // quadratic through all three samples
            if k == 0 {
                h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2])
            } else {
                h / 12.0 * (-f[0] + 8.0 * f[1] + 5.0 * f[2])
            }
        }
        _ if k == 0 => h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]),
        _ if k == n - 2 => h / 24.0 * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]),
        _ => h / 24.0 * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]),
    }
}

/// Running integral `F_k = int_0^{x_k} f`, with `F_0 = 0`.
pub fn cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    if !f.is_empty() {
        out.push(0.0);
    }
    for k in 0..f.len().saturating_sub(1) {
        acc += cell(f, k, h);
        out.push(acc);
    }
    out
}

/// Integral of the samples `f` spaced by `h`.
pub fn integral(f: &[f64], h: f64) -> f64 {
    (0..f.len().saturating_sub(1)).map(|k| cell(f, k, h)).sum()
}

/// Cubic Lagrange interpolation of uniformly spaced samples `f` on
/// `[0, (n-1) h]`, evaluated at `x` (clamped to the grid).
pub fn interp_cubic(f: &[f64], h: f64, x: f64) -> f64 {
    let n = f.len();
    match n {
        0 => return 0.0,
        1 => return f[0],
        _ => {}
    }
    let s = (x / h).clamp(0.0, (n - 1) as f64);
    if n < 4 {
        let k = (s.floor() as usize).min(n - 2);
        let u = s - k as f64;
        return f[k] * (1.0 - u) + f[k + 1] * u;
    }
    let k = (s.floor() as usize).clamp(1, n - 3) - 1;
    let u = s - k as f64;
    let (f0, f1, f2, f3) = (f[k], f[k + 1], f[k + 2], f[k + 3]);
    // nodes at u = 0, 1, 2, 3
    -f0 * (u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0 + f1 * u * (u - 2.0) * (u - 3.0) / 2.0
        - f2 * u * (u - 1.0) * (u - 3.0) / 2.0
        + f3 * u * (u - 1.0) * (u - 2.0) / 6.0
}

/// `int_0^T a(t) int_0^t b(t') dt' dt` through the running integral of `b`.
pub fn iterated_double(a: &[f64], b: &[f64], h: f64) -> f64 {
    let bc = cumulative(b, h);
    let ab: Vec<f64> = a.iter().zip(&bc).map(|(x, y)| x * y).collect();
    integral(&ab, h)
}

/// `int_0^T a(t) int_0^t b(t') int_0^t' c(t'') dt'' dt' dt`, reduced by
/// parts to single running integrals:
/// `A(T) int b w - int u b w` with `u, w` the running integrals of `a, c`.
pub fn iterated_triple(a: &[f64], b: &[f64], c: &[f64], h: f64) -> f64 {
    let u = cumulative(a, h);
    let w = cumulative(c, h);
    let bw: Vec<f64> = b.iter().zip(&w).map(|(x, y)| x * y).collect();
    let ubw: Vec<f64> = bw.iter().zip(&u).map(|(x, y)| x * y).collect();
    u.last().copied().unwrap_or(0.0) * integral(&bw, h) - integral(&ubw, h)
}
