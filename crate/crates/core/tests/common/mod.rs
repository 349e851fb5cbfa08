#![allow(dead_code)]

use stirep_core::solver::{Seed, SolverOptions, BUILTIN_SEEDS};
use stirep_core::ExtremalSolution;

pub fn solved(name: &str) -> ExtremalSolution {
    Seed::by_name(name).unwrap().solve(&SolverOptions::default()).unwrap()
}

pub fn all_solved() -> Vec<ExtremalSolution> {
    BUILTIN_SEEDS.iter().map(|s| s.solve(&SolverOptions::default()).unwrap()).collect()
}

/// Composite Simpson rule on an arbitrary increasing grid, pairing
/// consecutive intervals (trapezoid on a leftover one).
pub fn simpson_nonuniform(x: &[f64], f: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut i = 0;
    while i + 2 < x.len() {
        let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
        let w = (h0 + h1) / 6.0;
        s += w * ((2.0 - h1 / h0) * f[i] + (h0 + h1).powi(2) / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < x.len() {
        s += 0.5 * (x[i + 1] - x[i]) * (f[i] + f[i + 1]);
    }
    s
}

/// `int_0^{x_k} f` on a uniform grid, each prefix evaluated on its own:
/// Simpson for even `k`, Simpson plus the 3/8 rule for odd `k >= 3`, and
/// the quadratic through the first three samples for `k = 1`.
pub fn prefix_integral(f: &[f64], k: usize, h: f64) -> f64 {
    let simpson = |m: usize| (0..m / 2).map(|j| h / 3.0 * (f[2 * j] + 4.0 * f[2 * j + 1] + f[2 * j + 2])).sum::<f64>();
    match k {
        0 => 0.0,
        1 => h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]),
        _ if k.is_multiple_of(2) => simpson(k),
        _ => simpson(k - 3) + 3.0 * h / 8.0 * (f[k - 3] + 3.0 * f[k - 2] + 3.0 * f[k - 1] + f[k]),
    }
}

/// Brute-force `int a(t) int_0^t b`: one independent prefix integral per
/// sample, O(N^2).
pub fn brute_double(a: &[f64], b: &[f64], h: f64) -> f64 {
    let outer: Vec<f64> = (0..a.len()).map(|k| a[k] * prefix_integral(b, k, h)).collect();
    prefix_integral(&outer, outer.len() - 1, h)
}

/// Brute-force `int a(t) int_0^t b(t') int_0^t' c`.
pub fn brute_triple(a: &[f64], b: &[f64], c: &[f64], h: f64) -> f64 {
    let bw: Vec<f64> = (0..b.len()).map(|k| b[k] * prefix_integral(c, k, h)).collect();
    let outer: Vec<f64> = (0..a.len()).map(|k| a[k] * prefix_integral(&bw, k, h)).collect();
    prefix_integral(&outer, outer.len() - 1, h)
}
