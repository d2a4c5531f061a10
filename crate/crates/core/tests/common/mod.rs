//! Closed-form and quadrature oracles for scalar plants, written without the
//! library's integrator.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `∫₀ˣ e^{−c|τ|} dτ`
pub fn int_exp_abs(c: f64, x: f64) -> f64 {
    x.signum() * (1.0 - (-c * x.abs()).exp()) / c
}

/// Composite Simpson on `[a, b]` with `2k` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

/// Scalar plant given by a primitive `g` of `a(t)`: `Φ(t, s) = e^{g(t) − g(s)}`.
pub struct Scalar<G: Fn(f64) -> f64> {
    pub g: G,
}

impl<G: Fn(f64) -> f64> Scalar<G> {
    pub fn phi(&self, t: f64, s: f64) -> f64 {
        ((self.g)(t) - (self.g)(s)).exp()
    }

    /// `M(a, b) = ∫ₐᵇ Φ(s, a)² c² ds` for constant `c`.
    pub fn m(&self, a: f64, b: f64, c: f64) -> f64 {
        c * c * simpson(|s| self.phi(s, a).powi(2), a, b, 4000)
    }
}

pub fn s1_primitive(t: f64) -> f64 {
    t * t.cos() - t.sin()
}

/// `‖Φ(2nπ, 2nπ − π/2)‖` for `a(t) = −t sin t`.
pub fn s1_witness(n: u32) -> f64 {
    let t = 2.0 * n as f64 * PI;
    (s1_primitive(t) - s1_primitive(t - PI / 2.0)).exp()
}

pub fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}
