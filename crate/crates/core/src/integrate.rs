//! Adaptive Dormand–Prince 5(4) integration with FSAL and exact output stops.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rtol: 1e-9, atol: 1e-12, max_step: None, max_steps: 2_000_000 }
    }
}

/// State at one output time. The true state is `y` with its first `linear`
/// entries multiplied by `2^log2_scale` and the remaining ones by `4^log2_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub y: Vec<f64>,
    pub log2_scale: i32,
}

impl Sample {
    pub fn unscaled(&self, linear: usize) -> Vec<f64> {
        let s1 = 2f64.powi(self.log2_scale);
        let s2 = s1 * s1;
        self.y.iter().enumerate().map(|(i, v)| v * if i < linear { s1 } else { s2 }).collect()
    }
}

/// How the integrator may renormalize the state.
///
/// `Rescale::Homogeneous(k)` declares the right-hand side to be linear in the
/// first `k` entries and quadratic in them for the rest (e.g. a transition
/// matrix augmented with a Gramian accumulator). The integrator then keeps the
/// first block of order one by exact power-of-two scaling, so the absolute
/// tolerance acts relative to the solution's size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rescale {
    Off,
    Homogeneous(usize),
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

fn weighted_rms(err: &[f64], y0: &[f64], y1: &[f64], ctl: &StepControl) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = ctl.atol + ctl.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

/// Integrates `y' = f(t, y)` forward from `t0`, returning the state at every
/// time in `outputs` (ascending, all `>= t0`). Steps are truncated to land on
/// each output exactly.
pub fn dopri5<F>(mut f: F, t0: f64, y0: &[f64], outputs: &[f64], ctl: &StepControl, rescale: Rescale) -> Result<Vec<Sample>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(ctl.rtol > 0.0 && ctl.atol > 0.0) {
        return Err(Error::invalid("integrator tolerances must be positive"));
    }
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::invalid("output times must be ascending and not before the start"));
    }
    let dim = y0.len();
    let t_end = outputs.last().copied().unwrap_or(t0);
    let mut out = Vec::with_capacity(outputs.len());
    let mut y = y0.to_vec();
    let mut scale = 0i32;
    let mut t = t0;
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] == t0 {
        out.push(Sample { t: t0, y: y.clone(), log2_scale: 0 });
        next_out += 1;
    }
    if next_out == outputs.len() {
        return Ok(out);
    }

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut ys = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    f(t, &y, &mut k1)?;
    let mut h = initial_step(&mut f, t, &y, &k1, t_end - t0, ctl)?;
    let mut steps = 0usize;
    let mut rejected_last = false;

    while next_out < outputs.len() {
        let target = outputs[next_out];
        if steps >= ctl.max_steps {
            return Err(Error::TooManySteps { steps, t, from: t0, to: t_end });
        }
        let h_free = h;
        let mut hit = false;
        if t + h >= target || (target - t - h) <= 1e-12 * h {
            h = target - t;
            hit = true;
        }
        if h <= 8.0 * f64::EPSILON * t.abs().max(1.0) && !hit {
            return Err(Error::StepUnderflow { t, h, from: t0, to: t_end });
        }

        for i in 0..dim {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &ys, &mut k2)?;
        for i in 0..dim {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &ys, &mut k3)?;
        for i in 0..dim {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &ys, &mut k4)?;
        for i in 0..dim {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &ys, &mut k5)?;
        for i in 0..dim {
            ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_next = if hit { target } else { t + h };
        f(t_next, &ys, &mut k6)?;
        for i in 0..dim {
            y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f(t_next, &y_new, &mut k7)?;
        for i in 0..dim {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err_norm = weighted_rms(&err, &y, &y_new, ctl);
        steps += 1;
        if !err_norm.is_finite() {
            h *= MIN_FACTOR;
            rejected_last = true;
            continue;
        }

        let factor = if err_norm == 0.0 { MAX_FACTOR } else { (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
        if err_norm <= 1.0 {
            t = t_next;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            if let Rescale::Homogeneous(linear) = rescale {
                scale += renormalize(&mut y, &mut k1, linear);
            }
            if hit {
                while next_out < outputs.len() && outputs[next_out] == t {
                    out.push(Sample { t, y: y.clone(), log2_scale: scale });
                    next_out += 1;
                }
            }
            let grow = if rejected_last { factor.min(1.0) } else { factor };
            // a truncated landing step says little about the natural step size
            h = if hit { h_free * grow.min(1.0) } else { h * grow };
            rejected_last = false;
        } else {
            h *= factor.min(1.0);
            rejected_last = true;
        }
        if let Some(max) = ctl.max_step {
            h = h.min(max);
        }
    }
    Ok(out)
}

fn renormalize(y: &mut [f64], k: &mut [f64], linear: usize) -> i32 {
    let m = y[..linear].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 || (m > 1.0 / 256.0 && m < 256.0) {
        return 0;
    }
    let e = m.log2().round() as i32;
    let s1 = 2f64.powi(-e);
    let s2 = s1 * s1;
    for (i, (yi, ki)) in y.iter_mut().zip(k.iter_mut()).enumerate() {
        let s = if i < linear { s1 } else { s2 };
        *yi *= s;
        *ki *= s;
    }
    e
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], span: f64, ctl: &StepControl) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let norm = |v: &[f64]| {
        let s: f64 = v.iter().zip(y).map(|(a, b)| (a / (ctl.atol + ctl.rtol * b.abs())).powi(2)).sum();
        (s / v.len() as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    if let Some(max) = ctl.max_step {
        h0 = h0.min(max);
    }
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    let mut h = (100.0 * h0).min(h1);
    if let Some(max) = ctl.max_step {
        h = h.min(max);
    }
    Ok(h.max(1e-12 * span.max(1.0)))
}
