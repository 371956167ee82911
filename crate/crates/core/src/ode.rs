//! Dormand–Prince 5(4) integrator with embedded error control.
//!
//! Integrates in either direction and stops exactly on every requested output
//! point, so callers get samples on their own grid without dense output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step allowed, relative to the integration span.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-8,
            atol: 1e-10,
            min_step: 1e-13,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `dy/dx = f(x, y)` from `x0` through every point of `outputs`
/// (monotone, all on the same side of `x0`), calling `sink` at each.
pub fn integrate<F, S>(
    mut f: F,
    x0: f64,
    y0: &[f64],
    outputs: &[f64],
    control: &StepControl,
    mut sink: S,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    S: FnMut(f64, &[f64]) -> Result<()>,
{
    let dim = y0.len();
    let mut stats = OdeStats::default();
    let Some(&x_last) = outputs.last() else {
        return Ok(stats);
    };
    let dir = if x_last >= x0 { 1.0 } else { -1.0 };
    let span = (x_last - x0).abs().max(f64::MIN_POSITIVE);
    let min_step = control.min_step * span;

    let mut x = x0;
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut tmp = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    f(x, &y, &mut k[0])?;
    stats.evaluations += 1;

    let mut h = initial_step(&y, &k[0], control, span);

    for &target in outputs {
        if (target - x) * dir < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "output points must be monotone in the integration direction (got {target} after {x})"
            )));
        }
        while (target - x) * dir > 0.0 {
            if stats.accepted + stats.rejected >= control.max_steps {
                return Err(Error::IntegrationFailure(format!(
                    "step budget of {} exhausted at x = {x}",
                    control.max_steps
                )));
            }
            let remaining = (target - x).abs();
            let mut last = false;
            let mut step = h.min(remaining);
            if remaining - step <= 1e-12 * span {
                step = remaining;
                last = true;
            }
            let hs = dir * step;

            let stage = |tmp: &mut Vec<f64>, y: &[f64], k: &[Vec<f64>; 7], coef: &[f64]| {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (c, ki) in coef.iter().zip(k.iter()) {
                        acc += c * ki[i];
                    }
                    tmp[i] = y[i] + hs * acc;
                }
            };

            stage(&mut tmp, &y, &k, &[A21]);
            f(x + C2 * hs, &tmp, &mut k[1])?;
            stage(&mut tmp, &y, &k, &[A31, A32]);
            f(x + C3 * hs, &tmp, &mut k[2])?;
            stage(&mut tmp, &y, &k, &[A41, A42, A43]);
            f(x + C4 * hs, &tmp, &mut k[3])?;
            stage(&mut tmp, &y, &k, &[A51, A52, A53, A54]);
            f(x + C5 * hs, &tmp, &mut k[4])?;
            stage(&mut tmp, &y, &k, &[A61, A62, A63, A64, A65]);
            f(x + hs, &tmp, &mut k[5])?;
            stage(&mut y_new, &y, &k, &[B1, 0.0, B3, B4, B5, B6]);
            f(x + hs, &y_new, &mut k[6])?;
            stats.evaluations += 6;

            let mut err = 0.0;
            for i in 0..dim {
                let e = hs * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let sc = control.atol + control.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / dim.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::IntegrationFailure(format!(
                    "non-finite error estimate at x = {x}"
                )));
            }

            if err <= 1.0 {
                stats.accepted += 1;
                x = if last { target } else { x + hs };
                std::mem::swap(&mut y, &mut y_new);
                let (first, rest) = k.split_at_mut(1);
                std::mem::swap(&mut first[0], &mut rest[5]);
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // keep the natural step when the output point truncated it
                h = if last { h.max(step * grow) } else { step * grow };
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < min_step {
                    return Err(Error::IntegrationFailure(format!(
                        "step size underflow at x = {x} (h = {h:e})"
                    )));
                }
            }
        }
        sink(x, &y)?;
    }
    Ok(stats)
}

fn initial_step(y: &[f64], dy: &[f64], control: &StepControl, span: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, di) in y.iter().zip(dy) {
        let sc = control.atol + control.rtol * yi.abs();
        d0 += (yi / sc).powi(2);
        d1 += (di / sc).powi(2);
    }
    let n = y.len().max(1) as f64;
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    };
    h.min(span).max(1e-10 * span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let outputs: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5).collect();
        let mut got = Vec::new();
        integrate(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &outputs,
            &StepControl::default(),
            |x, y| {
                got.push((x, y[0]));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(got.len(), 10);
        for (x, y) in got {
            assert!((y - (-x).exp()).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn backwards_harmonic_oscillator() {
        // y = (cos x, -sin x) integrated from x = 1 down to 0
        let y0 = [1f64.cos(), -1f64.sin()];
        let mut end = [0.0; 2];
        integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            1.0,
            &y0,
            &[0.5, 0.0],
            &StepControl {
                rtol: 1e-12,
                atol: 1e-14,
                ..StepControl::default()
            },
            |_, y| {
                end.copy_from_slice(y);
                Ok(())
            },
        )
        .unwrap();
        assert!((end[0] - 1.0).abs() < 1e-9);
        assert!(end[1].abs() < 1e-9);
    }

    #[test]
    fn output_at_start_point_is_initial_value() {
        let mut seen = None;
        integrate(
            |_, _, dy| {
                dy[0] = 1.0;
                Ok(())
            },
            1.0,
            &[3.0],
            &[1.0, 0.0],
            &StepControl::default(),
            |x, y| {
                if seen.is_none() {
                    seen = Some((x, y[0]));
                }
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, Some((1.0, 3.0)));
    }

    #[test]
    fn blowup_reports_underflow() {
        // y' = y², y(0) = 1 blows up at x = 1
        let r = integrate(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &[2.0],
            &StepControl::default(),
            |_, _| Ok(()),
        );
        assert!(matches!(r, Err(Error::IntegrationFailure(_))));
    }
}
