//! Dormand–Prince 5(4) with dense output.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct DopriOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for DopriOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-9,
            max_steps: 2_000_000,
        }
    }
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy_into(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..out.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Integrates `y' = f(t, y)` from `t0` and returns the dense-output values at
/// the increasing times `grid` (all within `[t0, t1]`).
pub fn integrate_dense<F>(
    mut f: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    grid: &[f64],
    opts: &DopriOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let d = y0.len();
    let mut out = Vec::with_capacity(grid.len());
    let mut gi = 0;
    while gi < grid.len() && grid[gi] <= t0 {
        out.push(y0.to_vec());
        gi += 1;
    }
    if t1 <= t0 {
        while gi < grid.len() {
            out.push(y0.to_vec());
            gi += 1;
        }
        return Ok(out);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
    );
    let mut ytmp = vec![0.0; d];
    let mut ynew = vec![0.0; d];
    f(t, &y, &mut k1);

    // Initial step from the scaled derivative norms.
    let sc = |yi: f64| opts.atol + opts.rtol * yi.abs();
    let d0 = (y.iter().map(|&v| (v / sc(v)).powi(2)).sum::<f64>() / d.max(1) as f64).sqrt();
    let d1 = (k1
        .iter()
        .zip(&y)
        .map(|(&k, &v)| (k / sc(v)).powi(2))
        .sum::<f64>()
        / d.max(1) as f64)
        .sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(t1 - t0);

    let mut steps = 0;
    let mut rcont = vec![vec![0.0; d]; 5];
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::Stiffness { t, h });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness { t, h });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        axpy_into(&mut ytmp, &y, h, &[(A21, &k1)]);
        f(t + C2 * h, &ytmp, &mut k2);
        axpy_into(&mut ytmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * h, &ytmp, &mut k3);
        axpy_into(&mut ytmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * h, &ytmp, &mut k4);
        axpy_into(
            &mut ytmp,
            &y,
            h,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
        );
        f(t + C5 * h, &ytmp, &mut k5);
        axpy_into(
            &mut ytmp,
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        f(t + h, &ytmp, &mut k6);
        axpy_into(
            &mut ynew,
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        f(t + h, &ynew, &mut k7);
        steps += 1;

        let mut err = 0.0;
        for i in 0..d {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let s = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / s).powi(2);
        }
        let err = (err / d.max(1) as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            if gi < grid.len() && grid[gi] <= t_new {
                for i in 0..d {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = y[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                while gi < grid.len() && grid[gi] <= t_new {
                    let th = ((grid[gi] - t) / h).clamp(0.0, 1.0);
                    let th1 = 1.0 - th;
                    out.push(
                        (0..d)
                            .map(|i| {
                                rcont[0][i]
                                    + th * (rcont[1][i]
                                        + th1
                                            * (rcont[2][i]
                                                + th * (rcont[3][i] + th1 * rcont[4][i])))
                            })
                            .collect(),
                    );
                    gi += 1;
                }
            }
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    while gi < grid.len() {
        out.push(y.clone());
        gi += 1;
    }
    Ok(out)
}
