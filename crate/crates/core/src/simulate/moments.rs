//! Deterministic second-moment dynamics of the fundamental solution.
//!
//! `X(t) = E[Φ(t) X₀ Φ̂(t)ᵀ]` satisfies `Ẋ = AX + XÂᵀ + Σ NᵢXN̂ᵢᵀ`, so the
//! mixed Gramian `P₂` is its integral over `[0, ∞)`.

use crate::error::{Error, Result};
use crate::linalg::{is_finite, Mat};
use crate::parallel::{map_indexed, tree_reduce, Execution};

use super::rng::NoiseStream;

pub const DEFAULT_RK_STEPS: usize = 2048;

#[derive(Clone, Debug)]
pub struct MomentSolution {
    /// `X` at the final time.
    pub x: Mat,
    /// `∫ X dt` over the integration interval.
    pub integral: Mat,
}

fn rhs(a: &Mat, n: &[Mat], ahat: &Mat, nhat: &[Mat], x: &Mat) -> Mat {
    let mut out = a * x + x * ahat.transpose();
    for (ni, mi) in n.iter().zip(nhat) {
        out += ni * x * mi.transpose();
    }
    out
}

/// Classical RK4 over `[t0, t1]` with the running integral carried as an
/// extra state component.
#[allow(clippy::too_many_arguments)]
pub fn moment_ode(
    a: &Mat,
    n: &[Mat],
    ahat: &Mat,
    nhat: &[Mat],
    x0: &Mat,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<MomentSolution> {
    if x0.shape() != (a.nrows(), ahat.nrows()) {
        return Err(Error::Dimension(
            "initial moment has the wrong shape".into(),
        ));
    }
    let mut x = x0.clone();
    let mut integral = Mat::zeros(x0.nrows(), x0.ncols());
    if t1 <= t0 || steps == 0 {
        return Ok(MomentSolution { x, integral });
    }
    let h = (t1 - t0) / steps as f64;
    for _ in 0..steps {
        let k1 = rhs(a, n, ahat, nhat, &x);
        let x2 = &x + &k1 * (0.5 * h);
        let k2 = rhs(a, n, ahat, nhat, &x2);
        let x3 = &x + &k2 * (0.5 * h);
        let k3 = rhs(a, n, ahat, nhat, &x3);
        let x4 = &x + &k3 * h;
        let k4 = rhs(a, n, ahat, nhat, &x4);
        integral += (&x + &x2 * 2.0 + &x3 * 2.0 + &x4) * (h / 6.0);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !is_finite(&x) {
            return Err(Error::NoConvergence {
                what: "moment ODE (overflow)",
                iterations: steps,
            });
        }
    }
    Ok(MomentSolution { x, integral })
}

/// `X(T)` and `∫₀ᵀ X dt` for `X(0) = B B̂ᵀ` at the default RK4 resolution.
pub fn mixed_gramian_ode_oracle(
    a: &Mat,
    n: &[Mat],
    b: &Mat,
    ahat: &Mat,
    nhat: &[Mat],
    bhat: &Mat,
    horizon: f64,
) -> Result<MomentSolution> {
    moment_ode(
        a,
        n,
        ahat,
        nhat,
        &(b * bhat.transpose()),
        0.0,
        horizon,
        DEFAULT_RK_STEPS,
    )
}

/// Monte Carlo estimate of `E[Φ(t) B Bᵀ Φ(t)ᵀ]` at the given times, with
/// entrywise standard errors, using the drift-implicit Euler–Maruyama scheme.
#[allow(clippy::too_many_arguments)]
pub fn second_moment_monte_carlo(
    a: &Mat,
    n: &[Mat],
    b: &Mat,
    times: &[f64],
    h: f64,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<(Mat, Mat)>> {
    let dim = a.nrows();
    let step_inv = (Mat::identity(dim, dim) - a * h)
        .try_inverse()
        .ok_or(Error::StepSize { h })?;
    let marks: Vec<usize> = times.iter().map(|t| (t / h).round() as usize).collect();
    let last = marks.iter().copied().max().unwrap_or(0);
    let sqrt_h = h.sqrt();
    let per_sample = |s: usize| -> Vec<(Mat, Mat)> {
        let mut rng = NoiseStream::new(seed, s as u64);
        let mut x = b.clone();
        let mut snaps = vec![Mat::zeros(0, 0); marks.len()];
        for k in 0..=last {
            for (slot, &m) in marks.iter().enumerate() {
                if m == k {
                    snaps[slot] = &x * x.transpose();
                }
            }
            if k == last {
                break;
            }
            let mut r = x.clone();
            for ni in n {
                r += ni * &x * (sqrt_h * rng.standard_normal());
            }
            x = &step_inv * r;
        }
        snaps
            .into_iter()
            .map(|m| (m.component_mul(&m), m))
            .collect()
    };
    let all = map_indexed(samples, exec, per_sample);
    let total = tree_reduce(all, |mut acc, other| {
        for ((sq, m), (sq2, m2)) in acc.iter_mut().zip(other) {
            *sq += sq2;
            *m += m2;
        }
        acc
    })
    .ok_or_else(|| Error::InvalidArgument("at least one sample is required".into()))?;
    let s = samples as f64;
    Ok(total
        .into_iter()
        .map(|(sq, sum)| {
            let mean = sum / s;
            let var =
                (sq / s - mean.component_mul(&mean)).map(|v| v.max(0.0)) * (s / (s - 1.0).max(1.0));
            let se = var.map(|v| (v / s).sqrt());
            (mean, se)
        })
        .collect())
}
