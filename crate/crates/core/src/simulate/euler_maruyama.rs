//! Drift-implicit Euler–Maruyama with common random numbers.
//!
//! Samples are processed in fixed blocks; within a block the state is a
//! `block × n` matrix whose columns hold one state component for all samples,
//! so every update is a contiguous axpy or a GEMM.

use crate::error::{Error, Result};
use crate::input::InputSignal;
use crate::linalg::Mat;
use crate::model::{GalerkinRom, StochasticLinearSystem};
use crate::parallel::{map_indexed, tree_reduce};

use super::rng::NoiseStream;
use super::{MeanErrorCurve, SimulationConfig};

pub(crate) const BLOCK: usize = 64;

/// Compressed sparse rows.
#[derive(Clone, Debug)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_dense(m: &Mat) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    cols.push(j);
                    vals.push(m[(i, j)]);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }
}

#[derive(Clone, Debug)]
enum Coupling {
    Zero,
    Sparse(Csr),
    /// Stored transposed for right multiplication of the sample-major state.
    Dense(Mat),
}

impl Coupling {
    fn new(m: &Mat) -> Self {
        let nnz = m.iter().filter(|&&v| v != 0.0).count();
        if nnz == 0 {
            Coupling::Zero
        } else if nnz * 8 <= m.nrows() * m.ncols() {
            Coupling::Sparse(Csr::from_dense(m))
        } else {
            Coupling::Dense(m.transpose())
        }
    }

    /// `out += (X Mᵀ) ∘ (dw ⊗ 1)`, i.e. each sample's `M x` scaled by its increment.
    fn apply_scaled(&self, x: &Mat, dw: &[f64], out: &mut Mat) {
        let b = x.nrows();
        match self {
            Coupling::Zero => {}
            Coupling::Sparse(csr) => {
                let xs = x.as_slice();
                let os = out.as_mut_slice();
                for i in 0..csr.row_ptr.len() - 1 {
                    let dst = &mut os[i * b..(i + 1) * b];
                    for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                        let (j, v) = (csr.cols[k], csr.vals[k]);
                        let src = &xs[j * b..(j + 1) * b];
                        for s in 0..b {
                            dst[s] += v * dw[s] * src[s];
                        }
                    }
                }
            }
            Coupling::Dense(mt) => {
                let y = x * mt;
                let ys = y.as_slice();
                let os = out.as_mut_slice();
                for (c, chunk) in os.chunks_mut(b).enumerate() {
                    let src = &ys[c * b..(c + 1) * b];
                    for s in 0..b {
                        chunk[s] += dw[s] * src[s];
                    }
                }
            }
        }
    }
}

/// Solver for `(I − hA) y = r`, applied to every sample of a block.
#[derive(Clone, Debug)]
enum StepSolver {
    /// In-place banded LU without pivoting (diagonally dominant matrices only).
    Banded {
        n: usize,
        lower: usize,
        upper: usize,
        lu: Mat,
    },
    /// Explicit inverse, stored transposed.
    Dense(Mat),
}

fn bandwidths(m: &Mat) -> (usize, usize) {
    let (mut lo, mut up) = (0, 0);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                if i > j {
                    lo = lo.max(i - j);
                } else {
                    up = up.max(j - i);
                }
            }
        }
    }
    (lo, up)
}

fn diagonally_dominant(m: &Mat) -> bool {
    (0..m.nrows()).all(|i| {
        let off: f64 = (0..m.ncols())
            .filter(|&j| j != i)
            .map(|j| m[(i, j)].abs())
            .sum();
        m[(i, i)].abs() > off
    })
}

impl StepSolver {
    fn new(a: &Mat, h: f64) -> Result<Self> {
        let n = a.nrows();
        let m = Mat::identity(n, n) - a * h;
        let (lower, upper) = bandwidths(&m);
        if n > 0 && 4 * (lower + upper + 1) <= n && diagonally_dominant(&m) {
            let mut lu = m;
            for k in 0..n {
                let piv = lu[(k, k)];
                for i in k + 1..(k + lower + 1).min(n) {
                    let l = lu[(i, k)] / piv;
                    lu[(i, k)] = l;
                    if l != 0.0 {
                        for j in k + 1..(k + upper + 1).min(n) {
                            let ukj = lu[(k, j)];
                            lu[(i, j)] -= l * ukj;
                        }
                    }
                }
            }
            return Ok(StepSolver::Banded {
                n,
                lower,
                upper,
                lu,
            });
        }
        let inv = m.try_inverse().ok_or(Error::StepSize { h })?;
        if !inv.iter().all(|v| v.is_finite()) {
            return Err(Error::StepSize { h });
        }
        Ok(StepSolver::Dense(inv.transpose()))
    }

    /// Solves in place on the sample-major block `x` (`block × n`).
    fn solve(&self, x: &mut Mat) {
        match self {
            StepSolver::Banded {
                n,
                lower,
                upper,
                lu,
            } => {
                let b = x.nrows();
                let xs = x.as_mut_slice();
                for k in 0..*n {
                    for i in k + 1..(k + lower + 1).min(*n) {
                        let l = lu[(i, k)];
                        if l != 0.0 {
                            let (head, tail) = xs.split_at_mut(i * b);
                            let src = &head[k * b..(k + 1) * b];
                            for (d, &s) in tail[..b].iter_mut().zip(src) {
                                *d -= l * s;
                            }
                        }
                    }
                }
                for k in (0..*n).rev() {
                    let (head, tail) = xs.split_at_mut((k + 1) * b);
                    let dst = &mut head[k * b..];
                    for j in k + 1..(k + upper + 1).min(*n) {
                        let u = lu[(k, j)];
                        if u != 0.0 {
                            let src = &tail[(j - k - 1) * b..(j - k) * b];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d -= u * s;
                            }
                        }
                    }
                    let inv = 1.0 / lu[(k, k)];
                    for d in dst.iter_mut() {
                        *d *= inv;
                    }
                }
            }
            StepSolver::Dense(inv_t) => {
                *x = &*x * inv_t;
            }
        }
    }
}

/// One discretized system: step solver, input map and noise couplings.
struct Stepper {
    solver: StepSolver,
    b: Mat,
    couplings: Vec<Coupling>,
}

impl Stepper {
    fn new(a: &Mat, n: &[Mat], b: &Mat, h: f64) -> Result<Self> {
        Ok(Self {
            solver: StepSolver::new(a, h)?,
            b: b.clone(),
            couplings: n.iter().map(Coupling::new).collect(),
        })
    }

    /// `x ← (I − hA)⁻¹ (x + h·B u + Σ Nᵢ x ΔWᵢ)`.
    fn step(&self, x: &mut Mat, bu: &[f64], dw: &[Vec<f64>], scratch: &mut Mat) {
        scratch.copy_from(x);
        let bsz = x.nrows();
        {
            let ss = scratch.as_mut_slice();
            for (c, &v) in bu.iter().enumerate() {
                if v != 0.0 {
                    for s in &mut ss[c * bsz..(c + 1) * bsz] {
                        *s += v;
                    }
                }
            }
        }
        for (cpl, w) in self.couplings.iter().zip(dw) {
            cpl.apply_scaled(x, w, scratch);
        }
        std::mem::swap(x, scratch);
        self.solver.solve(x);
    }

    fn forcing(&self, u: &[f64], h: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.b.nrows()];
        for (i, vi) in v.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &uj) in u.iter().enumerate() {
                acc += self.b[(i, j)] * uj;
            }
            *vi = h * acc;
        }
        v
    }
}

struct BlockSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

/// Mean over samples of `‖x(t_k) − V x̂(t_k)‖₂` for paired full/reduced paths.
pub fn euler_maruyama_paired(
    sys: &StochasticLinearSystem,
    rom: &GalerkinRom,
    u: &InputSignal,
    cfg: &SimulationConfig,
) -> Result<MeanErrorCurve> {
    let n = sys.dim();
    let r = rom.order();
    let q = sys.noise_channels();
    if rom.source_dim != n || rom.reduced_n.len() != q || rom.reduced_b.ncols() != sys.inputs() {
        return Err(Error::Dimension(
            "reduced model does not match the system".into(),
        ));
    }
    if u.dim() != sys.inputs() {
        return Err(Error::Dimension(format!(
            "input has {} channels, system has {}",
            u.dim(),
            sys.inputs()
        )));
    }
    let (steps, h) = cfg.grid()?;
    let samples = cfg.samples;
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "at least one sample is required".into(),
        ));
    }
    let full = Stepper::new(&sys.a, &sys.n, &sys.b, h)?;
    let red = Stepper::new(&rom.reduced_a, &rom.reduced_n, &rom.reduced_b, h)?;
    let vt = rom.v.transpose();
    let sqrt_h = h.sqrt();

    // Deterministic inputs are shared by all samples.
    let mut forcing_full = Vec::with_capacity(steps);
    let mut forcing_red = Vec::with_capacity(steps);
    let mut ubuf = vec![0.0; u.dim()];
    for k in 0..steps {
        let t = k as f64 * h;
        u.eval_into(t, &mut ubuf);
        if ubuf.iter().any(|v| !v.is_finite()) {
            return Err(Error::InputEvaluation { t });
        }
        forcing_full.push(full.forcing(&ubuf, h));
        forcing_red.push(red.forcing(&ubuf, h));
    }

    let blocks = samples.div_ceil(BLOCK);
    let run_block = |blk: usize| -> BlockSums {
        let first = blk * BLOCK;
        let bsz = BLOCK.min(samples - first);
        let mut streams: Vec<NoiseStream> = (0..bsz)
            .map(|s| NoiseStream::new(cfg.seed, (first + s) as u64))
            .collect();
        let mut x = Mat::zeros(bsz, n);
        let mut xh = Mat::zeros(bsz, r);
        let mut sx = Mat::zeros(bsz, n);
        let mut sxh = Mat::zeros(bsz, r);
        let mut dw = vec![vec![0.0; bsz]; q];
        let mut sq = vec![0.0; bsz];
        let mut sum = vec![0.0; steps + 1];
        let mut sum_sq = vec![0.0; steps + 1];
        for k in 0..steps {
            for (s, st) in streams.iter_mut().enumerate() {
                for w in dw.iter_mut() {
                    w[s] = sqrt_h * st.standard_normal();
                }
            }
            full.step(&mut x, &forcing_full[k], &dw, &mut sx);
            red.step(&mut xh, &forcing_red[k], &dw, &mut sxh);
            let lifted = &xh * &vt;
            sq.fill(0.0);
            for (col_x, col_l) in x.as_slice().chunks(bsz).zip(lifted.as_slice().chunks(bsz)) {
                for s in 0..bsz {
                    let d = col_x[s] - col_l[s];
                    sq[s] += d * d;
                }
            }
            for &v in &sq {
                let e = v.sqrt();
                sum[k + 1] += e;
                sum_sq[k + 1] += e * e;
            }
        }
        BlockSums { sum, sum_sq }
    };
    let partial = map_indexed(blocks, cfg.execution, run_block);
    let total = tree_reduce(partial, |mut a, b| {
        for (x, y) in a.sum.iter_mut().zip(&b.sum) {
            *x += y;
        }
        for (x, y) in a.sum_sq.iter_mut().zip(&b.sum_sq) {
            *x += y;
        }
        a
    })
    .expect("at least one block");

    let s = samples as f64;
    let mean: Vec<f64> = total.sum.iter().map(|v| v / s).collect();
    let stderr: Vec<f64> = total
        .sum_sq
        .iter()
        .zip(&mean)
        .map(|(&sq, &m)| {
            if samples < 2 {
                0.0
            } else {
                ((sq - s * m * m).max(0.0) / (s - 1.0) / s).sqrt()
            }
        })
        .collect();
    let time_grid = (0..=steps).map(|k| k as f64 * h).collect();
    Ok(MeanErrorCurve::new(time_grid, mean, stderr, h))
}
