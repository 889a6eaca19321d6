//! 2-D periodic spatial discretization: grid geometry, the matrix-free
//! 5-point Laplacian, the shifted solve `(c I - eps^2 D_h) u = b` and the
//! discrete Ginzburg-Landau energy.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform periodic grid on `(a,b) x (c,d)` with `m1 x m2` cells.
#[derive(Debug, Clone, Copy)]
pub struct Grid2D {
    pub m1: usize,
    pub m2: usize,
    pub xa: f64,
    pub xb: f64,
    pub ya: f64,
    pub yb: f64,
}

impl Grid2D {
    pub fn new(m1: usize, m2: usize, xa: f64, xb: f64, ya: f64, yb: f64) -> Result<Grid2D> {
        if m1 < 2 || m2 < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs M1, M2 >= 2, got {m1} x {m2}"
            )));
        }
        if !(xb > xa && yb > ya) {
            return Err(Error::InvalidParameter("empty spatial domain".into()));
        }
        Ok(Grid2D {
            m1,
            m2,
            xa,
            xb,
            ya,
            yb,
        })
    }

    pub fn square(m: usize, lo: f64, hi: f64) -> Result<Grid2D> {
        Grid2D::new(m, m, lo, hi, lo, hi)
    }

    pub fn h1(&self) -> f64 {
        (self.xb - self.xa) / self.m1 as f64
    }

    pub fn h2(&self) -> f64 {
        (self.yb - self.ya) / self.m2 as f64
    }

    pub fn n_points(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn x(&self, i: usize) -> f64 {
        self.xa + i as f64 * self.h1()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.ya + j as f64 * self.h2()
    }
}

/// Grid function on the periodic points, row-major with j outer and i inner.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Grid2D,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid2D) -> Field {
        Field {
            grid,
            values: vec![0.0; grid.n_points()],
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut values = Vec::with_capacity(grid.n_points());
        for j in 0..grid.m2 {
            for i in 0..grid.m1 {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Field { grid, values }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidParameter(format!(
                "field length {} does not match grid {} x {}",
                values.len(),
                grid.m1,
                grid.m2
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.m1 + i]
    }
}

/// Maximum norm over the grid points.
pub fn inf_norm(f: &Field) -> f64 {
    f.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

pub fn inf_norm_slice(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// 5-point periodic stencil of the Laplacian, matrix-free.
pub fn laplacian_apply(f: &Field) -> Field {
    let mut out = Field::zeros(f.grid);
    laplacian_into(f.grid, f.values(), out.values_mut());
    out
}

pub fn laplacian_into(grid: Grid2D, f: &[f64], out: &mut [f64]) {
    let (m1, m2) = (grid.m1, grid.m2);
    let inv_h1sq = 1.0 / (grid.h1() * grid.h1());
    let inv_h2sq = 1.0 / (grid.h2() * grid.h2());
    for j in 0..m2 {
        let jm = if j == 0 { m2 - 1 } else { j - 1 };
        let jp = if j == m2 - 1 { 0 } else { j + 1 };
        for i in 0..m1 {
            let im = if i == 0 { m1 - 1 } else { i - 1 };
            let ip = if i == m1 - 1 { 0 } else { i + 1 };
            let c = f[j * m1 + i];
            out[j * m1 + i] = (f[j * m1 + im] - 2.0 * c + f[j * m1 + ip]) * inv_h1sq
                + (f[jm * m1 + i] - 2.0 * c + f[jp * m1 + i]) * inv_h2sq;
        }
    }
}

/// `(c I - eps^2 D_h) f`, the operator of both schemes' linear solves.
pub fn shifted_apply(grid: Grid2D, c: f64, eps2: f64, f: &[f64], out: &mut [f64]) {
    laplacian_into(grid, f, out);
    for (o, &v) in out.iter_mut().zip(f) {
        *o = c * v - eps2 * *o;
    }
}

/// Discrete energy `sum h1 h2 [ eps^2/2 |D+ f|^2 + (1-f^2)^2/4 ]` with periodic
/// forward differences.
pub fn discrete_energy(f: &Field, eps2: f64) -> f64 {
    let g = f.grid;
    let (m1, m2) = (g.m1, g.m2);
    let inv_h1 = 1.0 / g.h1();
    let inv_h2 = 1.0 / g.h2();
    let mut acc = 0.0;
    for j in 0..m2 {
        let jp = if j == m2 - 1 { 0 } else { j + 1 };
        for i in 0..m1 {
            let ip = if i == m1 - 1 { 0 } else { i + 1 };
            let v = f.values[j * m1 + i];
            let dx = (f.values[j * m1 + ip] - v) * inv_h1;
            let dy = (f.values[jp * m1 + i] - v) * inv_h2;
            let w = 1.0 - v * v;
            acc += eps2 / 2.0 * (dx * dx + dy * dy) + 0.25 * w * w;
        }
    }
    acc * g.h1() * g.h2()
}

/// How the shifted operator is inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Exact diagonalization of the circulant operator by 2-D DFT.
    Fourier,
    /// Matrix-free conjugate gradient with the same residual contract.
    ConjugateGradient,
}

/// Solver for `(c I - eps^2 D_h) u = b`; owns FFT plans and scratch buffers,
/// reusable across time levels with varying shift `c`.
pub struct HelmholtzSolver {
    grid: Grid2D,
    method: SolveMethod,
    solver_tol: f64,
    /// negated Laplacian symbol per mode, >= 0
    symbol: Vec<f64>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    buf_t: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl HelmholtzSolver {
    pub fn new(grid: Grid2D, method: SolveMethod, solver_tol: f64) -> HelmholtzSolver {
        let (m1, m2) = (grid.m1, grid.m2);
        let mut symbol = vec![0.0; m1 * m2];
        let f1 = 4.0 / (grid.h1() * grid.h1());
        let f2 = 4.0 / (grid.h2() * grid.h2());
        for j in 0..m2 {
            let sy = (std::f64::consts::PI * j as f64 / m2 as f64).sin();
            for i in 0..m1 {
                let sx = (std::f64::consts::PI * i as f64 / m1 as f64).sin();
                symbol[j * m1 + i] = f1 * sx * sx + f2 * sy * sy;
            }
        }
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(m1);
        let inv_x = planner.plan_fft_inverse(m1);
        let fwd_y = planner.plan_fft_forward(m2);
        let inv_y = planner.plan_fft_inverse(m2);
        let scratch_len = fwd_x
            .get_inplace_scratch_len()
            .max(inv_x.get_inplace_scratch_len())
            .max(fwd_y.get_inplace_scratch_len())
            .max(inv_y.get_inplace_scratch_len());
        HelmholtzSolver {
            grid,
            method,
            solver_tol,
            symbol,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            buf: vec![Complex::new(0.0, 0.0); m1 * m2],
            buf_t: vec![Complex::new(0.0, 0.0); m1 * m2],
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    /// Discrete symbol of `-D_h` at mode `(i, j)`.
    pub fn neg_symbol(&self, i: usize, j: usize) -> f64 {
        self.symbol[j * self.grid.m1 + i]
    }

    pub fn solve(&mut self, c: f64, eps2: f64, b: &Field) -> Result<Field> {
        let mut out = Field::zeros(self.grid);
        self.solve_into(c, eps2, b.values(), out.values_mut())?;
        Ok(out)
    }

    pub fn solve_into(&mut self, c: f64, eps2: f64, b: &[f64], out: &mut [f64]) -> Result<()> {
        if !(c > 0.0) {
            return Err(Error::NonPositiveShift(c));
        }
        match self.method {
            SolveMethod::Fourier => {
                self.solve_fourier(c, eps2, b, out);
                Ok(())
            }
            SolveMethod::ConjugateGradient => self.solve_cg(c, eps2, b, out),
        }
    }

    fn solve_fourier(&mut self, c: f64, eps2: f64, b: &[f64], out: &mut [f64]) {
        let (m1, m2) = (self.grid.m1, self.grid.m2);
        for (z, &v) in self.buf.iter_mut().zip(b) {
            *z = Complex::new(v, 0.0);
        }
        self.fwd_x.process_with_scratch(&mut self.buf, &mut self.scratch);
        transpose(&self.buf, &mut self.buf_t, m1, m2);
        self.fwd_y.process_with_scratch(&mut self.buf_t, &mut self.scratch);
        // buf_t layout: i-outer rows of length m2
        for i in 0..m1 {
            for j in 0..m2 {
                let denom = c + eps2 * self.symbol[j * m1 + i];
                self.buf_t[i * m2 + j] /= denom;
            }
        }
        self.inv_y.process_with_scratch(&mut self.buf_t, &mut self.scratch);
        transpose(&self.buf_t, &mut self.buf, m2, m1);
        self.inv_x.process_with_scratch(&mut self.buf, &mut self.scratch);
        let norm = 1.0 / (m1 * m2) as f64;
        for (o, z) in out.iter_mut().zip(&self.buf) {
            *o = z.re * norm;
        }
    }

    fn solve_cg(&mut self, c: f64, eps2: f64, b: &[f64], out: &mut [f64]) -> Result<()> {
        let n = b.len();
        let grid = self.grid;
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let bnorm = inf_norm_slice(b);
        if bnorm == 0.0 {
            out.fill(0.0);
            return Ok(());
        }
        let target = self.solver_tol * bnorm;
        let mut rs: f64 = r.iter().map(|v| v * v).sum();
        for _ in 0..10 * n {
            if inf_norm_slice(&r) <= target {
                out.copy_from_slice(&x);
                return Ok(());
            }
            shifted_apply(grid, c, eps2, &p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rs / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rs_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rs_new / rs;
            rs = rs_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        Err(Error::InvalidParameter(
            "conjugate gradient failed to reach the residual target".into(),
        ))
    }
}

fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], rows_len: usize, n_rows: usize) {
    // src: n_rows rows of rows_len; dst: rows_len rows of n_rows
    for r in 0..n_rows {
        for c in 0..rows_len {
            dst[c * n_rows + r] = src[r * rows_len + c];
        }
    }
}
