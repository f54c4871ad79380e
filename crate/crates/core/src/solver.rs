//! Implicit time stepping, sparse direct solves, reconstruction and error
//! metrics.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;

use crate::assembly::StepOperator;
use crate::error::{Error, Result};
use crate::geometry::{CoarseGrid, FineMesh, FractureSet};
use crate::nlmc::{CoarseLayout, ProjectionOperator};
use crate::sparse::CsrMatrix;

/// Sparse LU factorization with partial pivoting; no symmetry assumed.
/// The matrix is equilibrated first (`D_r A D_c`, Ruiz scaling), since the
/// coupled blocks differ by many orders of magnitude.
pub struct LinearSolver {
    lu: Lu<usize, f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    n: usize,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver").field("n", &self.n).finish()
    }
}

const EQUILIBRATION_SWEEPS: usize = 8;

/// Row and column scalings bringing every row and column maximum close to 1.
fn ruiz_scaling(a: &CsrMatrix) -> (Vec<f64>, Vec<f64>) {
    let (nr, nc) = a.shape();
    let mut r = vec![1.0; nr];
    let mut c = vec![1.0; nc];
    for _ in 0..EQUILIBRATION_SWEEPS {
        let mut row_max = vec![0.0f64; nr];
        let mut col_max = vec![0.0f64; nc];
        for (i, j, v) in a.iter() {
            let w = (v * r[i] * c[j]).abs();
            row_max[i] = row_max[i].max(w);
            col_max[j] = col_max[j].max(w);
        }
        for (s, m) in r.iter_mut().zip(&row_max) {
            if *m > 0.0 {
                *s /= m.sqrt();
            }
        }
        for (s, m) in c.iter_mut().zip(&col_max) {
            if *m > 0.0 {
                *s /= m.sqrt();
            }
        }
    }
    (r, c)
}

impl LinearSolver {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Solver(format!("cannot factor a {:?} matrix", a.shape())));
        }
        let (row_scale, col_scale) = ruiz_scaling(a);
        let scaled = CsrMatrix::from_triplets(
            a.nrows(),
            a.ncols(),
            a.iter().map(|(i, j, v)| (i, j, v * row_scale[i] * col_scale[j])).collect(),
        );
        let faer_mat = scaled.to_faer()?;
        // faer panics on an exactly zero numeric pivot instead of returning an error
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| faer_mat.sp_lu()))
            .map_err(|_| Error::Solver("LU factorization failed: zero pivot".into()))?
            .map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
        Ok(Self {
            lu,
            row_scale,
            col_scale,
            n: a.nrows(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Solver(format!("rhs length {} for a system of size {}", b.len(), self.n)));
        }
        let mut x = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.solve_many(&mut x)?;
        Ok((0..self.n).map(|i| x[(i, 0)]).collect())
    }

    /// Solves for every column of `rhs` in place.
    pub fn solve_many(&self, rhs: &mut Mat<f64>) -> Result<()> {
        if rhs.nrows() != self.n {
            return Err(Error::Solver(format!("rhs has {} rows for a system of size {}", rhs.nrows(), self.n)));
        }
        for j in 0..rhs.ncols() {
            for i in 0..self.n {
                rhs[(i, j)] *= self.row_scale[i];
            }
        }
        self.lu.solve_in_place(&mut *rhs);
        for j in 0..rhs.ncols() {
            for i in 0..self.n {
                let v = rhs[(i, j)] * self.col_scale[i];
                if !v.is_finite() {
                    return Err(Error::Solver("singular system: non-finite solution".into()));
                }
                rhs[(i, j)] = v;
            }
        }
        Ok(())
    }
}

/// Iterative refinement sweeps after every step solve.
pub const REFINEMENT_STEPS: usize = 3;

/// Factorized step operator; the matrix is constant in time.
///
/// With [`Stepper::conservative`] the first `n_flow` rows are taken to hold
/// a flux operator that annihilates constants. Refinement residuals then use
/// the difference form `Σ a_ij (x_j - x_i)`, so rounding in the stored
/// diagonal cannot act as a sink on a large uniform pressure.
#[derive(Debug)]
pub struct Stepper<'a> {
    step: &'a StepOperator,
    solver: LinearSolver,
    n_flow: usize,
    storage: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(step: &'a StepOperator) -> Result<Self> {
        Ok(Self {
            solver: LinearSolver::factor(step.lhs())?,
            step,
            n_flow: 0,
            storage: Vec::new(),
        })
    }

    pub fn conservative(step: &'a StepOperator, n_flow: usize) -> Result<Self> {
        if n_flow > step.dim() {
            return Err(Error::invalid("flow block larger than the system"));
        }
        let mut s = Self::new(step)?;
        s.n_flow = n_flow;
        s.storage = step.mass()[..n_flow].iter().map(|m| m / step.tau()).collect();
        Ok(s)
    }

    pub fn operator(&self) -> &StepOperator {
        self.step
    }

    /// `b - lhs x`, flow rows in difference form when conservative.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let lhs = self.step.lhs();
        (0..lhs.nrows())
            .map(|i| {
                let (cols, vals) = lhs.row(i);
                let ax: f64 = if i < self.n_flow {
                    let mut acc = self.storage[i] * x[i];
                    for (&j, &v) in cols.iter().zip(vals) {
                        if j >= self.n_flow {
                            acc += v * x[j];
                        } else if j != i {
                            acc += v * (x[j] - x[i]);
                        }
                    }
                    acc
                } else {
                    cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
                };
                b[i] - ax
            })
            .collect()
    }

    pub fn implicit_step(&self, prev: &[f64]) -> Result<Vec<f64>> {
        if prev.len() != self.step.dim() {
            return Err(Error::Solver(format!(
                "state of length {} for a system of size {}",
                prev.len(),
                self.step.dim()
            )));
        }
        let b = self.step.rhs(prev);
        let mut x = self.solver.solve(&b)?;
        for _ in 0..REFINEMENT_STEPS {
            let dx = self.solver.solve(&self.residual(&b, &x))?;
            for (x, d) in x.iter_mut().zip(&dx) {
                *x += d;
            }
        }
        Ok(x)
    }

    /// Advances `n_steps` times, calling `observe(n, y_n)` after every step.
    pub fn run_with(
        &self,
        initial: &[f64],
        n_steps: usize,
        mut observe: impl FnMut(usize, &[f64]) -> Result<()>,
    ) -> Result<Vec<f64>> {
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        let mut y = initial.to_vec();
        for n in 1..=n_steps {
            y = self.implicit_step(&y)?;
            observe(n, &y)?;
        }
        Ok(y)
    }

    /// States after the requested step indices (1-based), in ascending order.
    pub fn run(&self, initial: &[f64], n_steps: usize, snapshots: &[usize]) -> Result<Vec<(usize, Vec<f64>)>> {
        let mut out = Vec::new();
        self.run_with(initial, n_steps, |n, y| {
            if snapshots.contains(&n) {
                out.push((n, y.to_vec()));
            }
            Ok(())
        })?;
        Ok(out)
    }
}

/// Solves the displacement rows with every other unknown held at `y`,
/// returning `y` with its displacement part replaced.
pub fn equilibrate(step: &StepOperator, displacement: std::ops::Range<usize>, y: &[f64]) -> Result<Vec<f64>> {
    let n = step.dim();
    let u: Vec<usize> = displacement.clone().collect();
    let rest: Vec<usize> = (0..n).filter(|i| !displacement.contains(i)).collect();
    let a_uu = step.lhs().submatrix(&u, &u);
    let a_ur = step.lhs().submatrix(&u, &rest);
    let y_rest: Vec<f64> = rest.iter().map(|&i| y[i]).collect();
    let coupled = a_ur.mul_vec(&y_rest);
    let rhs: Vec<f64> = u.iter().zip(&coupled).map(|(&i, c)| step.base_rhs()[i] - c).collect();
    let sol = LinearSolver::factor(&a_uu)?.solve(&rhs)?;
    let mut out = y.to_vec();
    for (k, &i) in u.iter().enumerate() {
        out[i] = sol[k];
    }
    Ok(out)
}

/// Fine field lifted from a coarse state: `Rᵀ ȳ`.
pub fn reconstruct(proj: &ProjectionOperator, coarse: &[f64]) -> Result<Vec<f64>> {
    if coarse.len() != proj.r.nrows() {
        return Err(Error::invalid(format!(
            "coarse state has {} entries, projection has {} rows",
            coarse.len(),
            proj.r.nrows()
        )));
    }
    Ok(proj.r.mul_vec_transposed(coarse))
}

/// Coarse-cell averages of a fine state in the coarse layout: matrix
/// pressure per cell, fracture pressure per continuum (length weighted) and
/// exact P1 averages of both displacement components.
pub fn coarse_average(mesh: &FineMesh, fr: &FractureSet, cg: &CoarseGrid, fine: &[f64]) -> Result<Vec<f64>> {
    let (n_m, n_f, n_v) = (mesh.n_cells(), fr.n_segments(), mesh.n_vertices());
    if fine.len() != n_m + n_f + 2 * n_v {
        return Err(Error::invalid(format!(
            "fine state has length {}, expected {}",
            fine.len(),
            n_m + n_f + 2 * n_v
        )));
    }
    let layout = CoarseLayout::of(cg);
    let mut out = vec![0.0; layout.total()];
    let (ux, uy) = (n_m + n_f, n_m + n_f + n_v);
    for k in 0..cg.n_cells() {
        let area = cg.cells()[k].area();
        let mut p = 0.0;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &c in cg.fine_cells(k) {
            let a = mesh.areas()[c];
            p += a * fine[c];
            for &v in &mesh.cells()[c] {
                sx += a / 3.0 * fine[ux + v];
                sy += a / 3.0 * fine[uy + v];
            }
        }
        out[layout.matrix(k)] = p / area;
        out[layout.ux(k)] = sx / area;
        out[layout.uy(k)] = sy / area;
    }
    for (id, cont) in cg.continua().iter().enumerate() {
        let s: f64 = cont
            .segments
            .iter()
            .map(|&l| fr.segments[l].length * fine[n_m + l])
            .sum();
        out[layout.fracture(id)] = s / cont.length;
    }
    Ok(out)
}

/// Relative coarse-cell errors in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub e_p: f64,
    pub e_ux: f64,
    pub e_uy: f64,
    /// Set when a reference field is identically zero; the affected value
    /// is then the absolute root-sum-square instead of a percentage.
    pub absolute: [bool; 3],
}

fn relative_l2(reference: &[f64], approx: &[f64]) -> (f64, bool) {
    let num: f64 = reference.iter().zip(approx).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = reference.iter().map(|a| a * a).sum();
    if den == 0.0 {
        (num.sqrt(), true)
    } else {
        (100.0 * (num / den).sqrt(), false)
    }
}

/// `(e_p, e_ux, e_uy)` between reference averages and a coarse solution,
/// both in the coarse layout. Pressure compares the matrix continuum.
pub fn error_metrics(layout: &CoarseLayout, reference: &[f64], coarse: &[f64]) -> Result<ErrorMetrics> {
    if reference.len() != layout.total() || coarse.len() != layout.total() {
        return Err(Error::invalid("error metrics need two states in the coarse layout"));
    }
    let (e_p, fp) = relative_l2(&reference[layout.p_m()], &coarse[layout.p_m()]);
    let (e_ux, fx) = relative_l2(&reference[layout.u_x()], &coarse[layout.u_x()]);
    let (e_uy, fy) = relative_l2(&reference[layout.u_y()], &coarse[layout.u_y()]);
    Ok(ErrorMetrics { e_p, e_ux, e_uy, absolute: [fp, fx, fy] })
}
