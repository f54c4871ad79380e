//! Nonlocal multicontinuum upscaling: constrained energy-minimizing bases on
//! oversampled regions, the projection `R`, and the coarse system
//! `(M̄/τ + R A Rᵀ) ȳ = R F`.
//!
//! Coarse unknowns are continuum averages. Every basis is normalized so that
//! its average over its own continuum is one and its average over every other
//! continuum of the region is zero; the integral-normalized function is
//! `values / measure`.

use std::ops::Range;

use faer::Mat;
use rayon::prelude::*;

use crate::assembly::{AssembledSystem, BlockOperator, DofLayout, StepOperator};
use crate::coefficients::MaterialParams;
use crate::error::{Error, Result};
use crate::geometry::{CoarseGrid, FineMesh, FractureSet};
use crate::solver::LinearSolver;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Coarse unknown ordering `(p̄_m, p̄_f, ū_x, ū_y)`; fracture continua use
/// their global continuum id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoarseLayout {
    pub n_cells: usize,
    pub n_continua: usize,
}

impl CoarseLayout {
    pub fn of(cg: &CoarseGrid) -> Self {
        Self {
            n_cells: cg.n_cells(),
            n_continua: cg.continua().len(),
        }
    }

    pub fn total(&self) -> usize {
        3 * self.n_cells + self.n_continua
    }

    pub fn n_flow(&self) -> usize {
        self.n_cells + self.n_continua
    }

    pub fn matrix(&self, k: usize) -> usize {
        k
    }

    pub fn fracture(&self, continuum: usize) -> usize {
        self.n_cells + continuum
    }

    pub fn ux(&self, k: usize) -> usize {
        self.n_flow() + k
    }

    pub fn uy(&self, k: usize) -> usize {
        self.n_flow() + self.n_cells + k
    }

    pub fn p_m(&self) -> Range<usize> {
        0..self.n_cells
    }

    pub fn p_f(&self) -> Range<usize> {
        self.n_cells..self.n_flow()
    }

    pub fn u_x(&self) -> Range<usize> {
        self.n_flow()..self.n_flow() + self.n_cells
    }

    pub fn u_y(&self) -> Range<usize> {
        self.n_flow() + self.n_cells..self.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Matrix,
    Fracture(usize),
    DisplacementX,
    DisplacementY,
}

/// One basis function on the fine unknowns of the full system.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub home: usize,
    pub kind: BasisKind,
    /// Global fine unknowns, ascending.
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
    /// Area or length of the continuum the basis belongs to.
    pub measure: f64,
}

impl Basis {
    pub fn coarse_dof(&self, layout: &CoarseLayout) -> usize {
        match self.kind {
            BasisKind::Matrix => layout.matrix(self.home),
            BasisKind::Fracture(c) => layout.fracture(c),
            BasisKind::DisplacementX => layout.ux(self.home),
            BasisKind::DisplacementY => layout.uy(self.home),
        }
    }

    /// Integral-normalized values (`∫ = δ` instead of average `= δ`).
    pub fn raw_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v / self.measure).collect()
    }
}

/// Fine entities of an oversampled region `K_i^s`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRegion {
    pub home: usize,
    pub layers: usize,
    pub coarse: Vec<usize>,
    pub cells: Vec<usize>,
    pub segments: Vec<usize>,
    pub continua: Vec<usize>,
    /// Vertices whose x (resp. y) displacement is free: not on the part of
    /// the region boundary interior to the domain and not on a roller side.
    pub free_x: Vec<usize>,
    pub free_y: Vec<usize>,
}

impl LocalRegion {
    pub fn new(mesh: &FineMesh, fr: &FractureSet, cg: &CoarseGrid, home: usize, layers: usize) -> Result<Self> {
        if home >= cg.n_cells() {
            return Err(Error::invalid(format!("coarse cell {home} out of range")));
        }
        let coarse = cg.oversample(home, layers);
        let mut in_region = vec![false; cg.n_cells()];
        for &k in &coarse {
            in_region[k] = true;
        }
        let mut cells: Vec<usize> = coarse.iter().flat_map(|&k| cg.fine_cells(k).iter().copied()).collect();
        cells.sort_unstable();
        let segments: Vec<usize> = (0..fr.n_segments())
            .filter(|&l| in_region[cg.fine_to_coarse()[fr.segments[l].host]])
            .collect();
        let mut continua: Vec<usize> = coarse.iter().flat_map(|&k| cg.cell_continua(k).iter().copied()).collect();
        continua.sort_unstable();

        let (i0, i1, j0, j1) = cg.oversample_bounds(home, layers);
        let (rx, ry) = cg.ratio();
        let (x_lo, x_hi) = (i0 * rx, (i1 + 1) * rx);
        let (y_lo, y_hi) = (j0 * ry, (j1 + 1) * ry);
        let cut_lo_x = i0 > 0;
        let cut_hi_x = i1 + 1 < cg.nx();
        let cut_lo_y = j0 > 0;
        let cut_hi_y = j1 + 1 < cg.ny();
        let (mut free_x, mut free_y) = (Vec::new(), Vec::new());
        for vj in y_lo..=y_hi {
            for vi in x_lo..=x_hi {
                let cut = (cut_lo_x && vi == x_lo)
                    || (cut_hi_x && vi == x_hi)
                    || (cut_lo_y && vj == y_lo)
                    || (cut_hi_y && vj == y_hi);
                if cut {
                    continue;
                }
                let v = vj * (mesh.nx() + 1) + vi;
                if vi != 0 && vi != mesh.nx() {
                    free_x.push(v);
                }
                if vj != 0 && vj != mesh.ny() {
                    free_y.push(v);
                }
            }
        }
        Ok(Self {
            home,
            layers,
            coarse,
            cells,
            segments,
            continua,
            free_x,
            free_y,
        })
    }

    /// Global flow unknowns of the region: cells, then segments offset by `n_m`.
    pub fn flow_dofs(&self, n_m: usize) -> Vec<usize> {
        self.cells.iter().copied().chain(self.segments.iter().map(|&l| n_m + l)).collect()
    }
}

/// Integral constraint rows over the region's flow unknowns: one row of
/// cell areas per coarse cell (`C_m`) and one row of segment lengths per
/// fracture continuum (`C_f`).
pub fn build_flow_constraints(
    mesh: &FineMesh,
    fr: &FractureSet,
    cg: &CoarseGrid,
    region: &LocalRegion,
) -> (CsrMatrix, CsrMatrix) {
    let nc = region.cells.len();
    let n = nc + region.segments.len();
    let local_cell = |c: usize| region.cells.binary_search(&c).expect("cell inside region");
    let c_m: Vec<Vec<(usize, f64)>> = region
        .coarse
        .iter()
        .map(|&k| {
            let mut row: Vec<(usize, f64)> = cg.fine_cells(k).iter().map(|&c| (local_cell(c), mesh.areas()[c])).collect();
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    let c_f: Vec<Vec<(usize, f64)>> = region
        .continua
        .iter()
        .map(|&id| {
            let mut row: Vec<(usize, f64)> = cg.continua()[id]
                .segments
                .iter()
                .map(|&l| {
                    let pos = region.segments.binary_search(&l).expect("segment inside region");
                    (nc + pos, fr.segments[l].length)
                })
                .collect();
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    (CsrMatrix::from_rows(n, c_m), CsrMatrix::from_rows(n, c_f))
}

/// Lumped hat-function integrals over each coarse cell of the region, for the
/// free x (`S_x`) and free y (`S_y`) displacement unknowns.
pub fn build_displacement_constraints(mesh: &FineMesh, cg: &CoarseGrid, region: &LocalRegion) -> (CsrMatrix, CsrMatrix) {
    let build = |free: &[usize]| {
        let rows: Vec<Vec<(usize, f64)>> = region
            .coarse
            .iter()
            .map(|&k| {
                mesh.vertex_weights_in(cg.fine_cells(k).iter().copied())
                    .into_iter()
                    .filter_map(|(v, w)| free.binary_search(&v).ok().map(|pos| (pos, w)))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(free.len(), rows)
    };
    (build(&region.free_x), build(&region.free_y))
}

fn stack(a: &CsrMatrix, b: &CsrMatrix, b_col_offset: usize, ncols: usize) -> CsrMatrix {
    let mut rows = Vec::with_capacity(a.nrows() + b.nrows());
    for i in 0..a.nrows() {
        let (c, v) = a.row(i);
        rows.push(c.iter().copied().zip(v.iter().copied()).collect());
    }
    for i in 0..b.nrows() {
        let (c, v) = b.row(i);
        rows.push(c.iter().map(|&j| j + b_col_offset).zip(v.iter().copied()).collect());
    }
    CsrMatrix::from_rows(ncols, rows)
}

/// Divides every row by its measure, turning integrals into averages.
fn average_rows(c: &CsrMatrix, measures: Vec<f64>) -> Result<(CsrMatrix, Vec<f64>)> {
    let sums = c.row_sums();
    let mut rows = Vec::with_capacity(c.nrows());
    for (i, (&s, &m)) in sums.iter().zip(&measures).enumerate() {
        if !(s > 0.0) {
            return Err(Error::Solver(format!("constraint row {i} has no support")));
        }
        let (cols, vals) = c.row(i);
        rows.push(cols.iter().copied().zip(vals.iter().map(|v| v / m)).collect());
    }
    Ok((CsrMatrix::from_rows(c.ncols(), rows), measures))
}

/// Minimizes `½ xᵀ A x` subject to `C x = e_t` for every target row `t`,
/// through one factorization of the saddle-point system. `A` is scaled
/// symmetrically to unit diagonal and every constraint row to unit maximum,
/// since fracture and matrix transmissibilities differ by many orders.
pub fn solve_constrained(a: &CsrMatrix, c: &CsrMatrix, targets: &[usize]) -> Result<Vec<Vec<f64>>> {
    let (n, m) = (a.nrows(), c.nrows());
    if c.ncols() != n {
        return Err(Error::Solver("constraint width does not match the operator".into()));
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::Solver(format!("local operator has a non-positive diagonal at {i}")));
    }
    let d: Vec<f64> = diag.iter().map(|v| v.sqrt()).collect();
    let mut t = TripletBuilder::with_capacity(n + m, n + m, a.nnz() + 2 * c.nnz());
    for (i, j, v) in a.iter() {
        t.push(i, j, v / (d[i] * d[j]));
    }
    let mut row_scale = vec![0.0f64; m];
    for (k, j, v) in c.iter() {
        row_scale[k] = row_scale[k].max((v / d[j]).abs());
    }
    if let Some(k) = row_scale.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::Solver(format!("constraint row {k} has no support")));
    }
    for (k, j, v) in c.iter() {
        let w = v / d[j] / row_scale[k];
        t.push(n + k, j, w);
        t.push(j, n + k, w);
    }
    let solver = LinearSolver::factor(&t.build())?;
    let mut rhs = Mat::<f64>::zeros(n + m, targets.len());
    for (j, &row) in targets.iter().enumerate() {
        rhs[(n + row, j)] = 1.0 / row_scale[row];
    }
    solver.solve_many(&mut rhs)?;
    Ok((0..targets.len()).map(|j| (0..n).map(|i| rhs[(i, j)] / d[i]).collect()).collect())
}

/// Local flow problem on `K_i^s` with zero pressure outside the region.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub region: LocalRegion,
    pub operator: CsrMatrix,
    pub c_m: CsrMatrix,
    pub c_f: CsrMatrix,
    home_continua: Vec<usize>,
    dofs: Vec<usize>,
}

impl FlowProblem {
    pub fn new(mesh: &FineMesh, fr: &FractureSet, cg: &CoarseGrid, flow: &CsrMatrix, region: LocalRegion) -> Self {
        let dofs = region.flow_dofs(mesh.n_cells());
        let operator = flow.submatrix(&dofs, &dofs);
        let (c_m, c_f) = build_flow_constraints(mesh, fr, cg, &region);
        Self {
            home_continua: cg.cell_continua(region.home).to_vec(),
            region,
            operator,
            c_m,
            c_f,
            dofs,
        }
    }

    /// Global flow unknowns matching the local numbering.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    /// Averaged constraint rows `[C_m; C_f]` and their measures.
    pub fn constraints(&self) -> Result<(CsrMatrix, Vec<f64>)> {
        let c = stack(&self.c_m, &self.c_f, 0, self.operator.ncols());
        let sums = c.row_sums();
        average_rows(&c, sums)
    }

    fn targets(&self) -> Vec<(BasisKind, usize)> {
        let home_row = self.region.coarse.binary_search(&self.region.home).expect("home in region");
        let n_coarse = self.region.coarse.len();
        let mut targets = vec![(BasisKind::Matrix, home_row)];
        for &id in &self.home_continua {
            let pos = self.region.continua.binary_search(&id).expect("home continuum in region");
            targets.push((BasisKind::Fracture(id), n_coarse + pos));
        }
        targets
    }

    /// The matrix basis of the home cell followed by one basis per continuum
    /// of the home cell, as local vectors with their measures.
    pub fn solve_all(&self) -> Result<Vec<(BasisKind, Vec<f64>, f64)>> {
        let (c, measures) = self.constraints()?;
        let targets = self.targets();
        let rows: Vec<usize> = targets.iter().map(|t| t.1).collect();
        let sols = solve_constrained(&self.operator, &c, &rows)?;
        Ok(targets.into_iter().zip(sols).map(|((kind, row), x)| (kind, x, measures[row])).collect())
    }

    /// A single pressure basis; `kind` is `Matrix` or `Fracture` of a home continuum.
    pub fn solve_pressure_basis(&self, kind: BasisKind) -> Result<Vec<f64>> {
        let (c, _) = self.constraints()?;
        let row = self
            .targets()
            .into_iter()
            .find(|t| t.0 == kind)
            .ok_or_else(|| Error::invalid(format!("{kind:?} is not a basis of cell {}", self.region.home)))?
            .1;
        Ok(solve_constrained(&self.operator, &c, &[row])?.remove(0))
    }

    /// `xᵀ A x` on the region.
    pub fn energy(&self, x: &[f64]) -> f64 {
        crate::sparse::dot(x, &self.operator.mul_vec(x))
    }
}

/// Local elasticity problem on `K_i^s` with zero displacement on the region
/// boundary inside the domain and roller conditions on the domain boundary.
#[derive(Debug, Clone)]
pub struct DisplacementProblem {
    pub region: LocalRegion,
    pub operator: CsrMatrix,
    pub s_x: CsrMatrix,
    pub s_y: CsrMatrix,
    areas: Vec<f64>,
    dofs: Vec<usize>,
}

impl DisplacementProblem {
    /// `stiffness` is the full `2 N_v` elasticity operator.
    pub fn new(mesh: &FineMesh, cg: &CoarseGrid, stiffness: &CsrMatrix, region: LocalRegion) -> Self {
        let n_v = mesh.n_vertices();
        let dofs: Vec<usize> = region
            .free_x
            .iter()
            .copied()
            .chain(region.free_y.iter().map(|&v| n_v + v))
            .collect();
        let operator = stiffness.submatrix(&dofs, &dofs);
        let (s_x, s_y) = build_displacement_constraints(mesh, cg, &region);
        let areas = region.coarse.iter().map(|&k| cg.cells()[k].area()).collect();
        Self { region, operator, s_x, s_y, areas, dofs }
    }

    /// Elasticity unknowns (`v` for x, `N_v + v` for y) matching the local numbering.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn constraints(&self) -> Result<(CsrMatrix, Vec<f64>)> {
        // Vertices on roller sides carry part of the cell integral but no
        // unknown, so rows are averaged over the full cell area.
        let c = stack(&self.s_x, &self.s_y, self.region.free_x.len(), self.operator.ncols());
        let areas = self.areas.iter().chain(&self.areas).copied().collect();
        average_rows(&c, areas)
    }

    /// X and Y bases of the home cell.
    pub fn solve_all(&self) -> Result<Vec<(BasisKind, Vec<f64>, f64)>> {
        let (c, measures) = self.constraints()?;
        let home_row = self.region.coarse.binary_search(&self.region.home).expect("home in region");
        let rows = [home_row, self.region.coarse.len() + home_row];
        let sols = solve_constrained(&self.operator, &c, &rows)?;
        let kinds = [BasisKind::DisplacementX, BasisKind::DisplacementY];
        Ok(kinds.into_iter().zip(sols).zip(rows).map(|((k, x), r)| (k, x, measures[r])).collect())
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        crate::sparse::dot(x, &self.operator.mul_vec(x))
    }
}

/// Sorts `(dof, value)` pairs by dof into a basis.
fn basis_from(home: usize, kind: BasisKind, dofs: &[usize], values: Vec<f64>, measure: f64, offset: usize) -> Basis {
    let mut pairs: Vec<(usize, f64)> = dofs.iter().map(|&d| d + offset).zip(values).collect();
    pairs.sort_by_key(|p| p.0);
    let (dofs, values) = pairs.into_iter().unzip();
    Basis { home, kind, dofs, values, measure }
}

/// All bases of one coarse cell: matrix, fracture continua, X, Y.
pub fn cell_bases(
    mesh: &FineMesh,
    fr: &FractureSet,
    cg: &CoarseGrid,
    flow: &CsrMatrix,
    stiffness: &CsrMatrix,
    home: usize,
    layers: usize,
) -> Result<Vec<Basis>> {
    let region = LocalRegion::new(mesh, fr, cg, home, layers)?;
    let n_flow = mesh.n_cells() + fr.n_segments();
    let fp = FlowProblem::new(mesh, fr, cg, flow, region.clone());
    let mut out = Vec::with_capacity(3 + cg.n_continua(home));
    for (kind, x, measure) in fp.solve_all()? {
        out.push(basis_from(home, kind, fp.dofs(), x, measure, 0));
    }
    let dp = DisplacementProblem::new(mesh, cg, stiffness, region);
    for (kind, x, measure) in dp.solve_all()? {
        out.push(basis_from(home, kind, dp.dofs(), x, measure, n_flow));
    }
    Ok(out)
}

/// Builds every basis on `layers`-layer oversampled regions, in parallel over
/// coarse cells. The result is ordered by coarse cell.
pub fn build_bases(
    mesh: &FineMesh,
    fr: &FractureSet,
    cg: &CoarseGrid,
    blocks: &BlockOperator,
    layers: usize,
) -> Result<Vec<Basis>> {
    let flow = blocks.flow_operator();
    let stiffness = blocks.elasticity.full();
    let per_cell: Vec<Vec<Basis>> = (0..cg.n_cells())
        .into_par_iter()
        .map(|k| cell_bases(mesh, fr, cg, &flow, &stiffness, k, layers))
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// `R`: one row per coarse unknown holding its basis on the fine unknowns.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    pub r: CsrMatrix,
    pub layout: CoarseLayout,
    pub fine: DofLayout,
    pub layers: usize,
}

impl ProjectionOperator {
    /// Fine unknowns and values of the basis behind coarse unknown `i`.
    pub fn basis(&self, i: usize) -> (&[usize], &[f64]) {
        self.r.row(i)
    }
}

pub fn assemble_projection(cg: &CoarseGrid, fine: DofLayout, layers: usize, bases: &[Basis]) -> Result<ProjectionOperator> {
    let layout = CoarseLayout::of(cg);
    let mut rows: Vec<Option<Vec<(usize, f64)>>> = vec![None; layout.total()];
    for b in bases {
        let i = b.coarse_dof(&layout);
        if i >= layout.total() {
            return Err(Error::invalid(format!("basis {:?} of cell {} has no coarse unknown", b.kind, b.home)));
        }
        if rows[i].is_some() {
            return Err(Error::invalid(format!("duplicate basis for coarse unknown {i}")));
        }
        if b.dofs.iter().any(|&d| d >= fine.total()) {
            return Err(Error::invalid("basis refers to a fine unknown out of range"));
        }
        rows[i] = Some(b.dofs.iter().copied().zip(b.values.iter().copied()).collect());
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| Error::invalid(format!("missing basis for coarse unknown {i}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectionOperator {
        r: CsrMatrix::from_rows(fine.total(), rows),
        layout,
        fine,
        layers,
    })
}

/// Upscaled system `(M̄/τ + Ā) ȳ = F̄(ȳ̌)`.
#[derive(Debug, Clone)]
pub struct CoarseSystem {
    pub layout: CoarseLayout,
    /// `Ā = R A Rᵀ`, possibly with a conservative flow closure.
    pub operator: CsrMatrix,
    pub step: StepOperator,
}

/// Diagonal coarse storage: `a_m |K_i|`, `a_f |γ|`, zero on displacements.
pub fn coarse_mass(cg: &CoarseGrid, mp: &MaterialParams) -> Vec<f64> {
    let layout = CoarseLayout::of(cg);
    let mut m = vec![0.0; layout.total()];
    for (k, rect) in cg.cells().iter().enumerate() {
        m[layout.matrix(k)] = mp.a_m * rect.area();
    }
    for (id, c) in cg.continua().iter().enumerate() {
        m[layout.fracture(id)] = mp.a_f * c.length;
    }
    m
}

/// Corrects `op` so that a constant coarse pressure (every flow unknown
/// equal to one) produces `target`, the projected fine response to a
/// constant fine pressure. The defect of each row goes to the matrix
/// pressure column of that row's coarse cell, the diagonal for flow rows.
/// Flow rows always target zero.
pub fn constant_closure(op: &CsrMatrix, layout: &CoarseLayout, target: &[f64]) -> CsrMatrix {
    let n_flow = layout.n_flow();
    let mut defect = target.to_vec();
    defect[..n_flow].fill(0.0);
    for (i, j, v) in op.iter() {
        if j < n_flow {
            defect[i] -= v;
        }
    }
    let fix: Vec<(usize, usize, f64)> = defect
        .iter()
        .enumerate()
        .filter(|(_, d)| **d != 0.0)
        .map(|(i, &d)| {
            let col = if i < n_flow { i } else { (i - n_flow) % layout.n_cells };
            (i, col, d)
        })
        .collect();
    op.add_scaled(&CsrMatrix::from_triplets(op.nrows(), op.ncols(), fix), 1.0)
}

/// Coarse model `(M̄/τ + Ā) ȳ = F̄` with `Ā = R A Rᵀ`. With `conservative`,
/// `Ā` is corrected by [`constant_closure`]: the local bases reproduce
/// constants only up to their truncation error, so the plain product leaks
/// mass and sees spurious Biot forces from a uniform pressure.
pub fn upscale(
    sys: &AssembledSystem,
    proj: &ProjectionOperator,
    cg: &CoarseGrid,
    mp: &MaterialParams,
    conservative: bool,
) -> Result<CoarseSystem> {
    if proj.fine != sys.layout || proj.layout != CoarseLayout::of(cg) {
        return Err(Error::invalid("projection does not match the system or coarse grid"));
    }
    let tau = sys.step.tau();
    let rt = proj.r.transpose();
    let mut operator = proj.r.matmul(&sys.operator.matmul(&rt));
    if conservative {
        let mut ones = vec![0.0; sys.layout.total()];
        ones[..sys.layout.n_flow()].fill(1.0);
        let target = proj.r.mul_vec(&sys.operator.mul_vec(&ones));
        operator = constant_closure(&operator, &proj.layout, &target);
    }
    let coupling = proj.r.matmul(&sys.blocks.coupling(tau).matmul(&rt));
    let load = proj.r.mul_vec(sys.step.load());
    let step = StepOperator::new(&operator, coarse_mass(cg, mp), coupling, load, tau, Vec::new())?;
    Ok(CoarseSystem {
        layout: proj.layout,
        operator,
        step,
    })
}

/// Coarse-cell distance of every fine unknown from coarse cell `home`
/// (vertices take the nearest incident coarse cell).
pub fn dof_distances(mesh: &FineMesh, fr: &FractureSet, cg: &CoarseGrid, home: usize) -> Vec<usize> {
    let n_m = mesh.n_cells();
    let mut d: Vec<usize> = (0..n_m).map(|c| cg.layer_distance(home, cg.fine_to_coarse()[c])).collect();
    d.extend(fr.segments.iter().map(|s| cg.layer_distance(home, cg.fine_to_coarse()[s.host])));
    let mut vert = vec![usize::MAX; mesh.n_vertices()];
    for c in 0..n_m {
        for &v in &mesh.cells()[c] {
            vert[v] = vert[v].min(d[c]);
        }
    }
    d.extend_from_slice(&vert);
    d.extend_from_slice(&vert);
    d
}

/// `max |ψ|` more than `layers` coarse layers away from the home cell, over
/// `max |ψ|`.
pub fn decay_ratio(basis: (&[usize], &[f64]), distances: &[usize], layers: usize) -> f64 {
    let (dofs, vals) = basis;
    let mut far = 0.0f64;
    let mut all = 0.0f64;
    for (&d, &v) in dofs.iter().zip(vals) {
        all = all.max(v.abs());
        if distances[d] > layers {
            far = far.max(v.abs());
        }
    }
    if all == 0.0 {
        0.0
    } else {
        far / all
    }
}
