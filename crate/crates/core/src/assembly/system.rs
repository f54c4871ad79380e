use std::ops::Range;
use std::path::Path;

use super::elasticity::{biot_coupling, elasticity_stiffness, fracture_force_coupling, ElasticityBlocks};
use super::flow::{exchange_matrix, fracture_mass, fracture_tpfa, matrix_mass, tpfa_matrix, ExchangeBlocks};
use crate::coefficients::MaterialParams;
use crate::error::{Error, Result};
use crate::geometry::{CoarseGrid, FineMesh, FractureSet};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Unknown ordering `(p_m, p_f, u_x, u_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub n_m: usize,
    pub n_f: usize,
    pub n_v: usize,
}

impl DofLayout {
    pub fn total(&self) -> usize {
        self.n_m + self.n_f + 2 * self.n_v
    }

    pub fn n_flow(&self) -> usize {
        self.n_m + self.n_f
    }

    pub fn p_m(&self) -> Range<usize> {
        0..self.n_m
    }

    pub fn p_f(&self) -> Range<usize> {
        self.n_m..self.n_flow()
    }

    pub fn u_x(&self) -> Range<usize> {
        self.n_flow()..self.n_flow() + self.n_v
    }

    pub fn u_y(&self) -> Range<usize> {
        self.n_flow() + self.n_v..self.total()
    }

    pub fn displacement(&self) -> Range<usize> {
        self.n_flow()..self.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementConstraint {
    pub vertex: usize,
    pub component: Component,
    pub value: f64,
}

impl DisplacementConstraint {
    pub fn dof(&self, layout: &DofLayout) -> usize {
        match self.component {
            Component::X => layout.u_x().start + self.vertex,
            Component::Y => layout.u_y().start + self.vertex,
        }
    }
}

/// Zero normal displacement on every side: `u_x = 0` left and right,
/// `u_y = 0` bottom and top.
pub fn roller_constraints(mesh: &FineMesh) -> Vec<DisplacementConstraint> {
    let b = mesh.boundary();
    let mut out = Vec::new();
    let mut push = |verts: &[usize], component| {
        for &vertex in verts {
            out.push(DisplacementConstraint { vertex, component, value: 0.0 });
        }
    };
    push(&b.left, Component::X);
    push(&b.right, Component::X);
    push(&b.bottom, Component::Y);
    push(&b.top, Component::Y);
    out.sort_by(|a, b| (a.component, a.vertex).cmp(&(b.component, b.vertex)));
    out.dedup_by(|a, b| a.component == b.component && a.vertex == b.vertex);
    out
}

/// Matrix-source load: `q` per unit area spread over the fine cells of the
/// given coarse cells.
pub fn coarse_cell_sources(mesh: &FineMesh, cg: &CoarseGrid, cells: &[usize], q: f64) -> Result<Vec<f64>> {
    let mut f = vec![0.0; mesh.n_cells()];
    for &k in cells {
        if k >= cg.n_cells() {
            return Err(Error::invalid(format!(
                "source cell {k} outside the {}x{} coarse grid",
                cg.nx(),
                cg.ny()
            )));
        }
        for &c in cg.fine_cells(k) {
            f[c] += q * mesh.areas()[c];
        }
    }
    Ok(f)
}

/// All fine-scale blocks of the coupled operator.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub a_m: CsrMatrix,
    pub a_f: CsrMatrix,
    pub exchange: ExchangeBlocks,
    pub elasticity: ElasticityBlocks,
    pub b_mx: CsrMatrix,
    pub b_my: CsrMatrix,
    pub b_fx: CsrMatrix,
    pub b_fy: CsrMatrix,
    pub m_m: Vec<f64>,
    pub m_f: Vec<f64>,
}

impl BlockOperator {
    pub fn assemble(mesh: &FineMesh, fr: &FractureSet, mp: &MaterialParams) -> Result<Self> {
        mp.validate()?;
        let (mu, lambda) = mp.lame()?;
        let (b_mx, b_my) = biot_coupling(mesh, mp.biot);
        let (b_fx, b_fy) = fracture_force_coupling(mesh, fr);
        Ok(Self {
            a_m: tpfa_matrix(mesh, mp.b_m),
            a_f: fracture_tpfa(fr, mp.b_f)?,
            exchange: exchange_matrix(mesh.n_cells(), fr, mp.beta),
            elasticity: elasticity_stiffness(mesh, mu, lambda)?,
            b_mx,
            b_my,
            b_fx,
            b_fy,
            m_m: matrix_mass(mesh, mp.a_m),
            m_f: fracture_mass(fr, mp.a_f),
        })
    }

    pub fn layout(&self) -> DofLayout {
        DofLayout {
            n_m: self.a_m.nrows(),
            n_f: self.a_f.nrows(),
            n_v: self.elasticity.xx.nrows(),
        }
    }

    /// `[[A_m + Q_mm, Q_mf], [Q_fm, A_f + Q_ff]]`.
    pub fn flow_operator(&self) -> CsrMatrix {
        let l = self.layout();
        let n = l.n_flow();
        let mut t = TripletBuilder::new(n, n);
        self.push_flow(&mut t);
        t.build()
    }

    fn push_flow(&self, t: &mut TripletBuilder) {
        let nm = self.layout().n_m;
        t.push_block(&self.a_m, 0, 0, 1.0);
        t.push_block(&self.exchange.mm, 0, 0, 1.0);
        t.push_block(&self.exchange.mf, 0, nm, 1.0);
        t.push_block(&self.exchange.fm, nm, 0, 1.0);
        t.push_block(&self.a_f, nm, nm, 1.0);
        t.push_block(&self.exchange.ff, nm, nm, 1.0);
    }

    /// Coupled operator without storage: Biot terms scaled by `1/τ` in the
    /// matrix-pressure rows and transposed, unscaled, in the displacement rows.
    pub fn operator(&self, tau: f64) -> CsrMatrix {
        let l = self.layout();
        let n = l.total();
        let (ux, uy) = (l.u_x().start, l.u_y().start);
        let mut t = TripletBuilder::new(n, n);
        self.push_flow(&mut t);
        t.push_block(&self.b_mx, 0, ux, 1.0 / tau);
        t.push_block(&self.b_my, 0, uy, 1.0 / tau);
        t.push_block_transposed(&self.b_mx, ux, 0, -1.0);
        t.push_block_transposed(&self.b_fx, ux, l.n_m, -1.0);
        t.push_block_transposed(&self.b_my, uy, 0, -1.0);
        t.push_block_transposed(&self.b_fy, uy, l.n_m, -1.0);
        let e = &self.elasticity;
        t.push_block(&e.xx, ux, ux, 1.0);
        t.push_block(&e.xy, ux, uy, 1.0);
        t.push_block_transposed(&e.xy, uy, ux, 1.0);
        t.push_block(&e.yy, uy, uy, 1.0);
        t.build()
    }

    /// The part of the right-hand side carried over from the previous step
    /// besides storage: `(1/τ)(B_mx ǔ_x + B_my ǔ_y)` in the matrix rows.
    pub fn coupling(&self, tau: f64) -> CsrMatrix {
        let l = self.layout();
        let n = l.total();
        let mut t = TripletBuilder::new(n, n);
        t.push_block(&self.b_mx, 0, l.u_x().start, 1.0 / tau);
        t.push_block(&self.b_my, 0, l.u_y().start, 1.0 / tau);
        t.build()
    }

    /// Diagonal of `M` over all unknowns (zero on displacements).
    pub fn mass(&self) -> Vec<f64> {
        let mut m = self.m_m.clone();
        m.extend_from_slice(&self.m_f);
        m.resize(self.layout().total(), 0.0);
        m
    }

    /// Writes each block as a Matrix Market file into `dir`.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let blocks: [(&str, &CsrMatrix); 14] = [
            ("A_m", &self.a_m),
            ("A_f", &self.a_f),
            ("Q_mm", &self.exchange.mm),
            ("Q_mf", &self.exchange.mf),
            ("Q_fm", &self.exchange.fm),
            ("Q_ff", &self.exchange.ff),
            ("D_x", &self.elasticity.xx),
            ("D_y", &self.elasticity.yy),
            ("D_xy", &self.elasticity.xy),
            ("B_mx", &self.b_mx),
            ("B_my", &self.b_my),
            ("B_fx", &self.b_fx),
            ("B_fy", &self.b_fy),
            ("M_m", &CsrMatrix::from_diagonal(&self.m_m)),
        ];
        for (name, m) in blocks {
            m.write_matrix_market(&dir.join(format!("{name}.mtx")))?;
        }
        CsrMatrix::from_diagonal(&self.m_f).write_matrix_market(&dir.join("M_f.mtx"))
    }
}

/// One implicit step `(M/τ + A) y = F(y̌)` with fixed unknowns eliminated.
#[derive(Debug, Clone)]
pub struct StepOperator {
    lhs: CsrMatrix,
    mass: Vec<f64>,
    coupling: CsrMatrix,
    load: Vec<f64>,
    tau: f64,
    fixed: Vec<(usize, f64)>,
    /// Load after elimination: `F - A[:, fixed] g`, and `diag · g` on fixed rows.
    base: Vec<f64>,
}

impl StepOperator {
    pub fn new(
        operator: &CsrMatrix,
        mass: Vec<f64>,
        coupling: CsrMatrix,
        load: Vec<f64>,
        tau: f64,
        mut fixed: Vec<(usize, f64)>,
    ) -> Result<Self> {
        let n = operator.nrows();
        if operator.ncols() != n || mass.len() != n || load.len() != n || coupling.shape() != (n, n) {
            return Err(Error::Assembly(format!(
                "inconsistent step dimensions: operator {:?}, mass {}, load {}, coupling {:?}",
                operator.shape(),
                mass.len(),
                load.len(),
                coupling.shape()
            )));
        }
        if !(tau > 0.0) {
            return Err(Error::invalid("time step must be positive"));
        }
        fixed.sort_by_key(|f| f.0);
        fixed.dedup_by_key(|f| f.0);
        let mut value = vec![None; n];
        for &(d, g) in &fixed {
            if d >= n {
                return Err(Error::Assembly(format!("constrained unknown {d} out of range {n}")));
            }
            value[d] = Some(g);
        }

        let mut base = load.clone();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let (cols, vals) = operator.row(i);
            let mut diag = mass[i] / tau;
            let mut row = Vec::with_capacity(cols.len() + 1);
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    diag += v;
                } else if let Some(g) = value[j] {
                    base[i] -= v * g;
                } else if value[i].is_none() {
                    row.push((j, v));
                }
            }
            if let Some(g) = value[i] {
                if diag == 0.0 {
                    return Err(Error::Assembly(format!("constrained unknown {i} has a zero diagonal")));
                }
                base[i] = diag * g;
                row.clear();
            }
            row.push((i, diag));
            row.sort_by_key(|e| e.0);
            rows.push(row);
        }
        Ok(Self {
            lhs: CsrMatrix::from_rows(n, rows),
            mass,
            coupling,
            load,
            tau,
            fixed,
            base,
        })
    }

    pub fn dim(&self) -> usize {
        self.lhs.nrows()
    }

    pub fn lhs(&self) -> &CsrMatrix {
        &self.lhs
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn coupling(&self) -> &CsrMatrix {
        &self.coupling
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn fixed(&self) -> &[(usize, f64)] {
        &self.fixed
    }

    /// Time-independent part of the right-hand side after elimination.
    pub fn base_rhs(&self) -> &[f64] {
        &self.base
    }

    pub fn rhs(&self, prev: &[f64]) -> Vec<f64> {
        let mut f = self.coupling.mul_vec(prev);
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += self.base[i] + self.mass[i] * prev[i] / self.tau;
        }
        for &(d, _) in &self.fixed {
            f[d] = self.base[d];
        }
        f
    }
}

/// Fine-grid system ready for time stepping.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub layout: DofLayout,
    pub blocks: BlockOperator,
    /// Coupled operator `A` without storage and before constraint elimination.
    pub operator: CsrMatrix,
    pub step: StepOperator,
    pub constraints: Vec<DisplacementConstraint>,
}

/// Assembles blocks and the implicit step with the given matrix sources.
pub fn assemble_system(
    mesh: &FineMesh,
    fr: &FractureSet,
    mp: &MaterialParams,
    tau: f64,
    sources: &[f64],
    constraints: &[DisplacementConstraint],
) -> Result<AssembledSystem> {
    let blocks = BlockOperator::assemble(mesh, fr, mp)?;
    let layout = blocks.layout();
    if sources.len() != layout.n_m {
        return Err(Error::Assembly(format!(
            "source vector has {} entries for {} matrix cells",
            sources.len(),
            layout.n_m
        )));
    }
    let operator = blocks.operator(tau);
    let mut load = vec![0.0; layout.total()];
    load[..layout.n_m].copy_from_slice(sources);
    let mut fixed = Vec::with_capacity(constraints.len());
    for c in constraints {
        if c.vertex >= layout.n_v {
            return Err(Error::Assembly(format!("constraint on missing vertex {}", c.vertex)));
        }
        fixed.push((c.dof(&layout), c.value));
    }
    let step = StepOperator::new(&operator, blocks.mass(), blocks.coupling(tau), load, tau, fixed)?;
    Ok(AssembledSystem {
        layout,
        blocks,
        operator,
        step,
        constraints: constraints.to_vec(),
    })
}
