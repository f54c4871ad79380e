use crate::error::{Error, Result};
use crate::geometry::{FineMesh, FractureSet};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// P1 elasticity stiffness split by displacement component:
/// the full operator is `[[xx, xy], [xyᵀ, yy]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticityBlocks {
    pub xx: CsrMatrix,
    pub yy: CsrMatrix,
    pub xy: CsrMatrix,
}

impl ElasticityBlocks {
    /// The `2 N_v × 2 N_v` operator with x-components first.
    pub fn full(&self) -> CsrMatrix {
        let n = self.xx.nrows();
        let mut t = TripletBuilder::with_capacity(2 * n, 2 * n, 4 * self.xx.nnz());
        t.push_block(&self.xx, 0, 0, 1.0);
        t.push_block(&self.xy, 0, n, 1.0);
        t.push_block_transposed(&self.xy, n, 0, 1.0);
        t.push_block(&self.yy, n, n, 1.0);
        t.build()
    }
}

/// Assembles `∫ λ div u div v + 2μ ε(u):ε(v)` with linear triangles.
pub fn elasticity_stiffness(mesh: &FineMesh, mu: f64, lambda: f64) -> Result<ElasticityBlocks> {
    let n = mesh.n_vertices();
    let cap = 9 * mesh.n_cells();
    let mut xx = TripletBuilder::with_capacity(n, n, cap);
    let mut yy = TripletBuilder::with_capacity(n, n, cap);
    let mut xy = TripletBuilder::with_capacity(n, n, cap);
    let l2m = lambda + 2.0 * mu;
    for (c, verts) in mesh.cells().iter().enumerate() {
        let area = mesh.areas()[c];
        if !(area > 0.0) {
            return Err(Error::Assembly(format!("cell {c} has non-positive area {area}")));
        }
        let g = mesh.hat_gradients(c);
        for a in 0..3 {
            for b in 0..3 {
                let (va, vb) = (verts[a], verts[b]);
                let (ax, ay) = (g[a][0], g[a][1]);
                let (bx, by) = (g[b][0], g[b][1]);
                xx.push(va, vb, area * (l2m * ax * bx + mu * ay * by));
                yy.push(va, vb, area * (l2m * ay * by + mu * ax * bx));
                // row: x-test at a, column: y-trial at b
                xy.push(va, vb, area * (lambda * ax * by + mu * ay * bx));
            }
        }
    }
    Ok(ElasticityBlocks {
        xx: xx.build(),
        yy: yy.build(),
        xy: xy.build(),
    })
}

/// Pressure–strain coupling: entry `(i, j) = α ∫_{ς_i} ∂ψ_j/∂x` (and `∂/∂y`).
pub fn biot_coupling(mesh: &FineMesh, alpha: f64) -> (CsrMatrix, CsrMatrix) {
    let (nc, nv) = (mesh.n_cells(), mesh.n_vertices());
    let mut bx = TripletBuilder::with_capacity(nc, nv, 3 * nc);
    let mut by = TripletBuilder::with_capacity(nc, nv, 3 * nc);
    for (c, verts) in mesh.cells().iter().enumerate() {
        let area = mesh.areas()[c];
        let g = mesh.hat_gradients(c);
        for k in 0..3 {
            bx.push(c, verts[k], alpha * area * g[k][0]);
            by.push(c, verts[k], alpha * area * g[k][1]);
        }
    }
    (bx.build(), by.build())
}

/// Fracture-pressure load on the matrix: entry `(l, j) = -∫_{ι_l} n_x ψ_j ds`
/// (resp. `n_y`), two-point Gauss on each segment.
pub fn fracture_force_coupling(mesh: &FineMesh, fr: &FractureSet) -> (CsrMatrix, CsrMatrix) {
    let (nf, nv) = (fr.n_segments(), mesh.n_vertices());
    let mut bx = TripletBuilder::with_capacity(nf, nv, 3 * nf);
    let mut by = TripletBuilder::with_capacity(nf, nv, 3 * nf);
    let offset = 0.5 / 3f64.sqrt();
    for (l, s) in fr.segments.iter().enumerate() {
        let n = s.normal();
        let verts = mesh.cells()[s.host];
        let mut weights = [0.0; 3];
        for t in [0.5 - offset, 0.5 + offset] {
            let p = [s.a[0] + t * (s.b[0] - s.a[0]), s.a[1] + t * (s.b[1] - s.a[1])];
            let psi = mesh.barycentric(s.host, p);
            for k in 0..3 {
                weights[k] += 0.5 * s.length * psi[k];
            }
        }
        for k in 0..3 {
            bx.push(l, verts[k], -n[0] * weights[k]);
            by.push(l, verts[k], -n[1] * weights[k]);
        }
    }
    (bx.build(), by.build())
}
