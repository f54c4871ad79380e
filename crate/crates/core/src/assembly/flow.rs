use crate::error::{Error, Result};
use crate::geometry::{Face, FineMesh, FractureSet};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Two-point flux matrix of the matrix continuum: `T_ij = b_m |E_ij| / Δ_ij`
/// on every interior face, natural (no-flow) outer boundary.
pub fn tpfa_matrix(mesh: &FineMesh, b_m: f64) -> CsrMatrix {
    tpfa_stencil(mesh.n_cells(), mesh.faces(), b_m)
}

pub fn tpfa_stencil(n: usize, faces: &[Face], b_m: f64) -> CsrMatrix {
    let mut t = TripletBuilder::with_capacity(n, n, 4 * faces.len());
    for f in faces {
        let [i, j] = f.cells;
        let tij = b_m * f.length / f.distance;
        t.push(i, i, tij);
        t.push(j, j, tij);
        t.push(i, j, -tij);
        t.push(j, i, -tij);
    }
    t.build()
}

/// Fracture flow matrix over the segment adjacency: `W_ln = b_f / Δ_ln`.
pub fn fracture_tpfa(fr: &FractureSet, b_f: f64) -> Result<CsrMatrix> {
    let n = fr.n_segments();
    let mut t = TripletBuilder::with_capacity(n, n, 4 * fr.adjacency.len());
    for link in &fr.adjacency {
        if !(link.distance > 0.0) {
            return Err(Error::Assembly(format!(
                "segments {} and {} have coincident midpoints",
                link.l, link.n
            )));
        }
        let w = b_f / link.distance;
        t.push(link.l, link.l, w);
        t.push(link.n, link.n, w);
        t.push(link.l, link.n, -w);
        t.push(link.n, link.l, -w);
    }
    Ok(t.build())
}

/// Matrix–fracture transfer blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeBlocks {
    pub mm: CsrMatrix,
    pub mf: CsrMatrix,
    pub fm: CsrMatrix,
    pub ff: CsrMatrix,
}

/// Every segment exchanges with its host cell with coefficient `β`.
pub fn exchange_matrix(n_cells: usize, fr: &FractureSet, beta: f64) -> ExchangeBlocks {
    let n_f = fr.n_segments();
    let mut mm = TripletBuilder::new(n_cells, n_cells);
    let mut mf = TripletBuilder::new(n_cells, n_f);
    let mut fm = TripletBuilder::new(n_f, n_cells);
    let mut ff = TripletBuilder::new(n_f, n_f);
    for (l, s) in fr.segments.iter().enumerate() {
        let i = s.host;
        mm.push(i, i, beta);
        ff.push(l, l, beta);
        mf.push(i, l, -beta);
        fm.push(l, i, -beta);
    }
    ExchangeBlocks {
        mm: mm.build(),
        mf: mf.build(),
        fm: fm.build(),
        ff: ff.build(),
    }
}

/// Diagonal storage `a_m |ς_i|`.
pub fn matrix_mass(mesh: &FineMesh, a_m: f64) -> Vec<f64> {
    mesh.areas().iter().map(|&a| a_m * a).collect()
}

/// Diagonal storage `a_f |ι_l|`.
pub fn fracture_mass(fr: &FractureSet, a_f: f64) -> Vec<f64> {
    fr.segments.iter().map(|s| a_f * s.length).collect()
}
