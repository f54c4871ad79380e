use super::fractures::FractureSet;
use super::mesh::FineMesh;
use crate::error::{Error, Result};

/// A connected piece of one fracture network inside one coarse cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Continuum {
    pub coarse_cell: usize,
    pub network: usize,
    pub segments: Vec<usize>,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Uniform coarse partition conforming to the fine mesh. Coarse cell
/// `(I, J)` has index `J * nx + I`.
#[derive(Debug, Clone)]
pub struct CoarseGrid {
    nx: usize,
    ny: usize,
    /// Fine rectangles per coarse cell along x and y.
    ratio: (usize, usize),
    cells: Vec<Rect>,
    fine_to_coarse: Vec<usize>,
    fine_cells: Vec<Vec<usize>>,
    continua: Vec<Continuum>,
    cell_continua: Vec<Vec<usize>>,
    segment_continuum: Vec<usize>,
}

impl CoarseGrid {
    pub fn build(mesh: &FineMesh, fractures: &FractureSet, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("coarse subdivisions must be positive"));
        }
        if mesh.nx() % nx != 0 || mesh.ny() % ny != 0 {
            return Err(Error::invalid(format!(
                "fine grid {}x{} does not conform to coarse grid {nx}x{ny}",
                mesh.nx(),
                mesh.ny()
            )));
        }
        let ratio = (mesh.nx() / nx, mesh.ny() / ny);
        let (hx, hy) = (mesh.width() / nx as f64, mesh.height() / ny as f64);
        let mut cells = Vec::with_capacity(nx * ny);
        for cj in 0..ny {
            for ci in 0..nx {
                cells.push(Rect {
                    x0: ci as f64 * hx,
                    y0: cj as f64 * hy,
                    x1: if ci + 1 == nx { mesh.width() } else { (ci + 1) as f64 * hx },
                    y1: if cj + 1 == ny { mesh.height() } else { (cj + 1) as f64 * hy },
                });
            }
        }

        let mut fine_to_coarse = Vec::with_capacity(mesh.n_cells());
        let mut fine_cells = vec![Vec::new(); nx * ny];
        for c in 0..mesh.n_cells() {
            let (i, j) = mesh.rect_of_cell(c);
            let k = (j / ratio.1) * nx + i / ratio.0;
            fine_to_coarse.push(k);
            fine_cells[k].push(c);
        }

        // union-find over links whose endpoints live in the same coarse cell
        let n_seg = fractures.n_segments();
        let seg_cell: Vec<usize> = fractures
            .segments
            .iter()
            .map(|s| fine_to_coarse[s.host])
            .collect();
        let mut dsu = DisjointSets::new(n_seg);
        for link in &fractures.adjacency {
            if seg_cell[link.l] == seg_cell[link.n] {
                dsu.union(link.l, link.n);
            }
        }
        // a component is identified by its smallest segment id; continua are
        // ordered by coarse cell, then by that id
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_seg];
        for l in 0..n_seg {
            members[dsu.find(l)].push(l);
        }
        let mut comps: Vec<Vec<usize>> = members.into_iter().filter(|m| !m.is_empty()).collect();
        comps.sort_by_key(|m| (seg_cell[m[0]], m[0]));

        let mut continua = Vec::with_capacity(comps.len());
        let mut cell_continua = vec![Vec::new(); nx * ny];
        let mut segment_continuum = vec![usize::MAX; n_seg];
        for segs in comps {
            let k = seg_cell[segs[0]];
            let id = continua.len();
            for &l in &segs {
                segment_continuum[l] = id;
            }
            cell_continua[k].push(id);
            continua.push(Continuum {
                coarse_cell: k,
                network: fractures.segments[segs[0]].network,
                length: segs.iter().map(|&l| fractures.segments[l].length).sum(),
                segments: segs,
            });
        }

        Ok(Self {
            nx,
            ny,
            ratio,
            cells,
            fine_to_coarse,
            fine_cells,
            continua,
            cell_continua,
            segment_continuum,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn ratio(&self) -> (usize, usize) {
        self.ratio
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Rect] {
        &self.cells
    }

    pub fn cell_ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn fine_to_coarse(&self) -> &[usize] {
        &self.fine_to_coarse
    }

    pub fn fine_cells(&self, k: usize) -> &[usize] {
        &self.fine_cells[k]
    }

    pub fn continua(&self) -> &[Continuum] {
        &self.continua
    }

    /// Global continuum ids inside coarse cell `k` (`L_k` of them).
    pub fn cell_continua(&self, k: usize) -> &[usize] {
        &self.cell_continua[k]
    }

    pub fn n_continua(&self, k: usize) -> usize {
        self.cell_continua[k].len()
    }

    pub fn segment_continuum(&self) -> &[usize] {
        &self.segment_continuum
    }

    /// `Σ_i (3 + M_i)`.
    pub fn coarse_dofs(&self) -> usize {
        3 * self.n_cells() + self.continua.len()
    }

    /// Coarse cells within Chebyshev distance `s` of cell `k`, ascending.
    pub fn oversample(&self, k: usize, s: usize) -> Vec<usize> {
        let (i0, i1, j0, j1) = self.oversample_bounds(k, s);
        let mut out = Vec::with_capacity((i1 - i0 + 1) * (j1 - j0 + 1));
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.push(j * self.nx + i);
            }
        }
        out
    }

    /// Inclusive coarse index bounds `(i0, i1, j0, j1)` of the oversampled region.
    pub fn oversample_bounds(&self, k: usize, s: usize) -> (usize, usize, usize, usize) {
        let (i, j) = self.cell_ij(k);
        (
            i.saturating_sub(s),
            (i + s).min(self.nx - 1),
            j.saturating_sub(s),
            (j + s).min(self.ny - 1),
        )
    }

    /// Chebyshev distance between two coarse cells in index space.
    pub fn layer_distance(&self, a: usize, b: usize) -> usize {
        let (ai, aj) = self.cell_ij(a);
        let (bi, bj) = self.cell_ij(b);
        ai.abs_diff(bi).max(aj.abs_diff(bj))
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // smaller root wins so roots are deterministic
        if ra < rb {
            self.parent[rb] = ra;
        } else if rb < ra {
            self.parent[ra] = rb;
        }
    }
}
