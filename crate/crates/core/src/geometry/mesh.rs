use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Interior face between two triangles, with the two-point flux geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub cells: [usize; 2],
    /// Interface length `|E_ij|`.
    pub length: f64,
    /// Centroid-to-centroid distance `Δ_ij`.
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryTags {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub bottom: Vec<usize>,
    pub top: Vec<usize>,
}

/// Structured triangulation of the rectangle `[0, width] × [0, height]`.
///
/// Vertex `(i, j)` has index `j * (nx + 1) + i`. Rectangle `(i, j)` is split
/// along its lower-left to upper-right diagonal into cell `2 * (j * nx + i)`
/// (below the diagonal) and cell `2 * (j * nx + i) + 1` (above it).
#[derive(Debug, Clone)]
pub struct FineMesh {
    nx: usize,
    ny: usize,
    width: f64,
    height: f64,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    faces: Vec<Face>,
    boundary: BoundaryTags,
    areas: Vec<f64>,
    centroids: Vec<Point>,
}

impl FineMesh {
    pub fn structured(nx: usize, ny: usize, width: f64, height: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!(
                "mesh subdivisions must be positive, got {nx}x{ny}"
            )));
        }
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::invalid(format!(
                "domain size must be positive, got {width}x{height}"
            )));
        }
        let hx = width / nx as f64;
        let hy = height / ny as f64;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // last row/column pinned to the exact extent
                let x = if i == nx { width } else { i as f64 * hx };
                let y = if j == ny { height } else { j as f64 * hy };
                vertices.push([x, y]);
            }
        }

        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut areas = Vec::with_capacity(cells.len());
        let mut centroids = Vec::with_capacity(cells.len());
        for c in &cells {
            let [a, b, d] = c.map(|v| vertices[v]);
            areas.push(0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1])));
            centroids.push([(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]);
        }

        let edge_len = |a: usize, b: usize| {
            let (p, q) = (vertices[a], vertices[b]);
            (q[0] - p[0]).hypot(q[1] - p[1])
        };
        let dist = |a: usize, b: usize| {
            let (p, q) = (centroids[a], centroids[b]);
            (q[0] - p[0]).hypot(q[1] - p[1])
        };
        let mut faces = Vec::with_capacity(3 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let lower = 2 * (j * nx + i);
                let upper = lower + 1;
                faces.push(Face {
                    cells: [lower, upper],
                    length: edge_len(vid(i, j), vid(i + 1, j + 1)),
                    distance: dist(lower, upper),
                });
                if i + 1 < nx {
                    // right side of this rectangle belongs to the lower triangle,
                    // left side of the neighbour to its upper triangle
                    let other = 2 * (j * nx + i + 1) + 1;
                    faces.push(Face {
                        cells: [lower, other],
                        length: edge_len(vid(i + 1, j), vid(i + 1, j + 1)),
                        distance: dist(lower, other),
                    });
                }
                if j + 1 < ny {
                    let other = 2 * ((j + 1) * nx + i);
                    faces.push(Face {
                        cells: [upper, other],
                        length: edge_len(vid(i, j + 1), vid(i + 1, j + 1)),
                        distance: dist(upper, other),
                    });
                }
            }
        }

        let boundary = BoundaryTags {
            left: (0..=ny).map(|j| vid(0, j)).collect(),
            right: (0..=ny).map(|j| vid(nx, j)).collect(),
            bottom: (0..=nx).map(|i| vid(i, 0)).collect(),
            top: (0..=nx).map(|i| vid(i, ny)).collect(),
        };

        Ok(Self {
            nx,
            ny,
            width,
            height,
            vertices,
            cells,
            faces,
            boundary,
            areas,
            centroids,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn hx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.height / self.ny as f64
    }

    /// Characteristic fine cell size, `min(hx, hy)`.
    pub fn cell_size(&self) -> f64 {
        self.hx().min(self.hy())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn boundary(&self) -> &BoundaryTags {
        &self.boundary
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn centroids(&self) -> &[Point] {
        &self.centroids
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Rectangle `(i, j)` a cell belongs to.
    pub fn rect_of_cell(&self, cell: usize) -> (usize, usize) {
        let r = cell / 2;
        (r % self.nx, r / self.nx)
    }

    pub fn vertex_ij(&self, v: usize) -> (usize, usize) {
        (v % (self.nx + 1), v / (self.nx + 1))
    }

    /// Constant gradients of the three P1 hat functions of `cell`.
    pub fn hat_gradients(&self, cell: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.cells[cell].map(|v| self.vertices[v]);
        let two_area = 2.0 * self.areas[cell];
        [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ]
    }

    pub fn barycentric(&self, cell: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.cells[cell].map(|v| self.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Smallest-index cell whose closure contains `p`, or `None` outside the domain.
    pub fn locate(&self, p: Point) -> Option<usize> {
        const BARY_TOL: f64 = 1e-10;
        let (hx, hy) = (self.hx(), self.hy());
        let tol = 1e-12;
        let range = |coord: f64, h: f64, n: usize| -> Option<(usize, usize)> {
            let lo = ((coord / h) - tol).floor();
            let hi = ((coord / h) + tol).floor();
            if hi < 0.0 || lo > (n - 1) as f64 + 1.0 {
                return None;
            }
            let lo = lo.max(0.0) as usize;
            let hi = (hi.max(0.0) as usize).min(n - 1);
            (lo <= hi).then_some((lo, hi))
        };
        let (i0, i1) = range(p[0], hx, self.nx)?;
        let (j0, j1) = range(p[1], hy, self.ny)?;
        let mut best: Option<usize> = None;
        for j in j0..=j1 {
            for i in i0..=i1 {
                for k in 0..2 {
                    let cell = 2 * (j * self.nx + i) + k;
                    if self.barycentric(cell, p).iter().all(|&l| l >= -BARY_TOL) {
                        best = Some(best.map_or(cell, |b: usize| b.min(cell)));
                    }
                }
            }
        }
        best
    }

    /// Exact integral of each cell's hat functions: `|T| / 3` per vertex.
    pub fn vertex_weights_in(&self, cells: impl IntoIterator<Item = usize>) -> Vec<(usize, f64)> {
        let mut acc: Vec<(usize, f64)> = Vec::new();
        for c in cells {
            for &v in &self.cells[c] {
                acc.push((v, self.areas[c] / 3.0));
            }
        }
        acc.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
        for (v, w) in acc {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => out.push((v, w)),
            }
        }
        out
    }
}
