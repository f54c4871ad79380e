//! Fracture polylines clipped into the lower-dimensional fracture mesh.

use std::collections::HashMap;

use super::mesh::{FineMesh, Point};
use crate::error::{Error, Result};

pub type Polyline = Vec<Point>;

/// Relative length below which a clipped piece is merged into its neighbour.
pub const MIN_SEGMENT_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub network: usize,
    pub a: Point,
    pub b: Point,
    pub length: f64,
    /// Fine cell whose closure contains the segment.
    pub host: usize,
}

impl Segment {
    pub fn midpoint(&self) -> Point {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }

    /// Unit normal: the direction `b - a` rotated 90° counterclockwise.
    pub fn normal(&self) -> Point {
        let (dx, dy) = (self.b[0] - self.a[0], self.b[1] - self.a[1]);
        [-dy / self.length, dx / self.length]
    }
}

/// Link between two segments of the same network sharing an endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentLink {
    pub l: usize,
    pub n: usize,
    /// Midpoint-to-midpoint distance `Δ_ln`.
    pub distance: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FractureSet {
    /// Retained networks, each a set of polylines clipped to the domain.
    pub networks: Vec<Vec<Polyline>>,
    /// Input index of each retained network.
    pub source_index: Vec<usize>,
    pub segments: Vec<Segment>,
    pub adjacency: Vec<SegmentLink>,
    /// Human-readable notes about dropped input.
    pub warnings: Vec<String>,
}

impl FractureSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn n_networks(&self) -> usize {
        self.networks.len()
    }

    pub fn network_lengths(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.networks.len()];
        for s in &self.segments {
            out[s.network] += s.length;
        }
        out
    }

    /// Each network's segments re-expressed as two-point polylines.
    pub fn segment_polylines(&self) -> Vec<Vec<Polyline>> {
        let mut out = vec![Vec::new(); self.networks.len()];
        for s in &self.segments {
            out[s.network].push(vec![s.a, s.b]);
        }
        out
    }
}

/// Embeds one network per polyline.
pub fn embed_fractures(mesh: &FineMesh, polylines: &[Polyline]) -> Result<FractureSet> {
    let networks: Vec<Vec<Polyline>> = polylines.iter().map(|p| vec![p.clone()]).collect();
    embed_networks(mesh, &networks)
}

/// Embeds networks made of one or more polylines. Polylines of one network
/// that share an endpoint become connected.
pub fn embed_networks(mesh: &FineMesh, networks: &[Vec<Polyline>]) -> Result<FractureSet> {
    let min_len = MIN_SEGMENT_FRACTION * mesh.cell_size();
    let mut out = FractureSet::empty();

    for (input_idx, network) in networks.iter().enumerate() {
        for poly in network {
            if poly.len() < 2 {
                return Err(Error::invalid(format!(
                    "fracture {input_idx}: a polyline needs at least two points"
                )));
            }
            for w in poly.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::invalid(format!(
                        "fracture {input_idx}: zero-length edge at ({}, {})",
                        w[0][0], w[0][1]
                    )));
                }
            }
        }

        let chains: Vec<Polyline> = network
            .iter()
            .flat_map(|p| clip_polyline(p, mesh.width(), mesh.height()))
            .filter(|c| chain_length(c) > min_len)
            .collect();
        if chains.is_empty() {
            let msg = format!("fracture {input_idx} lies outside the domain and was dropped");
            log::warn!("{msg}");
            out.warnings.push(msg);
            continue;
        }

        let network_id = out.networks.len();
        let first_segment = out.segments.len();
        for chain in &chains {
            let points = split_chain(mesh, chain, min_len);
            let chain_start = out.segments.len();
            for w in points.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let host = mesh.locate(mid).ok_or_else(|| {
                    Error::Assembly(format!(
                        "segment midpoint ({}, {}) is outside the mesh",
                        mid[0], mid[1]
                    ))
                })?;
                out.segments.push(Segment {
                    network: network_id,
                    a,
                    b,
                    length: (b[0] - a[0]).hypot(b[1] - a[1]),
                    host,
                });
            }
            debug_assert!(out.segments.len() > chain_start);
        }
        link_network(&mut out, first_segment);
        out.networks.push(chains);
        out.source_index.push(input_idx);
    }
    Ok(out)
}

/// Connects segments of one network (those from `first` onward) that share
/// an endpoint bit-for-bit. Consecutive pieces of a chain always do.
fn link_network(set: &mut FractureSet, first: usize) {
    let key = |p: Point| (p[0].to_bits(), p[1].to_bits());
    let mut at_point: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    let mut order: Vec<(u64, u64)> = Vec::new();
    for l in first..set.segments.len() {
        for p in [set.segments[l].a, set.segments[l].b] {
            let k = key(p);
            let entry = at_point.entry(k).or_default();
            if entry.is_empty() {
                order.push(k);
            }
            if entry.last() != Some(&l) {
                entry.push(l);
            }
        }
    }
    let mut links: Vec<(usize, usize)> = Vec::new();
    for k in order {
        let segs = &at_point[&k];
        for (x, &l) in segs.iter().enumerate() {
            for &n in &segs[x + 1..] {
                links.push((l.min(n), l.max(n)));
            }
        }
    }
    links.sort_unstable();
    links.dedup();
    for (l, n) in links {
        let (p, q) = (set.segments[l].midpoint(), set.segments[n].midpoint());
        set.adjacency.push(SegmentLink {
            l,
            n,
            distance: (q[0] - p[0]).hypot(q[1] - p[1]),
        });
    }
}

fn chain_length(chain: &[Point]) -> f64 {
    chain
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum()
}

/// Clips a polyline to the box; pieces that leave and re-enter become
/// separate chains.
fn clip_polyline(poly: &[Point], width: f64, height: f64) -> Vec<Polyline> {
    let mut chains: Vec<Polyline> = Vec::new();
    let mut current: Polyline = Vec::new();
    for w in poly.windows(2) {
        match clip_segment(w[0], w[1], width, height) {
            None => {
                if current.len() >= 2 {
                    chains.push(std::mem::take(&mut current));
                }
                current.clear();
            }
            Some((t0, t1)) => {
                let p = lerp(w[0], w[1], t0);
                let q = lerp(w[0], w[1], t1);
                let continues = t0 == 0.0 && current.last() == Some(&w[0]);
                if !continues {
                    if current.len() >= 2 {
                        chains.push(std::mem::take(&mut current));
                    }
                    current.clear();
                    current.push(p);
                }
                current.push(q);
                if t1 < 1.0 {
                    chains.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if current.len() >= 2 {
        chains.push(current);
    }
    chains
}

/// Liang–Barsky clip of `p + t (q - p)` against `[0, w] × [0, h]`.
pub(crate) fn clip_segment(p: Point, q: Point, width: f64, height: f64) -> Option<(f64, f64)> {
    let d = [q[0] - p[0], q[1] - p[1]];
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    let checks = [
        (-d[0], p[0]),
        (d[0], width - p[0]),
        (-d[1], p[1]),
        (d[1], height - p[1]),
    ];
    for (pk, qk) in checks {
        if pk == 0.0 {
            if qk < 0.0 {
                return None;
            }
        } else {
            let r = qk / pk;
            if pk < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 < t1).then_some((t0, t1))
}

#[inline]
pub(crate) fn lerp(p: Point, q: Point, t: f64) -> Point {
    if t == 0.0 {
        p
    } else if t == 1.0 {
        q
    } else {
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    }
}

/// Breakpoints of a chain against every mesh line: verticals `x = i hx`,
/// horizontals `y = j hy` and the diagonals `x/hx - y/hy = k`.
fn split_chain(mesh: &FineMesh, chain: &[Point], min_len: f64) -> Vec<Point> {
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let mut points: Vec<Point> = vec![chain[0]];
    for w in chain.windows(2) {
        let (p, q) = (w[0], w[1]);
        let mut ts: Vec<f64> = Vec::new();
        let families: [(f64, f64); 3] = [
            (p[0] / hx, q[0] / hx),
            (p[1] / hy, q[1] / hy),
            (p[0] / hx - p[1] / hy, q[0] / hx - q[1] / hy),
        ];
        for (f0, f1) in families {
            if f0 == f1 {
                continue;
            }
            let (lo, hi) = if f0 < f1 { (f0, f1) } else { (f1, f0) };
            let mut k = lo.floor() + 1.0;
            while k < hi {
                ts.push((k - f0) / (f1 - f0));
                k += 1.0;
            }
        }
        ts.sort_by(f64::total_cmp);
        for t in ts {
            points.push(lerp(p, q, t));
        }
        points.push(q);
    }

    // merge slivers: drop breakpoints too close to the last kept one
    let dist = |a: Point, b: Point| (b[0] - a[0]).hypot(b[1] - a[1]);
    let last = *points.last().unwrap();
    let mut kept: Vec<Point> = vec![points[0]];
    for &pt in &points[1..points.len() - 1] {
        if dist(*kept.last().unwrap(), pt) > min_len && dist(pt, last) > min_len {
            kept.push(pt);
        }
    }
    kept.push(last);
    kept
}
