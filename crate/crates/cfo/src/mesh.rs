//! Conforming triangulations of axis-aligned rectangles.
//!
//! Triangles are stored counterclockwise. Every edge is stored once with its
//! endpoints sorted (`a < b`) and carries a fixed unit normal obtained by
//! rotating the tangent `a -> b` clockwise. For each (element, edge) pair the
//! sign `s = +1` if that normal points out of the element and `-1` otherwise;
//! the element with `s = +1` is called the left neighbor of the edge, the
//! other one the right neighbor. These conventions make jump and flux
//! bookkeeping downstream purely combinatorial.

use crate::vec2;
use crate::{CfoError, Point, Result};
use std::collections::HashMap;

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Rect> {
        if !(x0 < x1 && y0 < y1) || !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(CfoError::Mesh(format!(
                "degenerate domain [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn unit() -> Rect {
        Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// One edge of an element: global edge index plus the orientation sign of the
/// stored edge normal relative to this element's outward normal.
#[derive(Debug, Clone, Copy)]
pub struct ElemEdge {
    pub edge: usize,
    pub sign: f64,
}

/// Conforming triangulation with oriented-edge connectivity.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Bounding rectangle the mesh was built on.
    pub domain: Rect,
    pub nodes: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Sorted endpoint pairs, `edges[e][0] < edges[e][1]`.
    pub edges: Vec<[usize; 2]>,
    /// Unit normal per edge: tangent `a -> b` rotated clockwise.
    pub edge_normal: Vec<Point>,
    /// Local edge slot `k` of a triangle joins local vertices `k` and
    /// `(k + 1) % 3`.
    pub elem_edges: Vec<[ElemEdge; 3]>,
    /// Adjacent element with `sign = +1`, if any.
    pub edge_left: Vec<Option<usize>>,
    /// Adjacent element with `sign = -1`, if any.
    pub edge_right: Vec<Option<usize>>,
    pub edge_boundary: Vec<bool>,
    pub node_boundary: Vec<bool>,
    /// Element areas (positive).
    pub area: Vec<f64>,
    /// Element diameters (longest edge).
    pub diam: Vec<f64>,
    pub edge_len: Vec<f64>,
}

/// Unit normal of the directed edge `a -> b`: the tangent rotated clockwise.
/// Requires `a < b` so every edge has a single well-defined normal.
pub fn edge_orientation(a: usize, b: usize, coords: &[Point]) -> Result<Point> {
    if a >= b {
        return Err(CfoError::Mesh(format!(
            "edge endpoints must satisfy a < b, got ({a}, {b})"
        )));
    }
    let t = vec2::sub(coords[b], coords[a]);
    let len = vec2::norm(t);
    if len == 0.0 {
        return Err(CfoError::Mesh(format!(
            "edge ({a}, {b}) has coincident endpoints"
        )));
    }
    Ok([t[1] / len, -t[0] / len])
}

impl Mesh {
    /// Assemble connectivity from raw node/triangle lists. Validates positive
    /// orientation, manifoldness (at most two elements per edge), and that
    /// the triangulation is a simply connected disk (Euler characteristic).
    pub fn build(domain: Rect, nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        let nn = nodes.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nn {
                    return Err(CfoError::Mesh(format!(
                        "triangle {t} references node {v} out of {nn}"
                    )));
                }
            }
        }

        let mut area = Vec::with_capacity(triangles.len());
        let mut diam = Vec::with_capacity(triangles.len());
        for (t, &[a, b, c]) in triangles.iter().enumerate() {
            let signed = 0.5 * vec2::cross(vec2::sub(nodes[b], nodes[a]), vec2::sub(nodes[c], nodes[a]));
            if !(signed > 0.0) {
                return Err(CfoError::Mesh(format!(
                    "triangle {t} has nonpositive area {signed:.3e}"
                )));
            }
            area.push(signed);
            let l0 = vec2::norm(vec2::sub(nodes[b], nodes[a]));
            let l1 = vec2::norm(vec2::sub(nodes[c], nodes[b]));
            let l2 = vec2::norm(vec2::sub(nodes[a], nodes[c]));
            diam.push(l0.max(l1).max(l2));
        }

        // Number edges by sorted endpoint pair so the layout is independent
        // of element traversal order.
        let mut keys: Vec<[usize; 2]> = Vec::with_capacity(3 * triangles.len());
        for tri in &triangles {
            for k in 0..3 {
                let (p, q) = (tri[k], tri[(k + 1) % 3]);
                keys.push(if p < q { [p, q] } else { [q, p] });
            }
        }
        keys.sort_unstable();
        keys.dedup();
        let edges = keys;
        let index: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, &k)| (k, i)).collect();

        let mut edge_normal = Vec::with_capacity(edges.len());
        let mut edge_len = Vec::with_capacity(edges.len());
        for &[a, b] in &edges {
            edge_normal.push(edge_orientation(a, b, &nodes)?);
            edge_len.push(vec2::norm(vec2::sub(nodes[b], nodes[a])));
        }

        let mut elem_edges = Vec::with_capacity(triangles.len());
        let mut edge_left: Vec<Option<usize>> = vec![None; edges.len()];
        let mut edge_right: Vec<Option<usize>> = vec![None; edges.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [ElemEdge { edge: 0, sign: 0.0 }; 3];
            for k in 0..3 {
                let (p, q) = (tri[k], tri[(k + 1) % 3]);
                // CCW traversal means the outward normal is the clockwise
                // rotation of p -> q; it matches the stored normal exactly
                // when the traversal runs from the smaller to the larger
                // node index.
                let (key, sign) = if p < q { ([p, q], 1.0) } else { ([q, p], -1.0) };
                let e = index[&key];
                local[k] = ElemEdge { edge: e, sign };
                let slot = if sign > 0.0 {
                    &mut edge_left[e]
                } else {
                    &mut edge_right[e]
                };
                if slot.is_some() {
                    return Err(CfoError::Mesh(format!(
                        "edge ({}, {}) is shared by more than two elements or inconsistently oriented",
                        key[0], key[1]
                    )));
                }
                *slot = Some(t);
            }
            elem_edges.push(local);
        }

        let mut edge_boundary = vec![false; edges.len()];
        let mut node_boundary = vec![false; nn];
        for e in 0..edges.len() {
            let adj = edge_left[e].is_some() as usize + edge_right[e].is_some() as usize;
            if adj == 0 {
                return Err(CfoError::Mesh(format!("edge {e} has no adjacent element")));
            }
            if adj == 1 {
                edge_boundary[e] = true;
                node_boundary[edges[e][0]] = true;
                node_boundary[edges[e][1]] = true;
            }
        }

        // Euler characteristic of a triangulated disk.
        if nn + triangles.len() != edges.len() + 1 {
            return Err(CfoError::Mesh(format!(
                "triangulation is not a simply connected disk: {} nodes, {} edges, {} triangles",
                nn,
                edges.len(),
                triangles.len()
            )));
        }

        Ok(Mesh {
            domain,
            nodes,
            triangles,
            edges,
            edge_normal,
            elem_edges,
            edge_left,
            edge_right,
            edge_boundary,
            node_boundary,
            area,
            diam,
            edge_len,
        })
    }

    /// Uniform `n x n` grid of squares, each split along the diagonal from
    /// its lower-left to its upper-right corner: `2 n^2` triangles,
    /// `(n + 1)^2` nodes, `3 n^2 + 2 n` edges.
    pub fn build_uniform(domain: Rect, n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(CfoError::Mesh("mesh resolution must be at least 1".into()));
        }
        let (nodes, triangles) = uniform_cells(domain, n);
        Mesh::build(domain, nodes, triangles)
    }

    /// Uniform grid with interior nodes displaced pseudo-randomly inside a
    /// disc of radius `magnitude * h` (`h` = cell side). The generator is a
    /// fixed 64-bit linear congruential sequence, so the mesh is a pure
    /// function of `(domain, n, magnitude, seed)`. Displacements that create
    /// inverted elements are halved and retried, at most eight times.
    pub fn build_perturbed(domain: Rect, n: usize, magnitude: f64, seed: u64) -> Result<Mesh> {
        if n == 0 {
            return Err(CfoError::Mesh("mesh resolution must be at least 1".into()));
        }
        if !(0.0..=0.3).contains(&magnitude) {
            return Err(CfoError::Mesh(format!(
                "perturbation magnitude {magnitude} outside [0, 0.3]"
            )));
        }
        let (base, triangles) = uniform_cells(domain, n);
        if magnitude == 0.0 {
            return Mesh::build(domain, base, triangles);
        }

        let hx = domain.width() / n as f64;
        let hy = domain.height() / n as f64;
        let h = hx.min(hy);
        let mut rng = Lcg::new(seed);
        // Two draws per node, in node order, whether or not the node moves;
        // this keeps the stream layout independent of which nodes are
        // interior.
        let mut disp = vec![[0.0f64; 2]; base.len()];
        for j in 0..=n {
            for i in 0..=n {
                let u1 = rng.next01();
                let u2 = rng.next01();
                if i > 0 && i < n && j > 0 && j < n {
                    let r = magnitude * h * u1.sqrt();
                    let theta = 2.0 * std::f64::consts::PI * u2;
                    disp[j * (n + 1) + i] = [r * theta.cos(), r * theta.sin()];
                }
            }
        }

        let mut scale = vec![1.0f64; base.len()];
        for attempt in 0..=8 {
            let nodes: Vec<Point> = base
                .iter()
                .zip(&disp)
                .zip(&scale)
                .map(|((&p, &d), &s)| [p[0] + s * d[0], p[1] + s * d[1]])
                .collect();
            let mut bad = Vec::new();
            for &[a, b, c] in &triangles {
                let signed =
                    vec2::cross(vec2::sub(nodes[b], nodes[a]), vec2::sub(nodes[c], nodes[a]));
                if signed <= 1e-12 * h * h {
                    bad.push([a, b, c]);
                }
            }
            if bad.is_empty() {
                return Mesh::build(domain, nodes, triangles);
            }
            if attempt == 8 {
                return Err(CfoError::Mesh(format!(
                    "perturbation produced {} inverted elements even after 8 halvings",
                    bad.len()
                )));
            }
            for tri in bad {
                for v in tri {
                    scale[v] *= 0.5;
                }
            }
        }
        unreachable!("perturbation retry loop returns or errors");
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Vertex coordinates of element `t`.
    pub fn tri_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.tri_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_points(&self, e: usize) -> (Point, Point) {
        let [a, b] = self.edges[e];
        (self.nodes[a], self.nodes[b])
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let (a, b) = self.edge_points(e);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Gradients of the three nodal hat functions on element `t`. The hat
    /// function of local vertex `i` is affine with value 1 at that vertex and
    /// 0 at the other two.
    pub fn p1_gradients(&self, t: usize) -> [Point; 3] {
        let p = self.tri_points(t);
        let two_a = 2.0 * self.area[t];
        let mut g = [[0.0; 2]; 3];
        for i in 0..3 {
            let pj = p[(i + 1) % 3];
            let pk = p[(i + 2) % 3];
            g[i] = [(pj[1] - pk[1]) / two_a, (pk[0] - pj[0]) / two_a];
        }
        g
    }

    /// Evaluate the hat function of local vertex `i` of element `t` at `x`.
    pub fn p1_value(&self, t: usize, i: usize, x: Point) -> f64 {
        let g = self.p1_gradients(t);
        let p = self.tri_points(t);
        1.0 + vec2::dot(g[i], vec2::sub(x, p[i]))
    }
}

fn uniform_cells(domain: Rect, n: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let hx = domain.width() / n as f64;
    let hy = domain.height() / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([domain.x0 + i as f64 * hx, domain.y0 + j as f64 * hy]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = idx(i, j);
            let v10 = idx(i + 1, j);
            let v11 = idx(i + 1, j + 1);
            let v01 = idx(i, j + 1);
            // Split along the lower-left -> upper-right diagonal.
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    (nodes, triangles)
}

/// Minimal 64-bit linear congruential generator (multiplier/increment from
/// the usual 64-bit mixed congruential tables); `next01` yields uniform
/// doubles in `[0, 1)` from the top 53 bits.
#[derive(Debug, Clone)]
pub(crate) struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Lcg {
        Lcg { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.state
    }

    pub fn next01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`; only tests need it.
    #[cfg(test)]
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next01()
    }
}
