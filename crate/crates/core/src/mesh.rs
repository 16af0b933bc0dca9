//! Conforming triangulations of polygonal domains.
//!
//! Every triangle is stored as `[a, b, c]` in counter-clockwise order with
//! the refinement edge `(a, b)` and the newest vertex `c`. Local edge `k` is
//! the edge opposite local vertex `k`, so the refinement edge is local edge 2.
//!
//! Each edge carries a fixed orientation: its first triangle `T+` is the
//! incident triangle with the lower index and the edge normal is the outer
//! normal of `T+`.

use std::collections::HashMap;

use crate::error::MeshError;

pub type Point = [f64; 2];

/// Per-triangle and per-edge geometric data, computed once per mesh.
#[derive(Clone, Debug)]
pub struct GeometryCache {
    pub area: Vec<f64>,
    pub centroid: Vec<Point>,
    pub diameter: Vec<f64>,
    /// Gradients of the three barycentric coordinates.
    pub grad_lambda: Vec<[Point; 3]>,
    pub edge_length: Vec<f64>,
    pub edge_midpoint: Vec<Point>,
    pub edge_normal: Vec<Point>,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    edge_tris: Vec<(usize, Option<usize>)>,
    vertex_boundary: Vec<bool>,
    edge_boundary: Vec<bool>,
    geometry: GeometryCache,
}

/// Parent information produced by a refinement step.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    /// Coarse triangle containing each fine triangle.
    pub parent: Vec<usize>,
    /// Number of vertices of the coarse mesh; fine vertices below this index
    /// coincide with the coarse ones.
    pub coarse_vertices: usize,
    /// Endpoints of the coarse edge bisected by each new vertex, indexed by
    /// `fine_vertex - coarse_vertices`.
    pub new_vertex_parents: Vec<[usize; 2]>,
}

#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: Mesh,
    pub hierarchy: Hierarchy,
}

fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn dist2(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
}

fn midpoint(p: Point, q: Point) -> Point {
    [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
}

fn local_edge(t: &[usize; 3], k: usize) -> (usize, usize) {
    (t[(k + 1) % 3], t[(k + 2) % 3])
}

impl Mesh {
    /// Builds a mesh from counter-clockwise triangles whose refinement edge is
    /// already stored as local edge 2.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(MeshError::VertexOutOfRange { triangle: t });
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a > 0.0) {
                return Err(MeshError::NonPositiveArea { triangle: t, area: a });
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges = Vec::new();
        let mut edge_tris: Vec<(usize, Option<usize>)> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for (k, slot) in te.iter_mut().enumerate() {
                let (p, q) = local_edge(tri, k);
                let key = (p.min(q), p.max(q));
                let e = match lookup.get(&key) {
                    Some(&e) => {
                        match edge_tris[e].1 {
                            None => edge_tris[e].1 = Some(t),
                            Some(_) => return Err(MeshError::NonManifoldEdge { a: key.0, b: key.1 }),
                        }
                        e
                    }
                    None => {
                        let e = edges.len();
                        edges.push([key.0, key.1]);
                        edge_tris.push((t, None));
                        lookup.insert(key, e);
                        e
                    }
                };
                *slot = e;
            }
            tri_edges.push(te);
        }

        let edge_boundary: Vec<bool> = edge_tris.iter().map(|(_, m)| m.is_none()).collect();
        let mut vertex_boundary = vec![false; nv];
        for (e, &b) in edge_boundary.iter().enumerate() {
            if b {
                vertex_boundary[edges[e][0]] = true;
                vertex_boundary[edges[e][1]] = true;
            }
        }

        let geometry = GeometryCache::compute(&vertices, &triangles, &edges, &tri_edges, &edge_tris);
        Ok(Self {
            vertices,
            triangles,
            edges,
            tri_edges,
            edge_tris,
            vertex_boundary,
            edge_boundary,
            geometry,
        })
    }

    /// Builds a mesh from arbitrary triangles: each triangle is oriented
    /// counter-clockwise and rotated so that its longest edge becomes the
    /// refinement edge, ties broken by the smallest opposite vertex index.
    pub fn with_longest_edge_refinement(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        let mut oriented = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.into_iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::VertexOutOfRange { triangle: t });
            }
            let mut tri = tri;
            if signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) < 0.0 {
                tri.swap(0, 1);
            }
            let mut best = 0usize;
            let mut best_len = f64::NEG_INFINITY;
            for k in 0..3 {
                let (p, q) = local_edge(&tri, k);
                let len = dist2(vertices[p], vertices[q]);
                let better = len > best_len * (1.0 + 1e-12)
                    || ((len - best_len).abs() <= 1e-12 * best_len && tri[k] < tri[best]);
                if better {
                    best = k;
                    best_len = len;
                }
            }
            // rotate so that the vertex opposite the longest edge is last
            let rotated = [tri[(best + 1) % 3], tri[(best + 2) % 3], tri[best]];
            oriented.push(rotated);
        }
        Self::new(vertices, oriented)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge indices of each triangle, local edge `k` opposite vertex `k`.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.tri_edges
    }

    /// `(T+, T-)` for each edge; `T-` is `None` on the boundary.
    pub fn edge_triangles(&self) -> &[(usize, Option<usize>)] {
        &self.edge_tris
    }

    pub fn vertex_on_boundary(&self) -> &[bool] {
        &self.vertex_boundary
    }

    pub fn edge_on_boundary(&self) -> &[bool] {
        &self.edge_boundary
    }

    pub fn geometry(&self) -> &GeometryCache {
        &self.geometry
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sign `nu_T . nu_E` of local edge `k` of triangle `t`.
    pub fn edge_sign(&self, t: usize, k: usize) -> f64 {
        if self.edge_tris[self.tri_edges[t][k]].0 == t {
            1.0
        } else {
            -1.0
        }
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.area.iter().sum()
    }

    pub fn h_max(&self) -> f64 {
        self.geometry.diameter.iter().cloned().fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.geometry.diameter.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let tri = self.triangles[t];
        let g = &self.geometry.grad_lambda[t];
        let mut l = [0.0; 3];
        for i in 0..3 {
            // lambda_i vanishes on the opposite edge, which contains vertex i+1
            let p = self.vertices[tri[(i + 1) % 3]];
            l[i] = g[i][0] * (x[0] - p[0]) + g[i][1] * (x[1] - p[1]);
        }
        l
    }

    /// Checks the structural invariants: positive areas, consistent edge
    /// incidence and orientation, and absence of hanging nodes.
    pub fn check_regularity(&self) -> Result<(), MeshError> {
        for (t, &a) in self.geometry.area.iter().enumerate() {
            if !(a > 0.0) {
                return Err(MeshError::NonPositiveArea { triangle: t, area: a });
            }
        }
        for (e, &(tp, tm)) in self.edge_tris.iter().enumerate() {
            if let Some(tm) = tm {
                if tm <= tp {
                    return Err(MeshError::Orientation { edge: e });
                }
            }
            // the stored normal must be the outer normal of T+
            let tri = self.triangles[tp];
            let k = (0..3).find(|&k| self.tri_edges[tp][k] == e).ok_or(MeshError::Orientation { edge: e })?;
            let opp = self.vertices[tri[k]];
            let m = self.geometry.edge_midpoint[e];
            let n = self.geometry.edge_normal[e];
            if n[0] * (m[0] - opp[0]) + n[1] * (m[1] - opp[1]) <= 0.0 {
                return Err(MeshError::Orientation { edge: e });
            }
        }
        if let Some((v, e)) = self.find_hanging_node() {
            return Err(MeshError::HangingNode { vertex: v, edge: e });
        }
        Ok(())
    }

    /// Brute-force scan for a vertex lying in the relative interior of an
    /// edge, using a uniform bucket grid.
    pub fn find_hanging_node(&self) -> Option<(usize, usize)> {
        let nv = self.vertices.len();
        if nv == 0 {
            return None;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let cells = ((nv as f64).sqrt().ceil() as usize).max(1);
        let size = [(hi[0] - lo[0]).max(1e-300) / cells as f64, (hi[1] - lo[1]).max(1e-300) / cells as f64];
        let cell_of = |x: f64, d: usize| (((x - lo[d]) / size[d]).floor().max(0.0) as usize).min(cells - 1);
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
        for (v, p) in self.vertices.iter().enumerate() {
            buckets[cell_of(p[0], 0) * cells + cell_of(p[1], 1)].push(v);
        }
        let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let (i0, i1) = (cell_of(pa[0].min(pb[0]), 0), cell_of(pa[0].max(pb[0]), 0));
            let (j0, j1) = (cell_of(pa[1].min(pb[1]), 1), cell_of(pa[1].max(pb[1]), 1));
            let len2 = dist2(pa, pb);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    for &v in &buckets[i * cells + j] {
                        if v == a || v == b {
                            continue;
                        }
                        let p = self.vertices[v];
                        let cross = (pb[0] - pa[0]) * (p[1] - pa[1]) - (pb[1] - pa[1]) * (p[0] - pa[0]);
                        if cross.abs() > 1e-12 * scale * len2.sqrt() {
                            continue;
                        }
                        let s = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                        if s > 1e-12 && s < 1.0 - 1e-12 {
                            return Some((v, e));
                        }
                    }
                }
            }
        }
        None
    }

    /// Uniform refinement by newest-vertex bisection: all three edges of every
    /// triangle are bisected, giving four children of a quarter of the area.
    pub fn refine_uniform(&self) -> Refinement {
        self.refine_edges(vec![true; self.edges.len()])
    }

    /// Red refinement: every triangle is split into four similar children
    /// through its edge midpoints. Each child keeps the refinement-edge
    /// position of the parent under the similarity map.
    pub fn refine_red(&self) -> Refinement {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        let mut new_vertex_parents = Vec::with_capacity(self.edges.len());
        for &[a, b] in &self.edges {
            vertices.push(midpoint(self.vertices[a], self.vertices[b]));
            new_vertex_parents.push([a, b]);
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut parent = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let te = self.tri_edges[t];
            let (mbc, mca, mab) = (nv + te[0], nv + te[1], nv + te[2]);
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mbc, mca, mab]);
            parent.extend_from_slice(&[t; 4]);
        }
        let mesh = Mesh::new(vertices, triangles).expect("red refinement of a valid mesh is valid");
        Refinement { mesh, hierarchy: Hierarchy { parent, coarse_vertices: nv, new_vertex_parents } }
    }

    /// Newest-vertex bisection in the bisec3 variant: all three edges of every
    /// marked triangle are bisected, plus the closure needed for conformity.
    pub fn refine_nvb(&self, marked: &[usize]) -> Refinement {
        let mut edge_marked = vec![false; self.edges.len()];
        for &t in marked {
            for e in self.tri_edges[t] {
                edge_marked[e] = true;
            }
        }
        self.refine_edges(edge_marked)
    }

    /// Newest-vertex bisection that only bisects the refinement edge of each
    /// marked triangle, plus the closure.
    pub fn refine_nvb_single(&self, marked: &[usize]) -> Refinement {
        let mut edge_marked = vec![false; self.edges.len()];
        for &t in marked {
            edge_marked[self.tri_edges[t][2]] = true;
        }
        self.refine_edges(edge_marked)
    }

    fn refine_edges(&self, mut edge_marked: Vec<bool>) -> Refinement {
        // closure: a triangle with any marked edge must bisect its refinement edge
        loop {
            let mut changed = false;
            for te in &self.tri_edges {
                if !edge_marked[te[2]] && (edge_marked[te[0]] || edge_marked[te[1]]) {
                    edge_marked[te[2]] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        let mut new_vertex_parents = Vec::new();
        let mut new_vertex = vec![usize::MAX; self.edges.len()];
        for (e, &m) in edge_marked.iter().enumerate() {
            if m {
                let [a, b] = self.edges[e];
                new_vertex[e] = vertices.len();
                vertices.push(midpoint(self.vertices[a], self.vertices[b]));
                new_vertex_parents.push([a, b]);
            }
        }

        let mut triangles = Vec::with_capacity(self.triangles.len() + 2 * new_vertex_parents.len());
        let mut parent = Vec::with_capacity(triangles.capacity());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let te = self.tri_edges[t];
            if !edge_marked[te[2]] {
                triangles.push([a, b, c]);
                parent.push(t);
                continue;
            }
            let m = new_vertex[te[2]];
            // left child [c, a, m] has refinement edge (c, a) = local edge 1
            if edge_marked[te[1]] {
                let m2 = new_vertex[te[1]];
                triangles.push([a, m, m2]);
                triangles.push([m, c, m2]);
            } else {
                triangles.push([c, a, m]);
            }
            // right child [b, c, m] has refinement edge (b, c) = local edge 0
            if edge_marked[te[0]] {
                let m2 = new_vertex[te[0]];
                triangles.push([m, b, m2]);
                triangles.push([c, m, m2]);
            } else {
                triangles.push([b, c, m]);
            }
            while parent.len() < triangles.len() {
                parent.push(t);
            }
        }
        let mesh = Mesh::new(vertices, triangles).expect("NVB refinement of a valid mesh is valid");
        Refinement { mesh, hierarchy: Hierarchy { parent, coarse_vertices: nv, new_vertex_parents } }
    }

    /// Writes the plain-text mesh format: `NV NT NE`, then vertex lines
    /// `x y bflag`, triangle lines `v0 v1 v2 refedge` and edge lines
    /// `v0 v1 bflag`.
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.n_vertices(), self.n_triangles(), self.n_edges())?;
        for (p, &b) in self.vertices.iter().zip(&self.vertex_boundary) {
            writeln!(out, "{:.17e} {:.17e} {}", p[0], p[1], b as u8)?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {} 2", t[0], t[1], t[2])?;
        }
        for (e, &b) in self.edges.iter().zip(&self.edge_boundary) {
            writeln!(out, "{} {} {}", e[0], e[1], b as u8)?;
        }
        Ok(())
    }

    /// Reads the plain-text mesh format written by [`Mesh::write_text`].
    /// `refedge` is the local index of the refinement edge (edge `k` is
    /// opposite vertex `k`).
    pub fn read_text(text: &str) -> Result<Self, MeshError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse_err = |line: usize, msg: &str| MeshError::Parse { line: line + 1, msg: msg.to_string() };
        let (ln, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| parse_err(ln, "bad header")))
            .collect::<Result<_, _>>()?;
        if counts.len() != 3 {
            return Err(parse_err(ln, "header must be NV NT NE"));
        }
        let (nv, nt, ne) = (counts[0], counts[1], counts[2]);
        let mut vertices = Vec::with_capacity(nv);
        let mut vflags = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "truncated vertex block"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(parse_err(ln, "vertex line must be x y bflag"));
            }
            let x: f64 = f[0].parse().map_err(|_| parse_err(ln, "bad x"))?;
            let y: f64 = f[1].parse().map_err(|_| parse_err(ln, "bad y"))?;
            let b: u8 = f[2].parse().map_err(|_| parse_err(ln, "bad flag"))?;
            vertices.push([x, y]);
            vflags.push(b != 0);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "truncated triangle block"))?;
            let f: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| parse_err(ln, "bad triangle entry")))
                .collect::<Result<_, _>>()?;
            if f.len() != 4 || f[3] > 2 {
                return Err(parse_err(ln, "triangle line must be v0 v1 v2 refedge"));
            }
            let k = f[3];
            triangles.push([f[(k + 1) % 3], f[(k + 2) % 3], f[k]]);
        }
        let mut edge_lines = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "truncated edge block"))?;
            let f: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| parse_err(ln, "bad edge entry")))
                .collect::<Result<_, _>>()?;
            if f.len() != 3 {
                return Err(parse_err(ln, "edge line must be v0 v1 bflag"));
            }
            edge_lines.push((f[0].min(f[1]), f[0].max(f[1]), f[2] != 0));
        }
        let mesh = Mesh::new(vertices, triangles)?;
        if mesh.n_edges() != ne {
            return Err(MeshError::Inconsistent(format!("edge count {} != header {}", mesh.n_edges(), ne)));
        }
        for (e, &(a, b, flag)) in edge_lines.iter().enumerate() {
            if mesh.edges[e] != [a, b] || mesh.edge_boundary[e] != flag {
                return Err(MeshError::Inconsistent(format!("edge {e} does not match the triangles")));
            }
        }
        if mesh.vertex_boundary != vflags {
            return Err(MeshError::Inconsistent("vertex boundary flags do not match".into()));
        }
        Ok(mesh)
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles && self.edges == other.edges
    }
}

impl GeometryCache {
    fn compute(
        vertices: &[Point],
        triangles: &[[usize; 3]],
        edges: &[[usize; 2]],
        tri_edges: &[[usize; 3]],
        edge_tris: &[(usize, Option<usize>)],
    ) -> Self {
        let nt = triangles.len();
        let mut area = Vec::with_capacity(nt);
        let mut centroid = Vec::with_capacity(nt);
        let mut diameter = Vec::with_capacity(nt);
        let mut grad_lambda = Vec::with_capacity(nt);
        for tri in triangles {
            let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let a = signed_area(p[0], p[1], p[2]);
            area.push(a);
            centroid.push([(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]);
            diameter.push(dist2(p[0], p[1]).max(dist2(p[1], p[2])).max(dist2(p[2], p[0])).sqrt());
            let mut g = [[0.0; 2]; 3];
            for i in 0..3 {
                let (q, r) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                // rotate the opposite edge vector by -90 degrees
                g[i] = [(q[1] - r[1]) / (2.0 * a), (r[0] - q[0]) / (2.0 * a)];
            }
            grad_lambda.push(g);
        }
        let ne = edges.len();
        let mut edge_length = Vec::with_capacity(ne);
        let mut edge_midpoint = Vec::with_capacity(ne);
        let mut edge_normal = Vec::with_capacity(ne);
        for (e, &[a, b]) in edges.iter().enumerate() {
            let (pa, pb) = (vertices[a], vertices[b]);
            let len = dist2(pa, pb).sqrt();
            edge_length.push(len);
            edge_midpoint.push(midpoint(pa, pb));
            let tp = edge_tris[e].0;
            let k = (0..3).find(|&k| tri_edges[tp][k] == e).unwrap();
            let (p, q) = local_edge(&triangles[tp], k);
            // counter-clockwise triangle: outer normal of edge p->q points right
            let (dx, dy) = (vertices[q][0] - vertices[p][0], vertices[q][1] - vertices[p][1]);
            edge_normal.push([dy / len, -dx / len]);
        }
        Self { area, centroid, diameter, grad_lambda, edge_length, edge_midpoint, edge_normal }
    }
}

/// Criss-cross triangulation of `(-1, 1)^2`: four unit squares, each cut by
/// both diagonals (16 triangles, 5 interior vertices).
pub fn make_square_mesh() -> Mesh {
    criss_cross(&[(-1.0, -1.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 0.0)])
}

/// Criss-cross triangulation of the L-shaped domain `(-1, 1)^2 \ [0, 1]^2`:
/// three unit squares, each cut by both diagonals (12 triangles).
pub fn make_lshape_mesh() -> Mesh {
    criss_cross(&[(-1.0, -1.0), (0.0, -1.0), (-1.0, 0.0)])
}

/// Unit squares with lower-left corners `cells`, each split into four
/// triangles meeting at the square's center.
fn criss_cross(cells: &[(f64, f64)]) -> Mesh {
    let mut vertices: Vec<Point> = Vec::new();
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vid = |p: Point, vertices: &mut Vec<Point>| -> usize {
        let key = ((p[0] * 2.0).round() as i64, (p[1] * 2.0).round() as i64);
        *index.entry(key).or_insert_with(|| {
            vertices.push(p);
            vertices.len() - 1
        })
    };
    // corners first in lexicographic (y, x) order so numbering is stable
    let mut corners: Vec<Point> = Vec::new();
    for &(x, y) in cells {
        for c in [[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0]] {
            corners.push(c);
        }
    }
    corners.sort_by(|p, q| p[1].partial_cmp(&q[1]).unwrap().then(p[0].partial_cmp(&q[0]).unwrap()));
    for c in corners {
        vid(c, &mut vertices);
    }
    let mut triangles = Vec::new();
    for &(x, y) in cells {
        let q = [
            vid([x, y], &mut vertices),
            vid([x + 1.0, y], &mut vertices),
            vid([x + 1.0, y + 1.0], &mut vertices),
            vid([x, y + 1.0], &mut vertices),
        ];
        let c = vid([x + 0.5, y + 0.5], &mut vertices);
        for k in 0..4 {
            triangles.push([q[k], q[(k + 1) % 4], c]);
        }
    }
    Mesh::with_longest_edge_refinement(vertices, triangles).expect("criss-cross mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ndof(m: &Mesh) -> usize {
        m.vertex_on_boundary().iter().filter(|b| !**b).count() + m.n_edges()
    }

    #[test]
    fn square_mesh_basics() {
        let m = make_square_mesh();
        assert!((m.total_area() - 4.0).abs() < 1e-14);
        assert_eq!(ndof(&m), 33);
        for (p, &b) in m.vertices().iter().zip(m.vertex_on_boundary()) {
            let on = (p[0].abs() - 1.0).abs() < 1e-14 || (p[1].abs() - 1.0).abs() < 1e-14;
            assert_eq!(on, b);
        }
        m.check_regularity().unwrap();
    }

    #[test]
    fn lshape_mesh_basics() {
        let m = make_lshape_mesh();
        assert!((m.total_area() - 3.0).abs() < 1e-14);
        assert_eq!(ndof(&m), 25);
        assert!(m.vertices().iter().any(|p| p[0] == 0.0 && p[1] == 0.0));
        m.check_regularity().unwrap();
    }

    #[test]
    fn uniform_ndof_sequence() {
        let mut m = make_square_mesh();
        let mut seq = vec![ndof(&m)];
        for _ in 0..4 {
            m = m.refine_uniform().mesh;
            seq.push(ndof(&m));
        }
        assert_eq!(seq, vec![33, 129, 513, 2049, 8193]);
    }

    #[test]
    fn uniform_children_are_quarter_area() {
        let m = make_lshape_mesh();
        for r in [m.refine_uniform(), m.refine_red()] {
        for (t, &p) in r.hierarchy.parent.iter().enumerate() {
            let ratio = r.mesh.geometry().area[t] / m.geometry().area[p];
            assert!((ratio - 0.25).abs() < 1e-14);
        }
        r.mesh.check_regularity().unwrap();
        }
    }

    #[test]
    fn lshape_adaptive_refinement_counts() {
        let m = make_lshape_mesh();
        let all: Vec<usize> = (0..m.n_triangles()).collect();
        assert_eq!(ndof(&m.refine_nvb(&all).mesh), 97);
        assert_eq!(ndof(&m.refine_nvb_single(&all).mesh), 49);
    }

    #[test]
    fn nvb_empty_marking_is_identity() {
        let m = make_square_mesh();
        let r = m.refine_nvb(&[]);
        assert_eq!(r.mesh, m);
    }

    #[test]
    fn nvb_full_marking_bisects_everything() {
        let m = make_square_mesh();
        let all: Vec<usize> = (0..m.n_triangles()).collect();
        let r = m.refine_nvb(&all);
        let mut count = vec![0usize; m.n_triangles()];
        for &p in &r.hierarchy.parent {
            count[p] += 1;
        }
        assert!(count.iter().all(|&c| c >= 2));
        r.mesh.check_regularity().unwrap();
    }

    #[test]
    fn nvb_closure_grows_interior_marking() {
        let m = make_square_mesh();
        // triangle whose refinement edge is interior
        let t = (0..m.n_triangles()).find(|&t| !m.edge_on_boundary()[m.triangle_edges()[t][2]]).unwrap();
        let r = m.refine_nvb_single(&[t]);
        let refined: std::collections::BTreeSet<usize> = {
            let mut count = vec![0usize; m.n_triangles()];
            for &p in &r.hierarchy.parent {
                count[p] += 1;
            }
            (0..m.n_triangles()).filter(|&s| count[s] > 1).collect()
        };
        assert!(refined.contains(&t));
        assert!(refined.len() > 1);
        assert!(r.mesh.find_hanging_node().is_none());
    }

    #[test]
    fn hanging_node_scan_detects_nonconforming_split() {
        // two triangles sharing an edge, only one of them bisected
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]];
        let tris = vec![[0, 1, 4], [4, 2, 0], [1, 3, 2]];
        let m = Mesh::new(v, tris).unwrap();
        assert!(m.find_hanging_node().is_some());
    }

    #[test]
    fn text_round_trip() {
        let m = make_lshape_mesh().refine_nvb(&[0, 5]).mesh;
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, m);
        let mut buf2 = Vec::new();
        back.write_text(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn edge_normals_follow_lower_triangle() {
        let m = make_square_mesh().refine_uniform().mesh;
        for (e, &(tp, tm)) in m.edge_triangles().iter().enumerate() {
            if let Some(tm) = tm {
                assert!(tp < tm);
            }
            let n = m.geometry().edge_normal[e];
            let c = m.geometry().centroid[tp];
            let mid = m.geometry().edge_midpoint[e];
            assert!(n[0] * (mid[0] - c[0]) + n[1] * (mid[1] - c[1]) > 0.0);
        }
    }
}
