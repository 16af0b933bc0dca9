//! Degrees of freedom and canonical operators for the Courant space `S1_0`,
//! the Raviart-Thomas space `RT0`, Crouzeix-Raviart functions and broken
//! piecewise linears.
//!
//! An `RT0` coefficient is the constant normal component `q . nu_E` on its
//! edge. On a triangle `T` with local edge `k` opposite vertex `P_k` the
//! basis function is `s_k |E_k| / (2|T|) (x - P_k)` with `s_k = nu_T . nu_E`.

use crate::error::{Error, MeshError};
use crate::mesh::{Mesh, Point, Refinement};
use crate::nonlinearity::{Mat2, Vec2};
use crate::quadrature::triangle_points;

/// Index maps for `S1_0 x RT0`. Global dof vectors store the `S1_0`
/// coefficients (interior vertices in vertex order) followed by one `RT0`
/// coefficient per edge.
#[derive(Clone, Debug)]
pub struct DofLayout {
    vertex_dof: Vec<Option<usize>>,
    dim_s: usize,
    dim_rt: usize,
    dim_cr: usize,
    n_triangles: usize,
}

impl DofLayout {
    pub fn new(mesh: &Mesh) -> Self {
        let mut dim_s = 0;
        let vertex_dof = mesh
            .vertex_on_boundary()
            .iter()
            .map(|&b| {
                if b {
                    None
                } else {
                    dim_s += 1;
                    Some(dim_s - 1)
                }
            })
            .collect();
        let dim_cr = mesh.edge_on_boundary().iter().filter(|b| !**b).count();
        Self { vertex_dof, dim_s, dim_rt: mesh.n_edges(), dim_cr, n_triangles: mesh.n_triangles() }
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn dim_rt(&self) -> usize {
        self.dim_rt
    }

    pub fn dim_cr(&self) -> usize {
        self.dim_cr
    }

    pub fn dim_p1(&self) -> usize {
        3 * self.n_triangles
    }

    /// `dim S1_0 + dim RT0`
    pub fn ndof(&self) -> usize {
        self.dim_s + self.dim_rt
    }

    pub fn vertex_dof(&self, v: usize) -> Option<usize> {
        self.vertex_dof[v]
    }

    /// Global index of the `RT0` coefficient on edge `e`.
    pub fn rt_dof(&self, e: usize) -> usize {
        self.dim_s + e
    }
}

/// Per-triangle data weights of the least-squares functional.
#[derive(Clone, Debug)]
pub struct ElementWeights {
    /// `Pi0((x - mid T) (x - mid T)^T)`
    pub s0: Vec<Mat2>,
    /// `Pi0(f (x - mid T))`
    pub h0f: Vec<Vec2>,
    /// `Pi0 f`
    pub pi0f: Vec<f64>,
    /// `||f||^2_{L2(T)}`
    pub normf2: Vec<f64>,
}

/// Exact second-moment matrix `S0|_T` of a triangle.
pub fn s0_matrix(mesh: &Mesh, t: usize) -> Mat2 {
    let m = mesh.geometry().centroid[t];
    let mut s = [[0.0; 2]; 2];
    for &v in &mesh.triangles()[t] {
        let p = mesh.vertices()[v];
        let d = [p[0] - m[0], p[1] - m[1]];
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] += d[i] * d[j] / 12.0;
            }
        }
    }
    s
}

pub fn compute_weights(mesh: &Mesh, f: &dyn Fn(Point) -> f64) -> ElementWeights {
    let nt = mesh.n_triangles();
    let mut w = ElementWeights {
        s0: Vec::with_capacity(nt),
        h0f: Vec::with_capacity(nt),
        pi0f: Vec::with_capacity(nt),
        normf2: Vec::with_capacity(nt),
    };
    for t in 0..nt {
        let m = mesh.geometry().centroid[t];
        let (mut mean, mut first, mut sq) = (0.0, [0.0; 2], 0.0);
        for (x, _, wq) in triangle_points(mesh, t) {
            let fx = f(x);
            mean += wq * fx;
            first[0] += wq * fx * (x[0] - m[0]);
            first[1] += wq * fx * (x[1] - m[1]);
            sq += wq * fx * fx;
        }
        w.s0.push(s0_matrix(mesh, t));
        w.h0f.push(first);
        w.pi0f.push(mean);
        w.normf2.push(sq * mesh.geometry().area[t]);
    }
    w
}

/// A mesh together with its dof layout and data weights.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub layout: DofLayout,
    pub weights: ElementWeights,
}

impl Discretization {
    pub fn new(mesh: Mesh, f: &dyn Fn(Point) -> f64) -> Self {
        let layout = DofLayout::new(&mesh);
        let weights = compute_weights(&mesh, f);
        Self { mesh, layout, weights }
    }

    pub fn ndof(&self) -> usize {
        self.layout.ndof()
    }
}

/// Piecewise affine function given by its three vertex values per triangle
/// (local vertex order).
#[derive(Clone, Debug, PartialEq)]
pub struct BrokenP1(pub Vec<[f64; 3]>);

impl BrokenP1 {
    pub fn gradient(&self, mesh: &Mesh, t: usize) -> Vec2 {
        let g = &mesh.geometry().grad_lambda[t];
        let v = &self.0[t];
        [
            v[0] * g[0][0] + v[1] * g[1][0] + v[2] * g[2][0],
            v[0] * g[0][1] + v[1] * g[1][1] + v[2] * g[2][1],
        ]
    }

    /// Value of the restriction to `t` at the midpoint of local edge `k`.
    pub fn edge_midpoint_value(&self, t: usize, k: usize) -> f64 {
        let v = &self.0[t];
        0.5 * (v[(k + 1) % 3] + v[(k + 2) % 3])
    }

    pub fn mean(&self, t: usize) -> f64 {
        self.0[t].iter().sum::<f64>() / 3.0
    }

    /// Largest jump at interior edge midpoints and largest modulus at
    /// boundary edge midpoints; both vanish exactly for `CR1_0` functions.
    pub fn cr_defect(&self, mesh: &Mesh) -> (f64, f64) {
        let (mut jump, mut boundary) = (0.0f64, 0.0f64);
        let mut value_on = vec![(f64::NAN, f64::NAN); mesh.n_edges()];
        for t in 0..mesh.n_triangles() {
            for k in 0..3 {
                let e = mesh.triangle_edges()[t][k];
                let val = self.edge_midpoint_value(t, k);
                if mesh.edge_triangles()[e].0 == t {
                    value_on[e].0 = val;
                } else {
                    value_on[e].1 = val;
                }
            }
        }
        for (e, &(a, b)) in value_on.iter().enumerate() {
            if mesh.edge_on_boundary()[e] {
                boundary = boundary.max(a.abs());
            } else {
                jump = jump.max((a - b).abs());
            }
        }
        (jump, boundary)
    }
}

/// Coefficient vectors of a discrete pair `(u_C, p_RT)` and optionally the
/// residual representer in broken `P1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub v_rep: Option<BrokenP1>,
}

impl DiscreteState {
    pub fn zeros(layout: &DofLayout) -> Self {
        Self { u: vec![0.0; layout.dim_s()], p: vec![0.0; layout.dim_rt()], v_rep: None }
    }

    pub fn from_vector(layout: &DofLayout, x: &[f64]) -> Self {
        assert_eq!(x.len(), layout.ndof());
        Self { u: x[..layout.dim_s()].to_vec(), p: x[layout.dim_s()..].to_vec(), v_rep: None }
    }

    /// Concatenated `[u, p]` coefficient vector.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.u.len() + self.p.len());
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.p);
        x
    }

    pub fn check_dims(&self, layout: &DofLayout) -> Result<(), Error> {
        if self.u.len() != layout.dim_s() {
            return Err(Error::Dimension { expected: layout.dim_s(), got: self.u.len() });
        }
        if self.p.len() != layout.dim_rt() {
            return Err(Error::Dimension { expected: layout.dim_rt(), got: self.p.len() });
        }
        Ok(())
    }

    /// Nodal values on all vertices, zero on the boundary.
    pub fn u_at_vertices(&self, mesh: &Mesh, layout: &DofLayout) -> Vec<f64> {
        (0..mesh.n_vertices()).map(|v| layout.vertex_dof(v).map_or(0.0, |d| self.u[d])).collect()
    }

    /// Piecewise constant gradient of `u_C` on triangle `t`.
    pub fn grad_u(&self, mesh: &Mesh, layout: &DofLayout, t: usize) -> Vec2 {
        let g = &mesh.geometry().grad_lambda[t];
        let mut out = [0.0; 2];
        for (i, &v) in mesh.triangles()[t].iter().enumerate() {
            if let Some(d) = layout.vertex_dof(v) {
                out[0] += self.u[d] * g[i][0];
                out[1] += self.u[d] * g[i][1];
            }
        }
        out
    }

    /// `p_RT|_T = mean + slope (x - mid T)`.
    pub fn rt_on(&self, mesh: &Mesh, t: usize) -> RtShape {
        let basis = rt_basis(mesh, t);
        let mut out = RtShape { mean: [0.0; 2], slope: 0.0 };
        for (k, b) in basis.iter().enumerate() {
            let c = self.p[mesh.triangle_edges()[t][k]];
            out.mean[0] += c * b.mean[0];
            out.mean[1] += c * b.mean[1];
            out.slope += c * b.slope;
        }
        out
    }
}

/// An `RT0` field restricted to one triangle: `mean + slope (x - mid T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RtShape {
    pub mean: Vec2,
    pub slope: f64,
}

impl RtShape {
    pub fn div(&self) -> f64 {
        2.0 * self.slope
    }

    pub fn eval(&self, mid: Point, x: Point) -> Vec2 {
        [self.mean[0] + self.slope * (x[0] - mid[0]), self.mean[1] + self.slope * (x[1] - mid[1])]
    }
}

/// Local `RT0` basis of triangle `t`, one entry per local edge, with the
/// global edge orientation already applied.
pub fn rt_basis(mesh: &Mesh, t: usize) -> [RtShape; 3] {
    let geo = mesh.geometry();
    let tri = mesh.triangles()[t];
    let mid = geo.centroid[t];
    let area = geo.area[t];
    let mut out = [RtShape { mean: [0.0; 2], slope: 0.0 }; 3];
    for k in 0..3 {
        let e = mesh.triangle_edges()[t][k];
        let c = mesh.edge_sign(t, k) * geo.edge_length[e] / (2.0 * area);
        let p = mesh.vertices()[tri[k]];
        out[k] = RtShape { mean: [c * (mid[0] - p[0]), c * (mid[1] - p[1])], slope: c };
    }
    out
}

/// Element means `Pi0 p_RT` per triangle.
pub fn pi0_rt(mesh: &Mesh, state: &DiscreteState) -> Vec<Vec2> {
    (0..mesh.n_triangles()).map(|t| state.rt_on(mesh, t).mean).collect()
}

/// `||(1 - Pi0) p_RT||_{L2}`, evaluated exactly as `sum_T slope^2 |T| tr S0`.
pub fn rt_highorder_norm(mesh: &Mesh, state: &DiscreteState) -> f64 {
    (0..mesh.n_triangles())
        .map(|t| {
            let s = s0_matrix(mesh, t);
            state.rt_on(mesh, t).slope.powi(2) * mesh.geometry().area[t] * (s[0][0] + s[1][1])
        })
        .sum::<f64>()
        .sqrt()
}

/// Coefficients of the `RT0` function with the given normal component per
/// edge, and extraction of those normal components from an element-wise
/// field.
pub fn rt_from_normal_components(mesh: &Mesh, field: &dyn Fn(usize, Point) -> Vec2) -> Vec<f64> {
    (0..mesh.n_edges())
        .map(|e| {
            let t = mesh.edge_triangles()[e].0;
            let x = mesh.geometry().edge_midpoint[e];
            let v = field(t, x);
            let n = mesh.geometry().edge_normal[e];
            v[0] * n[0] + v[1] * n[1]
        })
        .collect()
}

/// A function given element by element, possibly discontinuous across edges.
pub trait BrokenFunction {
    fn value(&self, t: usize, x: Point) -> f64;
    fn gradient(&self, t: usize, x: Point) -> Vec2;
}

impl BrokenFunction for (&Mesh, &BrokenP1) {
    fn value(&self, t: usize, x: Point) -> f64 {
        let l = self.0.barycentric(t, x);
        let v = &self.1 .0[t];
        l[0] * v[0] + l[1] * v[1] + l[2] * v[2]
    }

    fn gradient(&self, t: usize, _x: Point) -> Vec2 {
        self.1.gradient(self.0, t)
    }
}

/// Three-point Gauss-Legendre rule on `[0, 1]`, exact up to degree 5.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Mean of `v|_T` over local edge `k` of triangle `t`.
pub fn edge_mean(mesh: &Mesh, v: &dyn BrokenFunction, t: usize, k: usize) -> f64 {
    let tri = mesh.triangles()[t];
    let (a, b) = (mesh.vertices()[tri[(k + 1) % 3]], mesh.vertices()[tri[(k + 2) % 3]]);
    GAUSS3
        .iter()
        .map(|&(s, w)| w * v.value(t, [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]))
        .sum()
}

/// Local nonconforming interpolation: on every triangle the affine function
/// whose value at each edge midpoint equals the edge mean of `v|_T`.
pub fn inc_interpolate(mesh: &Mesh, v: &dyn BrokenFunction) -> BrokenP1 {
    BrokenP1(
        (0..mesh.n_triangles())
            .map(|t| {
                let m = [edge_mean(mesh, v, t, 0), edge_mean(mesh, v, t, 1), edge_mean(mesh, v, t, 2)];
                [m[1] + m[2] - m[0], m[2] + m[0] - m[1], m[0] + m[1] - m[2]]
            })
            .collect(),
    )
}

/// Transfers a state to a refined mesh: `u_C` by nodal interpolation and
/// `p_RT` by the canonical `RT0` interpolation of the coarse field.
pub fn prolongate(
    coarse: &Mesh,
    coarse_layout: &DofLayout,
    refinement: &Refinement,
    state: &DiscreteState,
) -> Result<DiscreteState, Error> {
    let fine = &refinement.mesh;
    let h = &refinement.hierarchy;
    state.check_dims(coarse_layout)?;
    if h.coarse_vertices != coarse.n_vertices()
        || h.parent.len() != fine.n_triangles()
        || h.coarse_vertices + h.new_vertex_parents.len() != fine.n_vertices()
    {
        return Err(MeshError::NotARefinement("hierarchy sizes do not match".into()).into());
    }
    for (t, &p) in h.parent.iter().enumerate() {
        if p >= coarse.n_triangles() {
            return Err(MeshError::NotARefinement(format!("parent of {t} out of range")).into());
        }
        let l = coarse.barycentric(p, fine.geometry().centroid[t]);
        if l.iter().any(|&x| x < -1e-10) {
            return Err(MeshError::NotARefinement(format!("triangle {t} is not inside its parent {p}")).into());
        }
    }

    let coarse_u = state.u_at_vertices(coarse, coarse_layout);
    let mut fine_u = coarse_u.clone();
    for &[a, b] in &h.new_vertex_parents {
        fine_u.push(0.5 * (fine_u[a] + fine_u[b]));
    }
    let layout = DofLayout::new(fine);
    let mut u = vec![0.0; layout.dim_s()];
    for (v, val) in fine_u.iter().enumerate() {
        if let Some(d) = layout.vertex_dof(v) {
            u[d] = *val;
        }
    }
    let p = rt_from_normal_components(fine, &|t, x| {
        let parent = h.parent[t];
        state.rt_on(coarse, parent).eval(coarse.geometry().centroid[parent], x)
    });
    Ok(DiscreteState { u, p, v_rep: None })
}
