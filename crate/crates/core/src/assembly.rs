//! The weighted least-squares functional over `S1_0 x RT0`, its derivatives,
//! the residual representer in broken `P1` and the norm operator on the
//! trial space.
//!
//! On a triangle `T` with `g = grad u_C` and `p_RT = a + b (x - mid T)`:
//!
//! ```text
//! R1 = Pi0 f + 2 b
//! w  = a - sigma(g) + H0 f,    M = I + S0
//! LS_T = |T| (R1^2 + w^T M^{-1} w)
//! ```

use crate::error::{Error, LinalgError};
use crate::linalg::{LinearSolver, SparseMatrix};
use crate::mesh::Mesh;
use crate::nonlinearity::{Mat2, PhiModel, Vec2};
use crate::spaces::{rt_basis, BrokenFunction, BrokenP1, DiscreteState, Discretization, RtShape};

/// Which second derivative to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HessianKind {
    None,
    /// Full Newton Hessian including the curvature of `sigma`.
    Newton,
    /// First-derivative products only.
    GaussNewton,
}

#[derive(Clone, Debug)]
pub struct LsEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<SparseMatrix>,
    /// `|T| (R1^2 + |R2|^2)` per triangle.
    pub per_element: Vec<f64>,
}

pub(crate) fn inv2(m: &Mat2) -> Mat2 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

pub(crate) fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Local element data shared by value, gradient and representer.
struct Local {
    area: f64,
    g: Vec2,
    basis: [RtShape; 3],
    r1: f64,
    w: Vec2,
    minv: Mat2,
    z: Vec2,
}

fn local(disc: &Discretization, model: &PhiModel, state: &DiscreteState, t: usize) -> Local {
    let mesh = &disc.mesh;
    let area = mesh.geometry().area[t];
    let g = state.grad_u(mesh, &disc.layout, t);
    let basis = rt_basis(mesh, t);
    let mut rt = RtShape { mean: [0.0; 2], slope: 0.0 };
    for (k, b) in basis.iter().enumerate() {
        let c = state.p[mesh.triangle_edges()[t][k]];
        rt.mean[0] += c * b.mean[0];
        rt.mean[1] += c * b.mean[1];
        rt.slope += c * b.slope;
    }
    let wts = &disc.weights;
    let r1 = wts.pi0f[t] + rt.div();
    let s = model.sigma(g);
    let w = [rt.mean[0] - s[0] + wts.h0f[t][0], rt.mean[1] - s[1] + wts.h0f[t][1]];
    let s0 = wts.s0[t];
    let minv = inv2(&[[1.0 + s0[0][0], s0[0][1]], [s0[1][0], 1.0 + s0[1][1]]]);
    let z = mat_vec(&minv, w);
    Local { area, g, basis, r1, w, minv, z }
}

/// Local dof indices: three vertex dofs (if interior) followed by three edge dofs.
fn local_dofs(disc: &Discretization, t: usize) -> [Option<usize>; 6] {
    let tri = disc.mesh.triangles()[t];
    let edges = disc.mesh.triangle_edges()[t];
    let l = &disc.layout;
    [
        l.vertex_dof(tri[0]),
        l.vertex_dof(tri[1]),
        l.vertex_dof(tri[2]),
        Some(l.rt_dof(edges[0])),
        Some(l.rt_dof(edges[1])),
        Some(l.rt_dof(edges[2])),
    ]
}

/// Value, gradient and optionally the Hessian in one element loop.
pub fn evaluate(
    disc: &Discretization,
    model: &PhiModel,
    state: &DiscreteState,
    kind: HessianKind,
) -> Result<LsEvaluation, Error> {
    state.check_dims(&disc.layout)?;
    let mesh = &disc.mesh;
    let n = disc.ndof();
    let nt = mesh.n_triangles();
    let mut value = 0.0;
    let mut per_element = Vec::with_capacity(nt);
    let mut gradient = vec![0.0; n];
    let mut trips = Vec::with_capacity(if kind == HessianKind::None { 0 } else { 36 * nt });
    for t in 0..nt {
        let loc = local(disc, model, state, t);
        let contrib = loc.area * (loc.r1 * loc.r1 + dot2(loc.w, loc.z));
        per_element.push(contrib);
        value += contrib;

        // derivatives of R1 and w with respect to the six local dofs
        let grad_l = &mesh.geometry().grad_lambda[t];
        let ds = model.dsigma(loc.g);
        let mut dr1 = [0.0; 6];
        let mut dw = [[0.0; 2]; 6];
        for i in 0..3 {
            let v = mat_vec(&ds, grad_l[i]);
            dw[i] = [-v[0], -v[1]];
            dw[3 + i] = loc.basis[i].mean;
            dr1[3 + i] = 2.0 * loc.basis[i].slope;
        }
        let dofs = local_dofs(disc, t);
        let two_a = 2.0 * loc.area;
        for a in 0..6 {
            if let Some(da) = dofs[a] {
                gradient[da] += two_a * (loc.r1 * dr1[a] + dot2(loc.z, dw[a]));
            }
        }
        if kind == HessianKind::None {
            continue;
        }
        let hs = if kind == HessianKind::Newton { Some(model.hess_sigma(loc.g)) } else { None };
        for a in 0..6 {
            let Some(da) = dofs[a] else { continue };
            let mdwa = mat_vec(&loc.minv, dw[a]);
            for b in 0..6 {
                let Some(db) = dofs[b] else { continue };
                let mut h = dr1[a] * dr1[b] + dot2(mdwa, dw[b]);
                if let (Some(hs), true) = (&hs, a < 3 && b < 3) {
                    let (gi, gj) = (grad_l[a], grad_l[b]);
                    for m in 0..2 {
                        let mut d2 = 0.0;
                        for k in 0..2 {
                            for l in 0..2 {
                                d2 += hs[m][k][l] * gi[k] * gj[l];
                            }
                        }
                        h -= loc.z[m] * d2;
                    }
                }
                trips.push((da, db, two_a * h));
            }
        }
    }
    let hessian = if kind == HessianKind::None { None } else { Some(SparseMatrix::from_triplets(n, &trips)?) };
    Ok(LsEvaluation { value, gradient, hessian, per_element })
}

pub fn ls_value(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<f64, Error> {
    state.check_dims(&disc.layout)?;
    Ok((0..disc.mesh.n_triangles())
        .map(|t| {
            let loc = local(disc, model, state, t);
            loc.area * (loc.r1 * loc.r1 + dot2(loc.w, loc.z))
        })
        .sum())
}

pub fn ls_gradient(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<Vec<f64>, Error> {
    Ok(evaluate(disc, model, state, HessianKind::None)?.gradient)
}

pub fn ls_hessian(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<SparseMatrix, Error> {
    Ok(evaluate(disc, model, state, HessianKind::Newton)?.hessian.expect("requested"))
}

/// Local `H1(T)` Gram matrix of the barycentric basis.
pub fn p1_gram(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let area = mesh.geometry().area[t];
    let g = &mesh.geometry().grad_lambda[t];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mass = area / 12.0 * if i == j { 2.0 } else { 1.0 };
            m[i][j] = mass + area * dot2(g[i], g[j]);
        }
    }
    m
}

/// `||v||^2_{H1(T)}` of the affine function with vertex values `v`.
pub fn p1_norm2(mesh: &Mesh, t: usize, v: &[f64; 3]) -> f64 {
    let m = p1_gram(mesh, t);
    (0..3).map(|i| (0..3).map(|j| v[i] * m[i][j] * v[j]).sum::<f64>()).sum()
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(&m);
    assert!(d > 0.0, "local H1 Gram matrix must be positive definite");
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *xc = det(&mc) / d;
    }
    x
}

/// The residual functional `b(x_h; eta) - F(eta)` applied to the barycentric
/// basis functions of triangle `t`.
fn residual_load(disc: &Discretization, model: &PhiModel, state: &DiscreteState, t: usize) -> [f64; 3] {
    let mesh = &disc.mesh;
    let geo = mesh.geometry();
    let area = geo.area[t];
    let s = model.sigma(state.grad_u(mesh, &disc.layout, t));
    let edges = mesh.triangle_edges()[t];
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let gl = geo.grad_lambda[t][i];
        // int f lambda_i, with lambda_i = 1/3 + grad lambda_i . (x - mid T)
        let f_lambda = area * (disc.weights.pi0f[t] / 3.0 + dot2(gl, disc.weights.h0f[t]));
        // boundary flux: lambda_i has mean 1/2 on the two edges through vertex i
        let mut flux = 0.0;
        for k in (0..3).filter(|&k| k != i) {
            let e = edges[k];
            flux += mesh.edge_sign(t, k) * state.p[e] * geo.edge_length[e] / 2.0;
        }
        *o = area * dot2(s, gl) - flux - f_lambda;
    }
    out
}

/// Riesz representer `v1` of `b(x_h; .) - F` in broken `P1` with the
/// `H1(T)` inner product, from the local 3x3 Gram systems.
pub fn residual_representer(
    disc: &Discretization,
    model: &PhiModel,
    state: &DiscreteState,
) -> Result<BrokenP1, Error> {
    state.check_dims(&disc.layout)?;
    Ok(BrokenP1(
        (0..disc.mesh.n_triangles())
            .map(|t| solve3(p1_gram(&disc.mesh, t), residual_load(disc, model, state, t)))
            .collect(),
    ))
}

/// `||b(x_h; .) - F||` in the dual of broken `P1` with the `H1(T)` norm.
pub fn residual_dual_norm(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<f64, Error> {
    let v = residual_representer(disc, model, state)?;
    Ok((0..disc.mesh.n_triangles()).map(|t| p1_norm2(&disc.mesh, t, &v.0[t])).sum::<f64>().sqrt())
}

/// The representer `v_h = -v1` of the mixed system, in closed form:
/// `Pi0 v_h = R1` and `grad v_h = (I + S0)^{-1} w`.
pub fn mixed_representer(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<BrokenP1, Error> {
    state.check_dims(&disc.layout)?;
    let mesh = &disc.mesh;
    Ok(BrokenP1(
        (0..mesh.n_triangles())
            .map(|t| {
                let loc = local(disc, model, state, t);
                let mid = mesh.geometry().centroid[t];
                let tri = mesh.triangles()[t];
                let mut v = [0.0; 3];
                for i in 0..3 {
                    let p = mesh.vertices()[tri[i]];
                    v[i] = loc.r1 + loc.z[0] * (p[0] - mid[0]) + loc.z[1] * (p[1] - mid[1]);
                }
                v
            })
            .collect(),
    ))
}

/// `b'(x_h; xi, eta)` for every basis direction `xi` of `S1_0 x RT0`, with
/// `eta` a broken `P1` function.
pub fn bprime_vector(
    disc: &Discretization,
    model: &PhiModel,
    state: &DiscreteState,
    eta: &BrokenP1,
) -> Result<Vec<f64>, Error> {
    state.check_dims(&disc.layout)?;
    let mesh = &disc.mesh;
    let geo = mesh.geometry();
    let mut out = vec![0.0; disc.ndof()];
    for t in 0..mesh.n_triangles() {
        let ds = model.dsigma(state.grad_u(mesh, &disc.layout, t));
        let grad_eta = eta.gradient(mesh, t);
        let dofs = local_dofs(disc, t);
        for i in 0..3 {
            if let Some(d) = dofs[i] {
                out[d] += geo.area[t] * dot2(mat_vec(&ds, geo.grad_lambda[t][i]), grad_eta);
            }
            let e = mesh.triangle_edges()[t][i];
            out[disc.layout.rt_dof(e)] -= mesh.edge_sign(t, i) * geo.edge_length[e] * eta.edge_midpoint_value(t, i);
        }
    }
    Ok(out)
}

/// `b'(x_h; xi, eta)` for one direction `xi` and a general broken function
/// `eta`, with volume terms by degree-4 quadrature and edge terms by
/// three-point Gauss rules.
pub fn bprime_form(
    disc: &Discretization,
    model: &PhiModel,
    state: &DiscreteState,
    xi: &DiscreteState,
    eta: &dyn BrokenFunction,
) -> Result<f64, Error> {
    state.check_dims(&disc.layout)?;
    xi.check_dims(&disc.layout)?;
    let mesh = &disc.mesh;
    let geo = mesh.geometry();
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let ds = model.dsigma(state.grad_u(mesh, &disc.layout, t));
        let dg = mat_vec(&ds, xi.grad_u(mesh, &disc.layout, t));
        let mut vol = 0.0;
        for (x, _, w) in crate::quadrature::triangle_points(mesh, t) {
            vol += w * dot2(dg, eta.gradient(t, x));
        }
        total += geo.area[t] * vol;
        for k in 0..3 {
            let e = mesh.triangle_edges()[t][k];
            let mean = crate::spaces::edge_mean(mesh, eta, t, k);
            total -= mesh.edge_sign(t, k) * xi.p[e] * geo.edge_length[e] * mean;
        }
    }
    Ok(total)
}

/// Norm operator on the trial space: `S1_0` stiffness plus the `H(div)`
/// inner product on `RT0`.
pub fn xnorm_operator(disc: &Discretization) -> Result<SparseMatrix, Error> {
    let mesh = &disc.mesh;
    let geo = mesh.geometry();
    let mut trips = Vec::with_capacity(18 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let area = geo.area[t];
        let dofs = local_dofs(disc, t);
        let basis = rt_basis(mesh, t);
        let tr = disc.weights.s0[t][0][0] + disc.weights.s0[t][1][1];
        for i in 0..3 {
            for j in 0..3 {
                if let (Some(a), Some(b)) = (dofs[i], dofs[j]) {
                    trips.push((a, b, area * dot2(geo.grad_lambda[t][i], geo.grad_lambda[t][j])));
                }
                let (bi, bj) = (basis[i], basis[j]);
                let v = area * (dot2(bi.mean, bj.mean) + bi.slope * bj.slope * tr) + 4.0 * area * bi.slope * bj.slope;
                trips.push((dofs[3 + i].unwrap(), dofs[3 + j].unwrap(), v));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(disc.ndof(), &trips)?)
}

/// `(g^T K^{-1} g)^{1/2}` for a factorized norm operator `K`.
pub fn dual_norm(k: &LinearSolver, g: &[f64]) -> Result<f64, LinalgError> {
    let y = k.solve(g)?;
    Ok(crate::linalg::dot(g, &y).max(0.0).sqrt())
}

/// Dual norms of the two residuals of the mixed system: the first over
/// broken `P1` with the `H1(T)` norm, the second over `S1_0 x RT0` with
/// the norm operator.
pub fn mixed_residual(
    disc: &Discretization,
    model: &PhiModel,
    state: &DiscreteState,
    xnorm: &LinearSolver,
) -> Result<(f64, f64), Error> {
    let vh = state.v_rep.as_ref().ok_or(Error::Dimension { expected: disc.mesh.n_triangles(), got: 0 })?;
    if vh.0.len() != disc.mesh.n_triangles() {
        return Err(Error::Dimension { expected: disc.mesh.n_triangles(), got: vh.0.len() });
    }
    let v1 = residual_representer(disc, model, state)?;
    let first: f64 = (0..disc.mesh.n_triangles())
        .map(|t| {
            let s = [vh.0[t][0] + v1.0[t][0], vh.0[t][1] + v1.0[t][1], vh.0[t][2] + v1.0[t][2]];
            p1_norm2(&disc.mesh, t, &s)
        })
        .sum::<f64>()
        .sqrt();
    let g2 = bprime_vector(disc, model, state, vh)?;
    Ok((first, dual_norm(xnorm, &g2)?))
}
