//! A posteriori error quantities: local indicators, Dörfler marking, the
//! energy, exact errors for known solutions, the guaranteed upper bound and
//! the uniqueness criterion.

use crate::assembly::{evaluate, HessianKind};
use crate::error::Error;
use crate::linalg::{dot, LinearSolver, SparseMatrix};
use crate::nonlinearity::{norm, Mat2, PhiModel, Vec2};
use crate::quadrature::triangle_points;
use crate::spaces::{BrokenP1, DiscreteState, Discretization};

/// `kappa = (1/48 + 1/j_{1,1}^2)^{1/2}`
pub const KAPPA: f64 = 0.29823;
/// Discrete Friedrichs constant for convex domains with right isosceles triangles.
pub const C_DF_SQUARE: f64 = 6.24;
/// Friedrichs constant of `(-1, 1)^2`: `1 / sqrt(lambda_1) = sqrt(2) / pi`.
pub const C_F_SQUARE: f64 = std::f64::consts::SQRT_2 / std::f64::consts::PI;
/// Friedrichs constant of the L-shaped domain, `1 / sqrt(9.6397238)`.
pub const C_F_LSHAPE: f64 = 0.322_082_93;
/// Literal square-domain uniqueness threshold, reported next to the formula value.
pub const THRESHOLD_SQUARE_LITERAL: f64 = 0.172_398_92;

/// A known solution `u` with `f = -div sigma(grad u)`.
pub trait ExactSolution {
    fn u(&self, x: [f64; 2]) -> f64;
    fn grad(&self, x: [f64; 2]) -> Vec2;
    fn hess(&self, x: [f64; 2]) -> Mat2;
    fn f(&self, x: [f64; 2]) -> f64;
}

#[derive(Clone, Debug)]
pub struct EstimatorReport {
    /// `eta(T)`; the global value is the square root of the sum of squares.
    pub eta_local: Vec<f64>,
    pub eta_global: f64,
    pub ls_value: f64,
    pub hf_norm2: f64,
}

/// `eta^2(T) = LS_T + h_T^2 ||f||^2_{L2(T)}`.
pub fn local_estimator(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<EstimatorReport, Error> {
    let eval = evaluate(disc, model, state, HessianKind::None)?;
    let geo = disc.mesh.geometry();
    let mut hf = 0.0;
    let mut sum = 0.0;
    let eta_local = eval
        .per_element
        .iter()
        .enumerate()
        .map(|(t, ls)| {
            let osc = geo.diameter[t].powi(2) * disc.weights.normf2[t];
            hf += osc;
            sum += ls + osc;
            (ls + osc).sqrt()
        })
        .collect();
    Ok(EstimatorReport { eta_local, eta_global: sum.sqrt(), ls_value: eval.value, hf_norm2: hf })
}

/// Smallest set of triangles, chosen greedily by decreasing indicator with
/// ties broken by index, whose squared indicators sum to at least
/// `theta * sum`. Takes squared indicators.
pub fn doerfler_mark(eta2: &[f64], theta: f64) -> Vec<usize> {
    assert!(theta > 0.0 && theta <= 1.0, "theta must lie in (0, 1]");
    let total: f64 = eta2.iter().sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..eta2.len()).collect();
    order.sort_by(|&a, &b| eta2[b].total_cmp(&eta2[a]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for t in order {
        if acc >= theta * total {
            break;
        }
        acc += eta2[t];
        marked.push(t);
    }
    marked
}

/// `E(u_C) = int varphi(|grad u_C|) - int f u_C`.
pub fn energy(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<f64, Error> {
    state.check_dims(&disc.layout)?;
    let mesh = &disc.mesh;
    let geo = mesh.geometry();
    let nodal = state.u_at_vertices(mesh, &disc.layout);
    let mut e = 0.0;
    for t in 0..mesh.n_triangles() {
        let g = state.grad_u(mesh, &disc.layout, t);
        let um = mesh.triangles()[t].iter().map(|&v| nodal[v]).sum::<f64>() / 3.0;
        // u_C = u(mid T) + g . (x - mid T)
        let fu = disc.weights.pi0f[t] * um + g[0] * disc.weights.h0f[t][0] + g[1] * disc.weights.h0f[t][1];
        e += geo.area[t] * (model.varphi(norm(g))? - fu);
    }
    Ok(e)
}

/// `sqrt(E(u_C) - E_ref)`, or `None` if the difference is negative.
pub fn energy_diff_sqrt(energy: f64, reference: f64) -> Option<f64> {
    let d = energy - reference;
    (d >= 0.0).then(|| d.sqrt())
}

/// `(|||u - u_C|||, ||sigma(grad u) - p_RT||_{H(div)})` by degree-4 quadrature.
pub fn exact_errors(
    disc: &Discretization,
    model: &PhiModel,
    state: &DiscreteState,
    exact: &dyn ExactSolution,
) -> Result<(f64, f64), Error> {
    state.check_dims(&disc.layout)?;
    let mesh = &disc.mesh;
    let (mut e_energy, mut e_hdiv) = (0.0, 0.0);
    for t in 0..mesh.n_triangles() {
        let area = mesh.geometry().area[t];
        let mid = mesh.geometry().centroid[t];
        let g = state.grad_u(mesh, &disc.layout, t);
        let rt = state.rt_on(mesh, t);
        for (x, _, w) in triangle_points(mesh, t) {
            let gu = exact.grad(x);
            e_energy += area * w * ((gu[0] - g[0]).powi(2) + (gu[1] - g[1]).powi(2));
            let p = model.sigma(gu);
            let q = rt.eval(mid, x);
            let div_err = -exact.f(x) - rt.div();
            e_hdiv += area * w * ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + div_err * div_err);
        }
    }
    Ok((e_energy.sqrt(), e_hdiv.sqrt()))
}

/// Dual norm of `w -> F(w) - int sigma(grad u_C) . grad_NC w` over `CR1_0`
/// with the broken `H1` norm.
pub fn cr_residual_dual_norm(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<f64, Error> {
    state.check_dims(&disc.layout)?;
    let mesh = &disc.mesh;
    let geo = mesh.geometry();
    let mut index = vec![None; mesh.n_edges()];
    let mut n = 0;
    for (e, &b) in mesh.edge_on_boundary().iter().enumerate() {
        if !b {
            index[e] = Some(n);
            n += 1;
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut rhs = vec![0.0; n];
    let mut trips = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let area = geo.area[t];
        let gl = &geo.grad_lambda[t];
        let s = model.sigma(state.grad_u(mesh, &disc.layout, t));
        let h0f = disc.weights.h0f[t];
        // basis on T: psi_k = 1 - 2 lambda_k for the edge opposite vertex k
        for k in 0..3 {
            let Some(a) = index[mesh.triangle_edges()[t][k]] else { continue };
            let f_psi = area * (disc.weights.pi0f[t] / 3.0 - 2.0 * (gl[k][0] * h0f[0] + gl[k][1] * h0f[1]));
            rhs[a] += f_psi + 2.0 * area * (s[0] * gl[k][0] + s[1] * gl[k][1]);
            for l in 0..3 {
                let Some(b) = index[mesh.triangle_edges()[t][l]] else { continue };
                let mass = if k == l { area / 3.0 } else { 0.0 };
                trips.push((a, b, mass + 4.0 * area * (gl[k][0] * gl[l][0] + gl[k][1] * gl[l][1])));
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, &trips)?;
    let z = LinearSolver::new(&a)?.solve(&rhs)?;
    Ok(dot(&rhs, &z).max(0.0).sqrt())
}

/// `((1 + C_dF^2) ||res||^2_{CR*} + kappa^2 ||h f||^2)^{1/2} / gamma_1`.
pub fn guaranteed_bound(
    disc: &Discretization,
    model: &PhiModel,
    state: &DiscreteState,
    c_df: f64,
    kappa: f64,
) -> Result<f64, Error> {
    let dual = cr_residual_dual_norm(disc, model, state)?;
    let geo = disc.mesh.geometry();
    let hf: f64 = (0..disc.mesh.n_triangles()).map(|t| geo.diameter[t].powi(2) * disc.weights.normf2[t]).sum();
    Ok(((1.0 + c_df * c_df) * dual * dual + kappa * kappa * hf).sqrt() / model.gamma1())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniqueness {
    pub vmax: f64,
    pub threshold: f64,
    pub holds: bool,
}

/// `gamma_1^2 / (Lip(D sigma) (1 + C_F^2))`, infinite for the linear model.
pub fn uniqueness_threshold(model: &PhiModel, c_f: f64) -> f64 {
    let lip = model.lip_dsigma();
    if lip == 0.0 {
        f64::INFINITY
    } else {
        model.gamma1().powi(2) / (lip * (1.0 + c_f * c_f))
    }
}

/// `vmax = max_T |grad v_h|` (Euclidean) against the threshold.
pub fn uniqueness_check(disc: &Discretization, model: &PhiModel, v_rep: &BrokenP1, c_f: f64) -> Uniqueness {
    let vmax = (0..disc.mesh.n_triangles()).map(|t| norm(v_rep.gradient(&disc.mesh, t))).fold(0.0, f64::max);
    let threshold = uniqueness_threshold(model, c_f);
    Uniqueness { vmax, threshold, holds: vmax < threshold }
}

/// Aitken's delta-squared extrapolation `x_l - (dx_l)^2 / d2x_l` of a sequence.
pub fn aitken(x: &[f64]) -> Vec<f64> {
    x.windows(3)
        .map(|w| {
            let d1 = w[1] - w[0];
            let d2 = w[2] - 2.0 * w[1] + w[0];
            if d2 == 0.0 {
                w[2]
            } else {
                w[0] - d1 * d1 / d2
            }
        })
        .collect()
}
