//! Built-in benchmark problems.

use std::f64::consts::PI;

use crate::estimator::{ExactSolution, C_DF_SQUARE, C_F_LSHAPE, C_F_SQUARE};
use crate::mesh::{make_lshape_mesh, make_square_mesh, Mesh, Point};
use crate::nonlinearity::{norm, Mat2, PhiModel, Vec2};

/// Reference energy of the manufactured solution on the square for example-a.
pub const E_REF_SQUARE: f64 = -5.774_337_908_509;
/// Extrapolated reference energy on the L-shape with `f = 1` for example-a.
pub const E_REF_LSHAPE: f64 = -3.657_423_002_939e-2;

/// `u = cos(pi x / 2) cos(pi y / 2)` on `(-1, 1)^2` with
/// `f = -div sigma(grad u)`.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedSquare {
    pub model: PhiModel,
}

impl ExactSolution for ManufacturedSquare {
    fn u(&self, x: Point) -> f64 {
        (PI * x[0] / 2.0).cos() * (PI * x[1] / 2.0).cos()
    }

    fn grad(&self, x: Point) -> Vec2 {
        let (cx, cy) = ((PI * x[0] / 2.0).cos(), (PI * x[1] / 2.0).cos());
        let (sx, sy) = ((PI * x[0] / 2.0).sin(), (PI * x[1] / 2.0).sin());
        [-PI / 2.0 * sx * cy, -PI / 2.0 * cx * sy]
    }

    fn hess(&self, x: Point) -> Mat2 {
        let q = PI * PI / 4.0;
        let (sx, sy) = ((PI * x[0] / 2.0).sin(), (PI * x[1] / 2.0).sin());
        let u = self.u(x);
        [[-q * u, q * sx * sy], [q * sx * sy, -q * u]]
    }

    fn f(&self, x: Point) -> f64 {
        let g = self.grad(x);
        let h = self.hess(x);
        let r = norm(g);
        let lap = h[0][0] + h[1][1];
        let mut f = -self.model.phi(r) * lap;
        if r > 0.0 {
            let ghg = g[0] * (h[0][0] * g[0] + h[0][1] * g[1]) + g[1] * (h[1][0] * g[0] + h[1][1] * g[1]);
            f -= self.model.dphi(r) * ghg / r;
        }
        f
    }
}

/// Domain, data and known constants of a run.
pub struct Problem {
    pub name: String,
    pub mesh: Mesh,
    pub f: Box<dyn Fn(Point) -> f64>,
    pub exact: Option<Box<dyn ExactSolution>>,
    pub e_ref: Option<f64>,
    pub c_f: Option<f64>,
    pub c_df: Option<f64>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("triangles", &self.mesh.n_triangles())
            .field("e_ref", &self.e_ref)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn square(model: PhiModel) -> Self {
        let exact = ManufacturedSquare { model };
        Self {
            name: "square".into(),
            mesh: make_square_mesh(),
            f: Box::new(move |x| exact.f(x)),
            exact: Some(Box::new(exact)),
            e_ref: (model == PhiModel::ExampleA).then_some(E_REF_SQUARE),
            c_f: Some(C_F_SQUARE),
            c_df: Some(C_DF_SQUARE),
        }
    }

    pub fn lshape(model: PhiModel) -> Self {
        Self {
            name: "lshape".into(),
            mesh: make_lshape_mesh(),
            f: Box::new(|_| 1.0),
            exact: None,
            e_ref: (model == PhiModel::ExampleA).then_some(E_REF_LSHAPE),
            c_f: Some(C_F_LSHAPE),
            c_df: None,
        }
    }

    /// A user mesh with `f = 1` and no known constants.
    pub fn custom(name: String, mesh: Mesh) -> Self {
        Self { name, mesh, f: Box::new(|_| 1.0), exact: None, e_ref: None, c_f: None, c_df: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_and_boundary() {
        let m = ManufacturedSquare { model: PhiModel::ExampleA };
        assert_eq!(m.u([0.0, 0.0]), 1.0);
        assert_eq!(m.grad([0.0, 0.0]), [0.0, 0.0]);
        for s in [-1.0, -0.3, 0.6, 1.0] {
            assert!(m.u([1.0, s]).abs() < 1e-15 && m.u([s, -1.0]).abs() < 1e-15);
        }
        // f(0) = phi(0) pi^2 / 2
        assert!((m.f([0.0, 0.0]) - 3.0 * PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn rhs_matches_divergence_by_finite_differences() {
        let pts = [[0.1, 0.2], [-0.7, 0.35], [0.5, -0.9], [0.93, 0.01], [-0.2, -0.6]];
        for model in [PhiModel::ExampleA, PhiModel::ExampleB] {
            let m = ManufacturedSquare { model };
            let h = 1e-5;
            for x in pts {
                let s = |y: Point| model.sigma(m.grad(y));
                let div = (s([x[0] + h, x[1]])[0] - s([x[0] - h, x[1]])[0]) / (2.0 * h)
                    + (s([x[0], x[1] + h])[1] - s([x[0], x[1] - h])[1]) / (2.0 * h);
                let f = m.f(x);
                assert!((f + div).abs() <= 1e-5 * f.abs().max(1.0), "{f} vs {}", -div);
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let m = ManufacturedSquare { model: PhiModel::ExampleA };
        let x = [0.3, -0.45];
        let h = 1e-6;
        let hs = m.hess(x);
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            for i in 0..2 {
                let fd = (m.grad(xp)[i] - m.grad(xm)[i]) / (2.0 * h);
                assert!((fd - hs[i][j]).abs() < 1e-8);
            }
        }
    }
}
