//! Newton iteration on the least-squares functional, the linear
//! initialization, extreme eigenvalues of the Hessian relative to the norm
//! operator and the discrete inf-sup constant.

use log::{debug, info, warn};

use crate::assembly::{dual_norm, evaluate, mixed_representer, xnorm_operator, HessianKind};
use crate::error::{Error, LinalgError};
use crate::linalg::{pencil_extremes, LinearSolver, PencilExtremes, SparseMatrix};
use crate::nonlinearity::PhiModel;
use crate::spaces::{DiscreteState, Discretization};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub maxiter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, maxiter: 20 }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    /// Dual norm of the gradient at the initial iterate and after every step.
    pub dual_norms: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub damped: bool,
    pub state: DiscreteState,
}

impl NewtonReport {
    pub fn final_dual_norm(&self) -> f64 {
        *self.dual_norms.last().expect("at least the initial norm")
    }
}

/// Newton failure with the last iterate attached.
#[derive(Debug)]
pub struct NewtonFailure {
    pub error: LinalgError,
    pub report: NewtonReport,
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + alpha * d).collect()
}

/// Plain Newton steps `x <- x - H^{-1} grad LS`, stopping when the dual norm
/// of the gradient drops below `tol`. If the dual norm increases in two
/// consecutive steps, later steps are damped by bisection.
pub fn newton(
    disc: &Discretization,
    model: &PhiModel,
    init: &DiscreteState,
    opts: NewtonOptions,
) -> Result<NewtonReport, Box<NewtonFailure>> {
    let fail = |error: LinalgError, report: NewtonReport| Box::new(NewtonFailure { error, report });
    let mut report = NewtonReport {
        dual_norms: Vec::new(),
        iterations: 0,
        converged: false,
        damped: false,
        state: init.clone(),
    };
    let to_linalg = |e: Error| match e {
        Error::Linalg(l) => l,
        other => LinalgError::Factorization(other.to_string()),
    };
    if let Err(e) = init.check_dims(&disc.layout) {
        return Err(fail(to_linalg(e), report));
    }
    let k = match xnorm_operator(disc).map_err(to_linalg).and_then(|k| LinearSolver::new(&k)) {
        Ok(k) => k,
        Err(e) => return Err(fail(e, report)),
    };
    let mut x = init.to_vector();
    let mut increases = 0;
    loop {
        let state = DiscreteState::from_vector(&disc.layout, &x);
        let eval = match evaluate(disc, model, &state, HessianKind::Newton) {
            Ok(e) => e,
            Err(e) => return Err(fail(to_linalg(e), report)),
        };
        let norm = match dual_norm(&k, &eval.gradient) {
            Ok(n) => n,
            Err(e) => return Err(fail(e, report)),
        };
        if let Some(&prev) = report.dual_norms.last() {
            increases = if norm > prev { increases + 1 } else { 0 };
        }
        report.dual_norms.push(norm);
        report.state = state;
        debug!("newton {}: |grad LS|_* = {norm:e}, LS = {:e}", report.iterations, eval.value);
        if norm <= opts.tol {
            report.converged = true;
            return Ok(report);
        }
        if report.iterations >= opts.maxiter {
            warn!("newton stopped after {} iterations at dual norm {norm:e}", opts.maxiter);
            return Ok(report);
        }
        if increases >= 2 && !report.damped {
            warn!("dual norm increased twice in a row, switching to damped Newton steps");
            report.damped = true;
        }
        let hess = eval.hessian.expect("requested");
        let step = match LinearSolver::new(&hess).and_then(|s| s.solve(&eval.gradient)) {
            Ok(d) => d,
            Err(e) => return Err(fail(e, report)),
        };
        x = if report.damped {
            damped_step(disc, model, &k, &x, &step, norm).unwrap_or_else(|| axpy(&x, -1.0, &step))
        } else {
            axpy(&x, -1.0, &step)
        };
        report.iterations += 1;
    }
}

fn damped_step(
    disc: &Discretization,
    model: &PhiModel,
    k: &LinearSolver,
    x: &[f64],
    step: &[f64],
    norm: f64,
) -> Option<Vec<f64>> {
    let mut alpha = 1.0;
    for _ in 0..30 {
        let trial = axpy(x, -alpha, step);
        let s = DiscreteState::from_vector(&disc.layout, &trial);
        let g = evaluate(disc, model, &s, HessianKind::None).ok()?.gradient;
        if dual_norm(k, &g).ok()? < norm {
            if alpha < 1.0 {
                info!("damped Newton step with factor {alpha}");
            }
            return Some(trial);
        }
        alpha *= 0.5;
    }
    None
}

/// Minimizer of the functional for the linear model `phi = w`, computed as one
/// Newton step from the zero state.
pub fn linear_init(disc: &Discretization, w: f64) -> Result<DiscreteState, Error> {
    let model = PhiModel::linear(w)?;
    let zero = DiscreteState::zeros(&disc.layout);
    let eval = evaluate(disc, &model, &zero, HessianKind::Newton)?;
    let hess = eval.hessian.expect("requested");
    let d = LinearSolver::new(&hess)?.solve(&eval.gradient)?;
    let x: Vec<f64> = d.iter().map(|v| -v).collect();
    Ok(DiscreteState::from_vector(&disc.layout, &x))
}

/// Attaches the closed-form mixed representer to a state.
pub fn with_representer(disc: &Discretization, model: &PhiModel, mut state: DiscreteState) -> Result<DiscreteState, Error> {
    state.v_rep = Some(mixed_representer(disc, model, &state)?);
    Ok(state)
}

/// Extreme eigenvalues of the pencil `(hessian, xnorm)`.
pub fn gevp_extremes(hessian: &SparseMatrix, xnorm: &SparseMatrix) -> Result<PencilExtremes, LinalgError> {
    pencil_extremes(hessian, xnorm)
}

/// Extreme eigenvalues of the Newton Hessian at `state` relative to the norm
/// operator.
pub fn hessian_extremes(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<PencilExtremes, Error> {
    let h = evaluate(disc, model, state, HessianKind::Newton)?.hessian.expect("requested");
    let k = xnorm_operator(disc)?;
    Ok(gevp_extremes(&h, &k)?)
}

pub const INFSUP_LIMIT: usize = 10_000;

/// Smallest singular value of `b'(state; ., .)` between the trial space with
/// the norm operator and broken `P1` with the `H1(T)` norm.
pub fn infsup_constant(disc: &Discretization, model: &PhiModel, state: &DiscreteState) -> Result<f64, Error> {
    if disc.ndof() > INFSUP_LIMIT {
        return Err(LinalgError::TooLarge { ndof: disc.ndof(), limit: INFSUP_LIMIT }.into());
    }
    let gn = evaluate(disc, model, state, HessianKind::GaussNewton)?.hessian.expect("requested");
    let k = xnorm_operator(disc)?;
    Ok((pencil_extremes(&gn, &k)?.lambda_min / 2.0).sqrt())
}

/// Smallest `C` with `n_{j+1} <= C n_j^2` over the last `tail` contractions
/// before the final iterate, ignoring steps that end below `floor`.
pub fn quadratic_constant(norms: &[f64], tail: usize, floor: f64) -> f64 {
    let pairs: Vec<(f64, f64)> = norms.windows(2).map(|w| (w[0], w[1])).filter(|&(_, b)| b > floor).collect();
    pairs.iter().rev().take(tail).map(|&(a, b)| b / (a * a)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::mixed_residual;
    use crate::mesh::{make_lshape_mesh, make_square_mesh};

    #[test]
    fn linear_model_converges_in_one_step() {
        let d = Discretization::new(make_lshape_mesh().refine_uniform().mesh, &|_| 1.0);
        let model = PhiModel::linear(2.5).unwrap();
        let r = newton(&d, &model, &DiscreteState::zeros(&d.layout), NewtonOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        let init = linear_init(&d, 2.5).unwrap();
        for (a, b) in init.to_vector().iter().zip(r.state.to_vector()) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = with_representer(&d, &model, init).unwrap();
        let k = LinearSolver::new(&xnorm_operator(&d).unwrap()).unwrap();
        let (r1, r2) = mixed_residual(&d, &model, &s, &k).unwrap();
        assert!(r1 < 1e-10 && r2 < 1e-10, "{r1} {r2}");
    }

    #[test]
    fn zero_data_gives_zero_init() {
        let d = Discretization::new(make_square_mesh(), &|_| 0.0);
        let s = linear_init(&d, 1.0).unwrap();
        assert!(s.to_vector().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_pencil() {
        let d = Discretization::new(make_square_mesh(), &|_| 1.0);
        let k = xnorm_operator(&d).unwrap();
        let e = gevp_extremes(&k, &k).unwrap();
        assert!((e.lambda_min - 1.0).abs() < 1e-10 && (e.lambda_max - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonlinear_newton_reaches_tolerance() {
        let d = Discretization::new(make_square_mesh().refine_uniform().mesh, &|x| 10.0 * (1.0 - x[0] * x[0]));
        let init = linear_init(&d, 2.5).unwrap();
        for model in [PhiModel::ExampleA, PhiModel::ExampleB] {
            let r = newton(&d, &model, &init, NewtonOptions::default()).unwrap();
            assert!(r.converged && r.iterations <= 6, "{:?}", r.dual_norms);
            assert!(!r.damped);
        }
    }

    #[test]
    fn quadratic_constant_of_model_sequence() {
        let norms = [1.0, 0.5, 0.1, 0.01, 1e-4, 1e-8, 1e-15];
        assert!((quadratic_constant(&norms, 3, 1e-13) - 1.0).abs() < 1e-12);
    }
}
