//! The scalar nonlinearity `phi`, the stress map `sigma(A) = phi(|A|) A` and
//! its first and second derivatives.

use std::fmt;
use std::str::FromStr;

use crate::error::ModelError;
use crate::quadrature::adaptive_simpson;

/// Below this gradient magnitude, `|A|` is treated as zero in the derivatives
/// of `sigma`.
pub const EPS_SIGMA: f64 = 1e-12;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];
pub type Tensor3 = [[[f64; 2]; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiModel {
    /// `phi(t) = 2 + (1 + t)^-2`
    ExampleA,
    /// `phi(t) = 2 - (1 + t^2)^-1`
    ExampleB,
    /// `phi(t) = w`
    Linear(f64),
}

impl PhiModel {
    pub fn linear(w: f64) -> Result<Self, ModelError> {
        if w > 0.0 && w.is_finite() {
            Ok(Self::Linear(w))
        } else {
            Err(ModelError::NonPositiveWeight(w))
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn phi(&self, t: f64) -> f64 {
        match *self {
            Self::ExampleA => 2.0 + (1.0 + t).powi(-2),
            Self::ExampleB => 2.0 - 1.0 / (1.0 + t * t),
            Self::Linear(w) => w,
        }
    }

    pub fn dphi(&self, t: f64) -> f64 {
        match *self {
            Self::ExampleA => -2.0 * (1.0 + t).powi(-3),
            Self::ExampleB => 2.0 * t / (1.0 + t * t).powi(2),
            Self::Linear(_) => 0.0,
        }
    }

    pub fn ddphi(&self, t: f64) -> f64 {
        match *self {
            Self::ExampleA => 6.0 * (1.0 + t).powi(-4),
            Self::ExampleB => (2.0 - 6.0 * t * t) / (1.0 + t * t).powi(3),
            Self::Linear(_) => 0.0,
        }
    }

    /// Lower growth constant: `gamma1 <= phi(t)` and `gamma1 <= phi(t) + t phi'(t)`.
    pub fn gamma1(&self) -> f64 {
        match *self {
            Self::ExampleA | Self::ExampleB => 1.0,
            Self::Linear(w) => w,
        }
    }

    /// Upper growth constant.
    pub fn gamma2(&self) -> f64 {
        match *self {
            Self::ExampleA => 3.0,
            Self::ExampleB => 4.0,
            Self::Linear(w) => w,
        }
    }

    /// Lipschitz constant of `D sigma`.
    pub fn lip_dsigma(&self) -> f64 {
        match *self {
            Self::ExampleA => 4.0,
            Self::ExampleB => 2.0,
            Self::Linear(_) => 0.0,
        }
    }

    /// Energy density `int_0^t s phi(s) ds` in closed form.
    pub fn varphi(&self, t: f64) -> Result<f64, ModelError> {
        if t < 0.0 {
            return Err(ModelError::NegativeArgument(t));
        }
        Ok(self.varphi_unchecked(t))
    }

    pub(crate) fn varphi_unchecked(&self, t: f64) -> f64 {
        match *self {
            Self::ExampleA => t * t + t.ln_1p() + 1.0 / (1.0 + t) - 1.0,
            Self::ExampleB => t * t - 0.5 * (t * t).ln_1p(),
            Self::Linear(w) => 0.5 * w * t * t,
        }
    }

    /// Compares the closed-form energy density with adaptive Simpson
    /// quadrature of `s phi(s)` at a few sample points.
    pub fn validate_density(&self) -> Result<(), ModelError> {
        for t in [0.5, 1.0, 2.0, 10.0] {
            let quadrature = adaptive_simpson(&|s| s * self.phi(s), 0.0, t, 1e-13);
            let closed = self.varphi_unchecked(t);
            if (closed - quadrature).abs() > 1e-10 * closed.abs().max(1.0) {
                return Err(ModelError::DensityMismatch { t, closed, quadrature });
            }
        }
        Ok(())
    }

    pub fn sigma(&self, a: Vec2) -> Vec2 {
        let p = self.phi(norm(a));
        [p * a[0], p * a[1]]
    }

    pub fn dsigma(&self, a: Vec2) -> Mat2 {
        let r = norm(a);
        let p = self.phi(r);
        if r <= EPS_SIGMA {
            return [[p, 0.0], [0.0, p]];
        }
        let s = [a[0] / r, a[1] / r];
        let c = self.dphi(r) * r;
        [[p + c * s[0] * s[0], c * s[0] * s[1]], [c * s[1] * s[0], p + c * s[1] * s[1]]]
    }

    /// Second derivative of `sigma`, symmetric in all three indices; zero at
    /// `|A| <= EPS_SIGMA`.
    pub fn hess_sigma(&self, a: Vec2) -> Tensor3 {
        let mut h = [[[0.0; 2]; 2]; 2];
        let r = norm(a);
        if r <= EPS_SIGMA {
            return h;
        }
        let s = [a[0] / r, a[1] / r];
        let d1 = self.dphi(r);
        let c = self.ddphi(r) * r - d1;
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    h[j][k][l] = d1 * (delta(j, k) * s[l] + delta(j, l) * s[k] + delta(k, l) * s[j])
                        + c * s[j] * s[k] * s[l];
                }
            }
        }
        h
    }
}

impl fmt::Display for PhiModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ExampleA => f.write_str("example-a"),
            Self::ExampleB => f.write_str("example-b"),
            Self::Linear(w) => write!(f, "linear:{w}"),
        }
    }
}

impl FromStr for PhiModel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "example-a" => Ok(Self::ExampleA),
            "example-b" => Ok(Self::ExampleB),
            other => {
                let w = other
                    .strip_prefix("linear:")
                    .or_else(|| other.strip_prefix("linear(").and_then(|r| r.strip_suffix(')')))
                    .ok_or_else(|| ModelError::UnknownModel(other.to_string()))?;
                let w: f64 = w.trim().parse().map_err(|_| ModelError::UnknownModel(other.to_string()))?;
                Self::linear(w)
            }
        }
    }
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

/// Eigenvalues of a symmetric 2x2 matrix in ascending order.
pub fn sym_eigenvalues(m: &Mat2) -> [f64; 2] {
    let tr = 0.5 * (m[0][0] + m[1][1]);
    let d = (0.5 * (m[0][0] - m[1][1])).hypot(m[0][1]);
    [tr - d, tr + d]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MODELS: [PhiModel; 3] = [PhiModel::ExampleA, PhiModel::ExampleB, PhiModel::Linear(2.5)];

    #[test]
    fn sigma_values() {
        assert_eq!(PhiModel::ExampleA.sigma([0.0, 0.0]), [0.0, 0.0]);
        let s = PhiModel::ExampleA.sigma([1.0, 0.0]);
        assert!((s[0] - 2.25).abs() < 1e-15 && s[1] == 0.0);
        let s = PhiModel::Linear(2.5).sigma([0.3, -1.2]);
        assert!((s[0] - 0.75).abs() < 1e-15 && (s[1] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn dsigma_at_origin() {
        assert_eq!(PhiModel::ExampleA.dsigma([0.0, 0.0]), [[3.0, 0.0], [0.0, 3.0]]);
        assert_eq!(PhiModel::ExampleB.dsigma([0.0, 0.0]), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(PhiModel::ExampleB.hess_sigma([0.0, 0.0]), [[[0.0; 2]; 2]; 2]);
    }

    #[test]
    fn dsigma_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in MODELS {
            for _ in 0..100 {
                let a = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                let d = model.dsigma(a);
                let h = 1e-6;
                for l in 0..2 {
                    let mut ap = a;
                    let mut am = a;
                    ap[l] += h;
                    am[l] -= h;
                    let (sp, sm) = (model.sigma(ap), model.sigma(am));
                    for j in 0..2 {
                        let fd = (sp[j] - sm[j]) / (2.0 * h);
                        assert!((fd - d[j][l]).abs() <= 1e-6 * d[j][l].abs().max(1.0), "{model} {a:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn hess_sigma_matches_finite_differences_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in MODELS {
            for _ in 0..100 {
                let r = rng.gen_range(1.0..4.0);
                let th = rng.gen_range(0.0..std::f64::consts::TAU);
                let a = [r * th.cos(), r * th.sin()];
                let t = model.hess_sigma(a);
                let h = 1e-5;
                let scale = t.iter().flatten().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
                for l in 0..2 {
                    let mut ap = a;
                    let mut am = a;
                    ap[l] += h;
                    am[l] -= h;
                    let (dp, dm) = (model.dsigma(ap), model.dsigma(am));
                    for j in 0..2 {
                        for k in 0..2 {
                            let fd = (dp[j][k] - dm[j][k]) / (2.0 * h);
                            assert!((fd - t[j][k][l]).abs() <= 1e-5 * scale);
                        }
                    }
                }
                for (j, k, l) in [(0, 0, 1), (0, 1, 1), (1, 0, 0)] {
                    let v = t[j][k][l];
                    for (p, q, s) in [(j, l, k), (k, j, l), (k, l, j), (l, j, k), (l, k, j)] {
                        assert!((t[p][q][s] - v).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn varphi_closed_form_matches_quadrature() {
        for model in MODELS {
            model.validate_density().unwrap();
            assert_eq!(model.varphi(0.0).unwrap(), 0.0);
        }
        let q = adaptive_simpson(&|s| s * (2.0 + (1.0 + s).powi(-2)), 0.0, 1.0, 1e-14);
        assert!((PhiModel::ExampleA.varphi(1.0).unwrap() - q).abs() < 1e-12);
        assert!((PhiModel::Linear(3.0).varphi(2.0).unwrap() - 6.0).abs() < 1e-15);
        assert!(PhiModel::ExampleA.varphi(-1.0).is_err());
    }

    #[test]
    fn varphi_derivative_is_t_phi() {
        for model in MODELS {
            for t in [0.1, 0.7, 2.0, 9.0] {
                let h = 1e-5;
                let fd = (model.varphi_unchecked(t + h) - model.varphi_unchecked(t - h)) / (2.0 * h);
                assert!((fd - t * model.phi(t)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn growth_bounds_on_samples() {
        for model in MODELS {
            let mut t = 0.0;
            while t <= 1e6 {
                let p = model.phi(t);
                let q = p + t * model.dphi(t);
                assert!(model.gamma1() <= p + 1e-14 && p <= model.gamma2() + 1e-14);
                assert!(model.gamma1() <= q + 1e-14 && q <= model.gamma2() + 1e-14);
                t = if t == 0.0 { 1e-3 } else { t * 1.1 };
            }
        }
    }

    #[test]
    fn constants_and_names() {
        assert_eq!((PhiModel::ExampleA.gamma1(), PhiModel::ExampleA.gamma2(), PhiModel::ExampleA.lip_dsigma()), (1.0, 3.0, 4.0));
        assert_eq!((PhiModel::ExampleB.gamma1(), PhiModel::ExampleB.gamma2(), PhiModel::ExampleB.lip_dsigma()), (1.0, 4.0, 2.0));
        for s in ["example-a", "example-b", "linear:2.5"] {
            assert_eq!(s.parse::<PhiModel>().unwrap().name(), s);
        }
        assert_eq!("linear(1)".parse::<PhiModel>().unwrap(), PhiModel::Linear(1.0));
        assert!("linear:-1".parse::<PhiModel>().is_err());
        assert!("cubic".parse::<PhiModel>().is_err());
    }
}
