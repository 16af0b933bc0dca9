//! Quadrature rules.

use crate::mesh::{Mesh, Point};

/// Symmetric 6-point rule on triangles, exact for polynomials of degree 4.
/// Entries are barycentric coordinates and weights normalized to sum to 1.
pub const TRIANGLE_DEG4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_964_886_32;
    const B1: f64 = 1.0 - 2.0 * A1;
    const W1: f64 = 0.223_381_589_678_011_465_70;
    const A2: f64 = 0.091_576_213_509_770_743_46;
    const B2: f64 = 1.0 - 2.0 * A2;
    const W2: f64 = 0.109_951_743_655_321_867_64;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};

/// Quadrature points of triangle `t` as `(x, barycentric, weight)` where the
/// weights sum to 1 (multiply by the area for integrals).
pub fn triangle_points(mesh: &Mesh, t: usize) -> impl Iterator<Item = (Point, [f64; 3], f64)> + '_ {
    let tri = mesh.triangles()[t];
    let v = mesh.vertices();
    TRIANGLE_DEG4.iter().map(move |&(l, w)| {
        let x = [
            l[0] * v[tri[0]][0] + l[1] * v[tri[1]][0] + l[2] * v[tri[2]][0],
            l[0] * v[tri[0]][1] + l[1] * v[tri[1]][1] + l[2] * v[tri[2]][1],
        ];
        (x, l, w)
    })
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree4_rule_is_exact_on_monomials() {
        // int over reference triangle of x^i y^j = i! j! / (i + j + 2)!
        let fact = |n: u32| (1..=n).product::<u32>().max(1) as f64;
        for i in 0..=4u32 {
            for j in 0..=(4 - i) {
                let q: f64 = TRIANGLE_DEG4
                    .iter()
                    .map(|&(l, w)| 0.5 * w * l[1].powi(i as i32) * l[2].powi(j as i32))
                    .sum();
                let exact = fact(i) * fact(j) / fact(i + j + 2);
                assert!((q - exact).abs() < 1e-15, "x^{i} y^{j}");
            }
        }
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
        let v = adaptive_simpson(&|x: f64| 1.0 / (1.0 + x), 0.0, 10.0, 1e-13);
        assert!((v - 11f64.ln()).abs() < 1e-12);
    }
}
