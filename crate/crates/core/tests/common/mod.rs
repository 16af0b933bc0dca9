//! Strategies and property bodies shared by the invariant suite and the
//! acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeSet;

use nldpg::assembly::{bprime_form, mixed_representer, p1_norm2};
use nldpg::estimator::doerfler_mark;
use nldpg::mesh::{make_lshape_mesh, make_square_mesh, Mesh, Point};
use nldpg::nonlinearity::{norm, sym_eigenvalues, PhiModel};
use nldpg::solver::{linear_init, newton, NewtonOptions};
use nldpg::spaces::{inc_interpolate, s0_matrix, BrokenFunction, BrokenP1, DiscreteState, Discretization, DofLayout};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const MODELS: [PhiModel; 2] = [PhiModel::ExampleA, PhiModel::ExampleB];

pub fn vec2() -> impl Strategy<Value = [f64; 2]> {
    prop_oneof![
        4 => [-3.0..3.0f64, -3.0..3.0f64],
        1 => [-1e-6..1e-6f64, -1e-6..1e-6f64],
        1 => (0usize..3, -1.0..1.0f64).prop_map(|(k, s)| {
            let r = [0.0, 1e-14, 1e-7][k];
            [r * s.cos(), r * s.sin()]
        }),
    ]
}

pub fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn triangle() -> impl Strategy<Value = Mesh> {
    [[-2.0..2.0f64, -2.0..2.0f64], [-2.0..2.0f64, -2.0..2.0f64], [-2.0..2.0f64, -2.0..2.0f64]]
        .prop_filter_map("degenerate triangle", |[a, b, c]| {
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if cross.abs() < 1e-2 {
                return None;
            }
            let v = if cross > 0.0 { vec![a, b, c] } else { vec![a, c, b] };
            Mesh::new(v, vec![[0, 1, 2]]).ok()
        })
}

pub fn random_state(layout: &DofLayout, coeffs: &[f64]) -> DiscreteState {
    let x: Vec<f64> = (0..layout.ndof()).map(|i| coeffs[i % coeffs.len()] * (1.0 + (i as f64 * 0.37).sin())).collect();
    DiscreteState::from_vector(layout, &x)
}

pub fn check_p1_identity(mesh: &Mesh, v: [f64; 3]) -> Result<(), TestCaseError> {
    let area = mesh.geometry().area[0];
    let bp = BrokenP1(vec![v]);
    let g = bp.gradient(mesh, 0);
    let s = s0_matrix(mesh, 0);
    let mg = [g[0] + s[0][0] * g[0] + s[0][1] * g[1], g[1] + s[1][0] * g[0] + s[1][1] * g[1]];
    let rhs = area * bp.mean(0).powi(2) + area * dot(g, mg);
    let lhs = p1_norm2(mesh, 0, &v);
    prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300), "{lhs} vs {rhs}");
    Ok(())
}

pub fn check_s0_bounds(mesh: &Mesh, v: [f64; 2]) -> Result<(), TestCaseError> {
    let h = mesh.geometry().diameter[0];
    let s = s0_matrix(mesh, 0);
    let [l0, l1] = sym_eigenvalues(&s);
    prop_assert!(l0.min(l1) >= -1e-15);
    let m = [[1.0 + s[0][0], s[0][1]], [s[1][0], 1.0 + s[1][1]]];
    let mv = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
    let nv = norm(v);
    prop_assert!(nv <= norm(mv) * (1.0 + 1e-14));
    prop_assert!(norm(mv) <= (1.0 + h * h) * nv * (1.0 + 1e-14));
    let root = dot(v, mv).sqrt();
    prop_assert!(nv <= root * (1.0 + 1e-14) && root <= (1.0 + h) * nv * (1.0 + 1e-14));
    Ok(())
}

pub fn check_doerfler(eta2: &[f64], theta: f64) -> Result<(), TestCaseError> {
    let total: f64 = eta2.iter().sum();
    if total <= 0.0 {
        return Ok(());
    }
    let marked = doerfler_mark(eta2, theta);
    let sum: f64 = marked.iter().map(|&t| eta2[t]).sum();
    prop_assert!(sum >= theta * total * (1.0 - 1e-14));
    let smallest = marked.iter().map(|&t| eta2[t]).fold(f64::INFINITY, f64::min);
    prop_assert!(sum - smallest < theta * total);
    // no set with fewer members reaches the fraction
    let mut sorted = eta2.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let best: f64 = sorted[..marked.len() - 1].iter().sum();
    prop_assert!(best < theta * total);
    Ok(())
}

/// `x - mid(T)`-quadratic polynomial per triangle.
pub struct BrokenP2<'a> {
    pub mesh: &'a Mesh,
    pub c: Vec<[f64; 6]>,
}

impl BrokenFunction for BrokenP2<'_> {
    fn value(&self, t: usize, x: Point) -> f64 {
        let m = self.mesh.geometry().centroid[t];
        let (a, b) = (x[0] - m[0], x[1] - m[1]);
        let c = &self.c[t];
        c[0] + c[1] * a + c[2] * b + c[3] * a * a + c[4] * a * b + c[5] * b * b
    }

    fn gradient(&self, t: usize, x: Point) -> [f64; 2] {
        let m = self.mesh.geometry().centroid[t];
        let (a, b) = (x[0] - m[0], x[1] - m[1]);
        let c = &self.c[t];
        [c[1] + 2.0 * c[3] * a + c[4] * b, c[2] + c[4] * a + 2.0 * c[5] * b]
    }
}

pub struct Difference<'a>(pub BrokenP2<'a>, pub BrokenP1);

impl BrokenFunction for Difference<'_> {
    fn value(&self, t: usize, x: Point) -> f64 {
        self.0.value(t, x) - (self.0.mesh, &self.1).value(t, x)
    }

    fn gradient(&self, t: usize, x: Point) -> [f64; 2] {
        let g = self.0.gradient(t, x);
        let h = self.1.gradient(self.0.mesh, t);
        [g[0] - h[0], g[1] - h[1]]
    }
}

pub fn nvb_mesh(rounds: &[Vec<usize>], start: Mesh) -> (Mesh, Vec<usize>) {
    let mut mesh = start;
    let mut ancestor: Vec<usize> = (0..mesh.n_triangles()).collect();
    for marks in rounds {
        let nt = mesh.n_triangles();
        let marked: BTreeSet<usize> = marks.iter().map(|m| m % nt).collect();
        let marked: Vec<usize> = marked.into_iter().collect();
        let r = mesh.refine_nvb(&marked);
        ancestor = r.hierarchy.parent.iter().map(|&p| ancestor[p]).collect();
        mesh = r.mesh;
    }
    (mesh, ancestor)
}

pub fn shape_key(mesh: &Mesh, t: usize) -> (i64, i64) {
    let tri = mesh.triangles()[t];
    let p: Vec<Point> = tri.iter().map(|&v| mesh.vertices()[v]).collect();
    let mut l: Vec<f64> = (0..3).map(|k| norm(sub(p[(k + 1) % 3], p[(k + 2) % 3]))).collect();
    l.sort_by(f64::total_cmp);
    ((l[0] / l[2] * 1e8).round() as i64, (l[1] / l[2] * 1e8).round() as i64)
}

pub fn generic_mesh() -> Mesh {
    let v = vec![[0.0, 0.0], [1.3, 0.1], [1.1, 0.9], [0.2, 1.2], [0.6, 0.55]];
    let t = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
    Mesh::with_longest_edge_refinement(v, t).unwrap()
}

pub fn check_nvb(which: usize, rounds: &[Vec<usize>]) -> Result<(), TestCaseError> {
    let start = match which {
        0 => make_square_mesh(),
        1 => make_lshape_mesh(),
        _ => generic_mesh(),
    };
    let total = start.total_area();
    let (mesh, ancestor) = nvb_mesh(rounds, start);
    prop_assert!(mesh.check_regularity().is_ok());
    prop_assert!(mesh.find_hanging_node().is_none());
    prop_assert!((mesh.total_area() - total).abs() < 1e-12 * total);
    let mut classes = vec![BTreeSet::new(); ancestor.iter().max().unwrap() + 1];
    for t in 0..mesh.n_triangles() {
        classes[ancestor[t]].insert(shape_key(&mesh, t));
    }
    prop_assert!(classes.iter().all(|c| c.len() <= 4), "{:?}", classes.iter().map(BTreeSet::len).collect::<Vec<_>>());
    Ok(())
}

pub fn check_fortin(coeffs: &[f64], dir: &[f64], p2: &[f64], model: PhiModel) -> Result<(), TestCaseError> {
    let disc = Discretization::new(make_lshape_mesh().refine_uniform().mesh, &|_| 1.0);
    let state = random_state(&disc.layout, coeffs);
    let xi = random_state(&disc.layout, dir);
    let c = (0..disc.mesh.n_triangles())
        .map(|t| {
            let s = 1.0 + 0.1 * t as f64;
            [p2[0] * s, p2[1], p2[2] / s, p2[3] * s, p2[4], p2[5] * (t % 3) as f64]
        })
        .collect();
    let v = BrokenP2 { mesh: &disc.mesh, c };
    let inc = inc_interpolate(&disc.mesh, &v);
    let b = bprime_form(&disc, &model, &state, &xi, &Difference(v, inc)).unwrap();
    prop_assert!(b.abs() <= 1e-12, "{b}");
    Ok(())
}

pub fn check_cr_continuity(a: f64, b: f64, c: f64, model: PhiModel) -> Result<(), TestCaseError> {
    let mesh = make_lshape_mesh().refine_uniform().mesh.refine_nvb(&[0, 7, 30]).mesh;
    let disc = Discretization::new(mesh, &|x| c + a * x[0] + b * x[1] * x[1]);
    let init = linear_init(&disc, 2.5).unwrap();
    let r = newton(&disc, &model, &init, NewtonOptions::default()).unwrap();
    prop_assert!(r.converged);
    let v = mixed_representer(&disc, &model, &r.state).unwrap();
    let scale = v.0.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let (jump, boundary) = v.cr_defect(&disc.mesh);
    prop_assert!(jump <= 1e-9 * scale && boundary <= 1e-9 * scale, "{jump} {boundary} {scale}");
    Ok(())
}
