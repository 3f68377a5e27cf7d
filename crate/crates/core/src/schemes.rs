//! Residual systems for one implicit time level of each flow.
//!
//! Unknown vectors are laid out as `[x_0, y_0, x_1, y_1, ..., x_{N-1}, y_{N-1}]`
//! followed by the multipliers: `gamma` for Willmore, `lambda, mu, gamma` for
//! Helfrich. The tangential speed `w` and tangents `T` are frozen at the old
//! curve; everything else is evaluated on the (old, candidate) pair.

use crate::geometry::{edge_quantities, inner, tangential_velocity, vertex_tangents, FlowParams, PolygonalCurve};
use crate::gradients::{grad_area, grad_bending, grad_length, CurvePair};
use crate::solver::ResidualSystem;
use crate::{FlowError, Point2, Result, Scalar};

/// Relative threshold on the length/area Gram determinant.
pub const GRAM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenExplicitData<T> {
    pub w: Vec<T>,
    pub tangents: Vec<Point2<T>>,
    pub old: PolygonalCurve<T>,
}

impl<T: Scalar> FrozenExplicitData<T> {
    pub fn new(old: PolygonalCurve<T>, alpha: T) -> Result<Self> {
        let (_, t) = edge_quantities(&old)?;
        let tangents = vertex_tangents(&t)?;
        let w = tangential_velocity(&old, alpha)?;
        Ok(Self { w, tangents, old })
    }

    pub fn len(&self) -> usize {
        self.old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old.is_empty()
    }

    /// The explicit tangential field `w_i T_i`.
    pub fn tangential_field(&self) -> Vec<Point2<T>> {
        self.w.iter().zip(&self.tangents).map(|(&w, &t)| t * w).collect()
    }
}

fn split_vertices<T: Scalar>(u: &[T], n: usize, extra: usize) -> Result<Vec<Point2<T>>> {
    if u.len() != 2 * n + extra {
        return Err(FlowError::LengthMismatch { expected: 2 * n + extra, found: u.len() });
    }
    Ok(u[..2 * n].chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect())
}

fn push_vertices<T: Scalar>(out: &mut Vec<T>, vertices: &[Point2<T>]) {
    for p in vertices {
        out.push(p.x);
        out.push(p.y);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WillmoreUnknowns<T> {
    pub new_vertices: Vec<Point2<T>>,
    pub gamma: T,
}

impl<T: Scalar> WillmoreUnknowns<T> {
    pub fn to_vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * self.new_vertices.len() + 1);
        push_vertices(&mut out, &self.new_vertices);
        out.push(self.gamma);
        out
    }

    pub fn from_slice(u: &[T], n: usize) -> Result<Self> {
        let new_vertices = split_vertices(u, n, 1)?;
        Ok(Self { new_vertices, gamma: u[2 * n] })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HelfrichUnknowns<T> {
    pub new_vertices: Vec<Point2<T>>,
    pub lambda: T,
    pub mu: T,
    pub gamma: T,
}

impl<T: Scalar> HelfrichUnknowns<T> {
    pub fn to_vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * self.new_vertices.len() + 3);
        push_vertices(&mut out, &self.new_vertices);
        out.extend([self.lambda, self.mu, self.gamma]);
        out
    }

    pub fn from_slice(u: &[T], n: usize) -> Result<Self> {
        let new_vertices = split_vertices(u, n, 3)?;
        Ok(Self { new_vertices, lambda: u[2 * n], mu: u[2 * n + 1], gamma: u[2 * n + 2] })
    }
}

/// Schur complement `det G(dB, dL, dA) / det G(dL, dA)` in the weighted inner product.
///
/// Equals the squared weighted norm of the part of `d_b` orthogonal to
/// `span{d_l, d_a}`, so it is never negative; rounding noise below zero is clipped.
pub fn gram_ratio<T: Scalar>(d_b: &[Point2<T>], d_l: &[Point2<T>], d_a: &[Point2<T>], weights: &[T]) -> Result<T> {
    let n = weights.len();
    for v in [d_b, d_l, d_a] {
        if v.len() != n {
            return Err(FlowError::LengthMismatch { expected: n, found: v.len() });
        }
    }
    let bb = inner(d_b, d_b, weights);
    let bl = inner(d_b, d_l, weights);
    let ba = inner(d_b, d_a, weights);
    let ll = inner(d_l, d_l, weights);
    let la = inner(d_l, d_a, weights);
    let aa = inner(d_a, d_a, weights);
    let det2 = ll * aa - la * la;
    let scale = ll * aa;
    if !(det2 >= T::lit(GRAM_FLOOR) * scale) || !(scale > T::zero()) {
        return Err(FlowError::SingularGram { det: det2.as_f64(), scale: scale.as_f64() });
    }
    // Cofactor expansion of the 3x3 determinant along its first row, divided by det2.
    let det3 = bb * det2 - bl * (bl * aa - la * ba) + ba * (bl * la - ll * ba);
    Ok((det3 / det2).max(T::zero()))
}

fn motion_rows<T: Scalar>(frozen: &FrozenExplicitData<T>, new: &PolygonalCurve<T>, dt: T, rhs: &[Point2<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(2 * rhs.len() + 3);
    for ((&x, &x_old), &v) in new.vertices().iter().zip(frozen.old.vertices()).zip(rhs) {
        let row = (x - x_old) / dt - v;
        out.push(row.x);
        out.push(row.y);
    }
    out
}

/// Residual of the Willmore scheme, length `2N + 1`.
///
/// Motion rows are `(X - X_old)/dt - V` with `V = -dB + wT + gamma dB`; the last
/// row is `(dB, wT + gamma dB)`.
pub fn willmore_residual<T: Scalar>(
    u: &WillmoreUnknowns<T>,
    frozen: &FrozenExplicitData<T>,
    params: &FlowParams<T>,
) -> Result<Vec<T>> {
    let new = PolygonalCurve::new(u.new_vertices.clone())?;
    let pair = CurvePair::new(&frozen.old, &new, params.second_diff)?;
    let d_b = grad_bending(&pair, params.c0)?;
    let wt = frozen.tangential_field();
    let tangential: Vec<Point2<T>> = wt.iter().zip(&d_b).map(|(&a, &b)| a + b * u.gamma).collect();
    let rhs: Vec<Point2<T>> = tangential.iter().zip(&d_b).map(|(&a, &b)| a - b).collect();
    let mut out = motion_rows(frozen, &new, params.dt, &rhs);
    out.push(inner(&d_b, &tangential, pair.weights()));
    Ok(out)
}

/// Residual of the Helfrich scheme, length `2N + 3`.
///
/// Motion rows use `V = -dB + lambda dL + mu dA + wT + gamma dB`; the trailing
/// rows are `(dL, V)`, `(dA, V)` and `(dB, V) + D`.
pub fn helfrich_residual<T: Scalar>(
    u: &HelfrichUnknowns<T>,
    frozen: &FrozenExplicitData<T>,
    params: &FlowParams<T>,
) -> Result<Vec<T>> {
    let new = PolygonalCurve::new(u.new_vertices.clone())?;
    let pair = CurvePair::new(&frozen.old, &new, params.second_diff)?;
    let d_b = grad_bending(&pair, params.c0)?;
    let d_l = grad_length(&pair)?;
    let d_a = grad_area(&pair);
    let weights = pair.weights();
    let dissipation = gram_ratio(&d_b, &d_l, &d_a, weights)?;
    let rhs: Vec<Point2<T>> = (0..new.len())
        .map(|i| d_b[i] * (u.gamma - T::one()) + d_l[i] * u.lambda + d_a[i] * u.mu + frozen.tangents[i] * frozen.w[i])
        .collect();
    let mut out = motion_rows(frozen, &new, params.dt, &rhs);
    out.push(inner(&d_l, &rhs, weights));
    out.push(inner(&d_a, &rhs, weights));
    out.push(inner(&d_b, &rhs, weights) + dissipation);
    Ok(out)
}

/// Pure tangential redistribution: `(X - X_old)/dt - wT`, length `2N`.
pub fn relocation_residual<T: Scalar>(
    new_vertices: &[Point2<T>],
    frozen: &FrozenExplicitData<T>,
    dt: T,
) -> Result<Vec<T>> {
    let new = PolygonalCurve::new(new_vertices.to_vec())?;
    Ok(motion_rows(frozen, &new, dt, &frozen.tangential_field()))
}

pub struct WillmoreSystem<'a, T> {
    pub frozen: &'a FrozenExplicitData<T>,
    pub params: FlowParams<T>,
}

impl<T: Scalar> ResidualSystem<T> for WillmoreSystem<'_, T> {
    fn dimension(&self) -> usize {
        2 * self.frozen.len() + 1
    }
    fn evaluate(&self, u: &[T]) -> Result<Vec<T>> {
        willmore_residual(&WillmoreUnknowns::from_slice(u, self.frozen.len())?, self.frozen, &self.params)
    }
}

pub struct HelfrichSystem<'a, T> {
    pub frozen: &'a FrozenExplicitData<T>,
    pub params: FlowParams<T>,
}

impl<T: Scalar> ResidualSystem<T> for HelfrichSystem<'_, T> {
    fn dimension(&self) -> usize {
        2 * self.frozen.len() + 3
    }
    fn evaluate(&self, u: &[T]) -> Result<Vec<T>> {
        helfrich_residual(&HelfrichUnknowns::from_slice(u, self.frozen.len())?, self.frozen, &self.params)
    }
}

pub struct RelocationSystem<'a, T> {
    pub frozen: &'a FrozenExplicitData<T>,
    pub dt: T,
}

impl<T: Scalar> ResidualSystem<T> for RelocationSystem<'_, T> {
    fn dimension(&self) -> usize {
        2 * self.frozen.len()
    }
    fn evaluate(&self, u: &[T]) -> Result<Vec<T>> {
        relocation_residual(&split_vertices(u, self.frozen.len(), 0)?, self.frozen, self.dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::functionals;
    use crate::solver::{norm, solve, SolverConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2<f64>> {
        (0..n).map(|_| Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn wobbly(n: usize) -> PolygonalCurve<f64> {
        PolygonalCurve::new(
            (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    let r = 0.5 + 0.08 * (3.0 * t).cos() + 0.03 * (2.0 * t).sin();
                    Point2::new(r * t.cos(), 0.8 * r * t.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn gram_ratio_vanishes_on_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 16;
        let d_l = random_field(&mut rng, n);
        let d_a = random_field(&mut rng, n);
        let d_b: Vec<_> = d_l.iter().zip(&d_a).map(|(&l, &a)| l * 0.7 - a * 1.9).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let d = gram_ratio(&d_b, &d_l, &d_a, &w).unwrap();
        assert!(d.abs() <= 1e-12 * inner(&d_b, &d_b, &w), "{d}");
    }

    #[test]
    fn gram_ratio_orthogonal_block() {
        let n = 6;
        let w = vec![0.5; n];
        let unit =
            |k: usize, p: Point2<f64>| (0..n).map(|i| if i == k { p } else { Point2::zero() }).collect::<Vec<_>>();
        let d_l = unit(0, Point2::new(1.0, 2.0));
        let d_a = unit(1, Point2::new(-1.0, 0.5));
        let d_b = unit(2, Point2::new(3.0, -4.0));
        let d = gram_ratio(&d_b, &d_l, &d_a, &w).unwrap();
        assert!((d - 12.5).abs() < 1e-14);
    }

    #[test]
    fn gram_ratio_matches_projection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 16;
        for _ in 0..20 {
            let d_b = random_field(&mut rng, n);
            let d_l = random_field(&mut rng, n);
            let d_a = random_field(&mut rng, n);
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            // Gram-Schmidt on (dL, dA), then strip both components from dB.
            let e1_norm = inner(&d_l, &d_l, &w).sqrt();
            let e1: Vec<_> = d_l.iter().map(|&p| p / e1_norm).collect();
            let c = inner(&d_a, &e1, &w);
            let mut e2: Vec<_> = d_a.iter().zip(&e1).map(|(&a, &e)| a - e * c).collect();
            let e2_norm = inner(&e2, &e2, &w).sqrt();
            e2.iter_mut().for_each(|p| *p = *p / e2_norm);
            let (c1, c2) = (inner(&d_b, &e1, &w), inner(&d_b, &e2, &w));
            let perp: Vec<_> = (0..n).map(|i| d_b[i] - e1[i] * c1 - e2[i] * c2).collect();
            let oracle = inner(&perp, &perp, &w);
            let d = gram_ratio(&d_b, &d_l, &d_a, &w).unwrap();
            assert!(d >= 0.0);
            assert!((d - oracle).abs() <= 1e-10 * (1.0 + oracle), "{d} vs {oracle}");
        }
    }

    #[test]
    fn gram_ratio_rejects_parallel_constraints() {
        let n = 8;
        let d_l: Vec<_> = (0..n).map(|i| Point2::new(i as f64, 1.0)).collect();
        let d_a: Vec<_> = d_l.iter().map(|&p| p * -2.0).collect();
        let err = gram_ratio(&d_l, &d_l, &d_a, &vec![1.0; n]).unwrap_err();
        assert!(matches!(err, FlowError::SingularGram { .. }));
    }

    #[test]
    fn unknown_layouts_round_trip() {
        let v = vec![Point2::new(1.0, 2.0), Point2::new(3.0, 4.0)];
        let w = WillmoreUnknowns { new_vertices: v.clone(), gamma: 5.0 };
        assert_eq!(w.to_vec(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(WillmoreUnknowns::from_slice(&w.to_vec(), 2).unwrap(), w);
        let h = HelfrichUnknowns { new_vertices: v, lambda: 5.0, mu: 6.0, gamma: 7.0 };
        assert_eq!(h.to_vec(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(HelfrichUnknowns::from_slice(&h.to_vec(), 2).unwrap(), h);
        assert!(WillmoreUnknowns::<f64>::from_slice(&[1.0; 4], 2).is_err());
    }

    fn solve_willmore(
        old: &PolygonalCurve<f64>,
        params: FlowParams<f64>,
    ) -> (WillmoreUnknowns<f64>, FrozenExplicitData<f64>, f64) {
        let frozen = FrozenExplicitData::new(old.clone(), params.alpha).unwrap();
        let system = WillmoreSystem { frozen: &frozen, params };
        let guess = WillmoreUnknowns { new_vertices: old.vertices().to_vec(), gamma: 0.0 };
        let report = solve(&system, guess.to_vec(), &SolverConfig::default()).unwrap();
        assert!(report.converged);
        let root = WillmoreUnknowns::from_slice(&report.solution, old.len()).unwrap();
        (root, frozen, report.initial_residual_norm)
    }

    #[test]
    fn willmore_root_dissipates() {
        let old = wobbly(24);
        let params = FlowParams::new(2.0, 20.0, 1e-4);
        let (root, frozen, initial) = solve_willmore(&old, params);
        let res = willmore_residual(&root, &frozen, &params).unwrap();
        assert!(norm(&res) <= 1e-6 * (1.0 + initial));

        let new = PolygonalCurve::new(root.new_vertices.clone()).unwrap();
        let pair = CurvePair::new(&old, &new, params.second_diff).unwrap();
        let d_b = grad_bending(&pair, params.c0).unwrap();
        let (b0, b1) = pair.bending_energies(params.c0);
        let rate = (b1 - b0) / params.dt;
        let dissipation = inner(&d_b, &d_b, pair.weights());
        assert!(rate <= 0.0);
        assert!((rate + dissipation).abs() <= 1e-4 * (1.0 + dissipation), "{rate} {dissipation}");
        assert!(root.gamma != 0.0);
    }

    #[test]
    fn willmore_gamma_vanishes_without_tangential_motion() {
        let (root, _, _) = solve_willmore(&wobbly(20), FlowParams::new(2.0, 0.0, 1e-4));
        assert!(root.gamma.abs() < 1e-8, "{}", root.gamma);
    }

    #[test]
    fn willmore_near_equilibrium_matches_explicit_step() {
        let n = 64;
        let old = PolygonalCurve::new(
            (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    Point2::new(0.5 * t.cos(), 0.5 * t.sin())
                })
                .collect(),
        )
        .unwrap();
        let params = FlowParams::new(2.0, 0.0, 1e-4);
        let (root, _, _) = solve_willmore(&old, params);
        let same = CurvePair::new(&old, &old, params.second_diff).unwrap();
        let d_b = grad_bending(&same, params.c0).unwrap();
        for ((new, old), grad) in root.new_vertices.iter().zip(old.vertices()).zip(&d_b) {
            let moved = *new - *old;
            let euler = -*grad * params.dt;
            assert!(moved.norm() <= 1e-3);
            assert!((moved - euler).norm() <= 1e-3 * euler.norm() + 1e-12);
        }
    }

    #[test]
    fn helfrich_root_conserves_and_dissipates() {
        let old = wobbly(24);
        let params = FlowParams::new(2.0, 50.0, 1e-4);
        let frozen = FrozenExplicitData::new(old.clone(), params.alpha).unwrap();
        let system = HelfrichSystem { frozen: &frozen, params };
        let guess = HelfrichUnknowns { new_vertices: old.vertices().to_vec(), lambda: 0.0, mu: 0.0, gamma: 0.0 };
        let report = solve(&system, guess.to_vec(), &SolverConfig::default()).unwrap();
        assert!(report.converged);
        let root = HelfrichUnknowns::from_slice(&report.solution, old.len()).unwrap();
        let new = PolygonalCurve::new(root.new_vertices).unwrap();
        let (f0, _) = functionals(&old, params.c0, params.second_diff).unwrap();
        let (f1, _) = functionals(&new, params.c0, params.second_diff).unwrap();
        assert!((f1.length - f0.length).abs() <= 1e-8 * f0.length);
        assert!((f1.area - f0.area).abs() <= 1e-8 * f0.area);

        let pair = CurvePair::new(&old, &new, params.second_diff).unwrap();
        let d = gram_ratio(
            &grad_bending(&pair, params.c0).unwrap(),
            &grad_length(&pair).unwrap(),
            &grad_area(&pair),
            pair.weights(),
        )
        .unwrap();
        let rate = (f1.bending - f0.bending) / params.dt;
        assert!(d >= 0.0);
        assert!((rate + d).abs() <= 1e-4 * (1.0 + d), "{rate} {d}");
    }

    #[test]
    fn helfrich_on_circle_reports_singular_gram() {
        let n = 16;
        let old = PolygonalCurve::new(
            (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    Point2::new(t.cos(), t.sin())
                })
                .collect(),
        )
        .unwrap();
        let frozen = FrozenExplicitData::new(old.clone(), 0.0).unwrap();
        let u = HelfrichUnknowns { new_vertices: old.vertices().to_vec(), lambda: 0.0, mu: 0.0, gamma: 0.0 };
        let err = helfrich_residual(&u, &frozen, &FlowParams::new(1.0, 0.0, 1e-4)).unwrap_err();
        assert!(matches!(err, FlowError::SingularGram { .. }));
    }

    #[test]
    fn relocation_is_explicit_tangential_update() {
        let old = wobbly(20);
        let frozen = FrozenExplicitData::new(old.clone(), 5.0).unwrap();
        let dt = 1e-4;
        let system = RelocationSystem { frozen: &frozen, dt };
        let report = solve(&system, old.coords(), &SolverConfig::default()).unwrap();
        assert!(report.converged);
        let wt = frozen.tangential_field();
        for (i, c) in report.solution.chunks_exact(2).enumerate() {
            let expect = old.vertices()[i] + wt[i] * dt;
            assert!((Point2::new(c[0], c[1]) - expect).norm() <= 1e-9);
        }
    }
}
