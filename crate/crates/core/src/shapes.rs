//! Initial polygons used by the experiments.

use crate::geometry::{PolygonalCurve, MIN_VERTICES};
use crate::{FlowError, Point2, Result, Scalar};

fn check_count(n: usize) -> Result<()> {
    if n < MIN_VERTICES {
        return Err(FlowError::TooFewVertices { min: MIN_VERTICES, found: n });
    }
    Ok(())
}

fn check_positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if !(v > T::zero()) || !v.is_finite() {
        return Err(FlowError::InvalidParameter { name, reason: format!("must be positive and finite, got {v}") });
    }
    Ok(())
}

/// Point on the wavy closed test curve at parameter `t` in `[0, 1]`.
pub fn kubire_point<T: Scalar>(t: T) -> Point2<T> {
    let two_pi_t = T::TAU() * t;
    let a1 = T::lit(1.8) * two_pi_t.cos();
    let a2 = T::lit(0.2) + (T::PI() * t).sin() * (T::lit(6.0) * T::PI() * t).sin() * (T::lit(2.0) * a1).sin();
    let a3 = T::lit(0.5) * two_pi_t.sin() + a1.sin() + a2 * two_pi_t.sin();
    Point2::new(T::lit(0.5) * a1, T::lit(0.54) * a3)
}

/// Samples the wavy curve at `t = i/N` for `i = 1..=N`.
pub fn kubire<T: Scalar>(n: usize) -> Result<PolygonalCurve<T>> {
    check_count(n)?;
    let nn = T::from_count(n);
    PolygonalCurve::counterclockwise((1..=n).map(|i| kubire_point(T::from_count(i) / nn)).collect())
}

/// Vertices at angles `2 pi i / N` on a circle.
pub fn regular_polygon<T: Scalar>(n: usize, radius: T, center: Point2<T>) -> Result<PolygonalCurve<T>> {
    check_count(n)?;
    check_positive("radius", radius)?;
    let nn = T::from_count(n);
    PolygonalCurve::counterclockwise(
        (0..n)
            .map(|i| {
                let theta = T::TAU() * T::from_count(i) / nn;
                center + Point2::new(theta.cos(), theta.sin()) * radius
            })
            .collect(),
    )
}

/// Splits `n` segments across sides proportionally to their lengths, at least one each,
/// by largest remainder.
fn apportion(n: usize, lengths: &[f64]) -> Vec<usize> {
    let total: f64 = lengths.iter().sum();
    let ideal: Vec<f64> = lengths.iter().map(|l| n as f64 * l / total).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|x| (x.floor() as usize).max(1)).collect();
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    // Stable sort keeps ties in side order so the result is deterministic.
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())));
    let mut assigned: usize = counts.iter().sum();
    let mut k = 0;
    while assigned < n {
        counts[order[k % order.len()]] += 1;
        assigned += 1;
        k += 1;
    }
    while assigned > n {
        let largest = (0..counts.len()).max_by_key(|&i| counts[i]).unwrap_or(0);
        counts[largest] -= 1;
        assigned -= 1;
    }
    counts
}

/// Axis-aligned rectangle with all four corners as vertices and the remaining
/// vertices spread evenly along each side.
pub fn rectangle<T: Scalar>(n: usize, width: T, height: T, center: Point2<T>) -> Result<PolygonalCurve<T>> {
    check_count(n)?;
    check_positive("width", width)?;
    check_positive("height", height)?;
    let half = Point2::new(width, height) * T::lit(0.5);
    let corners = [
        center + Point2::new(-half.x, -half.y),
        center + Point2::new(half.x, -half.y),
        center + Point2::new(half.x, half.y),
        center + Point2::new(-half.x, half.y),
    ];
    let lengths = [width, height, width, height].map(|l| l.as_f64());
    let counts = apportion(n, &lengths);
    let mut vertices = Vec::with_capacity(n);
    for (side, &m) in counts.iter().enumerate() {
        let (a, b) = (corners[side], corners[(side + 1) % 4]);
        let mm = T::from_count(m);
        for j in 0..m {
            let s = T::from_count(j) / mm;
            vertices.push(a + (b - a) * s);
        }
    }
    PolygonalCurve::counterclockwise(vertices)
}
