//! Closed polygonal curves and the discrete geometric quantities defined on them.
//!
//! Vertices are stored 0-based; every stencil wraps modulo `N`, so vertex
//! `i - 1` of vertex `0` is vertex `N - 1`. Edge `i` joins vertex `i - 1` to
//! vertex `i`, hence `r[i] = |X[i] - X[i-1]|` and `r[0]` closes the polygon.
//! The parameter spacing is `du = 1 / N`.

use std::ops::{Add, Mul, Sub};

use crate::{FlowError, Point2, Result, Scalar};

/// Smallest admissible vertex count.
pub const MIN_VERTICES: usize = 5;

/// Edges and stencil spans shorter than this multiple of the curve diameter are degenerate.
pub const DEGENERACY_FLOOR: f64 = 1e-14;

/// `|t[i] + t[i+1]|` below this value means the curve doubles back on itself.
pub const CUSP_FLOOR: f64 = 1e-10;

/// Normalisation of the centred second difference used by the curvature stencil.
///
/// With [`SecondDiffScale::InvDuSquared`] the curvature is independent of the
/// parameter spacing and converges to `1/R` on a circle of radius `R`. With
/// [`SecondDiffScale::InvDu`] the second difference is divided by `du` once,
/// which scales every curvature by `du` (a regular N-gon of radius `R` then
/// has `k = 2 / (N R (1 + cos(2 pi / N)))`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondDiffScale {
    #[default]
    InvDuSquared,
    InvDu,
}

impl SecondDiffScale {
    pub(crate) fn difference(self) -> Difference {
        match self {
            SecondDiffScale::InvDuSquared => Difference::Central2Squared,
            SecondDiffScale::InvDu => Difference::Central2,
        }
    }

    /// Factor multiplying `v[i+1] - 2 v[i] + v[i-1]`.
    pub(crate) fn factor<T: Scalar>(self, du: T) -> T {
        match self {
            SecondDiffScale::InvDuSquared => (du * du).recip(),
            SecondDiffScale::InvDu => du.recip(),
        }
    }
}

/// Periodic finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difference {
    /// `(v[i+1] - v[i]) / du`
    Forward,
    /// `(v[i] - v[i-1]) / du`
    Backward,
    /// `(v[i+1] - v[i-1]) / (2 du)`
    Central1,
    /// `(v[i+1] - 2 v[i] + v[i-1]) / du`
    Central2,
    /// `(v[i+1] - 2 v[i] + v[i-1]) / du^2`
    Central2Squared,
}

/// Applies a periodic difference stencil to `values`.
pub fn periodic_difference<T, V>(values: &[V], mode: Difference, du: T) -> Vec<V>
where
    T: Scalar,
    V: Copy + Add<Output = V> + Sub<Output = V> + Mul<T, Output = V>,
{
    let n = values.len();
    let two = T::lit(2.0);
    (0..n)
        .map(|i| {
            let prev = values[(i + n - 1) % n];
            let cur = values[i];
            let next = values[(i + 1) % n];
            match mode {
                Difference::Forward => (next - cur) * du.recip(),
                Difference::Backward => (cur - prev) * du.recip(),
                Difference::Central1 => (next - prev) * (two * du).recip(),
                Difference::Central2 => ((next - cur) - (cur - prev)) * du.recip(),
                Difference::Central2Squared => ((next - cur) - (cur - prev)) * (du * du).recip(),
            }
        })
        .collect()
}

/// A closed polygon with at least [`MIN_VERTICES`] vertices and no zero-length edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalCurve<T> {
    vertices: Vec<Point2<T>>,
}

impl<T: Scalar> PolygonalCurve<T> {
    /// Validates the vertex list without touching its orientation.
    pub fn new(vertices: Vec<Point2<T>>) -> Result<Self> {
        if vertices.len() < MIN_VERTICES {
            return Err(FlowError::TooFewVertices { min: MIN_VERTICES, found: vertices.len() });
        }
        if let Some(index) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(FlowError::NonFiniteVertex { index });
        }
        let curve = Self { vertices };
        curve.edge_vectors_checked()?;
        Ok(curve)
    }

    /// Validates and reorders the vertices so that the enclosed area is positive.
    pub fn counterclockwise(vertices: Vec<Point2<T>>) -> Result<Self> {
        let curve = Self::new(vertices)?;
        if curve.signed_area() < T::zero() {
            log::warn!("input polygon is clockwise; reversing vertex order");
            Ok(curve.reversed())
        } else {
            Ok(curve)
        }
    }

    /// Builds a curve from interleaved `[x0, y0, x1, y1, ...]` coordinates.
    pub fn from_coords(coords: &[T]) -> Result<Self> {
        if !coords.len().is_multiple_of(2) {
            return Err(FlowError::LengthMismatch { expected: coords.len() + 1, found: coords.len() });
        }
        Self::new(coords.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point2<T>> {
        self.vertices
    }

    /// Interleaved `[x0, y0, x1, y1, ...]`.
    pub fn coords(&self) -> Vec<T> {
        self.vertices.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    /// Parameter spacing `1 / N`.
    #[inline]
    pub fn du(&self) -> T {
        T::from_count(self.len()).recip()
    }

    #[inline]
    pub(crate) fn wrap(&self, i: usize, offset: isize) -> usize {
        let n = self.len() as isize;
        ((i as isize + offset).rem_euclid(n)) as usize
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn diameter(&self) -> T {
        bbox_diagonal(&self.vertices)
    }

    pub(crate) fn floor(&self) -> T {
        T::lit(DEGENERACY_FLOOR) * self.diameter()
    }

    /// Edge vectors `X[i] - X[i-1]`, rejecting edges shorter than the degeneracy floor.
    pub(crate) fn edge_vectors_checked(&self) -> Result<Vec<Point2<T>>> {
        let floor = self.floor();
        (0..self.len())
            .map(|i| {
                let e = self.vertices[i] - self.vertices[self.wrap(i, -1)];
                let length = e.norm();
                if length > floor && length.is_finite() {
                    Ok(e)
                } else {
                    Err(FlowError::DegenerateEdge { index: i, length: length.as_f64() })
                }
            })
            .collect()
    }

    /// Shoelace area; positive for counterclockwise vertex order.
    pub fn signed_area(&self) -> T {
        let half = T::lit(0.5);
        (0..self.len())
            .map(|i| self.vertices[self.wrap(i, -1)].cross(self.vertices[i]))
            .fold(T::zero(), |acc, v| acc + v)
            * half
    }

    pub fn reversed(&self) -> Self {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        Self { vertices }
    }

    /// Applies `f` to every vertex and re-validates.
    pub fn map(&self, mut f: impl FnMut(Point2<T>) -> Point2<T>) -> Result<Self> {
        Self::new(self.vertices.iter().map(|&p| f(p)).collect())
    }

    pub fn centroid(&self) -> Point2<T> {
        let sum = self.vertices.iter().fold(Point2::zero(), |acc, &p| acc + p);
        sum / T::from_count(self.len())
    }

    /// Shortest edge over longest edge, in `(0, 1]`.
    pub fn mesh_ratio(&self) -> T {
        let lengths = (0..self.len()).map(|i| (self.vertices[i] - self.vertices[self.wrap(i, -1)]).norm());
        let (lo, hi) = lengths.fold((T::infinity(), T::zero()), |(lo, hi), r| (lo.min(r), hi.max(r)));
        lo / hi
    }
}

/// Parameters shared by both flows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams<T> {
    /// Spontaneous curvature.
    pub c0: T,
    /// Strength of the tangential redistribution velocity.
    pub alpha: T,
    /// Time step.
    pub dt: T,
    pub second_diff: SecondDiffScale,
}

impl<T: Scalar> FlowParams<T> {
    pub fn new(c0: T, alpha: T, dt: T) -> Self {
        Self { c0, alpha, dt, second_diff: SecondDiffScale::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(FlowError::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.alpha >= T::zero()) || !self.alpha.is_finite() {
            return Err(FlowError::InvalidParameter {
                name: "alpha",
                reason: format!("must be non-negative, got {}", self.alpha),
            });
        }
        if !self.c0.is_finite() {
            return Err(FlowError::InvalidParameter { name: "c0", reason: "must be finite".into() });
        }
        Ok(())
    }
}

/// Edge lengths `r[i]` and unit edge tangents `t[i]`.
pub fn edge_quantities<T: Scalar>(curve: &PolygonalCurve<T>) -> Result<(Vec<T>, Vec<Point2<T>>)> {
    let edges = curve.edge_vectors_checked()?;
    let r: Vec<T> = edges.iter().map(|e| e.norm()).collect();
    let t = edges.iter().zip(&r).map(|(&e, &ri)| e / ri).collect();
    Ok((r, t))
}

/// Unit vertex tangents `T[i] = (t[i] + t[i+1]) / |t[i] + t[i+1]|`.
pub fn vertex_tangents<T: Scalar>(t: &[Point2<T>]) -> Result<Vec<Point2<T>>> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let sum = t[i] + t[(i + 1) % n];
            let norm = sum.norm();
            if norm < T::lit(CUSP_FLOOR) {
                Err(FlowError::CuspAtVertex { index: i })
            } else {
                Ok(sum / norm)
            }
        })
        .collect()
}

/// Central-difference data at every vertex.
#[derive(Debug, Clone)]
pub(crate) struct StencilData<T> {
    /// First central difference of the vertices.
    pub d1: Vec<Point2<T>>,
    /// Second central difference of the vertices.
    pub d2: Vec<Point2<T>>,
    /// `det[d1, d2]`.
    pub det: Vec<T>,
    /// `|d1|`.
    pub g: Vec<T>,
}

fn bbox_diagonal<T: Scalar>(vertices: &[Point2<T>]) -> T {
    let Some(&first) = vertices.first() else { return T::zero() };
    let (lo, hi) = vertices.iter().fold((first, first), |(lo, hi), p| {
        (Point2::new(lo.x.min(p.x), lo.y.min(p.y)), Point2::new(hi.x.max(p.x), hi.y.max(p.y)))
    });
    (hi - lo).norm()
}

impl<T: Scalar> StencilData<T> {
    pub fn new(curve: &PolygonalCurve<T>, scale: SecondDiffScale) -> Result<Self> {
        Self::from_vertices(curve.vertices(), scale)
    }

    fn from_vertices(verts: &[Point2<T>], scale: SecondDiffScale) -> Result<Self> {
        let du = T::from_count(verts.len()).recip();
        let floor = T::lit(DEGENERACY_FLOOR) * bbox_diagonal(verts);
        let d1 = periodic_difference(verts, Difference::Central1, du);
        let d2 = periodic_difference(verts, scale.difference(), du);
        let g: Vec<T> = d1.iter().map(|v| v.norm()).collect();
        let span = T::lit(2.0) * du;
        if let Some(index) = g.iter().position(|&gi| !(gi * span > floor)) {
            return Err(FlowError::DegenerateStencil { index, magnitude: (g[index] * span).as_f64() });
        }
        let det = d1.iter().zip(&d2).map(|(&a, &b)| a.cross(b)).collect();
        Ok(Self { d1, d2, det, g })
    }

    pub fn curvature(&self) -> Vec<T> {
        self.det.iter().zip(&self.g).map(|(&det, &g)| det / (g * g * g)).collect()
    }
}

/// Discrete curvature `k[i] = det[d1 X, d2 X] / |d1 X|^3` and `g[i] = |d1 X|`.
pub fn discrete_curvature<T: Scalar>(curve: &PolygonalCurve<T>, scale: SecondDiffScale) -> Result<(Vec<T>, Vec<T>)> {
    let stencil = StencilData::new(curve, scale)?;
    Ok((stencil.curvature(), stencil.g))
}

/// Curvature of a closed vertex list that need not satisfy the curve invariants.
///
/// Only three distinct neighbours are needed per vertex, so triangles and
/// quadrilaterals are accepted here even though flows require more vertices.
pub fn vertex_curvature<T: Scalar>(vertices: &[Point2<T>], scale: SecondDiffScale) -> Result<(Vec<T>, Vec<T>)> {
    if vertices.len() < 3 {
        return Err(FlowError::TooFewVertices { min: 3, found: vertices.len() });
    }
    if let Some(index) = vertices.iter().position(|p| !p.is_finite()) {
        return Err(FlowError::NonFiniteVertex { index });
    }
    let stencil = StencilData::from_vertices(vertices, scale)?;
    Ok((stencil.curvature(), stencil.g))
}

/// `r_hat[i] = (r[i] + r[i+1]) / 2`, the length attributed to vertex `i`.
pub fn vertex_lengths<T: Scalar>(r: &[T]) -> Vec<T> {
    let n = r.len();
    let half = T::lit(0.5);
    (0..n).map(|i| (r[i] + r[(i + 1) % n]) * half).collect()
}

/// The three global functionals of a polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functionals<T> {
    /// Bending energy `1/2 sum (k - c0)^2 r_hat`.
    pub bending: T,
    pub length: T,
    pub area: T,
}

pub(crate) fn bending_energy<T: Scalar>(k: &[T], r_hat: &[T], c0: T) -> T {
    let sum = k.iter().zip(r_hat).fold(T::zero(), |acc, (&ki, &w)| acc + (ki - c0) * (ki - c0) * w);
    sum * T::lit(0.5)
}

/// Bending energy, length and enclosed area, plus the vertex lengths `r_hat`.
pub fn functionals<T: Scalar>(
    curve: &PolygonalCurve<T>,
    c0: T,
    scale: SecondDiffScale,
) -> Result<(Functionals<T>, Vec<T>)> {
    let (r, _) = edge_quantities(curve)?;
    let (k, _) = discrete_curvature(curve, scale)?;
    let r_hat = vertex_lengths(&r);
    let f = Functionals {
        bending: bending_energy(&k, &r_hat, c0),
        length: r.iter().fold(T::zero(), |acc, &x| acc + x),
        area: curve.signed_area(),
    };
    Ok((f, r_hat))
}

/// Weighted inner product `sum u[i] . v[i] w[i]`.
pub fn discrete_inner_product<T: Scalar>(u: &[Point2<T>], v: &[Point2<T>], weights: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(FlowError::LengthMismatch { expected: u.len(), found: v.len() });
    }
    if weights.len() != u.len() {
        return Err(FlowError::LengthMismatch { expected: u.len(), found: weights.len() });
    }
    Ok(inner(u, v, weights))
}

#[inline]
pub(crate) fn inner<T: Scalar>(u: &[Point2<T>], v: &[Point2<T>], weights: &[T]) -> T {
    u.iter().zip(v).zip(weights).fold(T::zero(), |acc, ((&a, &b), &w)| acc + a.dot(b) * w)
}

/// Redistribution speed `w[i] = -alpha * backward( 1 / |forward X| )[i]`.
///
/// Positive `w[i]` moves vertex `i` along `T[i]`, towards `X[i+1]`; the speed
/// grows with the imbalance between the two edges meeting at the vertex.
pub fn tangential_velocity<T: Scalar>(curve: &PolygonalCurve<T>, alpha: T) -> Result<Vec<T>> {
    let du = curve.du();
    let forward = periodic_difference(curve.vertices(), Difference::Forward, du);
    let floor = curve.floor();
    let inverse_speed = forward
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let speed = d.norm();
            if speed * du > floor {
                Ok(speed.recip())
            } else {
                Err(FlowError::DegenerateEdge { index: curve.wrap(i, 1), length: (speed * du).as_f64() })
            }
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(periodic_difference(&inverse_speed, Difference::Backward, du).into_iter().map(|v| -alpha * v).collect())
}

/// Every per-vertex and global quantity of a curve, computed once.
#[derive(Debug, Clone)]
pub struct GeometricCache<T> {
    pub r: Vec<T>,
    pub t: Vec<Point2<T>>,
    pub tangents: Vec<Point2<T>>,
    pub g: Vec<T>,
    pub k: Vec<T>,
    pub r_hat: Vec<T>,
    pub du: T,
    pub bending: T,
    pub length: T,
    pub area: T,
}

impl<T: Scalar> GeometricCache<T> {
    pub fn new(curve: &PolygonalCurve<T>, c0: T, scale: SecondDiffScale) -> Result<Self> {
        let (r, t) = edge_quantities(curve)?;
        let tangents = vertex_tangents(&t)?;
        let stencil = StencilData::new(curve, scale)?;
        let k = stencil.curvature();
        let r_hat = vertex_lengths(&r);
        Ok(Self {
            bending: bending_energy(&k, &r_hat, c0),
            length: r.iter().fold(T::zero(), |acc, &x| acc + x),
            area: curve.signed_area(),
            du: curve.du(),
            g: stencil.g,
            r,
            t,
            tangents,
            k,
            r_hat,
        })
    }

    pub fn functionals(&self) -> Functionals<T> {
        Functionals { bending: self.bending, length: self.length, area: self.area }
    }
}
