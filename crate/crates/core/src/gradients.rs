//! Two-point discrete variational derivatives of the bending energy, the
//! length and the enclosed area.
//!
//! For a pair of polygons `(old, new)` with the same vertex count, each
//! gradient field `grad F` satisfies the discrete chain rule
//!
//! ```text
//! F(new) - F(old) = sum_i grad F[i] . (new[i] - old[i]) * w[i],
//! w[i] = (r_hat_new[i] + r_hat_old[i]) / 2,
//! ```
//!
//! exactly in real arithmetic, for arbitrary pairs. Quantities of the new
//! curve carry no mark and quantities of the old curve are written with a
//! trailing `o` (`k`, `ko`). The bending gradient is assembled in the same
//! order as its derivation: the edge-length part `D`, then the curvature part
//! split into `H`, `I` (numerator) and `L` (denominator) contributions, moved
//! onto `new - old` by periodic summation by parts.

use crate::geometry::{
    bending_energy, edge_quantities, inner, vertex_lengths, PolygonalCurve, SecondDiffScale, StencilData,
};
use crate::{FlowError, Point2, Result, Scalar};

/// Per-curve data entering the two-point gradients.
#[derive(Debug, Clone)]
struct Side<T> {
    r: Vec<T>,
    t: Vec<Point2<T>>,
    stencil: StencilData<T>,
    k: Vec<T>,
    r_hat: Vec<T>,
}

impl<T: Scalar> Side<T> {
    fn new(curve: &PolygonalCurve<T>, scale: SecondDiffScale) -> Result<Self> {
        let (r, t) = edge_quantities(curve)?;
        let stencil = StencilData::new(curve, scale)?;
        let k = stencil.curvature();
        let r_hat = vertex_lengths(&r);
        Ok(Self { r, t, stencil, k, r_hat })
    }

    fn length(&self) -> T {
        self.r.iter().fold(T::zero(), |acc, &x| acc + x)
    }
}

/// The `(old, new)` pair on which the two-point gradients are defined.
#[derive(Debug, Clone)]
pub struct CurvePair<'a, T> {
    old: &'a PolygonalCurve<T>,
    new: &'a PolygonalCurve<T>,
    old_side: Side<T>,
    new_side: Side<T>,
    weights: Vec<T>,
    scale: SecondDiffScale,
}

impl<'a, T: Scalar> CurvePair<'a, T> {
    pub fn new(old: &'a PolygonalCurve<T>, new: &'a PolygonalCurve<T>, scale: SecondDiffScale) -> Result<Self> {
        if old.len() != new.len() {
            return Err(FlowError::LengthMismatch { expected: old.len(), found: new.len() });
        }
        let old_side = Side::new(old, scale)?;
        let new_side = Side::new(new, scale)?;
        let half = T::lit(0.5);
        let weights = old_side.r_hat.iter().zip(&new_side.r_hat).map(|(&a, &b)| (a + b) * half).collect();
        Ok(Self { old, new, old_side, new_side, weights, scale })
    }

    pub fn old(&self) -> &PolygonalCurve<T> {
        self.old
    }

    pub fn new_curve(&self) -> &PolygonalCurve<T> {
        self.new
    }

    /// Midpoint vertex lengths `(r_hat_new + r_hat_old) / 2`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn second_diff(&self) -> SecondDiffScale {
        self.scale
    }

    /// `new[i] - old[i]`.
    pub fn displacement(&self) -> Vec<Point2<T>> {
        self.new.vertices().iter().zip(self.old.vertices()).map(|(&a, &b)| a - b).collect()
    }

    /// Bending energies `(old, new)`.
    pub fn bending_energies(&self, c0: T) -> (T, T) {
        (
            bending_energy(&self.old_side.k, &self.old_side.r_hat, c0),
            bending_energy(&self.new_side.k, &self.new_side.r_hat, c0),
        )
    }

    /// Lengths `(old, new)`.
    pub fn lengths(&self) -> (T, T) {
        (self.old_side.length(), self.new_side.length())
    }

    /// Enclosed areas `(old, new)`.
    pub fn areas(&self) -> (T, T) {
        (self.old.signed_area(), self.new.signed_area())
    }

    fn divide_by_weights(&self, numerators: Vec<Point2<T>>) -> Vec<Point2<T>> {
        numerators.into_iter().zip(&self.weights).map(|(v, &w)| v / w).collect()
    }
}

/// Intermediate arrays of the bending gradient, exposed for inspection.
#[derive(Debug, Clone)]
pub struct BendingIntermediates<T> {
    /// `C[i] = ((k[i]-c0)^2 + (k[i-1]-c0)^2) / 4`, one array per curve `(old, new)`.
    pub c: (Vec<T>, Vec<T>),
    /// Edge-length contribution.
    pub d: Vec<Point2<T>>,
    /// Averaged curvature deviation times the averaged vertex length.
    pub e: Vec<T>,
    pub h: Vec<Point2<T>>,
    pub i: Vec<Point2<T>>,
    pub g2: Vec<T>,
    pub l: Vec<Point2<T>>,
}

/// Periodic `(v[i+1] - v[i-1]) * factor`.
fn central1<T: Scalar>(v: &[Point2<T>], factor: T) -> Vec<Point2<T>> {
    let n = v.len();
    (0..n).map(|i| (v[(i + 1) % n] - v[(i + n - 1) % n]) * factor).collect()
}

/// Periodic `(v[i+1] - 2 v[i] + v[i-1]) * factor`.
fn central2<T: Scalar>(v: &[Point2<T>], factor: T) -> Vec<Point2<T>> {
    let n = v.len();
    (0..n).map(|i| ((v[(i + 1) % n] - v[i]) - (v[i] - v[(i + n - 1) % n])) * factor).collect()
}

pub fn bending_intermediates<T: Scalar>(pair: &CurvePair<'_, T>, c0: T) -> Result<BendingIntermediates<T>> {
    let n = pair.len();
    let (s, so) = (&pair.new_side, &pair.old_side);
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let eighth = T::lit(0.125);
    let prev = |i: usize| (i + n - 1) % n;
    let next = |i: usize| (i + 1) % n;

    let c_of = |k: &[T]| -> Vec<T> {
        (0..n).map(|i| ((k[i] - c0) * (k[i] - c0) + (k[prev(i)] - c0) * (k[prev(i)] - c0)) * quarter).collect()
    };
    let c = c_of(&s.k);
    let co = c_of(&so.k);

    // (C + Co)/2 * (r t + ro to) / (r + ro), per edge.
    let edge_term = (0..n)
        .map(|i| {
            let denom = s.r[i] + so.r[i];
            if !(denom > T::zero()) {
                return Err(FlowError::DegenerateEdge { index: i, length: denom.as_f64() });
            }
            Ok((s.t[i] * s.r[i] + so.t[i] * so.r[i]) * ((c[i] + co[i]) * half / denom))
        })
        .collect::<Result<Vec<_>>>()?;
    let d = (0..n).map(|i| edge_term[i] - edge_term[next(i)]).collect();

    let e = (0..n)
        .map(|i| ((s.r[i] + so.r[i]) * eighth + (s.r[next(i)] + so.r[next(i)]) * eighth) * (s.k[i] - c0 + so.k[i] - c0))
        .collect::<Vec<T>>();

    let (st, sto) = (&s.stencil, &so.stencil);
    let mut h = Vec::with_capacity(n);
    let mut iv = Vec::with_capacity(n);
    let mut g2 = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    for idx in 0..n {
        let (g, go) = (st.g[idx], sto.g[idx]);
        let (g3, go3) = (g * g * g, go * go * go);
        let inv_sum = (g3.recip() + go3.recip()) * half;
        let (d1, d1o) = (st.d1[idx], sto.d1[idx]);
        let (d2, d2o) = (st.d2[idx], sto.d2[idx]);
        h.push(Point2::new((d2.y + d2o.y) * half, -(d2.x + d2o.x) * half) * inv_sum);
        iv.push(Point2::new(-(d1.y + d1o.y) * half, (d1.x + d1o.x) * half) * inv_sum);
        let g2i = -(g * g + g * go + go * go) / (T::lit(2.0) * g3 * go3) * (st.det[idx] + sto.det[idx]);
        let gsum = g + go;
        if !(gsum > T::zero()) {
            return Err(FlowError::DegenerateStencil { index: idx, magnitude: gsum.as_f64() });
        }
        l.push((d1 + d1o) * (g2i / gsum));
        g2.push(g2i);
    }

    Ok(BendingIntermediates { c: (co, c), d, e, h, i: iv, g2, l })
}

/// Two-point discrete variational derivative of the bending energy.
pub fn grad_bending<T: Scalar>(pair: &CurvePair<'_, T>, c0: T) -> Result<Vec<Point2<T>>> {
    let parts = bending_intermediates(pair, c0)?;
    let du = pair.new.du();
    let first = (T::lit(2.0) * du).recip();
    let second = pair.scale.factor(du);

    let eh: Vec<_> = parts.h.iter().zip(&parts.e).map(|(&h, &e)| h * e).collect();
    let ei: Vec<_> = parts.i.iter().zip(&parts.e).map(|(&v, &e)| v * e).collect();
    let el: Vec<_> = parts.l.iter().zip(&parts.e).map(|(&v, &e)| v * e).collect();
    let d_eh = central1(&eh, first);
    let d_ei = central2(&ei, second);
    let d_el = central1(&el, first);

    let numerators = (0..pair.len()).map(|i| parts.d[i] - d_eh[i] + d_ei[i] - d_el[i]).collect::<Vec<_>>();
    Ok(pair.divide_by_weights(numerators))
}

/// Two-point discrete variational derivative of the length.
pub fn grad_length<T: Scalar>(pair: &CurvePair<'_, T>) -> Result<Vec<Point2<T>>> {
    let n = pair.len();
    let (s, so) = (&pair.new_side, &pair.old_side);
    let averaged = (0..n)
        .map(|i| {
            let denom = s.r[i] + so.r[i];
            if !(denom > T::zero()) {
                return Err(FlowError::DegenerateEdge { index: i, length: denom.as_f64() });
            }
            Ok((s.t[i] * s.r[i] + so.t[i] * so.r[i]) / denom)
        })
        .collect::<Result<Vec<_>>>()?;
    let numerators = (0..n).map(|i| averaged[i] - averaged[(i + 1) % n]).collect();
    Ok(pair.divide_by_weights(numerators))
}

/// Two-point discrete variational derivative of the enclosed area.
pub fn grad_area<T: Scalar>(pair: &CurvePair<'_, T>) -> Vec<Point2<T>> {
    let n = pair.len();
    let (x, xo) = (pair.new.vertices(), pair.old.vertices());
    let quarter = T::lit(0.25);
    let numerators = (0..n)
        .map(|i| {
            let (p, q) = ((i + n - 1) % n, (i + 1) % n);
            Point2::new(
                (-x[p].y - xo[p].y + x[q].y + xo[q].y) * quarter,
                (x[p].x + xo[p].x - x[q].x - xo[q].x) * quarter,
            )
        })
        .collect();
    pair.divide_by_weights(numerators)
}

/// The three gradient fields of one pair.
#[derive(Debug, Clone)]
pub struct GradientField<T> {
    pub bending: Vec<Point2<T>>,
    pub length: Vec<Point2<T>>,
    pub area: Vec<Point2<T>>,
}

impl<T: Scalar> GradientField<T> {
    pub fn compute(pair: &CurvePair<'_, T>, c0: T) -> Result<Self> {
        Ok(Self { bending: grad_bending(pair, c0)?, length: grad_length(pair)?, area: grad_area(pair) })
    }
}

/// Relative defects of the discrete chain rule for each functional.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChainRuleResiduals<T> {
    pub bending: T,
    pub length: T,
    pub area: T,
}

impl<T: Scalar> ChainRuleResiduals<T> {
    pub fn max(&self) -> T {
        self.bending.max(self.length).max(self.area)
    }
}

/// `|sum grad . dX * w - (F(new) - F(old))| / (1 + |F(new)|)`.
pub fn chain_rule_defect<T: Scalar>(pair: &CurvePair<'_, T>, grad: &[Point2<T>], old_value: T, new_value: T) -> T {
    let predicted = inner(grad, &pair.displacement(), pair.weights());
    ((predicted - (new_value - old_value)).abs()) / (T::one() + new_value.abs())
}

pub fn chain_rule_residual<T: Scalar>(pair: &CurvePair<'_, T>, c0: T) -> Result<ChainRuleResiduals<T>> {
    let field = GradientField::compute(pair, c0)?;
    Ok(chain_rule_residual_with(pair, c0, &field))
}

/// Chain-rule defects for precomputed gradients.
pub fn chain_rule_residual_with<T: Scalar>(
    pair: &CurvePair<'_, T>,
    c0: T,
    field: &GradientField<T>,
) -> ChainRuleResiduals<T> {
    let (b0, b1) = pair.bending_energies(c0);
    let (l0, l1) = pair.lengths();
    let (a0, a1) = pair.areas();
    ChainRuleResiduals {
        bending: chain_rule_defect(pair, &field.bending, b0, b1),
        length: chain_rule_defect(pair, &field.length, l0, l1),
        area: chain_rule_defect(pair, &field.area, a0, a1),
    }
}
