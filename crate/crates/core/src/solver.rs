//! Damped Newton iteration with a forward-difference Jacobian and dense LU.
//!
//! The per-step systems are small (`2N + 1` or `2N + 3` unknowns) and dense,
//! so the Jacobian is rebuilt column by column on every iteration.

use rayon::prelude::*;

use crate::{FlowError, Result, Scalar};

/// Pivots below this multiple of their row's largest entry are treated as zero.
pub const PIVOT_FLOOR: f64 = 1e-14;

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(FlowError::LengthMismatch { expected: n, found: bad.len() });
        }
        Ok(Self { n, data: rows.concat() })
    }

    /// Builds a matrix from its columns.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let n = columns.len();
        let mut m = Self::zeros(n);
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(FlowError::LengthMismatch { expected: n, found: col.len() });
            }
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.data.chunks_exact(self.n).map(|row| dot(row, x)).collect()
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Scalar>(v: &[T]) -> T {
    // Scaled to avoid overflow on large residuals.
    let scale = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().fold(T::zero(), |acc, &x| acc + (x / scale) * (x / scale)).sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn lu_solve<T: Scalar>(matrix: &DenseMatrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    let n = matrix.dim();
    if rhs.len() != n {
        return Err(FlowError::LengthMismatch { expected: n, found: rhs.len() });
    }
    let mut a = matrix.data.clone();
    let mut b = rhs.to_vec();
    let row_scale: Vec<T> = a.chunks_exact(n).map(|row| row.iter().fold(T::zero(), |m, x| m.max(x.abs()))).collect();
    let mut scale = row_scale;
    let floor = T::lit(PIVOT_FLOOR);

    for col in 0..n {
        let (pivot_row, pivot_abs) =
            (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot_abs > floor * scale[pivot_row]) {
            return Err(FlowError::SingularMatrix { column: col, pivot: pivot_abs.as_f64() });
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
            scale.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / pivot;
            if factor == T::zero() {
                continue;
            }
            a[r * n + col] = T::zero();
            for j in col + 1..n {
                a[r * n + j] = a[r * n + j] - factor * a[col * n + j];
            }
            b[r] = b[r] - factor * b[col];
        }
    }

    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let tail = (i + 1..n).fold(T::zero(), |acc, j| acc + a[i * n + j] * x[j]);
        x[i] = (b[i] - tail) / a[i * n + i];
    }
    Ok(x)
}

/// A square nonlinear system `F(u) = 0`.
pub trait ResidualSystem<T>: Sync {
    fn dimension(&self) -> usize;
    fn evaluate(&self, u: &[T]) -> Result<Vec<T>>;
}

/// Adapts a closure into a [`ResidualSystem`].
pub struct FnSystem<F> {
    dimension: usize,
    f: F,
}

impl<F> FnSystem<F> {
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<T, F> ResidualSystem<T> for FnSystem<F>
where
    F: Fn(&[T]) -> Result<Vec<T>> + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn evaluate(&self, u: &[T]) -> Result<Vec<T>> {
        (self.f)(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Damping {
    /// Always take the full Newton step.
    None,
    /// Halve the step until the residual norm decreases.
    Halving { max_halvings: u32 },
}

impl Default for Damping {
    fn default() -> Self {
        Damping::Halving { max_halvings: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_iters: usize,
    /// Relative finite-difference step; column `j` uses `fd_step * (1 + |u_j|)`.
    pub fd_step: T,
    pub damping: Damping,
    /// Evaluate Jacobian columns on the rayon pool. Results are bit-identical either way.
    pub parallel: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-6),
            abs_tol: T::lit(1e-12),
            max_iters: 50,
            fd_step: T::lit(1e-7),
            damping: Damping::default(),
            parallel: false,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero()) {
            return Err(FlowError::InvalidParameter { name: "rel_tol", reason: "must be positive".into() });
        }
        if !(self.abs_tol >= T::zero()) {
            return Err(FlowError::InvalidParameter { name: "abs_tol", reason: "must be non-negative".into() });
        }
        if self.max_iters == 0 {
            return Err(FlowError::InvalidParameter { name: "max_iters", reason: "must be at least 1".into() });
        }
        if !(self.fd_step > T::zero()) {
            return Err(FlowError::InvalidParameter { name: "fd_step", reason: "must be positive".into() });
        }
        Ok(())
    }

    fn accepts(&self, residual: T, initial: T) -> bool {
        residual <= self.rel_tol * (T::one() + initial) || residual <= self.abs_tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport<T> {
    pub solution: Vec<T>,
    /// Number of Newton updates taken.
    pub iterations: usize,
    pub initial_residual_norm: T,
    pub final_residual_norm: T,
    /// Residual norm before each update, followed by the final norm.
    pub history: Vec<T>,
    pub converged: bool,
}

fn finite_residual<T: Scalar>(system: &impl ResidualSystem<T>, u: &[T]) -> Result<Vec<T>> {
    let f = system.evaluate(u)?;
    if f.len() != u.len() {
        return Err(FlowError::LengthMismatch { expected: u.len(), found: f.len() });
    }
    if f.iter().all(|x| x.is_finite()) {
        Ok(f)
    } else {
        Err(FlowError::NonFiniteResidual)
    }
}

/// Forward-difference Jacobian of `system` at `u`, given `f = F(u)`.
pub fn fd_jacobian<T: Scalar>(
    system: &impl ResidualSystem<T>,
    u: &[T],
    f: &[T],
    fd_step: T,
    parallel: bool,
) -> Result<DenseMatrix<T>> {
    let column = |j: usize| -> Result<Vec<T>> {
        let h = fd_step * (T::one() + u[j].abs());
        let mut shifted = u.to_vec();
        shifted[j] = u[j] + h;
        // Use the representable step actually taken.
        let h = shifted[j] - u[j];
        let fj = finite_residual(system, &shifted)?;
        Ok(fj.iter().zip(f).map(|(&a, &b)| (a - b) / h).collect())
    };
    let columns: Vec<Vec<T>> = if parallel {
        (0..u.len()).into_par_iter().map(column).collect::<Result<_>>()?
    } else {
        (0..u.len()).map(column).collect::<Result<_>>()?
    };
    DenseMatrix::from_columns(&columns)
}

/// Newton iteration for `system` from `initial_guess`.
///
/// Exhausted iteration or halving budgets yield `converged == false`; only a
/// singular Jacobian or a non-finite residual at an accepted iterate are errors.
pub fn solve<T: Scalar>(
    system: &impl ResidualSystem<T>,
    initial_guess: Vec<T>,
    config: &SolverConfig<T>,
) -> Result<SolverReport<T>> {
    config.validate()?;
    if initial_guess.len() != system.dimension() {
        return Err(FlowError::LengthMismatch { expected: system.dimension(), found: initial_guess.len() });
    }
    let mut u = initial_guess;
    let mut f = finite_residual(system, &u)?;
    let initial = norm(&f);
    let mut current = initial;
    let mut history = vec![initial];
    let mut iterations = 0;

    let report = |u: Vec<T>, iterations, current, history, converged| SolverReport {
        solution: u,
        iterations,
        initial_residual_norm: initial,
        final_residual_norm: current,
        history,
        converged,
    };

    while iterations < config.max_iters {
        if config.accepts(current, initial) {
            return Ok(report(u, iterations, current, history, true));
        }
        let jac = fd_jacobian(system, &u, &f, config.fd_step, config.parallel)?;
        let delta = lu_solve(&jac, &f).map_err(|e| match e {
            FlowError::SingularMatrix { column, pivot } => FlowError::SingularJacobian { column, pivot },
            other => other,
        })?;

        let max_halvings = match config.damping {
            Damping::None => 0,
            Damping::Halving { max_halvings } => max_halvings,
        };
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=max_halvings {
            let trial: Vec<T> = u.iter().zip(&delta).map(|(&a, &d)| a - step * d).collect();
            if let Ok(ft) = finite_residual(system, &trial) {
                let rt = norm(&ft);
                if rt < current || config.damping == Damping::None {
                    accepted = Some((trial, ft, rt));
                    break;
                }
            }
            step = step * T::lit(0.5);
        }
        iterations += 1;
        match accepted {
            Some((trial, ft, rt)) => {
                u = trial;
                f = ft;
                current = rt;
                history.push(current);
            }
            None => return Ok(report(u, iterations, current, history, false)),
        }
    }
    let converged = config.accepts(current, initial);
    Ok(report(u, iterations, current, history, converged))
}
