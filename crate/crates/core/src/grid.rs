//! Uniform time grids and cadlag sample paths stored on them.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::seed::Seed;

/// Uniform grid `t_k = k * t_end / steps`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid<T = f64> {
    t_end: T,
    steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_end: T, steps: usize) -> Result<Self> {
        if !(t_end > T::zero()) || !t_end.is_finite() {
            return Err(invalid(format!("grid horizon must be positive, got {t_end}")));
        }
        if steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        Ok(Self { t_end, steps })
    }

    #[inline]
    pub fn t_end(&self) -> T {
        self.t_end
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn step(&self) -> T {
        self.t_end / T::of_usize(self.steps)
    }

    /// Node `k`; the last node is `t_end` exactly.
    #[inline]
    pub fn node(&self, k: usize) -> T {
        if k == self.steps {
            self.t_end
        } else {
            T::of_usize(k) * self.t_end / T::of_usize(self.steps)
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        (0..=self.steps).map(move |k| self.node(k))
    }

    /// Index of the largest node `<= t`.
    pub fn index_at(&self, t: T) -> Result<usize> {
        if !(t >= T::zero() && t <= self.t_end) {
            return Err(Error::OutOfRange {
                t: t.as_f64(),
                t_end: self.t_end.as_f64(),
            });
        }
        let guess = (t * T::of_usize(self.steps) / self.t_end)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.steps);
        let mut k = guess;
        while k < self.steps && self.node(k + 1) <= t {
            k += 1;
        }
        while k > 0 && self.node(k) > t {
            k -= 1;
        }
        Ok(k)
    }

    /// The same grid with both horizon and step count scaled by `factor`.
    /// For power-of-two factors the step is bit-identical.
    pub fn extended(&self, factor: usize) -> Result<Self> {
        Self::new(self.t_end * T::of_usize(factor), self.steps * factor)
    }
}

pub fn make_uniform_grid<T: Real>(t_end: T, steps: usize) -> Result<TimeGrid<T>> {
    TimeGrid::new(t_end, steps)
}

/// A sampled path, read as a right-continuous step function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T = f64> {
    grid: TimeGrid<T>,
    values: Vec<T>,
}

impl<T: Real> Path<T> {
    pub fn new(grid: TimeGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "path has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite path value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid<T>, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Value at time `t` under the cadlag step rule: `values[k]` for the last node `t_k <= t`.
    pub fn eval(&self, t: T) -> Result<T> {
        Ok(self.values[self.grid.index_at(t)?])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn running_min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }
}

pub fn eval_path<T: Real>(p: &Path<T>, t: T) -> Result<T> {
    p.eval(t)
}

/// `N` paths on one grid plus what is needed to regenerate them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble<T = f64> {
    grid: TimeGrid<T>,
    paths: Vec<Path<T>>,
    master_seed: Seed,
    generator_tag: String,
}

impl<T: Real> PathEnsemble<T> {
    pub fn new(
        grid: TimeGrid<T>,
        paths: Vec<Path<T>>,
        master_seed: Seed,
        generator_tag: impl Into<String>,
    ) -> Result<Self> {
        if paths.is_empty() {
            return Err(invalid("ensemble needs at least one path"));
        }
        if paths.iter().any(|p| *p.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid,
            paths,
            master_seed,
            generator_tag: generator_tag.into(),
        })
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn paths(&self) -> &[Path<T>] {
        &self.paths
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn master_seed(&self) -> Seed {
        self.master_seed
    }

    pub fn generator_tag(&self) -> &str {
        &self.generator_tag
    }

    /// Values of every path at time `t`.
    pub fn marginal(&self, t: T) -> Result<Vec<T>> {
        if t > self.grid.t_end() {
            return Err(Error::Horizon {
                t: t.as_f64(),
                horizon: self.grid.t_end().as_f64(),
            });
        }
        let k = self.grid.index_at(t)?;
        Ok(self.paths.iter().map(|p| p.values()[k]).collect())
    }
}
