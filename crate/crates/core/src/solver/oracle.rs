//! Brute-force minimax certification on small instances.
//!
//! Evaluates the worst-case total cost on an axis-aligned grid around `x0`.
//! The inner maximum enumerates every corner of the parameter ball: the loss
//! falls with the score and the score is linear in the parameters, so the
//! worst model is the corner with the smallest score.

use rayon::prelude::*;

use crate::adversary::{enumerate_corners, Neighborhood};
use crate::error::{check_dim, RecourseError, Result};
use crate::glm::{ModelParams, RecourseQuery};
use crate::scalar::Scalar;

pub const MAX_ORACLE_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    /// Each axis spans `x0_i ± half_width`.
    pub half_width: T,
    /// Grid spacing; `None` uses 0.01 for one feature and 0.05 otherwise.
    pub step: Option<T>,
    /// Add `0` to every axis, where the adversary switches orthant.
    pub include_kinks: bool,
}

impl<T: Scalar> Default for GridSpec<T> {
    fn default() -> Self {
        GridSpec {
            half_width: T::lit(5.0),
            step: None,
            include_kinks: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    pub x_best: Vec<T>,
    pub value: T,
}

fn axis<T: Scalar>(center: T, frozen: bool, grid: &GridSpec<T>, h: T) -> Vec<T> {
    if frozen {
        return vec![center];
    }
    let k = (grid.half_width / h).round().to_i64().unwrap_or(0).max(0);
    let mut pts: Vec<T> = (-k..=k)
        .map(|j| center + h * T::from_i64(j).expect("grid index"))
        .collect();
    let zero = T::zero();
    if grid.include_kinks && (zero - center).abs() <= grid.half_width && !pts.contains(&zero) {
        pts.push(zero);
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    }
    pts
}

/// Grid minimizer of `max_{θ ∈ ball} J(x, θ)` for `d ≤ 3`.
pub fn minimax_oracle<T: Scalar>(
    q: &RecourseQuery<T>,
    n: &Neighborhood<T>,
    grid: &GridSpec<T>,
) -> Result<OracleResult<T>> {
    q.validate()?;
    check_dim("model", q.dim(), n.dim())?;
    let d = q.dim();
    if d > MAX_ORACLE_DIM {
        return Err(RecourseError::DimensionTooLarge {
            dim: d,
            limit: MAX_ORACLE_DIM,
        });
    }
    let h = grid
        .step
        .unwrap_or_else(|| if d == 1 { T::lit(0.01) } else { T::lit(0.05) });
    if !(h > T::zero() && grid.half_width >= T::zero()) {
        return Err(RecourseError::InvalidConfig(
            "grid must have positive spacing".into(),
        ));
    }

    let axes: Vec<Vec<T>> = (0..d)
        .map(|i| axis(q.x0[i], q.immutable[i], grid, h))
        .collect();
    let corners = enumerate_corners(n);
    let k = corners.len();
    let search = Search {
        q,
        axes: &axes,
        corners: &corners,
    };

    let (value, flat) = (0..axes[0].len())
        .into_par_iter()
        .map(|first| {
            let mut scratch = vec![T::zero(); (d + 1) * k];
            for (slot, c) in scratch[..k].iter_mut().zip(&corners) {
                *slot = c.intercept_or_zero();
            }
            let mut best = (T::infinity(), usize::MAX);
            search.descend(0, Some(first), &mut scratch, T::zero(), 0, &mut best);
            best
        })
        .reduce(
            || (T::infinity(), usize::MAX),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );

    let mut x_best = vec![T::zero(); d];
    let mut rest = flat;
    for i in (0..d).rev() {
        x_best[i] = axes[i][rest % axes[i].len()];
        rest /= axes[i].len();
    }
    Ok(OracleResult { x_best, value })
}

/// Row-major walk over the grid that carries every corner's partial score
/// from one axis to the next.
struct Search<'a, T> {
    q: &'a RecourseQuery<T>,
    axes: &'a [Vec<T>],
    corners: &'a [ModelParams<T>],
}

impl<T: Scalar> Search<'_, T> {
    fn descend(
        &self,
        level: usize,
        only: Option<usize>,
        scratch: &mut [T],
        l1: T,
        flat: usize,
        best: &mut (T, usize),
    ) {
        let k = self.corners.len();
        let d = self.axes.len();
        if level == d {
            let worst = scratch[d * k..].iter().copied().fold(T::infinity(), T::min);
            let v = self.q.loss.value(worst) + self.q.lambda * l1;
            if v < best.0 || (v == best.0 && flat < best.1) {
                *best = (v, flat);
            }
            return;
        }
        let axis = &self.axes[level];
        let range = only.map_or(0..axis.len(), |j| j..j + 1);
        for j in range {
            let x = axis[j];
            let (done, todo) = scratch.split_at_mut((level + 1) * k);
            let cur = &done[level * k..];
            for ((next, &p), c) in todo[..k].iter_mut().zip(cur).zip(self.corners) {
                *next = p + c.weights[level] * x;
            }
            let step = self.q.cost.weights[level] * (x - self.q.x0[level]).abs();
            self.descend(
                level + 1,
                None,
                scratch,
                l1 + step,
                flat * axis.len() + j,
                best,
            );
        }
    }
}
