//! Minimum-cost perfect matching on a square cost matrix.
//!
//! Shortest augmenting paths with row/column potentials, O(m³). Works for
//! any ordered numeric cost type: floats, and integers where results are
//! exact. Among all optimal matchings the lexicographically smallest
//! row → column vector is returned.

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::Matrix;

/// Cost types the solver accepts.
pub trait AssignCost: Num + Copy + PartialOrd {
    /// Reduced costs at or below this count as tight when searching for the
    /// lexicographically smallest optimum. `scale` bounds the magnitude of
    /// any partial sum the solver forms.
    fn tie_tolerance(scale: Self) -> Self;

    fn abs_cost(self) -> Self {
        if self < Self::zero() {
            Self::zero() - self
        } else {
            self
        }
    }
}

macro_rules! exact_cost {
    ($($t:ty),*) => {$(
        impl AssignCost for $t {
            fn tie_tolerance(_: Self) -> Self { 0 }
        }
    )*};
}
exact_cost!(i32, i64, i128);

impl AssignCost for f64 {
    fn tie_tolerance(scale: Self) -> Self {
        scale * 64.0 * f64::EPSILON
    }
}

impl AssignCost for f32 {
    fn tie_tolerance(scale: Self) -> Self {
        scale * 64.0 * f32::EPSILON
    }
}

/// NaN and ±∞ are the only values for which `x - x != 0`.
#[allow(clippy::eq_op)]
fn is_finite_cost<T: AssignCost>(x: T) -> bool {
    x == x && x - x == T::zero()
}

/// Optimal matching of rows onto columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment<T> {
    /// `assignment[row] = col`.
    pub assignment: Vec<usize>,
    pub total: T,
}

/// Solves the linear assignment problem for a square matrix.
pub fn hungarian_assign<T: AssignCost>(cost: &Matrix<T>) -> Result<Assignment<T>> {
    let m = cost.rows();
    if cost.cols() != m {
        return Err(Error::ShapeMismatch(format!(
            "assignment needs a square matrix, got {}x{}",
            m,
            cost.cols()
        )));
    }
    for i in 0..m {
        for j in 0..m {
            if !is_finite_cost(cost[(i, j)]) {
                return Err(Error::NonFiniteCost { row: i, col: j });
            }
        }
    }
    if m == 0 {
        return Ok(Assignment {
            assignment: Vec::new(),
            total: T::zero(),
        });
    }

    // 1-based potentials; index 0 is the virtual source column.
    let mut u = vec![T::zero(); m + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut row_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv: Vec<Option<T>> = vec![None; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta: Option<T> = None;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if minv[j].is_none_or(|mv| cur < mv) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].expect("set above");
                if delta.is_none_or(|d| mj < d) {
                    delta = Some(mj);
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column always remains");
            for j in 0..=m {
                if used[j] {
                    let r = row_of_col[j];
                    u[r] = u[r] + delta;
                    v[j] = v[j] - delta;
                } else if let Some(mv) = minv[j] {
                    minv[j] = Some(mv - delta);
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; m];
    for j in 1..=m {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }

    let mut scale = T::zero();
    for i in 0..m {
        for j in 0..m {
            let a = cost[(i, j)].abs_cost() + u[i + 1].abs_cost() + v[j + 1].abs_cost();
            if a > scale {
                scale = a;
            }
        }
    }
    let tol = T::tie_tolerance(scale);
    let tight = |i: usize, j: usize| cost[(i, j)] - u[i + 1] - v[j + 1] <= tol;
    lexicographic_min(&mut col_of_row, &tight);

    let total = col_of_row
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, &j)| acc + cost[(i, j)]);
    Ok(Assignment {
        assignment: col_of_row,
        total,
    })
}

/// Rewrites `col_of_row` into the lexicographically smallest perfect matching
/// of the tight-edge graph. With optimal potentials every optimal matching
/// uses tight edges only, so the result is still optimal.
fn lexicographic_min(col_of_row: &mut [usize], tight: &impl Fn(usize, usize) -> bool) {
    let m = col_of_row.len();
    let mut row_of_col = vec![0usize; m];
    for (i, &j) in col_of_row.iter().enumerate() {
        row_of_col[j] = i;
    }
    for i in 0..m {
        for j in 0..col_of_row[i] {
            let r = row_of_col[j];
            if r < i || !tight(i, j) {
                continue;
            }
            // Row i takes j; row r must reach i's old column through an
            // alternating path over rows > i.
            let target = col_of_row[i];
            let mut visited = vec![false; m];
            visited[j] = true;
            let mut path = Vec::new();
            if find_path(r, target, i, tight, col_of_row, &row_of_col, &mut visited, &mut path) {
                // path holds (row, new column) pairs.
                for &(pr, pc) in &path {
                    col_of_row[pr] = pc;
                    row_of_col[pc] = pr;
                }
                col_of_row[i] = j;
                row_of_col[j] = i;
                break;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn find_path(
    row: usize,
    target: usize,
    fixed_below: usize,
    tight: &impl Fn(usize, usize) -> bool,
    col_of_row: &[usize],
    row_of_col: &[usize],
    visited: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    for c in 0..col_of_row.len() {
        if visited[c] || !tight(row, c) {
            continue;
        }
        if c == target {
            path.push((row, c));
            return true;
        }
        let owner = row_of_col[c];
        if owner <= fixed_below {
            continue;
        }
        visited[c] = true;
        if find_path(owner, target, fixed_below, tight, col_of_row, row_of_col, visited, path) {
            path.push((row, c));
            return true;
        }
    }
    false
}
