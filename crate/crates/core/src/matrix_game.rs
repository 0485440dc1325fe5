//! Exact solution of finite two-player zero-sum matrix games.
//!
//! The row player maximizes, the column player minimizes. Pure saddle points
//! and 2×2 games are solved in closed form; everything else goes through a
//! dense simplex on the standard LP reformulation, with Bland's rule against
//! cycling. Every answer is certified by its duality gap.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Certified absolute tolerance of the game value.
pub const VALUE_TOLERANCE: f64 = 1e-8;
const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 1_000_000;

/// Value and optimal mixed strategies of a matrix game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    pub value: f64,
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    /// `max_i (A q)_i − min_j (pᵀ A)_j`: zero for an exact equilibrium.
    pub duality_gap: f64,
}

/// Solves the game with row-major payoff matrix `a` of shape `rows × cols`.
pub fn solve(a: &[f64], rows: usize, cols: usize) -> Result<GameSolution> {
    if rows == 0 || cols == 0 || a.len() != rows * cols {
        return Err(Error::InvalidInput("payoff matrix shape mismatch".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("payoff matrix has non-finite entries".into()));
    }
    let at = |i: usize, j: usize| a[i * cols + j];

    // Pure saddle point.
    let (mut lower, mut best_row) = (f64::NEG_INFINITY, 0);
    for i in 0..rows {
        let m = (0..cols).map(|j| at(i, j)).fold(f64::INFINITY, f64::min);
        if m > lower {
            lower = m;
            best_row = i;
        }
    }
    let (mut upper, mut best_col) = (f64::INFINITY, 0);
    for j in 0..cols {
        let m = (0..rows).map(|i| at(i, j)).fold(f64::NEG_INFINITY, f64::max);
        if m < upper {
            upper = m;
            best_col = j;
        }
    }
    let (value, row, col) = if lower == upper {
        let mut row = vec![0.0; rows];
        let mut col = vec![0.0; cols];
        row[best_row] = 1.0;
        col[best_col] = 1.0;
        (lower, row, col)
    } else if rows == 2 && cols == 2 {
        closed_form_2x2(at(0, 0), at(0, 1), at(1, 0), at(1, 1))
    } else {
        simplex(a, rows, cols)?
    };

    let duality_gap = duality_gap(a, rows, cols, &row, &col);
    let scale = a.iter().fold(1.0f64, |m, x| m.max(libm::fabs(*x)));
    if !(duality_gap <= VALUE_TOLERANCE * scale) {
        return Err(Error::Numerical {
            what: "matrix game solver",
            residual: duality_gap,
        });
    }
    Ok(GameSolution {
        value,
        row,
        col,
        duality_gap,
    })
}

/// Mixed equilibrium of `[[a, b], [c, d]]` without a pure saddle.
fn closed_form_2x2(a: f64, b: f64, c: f64, d: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let den = a + d - b - c;
    let value = (a * d - b * c) / den;
    let p = (d - c) / den;
    let q = (d - b) / den;
    (value, vec![p, 1.0 - p], vec![q, 1.0 - q])
}

pub fn duality_gap(a: &[f64], rows: usize, cols: usize, row: &[f64], col: &[f64]) -> f64 {
    let best_row_reply = (0..rows)
        .map(|i| (0..cols).map(|j| a[i * cols + j] * col[j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let best_col_reply = (0..cols)
        .map(|j| (0..rows).map(|i| a[i * cols + j] * row[i]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    best_row_reply - best_col_reply
}

/// `max 1ᵀz s.t. B z <= 1, z >= 0` with `B = A − min A + 1 > 0`.
///
/// The column strategy is `z / 1ᵀz`, the row strategy comes from the slack
/// reduced costs, and the shifted value is `1 / 1ᵀz`.
fn simplex(a: &[f64], rows: usize, cols: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let shift = 1.0 - a.iter().copied().fold(f64::INFINITY, f64::min);
    let width = cols + rows + 1;
    // Constraint rows followed by the objective row.
    let mut t = vec![0.0; (rows + 1) * width];
    for i in 0..rows {
        for j in 0..cols {
            t[i * width + j] = a[i * cols + j] + shift;
        }
        t[i * width + cols + i] = 1.0;
        t[i * width + width - 1] = 1.0;
    }
    for j in 0..cols {
        t[rows * width + j] = -1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let mut pivots = 0;
    while let Some(enter) = (0..cols + rows).find(|&j| t[rows * width + j] < -PIVOT_EPS) {
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..rows {
            let coef = t[i * width + enter];
            if coef > PIVOT_EPS {
                let ratio = t[i * width + width - 1] / coef;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - PIVOT_EPS || (ratio <= best + PIVOT_EPS && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(Error::Numerical {
                what: "matrix game simplex (unbounded)",
                residual: f64::INFINITY,
            });
        };
        pivot(&mut t, width, rows, leave, enter);
        basis[leave] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::Numerical {
                what: "matrix game simplex",
                residual: f64::NAN,
            });
        }
    }

    let mut z = vec![0.0; cols];
    for (i, &b) in basis.iter().enumerate() {
        if b < cols {
            z[b] = t[i * width + width - 1];
        }
    }
    let y: Vec<f64> = (0..rows).map(|i| t[rows * width + cols + i].max(0.0)).collect();
    let sz: f64 = z.iter().sum();
    let sy: f64 = y.iter().sum();
    if !(sz > 0.0 && sy > 0.0) {
        return Err(Error::Numerical {
            what: "matrix game simplex (degenerate optimum)",
            residual: f64::NAN,
        });
    }
    let value = 1.0 / sz - shift;
    Ok((
        value,
        y.iter().map(|w| w / sy).collect(),
        z.iter().map(|w| w / sz).collect(),
    ))
}

fn pivot(t: &mut [f64], width: usize, rows: usize, r: usize, c: usize) {
    let p = t[r * width + c];
    for k in 0..width {
        t[r * width + k] /= p;
    }
    for i in 0..=rows {
        if i == r {
            continue;
        }
        let f = t[i * width + c];
        if f != 0.0 {
            for k in 0..width {
                t[i * width + k] -= f * t[r * width + k];
            }
        }
    }
}
