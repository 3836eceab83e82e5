//! The two-parameter field `H(s, t, x)` over real starts, continued past the
//! hitting time by restarting from the boundary.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::DrivingNoise;
use crate::scalar::Real;
use crate::solver::{Flow, HittingRecord};
use crate::stats::linear_fit;

/// `H̃(s, t, x)`: the real solution before `T^{s,x}`, then `H(T^{s,x}, t, 0+)`.
pub fn evaluate_field<T: Real, N: DrivingNoise<T>>(
    flow: &Flow<'_, T, N>,
    s: T,
    t: T,
    x: T,
    tol: T,
) -> Result<Complex<T>> {
    if t == s {
        return Ok(Complex::new(x, T::zero()));
    }
    let restart = if x == T::zero() {
        s
    } else {
        match flow.real_value(s, t, x)? {
            Ok(v) => return Ok(Complex::new(v, T::zero())),
            Err(record) => record.hit_time,
        }
    };
    boundary_value(flow, restart, t, tol)
}

fn boundary_value<T: Real, N: DrivingNoise<T>>(flow: &Flow<'_, T, N>, s: T, t: T, tol: T) -> Result<Complex<T>> {
    if t <= s {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    Ok(flow.boundary_start(s, t, T::FRAC_PI_2(), tol)?.solution.last())
}

/// `H(r, t, ·)` applied to a point of the closed upper half plane.
fn continue_from<T: Real, N: DrivingNoise<T>>(
    flow: &Flow<'_, T, N>,
    r: T,
    t: T,
    z: Complex<T>,
    tol: T,
) -> Result<Complex<T>> {
    if z.im == T::zero() {
        evaluate_field(flow, r, t, z.re, tol)
    } else {
        Ok(flow.solve(r, t, z)?.last())
    }
}

/// `|H̃(s, t, x) − H̃(r, t, H̃(s, r, x))|`.
pub fn flow_property_residual<T: Real, N: DrivingNoise<T>>(
    flow: &Flow<'_, T, N>,
    s: T,
    r: T,
    t: T,
    x: T,
    tol: T,
) -> Result<T> {
    if !(s <= r && r <= t) {
        return Err(Error::invalid(format!("need s <= r <= t, got ({s}, {r}, {t})")));
    }
    let direct = evaluate_field(flow, s, t, x, tol)?;
    let middle = evaluate_field(flow, s, r, x, tol)?;
    let composed = continue_from(flow, r, t, middle, tol)?;
    Ok((direct - composed).norm())
}

/// Field values on a rectangular `(s, t, x)` grid; entries with `t < s` are absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldGrid<T> {
    pub s_grid: Vec<T>,
    pub t_grid: Vec<T>,
    pub x_grid: Vec<T>,
    /// Indexed `[s][t][x]`, flattened.
    pub values: Vec<Option<Complex<T>>>,
    /// `T^{s,x}` indexed `[s][x]`.
    pub hitting: Vec<T>,
}

impl<T: Real> FieldGrid<T> {
    fn index(&self, is: usize, it: usize, ix: usize) -> usize {
        (is * self.t_grid.len() + it) * self.x_grid.len() + ix
    }

    pub fn get(&self, is: usize, it: usize, ix: usize) -> Option<Complex<T>> {
        self.values[self.index(is, it, ix)]
    }

    pub fn hitting_time(&self, is: usize, ix: usize) -> T {
        self.hitting[is * self.x_grid.len() + ix]
    }

    /// `(s, t, x, H̃)` for every present entry, in `s`, `t`, `x` order.
    pub fn entries(&self) -> impl Iterator<Item = (T, T, T, Complex<T>)> + '_ {
        let (ns, nt, nx) = (self.s_grid.len(), self.t_grid.len(), self.x_grid.len());
        (0..ns).flat_map(move |is| {
            (0..nt).flat_map(move |it| {
                (0..nx).filter_map(move |ix| {
                    self.get(is, it, ix).map(|v| (self.s_grid[is], self.t_grid[it], self.x_grid[ix], v))
                })
            })
        })
    }

    /// Largest `|ΔH̃|` between entries adjacent along one grid axis.
    pub fn max_adjacent_jump(&self) -> T {
        let (ns, nt, nx) = (self.s_grid.len(), self.t_grid.len(), self.x_grid.len());
        let mut worst = T::zero();
        let mut visit = |a: Option<Complex<T>>, b: Option<Complex<T>>| {
            if let (Some(a), Some(b)) = (a, b) {
                worst = worst.max((a - b).norm());
            }
        };
        for is in 0..ns {
            for it in 0..nt {
                for ix in 0..nx {
                    let here = self.get(is, it, ix);
                    if is + 1 < ns {
                        visit(here, self.get(is + 1, it, ix));
                    }
                    if it + 1 < nt {
                        visit(here, self.get(is, it + 1, ix));
                    }
                    if ix + 1 < nx {
                        visit(here, self.get(is, it, ix + 1));
                    }
                }
            }
        }
        worst
    }

    /// Entries past the hitting time that are not strictly inside the half plane.
    pub fn half_plane_violations(&self) -> usize {
        let (ns, nt, nx) = (self.s_grid.len(), self.t_grid.len(), self.x_grid.len());
        let mut count = 0;
        for is in 0..ns {
            for ix in 0..nx {
                let hit = self.hitting_time(is, ix);
                for it in 0..nt {
                    if self.t_grid[it] > hit {
                        if let Some(v) = self.get(is, it, ix) {
                            if !(v.im > T::zero()) {
                                count += 1;
                            }
                        }
                    }
                }
            }
        }
        count
    }
}

fn check_increasing<T: Real>(name: &str, grid: &[T]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid(format!("{name} must be a non-empty increasing sequence")));
    }
    Ok(())
}

/// One `(s, x)` column: real values up to the hitting time, then one observed
/// boundary solve from the hitting time covering the remaining `t_grid`.
fn field_column<T: Real, N: DrivingNoise<T>>(
    flow: &Flow<'_, T, N>,
    s: T,
    x: T,
    t_grid: &[T],
    tol: T,
) -> Result<(T, Vec<Option<Complex<T>>>)> {
    let hit = if x == T::zero() { s } else { flow.hitting_time(s, x)?.hit_time };
    let mut column = vec![None; t_grid.len()];
    let mut after = Vec::new();
    for (j, &t) in t_grid.iter().enumerate() {
        if t < s {
            continue;
        }
        if t == s {
            column[j] = Some(Complex::new(x, T::zero()));
        } else if t <= hit {
            column[j] = Some(match flow.real_value(s, t, x)? {
                Ok(v) => Complex::new(v, T::zero()),
                Err(record) => boundary_value(flow, record.hit_time, t, tol)?,
            });
        } else {
            after.push(j);
        }
    }
    if let Some(&last) = after.last() {
        let observe: Vec<T> = after.iter().map(|&j| t_grid[j]).collect();
        let limit = flow.boundary_start_observed(hit, t_grid[last], T::FRAC_PI_2(), tol, &observe)?;
        for &j in &after {
            column[j] = Some(limit.solution.value_at(t_grid[j])?);
        }
    }
    Ok((hit, column))
}

/// `H̃` on every grid point with `t ≥ s`, one `(s, x)` column per task.
pub fn field_grid<T: Real, N: DrivingNoise<T>>(
    flow: &Flow<'_, T, N>,
    s_grid: &[T],
    t_grid: &[T],
    x_grid: &[T],
    tol: T,
) -> Result<FieldGrid<T>> {
    check_increasing("s grid", s_grid)?;
    check_increasing("t grid", t_grid)?;
    check_increasing("x grid", x_grid)?;
    let nx = x_grid.len();
    let columns: Vec<(T, Vec<Option<Complex<T>>>)> = (0..s_grid.len() * nx)
        .into_par_iter()
        .map(|c| field_column(flow, s_grid[c / nx], x_grid[c % nx], t_grid, tol))
        .collect::<Result<_>>()?;
    let nt = t_grid.len();
    let mut values = vec![None; s_grid.len() * nt * nx];
    let mut hitting = Vec::with_capacity(columns.len());
    for (c, (hit, column)) in columns.into_iter().enumerate() {
        let (is, ix) = (c / nx, c % nx);
        for (it, v) in column.into_iter().enumerate() {
            values[(is * nt + it) * nx + ix] = v;
        }
        hitting.push(hit);
    }
    Ok(FieldGrid { s_grid: s_grid.to_vec(), t_grid: t_grid.to_vec(), x_grid: x_grid.to_vec(), values, hitting })
}

/// Hitting times over an `(s, x)` grid with the comparison and continuity audits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingSurface<T> {
    pub s_grid: Vec<T>,
    pub x_grid: Vec<T>,
    /// Indexed `[s][x]`.
    pub records: Vec<Vec<HittingRecord<T>>>,
    /// Pairs on one side of 0 where a larger `|x|` hits strictly earlier.
    pub monotone_violations: usize,
    /// Largest `|ΔT|` between neighbours along either axis.
    pub max_neighbor_gap: T,
}

impl<T: Real> HittingSurface<T> {
    /// `max_s (T^{s,x} − s)` for column `ix`.
    pub fn max_excess(&self, ix: usize) -> T {
        self.records.iter().map(|row| row[ix].hit_time - row[ix].s).fold(T::zero(), T::max)
    }
}

pub fn hitting_surface<T: Real, N: DrivingNoise<T>>(
    flow: &Flow<'_, T, N>,
    s_grid: &[T],
    x_grid: &[T],
) -> Result<HittingSurface<T>> {
    check_increasing("x grid", x_grid)?;
    if s_grid.is_empty() {
        return Err(Error::invalid("s grid is empty"));
    }
    let records: Vec<Vec<HittingRecord<T>>> = s_grid
        .par_iter()
        .map(|&s| x_grid.iter().map(|&x| flow.hitting_time(s, x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let mut monotone_violations = 0;
    let mut max_neighbor_gap = T::zero();
    for (i, row) in records.iter().enumerate() {
        for j in 0..row.len() {
            if j + 1 < row.len() {
                let (lo, hi) = (&row[j], &row[j + 1]);
                max_neighbor_gap = max_neighbor_gap.max((hi.hit_time - lo.hit_time).abs());
                // x ascending: T grows with x on the positive side, shrinks on the negative side
                if lo.x >= T::zero() && hi.hit_time < lo.hit_time {
                    monotone_violations += 1;
                }
                if hi.x <= T::zero() && hi.hit_time > lo.hit_time {
                    monotone_violations += 1;
                }
            }
            if i + 1 < records.len() {
                max_neighbor_gap = max_neighbor_gap.max((records[i + 1][j].hit_time - row[j].hit_time).abs());
            }
        }
    }
    Ok(HittingSurface {
        s_grid: s_grid.to_vec(),
        x_grid: x_grid.to_vec(),
        records,
        monotone_violations,
        max_neighbor_gap,
    })
}

/// Fit of `S(y) = max_{(s,t)} |H'(s, t, iy)| ≈ C y^{−β}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeFit<T> {
    pub c: T,
    pub beta: T,
    /// `(y, S(y))` for `y = 2^-1, 2^-2, …`.
    pub sup: Vec<(T, T)>,
    /// Levels where `S` dropped by more than the 5% slack as `y` decreased.
    pub monotone_violations: usize,
}

impl<T: Real> DerivativeFit<T> {
    pub fn beta_below_one(&self) -> bool {
        self.beta < T::one()
    }
}

/// Side of the square `(s, t)` grid used by [`derivative_bound_fit`].
pub const DERIVATIVE_GRID: usize = 32;

pub fn derivative_bound_fit<T: Real, N: DrivingNoise<T>>(
    flow: &Flow<'_, T, N>,
    horizon: T,
    y_levels: u32,
) -> Result<DerivativeFit<T>> {
    if y_levels < 4 {
        return Err(Error::invalid(format!("need at least 4 levels, got {y_levels}")));
    }
    if !(horizon > T::zero()) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    let n = T::from_usize(DERIVATIVE_GRID).unwrap();
    let grid: Vec<T> = (0..=DERIVATIVE_GRID).map(|i| horizon * T::from_usize(i).unwrap() / n).collect();
    let mut sup = Vec::with_capacity(y_levels as usize);
    for k in 1..=y_levels {
        let y = T::lit(0.5).powi(k as i32);
        let z0 = Complex::new(T::zero(), y);
        let best = grid[..DERIVATIVE_GRID]
            .par_iter()
            .map(|&s| {
                let sol = flow.solve_observed(s, horizon, z0, &grid)?;
                grid.iter()
                    .filter(|&&t| t >= s)
                    .map(|&t| sol.log_deriv_at(t))
                    .try_fold(T::neg_infinity(), |m, v| v.map(|v| m.max(v)))
            })
            .collect::<Result<Vec<T>>>()?
            .into_iter()
            .fold(T::neg_infinity(), T::max);
        sup.push((y, best.exp()));
    }
    let slack = T::lit(0.95);
    let monotone_violations = sup.windows(2).filter(|w| w[1].1 < slack * w[0].1).count();
    let first = sup[0].1;
    let (c, beta) = if sup.iter().all(|&(_, v)| v == first) {
        (first, T::zero())
    } else {
        let xs: Vec<T> = sup.iter().map(|&(y, _)| (T::one() / y).ln()).collect();
        let ys: Vec<T> = sup.iter().map(|&(_, v)| v.ln()).collect();
        let (intercept, slope) = linear_fit(&xs, &ys)?;
        (intercept.exp(), slope)
    };
    Ok(DerivativeFit { c, beta, sup, monotone_violations })
}
