//! Cubic canonical O'Sullivan spline basis on `[0, 1]`.
//!
//! The basis starts from clamped cubic B-splines with equally spaced interior
//! knots. The roughness penalty `Ω_jk = ∫ B_j'' B_k''` has a two-dimensional
//! null space (constants and lines). The canonical basis keeps the remaining
//! `K` eigendirections of `Ω`, scaled so the penalty becomes `‖u‖²`; the null
//! space is carried by the explicit `1` and `x` columns of the design.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::jacobi_eigen;

pub const DEGREE: usize = 3;
pub const MIN_BASIS: usize = 5;
pub const DEFAULT_NUM_BASIS: usize = 50;
const NULL_SPACE_TOL: f64 = 1e-10;

/// Clamped cubic knot sequence with `k - 2` equally spaced interior knots.
pub fn default_knots(k: usize) -> Result<Vec<f64>> {
    if k < MIN_BASIS {
        return Err(Error::BadBasisSize(k));
    }
    let n_interior = k - 2;
    let mut knots = Vec::with_capacity(k + 6);
    knots.extend([0.0; DEGREE + 1]);
    let denom = (n_interior + 1) as f64;
    knots.extend((1..=n_interior).map(|j| j as f64 / denom));
    knots.extend([1.0; DEGREE + 1]);
    Ok(knots)
}

pub fn num_bsplines(knots: &[f64]) -> usize {
    knots.len() - DEGREE - 1
}

/// Index `i` with `knots[i] <= x < knots[i + 1]`; the right end belongs to
/// the last non-degenerate span.
fn find_span(knots: &[f64], x: f64) -> usize {
    let n = num_bsplines(knots);
    if x >= knots[n] {
        return n - 1;
    }
    // knots[DEGREE..=n] is sorted; find last index with knots[i] <= x
    let upper = knots[DEGREE..=n].partition_point(|&t| t <= x);
    (DEGREE + upper - 1).min(n - 1)
}

/// Values and derivatives up to `nders` of the `DEGREE + 1` B-splines that
/// are nonzero on `span`, evaluated at `x` (the polynomial piece of that span
/// is used even when `x` lies on its boundary).
fn basis_derivatives(knots: &[f64], span: usize, x: f64, nders: usize) -> Vec<[f64; DEGREE + 1]> {
    const P: usize = DEGREE;
    let mut ndu = [[0.0f64; P + 1]; P + 1];
    let mut left = [0.0f64; P + 1];
    let mut right = [0.0f64; P + 1];
    ndu[0][0] = 1.0;
    for j in 1..=P {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![[0.0f64; P + 1]; nders + 1];
    for j in 0..=P {
        ders[0][j] = ndu[j][P];
    }
    let mut a = [[0.0f64; P + 1]; 2];
    for r in 0..=P {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=nders.min(P) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = (P - k) as isize;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk as usize];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize - 1) <= pk { k - 1 } else { P - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[(pk + 1) as usize][idx];
                d += a[s2][j] * ndu[idx][pk as usize];
            }
            if r as isize <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[(pk + 1) as usize][r];
                d += a[s2][k] * ndu[r][pk as usize];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = P as f64;
    for k in 1..=nders.min(P) {
        for v in ders[k].iter_mut() {
            *v *= factor;
        }
        factor *= (P - k) as f64;
    }
    ders
}

/// `|x| × (K + 2)` matrix of cubic B-spline values.
pub fn bspline_design(x: &[f64], knots: &[f64]) -> Result<DMatrix<f64>> {
    let nb = num_bsplines(knots);
    let mut out = DMatrix::zeros(x.len(), nb);
    for (row, &xv) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&xv) {
            return Err(Error::OutOfRange(xv));
        }
        let span = find_span(knots, xv);
        let vals = basis_derivatives(knots, span, xv, 0);
        for (j, v) in vals[0].iter().enumerate() {
            out[(row, span - DEGREE + j)] = *v;
        }
    }
    Ok(out)
}

/// Integrated squared second-derivative penalty. `B''` is linear on each
/// inter-knot interval, so Simpson's rule per interval is exact.
pub fn omega_penalty(knots: &[f64]) -> DMatrix<f64> {
    let nb = num_bsplines(knots);
    let mut omega = DMatrix::zeros(nb, nb);
    for span in DEGREE..nb {
        let (a, b) = (knots[span], knots[span + 1]);
        if b <= a {
            continue;
        }
        let h = b - a;
        for (x, w) in [(a, h / 6.0), (0.5 * (a + b), 4.0 * h / 6.0), (b, h / 6.0)] {
            let second = basis_derivatives(knots, span, x, 2)[2];
            for i in 0..=DEGREE {
                for j in 0..=DEGREE {
                    omega[(span - DEGREE + i, span - DEGREE + j)] += w * second[i] * second[j];
                }
            }
        }
    }
    omega
}

/// Maps B-spline coefficients to canonical coordinates: eigenvectors of `Ω`
/// with positive eigenvalues, each scaled by `1/sqrt(eigenvalue)`.
pub fn canonical_transform(omega: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let eig = jacobi_eigen(omega)?;
    let max = eig.values[0];
    let positive = eig.values.iter().filter(|&&v| v > NULL_SPACE_TOL * max).count();
    if positive < k {
        return Err(Error::RankDeficient {
            expected: k,
            found: positive,
        });
    }
    let nb = omega.nrows();
    let mut t = DMatrix::zeros(nb, k);
    for c in 0..k {
        let scale = 1.0 / eig.values[c].sqrt();
        t.set_column(c, &(eig.vectors.column(c) * scale));
    }
    Ok(t)
}

/// Knots, canonical transform and the `M × (2 + K)` design `[1, g, Z]`.
#[derive(Debug, Clone)]
pub struct SplineDesign {
    pub num_basis: usize,
    pub knots: Vec<f64>,
    pub canonical_transform: DMatrix<f64>,
    pub grid: Vec<f64>,
    pub design: DMatrix<f64>,
}

pub fn canonical_basis(
    knots: Vec<f64>,
    grid: &[f64],
    bsplines: &DMatrix<f64>,
    omega: &DMatrix<f64>,
) -> Result<SplineDesign> {
    let k = num_bsplines(&knots) - 2;
    let transform = canonical_transform(omega, k)?;
    let z = bsplines * &transform;
    let mut design = DMatrix::zeros(grid.len(), k + 2);
    for (row, &g) in grid.iter().enumerate() {
        design[(row, 0)] = 1.0;
        design[(row, 1)] = g;
    }
    design.columns_mut(2, k).copy_from(&z);
    Ok(SplineDesign {
        num_basis: k,
        knots,
        canonical_transform: transform,
        grid: grid.to_vec(),
        design,
    })
}

impl SplineDesign {
    /// Canonical O'Sullivan design on `grid` with `k` basis functions.
    pub fn new(grid: &[f64], k: usize) -> Result<Self> {
        if k + 2 > grid.len() {
            return Err(Error::BadBasisSize(k));
        }
        let knots = default_knots(k)?;
        let b = bspline_design(grid, &knots)?;
        let omega = omega_penalty(&knots);
        canonical_basis(knots, grid, &b, &omega)
    }

    pub fn num_coef(&self) -> usize {
        self.num_basis + 2
    }

    /// Rows `(1, x, z_1(x), ..., z_K(x))` at arbitrary points of `[0, 1]`.
    pub fn design_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let b = bspline_design(x, &self.knots)?;
        let z = b * &self.canonical_transform;
        let mut out = DMatrix::zeros(x.len(), self.num_coef());
        for (row, &xv) in x.iter().enumerate() {
            out[(row, 0)] = 1.0;
            out[(row, 1)] = xv;
        }
        out.columns_mut(2, self.num_basis).copy_from(&z);
        Ok(out)
    }

    /// Column `j` of the grid design as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.design.nrows();
        &self.design.as_slice()[j * m..(j + 1) * m]
    }
}
