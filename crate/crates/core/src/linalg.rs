//! Small dense complex matrices and a cyclic Jacobi solver for 4x4 Hermitian
//! eigenproblems.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const DIM: usize = 4;
/// Off-diagonal Frobenius norm the Jacobi sweep aims for, relative to ||A||.
const JACOBI_TARGET: f64 = 1e-15;
/// Worst residual accepted when the sweep budget runs out.
const JACOBI_ACCEPT: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 60;
/// Entrywise tolerance for treating a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues in [-SQRT_CLAMP, 0) are floating point noise and clamped to zero.
pub const SQRT_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix4(pub [[C64; DIM]; DIM]);

impl Matrix4 {
    pub fn zeros() -> Self {
        Matrix4([[C64::new(0.0, 0.0); DIM]; DIM])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..DIM {
            m.0[i][i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real(rows: [[f64; DIM]; DIM]) -> Self {
        let mut m = Self::zeros();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.0[i][j] = C64::new(v, 0.0);
            }
        }
        m
    }

    pub fn diagonal(d: [f64; DIM]) -> Self {
        let mut m = Self::zeros();
        for i in 0..DIM {
            m.0[i][i] = C64::new(d[i], 0.0);
        }
        m
    }

    /// `|v><w|`
    pub fn outer(v: &[C64; DIM], w: &[C64; DIM]) -> Self {
        let mut m = Self::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                m.0[i][j] = v[i] * w[j].conj();
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..DIM).map(|i| self.0[i][i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix4) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..DIM {
            for j in 0..DIM {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    pub fn apply(&self, v: &[C64; DIM]) -> [C64; DIM] {
        let mut out = [C64::new(0.0, 0.0); DIM];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..DIM).map(|j| self.0[i][j] * v[j]).sum();
        }
        out
    }

    /// `<v|M|w>`
    pub fn sandwich(&self, v: &[C64; DIM], w: &[C64; DIM]) -> C64 {
        let mw = self.apply(w);
        (0..DIM).map(|i| v[i].conj() * mw[i]).sum()
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut()
            .flat_map(|r| r.iter_mut())
            .for_each(|z| *z *= k);
        m
    }

    fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }
}

impl Default for Matrix4 {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Index<(usize, usize)> for Matrix4 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Matrix4 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Add for Matrix4 {
    type Output = Matrix4;
    fn add(mut self, rhs: Matrix4) -> Matrix4 {
        self += rhs;
        self
    }
}

impl AddAssign for Matrix4 {
    fn add_assign(&mut self, rhs: Matrix4) {
        for i in 0..DIM {
            for j in 0..DIM {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for Matrix4 {
    type Output = Matrix4;
    fn sub(mut self, rhs: Matrix4) -> Matrix4 {
        for i in 0..DIM {
            for j in 0..DIM {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl Mul for Matrix4 {
    type Output = Matrix4;
    fn mul(self, rhs: Matrix4) -> Matrix4 {
        let mut m = Matrix4::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                m.0[i][j] = (0..DIM).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        m
    }
}

impl Mul<Matrix4> for f64 {
    type Output = Matrix4;
    fn mul(self, rhs: Matrix4) -> Matrix4 {
        rhs.scale(self)
    }
}

/// Eigenvalues in ascending order with the matching unit eigenvectors as columns.
#[derive(Debug, Clone, Copy)]
pub struct Eigen {
    pub values: [f64; DIM],
    pub vectors: Matrix4,
}

impl Eigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> Matrix4 {
        let mut out = Matrix4::zeros();
        for k in 0..DIM {
            let fk = f(self.values[k]);
            if fk == 0.0 {
                continue;
            }
            for i in 0..DIM {
                for j in 0..DIM {
                    out.0[i][j] += self.vectors.0[i][k] * self.vectors.0[j][k].conj() * fk;
                }
            }
        }
        out
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Only the Hermitian part of `a` is used.
pub fn eigh(a: &Matrix4) -> Result<Eigen> {
    let mut m = *a;
    for i in 0..DIM {
        m.0[i][i] = C64::new(m.0[i][i].re, 0.0);
        for j in (i + 1)..DIM {
            let avg = (m.0[i][j] + m.0[j][i].conj()) * 0.5;
            m.0[i][j] = avg;
            m.0[j][i] = avg.conj();
        }
    }
    let mut v = Matrix4::identity();
    let norm = m.frobenius_norm();
    if !norm.is_finite() {
        return Err(Error::Numerical(format!("eigensolver input is not finite: {a:?}")));
    }

    let off = |m: &Matrix4| -> f64 {
        let mut s = 0.0;
        for i in 0..DIM {
            for j in 0..DIM {
                if i != j {
                    s += m.0[i][j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut residual = off(&m);
    let mut sweeps = 0;
    while residual > JACOBI_TARGET * norm && sweeps < JACOBI_MAX_SWEEPS {
        for p in 0..DIM {
            for q in (p + 1)..DIM {
                rotate(&mut m, &mut v, p, q);
            }
        }
        sweeps += 1;
        let next = off(&m);
        if next >= residual && next <= JACOBI_ACCEPT * norm {
            residual = next;
            break;
        }
        residual = next;
    }
    if residual > JACOBI_ACCEPT * norm {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver stalled at off-diagonal norm {residual:e} (matrix norm {norm:e})"
        )));
    }

    let mut order: [usize; DIM] = [0, 1, 2, 3];
    order.sort_by(|&x, &y| m.0[x][x].re.total_cmp(&m.0[y][y].re));
    let mut values = [0.0; DIM];
    let mut vectors = Matrix4::zeros();
    for (k, &src) in order.iter().enumerate() {
        values[k] = m.0[src][src].re;
        for i in 0..DIM {
            vectors.0[i][k] = v.0[i][src];
        }
    }
    Ok(Eigen { values, vectors })
}

// One rotation J = D * P zeroing entry (p, q); D carries the phase of a_pq so
// the remaining 2x2 problem is real symmetric.
fn rotate(m: &mut Matrix4, v: &mut Matrix4, p: usize, q: usize) {
    let apq = m.0[p][q];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let phase = apq / g;
    let theta = (m.0[q][q].re - m.0[p][p].re) / (2.0 * g);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let ph_conj = phase.conj();

    for k in 0..DIM {
        let akp = m.0[k][p];
        let akq = m.0[k][q];
        m.0[k][p] = akp * c - akq * ph_conj * s;
        m.0[k][q] = akp * s + akq * ph_conj * c;

        let vkp = v.0[k][p];
        let vkq = v.0[k][q];
        v.0[k][p] = vkp * c - vkq * ph_conj * s;
        v.0[k][q] = vkp * s + vkq * ph_conj * c;
    }
    for k in 0..DIM {
        let bpk = m.0[p][k];
        let bqk = m.0[q][k];
        m.0[p][k] = bpk * c - bqk * phase * s;
        m.0[q][k] = bpk * s + bqk * phase * c;
    }
    m.0[p][q] = C64::new(0.0, 0.0);
    m.0[q][p] = C64::new(0.0, 0.0);
    m.0[p][p] = C64::new(m.0[p][p].re, 0.0);
    m.0[q][q] = C64::new(m.0[q][q].re, 0.0);
}

/// A 4x4 complex matrix that is Hermitian within [`HERMITIAN_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianMatrix4(Matrix4);

impl HermitianMatrix4 {
    pub fn new(m: Matrix4) -> Result<Self> {
        let defect = m.hermiticity_defect();
        if !(defect <= HERMITIAN_TOL) {
            return Err(Error::Numerical(format!(
                "matrix is not Hermitian (max |A - A^H| = {defect:e})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Replaces `m` by its Hermitian part without checking.
    pub(crate) fn symmetrized(m: Matrix4) -> Self {
        Self((m + m.adjoint()).scale(0.5))
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn zeros() -> Self {
        Self(Matrix4::zeros())
    }

    pub fn matrix(&self) -> &Matrix4 {
        &self.0
    }

    pub fn eigen(&self) -> Result<Eigen> {
        eigh(&self.0)
    }

    pub fn eigenvalues(&self) -> Result<[f64; DIM]> {
        Ok(self.eigen()?.values)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(self.0.scale(k))
    }

    /// Positive semidefinite square root.
    pub fn sqrt_psd(&self) -> Result<Self> {
        matrix_sqrt_psd(self)
    }
}

impl Add for HermitianMatrix4 {
    type Output = HermitianMatrix4;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for HermitianMatrix4 {
    type Output = HermitianMatrix4;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Mul<HermitianMatrix4> for f64 {
    type Output = HermitianMatrix4;
    fn mul(self, rhs: HermitianMatrix4) -> HermitianMatrix4 {
        rhs.scale(self)
    }
}

pub fn matrix_sqrt_psd(m: &HermitianMatrix4) -> Result<HermitianMatrix4> {
    let eig = m.eigen()?;
    if eig.min() < -SQRT_CLAMP {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min(),
        });
    }
    Ok(HermitianMatrix4::symmetrized(
        eig.reconstruct(|l| l.max(0.0).sqrt()),
    ))
}

/// Serializable snapshot used by the POVM debug dump.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixDump {
    pub re: [[f64; DIM]; DIM],
    pub im: [[f64; DIM]; DIM],
    pub eigenvalues: [f64; DIM],
}

impl MatrixDump {
    pub fn of(m: &HermitianMatrix4) -> Result<Self> {
        let mut re = [[0.0; DIM]; DIM];
        let mut im = [[0.0; DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                re[i][j] = m.0 .0[i][j].re;
                im[i][j] = m.0 .0[i][j].im;
            }
        }
        Ok(Self {
            re,
            im,
            eigenvalues: m.eigenvalues()?,
        })
    }
}
