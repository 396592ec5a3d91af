use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 16;
const HERMITIAN_TOLERANCE: f64 = 1e-12;
const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 64;

/// Dense Hermitian matrix of dimension at most [`MAX_DIM`], row-major.
///
/// Serialized as rows of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<[f64; 2]>>", into = "Vec<Vec<[f64; 2]>>")]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

/// Eigenvalues and column eigenvectors, `a = V diag(values) V^H`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Row-major `dim x dim`; column `j` is the eigenvector of `values[j]`.
    pub vectors: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Checks shape and conjugate symmetry, then symmetrizes away the
    /// residual asymmetry so the diagonal is exactly real.
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Argument(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        let mut m = Self { dim, data };
        for i in 0..dim {
            for j in i..dim {
                let (a, b) = (m.get(i, j), m.get(j, i).conj());
                if (a - b).norm() > HERMITIAN_TOLERANCE {
                    return Err(Error::Domain(format!(
                        "entry ({i}, {j}) is not the conjugate of ({j}, {i})"
                    )));
                }
                let mid = (a + b) * 0.5;
                // Adding +0.0 clears negative zeros left by conjugation.
                let (re, im) = (mid.re + 0.0, if i == j { 0.0 } else { mid.im + 0.0 });
                m.data[i * dim + j] = Complex64::new(re, im);
                m.data[j * dim + i] = Complex64::new(re, -im + 0.0);
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Argument("matrix rows must form a square".into()));
        }
        Self::new(dim, rows.into_iter().flatten().collect())
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let dim = entries.len();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, &x) in entries.iter().enumerate() {
            data[i * dim + i] = Complex64::new(x, 0.0);
        }
        Self::new(dim, data)
    }

    /// `|index><index|`.
    pub fn basis_projector(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, len: dim });
        }
        let mut diag = vec![0.0; dim];
        diag[index] = 1.0;
        Self::diagonal(&diag)
    }

    /// `|psi><psi|` for a unit vector `psi`.
    pub fn pure_state(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("state has norm {norm}, expected 1")));
        }
        let dim = psi.len();
        let data = (0..dim * dim)
            .map(|k| psi[k / dim] * psi[k % dim].conj())
            .collect();
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    /// `tr(self * other)`.
    pub fn trace_product(&self, other: &Self) -> Result<Complex64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let d = self.dim;
        Ok((0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j) * other.get(j, i))
            .sum())
    }

    /// Cyclic complex Jacobi. Eigenvalues are returned in diagonal order,
    /// unsorted; a diagonal input is returned unchanged.
    pub fn eigen(&self) -> Eigen {
        let d = self.dim;
        let mut a = self.data.clone();
        let mut v = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            v[i * d + i] = Complex64::new(1.0, 0.0);
        }
        let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..d)
                .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * d + j].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= OFF_DIAGONAL_TOLERANCE * scale {
                break;
            }
            for p in 0..d {
                for q in p + 1..d {
                    rotate(&mut a, &mut v, d, p, q);
                }
            }
        }
        Eigen {
            values: (0..d).map(|i| a[i * d + i].re).collect(),
            vectors: v,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().values
    }

    /// Smallest eigenvalue at least `-tolerance`.
    pub fn is_psd(&self, tolerance: f64) -> bool {
        self.eigenvalues().iter().all(|&x| x >= -tolerance)
    }

    /// Largest absolute eigenvalue.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Zeroes `a[p][q]` by `a <- G^H a G`, `v <- v G`, where `G` is a phase on
/// `q` that makes the pivot real followed by a real plane rotation.
fn rotate(a: &mut [Complex64], v: &mut [Complex64], d: usize, p: usize, q: usize) {
    let apq = a[p * d + q];
    let mag = apq.norm();
    if mag < f64::MIN_POSITIVE {
        return;
    }
    let phase = apq / mag;
    let (app, aqq) = (a[p * d + p].re, a[q * d + q].re);
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let gpp = Complex64::new(c, 0.0);
    let gpq = Complex64::new(s, 0.0);
    let gqp = -phase.conj() * s;
    let gqq = phase.conj() * c;
    for k in 0..d {
        let (x, y) = (a[k * d + p], a[k * d + q]);
        a[k * d + p] = x * gpp + y * gqp;
        a[k * d + q] = x * gpq + y * gqq;
        let (x, y) = (v[k * d + p], v[k * d + q]);
        v[k * d + p] = x * gpp + y * gqp;
        v[k * d + q] = x * gpq + y * gqq;
    }
    for k in 0..d {
        let (x, y) = (a[p * d + k], a[q * d + k]);
        a[p * d + k] = gpp.conj() * x + gqp.conj() * y;
        a[q * d + k] = gpq.conj() * x + gqq.conj() * y;
    }
    a[p * d + q] = Complex64::new(0.0, 0.0);
    a[q * d + p] = Complex64::new(0.0, 0.0);
    a[p * d + p] = Complex64::new(app - t * mag, 0.0);
    a[q * d + q] = Complex64::new(aqq + t * mag, 0.0);
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for HermitianMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        Self::from_rows(
            rows.into_iter()
                .map(|r| r.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                .collect(),
        )
    }
}

impl From<HermitianMatrix> for Vec<Vec<[f64; 2]>> {
    fn from(m: HermitianMatrix) -> Self {
        m.data
            .chunks(m.dim)
            .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
            .collect()
    }
}
