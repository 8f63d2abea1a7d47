//! Dense complex matrix algebra `L(ℂ^m)` with induced operator norms.
//!
//! An [`AlgebraElement`] stands for an element of a unital Banach algebra.
//! `m = 1` gives the scalar algebra `ℂ`. The norm is one of the operator
//! norms induced by the vector norms in [`NormTag`], so `‖1‖ = 1` always.
//!
//! Besides the ring operations this module supplies the logarithmic norm
//! (matrix measure) in closed form, its defining difference quotient as an
//! oracle, the matrix exponential and the Lyapunov index.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::options::SolverOptions;

pub type Scalar = Complex64;

/// Vector norm inducing the operator norm of the algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormTag {
    L1,
    L2,
    LInf,
}

impl NormTag {
    pub const ALL: [NormTag; 3] = [NormTag::L1, NormTag::L2, NormTag::LInf];

    /// Norm of a coordinate vector.
    pub fn vector_norm(self, v: &[Scalar]) -> f64 {
        match self {
            NormTag::L1 => v.iter().map(|z| z.norm()).sum(),
            NormTag::L2 => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            NormTag::LInf => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for NormTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormTag::L1 => "l1",
            NormTag::L2 => "l2",
            NormTag::LInf => "linf",
        })
    }
}

/// An `m × m` complex matrix, row-major, carrying its default norm.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    dim: usize,
    entries: Vec<Scalar>,
    tag: NormTag,
}

impl AlgebraElement {
    pub fn identity(m: usize, tag: NormTag) -> Self {
        Self::from_fn(m, tag, |i, j| {
            if i == j {
                Scalar::new(1.0, 0.0)
            } else {
                Scalar::new(0.0, 0.0)
            }
        })
    }

    pub fn zeros(m: usize, tag: NormTag) -> Self {
        assert!(m >= 1, "algebra dimension must be positive");
        Self {
            dim: m,
            entries: vec![Scalar::new(0.0, 0.0); m * m],
            tag,
        }
    }

    pub fn from_fn(m: usize, tag: NormTag, mut f: impl FnMut(usize, usize) -> Scalar) -> Self {
        assert!(m >= 1, "algebra dimension must be positive");
        let mut entries = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                entries.push(f(i, j));
            }
        }
        Self { dim: m, entries, tag }
    }

    /// Builds from rows; every row must have as many entries as there are rows.
    pub fn from_rows(rows: &[Vec<Scalar>], tag: NormTag) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::BadParameter("empty matrix".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: bad.len(),
            });
        }
        Ok(Self {
            dim: m,
            entries: rows.iter().flatten().copied().collect(),
            tag,
        })
    }

    /// Convenience constructor for real matrices.
    pub fn from_real_rows(rows: &[&[f64]], tag: NormTag) -> Result<Self> {
        let rows: Vec<Vec<Scalar>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| Scalar::new(v, 0.0)).collect())
            .collect();
        Self::from_rows(&rows, tag)
    }

    pub fn diag(values: &[Scalar], tag: NormTag) -> Self {
        Self::from_fn(values.len(), tag, |i, j| {
            if i == j {
                values[i]
            } else {
                Scalar::new(0.0, 0.0)
            }
        })
    }

    pub fn scalar(z: Scalar, tag: NormTag) -> Self {
        Self {
            dim: 1,
            entries: vec![z],
            tag,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> NormTag {
        self.tag
    }

    pub fn with_tag(mut self, tag: NormTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn get(&self, i: usize, j: usize) -> Scalar {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: Scalar) {
        self.entries[i * self.dim + j] = z;
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Scalar] {
        &self.entries
    }

    pub(crate) fn from_entries(dim: usize, entries: Vec<Scalar>, tag: NormTag) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self { dim, entries, tag }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, c: Scalar) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * c).collect(),
            tag: self.tag,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, self.tag, |i, j| self.get(j, i).conj())
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(v.len(), self.dim, "vector length must match algebra dimension");
        (0..self.dim)
            .map(|i| {
                let row = &self.entries[i * self.dim..(i + 1) * self.dim];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Norm under the element's own tag.
    pub fn norm(&self) -> f64 {
        self.operator_norm(self.tag)
    }

    /// Operator norm induced by `tag`.
    ///
    /// `L1` is the maximum absolute column sum, `LInf` the maximum absolute
    /// row sum, and `L2` the square root of the largest eigenvalue of `A*A`.
    pub fn operator_norm(&self, tag: NormTag) -> f64 {
        let m = self.dim;
        match tag {
            NormTag::L1 => (0..m)
                .map(|j| (0..m).map(|i| self.get(i, j).norm()).sum::<f64>())
                .fold(0.0, f64::max),
            NormTag::LInf => (0..m)
                .map(|i| (0..m).map(|j| self.get(i, j).norm()).sum::<f64>())
                .fold(0.0, f64::max),
            NormTag::L2 => {
                if m == 1 {
                    return self.entries[0].norm();
                }
                // Prescale so the Gram matrix neither underflows nor overflows.
                let s = self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if s == 0.0 || !s.is_finite() {
                    return s;
                }
                let a = self.scale(Scalar::new(1.0 / s, 0.0));
                let gram = &a.adjoint() * &a;
                s * largest_eigenvalue_psd(&gram).max(0.0).sqrt()
            }
        }
    }

    /// Logarithmic norm `μ(A) = lim_{t→0+} (‖I + tA‖ − 1)/t`, in closed form.
    pub fn log_norm(&self, tag: NormTag) -> f64 {
        let m = self.dim;
        match tag {
            NormTag::L1 => (0..m)
                .map(|j| self.get(j, j).re + (0..m).filter(|&i| i != j).map(|i| self.get(i, j).norm()).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
            NormTag::LInf => (0..m)
                .map(|i| self.get(i, i).re + (0..m).filter(|&j| j != i).map(|j| self.get(i, j).norm()).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
            NormTag::L2 => {
                if m == 1 {
                    return self.entries[0].re;
                }
                let hermitian_part = (self + &self.adjoint()).scale(Scalar::new(0.5, 0.0));
                hermitian_eigenvalues(&hermitian_part)
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// `‖A‖₁ · ‖A⁻¹‖₁`; infinite when a zero pivot is met.
    pub fn condition_estimate(&self) -> f64 {
        match gauss_jordan_inverse(self) {
            Some(inv) => self.operator_norm(NormTag::L1) * inv.operator_norm(NormTag::L1),
            None => f64::INFINITY,
        }
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting, gated by
    /// the condition estimate.
    pub fn inverse(&self, cond_threshold: f64) -> Result<Self> {
        let Some(inv) = gauss_jordan_inverse(self) else {
            return Err(Error::IllConditioned {
                estimate: f64::INFINITY,
                threshold: cond_threshold,
            });
        };
        let estimate = self.operator_norm(NormTag::L1) * inv.operator_norm(NormTag::L1);
        if !(estimate <= cond_threshold) {
            return Err(Error::IllConditioned {
                estimate,
                threshold: cond_threshold,
            });
        }
        Ok(inv)
    }

    /// `e^{tA}` by scaling and squaring with the diagonal Padé(6,6)
    /// approximant; the scaled argument has `‖tA/2^s‖₁ ≤ 1/2`.
    pub fn exp(&self, t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::Overflow("matrix exponential (non-finite time)"));
        }
        let m = self.dim;
        let a = self.scale(Scalar::new(t, 0.0));
        let norm = a.operator_norm(NormTag::L1);
        if !norm.is_finite() {
            return Err(Error::Overflow("matrix exponential"));
        }
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let x = a.scale(Scalar::new(0.5f64.powi(squarings), 0.0));

        let mut numerator = Self::identity(m, self.tag).scale(Scalar::new(PADE6[0], 0.0));
        let mut denominator = numerator.clone();
        let mut power = Self::identity(m, self.tag);
        for (k, &c) in PADE6.iter().enumerate().skip(1) {
            power = &power * &x;
            let term = power.scale(Scalar::new(c, 0.0));
            numerator = &numerator + &term;
            denominator = if k % 2 == 0 {
                &denominator + &term
            } else {
                &denominator - &term
            };
        }
        let mut result = solve(&denominator, &numerator).ok_or(Error::Overflow("Padé denominator"))?;
        for _ in 0..squarings {
            result = &result * &result;
            if !result.is_finite() {
                return Err(Error::Overflow("matrix exponential squaring"));
            }
        }
        if !result.is_finite() {
            return Err(Error::Overflow("matrix exponential"));
        }
        Ok(result)
    }

    /// Lyapunov index `κ(A) = max Re σ(A)`, estimated from `log‖e^{tA}‖` on
    /// the grid `{T, 2T, 4T, 8T}` (`T = opts.slope_t`) as the slope of the
    /// final segment.
    pub fn lyapunov_index(&self, opts: &SolverOptions) -> Result<f64> {
        let base = opts.slope_t;
        let mut logs = [0.0; 4];
        for (k, log) in logs.iter_mut().enumerate() {
            let t = base * f64::from(1u32 << k);
            let n = self.exp(t)?.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Overflow("Lyapunov index (rescale the element)"));
            }
            *log = n.ln();
        }
        Ok((logs[3] - logs[2]) / (4.0 * base))
    }
}

/// Difference quotient `(‖I + tA‖ − 1)/t` defining the logarithmic norm.
pub fn log_norm_limit_oracle(a: &AlgebraElement, tag: NormTag, t: f64) -> f64 {
    let shifted = &AlgebraElement::identity(a.dim(), a.tag()) + &a.scale(Scalar::new(t, 0.0));
    (shifted.operator_norm(tag) - 1.0) / t
}

// c_k = (2q - k)! q! / ((2q)! k! (q - k)!), q = 6
const PADE6: [f64; 7] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

fn gauss_jordan_inverse(a: &AlgebraElement) -> Option<AlgebraElement> {
    solve(a, &AlgebraElement::identity(a.dim, a.tag))
}

/// Solves `A X = B` by Gauss-Jordan elimination with partial pivoting.
fn solve(a: &AlgebraElement, b: &AlgebraElement) -> Option<AlgebraElement> {
    let m = a.dim;
    let mut lhs = a.entries.clone();
    let mut rhs = b.entries.clone();
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&p, &q| lhs[p * m + col].norm().total_cmp(&lhs[q * m + col].norm()))
            .expect("non-empty pivot range");
        let pivot_value = lhs[pivot * m + col];
        if pivot_value.norm() == 0.0 || !pivot_value.norm().is_finite() {
            return None;
        }
        if pivot != col {
            for j in 0..m {
                lhs.swap(pivot * m + j, col * m + j);
                rhs.swap(pivot * m + j, col * m + j);
            }
        }
        let inv_pivot = pivot_value.inv();
        for j in 0..m {
            lhs[col * m + j] *= inv_pivot;
            rhs[col * m + j] *= inv_pivot;
        }
        for row in 0..m {
            if row == col {
                continue;
            }
            let factor = lhs[row * m + col];
            if factor.norm() == 0.0 {
                continue;
            }
            for j in 0..m {
                let l = lhs[col * m + j];
                let r = rhs[col * m + j];
                lhs[row * m + j] -= factor * l;
                rhs[row * m + j] -= factor * r;
            }
        }
    }
    Some(AlgebraElement::from_entries(m, rhs, b.tag))
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration. The iteration runs on `H^(2^k)` (formed by repeated
/// normalized squaring) so nearly degenerate leading eigenvalues still
/// separate, and the Rayleigh quotient is taken with `H` itself; iteration
/// stops at relative change `1e-12`.
fn largest_eigenvalue_psd(h: &AlgebraElement) -> f64 {
    const SQUARINGS: usize = 24;
    const TOL: f64 = 1e-12;
    let m = h.dim;
    let scale = h.entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut power = h.scale(Scalar::new(1.0 / scale, 0.0));
    for _ in 0..SQUARINGS {
        let sq = &power * &power;
        let s = sq.entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if s == 0.0 || !s.is_finite() {
            break;
        }
        power = sq.scale(Scalar::new(1.0 / s, 0.0));
    }
    // Start from the dominant column of the powered matrix.
    let column = |j: usize| -> Vec<Scalar> { (0..m).map(|i| power.get(i, j)).collect() };
    let mut v = (0..m)
        .map(column)
        .max_by(|a, b| NormTag::L2.vector_norm(a).total_cmp(&NormTag::L2.vector_norm(b)))
        .expect("non-empty matrix");
    let rayleigh = |v: &[Scalar]| -> f64 {
        let hv = h.mul_vec(v);
        let num: Scalar = v.iter().zip(&hv).map(|(a, b)| a.conj() * b).sum();
        num.re / v.iter().map(|z| z.norm_sqr()).sum::<f64>()
    };
    let mut lambda = rayleigh(&v);
    for _ in 0..200 {
        let w = power.mul_vec(&v);
        let n = NormTag::L2.vector_norm(&w);
        if n == 0.0 || !n.is_finite() {
            break;
        }
        v = w.into_iter().map(|z| z / n).collect();
        let next = rayleigh(&v);
        let converged = (next - lambda).abs() <= TOL * next.abs();
        lambda = next.max(lambda);
        if converged {
            break;
        }
    }
    lambda
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations on its real
/// symmetric embedding `[[Re H, −Im H], [Im H, Re H]]`, whose spectrum is
/// that of `H` with every eigenvalue doubled.
pub(crate) fn hermitian_eigenvalues(h: &AlgebraElement) -> Vec<f64> {
    let m = h.dim;
    let n = 2 * m;
    let mut a = vec![0.0; n * n];
    for i in 0..m {
        for j in 0..m {
            let z = h.get(i, j);
            a[i * n + j] = z.re;
            a[(i + m) * n + (j + m)] = z.re;
            a[i * n + (j + m)] = -z.im;
            a[(i + m) * n + j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let total: f64 = a.iter().map(|v| v * v).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    // Each eigenvalue appears twice in the embedding.
    eig.into_iter().step_by(2).collect()
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;

    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in addition");
        AlgebraElement {
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect(),
            tag: self.tag,
        }
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;

    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in subtraction");
        AlgebraElement {
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect(),
            tag: self.tag,
        }
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;

    fn mul(self, rhs: &AlgebraElement) -> AlgebraElement {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let m = self.dim;
        let mut out = vec![Scalar::new(0.0, 0.0); m * m];
        for i in 0..m {
            for k in 0..m {
                let a = self.entries[i * m + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out[i * m + j] += a * rhs.entries[k * m + j];
                }
            }
        }
        AlgebraElement {
            dim: m,
            entries: out,
            tag: self.tag,
        }
    }
}
