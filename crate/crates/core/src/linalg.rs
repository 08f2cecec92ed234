//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` dense matrices of `Complex64`. Spectral work goes
//! through [`eig_hermitian`], which returns eigenvalues in descending order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Tolerance for Hermiticity, trace and positivity of density operators.
pub const VALIDITY_TOL: f64 = 1e-10;
/// Tolerance for accepting a matrix as Hermitian before decomposing it.
pub const HERMITIAN_INPUT_TOL: f64 = 1e-8;
/// Eigenvalues in `[-PSD_CLAMP_TOL, 0)` are treated as round-off and clamped to zero.
pub const PSD_CLAMP_TOL: f64 = 1e-8;
/// Unit-norm tolerance for pure states.
pub const NORM_TOL: f64 = 1e-12;

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

/// Largest entrywise deviation `|m_ij - conj(m_ji)|`.
pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `max |(U U^† - I)_ij|`.
pub fn unitarity_residual(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(u * u.adjoint() - identity(u.nrows())))
}

/// Standard Kronecker product `A ⊗ B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Partial trace of an operator on `C^d1 ⊗ C^d2`. With `keep_first` the second
/// factor is traced out.
pub fn partial_trace(
    m: &ComplexMatrix,
    d1: usize,
    d2: usize,
    keep_first: bool,
) -> Result<ComplexMatrix> {
    if m.nrows() != d1 * d2 || m.ncols() != d1 * d2 {
        return Err(Error::Shape(format!(
            "partial trace of {}x{} over {d1}x{d2}",
            m.nrows(),
            m.ncols()
        )));
    }
    let out = if keep_first {
        ComplexMatrix::from_fn(d1, d1, |a, b| {
            (0..d2).map(|k| m[(a * d2 + k, b * d2 + k)]).sum()
        })
    } else {
        ComplexMatrix::from_fn(d2, d2, |a, b| {
            (0..d1).map(|k| m[(k * d2 + a, k * d2 + b)]).sum()
        })
    };
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_values(|x| x)
    }

    /// `V f(diag(values)) V^†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(k).scale_mut(s);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

fn check_hermitian(m: &ComplexMatrix, tol: f64) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Shape(format!(
            "expected a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !all_finite(m) {
        return Err(Error::NonFinite);
    }
    let r = hermiticity_residual(m);
    if r > tol {
        return Err(Error::NotHermitian(r));
    }
    Ok(())
}

fn symmetrized(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianEigen> {
    check_hermitian(m, HERMITIAN_INPUT_TOL)?;
    let eig = symmetrized(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors =
        ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only, descending. Cheaper than [`eig_hermitian`].
pub fn hermitian_spectrum(m: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(m, HERMITIAN_INPUT_TOL)?;
    let mut values: Vec<f64> = symmetrized(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Accepts `p > 1` or `p = +inf`.
pub fn check_exponent(p: f64) -> Result<()> {
    if p == f64::INFINITY || (p.is_finite() && p > 1.0) {
        Ok(())
    } else {
        Err(Error::UnsupportedExponent(p))
    }
}

/// Clamps round-off negatives; rejects anything below `-PSD_CLAMP_TOL`.
pub fn clamp_spectrum(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&x| {
            if x >= 0.0 {
                Ok(x)
            } else if x >= -PSD_CLAMP_TOL {
                Ok(0.0)
            } else {
                Err(Error::NotPsd(x))
            }
        })
        .collect()
}

/// `(sum_k lam_k^p)^(1/p)` of an already clamped nonnegative spectrum.
pub fn lp_norm_nonneg(values: &[f64], p: f64) -> f64 {
    let top = values.iter().fold(0.0f64, |a, &b| a.max(b));
    if p == f64::INFINITY || top == 0.0 {
        return top;
    }
    // factor out the top eigenvalue so large p does not underflow
    let s: f64 = values.iter().map(|&x| (x / top).powf(p)).sum();
    top * s.powf(1.0 / p)
}

/// Schatten p-norm of a spectrum.
pub fn schatten_norm_of_spectrum(values: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_norm_nonneg(&clamp_spectrum(values)?, p))
}

/// Schatten p-norm of a Hermitian positive semidefinite matrix.
pub fn schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    check_exponent(p)?;
    schatten_norm_of_spectrum(&hermitian_spectrum(m)?, p)
}

/// A unit vector in `C^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension("pure state of dimension 0".into()));
        }
        if !amplitudes
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NotNormalized(norm));
        }
        Self::new(amplitudes.unscale(norm))
    }

    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidDimension(format!(
                "basis index {k} in dimension {d}"
            )));
        }
        let mut v = ComplexVector::zeros(d);
        v[k] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    /// Uniformly distributed state (normalized complex Gaussian vector).
    pub fn random(d: usize, rng: &mut SeededRng) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension("pure state of dimension 0".into()));
        }
        loop {
            let v = ComplexVector::from_fn(d, |_, _| rng.complex_normal());
            if v.norm() > 1e-300 {
                return Self::normalized(v);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> ComplexVector {
        self.amplitudes
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            amplitudes: self.amplitudes.map(|z| z.conj()),
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Removes the global phase: the first entry with modulus above 1e-14
    /// becomes real and nonnegative.
    pub fn gauge_fixed(&self) -> Self {
        let Some(pivot) = self.amplitudes.iter().find(|z| z.norm() > 1e-14) else {
            return self.clone();
        };
        let phase = pivot.conj() / pivot.norm();
        let mut amplitudes = self.amplitudes.map(|z| z * phase);
        if let Some(z) = amplitudes.iter_mut().find(|z| z.norm() > 1e-14) {
            *z = Complex64::new(z.norm(), 0.0);
        }
        Self { amplitudes }
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        Self {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        check_hermitian(&matrix, VALIDITY_TOL)?;
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > VALIDITY_TOL || tr.im.abs() > VALIDITY_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let spectrum = hermitian_spectrum(&matrix)?;
        let min = spectrum[spectrum.len() - 1];
        if min < -VALIDITY_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { matrix })
    }

    /// Skips validation. Callers guarantee the invariants by construction.
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self {
            matrix: psi.projector(),
        }
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(
                "density operator of dimension 0".into(),
            ));
        }
        Ok(Self {
            matrix: identity(d).unscale(d as f64),
        })
    }

    /// `diag(p_0, ..., p_{d-1})` for a probability vector.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let m = ComplexMatrix::from_fn(probs.len(), probs.len(), |i, j| {
            if i == j {
                Complex64::new(probs[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(m)
    }

    /// Random full-rank state `G G^† / tr(G G^†)` for a complex Gaussian `G`.
    pub fn random(d: usize, rng: &mut SeededRng) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(
                "density operator of dimension 0".into(),
            ));
        }
        let g = ComplexMatrix::from_fn(d, d, |_, _| rng.complex_normal());
        let m = &g * g.adjoint();
        let tr = trace(&m).re;
        Ok(Self {
            matrix: m.unscale(tr),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Descending spectrum, round-off negatives clamped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let raw = hermitian_spectrum(&self.matrix).expect("density operator is Hermitian");
        raw.into_iter().map(|x| x.max(0.0)).collect()
    }

    pub fn conj(&self) -> Self {
        Self {
            matrix: self.matrix.map(|z| z.conj()),
        }
    }

    pub fn tensor(&self, other: &DensityOperator) -> Self {
        Self {
            matrix: kron(&self.matrix, &other.matrix),
        }
    }
}

/// Haar-distributed `d x d` unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` pushed into `Q`.
pub fn haar_unitary(d: usize, rng: &mut SeededRng) -> Result<ComplexMatrix> {
    if d == 0 {
        return Err(Error::InvalidDimension(
            "Haar unitary of dimension 0".into(),
        ));
    }
    let z = ComplexMatrix::from_fn(d, d, |_, _| rng.complex_normal());
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 {
            rkk / rkk.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, k)] *= phase;
        }
    }
    Ok(q)
}

/// `(1/sqrt(d)) sum_a |a>|a>` on `C^d ⊗ C^d`.
pub fn max_entangled_state(d: usize) -> Result<PureState> {
    if d == 0 {
        return Err(Error::InvalidDimension(
            "maximally entangled state of dimension 0".into(),
        ));
    }
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut v = ComplexVector::zeros(d * d);
    for a in 0..d {
        v[a * d + a] = amp;
    }
    PureState::normalized(v)
}

/// Rényi entropy `log2(tr rho^p) / (1 - p)` in bits.
pub fn renyi_entropy(rho: &DensityOperator, p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Domain(format!(
            "Renyi order must be positive and finite, got {p}"
        )));
    }
    if p == 1.0 {
        return Err(Error::Domain(
            "Renyi order 1 is the von Neumann entropy".into(),
        ));
    }
    let purity: f64 = rho
        .eigenvalues()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x.powf(p))
        .sum();
    Ok(purity.log2() / (1.0 - p))
}

/// `-sum lam log2 lam`, with `0 log 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    -rho.eigenvalues()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(values: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            values.len(),
            values.iter().map(|&x| c(x)),
        ))
    }

    fn random_hermitian(d: usize, rng: &mut SeededRng) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(d, d, |_, _| rng.complex_normal());
        (&g + g.adjoint()).scale(0.5)
    }

    #[test]
    fn haar_d1_is_a_phase() {
        let u = haar_unitary(1, &mut SeededRng::new(3, 0)).unwrap();
        assert_abs_diff_eq!(u[(0, 0)].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn haar_is_unitary() {
        for d in [2, 4, 7, 16] {
            let u = haar_unitary(d, &mut SeededRng::new(11, d as u64)).unwrap();
            assert!(unitarity_residual(&u) <= 1e-10);
            assert!(max_abs(&(u.adjoint() * &u - identity(d))) <= 1e-10);
        }
    }

    #[test]
    fn haar_rejects_zero_dim() {
        assert!(matches!(
            haar_unitary(0, &mut SeededRng::new(0, 0)),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn haar_first_moment() {
        // E|U_11|^2 = 1/d under Haar measure.
        let mut rng = SeededRng::new(2024, 0);
        let samples = 10_000;
        let mean = (0..samples)
            .map(|_| haar_unitary(2, &mut rng).unwrap()[(0, 0)].norm_sqr())
            .sum::<f64>()
            / samples as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn haar_phase_distribution_is_uniform() {
        // Without the R-diagonal correction arg(U_11) concentrates near 0;
        // under Haar it is uniform, so E[cos arg U_11] = 0.
        let mut rng = SeededRng::new(5, 1);
        let m = (0..5000)
            .map(|_| {
                let z = haar_unitary(3, &mut rng).unwrap()[(0, 0)];
                z.re / z.norm()
            })
            .sum::<f64>()
            / 5000.0;
        assert!(m.abs() < 0.05, "E cos = {m}");
    }

    #[test]
    fn haar_reproducible() {
        let a = haar_unitary(5, &mut SeededRng::new(77, 3)).unwrap();
        let b = haar_unitary(5, &mut SeededRng::new(77, 3)).unwrap();
        assert_eq!(a, b);
        let c = haar_unitary(5, &mut SeededRng::new(77, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn eig_diagonal() {
        let e = eig_hermitian(&diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn eig_identity() {
        let e = eig_hermitian(&identity(5)).unwrap();
        for v in e.values {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = SeededRng::new(1, 0);
        for d in [1, 2, 5, 12, 40] {
            let h = random_hermitian(d, &mut rng);
            let e = eig_hermitian(&h).unwrap();
            assert!(max_abs(&(e.reconstruct() - &h)) <= 1e-8);
            assert!(unitarity_residual(&e.vectors) <= 1e-8);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = identity(2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian(_))));
        assert!(matches!(
            eig_hermitian(&ComplexMatrix::zeros(2, 3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn schatten_identity() {
        assert_abs_diff_eq!(
            schatten_norm(&identity(3), 4.0).unwrap(),
            1.316074,
            epsilon = 1e-6
        );
    }

    #[test]
    fn schatten_maximally_mixed() {
        for d in [1usize, 2, 5, 9] {
            let rho = DensityOperator::maximally_mixed(d).unwrap();
            for p in [1.5, 2.0, 5.0, f64::INFINITY] {
                let expected = (d as f64).powf(1.0 / p - 1.0);
                assert_abs_diff_eq!(
                    schatten_norm(rho.matrix(), p).unwrap(),
                    expected,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn schatten_half_half() {
        let v = schatten_norm(&diag(&[0.5, 0.5, 0.0]), 5.0).unwrap();
        assert_abs_diff_eq!(v, (2.0f64 * 0.5f64.powi(5)).powf(0.2), epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.574349, epsilon = 1e-6);
    }

    #[test]
    fn schatten_exponent_and_psd_errors() {
        assert!(matches!(
            schatten_norm(&identity(2), 1.0),
            Err(Error::UnsupportedExponent(_))
        ));
        assert!(matches!(
            schatten_norm(&identity(2), 0.5),
            Err(Error::UnsupportedExponent(_))
        ));
        assert!(matches!(
            schatten_norm(&identity(2), f64::NAN),
            Err(Error::UnsupportedExponent(_))
        ));
        assert!(matches!(
            schatten_norm(&diag(&[1.0, -1e-3]), 2.0),
            Err(Error::NotPsd(_))
        ));
        // tiny negative round-off is clamped
        assert_abs_diff_eq!(
            schatten_norm(&diag(&[1.0, -1e-9]), 2.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn kron_identities() {
        assert_eq!(kron(&identity(2), &identity(3)), identity(6));
        let mut rng = SeededRng::new(8, 0);
        let r = |rng: &mut SeededRng| ComplexMatrix::from_fn(2, 2, |_, _| rng.complex_normal());
        let (a, b, cc, d) = (r(&mut rng), r(&mut rng), r(&mut rng), r(&mut rng));
        let lhs = kron(&a, &b) * kron(&cc, &d);
        let rhs = kron(&(&a * &cc), &(&b * &d));
        assert!(max_abs(&(lhs - rhs)) <= 1e-12);
        assert!((trace(&kron(&a, &b)) - trace(&a) * trace(&b)).norm() <= 1e-12);
    }

    #[test]
    fn max_entangled_small_cases() {
        assert_eq!(max_entangled_state(1).unwrap().amplitudes()[0], c(1.0));
        let v = max_entangled_state(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (k, expected) in [s, 0.0, 0.0, s].into_iter().enumerate() {
            assert_abs_diff_eq!(v.amplitudes()[k].re, expected, epsilon = 1e-15);
        }
        assert!(max_entangled_state(0).is_err());
    }

    #[test]
    fn max_entangled_is_u_ubar_invariant() {
        let phi = max_entangled_state(3).unwrap();
        let mut rng = SeededRng::new(31, 0);
        for _ in 0..100 {
            let u = haar_unitary(3, &mut rng).unwrap();
            let uu = kron(&u, &u.map(|z| z.conj()));
            let overlap = phi.amplitudes().dotc(&(uu * phi.amplitudes()));
            assert!((overlap - c(1.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn max_entangled_marginals_are_flat() {
        for d in [2, 3, 6] {
            let proj = max_entangled_state(d).unwrap().projector();
            let flat = identity(d).unscale(d as f64);
            for keep_first in [true, false] {
                let red = partial_trace(&proj, d, d, keep_first).unwrap();
                assert!(max_abs(&(red - &flat)) <= 1e-12);
            }
        }
    }

    #[test]
    fn renyi_examples() {
        let mixed = DensityOperator::maximally_mixed(4).unwrap();
        for p in [0.5, 2.0, 3.0] {
            assert_abs_diff_eq!(renyi_entropy(&mixed, p).unwrap(), 2.0, epsilon = 1e-12);
        }
        let pure = DensityOperator::from_pure(&PureState::basis(3, 1).unwrap());
        assert_abs_diff_eq!(renyi_entropy(&pure, 2.0).unwrap(), 0.0, epsilon = 1e-12);
        let rho = DensityOperator::diagonal(&[0.75, 0.25]).unwrap();
        assert_abs_diff_eq!(
            renyi_entropy(&rho, 2.0).unwrap(),
            -(10.0f64 / 16.0).log2(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(renyi_entropy(&rho, 2.0).unwrap(), 0.678072, epsilon = 1e-6);
        assert!(renyi_entropy(&rho, 1.0).is_err());
    }

    #[test]
    fn von_neumann_examples() {
        let pure = DensityOperator::from_pure(&PureState::basis(2, 0).unwrap());
        assert_abs_diff_eq!(von_neumann_entropy(&pure), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            von_neumann_entropy(&DensityOperator::maximally_mixed(8).unwrap()),
            3.0,
            epsilon = 1e-12
        );
        let rho = DensityOperator::diagonal(&[0.75, 0.25]).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&rho), 0.811278, epsilon = 1e-6);
    }

    #[test]
    fn density_operator_validation() {
        assert!(matches!(
            DensityOperator::new(identity(2)),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            DensityOperator::diagonal(&[1.5, -0.5]),
            Err(Error::NotPsd(_))
        ));
        let mut m = identity(2).unscale(2.0);
        m[(0, 1)] = Complex64::new(0.0, 0.1);
        assert!(matches!(
            DensityOperator::new(m),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn pure_state_gauge() {
        let v = ComplexVector::from_vec(vec![Complex64::new(0.0, 0.6), Complex64::new(0.8, 0.0)]);
        let psi = PureState::new(v).unwrap().gauge_fixed();
        assert_abs_diff_eq!(psi.amplitudes()[0].re, 0.6, epsilon = 1e-15);
        assert_eq!(psi.amplitudes()[0].im, 0.0);
        assert_abs_diff_eq!(psi.amplitudes()[1].im, -0.8, epsilon = 1e-15);
        assert!(PureState::new(ComplexVector::from_element(2, c(1.0))).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn schatten_unitary_invariance(seed in any::<u64>(), d in 1usize..8, p in prop::sample::select(vec![1.5, 2.0, 3.0, 7.5, f64::INFINITY])) {
                let mut rng = SeededRng::new(seed, 0);
                let rho = DensityOperator::random(d, &mut rng).unwrap();
                let u = haar_unitary(d, &mut rng).unwrap();
                let rotated = &u * rho.matrix() * u.adjoint();
                let a = schatten_norm(rho.matrix(), p).unwrap();
                let b = schatten_norm(&rotated, p).unwrap();
                prop_assert!((a - b).abs() <= 1e-9);
            }

            #[test]
            fn schatten_monotone_in_p(seed in any::<u64>(), d in 1usize..8) {
                let rho = DensityOperator::random(d, &mut SeededRng::new(seed, 1)).unwrap();
                let grid = [1.1, 1.5, 2.0, 3.0, 5.0, 10.0, f64::INFINITY];
                let norms: Vec<f64> = grid.iter().map(|&p| schatten_norm(rho.matrix(), p).unwrap()).collect();
                for w in norms.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", norms);
                }
            }

            #[test]
            fn renyi_tends_to_von_neumann(seed in any::<u64>(), d in 2usize..=8) {
                let rho = DensityOperator::random(d, &mut SeededRng::new(seed, 2)).unwrap();
                let s = von_neumann_entropy(&rho);
                let sp = renyi_entropy(&rho, 1.0 + 1e-3).unwrap();
                prop_assert!((s - sp).abs() <= 0.01);
            }
        }
    }
}
