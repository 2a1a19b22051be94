//! Finite-dimensional Monte Carlo for the CW and SPN ensembles.
//!
//! Every trial draws from its own ChaCha stream, keyed by the master seed
//! and the trial index, so results do not depend on scheduling.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{CwModel, SpnModel};

/// Maximal relative deviation from self-adjointness accepted by
/// [`eigenvalues_selfadjoint`].
pub const SELFADJOINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GinibreSpec {
    pub p: usize,
    pub d: usize,
    pub field: Field,
    /// `E|Z_ij|^2`.
    pub variance: f64,
    pub seed: u64,
}

impl GinibreSpec {
    /// Variance `1/d`.
    pub fn new(p: usize, d: usize, field: Field, seed: u64) -> Self {
        GinibreSpec { p, d, field, variance: 1.0 / d as f64, seed }
    }

    pub fn with_variance(self, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::Domain(format!("variance must be positive, got {variance}")));
        }
        Ok(GinibreSpec { variance, ..self })
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// A dense matrix over either field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl FieldMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            FieldMatrix::Real(m) => m.nrows(),
            FieldMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            FieldMatrix::Real(m) => m.ncols(),
            FieldMatrix::Complex(m) => m.ncols(),
        }
    }

    /// Entry as a complex number.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self {
            FieldMatrix::Real(m) => Complex64::new(m[(i, j)], 0.0),
            FieldMatrix::Complex(m) => m[(i, j)],
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.nrows().min(self.ncols())).map(|i| self.get(i, i).re).sum()
    }
}

fn real_ginibre(rng: &mut ChaCha8Rng, rows: usize, cols: usize, variance: f64) -> DMatrix<f64> {
    let s = variance.sqrt();
    DMatrix::from_fn(rows, cols, |_, _| s * rng.sample::<f64, _>(StandardNormal))
}

fn complex_ginibre(rng: &mut ChaCha8Rng, rows: usize, cols: usize, variance: f64) -> DMatrix<Complex64> {
    let s = (variance / 2.0).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    })
}

fn ginibre(spec: &GinibreSpec, rng: &mut ChaCha8Rng, rows: usize, cols: usize, variance: f64) -> FieldMatrix {
    match spec.field {
        Field::Real => FieldMatrix::Real(real_ginibre(rng, rows, cols, variance)),
        Field::Complex => FieldMatrix::Complex(complex_ginibre(rng, rows, cols, variance)),
    }
}

/// A `p x d` Ginibre matrix drawn from stream 0 of the seed.
pub fn sample_ginibre(spec: &GinibreSpec) -> FieldMatrix {
    ginibre(spec, &mut spec.rng(0), spec.p, spec.d, spec.variance)
}

/// `X* diag(w) X` for `X` with `w.len()` rows.
fn weighted_gram(x: &FieldMatrix, w: &[f64]) -> FieldMatrix {
    match x {
        FieldMatrix::Real(x) => {
            let mut wx = x.clone();
            for (i, mut row) in wx.row_iter_mut().enumerate() {
                row *= w[i];
            }
            FieldMatrix::Real(x.transpose() * wx)
        }
        FieldMatrix::Complex(x) => {
            let mut wx = x.clone();
            for (i, mut row) in wx.row_iter_mut().enumerate() {
                row *= Complex64::new(w[i], 0.0);
            }
            FieldMatrix::Complex(x.adjoint() * wx)
        }
    }
}

fn gram(x: &FieldMatrix) -> FieldMatrix {
    weighted_gram(x, &vec![1.0; x.nrows()])
}

/// `A + s Z` with `A` the rectangular diagonal matrix of `a`.
fn shifted(a: &[f64], s: f64, z: FieldMatrix) -> FieldMatrix {
    match z {
        FieldMatrix::Real(mut z) => {
            z *= s;
            for (k, &ak) in a.iter().enumerate() {
                z[(k, k)] += ak;
            }
            FieldMatrix::Real(z)
        }
        FieldMatrix::Complex(mut z) => {
            z *= Complex64::new(s, 0.0);
            for (k, &ak) in a.iter().enumerate() {
                z[(k, k)] += ak;
            }
            FieldMatrix::Complex(z)
        }
    }
}

fn check_dims(p: usize, d: usize, spec: &GinibreSpec) -> Result<()> {
    if spec.p != p || spec.d != d {
        return Err(Error::DimensionMismatch(format!(
            "model is {p} x {d} but sampler is {} x {}",
            spec.p, spec.d
        )));
    }
    Ok(())
}

fn cw_with(model: &CwModel, spec: &GinibreSpec, rng: &mut ChaCha8Rng) -> Result<FieldMatrix> {
    check_dims(model.p, model.d, spec)?;
    let z = ginibre(spec, rng, spec.p, spec.d, spec.variance);
    Ok(weighted_gram(&z, &model.eigenvalues))
}

fn spn_with(model: &SpnModel, spec: &GinibreSpec, rng: &mut ChaCha8Rng) -> Result<FieldMatrix> {
    check_dims(model.p, model.d, spec)?;
    let z = ginibre(spec, rng, spec.p, spec.d, spec.variance);
    Ok(gram(&shifted(&model.singular_values, model.sigma, z)))
}

/// The `d x d` corner of `(A~ + (sigma/sqrt(lambda)) Z)*(A~ + ...)` with `A~`
/// the `p x p` zero-padded signal and `Z` a `p x p` Ginibre matrix of
/// variance `variance * d / p`.
fn spn_corner_with(model: &SpnModel, spec: &GinibreSpec, rng: &mut ChaCha8Rng) -> Result<FieldMatrix> {
    check_dims(model.p, model.d, spec)?;
    let (p, d) = (spec.p, spec.d);
    let lambda = d as f64 / p as f64;
    let z = ginibre(spec, rng, p, p, spec.variance * lambda);
    let full = gram(&shifted(&model.singular_values, model.sigma / lambda.sqrt(), z));
    Ok(match full {
        FieldMatrix::Real(m) => FieldMatrix::Real(m.view((0, 0), (d, d)).into_owned()),
        FieldMatrix::Complex(m) => FieldMatrix::Complex(m.view((0, 0), (d, d)).into_owned()),
    })
}

/// `Z* D Z` with `D = diag(eigenvalues)`.
pub fn realize_cw(model: &CwModel, spec: &GinibreSpec) -> Result<FieldMatrix> {
    cw_with(model, spec, &mut spec.rng(0))
}

/// `(A + sigma Z)*(A + sigma Z)`.
pub fn realize_spn(model: &SpnModel, spec: &GinibreSpec) -> Result<FieldMatrix> {
    spn_with(model, spec, &mut spec.rng(0))
}

/// The corner of the square `p x p` construction of the SPN matrix.
pub fn realize_spn_corner(model: &SpnModel, spec: &GinibreSpec) -> Result<FieldMatrix> {
    spn_corner_with(model, spec, &mut spec.rng(0))
}

fn max_abs<T>(m: &DMatrix<T>, f: impl Fn(&T) -> f64) -> f64 {
    m.iter().map(f).fold(0.0, f64::max)
}

/// Ascending eigenvalues of a self-adjoint matrix, after symmetrization.
pub fn eigenvalues_selfadjoint(m: &FieldMatrix) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("{} x {} matrix is not square", m.nrows(), m.ncols())));
    }
    let mut eig: Vec<f64> = match m {
        FieldMatrix::Real(m) => {
            let dev = max_abs(&(m - m.transpose()), |x| x.abs());
            check_selfadjoint(dev, max_abs(m, |x| x.abs()))?;
            SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues.iter().copied().collect()
        }
        FieldMatrix::Complex(m) => {
            let dev = max_abs(&(m - m.adjoint()), |x| x.norm());
            check_selfadjoint(dev, max_abs(m, |x| x.norm()))?;
            let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
            SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
        }
    };
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

fn check_selfadjoint(deviation: f64, scale: f64) -> Result<()> {
    if deviation > SELFADJOINT_TOL * scale.max(1.0) {
        Err(Error::NonSelfAdjoint { deviation })
    } else {
        Ok(())
    }
}

/// Which ensemble to draw.
#[derive(Debug, Clone, PartialEq)]
pub enum Ensemble {
    Cw(CwModel),
    Spn(SpnModel),
    /// SPN realized through the square corner construction.
    SpnCorner(SpnModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    pub ensemble: Ensemble,
    pub spec: GinibreSpec,
}

impl Sampler {
    /// Sampler with unit-normalized noise, `variance = 1/d`.
    pub fn new(ensemble: Ensemble, field: Field, seed: u64) -> Self {
        let (p, d) = match &ensemble {
            Ensemble::Cw(m) => (m.p, m.d),
            Ensemble::Spn(m) | Ensemble::SpnCorner(m) => (m.p, m.d),
        };
        Sampler { ensemble, spec: GinibreSpec::new(p, d, field, seed) }
    }

    /// The matrix of trial `trial`.
    pub fn realize(&self, trial: usize) -> Result<FieldMatrix> {
        let mut rng = self.spec.rng(trial as u64);
        match &self.ensemble {
            Ensemble::Cw(m) => cw_with(m, &self.spec, &mut rng),
            Ensemble::Spn(m) => spn_with(m, &self.spec, &mut rng),
            Ensemble::SpnCorner(m) => spn_corner_with(m, &self.spec, &mut rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSpectrum {
    /// Pooled over trials, ascending.
    pub eigenvalues: Vec<f64>,
    pub d: usize,
    pub trials: usize,
    /// `(1/(d trials)) sum lambda^n` for `n = 1..`.
    pub moments: Vec<f64>,
}

impl EmpiricalSpectrum {
    /// Fraction of pooled eigenvalues `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.eigenvalues.partition_point(|&e| e <= x) as f64 / self.eigenvalues.len() as f64
    }

    /// Counts in `bins` equal bins over `[lo, hi)`; values outside are dropped.
    pub fn histogram(&self, lo: f64, hi: f64, bins: usize) -> Vec<usize> {
        let mut h = vec![0; bins];
        let w = (hi - lo) / bins as f64;
        for &e in &self.eigenvalues {
            if e >= lo && e < hi {
                h[(((e - lo) / w) as usize).min(bins - 1)] += 1;
            }
        }
        h
    }

    /// One eigenvalue per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eigenvalue\n");
        for e in &self.eigenvalues {
            s.push_str(&format!("{e}\n"));
        }
        s
    }
}

/// Pools eigenvalues of `trials` independent realizations and their first
/// `order` moments.
pub fn empirical_spectrum(sampler: &Sampler, trials: usize, order: usize) -> Result<EmpiricalSpectrum> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let m = sampler.realize(t)?;
            let eig = eigenvalues_selfadjoint(&m)?;
            if eig.iter().any(|e| !e.is_finite()) {
                return Err(Error::Eigensolver { trial: t });
            }
            Ok(eig)
        })
        .collect::<Result<_>>()?;
    let mut eigenvalues: Vec<f64> = per_trial.into_iter().flatten().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let count = eigenvalues.len() as f64;
    let moments = (1..=order as i32)
        .map(|n| eigenvalues.iter().map(|e| e.powi(n)).sum::<f64>() / count)
        .collect();
    Ok(EmpiricalSpectrum { eigenvalues, d: sampler.spec.d, trials, moments })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ginibre_moments_and_determinism() {
        for field in [Field::Real, Field::Complex] {
            let spec = GinibreSpec::new(400, 250, field, 7).with_variance(2.0).unwrap();
            let z = sample_ginibre(&spec);
            assert_eq!(z, sample_ginibre(&spec));
            let n = (z.nrows() * z.ncols()) as f64;
            let entries: Vec<Complex64> =
                (0..z.nrows()).flat_map(|i| (0..z.ncols()).map(move |j| (i, j))).map(|(i, j)| z.get(i, j)).collect();
            let mean = entries.iter().sum::<Complex64>() / n;
            // standard error of the mean is sqrt(v / n)
            assert!(mean.norm() < 4.0 * (2.0 / n).sqrt(), "{mean}");
            let second = entries.iter().map(|e| e.norm_sqr()).sum::<f64>() / n;
            let fourth = entries.iter().map(|e| e.norm_sqr().powi(2)).sum::<f64>() / n;
            let se = ((fourth - second * second) / n).sqrt();
            assert!((second - 2.0).abs() < 4.0 * se, "{second}");
        }
        let a = sample_ginibre(&GinibreSpec::new(3, 2, Field::Real, 1));
        assert_ne!(a, sample_ginibre(&GinibreSpec::new(3, 2, Field::Real, 2)));
    }

    #[test]
    fn eigen_examples() {
        let diag = FieldMatrix::Real(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0])));
        assert_eq!(eigenvalues_selfadjoint(&diag).unwrap(), vec![-1.0, 2.0, 3.0]);
        let swap = FieldMatrix::Real(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let e = eigenvalues_selfadjoint(&swap).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
        let skew = FieldMatrix::Real(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert!(matches!(eigenvalues_selfadjoint(&skew), Err(Error::NonSelfAdjoint { .. })));

        let spec = GinibreSpec::new(30, 20, Field::Complex, 3);
        let w = realize_spn(&SpnModel::new(30, 20, vec![1.0; 20], 0.7).unwrap(), &spec).unwrap();
        let e = eigenvalues_selfadjoint(&w).unwrap();
        let norm = (0..20).flat_map(|i| (0..20).map(move |j| (i, j))).map(|(i, j)| w.get(i, j).norm()).fold(0.0, f64::max);
        assert!((e.iter().sum::<f64>() - w.trace()).abs() < 1e-9 * norm);
        assert!(e[0] > -1e-12);
    }

    #[test]
    fn realization_examples() {
        let spec = GinibreSpec::new(6, 4, Field::Real, 5);
        let zero = realize_cw(&CwModel::new(6, 4, vec![0.0; 6]).unwrap(), &spec).unwrap();
        assert_eq!(zero, FieldMatrix::Real(DMatrix::zeros(4, 4)));

        for field in [Field::Real, Field::Complex] {
            let spec = GinibreSpec::new(6, 4, field, 5);
            let w = realize_cw(&CwModel::new(6, 4, vec![-1.0, 0.5, 1.0, 2.0, 2.0, 3.0]).unwrap(), &spec).unwrap();
            let dev = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| (w.get(i, j) - w.get(j, i).conj()).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-14);
        }

        let spn = SpnModel::new(6, 4, vec![0.5, 1.0, 1.5, 2.0], 0.0).unwrap();
        let e = eigenvalues_selfadjoint(&realize_spn(&spn, &spec).unwrap()).unwrap();
        assert_eq!(e, vec![0.25, 1.0, 2.25, 4.0]);

        let noise = SpnModel::new(6, 4, vec![0.0; 4], 1.5).unwrap();
        let z = sample_ginibre(&spec);
        let FieldMatrix::Real(z) = z else { unreachable!() };
        let FieldMatrix::Real(w) = realize_spn(&noise, &spec).unwrap() else { unreachable!() };
        assert!((w - z.transpose() * &z * 2.25).abs().max() < 1e-12);

        let bad = GinibreSpec::new(5, 4, Field::Real, 5);
        assert!(matches!(realize_spn(&spn, &bad), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn spectrum_examples() {
        let spn = SpnModel::new(5, 3, vec![1.0, 2.0, 0.5], 0.0).unwrap();
        let s = empirical_spectrum(&Sampler::new(Ensemble::Spn(spn), Field::Real, 1), 1, 2).unwrap();
        assert_eq!(s.eigenvalues, vec![0.25, 1.0, 4.0]);
        assert_eq!(s.cdf(1.0), 2.0 / 3.0);
        assert_eq!(s.histogram(0.0, 5.0, 5), vec![1, 1, 0, 0, 1]);

        let wishart = CwModel::new(200, 200, vec![1.0; 200]).unwrap();
        let s = empirical_spectrum(&Sampler::new(Ensemble::Cw(wishart), Field::Real, 42), 20, 2).unwrap();
        assert_eq!(s.eigenvalues.len(), 200 * 20);
        assert!((s.moments[0] - 1.0).abs() < 0.02);

        // trials are reproducible and independent of scheduling
        let m = SpnModel::new(8, 4, vec![1.0; 4], 1.0).unwrap();
        let sampler = Sampler::new(Ensemble::Spn(m), Field::Complex, 9);
        assert_eq!(empirical_spectrum(&sampler, 6, 3).unwrap(), empirical_spectrum(&sampler, 6, 3).unwrap());
        assert!(empirical_spectrum(&sampler, 0, 3).is_err());
    }
}
