//! Moment models of the free deterministic equivalents of the compound
//! Wishart (CW) and signal-plus-noise (SPN) ensembles, and parameter
//! recovery from their moment series.
//!
//! Both models depend on their matrix parameters only through spectra: the
//! eigenvalues of `D` for CW, the squared singular values of `A` together
//! with `sigma^2` for SPN.
//!
//! R-transform convention: coefficient `n` of a series R-transform is the
//! `n`-th free cumulant. The CW generating function
//! `(1/d) sum_k v_k / (1 - v_k b)` carries the same numbers shifted by one
//! power of `b`.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;
use crate::series::{
    boxed_conv, free_add_conv, free_mult_deconv, moment_from_r, r_transform, AnySeries,
    FloatSeries, Scalar, Series,
};

/// Number of σ² grid points in [`spn_recover`].
pub const RECOVERY_GRID_POINTS: usize = 200;
/// Width at which golden-section refinement of σ² stops.
pub const RECOVERY_REFINE_TOL: f64 = 1e-10;
/// Recovery fails when the best residual exceeds this times `1 + |m|^2`.
pub const RECOVERY_FAIL_FACTOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CwModel {
    pub p: usize,
    pub d: usize,
    /// Spectrum of `D`, ascending.
    pub eigenvalues: Vec<f64>,
}

impl CwModel {
    pub fn new(p: usize, d: usize, mut eigenvalues: Vec<f64>) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(Error::Domain("p and d must be positive".into()));
        }
        if eigenvalues.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues for p = {p}",
                eigenvalues.len()
            )));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("eigenvalues must be finite".into()));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(CwModel { p, d, eigenvalues })
    }

    /// The same spectral law at `k` times the dimensions: every eigenvalue
    /// is repeated `k` times.
    pub fn scaled(&self, k: usize) -> Result<Self> {
        let eig = self.eigenvalues.iter().flat_map(|&v| std::iter::repeat_n(v, k)).collect();
        CwModel::new(self.p * k, self.d * k, eig)
    }
}

#[derive(Deserialize)]
struct CwModelRaw {
    p: usize,
    d: usize,
    eigenvalues: Vec<f64>,
}

impl<'de> Deserialize<'de> for CwModel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = CwModelRaw::deserialize(de)?;
        CwModel::new(raw.p, raw.d, raw.eigenvalues).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpnModel {
    pub p: usize,
    pub d: usize,
    /// Singular values of `A`, ascending.
    pub singular_values: Vec<f64>,
    pub sigma: f64,
}

impl SpnModel {
    pub fn new(p: usize, d: usize, mut singular_values: Vec<f64>, sigma: f64) -> Result<Self> {
        if d == 0 || p < d {
            return Err(Error::Domain(format!("need p >= d >= 1, got p = {p}, d = {d}")));
        }
        if singular_values.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} singular values for d = {d}",
                singular_values.len()
            )));
        }
        if singular_values.iter().any(|a| !a.is_finite() || *a < 0.0) || !sigma.is_finite() {
            return Err(Error::Domain("singular values must be finite and nonnegative".into()));
        }
        singular_values.sort_by(f64::total_cmp);
        Ok(SpnModel { p, d, singular_values, sigma })
    }

    /// `d / p`.
    pub fn lambda(&self) -> f64 {
        self.d as f64 / self.p as f64
    }

    pub fn scaled(&self, k: usize) -> Result<Self> {
        let a = self.singular_values.iter().flat_map(|&v| std::iter::repeat_n(v, k)).collect();
        SpnModel::new(self.p * k, self.d * k, a, self.sigma)
    }

    /// Spectral parameters in the requested backend; exact for rationals.
    pub fn params<S: Scalar>(&self) -> SpnParams<S> {
        let sq = |x: f64| {
            let s = S::from_f64(x).expect("model values are finite");
            s.clone() * s
        };
        SpnParams {
            a_sq: self.singular_values.iter().map(|&a| sq(a)).collect(),
            sigma_sq: sq(self.sigma),
            lambda: S::from_ratio(self.d as i64, self.p as i64),
        }
    }
}

#[derive(Deserialize)]
struct SpnModelRaw {
    p: usize,
    d: usize,
    singular_values: Vec<f64>,
    sigma: f64,
}

impl<'de> Deserialize<'de> for SpnModel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = SpnModelRaw::deserialize(de)?;
        SpnModel::new(raw.p, raw.d, raw.singular_values, raw.sigma).map_err(serde::de::Error::custom)
    }
}

/// The quantities an SPN law depends on: the spectrum of `A*A`, `sigma^2`
/// and the aspect ratio `lambda = d / p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpnParams<S> {
    pub a_sq: Vec<S>,
    pub sigma_sq: S,
    pub lambda: S,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub sigma_sq_hat: f64,
    /// Recovered moment series of `A*A`.
    #[serde(serialize_with = "serialize_float_series")]
    pub atom_moments: FloatSeries,
    /// Recovered spectrum of `A*A`, ascending.
    pub atoms: Vec<f64>,
    pub residual: f64,
    /// Every evaluated `(sigma^2, residual)` pair, in evaluation order.
    pub search_trace: Vec<(f64, f64)>,
}

fn serialize_float_series<Ser: serde::Serializer>(
    s: &FloatSeries,
    ser: Ser,
) -> std::result::Result<Ser::Ok, Ser::Error> {
    AnySeries::Float(s.clone()).to_json().serialize(ser)
}

/// `M[delta_beta]`: coefficients `beta^n`.
pub fn delta_moments<S: Scalar>(beta: &S, order: usize) -> Result<Series<S>> {
    Series::from_fn(order, |n| beta.powi(n))
}

/// R-transform of the free Poisson law with rate `rate` and jump `jump`:
/// coefficients `rate * jump^n`.
pub fn free_poisson_r<S: Scalar>(rate: &S, jump: &S, order: usize) -> Result<Series<S>> {
    if *rate <= S::zero() {
        return Err(Error::Domain(format!("free Poisson rate must be positive, got {rate:?}")));
    }
    Series::from_fn(order, |n| rate.clone() * jump.powi(n))
}

pub fn free_poisson_moments<S: Scalar>(rate: &S, jump: &S, order: usize) -> Result<Series<S>> {
    moment_from_r(&free_poisson_r(rate, jump, order)?)
}

/// `f_lambda(z) = sum lambda^{n-1} z^n`, the R-transform of the free Poisson
/// law with rate `1/lambda` and jump `lambda`.
pub fn f_lambda<S: Scalar>(lambda: &S, order: usize) -> Result<Series<S>> {
    check_lambda(lambda)?;
    Series::from_fn(order, |n| lambda.powi(n - 1))
}

fn check_lambda<S: Scalar>(lambda: &S) -> Result<()> {
    if *lambda <= S::zero() || *lambda > S::one() {
        return Err(Error::Domain(format!("lambda must lie in (0, 1], got {lambda:?}")));
    }
    Ok(())
}

/// Moments of the uniform distribution on `atoms`.
pub fn atomic_moments<S: Scalar>(atoms: &[S], order: usize) -> Result<Series<S>> {
    if atoms.is_empty() {
        return Err(Error::Domain("atomic measure needs at least one atom".into()));
    }
    let count = S::from_u64(atoms.len() as u64);
    Series::from_fn(order, |n| {
        atoms.iter().fold(S::zero(), |acc, a| acc + a.powi(n)) / count.clone()
    })
}

/// Free cumulants of the CW law: `(1/d) sum_k v_k^n`.
pub fn cw_r_transform_from<S: Scalar>(eigenvalues: &[S], d: usize, order: usize) -> Result<Series<S>> {
    let d = S::from_u64(d as u64);
    Series::from_fn(order, |n| {
        eigenvalues.iter().fold(S::zero(), |acc, v| acc + v.powi(n)) / d.clone()
    })
}

pub fn cw_r_transform<S: Scalar>(model: &CwModel, order: usize) -> Result<Series<S>> {
    let eig: Vec<S> = model.eigenvalues.iter().map(|&v| S::from_f64(v).expect("finite")).collect();
    cw_r_transform_from(&eig, model.d, order)
}

pub fn cw_moments<S: Scalar>(model: &CwModel, order: usize) -> Result<Series<S>> {
    moment_from_r(&cw_r_transform(model, order)?)
}

/// Recovers the spectrum of `D` from a CW R-transform: power sums
/// `d * r_n` for `n <= p`, Newton's identities, then the roots of the
/// resulting monic polynomial, ascending.
pub fn cw_recover_eigenvalues<S: Scalar>(r: &Series<S>, p: usize, d: usize) -> Result<Vec<f64>> {
    if r.order() < p {
        return Err(Error::OrderTooSmall { needed: p, got: r.order() });
    }
    let scale = S::from_u64(d as u64);
    let power_sums: Vec<S> = r.coeffs()[..p].iter().map(|c| c.clone() * scale.clone()).collect();
    let e = poly::elementary_from_power_sums(&power_sums);
    poly::real_roots(&poly::monic_from_elementary(&e))
}

/// `m ▯\ M[nu_{1/lambda, lambda}]`: deconvolution by the free Poisson law
/// whose R-transform is `f_lambda`.
pub fn spn_decompose<S: Scalar>(m: &Series<S>, lambda: &S) -> Result<Series<S>> {
    check_lambda(lambda)?;
    let rate = S::one() / lambda.clone();
    let kernel = free_poisson_moments(&rate, lambda, m.order())?;
    free_mult_deconv(m, &kernel)
}

/// Moment series of the SPN law, assembled forward from
/// `spn_decompose(M) = spn_decompose(M[A*A]) ⊞ M[delta_{sigma^2/lambda}]`.
pub fn spn_moments_from<S: Scalar>(params: &SpnParams<S>, order: usize) -> Result<Series<S>> {
    let lambda = &params.lambda;
    let signal = spn_decompose(&atomic_moments(&params.a_sq, order)?, lambda)?;
    let shift = delta_moments(&(params.sigma_sq.clone() / lambda.clone()), order)?;
    let rhs = free_add_conv(&signal, &shift)?;
    moment_from_r(&boxed_conv(&f_lambda(lambda, order)?, &r_transform(&rhs)?)?)
}

pub fn spn_moments<S: Scalar>(model: &SpnModel, order: usize) -> Result<Series<S>> {
    spn_moments_from(&model.params::<S>(), order)
}

struct Candidate {
    residual: f64,
    atoms: Vec<f64>,
    atom_moments: FloatSeries,
}

struct RecoveryProblem<'a> {
    target: &'a FloatSeries,
    d: usize,
    lambda: f64,
    kernel_r: FloatSeries,
    decomposed_r: FloatSeries,
}

impl RecoveryProblem<'_> {
    fn evaluate(&self, sigma_sq: f64) -> Result<Candidate> {
        let order = self.target.order();
        // R-transform of spn_decompose(m) ⊞ M[delta_{-sigma^2/lambda}].
        let mut shifted = self.decomposed_r.clone().into_coeffs();
        shifted[0] -= sigma_sq / self.lambda;
        let signal_r = boxed_conv(&self.kernel_r, &Series::new(shifted)?)?;
        let atom_moments = moment_from_r(&signal_r)?;

        let power_sums: Vec<f64> =
            atom_moments.coeffs()[..self.d].iter().map(|m| m * self.d as f64).collect();
        let e = poly::elementary_from_power_sums(&power_sums);
        let roots = poly::complex_roots(&poly::monic_from_elementary(&e));
        let penalty: f64 = roots.iter().map(|r| r.im * r.im + r.re.min(0.0).powi(2)).sum();
        let mut atoms: Vec<f64> = roots.iter().map(|r| r.re.max(0.0)).collect();
        atoms.sort_by(f64::total_cmp);

        let params = SpnParams { a_sq: atoms.clone(), sigma_sq, lambda: self.lambda };
        let predicted = spn_moments_from(&params, order)?;
        let fit: f64 = (self.d + 1..=order)
            .map(|n| (predicted.coeff(n) - self.target.coeff(n)).powi(2))
            .sum();
        let residual = fit + penalty;
        Ok(Candidate {
            residual: if residual.is_finite() { residual } else { f64::INFINITY },
            atoms,
            atom_moments,
        })
    }
}

/// Recovers `sigma^2` and the spectrum of `A*A` from an SPN moment series.
///
/// For each candidate `sigma^2` the noise contribution is stripped by
/// deconvolution and a free shift, the first `d` moments of the remainder
/// fix `d` atoms, and the residual measures how well those atoms and
/// `sigma^2` reproduce moments `d+1..N`. Since `m_1 = m_1(A*A) + sigma^2 /
/// lambda`, the search runs over `[0, lambda m_1]`: a uniform grid, then
/// golden-section refinement around the best grid point.
pub fn spn_recover(m: &FloatSeries, p: usize, d: usize) -> Result<RecoveryReport> {
    if d == 0 || p < d {
        return Err(Error::Domain(format!("need p >= d >= 1, got p = {p}, d = {d}")));
    }
    if m.order() < d + 2 {
        return Err(Error::OrderTooSmall { needed: d + 2, got: m.order() });
    }
    let lambda = d as f64 / p as f64;
    let order = m.order();
    let problem = RecoveryProblem {
        target: m,
        d,
        lambda,
        kernel_r: f_lambda(&lambda, order)?,
        decomposed_r: r_transform(&spn_decompose(m, &lambda)?)?,
    };

    let upper = (lambda * m.coeff(1)).max(0.0);
    let grid: Vec<f64> = (0..RECOVERY_GRID_POINTS)
        .map(|i| upper * i as f64 / (RECOVERY_GRID_POINTS - 1) as f64)
        .collect();
    let grid_eval: Vec<(f64, Candidate)> = grid
        .par_iter()
        .map(|&s| problem.evaluate(s).map(|c| (s, c)))
        .collect::<Result<_>>()?;

    let mut trace: Vec<(f64, f64)> = grid_eval.iter().map(|(s, c)| (*s, c.residual)).collect();
    let best_idx = argmin(&trace);
    let (mut best_s, mut best) = {
        let (s, c) = &grid_eval[best_idx];
        (*s, Candidate { residual: c.residual, atoms: c.atoms.clone(), atom_moments: c.atom_moments.clone() })
    };

    if upper > 0.0 {
        let lo = grid[best_idx.saturating_sub(1)];
        let hi = grid[(best_idx + 1).min(grid.len() - 1)];
        let (s, c) = golden_section(&problem, lo, hi, &mut trace)?;
        if c.residual < best.residual {
            best_s = s;
            best = c;
        }
    }

    let norm_sq: f64 = m.coeffs().iter().map(|c| c * c).sum();
    let threshold = RECOVERY_FAIL_FACTOR * (1.0 + norm_sq);
    if !(best.residual <= threshold) {
        return Err(Error::RecoveryFailed { residual: best.residual, threshold });
    }
    Ok(RecoveryReport {
        sigma_sq_hat: best_s.max(0.0),
        atom_moments: best.atom_moments,
        atoms: best.atoms,
        residual: best.residual,
        search_trace: trace,
    })
}

/// Index of the smallest residual, ties to the smaller σ².
fn argmin(trace: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(s, r)) in trace.iter().enumerate() {
        let (bs, br) = trace[best];
        if r < br || (r == br && s < bs) {
            best = i;
        }
    }
    best
}

fn golden_section(
    problem: &RecoveryProblem<'_>,
    mut lo: f64,
    mut hi: f64,
    trace: &mut Vec<(f64, f64)>,
) -> Result<(f64, Candidate)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let eval = |s: f64, trace: &mut Vec<(f64, f64)>| -> Result<Candidate> {
        let c = problem.evaluate(s)?;
        trace.push((s, c.residual));
        Ok(c)
    };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut c1 = eval(x1, trace)?;
    let mut c2 = eval(x2, trace)?;
    while hi - lo > RECOVERY_REFINE_TOL {
        if c1.residual <= c2.residual {
            hi = x2;
            x2 = x1;
            c2 = c1;
            x1 = hi - INV_PHI * (hi - lo);
            c1 = eval(x1, trace)?;
        } else {
            lo = x1;
            x1 = x2;
            c1 = c2;
            x2 = lo + INV_PHI * (hi - lo);
            c2 = eval(x2, trace)?;
        }
    }
    Ok(if c1.residual <= c2.residual { (x1, c1) } else { (x2, c2) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientDifference {
    /// 1-based coefficient index.
    pub index: usize,
    pub left: String,
    pub right: String,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    /// Exact equality of the two moment series up to the requested order.
    pub identical: bool,
    pub order: usize,
    pub first_difference: Option<CoefficientDifference>,
    /// Whether the sorted squared singular values and `sigma^2` agree exactly.
    pub parameters_equivalent: bool,
}

/// Compares two SPN models through their exact moment series.
pub fn verify_identifiability(a: &SpnModel, b: &SpnModel, order: usize) -> Result<IdentifiabilityReport> {
    if a.p != b.p || a.d != b.d {
        return Err(Error::DimensionMismatch(format!(
            "(p, d) = ({}, {}) vs ({}, {})",
            a.p, a.d, b.p, b.d
        )));
    }
    let pa = a.params::<BigRational>();
    let pb = b.params::<BigRational>();
    let ma = spn_moments_from(&pa, order)?;
    let mb = spn_moments_from(&pb, order)?;
    let first_difference = ma.coeffs().iter().zip(mb.coeffs()).enumerate().find(|(_, (x, y))| x != y).map(
        |(i, (x, y))| CoefficientDifference {
            index: i + 1,
            left: crate::series::rational_to_string(x),
            right: crate::series::rational_to_string(y),
            difference: (x - y).to_f64(),
        },
    );
    // Singular values are stored sorted, so squared spectra compare directly.
    let parameters_equivalent = pa.a_sq == pb.a_sq && pa.sigma_sq == pb.sigma_sq;
    Ok(IdentifiabilityReport {
        identical: first_difference.is_none(),
        order,
        first_difference,
        parameters_equivalent,
    })
}
