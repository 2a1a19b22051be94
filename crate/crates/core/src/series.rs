//! Truncated formal power series without constant term, and the transform
//! algebra built on boxed convolution.
//!
//! A [`Series`] of order `N` holds coefficients `c_1..c_N`; every identity in
//! this module holds modulo `z^{N+1}`. Two coefficient backends implement
//! [`Scalar`]: arbitrary-precision rationals for exact work and `f64` for
//! numerical pipelines.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ncpart;

/// Floating-point first coefficients at or below this magnitude are treated
/// as zero when inverting under boxed convolution.
pub const FLOAT_INVERTIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Rational,
    Float,
}

impl ScalarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalarKind::Rational => "rational",
            ScalarKind::Float => "float",
        }
    }
}

impl FromStr for ScalarKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rational" => Ok(ScalarKind::Rational),
            "float" => Ok(ScalarKind::Float),
            other => Err(Error::Parse(format!("unknown scalar kind {other:?}"))),
        }
    }
}

/// Coefficient field of a [`Series`].
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const KIND: ScalarKind;

    /// Exact conversion for rationals; `None` for non-finite input.
    fn from_f64(x: f64) -> Option<Self>;
    fn from_u64(x: u64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Whether this value may serve as the first coefficient of a
    /// boxed-convolution inverse.
    fn is_invertible(&self) -> bool;

    fn powi(&self, n: usize) -> Self {
        num_traits::pow(self.clone(), n)
    }
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Float;

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn from_u64(x: u64) -> Self {
        x as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_invertible(&self) -> bool {
        self.abs() > FLOAT_INVERTIBILITY_TOL
    }
}

impl Scalar for BigRational {
    const KIND: ScalarKind = ScalarKind::Rational;

    fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn from_u64(x: u64) -> Self {
        BigRational::from_integer(BigInt::from(x))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_invertible(&self) -> bool {
        !self.is_zero()
    }
}

/// Renders a rational as `"p/q"`, always with an explicit denominator.
pub fn rational_to_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"p/q"` or an integer string.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let parse_int = |t: &str| {
        BigInt::from_str(t.trim()).map_err(|_| Error::Parse(format!("invalid rational {s:?}")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse_int(d)?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(parse_int(n)?, d))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

#[derive(Clone, PartialEq)]
pub struct Series<S> {
    coeffs: Vec<S>,
}

pub type RationalSeries = Series<BigRational>;
pub type FloatSeries = Series<f64>;

impl<S: fmt::Debug> fmt::Debug for Series<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.coeffs).finish()
    }
}

impl<S: Scalar> Series<S> {
    /// Coefficients `c_1..c_N`; the order is their count and must be >= 1.
    pub fn new(coeffs: Vec<S>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("series order must be at least 1".into()));
        }
        Ok(Series { coeffs })
    }

    pub fn from_fn(order: usize, f: impl FnMut(usize) -> S) -> Result<Self> {
        Self::new((1..=order).map(f).collect())
    }

    pub fn zero(order: usize) -> Result<Self> {
        Self::from_fn(order, |_| S::zero())
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    /// Coefficient of `z^n`, 1-based.
    pub fn coeff(&self, n: usize) -> &S {
        &self.coeffs[n - 1]
    }

    pub fn kind(&self) -> ScalarKind {
        S::KIND
    }

    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::InsufficientOrder { needed: order, available: self.order() });
        }
        Self::new(self.coeffs[..order].to_vec())
    }

    pub fn scale(&self, k: &S) -> Self {
        Series { coeffs: self.coeffs.iter().map(|c| c.clone() * k.clone()).collect() }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        same_order(self, other)?;
        Ok(Series {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() + b.clone()).collect(),
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        same_order(self, other)?;
        Ok(Series {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() - b.clone()).collect(),
        })
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Series<T> {
        Series { coeffs: self.coeffs.iter().map(f).collect() }
    }

    pub fn to_float(&self) -> FloatSeries {
        self.map(|c| c.to_f64())
    }
}

impl FloatSeries {
    /// Exact rational image of a float series.
    pub fn to_rational(&self) -> Result<RationalSeries> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| {
                <BigRational as Scalar>::from_f64(c)
                    .ok_or_else(|| Error::Domain(format!("non-finite coefficient {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Series::new(coeffs)
    }
}

fn same_order<S>(f: &Series<S>, g: &Series<S>) -> Result<()> {
    if f.coeffs.len() != g.coeffs.len() {
        return Err(Error::OrderMismatch { left: f.coeffs.len(), right: g.coeffs.len() });
    }
    Ok(())
}

/// `Delta(z) = z`, the unit of boxed convolution.
pub fn delta_series<S: Scalar>(order: usize) -> Result<Series<S>> {
    Series::from_fn(order, |n| if n == 1 { S::one() } else { S::zero() })
}

/// `Zeta(z) = z + z^2 + ...`.
pub fn zeta_series<S: Scalar>(order: usize) -> Result<Series<S>> {
    Series::from_fn(order, |_| S::one())
}

/// `prod_{s in ty} c_s` for a block type `ty`.
fn type_product<S: Scalar>(coeffs: &[S], ty: &[u8]) -> S {
    ty.iter().fold(S::one(), |acc, &s| acc * coeffs[s as usize - 1].clone())
}

/// Boxed convolution: coefficient `m` is
/// `sum_{pi in NC(m)} Cf(f; pi) Cf(g; K(pi))`.
pub fn boxed_conv<S: Scalar>(f: &Series<S>, g: &Series<S>) -> Result<Series<S>> {
    same_order(f, g)?;
    let mut out = Vec::with_capacity(f.order());
    for m in 1..=f.order() {
        let table = ncpart::type_pairs(m)?;
        let mut acc = S::zero();
        for (pi_ty, k_ty, count) in &table.pairs {
            let term = type_product(&f.coeffs, pi_ty) * type_product(&g.coeffs, k_ty);
            if !term.is_zero() {
                acc = acc + S::from_u64(*count) * term;
            }
        }
        out.push(acc);
    }
    Series::new(out)
}

/// Inverse under boxed convolution.
///
/// The unknown `x_n` enters coefficient `n` of `f ⊠ x` only through the
/// all-singletons partition, whose complement is the full block, with
/// multiplier `f_1^n`; every other term involves `x_1..x_{n-1}`.
pub fn boxed_inverse<S: Scalar>(f: &Series<S>) -> Result<Series<S>> {
    let first = f.coeff(1);
    if !first.is_invertible() {
        return Err(Error::NotInvertible { first: format!("{first:?}") });
    }
    let n_max = f.order();
    let mut x: Vec<S> = vec![S::zero(); n_max];
    for n in 1..=n_max {
        let table = ncpart::type_pairs(n)?;
        let mut rest = S::zero();
        for (pi_ty, k_ty, count) in &table.pairs {
            if k_ty.len() == 1 && k_ty[0] as usize == n {
                continue;
            }
            let term = type_product(&f.coeffs, pi_ty) * type_product(&x, k_ty);
            rest = rest + S::from_u64(*count) * term;
        }
        let target = if n == 1 { S::one() } else { S::zero() };
        x[n - 1] = (target - rest) / first.powi(n);
    }
    Series::new(x)
}

/// `R_f = f ⊠ Zeta^{-1}`: the free cumulants of a moment series.
pub fn r_transform<S: Scalar>(f: &Series<S>) -> Result<Series<S>> {
    let zeta_inv = boxed_inverse(&zeta_series::<S>(f.order())?)?;
    boxed_conv(f, &zeta_inv)
}

/// `r ⊠ Zeta`: moments from free cumulants.
pub fn moment_from_r<S: Scalar>(r: &Series<S>) -> Result<Series<S>> {
    boxed_conv(r, &zeta_series(r.order())?)
}

/// Free additive convolution, `R_{f ⊞ g} = R_f + R_g`.
pub fn free_add_conv<S: Scalar>(f: &Series<S>, g: &Series<S>) -> Result<Series<S>> {
    same_order(f, g)?;
    moment_from_r(&r_transform(f)?.checked_add(&r_transform(g)?)?)
}

/// Free multiplicative deconvolution `(R_f ⊠ R_g^{-1}) ⊠ Zeta`, the unique
/// `h` with `R_f = R_g ⊠ R_h`.
pub fn free_mult_deconv<S: Scalar>(f: &Series<S>, g: &Series<S>) -> Result<Series<S>> {
    same_order(f, g)?;
    let rg_inv = boxed_inverse(&r_transform(g)?)?;
    moment_from_r(&boxed_conv(&r_transform(f)?, &rg_inv)?)
}

/// `f(beta z)`: coefficient `n` becomes `beta^n c_n`.
pub fn scale_argument<S: Scalar>(f: &Series<S>, beta: &S) -> Series<S> {
    Series { coeffs: f.coeffs.iter().enumerate().map(|(i, c)| c.clone() * beta.powi(i + 1)).collect() }
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    order: usize,
    coeffs: Vec<serde_json::Value>,
    scalar: ScalarKind,
}

/// A series of either backend, as read from or written to JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum AnySeries {
    Rational(RationalSeries),
    Float(FloatSeries),
}

impl AnySeries {
    pub fn order(&self) -> usize {
        match self {
            AnySeries::Rational(s) => s.order(),
            AnySeries::Float(s) => s.order(),
        }
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            AnySeries::Rational(_) => ScalarKind::Rational,
            AnySeries::Float(_) => ScalarKind::Float,
        }
    }

    pub fn to_float(&self) -> FloatSeries {
        match self {
            AnySeries::Rational(s) => s.to_float(),
            AnySeries::Float(s) => s.clone(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs = match self {
            AnySeries::Rational(s) => {
                s.coeffs.iter().map(|c| serde_json::Value::String(rational_to_string(c))).collect()
            }
            AnySeries::Float(s) => s.coeffs.iter().map(|&c| serde_json::json!(c)).collect(),
        };
        serde_json::to_value(SeriesJson { order: self.order(), coeffs, scalar: self.kind() })
            .expect("series json is always representable")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: SeriesJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        if raw.coeffs.len() != raw.order {
            return Err(Error::Parse(format!(
                "order {} but {} coefficients",
                raw.order,
                raw.coeffs.len()
            )));
        }
        match raw.scalar {
            ScalarKind::Rational => {
                let coeffs = raw
                    .coeffs
                    .iter()
                    .map(|v| match v {
                        serde_json::Value::String(s) => parse_rational(s),
                        serde_json::Value::Number(n) if n.is_i64() => {
                            Ok(BigRational::from_integer(BigInt::from(n.as_i64().unwrap())))
                        }
                        other => Err(Error::Parse(format!("invalid rational coefficient {other}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnySeries::Rational(Series::new(coeffs)?))
            }
            ScalarKind::Float => {
                let coeffs = raw
                    .coeffs
                    .iter()
                    .map(|v| {
                        v.as_f64().ok_or_else(|| Error::Parse(format!("invalid float coefficient {v}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnySeries::Float(Series::new(coeffs)?))
            }
        }
    }
}

impl From<RationalSeries> for AnySeries {
    fn from(s: RationalSeries) -> Self {
        AnySeries::Rational(s)
    }
}

impl From<FloatSeries> for AnySeries {
    fn from(s: FloatSeries) -> Self {
        AnySeries::Float(s)
    }
}

/// Applies a generic series computation to whichever backend is held.
#[macro_export]
macro_rules! with_series {
    ($any:expr, |$s:ident| $body:expr) => {
        match $any {
            $crate::series::AnySeries::Rational($s) => $crate::series::AnySeries::from($body?),
            $crate::series::AnySeries::Float($s) => $crate::series::AnySeries::from($body?),
        }
    };
}
