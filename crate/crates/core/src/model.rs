//! Spectral covariance models and angle metrics.
//!
//! A [`SpectralModel`] is `Sigma = U diag(lambda) U^T` with a strict gap
//! `lambda_1 > lambda_2 >= ... >= lambda_d >= 0`. Everything the iteration
//! cares about is basis-free: rotating by `U^T` maps the principal component
//! onto `e_1` and leaves every angle unchanged, which is what
//! [`SpectralModel::rescale_to_eigenbasis`] is for.

use std::fmt;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Norms at or below this are treated as zero by [`project_to_sphere`].
pub const MIN_NORM: f64 = 1e-300;
/// `|cos|` at or below this reports an unbounded tangent.
pub const EQUATOR_TOL: f64 = 1e-14;
const ORTHONORMAL_TOL: f64 = 1e-10;

/// A point on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps coordinates that are already unit norm up to rounding.
    pub(crate) fn from_unit(coords: Vec<f64>) -> Self {
        debug_assert!((linalg::norm(&coords) - 1.0).abs() < 1e-9);
        UnitVector(coords)
    }

    /// Canonical basis vector `e_{index}` (zero-based).
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dimension {dim}");
        let mut coords = vec![0.0; dim];
        coords[index] = 1.0;
        UnitVector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn negated(&self) -> Self {
        UnitVector(self.0.iter().map(|v| -v).collect())
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for UnitVector {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(de)?;
        project_to_sphere(&raw).map_err(serde::de::Error::custom)
    }
}

/// Euclidean projection `v / |v|` onto the unit sphere.
pub fn project_to_sphere(v: &[f64]) -> Result<UnitVector> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let norm = linalg::norm(v);
    if !(norm > MIN_NORM) || !norm.is_finite() {
        return Err(Error::DegenerateDirection);
    }
    Ok(UnitVector(v.iter().map(|x| x / norm).collect()))
}

/// Squared tangent, with the equator kept distinct from any float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tan2 {
    Finite(f64),
    Unbounded,
}

impl Tan2 {
    pub fn value(self) -> f64 {
        match self {
            Tan2::Finite(v) => v,
            Tan2::Unbounded => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Tan2::Finite(v) => Some(v),
            Tan2::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Tan2::Unbounded)
    }
}

impl fmt::Display for Tan2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tan2::Finite(v) => write!(f, "{v}"),
            Tan2::Unbounded => f.write_str("inf"),
        }
    }
}

impl Serialize for Tan2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tan2::Finite(v) => s.serialize_f64(*v),
            Tan2::Unbounded => s.serialize_str("inf"),
        }
    }
}

/// Angle between two unit vectors in the forms the rate results use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleReport {
    /// Radians in `[0, pi]`; flips to `pi - theta` under a single sign flip.
    pub theta: f64,
    pub sin2: f64,
    pub tan2: Tan2,
    pub cos: f64,
}

/// Angle between `u` and `v`.
///
/// `sin2` is computed as `|u - cos v|^2`, which stays accurate when the
/// vectors are nearly aligned.
pub fn angle_report(u: &UnitVector, v: &UnitVector) -> AngleReport {
    assert_eq!(u.dim(), v.dim(), "angle_report: dimension mismatch");
    let cos = linalg::dot(u.as_slice(), v.as_slice()).clamp(-1.0, 1.0);
    let sin2 = u
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| {
            let r = a - cos * b;
            r * r
        })
        .sum::<f64>()
        .clamp(0.0, 1.0);
    let tan2 = if cos.abs() <= EQUATOR_TOL {
        Tan2::Unbounded
    } else {
        Tan2::Finite(sin2 / (cos * cos))
    };
    AngleReport {
        theta: sin2.sqrt().atan2(cos),
        sin2,
        tan2,
        cos,
    }
}

/// Angle between `v` and `e_1`; for eigenbasis coordinates this is the
/// angle to the principal component.
pub fn angle_to_first_axis(v: &[f64]) -> AngleReport {
    let cos = v[0].clamp(-1.0, 1.0);
    let sin2 = v[1..].iter().map(|x| x * x).sum::<f64>().clamp(0.0, 1.0);
    let tan2 = if cos.abs() <= EQUATOR_TOL {
        Tan2::Unbounded
    } else {
        Tan2::Finite(sin2 / (cos * cos))
    };
    AngleReport {
        theta: sin2.sqrt().atan2(cos),
        sin2,
        tan2,
        cos,
    }
}

/// Ratios `U_k = v_k / v_1` for `k = 2..d` (returned zero-based from `v[1]`).
///
/// Their squares sum to `tan^2` of the angle between `v` and `e_1`.
pub fn coordinate_ratios(v: &[f64]) -> Result<Vec<f64>> {
    let lead = *v.first().ok_or(Error::EmptyInput)?;
    if lead.abs() <= EQUATOR_TOL {
        return Err(Error::RatioOnEquator);
    }
    Ok(v[1..].iter().map(|x| x / lead).collect())
}

/// How the eigenbasis of a model is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    Identity,
    /// Random orthogonal matrix: QR of a seeded standard-normal matrix with
    /// the diagonal of `R` made positive.
    Seeded(u64),
    /// Explicit rows of `U`; column `k` is the `k`-th eigenvector.
    Explicit(Vec<Vec<f64>>),
}

impl Serialize for BasisSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BasisSpec::Identity => s.serialize_str("identity"),
            BasisSpec::Seeded(seed) => s.serialize_str(&format!("seed:{seed}")),
            BasisSpec::Explicit(rows) => rows.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for BasisSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Rows(Vec<Vec<f64>>),
        }
        match Raw::deserialize(de)? {
            Raw::Rows(rows) => Ok(BasisSpec::Explicit(rows)),
            Raw::Name(name) if name == "identity" => Ok(BasisSpec::Identity),
            Raw::Name(name) => name
                .strip_prefix("seed:")
                .and_then(|s| s.parse::<u64>().ok())
                .map(BasisSpec::Seeded)
                .ok_or_else(|| {
                    serde::de::Error::custom(format!(
                        "basis must be \"identity\", \"seed:<u64>\" or a matrix, got {name:?}"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelSpec {
    dim: usize,
    eigenvalues: Vec<f64>,
    #[serde(default = "identity_basis")]
    basis: BasisSpec,
}

fn identity_basis() -> BasisSpec {
    BasisSpec::Identity
}

/// Covariance `Sigma = U diag(lambda) U^T` with a strict top eigengap.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    basis_spec: BasisSpec,
    /// Row-major `U`; `None` for the identity basis.
    basis: Option<Vec<f64>>,
    /// Row-major `Sigma^{1/2} = U diag(sqrt(lambda)) U^T`; `None` for the identity basis.
    sqrt_cov: Option<Vec<f64>>,
}

impl TryFrom<ModelSpec> for SpectralModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        if spec.eigenvalues.len() != spec.dim {
            return Err(Error::DimensionMismatch {
                expected: spec.dim,
                actual: spec.eigenvalues.len(),
            });
        }
        SpectralModel::new(spec.eigenvalues, spec.basis)
    }
}

impl From<SpectralModel> for ModelSpec {
    fn from(model: SpectralModel) -> Self {
        ModelSpec {
            dim: model.dim(),
            eigenvalues: model.eigenvalues,
            basis: model.basis_spec,
        }
    }
}

impl SpectralModel {
    pub fn new(eigenvalues: Vec<f64>, basis: BasisSpec) -> Result<Self> {
        validate_spectrum(&eigenvalues)?;
        let d = eigenvalues.len();
        let dense = match &basis {
            BasisSpec::Identity => None,
            BasisSpec::Seeded(seed) => Some(random_orthogonal(d, *seed)),
            BasisSpec::Explicit(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidModel(format!("basis must be {d}x{d}")));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                check_orthonormal(&flat, d)?;
                Some(flat)
            }
        };
        let sqrt_cov = dense.as_ref().map(|u| {
            let u = DMatrix::from_row_slice(d, d, u);
            let root = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                d,
                eigenvalues.iter().map(|l| l.sqrt()),
            ));
            let s = &u * root * u.transpose();
            row_major(&s)
        });
        Ok(SpectralModel {
            eigenvalues,
            basis_spec: basis,
            basis: dense,
            sqrt_cov,
        })
    }

    /// Axis-aligned model.
    pub fn diagonal(eigenvalues: Vec<f64>) -> Result<Self> {
        Self::new(eigenvalues, BasisSpec::Identity)
    }

    /// `(top, rest, ..., rest)` in dimension `dim`.
    pub fn spiked(dim: usize, top: f64, rest: f64, basis: BasisSpec) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        let mut eigenvalues = vec![rest; dim];
        eigenvalues[0] = top;
        Self::new(eigenvalues, basis)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis_spec(&self) -> &BasisSpec {
        &self.basis_spec
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.basis.is_none()
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    pub fn eigengap(&self) -> f64 {
        self.eigenvalues[0] - self.eigenvalues[1]
    }

    /// `sigma_*^2 = lambda_1 lambda_2 / (lambda_1 - lambda_2)^2`.
    pub fn effective_noise_variance(&self) -> f64 {
        let gap = self.eigengap();
        self.lambda1() * self.lambda2() / (gap * gap)
    }

    /// `U` as a dense matrix.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        match &self.basis {
            None => DMatrix::identity(d, d),
            Some(u) => DMatrix::from_row_slice(d, d, u),
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let u = self.basis_matrix();
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        &u * lambda * u.transpose()
    }

    /// The principal component `u*`, i.e. the first column of `U`.
    pub fn principal(&self) -> UnitVector {
        let d = self.dim();
        match &self.basis {
            None => UnitVector::basis(d, 0),
            Some(u) => UnitVector::from_unit((0..d).map(|i| u[i * d]).collect()),
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: n,
            });
        }
        Ok(())
    }

    /// `U^T x` without normalization.
    pub fn to_eigen_coords(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        Ok(match &self.basis {
            None => x.to_vec(),
            Some(u) => linalg::mat_t_vec(u, x),
        })
    }

    /// `U v`, the inverse of [`Self::to_eigen_coords`].
    pub fn from_eigen_coords(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        Ok(match &self.basis {
            None => v.to_vec(),
            Some(u) => linalg::mat_vec(u, v),
        })
    }

    /// Maps an iterate into eigenbasis coordinates, `v = U^T u`.
    pub fn rescale_to_eigenbasis(&self, u: &UnitVector) -> Result<UnitVector> {
        self.to_eigen_coords(u.as_slice()).map(UnitVector::from_unit)
    }

    /// `Sigma^{1/2} z` together with its eigenbasis coordinates
    /// `U^T Sigma^{1/2} z = diag(sqrt(lambda)) U^T z`.
    pub fn apply_sqrt_cov(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dim(z.len())?;
        match (&self.basis, &self.sqrt_cov) {
            (Some(u), Some(s)) => {
                let x = linalg::mat_vec(s, z);
                let y = linalg::mat_t_vec(u, &x);
                Ok((x, y))
            }
            _ => {
                let x: Vec<f64> = z
                    .iter()
                    .zip(&self.eigenvalues)
                    .map(|(zi, l)| zi * l.sqrt())
                    .collect();
                Ok((x.clone(), x))
            }
        }
    }
}

fn validate_spectrum(eigenvalues: &[f64]) -> Result<()> {
    if eigenvalues.len() < 2 {
        return Err(Error::InvalidModel(
            "at least two eigenvalues are needed for an eigengap".into(),
        ));
    }
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidModel("eigenvalues must be finite".into()));
    }
    if !(eigenvalues[0] > eigenvalues[1]) {
        return Err(Error::InvalidModel(
            "lambda_1 must strictly exceed lambda_2".into(),
        ));
    }
    if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidModel("eigenvalues must be non-increasing".into()));
    }
    if *eigenvalues.last().unwrap() < 0.0 {
        return Err(Error::InvalidModel("eigenvalues must be non-negative".into()));
    }
    Ok(())
}

fn check_orthonormal(u: &[f64], d: usize) -> Result<()> {
    let m = DMatrix::from_row_slice(d, d, u);
    let gram = m.transpose() * &m;
    let dev = (gram - DMatrix::<f64>::identity(d, d)).amax();
    if dev > ORTHONORMAL_TOL {
        return Err(Error::InvalidModel(format!(
            "basis is not orthonormal (max |U^T U - I| = {dev:e})"
        )));
    }
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Row-major random orthogonal matrix from QR of a seeded Gaussian matrix.
fn random_orthogonal(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::rng_from_seed(seed);
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    row_major(&q)
}
