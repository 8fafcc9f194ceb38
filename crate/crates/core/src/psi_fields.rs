//! Symmetric 2-tensor fields `psi` on `R^p` that generate the neutral metrics.
//!
//! Components are polynomials, so every partial derivative the curvature
//! formulas need is exact. The class of "good" fields (those whose Jacobi
//! operators are positive semi-definite of rank `p - 1` in every direction)
//! can only be probed, not certified: [`psi_membership_scan`] samples a grid
//! of base points and a set of unit directions and reports the first failure.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::xblock_curvature;
use crate::error::{Error, Result};
use crate::polynomial::Polynomial;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FromPotential,
    Explicit,
    Combination,
    Perturbation,
}

/// A symmetric `p x p` array of polynomial components `psi_ij(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiField {
    dim: usize,
    components: Vec<Polynomial>,
    provenance: Provenance,
}

impl PsiField {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            components: vec![Polynomial::zero(dim); dim * dim],
            provenance: Provenance::Explicit,
        }
    }

    /// Build from upper-triangular entries `(i, j, psi_ij)` with `i <= j`;
    /// omitted entries are zero. A repeated entry is an error.
    pub fn from_upper(dim: usize, entries: Vec<(usize, usize, Polynomial)>) -> Result<Self> {
        let mut out = Self::zero(dim);
        let mut seen = vec![false; dim * dim];
        for (i, j, poly) in entries {
            let (i, j) = (i.min(j), i.max(j));
            if j >= dim {
                return Err(Error::InvalidArgument(format!(
                    "component ({i},{j}) out of range for dimension {dim}"
                )));
            }
            if poly.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: poly.dim(),
                });
            }
            if std::mem::replace(&mut seen[i * dim + j], true) {
                return Err(Error::InvalidArgument(format!("component ({i},{j}) given twice")));
            }
            out.components[i * dim + j] = poly.clone();
            out.components[j * dim + i] = poly;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn component(&self, i: usize, j: usize) -> &Polynomial {
        &self.components[i * self.dim + j]
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.component(i, j).eval(x))
    }

    /// `psi_{ij/kl} = d_k d_l psi_ij`.
    pub fn second_partial(&self, i: usize, j: usize, k: usize, l: usize) -> Polynomial {
        self.component(i, j).partial(k).partial(l)
    }

    pub fn max_degree(&self) -> u32 {
        self.components.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    fn map(&self, provenance: Provenance, f: impl Fn(usize, &Polynomial) -> Polynomial) -> Self {
        Self {
            dim: self.dim,
            components: self.components.iter().enumerate().map(|(n, c)| f(n, c)).collect(),
            provenance,
        }
    }
}

/// Exact first and second partials of every component, precomputed once.
#[derive(Debug, Clone)]
pub struct PsiJet {
    dim: usize,
    values: Vec<Polynomial>,
    first: Vec<Polynomial>,
    second: Vec<Polynomial>,
}

impl PsiJet {
    pub fn new(psi: &PsiField) -> Self {
        let p = psi.dim;
        let values = psi.components.clone();
        let first: Vec<Polynomial> = values.iter().flat_map(|c| (0..p).map(move |k| c.partial(k))).collect();
        let second: Vec<Polynomial> = first.iter().flat_map(|c| (0..p).map(move |l| c.partial(l))).collect();
        Self {
            dim: p,
            values,
            first,
            second,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `psi_ij(x)`, row-major `p x p`.
    pub fn values_at(&self, x: &[f64]) -> Vec<f64> {
        self.values.iter().map(|c| c.eval(x)).collect()
    }

    /// `psi_{ij/k}(x)` at flat index `(i * p + j) * p + k`.
    pub fn first_at(&self, x: &[f64]) -> Vec<f64> {
        self.first.iter().map(|c| c.eval(x)).collect()
    }

    /// `psi_{ij/kl}(x)` at flat index `((i * p + j) * p + k) * p + l`.
    pub fn second_at(&self, x: &[f64]) -> Vec<f64> {
        self.second.iter().map(|c| c.eval(x)).collect()
    }
}

/// `psi_ij = d_i f * d_j f`.
pub fn psi_from_potential(f: &Polynomial) -> Result<PsiField> {
    let p = f.dim();
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "potential must have at least 2 variables, got {p}"
        )));
    }
    let grad: Vec<Polynomial> = (0..p).map(|i| f.partial(i)).collect();
    // products formed once per unordered pair so psi is exactly symmetric
    let mut components = vec![Polynomial::zero(p); p * p];
    for i in 0..p {
        for j in i..p {
            let c = &grad[i] * &grad[j];
            components[j * p + i] = c.clone();
            components[i * p + j] = c;
        }
    }
    Ok(PsiField {
        dim: p,
        components,
        provenance: Provenance::FromPotential,
    })
}

pub fn hessian_at(f: &Polynomial, x: &[f64]) -> DMatrix<f64> {
    let p = f.dim();
    DMatrix::from_fn(p, p, |i, j| f.partial(i).partial(j).eval(x))
}

/// Positive combination `sum a_i psi_i`.
pub fn combine(parts: &[(f64, &PsiField)]) -> Result<PsiField> {
    let Some((_, first)) = parts.first() else {
        return Err(Error::InvalidArgument("empty combination".into()));
    };
    let dim = first.dim;
    for (a, psi) in parts {
        if psi.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: psi.dim,
            });
        }
        if !(*a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "combination weight {a} is not positive"
            )));
        }
    }
    if let [(a, psi)] = parts {
        if *a == 1.0 {
            return Ok((*psi).clone());
        }
    }
    let mut out = PsiField::zero(dim).map(Provenance::Combination, |_, c| c.clone());
    for (a, psi) in parts {
        out = out.map(Provenance::Combination, |n, c| c + &psi.components[n].scale(*a));
    }
    Ok(out)
}

/// Axis-aligned box `K` in `R^p`, sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: usize,
}

impl GridRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: usize) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!("grid resolution {resolution} < 2")));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!("bad grid interval [{lo}, {hi}]")));
            }
        }
        Ok(Self {
            lower,
            upper,
            resolution,
        })
    }

    /// The cube `[-half, half]^p`.
    pub fn cube(dim: usize, half: f64, resolution: usize) -> Result<Self> {
        Self::new(vec![-half; dim], vec![half; dim], resolution)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let n = self.resolution;
        (0..self.dim())
            .map(|axis| {
                let k = index % n;
                index /= n;
                let t = k as f64 / (n - 1) as f64;
                self.lower[axis] + t * (self.upper[axis] - self.lower[axis])
            })
            .collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

/// Polynomial stand-in for a bump function on `region`:
/// `prod_i (1 - t_i^2)^2` with `t_i` the affine coordinate mapping the box
/// onto `[-1, 1]`. It equals 1 at the centre and vanishes to first order on
/// the boundary of the box.
pub fn bump_weight(region: &GridRegion) -> Polynomial {
    let p = region.dim();
    let mut w = Polynomial::constant(p, 1.0);
    for i in 0..p {
        let centre = 0.5 * (region.lower[i] + region.upper[i]);
        let half = 0.5 * (region.upper[i] - region.lower[i]);
        let t = &Polynomial::variable(p, i).scale(1.0 / half) - &Polynomial::constant(p, centre / half);
        let one_minus = &Polynomial::constant(p, 1.0) - &(&t * &t);
        w = &w * &(&one_minus * &one_minus);
    }
    w
}

/// `psi0 + scale * phi * psi1` with `phi` the [`bump_weight`] of `region`.
pub fn perturb(psi0: &PsiField, region: &GridRegion, psi1: &PsiField, scale: f64) -> Result<PsiField> {
    if psi1.dim != psi0.dim || region.dim() != psi0.dim {
        return Err(Error::DimensionMismatch {
            expected: psi0.dim,
            got: if psi1.dim != psi0.dim { psi1.dim } else { region.dim() },
        });
    }
    if scale == 0.0 {
        return Ok(psi0.clone());
    }
    let phi = bump_weight(region).scale(scale);
    Ok(psi0.map(Provenance::Perturbation, |n, c| c + &(&phi * &psi1.components[n])))
}

/// `max |psi_{ij/kl}|` over the grid points of `region`.
pub fn semi_norm(psi: &PsiField, region: &GridRegion) -> Result<f64> {
    if region.dim() != psi.dim {
        return Err(Error::DimensionMismatch {
            expected: psi.dim,
            got: region.dim(),
        });
    }
    let jet = PsiJet::new(psi);
    Ok((0..region.len())
        .into_par_iter()
        .map(|i| {
            jet.second_at(&region.point(i))
                .into_iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()))
        })
        .reduce(|| 0.0, f64::max))
}

/// A base point and direction where the Jacobi form fails the rank/sign test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipWitness {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    /// Eigenvalues of the `p x p` Jacobi form, ascending.
    pub eigenvalues: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Membership {
    Member {
        points: usize,
        directions: usize,
        /// Smallest eigenvalue outside the kernel over every checked pair.
        min_positive_eigenvalue: f64,
    },
    Witness(MembershipWitness),
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member { .. })
    }
}

/// The `p x p` bilinear form `(J(X) a, b)` on the X-block for a direction `X`.
pub(crate) fn xblock_jacobi_form(curv: &[f64], p: usize, dir: &[f64]) -> DMatrix<f64> {
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * p + j) * p + k) * p + l;
    DMatrix::from_fn(p, p, |a, b| {
        let mut s = 0.0;
        for j in 0..p {
            for k in 0..p {
                s += curv[idx(a, j, k, b)] * dir[j] * dir[k];
            }
        }
        s
    })
}

enum DirectionCheck {
    Pass(f64),
    Fail(Vec<f64>, String),
}

fn check_direction(form: DMatrix<f64>, tol: f64) -> DirectionCheck {
    let sym = (&form + form.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let near_zero = eig.iter().filter(|l| l.abs() <= tol).count();
    if eig[0] < -tol {
        return DirectionCheck::Fail(eig, "negative eigenvalue".into());
    }
    if near_zero != 1 {
        let reason = format!("{near_zero} eigenvalues within tolerance of zero (expected 1)");
        return DirectionCheck::Fail(eig, reason);
    }
    let min_pos = eig.iter().copied().filter(|l| *l > tol).fold(f64::INFINITY, f64::min);
    DirectionCheck::Pass(min_pos)
}

/// Probe whether `psi` generates positive semi-definite Jacobi forms of rank
/// `p - 1`. Directions are unit vectors of the Euclidean form on `R^p`,
/// drawn from a stream keyed by `(seed, point, direction)`.
pub fn psi_membership_scan(
    psi: &PsiField,
    region: &GridRegion,
    n_dirs: usize,
    tol: f64,
    seed: u64,
) -> Result<Membership> {
    let p = psi.dim;
    if p < 2 {
        return Err(Error::InvalidArgument("membership needs p >= 2".into()));
    }
    if region.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: region.dim(),
        });
    }
    if n_dirs == 0 {
        return Err(Error::InvalidArgument("need at least one direction".into()));
    }
    let jet = PsiJet::new(psi);
    let per_point: Vec<std::result::Result<f64, MembershipWitness>> = (0..region.len())
        .into_par_iter()
        .map(|pi| {
            let x = region.point(pi);
            let curv = xblock_curvature(p, &jet.second_at(&x));
            let mut min_pos = f64::INFINITY;
            for di in 0..n_dirs {
                let dir = unit_direction(p, seed, pi as u64, di as u64);
                match check_direction(xblock_jacobi_form(&curv, p, dir.as_slice()), tol) {
                    DirectionCheck::Pass(m) => min_pos = min_pos.min(m),
                    DirectionCheck::Fail(eigenvalues, reason) => {
                        return Err(MembershipWitness {
                            point: x,
                            direction: dir.iter().copied().collect(),
                            eigenvalues,
                            reason,
                        })
                    }
                }
            }
            Ok(min_pos)
        })
        .collect();

    let mut min_pos = f64::INFINITY;
    for r in per_point {
        match r {
            Ok(m) => min_pos = min_pos.min(m),
            Err(w) => return Ok(Membership::Witness(w)),
        }
    }
    Ok(Membership::Member {
        points: region.len(),
        directions: n_dirs,
        min_positive_eigenvalue: min_pos,
    })
}

fn unit_direction(p: usize, seed: u64, point: u64, dir: u64) -> DVector<f64> {
    let mut rng = rng::stream(seed, &[0x6d656d62, point, dir]);
    loop {
        let v: DVector<f64> = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}
