//! The metric `g_psi`, its connection and curvature, and Jacobi operators.
//!
//! Coordinates on `R^{2p} x R^(u,v)` are ordered `(x_1..x_p, y_1..y_p, z_1..z_{u+v})`.
//! The Gram matrix is
//!
//! ```text
//! [ psi(x)  I  0 ]
//! [   I     0  0 ]
//! [   0     0  D ]      D = diag(-1 (u times), +1 (v times))
//! ```
//!
//! Curvature sign convention: `R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`, and
//! `R_ijkl = g(R(d_i, d_j) d_k, d_l)`. With this convention the Jacobi operator
//! `J(X)Y = R(Y, X)X` of a convex potential is positive semi-definite; the
//! opposite convention negates every Jacobi spectrum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudo_linalg::{
    nilpotency_ratio, rank_with_floor, InnerProduct, JordanPartition, Signature, SubspaceFrame,
};
use crate::psi_fields::{PsiField, PsiJet};

/// Default central-difference step for the curvature oracle.
pub const FD_STEP: f64 = 1e-4;

/// `g_psi` on `R^{2p}`, optionally times a flat factor `R^(u,v)`.
#[derive(Debug, Clone)]
pub struct MetricGPsi {
    psi: PsiField,
    jet: PsiJet,
    flat: Signature,
}

impl MetricGPsi {
    pub fn new(psi: PsiField) -> Self {
        Self::with_flat_factor(psi, Signature::new(0, 0))
    }

    /// `flat.neg` timelike and `flat.pos` spacelike flat directions.
    pub fn with_flat_factor(psi: PsiField, flat: Signature) -> Self {
        let jet = PsiJet::new(&psi);
        Self { psi, jet, flat }
    }

    pub fn psi(&self) -> &PsiField {
        &self.psi
    }

    pub fn jet(&self) -> &PsiJet {
        &self.jet
    }

    /// Half the dimension of the curved factor.
    pub fn p(&self) -> usize {
        self.psi.dim()
    }

    pub fn flat_factor(&self) -> Signature {
        self.flat
    }

    pub fn dim(&self) -> usize {
        2 * self.p() + self.flat.dim()
    }

    pub fn signature(&self) -> Signature {
        Signature::new(self.p() + self.flat.neg, self.p() + self.flat.pos)
    }

    /// The curved factor alone.
    pub fn base(&self) -> MetricGPsi {
        Self {
            psi: self.psi.clone(),
            jet: self.jet.clone(),
            flat: Signature::new(0, 0),
        }
    }

    /// Full coordinates from either `x` alone (padded with zeros) or a full point.
    pub fn point(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let (p, m) = (self.p(), self.dim());
        if coords.len() == m {
            Ok(coords.to_vec())
        } else if coords.len() == p {
            let mut pt = coords.to_vec();
            pt.resize(m, 0.0);
            Ok(pt)
        } else {
            Err(Error::DimensionMismatch {
                expected: m,
                got: coords.len(),
            })
        }
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        Ok(())
    }

    pub fn x_axis(&self, i: usize) -> DVector<f64> {
        self.axis(i)
    }

    pub fn y_axis(&self, i: usize) -> DVector<f64> {
        self.axis(self.p() + i)
    }

    /// Flat-factor axis `i`; the first `u` are timelike.
    pub fn flat_axis(&self, i: usize) -> DVector<f64> {
        self.axis(2 * self.p() + i)
    }

    fn axis(&self, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[i] = 1.0;
        v
    }

    pub fn metric_at(&self, point: &[f64]) -> Result<InnerProduct> {
        self.check_point(point)?;
        let (p, m) = (self.p(), self.dim());
        let psi = self.jet.values_at(&point[..p]);
        let mut g = DMatrix::zeros(m, m);
        for i in 0..p {
            for j in 0..p {
                g[(i, j)] = psi[i * p + j];
            }
            g[(i, p + i)] = 1.0;
            g[(p + i, i)] = 1.0;
        }
        for a in 0..self.flat.dim() {
            g[(2 * p + a, 2 * p + a)] = if a < self.flat.neg { -1.0 } else { 1.0 };
        }
        InnerProduct::new(g)
    }

    /// Christoffel symbols from the closed form: only
    /// `nabla_{d_i^x} d_j^x = 1/2 sum_k (psi_{ik/j} + psi_{jk/i} - psi_{ij/k}) d_k^y`
    /// is nonzero.
    pub fn christoffel_closed(&self, point: &[f64]) -> Result<Christoffel> {
        self.check_point(point)?;
        let (p, m) = (self.p(), self.dim());
        let d = self.jet.first_at(&point[..p]);
        let first = |i: usize, j: usize, k: usize| d[(i * p + j) * p + k];
        let mut out = Christoffel::zeros(m);
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    let c = 0.5 * (first(i, k, j) + first(j, k, i) - first(i, j, k));
                    out.set(p + k, i, j, c);
                }
            }
        }
        Ok(out)
    }

    /// Curvature from the closed form; only pure-X entries are nonzero.
    pub fn curvature_closed(&self, point: &[f64]) -> Result<CurvatureTensor> {
        self.check_point(point)?;
        let (p, m) = (self.p(), self.dim());
        let xb = xblock_curvature(p, &self.jet.second_at(&point[..p]));
        let mut entries = vec![0.0; m * m * m * m];
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    for l in 0..p {
                        entries[((i * m + j) * m + k) * m + l] = xb[((i * p + j) * p + k) * p + l];
                    }
                }
            }
        }
        Ok(CurvatureTensor {
            dim: m,
            entries,
            base_point: point.to_vec(),
        })
    }

    /// Finite-difference curvature built from `metric_at` alone.
    pub fn curvature_fd(&self, point: &[f64], h: f64) -> Result<CurvatureTensor> {
        self.check_point(point)?;
        curvature_fd_generic(self.dim(), |pt| self.metric_at(pt), point, h)
    }

    /// Zero every component outside the X-block.
    pub fn rho_x(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        out.rows_mut(0, self.p()).copy_from(&v.rows(0, self.p()));
        out
    }

    /// `X~_i = d_i^x - 1/2 sum_j psi_ij d_j^y`; together with the `d_j^y` these
    /// form a hyperbolic basis of the curved factor.
    pub fn tilde_basis(&self, point: &[f64]) -> Result<Vec<DVector<f64>>> {
        self.check_point(point)?;
        let p = self.p();
        let psi = self.jet.values_at(&point[..p]);
        Ok((0..p)
            .map(|i| {
                let mut v = self.x_axis(i);
                for j in 0..p {
                    v[p + j] = -0.5 * psi[i * p + j];
                }
                v
            })
            .collect())
    }
}

/// `R_ijkl` on the X-block from second partials of `psi`:
/// `-1/2 (psi_{il/jk} + psi_{jk/il} - psi_{ik/jl} - psi_{jl/ik})`.
pub fn xblock_curvature(p: usize, second: &[f64]) -> Vec<f64> {
    let s = |i: usize, j: usize, k: usize, l: usize| second[((i * p + j) * p + k) * p + l];
    let mut out = vec![0.0; p * p * p * p];
    for i in 0..p {
        for j in 0..p {
            for k in 0..p {
                for l in 0..p {
                    out[((i * p + j) * p + k) * p + l] =
                        -0.5 * (s(i, l, j, k) + s(j, k, i, l) - s(i, k, j, l) - s(j, l, i, k));
                }
            }
        }
    }
    out
}

/// `Gamma^k_ij`, the coefficient of `d_k` in `nabla_{d_i} d_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    entries: Vec<f64>,
}

impl Christoffel {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.entries[(k * self.dim + i) * self.dim + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.entries[(k * self.dim + i) * self.dim + j] = v;
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Christoffel symbols by central differences of an arbitrary metric field.
pub fn christoffel_fd_generic(
    dim: usize,
    metric: impl Fn(&[f64]) -> Result<InnerProduct>,
    point: &[f64],
    h: f64,
) -> Result<Christoffel> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    let g = metric(point)?;
    let inv = g
        .gram()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned { point: point.to_vec() })?;
    // dg[c][a][b] = d_c g_ab
    let mut dg = vec![0.0; dim * dim * dim];
    let mut shifted = point.to_vec();
    for c in 0..dim {
        shifted[c] = point[c] + h;
        let plus = metric(&shifted)?;
        shifted[c] = point[c] - h;
        let minus = metric(&shifted)?;
        shifted[c] = point[c];
        for a in 0..dim {
            for b in 0..dim {
                dg[(c * dim + a) * dim + b] = (plus.gram()[(a, b)] - minus.gram()[(a, b)]) / (2.0 * h);
            }
        }
    }
    let d = |c: usize, a: usize, b: usize| dg[(c * dim + a) * dim + b];
    let mut out = Christoffel::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let lowered: Vec<f64> = (0..dim).map(|l| 0.5 * (d(i, j, l) + d(j, i, l) - d(l, i, j))).collect();
            for k in 0..dim {
                let v: f64 = (0..dim).map(|l| inv[(k, l)] * lowered[l]).sum();
                out.set(k, i, j, v);
            }
        }
    }
    Ok(out)
}

/// Curvature by the coordinate formula
/// `R(d_i, d_j) d_k = (d_i G^l_jk - d_j G^l_ik + G^n_jk G^l_in - G^n_ik G^l_jn) d_l`,
/// with the Christoffel symbols and their derivatives both taken by central
/// differences of `metric`.
pub fn curvature_fd_generic(
    dim: usize,
    metric: impl Fn(&[f64]) -> Result<InnerProduct>,
    point: &[f64],
    h: f64,
) -> Result<CurvatureTensor> {
    let m = dim;
    let g = metric(point)?;
    let gamma = christoffel_fd_generic(m, &metric, point, h)?;
    let mut dgamma = Vec::with_capacity(m);
    let mut shifted = point.to_vec();
    for c in 0..m {
        shifted[c] = point[c] + h;
        let plus = christoffel_fd_generic(m, &metric, &shifted, h)?;
        shifted[c] = point[c] - h;
        let minus = christoffel_fd_generic(m, &metric, &shifted, h)?;
        shifted[c] = point[c];
        let entries = plus
            .entries
            .iter()
            .zip(&minus.entries)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        dgamma.push(Christoffel { dim: m, entries });
    }

    let mut entries = vec![0.0; m * m * m * m];
    let mut upper = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for (l, slot) in upper.iter_mut().enumerate() {
                    let mut v = dgamma[i].get(l, j, k) - dgamma[j].get(l, i, k);
                    for n in 0..m {
                        v += gamma.get(n, j, k) * gamma.get(l, i, n) - gamma.get(n, i, k) * gamma.get(l, j, n);
                    }
                    *slot = v;
                }
                for l in 0..m {
                    let lowered: f64 = (0..m).map(|n| g.gram()[(l, n)] * upper[n]).sum();
                    entries[((i * m + j) * m + k) * m + l] = lowered;
                }
            }
        }
    }
    Ok(CurvatureTensor {
        dim: m,
        entries,
        base_point: point.to_vec(),
    })
}

/// `R_ijkl = g(R(d_i, d_j) d_k, d_l)` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    dim: usize,
    entries: Vec<f64>,
    base_point: Vec<f64>,
}

impl CurvatureTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let m = self.dim;
        self.entries[((i * m + j) * m + k) * m + l]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &CurvatureTensor) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `max |self - other|` divided by the largest entry of `reference` (self);
    /// absolute when the reference tensor is zero.
    pub fn relative_error(&self, other: &CurvatureTensor) -> f64 {
        let diff = self.max_abs_diff(other);
        let scale = self.max_abs();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    /// Largest entry with at least one index outside `0..xdim`.
    pub fn max_abs_outside(&self, xdim: usize) -> f64 {
        let m = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        if i.max(j).max(k).max(l) >= xdim {
                            worst = worst.max(self.get(i, j, k, l).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Worst violation of `R_ijkl = -R_jikl = -R_ijlk = R_klij`.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let r = self.get(i, j, k, l);
                        worst = worst
                            .max((r + self.get(j, i, k, l)).abs())
                            .max((r + self.get(i, j, l, k)).abs())
                            .max((r - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Worst violation of `R_ijkl + R_jkil + R_kijl = 0`.
    pub fn bianchi_defect(&self) -> f64 {
        let m = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let s = self.get(i, j, k, l) + self.get(j, k, i, l) + self.get(k, i, j, l);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// `B_ab = sum_jk R_{a j k b} P_jk` for a symmetric weight matrix `P`.
    pub(crate) fn contract(&self, weight: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.dim;
        DMatrix::from_fn(m, m, |a, b| {
            let mut s = 0.0;
            for j in 0..m {
                for k in 0..m {
                    let w = weight[(j, k)];
                    if w != 0.0 {
                        s += self.get(a, j, k, b) * w;
                    }
                }
            }
            s
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobiSource {
    Vector(Vec<f64>),
    Frame { timelike: usize, spacelike: usize },
}

/// A Jacobi operator in the coordinate basis, with its bilinear form.
#[derive(Debug, Clone)]
pub struct JacobiOperator {
    matrix: DMatrix<f64>,
    form: DMatrix<f64>,
    magnitude: f64,
    source: JacobiSource,
}

impl JacobiOperator {
    fn from_form(ip: &InnerProduct, form: DMatrix<f64>, magnitude: f64, source: JacobiSource) -> Result<Self> {
        let lu = ip.gram().clone().lu();
        let matrix = lu
            .solve(&form)
            .ok_or_else(|| Error::IllConditioned { point: Vec::new() })?;
        Ok(Self {
            matrix,
            form,
            magnitude,
            source,
        })
    }

    /// The endomorphism `Y -> J Y`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `(J a, b)`.
    pub fn form(&self) -> &DMatrix<f64> {
        &self.form
    }

    /// Sum of the Frobenius norms of the summand forms.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn source(&self) -> &JacobiSource {
        &self.source
    }

    /// Rank, with singular values measured against the summand magnitude so
    /// that a sum cancelling to roundoff has rank 0.
    pub fn rank(&self, tol: f64) -> usize {
        rank_with_floor(&self.form, tol, self.magnitude)
    }

    pub fn nilpotency_ratio(&self) -> f64 {
        nilpotency_ratio(&self.matrix)
    }

    pub fn jordan_form(&self, nilpotent_tol: f64, rank_tol: f64) -> Result<JordanPartition> {
        let m = self.matrix.nrows();
        let ratio = self.nilpotency_ratio();
        let bound = nilpotent_tol * self.matrix.norm_squared().max(1.0);
        if ratio.is_nan() || ratio > nilpotent_tol {
            return Err(Error::NotNilpotent {
                square_norm: (&self.matrix * &self.matrix).norm(),
                bound,
            });
        }
        JordanPartition::two_step(m, self.rank(rank_tol)).ok_or(Error::NotNilpotent {
            square_norm: (&self.matrix * &self.matrix).norm(),
            bound,
        })
    }

    /// The form restricted to the first `p` coordinates.
    pub fn xblock_form(&self, p: usize) -> DMatrix<f64> {
        self.form.view((0, 0), (p, p)).into_owned()
    }

    /// `G J` symmetric to within `tol` relative to its size.
    pub fn is_self_adjoint(&self, ip: &InnerProduct, tol: f64) -> bool {
        let gj = ip.gram() * &self.matrix;
        let asym = (&gj - gj.transpose()).amax();
        asym <= tol * gj.amax().max(1.0)
    }
}

fn vector_form(rt: &CurvatureTensor, x: &DVector<f64>) -> DMatrix<f64> {
    rt.contract(&(x * x.transpose()))
}

/// `J(X) Y = R(Y, X) X`.
pub fn jacobi(rt: &CurvatureTensor, ip: &InnerProduct, x: &DVector<f64>) -> Result<JacobiOperator> {
    if x.len() != rt.dim() || ip.dim() != rt.dim() {
        return Err(Error::DimensionMismatch {
            expected: rt.dim(),
            got: if x.len() != rt.dim() { x.len() } else { ip.dim() },
        });
    }
    let form = vector_form(rt, x);
    let magnitude = form.norm();
    JacobiOperator::from_form(ip, form, magnitude, JacobiSource::Vector(x.iter().copied().collect()))
}

/// `J(pi) = sum_i (e_i, e_i) J(e_i)` over an orthonormal frame of `pi`.
pub fn higher_jacobi(
    rt: &CurvatureTensor,
    ip: &InnerProduct,
    frame: &SubspaceFrame,
    ortho_tol: f64,
) -> Result<JacobiOperator> {
    if frame.ambient_dim() != rt.dim() || ip.dim() != rt.dim() {
        return Err(Error::DimensionMismatch {
            expected: rt.dim(),
            got: frame.ambient_dim(),
        });
    }
    frame.check_orthonormal(ip, ortho_tol)?;
    let m = rt.dim();
    let mut form = DMatrix::zeros(m, m);
    let mut magnitude = 0.0;
    for (e, &sign) in frame.vectors().iter().zip(frame.signs()) {
        let term = vector_form(rt, e);
        magnitude += term.norm();
        form += term * sign;
    }
    let (timelike, spacelike) = frame.type_counts();
    JacobiOperator::from_form(ip, form, magnitude, JacobiSource::Frame { timelike, spacelike })
}
