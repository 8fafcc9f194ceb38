//! Signature-aware linear algebra.
//!
//! Inner products here are arbitrary nondegenerate symmetric bilinear forms.
//! Subspace signatures are written `(timelike, spacelike)`: the first count is
//! the number of negative directions, the second the number of positive ones.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for numerical rank.
pub const RANK_TOL: f64 = 1e-9;
/// Default tolerance for orthonormality and degeneracy checks.
pub const ORTHO_TOL: f64 = 1e-10;
/// Default relative tolerance for `|A^2| <= tol * max(1, |A|^2)`.
pub const NILPOTENT_TOL: f64 = 1e-10;

/// Tolerances used throughout a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rank: f64,
    pub ortho: f64,
    pub nilpotent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: RANK_TOL,
            ortho: ORTHO_TOL,
            nilpotent: NILPOTENT_TOL,
        }
    }
}

/// Counts of negative (timelike) and positive (spacelike) directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub neg: usize,
    pub pos: usize,
}

impl Signature {
    pub const fn new(neg: usize, pos: usize) -> Self {
        Self { neg, pos }
    }

    pub const fn dim(&self) -> usize {
        self.neg + self.pos
    }
}

/// A nondegenerate symmetric bilinear form on `R^m`, stored as its Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProduct {
    gram: DMatrix<f64>,
}

impl InnerProduct {
    /// Wrap a Gram matrix. The matrix must be square and exactly symmetric.
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::DimensionMismatch {
                expected: gram.nrows(),
                got: gram.ncols(),
            });
        }
        let m = gram.nrows();
        for i in 0..m {
            for j in (i + 1)..m {
                if gram[(i, j)] != gram[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { gram })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            gram: DMatrix::identity(m, m),
        }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        Self {
            gram: DMatrix::from_diagonal(&DVector::from_column_slice(entries)),
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `(u, v)`.
    pub fn apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.gram * v))
    }

    /// Gram matrix of a set of column vectors, `E^T G E`.
    pub fn restrict(&self, columns: &DMatrix<f64>) -> DMatrix<f64> {
        let g = columns.transpose() * &self.gram * columns;
        // force exact symmetry; the product is symmetric only up to roundoff
        (&g + g.transpose()) * 0.5
    }
}

/// Counts of eigenvalues of the Gram matrix below `-tol` and above `tol`.
pub fn signature_of(ip: &InnerProduct, tol: f64) -> Result<Signature> {
    let eig = SymmetricEigen::new(ip.gram.clone());
    let mut sig = Signature::new(0, 0);
    for &lambda in eig.eigenvalues.iter() {
        if lambda < -tol {
            sig.neg += 1;
        } else if lambda > tol {
            sig.pos += 1;
        } else {
            return Err(Error::Degenerate {
                eigenvalue: lambda,
                tol,
            });
        }
    }
    Ok(sig)
}

/// `k` vectors spanning a subspace of `R^m`.
///
/// `signs` is empty until the frame has been orthonormalized; afterwards
/// `(e_i, e_j) = signs[i] * delta_ij` and timelike vectors come first.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceFrame {
    ambient_dim: usize,
    vectors: Vec<DVector<f64>>,
    signs: Vec<f64>,
}

impl SubspaceFrame {
    pub fn new(ambient_dim: usize, vectors: Vec<DVector<f64>>) -> Result<Self> {
        for v in &vectors {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    got: v.len(),
                });
            }
        }
        Ok(Self {
            ambient_dim,
            vectors,
            signs: Vec::new(),
        })
    }

    /// A frame whose orthonormality is asserted by construction. The claim is
    /// checked by [`SubspaceFrame::check_orthonormal`] wherever it matters.
    pub fn with_signs(ambient_dim: usize, vectors: Vec<DVector<f64>>, signs: Vec<f64>) -> Result<Self> {
        if signs.len() != vectors.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.len(),
                got: signs.len(),
            });
        }
        let mut frame = Self::new(ambient_dim, vectors)?;
        frame.signs = signs;
        Ok(frame)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn is_orthonormalized(&self) -> bool {
        !self.vectors.is_empty() && self.signs.len() == self.vectors.len()
    }

    /// `(timelike, spacelike)` counts of an orthonormalized frame.
    pub fn type_counts(&self) -> (usize, usize) {
        let neg = self.signs.iter().filter(|&&s| s < 0.0).count();
        (neg, self.signs.len() - neg)
    }

    /// Vectors as the columns of an `m x k` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.vectors)
    }

    /// Largest deviation of `(e_i, e_j)` from `signs_i delta_ij`, each entry
    /// measured relative to `|e_i| |e_j|` in the coordinate norm.
    pub fn orthonormal_defect(&self, ip: &InnerProduct) -> f64 {
        let e = self.matrix();
        let g = ip.restrict(&e);
        let norms: Vec<f64> = self.vectors.iter().map(|v| v.norm().max(1.0)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let target = if i == j {
                    self.signs.get(i).copied().unwrap_or(f64::NAN)
                } else {
                    0.0
                };
                worst = worst.max((g[(i, j)] - target).abs() / (norms[i] * norms[j]));
            }
        }
        worst
    }

    pub fn check_orthonormal(&self, ip: &InnerProduct, tol: f64) -> Result<()> {
        if !self.is_orthonormalized() {
            return Err(Error::FrameNotOrthonormal {
                defect: f64::INFINITY,
                tol,
            });
        }
        let defect = self.orthonormal_defect(ip);
        if defect.is_nan() || defect > tol {
            return Err(Error::FrameNotOrthonormal { defect, tol });
        }
        Ok(())
    }

    /// Vectors as plain coordinate lists (for reports).
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.vectors.iter().map(|v| v.iter().copied().collect()).collect()
    }
}

/// Orthonormalize a frame through the eigendecomposition of its restricted
/// Gram matrix.
///
/// Columns are first scaled to unit coordinate length, so `tol` bounds the
/// restricted-Gram eigenvalues independently of the input scale. Output
/// vectors are ordered by eigenvalue, which puts timelike vectors first.
pub fn orthonormalize(frame: &SubspaceFrame, ip: &InnerProduct, tol: f64) -> Result<SubspaceFrame> {
    if frame.ambient_dim != ip.dim() {
        return Err(Error::DimensionMismatch {
            expected: ip.dim(),
            got: frame.ambient_dim,
        });
    }
    let k = frame.len();
    if k == 0 {
        return Err(Error::RankDeficient { rank: 0, count: 0 });
    }
    let mut e = frame.matrix();
    for mut col in e.column_iter_mut() {
        let n = col.norm();
        if n == 0.0 {
            return Err(Error::RankDeficient { rank: k - 1, count: k });
        }
        col /= n;
    }
    let rank = rank_with_tol(&e, RANK_TOL);
    if rank < k {
        return Err(Error::RankDeficient { rank, count: k });
    }

    let eig = SymmetricEigen::new(ip.restrict(&e));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut vectors = Vec::with_capacity(k);
    let mut signs = Vec::with_capacity(k);
    for &idx in &order {
        let lambda = eig.eigenvalues[idx];
        if lambda.abs() <= tol {
            return Err(Error::DegenerateSubspace {
                eigenvalue: lambda,
                tol,
            });
        }
        let q = eig.eigenvectors.column(idx);
        vectors.push(&e * q / lambda.abs().sqrt());
        signs.push(lambda.signum());
    }
    Ok(SubspaceFrame {
        ambient_dim: frame.ambient_dim,
        vectors,
        signs,
    })
}

/// Orthonormalized `ip`-orthogonal complement of a nondegenerate frame.
pub fn orthogonal_complement(frame: &SubspaceFrame, ip: &InnerProduct, tol: f64) -> Result<SubspaceFrame> {
    let m = ip.dim();
    let k = frame.len();
    if k >= m {
        return Err(Error::InvalidArgument(format!(
            "frame of {k} vectors has no proper complement in dimension {m}"
        )));
    }
    // kernel of E^T G, read off the trailing right singular vectors
    let constraint = frame.matrix().transpose() * ip.gram();
    let mut padded = DMatrix::zeros(m, m);
    padded.rows_mut(0, k).copy_from(&constraint);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let basis: Vec<DVector<f64>> = order[k..]
        .iter()
        .map(|&i| v_t.row(i).transpose().into_owned())
        .collect();
    orthonormalize(&SubspaceFrame::new(m, basis)?, ip, tol)
}

/// Number of singular values above `tol` times the largest one.
pub fn rank_with_tol(a: &DMatrix<f64>, tol: f64) -> usize {
    rank_with_floor(a, tol, 0.0)
}

/// Like [`rank_with_tol`], but singular values are compared against
/// `tol * max(sigma_max, floor)`.
///
/// `floor` is the magnitude of the quantities that were summed to produce
/// `a`; a matrix that is zero up to cancellation roundoff then has rank 0.
pub fn rank_with_floor(a: &DMatrix<f64>, tol: f64, floor: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let scale = smax.max(floor);
    if scale == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * scale).count()
}

/// Jordan normal form of a nilpotent operator with eigenvalue 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JordanPartition {
    /// Block sizes in non-increasing order.
    pub blocks: Vec<usize>,
}

impl JordanPartition {
    /// `rank` blocks of size 2 and the rest of size 1; `None` if `2 rank > m`.
    pub fn two_step(m: usize, rank: usize) -> Option<Self> {
        if 2 * rank > m {
            return None;
        }
        let mut blocks = vec![2; rank];
        blocks.extend(std::iter::repeat_n(1, m - 2 * rank));
        Some(Self { blocks })
    }

    pub fn eigenvalue(&self) -> f64 {
        0.0
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn count(&self, size: usize) -> usize {
        self.blocks.iter().filter(|&&b| b == size).count()
    }
}

/// `|A^2|_F <= tol * max(1, |A|_F^2)`, returning the ratio `|A^2| / max(1, |A|^2)`.
pub fn nilpotency_ratio(a: &DMatrix<f64>) -> f64 {
    let sq = (a * a).norm();
    sq / a.norm_squared().max(1.0)
}

/// Jordan form of a 2-step nilpotent matrix: `rank` blocks of size 2, the
/// rest of size 1.
pub fn jordan_form_nilpotent(a: &DMatrix<f64>, nilpotent_tol: f64, rank_tol: f64) -> Result<JordanPartition> {
    jordan_form_nilpotent_with_floor(a, nilpotent_tol, rank_tol, 0.0)
}

pub fn jordan_form_nilpotent_with_floor(
    a: &DMatrix<f64>,
    nilpotent_tol: f64,
    rank_tol: f64,
    floor: f64,
) -> Result<JordanPartition> {
    let m = a.nrows();
    let ratio = nilpotency_ratio(a);
    if ratio.is_nan() || ratio > nilpotent_tol {
        let bound = nilpotent_tol * a.norm_squared().max(1.0);
        return Err(Error::NotNilpotent {
            square_norm: (a * a).norm(),
            bound,
        });
    }
    let rank = rank_with_floor(a, rank_tol, floor);
    // A^2 = 0 forces rank <= m/2; anything else is numerical noise in A^2
    JordanPartition::two_step(m, rank).ok_or(Error::NotNilpotent {
        square_norm: (a * a).norm(),
        bound: nilpotent_tol * a.norm_squared().max(1.0),
    })
}
