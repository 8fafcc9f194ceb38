//! Products `M x R^(u,v)` with a flat pseudo-Euclidean factor.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::curvature::MetricGPsi;
use crate::error::{Error, Result};
use crate::grassmann::TypePair;
use crate::pseudo_linalg::{orthogonal_complement, Signature, SubspaceFrame, ORTHO_TOL};
use crate::psi_fields::PsiField;

#[derive(Debug, Clone)]
pub struct ProductSpec {
    pub psi: PsiField,
    /// Timelike flat directions.
    pub u: usize,
    /// Spacelike flat directions.
    pub v: usize,
}

impl ProductSpec {
    pub fn signature(&self) -> Signature {
        let p = self.psi.dim();
        Signature::new(p + self.u, p + self.v)
    }

    pub fn dim(&self) -> usize {
        2 * self.psi.dim() + self.u + self.v
    }
}

pub fn product_metric(spec: &ProductSpec) -> Result<MetricGPsi> {
    if spec.psi.dim() < 2 {
        return Err(Error::InvalidArgument(format!(
            "curved factor needs p >= 2, got {}",
            spec.psi.dim()
        )));
    }
    Ok(MetricGPsi::with_flat_factor(
        spec.psi.clone(),
        Signature::new(spec.u, spec.v),
    ))
}

/// Rank of `J(pi)` predicted from the dimension of the X-projection of `pi`.
pub fn rank_formula(dim_rho: usize, p: usize) -> usize {
    match dim_rho {
        0 => 0,
        1 => p - 1,
        _ => p,
    }
}

/// Which rule of the case table decided an expected verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseRule {
    /// `(r, 0)` with no timelike flat directions.
    PureTimelike,
    /// `(0, s)` with no spacelike flat directions.
    PureSpacelike,
    /// `(r, 0)` with `u > 0` and `r >= u + 2`.
    TimelikeBeyondFlat,
    /// `(0, s)` with `v > 0` and `s >= v + 2`.
    SpacelikeBeyondFlat,
    /// `(r, 0)` with `u > 0` and `r <= u + 1`.
    TimelikeAbsorbedByFlat,
    /// `(0, s)` with `v > 0` and `s <= v + 1`.
    SpacelikeAbsorbedByFlat,
    /// Both counts strictly between the extremes.
    Mixed,
}

impl CaseRule {
    pub fn expected_jordan(self) -> bool {
        matches!(
            self,
            CaseRule::PureTimelike
                | CaseRule::PureSpacelike
                | CaseRule::TimelikeBeyondFlat
                | CaseRule::SpacelikeBeyondFlat
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedVerdict {
    pub pair: TypePair,
    pub expected_jordan: bool,
    pub rule: CaseRule,
    /// The rule was applied to the dual pair.
    pub via_dual: bool,
}

fn timelike_rule(r: usize, u: usize) -> CaseRule {
    if u == 0 {
        CaseRule::PureTimelike
    } else if r >= u + 2 {
        CaseRule::TimelikeBeyondFlat
    } else {
        CaseRule::TimelikeAbsorbedByFlat
    }
}

fn spacelike_rule(s: usize, v: usize) -> CaseRule {
    if v == 0 {
        CaseRule::PureSpacelike
    } else if s >= v + 2 {
        CaseRule::SpacelikeBeyondFlat
    } else {
        CaseRule::SpacelikeAbsorbedByFlat
    }
}

/// Expected Jordan-Osserman verdict for `pair` on `M x R^(u,v)` with `M` of
/// dimension `2p`. With `u = v = 0` this is the table for `M` itself.
pub fn theorem17_case(pair: &TypePair, p: usize, u: usize, v: usize) -> Result<ExpectedVerdict> {
    let ambient = Signature::new(p + u, p + v);
    if pair.ambient != ambient || !pair.is_admissible() {
        return Err(Error::NotAdmissible {
            timelike: pair.timelike,
            spacelike: pair.spacelike,
            neg: ambient.neg,
            pos: ambient.pos,
        });
    }
    let (r, s) = (pair.timelike, pair.spacelike);
    let (pbar, qbar) = (ambient.neg, ambient.pos);
    let (rule, via_dual) = if s == 0 {
        (timelike_rule(r, u), false)
    } else if r == 0 {
        (spacelike_rule(s, v), false)
    } else if s == qbar {
        (timelike_rule(pbar - r, u), true)
    } else if r == pbar {
        (spacelike_rule(qbar - s, v), true)
    } else {
        (CaseRule::Mixed, false)
    };
    Ok(ExpectedVerdict {
        pair: *pair,
        expected_jordan: rule.expected_jordan(),
        rule,
        via_dual,
    })
}

/// `pi + span{first a timelike flat axes, first b spacelike flat axes}`,
/// with `pi` given in the curved factor alone.
pub fn embed_frame(frame: &SubspaceFrame, metric: &MetricGPsi, a: usize, b: usize) -> Result<SubspaceFrame> {
    let flat = metric.flat_factor();
    if a > flat.neg || b > flat.pos {
        return Err(Error::CapacityExceeded {
            a,
            b,
            u: flat.neg,
            v: flat.pos,
        });
    }
    let base_dim = 2 * metric.p();
    if frame.ambient_dim() != base_dim {
        return Err(Error::DimensionMismatch {
            expected: base_dim,
            got: frame.ambient_dim(),
        });
    }
    let pad = |v: &DVector<f64>| {
        let mut out = DVector::zeros(metric.dim());
        out.rows_mut(0, base_dim).copy_from(v);
        out
    };
    let mut entries: Vec<(DVector<f64>, f64)> = frame
        .vectors()
        .iter()
        .map(pad)
        .zip(frame.signs().iter().copied())
        .collect();
    entries.extend((0..a).map(|i| (metric.flat_axis(i), -1.0)));
    entries.extend((0..b).map(|i| (metric.flat_axis(flat.neg + i), 1.0)));
    // timelike first, keeping the original order within each sign
    entries.sort_by(|x, y| x.1.total_cmp(&y.1));
    let (vectors, signs) = entries.into_iter().unzip();
    SubspaceFrame::with_signs(metric.dim(), vectors, signs)
}

/// The frame `span{Z_1..Z_a} + span{first b flat axes}` where
/// `Z_i = X~_i - 1/2 d_i^y` (timelike) when `timelike` is set and
/// `Z_i = X~_i + 1/2 d_i^y` (spacelike) otherwise; flat axes are taken
/// with the same causal character.
pub fn pure_frame(
    metric: &MetricGPsi,
    point: &[f64],
    curved: usize,
    flat: usize,
    timelike: bool,
) -> Result<SubspaceFrame> {
    let sig = metric.flat_factor();
    let (cap, offset) = if timelike { (sig.neg, 0) } else { (sig.pos, sig.neg) };
    if curved > metric.p() || flat > cap {
        return Err(Error::InvalidArgument(format!(
            "cannot take {curved} curved and {flat} flat vectors with p = {} and {cap} flat directions",
            metric.p()
        )));
    }
    let tilde = metric.tilde_basis(point)?;
    let half = if timelike { -0.5 } else { 0.5 };
    let mut vectors: Vec<DVector<f64>> = (0..curved).map(|i| &tilde[i] + metric.y_axis(i) * half).collect();
    vectors.extend((0..flat).map(|i| metric.flat_axis(offset + i)));
    let sign = if timelike { -1.0 } else { 1.0 };
    let signs = vec![sign; vectors.len()];
    SubspaceFrame::with_signs(metric.dim(), vectors, signs)
}

/// Labelled frames exhibiting distinct ranks for a pure pair the table
/// marks as absorbed by the flat factor, e.g. `(r, 0)` with `0 < r <= u + 1`.
pub fn absorbed_frames(
    metric: &MetricGPsi,
    point: &[f64],
    count: usize,
    timelike: bool,
) -> Result<Vec<(String, SubspaceFrame)>> {
    let sig = metric.flat_factor();
    let cap = if timelike { sig.neg } else { sig.pos };
    let tag = if timelike { "timelike" } else { "spacelike" };
    if count == 0 || cap == 0 || count > cap + 1 {
        return Err(Error::InvalidArgument(format!(
            "no absorbed {tag} frames of size {count} with {cap} flat directions"
        )));
    }
    let plans = if count <= cap {
        [(1, count - 1), (0, count)]
    } else {
        [(2, cap - 1), (1, cap)]
    };
    plans
        .iter()
        .map(|&(c, f)| Ok((format!("{tag}_pi({c},{f})"), pure_frame(metric, point, c, f, timelike)?)))
        .collect()
}

/// Orthogonal complements of labelled frames.
pub fn dual_frames(
    metric: &MetricGPsi,
    point: &[f64],
    frames: Vec<(String, SubspaceFrame)>,
) -> Result<Vec<(String, SubspaceFrame)>> {
    let g = metric.metric_at(point)?;
    frames
        .into_iter()
        .map(|(label, f)| {
            Ok((
                format!("complement_of_{label}"),
                orthogonal_complement(&f, &g, ORTHO_TOL)?,
            ))
        })
        .collect()
}
