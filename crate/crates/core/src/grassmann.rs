//! Admissible subspace types and random nondegenerate subspaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::curvature::MetricGPsi;
use crate::error::{Error, Result};
use crate::pseudo_linalg::{
    orthonormalize, rank_with_floor, signature_of, InnerProduct, Signature, SubspaceFrame, ORTHO_TOL,
};
use crate::rng;

/// Signature `(timelike, spacelike)` of a subspace of an ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypePair {
    pub timelike: usize,
    pub spacelike: usize,
    pub ambient: Signature,
}

impl TypePair {
    pub fn new(timelike: usize, spacelike: usize, ambient: Signature) -> Result<Self> {
        let pair = Self {
            timelike,
            spacelike,
            ambient,
        };
        if !pair.is_admissible() {
            return Err(Error::NotAdmissible {
                timelike,
                spacelike,
                neg: ambient.neg,
                pos: ambient.pos,
            });
        }
        Ok(pair)
    }

    /// Nonempty Grassmannian that is not a single point.
    pub fn is_admissible(&self) -> bool {
        let k = self.dim();
        self.timelike <= self.ambient.neg && self.spacelike <= self.ambient.pos && k >= 1 && k < self.ambient.dim()
    }

    pub fn dim(&self) -> usize {
        self.timelike + self.spacelike
    }

    /// The type of orthogonal complements.
    pub fn dual(&self) -> Self {
        Self {
            timelike: self.ambient.neg - self.timelike,
            spacelike: self.ambient.pos - self.spacelike,
            ambient: self.ambient,
        }
    }

    pub fn label(&self) -> String {
        format!("({},{})", self.timelike, self.spacelike)
    }
}

/// All admissible pairs in lexicographic order.
pub fn admissible_pairs(ambient: Signature) -> Vec<TypePair> {
    let mut out = Vec::new();
    for timelike in 0..=ambient.neg {
        for spacelike in 0..=ambient.pos {
            let pair = TypePair {
                timelike,
                spacelike,
                ambient,
            };
            if pair.is_admissible() {
                out.push(pair);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub count: usize,
    pub seed: u64,
    /// Rejected candidate directions tolerated per sample.
    pub max_rejects: usize,
    /// Candidates with `|(v, v)| <= tol * |v|^2` count as null and are rejected.
    pub tol: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            count: 200,
            seed: 0,
            max_rejects: 1000,
            tol: 1e-6,
        }
    }
}

/// Consecutive rejections of one vector before the partial frame is dropped.
const RESTART_STREAK: usize = 40;

/// Draw a random subspace of type `pair` and return an orthonormal frame
/// for it, timelike vectors first.
///
/// Vectors are drawn one at a time from a standard normal in an orthonormal
/// basis of `ip` (so the draw does not depend on the coordinates), projected onto
/// the orthogonal complement of the vectors already accepted, and accepted
/// when their norm has the sign still needed. `index` selects the random
/// stream, so sample `i` is the same regardless of evaluation order.
pub fn sample_subspace(ip: &InnerProduct, pair: &TypePair, cfg: &SampleConfig, index: u64) -> Result<SubspaceFrame> {
    if !pair.is_admissible() {
        return Err(Error::NotAdmissible {
            timelike: pair.timelike,
            spacelike: pair.spacelike,
            neg: pair.ambient.neg,
            pos: pair.ambient.pos,
        });
    }
    let m = ip.dim();
    if m != pair.ambient.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.ambient.dim(),
            got: m,
        });
    }
    let mut rng = rng::stream(
        cfg.seed,
        &[0x73616d70, pair.timelike as u64, pair.spacelike as u64, index],
    );
    let mut wanted: Vec<f64> = std::iter::repeat_n(-1.0, pair.timelike)
        .chain(std::iter::repeat_n(1.0, pair.spacelike))
        .collect();
    wanted.shuffle(&mut rng);

    // columns b_k with (b_k, b_l) = eta_k delta_kl
    let eig = SymmetricEigen::new(ip.gram().clone());
    let mut eta = DVector::zeros(m);
    let mut basis = eig.eigenvectors;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= ORTHO_TOL {
            return Err(Error::Degenerate {
                eigenvalue: lambda,
                tol: ORTHO_TOL,
            });
        }
        eta[k] = lambda.signum();
        basis.column_mut(k).unscale_mut(lambda.abs().sqrt());
    }
    let form = |a: &DVector<f64>, b: &DVector<f64>| a.component_mul(&eta).dot(b);

    let mut vectors: Vec<DVector<f64>> = Vec::with_capacity(wanted.len());
    let mut signs: Vec<f64> = Vec::with_capacity(wanted.len());
    let mut rejects = 0usize;
    let mut streak = 0usize;
    while vectors.len() < wanted.len() {
        let sign = wanted[vectors.len()];
        let mut v: DVector<f64> = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        // two passes of projection keep the accepted set orthogonal to roundoff
        for _ in 0..2 {
            for (e, &s) in vectors.iter().zip(&signs) {
                let c = form(e, &v) * s;
                v -= e * c;
            }
        }
        let euclid = v.norm_squared();
        let norm = form(&v, &v);
        if euclid > 0.0 && norm.abs() > cfg.tol * euclid && norm.signum() == sign {
            vectors.push(v / norm.abs().sqrt());
            signs.push(sign);
            streak = 0;
            continue;
        }
        rejects += 1;
        if rejects > cfg.max_rejects {
            return Err(Error::SamplingExhausted { rejects });
        }
        // a strongly boosted partial frame leaves little room of the needed
        // sign in its complement; start the frame over
        streak += 1;
        if streak >= RESTART_STREAK {
            vectors.clear();
            signs.clear();
            streak = 0;
        }
    }
    let frame = SubspaceFrame::new(m, vectors.iter().map(|z| &basis * z).collect())?;
    let out = orthonormalize(&frame, ip, ORTHO_TOL)?;
    debug_assert_eq!(out.type_counts(), (pair.timelike, pair.spacelike));
    Ok(out)
}

/// Check that the inner product really has the signature the pair assumes.
pub fn check_ambient(ip: &InnerProduct, pair: &TypePair) -> Result<()> {
    let sig = signature_of(ip, ORTHO_TOL)?;
    if sig != pair.ambient {
        return Err(Error::NotAdmissible {
            timelike: pair.timelike,
            spacelike: pair.spacelike,
            neg: sig.neg,
            pos: sig.pos,
        });
    }
    Ok(())
}

/// Dimension of the X-projection of the span of `frame`.
///
/// Singular values of the projected vectors are compared against `tol` times
/// the largest full vector length, so projections that vanish up to roundoff
/// do not count.
pub fn dim_rho_x(frame: &SubspaceFrame, metric: &MetricGPsi, tol: f64) -> usize {
    if frame.is_empty() {
        return 0;
    }
    let p = metric.p();
    let proj = DMatrix::from_fn(p, frame.len(), |i, j| frame.vectors()[j][i]);
    let scale = frame.vectors().iter().map(|v| v.norm()).fold(0.0, f64::max);
    rank_with_floor(&proj, tol, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi_fields::PsiField;

    fn pairs(sig: Signature) -> Vec<(usize, usize)> {
        admissible_pairs(sig)
            .iter()
            .map(|p| (p.timelike, p.spacelike))
            .collect()
    }

    #[test]
    fn admissible_sets() {
        let p22 = pairs(Signature::new(2, 2));
        assert!(p22.contains(&(1, 1)) && p22.contains(&(0, 1)) && p22.contains(&(2, 1)));
        assert!(!p22.contains(&(0, 0)) && !p22.contains(&(2, 2)));
        assert_eq!(p22.len(), 7);
        assert_eq!(pairs(Signature::new(0, 2)), vec![(0, 1)]);
        assert_eq!(pairs(Signature::new(1, 1)), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn admissible_pairs_closed_under_duality() {
        for sig in [Signature::new(2, 2), Signature::new(3, 2), Signature::new(2, 4)] {
            let all = admissible_pairs(sig);
            for pair in &all {
                assert!(all.contains(&pair.dual()));
            }
        }
    }

    #[test]
    fn whole_space_is_not_admissible() {
        assert!(matches!(
            TypePair::new(2, 2, Signature::new(2, 2)),
            Err(Error::NotAdmissible { .. })
        ));
    }

    #[test]
    fn sampled_frames_have_requested_type() {
        let m = MetricGPsi::new(PsiField::zero(2));
        let g = m.metric_at(&[0.0; 4]).unwrap();
        let cfg = SampleConfig::default();
        for pair in admissible_pairs(Signature::new(2, 2)) {
            check_ambient(&g, &pair).unwrap();
            for i in 0..20 {
                let f = sample_subspace(&g, &pair, &cfg, i).unwrap();
                assert_eq!(f.type_counts(), (pair.timelike, pair.spacelike));
                assert!(f.orthonormal_defect(&g) < 1e-10);
                let again = orthonormalize(&f, &g, ORTHO_TOL).unwrap();
                assert_eq!(again.signs(), f.signs());
            }
        }
    }

    #[test]
    fn single_spacelike_vector_is_unit() {
        let m = MetricGPsi::new(PsiField::zero(2));
        let g = m.metric_at(&[0.0; 4]).unwrap();
        let pair = TypePair::new(0, 1, Signature::new(2, 2)).unwrap();
        let f = sample_subspace(&g, &pair, &SampleConfig::default(), 3).unwrap();
        let e = &f.vectors()[0];
        assert!((g.apply(e, e) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = MetricGPsi::new(PsiField::zero(3));
        let g = m.metric_at(&[0.0; 6]).unwrap();
        let pair = TypePair::new(1, 2, Signature::new(3, 3)).unwrap();
        let cfg = SampleConfig {
            seed: 99,
            ..SampleConfig::default()
        };
        assert_eq!(
            sample_subspace(&g, &pair, &cfg, 5).unwrap(),
            sample_subspace(&g, &pair, &cfg, 5).unwrap()
        );
        assert_ne!(
            sample_subspace(&g, &pair, &cfg, 5).unwrap(),
            sample_subspace(&g, &pair, &cfg, 6).unwrap()
        );
    }

    #[test]
    fn exhaustion_is_reported() {
        let g = InnerProduct::diagonal(&[1.0, 1.0, 1.0]);
        // a timelike direction never exists in a definite space
        let pair = TypePair {
            timelike: 1,
            spacelike: 0,
            ambient: Signature::new(1, 2),
        };
        let cfg = SampleConfig {
            max_rejects: 10,
            ..SampleConfig::default()
        };
        assert!(matches!(
            sample_subspace(&g, &pair, &cfg, 0),
            Err(Error::SamplingExhausted { rejects: 11 })
        ));
    }

    #[test]
    fn rho_x_dimensions() {
        let m = MetricGPsi::new(PsiField::zero(2));
        let inside_y = SubspaceFrame::new(4, vec![m.y_axis(0), m.y_axis(1)]).unwrap();
        assert_eq!(dim_rho_x(&inside_y, &m, 1e-9), 0);
        let tb = m.tilde_basis(&[0.0; 4]).unwrap();
        let mixed = SubspaceFrame::new(4, vec![tb[0].clone(), m.y_axis(1)]).unwrap();
        assert_eq!(dim_rho_x(&mixed, &m, 1e-9), 1);
        let g = m.metric_at(&[0.0; 4]).unwrap();
        let pair = TypePair::new(0, 2, Signature::new(2, 2)).unwrap();
        for i in 0..10 {
            let f = sample_subspace(&g, &pair, &SampleConfig::default(), i).unwrap();
            assert_eq!(dim_rho_x(&f, &m, 1e-9), 2);
        }
    }
}
