//! Grassmannian scans of higher order Jacobi operators and the explicit
//! frames on which Jordan constancy fails.

use std::collections::BTreeMap;

use nalgebra::{DVector, SymmetricEigen};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{higher_jacobi, jacobi, CurvatureTensor, MetricGPsi};
use crate::error::{Error, Result};
use crate::grassmann::{admissible_pairs, dim_rho_x, sample_subspace, SampleConfig, TypePair};
use crate::product::{
    absorbed_frames, dual_frames, embed_frame, rank_formula, theorem17_case, CaseRule, ExpectedVerdict,
};
use crate::pseudo_linalg::{InnerProduct, Signature, SubspaceFrame, Tolerances};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub sample: SampleConfig,
    pub tol: Tolerances,
    /// Add the explicit counterexample frames for pairs expected to fail.
    pub inject: bool,
    /// Membership of `psi` was established on the scanned region.
    pub certified: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            sample: SampleConfig::default(),
            tol: Tolerances::default(),
            inject: true,
            certified: false,
        }
    }
}

/// One frame kept as evidence, in coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub origin: String,
    pub base_point: Vec<f64>,
    pub signs: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub rank: usize,
    pub dim_rho_x: usize,
    pub nilpotency_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanVerdict {
    pub pair: TypePair,
    /// Random frames scanned.
    pub samples: usize,
    /// Explicit frames added to the random ones.
    pub injected: usize,
    pub spectrum_constant: bool,
    pub max_nilpotency_ratio: f64,
    pub rank_histogram: BTreeMap<usize, usize>,
    pub jordan_constant: bool,
    /// Frames spanning a definite subspace (all signs equal); the two
    /// counters below only look at these, since cancellation between
    /// timelike and spacelike terms is what mixed frames are for.
    pub definite_frames: usize,
    /// Definite frames whose rank is not 0, p - 1 or p.
    pub ranks_outside_trichotomy: usize,
    /// Definite frames whose rank disagrees with the X-projection prediction.
    pub rank_formula_violations: usize,
    pub certified: bool,
    /// One frame for the lowest and one for the highest rank seen.
    pub witnesses: Vec<FrameRecord>,
}

impl ScanVerdict {
    /// Combine scans of the same pair, e.g. at different base points.
    pub fn merge(mut self, other: ScanVerdict) -> Result<ScanVerdict> {
        if self.pair != other.pair {
            return Err(Error::InvalidArgument(format!(
                "cannot merge scans of {} and {}",
                self.pair.label(),
                other.pair.label()
            )));
        }
        self.samples += other.samples;
        self.injected += other.injected;
        self.spectrum_constant &= other.spectrum_constant;
        self.max_nilpotency_ratio = self.max_nilpotency_ratio.max(other.max_nilpotency_ratio);
        for (rank, n) in other.rank_histogram {
            *self.rank_histogram.entry(rank).or_default() += n;
        }
        self.jordan_constant = self.rank_histogram.len() == 1;
        self.definite_frames += other.definite_frames;
        self.ranks_outside_trichotomy += other.ranks_outside_trichotomy;
        self.rank_formula_violations += other.rank_formula_violations;
        self.certified &= other.certified;
        let mut pool = std::mem::take(&mut self.witnesses);
        pool.extend(other.witnesses);
        self.witnesses = extreme_witnesses(pool);
        Ok(self)
    }
}

fn extreme_witnesses(pool: Vec<FrameRecord>) -> Vec<FrameRecord> {
    let mut by_rank: BTreeMap<usize, FrameRecord> = BTreeMap::new();
    for rec in pool {
        by_rank.entry(rec.rank).or_insert(rec);
    }
    let mut out: Vec<FrameRecord> = by_rank.first_key_value().map(|(_, r)| r.clone()).into_iter().collect();
    if by_rank.len() > 1 {
        out.extend(by_rank.last_key_value().map(|(_, r)| r.clone()));
    }
    out
}

struct Evaluated {
    origin: String,
    frame: SubspaceFrame,
    rank: usize,
    dim_rho_x: usize,
    ratio: f64,
}

struct Context<'a> {
    metric: &'a MetricGPsi,
    point: Vec<f64>,
    g: InnerProduct,
    rt: CurvatureTensor,
    tol: Tolerances,
}

impl<'a> Context<'a> {
    fn new(metric: &'a MetricGPsi, point: &[f64], tol: Tolerances) -> Result<Self> {
        let point = metric.point(point)?;
        let g = metric.metric_at(&point)?;
        let rt = metric.curvature_closed(&point)?;
        Ok(Self {
            metric,
            point,
            g,
            rt,
            tol,
        })
    }

    fn evaluate(&self, origin: String, frame: SubspaceFrame) -> Result<Evaluated> {
        let j = higher_jacobi(&self.rt, &self.g, &frame, self.tol.ortho)?;
        Ok(Evaluated {
            origin,
            rank: j.rank(self.tol.rank),
            dim_rho_x: dim_rho_x(&frame, self.metric, self.tol.rank),
            ratio: j.nilpotency_ratio(),
            frame,
        })
    }

    fn record(&self, e: &Evaluated) -> FrameRecord {
        FrameRecord {
            origin: e.origin.clone(),
            base_point: self.point.clone(),
            signs: e.frame.signs().to_vec(),
            vectors: e.frame.to_rows(),
            rank: e.rank,
            dim_rho_x: e.dim_rho_x,
            nilpotency_ratio: e.ratio,
        }
    }
}

/// Seed for one base point, so different points see different samples.
fn point_seed(seed: u64, point: &[f64]) -> u64 {
    let bits: Vec<u64> = point.iter().map(|x| x.to_bits()).collect();
    rng::stream(seed, &bits).next_u64()
}

fn run_scan(
    metric: &MetricGPsi,
    point: &[f64],
    pair: &TypePair,
    cfg: &ScanConfig,
    inject: bool,
) -> Result<ScanVerdict> {
    if pair.ambient != metric.signature() || !pair.is_admissible() {
        let sig = metric.signature();
        return Err(Error::NotAdmissible {
            timelike: pair.timelike,
            spacelike: pair.spacelike,
            neg: sig.neg,
            pos: sig.pos,
        });
    }
    let ctx = Context::new(metric, point, cfg.tol)?;
    let mut frames = if inject {
        injected_frames(metric, &ctx.point, pair, &cfg.tol)?
    } else {
        Vec::new()
    };
    let injected = frames.len();
    let sample_cfg = SampleConfig {
        seed: point_seed(cfg.sample.seed, &ctx.point),
        ..cfg.sample
    };
    let drawn: Vec<Result<SubspaceFrame>> = (0..cfg.sample.count)
        .into_par_iter()
        .map(|i| sample_subspace(&ctx.g, pair, &sample_cfg, i as u64))
        .collect();
    for (i, f) in drawn.into_iter().enumerate() {
        frames.push((format!("sample_{i}"), f?));
    }
    let evaluated: Vec<Result<Evaluated>> = frames
        .into_par_iter()
        .map(|(origin, frame)| ctx.evaluate(origin, frame))
        .collect();
    let evaluated = evaluated.into_iter().collect::<Result<Vec<_>>>()?;

    let p = metric.p();
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    let mut max_ratio: f64 = 0.0;
    let mut definite = 0;
    let mut outside = 0;
    let mut violations = 0;
    let mut exemplars: BTreeMap<usize, &Evaluated> = BTreeMap::new();
    for e in &evaluated {
        *hist.entry(e.rank).or_default() += 1;
        max_ratio = max_ratio.max(e.ratio);
        let signs = e.frame.signs();
        if signs.iter().all(|&s| s == signs[0]) {
            definite += 1;
            if ![0, p - 1, p].contains(&e.rank) {
                outside += 1;
            }
            if e.rank != rank_formula(e.dim_rho_x, p) {
                violations += 1;
            }
        }
        exemplars.entry(e.rank).or_insert(e);
    }
    let witnesses = extreme_witnesses(exemplars.values().map(|e| ctx.record(e)).collect());
    Ok(ScanVerdict {
        pair: *pair,
        samples: cfg.sample.count,
        injected,
        spectrum_constant: max_ratio <= cfg.tol.nilpotent,
        max_nilpotency_ratio: max_ratio,
        jordan_constant: hist.len() == 1,
        rank_histogram: hist,
        definite_frames: definite,
        ranks_outside_trichotomy: outside,
        rank_formula_violations: violations,
        certified: cfg.certified,
        witnesses,
    })
}

/// Sample `J(pi)` over the Grassmannian of `pair` at one base point and
/// record whether every sample is nilpotent. No frames are injected.
pub fn osserman_scan(metric: &MetricGPsi, point: &[f64], pair: &TypePair, cfg: &ScanConfig) -> Result<ScanVerdict> {
    run_scan(metric, point, pair, cfg, false)
}

/// Sample `J(pi)` and histogram its rank. Since every sample must be
/// nilpotent with square zero, the rank fixes the Jordan form; a
/// non-nilpotent sample aborts the scan with `NotNilpotent`.
pub fn jordan_scan(metric: &MetricGPsi, point: &[f64], pair: &TypePair, cfg: &ScanConfig) -> Result<ScanVerdict> {
    let verdict = run_scan(metric, point, pair, cfg, cfg.inject)?;
    if !verdict.spectrum_constant {
        return Err(Error::NotNilpotent {
            square_norm: verdict.max_nilpotency_ratio,
            bound: cfg.tol.nilpotent,
        });
    }
    Ok(verdict)
}

/// `jordan_scan` at each point, merged in the given order.
pub fn jordan_scan_points(
    metric: &MetricGPsi,
    points: &[Vec<f64>],
    pair: &TypePair,
    cfg: &ScanConfig,
) -> Result<ScanVerdict> {
    merge_points(points, |pt| jordan_scan(metric, pt, pair, cfg))
}

/// `osserman_scan` at each point, merged in the given order.
pub fn osserman_scan_points(
    metric: &MetricGPsi,
    points: &[Vec<f64>],
    pair: &TypePair,
    cfg: &ScanConfig,
) -> Result<ScanVerdict> {
    merge_points(points, |pt| osserman_scan(metric, pt, pair, cfg))
}

fn merge_points(points: &[Vec<f64>], scan: impl Fn(&[f64]) -> Result<ScanVerdict>) -> Result<ScanVerdict> {
    let mut iter = points.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("no base points".into()))?;
    let mut acc = scan(first)?;
    for pt in iter {
        acc = acc.merge(scan(pt)?)?;
    }
    Ok(acc)
}

/// The two frames of signature `(1, 1)` with different ranks.
#[derive(Debug, Clone)]
pub struct Type11Witness {
    /// `span{X~_1 - 1/2 d_1^y, X~_1 + 1/2 d_1^y}`, where `J` cancels.
    pub pi1: SubspaceFrame,
    /// `span{eps X~_1 - 1/(2 eps) d_1^y, X~_2 + 1/2 d_2^y}`.
    pub pi2: SubspaceFrame,
    pub rank1: usize,
    pub rank2: usize,
}

fn base_only(metric: &MetricGPsi) -> Result<()> {
    if metric.flat_factor().dim() != 0 {
        return Err(Error::InvalidArgument(
            "explicit counterexamples are built on the curved factor alone".into(),
        ));
    }
    Ok(())
}

pub fn counterexample_type11(metric: &MetricGPsi, point: &[f64], eps: f64, tol: &Tolerances) -> Result<Type11Witness> {
    base_only(metric)?;
    if metric.p() < 2 {
        return Err(Error::InvalidArgument("need p >= 2".into()));
    }
    if !(eps.is_finite() && eps != 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be finite and nonzero, got {eps}"
        )));
    }
    let ctx = Context::new(metric, point, *tol)?;
    let tilde = metric.tilde_basis(&ctx.point)?;
    let (y0, y1) = (metric.y_axis(0), metric.y_axis(1));
    let pi1 = SubspaceFrame::with_signs(
        metric.dim(),
        vec![&tilde[0] - &y0 * 0.5, &tilde[0] + &y0 * 0.5],
        vec![-1.0, 1.0],
    )?;
    let pi2 = SubspaceFrame::with_signs(
        metric.dim(),
        vec![&tilde[0] * eps - &y0 * (0.5 / eps), &tilde[1] + &y1 * 0.5],
        vec![-1.0, 1.0],
    )?;
    let rank1 = ctx.evaluate("pi_1".into(), pi1.clone())?.rank;
    let rank2 = ctx.evaluate("pi_2".into(), pi2.clone())?.rank;
    Ok(Type11Witness { pi1, pi2, rank1, rank2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub alpha_max: f64,
    pub beta_max: f64,
    pub steps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            alpha_max: 1e3,
            beta_max: 1e3,
            steps: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct RankDrop {
    pub alpha: f64,
    pub beta: f64,
    /// Rank of `J` at the located parameters.
    pub rank: usize,
    /// Rank of `J` at the start of the path.
    pub start_rank: usize,
    pub frame: SubspaceFrame,
    pub start_frame: SubspaceFrame,
    pub trace: Vec<PathPoint>,
}

/// `alpha X~_i - 1/(2 alpha) d_i^y` for `i < r` (timelike) followed by
/// `beta X~_j + 1/(2 beta) d_j^y` for the next `s` indices (spacelike).
fn scaled_frame(
    metric: &MetricGPsi,
    tilde: &[DVector<f64>],
    r: usize,
    s: usize,
    alpha: f64,
    beta: f64,
) -> Result<SubspaceFrame> {
    let mut vectors = Vec::with_capacity(r + s);
    for (i, t) in tilde.iter().enumerate().take(r) {
        vectors.push(t * alpha - metric.y_axis(i) * (0.5 / alpha));
    }
    for (i, t) in tilde.iter().enumerate().skip(r).take(s) {
        vectors.push(t * beta + metric.y_axis(i) * (0.5 / beta));
    }
    let mut signs = vec![-1.0; r];
    signs.extend(std::iter::repeat_n(1.0, s));
    SubspaceFrame::with_signs(metric.dim(), vectors, signs)
}

/// Follow `pi(alpha, beta)` from `(1, beta_max)`, where `J` has rank `p`,
/// to `(alpha_max, 1)` and bisect on the extreme eigenvalue of the X-block
/// form that changes sign on the way. When `r <= s` that is the smallest
/// eigenvalue; in the swapped case `s < r` it is the largest.
pub fn counterexample_rank_drop(
    metric: &MetricGPsi,
    point: &[f64],
    r: usize,
    s: usize,
    search: &SearchConfig,
    tol: &Tolerances,
) -> Result<RankDrop> {
    base_only(metric)?;
    let p = metric.p();
    if r == 0 || s == 0 || r + s > p || r.max(s) < 2 {
        return Err(Error::InvalidArgument(format!(
            "rank drop search needs r, s >= 1, max(r, s) >= 2 and r + s <= p; got ({r},{s}) with p = {p}"
        )));
    }
    let ctx = Context::new(metric, point, *tol)?;
    let tilde = metric.tilde_basis(&ctx.point)?;
    // J depends only on the X-projection, so the X-block form along the
    // path is -alpha^2 A + beta^2 B.
    let xform = |i: usize| -> Result<_> { Ok(jacobi(&ctx.rt, &ctx.g, &tilde[i])?.xblock_form(p)) };
    let mut a = nalgebra::DMatrix::zeros(p, p);
    let mut b = nalgebra::DMatrix::zeros(p, p);
    for i in 0..r {
        a += xform(i)?;
    }
    for i in r..r + s {
        b += xform(i)?;
    }
    let use_min = r <= s;
    let path = |t: f64| {
        let alpha = (1.0 - t) + t * search.alpha_max;
        let beta = (1.0 - t) * search.beta_max + t;
        let f = &b * (beta * beta) - &a * (alpha * alpha);
        let eig = SymmetricEigen::new(f).eigenvalues;
        let e = if use_min { eig.min() } else { eig.max() };
        PathPoint {
            t,
            alpha,
            beta,
            eigenvalue: e,
        }
    };
    let (start, end) = (path(0.0), path(1.0));
    let mut trace = vec![start, end];
    if !(start.eigenvalue > 0.0 && end.eigenvalue < 0.0) {
        return Err(Error::SearchFailed(format!(
            "no sign change along the path: {} at the start, {} at the end",
            start.eigenvalue, end.eigenvalue
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..search.steps {
        let mid = 0.5 * (lo + hi);
        let pt = path(mid);
        trace.push(pt);
        if pt.eigenvalue > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let at = path(0.5 * (lo + hi));
    let frame = scaled_frame(metric, &tilde, r, s, at.alpha, at.beta)?;
    let start_frame = scaled_frame(metric, &tilde, r, s, start.alpha, start.beta)?;
    let rank = ctx.evaluate("rank_drop".into(), frame.clone())?.rank;
    let start_rank = ctx.evaluate("rank_drop_start".into(), start_frame.clone())?.rank;
    Ok(RankDrop {
        alpha: at.alpha,
        beta: at.beta,
        rank,
        start_rank,
        frame,
        start_frame,
        trace,
    })
}

/// Explicit frames of type `(r, s)` on the curved factor with different
/// ranks, for `0 < r, s < p`.
fn curved_counterexamples(
    base: &MetricGPsi,
    point: &[f64],
    r: usize,
    s: usize,
    tol: &Tolerances,
) -> Result<Vec<(String, SubspaceFrame)>> {
    let p = base.p();
    if r + s > p {
        let frames = curved_counterexamples(base, point, p - r, p - s, tol)?;
        return dual_frames(base, point, frames);
    }
    if r == 1 && s == 1 {
        let w = counterexample_type11(base, point, 1e-3, tol)?;
        return Ok(vec![("pi_1".into(), w.pi1), ("pi_2".into(), w.pi2)]);
    }
    let drop = counterexample_rank_drop(base, point, r, s, &SearchConfig::default(), tol)?;
    Ok(vec![
        ("rank_drop_start".into(), drop.start_frame),
        ("rank_drop".into(), drop.frame),
    ])
}

/// The explicit frames injected into a scan of `pair`: none when the pair is
/// expected to be Jordan constant, otherwise frames with different ranks.
pub fn injected_frames(
    metric: &MetricGPsi,
    point: &[f64],
    pair: &TypePair,
    tol: &Tolerances,
) -> Result<Vec<(String, SubspaceFrame)>> {
    let (p, flat) = (metric.p(), metric.flat_factor());
    let point = metric.point(point)?;
    let expected = theorem17_case(pair, p, flat.neg, flat.pos)?;
    if expected.expected_jordan {
        return Ok(Vec::new());
    }
    let (r, s) = (pair.timelike, pair.spacelike);
    let sig = metric.signature();
    match expected.rule {
        CaseRule::TimelikeAbsorbedByFlat | CaseRule::SpacelikeAbsorbedByFlat => {
            let timelike = expected.rule == CaseRule::TimelikeAbsorbedByFlat;
            let count = match (timelike, expected.via_dual) {
                (true, false) => r,
                (true, true) => sig.neg - r,
                (false, false) => s,
                (false, true) => sig.pos - s,
            };
            let frames = absorbed_frames(metric, &point, count, timelike)?;
            if expected.via_dual {
                dual_frames(metric, &point, frames)
            } else {
                Ok(frames)
            }
        }
        CaseRule::Mixed => {
            let alpha = r.saturating_sub(flat.neg).max(1);
            let beta = s.saturating_sub(flat.pos).max(1);
            let base = metric.base();
            let base_point = point[..2 * p].to_vec();
            curved_counterexamples(&base, &base_point, alpha, beta, tol)?
                .into_iter()
                .map(|(label, f)| {
                    let (a, b) = (r - alpha, s - beta);
                    let embedded = embed_frame(&f, metric, a, b)?;
                    let label = if a + b == 0 {
                        label
                    } else {
                        format!("{label}+flat({a},{b})")
                    };
                    Ok((label, embedded))
                })
                .collect()
        }
        _ => Ok(Vec::new()),
    }
}

/// The case table over every admissible pair of `M x R^(u,v)`.
pub fn expected_verdicts(p: usize, u: usize, v: usize) -> Result<Vec<ExpectedVerdict>> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("need p >= 2, got {p}")));
    }
    admissible_pairs(Signature::new(p + u, p + v))
        .iter()
        .map(|pair| theorem17_case(pair, p, u, v))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub pair: TypePair,
    pub dual: TypePair,
    pub pair_constant: bool,
    pub dual_constant: bool,
    pub agree: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub checks: Vec<DualityCheck>,
    /// Pairs whose dual was not scanned.
    pub missing: Vec<TypePair>,
    pub mismatches: usize,
}

/// Compare each scanned pair with its dual; every unordered pair once.
pub fn duality_crosscheck(verdicts: &[ScanVerdict]) -> DualityReport {
    let by_pair: BTreeMap<TypePair, bool> = verdicts.iter().map(|v| (v.pair, v.jordan_constant)).collect();
    let mut report = DualityReport::default();
    for (&pair, &constant) in &by_pair {
        let dual = pair.dual();
        if dual < pair {
            continue;
        }
        match by_pair.get(&dual) {
            Some(&dual_constant) => {
                let agree = constant == dual_constant;
                if !agree {
                    report.mismatches += 1;
                }
                report.checks.push(DualityCheck {
                    pair,
                    dual,
                    pair_constant: constant,
                    dual_constant,
                    agree,
                });
            }
            None => report.missing.push(pair),
        }
    }
    for &pair in by_pair.keys() {
        let dual = pair.dual();
        if dual < pair && !by_pair.contains_key(&dual) {
            report.missing.push(pair);
        }
    }
    report.missing.sort();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::{Polynomial, Term};
    use crate::psi_fields::{psi_from_potential, PsiField};

    fn quadratic_psi(p: usize) -> PsiField {
        let terms = (0..p).map(|i| {
            let mut e = vec![0u32; p];
            e[i] = 2;
            Term {
                exponents: e,
                coefficient: 0.5,
            }
        });
        psi_from_potential(&Polynomial::from_terms(p, terms).unwrap()).unwrap()
    }

    fn cfg(count: usize) -> ScanConfig {
        ScanConfig {
            sample: SampleConfig {
                count,
                seed: 7,
                ..SampleConfig::default()
            },
            ..ScanConfig::default()
        }
    }

    fn pair(r: usize, s: usize, m: &MetricGPsi) -> TypePair {
        TypePair::new(r, s, m.signature()).unwrap()
    }

    #[test]
    fn zero_psi_gives_zero_operators() {
        let m = MetricGPsi::new(PsiField::zero(2));
        let v = jordan_scan(&m, &[0.0, 0.0], &pair(1, 1, &m), &cfg(20)).unwrap();
        assert!(v.spectrum_constant);
        assert_eq!(v.rank_histogram.keys().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn pure_pairs_are_constant() {
        let m = MetricGPsi::new(quadratic_psi(3));
        let x = [0.2, -0.1, 0.4];
        let v = jordan_scan(&m, &x, &pair(0, 2, &m), &cfg(50)).unwrap();
        assert!(v.jordan_constant);
        assert_eq!(v.rank_histogram.get(&3), Some(&50));
        let v = jordan_scan(&m, &x, &pair(0, 1, &m), &cfg(50)).unwrap();
        assert_eq!(v.rank_histogram.get(&2), Some(&50));
        assert_eq!(v.witnesses.len(), 1);
        assert_eq!(v.rank_formula_violations, 0);
    }

    #[test]
    fn mixed_pair_is_not_constant() {
        let m = MetricGPsi::new(quadratic_psi(2));
        let v = jordan_scan(&m, &[0.5, 0.1], &pair(1, 1, &m), &cfg(30)).unwrap();
        assert!(!v.jordan_constant);
        assert_eq!(v.injected, 2);
        assert!(v.rank_histogram.contains_key(&0));
        assert_eq!(v.witnesses.len(), 2);
        assert_eq!(v.witnesses[0].origin, "pi_1");
        let plain = osserman_scan(&m, &[0.5, 0.1], &pair(1, 1, &m), &cfg(30)).unwrap();
        assert_eq!(plain.injected, 0);
        assert!(plain.spectrum_constant);
    }

    #[test]
    fn type11_ranks() {
        let m = MetricGPsi::new(quadratic_psi(2));
        let w = counterexample_type11(&m, &[0.0, 0.0], 1e-3, &Tolerances::default()).unwrap();
        assert_eq!((w.rank1, w.rank2), (0, 2));
        let g = m.metric_at(&[0.0; 4]).unwrap();
        w.pi1.check_orthonormal(&g, 1e-12).unwrap();
        let m3 = MetricGPsi::new(quadratic_psi(3));
        let w = counterexample_type11(&m3, &[0.3, 0.1, -0.2], 1e-3, &Tolerances::default()).unwrap();
        assert_eq!(w.rank1, 0);
        assert!(w.rank2 >= 2);
    }

    #[test]
    fn rank_drop_found_both_orientations() {
        let m = MetricGPsi::new(quadratic_psi(3));
        let tol = Tolerances::default();
        let d = counterexample_rank_drop(&m, &[0.0; 3], 1, 2, &SearchConfig::default(), &tol).unwrap();
        assert_eq!(d.start_rank, 3);
        assert!(d.rank < 3);
        let d = counterexample_rank_drop(&m, &[0.1, 0.2, 0.0], 2, 1, &SearchConfig::default(), &tol).unwrap();
        assert!(d.rank < 3 && d.start_rank == 3);
        assert!(counterexample_rank_drop(&m, &[0.0; 3], 1, 1, &SearchConfig::default(), &tol).is_err());
    }

    #[test]
    fn rank_drop_without_sign_change_fails() {
        let m = MetricGPsi::new(PsiField::zero(3));
        let r = counterexample_rank_drop(&m, &[0.0; 3], 1, 2, &SearchConfig::default(), &Tolerances::default());
        assert!(matches!(r, Err(Error::SearchFailed(_))));
    }

    #[test]
    fn expected_table_shape() {
        let e = expected_verdicts(2, 0, 0).unwrap();
        assert_eq!(e.len(), 7);
        let mixed: Vec<_> = e
            .iter()
            .filter(|v| !v.expected_jordan)
            .map(|v| v.pair.label())
            .collect();
        assert_eq!(mixed, vec!["(1,1)"]);
        assert!(expected_verdicts(1, 0, 0).is_err());
    }

    #[test]
    fn duality_report() {
        assert_eq!(duality_crosscheck(&[]), DualityReport::default());
        let m = MetricGPsi::new(quadratic_psi(2));
        let x = [0.1, 0.2];
        let verdicts: Vec<_> = admissible_pairs(m.signature())
            .iter()
            .map(|p| jordan_scan(&m, &x, p, &cfg(20)).unwrap())
            .collect();
        let r = duality_crosscheck(&verdicts);
        assert_eq!(r.mismatches, 0);
        assert!(r.missing.is_empty());
        assert_eq!(r.checks.len(), 4);
        let r = duality_crosscheck(&verdicts[..1]);
        assert_eq!(r.missing.len(), 1);
    }

    #[test]
    fn merge_accumulates() {
        let m = MetricGPsi::new(quadratic_psi(2));
        let pts = vec![vec![0.0, 0.0], vec![0.3, -0.4]];
        let v = jordan_scan_points(&m, &pts, &pair(1, 1, &m), &cfg(10)).unwrap();
        assert_eq!(v.samples, 20);
        assert_eq!(v.injected, 4);
        assert_eq!(v.rank_histogram.values().sum::<usize>(), 24);
        assert!(v.witnesses.len() <= 2);
    }
}
