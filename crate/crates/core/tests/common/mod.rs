//! Test-side oracles. Nothing here calls the library routines it is used to
//! check: metrics are assembled by hand, Hessians are written out, and the
//! Jacobi form of a subspace is built from the g-orthogonal projector.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use osserman_lab::curvature::CurvatureTensor;
use osserman_lab::polynomial::{Polynomial, Term};
use osserman_lab::psi_fields::PsiField;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Monomials as `(exponents, coefficient)`.
pub type Monomials = Vec<(Vec<u32>, f64)>;

pub fn eval_monomials(terms: &Monomials, x: &[f64]) -> f64 {
    terms
        .iter()
        .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
        .sum()
}

pub fn to_polynomial(dim: usize, terms: &Monomials) -> Polynomial {
    Polynomial::from_terms(
        dim,
        terms.iter().map(|(e, c)| Term {
            exponents: e.clone(),
            coefficient: *c,
        }),
    )
    .unwrap()
}

/// Upper-triangular components of a random symmetric field, each a few
/// monomials of total degree at most `max_degree`.
pub struct RandomPsi {
    pub p: usize,
    pub entries: Vec<(usize, usize, Monomials)>,
}

impl RandomPsi {
    pub fn draw(rng: &mut ChaCha8Rng, p: usize, max_degree: u32) -> Self {
        let mut entries = Vec::new();
        for i in 0..p {
            for j in i..p {
                let n = rng.gen_range(1..=4);
                let terms = (0..n)
                    .map(|_| {
                        let mut e = vec![0u32; p];
                        let deg = rng.gen_range(0..=max_degree);
                        for _ in 0..deg {
                            e[rng.gen_range(0..p)] += 1;
                        }
                        (e, rng.gen_range(-1.0..1.0))
                    })
                    .collect();
                entries.push((i, j, terms));
            }
        }
        Self { p, entries }
    }

    pub fn field(&self) -> PsiField {
        let entries = self
            .entries
            .iter()
            .map(|(i, j, t)| (*i, *j, to_polynomial(self.p, t)))
            .collect();
        PsiField::from_upper(self.p, entries).unwrap()
    }

    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.p, self.p);
        for (i, j, t) in &self.entries {
            let v = eval_monomials(t, x);
            m[(*i, *j)] = v;
            m[(*j, *i)] = v;
        }
        m
    }

    /// Gram matrix `[[psi, I, 0], [I, 0, 0], [0, 0, D]]` with `u` timelike
    /// and `v` spacelike flat directions in `D`.
    pub fn gram(&self, point: &[f64], u: usize, v: usize) -> DMatrix<f64> {
        let p = self.p;
        let m = 2 * p + u + v;
        let mut g = DMatrix::zeros(m, m);
        g.view_mut((0, 0), (p, p)).copy_from(&self.value(&point[..p]));
        for i in 0..p {
            g[(i, p + i)] = 1.0;
            g[(p + i, i)] = 1.0;
        }
        for k in 0..u + v {
            g[(2 * p + k, 2 * p + k)] = if k < u { -1.0 } else { 1.0 };
        }
        g
    }
}

/// `B_ab = sum_jk R_{a j k b} P_jk` with `P = E (E^T G E)^{-1} E^T`, which
/// depends on the span of the columns of `E` and not on the chosen basis.
pub fn projector_form(rt: &CurvatureTensor, gram: &DMatrix<f64>, vectors: &[DVector<f64>]) -> DMatrix<f64> {
    let e = DMatrix::from_columns(vectors);
    let restricted = e.transpose() * gram * &e;
    let inv = restricted.try_inverse().expect("degenerate subspace");
    let proj = &e * inv * e.transpose();
    let m = rt.dim();
    DMatrix::from_fn(m, m, |a, b| {
        let mut s = 0.0;
        for j in 0..m {
            for k in 0..m {
                s += rt.get(a, j, k, b) * proj[(j, k)];
            }
        }
        s
    })
}

/// Numerical rank from singular values above `rel * scale`.
pub fn svd_rank(a: &DMatrix<f64>, rel: f64, scale: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let floor = rel * scale.max(sv.max());
    sv.iter().filter(|s| **s > floor).count()
}

/// `H(a, a) H(b, c) - H(a, b) H(a, c)`.
pub fn hessian_identity(h: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let hq = |u: &DVector<f64>, w: &DVector<f64>| (u.transpose() * h * w)[(0, 0)];
    hq(a, a) * hq(b, c) - hq(a, b) * hq(a, c)
}

pub fn normal_vector(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    use rand_distr::{Distribution, StandardNormal};
    DVector::from_fn(m, |_, _| StandardNormal.sample(rng))
}

pub fn uniform_point(rng: &mut ChaCha8Rng, p: usize, half: f64) -> Vec<f64> {
    (0..p).map(|_| rng.gen_range(-half..half)).collect()
}

/// Convex potentials with hand-written Hessians.
pub struct Potential {
    pub name: &'static str,
    pub p: usize,
    pub terms: Monomials,
    pub hessian: fn(&[f64]) -> DMatrix<f64>,
}

pub fn convex_potentials() -> Vec<Potential> {
    vec![
        Potential {
            name: "sum x_i^2 / 2 (p = 2)",
            p: 2,
            terms: vec![(vec![2, 0], 0.5), (vec![0, 2], 0.5)],
            hessian: |_| DMatrix::identity(2, 2),
        },
        Potential {
            name: "sum x_i^2 / 2 + x_i^4 / 12 (p = 3)",
            p: 3,
            terms: (0..3)
                .flat_map(|i| {
                    let mut e2 = vec![0; 3];
                    e2[i] = 2;
                    let mut e4 = vec![0; 3];
                    e4[i] = 4;
                    [(e2, 0.5), (e4, 1.0 / 12.0)]
                })
                .collect(),
            hessian: |x| DMatrix::from_diagonal(&DVector::from_fn(3, |i, _| 1.0 + x[i] * x[i])),
        },
        Potential {
            name: "(x1 + 2 x2 - x3)^2 / 2 + |x|^2 / 2 + (x1 + x2)^4 / 12 (p = 3)",
            p: 3,
            terms: {
                let mut t: Monomials = vec![
                    // (x1 + 2 x2 - x3)^2 / 2
                    (vec![2, 0, 0], 0.5),
                    (vec![0, 2, 0], 2.0),
                    (vec![0, 0, 2], 0.5),
                    (vec![1, 1, 0], 2.0),
                    (vec![1, 0, 1], -1.0),
                    (vec![0, 1, 1], -2.0),
                    // |x|^2 / 2
                    (vec![2, 0, 0], 0.5),
                    (vec![0, 2, 0], 0.5),
                    (vec![0, 0, 2], 0.5),
                ];
                // (x1 + x2)^4 / 12
                for (k, binom) in [1.0, 4.0, 6.0, 4.0, 1.0].iter().enumerate() {
                    t.push((vec![4 - k as u32, k as u32, 0], binom / 12.0));
                }
                t
            },
            hessian: |x| {
                let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
                let w = DVector::from_vec(vec![1.0, 1.0, 0.0]);
                let s = x[0] + x[1];
                &v * v.transpose() + DMatrix::identity(3, 3) + &w * w.transpose() * (s * s)
            },
        },
    ]
}

/// Rank of the projector-route form `P = E C E^T`, `C = (E^T G E)^{-1}`.
/// The floor scales with `sum_jk |R_{a j k b}| (|E| |C| |E|^T)_jk`, the size
/// of the terms before they cancel, so exact cancellations read as zero.
pub fn projector_rank(rt: &CurvatureTensor, gram: &DMatrix<f64>, vectors: &[DVector<f64>], rel: f64) -> usize {
    let e = DMatrix::from_columns(vectors);
    let inv = (e.transpose() * gram * &e).try_inverse().expect("degenerate subspace");
    let ea = e.abs();
    let weight = &ea * inv.abs() * ea.transpose();
    let m = rt.dim();
    let size = DMatrix::from_fn(m, m, |a, b| {
        let mut s = 0.0;
        for j in 0..m {
            for k in 0..m {
                s += rt.get(a, j, k, b).abs() * weight[(j, k)];
            }
        }
        s
    });
    svd_rank(&projector_form(rt, gram, vectors), rel, size.norm())
}

/// `(J(X) b, c)` on the X-block as given by the Hessian: the `p x p` matrix
/// `H(X, X) H - (H X)(H X)^T`.
pub fn hessian_form(h: &DMatrix<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let hx = h * x;
    h * (x.transpose() * &hx)[(0, 0)] - &hx * hx.transpose()
}
