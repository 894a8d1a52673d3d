//! Seeded problem generators with known solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forward_backward::{CompositeProblem, CompositeTerm, ReferenceOptimum};
use crate::linalg::{Lu, Matrix};
use crate::operators::{AffineOp, MonotoneOp, Quadratic, SubdiffOp};
use crate::partial_inverse::PartialInverseProblem;
use crate::splitting::SumProblem;
use crate::spaces::{Subspace, Vector};
use crate::{Result, Scalar};

fn random_matrix<T: Scalar>(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| T::of(rng.gen_range(-1.0..=1.0)))
}

/// `A = BᵀB/n + (C − Cᵀ)/2` with a random offset. Monotone by construction,
/// generally nonsymmetric.
pub fn random_monotone_affine<T: Scalar>(n: usize, rng: &mut impl Rng) -> AffineOp<T> {
    let b = random_matrix::<T>(n, n, rng);
    let c = random_matrix::<T>(n, n, rng);
    let sym = b.transpose().matmul(&b).scale(T::one() / T::of(n as f64));
    let skew = c.sub(&c.transpose()).scale(T::of(0.5));
    AffineOp::new(sym.add(&skew), Vector::random(n, rng)).expect("constructed operator is monotone")
}

/// Monotone affine operator with a zero at a random point: `b = −Az*`.
pub fn affine_with_solution<T: Scalar>(n: usize, rng: &mut impl Rng) -> (AffineOp<T>, Vector<T>) {
    let a = random_monotone_affine::<T>(n, rng).matrix().add(&Matrix::identity(n).scale(T::of(0.1)));
    let z = Vector::random(n, rng);
    let b = Vector::raw(a.mul_vec(z.as_slice()).into_iter().map(|x| -x).collect());
    (AffineOp::new(a, b).expect("constructed operator is monotone"), z)
}

/// Span of `p` random directions in ℝⁿ.
pub fn random_subspace<T: Scalar>(n: usize, p: usize, rng: &mut impl Rng) -> Subspace<T> {
    let cols: Vec<Vector<T>> = (0..p).map(|_| Vector::random(n, rng)).collect();
    Subspace::span(n, &cols).expect("columns have the ambient dimension")
}

/// Affine `T` with `T(x*) = u*` for random `x* ∈ V`, `u* ∈ V⊥`, `dim V = p`.
pub fn partial_inverse_affine<T: Scalar>(
    n: usize,
    p: usize,
    rng: &mut impl Rng,
) -> (PartialInverseProblem<T>, Vector<T>, Vector<T>) {
    let v = random_subspace::<T>(n, p, rng);
    let xs = v.project(&Vector::random(n, rng)).expect("dimension");
    let us = v.project_complement(&Vector::random(n, rng)).expect("dimension");
    let a = random_monotone_affine::<T>(n, rng).matrix().add(&Matrix::identity(n).scale(T::of(0.1)));
    let ax = Vector::raw(a.mul_vec(xs.as_slice()));
    let op = AffineOp::new(a, &us - &ax).expect("constructed operator is monotone");
    let problem = PartialInverseProblem::new(MonotoneOp::Affine(op), v)
        .and_then(|pr| pr.with_solution(xs.clone(), us.clone()))
        .expect("constructed solution is valid");
    (problem, xs, us)
}

/// `T = N_U` for the line `U = {x : ⟨a, x⟩ = b}` in ℝ² and `V = span{w}`.
pub fn line_intersection_problem<T: Scalar>(a: [T; 2], b: T, w: [T; 2]) -> Result<PartialInverseProblem<T>> {
    let f = SubdiffOp::affine_set(Matrix::from_rows(vec![a.to_vec()])?, Vector::new(vec![b])?)?;
    let v = Subspace::span(2, &[Vector::new(w.to_vec())?])?;
    PartialInverseProblem::new(f.into(), v)
}

/// `m` affine blocks on ℝⁿ with a common zero of the sum: random `x*`,
/// random `u*_i` summing to zero and `T_i(x*) = u*_i`.
pub fn sum_affine<T: Scalar>(m: usize, n: usize, rng: &mut impl Rng) -> (SumProblem<T>, Vector<T>, Vec<Vector<T>>) {
    let xs = Vector::random(n, rng);
    let mut us: Vec<Vector<T>> = (0..m).map(|_| Vector::random(n, rng)).collect();
    let mean = Vector::mean(&us);
    us.iter_mut().for_each(|u| *u = &*u - &mean);
    let ops = us
        .iter()
        .map(|u| {
            let a = random_monotone_affine::<T>(n, rng).matrix().add(&Matrix::identity(n).scale(T::of(0.1)));
            let ax = Vector::raw(a.mul_vec(xs.as_slice()));
            MonotoneOp::Affine(AffineOp::new(a, u - &ax).expect("constructed operator is monotone"))
        })
        .collect();
    let problem = SumProblem::new(ops)
        .and_then(|p| p.with_solution(xs.clone(), us.clone()))
        .expect("constructed solution is valid");
    (problem, xs, us)
}

/// Nonsmooth part of a composite fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiKind {
    Zero,
    /// `τ_i‖x‖₁`
    L1,
    /// Indicator of `[−1, 1]ⁿ`
    Box,
}

/// `m` terms `½xᵀQ_ix + ⟨q_i, x⟩ + φ_i` built backwards from a random
/// minimizer `x*`, subgradients `s_i ∈ ∂φ_i(x*)` and a dual lift `g_i`
/// with `Σg_i = 0`: `q_i = g_i − s_i − Q_ix*`.
pub fn composite_quadratic<T: Scalar>(m: usize, n: usize, kind: PhiKind, rng: &mut impl Rng) -> CompositeProblem<T> {
    // A third of the coordinates sit where φ is nonsmooth.
    let x = Vector::raw(
        Vector::<T>::random(n, rng)
            .as_slice()
            .iter()
            .enumerate()
            .map(|(j, &a)| match kind {
                PhiKind::L1 if j % 3 == 0 => T::zero(),
                PhiKind::Box if j % 3 == 0 => a.signum(),
                _ => a,
            })
            .collect(),
    );
    let phis: Vec<SubdiffOp<T>> = (0..m)
        .map(|_| match kind {
            PhiKind::Zero => SubdiffOp::zero(n),
            PhiKind::L1 => SubdiffOp::l1(T::of(rng.gen_range(0.05..0.5)), n).expect("tau is positive"),
            PhiKind::Box => SubdiffOp::boxed(vec![-T::one(); n], vec![T::one(); n]).expect("valid box"),
        })
        .collect();
    let mut g: Vec<Vector<T>> = (0..m).map(|_| Vector::random(n, rng)).collect();
    let mean = Vector::mean(&g);
    g.iter_mut().for_each(|gi| *gi = &*gi - &mean);
    let terms = phis
        .into_iter()
        .zip(&g)
        .map(|(phi, gi)| {
            let s = Vector::raw(
                x.as_slice()
                    .iter()
                    .enumerate()
                    .map(|(j, &xj)| {
                        let r = T::of(rng.gen_range(0.0..1.0));
                        match &phi {
                            SubdiffOp::L1 { tau, .. } if xj == T::zero() => *tau * (T::of(2.0) * r - T::one()),
                            SubdiffOp::L1 { tau, .. } => *tau * xj.signum(),
                            SubdiffOp::Box { .. } if j % 3 == 0 => r * xj.signum(),
                            _ => T::zero(),
                        }
                    })
                    .collect(),
            );
            let b = random_matrix::<T>(n, n, rng);
            let q = b.transpose().matmul(&b).scale(T::one() / T::of(n as f64)).add(&Matrix::identity(n).scale(T::of(0.1)));
            let qx = Vector::raw(q.mul_vec(x.as_slice()));
            let lin = &(gi - &s) - &qx;
            let f = Quadratic::new(q, lin, T::zero()).expect("constructed Hessian is positive definite");
            CompositeTerm::new(f, phi).expect("dimensions agree")
        })
        .collect();
    let p = CompositeProblem::new(terms).expect("Hessians are positive definite");
    let value = p.objective(&x);
    p.with_reference(ReferenceOptimum { x, value, dual: Some(g) }).expect("constructed optimum is valid")
}

fn least_squares_blocks<T: Scalar>(m: usize, rows: usize, n: usize, rng: &mut impl Rng) -> Vec<(Matrix<T>, Vector<T>)> {
    (0..m)
        .map(|_| {
            let a = random_matrix::<T>(rows, n, rng);
            let b = Vector::random(rows, rng);
            (a, b)
        })
        .collect()
}

/// `Σ ½‖A_ix − b_i‖²` over `m` blocks of `n` rows each, `φ_i = 0`. The
/// minimizer comes from the normal equations.
pub fn consensus_least_squares<T: Scalar>(m: usize, n: usize, seed: u64) -> Result<CompositeProblem<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = least_squares_blocks::<T>(m, n, n, &mut rng);
    let terms = blocks
        .iter()
        .map(|(a, b)| CompositeTerm::new(Quadratic::least_squares(a, b)?, SubdiffOp::zero(n)))
        .collect::<Result<Vec<_>>>()?;
    let mut normal = Matrix::zeros(n, n);
    let mut rhs = Vector::zeros(n);
    for (a, b) in &blocks {
        normal = normal.add(&a.transpose().matmul(a));
        rhs.axpy(T::one(), &Vector::raw(a.tr_mul_vec(b.as_slice())));
    }
    let x = Vector::raw(Lu::factor(&normal)?.solve(rhs.as_slice()));
    let p = CompositeProblem::new(terms)?;
    let dual: Vec<Vector<T>> = p.terms().iter().map(|t| t.f.gradient(&x)).collect();
    let value = p.objective(&x);
    p.with_reference(ReferenceOptimum { x, value, dual: Some(dual) })
}

/// `½‖Ax − b‖² + τ‖x‖₁` with the rows of `A` (`3n/2` in total, at least
/// `n`) and `τ` split evenly across `m` terms. `b` comes from a sparse
/// planted signal plus noise and `τ = 0.1‖Aᵀb‖_∞`. No reference optimum
/// is attached.
pub fn consensus_lasso<T: Scalar>(m: usize, n: usize, seed: u64) -> Result<CompositeProblem<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (3 * n / 2).div_ceil(m).max(1);
    let a_blocks: Vec<Matrix<T>> = (0..m).map(|_| random_matrix::<T>(rows, n, &mut rng)).collect();
    let planted = Vector::raw(
        (0..n).map(|j| if j % 4 == 0 { T::of(rng.gen_range(-2.0..2.0)) } else { T::zero() }).collect(),
    );
    let mut atb = Vector::zeros(n);
    let mut data = Vec::with_capacity(m);
    for a in a_blocks {
        let noise = Vector::<T>::random(rows, &mut rng).scaled(T::of(0.05));
        let b = &Vector::raw(a.mul_vec(planted.as_slice())) + &noise;
        atb.axpy(T::one(), &Vector::raw(a.tr_mul_vec(b.as_slice())));
        data.push((a, b));
    }
    let tau = T::of(0.1) * atb.norm_inf() / T::of(m as f64);
    let terms = data
        .iter()
        .map(|(a, b)| CompositeTerm::new(Quadratic::least_squares(a, b)?, SubdiffOp::l1(tau, n)?))
        .collect::<Result<Vec<_>>>()?;
    CompositeProblem::new(terms)
}
