//! The Grouped and Fused graph penalties, and compilation of each
//! (penalty, constraint-variant) subproblem into a canonical convex
//! program the solver understands.
//!
//! Canonical form: a linear objective over the original variables plus
//! splitting variables, equality rows defining the splits, a two-sided
//! bound block expressing the l∞ constraint, and one second-order-cone
//! block per edge for the grouped family.

use crate::graph::FeatureGraph;
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, ArrayView1};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PenaltyError {
    #[error("eta must lie in [0, 1), got {eta}")]
    InvalidEta { eta: f64 },
    #[error("gamma must exceed 1, got {gamma}")]
    InvalidGamma { gamma: f64 },
    #[error("fitting the grouped family requires gamma = 2, got {gamma}")]
    UnsupportedGamma { gamma: f64 },
    #[error("constraint data has {got} rows, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tau must be nonnegative, got {tau}")]
    NegativeTau { tau: f64 },
}

/// Penalty family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyFamily {
    Grouped,
    Fused,
}

/// Which l∞ constraint the subproblems carry: (A) the covariance-
/// weighted residual, or (B) the inverse-premultiplied residual that
/// admits the n×n computational reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintVariant {
    A,
    B,
}

/// Fixed penalty parameters shared by both subproblems of a fit.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyConfig<S: Scalar> {
    pub family: PenaltyFamily,
    pub constraint: ConstraintVariant,
    pub eta: S,
    pub gamma: S,
}

impl<S: Scalar> PenaltyConfig<S> {
    pub fn new(family: PenaltyFamily, constraint: ConstraintVariant, eta: S, gamma: S) -> Self {
        PenaltyConfig {
            family,
            constraint,
            eta,
            gamma,
        }
    }

    /// Defaults from the numerical studies: eta 0.5, gamma 2.
    pub fn default_for(family: PenaltyFamily, constraint: ConstraintVariant) -> Self {
        Self::new(family, constraint, S::cast(0.5), S::cast(2.0))
    }

    pub fn validate(&self) -> Result<(), PenaltyError> {
        if self.eta < S::zero() || self.eta >= S::one() {
            return Err(PenaltyError::InvalidEta {
                eta: self.eta.to_f64c(),
            });
        }
        if self.gamma <= S::one() {
            return Err(PenaltyError::InvalidGamma {
                gamma: self.gamma.to_f64c(),
            });
        }
        Ok(())
    }
}

/// Weighted grouped penalty:
/// `(1-eta) * sum_{i~j} (|v_i|^g / w_i + |v_j|^g / w_j)^{1/g}
///  + eta * sum_{singletons} |v_i|`.
pub fn grouped_penalty_value<S: Scalar>(
    v: &ArrayView1<S>,
    g: &FeatureGraph<S>,
    eta: S,
    gamma: S,
) -> S {
    debug_assert_eq!(v.len(), g.node_count());
    let mut edge_sum = S::zero();
    for &(i, j) in g.edges() {
        let a = v[i].abs().powf(gamma) / g.weight(i);
        let b = v[j].abs().powf(gamma) / g.weight(j);
        edge_sum += (a + b).powf(S::one() / gamma);
    }
    let singleton_sum: S = g.singletons().map(|i| v[i].abs()).sum();
    (S::one() - eta) * edge_sum + eta * singleton_sum
}

/// Fused penalty:
/// `(1-eta) * sum_{i~j} |v_i / w_i - v_j / w_j|
///  + eta * sum_{singletons} |v_i|`.
pub fn fused_penalty_value<S: Scalar>(v: &ArrayView1<S>, g: &FeatureGraph<S>, eta: S) -> S {
    debug_assert_eq!(v.len(), g.node_count());
    let mut edge_sum = S::zero();
    for &(i, j) in g.edges() {
        edge_sum += (v[i] / g.weight(i) - v[j] / g.weight(j)).abs();
    }
    let singleton_sum: S = g.singletons().map(|i| v[i].abs()).sum();
    (S::one() - eta) * edge_sum + eta * singleton_sum
}

/// Penalty value under a config (dispatch on the family).
pub fn penalty_value<S: Scalar>(
    cfg: &PenaltyConfig<S>,
    v: &ArrayView1<S>,
    g: &FeatureGraph<S>,
) -> S {
    match cfg.family {
        PenaltyFamily::Grouped => grouped_penalty_value(v, g, cfg.eta, cfg.gamma),
        PenaltyFamily::Fused => fused_penalty_value(v, g, cfg.eta),
    }
}

/// The linear operator inside the l∞ constraint.
#[derive(Debug, Clone)]
pub enum ConstraintOperator<S: Scalar> {
    /// `rho · I` (variant B).
    ScaledIdentity { rho: S },
    /// `rho · M` with `M` the regularized covariance (variant A).
    ScaledDense { rho: S, matrix: Arc<Array2<S>> },
}

impl<S: Scalar> ConstraintOperator<S> {
    pub fn rho(&self) -> S {
        match self {
            ConstraintOperator::ScaledIdentity { rho } => *rho,
            ConstraintOperator::ScaledDense { rho, .. } => *rho,
        }
    }
}

/// Right-hand data of one subproblem: `||rhs - rho·M·v||_inf <= tau`.
#[derive(Debug, Clone)]
pub struct ConstraintData<S: Scalar> {
    pub rhs: Array1<S>,
    pub operator: ConstraintOperator<S>,
    pub tau: S,
}

/// How one equality row relates splitting variables to the originals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `coeffs·v = z[plus] - z[minus]`; both split parts share one
    /// objective weight, so the row contributes `weight·|coeffs·v|`.
    AbsSplit { plus: usize, minus: usize },
    /// `coeffs·v = z[shadow]`, feeding a cone block.
    ShadowDef { shadow: usize },
}

/// One equality row: sparse coefficients over the original variables on
/// the left, splitting variables implied by `kind` on the right.
#[derive(Debug, Clone)]
pub struct EqRow<S: Scalar> {
    pub cols: Vec<usize>,
    pub coefs: Vec<S>,
    pub kind: RowKind,
}

impl<S: Scalar> EqRow<S> {
    fn dot_originals(&self, v: &ArrayView1<S>) -> S {
        self.cols
            .iter()
            .zip(self.coefs.iter())
            .map(|(&c, &a)| a * v[c])
            .sum()
    }
}

/// `z[t] >= ||(z[a], z[b])||_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeBlock {
    pub t: usize,
    pub a: usize,
    pub b: usize,
}

/// Matrix of the two-sided bound block.
#[derive(Debug, Clone)]
pub enum BoundsMatrix<S: Scalar> {
    /// No rows at all (constraint vacuous, e.g. rho = 0 with small rhs).
    Empty,
    /// Rows are unit vectors: plain box on the originals.
    Identity,
    /// Dense rows over the originals.
    Dense(Arc<Array2<S>>),
}

/// `lower <= (matrix · v) <= upper`, row-wise.
#[derive(Debug, Clone)]
pub struct BoundsBlock<S: Scalar> {
    pub matrix: BoundsMatrix<S>,
    pub lower: Array1<S>,
    pub upper: Array1<S>,
}

impl<S: Scalar> BoundsBlock<S> {
    pub fn row_count(&self) -> usize {
        match self.matrix {
            BoundsMatrix::Empty => 0,
            _ => self.lower.len(),
        }
    }

    /// Maximum violation of the bounds at `v` (0 when feasible).
    pub fn violation(&self, v: &ArrayView1<S>) -> S {
        let rows = self.apply(v);
        let mut worst = S::zero();
        for (r, &g) in rows.iter().enumerate() {
            worst = worst.max(self.lower[r] - g).max(g - self.upper[r]);
        }
        worst
    }

    /// `matrix · v`.
    pub fn apply(&self, v: &ArrayView1<S>) -> Array1<S> {
        match &self.matrix {
            BoundsMatrix::Empty => Array1::zeros(0),
            BoundsMatrix::Identity => v.to_owned(),
            BoundsMatrix::Dense(m) => m.dot(v),
        }
    }
}

/// Canonical convex subproblem: minimize `objective · z` over the
/// splitting variables subject to the equality rows, the two-sided
/// bound block on the originals, sign constraints, and cone blocks.
#[derive(Debug, Clone)]
pub struct ConvexProgram<S: Scalar> {
    pub num_vars: usize,
    pub num_original: usize,
    pub objective: Vec<S>,
    pub nonneg: Vec<bool>,
    pub eq_rows: Vec<EqRow<S>>,
    pub bounds: BoundsBlock<S>,
    pub cones: Vec<ConeBlock>,
    /// Set when the constraint cannot be met by any `v` (rho = 0 with
    /// an oversized rhs); the solver reports infeasible immediately.
    pub certainly_infeasible: bool,
}

impl<S: Scalar> ConvexProgram<S> {
    /// Fills the splitting variables with their objective-optimal values
    /// for a given original vector.
    pub fn complete(&self, v: &ArrayView1<S>) -> Vec<S> {
        let mut z = vec![S::zero(); self.num_vars];
        z[..self.num_original].copy_from_slice(v.as_slice().expect("contiguous view"));
        for row in &self.eq_rows {
            let e = row.dot_originals(v);
            match row.kind {
                RowKind::AbsSplit { plus, minus } => {
                    z[plus] = e.max(S::zero());
                    z[minus] = (-e).max(S::zero());
                }
                RowKind::ShadowDef { shadow } => {
                    z[shadow] = e;
                }
            }
        }
        for cone in &self.cones {
            z[cone.t] = (z[cone.a] * z[cone.a] + z[cone.b] * z[cone.b]).sqrt();
        }
        z
    }

    /// Objective value of the optimal completion at `v` — equals the
    /// closed-form penalty for programs emitted by [`compile_subproblem`].
    pub fn objective_at(&self, v: &ArrayView1<S>) -> S {
        let z = self.complete(v);
        self.objective
            .iter()
            .zip(z.iter())
            .map(|(&c, &x)| c * x)
            .sum()
    }

    /// Nonsmooth objective terms as direct functions of the originals,
    /// for solvers that work in the original space.
    pub fn term_views(&self) -> (Vec<AbsTermView<S>>, Vec<ConeTermView<S>>) {
        let mut abs_terms = Vec::new();
        let mut shadow_sources: std::collections::BTreeMap<usize, (usize, S)> = Default::default();
        for row in &self.eq_rows {
            match row.kind {
                RowKind::AbsSplit { plus, .. } => abs_terms.push(AbsTermView {
                    weight: self.objective[plus],
                    cols: row.cols.clone(),
                    coefs: row.coefs.clone(),
                }),
                RowKind::ShadowDef { shadow } => {
                    debug_assert_eq!(row.cols.len(), 1);
                    shadow_sources.insert(shadow, (row.cols[0], row.coefs[0]));
                }
            }
        }
        let cone_terms = self
            .cones
            .iter()
            .map(|c| {
                let a = shadow_sources[&c.a];
                let b = shadow_sources[&c.b];
                ConeTermView {
                    weight: self.objective[c.t],
                    a,
                    b,
                }
            })
            .collect();
        (abs_terms, cone_terms)
    }
}

/// `weight · |sum coefs·v[cols]|`.
#[derive(Debug, Clone)]
pub struct AbsTermView<S: Scalar> {
    pub weight: S,
    pub cols: Vec<usize>,
    pub coefs: Vec<S>,
}

/// `weight · ||(ca·v[a], cb·v[b])||_2`.
#[derive(Debug, Clone, Copy)]
pub struct ConeTermView<S: Scalar> {
    pub weight: S,
    pub a: (usize, S),
    pub b: (usize, S),
}

/// Folds `||rhs - rho·M·v||_inf <= tau` into two-sided bounds on `M·v`.
fn fold_bounds<S: Scalar>(
    rhs: &Array1<S>,
    rho: S,
    tau: S,
) -> Result<Option<(Array1<S>, Array1<S>)>, PenaltyError> {
    if tau < S::zero() {
        return Err(PenaltyError::NegativeTau { tau: tau.to_f64c() });
    }
    if rho == S::zero() {
        // constraint does not involve v at all
        let worst = rhs.iter().fold(S::zero(), |m, &c| m.max(c.abs()));
        if worst <= tau {
            return Ok(None);
        }
        // signalled through `certainly_infeasible`
        return Ok(Some((Array1::zeros(0), Array1::zeros(0))));
    }
    let lo = rhs.mapv(|c| (c - tau) / rho);
    let hi = rhs.mapv(|c| (c + tau) / rho);
    if rho > S::zero() {
        Ok(Some((lo, hi)))
    } else {
        Ok(Some((hi, lo)))
    }
}

/// Compiles one (penalty, constraint) subproblem into canonical form.
/// The fused family yields a pure linear program; the grouped family
/// (gamma = 2 only) adds one cone block per edge.
pub fn compile_subproblem<S: Scalar>(
    cfg: &PenaltyConfig<S>,
    g: &FeatureGraph<S>,
    cd: &ConstraintData<S>,
) -> Result<ConvexProgram<S>, PenaltyError> {
    cfg.validate()?;
    let p = g.node_count();
    if cd.rhs.len() != p {
        return Err(PenaltyError::DimensionMismatch {
            expected: p,
            got: cd.rhs.len(),
        });
    }
    if cfg.family == PenaltyFamily::Grouped && cfg.gamma != S::cast(2.0) {
        return Err(PenaltyError::UnsupportedGamma {
            gamma: cfg.gamma.to_f64c(),
        });
    }

    let mut objective = vec![S::zero(); p];
    let mut nonneg = vec![false; p];
    let mut eq_rows = Vec::new();
    let mut cones = Vec::new();
    let one_minus_eta = S::one() - cfg.eta;

    let push_var = |objective: &mut Vec<S>, nonneg: &mut Vec<bool>, c: S, nn: bool| -> usize {
        objective.push(c);
        nonneg.push(nn);
        objective.len() - 1
    };

    match cfg.family {
        PenaltyFamily::Fused => {
            for &(i, j) in g.edges() {
                let plus = push_var(&mut objective, &mut nonneg, one_minus_eta, true);
                let minus = push_var(&mut objective, &mut nonneg, one_minus_eta, true);
                eq_rows.push(EqRow {
                    cols: vec![i, j],
                    coefs: vec![S::one() / g.weight(i), -(S::one() / g.weight(j))],
                    kind: RowKind::AbsSplit { plus, minus },
                });
            }
        }
        PenaltyFamily::Grouped => {
            for &(i, j) in g.edges() {
                let sa = push_var(&mut objective, &mut nonneg, S::zero(), false);
                eq_rows.push(EqRow {
                    cols: vec![i],
                    coefs: vec![S::one() / g.weight(i).sqrt()],
                    kind: RowKind::ShadowDef { shadow: sa },
                });
                let sb = push_var(&mut objective, &mut nonneg, S::zero(), false);
                eq_rows.push(EqRow {
                    cols: vec![j],
                    coefs: vec![S::one() / g.weight(j).sqrt()],
                    kind: RowKind::ShadowDef { shadow: sb },
                });
                let t = push_var(&mut objective, &mut nonneg, one_minus_eta, false);
                cones.push(ConeBlock { t, a: sa, b: sb });
            }
        }
    }
    for i in g.singletons() {
        let plus = push_var(&mut objective, &mut nonneg, cfg.eta, true);
        let minus = push_var(&mut objective, &mut nonneg, cfg.eta, true);
        eq_rows.push(EqRow {
            cols: vec![i],
            coefs: vec![S::one()],
            kind: RowKind::AbsSplit { plus, minus },
        });
    }

    let rho = cd.operator.rho();
    let folded = fold_bounds(&cd.rhs, rho, cd.tau)?;
    let (bounds, certainly_infeasible) = match folded {
        None => (
            BoundsBlock {
                matrix: BoundsMatrix::Empty,
                lower: Array1::zeros(0),
                upper: Array1::zeros(0),
            },
            false,
        ),
        Some((lower, upper)) => {
            if lower.is_empty() {
                (
                    BoundsBlock {
                        matrix: BoundsMatrix::Empty,
                        lower,
                        upper,
                    },
                    true,
                )
            } else {
                let matrix = match &cd.operator {
                    ConstraintOperator::ScaledIdentity { .. } => BoundsMatrix::Identity,
                    ConstraintOperator::ScaledDense { matrix, .. } => {
                        BoundsMatrix::Dense(Arc::clone(matrix))
                    }
                };
                (BoundsBlock { matrix, lower, upper }, false)
            }
        }
    };

    Ok(ConvexProgram {
        num_vars: objective.len(),
        num_original: p,
        objective,
        nonneg,
        eq_rows,
        bounds,
        cones,
        certainly_infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightRule;
    use ndarray::arr1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn single_edge_graph(p: usize) -> FeatureGraph<f64> {
        FeatureGraph::from_edges(p, &[(0, 1)], &WeightRule::Unit).unwrap()
    }

    #[test]
    fn grouped_zero_vector_is_zero() {
        let g = single_edge_graph(4);
        let v = Array1::<f64>::zeros(4);
        assert_eq!(grouped_penalty_value(&v.view(), &g, 0.5, 2.0), 0.0);
    }

    #[test]
    fn grouped_single_edge_hand_value() {
        let g = single_edge_graph(2);
        let v = arr1(&[3.0, 4.0]);
        let val = grouped_penalty_value(&v.view(), &g, 0.5, 2.0);
        assert!((val - 2.5).abs() < 1e-12);
    }

    #[test]
    fn grouped_singletons_hand_value() {
        // edge on (0,1), nodes 2 and 3 are singletons carrying the mass
        let g = single_edge_graph(4);
        let v = arr1(&[0.0, 0.0, 2.0, -3.0]);
        let val = grouped_penalty_value(&v.view(), &g, 0.5, 2.0);
        assert!((val - 2.5).abs() < 1e-12);
    }

    #[test]
    fn fused_single_edge_hand_value() {
        let g = single_edge_graph(3);
        let v = arr1(&[2.0, 0.0, 3.0]);
        let val = fused_penalty_value(&v.view(), &g, 0.5);
        assert!((val - 2.5).abs() < 1e-12);
    }

    #[test]
    fn fused_piecewise_constant_profile_is_free() {
        // hub with weight 5, leaves weight 1: v proportional to weights
        let edges: Vec<(usize, usize)> = (1..6).map(|l| (0usize, l)).collect();
        let g: FeatureGraph<f64> = FeatureGraph::from_edges(8, &edges, &WeightRule::Degree).unwrap();
        let mut v = Array1::<f64>::zeros(8);
        v[0] = 5.0 * 0.7;
        for l in 1..6 {
            v[l] = 0.7;
        }
        assert!(fused_penalty_value(&v.view(), &g, 0.5).abs() < 1e-12);
        assert_eq!(fused_penalty_value(&Array1::zeros(8).view(), &g, 0.5), 0.0);
    }

    #[test]
    fn grouped_gamma_one_degenerates_to_edge_l1_mass() {
        // disjoint edges, unit weights
        let g: FeatureGraph<f64> =
            FeatureGraph::from_edges(5, &[(0, 1), (2, 3)], &WeightRule::Unit).unwrap();
        let v = arr1(&[1.0, -2.0, 0.5, 0.0, 9.0]);
        // gamma=1 is outside the fitting range but fine for evaluation
        let val = grouped_penalty_value(&v.view(), &g, 0.25, 1.0);
        let expect = 0.75 * (1.0 + 2.0 + 0.5 + 0.0) + 0.25 * 9.0;
        assert!((val - expect).abs() < 1e-12);
    }

    fn random_graph(p: usize, edges: usize, seed: u64) -> FeatureGraph<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut set = std::collections::BTreeSet::new();
        while set.len() < edges {
            let a = rng.gen_range(0..p);
            let b = rng.gen_range(0..p);
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        let list: Vec<(usize, usize)> = set.into_iter().collect();
        FeatureGraph::from_edges(p, &list, &WeightRule::Degree).unwrap()
    }

    #[test]
    fn penalties_are_convex_and_homogeneous() {
        let g = random_graph(9, 6, 40);
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        for trial in 0..50 {
            let u = Array1::from_shape_fn(9, |_| rng.gen_range(-2.0..2.0));
            let v = Array1::from_shape_fn(9, |_| rng.gen_range(-2.0..2.0));
            let t: f64 = rng.gen_range(0.0..1.0);
            let mix = &u * t + &v * (1.0 - t);
            for (val_mix, val_u, val_v) in [
                (
                    grouped_penalty_value(&mix.view(), &g, 0.5, 2.0),
                    grouped_penalty_value(&u.view(), &g, 0.5, 2.0),
                    grouped_penalty_value(&v.view(), &g, 0.5, 2.0),
                ),
                (
                    fused_penalty_value(&mix.view(), &g, 0.5),
                    fused_penalty_value(&u.view(), &g, 0.5),
                    fused_penalty_value(&v.view(), &g, 0.5),
                ),
            ] {
                assert!(
                    val_mix <= t * val_u + (1.0 - t) * val_v + 1e-10,
                    "convexity failed on trial {trial}"
                );
            }
            let c: f64 = rng.gen_range(-3.0..3.0);
            let scaled = &u * c;
            let a = grouped_penalty_value(&scaled.view(), &g, 0.5, 2.0);
            let b = c.abs() * grouped_penalty_value(&u.view(), &g, 0.5, 2.0);
            assert!((a - b).abs() < 1e-10);
            let a = fused_penalty_value(&scaled.view(), &g, 0.5);
            let b = c.abs() * fused_penalty_value(&u.view(), &g, 0.5);
            assert!((a - b).abs() < 1e-10);
        }
    }

    fn identity_cd(rhs: Array1<f64>, rho: f64, tau: f64) -> ConstraintData<f64> {
        ConstraintData {
            rhs,
            operator: ConstraintOperator::ScaledIdentity { rho },
            tau,
        }
    }

    #[test]
    fn compile_fused_no_edges_is_pure_l1() {
        let g: FeatureGraph<f64> = FeatureGraph::empty(4);
        let cfg = PenaltyConfig::default_for(PenaltyFamily::Fused, ConstraintVariant::B);
        let cd = identity_cd(arr1(&[0.5, -0.2, 0.1, 0.0]), 0.9, 0.3);
        let prog = compile_subproblem(&cfg, &g, &cd).unwrap();
        assert!(prog.cones.is_empty());
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for _ in 0..20 {
            let v: Array1<f64> = Array1::from_shape_fn(4, |_| rng.gen_range(-2.0..2.0));
            let l1: f64 = v.iter().map(|x| x.abs()).sum();
            assert!((prog.objective_at(&v.view()) - 0.5 * l1).abs() < 1e-12);
        }
    }

    #[test]
    fn compile_large_tau_makes_zero_feasible() {
        let g = single_edge_graph(3);
        let cfg = PenaltyConfig::default_for(PenaltyFamily::Fused, ConstraintVariant::B);
        let rhs = arr1(&[0.4, -0.3, 0.2]);
        let tau = 0.5; // >= ||rhs||_inf
        let prog = compile_subproblem(&cfg, &g, &identity_cd(rhs, 0.9, tau)).unwrap();
        let zero = Array1::<f64>::zeros(3);
        assert!(prog.bounds.violation(&zero.view()) <= 0.0);
        assert_eq!(prog.objective_at(&zero.view()), 0.0);
    }

    #[test]
    fn compiled_objective_matches_closed_form() {
        let g = random_graph(8, 5, 43);
        let mut rng = ChaCha20Rng::seed_from_u64(44);
        let rhs = Array1::from_shape_fn(8, |_| rng.gen_range(-1.0..1.0));
        for family in [PenaltyFamily::Fused, PenaltyFamily::Grouped] {
            let cfg = PenaltyConfig::default_for(family, ConstraintVariant::B);
            let prog =
                compile_subproblem(&cfg, &g, &identity_cd(rhs.clone(), 0.8, 0.2)).unwrap();
            for _ in 0..30 {
                let v = Array1::from_shape_fn(8, |_| rng.gen_range(-2.0..2.0));
                let closed = penalty_value(&cfg, &v.view(), &g);
                assert!((prog.objective_at(&v.view()) - closed).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bounds_fold_matches_residual_definition() {
        let g = random_graph(6, 4, 45);
        let mut rng = ChaCha20Rng::seed_from_u64(46);
        let dense = {
            let b = Array2::from_shape_fn((6, 6), |_| rng.gen_range(-1.0..1.0));
            let mut s = b.t().dot(&b);
            for i in 0..6 {
                s[[i, i]] += 1.0;
            }
            Arc::new(s)
        };
        for &rho in &[0.9, -0.7] {
            let rhs = Array1::from_shape_fn(6, |_| rng.gen_range(-1.0..1.0));
            let tau = 0.4;
            let cfg = PenaltyConfig::default_for(PenaltyFamily::Fused, ConstraintVariant::A);
            let cd = ConstraintData {
                rhs: rhs.clone(),
                operator: ConstraintOperator::ScaledDense {
                    rho,
                    matrix: Arc::clone(&dense),
                },
                tau,
            };
            let prog = compile_subproblem(&cfg, &g, &cd).unwrap();
            for _ in 0..40 {
                let v = Array1::from_shape_fn(6, |_| rng.gen_range(-1.0..1.0));
                let resid = {
                    let gv = dense.dot(&v);
                    (0..6)
                        .map(|i| (rhs[i] - rho * gv[i]).abs())
                        .fold(0.0f64, f64::max)
                };
                let feasible_direct = resid <= tau + 1e-12;
                let feasible_fold = prog.bounds.violation(&v.view()) <= 1e-12;
                assert_eq!(feasible_direct, feasible_fold, "rho={rho}");
            }
        }
    }

    #[test]
    fn zero_rho_cases() {
        let g = single_edge_graph(2);
        let cfg = PenaltyConfig::default_for(PenaltyFamily::Fused, ConstraintVariant::B);
        let ok = compile_subproblem(&cfg, &g, &identity_cd(arr1(&[0.1, -0.1]), 0.0, 0.2)).unwrap();
        assert!(!ok.certainly_infeasible);
        assert_eq!(ok.bounds.row_count(), 0);
        let bad =
            compile_subproblem(&cfg, &g, &identity_cd(arr1(&[0.5, -0.1]), 0.0, 0.2)).unwrap();
        assert!(bad.certainly_infeasible);
    }

    #[test]
    fn grouped_compile_requires_gamma_two() {
        let g = single_edge_graph(2);
        let cfg = PenaltyConfig::new(PenaltyFamily::Grouped, ConstraintVariant::B, 0.5, 3.0);
        let err = compile_subproblem(&cfg, &g, &identity_cd(arr1(&[0.1, 0.1]), 0.9, 0.1))
            .unwrap_err();
        assert!(matches!(err, PenaltyError::UnsupportedGamma { .. }));
    }

    #[test]
    fn config_validation() {
        let bad = PenaltyConfig::new(PenaltyFamily::Fused, ConstraintVariant::B, 1.0, 2.0);
        assert!(bad.validate().is_err());
        let bad = PenaltyConfig::new(PenaltyFamily::Fused, ConstraintVariant::B, 0.5, 1.0);
        assert!(bad.validate().is_err());
        let good = PenaltyConfig::<f64>::default_for(PenaltyFamily::Grouped, ConstraintVariant::A);
        assert!(good.validate().is_ok());
    }

    #[test]
    fn term_views_reconstruct_objective() {
        let g = random_graph(7, 4, 47);
        let mut rng = ChaCha20Rng::seed_from_u64(48);
        let rhs = Array1::from_shape_fn(7, |_| rng.gen_range(-1.0..1.0));
        for family in [PenaltyFamily::Fused, PenaltyFamily::Grouped] {
            let cfg = PenaltyConfig::default_for(family, ConstraintVariant::B);
            let prog = compile_subproblem(&cfg, &g, &identity_cd(rhs.clone(), 1.0, 0.3)).unwrap();
            let (abs_terms, cone_terms) = prog.term_views();
            let v = Array1::from_shape_fn(7, |_| rng.gen_range(-2.0..2.0));
            let mut total = 0.0;
            for t in &abs_terms {
                let e: f64 = t
                    .cols
                    .iter()
                    .zip(t.coefs.iter())
                    .map(|(&c, &a)| a * v[c])
                    .sum();
                total += t.weight * e.abs();
            }
            for t in &cone_terms {
                let a = t.a.1 * v[t.a.0];
                let b = t.b.1 * v[t.b.0];
                total += t.weight * (a * a + b * b).sqrt();
            }
            assert!((total - prog.objective_at(&v.view())).abs() < 1e-12);
        }
    }
}
