//! Network-structured sparse canonical correlation analysis.
//!
//! Given two data matrices observed on the same samples and a prior
//! feature network for each, this crate fits sparse canonical vectors
//! under Grouped or Fused graph penalties, tunes the sparsity bounds by
//! V-fold cross-validation, and generates simulation studies for
//! benchmarking selection accuracy.
//!
//! The core pipeline is:
//!
//! 1. [`linalg`] — standardization, thin SVD, and regularized covariance
//!    operators that never form a p×p inverse.
//! 2. [`graph`] — prior feature networks with degree-derived node weights.
//! 3. [`penalty`] — penalty evaluation and compilation of each
//!    subproblem into a canonical convex program.
//! 4. [`solver`] — an operator-splitting solver for the compiled
//!    programs plus an independent small-instance reference oracle.
//! 5. [`scca`] — the alternating fixed-point procedure producing the
//!    sparse component triples, with deflation between components.
//! 6. [`tuning`] — cross-validated cross-search over the sparsity pair.
//! 7. [`simgen`] — scenario generators, multivariate normal sampling,
//!    and the Monte-Carlo study harness.
//!
//! All numeric code is generic over the scalar type via [`Scalar`];
//! concrete `f64` aliases are exported at the crate root.

pub mod graph;
pub mod linalg;
pub mod penalty;
pub mod scalar;
pub mod scca;
pub mod simgen;
pub mod solver;
pub mod tuning;

pub use scalar::Scalar;

/// `f64` alias for [`linalg::DataMatrix`].
pub type DataMatrix64 = linalg::DataMatrix<f64>;
/// `f64` alias for [`linalg::ThinSvd`].
pub type ThinSvd64 = linalg::ThinSvd<f64>;
/// `f64` alias for [`graph::FeatureGraph`].
pub type FeatureGraph64 = graph::FeatureGraph<f64>;
/// `f64` alias for [`penalty::PenaltyConfig`].
pub type PenaltyConfig64 = penalty::PenaltyConfig<f64>;
/// `f64` alias for [`penalty::ConvexProgram`].
pub type ConvexProgram64 = penalty::ConvexProgram<f64>;
/// `f64` alias for [`solver::SolverSettings`].
// pub type SolverSettings64 = solver::SolverSettings<f64>;
/// `f64` alias for [`scca::FitConfig`].
// pub type FitConfig64 = scca::FitConfig<f64>;
/// `f64` alias for [`scca::CcaModel`].
// pub type CcaModel64 = scca::CcaModel<f64>;
/// `f64` alias for [`simgen::ScenarioSpec`].
// pub type ScenarioSpec64 = simgen::ScenarioSpec<f64>;

#[cfg(test)]
mod f32_smoke {
    //! The generic lane compiles and behaves for f32 as well.
    use super::*;

    #[test]
    fn standardize_and_penalty_work_in_f32() {
        let raw = ndarray::arr2(&[[1.0f32, 2.0], [3.0, 1.0], [-1.0, 0.5], [0.0, -2.0]]);
        let m = linalg::DataMatrix::<f32>::standardize(&raw).unwrap();
        assert!(m.is_standardized());
        let g = graph::FeatureGraph::<f32>::from_edges(2, &[(0, 1)], &graph::WeightRule::Degree)
            .unwrap();
        let v = ndarray::arr1(&[3.0f32, 4.0]);
        let val = penalty::grouped_penalty_value(&v.view(), &g, 0.5, 2.0);
        assert!((val - 2.5).abs() < 1e-5);
    }
}
