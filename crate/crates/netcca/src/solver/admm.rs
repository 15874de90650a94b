//! Operator-splitting solver over the canonical form.
//!
//! The splitting is `min c^T z + I_C(w)  s.t.  M z = w` with
//! `M = [I; A_eq; G]`: a full identity copy, the equality rows, and the
//! dense bound rows (identity bound rows are folded into the z-copy
//! block instead of materializing G). The z-update solves one SPD
//! system whose matrix `M^T M` does not depend on the penalty parameter,
//! so a single Cholesky factorization serves the whole solve and any
//! warm-started re-solves on the same structure.
//!
//! Over-relaxation is fixed at 1.5 and the penalty parameter is
//! self-tuned by primal/dual residual balancing.

use super::{Solution, SolveStatus, SolverSettings};
use crate::linalg::{cholesky, cholesky_solve};
use crate::penalty::{BoundsMatrix, ConvexProgram, RowKind};
use crate::scalar::Scalar;
use ndarray::Array2;
use std::sync::Arc;

const OVER_RELAXATION: f64 = 1.5;
const RHO_CHECK_PERIOD: usize = 25;
const RHO_BALANCE_TRIGGER: f64 = 5.0;

/// Per-coordinate projection for the z-copy block.
#[derive(Debug, Clone, Copy)]
enum CoordSet<S> {
    Free,
    NonNeg,
    Box(S, S),
}

fn apply_m<S: Scalar>(
    n: usize,
    eq_rows: &[Vec<(usize, S)>],
    g_dense: &Option<Arc<Array2<S>>>,
    z: &[S],
    out: &mut [S],
) {
    out[..n].copy_from_slice(z);
    for (r, row) in eq_rows.iter().enumerate() {
        let mut acc = S::zero();
        for &(i, c) in row {
            acc += c * z[i];
        }
        out[n + r] = acc;
    }
    if let Some(g) = g_dense {
        let base = n + eq_rows.len();
        let cols = g.ncols();
        for r in 0..g.nrows() {
            let mut acc = S::zero();
            for j in 0..cols {
                acc += g[[r, j]] * z[j];
            }
            out[base + r] = acc;
        }
    }
}

fn apply_mt<S: Scalar>(
    n: usize,
    eq_rows: &[Vec<(usize, S)>],
    g_dense: &Option<Arc<Array2<S>>>,
    y: &[S],
    out: &mut [S],
) {
    out.copy_from_slice(&y[..n]);
    for (r, row) in eq_rows.iter().enumerate() {
        let yr = y[n + r];
        if yr != S::zero() {
            for &(i, c) in row {
                out[i] += c * yr;
            }
        }
    }
    if let Some(g) = g_dense {
        let base = n + eq_rows.len();
        let cols = g.ncols();
        for r in 0..g.nrows() {
            let yr = y[base + r];
            if yr != S::zero() {
                for j in 0..cols {
                    out[j] += g[[r, j]] * yr;
                }
            }
        }
    }
}

/// Reusable solver state bound to one program structure. Re-solving
/// after a bounds-only update warm-starts from the previous iterate.
pub struct SolverWorkspace<S: Scalar> {
    n: usize,
    m_eq: usize,
    m_g: usize,
    eq_rows: Vec<Vec<(usize, S)>>,
    g_dense: Option<Arc<Array2<S>>>,
    chol: Array2<S>,
    coord_sets: Vec<CoordSet<S>>,
    z: Vec<S>,
    w: Vec<S>,
    u: Vec<S>,
    rho: S,
    warm: bool,
    mz: Vec<S>,
    scratch_m: Vec<S>,
    scratch_n: Vec<S>,
}

impl<S: Scalar> SolverWorkspace<S> {
    pub fn new(program: &ConvexProgram<S>) -> Self {
        let n = program.num_vars;
        let p = program.num_original;
        let eq_rows: Vec<Vec<(usize, S)>> = program
            .eq_rows
            .iter()
            .map(|row| {
                let mut entries: Vec<(usize, S)> = row
                    .cols
                    .iter()
                    .zip(row.coefs.iter())
                    .map(|(&c, &a)| (c, a))
                    .collect();
                match row.kind {
                    RowKind::AbsSplit { plus, minus } => {
                        entries.push((plus, -S::one()));
                        entries.push((minus, S::one()));
                    }
                    RowKind::ShadowDef { shadow } => entries.push((shadow, -S::one())),
                }
                entries
            })
            .collect();
        let (g_dense, m_g) = match &program.bounds.matrix {
            BoundsMatrix::Dense(m) => (Some(Arc::clone(m)), m.nrows()),
            _ => (None, 0),
        };

        // P = I + A^T A + G^T G
        let mut pmat = Array2::<S>::eye(n);
        for row in &eq_rows {
            for &(i, ci) in row {
                for &(j, cj) in row {
                    pmat[[i, j]] += ci * cj;
                }
            }
        }
        if let Some(g) = &g_dense {
            let gtg = g.t().dot(g.as_ref());
            for i in 0..p {
                for j in 0..p {
                    pmat[[i, j]] += gtg[[i, j]];
                }
            }
        }
        let chol = cholesky(&pmat).expect("M^T M + I is positive definite");

        let mut coord_sets = vec![CoordSet::Free; n];
        for (i, &nn) in program.nonneg.iter().enumerate() {
            if nn {
                coord_sets[i] = CoordSet::NonNeg;
            }
        }

        let m_eq = eq_rows.len();
        let m_total = n + m_eq + m_g;
        SolverWorkspace {
            n,
            m_eq,
            m_g,
            eq_rows,
            g_dense,
            chol,
            coord_sets,
            z: vec![S::zero(); n],
            w: vec![S::zero(); m_total],
            u: vec![S::zero(); m_total],
            rho: S::one(),
            warm: false,
            mz: vec![S::zero(); m_total],
            scratch_m: vec![S::zero(); m_total],
            scratch_n: vec![S::zero(); n],
        }
    }

    fn project(&self, program: &ConvexProgram<S>, w: &mut [S]) {
        for i in 0..self.n {
            match self.coord_sets[i] {
                CoordSet::Free => {}
                CoordSet::NonNeg => {
                    if w[i] < S::zero() {
                        w[i] = S::zero();
                    }
                }
                CoordSet::Box(lo, hi) => {
                    w[i] = w[i].max(lo).min(hi);
                }
            }
        }
        for cone in &program.cones {
            let t = w[cone.t];
            let a = w[cone.a];
            let b = w[cone.b];
            let s = (a * a + b * b).sqrt();
            if s <= t {
                continue;
            }
            if s <= -t {
                w[cone.t] = S::zero();
                w[cone.a] = S::zero();
                w[cone.b] = S::zero();
            } else {
                let tau = (s + t) / S::cast(2.0);
                w[cone.t] = tau;
                let scale = tau / s;
                w[cone.a] = a * scale;
                w[cone.b] = b * scale;
            }
        }
        for r in 0..self.m_eq {
            w[self.n + r] = S::zero();
        }
        if self.m_g > 0 {
            let base = self.n + self.m_eq;
            for r in 0..self.m_g {
                w[base + r] = w[base + r]
                    .max(program.bounds.lower[r])
                    .min(program.bounds.upper[r]);
            }
        }
    }

    pub fn solve(
        &mut self,
        program: &ConvexProgram<S>,
        settings: &SolverSettings<S>,
    ) -> Solution<S> {
        debug_assert_eq!(program.num_vars, self.n);
        if program.certainly_infeasible || bounds_inverted(program) {
            return Solution {
                primal: vec![S::zero(); self.n],
                objective: S::zero(),
                status: SolveStatus::Infeasible,
                kkt_residual: S::infinity(),
                iterations: 0,
            };
        }
        if matches!(program.bounds.matrix, BoundsMatrix::Empty) {
            let v = ndarray::Array1::<S>::zeros(program.num_original);
            let z = program.complete(&v.view());
            return Solution {
                objective: program.objective_at(&v.view()),
                primal: z,
                status: SolveStatus::Optimal,
                kkt_residual: S::zero(),
                iterations: 0,
            };
        }
        if matches!(program.bounds.matrix, BoundsMatrix::Identity) {
            for i in 0..program.num_original {
                self.coord_sets[i] =
                    CoordSet::Box(program.bounds.lower[i], program.bounds.upper[i]);
            }
        }
        if !self.warm {
            self.z.iter_mut().for_each(|x| *x = S::zero());
            self.u.iter_mut().for_each(|x| *x = S::zero());
            let (z, mz) = (&self.z, &mut self.mz);
            apply_m(self.n, &self.eq_rows, &self.g_dense, z, mz);
            self.w.copy_from_slice(&self.mz);
            let mut w = std::mem::take(&mut self.w);
            self.project(program, &mut w);
            self.w = w;
            self.rho = S::one();
        }

        let tol = settings.tolerance;
        let relax = S::cast(OVER_RELAXATION);
        let mut status = SolveStatus::MaxIterations;
        let mut kkt = S::infinity();
        let mut iterations = settings.max_iterations;
        let m_total = self.n + self.m_eq + self.m_g;

        for iter in 0..settings.max_iterations {
            // z-update: (M^T M) z = M^T (w - u) - c / rho
            for r in 0..m_total {
                self.scratch_m[r] = self.w[r] - self.u[r];
            }
            apply_mt(
                self.n,
                &self.eq_rows,
                &self.g_dense,
                &self.scratch_m,
                &mut self.scratch_n,
            );
            for i in 0..self.n {
                self.scratch_n[i] -= program.objective[i] / self.rho;
            }
            cholesky_solve(&self.chol, &mut self.scratch_n);
            self.z.copy_from_slice(&self.scratch_n);
            apply_m(self.n, &self.eq_rows, &self.g_dense, &self.z, &mut self.mz);

            // over-relaxed w/dual updates; scratch_m keeps the old w
            self.scratch_m.copy_from_slice(&self.w);
            for r in 0..m_total {
                let zhat = relax * self.mz[r] + (S::one() - relax) * self.scratch_m[r];
                self.w[r] = zhat + self.u[r];
            }
            let mut w = std::mem::take(&mut self.w);
            self.project(program, &mut w);
            self.w = w;
            for r in 0..m_total {
                let zhat = relax * self.mz[r] + (S::one() - relax) * self.scratch_m[r];
                self.u[r] += zhat - self.w[r];
            }

            // residuals
            let mut r_prim = S::zero();
            let mut scale_prim = S::zero();
            for r in 0..m_total {
                r_prim = r_prim.max((self.mz[r] - self.w[r]).abs());
                scale_prim = scale_prim.max(self.mz[r].abs()).max(self.w[r].abs());
            }
            for r in 0..m_total {
                self.scratch_m[r] = self.w[r] - self.scratch_m[r];
            }
            apply_mt(
                self.n,
                &self.eq_rows,
                &self.g_dense,
                &self.scratch_m,
                &mut self.scratch_n,
            );
            let mut r_dual = S::zero();
            for i in 0..self.n {
                r_dual = r_dual.max(self.scratch_n[i].abs());
            }
            r_dual = r_dual * self.rho;
            apply_mt(
                self.n,
                &self.eq_rows,
                &self.g_dense,
                &self.u,
                &mut self.scratch_n,
            );
            let mut scale_dual = S::zero();
            for i in 0..self.n {
                scale_dual = scale_dual.max(self.scratch_n[i].abs());
            }
            scale_dual = scale_dual * self.rho;

            let eps_prim = tol + tol * scale_prim;
            let eps_dual = tol + tol * scale_dual;
            if r_prim <= eps_prim && r_dual <= eps_dual {
                status = SolveStatus::Optimal;
                kkt = (r_prim / (S::one() + scale_prim)).max(r_dual / (S::one() + scale_dual));
                iterations = iter + 1;
                break;
            }

            if (iter + 1) % RHO_CHECK_PERIOD == 0 {
                let tiny = S::cast(1e-30);
                let ratio =
                    (r_prim / (scale_prim + tiny)) / ((r_dual / (scale_dual + tiny)) + tiny);
                let trigger = S::cast(RHO_BALANCE_TRIGGER);
                if ratio > trigger || ratio < S::one() / trigger {
                    let old = self.rho;
                    let next = (old * ratio.sqrt()).max(S::cast(1e-6)).min(S::cast(1e6));
                    if next != old {
                        self.rho = next;
                        let rescale = old / next;
                        for r in 0..m_total {
                            self.u[r] *= rescale;
                        }
                    }
                }
            }
            if iter + 1 == settings.max_iterations {
                kkt = (r_prim / (S::one() + scale_prim)).max(r_dual / (S::one() + scale_dual));
            }
        }
        self.warm = true;

        let mut achieved_resid = S::zero();
        for i in 0..m_total {
            achieved_resid = achieved_resid.max((self.mz[i] - self.w[i]).abs());
        }
        let v_raw = ndarray::Array1::from_iter(self.z[..program.num_original].iter().copied());
        let v_polished = polish(program, &v_raw, achieved_resid, tol);
        let z_final = program.complete(&v_polished.view());
        let objective = program.objective_at(&v_polished.view());
        if settings.verbose {
            eprintln!("admm: status={status:?} iters={iterations} kkt={kkt:.3e} obj={objective:.6e}");
        }
        Solution {
            primal: z_final,
            objective,
            status,
            kkt_residual: kkt,
            iterations,
        }
    }
}

fn bounds_inverted<S: Scalar>(program: &ConvexProgram<S>) -> bool {
    program
        .bounds
        .lower
        .iter()
        .zip(program.bounds.upper.iter())
        .any(|(&l, &u)| l > u)
}

/// Sparsity-preferring tie-break: among (near-)equal-objective feasible
/// points, move whole penalty-coupled components to zero when that
/// neither violates the bounds (within the residual already achieved)
/// nor increases the objective beyond tolerance, then clean residual
/// fuzz entrywise under the same guards.
fn polish<S: Scalar>(
    program: &ConvexProgram<S>,
    v_raw: &ndarray::Array1<S>,
    achieved_resid: S,
    tol: S,
) -> ndarray::Array1<S> {
    let p = program.num_original;
    let feas_slack = achieved_resid.max(S::cast(1e-12));
    let mut v = v_raw.clone();
    let mut obj = program.objective_at(&v.view());
    let obj_slack = tol * (S::one() + obj.abs());

    // connected components of the penalty coupling
    let mut parent: Vec<usize> = (0..p).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for row in &program.eq_rows {
        if row.cols.len() >= 2 {
            let r0 = find(&mut parent, row.cols[0]);
            for &c in &row.cols[1..] {
                let rc = find(&mut parent, c);
                if r0 != rc {
                    parent[r0.max(rc)] = r0.min(rc);
                }
            }
        }
    }
    // grouped cones couple their two originals through the shared t var
    {
        use std::collections::BTreeMap;
        let mut shadow_owner: BTreeMap<usize, usize> = BTreeMap::new();
        for row in &program.eq_rows {
            if let RowKind::ShadowDef { shadow } = row.kind {
                shadow_owner.insert(shadow, row.cols[0]);
            }
        }
        for cone in &program.cones {
            if let (Some(&a), Some(&b)) = (shadow_owner.get(&cone.a), shadow_owner.get(&cone.b)) {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, b);
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut components: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..p {
        let r = find(&mut parent, i);
        components.entry(r).or_default().push(i);
    }

    for comp in components.values() {
        if comp.iter().all(|&i| v[i] == S::zero()) {
            continue;
        }
        let mut candidate = v.clone();
        for &i in comp {
            candidate[i] = S::zero();
        }
        if program.bounds.violation(&candidate.view()) > feas_slack {
            continue;
        }
        let cand_obj = program.objective_at(&candidate.view());
        if cand_obj <= obj + obj_slack {
            v = candidate;
            obj = cand_obj;
        }
    }

    // entrywise fuzz cleanup
    let vmax = v.iter().fold(S::zero(), |m, &x| m.max(x.abs()));
    let thr = S::cast(100.0) * tol * vmax.max(S::one());
    let mut candidate = v.clone();
    let mut any = false;
    for i in 0..p {
        if candidate[i] != S::zero() && candidate[i].abs() <= thr {
            candidate[i] = S::zero();
            any = true;
        }
    }
    if any
        && program.bounds.violation(&candidate.view()) <= feas_slack
        && program.objective_at(&candidate.view()) <= obj + obj_slack
    {
        v = candidate;
    }
    v
}
