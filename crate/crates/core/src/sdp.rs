//! Small dense semidefinite programs in LMI form and an embedded interior-point solver.
//!
//! A problem is `minimize cᵀy` subject to, for every block `b`,
//! `C_b + Σ_p y_p A_{b,p} + δ_b I ⪯ 0`. The solver treats this as the dual of
//! a standard-form SDP and runs an infeasible-start primal-dual path-following
//! method with the HKM search direction and Mehrotra's predictor-corrector.

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{DecisionVarCatalog, LmiInstance};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct SdpBlock {
    pub label: String,
    pub constant: DMatrix<f64>,
    /// Sorted by variable index.
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
    /// Strictness margin: the block encodes `eval(y) + shift·I ⪯ 0`.
    pub shift: f64,
}

impl SdpBlock {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    /// `C + Σ y_p A_p`, without the shift.
    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (p, a) in &self.coeffs {
            out += a * y[*p];
        }
        out
    }

    /// The matrix that must be negative semidefinite.
    pub fn encoded(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        self.eval(y) + DMatrix::identity(n, n) * self.shift
    }
}

/// A positive-definiteness constraint on a symmetric decision matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdVarConstraint {
    pub entries: Vec<usize>,
    pub dim: usize,
    pub block: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub var_count: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<SdpBlock>,
    pub psd_var_constraints: Vec<PsdVarConstraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    MinimizeMu,
    Feasibility,
}

impl SdpProblem {
    pub fn new(var_count: usize, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), var_count);
        Self {
            var_count,
            objective,
            blocks: Vec::new(),
            psd_var_constraints: Vec::new(),
        }
    }

    pub fn push_block(&mut self, label: impl Into<String>, constant: DMatrix<f64>, coeffs: Vec<(usize, DMatrix<f64>)>, shift: f64) -> Result<()> {
        for (p, a) in &coeffs {
            if *p >= self.var_count {
                return Err(Error::UnknownVariable(*p));
            }
            if a.shape() != constant.shape() {
                return Err(Error::Invalid("coefficient shape differs from constant block".into()));
            }
        }
        let mut coeffs = coeffs;
        coeffs.sort_by_key(|(p, _)| *p);
        self.blocks.push(SdpBlock {
            label: label.into(),
            constant,
            coeffs,
            shift,
        });
        Ok(())
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(c, v)| c * v).sum()
    }

    /// Writes the problem in SDPA sparse format (`.dat-s`):
    /// `minimize cᵀy s.t. Σ y_p F_p - F_0 ⪰ 0` with `F_p = -A_p`, `F_0 = C + δI`.
    pub fn write_sdpa(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("\"LMI problem: minimize c'y s.t. sum_p y_p F_p - F_0 >= 0\"\n");
        out.push_str(&format!("{}\n{}\n", self.var_count, self.blocks.len()));
        let sizes: Vec<String> = self.blocks.iter().map(|b| b.dim().to_string()).collect();
        out.push_str(&sizes.join(" "));
        out.push('\n');
        let c: Vec<String> = self.objective.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&c.join(" "));
        out.push('\n');
        for (bi, b) in self.blocks.iter().enumerate() {
            let n = b.dim();
            let f0 = &b.constant + DMatrix::identity(n, n) * b.shift;
            push_upper(&mut out, 0, bi + 1, &f0, 1.0);
            for (p, a) in &b.coeffs {
                push_upper(&mut out, p + 1, bi + 1, a, -1.0);
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

fn push_upper(out: &mut String, mat: usize, block: usize, m: &DMatrix<f64>, sign: f64) {
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            if m[(r, c)] != 0.0 {
                out.push_str(&format!("{mat} {block} {} {} {:e}\n", r + 1, c + 1, sign * m[(r, c)]));
            }
        }
    }
}

/// Turns assembled instances into one SDP over the catalog's variables.
///
/// Adds `-X1 + δI ⪯ 0` for every distinct `X1` and `-μ ⪯ 0`.
pub fn vectorize(instances: &[LmiInstance], catalog: &DecisionVarCatalog, objective: Objective) -> Result<SdpProblem> {
    let nv = catalog.len();
    let mut c = vec![0.0; nv];
    if objective == Objective::MinimizeMu {
        c[catalog.mu_index()] = 1.0;
    }
    let mut p = SdpProblem::new(nv, c);
    let mut shift = 0.0_f64;
    for inst in instances {
        let coeffs = inst.body.terms.iter().map(|(&v, t)| (v, t.clone())).collect();
        p.push_block(inst.label.to_string(), inst.body.constant.clone(), coeffs, inst.shift)?;
        shift = shift.max(inst.shift);
    }
    if instances.is_empty() {
        return Ok(p);
    }
    let n = catalog.state_dim;
    for (j, s, entries) in catalog.x1_blocks() {
        let x1 = catalog.x1(j, s).scale(-1.0);
        let block = p.blocks.len();
        p.push_block(
            format!("x1_j{}_s{}_posdef", j + 1, s + 1),
            x1.constant,
            x1.terms.into_iter().collect(),
            shift,
        )?;
        p.psd_var_constraints.push(PsdVarConstraint { entries, dim: n, block });
    }
    p.push_block(
        "mu_nonneg",
        DMatrix::zeros(1, 1),
        vec![(catalog.mu_index(), DMatrix::from_element(1, 1, -1.0))],
        0.0,
    )?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    IllConditioned,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::IllConditioned => "ill-conditioned",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub y: Vec<f64>,
    pub status: SolveStatus,
    pub objective_value: f64,
    /// Largest eigenvalue over all encoded blocks at `y`.
    pub max_block_eig: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Looser tolerance accepted when the method stalls.
    pub reduced_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.95,
            reduced_tol: 1e-6,
        }
    }
}

/// Pluggable conic backend.
pub trait SdpBackend {
    fn solve(&self, problem: &SdpProblem) -> SdpSolution;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint {
    pub opts: SolverOptions,
}

impl SdpBackend for InteriorPoint {
    fn solve(&self, problem: &SdpProblem) -> SdpSolution {
        solve(problem, &self.opts)
    }
}

/// Per-block verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub block_max_eig: Vec<(String, f64)>,
    pub objective: f64,
    pub max_eig: f64,
    pub feasible: bool,
}

/// Evaluates every encoded block at `y` with the Jacobi eigensolver.
pub fn check_solution(p: &SdpProblem, y: &[f64], tol: f64) -> CheckReport {
    assert_eq!(y.len(), p.var_count, "decision vector length");
    let block_max_eig: Vec<(String, f64)> = p
        .blocks
        .iter()
        .map(|b| (b.label.clone(), linalg::max_eigenvalue(&b.encoded(y))))
        .collect();
    let max_eig = block_max_eig
        .iter()
        .map(|(_, e)| *e)
        .fold(f64::NEG_INFINITY, f64::max);
    CheckReport {
        feasible: block_max_eig.iter().all(|(_, e)| *e <= tol),
        block_max_eig,
        objective: p.objective_value(y),
        max_eig,
    }
}

/// Block-diagonal symmetric matrix stored per block.
type BlockMat = Vec<DMatrix<f64>>;

fn inner(a: &BlockMat, b: &BlockMat) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &BlockMat) -> f64 {
    inner(a, a).sqrt()
}

struct Standard<'a> {
    p: &'a SdpProblem,
    /// `C_b = -(constant_b + shift_b I)`.
    c: BlockMat,
    b: DVector<f64>,
    /// For each variable, the blocks it appears in.
    var_blocks: Vec<Vec<(usize, usize)>>,
}

impl<'a> Standard<'a> {
    fn new(p: &'a SdpProblem) -> Self {
        let c = p
            .blocks
            .iter()
            .map(|b| {
                let n = b.dim();
                -(&b.constant + DMatrix::identity(n, n) * b.shift)
            })
            .collect();
        let b = DVector::from_iterator(p.var_count, p.objective.iter().map(|v| -v));
        let mut var_blocks = vec![Vec::new(); p.var_count];
        for (bi, blk) in p.blocks.iter().enumerate() {
            for (ci, (v, _)) in blk.coeffs.iter().enumerate() {
                var_blocks[*v].push((bi, ci));
            }
        }
        Self { p, c, b, var_blocks }
    }

    fn coeff(&self, bi: usize, ci: usize) -> &DMatrix<f64> {
        &self.p.blocks[bi].coeffs[ci].1
    }

    /// `A(X)_p = Σ_b ⟨A_{b,p}, X_b⟩`.
    fn apply(&self, x: &BlockMat) -> DVector<f64> {
        DVector::from_iterator(
            self.p.var_count,
            self.var_blocks
                .iter()
                .map(|list| list.iter().map(|&(bi, ci)| self.coeff(bi, ci).dot(&x[bi])).sum::<f64>()),
        )
    }

    /// `A*(y) = Σ_p y_p A_p`.
    fn adjoint(&self, y: &DVector<f64>) -> BlockMat {
        self.p
            .blocks
            .iter()
            .map(|blk| {
                let mut out = DMatrix::zeros(blk.dim(), blk.dim());
                for (v, a) in &blk.coeffs {
                    out += a * y[*v];
                }
                out
            })
            .collect()
    }

    /// Schur complement `M_pq = Σ_b tr(A_p X A_q Z⁻¹)`.
    fn schur(&self, x: &BlockMat, zinv: &BlockMat) -> DMatrix<f64> {
        let m = self.p.var_count;
        let mut out = DMatrix::zeros(m, m);
        for (bi, blk) in self.p.blocks.iter().enumerate() {
            let g: Vec<DMatrix<f64>> = blk.coeffs.iter().map(|(_, a)| &x[bi] * a * &zinv[bi]).collect();
            for (ci, (p, _)) in blk.coeffs.iter().enumerate() {
                for (cj, (q, aq)) in blk.coeffs.iter().enumerate().skip(ci) {
                    let v = aq.dot(&g[ci].transpose());
                    out[(*p, *q)] += v;
                    if cj != ci {
                        out[(*q, *p)] += v;
                    }
                }
            }
        }
        out
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `α` with `X + α dX ⪰ 0` (infinite if `dX ⪰ 0`).
fn max_step(x: &BlockMat, dx: &BlockMat) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        let chol = xb.clone().cholesky()?;
        let l = chol.l();
        let t = l.solve_lower_triangular(db)?;
        let w = l.solve_lower_triangular(&t.transpose())?;
        let lam = nalgebra::SymmetricEigen::new(sym(&w))
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if lam < 0.0 {
            alpha = alpha.min(-1.0 / lam);
        }
    }
    Some(alpha)
}

fn finish(p: &SdpProblem, y: Vec<f64>, status: SolveStatus, iterations: usize, pinf: f64, dinf: f64, gap: f64) -> SdpSolution {
    let max_block_eig = p
        .blocks
        .iter()
        .map(|b| linalg::max_eigenvalue(&b.encoded(&y)))
        .fold(f64::NEG_INFINITY, f64::max);
    SdpSolution {
        objective_value: p.objective_value(&y),
        y,
        status,
        max_block_eig,
        iterations,
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
        relative_gap: gap,
    }
}

/// Solves `p` with the embedded interior-point method. Deterministic.
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let m = p.var_count;
    if p.blocks.is_empty() {
        let status = if p.objective.iter().all(|&c| c == 0.0) {
            SolveStatus::Optimal
        } else {
            SolveStatus::IllConditioned
        };
        return finish(p, vec![0.0; m], status, 0, 0.0, 0.0, 0.0);
    }
    let st = Standard::new(p);
    let free: Vec<bool> = st.var_blocks.iter().map(Vec::is_empty).collect();
    if free.iter().zip(&p.objective).any(|(&f, &c)| f && c != 0.0) {
        // A costed variable that no constraint touches: unbounded.
        return finish(p, vec![0.0; m], SolveStatus::IllConditioned, 0, 0.0, 0.0, f64::INFINITY);
    }

    let total_dim: usize = p.blocks.iter().map(SdpBlock::dim).sum();
    let nblk = total_dim as f64;
    let norm_c = frob(&st.c);
    let norm_b = st.b.norm();
    let max_a = p
        .blocks
        .iter()
        .flat_map(|b| b.coeffs.iter().map(|(_, a)| a.norm()))
        .fold(0.0_f64, f64::max);
    let xi = (10.0_f64).max(nblk.sqrt()).max(
        st.var_blocks
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(v, l)| {
                let an: f64 = l.iter().map(|&(bi, ci)| st.coeff(bi, ci).norm()).sum();
                nblk.sqrt() * (1.0 + st.b[v].abs()) / (1.0 + an)
            })
            .fold(0.0, f64::max),
    );
    let eta = (10.0_f64).max(nblk.sqrt()).max(max_a).max(norm_c);

    let mut x: BlockMat = p.blocks.iter().map(|b| DMatrix::identity(b.dim(), b.dim()) * xi).collect();
    let mut z: BlockMat = p.blocks.iter().map(|b| DMatrix::identity(b.dim(), b.dim()) * eta).collect();
    let mut y = DVector::zeros(m);

    let mut pinf = f64::INFINITY;
    let mut dinf = f64::INFINITY;
    let mut relgap = f64::INFINITY;
    let mut status = SolveStatus::MaxIterations;
    let mut iter = 0;
    // Best LMI-feasible iterate seen so far: (y, pinf, dinf, gap).
    let mut best: Option<(DVector<f64>, f64, f64, f64)> = None;
    let mut diverging = false;
    while iter < opts.max_iter {
        // Residuals.
        let ax = st.apply(&x);
        let rp = &st.b - &ax;
        let aty = st.adjoint(&y);
        let rd: BlockMat = (0..x.len()).map(|i| &st.c[i] - &z[i] - &aty[i]).collect();
        let pobj = inner(&st.c, &x);
        let dobj = st.b.dot(&y);
        let xz = inner(&x, &z);
        pinf = rp.norm() / (1.0 + norm_b);
        dinf = frob(&rd) / (1.0 + norm_c);
        relgap = (pobj - dobj).abs().max(xz) / (1.0 + pobj.abs() + dobj.abs());
        if pinf <= opts.feas_tol && dinf <= opts.feas_tol && relgap <= opts.gap_tol {
            status = SolveStatus::Optimal;
            break;
        }
        if dinf <= opts.reduced_tol && best.as_ref().is_none_or(|b| relgap.max(pinf) < b.3.max(b.1)) {
            best = Some((y.clone(), pinf, dinf, relgap));
        }
        diverging = pobj < 0.0 && frob(&x) > 1e8 * xi && ax.norm() / (-pobj) < opts.reduced_tol.sqrt() * 10.0;
        // Certificate of LMI infeasibility: X ⪰ 0, A(X) ≈ 0 relative to ⟨C, X⟩ < 0.
        if pobj < 0.0 && ax.norm() / (-pobj) < opts.feas_tol && dinf > opts.feas_tol {
            status = SolveStatus::Infeasible;
            break;
        }
        if dobj > 1e12 * (1.0 + norm_b) {
            status = SolveStatus::IllConditioned;
            break;
        }

        let mut zinv = Vec::with_capacity(z.len());
        for zb in &z {
            match zb.clone().cholesky() {
                Some(ch) => zinv.push(ch.inverse()),
                None => {
                    status = SolveStatus::IllConditioned;
                    break;
                }
            }
        }
        if zinv.len() != z.len() {
            break;
        }
        let mut schur = st.schur(&x, &zinv);
        for (v, &f) in free.iter().enumerate() {
            if f {
                schur[(v, v)] = 1.0;
            }
        }
        let diag_max = (0..m).map(|v| schur[(v, v)].abs()).fold(0.0_f64, f64::max);
        let factor = match schur.clone().cholesky() {
            Some(ch) => ch,
            None => {
                // Tiny diagonal regularization before giving up.
                let mut reg = schur.clone();
                for v in 0..m {
                    reg[(v, v)] += 1e-14 * diag_max.max(1.0);
                }
                match reg.cholesky() {
                    Some(ch) => ch,
                    None => {
                        status = SolveStatus::IllConditioned;
                        break;
                    }
                }
            }
        };

        let mu = xz / nblk;
        // One direction for right-hand side R_c Z⁻¹ (given blockwise).
        let direction = |rc_zinv: &BlockMat| -> (DVector<f64>, BlockMat, BlockMat) {
            let h: BlockMat = (0..x.len()).map(|i| &rc_zinv[i] - &x[i] * &rd[i] * &zinv[i]).collect();
            let rhs = &rp - st.apply(&h);
            let mut dy = factor.solve(&rhs);
            for (v, &f) in free.iter().enumerate() {
                if f {
                    dy[v] = 0.0;
                }
            }
            let ady = st.adjoint(&dy);
            let dz: BlockMat = (0..x.len()).map(|i| &rd[i] - &ady[i]).collect();
            let dx: BlockMat = (0..x.len())
                .map(|i| sym(&(&h[i] + &x[i] * &ady[i] * &zinv[i])))
                .collect();
            (dy, dx, dz)
        };

        // Predictor.
        let rc_aff: BlockMat = x.iter().map(|xb| -xb).collect();
        let (_, dx_a, dz_a) = direction(&rc_aff);
        let (Some(ap), Some(ad)) = (max_step(&x, &dx_a), max_step(&z, &dz_a)) else {
            status = SolveStatus::IllConditioned;
            break;
        };
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let x_aff: BlockMat = (0..x.len()).map(|i| &x[i] + &dx_a[i] * ap).collect();
        let z_aff: BlockMat = (0..z.len()).map(|i| &z[i] + &dz_a[i] * ad).collect();
        let mu_aff = inner(&x_aff, &z_aff) / nblk;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3).max(if pinf > 1e-2 || dinf > 1e-2 { 0.1 } else { 0.0 });

        // Corrector.
        let rc: BlockMat = (0..x.len())
            .map(|i| &zinv[i] * (sigma * mu) - &x[i] - &dx_a[i] * &dz_a[i] * &zinv[i])
            .collect();
        let (dy, dx, dz) = direction(&rc);
        let (Some(ap), Some(ad)) = (max_step(&x, &dx), max_step(&z, &dz)) else {
            status = SolveStatus::IllConditioned;
            break;
        };
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            status = SolveStatus::IllConditioned;
            break;
        }
        for i in 0..x.len() {
            x[i] = sym(&(&x[i] + &dx[i] * ap));
            z[i] = sym(&(&z[i] + &dz[i] * ad));
        }
        y += dy * ad;
        iter += 1;
    }
    if matches!(status, SolveStatus::MaxIterations | SolveStatus::IllConditioned) {
        // Stalled: accept a near-optimal iterate, or a diverging primal ray as
        // a reduced-accuracy infeasibility certificate.
        if let Some((by, bp, bd, bg)) = best.filter(|b| b.1 <= opts.reduced_tol && b.3 <= opts.reduced_tol) {
            return finish(p, by.iter().cloned().collect(), SolveStatus::Optimal, iter, bp, bd, bg);
        }
        if diverging {
            status = SolveStatus::Infeasible;
        }
    }
    finish(p, y.iter().cloned().collect(), status, iter, pinf, dinf, relgap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c])
    }

    /// minimize μ s.t. [[-μ, 1], [1, -1]] ⪯ 0.
    fn schur_problem() -> SdpProblem {
        let mut p = SdpProblem::new(1, vec![1.0]);
        p.push_block("b", m(&[&[0.0, 1.0], &[1.0, -1.0]]), vec![(0, m(&[&[-1.0, 0.0], &[0.0, 0.0]]))], 0.0)
            .unwrap();
        p
    }

    #[test]
    fn schur_complement_optimum() {
        let sol = solve(&schur_problem(), &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.y[0] - 1.0).abs() < 1e-7, "{}", sol.y[0]);
    }

    #[test]
    fn diagonal_optimum() {
        let mut p = SdpProblem::new(1, vec![1.0]);
        p.push_block("d", m(&[&[4.0, 0.0], &[0.0, 9.0]]), vec![(0, -DMatrix::identity(2, 2))], 0.0)
            .unwrap();
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.y[0] - 9.0).abs() < 1e-7);
    }

    #[test]
    fn check_solution_examples() {
        let p = schur_problem();
        let at_opt = check_solution(&p, &[1.0], 1e-9);
        assert!(at_opt.max_eig.abs() < 1e-9 && at_opt.feasible);
        let at_zero = check_solution(&p, &[0.0], 1e-9);
        assert!((at_zero.max_eig - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        assert!(!at_zero.feasible);
        let empty = SdpProblem::new(0, vec![]);
        assert!(check_solution(&empty, &[], 1e-9).block_max_eig.is_empty());
    }

    #[test]
    fn empty_problem_is_trivially_optimal() {
        let p = SdpProblem::new(3, vec![0.0; 3]);
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.y, vec![0.0; 3]);
    }

    #[test]
    fn detects_infeasible_lmi() {
        // y·I ⪯ 0 and -y·I + I ⪯ 0 cannot both hold.
        let mut p = SdpProblem::new(1, vec![0.0]);
        p.push_block("a", DMatrix::zeros(2, 2), vec![(0, DMatrix::identity(2, 2))], 0.0).unwrap();
        p.push_block("b", DMatrix::identity(2, 2), vec![(0, -DMatrix::identity(2, 2))], 0.0).unwrap();
        let sol = solve(&p, &SolverOptions::default());
        assert_ne!(sol.status, SolveStatus::Optimal);
        assert!(sol.max_block_eig > 0.0);
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let mut p = SdpProblem::new(1, vec![0.0]);
        assert!(matches!(
            p.push_block("x", DMatrix::zeros(1, 1), vec![(3, DMatrix::zeros(1, 1))], 0.0),
            Err(Error::UnknownVariable(3))
        ));
    }

    #[test]
    fn sdpa_dump() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.dat-s");
        schur_problem().write_sdpa(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "1");
        assert_eq!(lines[2], "1");
        assert_eq!(lines[3], "2");
        assert!(lines.contains(&"0 1 1 2 1e0"));
        assert!(lines.contains(&"1 1 1 1 1e0"));
    }
}
