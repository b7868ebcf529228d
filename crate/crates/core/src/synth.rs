//! Controller synthesis: assemble, solve, extract, verify.
//!
//! The LMIs of subsystem `i` only involve its own variables and `μ_i`, so the
//! network problem splits into `n` independent SDPs.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, from_rows, to_rows, Rows};
use crate::lmi::{
    AssemblyOptions, DecisionVarCatalog, DerivativeBounds, DesignMatrices, Interconnect, LmiInstance, Method,
    SubsystemLmis,
};
use crate::model::{blend, NetworkModel, SubsystemModel};
use crate::sdp::{self, Objective, SolveStatus, SolverOptions};

/// Guard on the blended `X1` when forming the control law.
pub const MAX_BLEND_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub method: Method,
    pub assembly: AssemblyOptions,
    pub solver: SolverOptions,
    /// Simplex lattice density for the blended check.
    pub grid_density: usize,
    pub verify_tol: f64,
    /// Relative slack on `μ` for the conditioning stage; 0 keeps the raw optimum.
    pub backoff: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            method: Method::Theorem1,
            assembly: AssemblyOptions::default(),
            solver: SolverOptions::default(),
            grid_density: 5,
            verify_tol: 1e-6,
            backoff: 0.1,
        }
    }
}

impl SynthOptions {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    /// Largest eigenvalue over all encoded blocks, shift included.
    pub max_block_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendWitness {
    pub peer: String,
    pub v: Vec<f64>,
    pub h: Vec<f64>,
}

/// Posterior eigenvalue check of one subsystem's certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub grid_density: usize,
    pub samples: usize,
    pub tol: f64,
    pub relaxed_max_eig: f64,
    pub relaxed_witness: String,
    pub diagonal_max_eig: f64,
    pub blended_max_eig: f64,
    pub blended_witness: Option<BlendWitness>,
    pub min_x1_eig: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemResult {
    pub name: String,
    pub method: Method,
    /// Strict certificate: every relaxed instance below `-δ/2` and every `X1` above `δ/2`.
    pub feasible: bool,
    /// `√μ` of the stored certificate.
    pub rho: f64,
    pub mu: f64,
    /// `√μ` at the minimizing stage, before the conditioning back-off.
    pub rho_min: f64,
    /// `x1[j][s]`, row-major.
    pub x1: Vec<Vec<Rows>>,
    pub x3: Vec<Vec<Rows>>,
    pub x4: Vec<Vec<Rows>>,
    pub k: Vec<Vec<Rows>>,
    pub solver: SolverReport,
    pub verification: Verification,
}

/// Result file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub method: Method,
    pub delta: f64,
    pub interconnect: Interconnect,
    pub subsystems: Vec<SubsystemResult>,
}

impl SynthesisReport {
    pub fn all_feasible(&self) -> bool {
        self.subsystems.iter().all(|s| s.feasible)
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.subsystems.iter().map(|s| s.rho).collect()
    }

    pub fn assembly(&self) -> AssemblyOptions {
        AssemblyOptions {
            delta: self.delta,
            interconnect: self.interconnect,
        }
    }

    pub fn get(&self, name: &str) -> Option<&SubsystemResult> {
        self.subsystems.iter().find(|s| s.name == name)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Results in the network's subsystem order.
    pub fn aligned<'a>(&'a self, net: &NetworkModel) -> Result<Vec<&'a SubsystemResult>> {
        net.subsystems
            .iter()
            .map(|s| {
                self.get(&s.name)
                    .ok_or_else(|| Error::Invalid(format!("result has no subsystem `{}`", s.name)))
            })
            .collect()
    }
}

fn grid_to_rows(g: &[Vec<DMatrix<f64>>]) -> Vec<Vec<Rows>> {
    g.iter().map(|row| row.iter().map(to_rows).collect()).collect()
}

fn grid_from_rows(g: &[Vec<Rows>], what: &str) -> Result<Vec<Vec<DMatrix<f64>>>> {
    g.iter()
        .enumerate()
        .map(|(a, row)| {
            row.iter()
                .enumerate()
                .map(|(b, m)| from_rows(m, &format!("{what}[{}][{}]", a + 1, b + 1)))
                .collect()
        })
        .collect()
}

impl SubsystemResult {
    pub fn design(&self) -> Result<DesignMatrices> {
        Ok(DesignMatrices {
            x1: grid_from_rows(&self.x1, "X1")?,
            x3: grid_from_rows(&self.x3, "X3")?,
            x4: grid_from_rows(&self.x4, "X4")?,
            k: grid_from_rows(&self.k, "K")?,
            mu: self.mu,
        })
    }

    /// Decision vector in the catalog layout of `method`.
    pub fn decision_vector(&self, sub: &SubsystemModel) -> Result<Vec<f64>> {
        let cat = DecisionVarCatalog::new(
            self.method,
            sub.state_dim,
            sub.input_dim,
            sub.left_rule_count(),
            sub.right_rule_count(),
        );
        cat.pack(&self.design()?)
    }
}

/// Synthesizes every subsystem. Infeasible or numerically failed subsystems
/// are reported in their result; structural problems are errors.
pub fn synthesize(net: &NetworkModel, opts: &SynthOptions) -> Result<SynthesisReport> {
    net.validate_structure()?;
    let subsystems = (0..net.n())
        .into_par_iter()
        .map(|i| synthesize_subsystem(net, i, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthesisReport {
        method: opts.method,
        delta: opts.assembly.delta,
        interconnect: opts.assembly.interconnect,
        subsystems,
    })
}

pub fn synthesize_subsystem(net: &NetworkModel, i: usize, opts: &SynthOptions) -> Result<SubsystemResult> {
    let ctx = SubsystemLmis::new(net, i, opts.method, &opts.assembly)?;
    let instances = ctx.all_relaxed()?;
    let problem = sdp::vectorize(&instances, &ctx.catalog, Objective::MinimizeMu)?;
    let sol = sdp::solve(&problem, &opts.solver);
    let rho_min = sol.y[ctx.catalog.mu_index()].max(0.0).sqrt();
    let mut res = package(net, &ctx, &instances, &sol, rho_min, opts)?;
    if !res.feasible || opts.backoff <= 0.0 {
        return Ok(res);
    }
    // The minimum is typically approached only as some X1 turns singular, which
    // makes K X1⁻¹ huge. Trade a little μ for the best-conditioned X1.
    let cap = res.mu * (1.0 + opts.backoff) + opts.assembly.delta;
    let stage2 = conditioning_problem(&problem, &ctx.catalog, cap)?;
    let mut sol2 = sdp::solve(&stage2, &opts.solver);
    sol2.y.truncate(ctx.catalog.len());
    sol2.objective_value = sol2.y[ctx.catalog.mu_index()];
    let conditioned = package(net, &ctx, &instances, &sol2, rho_min, opts)?;
    if conditioned.feasible {
        res = conditioned;
    }
    Ok(res)
}

/// Stage-1 blocks plus `μ ≤ cap` and `X1 ⪰ t I`, maximizing `t` (the last variable).
fn conditioning_problem(p: &sdp::SdpProblem, catalog: &DecisionVarCatalog, cap: f64) -> Result<sdp::SdpProblem> {
    let t = p.var_count;
    let mut c = vec![0.0; t + 1];
    c[t] = -1.0;
    let mut q = sdp::SdpProblem::new(t + 1, c);
    for b in &p.blocks {
        q.push_block(b.label.clone(), b.constant.clone(), b.coeffs.clone(), b.shift)?;
    }
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    q.push_block("mu_cap", one(-cap), vec![(catalog.mu_index(), one(1.0))], 0.0)?;
    let n = catalog.state_dim;
    for (j, s, _) in catalog.x1_blocks() {
        let x1 = catalog.x1(j, s).scale(-1.0);
        let mut coeffs: Vec<_> = x1.terms.into_iter().collect();
        coeffs.push((t, DMatrix::identity(n, n)));
        q.push_block(format!("x1_j{}_s{}_floor", j + 1, s + 1), x1.constant, coeffs, 0.0)?;
    }
    Ok(q)
}

fn package(
    net: &NetworkModel,
    ctx: &SubsystemLmis<'_>,
    instances: &[LmiInstance],
    sol: &sdp::SdpSolution,
    rho_min: f64,
    opts: &SynthOptions,
) -> Result<SubsystemResult> {
    let design = ctx.catalog.unpack(&sol.y);
    let mu = design.mu;
    let v = verify_with(ctx, instances, &sol.y, opts.grid_density, opts.verify_tol)?;
    Ok(SubsystemResult {
        name: net.subsystems[ctx.i].name.clone(),
        method: opts.method,
        feasible: v.relaxed_max_eig <= -0.5 * ctx.shift && v.min_x1_eig >= 0.5 * ctx.shift,
        rho: mu.max(0.0).sqrt(),
        mu,
        rho_min,
        x1: grid_to_rows(&design.x1),
        x3: grid_to_rows(&design.x3),
        x4: grid_to_rows(&design.x4),
        k: grid_to_rows(&design.k),
        solver: SolverReport {
            status: sol.status,
            iterations: sol.iterations,
            objective: sol.objective_value,
            primal_infeasibility: sol.primal_infeasibility,
            dual_infeasibility: sol.dual_infeasibility,
            relative_gap: sol.relative_gap,
            max_block_eig: sol.max_block_eig,
        },
        verification: v,
    })
}

fn empty_verification(grid_density: usize, tol: f64) -> Verification {
    Verification {
        grid_density,
        samples: 0,
        tol,
        relaxed_max_eig: f64::NEG_INFINITY,
        relaxed_witness: String::new(),
        diagonal_max_eig: f64::NEG_INFINITY,
        blended_max_eig: f64::NEG_INFINITY,
        blended_witness: None,
        min_x1_eig: f64::INFINITY,
        pass: false,
    }
}

/// All compositions of `density` into `parts` nonnegative integers, as weights.
pub fn simplex_lattice(parts: usize, density: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in (0..=left).rev() {
            cur.push(c);
            rec(left - c, parts - 1, cur, out);
            cur.pop();
        }
    }
    if parts == 0 {
        return Vec::new();
    }
    let density = density.max(1);
    let mut out = Vec::new();
    rec(density, parts, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / density as f64).collect())
        .collect()
}

fn verify_with(
    ctx: &SubsystemLmis<'_>,
    instances: &[LmiInstance],
    y: &[f64],
    grid_density: usize,
    tol: f64,
) -> Result<Verification> {
    let mut v = empty_verification(grid_density, tol);
    for inst in instances {
        let e = linalg::max_eigenvalue(&inst.eval(y));
        if e > v.relaxed_max_eig {
            v.relaxed_max_eig = e;
            v.relaxed_witness = inst.label.to_string();
        }
        if inst.label.kind == crate::lmi::LmiKind::Diagonal {
            v.diagonal_max_eig = v.diagonal_max_eig.max(e);
        }
    }
    for (j, s, _) in ctx.catalog.x1_blocks() {
        v.min_x1_eig = v.min_x1_eig.min(linalg::min_eigenvalue(&ctx.catalog.x1(j, s).eval(y)));
    }

    let sub = &ctx.net.subsystems[ctx.i];
    let (l, r) = (sub.left_rule_count(), sub.right_rule_count());
    let vs = simplex_lattice(l, grid_density);
    let hs = simplex_lattice(r, grid_density);
    for alpha in ctx.peers() {
        let mut vert = vec![vec![vec![DMatrix::zeros(0, 0); r]; r]; l];
        for (j, row) in vert.iter_mut().enumerate() {
            for (k, col) in row.iter_mut().enumerate() {
                for (s, m) in col.iter_mut().enumerate() {
                    *m = ctx.vertex(alpha, j, k, s)?.eval(y);
                }
            }
        }
        for vw in &vs {
            for hw in &hs {
                let dim = vert[0][0][0].nrows();
                let mut acc = DMatrix::zeros(dim, dim);
                for j in 0..l {
                    for k in 0..r {
                        for s in 0..r {
                            let w = vw[j] * hw[k] * hw[s];
                            if w != 0.0 {
                                acc += &vert[j][k][s] * w;
                            }
                        }
                    }
                }
                let e = linalg::max_eigenvalue(&acc);
                v.samples += 1;
                if e > v.blended_max_eig {
                    v.blended_max_eig = e;
                    v.blended_witness = Some(BlendWitness {
                        peer: ctx.net.subsystems[alpha].name.clone(),
                        v: vw.clone(),
                        h: hw.clone(),
                    });
                }
            }
        }
    }
    v.pass = v.relaxed_max_eig <= tol && v.blended_max_eig <= tol && v.min_x1_eig > 0.0;
    Ok(v)
}

/// Re-runs the posterior check of one stored result against `net`.
pub fn verify_subsystem(
    net: &NetworkModel,
    res: &SubsystemResult,
    assembly: &AssemblyOptions,
    grid_density: usize,
    tol: f64,
) -> Result<Verification> {
    let i = net
        .index_of(&res.name)
        .ok_or_else(|| Error::Invalid(format!("model has no subsystem `{}`", res.name)))?;
    let ctx = SubsystemLmis::new(net, i, res.method, assembly)?;
    let y = res.decision_vector(&net.subsystems[i])?;
    let instances = ctx.all_relaxed()?;
    verify_with(&ctx, &instances, &y, grid_density, tol)
}

/// Posterior check of every subsystem of a result, in network order.
pub fn verify_blended(net: &NetworkModel, report: &SynthesisReport, grid_density: usize, tol: f64) -> Result<Vec<Verification>> {
    let assembly = report.assembly();
    report
        .aligned(net)?
        .into_iter()
        .map(|res| verify_subsystem(net, res, &assembly, grid_density, tol))
        .collect()
}

/// Largest entry-wise difference between the shared-`X1` instances at the
/// stored certificate and the non-quadratic instances assembled with zero
/// derivative bounds over the same shared variables.
pub fn inclusion_residual(net: &NetworkModel, res: &SubsystemResult, assembly: &AssemblyOptions) -> Result<f64> {
    if res.method != Method::Corollary1 {
        return Err(Error::Invalid("inclusion replay needs a shared-X1 certificate".into()));
    }
    let i = net
        .index_of(&res.name)
        .ok_or_else(|| Error::Invalid(format!("model has no subsystem `{}`", res.name)))?;
    let sub = &net.subsystems[i];
    let cor = SubsystemLmis::new(net, i, Method::Corollary1, assembly)?;
    let th = SubsystemLmis::with_bounds(
        net,
        i,
        Method::Theorem1,
        DerivativeBounds::zero(sub.left_rule_count(), sub.right_rule_count()),
        DecisionVarCatalog::for_subsystem(net, i, Method::Corollary1),
        assembly,
    )?;
    let y = res.decision_vector(sub)?;
    let mut worst = 0.0_f64;
    for (a, b) in cor.all_relaxed()?.iter().zip(&th.all_relaxed()?) {
        let d = a.eval(&y) - b.eval(&y);
        worst = worst.max(linalg::max_abs(&d));
    }
    Ok(worst)
}

/// Non-PDC law of one subsystem, parsed once from a stored result.
#[derive(Debug, Clone)]
pub struct Controller {
    x1: Vec<Vec<DMatrix<f64>>>,
    k: Vec<Vec<DMatrix<f64>>>,
}

impl Controller {
    pub fn from_result(res: &SubsystemResult, sub: &SubsystemModel) -> Result<Self> {
        let d = res.design()?;
        let (l, r) = (sub.left_rule_count(), sub.right_rule_count());
        if d.x1.len() != l || d.k.len() != l || d.x1.iter().chain(&d.k).any(|row| row.len() != r) {
            return Err(Error::Invalid(format!("result for `{}` does not match rule counts", sub.name)));
        }
        Ok(Self { x1: d.x1, k: d.k })
    }

    fn blend2(grid: &[Vec<DMatrix<f64>>], v: &[f64], h: &[f64]) -> DMatrix<f64> {
        let rows: Vec<DMatrix<f64>> = grid.iter().map(|row| blend(row, h)).collect();
        blend(&rows, v)
    }

    /// `Σ v_j h_s X1^{js}` at `x`.
    pub fn blended_x1(&self, sub: &SubsystemModel, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(Self::blend2(&self.x1, &sub.v_weights(x)?, &sub.h_weights(x)?))
    }

    /// `u = (Σ v_j h_s K^{js}) (Σ v_j h_s X1^{js})⁻¹ x`.
    pub fn input(&self, sub: &SubsystemModel, x: &[f64]) -> Result<DVector<f64>> {
        let v = sub.v_weights(x)?;
        let h = sub.h_weights(x)?;
        let xm = Self::blend2(&self.x1, &v, &h);
        let km = Self::blend2(&self.k, &v, &h);
        let sol = linalg::solve_guarded(&xm, &DVector::from_column_slice(x), MAX_BLEND_CONDITION, "blended X1")?;
        Ok(km * sol)
    }

    /// `xᵀ (Σ v_j h_s X1^{js})⁻¹ x`.
    pub fn lyapunov(&self, sub: &SubsystemModel, x: &[f64]) -> Result<f64> {
        let xv = DVector::from_column_slice(x);
        if xv.iter().all(|&c| c == 0.0) {
            return Ok(0.0);
        }
        let xm = self.blended_x1(sub, x)?;
        let sol = linalg::solve_guarded(&xm, &xv, MAX_BLEND_CONDITION, "blended X1")?;
        Ok(xv.dot(&sol))
    }
}

pub fn evaluate_controller(res: &SubsystemResult, sub: &SubsystemModel, x: &[f64]) -> Result<DVector<f64>> {
    Controller::from_result(res, sub)?.input(sub, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example22;
    use std::sync::OnceLock;

    fn fixture_cor1() -> &'static SynthesisReport {
        static R: OnceLock<SynthesisReport> = OnceLock::new();
        R.get_or_init(|| synthesize(&example22(), &SynthOptions::with_method(Method::Corollary1)).unwrap())
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(simplex_lattice(2, 5).len(), 6);
        assert_eq!(simplex_lattice(3, 4).len(), 15);
        assert_eq!(simplex_lattice(2, 1), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        for w in simplex_lattice(3, 7) {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn corollary_fixture_is_certified() {
        let rep = fixture_cor1();
        assert!(rep.all_feasible());
        for s in &rep.subsystems {
            assert!(s.verification.pass, "{s:?}");
            assert!(s.verification.diagonal_max_eig <= -0.5 * 1e-7);
            assert!(s.rho > 0.0 && s.rho < 2.0);
        }
    }

    #[test]
    fn perturbed_gain_fails_verification() {
        let net = example22();
        let mut res = fixture_cor1().subsystems[0].clone();
        for row in &mut res.k[0][0] {
            for e in row {
                *e += 10.0;
            }
        }
        let v = verify_subsystem(&net, &res, &AssemblyOptions::default(), 5, 1e-6).unwrap();
        assert!(!v.pass);
        assert!(v.relaxed_max_eig > 0.0 && v.blended_max_eig > 0.0);
        assert!(v.blended_witness.is_some());
    }

    #[test]
    fn vertex_grid_is_a_subset_of_the_fine_grid() {
        let net = example22();
        let rep = fixture_cor1();
        let coarse = verify_blended(&net, rep, 1, 1e-6).unwrap();
        let fine = verify_blended(&net, rep, 5, 1e-6).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            assert!(c.pass);
            assert!(c.blended_max_eig <= f.blended_max_eig + 1e-15);
        }
    }

    #[test]
    fn replayed_verification_matches_embedded() {
        let net = example22();
        let rep = fixture_cor1();
        let text = rep.to_json_string();
        let back = SynthesisReport::from_json_str(&text).unwrap();
        assert_eq!(&back, rep);
        let v = verify_blended(&net, &back, 5, 1e-6).unwrap();
        for (a, b) in v.iter().zip(&rep.subsystems) {
            assert_eq!(a, &b.verification);
        }
    }

    #[test]
    fn corollary_certificate_replays_into_zero_bound_instances() {
        let net = example22();
        for s in &fixture_cor1().subsystems {
            assert!(inclusion_residual(&net, s, &AssemblyOptions::default()).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn controller_examples() {
        let net = example22();
        let sub = &net.subsystems[0];
        let res = &fixture_cor1().subsystems[0];
        let c = Controller::from_result(res, sub).unwrap();
        assert_eq!(c.input(sub, &[0.0, 0.0]).unwrap()[0], 0.0);

        // At x1 = 0 both families sit on their second vertex.
        let x = [0.0, 0.7];
        let v = sub.v_weights(&x).unwrap();
        let h = sub.h_weights(&x).unwrap();
        assert_eq!((v.as_slice(), h.as_slice()), (&[0.0, 1.0][..], &[0.0, 1.0][..]));
        let d = res.design().unwrap();
        let direct = &d.k[1][1] * d.x1[1][1].clone().try_inverse().unwrap() * DVector::from_column_slice(&x);
        let u = c.input(sub, &x).unwrap();
        assert!((u[0] - direct[0]).abs() < 1e-12 * (1.0 + direct[0].abs()));

        let x = [0.4, -0.3];
        let u1 = c.input(sub, &x).unwrap();
        let u2 = evaluate_controller(res, sub, &[0.4, -0.3]).unwrap();
        assert_eq!(u1, u2);
        assert!(c.lyapunov(sub, &x).unwrap() > 0.0);
        assert_eq!(c.lyapunov(sub, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn homogeneity_holds_where_memberships_do_not_move() {
        // Memberships depend only on x1; scaling x2 alone keeps them fixed.
        let net = example22();
        let sub = &net.subsystems[1];
        let res = &fixture_cor1().subsystems[1];
        let u1 = evaluate_controller(res, sub, &[0.0, 0.5]).unwrap();
        let u2 = evaluate_controller(res, sub, &[0.0, 1.0]).unwrap();
        assert!((u2[0] - 2.0 * u1[0]).abs() < 1e-12);
    }

    #[test]
    fn singular_blend_is_reported() {
        let net = example22();
        let sub = &net.subsystems[0];
        let mut res = fixture_cor1().subsystems[0].clone();
        for row in res.x1.iter_mut().flatten() {
            *row = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        }
        assert!(matches!(
            evaluate_controller(&res, sub, &[0.3, 0.2]),
            Err(Error::Singular { .. })
        ));
    }
}
