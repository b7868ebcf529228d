//! Closed-loop simulation of the coupled network, Lyapunov evaluation and the
//! integrated dissipation check.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{blend, MembershipFamily, NetworkModel};
use crate::synth::{Controller, SubsystemResult, SynthesisReport};

/// Condition-number guard on the blended `E^v`.
pub const MAX_E_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Forces `u ≡ 0`.
    pub open_loop: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            open_loop: false,
        }
    }
}

/// Samples of one subsystem on the shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemTrace {
    pub name: String,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub lyapunov: Vec<f64>,
    /// `φ_{iα}` for every peer in index order, concatenated.
    pub phi: Vec<Vec<f64>>,
    /// Instantaneous `x_iᵀx_i`.
    pub state_rate: Vec<f64>,
    /// Instantaneous interconnection energy in the expanded form: every peer
    /// term `|φ_{iα}|²` weighted by `2n − 3`.
    pub phi_rate: Vec<f64>,
    /// Trapezoidal running integrals of the two rates.
    pub state_energy: Vec<f64>,
    pub phi_energy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub dt: f64,
    pub subsystems: Vec<SubsystemTrace>,
}

impl Trajectory {
    pub fn final_state(&self) -> Vec<Vec<f64>> {
        self.subsystems
            .iter()
            .map(|s| s.x.last().cloned().unwrap_or_default())
            .collect()
    }

    pub fn state_norm(&self, idx: usize) -> f64 {
        self.subsystems
            .iter()
            .flat_map(|s| s.x[idx].iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

struct ClosedLoop<'a> {
    net: &'a NetworkModel,
    controllers: Vec<Controller>,
    couplings: Vec<Vec<(usize, Vec<DMatrix<f64>>)>>,
    open_loop: bool,
}

impl<'a> ClosedLoop<'a> {
    fn new(net: &'a NetworkModel, results: &[&SubsystemResult], open_loop: bool) -> Result<Self> {
        let controllers = net
            .subsystems
            .iter()
            .zip(results)
            .map(|(sub, res)| Controller::from_result(res, sub))
            .collect::<Result<Vec<_>>>()?;
        let couplings = (0..net.n())
            .map(|i| {
                (0..net.n())
                    .filter(|&a| a != i)
                    .map(|a| (a, net.coupling(i, a)))
                    .collect()
            })
            .collect();
        Ok(Self {
            net,
            controllers,
            couplings,
            open_loop,
        })
    }

    fn input(&self, i: usize, x: &[f64]) -> Result<DVector<f64>> {
        let sub = &self.net.subsystems[i];
        if self.open_loop {
            return Ok(DVector::zeros(sub.input_dim));
        }
        self.controllers[i].input(sub, x)
    }

    fn phi(&self, i: usize, xs: &[DVector<f64>], h: &[f64]) -> Vec<DVector<f64>> {
        self.couplings[i]
            .iter()
            .map(|(a, f)| blend(f, h) * &xs[*a])
            .collect()
    }

    fn derivative(&self, t: f64, xs: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let mut out = Vec::with_capacity(xs.len());
        for (i, sub) in self.net.subsystems.iter().enumerate() {
            let x = xs[i].as_slice();
            let v = sub.v_weights(x)?;
            let h = sub.h_weights(x)?;
            let u = self.input(i, x)?;
            let mut rhs = DVector::zeros(sub.state_dim);
            for (k, &hk) in h.iter().enumerate() {
                rhs += (&sub.a[k] * &xs[i] + &sub.b[k] * &u) * hk;
            }
            for p in self.phi(i, xs, &h) {
                rhs += p;
            }
            let e = blend(&sub.e, &v);
            let xdot = linalg::solve_guarded(&e, &rhs, MAX_E_CONDITION, "").map_err(|err| match err {
                Error::Singular { condition, .. } => Error::Singular {
                    what: format!("E^v of `{}` at t = {t}", sub.name),
                    condition,
                },
                other => other,
            })?;
            out.push(xdot);
        }
        Ok(out)
    }
}

fn axpy(xs: &[DVector<f64>], k: &[DVector<f64>], h: f64) -> Vec<DVector<f64>> {
    xs.iter().zip(k).map(|(x, d)| x + d * h).collect()
}

/// Classical RK4 on the stacked network state. `x0[i]` is subsystem `i`'s
/// initial state in network order.
pub fn simulate(net: &NetworkModel, report: &SynthesisReport, x0: &[Vec<f64>], opts: &SimOptions) -> Result<Trajectory> {
    if !(opts.dt > 0.0) || !(opts.t_end > opts.dt) {
        return Err(Error::Invalid(format!(
            "need dt > 0 and T > dt, got dt = {}, T = {}",
            opts.dt, opts.t_end
        )));
    }
    if x0.len() != net.n() {
        return Err(Error::Invalid(format!("{} initial states for {} subsystems", x0.len(), net.n())));
    }
    for (sub, x) in net.subsystems.iter().zip(x0) {
        if x.len() != sub.state_dim {
            return Err(Error::Invalid(format!(
                "initial state of `{}` has {} entries, expected {}",
                sub.name,
                x.len(),
                sub.state_dim
            )));
        }
    }
    let results = report.aligned(net)?;
    let sys = ClosedLoop::new(net, &results, opts.open_loop)?;
    let steps = (opts.t_end / opts.dt).round() as usize;
    let dt = opts.dt;

    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        dt,
        subsystems: net
            .subsystems
            .iter()
            .map(|s| SubsystemTrace {
                name: s.name.clone(),
                x: Vec::new(),
                u: Vec::new(),
                lyapunov: Vec::new(),
                phi: Vec::new(),
                state_rate: Vec::new(),
                phi_rate: Vec::new(),
                state_energy: Vec::new(),
                phi_energy: Vec::new(),
            })
            .collect(),
    };
    let weight = 2.0 * net.n() as f64 - 3.0;
    let mut xs: Vec<DVector<f64>> = x0.iter().map(|x| DVector::from_column_slice(x)).collect();
    for step in 0..=steps {
        let t = step as f64 * dt;
        if xs.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged { step, time: t });
        }
        traj.t.push(t);
        for (i, sub) in net.subsystems.iter().enumerate() {
            let x = xs[i].as_slice();
            let h = sub.h_weights(x)?;
            let phi = sys.phi(i, &xs, &h);
            let rec = &mut traj.subsystems[i];
            rec.x.push(x.to_vec());
            rec.u.push(sys.input(i, x)?.iter().cloned().collect());
            rec.lyapunov.push(sys.controllers[i].lyapunov(sub, x)?);
            rec.state_rate.push(xs[i].norm_squared());
            rec.phi_rate.push(weight * phi.iter().map(|p| p.norm_squared()).sum::<f64>());
            rec.phi.push(phi.iter().flat_map(|p| p.iter().cloned()).collect());
            let n = rec.state_rate.len();
            let (se, pe) = if n == 1 {
                (0.0, 0.0)
            } else {
                (
                    rec.state_energy[n - 2] + 0.5 * dt * (rec.state_rate[n - 2] + rec.state_rate[n - 1]),
                    rec.phi_energy[n - 2] + 0.5 * dt * (rec.phi_rate[n - 2] + rec.phi_rate[n - 1]),
                )
            };
            rec.state_energy.push(se);
            rec.phi_energy.push(pe);
        }
        if step == steps {
            break;
        }
        let k1 = sys.derivative(t, &xs)?;
        let k2 = sys.derivative(t + 0.5 * dt, &axpy(&xs, &k1, 0.5 * dt))?;
        let k3 = sys.derivative(t + 0.5 * dt, &axpy(&xs, &k2, 0.5 * dt))?;
        let k4 = sys.derivative(t + dt, &axpy(&xs, &k3, dt))?;
        for i in 0..xs.len() {
            xs[i] += (&k1[i] + &k2[i] * 2.0 + &k3[i] * 2.0 + &k4[i]) * (dt / 6.0);
        }
    }
    Ok(traj)
}

/// `xᵀ (Σ v_j h_s X1^{js})⁻¹ x` with memberships evaluated at `x`.
pub fn lyapunov_value(res: &SubsystemResult, sub: &crate::model::SubsystemModel, x: &[f64]) -> Result<f64> {
    Controller::from_result(res, sub)?.lyapunov(sub, x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HinfReport {
    pub name: String,
    pub rho: f64,
    pub state_energy: f64,
    pub phi_energy: f64,
    pub v_start: f64,
    pub v_end: f64,
    /// `∫xᵀx − ρ²∫φᵀφ − V(t₀) + V(t_f)`.
    pub residual: f64,
    pub pass: bool,
}

/// Dissipation residual per subsystem with the ρ values of `report`.
pub fn hinf_report(traj: &Trajectory, report: &SynthesisReport, tol: f64) -> Vec<HinfReport> {
    let rhos: Vec<f64> = traj
        .subsystems
        .iter()
        .map(|s| report.get(&s.name).map_or(f64::NAN, |r| r.rho))
        .collect();
    hinf_report_with(traj, &rhos, tol)
}

pub fn hinf_report_with(traj: &Trajectory, rhos: &[f64], tol: f64) -> Vec<HinfReport> {
    traj.subsystems
        .iter()
        .zip(rhos)
        .map(|(s, &rho)| {
            let state_energy = s.state_energy.last().copied().unwrap_or(0.0);
            let phi_energy = s.phi_energy.last().copied().unwrap_or(0.0);
            let v_start = s.lyapunov.first().copied().unwrap_or(0.0);
            let v_end = s.lyapunov.last().copied().unwrap_or(0.0);
            let residual = state_energy - rho * rho * phi_energy - v_start + v_end;
            HinfReport {
                name: s.name.clone(),
                rho,
                state_energy,
                phi_energy,
                v_start,
                v_end,
                residual,
                pass: residual <= tol,
            }
        })
        .collect()
}

/// Largest value over interior samples of `Σ_i (V̇_i + x_iᵀx_i − ρ_i² φ_iᵀφ_i)`,
/// with `V̇` by central differences.
pub fn max_dissipation_rate(traj: &Trajectory, rhos: &[f64]) -> f64 {
    let n = traj.t.len();
    let mut worst = f64::NEG_INFINITY;
    for idx in 1..n.saturating_sub(1) {
        let mut total = 0.0;
        for (s, rho) in traj.subsystems.iter().zip(rhos) {
            let vdot = (s.lyapunov[idx + 1] - s.lyapunov[idx - 1]) / (2.0 * traj.dt);
            total += vdot + s.state_rate[idx] - rho * rho * s.phi_rate[idx];
        }
        worst = worst.max(total);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub subsystem: String,
    /// `"v"` or `"h"`.
    pub family: String,
    /// 1-based rule index.
    pub rule: usize,
    pub declared: f64,
    pub min_observed: f64,
    pub at_time: f64,
    pub warn: bool,
}

/// Smallest observed membership derivative (central differences on the time
/// grid) against each declared lower bound.
pub fn derivative_bound_diagnostic(traj: &Trajectory, net: &NetworkModel) -> Result<Vec<DerivativeCheck>> {
    let mut out = Vec::new();
    for (sub, rec) in net.subsystems.iter().zip(&traj.subsystems) {
        for (family, exprs, bounds) in [
            (MembershipFamily::V, &sub.v_exprs, &sub.lambda_bounds),
            (MembershipFamily::H, &sub.h_exprs, &sub.omega_bounds),
        ] {
            for (rule, (expr, &declared)) in exprs.iter().zip(bounds).enumerate() {
                let values = rec.x.iter().map(|x| expr.eval(x)).collect::<std::result::Result<Vec<_>, _>>()?;
                let mut min_observed = f64::INFINITY;
                let mut at_time = 0.0;
                for idx in 1..values.len().saturating_sub(1) {
                    let d = (values[idx + 1] - values[idx - 1]) / (2.0 * traj.dt);
                    if d < min_observed {
                        min_observed = d;
                        at_time = traj.t[idx];
                    }
                }
                if !min_observed.is_finite() {
                    min_observed = 0.0;
                }
                out.push(DerivativeCheck {
                    subsystem: sub.name.clone(),
                    family: match family {
                        MembershipFamily::V => "v".into(),
                        MembershipFamily::H => "h".into(),
                    },
                    rule: rule + 1,
                    declared,
                    min_observed,
                    at_time,
                    warn: min_observed < declared,
                });
            }
        }
    }
    Ok(out)
}

/// Column names of the trajectory CSV.
pub fn csv_header(traj: &Trajectory) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for s in &traj.subsystems {
        for k in 0..s.x.first().map_or(0, Vec::len) {
            h.push(format!("x_{}_{}", s.name, k + 1));
        }
    }
    for s in &traj.subsystems {
        for k in 0..s.u.first().map_or(0, Vec::len) {
            h.push(format!("u_{}_{}", s.name, k + 1));
        }
    }
    for s in &traj.subsystems {
        h.push(format!("V_{}", s.name));
    }
    for s in &traj.subsystems {
        h.push(format!("E_state_{}", s.name));
        h.push(format!("E_phi_{}", s.name));
    }
    h
}

pub fn write_csv<W: std::io::Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record(csv_header(traj)).map_err(to_err)?;
    for (idx, t) in traj.t.iter().enumerate() {
        let mut row = vec![t.to_string()];
        for s in &traj.subsystems {
            row.extend(s.x[idx].iter().map(f64::to_string));
        }
        for s in &traj.subsystems {
            row.extend(s.u[idx].iter().map(f64::to_string));
        }
        for s in &traj.subsystems {
            row.push(s.lyapunov[idx].to_string());
        }
        for s in &traj.subsystems {
            row.push(s.state_energy[idx].to_string());
            row.push(s.phi_energy[idx].to_string());
        }
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(())
}

pub fn save_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(traj, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::Method;
    use crate::model::example22;
    use crate::synth::{synthesize, SynthOptions};
    use std::sync::OnceLock;

    fn report() -> &'static SynthesisReport {
        static R: OnceLock<SynthesisReport> = OnceLock::new();
        R.get_or_init(|| synthesize(&example22(), &SynthOptions::with_method(Method::Corollary1)).unwrap())
    }

    fn short() -> SimOptions {
        SimOptions {
            dt: 1e-3,
            t_end: 0.5,
            open_loop: false,
        }
    }

    #[test]
    fn origin_is_an_equilibrium() {
        let net = example22();
        let tr = simulate(&net, report(), &[vec![0.0, 0.0], vec![0.0, 0.0]], &short()).unwrap();
        for s in &tr.subsystems {
            assert!(s.x.iter().flatten().all(|&v| v == 0.0));
            assert!(s.u.iter().flatten().all(|&v| v == 0.0));
            assert_eq!(s.state_energy.last(), Some(&0.0));
        }
        for h in hinf_report(&tr, report(), 0.0) {
            assert_eq!(h.residual, 0.0);
            assert!(h.pass);
        }
    }

    #[test]
    fn energies_are_monotone_and_lyapunov_positive() {
        let net = example22();
        let tr = simulate(&net, report(), &[vec![1.0, -1.0], vec![-1.0, 0.5]], &short()).unwrap();
        assert_eq!(tr.t.len(), 501);
        for s in &tr.subsystems {
            assert!(s.state_energy.windows(2).all(|w| w[1] >= w[0]));
            assert!(s.phi_energy.windows(2).all(|w| w[1] >= w[0]));
            assert!(s.lyapunov.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn zero_rho_raises_the_residual_by_the_phi_term() {
        let net = example22();
        let tr = simulate(&net, report(), &[vec![1.0, -1.0], vec![-1.0, 0.5]], &short()).unwrap();
        let with = hinf_report(&tr, report(), 0.0);
        let without = hinf_report_with(&tr, &[0.0, 0.0], 0.0);
        for (a, b) in with.iter().zip(&without) {
            assert!(b.phi_energy > 0.0);
            let gap = b.residual - a.residual;
            assert!((gap - a.rho * a.rho * a.phi_energy).abs() < 1e-12 * (1.0 + gap.abs()));
            // Without the initial-energy credit, perfect attenuation is refuted.
            assert!(b.state_energy > 0.0);
        }
    }

    #[test]
    fn lyapunov_at_vertex_matches_direct_inverse() {
        let net = example22();
        let sub = &net.subsystems[1];
        let res = &report().subsystems[1];
        // x1 = 0: v = (1, 0), h = (0, 1).
        let x = [0.0, 0.8];
        let d = res.design().unwrap();
        let xv = DVector::from_column_slice(&x);
        let direct = xv.dot(&(d.x1[0][1].clone().try_inverse().unwrap() * &xv));
        let got = lyapunov_value(res, sub, &x).unwrap();
        assert!((got - direct).abs() < 1e-10 * direct);
        assert_eq!(lyapunov_value(res, sub, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let net = example22();
        let x0 = [vec![1.0, 0.0], vec![0.0, 0.0]];
        let bad = SimOptions { dt: 0.0, ..short() };
        assert!(simulate(&net, report(), &x0, &bad).is_err());
        let bad = SimOptions { t_end: 1e-4, ..short() };
        assert!(simulate(&net, report(), &x0, &bad).is_err());
        assert!(simulate(&net, report(), &x0[..1], &short()).is_err());
    }

    #[test]
    fn singular_descriptor_is_reported_with_time() {
        let mut net = example22();
        for e in &mut net.subsystems[0].e {
            *e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        }
        let err = simulate(&net, report(), &[vec![0.5, 0.0], vec![0.0, 0.0]], &short()).unwrap_err();
        match err {
            Error::Singular { what, .. } => assert!(what.contains("S1") && what.contains("t = 0")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut net = example22();
        for a in &mut net.subsystems[0].a {
            *a = DMatrix::from_row_slice(2, 2, &[400.0, 0.0, 0.0, 400.0]);
        }
        let opts = SimOptions {
            dt: 1e-2,
            t_end: 10.0,
            open_loop: true,
        };
        let err = simulate(&net, report(), &[vec![1.0, 1.0], vec![0.0, 0.0]], &opts).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn derivative_diagnostic_flags_positive_bound() {
        let mut net = example22();
        let tr = simulate(&net, report(), &[vec![1.0, -1.0], vec![-1.0, 0.5]], &short()).unwrap();
        net.subsystems[0].omega_bounds = vec![1.0, 1.0];
        let d = derivative_bound_diagnostic(&tr, &net).unwrap();
        assert_eq!(d.len(), 8);
        assert!(d.iter().any(|c| c.warn && c.subsystem == "S1" && c.family == "h"));
    }

    #[test]
    fn constant_memberships_have_zero_derivative() {
        let mut net = example22();
        for sub in &mut net.subsystems {
            sub.v_exprs = vec![
                crate::memexpr::MembershipExpr::parse("0.25", 2).unwrap(),
                crate::memexpr::MembershipExpr::parse("0.75", 2).unwrap(),
            ];
            sub.h_exprs = sub.v_exprs.clone();
        }
        let tr = simulate(&net, report(), &[vec![1.0, -1.0], vec![-1.0, 0.5]], &short()).unwrap();
        for c in derivative_bound_diagnostic(&tr, &net).unwrap() {
            assert_eq!(c.min_observed, 0.0);
            assert!(!c.warn);
        }
    }

    #[test]
    fn csv_layout() {
        let net = example22();
        let tr = simulate(&net, report(), &[vec![1.0, -1.0], vec![-1.0, 0.5]], &short()).unwrap();
        let mut buf = Vec::new();
        write_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x_S1_1,x_S1_2,x_S2_1,x_S2_2,u_S1_1,u_S2_1,V_S1,V_S2,E_state_S1,E_phi_S1,E_state_S2,E_phi_S2"
        );
        assert_eq!(lines.count(), tr.t.len());
    }
}
