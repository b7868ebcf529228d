//! Interconnected Takagi-Sugeno descriptor networks.
//!
//! Each subsystem `i` obeys
//!
//! ```text
//! Σ_j v_j(x_i) E^j ẋ_i = Σ_k h_k(x_i) (A^k x_i + B^k u_i + Σ_{α≠i} F_{iα}^k x_α)
//! ```
//!
//! with `l_i` left-hand rules (`E`, `v`) and `r_i` right-hand rules
//! (`A`, `B`, `F`, `h`). Memberships are functions of the local state only.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows, Rows};
use crate::memexpr::MembershipExpr;

/// Box sampling used to check the convex-sum property of membership families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
    pub tol: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            lower: -std::f64::consts::PI,
            upper: std::f64::consts::PI,
            samples: 1000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubsystemModel {
    pub name: String,
    pub state_dim: usize,
    pub input_dim: usize,
    /// `E^j`, one per left-hand rule.
    pub e: Vec<DMatrix<f64>>,
    /// `A^k`, one per right-hand rule.
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    /// Coupling matrices `F_{iα}^k` keyed by peer name. Missing peers mean zero coupling.
    pub f: BTreeMap<String, Vec<DMatrix<f64>>>,
    pub v_exprs: Vec<MembershipExpr>,
    pub h_exprs: Vec<MembershipExpr>,
    /// Lower bounds on `dh^s/dt`.
    pub omega_bounds: Vec<f64>,
    /// Lower bounds on `dv^j/dt`.
    pub lambda_bounds: Vec<f64>,
}

impl SubsystemModel {
    pub fn left_rule_count(&self) -> usize {
        self.e.len()
    }

    pub fn right_rule_count(&self) -> usize {
        self.a.len()
    }

    /// `Σ_j v_j E^j`.
    pub fn blend_e(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        check_simplex(v, self.e.len(), 1e-12)?;
        Ok(blend(&self.e, v))
    }

    pub fn v_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.v_exprs
            .iter()
            .map(|e| e.eval(x).map_err(Error::from))
            .collect()
    }

    pub fn h_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.h_exprs
            .iter()
            .map(|e| e.eval(x).map_err(Error::from))
            .collect()
    }
}

/// `Σ_k w_k M_k` without simplex checks.
pub fn blend(mats: &[DMatrix<f64>], w: &[f64]) -> DMatrix<f64> {
    let (r, c) = mats[0].shape();
    mats.iter()
        .zip(w)
        .fold(DMatrix::zeros(r, c), |acc, (m, &wk)| acc + m * wk)
}

pub fn check_simplex(w: &[f64], len: usize, tol: f64) -> Result<()> {
    if w.len() != len {
        return Err(Error::Simplex(format!(
            "expected {len} weights, got {}",
            w.len()
        )));
    }
    if let Some(bad) = w.iter().find(|&&x| !(x >= -tol)) {
        return Err(Error::Simplex(format!("negative weight {bad}")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::Simplex(format!("weights sum to {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub subsystems: Vec<SubsystemModel>,
}

impl NetworkModel {
    pub fn new(subsystems: Vec<SubsystemModel>) -> Result<Self> {
        let net = Self { subsystems };
        net.validate_structure()?;
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.subsystems.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.subsystems.iter().position(|s| s.name == name)
    }

    /// Coupling list `F_{iα}^k`, `k = 1..r_i`; zeros when the model omits the pair.
    pub fn coupling(&self, i: usize, alpha: usize) -> Vec<DMatrix<f64>> {
        let sub = &self.subsystems[i];
        let peer = &self.subsystems[alpha];
        match sub.f.get(&peer.name) {
            Some(list) => list.clone(),
            None => vec![DMatrix::zeros(sub.state_dim, peer.state_dim); sub.right_rule_count()],
        }
    }

    /// Checks every structural invariant: sizes, rule counts, coupling targets.
    pub fn validate_structure(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::Invalid(format!(
                "a network needs at least 2 subsystems, got {}",
                self.n()
            )));
        }
        for (idx, s) in self.subsystems.iter().enumerate() {
            if self.subsystems[..idx].iter().any(|o| o.name == s.name) {
                return Err(Error::Field {
                    field: "name".into(),
                    message: format!("duplicate subsystem name `{}`", s.name),
                });
            }
            validate_subsystem(s)?;
            for (peer, list) in &s.f {
                if *peer == s.name {
                    return Err(Error::Field {
                        field: format!("{}.F", s.name),
                        message: "a subsystem cannot couple to itself".into(),
                    });
                }
                let Some(p) = self.index_of(peer) else {
                    return Err(Error::Field {
                        field: format!("{}.F", s.name),
                        message: format!("unknown peer `{peer}`"),
                    });
                };
                if list.len() != s.right_rule_count() {
                    return Err(Error::Field {
                        field: format!("{}.F.{peer}", s.name),
                        message: format!(
                            "expected {} matrices (one per right-hand rule), got {}",
                            s.right_rule_count(),
                            list.len()
                        ),
                    });
                }
                let na = self.subsystems[p].state_dim;
                for (k, m) in list.iter().enumerate() {
                    check_shape(m, &format!("{}.F.{peer}[{}]", s.name, k + 1), s.state_dim, na)?;
                }
            }
        }
        Ok(())
    }

    pub fn validate_memberships(&self, opts: &ValidationOptions) -> Result<()> {
        for s in &self.subsystems {
            if let Some(v) = validate_memberships(s, opts.samples, opts.tol, opts.lower, opts.upper)
                .into_iter()
                .next()
            {
                return Err(Error::Membership {
                    subsystem: s.name.clone(),
                    family: v.family.to_string(),
                    message: v.message,
                    witness: v.state,
                });
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json_str_with(text, &ValidationOptions::default())
    }

    pub fn from_json_str_with(text: &str, opts: &ValidationOptions) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let subs = file
            .subsystems
            .into_iter()
            .map(SubsystemFile::into_model)
            .collect::<Result<Vec<_>>>()?;
        let net = Self::new(subs)?;
        net.validate_memberships(opts)?;
        Ok(net)
    }

    pub fn to_json_string(&self) -> String {
        let file = ModelFile {
            subsystems: self.subsystems.iter().map(SubsystemFile::from_model).collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_network(path: &Path) -> Result<NetworkModel> {
    load_network_with(path, &ValidationOptions::default())
}

pub fn load_network_with(path: &Path, opts: &ValidationOptions) -> Result<NetworkModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NetworkModel::from_json_str_with(&text, opts)
}

fn check_shape(m: &DMatrix<f64>, name: &str, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension {
            matrix: name.to_string(),
            got_rows: m.nrows(),
            got_cols: m.ncols(),
            want_rows: rows,
            want_cols: cols,
        });
    }
    Ok(())
}

fn validate_subsystem(s: &SubsystemModel) -> Result<()> {
    let field = |f: &str, message: String| Error::Field {
        field: format!("{}.{f}", s.name),
        message,
    };
    if s.state_dim == 0 {
        return Err(field("state_dim", "must be positive".into()));
    }
    if s.input_dim == 0 {
        return Err(field("input_dim", "must be positive".into()));
    }
    let l = s.e.len();
    let r = s.a.len();
    if l == 0 {
        return Err(field("E", "at least one left-hand rule is required".into()));
    }
    if r == 0 {
        return Err(field("A", "at least one right-hand rule is required".into()));
    }
    if s.b.len() != r {
        return Err(field("B", format!("expected {r} matrices, got {}", s.b.len())));
    }
    if s.v_exprs.len() != l {
        return Err(field("v_exprs", format!("expected {l} expressions, got {}", s.v_exprs.len())));
    }
    if s.h_exprs.len() != r {
        return Err(field("h_exprs", format!("expected {r} expressions, got {}", s.h_exprs.len())));
    }
    if s.omega_bounds.len() != r {
        return Err(field(
            "omega_bounds",
            format!("expected {r} bounds, got {}", s.omega_bounds.len()),
        ));
    }
    if s.lambda_bounds.len() != l {
        return Err(field(
            "lambda_bounds",
            format!("expected {l} bounds, got {}", s.lambda_bounds.len()),
        ));
    }
    if s.omega_bounds.iter().chain(&s.lambda_bounds).any(|b| !b.is_finite()) {
        return Err(field("omega_bounds", "derivative bounds must be finite".into()));
    }
    let n = s.state_dim;
    for (j, m) in s.e.iter().enumerate() {
        check_shape(m, &format!("{}.E[{}]", s.name, j + 1), n, n)?;
    }
    for (k, m) in s.a.iter().enumerate() {
        check_shape(m, &format!("{}.A[{}]", s.name, k + 1), n, n)?;
    }
    for (k, m) in s.b.iter().enumerate() {
        check_shape(m, &format!("{}.B[{}]", s.name, k + 1), n, s.input_dim)?;
    }
    for e in s.v_exprs.iter().chain(&s.h_exprs) {
        if e.state_dim() != n {
            return Err(field("v_exprs", "expression parsed for the wrong state dimension".into()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipFamily {
    V,
    H,
}

impl std::fmt::Display for MembershipFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MembershipFamily::V => "v_exprs",
            MembershipFamily::H => "h_exprs",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipViolation {
    pub family: MembershipFamily,
    pub state: Vec<f64>,
    pub message: String,
}

/// Samples the box `[lower, upper]^n` on a Halton sequence and reports every
/// point where a membership leaves `[-tol, 1+tol]` or a family fails to sum to 1.
pub fn validate_memberships(
    sub: &SubsystemModel,
    sample_count: usize,
    tol: f64,
    lower: f64,
    upper: f64,
) -> Vec<MembershipViolation> {
    let mut out = Vec::new();
    for idx in 0..sample_count {
        let x: Vec<f64> = (0..sub.state_dim)
            .map(|d| lower + (upper - lower) * halton(idx + 1, nth_prime(d)))
            .collect();
        for (family, exprs) in [
            (MembershipFamily::V, &sub.v_exprs),
            (MembershipFamily::H, &sub.h_exprs),
        ] {
            let mut sum = 0.0;
            let mut failed = false;
            for (k, e) in exprs.iter().enumerate() {
                match e.eval(&x) {
                    Ok(w) if w >= -tol && w <= 1.0 + tol => sum += w,
                    Ok(w) => {
                        out.push(MembershipViolation {
                            family,
                            state: x.clone(),
                            message: format!("membership {} = {w} outside [0, 1]", k + 1),
                        });
                        failed = true;
                    }
                    Err(err) => {
                        out.push(MembershipViolation {
                            family,
                            state: x.clone(),
                            message: format!("membership {} failed to evaluate: {err}", k + 1),
                        });
                        failed = true;
                    }
                }
            }
            if !failed && (sum - 1.0).abs() > tol {
                out.push(MembershipViolation {
                    family,
                    state: x.clone(),
                    message: format!("memberships sum to {sum}"),
                });
            }
        }
    }
    out
}

fn nth_prime(d: usize) -> usize {
    const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    PRIMES[d % PRIMES.len()]
}

fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    subsystems: Vec<SubsystemFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubsystemFile {
    name: String,
    state_dim: usize,
    input_dim: usize,
    #[serde(rename = "E")]
    e: Vec<Rows>,
    #[serde(rename = "A")]
    a: Vec<Rows>,
    #[serde(rename = "B")]
    b: Vec<Rows>,
    #[serde(rename = "F", default)]
    f: BTreeMap<String, Vec<Rows>>,
    v_exprs: Vec<String>,
    h_exprs: Vec<String>,
    omega_bounds: Vec<f64>,
    lambda_bounds: Vec<f64>,
}

impl SubsystemFile {
    fn into_model(self) -> Result<SubsystemModel> {
        let name = self.name;
        let mats = |list: &[Rows], tag: &str| -> Result<Vec<DMatrix<f64>>> {
            list.iter()
                .enumerate()
                .map(|(k, rows)| from_rows(rows, &format!("{name}.{tag}[{}]", k + 1)))
                .collect()
        };
        let exprs = |list: &[String], tag: &str| -> Result<Vec<MembershipExpr>> {
            list.iter()
                .enumerate()
                .map(|(k, src)| {
                    MembershipExpr::parse(src, self.state_dim).map_err(|err| Error::Field {
                        field: format!("{name}.{tag}[{}]", k + 1),
                        message: err.to_string(),
                    })
                })
                .collect()
        };
        let e = mats(&self.e, "E")?;
        let a = mats(&self.a, "A")?;
        let b = mats(&self.b, "B")?;
        let mut f = BTreeMap::new();
        for (peer, list) in &self.f {
            f.insert(peer.clone(), mats(list, &format!("F.{peer}"))?);
        }
        let v_exprs = exprs(&self.v_exprs, "v_exprs")?;
        let h_exprs = exprs(&self.h_exprs, "h_exprs")?;
        Ok(SubsystemModel {
            name,
            state_dim: self.state_dim,
            input_dim: self.input_dim,
            e,
            a,
            b,
            f,
            v_exprs,
            h_exprs,
            omega_bounds: self.omega_bounds,
            lambda_bounds: self.lambda_bounds,
        })
    }

    fn from_model(s: &SubsystemModel) -> Self {
        let rows = |list: &[DMatrix<f64>]| list.iter().map(to_rows).collect::<Vec<_>>();
        Self {
            name: s.name.clone(),
            state_dim: s.state_dim,
            input_dim: s.input_dim,
            e: rows(&s.e),
            a: rows(&s.a),
            b: rows(&s.b),
            f: s.f.iter().map(|(k, v)| (k.clone(), rows(v))).collect(),
            v_exprs: s.v_exprs.iter().map(|e| e.source().to_string()).collect(),
            h_exprs: s.h_exprs.iter().map(|e| e.source().to_string()).collect(),
            omega_bounds: s.omega_bounds.clone(),
            lambda_bounds: s.lambda_bounds.clone(),
        }
    }
}

/// The two-subsystem example network bundled with the crate (`a = 0`, `b = -0.5`,
/// derivative bounds `-2`).
pub const EXAMPLE22_JSON: &str = include_str!("../fixtures/example22.json");

pub fn example22() -> NetworkModel {
    NetworkModel::from_json_str(EXAMPLE22_JSON).expect("bundled fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c])
    }

    #[test]
    fn fixture_shape() {
        let net = example22();
        assert_eq!(net.n(), 2);
        for s in &net.subsystems {
            assert_eq!(s.left_rule_count(), 2);
            assert_eq!(s.right_rule_count(), 2);
            assert_eq!(s.state_dim, 2);
            assert_eq!(s.input_dim, 1);
        }
    }

    #[test]
    fn blend_e_vertices_and_midpoint() {
        let net = example22();
        let s = &net.subsystems[0];
        assert_eq!(s.blend_e(&[1.0, 0.0]).unwrap(), m(&[&[1.0, 0.0], &[-1.0, 1.0]]));
        assert_eq!(s.blend_e(&[0.0, 1.0]).unwrap(), m(&[&[1.0, 0.5], &[-1.0, 1.0]]));
        assert_eq!(s.blend_e(&[0.5, 0.5]).unwrap(), m(&[&[1.0, 0.25], &[-1.0, 1.0]]));
        assert!(matches!(s.blend_e(&[0.7, 0.7]), Err(Error::Simplex(_))));
        assert!(matches!(s.blend_e(&[1.5, -0.5]), Err(Error::Simplex(_))));
    }

    #[test]
    fn blend_e_determinant_over_simplex() {
        let net = example22();
        let s = &net.subsystems[0];
        for t in 0..=20 {
            let v1 = t as f64 / 20.0;
            let det = s.blend_e(&[v1, 1.0 - v1]).unwrap().determinant();
            assert!((det - (1.0 + 0.5 * (1.0 - v1))).abs() < 1e-14);
        }
    }

    #[test]
    fn fixture_memberships_pass_validation() {
        let net = example22();
        for s in &net.subsystems {
            let pi = std::f64::consts::PI;
            assert!(validate_memberships(s, 1000, 1e-9, -pi, pi).is_empty());
        }
    }

    fn with_exprs(v: &[&str], h: &[&str]) -> SubsystemModel {
        let mut s = example22().subsystems[0].clone();
        s.v_exprs = v.iter().map(|e| MembershipExpr::parse(e, 2).unwrap()).collect();
        s.h_exprs = h.iter().map(|e| MembershipExpr::parse(e, 2).unwrap()).collect();
        s
    }

    #[test]
    fn constant_memberships() {
        let bad = with_exprs(&["1", "0"], &["0.6", "0.6"]);
        let report = validate_memberships(&bad, 10, 1e-9, -1.0, 1.0);
        assert_eq!(report.len(), 10);
        assert!(report.iter().all(|r| r.family == MembershipFamily::H));
        assert!(report[0].message.contains("1.2"));

        let ok = with_exprs(&["1", "0"], &["sin(x1)^2", "cos(x1)^2"]);
        assert!(validate_memberships(&ok, 1000, 1e-9, -3.0, 3.0).is_empty());
    }

    #[test]
    fn out_of_range_membership_is_reported() {
        let bad = with_exprs(&["x1", "1-x1"], &["0.5", "0.5"]);
        let report = validate_memberships(&bad, 50, 1e-9, -1.0, 1.0);
        assert!(!report.is_empty());
        assert!(report.iter().all(|r| r.family == MembershipFamily::V));
    }

    #[test]
    fn wrong_shape_is_a_dimension_error() {
        let text = EXAMPLE22_JSON.replacen("[0.0, 1.0], [0.839, -0.73]", "[0.0, 1.0, 2.0], [0.839, -0.73, 0.0]", 1);
        assert_ne!(text, EXAMPLE22_JSON);
        match NetworkModel::from_json_str(&text) {
            Err(Error::Dimension { matrix, .. }) => assert_eq!(matrix, "S1.A[1]"),
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_locus() {
        match NetworkModel::from_json_str("{\n \"subsystems\": [ }") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn membership_sum_violation_names_witness() {
        let text = EXAMPLE22_JSON.replacen("\"1-sin(x1)^2\"", "\"1.1-sin(x1)^2\"", 1);
        match NetworkModel::from_json_str(&text) {
            Err(Error::Membership { subsystem, witness, .. }) => {
                assert_eq!(subsystem, "S1");
                assert_eq!(witness.len(), 2);
            }
            other => panic!("expected membership error, got {other:?}"),
        }
    }

    #[test]
    fn bad_coupling_targets() {
        let selfref = EXAMPLE22_JSON.replacen("\"S2\": [", "\"S1\": [", 1);
        assert!(matches!(NetworkModel::from_json_str(&selfref), Err(Error::Field { .. })));
        let unknown = EXAMPLE22_JSON.replacen("\"S2\": [", "\"S9\": [", 1);
        assert!(matches!(NetworkModel::from_json_str(&unknown), Err(Error::Field { .. })));
    }

    #[test]
    fn missing_coupling_is_zero() {
        let mut net = example22();
        net.subsystems[0].f.clear();
        net.validate_structure().unwrap();
        let f = net.coupling(0, 1);
        assert_eq!(f.len(), 2);
        assert!(f.iter().all(|m| m.shape() == (2, 2) && m.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn single_subsystem_network_is_rejected() {
        let mut net = example22();
        net.subsystems.truncate(1);
        net.subsystems[0].f.clear();
        assert!(net.validate_structure().is_err());
    }

    #[test]
    fn json_round_trip_is_idempotent() {
        let net = example22();
        let text = net.to_json_string();
        let back = NetworkModel::from_json_str(&text).unwrap();
        assert_eq!(text, back.to_json_string());
        for (a, b) in net.subsystems.iter().zip(&back.subsystems) {
            assert_eq!(a.e, b.e);
            assert_eq!(a.a, b.a);
            assert_eq!(a.b, b.b);
            assert_eq!(a.f, b.f);
        }
    }
}
