//! Assembly of the affine block LMIs for decentralized non-PDC synthesis.
//!
//! For subsystem `i`, peer `α` and rule indices `(j, k, s)` the vertex matrix is
//!
//! ```text
//! ┌ X3+X3ᵀ-Φ                      *            *        * ┐
//! │ A^k X1 + B^k K - E^j X3 + X4ᵀ  -E^j X4 - *   *        * │
//! │ 0                             (n-1) F̂ᵀ     -μ c F̂ᵀF̂  * │
//! └ X1                            0             0       -I ┘
//! ```
//!
//! with `c = (n-1)(2n-3)`, `F̂ = F_{iα}^k V` the coupling compressed onto the
//! row space of the stacked `F_{iα}^1..r`, and `Φ` the membership-derivative
//! majorization (absent in the shared-`X1` method). All matrices here are
//! symmetric affine functions of one subsystem's decision vector.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::NetworkModel;

/// Which set of conditions to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Non-quadratic conditions with `X1^{js}` per rule pair and derivative bounds.
    Theorem1,
    /// Relaxed-quadratic conditions with a single shared `X1`.
    Corollary1,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Theorem1 => "theorem1",
            Method::Corollary1 => "corollary1",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Method::Theorem1 => "th1",
            Method::Corollary1 => "cor1",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem1" | "th1" => Ok(Method::Theorem1),
            "corollary1" | "cor1" => Ok(Method::Corollary1),
            other => Err(Error::Invalid(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Symmetric (or rectangular, during assembly) matrix affine in a decision vector:
/// `constant + Σ_p y_p · terms[p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMat {
    pub constant: DMatrix<f64>,
    pub terms: BTreeMap<usize, DMatrix<f64>>,
}

impl AffineMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            constant: DMatrix::zeros(rows, cols),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        Self {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    /// Full matrix variable whose entry `(r, c)` is `y[offset + r·cols + c]`.
    pub fn full_var(offset: usize, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let mut t = DMatrix::zeros(rows, cols);
                t[(r, c)] = 1.0;
                out.terms.insert(offset + r * cols + c, t);
            }
        }
        out
    }

    /// Symmetric variable stored by its upper triangle, row-major.
    pub fn sym_var(offset: usize, n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let mut t = DMatrix::zeros(n, n);
                t[(r, c)] = 1.0;
                t[(c, r)] = 1.0;
                out.terms.insert(offset + sym_index(n, r, c), t);
            }
        }
        out
    }

    /// `y[index] · m`.
    pub fn scalar_var(index: usize, m: DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        out.terms.insert(index, m);
        out
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn transpose(&self) -> Self {
        Self {
            constant: self.constant.transpose(),
            terms: self.terms.iter().map(|(&p, t)| (p, t.transpose())).collect(),
        }
    }

    pub fn scale(&self, w: f64) -> Self {
        Self {
            constant: &self.constant * w,
            terms: self.terms.iter().map(|(&p, t)| (p, t * w)).collect(),
        }
    }

    /// `m · self`.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> Self {
        Self {
            constant: m * &self.constant,
            terms: self.terms.iter().map(|(&p, t)| (p, m * t)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "affine shape mismatch");
        let mut out = self.clone();
        out.constant += &other.constant;
        for (&p, t) in &other.terms {
            match out.terms.get_mut(&p) {
                Some(acc) => *acc += t,
                None => {
                    out.terms.insert(p, t.clone());
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Drops coefficient matrices that are identically zero.
    pub fn prune(mut self) -> Self {
        self.terms.retain(|_, t| t.iter().any(|&v| v != 0.0));
        self
    }

    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (&p, t) in &self.terms {
            out += t * y[p];
        }
        out
    }

    /// Symmetric matrix from lower-triangular blocks `(row, col, block)` with
    /// `row >= col`; the strict upper part is filled by transposition.
    pub fn from_lower_blocks(sizes: &[usize], blocks: Vec<(usize, usize, AffineMat)>) -> Self {
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let dim: usize = sizes.iter().sum();
        let mut out = Self::zeros(dim, dim);
        let place = |r0: usize, c0: usize, m: &DMatrix<f64>, target: &mut DMatrix<f64>| {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    target[(r0 + r, c0 + c)] += m[(r, c)];
                }
            }
        };
        for (br, bc, blk) in blocks {
            assert!(br >= bc, "only lower blocks may be given");
            assert_eq!(blk.shape(), (sizes[br], sizes[bc]), "block ({br},{bc}) has wrong shape");
            let (r0, c0) = (offsets[br], offsets[bc]);
            place(r0, c0, &blk.constant, &mut out.constant);
            if br != bc {
                place(c0, r0, &blk.constant.transpose(), &mut out.constant);
            }
            for (p, t) in &blk.terms {
                let target = out.terms.entry(*p).or_insert_with(|| DMatrix::zeros(dim, dim));
                place(r0, c0, t, target);
                if br != bc {
                    place(c0, r0, &t.transpose(), target);
                }
            }
        }
        out
    }
}

/// Row-major index of `(r, c)`, `r <= c`, in the upper triangle of an `n×n` matrix.
pub fn sym_index(n: usize, r: usize, c: usize) -> usize {
    debug_assert!(r <= c && c < n);
    r * n - r * (r + 1) / 2 + c
}

fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Scalar layout of one subsystem's decision variables:
/// `X1` blocks, then `X3`, `X4`, gains `K`, and finally `μ = ρ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVarCatalog {
    pub method: Method,
    pub state_dim: usize,
    pub input_dim: usize,
    pub left_rules: usize,
    pub right_rules: usize,
    x1: Vec<Vec<usize>>,
    x3: Vec<Vec<usize>>,
    x4: Vec<Vec<usize>>,
    k: Vec<Vec<usize>>,
    mu: usize,
    len: usize,
}

/// Solved (or candidate) matrices for one subsystem, indexed 0-based as
/// `x1[j][s]`, `x3[k][s]`, `x4[k][s]`, `k[j][s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    pub x1: Vec<Vec<DMatrix<f64>>>,
    pub x3: Vec<Vec<DMatrix<f64>>>,
    pub x4: Vec<Vec<DMatrix<f64>>>,
    pub k: Vec<Vec<DMatrix<f64>>>,
    pub mu: f64,
}

impl DecisionVarCatalog {
    pub fn new(method: Method, state_dim: usize, input_dim: usize, l: usize, r: usize) -> Self {
        let n = state_dim;
        let mut next = 0;
        let mut take = |size: usize| {
            let o = next;
            next += size;
            o
        };
        let x1 = match method {
            Method::Theorem1 => (0..l)
                .map(|_| (0..r).map(|_| take(sym_len(n))).collect())
                .collect(),
            Method::Corollary1 => {
                let shared = take(sym_len(n));
                vec![vec![shared; r]; l]
            }
        };
        let x3 = (0..r).map(|_| (0..r).map(|_| take(n * n)).collect()).collect();
        let x4 = (0..r).map(|_| (0..r).map(|_| take(n * n)).collect()).collect();
        let k = (0..l)
            .map(|_| (0..r).map(|_| take(input_dim * n)).collect())
            .collect();
        let mu = take(1);
        Self {
            method,
            state_dim,
            input_dim,
            left_rules: l,
            right_rules: r,
            x1,
            x3,
            x4,
            k,
            mu,
            len: next,
        }
    }

    pub fn for_subsystem(net: &NetworkModel, i: usize, method: Method) -> Self {
        let s = &net.subsystems[i];
        Self::new(method, s.state_dim, s.input_dim, s.left_rule_count(), s.right_rule_count())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mu_index(&self) -> usize {
        self.mu
    }

    pub fn x1(&self, j: usize, s: usize) -> AffineMat {
        AffineMat::sym_var(self.x1[j][s], self.state_dim)
    }

    pub fn x3(&self, k: usize, s: usize) -> AffineMat {
        AffineMat::full_var(self.x3[k][s], self.state_dim, self.state_dim)
    }

    pub fn x4(&self, k: usize, s: usize) -> AffineMat {
        AffineMat::full_var(self.x4[k][s], self.state_dim, self.state_dim)
    }

    pub fn gain(&self, j: usize, s: usize) -> AffineMat {
        AffineMat::full_var(self.k[j][s], self.input_dim, self.state_dim)
    }

    /// Distinct `X1` variables, with the index sets of their scalar entries.
    pub fn x1_blocks(&self) -> Vec<(usize, usize, Vec<usize>)> {
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for j in 0..self.left_rules {
            for s in 0..self.right_rules {
                let off = self.x1[j][s];
                if !seen.contains(&off) {
                    seen.push(off);
                    out.push((j, s, (off..off + sym_len(self.state_dim)).collect()));
                }
            }
        }
        out
    }

    pub fn unpack(&self, y: &[f64]) -> DesignMatrices {
        assert_eq!(y.len(), self.len, "decision vector length");
        let n = self.state_dim;
        let grid = |offs: &Vec<Vec<usize>>, f: &dyn Fn(usize) -> AffineMat| {
            offs.iter()
                .map(|row| row.iter().map(|&o| f(o).eval(y)).collect())
                .collect::<Vec<Vec<_>>>()
        };
        let m = self.input_dim;
        DesignMatrices {
            x1: grid(&self.x1, &|o| AffineMat::sym_var(o, n)),
            x3: grid(&self.x3, &|o| AffineMat::full_var(o, n, n)),
            x4: grid(&self.x4, &|o| AffineMat::full_var(o, n, n)),
            k: grid(&self.k, &|o| AffineMat::full_var(o, m, n)),
            mu: y[self.mu],
        }
    }

    /// Inverse of [`unpack`](Self::unpack). `X1` entries are read from the
    /// upper triangle; in shared mode `x1[0][0]` is used.
    pub fn pack(&self, d: &DesignMatrices) -> Result<Vec<f64>> {
        let n = self.state_dim;
        let mut y = vec![0.0; self.len];
        let check = |m: &DMatrix<f64>, r: usize, c: usize, what: &str| -> Result<()> {
            if m.shape() != (r, c) {
                return Err(Error::Dimension {
                    matrix: what.to_string(),
                    got_rows: m.nrows(),
                    got_cols: m.ncols(),
                    want_rows: r,
                    want_cols: c,
                });
            }
            Ok(())
        };
        let dims_ok = d.x1.len() == self.left_rules
            && d.x1.iter().all(|r| r.len() == self.right_rules)
            && d.k.len() == self.left_rules
            && d.k.iter().all(|r| r.len() == self.right_rules)
            && d.x3.len() == self.right_rules
            && d.x3.iter().all(|r| r.len() == self.right_rules)
            && d.x4.len() == self.right_rules
            && d.x4.iter().all(|r| r.len() == self.right_rules);
        if !dims_ok {
            return Err(Error::Invalid("design matrices do not match rule counts".into()));
        }
        for j in 0..self.left_rules {
            for s in 0..self.right_rules {
                let m = &d.x1[j][s];
                check(m, n, n, "X1")?;
                let off = self.x1[j][s];
                for r in 0..n {
                    for c in r..n {
                        y[off + sym_index(n, r, c)] = m[(r, c)];
                    }
                }
                let g = &d.k[j][s];
                check(g, self.input_dim, n, "K")?;
                for r in 0..self.input_dim {
                    for c in 0..n {
                        y[self.k[j][s] + r * n + c] = g[(r, c)];
                    }
                }
            }
        }
        for k in 0..self.right_rules {
            for s in 0..self.right_rules {
                for (mats, offs, what) in [(&d.x3, &self.x3, "X3"), (&d.x4, &self.x4, "X4")] {
                    let m = &mats[k][s];
                    check(m, n, n, what)?;
                    for r in 0..n {
                        for c in 0..n {
                            y[offs[k][s] + r * n + c] = m[(r, c)];
                        }
                    }
                }
            }
        }
        y[self.mu] = d.mu;
        Ok(y)
    }
}

/// How the interconnection block is made strictly feasible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "eps")]
pub enum Interconnect {
    /// Compress onto the row space of the stacked coupling matrices.
    Reduce,
    /// Keep the full block and add `-ε·I` to it (`ε = 0` is the literal form).
    Regularize(f64),
}

/// Basis `V` (`n_α × q`) and compressed couplings `F^k V` for one `(i, α)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectReduction {
    pub basis: DMatrix<f64>,
    pub reduced: Vec<DMatrix<f64>>,
    /// Extra `-eps·I` added to the interconnection diagonal block.
    pub eps: f64,
}

impl InterconnectReduction {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// No compression: `V = I`.
    pub fn identity(f_list: &[DMatrix<f64>], eps: f64) -> Result<Self> {
        let na = check_f_list(f_list)?;
        Ok(Self {
            basis: DMatrix::identity(na, na),
            reduced: f_list.to_vec(),
            eps,
        })
    }
}

fn check_f_list(f_list: &[DMatrix<f64>]) -> Result<usize> {
    let first = f_list
        .first()
        .ok_or_else(|| Error::Invalid("empty coupling list".into()))?;
    if f_list.iter().any(|f| f.shape() != first.shape()) {
        return Err(Error::Invalid("coupling matrices differ in shape".into()));
    }
    Ok(first.ncols())
}

/// Orthonormal basis of the row space of `[F^1; …; F^r]`; each `F^k` is
/// replaced by `F^k V`. Zero coupling gives `q = 0`.
pub fn reduce_interconnect(f_list: &[DMatrix<f64>]) -> Result<InterconnectReduction> {
    let na = check_f_list(f_list)?;
    let rows: usize = f_list.iter().map(|f| f.nrows()).sum();
    let mut stacked = DMatrix::zeros(rows, na);
    let mut r0 = 0;
    for f in f_list {
        stacked.view_mut((r0, 0), f.shape()).copy_from(f);
        r0 += f.nrows();
    }
    let basis = linalg::row_space_basis(&stacked, 1e-10);
    let reduced = f_list.iter().map(|f| f * &basis).collect();
    Ok(InterconnectReduction {
        basis,
        reduced,
        eps: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmiKind {
    /// Unrelaxed vertex `Γ^{jks}`.
    Vertex,
    /// Relaxation diagonal term `Γ^{jkk}`.
    Diagonal,
    /// Relaxation pair `Γ^{jkk}/(r-1) + (Γ^{jks} + Γ^{jsk})/2`.
    Combined,
}

/// 0-based identification of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LmiLabel {
    pub subsystem: usize,
    pub peer: usize,
    pub j: usize,
    pub k: usize,
    pub s: usize,
    pub kind: LmiKind,
}

impl fmt::Display for LmiLabel {
    /// 1-based, e.g. `i1_a2_j1_k1_s2_combined`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            LmiKind::Vertex => "vertex",
            LmiKind::Diagonal => "diagonal",
            LmiKind::Combined => "combined",
        };
        write!(
            f,
            "i{}_a{}_j{}_k{}_s{}_{kind}",
            self.subsystem + 1,
            self.peer + 1,
            self.j + 1,
            self.k + 1,
            self.s + 1
        )
    }
}

/// One affine inequality `body(y) + shift·I ⪯ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiInstance {
    pub label: LmiLabel,
    pub body: AffineMat,
    pub shift: f64,
}

impl LmiInstance {
    pub fn dimension(&self) -> usize {
        self.body.constant.nrows()
    }

    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        self.body.eval(y)
    }

    /// Linear combination on the affine representation.
    pub fn combine(label: LmiLabel, parts: &[(f64, &LmiInstance)]) -> Self {
        let (w0, first) = parts[0];
        let mut body = first.body.scale(w0);
        for (w, inst) in &parts[1..] {
            body = body.add(&inst.body.scale(*w));
        }
        Self {
            label,
            body: body.prune(),
            shift: first.shift,
        }
    }

    /// Writes `<label>_const.mtx` and one `<label>_var<p>.mtx` per coefficient
    /// in MatrixMarket coordinate format (symmetric, lower triangle, 1-based).
    pub fn dump(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: String, m: &DMatrix<f64>, comment: String| -> Result<()> {
            let path = dir.join(name);
            let mut out = String::new();
            out.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
            out.push_str(&format!("% {comment}\n"));
            let mut entries = Vec::new();
            for c in 0..m.ncols() {
                for r in c..m.nrows() {
                    if m[(r, c)] != 0.0 {
                        entries.push(format!("{} {} {:e}", r + 1, c + 1, m[(r, c)]));
                    }
                }
            }
            out.push_str(&format!("{} {} {}\n", m.nrows(), m.ncols(), entries.len()));
            for e in entries {
                out.push_str(&e);
                out.push('\n');
            }
            let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(out.as_bytes()).map_err(|e| Error::io(&path, e))
        };
        write(
            format!("{}_const.mtx", self.label),
            &self.body.constant,
            format!("{} constant block, strictness shift {:e}", self.label, self.shift),
        )?;
        for (p, t) in &self.body.terms {
            write(
                format!("{}_var{p}.mtx", self.label),
                t,
                format!("{} coefficient of decision variable {p}", self.label),
            )?;
        }
        Ok(())
    }
}

/// Options shared by every instance of one synthesis run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// Base strictness margin, scaled by the largest data magnitude of the subsystem.
    pub delta: f64,
    pub interconnect: Interconnect,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            delta: 1e-7,
            interconnect: Interconnect::Reduce,
        }
    }
}

/// Derivative lower bounds (`ϖ` for `h`, `λ` for `v`) entering the `(1,1)` block.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBounds {
    pub omega: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl DerivativeBounds {
    pub fn zero(l: usize, r: usize) -> Self {
        Self {
            omega: vec![0.0; r],
            lambda: vec![0.0; l],
        }
    }
}

/// Everything needed to assemble subsystem `i`'s instances.
#[derive(Debug, Clone)]
pub struct SubsystemLmis<'a> {
    pub net: &'a NetworkModel,
    pub i: usize,
    pub method: Method,
    pub catalog: DecisionVarCatalog,
    pub bounds: DerivativeBounds,
    pub shift: f64,
    reductions: BTreeMap<usize, InterconnectReduction>,
}

impl<'a> SubsystemLmis<'a> {
    /// Uses the model's declared derivative bounds.
    pub fn new(net: &'a NetworkModel, i: usize, method: Method, opts: &AssemblyOptions) -> Result<Self> {
        let sub = net
            .subsystems
            .get(i)
            .ok_or_else(|| Error::Index(format!("subsystem {i} of {}", net.n())))?;
        let bounds = DerivativeBounds {
            omega: sub.omega_bounds.clone(),
            lambda: sub.lambda_bounds.clone(),
        };
        Self::with_bounds(net, i, method, bounds, DecisionVarCatalog::for_subsystem(net, i, method), opts)
    }

    /// Explicit bounds and catalog; lets the non-quadratic blocks be assembled
    /// over a shared-`X1` catalog.
    pub fn with_bounds(
        net: &'a NetworkModel,
        i: usize,
        method: Method,
        bounds: DerivativeBounds,
        catalog: DecisionVarCatalog,
        opts: &AssemblyOptions,
    ) -> Result<Self> {
        let sub = net
            .subsystems
            .get(i)
            .ok_or_else(|| Error::Index(format!("subsystem {i} of {}", net.n())))?;
        if bounds.omega.len() != sub.right_rule_count() || bounds.lambda.len() != sub.left_rule_count() {
            return Err(Error::Invalid("derivative bound lengths do not match rule counts".into()));
        }
        let mut scale = 1.0_f64;
        for m in sub.e.iter().chain(&sub.a).chain(&sub.b).chain(sub.f.values().flatten()) {
            scale = scale.max(linalg::max_abs(m));
        }
        let mut reductions = BTreeMap::new();
        for alpha in (0..net.n()).filter(|&a| a != i) {
            let f = net.coupling(i, alpha);
            let red = match opts.interconnect {
                Interconnect::Reduce => reduce_interconnect(&f)?,
                Interconnect::Regularize(eps) => InterconnectReduction::identity(&f, eps)?,
            };
            reductions.insert(alpha, red);
        }
        Ok(Self {
            net,
            i,
            method,
            catalog,
            bounds,
            shift: opts.delta * scale,
            reductions,
        })
    }

    pub fn reduction(&self, alpha: usize) -> Option<&InterconnectReduction> {
        self.reductions.get(&alpha)
    }

    pub fn peers(&self) -> Vec<usize> {
        self.reductions.keys().copied().collect()
    }

    fn check_indices(&self, alpha: usize, j: usize, k: usize, s: usize) -> Result<()> {
        let sub = &self.net.subsystems[self.i];
        if alpha == self.i || alpha >= self.net.n() {
            return Err(Error::Index(format!("peer {alpha} for subsystem {}", self.i)));
        }
        if j >= sub.left_rule_count() {
            return Err(Error::Index(format!("left rule {j} of {}", sub.left_rule_count())));
        }
        if k >= sub.right_rule_count() || s >= sub.right_rule_count() {
            return Err(Error::Index(format!(
                "right rules ({k}, {s}) of {}",
                sub.right_rule_count()
            )));
        }
        Ok(())
    }

    /// Vertex `Γ^{jks}` (non-quadratic blocks) for peer `alpha`.
    pub fn gamma(&self, alpha: usize, j: usize, k: usize, s: usize) -> Result<LmiInstance> {
        self.vertex_impl(alpha, j, k, s, true)
    }

    /// Vertex `T^{jks}`: same blocks without the derivative majorization.
    pub fn t_block(&self, alpha: usize, j: usize, k: usize, s: usize) -> Result<LmiInstance> {
        self.vertex_impl(alpha, j, k, s, false)
    }

    /// Vertex for this context's method.
    pub fn vertex(&self, alpha: usize, j: usize, k: usize, s: usize) -> Result<LmiInstance> {
        match self.method {
            Method::Theorem1 => self.gamma(alpha, j, k, s),
            Method::Corollary1 => self.t_block(alpha, j, k, s),
        }
    }

    fn vertex_impl(&self, alpha: usize, j: usize, k: usize, s: usize, majorize: bool) -> Result<LmiInstance> {
        self.check_indices(alpha, j, k, s)?;
        let sub = &self.net.subsystems[self.i];
        let red = self
            .reductions
            .get(&alpha)
            .ok_or_else(|| Error::Index(format!("no reduction for peer {alpha}")))?;
        if red.reduced.len() != sub.right_rule_count() {
            return Err(Error::Invalid("reduction basis mismatch".into()));
        }
        let n = sub.state_dim;
        let nn = self.net.n() as f64;
        let cat = &self.catalog;
        let x1 = cat.x1(j, s);
        let x3 = cat.x3(k, s);
        let x4 = cat.x4(k, s);
        let e = &sub.e[j];

        let mut b11 = x3.add(&x3.transpose());
        if majorize {
            for (sp, w) in self.bounds.omega.iter().enumerate() {
                b11 = b11.sub(&cat.x1(j, sp).scale(*w));
            }
            for (jp, w) in self.bounds.lambda.iter().enumerate() {
                b11 = b11.sub(&cat.x1(jp, s).scale(*w));
            }
        }
        let b21 = x1
            .left_mul(&sub.a[k])
            .add(&cat.gain(j, s).left_mul(&sub.b[k]))
            .sub(&x3.left_mul(e))
            .add(&x4.transpose());
        let ex4 = x4.left_mul(e);
        let b22 = ex4.add(&ex4.transpose()).scale(-1.0);
        let b41 = x1.clone();
        let b44 = AffineMat::constant(-DMatrix::identity(n, n));

        let q = red.dim();
        let mut blocks = vec![(0, 0, b11), (1, 0, b21), (1, 1, b22)];
        let sizes = if q > 0 {
            let fr = &red.reduced[k];
            let b32 = AffineMat::constant(fr.transpose() * (nn - 1.0));
            let c = (nn - 1.0) * (2.0 * nn - 3.0);
            let mut b33 = AffineMat::scalar_var(cat.mu_index(), -(fr.transpose() * fr) * c);
            if red.eps != 0.0 {
                b33.constant -= DMatrix::identity(q, q) * red.eps;
            }
            blocks.push((2, 1, b32));
            blocks.push((2, 2, b33));
            blocks.push((3, 0, b41));
            blocks.push((3, 3, b44));
            vec![n, n, q, n]
        } else {
            blocks.push((2, 0, b41));
            blocks.push((2, 2, b44));
            vec![n, n, n]
        };
        let body = AffineMat::from_lower_blocks(&sizes, blocks).prune();
        Ok(LmiInstance {
            label: LmiLabel {
                subsystem: self.i,
                peer: alpha,
                j,
                k,
                s,
                kind: LmiKind::Vertex,
            },
            body,
            shift: self.shift,
        })
    }

    /// Relaxed family for peer `alpha`: every diagonal `Γ^{jkk}` and, for every
    /// ordered pair `k ≠ s`, `Γ^{jkk}/(r-1) + (Γ^{jks} + Γ^{jsk})/2`.
    pub fn enumerate_relaxed(&self, alpha: usize) -> Result<Vec<LmiInstance>> {
        let sub = &self.net.subsystems[self.i];
        let (l, r) = (sub.left_rule_count(), sub.right_rule_count());
        let mut out = Vec::new();
        for j in 0..l {
            for k in 0..r {
                let mut d = self.vertex(alpha, j, k, k)?;
                d.label.kind = LmiKind::Diagonal;
                out.push(d);
            }
        }
        if r > 1 {
            let w = 1.0 / (r as f64 - 1.0);
            for j in 0..l {
                for k in 0..r {
                    let diag = self.vertex(alpha, j, k, k)?;
                    for s in (0..r).filter(|&s| s != k) {
                        let ks = self.vertex(alpha, j, k, s)?;
                        let sk = self.vertex(alpha, j, s, k)?;
                        let label = LmiLabel {
                            subsystem: self.i,
                            peer: alpha,
                            j,
                            k,
                            s,
                            kind: LmiKind::Combined,
                        };
                        out.push(LmiInstance::combine(label, &[(w, &diag), (0.5, &ks), (0.5, &sk)]));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Relaxed families for every peer, peers in ascending order.
    pub fn all_relaxed(&self) -> Result<Vec<LmiInstance>> {
        let mut out = Vec::new();
        for alpha in self.peers() {
            out.extend(self.enumerate_relaxed(alpha)?);
        }
        Ok(out)
    }
}

/// Non-quadratic vertex with explicit bounds and reduction, assembled over the
/// model's own catalog for `Theorem1`.
pub fn assemble_gamma(
    net: &NetworkModel,
    i: usize,
    alpha: usize,
    (j, k, s): (usize, usize, usize),
    opts: &AssemblyOptions,
) -> Result<LmiInstance> {
    SubsystemLmis::new(net, i, Method::Theorem1, opts)?.gamma(alpha, j, k, s)
}

/// Shared-`X1` vertex without derivative majorization.
pub fn assemble_t(
    net: &NetworkModel,
    i: usize,
    alpha: usize,
    (j, k, s): (usize, usize, usize),
    opts: &AssemblyOptions,
) -> Result<LmiInstance> {
    SubsystemLmis::new(net, i, Method::Corollary1, opts)?.t_block(alpha, j, k, s)
}

pub fn enumerate_relaxed(
    net: &NetworkModel,
    i: usize,
    alpha: usize,
    method: Method,
    opts: &AssemblyOptions,
) -> Result<Vec<LmiInstance>> {
    SubsystemLmis::new(net, i, method, opts)?.enumerate_relaxed(alpha)
}
