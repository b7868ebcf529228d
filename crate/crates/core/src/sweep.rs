//! Feasibility-domain sweeps over scalar model entries.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::Method;
use crate::model::NetworkModel;
use crate::plot::{self, Frame};
use crate::synth::{self, SynthOptions};

/// Default shortcuts of the bundled example.
pub const DEFAULT_BINDINGS: [(&str, &str); 2] = [("a", "sub1.A[1][0][0]"), ("b", "sub1.B[2][0][0]")];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixRef {
    E,
    A,
    B,
    /// Coupling matrices towards the named peer.
    F(String),
}

/// A scalar model entry addressed as `subsystem.M[rule][row][col]`.
///
/// `subsystem` is a name or `subN` (1-based position); `rule` is 1-based,
/// `row` and `col` are 0-based. Couplings are written `F(peer)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub name: String,
    pub subsystem: String,
    pub matrix: MatrixRef,
    pub rule: usize,
    pub row: usize,
    pub col: usize,
}

impl Binding {
    /// Parses `name=target`, or a bare shortcut name from [`DEFAULT_BINDINGS`].
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        match spec.split_once('=') {
            Some((name, target)) => Self::parse_target(name.trim(), target.trim()),
            None => DEFAULT_BINDINGS
                .iter()
                .find(|(n, _)| *n == spec)
                .map(|(n, t)| Self::parse_target(n, t))
                .unwrap_or_else(|| Err(Error::Binding(spec.to_string()))),
        }
    }

    pub fn parse_target(name: &str, target: &str) -> Result<Self> {
        let bad = || Error::Binding(format!("{name}={target}"));
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(bad());
        }
        let (subsystem, rest) = target.split_once('.').ok_or_else(bad)?;
        let open = rest.find('[').ok_or_else(bad)?;
        let matrix = match &rest[..open] {
            "E" => MatrixRef::E,
            "A" => MatrixRef::A,
            "B" => MatrixRef::B,
            m => match m.strip_prefix("F(").and_then(|p| p.strip_suffix(')')) {
                Some(peer) if !peer.is_empty() => MatrixRef::F(peer.to_string()),
                _ => return Err(bad()),
            },
        };
        let mut idx = Vec::new();
        let mut tail = &rest[open..];
        while let Some(body) = tail.strip_prefix('[') {
            let close = body.find(']').ok_or_else(bad)?;
            idx.push(body[..close].trim().parse::<usize>().map_err(|_| bad())?);
            tail = &body[close + 1..];
        }
        if !tail.is_empty() || idx.len() != 3 || idx[0] == 0 || subsystem.is_empty() {
            return Err(bad());
        }
        Ok(Self {
            name: name.to_string(),
            subsystem: subsystem.to_string(),
            matrix,
            rule: idx[0],
            row: idx[1],
            col: idx[2],
        })
    }

    pub fn target(&self) -> String {
        let m = match &self.matrix {
            MatrixRef::E => "E".to_string(),
            MatrixRef::A => "A".to_string(),
            MatrixRef::B => "B".to_string(),
            MatrixRef::F(p) => format!("F({p})"),
        };
        format!("{}.{m}[{}][{}][{}]", self.subsystem, self.rule, self.row, self.col)
    }

    fn subsystem_index(&self, net: &NetworkModel) -> Result<usize> {
        if let Some(i) = net.index_of(&self.subsystem) {
            return Ok(i);
        }
        self.subsystem
            .strip_prefix("sub")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 1 && k <= net.n())
            .map(|k| k - 1)
            .ok_or_else(|| Error::Binding(format!("{}: no subsystem `{}`", self.name, self.subsystem)))
    }

    /// Current value of the bound entry; fails if it does not exist.
    pub fn get(&self, net: &NetworkModel) -> Result<f64> {
        let i = self.subsystem_index(net)?;
        let sub = &net.subsystems[i];
        let family = match &self.matrix {
            MatrixRef::E => &sub.e,
            MatrixRef::A => &sub.a,
            MatrixRef::B => &sub.b,
            MatrixRef::F(p) => sub
                .f
                .get(p)
                .ok_or_else(|| Error::Binding(format!("{}: no coupling towards `{p}`", self.name)))?,
        };
        family
            .get(self.rule - 1)
            .and_then(|m| m.get((self.row, self.col)))
            .copied()
            .ok_or_else(|| Error::Binding(format!("{}: {} is out of range", self.name, self.target())))
    }

    pub fn set(&self, net: &mut NetworkModel, value: f64) -> Result<()> {
        self.get(net)?;
        let i = self.subsystem_index(net)?;
        let sub = &mut net.subsystems[i];
        let family = match &self.matrix {
            MatrixRef::E => &mut sub.e,
            MatrixRef::A => &mut sub.a,
            MatrixRef::B => &mut sub.b,
            MatrixRef::F(p) => sub.f.get_mut(p).expect("checked by get"),
        };
        family[self.rule - 1][(self.row, self.col)] = value;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl ParamRange {
    /// Parses `name:min:max:steps`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |why: &str| Error::Invalid(format!("range `{spec}`: {why}"));
        let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(bad("expected name:min:max:steps"));
        }
        let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
        let min = num(parts[1]).ok_or_else(|| bad("min is not a number"))?;
        let max = num(parts[2]).ok_or_else(|| bad("max is not a number"))?;
        let steps = parts[3].parse::<usize>().map_err(|_| bad("steps is not an integer"))?;
        if max < min {
            return Err(bad("max < min"));
        }
        Ok(Self {
            name: parts[0].to_string(),
            min,
            max,
            steps,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Outcome of one method at one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub feasible: bool,
    /// Per subsystem, model order; empty on error.
    pub rho: Vec<f64>,
    /// Per-subsystem solver statuses joined by `;`, or `error: …`.
    pub status: String,
    /// Largest certificate-replay discrepancy, shared-X1 feasible cells only.
    pub inclusion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub values: Vec<f64>,
    pub records: Vec<MethodRecord>,
}

impl Cell {
    pub fn record(&self, method: Method) -> Option<&MethodRecord> {
        self.records.iter().find(|r| r.method == method)
    }
}

/// Parameter axes, methods, and (once run) per-cell records in row-major
/// order with the last parameter varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub bindings: Vec<Binding>,
    pub ranges: Vec<ParamRange>,
    pub methods: Vec<Method>,
    pub cells: Vec<Cell>,
}

impl SweepGrid {
    /// Pairs each range with the binding of the same name.
    pub fn new(bindings: Vec<Binding>, ranges: Vec<ParamRange>, methods: Vec<Method>) -> Result<Self> {
        if ranges.is_empty() || methods.is_empty() {
            return Err(Error::Invalid("a sweep needs at least one range and one method".into()));
        }
        let mut ordered = Vec::with_capacity(ranges.len());
        for r in &ranges {
            let b = bindings
                .iter()
                .find(|b| b.name == r.name)
                .ok_or_else(|| Error::Binding(format!("range `{}` has no binding", r.name)))?;
            if ordered.iter().any(|o: &Binding| o.name == r.name) {
                return Err(Error::Invalid(format!("duplicate range `{}`", r.name)));
            }
            ordered.push(b.clone());
        }
        Ok(Self {
            bindings: ordered,
            ranges,
            methods,
            cells: Vec::new(),
        })
    }

    /// Default two-parameter grid of the bundled example.
    pub fn default_example() -> Self {
        let bindings = DEFAULT_BINDINGS
            .iter()
            .map(|(n, t)| Binding::parse_target(n, t).expect("valid default binding"))
            .collect();
        let ranges = vec![
            ParamRange::parse("a:-2:1:13").expect("valid"),
            ParamRange::parse("b:-1.5:1:11").expect("valid"),
        ];
        Self::new(bindings, ranges, vec![Method::Theorem1, Method::Corollary1]).expect("valid default grid")
    }

    pub fn cell_count(&self) -> usize {
        self.ranges.iter().map(|r| r.steps).product()
    }

    /// Parameter values of cell `index`.
    pub fn cell_values(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        let mut out = vec![0.0; self.ranges.len()];
        for (k, r) in self.ranges.iter().enumerate().rev() {
            let vals = r.values();
            out[k] = vals[rem % r.steps];
            rem /= r.steps;
        }
        out
    }

    pub fn feasible_count(&self, method: Method) -> usize {
        self.cells
            .iter()
            .filter(|c| c.record(method).is_some_and(|r| r.feasible))
            .count()
    }

    fn subsystem_count(&self) -> usize {
        self.cells
            .iter()
            .flat_map(|c| &c.records)
            .map(|r| r.rho.len())
            .max()
            .unwrap_or(0)
    }
}

/// Substitutes the cell's values and runs every method.
pub fn run_cell(template: &NetworkModel, grid: &SweepGrid, index: usize, opts: &SynthOptions) -> Cell {
    let values = grid.cell_values(index);
    let mut net = template.clone();
    let applied = grid
        .bindings
        .iter()
        .zip(&values)
        .try_for_each(|(b, &v)| b.set(&mut net, v));
    let records = grid
        .methods
        .iter()
        .map(|&method| match &applied {
            Err(e) => error_record(method, e),
            Ok(()) => run_method(&net, method, opts),
        })
        .collect();
    Cell { values, records }
}

fn error_record(method: Method, e: &Error) -> MethodRecord {
    MethodRecord {
        method,
        feasible: false,
        rho: Vec::new(),
        status: format!("error: {e}"),
        inclusion: None,
    }
}

fn run_method(net: &NetworkModel, method: Method, opts: &SynthOptions) -> MethodRecord {
    let opts = SynthOptions { method, ..*opts };
    let report = match synth::synthesize(net, &opts) {
        Ok(r) => r,
        Err(e) => return error_record(method, &e),
    };
    let feasible = report.all_feasible();
    let status = report
        .subsystems
        .iter()
        .map(|s| s.solver.status.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let inclusion = (feasible && method == Method::Corollary1).then(|| {
        report
            .subsystems
            .iter()
            .map(|s| synth::inclusion_residual(net, s, &report.assembly()).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    });
    MethodRecord {
        method,
        feasible,
        rho: report.rhos(),
        status,
        inclusion,
    }
}

/// Validates bindings against the template, then solves every cell in parallel.
pub fn run_sweep(template: &NetworkModel, grid: &SweepGrid, opts: &SynthOptions) -> Result<SweepGrid> {
    for b in &grid.bindings {
        b.get(template)?;
    }
    if grid.ranges.iter().any(|r| r.steps == 0) {
        return Ok(SweepGrid {
            cells: Vec::new(),
            ..grid.clone()
        });
    }
    let cells = (0..grid.cell_count())
        .into_par_iter()
        .map(|idx| run_cell(template, grid, idx, opts))
        .collect();
    Ok(SweepGrid { cells, ..grid.clone() })
}

pub fn csv_header(grid: &SweepGrid) -> Vec<String> {
    let mut h: Vec<String> = grid.ranges.iter().map(|r| r.name.clone()).collect();
    for m in &grid.methods {
        h.push(format!("{}_feasible", m.short()));
    }
    let subs = grid.subsystem_count().max(1);
    for m in &grid.methods {
        for k in 1..=subs {
            h.push(format!("{}_rho{k}", m.short()));
        }
    }
    for m in &grid.methods {
        h.push(format!("{}_status", m.short()));
    }
    if grid.methods.contains(&Method::Corollary1) {
        h.push("cor1_inclusion".to_string());
    }
    h
}

/// One row per cell; `ρ` columns are blank unless the method is feasible.
pub fn emit_csv<W: Write>(grid: &SweepGrid, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Invalid(format!("writing sweep CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(grid)).map_err(io)?;
    let subs = grid.subsystem_count().max(1);
    for cell in &grid.cells {
        let mut row: Vec<String> = cell.values.iter().map(|v| v.to_string()).collect();
        let recs: Vec<Option<&MethodRecord>> = grid.methods.iter().map(|&m| cell.record(m)).collect();
        for r in &recs {
            row.push(r.is_some_and(|r| r.feasible).to_string());
        }
        for r in &recs {
            for k in 0..subs {
                row.push(match r {
                    Some(r) if r.feasible => r.rho.get(k).map(|v| v.to_string()).unwrap_or_default(),
                    _ => String::new(),
                });
            }
        }
        for r in &recs {
            row.push(r.map(|r| r.status.clone()).unwrap_or_default());
        }
        if grid.methods.contains(&Method::Corollary1) {
            let inc = cell.record(Method::Corollary1).and_then(|r| r.inclusion);
            row.push(inc.map(|v| format!("{v:e}")).unwrap_or_default());
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing sweep CSV: {e}")))?;
    Ok(())
}

pub fn save_csv(grid: &SweepGrid, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    emit_csv(grid, std::io::BufWriter::new(f))
}

/// Scatter of feasible cells: open circles for the non-quadratic conditions,
/// filled dots for the shared-`X1` ones, grey crosses for the full grid.
pub fn emit_svg(grid: &SweepGrid) -> Result<String> {
    if grid.ranges.len() != 2 {
        return Err(Error::Invalid("the scatter needs exactly two swept parameters".into()));
    }
    let (rx, ry) = (&grid.ranges[0], &grid.ranges[1]);
    let frame = Frame::new((rx.min, rx.max), (ry.min, ry.max));
    let mut s = frame.open("feasibility domain", &rx.name, &ry.name);
    for cell in &grid.cells {
        let (x, y) = (frame.px(cell.values[0]), frame.py(cell.values[1]));
        let _ = writeln!(
            s,
            r##"<path d="M{:.2},{:.2}l4,4m0,-4l-4,4" stroke="#bbbbbb"/>"##,
            x - 2.0,
            y - 2.0
        );
        for rec in cell.records.iter().filter(|r| r.feasible) {
            let _ = writeln!(s, "{}", marker(rec.method, x, y));
        }
    }
    let lx = frame.legend_x();
    for (k, m) in grid.methods.iter().enumerate() {
        let ly = 40.0 + 20.0 * k as f64;
        let _ = writeln!(
            s,
            r#"{}<text x="{}" y="{}">{} ({})</text>"#,
            marker(*m, lx + 6.0, ly),
            lx + 18.0,
            ly + 4.0,
            m.tag(),
            grid.feasible_count(*m)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn marker(method: Method, x: f64, y: f64) -> String {
    match method {
        Method::Theorem1 => format!(
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            plot::PALETTE[0]
        ),
        Method::Corollary1 => format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}"/>"#, plot::PALETTE[1]),
    }
}

pub fn save_svg(grid: &SweepGrid, path: &Path) -> Result<()> {
    std::fs::write(path, emit_svg(grid)?).map_err(|e| Error::io(path, e))
}
