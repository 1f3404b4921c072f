//! Problem definitions: system coefficients, grids, state fields and the
//! componentwise partial order.
//!
//! A [`SystemSpec`] holds the reaction-diffusion system
//! `-d_i Lap(u_i) = sum_j a_ij(x) u_j - b_i(u)` with no-flux boundary;
//! [`DomainGrid`] is its rectangular cell-centered discretization and
//! [`StateField`] the per-node, per-species unknown vector.
//!
//! All types are immutable after construction and safe to share across
//! threads.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use serde::Serialize;
use std::io::{BufRead, Write};

/// Coupling matrix field `A(x)`: constant, or sampled per grid node
/// (piecewise constant per cell).
#[derive(Debug, Clone)]
pub enum CouplingField {
    Constant(Mat),
    PerNode(Vec<Mat>),
}

impl CouplingField {
    /// The matrix at a given node index.
    pub fn at(&self, node: usize) -> &Mat {
        match self {
            CouplingField::Constant(m) => m,
            CouplingField::PerNode(ms) => &ms[node],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CouplingField::Constant(_))
    }

    /// The constant matrix, if the field is spatially constant.
    pub fn constant(&self) -> Option<&Mat> {
        match self {
            CouplingField::Constant(m) => Some(m),
            CouplingField::PerNode(_) => None,
        }
    }
}

/// Reaction kind tag. Lotka-Volterra competition is the only closed-form
/// kind; sampled nonlinearities enter through
/// [`crate::nonlinearity::SampledNonlinearity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NonlinearityKind {
    LotkaVolterra,
}

/// Full problem definition: species count, diffusions, coupling field and
/// competition matrix.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub n: usize,
    pub d: Vec<f64>,
    pub coupling: CouplingField,
    pub competition: Mat,
    pub kind: NonlinearityKind,
}

impl SystemSpec {
    /// Lotka-Volterra system with constant coupling.
    pub fn lotka_volterra(d: Vec<f64>, coupling: Mat, competition: Mat) -> Self {
        let n = d.len();
        SystemSpec {
            n,
            d,
            coupling: CouplingField::Constant(coupling),
            competition,
            kind: NonlinearityKind::LotkaVolterra,
        }
    }

    /// Returns the spec with `A` replaced by `A - mu*I` (constant coupling
    /// only); used by the eigenvalue-shift sweep.
    pub fn shifted(&self, mu: f64) -> Result<SystemSpec> {
        let a = self.coupling.constant().ok_or_else(|| {
            Error::InvalidInput("shift requires a spatially constant coupling field".into())
        })?;
        let mut shifted = a.clone();
        for i in 0..self.n {
            shifted[(i, i)] -= mu;
        }
        let mut out = self.clone();
        out.coupling = CouplingField::Constant(shifted);
        Ok(out)
    }
}

/// Record of one violated structural hypothesis. Species indices are
/// 1-based to match the usual subscript convention in reports; node
/// indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    NonPositiveDiffusion {
        species: usize,
        value: f64,
    },
    NonPositiveOffDiagonal {
        i: usize,
        j: usize,
        node: usize,
        value: f64,
    },
    NonPositiveCompetition {
        i: usize,
        j: usize,
        value: f64,
    },
    DimensionMismatch {
        what: String,
    },
}

/// Checks the structural hypotheses of a spec against a grid: positive
/// diffusions, essential positivity of `A(x)` at every node, entrywise
/// positive competition matrix, and shape consistency. Violations are
/// data, not failures.
pub fn validate_spec(spec: &SystemSpec, grid: &DomainGrid) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = spec.n;
    if spec.d.len() != n {
        out.push(Violation::DimensionMismatch {
            what: format!("d has length {}, expected {}", spec.d.len(), n),
        });
    }
    for (i, &di) in spec.d.iter().enumerate() {
        if di <= 0.0 {
            out.push(Violation::NonPositiveDiffusion {
                species: i + 1,
                value: di,
            });
        }
    }
    let nodes = grid.node_count();
    if let CouplingField::PerNode(ms) = &spec.coupling {
        if ms.len() != nodes {
            out.push(Violation::DimensionMismatch {
                what: format!("coupling field has {} nodes, grid has {}", ms.len(), nodes),
            });
        }
    }
    let check_matrix_shape = |m: &Mat, name: &str, out: &mut Vec<Violation>| {
        if m.nrows() != n || m.ncols() != n {
            out.push(Violation::DimensionMismatch {
                what: format!("{name} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols()),
            });
            return false;
        }
        true
    };
    match &spec.coupling {
        CouplingField::Constant(m) => {
            if check_matrix_shape(m, "A", &mut out) {
                push_off_diagonal_violations(m, 0, &mut out);
            }
        }
        CouplingField::PerNode(ms) => {
            for (node, m) in ms.iter().enumerate() {
                if check_matrix_shape(m, "A", &mut out) {
                    push_off_diagonal_violations(m, node, &mut out);
                }
            }
        }
    }
    if check_matrix_shape(&spec.competition, "C", &mut out) {
        for i in 0..n {
            for j in 0..n {
                let c = spec.competition[(i, j)];
                if c <= 0.0 {
                    out.push(Violation::NonPositiveCompetition {
                        i: i + 1,
                        j: j + 1,
                        value: c,
                    });
                }
            }
        }
    }
    out
}

fn push_off_diagonal_violations(m: &Mat, node: usize, out: &mut Vec<Violation>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] <= 0.0 {
                out.push(Violation::NonPositiveOffDiagonal {
                    i: i + 1,
                    j: j + 1,
                    node,
                    value: m[(i, j)],
                });
            }
        }
    }
}

/// Rectangular 1D/2D cell-centered grid with no-flux boundary.
///
/// Nodes sit at cell midpoints, so an axis with `m` cells over extent `L`
/// has spacing `h = L/m` and nodes at `(k + 1/2) h`. A single-cell axis is
/// the degenerate spatially constant case (zero Laplacian).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainGrid {
    extent: Vec<f64>,
    cells: Vec<usize>,
}

impl DomainGrid {
    pub fn new(extent: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if extent.len() != cells.len() {
            return Err(Error::ShapeMismatch(
                "extent and cells must have equal length".into(),
            ));
        }
        if extent.is_empty() || extent.len() > 2 {
            return Err(Error::InvalidInput("grid dimension must be 1 or 2".into()));
        }
        if extent.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidInput("grid extents must be positive".into()));
        }
        if cells.iter().any(|&m| m == 0) {
            return Err(Error::InvalidInput(
                "each axis needs at least one cell".into(),
            ));
        }
        Ok(DomainGrid { extent, cells })
    }

    /// 1D grid over `(0, extent)`.
    pub fn line(extent: f64, cells: usize) -> Result<Self> {
        DomainGrid::new(vec![extent], vec![cells])
    }

    /// 2D grid over `(0, ex) x (0, ey)`.
    pub fn rect(ex: f64, ey: f64, cx: usize, cy: usize) -> Result<Self> {
        DomainGrid::new(vec![ex, ey], vec![cx, cy])
    }

    /// Single-node grid: the spatially constant (algebraic) case.
    pub fn point() -> Self {
        DomainGrid {
            extent: vec![1.0],
            cells: vec![1],
        }
    }

    pub fn dimension(&self) -> usize {
        self.extent.len()
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }

    pub fn node_count(&self) -> usize {
        self.cells.iter().product()
    }

    /// Coordinates of a node (cell center). 2D nodes are indexed
    /// `ix + iy * nx`.
    pub fn coords(&self, node: usize) -> Vec<f64> {
        match self.dimension() {
            1 => vec![(node as f64 + 0.5) * self.spacing(0)],
            2 => {
                let nx = self.cells[0];
                let ix = node % nx;
                let iy = node / nx;
                vec![
                    (ix as f64 + 0.5) * self.spacing(0),
                    (iy as f64 + 0.5) * self.spacing(1),
                ]
            }
            _ => unreachable!(),
        }
    }
}

/// Per-node, per-species values in species-major layout: entry
/// `(species, node)` lives at `species * node_count + node`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    grid: DomainGrid,
    species: usize,
    values: Vec<f64>,
}

impl StateField {
    pub fn new(grid: DomainGrid, species: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != species * grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} species on {} nodes",
                values.len(),
                species,
                grid.node_count()
            )));
        }
        Ok(StateField {
            grid,
            species,
            values,
        })
    }

    /// Field with every species constant in space.
    pub fn constant(grid: DomainGrid, per_species: &[f64]) -> Self {
        let nodes = grid.node_count();
        let mut values = Vec::with_capacity(per_species.len() * nodes);
        for &v in per_species {
            values.extend(std::iter::repeat(v).take(nodes));
        }
        StateField {
            grid,
            species: per_species.len(),
            values,
        }
    }

    pub fn zeros(grid: DomainGrid, species: usize) -> Self {
        let nodes = grid.node_count();
        StateField {
            grid,
            species,
            values: vec![0.0; species * nodes],
        }
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, species: usize, node: usize) -> f64 {
        self.values[species * self.grid.node_count() + node]
    }

    pub fn set(&mut self, species: usize, node: usize, v: f64) {
        self.values[species * self.grid.node_count() + node] = v;
    }

    /// Slice of one species over all nodes.
    pub fn species_slice(&self, species: usize) -> &[f64] {
        let nodes = self.grid.node_count();
        &self.values[species * nodes..(species + 1) * nodes]
    }

    /// The values of all species at one node.
    pub fn node_values(&self, node: usize) -> Vec<f64> {
        (0..self.species).map(|s| self.get(s, node)).collect()
    }

    /// True when every entry exceeds the threshold.
    pub fn is_positive(&self, threshold: f64) -> bool {
        self.values.iter().all(|&v| v > threshold)
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    pub fn max_abs(&self) -> f64 {
        crate::linalg::max_norm(&self.values)
    }

    /// True when all species are spatially constant to within `tol`, in
    /// which case the per-species constants are returned.
    pub fn as_constant(&self, tol: f64) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.species);
        for s in 0..self.species {
            let slice = self.species_slice(s);
            let v0 = slice[0];
            if slice.iter().any(|&v| (v - v0).abs() > tol) {
                return None;
            }
            out.push(v0);
        }
        Some(out)
    }
}

/// Componentwise order relation between two fields, up to a tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrderRelation {
    LessEq,
    GreaterEq,
    Equal,
    Incomparable,
}

/// Compares two fields componentwise: `LessEq` iff every entry of `u` is
/// at most the matching entry of `v` plus `tol`, symmetrically for
/// `GreaterEq`, `Equal` iff both.
pub fn compare_states(u: &StateField, v: &StateField, tol: f64) -> Result<OrderRelation> {
    if u.species != v.species || u.grid != v.grid {
        return Err(Error::ShapeMismatch(
            "compare_states requires fields on the same grid with the same species count".into(),
        ));
    }
    Ok(compare_values(&u.values, &v.values, tol))
}

/// Componentwise order relation between two flat value vectors.
pub fn compare_values(u: &[f64], v: &[f64], tol: f64) -> OrderRelation {
    let mut le = true;
    let mut ge = true;
    for (a, b) in u.iter().zip(v) {
        if *a > *b + tol {
            le = false;
        }
        if *a < *b - tol {
            ge = false;
        }
        if !le && !ge {
            return OrderRelation::Incomparable;
        }
    }
    match (le, ge) {
        (true, true) => OrderRelation::Equal,
        (true, false) => OrderRelation::LessEq,
        (false, true) => OrderRelation::GreaterEq,
        (false, false) => unreachable!(),
    }
}

/// Default slack for state equality in the max norm; an order of magnitude
/// above the solver residual targets.
pub const EQUALITY_TOL: f64 = 1e-9;

/// Writes a field as flat CSV: header `# node,x[,y],u1,...,un`, one row
/// per node, 17 significant digits.
pub fn write_state_csv<W: Write>(state: &StateField, mut w: W) -> Result<()> {
    let dim = state.grid.dimension();
    let coord_header = if dim == 1 { "x" } else { "x,y" };
    let species_header: Vec<String> = (1..=state.species).map(|s| format!("u{s}")).collect();
    writeln!(w, "# node,{},{}", coord_header, species_header.join(","))?;
    for node in 0..state.node_count() {
        let coords = state.grid.coords(node);
        let mut row = format!("{node}");
        for c in coords {
            row.push_str(&format!(",{c:.16e}"));
        }
        for s in 0..state.species {
            row.push_str(&format!(",{:.16e}", state.get(s, node)));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Reads a field back from the CSV layout of [`write_state_csv`]; the grid
/// is supplied by the caller since the CSV stores only coordinates.
pub fn read_state_csv<R: BufRead>(grid: DomainGrid, species: usize, r: R) -> Result<StateField> {
    let nodes = grid.node_count();
    let dim = grid.dimension();
    let mut values = vec![0.0; species * nodes];
    let mut seen = 0usize;
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 1 + dim + species {
            return Err(Error::Parse(format!(
                "expected {} fields per row, got {}",
                1 + dim + species,
                fields.len()
            )));
        }
        let node: usize = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("bad node index: {e}")))?;
        if node >= nodes {
            return Err(Error::Parse(format!("node index {node} out of range")));
        }
        for s in 0..species {
            let v: f64 = fields[1 + dim + s]
                .parse()
                .map_err(|e| Error::Parse(format!("bad value: {e}")))?;
            values[s * nodes + node] = v;
        }
        seen += 1;
    }
    if seen != nodes {
        return Err(Error::Parse(format!(
            "CSV has {seen} data rows, grid has {nodes} nodes"
        )));
    }
    StateField::new(grid, species, values)
}
