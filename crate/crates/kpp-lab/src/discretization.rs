//! Discrete operators: the cell-centered Neumann Laplacian, the
//! linearized-at-zero block operator, and the nonlinear residual.
//!
//! The Laplacian is applied in flux form, as a sum of neighbor
//! differences, so constants are annihilated exactly regardless of grid
//! anisotropy; the CSR view exists for inspection, dense conversion and
//! factorization.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{CouplingField, DomainGrid, StateField, SystemSpec};
use crate::nonlinearity::b_eval;
use std::io::Write;

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut row_offsets = Vec::with_capacity(dim + 1);
        let mut col_indices = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        let mut k = 0;
        row_offsets.push(0);
        for r in 0..dim {
            while k < merged.len() && merged[k].0 == r {
                col_indices.push(merged[k].1);
                values.push(merged[k].2);
                k += 1;
            }
            row_offsets.push(col_indices.len());
        }
        let mut op = SparseOperator {
            dim,
            row_offsets,
            col_indices,
            values,
            symmetric: false,
        };
        op.symmetric = op.check_symmetric();
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    fn check_symmetric(&self) -> bool {
        for r in 0..self.dim {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[k];
                if self.get(c, r) != self.values[k] {
                    return false;
                }
            }
        }
        true
    }

    /// Entry (r, c), zero if absent.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[r] = acc;
        }
    }

    /// Sum of stored values in row `r`, accumulated in column order.
    pub fn row_sum(&self, r: usize) -> f64 {
        self.values[self.row_offsets[r]..self.row_offsets[r + 1]]
            .iter()
            .sum()
    }

    /// Sum of absolute values in row `r`.
    pub fn row_abs_sum(&self, r: usize) -> f64 {
        self.values[self.row_offsets[r]..self.row_offsets[r + 1]]
            .iter()
            .map(|v| v.abs())
            .sum()
    }

    /// Stored `(column, value)` pairs of row `r`, in column order.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_offsets[r]..self.row_offsets[r + 1])
            .map(|k| (self.col_indices[k], self.values[k]))
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.get(r, r))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                self.values[self.row_offsets[r]..self.row_offsets[r + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                m[(r, self.col_indices[k])] = self.values[k];
            }
        }
        m
    }

    /// Matrix Market coordinate format, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for r in 0..self.dim {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                writeln!(
                    w,
                    "{} {} {:.16e}",
                    r + 1,
                    self.col_indices[k] + 1,
                    self.values[k]
                )?;
            }
        }
        Ok(())
    }
}

/// Neighbor of a node along one axis, if inside the domain.
fn neighbor(grid: &DomainGrid, node: usize, axis: usize, step: isize) -> Option<usize> {
    match grid.dimension() {
        1 => {
            let i = node as isize + step;
            (i >= 0 && (i as usize) < grid.cells()[0]).then_some(i as usize)
        }
        2 => {
            let nx = grid.cells()[0] as isize;
            let ny = grid.cells()[1] as isize;
            let ix = node as isize % nx;
            let iy = node as isize / nx;
            let (jx, jy) = if axis == 0 {
                (ix + step, iy)
            } else {
                (ix, iy + step)
            };
            (jx >= 0 && jx < nx && jy >= 0 && jy < ny).then_some((jx + jy * nx) as usize)
        }
        _ => unreachable!(),
    }
}

/// The discrete Neumann Laplacian on a grid: 3-point (1D) or 5-point (2D)
/// stencil with reflected ghost cells, negative semidefinite, constants in
/// the kernel.
#[derive(Debug, Clone)]
pub struct NeumannLaplacian {
    grid: DomainGrid,
    /// Per axis, `(cells/extent)^2`; written this way so unit-extent
    /// integer-cell grids get exact coefficients.
    inv_h2: Vec<f64>,
}

/// Assembles the Laplacian for a grid.
pub fn assemble_neumann_laplacian(grid: &DomainGrid) -> NeumannLaplacian {
    let inv_h2 = (0..grid.dimension())
        .map(|ax| {
            let r = grid.cells()[ax] as f64 / grid.extent()[ax];
            r * r
        })
        .collect();
    NeumannLaplacian {
        grid: grid.clone(),
        inv_h2,
    }
}

impl NeumannLaplacian {
    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    /// `y = Lap(x)` in flux form: each contribution is
    /// `inv_h2 * (x_neighbor - x_node)`, so constant input gives exact
    /// zeros and missing neighbors (reflected ghosts) contribute nothing.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nodes = self.grid.node_count();
        debug_assert_eq!(x.len(), nodes);
        debug_assert_eq!(y.len(), nodes);
        for node in 0..nodes {
            let mut acc = 0.0;
            for axis in 0..self.grid.dimension() {
                for step in [-1isize, 1] {
                    if let Some(nb) = neighbor(&self.grid, node, axis, step) {
                        acc += self.inv_h2[axis] * (x[nb] - x[node]);
                    }
                }
            }
            y[node] = acc;
        }
    }

    /// CSR view with the same coefficients.
    pub fn to_sparse(&self) -> SparseOperator {
        let nodes = self.grid.node_count();
        let mut triplets = Vec::new();
        for node in 0..nodes {
            let mut diag = 0.0;
            for axis in 0..self.grid.dimension() {
                for step in [-1isize, 1] {
                    if let Some(nb) = neighbor(&self.grid, node, axis, step) {
                        triplets.push((node, nb, self.inv_h2[axis]));
                        diag -= self.inv_h2[axis];
                    }
                }
            }
            triplets.push((node, node, diag));
        }
        SparseOperator::from_triplets(nodes, triplets)
    }

    /// All eigenvalues of the operator, one per discrete cosine mode, in
    /// node-index order: 1D mode k has value `2*inv_h2*(cos(k*pi/m) - 1)`;
    /// 2D modes are sums over axes.
    pub fn mode_values(&self) -> Vec<f64> {
        let axis_modes = |ax: usize| -> Vec<f64> {
            let m = self.grid.cells()[ax];
            (0..m)
                .map(|k| {
                    2.0 * self.inv_h2[ax]
                        * ((k as f64 * std::f64::consts::PI / m as f64).cos() - 1.0)
                })
                .collect()
        };
        match self.grid.dimension() {
            1 => axis_modes(0),
            2 => {
                let mx = axis_modes(0);
                let my = axis_modes(1);
                let mut out = Vec::with_capacity(mx.len() * my.len());
                for vy in &my {
                    for vx in &mx {
                        out.push(vx + vy);
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// The mode-k eigenvector on a 1D grid: `cos(k*pi*(i+1/2)/m)`.
    pub fn cosine_mode(&self, k: usize) -> Vec<f64> {
        assert_eq!(self.grid.dimension(), 1);
        let m = self.grid.cells()[0];
        (0..m)
            .map(|i| (k as f64 * std::f64::consts::PI * (i as f64 + 0.5) / m as f64).cos())
            .collect()
    }
}

/// The linearized-at-zero operator `L = -diag(d_i Lap) - A(x)` on stacked
/// species-major vectors.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    n: usize,
    d: Vec<f64>,
    coupling: CouplingField,
    lap: NeumannLaplacian,
}

/// Assembles `L` for a spec on a grid.
pub fn assemble_linearized(spec: &SystemSpec, grid: &DomainGrid) -> BlockOperator {
    BlockOperator {
        n: spec.n,
        d: spec.d.clone(),
        coupling: spec.coupling.clone(),
        lap: assemble_neumann_laplacian(grid),
    }
}

impl BlockOperator {
    pub fn species(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &DomainGrid {
        self.lap.grid()
    }

    pub fn laplacian(&self) -> &NeumannLaplacian {
        &self.lap
    }

    pub fn dim(&self) -> usize {
        self.n * self.lap.grid().node_count()
    }

    /// `y = L x` for species-major `x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let nodes = self.lap.grid().node_count();
        debug_assert_eq!(x.len(), self.n * nodes);
        debug_assert_eq!(y.len(), self.n * nodes);
        let mut lap_buf = vec![0.0; nodes];
        for i in 0..self.n {
            self.lap.apply(&x[i * nodes..(i + 1) * nodes], &mut lap_buf);
            for p in 0..nodes {
                let a = self.coupling.at(p);
                let mut coupling_sum = 0.0;
                for j in 0..self.n {
                    coupling_sum += a[(i, j)] * x[j * nodes + p];
                }
                y[i * nodes + p] = -self.d[i] * lap_buf[p] - coupling_sum;
            }
        }
    }

    /// Largest diagonal entry `-d_i * lap_diag(p) - a_ii(p)`.
    pub fn max_diag(&self) -> f64 {
        let nodes = self.lap.grid().node_count();
        let lap_csr = self.lap.to_sparse();
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.n {
            for p in 0..nodes {
                let v = -self.d[i] * lap_csr.get(p, p) - self.coupling.at(p)[(i, i)];
                best = best.max(v);
            }
        }
        best
    }

    /// Max absolute row sum of the fused matrix.
    pub fn inf_norm(&self) -> f64 {
        let nodes = self.lap.grid().node_count();
        let lap_csr = self.lap.to_sparse();
        let mut best = 0.0f64;
        for i in 0..self.n {
            let di = self.d[i].abs();
            for p in 0..nodes {
                let mut acc = 0.0;
                for k in lap_csr.row_offsets[p]..lap_csr.row_offsets[p + 1] {
                    acc += di * lap_csr.values[k].abs();
                }
                let a = self.coupling.at(p);
                for j in 0..self.n {
                    acc += a[(i, j)].abs();
                }
                // The diagonal coupling entry and the Laplacian diagonal
                // overlap in the same matrix entry; the split sum only
                // overestimates, which is fine for step-size bounds.
                best = best.max(acc);
            }
        }
        best
    }

    /// Fused dense matrix in species-major ordering; oracle-scale grids
    /// only.
    pub fn to_dense(&self) -> Mat {
        let nodes = self.lap.grid().node_count();
        let dim = self.dim();
        let lap_csr = self.lap.to_sparse();
        let mut m = Mat::zeros(dim, dim);
        for i in 0..self.n {
            for p in 0..nodes {
                let row = i * nodes + p;
                for k in lap_csr.row_offsets[p]..lap_csr.row_offsets[p + 1] {
                    m[(row, i * nodes + lap_csr.col_indices[k])] -= self.d[i] * lap_csr.values[k];
                }
                let a = self.coupling.at(p);
                for j in 0..self.n {
                    m[(row, j * nodes + p)] -= a[(i, j)];
                }
            }
        }
        m
    }
}

/// Nonlinear residual `R_i = -d_i Lap(u_i) - sum_j a_ij u_j + b_i(u)` per
/// node; steady states satisfy `R = 0`.
pub fn residual(spec: &SystemSpec, grid: &DomainGrid, u: &StateField) -> Result<StateField> {
    if u.species() != spec.n || u.grid() != grid {
        return Err(Error::ShapeMismatch(
            "residual requires a field matching the spec and grid".into(),
        ));
    }
    let nodes = grid.node_count();
    let lap = assemble_neumann_laplacian(grid);
    let mut out = StateField::zeros(grid.clone(), spec.n);
    let mut lap_buf = vec![0.0; nodes];
    for i in 0..spec.n {
        lap.apply(u.species_slice(i), &mut lap_buf);
        for p in 0..nodes {
            out.set(i, p, -spec.d[i] * lap_buf[p]);
        }
    }
    for p in 0..nodes {
        let point = u.node_values(p);
        let b = b_eval(&point, &spec.competition);
        let a = spec.coupling.at(p);
        for i in 0..spec.n {
            let mut coupling_sum = 0.0;
            for j in 0..spec.n {
                coupling_sum += a[(i, j)] * point[j];
            }
            let v = out.get(i, p) - coupling_sum + b[i];
            out.set(i, p, v);
        }
    }
    Ok(out)
}

/// Banded form of `shift*I + scale*(L + Db)` in node-major ordering
/// (unknown `p*n + i`), where `L = -d Lap - A` and `db` holds the
/// reaction Jacobian per node. Cross-species coupling stays within a
/// node and diffusion stays within a species, so the half bandwidth is
/// exactly `n` on a line grid.
pub fn linearized_band(
    spec: &SystemSpec,
    grid: &DomainGrid,
    db: &[Mat],
    shift: f64,
    scale: f64,
) -> crate::solvers::BandMatrix {
    let n = spec.n;
    let nodes = grid.node_count();
    let lap = assemble_neumann_laplacian(grid).to_sparse();
    let mut band = crate::solvers::BandMatrix::zeros(n * nodes, n, n);
    for p in 0..nodes {
        let a = spec.coupling.at(p);
        for i in 0..n {
            let row = p * n + i;
            band.add(row, row, shift);
            for (q, lap_pq) in lap.row_entries(p) {
                band.add(row, q * n + i, scale * (-spec.d[i] * lap_pq));
            }
            for j in 0..n {
                band.add(row, p * n + j, scale * (-a[(i, j)] + db[p][(i, j)]));
            }
        }
    }
    band
}

/// Reorders a species-major vector (`i*nodes + p`) to node-major
/// (`p*n + i`).
pub fn to_node_major(v: &[f64], n: usize, nodes: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for i in 0..n {
        for p in 0..nodes {
            out[p * n + i] = v[i * nodes + p];
        }
    }
    out
}

/// Inverse of [`to_node_major`].
pub fn to_species_major(v: &[f64], n: usize, nodes: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for i in 0..n {
        for p in 0..nodes {
            out[i * nodes + p] = v[p * n + i];
        }
    }
    out
}
