//! Discrete geometry on a periodic N x N grid over the flat torus [0,L)^2.
//!
//! Lattice-gauge (link variable) discretization: the order parameter psi
//! lives on nodes, the gauge potential A on directed links (as the line
//! integral of the 1-form along the link), so gauge transformations
//! psi -> psi e^{i chi}, A -> A + delta(chi) leave every observable built
//! from psi_tail^bar e^{-iA} psi_head invariant exactly.
//!
//! Node (ix, iy) has linear index iy*N + ix. Each node owns two outgoing
//! links: +x (dir 0) and +y (dir 1). Plaquette (ix, iy) has its lower-left
//! corner at node (ix, iy).

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::algebra::{Point, Vec2};
use crate::error::{CoreError, Result};

/// Periodic grid geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    l: f64,
    n: usize,
}

impl TorusGrid {
    /// N must be even and at least 16 (spectral symmetry).
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(CoreError::PreconditionViolated(format!(
                "grid resolution must be even and >= 16, got {n}"
            )));
        }
        if l <= 0.0 {
            return Err(CoreError::PreconditionViolated(format!(
                "torus side must be positive, got {l}"
            )));
        }
        Ok(Self { l, n })
    }

    pub fn side(&self) -> f64 {
        self.l
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.n * self.n
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        (iy % self.n) * self.n + (ix % self.n)
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    pub fn node_point(&self, idx: usize) -> Point {
        let (ix, iy) = self.coords(idx);
        let h = self.spacing();
        Point::new(ix as f64 * h, iy as f64 * h)
    }

    pub fn plaquette_center(&self, idx: usize) -> Point {
        let (ix, iy) = self.coords(idx);
        let h = self.spacing();
        Point::new((ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h)
    }

    pub fn shift(&self, idx: usize, dx: isize, dy: isize) -> usize {
        let (ix, iy) = self.coords(idx);
        let n = self.n as isize;
        let jx = (ix as isize + dx).rem_euclid(n) as usize;
        let jy = (iy as isize + dy).rem_euclid(n) as usize;
        self.index(jx, jy)
    }
}

/// Complex order parameter on nodes plus gauge links.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub grid: TorusGrid,
    /// psi per node, row-major.
    pub psi: Vec<Complex64>,
    /// Link variables: a[2*idx] is the +x link at the node, a[2*idx+1] the +y link.
    pub a: Vec<f64>,
}

impl FieldState {
    /// The vacuum state psi = 1, A = 0.
    pub fn vacuum(grid: TorusGrid) -> Self {
        Self {
            grid,
            psi: vec![Complex64::new(1.0, 0.0); grid.num_nodes()],
            a: vec![0.0; 2 * grid.num_nodes()],
        }
    }

    pub fn link(&self, idx: usize, dir: usize) -> f64 {
        self.a[2 * idx + dir]
    }

    /// Apply the gauge transform psi -> psi e^{i chi}, A -> A + delta(chi).
    pub fn gauge_transform(&mut self, chi: &[f64]) {
        let g = self.grid;
        assert_eq!(chi.len(), g.num_nodes());
        for idx in 0..g.num_nodes() {
            let ph = Complex64::from_polar(1.0, chi[idx]);
            self.psi[idx] *= ph;
            self.a[2 * idx] += chi[g.shift(idx, 1, 0)] - chi[idx];
            self.a[2 * idx + 1] += chi[g.shift(idx, 0, 1)] - chi[idx];
        }
    }

    /// Head node of the directed link (idx, dir).
    fn head(&self, idx: usize, dir: usize) -> usize {
        if dir == 0 {
            self.grid.shift(idx, 1, 0)
        } else {
            self.grid.shift(idx, 0, 1)
        }
    }

    /// Parallel-transported head value e^{-iA} psi_head for a link.
    fn transported_head(&self, idx: usize, dir: usize) -> Complex64 {
        Complex64::from_polar(1.0, -self.link(idx, dir)) * self.psi[self.head(idx, dir)]
    }
}

/// Covariant lattice derivative per directed link:
/// (psi_head e^{-iA} - psi_tail) / h. Returns [D_x, D_y] per node.
pub fn covariant_derivative(state: &FieldState) -> Vec<[Complex64; 2]> {
    let g = state.grid;
    let h = g.spacing();
    (0..g.num_nodes())
        .map(|idx| {
            [
                (state.transported_head(idx, 0) - state.psi[idx]) / h,
                (state.transported_head(idx, 1) - state.psi[idx]) / h,
            ]
        })
        .collect()
}

/// Discrete dA per plaquette: oriented sum of the four link values divided by h^2.
pub fn plaquette_curl(state: &FieldState) -> Vec<f64> {
    let g = state.grid;
    let h2 = g.spacing() * g.spacing();
    (0..g.num_nodes())
        .map(|p| plaquette_circulation(state, p) / h2)
        .collect()
}

/// Oriented circulation of A around plaquette p (not divided by h^2).
pub fn plaquette_circulation(state: &FieldState, p: usize) -> f64 {
    let g = state.grid;
    state.link(p, 0) + state.link(g.shift(p, 1, 0), 1)
        - state.link(g.shift(p, 0, 1), 0)
        - state.link(p, 1)
}

/// Gauge-invariant supercurrent per directed link:
/// j = Im(psi_mid^bar D_A psi) with the midpoint average taken in the link's
/// parallel-transported frame, which collapses to
/// Im(psi_tail^bar e^{-iA} psi_head)/h and is exactly gauge invariant.
/// Returns [j_x, j_y] per node (outgoing links).
pub fn supercurrent(state: &FieldState) -> Vec<[f64; 2]> {
    let g = state.grid;
    let h = g.spacing();
    (0..g.num_nodes())
        .map(|idx| {
            [
                (state.psi[idx].conj() * state.transported_head(idx, 0)).im / h,
                (state.psi[idx].conj() * state.transported_head(idx, 1)).im / h,
            ]
        })
        .collect()
}

/// Gauge-invariant phase difference along a link, reduced to (-pi, pi].
fn link_phase(state: &FieldState, idx: usize, dir: usize) -> f64 {
    (state.psi[idx].conj() * state.transported_head(idx, dir)).arg()
}

/// Vorticity per plaquette: (winding of the reduced link phases around the
/// plaquette plus the A-circulation) / 2 pi. Integer-valued for nowhere-zero
/// psi up to float roundoff. Plaquettes touching a psi = 0 node are marked
/// singular (NaN) and skipped by the extractor's neighbors.
pub fn vorticity(state: &FieldState) -> Vec<f64> {
    let g = state.grid;
    let two_pi = 2.0 * std::f64::consts::PI;
    (0..g.num_nodes())
        .map(|p| {
            let corners = [
                p,
                g.shift(p, 1, 0),
                g.shift(p, 1, 1),
                g.shift(p, 0, 1),
            ];
            if corners.iter().any(|&c| state.psi[c].norm() == 0.0) {
                return f64::NAN;
            }
            let winding = link_phase(state, p, 0) + link_phase(state, g.shift(p, 1, 0), 1)
                - link_phase(state, g.shift(p, 0, 1), 0)
                - link_phase(state, p, 1);
            (winding + plaquette_circulation(state, p)) / two_pi
        })
        .collect()
}

/// Finite list of vortex positions and integer degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexConfig {
    pub l: f64,
    pub vortices: Vec<(Point, i32)>,
}

impl VortexConfig {
    pub fn new(l: f64, vortices: Vec<(Point, i32)>) -> Result<Self> {
        let cfg = Self { l, vortices };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn empty(l: f64) -> Self {
        Self {
            l,
            vortices: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let total: i32 = self.vortices.iter().map(|(_, d)| d).sum();
        if total != 0 {
            return Err(CoreError::ConfigRejected(format!(
                "vortex degrees must sum to zero in the zero-flux sector, got {total}"
            )));
        }
        for i in 0..self.vortices.len() {
            for j in (i + 1)..self.vortices.len() {
                if self.vortices[i].0.torus_distance(self.vortices[j].0, self.l) == 0.0 {
                    return Err(CoreError::SingularConfiguration(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Point> {
        self.vortices.iter().map(|(p, _)| *p).collect()
    }

    pub fn degrees(&self) -> Vec<i32> {
        self.vortices.iter().map(|(_, d)| *d).collect()
    }
}

/// Cluster plaquettes with |winding| >= threshold (default 0.5) into
/// integer-degree vortices at winding-weighted centroids (4-connected
/// clustering; centroids wrap relative to the cluster's first plaquette).
pub fn extract_vortices(state: &FieldState, threshold: f64) -> VortexConfig {
    let g = state.grid;
    let w = vorticity(state);
    let n = g.num_nodes();
    let mut visited = vec![false; n];
    let mut vortices = Vec::new();

    for start in 0..n {
        if visited[start] || !(w[start].abs() >= threshold) {
            continue;
        }
        // Flood-fill the 4-connected cluster of above-threshold plaquettes.
        let mut stack = vec![start];
        visited[start] = true;
        let mut members = Vec::new();
        while let Some(p) = stack.pop() {
            members.push(p);
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let q = g.shift(p, dx, dy);
                if !visited[q] && w[q].abs() >= threshold {
                    visited[q] = true;
                    stack.push(q);
                }
            }
        }
        let ref_pt = g.plaquette_center(members[0]);
        let mut weight_sum = 0.0;
        let mut centroid = Vec2::ZERO;
        for &p in &members {
            let offset = g.plaquette_center(p).torus_offset(ref_pt, g.side());
            weight_sum += w[p];
            centroid = centroid + offset * w[p];
        }
        let degree = weight_sum.round() as i32;
        if degree == 0 {
            continue;
        }
        let centroid = centroid * (1.0 / weight_sum);
        let pos = Point::new(ref_pt.x + centroid.x, ref_pt.y + centroid.y).wrap(g.side());
        vortices.push((pos, degree));
    }

    VortexConfig {
        l: g.side(),
        vortices,
    }
}

/// 2D FFT helper on row-major complex data (forward and inverse, with the
/// 1/N^2 normalization applied on the inverse).
pub(crate) struct Fft2 {
    n: usize,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        // Rows.
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        // Columns via transpose, process, transpose back.
        let mut col = vec![Complex64::default(); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            plan.process(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
        if inverse {
            let scale = 1.0 / (n * n) as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }
}

/// Solve the unscaled lattice Poisson problem sum_neighbors f - 4 f = rhs
/// spectrally, with the zero mode of the solution set to zero. The rhs zero
/// mode is discarded (callers guarantee compatibility).
pub(crate) fn solve_lattice_poisson(n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut data: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fft = Fft2::new(n);
    fft.forward(&mut data);
    let two_pi = 2.0 * std::f64::consts::PI;
    for ky in 0..n {
        for kx in 0..n {
            let idx = ky * n + kx;
            if kx == 0 && ky == 0 {
                data[idx] = Complex64::default();
                continue;
            }
            let symbol = -(2.0 - 2.0 * (two_pi * kx as f64 / n as f64).cos())
                - (2.0 - 2.0 * (two_pi * ky as f64 / n as f64).cos());
            data[idx] /= symbol;
        }
    }
    fft.inverse(&mut data);
    data.iter().map(|v| v.re).collect()
}

/// Discrete divergence of the link field at each node (unscaled sums, the
/// adjoint of the link difference):
/// div A (v) = A_x(v) - A_x(v-ex) + A_y(v) - A_y(v-ey).
pub fn link_divergence(state: &FieldState) -> Vec<f64> {
    let g = state.grid;
    (0..g.num_nodes())
        .map(|idx| {
            state.link(idx, 0) - state.link(g.shift(idx, -1, 0), 0) + state.link(idx, 1)
                - state.link(g.shift(idx, 0, -1), 1)
        })
        .collect()
}

/// Gauge-project onto the Coulomb gauge d*A = 0: solve the lattice Poisson
/// problem for the gauge function spectrally and transform. All
/// gauge-invariant observables are preserved exactly.
pub fn coulomb_project(state: &FieldState) -> FieldState {
    let g = state.grid;
    let div = link_divergence(state);
    let rhs: Vec<f64> = div.iter().map(|&d| -d).collect();
    let chi = solve_lattice_poisson(g.resolution(), &rhs);
    let mut out = state.clone();
    out.gauge_transform(&chi);
    out
}

/// Build a vortex-seeded state: the phase is generated from the lattice Green
/// function of the flat Laplacian on the dual grid (so each seeded plaquette
/// carries exactly the requested winding), the modulus is a tanh core profile,
/// and A = 0.
pub fn seed_vortices(grid: TorusGrid, config: &VortexConfig, eps: f64) -> Result<FieldState> {
    config.validate()?;
    let n = grid.resolution();
    let h = grid.spacing();
    for i in 0..config.vortices.len() {
        for j in (i + 1)..config.vortices.len() {
            let d = config.vortices[i]
                .0
                .torus_distance(config.vortices[j].0, grid.side());
            if d <= 4.0 * eps {
                return Err(CoreError::ConfigRejected(format!(
                    "vortices {i} and {j} are separated by {d:.4} <= 4 eps = {:.4}",
                    4.0 * eps
                )));
            }
        }
    }

    let mut state = FieldState::vacuum(grid);
    if config.vortices.is_empty() {
        return Ok(state);
    }

    // Stream function on dual nodes (plaquette centers): (-Lap) S = 2 pi d.
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut rhs = vec![0.0; grid.num_nodes()];
    for (pos, d) in &config.vortices {
        let ix = ((pos.x / h - 0.5).round().rem_euclid(n as f64)) as usize % n;
        let iy = ((pos.y / h - 0.5).round().rem_euclid(n as f64)) as usize % n;
        rhs[grid.index(ix, iy)] += two_pi * *d as f64;
    }
    let neg_rhs: Vec<f64> = rhs.iter().map(|&v| -v).collect();
    let s = solve_lattice_poisson(n, &neg_rhs);

    // Link phase increments from dual differences; their plaquette curl is
    // (-Lap) S = the seeded winding.
    let dual = |ix: isize, iy: isize| {
        s[grid.index(
            ix.rem_euclid(n as isize) as usize,
            iy.rem_euclid(n as isize) as usize,
        )]
    };
    let raw_dtheta_x = |ix: usize, iy: usize| {
        dual(ix as isize, iy as isize) - dual(ix as isize, iy as isize - 1)
    };
    let raw_dtheta_y = |ix: usize, iy: usize| {
        dual(ix as isize - 1, iy as isize) - dual(ix as isize, iy as isize)
    };

    // The stream construction pins every plaquette curl but leaves fractional
    // holonomies around the two torus cycles. Shift by a constant harmonic
    // 1-form so both holonomies land on exact multiples of 2 pi; otherwise
    // the reconstructed single-valued phase carries spurious windings along
    // the wrap rows.
    let principal = |v: f64| {
        let mut r = v.rem_euclid(two_pi);
        if r > std::f64::consts::PI {
            r -= two_pi;
        }
        r
    };
    let hol_x: f64 = (0..n).map(|ix| raw_dtheta_x(ix, 0)).sum();
    let hol_y: f64 = (0..n).map(|iy| raw_dtheta_y(0, iy)).sum();
    let gamma_x = -principal(hol_x) / n as f64;
    let gamma_y = -principal(hol_y) / n as f64;
    let dtheta_x = |ix: usize, iy: usize| raw_dtheta_x(ix, iy) + gamma_x;
    let dtheta_y = |ix: usize, iy: usize| raw_dtheta_y(ix, iy) + gamma_y;

    // Node phases by integration along the first row, then up each column.
    let mut theta = vec![0.0; grid.num_nodes()];
    for ix in 1..n {
        theta[grid.index(ix, 0)] = theta[grid.index(ix - 1, 0)] + dtheta_x(ix - 1, 0);
    }
    for iy in 1..n {
        for ix in 0..n {
            theta[grid.index(ix, iy)] = theta[grid.index(ix, iy - 1)] + dtheta_y(ix, iy - 1);
        }
    }

    for idx in 0..grid.num_nodes() {
        let p = grid.node_point(idx);
        let mut rho = 1.0;
        for (pos, _) in &config.vortices {
            rho *= (p.torus_distance(*pos, grid.side()) / eps).tanh();
        }
        // Keep the modulus strictly positive so the phase stays readable even
        // when a seed lands exactly on a node.
        state.psi[idx] = Complex64::from_polar(rho.max(1e-12), theta[idx]);
    }
    Ok(state)
}

/// Write a field snapshot in the documented text format: a header line
/// `L=<side> N=<resolution>` followed by one line per node (row-major):
/// `psi_re psi_im a_x a_y`.
pub fn write_snapshot(state: &FieldState) -> String {
    let g = state.grid;
    let mut out = String::with_capacity(g.num_nodes() * 64);
    out.push_str(&format!("L={:.17e} N={}\n", g.side(), g.resolution()));
    for idx in 0..g.num_nodes() {
        out.push_str(&format!(
            "{:.17e} {:.17e} {:.17e} {:.17e}\n",
            state.psi[idx].re,
            state.psi[idx].im,
            state.a[2 * idx],
            state.a[2 * idx + 1]
        ));
    }
    out
}

/// Parse a snapshot produced by [`write_snapshot`].
pub fn read_snapshot(text: &str) -> Result<FieldState> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::PreconditionViolated("empty snapshot".into()))?;
    let parse_err = |m: &str| CoreError::PreconditionViolated(format!("snapshot parse: {m}"));
    let mut l = None;
    let mut n = None;
    for tok in header.split_whitespace() {
        if let Some(v) = tok.strip_prefix("L=") {
            l = Some(v.parse::<f64>().map_err(|e| parse_err(&e.to_string()))?);
        } else if let Some(v) = tok.strip_prefix("N=") {
            n = Some(v.parse::<usize>().map_err(|e| parse_err(&e.to_string()))?);
        }
    }
    let (l, n) = (
        l.ok_or_else(|| parse_err("missing L"))?,
        n.ok_or_else(|| parse_err("missing N"))?,
    );
    let grid = TorusGrid::new(l, n)?;
    let mut state = FieldState::vacuum(grid);
    for idx in 0..grid.num_nodes() {
        let line = lines
            .next()
            .ok_or_else(|| parse_err(&format!("missing node line {idx}")))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(&e.to_string()))?;
        if vals.len() != 4 {
            return Err(parse_err(&format!("node line {idx} has {} fields", vals.len())));
        }
        state.psi[idx] = Complex64::new(vals[0], vals[1]);
        state.a[2 * idx] = vals[2];
        state.a[2 * idx + 1] = vals[3];
    }
    Ok(state)
}


/// Numeric hooks for development probes and oracle tests.
pub mod test_hooks {
    use super::*;

    /// Mean-zero lattice Green column of the flat continuum Laplacian on the
    /// unit torus: solves lap G = delta - 1 with the standard 5-point stencil
    /// at resolution n, returning G(offset) row-major.
    pub fn lattice_green_column(n: usize) -> Vec<f64> {
        let mut rhs = vec![-1.0 / (n * n) as f64; n * n];
        rhs[0] += 1.0;
        super::solve_lattice_poisson(n, &rhs)
    }
}
