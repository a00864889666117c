//! The control-translated lattice energy
//!
//!   E_u[psi, A] = sum_nodes (1/2)[F*(x, Re xi)^2 + F*(x, Im xi)^2] w
//!               + sum_nodes <j_A, u> w
//!               + sum_plaquettes |dA|^2 / (2 lambda) w
//!               + sum_nodes (1 - |psi|^2)^2 / (4 eps^2) w
//!
//! with xi the complex covector assembled from the two outgoing covariant
//! link derivatives at each node, w the Busemann-Hausdorff density times h^2,
//! and the coupling paired through the gauge-invariant supercurrent.

use num_complex::Complex64;

use crate::algebra::{Covector, Point, SymMat2, Vec2};
use crate::control::ControlField;
use crate::error::{CoreError, Result};
use crate::finsler::{phi_u_conj, FinslerSpec};
use crate::grid::{coulomb_project, supercurrent, FieldState, TorusGrid};

/// How F* is extended to complex covectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KineticForm {
    /// F*(xi)^2 := F*(Re xi)^2 + F*(Im xi)^2 (default; exactly gauge
    /// invariant for quadratic specs, where it is the Hermitian form
    /// conj(xi) . b xi).
    ReImSplit,
    /// F*(xi)^2 := F*((|xi_x|, |xi_y|))^2 (componentwise modulus), kept as a
    /// sensitivity-study alternative.
    ModulusSplit,
}

/// Physical parameters of the energy.
#[derive(Debug, Clone)]
pub struct EnergyParams {
    pub eps: f64,
    pub lambda: f64,
    pub spec: FinslerSpec,
    pub u: ControlField,
    pub kinetic_form: KineticForm,
}

impl EnergyParams {
    pub fn new(eps: f64, lambda: f64, spec: FinslerSpec, u: ControlField) -> Result<Self> {
        if eps <= 0.0 || lambda <= 0.0 {
            return Err(CoreError::PreconditionViolated(format!(
                "eps and lambda must be positive, got eps={eps}, lambda={lambda}"
            )));
        }
        Ok(Self {
            eps,
            lambda,
            spec,
            u,
            kinetic_form: KineticForm::ReImSplit,
        })
    }
}

/// Per-term energy values; `total` is the sum of the four parts in a fixed
/// order (kinetic + coupling + magnetic + potential).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub coupling: f64,
    pub magnetic: f64,
    pub potential: f64,
    pub total: f64,
}

enum CompiledKinetic {
    /// Inverse metric per node; closed-form dual.
    Quadratic(Vec<SymMat2>),
    /// Numeric dual via the spec.
    Randers,
}

/// Grid-compiled evaluation tables: density weights, inverse metrics, and
/// control samples at nodes, density weights at plaquette centers.
pub struct EnergyModel {
    pub grid: TorusGrid,
    pub params: EnergyParams,
    w_node: Vec<f64>,
    w_plaq: Vec<f64>,
    u_node: Vec<Vec2>,
    kinetic: CompiledKinetic,
    resolution_warning: bool,
}

impl EnergyModel {
    pub fn compile(grid: TorusGrid, params: EnergyParams) -> Result<Self> {
        params.spec.validate(grid.resolution().min(64))?;
        let h = grid.spacing();
        let n = grid.num_nodes();
        let mut w_node = Vec::with_capacity(n);
        let mut w_plaq = Vec::with_capacity(n);
        let mut u_node = Vec::with_capacity(n);
        for idx in 0..n {
            let xv = grid.node_point(idx);
            w_node.push(params.spec.measure_density(xv) * h * h);
            u_node.push(params.u.eval(xv));
            let xp = grid.plaquette_center(idx);
            w_plaq.push(params.spec.measure_density(xp) * h * h);
        }
        let kinetic = match &params.spec {
            FinslerSpec::Quadratic { metric } => CompiledKinetic::Quadratic(
                (0..n)
                    .map(|idx| metric.at(grid.node_point(idx)).inverse())
                    .collect(),
            ),
            FinslerSpec::Randers { .. } => CompiledKinetic::Randers,
        };
        let resolution_warning = params.eps < 2.0 * h;
        Ok(Self {
            grid,
            params,
            w_node,
            w_plaq,
            u_node,
            kinetic,
            resolution_warning,
        })
    }

    /// Fixed diagonal preconditioner for the flat (Re psi, Im psi, A) vector:
    /// inverse curvature-scale estimates per component. The A sector carries
    /// curvature ~ 1/(lambda h^2) from the magnetic term while psi sits at
    /// O(1); without this rescaling conjugate gradients stall on the scale
    /// mismatch.
    fn preconditioner(&self) -> Vec<f64> {
        let g = self.grid;
        let h = g.spacing();
        let n = g.num_nodes();
        let bmax = |idx: usize| -> f64 {
            match &self.kinetic {
                CompiledKinetic::Quadratic(b) => b[idx].eigenvalues().1,
                CompiledKinetic::Randers => {
                    1.0 / self
                        .params
                        .spec
                        .metric()
                        .at(g.node_point(idx))
                        .eigenvalues()
                        .0
                }
            }
        };
        let mut m = vec![0.0; 4 * n];
        let inv_eps2 = 1.0 / (self.params.eps * self.params.eps);
        for idx in 0..n {
            let w = self.w_node[idx];
            let diag_psi = w * (8.0 * bmax(idx) / (h * h) + 2.0 * inv_eps2);
            m[2 * idx] = 1.0 / diag_psi;
            m[2 * idx + 1] = 1.0 / diag_psi;
        }
        let inv_lambda_h4 = 1.0 / (self.params.lambda * h.powi(4));
        for idx in 0..n {
            let w = self.w_node[idx];
            // x-link borders plaquettes p(v) and p(v - ey); y-link p(v), p(v - ex).
            let px = self.w_plaq[idx] + self.w_plaq[g.shift(idx, 0, -1)];
            let py = self.w_plaq[idx] + self.w_plaq[g.shift(idx, -1, 0)];
            let diag_ax = px * inv_lambda_h4 + 2.0 * w * bmax(idx) / (h * h);
            let diag_ay = py * inv_lambda_h4 + 2.0 * w * bmax(idx) / (h * h);
            m[2 * n + 2 * idx] = 1.0 / diag_ax;
            m[2 * n + 2 * idx + 1] = 1.0 / diag_ay;
        }
        m
    }

    /// True when eps < 2h: vortex cores are under-resolved on this grid.
    pub fn resolution_warning(&self) -> bool {
        self.resolution_warning
    }

    pub fn node_weight(&self, idx: usize) -> f64 {
        self.w_node[idx]
    }

    /// Total measure of the torus, sum of node weights.
    pub fn area(&self) -> f64 {
        self.w_node.iter().sum()
    }

    /// (1/2) F*(x, eta)^2 for a real covector at node idx.
    fn half_dual_sq(&self, idx: usize, eta: Vec2) -> Result<f64> {
        match &self.kinetic {
            CompiledKinetic::Quadratic(b) => Ok(0.5 * b[idx].quad(eta)),
            CompiledKinetic::Randers => {
                let x = self.grid.node_point(idx);
                let f = self.params.spec.eval_f_dual(x, Covector(eta))?;
                Ok(0.5 * f * f)
            }
        }
    }

    /// Gradient of (1/2) F*(x, .)^2 at a real covector (the inverse Legendre
    /// map of the base norm).
    fn half_dual_sq_grad(&self, idx: usize, eta: Vec2) -> Result<Vec2> {
        match &self.kinetic {
            CompiledKinetic::Quadratic(b) => Ok(b[idx].apply(eta)),
            CompiledKinetic::Randers => {
                let x = self.grid.node_point(idx);
                let u0 = ControlField::zero(self.params.spec.torus_side());
                Ok(crate::finsler::legendre_inverse(&self.params.spec, &u0, x, Covector(eta))?.0)
            }
        }
    }

    fn kinetic_pair(&self, idx: usize, dx: Complex64, dy: Complex64) -> Result<f64> {
        match self.params.kinetic_form {
            KineticForm::ReImSplit => Ok(self.half_dual_sq(idx, Vec2::new(dx.re, dy.re))?
                + self.half_dual_sq(idx, Vec2::new(dx.im, dy.im))?),
            KineticForm::ModulusSplit => {
                self.half_dual_sq(idx, Vec2::new(dx.norm(), dy.norm()))
            }
        }
    }

    /// Evaluate the energy with its exact term decomposition.
    pub fn energy(&self, state: &FieldState) -> Result<EnergyBreakdown> {
        let g = self.grid;
        let h = g.spacing();
        let n = g.num_nodes();
        let mut kinetic = 0.0;
        let mut coupling = 0.0;
        let mut magnetic = 0.0;
        let mut potential = 0.0;
        let inv_4eps2 = 1.0 / (4.0 * self.params.eps * self.params.eps);
        for idx in 0..n {
            let psi = state.psi[idx];
            let tx = Complex64::from_polar(1.0, -state.a[2 * idx]) * state.psi[g.shift(idx, 1, 0)];
            let ty =
                Complex64::from_polar(1.0, -state.a[2 * idx + 1]) * state.psi[g.shift(idx, 0, 1)];
            let dx = (tx - psi) / h;
            let dy = (ty - psi) / h;
            let w = self.w_node[idx];
            kinetic += self.kinetic_pair(idx, dx, dy)? * w;
            let jx = (psi.conj() * tx).im / h;
            let jy = (psi.conj() * ty).im / h;
            let u = self.u_node[idx];
            coupling += (jx * u.x + jy * u.y) * w;
            let m2 = psi.norm_sqr();
            potential += (1.0 - m2) * (1.0 - m2) * inv_4eps2 * w;
        }
        let inv_2lambda_h4 = 1.0 / (2.0 * self.params.lambda * h.powi(4));
        for p in 0..n {
            let circ = state.a[2 * p] + state.a[2 * g.shift(p, 1, 0) + 1]
                - state.a[2 * g.shift(p, 0, 1)]
                - state.a[2 * p + 1];
            magnetic += circ * circ * inv_2lambda_h4 * self.w_plaq[p];
        }
        let total = kinetic + coupling + magnetic + potential;
        Ok(EnergyBreakdown {
            kinetic,
            coupling,
            magnetic,
            potential,
            total,
        })
    }

    /// Second evaluation path through the closed-form conjugate: per node,
    /// phi_u^*(x, Re xi) + phi_u^*(x, Im xi) minus the linear covector
    /// pairing, replaced by the gauge-invariant supercurrent pairing. Agrees
    /// with [`Self::energy`] up to float associativity; the comparison is the
    /// discrete form of the exact conjugate decomposition.
    pub fn energy_via_conjugate(&self, state: &FieldState) -> Result<f64> {
        let g = self.grid;
        let h = g.spacing();
        let n = g.num_nodes();
        let mut total = 0.0;
        let inv_4eps2 = 1.0 / (4.0 * self.params.eps * self.params.eps);
        for idx in 0..n {
            let x = g.node_point(idx);
            let psi = state.psi[idx];
            let tx = Complex64::from_polar(1.0, -state.a[2 * idx]) * state.psi[g.shift(idx, 1, 0)];
            let ty =
                Complex64::from_polar(1.0, -state.a[2 * idx + 1]) * state.psi[g.shift(idx, 0, 1)];
            let dx = (tx - psi) / h;
            let dy = (ty - psi) / h;
            let re = Covector(Vec2::new(dx.re, dy.re));
            let im = Covector(Vec2::new(dx.im, dy.im));
            let u = self.u_node[idx];
            let jx = (psi.conj() * tx).im / h;
            let jy = (psi.conj() * ty).im / h;
            let conj_sum = phi_u_conj(&self.params.spec, &self.params.u, x, re)?
                + phi_u_conj(&self.params.spec, &self.params.u, x, im)?;
            let linear = (re.0 + im.0).dot(u);
            let node_val = conj_sum - linear + (jx * u.x + jy * u.y);
            let m2 = psi.norm_sqr();
            total += node_val * self.w_node[idx]
                + (1.0 - m2) * (1.0 - m2) * inv_4eps2 * self.w_node[idx];
        }
        let inv_2lambda_h4 = 1.0 / (2.0 * self.params.lambda * h.powi(4));
        for p in 0..n {
            let circ = state.a[2 * p] + state.a[2 * g.shift(p, 1, 0) + 1]
                - state.a[2 * g.shift(p, 0, 1)]
                - state.a[2 * p + 1];
            total += circ * circ * inv_2lambda_h4 * self.w_plaq[p];
        }
        Ok(total)
    }

    /// Exact discrete gradient with respect to (Re psi, Im psi) per node
    /// (packed as a complex number d/dRe + i d/dIm) and A per link.
    pub fn gradient(&self, state: &FieldState) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let g = self.grid;
        let h = g.spacing();
        let n = g.num_nodes();
        let mut gpsi = vec![Complex64::default(); n];
        let mut ga = vec![0.0; 2 * n];
        let inv_eps2 = 1.0 / (self.params.eps * self.params.eps);

        for idx in 0..n {
            let psi = state.psi[idx];
            let w = self.w_node[idx];
            let u = self.u_node[idx];
            for dir in 0..2 {
                let head = if dir == 0 {
                    g.shift(idx, 1, 0)
                } else {
                    g.shift(idx, 0, 1)
                };
                let phase = Complex64::from_polar(1.0, -state.a[2 * idx + dir]);
                let t = phase * state.psi[head];
                let d = (t - psi) / h;
                // Kinetic term: G = dual gradient at (Re xi, Im xi), packed per
                // direction. The per-direction component couples only to this
                // link's derivative.
                let (gre, gim) = match self.params.kinetic_form {
                    KineticForm::ReImSplit => {
                        // Needs the full covector at this node: compute both
                        // components once per node (dir 0) and reuse; cheaper
                        // to just recompute per dir for clarity.
                        let other = if dir == 0 {
                            (Complex64::from_polar(1.0, -state.a[2 * idx + 1])
                                * state.psi[g.shift(idx, 0, 1)]
                                - psi)
                                / h
                        } else {
                            (Complex64::from_polar(1.0, -state.a[2 * idx])
                                * state.psi[g.shift(idx, 1, 0)]
                                - psi)
                                / h
                        };
                        let (dx, dy) = if dir == 0 { (d, other) } else { (other, d) };
                        let gr = self.half_dual_sq_grad(idx, Vec2::new(dx.re, dy.re))?;
                        let gi = self.half_dual_sq_grad(idx, Vec2::new(dx.im, dy.im))?;
                        if dir == 0 {
                            (gr.x, gi.x)
                        } else {
                            (gr.y, gi.y)
                        }
                    }
                    KineticForm::ModulusSplit => {
                        let other = if dir == 0 {
                            (Complex64::from_polar(1.0, -state.a[2 * idx + 1])
                                * state.psi[g.shift(idx, 0, 1)]
                                - psi)
                                / h
                        } else {
                            (Complex64::from_polar(1.0, -state.a[2 * idx])
                                * state.psi[g.shift(idx, 1, 0)]
                                - psi)
                                / h
                        };
                        let (dx, dy) = if dir == 0 { (d, other) } else { (other, d) };
                        let gm = self.half_dual_sq_grad(idx, Vec2::new(dx.norm(), dy.norm()))?;
                        let comp = if dir == 0 { gm.x } else { gm.y };
                        let dn = d.norm();
                        if dn == 0.0 {
                            (0.0, 0.0)
                        } else {
                            (comp * d.re / dn, comp * d.im / dn)
                        }
                    }
                };
                let gcplx = Complex64::new(gre, gim);
                let coef = w / h;
                gpsi[head] += gcplx * phase.conj() * coef;
                gpsi[idx] -= gcplx * coef;
                ga[2 * idx + dir] += coef * (gcplx.conj() * t).im;

                // Coupling term through the supercurrent on this link.
                let u_dir = if dir == 0 { u.x } else { u.y };
                let cu = w * u_dir / h;
                gpsi[idx] += Complex64::new(0.0, -1.0) * t * cu;
                gpsi[head] += Complex64::new(0.0, 1.0) * psi * phase.conj() * cu;
                ga[2 * idx + dir] -= cu * (psi.conj() * t).re;
            }
            // Potential term.
            let m2 = psi.norm_sqr();
            gpsi[idx] += psi * (-(1.0 - m2) * inv_eps2 * w);
        }

        // Magnetic term.
        let inv_lambda_h4 = 1.0 / (self.params.lambda * h.powi(4));
        for p in 0..n {
            let px = g.shift(p, 1, 0);
            let py = g.shift(p, 0, 1);
            let circ = state.a[2 * p] + state.a[2 * px + 1] - state.a[2 * py] - state.a[2 * p + 1];
            let coef = self.w_plaq[p] * circ * inv_lambda_h4;
            ga[2 * p] += coef;
            ga[2 * px + 1] += coef;
            ga[2 * py] -= coef;
            ga[2 * p + 1] -= coef;
        }

        Ok((gpsi, ga))
    }

    /// Max-norm of the energy gradient after Coulomb projection: the discrete
    /// Euler-Lagrange residual. Zero exactly at discrete critical points.
    pub fn el_residual(&self, state: &FieldState) -> Result<f64> {
        let projected = coulomb_project(state);
        let (gpsi, ga) = self.gradient(&projected)?;
        let mut m = 0.0f64;
        for v in &gpsi {
            m = m.max(v.re.abs()).max(v.im.abs());
        }
        for v in &ga {
            m = m.max(v.abs());
        }
        Ok(m)
    }
}

/// E_{u1}[state] - E_{u2}[state] together with its affine prediction
/// sum <j_A, u1 - u2> w. The two agree up to float associativity: the
/// u-dependence of the energy is exactly affine.
pub fn gamma_continuity_gap(
    state: &FieldState,
    base: &EnergyParams,
    u1: &ControlField,
    u2: &ControlField,
) -> Result<(f64, f64)> {
    let mk = |u: &ControlField| -> Result<f64> {
        let mut p = base.clone();
        p.u = u.clone();
        let model = EnergyModel::compile(state.grid, p)?;
        Ok(model.energy(state)?.total)
    };
    let gap = mk(u1)? - mk(u2)?;

    let j = supercurrent(state);
    let mut predicted = 0.0;
    let h = state.grid.spacing();
    for idx in 0..state.grid.num_nodes() {
        let x = state.grid.node_point(idx);
        let du = u1.eval(x) - u2.eval(x);
        let w = base.spec.measure_density(x) * h * h;
        predicted += (j[idx][0] * du.x + j[idx][1] * du.y) * w;
    }
    Ok((gap, predicted))
}

/// Options for the nonlinear conjugate gradient minimizer.
#[derive(Debug, Clone, Copy)]
pub struct MinimizeOpts {
    pub max_iters: usize,
    /// Max-norm gradient tolerance.
    pub grad_tol: f64,
    /// Record every k-th iteration in the trace (1 = all).
    pub trace_every: usize,
    /// Cap on the max-norm change of any component per iteration. Keeps the
    /// line search from vaulting over energy barriers (metastable vortex
    /// states sit in log-shallow basins).
    pub max_step: f64,
}

impl Default for MinimizeOpts {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            grad_tol: 1e-6,
            trace_every: 1,
            max_step: 0.25,
        }
    }
}

/// One recorded minimizer iteration.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub kinetic: f64,
    pub coupling: f64,
    pub magnetic: f64,
    pub potential: f64,
}

/// Minimization trace plus convergence flag.
#[derive(Debug, Clone)]
pub struct MinimizeTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    pub iterations: usize,
    pub final_energy: f64,
    pub final_grad_norm: f64,
}

impl MinimizeTrace {
    /// CSV with the documented column order.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("iter,energy,grad_norm,kinetic,coupling,magnetic,potential\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.iter, r.energy, r.grad_norm, r.kinetic, r.coupling, r.magnetic, r.potential
            ));
        }
        out
    }
}

fn flatten(state: &FieldState) -> Vec<f64> {
    let n = state.grid.num_nodes();
    let mut x = Vec::with_capacity(4 * n);
    for p in &state.psi {
        x.push(p.re);
        x.push(p.im);
    }
    x.extend_from_slice(&state.a);
    x
}

fn unflatten(grid: TorusGrid, x: &[f64]) -> FieldState {
    let n = grid.num_nodes();
    let mut st = FieldState::vacuum(grid);
    for idx in 0..n {
        st.psi[idx] = Complex64::new(x[2 * idx], x[2 * idx + 1]);
    }
    st.a.copy_from_slice(&x[2 * n..]);
    st
}

fn grad_to_flat(gpsi: &[Complex64], ga: &[f64]) -> Vec<f64> {
    let mut g = Vec::with_capacity(2 * gpsi.len() + ga.len());
    for v in gpsi {
        g.push(v.re);
        g.push(v.im);
    }
    g.extend_from_slice(ga);
    g
}

/// Minimize the energy by Polak-Ribiere nonlinear conjugate gradient with
/// restarts and Armijo backtracking. The energy trace is nonincreasing by
/// construction of the line search.
pub fn minimize(
    state0: &FieldState,
    model: &EnergyModel,
    opts: MinimizeOpts,
) -> Result<(FieldState, MinimizeTrace)> {
    let grid = state0.grid;
    let mut x = flatten(state0);
    let dim = x.len();

    let eval_full = |x: &[f64]| -> Result<(EnergyBreakdown, Vec<f64>)> {
        let st = unflatten(grid, x);
        let e = model.energy(&st)?;
        let (gpsi, ga) = model.gradient(&st)?;
        Ok((e, grad_to_flat(&gpsi, &ga)))
    };
    let eval_energy = |x: &[f64]| -> Result<f64> {
        let st = unflatten(grid, x);
        Ok(model.energy(&st)?.total)
    };

    let precond = model.preconditioner();
    let (mut e, mut g) = eval_full(&x)?;
    let mut d: Vec<f64> = g.iter().zip(precond.iter()).map(|(v, m)| -v * m).collect();
    let mut alpha = 1.0f64;
    let mut rows = Vec::new();
    let mut converged = false;
    let mut iters_done = 0;
    let mut gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    for k in 0..opts.max_iters {
        iters_done = k;
        if k % opts.trace_every == 0 {
            rows.push(TraceRow {
                iter: k,
                energy: e.total,
                grad_norm: gmax,
                kinetic: e.kinetic,
                coupling: e.coupling,
                magnetic: e.magnetic,
                potential: e.potential,
            });
        }
        if gmax <= opts.grad_tol {
            converged = true;
            break;
        }

        let mut slope: f64 = d.iter().zip(g.iter()).map(|(di, gi)| di * gi).sum();
        if slope >= 0.0 {
            // Restart on non-descent direction.
            for i in 0..dim {
                d[i] = -g[i] * precond[i];
            }
            slope = d.iter().zip(g.iter()).map(|(di, gi)| di * gi).sum();
        }

        // Armijo backtracking with a mildly growing initial step, capped so
        // no component moves more than max_step at once.
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut a = (alpha * 2.0).min(1e6);
        if dmax > 0.0 {
            a = a.min(opts.max_step / dmax);
        }
        let c1 = 1e-4;
        let mut accepted = false;
        let mut xt = vec![0.0; dim];
        for _ in 0..60 {
            for i in 0..dim {
                xt[i] = x[i] + a * d[i];
            }
            let et = eval_energy(&xt)?;
            if et <= e.total + c1 * a * slope {
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted {
            // Line search stalled: the gradient direction makes no progress at
            // float resolution; report best-so-far.
            break;
        }
        alpha = a;
        x.copy_from_slice(&xt);
        let (e_new, g_new) = eval_full(&x)?;

        // Preconditioned Polak-Ribiere+ coefficient.
        let gmg: f64 = g
            .iter()
            .zip(precond.iter())
            .map(|(v, m)| v * v * m)
            .sum();
        let mut beta: f64 = g_new
            .iter()
            .zip(g.iter())
            .zip(precond.iter())
            .map(|((gn, go), m)| gn * m * (gn - go))
            .sum::<f64>()
            / gmg;
        if !beta.is_finite() || beta < 0.0 {
            beta = 0.0;
        }
        for i in 0..dim {
            d[i] = -g_new[i] * precond[i] + beta * d[i];
        }
        e = e_new;
        g = g_new;
        gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }

    let trace = MinimizeTrace {
        converged,
        iterations: iters_done,
        final_energy: e.total,
        final_grad_norm: gmax,
        rows,
    };
    Ok((unflatten(grid, &x), trace))
}

/// Sampled sup of |u| over grid nodes, for bound checks.
pub fn sup_u_on_grid(u: &ControlField, grid: TorusGrid) -> f64 {
    let mut m = 0.0f64;
    for idx in 0..grid.num_nodes() {
        m = m.max(u.eval(grid.node_point(idx)).norm());
    }
    m
}

/// Max eigenvalue of the metric over grid nodes (the constant Lambda in the
/// Young-inequality coupling bound |<j,u>| <= F*^2/(4 Lambda) + Lambda P^2 |u|^2).
pub fn max_metric_eigenvalue(spec: &FinslerSpec, grid: TorusGrid) -> f64 {
    let mut m = 0.0f64;
    for idx in 0..grid.num_nodes() {
        let a = spec.metric().at(grid.node_point(idx));
        m = m.max(a.eigenvalues().1);
    }
    m
}

#[allow(unused_imports)]
pub(crate) use self::tests_support::*;

mod tests_support {
    use super::*;

    /// Build a quadratic-spec model on a small grid; shared by unit tests and
    /// dev probes.
    #[allow(dead_code)]
    pub(crate) fn simple_model(
        grid: TorusGrid,
        eps: f64,
        lambda: f64,
        u: ControlField,
    ) -> EnergyModel {
        let spec = FinslerSpec::euclidean(grid.side());
        let params = EnergyParams::new(eps, lambda, spec, u).unwrap();
        EnergyModel::compile(grid, params).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Point;
    use crate::finsler::MetricField;
    use crate::grid::{seed_vortices, VortexConfig};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(grid: TorusGrid, seed: u64, amp: f64) -> FieldState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = FieldState::vacuum(grid);
        for idx in 0..grid.num_nodes() {
            st.psi[idx] = Complex64::new(
                1.0 + amp * rng.gen_range(-1.0..1.0),
                amp * rng.gen_range(-1.0..1.0),
            );
            st.a[2 * idx] = amp * rng.gen_range(-1.0..1.0);
            st.a[2 * idx + 1] = amp * rng.gen_range(-1.0..1.0);
        }
        st
    }

    #[test]
    fn vacuum_energy_is_zero_for_any_control() {
        let grid = TorusGrid::new(1.0, 16).unwrap();
        let u = ControlField::constant(1.0, Vec2::new(0.4, -0.3));
        let model = simple_model(grid, 0.2, 1.0, u);
        let st = FieldState::vacuum(grid);
        let e = model.energy(&st).unwrap();
        assert_eq!(e.total, 0.0);
        assert_eq!(e.kinetic, 0.0);
        assert_eq!(e.coupling, 0.0);
    }

    #[test]
    fn zero_field_energy_is_pure_potential() {
        let grid = TorusGrid::new(1.0, 20).unwrap();
        let model = simple_model(grid, 0.1, 1.0, ControlField::zero(1.0));
        let mut st = FieldState::vacuum(grid);
        for p in st.psi.iter_mut() {
            *p = Complex64::default();
        }
        let e = model.energy(&st).unwrap();
        assert_relative_eq!(e.total, 25.0, epsilon = 1e-10);
        assert_eq!(e.kinetic, 0.0);
        assert_eq!(e.magnetic, 0.0);
    }

    #[test]
    fn decomposition_identity_two_paths() {
        let grid = TorusGrid::new(1.0, 16).unwrap();
        let u = ControlField::Fourier {
            l: 1.0,
            modes: vec![crate::control::gradient_mode(1.0, [1, 0], 0.3, 0.1)],
        };
        let spec = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, SymMat2::new(1.5, 0.2, 1.0)),
        };
        let params = EnergyParams::new(0.15, 0.8, spec, u).unwrap();
        let model = EnergyModel::compile(grid, params).unwrap();
        for seed in 0..5 {
            let st = random_state(grid, seed, 0.4);
            let e1 = model.energy(&st).unwrap().total;
            let e2 = model.energy_via_conjugate(&st).unwrap();
            assert!(
                (e1 - e2).abs() <= 1e-12 * e1.abs().max(1.0),
                "decomposition defect {:.3e}",
                (e1 - e2).abs()
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = TorusGrid::new(1.0, 16).unwrap();
        let u = ControlField::constant(1.0, Vec2::new(0.2, -0.1));
        let spec = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, SymMat2::new(2.0, 0.3, 1.2)),
        };
        let params = EnergyParams::new(0.2, 0.7, spec, u).unwrap();
        let model = EnergyModel::compile(grid, params).unwrap();
        let st = random_state(grid, 3, 0.3);
        let (gpsi, ga) = model.gradient(&st).unwrap();

        let fd_step = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut max_rel: f64 = 0.0;
        for _ in 0..40 {
            let idx = rng.gen_range(0..grid.num_nodes());
            match rng.gen_range(0..4) {
                0 => {
                    let mut sp = st.clone();
                    sp.psi[idx] += Complex64::new(fd_step, 0.0);
                    let mut sm = st.clone();
                    sm.psi[idx] -= Complex64::new(fd_step, 0.0);
                    let fd = (model.energy(&sp).unwrap().total - model.energy(&sm).unwrap().total)
                        / (2.0 * fd_step);
                    max_rel = max_rel.max((fd - gpsi[idx].re).abs() / (1.0 + fd.abs()));
                }
                1 => {
                    let mut sp = st.clone();
                    sp.psi[idx] += Complex64::new(0.0, fd_step);
                    let mut sm = st.clone();
                    sm.psi[idx] -= Complex64::new(0.0, fd_step);
                    let fd = (model.energy(&sp).unwrap().total - model.energy(&sm).unwrap().total)
                        / (2.0 * fd_step);
                    max_rel = max_rel.max((fd - gpsi[idx].im).abs() / (1.0 + fd.abs()));
                }
                d => {
                    let lid = 2 * idx + (d - 2);
                    let mut sp = st.clone();
                    sp.a[lid] += fd_step;
                    let mut sm = st.clone();
                    sm.a[lid] -= fd_step;
                    let fd = (model.energy(&sp).unwrap().total - model.energy(&sm).unwrap().total)
                        / (2.0 * fd_step);
                    max_rel = max_rel.max((fd - ga[lid]).abs() / (1.0 + fd.abs()));
                }
            }
        }
        assert!(max_rel <= 1e-5, "gradient vs FD relative error {max_rel:.3e}");
    }

    #[test]
    fn gradient_vanishes_at_vacuum_and_is_gauge_null() {
        let grid = TorusGrid::new(1.0, 16).unwrap();
        let model = simple_model(grid, 0.2, 1.0, ControlField::zero(1.0));
        let st = FieldState::vacuum(grid);
        let (gpsi, ga) = model.gradient(&st).unwrap();
        assert!(gpsi.iter().all(|v| v.norm() == 0.0));
        assert!(ga.iter().all(|v| *v == 0.0));

        // Gauge-null: <grad, infinitesimal gauge direction> = 0.
        let model = simple_model(grid, 0.2, 1.0, ControlField::constant(1.0, Vec2::new(0.3, 0.1)));
        let st = random_state(grid, 5, 0.3);
        let (gpsi, ga) = model.gradient(&st).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let chi: Vec<f64> = (0..grid.num_nodes())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let mut pairing = 0.0;
        for idx in 0..grid.num_nodes() {
            // d psi = i psi chi; d A = delta chi.
            let dpsi = Complex64::new(0.0, 1.0) * st.psi[idx] * chi[idx];
            pairing += gpsi[idx].re * dpsi.re + gpsi[idx].im * dpsi.im;
            pairing += ga[2 * idx] * (chi[grid.shift(idx, 1, 0)] - chi[idx]);
            pairing += ga[2 * idx + 1] * (chi[grid.shift(idx, 0, 1)] - chi[idx]);
        }
        assert!(pairing.abs() < 1e-10, "gauge pairing {pairing:.3e}");
    }

    #[test]
    fn total_energy_gauge_invariant_for_quadratic_specs() {
        let grid = TorusGrid::new(1.0, 16).unwrap();
        let spec = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, SymMat2::new(2.5, 0.4, 1.1)),
        };
        let u = ControlField::constant(1.0, Vec2::new(0.25, -0.15));
        let params = EnergyParams::new(0.2, 0.9, spec, u).unwrap();
        let model = EnergyModel::compile(grid, params).unwrap();
        let st = random_state(grid, 7, 0.4);
        let e0 = model.energy(&st).unwrap().total;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let chi: Vec<f64> = (0..grid.num_nodes())
                .map(|_| rng.gen_range(-3.0..3.0))
                .collect();
            let mut st2 = st.clone();
            st2.gauge_transform(&chi);
            let e = model.energy(&st2).unwrap().total;
            assert!(
                (e - e0).abs() <= 1e-10 * e0.abs().max(1.0),
                "gauge variation {:.3e}",
                e - e0
            );
        }
    }

    #[test]
    fn minimize_vacuum_sector_converges() {
        let grid = TorusGrid::new(1.0, 16).unwrap();
        let model = simple_model(grid, 0.2, 1.0, ControlField::zero(1.0));
        let st = random_state(grid, 9, 1e-3);
        let (out, trace) = minimize(
            &st,
            &model,
            MinimizeOpts {
                max_iters: 2000,
                grad_tol: 1e-9,
                trace_every: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(trace.converged, "minimizer did not converge");
        assert!(trace.final_energy < 1e-10, "energy {}", trace.final_energy);
        for p in &out.psi {
            assert!((p.norm() - 1.0).abs() < 1e-5);
        }
        // Monotone trace.
        for w in trace.rows.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12);
        }
    }

    #[test]
    fn el_residual_zero_at_vacuum_positive_on_seed() {
        let grid = TorusGrid::new(1.0, 32).unwrap();
        let model = simple_model(grid, 0.06, 0.5, ControlField::zero(1.0));
        assert_eq!(model.el_residual(&FieldState::vacuum(grid)).unwrap(), 0.0);
        let cfg = VortexConfig::new(
            1.0,
            vec![(Point::new(0.25, 0.5), 1), (Point::new(0.75, 0.5), -1)],
        )
        .unwrap();
        let seeded = seed_vortices(grid, &cfg, 0.06).unwrap();
        assert!(model.el_residual(&seeded).unwrap() > 1e-3);
    }

    #[test]
    fn affinity_gap_matches_prediction_and_is_linear() {
        let grid = TorusGrid::new(1.0, 16).unwrap();
        let st = random_state(grid, 11, 0.3);
        let base = EnergyParams::new(0.2, 1.0, FinslerSpec::euclidean(1.0), ControlField::zero(1.0))
            .unwrap();
        let u1 = ControlField::constant(1.0, Vec2::new(0.3, 0.2));
        let v = ControlField::constant(1.0, Vec2::new(-0.1, 0.4));
        let (gap, predicted) = gamma_continuity_gap(&st, &base, &u1, &v).unwrap();
        assert_relative_eq!(gap, predicted, epsilon = 1e-11);

        // Three-point collinearity in t for u2 = u1 + t v.
        let gap_at = |t: f64| {
            let u2 = u1.fourier_sum(&v.scaled(t));
            gamma_continuity_gap(&st, &base, &u2, &u1).unwrap().0
        };
        let g1 = gap_at(1.0);
        let g2 = gap_at(2.0);
        let g05 = gap_at(0.5);
        assert_relative_eq!(g2, 2.0 * g1, epsilon = 1e-10);
        assert_relative_eq!(g05, 0.5 * g1, epsilon = 1e-10);
    }

    #[test]
    fn coupling_young_bound_and_lower_bound() {
        let grid = TorusGrid::new(1.0, 16).unwrap();
        let spec = FinslerSpec::Quadratic {
            metric: MetricField::constant(1.0, SymMat2::new(1.8, 0.3, 1.1)),
        };
        let u = ControlField::constant(1.0, Vec2::new(0.5, -0.4));
        let params = EnergyParams::new(0.15, 1.0, spec.clone(), u.clone()).unwrap();
        let model = EnergyModel::compile(grid, params).unwrap();
        let lam_max = max_metric_eigenvalue(&spec, grid);
        let area = model.area();
        let sup_u = sup_u_on_grid(&u, grid);
        for seed in 20..30 {
            let st = random_state(grid, seed, 0.5);
            let e = model.energy(&st).unwrap();
            let k = 2.0 * e.kinetic; // sum F*^2 w
            let p_max = st.psi.iter().fold(0.0f64, |m, p| m.max(p.norm()));
            let c = lam_max * p_max * p_max;
            assert!(
                e.coupling.abs() <= k / 4.0 + c * sup_u * sup_u * area + 1e-12,
                "Young bound violated: |coupling| {:.4} vs {:.4}",
                e.coupling.abs(),
                k / 4.0 + c * sup_u * sup_u * area
            );
            assert!(
                e.total >= -c * sup_u * sup_u * area,
                "lower bound violated: {:.4}",
                e.total
            );
        }
    }

    #[test]
    fn resolution_guard_flags_small_eps() {
        let grid = TorusGrid::new(1.0, 16).unwrap();
        let model = simple_model(grid, grid.spacing() / 4.0, 1.0, ControlField::zero(1.0));
        assert!(model.resolution_warning());
        let model = simple_model(grid, 3.0 * grid.spacing(), 1.0, ControlField::zero(1.0));
        assert!(!model.resolution_warning());
    }
}
