//! Point-vortex dynamics driven by the renormalized energy: dissipative
//! gradient flow and conservative Hamiltonian flow, with conservation and
//! dissipation diagnostics.

use crate::algebra::{Point, Vec2};
use crate::control::ControlField;
use crate::error::{CoreError, Result};
use crate::green::{renormalized_energy, GreenTable};
use crate::grid::VortexConfig;

/// Which flow produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    GradientFlow,
    Hamiltonian,
}

/// Time samples of a vortex flow.
#[derive(Debug, Clone)]
pub struct VortexTrajectory {
    pub kind: FlowKind,
    pub times: Vec<f64>,
    pub configs: Vec<VortexConfig>,
    pub energies: Vec<f64>,
    /// Max relative drift of H = W along a Hamiltonian run (0 for gradient flow).
    pub h_drift: f64,
    /// True when the run was truncated by a vortex collision.
    pub collision_stop: bool,
}

impl VortexTrajectory {
    /// CSV rows: t, a_1x, a_1y, ..., W, H_drift.
    pub fn to_csv(&self) -> String {
        let nv = self
            .configs
            .first()
            .map(|c| c.vortices.len())
            .unwrap_or(0);
        let mut header = String::from("t");
        for i in 1..=nv {
            header.push_str(&format!(",a_{i}x,a_{i}y"));
        }
        header.push_str(",W,H_drift\n");
        let mut out = header;
        for (k, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{:.9e}", t));
            for (p, _) in &self.configs[k].vortices {
                out.push_str(&format!(",{:.12e},{:.12e}", p.x, p.y));
            }
            let drift = if k == 0 || self.energies[0] == 0.0 {
                0.0
            } else {
                ((self.energies[k] - self.energies[0]) / self.energies[0]).abs()
            };
            out.push_str(&format!(",{:.12e},{:.3e}\n", self.energies[k], drift));
        }
        out
    }

    pub fn final_config(&self) -> &VortexConfig {
        self.configs.last().expect("trajectory has no samples")
    }
}

/// Gradient of W with respect to every vortex position.
pub fn grad_w(table: &GreenTable, config: &VortexConfig) -> Result<Vec<Vec2>> {
    let nv = config.vortices.len();
    for i in 0..nv {
        for j in (i + 1)..nv {
            if config.vortices[i]
                .0
                .torus_distance(config.vortices[j].0, config.l)
                == 0.0
            {
                return Err(CoreError::SingularConfiguration(i, j));
            }
        }
    }
    let mut g = table.harmonic_grad(config);
    for (i, (pi, di)) in config.vortices.iter().enumerate() {
        // Pair term (both kernel slots).
        for (j, (pj, dj)) in config.vortices.iter().enumerate() {
            if i == j {
                continue;
            }
            let dd = (*di as f64) * (*dj as f64);
            g[i] = g[i]
                + (table.kernel_grad_x(*pi, *pj) + table.kernel_grad_y(*pj, *pi)) * (0.5 * dd);
        }
        // Self term: d_i grad Phi = d_i (1/2 grad S + grad h). S is constant
        // for invariant kernels; for per-source tables it is differentiated
        // by centered differences at step h.
        g[i] = g[i] + table.phi_grad(*pi)? * (*di as f64);
    }
    Ok(g)
}

fn min_pair_distance(config: &VortexConfig) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..config.vortices.len() {
        for j in (i + 1)..config.vortices.len() {
            m = m.min(
                config.vortices[i]
                    .0
                    .torus_distance(config.vortices[j].0, config.l),
            );
        }
    }
    m
}

fn advance(config: &VortexConfig, vel: &[Vec2], dt: f64) -> VortexConfig {
    VortexConfig {
        l: config.l,
        vortices: config
            .vortices
            .iter()
            .zip(vel.iter())
            .map(|((p, d), v)| (Point::new(p.x + v.x * dt, p.y + v.y * dt).wrap(config.l), *d))
            .collect(),
    }
}

fn rk4_step(
    table: &GreenTable,
    config: &VortexConfig,
    dt: f64,
    field: &impl Fn(&GreenTable, &VortexConfig) -> Result<Vec<Vec2>>,
) -> Result<VortexConfig> {
    let k1 = field(table, config)?;
    let c2 = advance(config, &k1, 0.5 * dt);
    let k2 = field(table, &c2)?;
    let c3 = advance(config, &k2, 0.5 * dt);
    let k3 = field(table, &c3)?;
    let c4 = advance(config, &k3, dt);
    let k4 = field(table, &c4)?;
    let combined: Vec<Vec2> = (0..k1.len())
        .map(|i| (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (1.0 / 6.0))
        .collect();
    Ok(advance(config, &combined, dt))
}

/// Dissipative flow da_i/dt = -grad_i W + drift(i, a_i), integrated by
/// adaptive RK4 (step halving on a step-doubling error estimate > 1e-8).
/// The drift hook defaults to zero; it stands in for the control-induced
/// transport term whose tangent field the model leaves unspecified.
pub fn gradient_flow(
    table: &GreenTable,
    config0: &VortexConfig,
    dt: f64,
    t_end: f64,
    drift: Option<&dyn Fn(usize, Point) -> Vec2>,
) -> Result<VortexTrajectory> {
    if dt <= 0.0 {
        return Err(CoreError::PreconditionViolated("dt must be positive".into()));
    }
    let cutoff = 2.0 * table.grid.spacing();
    let field = |tb: &GreenTable, c: &VortexConfig| -> Result<Vec<Vec2>> {
        let g = grad_w(tb, c)?;
        Ok(c.vortices
            .iter()
            .enumerate()
            .map(|(i, (p, _))| {
                let mut v = -g[i];
                if let Some(d) = drift {
                    v = v + d(i, *p);
                }
                v
            })
            .collect())
    };

    let mut t = 0.0;
    let mut step = dt;
    let mut config = config0.clone();
    let mut times = vec![0.0];
    let mut configs = vec![config.clone()];
    let mut energies = vec![renormalized_energy(table, &config)?.total];
    let mut collision = false;

    while t < t_end - 1e-15 {
        if min_pair_distance(&config) < cutoff {
            collision = true;
            break;
        }
        let step_now = step.min(t_end - t);
        // Step-doubling error control.
        let full = rk4_step(table, &config, step_now, &field)?;
        let half = rk4_step(table, &config, 0.5 * step_now, &field)?;
        let half2 = rk4_step(table, &half, 0.5 * step_now, &field)?;
        let err = full
            .vortices
            .iter()
            .zip(half2.vortices.iter())
            .map(|((p1, _), (p2, _))| p1.torus_distance(*p2, config.l))
            .fold(0.0f64, f64::max);
        if err > 1e-8 && step_now > 1e-12 {
            step = 0.5 * step_now;
            continue;
        }
        config = half2;
        t += step_now;
        if err < 1e-10 {
            step = (step_now * 2.0).min(dt);
        }
        times.push(t);
        configs.push(config.clone());
        energies.push(renormalized_energy(table, &config)?.total);
    }

    Ok(VortexTrajectory {
        kind: FlowKind::GradientFlow,
        times,
        configs,
        energies,
        h_drift: 0.0,
        collision_stop: collision,
    })
}

/// Flow to stationarity: run the gradient flow in chunks until
/// max_i |grad_i W| <= tol or the step budget runs out. Returns the relaxed
/// configuration, the residual, and the collision flag.
pub fn relax_to_stationarity(
    table: &GreenTable,
    config0: &VortexConfig,
    tol: f64,
    max_chunks: usize,
) -> Result<(VortexConfig, f64, bool)> {
    let mut config = config0.clone();
    let mut residual = grad_norm(table, &config)?;
    if residual <= tol {
        return Ok((config, residual, false));
    }
    // Characteristic time from the first gradient; the flow contracts near a
    // nondegenerate minimum, so chunked integration converges linearly.
    for _ in 0..max_chunks {
        let scale = residual.max(1e-6);
        let t_chunk = (0.5 / scale).clamp(1e-4, 50.0);
        let traj = gradient_flow(table, &config, t_chunk / 50.0, t_chunk, None)?;
        let collided = traj.collision_stop;
        config = traj.final_config().clone();
        residual = grad_norm(table, &config)?;
        if collided {
            return Ok((config, residual, true));
        }
        if residual <= tol {
            return Ok((config, residual, false));
        }
    }
    Ok((config, residual, false))
}

fn grad_norm(table: &GreenTable, config: &VortexConfig) -> Result<f64> {
    Ok(grad_w(table, config)?
        .iter()
        .fold(0.0f64, |m, g| m.max(g.norm())))
}

/// Conservative flow da_i/dt = J grad_i W with the standard symplectic J,
/// classical RK4 at fixed step. Requires an (analytically) divergence-free,
/// time-independent control on the table; reports the max relative drift of
/// H = W over the run.
pub fn hamiltonian_flow(
    table: &GreenTable,
    u: &ControlField,
    config0: &VortexConfig,
    dt: f64,
    t_end: f64,
) -> Result<VortexTrajectory> {
    let div = u.max_divergence(32);
    if div > 1e-10 {
        return Err(CoreError::PreconditionViolated(format!(
            "hamiltonian flow needs a divergence-free control: max |div u| = {div:.3e}"
        )));
    }
    if dt <= 0.0 {
        return Err(CoreError::PreconditionViolated("dt must be positive".into()));
    }
    let field = |tb: &GreenTable, c: &VortexConfig| -> Result<Vec<Vec2>> {
        let g = grad_w(tb, c)?;
        Ok(g.iter().map(|gi| gi.rot90()).collect())
    };
    let cutoff = 2.0 * table.grid.spacing();
    let steps = (t_end / dt).round() as usize;
    let mut config = config0.clone();
    let mut times = vec![0.0];
    let mut configs = vec![config.clone()];
    let h0 = renormalized_energy(table, &config)?.total;
    let mut energies = vec![h0];
    let mut drift: f64 = 0.0;
    let mut collision = false;
    for k in 0..steps {
        if min_pair_distance(&config) < cutoff {
            collision = true;
            break;
        }
        config = rk4_step(table, &config, dt, &field)?;
        let h = renormalized_energy(table, &config)?.total;
        if h0 != 0.0 {
            drift = drift.max(((h - h0) / h0).abs());
        }
        times.push((k + 1) as f64 * dt);
        configs.push(config.clone());
        energies.push(h);
    }
    Ok(VortexTrajectory {
        kind: FlowKind::Hamiltonian,
        times,
        configs,
        energies,
        h_drift: drift,
        collision_stop: collision,
    })
}

/// Reverse-time Hamiltonian integration (t -> -t, J -> -J): running it from
/// the endpoint of a forward run retraces the trajectory.
pub fn hamiltonian_flow_reversed(
    table: &GreenTable,
    u: &ControlField,
    config0: &VortexConfig,
    dt: f64,
    t_end: f64,
) -> Result<VortexTrajectory> {
    let div = u.max_divergence(32);
    if div > 1e-10 {
        return Err(CoreError::PreconditionViolated(format!(
            "hamiltonian flow needs a divergence-free control: max |div u| = {div:.3e}"
        )));
    }
    let field = |tb: &GreenTable, c: &VortexConfig| -> Result<Vec<Vec2>> {
        let g = grad_w(tb, c)?;
        Ok(g.iter().map(|gi| -gi.rot90()).collect())
    };
    let steps = (t_end / dt).round() as usize;
    let mut config = config0.clone();
    let mut times = vec![0.0];
    let mut configs = vec![config.clone()];
    let mut energies = vec![renormalized_energy(table, &config)?.total];
    for k in 0..steps {
        config = rk4_step(table, &config, dt, &field)?;
        times.push((k + 1) as f64 * dt);
        configs.push(config.clone());
        energies.push(renormalized_energy(table, &config)?.total);
    }
    Ok(VortexTrajectory {
        kind: FlowKind::Hamiltonian,
        times,
        configs,
        energies,
        h_drift: 0.0,
        collision_stop: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::SymMat2;
    use crate::control::rotated_gradient_mode;
    use crate::green::EvalMode;
    use crate::grid::TorusGrid;
    use approx::assert_relative_eq;

    fn table(l: f64, n: usize, mode: EvalMode) -> GreenTable {
        let grid = TorusGrid::new(l, n).unwrap();
        GreenTable::solve_constant(grid, SymMat2::IDENTITY, 1.0, mode).unwrap()
    }

    fn pair(l: f64, a: Point, b: Point) -> VortexConfig {
        VortexConfig::new(l, vec![(a, 1), (b, -1)]).unwrap()
    }

    #[test]
    fn grad_w_matches_fd_of_renormalized_energy() {
        let t = table(1.0, 64, EvalMode::Spectral);
        let cfg = pair(1.0, Point::new(0.31, 0.42), Point::new(0.63, 0.27));
        let g = grad_w(&t, &cfg).unwrap();
        let fd_step = 1e-4;
        for i in 0..2 {
            for dir in 0..2 {
                let mut cp = cfg.clone();
                let mut cm = cfg.clone();
                if dir == 0 {
                    cp.vortices[i].0.x += fd_step;
                    cm.vortices[i].0.x -= fd_step;
                } else {
                    cp.vortices[i].0.y += fd_step;
                    cm.vortices[i].0.y -= fd_step;
                }
                let fd = (renormalized_energy(&t, &cp).unwrap().total
                    - renormalized_energy(&t, &cm).unwrap().total)
                    / (2.0 * fd_step);
                let an = if dir == 0 { g[i].x } else { g[i].y };
                assert!(
                    (fd - an).abs() <= 1e-4 * (1.0 + fd.abs()),
                    "vortex {i} dir {dir}: fd {fd:.6} vs analytic {an:.6}"
                );
            }
        }
    }

    #[test]
    fn grad_w_fd_consistency_bilinear_mode() {
        // In bilinear mode the gradient is the exact in-cell derivative of the
        // interpolant, so a small-step FD of W matches to near roundoff.
        let t = table(1.0, 32, EvalMode::Bilinear);
        let cfg = pair(1.0, Point::new(0.302, 0.417), Point::new(0.641, 0.283));
        let g = grad_w(&t, &cfg).unwrap();
        let fd_step = 1e-4; // well inside one cell of h = 1/32
        for i in 0..2 {
            let mut cp = cfg.clone();
            let mut cm = cfg.clone();
            cp.vortices[i].0.x += fd_step;
            cm.vortices[i].0.x -= fd_step;
            let fd = (renormalized_energy(&t, &cp).unwrap().total
                - renormalized_energy(&t, &cm).unwrap().total)
                / (2.0 * fd_step);
            assert!(
                (fd - g[i].x).abs() <= 1e-6 * (1.0 + fd.abs()),
                "bilinear in-cell gradient mismatch: {fd} vs {}",
                g[i].x
            );
        }
    }

    #[test]
    fn grad_w_permutation_equivariant() {
        let t = table(1.0, 32, EvalMode::Spectral);
        let cfg = pair(1.0, Point::new(0.3, 0.4), Point::new(0.7, 0.6));
        let swapped = VortexConfig {
            l: 1.0,
            vortices: vec![cfg.vortices[1], cfg.vortices[0]],
        };
        let g1 = grad_w(&t, &cfg).unwrap();
        let g2 = grad_w(&t, &swapped).unwrap();
        assert_relative_eq!(g1[0].x, g2[1].x, epsilon = 1e-12);
        assert_relative_eq!(g1[1].y, g2[0].y, epsilon = 1e-12);
    }

    #[test]
    fn gradient_flow_dissipates_and_collides() {
        // Unpinned opposite pair attracts; W decreases monotonically until
        // the collision cutoff truncates the run.
        let t = table(1.0, 32, EvalMode::Spectral);
        let cfg = pair(1.0, Point::new(0.4, 0.5), Point::new(0.6, 0.5));
        let traj = gradient_flow(&t, &cfg, 1e-3, 10.0, None).unwrap();
        assert!(traj.collision_stop, "pair should reach the collision cutoff");
        for w in traj.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "dissipation violated: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn hamiltonian_requires_divergence_free_control() {
        let t = table(1.0, 32, EvalMode::Spectral);
        let cfg = pair(1.0, Point::new(0.3, 0.5), Point::new(0.7, 0.5));
        let bad = ControlField::Fourier {
            l: 1.0,
            modes: vec![crate::control::gradient_mode(1.0, [1, 0], 0.1, 0.0)],
        };
        assert!(hamiltonian_flow(&t, &bad, &cfg, 1e-3, 0.01).is_err());
        let good = ControlField::Fourier {
            l: 1.0,
            modes: vec![rotated_gradient_mode(1.0, [1, 0], 0.1, 0.0)],
        };
        assert!(hamiltonian_flow(&t, &good, &cfg, 1e-3, 0.01).is_ok());
    }

    #[test]
    fn hamiltonian_conserves_and_reverses() {
        let l = 50.0;
        let grid = TorusGrid::new(l, 64).unwrap();
        let t = GreenTable::solve_constant(grid, SymMat2::IDENTITY, 1.0, EvalMode::Spectral)
            .unwrap();
        let cfg = pair(l, Point::new(24.5, 25.0), Point::new(25.5, 25.0));
        let u0 = ControlField::zero(l);
        let traj = hamiltonian_flow(&t, &u0, &cfg, 1e-3, 0.5).unwrap();
        assert!(!traj.collision_stop);
        assert!(traj.h_drift <= 1e-6, "H drift {:.3e}", traj.h_drift);

        // Time reversal: integrate backwards with J -> -J by flipping time.
        let back = hamiltonian_flow_reversed(&t, &u0, traj.final_config(), 1e-3, 0.5).unwrap();
        let start = &cfg.vortices;
        let recovered = &back.final_config().vortices;
        for (s, r) in start.iter().zip(recovered.iter()) {
            assert!(
                s.0.torus_distance(r.0, l) <= 1e-6,
                "time reversal error {:.3e}",
                s.0.torus_distance(r.0, l)
            );
        }
    }
}
