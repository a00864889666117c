use vortexctl_core::energy::*;
use vortexctl_core::grid::*;
use vortexctl_core::control::{ControlField, rotated_gradient_mode};
use vortexctl_core::finsler::FinslerSpec;
use vortexctl_core::algebra::Point;
use std::time::Instant;

fn pinning(l: f64, amp: f64) -> ControlField {
    // u = rot-grad of g = amp * sin(4 pi x) sin(2 pi y)
    //   = rot-grad of amp/2 * [cos(2pi(2x - y)) - cos(2pi(2x + y))]
    ControlField::Fourier { l, modes: vec![
        rotated_gradient_mode(l, [2, -1], amp / 2.0, 0.0),
        rotated_gradient_mode(l, [2, 1], -amp / 2.0, 0.0),
    ]}
}

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let eps: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let amp: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let tol: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1e-6);
    let grid = TorusGrid::new(1.0, n).unwrap();
    // C1: + at (1/8, 1/4), - at (1/8, 3/4): separation (0, 1/2)
    let cfg = VortexConfig::new(1.0, vec![
        (Point::new(0.125, 0.25), 1),
        (Point::new(0.125, 0.75), -1),
    ]).unwrap();
    let st = seed_vortices(grid, &cfg, eps).unwrap();
    let u = pinning(1.0, amp);
    println!("max analytic div of u: {:.3e}, c1 bound {:.3}", u.max_divergence(32), u.c1_bound());
    let params = EnergyParams::new(eps, 0.1, FinslerSpec::euclidean(1.0), u).unwrap();
    let model = EnergyModel::compile(grid, params).unwrap();
    let t0 = Instant::now();
    let (out, tr) = minimize(&st, &model, MinimizeOpts { max_iters: 30000, grad_tol: tol, trace_every: 500, ..Default::default() }).unwrap();
    println!("converged={} iters={} E={:.8} gmax={:.3e} time {:?}", tr.converged, tr.iterations, tr.final_energy, tr.final_grad_norm, t0.elapsed());
    let found = extract_vortices(&out, 0.5);
    println!("vortices after: {:?}", found.vortices);
    println!("el residual {:.3e}", model.el_residual(&out).unwrap());
}
