use vortexctl_core::energy::*;
use vortexctl_core::grid::*;
use vortexctl_core::control::ControlField;
use vortexctl_core::finsler::FinslerSpec;
use vortexctl_core::algebra::Point;
use std::time::Instant;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(128);
    let eps: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let tol: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(1e-6);
    let grid = TorusGrid::new(1.0, n).unwrap();
    let cfg = VortexConfig::new(1.0, vec![
        (Point::new(0.25, 0.25), 1),
        (Point::new(0.75, 0.75), -1),
    ]).unwrap();
    let st = seed_vortices(grid, &cfg, eps).unwrap();
    let params = EnergyParams::new(eps, 0.1, FinslerSpec::euclidean(1.0), ControlField::zero(1.0)).unwrap();
    let model = EnergyModel::compile(grid, params).unwrap();
    let t0 = Instant::now();
    let e0 = model.energy(&st).unwrap();
    println!("seeded energy {:.6} (kin {:.4} pot {:.4}) eval {:?}", e0.total, e0.kinetic, e0.potential, t0.elapsed());
    let t0 = Instant::now();
    let (out, tr) = minimize(&st, &model, MinimizeOpts { max_iters: 20000, grad_tol: tol, trace_every: 50, ..Default::default() }).unwrap();
    println!("converged={} iters={} E={:.8} gmax={:.3e} time {:?}", tr.converged, tr.iterations, tr.final_energy, tr.final_grad_norm, t0.elapsed());
    let found = extract_vortices(&out, 0.5);
    println!("vortices after: {:?}", found.vortices);
    let res = model.el_residual(&out).unwrap();
    println!("el residual {:.3e}", res);
}
