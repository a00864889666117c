use vortexctl_core::energy::*;
use vortexctl_core::grid::*;
use vortexctl_core::control::{ControlField, rotated_gradient_mode};
use vortexctl_core::finsler::FinslerSpec;
use vortexctl_core::algebra::Point;

fn main() {
    let n = 64usize;
    let eps = 0.05;
    let amp: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.4);
    let cap: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.25);
    let grid = TorusGrid::new(1.0, n).unwrap();
    let cfg = VortexConfig::new(1.0, vec![
        (Point::new(0.25, 0.25), 1),
        (Point::new(0.75, 0.75), -1),
    ]).unwrap();
    let mut st = seed_vortices(grid, &cfg, eps).unwrap();
    let u = ControlField::Fourier { l: 1.0, modes: vec![
        rotated_gradient_mode(1.0, [1, 0], 0.0, amp),
        rotated_gradient_mode(1.0, [0, 1], 0.0, amp),
    ]};
    let params = EnergyParams::new(eps, 0.1, FinslerSpec::euclidean(1.0), u).unwrap();
    let model = EnergyModel::compile(grid, params).unwrap();
    for round in 0..20 {
        let (out, tr) = minimize(&st, &model, MinimizeOpts { max_iters: 25, grad_tol: 1e-10, trace_every: 100, max_step: cap }).unwrap();
        let found = extract_vortices(&out, 0.4);
        let pos: Vec<String> = found.vortices.iter().map(|(p,d)| format!("({:.3},{:.3})d{}", p.x, p.y, d)).collect();
        println!("it {:4} E={:+.5} g={:.2e} v: {}", 25*(round+1), tr.final_energy, tr.final_grad_norm, pos.join(" "));
        st = out;
        if found.vortices.is_empty() { break; }
    }
}
