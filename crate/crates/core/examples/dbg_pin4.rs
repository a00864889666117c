use vortexctl_core::energy::*;
use vortexctl_core::grid::*;
use vortexctl_core::control::{ControlField, rotated_gradient_mode};
use vortexctl_core::finsler::FinslerSpec;
use vortexctl_core::algebra::Point;
use std::time::Instant;

fn main() {
    // corner pair + at (1/4,1/4), - at (3/4,3/4), pinned by
    // u = rot-grad of g = A [sin(2 pi x) + sin(2 pi y)]
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let eps: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let amp: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.4);
    let grid = TorusGrid::new(1.0, n).unwrap();
    let cfg = VortexConfig::new(1.0, vec![
        (Point::new(0.25, 0.25), 1),
        (Point::new(0.75, 0.75), -1),
    ]).unwrap();
    let st = seed_vortices(grid, &cfg, eps).unwrap();
    let u = ControlField::Fourier { l: 1.0, modes: vec![
        rotated_gradient_mode(1.0, [1, 0], 0.0, amp),
        rotated_gradient_mode(1.0, [0, 1], 0.0, amp),
    ]};
    println!("sup|u| ~ {:.2}, div {:.1e}", u.sup_norm(64), u.max_divergence(16));
    let params = EnergyParams::new(eps, 0.1, FinslerSpec::euclidean(1.0), u).unwrap();
    let model = EnergyModel::compile(grid, params).unwrap();
    let t0 = Instant::now();
    let mut st2 = st;
    for round in 0..8 {
        let (out, tr) = minimize(&st2, &model, MinimizeOpts { max_iters: 1000, grad_tol: 1e-6, trace_every: 1000, ..Default::default() }).unwrap();
        let found = extract_vortices(&out, 0.5);
        let pos: Vec<String> = found.vortices.iter().map(|(p,d)| format!("({:.3},{:.3})d{}", p.x, p.y, d)).collect();
        println!("it {:5} E={:+.6} g={:.2e} v: {} [{:?}]", 1000*(round+1), tr.final_energy, tr.final_grad_norm, pos.join(" "), t0.elapsed());
        st2 = out;
        if tr.converged { println!("CONVERGED"); break; }
        if found.vortices.is_empty() { println!("LOST VORTICES"); break; }
    }
    println!("el_residual {:.2e}", model.el_residual(&st2).unwrap());
}
