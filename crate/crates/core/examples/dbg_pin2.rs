use vortexctl_core::energy::*;
use vortexctl_core::grid::*;
use vortexctl_core::control::{ControlField, rotated_gradient_mode};
use vortexctl_core::finsler::FinslerSpec;
use vortexctl_core::algebra::Point;

fn pinning(l: f64, amp: f64) -> ControlField {
    ControlField::Fourier { l, modes: vec![
        rotated_gradient_mode(l, [2, -1], amp / 2.0, 0.0),
        rotated_gradient_mode(l, [2, 1], -amp / 2.0, 0.0),
    ]}
}

fn main() {
    let n = 64usize;
    let eps = 0.05;
    for amp in [0.5f64, -0.5] {
        let grid = TorusGrid::new(1.0, n).unwrap();
        let cfg = VortexConfig::new(1.0, vec![
            (Point::new(0.125, 0.25), 1),
            (Point::new(0.125, 0.75), -1),
        ]).unwrap();
        let mut st = seed_vortices(grid, &cfg, eps).unwrap();
        let u = pinning(1.0, amp);
        let params = EnergyParams::new(eps, 0.1, FinslerSpec::euclidean(1.0), u).unwrap();
        let model = EnergyModel::compile(grid, params).unwrap();
        println!("=== amp {amp}");
        for round in 0..6 {
            let (out, tr) = minimize(&st, &model, MinimizeOpts { max_iters: 500, grad_tol: 1e-8, trace_every: 500, ..Default::default() }).unwrap();
            let found = extract_vortices(&out, 0.5);
            let pos: Vec<String> = found.vortices.iter().map(|(p,d)| format!("({:.3},{:.3})d{}", p.x, p.y, d)).collect();
            println!("after {} iters: E={:.6} g={:.2e} vortices: {}", 500*(round+1), tr.final_energy, tr.final_grad_norm, pos.join(" "));
            st = out;
            if found.vortices.is_empty() { break; }
        }
    }
}
