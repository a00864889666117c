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
    let amp: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let grid = TorusGrid::new(1.0, n).unwrap();
    let cfg = VortexConfig::new(1.0, vec![
        (Point::new(0.125, 0.25), 1),
        (Point::new(0.125, 0.75), -1),
    ]).unwrap();
    let mut st = seed_vortices(grid, &cfg, eps).unwrap();
    let u = pinning(1.0, amp);
    let params = EnergyParams::new(eps, 0.1, FinslerSpec::euclidean(1.0), u).unwrap();
    let model = EnergyModel::compile(grid, params).unwrap();
    for round in 0..16 {
        let (out, tr) = minimize(&st, &model, MinimizeOpts { max_iters: 25, grad_tol: 1e-10, trace_every: 100, ..Default::default() }).unwrap();
        let found = extract_vortices(&out, 0.4);
        let minpsi = out.psi.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
        let w = vorticity(&out);
        let wsum_abs: f64 = w.iter().filter(|v| v.is_finite()).map(|v| v.abs()).sum();
        let nan_ct = w.iter().filter(|v| !v.is_finite()).count();
        let pos: Vec<String> = found.vortices.iter().map(|(p,d)| format!("({:.3},{:.3})d{}", p.x, p.y, d)).collect();
        println!("it {:4} E={:+.5} g={:.2e} min|psi|={:.3} sum|w|={:.2} nan={} v: {}",
            25*(round+1), tr.final_energy, tr.final_grad_norm, minpsi, wsum_abs, nan_ct, pos.join(" "));
        st = out;
    }
}
