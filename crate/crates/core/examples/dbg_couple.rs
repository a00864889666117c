use vortexctl_core::energy::*;
use vortexctl_core::grid::*;
use vortexctl_core::control::{ControlField, rotated_gradient_mode};
use vortexctl_core::finsler::FinslerSpec;
use vortexctl_core::algebra::Point;

fn main() {
    let n = 128usize;
    let eps = 0.03;
    let amp = 0.4;
    let grid = TorusGrid::new(1.0, n).unwrap();
    let u = ControlField::Fourier { l: 1.0, modes: vec![
        rotated_gradient_mode(1.0, [1, 0], 0.0, amp),
        rotated_gradient_mode(1.0, [0, 1], 0.0, amp),
    ]};
    let params = EnergyParams::new(eps, 0.1, FinslerSpec::euclidean(1.0), u).unwrap();
    let model = EnergyModel::compile(grid, params).unwrap();
    println!("p      coupling   predicted(-8 pi A sin2pip + C)  kinetic   potential");
    for p in [0.25, 0.22, 0.19, 0.16, 0.13, 0.10] {
        let cfg = VortexConfig::new(1.0, vec![
            (Point::new(p, p), 1),
            (Point::new(1.0 - p, 1.0 - p), -1),
        ]).unwrap();
        let st = seed_vortices(grid, &cfg, eps).unwrap();
        let e = model.energy(&st).unwrap();
        let pred = -8.0 * std::f64::consts::PI * amp * (2.0 * std::f64::consts::PI * p).sin();
        println!("{:.2}  {:+.5}   {:+.5}   {:.4}  {:.4}", p, e.coupling, pred, e.kinetic, e.potential);
    }
}
