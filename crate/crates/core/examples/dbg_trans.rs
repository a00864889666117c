use vortexctl_core::energy::*;
use vortexctl_core::grid::*;
use vortexctl_core::control::ControlField;
use vortexctl_core::finsler::FinslerSpec;
use vortexctl_core::algebra::Point;

fn main() {
    let n = 128usize;
    let eps = 0.03;
    let grid = TorusGrid::new(1.0, n).unwrap();
    let params = EnergyParams::new(eps, 0.1, FinslerSpec::euclidean(1.0), ControlField::zero(1.0)).unwrap();
    let model = EnergyModel::compile(grid, params).unwrap();
    println!("-- fixed separation (1/2,1/2), translating center:");
    for p in [0.25, 0.22, 0.19, 0.16, 0.13] {
        let cfg = VortexConfig::new(1.0, vec![
            (Point::new(p, p), 1),
            (Point::new(p + 0.5, p + 0.5), -1),
        ]).unwrap();
        let st = seed_vortices(grid, &cfg, eps).unwrap();
        let e = model.energy(&st).unwrap();
        println!("p={:.2}: kinetic {:.5} potential {:.5}", p, e.kinetic, e.potential);
    }
    println!("-- fixed + at (1/4,1/4), - moving along diagonal:");
    for q in [0.75, 0.70, 0.65, 0.60, 0.55] {
        let cfg = VortexConfig::new(1.0, vec![
            (Point::new(0.25, 0.25), 1),
            (Point::new(q, q), -1),
        ]).unwrap();
        let st = seed_vortices(grid, &cfg, eps).unwrap();
        let e = model.energy(&st).unwrap();
        // Green prediction: kinetic ~ C + (2pi)^2 G_an(sep)
        println!("q={:.2} sep=({:.2},{:.2}): kinetic {:.5}", q, q-0.25, q-0.25, e.kinetic);
    }
}
