use vortexctl_core::dynamics::*;
use vortexctl_core::green::*;
use vortexctl_core::grid::*;
use vortexctl_core::algebra::{Point, SymMat2};

fn main() {
    let grid = TorusGrid::new(1.0, 32).unwrap();
    let t = GreenTable::solve_constant(grid, SymMat2::IDENTITY, 1.0, EvalMode::Spectral).unwrap();
    for (px, py, qx, qy) in [
        (0.4, 0.5, 0.6, 0.5),
        (0.4024, 0.5003, 0.5976, 0.4997),
        (0.41, 0.5003, 0.59, 0.4997),
        (0.45, 0.5003, 0.55, 0.4997),
    ] {
        let cfg = VortexConfig::new(1.0, vec![(Point::new(px, py), 1), (Point::new(qx, qy), -1)]).unwrap();
        let g = grad_w(&t, &cfg).unwrap();
        let w = renormalized_energy(&t, &cfg).unwrap();
        println!("a+=({px},{py}): grad+=({:+.4},{:+.4}) grad-=({:+.4},{:+.4}) W={:+.5} (pair {:+.4} harm {:+.4})",
            g[0].x, g[0].y, g[1].x, g[1].y, w.total, w.pair_term, w.harmonic_term);
    }
}
