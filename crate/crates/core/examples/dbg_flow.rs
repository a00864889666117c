use vortexctl_core::dynamics::*;
use vortexctl_core::green::*;
use vortexctl_core::grid::*;
use vortexctl_core::algebra::{Point, SymMat2};

fn main() {
    let grid = TorusGrid::new(1.0, 32).unwrap();
    let t = GreenTable::solve_constant(grid, SymMat2::IDENTITY, 1.0, EvalMode::Spectral).unwrap();
    let cfg = VortexConfig::new(1.0, vec![(Point::new(0.4, 0.5), 1), (Point::new(0.6, 0.5), -1)]).unwrap();
    let g = grad_w(&t, &cfg).unwrap();
    println!("initial grad: ({:+.4},{:+.4}) ({:+.4},{:+.4})", g[0].x, g[0].y, g[1].x, g[1].y);
    let traj = gradient_flow(&t, &cfg, 1e-3, 0.2, None).unwrap();
    println!("samples {} collision {} t_end {:.4}", traj.times.len(), traj.collision_stop, traj.times.last().unwrap());
    for k in (0..traj.times.len()).step_by((traj.times.len()/12).max(1)) {
        let c = &traj.configs[k];
        println!("t={:.4} a+=({:.4},{:.4}) a-=({:.4},{:.4}) W={:+.4}",
            traj.times[k], c.vortices[0].0.x, c.vortices[0].0.y, c.vortices[1].0.x, c.vortices[1].0.y, traj.energies[k]);
    }
}
