use vortexctl_core::green::*;
use vortexctl_core::grid::*;
use vortexctl_core::algebra::{Point, SymMat2};

fn main() {
    // Continuum kernel vs lattice kernel at moderate offsets (isotropic).
    let grid = TorusGrid::new(1.0, 256).unwrap();
    let tb = GreenTable::solve_constant(grid, SymMat2::IDENTITY, 1.0, EvalMode::Bilinear).unwrap();
    let ts = GreenTable::solve_constant(grid, SymMat2::IDENTITY, 1.0, EvalMode::Spectral).unwrap();
    let x = Point::new(0.0, 0.0);
    println!("offset   lattice      continuum    diff");
    for (ox, oy) in [(0.5, 0.5), (0.5, 0.0), (0.25, 0.25), (0.25, 0.0), (0.1, 0.05), (0.03, 0.02)] {
        let y = Point::new(ox, oy);
        let vl = tb.kernel_value(x, y);
        let vc = ts.kernel_value(x, y);
        println!("({:.2},{:.2})  {:+.6}  {:+.6}  {:+.2e}", ox, oy, vl, vc, vl - vc);
    }
    // gradient vs FD of the continuum value
    let y = Point::new(0.27, 0.13);
    let g = ts.kernel_grad_x(x, y);
    let h = 1e-6;
    let fdx = (ts.kernel_value(Point::new(x.x + h, x.y), y) - ts.kernel_value(Point::new(x.x - h, x.y), y)) / (2.0*h);
    let fdy = (ts.kernel_value(Point::new(x.x, x.y + h), y) - ts.kernel_value(Point::new(x.x, x.y - h), y)) / (2.0*h);
    println!("grad_x analytic ({:+.6},{:+.6}) fd ({:+.6},{:+.6})", g.x, g.y, fdx, fdy);
    let gy = ts.kernel_grad_y(x, y);
    let fdx = (ts.kernel_value(x, Point::new(y.x + h, y.y)) - ts.kernel_value(x, Point::new(y.x - h, y.y))) / (2.0*h);
    let fdy = (ts.kernel_value(x, Point::new(y.x, y.y + h)) - ts.kernel_value(x, Point::new(y.x, y.y - h))) / (2.0*h);
    println!("grad_y analytic ({:+.6},{:+.6}) fd ({:+.6},{:+.6})", gy.x, gy.y, fdx, fdy);
    // anisotropic diag check vs lattice
    let b = SymMat2::diag(2.0, 0.5);
    let tb2 = GreenTable::solve_constant(grid, b, 1.0, EvalMode::Bilinear).unwrap();
    let ts2 = GreenTable::solve_constant(grid, b, 1.0, EvalMode::Spectral).unwrap();
    println!("anisotropic:");
    for (ox, oy) in [(0.5, 0.5), (0.25, 0.0), (0.0, 0.25), (0.15, 0.2)] {
        let y = Point::new(ox, oy);
        println!("({:.2},{:.2})  {:+.6}  {:+.6}  {:+.2e}", ox, oy, tb2.kernel_value(x, y), ts2.kernel_value(x, y), tb2.kernel_value(x, y) - ts2.kernel_value(x, y));
    }
    // robin: lattice-extrapolated vs continuum closed form
    println!("robin lattice {:+.6} continuum {:+.6}", tb.robin_part(x).unwrap(), ts.robin_part(x).unwrap());
    println!("robin aniso lattice {:+.6} continuum {:+.6}", tb2.robin_part(x).unwrap(), ts2.robin_part(x).unwrap());
}
