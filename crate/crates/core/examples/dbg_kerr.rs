use vortexctl_core::green::*;
use vortexctl_core::grid::*;
use vortexctl_core::algebra::{Point, SymMat2};

fn main() {
    let x = Point::new(0.0, 0.0);
    let g128 = TorusGrid::new(1.0, 128).unwrap();
    let g256 = TorusGrid::new(1.0, 256).unwrap();
    let t128 = GreenTable::solve_constant(g128, SymMat2::IDENTITY, 1.0, EvalMode::Bilinear).unwrap();
    let t256 = GreenTable::solve_constant(g256, SymMat2::IDENTITY, 1.0, EvalMode::Bilinear).unwrap();
    let tc = GreenTable::solve_constant(g256, SymMat2::IDENTITY, 1.0, EvalMode::Spectral).unwrap();
    println!("z(diag)      g128 - cont    g256 - cont    g128-g256");
    for zf in [1.0/32.0, 1.0/16.0, 1.0/8.0, 1.0/4.0] {
        let y = Point::new(zf, zf);
        let v128 = t128.kernel_value(x, y);
        let v256 = t256.kernel_value(x, y);
        let vc = tc.kernel_value(x, y);
        println!("{:.5}   {:+.3e}   {:+.3e}   {:+.3e}", zf, v128 - vc, v256 - vc, v128 - v256);
    }
}
