use vortexctl_core::green::*;
use vortexctl_core::grid::*;
use vortexctl_core::algebra::{Point, SymMat2};

fn main() {
    let x = Point::new(0.5, 0.5);
    for b in [SymMat2::IDENTITY, SymMat2::diag(2.0, 0.5)] {
        println!("b = diag({}, {}):", b.a11, b.a22);
        let mut prev = None;
        for n in [64usize, 128, 256, 512] {
            let grid = TorusGrid::new(1.0, n).unwrap();
            let t = GreenTable::solve_constant(grid, b, 1.0, EvalMode::Bilinear).unwrap();
            let s = t.robin_part(x).unwrap();
            let d = prev.map(|p: f64| s - p);
            println!("  N={n:4}: S = {s:+.8}  diff from prev: {:?}", d.map(|v| format!("{v:+.2e}")));
            prev = Some(s);
        }
    }
}
