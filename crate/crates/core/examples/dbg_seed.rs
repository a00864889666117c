use vortexctl_core::grid::*;
use vortexctl_core::algebra::Point;

fn main() {
    let g = TorusGrid::new(1.0, 64).unwrap();
    let cfg = VortexConfig::new(
        1.0,
        vec![(Point::new(0.25, 0.5), 1), (Point::new(0.75, 0.5), -1)],
    )
    .unwrap();
    let st = seed_vortices(g, &cfg, 0.04).unwrap();
    let w = vorticity(&st);
    let total: f64 = w.iter().sum();
    println!("total winding {total:.3e}");
    let mut big: Vec<(usize, usize, f64)> = vec![];
    for iy in 0..64 {
        for ix in 0..64 {
            let v = w[g.index(ix, iy)];
            if v.abs() > 0.1 {
                big.push((ix, iy, v));
            }
        }
    }
    println!("plaquettes with |w|>0.1: {big:?}");
    let found = extract_vortices(&st, 0.5);
    println!("extracted: {:?}", found.vortices);
}
