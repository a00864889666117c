use vortexctl_core::control::{ControlField, rotated_gradient_mode};
use vortexctl_core::algebra::{Point, Vec2};

fn main() {
    // g = sin(4 pi x) sin(2 pi y) = 1/2 cos(2pi(2x-y)) - 1/2 cos(2pi(2x+y))
    let l = 1.0;
    let u = ControlField::Fourier { l, modes: vec![
        rotated_gradient_mode(l, [2, -1], 0.5, 0.0),
        rotated_gradient_mode(l, [2, 1], -0.5, 0.0),
    ]};
    let g = |x: f64, y: f64| (4.0*std::f64::consts::PI*x).sin() * (2.0*std::f64::consts::PI*y).sin();
    let h = 1e-6;
    for (x, y) in [(0.1, 0.2), (0.4, 0.7), (0.8, 0.33)] {
        let gx = (g(x+h, y) - g(x-h, y)) / (2.0*h);
        let gy = (g(x, y+h) - g(x, y-h)) / (2.0*h);
        let rg = Vec2::new(-gy, gx); // rot90(grad g)
        let uv = u.eval(Point::new(x, y));
        println!("at ({x},{y}): u=({:+.6},{:+.6}) rot-grad g=({:+.6},{:+.6})", uv.x, uv.y, rg.x, rg.y);
    }
}
