//! Middlebury color-wheel flow visualization.

use std::f64::consts::PI;

use super::{FlowField, Image};

// Bin counts per hue transition of the standard 55-bin wheel.
const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;
pub const WHEEL_BINS: usize = RY + YG + GC + CB + BM + MR;

/// The 55 RGB entries of the wheel, each component in `[0, 1]`.
pub fn color_wheel() -> Vec<[f64; 3]> {
    let mut wheel = Vec::with_capacity(WHEEL_BINS);
    let ramp = |i: usize, n: usize| i as f64 / n as f64;
    for i in 0..RY {
        wheel.push([1.0, ramp(i, RY), 0.0]);
    }
    for i in 0..YG {
        wheel.push([1.0 - ramp(i, YG), 1.0, 0.0]);
    }
    for i in 0..GC {
        wheel.push([0.0, 1.0, ramp(i, GC)]);
    }
    for i in 0..CB {
        wheel.push([0.0, 1.0 - ramp(i, CB), 1.0]);
    }
    for i in 0..BM {
        wheel.push([ramp(i, BM), 0.0, 1.0]);
    }
    for i in 0..MR {
        wheel.push([1.0, 0.0, 1.0 - ramp(i, MR)]);
    }
    wheel
}

/// Position of a flow vector on the wheel: angle in degrees in `[0, 360)`
/// measured from the `+u` axis, and saturation `|f| / max_magnitude`
/// clamped to 1.
pub fn wheel_coordinates(u: f64, v: f64, max_magnitude: f64) -> (f64, f64) {
    let angle = v.atan2(u).to_degrees().rem_euclid(360.0);
    let sat = if max_magnitude > 0.0 {
        ((u * u + v * v).sqrt() / max_magnitude).min(1.0)
    } else {
        0.0
    };
    (angle, sat)
}

/// RGB color of a single flow vector.
pub fn flow_color(wheel: &[[f64; 3]], u: f64, v: f64, max_magnitude: f64) -> [f64; 3] {
    let (_, sat) = wheel_coordinates(u, v, max_magnitude);
    // Middlebury convention: a = atan2(-v, -u) / pi, in [-1, 1].
    let a = (-v).atan2(-u) / PI;
    let n = wheel.len();
    let fk = (a + 1.0) / 2.0 * (n - 1) as f64;
    let k0 = (fk.floor() as usize).min(n - 1);
    let k1 = (k0 + 1) % n;
    let f = fk - k0 as f64;
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let col = (1.0 - f) * wheel[k0][c] + f * wheel[k1][c];
        *o = 1.0 - sat * (1.0 - col);
    }
    out
}

/// Renders a flow field with the Middlebury color coding. With
/// `max_magnitude = None` the largest valid magnitude is used. Invalid pixels
/// are black.
pub fn flow_to_color(flow: &FlowField, max_magnitude: Option<f64>) -> Image {
    let max_mag = max_magnitude.unwrap_or_else(|| {
        flow.iter_valid()
            .map(|(_, v)| v.norm())
            .fold(0.0f64, f64::max)
    });
    let wheel = color_wheel();
    let w = flow.width();
    Image::from_fn(flow.width(), flow.height(), 3, |x, y, c| {
        match flow.get_index(y * w + x) {
            Some(v) => flow_color(&wheel, v.x, v.y, max_mag)[c],
            None => 0.0,
        }
    })
}
