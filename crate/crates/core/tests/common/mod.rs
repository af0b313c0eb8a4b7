#![allow(dead_code)]

use dashu_ratio::RBig;
use vopskit::moments::{Moments, WeightSpec};
use vopskit::Backend;

pub fn r(n: i64, d: i64) -> RBig {
    RBig::from_parts_signed(n.into(), d.into())
}

pub fn float50() -> Backend {
    Backend::float(50).unwrap()
}

pub fn rectangle_spec() -> WeightSpec {
    WeightSpec::ProductChebyshev { a: r(1, 4), b: r(4, 1), c: r(4, 9), d: r(9, 1) }
}

pub fn triangle_spec() -> WeightSpec {
    WeightSpec::TriangleKoornwinder {
        alpha: 1,
        beta: 2,
        gamma: 1,
        a: r(1, 1),
        b: r(2, 1),
        c: r(3, 1),
        d: r(5, 1),
        tau: r(45, 2),
    }
}

pub fn simplex_spec() -> WeightSpec {
    WeightSpec::ShiftedSimplex { alpha: 3, beta: 2, gamma: 1, a: r(1, 1), b: r(2, 1) }
}

pub const WINDOW: i32 = 12;

pub fn rectangle() -> Moments {
    Moments::new(rectangle_spec(), Backend::Exact, WINDOW).unwrap()
}

pub fn triangle() -> Moments {
    Moments::new(triangle_spec(), float50(), WINDOW).unwrap()
}

pub fn simplex() -> Moments {
    Moments::new(simplex_spec(), float50(), WINDOW).unwrap()
}
