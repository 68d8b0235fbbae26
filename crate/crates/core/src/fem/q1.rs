//! Bilinear reference element on [0,1]² and its 2×2 Gauss rule.

const G: f64 = 0.211_324_865_405_187_1; // (1 - 1/sqrt(3)) / 2

/// Gauss points in local coordinates, each with weight 1/4.
pub const GAUSS_POINTS: [[f64; 2]; 4] = [[G, G], [1.0 - G, G], [1.0 - G, 1.0 - G], [G, 1.0 - G]];
pub const GAUSS_WEIGHT: f64 = 0.25;

/// Shape function values at local point `(xi, eta)`.
#[inline]
pub fn shape(p: [f64; 2]) -> [f64; 4] {
    let [x, y] = p;
    [(1.0 - x) * (1.0 - y), x * (1.0 - y), x * y, (1.0 - x) * y]
}

/// Shape function gradients in physical units on an element of side `h`.
#[inline]
pub fn shape_grad(p: [f64; 2], h: f64) -> [[f64; 2]; 4] {
    let [x, y] = p;
    let s = 1.0 / h;
    [
        [-(1.0 - y) * s, -(1.0 - x) * s],
        [(1.0 - y) * s, -x * s],
        [y * s, x * s],
        [-y * s, (1.0 - x) * s],
    ]
}

/// Value of the bilinear interpolant of `v` at local point `p`.
#[inline]
pub fn interpolate(v: [f64; 4], p: [f64; 2]) -> f64 {
    let n = shape(p);
    n[0] * v[0] + n[1] * v[1] + n[2] * v[2] + n[3] * v[3]
}

/// Gradient of the bilinear interpolant of `v` at local point `p`.
#[inline]
pub fn gradient(v: [f64; 4], p: [f64; 2], h: f64) -> [f64; 2] {
    let [x, y] = p;
    [
        ((v[1] - v[0]) * (1.0 - y) + (v[2] - v[3]) * y) / h,
        ((v[3] - v[0]) * (1.0 - x) + (v[2] - v[1]) * x) / h,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_exact_gradient() {
        for p in GAUSS_POINTS {
            let s: f64 = shape(p).iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
            let g = shape_grad(p, 0.5);
            let gx: f64 = g.iter().map(|d| d[0]).sum();
            assert!(gx.abs() < 1e-14);
        }
        // v = 2x + 3y on an element of side h = 0.5 at origin
        let h = 0.5;
        let v = [0.0, 2.0 * h, 2.0 * h + 3.0 * h, 3.0 * h];
        let g = gradient(v, [0.3, 0.7], h);
        assert!((g[0] - 2.0).abs() < 1e-14 && (g[1] - 3.0).abs() < 1e-14);
    }
}
