//! Small fixed-size vector helpers. Matrices are stored as three row
//! vectors, so `frac_to_cart(m, f) = f[0]*m[0] + f[1]*m[1] + f[2]*m[2]`.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn det(m: &Mat3) -> f64 {
    dot(m[0], cross(m[1], m[2]))
}

/// Inverse of a row-vector matrix, or `None` when singular.
pub fn inverse(m: &Mat3) -> Option<Mat3> {
    let d = det(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    // Columns of the inverse are the reciprocal vectors.
    let r0 = scale(cross(m[1], m[2]), 1.0 / d);
    let r1 = scale(cross(m[2], m[0]), 1.0 / d);
    let r2 = scale(cross(m[0], m[1]), 1.0 / d);
    Some([
        [r0[0], r1[0], r2[0]],
        [r0[1], r1[1], r2[1]],
        [r0[2], r1[2], r2[2]],
    ])
}

/// `f` expressed in the row basis `m`, mapped to Cartesian coordinates.
#[inline]
pub fn frac_to_cart(m: &Mat3, f: Vec3) -> Vec3 {
    [
        f[0] * m[0][0] + f[1] * m[1][0] + f[2] * m[2][0],
        f[0] * m[0][1] + f[1] * m[1][1] + f[2] * m[2][1],
        f[0] * m[0][2] + f[1] * m[1][2] + f[2] * m[2][2],
    ]
}

/// Inverse of [`frac_to_cart`] given the precomputed inverse matrix.
#[inline]
pub fn cart_to_frac(inv: &Mat3, p: Vec3) -> Vec3 {
    frac_to_cart(inv, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips_skewed_basis() {
        let m = [[2.0, 0.0, 0.0], [0.7, 1.5, 0.0], [0.3, -0.4, 3.0]];
        let inv = inverse(&m).unwrap();
        let f = [0.25, -1.5, 2.0];
        let back = cart_to_frac(&inv, frac_to_cart(&m, f));
        for k in 0..3 {
            assert!((back[k] - f[k]).abs() < 1e-12);
        }
        assert!(inverse(&[[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).is_none());
    }
}
