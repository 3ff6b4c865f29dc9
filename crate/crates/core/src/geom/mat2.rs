//! 2×2 real matrix helpers used per face.

use nalgebra::Matrix2;

pub type M2 = Matrix2<f64>;

pub fn ident() -> M2 {
    M2::identity()
}

pub fn sym(e: f64, f: f64, g: f64) -> M2 {
    M2::new(e, f, f, g)
}

/// Rotation by angle `a`.
pub fn rot(a: f64) -> M2 {
    let (s, c) = a.sin_cos();
    M2::new(c, -s, s, c)
}

pub fn is_spd(m: &M2) -> bool {
    m[(0, 0)] > 0.0 && m.determinant() > 0.0
}

/// Square root of a matrix with positive real spectrum, via Cayley–Hamilton:
/// sqrt(M) = (M + sqrt(det M)·1) / sqrt(tr M + 2 sqrt(det M)).
/// For SPD input this is the unique SPD root; for M = h⁻¹h* it is the
/// h-self-adjoint positive root.
pub fn pos_sqrt(m: &M2) -> Option<M2> {
    let d = m.determinant();
    if !(d > 0.0) {
        return None;
    }
    let sd = d.sqrt();
    let s = m.trace() + 2.0 * sd;
    if !(s > 0.0) {
        return None;
    }
    Some((m + M2::identity() * sd) / s.sqrt())
}

pub fn inv(m: &M2) -> Option<M2> {
    m.try_inverse()
}

/// The complex structure compatible with the metric g and the chart orientation.
pub fn j_of(g: &M2) -> M2 {
    let (e, f, gg) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
    let s = (e * gg - f * f).sqrt();
    M2::new(-f, -gg, e, f) / s
}

/// Adjoint of `a` with respect to the metric g: g⁻¹ aᵀ g.
pub fn adjoint(a: &M2, g: &M2) -> M2 {
    g.try_inverse().expect("metric not invertible") * a.transpose() * g
}

/// Pull back the bilinear form g by the operator a: g(a·, a·).
pub fn pullback(g: &M2, a: &M2) -> M2 {
    a.transpose() * g * a
}

/// g(a·, ·), symmetrized.
pub fn lower(g: &M2, a: &M2) -> M2 {
    let m = g * a;
    (m + m.transpose()) * 0.5
}

pub fn frob(m: &M2) -> f64 {
    m.norm()
}

/// Quadratic value xᵀ g x.
pub fn quad(g: &M2, x: [f64; 2]) -> f64 {
    g[(0, 0)] * x[0] * x[0] + 2.0 * g[(0, 1)] * x[0] * x[1] + g[(1, 1)] * x[1] * x[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_identity() {
        assert!((pos_sqrt(&ident()).unwrap() - ident()).norm() < 1e-15);
    }

    #[test]
    fn j_squares_to_minus_one() {
        let g = sym(2.0, 0.3, 0.7);
        let j = j_of(&g);
        assert!((j * j + ident()).norm() < 1e-14);
        assert!((pullback(&g, &j) - g).norm() < 1e-14);
        assert!(j.trace().abs() < 1e-14);
        assert!((j.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_of_relative_tensor_is_self_adjoint() {
        let h = sym(1.3, -0.2, 0.9);
        let hs = sym(0.8, 0.4, 1.7);
        let m = h.try_inverse().unwrap() * hs;
        let b = pos_sqrt(&m).unwrap();
        assert!((b * b - m).norm() < 1e-13);
        assert!((adjoint(&b, &h) - b).norm() < 1e-13);
    }
}
