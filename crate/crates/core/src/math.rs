//! Fixed-size linear algebra for contact frames and wrenches.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::GraspError;

/// Tolerance on `RᵀR = I` and `det R = 1`.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale(1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self.scale(-1.0)
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn det(&self) -> f64 {
        self.col(0).dot(self.col(1).cross(self.col(2)))
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn max_abs_diff(&self, o: &Mat3) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.0[i][j] - o.0[i][j]).abs());
            }
        }
        d
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        self.mul_vec(v)
    }
}

/// Skew-symmetric cross-product matrix: `hat(v) * w == v × w`.
pub fn hat(v: Vec3) -> Mat3 {
    Mat3([[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]])
}

/// A proper rotation matrix, checked on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Mat3);

impl Rotation3 {
    pub const IDENTITY: Rotation3 = Rotation3(Mat3::IDENTITY);

    pub fn new(m: Mat3) -> Result<Self, GraspError> {
        let rtr = m.transpose().mul_mat(&m);
        let ortho_err = rtr.max_abs_diff(&Mat3::IDENTITY);
        let det_err = (m.det() - 1.0).abs();
        if !(ortho_err <= ORTHONORMAL_TOL && det_err <= ORTHONORMAL_TOL) {
            return Err(GraspError::NotOrthonormal { error: ortho_err.max(det_err) });
        }
        Ok(Rotation3(m))
    }

    /// Rotation by `angle` radians about a unit `axis` (Rodrigues).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Rotation3 {
        let k = axis.normalized().unwrap_or(Vec3::Z);
        let (s, c) = angle.sin_cos();
        let kx = hat(k);
        let kx2 = kx.mul_mat(&kx);
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = Mat3::IDENTITY.0[i][j] + s * kx.0[i][j] + (1.0 - c) * kx2.0[i][j];
            }
        }
        Rotation3(Mat3(m))
    }

    /// A rotation whose local z axis is `normal`. The tangent axes are any
    /// right-handed completion.
    pub fn with_z_axis(normal: Vec3) -> Result<Rotation3, GraspError> {
        let z = normal.normalized().ok_or(GraspError::DegenerateNormal)?;
        let helper = if z.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        let x = helper.cross(z).normalized().ok_or(GraspError::DegenerateNormal)?;
        let y = z.cross(x);
        Ok(Rotation3(Mat3::from_cols(x, y, z)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn compose(&self, inner: &Rotation3) -> Rotation3 {
        Rotation3(self.0.mul_mat(&inner.0))
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        self.0.mul_vec(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench { force: Vec3::ZERO, torque: Vec3::ZERO };

    pub fn new(force: Vec3, torque: Vec3) -> Self {
        Self { force, torque }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.force.x, self.force.y, self.force.z, self.torque.x, self.torque.y, self.torque.z]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]))
    }

    pub fn scale(self, s: f64) -> Wrench {
        Wrench::new(self.force.scale(s), self.torque.scale(s))
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, o: Wrench) -> Wrench {
        Wrench::new(self.force + o.force, self.torque + o.torque)
    }
}

/// Soft-finger contact force: tangential `fx`, `fy`, normal `fz` and torque
/// `f_tau` about the contact normal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactForce4 {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub f_tau: f64,
}

impl ContactForce4 {
    pub const fn new(fx: f64, fy: f64, fz: f64, f_tau: f64) -> Self {
        Self { fx, fy, fz, f_tau }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.fx, self.fy, self.fz, self.f_tau]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }
}

/// Soft-finger wrench basis: maps the four transmissible components into a
/// wrench in the local contact frame.
pub fn wrench_basis_apply(f: ContactForce4) -> Wrench {
    Wrench::new(Vec3::new(f.fx, f.fy, f.fz), Vec3::new(0.0, 0.0, f.f_tau))
}

/// Carries a wrench expressed in a contact frame at `p` with orientation `r`
/// into the object frame.
pub fn adjoint_transform(p: Vec3, r: &Rotation3, w_contact: Wrench) -> Wrench {
    let force = r.apply(w_contact.force);
    let torque = p.cross(force) + r.apply(w_contact.torque);
    Wrench::new(force, torque)
}

/// Same as [`adjoint_transform`] but validates a raw matrix first.
pub fn adjoint_transform_checked(p: Vec3, r: Mat3, w_contact: Wrench) -> Result<Wrench, GraspError> {
    let r = Rotation3::new(r)?;
    Ok(adjoint_transform(p, &r, w_contact))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn hat_examples() {
        assert_eq!(hat(Vec3::ZERO), Mat3::ZERO);
        assert_eq!(hat(Vec3::Z) * Vec3::X, Vec3::Y);
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(hat(v) * v, Vec3::ZERO);
    }

    #[test]
    fn hat_matches_cross() {
        let v = Vec3::new(0.3, -1.2, 2.5);
        let w = Vec3::new(-4.0, 0.5, 1.5);
        assert!(close(hat(v) * w, v.cross(w), 1e-15));
    }

    #[test]
    fn wrench_basis_columns() {
        let w = wrench_basis_apply(ContactForce4::new(0.0, 0.0, 1.0, 0.0));
        assert_eq!(w, Wrench::new(Vec3::Z, Vec3::ZERO));
        let w = wrench_basis_apply(ContactForce4::new(0.0, 0.0, 0.0, 1.0));
        assert_eq!(w, Wrench::new(Vec3::ZERO, Vec3::Z));
        assert_eq!(wrench_basis_apply(ContactForce4::default()), Wrench::ZERO);
    }

    #[test]
    fn adjoint_examples() {
        let w = Wrench::new(Vec3::new(1.0, -2.0, 0.5), Vec3::new(0.1, 0.2, 0.3));
        assert_eq!(adjoint_transform(Vec3::ZERO, &Rotation3::IDENTITY, w), w);

        let out = adjoint_transform(Vec3::new(0.0, 0.03, 0.0), &Rotation3::IDENTITY, Wrench::new(Vec3::Z, Vec3::ZERO));
        assert!(close(out.force, Vec3::Z, 1e-15));
        assert!(close(out.torque, Vec3::new(0.03, 0.0, 0.0), 1e-15));

        let rz = Rotation3::from_axis_angle(Vec3::Z, std::f64::consts::PI);
        let out = adjoint_transform(Vec3::ZERO, &rz, Wrench::new(Vec3::X, Vec3::ZERO));
        assert!(close(out.force, Vec3::new(-1.0, 0.0, 0.0), 1e-12));
    }

    #[test]
    fn rejects_non_orthonormal() {
        let mut m = Mat3::IDENTITY;
        m.0[0][0] = 1.0 + 1e-6;
        assert!(matches!(Rotation3::new(m), Err(GraspError::NotOrthonormal { .. })));
        // reflection
        let mut m = Mat3::IDENTITY;
        m.0[2][2] = -1.0;
        assert!(Rotation3::new(m).is_err());
        assert!(adjoint_transform_checked(Vec3::ZERO, Mat3::ZERO, Wrench::ZERO).is_err());
    }

    #[test]
    fn with_z_axis_is_proper() {
        for n in [Vec3::X, -Vec3::Y, Vec3::new(1.0, 1.0, 1.0), Vec3::new(0.95, 0.1, 0.0)] {
            let r = Rotation3::with_z_axis(n).unwrap();
            assert!(Rotation3::new(*r.matrix()).is_ok());
            assert!(close(r.matrix().col(2), n.normalized().unwrap(), 1e-12));
        }
        assert!(Rotation3::with_z_axis(Vec3::ZERO).is_err());
    }
}
