//! Grasp matrix construction and force-closure certification.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::GraspError;
use crate::lp::{LinearProgram, LpOutcome, Relation, VarKind};
use crate::math::{adjoint_transform, wrench_basis_apply, ContactForce4, Rotation3, Vec3, Wrench};

pub const DEFAULT_SIDES: usize = 8;
/// Relative singular-value threshold for the rank test.
pub const RANK_TOL: f64 = 1e-8;
/// Upper bound on summed normal force when balancing a unit wrench.
pub const ORACLE_FORCE_BOUND: f64 = 1e6;
const ORACLE_SEED: u64 = 0x6f72_6163_6c65;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub position: Vec3,
    /// Contact frame to object frame; local z is the inward normal.
    pub rotation: Rotation3,
    pub mu: f64,
    pub mu_tau: f64,
}

impl Contact {
    pub fn new(position: Vec3, rotation: Rotation3, mu: f64, mu_tau: f64) -> Result<Self, GraspError> {
        if !position.is_finite() {
            return Err(GraspError::InvalidParameter("contact position is not finite".into()));
        }
        for (name, v) in [("mu", mu), ("mu_tau", mu_tau)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(GraspError::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { position, rotation, mu, mu_tau })
    }

    /// Contact at `position` pushing along `inward_normal`.
    pub fn from_normal(position: Vec3, inward_normal: Vec3, mu: f64, mu_tau: f64) -> Result<Self, GraspError> {
        Self::new(position, Rotation3::with_z_axis(inward_normal)?, mu, mu_tau)
    }

    pub fn normal(&self) -> Vec3 {
        self.rotation.matrix().col(2)
    }
}

/// Contact description as read from a file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    pub position: [f64; 3],
    pub normal: [f64; 3],
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_mu_tau")]
    pub mu_tau: f64,
}

fn default_mu() -> f64 {
    0.5
}
fn default_mu_tau() -> f64 {
    0.005
}

impl ContactSpec {
    pub fn to_contact(&self) -> Result<Contact, GraspError> {
        Contact::from_normal(Vec3::from_array(self.position), Vec3::from_array(self.normal), self.mu, self.mu_tau)
    }
}

/// A contact list file: a `sides` setting and one `[[contacts]]` table per
/// contact.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSet {
    #[serde(default = "default_sides")]
    pub sides: usize,
    #[serde(default)]
    pub contacts: Vec<ContactSpec>,
}

fn default_sides() -> usize {
    DEFAULT_SIDES
}

impl ContactSet {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, GraspError> {
        toml::from_str(text).map_err(|e| GraspError::Parse { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, GraspError> {
        let text = std::fs::read_to_string(path).map_err(|e| GraspError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_contacts(&self) -> Result<Vec<Contact>, GraspError> {
        self.contacts.iter().map(ContactSpec::to_contact).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspMatrix {
    /// Six rows, `4 * n` columns.
    rows: [Vec<f64>; 6],
    n: usize,
}

impl GraspMatrix {
    pub fn num_contacts(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        4 * self.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.rows[r][c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }

    /// Net object wrench for stacked contact forces.
    pub fn apply(&self, f: &[ContactForce4]) -> Wrench {
        assert_eq!(f.len(), self.n, "one force per contact");
        let flat: Vec<f64> = f.iter().flat_map(|c| c.to_array()).collect();
        let mut out = [0.0; 6];
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().zip(&flat).map(|(a, b)| a * b).sum();
        }
        Wrench::from_array(out)
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> [f64; 6] {
        let mut ggt = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                ggt[i][j] = self.rows[i].iter().zip(&self.rows[j]).map(|(a, b)| a * b).sum();
            }
        }
        let mut ev = jacobi_eigenvalues(ggt);
        ev.sort_by(|a, b| b.total_cmp(a));
        ev.map(|e| e.max(0.0).sqrt())
    }

    pub fn is_surjective(&self) -> bool {
        let s = self.singular_values();
        s[0] > 0.0 && s[5] > RANK_TOL * s[0]
    }
}

/// Eigenvalues of a symmetric 6×6 matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: [[f64; 6]; 6]) -> [f64; 6] {
    const N: usize = 6;
    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..N).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::array::from_fn(|i| a[i][i])
}

pub fn build_grasp_matrix(contacts: &[Contact]) -> Result<GraspMatrix, GraspError> {
    if contacts.is_empty() {
        return Err(GraspError::NoContacts);
    }
    let n = contacts.len();
    let mut rows: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; 4 * n]);
    for (i, c) in contacts.iter().enumerate() {
        for k in 0..4 {
            let mut unit = [0.0; 4];
            unit[k] = 1.0;
            let w = adjoint_transform(c.position, &c.rotation, wrench_basis_apply(ContactForce4::from_slice(&unit)));
            for (r, v) in w.to_array().into_iter().enumerate() {
                rows[r][4 * i + k] = v;
            }
        }
    }
    Ok(GraspMatrix { rows, n })
}

/// Quadratic friction cone test with an optional inset `margin`.
pub fn in_friction_cone(f: ContactForce4, mu: f64, mu_tau: f64, margin: f64) -> bool {
    f.fx.hypot(f.fy) <= mu * f.fz - margin && f.f_tau.abs() <= mu_tau * f.fz - margin && f.fz >= margin
}

/// `normal · f <= 0` with a unit-length `normal`; slack is `-normal · f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub normal: [f64; 4],
}

impl HalfSpace {
    fn unit(v: [f64; 4]) -> Self {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Self { normal: v.map(|x| x / n) }
    }

    pub fn slack(&self, f: ContactForce4) -> f64 {
        -self.normal.iter().zip(f.to_array()).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn contains(&self, f: ContactForce4) -> bool {
        self.slack(f) >= 0.0
    }
}

/// Polyhedral inner approximation of the soft-finger friction cone:
/// `sides` tangential faces, two torsional faces and `fz >= 0`.
pub fn linearize_cone(mu: f64, mu_tau: f64, sides: usize) -> Result<Vec<HalfSpace>, GraspError> {
    if sides < 3 {
        return Err(GraspError::InvalidParameter(format!("cone needs at least 3 sides, got {sides}")));
    }
    let apothem = mu * (std::f64::consts::PI / sides as f64).cos();
    let mut out = Vec::with_capacity(sides + 3);
    for k in 0..sides {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
        out.push(HalfSpace::unit([phi.cos(), phi.sin(), -apothem, 0.0]));
    }
    out.push(HalfSpace::unit([0.0, 0.0, -mu_tau, 1.0]));
    out.push(HalfSpace::unit([0.0, 0.0, -mu_tau, -1.0]));
    out.push(HalfSpace::unit([0.0, 0.0, -1.0, 0.0]));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureReport {
    pub surjective: bool,
    pub has_strict_internal: bool,
    pub is_force_closure: bool,
    /// Best achievable slack of a normalized internal force. Positive when
    /// a strict internal force exists, negative or `-inf` otherwise.
    pub margin: f64,
    pub internal_force: Option<Vec<ContactForce4>>,
    pub singular_values: [f64; 6],
}

/// Margin below which an internal force is not considered strict.
pub const STRICT_TOL: f64 = 1e-9;

pub fn is_force_closure(contacts: &[Contact], sides: usize) -> Result<ClosureReport, GraspError> {
    let g = build_grasp_matrix(contacts)?;
    let sv = g.singular_values();
    let surjective = sv[0] > 0.0 && sv[5] > RANK_TOL * sv[0];
    let n = contacts.len();
    let cones = contacts.iter().map(|c| linearize_cone(c.mu, c.mu_tau, sides)).collect::<Result<Vec<_>, _>>()?;

    // Variables: 4 per contact (fz non-negative, rest free), then a free slack t.
    let nv = 4 * n + 1;
    let mut kinds = vec![VarKind::Free; nv];
    for i in 0..n {
        kinds[4 * i + 2] = VarKind::NonNegative;
    }
    let mut lp = LinearProgram::new(kinds);
    let mut obj = vec![0.0; nv];
    obj[4 * n] = 1.0;
    lp.set_objective(obj);
    for r in 0..6 {
        let mut row = g.row(r).to_vec();
        row.push(0.0);
        lp.add_row(row, Relation::Eq, 0.0);
    }
    for (i, cone) in cones.iter().enumerate() {
        for h in cone {
            let mut row = vec![0.0; nv];
            row[4 * i..4 * i + 4].copy_from_slice(&h.normal);
            row[4 * n] = 1.0;
            lp.add_row(row, Relation::Le, 0.0);
        }
    }
    let mut norm = vec![0.0; nv];
    for i in 0..n {
        norm[4 * i + 2] = 1.0;
    }
    lp.add_row(norm, Relation::Eq, 1.0);

    let (margin, internal) = match lp.solve() {
        LpOutcome::Optimal { x, value } => {
            let forces = (0..n).map(|i| ContactForce4::from_slice(&x[4 * i..4 * i + 4])).collect::<Vec<_>>();
            (value, Some(forces))
        }
        _ => (f64::NEG_INFINITY, None),
    };
    let has_strict_internal = margin > STRICT_TOL;
    Ok(ClosureReport {
        surjective,
        has_strict_internal,
        is_force_closure: surjective && has_strict_internal,
        margin,
        internal_force: if has_strict_internal { internal } else { None },
        singular_values: sv,
    })
}

/// Checks whether a specific wrench can be balanced by forces inside the
/// linearized cones.
pub fn can_resist(g: &GraspMatrix, contacts: &[Contact], w: Wrench, sides: usize) -> bool {
    let n = contacts.len();
    let nv = 4 * n;
    let mut kinds = vec![VarKind::Free; nv];
    for i in 0..n {
        kinds[4 * i + 2] = VarKind::NonNegative;
    }
    let mut lp = LinearProgram::new(kinds);
    let target = w.to_array();
    for (r, t) in target.iter().enumerate() {
        lp.add_row(g.row(r).to_vec(), Relation::Eq, -t);
    }
    for (i, c) in contacts.iter().enumerate() {
        let Ok(cone) = linearize_cone(c.mu, c.mu_tau, sides) else { return false };
        for h in cone {
            let mut row = vec![0.0; nv];
            row[4 * i..4 * i + 4].copy_from_slice(&h.normal);
            lp.add_row(row, Relation::Le, 0.0);
        }
    }
    let mut norm = vec![0.0; nv];
    for i in 0..n {
        norm[4 * i + 2] = 1.0;
    }
    lp.add_row(norm, Relation::Le, ORACLE_FORCE_BOUND);
    lp.solve().is_feasible()
}

/// Brute-force check: every sampled unit wrench must be balanced.
pub fn resistance_oracle(contacts: &[Contact], wrench_samples: usize) -> bool {
    resistance_oracle_seeded(contacts, wrench_samples, ORACLE_SEED)
}

pub fn resistance_oracle_seeded(contacts: &[Contact], wrench_samples: usize, seed: u64) -> bool {
    let Ok(g) = build_grasp_matrix(contacts) else { return false };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..wrench_samples.max(1)).all(|_| {
        let w = random_unit_wrench(&mut rng);
        can_resist(&g, contacts, w, DEFAULT_SIDES)
    })
}

fn random_unit_wrench(rng: &mut ChaCha8Rng) -> Wrench {
    loop {
        let a: [f64; 6] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return Wrench::from_array(a.map(|x| x / n));
        }
    }
}

/// Two opposing contacts on the y axis at `±half_width`, normals inward.
pub fn antipodal_pair(half_width: f64, mu: f64, mu_tau: f64) -> Result<Vec<Contact>, GraspError> {
    Ok(vec![
        Contact::from_normal(Vec3::new(0.0, half_width, 0.0), -Vec3::Y, mu, mu_tau)?,
        Contact::from_normal(Vec3::new(0.0, -half_width, 0.0), Vec3::Y, mu, mu_tau)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_contact_identity_matrix() {
        let c = Contact::new(Vec3::ZERO, Rotation3::IDENTITY, 0.5, 0.005).unwrap();
        let g = build_grasp_matrix(&[c]).unwrap();
        let expected = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for r in 0..6 {
            for c in 0..4 {
                assert_eq!(g.get(r, c), expected[r][c]);
            }
        }
    }

    #[test]
    fn antipodal_normal_forces_cancel() {
        let cs = antipodal_pair(0.03, 0.5, 0.005).unwrap();
        let g = build_grasp_matrix(&cs).unwrap();
        let f = [ContactForce4::new(0.0, 0.0, 1.0, 0.0); 2];
        let w = g.apply(&f);
        assert!(w.to_array().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn empty_contacts_rejected() {
        assert!(matches!(build_grasp_matrix(&[]), Err(GraspError::NoContacts)));
        assert!(is_force_closure(&[], 8).is_err());
    }

    #[test]
    fn cone_examples() {
        assert!(in_friction_cone(ContactForce4::new(0.0, 0.0, 1.0, 0.0), 0.5, 0.1, 0.0));
        assert!(!in_friction_cone(ContactForce4::new(0.6, 0.0, 1.0, 0.0), 0.5, 0.1, 0.0));
        assert!(!in_friction_cone(ContactForce4::new(0.0, 0.0, 1.0, 0.2), 0.5, 0.1, 0.0));
    }

    #[test]
    fn linearize_rejects_few_sides() {
        assert!(linearize_cone(0.5, 0.1, 2).is_err());
        assert_eq!(linearize_cone(0.5, 0.1, 8).unwrap().len(), 11);
    }

    #[test]
    fn frictionless_cone_is_a_ray() {
        let hs = linearize_cone(0.0, 0.0, 5).unwrap();
        for f in [ContactForce4::new(1e-3, 0.0, 1.0, 0.0), ContactForce4::new(0.0, -1e-3, 1.0, 0.0)] {
            assert!(hs.iter().any(|h| !h.contains(f)));
        }
        assert!(hs.iter().all(|h| h.contains(ContactForce4::new(0.0, 0.0, 1.0, 0.0))));
    }

    #[test]
    fn axis_point_has_positive_slack() {
        let hs = linearize_cone(0.5, 0.005, 8).unwrap();
        assert!(hs.iter().all(|h| h.slack(ContactForce4::new(0.0, 0.0, 1.0, 0.0)) > 0.0));
    }

    #[test]
    fn closure_examples() {
        let r = is_force_closure(&antipodal_pair(0.03, 0.5, 0.005).unwrap(), 8).unwrap();
        assert!(r.is_force_closure, "{r:?}");
        assert!(r.margin > 0.0);
        let f = r.internal_force.unwrap();
        let g = build_grasp_matrix(&antipodal_pair(0.03, 0.5, 0.005).unwrap()).unwrap();
        assert!(g.apply(&f).to_array().iter().all(|v| v.abs() < 1e-9));

        let single = [Contact::from_normal(Vec3::ZERO, Vec3::Z, 0.9, 0.1).unwrap()];
        let r = is_force_closure(&single, 8).unwrap();
        assert!(!r.surjective && !r.is_force_closure);

        let r = is_force_closure(&antipodal_pair(0.03, 0.0, 0.0).unwrap(), 8).unwrap();
        assert!(!r.is_force_closure);
    }

    #[test]
    fn coincident_contacts_not_surjective() {
        let c = Contact::from_normal(Vec3::new(0.01, 0.0, 0.0), -Vec3::X, 0.5, 0.005).unwrap();
        let r = is_force_closure(&[c, c], 8).unwrap();
        assert!(!r.surjective);
    }

    #[test]
    fn oracle_examples() {
        assert!(resistance_oracle(&antipodal_pair(0.03, 0.5, 0.005).unwrap(), 100));
        assert!(!resistance_oracle(&antipodal_pair(0.03, 0.0, 0.0).unwrap(), 100));
        let single = [Contact::from_normal(Vec3::ZERO, Vec3::Z, 0.9, 0.1).unwrap()];
        assert!(!resistance_oracle(&single, 20));
    }
}
