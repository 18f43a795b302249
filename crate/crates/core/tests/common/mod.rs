use grasp_core::closure::Contact;
use grasp_core::math::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Contacts scattered around a ball, normals pointing roughly at its center.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Vec<Contact> {
    let n = rng.random_range(2..=3);
    let mu = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.05..1.0) };
    let mu_tau = if mu == 0.0 { 0.0 } else { rng.random_range(0.0..0.02) };
    (0..n)
        .map(|_| {
            let dir = loop {
                let v =
                    Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if let Some(u) = v.normalized() {
                    break u;
                }
            };
            let radius = rng.random_range(0.01..0.05);
            let tilt = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            let normal = (-dir + tilt).normalized().unwrap_or(-dir);
            Contact::from_normal(dir.scale(radius), normal, mu, mu_tau).unwrap()
        })
        .collect()
}
