use grasp_core::closure::{
    antipodal_pair, build_grasp_matrix, in_friction_cone, is_force_closure, linearize_cone, resistance_oracle, Contact,
    DEFAULT_SIDES,
};
use grasp_core::math::{ContactForce4, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::random_instance;

#[test]
fn closure_agrees_with_resistance_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut positives = 0;
    let mut disagreements = Vec::new();
    while checked < 200 {
        let contacts = random_instance(&mut rng);
        let report = is_force_closure(&contacts, DEFAULT_SIDES).unwrap();
        if report.margin.abs() <= 1e-6 && report.surjective {
            continue;
        }
        checked += 1;
        positives += report.is_force_closure as usize;
        if report.is_force_closure != resistance_oracle(&contacts, 500) {
            disagreements.push((contacts.len(), report.margin));
        }
    }
    assert!(disagreements.is_empty(), "disagreements: {disagreements:?}");
    assert!(positives > 20 && positives < 180, "unbalanced sample: {positives} closures of 200");
}

#[test]
fn reference_grasps() {
    let yes = is_force_closure(&antipodal_pair(0.02, 0.5, 0.005).unwrap(), DEFAULT_SIDES).unwrap();
    assert!(yes.surjective && yes.has_strict_internal && yes.is_force_closure);
    assert!(resistance_oracle(&antipodal_pair(0.02, 0.5, 0.005).unwrap(), 500));

    let no = is_force_closure(&antipodal_pair(0.02, 0.0, 0.0).unwrap(), DEFAULT_SIDES).unwrap();
    assert!(!no.is_force_closure);

    let single = vec![Contact::from_normal(Vec3::ZERO, Vec3::Z, 0.5, 0.005).unwrap()];
    let r = is_force_closure(&single, DEFAULT_SIDES).unwrap();
    assert!(!r.surjective && !r.is_force_closure);
}

#[test]
fn more_friction_never_loses_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let contacts = random_instance(&mut rng);
        if !is_force_closure(&contacts, DEFAULT_SIDES).unwrap().is_force_closure {
            continue;
        }
        let wider: Vec<Contact> = contacts
            .iter()
            .map(|c| Contact::new(c.position, c.rotation, c.mu * 1.5, c.mu_tau * 1.5).unwrap())
            .collect();
        assert!(is_force_closure(&wider, DEFAULT_SIDES).unwrap().is_force_closure);
    }
}

/// Torsional friction is a length (an effective patch radius), so it scales
/// with the geometry.
#[test]
fn closure_is_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let contacts = random_instance(&mut rng);
        let base = is_force_closure(&contacts, DEFAULT_SIDES).unwrap();
        if base.margin.abs() <= 1e-6 {
            continue;
        }
        for s in [0.1, 10.0] {
            let scaled: Vec<Contact> = contacts
                .iter()
                .map(|c| Contact::new(c.position.scale(s), c.rotation, c.mu, c.mu_tau * s).unwrap())
                .collect();
            assert_eq!(is_force_closure(&scaled, DEFAULT_SIDES).unwrap().is_force_closure, base.is_force_closure);
        }
    }
}

#[test]
fn point_contact_closure_ignores_position_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let contacts: Vec<Contact> = random_instance(&mut rng)
            .into_iter()
            .map(|c| Contact::new(c.position, c.rotation, c.mu, 0.0).unwrap())
            .collect();
        let base = is_force_closure(&contacts, DEFAULT_SIDES).unwrap();
        if base.margin.abs() <= 1e-6 {
            continue;
        }
        for s in [0.1, 10.0] {
            let scaled: Vec<Contact> =
                contacts.iter().map(|c| Contact::new(c.position.scale(s), c.rotation, c.mu, 0.0).unwrap()).collect();
            assert_eq!(is_force_closure(&scaled, DEFAULT_SIDES).unwrap().is_force_closure, base.is_force_closure);
        }
    }
}

#[test]
fn margin_sign_matches_decision() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let r = is_force_closure(&random_instance(&mut rng), DEFAULT_SIDES).unwrap();
        assert_eq!(r.has_strict_internal, r.margin > 1e-9);
        assert_eq!(r.is_force_closure, r.surjective && r.has_strict_internal);
    }
}

#[test]
fn linearized_cone_is_inside_true_cone() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut inside = 0;
    for _ in 0..10_000 {
        let mu = rng.random_range(0.0..1.5);
        let mu_tau = rng.random_range(0.0..0.05);
        let sides = rng.random_range(3..=16);
        let cone = linearize_cone(mu, mu_tau, sides).unwrap();
        let f = ContactForce4::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.2..1.0),
            rng.random_range(-0.05..0.05),
        );
        if cone.iter().all(|h| h.contains(f)) {
            inside += 1;
            assert!(in_friction_cone(f, mu, mu_tau, -1e-12), "{f:?} mu {mu} mu_tau {mu_tau} sides {sides}");
        }
    }
    assert!(inside > 500, "too few samples landed inside: {inside}");
}

#[test]
fn grasp_matrix_maps_internal_force_to_zero() {
    let contacts = antipodal_pair(0.03, 0.5, 0.005).unwrap();
    let g = build_grasp_matrix(&contacts).unwrap();
    let squeeze = [ContactForce4::new(0.0, 0.0, 1.0, 0.0), ContactForce4::new(0.0, 0.0, 1.0, 0.0)];
    let w = g.apply(&squeeze).to_array();
    assert!(w.iter().all(|x| x.abs() < 1e-12), "{w:?}");
    let r = is_force_closure(&contacts, DEFAULT_SIDES).unwrap();
    let f = r.internal_force.unwrap();
    let w = g.apply(&f).to_array();
    assert!(w.iter().all(|x| x.abs() < 1e-9), "{w:?}");
    for fi in f {
        assert!(in_friction_cone(fi, 0.5, 0.005, 1e-12), "{fi:?}");
    }
}
