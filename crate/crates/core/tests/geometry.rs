mod common;

use std::f64::consts::PI;

use posecontrast::geometry::{
    decode_head, encode_angle, euler_to_matrix, flip_pose, geodesic_delta, matrix_to_euler, normalized_distance,
    rotate_inplane, wrap_angle, AngleHeadOutput, AngleKind, PoseLabel, RotationMatrix, BIN_WIDTH,
};
use proptest::prelude::*;

fn pose() -> impl Strategy<Value = PoseLabel> {
    (-PI..PI, -PI / 2.0 + 1e-3..PI / 2.0 - 1e-3, -PI..PI).prop_map(|(a, e, i)| PoseLabel::new(a, e, i).unwrap())
}

/// Distance between two angles on the circle.
fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn euler_matrix_agrees_with_quaternion_composition(p in pose()) {
        let q = common::euler_quat(p.azimuth(), p.elevation(), p.inplane());
        let m = euler_to_matrix(&p);
        for (x, y) in m.as_array().iter().zip(common::quat_matrix(q)) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn euler_roundtrip(p in pose()) {
        let back = matrix_to_euler(&euler_to_matrix(&p)).unwrap();
        prop_assert!(angle_diff(back.azimuth(), p.azimuth()) < 1e-9);
        prop_assert!((back.elevation() - p.elevation()).abs() < 1e-9);
        prop_assert!(angle_diff(back.inplane(), p.inplane()) < 1e-9);
    }

    #[test]
    fn geodesic_matches_quaternion_oracle(a in pose(), b in pose()) {
        let d = geodesic_delta(&a.to_matrix(), &b.to_matrix());
        let qa = common::euler_quat(a.azimuth(), a.elevation(), a.inplane());
        let qb = common::euler_quat(b.azimuth(), b.elevation(), b.inplane());
        prop_assert!((d - common::quat_angle(qa, qb)).abs() < 1e-9);
    }

    #[test]
    fn geodesic_is_a_metric(a in pose(), b in pose(), c in pose()) {
        let (ra, rb, rc) = (a.to_matrix(), b.to_matrix(), c.to_matrix());
        let ab = geodesic_delta(&ra, &rb);
        prop_assert!((0.0..=PI).contains(&ab));
        prop_assert!((ab - geodesic_delta(&rb, &ra)).abs() < 1e-12);
        prop_assert!(geodesic_delta(&ra, &ra) < 1e-9);
        prop_assert!(ab <= geodesic_delta(&ra, &rc) + geodesic_delta(&rc, &rb) + 1e-12);
        let nd = normalized_distance(&ra, &rb);
        prop_assert!((0.0..=1.0).contains(&nd));
        prop_assert!((nd - ab / PI).abs() < 1e-15);
    }

    #[test]
    fn geodesic_is_left_invariant(a in pose(), b in pose(), g in pose()) {
        let rg = g.to_matrix();
        let before = geodesic_delta(&a.to_matrix(), &b.to_matrix());
        let after = geodesic_delta(&rg.mul(&a.to_matrix()), &rg.mul(&b.to_matrix()));
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn flip_is_an_involution(p in pose()) {
        let twice = flip_pose(&flip_pose(&p));
        prop_assert!(angle_diff(twice.azimuth(), p.azimuth()) < 1e-15);
        prop_assert_eq!(twice.elevation(), p.elevation());
        prop_assert!(angle_diff(twice.inplane(), p.inplane()) < 1e-15);
    }

    #[test]
    fn inplane_rotation_is_additive(p in pose(), a in -PI..PI, b in -PI..PI) {
        let stepwise = rotate_inplane(&rotate_inplane(&p, a).unwrap(), b).unwrap();
        let direct = rotate_inplane(&p, a + b).unwrap();
        prop_assert!(geodesic_delta(&stepwise.to_matrix(), &direct.to_matrix()) < 1e-9);
        prop_assert_eq!(stepwise.azimuth(), p.azimuth());
    }

    #[test]
    fn inplane_rotation_moves_pose_by_its_angle(p in pose(), phi in -PI / 12.0..PI / 12.0) {
        let r = rotate_inplane(&p, phi).unwrap();
        prop_assert!((geodesic_delta(&p.to_matrix(), &r.to_matrix()) - phi.abs()).abs() < 1e-9);
    }

    #[test]
    fn codec_roundtrip(theta in -PI..PI, kind in prop::sample::select(AngleKind::ALL.to_vec())) {
        let theta = if kind == AngleKind::Elevation { theta / 2.0 } else { theta };
        let code = encode_angle(theta, kind);
        prop_assert!((0.0..1.0).contains(&code.offset) || (kind == AngleKind::Elevation && code.offset == 1.0));
        let (lo, hi) = kind.bin_range();
        prop_assert!(lo <= code.bin && code.bin <= hi);
        prop_assert!((code.decode() - theta).abs() < 1e-12);
    }

    #[test]
    fn one_hot_heads_decode_to_the_pose(p in pose()) {
        let decoded = decode_head(&AngleHeadOutput::one_hot(&p));
        prop_assert!(geodesic_delta(&decoded.to_matrix(), &p.to_matrix()) < 1e-9);
    }
}

#[test]
fn geodesic_on_uniform_random_rotations_matches_oracle() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let (qa, qb) = (common::random_quat(&mut rng), common::random_quat(&mut rng));
        let ra = RotationMatrix::new(common::quat_matrix(qa)).unwrap();
        let rb = RotationMatrix::new(common::quat_matrix(qb)).unwrap();
        assert!((geodesic_delta(&ra, &rb) - common::quat_angle(qa, qb)).abs() < 1e-9);
    }
}

#[test]
fn geodesic_near_zero_and_pi() {
    let p = PoseLabel::new(0.3, 0.2, 0.1).unwrap();
    for eps in [1e-12, 1e-9, 1e-6] {
        let q = PoseLabel::new(0.3 + eps, 0.2, 0.1).unwrap();
        assert!((geodesic_delta(&p.to_matrix(), &q.to_matrix()) - eps).abs() < 1e-12);
    }
    let a = PoseLabel::new(0.0, 0.0, 0.0).unwrap();
    let b = PoseLabel::new(-PI, 0.0, 0.0).unwrap();
    assert!((geodesic_delta(&a.to_matrix(), &b.to_matrix()) - PI).abs() < 1e-12);
}

#[test]
fn codec_boundaries() {
    let top = encode_angle(PI / 2.0, AngleKind::Elevation);
    assert_eq!((top.bin, top.offset), (5, 1.0));
    assert_eq!(top.decode(), PI / 2.0);
    let bottom = encode_angle(-PI / 2.0, AngleKind::Elevation);
    assert_eq!((bottom.bin, bottom.offset), (-6, 0.0));
    for theta in [PI, -PI] {
        let c = encode_angle(theta, AngleKind::Azimuth);
        assert_eq!((c.bin, c.offset), (-12, 0.0));
        assert_eq!(c.decode(), -PI);
    }
    for k in -12..12 {
        let theta = k as f64 * BIN_WIDTH;
        let c = encode_angle(theta, AngleKind::Azimuth);
        assert!((0.0..1.0).contains(&c.offset));
        assert!((c.decode() - wrap_angle(theta).unwrap()).abs() < 1e-12);
    }
}
