//! Oracles shared by the integration tests. Nothing here calls into the
//! crate's geometry code: rotations are handled as unit quaternions.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;

/// Unit quaternion `[w, x, y, z]`.
pub type Quat = [f64; 4];

pub fn qmul(a: Quat, b: Quat) -> Quat {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn conj(q: Quat) -> Quat {
    [q[0], -q[1], -q[2], -q[3]]
}

fn axis_angle(axis: usize, angle: f64) -> Quat {
    let mut q = [(angle / 2.0).cos(), 0.0, 0.0, 0.0];
    q[axis + 1] = (angle / 2.0).sin();
    q
}

/// Quaternion of `Rz(inplane) · Rx(-elevation) · Ry(azimuth)`.
pub fn euler_quat(azimuth: f64, elevation: f64, inplane: f64) -> Quat {
    qmul(qmul(axis_angle(2, inplane), axis_angle(0, -elevation)), axis_angle(1, azimuth))
}

/// Row-major rotation matrix of a unit quaternion.
pub fn quat_matrix(q: Quat) -> [f64; 9] {
    let [w, x, y, z] = q;
    [
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ]
}

/// Rotation angle of `a⁻¹ b`, computed without an arccos.
pub fn quat_angle(a: Quat, b: Quat) -> f64 {
    let r = qmul(conj(a), b);
    let v = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
    2.0 * v.atan2(r[0].abs())
}

/// Uniformly distributed unit quaternion.
pub fn random_quat(rng: &mut impl Rng) -> Quat {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    [a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos()]
}

/// Draw from the benchmark's pose distribution: azimuth over the full
/// circle, elevation within ±60°, in-plane within ±15°.
pub fn data_pose(rng: &mut impl Rng) -> [f64; 3] {
    [rng.random_range(-PI..PI), rng.random_range(-PI / 3.0..=PI / 3.0), rng.random_range(-PI / 12.0..=PI / 12.0)]
}

/// Draw uniformly over everything the angle heads can output.
pub fn head_box_pose(rng: &mut impl Rng) -> [f64; 3] {
    [rng.random_range(-PI..PI), rng.random_range(-PI / 2.0..=PI / 2.0), rng.random_range(-PI..PI)]
}

/// Monte-Carlo Acc30 of guesses drawn from `guess`, against ground truth
/// drawn from the data distribution.
pub fn chance_acc30_with<R: Rng>(rng: &mut R, trials: usize, guess: impl Fn(&mut R) -> [f64; 3]) -> f64 {
    let mut hits = 0usize;
    for _ in 0..trials {
        let [a, e, i] = data_pose(rng);
        let [ga, ge, gi] = guess(rng);
        if quat_angle(euler_quat(a, e, i), euler_quat(ga, ge, gi)) <= PI / 6.0 {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}

/// Chance level of the benchmark: the better of a guesser that matches the
/// data's pose prior and one that is uniform over the head's output box.
pub fn chance_rate(seed: u64, trials: usize) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let prior = chance_acc30_with(&mut rng, trials, data_pose);
    let uniform = chance_acc30_with(&mut rng, trials, head_box_pose);
    prior.max(uniform)
}
