//! Builds rotations from Euler angles and prints geodesic distances between
//! a reference pose and a few variations of it.
//!
//! cargo run --example geodesic_distance

use posecontrast::geometry::{flip_pose, geodesic_delta, normalized_distance, rotate_inplane, PoseLabel};

fn main() -> posecontrast::Result<()> {
    let reference = PoseLabel::from_degrees(30.0, 10.0, 0.0)?;
    let candidates = [
        ("same pose", reference),
        ("azimuth +45", PoseLabel::from_degrees(75.0, 10.0, 0.0)?),
        ("elevation -40", PoseLabel::from_degrees(30.0, -30.0, 0.0)?),
        ("in-plane +15", rotate_inplane(&reference, 15f64.to_radians())?),
        ("mirrored", flip_pose(&reference)),
        ("opposite azimuth", PoseLabel::from_degrees(-150.0, 10.0, 0.0)?),
    ];
    let r = reference.to_matrix();
    println!("{:<18} {:>10} {:>10}", "candidate", "delta_deg", "d/pi");
    for (name, pose) in candidates {
        let m = pose.to_matrix();
        println!("{name:<18} {:>10.4} {:>10.4}", geodesic_delta(&r, &m).to_degrees(), normalized_distance(&r, &m));
    }
    Ok(())
}
