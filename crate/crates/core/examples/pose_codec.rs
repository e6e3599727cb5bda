//! Encodes angles into (bin, offset) pairs and decodes a one-hot head back
//! into a pose.
//!
//! cargo run --example pose_codec

use std::f64::consts::PI;

use posecontrast::geometry::{decode_head, encode_angle, AngleHeadOutput, AngleKind, PoseLabel};

fn main() -> posecontrast::Result<()> {
    println!("{:<10} {:>12} {:>5} {:>8} {:>12}", "kind", "angle_deg", "bin", "offset", "decoded_deg");
    let samples = [
        (AngleKind::Azimuth, 0.3),
        (AngleKind::Azimuth, -PI),
        (AngleKind::Azimuth, PI),
        (AngleKind::Elevation, PI / 2.0),
        (AngleKind::Elevation, -PI / 2.0),
        (AngleKind::Inplane, -0.2),
    ];
    for (kind, theta) in samples {
        let code = encode_angle(theta, kind);
        println!(
            "{:<10} {:>12.4} {:>5} {:>8.4} {:>12.4}",
            format!("{kind:?}"),
            theta.to_degrees(),
            code.bin,
            code.offset,
            code.decode().to_degrees()
        );
    }

    let pose = PoseLabel::from_degrees(123.0, -20.0, 7.5)?;
    let decoded = decode_head(&AngleHeadOutput::one_hot(&pose));
    println!("pose {:?} -> one-hot head -> {:?}", pose.to_degrees(), decoded.to_degrees());
    Ok(())
}
