// Recover a device-to-shared transform from noisy anchor pairs.

use decoupled_hands::geom::{apply_calibration, solve_yaw_calibration, AnchorPair, Pose, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (yaw, t) = (37f64.to_radians(), Vec3::new(1.0, 0.0, -2.0));
    let truth = |p: Vec3| {
        let (s, c) = yaw.sin_cos();
        Vec3::new(p.x * c + p.z * s, p.y, -p.x * s + p.z * c) + t
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<AnchorPair> = (0..10)
        .map(|_| {
            let local = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0), rng.gen_range(-1.0..1.0));
            let noise = Vec3::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01));
            AnchorPair::new(local, truth(local) + noise)
        })
        .collect();

    let xf = solve_yaw_calibration(&pairs)?;
    println!("yaw {:.3}° (true 37°), translation {:?}", xf.yaw().to_degrees(), xf.translation.to_array());
    println!("rms residual {:.4} m", xf.residual_rms(&pairs));

    let head = Pose::at(Vec3::new(0.3, 1.7, 0.4));
    let shared = apply_calibration(&xf, head);
    println!("head {:?} -> shared {:?}", head.position.to_array(), shared.position.to_array());

    let degenerate =
        [AnchorPair::new(Vec3::new(0.0, 0.0, 0.0), Vec3::ZERO), AnchorPair::new(Vec3::new(0.0, 1.0, 0.0), Vec3::ZERO)];
    println!("vertical-only anchors: {}", solve_yaw_calibration(&degenerate).unwrap_err());
    Ok(())
}
