// Line-of-sight queries against the terrain demo scene.

use std::collections::BTreeSet;

use decoupled_hands::geom::{world_to_canonical, Pivot, RotationOffset, Vec3};
use decoupled_hands::scene::{load_scene_file, occluded, pivot_of};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/scenes/terrain_demo.json");
    let scene = load_scene_file(path)?;
    let pivot: Pivot = pivot_of(&scene);
    println!("{} objects, pivot {:?}", scene.objects().len(), pivot.point.to_array());

    // An eye standing at azimuth 100° with the replica rotated by 100°
    // looks from the same canonical spot as one at 0° unrotated.
    let rho = RotationOffset::from_degrees(100.0);
    let a = 100f64.to_radians();
    let eye_world = Vec3::new(1.5 * a.sin(), 1.6, 1.5 * a.cos());
    let eye = world_to_canonical(eye_world, rho, pivot);
    println!("eye in canonical frame {:?}", eye.to_array());

    for target in ["hut_north", "hut_south", "beacon", "quarry"] {
        let obj = scene.object(target).unwrap();
        let ignore = BTreeSet::from([target.to_owned()]);
        match occluded(eye, obj.position(), &scene, &ignore)? {
            Some(b) => println!("{target:>10}: hidden behind {} at {:.2} m", b.id, b.distance),
            None => println!("{target:>10}: visible"),
        }
    }
    Ok(())
}
