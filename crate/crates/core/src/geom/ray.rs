use super::{GeomError, UnitQuat, Vec3};

const UNIT_DIR_TOLERANCE: f64 = 1e-6;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, GeomError> {
        if !min.is_finite() || !max.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(GeomError::InvalidBox);
        }
        Ok(Self { min, max })
    }

    pub fn centered(half_extents: Vec3) -> Result<Self, GeomError> {
        Self::new(-half_extents, half_extents)
    }
}

fn check_dir(dir: Vec3) -> Result<(), GeomError> {
    let n = dir.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_DIR_TOLERANCE {
        return Err(GeomError::InvalidDirection(n));
    }
    Ok(())
}

/// Parameter interval `[enter, exit]` over which the infinite line
/// `origin + t·dir` lies inside the sphere.
fn line_sphere(origin: Vec3, dir: Vec3, center: Vec3, radius: f64) -> Option<(f64, f64)> {
    let oc = origin - center;
    let a = dir.dot(dir);
    let b = oc.dot(dir);
    let c = oc.dot(oc) - radius * radius;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / a, (-b + sq) / a))
}

/// Slab method over the infinite line. A zero direction component outside its
/// slab yields `None`.
fn line_slab(origin: Vec3, dir: Vec3, bx: &Aabb) -> Option<(f64, f64)> {
    let mut enter = f64::NEG_INFINITY;
    let mut exit = f64::INFINITY;
    for (o, d, lo, hi) in
        [(origin.x, dir.x, bx.min.x, bx.max.x), (origin.y, dir.y, bx.min.y, bx.max.y), (origin.z, dir.z, bx.min.z, bx.max.z)]
    {
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (mut t0, mut t1) = ((lo - o) * inv, (hi - o) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        enter = enter.max(t0);
        exit = exit.min(t1);
        if enter > exit {
            return None;
        }
    }
    Some((enter, exit))
}

/// Distance along a unit ray to the first sphere contact; 0 when the origin is inside.
pub fn ray_sphere(origin: Vec3, dir: Vec3, center: Vec3, radius: f64) -> Result<Option<f64>, GeomError> {
    check_dir(dir)?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeomError::InvalidRadius(radius));
    }
    if !origin.is_finite() || !center.is_finite() {
        return Err(GeomError::NonFinite);
    }
    Ok(line_sphere(origin, dir, center, radius).and_then(|(t0, t1)| (t1 >= 0.0).then(|| t0.max(0.0))))
}

/// Entry distance along a unit ray into the box; 0 when the origin is inside.
pub fn ray_aabb(origin: Vec3, dir: Vec3, bx: &Aabb) -> Result<Option<f64>, GeomError> {
    check_dir(dir)?;
    if bx.min.x > bx.max.x || bx.min.y > bx.max.y || bx.min.z > bx.max.z {
        return Err(GeomError::InvalidBox);
    }
    if !origin.is_finite() {
        return Err(GeomError::NonFinite);
    }
    Ok(line_slab(origin, dir, bx).and_then(|(t0, t1)| (t1 >= 0.0).then(|| t0.max(0.0))))
}

/// Closed interval of segment parameters `t ∈ [0, len]` (unit `dir`) inside a
/// sphere, if any.
pub fn segment_sphere_interval(origin: Vec3, dir: Vec3, len: f64, center: Vec3, radius: f64) -> Option<(f64, f64)> {
    let (t0, t1) = line_sphere(origin, dir, center, radius)?;
    clip(t0, t1, len)
}

/// As [`segment_sphere_interval`] for a box with the given center, orientation
/// and half extents.
pub fn segment_box_interval(
    origin: Vec3,
    dir: Vec3,
    len: f64,
    center: Vec3,
    orientation: UnitQuat,
    half_extents: Vec3,
) -> Option<(f64, f64)> {
    let inv = orientation.conjugate();
    let local_origin = inv.rotate(origin - center);
    let local_dir = inv.rotate(dir);
    let bx = Aabb { min: -half_extents, max: half_extents };
    let (t0, t1) = line_slab(local_origin, local_dir, &bx)?;
    clip(t0, t1, len)
}

fn clip(t0: f64, t1: f64, len: f64) -> Option<(f64, f64)> {
    let (a, b) = (t0.max(0.0), t1.min(len));
    (a <= b).then_some((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sphere_examples() {
        let hit = ray_sphere(Vec3::new(0.0, 1.6, 0.0), Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 1.6, -2.0), 0.15).unwrap();
        assert_abs_diff_eq!(hit.unwrap(), 1.85, epsilon = 1e-12);
        let away = ray_sphere(Vec3::new(0.0, 1.6, 0.0), Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 1.6, -2.0), 0.15).unwrap();
        assert_eq!(away, None);
        let inside = ray_sphere(Vec3::new(0.0, 1.6, -2.05), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.6, -2.0), 0.15).unwrap();
        assert_eq!(inside, Some(0.0));
    }

    #[test]
    fn sphere_errors() {
        assert!(matches!(ray_sphere(Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0), Vec3::ZERO, 1.0), Err(GeomError::InvalidDirection(_))));
        assert!(matches!(ray_sphere(Vec3::ZERO, Vec3::UP, Vec3::ZERO, 0.0), Err(GeomError::InvalidRadius(_))));
    }

    #[test]
    fn aabb_examples() {
        let bx = Aabb::centered(Vec3::new(0.5, 0.5, 0.5)).unwrap();
        let hit = ray_aabb(Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, -1.0), &bx).unwrap();
        assert_abs_diff_eq!(hit.unwrap(), 1.5, epsilon = 1e-15);
        // parallel to the x slab and outside it
        assert_eq!(ray_aabb(Vec3::new(0.7, 0.0, 2.0), Vec3::new(0.0, 0.0, -1.0), &bx).unwrap(), None);
        assert_eq!(ray_aabb(Vec3::new(0.1, -0.2, 0.3), Vec3::new(1.0, 0.0, 0.0), &bx).unwrap(), Some(0.0));
        // box behind the origin
        assert_eq!(ray_aabb(Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, 1.0), &bx).unwrap(), None);
    }

    #[test]
    fn invalid_box() {
        assert_eq!(Aabb::new(Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO), Err(GeomError::InvalidBox));
        let bad = Aabb { min: Vec3::new(1.0, 0.0, 0.0), max: Vec3::ZERO };
        assert_eq!(ray_aabb(Vec3::ZERO, Vec3::UP, &bad), Err(GeomError::InvalidBox));
    }

    #[test]
    fn rotated_box_interval() {
        // a thin slab yawed 90°: its long axis now runs along z
        let q = UnitQuat::from_yaw(std::f64::consts::FRAC_PI_2);
        let half = Vec3::new(1.0, 0.5, 0.1);
        let hit = segment_box_interval(Vec3::new(-2.0, 0.0, 0.9), Vec3::new(1.0, 0.0, 0.0), 4.0, Vec3::ZERO, q, half);
        let (a, b) = hit.unwrap();
        assert_abs_diff_eq!(a, 1.9, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 2.1, epsilon = 1e-12);
    }
}
