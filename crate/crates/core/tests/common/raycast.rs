use rubble_forge::geometry::Vec3;
use rubble_forge::sensors::CameraIntrinsics;

/// Independent pinhole oracle: camera basis from eye/target, rays through
/// pixel centers, slab intersection with an axis-aligned box.
pub fn analytic_depth(eye: Vec3, target: Vec3, k: &CameraIntrinsics, lo: Vec3, hi: Vec3) -> Vec<Option<f64>> {
    let fwd = (target - eye) * (1.0 / (target - eye).norm());
    let right = fwd.cross(Vec3::Y);
    let right = right * (1.0 / right.norm());
    let up = right.cross(fwd);
    let tan_h = (k.horizontal_fov / 2.0).tan();
    let tan_v = tan_h * k.height as f64 / k.width as f64;
    let mut out = Vec::new();
    for v in 0..k.height {
        for u in 0..k.width {
            let x = (2.0 * (u as f64 + 0.5) / k.width as f64 - 1.0) * tan_h;
            let y = (1.0 - 2.0 * (v as f64 + 0.5) / k.height as f64) * tan_v;
            let d = fwd + right * x + up * y;
            let d = d * (1.0 / d.norm());
            let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
            for a in 0..3 {
                let (o, dir, l, h) = (eye.component(a), d.component(a), lo.component(a), hi.component(a));
                if dir.abs() < 1e-15 {
                    if o < l || o > h {
                        t0 = f64::INFINITY;
                    }
                    continue;
                }
                let (ta, tb) = ((l - o) / dir, (h - o) / dir);
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
            let axial = d.dot(fwd);
            out.push((t0 <= t1 && t0 > 0.0).then_some(t0 * axial).filter(|z| *z >= k.near && *z <= k.far));
        }
    }
    out
}
