use orbitforge::geometry::{project, resolve_scene, CameraIntrinsics, ScenePose, UnitQuaternion, Vec3};
use orbitforge::render::{derive_labels, render, DepthMap, RenderSettings, TriangleMesh, MASK_ON};
use proptest::prelude::*;

fn quat() -> impl Strategy<Value = UnitQuaternion> {
    prop::array::uniform4(-1.0..1.0f64)
        .prop_filter_map("degenerate", |[w, x, y, z]| UnitQuaternion::new(w, x, y, z).ok())
}

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    vec3(1.0).prop_filter_map("zero", |v| v.try_normalize())
}

fn pose() -> impl Strategy<Value = ScenePose> {
    (vec3(100.0), 0.5..200.0f64, 0.0..=1.0f64, 0.0..=1.0f64, quat(), quat(), unit()).prop_map(
        |(position, distance, ox, oy, target_orientation, background_orientation, lighting_direction)| ScenePose {
            position,
            distance,
            offset: [ox, oy],
            target_orientation,
            background_orientation,
            lighting_direction,
        },
    )
}

fn camera() -> impl Strategy<Value = CameraIntrinsics> {
    (8u32..640, 8u32..480, 10.0..120.0f64)
        .prop_map(|(w, h, fov)| CameraIntrinsics::new(w, h, fov.to_radians()).unwrap())
}

proptest! {
    #[test]
    fn resolved_camera_sits_at_range_and_sees_origin_at_offset(p in pose(), cam in camera()) {
        let scene = resolve_scene(&p, &cam).unwrap();
        let range = (scene.camera_position - scene.target_position).norm();
        prop_assert!((range - p.distance).abs() <= 1e-6, "{range} vs {}", p.distance);
        let px = project(scene.target_position, &scene, &cam).unwrap();
        prop_assert!((px.u - p.offset[0] * cam.width_px as f64).abs() <= 1e-6);
        prop_assert!((px.v - p.offset[1] * cam.height_px as f64).abs() <= 1e-6);
    }

    #[test]
    fn target_attitude_in_camera_frame_round_trips(p in pose(), cam in camera()) {
        let scene = resolve_scene(&p, &cam).unwrap();
        prop_assert!(scene.target_orientation_camera().same_rotation(&p.target_orientation, 1e-9));
        let sun = scene.sun_direction_camera();
        prop_assert!((sun - p.lighting_direction).norm() < 1e-9);
    }

    #[test]
    fn rotation_algebra(a in quat(), b in quat(), v in vec3(10.0)) {
        prop_assert!((a.rotate(v).norm() - v.norm()).abs() < 1e-9);
        let composed = a.multiply(&b).rotate(v);
        prop_assert!((composed - a.rotate(b.rotate(v))).norm() < 1e-9);
        let m = a.to_matrix();
        let mv = Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        );
        prop_assert!((mv - a.rotate(v)).norm() < 1e-9);
        prop_assert!(a.negated().same_rotation(&a, 0.0));
        let json = serde_json::to_string(&a).unwrap();
        let back: UnitQuaternion = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.to_array(), a.to_array());
    }

    #[test]
    fn slerp_is_unit_and_angle_linear(a in quat(), b in quat(), t in 0.0..=1.0f64) {
        prop_assert!(a.slerp(&b, 0.0).unwrap().same_rotation(&a, 1e-12));
        prop_assert!(a.slerp(&b, 1.0).unwrap().same_rotation(&b, 1e-12));
        let q = a.slerp(&b, t).unwrap();
        prop_assert!((q.norm() - 1.0).abs() < 1e-12);
        let total = a.angle_to(&b);
        prop_assert!((a.angle_to(&q) - t * total).abs() < 1e-6, "{} vs {}", a.angle_to(&q), t * total);
    }

    #[test]
    fn render_rasters_agree(p in pose(), w in 8u32..96, h in 8u32..96) {
        let cam = CameraIntrinsics::new(w, h, 50f64.to_radians()).unwrap();
        let mut p = p;
        p.distance = p.distance.min(12.0);
        let mesh = TriangleMesh::cuboid(Vec3::new(-0.7, -0.5, -0.3), Vec3::new(0.7, 0.5, 0.3));
        let scene = resolve_scene(&p, &cam).unwrap();
        let out = render(&mesh, &scene, &cam, &RenderSettings::default()).unwrap();
        let mut box_ = None::<[u32; 4]>;
        for y in 0..h {
            for x in 0..w {
                let on = out.mask.get_pixel(x, y).0[0] == MASK_ON;
                let d = out.depth.get(x, y);
                prop_assert_eq!(on, d > 0.0, "pixel {},{}", x, y);
                prop_assert!(out.mask.get_pixel(x, y).0[0] == 0 || on);
                if on {
                    let b = box_.get_or_insert([x, y, x, y]);
                    *b = [b[0].min(x), b[1].min(y), b[2].max(x), b[3].max(y)];
                }
            }
        }
        let labels = derive_labels(&out, &scene, &cam, &[]);
        prop_assert_eq!(labels.bbox, box_);
        let bytes = out.depth.to_bytes();
        prop_assert_eq!(DepthMap::from_bytes(&bytes).unwrap(), out.depth);
    }
}
