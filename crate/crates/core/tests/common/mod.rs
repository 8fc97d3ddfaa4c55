use memscal::{Primitive, ScanPattern, Scene};

/// Back plane at z = 12 m with two boxes floating in front of it. Box edges
/// give the vertical gradient enough structure to pin (m, k) uniquely.
pub fn plane_and_boxes_scene() -> Scene {
    Scene::new(
        vec![
            Primitive::Plane {
                normal: [0.0, 0.0, 1.0],
                offset: 12.0,
            },
            Primitive::AxisAlignedBox {
                min: [-1.5, -1.0, 5.0],
                max: [-0.3, 0.5, 7.0],
            },
            Primitive::AxisAlignedBox {
                min: [0.5, -0.8, 7.0],
                max: [1.8, 1.2, 9.0],
            },
        ],
        None,
    )
    .unwrap()
}

/// Small serpentine raster for fast tests: 16 rows x 40 design pulses.
pub fn small_pattern() -> ScanPattern {
    ScanPattern::new(
        16,
        40,
        (-0.35, 0.35),
        (-0.25, 0.25),
        1e-6,
        true,
        16.0 * 40.0 * 1e-6,
    )
    .unwrap()
}
