//! Acceptance suite: one test per release criterion, each printing a
//! PASS line. Run with `cargo test -p memscal-cli --test acceptance -- --nocapture`.

use std::fs;
use std::time::Instant;

use rand::{Rng, SeedableRng};

use memscal::{
    calibrate_frame, cartesian_to_polar, mvg_cost, polar_to_cartesian, ray_range, reshape_frame,
    simulate_frames, track_offsets, MisalignmentSpec, NoiseSpec, PolarPoint, Primitive,
    RangeStream, ScanPattern, Scene, SearchSpec,
};

const BACK_PLANE_Z: f64 = 12.0;
const DELTA_T: f64 = 1e-6;

/// Back plane at z = 12 m with two boxes in front; the box edges pin the
/// registration uniquely.
fn fixture_scene() -> Scene {
    Scene::new(
        vec![
            Primitive::Plane {
                normal: [0.0, 0.0, 1.0],
                offset: BACK_PLANE_Z,
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

/// Boxes only, used to label which design rays see the back plane.
fn boxes_only_scene() -> Scene {
    Scene::new(
        vec![
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

/// Full-scale raster: 64 rows of 450 design pulses, serpentine.
fn fixture_pattern() -> ScanPattern {
    ScanPattern::new(
        64,
        450,
        (-0.35, 0.35),
        (-0.25, 0.25),
        DELTA_T,
        true,
        64.0 * 450.0 * DELTA_T,
    )
    .unwrap()
}

fn fixture_misalignment() -> MisalignmentSpec {
    MisalignmentSpec::new(37, 0.0, 452).unwrap()
}

fn fixture_search() -> SearchSpec {
    // 50 x 11 grid.
    SearchSpec::new((0, 49), (445, 455), 64, 0.05).unwrap()
}

fn mean_range(stream: &RangeStream) -> f64 {
    let values: Vec<f64> = stream.frames.iter().flatten().flatten().copied().collect();
    values.iter().sum::<f64>() / values.len() as f64
}

fn noiseless_fixture_stream() -> RangeStream {
    simulate_frames(
        &fixture_scene(),
        &fixture_pattern(),
        &fixture_misalignment(),
        &NoiseSpec::none(),
        1,
    )
    .unwrap()
}

#[test]
fn criterion_1_exact_recovery() {
    let pattern = fixture_pattern();
    let stream = noiseless_fixture_stream();

    let start = Instant::now();
    let result = calibrate_frame(&stream.frames[0], &fixture_search(), &pattern).unwrap();
    let elapsed = start.elapsed();

    assert_eq!((result.m_star, result.k_star), (37, 452));
    assert_eq!(result.t_s, 37.0 * DELTA_T);
    assert!(!result.degenerate);
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "search took {elapsed:?}, budget 10 s"
    );
    println!(
        "[acceptance] criterion 1 (exact recovery of m=37, k=452 in {elapsed:?}): PASS"
    );
}

#[test]
fn criterion_2_noise_robustness() {
    let pattern = fixture_pattern();
    let scene = fixture_scene();
    let spec = fixture_misalignment();
    let search = fixture_search();
    let sigma = 0.02 * mean_range(&noiseless_fixture_stream());

    let mut exact = 0usize;
    for seed in 0..50u64 {
        let noise = NoiseSpec::new(sigma, 0.01, seed).unwrap();
        let stream = simulate_frames(&scene, &pattern, &spec, &noise, 1).unwrap();
        let result = calibrate_frame(&stream.frames[0], &search, &pattern).unwrap();
        if (result.m_star, result.k_star) == (37, 452) {
            exact += 1;
        }
    }
    assert!(exact >= 49, "exact recovery in only {exact}/50 trials");
    println!(
        "[acceptance] criterion 2 (noise robustness, sigma={sigma:.3} m, 1% dropout: {exact}/50 exact): PASS"
    );
}

/// Drift fixture keeps the accumulated offset below one row (m stays
/// identifiable): 8 rows of 400 pulses, offset reaching round(5 + 3.4*99) = 342.
fn drift_pattern() -> ScanPattern {
    ScanPattern::new(
        8,
        400,
        (-0.35, 0.35),
        (-0.25, 0.25),
        DELTA_T,
        true,
        8.0 * 400.0 * DELTA_T,
    )
    .unwrap()
}

#[test]
fn criterion_3_sub_pulse_drift() {
    let pattern = drift_pattern();
    let scene = fixture_scene();
    let spec = MisalignmentSpec::new(5, 3.4, 400).unwrap();
    let search = SearchSpec::new((0, 380), (398, 402), 64, 0.05).unwrap();

    let stream = simulate_frames(&scene, &pattern, &spec, &NoiseSpec::none(), 100).unwrap();
    let drift = track_offsets(&stream, &search, &pattern).unwrap();
    let err = (drift.t_e - 3.4 * DELTA_T).abs();
    assert!(
        err < 0.1 * DELTA_T,
        "noiseless t_e off by {} pulses",
        err / DELTA_T
    );

    let sigma = 0.02 * mean_range(&stream);
    let noise = NoiseSpec::new(sigma, 0.01, 7).unwrap();
    let noisy = simulate_frames(&scene, &pattern, &spec, &noise, 100).unwrap();
    let noisy_drift = track_offsets(&noisy, &search, &pattern).unwrap();
    let noisy_err = (noisy_drift.t_e - 3.4 * DELTA_T).abs();
    assert!(
        noisy_err < 0.25 * DELTA_T,
        "noisy t_e off by {} pulses",
        noisy_err / DELTA_T
    );
    println!(
        "[acceptance] criterion 3 (sub-pulse T_e: noiseless err {:.4} dT, noisy err {:.4} dT): PASS",
        err / DELTA_T,
        noisy_err / DELTA_T
    );
}

/// RMS of (z - back plane) over grid cells whose design ray misses both
/// boxes, reconstructing under hypothesis (m, k).
fn plane_rms(frame: &[Option<f64>], m: usize, k: usize, pattern: &ScanPattern) -> f64 {
    let boxes = boxes_only_scene();
    let grid = reshape_frame(frame, m, k, pattern.serpentine).unwrap();
    let mut squared = Vec::new();
    for row in 0..grid.rows().min(pattern.rows) {
        let phi = pattern.row_phi(row);
        for col in 0..grid.cols() {
            let theta = pattern.col_theta(k, col);
            if ray_range(&boxes, theta, phi).is_some() {
                continue;
            }
            if let Some(range) = grid.get(row, col) {
                let point = polar_to_cartesian(&PolarPoint { theta, phi, range }).unwrap();
                squared.push((point.z - BACK_PLANE_Z).powi(2));
            }
        }
    }
    (squared.iter().sum::<f64>() / squared.len() as f64).sqrt()
}

#[test]
fn criterion_4_cost_and_residual_improvement() {
    let pattern = fixture_pattern();
    let stream = noiseless_fixture_stream();
    let frame = &stream.frames[0];
    let result = calibrate_frame(frame, &fixture_search(), &pattern).unwrap();

    let recovered_cost = result
        .cost_surface
        .cost_at(result.m_star, result.k_star)
        .unwrap();
    let naive_cost = result.cost_surface.cost_at(0, pattern.k_design).unwrap();
    assert!(
        recovered_cost < naive_cost,
        "recovered {recovered_cost} !< naive {naive_cost}"
    );

    let calibrated_rms = plane_rms(frame, result.m_star, result.k_star, &pattern);
    let naive_rms = plane_rms(frame, 0, pattern.k_design, &pattern);
    assert!(calibrated_rms < 5e-3, "calibrated RMS {calibrated_rms} m");
    assert!(naive_rms > 0.5, "uncalibrated RMS {naive_rms} m");
    println!(
        "[acceptance] criterion 4 (cost {recovered_cost:.4} < {naive_cost:.4}; plane RMS {calibrated_rms:.2e} m vs {naive_rms:.2} m): PASS"
    );
}

#[test]
fn criterion_5_geometry_exactness() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1_000_000 {
        let p = PolarPoint {
            theta: rng.random_range(-1.4..1.4),
            phi: rng.random_range(-1.4..1.4),
            range: rng.random_range(1e-3..1e4),
        };
        let c = polar_to_cartesian(&p).unwrap();
        let norm = (c.x * c.x + c.y * c.y + c.z * c.z).sqrt();
        assert!((norm - p.range).abs() <= 1e-9 * p.range, "{p:?}");
        let back = cartesian_to_polar(&c).unwrap();
        assert!((back.theta - p.theta).abs() <= 1e-9 * p.theta.abs().max(1.0));
        assert!((back.phi - p.phi).abs() <= 1e-9 * p.phi.abs().max(1.0));
        assert!((back.range - p.range).abs() <= 1e-9 * p.range);
    }
    println!("[acceptance] criterion 5 (1e6 random points: norm + round trip within 1e-9): PASS");
}

#[test]
fn criterion_6_drift_hand_oracle() {
    // Build frames whose per-frame calibration recovers exactly the offsets
    // [0, 3, 7, 10, 14]: each frame is the aligned noiseless content
    // left-padded with that many invalid pulses.
    let pattern = ScanPattern::new(
        16,
        40,
        (-0.35, 0.35),
        (-0.25, 0.25),
        DELTA_T,
        true,
        16.0 * 40.0 * DELTA_T,
    )
    .unwrap();
    let aligned = simulate_frames(
        &fixture_scene(),
        &pattern,
        &MisalignmentSpec::aligned(&pattern),
        &NoiseSpec::none(),
        1,
    )
    .unwrap();
    let base = &aligned.frames[0];
    let offsets = [0usize, 3, 7, 10, 14];
    let frames: Vec<Vec<Option<f64>>> = offsets
        .iter()
        .map(|&m| {
            let mut frame: Vec<Option<f64>> = vec![None; m];
            frame.extend_from_slice(&base[..base.len() - m]);
            frame
        })
        .collect();
    let stream = RangeStream::new(frames, pattern.pulses_per_frame(), DELTA_T).unwrap();

    let search = SearchSpec::new((0, 20), (40, 40), 16, 0.05).unwrap();
    let drift = track_offsets(&stream, &search, &pattern).unwrap();
    let recovered: Vec<usize> = drift.m_track.iter().map(|m| m.unwrap()).collect();
    assert_eq!(recovered, offsets);
    assert!(
        (drift.t_e - 3.5e-6).abs() < 1e-18,
        "t_e = {} s, expected 3.5e-6 s",
        drift.t_e
    );
    println!("[acceptance] criterion 6 (m_track [0,3,7,10,14] at 1 us -> t_e = 3.5 us): PASS");
}

#[test]
fn criterion_7_invariance_suite() {
    let pattern = fixture_pattern();
    let stream = noiseless_fixture_stream();
    let frame = &stream.frames[0];

    // Constant-offset invariance of J.
    let grid = reshape_frame(frame, 37, 452, true).unwrap();
    let (j, pairs) = mvg_cost(&grid).unwrap();
    let shifted: Vec<Option<f64>> = frame.iter().map(|r| r.map(|v| v + 123.456)).collect();
    let shifted_grid = reshape_frame(&shifted, 37, 452, true).unwrap();
    let (j_shifted, pairs_shifted) = mvg_cost(&shifted_grid).unwrap();
    assert_eq!(pairs, pairs_shifted);
    assert!((j - j_shifted).abs() <= 1e-9 * j.max(1.0));

    // Positive-scaling invariance of the argmin.
    let search = fixture_search();
    let base = calibrate_frame(frame, &search, &pattern).unwrap();
    let scaled: Vec<Option<f64>> = frame.iter().map(|r| r.map(|v| v * 7.25)).collect();
    let scaled_result = calibrate_frame(&scaled, &search, &pattern).unwrap();
    assert_eq!(
        (scaled_result.m_star, scaled_result.k_star),
        (base.m_star, base.k_star)
    );

    // Serpentine row-reversal regression: on a tilted plane the aligned cost
    // without reversal is strictly higher.
    let tilt = {
        let n = [0.3_f64, 0.0, 1.0];
        let len = (n[0] * n[0] + n[2] * n[2]).sqrt();
        [n[0] / len, n[1] / len, n[2] / len]
    };
    let tilted = Scene::new(
        vec![Primitive::Plane {
            normal: tilt,
            offset: 10.0,
        }],
        None,
    )
    .unwrap();
    let tilted_stream = simulate_frames(
        &tilted,
        &pattern,
        &MisalignmentSpec::aligned(&pattern),
        &NoiseSpec::none(),
        1,
    )
    .unwrap();
    let with_reversal = mvg_cost(
        &reshape_frame(&tilted_stream.frames[0], 0, pattern.k_design, true).unwrap(),
    )
    .unwrap()
    .0;
    let without_reversal = mvg_cost(
        &reshape_frame(&tilted_stream.frames[0], 0, pattern.k_design, false).unwrap(),
    )
    .unwrap()
    .0;
    assert!(without_reversal > with_reversal);

    // A serpentine-simulated misaligned stream still recovers (m, k).
    let serp = calibrate_frame(frame, &search, &pattern).unwrap();
    assert_eq!((serp.m_star, serp.k_star), (37, 452));

    println!("[acceptance] criterion 7 (offset/scale invariance + serpentine regression): PASS");
}

#[test]
fn criterion_8_degenerate_scene_strict_exit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scene.toml"), "background_range = 10.0\n").unwrap();
    fs::write(
        dir.path().join("run.toml"),
        r#"
scene = "scene.toml"
output = "out"

[pattern]
rows = 16
k_design = 40
theta_range = [-0.35, 0.35]
phi_range = [-0.25, 0.25]
delta_t = 1e-6
serpentine = true

[search]
m_max = 15
k_range = [36, 44]
"#,
    )
    .unwrap();

    let run = |args: &[&str]| {
        std::process::Command::new(env!("CARGO_BIN_EXE_memscal"))
            .args(args)
            .current_dir(dir.path())
            .output()
            .expect("binary runs")
    };
    let out = run(&["simulate", "--config", "run.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "calibrate",
        "--config",
        "run.toml",
        "--stream",
        "out/stream.csv",
        "--strict",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("degenerate = true"));
    println!("[acceptance] criterion 8 (constant-range scene -> degenerate, exit 3 under --strict): PASS");
}
