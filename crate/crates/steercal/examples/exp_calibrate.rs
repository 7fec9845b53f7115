// temporary experiment: two-view calibration quality with the cached fixture
use nalgebra::Vector3;
use rayon::prelude::*;
use steercal::calib::{calibrate_pair, CalibConfig, CalibError, PairObservations, TwoViewResult};
use steercal::matching::MatchSet;
use steercal::metrics::{rotation_error_deg, translation_error_deg};
use steercal::steerer::checkpoint::load;
use steercal::synth::{render_scene, SceneConfig, SyntheticScene};

fn observations(scene: &SyntheticScene) -> PairObservations {
    PairObservations {
        frames: scene
            .frames
            .iter()
            .map(|f| {
                (
                    f.views[0].iter().map(|d| d.pose_px.clone()).collect(),
                    f.views[1].iter().map(|d| d.pose_px.clone()).collect(),
                )
            })
            .collect(),
        intrinsics_a: scene.cameras[0].intrinsics,
        intrinsics_b: scene.cameras[1].intrinsics,
    }
}

fn precision(scene: &SyntheticScene, matches: &[MatchSet], frame_indices: &[usize]) -> Option<f64> {
    let mut predicted = 0;
    let mut correct = 0;
    for (m, &fi) in matches.iter().zip(frame_indices) {
        let f = &scene.frames[fi];
        for &(ia, ib, _) in &m.pairs {
            predicted += 1;
            if f.views[0][ia].gt_instance == f.views[1][ib].gt_instance {
                correct += 1;
            }
        }
    }
    (predicted > 0).then(|| correct as f64 / predicted as f64)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_seeds: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(6);
    let n_iters: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(350);
    let lambda: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let attempts: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(3);
    let n_frames: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(6);

    let ckpt = load(std::path::Path::new("/tmp/fixture.sckp")).unwrap();
    let results: Vec<String> = (0..n_seeds)
        .into_par_iter()
        .map(|seed| {
            let scene = render_scene(&SceneConfig {
                n_views: 2,
                n_instances: 4,
                n_frames,
                noise_px_std: 3.0,
                camera_azimuths_deg: vec![0.0, 70.0],
                seed: 1000 + seed,
                ..SceneConfig::default()
            });
            let obs = observations(&scene);
            let config = CalibConfig {
                n_iterations: n_iters,
                max_attempts: attempts,
                n_frame_pairs: [n_frames, n_frames],
                lambda_geom: lambda,
                frames_per_iteration: Some(2),
                plateau_tolerance: 1e-4,
                dummy_score: 0.02,
                solvability_threshold: 0.5,
                seed,
                ..CalibConfig::default()
            };
            let t0 = std::time::Instant::now();
            let outcome = calibrate_pair(&obs, &ckpt.params, &scene.skeleton, &config);
            let elapsed = t0.elapsed().as_secs_f64();
            let (result, ok): (TwoViewResult, bool) = match outcome {
                Ok(r) => (r, true),
                Err(CalibError::CalibrationFailed { best, .. }) => (*best, false),
                Err(e) => panic!("{e}"),
            };
            let gt = scene.gt_relative(0, 1);
            let e_r = rotation_error_deg(&result.relative_pose.rotation, &gt.rotation);
            let e_t = translation_error_deg(
                &Vector3::from(result.relative_pose.translation),
                &Vector3::from(gt.translation),
            )
            .unwrap_or(180.0);
            let p = precision(&scene, &result.matches, &result.frame_indices);
            format!(
                "seed {seed}: ok={ok} attempts={} E_R={e_r:6.2} E_t={e_t:6.2} prec={:.2} reproj={:6.2}px {elapsed:.0}s",
                result.attempts_used,
                p.unwrap_or(-1.0),
                result.median_reproj_px,
            )
        })
        .collect();
    for line in results {
        println!("{line}");
    }
}
