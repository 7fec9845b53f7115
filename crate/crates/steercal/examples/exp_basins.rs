// temporary: basin landing distribution on one scene across many inits
use nalgebra::Vector3;
use rayon::prelude::*;
use steercal::calib::{calibrate_pair, CalibConfig, CalibError, PairObservations, TwoViewResult};
use steercal::metrics::{rotation_error_deg, translation_error_deg};
use steercal::steerer::checkpoint::load;
use steercal::synth::{render_scene, SceneConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let scene_seed: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let fpi: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(6);
    let iters: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(350);
    let ckpt = load(std::path::Path::new("/tmp/fixture.sckp")).unwrap();
    let scene = render_scene(&SceneConfig {
        n_views: 2, n_instances: 4, n_frames: 6, noise_px_std: 3.0,
        camera_azimuths_deg: vec![0.0, 70.0], seed: scene_seed,
        ..SceneConfig::default()
    });
    let obs = PairObservations {
        frames: scene.frames.iter().map(|f| (
            f.views[0].iter().map(|d| d.pose_px.clone()).collect(),
            f.views[1].iter().map(|d| d.pose_px.clone()).collect(),
        )).collect(),
        intrinsics_a: scene.cameras[0].intrinsics,
        intrinsics_b: scene.cameras[1].intrinsics,
    };
    let gt = scene.gt_relative(0, 1);
    let lines: Vec<String> = (0..10u64).into_par_iter().map(|cseed| {
        let dummy: f64 = std::env::args().nth(4).map(|s| s.parse().unwrap()).unwrap_or(0.1);
        let config = CalibConfig {
            n_iterations: iters, max_attempts: 1, n_frame_pairs: [6, 6],
            frames_per_iteration: if fpi >= 6 { None } else { Some(fpi) },
            plateau_tolerance: 1e-4, seed: cseed, dummy_score: dummy,
            ..CalibConfig::default()
        };
        let outcome = calibrate_pair(&obs, &ckpt.params, &scene.skeleton, &config);
        let (r, ok): (TwoViewResult, bool) = match outcome {
            Ok(r) => (r, true),
            Err(CalibError::CalibrationFailed { best, .. }) => (*best, false),
            Err(e) => panic!("{e}"),
        };
        let e_r = rotation_error_deg(&r.relative_pose.rotation, &gt.rotation);
        let e_t = translation_error_deg(&Vector3::from(r.relative_pose.translation), &Vector3::from(gt.translation)).unwrap_or(180.0);
        let (lm_first, _) = r.loss_trace.first().copied().unwrap_or((0.0,0.0));
        let (lm_last, lg_last) = r.loss_trace.last().copied().unwrap_or((0.0,0.0));
        format!("init {cseed}: ok={ok} E_R={e_r:7.2} E_t={e_t:7.2} Lm {lm_first:.3}->{lm_last:.3} Lg {lg_last:.4} iters={} reproj={:.2}", r.loss_trace.len(), r.median_reproj_px)
    }).collect();
    for l in lines { println!("{l}"); }
}
