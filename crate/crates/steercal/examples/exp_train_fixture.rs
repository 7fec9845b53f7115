// temporary experiment: train the acceptance-quality fixture and cache it
use steercal::skeleton::quadruped_skeleton;
use steercal::steerer::checkpoint::save;
use steercal::steerer::train::{train, TrainConfig};
use steercal::steerer::SteererConfig;
use steercal::synth::*;

fn main() {
    let skeleton = quadruped_skeleton();
    let poses = procedural_quadruped_poses(100, 3);
    let cams = sample_camera_set(100, 20, RollMode::Random, 3);
    let pairs = generate_training_pairs(&poses, &cams, 6000, 3).unwrap();
    let dataset = split_dataset(pairs, [0.7, 0.2, 0.1], 3).unwrap();
    let aug = AugmentationConfig { mask_fraction_range: [0.1, 0.3], keypoint_noise_std: 0.02, noise_units: NoiseUnits::PoseCentric, rng_seed: 0 };
    let config = SteererConfig { n_joints: 16, token_dim: 32, n_encoder_layers: 5, n_attention_heads: 4, feedforward_dim: 64, dropout: 0.0 };
    let opt = TrainConfig { learning_rate: 3e-3, lr_final_factor: 0.05, batch_size: 64, max_epochs: 200, patience: 150, seed: 1 };
    let t0 = std::time::Instant::now();
    let (params, report) = train(&dataset, &config, &aug, &opt, &skeleton.hash()).unwrap();
    println!("trained: best val {:.4}, test {:.4} in {:.0}s", report.best_val_loss, report.test_loss, t0.elapsed().as_secs_f64());
    save(std::path::Path::new("/tmp/fixture.sckp"), &params, &skeleton, Some(&report), None).unwrap();
}
