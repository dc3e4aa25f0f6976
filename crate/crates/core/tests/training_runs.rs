use textsr::imaging::{generate_synthetic_images, SynthConfig};
use textsr::network::{load_checkpoint, DEFAULT_WEIGHT_STD};
use textsr::training::{
    train, validation_psnr, write_convergence_csv, ImagePair, TrainConfig, WindowedImages,
};
use textsr::metrics::BorderMode;
use textsr::parse_spec;

fn corpus(count: usize, seed: u64) -> Vec<ImagePair> {
    let cfg = SynthConfig { count, seed, ..Default::default() };
    generate_synthetic_images(&cfg)
        .unwrap()
        .iter()
        .map(|s| ImagePair::from_images(&s.id, &s.hr, &s.lr).unwrap())
        .collect()
}

fn small_config(seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(parse_spec("8(5)-4(3)-1(3)").unwrap());
    c.seed = seed;
    c.batch_size = 8;
    c.max_iterations = 60;
    c.eval_every = 20;
    c.checkpoint_every = 30;
    c.weight_std = 0.05;
    c.lr_other = 0.05;
    c.lr_last = 0.005;
    c.momentum = 0.9;
    c
}

#[test]
fn published_defaults_are_the_config_defaults() {
    let c = TrainConfig::new(parse_spec("64(9)-32(7)-1(5)").unwrap());
    assert_eq!(c.lr_last, 1e-5);
    assert_eq!(c.lr_other, 1e-4);
    assert_eq!(c.weight_std, DEFAULT_WEIGHT_STD);
    assert_eq!(c.momentum, 0.0);
}

#[test]
fn tiny_run_lowers_training_loss() {
    let images = corpus(12, 3);
    let (val, tr) = images.split_at(3);
    let cfg = small_config(1);
    let src = WindowedImages::new(tr.to_vec(), &cfg.spec).unwrap();
    let out = train(&cfg, &src, val, None).unwrap();
    assert_eq!(out.records.len(), 3);
    let first = out.records.first().unwrap().train_mse;
    let last = out.records.last().unwrap().train_mse;
    assert!(last < first, "loss went from {first} to {last}");
    assert!(out.records.iter().all(|r| r.val_psnr.is_some()));
}

#[test]
fn identical_runs_are_bit_identical() {
    let images = corpus(8, 5);
    let (val, tr) = images.split_at(2);
    let cfg = small_config(4);
    let src = WindowedImages::new(tr.to_vec(), &cfg.spec).unwrap();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = train(&cfg, &src, val, Some(dir.path())).unwrap();
        let mut csv = Vec::new();
        write_convergence_csv(&out.records, &mut csv).unwrap();
        let ckpts: Vec<Vec<u8>> = out.checkpoints.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(ckpts.len(), 2);
        outputs.push((csv, ckpts));
    }
    assert_eq!(outputs[0], outputs[1]);

    let mut other = cfg.clone();
    other.seed = 5;
    let out = train(&other, &src, val, None).unwrap();
    let mut csv = Vec::new();
    write_convergence_csv(&out.records, &mut csv).unwrap();
    assert_ne!(csv, outputs[0].0);
}

#[test]
fn checkpoint_round_trip_preserves_inference() {
    let images = corpus(6, 8);
    let (val, tr) = images.split_at(2);
    let cfg = small_config(2);
    let src = WindowedImages::new(tr.to_vec(), &cfg.spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = train(&cfg, &src, val, Some(dir.path())).unwrap();
    let last = load_checkpoint(out.checkpoints.last().unwrap()).unwrap();
    assert_eq!(last.iteration, 60);
    for im in val {
        assert_eq!(
            last.network.predict_image(&im.lr_upscaled).unwrap(),
            out.network.predict_image(&im.lr_upscaled).unwrap()
        );
    }
    assert_eq!(
        validation_psnr(&last.network, val, BorderMode::Keep).unwrap(),
        validation_psnr(&out.network, val, BorderMode::Keep).unwrap()
    );
}
