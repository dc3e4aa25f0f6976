use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textsr::metrics::{mssim, psnr, rmse, BorderMode, Psnr, DEFAULT_PEAK};
use textsr::network::{PATCH_SIZE, TARGET_SIZE};
use textsr::training::{extract_patch_pairs, STRIDE_HORIZONTAL, STRIDE_VERTICAL};
use textsr::{init_network, parse_spec, Tensor};

fn noise(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(1, h, w, |_, _, _| rng.gen_range(0.0..1.0))
}

fn naive_window_count(h: usize, w: usize) -> usize {
    let mut n = 0;
    for r in 0..h {
        for c in 0..w {
            if r % STRIDE_VERTICAL == 0 && c % STRIDE_HORIZONTAL == 0 && r + 18 <= h && c + 18 <= w {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn patch_count_matches_formula_and_enumeration() {
    let spec = parse_spec("8(5)-4(3)-1(3)").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let h = rng.gen_range(18..60);
        let w = rng.gen_range(18..120);
        let img = noise(&mut rng, h, w);
        let got = extract_patch_pairs(&img, &img, &spec, "x").unwrap().pairs.len();
        let formula = ((h - 18) / 2 + 1) * ((w - 18) / 5 + 1);
        assert_eq!(got, formula, "{h}x{w}");
        assert_eq!(got, naive_window_count(h, w), "{h}x{w}");
    }
}

#[test]
fn predict_image_preserves_size() {
    let specs = ["8(5)-4(3)-1(3)", "4(9)-2(7)-1(5)", "4(9)-2(1)-1(5)", "3(3)-1(1)"];
    let nets: Vec<_> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| init_network(&parse_spec(s).unwrap(), 0.1, i as u64).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let h = 2 * rng.gen_range(9..=29);
        let w = rng.gen_range(2..80);
        let net = &nets[rng.gen_range(0..nets.len())];
        let out = net.predict_image(&noise(&mut rng, h, w)).unwrap();
        assert_eq!(out.shape(), (1, h, w));
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn padded_patch_gives_target_for_grid_specs() {
    let specs = [
        "64(9)-32(1)-1(5)",
        "64(9)-32(3)-1(5)",
        "64(9)-32(5)-1(5)",
        "64(9)-32(7)-1(5)",
        "128(9)-32(7)-1(5)",
        "64(9)-64(7)-1(5)",
        "64(9)-32(7)-16(1)-1(5)",
        "64(11)-32(9)-16(9)-1(5)",
    ];
    for s in specs {
        let spec = parse_spec(s).unwrap();
        assert_eq!(PATCH_SIZE + spec.training_pad().unwrap() - spec.shrink(), TARGET_SIZE, "{s}");
    }
}

#[test]
fn psnr_and_rmse_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let (h, w) = (rng.gen_range(12..40), rng.gen_range(12..40));
        let a = noise(&mut rng, h, w);
        let b = noise(&mut rng, h, w);
        for border in [BorderMode::Keep, BorderMode::Trim] {
            let r = rmse(&a, &b, border).unwrap();
            let Psnr::Db(p) = psnr(&a, &b, DEFAULT_PEAK, border).unwrap() else {
                panic!("random pair reported identical");
            };
            assert!((p - 20.0 * (DEFAULT_PEAK / r).log10()).abs() <= 1e-9);
        }
    }
}

#[test]
fn metrics_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let (h, w) = (rng.gen_range(19..40), rng.gen_range(19..40));
        let a = noise(&mut rng, h, w);
        let b = noise(&mut rng, h, w);
        for border in [BorderMode::Keep, BorderMode::Trim] {
            assert_eq!(rmse(&a, &b, border).unwrap(), rmse(&b, &a, border).unwrap());
            assert_eq!(psnr(&a, &b, 255.0, border).unwrap(), psnr(&b, &a, 255.0, border).unwrap());
            let (m1, m2) = (mssim(&a, &b, border).unwrap(), mssim(&b, &a, border).unwrap());
            assert!((m1 - m2).abs() <= 1e-12);
        }
    }
}

#[test]
fn mssim_is_one_only_for_identical_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let a = noise(&mut rng, 24, 30);
        assert!((mssim(&a, &a, BorderMode::Keep).unwrap() - 1.0).abs() <= 1e-12);
        let mut b = a.clone();
        b.data_mut()[100] = 1.0 - b.data()[100];
        let m = mssim(&a, &b, BorderMode::Keep).unwrap();
        assert!(m > 0.0 && m < 1.0);
    }
}

fn matching_borders(rng: &mut ChaCha8Rng, h: usize, w: usize) -> (Tensor, Tensor) {
    let a = noise(rng, h, w);
    let mut b = a.clone();
    for y in 4..h - 4 {
        for x in 4..w - 4 {
            b.set(0, y, x, rng.gen_range(0.0..1.0));
        }
    }
    (a, b)
}

#[test]
fn trimming_matching_borders_only_drops_zero_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let (h, w) = (rng.gen_range(20..40), rng.gen_range(20..40));
        let (a, b) = matching_borders(&mut rng, h, w);
        let inner = (h - 8) * (w - 8);
        let keep = rmse(&a, &b, BorderMode::Keep).unwrap();
        let trim = rmse(&a, &b, BorderMode::Trim).unwrap();
        let sse_keep = keep * keep * (h * w) as f64;
        let sse_trim = trim * trim * inner as f64;
        assert!((sse_keep - sse_trim).abs() <= 1e-6 * sse_keep.max(1.0));
        let identical = a.clone();
        assert_eq!(rmse(&a, &identical, BorderMode::Trim).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn offset_gives_exact_rmse(v in 0u8..=200, d in 1u8..=55, h in 9usize..20, w in 9usize..20) {
        let a = Tensor::filled(1, h, w, v as f64 / 255.0);
        let b = Tensor::filled(1, h, w, (v + d) as f64 / 255.0);
        let r = rmse(&a, &b, BorderMode::Keep).unwrap();
        prop_assert!((r - d as f64).abs() < 1e-9);
    }
}
