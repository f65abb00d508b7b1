mod common;

use common::column_stats;
use nflow::bijectors::{Bijector, Chain, Layer, LogitSquash};
use nflow::data::*;
use nflow::ndcore::Tensor;
use nflow::rng::CounterRng;
use proptest::prelude::*;

#[test]
fn pre_shear_covariance_matches_closed_form() {
    let s = gen_pipeline_dataset(5000, 7).unwrap();
    let linear = Chain::new(s.chain.steps()[..2].to_vec()).unwrap();
    let (x, _) = linear.forward(&s.base_draws).unwrap();
    let (c, sn) = (75f64.to_radians().cos(), 75f64.to_radians().sin());
    // R·diag(100, 1)·Rᵀ
    let want = [
        100.0 * c * c + sn * sn,
        (100.0 - 1.0) * c * sn,
        100.0 * sn * sn + c * c,
    ];
    let n = x.rows() as f64;
    let m: Vec<f64> = (0..2)
        .map(|j| (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n)
        .collect();
    let cov = |a: usize, b: usize| {
        (0..x.rows())
            .map(|i| (x.get(i, a) - m[a]) * (x.get(i, b) - m[b]))
            .sum::<f64>()
            / (n - 1.0)
    };
    let got = [cov(0, 0), cov(0, 1), cov(1, 1)];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 0.1 * w.abs(), "{g} vs {w}");
    }
}

#[test]
fn pipeline_inverse_recovers_draws() {
    let s = gen_pipeline_dataset(5000, 7).unwrap();
    let (z, _) = s.chain.inverse(s.dataset.points()).unwrap();
    assert!(z.max_abs_diff(&s.base_draws) < 1e-9);
    assert!(gen_pipeline_dataset(0, 1).is_err());
}

#[test]
fn noise_statistics_on_flat_image() {
    let img = GrayImage::filled(64, 64, 128);
    let noisy = augment_noise(&img, 10.0, 4).unwrap();
    let deltas: Vec<f64> = noisy.pixels().iter().map(|&p| p as f64 - 128.0).collect();
    let t = Tensor::matrix(deltas.len(), 1, deltas).unwrap();
    let (_, sd) = column_stats(&t)[0];
    assert!((9.0..=11.0).contains(&sd), "{sd}");
}

#[test]
fn saturated_pixels_clamp() {
    let img = GrayImage::filled(32, 32, 255);
    let mut rng = CounterRng::new(5);
    let noisy = augment_noise(&img, 10.0, 5).unwrap();
    for &p in noisy.pixels() {
        if rng.normal() > 0.0 {
            assert_eq!(p, 255);
        }
    }
    assert!(augment_noise(&img, -1.0, 0).is_err());
}

#[test]
fn upsampled_edge_is_monotone() {
    let img = GrayImage::new(2, 1, vec![0, 255]).unwrap();
    let out = resize_bilinear(&img, 4, 1).unwrap();
    assert!(
        out.pixels().windows(2).all(|w| w[0] <= w[1]),
        "{:?}",
        out.pixels()
    );
    assert_eq!(out.pixels()[0], 0);
    assert_eq!(out.pixels()[3], 255);
}

#[test]
fn dequantize_example_and_squash() {
    let img = GrayImage::new(1, 1, vec![0]).unwrap();
    let x = dequantize(&img, 0);
    assert!(x[0] >= 0.0 && x[0] < 1.0 / 256.0);
    let sq = LogitSquash::new(1, 0.05).unwrap();
    let (y, _) = sq.forward_point(&[0.0]).unwrap();
    assert!((y[0] + 2.944439).abs() < 1e-6);
    let (_, ld) = sq.forward_point(&[0.5]).unwrap();
    assert!((ld - 3.6f64.ln()).abs() < 1e-12);
}

#[test]
fn quantize_contracts_hold_for_every_pixel_value() {
    let img = GrayImage::new(16, 16, (0..=255).collect()).unwrap();
    for seed in 0..20 {
        let x = dequantize(&img, seed);
        assert_eq!(quantize(&x, 16, 16).unwrap(), img);
    }
    // quantize then dequantize lands in the same bin
    let x: Vec<f64> = (0..256).map(|i| (i as f64 + 0.5) / 256.0).collect();
    let q = quantize(&x, 16, 16).unwrap();
    let back = dequantize(&q, 3);
    for (a, b) in x.iter().zip(&back) {
        assert_eq!((a * 256.0).floor(), (b * 256.0).floor());
    }
}

#[test]
fn image_chain_round_trip_is_pixel_exact() {
    let imgs = gen_glyph_dataset(10, 8, 1).unwrap();
    let chain = Chain::new(vec![Layer::from(LogitSquash::new(64, 0.05).unwrap())]).unwrap();
    for (i, img) in imgs.iter().enumerate() {
        let x = Tensor::matrix(1, 64, dequantize(img, i as u64)).unwrap();
        let (z, _) = chain.forward(&x).unwrap();
        let (back, _) = chain.inverse(&z).unwrap();
        assert_eq!(&quantize(back.data(), 8, 8).unwrap(), img);
    }
}

#[test]
fn glyph_draws_are_reproducible_and_varied() {
    let a = gen_glyph_dataset(100, 16, 42).unwrap();
    let b = gen_glyph_dataset(100, 16, 42).unwrap();
    let bytes = |v: &[GrayImage]| v.iter().flat_map(encode_pgm).collect::<Vec<u8>>();
    assert_eq!(bytes(&a), bytes(&b));
    let mut distinct = a.clone();
    distinct.sort_by(|x, y| x.pixels().cmp(y.pixels()));
    distinct.dedup();
    assert!(distinct.len() > 10);
}

#[test]
fn glyph_families_all_appear() {
    let fams: std::collections::HashSet<_> = (0..100).map(|i| glyph_family(42, i)).collect();
    assert!(fams.len() >= 2);
    let mut rng = CounterRng::new(0);
    let drawn: Vec<GrayImage> = GlyphFamily::ALL
        .iter()
        .map(|&f| draw_glyph(f, 16, &mut rng))
        .collect();
    for i in 0..4 {
        for j in i + 1..4 {
            assert_ne!(drawn[i], drawn[j]);
        }
    }
}

#[test]
fn pgm_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.pgm");
    let img = gen_glyph_dataset(1, 13, 2).unwrap().remove(0);
    save_pgm(&img, &p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    let back = load_pgm(&p).unwrap();
    assert_eq!(back, img);
    save_pgm(&back, &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), bytes);
}

#[test]
fn images_become_dataset_rows() {
    let imgs = gen_glyph_dataset(5, 8, 0).unwrap();
    let d = Dataset::from_images(&imgs, 9).unwrap();
    assert_eq!((d.len(), d.dim()), (5, 64));
    let odd = vec![imgs[0].clone(), GrayImage::filled(4, 4, 0)];
    assert!(Dataset::from_images(&odd, 0).is_err());
}

proptest! {
    #[test]
    fn augmentation_stays_in_range(
        pixels in prop::collection::vec(any::<u8>(), 1..200),
        sigma in 0.0f64..80.0,
        seed in any::<u64>(),
    ) {
        let img = GrayImage::new(pixels.len(), 1, pixels).unwrap();
        let out = augment_noise(&img, sigma, seed).unwrap();
        prop_assert_eq!(out.pixels().len(), img.pixels().len());
    }

    #[test]
    fn resize_preserves_constants(v in any::<u8>(), w in 1usize..20, h in 1usize..20, nw in 1usize..40, nh in 1usize..40) {
        let out = resize_bilinear(&GrayImage::filled(w, h, v), nw, nh).unwrap();
        prop_assert!(out.pixels().iter().all(|&p| p == v));
    }

    #[test]
    fn pgm_bytes_round_trip(pixels in prop::collection::vec(any::<u8>(), 1..300), w in 1usize..20) {
        let h = pixels.len() / w;
        prop_assume!(h > 0);
        let img = GrayImage::new(w, h, pixels[..w * h].to_vec()).unwrap();
        let bytes = encode_pgm(&img);
        prop_assert_eq!(encode_pgm(&decode_pgm(&bytes).unwrap()), bytes);
    }

    #[test]
    fn csv_round_trips(vals in prop::collection::vec(-1e12f64..1e12, 1..40), d in 1usize..5) {
        let rows = vals.len() / d;
        prop_assume!(rows > 0);
        let data = Dataset::new(Tensor::matrix(rows, d, vals[..rows * d].to_vec()).unwrap(), "p").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_csv(&data, &p).unwrap();
        let back = load_csv(&p).unwrap();
        prop_assert_eq!(back.points(), data.points());
    }
}
