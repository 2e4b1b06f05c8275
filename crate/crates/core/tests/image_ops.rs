mod common;

use common::{fixture, random_image};
use compiqa::image::{gradient_field, mse, patch_cov, patch_mean, patch_tv, svd2_of_gradients, GrayImage, Patch, Svd2};
use compiqa::metricq::{calibrate_tau, noise_coherence_samples, overall_aq, DEFAULT_TAU};
use compiqa::ssim::{ssim, ssim_map, SsimParams};
use compiqa::Error;

#[test]
fn image_rejects_bad_input() {
    assert!(matches!(GrayImage::new(3, 3, vec![0.0; 8]), Err(Error::InvalidArgument(_))));
    assert!(GrayImage::new(2, 1, vec![0.0, f64::NAN]).is_err());
    assert!(GrayImage::new(0, 4, vec![]).is_err());
    let a = GrayImage::constant(3, 3, 0.1).unwrap();
    let b = GrayImage::constant(3, 4, 0.1).unwrap();
    assert!(mse(&a, &b).is_err());
}

#[test]
fn constant_image_has_zero_gradient() {
    let g = gradient_field(&GrayImage::constant(7, 5, 0.3).unwrap());
    assert!(g.gx.iter().chain(&g.gy).all(|&v| v == 0.0));
}

#[test]
fn ramp_gradient() {
    let w = 11;
    let img = GrayImage::from_fn(w, 6, |_, j| j as f64 / (w - 1) as f64).unwrap();
    let g = gradient_field(&img);
    for i in 0..6 {
        for j in 1..w - 1 {
            let [gx, gy] = g.at(i, j);
            assert!((gx - 0.1).abs() < 1e-15);
            assert_eq!(gy, 0.0);
        }
    }
}

#[test]
fn svd_special_cases() {
    let g = 0.7;
    let s = Svd2::from_gradients(&vec![[g, 0.0]; 81]);
    assert!((s.s1 - g * 9.0).abs() < 1e-12);
    assert!(s.s2.abs() < 1e-12);
    assert!((s.v1[0].abs() - 1.0).abs() < 1e-12);
    let z = Svd2::from_gradients(&vec![[0.0, 0.0]; 81]);
    assert_eq!((z.s1, z.s2), (0.0, 0.0));
    assert_eq!(z.coherence(), 0.0);
}

#[test]
fn patch_statistics() {
    let img = random_image(12, 12, 3);
    let f = gradient_field(&img);
    let p = Patch::extract(&img, &f, (5, 6), 9).unwrap();
    assert_eq!(p.values.len(), 81);
    assert_eq!(p.values[0], img.get(1, 2));
    assert!(patch_cov(&p.values, &p.values).unwrap() >= 0.0);
    assert_eq!(svd2_of_gradients(&p), Svd2::from_gradients(&p.grads));

    let flat = GrayImage::constant(9, 9, 0.4).unwrap();
    let fp = Patch::extract(&flat, &gradient_field(&flat), (4, 4), 9).unwrap();
    assert_eq!(patch_tv(&fp), 0.0);
    assert!((patch_mean(&fp) - 0.4).abs() < 1e-15);
    assert!(patch_cov(&fp.values, &fp.values).unwrap().abs() < 1e-30);
    assert_eq!(mse(&img, &img).unwrap(), 0.0);

    assert!(Patch::extract(&img, &f, (2, 6), 9).is_err());
    assert!(Patch::extract(&img, &f, (5, 6), 8).is_err());
    assert!(patch_cov(&[1.0], &[1.0]).is_err());
}

#[test]
fn ssim_examples() {
    let img = fixture("camera.pgm");
    let p = SsimParams::default();
    assert!((ssim(&img, &img, &p).unwrap() - 1.0).abs() < 1e-12);
    let bin = GrayImage::from_fn(32, 32, |i, j| if (i / 4 + j / 4) % 2 == 0 { 1.0 } else { 0.0 }).unwrap();
    let inv = bin.map(|v| 1.0 - v).unwrap();
    assert!(ssim(&bin, &inv, &p).unwrap() < 0.0);
    let (ow, oh, m) = ssim_map(&img, &img, &p).unwrap();
    assert_eq!((ow, oh, m.len()), (118, 118, 118 * 118));
    let small = GrayImage::constant(10, 10, 0.5).unwrap();
    assert!(ssim(&small, &small, &p).is_err());
}

#[test]
fn aq_step_edge_positive() {
    let img = GrayImage::from_fn(32, 32, |_, j| if j < 16 { 0.2 } else { 0.8 }).unwrap();
    let r = overall_aq(&img, 9, DEFAULT_TAU).unwrap();
    assert!(r.aq > 0.0);
    assert_eq!(r.q_map.len(), 32 * 32);
    assert!(overall_aq(&img, 8, DEFAULT_TAU).is_err());
}

#[test]
fn noise_coherence_stays_below_tau() {
    let s = noise_coherence_samples(9, 10_000, 17);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    assert!(mean < DEFAULT_TAU, "mean R {mean}");
    let above = s.iter().filter(|&&r| r > DEFAULT_TAU).count();
    assert!(above < 50, "{above} of 10000 above tau");
}

#[test]
fn tau_calibration_is_reproducible() {
    let t = calibrate_tau(9, 20_000, 0);
    assert_eq!(t, calibrate_tau(9, 20_000, 0));
    assert!((t - DEFAULT_TAU).abs() < 0.01, "tau {t}");
}
