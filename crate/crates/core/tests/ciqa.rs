mod common;

use common::{fixture, random_image, rng};
use compiqa::ciqa::{
    compare, content_detection, contribution, local_score, score, smoothness_index, texture_compensation,
    texture_index, CiqaParams, Variant,
};
use compiqa::distortions::iid_gaussian_noise;
use compiqa::image::{gradient_field, GrayImage, Patch};
use compiqa::metricq::DEFAULT_TAU;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn center_patch(img: &GrayImage) -> Patch {
    let c = (img.height() / 2, img.width() / 2);
    Patch::extract(img, &gradient_field(img), c, 9).unwrap()
}

#[test]
fn identical_patches() {
    let img = random_image(15, 15, 1);
    let p = center_patch(&img);
    let det = content_detection(&p, &p, 0.12).unwrap();
    assert_eq!((det.is_stru, det.c_ind), (-1, 0.0));
    assert_eq!(contribution(&p, &p).unwrap().ctri, 0.0);
    for v in [Variant::C, Variant::Ct] {
        assert_eq!(local_score(&p, &p, &CiqaParams::with_variant(v)).unwrap(), 0.0);
    }
}

#[test]
fn step_difference_is_structure() {
    let base = random_image(15, 15, 2);
    let stepped = GrayImage::from_fn(15, 15, |i, j| base.get(i, j) + if j >= 7 { 0.3 } else { 0.0 }).unwrap();
    let det = content_detection(&center_patch(&stepped), &center_patch(&base), 0.12).unwrap();
    assert!((det.c_ind - 1.0).abs() < 1e-12);
    assert_eq!(det.is_stru, 1);
}

#[test]
fn noise_difference_is_rarely_structure() {
    let mut r = rng(3);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let base = random_image(11, 11, 4);
    let bp = center_patch(&base);
    let trials = 10_000;
    let mut hits = 0;
    for _ in 0..trials {
        let z: Vec<f64> = (0..base.len()).map(|_| noise.sample(&mut r)).collect();
        let noisy = GrayImage::new(11, 11, base.data().iter().zip(&z).map(|(v, e)| v + e).collect()).unwrap();
        if content_detection(&center_patch(&noisy), &bp, DEFAULT_TAU).unwrap().is_stru > 0 {
            hits += 1;
        }
    }
    assert!((hits as f64) < 0.05 * trials as f64, "{hits} structure detections");
}

#[test]
fn contribution_antisymmetric() {
    let a = center_patch(&random_image(13, 13, 5));
    let b = center_patch(&random_image(13, 13, 6));
    let ab = contribution(&a, &b).unwrap();
    let ba = contribution(&b, &a).unwrap();
    assert_eq!(ab.ctri, -ba.ctri);
    assert_eq!((ab.ctri1, ab.ctri2), (ba.ctri2, ba.ctri1));
}

#[test]
fn texture_weights() {
    let c1 = 4.6;
    let a = center_patch(&random_image(13, 13, 7));
    let b = center_patch(&random_image(13, 13, 8));
    assert_eq!(texture_compensation(&a, &b, 1, c1).unwrap(), 1.0);
    assert!(smoothness_index(1e12, c1) < 1e-12);
    assert!(smoothness_index(0.0, c1).is_infinite());

    // A ramp of slope a around mean m has texture index a / m everywhere.
    let (m, slope) = (0.5, 0.5 / c1);
    let ramp = GrayImage::from_fn(31, 31, |_, j| m + slope * (j as f64 - 15.0)).unwrap();
    let p = center_patch(&ramp);
    assert!((texture_index(&p) - 1.0 / c1).abs() < 1e-12);
    let w = texture_compensation(&p, &p, -1, c1).unwrap();
    assert!((w - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn noisier_patch_scores_negative() {
    let mut r = rng(9);
    let noise = Normal::new(0.0, 1.0).unwrap();
    for v in [Variant::C, Variant::Ct] {
        let params = CiqaParams::with_variant(v);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let level = r.random_range(0.2..0.8);
            let n1: Vec<f64> = (0..121).map(|_| noise.sample(&mut r)).collect();
            let n2: Vec<f64> = (0..121).map(|_| noise.sample(&mut r)).collect();
            let more = GrayImage::from_fn(11, 11, |i, j| level + 0.06 * n1[i * 11 + j]).unwrap();
            let less = GrayImage::from_fn(11, 11, |i, j| level + 0.03 * n2[i * 11 + j]).unwrap();
            sum += local_score(&center_patch(&more), &center_patch(&less), &params).unwrap();
        }
        assert!(sum < 0.0, "{v}: {sum}");
    }
}

#[test]
fn compare_signs_on_natural_image() {
    let clean = fixture("camera.pgm");
    let noisy = iid_gaussian_noise(&clean, 0.05, 1);
    for v in [Variant::C, Variant::Ct] {
        let p = CiqaParams::with_variant(v);
        assert!(score(&clean, &noisy, &p).unwrap() > 0.0);
        assert!(score(&noisy, &clean, &p).unwrap() < 0.0);
        let same = compare(&clean, &clean, &p).unwrap();
        assert_eq!(same.score, 0.0);
        assert!(same.map.values.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn literal_sign_flips_noise_branch() {
    let clean = fixture("camera.pgm");
    let noisy = iid_gaussian_noise(&clean, 0.05, 2);
    let sane = compare(&noisy, &clean, &CiqaParams::default()).unwrap();
    let lit = compare(&noisy, &clean, &CiqaParams { literal_weight_sign: true, ..CiqaParams::default() }).unwrap();
    for ((a, b), d) in sane.map.values.iter().zip(&lit.map.values).zip(&sane.diagnostics) {
        if d.is_stru > 0 {
            assert_eq!(a, b);
        } else {
            assert!((a + b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }
}

#[test]
fn stride_subsamples_centers() {
    let a = random_image(30, 21, 10);
    let b = random_image(30, 21, 11);
    let full = compare(&a, &b, &CiqaParams::default()).unwrap();
    let sub = compare(&a, &b, &CiqaParams { stride: 3, ..CiqaParams::default() }).unwrap();
    assert_eq!((full.map.cols, full.map.rows), (22, 13));
    assert_eq!((sub.map.cols, sub.map.rows), (8, 5));
    for (k, v) in sub.map.values.iter().enumerate() {
        let (i, j) = sub.map.center(k);
        let kk = (i - 4) * full.map.cols + (j - 4);
        assert_eq!(*v, full.map.values[kk]);
    }
}

#[test]
fn compare_rejects_bad_input() {
    let a = random_image(20, 20, 1);
    let b = random_image(20, 19, 2);
    let p = CiqaParams::default();
    assert!(compare(&a, &b, &p).is_err());
    let tiny = random_image(8, 30, 3);
    assert!(compare(&tiny, &tiny, &p).is_err());
    for bad in [
        CiqaParams { n: 8, ..p },
        CiqaParams { c_thresh: 0.0, ..p },
        CiqaParams { c1: -1.0, ..p },
        CiqaParams { stride: 0, ..p },
    ] {
        assert!(compare(&a, &a, &bad).is_err());
    }
}

#[test]
fn quality_map_outputs() {
    let a = random_image(16, 16, 12);
    let b = random_image(16, 16, 13);
    let res = compare(&a, &b, &CiqaParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("map.csv");
    res.map.write_csv(&csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,j,value");
    assert_eq!(lines.len(), 1 + 64);
    assert!(lines[1].starts_with("4,4,"));

    let pgm = dir.path().join("map.pgm");
    res.map.write_pgm(&pgm).unwrap();
    let img = compiqa::io::read_image(&pgm).unwrap();
    assert_eq!((img.width(), img.height()), (8, 8));
    let scale = std::fs::read_to_string(dir.path().join("map.pgm.scale")).unwrap();
    assert!(scale.starts_with("min="));
}
