#![allow(dead_code)]

pub mod naive;

use std::path::PathBuf;

use compiqa::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut r = rng(seed);
    GrayImage::from_fn(w, h, |_, _| r.random::<f64>()).unwrap()
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> GrayImage {
    compiqa::io::read_image(fixture_path(name)).unwrap()
}

pub const NATURAL: [&str; 9] = [
    "camera.pgm",
    "astronaut.pgm",
    "coffee.pgm",
    "chelsea.pgm",
    "rocket.pgm",
    "clock.pgm",
    "brick.pgm",
    "grass.pgm",
    "gravel.pgm",
];

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Pixel read with indices clamped to the image.
pub fn px(img: &GrayImage, i: isize, j: isize) -> f64 {
    let ii = i.clamp(0, img.height() as isize - 1) as usize;
    let jj = j.clamp(0, img.width() as isize - 1) as usize;
    img.get(ii, jj)
}

/// Central-difference gradient at one pixel, written out longhand.
pub fn naive_gradient(img: &GrayImage, i: usize, j: usize) -> (f64, f64) {
    let (i, j) = (i as isize, j as isize);
    let gx = (px(img, i, j + 1) - px(img, i, j - 1)) / 2.0;
    let gy = (px(img, i + 1, j) - px(img, i - 1, j)) / 2.0;
    (gx, gy)
}
