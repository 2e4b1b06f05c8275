#![allow(clippy::needless_range_loop)]

use compiqa::ciqa::{CiqaParams, Variant};
use compiqa::GrayImage;
use compiqa::recon::{simulate_measurements, ReconParams, Solver};
use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use rand::Rng;
use num_complex::Complex64;

use super::{naive_gradient, px, random_image, rng};

/// Pairwise form: cov = Σ_{i<j} (a_i - a_j)(b_i - b_j) / (n (n - 1)).
pub fn pairwise_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += (a[i] - a[j]) * (b[i] - b[j]);
        }
    }
    s / (n * (n - 1)) as f64
}

pub fn naive_bilateral(img: &GrayImage, k: f64) -> GrayImage {
    let sr = 0.1 * k;
    let sd = 3.0 * k;
    let rad = (2.0 * sd).ceil() as isize;
    GrayImage::from_fn(img.width(), img.height(), |i, j| {
        let c = img.get(i, j);
        let (mut num, mut den) = (0.0, 0.0);
        for u in -rad..=rad {
            for v in -rad..=rad {
                let q = px(img, i as isize + u, j as isize + v);
                let w = (-((u * u + v * v) as f64) / (2.0 * sd * sd) - (q - c).powi(2) / (2.0 * sr * sr)).exp();
                num += w * q;
                den += w;
            }
        }
        num / den
    })
    .unwrap()
}

pub fn naive_ssim(a: &GrayImage, b: &GrayImage) -> f64 {
    let (sigma, win) = (1.5f64, 11usize);
    let r = (win / 2) as isize;
    let mut w = vec![vec![0.0; win]; win];
    let mut tot = 0.0;
    for u in -r..=r {
        for v in -r..=r {
            let x = (-((u * u + v * v) as f64) / (2.0 * sigma * sigma)).exp();
            w[(u + r) as usize][(v + r) as usize] = x;
            tot += x;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    let mut count = 0;
    for i in 0..=a.height() - win {
        for j in 0..=a.width() - win {
            let (mut mx, mut my) = (0.0, 0.0);
            for u in 0..win {
                for v in 0..win {
                    let ww = w[u][v] / tot;
                    mx += ww * a.get(i + u, j + v);
                    my += ww * b.get(i + u, j + v);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for u in 0..win {
                for v in 0..win {
                    let ww = w[u][v] / tot;
                    let (x, y) = (a.get(i + u, j + v) - mx, b.get(i + u, j + v) - my);
                    vx += ww * x * x;
                    vy += ww * y * y;
                    cxy += ww * x * y;
                }
            }
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}

/// Per-center comparison written from scratch with a dense eigen solver.
pub fn naive_compare_map(i1: &GrayImage, i2: &GrayImage, p: &CiqaParams) -> Vec<f64> {
    let n = p.n;
    let r = n / 2;
    let m = (n * n) as f64;
    let d = GrayImage::from_fn(i1.width(), i1.height(), |i, j| i1.get(i, j) - i2.get(i, j)).unwrap();
    let mut out = Vec::new();
    for ci in r..i1.height() - r {
        for cj in r..i1.width() - r {
            let (mut v1, mut v2, mut gd) = (Vec::new(), Vec::new(), Vec::new());
            let (mut tv1, mut tv2) = (0.0, 0.0);
            for i in ci - r..=ci + r {
                for j in cj - r..=cj + r {
                    v1.push(i1.get(i, j));
                    v2.push(i2.get(i, j));
                    gd.push(naive_gradient(&d, i, j));
                    let (ax, ay) = naive_gradient(i1, i, j);
                    let (bx, by) = naive_gradient(i2, i, j);
                    tv1 += (ax * ax + ay * ay).sqrt();
                    tv2 += (bx * bx + by * by).sqrt();
                }
            }
            let mut gram = Matrix2::<f64>::zeros();
            for (x, y) in &gd {
                gram[(0, 0)] += x * x;
                gram[(0, 1)] += x * y;
                gram[(1, 0)] += x * y;
                gram[(1, 1)] += y * y;
            }
            let eig = SymmetricEigen::new(gram).eigenvalues;
            let (l1, l2) = (eig[0].max(eig[1]).max(0.0), eig[0].min(eig[1]).max(0.0));
            let (s1, s2) = (l1.sqrt(), l2.sqrt());
            let c_ind = if s1 + s2 > 0.0 { (s1 - s2) / (s1 + s2) } else { 0.0 };
            let stru = if c_ind > p.c_thresh { 1.0 } else { -1.0 };
            let mean = |v: &[f64]| v.iter().sum::<f64>() / m;
            let (m1, m2) = (mean(&v1), mean(&v2));
            let dv: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a - b).collect();
            let md = mean(&dv);
            let cov1: f64 = v1.iter().zip(&dv).map(|(a, d)| (a - m1) * (d - md)).sum::<f64>() / (m - 1.0);
            let cov2: f64 = v2.iter().zip(&dv).map(|(b, d)| (b - m2) * (-d + md)).sum::<f64>() / (m - 1.0);
            let mp = ((m1 + m2) / 2.0).max(1.0 / m);
            let ctri = (cov1 - cov2) / mp;
            let v = match p.variant {
                Variant::C => stru * ctri,
                Variant::Ct => {
                    if stru > 0.0 {
                        ctri
                    } else {
                        let t1 = tv1 / (m * m1.max(1.0 / m));
                        let t2 = tv2 / (m * m2.max(1.0 / m));
                        let t = t1.min(t2).max(compiqa::ciqa::TEXTURE_FLOOR);
                        -(1.0 + 1.0 / (p.c1 * t)).ln() * ctri
                    }
                }
            };
            out.push(v);
        }
    }
    out
}

/// Dense matrices of the periodic forward difference and the normalized DFT.
fn dense_operators(w: usize, h: usize) -> (DMatrix<f64>, DMatrix<Complex64>) {
    let n = w * h;
    let mut d = DMatrix::zeros(2 * n, n);
    for i in 0..h {
        for j in 0..w {
            let k = i * w + j;
            d[(k, i * w + (j + 1) % w)] += 1.0;
            d[(k, k)] -= 1.0;
            d[(n + k, ((i + 1) % h) * w + j)] += 1.0;
            d[(n + k, k)] -= 1.0;
        }
    }
    let f = DMatrix::from_fn(n, n, |kk, pp| {
        let (ki, kj) = (kk / w, kk % w);
        let (pi, pj) = (pp / w, pp % w);
        let ph = -2.0 * std::f64::consts::PI * ((ki * pi) as f64 / h as f64 + (kj * pj) as f64 / w as f64);
        Complex64::from_polar(1.0 / n as f64, ph)
    });
    (d, f)
}


/// Largest deviation of the Fourier-domain x-update from a dense LU solve of
/// the same normal equations, relative to the solution's max norm.
pub fn x_update_dense_error(w: usize, h: usize, seed: u64, beta: f64, gamma: f64) -> f64 {
    let n = w * h;
    let img = random_image(w, h, seed);
    let sys = simulate_measurements(&img, 0.6, 25.0, seed + 1).unwrap();
    let (dm, f) = dense_operators(w, h);
    let mask = DMatrix::from_fn(n, n, |a, b| Complex64::new(if a == b && sys.mask[a] { 1.0 } else { 0.0 }, 0.0));
    let s = &mask * &f;
    let sts = (s.adjoint() * &s).map(|c| c.re);
    let sty = (s.adjoint() * DVector::from_vec(sys.y.clone())).map(|c| c.re);
    let mut r = rng(seed + 2);
    let mut field = || -> Vec<f64> { (0..n).map(|_| r.random_range(-5.0..5.0)).collect() };
    let d = [field(), field()];
    let b = [field(), field()];
    let (dw, bw) = (field(), field());

    let params = ReconParams::with_gamma(beta, gamma);
    let solver = Solver::new(&sys, &params).unwrap();
    let split = (gamma > 0.0).then_some((dw.as_slice(), bw.as_slice()));
    let ours = solver.x_update(&d, &b, split);

    let mut a = &sts + (dm.transpose() * &dm) * params.mu;
    let diff = DVector::from_iterator(2 * n, d[0].iter().chain(&d[1]).zip(b[0].iter().chain(&b[1])).map(|(d, b)| d - b));
    let mut rhs = &sty + dm.transpose() * diff * params.mu;
    if gamma > 0.0 {
        // The Haar transform is orthonormal, so its Gram matrix is I.
        let wd: Vec<f64> = dw.iter().zip(&bw).map(|(d, b)| d - b).collect();
        a += DMatrix::identity(n, n) * params.mu2;
        rhs += DVector::from_vec(compiqa::recon::haar::adjoint(&wd, w, h)) * params.mu2;
    }
    let a = a + DMatrix::identity(n, n) * compiqa::recon::DENOM_EPS;
    let x = a.lu().solve(&rhs).unwrap();
    let scale = x.amax().max(1.0);
    ours.iter().zip(x.iter()).map(|(p, q)| (p - q).abs() / scale).fold(0.0, f64::max)
}
