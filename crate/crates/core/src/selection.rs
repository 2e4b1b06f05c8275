//! Ranking and selection over image series using pairwise comparisons.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ciqa::{score, CiqaParams};
use crate::error::{Error, Result};
use crate::image::{mse, GrayImage};

/// Default factor applied to [0, 1] mean squared errors before comparing
/// them with the key-image threshold (8-bit scale).
pub const MSE_SCALE: f64 = 255.0 * 255.0;

/// Ordered series of processed versions of one source image.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortionLadder {
    pub images: Vec<GrayImage>,
    pub labels: Vec<f64>,
}

impl DistortionLadder {
    pub fn new(images: Vec<GrayImage>, labels: Vec<f64>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::invalid("ladder needs at least one image"));
        }
        if images.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        for img in &images[1..] {
            images[0].check_same_shape(img)?;
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankResult {
    /// Image indices from worst to best.
    pub order: Vec<usize>,
    pub comparisons_used: usize,
}

/// Bubble sort from a seeded random start, using the comparison sign.
pub fn rank(images: &[GrayImage], params: &CiqaParams, seed: u64) -> Result<RankResult> {
    for img in images.iter().skip(1) {
        images[0].check_same_shape(img)?;
    }
    rank_by(images.len(), seed, |a, b| score(&images[a], &images[b], params))
}

/// Bubble sort with an arbitrary comparator: `better(a, b) > 0` means `a`
/// ranks above `b`. Passes stop early once nothing moves.
pub fn rank_by(count: usize, seed: u64, mut better: impl FnMut(usize, usize) -> Result<f64>) -> Result<RankResult> {
    if count < 2 {
        return Err(Error::invalid("ranking needs at least two images"));
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut comparisons_used = 0;
    for pass in 0..count - 1 {
        let mut swapped = false;
        for j in 0..count - 1 - pass {
            comparisons_used += 1;
            if better(order[j], order[j + 1])? > 0.0 {
                order.swap(j, j + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    Ok(RankResult {
        order,
        comparisons_used,
    })
}

/// Sum over ranked pairs of how much an earlier (supposedly worse) image
/// beats a later one in SSIM.
pub fn weighted_inversions(order: &[usize], ssim_scores: &[f64]) -> Result<f64> {
    if order.len() != ssim_scores.len() {
        return Err(Error::invalid(format!(
            "order has {} entries but {} SSIM scores given",
            order.len(),
            ssim_scores.len()
        )));
    }
    let mut seen = vec![false; order.len()];
    for &o in order {
        if o >= order.len() || std::mem::replace(&mut seen[o], true) {
            return Err(Error::invalid("order is not a permutation"));
        }
    }
    let mut total = 0.0;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            total += (ssim_scores[order[i]] - ssim_scores[order[j]]).max(0.0);
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeySelection {
    pub index: usize,
    pub keys: Vec<usize>,
    /// Position in `keys` of the best key, if an interior one was found.
    pub best_key: Option<usize>,
    /// Inclusive ladder range searched in the final step.
    pub segment: (usize, usize),
    pub monotone_warning: bool,
}

/// Key-image selection over a ladder ordered by increasing processing.
///
/// `mse_scale` multiplies the [0, 1] mean squared error before it is
/// compared against `k_thresh`.
pub fn key_image_select(
    ladder: &DistortionLadder,
    params: &CiqaParams,
    k_thresh: f64,
    mse_scale: f64,
) -> Result<KeySelection> {
    let imgs = &ladder.images;
    let n = imgs.len();
    if n < 3 {
        return Err(Error::invalid("key-image selection needs at least three images"));
    }
    let cmp = |a: usize, b: usize| score(&imgs[a], &imgs[b], params);

    let mut keys = vec![0];
    for i in 1..n {
        let last = *keys.last().expect("non-empty");
        if mse(&imgs[i], &imgs[last])? * mse_scale > k_thresh {
            keys.push(i);
        }
    }

    let mut best_key = None;
    for k in 1..keys.len().saturating_sub(1) {
        if cmp(keys[k], keys[k - 1])? > 0.0 && cmp(keys[k], keys[k + 1])? > 0.0 {
            best_key = Some(k);
            break;
        }
    }

    let segment = match best_key {
        Some(k) => (keys[k - 1], keys[k + 1]),
        None if keys.len() == 1 => (0, n - 1),
        None => {
            let (first, last) = (keys[0], *keys.last().expect("non-empty"));
            if cmp(first, last)? >= 0.0 {
                (first, keys[1])
            } else {
                (keys[keys.len() - 2], n - 1)
            }
        }
    };
    if best_key.is_none() {
        warn!("monotone series: no interior key image beats both neighbors");
    }

    let (start, end) = segment;
    let mut index = start;
    let mut best = f64::NEG_INFINITY;
    for i in start..=end {
        let v = cmp(i, start)? + cmp(i, end)?;
        if v > best {
            best = v;
            index = i;
        }
    }
    Ok(KeySelection {
        index,
        keys,
        best_key,
        segment,
        monotone_warning: best_key.is_none(),
    })
}
