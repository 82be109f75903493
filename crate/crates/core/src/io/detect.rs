//! Harris corners on an accumulated event-count image, used to seed tracks
//! when no frames are available.

use crate::patch::Event;
use crate::tracker::Seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisParams {
    pub k: f64,
    /// Responses below `relative_threshold · max` are discarded.
    pub relative_threshold: f64,
    /// Minimum pairwise seed distance (px).
    pub min_distance: f64,
    /// Seeds closer than this to the sensor border are discarded (px).
    pub border: f64,
    pub count: usize,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            k: 0.04,
            relative_threshold: 0.01,
            min_distance: 31.0,
            border: 15.0,
            count: 60,
        }
    }
}

/// Per-pixel event counts over `[t0, t1)`, row-major. Events outside the
/// sensor are ignored.
pub fn event_count_image(events: &[Event], t0: f64, t1: f64, width: usize, height: usize) -> Vec<f64> {
    let mut img = vec![0.0; width * height];
    let start = events.partition_point(|e| e.t < t0);
    for e in events[start..].iter().take_while(|e| e.t < t1) {
        let (x, y) = (e.x[0].round(), e.x[1].round());
        if x >= 0.0 && y >= 0.0 && (x as usize) < width && (y as usize) < height {
            img[y as usize * width + x as usize] += 1.0;
        }
    }
    img
}

/// Harris response `det(M) − k·tr(M)²` with Sobel gradients (zero padding)
/// and a 3×3 box-summed structure tensor.
pub fn harris_response(img: &[f64], width: usize, height: usize, k: f64) -> Vec<f64> {
    let at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
            0.0
        } else {
            img[y as usize * width + x as usize]
        }
    };
    let n = width * height;
    let (mut xx, mut yy, mut xy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * width + x as usize;
            xx[i] = gx * gx;
            yy[i] = gy * gy;
            xy[i] = gx * gy;
        }
    }
    let boxsum = |m: &[f64], x: i64, y: i64| -> f64 {
        let mut s = 0.0;
        for v in y - 1..=y + 1 {
            for u in x - 1..=x + 1 {
                if u >= 0 && v >= 0 && u < width as i64 && v < height as i64 {
                    s += m[v as usize * width + u as usize];
                }
            }
        }
        s
    };
    let mut r = vec![0.0; n];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let (a, b, c) = (boxsum(&xx, x, y), boxsum(&yy, x, y), boxsum(&xy, x, y));
            r[y as usize * width + x as usize] = a * b - c * c - k * (a + b) * (a + b);
        }
    }
    r
}

/// Evenly distributed Harris corners of the events in `[t0, t1)`, strongest
/// first. Seeds carry time `t0`.
pub fn detect_harris(
    events: &[Event],
    t0: f64,
    t1: f64,
    width: usize,
    height: usize,
    params: &HarrisParams,
) -> Vec<Seed> {
    if width == 0 || height == 0 || params.count == 0 {
        return Vec::new();
    }
    let img = event_count_image(events, t0, t1, width, height);
    let r = harris_response(&img, width, height, params.k);
    let max = r.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let threshold = params.relative_threshold * max;
    let (w, h) = (width as i64, height as i64);
    let mut candidates = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = r[(y * w + x) as usize];
            if v <= threshold || v <= 0.0 {
                continue;
            }
            let (xf, yf) = (x as f64, y as f64);
            if xf < params.border
                || yf < params.border
                || xf > (w - 1) as f64 - params.border
                || yf > (h - 1) as f64 - params.border
            {
                continue;
            }
            let is_max = (-1..=1).all(|dy: i64| {
                (-1..=1).all(|dx: i64| {
                    let (u, v2) = (x + dx, y + dy);
                    (dx == 0 && dy == 0)
                        || u < 0
                        || v2 < 0
                        || u >= w
                        || v2 >= h
                        || r[(v2 * w + u) as usize] <= v
                })
            });
            if is_max {
                candidates.push((v, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
    let min_d2 = params.min_distance * params.min_distance;
    let mut seeds: Vec<Seed> = Vec::new();
    for (_, x, y) in candidates {
        let p = [x as f64, y as f64];
        let clear = seeds.iter().all(|s| {
            let (dx, dy) = (s.position[0] - p[0], s.position[1] - p[1]);
            dx * dx + dy * dy >= min_d2
        });
        if clear {
            seeds.push(Seed::new(t0, p));
            if seeds.len() == params.count {
                break;
            }
        }
    }
    seeds
}
