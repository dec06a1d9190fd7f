use std::f64::consts::PI;

use super::{gaussian_blur_plane, reflect101, GaussianSpec, ImageU8, Plane};
use crate::error::{Error, Result};

/// Hysteresis thresholds on gradient magnitude plus the pre-smoothing window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyConfig {
    t_low: f64,
    t_high: f64,
    pub gaussian: GaussianSpec,
}

impl CannyConfig {
    pub fn new(t_low: f64, t_high: f64, gaussian: GaussianSpec) -> Result<Self> {
        if !(t_low >= 0.0 && t_low.is_finite() && t_high.is_finite()) {
            return Err(Error::Config(format!("invalid thresholds {t_low}/{t_high}")));
        }
        if t_low > t_high {
            return Err(Error::Config(format!("t_low {t_low} exceeds t_high {t_high}")));
        }
        Ok(CannyConfig {
            t_low,
            t_high,
            gaussian,
        })
    }

    pub fn t_low(&self) -> f64 {
        self.t_low
    }

    pub fn t_high(&self) -> f64 {
        self.t_high
    }
}

impl Default for CannyConfig {
    /// Both thresholds 20 with the default 5×5, σ = 1 smoothing.
    fn default() -> Self {
        CannyConfig {
            t_low: 20.0,
            t_high: 20.0,
            gaussian: GaussianSpec::default(),
        }
    }
}

/// Per-pixel Sobel derivatives, magnitude and direction (radians in (−π, π]).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub direction: Vec<f64>,
}

/// 3×3 Sobel derivatives with reflect-101 borders.
pub fn sobel_gradients(plane: &Plane) -> GradientField {
    let (w, h) = (plane.width, plane.height);
    let n = w * h;
    let (mut gx, mut gy) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut magnitude, mut direction) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for y in 0..h as isize {
        let rows = [reflect101(y - 1, h), y as usize, reflect101(y + 1, h)];
        for x in 0..w as isize {
            let cols = [reflect101(x - 1, w), x as usize, reflect101(x + 1, w)];
            let p = |r: usize, c: usize| plane.data[rows[r] * w + cols[c]];
            let dx = (p(0, 2) - p(0, 0)) + 2.0 * (p(1, 2) - p(1, 0)) + (p(2, 2) - p(2, 0));
            let dy = (p(2, 0) - p(0, 0)) + 2.0 * (p(2, 1) - p(0, 1)) + (p(2, 2) - p(0, 2));
            let mut theta = dy.atan2(dx);
            if theta <= -PI {
                theta = PI;
            }
            gx.push(dx);
            gy.push(dy);
            magnitude.push(dx.hypot(dy));
            direction.push(theta);
        }
    }
    GradientField {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
        direction,
    }
}

/// Neighbor offsets along the gradient, direction quantized to 0°/45°/90°/135°.
fn direction_offsets(theta: f64) -> (isize, isize) {
    let mut deg = theta.to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    if !(22.5..157.5).contains(&deg) {
        (1, 0)
    } else if deg < 67.5 {
        (1, 1)
    } else if deg < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Keeps magnitudes that are local maxima along the quantized gradient
/// direction, zeroing the rest. A pixel must be strictly greater than the
/// neighbor behind it and at least equal to the one ahead, so a two-pixel
/// plateau keeps exactly one pixel. Out-of-image neighbors count as 0.
pub fn non_maximum_suppression(field: &GradientField) -> Vec<f64> {
    let (w, h) = (field.width as isize, field.height as isize);
    let mag = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            field.magnitude[(y * w + x) as usize]
        }
    };
    let mut out = vec![0.0; field.magnitude.len()];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let m = field.magnitude[i];
            let (ox, oy) = direction_offsets(field.direction[i]);
            let behind = mag(x - ox, y - oy);
            let ahead = mag(x + ox, y + oy);
            if m > behind && m >= ahead {
                out[i] = m;
            }
        }
    }
    out
}

/// Strong pixels plus weak pixels 8-connected (transitively) to a strong one.
fn hysteresis(thinned: &[f64], w: usize, h: usize, t_low: f64, t_high: f64) -> Vec<bool> {
    let mut edge = vec![false; thinned.len()];
    let mut stack: Vec<usize> = Vec::new();
    for (i, &m) in thinned.iter().enumerate() {
        if m > 0.0 && m >= t_high {
            edge[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                let m = thinned[j];
                if !edge[j] && m > 0.0 && m >= t_low {
                    edge[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    edge
}

/// Canny edge map: smoothing, Sobel gradients, non-maximum suppression,
/// double threshold and hysteresis. Output pixels are 0 or 255.
pub fn canny(img: &ImageU8, cfg: &CannyConfig) -> Result<ImageU8> {
    if cfg.t_low > cfg.t_high {
        return Err(Error::Config(format!(
            "t_low {} exceeds t_high {}",
            cfg.t_low, cfg.t_high
        )));
    }
    let smoothed = gaussian_blur_plane(&img.to_plane()?, &cfg.gaussian);
    let field = sobel_gradients(&smoothed);
    let thinned = non_maximum_suppression(&field);
    let edges = hysteresis(&thinned, img.width(), img.height(), cfg.t_low, cfg.t_high);
    ImageU8::new(
        img.width(),
        img.height(),
        1,
        edges.into_iter().map(|e| if e { 255 } else { 0 }).collect(),
    )
}
