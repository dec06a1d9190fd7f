//! Reference implementations used as test oracles. Everything here is
//! written directly from the definitions, in f64, with no shared code paths
//! into the library beyond the `Tensor` container.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use tumorscan::nn::{LayerKind, ModelConfig, WeightStore};
use tumorscan::numerics::Tensor;

pub fn rng(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut Pcg64, dims: &[usize], bound: f32) -> Tensor {
    let n = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.random_range(-bound..=bound)).collect()).unwrap()
}

/// A dense `H×W×C` map in f64.
#[derive(Debug, Clone)]
pub struct Map {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub v: Vec<f64>,
}

impl Map {
    pub fn from_tensor(t: &Tensor) -> Map {
        let d = t.dims();
        Map {
            h: d[0],
            w: d[1],
            c: d[2],
            v: t.data().iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.v[(y * self.w + x) * self.c + c]
    }

    /// Zero outside the map.
    pub fn padded(&self, y: isize, x: isize, c: usize) -> f64 {
        if y < 0 || x < 0 || y >= self.h as isize || x >= self.w as isize {
            0.0
        } else {
            self.get(y as usize, x as usize, c)
        }
    }
}

pub fn max_diff(a: &[f64], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, &y)| (x - y as f64).abs()).fold(0.0, f64::max)
}

/// Output extent and leading pad of TF "same" padding.
pub fn same_geometry(n: usize, k: usize, s: usize) -> (usize, isize) {
    let out = n.div_ceil(s);
    let need = (out - 1) * s + k;
    let total = need.saturating_sub(n);
    (out, (total / 2) as isize)
}

/// Standard convolution, six nested loops. `w` is `[K, K, C, D]`.
pub fn naive_conv2d(x: &Map, w: &[f64], b: &[f64], k: usize, d: usize, s: usize) -> Map {
    let (oh, ph) = same_geometry(x.h, k, s);
    let (ow, pw) = same_geometry(x.w, k, s);
    let mut out = vec![0.0; oh * ow * d];
    for oy in 0..oh {
        for ox in 0..ow {
            for od in 0..d {
                let mut acc = b[od];
                for u in 0..k {
                    for v in 0..k {
                        for ic in 0..x.c {
                            let iy = (oy * s) as isize + u as isize - ph;
                            let ix = (ox * s) as isize + v as isize - pw;
                            acc += x.padded(iy, ix, ic) * w[((u * k + v) * x.c + ic) * d + od];
                        }
                    }
                }
                out[(oy * ow + ox) * d + od] = acc;
            }
        }
    }
    Map {
        h: oh,
        w: ow,
        c: d,
        v: out,
    }
}

/// Per-channel spatial filter, `w` is `[K, K, C]`.
pub fn naive_depthwise(x: &Map, w: &[f64], b: &[f64], k: usize, s: usize) -> Map {
    let (oh, ph) = same_geometry(x.h, k, s);
    let (ow, pw) = same_geometry(x.w, k, s);
    let mut out = vec![0.0; oh * ow * x.c];
    for oy in 0..oh {
        for ox in 0..ow {
            for c in 0..x.c {
                let mut acc = b[c];
                for u in 0..k {
                    for v in 0..k {
                        let iy = (oy * s) as isize + u as isize - ph;
                        let ix = (ox * s) as isize + v as isize - pw;
                        acc += x.padded(iy, ix, c) * w[(u * k + v) * x.c + c];
                    }
                }
                out[(oy * ow + ox) * x.c + c] = acc;
            }
        }
    }
    Map {
        h: oh,
        w: ow,
        c: x.c,
        v: out,
    }
}

/// 1×1 channel mixing, `w` is `[C, D]`.
pub fn naive_pointwise(x: &Map, w: &[f64], b: &[f64], d: usize) -> Map {
    let mut out = vec![0.0; x.h * x.w * d];
    for p in 0..x.h * x.w {
        for od in 0..d {
            let mut acc = b[od];
            for c in 0..x.c {
                acc += x.v[p * x.c + c] * w[c * d + od];
            }
            out[p * d + od] = acc;
        }
    }
    Map {
        h: x.h,
        w: x.w,
        c: d,
        v: out,
    }
}

pub fn naive_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// `out × in` row-major dense layer.
pub fn naive_dense(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n = b.len();
    let m = x.len();
    (0..n)
        .map(|i| b[i] + (0..m).map(|j| w[i * m + j] * x[j]).sum::<f64>())
        .collect()
}

fn param(ws: &WeightStore, name: &str) -> Vec<f64> {
    ws.get(name)
        .unwrap_or_else(|| panic!("missing {name}"))
        .data()
        .iter()
        .map(|&v| v as f64)
        .collect()
}

/// Whole-network reference forward, interpreting the layer list on its own.
pub enum Value {
    Map(Map),
    Flat(Vec<f64>),
}

pub fn naive_forward(model: &ModelConfig, ws: &WeightStore, input: &Tensor) -> Vec<f64> {
    let mut x = Value::Map(Map::from_tensor(input));
    for l in model.layers() {
        let p = |suffix: &str| param(ws, &format!("{}.{suffix}", l.name));
        x = match (l.kind, x) {
            (LayerKind::Conv2d, Value::Map(m)) => {
                Value::Map(naive_conv2d(&m, &p("w"), &p("b"), l.kernel, l.out_channels, l.stride))
            }
            (LayerKind::Depthwise, Value::Map(m)) => {
                Value::Map(naive_depthwise(&m, &p("w"), &p("b"), l.kernel, l.stride))
            }
            (LayerKind::Pointwise, Value::Map(m)) => Value::Map(naive_pointwise(&m, &p("w"), &p("b"), l.out_channels)),
            (LayerKind::AffineNorm, Value::Map(mut m)) => {
                let (scale, shift) = (p("scale"), p("shift"));
                for (i, v) in m.v.iter_mut().enumerate() {
                    *v = *v * scale[i % m.c] + shift[i % m.c];
                }
                Value::Map(m)
            }
            (LayerKind::Relu6, Value::Map(mut m)) => {
                m.v.iter_mut().for_each(|v| *v = v.clamp(0.0, 6.0));
                Value::Map(m)
            }
            (LayerKind::Relu, Value::Flat(v)) => Value::Flat(v.into_iter().map(|v| v.max(0.0)).collect()),
            (LayerKind::Relu6, Value::Flat(v)) => Value::Flat(v.into_iter().map(|v| v.clamp(0.0, 6.0)).collect()),
            (LayerKind::Gap, Value::Map(m)) => {
                let n = (m.h * m.w) as f64;
                Value::Flat(
                    (0..m.c)
                        .map(|c| (0..m.h * m.w).map(|p| m.v[p * m.c + c]).sum::<f64>() / n)
                        .collect(),
                )
            }
            (LayerKind::Dense, Value::Flat(v)) => Value::Flat(naive_dense(&p("w"), &p("b"), &v)),
            (LayerKind::Softmax, Value::Flat(v)) => Value::Flat(naive_softmax(&v)),
            (kind, _) => panic!("reference forward cannot apply {kind:?} here"),
        };
    }
    match x {
        Value::Flat(v) => v,
        Value::Map(_) => panic!("network ended on a feature map"),
    }
}

/// Head in f64: returns mean cross-entropy over the batch.
#[derive(Debug, Clone)]
pub struct ShadowHead {
    pub f: usize,
    pub h: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ShadowHead {
    pub fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        naive_dense(&self.w1, &self.b1, x)
    }

    pub fn loss(&self, xs: &[Vec<f64>], labels: &[u8]) -> f64 {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(labels) {
            let hid: Vec<f64> = self.hidden_pre(x).into_iter().map(|v| v.max(0.0)).collect();
            let p = naive_softmax(&naive_dense(&self.w2, &self.b2, &hid));
            total -= p[y as usize].ln();
        }
        total / xs.len() as f64
    }

    /// ReLU on/off pattern over the batch.
    pub fn pattern(&self, xs: &[Vec<f64>]) -> Vec<bool> {
        xs.iter()
            .flat_map(|x| self.hidden_pre(x).into_iter().map(|v| v > 0.0))
            .collect()
    }

    pub fn group_mut(&mut self, g: usize) -> &mut Vec<f64> {
        match g {
            0 => &mut self.w1,
            1 => &mut self.b1,
            2 => &mut self.w2,
            _ => &mut self.b2,
        }
    }
}

/// Hysteresis by breadth-first search from every strong pixel over
/// 8-connected pixels whose suppressed magnitude reaches `t_low`.
pub fn flood_fill_edges(thinned: &[f64], w: usize, h: usize, t_low: f64, t_high: f64) -> Vec<bool> {
    let weak = |i: usize| thinned[i] > 0.0 && thinned[i] >= t_low;
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    for i in 0..w * h {
        if thinned[i] > 0.0 && thinned[i] >= t_high {
            seen[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                let j = ny * w + nx;
                if !seen[j] && weak(j) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    seen
}

/// Directly evaluated, normalized 2-D Gaussian.
pub fn gamma_kernel(k: usize, sigma: f64) -> Vec<f64> {
    let r = (k / 2) as f64;
    let raw: Vec<f64> = (0..k * k)
        .map(|i| {
            let (x, y) = ((i % k) as f64 - r, (i / k) as f64 - r);
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma)
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}
