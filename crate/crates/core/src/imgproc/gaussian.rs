use super::{reflect101, ImageU8, Plane};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Square Gaussian window: odd side length and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    kernel_size: usize,
    sigma: f64,
}

impl GaussianSpec {
    pub fn new(kernel_size: usize, sigma: f64) -> Result<Self> {
        if kernel_size == 0 || kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "kernel size must be odd and ≥ 1, got {kernel_size}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianSpec { kernel_size, sigma })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Default for GaussianSpec {
    /// 5×5 window, σ = 1.
    fn default() -> Self {
        GaussianSpec {
            kernel_size: 5,
            sigma: 1.0,
        }
    }
}

/// Normalized Gaussian weights, row-major `size × size`, kept in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    size: usize,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)` from the center.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius() as isize;
        self.weights[((dy + r) as usize) * self.size + (dx + r) as usize]
    }

    pub fn to_tensor(&self) -> Tensor {
        let data = self.weights.iter().map(|&w| w as f32).collect();
        Tensor::from_vec(&[self.size, self.size], data).expect("kernel shape is valid")
    }
}

/// Samples `exp(-(x²+y²)/(2σ²))` at integer offsets and normalizes to unit sum.
pub fn gaussian_kernel(spec: &GaussianSpec) -> GaussianKernel {
    let size = spec.kernel_size;
    let r = (size / 2) as f64;
    let two_var = 2.0 * spec.sigma * spec.sigma;
    let mut weights = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 - r, y as f64 - r);
            weights.push((-(dx * dx + dy * dy) / two_var).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    GaussianKernel { size, weights }
}

/// 2-D convolution of a float plane with reflect-101 borders.
pub fn gaussian_blur_plane(plane: &Plane, spec: &GaussianSpec) -> Plane {
    let kernel = gaussian_kernel(spec);
    let r = kernel.radius() as isize;
    let (w, h) = (plane.width, plane.height);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for dy in -r..=r {
                let sy = reflect101(y + dy, h);
                for dx in -r..=r {
                    let sx = reflect101(x + dx, w);
                    acc += kernel.at(dx, dy) * plane.data[sy * w + sx];
                }
            }
            out.push(acc);
        }
    }
    Plane {
        width: w,
        height: h,
        data: out,
    }
}

/// Gaussian blur of a gray image; output rounded back to 0–255.
pub fn gaussian_blur(img: &ImageU8, spec: &GaussianSpec) -> Result<ImageU8> {
    Ok(gaussian_blur_plane(&img.to_plane()?, spec).to_image())
}
