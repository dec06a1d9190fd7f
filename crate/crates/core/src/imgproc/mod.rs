//! 8-bit image handling and the visualization filters: Gaussian blur,
//! Canny edges and the JET pseudothermal colormap.

mod canny;
mod colormap;
mod gaussian;
mod pnm;

pub use canny::{canny, non_maximum_suppression, sobel_gradients, CannyConfig, GradientField};
pub use colormap::{apply_colormap, jet};
pub use gaussian::{gaussian_blur, gaussian_blur_plane, gaussian_kernel, GaussianKernel, GaussianSpec};
pub use pnm::{decode_pnm, encode_pnm, read_pnm, write_pnm};

use crate::error::{Error, Result};

/// Row-major 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Precondition(format!("channels must be 1 or 3, got {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Precondition(format!("empty image {width}×{height}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Precondition(format!(
                "{width}×{height}×{channels} image needs {} bytes, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(ImageU8 {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Gray image from a pixel function `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    fn require_gray(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::Precondition(format!(
                "{op} needs a 1-channel image, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    /// Gray pixels as a float plane.
    pub fn to_plane(&self) -> Result<Plane> {
        self.require_gray("to_plane")?;
        Ok(Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64).collect(),
        })
    }
}

/// Single-channel float image used between filter stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::Precondition(format!(
                "plane {width}×{height} with {} values",
                data.len()
            )));
        }
        Ok(Plane { width, height, data })
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Rounds and clamps into an 8-bit gray image.
    pub fn to_image(&self) -> ImageU8 {
        let data = self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
        ImageU8 {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }
}

/// Reflect-101 border: `-1 → 1`, `n → n-2`.
pub(crate) fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// RGB → gray with luma weights 0.299/0.587/0.114; gray input passes through.
pub fn to_grayscale(img: &ImageU8) -> ImageU8 {
    if img.channels == 1 {
        return img.clone();
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8)
        .collect();
    ImageU8 {
        width: img.width,
        height: img.height,
        channels: 1,
        data,
    }
}

/// Replicates the gray plane into three identical channels.
pub fn gray_to_rgb(img: &ImageU8) -> Result<ImageU8> {
    img.require_gray("gray_to_rgb")?;
    let data = img.data.iter().flat_map(|&v| [v, v, v]).collect();
    Ok(ImageU8 {
        width: img.width,
        height: img.height,
        channels: 3,
        data,
    })
}

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &ImageU8, out_w: usize, out_h: usize) -> Result<ImageU8> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Precondition(format!("output size {out_w}×{out_h}")));
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|d| {
                let src = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, src - i0 as f64)
            })
            .collect()
    };
    let xs = taps(out_w, img.width);
    let ys = taps(out_h, img.height);
    let ch = img.channels;
    let at = |x: usize, y: usize, c: usize| img.data[(y * img.width + x) * ch + c] as f64;
    let mut data = Vec::with_capacity(out_w * out_h * ch);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let top = at(x0, y0, c) * (1.0 - fx) + at(x1, y0, c) * fx;
                let bottom = at(x0, y1, c) * (1.0 - fx) + at(x1, y1, c) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageU8::new(out_w, out_h, ch, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grayscale_examples() {
        let g = ImageU8::new(2, 1, 1, vec![3, 200]).unwrap();
        assert_eq!(to_grayscale(&g), g);
        let white = ImageU8::new(1, 1, 3, vec![255, 255, 255]).unwrap();
        assert_eq!(to_grayscale(&white).data(), &[255]);
        let red = ImageU8::new(1, 1, 3, vec![255, 0, 0]).unwrap();
        assert_eq!(to_grayscale(&red).data(), &[76]);
    }

    #[test]
    fn rgb_replication() {
        let g = ImageU8::new(1, 1, 1, vec![5]).unwrap();
        assert_eq!(gray_to_rgb(&g).unwrap().data(), &[5, 5, 5]);
        let z = ImageU8::filled(3, 2, 1, 0).unwrap();
        assert_eq!(gray_to_rgb(&z).unwrap(), ImageU8::filled(3, 2, 3, 0).unwrap());
        let rgb = gray_to_rgb(&g).unwrap();
        assert!(matches!(gray_to_rgb(&rgb), Err(Error::Precondition(_))));
    }

    #[test]
    fn resize_examples() {
        let img = ImageU8::from_fn(7, 5, |x, y| (x * 30 + y) as u8).unwrap();
        assert_eq!(resize_bilinear(&img, 7, 5).unwrap(), img);

        let img = ImageU8::new(2, 2, 1, vec![0, 0, 255, 255]).unwrap();
        assert_eq!(resize_bilinear(&img, 1, 1).unwrap().data(), &[128]);

        let c = ImageU8::filled(13, 9, 3, 77).unwrap();
        assert_eq!(
            resize_bilinear(&c, 40, 3).unwrap(),
            ImageU8::filled(40, 3, 3, 77).unwrap()
        );
        assert!(resize_bilinear(&c, 0, 3).is_err());
    }

    #[test]
    fn reflect_border() {
        assert_eq!(reflect101(-1, 5), 1);
        assert_eq!(reflect101(-2, 5), 2);
        assert_eq!(reflect101(5, 5), 3);
        assert_eq!(reflect101(6, 5), 2);
        assert_eq!(reflect101(-3, 1), 0);
        assert_eq!(reflect101(-3, 2), 1);
    }

    proptest! {
        #[test]
        fn resize_stays_in_input_range(
            w in 1usize..12, h in 1usize..12, ow in 1usize..30, oh in 1usize..30,
            seed in prop::collection::vec(any::<u8>(), 144),
        ) {
            let img = ImageU8::new(w, h, 1, seed[..w * h].to_vec()).unwrap();
            let lo = *img.data().iter().min().unwrap();
            let hi = *img.data().iter().max().unwrap();
            let out = resize_bilinear(&img, ow, oh).unwrap();
            prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
        }

        #[test]
        fn luma_of_replicated_gray_is_identity(data in prop::collection::vec(any::<u8>(), 1..64)) {
            let g = ImageU8::new(data.len(), 1, 1, data).unwrap();
            prop_assert_eq!(to_grayscale(&gray_to_rgb(&g).unwrap()), g);
        }
    }
}
