use super::ImageU8;
use crate::error::{Error, Result};

/// JET colormap as a closed-form piecewise-linear ramp on `v ∈ [0, 1]`.
pub fn jet(v: f64) -> [u8; 3] {
    let ramp = |center: f64| ((1.5 - (4.0 * v - center).abs()).clamp(0.0, 1.0) * 255.0).round() as u8;
    [ramp(3.0), ramp(2.0), ramp(1.0)]
}

/// Pseudothermal rendering of a gray image: each level mapped through [`jet`].
pub fn apply_colormap(img: &ImageU8) -> Result<ImageU8> {
    if img.channels() != 1 {
        return Err(Error::Precondition(format!(
            "colormap needs a 1-channel image, got {} channels",
            img.channels()
        )));
    }
    let lut: Vec<[u8; 3]> = (0..=255u8).map(|g| jet(g as f64 / 255.0)).collect();
    let data = img.data().iter().flat_map(|&g| lut[g as usize]).collect();
    ImageU8::new(img.width(), img.height(), 3, data)
}
