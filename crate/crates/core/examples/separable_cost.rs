//! Cost of every MobileNet-V1 block as a standard convolution versus its
//! depthwise + pointwise factorization, plus a numeric check that the two
//! compute the same thing when the standard kernel is rank-factored.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use tumorscan::nn::{
    conv2d, depthwise_conv, flops_estimate, pointwise_conv, LayerKind, LayerSpec, ModelConfig, Padding,
};
use tumorscan::numerics::Tensor;

fn random(rng: &mut Pcg64, dims: &[usize]) -> Tensor {
    let n = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> tumorscan::Result<()> {
    let model = ModelConfig::mobilenet_v1();
    let (mut h, mut w) = (model.input_dims()[0], model.input_dims()[1]);
    let (mut total_std, mut total_sep) = (0u128, 0u128);

    println!(
        "{:<10} {:>4} {:>5} {:>5} {:>8} {:>14} {:>14} {:>7}",
        "block", "K", "C", "D", "out", "standard", "separable", "ratio"
    );
    let layers = model.layers();
    for (i, dw) in layers.iter().enumerate() {
        if !dw.kind.is_conv() {
            continue;
        }
        h = h.div_ceil(dw.stride);
        w = w.div_ceil(dw.stride);
        if dw.kind != LayerKind::Depthwise {
            continue;
        }
        let pw = layers[i + 1..]
            .iter()
            .find(|l| l.kind == LayerKind::Pointwise)
            .expect("pointwise follows");
        let fused = LayerSpec::conv2d(dw.name.clone(), dw.kernel, dw.stride, dw.in_channels, pw.out_channels);
        let est = flops_estimate(&fused, h, w)?;
        total_std += est.standard;
        total_sep += est.separable;
        let block = dw.name.trim_end_matches(".dw").trim_start_matches("backbone.");
        println!(
            "{block:<10} {:>4} {:>5} {:>5} {:>8} {:>14} {:>14} {:>7.4}",
            dw.kernel,
            dw.in_channels,
            pw.out_channels,
            format!("{h}x{w}"),
            est.standard,
            est.separable,
            est.ratio
        );
    }
    println!(
        "total: {total_std} vs {total_sep} multiply-adds ({:.1}x fewer)",
        total_std as f64 / total_sep as f64
    );

    // dw[u,v,c] * pw[c,d] as a full K×K×C×D kernel
    let mut rng = Pcg64::seed_from_u64(11);
    let (k, c, d) = (3, 8, 16);
    let x = random(&mut rng, &[12, 12, c]);
    let dw = random(&mut rng, &[k, k, c]);
    let pw = random(&mut rng, &[c, d]);
    let mut full = Vec::with_capacity(k * k * c * d);
    for uv in 0..k * k {
        for ci in 0..c {
            for di in 0..d {
                full.push(dw.data()[uv * c + ci] * pw.data()[ci * d + di]);
            }
        }
    }
    let full = Tensor::from_vec(&[k, k, c, d], full)?;
    let factored = pointwise_conv(
        &depthwise_conv(&x, &dw, &Tensor::zeros(&[c])?, 1, Padding::Same)?,
        &pw,
        &Tensor::zeros(&[d])?,
    )?;
    let direct = conv2d(&x, &full, &Tensor::zeros(&[d])?, 1, Padding::Same)?;
    println!("max |separable - standard| = {:.2e}", factored.max_abs_diff(&direct)?);
    Ok(())
}
