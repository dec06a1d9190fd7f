//! Renders the blur, pseudothermal and Canny panels for a synthetic scan.
//!
//! cargo run --example filter_panels -- [out_dir] [input.pgm]

use std::path::PathBuf;

use tumorscan::cli::make_panels;
use tumorscan::data::generate_synthetic;
use tumorscan::imgproc::{read_pnm, write_pnm, CannyConfig, GaussianSpec};

fn main() -> tumorscan::Result<()> {
    let mut args = std::env::args().skip(1);
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "panels".into()));
    let image = match args.next() {
        Some(path) => read_pnm(path)?,
        // first tumor-class sample
        None => generate_synthetic(1, 3)?.swap_remove(1).image,
    };

    let gaussian = GaussianSpec::new(5, 1.0)?;
    let canny = CannyConfig::new(20.0, 40.0, gaussian)?;
    let panels = make_panels(&image, &gaussian, &canny)?;

    std::fs::create_dir_all(&out_dir)?;
    write_pnm(out_dir.join("gray.pgm"), &panels.gray)?;
    write_pnm(out_dir.join("blurred.pgm"), &panels.blurred)?;
    write_pnm(out_dir.join("thermal.ppm"), &panels.thermal)?;
    write_pnm(out_dir.join("edges.pgm"), &panels.edges)?;

    let edge_pixels = panels.edges.data().iter().filter(|&&v| v == 255).count();
    println!("edge pixels: {edge_pixels} of {}", panels.edges.data().len());
    println!("panels written to {}", out_dir.display());
    Ok(())
}
