//! Dataset layout, binary labeling, preprocessing and the synthetic
//! phantom generator.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::imgproc::{read_pnm, resize_bilinear, to_grayscale, ImageU8};
use crate::nn::INPUT_SIZE;
use crate::numerics::Tensor;

/// Subdirectory names and their binary labels (0 = no tumor, 1 = tumor).
pub const CLASS_MAP: [(&str, u8); 4] = [("no_tumor", 0), ("glioma", 1), ("pituitary", 1), ("meningioma", 1)];

pub fn label_for_class(class: &str) -> Option<u8> {
    CLASS_MAP.iter().find(|(c, _)| *c == class).map(|&(_, l)| l)
}

pub fn class_name(label: u8) -> &'static str {
    if label == 1 {
        "tumor"
    } else {
        "no tumor"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub class: String,
    pub label: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Skipped subdirectories and similar non-fatal findings.
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn labels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for e in &self.entries {
            w.serialize(e).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `path,class,label` manifest; relative paths resolve against
    /// the manifest's directory.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut entries = Vec::new();
        for row in r.deserialize() {
            let mut e: ManifestEntry = row.map_err(csv_err)?;
            if label_for_class(&e.class) != Some(e.label) {
                return Err(Error::Dataset(format!(
                    "manifest row {:?}: class {:?} does not carry label {}",
                    e.path, e.class, e.label
                )));
            }
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
            entries.push(e);
        }
        if entries.is_empty() {
            return Err(Error::Dataset(format!("manifest {path:?} has no entries")));
        }
        Ok(DatasetManifest {
            entries,
            warnings: Vec::new(),
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Dataset(format!("manifest CSV: {e}"))
}

fn is_pnm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("ppm"))
}

/// Enumerates every PGM/PPM under the known class subdirectories of `root`,
/// sorted by path.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let mut manifest = DatasetManifest::default();
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    dirs.sort();
    for dir in dirs.into_iter().filter(|p| p.is_dir()) {
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let Some(label) = label_for_class(&name) else {
            manifest
                .warnings
                .push(format!("skipping unknown class directory {dir:?}"));
            continue;
        };
        for file in fs::read_dir(&dir)? {
            let path = file?.path();
            if path.is_file() && is_pnm(&path) {
                manifest.entries.push(ManifestEntry {
                    path,
                    class: name.clone(),
                    label,
                });
            }
        }
    }
    if manifest.entries.is_empty() {
        return Err(Error::Dataset(format!("no PGM/PPM images found under {root:?}")));
    }
    manifest.entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(manifest)
}

/// Network-ready sample: `128×128×3` values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedSample {
    pub tensor: Tensor,
    pub label: u8,
    pub source: PathBuf,
}

/// Grayscale → 128×128 bilinear resize → /255 → three identical channels.
pub fn preprocess(img: &ImageU8) -> Result<Tensor> {
    let gray = resize_bilinear(&to_grayscale(img), INPUT_SIZE, INPUT_SIZE)?;
    let data = gray
        .data()
        .iter()
        .flat_map(|&g| {
            let v = g as f32 / 255.0;
            [v, v, v]
        })
        .collect();
    Tensor::from_vec(&[INPUT_SIZE, INPUT_SIZE, 3], data)
}

pub fn load_sample(entry: &ManifestEntry) -> Result<PreprocessedSample> {
    let img = read_pnm(&entry.path).map_err(|e| Error::Dataset(format!("{}: {e}", entry.path.display())))?;
    Ok(PreprocessedSample {
        tensor: preprocess(&img)?,
        label: entry.label,
        source: entry.path.clone(),
    })
}

/// Generated image with its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticImage {
    pub image: ImageU8,
    pub label: u8,
    pub class: &'static str,
}

pub const SYNTHETIC_SIZE: usize = 128;

struct Phantom {
    cx: f64,
    cy: f64,
    ax: f64,
    ay: f64,
    tilt: f64,
    level: f64,
    texture: [(f64, f64, f64, f64); 2],
    noise_seed: u64,
}

impl Phantom {
    fn sample(rng: &mut Pcg64) -> Self {
        let s = SYNTHETIC_SIZE as f64;
        let mut wave = || {
            (
                rng.random_range(0.03..0.12),
                rng.random_range(0.03..0.12),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(2.0..6.0),
            )
        };
        let texture = [wave(), wave()];
        Phantom {
            cx: s / 2.0 + rng.random_range(-6.0..6.0),
            cy: s / 2.0 + rng.random_range(-6.0..6.0),
            ax: rng.random_range(0.30..0.40) * s,
            ay: rng.random_range(0.36..0.45) * s,
            tilt: rng.random_range(-0.3..0.3),
            level: rng.random_range(65.0..75.0),
            texture,
            noise_seed: rng.random(),
        }
    }

    /// Normalized elliptical radius of `(x, y)`; < 1 inside the skull outline.
    fn radius(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (c, s) = (self.tilt.cos(), self.tilt.sin());
        let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
        ((u / self.ax).powi(2) + (v / self.ay).powi(2)).sqrt()
    }

    /// Float intensities, at most `level + 13` anywhere.
    fn render(&self) -> Vec<f64> {
        let n = SYNTHETIC_SIZE;
        let mut noise = Pcg64::seed_from_u64(self.noise_seed);
        let mut out = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
                // soft edge over ~4% of the radius
                let inside = 1.0 / (1.0 + ((self.radius(xf, yf) - 1.0) / 0.02).exp());
                let tex: f64 = self
                    .texture
                    .iter()
                    .map(|&(fx, fy, phase, amp)| amp * (fx * xf + fy * yf + phase).sin())
                    .sum::<f64>()
                    * 0.5;
                let grain = noise.random_range(-3.0..3.0);
                out.push(inside * (self.level + tex) + 4.0 + grain);
            }
        }
        out
    }
}

/// Balanced synthetic set: `n_per_class` ellipse phantoms without a lesion
/// (label 0) and the same phantoms each with one bright Gaussian blob inside
/// the outline (label 1). Deterministic per seed.
pub fn generate_synthetic(n_per_class: usize, seed: u64) -> Result<Vec<SyntheticImage>> {
    if n_per_class == 0 {
        return Err(Error::Precondition(
            "synthetic set needs at least one image per class".into(),
        ));
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        let phantom = Phantom::sample(&mut rng);
        let base = phantom.render();
        // blob center well inside the outline, where the phantom is ≥ level - 15
        let (bx, by) = loop {
            let x = rng.random_range(0.0..SYNTHETIC_SIZE as f64);
            let y = rng.random_range(0.0..SYNTHETIC_SIZE as f64);
            if phantom.radius(x, y) < 0.6 {
                break (x, y);
            }
        };
        let sigma = rng.random_range(10.0..18.0);
        let amp = phantom.level * rng.random_range(1.8..2.2);
        let n = SYNTHETIC_SIZE;
        let mut lesion = base.clone();
        for y in 0..n {
            for x in 0..n {
                let d2 = (x as f64 + 0.5 - bx).powi(2) + (y as f64 + 0.5 - by).powi(2);
                lesion[y * n + x] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
        let to_img = |v: &[f64]| {
            let data = v.iter().map(|&p| p.round().clamp(0.0, 255.0) as u8).collect();
            ImageU8::new(n, n, 1, data)
        };
        out.push(SyntheticImage {
            image: to_img(&base)?,
            label: 0,
            class: "no_tumor",
        });
        out.push(SyntheticImage {
            image: to_img(&lesion)?,
            label: 1,
            class: "glioma",
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::write_pnm;

    #[test]
    fn class_map() {
        assert_eq!(label_for_class("no_tumor"), Some(0));
        for c in ["glioma", "pituitary", "meningioma"] {
            assert_eq!(label_for_class(c), Some(1));
        }
        assert_eq!(label_for_class("other"), None);
    }

    #[test]
    fn preprocess_constants() {
        let white = ImageU8::filled(128, 128, 1, 255).unwrap();
        let t = preprocess(&white).unwrap();
        assert_eq!(t.dims(), &[128, 128, 3]);
        assert!(t.data().iter().all(|&v| v == 1.0));
        let black = ImageU8::filled(40, 70, 3, 0).unwrap();
        assert!(preprocess(&black).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn preprocess_checkerboard() {
        let img = ImageU8::from_fn(256, 256, |x, y| if (x + y) % 2 == 0 { 255 } else { 0 }).unwrap();
        let t = preprocess(&img).unwrap();
        assert_eq!(t.dims(), &[128, 128, 3]);
        for px in t.data().chunks(3) {
            assert!(px[0] == px[1] && px[1] == px[2]);
            assert!((0.0..=1.0).contains(&px[0]));
        }
    }

    #[test]
    fn synthetic_properties() {
        let a = generate_synthetic(10, 3).unwrap();
        assert_eq!(a, generate_synthetic(10, 3).unwrap());
        assert_eq!(a.len(), 20);
        assert_eq!(a.iter().filter(|s| s.label == 1).count(), 10);
        for pair in a.chunks(2) {
            let max = |s: &SyntheticImage| *s.image.data().iter().max().unwrap();
            assert_eq!((pair[0].label, pair[1].label), (0, 1));
            assert!(max(&pair[1]) > max(&pair[0]));
        }
        assert_ne!(a, generate_synthetic(10, 4).unwrap());
        assert!(generate_synthetic(0, 1).is_err());
    }

    #[test]
    fn scan_labels_and_skips() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageU8::filled(4, 4, 1, 9).unwrap();
        for (sub, file) in [
            ("no_tumor", "b.pgm"),
            ("no_tumor", "a.pgm"),
            ("glioma", "c.pgm"),
            ("misc", "d.pgm"),
        ] {
            fs::create_dir_all(dir.path().join(sub)).unwrap();
            write_pnm(dir.path().join(sub).join(file), &img).unwrap();
        }
        fs::create_dir_all(dir.path().join("pituitary")).unwrap();
        fs::write(dir.path().join("glioma/notes.txt"), "x").unwrap();
        let m = scan_dataset(dir.path()).unwrap();
        let names: Vec<_> = m
            .entries
            .iter()
            .map(|e| e.path.strip_prefix(dir.path()).unwrap().to_owned())
            .collect();
        assert_eq!(
            names,
            [
                Path::new("glioma/c.pgm"),
                Path::new("no_tumor/a.pgm"),
                Path::new("no_tumor/b.pgm")
            ]
        );
        assert_eq!(m.labels(), [1, 0, 0]);
        assert_eq!(m.warnings.len(), 1);

        let csv = dir.path().join("manifest.csv");
        m.write_csv(&csv).unwrap();
        let back = DatasetManifest::read_csv(&csv).unwrap();
        assert_eq!(back.entries, m.entries);
    }

    #[test]
    fn scan_empty_root_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(scan_dataset(dir.path()), Err(Error::Dataset(_))));
    }
}
