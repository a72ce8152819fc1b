//! Prepares the training data for `tools/fit_brisque_model.py`: writes
//! randomly transformed variants of the images in `<dir>/base` to
//! `<dir>/aug`, then the quality features of every image to
//! `<dir>/features.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use evoimage::evolve::random_transform;
use evoimage::harness::list_images;
use evoimage::iqa::brisque_features;
use evoimage::{apply_sequence, load_image, save_image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn main() -> evoimage::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .expect("usage: brisque_corpus <dir>"),
    );
    let base = list_images(&dir.join("base"))?;
    let aug_dir = dir.join("aug");
    fs::create_dir_all(&aug_dir).expect("create aug dir");

    base.par_iter().enumerate().try_for_each(|(i, path)| {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let image = load_image(path)?;
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        for k in 0..2 {
            let len = rng.random_range(1..=8);
            let steps: Vec<_> = (0..len).map(|_| random_transform(&mut rng)).collect();
            if let Ok(out) = apply_sequence(&image, &steps) {
                save_image(&out, aug_dir.join(format!("{stem}_t{k}.png")))?;
            }
        }
        Ok::<_, evoimage::Error>(())
    })?;

    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for sub in ["base", "aug"] {
        for p in list_images(&dir.join(sub))? {
            let name = format!("{sub}/{}", p.file_name().unwrap().to_string_lossy());
            files.push((name, p));
        }
    }
    let rows: Vec<String> = files
        .par_iter()
        .filter_map(|(name, path): &(String, PathBuf)| features_row(name, path))
        .collect();
    fs::write(dir.join("features.csv"), rows.join("\n") + "\n").expect("write features");
    eprintln!("{} of {} images have features", rows.len(), files.len());
    Ok(())
}

fn features_row(name: &str, path: &Path) -> Option<String> {
    let image = load_image(path).ok()?;
    let f = brisque_features(&image).ok()?;
    let cells: Vec<String> = f.iter().map(|v| format!("{v:e}")).collect();
    Some(format!("{name},{}", cells.join(",")))
}
