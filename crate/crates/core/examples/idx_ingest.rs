//! Writes a tiny IDX image/label pair to a temp dir and loads it back, or
//! loads real files when given.
//!
//!     cargo run --example idx_ingest -- [images.idx labels.idx]

use std::path::PathBuf;

use fedgan::data::{load_idx, pixel_to_feature};

fn idx_images(rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let count = pixels.len() as u32 / (rows * cols);
    let mut out = Vec::new();
    for word in [0x0803, count, rows, cols] {
        out.extend_from_slice(&u32::to_be_bytes(word));
    }
    out.extend_from_slice(pixels);
    out
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for word in [0x0801, labels.len() as u32] {
        out.extend_from_slice(&u32::to_be_bytes(word));
    }
    out.extend_from_slice(labels);
    out
}

fn main() -> fedgan::Result<()> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let (images, labels) = if let [images, labels] = args.as_slice() {
        (images.clone(), labels.clone())
    } else {
        let dir = std::env::temp_dir().join(format!("fedgan-idx-{}", std::process::id()));
        std::fs::create_dir_all(&dir).expect("temp dir");
        let images = dir.join("images.idx");
        let labels = dir.join("labels.idx");
        std::fs::write(&images, idx_images(2, 2, &[0, 255, 128, 64, 1, 2, 3, 4])).expect("write");
        std::fs::write(&labels, idx_labels(&[3, 7])).expect("write");
        (images, labels)
    };

    let data = load_idx(&images, &labels)?;
    println!(
        "{} samples, dim {}, {} classes",
        data.len(),
        data.dim(),
        data.n_classes()
    );
    println!("class histogram {:?}", data.class_histogram());
    println!("first row {:?}", data.features().row(0).to_vec());
    println!("byte 128 -> {}", pixel_to_feature(128));
    Ok(())
}
