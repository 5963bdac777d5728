//! Binary PGM (P5) images. Densities map linearly to gray levels: the
//! minimum becomes 0 and the maximum 255. A constant image is all zeros.
//! The sidecar text file records the minimum and maximum.

use std::io::Write;

use anyhow::Result;
use dfs_core::ImageVector;

pub fn value_range(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn gray_levels(values: &[f64]) -> Vec<u8> {
    let (lo, hi) = value_range(values);
    values
        .iter()
        .map(|&v| if hi > lo { (255.0 * (v - lo) / (hi - lo)).round() as u8 } else { 0 })
        .collect()
}

pub fn write_pgm<W: Write>(mut out: W, image: &ImageVector) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", image.width(), image.height())?;
    out.write_all(&gray_levels(image.values()))?;
    Ok(())
}

pub fn sidecar(image: &ImageVector) -> String {
    let (lo, hi) = value_range(image.values());
    format!("min = {lo}\nmax = {hi}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_levels() {
        let img = ImageVector::new(3, 2, vec![0.0, 0.5, 1.0, -1.0, 2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[85, 128, 170, 0, 255, 170]);
        assert_eq!(sidecar(&img), "min = -1\nmax = 2\n");
    }

    #[test]
    fn constant_image_is_black() {
        assert_eq!(gray_levels(&[3.0; 4]), vec![0; 4]);
    }
}
