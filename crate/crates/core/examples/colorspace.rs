//! RGB ↔ lαβ round trip on a few pixels.

use chromaflow::colorspace::{lab_pixel_to_rgb, rgb_pixel_to_lab};

fn main() {
    for rgb in [[0, 0, 0], [128, 128, 128], [255, 255, 255], [196, 92, 58], [52, 118, 190]] {
        let lab = rgb_pixel_to_lab(rgb);
        let back = lab_pixel_to_rgb(lab);
        println!(
            "{rgb:?} -> l={:+.4} α={:+.4} β={:+.4} -> {back:?}",
            lab[0], lab[1], lab[2]
        );
    }
}
