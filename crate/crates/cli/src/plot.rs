//! Scatter rendering of a point cloud: time across, frequency up, louder
//! points darker.

use image::{GrayImage, Luma};
use napres::ReassignedPointCloud;

const MARGIN: u32 = 20;

/// Renders the cloud over `[0, duration] × [f_min, f_max]`. Overlapping
/// points keep the darkest value, so the image does not depend on point
/// order.
pub fn render_cloud(cloud: &ReassignedPointCloud, width: u32, height: u32) -> GrayImage {
    let mut img = GrayImage::from_pixel(width, height, Luma([255]));
    let (w, h) = (
        width.saturating_sub(2 * MARGIN),
        height.saturating_sub(2 * MARGIN),
    );
    if w < 2 || h < 2 {
        return img;
    }
    frame(&mut img, w, h);

    let duration = if cloud.source_duration > 0.0 {
        cloud.source_duration
    } else {
        cloud
            .points
            .iter()
            .map(|p| p.t_sec)
            .fold(0.0, f64::max)
            .max(1e-9)
    };
    let (f_lo, f_hi) = (cloud.prune.f_min, cloud.prune.f_max);
    let floor = cloud.prune.amp_threshold_db.min(-1e-9);
    for p in &cloud.points {
        let x = p.t_sec / duration;
        let y = (p.f_hz - f_lo) / (f_hi - f_lo);
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            continue;
        }
        let px = MARGIN + (x * (w - 1) as f64).round() as u32;
        let py = MARGIN + h - 1 - (y * (h - 1) as f64).round() as u32;
        // 0 dB is black, the pruning floor is light grey.
        let level = (p.mag_db / floor).clamp(0.0, 1.0);
        let shade = (level * 220.0).round() as u8;
        let pixel = img.get_pixel_mut(px, py);
        pixel.0[0] = pixel.0[0].min(shade);
    }
    img
}

fn frame(img: &mut GrayImage, w: u32, h: u32) {
    let grey = Luma([160]);
    for x in MARGIN - 1..=MARGIN + w {
        img.put_pixel(x, MARGIN - 1, grey);
        img.put_pixel(x, MARGIN + h, grey);
    }
    for y in MARGIN - 1..=MARGIN + h {
        img.put_pixel(MARGIN - 1, y, grey);
        img.put_pixel(MARGIN + w, y, grey);
    }
}
