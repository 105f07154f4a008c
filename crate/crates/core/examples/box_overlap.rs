//! Boxes, IoU, and decoding raw policy outputs into valid boxes.
//!
//! cargo run --example box_overlap

use iou_curriculum::geometry::{clamp_to_unit, iou, BBox};

fn main() -> iou_curriculum::Result<()> {
    let truth = BBox::from_pixels([120.0, 80.0, 360.0, 300.0], 640.0, 480.0)?;
    let guess = BBox::new(0.22, 0.2, 0.5, 0.6)?;
    println!("truth {:?}", truth.corners());
    println!(
        "guess {:?}  iou {:.4}",
        guess.corners(),
        iou(&truth, &guess)
    );

    // center / log-size encoding round-trips
    let enc = truth.encode();
    println!("encoded {enc:.4?} -> {:?}", clamp_to_unit(enc)?.corners());

    // shifted and shrunk versions of the truth
    for (dx, scale) in [(0.0, 1.0), (0.05, 1.0), (0.0, 0.7), (0.1, 0.5)] {
        let b = clamp_to_unit([
            enc[0] + dx,
            enc[1],
            enc[2] + f64::ln(scale),
            enc[3] + f64::ln(scale),
        ])?;
        println!("dx {dx:<4} scale {scale:<4} iou {:.4}", iou(&truth, &b));
    }

    // out-of-range raw values are clipped into the image
    let edge = clamp_to_unit([0.98, 0.02, 0.0, -9.0])?;
    println!("clipped {:?}, area {:.5}", edge.corners(), edge.area());
    Ok(())
}
