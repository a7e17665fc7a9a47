//! Scan stage on one synthetic 1920x1080 frame: initial corner windows,
//! adaptive growth around text lines, and which windows survive filtering.
//!
//! cargo run --example scan_windows -- [alpha]

use sfa::media::{FrameImage, Rect};
use sfa::scan::{adapt_window, initial_windows, scan_frame_with_record, TextLineDetection};

fn line(x0: f64, y0: f64, x1: f64, y1: f64, text: &str) -> TextLineDetection {
    TextLineDetection {
        bbox: Rect::new(x0, y0, x1, y1).unwrap(),
        confidence: 0.9,
        transcription: Some(text.into()),
    }
}

fn main() -> sfa::Result<()> {
    let alpha: f64 = std::env::args().nth(1).map(|a| a.parse().expect("alpha")).unwrap_or(0.6);
    let (w, h) = (1920, 1080);
    let frame = FrameImage::filled(w, h, [40, 40, 40])?;
    // the second line straddles the top-left window's right edge at 0.6
    let lines = vec![
        line(120.0, 80.0, 700.0, 140.0, "GRAND OPENING"),
        line(1000.0, 600.0, 1300.0, 731.25, "HALF PRICE"),
        line(1500.0, 950.0, 1850.0, 1000.0, "EXIT"),
    ];

    println!("frame {w}x{h}, alpha {alpha}");
    for win in initial_windows(w, h, alpha)? {
        let grown = adapt_window(win, &lines, w, h);
        println!(
            "  {:<2} scale {:.4} -> {:.4}  rect {:?}",
            win.anchor.short_name(),
            win.scale,
            grown.scale,
            grown.rect.as_array()
        );
    }

    let (regions, record) = scan_frame_with_record(&frame, &lines, alpha)?;
    println!("{} candidate regions:", regions.len());
    for r in &regions {
        let texts: Vec<&str> = r.contained_lines.iter().filter_map(|l| l.transcription.as_deref()).collect();
        println!(
            "  {:<2} normalized to {:?}, holds {:?}",
            r.anchor().short_name(),
            r.normalized_image.dimensions(),
            texts
        );
    }
    println!("{}", serde_json::to_string_pretty(&record).unwrap());
    Ok(())
}
