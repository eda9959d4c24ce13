//! Encode a hand-made predicted map into points for a few encoder settings.
//!
//! cargo run --example encode_peaks

use msl::{encode, EncoderParams, PredictedMap};

fn main() -> msl::Result<()> {
    let (w, h) = (10, 6);
    let mut vals = vec![0.0; w * h];
    for (x, y, v) in [(2, 2, 0.9), (4, 2, 0.7), (7, 3, 0.4), (8, 1, 0.35)] {
        vals[y * w + x] = v;
    }
    let map = PredictedMap::new(w, h, vals)?;
    for (thr, sep) in [(0.3, 1.0), (0.3, 3.0), (0.5, 1.0)] {
        let pts = encode(&map, &EncoderParams::new(thr, sep)?);
        let coords: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.y)).collect();
        println!("h={thr} delta={sep}: {coords:?}");
    }
    Ok(())
}
