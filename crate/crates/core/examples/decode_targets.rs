//! Decode one point set carelessly and carefully and print the maps.
//!
//! cargo run --example decode_targets

use msl::{decode_careful, decode_careless, DecoderParams, PointSet, TargetMap};

fn show(name: &str, map: &TargetMap) {
    println!("{name}:");
    for y in 0..map.height() {
        let row: Vec<String> = (0..map.width()).map(|x| format!("{:4.2}", map.get(x, y))).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> msl::Result<()> {
    let truth = PointSet::from(vec![(2.0, 2.0), (6.4, 4.6)]);
    let shape = (9, 7);
    show("careless", &decode_careless(&truth, shape));
    for sigma in [0.7, 1.5] {
        let map = decode_careful(&truth, shape, &DecoderParams::careful(sigma, 3.0 * sigma)?)?;
        show(&format!("careful sigma={sigma}"), &map);
    }
    Ok(())
}
