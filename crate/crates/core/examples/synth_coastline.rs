//! Writes the synthetic coastline raster used by the bundled configs.
//!
//! ```text
//! cargo run --example synth_coastline -- 100 200 7 > data/coastline_100x200.gg
//! ```

use taskroute::terrain::GrayGrid;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: u64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let grid = GrayGrid::synthetic_coastline(arg(0, 100) as usize, arg(1, 200) as usize, arg(2, 7));
    print!("{}", grid.to_text());
}
