//! Rasterize a freehand closed path into a region mask and print it.

use chromaflow::regions::rasterize_closed_path;

fn main() -> chromaflow::Result<()> {
    // A lopsided star, in pixel coordinates.
    let path = [[16.0, 1.0], [20.0, 12.0], [31.0, 12.0], [22.0, 19.0], [26.0, 30.0], [16.0, 23.0], [5.0, 30.0], [9.0, 19.0], [1.0, 12.0], [12.0, 12.0]];
    let mask = rasterize_closed_path(&path, 32, 32)?;
    for y in 0..mask.height() {
        let row: String = (0..mask.width()).map(|x| if mask.get(x, y) { '#' } else { '.' }).collect();
        println!("{row}");
    }
    println!("{} of {} pixels inside", mask.count(), mask.width() * mask.height());

    // Two points enclose nothing.
    match rasterize_closed_path(&[[0.0, 0.0], [10.0, 10.0]], 32, 32) {
        Err(e) => println!("degenerate path: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
