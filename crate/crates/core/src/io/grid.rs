use std::fmt::Write;

use crate::patch::PatchGrid;

/// Row-major CSV dump of a patch image, one grid row per line.
pub fn write_grid(grid: &PatchGrid) -> String {
    let d = grid.diameter();
    let mut s = String::new();
    for row in grid.values().chunks(d) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{v:.9}").unwrap();
        }
        s.push('\n');
    }
    s
}
