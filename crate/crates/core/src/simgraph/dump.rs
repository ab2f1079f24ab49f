//! Text dump of neighbor tables: `<item>\t<rank>\t<neighbor>\t<score>` with
//! 1-based ranks and scores printed to 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{NeighborTable, TableSource};
use crate::error::{Error, Result};

/// `%.9g`-style formatting.
pub(crate) fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let mut s = format!("{x:.decimals$}");
        // Rounding can carry into a new digit (9.999999999 -> 10.00000000).
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
            if s.ends_with('.') {
                s.pop();
            }
        }
        s
    } else {
        format!("{x:.8e}")
    }
}

pub fn write_table_dump(table: &NeighborTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..table.item_count() {
        for (rank, (j, s)) in table.entries(i).enumerate() {
            writeln!(out, "{i}\t{}\t{j}\t{}", rank + 1, format_sig9(s)).unwrap();
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a dump back. Scores come back rounded to 9 significant digits;
/// neighbor ids and order are exact.
pub fn read_table_dump(path: &Path, source: TableSource, k: usize, item_count: usize) -> Result<NeighborTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let width = k.min(item_count.saturating_sub(1));
    let mut rows: Vec<Vec<(f64, u32)>> = vec![Vec::with_capacity(width); item_count];
    for (n, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |msg: &str| Error::format_line(path, n + 1, msg.to_string());
        if fields.len() != 4 {
            return Err(bad("expected 4 tab-separated fields"));
        }
        let item: usize = fields[0].parse().map_err(|_| bad("malformed item"))?;
        let rank: usize = fields[1].parse().map_err(|_| bad("malformed rank"))?;
        let neighbor: u32 = fields[2].parse().map_err(|_| bad("malformed neighbor"))?;
        let score: f64 = fields[3].parse().map_err(|_| bad("malformed score"))?;
        if item >= item_count || neighbor as usize >= item_count {
            return Err(bad("index out of range"));
        }
        if rank != rows[item].len() + 1 || rank > width {
            return Err(bad("ranks must run 1..=width in order"));
        }
        rows[item].push((score, neighbor));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::format_line(
            path,
            text.lines().count(),
            format!("item {i} has an incomplete list"),
        ));
    }
    let table = NeighborTable::from_rows(source, k, item_count, rows);
    Ok(table)
}
