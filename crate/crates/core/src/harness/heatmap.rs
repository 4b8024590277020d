//! Sorted-trial heatmaps of grid results.
//!
//! Each cell is `log₁₀(loss / initial)` for one trial at one checkpoint.
//! Trials are sorted within each checkpoint column, so a square reads as the
//! distribution of outcomes over time. White is the initial loss, blue is
//! lower, red is higher. Colour bounds are shared by all squares of one
//! function.

use std::fmt::Write as _;
use std::io::Write;

use super::grid::{GridResult, DIVERGED_LOSS};
use crate::problems::LossKind;
use crate::{Error, Result};

/// One `(case, row)` square: `values[checkpoint][rank]`, sorted ascending
/// along `rank`. Diverged entries are `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSquare {
    pub case: usize,
    pub row: usize,
    pub values: Vec<Vec<f64>>,
}

impl HeatmapSquare {
    /// Builds a square from raw per-trial checkpoint losses.
    pub fn from_losses(case: usize, row: usize, trials: &[Vec<f64>]) -> Result<Self> {
        let first = trials
            .first()
            .ok_or_else(|| Error::MissingRecords(format!("case {case}, row {row}")))?;
        let n_cp = first.len();
        let mut values = vec![Vec::with_capacity(trials.len()); n_cp];
        for t in trials {
            if t.len() != n_cp {
                return Err(Error::DimensionMismatch {
                    expected: n_cp,
                    found: t.len(),
                });
            }
            let initial = t[0];
            for (col, &l) in values.iter_mut().zip(t) {
                col.push(log_ratio(l, initial));
            }
        }
        for col in &mut values {
            col.sort_by(f64::total_cmp);
        }
        Ok(HeatmapSquare { case, row, values })
    }

    pub fn checkpoints(&self) -> usize {
        self.values.len()
    }

    pub fn trials(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

fn log_ratio(loss: f64, initial: f64) -> f64 {
    if loss == DIVERGED_LOSS || !loss.is_finite() {
        return f64::INFINITY;
    }
    if loss == initial {
        return 0.0;
    }
    (loss / initial).log10()
}

/// Colour-scale bounds `(min ≤ 0, max ≥ 0)` over the finite cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorScale {
    pub min: f64,
    pub max: f64,
}

impl ColorScale {
    pub fn covering<'a>(squares: impl IntoIterator<Item = &'a HeatmapSquare>) -> Self {
        let mut s = ColorScale { min: 0.0, max: 0.0 };
        for sq in squares {
            for v in sq.values.iter().flatten().filter(|v| v.is_finite()) {
                s.min = s.min.min(*v);
                s.max = s.max.max(*v);
            }
        }
        s
    }

    /// White at 0, blue below, red above; saturation `c / bound`, clipped.
    /// Non-finite values (divergence) are full red.
    pub fn rgb(&self, c: f64) -> [u8; 3] {
        if !c.is_finite() {
            return [255, 0, 0];
        }
        let fade = |t: f64| (255.0 * (1.0 - t.clamp(0.0, 1.0))).round() as u8;
        if c < 0.0 && self.min < 0.0 {
            let f = fade(c / self.min);
            [f, f, 255]
        } else if c > 0.0 && self.max > 0.0 {
            let f = fade(c / self.max);
            [255, f, f]
        } else {
            [255, 255, 255]
        }
    }
}

/// All squares of one `(function, row)` pair, in case order.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub function: LossKind,
    pub row: usize,
    pub label: String,
    pub squares: Vec<HeatmapSquare>,
    /// `(A, σ²)` of each square.
    pub settings: Vec<(f64, f64)>,
    pub scale: ColorScale,
    pub checkpoint_iters: Vec<u64>,
}

/// Groups grid results into one heatmap per `(function, row)`, sharing the
/// colour scale across all rows of a function.
pub fn heatmap_encode(result: &GridResult) -> Result<Vec<HeatmapGrid>> {
    let grid = &result.grid;
    let cps = grid.checkpoints();
    let mut out = Vec::new();
    for &function in &grid.functions {
        let case_ids: Vec<usize> = (0..result.cases.len())
            .filter(|&c| result.cases[c].kind == function)
            .collect();
        let mut group = Vec::new();
        for row in 0..grid.rows.len() {
            let mut squares = Vec::new();
            for &c in &case_ids {
                let trials: Vec<Vec<f64>> = result
                    .records_for(c, row)
                    .iter()
                    .map(|r| r.checkpoint_losses.clone())
                    .collect();
                squares.push(HeatmapSquare::from_losses(c, row, &trials)?);
            }
            group.push(HeatmapGrid {
                function,
                row,
                label: grid.rows[row].label(),
                settings: case_ids
                    .iter()
                    .map(|&c| (result.cases[c].curvature, result.cases[c].noise_var))
                    .collect(),
                squares,
                scale: ColorScale { min: 0.0, max: 0.0 },
                checkpoint_iters: cps.clone(),
            });
        }
        let scale = ColorScale::covering(group.iter().flat_map(|g| &g.squares));
        for g in &mut group {
            g.scale = scale;
        }
        out.extend(group);
    }
    Ok(out)
}

const CELL_W: usize = 8;
const CELL_H: usize = 2;
const GAP: usize = 6;

impl HeatmapGrid {
    /// `{function}_{algo}` stem for output files.
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.function, self.label)
    }

    fn columns(&self) -> usize {
        (self.squares.len() as f64).sqrt().ceil().max(1.0) as usize
    }

    fn square_size(&self) -> (usize, usize) {
        let sq = self.squares.first();
        let w = sq.map_or(0, |s| s.checkpoints()) * CELL_W;
        let h = sq.map_or(0, |s| s.trials()) * CELL_H;
        (w, h)
    }

    fn layout(&self) -> (usize, usize, usize, usize) {
        let (w, h) = self.square_size();
        let cols = self.columns();
        let rows = self.squares.len().div_ceil(cols);
        (w, h, cols, rows)
    }

    /// Squares laid out row-major, one per `(A, σ²)`; x is the checkpoint,
    /// y is the sorted trial rank (best at the top).
    pub fn to_svg(&self) -> String {
        let (w, h, cols, rows) = self.layout();
        let width = cols * (w + GAP) + GAP;
        let height = rows * (h + GAP) + GAP + 14;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" shape-rendering="crispEdges">"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{GAP}" y="11" font-family="sans-serif" font-size="10">{} / {}</text>"#,
            self.function, self.label
        );
        for (k, sq) in self.squares.iter().enumerate() {
            let ox = GAP + (k % cols) * (w + GAP);
            let oy = 14 + GAP + (k / cols) * (h + GAP);
            let (a, v) = self.settings[k];
            let _ = writeln!(s, r#"<g><title>A={a} sigma2={v}</title>"#);
            for (x, col) in sq.values.iter().enumerate() {
                for (y, &c) in col.iter().enumerate() {
                    let [r, g, b] = self.scale.rgb(c);
                    let _ = writeln!(
                        s,
                        r##"<rect x="{}" y="{}" width="{CELL_W}" height="{CELL_H}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
                        ox + x * CELL_W,
                        oy + y * CELL_H
                    );
                }
            }
            s.push_str("</g>\n");
        }
        s.push_str("</svg>\n");
        s
    }

    /// Binary PPM (P6) with the same layout as the SVG, without the title.
    pub fn to_ppm(&self) -> Vec<u8> {
        let (w, h, cols, rows) = self.layout();
        let width = cols * (w + GAP) + GAP;
        let height = rows * (h + GAP) + GAP;
        let mut px = vec![255u8; width * height * 3];
        for (k, sq) in self.squares.iter().enumerate() {
            let ox = GAP + (k % cols) * (w + GAP);
            let oy = GAP + (k / cols) * (h + GAP);
            for (x, col) in sq.values.iter().enumerate() {
                for (y, &c) in col.iter().enumerate() {
                    let rgb = self.scale.rgb(c);
                    for dy in 0..CELL_H {
                        for dx in 0..CELL_W {
                            let i = ((oy + y * CELL_H + dy) * width + ox + x * CELL_W + dx) * 3;
                            px[i..i + 3].copy_from_slice(&rgb);
                        }
                    }
                }
            }
        }
        let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
        out.extend(px);
        out
    }

    /// Raw matrix: `curvature,noise_var,rank,` then one column per
    /// checkpoint holding `log₁₀(loss/initial)`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "curvature,noise_var,rank")?;
        for it in &self.checkpoint_iters {
            write!(w, ",iter_{it}")?;
        }
        writeln!(w)?;
        for (sq, (a, v)) in self.squares.iter().zip(&self.settings) {
            for rank in 0..sq.trials() {
                write!(w, "{a},{v},{rank}")?;
                for col in &sq.values {
                    write!(w, ",{}", col[rank])?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}
