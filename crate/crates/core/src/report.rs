//! Parliament and bar-chart SVG rendering, and result tables.
//!
//! Parliament layout: rows are concentric half-circles filled from the outside
//! in, each row holding a number of seats proportional to its radius, with
//! seats evenly spaced in angle. Seats are then swept from left to right and
//! handed out to entities in descending seat order, so every entity occupies
//! one contiguous wedge.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::apportion::SeatAllocation;
use crate::pipeline::PipelineResult;
use crate::stats::{DirectionMap, Sign};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no direction for seated entity {0:?}")]
    MissingDirection(String),
    #[error("allocation is empty")]
    EmptyAllocation,
}

/// Twenty distinct hues, handed out in descending seat order.
pub const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
    "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];

pub const NEGATIVE_COLOR: &str = "#d62728";
pub const POSITIVE_COLOR: &str = "#1f77b4";
pub const ZERO_COLOR: &str = "#9e9e9e";

/// Innermost row radius as a fraction of the outer radius.
const INNER_RADIUS: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub width: u32,
    /// Minimum height; charts grow when the legend needs more room.
    pub height: u32,
    /// Seat dot radius in pixels; derived from the row spacing when unset.
    pub dot_radius: Option<f64>,
    /// Number of arc rows; the smallest row count that fits every seat when unset.
    pub rows: Option<usize>,
    pub palette: Vec<String>,
    pub title: Option<String>,
}

impl Default for ChartSpec {
    fn default() -> Self {
        Self {
            width: 900,
            height: 560,
            dot_radius: None,
            rows: None,
            palette: PALETTE.iter().map(|s| s.to_string()).collect(),
            title: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeatPosition {
    /// Unit-radius coordinates; the arc's centre is the origin, `y` points up.
    pub x: f64,
    pub y: f64,
    pub row: usize,
    pub angle: f64,
}

fn row_spacing(rows: usize) -> f64 {
    (1.0 - INNER_RADIUS) / rows as f64
}

fn row_radii(rows: usize) -> Vec<f64> {
    let gap = row_spacing(rows);
    (0..rows)
        .map(|i| 1.0 - gap / 2.0 - i as f64 * gap)
        .collect()
}

fn row_capacities(rows: usize) -> Vec<usize> {
    let gap = row_spacing(rows);
    row_radii(rows)
        .iter()
        .map(|r| (PI * r / gap).floor() as usize + 1)
        .collect()
}

/// Smallest row count whose rows can hold `seats` dots.
pub fn rows_needed(seats: u64) -> usize {
    (1..)
        .find(|&r| row_capacities(r).iter().sum::<usize>() as u64 >= seats)
        .expect("capacity grows without bound")
}

/// Seats per row, outermost first, proportional to row radius by largest remainder.
pub fn seats_per_row(seats: u64, rows: usize) -> Vec<usize> {
    let radii = row_radii(rows);
    let caps = row_capacities(rows);
    let total_radius: f64 = radii.iter().sum();
    let quotas: Vec<f64> = radii
        .iter()
        .map(|r| seats as f64 * r / total_radius)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(seats as usize - assigned) {
        counts[i] += 1;
    }
    // Move any overflow into the outermost rows with room left; an explicit
    // row count may be too small, in which case rows exceed their capacity.
    for i in 0..rows {
        while counts[i] > caps[i] {
            match (0..rows).find(|&j| counts[j] < caps[j]) {
                Some(j) => {
                    counts[i] -= 1;
                    counts[j] += 1;
                }
                None => break,
            }
        }
    }
    counts
}

/// Every seat position, ordered left to right (outer row first on equal angle).
pub fn parliament_layout(seats: u64, rows: Option<usize>) -> Vec<SeatPosition> {
    let rows = rows.unwrap_or_else(|| rows_needed(seats)).max(1);
    let radii = row_radii(rows);
    let mut positions = Vec::with_capacity(seats as usize);
    for (row, (&k, &r)) in seats_per_row(seats, rows).iter().zip(&radii).enumerate() {
        for j in 0..k {
            let angle = if k == 1 {
                PI / 2.0
            } else {
                PI * (1.0 - j as f64 / (k - 1) as f64)
            };
            positions.push(SeatPosition {
                x: r * angle.cos(),
                y: r * angle.sin(),
                row,
                angle,
            });
        }
    }
    positions.sort_by(|a, b| b.angle.total_cmp(&a.angle).then(a.row.cmp(&b.row)));
    positions
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn svg_open(out: &mut String, width: u32, height: u32) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#
    );
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##
    );
}

/// Semicircular seat diagram with one colour per entity and a legend.
pub fn render_parliament_svg(allocation: &SeatAllocation, spec: &ChartSpec) -> String {
    const MARGIN: f64 = 20.0;
    const LINE: f64 = 22.0;

    let ranked = allocation.ranked();
    let seated: Vec<(&str, u64)> = ranked.iter().copied().filter(|(_, s)| *s > 0).collect();
    let unseated: Vec<&str> = ranked
        .iter()
        .filter(|(_, s)| *s == 0)
        .map(|(id, _)| *id)
        .collect();
    let color = |i: usize| spec.palette[i % spec.palette.len().max(1)].as_str();

    let total = allocation.total_seats();
    let rows = spec.rows.unwrap_or_else(|| rows_needed(total)).max(1);
    let positions = parliament_layout(total, Some(rows));

    let width = spec.width as f64;
    let title_height = if spec.title.is_some() { 30.0 } else { 0.0 };
    let radius = ((width - 2.0 * MARGIN) / 2.0).min(spec.height as f64 * 0.6);
    let cx = width / 2.0;
    let cy = MARGIN + title_height + radius;
    let dot = spec.dot_radius.unwrap_or(row_spacing(rows) * radius * 0.4);

    let legend_rows = seated.len().div_ceil(2);
    let legend_top = cy + 2.0 * LINE;
    let footnote_y = legend_top + legend_rows as f64 * LINE + LINE;
    let needed = footnote_y + if unseated.is_empty() { 0.0 } else { LINE } + MARGIN;
    let height = (spec.height as f64).max(needed).ceil() as u32;

    let mut out = String::new();
    svg_open(&mut out, spec.width, height);
    if let Some(title) = &spec.title {
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="18">{}</text>"#,
            MARGIN + 16.0,
            escape(title)
        );
    }

    let mut seat_iter = positions.iter();
    for (i, (id, seats)) in seated.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<g class="entity" data-entity="{}" fill="{}">"#,
            escape(id),
            color(i)
        );
        for p in seat_iter.by_ref().take(*seats as usize) {
            let _ = writeln!(
                out,
                r#"<circle class="seat" cx="{:.2}" cy="{:.2}" r="{dot:.2}"/>"#,
                cx + p.x * radius,
                cy - p.y * radius
            );
        }
        let _ = writeln!(out, "</g>");
    }
    let _ = writeln!(
        out,
        r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="28">{total}</text>"#,
        cy - 4.0
    );

    let _ = writeln!(out, r#"<g class="legend" font-size="14">"#);
    let column_width = (width - 2.0 * MARGIN) / 2.0;
    for (i, (id, seats)) in seated.iter().enumerate() {
        let x = MARGIN + (i % 2) as f64 * column_width;
        let y = legend_top + (i / 2) as f64 * LINE;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{:.2}" width="14" height="14" fill="{}"/><text x="{:.2}" y="{y:.2}">{}: {seats}</text>"#,
            y - 12.0,
            color(i),
            x + 20.0,
            escape(id)
        );
    }
    let _ = writeln!(out, "</g>");
    if !unseated.is_empty() {
        let names: Vec<String> = unseated.iter().map(|n| escape(n)).collect();
        let _ = writeln!(
            out,
            r##"<text class="footnote" x="{MARGIN:.2}" y="{footnote_y:.2}" font-size="13" fill="#555555">Below threshold / no seats: {}</text>"##,
            names.join(", ")
        );
    }
    let _ = writeln!(out, "</svg>");
    out
}

fn direction_color(sign: Sign) -> &'static str {
    match sign {
        Sign::Positive => POSITIVE_COLOR,
        Sign::Negative => NEGATIVE_COLOR,
        Sign::Zero => ZERO_COLOR,
    }
}

/// Horizontal bars in descending seat order, coloured by correlation sign:
/// blue positive, red negative, gray zero.
pub fn render_bar_svg(
    allocation: &SeatAllocation,
    directions: &DirectionMap,
    spec: &ChartSpec,
) -> Result<String, ReportError> {
    const MARGIN: f64 = 20.0;
    const BAR: f64 = 24.0;
    const GAP: f64 = 8.0;
    const LABEL_WIDTH: f64 = 220.0;

    if allocation.is_empty() {
        return Err(ReportError::EmptyAllocation);
    }
    let ranked = allocation.ranked();
    let mut colors = Vec::with_capacity(ranked.len());
    for (id, seats) in &ranked {
        match directions.get(*id) {
            Some(d) => colors.push(direction_color(d.sign)),
            None if *seats > 0 => return Err(ReportError::MissingDirection(id.to_string())),
            None => colors.push(ZERO_COLOR),
        }
    }

    let width = spec.width as f64;
    let title_height = if spec.title.is_some() { 30.0 } else { 0.0 };
    let top = MARGIN + title_height;
    let needed = top + ranked.len() as f64 * (BAR + GAP) + MARGIN;
    let height = (spec.height as f64).max(needed).ceil() as u32;
    let max_seats = ranked.first().map(|(_, s)| *s).unwrap_or(0).max(1) as f64;
    let max_len = width - LABEL_WIDTH - 2.0 * MARGIN - 50.0;

    let mut out = String::new();
    svg_open(&mut out, spec.width, height);
    if let Some(title) = &spec.title {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="18">{}</text>"#,
            width / 2.0,
            MARGIN + 16.0,
            escape(title)
        );
    }
    for (i, ((id, seats), fill)) in ranked.iter().zip(&colors).enumerate() {
        let y = top + i as f64 * (BAR + GAP);
        let x0 = MARGIN + LABEL_WIDTH;
        let len = *seats as f64 / max_seats * max_len;
        let _ = writeln!(
            out,
            r#"<g class="bar" data-entity="{}"><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="14">{}</text><rect x="{x0:.2}" y="{y:.2}" width="{len:.2}" height="{BAR:.2}" fill="{fill}"/><text class="seats" x="{:.2}" y="{:.2}" font-size="14">{seats}</text></g>"#,
            escape(id),
            x0 - 8.0,
            y + BAR * 0.7,
            escape(id),
            x0 + len + 6.0,
            y + BAR * 0.7
        );
    }
    let _ = writeln!(out, "</svg>");
    Ok(out)
}

/// One line of the structured results file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityRecord {
    pub entity: String,
    pub constituents: Vec<String>,
    pub importance: Option<f64>,
    pub initial_votes: u64,
    /// Votes after redistribution; `None` for entities removed by the threshold.
    pub final_votes: Option<u64>,
    pub seats: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seats_without_threshold: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub change: Option<i64>,
    pub direction: Option<Sign>,
    pub external_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub records: Vec<EntityRecord>,
    pub threshold_percent: Option<f64>,
}

/// Builds the per-entity results of a pipeline run.
pub fn render_result_table(
    result: &PipelineResult,
    directions: Option<&DirectionMap>,
    external: Option<&BTreeMap<String, f64>>,
) -> ResultTable {
    let threshold = result
        .unthresholded
        .as_ref()
        .map(|_| result.config.threshold_percent);
    let records = result
        .initial
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let seats = result.allocation.seats_of(&row.entity).unwrap_or(0);
            let before = result
                .unthresholded
                .as_ref()
                .map(|a| a.seats_of(&row.entity).unwrap_or(0));
            EntityRecord {
                entity: row.entity.clone(),
                constituents: result.entities.constituents[i].clone(),
                importance: Some(row.importance),
                initial_votes: row.votes,
                final_votes: result.final_table.votes_of(&row.entity),
                seats,
                seats_without_threshold: before,
                change: before.map(|b| seats as i64 - b as i64),
                direction: directions.and_then(|d| d.get(&row.entity)).map(|d| d.sign),
                external_value: external.and_then(|e| e.get(&row.entity)).copied(),
            }
        })
        .collect();
    ResultTable {
        records,
        threshold_percent: threshold,
    }
}

impl ResultTable {
    /// Results of a direct allocation, where votes are given rather than derived.
    pub fn from_allocation(
        allocation: &SeatAllocation,
        directions: Option<&DirectionMap>,
        external: Option<&BTreeMap<String, f64>>,
    ) -> Self {
        let records = allocation
            .votes()
            .zip(allocation.iter())
            .map(|((id, votes), (_, seats))| EntityRecord {
                entity: id.to_string(),
                constituents: vec![id.to_string()],
                importance: None,
                initial_votes: votes,
                final_votes: Some(votes),
                seats,
                seats_without_threshold: None,
                change: None,
                direction: directions.and_then(|d| d.get(id)).map(|d| d.sign),
                external_value: external.and_then(|e| e.get(id)).copied(),
            })
            .collect();
        Self {
            records,
            threshold_percent: None,
        }
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Column-aligned text table.
    pub fn to_text(&self) -> String {
        let with_threshold = self.threshold_percent.is_some();
        let with_direction = self.records.iter().any(|r| r.direction.is_some());
        let with_external = self.records.iter().any(|r| r.external_value.is_some());

        let mut header = vec!["Entity".to_string(), "Votes".to_string()];
        if with_threshold {
            header.push("Votes after threshold".into());
        }
        header.push("MPs".into());
        if let Some(t) = self.threshold_percent {
            header.push(format!("MPs with {t}% threshold"));
            header.push("Change".into());
        }
        if with_direction {
            header.push("Direction".into());
        }
        if with_external {
            header.push("External value".into());
        }

        let mut rows = vec![header];
        for r in &self.records {
            let mut row = vec![r.entity.clone(), group_thousands(r.initial_votes)];
            if with_threshold {
                row.push(r.final_votes.map_or("-".into(), group_thousands));
                row.push(r.seats_without_threshold.unwrap_or(0).to_string());
                row.push(r.seats.to_string());
                row.push(r.change.map_or("-".into(), signed));
            } else {
                row.push(r.seats.to_string());
            }
            if with_direction {
                row.push(r.direction.map_or("-".into(), |d| d.to_string()));
            }
            if with_external {
                row.push(r.external_value.map_or("-".into(), |v| format!("{v}")));
            }
            rows.push(row);
        }

        let columns = rows[0].len();
        let widths: Vec<usize> = (0..columns)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| {
                    if c == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: usize = widths.iter().sum::<usize>() + 2 * (columns - 1);
                out.push_str(&"-".repeat(rule));
                out.push('\n');
            }
        }
        out
    }
}

fn group_thousands(v: u64) -> String {
    let digits = v.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn signed(v: i64) -> String {
    if v > 0 {
        format!("+{v}")
    } else {
        v.to_string()
    }
}
