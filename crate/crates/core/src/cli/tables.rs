//! Codebook and constellation tables.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use crate::error::Result;
use crate::modem::Constellation;
use crate::shaping::{AmplitudeAlphabet, SphereCodebook};

pub const CONSTELLATION_HEADER: [&str; 7] = [
    "label",
    "bits",
    "i_level",
    "q_level",
    "i",
    "q",
    "probability",
];

/// `index,a1..aN,energy`, one row per codebook block in index order.
pub fn write_lut_csv<W: Write>(out: W, cb: &SphereCodebook) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend((1..=cb.block_len()).map(|i| format!("a{i}")));
    header.push("energy".into());
    w.write_record(&header)?;
    for i in 0..cb.len() {
        let mut row = vec![i.to_string()];
        row.extend(cb.entry(i).iter().map(u16::to_string));
        row.push(cb.energy(i).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One labelled 2D point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationPoint {
    /// I label bits followed by Q label bits.
    pub label: u32,
    pub label_bits: usize,
    pub i_level: i16,
    pub q_level: i16,
    /// Coordinates at unit mean power.
    pub i: f64,
    pub q: f64,
    /// Marginal probability of the point per 2D symbol.
    pub probability: f64,
}

/// All points of square `order`-QAM, uniform or shaped with `k_bits`
/// shaping bits per 4D block, in label order.
pub fn constellation_rows(order: u32, k_bits: Option<usize>) -> Result<Vec<ConstellationPoint>> {
    let c = match k_bits {
        None => Constellation::uniform(order)?,
        Some(k) => Constellation::shaped(Arc::new(SphereCodebook::build(
            AmplitudeAlphabet::for_qam(order)?,
            4,
            k,
        )?))?,
    };
    let rail = c.rail();
    let b = rail.bits();
    // 2D marginal of the shaped prior, averaged over both polarizations.
    let mut pair_count: HashMap<(u16, u16), usize> = HashMap::new();
    if let Some(cb) = c.codebook() {
        for e in cb.entries() {
            *pair_count.entry((e[0], e[1])).or_default() += 1;
            *pair_count.entry((e[2], e[3])).or_default() += 1;
        }
    }
    let blocks = c.codebook().map_or(0, |cb| cb.len());
    let scale = c.scale();
    Ok((0..(1u32 << (2 * b)))
        .map(|label| {
            let il = rail.level_of_label((label >> b) as usize);
            let ql = rail.level_of_label((label & ((1 << b) - 1)) as usize);
            let probability = if blocks == 0 {
                1.0 / f64::from(order)
            } else {
                let n = pair_count
                    .get(&(il.unsigned_abs(), ql.unsigned_abs()))
                    .copied()
                    .unwrap_or(0);
                n as f64 / (2 * blocks) as f64 / 4.0
            };
            ConstellationPoint {
                label,
                label_bits: 2 * b,
                i_level: il,
                q_level: ql,
                i: f64::from(il) * scale,
                q: f64::from(ql) * scale,
                probability,
            }
        })
        .collect())
}

/// Pairs of horizontally or vertically adjacent points whose labels differ
/// in other than exactly one bit.
pub fn gray_violations(points: &[ConstellationPoint]) -> Vec<(u32, u32)> {
    let by_level: HashMap<(i16, i16), u32> = points
        .iter()
        .map(|p| ((p.i_level, p.q_level), p.label))
        .collect();
    let mut bad = Vec::new();
    for p in points {
        for nb in [(p.i_level + 2, p.q_level), (p.i_level, p.q_level + 2)] {
            if let Some(&l) = by_level.get(&nb) {
                if (l ^ p.label).count_ones() != 1 {
                    bad.push((p.label, l));
                }
            }
        }
    }
    bad
}

pub fn write_constellation_csv<W: Write>(out: W, points: &[ConstellationPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONSTELLATION_HEADER)?;
    for p in points {
        w.write_record([
            p.label.to_string(),
            format!("{:0width$b}", p.label, width = p.label_bits),
            p.i_level.to_string(),
            p.q_level.to_string(),
            format!("{:.12}", p.i),
            format!("{:.12}", p.q),
            format!("{:.12}", p.probability),
        ])?;
    }
    w.flush()?;
    Ok(())
}
