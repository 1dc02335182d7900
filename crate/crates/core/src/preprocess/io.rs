use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;

use crate::domain::{PixelId, PixelSeries, TimeAxis, BAND_COUNT, WEEK_STEP_DAYS};
use crate::error::{Error, Result};

pub const SERIES_HEADER: [&str; 12] = [
    "pixel_x", "pixel_y", "date", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B11", "B12",
];

/// Writes gap-free weekly series, one row per pixel and week.
pub fn write_series_csv<W: Write>(series: &[PixelSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for s in series {
        for (t, row) in s.values.iter().enumerate() {
            let mut rec = Vec::with_capacity(SERIES_HEADER.len());
            rec.push(s.pixel.x.to_string());
            rec.push(s.pixel.y.to_string());
            rec.push(s.axis.index_to_date(t).to_string());
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads series written by [`write_series_csv`]. Each pixel's dates must form
/// a contiguous weekly grid; rows may come in any order.
pub fn read_series_csv<R: Read>(source: R) -> Result<Vec<PixelSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != SERIES_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}, found {}", SERIES_HEADER.join(","), names.join(",")),
        });
    }

    let mut pixels: BTreeMap<PixelId, BTreeMap<NaiveDate, [f64; BAND_COUNT]>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != SERIES_HEADER.len() {
            return Err(bad(format!("expected {} fields, found {}", SERIES_HEADER.len(), record.len())));
        }
        let int = |i: usize| {
            record[i]
                .parse::<i64>()
                .map_err(|e| bad(format!("{}: {e}", SERIES_HEADER[i])))
        };
        let pixel = PixelId::new(int(0)?, int(1)?);
        let date: NaiveDate = record[2]
            .parse()
            .map_err(|e| bad(format!("date '{}': {e}", &record[2])))?;
        let mut row = [0.0; BAND_COUNT];
        for (b, v) in row.iter_mut().enumerate() {
            let field = &record[3 + b];
            *v = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("{} is not a finite number: '{field}'", SERIES_HEADER[3 + b])))?;
        }
        if pixels.entry(pixel).or_default().insert(date, row).is_some() {
            return Err(bad(format!("duplicate row for pixel ({}, {}) on {date}", pixel.x, pixel.y)));
        }
    }

    let mut out = Vec::with_capacity(pixels.len());
    for (pixel, rows) in pixels {
        let epoch = *rows.keys().next().expect("pixel has rows");
        let axis = TimeAxis::new(epoch, WEEK_STEP_DAYS, rows.len())?;
        for (i, date) in rows.keys().enumerate() {
            if axis.index_to_date(i) != *date {
                return Err(Error::Integrity(format!(
                    "pixel ({}, {}): weekly grid broken at {date}",
                    pixel.x, pixel.y
                )));
            }
        }
        out.push(PixelSeries::dense(pixel, axis, rows.into_values().collect())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<PixelSeries> {
        let axis = TimeAxis::new(NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(), 7, 4).unwrap();
        (0..2)
            .map(|p| {
                let values = (0..4).map(|t| [0.1 * p as f64 + 0.01 * t as f64 + 1e-17; 9]).collect();
                PixelSeries::dense(PixelId::new(p, -p), axis, values).unwrap()
            })
            .collect()
    }

    #[test]
    fn round_trip_is_exact() {
        let mut buf = Vec::new();
        write_series_csv(&sample(), &mut buf).unwrap();
        let back = read_series_csv(buf.as_slice()).unwrap();
        let mut want = sample();
        want.sort_by_key(|s| s.pixel);
        assert_eq!(back, want);
    }

    #[test]
    fn rejects_broken_grid_and_bad_values() {
        let head = SERIES_HEADER.join(",");
        let gap = format!("{head}\n0,0,2018-01-01,1,1,1,1,1,1,1,1,1\n0,0,2018-01-15,1,1,1,1,1,1,1,1,1\n");
        assert!(matches!(read_series_csv(gap.as_bytes()), Err(Error::Integrity(_))));
        let nan = format!("{head}\n0,0,2018-01-01,1,1,1,NaN,1,1,1,1,1\n");
        assert!(matches!(read_series_csv(nan.as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_series_csv("a,b\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
