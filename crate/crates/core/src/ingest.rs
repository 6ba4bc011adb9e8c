//! Price panels: CSV loading, weekly resampling, universe filtering and
//! conversion to relative prices.
//!
//! The on-disk format is long CSV with the header `date,ticker,price`,
//! ISO-8601 dates and `.` as the decimal separator. Missing (date, ticker)
//! pairs are simply absent rows.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::wealth::RelativePrice;

pub const DEFAULT_MIN_HISTORY: usize = 4000;
pub const DEFAULT_MIN_PRICE: f64 = 1.0;

/// Dated prices, `prices[date][ticker]`, `None` where an asset has no quote.
#[derive(Clone, Debug, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: Vec<Vec<Option<f64>>>,
}

impl PricePanel {
    /// Checks dates are strictly increasing, tickers unique, present prices
    /// positive, and that no date or ticker is entirely empty.
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if prices.len() != dates.len() {
            return Err(Error::DimensionMismatch { expected: dates.len(), got: prices.len() });
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!("dates not strictly increasing at {}", w[1])));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(t) = tickers.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(Error::InvalidArgument(format!("duplicate ticker {t}")));
        }
        for (d, row) in dates.iter().zip(&prices) {
            if row.len() != tickers.len() {
                return Err(Error::DimensionMismatch { expected: tickers.len(), got: row.len() });
            }
            if let Some((j, p)) = row.iter().enumerate().find_map(|(j, p)| p.filter(|p| !(p.is_finite() && *p > 0.0)).map(|p| (j, p))) {
                return Err(Error::InvalidArgument(format!("price {p} for {} on {d} is not positive", tickers[j])));
            }
            if row.iter().all(Option::is_none) {
                return Err(Error::InvalidArgument(format!("no prices on {d}")));
            }
        }
        for (j, t) in tickers.iter().enumerate() {
            if prices.iter().all(|row| row[j].is_none()) {
                return Err(Error::InvalidArgument(format!("ticker {t} has no prices")));
            }
        }
        Ok(PricePanel { dates, tickers, prices })
    }

    /// A panel with every entry present.
    pub fn complete(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: Vec<Vec<f64>>) -> Result<Self> {
        let prices = prices.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
        PricePanel::new(dates, tickers, prices)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.prices
    }

    pub fn get(&self, date: usize, ticker: usize) -> Option<f64> {
        self.prices[date][ticker]
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Present observations of one ticker.
    pub fn observations(&self, ticker: usize) -> impl Iterator<Item = f64> + '_ {
        self.prices.iter().filter_map(move |r| r[ticker])
    }

    /// Dates within `[start, end]`, inclusive.
    pub fn window(&self, start: NaiveDate, end: NaiveDate) -> Result<PricePanel> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.dates[i] >= start && self.dates[i] <= end).collect();
        if keep.is_empty() {
            return Err(Error::InvalidArgument(format!("no dates between {start} and {end}")));
        }
        self.subset(&keep, &(0..self.tickers.len()).collect::<Vec<_>>())
    }

    /// Rows `dates` and columns `tickers`, dropping rows left empty.
    fn subset(&self, dates: &[usize], tickers: &[usize]) -> Result<PricePanel> {
        let mut out_dates = Vec::new();
        let mut out_prices = Vec::new();
        for &i in dates {
            let row: Vec<Option<f64>> = tickers.iter().map(|&j| self.prices[i][j]).collect();
            if row.iter().any(Option::is_some) {
                out_dates.push(self.dates[i]);
                out_prices.push(row);
            }
        }
        let mut out_tickers: Vec<String> = tickers.iter().map(|&j| self.tickers[j].clone()).collect();
        // tickers without prices inside the selection are dropped
        let live: Vec<usize> = (0..out_tickers.len()).filter(|&j| out_prices.iter().any(|r| r[j].is_some())).collect();
        if live.len() != out_tickers.len() {
            out_tickers = live.iter().map(|&j| out_tickers[j].clone()).collect();
            out_prices = out_prices.into_iter().map(|r| live.iter().map(|&j| r[j]).collect()).collect();
        }
        PricePanel::new(out_dates, out_tickers, out_prices)
    }

    /// The dense `dates × tickers` matrix, or the first missing entry.
    pub fn dense(&self) -> Result<Vec<Vec<f64>>> {
        self.prices
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, p)| {
                        p.ok_or_else(|| Error::MissingPrice { date: self.dates[i], ticker: self.tickers[j].clone() })
                    })
                    .collect()
            })
            .collect()
    }
}

fn parse_row(line: u64, record: &csv::StringRecord) -> Result<(NaiveDate, String, f64)> {
    let parse_err = |message: String| Error::Parse { line, message };
    if record.len() != 3 {
        return Err(parse_err(format!("expected 3 fields, found {}", record.len())));
    }
    let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d")
        .map_err(|e| parse_err(format!("bad date '{}': {e}", &record[0])))?;
    let ticker = record[1].trim();
    if ticker.is_empty() {
        return Err(parse_err("empty ticker".into()));
    }
    let raw = record[2].trim();
    let price: f64 = raw.parse().map_err(|_| parse_err(format!("bad price '{raw}'")))?;
    if !(price.is_finite() && price > 0.0) {
        return Err(parse_err(format!("price {raw} for {ticker} on {date} is not positive")));
    }
    Ok((date, ticker.to_string(), price))
}

/// Parses a `date,ticker,price` CSV. Tickers keep their order of first appearance.
pub fn read_prices<R: Read>(reader: R) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["date", "ticker", "price"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| !h.eq_ignore_ascii_case(e)) {
        return Err(Error::Parse { line: 1, message: format!("expected header date,ticker,price, found {}", headers.iter().collect::<Vec<_>>().join(",")) });
    }

    let mut tickers: Vec<String> = Vec::new();
    let mut ticker_index: HashMap<String, usize> = HashMap::new();
    let mut cells: BTreeMap<NaiveDate, HashMap<usize, f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let (date, ticker, price) = parse_row(line, &record)?;
        let next = tickers.len();
        let j = *ticker_index.entry(ticker.clone()).or_insert_with(|| {
            tickers.push(ticker.clone());
            next
        });
        if cells.entry(date).or_default().insert(j, price).is_some() {
            return Err(Error::Parse { line, message: format!("duplicate row for {ticker} on {date}") });
        }
    }
    if cells.is_empty() {
        return Err(Error::Parse { line: 1, message: "no price rows".into() });
    }
    let dates: Vec<NaiveDate> = cells.keys().copied().collect();
    let prices = cells
        .values()
        .map(|row| (0..tickers.len()).map(|j| row.get(&j).copied()).collect())
        .collect();
    PricePanel::new(dates, tickers, prices)
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PricePanel> {
    read_prices(std::fs::File::open(path)?)
}

/// Writes the panel ticker by ticker so reloading preserves ticker order.
/// Prices use the shortest round-trip decimal form.
pub fn write_prices<W: Write>(panel: &PricePanel, writer: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "date,ticker,price")?;
    for (j, t) in panel.tickers.iter().enumerate() {
        for (i, d) in panel.dates.iter().enumerate() {
            if let Some(p) = panel.prices[i][j] {
                writeln!(w, "{},{t},{p}", d.format("%Y-%m-%d"))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_prices(panel: &PricePanel, path: impl AsRef<Path>) -> Result<()> {
    write_prices(panel, std::fs::File::create(path)?)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// One row per ISO week: each ticker's median present price, stamped with
/// the last trading date of the week.
pub fn resample_weekly_median(panel: &PricePanel) -> PricePanel {
    let mut weeks: Vec<(chrono::IsoWeek, Vec<usize>)> = Vec::new();
    for (i, d) in panel.dates.iter().enumerate() {
        let w = d.iso_week();
        match weeks.last_mut() {
            Some((last, rows)) if *last == w => rows.push(i),
            _ => weeks.push((w, vec![i])),
        }
    }
    let mut dates = Vec::with_capacity(weeks.len());
    let mut prices = Vec::with_capacity(weeks.len());
    for (_, rows) in &weeks {
        dates.push(panel.dates[*rows.last().unwrap()]);
        prices.push(
            (0..panel.tickers.len())
                .map(|j| {
                    let mut v: Vec<f64> = rows.iter().filter_map(|&i| panel.prices[i][j]).collect();
                    (!v.is_empty()).then(|| median(&mut v))
                })
                .collect(),
        );
    }
    PricePanel::new(dates, panel.tickers.clone(), prices).expect("resampling preserves panel invariants")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    History,
    MinPrice,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::History => "history",
            DropReason::MinPrice => "min price",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dropped {
    pub ticker: String,
    pub reason: DropReason,
}

/// Keeps tickers with at least `min_history` observations whose lowest price
/// is at least `min_price`, preserving order.
pub fn filter_universe(panel: &PricePanel, min_history: usize, min_price: f64) -> Result<(PricePanel, Vec<Dropped>)> {
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (j, t) in panel.tickers.iter().enumerate() {
        let count = panel.observations(j).count();
        let low = panel.observations(j).fold(f64::INFINITY, f64::min);
        let reason = if count < min_history {
            Some(DropReason::History)
        } else if low < min_price {
            Some(DropReason::MinPrice)
        } else {
            None
        };
        match reason {
            Some(reason) => dropped.push(Dropped { ticker: t.clone(), reason }),
            None => keep.push(j),
        }
    }
    if keep.len() < 2 {
        return Err(Error::UniverseTooSmall(keep.len()));
    }
    let filtered = panel.subset(&(0..panel.len()).collect::<Vec<_>>(), &keep)?;
    Ok((filtered, dropped))
}

/// `x_t[j] = p_t[j] / p_{t−1}[j]`; every entry must be present.
pub fn to_relative_prices(panel: &PricePanel) -> Result<Vec<RelativePrice>> {
    let dense = panel.dense()?;
    dense
        .windows(2)
        .map(|w| RelativePrice::new(w[1].iter().zip(&w[0]).map(|(n, c)| n / c).collect()))
        .collect()
}
