//! Price series ingestion, synthesis, and price relatives.

use chrono::{Datelike, NaiveDate, Weekday};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RngHandle;

/// T daily closing prices for d assets, row-major T x d, rows sorted by
/// strictly increasing date, every price strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSeries {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        let d = tickers.len();
        let t = dates.len();
        if d == 0 || t == 0 {
            return Err(Error::Input("price series needs >= 1 ticker and row".into()));
        }
        if prices.len() != t * d {
            return Err(Error::Input(format!(
                "price array length {} != T*d = {}",
                prices.len(),
                t * d
            )));
        }
        if prices.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::Input("prices must be finite and positive".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("dates must be strictly increasing".into()));
        }
        Ok(PriceSeries {
            tickers,
            dates,
            prices,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let d = self.n_assets();
        &self.prices[n * d..(n + 1) * d]
    }
}

/// Parse a price CSV with header `date,TICKER1,...,TICKERd`, ISO dates,
/// positive decimal prices. Rows may arrive unsorted; output is sorted by
/// date. Malformed cells produce an ingestion error naming row and
/// column.
pub fn ingest_prices<R: std::io::BufRead>(source: R) -> Result<PriceSeries> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Input("empty price file".into()))??;
    let mut cols = header.split(',');
    let first = cols.next().unwrap_or_default();
    if first.trim() != "date" {
        return Err(Error::Input(format!(
            "header must start with 'date', got '{first}'"
        )));
    }
    let tickers: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    if tickers.is_empty() || tickers.iter().any(|t| t.is_empty()) {
        return Err(Error::Input("header must name at least one ticker".into()));
    }
    let d = tickers.len();
    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row_no = idx + 2; // 1-based, after the header
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + 1 {
            return Err(Error::Ingestion {
                row: row_no,
                column: "row".into(),
                message: format!("expected {} cells, got {}", d + 1, cells.len()),
            });
        }
        let date = NaiveDate::parse_from_str(cells[0].trim(), "%Y-%m-%d").map_err(|e| {
            Error::Ingestion {
                row: row_no,
                column: "date".into(),
                message: format!("bad date '{}': {e}", cells[0]),
            }
        })?;
        let mut prices = Vec::with_capacity(d);
        for (j, cell) in cells[1..].iter().enumerate() {
            let trimmed = cell.trim();
            if trimmed.is_empty() {
                return Err(Error::Ingestion {
                    row: row_no,
                    column: tickers[j].clone(),
                    message: "missing cell".into(),
                });
            }
            let p: f64 = trimmed.parse().map_err(|e| Error::Ingestion {
                row: row_no,
                column: tickers[j].clone(),
                message: format!("bad price '{trimmed}': {e}"),
            })?;
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::Ingestion {
                    row: row_no,
                    column: tickers[j].clone(),
                    message: format!("price must be positive, got {p}"),
                });
            }
            prices.push(p);
        }
        rows.push((date, prices));
    }
    rows.sort_by_key(|(date, _)| *date);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Ingestion {
                row: 0,
                column: "date".into(),
                message: format!("duplicate date {}", w[0].0),
            });
        }
    }
    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    let prices: Vec<f64> = rows.into_iter().flat_map(|(_, p)| p).collect();
    PriceSeries::new(tickers, dates, prices)
}

/// Specification of a synthetic geometric-random-walk price series:
/// daily log-returns jointly Gaussian with the given per-asset drift and
/// volatility and cross-sectional correlation.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub d: usize,
    pub t: usize,
    pub seed: u64,
    pub drift: Vec<f64>,
    pub vol: Vec<f64>,
    /// Row-major d x d correlation matrix, unit diagonal, PSD.
    pub corr: Vec<f64>,
}

impl SynthSpec {
    /// Mildly heterogeneous default: 3 years of weekdays (T = 752).
    pub fn default_three_year(d: usize, seed: u64) -> Self {
        let drift: Vec<f64> = (0..d).map(|i| 1e-4 * (i as f64 + 1.0)).collect();
        let vol: Vec<f64> = (0..d).map(|i| 0.01 + 0.002 * i as f64).collect();
        let mut corr = vec![0.3; d * d];
        for i in 0..d {
            corr[i * d + i] = 1.0;
        }
        SynthSpec {
            d,
            t: 752,
            seed,
            drift,
            vol,
            corr,
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric PSD matrix, row-major.
/// Semi-definite pivots (within a small slack) are allowed and zeroed.
fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            if (a[i * d + j] - a[j * d + i]).abs() > 1e-12 {
                return Err(Error::Input("matrix not symmetric".into()));
            }
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s < -1e-10 {
                    return Err(Error::Input("matrix not positive semidefinite".into()));
                }
                l[i * d + i] = s.max(0.0).sqrt();
            } else if l[j * d + j] > 0.0 {
                l[i * d + j] = s / l[j * d + j];
            } else if s.abs() > 1e-10 {
                return Err(Error::Input("matrix not positive semidefinite".into()));
            }
        }
    }
    Ok(l)
}

/// Deterministic synthetic prices: weekday dates from 2017-01-02, all
/// assets starting at 100, log-prices advanced by correlated Gaussian
/// increments.
pub fn synthesize_prices(spec: &SynthSpec) -> Result<PriceSeries> {
    let d = spec.d;
    if d == 0 || spec.t < 2 {
        return Err(Error::Input("need d >= 1 and T >= 2".into()));
    }
    if spec.drift.len() != d || spec.vol.len() != d || spec.corr.len() != d * d {
        return Err(Error::Input("drift/vol/corr shapes must match d".into()));
    }
    if spec.vol.iter().any(|&v| v < 0.0) {
        return Err(Error::Input("volatilities must be nonnegative".into()));
    }
    for i in 0..d {
        if (spec.corr[i * d + i] - 1.0).abs() > 1e-12 {
            return Err(Error::Input("correlation diagonal must be 1".into()));
        }
    }
    let l = cholesky(&spec.corr, d)?;
    let mut rng = RngHandle::new(spec.seed);
    let tickers = (1..=d).map(|i| format!("T{i}")).collect();
    let mut dates = Vec::with_capacity(spec.t);
    let mut date = NaiveDate::from_ymd_opt(2017, 1, 2).unwrap();
    while dates.len() < spec.t {
        if !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(date);
        }
        date = date.succ_opt().unwrap();
    }
    let mut log_prices = vec![100.0_f64.ln(); d];
    let mut prices = Vec::with_capacity(spec.t * d);
    prices.extend(log_prices.iter().map(|lp| lp.exp()));
    let mut z = vec![0.0; d];
    for _ in 1..spec.t {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..d {
            let mut corr_z = 0.0;
            for k in 0..=i {
                corr_z += l[i * d + k] * z[k];
            }
            log_prices[i] += spec.drift[i] + spec.vol[i] * corr_z;
            prices.push(log_prices[i].exp());
        }
    }
    PriceSeries::new(tickers, dates, prices)
}

/// Gross price relatives `r_n^i = p(t_n, i) / p(t_{n-1}, i)`, one row per
/// consecutive date pair: (T-1) x d, row-major, all entries positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    n_assets: usize,
    relatives: Vec<f64>,
}

impl ReturnSeries {
    pub fn from_rows(n_assets: usize, relatives: Vec<f64>) -> Result<Self> {
        if n_assets == 0 || relatives.is_empty() || relatives.len() % n_assets != 0 {
            return Err(Error::Input("return array shape mismatch".into()));
        }
        if relatives.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::Input("price relatives must be positive".into()));
        }
        Ok(ReturnSeries {
            n_assets,
            relatives,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn n_rows(&self) -> usize {
        self.relatives.len() / self.n_assets
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.relatives[n * self.n_assets..(n + 1) * self.n_assets]
    }
}

/// Elementwise price relatives between consecutive rows.
pub fn returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    let t = prices.n_rows();
    if t < 2 {
        return Err(Error::Input("need at least two price rows".into()));
    }
    let d = prices.n_assets();
    let mut relatives = Vec::with_capacity((t - 1) * d);
    for n in 1..t {
        let prev = prices.row(n - 1);
        let cur = prices.row(n);
        for i in 0..d {
            relatives.push(cur[i] / prev[i]);
        }
    }
    ReturnSeries::from_rows(d, relatives)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::BufReader;

    fn parse(text: &str) -> Result<PriceSeries> {
        ingest_prices(BufReader::new(text.as_bytes()))
    }

    #[test]
    fn two_row_single_ticker() {
        let ps = parse("date,AAA\n2020-01-01,100\n2020-01-02,110\n").unwrap();
        assert_eq!(ps.n_rows(), 2);
        assert_eq!(ps.n_assets(), 1);
        assert_eq!(ps.row(1), &[110.0]);
    }

    #[test]
    fn unsorted_rows_sorted_by_date() {
        let a = parse("date,A\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n").unwrap();
        let b = parse("date,A\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_price_names_cell() {
        match parse("date,A,B\n2020-01-01,1,2\n2020-01-02,1,0\n") {
            Err(Error::Ingestion { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "B");
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn missing_cell_and_duplicate_date_rejected() {
        assert!(matches!(
            parse("date,A,B\n2020-01-01,1,\n"),
            Err(Error::Ingestion { .. })
        ));
        assert!(matches!(
            parse("date,A\n2020-01-01,1\n2020-01-01,2\n"),
            Err(Error::Ingestion { .. })
        ));
    }

    #[test]
    fn zero_vol_deterministic_exponential() {
        let spec = SynthSpec {
            d: 1,
            t: 5,
            seed: 7,
            drift: vec![0.01],
            vol: vec![0.0],
            corr: vec![1.0],
        };
        let ps = synthesize_prices(&spec).unwrap();
        for n in 0..5 {
            assert_abs_diff_eq!(
                ps.row(n)[0],
                100.0 * (0.01 * n as f64).exp(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn fixed_seed_bit_identical() {
        let spec = SynthSpec::default_three_year(3, 42);
        let a = synthesize_prices(&spec).unwrap();
        let b = synthesize_prices(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_psd_corr_rejected() {
        let spec = SynthSpec {
            d: 2,
            t: 10,
            seed: 1,
            drift: vec![0.0; 2],
            vol: vec![0.01; 2],
            corr: vec![1.0, 2.0, 2.0, 1.0],
        };
        assert!(synthesize_prices(&spec).is_err());
    }

    #[test]
    fn sample_log_return_covariance_matches_spec() {
        // law of large numbers over T = 1e5 rows, 5% relative tolerance
        let rho = 0.6;
        let vols = [0.02, 0.03];
        let spec = SynthSpec {
            d: 2,
            t: 100_000,
            seed: 11,
            drift: vec![0.0; 2],
            vol: vols.to_vec(),
            corr: vec![1.0, rho, rho, 1.0],
        };
        let ps = synthesize_prices(&spec).unwrap();
        let n = ps.n_rows() - 1;
        let mut log_rets = vec![[0.0; 2]; n];
        for (k, lr) in log_rets.iter_mut().enumerate() {
            for i in 0..2 {
                lr[i] = (ps.row(k + 1)[i] / ps.row(k)[i]).ln();
            }
        }
        let mean = |i: usize| log_rets.iter().map(|r| r[i]).sum::<f64>() / n as f64;
        let m = [mean(0), mean(1)];
        let cov = |i: usize, j: usize| {
            log_rets
                .iter()
                .map(|r| (r[i] - m[i]) * (r[j] - m[j]))
                .sum::<f64>()
                / (n - 1) as f64
        };
        for i in 0..2 {
            let target = vols[i] * vols[i];
            assert!((cov(i, i) - target).abs() / target < 0.05);
        }
        let target01 = rho * vols[0] * vols[1];
        assert!((cov(0, 1) - target01).abs() / target01 < 0.05);
    }

    #[test]
    fn three_year_default_row_count() {
        let ps = synthesize_prices(&SynthSpec::default_three_year(2, 0)).unwrap();
        assert_eq!(ps.n_rows(), 752);
        assert_eq!(returns(&ps).unwrap().n_rows(), 751);
    }

    #[test]
    fn constant_prices_unit_relatives() {
        let ps = parse("date,A\n2020-01-01,5\n2020-01-02,5\n2020-01-03,5\n").unwrap();
        let rs = returns(&ps).unwrap();
        assert!(rs.row(0).iter().chain(rs.row(1)).all(|&r| r == 1.0));
    }

    #[test]
    fn simple_relative() {
        let ps = parse("date,A\n2020-01-01,100\n2020-01-02,110\n").unwrap();
        assert_abs_diff_eq!(returns(&ps).unwrap().row(0)[0], 1.1, epsilon = 1e-15);
    }

    #[test]
    fn returns_of_exp_cumsum_round_trip() {
        // prices exp(cumsum(x)) -> relatives exp(x) per entry
        let xs: [f64; 5] = [0.05, -0.02, 0.11, 0.0, -0.07];
        let mut cum = 0.0_f64;
        let mut prices = vec![1.0];
        for x in xs {
            cum += x;
            prices.push(cum.exp());
        }
        let dates: Vec<NaiveDate> = (0..prices.len())
            .map(|k| NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(k as u64))
            .collect();
        let ps = PriceSeries::new(vec!["A".into()], dates, prices).unwrap();
        let rs = returns(&ps).unwrap();
        for (k, x) in xs.iter().enumerate() {
            assert_abs_diff_eq!(rs.row(k)[0], x.exp(), epsilon = 1e-12);
        }
    }
}
