//! The shared CSV schema for empirical and predicted statistics.

use std::io::Write;

use crate::error::Result;
use crate::estimators::{EstimateReport, Prediction};
use crate::market::MarketConfig;
use crate::stats::Summary;

/// One `(grid point, statistic)` row. Either half may be missing: a
/// prediction-only table has no summary, an unbalanced market has no
/// prediction.
#[derive(Debug, Clone, Copy)]
pub struct TableRow<'a> {
    pub config_id: usize,
    pub config: &'a MarketConfig,
    pub statistic: &'a str,
    pub summary: Option<Summary>,
    pub prediction: Option<Prediction>,
}

/// Prediction-only rows for one market.
pub fn prediction_rows<'a>(
    config_id: usize,
    config: &'a MarketConfig,
    predictions: &'a [(String, Prediction)],
) -> Vec<TableRow<'a>> {
    predictions
        .iter()
        .map(|(name, p)| TableRow {
            config_id,
            config,
            statistic: name,
            summary: None,
            prediction: Some(*p),
        })
        .collect()
}

impl EstimateReport {
    /// The report in the experiment CSV schema, with empty empirical columns.
    pub fn to_csv(&self, config: &MarketConfig) -> Result<Vec<u8>> {
        let predictions = self.predictions(config);
        let mut buf = Vec::new();
        write_csv(&mut buf, &prediction_rows(0, config, &predictions))?;
        Ok(buf)
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Tier vectors are padded with empty cells to the widest market in
/// `rows`, so every row has the same columns.
pub fn write_csv<W: Write>(out: W, rows: &[TableRow<'_>]) -> Result<()> {
    let men_k = rows.iter().map(|r| r.config.men().tier_count()).max().unwrap_or(1);
    let women_k = rows.iter().map(|r| r.config.women().tier_count()).max().unwrap_or(1);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["config_id".to_string(), "n".into(), "n_women".into()];
    for (prefix, k) in [("delta", men_k), ("beta", men_k), ("eps", women_k), ("alpha", women_k)] {
        header.extend((1..=k).map(|i| format!("{prefix}_{i}")));
    }
    header.extend(
        [
            "statistic",
            "mean",
            "std",
            "stderr",
            "p3",
            "p97",
            "runs",
            "predicted_leading",
            "predicted_lower",
            "predicted_upper",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let c = r.config;
        let mut rec = vec![r.config_id.to_string(), c.n_men().to_string(), c.n_women().to_string()];
        let padded = |v: &[f64], k: usize| (0..k).map(|i| cell(v.get(i).copied())).collect::<Vec<_>>();
        rec.extend(padded(c.men().proportions(), men_k));
        rec.extend(padded(c.men().scores(), men_k));
        rec.extend(padded(c.women().proportions(), women_k));
        rec.extend(padded(c.women().scores(), women_k));
        rec.push(r.statistic.to_string());
        let s = r.summary;
        rec.extend([
            cell(s.map(|s| s.mean)),
            cell(s.map(|s| s.std)),
            cell(s.map(|s| s.stderr)),
            cell(s.map(|s| s.p3)),
            cell(s.map(|s| s.p97)),
            s.map(|s| s.runs.to_string()).unwrap_or_default(),
        ]);
        let p = r.prediction;
        rec.extend([
            cell(p.map(|p| p.leading)),
            cell(p.and_then(|p| p.lower)),
            cell(p.and_then(|p| p.upper)),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
