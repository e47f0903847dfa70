//! Report emission: JSON documents with 17-significant-digit numbers, flat
//! CSVs per metric, and the prior-predictive table of median TTP.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::harness::OperatingCharacteristics;
use crate::mcmc::sorted_quantile;
use crate::model::{TtpParams, TtpPriorConfig};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Pretty JSON formatter printing every float in scientific notation with 17
/// significant digits. Non-finite values are written as `null` by
/// `serde_json` before reaching the formatter.
struct Fixed17<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize with the report number format.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `{stem}.json` and the per-metric CSVs into `dir`; returns the paths
/// written.
pub fn emit_reports(oc: &OperatingCharacteristics, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    if oc.stage1.is_none() && oc.stage2.is_none() {
        return Err(Error::EmptyReport(format!("{stem}: no metrics to report")));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut out = |name: String| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    write_json(oc, &out(format!("{stem}.json")))?;

    let mut scalars: Vec<(String, String)> = vec![("replicates".into(), oc.replicates.to_string())];
    if let Some(s1) = &oc.stage1 {
        for (k, v) in [
            ("mean_dlt_rate", s1.mean_dlt_rate),
            ("pct_trials_dlt_above", s1.pct_trials_dlt_above),
            ("safety_stop_prob", s1.safety_stop_prob),
            ("curve_missing_prob", s1.curve_missing_prob),
            ("mean_sample_size_stage1", s1.mean_sample_size),
        ] {
            scalars.push((k.into(), num(v)));
        }
        if !s1.grid.is_empty() {
            let header: Vec<String> = ["x", "y", "bias"]
                .into_iter()
                .map(String::from)
                .chain(s1.percent_selection.iter().map(|s| format!("selection_p{}", s.p)))
                .collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = s1.grid.iter().enumerate().map(|(i, [x, y])| {
                let mut r = vec![num(*x), num(*y), opt(s1.pointwise_bias.as_ref().map(|b| b[i]))];
                r.extend(s1.percent_selection.iter().map(|s| num(s.fraction[i])));
                r
            });
            write_csv(&out(format!("{stem}_curve.csv")), &header, rows)?;
        }
    }
    if let Some(s2) = &oc.stage2 {
        scalars.push(("reached_stage2".into(), num(s2.reached_stage2)));
        scalars.push(("power".into(), num(s2.power)));
        scalars.push(("type1".into(), opt(s2.type1)));
        scalars.push(("type1_plus_type2".into(), opt(s2.type1_plus_type2)));
        scalars.push(("early_stop_prob".into(), num(s2.stopping.early_stop_prob)));
        scalars.push(("avg_sample_size".into(), num(s2.stopping.avg_sample_size)));
        if let Some(n) = &s2.stopping_null {
            scalars.push(("early_stop_prob_null".into(), num(n.early_stop_prob)));
            scalars.push(("avg_sample_size_null".into(), num(n.avg_sample_size)));
            scalars.push(("avg_sample_size_at_stop_null".into(), opt(n.avg_sample_size_at_stop)));
        }
        scalars.push(("correct_allocation".into(), opt(s2.correct_allocation)));

        write_csv(
            &out(format!("{stem}_decisions.csv")),
            &["delta_u", "power", "type1", "type1_plus_type2"],
            s2.decisions
                .iter()
                .map(|d| vec![num(d.delta_u), num(d.power), opt(d.type1), opt(d.type1_plus_type2)]),
        )?;
        let h = &s2.allocation_histogram;
        write_csv(
            &out(format!("{stem}_allocation.csv")),
            &["z_lo", "z_hi", "count", "freq"],
            (0..h.counts.len()).map(|i| vec![num(h.edges[i]), num(h.edges[i + 1]), h.counts[i].to_string(), num(h.freqs[i])]),
        )?;
        let c = &s2.mean_prob_curve;
        write_csv(
            &out(format!("{stem}_prob_curve.csv")),
            &["z", "prob"],
            c.grid.iter().zip(&c.probs).map(|(z, p)| vec![num(*z), num(*p)]),
        )?;
    }
    write_csv(
        &out(format!("{stem}.csv")),
        &["metric", "value"],
        scalars.into_iter().map(|(k, v)| vec![k, v]),
    )?;
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorPredictiveRow {
    pub z: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorPredictiveTable {
    pub n_draws: usize,
    pub seed: u64,
    pub rows: Vec<PriorPredictiveRow>,
}

impl PriorPredictiveTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["z", "q05", "q50", "q95"],
            self.rows.iter().map(|r| vec![num(r.z), num(r.q05), num(r.q50), num(r.q95)]),
        )
    }
}

/// Draw a parameter vector from the stage-2 prior.
pub fn sample_ttp_prior<R: Rng + ?Sized>(prior: &TtpPriorConfig, rng: &mut R) -> TtpParams {
    let sd = prior.sigma2.sqrt();
    let mut beta = [0.0; 6];
    for (b, &mu) in beta.iter_mut().zip(&prior.mu) {
        *b = if sd > 0.0 {
            Normal::new(mu, sd).expect("finite sd").sample(rng)
        } else {
            mu
        };
    }
    let (u, v): (f64, f64) = (rng.random(), rng.random());
    let (lo, hi) = prior.k_range;
    TtpParams {
        beta,
        phi4: u.min(v),
        phi5: u.max(v),
        k: if hi > lo { rng.random_range(lo..hi) } else { lo },
    }
}

/// Quantiles (5%, 50%, 95%) of the prior-induced median TTP at
/// `z = 0, 0.1, …, 1`.
///
/// Quantiles are taken on the log scale and exponentiated, so draws whose
/// median overflows `f64` still order correctly.
pub fn prior_predictive_report(prior: &TtpPriorConfig, n_draws: usize, seed: u64) -> Result<PriorPredictiveTable> {
    prior.validate()?;
    if n_draws == 0 {
        return Err(Error::config("n_draws must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let draws: Vec<TtpParams> = (0..n_draws).map(|_| sample_ttp_prior(prior, &mut rng)).collect();
    let mut logs = vec![0.0; n_draws];
    let rows = (0..=10)
        .map(|i| {
            let z = i as f64 / 10.0;
            for (l, p) in logs.iter_mut().zip(&draws) {
                *l = p.log_median(z);
            }
            logs.sort_by(f64::total_cmp);
            PriorPredictiveRow {
                z,
                q05: sorted_quantile(&logs, 0.05).exp(),
                q50: sorted_quantile(&logs, 0.5).exp(),
                q95: sorted_quantile(&logs, 0.95).exp(),
            }
        })
        .collect();
    Ok(PriorPredictiveTable { n_draws, seed, rows })
}
