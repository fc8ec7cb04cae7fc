//! Subcommand bodies. Each one renders its output to a `String` first so the
//! bytes written are a pure function of the configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use invmm::quotes::{quotes, value_lower_bound};
use invmm::stats::{histogram, summarize};
use invmm::{MarketState, OdeSystem, QuotePair, Simulator, Strategy, TrajectoryRow};

use crate::config::{emit, Case, RunConfig, TableFormat};

/// Fixed-point, six decimals.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt6)
}

fn round6(x: f64) -> f64 {
    fmt6(x).parse().expect("formatted float parses")
}

/// One statistics row; `None` marks a statistic the sample cannot define.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub strategy: String,
    pub belief: String,
    pub sweep: Option<String>,
    pub value: Option<f64>,
    pub n: usize,
    pub mean: f64,
    pub std_dev: Option<f64>,
    pub sharpe: Option<f64>,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub jarque_bera: Option<f64>,
    pub var_5: f64,
    pub var_1: f64,
    pub inv_mean: f64,
    pub inv_std_dev: Option<f64>,
    pub inv_skewness: Option<f64>,
    pub inv_kurtosis: Option<f64>,
    pub inv_jarque_bera: Option<f64>,
    pub q_05: i64,
    pub q_95: i64,
}

pub const TABLE_HEADER: [&str; 20] = [
    "strategy",
    "belief",
    "sweep",
    "value",
    "n",
    "mean",
    "std_dev",
    "sharpe",
    "skewness",
    "kurtosis",
    "jarque_bera",
    "var_5",
    "var_1",
    "inv_mean",
    "inv_std_dev",
    "inv_skewness",
    "inv_kurtosis",
    "inv_jarque_bera",
    "q_05",
    "q_95",
];

impl TableRow {
    pub fn from_sample(case: &Case, pnl: &[f64], inventory: &[i64]) -> Result<Self> {
        let (sweep, value) = match case.point {
            Some((p, v)) => (Some(p.name().to_string()), Some(v)),
            None => (None, None),
        };
        let mut row = TableRow {
            strategy: case.strategy.name().to_string(),
            belief: case.belief.name().to_string(),
            sweep,
            value,
            n: pnl.len(),
            mean: 0.0,
            std_dev: None,
            sharpe: None,
            skewness: None,
            kurtosis: None,
            jarque_bera: None,
            var_5: 0.0,
            var_1: 0.0,
            inv_mean: 0.0,
            inv_std_dev: None,
            inv_skewness: None,
            inv_kurtosis: None,
            inv_jarque_bera: None,
            q_05: 0,
            q_95: 0,
        };
        if let [p] = pnl {
            // A single path defines its value and nothing else.
            row.mean = *p;
            row.var_5 = *p;
            row.var_1 = *p;
            row.inv_mean = inventory[0] as f64;
            row.q_05 = inventory[0];
            row.q_95 = inventory[0];
            return Ok(row);
        }
        let rec = summarize(pnl, inventory)?;
        row.mean = rec.pnl.mean;
        row.std_dev = Some(rec.pnl.std_dev);
        row.sharpe = rec.sharpe;
        row.skewness = rec.pnl.skewness;
        row.kurtosis = rec.pnl.kurtosis;
        row.jarque_bera = rec.pnl.jarque_bera;
        row.var_5 = rec.var5;
        row.var_1 = rec.var1;
        row.inv_mean = rec.inventory.mean;
        row.inv_std_dev = Some(rec.inventory.std_dev);
        row.inv_skewness = rec.inventory.skewness;
        row.inv_kurtosis = rec.inventory.kurtosis;
        row.inv_jarque_bera = rec.inventory.jarque_bera;
        (row.q_05, row.q_95) = rec.q_interval_90;
        Ok(row)
    }

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.strategy.clone(),
            self.belief.clone(),
            self.sweep.clone().unwrap_or_default(),
            self.value.map(|v| v.to_string()).unwrap_or_default(),
            self.n.to_string(),
            fmt6(self.mean),
            fmt_opt(self.std_dev),
            fmt_opt(self.sharpe),
            fmt_opt(self.skewness),
            fmt_opt(self.kurtosis),
            fmt_opt(self.jarque_bera),
            fmt6(self.var_5),
            fmt6(self.var_1),
            fmt6(self.inv_mean),
            fmt_opt(self.inv_std_dev),
            fmt_opt(self.inv_skewness),
            fmt_opt(self.inv_kurtosis),
            fmt_opt(self.inv_jarque_bera),
            self.q_05.to_string(),
            self.q_95.to_string(),
        ]
    }

    fn rounded(&self) -> Self {
        let r = |x: Option<f64>| x.map(round6);
        TableRow {
            mean: round6(self.mean),
            std_dev: r(self.std_dev),
            sharpe: r(self.sharpe),
            skewness: r(self.skewness),
            kurtosis: r(self.kurtosis),
            jarque_bera: r(self.jarque_bera),
            var_5: round6(self.var_5),
            var_1: round6(self.var_1),
            inv_mean: round6(self.inv_mean),
            inv_std_dev: r(self.inv_std_dev),
            inv_skewness: r(self.inv_skewness),
            inv_kurtosis: r(self.inv_kurtosis),
            inv_jarque_bera: r(self.inv_jarque_bera),
            ..self.clone()
        }
    }
}

pub fn render_csv(rows: &[TableRow]) -> String {
    let mut out = TABLE_HEADER.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_fields().join(","));
        out.push('\n');
    }
    out
}

pub fn render_json(rows: &[TableRow]) -> String {
    let rounded: Vec<TableRow> = rows.iter().map(TableRow::rounded).collect();
    let mut out = serde_json::to_string_pretty(&rounded).expect("rows serialize");
    out.push('\n');
    out
}

/// Final PNL and inventory for every case, in case order.
pub struct Ensemble {
    pub case: Case,
    pub pnl: Vec<f64>,
    pub inventory: Vec<i64>,
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

pub fn run_cases(cfg: &RunConfig, threads: Option<usize>) -> Result<Vec<Ensemble>> {
    cfg.cases()
        .into_iter()
        .map(|case| {
            let sim = Simulator::new(cfg.sim_config(&case))
                .with_context(|| format!("setting up {}", case.label()))?;
            let paths = sim.run_monte_carlo(threads)?;
            let trajectory = cfg
                .emit_trajectories
                .then(|| sim.simulate_path(cfg.path_index, true).trajectory.expect("recorded"));
            Ok(Ensemble {
                case,
                pnl: paths.iter().map(|p| p.pnl_final).collect(),
                inventory: paths.iter().map(|p| p.q_final).collect(),
                trajectory,
            })
        })
        .collect()
}

pub fn table_rows(ensembles: &[Ensemble]) -> Result<Vec<TableRow>> {
    ensembles.iter().map(|e| TableRow::from_sample(&e.case, &e.pnl, &e.inventory)).collect()
}

/// Rendered table in the configured format.
pub fn render_table(cfg: &RunConfig, rows: &[TableRow]) -> String {
    match cfg.table_format {
        TableFormat::Csv => render_csv(rows),
        TableFormat::Json => render_json(rows),
    }
}

/// `(case, bin_left, bin_right, count)` over a range shared by all cases.
pub fn render_histograms(ensembles: &[Ensemble], bins: usize) -> Result<String> {
    let all = ensembles.iter().flat_map(|e| e.pnl.iter().copied());
    let (lo, hi) =
        all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let mut out = String::from("case,bin_left,bin_right,count\n");
    for e in ensembles {
        let h = histogram(&e.pnl, bins, (lo, hi))?;
        for (l, r, c) in h.triples() {
            let _ = writeln!(out, "{},{},{},{c}", e.case.label(), fmt6(l), fmt6(r));
        }
    }
    Ok(out)
}

pub fn render_trajectory(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from("t,s,delta_ask,delta_bid,q,x\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt6(r.t),
            fmt6(r.s),
            fmt6(r.delta_ask),
            fmt6(r.delta_bid),
            r.q,
            fmt6(r.x)
        );
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Runs the ensemble and writes the table, manifest and optional extras.
/// Returns the written paths.
pub fn cmd_table(cfg: &RunConfig, threads: Option<usize>) -> Result<Vec<PathBuf>> {
    let ensembles = run_cases(cfg, threads)?;
    let rows = table_rows(&ensembles)?;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut written = Vec::new();

    let name = match cfg.table_format {
        TableFormat::Csv => "table.csv",
        TableFormat::Json => "table.json",
    };
    let table = dir.join(name);
    write(&table, &render_table(cfg, &rows))?;
    written.push(table);

    let manifest = dir.join("manifest.cfg");
    write(&manifest, &emit(cfg))?;
    written.push(manifest);

    if let Some(bins) = cfg.histogram_bins {
        let path = dir.join("histogram.csv");
        write(&path, &render_histograms(&ensembles, bins)?)?;
        written.push(path);
    }
    if cfg.emit_trajectories {
        let sub = dir.join("trajectories");
        ensure_dir(&sub)?;
        for e in &ensembles {
            let path = sub.join(format!("{}.csv", e.case.label()));
            write(&path, &render_trajectory(e.trajectory.as_deref().expect("recorded")))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// One recorded path per case on the shared price realisation.
///
/// With a single case the columns are `t,s,ask,bid,q,x,pnl`; with several,
/// the per-strategy columns are prefixed by the case label.
pub fn render_path(cfg: &RunConfig) -> Result<String> {
    let cases = cfg.cases();
    let mut runs = Vec::with_capacity(cases.len());
    for case in &cases {
        let sim = Simulator::new(cfg.sim_config(case))
            .with_context(|| format!("setting up {}", case.label()))?;
        runs.push(sim.simulate_path(cfg.path_index, true).trajectory.expect("recorded"));
    }

    let per_case = ["ask", "bid", "q", "x", "pnl"];
    let mut header = vec!["t".to_string(), "s".to_string()];
    for case in &cases {
        for col in per_case {
            header.push(if cases.len() == 1 {
                col.to_string()
            } else {
                format!("{}_{col}", case.label())
            });
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..runs[0].len() {
        let base = &runs[0][i];
        let mut fields = vec![fmt6(base.t), fmt6(base.s)];
        for run in &runs {
            let r = &run[i];
            debug_assert_eq!(r.s, base.s);
            fields.push(fmt6(r.s + r.delta_ask));
            fields.push(fmt6(r.s - r.delta_bid));
            fields.push(r.q.to_string());
            fields.push(fmt6(r.x));
            fields.push(fmt6(r.pnl()));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_path(cfg: &RunConfig) -> Result<PathBuf> {
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("path.csv");
    write(&path, &render_path(cfg)?)?;
    Ok(path)
}

/// The `(t, q, v)` grid of the first exponential case, one row per node.
pub fn render_ode(cfg: &RunConfig) -> Result<String> {
    let belief = cfg.beliefs[0];
    let point = cfg.points()[0];
    let model = belief.quoting_model(&cfg.model_at(point));
    let params = cfg.params_at(Strategy::OdeExponential, point);
    let solution =
        OdeSystem::from_model(&model, params, cfg.q_max, cfg.ode_steps)?.solve_backward()?;
    let q_max = solution.q_max();
    let mut out = String::from("t,q,v\n");
    for (i, t) in solution.grid().enumerate() {
        for (j, v) in solution.row(i).iter().enumerate() {
            let q = j as i64 - q_max;
            // Values decay like exp(-q^2): scientific notation keeps them legible.
            let _ = writeln!(out, "{},{q},{v:.9e}", fmt6(t));
        }
    }
    Ok(out)
}

pub fn cmd_ode(cfg: &RunConfig) -> Result<PathBuf> {
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("ode.csv");
    write(&path, &render_ode(cfg)?)?;
    Ok(path)
}

/// Quotes and value bound for every case at one state.
pub fn render_quotes(cfg: &RunConfig, state: &MarketState) -> Result<String> {
    let mut out = String::from(
        "strategy,belief,sweep,value,delta_ask,delta_bid,spread,indifference,ask,bid,value_bound\n",
    );
    for case in cfg.cases() {
        let sim_cfg = cfg.sim_config(&case);
        let model = case.belief.quoting_model(&sim_cfg.model);
        let (qp, bound): (QuotePair, Option<f64>) = match case.strategy {
            Strategy::OdeExponential => {
                let sol = OdeSystem::from_model(&model, sim_cfg.params, cfg.q_max, cfg.ode_steps)?
                    .solve_backward()?;
                (sol.quotes(state.t, state.s, state.q)?, None)
            }
            _ => (
                quotes(&model, &sim_cfg.params, state)?,
                Some(value_lower_bound(&model, &sim_cfg.params, state)?),
            ),
        };
        let (sweep, value) = match case.point {
            Some((p, v)) => (p.name().to_string(), v.to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{sweep},{value},{},{},{},{},{},{},{}",
            case.strategy.name(),
            case.belief.name(),
            fmt6(qp.delta_ask),
            fmt6(qp.delta_bid),
            fmt6(qp.spread),
            fmt6(qp.indifference),
            fmt6(qp.ask_price(state.s)),
            fmt6(qp.bid_price(state.s)),
            bound.map_or_else(|| "NA".to_string(), |b| format!("{b:.6e}")),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn small(extra: &str) -> RunConfig {
        let text = format!(
            "kind = ou\na = 1\nmu = 1\nsigma = 0.05\ns0 = 1\nA = 1500\nk = 100\nT = 1\n\
             gamma = 1\neta = 0.001\nstrategy = linear_penalty, exponential\nseed = 3\n\
             n_steps = 100\nn_paths = 50\n{extra}"
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn table_shape_and_sentinels() {
        let cfg = small("sweep = eta: 0, 0.0001, 0.001\n");
        let rows = table_rows(&run_cases(&cfg, Some(1)).unwrap()).unwrap();
        assert_eq!(rows.len(), 6);
        let csv = render_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TABLE_HEADER.join(","));
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("linear_penalty,model,eta,0,50,"));
        assert!(!csv.contains('\r'));

        let mut single = small("");
        single.n_paths = 1;
        let rows = table_rows(&run_cases(&single, None).unwrap()).unwrap();
        assert_eq!(rows[0].n, 1);
        assert_eq!(rows[0].std_dev, None);
        let csv = render_csv(&rows);
        assert!(csv.lines().nth(1).unwrap().contains(",NA,NA,"));
    }

    #[test]
    fn json_rows_use_null_for_sentinels() {
        let mut cfg = small("table_format = json\n");
        cfg.n_paths = 1;
        let rows = table_rows(&run_cases(&cfg, None).unwrap()).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&render_table(&cfg, &rows)).unwrap();
        assert_eq!(parsed.as_array().unwrap().len(), 2);
        assert!(parsed[0]["std_dev"].is_null());
        assert_eq!(parsed[0]["strategy"], "linear_penalty");
    }

    #[test]
    fn path_rows_and_no_flow() {
        let cfg = small("");
        let text = render_path(&cfg).unwrap();
        assert_eq!(text.lines().count(), 1 + 101);
        assert!(text.lines().next().unwrap().contains("linear_penalty_model_pnl"));

        // Under a martingale belief both distances stay positive, so nothing trades.
        let mut idle = small("belief = martingale\n");
        idle.intensity = 0.0;
        idle.strategies = vec![Strategy::LinearPenalty];
        let text = render_path(&idle).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,s,ask,bid,q,x,pnl");
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[4], "0");
            assert_eq!(cols[5], "0.000000");
        }
    }

    #[test]
    fn ode_dump() {
        let text = "kind = abm\nsigma = 0.05\ns0 = 1\nA = 1500\nk = 100\nT = 1\ngamma = 1\n\
                    strategy = ode_exponential\nseed = 1\nq_max = 4\node_steps = 10\n";
        let cfg = parse_config(text).unwrap();
        let out = render_ode(&cfg).unwrap();
        assert_eq!(out.lines().count(), 1 + 11 * 9);
        let last = out.lines().last().unwrap();
        assert_eq!(last, "1.000000,4,1.000000000e0");
    }

    #[test]
    fn quotes_table() {
        let cfg = small("belief = martingale\n");
        let state = MarketState { t: 0.0, s: 1.0, q: 0, x: 0.0 };
        let out = render_quotes(&cfg, &state).unwrap();
        let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "linear_penalty");
        assert_eq!(row[4], "0.011000");
        assert_eq!(row[6], "0.022000");
    }

    #[test]
    fn histogram_shares_range() {
        let cfg = small("");
        let ens = run_cases(&cfg, None).unwrap();
        let out = render_histograms(&ens, 5).unwrap();
        assert_eq!(out.lines().count(), 1 + 10);
        let total: u64 = out
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, 100);
    }
}
