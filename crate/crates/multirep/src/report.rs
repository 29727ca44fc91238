//! CSV exports and the tables behind the comparison figures.

use multirep_core::metrics::{AggregateTable, Metric};
use multirep_core::stats::{multi_comparison_matrix, pareto_frontier, RankingReport, ScoreMatrix};

use crate::error::{Error, Result};

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `model,metric,value`, one row per model and metric.
pub fn aggregate_csv(table: &AggregateTable) -> Vec<u8> {
    let rows = table.models.iter().flat_map(|m| {
        Metric::ALL
            .into_iter()
            .map(move |metric| vec![m.clone(), metric.key().to_string(), num(table.overall(m, metric))])
    });
    csv_bytes(&["model", "metric", "value"], rows)
}

/// Datasets x models matrix of per-dataset means of `metric`.
pub fn score_matrix(table: &AggregateTable, metric: Metric) -> Result<ScoreMatrix> {
    let mut values = Vec::with_capacity(table.datasets.len() * table.models.len());
    for d in &table.datasets {
        for m in &table.models {
            let v = table.dataset_mean(m, d, metric).ok_or_else(|| {
                Error::Core(multirep_core::Error::InvalidScores(format!(
                    "{metric} is undefined for {m} on {d}"
                )))
            })?;
            values.push(v);
        }
    }
    Ok(ScoreMatrix::new(
        table.datasets.clone(),
        table.models.clone(),
        values,
        metric.higher_is_better(),
    )?)
}

/// `model,average_rank` by ascending rank.
pub fn ranks_csv(report: &RankingReport) -> Vec<u8> {
    let rows = report
        .order()
        .into_iter()
        .map(|i| vec![report.models[i].clone(), report.average_ranks[i].to_string()]);
    csv_bytes(&["model", "average_rank"], rows)
}

/// `key,value` summary of the Friedman / Nemenyi analysis.
pub fn report_csv(report: &RankingReport, metric: Metric) -> Vec<u8> {
    let mut rows = vec![
        vec!["metric".into(), metric.key().into()],
        vec![
            "orientation".into(),
            if report.higher_is_better { "higher_is_better" } else { "lower_is_better" }.into(),
        ],
        vec!["datasets".into(), report.n_datasets.to_string()],
        vec!["models".into(), report.models.len().to_string()],
        vec!["chi2".into(), report.chi2.to_string()],
        vec!["p_value".into(), report.p_value.to_string()],
    ];
    if let Some((f, p)) = report.iman_davenport {
        rows.push(vec!["iman_davenport_f".into(), f.to_string()]);
        rows.push(vec!["iman_davenport_p".into(), p.to_string()]);
    }
    rows.push(vec!["alpha".into(), report.alpha.to_string()]);
    rows.push(vec!["cd".into(), report.cd.to_string()]);
    let cliques: Vec<String> = report
        .cliques
        .iter()
        .map(|c| c.iter().map(|&i| report.models[i].as_str()).collect::<Vec<_>>().join("|"))
        .collect();
    rows.push(vec!["cliques".into(), cliques.join(";")]);
    csv_bytes(&["key", "value"], rows)
}

/// `model,opponent,wins,ties,losses,mean_diff` for every ordered pair.
pub fn mcm_csv(scores: &ScoreMatrix) -> Vec<u8> {
    let mcm = multi_comparison_matrix(scores);
    let models = scores.models();
    let mut rows = Vec::new();
    for (i, row) in mcm.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some(s) = cell {
                rows.push(vec![
                    models[i].clone(),
                    models[j].clone(),
                    s.wins.to_string(),
                    s.ties.to_string(),
                    s.losses.to_string(),
                    s.mean_diff.to_string(),
                ]);
            }
        }
    }
    csv_bytes(&["model", "opponent", "wins", "ties", "losses", "mean_diff"], rows)
}

/// One model's position on the cost / score plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffPoint {
    pub model: String,
    pub cost: f64,
    pub score: f64,
    pub auc: Option<f64>,
    pub nll: f64,
    pub accuracy: f64,
}

pub fn tradeoff_points(table: &AggregateTable, cost: Metric, score: Metric) -> Result<Vec<TradeoffPoint>> {
    table
        .models
        .iter()
        .map(|m| {
            let get = |metric: Metric| {
                table.overall(m, metric).ok_or_else(|| {
                    Error::Core(multirep_core::Error::InvalidScores(format!("{metric} is undefined for {m}")))
                })
            };
            Ok(TradeoffPoint {
                model: m.clone(),
                cost: get(cost)?,
                score: get(score)?,
                auc: table.overall(m, Metric::Auc),
                nll: get(Metric::Nll)?,
                accuracy: get(Metric::Accuracy)?,
            })
        })
        .collect()
}

/// Frontier indices into `points`, ascending cost.
pub fn frontier(points: &[TradeoffPoint]) -> Vec<usize> {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.cost, p.score)).collect();
    pareto_frontier(&xy)
}

/// All points: `model,cost,score,auc,nll,on_frontier`, in model order.
pub fn points_csv(points: &[TradeoffPoint], on_frontier: &[usize]) -> Vec<u8> {
    let rows = points.iter().enumerate().map(|(i, p)| {
        vec![
            p.model.clone(),
            p.cost.to_string(),
            p.score.to_string(),
            num(p.auc),
            p.nll.to_string(),
            on_frontier.contains(&i).to_string(),
        ]
    });
    csv_bytes(&["model", "cost", "score", "auc", "nll", "on_frontier"], rows)
}

/// Frontier only: `model,cost,score`, ascending cost.
pub fn frontier_csv(points: &[TradeoffPoint], on_frontier: &[usize]) -> Vec<u8> {
    let rows = on_frontier
        .iter()
        .map(|&i| vec![points[i].model.clone(), points[i].cost.to_string(), points[i].score.to_string()]);
    csv_bytes(&["model", "cost", "score"], rows)
}

/// `model,accuracy,nll`.
pub fn calibration_csv(points: &[TradeoffPoint]) -> Vec<u8> {
    let rows = points
        .iter()
        .map(|p| vec![p.model.clone(), p.accuracy.to_string(), p.nll.to_string()]);
    csv_bytes(&["model", "accuracy", "nll"], rows)
}
