//! Check batteries shared by the unit-level tests and the acceptance run.

use multirep_core::kernels::{BatchNormState, Graph, Mode, Tensor, Value};
use multirep_core::models::{LmrmsConfig, Model, MrmsConfig};
use multirep_core::representations::{dct, fft_magnitude, hilbert_magnitude};
use rand::Rng;

use super::*;

pub const FD_STEP: f64 = 1e-6;

/// Worst peak-relative error of each spectral transform against its
/// direct-sum oracle over `per_len` random series at each length.
pub fn transform_errors(per_len: usize, seed: u64) -> [(&'static str, f64); 3] {
    let mut r = rng(seed);
    let mut worst = [0.0f64; 3];
    for &len in &[8usize, 33, 128] {
        for _ in 0..per_len {
            let x = random_series(&mut r, len);
            worst[0] = worst[0].max(peak_relative_error(&fft_magnitude(&x).unwrap(), &super::fft_magnitude(&x)));
            worst[1] = worst[1].max(peak_relative_error(&dct(&x).unwrap(), &super::dct(&x)));
            worst[2] = worst[2].max(peak_relative_error(&hilbert_magnitude(&x).unwrap(), &super::hilbert_magnitude(&x)));
        }
    }
    [("fft_magnitude", worst[0]), ("dct", worst[1]), ("hilbert_magnitude", worst[2])]
}

fn probe(g: &mut Graph, v: Value, seed: u64) -> Value {
    let n = g.value(v).len();
    let mut r = rng(seed);
    let w: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    g.weighted_sum(v, &w).unwrap()
}

/// Worst finite-difference error per differentiable kernel.
pub fn kernel_gradient_errors() -> Vec<(&'static str, f64)> {
    let mut r = rng(30);
    let mut out = Vec::new();

    let x = random_tensor(&mut r, &[2, 3, 9]);
    let w = random_tensor(&mut r, &[4, 3, 5]);
    let b = random_tensor(&mut r, &[4]);
    out.push((
        "conv1d",
        check_gradients(
            &[x.clone(), w, b],
            &|g, v| {
                let y = g.conv1d(v[0], v[1], v[2]).unwrap();
                probe(g, y, 1)
            },
            FD_STEP,
        ),
    ));

    let gamma = random_tensor(&mut r, &[3]);
    let beta = random_tensor(&mut r, &[3]);
    out.push((
        "batch_norm (train)",
        check_gradients(
            &[x.clone(), gamma.clone(), beta.clone()],
            &|g, v| {
                let mut s = BatchNormState::new(3);
                let y = g.batch_norm(v[0], v[1], v[2], &mut s, Mode::Train).unwrap();
                probe(g, y, 2)
            },
            FD_STEP,
        ),
    ));
    let mut state = BatchNormState::new(3);
    state.running_mean = vec![0.3, -0.2, 0.1];
    state.running_var = vec![0.5, 1.7, 2.2];
    out.push((
        "batch_norm (infer)",
        check_gradients(
            &[x.clone(), gamma, beta],
            &|g, v| {
                let y = g.batch_norm_infer(v[0], v[1], v[2], &state).unwrap();
                probe(g, y, 3)
            },
            FD_STEP,
        ),
    ));

    out.push((
        "relu",
        check_gradients(
            &[x.clone()],
            &|g, v| {
                let y = g.relu(v[0]);
                probe(g, y, 4)
            },
            FD_STEP,
        ),
    ));

    out.push((
        "dropout",
        check_gradients(
            &[x.clone()],
            &|g, v| {
                let mut mask_rng = rng(77);
                let y = g.dropout(v[0], 0.3, Mode::Train, &mut mask_rng).unwrap();
                probe(g, y, 5)
            },
            FD_STEP,
        ),
    ));

    out.push((
        "global_avg_pool",
        check_gradients(
            &[x.clone()],
            &|g, v| {
                let y = g.global_avg_pool(v[0]).unwrap();
                probe(g, y, 6)
            },
            FD_STEP,
        ),
    ));

    let f = random_tensor(&mut r, &[3, 5]);
    let dw = random_tensor(&mut r, &[4, 5]);
    let db = random_tensor(&mut r, &[4]);
    out.push((
        "dense",
        check_gradients(
            &[f, dw, db],
            &|g, v| {
                let y = g.dense(v[0], v[1], v[2]).unwrap();
                probe(g, y, 7)
            },
            FD_STEP,
        ),
    ));

    let other = random_tensor(&mut r, &[2, 2, 9]);
    out.push((
        "concat_channels",
        check_gradients(
            &[x, other],
            &|g, v| {
                let y = g.concat_channels(&[v[0], v[1]]).unwrap();
                probe(g, y, 8)
            },
            FD_STEP,
        ),
    ));

    let logits = random_tensor(&mut r, &[4, 3]);
    out.push((
        "softmax_cross_entropy",
        check_gradients(
            &[logits.clone()],
            &|g, v| g.softmax_cross_entropy(v[0], &[0, 2, 1, 2]).unwrap(),
            FD_STEP,
        ),
    ));
    out.push((
        "weighted_sum",
        check_gradients(&[logits], &|g, v| probe(g, v[0], 9), FD_STEP),
    ));
    out
}

/// Finite-difference error of the training loss over every parameter of
/// `model` (train mode, dropout mask held fixed).
pub fn model_gradient_error(model: &Model, x: &Tensor, y: &[usize]) -> f64 {
    let loss = |m: &Model| -> f64 {
        let mut m = m.clone();
        let mut g = Graph::new();
        let p = m.params().bind(&mut g);
        let xv = g.constant(x.clone());
        let mut mask_rng = rng(99);
        let logits = m.forward_train(&mut g, &p, xv, &mut mask_rng).unwrap();
        let l = g.softmax_cross_entropy(logits, y).unwrap();
        g.value(l).data()[0]
    };
    let mut m = model.clone();
    let mut g = Graph::new();
    let p = m.params().bind(&mut g);
    let xv = g.constant(x.clone());
    let mut mask_rng = rng(99);
    let logits = m.forward_train(&mut g, &p, xv, &mut mask_rng).unwrap();
    let l = g.softmax_cross_entropy(logits, y).unwrap();
    g.backward(l).unwrap();

    let mut worst = 0.0f64;
    for id in model.params().ids() {
        let n = model.params().get(id).len();
        let analytic = g.grad(p.get(id)).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        for j in 0..n {
            let mut plus = model.clone();
            plus.params_mut().get_mut(id).data_mut()[j] += FD_STEP;
            let mut minus = model.clone();
            minus.params_mut().get_mut(id).data_mut()[j] -= FD_STEP;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(grad_relative_error(analytic[j], numeric));
        }
    }
    worst
}

/// Reduced-width networks at R=2, L=16, C=2.
pub fn reduced_models(seed: u64) -> (Model, Model) {
    let mut m = MrmsConfig::new(2);
    m.branch_filters = 8;
    m.fusion_channels = vec![32, 32];
    let mut l = LmrmsConfig::new(2);
    l.hidden_units = 16;
    l.main_channels = vec![16, 32];
    (
        Model::Mrms(multirep_core::models::Mrms::new(m, 2, seed).unwrap()),
        Model::Lmrms(multirep_core::models::Lmrms::new(l, 2, seed).unwrap()),
    )
}

pub fn model_gradient_errors() -> Vec<(&'static str, f64)> {
    let mut r = rng(31);
    let x = random_tensor(&mut r, &[4, 2, 16]);
    let y = [0, 1, 1, 0];
    let (mrms, lmrms) = reduced_models(5);
    vec![
        ("mrms", model_gradient_error(&mrms, &x, &y)),
        ("lmrms", model_gradient_error(&lmrms, &x, &y)),
    ]
}

pub struct Smoke {
    pub record: multirep_core::metrics::RunRecord,
    pub loss_history: Vec<f64>,
    pub accuracy: f64,
    pub seconds: f64,
    pub epochs: usize,
    pub model: Model,
    pub test: multirep_core::training::StackedSet,
}

/// Default training on two_sines (N=60, L=64), minimal preset, a third
/// held out.
pub fn smoke_run(kind: multirep_core::models::ModelKind, seed: u64, timing: multirep_core::training::Timing<'_>) -> Smoke {
    use multirep_core::data::{make_synthetic, monte_carlo_split, SyntheticKind};
    use multirep_core::models::ModelConfig;
    use multirep_core::representations::Preset;
    use multirep_core::training::{run_single, RunSpec, TrainConfig};

    let ds = make_synthetic(SyntheticKind::TwoSines, 60, 64, seed).unwrap();
    let plan = &monte_carlo_split(&ds, 1, seed, 2.0 / 3.0).unwrap()[0];
    let kinds = Preset::Minimal.kinds();
    let spec = RunSpec::new(ModelConfig::new(kind, 2), kinds.clone(), TrainConfig { seed, ..TrainConfig::default() });
    let t = std::time::Instant::now();
    let r = run_single(&spec, &ds, plan, timing).unwrap();
    let seconds = t.elapsed().as_secs_f64();
    Smoke {
        loss_history: r.outcome.loss_history,
        accuracy: r.record.accuracy,
        seconds,
        epochs: r.record.epochs,
        model: r.outcome.model,
        test: multirep_core::training::StackedSet::from_dataset(&ds, &plan.test, &kinds).unwrap(),
        record: r.record,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitContract {
    pub all_exit_at_zero: bool,
    pub none_exit_above_one: bool,
    pub monotone: bool,
    pub bit_match: bool,
}

impl ExitContract {
    pub fn holds(&self) -> bool {
        self.all_exit_at_zero && self.none_exit_above_one && self.monotone && self.bit_match
    }
}

pub fn exit_contract(model: &multirep_core::models::Lmrms, batch: &Tensor) -> ExitContract {
    let at = |tau: f64| model.infer_with_threshold(batch, tau).unwrap();
    let fractions: Vec<f64> = (0..=5).map(|i| at(i as f64 * 0.2).early_exit_fraction()).collect();
    let main = model.main_logits(batch).unwrap();
    let early = model.early_logits(batch).unwrap();
    let c = main.shape()[1];
    let mut bit_match = true;
    for tau in [0.0, 0.5, 0.7, 0.9, 0.99, 1.5] {
        let out = at(tau);
        for (i, exited) in out.exited_early.iter().enumerate() {
            let want = if *exited { &early } else { &main };
            let got = &out.logits.data()[i * c..(i + 1) * c];
            bit_match &= got.iter().zip(&want.data()[i * c..(i + 1) * c]).all(|(a, b)| a.to_bits() == b.to_bits());
        }
    }
    ExitContract {
        all_exit_at_zero: at(0.0).early_exit_fraction() == 1.0,
        none_exit_above_one: at(1.0 + 1e-9).early_exit_fraction() == 0.0 && at(2.0).early_exit_fraction() == 0.0,
        monotone: fractions.windows(2).all(|w| w[1] <= w[0]),
        bit_match,
    }
}

/// Friedman statistic when every dataset orders three models identically.
pub fn friedman_fixed_ordering() -> f64 {
    use multirep_core::stats::{friedman, ScoreMatrix};
    let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let values = [0.9, 0.8, 0.7].repeat(4);
    let m = ScoreMatrix::new(names("d", 4), names("m", 3), values, true).unwrap();
    friedman(&m).0
}

pub fn random_ranks(r: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k)
        .map(|_| {
            // Quarter steps make ties and near-CD gaps common.
            1.0 + (r.random_range(0..(4 * (k - 1) + 1)) as f64) * 0.25
        })
        .collect()
}

/// Count of random rank vectors on which the clique builder disagrees
/// with subset enumeration.
pub fn clique_mismatches(trials: usize, seed: u64) -> usize {
    use multirep_core::stats::cd_cliques;
    let mut r = rng(seed);
    let mut bad = 0;
    for _ in 0..trials {
        let k = r.random_range(2..=10);
        let ranks = random_ranks(&mut r, k);
        let cd = r.random_range(0.1..3.0);
        let labels: Vec<String> = (0..k).map(|i| format!("m{i}")).collect();
        let mut got: Vec<Vec<usize>> = cd_cliques(&ranks, &labels, cd)
            .into_iter()
            .map(|mut c| {
                c.sort();
                c
            })
            .collect();
        got.sort();
        if got != brute_force_cliques(&ranks, cd) {
            bad += 1;
        }
    }
    bad
}

/// Count of random point sets (n <= 100) whose frontier differs from the
/// quadratic oracle.
pub fn frontier_mismatches(trials: usize, seed: u64) -> usize {
    use multirep_core::stats::pareto_frontier;
    let mut r = rng(seed);
    let mut bad = 0;
    for _ in 0..trials {
        let n = r.random_range(1..=100);
        let coarse = r.random_bool(0.5);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                if coarse {
                    (r.random_range(0..8) as f64, r.random_range(0..8) as f64)
                } else {
                    (r.random_range(0.0..10.0), r.random_range(0.0..1.0))
                }
            })
            .collect();
        if pareto_frontier(&points) != brute_force_frontier(&points) {
            bad += 1;
        }
    }
    bad
}

fn grid_record(model: &str, dataset: &str, resample: usize, accuracy: f64, nll: f64) -> multirep_core::metrics::RunRecord {
    multirep_core::metrics::RunRecord {
        model: model.into(),
        dataset: dataset.into(),
        resample,
        accuracy,
        macro_f1: accuracy,
        auc: Some(accuracy),
        nll,
        train_seconds: 1.0,
        test_seconds: 0.5,
        epochs: 1,
        params: 1,
    }
}

/// 2 models x 3 datasets x 2 resamples with dyadic values.
pub fn aggregation_grid() -> Vec<multirep_core::metrics::RunRecord> {
    let rows = [
        ("a", "d1", [(0.5, 0.5), (1.0, 0.25)]),
        ("a", "d2", [(0.25, 1.0), (0.75, 0.5)]),
        ("a", "d3", [(1.0, 0.125), (1.0, 0.125)]),
        ("b", "d1", [(0.5, 0.25), (0.5, 0.25)]),
        ("b", "d2", [(0.0, 0.5), (0.5, 0.5)]),
        ("b", "d3", [(0.75, 0.25), (0.25, 0.25)]),
    ];
    let mut out = Vec::new();
    for (m, d, runs) in rows {
        for (i, (acc, nll)) in runs.into_iter().enumerate() {
            out.push(grid_record(m, d, i, acc, nll));
        }
    }
    out
}

/// Whether the grid aggregates to the hand-computed means and nll ranks
/// lower-is-better.
pub struct AggregationCheck {
    pub means_exact: bool,
    pub nll_orientation: bool,
}

pub fn aggregation_check() -> AggregationCheck {
    use multirep_core::metrics::{aggregate, Metric};
    use multirep_core::stats::{average_ranks, ScoreMatrix};
    let mut records = aggregation_grid();
    records.reverse();
    let t = aggregate(&records).unwrap();
    let cells = [
        ("a", "d1", 0.75, 0.375),
        ("a", "d2", 0.5, 0.75),
        ("a", "d3", 1.0, 0.125),
        ("b", "d1", 0.5, 0.25),
        ("b", "d2", 0.25, 0.5),
        ("b", "d3", 0.5, 0.25),
    ];
    let mut exact = cells.iter().all(|&(m, d, acc, nll)| {
        t.dataset_mean(m, d, Metric::Accuracy) == Some(acc) && t.dataset_mean(m, d, Metric::Nll) == Some(nll)
    });
    exact &= t.overall("a", Metric::Accuracy) == Some(0.75);
    exact &= t.overall("b", Metric::Accuracy) == Some(5.0 / 12.0);
    exact &= t.overall("a", Metric::Nll) == Some(5.0 / 12.0);
    exact &= t.overall("b", Metric::Nll) == Some(1.0 / 3.0);
    exact &= t.overall("a", Metric::TrainSeconds) == Some(1.0);

    let matrix = |metric: Metric| {
        let mut v = Vec::new();
        for d in &t.datasets {
            for m in &t.models {
                v.push(t.dataset_mean(m, d, metric).unwrap());
            }
        }
        ScoreMatrix::new(t.datasets.clone(), t.models.clone(), v, metric.higher_is_better()).unwrap()
    };
    let nll = average_ranks(&matrix(Metric::Nll));
    let acc = average_ranks(&matrix(Metric::Accuracy));
    AggregationCheck {
        means_exact: exact,
        nll_orientation: nll == [5.0 / 3.0, 4.0 / 3.0] && acc == [1.0, 2.0],
    }
}
