use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simple_structures::data::Dataset;
use simple_structures::learners::tree::{Node, SplitTest};
use simple_structures::learners::*;

fn xor_dataset(per_corner: [usize; 4]) -> Dataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for ((x, y), count) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)].into_iter().zip(per_corner) {
        for j in 0..count {
            let d = j as f64 * 0.01;
            rows.push(vec![x + d, y + d]);
            labels.push(usize::from((x > 0.5) != (y > 0.5)));
        }
    }
    Dataset::from_numeric(rows, labels).unwrap()
}

fn training_accuracy(ds: &Dataset, model: &TreeModel) -> f64 {
    let hits = (0..ds.n()).filter(|&i| model.predict(ds.row(i)) == ds.label(i)).count();
    hits as f64 / ds.n() as f64
}

#[test]
fn xor_is_out_of_reach_for_a_stump() {
    let ds = xor_dataset([10; 4]);
    let all: Vec<usize> = (0..ds.n()).collect();
    let stump = dt_fit(&ds, &all, &TreeHyper { max_depth: 1, min_leaf: 1 }).unwrap();
    assert!(training_accuracy(&ds, &stump) <= 0.75);
    // balanced corners give every root split zero gain; skew one corner
    let ds = xor_dataset([14, 10, 10, 10]);
    let all: Vec<usize> = (0..ds.n()).collect();
    let stump = dt_fit(&ds, &all, &TreeHyper { max_depth: 1, min_leaf: 1 }).unwrap();
    assert!(training_accuracy(&ds, &stump) <= 0.75);
    let deeper = dt_fit(&ds, &all, &TreeHyper { max_depth: 4, min_leaf: 1 }).unwrap();
    assert_eq!(training_accuracy(&ds, &deeper), 1.0);
}

#[test]
fn deep_tree_memorizes_distinct_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..10 {
        let n = rng.random_range(5..60);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let ds = Dataset::from_numeric(rows, labels.clone()).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let model = dt_fit(&ds, &all, &TreeHyper { max_depth: 64, min_leaf: 1 }).unwrap();
        for i in 0..n {
            assert_eq!(model.predict(ds.row(i)), labels[i]);
        }
    }
}

fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, n_classes: usize) -> TreeModel {
    fn build(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, depth: usize, nf: usize, nc: usize) -> usize {
        let slot = nodes.len();
        nodes.push(Node::Leaf { counts: Vec::new() });
        if depth == 0 || rng.random_bool(0.25) {
            let counts = (0..nc).map(|_| rng.random_range(0..5)).collect();
            nodes[slot] = Node::Leaf { counts };
        } else {
            let feature = rng.random_range(0..nf);
            let test = SplitTest::LessThan(rng.random_range(-1.0..1.0));
            let left = build(rng, nodes, depth - 1, nf, nc);
            let right = build(rng, nodes, depth - 1, nf, nc);
            nodes[slot] = Node::Split { feature, test, left, right };
        }
        slot
    }
    let mut nodes = Vec::new();
    build(rng, &mut nodes, 5, n_features, n_classes);
    TreeModel {
        class_ids: (0..n_classes).collect(),
        nodes,
        hyper: TreeHyper::default(),
    }
}

fn follow_path(model: &TreeModel, at: usize, row: &[f64]) -> usize {
    match &model.nodes[at] {
        Node::Leaf { counts } => {
            let top = *counts.iter().max().unwrap();
            model.class_ids[counts.iter().position(|&c| c == top).unwrap()]
        }
        Node::Split {
            feature,
            test: SplitTest::LessThan(t),
            left,
            right,
        } => {
            if row[*feature] < *t {
                follow_path(model, *left, row)
            } else {
                follow_path(model, *right, row)
            }
        }
        Node::Split { .. } => unreachable!("only numeric tests are generated"),
    }
}

#[test]
fn prediction_follows_the_path_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let tree = random_tree(&mut rng, 3, 4);
        for _ in 0..40 {
            let row: Vec<f64> = (0..3).map(|_| rng.random_range(-1.2..1.2)).collect();
            assert_eq!(dt_predict(&tree, &row), follow_path(&tree, 0, &row));
        }
    }
}

fn random_objective(rng: &mut ChaCha8Rng) -> (LogisticObjective, Vec<f64>) {
    let m = rng.random_range(3..30);
    let width = rng.random_range(1..5);
    let k = rng.random_range(2..5);
    let x: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..width).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
    let obj = LogisticObjective::new(x, y, k, rng.random_range(0.0..1.0));
    let theta = (0..obj.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    (obj, theta)
}

#[test]
fn logistic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let (obj, theta) = random_objective(&mut rng);
        let (_, grad) = obj.loss_and_gradient(&theta);
        let h = 1e-6;
        for j in 0..theta.len() {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[j] += h;
            down[j] -= h;
            let numeric = (obj.loss(&up) - obj.loss(&down)) / (2.0 * h);
            let rel = (grad[j] - numeric).abs() / grad[j].abs().max(numeric.abs()).max(1e-8);
            assert!(rel <= 1e-4 || (grad[j] - numeric).abs() < 1e-9, "param {j}: {} vs {numeric}", grad[j]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn em_objective_never_decreases(seed in 0u64..1000, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let c = (i % 3) as f64 * 4.0;
                vec![c + rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]
            })
            .collect();
        let ds = Dataset::from_numeric(rows, vec![0; 60]).unwrap();
        let all: Vec<usize> = (0..60).collect();
        let cfg = GmmConfig { n_components: k, rng_seed: seed, ..GmmConfig::default() };
        let model = gmm_fit(&ds, &all, &cfg).unwrap();
        for trace in &model.restart_traces {
            for w in trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-8);
            }
        }
        prop_assert!((model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn logistic_probabilities_form_a_distribution(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
        let labels: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
        let ds = Dataset::from_numeric(rows, labels).unwrap();
        let all: Vec<usize> = (0..30).collect();
        let model = lr_fit(&ds, &all, &LrHyper::default()).unwrap();
        for i in 0..30 {
            let p = model.predict_proba(ds.row(i));
            prop_assert!(p.probs.iter().all(|&v| v >= 0.0));
            prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
