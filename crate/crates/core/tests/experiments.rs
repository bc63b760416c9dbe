use fedquant::experiment::{run_experiment, ExperimentConfig};

const TASK: &str = r#"
[task]
kind = "logistic_regression"
dim = 12
num_clients = 12
max_size = 60
test_size = 200

[training]
rounds = 4
clients_per_round = 3
client_lr = 0.1
server_lr = 1.0
"#;

fn outputs(text: &str) -> Vec<fedquant::experiment::Output> {
    run_experiment(&ExperimentConfig::from_toml(text).unwrap()).unwrap()
}

#[test]
fn compare_has_one_row_per_pair() {
    let text = format!(
        "experiment = \"compare\"\nmaster_seed = 4\ngrid = [0.5, 2.0]\ntrials = 2\n{TASK}\n[compare]\ntopk_fractions = [0.1]\nqsgd_levels = [16, 256]\ntlc_sparsities = [1.0]\n"
    );
    let out = outputs(&text);
    let csv = &out[0].contents;
    // 2 ours + 1 topk + 2 qsgd + drive + 1 tlc + none.
    assert_eq!(csv.lines().count(), 1 + 8);
    let methods: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["ours", "ours", "topk", "qsgd", "qsgd", "drive", "tlc", "none"]);
    assert_eq!(outputs(&text), out);
}

#[test]
fn train_writes_trace_and_sidecar() {
    let text = format!("experiment = \"train\"\nmaster_seed = 4\n{TASK}\n[training.compressor]\nkind = \"quantized\"\nstep = 0.5\n");
    let out = outputs(&text);
    let names: Vec<&str> = out.iter().map(|o| o.name.as_str()).collect();
    assert_eq!(names, ["training.csv", "training.config.toml", "manifest.json"]);
    assert_eq!(out[0].contents.lines().count(), 5);
    assert!(out[1].contents.contains("master_seed"));
    let serial = text.replace("server_lr = 1.0", "server_lr = 1.0\nparallel = false");
    assert_eq!(outputs(&serial)[0], out[0]);
}

#[test]
fn votes_from_training_updates() {
    let text = format!(
        "experiment = \"vote\"\nmaster_seed = 2\nlambdas = [1.0, 100.0]\n[updates]\nsource = \"training\"\n{TASK}\n[training.compressor]\nkind = \"identity\"\n"
    );
    let out = outputs(&text);
    let votes = &out[0].contents;
    // 16 grid steps per lambda.
    assert_eq!(votes.lines().count(), 1 + 32);
    let total: usize = votes
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("1,"))
        .map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 4 * 3);
}

#[test]
fn update_experiments_run() {
    for kind in ["ablate_rotation", "ablate_normalization", "rounding_compare"] {
        let text = format!(
            "experiment = \"{kind}\"\nmaster_seed = 1\ngrid = [0.1, 1.0]\n[updates]\nsource = \"power_law\"\ndim = 256\ncount = 4\nnorm_sigma = 1.0\n"
        );
        let out = outputs(&text);
        assert_eq!(out.len(), 2, "{kind}");
        let rows = out[0].contents.lines().count() - 1;
        assert_eq!(rows, if kind == "rounding_compare" { 6 } else { 2 }, "{kind}");
    }
}
