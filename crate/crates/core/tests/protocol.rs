use skeltensor::config::RunConfig;
use skeltensor::pipeline::{self, gridsearch};

fn cfg(text: &str) -> RunConfig {
    RunConfig::parse(text).unwrap()
}

const BURSTY: &str = "dataset.format = synth
synth.classes = 4
synth.per_class = 10
synth.joints = 6
synth.frames = 20
synth.noise = 0.1
synth.burst_repeats = 3
synth.burst_fraction = 0.3
kind = sck
grid.sck.gamma = 0.36, 1
";

#[test]
fn damped_cell_scores_at_least_undamped_on_bursty_data() {
    let rows = gridsearch(&cfg(BURSTY)).unwrap();
    assert_eq!(rows.len(), 2);
    let acc = |g: &str| {
        rows.iter()
            .find(|r| r.values["sck.gamma"] == g)
            .unwrap()
            .validation_accuracy
    };
    assert!(
        acc("0.36") >= acc("1"),
        "gamma 0.36: {}, gamma 1: {}",
        acc("0.36"),
        acc("1")
    );
}

#[test]
fn subset_average_runs_one_fold_per_action_set() {
    let dir = tempfile::tempdir().unwrap();
    let sets = dir.path().join("sets.txt");
    std::fs::write(&sets, "AS1 1 2 3\nAS2 2 3 4\n").unwrap();
    let c = cfg(&format!(
        "dataset.format = synth\nsynth.classes = 4\nsynth.per_class = 8\nsynth.joints = 4\nsynth.frames = 12\n\
         kind = dck\nsvm.c = 10\nsplit.kind = subset-average\nsplit.action_sets = {}\n",
        sets.display()
    ));
    let data = pipeline::load_data(&c).unwrap();
    let (report, _) = pipeline::train_eval(&c, &data).unwrap();
    assert_eq!(report.folds.len(), 2);
    assert_eq!(report.folds[0].eval.classes, vec![1, 2, 3]);
    let mean = (report.folds[0].eval.accuracy + report.folds[1].eval.accuracy) / 2.0;
    assert!((report.accuracy - mean).abs() < 1e-15);
}

#[test]
fn overlapping_subjects_fail_before_training() {
    let c = cfg("dataset.format = synth\nsynth.classes = 2\nsynth.per_class = 6\nsplit.train_subjects = 1,2,3\nsplit.test_subjects = 3,4\n");
    let data = pipeline::load_data(&c).unwrap();
    let e = pipeline::train_eval(&c, &data)
        .err()
        .expect("overlap must be rejected");
    assert_eq!(e.exit_code(), 1);
    assert!(e.to_string().contains('3'), "{e}");
}

#[test]
fn shipped_data_files_parse() {
    let data = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let florence =
        skeltensor::preprocess::SkeletonTopology::load(&data.join("florence3d_topology.txt"))
            .unwrap();
    assert_eq!((florence.root(), florence.edges().len()), (3, 14));
    let msr =
        skeltensor::preprocess::SkeletonTopology::load(&data.join("msr_action3d_topology.txt"))
            .unwrap();
    assert_eq!((msr.root(), msr.edges().len()), (7, 19));
    let sets = skeltensor::dataset::load_action_sets(&data.join("msr_action_sets.txt")).unwrap();
    assert_eq!(sets.len(), 3);
    assert!(sets.iter().all(|(_, classes)| classes.len() == 8));
    for name in ["florence3d.cfg", "msr_action3d.cfg", "synthetic.cfg"] {
        RunConfig::load(&data.join(name)).unwrap();
    }
}
