use jnrf_bench::{
    bench_instance, bench_system, compare_report, overlapping_windows, standard_systems, to_tsv, BenchConfig,
    BenchError, SystemSpec,
};
use jnrf_core::{MixerKind, ModelConfig};

fn small() -> ModelConfig {
    let mut c = ModelConfig {
        embed_dim: 8,
        hidden: 8,
        head_hidden: 8,
        ..ModelConfig::default()
    };
    c.mixer.ffn_hidden = 8;
    c.mixer.n_attn_heads = 1;
    c
}

fn config(lengths: Vec<usize>) -> BenchConfig {
    BenchConfig {
        lengths,
        warmup: 0,
        vocab_size: 50,
        ..BenchConfig::default()
    }
}

fn spec(kind: MixerKind, window: usize) -> SystemSpec {
    let mut model = small();
    model.mixer.kind = kind;
    model.mixer.window = window;
    SystemSpec { name: kind.to_string(), model }
}

#[test]
fn instance_has_fixed_entities() {
    for n in [32, 1000] {
        let inst = bench_instance(n, 50, 4, 8, 0);
        assert_eq!(inst.len(), n);
        assert_eq!(inst.spans.iter().filter(|s| s.etype.is_drug()).count(), 4);
        assert_eq!(inst.spans.len(), 12);
        assert!(!inst.relations.is_empty());
    }
}

#[test]
fn counts_are_deterministic_and_tsv_shaped() {
    let s = spec(MixerKind::Fnet, 512);
    let a = bench_system::<f64>(&s, &config(vec![64, 128])).unwrap();
    let b = bench_system::<f64>(&s, &config(vec![64, 128])).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.outcome.as_ref().unwrap().macs, y.outcome.as_ref().unwrap().macs);
    }
    let tsv = to_tsv(&[a]);
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "system\tn\tseconds\tbytes\tmultiplies");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("fnet\t64\t"));
    assert_eq!(lines[1].split('\t').count(), 5);
}

#[test]
fn fnet_counts_grow_quasi_linearly() {
    let r = bench_system::<f32>(&spec(MixerKind::Fnet, 512), &config(vec![4096, 8192])).unwrap();
    let m: Vec<u64> = r.rows.iter().map(|x| x.outcome.as_ref().unwrap().macs.mixer).collect();
    assert!((m[1] as f64 / m[0] as f64) < 2.6);
}

#[test]
fn relation_counts_ignore_length() {
    let r = bench_system::<f32>(&spec(MixerKind::Fnet, 512), &config(vec![100, 1000, 5000])).unwrap();
    let rel: Vec<u64> = r.rows.iter().map(|x| x.outcome.as_ref().unwrap().macs.relation).collect();
    assert!(rel[0] > 0);
    assert_eq!(rel[0], rel[1]);
    assert_eq!(rel[1], rel[2]);
}

#[test]
fn identical_systems_compare_to_one() {
    let s = spec(MixerKind::Mlp, 512);
    let a = bench_system::<f64>(&s, &config(vec![64])).unwrap();
    let mut b = a.clone();
    b.system = "copy".into();
    let report = compare_report(&[a, b]).unwrap();
    let row = report.lines().find(|l| l.starts_with("copy")).unwrap();
    let cells: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(&cells[2..5], ["1.00", "1.00", "1.00"]);
}

#[test]
fn window_references() {
    assert_eq!(overlapping_windows(4045), 3534);
    assert_eq!(4045usize.div_ceil(512), 8);
    let systems = standard_systems(&small());
    assert_eq!(systems.len(), 3);
    assert_eq!(systems[1].model.lm_window, Some(512));
}

#[test]
fn configuration_errors() {
    let s = spec(MixerKind::Fnet, 512);
    let mut c = config(vec![64]);
    c.trials = 2;
    assert!(matches!(bench_system::<f64>(&s, &c), Err(BenchError::TooFewTrials(2))));
    assert!(matches!(bench_system::<f64>(&s, &config(vec![128, 64])), Err(BenchError::Lengths)));
    let one = bench_system::<f64>(&s, &config(vec![64])).unwrap();
    assert!(compare_report(&[one]).is_err());
}

#[test]
fn invalid_model_is_an_error() {
    let mut s = spec(MixerKind::WindowedAttention, 512);
    s.model.mixer.n_attn_heads = 3;
    assert!(bench_system::<f64>(&s, &config(vec![64])).is_err());
}
