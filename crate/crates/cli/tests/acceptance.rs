//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use vat_cli::config::load_document;
use vat_core::dataset::{pair_runs, PairPolicy};
use vat_core::evidence::{build_shift_matrix, likert_to_evidence, Aggregation};
use vat_core::metrics::{
    centralization, coupling_matrix, gnd, spearman, system_tax, tax_report, vat_profile, CorrelationKind,
    CouplingMatrix, ReportOptions, TaxReport,
};
use vat_core::robustness::{
    bootstrap_nvat, cross_granularity, kendall, rank_agreement, replicate_scenes, BootstrapOptions,
    CrossGranularityOptions,
};
use vat_core::stats::average_ranks;
use vat_core::synthetic::oracle::{oracle_gini, oracle_kendall, oracle_spearman};
use vat_core::synthetic::{generate, PlantedCoupling, PlantedSpec};
use vat_core::{Execution, PairedTable, ShiftMatrix, Taxonomy};
use vat_elicit::runner::prompts_for;
use vat_elicit::{ElicitItem, Exemplar, SteeringSpec};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn grid(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| f64::from(rng.random_range(-2i8..=2)) / 2.0).collect()
}

fn paired_of(spec: &PlantedSpec) -> PairedTable {
    let runs = generate(spec, Execution::Parallel).expect("generate");
    pair_runs(&runs.pre, &runs.post, PairPolicy::Strict).expect("pair")
}

fn shifts_of(spec: &PlantedSpec, paired: &PairedTable) -> ShiftMatrix {
    build_shift_matrix(paired, &spec.taxonomy, Aggregation::ObservedMean, Execution::Parallel).expect("shifts")
}

fn max_off_diagonal(r: &CouplingMatrix) -> (f64, usize, usize) {
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            if r.entries[i][j].abs() > best.0 {
                best = (r.entries[i][j].abs(), i, j);
            }
        }
    }
    best
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut g = rng(1);
    let mut worst = [0.0f64; 3];
    for _ in 0..1000 {
        let n = g.random_range(2..=40);
        let (x, y) = (grid(&mut g, n), grid(&mut g, n));
        worst[0] = worst[0].max((spearman(&x, &y).unwrap().value - oracle_spearman(&x, &y)).abs());
        let (x, y) = (grid(&mut g, n), grid(&mut g, n));
        worst[1] = worst[1].max((kendall(&x, &y).unwrap().value - oracle_kendall(&x, &y)).abs());
        let p: Vec<f64> = (0..n).map(|_| f64::from(g.random_range(0u8..=4)) / 4.0).collect();
        worst[2] = worst[2].max((centralization(&p).unwrap() - oracle_gini(&p)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(worst.iter().all(|&w| w <= 1e-12), "max deviations {worst:?} exceed 1e-12");
    ensure!(secs < 10.0, "took {secs:.2}s");
    Ok(format!("oracle equivalence, max dev {:.1e} in {secs:.2}s", worst.iter().fold(0.0f64, |a, &b| a.max(b))))
}

fn criterion_2() -> Outcome {
    let mut g = rng(2);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = if k % 2 == 0 { 10 } else { g.random_range(2..=20) };
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = g.random_range(-1.0..=1.0);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        let r = CouplingMatrix::from_entries((0..n).map(|i| format!("v{i}")).collect(), m);
        let nvat = system_tax(&r);
        let sum: f64 = vat_profile(&r).iter().map(|v| v * v).sum();
        worst = worst.max((nvat * nvat * n as f64 - sum).abs());
    }
    ensure!(worst <= 1e-12, "max deviation {worst:e}");
    Ok(format!("Frobenius identity on 100 matrices, max dev {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    let phi = |r| likert_to_evidence(r).unwrap().value();
    ensure!(phi(3) == 0.0 && phi(1) == -1.0 && phi(5) == 1.0, "phi fixed points");

    let spec = PlantedSpec::bundled_fixture();
    let sm = shifts_of(&spec, &paired_of(&spec));
    let target = spec.params.target.as_str();
    let g = vat_core::metrics::gain(&sm, target).unwrap();
    let entry = gnd(&sm, target, 1e-6).unwrap().into_iter().find(|e| e.value == target).unwrap();
    ensure!(entry.deviation == Some(g.signum()), "GND target {:?} vs sign {}", entry.deviation, g.signum());
    // same on the reversed direction
    let neg = sm.scaled(-1.0);
    let entry = gnd(&neg, target, 1e-6).unwrap().into_iter().find(|e| e.value == target).unwrap();
    ensure!(entry.deviation == Some(-1.0), "GND target under negation {:?}", entry.deviation);

    ensure!(centralization(&[0.37; 10]).unwrap() == 0.0, "Gini(uniform)");
    let mut one_hot = [0.0; 10];
    one_hot[4] = 2.5;
    let gh = centralization(&one_hot).unwrap();
    ensure!((gh - 0.9).abs() <= 1e-12 && (oracle_gini(&one_hot) - 0.9).abs() <= 1e-12, "Gini(one-hot) {gh}");

    let names: Vec<String> = (0..10).map(|i| format!("v{i}")).collect();
    let zero = CouplingMatrix::from_entries(names.clone(), vec![vec![0.0; 10]; 10]);
    ensure!(system_tax(&zero) == 0.0, "nVAT(zero)");
    for c in [0.1, 0.25, 0.5, 0.9, -0.3] {
        let m = CouplingMatrix::from_entries(names.clone(), vec![vec![c; 10]; 10]);
        let got = system_tax(&m);
        ensure!((got - 3.0 * c.abs()).abs() <= 1e-12, "constant {c}: nVAT {got}");
    }
    Ok("phi grid, GND target = sign(Gain), Gini 0 / 0.9, nVAT 0 / 3c".into())
}

fn single_pair_spec(r: f64, n: usize, seed: u64) -> PlantedSpec {
    let mut spec = PlantedSpec::bundled_fixture();
    spec.params.n_scenes = n;
    spec.params.coupling = vec![PlantedCoupling {
        u: "power".into(),
        w: "achievement".into(),
        r,
    }];
    spec.params.noise_scale = 1.0;
    spec.params.target_mean_shift = 0.0;
    spec.params.seed = seed;
    spec
}

/// Sample Spearman of a million bivariate normal draws with correlation `r`.
fn monte_carlo_spearman(r: f64, draws: usize, seed: u64) -> f64 {
    let mut g = rng(seed);
    let mut x = Vec::with_capacity(draws);
    let mut y = Vec::with_capacity(draws);
    for _ in 0..draws {
        let a: f64 = g.sample(StandardNormal);
        let b: f64 = g.sample(StandardNormal);
        x.push(a);
        y.push(r * a + (1.0 - r * r).sqrt() * b);
    }
    let (rx, ry) = (average_ranks(&x), average_ranks(&y));
    let m = (draws as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - m) * (b - m);
        sxx += (a - m) * (a - m);
        syy += (b - m) * (b - m);
    }
    sxy / (sxx * syy).sqrt()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let population = 6.0 / std::f64::consts::PI * 0.3f64.asin();
    let mc = monte_carlo_spearman(0.6, 1_000_000, 4);
    ensure!((mc - population).abs() <= 0.005, "Monte Carlo {mc} vs population {population}");

    let spec = single_pair_spec(0.6, 5000, 1);
    let runs = generate(&spec, Execution::Parallel).unwrap();
    let t = &spec.taxonomy;
    let (u, w) = (t.value_index(&"power".into()).unwrap(), t.value_index(&"achievement".into()).unwrap());
    let x: Vec<f64> = runs.latent.iter().map(|row| row[u]).collect();
    let y: Vec<f64> = runs.latent.iter().map(|row| row[w]).collect();
    let rho = spearman(&x, &y).unwrap().value;
    ensure!((rho - 0.582).abs() <= 0.05, "continuous Spearman {rho}");

    let mut top = 0;
    for seed in 1..=20 {
        let spec = single_pair_spec(0.6, 5000, seed);
        let r = coupling_matrix(&shifts_of(&spec, &paired_of(&spec)), 30);
        let (pu, pw) = (r.index_of("power").unwrap(), r.index_of("achievement").unwrap());
        let planted = r.entries[pu][pw].abs();
        let rest = (0..r.len())
            .flat_map(|i| (i + 1..r.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| (i, j) != (pu.min(pw), pu.max(pw)))
            .map(|(i, j)| r.entries[i][j].abs())
            .fold(0.0f64, f64::max);
        if planted > rest {
            top += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(top >= 19, "planted pair strictly largest in {top}/20 seeds");
    ensure!(secs < 60.0, "took {secs:.1}s");
    Ok(format!(
        "continuous rho {rho:.4} (population {population:.4}, MC {mc:.4}), planted pair on top {top}/20, {secs:.1}s"
    ))
}

fn criterion_5() -> Outcome {
    let mut ok = 0;
    let mut worst = (0.0f64, 0.0f64);
    for seed in 1..=20 {
        let mut spec = PlantedSpec::bundled_fixture();
        spec.params.n_scenes = 1000;
        spec.params.coupling.clear();
        spec.params.target_mean_shift = 0.0;
        spec.params.seed = seed;
        let sm = shifts_of(&spec, &paired_of(&spec));
        let max_r = max_off_diagonal(&coupling_matrix(&sm, 30)).0;
        let g = vat_core::metrics::gain(&sm, spec.params.target.as_str()).unwrap().abs();
        worst = (worst.0.max(max_r), worst.1.max(g));
        if max_r <= 0.1 && g <= 0.06 {
            ok += 1;
        }
    }
    ensure!(ok >= 19, "null control held in {ok}/20 seeds (worst max|R| {:.4}, |Gain| {:.4})", worst.0, worst.1);
    Ok(format!(
        "null control held in {ok}/20 seeds (worst max|R| {:.4}, |Gain| {:.4})",
        worst.0, worst.1
    ))
}

fn view(r: &TaxReport) -> (f64, Vec<Option<f64>>, Vec<f64>, f64, f64, Vec<Vec<f64>>) {
    (
        r.gain,
        r.gnd.as_ref().unwrap().iter().map(|e| e.deviation).collect(),
        r.vat_profile.clone(),
        r.nvat,
        r.gini,
        r.coupling.entries.clone(),
    )
}

fn criterion_6() -> Outcome {
    let spec = PlantedSpec::bundled_fixture();
    let paired = paired_of(&spec);
    let target = spec.params.target.as_str();
    let report = |sm: &ShiftMatrix| tax_report(sm, target, &ReportOptions::default(), Execution::Parallel).unwrap();
    let sm = shifts_of(&spec, &paired);
    let base = report(&sm);

    // monotone transforms leave Spearman untouched
    let (a, b) = (sm.column(0), sm.column(1));
    let both: Vec<(f64, f64)> = a.iter().zip(&b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = both.into_iter().unzip();
    let f = |v: &[f64]| v.iter().map(|t| t * t * t + 2.0 * t + 5.0).collect::<Vec<_>>();
    ensure!(
        spearman(&f(&x), &y).unwrap() == spearman(&x, &y).unwrap()
            && spearman(&f(&x), &f(&y)).unwrap() == spearman(&x, &y).unwrap(),
        "Spearman changed under a monotone transform"
    );

    let swapped = report(&build_shift_matrix(&paired.swapped(), &spec.taxonomy, Aggregation::ObservedMean, Execution::Parallel).unwrap());
    ensure!(swapped.gain == -base.gain, "swap gain {} vs {}", swapped.gain, base.gain);
    ensure!(
        swapped.vat_profile == base.vat_profile && swapped.nvat == base.nvat && swapped.gini == base.gini,
        "swap changed VAT/nVAT/Gini"
    );

    let mut g = rng(6);
    let base_view = view(&base);
    for _ in 0..3 {
        let mut order: Vec<usize> = (0..sm.n_samples()).collect();
        order.shuffle(&mut g);
        ensure!(view(&report(&sm.select_rows(&order))) == base_view, "metrics changed under sample permutation");
    }

    let base_gnd = &base_view.1;
    for lambda in [0.25, 0.5, 2.0, 8.0] {
        let got: Vec<Option<f64>> = gnd(&sm.scaled(lambda), target, 1e-6).unwrap().iter().map(|e| e.deviation).collect();
        ensure!(&got == base_gnd, "GND changed under scaling by {lambda}");
    }
    Ok("monotone, swap, permutation and dyadic scaling invariances hold exactly".into())
}

fn monotone_transform_fixture() -> ShiftMatrix {
    let mut g = rng(77);
    let base = grid(&mut g, 60);
    let noise = grid(&mut g, 60);
    let b: Vec<f64> = base.iter().map(|x| (x * x * x + x) / 2.0).collect();
    let c: Vec<f64> = base.iter().zip(&noise).map(|(x, n)| (x + n) / 2.0).collect();
    ShiftMatrix::from_dense(vec!["a".into(), "b".into(), "c".into()], vec![base, b, c]).unwrap()
}

fn micro_copy_spec(seed: u64) -> PlantedSpec {
    let t = Taxonomy::default_schwartz();
    let ids = t.value_ids();
    let loading = |i: usize| 0.85 - 0.08 * i as f64;
    let mut spec = PlantedSpec::bundled_fixture();
    spec.params.coupling = (0..ids.len())
        .flat_map(|i| (i + 1..ids.len()).map(move |j| (i, j)))
        .map(|(i, j)| PlantedCoupling {
            u: ids[i].clone(),
            w: ids[j].clone(),
            r: loading(i) * loading(j),
        })
        .collect();
    spec.params.n_scenes = 1000;
    spec.params.micro_noise_scale = 0.3;
    spec.params.noise_scale = 0.7;
    spec.params.target_mean_shift = 0.0;
    spec.params.seed = seed;
    spec
}

fn criterion_7() -> Outcome {
    let spec = PlantedSpec::bundled_fixture();
    let paired = paired_of(&spec);
    let t = &spec.taxonomy;
    let opts = |fraction, seed| BootstrapOptions {
        fraction,
        replicates: 25,
        ..BootstrapOptions::with_seed(seed)
    };
    let full = bootstrap_nvat(&paired, t, &opts(1.0, 3), Execution::Parallel).unwrap();
    ensure!(full.std == 0.0, "fraction 1.0 std {}", full.std);

    let a = bootstrap_nvat(&paired, t, &opts(0.8, 9), Execution::Parallel).unwrap();
    let b = bootstrap_nvat(&paired, t, &opts(0.8, 9), Execution::Serial).unwrap();
    ensure!(a.replicate_values == b.replicate_values, "fixed seed gave different replicate vectors");

    let o = opts(0.8, 9);
    let scenes: Vec<&str> = paired.scene_ids().into_iter().collect();
    for (r, &value) in a.replicate_values.iter().enumerate().take(5) {
        let picked: BTreeSet<&str> = replicate_scenes(scenes.len(), o.fraction, o.mode, o.seed, r)
            .into_iter()
            .map(|i| scenes[i])
            .collect();
        let sub = paired.filter_scenes(&picked);
        let kept: BTreeSet<&str> = sub.samples().iter().map(|s| s.scene_id.as_str()).collect();
        ensure!(kept == picked, "replicate {r}: scene membership differs");
        let whole = paired
            .samples()
            .iter()
            .filter(|s| picked.contains(s.scene_id.as_str()))
            .all(|s| sub.samples().contains(s));
        ensure!(whole, "replicate {r}: a scene was split");
        let sm = build_shift_matrix(&sub, t, Aggregation::ObservedMean, Execution::Serial).unwrap();
        ensure!(system_tax(&coupling_matrix(&sm, o.min_support)) == value, "replicate {r}: nVAT differs from rebuild");
    }

    let micro = micro_copy_spec(8);
    let cg = cross_granularity(&paired_of(&micro), &micro.taxonomy, &CrossGranularityOptions::default(), Execution::Parallel)
        .unwrap();
    ensure!(cg.rank_correlation >= 0.9, "cross-granularity {}", cg.rank_correlation);

    let ra = rank_agreement(&monotone_transform_fixture(), 30, CorrelationKind::Spearman, Execution::Parallel).unwrap();
    ensure!(ra.rank_agreement == 1.0, "rank agreement {}", ra.rank_agreement);
    Ok(format!(
        "std 0 at fraction 1, seeded replicates identical, scenes atomic, cross-granularity {:.3}, rank agreement 1",
        cg.rank_correlation
    ))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

/// File content with input locations removed; those differ between working
/// directories while the content hashes must not.
fn comparable(root: &Path, rel: &Path) -> Vec<u8> {
    let bytes = std::fs::read(root.join(rel)).unwrap();
    if rel.file_name().is_some_and(|n| n == "manifest.json") {
        let mut v: Value = serde_json::from_slice(&bytes).unwrap();
        if let Some(inputs) = v.get_mut("inputs").and_then(Value::as_array_mut) {
            for i in inputs {
                i.as_object_mut().unwrap().remove("path");
            }
        }
        return v.to_string().into_bytes();
    }
    bytes
}

fn out_path(line: &str) -> PathBuf {
    let v: Value = serde_json::from_str(line).unwrap();
    PathBuf::from(v["out"].as_str().unwrap())
}

fn end_to_end(root: &Path) -> Result<(), vat_cli::CliError> {
    let exec = Execution::Parallel;
    let out = json!(root.join("runs"));
    let synth = vat_cli::cmd_synth(load_document(None, &[], vec![("out_dir", Some(out.clone()))])?, exec)?;
    let synth_dir = out_path(&synth);
    let cfg = synth_dir.join("pipeline.json");
    let keys = vat_cli::commands::RUN_PATH_KEYS;
    let pipe = vat_cli::cmd_pipeline(load_document(Some(&cfg), &keys, vec![("out_dir", Some(out.clone()))])?, exec)?;
    let report = out_path(&pipe).join("report.json");
    vat_cli::cmd_figures(
        load_document(
            None,
            &[],
            vec![
                ("out_dir", Some(out.clone())),
                ("reports", Some(json!([report]))),
                ("taxonomy", Some(json!(synth_dir.join("taxonomy.json")))),
            ],
        )?,
        exec,
    )?;
    vat_cli::cmd_robustness(
        load_document(
            Some(&cfg),
            &keys,
            vec![
                ("out_dir", Some(out)),
                ("seed", Some(json!(17))),
                ("replicates", Some(json!(100))),
            ],
        )?,
        exec,
    )?;
    Ok(())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    end_to_end(a.path()).map_err(|e| e.to_json_line())?;
    end_to_end(b.path()).map_err(|e| e.to_json_line())?;
    let secs = start.elapsed().as_secs_f64();
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    ensure!(fa == fb, "different file sets");
    ensure!(fa.len() >= 20, "only {} files written", fa.len());
    for rel in &fa {
        ensure!(comparable(a.path(), rel) == comparable(b.path(), rel), "{} differs between runs", rel.display());
    }
    ensure!(secs < 30.0, "two end-to-end runs took {secs:.1}s");
    Ok(format!("synth, pipeline, figures, robustness: {} identical files, {secs:.1}s for two runs", fa.len()))
}

fn elicit_items(n: usize) -> Vec<ElicitItem> {
    let t = Taxonomy::default_schwartz();
    (0..n)
        .map(|i| ElicitItem {
            scene_id: format!("scene-{:03}", i / 3),
            action_id: format!("a{}", i % 3),
            micro_value: t.micro_values()[(7 * i) % t.micro_values().len()].id.clone(),
            polarity: if i % 4 == 0 {
                vat_core::evidence::Polarity::Violate
            } else {
                vat_core::evidence::Polarity::Support
            },
            scene: format!("A neighbour asks for help with a dispute, case {i}."),
            action: format!("Option {i}: mediate between the parties."),
            claim: None,
            country: None,
            topic: None,
        })
        .collect()
}

fn steering() -> SteeringSpec {
    SteeringSpec {
        target_value: "security".into(),
        direction: vat_core::dataset::Direction::Reinforce,
        shots: 2,
        exemplars: (0..2)
            .map(|i| Exemplar {
                scene: format!("Exemplar scene {i}"),
                action: format!("Exemplar action {i}"),
                judgment: "5".into(),
            })
            .collect(),
    }
}

fn run_elicit(dir: &Path, dataset: &Path, condition: &str, mock: Value) -> Result<Value, String> {
    let post = condition == "post";
    let mut doc = serde_json::Map::new();
    doc.insert("dataset".into(), json!(dataset));
    doc.insert("out_dir".into(), json!(dir));
    doc.insert("mock".into(), mock);
    doc.insert(
        "endpoint".into(),
        json!({"base_url": "http://unused", "model_name": "mock", "backoff_base_ms": 1, "backoff_max_ms": 4, "max_concurrent": 4}),
    );
    doc.insert(
        "manifest".into(),
        json!({
            "run_id": format!("mock-{condition}"),
            "model": "mock",
            "condition": condition,
            "intervention": if post { "prompt_steer" } else { "none" },
            "shots": if post { 2 } else { 0 },
            "target_value": "security",
        }),
    );
    if post {
        doc.insert("steering".into(), serde_json::to_value(steering()).unwrap());
    }
    let line = vat_cli::cmd_elicit(doc, Execution::Parallel).map_err(|e| e.to_json_line())?;
    Ok(serde_json::from_str(&line).unwrap())
}

fn keys_of(run: &Path) -> BTreeSet<(String, String, String)> {
    std::fs::read_to_string(run)
        .unwrap()
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            let s = |k: &str| v[k].as_str().unwrap().to_owned();
            (s("scene_id"), s("action_id"), s("micro_value"))
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let items = elicit_items(30);
    let dataset = dir.path().join("items.jsonl");
    let text: String = items.iter().map(|i| serde_json::to_string(i).unwrap() + "\n").collect();
    std::fs::write(&dataset, text).unwrap();

    let pre = run_elicit(dir.path(), &dataset, "pre", json!({"prose": true}))?;
    let post = run_elicit(dir.path(), &dataset, "post", json!({"prose": true}))?;
    let pre_dir = PathBuf::from(pre["out"].as_str().unwrap());
    let post_dir = PathBuf::from(post["out"].as_str().unwrap());
    let (kp, kq) = (keys_of(&pre_dir.join("mock-pre.jsonl")), keys_of(&post_dir.join("mock-post.jsonl")));
    ensure!(kp.len() == 30 && kp == kq, "pre/post key sets differ ({} vs {})", kp.len(), kq.len());

    let t = Taxonomy::default_schwartz();
    let plain = prompts_for(&items, &t, None).unwrap();
    let steered = prompts_for(&items, &t, Some(&steering())).unwrap();
    ensure!(
        plain.iter().zip(&steered).all(|(a, b)| a.body == b.body && a.prefix.is_empty() && !b.prefix.is_empty()),
        "probe bodies differ across conditions"
    );

    // transient 503s are retried until every item completes
    let flaky_dir = dir.path().join("flaky");
    let flaky = run_elicit(&flaky_dir, &dataset, "pre", json!({"fail_first": 2, "fail_status": 503}))?;
    let stats: Value = serde_json::from_slice(
        &std::fs::read(PathBuf::from(flaky["out"].as_str().unwrap()).join("elicit.json")).unwrap(),
    )
    .unwrap();
    ensure!(
        stats["retries"].as_u64().unwrap_or(0) > 0 && flaky["failures"] == 0 && flaky["completed"] == 30,
        "retry run: {flaky}"
    );

    // interrupted run: keep 11 checkpoint lines plus a torn one, then rerun
    let ckpt = pre_dir.join("checkpoint.jsonl");
    let reference = std::fs::read(pre_dir.join("mock-pre.jsonl")).unwrap();
    let kept: String = std::fs::read_to_string(&ckpt).unwrap().lines().take(11).map(|l| format!("{l}\n")).collect();
    std::fs::write(&ckpt, kept + "{\"run_id\":\"mock-pre\",\"sce").unwrap();
    let again = run_elicit(dir.path(), &dataset, "pre", json!({"prose": true}))?;
    ensure!(again["out"] == pre["out"], "rerun landed in a different run directory");
    ensure!(again["resumed"] == 11 && again["completed"] == 30, "resume: {again}");
    ensure!(
        std::fs::read(pre_dir.join("mock-pre.jsonl")).unwrap() == reference,
        "resumed run differs from the uninterrupted one"
    );
    Ok("equal pre/post key sets, identical probe bodies, 503 retries recovered, checkpoint resume (11/30) byte-identical".into())
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (n, f) in criteria {
        if filter.is_some_and(|k| k != n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {n}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
